//! Reduced surfaces `Phi^{-1}(beta)/T` of the explicit family and numerical
//! Morse/connectivity scans of the reduced function `gbar`.
//!
//! On `Phi^{-1}(beta)` the squared radii `s_j = r_j^2` run along a segment
//! `s(t)`, `t in [0, 1]`, parallel to the defining vector. The remaining angle
//! is `psi = sum xi_j theta_j`, and `gbar(t, psi) = R(t) sin(psi)` with
//! `R(t) = prod s_j(t)^{|xi_j|/2}`. When both endpoint circles collapse the
//! chart is a sphere, triangulated here by a `t x psi` grid with two poles.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::coeff::rational_to_f64;
use crate::error::{Error, Result};
use crate::family::{FamilySystem, PolarPoint};
use crate::lattice::stabilizer_at;

/// Smallest accepted grid resolution.
pub const MIN_RESOLUTION: usize = 64;
/// Critical levels are avoided by this fraction of the value range.
pub const LEVEL_SHIFT: f64 = 1e-3;

/// Radial profile of a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `R(t) = prod s_j(t)^{|xi_j|/2}` along the moment segment.
    Family,
    /// `R(t) = sin(pi t) (1 + depth - cos(4 pi t))`, with two interior maxima.
    TwoMaxima { depth: f64 },
}

/// Coordinates on a reduced surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedSurfaceChart {
    pub beta: Vec<f64>,
    pub xi: Vec<i64>,
    /// `s(0)` and `s(1)`.
    pub segment_start: Vec<f64>,
    pub segment_end: Vec<f64>,
    /// Coordinates vanishing at `t = 0` and `t = 1`.
    pub endpoint_supports: [Vec<usize>; 2],
    pub collapse_flags: [bool; 2],
    /// The segment is a single point and the reduced space is a point.
    pub degenerate: bool,
    pub profile: Profile,
}

impl ReducedSurfaceChart {
    /// Synthetic sphere chart whose profile has two interior maxima.
    pub fn two_maxima(depth: f64) -> Self {
        Self {
            beta: Vec::new(),
            xi: Vec::new(),
            segment_start: Vec::new(),
            segment_end: Vec::new(),
            endpoint_supports: [Vec::new(), Vec::new()],
            collapse_flags: [true, true],
            degenerate: false,
            profile: Profile::TwoMaxima { depth },
        }
    }

    /// `s(t)`.
    pub fn segment_at(&self, t: f64) -> Vec<f64> {
        self.segment_start
            .iter()
            .zip(&self.segment_end)
            .map(|(&a, &b)| (a + t * (b - a)).max(0.0))
            .collect()
    }

    /// `R(t)`.
    pub fn r_profile(&self, t: f64) -> f64 {
        match self.profile {
            Profile::Family => self
                .segment_at(t)
                .iter()
                .zip(&self.xi)
                .filter(|(_, &x)| x != 0)
                .map(|(&s, &x)| s.powf(x.unsigned_abs() as f64 / 2.0))
                .product(),
            Profile::TwoMaxima { depth } => {
                use std::f64::consts::PI;
                (PI * t).sin() * (1.0 + depth - (4.0 * PI * t).cos())
            }
        }
    }

    /// `R'(t)` in closed form.
    pub fn r_profile_derivative(&self, t: f64) -> f64 {
        match self.profile {
            Profile::Family => {
                let s = self.segment_at(t);
                let r = self.r_profile(t);
                s.iter()
                    .enumerate()
                    .filter(|&(j, _)| self.xi[j] != 0)
                    .map(|(j, &sj)| {
                        let ds = self.segment_end[j] - self.segment_start[j];
                        r * self.xi[j].unsigned_abs() as f64 * ds / (2.0 * sj)
                    })
                    .sum()
            }
            Profile::TwoMaxima { depth } => {
                use std::f64::consts::PI;
                PI * (PI * t).cos() * (1.0 + depth - (4.0 * PI * t).cos())
                    + (PI * t).sin() * 4.0 * PI * (4.0 * PI * t).sin()
            }
        }
    }

    /// `gbar(t, psi)`.
    pub fn gbar(&self, t: f64, psi: f64) -> f64 {
        self.r_profile(t) * psi.sin()
    }

    /// A point of `Phi^{-1}(beta)` over `(t, psi)`; only for family charts.
    pub fn lift(&self, t: f64, psi: f64) -> Option<PolarPoint> {
        if self.profile != Profile::Family {
            return None;
        }
        let s = self.segment_at(t);
        let r: Vec<f64> = s.iter().map(|x| x.sqrt()).collect();
        let mut theta = vec![0.0; r.len()];
        let j = (0..r.len()).find(|&j| self.xi[j] != 0 && r[j] > 0.0)?;
        theta[j] = psi / self.xi[j] as f64;
        Some(PolarPoint { r, theta })
    }
}

/// Solves `A x = b` over the rationals for square invertible `A`.
fn solve_rational(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Option<Vec<BigRational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&i| !a[i][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        for i in 0..n {
            if i != col && !a[i][col].is_zero() {
                let f = &a[i][col] / &a[col][col];
                for k in col..n {
                    let d = &f * &a[col][k];
                    a[i][k] -= d;
                }
                let d = &f * &b[col];
                b[i] -= d;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Builds the chart of `Phi^{-1}(beta)/T`.
///
/// The segment `{s >= 0 : W s = 2 beta}` is solved in exact arithmetic from
/// the binary value of `beta`.
pub fn reduced_surface(sys: &FamilySystem, beta: &[f64]) -> Result<ReducedSurfaceChart> {
    if !sys.proper {
        return Err(Error::NotProper);
    }
    let r = sys.w.torus_dim();
    let n = sys.n();
    if beta.len() != r {
        return Err(Error::DimensionMismatch { expected: r, got: beta.len() });
    }
    let rat = |x: i64| BigRational::from_integer(BigInt::from(x));
    let two_beta: Vec<BigRational> = beta
        .iter()
        .map(|&b| {
            BigRational::from_float(b)
                .map(|q| q * rat(2))
                .ok_or_else(|| Error::Parse(format!("non-finite beta component {b}")))
        })
        .collect::<Result<_>>()?;
    let xi = &sys.xi.xi;
    let pivot = (0..n).find(|&j| xi[j] != 0).ok_or_else(|| Error::InvalidAction("zero defining vector".into()))?;
    let others: Vec<usize> = (0..n).filter(|&j| j != pivot).collect();
    let a: Vec<Vec<BigRational>> = sys.w.rows().iter().map(|row| others.iter().map(|&j| rat(row[j])).collect()).collect();
    let sol = solve_rational(a, two_beta).ok_or_else(|| Error::InvalidAction("singular weight minor".into()))?;
    let mut base = vec![BigRational::zero(); n];
    for (k, &j) in others.iter().enumerate() {
        base[j] = sol[k].clone();
    }
    // s = base + lambda xi, clipped to s >= 0.
    let mut lo: Option<BigRational> = None;
    let mut hi: Option<BigRational> = None;
    for j in 0..n {
        if xi[j] == 0 {
            if base[j].is_negative() {
                return Err(Error::EmptyFiber);
            }
            continue;
        }
        let bound = -&base[j] / rat(xi[j]);
        if xi[j] > 0 {
            lo = Some(lo.map_or(bound.clone(), |l| l.max(bound)));
        } else {
            hi = Some(hi.map_or(bound.clone(), |h| h.min(bound)));
        }
    }
    let (lo, hi) = match (lo, hi) {
        (Some(l), Some(h)) => (l, h),
        _ => return Err(Error::NotProper),
    };
    if lo > hi {
        return Err(Error::EmptyFiber);
    }
    let at = |lambda: &BigRational| -> Vec<BigRational> { (0..n).map(|j| &base[j] + lambda * rat(xi[j])).collect() };
    let s0 = at(&lo);
    let s1 = at(&hi);
    let supp = |s: &[BigRational]| -> Vec<usize> { (0..n).filter(|&j| s[j].is_zero()).collect() };
    let endpoint_supports = [supp(&s0), supp(&s1)];
    let degenerate = lo == hi;
    let mut collapse_flags = [false, false];
    if !degenerate {
        let everywhere: Vec<usize> = endpoint_supports[0].iter().copied().filter(|j| endpoint_supports[1].contains(j)).collect();
        if !everywhere.is_empty() {
            return Err(Error::ChartUnsupported(format!(
                "coordinates {everywhere:?} vanish along the whole segment"
            )));
        }
        for (flag, support) in collapse_flags.iter_mut().zip(&endpoint_supports) {
            let stab = stabilizer_at(&sys.w, support)?;
            // The endpoint circle collapses iff the residual action is transitive on it.
            *flag = stab.rank + 1 == support.len();
            if !*flag {
                return Err(Error::ChartUnsupported(format!("endpoint circle over support {support:?} does not collapse")));
            }
        }
    }
    Ok(ReducedSurfaceChart {
        beta: beta.to_vec(),
        xi: xi.clone(),
        segment_start: s0.iter().map(rational_to_f64).collect(),
        segment_end: s1.iter().map(rational_to_f64).collect(),
        endpoint_supports,
        collapse_flags,
        degenerate,
        profile: Profile::Family,
    })
}

/// `gbar(t, psi)`.
pub fn gbar_eval(chart: &ReducedSurfaceChart, t: f64, psi: f64) -> f64 {
    chart.gbar(t, psi)
}

/// A critical point of `gbar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub t: f64,
    pub psi: f64,
    pub value: f64,
    pub index: u8,
}

/// Critical points and level statistics of one chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorseReport {
    pub critical_points: Vec<CriticalPoint>,
    pub euler_characteristic: i64,
    /// Critical points whose refined Hessian index differs from the grid index.
    pub index_mismatches: usize,
    /// `(c, component count)` pairs.
    pub level_scan: Vec<(f64, usize)>,
}

impl MorseReport {
    pub fn index_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for p in &self.critical_points {
            counts[p.index as usize] += 1;
        }
        counts
    }
}

/// Values of `gbar` on the triangulated sphere.
///
/// Vertices are the rows `i = 1..res-1` of the `t` grid (each with `res`
/// angles) and the two poles `t = 0`, `t = 1`.
#[derive(Debug, Clone)]
pub struct GridField {
    res: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(chart: &ReducedSurfaceChart, resolution: usize) -> Self {
        let res = resolution.max(MIN_RESOLUTION);
        let step_psi = std::f64::consts::TAU / res as f64;
        let mut values = Vec::with_capacity((res - 1) * res + 2);
        for i in 1..res {
            let r = chart.r_profile(i as f64 / res as f64);
            values.extend((0..res).map(|k| r * (k as f64 * step_psi).sin()));
        }
        values.push(chart.gbar(0.0, 0.0));
        values.push(chart.gbar(1.0, 0.0));
        Self { res, values }
    }

    pub fn resolution(&self) -> usize {
        self.res
    }

    /// Vertex id of grid node `(i, k)`, `i in 0..=res`.
    fn vertex(&self, i: usize, k: usize) -> usize {
        let res = self.res;
        match i {
            0 => (res - 1) * res,
            i if i == res => (res - 1) * res + 1,
            i => (i - 1) * res + k % res,
        }
    }

    fn coords(&self, v: usize) -> (f64, f64) {
        let res = self.res;
        let tau = std::f64::consts::TAU;
        if v == (res - 1) * res {
            (0.0, 0.0)
        } else if v == (res - 1) * res + 1 {
            (1.0, 0.0)
        } else {
            (((v / res) + 1) as f64 / res as f64, (v % res) as f64 * tau / res as f64)
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    }

    /// Strict order on vertices with ties broken by id.
    fn above(&self, a: usize, b: usize) -> bool {
        (self.values[a], a) > (self.values[b], b)
    }

    /// Cyclic link of a vertex in the triangulation.
    fn link(&self, v: usize) -> Vec<usize> {
        let res = self.res;
        let pole0 = (res - 1) * res;
        if v == pole0 {
            return (0..res).map(|k| self.vertex(1, k)).collect();
        }
        if v == pole0 + 1 {
            return (0..res).map(|k| self.vertex(res - 1, k)).collect();
        }
        let (i, k) = (v / res + 1, v % res);
        let km = (k + res - 1) % res;
        let ring = [
            self.vertex(i + 1, k),
            self.vertex(i + 1, k + 1),
            self.vertex(i, k + 1),
            self.vertex(i - 1, k),
            self.vertex(i - 1, km),
            self.vertex(i, km),
        ];
        let mut out: Vec<usize> = Vec::with_capacity(6);
        for &u in &ring {
            if out.last() != Some(&u) {
                out.push(u);
            }
        }
        if out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
        out
    }

    /// Grid-level critical vertices as `(vertex, index, multiplicity)`.
    fn pl_critical(&self) -> Vec<(usize, u8, usize)> {
        let mut out = Vec::new();
        for v in 0..self.values.len() {
            let link = self.link(v);
            let up: Vec<bool> = link.iter().map(|&u| self.above(u, v)).collect();
            let changes = (0..up.len()).filter(|&i| up[i] != up[(i + 1) % up.len()]).count();
            match changes {
                0 if up[0] => out.push((v, 0, 1)),
                0 => out.push((v, 2, 1)),
                2 => {}
                c => out.push((v, 1, c / 2 - 1)),
            }
        }
        out
    }

    /// Number of connected components of `{gbar = c}`.
    pub fn level_components(&self, c: f64) -> usize {
        let res = self.res;
        let side: Vec<bool> = self.values.iter().map(|&x| x >= c).collect();
        let crossed = |a: usize, b: usize| side[a] != side[b];
        // Cell (i, k), i in 0..res, k in 0..res; triangle ids 2*cell (lower) and 2*cell+1 (upper).
        let cells = res * res;
        let mut uf = UnionFind::new(2 * cells);
        let mut active = vec![false; 2 * cells];
        for i in 0..res {
            for k in 0..res {
                let cell = i * res + k;
                let (a, b, c2, d) = (self.vertex(i, k), self.vertex(i + 1, k), self.vertex(i + 1, k + 1), self.vertex(i, k + 1));
                let lower = 2 * cell;
                let upper = lower + 1;
                active[lower] = crossed(a, b) || crossed(b, c2) || crossed(a, c2);
                active[upper] = crossed(a, c2) || crossed(c2, d) || crossed(a, d);
                if crossed(a, c2) {
                    uf.union(lower, upper);
                }
                if i + 1 < res && crossed(b, c2) {
                    uf.union(lower, 2 * ((i + 1) * res + k) + 1);
                }
                if crossed(a, b) {
                    uf.union(lower, 2 * (i * res + (k + res - 1) % res) + 1);
                }
            }
        }
        let mut roots: Vec<usize> = (0..2 * cells).filter(|&x| active[x]).map(|x| uf.find(x)).collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Newton refinement of a critical point with central differences.
/// Returns the refined `(t, psi)` and the Hessian index, if non-degenerate.
fn refine(chart: &ReducedSurfaceChart, t0: f64, psi0: f64) -> Option<(f64, f64, u8)> {
    let h = 1e-5;
    let f = |t: f64, p: f64| chart.gbar(t, p);
    let (mut t, mut p) = (t0, psi0);
    let hessian = |t: f64, p: f64| {
        let c = f(t, p);
        let htt = (f(t + h, p) - 2.0 * c + f(t - h, p)) / (h * h);
        let hpp = (f(t, p + h) - 2.0 * c + f(t, p - h)) / (h * h);
        let htp = (f(t + h, p + h) - f(t + h, p - h) - f(t - h, p + h) + f(t - h, p - h)) / (4.0 * h * h);
        (htt, htp, hpp)
    };
    for _ in 0..30 {
        let gt = (f(t + h, p) - f(t - h, p)) / (2.0 * h);
        let gp = (f(t, p + h) - f(t, p - h)) / (2.0 * h);
        let (htt, htp, hpp) = hessian(t, p);
        let det = htt * hpp - htp * htp;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dt = (hpp * gt - htp * gp) / det;
        let dp = (htt * gp - htp * gt) / det;
        t = (t - dt).clamp(2.0 * h, 1.0 - 2.0 * h);
        p -= dp;
        if dt.abs() < 1e-13 && dp.abs() < 1e-13 {
            break;
        }
    }
    let (htt, htp, hpp) = hessian(t, p);
    let det = htt * hpp - htp * htp;
    let scale = htt.abs().max(hpp.abs()).max(htp.abs());
    if det.abs() <= 1e-10 * scale * scale {
        return None;
    }
    let index = if det < 0.0 {
        1
    } else if htt + hpp < 0.0 {
        2
    } else {
        0
    };
    Some((t, p.rem_euclid(std::f64::consts::TAU), index))
}

/// Enumerates critical points of `gbar` with their indices.
pub fn critical_scan(chart: &ReducedSurfaceChart, resolution: usize) -> Result<MorseReport> {
    if chart.degenerate {
        return Err(Error::NotMorse("reduced space is a single point".into()));
    }
    let field = GridField::new(chart, resolution);
    scan_field(chart, &field)
}

fn scan_field(chart: &ReducedSurfaceChart, field: &GridField) -> Result<MorseReport> {
    let (lo, hi) = field.min_max();
    if lo == 0.0 && hi == 0.0 {
        return Err(Error::NotMorse("gbar vanishes identically".into()));
    }
    let mut critical_points = Vec::new();
    let mut index_mismatches = 0;
    for (v, pl_index, multiplicity) in field.pl_critical() {
        let (t, psi) = field.coords(v);
        let interior = t > 0.0 && t < 1.0;
        let refined = if interior { refine(chart, t, psi) } else { None };
        let (t, psi, index) = match refined {
            Some((rt, rp, idx)) => {
                if idx != pl_index {
                    index_mismatches += 1;
                }
                (rt, rp, pl_index)
            }
            None => (t, psi, pl_index),
        };
        for _ in 0..multiplicity {
            critical_points.push(CriticalPoint { t, psi, value: chart.gbar(t, psi), index });
        }
    }
    let counts = {
        let mut c = [0i64; 3];
        for p in &critical_points {
            c[p.index as usize] += 1;
        }
        c
    };
    Ok(MorseReport {
        critical_points,
        euler_characteristic: counts[0] - counts[1] + counts[2],
        index_mismatches,
        level_scan: Vec::new(),
    })
}

/// Number of components of `{gbar = c}` at the given resolution.
pub fn level_components(chart: &ReducedSurfaceChart, c: f64, resolution: usize) -> usize {
    if chart.degenerate {
        return usize::from(c == 0.0);
    }
    GridField::new(chart, resolution).level_components(c)
}

/// `count` levels spread over `[lo, hi]`, moved at least `LEVEL_SHIFT * (hi - lo)`
/// away from every critical value.
pub fn off_critical_levels(lo: f64, hi: f64, count: usize, critical_values: &[f64]) -> Vec<f64> {
    let range = hi - lo;
    let delta = LEVEL_SHIFT * range;
    (0..count)
        .map(|k| {
            let mut c = if count == 1 { 0.5 * (lo + hi) } else { lo + range * k as f64 / (count - 1) as f64 };
            for &v in critical_values.iter().chain([lo, hi].iter()) {
                if (c - v).abs() < delta {
                    c = if c >= v { v + delta } else { v - delta };
                }
            }
            c.clamp(lo + delta, hi - delta)
        })
        .collect()
}

/// Outcome of the Morse/connectivity comparison for one chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartConnectivity {
    pub beta: Vec<f64>,
    /// `ok`, or the reason the row carries no data.
    pub status: String,
    pub morse: Option<MorseReport>,
    /// No index-1 critical points.
    pub no_saddles: bool,
    /// Every nonempty level has one component and the Euler characteristic is 2.
    pub levels_connected: bool,
    pub consistent: bool,
}

impl ChartConnectivity {
    fn failed(beta: &[f64], status: &str) -> Self {
        Self {
            beta: beta.to_vec(),
            status: status.into(),
            morse: None,
            no_saddles: false,
            levels_connected: false,
            consistent: true,
        }
    }
}

/// Global verdict of a connectivity scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConsistentTrue,
    ConsistentFalse,
    Inconsistent,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ConsistentTrue => "consistent-true",
            Verdict::ConsistentFalse => "consistent-false",
            Verdict::Inconsistent => "inconsistent",
        }
    }
}

/// Per-chart rows and the global verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityReport {
    pub resolution: usize,
    pub rows: Vec<ChartConnectivity>,
    pub verdict: Verdict,
}

impl ConnectivityReport {
    pub fn from_rows(resolution: usize, rows: Vec<ChartConnectivity>) -> Self {
        let ok: Vec<&ChartConnectivity> = rows.iter().filter(|r| r.status == "ok").collect();
        let verdict = if ok.iter().any(|r| !r.consistent) {
            Verdict::Inconsistent
        } else if ok.iter().all(|r| r.no_saddles) {
            Verdict::ConsistentTrue
        } else {
            Verdict::ConsistentFalse
        };
        Self { resolution, rows, verdict }
    }
}

/// Scans one chart: Morse data on one side, level connectivity on the other.
pub fn chart_connectivity(chart: &ReducedSurfaceChart, level_count: usize, resolution: usize) -> ChartConnectivity {
    if chart.degenerate {
        return ChartConnectivity::failed(&chart.beta, "point");
    }
    let field = GridField::new(chart, resolution);
    let mut morse = match scan_field(chart, &field) {
        Ok(m) => m,
        Err(_) => return ChartConnectivity::failed(&chart.beta, "not-morse"),
    };
    let (lo, hi) = field.min_max();
    let critical_values: Vec<f64> = morse.critical_points.iter().map(|p| p.value).collect();
    let levels = off_critical_levels(lo, hi, level_count, &critical_values);
    morse.level_scan = levels.iter().map(|&c| (c, field.level_components(c))).collect();
    let no_saddles = morse.index_counts()[1] == 0;
    let levels_connected =
        morse.level_scan.iter().all(|&(_, n)| n <= 1) && morse.euler_characteristic == 2;
    ChartConnectivity {
        beta: chart.beta.clone(),
        status: "ok".into(),
        consistent: no_saddles == levels_connected,
        no_saddles,
        levels_connected,
        morse: Some(morse),
    }
}

/// Scans every `beta` of the grid (in parallel when enabled).
pub fn connectivity_report(
    sys: &FamilySystem,
    beta_grid: &[Vec<f64>],
    level_count: usize,
    resolution: usize,
) -> Result<ConnectivityReport> {
    if !sys.proper {
        return Err(Error::NotProper);
    }
    let resolution = resolution.max(MIN_RESOLUTION);
    let row = |beta: &Vec<f64>| match reduced_surface(sys, beta) {
        Ok(chart) => chart_connectivity(&chart, level_count, resolution),
        Err(Error::EmptyFiber) => ChartConnectivity::failed(beta, "empty-fiber"),
        Err(Error::ChartUnsupported(_)) => ChartConnectivity::failed(beta, "chart-unsupported"),
        Err(e) => ChartConnectivity::failed(beta, &format!("error: {e}")),
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<ChartConnectivity> = {
        use rayon::prelude::*;
        beta_grid.par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<ChartConnectivity> = beta_grid.iter().map(row).collect();
    Ok(ConnectivityReport::from_rows(resolution, rows))
}

/// Regular grid `lo..=hi` with `count` points on each of `dim` axes.
pub fn beta_grid(dim: usize, lo: f64, hi: f64, count: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..count)
        .map(|k| if count == 1 { lo } else { lo + (hi - lo) * k as f64 / (count - 1) as f64 })
        .collect();
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| axis.iter().map(move |&x| {
                let mut q = p.clone();
                q.push(x);
                q
            }))
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::build_family;
    use crate::lattice::WeightMatrix;
    use std::f64::consts::FRAC_PI_2;

    fn family(cols: &[&[i64]]) -> FamilySystem {
        let cols: Vec<Vec<i64>> = cols.iter().map(|c| c.to_vec()).collect();
        build_family(&WeightMatrix::from_columns(&cols).unwrap()).unwrap()
    }

    fn f11() -> FamilySystem {
        family(&[&[1, 0], &[0, 1], &[1, 1]])
    }

    #[test]
    fn segment_for_unit_beta() {
        let chart = reduced_surface(&f11(), &[1.0, 1.0]).unwrap();
        assert_eq!(chart.segment_start, vec![0.0, 0.0, 2.0]);
        assert_eq!(chart.segment_end, vec![2.0, 2.0, 0.0]);
        assert_eq!(chart.endpoint_supports, [vec![0, 1], vec![2]]);
        assert_eq!(chart.collapse_flags, [true, true]);
        assert!(!chart.degenerate);
    }

    #[test]
    fn empty_and_point_fibers() {
        let f = f11();
        assert_eq!(reduced_surface(&f, &[-1.0, 1.0]), Err(Error::EmptyFiber));
        let chart = reduced_surface(&f, &[1.0, 0.0]).unwrap();
        assert!(chart.degenerate);
        assert_eq!(chart.segment_start, vec![2.0, 0.0, 0.0]);
        assert!(matches!(critical_scan(&chart, 64), Err(Error::NotMorse(_))));
        let nonproper = build_family(&WeightMatrix::new(vec![vec![1, -1]]).unwrap()).unwrap();
        assert_eq!(reduced_surface(&nonproper, &[1.0]), Err(Error::NotProper));
    }

    #[test]
    fn gbar_values() {
        let chart = reduced_surface(&f11(), &[1.0, 1.0]).unwrap();
        assert_eq!(gbar_eval(&chart, 0.4, 0.0), 0.0);
        assert!(gbar_eval(&chart, 0.4, FRAC_PI_2) > 0.0);
        assert_eq!(gbar_eval(&chart, 0.0, FRAC_PI_2), 0.0);
    }

    #[test]
    fn lift_matches_family() {
        let f = family(&[&[1, 0], &[0, 1], &[2, 1]]);
        let chart = reduced_surface(&f, &[1.5, 0.7]).unwrap();
        for k in 1..50 {
            let (t, psi) = (k as f64 / 50.0, k as f64 * 0.37);
            let w = chart.lift(t, psi).unwrap();
            let (phi, g) = f.eval_polar(&w).unwrap();
            assert!((phi[0] - 1.5).abs() < 1e-12 && (phi[1] - 0.7).abs() < 1e-12);
            let gb = gbar_eval(&chart, t, psi);
            assert!((g - gb).abs() <= 1e-10 * gb.abs().max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn family_sphere_scan() {
        let chart = reduced_surface(&f11(), &[1.0, 1.0]).unwrap();
        let m = critical_scan(&chart, 256).unwrap();
        assert_eq!(m.index_counts(), [1, 0, 1]);
        assert_eq!(m.euler_characteristic, 2);
        assert_eq!(m.index_mismatches, 0);
        // R(t) = 2t sqrt(2 - 2t) peaks at t = 2/3.
        for p in &m.critical_points {
            assert!((p.t - 2.0 / 3.0).abs() < 1e-6, "{p:?}");
            assert!((p.psi - FRAC_PI_2).abs() < 1e-6 || (p.psi - 3.0 * FRAC_PI_2).abs() < 1e-6);
            assert!(chart.r_profile_derivative(p.t).abs() < 1e-6);
        }
    }

    #[test]
    fn synthetic_saddles() {
        let chart = ReducedSurfaceChart::two_maxima(0.2);
        let m = critical_scan(&chart, 256).unwrap();
        assert_eq!(m.index_counts(), [2, 2, 2]);
        assert_eq!(m.euler_characteristic, 2);
        let saddle = chart.r_profile(0.5);
        let peak = chart.r_profile(0.25);
        assert_eq!(level_components(&chart, 0.5 * (saddle + peak), 256), 2);
        assert_eq!(level_components(&chart, 0.5 * saddle, 256), 1);
        let row = chart_connectivity(&chart, 21, 256);
        assert!(!row.no_saddles && !row.levels_connected && row.consistent);
    }

    #[test]
    fn level_counts() {
        let chart = reduced_surface(&f11(), &[1.0, 1.0]).unwrap();
        let field = GridField::new(&chart, 128);
        let (_, hi) = field.min_max();
        assert_eq!(field.level_components(hi + 1.0), 0);
        for c in [-0.9 * hi, -0.3 * hi, 0.0, 0.5 * hi, 0.99 * hi] {
            assert_eq!(field.level_components(c), 1, "c = {c}");
        }
    }

    #[test]
    fn profile_derivative_matches_difference() {
        let f = family(&[&[1, 0], &[0, 1], &[2, 1]]);
        let chart = reduced_surface(&f, &[1.2, 0.9]).unwrap();
        for chart in [chart, ReducedSurfaceChart::two_maxima(0.3)] {
            for k in 1..20 {
                let t = k as f64 / 20.0;
                let h = 1e-6;
                let fd = (chart.r_profile(t + h) - chart.r_profile(t - h)) / (2.0 * h);
                assert!((fd - chart.r_profile_derivative(t)).abs() < 1e-6 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn levels_avoid_critical_values() {
        let levels = off_critical_levels(-1.0, 1.0, 21, &[0.0, 0.5]);
        assert_eq!(levels.len(), 21);
        for c in levels {
            assert!(c.abs() >= 2e-3 - 1e-15 && (c - 0.5).abs() >= 2e-3 - 1e-15 && c.abs() < 1.0);
        }
    }

    #[test]
    fn small_report() {
        let grid = beta_grid(2, 0.5, 1.5, 2);
        assert_eq!(grid.len(), 4);
        let mut grid2 = grid.clone();
        grid2.push(vec![-1.0, 1.0]);
        let report = connectivity_report(&f11(), &grid2, 7, 64).unwrap();
        assert_eq!(report.verdict, Verdict::ConsistentTrue);
        assert_eq!(report.rows[4].status, "empty-fiber");
    }
}
