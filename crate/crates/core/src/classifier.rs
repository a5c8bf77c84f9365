//! Classification of points of an integrable system `f = (Phi, g)` that
//! extends a complexity-one torus action on `C^m`.
//!
//! Real coordinates are ordered `(x_1, y_1, x_2, y_2, ...)` with `z_j = x_j + i y_j`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coeff::CRational;
use crate::error::{Error, Result};
use crate::jets::{chart_jet, zero_set_shape, ChartJet, ZeroSetShape};
use crate::lattice::{
    defining_vector, stabilizer_from_xi, too_bad_obstruction, DefiningVector, StabilizerData,
    WeightMatrix,
};
use crate::linalg::{column_span, complex_structure, from_rows, least_squares, null_space};
use crate::poly::InvariantPolynomial;

/// Relative singular-value cutoff for kernels and ranks.
pub const KERNEL_TOL: f64 = 1e-8;
/// Relative band for eigenvalue typing and degeneracy.
pub const EIGEN_TOL: f64 = 1e-7;
/// Relative support threshold: `|z_j| <= SUPPORT_TOL * max |z|` counts as zero.
pub const SUPPORT_TOL: f64 = 1e-10;

/// Torus action, relation and second integral on `C^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    /// `r x m` weights of the acting torus; `r = m - 1`.
    weights: Vec<Vec<i64>>,
    /// Relation with `sum xi_j eta_j = 0`; its gcd is the order of the finite part.
    xi: DefiningVector,
    g: InvariantPolynomial<CRational>,
    g64: InvariantPolynomial<Complex64>,
}

impl SystemSpec {
    /// System with explicit relation; `weights` may be empty (finite group only).
    pub fn new(weights: Vec<Vec<i64>>, xi: &[i64], g: InvariantPolynomial<CRational>) -> Result<Self> {
        let m = xi.len();
        if m == 0 {
            return Err(Error::InvalidAction("system needs at least one coordinate".into()));
        }
        if weights.len() + 1 != m {
            return Err(Error::InvalidAction(format!(
                "complexity one needs {} torus weights rows for {m} coordinates, got {}",
                m - 1,
                weights.len()
            )));
        }
        if let Some(row) = weights.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, got: row.len() });
        }
        if xi.iter().all(|&x| x == 0) {
            return Err(Error::InvalidAction("relation must be nonzero".into()));
        }
        for row in &weights {
            if row.iter().zip(xi).map(|(a, b)| a * b).sum::<i64>() != 0 {
                return Err(Error::InvalidAction(format!(
                    "relation {xi:?} is not orthogonal to weight row {row:?}"
                )));
            }
        }
        let wm = from_rows(
            &weights
                .iter()
                .map(|r| r.iter().map(|&x| x as f64).collect())
                .collect::<Vec<_>>(),
        );
        if crate::linalg::rank(&wm, 1e-12) != weights.len() {
            return Err(Error::InvalidAction("torus weights are linearly dependent".into()));
        }
        let xi = DefiningVector::new(xi.to_vec());
        if g.nvars() != m {
            return Err(Error::DimensionMismatch { expected: m, got: g.nvars() });
        }
        let g = g.with_context(xi.clone(), &(0..m).collect::<Vec<_>>());
        g.ensure_invariant()?;
        if !g.is_real(0.0) {
            return Err(Error::Parse("g is not real-valued".into()));
        }
        let g64 = g.to_c64();
        Ok(Self { weights, xi, g, g64 })
    }

    /// System of a valid weight matrix with its primitive defining vector.
    pub fn from_weight_matrix(w: &WeightMatrix, g: InvariantPolynomial<CRational>) -> Result<Self> {
        let xi = defining_vector(w)?;
        Self::new(w.rows().to_vec(), &xi.xi, g)
    }

    pub fn m(&self) -> usize {
        self.xi.len()
    }

    pub fn torus_dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<i64>] {
        &self.weights
    }

    pub fn xi(&self) -> &DefiningVector {
        &self.xi
    }

    pub fn g(&self) -> &InvariantPolynomial<CRational> {
        &self.g
    }

    pub fn g_value(&self, z: &[Complex64]) -> f64 {
        self.g64.eval_real(z)
    }

    /// `Phi(z) = 1/2 sum_j eta_j |z_j|^2`.
    pub fn phi(&self, z: &[Complex64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| 0.5 * row.iter().zip(z).map(|(&w, zj)| w as f64 * zj.norm_sqr()).sum::<f64>())
            .collect()
    }

    /// `r x 2m` Jacobian of `Phi`.
    pub fn phi_jacobian(&self, z: &[Complex64]) -> DMatrix<f64> {
        let m = self.m();
        DMatrix::from_fn(self.torus_dim(), 2 * m, |k, c| {
            let j = c / 2;
            let coord = if c % 2 == 0 { z[j].re } else { z[j].im };
            self.weights[k][j] as f64 * coord
        })
    }

    /// Hessian of `Phi^nu = <Phi, nu>`.
    pub fn phi_hessian(&self, nu: &[f64]) -> DMatrix<f64> {
        let m = self.m();
        let mut h = DMatrix::zeros(2 * m, 2 * m);
        for j in 0..m {
            let w: f64 = (0..self.torus_dim()).map(|k| nu[k] * self.weights[k][j] as f64).sum();
            h[(2 * j, 2 * j)] = w;
            h[(2 * j + 1, 2 * j + 1)] = w;
        }
        h
    }

    pub fn g_gradient(&self, z: &[Complex64]) -> DVector<f64> {
        DVector::from_vec(self.g64.real_gradient(z))
    }

    pub fn g_hessian(&self, z: &[Complex64]) -> DMatrix<f64> {
        from_rows(&self.g64.real_hessian(z))
    }

    /// Infinitesimal generator of the `k`-th torus factor at `z`.
    pub fn orbit_generator(&self, z: &[Complex64], k: usize) -> DVector<f64> {
        let m = self.m();
        DVector::from_fn(2 * m, |c, _| {
            let j = c / 2;
            let w = self.weights[k][j] as f64;
            if c % 2 == 0 {
                -w * z[j].im
            } else {
                w * z[j].re
            }
        })
    }

    /// Largest deviation `|g(t z) - g(z)|` over random torus elements and points.
    pub fn sampled_invariance_defect(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = self.m();
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let z: Vec<Complex64> = (0..m)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let t: Vec<f64> = (0..self.torus_dim())
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect();
            let moved: Vec<Complex64> = (0..m)
                .map(|j| {
                    let angle: f64 = (0..t.len()).map(|k| t[k] * self.weights[k][j] as f64).sum();
                    z[j] * Complex64::from_polar(1.0, angle)
                })
                .collect();
            let scale = 1.0 + self.g_value(&z).abs();
            worst = worst.max((self.g_value(&moved) - self.g_value(&z)).abs() / scale);
        }
        worst
    }
}

/// Williamson block type of a non-degenerate singular point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockType {
    Elliptic,
    Hyperbolic,
    FocusFocus,
}

/// Classification label; exactly one per point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "regular")]
    Regular,
    #[serde(rename = "regular-mod-phi-elliptic")]
    RegularModPhiElliptic,
    #[serde(rename = "purely-elliptic")]
    PurelyElliptic,
    #[serde(rename = "hyperbolic-connected")]
    HyperbolicConnected,
    #[serde(rename = "nondegenerate-ephemeral(focus-focus)")]
    EphemeralFocusFocus,
    #[serde(rename = "nondegenerate-ephemeral(hyperbolic-disconnected)")]
    EphemeralHyperbolicDisconnected,
    #[serde(rename = "degenerate-ephemeral")]
    DegenerateEphemeral,
    #[serde(rename = "short-elliptic")]
    ShortElliptic,
    #[serde(rename = "unclassified-degenerate")]
    UnclassifiedDegenerate,
}

impl Label {
    pub const ALL: [Label; 9] = [
        Label::Regular,
        Label::RegularModPhiElliptic,
        Label::PurelyElliptic,
        Label::HyperbolicConnected,
        Label::EphemeralFocusFocus,
        Label::EphemeralHyperbolicDisconnected,
        Label::DegenerateEphemeral,
        Label::ShortElliptic,
        Label::UnclassifiedDegenerate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Regular => "regular",
            Label::RegularModPhiElliptic => "regular-mod-phi-elliptic",
            Label::PurelyElliptic => "purely-elliptic",
            Label::HyperbolicConnected => "hyperbolic-connected",
            Label::EphemeralFocusFocus => "nondegenerate-ephemeral(focus-focus)",
            Label::EphemeralHyperbolicDisconnected => "nondegenerate-ephemeral(hyperbolic-disconnected)",
            Label::DegenerateEphemeral => "degenerate-ephemeral",
            Label::ShortElliptic => "short-elliptic",
            Label::UnclassifiedDegenerate => "unclassified-degenerate",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        Label::ALL.into_iter().find(|l| l.as_str() == s)
    }

    pub fn is_ephemeral(self) -> bool {
        matches!(
            self,
            Label::EphemeralFocusFocus | Label::EphemeralHyperbolicDisconnected | Label::DegenerateEphemeral
        )
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Tolerance multipliers for the numerical tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub tolerance_scale: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { tolerance_scale: 1.0 }
    }
}

/// Eigenvalue data of the linearized flow on the symplectic slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceBlocks {
    /// Dimension of the symplectic slice (even).
    pub slice_dim: usize,
    /// Dimension of the span of the quadratic forms (Hessian of `g~` and the stabilizer moment maps).
    pub form_span_dim: usize,
    /// Eigenvalues `[re, im]` of `J A` for a generic element of that span.
    pub eigenvalues: Vec<[f64; 2]>,
    pub elliptic: usize,
    pub hyperbolic: usize,
    pub focus_focus: usize,
    pub nondegenerate: bool,
    /// The slice is invariant under the complex structure.
    pub slice_is_symplectic: bool,
    /// Spectrum closed under negation and conjugation.
    pub spectrum_symmetric: bool,
}

impl SliceBlocks {
    pub fn block_list(&self) -> Vec<BlockType> {
        let mut out = vec![BlockType::Elliptic; self.elliptic];
        out.extend(vec![BlockType::Hyperbolic; self.hyperbolic]);
        out.extend(vec![BlockType::FocusFocus; self.focus_focus]);
        out
    }

    pub fn all_elliptic(&self) -> bool {
        self.hyperbolic == 0 && self.focus_focus == 0
    }
}

/// Full classification record of one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityReport {
    /// Coordinates as `[re, im]` pairs.
    pub point: Vec<[f64; 2]>,
    pub support: Vec<usize>,
    pub stabilizer: StabilizerData,
    pub tall: bool,
    pub degree_n: u64,
    pub critical_mod_phi: bool,
    pub gradient_projection: f64,
    pub phi_rank: usize,
    pub multiplier_mu: Vec<f64>,
    pub multiplier_residual: f64,
    pub blocks: Vec<BlockType>,
    pub slice: Option<SliceBlocks>,
    pub jet: Option<ChartJet>,
    pub zero_set: Option<ZeroSetShape>,
    /// For `N > 2`: the quadratic part of the slice Taylor polynomial vanishes.
    pub quadratic_part_vanishes: Option<bool>,
    pub label: Label,
    /// Label recorded by an external reference for this point, if any.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reference_label: Option<String>,
}

/// Indices of vanishing coordinates.
pub fn support_of(z: &[Complex64]) -> Vec<usize> {
    let max = z.iter().map(|x| x.norm()).fold(0.0, f64::max);
    (0..z.len())
        .filter(|&j| z[j] == Complex64::new(0.0, 0.0) || z[j].norm() <= SUPPORT_TOL * max)
        .collect()
}

fn check_point(sys: &SystemSpec, z: &[Complex64]) -> Result<()> {
    if z.len() != sys.m() {
        return Err(Error::DimensionMismatch { expected: sys.m(), got: z.len() });
    }
    if z.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::DerivativeUnavailable("non-finite coordinate".into()));
    }
    Ok(())
}

/// Norm of the projection of `grad g` onto `ker D Phi`.
pub fn gradient_projection(sys: &SystemSpec, z: &[Complex64]) -> Result<f64> {
    check_point(sys, z)?;
    let kernel = null_space(&sys.phi_jacobian(z), KERNEL_TOL);
    Ok((kernel.transpose() * sys.g_gradient(z)).norm())
}

/// `D g` vanishes on `ker D Phi`.
pub fn is_critical_mod_phi(sys: &SystemSpec, z: &[Complex64]) -> Result<bool> {
    is_critical_mod_phi_with(sys, z, &ClassifierConfig::default())
}

pub fn is_critical_mod_phi_with(sys: &SystemSpec, z: &[Complex64], cfg: &ClassifierConfig) -> Result<bool> {
    let proj = gradient_projection(sys, z)?;
    let grad = sys.g_gradient(z).norm();
    Ok(proj <= cfg.tolerance_scale * KERNEL_TOL * (1.0 + grad))
}

/// Least-squares `mu` with `d(g - Phi^mu) = 0`, and the residual norm.
pub fn lagrange_multiplier(sys: &SystemSpec, z: &[Complex64]) -> Result<(Vec<f64>, f64)> {
    if !is_critical_mod_phi(sys, z)? {
        return Err(Error::NotCriticalModPhi);
    }
    Ok(multiplier_unchecked(sys, z))
}

fn multiplier_unchecked(sys: &SystemSpec, z: &[Complex64]) -> (Vec<f64>, f64) {
    let grad = sys.g_gradient(z);
    if sys.torus_dim() == 0 {
        return (Vec::new(), grad.norm());
    }
    let dphi_t = sys.phi_jacobian(z).transpose();
    let mu = least_squares(&dphi_t, &grad, 1e-12);
    let residual = (&grad - &dphi_t * &mu).norm();
    (mu.iter().copied().collect(), residual)
}

/// Coefficients of the generic combination of quadratic forms.
fn generic_coefficient(i: usize) -> f64 {
    const PRIMES: [f64; 8] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0];
    let p = PRIMES[i % PRIMES.len()] + (i / PRIMES.len()) as f64 * 23.0;
    0.5 + p.sqrt().fract()
}

/// Eigenvalue typing of `J A` on the symplectic slice at a critical point.
pub fn slice_hessian_blocks(sys: &SystemSpec, z: &[Complex64], mu: &[f64]) -> Result<SliceBlocks> {
    slice_hessian_blocks_with(sys, z, mu, &ClassifierConfig::default())
}

pub fn slice_hessian_blocks_with(
    sys: &SystemSpec,
    z: &[Complex64],
    mu: &[f64],
    cfg: &ClassifierConfig,
) -> Result<SliceBlocks> {
    if !is_critical_mod_phi_with(sys, z, cfg)? {
        return Err(Error::NotCriticalModPhi);
    }
    let m = sys.m();
    let dim = 2 * m;
    let r = sys.torus_dim();

    let kernel = null_space(&sys.phi_jacobian(z), KERNEL_TOL);
    let gens = DMatrix::from_fn(dim, r, |i, k| sys.orbit_generator(z, k)[i]);
    let orbit = column_span(&gens, KERNEL_TOL);
    // Stabilizer Lie algebra: nu with sum nu_k X_k(z) = 0.
    let stab_alg = if r == 0 {
        DMatrix::zeros(0, 0)
    } else {
        let scale = gens.norm().max(1.0);
        null_space(&(gens.clone() / scale), KERNEL_TOL)
    };
    let projected = &kernel - &orbit * (orbit.transpose() * &kernel);
    let slice = column_span(&projected, KERNEL_TOL);
    let s_dim = slice.ncols();

    let j_full = complex_structure(m);
    let j_slice = slice.transpose() * &j_full * &slice;
    let slice_is_symplectic = (&j_full * &slice - &slice * &j_slice).norm() <= 1e-8;

    let hess = sys.g_hessian(z) - sys.phi_hessian(mu);
    let mut forms = vec![slice.transpose() * &hess * &slice];
    for c in 0..stab_alg.ncols() {
        let nu: Vec<f64> = stab_alg.column(c).iter().copied().collect();
        forms.push(slice.transpose() * sys.phi_hessian(&nu) * &slice);
    }

    let tol = cfg.tolerance_scale * EIGEN_TOL;
    let form_span_dim = if s_dim == 0 {
        0
    } else {
        let stacked = DMatrix::from_fn(s_dim * s_dim, forms.len(), |i, c| forms[c][(i / s_dim, i % s_dim)]);
        crate::linalg::rank(&stacked, tol)
    };

    let mut combo = DMatrix::zeros(s_dim, s_dim);
    for (i, f) in forms.iter().enumerate() {
        let norm = f.norm();
        if norm > 0.0 {
            combo += f * (generic_coefficient(i) / norm);
        }
    }
    let eig: Vec<Complex64> = if s_dim == 0 {
        Vec::new()
    } else {
        (&j_slice * &combo).complex_eigenvalues().iter().copied().collect()
    };
    let scale = eig.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let (mut real, mut imag, mut complex) = (0, 0, 0);
    let mut small = false;
    for l in &eig {
        let a = l.norm();
        if a <= tol * scale || scale == 0.0 {
            small = true;
        } else if l.im.abs() <= tol * a {
            real += 1;
        } else if l.re.abs() <= tol * a {
            imag += 1;
        } else {
            complex += 1;
        }
    }
    let spectrum_symmetric = eig.iter().all(|l| {
        let near = |t: Complex64| eig.iter().any(|o| (o - t).norm() <= 1e-8 * scale.max(1e-300));
        near(-l) && near(l.conj())
    });
    let counts_consistent = real % 2 == 0 && imag % 2 == 0 && complex % 4 == 0;
    let nondegenerate = !small && form_span_dim * 2 == s_dim && counts_consistent;
    Ok(SliceBlocks {
        slice_dim: s_dim,
        form_span_dim,
        eigenvalues: eig.iter().map(|l| [l.re, l.im]).collect(),
        elliptic: imag / 2,
        hyperbolic: real / 2,
        focus_focus: complex / 4,
        nondegenerate,
        slice_is_symplectic,
        spectrum_symmetric,
    })
}

/// Degree-`N` Taylor polynomial of `g - Phi^mu` on the slice `C^I` at `z`.
///
/// Coordinates outside the support are frozen at their values; the result is
/// invariant for the restricted relation.
pub fn slice_taylor(sys: &SystemSpec, z: &[Complex64], mu: &[f64], stab: &StabilizerData) -> InvariantPolynomial<Complex64> {
    let support = &stab.support;
    let k = support.len();
    let n = stab.slice_degree() as u32;
    let mut out = InvariantPolynomial::zero(stab.xi_restricted.clone());
    for ((a, b), c) in sys.g64.terms() {
        let mut coeff = *c;
        for j in (0..sys.m()).filter(|j| !support.contains(j)) {
            coeff *= z[j].powu(a[j]) * z[j].conj().powu(b[j]);
        }
        let sa: Vec<u32> = support.iter().map(|&i| a[i]).collect();
        let sb: Vec<u32> = support.iter().map(|&i| b[i]).collect();
        if sa.iter().sum::<u32>() + sb.iter().sum::<u32>() <= n {
            out.add_term(sa, sb, coeff);
        }
    }
    for (pos, &i) in support.iter().enumerate() {
        let pairing: f64 = (0..sys.torus_dim()).map(|r| mu[r] * sys.weights[r][i] as f64).sum();
        let mut e = vec![0; k];
        e[pos] = 1;
        out.add_term(e.clone(), e, Complex64::new(-0.5 * pairing, 0.0));
    }
    out
}

/// Runs the full pipeline at `z`.
pub fn classify_point(sys: &SystemSpec, z: &[Complex64]) -> Result<SingularityReport> {
    classify_point_with(sys, z, &ClassifierConfig::default())
}

pub fn classify_point_with(sys: &SystemSpec, z: &[Complex64], cfg: &ClassifierConfig) -> Result<SingularityReport> {
    check_point(sys, z)?;
    let support = support_of(z);
    let stabilizer = stabilizer_from_xi(&sys.xi.xi, &support)?;
    let tall = stabilizer.is_tall();
    let degree_n = stabilizer.slice_degree();
    let gradient_projection = gradient_projection(sys, z)?;
    let critical = is_critical_mod_phi_with(sys, z, cfg)?;
    let phi_rank = crate::linalg::rank(&sys.phi_jacobian(z), KERNEL_TOL);

    let mut report = SingularityReport {
        point: z.iter().map(|c| [c.re, c.im]).collect(),
        support,
        stabilizer,
        tall,
        degree_n,
        critical_mod_phi: critical,
        gradient_projection,
        phi_rank,
        multiplier_mu: Vec::new(),
        multiplier_residual: 0.0,
        blocks: Vec::new(),
        slice: None,
        jet: None,
        zero_set: None,
        quadratic_part_vanishes: None,
        label: Label::Regular,
        reference_label: None,
    };
    if !critical {
        report.label = if phi_rank == sys.torus_dim() {
            Label::Regular
        } else {
            Label::RegularModPhiElliptic
        };
        return Ok(report);
    }

    let (mu, residual) = multiplier_unchecked(sys, z);
    let blocks = slice_hessian_blocks_with(sys, z, &mu, cfg)?;
    report.multiplier_mu = mu.clone();
    report.multiplier_residual = residual;
    report.blocks = blocks.block_list();

    let by_blocks = |b: &SliceBlocks| {
        if !b.nondegenerate {
            Label::UnclassifiedDegenerate
        } else if b.all_elliptic() {
            Label::PurelyElliptic
        } else {
            Label::HyperbolicConnected
        }
    };

    report.label = if !tall {
        if blocks.nondegenerate && blocks.all_elliptic() {
            Label::ShortElliptic
        } else {
            Label::UnclassifiedDegenerate
        }
    } else if degree_n < 2 {
        by_blocks(&blocks)
    } else {
        let taylor = slice_taylor(sys, z, &mu, &report.stabilizer);
        if degree_n > 2 {
            let quadratic = taylor.without_constant().truncate(2);
            let scale = taylor.terms().map(|(_, c)| c.norm()).fold(1.0, f64::max);
            report.quadratic_part_vanishes = Some(quadratic.terms().all(|(_, c)| c.norm() <= 1e-9 * scale));
        }
        let ephemeral = match chart_jet(&taylor) {
            Ok(jet) => {
                let shape = zero_set_shape(&jet);
                report.jet = Some(jet);
                report.zero_set = Some(shape);
                shape == ZeroSetShape::Line
            }
            Err(Error::PrerequisiteVanishingFailed) => false,
            Err(e) => return Err(e),
        };
        match (ephemeral, blocks.nondegenerate) {
            (true, false) => Label::DegenerateEphemeral,
            (true, true) if blocks.focus_focus > 0 => Label::EphemeralFocusFocus,
            (true, true) if blocks.hyperbolic > 0 => Label::EphemeralHyperbolicDisconnected,
            _ => by_blocks(&blocks),
        }
    };
    report.slice = Some(blocks);
    Ok(report)
}

/// Summary verdicts for the reports of one fiber.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiberVerdicts {
    /// No point of hyperbolic type with connected stabilizer.
    pub connectivity_expected: bool,
    /// At least three tall orbits whose defining degree exceeds two.
    pub obstruction: bool,
    /// At most one orbit with a hyperbolic block.
    pub genericity_ok: bool,
}

pub fn fiber_verdicts(reports: &[SingularityReport]) -> FiberVerdicts {
    let tall_slices: Vec<StabilizerData> = reports
        .iter()
        .filter(|r| r.tall && r.critical_mod_phi)
        .map(|r| r.stabilizer.clone())
        .collect();
    let hyperbolic = reports
        .iter()
        .filter(|r| r.blocks.contains(&BlockType::Hyperbolic))
        .count();
    FiberVerdicts {
        connectivity_expected: !reports.iter().any(|r| r.label == Label::HyperbolicConnected),
        obstruction: too_bad_obstruction(&tall_slices),
        genericity_ok: hyperbolic <= 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn family_11m1() -> SystemSpec {
        let w = WeightMatrix::from_columns(&[vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let xi = defining_vector(&w).unwrap();
        SystemSpec::from_weight_matrix(&w, InvariantPolynomial::imag_of_defining(xi, CRational::one())).unwrap()
    }

    fn polar(r: &[f64], th: &[f64]) -> Vec<Complex64> {
        r.iter().zip(th).map(|(&r, &t)| Complex64::from_polar(r, t)).collect()
    }

    #[test]
    fn critical_examples() {
        let sys = family_11m1();
        let s2 = 2f64.sqrt();
        let half_pi = std::f64::consts::FRAC_PI_2;
        assert!(is_critical_mod_phi(&sys, &polar(&[s2, s2, 1.0], &[half_pi, 0.0, 0.0])).unwrap());
        assert!(!is_critical_mod_phi(&sys, &polar(&[s2, s2, 1.0], &[0.0, 0.0, 0.0])).unwrap());
        assert!(is_critical_mod_phi(&sys, &[c(0.0, 0.0); 3]).unwrap());
    }

    #[test]
    fn multiplier_example() {
        let sys = family_11m1();
        let s2 = 2f64.sqrt();
        let z = polar(&[s2, s2, 1.0], &[std::f64::consts::FRAC_PI_2, 0.0, 0.0]);
        assert!((sys.g_value(&z) - 2.0).abs() < 1e-14);
        let (mu, res) = lagrange_multiplier(&sys, &z).unwrap();
        assert!((mu[0] - 1.0).abs() < 1e-10 && (mu[1] - 1.0).abs() < 1e-10);
        assert!(res < 1e-8);
        let off = polar(&[s2, s2, 1.0], &[0.0; 3]);
        assert_eq!(lagrange_multiplier(&sys, &off), Err(Error::NotCriticalModPhi));
    }

    #[test]
    fn elliptic_family_point() {
        let sys = family_11m1();
        let s2 = 2f64.sqrt();
        let z = polar(&[s2, s2, 1.0], &[std::f64::consts::FRAC_PI_2, 0.0, 0.0]);
        let rep = classify_point(&sys, &z).unwrap();
        assert_eq!(rep.label, Label::PurelyElliptic);
        let s = rep.slice.unwrap();
        assert_eq!((s.slice_dim, s.elliptic), (2, 1));
        assert!(s.slice_is_symplectic && s.spectrum_symmetric);
    }

    #[test]
    fn family_support_patterns() {
        let sys = family_11m1();
        let o = c(0.0, 0.0);
        let rep = classify_point(&sys, &[o, o, c(0.6, 0.8)]).unwrap();
        assert_eq!(rep.label, Label::EphemeralFocusFocus);
        let rep = classify_point(&sys, &[o, c(1.0, 0.2), o]).unwrap();
        assert_eq!(rep.label, Label::ShortElliptic);
        let rep = classify_point(&sys, &[o, o, o]).unwrap();
        assert_eq!(rep.label, Label::UnclassifiedDegenerate);
        let rep = classify_point(&sys, &[o, c(0.3, 1.0), c(0.6, 0.8)]).unwrap();
        assert_eq!(rep.label, Label::Regular);
    }

    #[test]
    fn finite_group_model_is_hyperbolic() {
        // C with Z_2 and g = Im(z^2)
        let xi = DefiningVector::new(vec![2]);
        let sys = SystemSpec::new(vec![], &[2], InvariantPolynomial::imag_of_defining(xi, CRational::one())).unwrap();
        let rep = classify_point(&sys, &[c(0.0, 0.0)]).unwrap();
        assert_eq!(rep.stabilizer.component_count, 2);
        assert_eq!(rep.label, Label::EphemeralHyperbolicDisconnected);
    }

    #[test]
    fn circle_model_is_focus_focus() {
        let xi = DefiningVector::new(vec![1, 1]);
        let sys = SystemSpec::new(vec![vec![1, -1]], &[1, 1], InvariantPolynomial::imag_of_defining(xi, CRational::one())).unwrap();
        let rep = classify_point(&sys, &[c(0.0, 0.0); 2]).unwrap();
        assert_eq!(rep.label, Label::EphemeralFocusFocus);
        assert!(rep.slice.unwrap().spectrum_symmetric);
    }

    #[test]
    fn verdict_rules() {
        let sys = family_11m1();
        let o = c(0.0, 0.0);
        let rep = classify_point(&sys, &[o, o, c(1.0, 0.0)]).unwrap();
        let v = fiber_verdicts(&[rep.clone()]);
        assert!(v.connectivity_expected && !v.obstruction && v.genericity_ok);
        let mut hyp = rep.clone();
        hyp.label = Label::HyperbolicConnected;
        assert!(!fiber_verdicts(&[hyp]).connectivity_expected);
        let mut deg3 = rep;
        deg3.stabilizer = StabilizerData::from_slice_xi(&[2, 1]).unwrap();
        assert!(fiber_verdicts(&[deg3.clone(), deg3.clone(), deg3]).obstruction);
    }

    #[test]
    fn rejects_bad_systems() {
        let xi = DefiningVector::new(vec![1, 1]);
        let g = InvariantPolynomial::imag_of_defining(xi, CRational::one());
        assert!(SystemSpec::new(vec![vec![1, 1]], &[1, 1], g.clone()).is_err());
        assert!(SystemSpec::new(vec![], &[1, 1], g).is_err());
    }
}
