//! Reduced Taylor polynomials on the chart `u = P(z)` of the reduced space and
//! the decidable zero-set test for ephemeral points.
//!
//! On the zero level of the slice moment map every point has the form
//! `z_j = sqrt(tau xi_j) e^{i theta_j}`. A monomial `z^a conj(z)^b` with
//! `a - b = k xi` and `m = min(a, b)` then evaluates to
//! `prod xi_j^{m_j} tau^{|m|} u^k` (with `conj(u)^{|k|}` when `k < 0`), where
//! `tau = (|u|^2 / prod xi_j^{xi_j})^{1/N}`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::coeff::{rational_to_f64, CRational, Coefficient};
use crate::error::{Error, Result};
use crate::lattice::DefiningVector;
use crate::poly::{xi_multiple, InvariantPolynomial};

/// Relative band inside which floating-point jets are reported [`ZeroSetShape::Marginal`].
pub const MARGINAL_TOLERANCE: f64 = 1e-9;

/// Function on the chart: `sum c[k, d] u^k tau^d` (`u^k` meaning `conj(u)^{-k}` for `k < 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct ChartFunction<C: Coefficient = CRational> {
    xi: DefiningVector,
    terms: BTreeMap<(i64, u32), C>,
}

impl<C: Coefficient> ChartFunction<C> {
    pub fn terms(&self) -> impl Iterator<Item = (&(i64, u32), &C)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, k: i64, d: u32) -> C {
        self.terms.get(&(k, d)).cloned().unwrap_or_else(C::zero)
    }

    /// Zero test on every collected coefficient.
    pub fn is_zero(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.is_negligible(tol))
    }

    /// Real value at the chart point `u`.
    pub fn eval(&self, u: Complex64) -> f64 {
        let n = self.xi.degree as f64;
        let k_const = rational_to_f64(&BigRational::from_integer(self.xi.power_product()));
        let tau = (u.norm_sqr() / k_const).powf(1.0 / n);
        self.terms
            .iter()
            .map(|(&(k, d), c)| {
                let uk = if k >= 0 {
                    u.powu(k as u32)
                } else {
                    u.conj().powu((-k) as u32)
                };
                (c.to_c64() * uk * tau.powi(d as i32)).re
            })
            .sum()
    }
}

fn require_tall(xi: &DefiningVector) -> Result<()> {
    if !xi.tall || xi.xi.iter().any(|&x| x < 0) || xi.is_zero() {
        return Err(Error::NotTall(xi.xi.clone()));
    }
    Ok(())
}

/// Pushes the degree-`order` Taylor truncation of `p` down to the chart.
pub fn reduced_taylor<C: Coefficient>(
    p: &InvariantPolynomial<C>,
    order: u32,
) -> Result<ChartFunction<C>> {
    let xi = p.xi().clone();
    require_tall(&xi)?;
    p.ensure_invariant()?;
    let mut terms: BTreeMap<(i64, u32), C> = BTreeMap::new();
    for ((a, b), c) in p.truncate(order).terms() {
        // Coordinates with xi_j = 0 vanish on the zero level.
        if xi.xi.iter().zip(a.iter().zip(b)).any(|(&x, (&ai, &bi))| x == 0 && ai + bi > 0) {
            continue;
        }
        let k = xi_multiple(&xi.xi, a, b).expect("checked invariant");
        let mut weight = C::one();
        let mut d = 0u32;
        for ((&x, &ai), &bi) in xi.xi.iter().zip(a).zip(b) {
            let m = ai.min(bi);
            d += m;
            for _ in 0..m {
                weight = weight * C::from_i64(x);
            }
        }
        let entry = terms.entry((k, d)).or_insert_with(C::zero);
        *entry = entry.clone() + c.clone() * weight;
    }
    terms.retain(|_, c| !c.is_zero());
    Ok(ChartFunction { xi, terms })
}

/// True iff the reduced Taylor polynomial of degree `order - 1` vanishes
/// after the constant term is removed.
pub fn vanishes_below_order_mod_phi<C: Coefficient>(
    p: &InvariantPolynomial<C>,
    order: u32,
) -> Result<bool> {
    require_tall(p.xi())?;
    let n = p.xi().degree as u32;
    if order == 0 || order > n {
        return Err(Error::OrderOutOfRange { order, max: n });
    }
    let tol = float_tolerance(p);
    Ok(reduced_taylor(&p.without_constant(), order - 1)?.is_zero(tol))
}

fn float_tolerance<C: Coefficient>(p: &InvariantPolynomial<C>) -> f64 {
    let scale = p.terms().map(|(_, c)| c.to_c64().norm()).fold(0.0, f64::max);
    MARGINAL_TOLERANCE * scale.max(1.0)
}

/// Exact data behind a [`ChartJet`]: the ephemeral inequality is
/// `(A^2 + B^2) K > S^2` with `D = S / sqrt(K)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactJet {
    pub a: String,
    pub b: String,
    /// Pure-modulus coefficient sum `S`.
    pub modulus_sum: String,
    /// `K = prod xi_j^{xi_j}`.
    pub power_product: String,
    #[serde(skip)]
    values: Option<(BigRational, BigRational, BigRational, BigRational)>,
}

/// Degree-`N` chart jet `A Re(u) + B Im(u) + D |u|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartJet {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub n: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exact: Option<ExactJet>,
}

impl ChartJet {
    /// Jet from floating-point data.
    pub fn new(a: f64, b: f64, d: f64, n: u64) -> Self {
        Self { a, b, d, n, exact: None }
    }

    pub fn eval(&self, u: Complex64) -> f64 {
        self.a * u.re + self.b * u.im + self.d * u.norm()
    }
}

/// Topology of the zero set of a chart jet near the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroSetShape {
    /// Two rays through the origin: homeomorphic to a line.
    Line,
    /// A single ray (the boundary case `A^2 + B^2 = D^2`).
    Ray,
    /// Only the origin.
    Point,
    /// The jet vanishes identically.
    Plane,
    /// Floating-point data too close to the boundary to decide.
    Marginal,
}

/// Degree-`N` jet of `p` on the chart. Requires vanishing below order `N`.
pub fn chart_jet<C: Coefficient>(p: &InvariantPolynomial<C>) -> Result<ChartJet> {
    let xi = p.xi().clone();
    let n = xi.degree;
    if !vanishes_below_order_mod_phi(p, n as u32)? {
        return Err(Error::PrerequisiteVanishingFailed);
    }
    let chart = reduced_taylor(&p.without_constant(), n as u32)?;
    let up = chart.coefficient(1, 0);
    let down = chart.coefficient(-1, 0);
    let modulus = if n % 2 == 0 {
        chart.coefficient(0, (n / 2) as u32)
    } else {
        C::zero()
    };
    let big_k = xi.power_product();
    let k_f = rational_to_f64(&BigRational::from_integer(big_k.clone()));
    let (u, dn, s) = (up.to_c64(), down.to_c64(), modulus.to_c64());
    // c u + c' conj(u) has real part Re(c + c') x + Im(c' - c) y
    let a = (u + dn).re;
    let b = (dn - u).im;
    let d = s.re / k_f.sqrt();

    let exact = if C::EXACT {
        let to_q = |c: &C| -> Option<CRational> { exact_view(c) };
        match (to_q(&up), to_q(&down), to_q(&modulus)) {
            (Some(u), Some(dn), Some(s)) => {
                let qa = &u.re + &dn.re;
                let qb = &dn.im - &u.im;
                let qk = BigRational::from_integer(big_k);
                Some(ExactJet {
                    a: qa.to_string(),
                    b: qb.to_string(),
                    modulus_sum: s.re.to_string(),
                    power_product: qk.to_string(),
                    values: Some((qa, qb, s.re, qk)),
                })
            }
            _ => None,
        }
    } else {
        None
    };
    Ok(ChartJet { a, b, d, n, exact })
}

fn exact_view<C: Coefficient>(c: &C) -> Option<CRational> {
    c.to_exact()
}

/// Decides the zero-set shape, exactly when the jet carries exact data.
pub fn zero_set_shape(j: &ChartJet) -> ZeroSetShape {
    if let Some((a, b, s, k)) = j.exact.as_ref().and_then(|e| e.values.clone()) {
        let lhs = (&a * &a + &b * &b) * &k;
        let rhs = &s * &s;
        return if a.is_zero() && b.is_zero() && s.is_zero() {
            ZeroSetShape::Plane
        } else if lhs > rhs {
            ZeroSetShape::Line
        } else if lhs == rhs {
            ZeroSetShape::Ray
        } else {
            ZeroSetShape::Point
        };
    }
    let lin = j.a * j.a + j.b * j.b;
    let quad = j.d * j.d;
    let scale = lin.max(quad);
    if scale == 0.0 {
        return ZeroSetShape::Plane;
    }
    if (lin - quad).abs() <= MARGINAL_TOLERANCE * scale {
        ZeroSetShape::Marginal
    } else if lin > quad {
        ZeroSetShape::Line
    } else {
        ZeroSetShape::Point
    }
}

/// True iff the zero set of the jet is homeomorphic to a line.
pub fn ephemeral_zero_set_test(j: &ChartJet) -> bool {
    zero_set_shape(j) == ZeroSetShape::Line
}

/// Combined conditions (a) and (b) for a tall slice polynomial with `N > 1`.
pub fn is_ephemeral<C: Coefficient>(p: &InvariantPolynomial<C>) -> Result<bool> {
    if p.xi().degree < 2 {
        return Ok(false);
    }
    match chart_jet(p) {
        Ok(j) => Ok(ephemeral_zero_set_test(&j)),
        Err(Error::PrerequisiteVanishingFailed) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Counts zero rays of `f` by sign changes on concentric circles of a polar grid.
///
/// Returns `None` when circles of different radii disagree.
pub fn count_zero_rays(f: impl Fn(Complex64) -> f64, angles: usize, radii: usize) -> Option<usize> {
    let mut count = None;
    for r in 1..=radii {
        let rho = r as f64 / radii as f64;
        let values: Vec<f64> = (0..angles)
            .map(|t| {
                let th = std::f64::consts::TAU * (t as f64 + 0.5) / angles as f64;
                f(Complex64::from_polar(rho, th))
            })
            .collect();
        let changes = (0..angles)
            .filter(|&t| (values[t] > 0.0) != (values[(t + 1) % angles] > 0.0))
            .count();
        match count {
            None => count = Some(changes),
            Some(c) if c != changes => return None,
            _ => {}
        }
    }
    count
}

/// Convenience: `Im(P)` on the tall slice with relation `xi`.
pub fn imag_defining(xi: &[i64]) -> InvariantPolynomial<CRational> {
    InvariantPolynomial::imag_of_defining(DefiningVector::new(xi.to_vec()), CRational::one())
}

/// `(|z|^2)^e`.
pub fn norm_power(xi: &[i64], e: u32) -> InvariantPolynomial<CRational> {
    InvariantPolynomial::norm_sq(DefiningVector::new(xi.to_vec())).pow(e)
}
