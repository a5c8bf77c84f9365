//! The explicit family on `C^n`: an `(n-1)`-torus acting with weights `W`
//! and `g = Im(prod_{xi_j > 0} z_j^{xi_j} prod_{xi_j < 0} conj(z_j)^{-xi_j})`.
//!
//! Closed-form values, derivatives and Hessians are written in polar
//! coordinates `z_j = r_j e^{i theta_j}`, where
//! `g = prod r_j^{|xi_j|} sin(sum xi_j theta_j)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{Label, SystemSpec};
use crate::coeff::{rational_to_f64, CRational};
use crate::error::{Error, Result};
use crate::lattice::{defining_vector, properness_certificate, DefiningVector, WeightMatrix};
use crate::linalg::least_squares;
use crate::poly::InvariantPolynomial;

/// Relative tolerance for the two singularity conditions.
pub const CONDITION_TOL: f64 = 1e-8;

/// The family attached to a valid weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySystem {
    pub w: WeightMatrix,
    pub xi: DefiningVector,
    pub proper: bool,
    /// Rational `u` with `<eta_j, u> >= 1` for all `j`, as floats.
    pub certificate: Option<Vec<f64>>,
    pub system: SystemSpec,
}

/// JSON form `{"weights": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyJson {
    pub weights: Vec<Vec<i64>>,
}

/// Point in polar coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
}

impl PolarPoint {
    pub fn new(r: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        if r.len() != theta.len() {
            return Err(Error::DimensionMismatch { expected: r.len(), got: theta.len() });
        }
        if r.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) || theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Parse("radii must be finite and nonnegative, angles finite".into()));
        }
        Ok(Self { r, theta })
    }

    pub fn from_cartesian(z: &[Complex64]) -> Self {
        Self {
            r: z.iter().map(|c| c.norm()).collect(),
            theta: z.iter().map(|c| c.arg()).collect(),
        }
    }

    pub fn to_cartesian(&self) -> Vec<Complex64> {
        self.r
            .iter()
            .zip(&self.theta)
            .map(|(&r, &t)| if r == 0.0 { Complex64::new(0.0, 0.0) } else { Complex64::from_polar(r, t) })
            .collect()
    }

    /// Indices with `r_i = 0` (or `r_i <= 1e-10 max r`).
    pub fn support(&self) -> Vec<usize> {
        let max = self.r.iter().copied().fold(0.0, f64::max);
        (0..self.r.len())
            .filter(|&i| self.r[i] == 0.0 || self.r[i] <= 1e-10 * max)
            .collect()
    }
}

/// Builds the family of `w`, its defining vector and properness.
pub fn build_family(w: &WeightMatrix) -> Result<FamilySystem> {
    let xi = defining_vector(w)?;
    let g = InvariantPolynomial::imag_of_defining(xi.clone(), CRational::one());
    let system = SystemSpec::from_weight_matrix(w, g)?;
    let certificate = properness_certificate(w).map(|u| u.iter().map(rational_to_f64).collect());
    Ok(FamilySystem {
        w: w.clone(),
        xi,
        proper: certificate.is_some(),
        certificate,
        system,
    })
}

impl FamilySystem {
    pub fn from_json(json: &FamilyJson) -> Result<Self> {
        build_family(&WeightMatrix::new(json.weights.clone())?)
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }

    pub fn to_json(&self) -> FamilyJson {
        FamilyJson { weights: self.w.rows().to_vec() }
    }

    fn abs_xi(&self, j: usize) -> f64 {
        self.xi.xi[j].unsigned_abs() as f64
    }

    fn xi_f(&self, j: usize) -> f64 {
        self.xi.xi[j] as f64
    }

    fn check(&self, w: &PolarPoint) -> Result<()> {
        if w.r.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: w.r.len() });
        }
        Ok(())
    }

    /// Whether the product-sine form of `g` applies (`xi` vanishes on the support).
    fn polar_form_applies(&self, support: &[usize]) -> bool {
        support.iter().all(|&i| self.xi.xi[i] == 0)
    }

    /// `Phi(w)` and `g(w)`.
    pub fn eval_polar(&self, w: &PolarPoint) -> Result<(Vec<f64>, f64)> {
        self.check(w)?;
        let phi: Vec<f64> = self
            .w
            .rows()
            .iter()
            .map(|row| 0.5 * row.iter().zip(&w.r).map(|(&e, &r)| e as f64 * r * r).sum::<f64>())
            .collect();
        let g = if self.polar_form_applies(&w.support()) {
            self.radial_product(w) * self.phase(w).sin()
        } else {
            self.system.g_value(&w.to_cartesian())
        };
        Ok((phi, g))
    }

    /// `g` at a cartesian point.
    pub fn eval_cartesian(&self, z: &[Complex64]) -> f64 {
        self.system.g_value(z)
    }

    fn radial_product(&self, w: &PolarPoint) -> f64 {
        (0..self.n())
            .filter(|&j| self.xi.xi[j] != 0)
            .map(|j| w.r[j].powi(self.xi.xi[j].unsigned_abs() as i32))
            .product()
    }

    /// `sum xi_j theta_j` over coordinates outside the support.
    fn phase(&self, w: &PolarPoint) -> f64 {
        let support = w.support();
        (0..self.n())
            .filter(|j| !support.contains(j))
            .map(|j| self.xi_f(j) * w.theta[j])
            .sum()
    }

    /// Residuals of `cos(sum xi_j theta_j) = 0` and `sum xi_j |xi_j| / r_j^2 = 0`.
    pub fn singularity_conditions(&self, w: &PolarPoint) -> Result<(f64, f64)> {
        self.check(w)?;
        let support = w.support();
        if let Some(&i) = support.iter().find(|&&i| self.xi.xi[i] != 0) {
            return Err(Error::UnsupportedSupport(i));
        }
        let c1 = self.phase(w).cos();
        let c2 = (0..self.n())
            .filter(|j| !support.contains(j))
            .map(|j| self.xi_f(j) * self.abs_xi(j) / (w.r[j] * w.r[j]))
            .sum();
        Ok((c1, c2))
    }

    /// Both conditions hold up to [`CONDITION_TOL`] (the second relative to its terms).
    pub fn conditions_hold(&self, w: &PolarPoint) -> Result<bool> {
        let (c1, c2) = self.singularity_conditions(w)?;
        let support = w.support();
        let scale: f64 = (0..self.n())
            .filter(|j| !support.contains(j))
            .map(|j| self.abs_xi(j) * self.abs_xi(j) / (w.r[j] * w.r[j]))
            .sum();
        Ok(c1.abs() <= CONDITION_TOL && c2.abs() <= CONDITION_TOL * scale.max(1e-300))
    }

    /// Analytic `(dg/dtheta, dg/dr)` where the polar form applies.
    pub fn polar_gradient(&self, w: &PolarPoint) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(w)?;
        let support = w.support();
        if let Some(&i) = support.iter().find(|&&i| self.xi.xi[i] != 0) {
            return Err(Error::UnsupportedSupport(i));
        }
        let rp = self.radial_product(w);
        let s = self.phase(w);
        let g = rp * s.sin();
        let dtheta = (0..self.n()).map(|j| self.xi_f(j) * rp * s.cos()).collect();
        let dr = (0..self.n())
            .map(|j| if support.contains(&j) { 0.0 } else { self.abs_xi(j) * g / w.r[j] })
            .collect();
        Ok((dtheta, dr))
    }

    /// `d Phi = sum eta_j r_j dr_j`: the `r x n` matrix of `dPhi/dr_j`.
    pub fn phi_radial_jacobian(&self, w: &PolarPoint) -> DMatrix<f64> {
        DMatrix::from_fn(self.w.torus_dim(), self.n(), |k, j| self.w.rows()[k][j] as f64 * w.r[j])
    }

    /// Multiplier with `<eta_j, mu> = |xi_j| g / r_j^2` off the support.
    pub fn multiplier(&self, w: &PolarPoint) -> Result<Vec<f64>> {
        let (_, g) = self.eval_polar(w)?;
        let support = w.support();
        let outside: Vec<usize> = (0..self.n()).filter(|j| !support.contains(j)).collect();
        let a = DMatrix::from_fn(outside.len(), self.w.torus_dim(), |i, k| self.w.rows()[k][outside[i]] as f64);
        let b = DVector::from_fn(outside.len(), |i, _| {
            let j = outside[i];
            self.abs_xi(j) * g / (w.r[j] * w.r[j])
        });
        Ok(least_squares(&a, &b, 1e-12).iter().copied().collect())
    }

    /// Hessian of `g - Phi^mu` in `(theta_1..theta_n, r_1..r_n)` at a point
    /// satisfying both conditions. Rows for coordinates in the support are zero.
    pub fn family_hessian(&self, w: &PolarPoint) -> Result<DMatrix<f64>> {
        let (c1, c2) = self.singularity_conditions(w)?;
        if !self.conditions_hold(w)? {
            return Err(Error::ConditionsNotMet { c1, c2 });
        }
        let n = self.n();
        let (_, g) = self.eval_polar(w)?;
        let support = w.support();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        for j in (0..n).filter(|j| !support.contains(j)) {
            for k in (0..n).filter(|k| !support.contains(k)) {
                h[(j, k)] = -self.xi_f(j) * self.xi_f(k) * g;
                let mut rr = self.abs_xi(j) * self.abs_xi(k) * g / (w.r[j] * w.r[k]);
                if j == k {
                    rr -= 2.0 * self.abs_xi(j) * g / (w.r[j] * w.r[j]);
                }
                h[(n + j, n + k)] = rr;
            }
        }
        Ok(h)
    }

    /// Tangent vectors `sum xi_j d/dtheta_j` and `sum (xi_j / r_j) d/dr_j`
    /// in `(theta, r)` coordinates.
    pub fn slice_vectors(&self, w: &PolarPoint) -> (DVector<f64>, DVector<f64>) {
        let n = self.n();
        let support = w.support();
        let mut v1 = DVector::zeros(2 * n);
        let mut v2 = DVector::zeros(2 * n);
        for j in (0..n).filter(|j| !support.contains(j)) {
            v1[j] = self.xi_f(j);
            v2[n + j] = self.xi_f(j) / w.r[j];
        }
        (v1, v2)
    }

    /// Degree-`N_I` slice Taylor polynomial `Im(prefactor P_I(z))` on `C^I`.
    pub fn taylor_at_support(&self, w: &PolarPoint) -> Result<InvariantPolynomial<Complex64>> {
        self.check(w)?;
        let support = w.support();
        let restricted: Vec<i64> = support.iter().map(|&i| self.xi.xi[i]).collect();
        let xi_i = DefiningVector::new(restricted.clone());
        if !xi_i.tall {
            return Err(Error::NotTall(restricted));
        }
        let z = w.to_cartesian();
        let prefactor = (0..self.n())
            .filter(|j| !support.contains(j))
            .fold(Complex64::new(1.0, 0.0), |acc, j| {
                let x = self.xi.xi[j];
                if x >= 0 {
                    acc * z[j].powu(x as u32)
                } else {
                    acc * z[j].conj().powu((-x) as u32)
                }
            });
        let mut p = InvariantPolynomial::zero(xi_i);
        let a: Vec<u32> = restricted.iter().map(|&x| x.max(0) as u32).collect();
        let b: Vec<u32> = restricted.iter().map(|&x| (-x).max(0) as u32).collect();
        p.add_imag_part(&a, &b, prefactor);
        Ok(p)
    }

    /// Closed-form label.
    pub fn classify_family_point(&self, w: &PolarPoint) -> Result<Label> {
        self.check(w)?;
        let support = w.support();
        let restricted: Vec<i64> = support.iter().map(|&i| self.xi.xi[i]).collect();
        if restricted.iter().all(|&x| x == 0) {
            let singular = self.conditions_hold(w)?;
            return Ok(match (singular, support.is_empty()) {
                (true, _) => Label::PurelyElliptic,
                (false, true) => Label::Regular,
                (false, false) => Label::RegularModPhiElliptic,
            });
        }
        let xi_i = DefiningVector::new(restricted.clone());
        let nonzero = restricted.iter().filter(|&&x| x != 0).count();
        Ok(match (xi_i.tall, xi_i.degree) {
            (false, 2) => Label::ShortElliptic,
            (false, _) => Label::UnclassifiedDegenerate,
            (true, 1) if support.len() == 1 => Label::Regular,
            (true, 1) => Label::RegularModPhiElliptic,
            (true, 2) if nonzero == 1 => Label::EphemeralHyperbolicDisconnected,
            (true, 2) => Label::EphemeralFocusFocus,
            (true, _) => Label::DegenerateEphemeral,
        })
    }

    /// All support patterns, as sorted index sets.
    pub fn support_patterns(&self) -> Vec<Vec<usize>> {
        (0u32..(1 << self.n()))
            .map(|mask| (0..self.n()).filter(|j| mask >> j & 1 == 1).collect())
            .collect()
    }

    /// Seeded random points with the given support. When `xi` vanishes on the
    /// support, every other sample is moved onto both singularity conditions.
    pub fn sample_points(&self, support: &[usize], count: usize, seed: u64) -> Vec<PolarPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.n();
        let outside: Vec<usize> = (0..n).filter(|j| !support.contains(j)).collect();
        let project = support.iter().all(|&i| self.xi.xi[i] == 0);
        (0..count)
            .map(|s| {
                let mut r = vec![0.0; n];
                let mut theta = vec![0.0; n];
                for &j in &outside {
                    r[j] = rng.random_range(0.3..2.0);
                    theta[j] = rng.random_range(0.0..std::f64::consts::TAU);
                }
                let mut w = PolarPoint { r, theta };
                if project && s % 2 == 0 {
                    self.project_to_conditions(&mut w, &outside, &mut rng);
                }
                w
            })
            .collect()
    }

    fn project_to_conditions(&self, w: &mut PolarPoint, outside: &[usize], rng: &mut ChaCha8Rng) {
        let active: Vec<usize> = outside.iter().copied().filter(|&j| self.xi.xi[j] != 0).collect();
        let Some(&j0) = active.first() else { return };
        let target = if rng.random_bool(0.5) { 0.5 } else { 1.5 } * std::f64::consts::PI;
        let rest: f64 = active.iter().filter(|&&j| j != j0).map(|&j| self.xi_f(j) * w.theta[j]).sum();
        w.theta[j0] = (target - rest) / self.xi_f(j0);
        for &j1 in &active {
            let others: f64 = active
                .iter()
                .filter(|&&j| j != j1)
                .map(|&j| self.xi_f(j) * self.abs_xi(j) / (w.r[j] * w.r[j]))
                .sum();
            let r2 = -self.xi_f(j1) * self.abs_xi(j1) / others;
            if r2 > 0.0 && r2.is_finite() {
                w.r[j1] = r2.sqrt();
                return;
            }
        }
    }
}

/// Converts a `(theta, r)` tangent vector at `w` to cartesian `(x_1, y_1, ...)`.
pub fn polar_to_cartesian_vector(w: &PolarPoint, v: &DVector<f64>) -> DVector<f64> {
    let n = w.r.len();
    let z = w.to_cartesian();
    let mut out = DVector::zeros(2 * n);
    for j in 0..n {
        let (x, y, r) = (z[j].re, z[j].im, w.r[j]);
        // d/dtheta = -y d/dx + x d/dy, d/dr = (x d/dx + y d/dy) / r
        out[2 * j] += -y * v[j];
        out[2 * j + 1] += x * v[j];
        if r > 0.0 {
            out[2 * j] += x / r * v[n + j];
            out[2 * j + 1] += y / r * v[n + j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::classify_point;
    use std::f64::consts::FRAC_PI_2;

    fn fam(cols: &[&[i64]]) -> FamilySystem {
        let cols: Vec<Vec<i64>> = cols.iter().map(|c| c.to_vec()).collect();
        build_family(&WeightMatrix::from_columns(&cols).unwrap()).unwrap()
    }

    fn catalog_point() -> PolarPoint {
        let s2 = 2f64.sqrt();
        PolarPoint::new(vec![s2, s2, 1.0], vec![FRAC_PI_2, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn build_examples() {
        let f = fam(&[&[1, 0], &[0, 1], &[1, 1]]);
        assert_eq!(f.xi.xi, vec![1, 1, -1]);
        assert!(f.proper);
        let f = fam(&[&[1, 0], &[0, 1], &[2, 1]]);
        assert_eq!(f.xi.xi, vec![2, 1, -1]);
        assert!(f.proper);
        let f = build_family(&WeightMatrix::new(vec![vec![1, -1]]).unwrap()).unwrap();
        assert_eq!(f.xi.xi, vec![1, 1]);
        assert!(!f.proper);
    }

    #[test]
    fn eval_examples() {
        let f = fam(&[&[1, 0], &[0, 1], &[1, 1]]);
        let origin = PolarPoint::new(vec![0.0; 3], vec![0.0; 3]).unwrap();
        assert_eq!(f.eval_polar(&origin).unwrap(), (vec![0.0, 0.0], 0.0));
        let (_, g) = f.eval_polar(&catalog_point()).unwrap();
        assert!((g - 2.0).abs() < 1e-14);
        let mut w = catalog_point();
        w.theta = vec![0.0; 3];
        assert_eq!(f.eval_polar(&w).unwrap().1, 0.0);
    }

    #[test]
    fn condition_examples() {
        let f = fam(&[&[1, 0], &[0, 1], &[1, 1]]);
        let (c1, c2) = f.singularity_conditions(&catalog_point()).unwrap();
        assert!(c1.abs() < 1e-15 && c2.abs() < 1e-15);
        let mut w = catalog_point();
        w.theta = vec![0.0; 3];
        assert_eq!(f.singularity_conditions(&w).unwrap().0, 1.0);
        let w = PolarPoint::new(vec![1.0; 3], vec![FRAC_PI_2, 0.0, 0.0]).unwrap();
        assert!((f.singularity_conditions(&w).unwrap().1 - 1.0).abs() < 1e-15);
        let w = PolarPoint::new(vec![0.0, 1.0, 1.0], vec![0.0; 3]).unwrap();
        assert_eq!(f.singularity_conditions(&w), Err(Error::UnsupportedSupport(0)));
    }

    #[test]
    fn hessian_examples() {
        let f = fam(&[&[1, 0], &[0, 1], &[1, 1]]);
        let w = catalog_point();
        let h = f.family_hessian(&w).unwrap();
        let (v1, v2) = f.slice_vectors(&w);
        assert!(((v1.transpose() * &h * &v1)[0] + 18.0).abs() < 1e-12);
        assert!(((v2.transpose() * &h * &v2)[0] + 6.0).abs() < 1e-12);
        let mut bad = w.clone();
        bad.theta = vec![0.0; 3];
        assert!(matches!(f.family_hessian(&bad), Err(Error::ConditionsNotMet { .. })));
    }

    #[test]
    fn multiplier_matches_classifier() {
        let f = fam(&[&[1, 0], &[0, 1], &[1, 1]]);
        let mu = f.multiplier(&catalog_point()).unwrap();
        assert!((mu[0] - 1.0).abs() < 1e-12 && (mu[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn taylor_examples() {
        let f = fam(&[&[1, 0], &[0, 1], &[1, 1]]);
        let w = PolarPoint::new(vec![0.0, 0.0, 1.0], vec![0.0; 3]).unwrap();
        let p = f.taylor_at_support(&w).unwrap();
        let z = [Complex64::new(0.3, 0.5), Complex64::new(-0.2, 0.9)];
        assert!((p.eval_real(&z) - (z[0] * z[1]).im).abs() < 1e-14);
        let w = PolarPoint::new(vec![0.0, 0.0, 1.0], vec![0.0, 0.0, FRAC_PI_2]).unwrap();
        let p = f.taylor_at_support(&w).unwrap();
        assert!((p.eval_real(&z) + (z[0] * z[1]).re).abs() < 1e-14);
        let f = fam(&[&[1, 0], &[0, 1], &[2, 1]]);
        let w = PolarPoint::new(vec![0.0, 0.0, 1.0], vec![0.0; 3]).unwrap();
        let p = f.taylor_at_support(&w).unwrap();
        assert!((p.eval_real(&z) - (z[0] * z[0] * z[1]).im).abs() < 1e-14);
    }

    #[test]
    fn closed_form_labels() {
        let f = fam(&[&[1, 0], &[0, 1], &[1, 1]]);
        let w = PolarPoint::new(vec![0.0, 0.0, 0.7], vec![0.0; 3]).unwrap();
        assert_eq!(f.classify_family_point(&w).unwrap(), Label::EphemeralFocusFocus);
        let origin = PolarPoint::new(vec![0.0; 3], vec![0.0; 3]).unwrap();
        assert_eq!(f.classify_family_point(&origin).unwrap(), Label::UnclassifiedDegenerate);
        let f = fam(&[&[1, 0], &[0, 1], &[2, 1]]);
        assert_eq!(f.classify_family_point(&w).unwrap(), Label::DegenerateEphemeral);
    }

    #[test]
    fn sampled_points_agree_with_pipeline() {
        for f in [fam(&[&[1, 0], &[0, 1], &[1, 1]]), fam(&[&[1, 0], &[0, 1], &[2, 1]])] {
            for support in f.support_patterns() {
                for w in f.sample_points(&support, 20, 3) {
                    let closed = f.classify_family_point(&w).unwrap();
                    let generic = classify_point(&f.system, &w.to_cartesian()).unwrap().label;
                    assert_eq!(closed, generic, "{support:?} {w:?}");
                }
            }
        }
    }

    #[test]
    fn polar_vectors_map_to_cartesian_hessian() {
        let f = fam(&[&[1, 0], &[0, 1], &[1, 1]]);
        let w = catalog_point();
        let z = w.to_cartesian();
        let mu = f.multiplier(&w).unwrap();
        let h = f.system.g_hessian(&z) - f.system.phi_hessian(&mu);
        let (v1, v2) = f.slice_vectors(&w);
        let c1 = polar_to_cartesian_vector(&w, &v1);
        let c2 = polar_to_cartesian_vector(&w, &v2);
        assert!(((c1.transpose() * &h * &c1)[0] + 18.0).abs() < 1e-10);
        assert!(((c2.transpose() * &h * &c2)[0] + 6.0).abs() < 1e-10);
    }
}
