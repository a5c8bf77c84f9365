//! Local models `T x_H h° x C^{h+1}` presented by a slice relation `xi`.
//!
//! The stabilizer is `H = ker(lambda -> prod lambda_j^{xi_j})` inside
//! `(S^1)^{h+1}`; its weights on the slice come from an integral basis of the
//! kernel of `xi`. The torus pairing is the standard Euclidean one in that basis.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{DefiningVector, StabilizerData};

/// A local model with stabilizer `H = ker chi_xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalModel {
    pub xi: DefiningVector,
    pub slice: StabilizerData,
    /// Dimension of the annihilator block `h°` in the torus dual.
    pub annihilator_dim: usize,
}

/// Representative `[1, alpha, z]` of a point of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPoint {
    pub alpha: Vec<f64>,
    pub z: Vec<Complex64>,
}

impl LocalModel {
    pub fn new(xi: &[i64]) -> Result<Self> {
        Self::with_annihilator(xi, 0)
    }

    pub fn with_annihilator(xi: &[i64], annihilator_dim: usize) -> Result<Self> {
        let slice = StabilizerData::from_slice_xi(xi)?;
        Ok(Self {
            xi: DefiningVector::new(xi.to_vec()),
            slice,
            annihilator_dim,
        })
    }

    /// `h = dim H`.
    pub fn h(&self) -> usize {
        self.slice.rank
    }

    /// Number of slice coordinates, `h + 1`.
    pub fn slice_dim(&self) -> usize {
        self.xi.len()
    }

    /// Weight of `H` on slice coordinate `i`.
    pub fn weight(&self, i: usize) -> Vec<i64> {
        self.slice.slice_weights.iter().map(|r| r[i]).collect()
    }

    pub fn is_tall(&self) -> bool {
        self.xi.tall
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `1/2 sum_i eta_i |z_i|^2`, a vector in `h*`.
pub fn phi_h(model: &LocalModel, z: &[Complex64]) -> Result<Vec<f64>> {
    check_len(model.slice_dim(), z.len())?;
    Ok(model
        .slice
        .slice_weights
        .iter()
        .map(|row| 0.5 * row.iter().zip(z).map(|(&w, zi)| w as f64 * zi.norm_sqr()).sum::<f64>())
        .collect())
}

/// `alpha + Phi_H(z)` as the concatenation `(alpha, Phi_H(z))` in `h° + h*`.
pub fn phi_y(model: &LocalModel, pt: &ModelPoint) -> Result<Vec<f64>> {
    check_len(model.annihilator_dim, pt.alpha.len())?;
    let mut out = pt.alpha.clone();
    out.extend(phi_h(model, &pt.z)?);
    Ok(out)
}

/// `prod z_j^{xi_j}`, reading negative exponents as powers of `conj(z_j)`.
pub fn defining_poly_eval(xi: &DefiningVector, z: &[Complex64]) -> Complex64 {
    xi.xi
        .iter()
        .zip(z)
        .fold(Complex64::new(1.0, 0.0), |acc, (&x, zj)| match x.signum() {
            1 => acc * zj.powu(x as u32),
            -1 => acc * zj.conj().powu((-x) as u32),
            _ => acc,
        })
}

fn require_tall(xi: &DefiningVector) -> Result<()> {
    if !xi.tall || xi.is_zero() || xi.xi.iter().any(|&x| x < 0) {
        return Err(Error::NotTall(xi.xi.clone()));
    }
    Ok(())
}

/// `K = prod_{xi_j > 0} xi_j^{xi_j}` as a float.
pub fn power_product_f64(xi: &DefiningVector) -> f64 {
    xi.xi
        .iter()
        .filter(|&&x| x > 0)
        .map(|&x| (x as f64).powi(x as i32))
        .product()
}

/// `C` with `|z|^2 = C |P(z)|^{2/N}` on the zero level: `N K^{-1/N}`.
pub fn reduced_chart_constant(xi: &DefiningVector) -> Result<f64> {
    require_tall(xi)?;
    let n = xi.degree as f64;
    Ok(n * power_product_f64(xi).powf(-1.0 / n))
}

/// Point of the zero level with `|z_j|^2 = tau xi_j` and angles `theta`.
pub fn zero_level_point(xi: &DefiningVector, tau: f64, theta: &[f64]) -> Vec<Complex64> {
    xi.xi
        .iter()
        .zip(theta)
        .map(|(&x, &t)| Complex64::from_polar((tau * x as f64).sqrt(), t))
        .collect()
}

/// Chart invariants `(tau, sum xi_j theta_j mod 2 pi)` of a zero-level point.
pub fn chart_invariants(xi: &DefiningVector, z: &[Complex64]) -> (f64, f64) {
    let tau = z.iter().map(|x| x.norm_sqr()).sum::<f64>() / xi.degree as f64;
    let angle = xi
        .xi
        .iter()
        .zip(z)
        .filter(|(&x, _)| x > 0)
        .map(|(&x, zj)| x as f64 * zj.arg())
        .sum::<f64>()
        .rem_euclid(std::f64::consts::TAU);
    (tau, angle)
}

/// Seeded samples of the zero level, `tau` log-uniform in `[1e-3, 1e3]`.
pub fn sample_zero_level(xi: &DefiningVector, count: usize, seed: u64) -> Result<Vec<Vec<Complex64>>> {
    require_tall(xi)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let tau = 10f64.powf(rng.random_range(-3.0..=3.0));
            let theta: Vec<f64> = (0..xi.len())
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect();
            zero_level_point(xi, tau, &theta)
        })
        .collect())
}
