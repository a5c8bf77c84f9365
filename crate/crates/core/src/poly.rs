//! Sparse polynomials in `z` and `conj(z)` invariant under a torus action.
//!
//! A polynomial is `sum c[a,b] z^a conj(z)^b`. It is invariant when every
//! exponent difference `a - b` is an integer multiple of the defining vector,
//! and real-valued when `c[b,a] = conj(c[a,b])`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeff::{format_complex_rational, parse_complex_rational, CRational, Coefficient};
use crate::error::{Error, Result};
use crate::lattice::DefiningVector;

/// Exponent pair `(a, b)` of the monomial `z^a conj(z)^b`.
pub type Exponents = (Vec<u32>, Vec<u32>);

/// Sparse invariant polynomial on `C^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantPolynomial<C: Coefficient = CRational> {
    xi: DefiningVector,
    terms: BTreeMap<Exponents, C>,
}

/// Multiple `k` with `a - b = k xi`, if one exists.
pub fn xi_multiple(xi: &[i64], a: &[u32], b: &[u32]) -> Option<i64> {
    let mut k: Option<i64> = None;
    for ((&x, &ai), &bi) in xi.iter().zip(a).zip(b) {
        let d = ai as i64 - bi as i64;
        if x == 0 {
            if d != 0 {
                return None;
            }
            continue;
        }
        if d % x != 0 {
            return None;
        }
        match k {
            None => k = Some(d / x),
            Some(k0) if k0 != d / x => return None,
            _ => {}
        }
    }
    Some(k.unwrap_or(0))
}

fn unit(k: usize, j: usize) -> Vec<u32> {
    let mut e = vec![0; k];
    e[j] = 1;
    e
}

impl<C: Coefficient> InvariantPolynomial<C> {
    /// The zero polynomial on `C^k` with `k = xi.len()`.
    pub fn zero(xi: DefiningVector) -> Self {
        Self {
            xi,
            terms: BTreeMap::new(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.xi.len()
    }

    pub fn xi(&self) -> &DefiningVector {
        &self.xi
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &C)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, a: &[u32], b: &[u32]) -> C {
        self.terms
            .get(&(a.to_vec(), b.to_vec()))
            .cloned()
            .unwrap_or_else(C::zero)
    }

    /// Adds `c z^a conj(z)^b`, merging with an existing term.
    pub fn add_term(&mut self, a: Vec<u32>, b: Vec<u32>, c: C) {
        assert_eq!(a.len(), self.nvars(), "exponent length");
        assert_eq!(b.len(), self.nvars(), "exponent length");
        let key = (a, b);
        let sum = match self.terms.remove(&key) {
            Some(old) => old + c,
            None => c,
        };
        if !sum.is_zero() {
            self.terms.insert(key, sum);
        }
    }

    /// `Re(c z^a conj(z)^b)`.
    pub fn add_real_part(&mut self, a: &[u32], b: &[u32], c: C) {
        let half = C::from_ratio(1, 2);
        self.add_term(a.to_vec(), b.to_vec(), half.clone() * c.clone());
        self.add_term(b.to_vec(), a.to_vec(), half * c.conj());
    }

    /// `Im(c z^a conj(z)^b)`.
    pub fn add_imag_part(&mut self, a: &[u32], b: &[u32], c: C) {
        let half_i = C::from_ratio(1, 2) * C::imag_unit();
        self.add_term(a.to_vec(), b.to_vec(), -(half_i.clone() * c.clone()));
        self.add_term(b.to_vec(), a.to_vec(), half_i * c.conj());
    }

    /// Exponents `(xi+, xi-)` of the defining monomial.
    pub fn defining_exponents(&self) -> Exponents {
        let pos = self.xi.xi.iter().map(|&x| x.max(0) as u32).collect();
        let neg = self.xi.xi.iter().map(|&x| (-x).max(0) as u32).collect();
        (pos, neg)
    }

    /// `Im(c P)` where `P = z^{xi+} conj(z)^{xi-}`.
    pub fn imag_of_defining(xi: DefiningVector, c: C) -> Self {
        let mut p = Self::zero(xi);
        let (a, b) = p.defining_exponents();
        p.add_imag_part(&a, &b, c);
        p
    }

    /// `Re(c P)`.
    pub fn real_of_defining(xi: DefiningVector, c: C) -> Self {
        let mut p = Self::zero(xi);
        let (a, b) = p.defining_exponents();
        p.add_real_part(&a, &b, c);
        p
    }

    /// `sum_j weights[j] |z_j|^2`.
    pub fn weighted_norm_sq(xi: DefiningVector, weights: &[C]) -> Self {
        let k = xi.len();
        let mut p = Self::zero(xi);
        for (j, w) in weights.iter().enumerate() {
            p.add_term(unit(k, j), unit(k, j), w.clone());
        }
        p
    }

    /// `|z|^2`.
    pub fn norm_sq(xi: DefiningVector) -> Self {
        let k = xi.len();
        Self::weighted_norm_sq(xi, &vec![C::one(); k])
    }

    pub fn constant(xi: DefiningVector, c: C) -> Self {
        let k = xi.len();
        let mut p = Self::zero(xi);
        p.add_term(vec![0; k], vec![0; k], c);
        p
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut out = Self::zero(self.xi.clone());
        for ((a, b), v) in &self.terms {
            out.add_term(a.clone(), b.clone(), v.clone() * c.clone());
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for ((a, b), v) in &other.terms {
            out.add_term(a.clone(), b.clone(), v.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-C::one()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.xi.clone());
        for ((a1, b1), v1) in &self.terms {
            for ((a2, b2), v2) in &other.terms {
                let a = a1.iter().zip(a2).map(|(x, y)| x + y).collect();
                let b = b1.iter().zip(b2).map(|(x, y)| x + y).collect();
                out.add_term(a, b, v1.clone() * v2.clone());
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = Self::constant(self.xi.clone(), C::one());
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Total degree `|a| + |b|` of the highest term; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|(a, b)| a.iter().sum::<u32>() + b.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Terms of total degree at most `max_degree`.
    pub fn truncate(&self, max_degree: u32) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|((a, b), _)| a.iter().sum::<u32>() + b.iter().sum::<u32>() <= max_degree)
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Self {
            xi: self.xi.clone(),
            terms,
        }
    }

    /// Value at the origin.
    pub fn constant_term(&self) -> C {
        let k = self.nvars();
        self.coefficient(&vec![0; k], &vec![0; k])
    }

    pub fn without_constant(&self) -> Self {
        let mut out = self.clone();
        let k = self.nvars();
        out.terms.remove(&(vec![0; k], vec![0; k]));
        out
    }

    /// True iff every exponent difference lies in `Z xi`.
    pub fn check_invariance(&self) -> bool {
        self.first_non_invariant().is_none()
    }

    fn first_non_invariant(&self) -> Option<Vec<i64>> {
        self.terms.keys().find_map(|(a, b)| {
            xi_multiple(&self.xi.xi, a, b)
                .is_none()
                .then(|| a.iter().zip(b).map(|(x, y)| *x as i64 - *y as i64).collect())
        })
    }

    /// Errors with the first offending exponent difference.
    pub fn ensure_invariant(&self) -> Result<()> {
        match self.first_non_invariant() {
            Some(d) => Err(Error::NotInvariant(d)),
            None => Ok(()),
        }
    }

    /// True when `c[b,a] = conj(c[a,b])` for all terms (up to `tol` for floats).
    pub fn is_real(&self, tol: f64) -> bool {
        self.terms.iter().all(|((a, b), c)| {
            let mirror = self.coefficient(b, a);
            (mirror - c.conj()).is_negligible(tol)
        })
    }

    pub fn to_c64(&self) -> InvariantPolynomial<Complex64> {
        let mut out = InvariantPolynomial::zero(self.xi.clone());
        for ((a, b), v) in &self.terms {
            out.add_term(a.clone(), b.clone(), v.to_c64());
        }
        out
    }

    /// Re-labels the coordinates: new polynomial lives on `C^{xi.len()}` and
    /// old variable `j` becomes new variable `map[j]`.
    pub fn with_context(&self, xi: DefiningVector, map: &[usize]) -> Self {
        let k = xi.len();
        let mut out = Self::zero(xi);
        for ((a, b), v) in &self.terms {
            let mut na = vec![0; k];
            let mut nb = vec![0; k];
            for (j, &t) in map.iter().enumerate() {
                na[t] += a[j];
                nb[t] += b[j];
            }
            out.add_term(na, nb, v.clone());
        }
        out
    }

    /// Complex value at `z`.
    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.eval_derivative(z, &[], &[])
    }

    /// Real value at `z` (the real part; exact for real polynomials).
    pub fn eval_real(&self, z: &[Complex64]) -> f64 {
        self.eval(z).re
    }

    /// `d/dz_{dz[0]} ... d/dzbar_{dzbar[0]} ...` evaluated at `z`.
    pub fn eval_derivative(&self, z: &[Complex64], dz: &[usize], dzbar: &[usize]) -> Complex64 {
        assert_eq!(z.len(), self.nvars(), "point dimension");
        let zbar: Vec<Complex64> = z.iter().map(|x| x.conj()).collect();
        let mut total = Complex64::new(0.0, 0.0);
        'terms: for ((a, b), c) in &self.terms {
            let mut a = a.clone();
            let mut b = b.clone();
            let mut factor = 1.0;
            for &j in dz {
                if a[j] == 0 {
                    continue 'terms;
                }
                factor *= a[j] as f64;
                a[j] -= 1;
            }
            for &j in dzbar {
                if b[j] == 0 {
                    continue 'terms;
                }
                factor *= b[j] as f64;
                b[j] -= 1;
            }
            let mut m = c.to_c64() * factor;
            for j in 0..z.len() {
                if a[j] > 0 {
                    m *= z[j].powu(a[j]);
                }
                if b[j] > 0 {
                    m *= zbar[j].powu(b[j]);
                }
            }
            total += m;
        }
        total
    }

    /// Gradient in real coordinates `(x_1, y_1, x_2, y_2, ...)`.
    pub fn real_gradient(&self, z: &[Complex64]) -> Vec<f64> {
        let mut g = Vec::with_capacity(2 * z.len());
        for j in 0..z.len() {
            let dz = self.eval_derivative(z, &[j], &[]);
            let dzb = self.eval_derivative(z, &[], &[j]);
            g.push((dz + dzb).re);
            g.push((Complex64::i() * (dz - dzb)).re);
        }
        g
    }

    /// Hessian in real coordinates `(x_1, y_1, ...)`, row-major `2k x 2k`.
    pub fn real_hessian(&self, z: &[Complex64]) -> Vec<Vec<f64>> {
        let k = z.len();
        let i = Complex64::i();
        let mut h = vec![vec![0.0; 2 * k]; 2 * k];
        for p in 0..k {
            for q in 0..k {
                let zz = self.eval_derivative(z, &[p, q], &[]);
                let zb = self.eval_derivative(z, &[p], &[q]);
                let bz = self.eval_derivative(z, &[q], &[p]);
                let bb = self.eval_derivative(z, &[], &[p, q]);
                // d_x = d_z + d_zbar, d_y = i (d_z - d_zbar)
                h[2 * p][2 * q] = (zz + zb + bz + bb).re;
                h[2 * p][2 * q + 1] = (i * (zz - zb + bz - bb)).re;
                h[2 * p + 1][2 * q] = (i * (zz + zb - bz - bb)).re;
                h[2 * p + 1][2 * q + 1] = (-(zz - zb - bz + bb)).re;
            }
        }
        h
    }
}

impl InvariantPolynomial<Complex64> {
    /// Pullback by the rotation `z_j -> e^{i angles[j]} z_j`.
    pub fn rotate(&self, angles: &[f64]) -> Self {
        let mut out = Self::zero(self.xi.clone());
        for ((a, b), v) in &self.terms {
            let phase: f64 = a
                .iter()
                .zip(b)
                .zip(angles)
                .map(|((x, y), t)| (*x as f64 - *y as f64) * t)
                .sum();
            out.add_term(a.clone(), b.clone(), v * Complex64::from_polar(1.0, phase));
        }
        out
    }
}

/// JSON form of one term: `{"a": [...], "b": [...], "c": "1/2i"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub a: Vec<u32>,
    pub b: Vec<u32>,
    pub c: String,
}

impl InvariantPolynomial<CRational> {
    pub fn to_json_terms(&self) -> Vec<TermJson> {
        self.terms
            .iter()
            .map(|((a, b), c)| TermJson {
                a: a.clone(),
                b: b.clone(),
                c: format_complex_rational(c),
            })
            .collect()
    }

    /// Parses terms, checking lengths, invariance and reality.
    pub fn from_json_terms(xi: DefiningVector, terms: &[TermJson]) -> Result<Self> {
        let mut p = Self::zero(xi);
        for t in terms {
            if t.a.len() != p.nvars() || t.b.len() != p.nvars() {
                return Err(Error::DimensionMismatch {
                    expected: p.nvars(),
                    got: t.a.len().max(t.b.len()),
                });
            }
            p.add_term(t.a.clone(), t.b.clone(), parse_complex_rational(&t.c)?);
        }
        p.ensure_invariant()?;
        if !p.is_real(0.0) {
            return Err(Error::Parse(
                "polynomial is not real-valued: c[b,a] must equal conj(c[a,b])".into(),
            ));
        }
        Ok(p)
    }
}
