//! Exact integer-lattice algebra for torus actions on `C^n`.
//!
//! Everything here runs on arbitrary-precision integers and rationals: Smith
//! normal form, the defining vector of a complexity-one action, stabilizers of
//! coordinate strata, tallness and degree, properness of the moment map, and
//! the obstruction predicates that decide when the defining polynomial has
//! degree greater than two.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense integer matrix with arbitrary-precision entries, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    /// Builds a matrix from `rows` rows of equal length `cols`.
    pub fn from_rows(rows: &[Vec<i64>], cols: usize) -> Self {
        let mut m = Self::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged integer matrix");
            for (j, &x) in row.iter().enumerate() {
                m.data[i * cols + j] = BigInt::from(x);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: BigInt) {
        self.data[i * self.cols + j] = x;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matrix shapes do not compose");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let idx = i * other.cols + j;
                    out.data[idx] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    /// Entries as `i64`; `None` on overflow.
    pub fn to_i64_rows(&self) -> Option<Vec<Vec<i64>>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).to_i64()).collect())
            .collect()
    }

    /// Determinant by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> BigInt {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut a = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a.get(k, k).is_zero() {
                let Some(p) = (k + 1..n).find(|&i| !a.get(i, k).is_zero()) else {
                    return BigInt::zero();
                };
                a.swap_rows(k, p);
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (a.get(i, j) * a.get(k, k) - a.get(i, k) * a.get(k, j)) / &prev;
                    a.set(i, j, v);
                }
            }
            prev = a.get(k, k).clone();
        }
        sign * a.get(n - 1, n - 1)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[dst] += factor * row[src]
    fn add_row_multiple(&mut self, dst: usize, src: usize, factor: &BigInt) {
        for j in 0..self.cols {
            let v = self.get(src, j) * factor;
            self.data[dst * self.cols + j] += v;
        }
    }

    /// col[dst] += factor * col[src]
    fn add_col_multiple(&mut self, dst: usize, src: usize, factor: &BigInt) {
        for i in 0..self.rows {
            let v = self.get(i, src) * factor;
            self.data[i * self.cols + dst] += v;
        }
    }

    fn negate_row(&mut self, r: usize) {
        for j in 0..self.cols {
            let idx = r * self.cols + j;
            self.data[idx] = -std::mem::take(&mut self.data[idx]);
        }
    }
}

/// Result of [`smith_normal_form`]: `u * a * v == d`.
#[derive(Debug, Clone)]
pub struct SmithForm {
    pub u: IntMatrix,
    pub d: IntMatrix,
    pub v: IntMatrix,
}

impl SmithForm {
    /// Nonzero diagonal entries, in order.
    pub fn invariant_factors(&self) -> Vec<BigInt> {
        let k = self.d.rows().min(self.d.cols());
        (0..k)
            .map(|i| self.d.get(i, i).clone())
            .take_while(|x| !x.is_zero())
            .collect()
    }

    pub fn rank(&self) -> usize {
        self.invariant_factors().len()
    }

    /// Integral basis of `{x : a x = 0}`, as columns `rank..` of `v`.
    pub fn kernel_basis(&self) -> Vec<Vec<BigInt>> {
        (self.rank()..self.v.cols()).map(|j| self.v.column(j)).collect()
    }
}

/// Smith normal form over the integers.
///
/// Returns unimodular `u`, `v` and diagonal `d` with `u a v = d`, nonnegative
/// diagonal entries and `d[i][i] | d[i+1][i+1]`.
pub fn smith_normal_form(a: &IntMatrix) -> SmithForm {
    let (m, n) = (a.rows(), a.cols());
    let mut d = a.clone();
    let mut u = IntMatrix::identity(m);
    let mut v = IntMatrix::identity(n);

    for k in 0..m.min(n) {
        loop {
            // Smallest nonzero entry of the trailing block becomes the pivot.
            let mut pivot: Option<(usize, usize)> = None;
            for i in k..m {
                for j in k..n {
                    let x = d.get(i, j);
                    if x.is_zero() {
                        continue;
                    }
                    match pivot {
                        Some((pi, pj)) if d.get(pi, pj).abs() <= x.abs() => {}
                        _ => pivot = Some((i, j)),
                    }
                }
            }
            let Some((pi, pj)) = pivot else {
                return SmithForm { u, d, v };
            };
            d.swap_rows(k, pi);
            u.swap_rows(k, pi);
            d.swap_cols(k, pj);
            v.swap_cols(k, pj);

            let p = d.get(k, k).clone();
            let mut clean = true;
            for i in k + 1..m {
                let q = d.get(i, k).div_floor(&p);
                if !q.is_zero() {
                    d.add_row_multiple(i, k, &-&q);
                    u.add_row_multiple(i, k, &-&q);
                }
                if !d.get(i, k).is_zero() {
                    clean = false;
                }
            }
            for j in k + 1..n {
                let q = d.get(k, j).div_floor(&p);
                if !q.is_zero() {
                    d.add_col_multiple(j, k, &-&q);
                    v.add_col_multiple(j, k, &-&q);
                }
                if !d.get(k, j).is_zero() {
                    clean = false;
                }
            }
            if !clean {
                continue;
            }
            // Divisibility: fold an offending row into the pivot row and retry.
            let offending = (k + 1..m).find(|&i| (k + 1..n).any(|j| !d.get(i, j).is_multiple_of(&p)));
            if let Some(i) = offending {
                d.add_row_multiple(k, i, &BigInt::one());
                u.add_row_multiple(k, i, &BigInt::one());
                continue;
            }
            break;
        }
        if d.get(k, k).is_negative() {
            d.negate_row(k);
            u.negate_row(k);
        }
    }
    SmithForm { u, d, v }
}

fn gcd_all(xs: &[i64]) -> u64 {
    xs.iter().fold(0u64, |g, &x| g.gcd(&x.unsigned_abs()))
}

/// Flip `v` so its first nonzero entry is positive.
fn canonical_sign(v: &mut [i64]) {
    if v.iter().find(|x| **x != 0).is_some_and(|x| *x < 0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn to_i64_vec(v: &[BigInt]) -> Result<Vec<i64>> {
    v.iter()
        .map(|x| x.to_i64().ok_or_else(|| Error::InvalidAction("lattice entry overflows i64".into())))
        .collect()
}

/// Isotropy weights of an `(n-1)`-torus acting on `C^n`.
///
/// Column `j` is the weight of the `j`-th coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightMatrix {
    n: usize,
    entries: Vec<Vec<i64>>,
}

impl WeightMatrix {
    /// Shape check only; lattice validity is checked by [`defining_vector`].
    pub fn new(entries: Vec<Vec<i64>>) -> Result<Self> {
        let n = entries.len() + 1;
        if n < 2 {
            return Err(Error::InvalidAction(
                "complexity one needs at least two complex coordinates".into(),
            ));
        }
        if let Some(bad) = entries.iter().find(|r| r.len() != n) {
            return Err(Error::InvalidAction(format!(
                "weight matrix must be {}x{n}, found a row of length {}",
                n - 1,
                bad.len()
            )));
        }
        Ok(Self { n, entries })
    }

    /// Builds the matrix whose columns are the given weights.
    pub fn from_columns(columns: &[Vec<i64>]) -> Result<Self> {
        let n = columns.len();
        let rows = n.saturating_sub(1);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::InvalidAction(format!(
                "each of the {n} weights must have {rows} components"
            )));
        }
        Self::new((0..rows).map(|i| columns.iter().map(|c| c[i]).collect()).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn torus_dim(&self) -> usize {
        self.n - 1
    }

    pub fn rows(&self) -> &[Vec<i64>] {
        &self.entries
    }

    pub fn column(&self, j: usize) -> Vec<i64> {
        self.entries.iter().map(|r| r[j]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<i64>> {
        (0..self.n).map(|j| self.column(j)).collect()
    }

    pub fn to_int_matrix(&self) -> IntMatrix {
        IntMatrix::from_rows(&self.entries, self.n)
    }

    /// The same action with columns permuted: new column `k` is old column `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|r| perm.iter().map(|&p| r[p]).collect())
            .collect();
        Self { n: self.n, entries }
    }
}

/// Generator `xi` of the unique relation among the weights, with its degree and tallness.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DefiningVector {
    pub xi: Vec<i64>,
    pub degree: u64,
    pub tall: bool,
}

impl DefiningVector {
    /// Canonicalizes the sign (first nonzero entry positive) and fills in degree and tallness.
    pub fn new(mut xi: Vec<i64>) -> Self {
        canonical_sign(&mut xi);
        let (tall, degree) = tall_and_degree(&xi);
        Self { xi, degree, tall }
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.xi.iter().all(|&x| x == 0)
    }

    pub fn gcd(&self) -> u64 {
        gcd_all(&self.xi)
    }

    /// `prod xi_j^{xi_j}` over positive entries.
    pub fn power_product(&self) -> BigInt {
        self.xi
            .iter()
            .filter(|&&x| x > 0)
            .map(|&x| num_traits::pow(BigInt::from(x), x as usize))
            .product()
    }
}

/// `tall` is true when no two entries have opposite signs; `N` is the sum of absolute values.
pub fn tall_and_degree(xi: &[i64]) -> (bool, u64) {
    let pos = xi.iter().any(|&x| x > 0);
    let neg = xi.iter().any(|&x| x < 0);
    (!(pos && neg), xi.iter().map(|x| x.unsigned_abs()).sum())
}

/// Primitive generator of the kernel of `a -> sum a_j eta_j`.
pub fn defining_vector(w: &WeightMatrix) -> Result<DefiningVector> {
    let snf = smith_normal_form(&w.to_int_matrix());
    let factors = snf.invariant_factors();
    if factors.len() != w.torus_dim() {
        return Err(Error::InvalidAction(format!(
            "weights span a lattice of rank {} < {}; kernel rank is not one",
            factors.len(),
            w.torus_dim()
        )));
    }
    if let Some(f) = factors.iter().find(|f| !f.is_one()) {
        return Err(Error::InvalidAction(format!(
            "character map is not surjective (invariant factor {f}); the torus does not act effectively"
        )));
    }
    let kernel = snf.kernel_basis();
    debug_assert_eq!(kernel.len(), 1);
    Ok(DefiningVector::new(to_i64_vec(&kernel[0])?))
}

/// Stabilizer of a point whose vanishing coordinates are exactly `support`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizerData {
    /// Indices of vanishing coordinates.
    pub support: Vec<usize>,
    /// Dimension of the identity component.
    pub rank: usize,
    /// Order of the component group.
    pub component_count: u64,
    /// `rank x |support|` matrix; column `i` is the weight on the `i`-th slice coordinate.
    pub slice_weights: Vec<Vec<i64>>,
    /// Integral basis of the stabilizer's Lie algebra, in torus coordinates.
    pub lie_basis: Vec<Vec<i64>>,
    /// Relation among the slice weights (restriction of the global defining vector).
    pub xi_restricted: DefiningVector,
}

impl StabilizerData {
    /// Degree of the defining polynomial of the local model at this stratum.
    ///
    /// When the defining vector vanishes on the support, the slice picks up an
    /// extra coordinate of weight zero and the degree is one.
    pub fn slice_degree(&self) -> u64 {
        if self.xi_restricted.is_zero() {
            1
        } else {
            self.xi_restricted.degree
        }
    }

    pub fn is_tall(&self) -> bool {
        self.xi_restricted.tall
    }

    pub fn is_connected(&self) -> bool {
        self.component_count == 1
    }

    /// Slice data of `H = ker(lambda -> prod lambda_j^{xi_j})` acting on `C^k`.
    pub fn from_slice_xi(xi: &[i64]) -> Result<Self> {
        let k = xi.len();
        if k == 0 || xi.iter().all(|&x| x == 0) {
            return Err(Error::InvalidAction("slice relation must be a nonzero vector".into()));
        }
        let snf = smith_normal_form(&IntMatrix::from_rows(&[xi.to_vec()], k));
        let mut basis = Vec::new();
        for b in snf.kernel_basis() {
            let mut b = to_i64_vec(&b)?;
            canonical_sign(&mut b);
            basis.push(b);
        }
        // weights: entry (r, i) = i-th coordinate of basis vector r
        Ok(Self {
            support: (0..k).collect(),
            rank: k - 1,
            component_count: gcd_all(xi),
            slice_weights: basis.clone(),
            lie_basis: basis,
            xi_restricted: DefiningVector::new(xi.to_vec()),
        })
    }
}

/// Stabilizer of a point of `C^n` whose vanishing coordinates are `support`.
pub fn stabilizer_at(w: &WeightMatrix, support: &[usize]) -> Result<StabilizerData> {
    let xi = defining_vector(w)?;
    let mut support: Vec<usize> = support.to_vec();
    support.sort_unstable();
    support.dedup();
    if let Some(&bad) = support.iter().find(|&&i| i >= w.n()) {
        return Err(Error::DimensionMismatch { expected: w.n(), got: bad + 1 });
    }
    let outside: Vec<usize> = (0..w.n()).filter(|j| !support.contains(j)).collect();
    let t = w.torus_dim();

    // t in R^{n-1}/Z^{n-1} fixes the point iff <eta_j, t> is integral for all j outside the support.
    let mut a = IntMatrix::zeros(outside.len(), t);
    for (r, &j) in outside.iter().enumerate() {
        for (c, row) in w.rows().iter().enumerate() {
            a.set(r, c, BigInt::from(row[j]));
        }
    }
    let snf = smith_normal_form(&a);
    let factors = snf.invariant_factors();
    let component_count = factors
        .iter()
        .product::<BigInt>()
        .to_u64()
        .ok_or_else(|| Error::InvalidAction("component group too large".into()))?;
    let rank = t - factors.len();

    let mut lie_basis = Vec::with_capacity(rank);
    let mut slice_weights = Vec::with_capacity(rank);
    for b in snf.kernel_basis() {
        let mut b = to_i64_vec(&b)?;
        let mut weights: Vec<i64> = support
            .iter()
            .map(|&i| (0..t).map(|c| w.rows()[c][i] * b[c]).sum())
            .collect();
        if weights.iter().find(|x| **x != 0).is_some_and(|x| *x < 0) {
            b.iter_mut().for_each(|x| *x = -*x);
            weights.iter_mut().for_each(|x| *x = -*x);
        }
        lie_basis.push(b);
        slice_weights.push(weights);
    }

    let xi_restricted = DefiningVector::new(support.iter().map(|&i| xi.xi[i]).collect());
    Ok(StabilizerData {
        support,
        rank,
        component_count,
        slice_weights,
        lie_basis,
        xi_restricted,
    })
}

/// Stabilizer of a point with vanishing set `support` for the group
/// `G = ker chi_xi` acting diagonally on `C^m`.
///
/// Agrees with [`stabilizer_at`] when `xi` is the defining vector of a valid
/// weight matrix; also covers non-primitive `xi` and the trivial torus.
pub fn stabilizer_from_xi(xi: &[i64], support: &[usize]) -> Result<StabilizerData> {
    let mut support: Vec<usize> = support.to_vec();
    support.sort_unstable();
    support.dedup();
    if let Some(&bad) = support.iter().find(|&&i| i >= xi.len()) {
        return Err(Error::DimensionMismatch { expected: xi.len(), got: bad + 1 });
    }
    let restricted: Vec<i64> = support.iter().map(|&i| xi[i]).collect();
    if restricted.iter().any(|&x| x != 0) {
        let mut data = StabilizerData::from_slice_xi(&restricted)?;
        data.support = support;
        return Ok(data);
    }
    // xi vanishes on the support: the whole coordinate torus (S^1)^I fixes the point.
    let k = support.len();
    let identity: Vec<Vec<i64>> = (0..k)
        .map(|r| (0..k).map(|c| i64::from(r == c)).collect())
        .collect();
    Ok(StabilizerData {
        support,
        rank: k,
        component_count: 1,
        slice_weights: identity.clone(),
        lie_basis: identity,
        xi_restricted: DefiningVector::new(restricted),
    })
}

/// Rational certificate `u` with `<eta_j, u> >= 1` for every weight, if one exists.
///
/// Solved by Fourier-Motzkin elimination over exact rationals.
pub fn properness_certificate(w: &WeightMatrix) -> Option<Vec<BigRational>> {
    let dim = w.torus_dim();
    let one = BigRational::one();
    // constraint: coeffs . x >= rhs
    let mut system: Vec<(Vec<BigRational>, BigRational)> = w
        .columns()
        .into_iter()
        .map(|eta| {
            (
                eta.into_iter().map(|x| BigRational::from_integer(x.into())).collect(),
                one.clone(),
            )
        })
        .collect();

    // stages[k] holds the constraints involving only variables 0..=k
    let mut stages = vec![Vec::new(); dim];
    for var in (0..dim).rev() {
        stages[var] = system.clone();
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for c in system {
            if c.0[var].is_positive() {
                pos.push(c);
            } else if c.0[var].is_negative() {
                neg.push(c);
            } else {
                rest.push(c);
            }
        }
        for (pc, pr) in &pos {
            for (nc, nr) in &neg {
                let sp = pc[var].clone();
                let sn = -nc[var].clone();
                let coeffs: Vec<BigRational> = pc
                    .iter()
                    .zip(nc)
                    .map(|(a, b)| a / &sp + b / &sn)
                    .collect();
                rest.push((coeffs, pr / &sp + nr / &sn));
            }
        }
        system = rest;
    }
    if system.iter().any(|(_, rhs)| rhs.is_positive()) {
        return None;
    }

    let mut x = vec![BigRational::zero(); dim];
    for var in 0..dim {
        let mut lower: Option<BigRational> = None;
        let mut upper: Option<BigRational> = None;
        for (coeffs, rhs) in &stages[var] {
            let c = &coeffs[var];
            if c.is_zero() {
                continue;
            }
            let known: BigRational = (0..var).map(|k| &coeffs[k] * &x[k]).sum();
            let bound = (rhs - known) / c;
            if c.is_positive() {
                if lower.as_ref().is_none_or(|l| bound > *l) {
                    lower = Some(bound);
                }
            } else if upper.as_ref().is_none_or(|u| bound < *u) {
                upper = Some(bound);
            }
        }
        x[var] = match (lower, upper) {
            (Some(l), Some(u)) => (l + u) / BigRational::from_integer(2.into()),
            (Some(l), None) => l,
            (None, Some(u)) => u,
            (None, None) => BigRational::zero(),
        };
    }
    Some(x)
}

/// True when some `u` pairs strictly positively with every weight.
pub fn properness_check(w: &WeightMatrix) -> bool {
    properness_certificate(w).is_some()
}

/// Degree-greater-than-two test from slice data alone.
///
/// `slice_weights` is `h x k` with the weights as columns. Holds exactly when
/// (1) a zero weight forces more than two components, and (2) a pair of
/// opposite weights forces a disconnected stabilizer.
pub fn degree_gt2_criterion(slice_weights: &[Vec<i64>], component_count: u64) -> bool {
    if slice_weights.is_empty() {
        // zero-dimensional stabilizer: every weight is zero
        return component_count > 2;
    }
    let count = slice_weights[0].len();
    let weight = |i: usize| -> Vec<i64> { slice_weights.iter().map(|r| r[i]).collect() };
    let has_zero = (0..count).any(|i| weight(i).iter().all(|&x| x == 0));
    if has_zero && component_count <= 2 {
        return false;
    }
    let has_opposite = (0..count).any(|i| {
        (i + 1..count).any(|j| weight(i).iter().zip(weight(j)).all(|(a, b)| a + b == 0))
    });
    !(has_opposite && component_count == 1)
}

/// True when at least three of the given tall orbits satisfy [`degree_gt2_criterion`].
pub fn too_bad_obstruction(orbit_slices: &[StabilizerData]) -> bool {
    orbit_slices
        .iter()
        .filter(|s| degree_gt2_criterion(&s.slice_weights, s.component_count))
        .count()
        >= 3
}
