//! Spatial semisimple finite-dimensional Lp algebras and their isometries.
//!
//! An [`SsfdAlgebra`] is a finite direct sum of full matrix algebras
//! `M_{d_1} + ... + M_{d_N}` acting on `l^p` of dimension `d_1 + ... + d_N`;
//! an empty summand list encodes the zero algebra. For `p != 2` the invertible
//! isometries of `l^p_d` are exactly the complex permutation matrices
//! `s = sum_j lambda_j e_{sigma(j), j}` with unimodular phases, and the
//! hermitian idempotents of `M_d` are exactly the diagonal 0/1 matrices;
//! this module provides both characterizations as executable tests.

use num_complex::Complex;
use rand::Rng;
use thiserror::Error;

use crate::matrix::Matrix;
use crate::pnorm::{self, NormEstimate, NormOptions, PExponent};
use crate::scalar::Real;

/// Modulus tolerance for phases of complex permutations.
pub const PHASE_TOL: f64 = 1e-12;

/// Entrywise tolerance below which an element must satisfy `e^2 = e` to be
/// treated as an idempotent.
pub const IDEMPOTENT_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum AlgebraError {
    #[error("summand sizes must be positive (summand {0} is zero)")]
    ZeroSummand(usize),
    #[error("matrix is not an idempotent: ||e^2 - e|| = {defect}")]
    NotIdempotent { defect: f64 },
    #[error("not a complex permutation: {0}")]
    NotAPermutation(String),
    #[error("{0}")]
    ShapeMismatch(String),
}

/// Finite direct sum of full matrix algebras on `l^p`.
#[derive(Clone, Debug, PartialEq)]
pub struct SsfdAlgebra<T: Real> {
    p: PExponent<T>,
    summands: Vec<usize>,
}

impl<T: Real> SsfdAlgebra<T> {
    pub fn new(p: PExponent<T>, summands: Vec<usize>) -> Result<Self, AlgebraError> {
        if let Some(k) = summands.iter().position(|&d| d == 0) {
            return Err(AlgebraError::ZeroSummand(k));
        }
        Ok(SsfdAlgebra { p, summands })
    }

    pub fn p(&self) -> PExponent<T> {
        self.p
    }

    /// Block sizes `d_1, ..., d_N`.
    pub fn summands(&self) -> &[usize] {
        &self.summands
    }

    /// Dimension of the underlying `l^p` space.
    pub fn dimension(&self) -> usize {
        self.summands.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.summands.is_empty()
    }

    /// Direct sum, concatenating summand lists. Exponents must agree.
    pub fn dsum(&self, other: &Self) -> Result<Self, AlgebraError> {
        if self.p != other.p {
            return Err(AlgebraError::ShapeMismatch("exponent mismatch in direct sum".into()));
        }
        let mut summands = self.summands.clone();
        summands.extend_from_slice(&other.summands);
        SsfdAlgebra::new(self.p, summands)
    }

    /// Summand sizes multiplied by `r` (the matrix amplification `M_r(A)`).
    pub fn amplify(&self, r: usize) -> Result<Self, AlgebraError> {
        if r == 0 {
            return Err(AlgebraError::ShapeMismatch("amplification factor must be positive".into()));
        }
        SsfdAlgebra::new(self.p, self.summands.iter().map(|d| d * r).collect())
    }

    /// The multiplicative unit.
    pub fn unit(&self) -> AlgebraElement<T> {
        AlgebraElement {
            algebra: self.clone(),
            blocks: self.summands.iter().map(|&d| Matrix::identity(d)).collect(),
        }
    }

    pub fn zero_element(&self) -> AlgebraElement<T> {
        AlgebraElement {
            algebra: self.clone(),
            blocks: self.summands.iter().map(|&d| Matrix::zeros(d, d)).collect(),
        }
    }

    /// Element supported on a single summand: the matrix unit `e_{i,l}` of
    /// summand `j`, zero elsewhere.
    pub fn matrix_unit(&self, j: usize, i: usize, l: usize) -> AlgebraElement<T> {
        assert!(j < self.summands.len() && i < self.summands[j] && l < self.summands[j]);
        let mut e = self.zero_element();
        e.blocks[j] = Matrix::unit(self.summands[j], i, l);
        e
    }

    /// Diagonal 0/1 idempotent with the given per-summand supports.
    pub fn diag01(&self, supports: &[Vec<bool>]) -> AlgebraElement<T> {
        assert_eq!(supports.len(), self.summands.len());
        let mut e = self.zero_element();
        for (k, sup) in supports.iter().enumerate() {
            assert_eq!(sup.len(), self.summands[k]);
            for (i, &on) in sup.iter().enumerate() {
                if on {
                    e.blocks[k][(i, i)] = Complex::new(T::one(), T::zero());
                }
            }
        }
        e
    }
}

/// Element of an [`SsfdAlgebra`], one square block per summand.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement<T: Real> {
    algebra: SsfdAlgebra<T>,
    blocks: Vec<Matrix<T>>,
}

impl<T: Real> AlgebraElement<T> {
    pub fn new(algebra: SsfdAlgebra<T>, blocks: Vec<Matrix<T>>) -> Result<Self, AlgebraError> {
        if blocks.len() != algebra.summands.len() {
            return Err(AlgebraError::ShapeMismatch(format!(
                "expected {} blocks, got {}",
                algebra.summands.len(),
                blocks.len()
            )));
        }
        for (k, b) in blocks.iter().enumerate() {
            let d = algebra.summands[k];
            if b.rows() != d || b.cols() != d {
                return Err(AlgebraError::ShapeMismatch(format!(
                    "block {} must be {}x{}, got {}x{}",
                    k,
                    d,
                    d,
                    b.rows(),
                    b.cols()
                )));
            }
        }
        Ok(AlgebraElement { algebra, blocks })
    }

    pub fn algebra(&self) -> &SsfdAlgebra<T> {
        &self.algebra
    }

    pub fn blocks(&self) -> &[Matrix<T>] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &Matrix<T> {
        &self.blocks[k]
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.algebra, other.algebra, "elements of different algebras");
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.add(b)).collect();
        AlgebraElement { algebra: self.algebra.clone(), blocks }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.algebra, other.algebra, "elements of different algebras");
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.sub(b)).collect();
        AlgebraElement { algebra: self.algebra.clone(), blocks }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.algebra, other.algebra, "elements of different algebras");
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.mul(b)).collect();
        AlgebraElement { algebra: self.algebra.clone(), blocks }
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        AlgebraElement {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|b| b.scale(c)).collect(),
        }
    }

    /// Entrywise distance, max over summands.
    pub fn distance(&self, other: &Self) -> T {
        assert_eq!(self.algebra, other.algebra, "elements of different algebras");
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.distance(b))
            .fold(T::zero(), T::max)
    }

    /// Max entrywise defect `||e^2 - e||` over summands.
    pub fn idempotent_defect(&self) -> T {
        self.mul(self).distance(self)
    }

    /// Structural hermitian-idempotent test on every block.
    pub fn is_hermitian_idempotent(&self, tol: T) -> bool {
        self.blocks.iter().all(|b| is_hermitian_idempotent(b, tol))
    }
}

/// Norm of an element: max over summands of the induced `p -> p` block norms.
/// The zero algebra's only element has norm 0 with `converged = true`.
/// Element with entries drawn uniformly from the complex unit square, for
/// randomized audits and tests.
pub fn random_element<T: Real, R: Rng>(a: &SsfdAlgebra<T>, rng: &mut R) -> AlgebraElement<T> {
    let blocks = a
        .summands()
        .iter()
        .map(|&d| {
            Matrix::from_fn(d, d, |_, _| {
                Complex::new(T::of(rng.gen_range(-1.0..1.0)), T::of(rng.gen_range(-1.0..1.0)))
            })
        })
        .collect();
    AlgebraElement::new(a.clone(), blocks).expect("generated blocks have the right sizes")
}

pub fn element_norm<T: Real>(a: &AlgebraElement<T>, opts: &NormOptions) -> NormEstimate<T> {
    let parts: Vec<NormEstimate<T>> = a
        .blocks
        .iter()
        .map(|b| pnorm::operator_p_norm(b, a.algebra.p, opts).expect("blocks are square"))
        .collect();
    pnorm::max_estimate(parts)
}

/// True iff every off-diagonal entry has modulus at most `tol` and every
/// diagonal entry is within `tol` of 0 or 1. For `p != 2` this is exactly the
/// hermitian-idempotent condition on `M_d`.
pub fn is_hermitian_idempotent<T: Real>(e: &Matrix<T>, tol: T) -> bool {
    assert!(e.is_square(), "hermitian idempotents live in square matrix algebras");
    for i in 0..e.rows() {
        for j in 0..e.cols() {
            let z = e[(i, j)];
            if i == j {
                let to0 = z.norm();
                let to1 = (z - Complex::new(T::one(), T::zero())).norm();
                if to0 > tol && to1 > tol {
                    return false;
                }
            } else if z.norm() > tol {
                return false;
            }
        }
    }
    true
}

fn require_idempotent<T: Real>(e: &Matrix<T>) -> Result<(), AlgebraError> {
    assert!(e.is_square(), "idempotents live in square matrix algebras");
    let defect = e.mul(e).distance(e);
    if defect > T::of(IDEMPOTENT_TOL) {
        return Err(AlgebraError::NotIdempotent { defect: defect.as_f64() });
    }
    Ok(())
}

/// Numeric hermitian defect of an idempotent `e` in `M_d` acting on `l^p_d`:
/// `max(0, max_lambda ||exp(i lambda e)|| - 1)` over `lambda_grid` equispaced
/// points of the half-open grid `-pi + 2 pi j / lambda_grid` (the map is
/// `2 pi`-periodic in `lambda`, and the half-open grid contains `+-pi/2`,
/// where the known non-hermitian witnesses live). Since `e^2 = e`, the
/// exponential has the closed form `exp(i lambda e) = 1 + (e^{i lambda} - 1) e`.
/// Hermitian idempotents give defect 0; the defect is a certified lower bound
/// otherwise.
pub fn hermitian_defect<T: Real>(
    e: &Matrix<T>,
    p: PExponent<T>,
    lambda_grid: usize,
) -> Result<T, AlgebraError> {
    require_idempotent(e)?;
    assert!(lambda_grid >= 4, "lambda grid too coarse");
    let d = e.rows();
    let opts = NormOptions::default();
    let mut worst = T::zero();
    for j in 0..lambda_grid {
        let lambda = T::of(-std::f64::consts::PI + std::f64::consts::TAU * j as f64 / lambda_grid as f64);
        let c = Complex::new(lambda.cos() - T::one(), lambda.sin());
        let m = Matrix::identity(d).add(&e.scale(c));
        let est = pnorm::operator_p_norm(&m, p, &opts).expect("square");
        worst = worst.max(est.value - T::one());
    }
    Ok(worst.max(T::zero()))
}

/// `beta_e(lambda_1, lambda_2) = lambda_1 e + lambda_2 (1 - e)`, the unital
/// parametrization attached to an idempotent `e`.
pub fn beta_map<T: Real>(
    e: &Matrix<T>,
    lambda1: Complex<T>,
    lambda2: Complex<T>,
) -> Result<Matrix<T>, AlgebraError> {
    require_idempotent(e)?;
    let one_minus = Matrix::identity(e.rows()).sub(e);
    Ok(e.scale(lambda1).add(&one_minus.scale(lambda2)))
}

/// Complex permutation matrix `s = sum_j lambda_j e_{sigma(j), j}`: column `j`
/// carries the unimodular phase `lambda_j` in row `sigma(j)`. For `p != 2`
/// these are exactly the invertible isometries of `l^p_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexPermutation<T: Real> {
    sigma: Vec<usize>,
    phases: Vec<Complex<T>>,
}

impl<T: Real> ComplexPermutation<T> {
    /// Validates that `sigma` is a bijection and every phase is unimodular
    /// within [`PHASE_TOL`]; phases are renormalized to exact modulus.
    pub fn new(sigma: Vec<usize>, phases: Vec<Complex<T>>) -> Result<Self, AlgebraError> {
        let d = sigma.len();
        if phases.len() != d {
            return Err(AlgebraError::NotAPermutation(format!(
                "{} phases for {} columns",
                phases.len(),
                d
            )));
        }
        if d == 0 {
            return Err(AlgebraError::NotAPermutation("empty permutation".into()));
        }
        let mut seen = vec![false; d];
        for &r in &sigma {
            if r >= d || seen[r] {
                return Err(AlgebraError::NotAPermutation("sigma is not a bijection".into()));
            }
            seen[r] = true;
        }
        let tol = T::of(PHASE_TOL);
        let mut unit_phases = Vec::with_capacity(d);
        for (j, z) in phases.iter().enumerate() {
            let m = z.norm();
            if (m - T::one()).abs() > tol {
                return Err(AlgebraError::NotAPermutation(format!(
                    "phase {} has modulus {}",
                    j,
                    m.as_f64()
                )));
            }
            unit_phases.push(*z / m);
        }
        Ok(ComplexPermutation { sigma, phases: unit_phases })
    }

    pub fn identity(d: usize) -> Self {
        ComplexPermutation {
            sigma: (0..d).collect(),
            phases: vec![Complex::new(T::one(), T::zero()); d],
        }
    }

    pub fn size(&self) -> usize {
        self.sigma.len()
    }

    /// Row index of the nonzero entry in column `j`.
    pub fn sigma(&self, j: usize) -> usize {
        self.sigma[j]
    }

    pub fn phase(&self, j: usize) -> Complex<T> {
        self.phases[j]
    }

    pub fn is_identity(&self) -> bool {
        self.sigma.iter().enumerate().all(|(j, &r)| j == r)
            && self.phases.iter().all(|z| {
                z.re == T::one() && z.im == T::zero()
            })
    }

    pub fn as_matrix(&self) -> Matrix<T> {
        let d = self.size();
        let mut m = Matrix::zeros(d, d);
        for j in 0..d {
            m[(self.sigma[j], j)] = self.phases[j];
        }
        m
    }

    /// `s^{-1} = sum_j conj(lambda_j) e_{j, sigma(j)}`.
    pub fn inverse(&self) -> Self {
        let d = self.size();
        let mut sigma = vec![0; d];
        let mut phases = vec![Complex::new(T::one(), T::zero()); d];
        for j in 0..d {
            sigma[self.sigma[j]] = j;
            phases[self.sigma[j]] = self.phases[j].conj();
        }
        ComplexPermutation { sigma, phases }
    }

    /// Matrix product `self * other` as a complex permutation.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.size(), other.size(), "sizes must match");
        let d = self.size();
        let mut sigma = vec![0; d];
        let mut phases = vec![Complex::new(T::one(), T::zero()); d];
        for j in 0..d {
            sigma[j] = self.sigma[other.sigma[j]];
            phases[j] = other.phases[j] * self.phases[other.sigma[j]];
        }
        ComplexPermutation { sigma, phases }
    }

    /// `s x` for a coordinate vector `x`.
    pub fn apply(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(x.len(), self.size());
        let mut out = vec![Complex::new(T::zero(), T::zero()); x.len()];
        for j in 0..x.len() {
            out[self.sigma[j]] = self.phases[j] * x[j];
        }
        out
    }

    /// Structural conjugation `s m s^{-1}`: the entry at
    /// `(sigma(i), sigma(j))` is `lambda_i conj(lambda_j) m_{i,j}`, with the
    /// diagonal phase factor `lambda_i conj(lambda_i)` taken as exactly 1, so
    /// diagonal 0/1 idempotents map to diagonal 0/1 idempotents exactly.
    pub fn conjugate(&self, m: &Matrix<T>) -> Matrix<T> {
        let d = self.size();
        assert!(m.is_square() && m.rows() == d, "conjugation needs a matching square matrix");
        let mut out = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let factor = if i == j {
                    Complex::new(T::one(), T::zero())
                } else {
                    self.phases[i] * self.phases[j].conj()
                };
                out[(self.sigma[i], self.sigma[j])] = factor * m[(i, j)];
            }
        }
        out
    }

    /// Direct sum with `other` (block diagonal placement).
    pub fn dsum(&self, other: &Self) -> Self {
        let d = self.size();
        let mut sigma = self.sigma.clone();
        sigma.extend(other.sigma.iter().map(|&r| r + d));
        let mut phases = self.phases.clone();
        phases.extend_from_slice(&other.phases);
        ComplexPermutation { sigma, phases }
    }

    /// Uniformly random complex permutation (Fisher-Yates plus random phases).
    pub fn random(d: usize, rng: &mut impl Rng) -> Self {
        let mut sigma: Vec<usize> = (0..d).collect();
        for i in (1..d).rev() {
            let j = rng.gen_range(0..=i);
            sigma.swap(i, j);
        }
        let phases = (0..d)
            .map(|_| {
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                Complex::new(T::of(theta.cos()), T::of(theta.sin()))
            })
            .collect();
        ComplexPermutation { sigma, phases }
    }
}

/// Reads a complex permutation off a matrix: exactly one entry per row and
/// column may have modulus above `tol`, and that entry must be unimodular
/// within `tol`.
pub fn as_complex_permutation<T: Real>(
    s: &Matrix<T>,
    tol: T,
) -> Result<ComplexPermutation<T>, AlgebraError> {
    if !s.is_square() {
        return Err(AlgebraError::NotAPermutation(format!(
            "matrix is {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let d = s.rows();
    let mut sigma = vec![usize::MAX; d];
    let mut phases = vec![Complex::new(T::zero(), T::zero()); d];
    let mut row_used = vec![false; d];
    for j in 0..d {
        let mut found: Option<usize> = None;
        for i in 0..d {
            if s[(i, j)].norm() > tol {
                if found.is_some() {
                    return Err(AlgebraError::NotAPermutation(format!(
                        "column {} has multiple entries above tol",
                        j
                    )));
                }
                found = Some(i);
            }
        }
        let i = found.ok_or_else(|| {
            AlgebraError::NotAPermutation(format!("column {} has no entry above tol", j))
        })?;
        let z = s[(i, j)];
        if (z.norm() - T::one()).abs() > tol {
            return Err(AlgebraError::NotAPermutation(format!(
                "entry ({}, {}) has modulus {}",
                i,
                j,
                z.norm().as_f64()
            )));
        }
        if row_used[i] {
            return Err(AlgebraError::NotAPermutation(format!("row {} used twice", i)));
        }
        row_used[i] = true;
        sigma[j] = i;
        phases[j] = z / z.norm();
    }
    ComplexPermutation::new(sigma, phases)
}

/// Summandwise isometry of an [`SsfdAlgebra`]: one complex permutation per
/// summand, acting on elements by blockwise conjugation.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraIsometry<T: Real> {
    algebra: SsfdAlgebra<T>,
    perms: Vec<ComplexPermutation<T>>,
}

impl<T: Real> AlgebraIsometry<T> {
    pub fn new(
        algebra: SsfdAlgebra<T>,
        perms: Vec<ComplexPermutation<T>>,
    ) -> Result<Self, AlgebraError> {
        if perms.len() != algebra.summands().len() {
            return Err(AlgebraError::ShapeMismatch(format!(
                "expected {} permutations, got {}",
                algebra.summands().len(),
                perms.len()
            )));
        }
        for (k, s) in perms.iter().enumerate() {
            if s.size() != algebra.summands()[k] {
                return Err(AlgebraError::ShapeMismatch(format!(
                    "permutation {} has size {}, summand has size {}",
                    k,
                    s.size(),
                    algebra.summands()[k]
                )));
            }
        }
        Ok(AlgebraIsometry { algebra, perms })
    }

    pub fn identity(algebra: &SsfdAlgebra<T>) -> Self {
        let perms = algebra.summands().iter().map(|&d| ComplexPermutation::identity(d)).collect();
        AlgebraIsometry { algebra: algebra.clone(), perms }
    }

    pub fn algebra(&self) -> &SsfdAlgebra<T> {
        &self.algebra
    }

    pub fn perms(&self) -> &[ComplexPermutation<T>] {
        &self.perms
    }

    pub fn perm(&self, k: usize) -> &ComplexPermutation<T> {
        &self.perms[k]
    }

    pub fn is_identity(&self) -> bool {
        self.perms.iter().all(|s| s.is_identity())
    }

    /// Blockwise conjugation `a -> s a s^{-1}`.
    pub fn conjugate_element(&self, a: &AlgebraElement<T>) -> AlgebraElement<T> {
        assert_eq!(&self.algebra, a.algebra(), "isometry of a different algebra");
        let blocks = self.perms.iter().zip(a.blocks()).map(|(s, b)| s.conjugate(b)).collect();
        AlgebraElement { algebra: self.algebra.clone(), blocks }
    }

    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.algebra, other.algebra, "isometries of different algebras");
        let perms =
            self.perms.iter().zip(&other.perms).map(|(a, b)| a.compose(b)).collect();
        AlgebraIsometry { algebra: self.algebra.clone(), perms }
    }

    pub fn inverse(&self) -> Self {
        AlgebraIsometry {
            algebra: self.algebra.clone(),
            perms: self.perms.iter().map(ComplexPermutation::inverse).collect(),
        }
    }

    pub fn random(algebra: &SsfdAlgebra<T>, rng: &mut impl Rng) -> Self {
        let perms =
            algebra.summands().iter().map(|&d| ComplexPermutation::random(d, rng)).collect();
        AlgebraIsometry { algebra: algebra.clone(), perms }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pnorm::vector_p_norm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type M = Matrix<f64>;

    fn p(v: f64) -> PExponent<f64> {
        PExponent::new(v).unwrap()
    }

    fn halves() -> M {
        M::from_real_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]])
    }

    #[test]
    fn zero_algebra_element_norm() {
        let a = SsfdAlgebra::new(p(1.5), vec![]).unwrap();
        let e = element_norm(&a.zero_element(), &NormOptions::default());
        assert_eq!(e.value, 0.0);
        assert!(e.converged);
    }

    #[test]
    fn algebra_rejects_zero_summand() {
        assert_eq!(
            SsfdAlgebra::new(p(1.5), vec![2, 0, 1]).unwrap_err(),
            AlgebraError::ZeroSummand(1)
        );
    }

    #[test]
    fn diagonal_01_is_hermitian_idempotent() {
        let e = M::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert!(is_hermitian_idempotent(&e, 1e-12));
        assert!(!is_hermitian_idempotent(&halves(), 1e-6));
        let half = M::from_real_rows(&[vec![0.5, 0.0], vec![0.0, 1.0]]);
        assert!(!is_hermitian_idempotent(&half, 1e-6));
    }

    #[test]
    fn halves_idempotent_has_norm_one_but_positive_defect() {
        let e = halves();
        assert!(e.mul(&e).distance(&e) < 1e-15);
        for pv in [1.0, 1.5, 4.0] {
            let opts = NormOptions::default();
            let ne = pnorm::operator_p_norm(&e, p(pv), &opts).unwrap();
            let nc = pnorm::operator_p_norm(&M::identity(2).sub(&e), p(pv), &opts).unwrap();
            assert!((ne.value - 1.0).abs() < 1e-6, "p={pv}: {}", ne.value);
            assert!((nc.value - 1.0).abs() < 1e-6, "p={pv}: {}", nc.value);
        }
        let defect = hermitian_defect(&e, p(1.5), 64).unwrap();
        let bound = 2f64.powf(1.0 / 1.5 - 0.5) - 1.0;
        assert!(defect >= bound - 1e-9, "defect {defect} vs bound {bound}");
        for d in 1..=3usize {
            for mask in 0..(1u32 << d) {
                let e = M::from_fn(d, d, |i, j| {
                    if i == j && mask & (1 << i) != 0 {
                        Complex::new(1.0, 0.0)
                    } else {
                        Complex::new(0.0, 0.0)
                    }
                });
                let defect = hermitian_defect(&e, p(1.5), 16).unwrap();
                assert!(defect <= 1e-9, "mask {mask}: {defect}");
            }
        }
    }

    #[test]
    fn hermitian_defect_rejects_non_idempotent() {
        let a = M::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert!(matches!(
            hermitian_defect(&a, p(1.5), 16),
            Err(AlgebraError::NotIdempotent { .. })
        ));
    }

    #[test]
    fn beta_map_witness_vector() {
        // beta_e(1, i) applied to (1, 0) has p-norm 2^{1/p - 1/2}; the same
        // matrix is i exp(-i pi/2 e).
        let e = halves();
        let b = beta_map(&e, Complex::new(1.0, 0.0), Complex::new(0.0, 1.0)).unwrap();
        let x = [Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)];
        for pv in [1.0, 1.5] {
            let got = vector_p_norm(&b.apply(&x), p(pv));
            assert!((got - 2f64.powf(1.0 / pv - 0.5)).abs() < 1e-12);
        }
        let lam = Complex::from_polar(1.0, -std::f64::consts::FRAC_PI_2);
        let expm = M::identity(2).add(&e.scale(lam - Complex::new(1.0, 0.0)));
        assert!(b.distance(&expm.scale(Complex::new(0.0, 1.0))) < 1e-15);
        assert!(beta_map(&M::from_real_rows(&[vec![2.0]]), Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn permutation_decode_round_trip() {
        // [[0, i], [1, 0]]: sigma swaps, phases (1, i).
        let s = M::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => Complex::new(0.0, 1.0),
            (1, 0) => Complex::new(1.0, 0.0),
            _ => Complex::new(0.0, 0.0),
        });
        let cp = as_complex_permutation(&s, 1e-12).unwrap();
        assert_eq!(cp.sigma(0), 1);
        assert_eq!(cp.sigma(1), 0);
        assert_eq!(cp.phase(1), Complex::new(0.0, 1.0));
        assert_eq!(cp.as_matrix(), s);

        let bad = M::from_real_rows(&[vec![0.5, 0.0], vec![0.0, 1.0]]);
        assert!(as_complex_permutation(&bad, 1e-12).is_err());
        let two = M::from_real_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]);
        assert!(as_complex_permutation(&two, 1e-12).is_err());
    }

    #[test]
    fn permutation_algebraics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let d = rng.gen_range(1..=6);
            let s = ComplexPermutation::<f64>::random(d, &mut rng);
            let t = ComplexPermutation::<f64>::random(d, &mut rng);
            let id = s.compose(&s.inverse()).as_matrix();
            assert!(id.distance(&M::identity(d)) < 1e-14);
            let st = s.compose(&t).as_matrix();
            assert!(st.distance(&s.as_matrix().mul(&t.as_matrix())) < 1e-14);
            let m = M::from_fn(d, d, |i, j| Complex::new((i + j) as f64, i as f64));
            let conj = s.conjugate(&m);
            let direct = s.as_matrix().mul(&m).mul(&s.inverse().as_matrix());
            assert!(conj.distance(&direct) < 1e-13);
        }
    }

    #[test]
    fn permutations_are_isometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let d = rng.gen_range(1..=6);
            let s = ComplexPermutation::<f64>::random(d, &mut rng);
            let x: Vec<Complex<f64>> = (0..d)
                .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            for pv in [1.0, 1.5, 3.0] {
                let before = vector_p_norm(&x, p(pv));
                let after = vector_p_norm(&s.apply(&x), p(pv));
                assert!((before - after).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn conjugation_preserves_diag01_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let alg = SsfdAlgebra::new(p(1.5), vec![3, 2]).unwrap();
        let e = alg.diag01(&[vec![true, false, true], vec![false, true]]);
        for _ in 0..20 {
            let u = AlgebraIsometry::random(&alg, &mut rng);
            let img = u.conjugate_element(&e);
            assert!(img.is_hermitian_idempotent(0.0), "must be exactly diagonal 0/1");
            assert_eq!(img.idempotent_defect(), 0.0);
        }
    }
}
