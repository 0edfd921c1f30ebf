//! Induced `p -> p` operator norms on `l^p_d`.
//!
//! `operator_p_norm` runs a multi-start duality-map power iteration
//! `x <- normalize(J_q(a^H J_p(a x)))`, where `J_r(z) = |z|^{r-1} phase(z)`
//! entrywise and `q` is the conjugate exponent. The objective
//! `||a x||_p / ||x||_p` is nondecreasing along the iteration, so every
//! returned value is a certified lower bound attained by a concrete witness
//! vector. For `p = 1` the exact maximum column sum is returned; for `p = 2`
//! the iteration is the linear power method on `a^H a` and converges to the
//! largest singular value; for entrywise-nonnegative matrices the uniform
//! start is globally convergent.
//!
//! `oracle_p_norm_2x2` is an independent brute-force check on the 2x2 unit
//! sphere, used to certify the iteration in tests.

use num_complex::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::SsfdAlgebra;
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Holder exponent `p` in `[1, infinity)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PExponent<T: Real> {
    p: T,
}

#[derive(Debug, Error, PartialEq)]
pub enum PnormError {
    #[error("exponent must be a finite real >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("{0}")]
    ShapeMismatch(String),
}

impl<T: Real> PExponent<T> {
    pub fn new(p: T) -> Result<Self, PnormError> {
        if !p.is_finite() || p < T::one() {
            return Err(PnormError::InvalidExponent(p.as_f64()));
        }
        Ok(PExponent { p })
    }

    pub fn value(&self) -> T {
        self.p
    }

    /// Conjugate exponent `q = p/(p-1)`; `None` for `p = 1`.
    pub fn conjugate(&self) -> Option<Self> {
        if self.p == T::one() {
            None
        } else {
            Some(PExponent { p: self.p / (self.p - T::one()) })
        }
    }

    /// Whether the exponent is admissible for the classification engine,
    /// i.e. `p != 2` (at `p = 2` isometries need not be complex permutations).
    pub fn classification_legal(&self) -> bool {
        self.p != T::of(2.0)
    }
}

/// Options for the multi-start norm iteration.
#[derive(Clone, Copy, Debug)]
pub struct NormOptions {
    /// Total number of starts: uniform, then standard basis vectors, then
    /// seeded random vectors.
    pub starts: usize,
    /// Iteration cap per start.
    pub max_iter: usize,
    /// Stop once successive objective values differ by less than this.
    pub tol: f64,
    /// Seed for the random starts.
    pub seed: u64,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions { starts: 16, max_iter: 500, tol: 1e-8, seed: 0 }
    }
}

/// Certified lower bound for an operator norm, with the witness that attains
/// it: `value` equals `||a w||_p / ||w||_p` for the stored witness `w`.
#[derive(Clone, Debug, Serialize)]
#[serde(bound = "T: Serialize")]
pub struct NormEstimate<T: Real> {
    pub value: T,
    /// Whether the start that produced `value` met the tolerance within the
    /// iteration cap.
    pub converged: bool,
    /// Total iterations across all starts.
    pub iterations: usize,
    /// Number of starts attempted.
    pub starts: usize,
    #[serde(skip)]
    pub witness: Vec<Complex<T>>,
}

/// `(sum_i |x_i|^p)^{1/p}`, scaled to avoid overflow. Empty input is rejected.
pub fn vector_p_norm<T: Real>(x: &[Complex<T>], p: PExponent<T>) -> T {
    assert!(!x.is_empty(), "vector_p_norm needs a nonempty vector");
    let m = x.iter().map(|z| z.norm()).fold(T::zero(), T::max);
    if m == T::zero() {
        return T::zero();
    }
    let pw = p.value();
    let s = x.iter().map(|z| (z.norm() / m).powf(pw)).fold(T::zero(), |a, b| a + b);
    m * s.powf(T::one() / pw)
}

/// Entrywise duality map `J_r(z) = |z|^{r-1} phase(z)`, with `J_r(0) = 0`.
fn duality_map<T: Real>(v: &[Complex<T>], r: T) -> Vec<Complex<T>> {
    v.iter()
        .map(|z| {
            let m = z.norm();
            if m == T::zero() {
                Complex::new(T::zero(), T::zero())
            } else {
                (*z / m) * m.powf(r - T::one())
            }
        })
        .collect()
}

fn normalize_p<T: Real>(x: &mut [Complex<T>], p: PExponent<T>) -> bool {
    let n = vector_p_norm(x, p);
    if n == T::zero() {
        return false;
    }
    for z in x.iter_mut() {
        *z = *z / n;
    }
    true
}

/// One duality-map ascent run from `x0`. Returns (ratio, witness, converged,
/// iterations); the ratio is `||a x||_p` for the returned unit witness `x`.
fn ascend<T: Real>(
    a: &Matrix<T>,
    p: PExponent<T>,
    q: PExponent<T>,
    mut x: Vec<Complex<T>>,
    opts: &NormOptions,
) -> (T, Vec<Complex<T>>, bool, usize) {
    let tol = T::of(opts.tol);
    if !normalize_p(&mut x, p) {
        return (T::zero(), x, true, 0);
    }
    let mut y = a.apply(&x);
    let mut ratio = vector_p_norm(&y, p);
    let mut converged = false;
    let mut iters = 0;
    for _ in 0..opts.max_iter {
        iters += 1;
        if ratio == T::zero() {
            // Start lies in the kernel; the ascent cannot leave it.
            converged = true;
            break;
        }
        let u = duality_map(&y, p.value());
        let mut w = a.adjoint().apply(&u);
        let wmax = w.iter().map(|z| z.norm()).fold(T::zero(), T::max);
        if wmax == T::zero() {
            converged = true;
            break;
        }
        for z in w.iter_mut() {
            *z = *z / wmax;
        }
        let mut xn = duality_map(&w, q.value());
        if !normalize_p(&mut xn, p) {
            converged = true;
            break;
        }
        let yn = a.apply(&xn);
        let rn = vector_p_norm(&yn, p);
        x = xn;
        y = yn;
        let done = (rn - ratio).abs() < tol;
        ratio = rn;
        if done {
            converged = true;
            break;
        }
    }
    (ratio, x, converged, iters)
}

/// Exact `p = 1` norm: maximum column absolute sum, witnessed by the first
/// maximizing basis vector.
fn column_sum_norm<T: Real>(a: &Matrix<T>) -> NormEstimate<T> {
    let d = a.rows();
    let mut best = T::zero();
    let mut best_j = 0;
    for j in 0..d {
        let s = (0..d).fold(T::zero(), |acc, i| acc + a[(i, j)].norm());
        if s > best {
            best = s;
            best_j = j;
        }
    }
    let mut witness = vec![Complex::new(T::zero(), T::zero()); d];
    witness[best_j] = Complex::new(T::one(), T::zero());
    NormEstimate { value: best, converged: true, iterations: 0, starts: 0, witness }
}

/// Induced `p -> p` operator norm of a square matrix, as a certified lower
/// bound with witness. Deterministic for fixed options: starts run in order
/// (uniform, basis vectors, seeded random) and a later start replaces the
/// incumbent only on strict improvement.
pub fn operator_p_norm<T: Real>(
    a: &Matrix<T>,
    p: PExponent<T>,
    opts: &NormOptions,
) -> Result<NormEstimate<T>, PnormError> {
    if !a.is_square() {
        return Err(PnormError::NonSquare { rows: a.rows(), cols: a.cols() });
    }
    let d = a.rows();
    if a.is_zero() {
        let mut witness = vec![Complex::new(T::zero(), T::zero()); d];
        witness[0] = Complex::new(T::one(), T::zero());
        return Ok(NormEstimate { value: T::zero(), converged: true, iterations: 0, starts: 0, witness });
    }
    if p.value() == T::one() {
        return Ok(column_sum_norm(a));
    }
    let q = p.conjugate().expect("p > 1 has a conjugate");
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts = opts.starts.max(1);
    let mut best: Option<(T, Vec<Complex<T>>, bool)> = None;
    let mut iterations = 0;
    for s in 0..starts {
        let x0: Vec<Complex<T>> = if s == 0 {
            vec![Complex::new(T::one(), T::zero()); d]
        } else if s <= d {
            let mut e = vec![Complex::new(T::zero(), T::zero()); d];
            e[s - 1] = Complex::new(T::one(), T::zero());
            e
        } else {
            let mut v: Vec<Complex<T>> = (0..d)
                .map(|_| {
                    Complex::new(
                        T::of(rng.gen_range(-1.0..=1.0)),
                        T::of(rng.gen_range(-1.0..=1.0)),
                    )
                })
                .collect();
            if v.iter().all(|z| z.norm() == T::zero()) {
                v[0] = Complex::new(T::one(), T::zero());
            }
            v
        };
        let (ratio, x, conv, it) = ascend(a, p, q, x0, opts);
        iterations += it;
        let better = match &best {
            None => true,
            Some((b, _, _)) => ratio > *b,
        };
        if better {
            best = Some((ratio, x, conv));
        }
    }
    let (value, witness, converged) = best.expect("at least one start");
    Ok(NormEstimate { value, converged, iterations, starts, witness })
}

/// Brute-force `p -> p` norm of a 2x2 matrix by scanning the unit sphere
/// `x = (r, e^{i theta} (1 - r^p)^{1/p})`, `r in [0,1]`, `theta in [0, 2 pi)`,
/// on a `grid x grid` mesh followed by local refinement. Independent of the
/// power iteration; used as its oracle.
pub fn oracle_p_norm_2x2<T: Real>(a: &Matrix<T>, p: PExponent<T>, grid: usize) -> T {
    assert!(a.rows() == 2 && a.cols() == 2, "oracle is for 2x2 matrices");
    assert!(grid >= 4, "grid too coarse");
    let pw = p.value();
    let tau = T::of(std::f64::consts::TAU);
    let eval = |r: T, theta: T| -> T {
        let r = r.max(T::zero()).min(T::one());
        let second = (T::one() - r.powf(pw)).max(T::zero()).powf(T::one() / pw);
        let x = [
            Complex::new(r, T::zero()),
            Complex::new(second * theta.cos(), second * theta.sin()),
        ];
        vector_p_norm(&a.apply(&x), p)
    };
    let mut coarse: Vec<(T, T, T)> = Vec::with_capacity(grid * (grid + 80));
    for i in 0..grid {
        let r = T::of(i as f64 / (grid - 1) as f64);
        for j in 0..grid {
            let theta = tau * T::of(j as f64 / grid as f64);
            coarse.push((eval(r, theta), r, theta));
        }
    }
    // At r = 0 and r = 1 the objective is theta-independent, so maximizers
    // just inside a pole live in basins the uniform grid cannot see. Scan
    // log-spaced rings toward both poles over the full theta grid.
    for m in 1..=40 {
        let s = T::of(2f64.powi(-m));
        let r_hi = (T::one() - s.powf(pw)).max(T::zero()).powf(T::one() / pw);
        for j in 0..grid {
            let theta = tau * T::of(j as f64 / grid as f64);
            coarse.push((eval(r_hi, theta), r_hi, theta));
            coarse.push((eval(s, theta), s, theta));
        }
    }
    coarse.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("norm values are finite"));
    // Refine several well-separated top candidates: the global maximizer's
    // cell need not hold the best coarse value.
    let r_cell = T::of(1.0 / (grid - 1) as f64);
    let t_cell = tau / T::of(grid as f64);
    let mut seeds: Vec<(T, T, T)> = Vec::new();
    for &(v, r, theta) in &coarse {
        let close = |s: &(T, T, T)| {
            let dt = (s.2 - theta).abs();
            let dt = dt.min(tau - dt);
            (s.1 - r).abs() <= r_cell + r_cell && dt <= t_cell + t_cell
        };
        if !seeds.iter().any(close) {
            seeds.push((v, r, theta));
            if seeds.len() == 12 {
                break;
            }
        }
    }
    let mut best = seeds[0].0;
    for seed in seeds {
        let mut local = seed;
        let mut dr = r_cell;
        let mut dt = t_cell;
        for _ in 0..70 {
            let (_, r0, t0) = local;
            for i in -2i32..=2 {
                for j in -2i32..=2 {
                    let r = (r0 + dr * T::of(i as f64 / 2.0)).max(T::zero()).min(T::one());
                    let theta = t0 + dt * T::of(j as f64 / 2.0);
                    let v = eval(r, theta);
                    if v > local.0 {
                        local = (v, r, theta);
                    }
                }
            }
            dr = dr * T::of(0.5);
            dt = dt * T::of(0.5);
        }
        best = best.max(local.0);
    }
    best
}

/// Combines per-block estimates into a max-over-blocks estimate. The witness
/// is the one of the first block attaining the max; `converged` requires every
/// block to have converged.
pub(crate) fn max_estimate<T: Real>(parts: Vec<NormEstimate<T>>) -> NormEstimate<T> {
    let mut out = NormEstimate {
        value: T::zero(),
        converged: true,
        iterations: 0,
        starts: 0,
        witness: Vec::new(),
    };
    for part in parts {
        out.iterations += part.iterations;
        out.starts = out.starts.max(part.starts);
        out.converged = out.converged && part.converged;
        if part.value > out.value || out.witness.is_empty() {
            out.value = part.value;
            out.witness = part.witness;
        }
    }
    out
}

/// Norm of a matrix level `M_n(A)` element given as one square block of size
/// `n * d_k` per summand of `A`: the max over summands of the block norms.
pub fn matrix_level_norm<T: Real>(
    blocks: &[Matrix<T>],
    n: usize,
    algebra: &SsfdAlgebra<T>,
    opts: &NormOptions,
) -> Result<NormEstimate<T>, PnormError> {
    if blocks.len() != algebra.summands().len() {
        return Err(PnormError::ShapeMismatch(format!(
            "expected {} blocks, got {}",
            algebra.summands().len(),
            blocks.len()
        )));
    }
    let mut parts = Vec::with_capacity(blocks.len());
    for (k, block) in blocks.iter().enumerate() {
        let want = n * algebra.summands()[k];
        if block.rows() != want || block.cols() != want {
            return Err(PnormError::ShapeMismatch(format!(
                "block {} must be {}x{}, got {}x{}",
                k,
                want,
                want,
                block.rows(),
                block.cols()
            )));
        }
        parts.push(operator_p_norm(block, algebra.p(), opts)?);
    }
    Ok(max_estimate(parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = Matrix<f64>;

    fn p(v: f64) -> PExponent<f64> {
        PExponent::new(v).unwrap()
    }

    fn est(a: &M, pv: f64) -> NormEstimate<f64> {
        operator_p_norm(a, p(pv), &NormOptions::default()).unwrap()
    }

    #[test]
    fn exponent_validation() {
        assert!(PExponent::new(0.5).is_err());
        assert!(PExponent::new(f64::NAN).is_err());
        assert!(PExponent::new(f64::INFINITY).is_err());
        assert!(PExponent::new(1.0).is_ok());
        assert_eq!(p(1.0).conjugate(), None);
        assert!((p(1.5).conjugate().unwrap().value() - 3.0).abs() < 1e-15);
        assert!(!p(2.0).classification_legal());
        assert!(p(1.5).classification_legal());
    }

    #[test]
    fn vector_norm_examples() {
        let x = [Complex::new(1.0, 0.0), Complex::new(0.0, 1.0)];
        for pv in [1.0, 1.5, 2.0, 4.0] {
            assert!((vector_p_norm(&x, p(pv)) - 2f64.powf(1.0 / pv)).abs() < 1e-12);
        }
        // ((1+i)/2, (1-i)/2) has p-norm 2^{1/p - 1/2}.
        let y = [Complex::new(0.5, 0.5), Complex::new(0.5, -0.5)];
        for pv in [1.0, 1.5, 3.0] {
            assert!((vector_p_norm(&y, p(pv)) - 2f64.powf(1.0 / pv - 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_matrix_norm_is_zero_and_converged() {
        let e = est(&M::zeros(3, 3), 1.5);
        assert_eq!(e.value, 0.0);
        assert!(e.converged);
    }

    #[test]
    fn row_matrix_norm_matches_closed_form() {
        // ||[[1,1],[0,0]]||_p = 2^{1 - 1/p}.
        let a = M::from_real_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]);
        for pv in [1.0, 1.5, 3.0, 4.0] {
            let e = est(&a, pv);
            let expect = 2f64.powf(1.0 - 1.0 / pv);
            assert!(e.converged, "p={pv}");
            assert!((e.value - expect).abs() < 1e-8, "p={pv}: {} vs {}", e.value, expect);
            let oracle = oracle_p_norm_2x2(&a, p(pv), 64);
            assert!((oracle - expect).abs() < 1e-6, "oracle p={pv}: {oracle}");
        }
    }

    #[test]
    fn p1_is_exact_max_column_sum() {
        let a = M::from_fn(3, 3, |i, j| Complex::new(0.0, -((i + 2 * j) as f64)));
        let e = est(&a, 1.0);
        let cols: Vec<f64> =
            (0..3).map(|j| (0..3).map(|i| a[(i, j)].norm()).sum()).collect();
        let max = cols.iter().cloned().fold(0.0, f64::max);
        assert_eq!(e.value, max);
        assert!(e.converged);
        let ratio = vector_p_norm(&a.apply(&e.witness), p(1.0));
        assert_eq!(ratio, e.value);
    }

    #[test]
    fn p2_matches_analytic_singular_value() {
        // For a 2x2 matrix, ||a||_2^2 is the largest eigenvalue of a^H a:
        // (t + sqrt(t^2 - 4 det)) / 2 with t = tr(a^H a), det = |det a|^2.
        let a = M::from_fn(2, 2, |i, j| Complex::new((1 + i + 3 * j) as f64, (i * j) as f64 - 0.5));
        let g = a.adjoint().mul(&a);
        let t = g.trace().re;
        let det = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]).re;
        let sigma = ((t + (t * t - 4.0 * det).sqrt()) / 2.0).sqrt();
        let e = est(&a, 2.0);
        assert!(e.converged);
        assert!((e.value - sigma).abs() < 1e-8, "{} vs {sigma}", e.value);
    }

    #[test]
    fn witness_ratio_equals_value() {
        let a = M::from_fn(3, 3, |i, j| Complex::new((i as f64 - j as f64).sin(), 0.3 * i as f64));
        for pv in [1.5, 2.0, 3.0] {
            let e = est(&a, pv);
            let ratio = vector_p_norm(&a.apply(&e.witness), p(pv)) / vector_p_norm(&e.witness, p(pv));
            assert!((ratio - e.value).abs() < 1e-13);
        }
    }

    #[test]
    fn nonnegative_matrix_single_uniform_start_suffices() {
        let a = M::from_real_rows(&[vec![1.0, 2.0, 0.0], vec![0.5, 0.0, 3.0], vec![1.0, 1.0, 1.0]]);
        let single = operator_p_norm(&a, p(1.7), &NormOptions { starts: 1, ..Default::default() })
            .unwrap();
        let multi = est(&a, 1.7);
        assert!(single.converged);
        assert!((single.value - multi.value).abs() < 1e-8);
    }

    #[test]
    fn iteration_agrees_with_oracle_on_random_2x2() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..20 {
            let a = M::from_fn(2, 2, |_, _| {
                Complex::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
            });
            for pv in [1.0, 1.3, 1.5, 2.0, 2.7, 4.0] {
                let e = est(&a, pv);
                let oracle = oracle_p_norm_2x2(&a, p(pv), 64);
                assert!(
                    (e.value - oracle).abs() < 1e-4,
                    "case {case} p={pv}: est {} oracle {oracle}",
                    e.value
                );
            }
        }
    }

    #[test]
    fn transpose_duality_via_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let a = M::from_fn(2, 2, |_, _| {
                Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            for pv in [1.5, 3.0] {
                let q = p(pv).conjugate().unwrap();
                let lhs = oracle_p_norm_2x2(&a, p(pv), 64);
                let rhs = oracle_p_norm_2x2(&a.transpose(), q, 64);
                assert!((lhs - rhs).abs() < 1e-4, "p={pv}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn rectangular_matrix_rejected() {
        let a = M::zeros(2, 3);
        assert!(matches!(
            operator_p_norm(&a, p(1.5), &NormOptions::default()),
            Err(PnormError::NonSquare { .. })
        ));
    }

    #[test]
    fn f32_instantiation_works() {
        let a = Matrix::<f32>::from_real_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]);
        let e = operator_p_norm(&a, PExponent::new(1.5f32).unwrap(), &NormOptions::default())
            .unwrap();
        assert!((e.value - 2f32.powf(1.0 - 1.0 / 1.5)).abs() < 1e-5);
    }
}
