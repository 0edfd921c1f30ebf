//! Invariant checks: randomized (seeded) and property-based tests for the
//! identities the library is built on. These complement the acceptance gate
//! with broader, structure-level coverage.

use num_complex::Complex;
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lpaf::algebra::{hermitian_defect, random_element, ComplexPermutation};
use lpaf::bratteli::{
    group_system_of, injectivize, telescope, telescope_group, AlgebraDirectSystem,
    GroupDirectSystem,
};
use lpaf::classify::realize_system;
use lpaf::homs::{
    block_hom_from_multiplicity, compose_homs, multiplicity_of, MultiplicityMatrix, SpatialHom,
};
use lpaf::ktheory::{k0_of_hom, riesz_report, PositiveContractiveMap, ScaledZGroup};
use lpaf::matrix::Matrix;
use lpaf::pnorm::{operator_p_norm, vector_p_norm, NormOptions, PExponent};
use lpaf::Algebra;

fn p(v: f64) -> PExponent<f64> {
    PExponent::new(v).unwrap()
}

fn opts() -> NormOptions {
    NormOptions::default()
}

fn random_matrix(d: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    Matrix::from_fn(d, d, |_, _| {
        Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

/// `max_j |a e_j|_p <= |a|_p <= |a|_(1->1)^(1/p) |a|_(inf->inf)^(1-1/p)`:
/// the estimate is squeezed between the column lower bound and the
/// interpolation upper bound.
#[test]
fn sandwich_inequality_bounds_the_estimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..50 {
        let d = rng.gen_range(1..=5);
        let a = random_matrix(d, &mut rng);
        let one_norm = (0..d)
            .map(|j| (0..d).map(|i| a[(i, j)].norm()).sum::<f64>())
            .fold(0.0f64, f64::max);
        let inf_norm = (0..d)
            .map(|i| (0..d).map(|j| a[(i, j)].norm()).sum::<f64>())
            .fold(0.0f64, f64::max);
        for &pv in &[1.0, 1.3, 2.0, 3.0, 5.0] {
            let est = operator_p_norm(&a, p(pv), &opts()).unwrap();
            assert!(est.converged, "trial {trial}, p = {pv}: not converged");
            let lower = (0..d)
                .map(|j| {
                    let col: Vec<Complex<f64>> = (0..d).map(|i| a[(i, j)]).collect();
                    vector_p_norm(&col, p(pv))
                })
                .fold(0.0f64, f64::max);
            let upper = one_norm.powf(1.0 / pv) * inf_norm.powf(1.0 - 1.0 / pv);
            assert!(
                est.value >= lower - 1e-6,
                "trial {trial}, p = {pv}: estimate {} below column bound {lower}",
                est.value
            );
            assert!(
                est.value <= upper + 1e-6,
                "trial {trial}, p = {pv}: estimate {} above interpolation bound {upper}",
                est.value
            );
        }
    }
}

/// `|a|_(p->p) = |a^T|_(q->q)` for conjugate exponents.
#[test]
fn transpose_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for trial in 0..40 {
        let d = rng.gen_range(1..=5);
        let a = random_matrix(d, &mut rng);
        for &pv in &[1.25, 1.5, 2.0, 3.0, 4.0] {
            let q = p(pv).conjugate().unwrap();
            let n1 = operator_p_norm(&a, p(pv), &opts()).unwrap();
            let n2 = operator_p_norm(&a.transpose(), q, &opts()).unwrap();
            if !(n1.converged && n2.converged) {
                continue;
            }
            assert!(
                (n1.value - n2.value).abs() <= 1e-6 * (1.0 + n1.value),
                "trial {trial}, p = {pv}: {} vs transpose {}",
                n1.value,
                n2.value
            );
        }
    }
}

/// Conjugation by a complex permutation (an invertible isometry with
/// isometric inverse) leaves the operator norm unchanged.
#[test]
fn operator_norm_invariant_under_spatial_conjugation() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for trial in 0..40 {
        let d = rng.gen_range(1..=5);
        let a = random_matrix(d, &mut rng);
        let s = ComplexPermutation::<f64>::random(d, &mut rng);
        for &pv in &[1.0, 1.5, 3.0] {
            let n1 = operator_p_norm(&a, p(pv), &opts()).unwrap();
            let n2 = operator_p_norm(&s.conjugate(&a), p(pv), &opts()).unwrap();
            assert!(
                (n1.value - n2.value).abs() <= 1e-6 * (1.0 + n1.value),
                "trial {trial}, p = {pv}: {} vs conjugated {}",
                n1.value,
                n2.value
            );
        }
    }
}

/// Complex-permutation conjugates of diagonal 0/1 idempotents stay hermitian
/// for every legal exponent (spatial projections are hermitian).
#[test]
fn spatial_conjugates_of_diagonal_idempotents_are_hermitian() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..30 {
        let d = rng.gen_range(1..=4);
        let e = Matrix::from_fn(d, d, |i, j| {
            if i == j && rng.gen_bool(0.5) {
                Complex::new(1.0, 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        });
        let s = ComplexPermutation::<f64>::random(d, &mut rng);
        let conj = s.conjugate(&e);
        for &pv in &[1.5, 3.0] {
            let defect = hermitian_defect(&conj, p(pv), 32).unwrap();
            assert!(defect <= 1e-6, "d = {d}, p = {pv}: defect {defect}");
        }
    }
}

fn random_algebra(rng: &mut ChaCha8Rng) -> Algebra {
    let n = rng.gen_range(1..=3);
    Algebra::new(p(1.5), (0..n).map(|_| rng.gen_range(1..=4)).collect()).unwrap()
}

fn random_hom_out_of(a: &Algebra, rng: &mut ChaCha8Rng) -> SpatialHom<f64> {
    let n = rng.gen_range(1..=3);
    let mut rows = Vec::new();
    let mut sizes = Vec::new();
    for _ in 0..n {
        let row: Vec<i64> = (0..a.summands().len()).map(|_| rng.gen_range(0..=2)).collect();
        let need: usize = row.iter().zip(a.summands()).map(|(&m, &c)| m as usize * c).sum();
        sizes.push(need.max(1) + rng.gen_range(0..=2));
        rows.push(row);
    }
    let b = Algebra::new(p(1.5), sizes).unwrap();
    let m = MultiplicityMatrix::from_rows(&rows).unwrap();
    SpatialHom::from_block(block_hom_from_multiplicity(&m, a, &b).unwrap())
}

/// The K0 functor respects composition: `k0(psi . phi) = k0(psi) . k0(phi)`.
#[test]
fn k0_functoriality() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for _ in 0..60 {
        let a = random_algebra(&mut rng);
        let phi = random_hom_out_of(&a, &mut rng);
        let psi = random_hom_out_of(phi.target(), &mut rng);
        let lhs = k0_of_hom(&compose_homs(&psi, &phi).unwrap());
        let rhs = k0_of_hom(&psi).compose(&k0_of_hom(&phi)).unwrap();
        assert_eq!(lhs, rhs);
    }
}

fn random_group_system(rng: &mut ChaCha8Rng, levels: usize) -> GroupDirectSystem {
    let mut groups = vec![ScaledZGroup::new(
        (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(1..=8)).collect(),
    )
    .unwrap()];
    let mut maps = Vec::new();
    for _ in 1..levels {
        let src = groups.last().unwrap().clone();
        let rank = rng.gen_range(1..=3);
        let mut rows = Vec::new();
        let mut scale = Vec::new();
        for _ in 0..rank {
            let row: Vec<i64> = (0..src.rank()).map(|_| rng.gen_range(0..=2)).collect();
            let need: i64 = row.iter().zip(src.scale()).map(|(&m, &d)| m * d).sum();
            scale.push(rng.gen_range(need.max(1)..=need.max(1).max(8)));
            rows.push(row);
        }
        let tgt = ScaledZGroup::new(scale).unwrap();
        maps.push(
            PositiveContractiveMap::new(
                src,
                tgt.clone(),
                MultiplicityMatrix::from_rows(&rows).unwrap(),
            )
            .unwrap(),
        );
        groups.push(tgt);
    }
    GroupDirectSystem::new(groups, maps).unwrap()
}

/// Realization round trip holds at every legal exponent, not just 1.5.
#[test]
fn k0_round_trip_across_exponents() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    for _ in 0..20 {
        let g = random_group_system(&mut rng, 5);
        for &pv in &[1.2, 1.5, 3.0] {
            let sys = realize_system(&g, p(pv)).unwrap();
            assert_eq!(group_system_of(&sys), g);
        }
    }
}

/// The K0 shadow commutes with telescoping:
/// `group_system_of(telescope(S, I)) = telescope_group(group_system_of(S), I)`.
#[test]
fn telescoping_coherence() {
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    for _ in 0..30 {
        let g = random_group_system(&mut rng, 6);
        let sys = realize_system(&g, p(1.5)).unwrap();
        // Random strictly increasing index set of size >= 2 within the horizon.
        let mut indices: Vec<usize> = (0..=sys.horizon()).filter(|_| rng.gen_bool(0.6)).collect();
        if indices.len() < 2 {
            indices = vec![0, sys.horizon()];
        }
        let lhs = group_system_of(&telescope(&sys, &indices).unwrap());
        let rhs = telescope_group(&group_system_of(&sys), &indices).unwrap();
        assert_eq!(lhs, rhs);
    }
}

fn random_algebra_system(rng: &mut ChaCha8Rng) -> AlgebraDirectSystem<f64> {
    let levels = rng.gen_range(2..=5);
    let g = random_group_system(rng, levels);
    realize_system(&g, p(1.5)).unwrap()
}

/// Injectivization produces injective maps and is idempotent.
#[test]
fn injectivize_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(28);
    for _ in 0..40 {
        let sys = random_algebra_system(&mut rng);
        let inj = injectivize(&sys);
        for h in inj.maps() {
            let m = multiplicity_of(h);
            assert!((0..m.cols()).all(|j| !m.column_is_zero(j)));
        }
        assert_eq!(injectivize(&inj), inj);
        // Composite multiplicity into the final level is preserved on
        // surviving summands.
        if !sys.is_empty() && sys.horizon() > 0 {
            let orig = multiplicity_of(&sys.connecting(0, sys.horizon())).to_rows();
            let kept: Vec<Vec<i64>> = (0..orig.len())
                .map(|i| {
                    (0..orig[i].len()).filter(|&j| orig.iter().any(|r| r[j] != 0)).map(|j| orig[i][j]).collect()
                })
                .collect();
            let new = multiplicity_of(&inj.connecting(0, inj.horizon())).to_rows();
            assert_eq!(new, kept);
        }
    }
}

/// Scaled ordered K0 groups of finite-dimensional algebras satisfy the Riesz
/// decomposition and interpolation audits.
#[test]
fn riesz_properties_on_random_groups() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for trial in 0..50 {
        let g = ScaledZGroup::new(
            (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(1..=9)).collect(),
        )
        .unwrap();
        let report = riesz_report(&g, 25, trial);
        assert!(report.all_passed(), "trial {trial}: {report:?}");
    }
}

/// Random elements pass through `random_element` with the declared shape.
#[test]
fn random_elements_have_declared_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for _ in 0..20 {
        let a = random_algebra(&mut rng);
        let x = random_element(&a, &mut rng);
        for (k, &d) in a.summands().iter().enumerate() {
            assert_eq!(x.block(k).rows(), d);
            assert_eq!(x.block(k).cols(), d);
        }
    }
}

proptest! {
    /// Vector p-norms are absolutely homogeneous and satisfy the triangle
    /// inequality.
    #[test]
    fn vector_norm_axioms(
        xs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..7),
        ys in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..7),
        lam in (-2.0f64..2.0, -2.0f64..2.0),
        pv in 1.0f64..6.0,
    ) {
        let n = xs.len().min(ys.len());
        let x: Vec<Complex<f64>> = xs[..n].iter().map(|&(r, i)| Complex::new(r, i)).collect();
        let y: Vec<Complex<f64>> = ys[..n].iter().map(|&(r, i)| Complex::new(r, i)).collect();
        let lam = Complex::new(lam.0, lam.1);
        let scaled: Vec<Complex<f64>> = x.iter().map(|&z| lam * z).collect();
        prop_assert!(
            (vector_p_norm(&scaled, p(pv)) - lam.norm() * vector_p_norm(&x, p(pv))).abs() <= 1e-9
        );
        let sum: Vec<Complex<f64>> = x.iter().zip(&y).map(|(&a, &b)| a + b).collect();
        prop_assert!(
            vector_p_norm(&sum, p(pv))
                <= vector_p_norm(&x, p(pv)) + vector_p_norm(&y, p(pv)) + 1e-9
        );
    }

    /// The conjugate exponent is an involution with `1/p + 1/q = 1`.
    #[test]
    fn conjugate_exponent_involution(pv in 1.0001f64..8.0) {
        let q = p(pv).conjugate().unwrap();
        prop_assert!((1.0 / pv + 1.0 / q.value() - 1.0).abs() <= 1e-12);
        let back = q.conjugate().unwrap();
        prop_assert!((back.value() - pv).abs() <= 1e-9);
    }

    /// Multiplicity matrices act associatively.
    #[test]
    fn multiplicity_product_associative(
        a in prop::collection::vec(prop::collection::vec(0i64..4, 3), 2),
        b in prop::collection::vec(prop::collection::vec(0i64..4, 2), 3),
        c in prop::collection::vec(prop::collection::vec(0i64..4, 4), 2),
    ) {
        let a = MultiplicityMatrix::from_rows(&a).unwrap();
        let b = MultiplicityMatrix::from_rows(&b).unwrap();
        let c = MultiplicityMatrix::from_rows(&c).unwrap();
        prop_assert_eq!(a.mul(&b.mul(&c)), a.mul(&b).mul(&c));
    }
}
