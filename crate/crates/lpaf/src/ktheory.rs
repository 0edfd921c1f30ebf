//! Simplicial scaled Riesz groups and the K0 functor on SSFD algebras.
//!
//! K0 of an SSFD algebra with summand sizes `(d_1, ..., d_N)` is the
//! simplicial triple `(Z^N, (Z^N)_+, [0, d])`; spatial homomorphisms induce
//! positive contractive maps given by their multiplicity matrices, and K1
//! vanishes identically.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::SsfdAlgebra;
use crate::algebra::AlgebraElement;
use crate::homs::{multiplicity_of, MultiplicityMatrix, SpatialHom};
use crate::scalar::Real;

/// Residual bound when rounding the trace of an idempotent to its rank.
pub const RANK_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum KError {
    #[error("scale entries must be positive, got {0}")]
    NonPositiveScale(i64),
    #[error("{0}")]
    ShapeMismatch(String),
    #[error("map is not contractive: row {row} sends the scale to {image}, above the bound {bound}")]
    NotContractive { row: usize, image: i64, bound: i64 },
    #[error("block {block} is not idempotent within 1e-9 (defect {defect})")]
    NotIdempotent { block: usize, defect: f64 },
    #[error("trace {trace} of block {block} is not within 1e-6 of an integer")]
    NonIntegerRank { block: usize, trace: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
}

/// The simplicial scaled ordered group `(Z^N, (Z^N)_+, [0, d])`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaledZGroup {
    scale: Vec<i64>,
}

impl Serialize for ScaledZGroup {
    /// Serializes as the bare scale vector, matching the system file format.
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.scale.serialize(serializer)
    }
}

impl ScaledZGroup {
    pub fn new(scale: Vec<i64>) -> Result<Self, KError> {
        if let Some(&bad) = scale.iter().find(|&&d| d < 1) {
            return Err(KError::NonPositiveScale(bad));
        }
        Ok(ScaledZGroup { scale })
    }

    pub fn rank(&self) -> usize {
        self.scale.len()
    }

    pub fn scale(&self) -> &[i64] {
        &self.scale
    }

    pub fn element(&self, coords: Vec<i64>) -> Result<GroupElement, KError> {
        if coords.len() != self.rank() {
            return Err(KError::ShapeMismatch(format!(
                "expected {} coordinates, got {}",
                self.rank(),
                coords.len()
            )));
        }
        Ok(GroupElement { group: self.clone(), coords })
    }

    pub fn zero(&self) -> GroupElement {
        GroupElement { group: self.clone(), coords: vec![0; self.rank()] }
    }

    /// The top of the scale, `d` itself.
    pub fn top(&self) -> GroupElement {
        GroupElement { group: self.clone(), coords: self.scale.clone() }
    }
}

/// An element of a [`ScaledZGroup`], kept with its group for shape checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupElement {
    group: ScaledZGroup,
    coords: Vec<i64>,
}

impl GroupElement {
    pub fn group(&self) -> &ScaledZGroup {
        &self.group
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    pub fn is_positive(&self) -> bool {
        self.coords.iter().all(|&x| x >= 0)
    }

    /// Membership in the scale `[0, d]`.
    pub fn in_scale(&self) -> bool {
        self.is_positive() && self.coords.iter().zip(self.group.scale()).all(|(&x, &d)| x <= d)
    }

    /// Componentwise order `self <= other` (the standard cone order).
    pub fn le(&self, other: &Self) -> bool {
        assert_eq!(self.group, other.group, "order compares elements of one group");
        self.coords.iter().zip(&other.coords).all(|(a, b)| a <= b)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.group, other.group);
        let coords = self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect();
        GroupElement { group: self.group.clone(), coords }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.group, other.group);
        let coords = self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect();
        GroupElement { group: self.group.clone(), coords }
    }

    pub fn scale_by(&self, n: i64) -> Self {
        let coords = self.coords.iter().map(|&x| n * x).collect();
        GroupElement { group: self.group.clone(), coords }
    }

    pub fn max(&self, other: &Self) -> Self {
        assert_eq!(self.group, other.group);
        let coords =
            self.coords.iter().zip(&other.coords).map(|(&a, &b)| a.max(b)).collect();
        GroupElement { group: self.group.clone(), coords }
    }
}

/// A positive contractive map between simplicial scaled groups: an integer
/// matrix with nonnegative entries sending the source scale into the target
/// scale.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PositiveContractiveMap {
    source: ScaledZGroup,
    target: ScaledZGroup,
    matrix: MultiplicityMatrix,
}

impl Serialize for PositiveContractiveMap {
    /// Serializes as `{"mult": rows}`, matching the system file format.
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("PositiveContractiveMap", 1)?;
        s.serialize_field("mult", &self.matrix)?;
        s.end()
    }
}

impl PositiveContractiveMap {
    pub fn new(
        source: ScaledZGroup,
        target: ScaledZGroup,
        matrix: MultiplicityMatrix,
    ) -> Result<Self, KError> {
        if matrix.rows() != target.rank() || matrix.cols() != source.rank() {
            return Err(KError::ShapeMismatch(format!(
                "matrix is {}x{} but target rank is {} and source rank {}",
                matrix.rows(),
                matrix.cols(),
                target.rank(),
                source.rank()
            )));
        }
        let image = matrix.apply(source.scale());
        for (row, (&got, &bound)) in image.iter().zip(target.scale()).enumerate() {
            if got > bound {
                return Err(KError::NotContractive { row, image: got, bound });
            }
        }
        Ok(PositiveContractiveMap { source, target, matrix })
    }

    pub fn identity(g: &ScaledZGroup) -> Self {
        PositiveContractiveMap {
            source: g.clone(),
            target: g.clone(),
            matrix: MultiplicityMatrix::identity(g.rank()),
        }
    }

    pub fn source(&self) -> &ScaledZGroup {
        &self.source
    }

    pub fn target(&self) -> &ScaledZGroup {
        &self.target
    }

    pub fn matrix(&self) -> &MultiplicityMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &GroupElement) -> GroupElement {
        assert_eq!(x.group, self.source, "element must belong to the source group");
        GroupElement { group: self.target.clone(), coords: self.matrix.apply(x.coords()) }
    }

    /// Composition `self . other`.
    pub fn compose(&self, other: &Self) -> Result<Self, KError> {
        if other.target != self.source {
            return Err(KError::ShapeMismatch(
                "target of the first map must equal the source of the second".into(),
            ));
        }
        Ok(PositiveContractiveMap {
            source: other.source.clone(),
            target: self.target.clone(),
            matrix: self.matrix.mul(&other.matrix),
        })
    }
}

/// K0 of an SSFD algebra: rank = number of summands, scale = summand sizes.
pub fn k0_of_algebra<T: Real>(a: &SsfdAlgebra<T>) -> ScaledZGroup {
    ScaledZGroup::new(a.summands().iter().map(|&d| d as i64).collect())
        .expect("summand sizes are positive")
}

/// K1 of an SSFD algebra (and of any Lp AF limit): identically zero.
pub fn k1_of_algebra<T: Real>(_a: &SsfdAlgebra<T>) -> i64 {
    0
}

/// K0 of a spatial homomorphism: its multiplicity matrix, contractive by the
/// size criterion.
pub fn k0_of_hom<T: Real>(h: &SpatialHom<T>) -> PositiveContractiveMap {
    PositiveContractiveMap::new(
        k0_of_algebra(h.source()),
        k0_of_algebra(h.target()),
        multiplicity_of(h),
    )
    .expect("the size criterion makes multiplicity matrices contractive")
}

/// K0 class of an idempotent at matrix level `n` over `base` (an element of
/// the `n`-amplified algebra): the vector of blockwise ranks, computed as
/// rounded traces. Each block must be idempotent within 1e-9 and each trace
/// within 1e-6 of an integer.
pub fn k0_class_of_idempotent<T: Real>(
    e: &AlgebraElement<T>,
    base: &SsfdAlgebra<T>,
    n: usize,
) -> Result<GroupElement, KError> {
    let level = base
        .amplify(n)
        .map_err(|err| KError::ShapeMismatch(err.to_string()))?;
    if e.algebra() != &level {
        return Err(KError::ShapeMismatch(format!(
            "element lives over {:?}, expected level {} over {:?}",
            e.algebra().summands(),
            n,
            base.summands()
        )));
    }
    let mut coords = Vec::with_capacity(base.summands().len());
    for (k, block) in e.blocks().iter().enumerate() {
        let defect = block.mul(block).distance(block).as_f64();
        if defect > 1e-9 {
            return Err(KError::NotIdempotent { block: k, defect });
        }
        let trace = block.trace().re.as_f64();
        let rank = trace.round();
        if (trace - rank).abs() > RANK_TOL {
            return Err(KError::NonIntegerRank { block: k, trace });
        }
        coords.push(rank as i64);
    }
    Ok(GroupElement { group: k0_of_algebra(base), coords })
}

/// Riesz interpolant: given `eta_j <= mu_k` for all four pairs, returns the
/// componentwise max of the etas, which sits inside the sandwich.
pub fn interpolant(
    eta1: &GroupElement,
    eta2: &GroupElement,
    mu1: &GroupElement,
    mu2: &GroupElement,
) -> Result<GroupElement, KError> {
    for e in [eta2, mu1, mu2] {
        if e.group != eta1.group {
            return Err(KError::ShapeMismatch("all four elements must share a group".into()));
        }
    }
    for (ei, eta) in [eta1, eta2].into_iter().enumerate() {
        for (mi, mu) in [mu1, mu2].into_iter().enumerate() {
            if !eta.le(mu) {
                return Err(KError::PreconditionViolated(format!(
                    "eta{} is not below mu{}",
                    ei + 1,
                    mi + 1
                )));
            }
        }
    }
    Ok(eta1.max(eta2))
}

/// Outcome of one Riesz/scale axiom check over sampled elements.
#[derive(Clone, Debug, Serialize)]
pub struct RieszCheck {
    pub axiom: &'static str,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Sampled verification of the seven scaled-Riesz-group axioms. Simplicial
/// data always passes; the report exists to audit group files.
#[derive(Clone, Debug, Serialize)]
pub struct RieszReport {
    pub rank: usize,
    pub scale: Vec<i64>,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<RieszCheck>,
}

impl RieszReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Samples `samples` pseudo-random elements (deterministically from `seed`)
/// and verifies: (1) the cone generates, (2) properness, (3) unperforation
/// for n = 2..5, (4) interpolation via [`interpolant`], (5) scale generation
/// by greedy decomposition, (6) heredity, (7) upward directedness of the
/// scale.
pub fn riesz_report(g: &ScaledZGroup, samples: usize, seed: u64) -> RieszReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.rank();
    let bound: i64 = 3 * g.scale().iter().copied().max().unwrap_or(1);
    let mut checks: Vec<RieszCheck> = [
        "generation",
        "properness",
        "unperforation",
        "interpolation",
        "scale-generation",
        "heredity",
        "upward-directedness",
    ]
    .into_iter()
    .map(|axiom| RieszCheck { axiom, passed: true, failures: Vec::new() })
    .collect();
    let fail = |checks: &mut Vec<RieszCheck>, idx: usize, msg: String| {
        checks[idx].passed = false;
        if checks[idx].failures.len() < 8 {
            checks[idx].failures.push(msg);
        }
    };

    for _ in 0..samples {
        let any = g
            .element((0..n).map(|_| rng.gen_range(-bound..=bound)).collect())
            .expect("lengths match");
        let pos = g
            .element((0..n).map(|_| rng.gen_range(0..=bound)).collect())
            .expect("lengths match");

        // (1) G = G+ - G+ via positive and negative parts.
        let plus =
            g.element(any.coords().iter().map(|&x| x.max(0)).collect()).expect("length");
        let minus =
            g.element(any.coords().iter().map(|&x| (-x).max(0)).collect()).expect("length");
        if !plus.is_positive() || !minus.is_positive() || plus.sub(&minus) != any {
            fail(&mut checks, 0, format!("{:?} is not a difference of positives", any.coords()));
        }

        // (2) G+ meets -G+ only in 0.
        if pos.is_positive() && pos.scale_by(-1).is_positive() && pos != g.zero() {
            fail(&mut checks, 1, format!("{:?} and its negative are both positive", pos.coords()));
        }

        // (3) n.eta >= 0 forces eta >= 0.
        for m in 2..=5 {
            if any.scale_by(m).is_positive() && !any.is_positive() {
                fail(&mut checks, 2, format!("{}x{:?} positive but element is not", m, any.coords()));
            }
        }

        // (4) Riesz interpolation for a sampled sandwich.
        let eta2 = g
            .element((0..n).map(|_| rng.gen_range(-bound..=bound)).collect())
            .expect("length");
        let pad1 = (0..n).map(|_| rng.gen_range(0..=bound)).collect::<Vec<_>>();
        let pad2 = (0..n).map(|_| rng.gen_range(0..=bound)).collect::<Vec<_>>();
        let base = any.max(&eta2);
        let mu1 = base.add(&g.element(pad1).expect("length"));
        let mu2 = base.add(&g.element(pad2).expect("length"));
        match interpolant(&any, &eta2, &mu1, &mu2) {
            Ok(lam) => {
                if !(any.le(&lam) && eta2.le(&lam) && lam.le(&mu1) && lam.le(&mu2)) {
                    fail(&mut checks, 3, format!("interpolant {:?} misses the sandwich", lam.coords()));
                }
            }
            Err(e) => fail(&mut checks, 3, format!("interpolant failed: {}", e)),
        }

        // (5) Every positive element is a finite sum of scale elements,
        // greedily peeling min(remaining, d).
        let mut remaining = pos.clone();
        let mut total = g.zero();
        let mut steps = 0usize;
        while remaining != g.zero() {
            let piece = g
                .element(
                    remaining
                        .coords()
                        .iter()
                        .zip(g.scale())
                        .map(|(&x, &d)| x.min(d))
                        .collect(),
                )
                .expect("length");
            if !piece.in_scale() || piece == g.zero() {
                fail(&mut checks, 4, format!("greedy piece {:?} leaves the scale", piece.coords()));
                break;
            }
            total = total.add(&piece);
            remaining = remaining.sub(&piece);
            steps += 1;
            if steps > (3 * bound + 1) as usize {
                fail(&mut checks, 4, "greedy decomposition does not terminate".into());
                break;
            }
        }
        if total != pos && checks[4].passed {
            fail(&mut checks, 4, format!("greedy pieces sum to {:?}", total.coords()));
        }

        // (6) Heredity: 0 <= xi <= mu in [0,d] keeps xi in [0,d].
        let mu = g
            .element(g.scale().iter().map(|&d| rng.gen_range(0..=d)).collect())
            .expect("length");
        let xi = g
            .element(mu.coords().iter().map(|&m| rng.gen_range(0..=m)).collect())
            .expect("length");
        if !xi.in_scale() {
            fail(&mut checks, 5, format!("{:?} below a scale element escapes the scale", xi.coords()));
        }

        // (7) Upward directedness of the scale via componentwise max.
        let nu = g
            .element(g.scale().iter().map(|&d| rng.gen_range(0..=d)).collect())
            .expect("length");
        let join = mu.max(&nu);
        if !(join.in_scale() && mu.le(&join) && nu.le(&join)) {
            fail(&mut checks, 6, format!("join {:?} fails to dominate inside the scale", join.coords()));
        }
    }

    RieszReport { rank: n, scale: g.scale().to_vec(), samples, seed, checks }
}
