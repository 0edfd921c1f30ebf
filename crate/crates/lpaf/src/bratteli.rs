//! Finite truncations of spatial Lp AF direct systems and their K0 shadows.
//!
//! A system stores levels `A_0..A_L` and connecting spatial homomorphisms;
//! the limit algebra is never materialized. Every limit-flavoured answer is
//! decided relative to the stored horizon `L` and tagged with a
//! [`TruncationCaveat`].

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{element_norm, AlgebraElement, SsfdAlgebra};
use crate::homs::{
    block_hom_from_multiplicity, compose_homs, multiplicity_of, MultiplicityMatrix, SpatialHom,
};
use crate::ktheory::{
    k0_of_algebra, k0_of_hom, GroupElement, PositiveContractiveMap, ScaledZGroup,
};
use crate::pnorm::{NormOptions, PExponent};
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum BrattliError {
    #[error("bad telescope indices: {0}")]
    BadIndices(String),
    #[error("bad levels: {0}")]
    BadLevels(String),
    #[error("systems have different exponents")]
    ExponentMismatch,
    #[error("{0}")]
    ShapeMismatch(String),
}

/// Marks an answer as relative to the stored horizon: summands or positivity
/// that look dead/undecided here may revive in a longer truncation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationCaveat {
    pub horizon: usize,
    pub note: CaveatNote,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaveatNote {
    /// Kernel summands were dropped against the final available level only.
    InjectivizedAtHorizon,
    /// A limit query was decided by scanning levels up to the horizon.
    DecidedWithinHorizon,
}

/// A finite truncation `A_0 -> A_1 -> ... -> A_L` of a spatial Lp AF direct
/// system. The empty system (no levels) is allowed and acts as the neutral
/// element for direct sums.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraDirectSystem<T: Real> {
    p: PExponent<T>,
    levels: Vec<SsfdAlgebra<T>>,
    maps: Vec<SpatialHom<T>>,
    caveat: Option<TruncationCaveat>,
}

impl<T: Real> AlgebraDirectSystem<T> {
    pub fn new(
        p: PExponent<T>,
        levels: Vec<SsfdAlgebra<T>>,
        maps: Vec<SpatialHom<T>>,
    ) -> Result<Self, BrattliError> {
        if maps.len() + 1 != levels.len() && !(levels.is_empty() && maps.is_empty()) {
            return Err(BrattliError::ShapeMismatch(format!(
                "{} levels need {} maps, got {}",
                levels.len(),
                levels.len().saturating_sub(1),
                maps.len()
            )));
        }
        for (i, a) in levels.iter().enumerate() {
            if a.p() != p {
                return Err(BrattliError::ExponentMismatch);
            }
            if i + 1 < levels.len()
                && (maps[i].source() != a || maps[i].target() != &levels[i + 1])
            {
                return Err(BrattliError::ShapeMismatch(format!(
                    "map {} does not connect level {} to level {}",
                    i,
                    i,
                    i + 1
                )));
            }
        }
        Ok(AlgebraDirectSystem { p, levels, maps, caveat: None })
    }

    pub fn with_caveat(mut self, caveat: TruncationCaveat) -> Self {
        self.caveat = Some(caveat);
        self
    }

    pub fn p(&self) -> PExponent<T> {
        self.p
    }

    pub fn levels(&self) -> &[SsfdAlgebra<T>] {
        &self.levels
    }

    pub fn maps(&self) -> &[SpatialHom<T>] {
        &self.maps
    }

    pub fn caveat(&self) -> Option<&TruncationCaveat> {
        self.caveat.as_ref()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Index of the last level.
    pub fn horizon(&self) -> usize {
        assert!(!self.levels.is_empty(), "empty system has no horizon");
        self.levels.len() - 1
    }

    /// Composite connecting map `A_from -> A_to`; the identity when
    /// `from == to`.
    pub fn connecting(&self, from: usize, to: usize) -> SpatialHom<T> {
        assert!(from <= to && to <= self.horizon(), "levels must satisfy from <= to <= horizon");
        if from == to {
            return SpatialHom::identity(&self.levels[from]);
        }
        let mut acc = self.maps[from].clone();
        for i in from + 1..to {
            acc = compose_homs(&self.maps[i], &acc).expect("consecutive maps compose");
        }
        acc
    }
}

/// The K0 shadow of an algebra system: scaled groups and positive
/// contractive maps.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupDirectSystem {
    levels: Vec<ScaledZGroup>,
    maps: Vec<PositiveContractiveMap>,
}

impl GroupDirectSystem {
    pub fn new(
        levels: Vec<ScaledZGroup>,
        maps: Vec<PositiveContractiveMap>,
    ) -> Result<Self, BrattliError> {
        if maps.len() + 1 != levels.len() && !(levels.is_empty() && maps.is_empty()) {
            return Err(BrattliError::ShapeMismatch(format!(
                "{} levels need {} maps, got {}",
                levels.len(),
                levels.len().saturating_sub(1),
                maps.len()
            )));
        }
        for i in 0..maps.len() {
            if maps[i].source() != &levels[i] || maps[i].target() != &levels[i + 1] {
                return Err(BrattliError::ShapeMismatch(format!(
                    "map {} does not connect level {} to level {}",
                    i,
                    i,
                    i + 1
                )));
            }
        }
        Ok(GroupDirectSystem { levels, maps })
    }

    pub fn levels(&self) -> &[ScaledZGroup] {
        &self.levels
    }

    pub fn maps(&self) -> &[PositiveContractiveMap] {
        &self.maps
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn horizon(&self) -> usize {
        assert!(!self.levels.is_empty(), "empty system has no horizon");
        self.levels.len() - 1
    }

    /// Composite map `G_from -> G_to`; the identity when `from == to`.
    pub fn connecting(&self, from: usize, to: usize) -> PositiveContractiveMap {
        assert!(from <= to && to <= self.horizon(), "levels must satisfy from <= to <= horizon");
        if from == to {
            return PositiveContractiveMap::identity(&self.levels[from]);
        }
        let mut acc = self.maps[from].clone();
        for i in from + 1..to {
            acc = self.maps[i].compose(&acc).expect("consecutive maps compose");
        }
        acc
    }
}

fn check_indices(indices: &[usize], horizon: usize) -> Result<(), BrattliError> {
    if indices.is_empty() {
        return Err(BrattliError::BadIndices("index list is empty".into()));
    }
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BrattliError::BadIndices("indices must be strictly increasing".into()));
    }
    if *indices.last().expect("nonempty") > horizon {
        return Err(BrattliError::BadIndices(format!(
            "index {} exceeds the horizon {}",
            indices.last().expect("nonempty"),
            horizon
        )));
    }
    Ok(())
}

/// Subsystem on the given strictly increasing level indices, with composed
/// connecting maps.
pub fn telescope<T: Real>(
    s: &AlgebraDirectSystem<T>,
    indices: &[usize],
) -> Result<AlgebraDirectSystem<T>, BrattliError> {
    if s.is_empty() {
        return Err(BrattliError::BadIndices("system has no levels".into()));
    }
    check_indices(indices, s.horizon())?;
    let levels: Vec<SsfdAlgebra<T>> = indices.iter().map(|&i| s.levels[i].clone()).collect();
    let maps: Vec<SpatialHom<T>> =
        indices.windows(2).map(|w| s.connecting(w[0], w[1])).collect();
    let mut out = AlgebraDirectSystem::new(s.p(), levels, maps).expect("telescoped system is valid");
    out.caveat = s.caveat.clone();
    Ok(out)
}

/// Group-system telescope; mirrors [`telescope`] so the K0 shadow commutes
/// with telescoping.
pub fn telescope_group(
    s: &GroupDirectSystem,
    indices: &[usize],
) -> Result<GroupDirectSystem, BrattliError> {
    if s.is_empty() {
        return Err(BrattliError::BadIndices("system has no levels".into()));
    }
    check_indices(indices, s.horizon())?;
    let levels: Vec<ScaledZGroup> = indices.iter().map(|&i| s.levels[i].clone()).collect();
    let maps: Vec<PositiveContractiveMap> =
        indices.windows(2).map(|w| s.connecting(w[0], w[1])).collect();
    GroupDirectSystem::new(levels, maps)
}

/// Drops, at every level `m < L`, each summand whose column in the composite
/// multiplicity matrix into the final level is zero, and rebuilds canonical
/// connecting maps on the survivors. All maps of the result are injective
/// (no zero columns). Kernels are judged against the horizon only, so the
/// result carries a [`TruncationCaveat`].
pub fn injectivize<T: Real>(s: &AlgebraDirectSystem<T>) -> AlgebraDirectSystem<T> {
    if s.is_empty() {
        return s.clone();
    }
    let horizon = s.horizon();
    // keep[m] = summands of level m alive in the composite to the horizon.
    let mut keep: Vec<Vec<usize>> = Vec::with_capacity(horizon + 1);
    let mut composite: Vec<MultiplicityMatrix> = Vec::with_capacity(horizon + 1);
    let final_rank = s.levels[horizon].summands().len();
    composite.push(MultiplicityMatrix::identity(final_rank));
    for m in (0..horizon).rev() {
        let next = composite.last().expect("nonempty");
        composite.push(next.mul(&multiplicity_of(&s.maps[m])));
    }
    composite.reverse();
    for (m, comp) in composite.iter().enumerate() {
        let alive: Vec<usize> = (0..s.levels[m].summands().len())
            .filter(|&j| m == horizon || !comp.column_is_zero(j))
            .collect();
        keep.push(alive);
    }
    let levels: Vec<SsfdAlgebra<T>> = (0..=horizon)
        .map(|m| {
            let sizes = keep[m].iter().map(|&j| s.levels[m].summands()[j]).collect();
            SsfdAlgebra::new(s.p(), sizes).expect("kept sizes are positive")
        })
        .collect();
    let maps: Vec<SpatialHom<T>> = (0..horizon)
        .map(|m| {
            let restricted = multiplicity_of(&s.maps[m]).restrict(&keep[m + 1], &keep[m]);
            debug_assert!(
                (0..restricted.cols()).all(|j| !restricted.column_is_zero(j)),
                "surviving summands must map injectively"
            );
            SpatialHom::from_block(
                block_hom_from_multiplicity(&restricted, &levels[m], &levels[m + 1])
                    .expect("restriction cannot violate the size criterion"),
            )
        })
        .collect();
    AlgebraDirectSystem { p: s.p(), levels, maps, caveat: None }
        .with_caveat(TruncationCaveat { horizon, note: CaveatNote::InjectivizedAtHorizon })
}

/// Levelwise matrix amplification `M_r(A_i)` with the induced connecting
/// maps; multiplicity matrices are unchanged.
pub fn matrix_amplify_system<T: Real>(
    s: &AlgebraDirectSystem<T>,
    r: usize,
) -> AlgebraDirectSystem<T> {
    assert!(r > 0, "amplification factor must be positive");
    let levels = s.levels.iter().map(|a| a.amplify(r).expect("amplified algebra")).collect();
    let maps = s.maps.iter().map(|h| crate::homs::amplify(h, r)).collect();
    AlgebraDirectSystem { p: s.p(), levels, maps, caveat: s.caveat.clone() }
}

/// Direct sum of two spatial homomorphisms (block-diagonal multiplicity,
/// concatenated similarities).
fn dsum_hom<T: Real>(h1: &SpatialHom<T>, h2: &SpatialHom<T>) -> SpatialHom<T> {
    let source = h1.source().dsum(h2.source()).expect("same exponent");
    let target = h1.target().dsum(h2.target()).expect("same exponent");
    let m1 = multiplicity_of(h1);
    let m2 = multiplicity_of(h2);
    let mut m = MultiplicityMatrix::zeros(m1.rows() + m2.rows(), m1.cols() + m2.cols());
    for k in 0..m1.rows() {
        for j in 0..m1.cols() {
            m.set(k, j, m1.get(k, j));
        }
    }
    for k in 0..m2.rows() {
        for j in 0..m2.cols() {
            m.set(m1.rows() + k, m1.cols() + j, m2.get(k, j));
        }
    }
    let block = block_hom_from_multiplicity(&m, &source, &target)
        .expect("block-diagonal multiplicity satisfies the size criterion");
    let perms: Vec<_> = h1
        .similarity()
        .perms()
        .iter()
        .chain(h2.similarity().perms())
        .cloned()
        .collect();
    let similarity =
        crate::algebra::AlgebraIsometry::new(target, perms).expect("sizes match");
    SpatialHom::new(block, similarity).expect("similarity acts on the target")
}

/// Levelwise direct sum of two systems of equal length and exponent. The
/// empty system is neutral.
pub fn dsum_systems<T: Real>(
    s1: &AlgebraDirectSystem<T>,
    s2: &AlgebraDirectSystem<T>,
) -> Result<AlgebraDirectSystem<T>, BrattliError> {
    if s1.is_empty() {
        return Ok(s2.clone());
    }
    if s2.is_empty() {
        return Ok(s1.clone());
    }
    if s1.p() != s2.p() {
        return Err(BrattliError::ExponentMismatch);
    }
    if s1.levels.len() != s2.levels.len() {
        return Err(BrattliError::ShapeMismatch(format!(
            "systems have {} and {} levels",
            s1.levels.len(),
            s2.levels.len()
        )));
    }
    let levels: Vec<SsfdAlgebra<T>> = s1
        .levels
        .iter()
        .zip(&s2.levels)
        .map(|(a, b)| a.dsum(b).expect("same exponent"))
        .collect();
    let maps: Vec<SpatialHom<T>> =
        s1.maps.iter().zip(&s2.maps).map(|(h1, h2)| dsum_hom(h1, h2)).collect();
    AlgebraDirectSystem::new(s1.p(), levels, maps)
}

/// Approximate-identity defect at level `n`: with `e_k` the image in `A_n`
/// of the identity of `A_k` (and `e_0 = 0`), samples coefficient vectors
/// `lambda` in the unit polydisk and returns
/// `max(0, max_lambda element_norm(sum_k lambda_k (e_k - e_{k-1})) - max_k |lambda_k|)`.
/// Contractivity of the increment maps makes this vanish up to estimator
/// tolerance.
pub fn approximate_identity_defect<T: Real>(
    s: &AlgebraDirectSystem<T>,
    n: usize,
    samples: usize,
    seed: u64,
    opts: &NormOptions,
) -> T {
    use rand::Rng;
    use rand::SeedableRng;
    assert!(!s.is_empty() && n <= s.horizon(), "level must not exceed the horizon");
    if n == 0 {
        return T::zero();
    }
    let mut increments: Vec<AlgebraElement<T>> = Vec::with_capacity(n);
    let mut prev = s.levels[n].zero_element();
    for k in 1..=n {
        let ek = crate::homs::apply_hom(&s.connecting(k, n), &s.levels[k].unit());
        increments.push(ek.sub(&prev));
        prev = ek;
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = T::zero();
    for sample in 0..samples {
        let lambda: Vec<Complex<T>> = (0..n)
            .map(|_| {
                if sample == 0 {
                    Complex::new(T::one(), T::zero())
                } else {
                    let r = T::of(rng.gen_range(0f64..=1f64).sqrt());
                    let th = rng.gen_range(0f64..std::f64::consts::TAU);
                    Complex::new(r * T::of(th.cos()), r * T::of(th.sin()))
                }
            })
            .collect();
        let mut combo = s.levels[n].zero_element();
        let mut top = T::zero();
        for (k, inc) in increments.iter().enumerate() {
            combo = combo.add(&inc.scale(lambda[k]));
            top = top.max(lambda[k].norm());
        }
        let est = element_norm(&combo, opts);
        worst = worst.max(est.value - top);
    }
    worst.max(T::zero())
}

/// Norm of `a + lambda 1` in the unitization of the limit, evaluated at
/// probe level `ell` via
/// `max(element_norm(phi_{ell,n}(a) + lambda phi_{ell,n}(1_n)), |lambda|)`.
/// When the connecting maps are injective they are isometric, so the answer
/// does not depend on the probe level; non-injective maps can shrink it
/// (see [`injectivize`]).
pub fn unitization_norm<T: Real>(
    s: &AlgebraDirectSystem<T>,
    n: usize,
    a: &AlgebraElement<T>,
    lambda: Complex<T>,
    ell: usize,
    opts: &NormOptions,
) -> Result<T, BrattliError> {
    if s.is_empty() || n > ell || ell > s.horizon() {
        return Err(BrattliError::BadLevels(format!(
            "need level <= probe <= horizon, got {} <= {} <= {}",
            n,
            ell,
            if s.is_empty() { 0 } else { s.horizon() }
        )));
    }
    if a.algebra() != &s.levels[n] {
        return Err(BrattliError::ShapeMismatch("element must live at the given level".into()));
    }
    let phi = s.connecting(n, ell);
    let image = crate::homs::apply_hom(&phi, a);
    let unit_image = crate::homs::apply_hom(&phi, &s.levels[n].unit());
    let combined = image.add(&unit_image.scale(lambda));
    let est = element_norm(&combined, opts);
    Ok(est.value.max(lambda.norm()))
}

/// The K0 shadow: levelwise `k0_of_algebra`, mapwise `k0_of_hom`.
pub fn group_system_of<T: Real>(s: &AlgebraDirectSystem<T>) -> GroupDirectSystem {
    GroupDirectSystem {
        levels: s.levels.iter().map(k0_of_algebra).collect(),
        maps: s.maps.iter().map(k0_of_hom).collect(),
    }
}

/// Whether an element at level `m` becomes positive somewhere within the
/// horizon.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum LimitVerdict {
    /// Least level `n >= m` at which the image lies in the cone.
    PositiveAt(usize),
    /// Not positive at any level up to the horizon; a longer truncation may
    /// still decide it.
    UnknownWithinHorizon,
}

/// A limit-positivity answer together with its horizon caveat.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LimitAnswer {
    pub verdict: LimitVerdict,
    pub caveat: TruncationCaveat,
}

/// Decides positivity of `g` in the limit cone `union of f_{n,m}((G_m)_+)`,
/// relative to the horizon: returns the least `n` with `f_{n,m}(g) >= 0`.
pub fn limit_positive(
    s: &GroupDirectSystem,
    m: usize,
    g: &GroupElement,
) -> Result<LimitAnswer, BrattliError> {
    if s.is_empty() || m > s.horizon() {
        return Err(BrattliError::BadLevels(format!("level {} exceeds the horizon", m)));
    }
    if g.group() != &s.levels[m] {
        return Err(BrattliError::ShapeMismatch("element must live at the given level".into()));
    }
    let caveat =
        TruncationCaveat { horizon: s.horizon(), note: CaveatNote::DecidedWithinHorizon };
    let mut image = g.clone();
    for n in m..=s.horizon() {
        if n > m {
            image = s.maps[n - 1].apply(&image);
        }
        if image.is_positive() {
            return Ok(LimitAnswer { verdict: LimitVerdict::PositiveAt(n), caveat });
        }
    }
    Ok(LimitAnswer { verdict: LimitVerdict::UnknownWithinHorizon, caveat })
}
