//! Spatial homomorphisms between SSFD Lp algebras in canonical form.
//!
//! Every spatial homomorphism factors as a blockwise complex-permutation
//! similarity composed with a canonical block-diagonal map: per target summand
//! `k`, a nondecreasing list of source summand indices laid out on the
//! diagonal followed by zero padding. The integer data of the block part is
//! the multiplicity matrix `m_{k,j}`, and composition multiplies
//! multiplicities.

use std::collections::VecDeque;

use num_complex::Complex;
use serde::ser::{Serialize, Serializer};
use thiserror::Error;

use crate::algebra::{
    as_complex_permutation, AlgebraElement, AlgebraIsometry, ComplexPermutation, SsfdAlgebra,
};
use crate::matrix::Matrix;
use crate::scalar::Real;

/// Entrywise tolerance for the matrix-unit relations of a raw homomorphism.
pub const RAW_HOM_TOL: f64 = 1e-9;

/// Entrywise tolerance for reproducing a raw homomorphism from its
/// decomposition.
pub const DECOMPOSE_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum HomError {
    #[error("size criterion violated at target summand {0}: slots exceed block size")]
    SizeCriterionViolated(usize),
    #[error("{0}")]
    ShapeMismatch(String),
    #[error("multiplicity matrices differ")]
    MultiplicityMismatch,
    #[error("images do not satisfy the matrix-unit relations: {0}")]
    NotAHomomorphism(String),
    #[error("rank {rank} of the unit image at target {target_index}, source {source_index} is not divisible by the source block size {size}")]
    RankNotDivisible { target_index: usize, source_index: usize, rank: i64, size: usize },
    #[error("homomorphism is not spatial: {0}")]
    NotSpatial(String),
}

/// Nonnegative integer matrix `m_{k,j}` counting how many times source
/// summand `j` occurs in target summand `k`. Rows index targets, columns
/// sources; either may be zero for zero algebras.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiplicityMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<i64>,
}

impl MultiplicityMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<i64>) -> Result<Self, HomError> {
        if entries.len() != rows * cols {
            return Err(HomError::ShapeMismatch(format!(
                "expected {} entries for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                entries.len()
            )));
        }
        if entries.iter().any(|&e| e < 0) {
            return Err(HomError::ShapeMismatch("multiplicities must be nonnegative".into()));
        }
        Ok(MultiplicityMatrix { rows, cols, entries })
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self, HomError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(HomError::ShapeMismatch("ragged multiplicity rows".into()));
        }
        Self::new(r, c, rows.iter().flatten().copied().collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        MultiplicityMatrix { rows, cols, entries: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = 1;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, k: usize, j: usize) -> i64 {
        debug_assert!(k < self.rows && j < self.cols);
        self.entries[k * self.cols + j]
    }

    pub fn set(&mut self, k: usize, j: usize, v: i64) {
        assert!(v >= 0, "multiplicities must be nonnegative");
        self.entries[k * self.cols + j] = v;
    }

    pub fn row(&self, k: usize) -> &[i64] {
        &self.entries[k * self.cols..(k + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rows).map(|k| self.row(k).to_vec()).collect()
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.entries[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Integer matrix-vector product.
    pub fn apply(&self, x: &[i64]) -> Vec<i64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|k| self.row(k).iter().zip(x).map(|(&a, &b)| a * b).sum()).collect()
    }

    pub fn column_is_zero(&self, j: usize) -> bool {
        (0..self.rows).all(|k| self.get(k, j) == 0)
    }

    /// Deletes the given rows and columns (used when dead summands are
    /// dropped from a direct system).
    pub fn restrict(&self, keep_rows: &[usize], keep_cols: &[usize]) -> Self {
        let mut out = Self::zeros(keep_rows.len(), keep_cols.len());
        for (ri, &r) in keep_rows.iter().enumerate() {
            for (ci, &c) in keep_cols.iter().enumerate() {
                out.entries[ri * keep_cols.len() + ci] = self.get(r, c);
            }
        }
        out
    }
}

impl Serialize for MultiplicityMatrix {
    /// Serializes as the list of rows.
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

/// Canonical block-diagonal homomorphism: target summand `k` receives the
/// source blocks listed in `slots[k]` (nondecreasing), then zero padding.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDiagonalHom<T: Real> {
    source: SsfdAlgebra<T>,
    target: SsfdAlgebra<T>,
    slots: Vec<Vec<usize>>,
}

impl<T: Real> BlockDiagonalHom<T> {
    pub fn source(&self) -> &SsfdAlgebra<T> {
        &self.source
    }

    pub fn target(&self) -> &SsfdAlgebra<T> {
        &self.target
    }

    pub fn slots(&self) -> &[Vec<usize>] {
        &self.slots
    }

    /// Total size occupied by slots in target summand `k`.
    pub fn content_size(&self, k: usize) -> usize {
        self.slots[k].iter().map(|&j| self.source.summands()[j]).sum()
    }

    pub fn multiplicity(&self) -> MultiplicityMatrix {
        let mut m = MultiplicityMatrix::zeros(self.target.summands().len(), self.source.summands().len());
        for (k, slot) in self.slots.iter().enumerate() {
            for &j in slot {
                m.set(k, j, m.get(k, j) + 1);
            }
        }
        m
    }

    /// Image of `a` in target summand `k`: the slot blocks on the diagonal,
    /// zero padded.
    fn apply_block(&self, a: &AlgebraElement<T>, k: usize) -> Matrix<T> {
        let d = self.target.summands()[k];
        let mut out = Matrix::zeros(d, d);
        let mut off = 0;
        for &j in &self.slots[k] {
            out.embed(a.block(j), off, off);
            off += self.source.summands()[j];
        }
        out
    }
}

/// Spatial homomorphism in canonical form: a blockwise complex-permutation
/// similarity of the target composed with a canonical block-diagonal map,
/// `a -> s phi(a) s^{-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialHom<T: Real> {
    block: BlockDiagonalHom<T>,
    similarity: AlgebraIsometry<T>,
}

impl<T: Real> SpatialHom<T> {
    pub fn new(block: BlockDiagonalHom<T>, similarity: AlgebraIsometry<T>) -> Result<Self, HomError> {
        if similarity.algebra() != block.target() {
            return Err(HomError::ShapeMismatch(
                "similarity must act on the target algebra".into(),
            ));
        }
        Ok(SpatialHom { block, similarity })
    }

    /// Canonical block-diagonal map with identity similarity.
    pub fn from_block(block: BlockDiagonalHom<T>) -> Self {
        let similarity = AlgebraIsometry::identity(block.target());
        SpatialHom { block, similarity }
    }

    pub fn identity(algebra: &SsfdAlgebra<T>) -> Self {
        let n = algebra.summands().len();
        let block = block_hom_from_multiplicity(&MultiplicityMatrix::identity(n), algebra, algebra)
            .expect("identity multiplicity satisfies the size criterion");
        Self::from_block(block)
    }

    pub fn block(&self) -> &BlockDiagonalHom<T> {
        &self.block
    }

    pub fn similarity(&self) -> &AlgebraIsometry<T> {
        &self.similarity
    }

    pub fn source(&self) -> &SsfdAlgebra<T> {
        self.block.source()
    }

    pub fn target(&self) -> &SsfdAlgebra<T> {
        self.block.target()
    }

    /// Replaces the similarity with `u . s` (postcomposition by an isometry
    /// of the target).
    pub fn postcompose_isometry(&self, u: &AlgebraIsometry<T>) -> Self {
        SpatialHom { block: self.block.clone(), similarity: u.compose(&self.similarity) }
    }

    /// Pointwise equality on all matrix units of the source, within `tol`.
    pub fn eq_on_units(&self, other: &Self, tol: T) -> bool {
        if self.source() != other.source() || self.target() != other.target() {
            return false;
        }
        let src = self.source().clone();
        for j in 0..src.summands().len() {
            let c = src.summands()[j];
            for i in 0..c {
                for l in 0..c {
                    let e = src.matrix_unit(j, i, l);
                    if apply_hom(self, &e).distance(&apply_hom(other, &e)) > tol {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Builds the canonical block-diagonal homomorphism with the given
/// multiplicity matrix. Fails with [`HomError::SizeCriterionViolated`] when
/// some target summand cannot hold its slots.
pub fn block_hom_from_multiplicity<T: Real>(
    m: &MultiplicityMatrix,
    source: &SsfdAlgebra<T>,
    target: &SsfdAlgebra<T>,
) -> Result<BlockDiagonalHom<T>, HomError> {
    if source.p() != target.p() {
        return Err(HomError::ShapeMismatch("source and target exponents differ".into()));
    }
    if m.rows() != target.summands().len() || m.cols() != source.summands().len() {
        return Err(HomError::ShapeMismatch(format!(
            "multiplicity is {}x{} but target has {} summands and source {}",
            m.rows(),
            m.cols(),
            target.summands().len(),
            source.summands().len()
        )));
    }
    let mut slots = Vec::with_capacity(m.rows());
    for k in 0..m.rows() {
        let mut slot = Vec::new();
        let mut used = 0usize;
        for j in 0..m.cols() {
            let mult = m.get(k, j) as usize;
            used += mult * source.summands()[j];
            slot.extend(std::iter::repeat_n(j, mult));
        }
        if used > target.summands()[k] {
            return Err(HomError::SizeCriterionViolated(k));
        }
        slots.push(slot);
    }
    Ok(BlockDiagonalHom { source: source.clone(), target: target.clone(), slots })
}

/// Multiplicity matrix of a spatial homomorphism (similarity-invariant).
pub fn multiplicity_of<T: Real>(h: &SpatialHom<T>) -> MultiplicityMatrix {
    h.block.multiplicity()
}

/// Applies a spatial homomorphism to an element.
pub fn apply_hom<T: Real>(h: &SpatialHom<T>, a: &AlgebraElement<T>) -> AlgebraElement<T> {
    assert_eq!(h.source(), a.algebra(), "element must belong to the source algebra");
    let blocks: Vec<Matrix<T>> = (0..h.target().summands().len())
        .map(|k| h.similarity.perm(k).conjugate(&h.block.apply_block(a, k)))
        .collect();
    AlgebraElement::new(h.target().clone(), blocks).expect("blocks have target sizes")
}

/// Layout item of a composite before re-canonicalization: a copied source
/// block or a stretch of zero padding.
enum Item {
    Block { source: usize, size: usize },
    Pad { size: usize },
}

/// Composition `h2 . h1` in canonical form. The block part is the canonical
/// map of the product multiplicity; the similarity is
/// `s_2 . (phi_2(s_1) + 1 - phi_2(1)) . w` per target summand, where `w` is
/// the permutation that regroups the canonical layout into the nested one
/// (interior padding moved to the tail, slots re-sorted).
pub fn compose_homs<T: Real>(
    h2: &SpatialHom<T>,
    h1: &SpatialHom<T>,
) -> Result<SpatialHom<T>, HomError> {
    if h1.target() != h2.source() {
        return Err(HomError::ShapeMismatch(
            "target of the first map must equal the source of the second".into(),
        ));
    }
    let a = h1.source().clone();
    let b = h1.target().clone();
    let c = h2.target().clone();
    let m = multiplicity_of(h2).mul(&multiplicity_of(h1));
    let block = block_hom_from_multiplicity(&m, &a, &c)
        .expect("product multiplicity satisfies the size criterion");

    let mut perms = Vec::with_capacity(c.summands().len());
    for k in 0..c.summands().len() {
        let d_k = c.summands()[k];
        // u = phi_2(s_1) + 1 - phi_2(1): the s_1 blocks of the nested slots,
        // identity on the padding.
        let mut u: Option<ComplexPermutation<T>> = None;
        for &bsum in &h2.block.slots[k] {
            let part = h1.similarity.perm(bsum).clone();
            u = Some(match u {
                None => part,
                Some(acc) => acc.dsum(&part),
            });
        }
        let content2 = h2.block.content_size(k);
        if content2 < d_k {
            let pad = ComplexPermutation::identity(d_k - content2);
            u = Some(match u {
                None => pad,
                Some(acc) => acc.dsum(&pad),
            });
        }
        let u = u.expect("target summands are nonempty");

        // w: canonical position -> nested position.
        let mut items: Vec<Item> = Vec::new();
        for &bsum in &h2.block.slots[k] {
            for &asum in &h1.block.slots[bsum] {
                items.push(Item::Block { source: asum, size: a.summands()[asum] });
            }
            let inner_pad = b.summands()[bsum] - h1.block.content_size(bsum);
            if inner_pad > 0 {
                items.push(Item::Pad { size: inner_pad });
            }
        }
        if content2 < d_k {
            items.push(Item::Pad { size: d_k - content2 });
        }
        let mut canonical_offsets: Vec<VecDeque<usize>> = vec![VecDeque::new(); a.summands().len()];
        let mut off = 0;
        for &asum in &block.slots[k] {
            canonical_offsets[asum].push_back(off);
            off += a.summands()[asum];
        }
        let canonical_content = off;
        let mut w = vec![usize::MAX; d_k];
        let mut pad_positions = Vec::new();
        let mut nested_off = 0;
        for item in &items {
            match *item {
                Item::Block { source, size } => {
                    let can_off = canonical_offsets[source]
                        .pop_front()
                        .expect("slot counts match the product multiplicity");
                    for t in 0..size {
                        w[can_off + t] = nested_off + t;
                    }
                    nested_off += size;
                }
                Item::Pad { size } => {
                    for t in 0..size {
                        pad_positions.push(nested_off + t);
                    }
                    nested_off += size;
                }
            }
        }
        debug_assert_eq!(nested_off, d_k);
        for (t, &pos) in pad_positions.iter().enumerate() {
            w[canonical_content + t] = pos;
        }
        let ones = vec![Complex::new(T::one(), T::zero()); d_k];
        let w = ComplexPermutation::new(w, ones).expect("w is a bijection");

        perms.push(h2.similarity.perm(k).compose(&u).compose(&w));
    }
    let similarity = AlgebraIsometry::new(c, perms).expect("one permutation per target summand");
    Ok(SpatialHom { block, similarity })
}

/// The induced homomorphism between the `r`-amplified algebras, via the
/// standard bijection `(j, l) -> j + r l` between `{0..r} x {0..d}` and
/// `{0..rd}`. Slots (hence the multiplicity matrix) are unchanged; each
/// similarity permutation `sigma` amplifies to `j + r l -> j + r sigma(l)`
/// with the phase of column `l`.
pub fn amplify<T: Real>(h: &SpatialHom<T>, r: usize) -> SpatialHom<T> {
    assert!(r > 0, "amplification factor must be positive");
    let source = h.source().amplify(r).expect("amplified algebra");
    let target = h.target().amplify(r).expect("amplified algebra");
    let block = BlockDiagonalHom {
        source,
        target: target.clone(),
        slots: h.block.slots.clone(),
    };
    let perms: Vec<ComplexPermutation<T>> = h
        .similarity
        .perms()
        .iter()
        .map(|s| {
            let d = s.size();
            let mut sigma = vec![0usize; r * d];
            let mut phases = vec![Complex::new(T::one(), T::zero()); r * d];
            for l in 0..d {
                for j in 0..r {
                    sigma[j + r * l] = j + r * s.sigma(l);
                    phases[j + r * l] = s.phase(l);
                }
            }
            ComplexPermutation::new(sigma, phases).expect("amplified permutation")
        })
        .collect();
    let similarity = AlgebraIsometry::new(target, perms).expect("sizes match");
    SpatialHom { block, similarity }
}

/// Finds an isometry `u` of the target with `u h1(a) u^{-1} = h2(a)` for all
/// `a`. Requires equal endpoints and equal multiplicity. On slot content `u`
/// is `s_2 s_1^{-1}`; leftover padding coordinates are matched in ascending
/// order with phase 1. The result is verified on matrix units within 1e-12.
pub fn align_spatial<T: Real>(
    h1: &SpatialHom<T>,
    h2: &SpatialHom<T>,
) -> Result<AlgebraIsometry<T>, HomError> {
    if h1.source() != h2.source() || h1.target() != h2.target() {
        return Err(HomError::ShapeMismatch("homomorphisms must share endpoints".into()));
    }
    if multiplicity_of(h1) != multiplicity_of(h2) {
        return Err(HomError::MultiplicityMismatch);
    }
    let target = h1.target().clone();
    let mut perms = Vec::with_capacity(target.summands().len());
    for k in 0..target.summands().len() {
        let d = target.summands()[k];
        let content = h1.block.content_size(k);
        let s1 = h1.similarity.perm(k);
        let s2 = h2.similarity.perm(k);
        let mut sigma = vec![usize::MAX; d];
        let mut phases = vec![Complex::new(T::one(), T::zero()); d];
        for i in 0..content {
            sigma[s1.sigma(i)] = s2.sigma(i);
            phases[s1.sigma(i)] = s2.phase(i) * s1.phase(i).conj();
        }
        let mut from: Vec<usize> = (content..d).map(|i| s1.sigma(i)).collect();
        let mut to: Vec<usize> = (content..d).map(|i| s2.sigma(i)).collect();
        from.sort_unstable();
        to.sort_unstable();
        for (x, y) in from.into_iter().zip(to) {
            sigma[x] = y;
        }
        perms.push(ComplexPermutation::new(sigma, phases).expect("u is a complex permutation"));
    }
    let u = AlgebraIsometry::new(target, perms).expect("sizes match");
    debug_assert!(
        h1.postcompose_isometry(&u).eq_on_units(h2, T::of(1e-12)),
        "alignment must reproduce h2 on matrix units"
    );
    Ok(u)
}

/// A homomorphism given in raw form: the image in each target summand of
/// every matrix unit of every source summand.
/// `images[k][j][i * c_j + l]` is the image of `e_{i,l}` of `M_{c_j}` in
/// `M_{d_k}`.
#[derive(Clone, Debug)]
pub struct RawHom<T: Real> {
    source: SsfdAlgebra<T>,
    target: SsfdAlgebra<T>,
    images: Vec<Vec<Vec<Matrix<T>>>>,
}

impl<T: Real> RawHom<T> {
    pub fn new(
        source: SsfdAlgebra<T>,
        target: SsfdAlgebra<T>,
        images: Vec<Vec<Vec<Matrix<T>>>>,
    ) -> Result<Self, HomError> {
        if source.p() != target.p() {
            return Err(HomError::ShapeMismatch("source and target exponents differ".into()));
        }
        if images.len() != target.summands().len() {
            return Err(HomError::ShapeMismatch("one image table per target summand".into()));
        }
        for (k, per_source) in images.iter().enumerate() {
            let d = target.summands()[k];
            if per_source.len() != source.summands().len() {
                return Err(HomError::ShapeMismatch("one image list per source summand".into()));
            }
            for (j, units) in per_source.iter().enumerate() {
                let c = source.summands()[j];
                if units.len() != c * c {
                    return Err(HomError::ShapeMismatch(format!(
                        "source summand {} needs {} unit images, got {}",
                        j,
                        c * c,
                        units.len()
                    )));
                }
                if units.iter().any(|m| m.rows() != d || m.cols() != d) {
                    return Err(HomError::ShapeMismatch(format!(
                        "unit images at target {} must be {}x{}",
                        k, d, d
                    )));
                }
            }
        }
        Ok(RawHom { source, target, images })
    }

    /// Renders a spatial homomorphism as unit images.
    pub fn from_hom(h: &SpatialHom<T>) -> Self {
        let source = h.source().clone();
        let target = h.target().clone();
        let mut images = Vec::with_capacity(target.summands().len());
        for k in 0..target.summands().len() {
            let mut per_source = Vec::with_capacity(source.summands().len());
            for j in 0..source.summands().len() {
                let c = source.summands()[j];
                let mut units = Vec::with_capacity(c * c);
                for i in 0..c {
                    for l in 0..c {
                        let e = source.matrix_unit(j, i, l);
                        units.push(apply_hom(h, &e).block(k).clone());
                    }
                }
                per_source.push(units);
            }
            images.push(per_source);
        }
        RawHom { source, target, images }
    }

    pub fn source(&self) -> &SsfdAlgebra<T> {
        &self.source
    }

    pub fn target(&self) -> &SsfdAlgebra<T> {
        &self.target
    }

    pub fn image(&self, k: usize, j: usize, i: usize, l: usize) -> &Matrix<T> {
        &self.images[k][j][i * self.source.summands()[j] + l]
    }
}

/// Support of a diagonal 0/1 matrix within `tol`, or `None` if the matrix is
/// not diagonal 0/1.
fn diag01_support<T: Real>(m: &Matrix<T>, tol: T) -> Option<Vec<usize>> {
    let d = m.rows();
    let mut support = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let z = m[(i, j)];
            if i == j {
                let to1 = (z - Complex::new(T::one(), T::zero())).norm();
                if to1 <= tol {
                    support.push(i);
                } else if z.norm() > tol {
                    return None;
                }
            } else if z.norm() > tol {
                return None;
            }
        }
    }
    Some(support)
}

/// Decides whether a raw homomorphism is spatial and, if so, returns its
/// canonical form. Verifies the matrix-unit relations within 1e-9, computes
/// multiplicities from ranks of the summand-unit images (rank = rounded trace
/// of a verified idempotent), builds the canonical intertwiner column by
/// column from the ranges of the `e_{1,1}` images, and accepts iff that
/// intertwiner is a complex permutation reproducing `raw` within 1e-8.
/// Complete for exact inputs; tolerance-sensitive for perturbed ones.
pub fn decompose_spatial<T: Real>(raw: &RawHom<T>) -> Result<SpatialHom<T>, HomError> {
    let source = raw.source.clone();
    let target = raw.target.clone();
    let tol = T::of(RAW_HOM_TOL);
    let ns = source.summands().len();

    // Matrix-unit relations within each source summand, per target summand.
    for k in 0..target.summands().len() {
        let d = target.summands()[k];
        for j in 0..ns {
            let c = source.summands()[j];
            for i in 0..c {
                for l in 0..c {
                    for i2 in 0..c {
                        for l2 in 0..c {
                            let prod = raw.image(k, j, i, l).mul(raw.image(k, j, i2, l2));
                            let expect = if l == i2 {
                                raw.image(k, j, i, l2).clone()
                            } else {
                                Matrix::zeros(d, d)
                            };
                            if prod.distance(&expect) > tol {
                                return Err(HomError::NotAHomomorphism(format!(
                                    "unit relation fails at target {}, source {}: e({},{}) e({},{})",
                                    k, j, i, l, i2, l2
                                )));
                            }
                        }
                    }
                }
            }
        }
        // Images of different source summands must multiply to zero.
        for j in 0..ns {
            for j2 in 0..ns {
                if j == j2 {
                    continue;
                }
                let c = source.summands()[j];
                let c2 = source.summands()[j2];
                for u in 0..c * c {
                    for v in 0..c2 * c2 {
                        let prod = raw.images[k][j][u].mul(&raw.images[k][j2][v]);
                        if prod.max_abs() > tol {
                            return Err(HomError::NotAHomomorphism(format!(
                                "images of source summands {} and {} are not orthogonal at target {}",
                                j, j2, k
                            )));
                        }
                    }
                }
            }
        }
    }

    // Multiplicities from ranks; rank of a verified idempotent is its trace.
    let mut m = MultiplicityMatrix::zeros(target.summands().len(), ns);
    for k in 0..target.summands().len() {
        for j in 0..ns {
            let c = source.summands()[j];
            let mut unit_image = Matrix::zeros(target.summands()[k], target.summands()[k]);
            for i in 0..c {
                unit_image = unit_image.add(raw.image(k, j, i, i));
            }
            let tr = unit_image.trace().re.as_f64();
            let rank = tr.round() as i64;
            if (tr - rank as f64).abs() > 1e-6 {
                return Err(HomError::NotAHomomorphism(format!(
                    "summand-unit image at target {}, source {} has non-integer rank {}",
                    k, j, tr
                )));
            }
            if rank % c as i64 != 0 {
                return Err(HomError::RankNotDivisible {
                    target_index: k,
                    source_index: j,
                    rank,
                    size: c,
                });
            }
            m.set(k, j, rank / c as i64);
        }
    }
    let block = block_hom_from_multiplicity(&m, &source, &target)
        .map_err(|_| HomError::NotSpatial("ranks exceed the target block sizes".into()))?;

    // Canonical intertwiner: for a spatial raw hom, each e_{1,1} image is a
    // diagonal 0/1 idempotent whose support coordinates seed the slot columns.
    let spatial_tol = T::of(DECOMPOSE_TOL);
    let mut perms = Vec::with_capacity(target.summands().len());
    for k in 0..target.summands().len() {
        let d = target.summands()[k];
        let mut s = Matrix::zeros(d, d);
        let mut col = 0usize;
        let mut unit_total = Matrix::zeros(d, d);
        for j in 0..ns {
            let c = source.summands()[j];
            for i in 0..c {
                unit_total = unit_total.add(raw.image(k, j, i, i));
            }
            if m.get(k, j) == 0 {
                continue;
            }
            let f = raw.image(k, j, 0, 0);
            let support = diag01_support(f, spatial_tol).ok_or_else(|| {
                HomError::NotSpatial(format!(
                    "image of e_(1,1) at target {}, source {} is not diagonal 0/1",
                    k, j
                ))
            })?;
            if support.len() != m.get(k, j) as usize {
                return Err(HomError::NotSpatial(format!(
                    "support size disagrees with rank at target {}, source {}",
                    k, j
                )));
            }
            for &x in &support {
                for i in 0..c {
                    let column = raw.image(k, j, i, 0).column(x);
                    for (row, z) in column.into_iter().enumerate() {
                        s[(row, col + i)] = z;
                    }
                }
                col += c;
            }
        }
        let pad = Matrix::identity(d).sub(&unit_total);
        let pad_support = diag01_support(&pad, spatial_tol).ok_or_else(|| {
            HomError::NotSpatial(format!("unit image at target {} is not diagonal 0/1", k))
        })?;
        for &x in &pad_support {
            s[(x, col)] = Complex::new(T::one(), T::zero());
            col += 1;
        }
        if col != d {
            return Err(HomError::NotSpatial(format!(
                "intertwiner at target {} has {} columns for size {}",
                k, col, d
            )));
        }
        let perm = as_complex_permutation(&s, spatial_tol).map_err(|e| {
            HomError::NotSpatial(format!("intertwiner at target {} is not a complex permutation: {}", k, e))
        })?;
        perms.push(perm);
    }
    let similarity = AlgebraIsometry::new(target.clone(), perms).expect("sizes match");
    let hom = SpatialHom { block, similarity };

    // Reproduction check: the decomposition must give back the raw images.
    for j in 0..ns {
        let c = source.summands()[j];
        for i in 0..c {
            for l in 0..c {
                let img = apply_hom(&hom, &source.matrix_unit(j, i, l));
                for k in 0..target.summands().len() {
                    if img.block(k).distance(raw.image(k, j, i, l)) > spatial_tol {
                        return Err(HomError::NotSpatial(format!(
                            "decomposition does not reproduce the image of unit ({}, {}) of source {}",
                            i, l, j
                        )));
                    }
                }
            }
        }
    }
    Ok(hom)
}

/// Random generators shared by the unit tests of several modules.
#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_element(a: &SsfdAlgebra<f64>, rng: &mut ChaCha8Rng) -> AlgebraElement<f64> {
        let blocks = a
            .summands()
            .iter()
            .map(|&d| {
                Matrix::from_fn(d, d, |_, _| {
                    Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
            })
            .collect();
        AlgebraElement::new(a.clone(), blocks).unwrap()
    }

    fn random_hom_with(
        a: &SsfdAlgebra<f64>,
        rng: &mut ChaCha8Rng,
        min_mult: i64,
        max_mult: i64,
        slack: usize,
    ) -> SpatialHom<f64> {
        let nt = rng.gen_range(1..=3);
        let mut rows = Vec::new();
        let mut sizes = Vec::new();
        for _ in 0..nt {
            let row: Vec<i64> =
                (0..a.summands().len()).map(|_| rng.gen_range(min_mult..=max_mult)).collect();
            let need: usize = row
                .iter()
                .zip(a.summands())
                .map(|(&m, &c)| m as usize * c)
                .sum();
            sizes.push((need + rng.gen_range(0..=slack)).max(1));
            rows.push(row);
        }
        let b = SsfdAlgebra::new(a.p(), sizes).unwrap();
        let rows_m = MultiplicityMatrix::from_rows(&rows).unwrap();
        let block = block_hom_from_multiplicity(&rows_m, a, &b).unwrap();
        let sim = AlgebraIsometry::random(&b, rng);
        SpatialHom::new(block, sim).unwrap()
    }

    /// Random spatial hom A -> B where B is sized to satisfy the criterion.
    pub(crate) fn random_hom(
        a: &SsfdAlgebra<f64>,
        rng: &mut ChaCha8Rng,
        max_mult: i64,
        slack: usize,
    ) -> SpatialHom<f64> {
        random_hom_with(a, rng, 0, max_mult, slack)
    }

    /// Random spatial hom with every multiplicity at least one, so the map
    /// is injective (and hence isometric).
    pub(crate) fn random_injective_hom(
        a: &SsfdAlgebra<f64>,
        rng: &mut ChaCha8Rng,
        max_mult: i64,
        slack: usize,
    ) -> SpatialHom<f64> {
        random_hom_with(a, rng, 1, max_mult, slack)
    }
}
