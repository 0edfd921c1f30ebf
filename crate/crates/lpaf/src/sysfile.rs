//! JSON documents for algebra systems, group systems and elements, shared by
//! the library and the command-line tool.
//!
//! An algebra system document has fields `p` (real exponent), `levels` (array
//! of arrays of positive block sizes), `maps` (one object per consecutive
//! pair of levels) and an optional `caveat`. Each map object carries `mult`,
//! the integer multiplicity matrix indexed `[target][source]`; an optional
//! `order` giving explicit 1-based source slot lists per target summand,
//! overriding the canonical nondecreasing order; and an optional `similarity`
//! listing, per target summand, a 1-based `perm` and unimodular `phases` as
//! `[re, im]` pairs. A group document has `levels` (arrays of positive scale
//! entries) and `maps` (objects with `mult` only); unknown fields such as the
//! `k1` annotation emitted by the `k0` command are ignored, so such output is
//! itself a valid group document.
//!
//! All parse errors carry a location: either a line/column for malformed
//! JSON or a dotted field path for semantic violations.

use num_complex::Complex;
use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::algebra::{AlgebraElement, AlgebraIsometry, ComplexPermutation, SsfdAlgebra};
use crate::bratteli::{AlgebraDirectSystem, GroupDirectSystem, TruncationCaveat};
use crate::homs::{block_hom_from_multiplicity, multiplicity_of, MultiplicityMatrix, SpatialHom};
use crate::ktheory::{PositiveContractiveMap, ScaledZGroup};
use crate::matrix::Matrix;
use crate::pnorm::PExponent;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{origin}: line {line}, column {column}: {msg}")]
    Syntax { origin: String, line: usize, column: usize, msg: String },
    #[error("{origin}: {location}: {msg}")]
    Invalid { origin: String, location: String, msg: String },
}

impl FileError {
    fn invalid(origin: &str, location: impl Into<String>, msg: impl Into<String>) -> Self {
        FileError::Invalid { origin: origin.to_string(), location: location.into(), msg: msg.into() }
    }

    fn syntax(origin: &str, err: &serde_json::Error) -> Self {
        FileError::Syntax {
            origin: origin.to_string(),
            line: err.line(),
            column: err.column(),
            msg: err.to_string(),
        }
    }
}

#[derive(Deserialize)]
struct RawSimilarity {
    perm: Vec<usize>,
    phases: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
struct RawMap {
    mult: Vec<Vec<i64>>,
    #[serde(default)]
    order: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    similarity: Option<Vec<RawSimilarity>>,
}

#[derive(Deserialize)]
struct RawSystem {
    p: f64,
    levels: Vec<Vec<usize>>,
    maps: Vec<RawMap>,
    #[serde(default)]
    caveat: Option<TruncationCaveat>,
}

#[derive(Deserialize)]
struct RawGroupMap {
    mult: Vec<Vec<i64>>,
}

#[derive(Deserialize)]
struct RawGroup {
    levels: Vec<Vec<i64>>,
    maps: Vec<RawGroupMap>,
}

fn mult_from_raw(
    raw: &[Vec<i64>],
    src_rank: usize,
    tgt_rank: usize,
    origin: &str,
    location: &str,
) -> Result<MultiplicityMatrix, FileError> {
    if raw.len() != tgt_rank {
        return Err(FileError::invalid(
            origin,
            location,
            format!("expected {} rows, found {}", tgt_rank, raw.len()),
        ));
    }
    if let Some(row) = raw.iter().find(|row| row.len() != src_rank) {
        return Err(FileError::invalid(
            origin,
            location,
            format!("expected {} columns, found a row of {}", src_rank, row.len()),
        ));
    }
    MultiplicityMatrix::from_rows(raw)
        .map_err(|e| FileError::invalid(origin, location, e.to_string()))
}

/// Permutation realizing `diag(given order) = P diag(canonical order) P^{-1}`
/// for one target summand: content blocks are matched stably, padding stays
/// fixed.
fn order_permutation<T: Real>(
    target_dim: usize,
    given: &[usize],
    sizes: &[usize],
) -> ComplexPermutation<T> {
    let n = given.len();
    let mut off_given = vec![0usize; n + 1];
    for t in 0..n {
        off_given[t + 1] = off_given[t] + sizes[given[t]];
    }
    let mut canon: Vec<usize> = (0..n).collect();
    canon.sort_by_key(|&t| (given[t], t));
    let mut sigma: Vec<usize> = (0..target_dim).collect();
    let mut off_canon = 0usize;
    for &t in &canon {
        for l in 0..sizes[given[t]] {
            sigma[off_canon + l] = off_given[t] + l;
        }
        off_canon += sizes[given[t]];
    }
    let phases = vec![Complex::new(T::one(), T::zero()); target_dim];
    ComplexPermutation::new(sigma, phases).expect("constructed a bijection")
}

fn hom_from_raw<T: Real>(
    raw: &RawMap,
    src: &SsfdAlgebra<T>,
    tgt: &SsfdAlgebra<T>,
    origin: &str,
    loc: &str,
) -> Result<SpatialHom<T>, FileError> {
    let mult = mult_from_raw(
        &raw.mult,
        src.summands().len(),
        tgt.summands().len(),
        origin,
        &format!("{loc}.mult"),
    )?;
    let block = block_hom_from_multiplicity(&mult, src, tgt)
        .map_err(|e| FileError::invalid(origin, format!("{loc}.mult"), e.to_string()))?;

    let mut perms: Vec<ComplexPermutation<T>> = tgt
        .summands()
        .iter()
        .map(|&d| ComplexPermutation::identity(d))
        .collect();

    if let Some(order) = &raw.order {
        if order.len() != tgt.summands().len() {
            return Err(FileError::invalid(
                origin,
                format!("{loc}.order"),
                format!("expected {} slot lists, found {}", tgt.summands().len(), order.len()),
            ));
        }
        for (k, slots) in order.iter().enumerate() {
            let where_ = format!("{loc}.order[{k}]");
            let mut counts = vec![0i64; src.summands().len()];
            let mut zero_based = Vec::with_capacity(slots.len());
            for &s in slots {
                if s == 0 || s > src.summands().len() {
                    return Err(FileError::invalid(
                        origin,
                        where_,
                        format!("source index {} out of range (1-based)", s),
                    ));
                }
                counts[s - 1] += 1;
                zero_based.push(s - 1);
            }
            if counts != mult.row(k) {
                return Err(FileError::invalid(
                    origin,
                    where_,
                    "slot multiset disagrees with the mult row",
                ));
            }
            perms[k] = order_permutation(tgt.summands()[k], &zero_based, src.summands());
        }
    }

    if let Some(sim) = &raw.similarity {
        if sim.len() != tgt.summands().len() {
            return Err(FileError::invalid(
                origin,
                format!("{loc}.similarity"),
                format!("expected {} entries, found {}", tgt.summands().len(), sim.len()),
            ));
        }
        for (k, s) in sim.iter().enumerate() {
            let where_ = format!("{loc}.similarity[{k}]");
            let d = tgt.summands()[k];
            if s.perm.len() != d || s.phases.len() != d {
                return Err(FileError::invalid(
                    origin,
                    where_,
                    format!("perm and phases must each have {} entries", d),
                ));
            }
            let mut sigma = Vec::with_capacity(d);
            for &j in &s.perm {
                if j == 0 || j > d {
                    return Err(FileError::invalid(
                        origin,
                        where_,
                        format!("perm entry {} out of range (1-based)", j),
                    ));
                }
                sigma.push(j - 1);
            }
            let phases: Vec<Complex<T>> =
                s.phases.iter().map(|&[re, im]| Complex::new(T::of(re), T::of(im))).collect();
            let given = ComplexPermutation::new(sigma, phases)
                .map_err(|e| FileError::invalid(origin, where_, e.to_string()))?;
            perms[k] = given.compose(&perms[k]);
        }
    }

    let similarity = AlgebraIsometry::new(tgt.clone(), perms)
        .expect("permutation sizes match the target by construction");
    SpatialHom::new(block, similarity)
        .map_err(|e| FileError::invalid(origin, loc, e.to_string()))
}

/// Parses an algebra system document. `origin` names the source (for error
/// messages); typically a file path.
pub fn parse_system<T: Real>(
    text: &str,
    origin: &str,
) -> Result<AlgebraDirectSystem<T>, FileError> {
    let raw: RawSystem =
        serde_json::from_str(text).map_err(|e| FileError::syntax(origin, &e))?;
    let p = PExponent::new(T::of(raw.p))
        .map_err(|e| FileError::invalid(origin, "p", e.to_string()))?;
    let mut levels = Vec::with_capacity(raw.levels.len());
    for (i, sizes) in raw.levels.iter().enumerate() {
        levels.push(
            SsfdAlgebra::new(p, sizes.clone())
                .map_err(|e| FileError::invalid(origin, format!("levels[{i}]"), e.to_string()))?,
        );
    }
    if raw.maps.len() + 1 != raw.levels.len().max(1) {
        return Err(FileError::invalid(
            origin,
            "maps",
            format!(
                "{} levels require {} maps, found {}",
                raw.levels.len(),
                raw.levels.len().saturating_sub(1),
                raw.maps.len()
            ),
        ));
    }
    let mut maps = Vec::with_capacity(raw.maps.len());
    for (i, m) in raw.maps.iter().enumerate() {
        maps.push(hom_from_raw(m, &levels[i], &levels[i + 1], origin, &format!("maps[{i}]"))?);
    }
    let sys = AlgebraDirectSystem::new(p, levels, maps)
        .map_err(|e| FileError::invalid(origin, "maps", e.to_string()))?;
    Ok(match raw.caveat {
        Some(c) => sys.with_caveat(c),
        None => sys,
    })
}

/// Parses a group system document (`levels` of scales, `maps` of `mult`
/// matrices). Unknown fields are ignored.
pub fn parse_group(text: &str, origin: &str) -> Result<GroupDirectSystem, FileError> {
    let raw: RawGroup = serde_json::from_str(text).map_err(|e| FileError::syntax(origin, &e))?;
    let mut levels = Vec::with_capacity(raw.levels.len());
    for (i, scale) in raw.levels.iter().enumerate() {
        levels.push(
            ScaledZGroup::new(scale.clone())
                .map_err(|e| FileError::invalid(origin, format!("levels[{i}]"), e.to_string()))?,
        );
    }
    if raw.maps.len() + 1 != raw.levels.len().max(1) {
        return Err(FileError::invalid(
            origin,
            "maps",
            format!(
                "{} levels require {} maps, found {}",
                raw.levels.len(),
                raw.levels.len().saturating_sub(1),
                raw.maps.len()
            ),
        ));
    }
    let mut maps = Vec::with_capacity(raw.maps.len());
    for (i, m) in raw.maps.iter().enumerate() {
        let loc = format!("maps[{i}].mult");
        let mult = mult_from_raw(&m.mult, levels[i].rank(), levels[i + 1].rank(), origin, &loc)?;
        maps.push(
            PositiveContractiveMap::new(levels[i].clone(), levels[i + 1].clone(), mult)
                .map_err(|e| FileError::invalid(origin, loc.clone(), e.to_string()))?,
        );
    }
    GroupDirectSystem::new(levels, maps)
        .map_err(|e| FileError::invalid(origin, "maps", e.to_string()))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawEntry {
    Re(f64),
    Pair([f64; 2]),
}

impl RawEntry {
    fn complex<T: Real>(&self) -> Complex<T> {
        match *self {
            RawEntry::Re(x) => Complex::new(T::of(x), T::zero()),
            RawEntry::Pair([re, im]) => Complex::new(T::of(re), T::of(im)),
        }
    }
}

/// Parses an element document for the given algebra: one square matrix per
/// summand, entries either real numbers or `[re, im]` pairs.
pub fn parse_element<T: Real>(
    text: &str,
    algebra: &SsfdAlgebra<T>,
    origin: &str,
) -> Result<AlgebraElement<T>, FileError> {
    let raw: Vec<Vec<Vec<RawEntry>>> =
        serde_json::from_str(text).map_err(|e| FileError::syntax(origin, &e))?;
    if raw.len() != algebra.summands().len() {
        return Err(FileError::invalid(
            origin,
            "element",
            format!("expected {} blocks, found {}", algebra.summands().len(), raw.len()),
        ));
    }
    let mut blocks = Vec::with_capacity(raw.len());
    for (k, rows) in raw.iter().enumerate() {
        let d = algebra.summands()[k];
        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
            return Err(FileError::invalid(
                origin,
                format!("element[{k}]"),
                format!("expected a {d}x{d} matrix"),
            ));
        }
        blocks.push(Matrix::from_fn(d, d, |i, j| rows[i][j].complex()));
    }
    Ok(AlgebraElement::new(algebra.clone(), blocks).expect("shapes validated above"))
}

/// Renders one spatial homomorphism as a map object (`mult` plus
/// `similarity` when nontrivial), the same shape used inside system
/// documents.
pub fn hom_to_value<T: Real>(h: &SpatialHom<T>) -> Value {
    let mut map = json!({ "mult": multiplicity_of(h).to_rows() });
    if !h.similarity().is_identity() {
        let sims: Vec<Value> = h
            .similarity()
            .perms()
            .iter()
            .map(|perm| {
                let d = perm.size();
                let sigma: Vec<usize> = (0..d).map(|j| perm.sigma(j) + 1).collect();
                let phases: Vec<[f64; 2]> = (0..d)
                    .map(|j| {
                        let z = perm.phase(j);
                        [z.re.as_f64(), z.im.as_f64()]
                    })
                    .collect();
                json!({ "perm": sigma, "phases": phases })
            })
            .collect();
        map["similarity"] = Value::from(sims);
    }
    map
}

/// Renders an algebra system as a document accepted by [`parse_system`];
/// the round trip is exact.
pub fn system_to_value<T: Real>(s: &AlgebraDirectSystem<T>) -> Value {
    let mut doc = json!({
        "p": s.p().value().as_f64(),
        "levels": s.levels().iter().map(|a| a.summands().to_vec()).collect::<Vec<_>>(),
        "maps": s.maps().iter().map(hom_to_value).collect::<Vec<_>>(),
    });
    if let Some(c) = s.caveat() {
        doc["caveat"] = serde_json::to_value(c).expect("caveat serializes");
    }
    doc
}

/// Renders a group system as a document accepted by [`parse_group`].
pub fn group_to_value(g: &GroupDirectSystem) -> Value {
    serde_json::to_value(g).expect("group systems serialize")
}
