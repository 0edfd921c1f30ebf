//! `lpaf` — command-line front end for the spatial Lp AF algebra toolkit.
//!
//! Every command reads JSON documents, prints a single deterministic JSON
//! report on standard output, and signals its outcome through the exit code:
//! 0 success (including an Isomorphic verdict), 2 a search that exhausted
//! its depth bound, 3 invalid input, 4 an exhausted node budget.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use lpaf::algebra::random_element;
use lpaf::bratteli::{approximate_identity_defect, group_system_of, injectivize};
use lpaf::classify::{
    find_intertwining, ladder_to_algebra_iso, one_sided_extend, realize_system, verify_witness,
    ClassifyError, OneSidedVerdict, SearchVerdict, DEFAULT_BUDGET, DEFAULT_DEPTH,
};
use lpaf::homs::{apply_hom, decompose_spatial, MultiplicityMatrix, RawHom};
use lpaf::ktheory::{k0_of_algebra, k1_of_algebra, riesz_report, PositiveContractiveMap};
use lpaf::pnorm::{NormOptions, PExponent};
use lpaf::sysfile::{
    group_to_value, hom_to_value, parse_element, parse_group, parse_system, system_to_value,
};
use lpaf::algebra::element_norm;
use lpaf::System;

#[derive(Parser)]
#[command(
    name = "lpaf",
    version,
    about = "Desk-scale numerics and classification for spatial Lp AF algebras"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the scaled ordered K0 group system of an algebra system file
    /// (K1 vanishes identically and is annotated as 0).
    K0 {
        /// Algebra system file.
        file: PathBuf,
    },
    /// Estimate the p->p operator norm of an element at one level of a
    /// system.
    Norm {
        /// Algebra system file.
        file: PathBuf,
        /// Level index of the element's algebra.
        #[arg(long, default_value_t = 0)]
        level: usize,
        /// Element document: inline JSON, or @PATH to read a file. One
        /// square matrix per summand; entries are numbers or [re, im].
        #[arg(long)]
        element: String,
        /// Convergence tolerance for the norm iteration.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Seed for the random starts.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Audit a system file: hermitian units, spatial decomposability of the
    /// connecting maps, approximate-identity defect, and the Riesz axioms
    /// of K0 at the horizon.
    Check {
        /// Algebra system file.
        file: PathBuf,
        /// Sample count for the randomized audits.
        #[arg(long, default_value_t = 25)]
        samples: usize,
        /// Seed for the randomized audits.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Numeric tolerance for the hermitian and defect audits.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Search for a bounded intertwining ladder between two systems; on
    /// success, lift it to an algebra-level witness and verify it.
    Isomorphic {
        /// First algebra system file.
        file1: PathBuf,
        /// Second algebra system file.
        file2: PathBuf,
        /// Maximum ladder depth.
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
        /// Node budget for the search.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Samples per rung and matrix level in witness verification.
        #[arg(long, default_value_t = 2)]
        samples: usize,
        /// Seed for witness verification sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Convergence tolerance for the norm iterations.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Realize a group system document as a spatial algebra system file.
    Realize {
        /// Group system file (the output of `k0` is accepted).
        groupfile: PathBuf,
        /// Exponent of the target algebras (p = 2 is excluded).
        #[arg(long)]
        p: f64,
        /// Also write the document to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drop dead summands so that every connecting map is injective.
    Injectivize {
        /// Algebra system file.
        file: PathBuf,
        /// Also write the document to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extend a positive contractive map one-sidedly through deeper levels
    /// of two systems.
    IntertwineOneSided {
        /// Source algebra system file.
        file1: PathBuf,
        /// Target algebra system file.
        file2: PathBuf,
        /// Multiplicity matrix of the starting map, as inline JSON rows
        /// (e.g. "[[3]]") or @PATH.
        #[arg(long)]
        mult: String,
        /// Source level of the starting map.
        #[arg(long, default_value_t = 0)]
        m0: usize,
        /// Target level of the starting map.
        #[arg(long, default_value_t = 0)]
        n0: usize,
        /// Number of additional rungs to construct.
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
        /// Node budget for the search.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
    },
}

/// A failure that terminates the command: message to stderr, code as exit.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn invalid(msg: impl Into<String>) -> Self {
        Failure { code: 3, msg: msg.into() }
    }
}

fn read_file(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::invalid(format!("{}: {}", path.display(), e)))
}

fn load_system(path: &PathBuf) -> Result<System, Failure> {
    let text = read_file(path)?;
    parse_system(&text, &path.display().to_string()).map_err(|e| Failure::invalid(e.to_string()))
}

/// Inline JSON, or the contents of a file when the argument is `@PATH`.
fn inline_or_file(arg: &str) -> Result<(String, String), Failure> {
    if let Some(path) = arg.strip_prefix('@') {
        let p = PathBuf::from(path);
        Ok((read_file(&p)?, path.to_string()))
    } else {
        Ok((arg.to_string(), "<inline>".to_string()))
    }
}

fn emit(doc: &Value) {
    println!("{}", serde_json::to_string_pretty(doc).expect("reports serialize"));
}

fn write_out(doc: &Value, out: &Option<PathBuf>) -> Result<(), Failure> {
    if let Some(path) = out {
        let text = serde_json::to_string_pretty(doc).expect("reports serialize");
        std::fs::write(path, text + "\n")
            .map_err(|e| Failure::invalid(format!("{}: {}", path.display(), e)))?;
    }
    Ok(())
}

fn norm_options(tol: f64, seed: u64) -> NormOptions {
    NormOptions { tol, seed, ..NormOptions::default() }
}

fn cmd_k0(file: &PathBuf) -> Result<u8, Failure> {
    let sys = load_system(file)?;
    let group = group_system_of(&sys);
    let mut doc = group_to_value(&group);
    // K1 of every finite stage, hence of the system, is the zero group.
    doc["k1"] = json!(sys.levels().first().map(k1_of_algebra).unwrap_or(0));
    if let Some(c) = sys.caveat() {
        doc["caveat"] = serde_json::to_value(c).expect("caveat serializes");
    }
    emit(&doc);
    Ok(0)
}

fn cmd_norm(
    file: &PathBuf,
    level: usize,
    element: &str,
    tol: f64,
    seed: u64,
) -> Result<u8, Failure> {
    let sys = load_system(file)?;
    if sys.is_empty() || level > sys.horizon() {
        return Err(Failure::invalid(format!("level {} is outside the system", level)));
    }
    let (text, origin) = inline_or_file(element)?;
    let x = parse_element(&text, &sys.levels()[level], &origin)
        .map_err(|e| Failure::invalid(e.to_string()))?;
    let est = element_norm(&x, &norm_options(tol, seed));
    emit(&json!({
        "command": "norm",
        "level": level,
        "p": sys.p().value(),
        "estimate": est,
    }));
    Ok(0)
}

fn cmd_check(file: &PathBuf, samples: usize, seed: u64, tol: f64) -> Result<u8, Failure> {
    let sys = load_system(file)?;
    let opts = norm_options(1e-8, seed);
    let mut audits: Vec<Value> = Vec::new();
    let mut all = true;

    // Hermitian audit: each connecting map sends the unit to a hermitian
    // idempotent.
    let mut herm_fails: Vec<String> = Vec::new();
    for (i, h) in sys.maps().iter().enumerate() {
        let img = apply_hom(h, &sys.levels()[i].unit());
        if !img.is_hermitian_idempotent(tol) {
            herm_fails.push(format!("map {} sends the unit off the hermitian idempotents", i));
        }
    }
    all &= herm_fails.is_empty();
    audits.push(json!({
        "name": "hermitian-units",
        "passed": herm_fails.is_empty(),
        "details": herm_fails,
    }));

    // Spatiality audit. Small maps are rendered as raw images of matrix
    // units and decomposed back into canonical spatial form, a complete
    // check; the full relation verification costs on the order of
    // (sum c^2)^2 * sum d^3 operations, so large maps are audited by sampled
    // multiplicativity instead.
    let mut spatial_fails: Vec<String> = Vec::new();
    let mut spatial_notes: Vec<String> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (i, h) in sys.maps().iter().enumerate() {
        let unit_cells: u64 =
            h.source().summands().iter().map(|&c| (c * c) as u64).sum();
        let cubes: u64 = h.target().summands().iter().map(|&d| (d * d * d) as u64).sum();
        if unit_cells * unit_cells * cubes.max(1) <= 200_000_000 {
            match decompose_spatial(&RawHom::from_hom(h)) {
                Ok(recovered) => {
                    if !recovered.eq_on_units(h, 1e-8) {
                        spatial_fails
                            .push(format!("map {} decomposition does not reproduce it", i));
                    }
                }
                Err(e) => spatial_fails.push(format!("map {}: {}", i, e)),
            }
        } else {
            spatial_notes.push(format!(
                "map {} is too large for full decomposition; checked multiplicativity on samples",
                i
            ));
            for _ in 0..8 {
                let x = random_element(h.source(), &mut rng);
                let y = random_element(h.source(), &mut rng);
                let lhs = apply_hom(h, &x.mul(&y));
                let rhs = apply_hom(h, &x).mul(&apply_hom(h, &y));
                let scale = 1.0 + x.mul(&y).blocks().iter().map(|b| b.max_abs()).fold(0.0, f64::max);
                if lhs.distance(&rhs) > 1e-9 * scale {
                    spatial_fails.push(format!("map {} is not multiplicative on a sample", i));
                    break;
                }
            }
        }
    }
    all &= spatial_fails.is_empty();
    spatial_notes.extend(spatial_fails.iter().cloned());
    audits.push(json!({
        "name": "spatiality",
        "passed": spatial_fails.is_empty(),
        "details": spatial_notes,
    }));

    // Approximate identity audit at the horizon.
    if sys.is_empty() {
        audits.push(json!({
            "name": "approximate-identity",
            "passed": true,
            "details": ["empty system: nothing to check"],
        }));
    } else {
        let defect = approximate_identity_defect(&sys, sys.horizon(), samples, seed, &opts);
        let passed = defect <= tol;
        all &= passed;
        audits.push(json!({
            "name": "approximate-identity",
            "passed": passed,
            "defect": defect,
        }));
    }

    // Riesz audit on K0 of the horizon level.
    if sys.is_empty() {
        audits.push(json!({
            "name": "riesz",
            "passed": true,
            "details": ["empty system: nothing to check"],
        }));
    } else {
        let g = k0_of_algebra(&sys.levels()[sys.horizon()]);
        let report = riesz_report(&g, samples, seed);
        let passed = report.all_passed();
        all &= passed;
        audits.push(json!({
            "name": "riesz",
            "passed": passed,
            "report": report,
        }));
    }

    emit(&json!({
        "command": "check",
        "all_passed": all,
        "audits": audits,
    }));
    Ok(0)
}

fn cmd_isomorphic(
    file1: &PathBuf,
    file2: &PathBuf,
    depth: usize,
    budget: u64,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<u8, Failure> {
    let asys = load_system(file1)?;
    let bsys = load_system(file2)?;
    if asys.p() != bsys.p() {
        return Err(Failure::invalid(
            "the two systems carry different exponents; no isometric comparison is possible",
        ));
    }
    let g = group_system_of(&asys);
    let h = group_system_of(&bsys);
    match find_intertwining(&g, &h, depth, budget) {
        Ok(SearchVerdict::Isomorphic(ladder)) => {
            let witness = ladder_to_algebra_iso(&ladder, &asys, &bsys)
                .map_err(|e| Failure::invalid(e.to_string()))?;
            let report =
                verify_witness(&witness, &asys, &bsys, samples, 3, seed, &norm_options(tol, seed));
            emit(&json!({
                "command": "isomorphic",
                "verdict": "isomorphic",
                "depth": ladder.depth(),
                "ladder": ladder,
                "witness": {
                    "phi": witness.phi().iter().map(hom_to_value).collect::<Vec<_>>(),
                    "psi": witness.psi().iter().map(hom_to_value).collect::<Vec<_>>(),
                },
                "verification": report,
            }));
            Ok(0)
        }
        Ok(SearchVerdict::NotWithinBound { depth, nodes_explored }) => {
            emit(&json!({
                "command": "isomorphic",
                "verdict": "not-within-bound",
                "depth": depth,
                "nodes_explored": nodes_explored,
            }));
            Ok(2)
        }
        Err(ClassifyError::BudgetExhausted { nodes }) => {
            emit(&json!({
                "command": "isomorphic",
                "verdict": "budget-exhausted",
                "nodes": nodes,
            }));
            Ok(4)
        }
        Err(e) => Err(Failure::invalid(e.to_string())),
    }
}

fn cmd_realize(groupfile: &PathBuf, p: f64, out: &Option<PathBuf>) -> Result<u8, Failure> {
    let text = read_file(groupfile)?;
    let g = parse_group(&text, &groupfile.display().to_string())
        .map_err(|e| Failure::invalid(e.to_string()))?;
    let pexp = PExponent::new(p).map_err(|e| Failure::invalid(e.to_string()))?;
    let sys = realize_system(&g, pexp).map_err(|e| Failure::invalid(e.to_string()))?;
    let doc = system_to_value(&sys);
    write_out(&doc, out)?;
    emit(&doc);
    Ok(0)
}

fn cmd_injectivize(file: &PathBuf, out: &Option<PathBuf>) -> Result<u8, Failure> {
    let sys = load_system(file)?;
    let doc = system_to_value(&injectivize(&sys));
    write_out(&doc, out)?;
    emit(&doc);
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_intertwine_one_sided(
    file1: &PathBuf,
    file2: &PathBuf,
    mult: &str,
    m0: usize,
    n0: usize,
    depth: usize,
    budget: u64,
) -> Result<u8, Failure> {
    let asys = load_system(file1)?;
    let bsys = load_system(file2)?;
    let g = group_system_of(&asys);
    let h = group_system_of(&bsys);
    if g.is_empty() || h.is_empty() || m0 > g.horizon() || n0 > h.horizon() {
        return Err(Failure::invalid("starting levels are outside the systems"));
    }
    let (text, origin) = inline_or_file(mult)?;
    let rows: Vec<Vec<i64>> = serde_json::from_str(&text)
        .map_err(|e| Failure::invalid(format!("{}: {}", origin, e)))?;
    let matrix = MultiplicityMatrix::from_rows(&rows)
        .map_err(|e| Failure::invalid(format!("{}: {}", origin, e)))?;
    let f0 =
        PositiveContractiveMap::new(g.levels()[m0].clone(), h.levels()[n0].clone(), matrix)
            .map_err(|e| Failure::invalid(format!("{}: {}", origin, e)))?;
    match one_sided_extend(&f0, m0, n0, &g, &h, depth, budget) {
        Ok(OneSidedVerdict::Extended(family)) => {
            emit(&json!({
                "command": "intertwine-one-sided",
                "verdict": "extended",
                "family": family,
            }));
            Ok(0)
        }
        Ok(OneSidedVerdict::NotWithinBound { depth, nodes_explored }) => {
            emit(&json!({
                "command": "intertwine-one-sided",
                "verdict": "not-within-bound",
                "depth": depth,
                "nodes_explored": nodes_explored,
            }));
            Ok(2)
        }
        Err(ClassifyError::BudgetExhausted { nodes }) => {
            emit(&json!({
                "command": "intertwine-one-sided",
                "verdict": "budget-exhausted",
                "nodes": nodes,
            }));
            Ok(4)
        }
        Err(e) => Err(Failure::invalid(e.to_string())),
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match &cli.cmd {
        Cmd::K0 { file } => cmd_k0(file),
        Cmd::Norm { file, level, element, tol, seed } => {
            cmd_norm(file, *level, element, *tol, *seed)
        }
        Cmd::Check { file, samples, seed, tol } => cmd_check(file, *samples, *seed, *tol),
        Cmd::Isomorphic { file1, file2, depth, budget, samples, seed, tol } => {
            cmd_isomorphic(file1, file2, *depth, *budget, *samples, *seed, *tol)
        }
        Cmd::Realize { groupfile, p, out } => cmd_realize(groupfile, *p, out),
        Cmd::Injectivize { file, out } => cmd_injectivize(file, out),
        Cmd::IntertwineOneSided { file1, file2, mult, m0, n0, depth, budget } => {
            cmd_intertwine_one_sided(file1, file2, mult, *m0, *n0, *depth, *budget)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
