//! `skewcorner`: command-line front end for the skew-corner toolkit.
//!
//! Every subcommand prints a one-line summary on stdout and writes its JSON or
//! CSV outputs into `--out DIR` (or to stdout when no directory is given),
//! together with a run manifest. Exit codes: 0 success, 1 usage error,
//! 2 when a hard inequality verdict fails.

mod io;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use skewcorner::bohr::{build_bohr, certify_regular, find_regular_dilate, BohrSet};
use skewcorner::extremal::{
    branch_and_bound_s, brute_force_s, construct_behrend, construct_one_per_column, construct_single_column,
    sequence_csv, ExtremalResult, SearchConfig,
};
use skewcorner::grid::{
    count_skew_corners, find_six_point_config, find_skew_corner, lift_to_skew_instance, map_witness, OneDimSet,
    PointSet2,
};
use skewcorner::lab::InequalityVerdict;
use skewcorner::norms::{
    directional_norm_vertical, grid_norm, km_norm, mc_grid_norm, mc_km_norm, mc_vs_inner_product, u2_norm,
    u2_norm_2d, vs_norm,
};
use skewcorner::table::FunctionTable2;
use skewcorner::tracer::{iterate_theorem, run_increment, ConstantsOverride};

use io::{usage, Io, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "skewcorner", version, about = "Skew corners, Bohr sets, uniformity norms and the density-increment tracer")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct Common {
    /// Output directory (created if missing)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random choice
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo sample count
    #[arg(long, global = true, default_value_t = 10_000)]
    samples: u64,
    /// Worker threads (1 keeps runs bit-reproducible)
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Find a non-trivial skew corner in a point set
    Detect(InArg),
    /// Count the non-trivial skew corners of a point set
    Count(InArg),
    /// Lift a subset of [n] to its skew-corner instance
    Lift(InArg),
    /// Search a subset of [n] for the six-point configuration
    Sixcheck(InArg),
    /// Build, dilate and certify Bohr sets
    Bohr {
        #[command(subcommand)]
        op: BohrOp,
    },
    /// Evaluate a norm of a function table
    Norm(NormArgs),
    /// Run an inequality family over random or given instances
    Verify(VerifyArgs),
    /// Compute s(n), the largest skew-corner-free subset of [n]×[n]
    Extremal(ExtremalArgs),
    /// Emit a skew-corner-free construction
    Construct(ConstructArgs),
    /// Run one instrumented density-increment step
    TraceIncrement(TraceArgs),
    /// Iterate density-increment steps from a subset of [N]×[N]
    Iterate(IterateArgs),
}

#[derive(Args, Debug, Serialize)]
struct InArg {
    /// Input JSON file
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum BohrOp {
    /// Bohr(Γ, ρ) from a modulus, frequencies and a radius
    Build {
        #[arg(long)]
        n: usize,
        /// Comma-separated frequencies (empty for the whole group)
        #[arg(long, value_delimiter = ',')]
        freqs: Vec<i64>,
        #[arg(long)]
        radius: f64,
    },
    /// The dilate B_δ of a Bohr descriptor
    Dilate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        delta: f64,
    },
    /// Exact regularity certificate
    Certify {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// A δ ∈ [1/2, 1] with B_δ regular
    FindRegular {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum NormKind {
    /// U² of a single-row table (a function on Z/NZ)
    U2,
    /// Kelley–Meka norm of a single-row table
    Km,
    /// U² of a torus table
    U22d,
    /// Grid norm U_{k,ℓ}
    Grid,
    /// Vertical-segments norm VS_r(B, B')
    Vs,
    /// Vertical directional norm
    Directional,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum NormMethod {
    Exact,
    Mc,
}

#[derive(Args, Debug, Serialize)]
struct NormArgs {
    #[arg(long, value_enum)]
    kind: NormKind,
    /// Table as JSON ({"rows", "cols", "values"}) or CSV (by extension)
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 2)]
    r: u32,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    l: usize,
    /// Bohr descriptor for B (vs only)
    #[arg(long)]
    bohr: Option<PathBuf>,
    /// Bohr descriptor for B' (vs only)
    #[arg(long)]
    bohr_prime: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = NormMethod::Exact)]
    method: NormMethod,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    family: verify::Family,
    #[arg(long)]
    r: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "rprime")]
    r_prime: Option<u64>,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    l: usize,
    #[arg(long, default_value_t = 20)]
    instances: usize,
    /// Fixed instance size (modulus or table side)
    #[arg(long)]
    size: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ExtremalMode {
    Brute,
    Bnb,
}

#[derive(Args, Debug, Serialize)]
struct ExtremalArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value_t = ExtremalMode::Bnb)]
    mode: ExtremalMode,
    /// Time budget in seconds (branch and bound)
    #[arg(long, default_value_t = 60.0)]
    budget: f64,
    /// A known skew-corner-free set to start from
    #[arg(long)]
    incumbent: Option<PathBuf>,
    #[arg(long)]
    no_symmetry: bool,
    /// Solve every n' ≤ n and emit the sequence as CSV (n,s,witness_size,optimal)
    #[arg(long)]
    up_to: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ConstructKind {
    OnePerColumn,
    SingleColumn,
    /// Lift of a Behrend set in [n]
    Behrend,
}

#[derive(Args, Debug, Serialize)]
struct ConstructArgs {
    #[arg(long, value_enum)]
    kind: ConstructKind,
    #[arg(long)]
    n: usize,
}

#[derive(Args, Debug, Serialize)]
struct TraceArgs {
    /// Point set A on a cyclic domain
    #[arg(long = "in")]
    input: PathBuf,
    /// Bohr descriptor for B
    #[arg(long)]
    bohr: PathBuf,
    /// JSON array of the columns X (default: every element of B)
    #[arg(long)]
    columns: Option<PathBuf>,
    /// Constant overrides (JSON mirroring the constants record)
    #[arg(long)]
    constants: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct IterateArgs {
    /// Point set A on a grid domain
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    constants: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    max_steps: usize,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Detect(_) => "detect",
            Command::Count(_) => "count",
            Command::Lift(_) => "lift",
            Command::Sixcheck(_) => "sixcheck",
            Command::Bohr { .. } => "bohr",
            Command::Norm(_) => "norm",
            Command::Verify(_) => "verify",
            Command::Extremal(_) => "extremal",
            Command::Construct(_) => "construct",
            Command::TraceIncrement(_) => "trace-increment",
            Command::Iterate(_) => "iterate",
        }
    }
}

/// What a successful run reports back to `main`.
struct Finished {
    summary: String,
    hard_failure: bool,
}

impl Finished {
    fn ok(summary: impl Into<String>) -> Self {
        Self { summary: summary.into(), hard_failure: false }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(f) => {
            println!("{}", f.summary);
            ExitCode::from(if f.hard_failure { 2 } else { 0 })
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<Finished> {
    let c = &cli.common;
    if c.threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(c.threads).build_global()?;
    let mut io = Io::new(c.out.clone())?;
    let start = Instant::now();
    let finished = dispatch(&cli.command, c, &mut io)?;
    let manifest = RunManifest {
        subcommand: cli.command.name().to_string(),
        parameters: serde_json::to_value(&cli.command)?,
        seed: c.seed,
        input_digests: io.digests.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_secs: io::seconds(start.elapsed()),
    };
    io.write_manifest(&manifest)?;
    Ok(finished)
}

fn dispatch(cmd: &Command, c: &Common, io: &mut Io) -> Result<Finished> {
    match cmd {
        Command::Detect(a) => {
            let set: PointSet2 = io.read_json(&a.input)?;
            let w = find_skew_corner(&set);
            io.emit_json("detect.json", &w)?;
            Ok(Finished::ok(match w {
                None => "no skew corner".to_string(),
                Some(w) => format!("skew corner at (x, y) = ({}, {}), a = {}, y' = {}", w.x, w.y, w.a, w.y_prime),
            }))
        }
        Command::Count(a) => {
            let set: PointSet2 = io.read_json(&a.input)?;
            let k = count_skew_corners(&set);
            io.emit_json("count.json", &k)?;
            Ok(Finished::ok(format!("{k} skew corners")))
        }
        Command::Lift(a) => {
            let b: OneDimSet = io.read_json(&a.input)?;
            let lifted = lift_to_skew_instance(&b);
            io.emit_json("lifted.json", &lifted)?;
            Ok(Finished::ok(format!("lifted |B| = {} to {} points in [{}]²", b.len(), lifted.len(), lifted.domain().size)))
        }
        Command::Sixcheck(a) => sixcheck(io, &a.input),
        Command::Bohr { op } => bohr(io, op),
        Command::Norm(a) => norm(io, a, c),
        Command::Verify(a) => {
            let p = verify::VerifyParams {
                family: a.family,
                r: a.r,
                eps: a.eps,
                r_prime: a.r_prime,
                k: a.k,
                l: a.l,
                instances: a.instances,
                size: a.size,
                seed: c.seed,
            };
            let verdicts = verify::run(&p)?;
            io.emit_json("verdicts.json", &verdicts)?;
            Ok(verdict_summary(&verdicts))
        }
        Command::Extremal(a) => extremal(io, a, c),
        Command::Construct(a) => construct(io, a),
        Command::TraceIncrement(a) => trace(io, a),
        Command::Iterate(a) => iterate(io, a),
    }
}

fn verdict_summary(v: &[InequalityVerdict]) -> Finished {
    let hard = v.iter().filter(|v| v.is_hard_failure()).count();
    let soft = v.iter().filter(|v| v.soft && !v.holds).count();
    let status = if hard == 0 { "holds" } else { "FAILS" };
    Finished {
        summary: format!("{status}: {} verdicts, {hard} hard failures, {soft} soft failures", v.len()),
        hard_failure: hard > 0,
    }
}

#[derive(Serialize)]
struct SixcheckReport {
    witness: Option<skewcorner::grid::SixPointWitness>,
    lifted_corner: Option<skewcorner::grid::SkewCornerWitness>,
    /// The six-point configuration recovered from the lifted corner.
    mapped: Option<skewcorner::grid::SixPointWitness>,
}

fn sixcheck(io: &mut Io, input: &Path) -> Result<Finished> {
    let b: OneDimSet = io.read_json(input)?;
    let witness = find_six_point_config(&b);
    let lifted_corner = find_skew_corner(&lift_to_skew_instance(&b));
    let mapped = lifted_corner.as_ref().map(|w| map_witness(w, &b)).transpose()?;
    let summary = match &witness {
        Some(w) => format!("six-point configuration x = {}, y = {}, a = {}: {:?}", w.x, w.y, w.a, w.values()),
        None => "no six-point configuration".to_string(),
    };
    io.emit_json("sixcheck.json", &SixcheckReport { witness, lifted_corner, mapped })?;
    Ok(Finished::ok(summary))
}

fn describe(b: &BohrSet) -> String {
    format!("|B| = {} (N = {}, rank {}, radius {})", b.len(), b.modulus(), b.rank(), b.radius())
}

fn bohr(io: &mut Io, op: &BohrOp) -> Result<Finished> {
    let load = |io: &mut Io, p: &Path| io.read_json::<BohrSet>(p);
    match op {
        BohrOp::Build { n, freqs, radius } => {
            let b = build_bohr(*n, freqs.iter().copied(), *radius)?;
            io.emit_json("bohr.json", &b.descriptor())?;
            Ok(Finished::ok(describe(&b)))
        }
        BohrOp::Dilate { input, delta } => {
            let b = load(io, input)?.dilate(*delta);
            io.emit_json("bohr.json", &b.descriptor())?;
            Ok(Finished::ok(describe(&b)))
        }
        BohrOp::Certify { input } => {
            let b = load(io, input)?;
            let rep = certify_regular(&b);
            io.emit_json("regularity.json", &rep)?;
            let word = if rep.regular { "regular" } else { "not regular" };
            Ok(Finished::ok(format!("{word}: {}", describe(&b))))
        }
        BohrOp::FindRegular { input } => {
            let b = load(io, input)?;
            let delta = find_regular_dilate(&b)?;
            let found = b.dilate(delta);
            io.emit_json("bohr.json", &found.descriptor())?;
            Ok(Finished::ok(format!("δ = {delta}: {}", describe(&found))))
        }
    }
}

fn load_table(io: &mut Io, p: &Path) -> Result<FunctionTable2> {
    if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let text = io.read_text(p)?;
        FunctionTable2::from_csv(&text).map_err(|e| usage(format!("{}: {e}", p.display())))
    } else {
        io.read_json(p)
    }
}

fn single_row(t: &FunctionTable2) -> Result<&[f64]> {
    if t.rows() != 1 {
        return Err(usage(format!("this norm takes a single-row table, got {} rows", t.rows())));
    }
    Ok(t.row(0))
}

fn norm(io: &mut Io, a: &NormArgs, c: &Common) -> Result<Finished> {
    let t = load_table(io, &a.input)?;
    let mc = a.method == NormMethod::Mc;
    let value = match a.kind {
        NormKind::U2 if mc => mc_km_norm(single_row(&t)?, 2, c.samples, c.seed)?,
        NormKind::U2 => u2_norm(single_row(&t)?)?,
        NormKind::Km if mc => mc_km_norm(single_row(&t)?, a.r, c.samples, c.seed)?,
        NormKind::Km => km_norm(single_row(&t)?, a.r)?,
        NormKind::Grid if mc => mc_grid_norm(&t, a.k, a.l, c.samples, c.seed)?,
        NormKind::Grid => grid_norm(&t, a.k, a.l)?,
        NormKind::U22d if mc => bail!(usage("u22d has no Monte Carlo estimator")),
        NormKind::U22d => u2_norm_2d(&t)?,
        NormKind::Vs => {
            let (Some(bp), Some(bpp)) = (&a.bohr, &a.bohr_prime) else {
                return Err(usage("vs needs --bohr and --bohr-prime"));
            };
            let b: BohrSet = io.read_json(bp)?;
            let b2: BohrSet = io.read_json(bpp)?;
            if mc {
                let fs = vec![&t; a.r as usize];
                mc_vs_inner_product(&fs, &fs, b.elements(), b2.elements(), c.samples, c.seed)?
            } else {
                vs_norm(&t, a.r, b.elements(), b2.elements())?
            }
        }
        NormKind::Directional => {
            if mc {
                return Err(usage("the directional norm has no Monte Carlo estimator"));
            }
            let d = directional_norm_vertical(&t)?;
            io.emit_json("norm.json", &d)?;
            return Ok(Finished::ok(match d.root {
                Some(r) => format!("directional norm {r} (raw {})", d.raw),
                None => format!("directional average is negative (raw {})", d.raw),
            }));
        }
    };
    io.emit_json("norm.json", &value)?;
    let err = value.stderr.map(|s| format!(" ± {s}")).unwrap_or_default();
    Ok(Finished::ok(format!("{:?} norm {}{err} (raw {})", a.kind, value.value, value.raw).to_lowercase()))
}

fn extremal(io: &mut Io, a: &ExtremalArgs, c: &Common) -> Result<Finished> {
    let incumbent: Option<PointSet2> = match &a.incumbent {
        Some(p) => Some(io.read_json(p)?),
        None => None,
    };
    if !(a.budget > 0.0 && a.budget.is_finite()) {
        return Err(usage("--budget must be a positive number of seconds"));
    }
    let solve = |n: usize| -> Result<ExtremalResult> {
        Ok(match a.mode {
            ExtremalMode::Brute => brute_force_s(n)?,
            ExtremalMode::Bnb => {
                let config = SearchConfig {
                    time_budget: Duration::from_secs_f64(a.budget),
                    symmetry_breaking: !a.no_symmetry,
                    threads: c.threads,
                    incumbent: incumbent.clone().filter(|s| s.domain().size as usize == n),
                };
                branch_and_bound_s(n, &config)?
            }
        })
    };
    let show = |r: &ExtremalResult| {
        let tag = if r.optimal { "" } else { " (lower bound, budget exhausted)" };
        format!("s({}) = {}{tag}", r.n, r.value)
    };
    if a.up_to {
        let results: Vec<ExtremalResult> = (1..=a.n).map(solve).collect::<Result<_>>()?;
        io.emit_json_if_out("extremal.json", &results)?;
        io.emit_text("sequence.csv", &sequence_csv(&results)?)?;
        let line = results.iter().map(show).collect::<Vec<_>>().join(", ");
        return Ok(Finished::ok(line));
    }
    let r = solve(a.n)?;
    io.emit_json("extremal.json", &r)?;
    Ok(Finished::ok(show(&r)))
}

fn construct(io: &mut Io, a: &ConstructArgs) -> Result<Finished> {
    if a.n == 0 {
        return Err(usage("--n must be positive"));
    }
    let set = match a.kind {
        ConstructKind::OnePerColumn => construct_one_per_column(a.n),
        ConstructKind::SingleColumn => construct_single_column(a.n),
        ConstructKind::Behrend => {
            let b = construct_behrend(a.n)?;
            io.emit_json_if_out("behrend.json", &b)?;
            lift_to_skew_instance(&b)
        }
    };
    io.emit_json("construction.json", &set)?;
    Ok(Finished::ok(format!("{} points in [{}]², {} skew corners", set.len(), set.domain().size, count_skew_corners(&set))))
}

fn load_constants(io: &mut Io, p: &Option<PathBuf>) -> Result<ConstantsOverride> {
    match p {
        Some(p) => io.read_json(p),
        None => Ok(ConstantsOverride::default()),
    }
}

fn trace(io: &mut Io, a: &TraceArgs) -> Result<Finished> {
    let set: PointSet2 = io.read_json(&a.input)?;
    let b: BohrSet = io.read_json(&a.bohr)?;
    let x: Vec<usize> = match &a.columns {
        Some(p) => io.read_json(p)?,
        None => b.elements().to_vec(),
    };
    let o = load_constants(io, &a.constants)?;
    let trace = run_increment(&set, &x, &b, &o)?;
    if io.has_out() {
        io.emit_json("constants.json", &trace.constants)?;
        for (i, r) in trace.reports.iter().enumerate() {
            io.emit_json(&format!("step_{i:02}_{}.json", r.step), r)?;
        }
        io.emit_json("trace.json", &trace)?;
    }
    io.emit_json("outcome.json", &trace.outcome)?;
    for w in &trace.warnings {
        eprintln!("warning: {w}");
    }
    let hard = trace.hard_failures().len();
    Ok(Finished {
        summary: format!("{} after {} reports, {hard} hard failures", trace.outcome.kind(), trace.reports.len()),
        hard_failure: hard > 0,
    })
}

fn iterate(io: &mut Io, a: &IterateArgs) -> Result<Finished> {
    let set: PointSet2 = io.read_json(&a.input)?;
    let o = load_constants(io, &a.constants)?;
    let log = iterate_theorem(&set, &o, a.max_steps)?;
    io.emit_text("iterations.csv", &log.to_csv()?)?;
    io.emit_json_if_out("iterations.json", &log)?;
    let hard: usize = log.traces.iter().map(|t| t.hard_failures().len()).sum();
    let last = log.rows.last().map_or("none", |r| r.outcome.as_str());
    Ok(Finished {
        summary: format!("{} rows, last outcome {last}, {hard} hard failures", log.rows.len()),
        hard_failure: hard > 0,
    })
}
