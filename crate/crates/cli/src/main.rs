//! `lowdeg`: batch harness over the lowdeg library.
//!
//! Every command prints (or writes to `--out`) one JSON document holding the
//! tool version, the full configuration, the seed and input hashes next to
//! the result. Nothing time-dependent is recorded, so reruns are
//! byte-identical for any `--workers`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use lowdeg::agreement::{agreement_exact, agreement_mc, agreement_pointwise, check_equivalence, TestSpec};
use lowdeg::decoder::{decode, DecoderMode, DecoderParams};
use lowdeg::spectral::{build_graph, case_report, sampling_suite, GraphCase, DEFAULT_KAPPA};
use lowdeg::table::TableShape;
use lowdeg::{rng, Error, FieldCtx, GlobalPoly, SubspaceTable, DEFAULT_CAP, VERSION};

/// Stream used for drawing plant polynomials, kept clear of the
/// generators' own streams.
const PLANT_STREAM: u64 = 1 << 40;

#[derive(Parser, Debug)]
#[command(name = "lowdeg", version, about = "Low-degree agreement tests, decoder and inclusion-graph spectra")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Enumeration cap.
    #[arg(long, global = true, default_value_t = DEFAULT_CAP)]
    cap: u128,
    /// Slack factor for the upper bounds.
    #[arg(long, global = true, default_value_t = DEFAULT_KAPPA)]
    kappa: f64,
    /// Output path (the table file for `gen`, the report otherwise).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed; required by every randomized command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a table file.
    Gen(GenArgs),
    /// Run an agreement test on a table.
    Test(TestArgs),
    /// Decode a cube table.
    Decode(DecodeArgs),
    /// Inclusion-graph spectra and sampling checks.
    Spectra(SpectraArgs),
    /// Agreement over a grid of generated tables.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct FieldArgs {
    /// Field order; must be prime unless --e is given, in which case q = p^e.
    #[arg(long)]
    q: u32,
    /// Extension degree.
    #[arg(long)]
    e: Option<u32>,
    /// Reduction polynomial coefficients, constant term first.
    #[arg(long, value_delimiter = ',')]
    poly: Option<Vec<u32>>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum GenKind {
    Honest,
    Planted,
    Halfhalf,
    Mixture,
    Random,
}

#[derive(Args, Debug, Serialize)]
struct GenArgs {
    #[command(flatten)]
    field: FieldArgs,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 3)]
    s: usize,
    #[arg(long)]
    d: usize,
    #[arg(long = "gen", value_enum)]
    generator: GenKind,
    /// Planted fraction.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Mixture weights, one per component.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 0.5])]
    weights: Vec<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum TestMode {
    Exact,
    Mc,
    Pointwise,
}

#[derive(Args, Debug, Serialize)]
struct TestArgs {
    #[arg(long)]
    table: PathBuf,
    /// cxc, plp, pxp, clc or s,k,r.
    #[arg(long, default_value = "cxc")]
    spec: String,
    #[arg(long, value_enum, default_value_t = TestMode::Exact)]
    mode: TestMode,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Also check the test-equivalence relations for s,k,r.
    #[arg(long)]
    equiv: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Practical,
    Faithful,
}

#[derive(Args, Debug, Serialize)]
struct DecodeArgs {
    #[arg(long)]
    table: PathBuf,
    /// Mass threshold (default: the exact point-check agreement).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Practical)]
    mode: ModeArg,
    #[arg(long, default_value_t = 12)]
    candidates: usize,
    #[arg(long, default_value_t = 3)]
    correct: usize,
    /// Sampled directions per point in self-correction (0 = all).
    #[arg(long, default_value_t = 48)]
    rs_samples: u64,
    /// Keep decoding the entries not yet explained.
    #[arg(long)]
    list: bool,
    #[arg(long, default_value_t = 0.1)]
    min_support: f64,
    #[arg(long, default_value_t = 4)]
    max_rounds: usize,
}

#[derive(Args, Debug, Serialize)]
struct SpectraArgs {
    /// Cases, e.g. g1..g6 or g2,g5.
    #[arg(long, default_value = "g1..g6")]
    cases: String,
    #[arg(long)]
    m: usize,
    /// Field orders (primes); more than one gives a q-sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    q: Vec<u32>,
    /// CSV sidecar of (case, q, ratio).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Run the sampling checks on --graph instead of the spectral reports.
    #[arg(long)]
    sampling: bool,
    #[arg(long, default_value = "g6")]
    graph: String,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.125, 0.25, 0.5])]
    mu: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Skip the pair-distribution check.
    #[arg(long)]
    no_pairs: bool,
    /// Random indicators for the inner-product bound.
    #[arg(long, default_value_t = 100)]
    indicators: usize,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    /// Field orders (primes).
    #[arg(long, value_delimiter = ',', required = true)]
    q: Vec<u32>,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 3)]
    s: usize,
    #[arg(long)]
    d: usize,
    #[arg(long = "gen", value_enum, default_value_t = GenKind::Planted)]
    generator: GenKind,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.5])]
    rho: Vec<f64>,
    /// Tables per grid point.
    #[arg(long, default_value_t = 1)]
    reps: u64,
    #[arg(long, default_value = "cxc")]
    spec: String,
    #[arg(long, value_enum, default_value_t = TestMode::Exact)]
    mode: TestMode,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// CSV sidecar of (q, rho, rep, value).
    #[arg(long)]
    csv: Option<PathBuf>,
}

struct Ctx {
    cap: u128,
    kappa: f64,
    seed: Option<u64>,
    out: Option<PathBuf>,
    workers: usize,
}

impl Ctx {
    fn seed(&self, what: &str) -> Result<u64, Error> {
        self.seed.ok_or_else(|| Error::Invalid(format!("{what} is randomized and needs --seed")))
    }

    fn globals(&self) -> Value {
        json!({ "cap": self.cap.to_string(), "kappa": self.kappa, "out": self.out })
    }
}

fn field_from(args: &FieldArgs) -> Result<FieldCtx, Error> {
    match args.e {
        None => FieldCtx::new(args.q, 1, args.poly.clone()),
        Some(e) => {
            if e == 0 {
                return Err(Error::Invalid("--e must be at least 1".into()));
            }
            let p = (2..=args.q).find(|p| (*p as u64).checked_pow(e) >= Some(args.q as u64)).unwrap_or(args.q);
            if (p as u64).checked_pow(e) != Some(args.q as u64) {
                return Err(Error::Invalid(format!("{} is not a {e}-th power", args.q)));
            }
            FieldCtx::new(p, e, args.poly.clone())
        }
    }
}

fn plants(shape: &TableShape, seed: u64, n: usize) -> Vec<GlobalPoly> {
    let mut r = rng::stream(seed, PLANT_STREAM);
    (0..n).map(|_| shape.random_global(&mut r)).collect()
}

fn generate(shape: &TableShape, kind: GenKind, rho: f64, weights: &[f64], seed: u64) -> Result<SubspaceTable, Error> {
    match kind {
        GenKind::Honest => SubspaceTable::gen_honest(shape, &plants(shape, seed, 1)[0], seed),
        GenKind::Planted => SubspaceTable::gen_planted(shape, &plants(shape, seed, 1)[0], rho, seed),
        GenKind::Halfhalf => SubspaceTable::gen_halfhalf(shape, seed),
        GenKind::Mixture => SubspaceTable::gen_mixture(shape, &plants(shape, seed, weights.len()), weights, seed),
        GenKind::Random => SubspaceTable::gen_random(shape, seed),
    }
}

fn envelope(command: &str, ctx: &Ctx, config: Value, inputs: Value, result: Value) -> Value {
    json!({
        "version": VERSION,
        "command": command,
        "config": config,
        "globals": ctx.globals(),
        "seed": ctx.seed,
        "rng": rng::GENERATOR_NAME,
        "inputs": inputs,
        "result": result,
    })
}

fn emit(doc: &Value, out: Option<&Path>) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn to_value<T: Serialize>(x: &T) -> Result<Value, Error> {
    Ok(serde_json::to_value(x)?)
}

fn cmd_gen(ctx: &Ctx, a: &GenArgs) -> Result<(), Error> {
    let seed = ctx.seed("gen")?;
    let out = ctx.out.as_ref().ok_or_else(|| Error::Invalid("gen needs --out for the table file".into()))?;
    let shape = TableShape::new(field_from(&a.field)?, a.m, a.s, a.d)?;
    let t = generate(&shape, a.generator, a.rho, &a.weights, seed)?;
    let hash = t.save(out)?;
    let result = json!({ "table": out, "table_hash": hash, "entries": t.len(), "generator": t.header().generator.name() });
    emit(&envelope("gen", ctx, to_value(a)?, json!({}), result), None)
}

fn estimate(t: &SubspaceTable, spec: TestSpec, mode: TestMode, samples: u64, ctx: &Ctx) -> Result<lowdeg::agreement::AgreementEstimate, Error> {
    match mode {
        TestMode::Exact => agreement_exact(t, spec, ctx.cap),
        TestMode::Pointwise => {
            if spec != TestSpec::CXC {
                return Err(Error::SpecInvalid("pointwise mode only computes the cube/point/cube test".into()));
            }
            agreement_pointwise(t, ctx.cap)
        }
        TestMode::Mc => agreement_mc(t, spec, samples, ctx.seed("monte-carlo mode")?),
    }
}

fn parse_triple(s: &str) -> Result<(usize, usize, usize), Error> {
    let spec = TestSpec::parse(s)?;
    Ok((spec.s, spec.k, spec.r))
}

fn cmd_test(ctx: &Ctx, a: &TestArgs) -> Result<(), Error> {
    let t = SubspaceTable::load(&a.table)?;
    let hash = t.content_hash();
    let spec = TestSpec::parse(&a.spec)?;
    let est = estimate(&t, spec, a.mode, a.samples, ctx)?;
    let equiv = match &a.equiv {
        Some(e) => {
            let (s, k, r) = parse_triple(e)?;
            Some(check_equivalence(&t, s, k, r, ctx.kappa, ctx.cap)?)
        }
        None => None,
    };
    let result = json!({
        "estimate": est.report(&hash, vec![]),
        "value": est.value_string(),
        "equivalence": equiv,
    });
    emit(&envelope("test", ctx, to_value(a)?, json!({ "table": hash }), result), ctx.out.as_deref())
}

fn cmd_decode(ctx: &Ctx, a: &DecodeArgs) -> Result<(), Error> {
    let seed = ctx.seed("decode")?;
    let t = SubspaceTable::load(&a.table)?;
    let hash = t.content_hash();
    let params = DecoderParams {
        epsilon: a.epsilon,
        gamma: a.gamma,
        mode: match a.mode {
            ModeArg::Practical => DecoderMode::Practical,
            ModeArg::Faithful => DecoderMode::Faithful,
        },
        n_candidates: a.candidates,
        n_correct: a.correct,
        rs_samples: a.rs_samples,
        seed,
        list: a.list,
        min_support: a.min_support,
        max_rounds: a.max_rounds,
    };
    let rep = decode(&t, &params, ctx.cap)?;
    emit(&envelope("decode", ctx, to_value(a)?, json!({ "table": hash }), to_value(&rep)?), ctx.out.as_deref())
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    w.write_record(header).map_err(|e| Error::Format(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_spectra(ctx: &Ctx, a: &SpectraArgs) -> Result<(), Error> {
    let fields: Vec<FieldCtx> = a.q.iter().map(|&q| FieldCtx::prime(q)).collect::<Result<_, _>>()?;
    let result = if a.sampling {
        let seed = ctx.seed("sampling")?;
        let case = GraphCase::parse(&a.graph)?;
        let mut suites = vec![];
        for f in &fields {
            let g = build_graph(f, case, a.m, ctx.cap)?;
            // B' is drawn from the lower-dimensional side.
            let g = if g.left().first().map_or(0, |s| s.dim()) < g.right().first().map_or(0, |s| s.dim()) { g.swapped() } else { g };
            suites.push(sampling_suite(&g, &a.mu, a.trials, !a.no_pairs, a.indicators, seed, ctx.cap)?);
        }
        json!({ "sampling": suites, "all_pass": suites.iter().all(|s| s.all_pass) })
    } else {
        let cases = GraphCase::parse_list(&a.cases)?;
        let mut reports = vec![];
        for f in &fields {
            for &c in &cases {
                reports.push(case_report(f, c, a.m, ctx.cap)?);
            }
        }
        if let Some(path) = &a.csv {
            let rows: Vec<Vec<String>> = reports
                .iter()
                .map(|r| vec![r.case.clone(), r.q.to_string(), r.ratio.map_or(String::new(), |x| format!("{x:.12}"))])
                .collect();
            write_csv(path, &["case", "q", "ratio"], &rows)?;
        }
        json!({ "reports": reports })
    };
    emit(&envelope("spectra", ctx, to_value(a)?, json!({}), result), ctx.out.as_deref())
}

fn cmd_sweep(ctx: &Ctx, a: &SweepArgs) -> Result<(), Error> {
    let seed = ctx.seed("sweep")?;
    let spec = TestSpec::parse(&a.spec)?;
    let rhos: Vec<f64> = if matches!(a.generator, GenKind::Planted) { a.rho.clone() } else { vec![f64::NAN] };
    let mut points = vec![];
    let mut rows = vec![];
    let mut run = 0u64;
    for &q in &a.q {
        let shape = TableShape::new(FieldCtx::prime(q)?, a.m, a.s, a.d)?;
        for &rho in &rhos {
            for rep in 0..a.reps {
                let table_seed = seed.wrapping_add(run);
                run += 1;
                let t = generate(&shape, a.generator, rho, &[0.5, 0.5], table_seed)?;
                let est = estimate(&t, spec, a.mode, a.samples, &Ctx { seed: Some(table_seed), out: None, ..*ctx })?;
                let rho_out = (!rho.is_nan()).then_some(rho);
                rows.push(vec![
                    q.to_string(),
                    rho_out.map_or(String::new(), |r| r.to_string()),
                    rep.to_string(),
                    format!("{:.12}", est.value),
                ]);
                points.push(json!({
                    "q": q,
                    "rho": rho_out,
                    "rep": rep,
                    "seed": table_seed,
                    "table_hash": t.content_hash(),
                    "value": est.value_string(),
                    "value_f64": est.value,
                    "stderr": est.stderr,
                }));
            }
        }
    }
    if let Some(path) = &a.csv {
        write_csv(path, &["q", "rho", "rep", "value"], &rows)?;
    }
    emit(&envelope("sweep", ctx, to_value(a)?, json!({}), json!({ "points": points })), ctx.out.as_deref())
}

fn run(cli: Cli) -> Result<(), Error> {
    let ctx = Ctx { cap: cli.cap, kappa: cli.kappa, seed: cli.seed, out: cli.out.clone(), workers: cli.workers };
    if !(ctx.kappa >= 1.0) {
        return Err(Error::Invalid("--kappa must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.workers)
        .build()
        .map_err(|e| Error::Invalid(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Gen(a) => cmd_gen(&ctx, a),
        Command::Test(a) => cmd_test(&ctx, a),
        Command::Decode(a) => cmd_decode(&ctx, a),
        Command::Spectra(a) => cmd_spectra(&ctx, a),
        Command::Sweep(a) => cmd_sweep(&ctx, a),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("{}", json!({ "error": e.to_string(), "exit_code": code }));
            ExitCode::from(code as u8)
        }
    }
}
