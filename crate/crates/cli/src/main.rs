//! `twoway`: command-line front end for the two-way coding toolkit.

mod inputs;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use twoway_core::achievability::{
    eval_corollary1, eval_hybrid, eval_theorem1_full, shannon_nonadaptive_bound, ConditionStatus,
    GridSpec, HanScheme, HybridScheme, DEFAULT_Q_SIZE,
};
use twoway_core::coded::Dims;
use twoway_core::markov::in_Pi_Z;
use twoway_core::models::{DistortionMeasure, JointSource, Terminal, TwoWayChannel};
use twoway_core::prob::ConditionalPmf;
use twoway_core::rd::{rd_curve, rd_point, wz_curve, wz_function};
use twoway_core::region::{convexify, search_region, write_region_csv, SearchOptions};
use twoway_core::schema;
use twoway_core::sim::{run_simulation, write_sweep_csv, SimParams, DEFAULT_LETTER_CAP};

use output::{core, emit_csv, emit_json, with_run, write_atomic, CliError};

/// Worker-count override for parallel searches and simulations.
const WORKERS_ENV: &str = "TWOWAY_WORKERS";

#[derive(Parser)]
#[command(
    name = "twoway",
    version,
    about = "Adaptive joint source-channel coding over two-way channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// List built-in channels, sources and scenarios.
    Presets(PresetsArgs),
    /// Evaluate the coded-channel conditions of a configuration.
    EvalTheorem1(Theorem1Args),
    /// Evaluate a single-letter hybrid scheme.
    EvalHybrid(HybridArgs),
    /// Evaluate separate source-channel coding with an adaptive channel code.
    EvalSscc(SsccArgs),
    /// Rate-distortion function of one source.
    Rd(RdArgs),
    /// Wyner-Ziv rate-distortion function with the other source as side information.
    WzRd(RdArgs),
    /// Symmetric non-adaptive rate bound of a channel.
    ShannonBound(ShannonArgs),
    /// Search for certified distortion pairs.
    SearchRegion(SearchArgs),
    /// Monte Carlo block-Markov simulation.
    Simulate(SimulateArgs),
}

#[derive(Args, Serialize, Clone)]
struct ModelArgs {
    /// Channel preset (bmc, dueck, bitpipe) or channel file.
    #[arg(long, default_value = "bmc")]
    channel: String,
    /// Source preset (example2, bernoulli:p or bernoulli:p1,p2) or source file.
    #[arg(long, default_value = "example2")]
    source: String,
    /// Distortion for source 1 (hamming, hamming:n or file); default Hamming.
    #[arg(long)]
    distortion1: Option<String>,
    /// Distortion for source 2.
    #[arg(long)]
    distortion2: Option<String>,
}

impl ModelArgs {
    fn load(&self) -> Result<(TwoWayChannel, JointSource, [DistortionMeasure; 2]), CliError> {
        let ch = inputs::channel(&self.channel)?;
        let src = inputs::source(&self.source)?;
        let d1 = inputs::distortion(self.distortion1.as_deref(), src.size(Terminal::One))?;
        let d2 = inputs::distortion(self.distortion2.as_deref(), src.size(Terminal::Two))?;
        Ok((ch, src, [d1, d2]))
    }
}

#[derive(Args, Serialize)]
struct PresetsArgs {
    /// Write every preset as a JSON document into this directory.
    #[arg(long)]
    export: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct Theorem1Args {
    /// Configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<String>,
    /// Scenario preset supplying channel, source and configuration.
    #[arg(long)]
    preset: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    models: ModelArgs,
    /// Distortion target for source 1; with --D2 also checks membership.
    #[arg(long = "D1", requires = "d2")]
    d1: Option<f64>,
    #[arg(long = "D2", requires = "d1")]
    d2: Option<f64>,
    /// Write the stationary law of the reduced chain as CSV.
    #[arg(long)]
    dump_stationary: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct HybridArgs {
    /// Hybrid scheme file.
    #[arg(long)]
    scheme: String,
    #[command(flatten)]
    #[serde(flatten)]
    models: ModelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SsccArgs {
    /// Adaptive channel code file.
    #[arg(long)]
    han: String,
    #[command(flatten)]
    #[serde(flatten)]
    models: ModelArgs,
    #[arg(long = "D1", default_value_t = 0.0)]
    d1: f64,
    #[arg(long = "D2", default_value_t = 0.0)]
    d2: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct RdArgs {
    /// Source preset or file.
    #[arg(long, default_value = "example2")]
    source: String,
    /// Terminal whose source is compressed.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    which: u8,
    /// Distortion measure (hamming, hamming:n or file).
    #[arg(long)]
    distortion: Option<String>,
    /// Single distortion target.
    #[arg(long = "D", conflicts_with = "grid")]
    d: Option<f64>,
    /// Comma-separated targets; writes a CSV curve.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ShannonArgs {
    #[arg(long, default_value = "bmc")]
    channel: String,
    /// Time-sharing cardinality.
    #[arg(long = "q", default_value_t = DEFAULT_Q_SIZE)]
    q: usize,
    /// Grid divisions per probability coordinate.
    #[arg(long, default_value_t = 20)]
    grid: usize,
    #[arg(long, default_value_t = 2)]
    refine: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SearchArgs {
    #[command(flatten)]
    #[serde(flatten)]
    models: ModelArgs,
    /// Number of candidate configurations.
    #[arg(long, default_value_t = 200)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Auxiliary alphabet sizes for random candidates, as `u1,u2`.
    #[arg(long)]
    u_sizes: Option<String>,
    /// CSV output; certificates go to `<out>.certs/`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    /// Scenario preset supplying channel, source and configuration.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Configuration file (with a stationary tilde law).
    #[arg(long)]
    config: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    models: ModelArgs,
    /// Block length; a comma-separated list writes a CSV sweep.
    #[arg(long, default_value = "64")]
    n: String,
    /// Number of source blocks.
    #[arg(long = "B", default_value_t = 3)]
    blocks: usize,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value_t = 0.25)]
    eps1: f64,
    #[arg(long = "R1", default_value_t = 0.0)]
    r1: f64,
    #[arg(long = "R2", default_value_t = 0.0)]
    r2: f64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Share initialization and termination sequences across trials.
    #[arg(long)]
    freeze: bool,
    #[arg(long, default_value_t = DEFAULT_LETTER_CAP)]
    letter_cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn status_check(status: ConditionStatus, what: &str) -> Result<(), CliError> {
    if status == ConditionStatus::Satisfied {
        Ok(())
    } else {
        Err(CliError::Infeasible(format!("{what}: {status:?}")))
    }
}

fn presets(args: &PresetsArgs, run: &Value) -> Result<(), CliError> {
    use twoway_core::models::*;
    let listing = json!({
        "channels": inputs::CHANNEL_PRESETS,
        "sources": inputs::SOURCE_PRESETS,
        "distortions": inputs::DISTORTION_PRESETS,
        "scenarios": inputs::SCENARIOS,
    });
    if let Some(dir) = &args.export {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
        let sc = inputs::scenario("bmc-example2")?;
        let files = [
            ("bmc.json", schema::channel_json(&preset_bmc())),
            ("dueck.json", schema::channel_json(&preset_dueck())),
            (
                "bitpipe.json",
                schema::channel_json(&preset_crossed_bit_pipes()),
            ),
            (
                "example2.json",
                schema::source_json(&preset_example2_source()),
            ),
            ("hamming2.json", schema::distortion_json(&hamming(2))),
            ("bmc-example2.json", schema::configuration_json(&sc.config)),
            (
                "bmc-example2-hybrid.json",
                schema::hybrid_json(&uncoded_hybrid()?),
            ),
            ("bmc-uniform-han.json", schema::han_json(&uniform_han()?)),
        ];
        for (name, text) in files {
            write_atomic(&dir.join(name), text.as_bytes())?;
        }
    }
    emit_json(&with_run(listing, run), None)
}

/// Uncoded hybrid scheme for the BMC scenario: send the source letter, read
/// the other letter off the output when the own letter is one, else guess one.
fn uncoded_hybrid() -> Result<HybridScheme, CliError> {
    let ch = twoway_core::models::preset_bmc();
    let src = twoway_core::models::preset_example2_source();
    let dims = Dims::for_channel(&src, &ch, [1, 1]);
    let pu =
        Terminal::BOTH.map(|j| ConditionalPmf::deterministic(&[dims.s[j.index()]], &[1], |_| 0));
    core(HybridScheme::from_fns(
        dims,
        pu,
        |_, s, _| s,
        |_, _, s, _, y| if s == 1 { y } else { 1 },
    ))
}

/// Han code on the BMC with uniform `V_j = X_j` sent uncoded.
fn uniform_han() -> Result<HanScheme, CliError> {
    core(HanScheme::from_fn(
        [vec![0.5; 2], vec![0.5; 2]],
        [2, 2],
        [2, 2],
        |_, v, _, _| v,
    ))
}

fn stationary_csv(law: &twoway_core::markov::StationaryLaw) -> Vec<u8> {
    let mut s = String::from("s1,s2,u1,u2,x1,x2,y1,y2,p\n");
    let k = law.kernel();
    for (i, &p) in law.reduced().iter().enumerate() {
        let st = k.state(i);
        let cols: Vec<String> = st.iter().map(|v| v.to_string()).collect();
        s.push_str(&format!("{},{p}\n", cols.join(",")));
    }
    s.into_bytes()
}

fn eval_theorem1_cmd(a: &Theorem1Args, run: &Value) -> Result<(), CliError> {
    let (ch, src, d, cfg) = match (&a.preset, &a.config) {
        (Some(name), _) => {
            let sc = inputs::scenario(name)?;
            (sc.channel, sc.source, sc.d, sc.config)
        }
        (None, Some(path)) => {
            let (ch, src, d) = a.models.load()?;
            (ch, src, d, inputs::configuration(path)?)
        }
        (None, None) => return Err(CliError::Input("need --config or --preset".into())),
    };
    let eval = core(eval_theorem1_full(&cfg, &ch, &src))?;
    if let Some(p) = &a.dump_stationary {
        write_atomic(p, &stationary_csv(&eval.law))?;
    }
    let mut result = json!({
        "report": eval.report,
        "reduced": eval.reduced,
        "offsets": eval.offsets,
        "stationary_residual": eval.residual(),
        "method": eval.method(),
        "unique": eval.law.unique(),
        "used_supplied_tilde": eval.used_supplied_tilde,
    });
    let mut member = true;
    if let (Some(d1), Some(d2)) = (a.d1, a.d2) {
        let pz = in_Pi_Z(&cfg, &ch, &src, &d[0], &d[1], d1, d2);
        member = pz.member;
        result["pi_z"] = serde_json::to_value(&pz).expect("serializable");
    }
    emit_json(&with_run(result, run), a.out.as_deref())?;
    if !member {
        return Err(CliError::Infeasible("configuration is not in Pi_Z".into()));
    }
    status_check(eval.report.status, "coded-channel conditions")
}

fn eval_hybrid_cmd(a: &HybridArgs, run: &Value) -> Result<(), CliError> {
    let (ch, src, d) = a.models.load()?;
    let hs = inputs::hybrid(&a.scheme)?;
    let eval = core(eval_hybrid(&hs, &ch, &src, &d[0], &d[1]))?;
    let result = serde_json::to_value(eval).expect("serializable");
    emit_json(&with_run(result, run), a.out.as_deref())?;
    status_check(eval.report.status, "hybrid conditions")
}

fn eval_sscc_cmd(a: &SsccArgs, run: &Value) -> Result<(), CliError> {
    let (ch, src, d) = a.models.load()?;
    let han = inputs::han(&a.han)?;
    let wz1 = core(wz_function(&src, Terminal::One, &d[0], a.d1))?;
    let wz2 = core(wz_function(&src, Terminal::Two, &d[1], a.d2))?;
    let report = core(eval_corollary1(&han, wz1.rate, wz2.rate, &ch))?;
    let result = json!({
        "report": report,
        "wz_rates": [wz1.rate, wz2.rate],
        "wz": [wz1, wz2],
    });
    emit_json(&with_run(result, run), a.out.as_deref())?;
    status_check(report.status, "separation conditions")
}

fn rd_cmd(a: &RdArgs, run: &Value, wyner_ziv: bool) -> Result<(), CliError> {
    let src = inputs::source(&a.source)?;
    let j = core(Terminal::from_number(a.which as usize))?;
    let d = inputs::distortion(a.distortion.as_deref(), src.size(j))?;
    let marginal = src.marginal(j);
    match (&a.grid, a.d) {
        (Some(grid), _) => {
            let grid = inputs::parse_list(grid)?;
            let curve = if wyner_ziv {
                core(wz_curve(&src, j, &d, &grid))?
            } else {
                core(rd_curve(marginal.probs(), &d, &grid))?
            };
            let mut csv = Vec::new();
            curve.write_csv(&mut csv).expect("in-memory write");
            let run = with_run(
                json!({ "method": curve.method, "max_clipped": curve.max_clipped }),
                run,
            );
            emit_csv(&csv, a.out.as_deref(), &run)
        }
        (None, Some(target)) => {
            let result = if wyner_ziv {
                serde_json::to_value(core(wz_function(&src, j, &d, target))?)
            } else {
                serde_json::to_value(core(rd_point(marginal.probs(), &d, target))?)
            };
            emit_json(
                &with_run(result.expect("serializable"), run),
                a.out.as_deref(),
            )
        }
        (None, None) => Err(CliError::Input("need --D or --grid".into())),
    }
}

fn shannon_cmd(a: &ShannonArgs, run: &Value) -> Result<(), CliError> {
    let ch = inputs::channel(&a.channel)?;
    let grid = GridSpec {
        divisions: a.grid,
        refine_rounds: a.refine,
    };
    let bound = core(shannon_nonadaptive_bound(&ch, a.q, grid))?;
    let result = serde_json::to_value(bound).expect("serializable");
    emit_json(&with_run(result, run), a.out.as_deref())
}

fn search_cmd(a: &SearchArgs, run: &Value) -> Result<(), CliError> {
    let (ch, src, d) = a.models.load()?;
    let mut opts = SearchOptions::new(a.budget, a.seed);
    if let Some(s) = &a.u_sizes {
        let v = inputs::parse_list(s)?;
        if v.len() != 2 || v.iter().any(|&x| x < 1.0 || x.fract() != 0.0) {
            return Err(CliError::Input(format!("bad --u-sizes {s:?}")));
        }
        opts.u_sizes = Some([v[0] as usize, v[1] as usize]);
    }
    let pts = core(search_region(&ch, &src, &d[0], &d[1], opts))?;
    let mut names = Vec::new();
    if let Some(out) = &a.out {
        let mut dir = out.as_os_str().to_owned();
        dir.push(".certs");
        let dir = PathBuf::from(dir);
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
        for (i, p) in pts.iter().enumerate() {
            let path = dir.join(format!("point{i}.json"));
            write_atomic(&path, schema::configuration_json(&p.certificate).as_bytes())?;
            names.push(path.display().to_string());
        }
    }
    let mut csv = Vec::new();
    write_region_csv(&mut csv, &pts, &names).expect("in-memory write");
    let hull = convexify(&pts.iter().map(|p| (p.d1, p.d2)).collect::<Vec<_>>());
    let run = with_run(json!({ "points": pts.len(), "hull": hull }), run);
    emit_csv(&csv, a.out.as_deref(), &run)?;
    if pts.is_empty() {
        return Err(CliError::Infeasible("no certified point found".into()));
    }
    Ok(())
}

fn simulate_cmd(a: &SimulateArgs, run: &Value) -> Result<(), CliError> {
    let (ch, src, d, cfg) = match (&a.preset, &a.config) {
        (Some(name), _) => {
            let sc = inputs::scenario(name)?;
            (sc.channel, sc.source, sc.d, sc.config)
        }
        (None, Some(path)) => {
            let (ch, src, d) = a.models.load()?;
            (ch, src, d, inputs::configuration(path)?)
        }
        (None, None) => return Err(CliError::Input("need --config or --preset".into())),
    };
    let ns = inputs::parse_list(&a.n)?;
    let mut reports = Vec::new();
    for n in &ns {
        if *n < 1.0 || n.fract() != 0.0 {
            return Err(CliError::Input(format!("bad block length {n}")));
        }
        let mut params = SimParams::new(*n as usize, a.blocks, a.eps, a.eps1, [a.r1, a.r2])
            .with_seed(a.seed)
            .with_trials(a.trials);
        params.freeze_boundary = a.freeze;
        params.letter_cap = a.letter_cap;
        reports.push(core(run_simulation(
            &cfg, &ch, &src, &d[0], &d[1], &params,
        ))?);
    }
    if reports.len() == 1 {
        let result = serde_json::to_value(&reports[0]).expect("serializable");
        emit_json(&with_run(result, run), a.out.as_deref())
    } else {
        let mut csv = Vec::new();
        write_sweep_csv(&mut csv, &reports).expect("in-memory write");
        emit_csv(&csv, a.out.as_deref(), &with_run(json!({}), run))
    }
}

fn configure_workers() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
            CliError::Input(format!("{WORKERS_ENV}={v:?} is not a positive integer"))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(e.to_string()))?;
    }
    Ok(())
}

fn execute(cmd: &Command) -> Result<(), CliError> {
    configure_workers()?;
    let run = serde_json::to_value(cmd).expect("arguments serialize");
    match cmd {
        Command::Presets(a) => presets(a, &run),
        Command::EvalTheorem1(a) => eval_theorem1_cmd(a, &run),
        Command::EvalHybrid(a) => eval_hybrid_cmd(a, &run),
        Command::EvalSscc(a) => eval_sscc_cmd(a, &run),
        Command::Rd(a) => rd_cmd(a, &run, false),
        Command::WzRd(a) => rd_cmd(a, &run, true),
        Command::ShannonBound(a) => shannon_cmd(a, &run),
        Command::SearchRegion(a) => search_cmd(a, &run),
        Command::Simulate(a) => simulate_cmd(a, &run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("twoway: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
