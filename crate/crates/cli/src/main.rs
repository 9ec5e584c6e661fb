//! `spikebench` command-line driver.
//!
//! Exit codes: 0 success, 2 usage or domain error, 3 a run's invariant
//! check failed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use spikebench::analysis::{
    bound_report, effective_dimension, fit_scaling_law, read_cifar_batches, read_csv_matrix,
    read_points_csv, BoundInputs, EffDimConfig, DESIGN_RULE_C, E_SOP_JOULES,
};
use spikebench::attention::{
    circuit_attention, float_attention_oracle, ssa_forward, AttentionWeights,
    CircuitAttentionConfig, SsaConfig, ValueReadout,
};
use spikebench::harness::{run_experiment, write_outputs, ExperimentConfig, ExperimentKind};
use spikebench::spike::{encode_matrix, RngSeed, SpikeTensor};
use spikebench::Matrix;

const SEED_ENV: &str = "SPIKEBENCH_SEED";
/// Published effective dimension of raw CIFAR-10 pixels, for comparison.
const CIFAR_REFERENCE: (f64, f64) = (47.0, 3.0);

#[derive(Parser)]
#[command(name = "spikebench", version, about = "Spike-circuit simulator and bound calculator")]
struct Cli {
    /// Print exactly one JSON document on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for every random draw [default: $SPIKEBENCH_SEED, else 0].
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for output files.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Progress messages on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spike-count lower bounds, energy and recommended timesteps.
    Bounds(BoundsArgs),
    /// Effective dimension of a dataset (CSV or CIFAR-10 binary batches).
    Effdim(EffdimArgs),
    /// Run an experiment and write its CSV/JSON outputs.
    Run(RunArgs),
    /// Log-log fit of error against spike count.
    Fit(FitArgs),
    /// Attention on a CSV matrix (circuit, SSA or exact).
    Attend(AttendArgs),
    /// Rate-encode a CSV matrix into an SPKT file.
    Encode(EncodeArgs),
}

#[derive(Args)]
struct BoundsArgs {
    /// Lipschitz constant L_f.
    #[arg(long, default_value_t = 1.0)]
    lf: f64,
    /// Tokens.
    #[arg(long)]
    n: usize,
    /// Dimensions per token.
    #[arg(long)]
    d: usize,
    /// Effective dimension.
    #[arg(long)]
    deff: Option<f64>,
    /// Target error in (0,1).
    #[arg(long)]
    eps: f64,
    /// Energy per synaptic operation in joules.
    #[arg(long, default_value_t = E_SOP_JOULES)]
    esop: f64,
    /// Design-rule constant C.
    #[arg(long, default_value_t = DESIGN_RULE_C)]
    c: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Auto,
    Csv,
    Cifar,
}

#[derive(Args)]
struct EffdimArgs {
    /// Input files; CIFAR-10 batches may be given several times.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    format: InputFormat,
    #[arg(long, default_value_t = 0.95)]
    threshold: f64,
    #[arg(long, default_value_t = 5)]
    subsamples: usize,
    #[arg(long, default_value_t = 0.8)]
    fraction: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Task1,
    Wta,
    Concentration,
    SpikeAccuracy,
}

impl From<Experiment> for ExperimentKind {
    fn from(e: Experiment) -> Self {
        match e {
            Experiment::Task1 => ExperimentKind::Task1,
            Experiment::Wta => ExperimentKind::Wta,
            Experiment::Concentration => ExperimentKind::Concentration,
            Experiment::SpikeAccuracy => ExperimentKind::SpikeAccuracy,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Experiment to run; may instead be named in the config file.
    #[arg(long, value_enum)]
    experiment: Option<Experiment>,
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds per grid cell.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    /// Two-column CSV of (spike count, error).
    #[arg(long)]
    input: PathBuf,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum AttendMode {
    Circuit,
    Ssa,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum Readout {
    Decoded,
    Coincidence,
}

#[derive(Args)]
struct AttendArgs {
    /// CSV matrix (one row per token, entries in [0,1]); `ssa` also accepts
    /// an SPKT file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = AttendMode::Circuit)]
    mode: AttendMode,
    /// Timesteps.
    #[arg(long, default_value_t = 1024)]
    steps: usize,
    #[arg(long, value_enum, default_value_t = Readout::Decoded)]
    readout: Readout,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    steps: usize,
    /// SPKT file to write.
    #[arg(long)]
    output: PathBuf,
    /// Also write the JSON debug form here.
    #[arg(long)]
    debug_json: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Gate(String),
}

impl From<spikebench::Error> for Failure {
    fn from(e: spikebench::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

struct Ctx {
    json: bool,
    seed: u64,
    seed_given: bool,
    output_dir: Option<PathBuf>,
    verbose: bool,
}

impl Ctx {
    fn emit<T: Serialize>(&self, value: &T, human: impl FnOnce() -> String) -> Outcome {
        if self.json {
            let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Usage(e.to_string()))?;
            println!("{text}");
        } else {
            print!("{}", human());
        }
        Ok(())
    }

    fn progress(&self, msg: &str) {
        if self.verbose {
            eprintln!("{msg}");
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn write_file(path: &Path, bytes: &[u8]) -> Outcome {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| usage(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn matrix_csv(m: &Matrix) -> String {
    let mut s = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn cmd_bounds(ctx: &Ctx, a: &BoundsArgs) -> Outcome {
    if !(a.eps > 0.0 && a.eps < 1.0) {
        return Err(usage(format!("eps must be in (0,1), got {}", a.eps)));
    }
    if !(a.lf > 0.0 && a.lf.is_finite()) {
        return Err(usage(format!("lf must be positive, got {}", a.lf)));
    }
    if a.n == 0 || a.d == 0 {
        return Err(usage("n and d must be positive"));
    }
    if !(a.esop >= 0.0 && a.esop.is_finite()) {
        return Err(usage(format!("esop must be a nonnegative energy in joules, got {}", a.esop)));
    }
    if !(a.c > 0.0 && a.c.is_finite()) {
        return Err(usage(format!("c must be positive, got {}", a.c)));
    }
    let mut inputs = BoundInputs::new(a.lf, a.n, a.d, a.eps)?;
    if let Some(deff) = a.deff {
        let nd = (a.n * a.d) as f64;
        if !(deff > 0.0 && deff <= nd) {
            return Err(usage(format!("deff must be in (0, n·d = {nd}], got {deff}")));
        }
        inputs = inputs.with_effective_dim(deff)?;
    }
    let r = bound_report(&inputs, a.esop, a.c)?;
    ctx.emit(&r, || {
        let mut s = String::new();
        let _ = writeln!(s, "worst-case spikes       {}", r.worst_case_spikes);
        if let (Some(b), Some(ratio)) = (r.input_dependent_spikes, r.compression_ratio) {
            let _ = writeln!(s, "input-dependent spikes  {b} (compression {ratio:.2}x)");
        }
        let _ = writeln!(s, "energy                  {:e} J (E_SOP {:e} J)", r.energy_joules, r.e_sop_joules);
        let _ = writeln!(
            s,
            "recommended T           {} (C = {}, 95% CI [{}, {}])",
            r.recommended_steps, r.constant_c, r.constant_c_interval.0, r.constant_c_interval.1
        );
        let _ = writeln!(s, "note                    {}", r.constant_convention);
        s
    })
}

fn is_cifar(paths: &[PathBuf], format: InputFormat) -> bool {
    match format {
        InputFormat::Csv => false,
        InputFormat::Cifar => true,
        InputFormat::Auto => paths
            .iter()
            .all(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("bin"))),
    }
}

fn cmd_effdim(ctx: &Ctx, a: &EffdimArgs) -> Outcome {
    let cifar = is_cifar(&a.input, a.format);
    let data = if cifar {
        read_cifar_batches(&a.input)?.0
    } else {
        if a.input.len() != 1 {
            return Err(usage("CSV input takes exactly one --input file"));
        }
        read_csv_matrix(&a.input[0])?
    };
    ctx.progress(&format!("loaded {}×{} matrix", data.nrows(), data.ncols()));
    let cfg = EffDimConfig {
        threshold: a.threshold,
        subsamples: a.subsamples,
        fraction: a.fraction,
    };
    let report = effective_dimension(&data, &cfg, RngSeed(ctx.seed))?;

    let mut files = Vec::new();
    if let Some(dir) = &ctx.output_dir {
        let json_path = dir.join("effdim.json");
        let csv_path = dir.join("effdim_spectrum.csv");
        let text = serde_json::to_string_pretty(&report).map_err(|e| usage(e.to_string()))?;
        write_file(&json_path, format!("{text}\n").as_bytes())?;
        let mut csv = String::from("component,variance,cumulative_fraction\n");
        let mut acc = 0.0;
        for (k, v) in report.spectrum.iter().enumerate() {
            acc += v;
            let _ = writeln!(csv, "{},{},{}", k + 1, v, acc / report.total_variance);
        }
        write_file(&csv_path, csv.as_bytes())?;
        files = vec![json_path, csv_path];
    }
    let reference = cifar.then(|| {
        json!({
            "d_eff": CIFAR_REFERENCE.0,
            "std": CIFAR_REFERENCE.1,
            "within_reference": (report.d_eff_mean - CIFAR_REFERENCE.0).abs() <= CIFAR_REFERENCE.1,
            "preprocessing": "raw pixels in [0,255], flattened, column-centered, no scaling",
        })
    });
    let summary = json!({
        "d_eff_mean": report.d_eff_mean,
        "d_eff_std": report.d_eff_std,
        "per_subsample": report.per_subsample,
        "full_data": report.full_data,
        "variance_threshold": report.variance_threshold,
        "subsample_fraction": report.subsample_fraction,
        "subsample_count": report.subsample_count,
        "samples": report.samples,
        "features": report.features,
        "method": report.method,
        "seed": ctx.seed,
        "reference": reference,
        "files": files,
    });
    ctx.emit(&summary, || {
        let mut s = format!(
            "d_eff = {:.2} ± {:.2} over {} subsamples of {:.0}% ({} samples × {} features, threshold {})\n",
            report.d_eff_mean,
            report.d_eff_std,
            report.subsample_count,
            100.0 * report.subsample_fraction,
            report.samples,
            report.features,
            report.variance_threshold
        );
        if cifar {
            let _ = writeln!(
                s,
                "reference for raw CIFAR-10 pixels: {} ± {} ({})",
                CIFAR_REFERENCE.0,
                CIFAR_REFERENCE.1,
                if (report.d_eff_mean - CIFAR_REFERENCE.0).abs() <= CIFAR_REFERENCE.1 { "within" } else { "mismatch" }
            );
        }
        for f in &files {
            let _ = writeln!(s, "wrote {}", f.display());
        }
        s
    })
}

fn cmd_run(ctx: &Ctx, a: &RunArgs) -> Outcome {
    let kind = a.experiment.map(ExperimentKind::from);
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load_seeded(path, kind, ctx.seed)?,
        None => {
            let kind = kind.ok_or_else(|| {
                usage("name an experiment with --experiment or in the config file")
            })?;
            let mut cfg = ExperimentConfig::defaults(kind);
            cfg.seed = ctx.seed;
            cfg
        }
    };
    if ctx.seed_given {
        cfg.seed = ctx.seed;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(dir) = &ctx.output_dir {
        cfg.output_dir = Some(dir.clone());
    }
    cfg.validate()?;
    ctx.progress(&format!("running {} with seed {}", cfg.experiment, cfg.seed));
    let report = run_experiment(&cfg)?;
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("results"));
    let files = write_outputs(&report, &dir)?;

    let summary = json!({
        "experiment": cfg.experiment,
        "passed": report.passed(),
        "fits": report.fits,
        "checks": report.checks,
        "files": files,
    });
    ctx.emit(&summary, || {
        let mut s = format!("{} (seed {}, {} trials)\n", cfg.experiment, cfg.seed, cfg.trials);
        for f in &report.fits {
            let _ = writeln!(
                s,
                "fit {:<24} slope {:+.4} ± {:.4}  R² {:.4}  ({} points)",
                f.name, f.fit.slope, f.fit.slope_stderr, f.fit.r_squared, f.fit.n_points
            );
        }
        for c in &report.checks {
            let status = match (c.passed, c.gating) {
                (true, _) => "pass",
                (false, true) => "FAIL",
                (false, false) => "note",
            };
            let _ = writeln!(s, "[{status}] {}: {}", c.name, c.detail);
        }
        for f in &files {
            let _ = writeln!(s, "wrote {}", f.display());
        }
        s
    })?;
    let failed = report.failed_gates();
    if failed.is_empty() {
        Ok(())
    } else {
        let names: Vec<&str> = failed.iter().map(|c| c.name.as_str()).collect();
        Err(Failure::Gate(format!("invariant check failed: {}", names.join(", "))))
    }
}

fn cmd_fit(ctx: &Ctx, a: &FitArgs) -> Outcome {
    let points = read_points_csv(&a.input)?;
    let fit = fit_scaling_law(&points)?;
    ctx.emit(&fit, || {
        format!(
            "slope {:+.4} ± {:.4}\nintercept {:.4}\nR² {:.4}\npoints {}\n",
            fit.slope, fit.slope_stderr, fit.intercept, fit.r_squared, fit.n_points
        )
    })
}

fn load_spkt(path: &Path) -> Result<SpikeTensor, Failure> {
    let file = std::fs::File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(SpikeTensor::read_spkt(std::io::BufReader::new(file), path)?)
}

fn cmd_attend(ctx: &Ctx, a: &AttendArgs) -> Outcome {
    let spkt_input = a.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("spkt"));
    if spkt_input && a.mode != AttendMode::Ssa {
        return Err(usage("SPKT input is only accepted with --mode ssa"));
    }
    if a.steps == 0 {
        return Err(usage("steps must be positive"));
    }
    let seed = RngSeed(ctx.seed);
    let (rates, spikes, spikes_used, dims, tokens, exact_error) = if spkt_input {
        let s_x = load_spkt(&a.input)?;
        let w = AttentionWeights::identity(s_x.cols());
        let out = ssa_forward(&s_x, &w, &SsaConfig::default())?;
        (out.rates, out.spikes, out.spikes_used, s_x.cols(), s_x.rows(), None)
    } else {
        let x = read_csv_matrix(&a.input)?;
        let w = AttentionWeights::identity(x.ncols());
        let exact = float_attention_oracle(&x, &w)?;
        let (out, spikes, used) = match a.mode {
            AttendMode::Exact => (exact.clone(), None, 0),
            AttendMode::Circuit => {
                let readout = match a.readout {
                    Readout::Decoded => ValueReadout::Decoded,
                    Readout::Coincidence => ValueReadout::Coincidence,
                };
                let cfg = CircuitAttentionConfig::new(a.steps)?.with_value_readout(readout);
                let out = circuit_attention(&x, &w, &cfg, seed)?;
                (out.rates, out.spikes, out.spikes_used)
            }
            AttendMode::Ssa => {
                let s_x = encode_matrix(&x, a.steps, seed)?;
                let out = ssa_forward(&s_x, &w, &SsaConfig::default())?;
                (out.rates, out.spikes, out.spikes_used)
            }
        };
        let err = (a.mode != AttendMode::Ssa).then(|| (&out - &exact).norm());
        (out, spikes, used, x.ncols(), x.nrows(), err)
    };

    let mut files = Vec::new();
    if let Some(dir) = &ctx.output_dir {
        let rates_path = dir.join("attention_rates.csv");
        write_file(&rates_path, matrix_csv(&rates).as_bytes())?;
        files.push(rates_path);
        if let Some(s) = &spikes {
            let p = dir.join("attention_spikes.spkt");
            write_file(&p, &s.to_spkt_bytes())?;
            files.push(p);
        }
    }
    let mode = match a.mode {
        AttendMode::Circuit => "circuit",
        AttendMode::Ssa => "ssa",
        AttendMode::Exact => "exact",
    };
    let meta = json!({
        "mode": mode,
        "tokens": tokens,
        "dims": dims,
        "steps": a.steps,
        "seed": ctx.seed,
        "spikes_used": spikes_used,
        "frobenius_error_vs_exact": exact_error,
        "rates": rates.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
        "files": files,
    });
    if let Some(dir) = &ctx.output_dir {
        let p = dir.join("attention.json");
        let text = serde_json::to_string_pretty(&meta).map_err(|e| usage(e.to_string()))?;
        write_file(&p, format!("{text}\n").as_bytes())?;
    }
    ctx.emit(&meta, || {
        let mut s = matrix_csv(&rates);
        let _ = writeln!(s, "# mode {mode}, spikes used {spikes_used}");
        if let Some(e) = exact_error {
            let _ = writeln!(s, "# Frobenius error vs exact {e:.6}");
        }
        s
    })
}

fn cmd_encode(ctx: &Ctx, a: &EncodeArgs) -> Outcome {
    let x = read_csv_matrix(&a.input)?;
    let tensor = encode_matrix(&x, a.steps, RngSeed(ctx.seed))?;
    write_file(&a.output, &tensor.to_spkt_bytes())?;
    if let Some(p) = &a.debug_json {
        let text = serde_json::to_string(&tensor).map_err(|e| usage(e.to_string()))?;
        write_file(p, format!("{text}\n").as_bytes())?;
    }
    let meta = json!({
        "rows": tensor.rows(),
        "cols": tensor.cols(),
        "steps": tensor.steps(),
        "spikes": tensor.count(),
        "seed": ctx.seed,
        "output": a.output,
    });
    ctx.emit(&meta, || {
        format!(
            "encoded {}×{} over {} steps ({} spikes) into {}\n",
            tensor.rows(),
            tensor.cols(),
            tensor.steps(),
            tensor.count(),
            a.output.display()
        )
    })
}

fn resolve_seed(flag: Option<u64>) -> Result<(u64, bool), Failure> {
    if let Some(s) = flag {
        return Ok((s, true));
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(|s| (s, false))
            .map_err(|_| usage(format!("{SEED_ENV} must be an unsigned integer, got '{v}'"))),
        Err(_) => Ok((0, false)),
    }
}

fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    let (seed, seed_given) = resolve_seed(cli.seed)?;
    let ctx = Ctx {
        json: cli.json,
        seed,
        seed_given,
        output_dir: cli.output_dir,
        verbose: cli.verbose,
    };
    match &cli.command {
        Command::Bounds(a) => cmd_bounds(&ctx, a),
        Command::Effdim(a) => cmd_effdim(&ctx, a),
        Command::Run(a) => cmd_run(&ctx, a),
        Command::Fit(a) => cmd_fit(&ctx, a),
        Command::Attend(a) => cmd_attend(&ctx, a),
        Command::Encode(a) => cmd_encode(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Gate(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
