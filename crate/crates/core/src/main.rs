use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use beamslice::config::{ConfigSource, RunConfig};
use beamslice::montecarlo::{
    build_pool, derive_seed, evaluate_rotations, learn_rotations, run_point, run_sweep, write_atomic, write_csv,
    SweepResult,
};
use beamslice::quantizer::{QuantizerSpec, Resolution, MAX_BITS};
use beamslice::selftest;
use beamslice::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_SELFTEST: u8 = 4;

#[derive(Parser)]
#[command(name = "beamslice", version, about = "Beam-slicing jammer mitigation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the base configuration as a single point.
    Run(RunArgs),
    /// Simulate every point of the configured grid.
    Sweep(RunArgs),
    /// Learn per-cluster rotations by coordinate descent.
    LearnRotations(RunArgs),
    /// Print step size, Bussgang gain and distortion per resolution.
    QuantizerTable {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in oracle and invariant checks.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled configuration (fig1a, fig1b, fig4, fig5, fig6, fig7, fig8, transforms).
    #[arg(long)]
    preset: Option<String>,
    /// Override a key, e.g. `--set frame.snr_db=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn source(&self) -> Result<ConfigSource, Error> {
        let mut src = match (&self.config, &self.preset) {
            (Some(p), _) => ConfigSource::load(p)?,
            (None, Some(name)) => ConfigSource::preset(name)?,
            (None, None) => ConfigSource::defaults(),
        };
        for o in &self.overrides {
            src.set(o)?;
        }
        if let Some(w) = self.workers {
            src.set(&format!("workers={w}"))?;
        }
        if let Some(s) = self.seed {
            src.set(&format!("seed={s}"))?;
        }
        Ok(src)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::LearnRotations(a) => cmd_learn(&a),
        Command::QuantizerTable { out } => cmd_quantizer_table(out.as_deref()),
        Command::Selftest { seed } => return cmd_selftest(seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => EXIT_CONFIG,
                _ => EXIT_RUNTIME,
            })
        }
    }
}

/// Atomic write to `path`, or stdout when no path is configured.
fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<(), Error>) -> Result<(), Error> {
    match path {
        Some(p) => {
            write_atomic(p, f)?;
            eprintln!("wrote {}", p.display());
            Ok(())
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn csv_path(args: &RunArgs, cfg: &RunConfig) -> Option<PathBuf> {
    args.out.clone().or_else(|| cfg.output.csv.clone())
}

fn cmd_run(args: &RunArgs) -> Result<(), Error> {
    let src = args.source()?;
    let cfg = src.resolve()?;
    let point = cfg.point();
    let pool = build_pool(cfg.workers)?;
    let seed = derive_seed(cfg.seed, 0);
    let mut record = run_point(&point.scenario, &point.frame, cfg.trials, seed, Some(&pool))?;
    record.config_hash = point.config_hash.clone();
    if let Some(msg) = &record.error {
        return Err(Error::Domain(format!("{} of {} trials failed; first: {msg}", record.failures, record.trials)));
    }
    let results = [SweepResult { point, record }];
    emit(csv_path(args, &cfg).as_deref(), |w| write_csv(w, &results))
}

fn cmd_sweep(args: &RunArgs) -> Result<(), Error> {
    let src = args.source()?;
    let cfg = src.resolve()?;
    let points = src.sweep_points()?;
    let results = run_sweep(&points, cfg.trials, cfg.seed, cfg.sweep.common_seeds, cfg.workers)?;
    let failed = results.iter().filter(|r| r.record.is_failed()).count();
    emit(csv_path(args, &cfg).as_deref(), |w| write_csv(w, &results))?;
    if failed > 0 {
        return Err(Error::Domain(format!("{failed} of {} points failed", results.len())));
    }
    Ok(())
}

fn cmd_learn(args: &RunArgs) -> Result<(), Error> {
    let src = args.source()?;
    let cfg = src.resolve()?;
    let hash = cfg.config_hash();
    let pool = build_pool(cfg.workers)?;
    let learned = learn_rotations(&cfg.channel, &cfg.frame, &cfg.learn, cfg.seed, Some(&pool))?;

    let angles_path = args.out.clone().or_else(|| cfg.output.angles.clone());
    let trace_path = cfg.output.trace.clone().or_else(|| {
        angles_path
            .as_ref()
            .map(|p| p.with_extension("trace.csv"))
    });
    emit(angles_path.as_deref(), |w| {
        writeln!(w, "# config_hash={hash} seed={}", cfg.seed)?;
        for phi in &learned.rotations {
            writeln!(w, "{phi:.17e}")?;
        }
        Ok(())
    })?;
    let clusters = learned.rotations.len().max(1);
    emit(trace_path.as_deref(), |w| {
        writeln!(w, "update,sweep,cluster,ber,seed,config_hash")?;
        for (k, ber) in learned.trace.iter().enumerate() {
            let (sweep, cluster) = if k == 0 {
                (0, String::new())
            } else {
                ((k - 1) / clusters + 1, ((k - 1) % clusters).to_string())
            };
            writeln!(w, "{k},{sweep},{cluster},{ber:.17e},{},{hash}", cfg.seed)?;
        }
        Ok(())
    })?;

    // training-set comparison with fresh noise
    let b = cfg.channel.antennas;
    let c = b / cfg.frame.cluster_size;
    let noise_seed = derive_seed(cfg.seed, u64::MAX);
    for (name, phis) in [
        ("learned", learned.rotations.clone()),
        ("uniform", beamslice::slicer::default_rotations(b, c)),
        ("zero", vec![0.0; c]),
    ] {
        let r = evaluate_rotations(&cfg.channel, &cfg.frame, &cfg.learn, &phis, cfg.seed, noise_seed)?;
        let (lo, hi) = r.ber_ci();
        eprintln!("{name:>8}: training-set BER {:.4e} [{lo:.4e}, {hi:.4e}]", r.ber());
    }
    Ok(())
}

fn cmd_quantizer_table(out: Option<&Path>) -> Result<(), Error> {
    emit(out, |w| {
        writeln!(w, "q,step,gamma,distortion")?;
        for q in 1..=MAX_BITS {
            let s = QuantizerSpec::new(Resolution::Bits(q))?;
            writeln!(w, "{q},{:.10},{:.10},{:.10e}", s.step, s.gain, s.distortion)?;
        }
        Ok(())
    })
}

fn cmd_selftest(seed: u64) -> ExitCode {
    let results = selftest::run_all(seed);
    let mut ok = true;
    for r in &results {
        println!("[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        ok &= r.passed;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_SELFTEST)
    }
}
