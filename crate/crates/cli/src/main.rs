use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tangent_fields::harness::{
    bem_crosscheck, emit_report, estimate_all, export_fields, export_sequences, run_sweep, verify_suite, Overrides,
    RunConfig, VerifyHooks,
};

#[derive(Parser)]
#[command(name = "tangent-fields", version, about = "Gradient blow-up experiments for two nearly-touching spheres")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Export image-charge sequences and their sums.
    Sequence(Common),
    /// Scan the singular field across the gap and the mid-plane.
    Field {
        #[command(flatten)]
        common: Common,
        /// Points per scan line.
        #[arg(long, default_value_t = 401)]
        samples: usize,
    },
    /// Run the invariant checks; exits non-zero on any failure.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Scale every image charge after the first by this factor.
        #[arg(long)]
        corrupt_charges: Option<f64>,
    },
    /// Parameter sweep with CSV, JSON and SVG output.
    Sweep(Common),
    /// Compare layer-potential solves with the image series.
    BemCheck(Common),
    /// Leading-order gradient estimate and blow-up classification.
    Estimate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    epsilon: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    omega: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg =
            RunConfig::load(&self.config).with_context(|| format!("reading config {}", self.config.display()))?;
        cfg.apply(&Overrides {
            epsilon: self.epsilon.clone(),
            alpha: self.alpha.clone(),
            omega: self.omega.clone(),
            output_dir: self.out.clone(),
            workers: self.workers,
            seed: self.seed,
        })?;
        Ok(cfg)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

/// Loads the config, creates the run directory and stores the resolved config in it.
fn setup(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let cfg = common.load()?;
    let dir = cfg.prepare_run_dir()?;
    write_json(&dir.join("config.json"), &cfg)?;
    Ok((cfg, dir))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Sequence(common) => {
            let (cfg, dir) = setup(&common)?;
            let out = export_sequences(&cfg, &dir)?;
            for s in &out {
                println!("α={} ε={}: {} terms, Q = {} (+{:.1e})", s.alpha, s.epsilon, s.n_terms, s.q, s.q_tail);
            }
            println!("{}", dir.display());
            Ok(true)
        }
        Command::Field { common, samples } => {
            let (cfg, dir) = setup(&common)?;
            for f in export_fields(&cfg, &dir, samples)? {
                println!(
                    "α={} ε={} ω={}: sup|∇h| = {:.6e} at x1 = {:+.3e}",
                    f.tuple.alpha, f.tuple.epsilon, f.tuple.omega, f.gap_maximum.magnitude, f.gap_maximum.location[0]
                );
            }
            println!("{}", dir.display());
            Ok(true)
        }
        Command::Verify { common, corrupt_charges } => {
            let (cfg, dir) = setup(&common)?;
            let report = verify_suite(&cfg, VerifyHooks { corrupt_charges })?;
            write_json(&dir.join("verify.json"), &report)?;
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!("FAIL {} (α={:?}, ε={:?}): {:e} > {:e} {}", c.name, c.alpha, c.epsilon, c.value, c.limit, c.error.as_deref().unwrap_or(""));
            }
            println!(
                "{} of {} checks passed",
                report.checks.iter().filter(|c| c.passed).count(),
                report.checks.len()
            );
            println!("{}", dir.display());
            Ok(report.passed)
        }
        Command::Sweep(common) => {
            let (cfg, dir) = setup(&common)?;
            let result = run_sweep(&cfg)?;
            let failed = result.rows.iter().filter(|r| !r.is_ok()).count();
            emit_report(&result, &dir)?;
            println!("{} rows ({} failed)", result.rows.len(), failed);
            println!("{}", dir.display());
            Ok(true)
        }
        Command::BemCheck(common) => {
            let (cfg, dir) = setup(&common)?;
            let dump = cfg.dump_matrices.then(|| dir.join("matrices"));
            if let Some(d) = &dump {
                std::fs::create_dir_all(d)?;
            }
            let report = bem_crosscheck(&cfg, dump.as_deref())?;
            write_json(&dir.join("bem.json"), &report)?;
            for r in &report.rows {
                println!(
                    "α={} ε={}: Δλ series {:.8} vs solve {:.8} (rel {:.2e}); max|∇u| {:.4}, max|∇b| {:.3e}",
                    r.alpha, r.epsilon, r.series_lambda_diff, r.bem_lambda_diff_re, r.relative_deviation, r.max_grad_u, r.max_grad_b
                );
            }
            if let Some(s) = report.remainder_slope {
                println!("low-frequency remainder slope {s:.3}");
            }
            println!("{}", dir.display());
            Ok(true)
        }
        Command::Estimate(common) => {
            let (cfg, dir) = setup(&common)?;
            let records = estimate_all(&cfg);
            write_json(&dir.join("estimate.json"), &records)?;
            for r in &records {
                match (&r.classification, &r.error) {
                    (Some(c), _) => println!(
                        "α={} ε={} ω={}: {:?}, predicted {:.4e}, measured {:.4e}",
                        r.tuple.alpha, r.tuple.epsilon, r.tuple.omega, c.regime, c.predicted_scale, c.measured_scale
                    ),
                    (None, Some(e)) => println!("α={} ε={} ω={}: {e}", r.tuple.alpha, r.tuple.epsilon, r.tuple.omega),
                    _ => {}
                }
            }
            println!("{}", dir.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
