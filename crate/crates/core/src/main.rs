use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use pf_collapse::check::run_checks;
use pf_collapse::experiments::{
    compare_theory, preset, run_consistency, run_grid, ConsistencyConfig, ExperimentGrid, TestFunction,
    DEFAULT_BUDGET, DEFAULT_SEED, MIN_REPS_FOR_COMPARISON,
};
use pf_collapse::io::{
    parse_config, theory_report, to_json, unix_now, verify, write_collapse, write_consistency, write_file,
    CellState, CellStatus, CollapseConfig, Format, Manifest, RunConfig, TheoryRequest,
};
use pf_collapse::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "pf-collapse", version, about = "Importance-weight collapse experiments for particle filters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Replicates per cell
    #[arg(long)]
    reps: Option<usize>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (results do not depend on this)
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Subcommand)]
enum Command {
    /// Run a collapse grid from a preset or a config file
    Collapse {
        /// fig1, fig2-iid or fig2-mv
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Largest particle count a cell may use
        #[arg(long)]
        budget: Option<usize>,
        /// Run every preset cell at full replicate count
        #[arg(long)]
        full: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Posterior-expectation consistency runs under the Gaussian model
    Consistency {
        #[arg(long, conflicts_with_all = ["d", "n"])]
        config: Option<PathBuf>,
        #[arg(long)]
        d: Option<usize>,
        /// Particle counts, comma separated
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the asymptotic predictors and print them as JSON
    Theory {
        #[arg(long, conflicts_with_all = ["n", "d", "sigma_sq"])]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<f64>,
        #[arg(long)]
        d: Option<f64>,
        #[arg(long, default_value_t = 2.0)]
        sigma_sq: f64,
        /// Minimum score to condition on (defaults to the Gumbel mean)
        #[arg(long, allow_hyphen_values = true)]
        s1: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        z0: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Also write theory.json here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fast invariant suite
    Check {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Print the digests recorded for an output directory
    Manifest {
        dir: PathBuf,
        /// Re-hash every listed file and report mismatches
        #[arg(long)]
        verify: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::InvalidArgument(_) => EXIT_VALIDATION,
                _ => EXIT_RUNTIME,
            })
        }
    }
}

fn read_config(path: &Path) -> Result<RunConfig, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_config(&text)
}

fn set_threads(threads: Option<usize>) -> Result<(), Error> {
    if let Some(k) = threads {
        if k == 0 {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

fn run(cmd: Command) -> Result<u8, Error> {
    match cmd {
        Command::Collapse {
            preset: name,
            config,
            budget,
            full,
            common,
        } => {
            let mut cfg = match (name, config) {
                (Some(name), None) => CollapseConfig {
                    grid: preset(&name, full)?,
                    budget: DEFAULT_BUDGET,
                },
                (None, Some(path)) => match read_config(&path)? {
                    RunConfig::Collapse(c) => c,
                    _ => return Err(Error::Config(vec!["kind: collapse expected".into()])),
                },
                _ => return Err(Error::InvalidArgument("one of --preset or --config is required".into())),
            };
            if let Some(b) = budget {
                cfg.budget = b;
            }
            if let Some(s) = common.seed {
                cfg.grid.master_seed = s;
            }
            if let Some(r) = common.reps {
                cfg.grid = cfg.grid.with_reps(r);
            }
            set_threads(common.threads)?;
            collapse(&cfg.grid, cfg.budget, &common.out, common.format.into())
        }
        Command::Consistency { config, d, n, common } => {
            let mut cfg = match config {
                Some(path) => match read_config(&path)? {
                    RunConfig::Consistency(c) => c,
                    _ => return Err(Error::Config(vec!["kind: consistency expected".into()])),
                },
                None => ConsistencyConfig {
                    d: d.ok_or_else(|| Error::InvalidArgument("--d or --config is required".into()))?,
                    n_list: if n.is_empty() { vec![1_000, 10_000, 100_000] } else { n },
                    tests: vec![TestFunction::Indicator { coord: 0, threshold: 0.0 }],
                    reps: 100,
                    master_seed: DEFAULT_SEED,
                },
            };
            if let Some(s) = common.seed {
                cfg.master_seed = s;
            }
            if let Some(r) = common.reps {
                cfg.reps = r;
            }
            set_threads(common.threads)?;
            consistency(&cfg, &common.out, common.format.into())
        }
        Command::Theory {
            config,
            n,
            d,
            sigma_sq,
            s1,
            z0,
            eps,
            out,
        } => {
            let req = match config {
                Some(path) => match read_config(&path)? {
                    RunConfig::Theory(t) => t,
                    _ => return Err(Error::Config(vec!["kind: theory expected".into()])),
                },
                None => TheoryRequest {
                    n: n.ok_or_else(|| Error::InvalidArgument("--n or --config is required".into()))?,
                    d: d.ok_or_else(|| Error::InvalidArgument("--d or --config is required".into()))?,
                    sigma_sq,
                    s1,
                    z0,
                    eps,
                },
            };
            let body = to_json(&theory_report(&req)?);
            print!("{body}");
            if let Some(dir) = out {
                let started = unix_now();
                write_file(&dir.join("theory.json"), &body)?;
                let config = serde_json::to_value(&req).unwrap_or_default();
                Manifest::new("theory", 0, config, started).finish(&dir, &["theory.json".into()])?;
            }
            Ok(0)
        }
        Command::Check { seed } => {
            let results = run_checks(seed)?;
            let mut failed = 0;
            for c in &results {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.pass);
            }
            println!("{} checks, {failed} failed", results.len());
            Ok(if failed == 0 { 0 } else { EXIT_RUNTIME })
        }
        Command::Manifest { dir, verify: check } => {
            let m = Manifest::load(&dir)?;
            for f in &m.files {
                println!("{}  {}", f.sha256, f.name);
            }
            if !check {
                return Ok(0);
            }
            let bad = verify(&dir)?;
            for b in &bad {
                eprintln!("mismatch: {b}");
            }
            if bad.is_empty() {
                println!("all {} files verified", m.files.len());
                Ok(0)
            } else {
                Ok(EXIT_VALIDATION)
            }
        }
    }
}

fn collapse(grid: &ExperimentGrid, budget: usize, out: &Path, format: Format) -> Result<u8, Error> {
    let started = unix_now();
    let outcome = run_grid(grid, budget)?;
    let mut names = write_collapse(out, &outcome, format)?;

    let comparable: Vec<_> = outcome
        .results
        .iter()
        .filter(|c| c.summary.successful >= MIN_REPS_FOR_COMPARISON)
        .cloned()
        .collect();
    if !comparable.is_empty() {
        write_file(&out.join("comparison.json"), &to_json(&compare_theory(&comparable, None)?))?;
        names.push("comparison.json".into());
    }

    let mut manifest = Manifest::new(
        "collapse",
        grid.master_seed,
        json!({ "grid": grid, "budget": budget }),
        started,
    );
    for c in &outcome.results {
        manifest.cells.push(CellStatus {
            d: c.d,
            n: c.n,
            state: if c.failed_reps.is_empty() { CellState::Done } else { CellState::Partial },
            successful: c.summary.successful,
            failed: c.summary.failed,
            note: None,
        });
    }
    for s in &outcome.skipped {
        manifest.cells.push(CellStatus {
            d: s.d,
            n: s.n,
            state: CellState::Skipped,
            successful: 0,
            failed: 0,
            note: Some(s.reason.clone()),
        });
    }
    manifest.finish(out, &names)?;
    for c in &outcome.results {
        println!(
            "{} {} d={} n={}: mean w_max {:.4}, median {:.4}",
            c.experiment,
            c.kind.tag(),
            c.d,
            c.n,
            c.summary.mean_wmax,
            c.summary.median_wmax
        );
    }
    Ok(if outcome.skipped.is_empty() { 0 } else { EXIT_PARTIAL })
}

fn consistency(cfg: &ConsistencyConfig, out: &Path, format: Format) -> Result<u8, Error> {
    let started = unix_now();
    let results = run_consistency(cfg)?;
    let names = write_consistency(out, &results, format)?;
    let echo = json!({
        "d": cfg.d,
        "n": cfg.n_list,
        "reps": cfg.reps,
        "tests": cfg.tests.iter().map(TestFunction::name).collect::<Vec<_>>(),
    });
    let mut manifest = Manifest::new("consistency", cfg.master_seed, echo, started);
    for r in &results {
        manifest.cells.push(CellStatus {
            d: r.d,
            n: r.n,
            state: CellState::Done,
            successful: r.reps.len(),
            failed: 0,
            note: None,
        });
        for t in &r.tests {
            println!(
                "d={} n={} {}: median |error| {:.4e}, resampled KS {:.4}",
                r.d, r.n, t.name, t.median_abs_error, r.median_resample_ks
            );
        }
    }
    manifest.finish(out, &names)?;
    Ok(0)
}
