use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dqpt::experiment::{
    dqpt_window_report, error_surface, run_sweep, DqptOptions, ExperimentConfig, Preset, TimeSeries, DEFAULT_THRESHOLD,
};
use dqpt::{Error, Result};

#[derive(Parser)]
#[command(name = "dqpt", version, about = "Noisy Ising quench dynamics: MPDO, dense and circuit simulators with zero-noise extrapolation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep from a TOML config or a named preset.
    Run {
        config: Option<PathBuf>,
        #[arg(long, value_enum, conflicts_with = "config")]
        preset: Option<Preset>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the resolved config as TOML and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Error surface ε(γ, t) from an ideal series and mitigated series.
    Surface {
        #[arg(long)]
        ideal: PathBuf,
        /// Mitigated series as GAMMA=PATH, repeatable.
        #[arg(long = "mitigated", value_parser = parse_labeled, required = true)]
        mitigated: Vec<(f64, PathBuf)>,
        #[arg(long, default_value = "Czz")]
        observable: String,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Look for split return-rate peaks inside ideal peak windows.
    DqptReport {
        #[arg(long)]
        ideal: PathBuf,
        /// Noisy series as GAMMA=PATH, repeatable.
        #[arg(long = "noisy", value_parser = parse_labeled, required = true)]
        noisy: Vec<(f64, PathBuf)>,
        #[arg(long, default_value_t = 0.5)]
        half_width: f64,
        #[arg(long, default_value_t = 1e-2)]
        peak_prominence: f64,
        #[arg(long, default_value_t = 1e-4)]
        extremum_prominence: f64,
        /// Write the full report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle cross-check suite.
    Validate,
}

fn parse_labeled(s: &str) -> std::result::Result<(f64, PathBuf), String> {
    let (g, p) = s.split_once('=').ok_or_else(|| format!("expected GAMMA=PATH, got {s:?}"))?;
    let g: f64 = g.parse().map_err(|e| format!("bad gamma {g:?}: {e}"))?;
    Ok((g, PathBuf::from(p)))
}

fn read_series(path: &Path) -> Result<TimeSeries> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => TimeSeries::read_json(path),
        _ => TimeSeries::read_csv(path),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            preset,
            workers,
            seed,
            out,
            print_config,
        } => {
            let mut cfg = match (config, preset) {
                (Some(path), _) => ExperimentConfig::load(&path)?,
                (None, Some(p)) => ExperimentConfig::preset(p),
                (None, None) => return Err(Error::Config("give a config path or --preset".into())),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            cfg.validate()?;
            if print_config {
                print!("{}", cfg.to_toml_string()?);
                return Ok(true);
            }
            let (_, manifest) = run_sweep(&cfg, workers)?;
            println!(
                "wrote {} files to {} in {:.1} s",
                manifest.files.len() + 1,
                cfg.output_dir.display(),
                manifest.wall_time_seconds
            );
            println!("betas: {:?}", manifest.betas);
            Ok(true)
        }
        Command::Surface {
            ideal,
            mitigated,
            observable,
            threshold,
            out,
        } => {
            let ideal = read_series(&ideal)?;
            let loaded: Vec<(f64, TimeSeries)> = mitigated
                .iter()
                .map(|(g, p)| Ok((*g, read_series(p)?)))
                .collect::<Result<_>>()?;
            let refs: Vec<(f64, &TimeSeries)> = loaded.iter().map(|(g, s)| (*g, s)).collect();
            let surface = error_surface(&ideal, &refs, &observable, threshold)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Config(format!("{}: {e}", out.display())))?;
            surface.write_csv(&out.join(format!("surface_{observable}.csv")))?;
            surface.write_threshold_csv(&out.join(format!("threshold_{observable}.csv")))?;
            println!("gamma\tt_star");
            for (g, t) in &surface.threshold_curve {
                println!("{g}\t{t}");
            }
            Ok(true)
        }
        Command::DqptReport {
            ideal,
            noisy,
            half_width,
            peak_prominence,
            extremum_prominence,
            out,
        } => {
            let ideal = read_series(&ideal)?;
            let loaded: Vec<(f64, TimeSeries)> = noisy
                .iter()
                .map(|(g, p)| Ok((*g, read_series(p)?)))
                .collect::<Result<_>>()?;
            let refs: Vec<(f64, &TimeSeries)> = loaded.iter().map(|(g, s)| (*g, s)).collect();
            let options = DqptOptions {
                half_width,
                peak_prominence,
                extremum_prominence,
            };
            let report = dqpt_window_report(&ideal, &refs, options)?;
            for w in &report.windows {
                println!("window t = {:.3} [{:.3}, {:.3}]", w.t_peak, w.t_lo, w.t_hi);
                for s in &w.noisy {
                    println!(
                        "  gamma = {}: doubling = {}, maxima {:?}, minima {:?}",
                        s.gamma, s.doubling, s.maxima, s.minima
                    );
                }
            }
            if let Some(path) = out {
                let file = std::fs::File::create(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                serde_json::to_writer_pretty(file, &report)?;
            }
            Ok(true)
        }
        Command::Validate => {
            let results = dqpt::validate::run_all();
            for r in &results {
                println!("[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            Ok(results.iter().all(|r| r.passed))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
