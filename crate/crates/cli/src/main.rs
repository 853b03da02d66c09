use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use paradrc::harness::verify::verify_suite;
use paradrc::harness::{preset, run_scenario, sweep, RunOutput, ScenarioConfig, PRESET_NAMES};
use paradrc::Error;

/// Environment variable naming the output directory.
const OUT_ENV: &str = "PARADRC_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "paradrc",
    version,
    about = "Multi-observer ADRC simulation harness"
)]
struct Cli {
    /// Output directory; overrides the environment and the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML file.
    Run { config: PathBuf },
    /// Run a built-in scenario.
    Preset {
        /// Preset name; omit with --list.
        name: Option<String>,
        /// List the available presets.
        #[arg(long)]
        list: bool,
        /// Print the preset as TOML instead of running it.
        #[arg(long)]
        toml: bool,
    },
    /// Check the estimation and tracking error results numerically.
    Verify,
    /// Run a scenario once per value of one parameter.
    Sweep {
        config: PathBuf,
        /// Dotted path, e.g. `observers.0.omega_o` or `control.window`.
        #[arg(long)]
        param: String,
        /// Comma-separated TOML literals.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
}

enum Failure {
    Lib(Error),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(3),
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Divergence { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(config)?;
            run_and_save(&cfg, &output_root(cli, &cfg))
        }
        Command::Preset { name, list, toml } => {
            if *list {
                for n in PRESET_NAMES {
                    println!("{n}");
                }
                return Ok(());
            }
            let name = name.as_deref().ok_or_else(|| Error::InvalidConfig {
                field: "preset".into(),
                reason: format!("name required; known: {}", PRESET_NAMES.join(", ")),
            })?;
            let cfg = preset(name)?;
            if *toml {
                print!("{}", cfg.to_toml_string()?);
                return Ok(());
            }
            run_and_save(&cfg, &output_root(cli, &cfg))
        }
        Command::Verify => {
            let report = verify_suite()?;
            println!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Verification)
            }
        }
        Command::Sweep {
            config,
            param,
            values,
        } => {
            let base = load(config)?;
            let root = output_root(cli, &base);
            let points = sweep(&base, param, values)?;
            println!("{param:<24} {:>14} best single IAE", "switched IAE");
            for p in &points {
                let best = p
                    .output
                    .metrics
                    .baselines()
                    .iter()
                    .map(|l| l.iae)
                    .fold(f64::INFINITY, f64::min);
                println!(
                    "{:<24} {:>14.6e} {}",
                    p.value,
                    p.output.metrics.switched().iae,
                    if best.is_finite() {
                        format!("{best:.6e}")
                    } else {
                        "-".into()
                    }
                );
                save(&p.config, &p.output, &root)?;
            }
            println!("wrote {}", root.display());
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Error::InvalidConfig {
        field: "config".into(),
        reason: format!("cannot read {}: {e}", path.display()),
    })?;
    Ok(ScenarioConfig::from_toml_str(&text)?)
}

fn output_root(cli: &Cli, cfg: &ScenarioConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| cfg.report.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("paradrc-out"))
}

fn run_and_save(cfg: &ScenarioConfig, root: &Path) -> Result<(), Failure> {
    let out = run_scenario(cfg)?;
    print!("{}", out.metrics);
    let dir = save(cfg, &out, root)?;
    println!("wrote {}", dir.display());
    Ok(())
}

/// Writes the resolved config, the text report and one CSV per law.
fn save(cfg: &ScenarioConfig, out: &RunOutput, root: &Path) -> Result<PathBuf, Failure> {
    let dir = root.join(slug(&cfg.name));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml_string()?)?;
    fs::write(dir.join("report.txt"), out.metrics.to_string())?;
    out.switched.trace.save(&dir.join("switched.csv"))?;
    for (j, run) in out.baselines.iter().enumerate() {
        run.trace.save(&dir.join(format!("single_{j}.csv")))?;
    }
    Ok(dir)
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
