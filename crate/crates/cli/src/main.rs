mod analysis;
mod reproduce;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nvmux::config::{hash_json, AnalysisSpec, ScenarioFile};
use nvmux::io::{read_trace, read_trace_with_unit, write_trace, TraceFormat};
use nvmux::signal::synthesize_raw;
use nvmux::{Error, Unit};
use serde_json::json;

use crate::report::ReportBuilder;
use crate::reproduce::Figure;

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 3;
const EXIT_DATA: u8 = 4;
const EXIT_ACCEPTANCE: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "nvmux", version, about = "Dual-frequency NV magnetometry/thermometry simulator")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "NVMUX_OUT_DIR", default_value = "nvmux-out")]
    out: PathBuf,
    /// Trace file format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Bin,
}

impl From<Format> for TraceFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => TraceFormat::Csv,
            Format::Bin => TraceFormat::Bin,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a scenario and write S1, S2, S_T and S_B traces.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        raw_rate: Option<f64>,
    },
    /// Analyze a directory of traces.
    Analyze {
        /// Directory holding the traces and their sidecars.
        #[arg(long)]
        traces: PathBuf,
        /// Analysis TOML.
        #[arg(long)]
        analysis: PathBuf,
    },
    /// Run a packaged end-to-end experiment and check it.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
        /// Replaces the packaged scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        raw_rate: Option<f64>,
    },
}

enum Outcome {
    Ok,
    ChecksFailed,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => {
            eprintln!("nvmux: acceptance checks failed; see checks.json");
            ExitCode::from(EXIT_ACCEPTANCE)
        }
        Err(e) => {
            eprintln!("nvmux: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::InvalidParameter { .. }
        | Error::OffAxisOutOfRegime { .. }
        | Error::CptPair(..)
        | Error::ChannelsNotSeparated { .. }
        | Error::Nyquist { .. }
        | Error::Config(_) => EXIT_CONFIG,
        Error::TraceMismatch(_)
        | Error::TooShort { .. }
        | Error::CalibrationSignalMissing { .. }
        | Error::InsufficientExcitation(_)
        | Error::EmptyBand { .. }
        | Error::UnitMismatch { .. }
        | Error::Data(_)
        | Error::Json(_) => EXIT_DATA,
    }
}

fn load_scenario(path: &Path, seed: Option<u64>, raw_rate: Option<f64>) -> nvmux::Result<ScenarioFile> {
    let file = ScenarioFile::load(path)?;
    apply_overrides(file, seed, raw_rate)
}

fn apply_overrides(mut file: ScenarioFile, seed: Option<u64>, raw_rate: Option<f64>) -> nvmux::Result<ScenarioFile> {
    if let Some(s) = seed {
        file = file.with_seed(s);
    }
    if let Some(r) = raw_rate {
        file = file.with_raw_rate(r)?;
    }
    Ok(file)
}

fn write_effective(dir: &Path, file: &ScenarioFile, hash: &str) -> nvmux::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("effective_config.toml");
    fs::write(&path, format!("# config_hash: {hash}\n{}", file.effective_toml()?))?;
    Ok(path)
}

fn run(cli: &Cli) -> nvmux::Result<Outcome> {
    let format = TraceFormat::from(cli.format);
    let dir = &cli.out;
    match &cli.command {
        Command::Simulate {
            scenario,
            seed,
            raw_rate,
        } => {
            let file = load_scenario(scenario, *seed, *raw_rate)?;
            let hash = file.config_hash();
            let seed = file.signal.seed;
            let mut report = ReportBuilder::new("simulate", &file.name, &hash, Some(seed));
            report.output(&write_effective(dir, &file, &hash)?);
            let setup = file.setup();
            let out = setup.run(&file.signal, file.output.epsilon_deg)?;
            let mut named = vec![
                ("s1".to_string(), out.s1),
                ("s2".to_string(), out.s2),
                ("s_t".to_string(), out.s_t),
                ("s_b".to_string(), out.s_b),
            ];
            if file.output.write_raw {
                let raw = synthesize_raw(&setup.sys, &setup.consts, &setup.drive, &file.signal, setup.raw_rate)?;
                named.push(("raw".to_string(), raw));
            }
            let mut stats = serde_json::Map::new();
            for (name, t) in &named {
                report.output(&write_trace(dir, name, t, format, &hash, Some(seed))?);
                stats.insert(
                    name.clone(),
                    json!({ "mean": t.mean(), "rms": t.rms(), "std": t.variance().sqrt(), "len": t.len() }),
                );
            }
            let mut results = json!({ "epsilon_deg": file.output.epsilon_deg, "traces": stats });
            if let Some(spec) = &file.analysis {
                let reference = match &spec.reference {
                    Some(p) => Some(read_trace_with_unit(p, Unit::Kelvin)?.0),
                    None => None,
                };
                let pick: Vec<(String, nvmux::TimeTrace)> = named
                    .into_iter()
                    .filter(|(n, _)| spec.traces.contains(n))
                    .collect();
                results["analysis"] = analysis::run(spec, &pick, reference.as_ref(), dir, &mut report)?;
            }
            report.finish(dir, results)?;
            Ok(Outcome::Ok)
        }
        Command::Analyze { traces, analysis } => {
            let spec = AnalysisSpec::load(analysis)?;
            let mut loaded = Vec::new();
            let mut input_hashes = Vec::new();
            for name in &spec.traces {
                let (t, meta) = read_trace_with_unit(&traces.join(name), spec.unit)?;
                input_hashes.push(meta.config_hash);
                loaded.push((name.clone(), t));
            }
            let reference = match &spec.reference {
                Some(p) => {
                    let p = if p.is_absolute() { p.clone() } else { traces.join(p) };
                    let (t, meta) = read_trace(&p)?;
                    if meta.unit != Unit::Kelvin {
                        return Err(Error::UnitMismatch {
                            expected: Unit::Kelvin.to_string(),
                            found: meta.unit.to_string(),
                        });
                    }
                    Some(t)
                }
                None => None,
            };
            let hash = hash_json(&(spec.config_hash(), &input_hashes));
            let mut report = ReportBuilder::new("analyze", &traces.display().to_string(), &hash, None);
            fs::create_dir_all(dir)?;
            let mut results = analysis::run(&spec, &loaded, reference.as_ref(), dir, &mut report)?;
            results["inputs"] = json!(input_hashes);
            report.finish(dir, results)?;
            Ok(Outcome::Ok)
        }
        Command::Reproduce {
            figure,
            scenario,
            seed,
            raw_rate,
        } => {
            let file = match scenario {
                Some(p) => load_scenario(p, *seed, *raw_rate)?,
                None => apply_overrides(ScenarioFile::from_toml_str(figure.packaged())?, *seed, *raw_rate)?,
            };
            let hash = file.config_hash();
            let mut report = ReportBuilder::new(
                &format!("reproduce {}", figure.name()),
                &file.name,
                &hash,
                Some(file.signal.seed),
            );
            report.output(&write_effective(dir, &file, &hash)?);
            let results = reproduce::run(*figure, &file, dir, format, &mut report)?;
            if report.finish(dir, results)? {
                Ok(Outcome::Ok)
            } else {
                Ok(Outcome::ChecksFailed)
            }
        }
    }
}
