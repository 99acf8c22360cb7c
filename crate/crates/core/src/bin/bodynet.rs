use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bodynet::calibration::{bundled_targets, calibrate, load_calibration, load_targets, save_calibration};
use bodynet::experiment::{export_table, reproduce_targets, run_experiment, ExperimentKind, ExperimentParams};
use bodynet::frame::{replay_log, write_frames_csv};
use bodynet::rf::InterferenceModel;
use bodynet::scenario::{preset_names, resolve_scenario, write_atomic};
use bodynet::{Error, Result};

#[derive(Parser)]
#[command(name = "bodynet", version, about = "Body-worn sensor network simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and write its result files.
    Run {
        /// echo, star, classify, energy or scan
        kind: ExperimentKind,
        /// Scenario file, or one of the bundled preset names.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        channel: Option<u8>,
        #[arg(long, allow_hyphen_values = true)]
        power: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        runs: Option<u32>,
        #[arg(long)]
        messages: Option<u32>,
        /// Battery capacity for energy runs, mAh.
        #[arg(long)]
        battery: Option<f64>,
        /// Radio duty fraction for energy runs.
        #[arg(long)]
        radio_duty: Option<f64>,
        /// Calibration file from `calibrate`; the bundled fit is used otherwise.
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the interference model to measured success ratios.
    Calibrate {
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long, default_value = "calibration.toml")]
        out: PathBuf,
    },
    /// Decode a binary frame log to CSV.
    ReplayLog {
        file: PathBuf,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun every target configuration and write one CSV per target group.
    Tables {
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the bundled scenario presets.
    Presets,
}

fn model(path: Option<&Path>) -> Result<InterferenceModel> {
    path.map_or_else(|| Ok(InterferenceModel::default()), load_calibration)
}

fn targets(path: Option<&Path>) -> Result<Vec<bodynet::calibration::Target>> {
    path.map_or_else(|| Ok(bundled_targets()), load_targets)
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run {
            kind,
            scenario,
            channel,
            power,
            seed,
            runs,
            messages,
            battery,
            radio_duty,
            calibration,
            out,
        } => {
            let scenario = scenario.as_deref().map(resolve_scenario).transpose()?;
            if kind.needs_scenario() && scenario.is_none() {
                return Err(Error::Scenario(format!("`{kind}` needs --scenario")));
            }
            let mut p = scenario.as_ref().map(ExperimentParams::for_scenario).unwrap_or_default();
            if let Some(c) = channel {
                p.channel = c;
            }
            if let Some(v) = power {
                p.power_dbm = v;
            }
            if let Some(v) = runs {
                p.runs = v;
            }
            if let Some(v) = messages {
                p.n_messages = v;
            }
            if let Some(v) = battery {
                p.battery_mah = v;
            }
            if let Some(v) = radio_duty {
                p.radio_duty = v;
            }
            let exp = run_experiment(kind, scenario.as_ref(), &p, seed, &model(calibration.as_deref())?)?;
            for f in exp.write_to(&out)? {
                println!("{}", out.join(f).display());
            }
        }
        Cmd::Calibrate { targets: t, out } => {
            let rep = calibrate(&targets(t.as_deref())?)?;
            println!("group,scenario,channel,power_dbm,condition,target_pct,predicted_pct,role");
            for r in &rep.rows {
                let t = &r.target;
                println!(
                    "{},{},{},{},{},{:.2},{:.3},{:?}",
                    t.group, t.scenario, t.channel, t.power_dbm, t.condition, t.mean_pct, r.predicted_pct, t.role
                );
            }
            eprintln!(
                "midpoint {:.4} dB, slope {:.4} dB, oven roll-off {:.4} dB/MHz, rms {:.4} pp",
                rep.model.isr_midpoint_db, rep.model.isr_slope_db, rep.model.oven_rolloff_db_per_mhz, rep.rms_fit_pp
            );
            save_calibration(&rep.model, &out)?;
            eprintln!("wrote {}", out.display());
        }
        Cmd::ReplayLog { file, out } => {
            let bytes = std::fs::read(&file).map_err(|e| Error::Io {
                path: file.display().to_string(),
                source: e,
            })?;
            let records = replay_log(&bytes)?;
            let mut frames = Vec::with_capacity(records.len());
            let mut bad = 0usize;
            for r in records {
                match r {
                    Ok(f) => frames.push(f),
                    Err(e) => {
                        bad += 1;
                        eprintln!("record {}: {e}", frames.len() + bad);
                    }
                }
            }
            let mut buf = Vec::new();
            write_frames_csv(&frames, &mut buf)?;
            match out {
                Some(p) => write_atomic(p, &buf)?,
                None => {
                    let mut out = std::io::stdout().lock();
                    if let Err(e) = out.write_all(&buf).and_then(|()| out.flush()) {
                        if e.kind() != std::io::ErrorKind::BrokenPipe {
                            return Err(Error::Io { path: "<stdout>".into(), source: e });
                        }
                    }
                }
            }
            if bad > 0 {
                return Err(Error::Scenario(format!("{bad} record(s) failed the CRC check")));
            }
        }
        Cmd::Tables {
            targets: t,
            calibration,
            seed,
            out,
        } => {
            let rows = reproduce_targets(&targets(t.as_deref())?, &model(calibration.as_deref())?, seed)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.display().to_string(),
                source: e,
            })?;
            let mut groups: Vec<&str> = rows.iter().map(|(t, _)| t.group.as_str()).collect();
            groups.dedup();
            for g in groups {
                let results: Vec<_> = rows.iter().filter(|(t, _)| t.group == g).map(|(_, r)| r.clone()).collect();
                let path = out.join(format!("{g}.csv"));
                write_atomic(&path, export_table(&results).as_bytes())?;
                println!("{}", path.display());
            }
        }
        Cmd::Presets => {
            for n in preset_names() {
                println!("{n}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bodynet: {e}");
            ExitCode::FAILURE
        }
    }
}
