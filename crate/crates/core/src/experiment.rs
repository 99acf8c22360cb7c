//! Experiment orchestration: dispatches a run to the simulators, collects a
//! self-describing result and the files it produces.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibration::Target;
use crate::channel_select::{scan, select_channel, write_scan_csv, ScanReport};
use crate::classifier::{classify_trace, detect_abnormal, write_events_csv, AbnormalEvent, ActivityClass, ClassifierConfig};
use crate::energy::{
    active_only_components, average_current, battery_life_hours, component_average, default_components,
    simulate_energy, write_energy_csv, Battery, ComponentCurrent, ComponentUsage, DutyProfile, EnergyReport,
    ACCELEROMETER, MICROCONTROLLER, RADIO,
};
use crate::error::{param, Error, Result};
use crate::frame::{encode_log, replay_log, write_frames_csv};
use crate::link::{run_echo_test, run_star_network, EchoTestConfig, RunStats, StarConfig};
use crate::motion::{compose_schedule, mix_seed, ActivityKind, AccelTrace, DEFAULT_RATE_HZ};
use crate::rf::{ChannelSpec, InterferenceModel};
use crate::scenario::{write_atomic, Scenario};
use crate::sensor::{run_trace, SensorConfig, SensorState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Echo,
    Star,
    Classify,
    Energy,
    Scan,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Echo,
        ExperimentKind::Star,
        ExperimentKind::Classify,
        ExperimentKind::Energy,
        ExperimentKind::Scan,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Echo => "echo",
            ExperimentKind::Star => "star",
            ExperimentKind::Classify => "classify",
            ExperimentKind::Energy => "energy",
            ExperimentKind::Scan => "scan",
        }
    }

    pub fn needs_scenario(self) -> bool {
        matches!(self, ExperimentKind::Echo | ExperimentKind::Star | ExperimentKind::Scan)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| param(format!("unknown experiment kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub activity: ActivityKind,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub channel: u8,
    pub power_dbm: f64,
    /// Free-form label carried into exported tables.
    pub condition: String,
    pub runs: u32,
    pub n_messages: u32,
    pub message_len_chars: u32,
    pub timeout_ms: f64,
    /// Activity schedule for star, classify and (optionally) energy runs.
    pub schedule: Vec<ScheduleEntry>,
    pub rate_hz: f64,
    pub battery_mah: f64,
    pub accel_duty: f64,
    pub mcu_duty: f64,
    pub radio_duty: f64,
    /// Use the non-zero sleep draws instead of the active-only arithmetic.
    pub include_sleep_currents: bool,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            channel: 11,
            power_dbm: 0.0,
            condition: String::new(),
            runs: 10,
            n_messages: 1000,
            message_len_chars: 32,
            timeout_ms: 100.0,
            schedule: Vec::new(),
            rate_hz: DEFAULT_RATE_HZ,
            battery_mah: 6600.0,
            accel_duty: 1.0,
            mcu_duty: 1.0,
            radio_duty: 1.0,
            include_sleep_currents: false,
        }
    }
}

impl ExperimentParams {
    /// Defaults with the scenario's operating channel and power.
    pub fn for_scenario(s: &Scenario) -> Self {
        Self {
            channel: s.channel,
            power_dbm: s.tx_power_dbm,
            ..Self::default()
        }
    }

    fn schedule_or_default(&self) -> Vec<(ActivityKind, f64)> {
        if self.schedule.is_empty() {
            use ActivityKind::*;
            vec![(Rest, 5.0), (Fall, 3.0), (Rest, 5.0), (SlowWalk, 5.0), (Jump, 3.0), (Rest, 5.0)]
        } else {
            self.schedule.iter().map(|e| (e.activity, e.duration_s)).collect()
        }
    }

    fn echo_config(&self) -> Result<EchoTestConfig> {
        let cfg = EchoTestConfig {
            n_messages: self.n_messages,
            message_len_chars: self.message_len_chars,
            timeout_ms: self.timeout_ms,
            runs: self.runs,
            channel: ChannelSpec::wpan(self.channel)?,
            tx_power_dbm: self.power_dbm,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub node_id: u8,
    pub emitted: u32,
    pub delivered: u32,
    pub collided: u32,
    pub delivery_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Report {
    Echo {
        stats: RunStats,
    },
    Star {
        nodes: Vec<NodeSummary>,
        logged_frames: usize,
        log_crc_errors: usize,
    },
    Classify {
        events: Vec<AbnormalEvent>,
        windows: Vec<(f64, ActivityClass)>,
    },
    Energy {
        average_ma: f64,
        life_h: f64,
        components: Vec<ComponentUsage>,
        simulated: Option<EnergyReport>,
    },
    Scan {
        report: ScanReport,
        selected_channel: u8,
    },
}

/// Everything needed to regenerate the run bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub kind: ExperimentKind,
    pub scenario: Option<Scenario>,
    pub params: ExperimentParams,
    pub seed: u64,
    pub calibration: InterferenceModel,
    pub report: Report,
}

impl ExperimentResult {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Scenario(format!("cannot serialize result: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            source_name: "result json".into(),
            message: e.to_string(),
        })
    }

    /// Runs the embedded configuration again.
    pub fn rerun(&self) -> Result<Experiment> {
        run_experiment(self.kind, self.scenario.as_ref(), &self.params, self.seed, &self.calibration)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file_name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub result: ExperimentResult,
    pub artifacts: Vec<Artifact>,
}

impl Experiment {
    /// Writes `result.json` and every artifact into `dir`, each atomically.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<Vec<String>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        write_atomic(dir.join("result.json"), self.result.to_json()?.as_bytes())?;
        written.push("result.json".to_string());
        for a in &self.artifacts {
            write_atomic(dir.join(&a.file_name), &a.bytes)?;
            written.push(a.file_name.clone());
        }
        Ok(written)
    }

    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.file_name == name)
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn with_context(s: Option<&Scenario>, kind: ExperimentKind, e: Error) -> Error {
    match (s, e) {
        (Some(s), Error::Scenario(m)) => Error::Scenario(format!("{kind} on `{}`: {m}", s.name)),
        (Some(s), Error::Parameter(m)) => Error::Parameter(format!("{kind} on `{}`: {m}", s.name)),
        (_, e) => e,
    }
}

fn require(s: Option<&Scenario>, kind: ExperimentKind) -> Result<&Scenario> {
    s.ok_or_else(|| Error::Scenario(format!("{kind} experiment needs a scenario")))
}

pub fn run_experiment(
    kind: ExperimentKind,
    scenario: Option<&Scenario>,
    params: &ExperimentParams,
    seed: u64,
    model: &InterferenceModel,
) -> Result<Experiment> {
    run_inner(kind, scenario, params, seed, model).map_err(|e| with_context(scenario, kind, e))
}

fn run_inner(
    kind: ExperimentKind,
    scenario: Option<&Scenario>,
    params: &ExperimentParams,
    seed: u64,
    model: &InterferenceModel,
) -> Result<Experiment> {
    model.validate()?;
    let mut artifacts = Vec::new();
    let report = match kind {
        ExperimentKind::Echo => {
            let s = require(scenario, kind)?;
            let stats = run_echo_test(&params.echo_config()?, &s.link_scenario(model), seed)?;
            artifacts.push(Artifact {
                file_name: "echo.csv".into(),
                bytes: csv_bytes(|b| write_echo_csv(params, &stats, b))?,
            });
            Report::Echo { stats }
        }
        ExperimentKind::Star => {
            let s = require(scenario, kind)?;
            if s.nodes.sensors.is_empty() {
                return Err(Error::Scenario("star experiment needs at least one sensor position".into()));
            }
            let schedule = params.schedule_or_default();
            let traces = (0..s.nodes.sensors.len())
                .map(|i| compose_schedule(&schedule, params.rate_hz, mix_seed(seed, i as u64 + 1)))
                .collect::<Result<Vec<_>>>()?;
            let duration: f64 = schedule.iter().map(|(_, d)| d).sum();
            let cfg = StarConfig {
                sensor: SensorConfig {
                    sample_rate_hz: params.rate_hz,
                    ..SensorConfig::default()
                },
                ..StarConfig::new(ChannelSpec::wpan(params.channel)?, params.power_dbm, duration)
            };
            let res = run_star_network(&s.link_scenario(model), &traces, &cfg, seed)?;
            let frames = res.logged_frames();
            let log = encode_log(&frames);
            let log_crc_errors = replay_log(&log)?.iter().filter(|r| r.is_err()).count();
            artifacts.push(Artifact {
                file_name: "frames.bslog".into(),
                bytes: log,
            });
            artifacts.push(Artifact {
                file_name: "frames.csv".into(),
                bytes: csv_bytes(|b| write_frames_csv(&frames, b))?,
            });
            let nodes = res
                .nodes
                .iter()
                .map(|n| NodeSummary {
                    node_id: n.node_id,
                    emitted: n.emitted.len() as u32,
                    delivered: n.stats.per_run_success[0],
                    collided: n.collided,
                    delivery_ratio: n.stats.mean_ratio,
                })
                .collect::<Vec<_>>();
            artifacts.push(Artifact {
                file_name: "delivery.csv".into(),
                bytes: csv_bytes(|b| write_delivery_csv(&nodes, b))?,
            });
            Report::Star {
                nodes,
                logged_frames: frames.len(),
                log_crc_errors,
            }
        }
        ExperimentKind::Classify => {
            let trace = compose_schedule(&params.schedule_or_default(), params.rate_hz, seed)?;
            let cfg = ClassifierConfig::default();
            let events = detect_abnormal(&trace, &cfg)?;
            let windows = classify_trace(&trace, &cfg)?;
            artifacts.push(Artifact {
                file_name: "events.csv".into(),
                bytes: csv_bytes(|b| write_events_csv(&events, b))?,
            });
            artifacts.push(Artifact {
                file_name: "trace.csv".into(),
                bytes: csv_bytes(|b| trace.write_csv(b))?,
            });
            artifacts.push(Artifact {
                file_name: "trace.dat".into(),
                bytes: gnuplot_trace(&trace).into_bytes(),
            });
            Report::Classify { events, windows }
        }
        ExperimentKind::Energy => {
            let components = if params.include_sleep_currents {
                default_components()
            } else {
                active_only_components()
            };
            let duty = DutyProfile::default()
                .with(ACCELEROMETER, params.accel_duty)
                .with(MICROCONTROLLER, params.mcu_duty)
                .with(RADIO, params.radio_duty);
            let battery = Battery::new(params.battery_mah, 3.7)?;
            let average_ma = average_current(&components, &duty)?;
            let life_h = battery_life_hours(&battery, &components, &duty)?;
            let usage = duty_usage(&components, &duty, life_h)?;
            let simulated = if params.schedule.is_empty() {
                None
            } else {
                let trace = compose_schedule(&params.schedule_or_default(), params.rate_hz, seed)?;
                let state = SensorState::new(SensorConfig {
                    sample_rate_hz: params.rate_hz,
                    ..SensorConfig::default()
                })?;
                let run = run_trace(&state, &trace);
                let rep = simulate_energy(&run.timeline, &default_components(), &battery)?;
                artifacts.push(Artifact {
                    file_name: "energy_timeline.csv".into(),
                    bytes: csv_bytes(|b| write_energy_csv(&rep, b))?,
                });
                Some(rep)
            };
            let summary = EnergyReport {
                duration_h: life_h,
                components: usage.clone(),
                consumed_mah: battery.capacity_mah,
                remaining_mah: 0.0,
                projected_life_h: Some(life_h),
                exceeds_capacity: false,
            };
            artifacts.push(Artifact {
                file_name: "energy.csv".into(),
                bytes: csv_bytes(|b| write_energy_csv(&summary, b))?,
            });
            artifacts.push(Artifact {
                file_name: "life.csv".into(),
                bytes: format!("battery_mah,avg_ma,life_h\n{},{average_ma:.4},{life_h:.2}\n", params.battery_mah)
                    .into_bytes(),
            });
            Report::Energy {
                average_ma,
                life_h,
                components: usage,
                simulated,
            }
        }
        ExperimentKind::Scan => {
            let s = require(scenario, kind)?;
            let report = scan(&s.environment(model), &s.victim(params.power_dbm))?;
            artifacts.push(Artifact {
                file_name: "scan.csv".into(),
                bytes: csv_bytes(|b| write_scan_csv(&report, b))?,
            });
            Report::Scan {
                selected_channel: select_channel(&report),
                report,
            }
        }
    };
    Ok(Experiment {
        result: ExperimentResult {
            kind,
            scenario: scenario.cloned(),
            params: params.clone(),
            seed,
            calibration: *model,
            report,
        },
        artifacts,
    })
}

fn duty_usage(components: &[ComponentCurrent], duty: &DutyProfile, life_h: f64) -> Result<Vec<ComponentUsage>> {
    components
        .iter()
        .map(|c| {
            let d = duty.get(&c.name)?;
            let avg = component_average(c, d);
            Ok(ComponentUsage {
                name: c.name.clone(),
                duty: d,
                avg_ma: avg,
                mah_consumed: avg * life_h,
            })
        })
        .collect()
}

fn write_echo_csv(params: &ExperimentParams, stats: &RunStats, w: &mut Vec<u8>) -> Result<()> {
    use std::io::Write;
    writeln!(w, "power_dbm,channel,runs,n_messages,mean_pct,std_pct").map_err(|e| Error::io("<echo csv>", e))?;
    writeln!(
        w,
        "{},{},{},{},{:.2},{:.2}",
        params.power_dbm,
        params.channel,
        params.runs,
        params.n_messages,
        100.0 * stats.mean_ratio,
        100.0 * stats.std_ratio
    )
    .map_err(|e| Error::io("<echo csv>", e))?;
    writeln!(w).map_err(|e| Error::io("<echo csv>", e))?;
    writeln!(w, "run,success,sim_time_s").map_err(|e| Error::io("<echo csv>", e))?;
    for (i, (c, t)) in stats.per_run_success.iter().zip(&stats.per_run_time_s).enumerate() {
        writeln!(w, "{},{c},{t:.3}", i + 1).map_err(|e| Error::io("<echo csv>", e))?;
    }
    Ok(())
}

fn write_delivery_csv(nodes: &[NodeSummary], w: &mut Vec<u8>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Scenario(format!("csv write failed: {e}"));
    wr.write_record(["node_id", "emitted", "delivered", "collided", "delivery_ratio"]).map_err(err)?;
    for n in nodes {
        wr.write_record([
            n.node_id.to_string(),
            n.emitted.to_string(),
            n.delivered.to_string(),
            n.collided.to_string(),
            format!("{:.6}", n.delivery_ratio),
        ])
        .map_err(err)?;
    }
    wr.flush().map_err(|e| Error::io("<delivery csv>", e))
}

/// Whitespace-separated columns for gnuplot: `t ax ay az total`.
pub fn gnuplot_trace(trace: &AccelTrace) -> String {
    let mut out = String::from("# t ax ay az total\n");
    for s in &trace.samples {
        out.push_str(&format!("{:.5} {:.5} {:.5} {:.5} {:.5}\n", s.t, s.ax, s.ay, s.az, s.total()));
    }
    out
}

/// One row per echo result: power, channel, condition, mean and std in
/// percent with two decimals.
pub fn export_table(results: &[ExperimentResult]) -> String {
    let mut out = String::from("power_dbm,channel,condition,mean_pct,std_pct\n");
    for r in results {
        if let Report::Echo { stats } = &r.report {
            out.push_str(&format!(
                "{},{},{},{:.2},{:.2}\n",
                r.params.power_dbm,
                r.params.channel,
                r.params.condition,
                100.0 * stats.mean_ratio,
                100.0 * stats.std_ratio
            ));
        }
    }
    out
}

/// Runs the echo test for each target configuration.
pub fn reproduce_targets(targets: &[Target], model: &InterferenceModel, seed: u64) -> Result<Vec<(Target, ExperimentResult)>> {
    targets
        .iter()
        .map(|t| {
            let s = t.scenario()?;
            let params = ExperimentParams {
                channel: t.channel,
                power_dbm: t.power_dbm,
                condition: t.condition.clone(),
                ..ExperimentParams::for_scenario(&s)
            };
            let exp = run_experiment(ExperimentKind::Echo, Some(&s), &params, seed, model)?;
            Ok((t.clone(), exp.result))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::preset;

    #[test]
    fn energy_default_is_continuous() {
        let e = run_experiment(ExperimentKind::Energy, None, &ExperimentParams::default(), 0, &InterferenceModel::default()).unwrap();
        match &e.result.report {
            Report::Energy { life_h, average_ma, .. } => {
                assert!((life_h - 6600.0 / 51.3).abs() < 1e-9);
                assert!((average_ma - 51.3).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
        let life = String::from_utf8(e.artifact("life.csv").unwrap().bytes.clone()).unwrap();
        assert_eq!(life.lines().nth(1).unwrap(), "6600,51.3000,128.65");
    }

    #[test]
    fn scan_csv_has_sixteen_rows() {
        let s = preset("apartment").unwrap();
        let p = ExperimentParams::for_scenario(&s);
        let e = run_experiment(ExperimentKind::Scan, Some(&s), &p, 0, &InterferenceModel::default()).unwrap();
        let text = String::from_utf8(e.artifact("scan.csv").unwrap().bytes.clone()).unwrap();
        assert_eq!(text.lines().count(), 17);
    }

    #[test]
    fn missing_scenario_is_reported() {
        let err = run_experiment(ExperimentKind::Echo, None, &ExperimentParams::default(), 0, &InterferenceModel::default());
        assert!(matches!(err, Err(Error::Scenario(_))));
    }

    #[test]
    fn errors_carry_scenario_name() {
        let s = preset("apartment").unwrap();
        let p = ExperimentParams { runs: 0, ..ExperimentParams::for_scenario(&s) };
        let msg = run_experiment(ExperimentKind::Echo, Some(&s), &p, 0, &InterferenceModel::default())
            .unwrap_err()
            .to_string();
        assert!(msg.contains("apartment"), "{msg}");
    }

    #[test]
    fn empty_table_is_header_only() {
        assert_eq!(export_table(&[]), "power_dbm,channel,condition,mean_pct,std_pct\n");
    }

    #[test]
    fn json_round_trip_and_rerun() {
        let s = preset("kitchen").unwrap();
        let p = ExperimentParams { runs: 2, n_messages: 200, ..ExperimentParams::for_scenario(&s) };
        let e = run_experiment(ExperimentKind::Echo, Some(&s), &p, 77, &InterferenceModel::default()).unwrap();
        let back = ExperimentResult::from_json(&e.result.to_json().unwrap()).unwrap();
        assert_eq!(back, e.result);
        assert_eq!(back.rerun().unwrap(), e);
    }

    #[test]
    fn classify_finds_scheduled_events() {
        let e = run_experiment(ExperimentKind::Classify, None, &ExperimentParams::default(), 4, &InterferenceModel::default()).unwrap();
        match &e.result.report {
            // default schedule: a fall at 5-8 s and a jump at 18-21 s
            Report::Classify { events, .. } => {
                assert!(events.iter().any(|ev| ev.overlaps(5.0, 8.0)));
                assert!(events.iter().any(|ev| ev.overlaps(18.0, 21.0)));
            }
            other => panic!("{other:?}"),
        }
        let dat = String::from_utf8(e.artifact("trace.dat").unwrap().bytes.clone()).unwrap();
        assert!(dat.starts_with("# t ax ay az total\n"));
    }
}
