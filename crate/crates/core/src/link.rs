//! Discrete-event link simulation: the base/remote echo test and a star of
//! sensor nodes reporting to one data logger.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::frame::{SensorFrame, FRAME_LEN};
use crate::motion::{mix_seed, AccelTrace};
use crate::rf::{ChannelSpec, Point, RfEnvironment};
use crate::sensor::{run_trace, SensorConfig, SensorState};

pub const DATA_RATE_BPS: f64 = 250_000.0;
/// Fixed per-transmission overhead (preamble, turnaround, UART).
pub const TX_OVERHEAD_S: f64 = 0.001;

pub fn airtime_s(payload_bytes: usize) -> f64 {
    payload_bytes as f64 * 8.0 / DATA_RATE_BPS + TX_OVERHEAD_S
}

/// Node placement plus the radio environment they share.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkScenario {
    pub base: Option<Point>,
    pub remote: Option<Point>,
    /// Data logger; the base position is used when absent.
    pub logger: Option<Point>,
    pub sensors: Vec<Point>,
    pub env: RfEnvironment,
}

impl LinkScenario {
    pub fn endpoints(&self) -> Result<(Point, Point)> {
        match (self.base, self.remote) {
            (Some(b), Some(r)) => Ok((b, r)),
            _ => Err(Error::Scenario("echo test needs both a base and a remote node".into())),
        }
    }

    pub fn logger_position(&self) -> Result<Point> {
        self.logger
            .or(self.base)
            .ok_or_else(|| Error::Scenario("star network needs a logger or base node".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoTestConfig {
    pub n_messages: u32,
    pub message_len_chars: u32,
    pub timeout_ms: f64,
    pub runs: u32,
    pub channel: ChannelSpec,
    pub tx_power_dbm: f64,
}

impl EchoTestConfig {
    pub fn new(channel: ChannelSpec, tx_power_dbm: f64) -> Self {
        Self {
            n_messages: 1000,
            message_len_chars: 32,
            timeout_ms: 100.0,
            runs: 10,
            channel,
            tx_power_dbm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_messages == 0 || self.runs == 0 || !(self.timeout_ms > 0.0) {
            return Err(param("echo test needs messages, runs and a positive timeout"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub n_messages: u32,
    pub per_run_success: Vec<u32>,
    pub mean_ratio: f64,
    /// Sample standard deviation across runs.
    pub std_ratio: f64,
    /// Simulated wall-clock per run.
    pub per_run_time_s: Vec<f64>,
}

impl RunStats {
    pub fn from_counts(n_messages: u32, per_run_success: Vec<u32>, per_run_time_s: Vec<f64>) -> Self {
        let ratios: Vec<f64> = per_run_success
            .iter()
            .map(|&c| f64::from(c) / f64::from(n_messages.max(1)))
            .collect();
        let n = ratios.len() as f64;
        let mean = if ratios.is_empty() { 0.0 } else { ratios.iter().sum::<f64>() / n };
        let std = if ratios.len() < 2 {
            0.0
        } else {
            (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self {
            n_messages,
            per_run_success,
            mean_ratio: mean,
            std_ratio: std,
            per_run_time_s,
        }
    }
}

/// Per-hop success probabilities of the echo loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoLink {
    pub p_outbound: f64,
    pub p_inbound: f64,
}

impl EchoLink {
    pub fn fixed(p: f64) -> Self {
        Self {
            p_outbound: p,
            p_inbound: p,
        }
    }

    pub fn from_scenario(scenario: &LinkScenario, channel: &ChannelSpec, tx_power_dbm: f64) -> Result<Self> {
        let (base, remote) = scenario.endpoints()?;
        Ok(Self {
            p_outbound: scenario.env.hop_success(&base, &remote, tx_power_dbm, channel)?,
            p_inbound: scenario.env.hop_success(&remote, &base, tx_power_dbm, channel)?,
        })
    }

    /// Expected round-trip success ratio.
    pub fn round_trip(&self) -> f64 {
        self.p_outbound * self.p_inbound
    }
}

/// One run: the base sends a message, the remote loops it back, and the
/// base waits at most `timeout` for the copy. A lost copy costs exactly the
/// timeout before the next message goes out.
fn echo_run(cfg: &EchoTestConfig, link: &EchoLink, rng: &mut ChaCha8Rng) -> (u32, f64) {
    let hop = airtime_s(cfg.message_len_chars as usize);
    let timeout = cfg.timeout_ms / 1000.0;
    let mut clock = 0.0;
    let mut ok = 0;
    // Both hops fail the same way (the base waits out the timeout), so one
    // draw against the round-trip probability decides each message. With a
    // shared seed this also makes success counts monotone in that
    // probability across channels.
    let p = link.round_trip();
    for _ in 0..cfg.n_messages {
        let back = rng.random::<f64>() < p;
        if back && 2.0 * hop <= timeout {
            ok += 1;
            clock += 2.0 * hop;
        } else {
            clock += timeout;
        }
    }
    (ok, clock)
}

pub fn run_echo(cfg: &EchoTestConfig, link: &EchoLink, seed: u64) -> Result<RunStats> {
    cfg.validate()?;
    let (counts, times) = (0..cfg.runs)
        .map(|r| echo_run(cfg, link, &mut ChaCha8Rng::seed_from_u64(mix_seed(seed, u64::from(r)))))
        .unzip();
    Ok(RunStats::from_counts(cfg.n_messages, counts, times))
}

pub fn run_echo_test(cfg: &EchoTestConfig, scenario: &LinkScenario, seed: u64) -> Result<RunStats> {
    let link = EchoLink::from_scenario(scenario, &cfg.channel, cfg.tx_power_dbm)?;
    run_echo(cfg, &link, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarConfig {
    pub sensor: SensorConfig,
    pub channel: ChannelSpec,
    pub tx_power_dbm: f64,
    /// Start offset between consecutive nodes' clocks.
    pub node_phase_s: f64,
    pub duration_s: f64,
}

impl StarConfig {
    pub fn new(channel: ChannelSpec, tx_power_dbm: f64, duration_s: f64) -> Self {
        Self {
            sensor: SensorConfig::default(),
            channel,
            tx_power_dbm,
            node_phase_s: 0.002,
            duration_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoggedFrame {
    pub arrival_s: f64,
    pub frame: SensorFrame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeDelivery {
    pub node_id: u8,
    pub emitted: Vec<SensorFrame>,
    pub collided: u32,
    pub stats: RunStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StarResult {
    pub nodes: Vec<NodeDelivery>,
    pub log: Vec<LoggedFrame>,
}

impl StarResult {
    pub fn logged_frames(&self) -> Vec<SensorFrame> {
        self.log.iter().map(|l| l.frame).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum TxEvent {
    // ends sort before starts at the same instant: back-to-back is no collision
    End { node: usize, idx: usize },
    Start { node: usize, idx: usize },
}

fn ns(t: f64) -> u64 {
    (t * 1e9).round() as u64
}

/// Runs every node's state machine over its trace, then plays the emitted
/// transmissions through a shared channel. Transmissions that overlap in
/// time at the logger collide and are both lost; the rest survive with the
/// node's hop success probability.
pub fn run_star_network(
    scenario: &LinkScenario,
    traces: &[AccelTrace],
    cfg: &StarConfig,
    seed: u64,
) -> Result<StarResult> {
    if traces.is_empty() {
        return Err(param("star network needs at least one sensor node"));
    }
    if traces.len() > usize::from(u8::MAX) {
        return Err(param("at most 255 sensor nodes"));
    }
    if scenario.sensors.len() < traces.len() {
        return Err(Error::Scenario(format!(
            "{} traces but only {} sensor positions",
            traces.len(),
            scenario.sensors.len()
        )));
    }
    let logger = scenario.logger_position()?;
    let airtime = airtime_s(FRAME_LEN);

    struct Node {
        emitted: Vec<(f64, SensorFrame)>,
        p: f64,
        collided: Vec<bool>,
        delivered: Vec<bool>,
    }
    let mut nodes = Vec::with_capacity(traces.len());
    for (i, trace) in traces.iter().enumerate() {
        let sensor_cfg = SensorConfig {
            node_id: (i + 1) as u8,
            ..cfg.sensor
        };
        let state = SensorState::new(sensor_cfg)?;
        let clipped = AccelTrace {
            rate_hz: trace.rate_hz,
            samples: trace.samples.iter().filter(|s| s.t < cfg.duration_s).copied().collect(),
            activity_labels: trace.activity_labels.clone(),
        };
        let run = run_trace(&state, &clipped);
        let phase = i as f64 * cfg.node_phase_s;
        let emitted: Vec<_> = run.frames.iter().map(|e| (e.t + phase, e.frame)).collect();
        let p = scenario
            .env
            .hop_success(&scenario.sensors[i], &logger, cfg.tx_power_dbm, &cfg.channel)?;
        nodes.push(Node {
            collided: vec![false; emitted.len()],
            delivered: vec![false; emitted.len()],
            emitted,
            p,
        });
    }

    let mut queue = BinaryHeap::new();
    for (n, node) in nodes.iter().enumerate() {
        for (idx, (t, _)) in node.emitted.iter().enumerate() {
            queue.push(Reverse((ns(*t), TxEvent::Start { node: n, idx })));
            queue.push(Reverse((ns(*t + airtime), TxEvent::End { node: n, idx })));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut on_air: Vec<(usize, usize)> = Vec::new();
    let mut log = Vec::new();
    while let Some(Reverse((t, ev))) = queue.pop() {
        match ev {
            TxEvent::Start { node, idx } => {
                if !on_air.is_empty() {
                    nodes[node].collided[idx] = true;
                    for &(n, i) in &on_air {
                        nodes[n].collided[i] = true;
                    }
                }
                on_air.push((node, idx));
            }
            TxEvent::End { node, idx } => {
                on_air.retain(|&x| x != (node, idx));
                let survives = rng.random::<f64>() < nodes[node].p;
                if survives && !nodes[node].collided[idx] {
                    nodes[node].delivered[idx] = true;
                    log.push(LoggedFrame {
                        arrival_s: t as f64 / 1e9,
                        frame: nodes[node].emitted[idx].1,
                    });
                }
            }
        }
    }

    let nodes = nodes
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            let delivered = n.delivered.iter().filter(|d| **d).count() as u32;
            let total = n.emitted.len() as u32;
            NodeDelivery {
                node_id: (i + 1) as u8,
                collided: n.collided.iter().filter(|c| **c).count() as u32,
                emitted: n.emitted.into_iter().map(|(_, f)| f).collect(),
                stats: RunStats::from_counts(total, vec![delivered], vec![cfg.duration_s]),
            }
        })
        .collect();
    Ok(StarResult { nodes, log })
}
