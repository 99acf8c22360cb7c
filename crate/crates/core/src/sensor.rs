//! The wearable node's accelerometer workflow: periodic wake-ups while the
//! wearer is at rest, continuous sampling once motion is detected, per-axis
//! range switching, and a return to sleep after a long quiet stretch.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::frame::SensorFrame;
use crate::motion::{AccelSample, AccelTrace, MAX_RATE_HZ, MIN_RATE_HZ};

/// ADC reference voltage; the zero-g output sits at half of it.
pub const V_REF: f64 = 3.3;
pub const ADC_MAX: u16 = u16::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MeasurementRange {
    G1_5,
    G2,
    G4,
    G6,
}

impl MeasurementRange {
    pub const ALL: [MeasurementRange; 4] = [
        MeasurementRange::G1_5,
        MeasurementRange::G2,
        MeasurementRange::G4,
        MeasurementRange::G6,
    ];

    pub fn lowest() -> Self {
        MeasurementRange::G1_5
    }

    /// Full-scale bound in g.
    pub fn bound_g(self) -> f64 {
        match self {
            MeasurementRange::G1_5 => 1.5,
            MeasurementRange::G2 => 2.0,
            MeasurementRange::G4 => 4.0,
            MeasurementRange::G6 => 6.0,
        }
    }

    pub fn sensitivity_mv_per_g(self) -> f64 {
        match self {
            MeasurementRange::G1_5 => 800.0,
            MeasurementRange::G2 => 600.0,
            MeasurementRange::G4 => 300.0,
            MeasurementRange::G6 => 200.0,
        }
    }

    pub fn sensitivity_v_per_g(self) -> f64 {
        self.sensitivity_mv_per_g() / 1000.0
    }

    /// The two g-select bits.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    /// Next coarser range, saturating at ±6g.
    pub fn step_up(self) -> Self {
        Self::from_code(self.code() + 1).unwrap_or(MeasurementRange::G6)
    }

    /// Smallest range whose bound covers `|g|`, or ±6g when none does.
    pub fn covering(g: f64) -> Self {
        let mag = g.abs();
        Self::ALL
            .into_iter()
            .find(|r| mag <= r.bound_g())
            .unwrap_or(MeasurementRange::G6)
    }

    /// Half of one ADC step, expressed in g.
    pub fn half_lsb_g(self) -> f64 {
        V_REF / f64::from(ADC_MAX) / 2.0 / self.sensitivity_v_per_g()
    }
}

/// One axis of an ADC conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisReading {
    pub code: u16,
    pub range: MeasurementRange,
    pub clipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdcReading {
    pub axes: [AxisReading; 3],
}

impl AdcReading {
    pub fn codes(&self) -> [u16; 3] {
        self.axes.map(|a| a.code)
    }

    pub fn ranges(&self) -> [MeasurementRange; 3] {
        self.axes.map(|a| a.range)
    }

    pub fn to_g(&self) -> [f64; 3] {
        self.axes.map(|a| dequantize(&a))
    }
}

/// Ratiometric voltage model followed by 16-bit conversion.
pub fn quantize(a: f64, range: MeasurementRange) -> Result<AxisReading> {
    if !a.is_finite() {
        return Err(param(format!("acceleration must be finite, got {a}")));
    }
    let v = (V_REF / 2.0 + a * range.sensitivity_v_per_g()).clamp(0.0, V_REF);
    let code = (v / V_REF * f64::from(ADC_MAX)).round() as u16;
    Ok(AxisReading {
        code,
        range,
        clipped: a.abs() > range.bound_g(),
    })
}

/// Inverse of the voltage model. Clipped readings report the range bound.
pub fn dequantize(entry: &AxisReading) -> f64 {
    let v = f64::from(entry.code) / f64::from(ADC_MAX) * V_REF;
    let g = (v - V_REF / 2.0) / entry.range.sensitivity_v_per_g();
    let bound = entry.range.bound_g();
    if entry.clipped {
        bound.copysign(g)
    } else {
        g.clamp(-bound, bound)
    }
}

pub fn select_axis_range(reading_g: f64, current: MeasurementRange) -> MeasurementRange {
    if reading_g.abs() > current.bound_g() {
        current.step_up()
    } else {
        MeasurementRange::covering(reading_g)
    }
}

/// Range for the next conversion on each axis, chosen independently.
pub fn select_range(reading_g: [f64; 3], current: [MeasurementRange; 3]) -> [MeasurementRange; 3] {
    [0, 1, 2].map(|i| select_axis_range(reading_g[i], current[i]))
}

/// Same decision made from an actual conversion: a clipped axis steps up one
/// level, an unclipped one moves to the tightest range covering its value.
pub fn select_range_from_reading(reading: &AdcReading) -> [MeasurementRange; 3] {
    reading.axes.map(|a| {
        if a.clipped {
            a.range.step_up()
        } else {
            MeasurementRange::covering(dequantize(&a))
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Sleep,
    Active,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub node_id: u8,
    pub wake_period_s: f64,
    pub sample_rate_hz: f64,
    /// Deviation from the upright rest posture (z compensated by 1g).
    pub activation_threshold_g: f64,
    pub inactivity_window_s: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            node_id: 1,
            wake_period_s: 1.0,
            sample_rate_hz: 60.0,
            activation_threshold_g: 0.3,
            inactivity_window_s: 300.0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.wake_period_s > 0.0) {
            return Err(param("wake period must be positive"));
        }
        if !(MIN_RATE_HZ..=MAX_RATE_HZ).contains(&self.sample_rate_hz) {
            return Err(param(format!("sample rate {} Hz outside [10, 100]", self.sample_rate_hz)));
        }
        if !(self.activation_threshold_g > 0.0) {
            return Err(param("activation threshold must be positive"));
        }
        if !(self.inactivity_window_s > 0.0) {
            return Err(param("inactivity window must be positive"));
        }
        Ok(())
    }
}

const TICK_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorState {
    pub config: SensorConfig,
    pub mode: Mode,
    pub ranges: [MeasurementRange; 3],
    pub low_activity_timer_s: f64,
    /// Sequence number of the next frame.
    pub seq: u16,
    pub clock_s: f64,
    /// Time left until the next conversion (wake tick or active sample).
    pub next_sample_in_s: f64,
}

impl SensorState {
    /// Starts asleep, with the first wake tick due immediately.
    pub fn new(config: SensorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            mode: Mode::Sleep,
            ranges: [MeasurementRange::lowest(); 3],
            low_activity_timer_s: 0.0,
            seq: 0,
            clock_s: 0.0,
            next_sample_in_s: 0.0,
        })
    }

    pub fn sample_period_s(&self) -> f64 {
        1.0 / self.config.sample_rate_hz
    }

    fn exceeds_threshold(&self, g: [f64; 3]) -> bool {
        rest_deviation(g)
            .iter()
            .any(|d| *d > self.config.activation_threshold_g)
    }

    fn convert(&self, s: &AccelSample) -> AdcReading {
        let axes = s.axes();
        AdcReading {
            axes: [0, 1, 2].map(|i| {
                // axes are finite by trace invariant; treat anything else as saturating
                quantize(axes[i], self.ranges[i]).unwrap_or(AxisReading {
                    code: ADC_MAX,
                    range: self.ranges[i],
                    clipped: true,
                })
            }),
        }
    }

    fn emit(&mut self, reading: AdcReading) -> SensorFrame {
        let frame = SensorFrame {
            node_id: self.config.node_id,
            seq: self.seq,
            timestamp_ms: (self.clock_s * 1000.0).round() as u64 as u32,
            codes: reading.codes(),
            ranges: reading.ranges(),
        };
        self.seq = self.seq.wrapping_add(1);
        frame
    }

    /// Processes the input sample at the current clock, then advances the
    /// clock by `dt`. Returns the successor state and the frame emitted by a
    /// conversion at this instant, if one was due.
    pub fn step(&self, sample: &AccelSample, dt: f64) -> (SensorState, Option<SensorFrame>) {
        let mut next = self.clone();
        let mut frame = None;
        if next.next_sample_in_s <= TICK_EPS {
            let reading = next.convert(sample);
            let g = reading.to_g();
            frame = Some(next.emit(reading));
            match next.mode {
                Mode::Sleep => {
                    if next.exceeds_threshold(g) {
                        next.mode = Mode::Active;
                        next.low_activity_timer_s = 0.0;
                        next.ranges = select_range_from_reading(&reading);
                        next.next_sample_in_s += next.sample_period_s();
                    } else {
                        next.next_sample_in_s += next.config.wake_period_s;
                    }
                }
                Mode::Active => {
                    if next.exceeds_threshold(g) {
                        next.low_activity_timer_s = 0.0;
                    } else {
                        next.low_activity_timer_s = (next.low_activity_timer_s + next.sample_period_s())
                            .min(next.config.inactivity_window_s);
                    }
                    if next.low_activity_timer_s >= next.config.inactivity_window_s - TICK_EPS {
                        next.mode = Mode::Sleep;
                        next.low_activity_timer_s = 0.0;
                        next.ranges = [MeasurementRange::lowest(); 3];
                        next.next_sample_in_s += next.config.wake_period_s;
                    } else {
                        next.ranges = select_range_from_reading(&reading);
                        next.next_sample_in_s += next.sample_period_s();
                    }
                }
            }
        }
        next.next_sample_in_s -= dt;
        next.clock_s += dt;
        (next, frame)
    }
}

/// Per-axis distance from the upright rest posture `(0, 0, 1g)`.
pub fn rest_deviation(g: [f64; 3]) -> [f64; 3] {
    [g[0].abs(), g[1].abs(), (g[2] - 1.0).abs()]
}

/// A frame together with the simulated time it was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmittedFrame {
    pub t: f64,
    pub frame: SensorFrame,
}

/// Stretch of constant mode in a node's history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeInterval {
    pub start_s: f64,
    pub duration_s: f64,
    pub mode: Mode,
    pub frames: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRun {
    pub frames: Vec<EmittedFrame>,
    pub timeline: Vec<ModeInterval>,
    pub final_state: SensorState,
    pub samples_taken: usize,
    pub activations: usize,
}

/// Drives a node through a whole trace, one step per trace sample.
pub fn run_trace(initial: &SensorState, trace: &AccelTrace) -> NodeRun {
    let dt = trace.dt();
    let mut state = initial.clone();
    let mut frames = Vec::new();
    let mut timeline: Vec<ModeInterval> = Vec::new();
    let mut activations = 0;
    for s in &trace.samples {
        let mode_before = state.mode;
        let t = state.clock_s;
        let (next, frame) = state.step(s, dt);
        if mode_before == Mode::Sleep && next.mode == Mode::Active {
            activations += 1;
        }
        // attribute the step to the mode it ended in, frames to the instant
        match timeline.last_mut() {
            Some(iv) if iv.mode == next.mode => iv.duration_s += dt,
            _ => timeline.push(ModeInterval {
                start_s: t,
                duration_s: dt,
                mode: next.mode,
                frames: 0,
            }),
        }
        if let Some(f) = frame {
            timeline.last_mut().expect("pushed above").frames += 1;
            frames.push(EmittedFrame { t, frame: f });
        }
        state = next;
    }
    NodeRun {
        samples_taken: frames.len(),
        frames,
        timeline,
        final_state: state,
        activations,
    }
}
