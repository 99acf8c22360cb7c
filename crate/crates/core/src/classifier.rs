//! Threshold classification of acceleration windows and detection of
//! abnormal events (falls, jumps).
//!
//! Two detectors run side by side: the total acceleration leaving
//! `[low, high]`, and any axis swinging by more than `axis_delta_threshold`
//! within one window. Firings closer together than one window are merged
//! into a single event.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::motion::{AccelSample, AccelTrace, REST_BAND};

/// Per-axis variance a resting window must stay under, in g².
pub const REST_VARIANCE_BOUND: f64 = 4e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActivityClass {
    Rest,
    SlowActivity,
    FastActivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trigger {
    TotalAccelBound,
    PerAxisDelta,
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Trigger::TotalAccelBound => "total_accel_bound",
            Trigger::PerAxisDelta => "per_axis_delta",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbnormalEvent {
    pub t_start: f64,
    pub t_end: f64,
    pub trigger: Trigger,
    pub peak_total_a: f64,
}

impl AbnormalEvent {
    pub fn overlaps(&self, start: f64, end: f64) -> bool {
        self.t_start < end && self.t_end >= start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub low_threshold: f64,
    pub high_threshold: f64,
    pub axis_delta_threshold: f64,
    pub window_s: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            low_threshold: 0.9,
            high_threshold: 1.3,
            axis_delta_threshold: 2.0,
            window_s: 1.0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.low_threshold && self.low_threshold < 1.0 && 1.0 < self.high_threshold) {
            return Err(param("thresholds must satisfy 0 < low < 1 < high"));
        }
        if !(self.axis_delta_threshold > 0.0 && self.window_s > 0.0) {
            return Err(param("axis delta threshold and window must be positive"));
        }
        Ok(())
    }

    fn out_of_band(&self, a: f64) -> bool {
        a < self.low_threshold || a > self.high_threshold
    }
}

fn variance(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = xs.clone().fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    let mean = sum / n as f64;
    xs.map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64
}

pub fn classify_window(samples: &[AccelSample], cfg: &ClassifierConfig) -> Result<ActivityClass> {
    if samples.is_empty() {
        return Err(param("cannot classify an empty window"));
    }
    let fast_total = samples.iter().any(|s| cfg.out_of_band(s.total()));
    let fast_axis = (0..3).any(|i| {
        let (lo, hi) = samples
            .iter()
            .map(|s| s.axes()[i])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        hi - lo > cfg.axis_delta_threshold
    });
    if fast_total || fast_axis {
        return Ok(ActivityClass::FastActivity);
    }
    let in_rest_band = samples
        .iter()
        .all(|s| (REST_BAND.0..=REST_BAND.1).contains(&s.total()));
    let quiet = (0..3).all(|i| variance(samples.iter().map(move |s| s.axes()[i])) < REST_VARIANCE_BOUND);
    Ok(if in_rest_band && quiet {
        ActivityClass::Rest
    } else {
        ActivityClass::SlowActivity
    })
}

/// Classifies consecutive non-overlapping windows of `cfg.window_s`.
pub fn classify_trace(trace: &AccelTrace, cfg: &ClassifierConfig) -> Result<Vec<(f64, ActivityClass)>> {
    let n = ((cfg.window_s * trace.rate_hz).round() as usize).max(1);
    trace
        .samples
        .chunks(n)
        .map(|w| Ok((w[0].t, classify_window(w, cfg)?)))
        .collect()
}

/// Sliding max/min over a trailing window using monotonic deques.
struct SpanTracker {
    max: VecDeque<(usize, f64)>,
    min: VecDeque<(usize, f64)>,
}

impl SpanTracker {
    fn new() -> Self {
        Self {
            max: VecDeque::new(),
            min: VecDeque::new(),
        }
    }

    fn push(&mut self, i: usize, v: f64, width: usize) -> f64 {
        while self.max.back().is_some_and(|&(_, m)| m <= v) {
            self.max.pop_back();
        }
        self.max.push_back((i, v));
        while self.min.back().is_some_and(|&(_, m)| m >= v) {
            self.min.pop_back();
        }
        self.min.push_back((i, v));
        let oldest = (i + 1).saturating_sub(width);
        while self.max.front().is_some_and(|&(j, _)| j < oldest) {
            self.max.pop_front();
        }
        while self.min.front().is_some_and(|&(j, _)| j < oldest) {
            self.min.pop_front();
        }
        self.max.front().expect("non-empty").1 - self.min.front().expect("non-empty").1
    }
}

struct Open {
    start: f64,
    last: f64,
    bound_fired: bool,
    peak: f64,
}

impl Open {
    fn close(self) -> AbnormalEvent {
        AbnormalEvent {
            t_start: self.start,
            t_end: self.last,
            trigger: if self.bound_fired {
                Trigger::TotalAccelBound
            } else {
                Trigger::PerAxisDelta
            },
            peak_total_a: self.peak,
        }
    }
}

/// Runs both detectors over a trace and merges firings into events.
///
/// `peak_total_a` is the total acceleration furthest from 1g among the
/// event's firing samples.
pub fn detect_abnormal(trace: &AccelTrace, cfg: &ClassifierConfig) -> Result<Vec<AbnormalEvent>> {
    cfg.validate()?;
    if trace.is_empty() {
        return Err(param("cannot scan an empty trace"));
    }
    let width = ((cfg.window_s * trace.rate_hz).round() as usize).max(1);
    let mut spans = [SpanTracker::new(), SpanTracker::new(), SpanTracker::new()];
    let mut events = Vec::new();
    let mut open: Option<Open> = None;

    for (i, s) in trace.samples.iter().enumerate() {
        let axes = s.axes();
        let mut axis_fired = false;
        for (k, tracker) in spans.iter_mut().enumerate() {
            axis_fired |= tracker.push(i, axes[k], width) > cfg.axis_delta_threshold;
        }
        let a = s.total();
        let bound_fired = cfg.out_of_band(a);
        if !(axis_fired || bound_fired) {
            continue;
        }
        match open.as_mut() {
            Some(ev) if s.t - ev.last <= cfg.window_s + 1e-9 => {
                ev.last = s.t;
                ev.bound_fired |= bound_fired;
                if (a - 1.0).abs() > (ev.peak - 1.0).abs() {
                    ev.peak = a;
                }
            }
            _ => {
                if let Some(done) = open.take() {
                    events.push(done.close());
                }
                open = Some(Open {
                    start: s.t,
                    last: s.t,
                    bound_fired,
                    peak: a,
                });
            }
        }
    }
    events.extend(open.map(Open::close));
    Ok(events)
}

pub fn write_events_csv<W: Write>(events: &[AbnormalEvent], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Scenario(format!("csv write failed: {e}"));
    wr.write_record(["t_start", "t_end", "trigger", "peak_total_a"]).map_err(err)?;
    for e in events {
        wr.write_record([
            format!("{:.4}", e.t_start),
            format!("{:.4}", e.t_end),
            e.trigger.to_string(),
            format!("{:.6}", e.peak_total_a),
        ])
        .map_err(err)?;
    }
    wr.flush().map_err(|e| Error::io("<events csv>", e))
}
