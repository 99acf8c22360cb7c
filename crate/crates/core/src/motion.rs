//! Synthetic triaxial acceleration for the activity profiles the system is
//! meant to tell apart.
//!
//! Each profile is a sum of band-limited periodic components plus truncated
//! Gaussian noise. Amplitude caps are chosen so that the slow-mode profiles
//! keep the total acceleration inside `[0.9g, 1.3g]` for any seed, and the
//! fast-mode profiles (jump, fall) always leave that band with a z-axis
//! excursion wider than 2g. Every draw is checked against its envelope and
//! redrawn if it ever falls outside.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

pub const DEFAULT_RATE_HZ: f64 = 60.0;
pub const MIN_RATE_HZ: f64 = 10.0;
pub const MAX_RATE_HZ: f64 = 100.0;

/// Band that slow movements never leave.
pub const SLOW_BAND: (f64, f64) = (0.9, 1.3);
/// Band a resting subject stays in.
pub const REST_BAND: (f64, f64) = (0.95, 1.05);

/// One timestamped triaxial reading in g: `ax` frontal, `ay` side, `az` vertical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelSample {
    pub t: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl AccelSample {
    pub fn new(t: f64, ax: f64, ay: f64, az: f64) -> Self {
        Self { t, ax, ay, az }
    }

    pub fn axes(&self) -> [f64; 3] {
        [self.ax, self.ay, self.az]
    }

    pub fn total(&self) -> f64 {
        total_acceleration(self)
    }
}

/// Magnitude of the acceleration vector.
pub fn total_acceleration(s: &AccelSample) -> f64 {
    (s.ax * s.ax + s.ay * s.ay + s.az * s.az).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityKind {
    Rest,
    SitStand,
    LeftRightRotation,
    SlowWalk,
    Run,
    Jump,
    Fall,
}

impl ActivityKind {
    pub const ALL: [ActivityKind; 7] = [
        ActivityKind::Rest,
        ActivityKind::SitStand,
        ActivityKind::LeftRightRotation,
        ActivityKind::SlowWalk,
        ActivityKind::Run,
        ActivityKind::Jump,
        ActivityKind::Fall,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ActivityKind::Rest => "rest",
            ActivityKind::SitStand => "sit_stand",
            ActivityKind::LeftRightRotation => "left_right_rotation",
            ActivityKind::SlowWalk => "slow_walk",
            ActivityKind::Run => "run",
            ActivityKind::Jump => "jump",
            ActivityKind::Fall => "fall",
        }
    }

    pub fn is_slow(&self) -> bool {
        matches!(
            self,
            ActivityKind::SitStand | ActivityKind::LeftRightRotation | ActivityKind::SlowWalk
        )
    }

    /// Jump and fall are the profiles expected to trip abnormality detection.
    pub fn is_abrupt(&self) -> bool {
        matches!(self, ActivityKind::Jump | ActivityKind::Fall)
    }

    fn salt(&self) -> u64 {
        match self {
            ActivityKind::Rest => 0x11,
            ActivityKind::SitStand => 0x23,
            ActivityKind::LeftRightRotation => 0x35,
            ActivityKind::SlowWalk => 0x47,
            ActivityKind::Run => 0x59,
            ActivityKind::Jump => 0x6b,
            ActivityKind::Fall => 0x7d,
        }
    }
}

impl fmt::Display for ActivityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ActivityKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| param(format!("unknown activity kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccelTrace {
    pub rate_hz: f64,
    pub samples: Vec<AccelSample>,
    pub activity_labels: Vec<ActivityKind>,
}

impl AccelTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.rate_hz
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    /// Contiguous `(kind, t_start, t_end)` label runs, `t_end` exclusive.
    pub fn segments(&self) -> Vec<(ActivityKind, f64, f64)> {
        let mut out: Vec<(ActivityKind, f64, f64)> = Vec::new();
        for (s, &k) in self.samples.iter().zip(&self.activity_labels) {
            match out.last_mut() {
                Some(last) if last.0 == k => last.2 = s.t + self.dt(),
                _ => out.push((k, s.t, s.t + self.dt())),
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let ioerr = |e: csv::Error| Error::Scenario(format!("csv write failed: {e}"));
        wr.write_record(["t", "ax", "ay", "az", "label"]).map_err(ioerr)?;
        for (s, k) in self.samples.iter().zip(&self.activity_labels) {
            wr.write_record([
                s.t.to_string(),
                s.ax.to_string(),
                s.ay.to_string(),
                s.az.to_string(),
                k.to_string(),
            ])
            .map_err(ioerr)?;
        }
        wr.flush().map_err(|e| Error::io("<trace csv>", e))
    }

    /// Reads a trace written by [`AccelTrace::write_csv`]. The rate is
    /// recovered from the first sample spacing.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let perr = |line: u64, msg: String| Error::Parse {
            source_name: "trace csv".into(),
            message: format!("line {line}: {msg}"),
        };
        let headers = rd.headers().map_err(|e| perr(1, e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "ax", "ay", "az", "label"] {
            return Err(perr(1, "expected header t,ax,ay,az,label".into()));
        }
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| perr(0, e.to_string()))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| perr(line, format!("field {}: {e}", &headers[i])))
            };
            samples.push(AccelSample::new(num(0)?, num(1)?, num(2)?, num(3)?));
            labels.push(rec[4].trim().parse().map_err(|e: Error| perr(line, e.to_string()))?);
        }
        if samples.len() < 2 {
            return Err(perr(0, "need at least two samples to recover the rate".into()));
        }
        let rate_hz = 1.0 / (samples[1].t - samples[0].t);
        Ok(AccelTrace {
            rate_hz,
            samples,
            activity_labels: labels,
        })
    }
}

fn check_rate(rate_hz: f64) -> Result<()> {
    if !(MIN_RATE_HZ..=MAX_RATE_HZ).contains(&rate_hz) {
        return Err(param(format!(
            "sample rate {rate_hz} Hz outside [{MIN_RATE_HZ}, {MAX_RATE_HZ}]"
        )));
    }
    Ok(())
}

fn check_duration(duration: f64) -> Result<()> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(param(format!("duration must be positive, got {duration}")));
    }
    Ok(())
}

/// Mixes a seed with a stream index so sibling streams are uncorrelated.
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Zero-mean Gaussian truncated at three standard deviations by rejection.
struct Noise {
    normal: Normal<f64>,
    sigma: f64,
}

impl Noise {
    fn new(sigma: f64) -> Self {
        Self {
            normal: Normal::new(0.0, sigma).expect("sigma is positive"),
            sigma,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        loop {
            let v = self.normal.sample(rng);
            if v.abs() <= 3.0 * self.sigma {
                return v;
            }
        }
    }
}

struct Sinusoid {
    amp: f64,
    freq: f64,
    phase: f64,
}

impl Sinusoid {
    fn random<R: Rng>(rng: &mut R, amp: (f64, f64), freq: (f64, f64)) -> Self {
        Self {
            amp: rng.random_range(amp.0..=amp.1),
            freq: rng.random_range(freq.0..=freq.1),
            phase: rng.random_range(0.0..2.0 * PI),
        }
    }

    fn at(&self, t: f64) -> f64 {
        self.amp * (2.0 * PI * self.freq * t + self.phase).sin()
    }
}

/// Half-sine bump of height `h` over `[start, start + width)`.
fn bump(t: f64, start: f64, width: f64, h: f64) -> f64 {
    if t >= start && t < start + width {
        h * (PI * (t - start) / width).sin()
    } else {
        0.0
    }
}

fn synthesize(kind: ActivityKind, n: usize, rate_hz: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let time = |i: usize| i as f64 / rate_hz;
    match kind {
        ActivityKind::Rest => {
            let noise = Noise::new(0.004);
            (0..n)
                .map(|_| [noise.draw(rng), noise.draw(rng), 1.0 + noise.draw(rng)])
                .collect()
        }
        ActivityKind::SitStand => {
            let noise = Noise::new(0.01);
            let fx = Sinusoid::random(rng, (0.25, 0.35), (1.0, 1.4));
            let fx2 = Sinusoid::random(rng, (0.04, 0.08), (2.0, 2.8));
            let sy = Sinusoid::random(rng, (0.05, 0.1), (1.0, 1.4));
            let vz = Sinusoid::random(rng, (0.01, 0.02), (1.0, 1.4));
            (0..n)
                .map(|i| {
                    let t = time(i);
                    [
                        fx.at(t) + fx2.at(t) + noise.draw(rng),
                        sy.at(t) + noise.draw(rng),
                        1.0 + vz.at(t) + noise.draw(rng),
                    ]
                })
                .collect()
        }
        ActivityKind::LeftRightRotation => {
            let noise = Noise::new(0.01);
            let sy = Sinusoid::random(rng, (0.3, 0.4), (1.0, 1.5));
            let fx = Sinusoid::random(rng, (0.05, 0.1), (1.0, 1.5));
            let vz = Sinusoid::random(rng, (0.01, 0.02), (2.0, 3.0));
            (0..n)
                .map(|i| {
                    let t = time(i);
                    [
                        fx.at(t) + noise.draw(rng),
                        sy.at(t) + noise.draw(rng),
                        1.0 + vz.at(t) + noise.draw(rng),
                    ]
                })
                .collect()
        }
        ActivityKind::SlowWalk => {
            let noise = Noise::new(0.01);
            let step = rng.random_range(1.6..=2.0);
            let phase = rng.random_range(0.0..2.0 * PI);
            let ax1 = rng.random_range(0.2..=0.25);
            let ax2 = rng.random_range(0.05..=0.1);
            let ay = rng.random_range(0.1..=0.15);
            let az = rng.random_range(0.02..=0.04);
            (0..n)
                .map(|i| {
                    let w = 2.0 * PI * step * time(i) + phase;
                    [
                        ax1 * w.sin() + ax2 * (2.0 * w).sin() + noise.draw(rng),
                        ay * (0.5 * w).sin() + noise.draw(rng),
                        1.0 + az * (2.0 * w).cos() + noise.draw(rng),
                    ]
                })
                .collect()
        }
        ActivityKind::Run => {
            let noise = Noise::new(0.03);
            let stride = rng.random_range(2.6..=3.0);
            let phase = rng.random_range(0.0..2.0 * PI);
            let vz = rng.random_range(0.65..=0.8);
            let fx = rng.random_range(0.25..=0.35);
            let sy = rng.random_range(0.1..=0.2);
            (0..n)
                .map(|i| {
                    let w = 2.0 * PI * stride * time(i) + phase;
                    [
                        fx * (w + PI / 2.0).sin() + noise.draw(rng),
                        sy * (0.5 * w).sin() + noise.draw(rng),
                        1.0 + vz * w.sin() + noise.draw(rng),
                    ]
                })
                .collect()
        }
        ActivityKind::Jump => {
            let noise = Noise::new(0.02);
            let period = rng.random_range(1.1..=1.4);
            let push = rng.random_range(0.6..=0.9);
            let flight = rng.random_range(0.22..=0.32);
            let impact = rng.random_range(2.2..=2.6);
            (0..n)
                .map(|i| {
                    let t = time(i);
                    // first take-off 0.2 s in, then periodic
                    let u = if t < 0.2 { -1.0 } else { (t - 0.2) % period };
                    let mut z = 1.0;
                    if u >= 0.0 {
                        z += bump(u, 0.0, 0.25, push);
                        if (0.25..0.25 + flight).contains(&u) {
                            z = 0.05;
                        }
                        z += bump(u, 0.25 + flight, 0.12, impact);
                    }
                    [
                        0.05 * (2.0 * PI * t).sin() + noise.draw(rng),
                        noise.draw(rng),
                        z + noise.draw(rng),
                    ]
                })
                .collect()
        }
        ActivityKind::Fall => {
            let noise = Noise::new(0.015);
            let onset = rng.random_range(0.2..=0.35);
            let depth = rng.random_range(0.65..=0.8);
            let spike = rng.random_range(2.0..=2.4);
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let descent = 0.35;
            let impact_at = onset + descent;
            (0..n)
                .map(|i| {
                    let t = time(i);
                    let (x, z) = if t < onset {
                        (0.0, 1.0)
                    } else if t < impact_at {
                        (0.2 * (t - onset) / descent, 1.0 - bump(t, onset, descent, depth))
                    } else if t < impact_at + 0.12 {
                        // spike on top of a steady tilt into the lying posture
                        let k = bump(t, impact_at, 0.12, 1.0);
                        let p = (t - impact_at) / 0.12;
                        (0.2 + 0.77 * p, 1.0 + spike * k - 0.8 * p)
                    } else {
                        // lying on the front
                        (0.97, 0.2)
                    };
                    [
                        x + noise.draw(rng),
                        0.05 * side + noise.draw(rng),
                        z + noise.draw(rng),
                    ]
                })
                .collect()
        }
    }
}

/// Shortest segment over which jump and fall envelopes are guaranteed.
pub const MIN_EVENT_DURATION_S: f64 = 1.0;

/// Checks a synthesized block against its kind's envelope.
pub fn satisfies_envelope(kind: ActivityKind, axes: &[[f64; 3]], rate_hz: f64) -> bool {
    let total = |a: &[f64; 3]| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let within = |band: (f64, f64)| axes.iter().all(|a| (band.0..=band.1).contains(&total(a)));
    match kind {
        ActivityKind::Rest => within(REST_BAND),
        k if k.is_slow() => within(SLOW_BAND),
        ActivityKind::Run => axes.iter().all(|a| a.iter().all(|v| v.is_finite())),
        _ => {
            if (axes.len() as f64) < MIN_EVENT_DURATION_S * rate_hz {
                return true;
            }
            let (lo, hi) = axes
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| (lo.min(a[2]), hi.max(a[2])));
            let exits = axes.iter().any(|a| !(SLOW_BAND.0..=SLOW_BAND.1).contains(&total(a)));
            hi - lo > 2.0 && exits
        }
    }
}

const MAX_REDRAWS: usize = 16;

fn generate_block(kind: ActivityKind, n: usize, rate_hz: f64, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, kind.salt()));
    for _ in 0..MAX_REDRAWS {
        let block = synthesize(kind, n, rate_hz, &mut rng);
        if satisfies_envelope(kind, &block, rate_hz) {
            return block;
        }
    }
    // Last resort: squeeze the deviation from 1g back into the band.
    let mut block = synthesize(kind, n, rate_hz, &mut rng);
    let band = match kind {
        ActivityKind::Rest => REST_BAND,
        _ => SLOW_BAND,
    };
    if kind == ActivityKind::Rest || kind.is_slow() {
        for a in &mut block {
            let m = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            let target = m.clamp(band.0 + 1e-9, band.1 - 1e-9);
            if m > 0.0 && target != m {
                a.iter_mut().for_each(|v| *v *= target / m);
            }
        }
    }
    block
}

/// Generates one activity trace. Deterministic in `(kind, duration, rate_hz, seed)`.
pub fn generate_trace(kind: ActivityKind, duration: f64, rate_hz: f64, seed: u64) -> Result<AccelTrace> {
    compose_schedule(&[(kind, duration)], rate_hz, seed)
}

/// Concatenates per-segment traces. Segment `i` is drawn from its own seed
/// stream; the first segment uses `seed` directly, so a one-segment schedule
/// equals [`generate_trace`].
pub fn compose_schedule(segments: &[(ActivityKind, f64)], rate_hz: f64, seed: u64) -> Result<AccelTrace> {
    if segments.is_empty() {
        return Err(param("empty activity schedule"));
    }
    check_rate(rate_hz)?;
    for &(_, d) in segments {
        check_duration(d)?;
    }
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (i, &(kind, duration)) in segments.iter().enumerate() {
        let n = ((duration * rate_hz).round() as usize).max(1);
        let seg_seed = if i == 0 { seed } else { mix_seed(seed, i as u64) };
        let base = samples.len();
        for (j, a) in generate_block(kind, n, rate_hz, seg_seed).into_iter().enumerate() {
            samples.push(AccelSample::new((base + j) as f64 / rate_hz, a[0], a[1], a[2]));
            labels.push(kind);
        }
    }
    Ok(AccelTrace {
        rate_hz,
        samples,
        activity_labels: labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn total_acceleration_examples() {
        assert_eq!(total_acceleration(&AccelSample::new(0.0, 0.0, 0.0, 1.0)), 1.0);
        assert_eq!(total_acceleration(&AccelSample::new(0.0, 0.0, 0.0, 0.0)), 0.0);
        let a = total_acceleration(&AccelSample::new(0.0, 0.3, 0.4, 1.2));
        assert!((a - 1.3).abs() < 1e-12);
    }

    #[test]
    fn rest_stays_in_rest_band() {
        let tr = generate_trace(ActivityKind::Rest, 10.0, 60.0, 1).unwrap();
        assert_eq!(tr.len(), 600);
        assert!(tr.samples.iter().all(|s| (0.95..=1.05).contains(&s.total())));
    }

    #[test]
    fn slow_walk_stays_in_slow_band() {
        let tr = generate_trace(ActivityKind::SlowWalk, 30.0, 60.0, 7).unwrap();
        assert!(tr.samples.iter().all(|s| (0.9..=1.3).contains(&s.total())));
    }

    #[test]
    fn fall_has_wide_z_excursion() {
        let tr = generate_trace(ActivityKind::Fall, 5.0, 60.0, 3).unwrap();
        let (lo, hi) = tr
            .samples
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), s| (lo.min(s.az), hi.max(s.az)));
        assert!(hi - lo > 2.0, "span {}", hi - lo);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(generate_trace(ActivityKind::Rest, 0.0, 60.0, 1).is_err());
        assert!(generate_trace(ActivityKind::Rest, -1.0, 60.0, 1).is_err());
        assert!(generate_trace(ActivityKind::Rest, 1.0, 5.0, 1).is_err());
        assert!(generate_trace(ActivityKind::Rest, 1.0, 150.0, 1).is_err());
        assert!(compose_schedule(&[], 60.0, 1).is_err());
    }

    #[test]
    fn single_segment_schedule_matches_generate() {
        let a = generate_trace(ActivityKind::Rest, 2.0, 60.0, 9).unwrap();
        let b = compose_schedule(&[(ActivityKind::Rest, 2.0)], 60.0, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn schedule_boundaries_and_timestamps() {
        let tr = compose_schedule(&[(ActivityKind::Rest, 2.0), (ActivityKind::Fall, 1.0)], 60.0, 4).unwrap();
        assert_eq!(tr.len(), 180);
        assert!((tr.duration() - 3.0).abs() < 1e-12);
        let segs = tr.segments();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[1].0, ActivityKind::Fall);
        assert!((segs[1].1 - 2.0).abs() < 1e-9);
        for w in tr.samples.windows(2) {
            assert!((w[1].t - w[0].t - 1.0 / 60.0).abs() < 1e-9);
        }
    }

    #[test]
    fn walk_then_run_only_second_half_leaves_band() {
        let tr = compose_schedule(&[(ActivityKind::SlowWalk, 10.0), (ActivityKind::Run, 10.0)], 60.0, 5).unwrap();
        let out = |k: ActivityKind| {
            tr.samples
                .iter()
                .zip(&tr.activity_labels)
                .filter(|(s, &l)| l == k && !(0.9..=1.3).contains(&s.total()))
                .count()
        };
        assert_eq!(out(ActivityKind::SlowWalk), 0);
        assert!(out(ActivityKind::Run) > 0);
    }

    #[test]
    fn csv_round_trip() {
        let tr = compose_schedule(&[(ActivityKind::Rest, 0.5), (ActivityKind::Jump, 1.0)], 50.0, 2).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,ax,ay,az,label\n"));
        let back = AccelTrace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.samples, tr.samples);
        assert_eq!(back.activity_labels, tr.activity_labels);
        assert!((back.rate_hz - 50.0).abs() < 1e-9);
    }

    #[test]
    fn csv_rejects_bad_header() {
        let err = AccelTrace::read_csv("a,b\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn slow_kinds_never_leave_band(seed in any::<u64>(), k in 0usize..3) {
            let kind = [ActivityKind::SitStand, ActivityKind::LeftRightRotation, ActivityKind::SlowWalk][k];
            let tr = generate_trace(kind, 10.0, 60.0, seed).unwrap();
            prop_assert!(tr.samples.iter().all(|s| (0.9..=1.3).contains(&s.total())));
        }

        #[test]
        fn abrupt_kinds_exit_band(seed in any::<u64>(), jump in any::<bool>(), dur in 1.0f64..6.0) {
            let kind = if jump { ActivityKind::Jump } else { ActivityKind::Fall };
            let tr = generate_trace(kind, dur, 60.0, seed).unwrap();
            let (lo, hi) = tr.samples.iter().fold((f64::MAX, f64::MIN), |(lo, hi), s| (lo.min(s.az), hi.max(s.az)));
            prop_assert!(hi - lo > 2.0);
            prop_assert!(tr.samples.iter().any(|s| !(0.9..=1.3).contains(&s.total())));
        }

        #[test]
        fn rest_windows_average_near_one_g(seed in any::<u64>()) {
            let tr = generate_trace(ActivityKind::Rest, 5.0, 60.0, seed).unwrap();
            for w in tr.samples.chunks(60) {
                let mean = w.iter().map(|s| s.total()).sum::<f64>() / w.len() as f64;
                prop_assert!((mean - 1.0).abs() <= 0.02);
            }
        }

        #[test]
        fn generation_is_deterministic(seed in any::<u64>(), k in 0usize..7) {
            let kind = ActivityKind::ALL[k];
            let a = generate_trace(kind, 2.0, 60.0, seed).unwrap();
            let b = generate_trace(kind, 2.0, 60.0, seed).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
