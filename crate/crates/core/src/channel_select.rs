//! Spectrum scanning and channel choice for the 802.15.4 link, with a
//! hysteresis-guarded re-scan policy.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::rf::{ChannelSpec, Point, RfEnvironment};

pub const FIRST_CHANNEL: u8 = 11;
pub const N_CHANNELS: usize = 16;
pub const DEFAULT_HYSTERESIS: f64 = 0.001;

/// Expected per-message loss on each channel 11..=26.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub scores: [f64; N_CHANNELS],
}

impl ScanReport {
    pub fn new(scores: [f64; N_CHANNELS]) -> Result<Self> {
        if scores.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(param("scan scores must be finite and non-negative"));
        }
        Ok(Self { scores })
    }

    pub fn score(&self, channel: u8) -> Result<f64> {
        channel
            .checked_sub(FIRST_CHANNEL)
            .and_then(|i| self.scores.get(usize::from(i)).copied())
            .ok_or_else(|| param(format!("802.15.4 channel {channel} outside 11..=26")))
    }

    pub fn channels(&self) -> impl Iterator<Item = (u8, f64)> + '_ {
        self.scores.iter().enumerate().map(|(i, s)| (FIRST_CHANNEL + i as u8, *s))
    }
}

/// The link being protected: transmitter/receiver pair and power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VictimLink {
    pub base: Point,
    pub remote: Point,
    pub tx_power_dbm: f64,
}

/// Scores each channel by its round-trip loss probability.
pub fn scan(env: &RfEnvironment, victim: &VictimLink) -> Result<ScanReport> {
    let mut scores = [0.0; N_CHANNELS];
    for (i, ch) in ChannelSpec::all_wpan().iter().enumerate() {
        let out = env.hop_success(&victim.base, &victim.remote, victim.tx_power_dbm, ch)?;
        let back = env.hop_success(&victim.remote, &victim.base, victim.tx_power_dbm, ch)?;
        scores[i] = (1.0 - out * back).max(0.0);
    }
    ScanReport::new(scores)
}

/// [`scan`] with seeded measurement noise added to each score.
pub fn noisy_scan(env: &RfEnvironment, victim: &VictimLink, noise_std: f64, seed: u64) -> Result<ScanReport> {
    if !(noise_std >= 0.0) {
        return Err(param("noise_std must be non-negative"));
    }
    let mut report = scan(env, victim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::Normal::new(0.0, noise_std).map_err(|e| param(e.to_string()))?;
    for s in report.scores.iter_mut() {
        *s = (*s + rng.sample(normal)).max(0.0);
    }
    Ok(report)
}

/// Argmin of the scores; ties go to the lowest channel.
pub fn select_channel(report: &ScanReport) -> u8 {
    let mut best = 0;
    for i in 1..N_CHANNELS {
        if report.scores[i] < report.scores[best] {
            best = i;
        }
    }
    FIRST_CHANNEL + best as u8
}

/// Environment snapshots, each valid from `start_s` until the next one.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentPhase {
    pub start_s: f64,
    pub env: RfEnvironment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub rescan_period_s: f64,
    pub horizon_s: f64,
    pub hysteresis: f64,
    /// Channel in use before the first scan; when absent the first scan
    /// picks freely.
    pub initial_channel: Option<u8>,
}

impl PolicyConfig {
    pub fn new(rescan_period_s: f64, horizon_s: f64) -> Self {
        Self {
            rescan_period_s,
            horizon_s,
            hysteresis: DEFAULT_HYSTERESIS,
            initial_channel: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyStep {
    pub t_s: f64,
    pub channel: u8,
    pub switched: bool,
}

/// Re-scans every `rescan_period_s` over `[0, horizon_s)` and moves to the
/// best channel only if it beats the current one by more than the
/// hysteresis margin.
pub fn adaptive_policy(timeline: &[EnvironmentPhase], victim: &VictimLink, cfg: &PolicyConfig) -> Result<Vec<PolicyStep>> {
    if !(cfg.rescan_period_s > 0.0) {
        return Err(param("rescan period must be positive"));
    }
    if !(cfg.hysteresis >= 0.0) {
        return Err(param("hysteresis must be non-negative"));
    }
    if timeline.is_empty() {
        return Err(Error::Scenario("environment timeline is empty".into()));
    }
    if let Some(c) = cfg.initial_channel {
        ChannelSpec::wpan(c)?;
    }
    let mut current = cfg.initial_channel;
    let mut steps = Vec::new();
    let mut k = 0u64;
    loop {
        let t = k as f64 * cfg.rescan_period_s;
        if t >= cfg.horizon_s {
            break;
        }
        let phase = timeline
            .iter()
            .rev()
            .find(|p| p.start_s <= t)
            .unwrap_or(&timeline[0]);
        let report = scan(&phase.env, victim)?;
        let best = select_channel(&report);
        let (channel, switched) = match current {
            None => (best, false),
            Some(c) => {
                let improvement = report.score(c)? - report.score(best)?;
                if best != c && improvement > cfg.hysteresis {
                    (best, true)
                } else {
                    (c, false)
                }
            }
        };
        current = Some(channel);
        steps.push(PolicyStep { t_s: t, channel, switched });
        k += 1;
    }
    Ok(steps)
}

pub fn write_scan_csv<W: Write>(report: &ScanReport, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Scenario(format!("csv write failed: {e}"));
    wr.write_record(["channel", "score"]).map_err(err)?;
    for (ch, s) in report.channels() {
        wr.write_record([ch.to_string(), format!("{s:.8}")]).map_err(err)?;
    }
    wr.flush().map_err(|e| Error::io("<scan csv>", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rf::{InterferenceModel, Interferer};
    use proptest::prelude::*;

    fn victim() -> VictimLink {
        VictimLink {
            base: Point::new(0.0, 0.0),
            remote: Point::new(5.0, 0.0),
            tx_power_dbm: -10.0,
        }
    }

    fn oven(enabled: bool) -> RfEnvironment {
        RfEnvironment::new(
            vec![],
            vec![Interferer {
                label: "oven".into(),
                channel: ChannelSpec::oven(),
                position: Point::new(5.3, 0.0),
                tx_power_dbm: -38.0,
                activity_factor: 0.5,
                enabled,
            }],
            InterferenceModel::default(),
        )
    }

    #[test]
    fn clean_spectrum_scores_zero() {
        let r = scan(&RfEnvironment::clean(), &victim()).unwrap();
        assert!(r.scores.iter().all(|s| *s == 0.0));
        assert_eq!(select_channel(&r), 11);
    }

    #[test]
    fn argmin_examples() {
        let mut s = [0.5; N_CHANNELS];
        s[22 - 11] = 0.1;
        assert_eq!(select_channel(&ScanReport::new(s).unwrap()), 22);
        s[15 - 11] = 0.1;
        assert_eq!(select_channel(&ScanReport::new(s).unwrap()), 15);
        s[0] = -1.0;
        assert!(ScanReport::new(s).is_err());
    }

    #[test]
    fn oven_hurts_its_center_most() {
        let r = scan(&oven(true), &victim()).unwrap();
        let s = |c| r.score(c).unwrap();
        assert!(s(20) > s(19) && s(20) > s(21), "{:?}", r.scores);
        assert!(s(19) > 0.0 && s(11) == 0.0);
    }

    #[test]
    fn oven_toggle_forces_switch() {
        let timeline = [
            EnvironmentPhase { start_s: 0.0, env: oven(false) },
            EnvironmentPhase { start_s: 25.0, env: oven(true) },
            EnvironmentPhase { start_s: 60.0, env: oven(false) },
        ];
        let cfg = PolicyConfig { initial_channel: Some(20), ..PolicyConfig::new(10.0, 100.0) };
        let steps = adaptive_policy(&timeline, &victim(), &cfg).unwrap();
        // oracle: first epoch at or after the toggle
        let first_on = steps.iter().position(|s| s.t_s >= 25.0).unwrap();
        assert!(steps[..first_on].iter().all(|s| s.channel == 20));
        assert!(steps[first_on].switched && steps[first_on].channel != 20);
        // turning the oven off leaves every channel at zero; no gain, no move
        assert!(steps[first_on..].iter().all(|s| s.channel == steps[first_on].channel));
    }

    #[test]
    fn static_environment_never_moves() {
        let tl = [EnvironmentPhase { start_s: 0.0, env: oven(true) }];
        let steps = adaptive_policy(&tl, &victim(), &PolicyConfig::new(1.0, 50.0)).unwrap();
        assert_eq!(steps.len(), 50);
        assert!(steps.iter().all(|s| s.channel == steps[0].channel && !s.switched));
        assert!(adaptive_policy(&tl, &victim(), &PolicyConfig::new(0.0, 5.0)).is_err());
    }

    #[test]
    fn noisy_scan_is_seeded() {
        let a = noisy_scan(&oven(true), &victim(), 0.01, 3).unwrap();
        assert_eq!(a, noisy_scan(&oven(true), &victim(), 0.01, 3).unwrap());
        assert_ne!(a, scan(&oven(true), &victim()).unwrap());
    }

    #[test]
    fn csv_has_sixteen_rows() {
        let mut buf = Vec::new();
        write_scan_csv(&scan(&RfEnvironment::clean(), &victim()).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 17);
        assert_eq!(text.lines().nth(1).unwrap(), "11,0.00000000");
    }

    proptest! {
        #[test]
        fn argmin_scale_invariant(s in prop::array::uniform16(0.0f64..1.0), k in 1e-6f64..1e6) {
            let a = select_channel(&ScanReport::new(s).unwrap());
            let b = select_channel(&ScanReport::new(s.map(|x| x * k)).unwrap());
            prop_assert_eq!(a, b);
        }
    }
}
