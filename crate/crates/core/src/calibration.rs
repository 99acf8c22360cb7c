//! Fitting the interference model constants to measured echo-test
//! success ratios.

use std::fs;
use std::io::Read;
use std::path::Path;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use argmin_math::ArgminAdd;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::EchoLink;
use crate::rf::{ChannelSpec, InterferenceModel};
use crate::scenario::{resolve_scenario, write_atomic, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Fit,
    Holdout,
}

/// One measured configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    /// Rows sharing a group are reported together.
    pub group: String,
    pub scenario: String,
    pub channel: u8,
    pub power_dbm: f64,
    #[serde(default)]
    pub condition: String,
    /// Interferer labels switched off, separated by `;`.
    #[serde(default)]
    pub disable: String,
    pub mean_pct: f64,
    pub std_pct: f64,
    pub role: Role,
}

impl Target {
    pub fn disabled_labels(&self) -> Vec<&str> {
        self.disable.split(';').map(str::trim).filter(|s| !s.is_empty()).collect()
    }

    /// The target's scenario with its interferers switched as listed.
    pub fn scenario(&self) -> Result<Scenario> {
        resolve_scenario(&self.scenario)?.with_disabled(&self.disabled_labels())
    }

    pub fn channel_spec(&self) -> Result<ChannelSpec> {
        ChannelSpec::wpan(self.channel)
    }
}

pub fn parse_targets<R: Read>(r: R, source_name: &str) -> Result<Vec<Target>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rd.deserialize().enumerate() {
        let t: Target = rec.map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            message: format!("row {}: {e}", i + 2),
        })?;
        out.push(t);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            source_name: source_name.to_string(),
            message: "no target rows".into(),
        });
    }
    Ok(out)
}

pub fn load_targets(path: impl AsRef<Path>) -> Result<Vec<Target>> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_targets(f, &path.display().to_string())
}

/// Expected round-trip success, in percent, of an echo test for `target`.
pub fn predict_pct(scenario: &Scenario, target: &Target, model: &InterferenceModel) -> Result<f64> {
    let link = EchoLink::from_scenario(&scenario.link_scenario(model), &target.channel_spec()?, target.power_dbm)?;
    Ok(100.0 * link.round_trip())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedRow {
    pub target: Target,
    pub predicted_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub model: InterferenceModel,
    /// Root-mean-square error over the fit rows, percentage points.
    pub rms_fit_pp: f64,
    pub rows: Vec<FittedRow>,
}

struct Problem {
    rows: Vec<(Scenario, Target)>,
}

fn model_from(x: &[f64]) -> InterferenceModel {
    InterferenceModel {
        isr_midpoint_db: x[0],
        isr_slope_db: x[1].exp(),
        oven_rolloff_db_per_mhz: x[2].abs(),
    }
}

impl CostFunction for Problem {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let m = model_from(x);
        let mut sse = 0.0;
        for (s, t) in &self.rows {
            let p = predict_pct(s, t, &m).map_err(|e| argmin::core::Error::msg(e.to_string()))?;
            sse += (p - t.mean_pct).powi(2);
        }
        Ok(sse)
    }
}

/// Least-squares fit of the model constants over the `fit` rows, by
/// Nelder–Mead from a handful of starting simplices.
pub fn calibrate(targets: &[Target]) -> Result<CalibrationReport> {
    let mut fit_rows = Vec::new();
    let mut all = Vec::new();
    for t in targets {
        let s = t.scenario()?;
        if t.role == Role::Fit {
            fit_rows.push((s.clone(), t.clone()));
        }
        all.push((s, t.clone()));
    }
    if fit_rows.is_empty() {
        return Err(Error::Calibration("no rows marked `fit`".into()));
    }
    let problem = Problem { rows: fit_rows };

    let starts = [[0.0, 10f64.ln(), 1.0], [10.0, 5f64.ln(), 2.0], [20.0, 2f64.ln(), 0.5]];
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in starts {
        let start = s.to_vec();
        let mut simplex = vec![start.clone()];
        for (k, step) in [6.0, 0.5, 0.5].into_iter().enumerate() {
            let mut e = vec![0.0; 3];
            e[k] = step;
            simplex.push(start.add(&e));
        }
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-12)
            .map_err(|e| Error::Calibration(e.to_string()))?;
        let res = Executor::new(Problem { rows: problem.rows.clone() }, solver)
            .configure(|st| st.max_iters(3000))
            .run()
            .map_err(|e| Error::Calibration(e.to_string()))?;
        let cost = res.state().get_best_cost();
        if let Some(p) = res.state().get_best_param() {
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                best = Some((cost, p.clone()));
            }
        }
    }
    let (sse, x) = best.ok_or_else(|| Error::Calibration("optimizer returned no parameters".into()))?;
    let model = model_from(&x);
    model.validate()?;
    let rows = all
        .iter()
        .map(|(s, t)| {
            Ok(FittedRow {
                target: t.clone(),
                predicted_pct: predict_pct(s, t, &model)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CalibrationReport {
        model,
        rms_fit_pp: (sse / problem.rows.len() as f64).sqrt(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct CalibrationFile {
    interference: InterferenceModel,
}

pub fn save_calibration(model: &InterferenceModel, path: impl AsRef<Path>) -> Result<()> {
    let text = toml::to_string(&CalibrationFile { interference: *model })
        .map_err(|e| Error::Calibration(format!("cannot serialize: {e}")))?;
    write_atomic(path, text.as_bytes())
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<InterferenceModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let f: CalibrationFile = toml::from_str(&text).map_err(|e| Error::Parse {
        source_name: path.display().to_string(),
        message: e.to_string(),
    })?;
    f.interference.validate()?;
    Ok(f.interference)
}

/// The bundled targets.
pub fn bundled_targets() -> Vec<Target> {
    parse_targets(include_str!("../data/tables.csv").as_bytes(), "bundled tables.csv").expect("bundled targets parse")
}
