//! Battery-life arithmetic from component currents and duty cycles, plus
//! integration of a node's mode timeline.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::frame::FRAME_LEN;
use crate::link::airtime_s;
use crate::sensor::{Mode, ModeInterval};

pub const ACCELEROMETER: &str = "accelerometer";
pub const MICROCONTROLLER: &str = "microcontroller";
pub const RADIO: &str = "radio";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentCurrent {
    pub name: String,
    pub active_ma: f64,
    pub sleep_ma: f64,
}

impl ComponentCurrent {
    pub fn new(name: impl Into<String>, active_ma: f64, sleep_ma: f64) -> Result<Self> {
        let c = Self {
            name: name.into(),
            active_ma,
            sleep_ma,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.sleep_ma && self.sleep_ma <= self.active_ma && self.active_ma.is_finite()) {
            return Err(param(format!("{}: need 0 <= sleep_ma <= active_ma", self.name)));
        }
        Ok(())
    }
}

/// Accelerometer, microcontroller and radio with their default draws.
pub fn default_components() -> Vec<ComponentCurrent> {
    vec![
        ComponentCurrent::new(ACCELEROMETER, 0.5, 0.003).expect("valid"),
        ComponentCurrent::new(MICROCONTROLLER, 5.8, 0.1).expect("valid"),
        ComponentCurrent::new(RADIO, 45.0, 0.05).expect("valid"),
    ]
}

/// The same set with every sleep draw zeroed.
pub fn active_only_components() -> Vec<ComponentCurrent> {
    default_components()
        .into_iter()
        .map(|c| ComponentCurrent { sleep_ma: 0.0, ..c })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    pub capacity_mah: f64,
    pub nominal_v: f64,
}

impl Battery {
    pub fn new(capacity_mah: f64, nominal_v: f64) -> Result<Self> {
        if !(capacity_mah > 0.0 && capacity_mah.is_finite()) {
            return Err(param("battery capacity must be positive"));
        }
        Ok(Self { capacity_mah, nominal_v })
    }

    /// 3.7 V Li-ion pack.
    pub fn pack_6600() -> Self {
        Self {
            capacity_mah: 6600.0,
            nominal_v: 3.7,
        }
    }

    /// LIR3048 coin cell.
    pub fn coin_230() -> Self {
        Self {
            capacity_mah: 230.0,
            nominal_v: 3.6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DutyProfile(pub BTreeMap<String, f64>);

impl DutyProfile {
    pub fn uniform(components: &[ComponentCurrent], duty: f64) -> Self {
        Self(components.iter().map(|c| (c.name.clone(), duty)).collect())
    }

    pub fn with(mut self, name: &str, duty: f64) -> Self {
        self.0.insert(name.to_string(), duty);
        self
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        let d = *self
            .0
            .get(name)
            .ok_or_else(|| param(format!("no duty entry for component {name}")))?;
        if !(0.0..=1.0).contains(&d) {
            return Err(param(format!("duty for {name} must be in [0, 1], got {d}")));
        }
        Ok(d)
    }
}

pub fn component_average(c: &ComponentCurrent, duty: f64) -> f64 {
    duty * c.active_ma + (1.0 - duty) * c.sleep_ma
}

pub fn average_current(components: &[ComponentCurrent], duty: &DutyProfile) -> Result<f64> {
    components.iter().try_fold(0.0, |acc, c| {
        c.validate()?;
        Ok(acc + component_average(c, duty.get(&c.name)?))
    })
}

pub fn battery_life_hours(battery: &Battery, components: &[ComponentCurrent], duty: &DutyProfile) -> Result<f64> {
    let avg = average_current(components, duty)?;
    if avg <= 0.0 {
        return Err(Error::UndefinedLife);
    }
    Ok(battery.capacity_mah / avg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentUsage {
    pub name: String,
    pub duty: f64,
    pub avg_ma: f64,
    pub mah_consumed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub duration_h: f64,
    pub components: Vec<ComponentUsage>,
    pub consumed_mah: f64,
    pub remaining_mah: f64,
    /// Hours left at the observed average draw; `None` when nothing was drawn.
    pub projected_life_h: Option<f64>,
    pub exceeds_capacity: bool,
}

/// Integrates component currents over a mode timeline. Accelerometer and
/// microcontroller are active in `Active` mode; the radio is active only for
/// the airtime of each emitted frame.
pub fn simulate_energy(timeline: &[ModeInterval], components: &[ComponentCurrent], battery: &Battery) -> Result<EnergyReport> {
    let total_s: f64 = timeline.iter().map(|iv| iv.duration_s).sum();
    let active_s: f64 = timeline
        .iter()
        .filter(|iv| iv.mode == Mode::Active)
        .map(|iv| iv.duration_s)
        .sum();
    let radio_s = (timeline.iter().map(|iv| f64::from(iv.frames)).sum::<f64>() * airtime_s(FRAME_LEN)).min(total_s);

    let mut usage = Vec::with_capacity(components.len());
    for c in components {
        c.validate()?;
        let on_s = if c.name == RADIO { radio_s } else { active_s };
        let duty = if total_s > 0.0 { on_s / total_s } else { 0.0 };
        let mah = (on_s * c.active_ma + (total_s - on_s) * c.sleep_ma) / 3600.0;
        usage.push(ComponentUsage {
            name: c.name.clone(),
            duty,
            avg_ma: if total_s > 0.0 { mah * 3600.0 / total_s } else { 0.0 },
            mah_consumed: mah,
        });
    }
    let consumed: f64 = usage.iter().map(|u| u.mah_consumed).sum();
    let avg: f64 = usage.iter().map(|u| u.avg_ma).sum();
    let remaining = battery.capacity_mah - consumed;
    Ok(EnergyReport {
        duration_h: total_s / 3600.0,
        components: usage,
        consumed_mah: consumed,
        remaining_mah: remaining.max(0.0),
        projected_life_h: (avg > 0.0).then(|| remaining.max(0.0) / avg),
        exceeds_capacity: consumed > battery.capacity_mah,
    })
}

pub fn write_energy_csv<W: Write>(report: &EnergyReport, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Scenario(format!("csv write failed: {e}"));
    wr.write_record(["component", "duty", "avg_ma", "mah_consumed"]).map_err(err)?;
    for u in &report.components {
        wr.write_record([
            u.name.clone(),
            format!("{:.6}", u.duty),
            format!("{:.6}", u.avg_ma),
            format!("{:.6}", u.mah_consumed),
        ])
        .map_err(err)?;
    }
    wr.flush().map_err(|e| Error::io("<energy csv>", e))
}
