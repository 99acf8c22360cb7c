//! Scenario files: node placement, obstacles, interferers and material
//! overrides, stored as TOML.
//!
//! ```toml
//! name = "hallway"
//! tx_power_dbm = -10.0
//! channel = 15
//!
//! [nodes]
//! base = [0.0, 0.0]
//! remote = [6.0, 0.0]
//! sensors = [[6.0, 0.5]]     # optional, star runs
//! logger = [0.0, 0.5]        # optional, defaults to base
//!
//! [materials]                # optional loss overrides, dB
//! drywall = 0.8
//!
//! [[obstacle]]
//! material = "drywall"
//! geometry = { shape = "segment", from = [3.0, -4.0], to = [3.0, 4.0] }
//!
//! [[obstacle]]
//! material = "plant_foliage"
//! geometry = { shape = "disc", center = [5.0, 0.2], radius = 0.3 }
//! loss_db = 18.0             # optional per-obstacle loss
//!
//! [[interferer]]
//! label = "router"
//! channel = { standard = "wlan80211", channel = 11 }
//! position = [1.0, 7.0]
//! tx_power_dbm = 15.0
//! activity_factor = 0.05
//! enabled = true             # optional
//! ```
//!
//! Interferer standards are `wlan80211` (channels 1..=11) and
//! `microwave_oven` (channel omitted). Materials: drywall, plywood, glass,
//! brick, concrete, aluminum_siding, metal_appliance, plant_foliage.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel_select::VictimLink;
use crate::error::{Error, Result};
use crate::link::LinkScenario;
use crate::rf::{ChannelSpec, InterferenceModel, Interferer, MaterialTable, Obstacle, Point, RfEnvironment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Nodes {
    pub base: Point,
    pub remote: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logger: Option<Point>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sensors: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// Default operating power of the 802.15.4 nodes.
    pub tx_power_dbm: f64,
    /// Default 802.15.4 operating channel.
    pub channel: u8,
    pub nodes: Nodes,
    #[serde(default, skip_serializing_if = "MaterialTable::is_empty")]
    pub materials: MaterialTable,
    #[serde(default, rename = "obstacle", skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<Obstacle>,
    #[serde(default, rename = "interferer", skip_serializing_if = "Vec::is_empty")]
    pub interferers: Vec<Interferer>,
}

fn bad(name: &str, msg: String) -> Error {
    Error::Scenario(format!("{name}: {msg}"))
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let n = &self.name;
        if n.trim().is_empty() {
            return Err(Error::Scenario("scenario name is empty".into()));
        }
        if !self.tx_power_dbm.is_finite() {
            return Err(bad(n, "tx_power_dbm must be finite".into()));
        }
        ChannelSpec::wpan(self.channel).map_err(|e| bad(n, format!("channel: {e}")))?;
        let mut points = vec![("nodes.base", self.nodes.base), ("nodes.remote", self.nodes.remote)];
        points.extend(self.nodes.logger.map(|p| ("nodes.logger", p)));
        points.extend(self.nodes.sensors.iter().map(|p| ("nodes.sensors", *p)));
        if let Some((field, _)) = points.iter().find(|(_, p)| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(bad(n, format!("{field} has a non-finite coordinate")));
        }
        for (m, loss) in &self.materials {
            if !(*loss >= 0.0) {
                return Err(bad(n, format!("materials.{m}: loss must be non-negative, got {loss}")));
            }
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            o.validate().map_err(|e| bad(n, format!("obstacle[{i}] ({}): {e}", o.material)))?;
        }
        for (i, it) in self.interferers.iter().enumerate() {
            it.validate().map_err(|e| bad(n, format!("interferer[{i}]: {e}")))?;
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str, source_name: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            message: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(format!("cannot serialize scenario: {e}")))
    }

    pub fn channel_spec(&self) -> ChannelSpec {
        ChannelSpec::wpan(self.channel).expect("validated")
    }

    /// Obstacles with their losses fixed by the material table.
    pub fn resolved_obstacles(&self) -> Vec<Obstacle> {
        self.obstacles.iter().map(|o| o.resolved(&self.materials)).collect()
    }

    pub fn environment(&self, model: &InterferenceModel) -> RfEnvironment {
        RfEnvironment::new(self.resolved_obstacles(), self.interferers.clone(), *model)
    }

    pub fn link_scenario(&self, model: &InterferenceModel) -> LinkScenario {
        LinkScenario {
            base: Some(self.nodes.base),
            remote: Some(self.nodes.remote),
            logger: self.nodes.logger,
            sensors: self.nodes.sensors.clone(),
            env: self.environment(model),
        }
    }

    pub fn victim(&self, tx_power_dbm: f64) -> VictimLink {
        VictimLink {
            base: self.nodes.base,
            remote: self.nodes.remote,
            tx_power_dbm,
        }
    }

    /// Copy with the labelled interferers switched off.
    pub fn with_disabled(&self, labels: &[&str]) -> Result<Self> {
        let mut s = self.clone();
        for l in labels {
            let hits = s.interferers.iter_mut().filter(|i| i.label == *l).map(|i| i.enabled = false).count();
            if hits == 0 {
                return Err(bad(&self.name, format!("no interferer labelled `{l}`")));
            }
        }
        Ok(s)
    }

    pub fn interferer(&self, label: &str) -> Option<&Interferer> {
        self.interferers.iter().find(|i| i.label == label)
    }
}

const PRESETS: &[(&str, &str)] = &[
    ("apartment", include_str!("../presets/apartment.toml")),
    ("single_house", include_str!("../presets/single_house.toml")),
    ("kitchen", include_str!("../presets/kitchen.toml")),
    ("siding", include_str!("../presets/siding.toml")),
    ("brick_wall", include_str!("../presets/brick_wall.toml")),
    ("glass_window", include_str!("../presets/glass_window.toml")),
    ("wood_walls", include_str!("../presets/wood_walls.toml")),
    ("stove", include_str!("../presets/stove.toml")),
    ("plant_near", include_str!("../presets/plant_near.toml")),
    ("plant_offset", include_str!("../presets/plant_offset.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn preset(name: &str) -> Result<Scenario> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Scenario(format!("unknown preset `{name}` (have: {})", preset_names().join(", "))))?;
    Scenario::from_toml_str(text, &format!("preset {name}"))
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_toml_str(&text, &path.display().to_string())
}

/// A file path if one exists, otherwise a preset name.
pub fn resolve_scenario(arg: &str) -> Result<Scenario> {
    if Path::new(arg).is_file() {
        load_scenario(arg)
    } else if PRESETS.iter().any(|(n, _)| *n == arg) {
        preset(arg)
    } else {
        Err(Error::Scenario(format!(
            "`{arg}` is neither a scenario file nor a preset ({})",
            preset_names().join(", ")
        )))
    }
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, s.to_toml_string()?.as_bytes())
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
