//! 2.4 GHz radio environment: channel plans, obstacle-aware path loss, and
//! the per-message success model for an 802.15.4 link sharing spectrum with
//! WLANs and microwave ovens.
//!
//! Success on one hop is
//!
//! ```text
//! p = 0                                         if margin < 0
//! p = Π_i (1 - activity_i · overlap_i · pf(ISR_i))   otherwise
//! ```
//!
//! where `overlap_i` is the fraction of the victim channel covered by the
//! interferer's occupied band, and `pf` is a logistic in the in-band
//! interferer-to-signal ratio at the receiver. The interferer's received
//! power is weighted by its transmit spectral mask at the victim's offset.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// XBee-class receiver sensitivity.
pub const DEFAULT_SENSITIVITY_DBM: f64 = -92.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standard {
    Wpan154,
    Wlan80211,
    MicrowaveOven,
}

impl Standard {
    pub fn valid_indices(self) -> std::ops::RangeInclusive<u8> {
        match self {
            Standard::Wpan154 => 11..=26,
            Standard::Wlan80211 => 1..=11,
            Standard::MicrowaveOven => 0..=0,
        }
    }

    pub fn occupied_bw_mhz(self) -> f64 {
        match self {
            Standard::Wpan154 => 2.0,
            Standard::Wlan80211 => 25.0,
            Standard::MicrowaveOven => 20.0,
        }
    }
}

pub fn channel_center_freq(standard: Standard, index: u8) -> Result<f64> {
    if !standard.valid_indices().contains(&index) {
        return Err(param(format!("channel {index} is not valid for {standard:?}")));
    }
    Ok(match standard {
        Standard::Wpan154 => 2405.0 + 5.0 * f64::from(index - 11),
        Standard::Wlan80211 => 2412.0 + 5.0 * f64::from(index - 1),
        Standard::MicrowaveOven => 2450.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelRef", into = "ChannelRef")]
pub struct ChannelSpec {
    pub standard: Standard,
    pub index: u8,
    pub center_mhz: f64,
    pub occupied_bw_mhz: f64,
}

/// On-disk form of a channel: the center and width follow from these.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct ChannelRef {
    standard: Standard,
    #[serde(default)]
    channel: u8,
}

impl TryFrom<ChannelRef> for ChannelSpec {
    type Error = Error;

    fn try_from(r: ChannelRef) -> Result<Self> {
        ChannelSpec::new(r.standard, r.channel)
    }
}

impl From<ChannelSpec> for ChannelRef {
    fn from(c: ChannelSpec) -> Self {
        ChannelRef {
            standard: c.standard,
            channel: c.index,
        }
    }
}

impl ChannelSpec {
    pub fn new(standard: Standard, index: u8) -> Result<Self> {
        Ok(Self {
            standard,
            index,
            center_mhz: channel_center_freq(standard, index)?,
            occupied_bw_mhz: standard.occupied_bw_mhz(),
        })
    }

    pub fn wpan(index: u8) -> Result<Self> {
        Self::new(Standard::Wpan154, index)
    }

    pub fn wlan(index: u8) -> Result<Self> {
        Self::new(Standard::Wlan80211, index)
    }

    pub fn oven() -> Self {
        Self::new(Standard::MicrowaveOven, 0).expect("oven channel is fixed")
    }

    /// All sixteen 802.15.4 channels in the 2.4 GHz band.
    pub fn all_wpan() -> Vec<Self> {
        Standard::Wpan154
            .valid_indices()
            .map(|i| Self::wpan(i).expect("valid index"))
            .collect()
    }

    pub fn low_mhz(&self) -> f64 {
        self.center_mhz - self.occupied_bw_mhz / 2.0
    }

    pub fn high_mhz(&self) -> f64 {
        self.center_mhz + self.occupied_bw_mhz / 2.0
    }
}

/// Width of the intersection of the two occupied bands, in MHz.
pub fn spectral_overlap(a: &ChannelSpec, b: &ChannelSpec) -> f64 {
    (a.high_mhz().min(b.high_mhz()) - a.low_mhz().max(b.low_mhz())).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, o: &Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

fn cross(o: &Point, a: &Point, b: &Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn segments_intersect(p1: &Point, p2: &Point, q1: &Point, q2: &Point) -> bool {
    let on_segment = |a: &Point, b: &Point, c: &Point| {
        c.x >= a.x.min(b.x) && c.x <= a.x.max(b.x) && c.y >= a.y.min(b.y) && c.y <= a.y.max(b.y)
    };
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(&Point::new(a.x + t * dx, a.y + t * dy))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    Drywall,
    Plywood,
    Glass,
    Brick,
    Concrete,
    AluminumSiding,
    MetalAppliance,
    PlantFoliage,
}

impl Material {
    pub const ALL: [Material; 8] = [
        Material::Drywall,
        Material::Plywood,
        Material::Glass,
        Material::Brick,
        Material::Concrete,
        Material::AluminumSiding,
        Material::MetalAppliance,
        Material::PlantFoliage,
    ];

    /// Per-traversal attenuation at 2.4 GHz in dB.
    pub fn default_loss_db(self) -> f64 {
        match self {
            Material::Drywall | Material::Plywood => 0.5,
            Material::Glass => 3.0,
            Material::Brick => 5.0,
            Material::Concrete => 30.0,
            Material::AluminumSiding => 40.0,
            Material::MetalAppliance => 12.0,
            Material::PlantFoliage => 15.0,
        }
    }

    /// Obstacles that only attenuate when an endpoint is this close to them.
    pub fn near_field_m(self) -> Option<f64> {
        match self {
            Material::PlantFoliage => Some(0.5),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Material::Drywall => "drywall",
            Material::Plywood => "plywood",
            Material::Glass => "glass",
            Material::Brick => "brick",
            Material::Concrete => "concrete",
            Material::AluminumSiding => "aluminum_siding",
            Material::MetalAppliance => "metal_appliance",
            Material::PlantFoliage => "plant_foliage",
        }
    }
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Material {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Material::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| param(format!("unknown material `{s}`")))
    }
}

/// Material loss overrides, falling back to [`Material::default_loss_db`].
pub type MaterialTable = BTreeMap<Material, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Geometry {
    Segment { from: Point, to: Point },
    Disc { center: Point, radius: f64 },
}

impl Geometry {
    fn intersects(&self, a: &Point, b: &Point) -> bool {
        match self {
            Geometry::Segment { from, to } => segments_intersect(a, b, from, to),
            Geometry::Disc { center, radius } => point_segment_distance(center, a, b) <= *radius,
        }
    }

    fn clearance(&self, p: &Point) -> f64 {
        match self {
            Geometry::Segment { from, to } => point_segment_distance(p, from, to),
            Geometry::Disc { center, radius } => (p.distance(center) - radius).max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub material: Material,
    pub geometry: Geometry,
    /// Explicit loss; the material table decides when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_db: Option<f64>,
}

impl Obstacle {
    pub fn new(material: Material, geometry: Geometry) -> Self {
        Self {
            material,
            geometry,
            loss_db: None,
        }
    }

    pub fn wall(material: Material, from: Point, to: Point) -> Self {
        Self::new(material, Geometry::Segment { from, to })
    }

    pub fn disc(material: Material, center: Point, radius: f64) -> Self {
        Self::new(material, Geometry::Disc { center, radius })
    }

    pub fn loss_db(&self) -> f64 {
        self.loss_db.unwrap_or_else(|| self.material.default_loss_db())
    }

    pub fn resolved(&self, table: &MaterialTable) -> Obstacle {
        let loss = self
            .loss_db
            .or_else(|| table.get(&self.material).copied())
            .unwrap_or_else(|| self.material.default_loss_db());
        Obstacle {
            loss_db: Some(loss),
            ..self.clone()
        }
    }

    /// Whether the straight path `a → b` pays this obstacle's loss.
    pub fn attenuates(&self, a: &Point, b: &Point) -> bool {
        if !self.geometry.intersects(a, b) {
            return false;
        }
        match self.material.near_field_m() {
            Some(reach) => self.geometry.clearance(a).min(self.geometry.clearance(b)) <= reach,
            None => true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.loss_db {
            if !(l >= 0.0) {
                return Err(param(format!("obstacle loss must be non-negative, got {l}")));
            }
        }
        if let Geometry::Disc { radius, .. } = self.geometry {
            if !(radius >= 0.0) {
                return Err(param("disc radius must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Free-space loss with distance in meters and frequency in MHz.
pub fn free_space_loss_db(distance_m: f64, freq_mhz: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(param(format!("distance must be positive, got {distance_m}")));
    }
    if !(freq_mhz > 0.0) {
        return Err(param(format!("frequency must be positive, got {freq_mhz}")));
    }
    Ok(20.0 * distance_m.log10() + 20.0 * freq_mhz.log10() - 27.55)
}

/// Free-space loss plus the loss of every obstacle on the path.
pub fn path_loss_db(distance_m: f64, obstacles_crossed: &[Obstacle], freq_mhz: f64) -> Result<f64> {
    Ok(free_space_loss_db(distance_m, freq_mhz)? + obstacles_crossed.iter().map(Obstacle::loss_db).sum::<f64>())
}

/// Path loss between two points; only obstacles the path meets count.
pub fn path_loss_between(a: &Point, b: &Point, obstacles: &[Obstacle], freq_mhz: f64) -> Result<f64> {
    let crossed: Vec<Obstacle> = obstacles.iter().filter(|o| o.attenuates(a, b)).cloned().collect();
    path_loss_db(a.distance(b), &crossed, freq_mhz)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub path_loss_db: f64,
    pub rx_power_dbm: f64,
    pub sensitivity_dbm: f64,
    pub margin_db: f64,
}

impl LinkBudget {
    pub fn new(tx_power_dbm: f64, path_loss_db: f64, sensitivity_dbm: f64) -> Self {
        let rx_power_dbm = tx_power_dbm - path_loss_db;
        Self {
            tx_power_dbm,
            path_loss_db,
            rx_power_dbm,
            sensitivity_dbm,
            margin_db: rx_power_dbm - sensitivity_dbm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interferer {
    #[serde(default)]
    pub label: String,
    pub channel: ChannelSpec,
    pub position: Point,
    pub tx_power_dbm: f64,
    pub activity_factor: f64,
    #[serde(default = "enabled_default")]
    pub enabled: bool,
}

fn enabled_default() -> bool {
    true
}

impl Interferer {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.activity_factor) {
            return Err(param(format!(
                "interferer `{}` activity factor {} outside [0, 1]",
                self.label, self.activity_factor
            )));
        }
        if self.channel.standard == Standard::Wpan154 {
            return Err(param(format!("interferer `{}` must be a WLAN or an oven", self.label)));
        }
        Ok(())
    }
}

/// An interferer as seen by one receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceivedInterferer {
    pub channel: ChannelSpec,
    /// Total received power before any spectral weighting.
    pub rx_power_dbm: f64,
    pub activity_factor: f64,
    pub enabled: bool,
}

/// Fitted constants of the interference model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceModel {
    /// In-band ISR at which an overlapping burst corrupts half the messages.
    pub isr_midpoint_db: f64,
    /// Logistic scale: ISR change for one e-fold of the odds.
    pub isr_slope_db: f64,
    /// Spectral roll-off of oven emission away from its center, dB/MHz.
    pub oven_rolloff_db_per_mhz: f64,
}

impl Default for InterferenceModel {
    /// Values produced by `bodynet calibrate --targets data/tables.csv`.
    fn default() -> Self {
        Self {
            isr_midpoint_db: 13.316750908755981,
            isr_slope_db: 4.834298303533274,
            oven_rolloff_db_per_mhz: 1.6954163762520666,
        }
    }
}

impl InterferenceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.isr_slope_db > 0.0 && self.isr_midpoint_db.is_finite() && self.oven_rolloff_db_per_mhz >= 0.0) {
            return Err(param("interference model needs a positive slope and a non-negative roll-off"));
        }
        Ok(())
    }

    /// Fraction of overlapping bursts that corrupt a message at this ISR.
    pub fn power_factor(&self, isr_db: f64) -> f64 {
        1.0 / (1.0 + (-(isr_db - self.isr_midpoint_db) / self.isr_slope_db).exp())
    }

    /// Transmit-mask weighting (dBr, ≤ 0) of an interferer at a frequency offset.
    pub fn mask_db(&self, standard: Standard, offset_mhz: f64) -> f64 {
        let off = offset_mhz.abs();
        match standard {
            // 802.11b transmit spectrum mask
            Standard::Wlan80211 => {
                if off < 11.0 {
                    0.0
                } else if off < 22.0 {
                    -30.0
                } else {
                    -50.0
                }
            }
            Standard::MicrowaveOven => -self.oven_rolloff_db_per_mhz * off,
            Standard::Wpan154 => 0.0,
        }
    }

    /// One interferer's contribution to the loss of a message.
    pub fn loss_term(&self, link: &LinkBudget, victim: &ChannelSpec, i: &ReceivedInterferer) -> f64 {
        if !i.enabled || i.activity_factor == 0.0 {
            return 0.0;
        }
        let overlap_frac = spectral_overlap(victim, &i.channel) / victim.occupied_bw_mhz;
        if overlap_frac == 0.0 {
            return 0.0;
        }
        let in_band = i.rx_power_dbm + self.mask_db(i.channel.standard, victim.center_mhz - i.channel.center_mhz);
        let isr = in_band - link.rx_power_dbm;
        (i.activity_factor * overlap_frac * self.power_factor(isr)).clamp(0.0, 1.0)
    }
}

/// Probability one message on `victim` is received intact.
pub fn message_success_prob(
    link: &LinkBudget,
    victim: &ChannelSpec,
    interferers: &[ReceivedInterferer],
    model: &InterferenceModel,
) -> f64 {
    if link.margin_db < 0.0 {
        return 0.0;
    }
    interferers
        .iter()
        .map(|i| 1.0 - model.loss_term(link, victim, i))
        .product::<f64>()
        .clamp(0.0, 1.0)
}

/// Immutable description of the radio surroundings.
#[derive(Debug, Clone, PartialEq)]
pub struct RfEnvironment {
    pub obstacles: Vec<Obstacle>,
    pub interferers: Vec<Interferer>,
    pub model: InterferenceModel,
    pub sensitivity_dbm: f64,
}

impl RfEnvironment {
    pub fn new(obstacles: Vec<Obstacle>, interferers: Vec<Interferer>, model: InterferenceModel) -> Self {
        Self {
            obstacles,
            interferers,
            model,
            sensitivity_dbm: DEFAULT_SENSITIVITY_DBM,
        }
    }

    pub fn clean() -> Self {
        Self::new(Vec::new(), Vec::new(), InterferenceModel::default())
    }

    pub fn link_budget(&self, tx: &Point, rx: &Point, tx_power_dbm: f64, channel: &ChannelSpec) -> Result<LinkBudget> {
        let pl = path_loss_between(tx, rx, &self.obstacles, channel.center_mhz)?;
        Ok(LinkBudget::new(tx_power_dbm, pl, self.sensitivity_dbm))
    }

    pub fn received_interferers(&self, rx: &Point) -> Result<Vec<ReceivedInterferer>> {
        self.interferers
            .iter()
            .map(|i| {
                let pl = path_loss_between(&i.position, rx, &self.obstacles, i.channel.center_mhz)?;
                Ok(ReceivedInterferer {
                    channel: i.channel,
                    rx_power_dbm: i.tx_power_dbm - pl,
                    activity_factor: i.activity_factor,
                    enabled: i.enabled,
                })
            })
            .collect()
    }

    /// Success probability of one hop `tx → rx`.
    pub fn hop_success(&self, tx: &Point, rx: &Point, tx_power_dbm: f64, channel: &ChannelSpec) -> Result<f64> {
        let link = self.link_budget(tx, rx, tx_power_dbm, channel)?;
        let seen = self.received_interferers(rx)?;
        Ok(message_success_prob(&link, channel, &seen, &self.model))
    }

    pub fn with_model(&self, model: InterferenceModel) -> Self {
        Self {
            model,
            ..self.clone()
        }
    }
}
