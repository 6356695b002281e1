//! Wrapped display assemblies, channel layouts and pressure rendering.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::pneumatics::{Channel, ChannelKind, ChannelSpec, PlantConfig};

/// Pressure rendered for zero uncertainty (deflated bags), psi.
pub const MIN_RENDER_PSI: f64 = 1.0;
/// Pressure rendered for full uncertainty (inflated bags), psi.
pub const MAX_RENDER_PSI: f64 = 3.0;

pub const CELL_SIZE_CM: f64 = 2.54;
/// Gap between neighbouring rings of a 3-DoF group. Metadata only.
pub const RING_SEPARATION_CM: f64 = 1.9;
/// Mounting restricts circumferential contraction below this fraction.
pub const MAX_MOUNT_CONTRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplayGeometry {
    pub cell_size: f64,
    pub arm_radius: f64,
    pub circumference: f64,
    pub length: f64,
    pub rings_per_group: usize,
}

impl DisplayGeometry {
    /// Geometry for an arm segment of radius `arm_radius` cm.
    pub fn new(arm_radius: f64, length: f64, rings_per_group: usize) -> Result<Self> {
        if !(arm_radius > 0.0) || !(length > 0.0) {
            return Err(invalid_param("arm radius and length must be positive"));
        }
        Ok(DisplayGeometry {
            cell_size: CELL_SIZE_CM,
            arm_radius,
            circumference: 2.0 * PI * arm_radius,
            length,
            rings_per_group,
        })
    }

    /// Whole cells that fit around the arm.
    pub fn cells_around(&self) -> usize {
        (self.circumference / self.cell_size).floor() as usize
    }

    pub fn cells_along(&self) -> usize {
        (self.length / self.cell_size).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0) {
            return Err(invalid_param("cell_size must be positive"));
        }
        if (self.circumference - 2.0 * PI * self.arm_radius).abs() > 1e-9 {
            return Err(invalid_param("circumference must equal 2πR"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmLocation {
    Base,
    Middle,
    EndEffector,
}

impl ArmLocation {
    pub const ALL: [ArmLocation; 3] = [ArmLocation::Base, ArmLocation::Middle, ArmLocation::EndEffector];

    pub fn id(self) -> &'static str {
        match self {
            ArmLocation::Base => "base",
            ArmLocation::Middle => "middle",
            ArmLocation::EndEffector => "end_effector",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.id() == id)
    }
}

impl fmt::Display for ArmLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutMode {
    /// One channel per location.
    Local,
    /// Every location carries all channels.
    Global,
}

/// The rings mounted at one location and the channel driving each ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationChannels {
    pub location: ArmLocation,
    pub rings: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub mode: LayoutMode,
    pub kind: ChannelKind,
    pub channel_count: usize,
    pub locations: Vec<LocationChannels>,
}

impl Layout {
    /// Local layout: channel `i` drives every ring at location `i`.
    pub fn local(locations: &[ArmLocation], rings_per_location: usize) -> Result<Self> {
        if locations.is_empty() || rings_per_location == 0 {
            return Err(invalid_param("local layout needs locations and rings"));
        }
        let layout = Layout {
            mode: LayoutMode::Local,
            kind: ChannelKind::Sleeve,
            channel_count: locations.len(),
            locations: locations
                .iter()
                .enumerate()
                .map(|(i, &location)| LocationChannels { location, rings: vec![i; rings_per_location] })
                .collect(),
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Global layout: every location carries rings for channels `0..channels`.
    pub fn global(locations: &[ArmLocation], channels: usize) -> Result<Self> {
        if locations.is_empty() || channels == 0 {
            return Err(invalid_param("global layout needs locations and channels"));
        }
        let layout = Layout {
            mode: LayoutMode::Global,
            kind: ChannelKind::Ring,
            channel_count: channels,
            locations: locations
                .iter()
                .map(|&location| LocationChannels { location, rings: (0..channels).collect() })
                .collect(),
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Three sleeves at base, middle and end effector.
    pub fn default_local() -> Self {
        Self::local(&ArmLocation::ALL, 1).expect("default local layout")
    }

    /// Three 3-ring groups at base, middle and end effector.
    pub fn default_global() -> Self {
        Self::global(&ArmLocation::ALL, 3).expect("default global layout")
    }

    /// Single 1-DoF sleeve, as used for scalar uncertainty.
    pub fn single_sleeve(location: ArmLocation) -> Self {
        Self::local(&[location], 1).expect("single sleeve layout")
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            LayoutMode::Local => {
                if self.locations.len() != self.channel_count {
                    return Err(Error::Configuration("local layout needs one location per channel".into()));
                }
                for (i, loc) in self.locations.iter().enumerate() {
                    if loc.rings.is_empty() || loc.rings.iter().any(|&c| c != i) {
                        return Err(Error::Configuration(format!(
                            "local location {} must carry only channel {i}",
                            loc.location
                        )));
                    }
                }
            }
            LayoutMode::Global => {
                let expected: Vec<usize> = (0..self.channel_count).collect();
                if self.locations.iter().any(|l| l.rings != expected) {
                    return Err(Error::Configuration("global locations must carry every channel in order".into()));
                }
            }
        }
        Ok(())
    }

    pub fn ring_count(&self) -> usize {
        self.locations.iter().map(|l| l.rings.len()).sum()
    }
}

/// Target pressures for every ring at one location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationFrame {
    pub id: String,
    pub pressures: Vec<f64>,
}

/// One rendered set of ring targets. Serializes as
/// `{"t": .., "locations": [{"id": .., "pressures": [..]}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderFrame {
    pub t: f64,
    pub locations: Vec<LocationFrame>,
}

impl RenderFrame {
    pub fn location(&self, id: &str) -> Option<&LocationFrame> {
        self.locations.iter().find(|l| l.id == id)
    }

    pub fn max_pressure(&self) -> f64 {
        self.locations.iter().flat_map(|l| l.pressures.iter().copied()).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Affine map from uncertainty in `[0, 1]` to `1..=3` psi.
///
/// Out-of-range values are clamped; NaN is rejected.
pub fn map_uncertainty(u: f64) -> Result<f64> {
    if u.is_nan() {
        return Err(invalid_param("uncertainty is NaN"));
    }
    let u = u.clamp(0.0, 1.0);
    Ok(MIN_RENDER_PSI + (MAX_RENDER_PSI - MIN_RENDER_PSI) * u)
}

/// Inverse of [`map_uncertainty`] on the rendered range.
pub fn pressure_to_uncertainty(psi: f64) -> f64 {
    ((psi - MIN_RENDER_PSI) / (MAX_RENDER_PSI - MIN_RENDER_PSI)).clamp(0.0, 1.0)
}

/// Render per-channel uncertainties onto the layout at time `t`.
pub fn render(layout: &Layout, channel_uncertainties: &[f64], t: f64) -> Result<RenderFrame> {
    if channel_uncertainties.len() != layout.channel_count {
        return Err(invalid_param(format!(
            "layout has {} channels, got {} uncertainties",
            layout.channel_count,
            channel_uncertainties.len()
        )));
    }
    let psi = channel_uncertainties.iter().map(|&u| map_uncertainty(u)).collect::<Result<Vec<_>>>()?;
    let locations = layout
        .locations
        .iter()
        .map(|loc| LocationFrame {
            id: loc.location.id().to_string(),
            pressures: loc.rings.iter().map(|&c| psi[c]).collect(),
        })
        .collect();
    Ok(RenderFrame { t, locations })
}

/// The physical rings of a layout, one pneumatic channel per (location, ring).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplayPlant {
    channels: BTreeMap<(String, usize), Channel>,
    pub time: f64,
}

impl DisplayPlant {
    /// All rings start at rest at `initial_pressure`.
    pub fn for_layout(layout: &Layout, initial_pressure: f64) -> Self {
        let spec = ChannelSpec::calibrated(layout.kind);
        let channels = layout
            .locations
            .iter()
            .flat_map(|loc| {
                (0..loc.rings.len())
                    .map(move |ring| ((loc.location.id().to_string(), ring), Channel::new(spec, initial_pressure)))
            })
            .collect();
        DisplayPlant { channels, time: 0.0 }
    }

    pub fn empty() -> Self {
        DisplayPlant { channels: BTreeMap::new(), time: 0.0 }
    }

    pub fn insert(&mut self, location: &str, ring: usize, channel: Channel) {
        self.channels.insert((location.to_string(), ring), channel);
    }

    pub fn channel(&self, location: &str, ring: usize) -> Option<&Channel> {
        self.channels.get(&(location.to_string(), ring))
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Current pressures grouped like a frame.
    pub fn snapshot(&self) -> RenderFrame {
        let mut locations: Vec<LocationFrame> = Vec::new();
        for ((id, _), ch) in &self.channels {
            match locations.last_mut() {
                Some(last) if &last.id == id => last.pressures.push(ch.pressure()),
                _ => locations.push(LocationFrame { id: id.clone(), pressures: vec![ch.pressure()] }),
            }
        }
        RenderFrame { t: self.time, locations }
    }

    pub fn step(&mut self, config: &PlantConfig) {
        for ch in self.channels.values_mut() {
            ch.step(config);
        }
        self.time += config.dt;
    }

    pub fn advance(&mut self, duration: f64, config: &PlantConfig) {
        let steps = (duration / config.dt).round() as u64;
        for _ in 0..steps {
            self.step(config);
        }
    }
}

/// Set regulator commands from a frame. Every ring named in the frame must
/// exist in the plant; commands above a channel's rating are clamped.
pub fn apply_frame(frame: &RenderFrame, plant: &mut DisplayPlant) -> Result<()> {
    for loc in &frame.locations {
        for ring in 0..loc.pressures.len() {
            if !plant.channels.contains_key(&(loc.id.clone(), ring)) {
                return Err(Error::Configuration(format!("no channel for {} ring {ring}", loc.id)));
            }
        }
    }
    for loc in &frame.locations {
        for (ring, &psi) in loc.pressures.iter().enumerate() {
            if let Some(ch) = plant.channels.get_mut(&(loc.id.clone(), ring)) {
                ch.command(psi);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pneumatics::SETTLE_BAND;

    #[test]
    fn mapping_endpoints() {
        assert_eq!(map_uncertainty(0.0).unwrap(), 1.0);
        assert_eq!(map_uncertainty(1.0).unwrap(), 3.0);
        assert_eq!(map_uncertainty(0.5).unwrap(), 2.0);
        assert_eq!(map_uncertainty(1.7).unwrap(), 3.0);
        assert_eq!(map_uncertainty(-0.2).unwrap(), 1.0);
        assert!(map_uncertainty(f64::NAN).is_err());
    }

    #[test]
    fn geometry() {
        let g = DisplayGeometry::new(4.0, 30.0, 3).unwrap();
        g.validate().unwrap();
        assert!((g.circumference - 8.0 * PI).abs() < 1e-12);
        assert_eq!(g.cells_around(), 9);
        assert_eq!(g.cells_along(), 11);
        assert!(DisplayGeometry::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn render_global_zero() {
        let frame = render(&Layout::default_global(), &[0.0, 0.0, 0.0], 0.0).unwrap();
        assert_eq!(frame.locations.len(), 3);
        for loc in &frame.locations {
            assert_eq!(loc.pressures, vec![1.0, 1.0, 1.0]);
        }
    }

    #[test]
    fn render_local_unit_vector() {
        let frame = render(&Layout::default_local(), &[1.0, 0.0, 0.0], 0.0).unwrap();
        assert_eq!(frame.location("base").unwrap().pressures, vec![3.0]);
        assert_eq!(frame.location("middle").unwrap().pressures, vec![1.0]);
        assert_eq!(frame.location("end_effector").unwrap().pressures, vec![1.0]);
    }

    #[test]
    fn render_global_triplet_pattern() {
        let frame = render(&Layout::default_global(), &[0.5, 0.875, 0.5], 0.0).unwrap();
        for loc in &frame.locations {
            assert_eq!(loc.pressures, vec![2.0, 2.75, 2.0]);
        }
    }

    #[test]
    fn render_dimension_mismatch() {
        assert!(render(&Layout::default_global(), &[0.1, 0.2], 0.0).is_err());
        assert!(render(&Layout::default_local(), &[0.1; 4], 0.0).is_err());
    }

    #[test]
    fn local_rings_share_pressure() {
        let layout = Layout::local(&ArmLocation::ALL, 3).unwrap();
        let frame = render(&layout, &[0.25, 0.5, 1.0], 0.0).unwrap();
        assert_eq!(frame.location("middle").unwrap().pressures, vec![2.0; 3]);
    }

    #[test]
    fn invalid_layouts_are_rejected() {
        let mut layout = Layout::default_global();
        layout.locations[1].rings = vec![0, 2, 1];
        assert!(layout.validate().is_err());
        let mut layout = Layout::default_local();
        layout.locations[0].rings = vec![1];
        assert!(layout.validate().is_err());
    }

    #[test]
    fn frame_json_schema() {
        let frame = render(&Layout::single_sleeve(ArmLocation::EndEffector), &[0.5], 0.25).unwrap();
        let json = serde_json::to_string(&frame).unwrap();
        assert_eq!(json, r#"{"t":0.25,"locations":[{"id":"end_effector","pressures":[2.0]}]}"#);
    }

    #[test]
    fn apply_frame_sets_commands() {
        let layout = Layout::default_global();
        let mut plant = DisplayPlant::for_layout(&layout, 1.0);
        assert_eq!(plant.len(), 9);
        let frame = render(&layout, &[0.0; 3], 0.0).unwrap();
        apply_frame(&frame, &mut plant).unwrap();
        for loc in ArmLocation::ALL {
            for ring in 0..3 {
                assert_eq!(plant.channel(loc.id(), ring).unwrap().state.commanded, 1.0);
            }
        }
    }

    #[test]
    fn apply_frame_clamps_to_rating() {
        let layout = Layout::single_sleeve(ArmLocation::Base);
        let mut plant = DisplayPlant::for_layout(&layout, 1.0);
        let frame = RenderFrame { t: 0.0, locations: vec![LocationFrame { id: "base".into(), pressures: vec![9.0] }] };
        apply_frame(&frame, &mut plant).unwrap();
        assert_eq!(plant.channel("base", 0).unwrap().state.commanded, 3.5);
    }

    #[test]
    fn apply_frame_missing_channel() {
        let mut plant = DisplayPlant::for_layout(&Layout::single_sleeve(ArmLocation::Base), 1.0);
        let frame = render(&Layout::default_local(), &[0.0; 3], 0.0).unwrap();
        let err = apply_frame(&frame, &mut plant).unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
        // Nothing is commanded when the frame is rejected.
        assert_eq!(plant.channel("base", 0).unwrap().state.commanded, 1.0);
    }

    #[test]
    fn alternating_frames_tracked_each_cycle() {
        // One frame per second, alternating 1 and 3 psi. Oracle: a first-order
        // channel from rest enters the 95% band after ln(20)·tau.
        let layout = Layout::single_sleeve(ArmLocation::Middle);
        let mut plant = DisplayPlant::for_layout(&layout, 1.0);
        let config = PlantConfig::default();
        let spec = ChannelSpec::sleeve();
        assert!(spec.tau_up * 20f64.ln() < 1.0 && spec.tau_down * 20f64.ln() < 1.0);
        for cycle in 0..4 {
            let u = if cycle % 2 == 0 { 1.0 } else { 0.0 };
            let frame = render(&layout, &[u], plant.time).unwrap();
            apply_frame(&frame, &mut plant).unwrap();
            plant.advance(1.0, &config);
            let target = map_uncertainty(u).unwrap();
            let p = plant.channel("middle", 0).unwrap().pressure();
            assert!((p - target).abs() <= SETTLE_BAND * 2.0 + 1e-9, "cycle {cycle}: {p} vs {target}");
        }
    }

    #[test]
    fn snapshot_groups_by_location() {
        let layout = Layout::default_global();
        let plant = DisplayPlant::for_layout(&layout, 1.5);
        let snap = plant.snapshot();
        assert_eq!(snap.locations.len(), 3);
        assert!(snap.locations.iter().all(|l| l.pressures == vec![1.5; 3]));
    }
}
