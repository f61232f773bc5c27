//! Machine profiles loaded from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("cannot read profile {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid profile: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid profile: {0}")]
    Invalid(String),
}

/// How a color is commanded on the machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Syntax {
    /// Mixing hotend, `M165` ratios.
    Mix,
    /// Tool changer, `T<n>`.
    Multitool,
    /// Single foaming material, `M104` temperature plus `M221` flow.
    Temperature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowMaterial {
    Pla,
    Tpu,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineProfile {
    pub syntax: Syntax,
    /// Melt chamber dead volume, mm³.
    pub melt_volume: f64,
    /// Explicit look-ahead in mm of extruded path; derived from `melt_volume` when absent.
    pub lookahead: Option<f64>,
    pub filament_diameter: f64,
    /// Bed extent in mm; the origin is the bed's front-left corner.
    pub bed_size: (f64, f64),
    pub temperature_range: (f64, f64),
    pub bed_temperature: f64,
    pub flow_compensation: FlowMaterial,
    pub tool_count: usize,
    /// Number of mixing inputs for `M165`.
    pub extruder_count: usize,
    /// mm/min.
    pub print_speed: f64,
    /// mm/min.
    pub travel_speed: f64,
    /// Centres of purge towers in bed coordinates; laid out automatically when empty.
    pub purge_locations: Vec<(f64, f64)>,
    pub start_gcode: String,
    pub end_gcode: String,
    /// g/mm³, for purge mass reporting.
    pub filament_density: f64,
    /// Seconds, first-order lag used when previewing temperature machines.
    pub thermal_time_constant: f64,
    pub extrusion_multiplier: f64,
}

const START: &str = "; gradslice\nG21\nG90\nM82\nM104 S{first_temperature}\nM140 S{bed_temperature}\nG28\nG92 E0\n";
const END: &str = "M104 S0\nM140 S0\nG28 X0\nM84\n";

impl Default for MachineProfile {
    fn default() -> Self {
        Self {
            syntax: Syntax::Mix,
            melt_volume: 68.56,
            lookahead: None,
            filament_diameter: 1.75,
            bed_size: (300.0, 300.0),
            temperature_range: (190.0, 225.0),
            bed_temperature: 60.0,
            flow_compensation: FlowMaterial::None,
            tool_count: 1,
            extruder_count: 2,
            print_speed: 1800.0,
            travel_speed: 6000.0,
            purge_locations: Vec::new(),
            start_gcode: START.to_string(),
            end_gcode: END.to_string(),
            filament_density: 1.24e-3,
            thermal_time_constant: 8.0,
            extrusion_multiplier: 1.0,
        }
    }
}

impl MachineProfile {
    pub fn mixing() -> Self {
        Self::default()
    }

    pub fn multitool() -> Self {
        Self { syntax: Syntax::Multitool, tool_count: 5, ..Self::default() }
    }

    pub fn temperature() -> Self {
        Self { syntax: Syntax::Temperature, flow_compensation: FlowMaterial::Pla, ..Self::default() }
    }

    pub fn from_toml(text: &str) -> Result<Self, ProfileError> {
        let p: Self = toml::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, ProfileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let bad = |m: &str| Err(ProfileError::Invalid(m.to_string()));
        if !(self.melt_volume >= 0.0) {
            return bad("melt_volume must be >= 0");
        }
        if !(self.filament_diameter > 0.0) {
            return bad("filament_diameter must be > 0");
        }
        if !(self.bed_size.0 > 0.0 && self.bed_size.1 > 0.0) {
            return bad("bed_size must be positive");
        }
        if self.temperature_range.0 > self.temperature_range.1 {
            return bad("temperature_range must be ascending");
        }
        if self.lookahead.is_some_and(|l| !(l >= 0.0)) {
            return bad("lookahead must be >= 0");
        }
        if self.tool_count == 0 || self.extruder_count == 0 {
            return bad("tool_count and extruder_count must be >= 1");
        }
        if !(self.print_speed > 0.0 && self.travel_speed > 0.0) {
            return bad("speeds must be > 0");
        }
        Ok(())
    }

    /// Cross-section of the filament, mm².
    pub fn filament_area(&self) -> f64 {
        let r = self.filament_diameter / 2.0;
        std::f64::consts::PI * r * r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_partial_profile() {
        let p = MachineProfile::from_toml(
            "syntax = \"temperature\"\nmelt_volume = 68.56\ntemperature_range = [190, 225]\nflow_compensation = \"pla\"\n",
        )
        .unwrap();
        assert_eq!(p.syntax, Syntax::Temperature);
        assert_eq!(p.melt_volume, 68.56);
        assert_eq!(p.filament_diameter, 1.75);
        assert_eq!(p.flow_compensation, FlowMaterial::Pla);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(MachineProfile::from_toml("melt_volume = -1").is_err());
        assert!(MachineProfile::from_toml("filament_diameter = 0").is_err());
        assert!(MachineProfile::from_toml("nozzle = 3").is_err());
    }
}
