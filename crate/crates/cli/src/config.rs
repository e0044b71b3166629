use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use datri_core::BatteryConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// r, total, relative_defect (against 8π)
    SphereTotal,
    /// r, total_plus, total_minus, relative_defect (plus side against 4π)
    HemisphereTotal,
    /// r, total, absolute, area
    TubeTotal,
    /// r, theta_plus, theta_minus, odd_part
    ThetaProfile,
    /// t, knu, fitted
    KnuProfile,
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.to_possible_value().expect("no skipped variants");
        f.write_str(s.get_name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    /// Unit-speed geodesic from the selected base point.
    Geodesic,
    /// Open circle arc about base point 0.
    Arc,
    /// Closed circle about base point 0.
    Loop,
}

/// Every knob of a run. Flags override values read from `--config`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: Option<String>,
    pub params: BTreeMap<String, f64>,
    /// Sweep grid; radii, or arc length for `knu-profile`. Empty selects the
    /// kind's default grid.
    pub radii: Vec<f64>,
    pub out: PathBuf,
    pub kind: SweepKind,
    pub curve: CurveKind,
    pub base: usize,
    pub k_max: i32,
    pub battery: BatteryConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: None,
            params: BTreeMap::new(),
            radii: Vec::new(),
            out: PathBuf::from("datri-out"),
            kind: SweepKind::SphereTotal,
            curve: CurveKind::Geodesic,
            base: 0,
            k_max: 10,
            battery: BatteryConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }
}

/// Parses `key=value`.
pub fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("parameter '{}' needs a numeric value, got '{v}'", k.trim()))?;
    Ok((k.trim().to_string(), v))
}
