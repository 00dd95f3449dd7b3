//! Run configuration: one TOML file shared by every subcommand.
//!
//! ```toml
//! materials = "materials.json"   # optional
//! output_dir = "phxmem-out"
//!
//! [geometry]
//! wg_width_nm = 470.0
//! pcm_thickness_nm = 20.0
//!
//! [cell]
//! material = "GST"
//!
//! [array]
//! m = 20
//! n = 20
//! ```
//!
//! Every section and key is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use phxmem_core::array::ArraySpec;
use phxmem_core::cell::CellDesign;
use phxmem_core::dse::SweepSpec;
use phxmem_core::modesolver::CrossSection;
use phxmem_core::thermal::{HeaterSpec, ThermalStack};
use phxmem_core::{Error, Result};

/// Environment fallback for the material database path.
pub const MATERIALS_ENV: &str = "PHXMEM_MATERIALS";

fn d_output() -> PathBuf {
    PathBuf::from("phxmem-out")
}
fn d_material() -> String {
    "GST".into()
}
fn d_length() -> f64 {
    2.0
}
fn d_margin() -> f64 {
    0.015
}
fn d_wavelength() -> f64 {
    1550.0
}
fn d_thermal_pitch() -> f64 {
    20.0
}
fn d_dt() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSection {
    #[serde(default = "d_material")]
    pub material: String,
    #[serde(default = "d_length")]
    pub length_um: f64,
    #[serde(default = "d_margin")]
    pub margin: f64,
    #[serde(default = "d_wavelength")]
    pub wavelength_nm: f64,
}

impl Default for CellSection {
    fn default() -> Self {
        CellSection {
            material: d_material(),
            length_um: d_length(),
            margin: d_margin(),
            wavelength_nm: d_wavelength(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackSection {
    /// Thermal grid pitch, nm.
    #[serde(default = "d_thermal_pitch")]
    pub pitch_nm: f64,
    #[serde(default = "d_dt")]
    pub dt_ns: f64,
    #[serde(default)]
    pub heater: HeaterSpec,
}

impl Default for StackSection {
    fn default() -> Self {
        StackSection {
            pitch_nm: d_thermal_pitch(),
            dt_ns: d_dt(),
            heater: HeaterSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Material database; relative paths resolve against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub materials: Option<PathBuf>,
    #[serde(default = "d_output")]
    pub output_dir: PathBuf,
    /// Sweep worker threads; 0 picks one per core.
    #[serde(default)]
    pub workers: usize,
    /// Seed for randomized helpers; no model depends on it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub geometry: CrossSection,
    #[serde(default)]
    pub cell: CellSection,
    #[serde(default)]
    pub stack: StackSection,
    #[serde(default)]
    pub array: ArraySpec,
    #[serde(default)]
    pub sweep: SweepSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config takes every default")
    }
}

impl RunConfig {
    pub fn cell_design(&self) -> CellDesign {
        CellDesign {
            material: self.cell.material.clone(),
            cross_section: self.geometry.clone(),
            length_um: self.cell.length_um,
            margin: self.cell.margin,
            wavelength_nm: self.cell.wavelength_nm,
        }
    }

    pub fn thermal_stack(&self) -> ThermalStack {
        let mut stack = ThermalStack::new(&self.cell.material, self.geometry.clone());
        stack.heater = self.stack.heater.clone();
        stack.pitch_nm = self.stack.pitch_nm;
        stack.dt_ns = self.stack.dt_ns;
        stack
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate().map_err(|e| e.context("geometry"))?;
        self.cell_design().validate().map_err(|e| e.context("cell"))?;
        self.thermal_stack().validate().map_err(|e| e.context("stack"))?;
        self.array.validate().map_err(|e| e.context("array"))?;
        self.sweep.validate().map_err(|e| e.context("sweep"))?;
        if let Some(path) = &self.materials {
            if !path.is_file() {
                return Err(Error::config(
                    "materials",
                    format!("file `{}` does not exist", path.display()),
                ));
            }
        }
        Ok(())
    }

    /// Effective configuration as TOML; parsing it back gives an equal value.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Parses config text. `base` anchors a relative materials path.
pub fn parse_config_str(text: &str, base: Option<&Path>) -> Result<RunConfig> {
    let mut config: RunConfig = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    if let (Some(base), Some(path)) = (base, config.materials.as_mut()) {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read `{}`: {e}", path.display())))?;
    parse_config_str(&text, path.parent())
}

/// Config file when given, defaults otherwise.
pub fn load_or_default(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => parse_config(p),
        None => Ok(RunConfig::default()),
    }
}

fn toml_error(text: &str, err: &toml::de::Error) -> Error {
    let message = err.message().trim().to_string();
    let Some(span) = err.span() else {
        return Error::config("<document>", message);
    };
    let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
    let key = key_at(text, line).unwrap_or_else(|| "<document>".into());
    Error::Config {
        key,
        message,
        line: Some(line),
    }
}

/// Dotted key path of the assignment or table header on `line`.
fn key_at(text: &str, line: usize) -> Option<String> {
    let lines: Vec<&str> = text.lines().collect();
    let here = lines.get(line - 1)?.trim();
    if here.starts_with('[') {
        return Some(here.trim_matches(|c| c == '[' || c == ']').trim().to_string());
    }
    let name = here.split('=').next()?.trim().trim_matches('"');
    let table = lines[..line - 1]
        .iter()
        .rev()
        .map(|l| l.trim())
        .find(|l| l.starts_with('['))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string());
    Some(match table {
        Some(t) if !name.is_empty() => format!("{t}.{name}"),
        Some(t) => t,
        None => name.to_string(),
    })
}

/// Origin notes for defaults that reproduce the reference device.
const ORIGINS: &[(&str, &str)] = &[
    ("cell.margin", "reference design: 0.96 contrast over 64 levels"),
    ("cell.length_um", "reference design: 2 um cell"),
    ("cell.wavelength_nm", "reference design: C-band readout at 1550 nm"),
    ("geometry.wg_width_nm", "reference design: selected GST cell width"),
    (
        "geometry.pcm_thickness_nm",
        "reference design: selected GST cell thickness",
    ),
    ("array.pass_loss_db", "reference array: average ring pass loss"),
    ("array.drop_loss_db", "reference array: average ring drop loss"),
    ("array.pd_sensitivity_dbm", "reference array: photodetector sensitivity"),
    ("array.channel_spacing_pm", "reference array: channel spacing"),
    ("array.m", "reference array: 20 x 20"),
    ("array.n", "reference array: 20 x 20"),
    ("sweep.thickness_nm", "reference sweep axis: 10-50 nm"),
    ("sweep.width_nm", "reference sweep axis: 400-600 nm"),
    ("sweep.lengths_um", "reference design: 2 um cell"),
    ("sweep.margin", "reference design: 0.96 contrast over 64 levels"),
    ("sweep.set_power_mw", "reference set pulse power"),
    ("stack.heater.width_um", "reference heater: 2 um wide"),
    ("stack.heater.length_um", "reference heater: 2 um long"),
    (
        "stack.heater.sheet_resistance_ohm_sq",
        "reference heater sheet resistance",
    ),
];

/// Effective configuration, one `key = value` per line, with origin notes
/// on values taken from the reference device.
pub fn explain(config: &RunConfig) -> String {
    let value = toml::Value::try_from(config).expect("config serializes");
    let mut rows = Vec::new();
    flatten("", &value, &mut rows);
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (key, v) in rows {
        let note = ORIGINS
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, n)| format!("  # {n}"))
            .unwrap_or_default();
        out.push_str(&format!("{key:<width$} = {v}{note}\n"));
    }
    out
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<(String, String)>) {
    match value {
        toml::Value::Table(t) if !t.is_empty() && !is_range(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn is_range(t: &toml::map::Map<String, toml::Value>) -> bool {
    t.len() == 3 && t.contains_key("start") && t.contains_key("stop") && t.contains_key("step")
}
