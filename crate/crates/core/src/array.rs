//! N×M ring-addressed memory array: laser budget, total write energy and the
//! wavelength plan.
//!
//! The read path of the worst-case cell passes (N·M − 1) + (M − 1) rings,
//! two drop ports and one amorphous cell, so in the dB domain
//!
//! ```text
//! P_lsr = S_PD + [(N·M − 1) + (M − 1)]·L_p + 2·L_d + L_amorphous
//! ```
//!
//! with S_PD in dBm and every loss in dB.

use serde::{Deserialize, Serialize};

use crate::cell::{CellDesign, CellModel};
use crate::error::{Error, Result};
use crate::materials::MaterialDb;

fn d_loss() -> f64 {
    0.1
}
fn d_spd() -> f64 {
    -11.7
}
fn d_spacing() -> f64 {
    850.0
}
fn d_ng() -> f64 {
    4.2
}
fn d_radius() -> f64 {
    5.0
}
fn d_ceiling() -> f64 {
    33.0
}
fn d_disturb() -> f64 {
    20.0
}
fn d_center() -> f64 {
    1550.0
}
fn d_size() -> u32 {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    /// Columns (cells per row, one wavelength each).
    #[serde(default = "d_size")]
    pub m: u32,
    /// Rows.
    #[serde(default = "d_size")]
    pub n: u32,
    /// Ring pass loss, dB.
    #[serde(default = "d_loss")]
    pub pass_loss_db: f64,
    /// Ring drop loss, dB.
    #[serde(default = "d_loss")]
    pub drop_loss_db: f64,
    /// Photodetector sensitivity, dBm.
    #[serde(default = "d_spd")]
    pub pd_sensitivity_dbm: f64,
    #[serde(default = "d_spacing")]
    pub channel_spacing_pm: f64,
    #[serde(default = "d_ng")]
    pub ring_group_index: f64,
    #[serde(default = "d_radius")]
    pub ring_radius_um: f64,
    /// First channel wavelength, nm.
    #[serde(default = "d_center")]
    pub center_wavelength_nm: f64,
    /// Amorphous-state loss of one cell over its length, dB.
    #[serde(default)]
    pub cell_loss_db: f64,
    /// Laser output above which the budget is reported infeasible, dBm.
    #[serde(default = "d_ceiling")]
    pub laser_ceiling_dbm: f64,
    /// Read power above which the readout may disturb stored states, dBm.
    #[serde(default = "d_disturb")]
    pub read_disturb_dbm: f64,
    /// Bits stored per cell; carried for reporting only.
    #[serde(default)]
    pub bits_per_cell: u32,
}

impl Default for ArraySpec {
    fn default() -> Self {
        ArraySpec::new(d_size(), d_size())
    }
}

impl ArraySpec {
    pub fn new(m: u32, n: u32) -> Self {
        ArraySpec {
            m,
            n,
            pass_loss_db: d_loss(),
            drop_loss_db: d_loss(),
            pd_sensitivity_dbm: d_spd(),
            channel_spacing_pm: d_spacing(),
            ring_group_index: d_ng(),
            ring_radius_um: d_radius(),
            center_wavelength_nm: d_center(),
            cell_loss_db: 0.0,
            laser_ceiling_dbm: d_ceiling(),
            read_disturb_dbm: d_disturb(),
            bits_per_cell: 0,
        }
    }

    pub fn with_size(mut self, m: u32, n: u32) -> Self {
        self.m = m;
        self.n = n;
        self
    }

    pub fn with_cell_loss(mut self, loss_db: f64) -> Self {
        self.cell_loss_db = loss_db;
        self
    }

    /// Fills cell loss and bit capacity from a cell design.
    pub fn with_cell(mut self, db: &MaterialDb, cell: &CellDesign) -> Result<Self> {
        let model = CellModel::new(db, cell.clone())?;
        self.cell_loss_db = model.insertion_loss_db_per_um()? * cell.length_um;
        self.bits_per_cell = model.bit_capacity()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 || self.n < 1 {
            return Err(Error::config(
                "array.m/array.n",
                "array needs at least one row and one column",
            ));
        }
        for (key, v) in [
            ("pass_loss_db", self.pass_loss_db),
            ("drop_loss_db", self.drop_loss_db),
            ("cell_loss_db", self.cell_loss_db),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be >= 0, got {v}")));
            }
        }
        for (key, v) in [
            ("channel_spacing_pm", self.channel_spacing_pm),
            ("ring_group_index", self.ring_group_index),
            ("ring_radius_um", self.ring_radius_um),
            ("center_wavelength_nm", self.center_wavelength_nm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be > 0, got {v}")));
            }
        }
        if !self.pd_sensitivity_dbm.is_finite() {
            return Err(Error::config("pd_sensitivity_dbm", "must be finite"));
        }
        Ok(())
    }

    fn cells(&self) -> f64 {
        self.m as f64 * self.n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetResult {
    pub p_lsr_dbm: f64,
    /// Loss terms in dB; they sum to `p_lsr_dbm - S_PD`.
    pub breakdown: Vec<(String, f64)>,
    pub feasible: bool,
    pub warnings: Vec<String>,
}

pub fn laser_power_dbm(spec: &ArraySpec) -> Result<BudgetResult> {
    spec.validate()?;
    let (m, n) = (spec.m as f64, spec.n as f64);
    let passes = (n * m - 1.0) + (m - 1.0);
    let breakdown = vec![
        ("ring_pass".to_string(), passes * spec.pass_loss_db),
        ("ring_drop".to_string(), 2.0 * spec.drop_loss_db),
        ("cell_amorphous".to_string(), spec.cell_loss_db),
    ];
    let p_lsr_dbm = spec.pd_sensitivity_dbm + breakdown.iter().map(|(_, v)| v).sum::<f64>();
    let mut warnings = Vec::new();
    if p_lsr_dbm > spec.read_disturb_dbm {
        warnings.push(format!(
            "read power {p_lsr_dbm:.2} dBm exceeds the {:.1} dBm read-disturb ceiling",
            spec.read_disturb_dbm
        ));
    }
    Ok(BudgetResult {
        p_lsr_dbm,
        breakdown,
        feasible: p_lsr_dbm <= spec.laser_ceiling_dbm,
        warnings,
    })
}

/// Worst-case energy to write every cell to its top level, µJ.
pub fn max_set_energy(spec: &ArraySpec, per_cell_energy_nj: f64) -> Result<f64> {
    spec.validate()?;
    if !(per_cell_energy_nj >= 0.0 && per_cell_energy_nj.is_finite()) {
        return Err(Error::Domain(format!(
            "per-cell energy must be >= 0 nJ, got {per_cell_energy_nj}"
        )));
    }
    Ok(spec.cells() * per_cell_energy_nj * 1e-3)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WavelengthPlan {
    pub channels_nm: Vec<f64>,
    pub fsr_nm: f64,
    pub feasible: bool,
}

/// Free spectral range of the rings, nm.
pub fn free_spectral_range_nm(spec: &ArraySpec, wavelength_nm: f64) -> f64 {
    wavelength_nm * wavelength_nm / (spec.ring_group_index * 2.0 * std::f64::consts::PI * spec.ring_radius_um * 1e3)
}

pub fn wavelength_plan(spec: &ArraySpec, center_nm: f64) -> Result<WavelengthPlan> {
    spec.validate()?;
    let spacing = spec.channel_spacing_pm * 1e-3;
    let fsr_nm = free_spectral_range_nm(spec, center_nm);
    Ok(WavelengthPlan {
        channels_nm: (0..spec.m).map(|c| center_nm + c as f64 * spacing).collect(),
        fsr_nm,
        // One channel never collides with its own next resonance.
        feasible: spec.m == 1 || spec.m as f64 * spacing < fsr_nm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellAddress {
    /// Select port index, 1-based (S_1 … S_N).
    pub port: u32,
    pub wavelength_nm: f64,
}

/// Port and wavelength that read cell (row, col), both 1-based.
pub fn address(row: u32, col: u32, spec: &ArraySpec) -> Result<CellAddress> {
    spec.validate()?;
    if !(1..=spec.n).contains(&row) || !(1..=spec.m).contains(&col) {
        return Err(Error::Domain(format!(
            "cell ({row}, {col}) is outside a {} × {} array",
            spec.n, spec.m
        )));
    }
    Ok(CellAddress {
        port: row,
        wavelength_nm: spec.center_wavelength_nm + (col - 1) as f64 * spec.channel_spacing_pm * 1e-3,
    })
}

/// One row of an array-size sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrayRow {
    pub m: u32,
    pub n: u32,
    pub capacity_bits: u64,
    pub p_lsr_dbm: f64,
    pub total_set_energy_uj: f64,
    pub fsr_feasible: bool,
}

pub fn size_sweep(base: &ArraySpec, sizes: &[(u32, u32)], per_cell_energy_nj: f64) -> Result<Vec<ArrayRow>> {
    sizes
        .iter()
        .map(|&(m, n)| {
            let spec = base.clone().with_size(m, n);
            Ok(ArrayRow {
                m,
                n,
                capacity_bits: m as u64 * n as u64 * spec.bits_per_cell as u64,
                p_lsr_dbm: laser_power_dbm(&spec)?.p_lsr_dbm,
                total_set_energy_uj: max_set_energy(&spec, per_cell_energy_nj)?,
                fsr_feasible: wavelength_plan(&spec, spec.center_wavelength_nm)?.feasible,
            })
        })
        .collect()
}

pub const ARRAY_CSV_HEADER: &str = "M,N,capacity_bits,P_lsr_dBm,total_set_energy_uJ,fsr_feasible";

pub fn array_csv(rows: &[ArrayRow]) -> String {
    let mut out = format!("{ARRAY_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{}\n",
            r.m, r.n, r.capacity_bits, r.p_lsr_dbm, r.total_set_energy_uj, r.fsr_feasible
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_budget() {
        let b = laser_power_dbm(&ArraySpec::new(1, 1)).unwrap();
        assert!((b.p_lsr_dbm - (-11.5)).abs() < 1e-12);
        assert!(b.warnings.is_empty());
    }

    #[test]
    fn breakdown_sums_to_budget() {
        let spec = ArraySpec::new(7, 3).with_cell_loss(0.42);
        let b = laser_power_dbm(&spec).unwrap();
        let sum: f64 = b.breakdown.iter().map(|(_, v)| v).sum();
        assert!((b.p_lsr_dbm - spec.pd_sensitivity_dbm - sum).abs() < 1e-12);
    }

    #[test]
    fn large_array_warns_about_read_disturb() {
        let b = laser_power_dbm(&ArraySpec::new(20, 20)).unwrap();
        assert_eq!(b.warnings.len(), 1);
    }

    #[test]
    fn address_rejects_out_of_range() {
        let spec = ArraySpec::new(4, 3);
        assert!(address(0, 1, &spec).is_err());
        assert!(address(4, 1, &spec).is_err());
        assert!(address(3, 5, &spec).is_err());
        let a = address(3, 4, &spec).unwrap();
        assert_eq!(a.port, 3);
        assert!((a.wavelength_nm - (1550.0 + 3.0 * 0.85)).abs() < 1e-9);
    }

    #[test]
    fn empty_array_is_rejected() {
        assert!(laser_power_dbm(&ArraySpec::new(0, 3)).unwrap_err().is_config());
    }
}
