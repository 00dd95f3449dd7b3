//! Transient heat conduction in the cell cross-section.
//!
//! Finite volumes on a square grid: one unknown per pixel (the rise above
//! ambient), harmonic-mean face conductances, outer faces held at ambient,
//! backward Euler in time. The heater deposits its power uniformly over the
//! heater pixels, divided by the heater length along the waveguide.
//!
//! Because the coefficients do not depend on temperature, the discrete
//! problem is linear and time-invariant. Pulse searches therefore run one
//! unit-power step response and build every (power, duration) pulse from it
//! by superposition; `simulate_pulse` steps the field directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Csr, RealCholesky, SparseBuilder};
use crate::materials::{MaterialDb, MaterialRecord, Phase};
use crate::modesolver::{CrossSection, Grid};

/// Ambient and boundary temperature, K.
pub const AMBIENT_K: f64 = 300.0;

/// Duration resolution of the set-pulse search, ns.
pub const DURATION_RESOLUTION_NS: f64 = 10.0;

fn d_heater_width() -> f64 {
    2.0
}
fn d_heater_length() -> f64 {
    2.0
}
fn d_heater_thickness() -> f64 {
    110.0
}
fn d_resistivity() -> f64 {
    60.0
}
fn d_sheet() -> f64 {
    5.5
}
fn d_melt() -> f64 {
    1941.0
}
fn d_standoff() -> f64 {
    600.0
}
fn d_heater_material() -> String {
    "TiN".into()
}
fn d_pitch() -> f64 {
    20.0
}
fn d_dt() -> f64 {
    5.0
}

/// Ti/TiN microheater above the cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeaterSpec {
    #[serde(default = "d_heater_width")]
    pub width_um: f64,
    /// Extent along the waveguide; sets the per-length source.
    #[serde(default = "d_heater_length")]
    pub length_um: f64,
    #[serde(default = "d_heater_thickness")]
    pub thickness_nm: f64,
    /// µΩ·cm
    #[serde(default = "d_resistivity")]
    pub resistivity_uohm_cm: f64,
    /// Ω/sq
    #[serde(default = "d_sheet")]
    pub sheet_resistance_ohm_sq: f64,
    /// K
    #[serde(default = "d_melt")]
    pub melt_limit_k: f64,
    /// Oxide between the top of the PCM film and the heater, nm.
    #[serde(default = "d_standoff")]
    pub standoff_nm: f64,
    #[serde(default = "d_heater_material")]
    pub material: String,
}

impl Default for HeaterSpec {
    fn default() -> Self {
        HeaterSpec {
            width_um: d_heater_width(),
            length_um: d_heater_length(),
            thickness_nm: d_heater_thickness(),
            resistivity_uohm_cm: d_resistivity(),
            sheet_resistance_ohm_sq: d_sheet(),
            melt_limit_k: d_melt(),
            standoff_nm: d_standoff(),
            material: d_heater_material(),
        }
    }
}

impl HeaterSpec {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("heater.width_um", self.width_um),
            ("heater.length_um", self.length_um),
            ("heater.thickness_nm", self.thickness_nm),
            ("heater.resistivity_uohm_cm", self.resistivity_uohm_cm),
            ("heater.sheet_resistance_ohm_sq", self.sheet_resistance_ohm_sq),
            ("heater.standoff_nm", self.standoff_nm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be > 0, got {v}")));
            }
        }
        if !(self.melt_limit_k > AMBIENT_K) {
            return Err(Error::config("heater.melt_limit_k", "must exceed the 300 K ambient"));
        }
        Ok(())
    }

    /// Terminal resistance from the sheet resistance, Ω.
    pub fn resistance_ohm(&self) -> f64 {
        self.sheet_resistance_ohm_sq * self.length_um / self.width_um
    }
}

/// Rectangular heater pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeaterPulse {
    pub power_mw: f64,
    pub duration_us: f64,
}

impl HeaterPulse {
    pub fn new(power_mw: f64, duration_us: f64) -> Result<Self> {
        if !(power_mw >= 0.0 && power_mw.is_finite()) {
            return Err(Error::Domain(format!("pulse power must be >= 0 mW, got {power_mw}")));
        }
        if !(duration_us >= 0.0 && duration_us.is_finite()) {
            return Err(Error::Domain(format!(
                "pulse duration must be >= 0 µs, got {duration_us}"
            )));
        }
        Ok(HeaterPulse { power_mw, duration_us })
    }

    /// mW × µs = nJ.
    pub fn energy_nj(&self) -> f64 {
        self.power_mw * self.duration_us
    }

    /// The default reset pulse, 40 mW for 3.5 µs.
    pub fn reset_default() -> Self {
        HeaterPulse {
            power_mw: 40.0,
            duration_us: 3.5,
        }
    }
}

/// Boundary condition on the left and right window edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LateralBoundary {
    #[default]
    Ambient,
    /// No flux; turns a laterally uniform stack into a 1D problem.
    Insulated,
}

/// Cell, heater and material choice for a thermal run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalStack {
    pub cross_section: CrossSection,
    pub pcm_material: String,
    #[serde(default)]
    pub heater: HeaterSpec,
    /// Thermal grid pitch, nm; the window is the optical one.
    #[serde(default = "d_pitch")]
    pub pitch_nm: f64,
    /// Time step for pulse searches, ns.
    #[serde(default = "d_dt")]
    pub dt_ns: f64,
}

impl ThermalStack {
    pub fn new(pcm_material: &str, cross_section: CrossSection) -> Self {
        ThermalStack {
            cross_section,
            pcm_material: pcm_material.into(),
            heater: HeaterSpec::default(),
            pitch_nm: d_pitch(),
            dt_ns: d_dt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cross_section.validate()?;
        self.heater.validate()?;
        if !(self.pitch_nm > 0.0 && self.pitch_nm.is_finite()) {
            return Err(Error::config("pitch_nm", "must be > 0"));
        }
        if !(self.dt_ns > 0.0 && self.dt_ns.is_finite()) {
            return Err(Error::config("dt_ns", "must be > 0"));
        }
        if self.cross_section.pcm_thickness_nm < 0.5 * self.pitch_nm {
            return Err(Error::Geometry(format!(
                "a {} nm film is not resolved by the {} nm thermal grid",
                self.cross_section.pcm_thickness_nm, self.pitch_nm
            )));
        }
        let xs = &self.cross_section;
        let top = xs.stack_top_nm() + self.heater.standoff_nm + self.heater.thickness_nm;
        let window_top = xs.window_height_um * 1e3 - xs.substrate_depth_um * 1e3;
        if top > window_top - self.pitch_nm {
            return Err(Error::Geometry(format!(
                "heater top at {top:.0} nm does not fit below the window top at {window_top:.0} nm"
            )));
        }
        if self.heater.width_um >= xs.window_width_um {
            return Err(Error::Geometry("heater is wider than the simulation window".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ThermalRegion {
    Oxide,
    Core,
    Pcm,
    Heater,
}

/// Discretized stack: per-pixel conductivity, heat capacity and source.
#[derive(Debug, Clone)]
pub struct ThermalGrid {
    pub grid: Grid,
    /// W/(m·K)
    pub conductivity: Vec<f64>,
    /// J/(m³·K)
    pub heat_capacity: Vec<f64>,
    pub region: Vec<ThermalRegion>,
    /// Pixels that carry the heater source.
    pub heated: Vec<bool>,
    /// Heater extent along the waveguide, m.
    pub length_m: f64,
    pub lateral: LateralBoundary,
}

impl ThermalGrid {
    pub fn from_stack(db: &MaterialDb, stack: &ThermalStack) -> Result<Self> {
        stack.validate()?;
        let xs = &stack.cross_section;
        let pcm = db.get(&stack.pcm_material)?;
        if !pcm.is_pcm() {
            return Err(Error::Geometry(format!(
                "`{}` is not a phase-change material",
                pcm.name
            )));
        }
        let oxide = db.get(&xs.cladding_material)?.thermal;
        let substrate = db.get(&xs.substrate_material)?.thermal;
        let core = db.get(&xs.core_material)?.thermal;
        let heater = db.get(&stack.heater.material)?.thermal;
        let grid = Grid::for_window(
            xs.window_width_um,
            xs.window_height_um,
            xs.substrate_depth_um,
            stack.pitch_nm,
        );
        let n = grid.len();
        let mut out = ThermalGrid {
            conductivity: vec![oxide.conductivity(Phase::Amorphous); n],
            heat_capacity: vec![oxide.heat_capacity(); n],
            region: vec![ThermalRegion::Oxide; n],
            heated: vec![false; n],
            length_m: stack.heater.length_um * 1e-6,
            lateral: LateralBoundary::Ambient,
            grid: grid.clone(),
        };
        let mut paint =
            |cols: std::ops::Range<usize>, rows: std::ops::Range<usize>, k: f64, c: f64, r: ThermalRegion| {
                for j in rows {
                    for i in cols.clone() {
                        let idx = j * grid.nx + i;
                        out.conductivity[idx] = k;
                        out.heat_capacity[idx] = c;
                        out.region[idx] = r;
                        out.heated[idx] = r == ThermalRegion::Heater;
                    }
                }
            };
        paint(
            0..grid.nx,
            grid.rows(grid.y_min_nm, 0.0),
            substrate.conductivity(Phase::Amorphous),
            substrate.heat_capacity(),
            ThermalRegion::Oxide,
        );
        paint(
            grid.centered_columns(xs.wg_width_nm),
            grid.rows(0.0, xs.wg_height_nm),
            core.conductivity(Phase::Amorphous),
            core.heat_capacity(),
            ThermalRegion::Core,
        );
        // The film is written from the amorphous state, so it conducts with
        // the amorphous value throughout a pulse.
        paint(
            grid.centered_columns(xs.pcm_width()),
            grid.rows(xs.wg_height_nm, xs.stack_top_nm()),
            pcm.thermal.conductivity(Phase::Amorphous),
            pcm.thermal.heat_capacity(),
            ThermalRegion::Pcm,
        );
        let heater_bottom = xs.stack_top_nm() + stack.heater.standoff_nm;
        paint(
            grid.centered_columns(stack.heater.width_um * 1e3),
            grid.rows(heater_bottom, heater_bottom + stack.heater.thickness_nm),
            heater.conductivity(Phase::Amorphous),
            heater.heat_capacity(),
            ThermalRegion::Heater,
        );
        out.check()?;
        Ok(out)
    }

    /// Horizontal layers listed bottom to top, `(thickness_nm, k, ρc, heated)`,
    /// each spanning the full window width.
    pub fn layered(
        nx: usize,
        pitch_nm: f64,
        layers: &[(f64, f64, f64, bool)],
        length_m: f64,
        lateral: LateralBoundary,
    ) -> Result<Self> {
        let mut conductivity = Vec::new();
        let mut heat_capacity = Vec::new();
        let mut heated = Vec::new();
        let mut ny = 0;
        for &(t, k, c, h) in layers {
            let rows = (t / pitch_nm).round() as usize;
            if rows == 0 || (rows as f64 * pitch_nm - t).abs() > 1e-9 * t {
                return Err(Error::Geometry(format!(
                    "layer of {t} nm is not a whole number of {pitch_nm} nm rows"
                )));
            }
            for _ in 0..rows * nx {
                conductivity.push(k);
                heat_capacity.push(c);
                heated.push(h);
            }
            ny += rows;
        }
        let grid = Grid {
            nx,
            ny,
            pitch_nm,
            x_min_nm: -0.5 * nx as f64 * pitch_nm,
            y_min_nm: 0.0,
        };
        let region = heated
            .iter()
            .map(|h| {
                if *h {
                    ThermalRegion::Heater
                } else {
                    ThermalRegion::Oxide
                }
            })
            .collect();
        let out = ThermalGrid {
            grid,
            conductivity,
            heat_capacity,
            region,
            heated,
            length_m,
            lateral,
        };
        out.check()?;
        Ok(out)
    }

    fn check(&self) -> Result<()> {
        if self.grid.nx < 2 || self.grid.ny < 2 {
            return Err(Error::Geometry("thermal grid needs at least 2 × 2 pixels".into()));
        }
        if !self.heated.iter().any(|h| *h) {
            return Err(Error::Geometry("heater does not cover any grid pixel".into()));
        }
        if self
            .conductivity
            .iter()
            .chain(&self.heat_capacity)
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(Error::MaterialData(
                "thermal constants must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    pub fn indices_of(&self, region: ThermalRegion) -> Vec<usize> {
        (0..self.grid.len()).filter(|&k| self.region[k] == region).collect()
    }

    fn pitch_m(&self) -> f64 {
        self.grid.pitch_nm * 1e-9
    }

    /// Heat input per pixel (W per metre of depth) for 1 mW into the heater.
    fn unit_source(&self) -> Vec<f64> {
        let count = self.heated.iter().filter(|h| **h).count() as f64;
        let per_pixel = 1e-3 / (count * self.length_m);
        self.heated.iter().map(|h| if *h { per_pixel } else { 0.0 }).collect()
    }

    /// Conductance matrix: `(K ΔT)_k = Σ G (ΔT_k - ΔT_nb)` with boundary
    /// faces tied to ambient.
    fn conductance(&self, extra_diag: &[f64]) -> Csr<f64> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let k = &self.conductivity;
        let mut b = SparseBuilder::<f64>::new(nx * ny, 5 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let idx = j * nx + i;
                let mut diag = extra_diag[idx];
                let neighbours = [
                    (i.checked_sub(1).map(|ii| j * nx + ii), true),
                    ((i + 1 < nx).then(|| j * nx + i + 1), true),
                    (j.checked_sub(1).map(|jj| jj * nx + i), false),
                    ((j + 1 < ny).then(|| (j + 1) * nx + i), false),
                ];
                for (nb, lateral) in neighbours {
                    match nb {
                        Some(m) => {
                            let g = 2.0 * k[idx] * k[m] / (k[idx] + k[m]);
                            b.push(idx, m, -g);
                            diag += g;
                        }
                        // Wall at half a pitch from the pixel centre.
                        None if lateral && self.lateral == LateralBoundary::Insulated => {}
                        None => diag += 2.0 * k[idx],
                    }
                }
                b.push(idx, idx, diag);
            }
        }
        b.to_csr()
    }
}

/// Backward Euler stepper with the system matrix factored once.
struct Stepper {
    chol: RealCholesky,
    cap_over_dt: Vec<f64>,
    unit: Vec<f64>,
}

impl Stepper {
    fn new(grid: &ThermalGrid, dt_s: f64) -> Result<Self> {
        let h2 = grid.pitch_m().powi(2);
        let cap_over_dt: Vec<f64> = grid.heat_capacity.iter().map(|c| c * h2 / dt_s).collect();
        let chol = RealCholesky::new(&grid.conductance(&cap_over_dt))?;
        Ok(Stepper {
            chol,
            cap_over_dt,
            unit: grid.unit_source(),
        })
    }

    /// One step in place; `power_mw` is the mean heater power over the step.
    fn step(&self, rise: &mut [f64], power_mw: f64) {
        for ((r, c), q) in rise.iter_mut().zip(&self.cap_over_dt).zip(&self.unit) {
            *r = *r * c + power_mw * q;
        }
        self.chol.solve_in_place(rise);
    }
}

/// Steady rise for 1 mW, K per pixel.
fn steady_unit_rise(grid: &ThermalGrid) -> Result<Vec<f64>> {
    let zeros = vec![0.0; grid.grid.len()];
    let chol = RealCholesky::new(&grid.conductance(&zeros))?;
    let mut rise = grid.unit_source();
    chol.solve_in_place(&mut rise);
    Ok(rise)
}

/// PCM temperature quantiles at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantileSample {
    pub time_us: f64,
    /// Temperatures (K) at `TRACE_QUANTILES`.
    pub kelvin: [f64; 5],
}

pub const TRACE_QUANTILES: [f64; 5] = [0.0, 0.1, 0.5, 0.9, 1.0];

fn quantiles(values: &mut [f64]) -> [f64; 5] {
    values.sort_by(|a, b| a.total_cmp(b));
    let last = values.len() - 1;
    TRACE_QUANTILES.map(|q| values[(q * last as f64).round() as usize])
}

#[derive(Debug, Clone)]
pub struct ThermalResult {
    pub grid: Grid,
    /// Highest temperature reached at each pixel, K.
    pub peak_field_k: Vec<f64>,
    /// Peak temperature of each PCM pixel, K, in grid order.
    pub pcm_peak_k: Vec<f64>,
    pub trace: Vec<QuantileSample>,
    pub fraction_above_tg: f64,
    pub fraction_above_tl: f64,
    pub heater_peak_k: f64,
    /// False when the heater went past its melt limit.
    pub heater_safe: bool,
}

/// Direct time stepping of one pulse from ambient.
pub fn simulate_pulse(
    db: &MaterialDb,
    stack: &ThermalStack,
    pulse: &HeaterPulse,
    dt_ns: f64,
    t_end_us: f64,
) -> Result<ThermalResult> {
    let grid = ThermalGrid::from_stack(db, stack)?;
    let pcm = db.get(&stack.pcm_material)?;
    simulate_on_grid(&grid, pcm, stack.heater.melt_limit_k, pulse, dt_ns, t_end_us)
}

pub fn simulate_on_grid(
    grid: &ThermalGrid,
    pcm: &MaterialRecord,
    melt_limit_k: f64,
    pulse: &HeaterPulse,
    dt_ns: f64,
    t_end_us: f64,
) -> Result<ThermalResult> {
    if !(dt_ns > 0.0 && dt_ns.is_finite()) {
        return Err(Error::Domain(format!("dt must be > 0 ns, got {dt_ns}")));
    }
    if !(t_end_us >= pulse.duration_us) {
        return Err(Error::Domain(format!(
            "t_end {t_end_us} µs is shorter than the {} µs pulse",
            pulse.duration_us
        )));
    }
    let (t_g, t_l) = transition_temps(pcm)?;
    let dt_us = dt_ns * 1e-3;
    let stepper = Stepper::new(grid, dt_ns * 1e-9)?;
    let steps = (t_end_us / dt_us - 1e-9).ceil().max(0.0) as usize;
    let pcm_idx = grid.indices_of(ThermalRegion::Pcm);
    let heater_idx = grid.indices_of(ThermalRegion::Heater);

    let mut rise = vec![0.0; grid.grid.len()];
    let mut peak = rise.clone();
    let mut scratch = Vec::with_capacity(pcm_idx.len());
    let mut trace = Vec::with_capacity(steps + 1);
    let mut record = |t: f64, rise: &[f64], trace: &mut Vec<QuantileSample>| {
        if pcm_idx.is_empty() {
            return;
        }
        scratch.clear();
        scratch.extend(pcm_idx.iter().map(|&k| AMBIENT_K + rise[k]));
        trace.push(QuantileSample {
            time_us: t,
            kelvin: quantiles(&mut scratch),
        });
    };
    record(0.0, &rise, &mut trace);
    for n in 0..steps {
        let t0 = n as f64 * dt_us;
        let on = ((pulse.duration_us - t0) / dt_us).clamp(0.0, 1.0);
        stepper.step(&mut rise, pulse.power_mw * on);
        if rise.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("temperature field at step {}", n + 1)));
        }
        for (p, r) in peak.iter_mut().zip(&rise) {
            *p = p.max(*r);
        }
        record(t0 + dt_us, &rise, &mut trace);
    }
    let peak_field_k: Vec<f64> = peak.iter().map(|r| AMBIENT_K + r).collect();
    let pcm_peak_k: Vec<f64> = pcm_idx.iter().map(|&k| peak_field_k[k]).collect();
    let heater_peak_k = heater_idx.iter().map(|&k| peak_field_k[k]).fold(AMBIENT_K, f64::max);
    Ok(ThermalResult {
        grid: grid.grid.clone(),
        fraction_above_tg: fraction_at_or_above(&pcm_peak_k, t_g),
        fraction_above_tl: fraction_at_or_above(&pcm_peak_k, t_l),
        peak_field_k,
        pcm_peak_k,
        trace,
        heater_peak_k,
        heater_safe: heater_peak_k < melt_limit_k,
    })
}

fn fraction_at_or_above(values: &[f64], threshold: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|v| **v >= threshold).count() as f64 / values.len() as f64
}

fn transition_temps(pcm: &MaterialRecord) -> Result<(f64, f64)> {
    match (pcm.t_g_k, pcm.t_l_k) {
        (Some(g), Some(l)) => Ok((g, l)),
        _ => Err(Error::Domain(format!("`{}` has no transition temperatures", pcm.name))),
    }
}

/// Per-pixel crystallization state of the PCM film (grid order).
#[derive(Debug, Clone, PartialEq)]
pub struct FractionMap(pub Vec<f64>);

impl FractionMap {
    pub fn uniform(pixels: usize, p: f64) -> Self {
        FractionMap(vec![p; pixels])
    }

    /// Area-weighted mean; all pixels have the same area.
    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

/// Threshold crystallization and melt-quench from the peak temperatures of
/// one thermal run. Returns the new map and its mean fraction.
pub fn phase_update(
    prev: &FractionMap,
    result: &ThermalResult,
    material: &MaterialRecord,
) -> Result<(FractionMap, f64)> {
    let (t_g, t_l) = transition_temps(material)?;
    update_from_peaks(prev, &result.pcm_peak_k, t_g, t_l)
}

pub fn update_from_peaks(prev: &FractionMap, peaks_k: &[f64], t_g: f64, t_l: f64) -> Result<(FractionMap, f64)> {
    if prev.0.len() != peaks_k.len() {
        return Err(Error::Domain(format!(
            "fraction map has {} pixels, temperature field has {}",
            prev.0.len(),
            peaks_k.len()
        )));
    }
    let next = FractionMap(
        prev.0
            .iter()
            .zip(peaks_k)
            .map(|(&p, &t)| {
                if t >= t_l {
                    0.0
                } else if t >= t_g {
                    1.0
                } else {
                    p
                }
            })
            .collect(),
    );
    let mean = next.mean();
    Ok((next, mean))
}

/// Unit-power (1 mW) step response of the PCM and heater pixels, recorded
/// until it settles.
#[derive(Debug, Clone)]
pub struct StepResponse {
    pub dt_ns: f64,
    pcm: Vec<Vec<f64>>,
    heater: Vec<Vec<f64>>,
    steady_pcm: Vec<f64>,
}

/// Settling criterion and cap for the recorded step response.
const SETTLE_TOLERANCE: f64 = 1e-7;
const MAX_RESPONSE_US: f64 = 400.0;

impl StepResponse {
    pub fn compute(grid: &ThermalGrid, dt_ns: f64) -> Result<Self> {
        let stepper = Stepper::new(grid, dt_ns * 1e-9)?;
        let steady = steady_unit_rise(grid)?;
        let pcm_idx = grid.indices_of(ThermalRegion::Pcm);
        let heater_idx = grid.indices_of(ThermalRegion::Heater);
        let watch: Vec<usize> = pcm_idx.iter().chain(&heater_idx).copied().collect();
        let scale = watch.iter().map(|&k| steady[k]).fold(0.0, f64::max);
        let cap = (MAX_RESPONSE_US * 1e3 / dt_ns).ceil() as usize;

        let mut rise = vec![0.0; grid.grid.len()];
        let mut pcm = vec![vec![0.0]; pcm_idx.len()];
        let mut heater = vec![vec![0.0]; heater_idx.len()];
        for n in 0..cap {
            stepper.step(&mut rise, 1.0);
            if rise.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("step response at step {}", n + 1)));
            }
            for (series, &k) in pcm.iter_mut().zip(&pcm_idx) {
                series.push(rise[k]);
            }
            for (series, &k) in heater.iter_mut().zip(&heater_idx) {
                series.push(rise[k]);
            }
            let gap = watch.iter().map(|&k| (steady[k] - rise[k]).abs()).fold(0.0, f64::max);
            if gap <= SETTLE_TOLERANCE * scale {
                break;
            }
        }
        Ok(StepResponse {
            dt_ns,
            pcm,
            heater,
            steady_pcm: pcm_idx.iter().map(|&k| steady[k]).collect(),
        })
    }

    /// Number of recorded steps after t = 0.
    pub fn horizon_steps(&self) -> usize {
        self.pcm.first().or(self.heater.first()).map_or(0, |s| s.len() - 1)
    }

    pub fn pcm_pixels(&self) -> usize {
        self.pcm.len()
    }

    /// Steady rise per mW of each PCM pixel, K.
    pub fn steady_pcm(&self) -> &[f64] {
        &self.steady_pcm
    }

    /// Peak rise of one series under a pulse of `duration_us` at 1 mW.
    ///
    /// The source sequence is `(1-f)` times an m-step pulse plus `f` times
    /// an (m+1)-step pulse, with `m + f = duration / dt`, matching the
    /// partial-step weighting of `simulate_pulse`.
    fn series_peak(series: &[f64], duration_us: f64, dt_ns: f64) -> f64 {
        let h = series.len() - 1;
        let at = |n: usize| series[n.min(h)];
        let steps = duration_us * 1e3 / dt_ns;
        let m = steps.floor() as usize;
        let f = steps - m as f64;
        let value = |n: usize| {
            let a = at(n) - if n >= m { at(n - m) } else { 0.0 };
            let b = at(n) - if n > m { at(n - m - 1) } else { 0.0 };
            (1.0 - f) * a + f * b
        };
        // Past the horizon the response is flat and the pulse value only
        // decays, so the scan can stop at h + 1 or the pulse end.
        let end = (h + 1).max(m + 1);
        (0..=end).map(value).fold(0.0, f64::max)
    }

    /// Peak rise of every PCM pixel, K, for the pulse.
    pub fn pcm_peaks(&self, pulse: &HeaterPulse) -> Vec<f64> {
        self.pcm
            .iter()
            .map(|s| pulse.power_mw * Self::series_peak(s, pulse.duration_us, self.dt_ns))
            .collect()
    }

    pub fn heater_peak(&self, pulse: &HeaterPulse) -> f64 {
        self.heater
            .iter()
            .map(|s| pulse.power_mw * Self::series_peak(s, pulse.duration_us, self.dt_ns))
            .fold(0.0, f64::max)
    }
}

/// Outcome of a set-pulse search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SetPulse {
    pub power_mw: f64,
    pub duration_us: f64,
    pub energy_nj: f64,
    /// Fraction actually reached by the pulse (≥ the target).
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyPoint {
    pub power_mw: f64,
    /// None below threshold; `note` then names the reason.
    pub set: Option<SetPulse>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResetCheck {
    pub ok: bool,
    pub heater_safe: bool,
    pub p_after: f64,
    pub heater_peak_k: f64,
    /// Coolest PCM peak temperature, K.
    pub pcm_min_peak_k: f64,
}

/// A stack ready for repeated pulse queries.
pub struct ThermalModel {
    pub grid: ThermalGrid,
    pub response: StepResponse,
    pub t_g: f64,
    pub t_l: f64,
    pub melt_limit_k: f64,
    pub material: String,
}

impl ThermalModel {
    pub fn new(db: &MaterialDb, stack: &ThermalStack) -> Result<Self> {
        let grid = ThermalGrid::from_stack(db, stack)?;
        let pcm = db.get(&stack.pcm_material)?;
        let (t_g, t_l) = transition_temps(pcm)?;
        let response = StepResponse::compute(&grid, stack.dt_ns)?;
        Ok(ThermalModel {
            grid,
            response,
            t_g,
            t_l,
            melt_limit_k: stack.heater.melt_limit_k,
            material: pcm.name.clone(),
        })
    }

    fn resolution_ns(&self) -> f64 {
        let dt = self.response.dt_ns;
        (DURATION_RESOLUTION_NS / dt).round().max(1.0) * dt
    }

    /// PCM peak temperatures (K) for a pulse.
    pub fn pcm_peaks_k(&self, pulse: &HeaterPulse) -> Vec<f64> {
        self.response
            .pcm_peaks(pulse)
            .into_iter()
            .map(|r| AMBIENT_K + r)
            .collect()
    }

    /// Mean fraction after one pulse from a given map.
    pub fn fraction_after(&self, prev: &FractionMap, pulse: &HeaterPulse) -> Result<f64> {
        Ok(update_from_peaks(prev, &self.pcm_peaks_k(pulse), self.t_g, self.t_l)?.1)
    }

    /// Shortest pulse at `power_mw` that crystallizes at least `target_p` of
    /// an amorphous film, on a 10 ns duration lattice.
    pub fn set_energy(&self, power_mw: f64, target_p: f64) -> Result<SetPulse> {
        if !(power_mw > 0.0 && power_mw.is_finite()) {
            return Err(Error::Domain(format!("set power must be > 0 mW, got {power_mw}")));
        }
        if !(target_p > 0.0 && target_p <= 1.0) {
            return Err(Error::Domain(format!(
                "target fraction must be in (0, 1], got {target_p}"
            )));
        }
        let pixels = self.response.pcm_pixels();
        let needed = (target_p * pixels as f64 - 1e-9).ceil() as usize;
        let steady: Vec<f64> = self
            .response
            .steady_pcm()
            .iter()
            .map(|u| AMBIENT_K + power_mw * u)
            .collect();
        let hot = steady.iter().filter(|t| **t >= self.t_g).count();
        if hot < needed {
            let hottest = steady.iter().cloned().fold(AMBIENT_K, f64::max);
            return Err(Error::Threshold(format!(
                "{} at {power_mw} mW: steady-state film temperature peaks at {hottest:.0} K; \
                 {hot} of {pixels} pixels reach T_g = {:.0} K, {needed} needed",
                self.material, self.t_g
            )));
        }
        let amorphous = FractionMap::uniform(pixels, 0.0);
        let step_ns = self.resolution_ns();
        let pulse = |k: usize| HeaterPulse {
            power_mw,
            duration_us: k as f64 * step_ns / 1e3,
        };
        let above_tg = |k: usize| self.pcm_peaks_k(&pulse(k)).iter().filter(|t| **t >= self.t_g).count();
        // Every pixel's peak grows with duration, so the count above T_g is
        // monotone; beyond the recorded horizon nothing changes.
        let k_max = (self.response.horizon_steps() as f64 * self.response.dt_ns / step_ns).ceil() as usize + 1;
        if above_tg(k_max) < needed {
            return Err(Error::Threshold(format!(
                "{} at {power_mw} mW: the film never reaches T_g = {:.0} K over {} pixels within the simulated horizon",
                self.material, self.t_g, needed
            )));
        }
        let (mut lo, mut hi) = (0usize, k_max);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if above_tg(mid) >= needed {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // Pixels past T_l are quenched; look further out if melting ate
        // into the crystallized area.
        for k in hi..=k_max {
            let fraction = self.fraction_after(&amorphous, &pulse(k))?;
            if fraction + 1e-12 >= target_p {
                let p = pulse(k);
                return Ok(SetPulse {
                    power_mw,
                    duration_us: p.duration_us,
                    energy_nj: p.energy_nj(),
                    fraction,
                });
            }
            if k > hi && self.pcm_peaks_k(&pulse(k)).iter().all(|t| *t >= self.t_l) {
                break;
            }
        }
        Err(Error::Threshold(format!(
            "{} at {power_mw} mW: parts of the film pass T_l = {:.0} K and quench before {target_p} of it crystallizes",
            self.material, self.t_l
        )))
    }

    /// Set pulses for ascending powers; failures become markers.
    pub fn power_latency_curve(&self, target_p: f64, powers_mw: &[f64]) -> Result<Vec<LatencyPoint>> {
        if powers_mw.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("powers must be strictly ascending".into()));
        }
        Ok(powers_mw
            .iter()
            .map(|&power_mw| match self.set_energy(power_mw, target_p) {
                Ok(set) => LatencyPoint {
                    power_mw,
                    set: Some(set),
                    note: None,
                },
                Err(e) => LatencyPoint {
                    power_mw,
                    set: None,
                    note: Some(e.to_string()),
                },
            })
            .collect())
    }

    /// Applies a reset pulse to a fully crystalline film.
    pub fn reset_check(&self, pulse: &HeaterPulse) -> Result<ResetCheck> {
        let peaks = self.pcm_peaks_k(pulse);
        let crystalline = FractionMap::uniform(peaks.len(), 1.0);
        let (_, p_after) = update_from_peaks(&crystalline, &peaks, self.t_g, self.t_l)?;
        let heater_peak_k = AMBIENT_K + self.response.heater_peak(pulse);
        Ok(ResetCheck {
            ok: peaks.iter().all(|t| *t >= self.t_l),
            heater_safe: heater_peak_k < self.melt_limit_k,
            p_after,
            heater_peak_k,
            pcm_min_peak_k: peaks.iter().cloned().fold(f64::INFINITY, f64::min),
        })
    }

    /// Lowest power on a ladder that still completes a set to `target_p`.
    pub fn threshold_power(&self, target_p: f64, ladder_mw: &[f64]) -> Option<f64> {
        ladder_mw
            .iter()
            .copied()
            .filter(|&p| self.set_energy(p, target_p).is_ok())
            .fold(None, |best: Option<f64>, p| Some(best.map_or(p, |b| b.min(p))))
    }
}

pub fn set_energy(db: &MaterialDb, stack: &ThermalStack, power_mw: f64, target_p: f64) -> Result<SetPulse> {
    ThermalModel::new(db, stack)?.set_energy(power_mw, target_p)
}

pub fn power_latency_curve(
    db: &MaterialDb,
    stack: &ThermalStack,
    target_p: f64,
    powers_mw: &[f64],
) -> Result<Vec<LatencyPoint>> {
    ThermalModel::new(db, stack)?.power_latency_curve(target_p, powers_mw)
}

pub fn reset_check(db: &MaterialDb, stack: &ThermalStack, pulse: &HeaterPulse) -> Result<ResetCheck> {
    ThermalModel::new(db, stack)?.reset_check(pulse)
}

/// Trace as CSV: `time_us,t_min_k,t_p10_k,t_median_k,t_p90_k,t_max_k`.
pub fn trace_csv(trace: &[QuantileSample]) -> String {
    let mut out = String::from("time_us,t_min_k,t_p10_k,t_median_k,t_p90_k,t_max_k\n");
    for s in trace {
        out.push_str(&format!("{:.4}", s.time_us));
        for v in s.kelvin {
            out.push_str(&format!(",{v:.4}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulse_energy_and_domain() {
        let p = HeaterPulse::new(6.0, 29.0).unwrap();
        assert!((p.energy_nj() - 174.0).abs() < 1e-12);
        assert!((HeaterPulse::reset_default().energy_nj() - 140.0).abs() < 1e-12);
        assert!(HeaterPulse::new(-1.0, 1.0).is_err());
        assert!(HeaterPulse::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn heater_defaults_validate() {
        let h = HeaterSpec::default();
        h.validate().unwrap();
        assert!((h.resistance_ohm() - 5.5).abs() < 1e-12);
        let mut bad = h.clone();
        bad.melt_limit_k = 250.0;
        assert!(bad.validate().unwrap_err().is_config());
    }

    #[test]
    fn phase_update_rules() {
        let prev = FractionMap(vec![0.0, 1.0, 0.3, 1.0]);
        let (next, p) = update_from_peaks(&prev, &[400.0, 950.0, 500.0, 420.0], 453.0, 890.0).unwrap();
        assert_eq!(next.0, vec![0.0, 0.0, 1.0, 1.0]);
        assert!((p - 0.5).abs() < 1e-15);
        assert!(update_from_peaks(&prev, &[400.0], 453.0, 890.0).is_err());
    }

    #[test]
    fn quantile_endpoints() {
        let mut v = vec![5.0, 1.0, 3.0, 2.0, 4.0];
        let q = quantiles(&mut v);
        assert_eq!(q[0], 1.0);
        assert_eq!(q[2], 3.0);
        assert_eq!(q[4], 5.0);
    }
}
