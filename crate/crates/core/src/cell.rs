//! Cell-level figures of merit: transmission versus crystallization
//! fraction, amorphous/crystalline contrast, bit capacity and the fraction
//! needed to reach each stored level.
//!
//! Optical model of a cell of length L between two bare-waveguide sections:
//!
//! * each facet reflects `R_f = |(n_pcm - n_bare)/(n_pcm + n_bare)|²`, with
//!   both indices the complex modal effective indices;
//! * the film attenuates one pass by `a = 10^(-loss·L/10)`;
//! * `T = (1 - R_f)² a`, and light reflected at the rear facet is absorbed on
//!   the way back and leaves through the front, so
//!   `R = R_f + R_f (1 - R_f) a²` and `A = 1 - T - R`.
//!
//! Levels are equally spaced in transmission: level k targets `T(0) - k·margin`.

use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::{absorption_db_per_um, CrystallizationFraction, MaterialDb};
use crate::modesolver::{build_index_map, solve_fundamental_mode_with, CrossSection, SolverOptions};

fn d_length() -> f64 {
    2.0
}
fn d_margin() -> f64 {
    0.015
}
fn d_wavelength() -> f64 {
    1550.0
}

/// A memory cell: PCM film on a strip waveguide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellDesign {
    pub material: String,
    pub cross_section: CrossSection,
    #[serde(default = "d_length")]
    pub length_um: f64,
    /// Transmission separation between adjacent levels.
    #[serde(default = "d_margin")]
    pub margin: f64,
    #[serde(default = "d_wavelength")]
    pub wavelength_nm: f64,
}

impl CellDesign {
    pub fn new(material: &str, cross_section: CrossSection) -> Self {
        CellDesign {
            material: material.to_string(),
            cross_section,
            length_um: d_length(),
            margin: d_margin(),
            wavelength_nm: d_wavelength(),
        }
    }

    pub fn with_length(mut self, length_um: f64) -> Self {
        self.length_um = length_um;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_um > 0.0 && self.length_um.is_finite()) {
            return Err(Error::config(
                "length_um",
                format!("must be > 0, got {}", self.length_um),
            ));
        }
        if !(self.margin > 0.0 && self.margin < 1.0) {
            return Err(Error::config(
                "margin",
                format!("must be in (0, 1), got {}", self.margin),
            ));
        }
        if !(self.wavelength_nm > 0.0) {
            return Err(Error::config("wavelength_nm", "must be > 0"));
        }
        self.cross_section.validate()
    }

    fn label(&self) -> String {
        format!(
            "cell {} {:.0} nm x {:.0} nm x {} um",
            self.material, self.cross_section.wg_width_nm, self.cross_section.pcm_thickness_nm, self.length_um
        )
    }
}

/// Power split of one pass through the cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transmission {
    pub t: f64,
    pub r: f64,
    pub a: f64,
}

/// Facet reflectance between two modal indices.
pub fn facet_reflectance(n1: Complex64, n2: Complex64) -> f64 {
    ((n1 - n2) / (n1 + n2)).norm_sqr()
}

/// T/R/A from the two modal indices and the cell length.
pub fn split_power(n_bare: Complex64, n_cell: Complex64, length_um: f64, wavelength_nm: f64) -> Result<Transmission> {
    let rf = facet_reflectance(n_bare, n_cell);
    let loss = absorption_db_per_um((-n_cell.im).max(0.0), wavelength_nm)?;
    let pass = (-loss * length_um * std::f64::consts::LN_10 / 10.0).exp();
    let t = (1.0 - rf).powi(2) * pass;
    let r = rf + rf * (1.0 - rf) * pass * pass;
    Ok(Transmission { t, r, a: 1.0 - t - r })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContrastResult {
    pub delta_t: f64,
    pub delta_p: f64,
    pub t_amorphous: f64,
    pub t_crystalline: f64,
    pub r_amorphous: f64,
    pub r_crystalline: f64,
    pub a_amorphous: f64,
    pub a_crystalline: f64,
    /// Amorphous-state loss, dB/µm.
    pub insertion_loss_db_per_um: f64,
}

impl ContrastResult {
    /// Set when either contrast came out negative.
    pub fn flagged(&self) -> bool {
        self.delta_t < 0.0 || self.delta_p < 0.0
    }
}

/// Levels and bits that fit in a transmission contrast at a given margin.
///
/// `levels = floor(ΔT / margin)`, `bits = floor(log2(levels))` for at least
/// two levels. The quotient is nudged by 1e-9 so exact multiples such as
/// 0.96 / 0.015 are not lost to rounding.
pub fn bit_capacity(delta_t: f64, margin: f64) -> u32 {
    level_count(delta_t, margin).checked_ilog2().unwrap_or(0)
}

pub fn level_count(delta_t: f64, margin: f64) -> u64 {
    if !(delta_t > 0.0 && margin > 0.0) {
        return 0;
    }
    (delta_t / margin + 1e-9).floor() as u64
}

/// Chebyshev–Lobatto nodes on [0, 1] used for the n_eff(p) interpolant.
pub const CURVE_NODES: usize = 9;

fn lobatto_nodes(count: usize) -> Vec<f64> {
    let m = (count - 1) as f64;
    (0..count)
        .map(|k| {
            let p = 0.5 * (1.0 - (std::f64::consts::PI * k as f64 / m).cos());
            // Pin the endpoints exactly.
            if k == 0 {
                0.0
            } else if k + 1 == count {
                1.0
            } else {
                p
            }
        })
        .collect()
}

/// Modal index of the loaded section as a smooth function of p, from mode
/// solves at Chebyshev–Lobatto nodes and barycentric interpolation.
#[derive(Debug, Clone)]
pub struct ModalCurve {
    nodes: Vec<f64>,
    values: Vec<Complex64>,
    weights: Vec<f64>,
}

impl ModalCurve {
    pub fn from_samples(nodes: Vec<f64>, values: Vec<Complex64>) -> Self {
        let m = nodes.len();
        let weights = (0..m)
            .map(|k| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                if k == 0 || k + 1 == m {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        ModalCurve { nodes, values, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn eval(&self, p: f64) -> Complex64 {
        let mut num = Complex64::default();
        let mut den = 0.0;
        for ((x, v), w) in self.nodes.iter().zip(&self.values).zip(&self.weights) {
            let d = p - x;
            if d == 0.0 {
                return *v;
            }
            num += v * (w / d);
            den += w / d;
        }
        num / den
    }
}

/// Evaluates one cell design; mode solves are cached per fraction.
pub struct CellModel<'a> {
    db: &'a MaterialDb,
    design: CellDesign,
    solver: SolverOptions,
    n_bare: Complex64,
    cache: Mutex<Vec<(f64, Complex64)>>,
    curve: OnceLock<ModalCurve>,
}

impl<'a> CellModel<'a> {
    pub fn new(db: &'a MaterialDb, design: CellDesign) -> Result<Self> {
        Self::with_solver(db, design, SolverOptions::default())
    }

    pub fn with_solver(db: &'a MaterialDb, design: CellDesign, solver: SolverOptions) -> Result<Self> {
        design.validate().map_err(|e| e.context(design.label()))?;
        let n_bare = bare_index(db, &design, &solver)?;
        Ok(Self::with_bare_index(db, design, solver, n_bare))
    }

    /// Reuses a bare-waveguide index computed elsewhere (same width and stack).
    pub fn with_bare_index(db: &'a MaterialDb, design: CellDesign, solver: SolverOptions, n_bare: Complex64) -> Self {
        CellModel {
            db,
            design,
            solver,
            n_bare,
            cache: Mutex::new(Vec::new()),
            curve: OnceLock::new(),
        }
    }

    /// Records a modal index computed elsewhere for the same section.
    pub fn seed_index(&self, p: CrystallizationFraction, n_eff: Complex64) {
        let mut cache = self.cache.lock().unwrap();
        if !cache.iter().any(|(q, _)| *q == p.value()) {
            cache.push((p.value(), n_eff));
        }
    }

    pub fn design(&self) -> &CellDesign {
        &self.design
    }

    pub fn bare_index(&self) -> Complex64 {
        self.n_bare
    }

    /// Modal index of the PCM-loaded section at fraction `p` (direct solve).
    pub fn modal_index(&self, p: CrystallizationFraction) -> Result<Complex64> {
        if let Some(hit) = self.cache.lock().unwrap().iter().find(|(q, _)| *q == p.value()) {
            return Ok(hit.1);
        }
        let v = if self.design.cross_section.pcm_thickness_nm == 0.0 {
            self.n_bare
        } else {
            solve_index(self.db, &self.design.cross_section, &self.design, p, &self.solver)
                .map_err(|e| e.context(format!("{} at p = {}", self.design.label(), p.value())))?
        };
        self.cache.lock().unwrap().push((p.value(), v));
        Ok(v)
    }

    pub fn insertion_loss_db_per_um(&self) -> Result<f64> {
        let n = self.modal_index(CrystallizationFraction::AMORPHOUS)?;
        absorption_db_per_um((-n.im).max(0.0), self.design.wavelength_nm)
    }

    /// T/R/A at fraction `p` from a direct mode solve.
    pub fn transmission(&self, p: CrystallizationFraction) -> Result<Transmission> {
        let n = self.modal_index(p)?;
        split_power(self.n_bare, n, self.design.length_um, self.design.wavelength_nm)
    }

    pub fn contrast(&self) -> Result<ContrastResult> {
        let amorphous = self.transmission(CrystallizationFraction::AMORPHOUS)?;
        let crystalline = self.transmission(CrystallizationFraction::CRYSTALLINE)?;
        Ok(ContrastResult {
            delta_t: amorphous.t - crystalline.t,
            delta_p: crystalline.a - amorphous.a,
            t_amorphous: amorphous.t,
            t_crystalline: crystalline.t,
            r_amorphous: amorphous.r,
            r_crystalline: crystalline.r,
            a_amorphous: amorphous.a,
            a_crystalline: crystalline.a,
            insertion_loss_db_per_um: self.insertion_loss_db_per_um()?,
        })
    }

    pub fn bit_capacity(&self) -> Result<u32> {
        Ok(bit_capacity(self.contrast()?.delta_t, self.design.margin))
    }

    /// n_eff(p) interpolant; built on first use from `CURVE_NODES` solves.
    pub fn modal_curve(&self) -> Result<&ModalCurve> {
        if let Some(c) = self.curve.get() {
            return Ok(c);
        }
        let nodes = lobatto_nodes(CURVE_NODES);
        let values = nodes
            .iter()
            .map(|&p| self.modal_index(CrystallizationFraction::new(p)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.curve.get_or_init(|| ModalCurve::from_samples(nodes, values)))
    }

    /// T/R/A at `p` from the interpolated modal index. Exact at the nodes.
    pub fn transmission_fast(&self, p: CrystallizationFraction) -> Result<Transmission> {
        let n = self.modal_curve()?.eval(p.value());
        split_power(self.n_bare, n, self.design.length_um, self.design.wavelength_nm)
    }

    /// Smallest p whose transmission drop from the amorphous state reaches
    /// `level · margin`, to within `FRACTION_TOLERANCE`.
    pub fn required_fraction(&self, level: u64, bits: u32) -> Result<CrystallizationFraction> {
        if bits >= 63 || level > (1u64 << bits) - 1 {
            return Err(Error::Domain(format!(
                "level {level} does not exist in a {bits}-bit cell"
            )));
        }
        let capacity = self.bit_capacity()?;
        if bits > capacity {
            return Err(Error::Capacity(format!(
                "{} holds {capacity} bits, {bits} requested",
                self.design.label()
            )));
        }
        if level == 0 {
            return Ok(CrystallizationFraction::AMORPHOUS);
        }
        let target = level as f64 * self.design.margin;
        let t0 = self.transmission_fast(CrystallizationFraction::AMORPHOUS)?.t;
        let drop = |p: f64| -> Result<f64> { Ok(t0 - self.transmission_fast(CrystallizationFraction::new(p)?)?.t) };
        // Bracket on a coarse scan, then bisect inside the first bracket.
        const SCAN: usize = 64;
        let mut lo = 0.0;
        let mut hi = None;
        for k in 1..=SCAN {
            let p = k as f64 / SCAN as f64;
            if drop(p)? >= target {
                hi = Some(p);
                break;
            }
            lo = p;
        }
        let Some(mut hi) = hi else {
            return Err(Error::Capacity(format!(
                "{}: level {level} needs a transmission drop of {target:.4}, not reachable for p in [0, 1]",
                self.design.label()
            )));
        };
        while hi - lo > 0.5 * FRACTION_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if drop(mid)? >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        CrystallizationFraction::new(hi)
    }

    /// Fraction for every level of a `bits`-bit cell.
    pub fn level_table(&self, bits: u32) -> Result<Vec<(u64, CrystallizationFraction)>> {
        (0..(1u64 << bits))
            .map(|level| Ok((level, self.required_fraction(level, bits)?)))
            .collect()
    }

    /// T/R/A on `count` evenly spaced fractions from 0 to 1.
    pub fn transmission_curve(&self, count: usize) -> Result<Vec<(f64, Transmission)>> {
        (0..count)
            .map(|k| {
                let p = if count == 1 { 0.0 } else { k as f64 / (count - 1) as f64 };
                Ok((p, self.transmission_fast(CrystallizationFraction::new(p)?)?))
            })
            .collect()
    }
}

/// Bisection resolution for `required_fraction`, in p.
pub const FRACTION_TOLERANCE: f64 = 1e-4;

/// Modal index of the waveguide without the film (depends on width, stack
/// and wavelength only).
pub fn bare_index(db: &MaterialDb, design: &CellDesign, solver: &SolverOptions) -> Result<Complex64> {
    let mut bare_xs = design.cross_section.clone();
    bare_xs.pcm_thickness_nm = 0.0;
    solve_index(db, &bare_xs, design, CrystallizationFraction::AMORPHOUS, solver)
        .map_err(|e| e.context(format!("{} (bare waveguide)", design.label())))
}

fn solve_index(
    db: &MaterialDb,
    xs: &CrossSection,
    design: &CellDesign,
    p: CrystallizationFraction,
    solver: &SolverOptions,
) -> Result<Complex64> {
    let map = build_index_map(db, xs, &design.material, design.wavelength_nm, p)?;
    Ok(solve_fundamental_mode_with(&map, design.wavelength_nm, solver)?.n_eff)
}

/// T/R/A of a cell at fraction `p`.
pub fn transmission(db: &MaterialDb, cell: &CellDesign, p: CrystallizationFraction) -> Result<Transmission> {
    CellModel::new(db, cell.clone())?.transmission(p)
}

pub fn contrast(db: &MaterialDb, cell: &CellDesign) -> Result<ContrastResult> {
    CellModel::new(db, cell.clone())?.contrast()
}

pub fn required_fraction(db: &MaterialDb, cell: &CellDesign, level: u64, bits: u32) -> Result<CrystallizationFraction> {
    CellModel::new(db, cell.clone())?.required_fraction(level, bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_capacity_arithmetic() {
        assert_eq!(level_count(0.96, 0.015), 64);
        assert_eq!(bit_capacity(0.96, 0.015), 6);
        assert_eq!(bit_capacity(0.0, 0.015), 0);
        assert_eq!(level_count(0.30, 0.015), 20);
        assert_eq!(bit_capacity(0.30, 0.015), 4);
        assert_eq!(bit_capacity(0.02, 0.015), 0);
        assert_eq!(bit_capacity(0.03, 0.015), 1);
        assert_eq!(bit_capacity(-0.1, 0.015), 0);
    }

    #[test]
    fn split_power_bookkeeping() {
        let bare = Complex64::new(2.45, 0.0);
        for (n, len) in [
            (Complex64::new(2.6, -0.01), 2.0),
            (Complex64::new(3.1, -0.2), 5.0),
            (Complex64::new(2.45, 0.0), 2.0),
            (Complex64::new(2.8, 0.0), 0.0),
        ] {
            let s = split_power(bare, n, len, 1550.0).unwrap();
            assert!((s.t + s.r + s.a - 1.0).abs() <= 1e-12);
            for v in [s.t, s.r, s.a] {
                assert!((0.0..=1.0).contains(&v), "{s:?}");
            }
        }
        let matched = split_power(bare, bare, 2.0, 1550.0).unwrap();
        assert!((matched.t - 1.0).abs() <= 1e-9);
        let rf = facet_reflectance(bare, Complex64::new(2.8, -0.05));
        let zero_len = split_power(bare, Complex64::new(2.8, -0.05), 0.0, 1550.0).unwrap();
        assert!((zero_len.t - (1.0 - rf).powi(2)).abs() < 1e-15);
        assert!(zero_len.a.abs() < 1e-15);
    }

    #[test]
    fn lossless_mismatch_absorbs_nothing() {
        let s = split_power(Complex64::new(2.4, 0.0), Complex64::new(2.9, 0.0), 2.0, 1550.0).unwrap();
        assert!(s.a.abs() < 1e-15);
        assert!(s.t < 1.0);
    }

    #[test]
    fn modal_curve_reproduces_polynomials() {
        let nodes = lobatto_nodes(CURVE_NODES);
        assert_eq!(nodes[0], 0.0);
        assert_eq!(nodes[CURVE_NODES - 1], 1.0);
        let f = |p: f64| Complex64::new(2.0 + 0.3 * p - 0.1 * p.powi(3), -0.01 - 0.2 * p * p);
        let curve = ModalCurve::from_samples(nodes.clone(), nodes.iter().map(|&p| f(p)).collect());
        for p in [0.0, 0.13, 0.5, 0.77, 1.0] {
            assert!((curve.eval(p) - f(p)).norm() < 1e-13);
        }
    }

    #[test]
    fn design_validation() {
        let mut d = CellDesign::new("GST", CrossSection::new(470.0, 20.0));
        assert!(d.validate().is_ok());
        d.margin = 0.0;
        assert!(d.validate().unwrap_err().is_config());
    }
}
