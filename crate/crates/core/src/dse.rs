//! Design-space sweeps over material × thickness × width × length, Pareto
//! filtering and the design-selection rules.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cell::{bare_index, bit_capacity, CellDesign, CellModel};
use crate::error::{Error, Result};
use crate::materials::{CrystallizationFraction, MaterialDb};
use crate::modesolver::{CrossSection, SolverOptions};
use crate::thermal::{HeaterSpec, ThermalModel, ThermalStack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    InsertionLoss,
    DeltaT,
    DeltaP,
    Bits,
    MaxSetEnergy,
    Footprint,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::InsertionLoss,
        Metric::DeltaT,
        Metric::DeltaP,
        Metric::Bits,
        Metric::MaxSetEnergy,
        Metric::Footprint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::InsertionLoss => "insertion_loss",
            Metric::DeltaT => "delta_t",
            Metric::DeltaP => "delta_p",
            Metric::Bits => "bits",
            Metric::MaxSetEnergy => "max_set_energy",
            Metric::Footprint => "footprint",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let known: Vec<_> = Metric::ALL.iter().map(|m| m.name()).collect();
            Error::config(
                "objectives",
                format!("unknown metric `{s}`; known: {}", known.join(", ")),
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Objective {
    pub metric: Metric,
    pub direction: Direction,
}

impl Objective {
    pub fn min(metric: Metric) -> Self {
        Objective {
            metric,
            direction: Direction::Minimize,
        }
    }

    pub fn max(metric: Metric) -> Self {
        Objective {
            metric,
            direction: Direction::Maximize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Depth {
    #[default]
    Optical,
    OpticalThermal,
}

/// Inclusive arithmetic range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridRange {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        GridRange { start, stop, step }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::config("step", format!("must be > 0, got {}", self.step)));
        }
        if !(self.stop >= self.start) {
            return Err(Error::config("stop", "must be >= start"));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|k| self.start + k as f64 * self.step).collect())
    }
}

fn d_materials() -> Vec<String> {
    vec!["GST".into()]
}
fn d_thickness() -> GridRange {
    GridRange::new(10.0, 50.0, 5.0)
}
fn d_width() -> GridRange {
    GridRange::new(400.0, 600.0, 20.0)
}
fn d_lengths() -> Vec<f64> {
    vec![2.0]
}
fn d_wavelength() -> f64 {
    1550.0
}
fn d_margin() -> f64 {
    0.015
}
fn d_pitch() -> f64 {
    10.0
}
fn d_objectives() -> Vec<Objective> {
    vec![
        Objective::min(Metric::InsertionLoss),
        Objective::max(Metric::DeltaT),
        Objective::max(Metric::Bits),
        Objective::min(Metric::Footprint),
    ]
}
fn d_set_power() -> f64 {
    6.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "d_materials")]
    pub materials: Vec<String>,
    #[serde(default = "d_thickness")]
    pub thickness_nm: GridRange,
    #[serde(default = "d_width")]
    pub width_nm: GridRange,
    #[serde(default = "d_lengths")]
    pub lengths_um: Vec<f64>,
    #[serde(default = "d_wavelength")]
    pub wavelength_nm: f64,
    #[serde(default = "d_margin")]
    pub margin: f64,
    /// Optical grid pitch, nm.
    #[serde(default = "d_pitch")]
    pub grid_pitch_nm: f64,
    #[serde(default = "d_objectives")]
    pub objectives: Vec<Objective>,
    #[serde(default)]
    pub depth: Depth,
    /// Heater power used for the set-energy metric, mW.
    #[serde(default = "d_set_power")]
    pub set_power_mw: f64,
    #[serde(default)]
    pub heater: HeaterSpec,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            materials: d_materials(),
            thickness_nm: d_thickness(),
            width_nm: d_width(),
            lengths_um: d_lengths(),
            wavelength_nm: d_wavelength(),
            margin: d_margin(),
            grid_pitch_nm: d_pitch(),
            objectives: d_objectives(),
            depth: Depth::Optical,
            set_power_mw: d_set_power(),
            heater: HeaterSpec::default(),
        }
    }
}

/// Identity of a grid element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointKey {
    pub material: String,
    pub thickness_nm: f64,
    pub width_nm: f64,
    pub length_um: f64,
}

impl PointKey {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.material
            .cmp(&other.material)
            .then(self.thickness_nm.total_cmp(&other.thickness_nm))
            .then(self.width_nm.total_cmp(&other.width_nm))
            .then(self.length_um.total_cmp(&other.length_um))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub insertion_loss_db_per_um: f64,
    pub delta_t: f64,
    pub delta_p: f64,
    pub bits: u32,
    pub max_set_energy_nj: Option<f64>,
    /// PCM area, µm².
    pub footprint_um2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub key: PointKey,
    pub metrics: Option<Metrics>,
    /// Why the evaluation failed, when it did.
    pub failure: Option<String>,
}

impl DesignPoint {
    pub fn is_ok(&self) -> bool {
        self.metrics.is_some()
    }

    pub fn metric(&self, metric: Metric) -> Option<f64> {
        let m = self.metrics.as_ref()?;
        match metric {
            Metric::InsertionLoss => Some(m.insertion_loss_db_per_um),
            Metric::DeltaT => Some(m.delta_t),
            Metric::DeltaP => Some(m.delta_p),
            Metric::Bits => Some(m.bits as f64),
            Metric::MaxSetEnergy => m.max_set_energy_nj,
            Metric::Footprint => Some(m.footprint_um2),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.materials.is_empty() {
            return Err(Error::config("sweep.materials", "must not be empty"));
        }
        self.thickness_nm
            .values()
            .map_err(|e| e.context("sweep.thickness_nm"))?;
        self.width_nm.values().map_err(|e| e.context("sweep.width_nm"))?;
        if self.lengths_um.is_empty() || self.lengths_um.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::config("sweep.lengths_um", "needs at least one positive length"));
        }
        if self.objectives.is_empty() {
            return Err(Error::config("sweep.objectives", "must not be empty"));
        }
        if self.depth == Depth::Optical && self.objectives.iter().any(|o| o.metric == Metric::MaxSetEnergy) {
            return Err(Error::config(
                "sweep.objectives",
                "max_set_energy needs depth = optical_thermal",
            ));
        }
        Ok(())
    }

    /// Grid elements in evaluation order: material, thickness, width, length.
    pub fn keys(&self) -> Result<Vec<PointKey>> {
        self.validate()?;
        let mut materials = self.materials.clone();
        materials.sort();
        materials.dedup();
        let mut lengths = self.lengths_um.clone();
        lengths.sort_by(f64::total_cmp);
        let mut out = Vec::new();
        for material in &materials {
            for &thickness_nm in &self.thickness_nm.values()? {
                for &width_nm in &self.width_nm.values()? {
                    for &length_um in &lengths {
                        out.push(PointKey {
                            material: material.clone(),
                            thickness_nm,
                            width_nm,
                            length_um,
                        });
                    }
                }
            }
        }
        Ok(out)
    }

    fn design(&self, key: &PointKey) -> CellDesign {
        let mut d = CellDesign::new(
            &key.material,
            CrossSection::new(key.width_nm, key.thickness_nm).with_pitch(self.grid_pitch_nm),
        );
        d.length_um = key.length_um;
        d.margin = self.margin;
        d.wavelength_nm = self.wavelength_nm;
        d
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; 0 uses rayon's default.
    pub workers: usize,
    /// Persist and resume from this directory.
    pub run_dir: Option<PathBuf>,
    /// Identifies the material data in the run-directory hash.
    pub materials_fingerprint: String,
}

/// Evaluates every grid element. Failed points are kept with their reason.
pub fn run_sweep(db: &MaterialDb, spec: &SweepSpec, opts: &SweepOptions) -> Result<Vec<DesignPoint>> {
    let keys = spec.keys()?;
    let mut done: BTreeMap<usize, DesignPoint> = BTreeMap::new();
    if let Some(dir) = &opts.run_dir {
        for p in RunDir::open(dir, spec, &opts.materials_fingerprint)?.load()? {
            if let Some(i) = keys.iter().position(|k| k.cmp_key(&p.key) == Ordering::Equal) {
                done.insert(i, p);
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Sweep(format!("worker pool: {e}")))?;

    // Groups share mode solves: (material, thickness, width) → all lengths.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, k) in keys.iter().enumerate() {
        match groups.last_mut() {
            Some(g)
                if keys[g[0]].material == k.material
                    && keys[g[0]].thickness_nm == k.thickness_nm
                    && keys[g[0]].width_nm == k.width_nm =>
            {
                g.push(i)
            }
            _ => groups.push(vec![i]),
        }
    }
    groups.retain(|g| g.iter().any(|i| !done.contains_key(i)));

    let widths: Vec<f64> = {
        let mut w: Vec<f64> = groups.iter().map(|g| keys[g[0]].width_nm).collect();
        w.sort_by(f64::total_cmp);
        w.dedup();
        w
    };
    let bare: Vec<(f64, Result<Complex64>)> = pool.install(|| {
        widths
            .par_iter()
            .map(|&w| {
                let probe = PointKey {
                    material: keys[0].material.clone(),
                    thickness_nm: 0.0,
                    width_nm: w,
                    length_um: 1.0,
                };
                (w, bare_index(db, &spec.design(&probe), &SolverOptions::default()))
            })
            .collect()
    });
    let bare_for = |w: f64| -> Result<Complex64> {
        match bare.iter().find(|(x, _)| *x == w) {
            Some((_, Ok(n))) => Ok(*n),
            Some((_, Err(e))) => Err(Error::Sweep(e.to_string())),
            None => Err(Error::Sweep(format!("no bare-waveguide solve for width {w}"))),
        }
    };

    // Batches of one (material, thickness) row keep the run directory
    // current while the sweep is in flight.
    let mut start = 0;
    while start < groups.len() {
        let head = &keys[groups[start][0]];
        let mut end = start;
        while end < groups.len()
            && keys[groups[end][0]].material == head.material
            && keys[groups[end][0]].thickness_nm == head.thickness_nm
        {
            end += 1;
        }
        let batch: Vec<Vec<(usize, DesignPoint)>> = pool.install(|| {
            groups[start..end]
                .par_iter()
                .map(|g| evaluate_group(db, spec, &keys, g, bare_for(keys[g[0]].width_nm)))
                .collect()
        });
        for (i, p) in batch.into_iter().flatten() {
            done.insert(i, p);
        }
        if let Some(dir) = &opts.run_dir {
            RunDir::open(dir, spec, &opts.materials_fingerprint)?.store(done.values())?;
        }
        start = end;
    }

    let points: Vec<DesignPoint> = done.into_values().collect();
    if !points.iter().any(DesignPoint::is_ok) {
        let reason = points.iter().find_map(|p| p.failure.clone()).unwrap_or_default();
        return Err(Error::Sweep(format!(
            "all {} points failed; first reason: {reason}",
            points.len()
        )));
    }
    Ok(points)
}

fn evaluate_group(
    db: &MaterialDb,
    spec: &SweepSpec,
    keys: &[PointKey],
    group: &[usize],
    n_bare: Result<Complex64>,
) -> Vec<(usize, DesignPoint)> {
    let fail = |reason: String| -> Vec<(usize, DesignPoint)> {
        group
            .iter()
            .map(|&i| {
                (
                    i,
                    DesignPoint {
                        key: keys[i].clone(),
                        metrics: None,
                        failure: Some(reason.clone()),
                    },
                )
            })
            .collect()
    };
    let n_bare = match n_bare {
        Ok(n) => n,
        Err(e) => return fail(e.to_string()),
    };
    let first = CellModel::with_bare_index(db, spec.design(&keys[group[0]]), SolverOptions::default(), n_bare);
    let ends = (|| -> Result<(Complex64, Complex64)> {
        first.design().validate()?;
        Ok((
            first.modal_index(CrystallizationFraction::AMORPHOUS)?,
            first.modal_index(CrystallizationFraction::CRYSTALLINE)?,
        ))
    })();
    let (n_a, n_c) = match ends {
        Ok(v) => v,
        Err(e) => return fail(e.to_string()),
    };
    group
        .iter()
        .map(|&i| {
            let key = &keys[i];
            let model = CellModel::with_bare_index(db, spec.design(key), SolverOptions::default(), n_bare);
            model.seed_index(CrystallizationFraction::AMORPHOUS, n_a);
            model.seed_index(CrystallizationFraction::CRYSTALLINE, n_c);
            let point = match evaluate_point(db, spec, key, &model) {
                Ok(metrics) => DesignPoint {
                    key: key.clone(),
                    metrics: Some(metrics),
                    failure: None,
                },
                Err(e) => DesignPoint {
                    key: key.clone(),
                    metrics: None,
                    failure: Some(e.to_string()),
                },
            };
            (i, point)
        })
        .collect()
}

fn evaluate_point(db: &MaterialDb, spec: &SweepSpec, key: &PointKey, model: &CellModel) -> Result<Metrics> {
    let c = model.contrast()?;
    let bits = bit_capacity(c.delta_t, spec.margin);
    let max_set_energy_nj = match spec.depth {
        Depth::Optical => None,
        Depth::OpticalThermal => {
            if bits == 0 {
                Some(0.0)
            } else {
                let top = (1u64 << bits) - 1;
                let target = model.required_fraction(top, bits)?.value();
                let mut stack = ThermalStack::new(&key.material, model.design().cross_section.clone());
                stack.heater = spec.heater.clone();
                stack.heater.length_um = key.length_um;
                let thermal = ThermalModel::new(db, &stack)?;
                Some(thermal.set_energy(spec.set_power_mw, target)?.energy_nj)
            }
        }
    };
    let metrics = Metrics {
        insertion_loss_db_per_um: c.insertion_loss_db_per_um,
        delta_t: c.delta_t,
        delta_p: c.delta_p,
        bits,
        max_set_energy_nj,
        footprint_um2: key.width_nm * 1e-3 * key.length_um,
    };
    let finite = [
        metrics.insertion_loss_db_per_um,
        metrics.delta_t,
        metrics.delta_p,
        metrics.footprint_um2,
    ]
    .into_iter()
    .chain(metrics.max_set_energy_nj)
    .all(f64::is_finite);
    if !finite {
        return Err(Error::NonFinite("design metrics".into()));
    }
    Ok(metrics)
}

/// Objective value oriented so that smaller is better.
fn oriented(p: &DesignPoint, o: &Objective) -> Result<f64> {
    let v = p.metric(o.metric).ok_or_else(|| {
        Error::config(
            "objectives",
            format!("metric `{}` was not evaluated for these points", o.metric),
        )
    })?;
    Ok(match o.direction {
        Direction::Minimize => v,
        Direction::Maximize => -v,
    })
}

/// True when `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Non-dominated successful points, in input order.
pub fn pareto_front(points: &[DesignPoint], objectives: &[Objective]) -> Result<Vec<DesignPoint>> {
    if objectives.is_empty() {
        return Err(Error::config("objectives", "must not be empty"));
    }
    if points.is_empty() {
        return Err(Error::Domain("pareto_front needs at least one point".into()));
    }
    let ok: Vec<&DesignPoint> = points.iter().filter(|p| p.is_ok()).collect();
    let vectors = ok
        .iter()
        .map(|p| objectives.iter().map(|o| oriented(p, o)).collect::<Result<Vec<f64>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(ok
        .iter()
        .enumerate()
        .filter(|(i, _)| !vectors.iter().any(|v| dominates(v, &vectors[*i])))
        .map(|(_, p)| (*p).clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    /// Largest min(ΔT, ΔP).
    MaxJointContrast,
    /// Lowest insertion loss among designs holding at least n bits.
    MinLossAtBits(u32),
}

impl FromStr for SelectionRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "max_joint_contrast" {
            return Ok(SelectionRule::MaxJointContrast);
        }
        if let Some(n) = s.strip_prefix("min_loss_at_bits(").and_then(|r| r.strip_suffix(')')) {
            let n = n
                .trim()
                .parse()
                .map_err(|_| Error::config("rule", format!("bad bit count in `{s}`")))?;
            return Ok(SelectionRule::MinLossAtBits(n));
        }
        Err(Error::config(
            "rule",
            format!("unknown rule `{s}`; expected max_joint_contrast or min_loss_at_bits(n)"),
        ))
    }
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionRule::MaxJointContrast => f.write_str("max_joint_contrast"),
            SelectionRule::MinLossAtBits(n) => write!(f, "min_loss_at_bits({n})"),
        }
    }
}

/// Picks one design. Ties fall to lower loss, then smaller footprint, then
/// the (material, thickness, width, length) order, so the answer does not
/// depend on the input order.
pub fn select_design(points: &[DesignPoint], rule: SelectionRule) -> Result<DesignPoint> {
    let ok: Vec<&DesignPoint> = points.iter().filter(|p| p.is_ok()).collect();
    if ok.is_empty() {
        return Err(Error::Sweep("no successfully evaluated design to select from".into()));
    }
    let m = |p: &DesignPoint| p.metrics.unwrap();
    let tie_break = |a: &DesignPoint, b: &DesignPoint| {
        m(a).insertion_loss_db_per_um
            .total_cmp(&m(b).insertion_loss_db_per_um)
            .then(m(a).footprint_um2.total_cmp(&m(b).footprint_um2))
            .then(a.key.cmp_key(&b.key))
    };
    let best = match rule {
        SelectionRule::MaxJointContrast => ok.into_iter().min_by(|a, b| {
            let ja = m(a).delta_t.min(m(a).delta_p);
            let jb = m(b).delta_t.min(m(b).delta_p);
            jb.total_cmp(&ja).then_with(|| tie_break(a, b))
        }),
        SelectionRule::MinLossAtBits(n) => {
            let best = ok.into_iter().filter(|p| m(p).bits >= n).min_by(|a, b| tie_break(a, b));
            if best.is_none() {
                return Err(Error::Capacity(format!("no design reaches {n} bits")));
            }
            best
        }
    };
    Ok(best.unwrap().clone())
}

pub const POINTS_CSV_HEADER: &str = "material,thickness_nm,width_nm,length_um,insertion_loss_db_per_um,delta_t,delta_p,bits,max_set_energy_nj,footprint_um2,status";

fn csv_field(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// Points as CSV. Floats use the shortest round-trip form, so the file
/// reloads bit-for-bit.
pub fn points_csv<'a>(points: impl IntoIterator<Item = &'a DesignPoint>) -> String {
    let mut out = format!("{POINTS_CSV_HEADER}\n");
    for p in points {
        let k = &p.key;
        out.push_str(&format!(
            "{},{},{},{},",
            csv_field(&k.material),
            k.thickness_nm,
            k.width_nm,
            k.length_um
        ));
        match (&p.metrics, &p.failure) {
            (Some(m), _) => out.push_str(&format!(
                "{},{},{},{},{},{},ok\n",
                m.insertion_loss_db_per_um,
                m.delta_t,
                m.delta_p,
                m.bits,
                m.max_set_energy_nj.map(|e| e.to_string()).unwrap_or_default(),
                m.footprint_um2
            )),
            (None, reason) => out.push_str(&format!(
                ",,,,,,failed: {}\n",
                csv_field(reason.as_deref().unwrap_or("unknown"))
            )),
        }
    }
    out
}

pub fn parse_points_csv(text: &str) -> Result<Vec<DesignPoint>> {
    let mut lines = text.lines();
    if lines.next() != Some(POINTS_CSV_HEADER) {
        return Err(Error::Sweep("points.csv header does not match this version".into()));
    }
    let bad = |n: usize| Error::Sweep(format!("points.csv line {n} is malformed"));
    let mut out = Vec::new();
    for (n, line) in lines.enumerate().map(|(i, l)| (i + 2, l)) {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.splitn(11, ',').collect();
        if f.len() != 11 {
            return Err(bad(n));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n));
        let key = PointKey {
            material: f[0].to_string(),
            thickness_nm: num(f[1])?,
            width_nm: num(f[2])?,
            length_um: num(f[3])?,
        };
        let point = if f[10] == "ok" {
            DesignPoint {
                key,
                metrics: Some(Metrics {
                    insertion_loss_db_per_um: num(f[4])?,
                    delta_t: num(f[5])?,
                    delta_p: num(f[6])?,
                    bits: f[7].parse().map_err(|_| bad(n))?,
                    max_set_energy_nj: if f[8].is_empty() { None } else { Some(num(f[8])?) },
                    footprint_um2: num(f[9])?,
                }),
                failure: None,
            }
        } else if let Some(reason) = f[10].strip_prefix("failed: ") {
            DesignPoint {
                key,
                metrics: None,
                failure: Some(reason.to_string()),
            }
        } else {
            return Err(bad(n));
        };
        out.push(point);
    }
    Ok(out)
}

/// Sweep output directory: `inputs.sha256` plus `points.csv`.
pub struct RunDir {
    dir: PathBuf,
    hash: String,
}

impl RunDir {
    pub fn open(dir: &Path, spec: &SweepSpec, materials_fingerprint: &str) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(RunDir {
            dir: dir.to_path_buf(),
            hash: inputs_hash(spec, materials_fingerprint),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Points from an earlier run with the same inputs; empty otherwise.
    pub fn load(&self) -> Result<Vec<DesignPoint>> {
        let stored = std::fs::read_to_string(self.dir.join("inputs.sha256")).unwrap_or_default();
        if stored.trim() != self.hash {
            return Ok(Vec::new());
        }
        match std::fs::read_to_string(self.dir.join("points.csv")) {
            Ok(text) => parse_points_csv(&text),
            Err(_) => Ok(Vec::new()),
        }
    }

    pub fn store<'a>(&self, points: impl IntoIterator<Item = &'a DesignPoint>) -> Result<()> {
        std::fs::write(self.dir.join("inputs.sha256"), format!("{}\n", self.hash))?;
        let tmp = self.dir.join("points.csv.tmp");
        std::fs::write(&tmp, points_csv(points))?;
        std::fs::rename(tmp, self.dir.join("points.csv"))?;
        Ok(())
    }
}

pub fn inputs_hash(spec: &SweepSpec, materials_fingerprint: &str) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(spec).expect("sweep spec serializes"));
    h.update([0u8]);
    h.update(materials_fingerprint.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(name: &str, t: f64, w: f64, il: f64, dt: f64, dp: f64, bits: u32) -> DesignPoint {
        DesignPoint {
            key: PointKey {
                material: name.into(),
                thickness_nm: t,
                width_nm: w,
                length_um: 2.0,
            },
            metrics: Some(Metrics {
                insertion_loss_db_per_um: il,
                delta_t: dt,
                delta_p: dp,
                bits,
                max_set_energy_nj: None,
                footprint_um2: w * 2e-3,
            }),
            failure: None,
        }
    }

    #[test]
    fn default_grid_cardinality() {
        let spec = SweepSpec::default();
        assert_eq!(spec.keys().unwrap().len(), 9 * 11);
        let spec = SweepSpec {
            materials: vec!["GSST".into(), "GST".into()],
            lengths_um: vec![3.0, 2.0],
            ..SweepSpec::default()
        };
        let keys = spec.keys().unwrap();
        assert_eq!(keys.len(), 2 * 9 * 11 * 2);
        assert_eq!(keys[0].material, "GSST");
        assert_eq!(keys[1].length_um, 3.0);
    }

    #[test]
    fn metric_names_parse() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("speed".parse::<Metric>().unwrap_err().is_config());
        assert_eq!(
            "min_loss_at_bits(4)".parse::<SelectionRule>().unwrap(),
            SelectionRule::MinLossAtBits(4)
        );
        assert!("best".parse::<SelectionRule>().is_err());
    }

    #[test]
    fn dominated_point_is_dropped() {
        let a = point("GST", 20.0, 470.0, 0.1, 0.9, 0.9, 5);
        let b = point("GST", 25.0, 470.0, 0.2, 0.8, 0.8, 4);
        let obj = [Objective::min(Metric::InsertionLoss), Objective::max(Metric::DeltaT)];
        let front = pareto_front(&[a.clone(), b], &obj).unwrap();
        assert_eq!(front, vec![a]);
    }

    #[test]
    fn failed_points_are_excluded_from_front() {
        let mut f = point("GST", 30.0, 470.0, 0.0, 1.0, 1.0, 6);
        f.metrics = None;
        f.failure = Some("solver".into());
        let a = point("GST", 20.0, 470.0, 0.1, 0.9, 0.9, 5);
        let front = pareto_front(&[f, a.clone()], &[Objective::min(Metric::InsertionLoss)]).unwrap();
        assert_eq!(front, vec![a]);
    }

    #[test]
    fn missing_metric_is_a_config_error() {
        let a = point("GST", 20.0, 470.0, 0.1, 0.9, 0.9, 5);
        let err = pareto_front(&[a], &[Objective::min(Metric::MaxSetEnergy)]).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn joint_contrast_selection_and_ties() {
        let a = point("GST", 25.0, 470.0, 0.1, 0.9, 0.8, 5);
        let b = point("GST", 20.0, 470.0, 0.1, 0.85, 0.85, 5);
        let pick = select_design(&[a.clone(), b.clone()], SelectionRule::MaxJointContrast).unwrap();
        assert_eq!(pick.key, b.key);
        // Identical metric vectors: the earlier point in grid order wins.
        let mut c = b.clone();
        c.key.width_nm = 460.0;
        let pick1 = select_design(&[b.clone(), c.clone()], SelectionRule::MaxJointContrast).unwrap();
        let pick2 = select_design(&[c.clone(), b.clone()], SelectionRule::MaxJointContrast).unwrap();
        assert_eq!(pick1.key.width_nm, 460.0);
        assert_eq!(pick1, pick2);
    }

    #[test]
    fn min_loss_at_bits_capacity_error() {
        let a = point("GST", 20.0, 470.0, 0.1, 0.5, 0.5, 5);
        let err = select_design(std::slice::from_ref(&a), SelectionRule::MinLossAtBits(6)).unwrap_err();
        assert!(matches!(err, Error::Capacity(_)));
        assert_eq!(select_design(std::slice::from_ref(&a), SelectionRule::MinLossAtBits(5)).unwrap(), a);
    }

    #[test]
    fn points_csv_round_trip() {
        let mut f = point("GSST", 10.0, 400.0, 0.0, 0.0, 0.0, 0);
        f.metrics = None;
        f.failure = Some("no guided mode, n_eff 1.2".into());
        let mut e = point("GST", 20.0, 470.0, 0.103_287_1, 0.847_9, 0.844_3, 5);
        e.metrics.as_mut().unwrap().max_set_energy_nj = Some(5.88);
        let pts = vec![e, f];
        let text = points_csv(&pts);
        let back = parse_points_csv(&text).unwrap();
        assert_eq!(back[0], pts[0]);
        assert_eq!(back[1].failure.as_deref(), Some("no guided mode; n_eff 1.2"));
        assert_eq!(points_csv(&back), text);
    }

    #[test]
    fn range_values_include_stop() {
        assert_eq!(GridRange::new(10.0, 50.0, 5.0).values().unwrap().len(), 9);
        assert_eq!(
            GridRange::new(400.0, 600.0, 20.0).values().unwrap().last(),
            Some(&600.0)
        );
        assert!(GridRange::new(1.0, 0.0, 1.0).values().is_err());
        assert!(GridRange::new(0.0, 1.0, 0.0).values().is_err());
    }
}
