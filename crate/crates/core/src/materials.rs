//! Optical and thermal constants for phase-change and passive materials.
//!
//! Complex refractive indices use the `n - iκ` convention together with an
//! `exp(+iωt)` time dependence, so a field travelling as `exp(i(ωt - k0·ñ·z))`
//! decays for κ > 0. The permittivity is `ε = (n - iκ)²`.
//!
//! The shipped table lives in `data/materials.json`; every row carries a
//! source tag resolved through the material's `sources` map.

use std::collections::BTreeMap;
use std::f64::consts::{LN_10, PI};
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Built-in material database, compiled into the binary.
pub const BUILTIN_MATERIALS_JSON: &str = include_str!("../data/materials.json");

/// Fraction of the PCM volume in the crystalline state.
///
/// 0 is fully amorphous and 1 is fully crystalline.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct CrystallizationFraction(f64);

impl CrystallizationFraction {
    pub const AMORPHOUS: Self = CrystallizationFraction(0.0);
    pub const CRYSTALLINE: Self = CrystallizationFraction(1.0);

    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("crystallization fraction {p} outside [0, 1]")));
        }
        Ok(CrystallizationFraction(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Amorphous,
    Crystalline,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Amorphous => f.write_str("amorphous"),
            Phase::Crystalline => f.write_str("crystalline"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpticalSample {
    pub wavelength_nm: f64,
    pub n: f64,
    pub kappa: f64,
}

impl OpticalSample {
    /// Complex index `n - iκ`.
    pub fn index(&self) -> Complex64 {
        Complex64::new(self.n, -self.kappa)
    }
}

/// (λ, n, κ) samples sorted strictly ascending in wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalTable {
    samples: Vec<OpticalSample>,
}

impl OpticalTable {
    pub fn new(samples: Vec<OpticalSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::MaterialData("optical table is empty".into()));
        }
        for s in &samples {
            if !(s.wavelength_nm > 0.0 && s.n > 0.0 && s.kappa >= 0.0) || !s.n.is_finite() || !s.kappa.is_finite() {
                return Err(Error::MaterialData(format!(
                    "invalid sample at {} nm (n = {}, k = {})",
                    s.wavelength_nm, s.n, s.kappa
                )));
            }
        }
        if samples.windows(2).any(|w| w[1].wavelength_nm <= w[0].wavelength_nm) {
            return Err(Error::MaterialData(
                "optical table must be strictly ascending in wavelength".into(),
            ));
        }
        Ok(OpticalTable { samples })
    }

    pub fn samples(&self) -> &[OpticalSample] {
        &self.samples
    }

    pub fn span_nm(&self) -> (f64, f64) {
        (
            self.samples[0].wavelength_nm,
            self.samples[self.samples.len() - 1].wavelength_nm,
        )
    }

    /// Piecewise-linear interpolation of n and κ; `None` outside the span.
    pub fn interpolate(&self, wavelength_nm: f64) -> Option<Complex64> {
        let (lo, hi) = self.span_nm();
        if !(wavelength_nm >= lo && wavelength_nm <= hi) {
            return None;
        }
        let upper = self.samples.partition_point(|s| s.wavelength_nm < wavelength_nm);
        let right = self.samples[upper];
        if right.wavelength_nm == wavelength_nm {
            return Some(right.index());
        }
        let left = self.samples[upper - 1];
        let t = (wavelength_nm - left.wavelength_nm) / (right.wavelength_nm - left.wavelength_nm);
        let n = left.n + t * (right.n - left.n);
        let kappa = left.kappa + t * (right.kappa - left.kappa);
        Some(Complex64::new(n, -kappa))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpticalData {
    /// Passive material with a single table.
    Static(OpticalTable),
    PhaseChange {
        amorphous: OpticalTable,
        crystalline: OpticalTable,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermalProperties {
    /// W/(m·K) in the amorphous (or only) state.
    pub conductivity_amorphous: f64,
    /// W/(m·K) in the crystalline state.
    pub conductivity_crystalline: f64,
    /// kg/m³
    pub density: f64,
    /// J/(kg·K)
    pub specific_heat: f64,
}

impl ThermalProperties {
    pub fn conductivity(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Amorphous => self.conductivity_amorphous,
            Phase::Crystalline => self.conductivity_crystalline,
        }
    }

    /// Volumetric heat capacity ρ·c_p in J/(m³·K).
    pub fn heat_capacity(&self) -> f64 {
        self.density * self.specific_heat
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialRecord {
    pub name: String,
    pub optical: OpticalData,
    /// Crystallization temperature (K), PCMs only.
    pub t_g_k: Option<f64>,
    /// Melting temperature (K), PCMs only.
    pub t_l_k: Option<f64>,
    pub thermal: ThermalProperties,
    pub sources: BTreeMap<String, String>,
}

impl MaterialRecord {
    pub fn is_pcm(&self) -> bool {
        matches!(self.optical, OpticalData::PhaseChange { .. })
    }

    fn table(&self, phase: Phase) -> &OpticalTable {
        match (&self.optical, phase) {
            (OpticalData::Static(t), _) => t,
            (OpticalData::PhaseChange { amorphous, .. }, Phase::Amorphous) => amorphous,
            (OpticalData::PhaseChange { crystalline, .. }, Phase::Crystalline) => crystalline,
        }
    }

    /// Wavelength span over which every table of this material is defined.
    pub fn span_nm(&self) -> (f64, f64) {
        match &self.optical {
            OpticalData::Static(t) => t.span_nm(),
            OpticalData::PhaseChange { amorphous, crystalline } => {
                let (a0, a1) = amorphous.span_nm();
                let (c0, c1) = crystalline.span_nm();
                (a0.max(c0), a1.min(c1))
            }
        }
    }

    /// Complex index `n - iκ` of one phase. Passive materials ignore `phase`.
    pub fn lookup_nk(&self, phase: Phase, wavelength_nm: f64) -> Result<Complex64> {
        let table = self.table(phase);
        table.interpolate(wavelength_nm).ok_or_else(|| {
            let (min_nm, max_nm) = table.span_nm();
            Error::WavelengthRange {
                material: self.name.clone(),
                wavelength_nm,
                min_nm,
                max_nm,
            }
        })
    }

    /// Index of a partially crystallized film from the Lorentz–Lorenz
    /// mixing rule applied to the two endpoint permittivities.
    ///
    /// At p = 0 and p = 1 the table values are returned unchanged.
    pub fn effective_index(&self, p: CrystallizationFraction, wavelength_nm: f64) -> Result<Complex64> {
        let amorphous = self.lookup_nk(Phase::Amorphous, wavelength_nm)?;
        let crystalline = self.lookup_nk(Phase::Crystalline, wavelength_nm)?;
        let p = p.value();
        if p == 0.0 {
            return Ok(amorphous);
        }
        if p == 1.0 {
            return Ok(crystalline);
        }
        let eps = lorentz_lorenz_mix(amorphous * amorphous, crystalline * crystalline, p);
        Ok(index_from_permittivity(eps))
    }
}

/// Lorentz–Lorenz (Clausius–Mossotti) mixing of two permittivities with
/// volume fraction `p` of the second.
pub fn lorentz_lorenz_mix(eps_a: Complex64, eps_c: Complex64, p: f64) -> Complex64 {
    let pol = |e: Complex64| (e - 1.0) / (e + 2.0);
    let mixed = pol(eps_c) * p + pol(eps_a) * (1.0 - p);
    (mixed * 2.0 + 1.0) / (-mixed + 1.0)
}

/// Square root of a permittivity on the branch with Re(n) > 0, giving `n - iκ`.
pub fn index_from_permittivity(eps: Complex64) -> Complex64 {
    let root = eps.sqrt();
    if root.re < 0.0 {
        -root
    } else {
        root
    }
}

/// Power attenuation in dB/µm for extinction coefficient `kappa` at
/// `wavelength_nm`: 40π·κ / (λ·ln 10) with λ in µm.
pub fn absorption_db_per_um(kappa: f64, wavelength_nm: f64) -> Result<f64> {
    if kappa < 0.0 || kappa.is_nan() {
        return Err(Error::Domain(format!("extinction coefficient {kappa} < 0")));
    }
    if !(wavelength_nm > 0.0) {
        return Err(Error::Domain(format!("wavelength {wavelength_nm} nm <= 0")));
    }
    if kappa == 0.0 {
        return Ok(0.0);
    }
    Ok(40.0 * PI * kappa / (wavelength_nm * 1e-3 * LN_10))
}

// On-disk schema. Kept separate from the validated types above.

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct DbFile {
    #[serde(default)]
    version: Option<String>,
    materials: Vec<MaterialFile>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct MaterialFile {
    name: String,
    #[serde(default)]
    sources: BTreeMap<String, String>,
    phases: PhasesFile,
    #[serde(rename = "T_g_K", default)]
    t_g_k: Option<f64>,
    #[serde(rename = "T_l_K", default)]
    t_l_k: Option<f64>,
    thermal: ThermalFile,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct PhasesFile {
    #[serde(default)]
    amorphous: Option<Vec<SampleFile>>,
    #[serde(default)]
    crystalline: Option<Vec<SampleFile>>,
    #[serde(rename = "static", default)]
    single: Option<Vec<SampleFile>>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SampleFile {
    wl_nm: f64,
    n: f64,
    k: f64,
    #[serde(default)]
    src: Option<String>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
enum Conductivity {
    Single(f64),
    PerPhase { amorphous: f64, crystalline: f64 },
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ThermalFile {
    #[serde(rename = "k_W_mK")]
    k_w_mk: Conductivity,
    rho_kg_m3: f64,
    #[serde(rename = "cp_J_kgK")]
    cp_j_kgk: f64,
    #[serde(default)]
    src: Option<String>,
}

fn convert_table(
    name: &str,
    phase: &str,
    rows: &[SampleFile],
    sources: &BTreeMap<String, String>,
) -> Result<OpticalTable> {
    for row in rows {
        if let Some(tag) = &row.src {
            if !sources.contains_key(tag) {
                return Err(Error::MaterialData(format!(
                    "{name}/{phase}: source tag `{tag}` not declared in `sources`"
                )));
            }
        }
    }
    let samples = rows
        .iter()
        .map(|r| OpticalSample {
            wavelength_nm: r.wl_nm,
            n: r.n,
            kappa: r.k,
        })
        .collect();
    OpticalTable::new(samples).map_err(|e| Error::MaterialData(format!("{name}/{phase}: {e}")))
}

impl MaterialFile {
    fn into_record(self) -> Result<MaterialRecord> {
        let name = self.name;
        let p = &self.phases;
        let optical = match (&p.amorphous, &p.crystalline, &p.single) {
            (Some(a), Some(c), None) => OpticalData::PhaseChange {
                amorphous: convert_table(&name, "amorphous", a, &self.sources)?,
                crystalline: convert_table(&name, "crystalline", c, &self.sources)?,
            },
            (None, None, Some(s)) => OpticalData::Static(convert_table(&name, "static", s, &self.sources)?),
            _ => {
                return Err(Error::MaterialData(format!(
                    "{name}: phases must hold either `amorphous` and `crystalline`, or `static` alone"
                )))
            }
        };
        let (ka, kc) = match self.thermal.k_w_mk {
            Conductivity::Single(k) => (k, k),
            Conductivity::PerPhase { amorphous, crystalline } => (amorphous, crystalline),
        };
        let thermal = ThermalProperties {
            conductivity_amorphous: ka,
            conductivity_crystalline: kc,
            density: self.thermal.rho_kg_m3,
            specific_heat: self.thermal.cp_j_kgk,
        };
        if ![ka, kc, thermal.density, thermal.specific_heat]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
        {
            return Err(Error::MaterialData(format!(
                "{name}: thermal constants must be positive"
            )));
        }
        let record = MaterialRecord {
            name,
            optical,
            t_g_k: self.t_g_k,
            t_l_k: self.t_l_k,
            thermal,
            sources: self.sources,
        };
        if record.is_pcm() {
            let (tg, tl) = match (record.t_g_k, record.t_l_k) {
                (Some(g), Some(l)) => (g, l),
                _ => {
                    return Err(Error::MaterialData(format!(
                        "{}: phase-change materials need T_g_K and T_l_K",
                        record.name
                    )))
                }
            };
            if !(tl > tg) {
                return Err(Error::MaterialData(format!(
                    "{}: T_l ({tl} K) must exceed T_g ({tg} K)",
                    record.name
                )));
            }
            let (lo, hi) = record.span_nm();
            if lo > 1500.0 || hi < 1600.0 {
                return Err(Error::MaterialData(format!(
                    "{}: phase tables must cover 1500-1600 nm, got {lo}-{hi} nm",
                    record.name
                )));
            }
        }
        Ok(record)
    }
}

/// A loaded, validated set of materials. Read-only after construction.
#[derive(Debug, Clone)]
pub struct MaterialDb {
    version: Option<String>,
    records: Vec<MaterialRecord>,
}

impl MaterialDb {
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_MATERIALS_JSON).expect("built-in material table is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("materials", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DbFile = serde_json::from_str(text).map_err(|e| Error::Config {
            key: "materials".into(),
            message: e.to_string(),
            line: Some(e.line()),
        })?;
        let mut records = Vec::with_capacity(file.materials.len());
        for m in file.materials {
            let record = m.into_record()?;
            if records.iter().any(|r: &MaterialRecord| r.name == record.name) {
                return Err(Error::MaterialData(format!("duplicate material `{}`", record.name)));
            }
            records.push(record);
        }
        Ok(MaterialDb {
            version: file.version,
            records,
        })
    }

    pub fn version(&self) -> Option<&str> {
        self.version.as_deref()
    }

    pub fn get(&self, name: &str) -> Result<&MaterialRecord> {
        self.records
            .iter()
            .find(|r| r.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }

    pub fn records(&self) -> &[MaterialRecord] {
        &self.records
    }

    /// Replaces the thermal constants of one material.
    pub fn with_thermal(mut self, name: &str, thermal: ThermalProperties) -> Result<Self> {
        let idx = self
            .records
            .iter()
            .position(|r| r.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))?;
        self.records[idx].thermal = thermal;
        Ok(self)
    }
}
