//! Cross-section description and rasterization onto the solver grid.
//!
//! Coordinates: x is horizontal with the waveguide centered at x = 0; y is
//! vertical with the bottom of the silicon core at y = 0. The window spans
//! `[-W/2, W/2] × [-substrate_depth, H - substrate_depth]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::{CrystallizationFraction, MaterialDb, Phase};

/// Minimum cladding on every side of the core + PCM stack, in nm.
pub const MIN_MARGIN_NM: f64 = 1000.0;

fn d_wg_height() -> f64 {
    220.0
}
fn d_core() -> String {
    "Si".into()
}
fn d_oxide() -> String {
    "SiO2".into()
}
fn d_window_w() -> f64 {
    4.0
}
fn d_window_h() -> f64 {
    3.0
}
fn d_substrate_depth() -> f64 {
    1.2
}
fn d_pitch() -> f64 {
    10.0
}
fn d_wg_width() -> f64 {
    470.0
}
fn d_pcm_thickness() -> f64 {
    20.0
}

/// Strip waveguide with a PCM film of the same (or given) width on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossSection {
    #[serde(default = "d_wg_width")]
    pub wg_width_nm: f64,
    #[serde(default = "d_wg_height")]
    pub wg_height_nm: f64,
    /// Defaults to the waveguide width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pcm_width_nm: Option<f64>,
    #[serde(default = "d_pcm_thickness")]
    pub pcm_thickness_nm: f64,
    #[serde(default = "d_core")]
    pub core_material: String,
    #[serde(default = "d_oxide")]
    pub cladding_material: String,
    #[serde(default = "d_oxide")]
    pub substrate_material: String,
    #[serde(default = "d_window_w")]
    pub window_width_um: f64,
    #[serde(default = "d_window_h")]
    pub window_height_um: f64,
    /// Oxide below the core bottom that lies inside the window.
    #[serde(default = "d_substrate_depth")]
    pub substrate_depth_um: f64,
    #[serde(default = "d_pitch")]
    pub grid_pitch_nm: f64,
}

impl Default for CrossSection {
    fn default() -> Self {
        CrossSection::new(d_wg_width(), d_pcm_thickness())
    }
}

impl CrossSection {
    /// Default stack (220 nm SOI, oxide cladding, 4 µm × 3 µm window, 10 nm grid).
    pub fn new(wg_width_nm: f64, pcm_thickness_nm: f64) -> Self {
        CrossSection {
            wg_width_nm,
            wg_height_nm: d_wg_height(),
            pcm_width_nm: None,
            pcm_thickness_nm,
            core_material: d_core(),
            cladding_material: d_oxide(),
            substrate_material: d_oxide(),
            window_width_um: d_window_w(),
            window_height_um: d_window_h(),
            substrate_depth_um: d_substrate_depth(),
            grid_pitch_nm: d_pitch(),
        }
    }

    pub fn with_pitch(mut self, pitch_nm: f64) -> Self {
        self.grid_pitch_nm = pitch_nm;
        self
    }

    pub fn pcm_width(&self) -> f64 {
        self.pcm_width_nm.unwrap_or(self.wg_width_nm)
    }

    /// Top of the PCM film (or of the core when there is no film), nm.
    pub fn stack_top_nm(&self) -> f64 {
        self.wg_height_nm + self.pcm_thickness_nm
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wg_width_nm", self.wg_width_nm),
            ("wg_height_nm", self.wg_height_nm),
            ("pcm_width_nm", self.pcm_width()),
            ("window_width_um", self.window_width_um),
            ("window_height_um", self.window_height_um),
            ("substrate_depth_um", self.substrate_depth_um),
            ("grid_pitch_nm", self.grid_pitch_nm),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Geometry(format!("{key} must be > 0, got {v}")));
            }
        }
        if !(self.pcm_thickness_nm.is_finite() && self.pcm_thickness_nm >= 0.0) {
            return Err(Error::Geometry(format!(
                "pcm_thickness_nm must be >= 0, got {}",
                self.pcm_thickness_nm
            )));
        }
        if self.pcm_thickness_nm > 0.0 && self.grid_pitch_nm > self.pcm_thickness_nm.min(20.0) + 1e-9 {
            return Err(Error::Geometry(format!(
                "grid_pitch_nm {} does not resolve a {} nm film (need <= min(thickness, 20 nm))",
                self.grid_pitch_nm, self.pcm_thickness_nm
            )));
        }
        let half_w = 0.5 * self.wg_width_nm.max(self.pcm_width());
        let window_w = self.window_width_um * 1e3;
        let window_h = self.window_height_um * 1e3;
        let below = self.substrate_depth_um * 1e3;
        let above = window_h - below - self.stack_top_nm();
        let side = 0.5 * window_w - half_w;
        for (edge, margin) in [("side", side), ("bottom", below), ("top", above)] {
            if margin < MIN_MARGIN_NM - 1e-9 {
                return Err(Error::Geometry(format!(
                    "window leaves {margin:.0} nm of cladding at the {edge}; at least {MIN_MARGIN_NM} nm required"
                )));
            }
        }
        Ok(())
    }
}

/// Material region of a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Substrate,
    Cladding,
    Core,
    Pcm,
}

/// Uniform pixel grid; pixel `(i, j)` is stored at `j * nx + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub pitch_nm: f64,
    /// Left edge of the window, nm.
    pub x_min_nm: f64,
    /// Bottom edge of the window, nm.
    pub y_min_nm: f64,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x_center_nm(&self, i: usize) -> f64 {
        self.x_min_nm + (i as f64 + 0.5) * self.pitch_nm
    }

    pub fn y_center_nm(&self, j: usize) -> f64 {
        self.y_min_nm + (j as f64 + 0.5) * self.pitch_nm
    }

    /// Column range covered by a rectangle of `width_nm` centered at x = 0.
    /// Edges falling exactly on a pixel center round outward, which keeps
    /// the raster mirror-symmetric.
    pub fn centered_columns(&self, width_nm: f64) -> std::ops::Range<usize> {
        let g = 0.5 * self.nx as f64;
        let half = 0.5 * width_nm / self.pitch_nm;
        let lo = (g - half - 0.5).ceil().max(0.0) as usize;
        let hi = ((g + half + 0.5).floor() as usize).min(self.nx);
        lo..hi.max(lo)
    }

    /// Row range covered by `[y0, y1)`; edges round half up.
    pub fn rows(&self, y0_nm: f64, y1_nm: f64) -> std::ops::Range<usize> {
        let to_line = |y: f64| {
            let v = ((y - self.y_min_nm) / self.pitch_nm + 0.5 + 1e-9).floor();
            v.clamp(0.0, self.ny as f64) as usize
        };
        let lo = to_line(y0_nm);
        let hi = to_line(y1_nm);
        lo..hi.max(lo)
    }

    /// Grid for a cross-section window.
    pub fn for_window(width_um: f64, height_um: f64, depth_um: f64, pitch_nm: f64) -> Self {
        let nx = (width_um * 1e3 / pitch_nm).round() as usize;
        let ny = (height_um * 1e3 / pitch_nm).round() as usize;
        Grid {
            nx,
            ny,
            pitch_nm,
            x_min_nm: -0.5 * nx as f64 * pitch_nm,
            y_min_nm: -(depth_um * 1e3 / pitch_nm).round() * pitch_nm,
        }
    }
}

/// Complex refractive index (`n - iκ`) on the solver grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexMap {
    pub grid: Grid,
    pub index: Vec<Complex64>,
    pub region: Vec<Region>,
}

impl IndexMap {
    /// Map filled with one index; useful for solver checks.
    pub fn uniform(grid: Grid, index: Complex64) -> Self {
        let n = grid.len();
        IndexMap {
            grid,
            index: vec![index; n],
            region: vec![Region::Cladding; n],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.index[j * self.grid.nx + i]
    }

    pub fn pcm_pixel_count(&self) -> usize {
        self.region.iter().filter(|r| **r == Region::Pcm).count()
    }

    /// Largest real index in the map.
    pub fn max_index(&self) -> f64 {
        self.index.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest real index on the window boundary.
    pub fn boundary_index(&self) -> f64 {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut best = f64::NEG_INFINITY;
        for i in 0..nx {
            best = best.max(self.at(i, 0).re).max(self.at(i, ny - 1).re);
        }
        for j in 0..ny {
            best = best.max(self.at(0, j).re).max(self.at(nx - 1, j).re);
        }
        best
    }

    /// Paints the rectangle `[x0, x1) × [y0, y1)` (nm). Pixels cut by an
    /// edge get the area-weighted mean permittivity, so sub-pitch changes in
    /// thickness or width still move the mode. Region labels follow the
    /// `centered_columns`/`rows` rounding.
    fn paint(&mut self, x: (f64, f64), y: (f64, f64), value: Complex64, region: Region) {
        let g = self.grid.clone();
        let eps = value * value;
        let edge_x = |i: usize| (i as f64 - 0.5 * g.nx as f64) * g.pitch_nm;
        let edge_y = |j: usize| g.y_min_nm + j as f64 * g.pitch_nm;
        let overlap = |lo: f64, hi: f64, a: f64, b: f64| ((hi.min(b) - lo.max(a)) / g.pitch_nm).clamp(0.0, 1.0);
        for j in 0..g.ny {
            let fy = overlap(y.0, y.1, edge_y(j), edge_y(j + 1));
            if fy == 0.0 {
                continue;
            }
            for i in 0..g.nx {
                let f = fy * overlap(x.0, x.1, edge_x(i), edge_x(i + 1));
                let k = j * g.nx + i;
                if f == 1.0 {
                    self.index[k] = value;
                } else if f > 0.0 {
                    let old = self.index[k] * self.index[k];
                    self.index[k] = (old * (1.0 - f) + eps * f).sqrt();
                }
            }
        }
        let width = x.1 - x.0;
        for j in g.rows(y.0, y.1) {
            for i in g.centered_columns(width) {
                self.region[j * g.nx + i] = region;
            }
        }
    }
}

/// Rasterizes the cross-section at one wavelength. PCM pixels take the
/// effective index of `pcm_material` at crystallization fraction `p`.
///
/// The heater is not part of the optical map; it sits above the spacer where
/// the guided field has decayed by many orders of magnitude.
pub fn build_index_map(
    db: &MaterialDb,
    xs: &CrossSection,
    pcm_material: &str,
    wavelength_nm: f64,
    p: CrystallizationFraction,
) -> Result<IndexMap> {
    xs.validate()?;
    let grid = Grid::for_window(
        xs.window_width_um,
        xs.window_height_um,
        xs.substrate_depth_um,
        xs.grid_pitch_nm,
    );
    let cladding = db
        .get(&xs.cladding_material)?
        .lookup_nk(Phase::Amorphous, wavelength_nm)?;
    let substrate = db
        .get(&xs.substrate_material)?
        .lookup_nk(Phase::Amorphous, wavelength_nm)?;
    let core = db.get(&xs.core_material)?.lookup_nk(Phase::Amorphous, wavelength_nm)?;

    let mut map = IndexMap::uniform(grid.clone(), cladding);
    let half_window = 0.5 * grid.nx as f64 * grid.pitch_nm;
    map.paint(
        (-half_window, half_window),
        (grid.y_min_nm, 0.0),
        substrate,
        Region::Substrate,
    );
    let half = 0.5 * xs.wg_width_nm;
    map.paint((-half, half), (0.0, xs.wg_height_nm), core, Region::Core);
    if xs.pcm_thickness_nm > 0.0 {
        let pcm = db.get(pcm_material)?;
        if !pcm.is_pcm() {
            return Err(Error::Geometry(format!(
                "`{}` is not a phase-change material",
                pcm.name
            )));
        }
        let value = pcm.effective_index(p, wavelength_nm)?;
        let half = 0.5 * xs.pcm_width();
        map.paint((-half, half), (xs.wg_height_nm, xs.stack_top_nm()), value, Region::Pcm);
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db() -> MaterialDb {
        MaterialDb::builtin()
    }

    #[test]
    fn default_window_dimensions() {
        let xs = CrossSection::new(470.0, 20.0);
        let map = build_index_map(&db(), &xs, "GST", 1550.0, CrystallizationFraction::AMORPHOUS).unwrap();
        assert_eq!((map.grid.nx, map.grid.ny), (400, 300));
        assert!(map.index.iter().all(|c| c.re.is_finite() && c.im.is_finite()));
    }

    #[test]
    fn zero_thickness_matches_bare_waveguide() {
        let bare = CrossSection::new(470.0, 0.0);
        let a = build_index_map(&db(), &bare, "GST", 1550.0, CrystallizationFraction::AMORPHOUS).unwrap();
        let b = build_index_map(&db(), &bare, "GSST", 1550.0, CrystallizationFraction::CRYSTALLINE).unwrap();
        assert_eq!(a.pcm_pixel_count(), 0);
        assert_eq!(a, b);
    }

    #[test]
    fn phase_only_changes_pcm_pixels() {
        let xs = CrossSection::new(470.0, 30.0);
        let a = build_index_map(&db(), &xs, "GST", 1550.0, CrystallizationFraction::AMORPHOUS).unwrap();
        let c = build_index_map(&db(), &xs, "GST", 1550.0, CrystallizationFraction::CRYSTALLINE).unwrap();
        let g = &a.grid;
        let cols = g.centered_columns(470.0);
        let rows = g.rows(220.0, 250.0);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = j * g.nx + i;
                let near = (cols.start.saturating_sub(1)..=cols.end).contains(&i)
                    && (rows.start.saturating_sub(1)..=rows.end).contains(&j);
                if a.region[k] == Region::Pcm {
                    assert_ne!(a.index[k], c.index[k]);
                } else if !near {
                    assert_eq!(a.index[k], c.index[k]);
                }
            }
        }
    }

    #[test]
    fn pcm_pixel_count_matches_rasterization_arithmetic() {
        for (w, t, pitch) in [
            (470.0, 20.0, 10.0),
            (400.0, 15.0, 5.0),
            (530.0, 35.0, 10.0),
            (600.0, 50.0, 20.0),
        ] {
            let xs = CrossSection::new(w, t).with_pitch(pitch);
            let map = build_index_map(&db(), &xs, "GST", 1550.0, CrystallizationFraction::AMORPHOUS).unwrap();
            let cols = map.grid.centered_columns(w).len() as i64;
            let rows = map.grid.rows(220.0, 220.0 + t).len() as i64;
            let ideal_c = (w / pitch).round() as i64;
            let ideal_r = (t / pitch).round() as i64;
            assert!((cols - ideal_c).abs() <= 1, "{w}: {cols} vs {ideal_c}");
            assert!((rows - ideal_r).abs() <= 1, "{t}: {rows} vs {ideal_r}");
            assert_eq!(map.pcm_pixel_count() as i64, cols * rows);
        }
    }

    #[test]
    fn partial_rows_blend_permittivity() {
        // 15 nm of PCM on a 10 nm pitch: one full row and one half-covered row.
        let xs = CrossSection::new(470.0, 15.0);
        let map = build_index_map(&db(), &xs, "GST", 1550.0, CrystallizationFraction::CRYSTALLINE).unwrap();
        let g = &map.grid;
        let (i, j) = (g.nx / 2, g.rows(220.0, 230.0).start);
        let pcm = db().get("GST").unwrap().lookup_nk(Phase::Crystalline, 1550.0).unwrap();
        let clad = db().get("SiO2").unwrap().lookup_nk(Phase::Amorphous, 1550.0).unwrap();
        assert_eq!(map.at(i, j), pcm);
        let blended = map.at(i, j + 1) * map.at(i, j + 1);
        let expect = 0.5 * (pcm * pcm + clad * clad);
        assert!((blended - expect).norm() < 1e-12);
        assert_eq!(map.at(i, j + 2), clad);
    }

    #[test]
    fn raster_is_mirror_symmetric() {
        for w in [400.0, 410.0, 470.0, 555.0] {
            let xs = CrossSection::new(w, 20.0);
            let map = build_index_map(&db(), &xs, "GST", 1550.0, CrystallizationFraction::AMORPHOUS).unwrap();
            let nx = map.grid.nx;
            for j in 0..map.grid.ny {
                for i in 0..nx / 2 {
                    assert_eq!(map.at(i, j), map.at(nx - 1 - i, j));
                }
            }
        }
    }

    #[test]
    fn window_too_small_is_rejected() {
        let mut xs = CrossSection::new(470.0, 20.0);
        xs.window_width_um = 2.0;
        let err = build_index_map(&db(), &xs, "GST", 1550.0, CrystallizationFraction::AMORPHOUS).unwrap_err();
        assert!(err.is_config(), "{err}");
        let mut xs = CrossSection::new(470.0, 10.0);
        xs.grid_pitch_nm = 20.0;
        assert!(xs.validate().is_err());
    }
}
