//! Semi-vectorial finite-difference mode solver for the waveguide + PCM
//! cross-section.
//!
//! The dominant field component is Ex (TE-like). On the pixel grid the
//! operator
//!
//! ```text
//! ∂x[(1/ε) ∂x(ε Ex)] + ∂y² Ex + k0² ε Ex = β² Ex
//! ```
//!
//! is discretized with a 5-point stencil, face permittivities taken as the
//! arithmetic mean of the two neighbours, and Ex = 0 just outside the window.
//! The fundamental mode is the eigenpair nearest to a shift placed just below
//! the largest index in the map.

mod eigen;
mod geometry;

pub use eigen::{shift_invert, EigenPair, ShiftInvertOptions};
pub use geometry::{build_index_map, CrossSection, Grid, IndexMap, Region, MIN_MARGIN_NM};

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{Csr, SparseBuilder};
use crate::materials::absorption_db_per_um;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    TeLike,
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TE-like")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// The shift sits at `shift_factor × max(Re n)` in index units.
    pub shift_factor: f64,
    pub eigen: ShiftInvertOptions,
    /// Solve only the left half of a mirror-symmetric map, with a symmetry
    /// wall on the centre line. The fundamental mode is even, so the result
    /// is the same as the full solve at about a third of the cost.
    pub use_symmetry: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            shift_factor: 0.999,
            eigen: ShiftInvertOptions::default(),
            use_symmetry: true,
        }
    }
}

/// Guided mode of an index map.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    /// Complex effective index, `n - iκ` convention (Im ≤ 0 for a lossy mode).
    pub n_eff: Complex64,
    /// |Ex| on the grid, scaled so the sum of squares is 1.
    pub field: Vec<f64>,
    pub polarization: Polarization,
    pub grid: Grid,
    /// Highest real index touching the window boundary.
    pub n_cladding: f64,
    /// Highest real index anywhere in the map.
    pub n_max: f64,
    pub residual: f64,
    pub solves: usize,
}

impl ModeSolution {
    /// Modal extinction coefficient, `-Im(n_eff)`.
    pub fn kappa_eff(&self) -> f64 {
        -self.n_eff.im
    }

    pub fn field_at(&self, i: usize, j: usize) -> f64 {
        self.field[j * self.grid.nx + i]
    }

    /// Largest |E(x) - E(-x)| relative to the field maximum.
    pub fn mirror_asymmetry(&self) -> f64 {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let peak = self.field.iter().cloned().fold(0.0, f64::max);
        let mut worst: f64 = 0.0;
        for j in 0..ny {
            for i in 0..nx / 2 {
                worst = worst.max((self.field_at(i, j) - self.field_at(nx - 1 - i, j)).abs());
            }
        }
        worst / peak
    }

    /// Field grid as CSV: `x_nm,y_nm,abs_ex` per pixel.
    pub fn field_csv(&self) -> String {
        let mut out = String::from("x_nm,y_nm,abs_ex\n");
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                out.push_str(&format!(
                    "{},{},{:.9e}\n",
                    self.grid.x_center_nm(i),
                    self.grid.y_center_nm(j),
                    self.field_at(i, j)
                ));
            }
        }
        out
    }
}

fn wavenumber_per_um(wavelength_nm: f64) -> f64 {
    2.0 * PI / (wavelength_nm * 1e-3)
}

/// Assembles the semi-vectorial TE operator; lengths in µm.
pub fn assemble_operator(map: &IndexMap, wavelength_nm: f64) -> Csr<Complex64> {
    assemble_columns(map, wavelength_nm, map.grid.nx, false)
}

/// Operator on the first `cols` columns. With `mirror_right` the last column
/// faces its own mirror image, so no flux crosses that face.
fn assemble_columns(map: &IndexMap, wavelength_nm: f64, cols: usize, mirror_right: bool) -> Csr<Complex64> {
    let Grid { nx, ny, pitch_nm, .. } = map.grid;
    let h = pitch_nm * 1e-3;
    let inv_h2 = 1.0 / (h * h);
    let k0 = wavenumber_per_um(wavelength_nm);
    let eps = |i: usize, j: usize| map.index[j * nx + i] * map.index[j * nx + i];
    let n = cols * ny;
    let mut b = SparseBuilder::<Complex64>::new(n, 5 * n);
    for j in 0..ny {
        for i in 0..cols {
            let k = j * cols + i;
            let e = eps(i, j);
            let mut diag = e * k0 * k0;
            // x: flux through each face uses ε_face = (ε_k + ε_nb)/2.
            for nb in [i.checked_sub(1), (i + 1 < nx).then_some(i + 1)] {
                match nb {
                    Some(ii) if ii < cols => {
                        let en = eps(ii, j);
                        let w = 2.0 / (e + en) * inv_h2;
                        b.push(k, j * cols + ii, en * w);
                        diag -= e * w;
                    }
                    Some(_) => debug_assert!(mirror_right),
                    None => diag -= Complex64::new(inv_h2, 0.0),
                }
            }
            // y: plain second difference.
            for nb in [j.checked_sub(1), (j + 1 < ny).then_some(j + 1)] {
                if let Some(jj) = nb {
                    b.push(k, jj * cols + i, Complex64::new(inv_h2, 0.0));
                }
                diag -= Complex64::new(inv_h2, 0.0);
            }
            b.push(k, k, diag);
        }
    }
    b.to_csr()
}

/// True when the map is exactly mirror-symmetric about the centre line
/// between two pixel columns.
fn has_mirror_symmetry(map: &IndexMap) -> bool {
    let nx = map.grid.nx;
    nx.is_multiple_of(2) && (0..map.grid.ny).all(|j| (0..nx / 2).all(|i| map.at(i, j) == map.at(nx - 1 - i, j)))
}

/// Smooth positive bump over the high-index part of the map.
fn start_vector(map: &IndexMap) -> Vec<Complex64> {
    let g = &map.grid;
    let clad = map.boundary_index();
    let mut wsum = 0.0;
    let (mut xc, mut yc) = (0.0, 0.0);
    let (mut xlo, mut xhi, mut ylo, mut yhi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let excess = map.at(i, j).re - clad;
            if excess > 0.0 {
                let (x, y) = (g.x_center_nm(i), g.y_center_nm(j));
                wsum += excess;
                xc += excess * x;
                yc += excess * y;
                xlo = xlo.min(x);
                xhi = xhi.max(x);
                ylo = ylo.min(y);
                yhi = yhi.max(y);
            }
        }
    }
    let (sx, sy) = if wsum > 0.0 {
        xc /= wsum;
        yc /= wsum;
        ((xhi - xlo).max(200.0), (yhi - ylo).max(200.0))
    } else {
        (0.25 * g.nx as f64 * g.pitch_nm, 0.25 * g.ny as f64 * g.pitch_nm)
    };
    let mut v = Vec::with_capacity(g.len());
    for j in 0..g.ny {
        for i in 0..g.nx {
            let dx = (g.x_center_nm(i) - xc) / sx;
            let dy = (g.y_center_nm(j) - yc) / sy;
            v.push(Complex64::new((-(dx * dx + dy * dy)).exp(), 0.0));
        }
    }
    v
}

pub fn solve_fundamental_mode(map: &IndexMap, wavelength_nm: f64) -> Result<ModeSolution> {
    solve_fundamental_mode_with(map, wavelength_nm, &SolverOptions::default())
}

pub fn solve_fundamental_mode_with(map: &IndexMap, wavelength_nm: f64, opts: &SolverOptions) -> Result<ModeSolution> {
    if map.index.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::NonFinite("index map".into()));
    }
    if map.grid.nx < 3 || map.grid.ny < 3 {
        return Err(Error::Geometry("grid needs at least 3 × 3 pixels".into()));
    }
    let n_max = map.max_index();
    let n_clad = map.boundary_index();
    let k0 = wavenumber_per_um(wavelength_nm);
    let target = opts.shift_factor * n_max * k0;
    let shift = Complex64::new(target * target, 0.0);
    let nx = map.grid.nx;
    let start = start_vector(map);
    let half = opts.use_symmetry && has_mirror_symmetry(map);
    let (value, vector, residual, solves) = if half {
        let cols = nx / 2;
        let a = assemble_columns(map, wavelength_nm, cols, true);
        let start: Vec<Complex64> = (0..map.grid.ny)
            .flat_map(|j| start[j * nx..j * nx + cols].iter().copied())
            .collect();
        let pair = shift_invert(&a, shift, &start, &opts.eigen)?;
        let mut full = vec![Complex64::default(); map.grid.len()];
        for j in 0..map.grid.ny {
            for i in 0..cols {
                let v = pair.vector[j * cols + i];
                full[j * nx + i] = v;
                full[j * nx + nx - 1 - i] = v;
            }
        }
        (pair.value, full, pair.residual, pair.solves)
    } else {
        let a = assemble_operator(map, wavelength_nm);
        let pair = shift_invert(&a, shift, &start, &opts.eigen)?;
        (pair.value, pair.vector, pair.residual, pair.solves)
    };

    let beta = value.sqrt();
    let beta = if beta.re < 0.0 { -beta } else { beta };
    let n_eff = beta / k0;
    if !(n_eff.re.is_finite() && n_eff.im.is_finite()) {
        return Err(Error::NonFinite("effective index".into()));
    }
    // A uniform map has no cladding/core distinction; anything else must be
    // guided above the boundary index.
    let uniform = n_max - n_clad <= 0.0 && map.index.iter().all(|c| *c == map.index[0]);
    if !uniform && n_eff.re <= n_clad {
        return Err(Error::NoGuidedMode {
            n_eff: n_eff.re,
            n_clad,
        });
    }

    let mut field: Vec<f64> = vector.iter().map(|c| c.norm()).collect();
    let norm = field.iter().map(|v| v * v).sum::<f64>().sqrt();
    field.iter_mut().for_each(|v| *v /= norm);

    Ok(ModeSolution {
        n_eff,
        field,
        polarization: Polarization::TeLike,
        grid: map.grid.clone(),
        n_cladding: n_clad,
        n_max,
        residual,
        solves,
    })
}

/// Modal propagation loss in dB/µm.
pub fn insertion_loss_db_per_um(mode: &ModeSolution, wavelength_nm: f64) -> Result<f64> {
    // Round-off can leave a lossless mode with Im(n_eff) of order +1e-16.
    let kappa = mode.kappa_eff().max(0.0);
    absorption_db_per_um(kappa, wavelength_nm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{CrystallizationFraction, MaterialDb};

    #[test]
    fn uniform_lossless_map_has_no_loss() {
        let grid = Grid::for_window(1.0, 1.0, 0.5, 20.0);
        let map = IndexMap::uniform(grid, Complex64::new(1.444, 0.0));
        let mode = solve_fundamental_mode(&map, 1550.0).unwrap();
        assert!(mode.n_eff.im.abs() <= 1e-9, "{}", mode.n_eff);
        assert!(insertion_loss_db_per_um(&mode, 1550.0).unwrap() <= 1e-6);
        let norm: f64 = mode.field.iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn uniform_map_matches_discrete_box_mode() {
        // Separable: β² = k0²n² - λx - λy with the discrete sine eigenvalues.
        let grid = Grid::for_window(1.0, 0.8, 0.4, 20.0);
        let (nx, ny, h) = (grid.nx, grid.ny, grid.pitch_nm * 1e-3);
        let map = IndexMap::uniform(grid, Complex64::new(2.0, 0.0));
        let mode = solve_fundamental_mode(&map, 1550.0).unwrap();
        let k0 = wavenumber_per_um(1550.0);
        let lam = |m: usize| 2.0 / (h * h) * (1.0 - (PI / (m + 1) as f64).cos());
        let beta2 = k0 * k0 * 4.0 - lam(nx) - lam(ny);
        let expect = beta2.sqrt() / k0;
        assert!((mode.n_eff.re - expect).abs() < 1e-10, "{} vs {expect}", mode.n_eff.re);
    }

    #[test]
    fn bare_waveguide_mode_is_guided_and_symmetric() {
        let db = MaterialDb::builtin();
        let xs = CrossSection::new(470.0, 0.0).with_pitch(20.0);
        let map = build_index_map(&db, &xs, "GST", 1550.0, CrystallizationFraction::AMORPHOUS).unwrap();
        let mode = solve_fundamental_mode(&map, 1550.0).unwrap();
        assert!(mode.n_eff.re > mode.n_cladding && mode.n_eff.re < mode.n_max);
        assert!(mode.mirror_asymmetry() <= 1e-6, "{}", mode.mirror_asymmetry());
        assert!(mode.residual <= 1e-10);
    }

    #[test]
    fn half_window_solve_matches_full_window() {
        let db = MaterialDb::builtin();
        let xs = CrossSection::new(470.0, 30.0).with_pitch(20.0);
        let map = build_index_map(&db, &xs, "GST", 1550.0, CrystallizationFraction::CRYSTALLINE).unwrap();
        assert!(has_mirror_symmetry(&map));
        let half = solve_fundamental_mode(&map, 1550.0).unwrap();
        let full_opts = SolverOptions {
            use_symmetry: false,
            ..SolverOptions::default()
        };
        let full = solve_fundamental_mode_with(&map, 1550.0, &full_opts).unwrap();
        assert!(
            (half.n_eff - full.n_eff).norm() < 1e-9,
            "{} vs {}",
            half.n_eff,
            full.n_eff
        );
        let diff = half
            .field
            .iter()
            .zip(&full.field)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-6, "{diff}");
    }

    #[test]
    fn no_guided_mode_when_core_is_below_cladding() {
        let grid = Grid::for_window(2.0, 2.0, 1.0, 20.0);
        let mut map = IndexMap::uniform(grid, Complex64::new(1.444, 0.0));
        let nx = map.grid.nx;
        for j in 45..55 {
            for i in 45..55 {
                map.index[j * nx + i] = Complex64::new(1.2, 0.0);
                map.region[j * nx + i] = Region::Core;
            }
        }
        let err = solve_fundamental_mode(&map, 1550.0).unwrap_err();
        assert!(matches!(err, Error::NoGuidedMode { .. }), "{err}");
    }
}
