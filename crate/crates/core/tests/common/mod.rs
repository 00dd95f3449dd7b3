//! Independent reference solutions shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use phxmem_core::modesolver::{Grid, IndexMap};

pub const N_CORE: f64 = 3.4757;
pub const N_CLAD: f64 = 1.444;

/// Lorentz–Lorenz mixing written out in real arithmetic: solve
/// `(ε-1)/(ε+2) = L` for ε with L the volume-weighted polarizabilities.
/// Indices are `(n, κ)` pairs; returns the principal root.
pub fn oracle_mix(na: (f64, f64), nc: (f64, f64), p: f64) -> (f64, f64) {
    let sq = |(n, k): (f64, f64)| (n * n - k * k, -2.0 * n * k);
    let div = |(a, b): (f64, f64), (c, d): (f64, f64)| {
        let den = c * c + d * d;
        ((a * c + b * d) / den, (b * c - a * d) / den)
    };
    let pol = |e: (f64, f64)| div((e.0 - 1.0, e.1), (e.0 + 2.0, e.1));
    let (la, lc) = (pol(sq(na)), pol(sq(nc)));
    let l = ((1.0 - p) * la.0 + p * lc.0, (1.0 - p) * la.1 + p * lc.1);
    let eps = div((1.0 + 2.0 * l.0, 2.0 * l.1), (1.0 - l.0, -l.1));
    let r = (eps.0 * eps.0 + eps.1 * eps.1).sqrt();
    let re = ((r + eps.0) / 2.0).sqrt();
    let im = ((r - eps.0) / 2.0).sqrt().copysign(eps.1);
    (re, im)
}

pub fn nk(c: Complex64) -> (f64, f64) {
    (c.re, -c.im)
}

/// Even TE0 of a symmetric slab from the continuous dispersion relation
/// `u tan u = w`, `u² + w² = V²`, solved by bisection on u ∈ (0, min(V, π/2)).
pub fn slab_te0(thickness_nm: f64, wavelength_nm: f64) -> f64 {
    let k0 = 2.0 * PI / wavelength_nm;
    let v = 0.5 * thickness_nm * k0 * (N_CORE * N_CORE - N_CLAD * N_CLAD).sqrt();
    let f = |u: f64| u * u.tan() - (v * v - u * u).sqrt();
    let (mut lo, mut hi) = (1e-12, v.min(PI / 2.0) - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let u = 0.5 * (lo + hi);
    let kx = 2.0 * u / thickness_nm;
    ((N_CORE * k0).powi(2) - kx * kx).sqrt() / k0
}

/// Slab stacked along y, laterally uniform across a narrow window.
pub fn slab_map(thickness_nm: f64, pitch_nm: f64) -> IndexMap {
    let grid = Grid::for_window(0.2, 3.0, 1.5, pitch_nm);
    let mut map = IndexMap::uniform(grid.clone(), Complex64::new(N_CLAD, 0.0));
    for j in grid.rows(-0.5 * thickness_nm, 0.5 * thickness_nm) {
        for i in 0..grid.nx {
            map.index[j * grid.nx + i] = Complex64::new(N_CORE, 0.0);
        }
    }
    map
}

/// Lowest eigenvalue of the discrete 1D Dirichlet Laplacian on `n` nodes,
/// µm⁻², for a pitch in nm.
pub fn lateral_eigenvalue(n: usize, pitch_nm: f64) -> f64 {
    let h = pitch_nm * 1e-3;
    2.0 / (h * h) * (1.0 - (PI / (n + 1) as f64).cos())
}

/// Mid-plane rise of a uniformly heated slab `0 < y < L` with both faces
/// held at ambient, from a zero initial rise (Fourier sine series, 20 terms).
pub fn slab_midplane(q: f64, k: f64, rho_c: f64, l: f64, t: f64) -> f64 {
    let y = 0.5 * l;
    let steady = q / (2.0 * k) * y * (l - y);
    let transient: f64 = (0..20)
        .map(|i| {
            let n = (2 * i + 1) as f64;
            4.0 * q * l * l / (k * PI.powi(3) * n.powi(3))
                * (n * PI * y / l).sin()
                * (-k * n * n * PI * PI * t / (rho_c * l * l)).exp()
        })
        .sum();
    steady - transient
}

/// Indices of the non-dominated rows by pairwise comparison; every column
/// is minimized.
pub fn brute_force_front(rows: &[Vec<f64>]) -> Vec<usize> {
    (0..rows.len())
        .filter(|&i| {
            !rows.iter().any(|b| {
                let a = &rows[i];
                b.iter().zip(a).all(|(x, y)| x <= y) && b.iter().zip(a).any(|(x, y)| x < y)
            })
        })
        .collect()
}
