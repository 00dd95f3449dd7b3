//! Shift-invert eigenpair extraction.
//!
//! The dominant eigenvalue θ of `(A - σI)⁻¹` corresponds to the eigenvalue
//! `λ = σ + 1/θ` of `A` closest to σ. It is found with an explicitly
//! restarted Arnoldi iteration: every Krylov vector costs one solve with the
//! factored shifted matrix, and the Ritz pair with the largest |θ| seeds the
//! next cycle.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{ComplexLu, Csr};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftInvertOptions {
    /// Upper bound on linear solves with the shifted matrix.
    pub max_solves: usize,
    /// Relative residual `‖(A-σ)⁻¹x - θx‖ / |θ|` with `‖x‖ = 1`.
    pub tolerance: f64,
    /// Krylov subspace dimension per restart cycle.
    pub krylov_dim: usize,
}

impl Default for ShiftInvertOptions {
    fn default() -> Self {
        ShiftInvertOptions {
            max_solves: 500,
            tolerance: 1e-10,
            krylov_dim: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: Complex64,
    /// Unit 2-norm eigenvector.
    pub vector: Vec<Complex64>,
    pub residual: f64,
    pub solves: usize,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn scale(a: &mut [Complex64], s: Complex64) {
    a.iter_mut().for_each(|x| *x *= s);
}

/// Eigenvalue of `a` nearest to `shift`, starting from `start`.
pub fn shift_invert(
    a: &Csr<Complex64>,
    shift: Complex64,
    start: &[Complex64],
    opts: &ShiftInvertOptions,
) -> Result<EigenPair> {
    let n = a.dim();
    let shifted = a.add_diagonal(-shift);
    let lu = ComplexLu::new(&shifted)?;
    let apply = |x: &[Complex64]| {
        let mut y = x.to_vec();
        lu.solve_in_place(&mut y);
        y
    };

    let mut x = start.to_vec();
    let nx = norm(&x);
    if !(nx > 0.0 && nx.is_finite()) {
        return Err(Error::LinearAlgebra("start vector is zero or non-finite".into()));
    }
    scale(&mut x, Complex64::new(1.0 / nx, 0.0));

    let m = opts.krylov_dim.max(2);
    let mut solves = 0usize;
    let mut best_residual = f64::INFINITY;
    let mut best: Option<(Complex64, Vec<Complex64>)> = None;

    while solves < opts.max_solves {
        let mut basis: Vec<Vec<Complex64>> = vec![x.clone()];
        let mut h = vec![vec![Complex64::default(); m]; m + 1];
        let mut dim = 0;
        let mut ritz: Option<(Complex64, Vec<Complex64>, f64)> = None;

        for k in 0..m {
            if solves >= opts.max_solves {
                break;
            }
            let mut w = apply(&basis[k]);
            solves += 1;
            // Classical Gram-Schmidt, applied twice.
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(v, &w);
                    h[i][k] += c;
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
                }
            }
            let beta = norm(&w);
            h[k + 1][k] = Complex64::new(beta, 0.0);
            dim = k + 1;

            let exhausted = beta <= 1e-14 * h[k][k].norm().max(1e-300);
            if k + 1 >= 4 || exhausted || k + 1 == m {
                let (theta, y) = dominant_ritz(&h, dim)?;
                let est = beta * y[dim - 1].norm() / theta.norm();
                ritz = Some((theta, y, est));
                if est < 0.1 * opts.tolerance || exhausted {
                    break;
                }
            }
            if exhausted {
                break;
            }
            scale(&mut w, Complex64::new(1.0 / beta, 0.0));
            basis.push(w);
        }

        let Some((_, y, _)) = ritz else { break };
        let mut next = vec![Complex64::default(); n];
        for (coef, v) in y.iter().zip(&basis[..dim]) {
            next.iter_mut().zip(v).for_each(|(o, vi)| *o += coef * vi);
        }
        let nn = norm(&next);
        scale(&mut next, Complex64::new(1.0 / nn, 0.0));

        if solves >= opts.max_solves {
            break;
        }
        // True residual of the shift-inverted problem.
        let image = apply(&next);
        solves += 1;
        let theta_rq = dot(&next, &image);
        let resid = image
            .iter()
            .zip(&next)
            .map(|(u, v)| (u - theta_rq * v).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / theta_rq.norm();
        if resid < best_residual {
            best_residual = resid;
            best = Some((theta_rq, next.clone()));
        }
        if resid <= opts.tolerance {
            let (theta, vector) = best.unwrap();
            return Ok(EigenPair {
                value: shift + theta.inv(),
                vector,
                residual: resid,
                solves,
            });
        }
        // Restart from the normalized image, which is one more power step.
        let ni = norm(&image);
        x = image;
        scale(&mut x, Complex64::new(1.0 / ni, 0.0));
    }
    Err(Error::NotConverged {
        iterations: solves,
        residual: best_residual,
    })
}

/// Ritz pair of the leading `dim × dim` Hessenberg block with largest |θ|.
fn dominant_ritz(h: &[Vec<Complex64>], dim: usize) -> Result<(Complex64, Vec<Complex64>)> {
    let small = Mat::<Complex64>::from_fn(dim, dim, |i, j| h[i][j]);
    let evd = small
        .eigen()
        .map_err(|e| Error::LinearAlgebra(format!("Hessenberg eigensolve: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let values = s.column_vector();
    let mut best = 0;
    for i in 1..dim {
        if values[i].norm() > values[best].norm() {
            best = i;
        }
    }
    let mut y: Vec<Complex64> = (0..dim).map(|i| u[(i, best)]).collect();
    let ny = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    y.iter_mut().for_each(|v| *v /= ny);
    Ok((values[best], y))
}
