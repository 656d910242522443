//! Direct solver for the Laplace-domain background field: the modified
//! Helmholtz problem `tau^2 v - div(gamma grad v) = f` with zero Dirichlet
//! data on a box large enough that the truncation error
//! `~ exp(-tau * margin / sqrt(gamma))` is negligible.
//!
//! Uses the *same* flux-form stencil as the time-domain solver (via
//! `fdtd::region_map`), so the two discretize the identical operator and
//! their results are directly comparable. The system is symmetric positive
//! definite; Jacobi-preconditioned conjugate gradients converge quickly
//! since `tau^2` dominates the diagonal.

use crate::error::{Error, Result};
use crate::fdtd::{region_map, GridSpec};
use crate::geometry::{LayeredMedium, ObstacleSpec, Point3};

/// Margin (in physical units) for the Dirichlet truncation box at decay
/// rate `tau / sqrt(gamma_minus)`: enough for `exp(-35)` truncation error,
/// but never less than 2.5.
pub fn dirichlet_margin(tau: f64, medium: &LayeredMedium) -> f64 {
    (35.0 * medium.gamma_minus.max(medium.gamma_plus).sqrt() / tau).max(2.5)
}

/// Solve `tau^2 v - div(gamma grad v) = f` on the grid with zero Dirichlet
/// boundary values. `rhs` lists (cell index, f value) pairs; all other
/// cells have zero right-hand side.
pub fn solve_modified_helmholtz(
    spec: &GridSpec,
    medium: &LayeredMedium,
    obstacle: Option<&ObstacleSpec>,
    rhs: &[(usize, f64)],
    tau: f64,
    rel_tol: f64,
) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::Precondition(format!("tau must be positive, got {tau}")));
    }
    let (region, face) = region_map(spec, medium, obstacle)?;
    let total = spec.cells();
    let (nx, ny, nz) = (spec.n[0], spec.n[1], spec.n[2]);
    let sy = nx;
    let sz = nx * ny;
    let inv_h2 = 1.0 / (spec.h * spec.h);
    let tau2 = tau * tau;

    // A x = tau^2 x + (1/h^2) sum_faces gamma_face (x_c - x_nb),
    // zero Dirichlet: out-of-grid neighbors contribute gamma_face * x_c
    // with the face coefficient of the cell itself.
    let apply = |x: &[f64], y: &mut [f64]| {
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let c = (k * ny + j) * nx + i;
                    let rc = region[c] as usize;
                    let xc = x[c];
                    let mut acc = 0.0;
                    let mut add = |nb: Option<usize>| {
                        match nb {
                            Some(n) => acc += face[rc][region[n] as usize] * (xc - x[n]),
                            None => acc += face[rc][rc] * xc,
                        };
                    };
                    add(if i > 0 { Some(c - 1) } else { None });
                    add(if i + 1 < nx { Some(c + 1) } else { None });
                    add(if j > 0 { Some(c - sy) } else { None });
                    add(if j + 1 < ny { Some(c + sy) } else { None });
                    add(if k > 0 { Some(c - sz) } else { None });
                    add(if k + 1 < nz { Some(c + sz) } else { None });
                    y[c] = tau2 * xc + inv_h2 * acc;
                }
            }
        }
    };

    // Jacobi preconditioner
    let mut diag = vec![tau2; total];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let c = (k * ny + j) * nx + i;
                let rc = region[c] as usize;
                let mut d = 0.0;
                let mut add = |nb: Option<usize>| {
                    d += match nb {
                        Some(n) => face[rc][region[n] as usize],
                        None => face[rc][rc],
                    };
                };
                add(if i > 0 { Some(c - 1) } else { None });
                add(if i + 1 < nx { Some(c + 1) } else { None });
                add(if j > 0 { Some(c - sy) } else { None });
                add(if j + 1 < ny { Some(c + sy) } else { None });
                add(if k > 0 { Some(c - sz) } else { None });
                add(if k + 1 < nz { Some(c + sz) } else { None });
                diag[c] += inv_h2 * d;
            }
        }
    }

    let mut b = vec![0.0f64; total];
    for &(idx, v) in rhs {
        b[idx] = v;
    }
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok(b);
    }

    let mut x = vec![0.0f64; total];
    let mut r = b;
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0f64; total];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();

    let max_iters = 50_000;
    for _ in 0..max_iters {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::Numerical("CG lost positive definiteness".into()));
        }
        let alpha = rz / pap;
        for i in 0..total {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= rel_tol * b_norm {
            return Ok(x);
        }
        for i in 0..total {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..total {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Numerical(format!(
        "CG failed to reach {rel_tol:e} within {max_iters} iterations"
    )))
}

/// Central-difference gradient of a grid function at an interior cell.
pub fn grid_gradient(spec: &GridSpec, v: &[f64], i: usize, j: usize, k: usize) -> Result<Point3> {
    if i == 0
        || j == 0
        || k == 0
        || i + 1 >= spec.n[0]
        || j + 1 >= spec.n[1]
        || k + 1 >= spec.n[2]
    {
        return Err(Error::Precondition(format!(
            "gradient needs an interior cell, got ({i}, {j}, {k})"
        )));
    }
    let c = spec.index(i, j, k);
    let sy = spec.n[0];
    let sz = spec.n[0] * spec.n[1];
    let two_h = 2.0 * spec.h;
    Ok(Point3::new(
        (v[c + 1] - v[c - 1]) / two_h,
        (v[c + sy] - v[c - sy]) / two_h,
        (v[c + sz] - v[c - sz]) / two_h,
    ))
}
