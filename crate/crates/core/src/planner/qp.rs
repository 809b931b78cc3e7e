//! Contact-force quadratic program: minimize ½fᵀGf + fᵀc over a product of
//! friction cones, solved by block projected Gauss-Seidel.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::contact::DelassusSystem;
use crate::error::{Error, Result};

/// Delassus system with one friction coefficient per contact point.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactQpProblem {
    pub system: DelassusSystem,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpSettings {
    /// Stop when no force component moves more than this in a sweep (N).
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_sweeps: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    /// Stacked (f_N, f_T1, f_T2) per point.
    pub forces: DVector<f64>,
    pub cost: f64,
    pub sweeps: usize,
    /// False when the sweep cap was hit; `forces` is then the last iterate.
    pub converged: bool,
    /// ‖f − Π(f − (Gf + c)/‖G‖)‖∞, the projected stationarity residual.
    pub stationarity: f64,
}

/// Projection onto {f_N ≥ 0, ‖f_T‖ ≤ μ f_N}.
pub fn project_cone(f: &Vector3<f64>, mu: f64) -> Vector3<f64> {
    let n = f.x;
    let t = (f.y * f.y + f.z * f.z).sqrt();
    if t <= mu * n {
        return *f;
    }
    if mu * t <= -n {
        return Vector3::zeros();
    }
    let n_new = (n + mu * t) / (1.0 + mu * mu);
    let scale = mu * n_new / t;
    Vector3::new(n_new, f.y * scale, f.z * scale)
}

pub fn in_cone(f: &Vector3<f64>, mu: f64, slack: f64) -> bool {
    f.x >= -slack && (f.y * f.y + f.z * f.z).sqrt() <= mu * f.x + slack
}

fn quad(a: &Matrix3<f64>, b: &Vector3<f64>, f: &Vector3<f64>) -> f64 {
    0.5 * f.dot(&(a * f)) + b.dot(f)
}

/// Value and normal magnitude of the best point on the boundary ray at angle `theta`.
fn ray(a: &Matrix3<f64>, b: &Vector3<f64>, mu: f64, theta: f64) -> (f64, f64) {
    let d = Vector3::new(1.0, mu * theta.cos(), mu * theta.sin());
    let s = d.dot(b);
    let q = d.dot(&(a * d));
    if s < 0.0 && q > 0.0 {
        (-s * s / (2.0 * q), -s / q)
    } else {
        (0.0, 0.0)
    }
}

/// Exact minimizer of ½fᵀAf + bᵀf over one friction cone.
pub(crate) fn solve_block(a: &Matrix3<f64>, b: &Vector3<f64>, mu: f64) -> Vector3<f64> {
    if let Some(ch) = a.cholesky() {
        let f = -ch.solve(b);
        if in_cone(&f, mu, 0.0) {
            return f;
        }
    }
    if mu <= 0.0 {
        let (_, n) = ray(a, b, 0.0, 0.0);
        return Vector3::new(n, 0.0, 0.0);
    }
    const GRID: usize = 72;
    let mut best = (0.0, 0.0, 0.0);
    for i in 0..GRID {
        let th = 2.0 * PI * i as f64 / GRID as f64;
        let (v, n) = ray(a, b, mu, th);
        if v < best.0 {
            best = (v, n, th);
        }
    }
    if best.1 == 0.0 {
        return Vector3::zeros();
    }
    // golden-section refinement around the best grid angle
    let h = 2.0 * PI / GRID as f64;
    let (mut lo, mut hi) = (best.2 - h, best.2 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = ray(a, b, mu, x1).0;
    let mut f2 = ray(a, b, mu, x2).0;
    for _ in 0..60 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = ray(a, b, mu, x1).0;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = ray(a, b, mu, x2).0;
        }
    }
    let th = 0.5 * (lo + hi);
    let (v, n) = ray(a, b, mu, th);
    let (th, n) = if v <= best.0 { (th, n) } else { (best.2, best.1) };
    let f = Vector3::new(n, mu * n * th.cos(), mu * n * th.sin());
    if quad(a, b, &f) <= 0.0 {
        f
    } else {
        Vector3::zeros()
    }
}

fn block(g: &DMatrix<f64>, i: usize, j: usize) -> Matrix3<f64> {
    g.fixed_view::<3, 3>(3 * i, 3 * j).into_owned()
}

/// Natural residual of the cone-constrained problem at `f`.
pub fn stationarity_residual(p: &ContactQpProblem, f: &DVector<f64>) -> f64 {
    let sys = &p.system;
    if sys.dim() == 0 {
        return 0.0;
    }
    let r = &sys.g * f + &sys.c;
    let scale = sys.g.amax().max(1e-12);
    let mut worst: f64 = 0.0;
    for (i, mu) in p.mu.iter().enumerate() {
        let fi: Vector3<f64> = f.fixed_rows::<3>(3 * i).into_owned();
        let ri: Vector3<f64> = r.fixed_rows::<3>(3 * i).into_owned();
        let proj = project_cone(&(fi - ri / scale), *mu);
        worst = worst.max((fi - proj).amax());
    }
    worst
}

/// Σᵢ |fᵢ·(Gf + c)ᵢ| / (‖f‖·‖c‖): zero at an exact solution since each
/// point's force and contact acceleration are orthogonal.
pub fn normalized_complementarity(p: &ContactQpProblem, f: &DVector<f64>) -> f64 {
    let sys = &p.system;
    if sys.dim() == 0 {
        return 0.0;
    }
    let r = &sys.g * f + &sys.c;
    let sum: f64 = (0..p.mu.len())
        .map(|i| f.fixed_rows::<3>(3 * i).dot(&r.fixed_rows::<3>(3 * i)).abs())
        .sum();
    let scale = f.norm() * sys.c.norm();
    if scale > 0.0 {
        sum / scale
    } else {
        0.0
    }
}

/// Block projected Gauss-Seidel. Each point's 3×3 subproblem is solved
/// exactly over its cone with the other points' forces frozen.
pub fn solve_contact_qp(p: &ContactQpProblem, settings: &QpSettings) -> Result<QpSolution> {
    let sys = &p.system;
    let n = sys.dim();
    if n == 0 {
        return Ok(QpSolution {
            forces: DVector::zeros(0),
            cost: 0.0,
            sweeps: 0,
            converged: true,
            stationarity: 0.0,
        });
    }
    if n != 3 * p.mu.len() || sys.g.nrows() != n || sys.g.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "QP dimension mismatch: G is {}×{}, c has {n} rows, {} cones",
            sys.g.nrows(),
            sys.g.ncols(),
            p.mu.len()
        )));
    }
    let min_eig = sys.min_eigenvalue();
    if min_eig < -1e-9 * sys.g.amax().max(1.0) {
        return Err(Error::NotPositiveSemidefinite(min_eig));
    }
    let m = p.mu.len();
    let diag: Vec<Matrix3<f64>> = (0..m).map(|i| block(&sys.g, i, i)).collect();
    let mut f = DVector::zeros(n);
    let mut r = sys.c.clone();
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < settings.max_sweeps {
        sweeps += 1;
        let mut change: f64 = 0.0;
        for i in 0..m {
            let fi: Vector3<f64> = f.fixed_rows::<3>(3 * i).into_owned();
            let ri: Vector3<f64> = r.fixed_rows::<3>(3 * i).into_owned();
            // linear term of block i with the other forces fixed
            let b = ri - diag[i] * fi;
            let new = solve_block(&diag[i], &b, p.mu[i]);
            let delta = new - fi;
            if delta.amax() > 0.0 {
                r += sys.g.columns(3 * i, 3) * delta;
                f.fixed_rows_mut::<3>(3 * i).copy_from(&new);
                change = change.max(delta.amax());
            }
        }
        if change <= settings.tol {
            converged = true;
            break;
        }
    }
    min_norm_polish(p, &mut f);
    Ok(QpSolution {
        cost: sys.objective(&f),
        stationarity: stationarity_residual(p, &f),
        forces: f,
        sweeps,
        converged,
    })
}

/// Removes the null-space component of G from `f` when that keeps every cone
/// satisfied and does not raise the cost; picks the least-norm optimum for
/// rank-deficient contact sets.
fn min_norm_polish(p: &ContactQpProblem, f: &mut DVector<f64>) {
    let sys = &p.system;
    let n = sys.dim();
    let eig = sys.g.clone().symmetric_eigen();
    let cutoff = 1e-10 * eig.eigenvalues.amax().max(1e-300);
    let mut null_part = DVector::zeros(n);
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() <= cutoff {
            let v = eig.eigenvectors.column(k);
            null_part += v * v.dot(f);
        }
    }
    if null_part.amax() == 0.0 {
        return;
    }
    let candidate = &*f - &null_part;
    let feasible = p
        .mu
        .iter()
        .enumerate()
        .all(|(i, mu)| in_cone(&candidate.fixed_rows::<3>(3 * i).into_owned(), *mu, 1e-12));
    let tol = 1e-12 * (1.0 + sys.objective(f).abs());
    if feasible && sys.objective(&candidate) <= sys.objective(f) + tol {
        *f = candidate;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn problem(g: DMatrix<f64>, c: DVector<f64>, mu: Vec<f64>) -> ContactQpProblem {
        ContactQpProblem {
            system: DelassusSystem { g, c },
            mu,
        }
    }

    #[test]
    fn empty_problem() {
        let p = problem(DMatrix::zeros(0, 0), DVector::zeros(0), vec![]);
        let s = solve_contact_qp(&p, &QpSettings::default()).unwrap();
        assert_eq!(s.forces.len(), 0);
        assert_eq!(s.cost, 0.0);
    }

    #[test]
    fn resting_cube_frictionless_split() {
        // corners of a 0.5 kg, 0.2 m cube; G from rigid-body statics
        let corners = [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)];
        let mut g = DMatrix::zeros(12, 12);
        for (i, (xi, yi)) in corners.iter().enumerate() {
            for (j, (xj, yj)) in corners.iter().enumerate() {
                let v = 2.0 * (1.0 + 1.5 * xi * xj + 1.5 * yi * yj);
                g[(3 * i, 3 * j)] = v;
            }
            g[(3 * i + 1, 3 * i + 1)] = 1.0;
            g[(3 * i + 2, 3 * i + 2)] = 1.0;
        }
        let mut c = DVector::zeros(12);
        for i in 0..4 {
            c[3 * i] = -9.8;
        }
        let p = problem(g, c, vec![0.0; 4]);
        let s = solve_contact_qp(&p, &QpSettings::default()).unwrap();
        assert!(s.converged);
        let total: f64 = (0..4).map(|i| s.forces[3 * i]).sum();
        assert_relative_eq!(total, 4.9, max_relative = 1e-6);
        for i in 0..4 {
            assert_relative_eq!(s.forces[3 * i], 1.225, max_relative = 1e-6);
        }
    }

    #[test]
    fn non_psd_rejected() {
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 1.0]));
        let p = problem(g, DVector::from_vec(vec![-1.0, 0.0, 0.0]), vec![0.5]);
        assert!(matches!(
            solve_contact_qp(&p, &QpSettings::default()),
            Err(Error::NotPositiveSemidefinite(_))
        ));
    }

    #[test]
    fn sweep_cap_flags_best_iterate() {
        let g = DMatrix::from_row_slice(6, 6, &[
            2.0, 0.0, 0.0, 1.9, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0, 0.0, 0.0,
            1.9, 0.0, 0.0, 2.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
        ]);
        let c = DVector::from_vec(vec![-1.0, 0.0, 0.0, -2.0, 0.0, 0.0]);
        let p = problem(g, c, vec![0.5, 0.5]);
        let s = solve_contact_qp(&p, &QpSettings { tol: 1e-14, max_sweeps: 2 }).unwrap();
        assert!(!s.converged);
        assert_eq!(s.sweeps, 2);
    }

    #[test]
    fn sliding_block_hits_cone_boundary() {
        // tangential pull larger than μ times the supportable normal load
        let g = DMatrix::identity(3, 3);
        let c = DVector::from_vec(vec![-1.0, 5.0, 0.0]);
        let p = problem(g, c, vec![0.5]);
        let s = solve_contact_qp(&p, &QpSettings::default()).unwrap();
        let f: Vector3<f64> = s.forces.fixed_rows::<3>(0).into_owned();
        assert_relative_eq!(f.y.hypot(f.z), 0.5 * f.x, max_relative = 1e-9);
        assert!(f.y < 0.0);
        assert!(normalized_complementarity(&p, &s.forces) < 1e-6);
    }

    proptest! {
        #[test]
        fn projection_lands_in_cone(n in -5.0f64..5.0, t1 in -5.0f64..5.0, t2 in -5.0f64..5.0, mu in 0.0f64..1.5) {
            let p = project_cone(&Vector3::new(n, t1, t2), mu);
            prop_assert!(in_cone(&p, mu, 1e-12));
            // idempotent
            let q = project_cone(&p, mu);
            prop_assert!((p - q).amax() < 1e-12);
        }

        #[test]
        fn solution_beats_zero(seed in proptest::collection::vec(-1.0f64..1.0, 18), mu in 0.1f64..1.0) {
            let x = DMatrix::from_row_slice(6, 3, &seed);
            let g = &x * x.transpose() + DMatrix::identity(6, 6) * 1e-3;
            let c = DVector::from_fn(6, |i, _| seed[(i * 5) % 18] - 0.3);
            let p = problem(g, c, vec![mu, mu]);
            let s = solve_contact_qp(&p, &QpSettings::default()).unwrap();
            for i in 0..2 {
                prop_assert!(in_cone(&s.forces.fixed_rows::<3>(3 * i).into_owned(), mu, 1e-12));
            }
            prop_assert!(s.cost <= 1e-12);
        }
    }
}
