//! Normal Distributions Transform scan matching in the plane.
//!
//! Reference points are binned into square cells; each populated cell holds
//! a Gaussian. A scan is aligned by Newton ascent on the sum of Gaussian
//! responses of its transformed points.

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Matrix3, Point2, SymmetricEigen, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose2D;
use crate::map::{CellState, OccupancyGrid};

/// Cells with fewer points are left out of matching.
pub const MIN_CELL_POINTS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NdtError {
    #[error("reference too sparse: no cell holds {MIN_CELL_POINTS} points")]
    TooSparse,
    #[error("no scan points to align")]
    NoScanPoints,
    #[error("invalid NDT parameter {field}: {message}")]
    BadParameter { field: &'static str, message: String },
    #[error("numerical failure at iteration {iteration}: {what}")]
    NumericalFailure { iteration: usize, what: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NdtParams {
    pub cell_size: f64,
    pub max_iterations: usize,
    /// Step-norm threshold; meters and radians are weighted equally.
    pub tolerance: f64,
    /// Smallest allowed eigenvalue as a fraction of the largest.
    pub min_eigen_ratio: f64,
    /// Absolute eigenvalue floor in m^2, for cells whose points coincide.
    pub min_variance: f64,
}

impl Default for NdtParams {
    fn default() -> Self {
        Self { cell_size: 1.0, max_iterations: 30, tolerance: 1e-4, min_eigen_ratio: 0.001, min_variance: 1e-4 }
    }
}

impl NdtParams {
    pub fn validate(&self) -> Result<(), NdtError> {
        let bad = |field, message: &str| Err(NdtError::BadParameter { field, message: message.to_string() });
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return bad("cell_size", "must be positive");
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return bad("tolerance", "must be positive");
        }
        if !(self.min_eigen_ratio >= 0.001 && self.min_eigen_ratio <= 1.0) {
            return bad("min_eigen_ratio", "must lie in [0.001, 1]");
        }
        if self.min_variance.is_nan() || self.min_variance <= 0.0 {
            return bad("min_variance", "must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NdtCell {
    pub mean: Vector2<f64>,
    /// Regularized covariance.
    pub covariance: Matrix2<f64>,
    pub inverse: Matrix2<f64>,
    pub point_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NdtCellGrid {
    cell_size: f64,
    cells: BTreeMap<(i64, i64), NdtCell>,
}

impl NdtCellGrid {
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn cells(&self) -> &BTreeMap<(i64, i64), NdtCell> {
        &self.cells
    }

    pub fn key(&self, p: &Point2<f64>) -> (i64, i64) {
        ((p.x / self.cell_size).floor() as i64, (p.y / self.cell_size).floor() as i64)
    }

    pub fn cell_at(&self, p: &Point2<f64>) -> Option<&NdtCell> {
        self.cells.get(&self.key(p))
    }
}

/// Clamps the eigenvalues of a symmetric 2x2 matrix from below.
fn regularize(cov: &Matrix2<f64>, ratio: f64, floor: f64) -> Matrix2<f64> {
    let eig = SymmetricEigen::new(*cov);
    let max = eig.eigenvalues.max().max(0.0);
    let lo = (ratio * max).max(floor);
    let clamped = eig.eigenvalues.map(|l| l.max(lo));
    let r = eig.eigenvectors * Matrix2::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    0.5 * (r + r.transpose())
}

/// Per-cell sample mean and covariance of the reference points.
pub fn build_ndt(points: &[Point2<f64>], params: &NdtParams) -> Result<NdtCellGrid, NdtError> {
    params.validate()?;
    let size = params.cell_size;
    let mut bins: BTreeMap<(i64, i64), Vec<Vector2<f64>>> = BTreeMap::new();
    for p in points {
        let key = ((p.x / size).floor() as i64, (p.y / size).floor() as i64);
        bins.entry(key).or_default().push(p.coords);
    }
    let mut cells = BTreeMap::new();
    for (key, pts) in bins {
        if pts.len() < MIN_CELL_POINTS {
            continue;
        }
        let n = pts.len() as f64;
        let mean = pts.iter().sum::<Vector2<f64>>() / n;
        let scatter = pts.iter().map(|p| (p - mean) * (p - mean).transpose()).sum::<Matrix2<f64>>();
        let raw = scatter / (n - 1.0);
        let covariance = regularize(&raw, params.min_eigen_ratio, params.min_variance);
        let inverse = covariance.try_inverse().expect("regularized covariance is positive definite");
        cells.insert(
            key,
            NdtCell { mean, covariance, inverse: 0.5 * (inverse + inverse.transpose()), point_count: pts.len() },
        );
    }
    if cells.is_empty() {
        return Err(NdtError::TooSparse);
    }
    Ok(NdtCellGrid { cell_size: size, cells })
}

/// Objective value with its derivatives in (tx, ty, phi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdtScore {
    pub score: f64,
    pub gradient: Vector3<f64>,
    pub hessian: Matrix3<f64>,
}

/// Sum of `exp(-q' C q / 2)` over transformed scan points in populated cells,
/// with its analytic gradient and Hessian.
pub fn ndt_score(grid: &NdtCellGrid, scan: &[Point2<f64>], transform: &Pose2D) -> NdtScore {
    let (s, c) = transform.theta.sin_cos();
    let mut score = 0.0;
    let mut gradient = Vector3::zeros();
    let mut hessian = Matrix3::zeros();
    for p in scan {
        let moved = transform.transform_point(p);
        let Some(cell) = grid.cell_at(&moved) else {
            continue;
        };
        let q = moved.coords - cell.mean;
        let ci = &cell.inverse;
        let cq = ci * q;
        let e = (-0.5 * q.dot(&cq)).exp();
        // columns: d moved / d(tx, ty, phi)
        let d_phi = Vector2::new(-s * p.x - c * p.y, c * p.x - s * p.y);
        let jac = [Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0), d_phi];
        let dd_phi = Vector2::new(-c * p.x + s * p.y, -s * p.x - c * p.y);
        let a: [f64; 3] = [cq.dot(&jac[0]), cq.dot(&jac[1]), cq.dot(&jac[2])];
        score += e;
        for i in 0..3 {
            gradient[i] -= e * a[i];
            for j in i..3 {
                let mut h = a[i] * a[j] - jac[i].dot(&(ci * jac[j]));
                if i == 2 && j == 2 {
                    h -= cq.dot(&dd_phi);
                }
                hessian[(i, j)] += e * h;
            }
        }
    }
    for i in 0..3 {
        for j in 0..i {
            hessian[(i, j)] = hessian[(j, i)];
        }
    }
    NdtScore { score, gradient, hessian }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdtResult {
    /// Pose that maps scan points onto the reference.
    pub transform: Pose2D,
    pub score: f64,
    pub iterations: usize,
    pub converged: bool,
}

const MAX_HALVINGS: usize = 10;
/// Largest Newton step, meters and radians weighted equally.
const MAX_STEP: f64 = 0.5;

/// Newton ascent from `initial_guess`. Indefinite Hessians are shifted until
/// negative definite; steps are halved until the score does not decrease.
pub fn ndt_align(
    grid: &NdtCellGrid,
    scan: &[Point2<f64>],
    initial_guess: &Pose2D,
    max_iterations: usize,
    tolerance: f64,
) -> Result<NdtResult, NdtError> {
    if scan.is_empty() {
        return Err(NdtError::NoScanPoints);
    }
    let mut x = initial_guess.to_vector();
    let mut current = ndt_score(grid, scan, initial_guess);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iterations {
        iterations += 1;
        check(&current, iterations)?;
        if current.gradient.iter().all(|g| *g == 0.0) {
            // flat objective: nothing to climb, including zero overlap
            converged = current.score > 0.0;
            break;
        }
        let step = newton_step(&current, MAX_STEP)
            .ok_or(NdtError::NumericalFailure { iteration: iterations, what: "singular Hessian" })?;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = x + alpha * step;
            let trial = ndt_score(grid, scan, &Pose2D::from_vector(&candidate));
            if trial.score >= current.score {
                accepted = Some((candidate, trial, alpha * step.norm()));
                break;
            }
            alpha *= 0.5;
        }
        let Some((candidate, trial, norm)) = accepted else {
            break;
        };
        x = Pose2D::from_vector(&candidate).to_vector();
        current = trial;
        if norm < tolerance {
            converged = true;
            break;
        }
    }
    check(&current, iterations)?;
    Ok(NdtResult { transform: Pose2D::from_vector(&x), score: current.score, iterations, converged })
}

fn check(s: &NdtScore, iteration: usize) -> Result<(), NdtError> {
    let finite =
        s.score.is_finite() && s.gradient.iter().all(|v| v.is_finite()) && s.hessian.iter().all(|v| v.is_finite());
    if finite {
        Ok(())
    } else {
        Err(NdtError::NumericalFailure { iteration, what: "non-finite score or derivatives" })
    }
}

/// Ascent direction `-(H - lambda I)^-1 g`. The shift makes the system
/// negative definite with every eigenvalue at most `-mu`, where `mu` keeps
/// the step norm within `max_step`.
fn newton_step(s: &NdtScore, max_step: f64) -> Option<Vector3<f64>> {
    let h = 0.5 * (s.hessian + s.hessian.transpose());
    let eig = SymmetricEigen::new(h);
    let top = eig.eigenvalues.max();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let mu = (1e-3 * scale).max(s.gradient.norm() / max_step);
    let shifted = if top > -mu { h - Matrix3::identity() * (top + mu) } else { h };
    shifted.try_inverse().map(|inv| -(inv * s.gradient))
}

/// OCCUPIED cell centers, the map as a reference point cloud.
pub fn map_points(map: &OccupancyGrid) -> Vec<Point2<f64>> {
    map.iter_cells().filter(|(_, s)| *s == CellState::Occupied).map(|(c, _)| map.grid_to_world(c)).collect()
}
