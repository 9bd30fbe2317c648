use nalgebra::Point2;

use crate::map::{CellState, OccupancyGrid};

/// Euclidean distance from every cell center to the nearest OCCUPIED cell
/// center, capped at `cap` meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    width: usize,
    height: usize,
    resolution: f64,
    origin: (f64, f64),
    cap: f64,
    distances: Vec<f64>,
}

impl DistanceField {
    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.distances[iy * self.width + ix]
    }

    pub fn values(&self) -> &[f64] {
        &self.distances
    }

    /// Distance looked up at the cell containing `p`; points off the map
    /// read the cap.
    pub fn distance_at(&self, p: &Point2<f64>) -> f64 {
        let fx = (p.x - self.origin.0) / self.resolution;
        let fy = (p.y - self.origin.1) / self.resolution;
        if fx >= 0.0 && fy >= 0.0 && fx < self.width as f64 && fy < self.height as f64 {
            self.distances[fy as usize * self.width + fx as usize]
        } else {
            self.cap
        }
    }
}

/// Exact squared distance transform of one row (Felzenszwalb & Huttenlocher).
/// All inputs are small integers, so the arithmetic is exact.
fn transform_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let qf = q as f64;
        let mut s;
        loop {
            let pf = v[k] as f64;
            s = ((f[q] + qf * qf) - (f[v[k]] + pf * pf)) / (2.0 * (qf - pf));
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let d = qf - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Distance field over the map, computed with a separable exact transform.
pub fn precompute_distance_field(map: &OccupancyGrid, cap: f64) -> DistanceField {
    let (w, h) = (map.width(), map.height());
    // exceeds any squared cell distance on this grid
    let far = ((w + h) as f64).powi(2) + 1.0;
    let mut grid: Vec<f64> = map.cells().iter().map(|s| if *s == CellState::Occupied { 0.0 } else { far }).collect();

    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    for ix in 0..w {
        for iy in 0..h {
            f[iy] = grid[iy * w + ix];
        }
        transform_1d(&f[..h], &mut out[..h], &mut v, &mut z);
        for iy in 0..h {
            grid[iy * w + ix] = out[iy];
        }
    }
    for iy in 0..h {
        let row = &mut grid[iy * w..(iy + 1) * w];
        f[..w].copy_from_slice(row);
        transform_1d(&f[..w], &mut out[..w], &mut v, &mut z);
        row.copy_from_slice(&out[..w]);
    }

    let res = map.resolution();
    let distances = grid.into_iter().map(|d2| if d2 >= far { cap } else { (d2.sqrt() * res).min(cap) }).collect();
    DistanceField { width: w, height: h, resolution: res, origin: (map.origin().x, map.origin().y), cap, distances }
}
