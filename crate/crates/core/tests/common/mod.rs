//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use nalgebra::Point2;

use navsim::navigation::PlanningGrid;
use navsim::{CellIndex, OccupancyGrid};

/// Fixed 1e-4 m march: the first sample inside a blocking cell, or
/// `range_max` once the ray leaves the map.
pub fn ray_march(map: &OccupancyGrid, start: Point2<f64>, bearing: f64, range_max: f64) -> f64 {
    let (s, c) = bearing.sin_cos();
    let mut t = 0.0;
    while t < range_max {
        match map.world_to_grid(&Point2::new(start.x + t * c, start.y + t * s)) {
            None => return range_max,
            Some(cell) if map.get(cell).blocks_ray() => return t,
            Some(_) => {}
        }
        t += 1e-4;
    }
    range_max
}

/// Plain Dijkstra over 8-connected moves without corner cutting. Costs are
/// kept as (axial, diagonal) step counts so equal paths compare exactly.
pub fn dijkstra(grid: &PlanningGrid, start: CellIndex, goal: CellIndex) -> Option<f64> {
    if !grid.is_free(start) || !grid.is_free(goal) {
        return None;
    }
    let (w, h) = (grid.width(), grid.height());
    let idx = |c: CellIndex| c.iy * w + c.ix;
    let cost = |(a, d): (usize, usize)| a as f64 + SQRT_2 * d as f64;
    let mut best: Vec<Option<(usize, usize)>> = vec![None; w * h];
    let mut heap = BinaryHeap::new();
    best[idx(start)] = Some((0, 0));
    // non-negative floats order like their bit patterns
    heap.push(Reverse((0f64.to_bits(), 0usize, 0usize, start.ix, start.iy)));
    while let Some(Reverse((_, a, d, ix, iy))) = heap.pop() {
        let c = CellIndex::new(ix, iy);
        if best[idx(c)] != Some((a, d)) {
            continue;
        }
        if c == goal {
            return Some(cost((a, d)));
        }
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (ix as i64 + dx, iy as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let n = CellIndex::new(nx as usize, ny as usize);
                let diagonal = dx != 0 && dy != 0;
                let cut = diagonal
                    && !(grid.is_free(CellIndex::new(nx as usize, iy))
                        && grid.is_free(CellIndex::new(ix, ny as usize)));
                if !grid.is_free(n) || cut {
                    continue;
                }
                let next = if diagonal { (a, d + 1) } else { (a + 1, d) };
                if best[idx(n)].is_none_or(|b| cost(next) < cost(b)) {
                    best[idx(n)] = Some(next);
                    heap.push(Reverse((cost(next).to_bits(), next.0, next.1, n.ix, n.iy)));
                }
            }
        }
    }
    None
}
