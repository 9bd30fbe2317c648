//! A* over an 8-connected planning grid derived from the occupancy map.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::f64::consts::SQRT_2;

use nalgebra::Point2;
use thiserror::Error;

use crate::map::{CellIndex, CellState, OccupancyGrid};
use crate::mcl::precompute_distance_field;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum PlanError {
    #[error("start ({0:.3}, {1:.3}) lies outside the map")]
    StartOutOfBounds(f64, f64),
    #[error("goal ({0:.3}, {1:.3}) lies outside the map")]
    GoalOutOfBounds(f64, f64),
    #[error("start ({0:.3}, {1:.3}) lies in an excluded cell")]
    StartBlocked(f64, f64),
    #[error("goal ({0:.3}, {1:.3}) lies in an excluded cell")]
    GoalBlocked(f64, f64),
}

/// Traversability of every cell after excluding OCCUPIED and UNKNOWN cells,
/// the inflation band around OCCUPIED cells and any blocked cells.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanningGrid {
    width: usize,
    height: usize,
    traversable: Vec<bool>,
}

impl PlanningGrid {
    pub fn build(map: &OccupancyGrid, blocked: &HashSet<CellIndex>, inflation_radius: f64) -> Self {
        let field = precompute_distance_field(map, inflation_radius.max(0.0) + map.resolution());
        let traversable = map
            .iter_cells()
            .map(|(c, s)| s == CellState::Free && field.at(c.ix, c.iy) > inflation_radius && !blocked.contains(&c))
            .collect();
        Self { width: map.width(), height: map.height(), traversable }
    }

    pub fn from_traversable(width: usize, height: usize, traversable: Vec<bool>) -> Self {
        assert_eq!(traversable.len(), width * height);
        Self { width, height, traversable }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_free(&self, c: CellIndex) -> bool {
        c.ix < self.width && c.iy < self.height && self.traversable[c.iy * self.width + c.ix]
    }

    pub fn set_free(&mut self, c: CellIndex, free: bool) {
        self.traversable[c.iy * self.width + c.ix] = free;
    }

    /// Eight-connected moves from `c`. Diagonal moves may not cut the corner
    /// of an excluded cell.
    pub fn neighbors(&self, c: CellIndex) -> impl Iterator<Item = (CellIndex, bool)> + '_ {
        const OFFSETS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        OFFSETS.iter().filter_map(move |&(dx, dy)| {
            let nx = c.ix as i64 + dx;
            let ny = c.iy as i64 + dy;
            if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
                return None;
            }
            let n = CellIndex::new(nx as usize, ny as usize);
            if !self.is_free(n) {
                return None;
            }
            let diagonal = dx != 0 && dy != 0;
            if diagonal {
                let side_a = CellIndex::new(nx as usize, c.iy);
                let side_b = CellIndex::new(c.ix, ny as usize);
                if !self.is_free(side_a) || !self.is_free(side_b) {
                    return None;
                }
            }
            Some((n, diagonal))
        })
    }
}

/// A grid path with its step counts; the cost is `axial + sqrt(2) * diagonal`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    pub cells: Vec<CellIndex>,
    pub axial_steps: usize,
    pub diagonal_steps: usize,
}

impl GridPath {
    pub fn cost(&self) -> f64 {
        path_cost(self.axial_steps, self.diagonal_steps)
    }

    /// Cell-center waypoints in world coordinates.
    pub fn points(&self, map: &OccupancyGrid) -> Vec<Point2<f64>> {
        self.cells.iter().map(|c| map.grid_to_world(*c)).collect()
    }
}

pub fn path_cost(axial: usize, diagonal: usize) -> f64 {
    axial as f64 + SQRT_2 * diagonal as f64
}

/// Octile distance: admissible for unit axial and sqrt(2) diagonal steps.
pub fn octile(a: CellIndex, b: CellIndex) -> f64 {
    let dx = a.ix.abs_diff(b.ix);
    let dy = a.iy.abs_diff(b.iy);
    let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
    (hi - lo) as f64 + SQRT_2 * lo as f64
}

#[derive(Debug, Clone, Copy)]
struct Open {
    f: f64,
    g: f64,
    cell: CellIndex,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    // min-heap on f, then prefer larger g, then the smaller cell index
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then(self.g.total_cmp(&other.g)).then(other.cell.cmp(&self.cell))
    }
}

/// Optimal 8-connected path between two traversable cells, or `None`.
pub fn astar(grid: &PlanningGrid, start: CellIndex, goal: CellIndex) -> Option<GridPath> {
    if !grid.is_free(start) || !grid.is_free(goal) {
        return None;
    }
    let n = grid.width * grid.height;
    let idx = |c: CellIndex| c.iy * grid.width + c.ix;
    let mut steps: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut parent: Vec<usize> = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();

    steps[idx(start)] = Some((0, 0));
    open.push(Open { f: octile(start, goal), g: 0.0, cell: start });

    while let Some(Open { cell, .. }) = open.pop() {
        let ci = idx(cell);
        if closed[ci] {
            continue;
        }
        closed[ci] = true;
        if cell == goal {
            break;
        }
        let (a, d) = steps[ci].expect("pushed cells have a cost");
        for (next, diagonal) in grid.neighbors(cell) {
            let ni = idx(next);
            if closed[ni] {
                continue;
            }
            let cand = if diagonal { (a, d + 1) } else { (a + 1, d) };
            let g = path_cost(cand.0, cand.1);
            let better = match steps[ni] {
                None => true,
                Some((na, nd)) => g < path_cost(na, nd),
            };
            if better {
                steps[ni] = Some(cand);
                parent[ni] = ci;
                open.push(Open { f: g + octile(next, goal), g, cell: next });
            }
        }
    }

    let gi = idx(goal);
    if !closed[gi] {
        return None;
    }
    let (axial_steps, diagonal_steps) = steps[gi].expect("goal reached");
    let mut cells = vec![goal];
    let mut cur = gi;
    while cur != idx(start) {
        cur = parent[cur];
        cells.push(CellIndex::new(cur % grid.width, cur / grid.width));
    }
    cells.reverse();
    Some(GridPath { cells, axial_steps, diagonal_steps })
}

/// Plans from `start` to `goal` (world meters). Endpoint problems are errors;
/// an unreachable goal is `Ok(None)`.
pub fn plan_path(
    map: &OccupancyGrid,
    blocked: &HashSet<CellIndex>,
    start: Point2<f64>,
    goal: Point2<f64>,
    inflation_radius: f64,
) -> Result<Option<GridPath>, PlanError> {
    let grid = PlanningGrid::build(map, blocked, inflation_radius);
    plan_on_grid(map, &grid, start, goal)
}

/// [`plan_path`] on a prebuilt planning grid.
pub fn plan_on_grid(
    map: &OccupancyGrid,
    grid: &PlanningGrid,
    start: Point2<f64>,
    goal: Point2<f64>,
) -> Result<Option<GridPath>, PlanError> {
    let s = map.world_to_grid(&start).ok_or(PlanError::StartOutOfBounds(start.x, start.y))?;
    let g = map.world_to_grid(&goal).ok_or(PlanError::GoalOutOfBounds(goal.x, goal.y))?;
    if !grid.is_free(s) {
        return Err(PlanError::StartBlocked(start.x, start.y));
    }
    if !grid.is_free(g) {
        return Err(PlanError::GoalBlocked(goal.x, goal.y));
    }
    Ok(astar(grid, s, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;

    fn free(w: usize, h: usize) -> OccupancyGrid {
        OccupancyGrid::filled(w, h, 1.0, Pose2D::identity(), CellState::Free).unwrap()
    }

    #[test]
    fn diagonal_is_optimal_on_empty_grid() {
        let map = free(5, 5);
        let p = plan_path(&map, &HashSet::new(), Point2::new(0.5, 0.5), Point2::new(4.5, 4.5), 0.0).unwrap().unwrap();
        assert_eq!((p.axial_steps, p.diagonal_steps), (0, 4));
        assert!((p.cost() - 4.0 * SQRT_2).abs() < 1e-12);
        assert_eq!(p.cells.len(), 5);
    }

    #[test]
    fn walled_in_goal_has_no_path() {
        let mut map = free(7, 7);
        for c in [(2, 2), (3, 2), (4, 2), (2, 3), (4, 3), (2, 4), (3, 4), (4, 4)] {
            map.set(CellIndex::new(c.0, c.1), CellState::Occupied);
        }
        let r = plan_path(&map, &HashSet::new(), Point2::new(0.5, 0.5), Point2::new(3.5, 3.5), 0.0);
        assert_eq!(r, Ok(None));
    }

    #[test]
    fn endpoint_errors_are_distinct() {
        let mut map = free(5, 5);
        map.set(CellIndex::new(0, 0), CellState::Occupied);
        let blocked: HashSet<_> = [CellIndex::new(4, 4)].into_iter().collect();
        let s = Point2::new(0.5, 0.5);
        let g = Point2::new(4.5, 4.5);
        let ok = Point2::new(2.5, 2.5);
        assert!(matches!(plan_path(&map, &blocked, s, ok, 0.0), Err(PlanError::StartBlocked(..))));
        assert!(matches!(plan_path(&map, &blocked, ok, g, 0.0), Err(PlanError::GoalBlocked(..))));
        assert!(matches!(
            plan_path(&map, &blocked, Point2::new(-1.0, 0.0), ok, 0.0),
            Err(PlanError::StartOutOfBounds(..))
        ));
        assert!(matches!(
            plan_path(&map, &blocked, ok, Point2::new(9.0, 0.0), 0.0),
            Err(PlanError::GoalOutOfBounds(..))
        ));
    }

    #[test]
    fn inflation_excludes_cells_near_walls() {
        let mut map = free(9, 1);
        map.set(CellIndex::new(4, 0), CellState::Occupied);
        let grid = PlanningGrid::build(&map, &HashSet::new(), 1.5);
        let frees: Vec<bool> = (0..9).map(|i| grid.is_free(CellIndex::new(i, 0))).collect();
        assert_eq!(frees, vec![true, true, true, false, false, false, true, true, true]);
    }

    #[test]
    fn unknown_is_untraversable() {
        let mut map = free(3, 1);
        map.set(CellIndex::new(1, 0), CellState::Unknown);
        let r = plan_path(&map, &HashSet::new(), Point2::new(0.5, 0.5), Point2::new(2.5, 0.5), 0.0);
        assert_eq!(r, Ok(None));
    }
}
