use nalgebra::Point2;

use super::{GridError, OccupancyGrid};

/// Distance from `start` along `bearing` to the boundary of the first cell
/// that blocks rays, stepping cell by cell (Amanatides-Woo traversal).
///
/// Returns `range_max` when nothing is hit within range or the ray leaves the
/// map first. A start cell that itself blocks yields 0.
pub fn raycast(map: &OccupancyGrid, start: &Point2<f64>, bearing: f64, range_max: f64) -> Result<f64, GridError> {
    let cell = map.world_to_grid(start).ok_or(GridError::OutOfBounds { x: start.x, y: start.y })?;
    if map.get(cell).blocks_ray() {
        return Ok(0.0);
    }

    let res = map.resolution();
    let (fx, fy) = map.world_to_grid_f(start);
    let (dy, dx) = bearing.sin_cos();
    let mut ix = cell.ix as i64;
    let mut iy = cell.iy as i64;

    let (step_x, mut t_max_x, t_delta_x) = axis_setup(dx, fx, ix, res);
    let (step_y, mut t_max_y, t_delta_y) = axis_setup(dy, fy, iy, res);

    loop {
        let t = if t_max_x < t_max_y {
            ix += step_x;
            let t = t_max_x;
            t_max_x += t_delta_x;
            t
        } else {
            iy += step_y;
            let t = t_max_y;
            t_max_y += t_delta_y;
            t
        };
        if t >= range_max {
            return Ok(range_max);
        }
        match map.get_signed(ix, iy) {
            None => return Ok(range_max),
            Some(state) if state.blocks_ray() => return Ok(t),
            Some(_) => {}
        }
    }
}

/// Step direction, distance to the first boundary crossing and distance
/// between crossings along one axis, all in meters of ray length.
fn axis_setup(dir: f64, pos: f64, index: i64, res: f64) -> (i64, f64, f64) {
    if dir > 0.0 {
        let boundary = (index + 1) as f64 - pos;
        (1, boundary * res / dir, res / dir)
    } else if dir < 0.0 {
        let boundary = pos - index as f64;
        (-1, boundary * res / -dir, res / -dir)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use crate::map::{CellIndex, CellState};
    use std::f64::consts::PI;

    fn wall_map() -> OccupancyGrid {
        let mut map = OccupancyGrid::filled(10, 10, 0.1, Pose2D::identity(), CellState::Free).unwrap();
        for iy in 0..10 {
            map.set(CellIndex::new(5, iy), CellState::Occupied);
        }
        map
    }

    #[test]
    fn free_map_returns_range_max() {
        let map = OccupancyGrid::filled(100, 100, 0.1, Pose2D::identity(), CellState::Free).unwrap();
        for k in 0..16 {
            let b = k as f64 * PI / 8.0;
            assert_eq!(raycast(&map, &Point2::new(5.0, 5.0), b, 3.0).unwrap(), 3.0);
        }
    }

    #[test]
    fn wall_ahead() {
        let map = wall_map();
        let d = raycast(&map, &Point2::new(0.05, 0.05), 0.0, 3.0).unwrap();
        assert!((d - 0.45).abs() < 1e-12, "{d}");
    }

    #[test]
    fn leaving_map_is_no_return() {
        let map = wall_map();
        assert_eq!(raycast(&map, &Point2::new(0.05, 0.05), PI, 3.0).unwrap(), 3.0);
    }

    #[test]
    fn unknown_blocks() {
        let mut map = OccupancyGrid::filled(10, 1, 0.1, Pose2D::identity(), CellState::Free).unwrap();
        map.set(CellIndex::new(3, 0), CellState::Unknown);
        let d = raycast(&map, &Point2::new(0.05, 0.05), 0.0, 3.0).unwrap();
        assert!((d - 0.25).abs() < 1e-12);
    }

    #[test]
    fn start_outside_is_error() {
        let map = wall_map();
        assert!(matches!(raycast(&map, &Point2::new(-0.5, 0.5), 0.0, 3.0), Err(GridError::OutOfBounds { .. })));
    }

    #[test]
    fn start_in_blocking_cell_is_zero() {
        let map = wall_map();
        assert_eq!(raycast(&map, &Point2::new(0.55, 0.5), 1.0, 3.0).unwrap(), 0.0);
    }
}
