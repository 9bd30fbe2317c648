//! Built-in synthetic maps and obstacle shapes used by scenarios, tests and
//! the browser demo.

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::geometry::Pose2D;
use crate::map::{CellState, OccupancyGrid};

const WALL: f64 = 0.1;

/// Axis-aligned rectangle or disc that can be stamped into a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Rect { min: [f64; 2], max: [f64; 2] },
    Disc { center: [f64; 2], radius: f64 },
}

impl Shape {
    pub fn stamp(&self, map: &mut OccupancyGrid, state: CellState) {
        match *self {
            Shape::Rect { min, max } => map.fill_rect(Point2::new(min[0], min[1]), Point2::new(max[0], max[1]), state),
            Shape::Disc { center, radius } => map.fill_disc(Point2::new(center[0], center[1]), radius, state),
        }
    }

    pub fn contains(&self, p: &Point2<f64>) -> bool {
        match *self {
            Shape::Rect { min, max } => p.x >= min[0] && p.x <= max[0] && p.y >= min[1] && p.y <= max[1],
            Shape::Disc { center, radius } => (p - Point2::new(center[0], center[1])).norm() < radius,
        }
    }
}

fn rect(map: &mut OccupancyGrid, x0: f64, y0: f64, x1: f64, y1: f64) {
    Shape::Rect { min: [x0, y0], max: [x1, y1] }.stamp(map, CellState::Occupied);
}

fn disc(map: &mut OccupancyGrid, x: f64, y: f64, radius: f64) {
    Shape::Disc { center: [x, y], radius }.stamp(map, CellState::Occupied);
}

fn free(map: &mut OccupancyGrid, x0: f64, y0: f64, x1: f64, y1: f64) {
    Shape::Rect { min: [x0, y0], max: [x1, y1] }.stamp(map, CellState::Free);
}

fn walled_box(width: f64, height: f64, resolution: f64) -> OccupancyGrid {
    let w = (width / resolution).round() as usize;
    let h = (height / resolution).round() as usize;
    let mut map =
        OccupancyGrid::filled(w, h, resolution, Pose2D::identity(), CellState::Free).expect("positive extent");
    rect(&mut map, 0.0, 0.0, width, WALL);
    rect(&mut map, 0.0, height - WALL, width, height);
    rect(&mut map, 0.0, 0.0, WALL, height);
    rect(&mut map, width - WALL, 0.0, width, height);
    map
}

/// Empty walled room.
pub fn open_room(width: f64, height: f64, resolution: f64) -> OccupancyGrid {
    walled_box(width, height, resolution)
}

/// 10 m x 10 m floorplan at 5 cm: an off-center corridor (y in 4.0..5.8)
/// with four rooms of unequal size, each with one door at a different
/// position and its own furniture, so that no two places look alike.
pub fn four_room_floorplan() -> OccupancyGrid {
    let mut m = walled_box(10.0, 10.0, 0.05);
    // corridor walls
    rect(&mut m, 0.0, 3.95, 10.0, 4.05);
    rect(&mut m, 0.0, 5.75, 10.0, 5.85);
    // partitions between rooms
    rect(&mut m, 3.75, 0.0, 3.85, 4.0);
    rect(&mut m, 5.15, 5.8, 5.25, 10.0);
    // doors, placed so that no rotation or reflection maps one onto another
    free(&mut m, 2.3, 3.9, 3.2, 4.1);
    free(&mut m, 5.0, 3.9, 5.9, 4.1);
    free(&mut m, 0.8, 5.7, 1.7, 5.9);
    free(&mut m, 8.6, 5.7, 9.5, 5.9);
    // bottom-left: table, shelf, chair and a sink
    rect(&mut m, 1.2, 1.2, 2.4, 1.8);
    rect(&mut m, 0.05, 2.6, 0.4, 3.6);
    disc(&mut m, 2.9, 0.9, 0.2);
    rect(&mut m, 3.2, 2.6, 3.75, 3.0);
    // bottom-right: counter, column, crate, two chairs and a trolley
    rect(&mut m, 9.4, 0.5, 9.9, 3.0);
    disc(&mut m, 6.2, 2.0, 0.25);
    rect(&mut m, 4.5, 0.1, 5.3, 0.5);
    disc(&mut m, 8.0, 1.2, 0.2);
    disc(&mut m, 4.6, 2.9, 0.15);
    rect(&mut m, 7.6, 3.3, 8.6, 3.6);
    // top-left: bed, round table, wardrobe and a plant
    rect(&mut m, 0.1, 8.0, 2.1, 9.9);
    disc(&mut m, 3.6, 7.8, 0.4);
    rect(&mut m, 4.4, 9.2, 5.15, 9.9);
    disc(&mut m, 0.5, 6.4, 0.15);
    // top-right: cabinet, pillar, desk and a bin
    rect(&mut m, 5.25, 7.0, 5.7, 8.5);
    disc(&mut m, 8.5, 8.3, 0.3);
    rect(&mut m, 6.8, 9.3, 8.0, 9.9);
    disc(&mut m, 9.6, 6.6, 0.15);
    // corridor: bench, cupboard, columns and a recess
    rect(&mut m, 6.5, 4.05, 7.5, 4.3);
    rect(&mut m, 0.1, 5.5, 1.0, 5.75);
    disc(&mut m, 7.6, 5.5, 0.15);
    disc(&mut m, 3.9, 4.25, 0.15);
    rect(&mut m, 9.6, 4.05, 9.9, 4.6);
    free(&mut m, 4.4, 5.75, 4.9, 5.95);
    rect(&mut m, 4.4, 5.95, 4.9, 6.05);
    m
}

/// Straight corridor 12 m long and 3 m wide running along +x.
pub fn corridor() -> OccupancyGrid {
    walled_box(12.0, 3.0, 0.05)
}
