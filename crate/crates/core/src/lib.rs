//! Deterministic 2D localization and navigation for a differential-drive
//! robot: occupancy-grid maps, simulated encoders and LiDAR, wheel odometry,
//! Kalman fusion, Monte Carlo localization, NDT scan matching and
//! waypoint navigation with obstacle detection zones.

pub mod fusion;
pub mod geometry;
pub mod harness;
pub mod map;
pub mod mcl;
pub mod navigation;
pub mod ndt;
pub mod odometry;
pub mod rng;
pub mod scan;
pub mod sim;
pub mod worlds;

pub use geometry::{normalize_angle, Pose2D};
pub use map::{CellIndex, CellState, OccupancyGrid};
pub use scan::LidarScan;
