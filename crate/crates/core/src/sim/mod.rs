//! Planar multi-agent navigation world with LiDAR and local replay.

pub mod geometry;
pub mod lidar;
pub mod observe;
pub mod scenario;
pub mod trajectory;
pub mod world;

pub use geometry::{Footprint, Obstacle, ObstacleKind, Point};
pub use lidar::{lidar_scan, sensor_scan};
pub use observe::{goal_bearing, observe, FrameStack, Observation};
pub use scenario::{AgentSpawn, Layout, LidarConfig, ReplayConfig, ScenarioConfig};
pub use trajectory::TrajectoryRecord;
pub use world::{
    integrate_pose, AgentState, AgentStatus, Event, HistoryRing, Kinematics, ReplayOutcome, SimMode, Snapshot,
    Termination, World, ARRIVAL_DISTANCE, CONTACT_DISTANCE,
};
