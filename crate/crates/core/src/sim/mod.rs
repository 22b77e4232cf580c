//! Mobile manipulator simulation: Mecanum base, range-sensor stop, 1-DoF arm
//! and two-finger gripper, grasp and release physics.

mod course;
mod geometry;
mod objects;
mod world;

pub use course::{Course, LoopLayout};

pub use geometry::{heading, point_segment, trajectory_deviation, wrap_angle, Corner, PathSpec, Point, Projection, Rect};
pub use objects::{
    default_catalog, friction_coefficient, required_grip_force, spill_probability, ObjectSpec, ReleaseOutcome,
    ReleaseStrategy, Texture, GRAVITY, MAX_MASS_G, MAX_WIDTH_CM, MIN_MASS_G, MIN_WIDTH_CM,
};
pub use world::{
    classify_grasp, gripper_point, transport_check, ultrasonic, EventKind, GraspOutcome, Metrics, ObjectState,
    PlacedObject, Pose, RobotParams, SimEvent, TraceSample, TransportEvent, TransportMonitor, Velocity, World,
    MAX_DT_MS,
};
