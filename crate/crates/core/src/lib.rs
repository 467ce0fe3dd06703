//! Safe multi-robot "red light, green light" simulation.
//!
//! Robots are friction-damped double integrators racing toward a finish
//! line. Each one runs a two-mode nominal controller whose output is passed
//! through a per-robot quadratic program that enforces exponential control
//! barrier constraints: stay inside the playground, keep a minimum distance
//! to other robots and to eliminated ones, and respect a speed limit. A
//! referee eliminates robots that move while the light is red.
//!
//! Layering, bottom-up: [`vec2`] and [`model`] hold plain data, [`dynamics`]
//! integrates one step exactly, [`nominal`] and [`barrier`] produce the
//! nominal input and the constraint rows, [`qp`] solves the filter,
//! [`engine`] runs the game, and [`scenario`] / [`output`] handle files.

pub mod barrier;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod model;
pub mod nominal;
pub mod output;
pub mod qp;
pub mod scenario;
pub mod vec2;

pub use barrier::{assemble, BarrierFamily, BarrierSnapshot, BarrierSource, ConstraintRow};
pub use dynamics::{clamp_input, step, ControlInput};
pub use engine::{certify, min_separations, run, SafetyReport, SimulationLog};
pub use error::{ConfigError, DegenerateGeometry, EmitError, RunError, Violation};
pub use model::{
    validate_scenario, BrakeLaw, GameSchedule, Playground, RobotParams, RobotState, ScenarioConfig,
    Status,
};
pub use nominal::{estimated_braking_time, ControllerMode, Mode};
pub use output::{emit, EmitOptions, OutputBundle};
pub use qp::{solve, verify_kkt, QpProblem, QpSolution};
pub use scenario::{format_scenario, generate_paper_scenario, parse_scenario, parse_scenario_str};
pub use vec2::{Axis, Vec2};
