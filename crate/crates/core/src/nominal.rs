//! Two-mode nominal controller: drive toward the finish line while green,
//! brake at full authority from a slow-down trigger until the next green.
//!
//! The trigger fires the first sampled instant at which the remaining time to
//! red drops to `eta` times a conservative braking-time estimate. The estimate
//! uses the lower friction bound, so the true stop always comes earlier.

use crate::dynamics::ControlInput;
use crate::model::{BrakeLaw, GameSchedule, RobotParams, RobotState};
use crate::vec2::{Axis, Vec2};

/// Upper bound on the time needed to stop one axis from speed `v_axis`
/// under deceleration `u_max` and friction at least `kappa_low`.
pub fn estimated_braking_time_axis(v_axis: f64, u_max: f64, kappa_low: f64) -> f64 {
    // ln((U/k + |v|) / (U/k)) / k
    (kappa_low * v_axis.abs() / u_max).ln_1p() / kappa_low
}

/// Braking-time estimate for the slower of the two axes.
pub fn estimated_braking_time(v: Vec2, u_max: f64, kappa_low: f64) -> f64 {
    estimated_braking_time_axis(v.x, u_max, kappa_low)
        .max(estimated_braking_time_axis(v.y, u_max, kappa_low))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Advance,
    Brake,
}

/// Controller mode within one green interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerMode {
    pub mode: Mode,
    /// Sampled time at which braking started in this interval.
    pub trigger_time: Option<f64>,
    /// Zero-based green interval the mode belongs to.
    pub interval: usize,
}

impl Default for ControllerMode {
    fn default() -> Self {
        Self::advance(0)
    }
}

impl ControllerMode {
    pub fn advance(interval: usize) -> Self {
        Self {
            mode: Mode::Advance,
            trigger_time: None,
            interval,
        }
    }
}

/// Updates the latched mode for time `t`. A new green interval resets to
/// `Advance`; once `Brake` fires it holds until the next green.
pub fn update_mode(
    t: f64,
    state: &RobotState,
    params: &RobotParams,
    schedule: &GameSchedule,
    current: ControllerMode,
) -> ControllerMode {
    let k = schedule.interval_at(t);
    let mut next = if k == current.interval {
        current
    } else {
        ControllerMode::advance(k)
    };
    if next.mode == Mode::Advance {
        let budget = params.eta * estimated_braking_time(state.v, params.u_max, params.kappa_low);
        if schedule.red_time(k) - t <= budget {
            next.mode = Mode::Brake;
            next.trigger_time = Some(t);
        }
    }
    next
}

fn brake_axis(v: f64, params: &RobotParams) -> f64 {
    match params.brake_law {
        BrakeLaw::Tanh => -params.u_max * (params.smoothing_eps * v).tanh(),
        BrakeLaw::Sign => {
            if v > 0.0 {
                -params.u_max
            } else if v < 0.0 {
                params.u_max
            } else {
                0.0
            }
        }
    }
}

/// Nominal acceleration for the current mode. `t` is unused by the law
/// itself; the mode already encodes the schedule.
pub fn nominal_input(
    _t: f64,
    state: &RobotState,
    params: &RobotParams,
    mode: &ControllerMode,
) -> ControlInput {
    match mode.mode {
        Mode::Advance => Vec2::new(-params.gain * state.v.x, params.u_max),
        Mode::Brake => {
            let [x, y] = Axis::BOTH.map(|a| brake_axis(state.v.get(a), params));
            Vec2::new(x, y)
        }
    }
}
