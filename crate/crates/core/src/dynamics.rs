//! Exact zero-order-hold propagation of the friction-damped double integrator
//! `p' = v`, `v' = u - kappa v`.

use crate::model::{RobotState, Status};
use crate::vec2::Vec2;

/// Planar acceleration command.
pub type ControlInput = Vec2;

/// Clips each component of `u` into `[-u_max, u_max]`.
pub fn clamp_input(u: ControlInput, u_max: f64) -> ControlInput {
    u.map(|c| c.clamp(-u_max, u_max))
}

/// Advances one robot by `dt` with `u` held constant. Eliminated robots are
/// frozen and returned unchanged.
pub fn step(state: &RobotState, u: ControlInput, kappa: f64, dt: f64) -> RobotState {
    if matches!(state.status, Status::Eliminated { .. }) {
        return *state;
    }
    // 1 - e^{-kappa dt}, accurate for small kappa dt
    let decay = -(-kappa * dt).exp_m1();
    let axis = |p: f64, v: f64, u: f64| {
        let terminal = u / kappa;
        let v_next = v - decay * (v - terminal);
        let p_next = p + terminal * dt + (v - terminal) * decay / kappa;
        (p_next, v_next)
    };
    let (px, vx) = axis(state.p.x, state.v.x, u.x);
    let (py, vy) = axis(state.p.y, state.v.y, u.y);
    RobotState {
        p: Vec2::new(px, py),
        v: Vec2::new(vx, vy),
        status: state.status,
    }
}
