//! Robust barrier constraints on a robot's acceleration.
//!
//! Each builder turns one barrier `h` into an affine row `a·u ≤ b`. Position
//! barriers have relative degree two and use the exponential form
//! `ḧ + 2γḣ + γ²h ≥ 0`; the velocity barrier has relative degree one and uses
//! `ḣ + γh ≥ 0`. The unknown friction enters every condition, so each bound
//! substitutes the worst case over `[kappa_low, kappa_up]`: any input meeting
//! the row meets the true condition for every admissible friction.

use std::fmt;

use crate::error::DegenerateGeometry;
use crate::model::{Playground, RobotParams, RobotState};
use crate::vec2::{Axis, Vec2};

/// Which barrier a row or value comes from. Indices name the other robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BarrierSource {
    PlaygroundX,
    PlaygroundY,
    Pair(usize),
    VelX,
    VelY,
    Obstacle(usize),
}

impl BarrierSource {
    /// Barrier family used for aggregate reporting.
    pub fn family(&self) -> BarrierFamily {
        match self {
            BarrierSource::PlaygroundX | BarrierSource::PlaygroundY => BarrierFamily::Playground,
            BarrierSource::Pair(_) => BarrierFamily::Pairwise,
            BarrierSource::VelX | BarrierSource::VelY => BarrierFamily::Velocity,
            BarrierSource::Obstacle(_) => BarrierFamily::Obstacle,
        }
    }
}

impl fmt::Display for BarrierSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BarrierSource::PlaygroundX => write!(f, "h1x"),
            BarrierSource::PlaygroundY => write!(f, "h1y"),
            BarrierSource::Pair(j) => write!(f, "h2[{j}]"),
            BarrierSource::VelX => write!(f, "h3x"),
            BarrierSource::VelY => write!(f, "h3y"),
            BarrierSource::Obstacle(j) => write!(f, "h4[{j}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BarrierFamily {
    Playground,
    Pairwise,
    Velocity,
    Obstacle,
}

impl BarrierFamily {
    pub const ALL: [BarrierFamily; 4] = [
        BarrierFamily::Playground,
        BarrierFamily::Pairwise,
        BarrierFamily::Velocity,
        BarrierFamily::Obstacle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BarrierFamily::Playground => "playground",
            BarrierFamily::Pairwise => "pairwise",
            BarrierFamily::Velocity => "velocity",
            BarrierFamily::Obstacle => "obstacle",
        }
    }
}

/// One affine inequality `a·u ≤ b` on a robot's input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintRow {
    pub a: Vec2,
    pub b: f64,
    pub source: BarrierSource,
    /// Whether the QP may relax this row when the problem is infeasible.
    pub softenable: bool,
}

impl ConstraintRow {
    pub fn barrier(a: Vec2, b: f64, source: BarrierSource) -> Self {
        Self {
            a,
            b,
            source,
            softenable: true,
        }
    }

    /// `a·u - b`; positive means violated.
    pub fn excess(&self, u: Vec2) -> f64 {
        self.a.dot(u) - self.b
    }
}

/// Playground barrier on one axis together with its rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisBarrier {
    pub row: ConstraintRow,
    pub h: f64,
    pub h_dot: f64,
}

fn playground_axis(
    p: f64,
    v: f64,
    half: f64,
    margin: f64,
    params: &RobotParams,
    axis: Axis,
) -> AxisBarrier {
    let off = p - half;
    let reach = half - margin;
    let h = reach * reach - off * off;
    let h_dot = -2.0 * off * v;
    let g = params.gamma1;
    let b = -2.0 * params.kappa_up * (off * v).abs() - 2.0 * v * v + g * g * h + 2.0 * g * h_dot;
    let source = match axis {
        Axis::X => BarrierSource::PlaygroundX,
        Axis::Y => BarrierSource::PlaygroundY,
    };
    AxisBarrier {
        row: ConstraintRow::barrier(Vec2::on_axis(axis, 2.0 * off), b, source),
        h,
        h_dot,
    }
}

/// Keeps the robot center at least `1.1 r0` inside each wall; returns the
/// x and y barriers.
pub fn playground_rows(
    state: &RobotState,
    params: &RobotParams,
    playground: &Playground,
) -> [AxisBarrier; 2] {
    let m = playground.margin();
    [
        playground_axis(
            state.p.x,
            state.v.x,
            playground.l_x / 2.0,
            m,
            params,
            Axis::X,
        ),
        playground_axis(
            state.p.y,
            state.v.y,
            playground.l_y / 2.0,
            m,
            params,
            Axis::Y,
        ),
    ]
}

/// Distance barrier `d - d0` between two robots, seen from robot `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairBarrier {
    pub row: ConstraintRow,
    pub h: f64,
    pub h_dot: f64,
    /// Bound of the coupled constraint on `u_i - u_j`, before splitting.
    pub coupled_b: f64,
}

#[allow(clippy::too_many_arguments)]
fn distance_barrier(
    p_i: Vec2,
    v_i: Vec2,
    p_j: Vec2,
    v_j: Vec2,
    params_i: &RobotParams,
    gamma: f64,
    d0: f64,
    share: f64,
    source: BarrierSource,
    ids: (usize, usize),
) -> Result<PairBarrier, DegenerateGeometry> {
    let p = p_i - p_j;
    let v = v_i - v_j;
    let d = p.norm();
    if d <= 0.0 || !d.is_finite() {
        return Err(DegenerateGeometry {
            i: ids.0,
            j: ids.1,
            distance: d,
        });
    }
    let closing = p.dot(v);
    let h = d - d0;
    let h_dot = closing / d;
    let (k_low, k_up) = (params_i.kappa_low, params_i.kappa_up);
    let coupled_b = -k_up * closing.abs() - (k_up - k_low) * p.dot(v_j).abs() + v.norm_sq()
        - closing * closing / (d * d)
        + gamma * gamma * d * h
        + 2.0 * gamma * d * h_dot;
    Ok(PairBarrier {
        row: ConstraintRow::barrier(-p, share * coupled_b, source),
        h,
        h_dot,
        coupled_b,
    })
}

/// Robot `i`'s share of the pairwise collision constraint with robot `j`.
/// The coupled bound is split in proportion to the two acceleration limits.
pub fn pairwise_row(
    state_i: &RobotState,
    state_j: &RobotState,
    params_i: &RobotParams,
    params_j: &RobotParams,
    d0: f64,
) -> Result<PairBarrier, DegenerateGeometry> {
    let share = params_i.u_max / (params_i.u_max + params_j.u_max);
    distance_barrier(
        state_i.p,
        state_i.v,
        state_j.p,
        state_j.v,
        params_i,
        params_i.gamma2,
        d0,
        share,
        BarrierSource::Pair(params_j.id),
        (params_i.id, params_j.id),
    )
}

/// Avoidance of a motionless obstacle (an eliminated robot). The obstacle has
/// no control authority, so robot `i` carries the whole bound.
pub fn obstacle_row(
    state_i: &RobotState,
    obstacle: Vec2,
    obstacle_id: usize,
    params_i: &RobotParams,
    d0: f64,
) -> Result<PairBarrier, DegenerateGeometry> {
    distance_barrier(
        state_i.p,
        state_i.v,
        obstacle,
        Vec2::ZERO,
        params_i,
        params_i.gamma4,
        d0,
        1.0,
        BarrierSource::Obstacle(obstacle_id),
        (params_i.id, obstacle_id),
    )
}

/// Per-axis speed limits `V² - v_m² ≥ 0`.
pub fn velocity_rows(state: &RobotState, params: &RobotParams) -> [AxisBarrier; 2] {
    Axis::BOTH.map(|axis| {
        let v = state.v.get(axis);
        let h = params.v_max * params.v_max - v * v;
        let b = 2.0 * params.kappa_low * v * v + params.gamma3 * h;
        let source = match axis {
            Axis::X => BarrierSource::VelX,
            Axis::Y => BarrierSource::VelY,
        };
        AxisBarrier {
            row: ConstraintRow::barrier(Vec2::on_axis(axis, 2.0 * v), b, source),
            h,
            // first-order barrier: the derivative depends on u
            h_dot: f64::NAN,
        }
    })
}

/// Every barrier value of one robot at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSnapshot {
    pub time: f64,
    pub h1x: f64,
    pub h1y: f64,
    /// Pairwise barriers, ordered by the other robot's id.
    pub h2: Vec<(usize, f64)>,
    pub h3x: f64,
    pub h3y: f64,
    /// Obstacle barriers, ordered by the obstacle robot's id.
    pub h4: Vec<(usize, f64)>,
}

impl BarrierSnapshot {
    pub fn entries(&self) -> impl Iterator<Item = (BarrierSource, f64)> + '_ {
        [
            (BarrierSource::PlaygroundX, self.h1x),
            (BarrierSource::PlaygroundY, self.h1y),
        ]
        .into_iter()
        .chain(self.h2.iter().map(|&(j, h)| (BarrierSource::Pair(j), h)))
        .chain([
            (BarrierSource::VelX, self.h3x),
            (BarrierSource::VelY, self.h3y),
        ])
        .chain(
            self.h4
                .iter()
                .map(|&(j, h)| (BarrierSource::Obstacle(j), h)),
        )
    }

    pub fn is_certified(&self, cert_tol: f64) -> bool {
        self.entries().all(|(_, h)| h >= -cert_tol)
    }
}

/// Stacked rows for one live robot plus the barrier values they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Assembly {
    pub rows: Vec<ConstraintRow>,
    pub snapshot: BarrierSnapshot,
}

/// Builds all rows for live robot `i`: two playground rows, one pairwise row
/// per other live robot, two velocity rows, and one obstacle row per
/// eliminated robot. Finished robots are ignored.
pub fn assemble(
    t: f64,
    i: usize,
    states: &[RobotState],
    params: &[RobotParams],
    playground: &Playground,
) -> Result<Assembly, DegenerateGeometry> {
    let me = &states[i];
    let mine = &params[i];
    let mut rows = Vec::with_capacity(states.len() + 3);
    let mut h2 = Vec::new();
    let mut h4 = Vec::new();

    let [px, py] = playground_rows(me, mine, playground);
    rows.push(px.row);
    rows.push(py.row);

    for (j, other) in states.iter().enumerate() {
        if j == i || !other.is_live() {
            continue;
        }
        let pair = pairwise_row(me, other, mine, &params[j], playground.d0)?;
        rows.push(pair.row);
        h2.push((j, pair.h));
    }

    let [vx, vy] = velocity_rows(me, mine);
    rows.push(vx.row);
    rows.push(vy.row);

    for (j, other) in states.iter().enumerate() {
        if j != i && other.is_eliminated() {
            let obs = obstacle_row(me, other.p, j, mine, playground.d0)?;
            rows.push(obs.row);
            h4.push((j, obs.h));
        }
    }

    Ok(Assembly {
        rows,
        snapshot: BarrierSnapshot {
            time: t,
            h1x: px.h,
            h1y: py.h,
            h2,
            h3x: vx.h,
            h3y: vy.h,
            h4,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Status;
    use proptest::prelude::*;

    const KL: f64 = 0.0141;
    const KU: f64 = 0.2368;

    fn pg() -> Playground {
        Playground {
            l_x: 5.0,
            l_y: 35.0,
            g_y: 25.0,
            r0: 0.3,
            d0: 0.4,
        }
    }

    fn robot(id: usize, u_max: f64) -> RobotParams {
        RobotParams::with_limits(id, 2.0, u_max, 1.2, 0.1)
    }

    fn at(p: Vec2, v: Vec2) -> RobotState {
        RobotState {
            p,
            v,
            status: Status::Live,
        }
    }

    // Direct transcriptions of the robust rows, written out term by term and
    // kept apart from the builders above.
    mod oracle {
        use super::*;

        pub fn playground_x(px: f64, vx: f64, lx: f64, r0: f64, g: f64) -> (Vec2, f64) {
            let lbar = lx / 2.0;
            let h = (lbar - 1.1 * r0).powi(2) - (px - lbar).powi(2);
            let hd = -2.0 * (px - lbar) * vx;
            let a = Vec2::new(2.0 * (px - lbar), 0.0);
            let b = -2.0 * KU * ((px - lbar) * vx).abs() - 2.0 * vx.powi(2)
                + g.powi(2) * h
                + 2.0 * g * hd;
            (a, b)
        }

        pub fn pair_coupled(
            pi: Vec2,
            vi: Vec2,
            pj: Vec2,
            vj: Vec2,
            d0: f64,
            g: f64,
        ) -> (Vec2, f64) {
            let (px, py) = (pi.x - pj.x, pi.y - pj.y);
            let (vx, vy) = (vi.x - vj.x, vi.y - vj.y);
            let d = (px * px + py * py).sqrt();
            let h = d - d0;
            let hd = (px * vx + py * vy) / d;
            let b = -KU * (px * vx + py * vy).abs() - (KU - KL) * (px * vj.x + py * vj.y).abs()
                + (vx * vx + vy * vy)
                - (px * vx + py * vy).powi(2) / d.powi(2)
                + g.powi(2) * d * h
                + 2.0 * g * d * hd;
            (Vec2::new(-px, -py), b)
        }

        pub fn velocity(vm: f64, vmax: f64, g: f64) -> (f64, f64) {
            (
                2.0 * vm,
                2.0 * KL * vm.powi(2) + g * (vmax.powi(2) - vm.powi(2)),
            )
        }

        /// True-friction bounds before the worst-case substitution.
        pub fn playground_x_true(px: f64, vx: f64, lx: f64, r0: f64, g: f64, kappa: f64) -> f64 {
            let lbar = lx / 2.0;
            let h = (lbar - 1.1 * r0).powi(2) - (px - lbar).powi(2);
            let hd = -2.0 * (px - lbar) * vx;
            2.0 * (px - lbar) * kappa * vx - 2.0 * vx.powi(2) + g.powi(2) * h + 2.0 * g * hd
        }

        #[allow(clippy::too_many_arguments)]
        pub fn pair_true(
            pi: Vec2,
            vi: Vec2,
            pj: Vec2,
            vj: Vec2,
            d0: f64,
            g: f64,
            ki: f64,
            kj: f64,
        ) -> f64 {
            let p = pi - pj;
            let v = vi - vj;
            let d = p.norm();
            let fr = -p.dot(vi * ki - vj * kj);
            fr + v.norm_sq() - p.dot(v).powi(2) / d.powi(2)
                + g * g * d * (d - d0)
                + 2.0 * g * p.dot(v)
        }

        pub fn velocity_true(vm: f64, vmax: f64, g: f64, kappa: f64) -> f64 {
            2.0 * kappa * vm.powi(2) + g * (vmax.powi(2) - vm.powi(2))
        }
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn centered_robot_has_vacuous_playground_row() {
        let s = at(Vec2::new(2.5, 17.5), Vec2::ZERO);
        let [x, _] = playground_rows(&s, &robot(0, 0.3), &pg());
        assert_eq!(x.row.a, Vec2::ZERO);
        assert!((x.h - 4.7089).abs() < 1e-12);
        assert!((x.row.b - 117.7225).abs() < 1e-10);
    }

    #[test]
    fn robot_on_margin_may_not_push_outward() {
        let m = 1.1 * 0.3;
        let s = at(Vec2::new(m, 10.0), Vec2::ZERO);
        let [x, _] = playground_rows(&s, &robot(0, 0.3), &pg());
        assert!(x.h.abs() < 1e-12);
        assert_eq!(x.h_dot, 0.0);
        assert!(x.row.b.abs() < 1e-10);
        assert!(x.row.a.x < 0.0 && x.row.a.y == 0.0);
        // u_x ≥ 0 is the admissible side
        assert!(x.row.excess(Vec2::new(0.1, 0.0)) < 0.0);
        assert!(x.row.excess(Vec2::new(-0.1, 0.0)) > 0.0);
    }

    #[test]
    fn stationary_pair_far_apart() {
        let si = at(Vec2::new(10.0, 0.0), Vec2::ZERO);
        let sj = at(Vec2::ZERO, Vec2::ZERO);
        let pair = pairwise_row(&si, &sj, &robot(0, 0.3), &robot(1, 0.3), 0.4).unwrap();
        assert!((pair.h - 9.6).abs() < 1e-12);
        assert_eq!(pair.h_dot, 0.0);
        assert!((pair.coupled_b - 2400.0).abs() < 1e-9);
        assert!((pair.row.b - 1200.0).abs() < 1e-9);
        assert_eq!(pair.row.a, Vec2::new(-10.0, 0.0));
        assert_eq!(pair.row.source, BarrierSource::Pair(1));
    }

    #[test]
    fn common_drift_leaves_only_static_and_robustness_terms() {
        let v = Vec2::new(0.3, 1.2);
        let (pi, pj) = (Vec2::new(1.0, 2.0), Vec2::new(0.2, 1.5));
        let pair =
            pairwise_row(&at(pi, v), &at(pj, v), &robot(0, 0.3), &robot(1, 0.3), 0.4).unwrap();
        assert_eq!(pair.h_dot, 0.0);
        let p = pi - pj;
        let d = p.norm();
        let expected = -(KU - KL) * p.dot(v).abs() + 25.0 * d * (d - 0.4);
        assert!((pair.coupled_b - expected).abs() < 1e-12);
    }

    #[test]
    fn split_rows_sum_to_coupled_constraint() {
        let (pi, vi) = (Vec2::new(1.0, 2.0), Vec2::new(0.1, 0.9));
        let (pj, vj) = (Vec2::new(1.3, 2.6), Vec2::new(-0.2, 0.4));
        let (ri, rj) = (robot(0, 0.2), robot(1, 0.5));
        let from_i = pairwise_row(&at(pi, vi), &at(pj, vj), &ri, &rj, 0.4).unwrap();
        let from_j = pairwise_row(&at(pj, vj), &at(pi, vi), &rj, &ri, 0.4).unwrap();
        // Pick inputs on both boundaries; the summed inequality is the
        // coupled one with bound equal to the share-weighted blend.
        let ui = from_i.row.a * (from_i.row.b / from_i.row.a.norm_sq());
        let uj = from_j.row.a * (from_j.row.b / from_j.row.a.norm_sq());
        let coupled_lhs = -(pi - pj).dot(ui - uj);
        let blend = 0.2 / 0.7 * from_i.coupled_b + 0.5 / 0.7 * from_j.coupled_b;
        assert!((coupled_lhs - blend).abs() < 1e-12);
        // identical robots see the same coupled bound, so shares add to one
        let (a, b) = (robot(0, 0.3), robot(1, 0.3));
        let s = at(pi, vi);
        let o = at(pj, vi);
        let x = pairwise_row(&s, &o, &a, &b, 0.4).unwrap();
        let y = pairwise_row(&o, &s, &b, &a, 0.4).unwrap();
        assert!((x.row.b + y.row.b - x.coupled_b).abs() < 1e-12);
    }

    #[test]
    fn velocity_rows_at_rest_and_at_limit() {
        let p = robot(0, 0.3);
        let [x, _] = velocity_rows(&at(Vec2::ZERO, Vec2::ZERO), &p);
        assert_eq!(x.row.a, Vec2::ZERO);
        assert_eq!(x.row.b, 5.0 * 4.0);
        let [x, _] = velocity_rows(&at(Vec2::ZERO, Vec2::new(2.0, 0.0)), &p);
        assert_eq!(x.h, 0.0);
        assert_eq!(x.row.a, Vec2::new(4.0, 0.0));
        assert!((x.row.b - 0.1128).abs() < 1e-15);
        // u_x ≤ 0.0282
        assert!((x.row.b / x.row.a.x - 0.0282).abs() < 1e-15);
    }

    #[test]
    fn obstacle_at_unit_distance() {
        let s = at(Vec2::new(1.0, 0.0), Vec2::ZERO);
        let obs = obstacle_row(&s, Vec2::ZERO, 3, &robot(0, 0.3), 0.4).unwrap();
        assert!((obs.row.b - 15.0).abs() < 1e-12);
        assert_eq!(obs.row.a, Vec2::new(-1.0, 0.0));
        assert_eq!(obs.row.source, BarrierSource::Obstacle(3));
    }

    #[test]
    fn obstacle_is_unsplit_pair_with_still_partner() {
        let s = at(Vec2::new(1.0, 0.7), Vec2::new(-0.4, 0.3));
        let still = at(Vec2::new(0.2, 0.1), Vec2::ZERO);
        let p = robot(0, 0.3);
        let obs = obstacle_row(&s, still.p, 1, &p, 0.4).unwrap();
        let pair = pairwise_row(&s, &still, &p, &robot(1, 0.3), 0.4).unwrap();
        assert_eq!(obs.row.b, pair.coupled_b);
        assert_eq!(obs.row.a, pair.row.a);
    }

    #[test]
    fn approaching_head_on_lowers_the_bound() {
        let p = robot(0, 0.3);
        let still =
            obstacle_row(&at(Vec2::new(1.0, 0.0), Vec2::ZERO), Vec2::ZERO, 1, &p, 0.4).unwrap();
        let closing = obstacle_row(
            &at(Vec2::new(1.0, 0.0), Vec2::new(-0.5, 0.0)),
            Vec2::ZERO,
            1,
            &p,
            0.4,
        )
        .unwrap();
        // -KU·0.5 + 0.25 - 0.25 + 15 - 5 = 9.8816 < 15
        assert!((closing.row.b - (15.0 - 5.0 - KU * 0.5)).abs() < 1e-12);
        assert!(closing.row.b < still.row.b);
    }

    #[test]
    fn coincident_robots_are_degenerate() {
        let s = at(Vec2::new(1.0, 1.0), Vec2::ZERO);
        let err = pairwise_row(&s, &s, &robot(0, 0.3), &robot(1, 0.3), 0.4).unwrap_err();
        assert_eq!((err.i, err.j), (0, 1));
    }

    fn live_and_dead(n_live: usize, n_dead: usize) -> (Vec<RobotState>, Vec<RobotParams>) {
        let mut states = Vec::new();
        for k in 0..n_live + n_dead {
            let p = Vec2::new(0.5 + (k % 11) as f64 * 0.434, 1.0 + (k / 11) as f64 * 3.0);
            let status = if k >= n_live {
                Status::Eliminated {
                    at_time: 7.0,
                    at_position: p,
                }
            } else {
                Status::Live
            };
            states.push(RobotState {
                p,
                v: Vec2::ZERO,
                status,
            });
        }
        let params = (0..states.len()).map(|i| robot(i, 0.3)).collect();
        (states, params)
    }

    #[test]
    fn assembly_row_counts() {
        let (s, p) = live_and_dead(22, 0);
        assert_eq!(assemble(0.0, 0, &s, &p, &pg()).unwrap().rows.len(), 25);
        let (s, p) = live_and_dead(1, 0);
        let a = assemble(0.0, 0, &s, &p, &pg()).unwrap();
        assert_eq!(a.rows.len(), 4);
        assert!(a.snapshot.h2.is_empty() && a.snapshot.h4.is_empty());
        let (s, p) = live_and_dead(18, 4);
        let a = assemble(0.0, 3, &s, &p, &pg()).unwrap();
        assert_eq!(a.rows.len(), 25);
        assert_eq!(a.snapshot.h2.len(), 17);
        assert_eq!(
            a.snapshot.h4.iter().map(|e| e.0).collect::<Vec<_>>(),
            vec![18, 19, 20, 21]
        );
    }

    #[test]
    fn finished_robots_leave_the_arena() {
        let (mut s, p) = live_and_dead(3, 0);
        s[2].status = Status::Finished { at_time: 1.0 };
        let a = assemble(0.0, 0, &s, &p, &pg()).unwrap();
        assert_eq!(a.rows.len(), 5);
    }

    #[test]
    fn start_grid_is_inside_the_safe_set() {
        use crate::model::{initial_grid, GameSchedule, ScenarioConfig};
        let config = ScenarioConfig {
            robots: (0..22).map(|i| robot(i, 0.3)).collect(),
            playground: pg(),
            schedule: GameSchedule {
                green_times: vec![0.0],
                red_times: vec![f64::INFINITY],
                duration: 1.0,
            },
            dt: 0.01,
            rng_seed: 0,
            move_eps: 0.01,
            slack_weight: 1e6,
            cert_tol: 0.0,
            start_rows: 2,
            start_cols: 11,
        };
        let states = initial_grid(&config).unwrap();
        for i in 0..22 {
            let a = assemble(0.0, i, &states, &config.robots, &config.playground).unwrap();
            assert!(a.snapshot.is_certified(0.0), "{:?}", a.snapshot);
        }
    }

    fn arb_vec(r: f64) -> impl Strategy<Value = Vec2> {
        (-r..r, -r..r).prop_map(|(x, y)| Vec2::new(x, y))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn builders_match_transcription(
            pi in (0.0..5.0f64, 0.0..35.0f64), vi in arb_vec(2.0),
            dp in arb_vec(3.0), vj in arb_vec(2.0),
        ) {
            let pi = Vec2::new(pi.0, pi.1);
            prop_assume!(dp.norm() > 1e-3);
            let pj = pi + dp;
            let (ri, rj) = (robot(0, 0.35), robot(1, 0.25));
            let [x, _] = playground_rows(&at(pi, vi), &ri, &pg());
            let (a, b) = oracle::playground_x(pi.x, vi.x, 5.0, 0.3, 5.0);
            prop_assert_eq!(x.row.a, a);
            prop_assert!(rel_close(x.row.b, b, 1e-12));

            let pair = pairwise_row(&at(pi, vi), &at(pj, vj), &ri, &rj, 0.4).unwrap();
            let (a, b) = oracle::pair_coupled(pi, vi, pj, vj, 0.4, 5.0);
            prop_assert!(rel_close(pair.row.a.x, a.x, 1e-12) && rel_close(pair.row.a.y, a.y, 1e-12));
            prop_assert!(rel_close(pair.coupled_b, b, 1e-12));
            prop_assert!(rel_close(pair.row.b, 0.35 / 0.6 * b, 1e-12));

            let [vx, vy] = velocity_rows(&at(pi, vi), &ri);
            let (a, b) = oracle::velocity(vi.x, 2.0, 5.0);
            prop_assert_eq!(vx.row.a.x, a);
            prop_assert!(rel_close(vx.row.b, b, 1e-12));
            let (a, b) = oracle::velocity(vi.y, 2.0, 5.0);
            prop_assert_eq!(vy.row.a.y, a);
            prop_assert!(rel_close(vy.row.b, b, 1e-12));
        }

        #[test]
        fn robust_bounds_never_exceed_true_bounds(
            pi in (0.0..5.0f64, 0.0..35.0f64), vi in arb_vec(2.0),
            dp in arb_vec(3.0), vj in arb_vec(2.0),
            ki in KL..KU, kj in KL..KU,
        ) {
            let pi = Vec2::new(pi.0, pi.1);
            prop_assume!(dp.norm() > 1e-3);
            let pj = pi + dp;
            let r = robot(0, 0.3);
            let [x, _] = playground_rows(&at(pi, vi), &r, &pg());
            let tol = 1e-12;
            let truth = oracle::playground_x_true(pi.x, vi.x, 5.0, 0.3, 5.0, ki);
            prop_assert!(x.row.b <= truth + tol * truth.abs().max(1.0));
            let pair = pairwise_row(&at(pi, vi), &at(pj, vj), &r, &robot(1, 0.3), 0.4).unwrap();
            let truth = oracle::pair_true(pi, vi, pj, vj, 0.4, 5.0, ki, kj);
            prop_assert!(pair.coupled_b <= truth + tol * truth.abs().max(1.0));
            let [vx, _] = velocity_rows(&at(pi, vi), &r);
            let truth = oracle::velocity_true(vi.x, 2.0, 5.0, ki);
            prop_assert!(vx.row.b <= truth + tol * truth.abs().max(1.0));
        }

        #[test]
        fn boundary_inputs_zero_the_worst_case_condition(
            pi in (0.5..4.5f64, 1.0..34.0f64), vi in arb_vec(2.0),
            dp in arb_vec(3.0), vj in arb_vec(2.0), s in -1.0..1.0f64,
        ) {
            let pi = Vec2::new(pi.0, pi.1);
            prop_assume!(dp.norm() > 1e-2);
            let pj = pi + dp;
            let r = robot(0, 0.3);
            let g = 5.0;

            // playground x: ḧ + 2γḣ + γ²h with the friction term at its worst
            let [x, _] = playground_rows(&at(pi, vi), &r, &pg());
            if x.row.a.x.abs() > 1e-6 {
                let ux = x.row.b / x.row.a.x;
                let off = pi.x - 2.5;
                let worst_friction = -2.0 * KU * (off * vi.x).abs();
                let hdd = -2.0 * vi.x * vi.x - 2.0 * off * ux + worst_friction;
                let cond = hdd + 2.0 * g * x.h_dot + g * g * x.h;
                prop_assert!(cond.abs() <= 1e-9 * (1.0 + (g * g * x.h).abs()));
            }

            // pair: an input pair (u_i, u_j) meeting the coupled bound with
            // equality, in the d-scaled condition
            let pair = pairwise_row(&at(pi, vi), &at(pj, vj), &r, &robot(1, 0.3), 0.4).unwrap();
            let p = pi - pj;
            let d = p.norm();
            let u_rel = p * (-pair.coupled_b / p.norm_sq()) + Vec2::new(-p.y, p.x) * s;
            let v = vi - vj;
            let worst = -KU * p.dot(v).abs() - (KU - KL) * p.dot(vj).abs();
            let hdd_d = v.norm_sq() + p.dot(u_rel) + worst - p.dot(v).powi(2) / (d * d);
            let cond = hdd_d + 2.0 * g * d * pair.h_dot + g * g * d * pair.h;
            prop_assert!(cond.abs() <= 1e-9 * (1.0 + (g * g * d * pair.h).abs()));

            // velocity: ḣ + γh with the friction term at its worst
            let [vx, _] = velocity_rows(&at(pi, vi), &r);
            if vi.x.abs() > 1e-6 {
                let ux = vx.row.b / vx.row.a.x;
                let h_dot = -2.0 * vi.x * (ux - KL * vi.x);
                let cond = h_dot + g * vx.h;
                prop_assert!(cond.abs() <= 1e-9 * (1.0 + (g * vx.h).abs()));
            }
        }
    }
}
