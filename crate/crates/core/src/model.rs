//! Domain types, scenario validation and start-grid layout.

use crate::error::{ConfigError, Violation};
use crate::vec2::Vec2;

/// How the nominal controller realizes maximal braking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BrakeLaw {
    /// `-U * tanh(eps * v)`, chattering-free.
    #[default]
    Tanh,
    /// `-U * sign(v)`.
    Sign,
}

impl BrakeLaw {
    pub fn as_str(self) -> &'static str {
        match self {
            BrakeLaw::Tanh => "tanh",
            BrakeLaw::Sign => "sign",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(BrakeLaw::Tanh),
            "sign" => Some(BrakeLaw::Sign),
            _ => None,
        }
    }
}

/// Per-robot physical and behavioral parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotParams {
    pub id: usize,
    /// Per-axis speed limit V (m/s).
    pub v_max: f64,
    /// Per-axis acceleration limit U (m/s²).
    pub u_max: f64,
    /// True friction constant (1/s). Only the plant sees this value.
    pub kappa_true: f64,
    pub kappa_low: f64,
    pub kappa_up: f64,
    /// Rule sensitivity, at least 1. Larger values brake earlier.
    pub eta: f64,
    /// Lateral damping gain of the advance mode (1/s).
    pub gain: f64,
    /// Playground barrier rate.
    pub gamma1: f64,
    /// Pairwise barrier rate.
    pub gamma2: f64,
    /// Velocity barrier rate.
    pub gamma3: f64,
    /// Obstacle barrier rate.
    pub gamma4: f64,
    pub smoothing_eps: f64,
    pub brake_law: BrakeLaw,
}

impl RobotParams {
    /// Parameters with the fixed design values of the reference game
    /// (unit gain, all barrier rates 5, tanh braking with eps = 100).
    pub fn with_limits(id: usize, v_max: f64, u_max: f64, eta: f64, kappa_true: f64) -> Self {
        Self {
            id,
            v_max,
            u_max,
            kappa_true,
            kappa_low: KAPPA_LOW,
            kappa_up: KAPPA_UP,
            eta,
            gain: 1.0,
            gamma1: 5.0,
            gamma2: 5.0,
            gamma3: 5.0,
            gamma4: 5.0,
            smoothing_eps: 100.0,
            brake_law: BrakeLaw::Tanh,
        }
    }

    fn violations(&self, out: &mut Vec<Violation>) {
        let who = format!("robot {}", self.id);
        let mut check = |ok: bool, msg: String| {
            if !ok {
                out.push(Violation::new(who.clone(), msg));
            }
        };
        check(self.v_max > 0.0, format!("v_max > 0 (got {})", self.v_max));
        check(self.u_max > 0.0, format!("u_max > 0 (got {})", self.u_max));
        check(
            self.kappa_low > 0.0,
            format!("kappa_low > 0 (got {})", self.kappa_low),
        );
        if self.kappa_low > self.kappa_up {
            check(
                false,
                format!(
                    "friction bounds out of order: kappa_low ({}) ≤ kappa_up ({}) required",
                    self.kappa_low, self.kappa_up
                ),
            );
        } else {
            check(
                self.kappa_low <= self.kappa_true && self.kappa_true <= self.kappa_up,
                format!(
                    "kappa_true ({}) must lie in [kappa_low, kappa_up] = [{}, {}]",
                    self.kappa_true, self.kappa_low, self.kappa_up
                ),
            );
        }
        check(self.eta >= 1.0, format!("eta ≥ 1 (got {})", self.eta));
        check(self.gain > 0.0, format!("gain > 0 (got {})", self.gain));
        for (name, g) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma3", self.gamma3),
            ("gamma4", self.gamma4),
        ] {
            check(g > 0.0, format!("{name} > 0 (got {g})"));
        }
        check(
            self.smoothing_eps > 0.0,
            format!("smoothing_eps > 0 (got {})", self.smoothing_eps),
        );
        let all_finite = [
            self.v_max,
            self.u_max,
            self.kappa_true,
            self.kappa_low,
            self.kappa_up,
            self.eta,
            self.gain,
            self.gamma1,
            self.gamma2,
            self.gamma3,
            self.gamma4,
            self.smoothing_eps,
        ]
        .iter()
        .all(|v| v.is_finite());
        check(all_finite, "all parameters must be finite".to_string());
    }
}

pub const KAPPA_LOW: f64 = 0.0141;
pub const KAPPA_UP: f64 = 0.2368;

/// Lifecycle of a player. Leaving `Live` is permanent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Status {
    Live,
    Eliminated { at_time: f64, at_position: Vec2 },
    Finished { at_time: f64 },
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Live => "live",
            Status::Eliminated { .. } => "eliminated",
            Status::Finished { .. } => "finished",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub p: Vec2,
    pub v: Vec2,
    pub status: Status,
}

impl RobotState {
    pub fn at_rest(p: Vec2) -> Self {
        Self {
            p,
            v: Vec2::ZERO,
            status: Status::Live,
        }
    }

    pub fn is_live(&self) -> bool {
        matches!(self.status, Status::Live)
    }

    pub fn is_eliminated(&self) -> bool {
        matches!(self.status, Status::Eliminated { .. })
    }
}

/// Rectangular arena `[0, l_x] × [0, l_y]` with a horizontal finish line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Playground {
    pub l_x: f64,
    pub l_y: f64,
    /// Finish-line ordinate.
    pub g_y: f64,
    /// Robot disk radius.
    pub r0: f64,
    /// Minimum allowed center distance between robots.
    pub d0: f64,
}

impl Playground {
    /// Wall clearance kept by every robot center.
    pub fn margin(&self) -> f64 {
        1.1 * self.r0
    }

    /// Upper edge of the start band.
    pub fn start_band_top(&self) -> f64 {
        0.1 * self.l_y
    }

    fn violations(&self, out: &mut Vec<Violation>) {
        let mut check = |ok: bool, msg: String| {
            if !ok {
                out.push(Violation::new("playground", msg));
            }
        };
        check(self.l_x > 0.0, format!("l_x > 0 (got {})", self.l_x));
        check(self.l_y > 0.0, format!("l_y > 0 (got {})", self.l_y));
        check(
            self.g_y > 0.0 && self.g_y < self.l_y,
            format!("0 < g_y < l_y (got g_y = {}, l_y = {})", self.g_y, self.l_y),
        );
        check(self.r0 > 0.0, format!("r0 > 0 (got {})", self.r0));
        check(
            self.d0 > self.r0,
            format!("d0 > r0 (got d0 = {}, r0 = {})", self.d0, self.r0),
        );
        check(
            self.margin() < self.l_x.min(self.l_y) / 2.0,
            format!(
                "1.1·r0 = {} must be below min(l_x, l_y)/2 for a nonempty interior",
                self.margin()
            ),
        );
        check(
            [self.l_x, self.l_y, self.g_y, self.r0, self.d0]
                .iter()
                .all(|v| v.is_finite()),
            "all dimensions must be finite".to_string(),
        );
    }
}

/// Green and red announcement instants. `red_times[k]` closes the motion
/// window opened by `green_times[k]`; the last red may be `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSchedule {
    pub green_times: Vec<f64>,
    pub red_times: Vec<f64>,
    pub duration: f64,
}

/// Slack when classifying sampled times against schedule instants, so that
/// `700 * 0.01` lands on the red announcement at 7 s.
pub const TIME_EPS: f64 = 1e-9;

impl GameSchedule {
    /// Zero-based index of the green interval `[t_g_k, t_g_{k+1})` holding `t`.
    pub fn interval_at(&self, t: f64) -> usize {
        self.green_times
            .iter()
            .rposition(|&g| g <= t + TIME_EPS)
            .unwrap_or(0)
    }

    pub fn red_time(&self, k: usize) -> f64 {
        self.red_times.get(k).copied().unwrap_or(f64::INFINITY)
    }

    pub fn is_red(&self, t: f64) -> bool {
        let k = self.interval_at(t);
        t + TIME_EPS >= self.red_time(k)
    }

    /// Red instants that fall inside the simulated horizon.
    pub fn red_instants(&self) -> impl Iterator<Item = f64> + '_ {
        self.red_times
            .iter()
            .copied()
            .filter(|&r| r <= self.duration + TIME_EPS)
    }

    fn violations(&self, out: &mut Vec<Violation>) {
        let mut check = |ok: bool, msg: String| {
            if !ok {
                out.push(Violation::new("schedule", msg));
            }
        };
        check(
            !self.green_times.is_empty(),
            "at least one green announcement".to_string(),
        );
        check(
            self.green_times.len() == self.red_times.len(),
            format!(
                "one red per green (got {} green, {} red)",
                self.green_times.len(),
                self.red_times.len()
            ),
        );
        if let Some(&g0) = self.green_times.first() {
            check(
                g0 == 0.0,
                format!("first green must be at t = 0 (got {g0})"),
            );
        }
        for (k, (&g, &r)) in self.green_times.iter().zip(&self.red_times).enumerate() {
            check(
                g < r,
                format!("green {} at {g} must precede red {} at {r}", k + 1, k + 1),
            );
            if let Some(&next) = self.green_times.get(k + 1) {
                check(
                    r < next,
                    format!(
                        "red {} at {r} must precede green {} at {next}",
                        k + 1,
                        k + 2
                    ),
                );
            }
        }
        check(
            self.duration > 0.0 && self.duration.is_finite(),
            format!(
                "duration must be positive and finite (got {})",
                self.duration
            ),
        );
    }
}

/// Everything needed to run one game.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub robots: Vec<RobotParams>,
    pub playground: Playground,
    pub schedule: GameSchedule,
    pub dt: f64,
    pub rng_seed: u64,
    /// Speed above which a robot counts as moving during red (m/s).
    pub move_eps: f64,
    /// Quadratic penalty on barrier-row relaxation.
    pub slack_weight: f64,
    /// Barrier values above `-cert_tol` certify as safe.
    pub cert_tol: f64,
    pub start_rows: usize,
    pub start_cols: usize,
}

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_MOVE_EPS: f64 = 0.01;
pub const DEFAULT_SLACK_WEIGHT: f64 = 1e6;
pub const DEFAULT_CERT_TOL: f64 = 1e-6;
/// Smallest penalty accepted as "much larger than one".
pub const MIN_SLACK_WEIGHT: f64 = 1e3;

impl ScenarioConfig {
    /// Number of integration steps covering the schedule duration.
    pub fn step_count(&self) -> usize {
        (self.schedule.duration / self.dt).round() as usize
    }
}

/// Lists every violated invariant; an empty list means the scenario can run.
pub fn validate_scenario(config: &ScenarioConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    for robot in &config.robots {
        robot.violations(&mut out);
    }
    for (k, robot) in config.robots.iter().enumerate() {
        if robot.id != k {
            out.push(Violation::new(
                format!("robot {}", robot.id),
                format!(
                    "robot ids must be 0..n in order (found id {} at slot {k})",
                    robot.id
                ),
            ));
        }
    }
    config.playground.violations(&mut out);
    config.schedule.violations(&mut out);

    let mut check = |ok: bool, msg: String| {
        if !ok {
            out.push(Violation::new("scenario", msg));
        }
    };
    check(
        config.dt > 0.0 && config.dt.is_finite(),
        format!("dt > 0 (got {})", config.dt),
    );
    check(
        config.move_eps > 0.0,
        format!("move_eps > 0 (got {})", config.move_eps),
    );
    check(
        config.slack_weight >= MIN_SLACK_WEIGHT,
        format!(
            "slack_weight ≫ 1 (at least {MIN_SLACK_WEIGHT}, got {})",
            config.slack_weight
        ),
    );
    check(
        config.cert_tol >= 0.0,
        format!("cert_tol ≥ 0 (got {})", config.cert_tol),
    );
    check(
        config.start_rows * config.start_cols >= config.robots.len(),
        format!(
            "start grid {}×{} holds fewer than {} robots",
            config.start_rows,
            config.start_cols,
            config.robots.len()
        ),
    );
    let band_top = config.playground.start_band_top();
    check(
        config.start_rows <= 1 || band_top > config.playground.margin(),
        format!(
            "start band [{}, {band_top}] is empty",
            config.playground.margin()
        ),
    );
    out
}

fn even_spacing(lo: f64, hi: f64, count: usize, index: usize) -> f64 {
    if count <= 1 {
        (lo + hi) / 2.0
    } else {
        lo + index as f64 * (hi - lo) / (count - 1) as f64
    }
}

/// Lays robots out at rest on an evenly spaced grid inside the start band,
/// filling rows bottom-up. Robot `i` sits in column `i % cols`, row `i / cols`.
pub fn initial_grid(config: &ScenarioConfig) -> Result<Vec<RobotState>, ConfigError> {
    let n = config.robots.len();
    let (rows, cols) = (config.start_rows, config.start_cols);
    if rows * cols < n {
        return Err(ConfigError::GridTooSmall {
            capacity: rows * cols,
            robots: n,
        });
    }
    let pg = &config.playground;
    let margin = pg.margin();
    let states: Vec<RobotState> = (0..n)
        .map(|i| {
            let x = even_spacing(margin, pg.l_x - margin, cols, i % cols);
            let y = even_spacing(margin, pg.start_band_top(), rows, i / cols);
            RobotState::at_rest(Vec2::new(x, y))
        })
        .collect();

    let mut closest = f64::INFINITY;
    for (i, a) in states.iter().enumerate() {
        for b in &states[i + 1..] {
            closest = closest.min((a.p - b.p).norm());
        }
    }
    if closest < pg.d0 {
        return Err(ConfigError::GridTooDense {
            spacing: closest,
            d0: pg.d0,
        });
    }
    Ok(states)
}
