//! Game loop, referee and safety certification.

use std::collections::BTreeMap;

use crate::barrier::{assemble, BarrierFamily, BarrierSnapshot, BarrierSource};
use crate::dynamics::{clamp_input, step};
use crate::error::{ConfigError, RunError};
use crate::model::{
    initial_grid, validate_scenario, GameSchedule, Playground, RobotParams, RobotState,
    ScenarioConfig, Status,
};
use crate::nominal::{nominal_input, update_mode, ControllerMode};
use crate::qp::{solve, QpProblem};
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    Green,
    Red,
}

/// Current light, with the one-based interval index `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase {
    pub kind: PhaseKind,
    pub k: usize,
}

impl Phase {
    pub fn is_red(&self) -> bool {
        self.kind == PhaseKind::Red
    }
}

/// Green on `[t_g_k, t_r_k)`, red on `[t_r_k, t_g_{k+1})`.
pub fn phase_of(t: f64, schedule: &GameSchedule) -> Phase {
    let idx = schedule.interval_at(t);
    let kind = if schedule.is_red(t) {
        PhaseKind::Red
    } else {
        PhaseKind::Green
    };
    Phase { kind, k: idx + 1 }
}

/// A live robot breaks the rule when it moves faster than `move_eps` in red.
pub fn detect_violation(state: &RobotState, phase: Phase, move_eps: f64) -> bool {
    phase.is_red() && state.v.norm() > move_eps
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    Eliminated { position: Vec2 },
    Finished,
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::Eliminated { .. } => "eliminated",
            EventKind::Finished => "finished",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefereeEvent {
    pub time: f64,
    pub robot: usize,
    pub kind: EventKind,
}

/// Eliminates rule breakers (frozen in place, velocity zeroed) and retires
/// robots that reached the finish line. Rule breaking is checked first.
pub fn referee_step(
    t: f64,
    states: &mut [RobotState],
    schedule: &GameSchedule,
    playground: &Playground,
    move_eps: f64,
) -> Vec<RefereeEvent> {
    let phase = phase_of(t, schedule);
    let mut events = Vec::new();
    for (robot, s) in states.iter_mut().enumerate() {
        if !s.is_live() {
            continue;
        }
        if detect_violation(s, phase, move_eps) {
            s.v = Vec2::ZERO;
            s.status = Status::Eliminated {
                at_time: t,
                at_position: s.p,
            };
            events.push(RefereeEvent {
                time: t,
                robot,
                kind: EventKind::Eliminated { position: s.p },
            });
        } else if s.p.y >= playground.g_y {
            s.status = Status::Finished { at_time: t };
            events.push(RefereeEvent {
                time: t,
                robot,
                kind: EventKind::Finished,
            });
        }
    }
    events
}

/// A step on which some robot's QP had to relax barrier rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SlackEvent {
    pub time: f64,
    pub robot: usize,
    pub total_slack: f64,
    /// Rows that were relaxed, with their slack.
    pub sources: Vec<(BarrierSource, f64)>,
}

/// Everything computed at one grid instant.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    /// States at `time`, after the referee has ruled.
    pub states: Vec<RobotState>,
    /// Nominal input per robot; `None` for robots that are not live.
    pub nominal: Vec<Option<Vec2>>,
    /// Filtered, clamped input per live robot.
    pub filtered: Vec<Option<Vec2>>,
    pub barriers: Vec<Option<BarrierSnapshot>>,
    pub modes: Vec<Option<ControllerMode>>,
    pub slack_events: Vec<SlackEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationLog {
    pub dt: f64,
    pub robots: Vec<RobotParams>,
    pub playground: Playground,
    pub schedule: GameSchedule,
    pub records: Vec<StepRecord>,
    pub events: Vec<RefereeEvent>,
}

impl SimulationLog {
    fn empty(config: &ScenarioConfig) -> Self {
        Self {
            dt: config.dt,
            robots: config.robots.clone(),
            playground: config.playground,
            schedule: config.schedule.clone(),
            records: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn slack_events(&self) -> impl Iterator<Item = &SlackEvent> {
        self.records.iter().flat_map(|r| &r.slack_events)
    }

    pub fn eliminations(&self) -> impl Iterator<Item = &RefereeEvent> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Eliminated { .. }))
    }

    /// Record whose time is closest to `t`.
    pub fn record_at(&self, t: f64) -> Option<&StepRecord> {
        let k = (t / self.dt).round();
        if k < 0.0 {
            return None;
        }
        self.records.get(k as usize)
    }
}

/// Control computed for all live robots from one snapshot.
struct StepControl {
    nominal: Vec<Option<Vec2>>,
    filtered: Vec<Option<Vec2>>,
    barriers: Vec<Option<BarrierSnapshot>>,
    slack_events: Vec<SlackEvent>,
}

fn compute_control(
    t: f64,
    config: &ScenarioConfig,
    states: &[RobotState],
    modes: &mut [ControllerMode],
) -> Result<StepControl, crate::error::DegenerateGeometry> {
    let n = states.len();
    let mut out = StepControl {
        nominal: vec![None; n],
        filtered: vec![None; n],
        barriers: vec![None; n],
        slack_events: Vec::new(),
    };
    for i in 0..n {
        let s = &states[i];
        if !s.is_live() {
            continue;
        }
        let params = &config.robots[i];
        modes[i] = update_mode(t, s, params, &config.schedule, modes[i]);
        let u_n = nominal_input(t, s, params, &modes[i]);
        let assembly = assemble(t, i, states, &config.robots, &config.playground)?;
        let problem = QpProblem {
            u_nominal: u_n,
            rows: assembly.rows,
            u_box: params.u_max,
            slack_weight: config.slack_weight,
        };
        let sol = solve(&problem);
        if sol.relaxed {
            let sources: Vec<_> = problem
                .rows
                .iter()
                .zip(&sol.slack)
                .filter(|(_, &s)| s > 0.0)
                .map(|(r, &s)| (r.source, s))
                .collect();
            out.slack_events.push(SlackEvent {
                time: t,
                robot: i,
                total_slack: sol.total_slack(),
                sources,
            });
        }
        out.nominal[i] = Some(u_n);
        out.filtered[i] = Some(clamp_input(sol.u_star, params.u_max));
        out.barriers[i] = Some(assembly.snapshot);
    }
    Ok(out)
}

/// Runs the whole game on the uniform grid `t_n = n·dt`, `n = 0..=N`.
///
/// Each step computes every live robot's control from the same snapshot,
/// then integrates all robots with their true friction, then lets the
/// referee rule at the new time.
pub fn run(config: &ScenarioConfig) -> Result<SimulationLog, RunError> {
    let violations = validate_scenario(config);
    if !violations.is_empty() {
        return Err(ConfigError::Invalid(violations).into());
    }
    let mut log = SimulationLog::empty(config);
    let mut states = initial_grid(config)?;
    let mut modes = vec![ControllerMode::default(); states.len()];
    let steps = config.step_count();
    log.events.extend(referee_step(
        0.0,
        &mut states,
        &config.schedule,
        &config.playground,
        config.move_eps,
    ));

    for n in 0..=steps {
        let t = n as f64 * config.dt;
        let control = match compute_control(t, config, &states, &mut modes) {
            Ok(c) => c,
            Err(cause) => {
                return Err(RunError::Degenerate {
                    time: t,
                    cause,
                    partial: Box::new(log),
                })
            }
        };
        log.records.push(StepRecord {
            time: t,
            states: states.clone(),
            nominal: control.nominal,
            filtered: control.filtered.clone(),
            barriers: control.barriers,
            modes: states
                .iter()
                .zip(&modes)
                .map(|(s, m)| s.is_live().then_some(*m))
                .collect(),
            slack_events: control.slack_events,
        });
        if n == steps {
            break;
        }
        for (i, s) in states.iter_mut().enumerate() {
            if let Some(u) = control.filtered[i] {
                *s = step(s, u, config.robots[i].kappa_true, config.dt);
            }
        }
        let t_next = (n + 1) as f64 * config.dt;
        log.events.extend(referee_step(
            t_next,
            &mut states,
            &config.schedule,
            &config.playground,
            config.move_eps,
        ));
    }
    Ok(log)
}

/// A barrier found below `-cert_tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct CertFailure {
    pub time: f64,
    pub robot: usize,
    pub barrier: BarrierSource,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafetyReport {
    pub cert_tol: f64,
    /// Smallest value seen per barrier family; absent if never evaluated.
    pub minima: BTreeMap<BarrierFamily, f64>,
    pub slack_event_count: usize,
    pub slack_total: f64,
    pub eliminations: usize,
    pub finishes: usize,
    pub failures: Vec<CertFailure>,
}

impl SafetyReport {
    pub fn certified(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn min_of(&self, family: BarrierFamily) -> Option<f64> {
        self.minima.get(&family).copied()
    }
}

/// Scans every barrier of every robot that was live at each logged instant.
pub fn certify(log: &SimulationLog, cert_tol: f64) -> SafetyReport {
    let mut minima: BTreeMap<BarrierFamily, f64> = BTreeMap::new();
    let mut failures = Vec::new();
    for rec in &log.records {
        for (robot, snap) in rec.barriers.iter().enumerate() {
            let Some(snap) = snap else { continue };
            if !rec.states[robot].is_live() {
                continue;
            }
            for (source, h) in snap.entries() {
                let m = minima.entry(source.family()).or_insert(f64::INFINITY);
                *m = m.min(h);
                if h < -cert_tol || h.is_nan() {
                    failures.push(CertFailure {
                        time: rec.time,
                        robot,
                        barrier: source,
                        value: h,
                    });
                }
            }
        }
    }
    let slack: Vec<_> = log.slack_events().collect();
    SafetyReport {
        cert_tol,
        minima,
        slack_event_count: slack.len(),
        slack_total: slack.iter().map(|e| e.total_slack).sum(),
        eliminations: log.eliminations().count(),
        finishes: log
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Finished)
            .count(),
        failures,
    }
}

/// Smallest center distance among live robots, and between live robots and
/// eliminated ones, over the whole log.
pub fn min_separations(log: &SimulationLog) -> (f64, f64) {
    let mut live_live = f64::INFINITY;
    let mut live_dead = f64::INFINITY;
    for rec in &log.records {
        let s = &rec.states;
        for i in 0..s.len() {
            if !s[i].is_live() {
                continue;
            }
            for j in 0..s.len() {
                if i == j {
                    continue;
                }
                let d = (s[i].p - s[j].p).norm();
                match s[j].status {
                    Status::Live if j > i => live_live = live_live.min(d),
                    Status::Eliminated { .. } => live_dead = live_dead.min(d),
                    _ => {}
                }
            }
        }
    }
    (live_live, live_dead)
}
