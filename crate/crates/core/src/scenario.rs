//! Scenario files and the reference 22-robot game.
//!
//! Scenario files are flat `key = value` text. Top-level keys come first,
//! then optional `[playground]`, `[schedule]` and `[robot <i>]` sections.
//! `#` starts a comment. Example:
//!
//! ```text
//! robots = 22
//! seed = 42
//! dt = 0.01
//!
//! [schedule]
//! green = 0, 8, 16
//! red = 7, 15, inf
//! duration = 24
//!
//! [robot 3]
//! eta = 1.4
//! ```
//!
//! Robot parameters not given in a `[robot i]` section are drawn from the
//! seeded generator with the reference ranges, so a file holding only
//! `robots` and `seed` describes a complete game. [`format_scenario`] writes
//! every field, and parsing its output reproduces the config exactly.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ConfigError;
use crate::model::{
    BrakeLaw, GameSchedule, Playground, RobotParams, ScenarioConfig, DEFAULT_CERT_TOL, DEFAULT_DT,
    DEFAULT_MOVE_EPS, DEFAULT_SLACK_WEIGHT, KAPPA_LOW, KAPPA_UP,
};

/// Uniform ranges the random per-robot parameters are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRanges {
    pub v_max: (f64, f64),
    pub u_max: (f64, f64),
    pub eta: (f64, f64),
    pub kappa_low: f64,
    pub kappa_up: f64,
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            v_max: (1.5, 2.0),
            u_max: (0.2, 0.5),
            eta: (1.0, 1.5),
            kappa_low: KAPPA_LOW,
            kappa_up: KAPPA_UP,
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Draws `count` robots. Per robot, in order: V, U, eta, true friction.
pub fn generate_robots(count: usize, seed: u64, ranges: &ParamRanges) -> Vec<RobotParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|id| {
            let v_max = draw(&mut rng, ranges.v_max);
            let u_max = draw(&mut rng, ranges.u_max);
            let eta = draw(&mut rng, ranges.eta);
            let kappa = draw(&mut rng, (ranges.kappa_low, ranges.kappa_up));
            RobotParams {
                kappa_low: ranges.kappa_low,
                kappa_up: ranges.kappa_up,
                ..RobotParams::with_limits(id, v_max, u_max, eta, kappa)
            }
        })
        .collect()
}

pub fn paper_playground() -> Playground {
    Playground {
        l_x: 5.0,
        l_y: 35.0,
        g_y: 25.0,
        r0: 0.3,
        d0: 0.4,
    }
}

/// Green at `8(k-1)`, red at `8k - 1` for k = 1..8, then a last green at 64
/// that never turns red. 80 s horizon.
pub fn paper_schedule() -> GameSchedule {
    let mut green_times: Vec<f64> = (1..=8).map(|k| 8.0 * (k as f64 - 1.0)).collect();
    let mut red_times: Vec<f64> = (1..=8).map(|k| 8.0 * k as f64 - 1.0).collect();
    green_times.push(64.0);
    red_times.push(f64::INFINITY);
    GameSchedule {
        green_times,
        red_times,
        duration: 80.0,
    }
}

fn default_grid(n: usize) -> (usize, usize) {
    let cols = n.clamp(1, 11);
    (n.div_ceil(cols).max(1), cols)
}

fn scenario_with(robots: Vec<RobotParams>, seed: u64) -> ScenarioConfig {
    let (start_rows, start_cols) = default_grid(robots.len());
    ScenarioConfig {
        robots,
        playground: paper_playground(),
        schedule: paper_schedule(),
        dt: DEFAULT_DT,
        rng_seed: seed,
        move_eps: DEFAULT_MOVE_EPS,
        slack_weight: DEFAULT_SLACK_WEIGHT,
        cert_tol: DEFAULT_CERT_TOL,
        start_rows,
        start_cols,
    }
}

/// The reference game: 22 robots on a 2×11 start grid in a 5 m × 35 m
/// playground with the finish line at 25 m.
pub fn generate_paper_scenario(seed: u64) -> ScenarioConfig {
    scenario_with(generate_robots(22, seed, &ParamRanges::default()), seed)
}

fn fmt_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

fn fmt_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|&v| fmt_f64(v))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Writes every field of `config`.
pub fn format_scenario(config: &ScenarioConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "robots = {}", config.robots.len());
    let _ = writeln!(s, "seed = {}", config.rng_seed);
    let _ = writeln!(s, "dt = {}", fmt_f64(config.dt));
    let _ = writeln!(s, "move_eps = {}", fmt_f64(config.move_eps));
    let _ = writeln!(s, "slack_weight = {}", fmt_f64(config.slack_weight));
    let _ = writeln!(s, "cert_tol = {}", fmt_f64(config.cert_tol));
    let _ = writeln!(s, "start_rows = {}", config.start_rows);
    let _ = writeln!(s, "start_cols = {}", config.start_cols);

    let pg = &config.playground;
    let _ = writeln!(s, "\n[playground]");
    for (k, v) in [
        ("l_x", pg.l_x),
        ("l_y", pg.l_y),
        ("g_y", pg.g_y),
        ("r0", pg.r0),
        ("d0", pg.d0),
    ] {
        let _ = writeln!(s, "{k} = {}", fmt_f64(v));
    }

    let _ = writeln!(s, "\n[schedule]");
    let _ = writeln!(s, "green = {}", fmt_list(&config.schedule.green_times));
    let _ = writeln!(s, "red = {}", fmt_list(&config.schedule.red_times));
    let _ = writeln!(s, "duration = {}", fmt_f64(config.schedule.duration));

    for r in &config.robots {
        let _ = writeln!(s, "\n[robot {}]", r.id);
        for (k, v) in robot_fields(r) {
            let _ = writeln!(s, "{k} = {}", fmt_f64(v));
        }
        let _ = writeln!(s, "brake_law = {}", r.brake_law.as_str());
    }
    s
}

fn robot_fields(r: &RobotParams) -> [(&'static str, f64); 12] {
    [
        ("v_max", r.v_max),
        ("u_max", r.u_max),
        ("kappa_true", r.kappa_true),
        ("kappa_low", r.kappa_low),
        ("kappa_up", r.kappa_up),
        ("eta", r.eta),
        ("gain", r.gain),
        ("gamma1", r.gamma1),
        ("gamma2", r.gamma2),
        ("gamma3", r.gamma3),
        ("gamma4", r.gamma4),
        ("smoothing_eps", r.smoothing_eps),
    ]
}

fn set_robot_field(r: &mut RobotParams, key: &str, v: f64) -> bool {
    let slot = match key {
        "v_max" => &mut r.v_max,
        "u_max" => &mut r.u_max,
        "kappa_true" => &mut r.kappa_true,
        "kappa_low" => &mut r.kappa_low,
        "kappa_up" => &mut r.kappa_up,
        "eta" => &mut r.eta,
        "gain" => &mut r.gain,
        "gamma1" => &mut r.gamma1,
        "gamma2" => &mut r.gamma2,
        "gamma3" => &mut r.gamma3,
        "gamma4" => &mut r.gamma4,
        "smoothing_eps" => &mut r.smoothing_eps,
        _ => return false,
    };
    *slot = v;
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Top,
    Playground,
    Schedule,
    Robot(usize),
}

struct Entry<'a> {
    line: usize,
    section: Section,
    key: &'a str,
    value: &'a str,
}

impl Entry<'_> {
    fn err(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::Parse {
            line: self.line,
            key: self.key.to_string(),
            message: message.into(),
        }
    }

    fn float(&self) -> Result<f64, ConfigError> {
        self.value
            .parse::<f64>()
            .map_err(|_| self.err(format!("expected a number, found `{}`", self.value)))
    }

    fn uint(&self) -> Result<u64, ConfigError> {
        self.value.parse::<u64>().map_err(|_| {
            self.err(format!(
                "expected a non-negative integer, found `{}`",
                self.value
            ))
        })
    }

    fn list(&self) -> Result<Vec<f64>, ConfigError> {
        self.value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| self.err(format!("expected a number in list, found `{s}`")))
            })
            .collect()
    }
}

fn tokenize(text: &str) -> Result<Vec<Entry<'_>>, ConfigError> {
    let mut section = Section::Top;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
            let name = name.trim();
            section = match name {
                "playground" => Section::Playground,
                "schedule" => Section::Schedule,
                _ => {
                    let id = name
                        .strip_prefix("robot")
                        .map(str::trim)
                        .and_then(|n| n.parse::<usize>().ok())
                        .ok_or_else(|| ConfigError::Parse {
                            line,
                            key: name.to_string(),
                            message: "unknown section".to_string(),
                        })?;
                    Section::Robot(id)
                }
            };
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            key: body.to_string(),
            message: "expected `key = value`".to_string(),
        })?;
        out.push(Entry {
            line,
            section,
            key: key.trim(),
            value: value.trim(),
        });
    }
    Ok(out)
}

/// Parses scenario text. `seed_override` replaces the file's seed before any
/// robot parameters are drawn.
pub fn parse_scenario_str(
    text: &str,
    seed_override: Option<u64>,
) -> Result<ScenarioConfig, ConfigError> {
    let entries = tokenize(text)?;

    // robot count and seed first: they drive parameter generation
    let mut count: Option<usize> = None;
    let mut seed: u64 = 42;
    let mut max_section: Option<usize> = None;
    let mut ranges = ParamRanges::default();
    let mut brake_law = BrakeLaw::default();
    for e in &entries {
        match (e.section, e.key) {
            (Section::Top, "robots") => count = Some(e.uint()? as usize),
            (Section::Top, "seed") => seed = e.uint()?,
            (Section::Top, "kappa_low") => ranges.kappa_low = e.float()?,
            (Section::Top, "kappa_up") => ranges.kappa_up = e.float()?,
            (Section::Top, "brake_law") => {
                brake_law =
                    BrakeLaw::parse(e.value).ok_or_else(|| e.err("expected `tanh` or `sign`"))?
            }
            (Section::Robot(i), _) => max_section = Some(max_section.map_or(i, |m| m.max(i))),
            _ => {}
        }
    }
    if let Some(s) = seed_override {
        seed = s;
    }
    let n = match (count, max_section) {
        (Some(n), Some(m)) if m >= n => {
            let e = entries
                .iter()
                .find(|e| e.section == Section::Robot(m))
                .expect("section seen above");
            return Err(e.err(format!("robot {m} is outside `robots = {n}`")));
        }
        (Some(n), _) => n,
        (None, Some(m)) => m + 1,
        (None, None) => 0,
    };

    let mut robots = generate_robots(n, seed, &ranges);
    for r in &mut robots {
        r.brake_law = brake_law;
    }
    let mut config = scenario_with(robots, seed);

    for e in &entries {
        match e.section {
            Section::Top => match e.key {
                "robots" | "seed" | "kappa_low" | "kappa_up" | "brake_law" => {}
                "dt" => config.dt = e.float()?,
                "duration" => config.schedule.duration = e.float()?,
                "move_eps" => config.move_eps = e.float()?,
                "slack_weight" => config.slack_weight = e.float()?,
                "cert_tol" => config.cert_tol = e.float()?,
                "start_rows" => config.start_rows = e.uint()? as usize,
                "start_cols" => config.start_cols = e.uint()? as usize,
                _ => return Err(e.err("unknown key")),
            },
            Section::Playground => {
                let v = e.float()?;
                let pg = &mut config.playground;
                match e.key {
                    "l_x" => pg.l_x = v,
                    "l_y" => pg.l_y = v,
                    "g_y" => pg.g_y = v,
                    "r0" => pg.r0 = v,
                    "d0" => pg.d0 = v,
                    _ => return Err(e.err("unknown playground key")),
                }
            }
            Section::Schedule => match e.key {
                "green" => config.schedule.green_times = e.list()?,
                "red" => config.schedule.red_times = e.list()?,
                "duration" => config.schedule.duration = e.float()?,
                _ => return Err(e.err("unknown schedule key")),
            },
            Section::Robot(i) => {
                let r = &mut config.robots[i];
                if e.key == "brake_law" {
                    r.brake_law = BrakeLaw::parse(e.value)
                        .ok_or_else(|| e.err("expected `tanh` or `sign`"))?;
                } else if !set_robot_field(r, e.key, e.float()?) {
                    return Err(e.err("unknown robot key"));
                }
            }
        }
    }
    Ok(config)
}

/// Reads and parses a scenario file. Validation is left to the caller
/// (see [`crate::model::validate_scenario`]).
pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario_str(&text, None)
}
