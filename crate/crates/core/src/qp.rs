//! Minimally invasive safety filter: the input closest to the nominal one that
//! satisfies every barrier row and the actuator box.
//!
//! The decision variable is two-dimensional, so the solver is specialized:
//!
//! * Feasibility of the hard problem is decided exactly by clipping the
//!   actuator square with each half-plane.
//! * A feasible problem is solved by a primal active-set method. At most two
//!   constraints are ever in the working set, and each equality subproblem
//!   (free minimizer, projection onto a line, intersection of two lines) has a
//!   closed form.
//! * An infeasible problem is relaxed: every barrier row gets a slack with
//!   quadratic penalty `rho`, the box stays hard. For fixed `u` the optimal
//!   slack is `max(0, a·u - b)`, which leaves a convex, continuously
//!   differentiable piecewise quadratic in `u` that is minimized by Newton
//!   steps on the box with exact line search.

use crate::barrier::ConstraintRow;
use crate::vec2::Vec2;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub u_nominal: Vec2,
    /// Barrier rows; all of them are relaxable when the problem is infeasible.
    pub rows: Vec<ConstraintRow>,
    /// Symmetric actuator bound `|u_m| ≤ u_box`.
    pub u_box: f64,
    pub slack_weight: f64,
}

/// A constraint that can be tight at the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bound {
    Row(usize),
    UpperX,
    LowerX,
    UpperY,
    LowerY,
}

const BOX_BOUNDS: [Bound; 4] = [Bound::UpperX, Bound::LowerX, Bound::UpperY, Bound::LowerY];

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u_star: Vec2,
    /// Relaxation applied to each row; all zero unless `relaxed`.
    pub slack: Vec<f64>,
    /// Lagrange multiplier of each row.
    pub row_multipliers: Vec<f64>,
    /// Multipliers of `u_x ≤ U`, `-u_x ≤ U`, `u_y ≤ U`, `-u_y ≤ U`.
    pub box_multipliers: [f64; 4],
    /// Constraints holding with equality (rows with slack count as tight
    /// against their relaxed bound).
    pub active_set: Vec<Bound>,
    /// `‖u - u_n‖² + rho Σ slack²`.
    pub objective: f64,
    /// The hard problem was infeasible and rows were relaxed.
    pub relaxed: bool,
}

impl QpSolution {
    pub fn total_slack(&self) -> f64 {
        self.slack.iter().sum()
    }
}

/// Relative tolerance on constraint satisfaction.
const FEAS_TOL: f64 = 1e-12;
const MAX_ACTIVE_SET_ITERS: usize = 64;
const MAX_RELAXED_ITERS: usize = 200;

#[derive(Debug, Clone, Copy)]
struct Half {
    a: Vec2,
    b: f64,
    tol: f64,
}

impl Half {
    fn new(a: Vec2, b: f64, u_box: f64) -> Self {
        let scale = (a.norm() * u_box).max(b.abs()).max(1.0);
        Self {
            a,
            b,
            tol: FEAS_TOL * scale,
        }
    }

    fn excess(&self, u: Vec2) -> f64 {
        self.a.dot(u) - self.b
    }

    fn holds(&self, u: Vec2) -> bool {
        self.excess(u) <= self.tol
    }
}

fn box_halves(u_box: f64) -> [Half; 4] {
    [
        Half::new(Vec2::new(1.0, 0.0), u_box, u_box),
        Half::new(Vec2::new(-1.0, 0.0), u_box, u_box),
        Half::new(Vec2::new(0.0, 1.0), u_box, u_box),
        Half::new(Vec2::new(0.0, -1.0), u_box, u_box),
    ]
}

fn all_halves(problem: &QpProblem) -> Vec<Half> {
    problem
        .rows
        .iter()
        .map(|r| Half::new(r.a, r.b, problem.u_box))
        .chain(box_halves(problem.u_box))
        .collect()
}

fn bound_of(index: usize, m: usize) -> Bound {
    if index < m {
        Bound::Row(index)
    } else {
        BOX_BOUNDS[index - m]
    }
}

/// Clips a convex polygon (CCW vertex list) to the half-plane `a·u ≤ b + tol`.
fn clip(poly: &[Vec2], h: &Half) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for (k, &p) in poly.iter().enumerate() {
        let q = poly[(k + 1) % poly.len()];
        let fp = h.excess(p) - h.tol;
        let fq = h.excess(q) - h.tol;
        if fp <= 0.0 {
            out.push(p);
        }
        if (fp <= 0.0) != (fq <= 0.0) {
            let t = fp / (fp - fq);
            out.push(p + (q - p) * t);
        }
    }
    out
}

/// Intersection of the actuator square with every row, as polygon vertices.
/// Empty iff the hard problem is infeasible.
pub fn feasible_polygon(rows: &[ConstraintRow], u_box: f64) -> Vec<Vec2> {
    let mut poly = vec![
        Vec2::new(-u_box, -u_box),
        Vec2::new(u_box, -u_box),
        Vec2::new(u_box, u_box),
        Vec2::new(-u_box, u_box),
    ];
    for r in rows {
        poly = clip(&poly, &Half::new(r.a, r.b, u_box));
        if poly.is_empty() {
            break;
        }
    }
    poly
}

/// Solves the filter QP. Deterministic: equal inputs give equal outputs.
pub fn solve(problem: &QpProblem) -> QpSolution {
    let halves = all_halves(problem);
    let u_n = problem.u_nominal;

    if halves.iter().all(|h| h.holds(u_n)) {
        return finish_hard(problem, &halves, u_n, &[]);
    }

    let poly = feasible_polygon(&problem.rows, problem.u_box);
    if poly.is_empty() {
        return solve_relaxed(problem);
    }
    let start = poly.iter().fold(Vec2::ZERO, |acc, &p| acc + p) * (1.0 / poly.len() as f64);
    match active_set(&halves, u_n, start) {
        Some((u, working)) => finish_hard(problem, &halves, u, &working),
        None => {
            let (u, working) = enumerate(&halves, u_n);
            finish_hard(problem, &halves, u, &working)
        }
    }
}

/// Minimizer of `‖u - target‖²` on the lines of the working set.
fn equality_minimizer(halves: &[Half], working: &[usize], target: Vec2) -> Option<Vec2> {
    match *working {
        [] => Some(target),
        [c] => {
            let h = &halves[c];
            let nn = h.a.norm_sq();
            (nn > 0.0).then(|| target - h.a * ((h.a.dot(target) - h.b) / nn))
        }
        [c1, c2] => {
            let (h1, h2) = (&halves[c1], &halves[c2]);
            let det = h1.a.x * h2.a.y - h1.a.y * h2.a.x;
            if det.abs() <= 1e-14 * h1.a.norm() * h2.a.norm() {
                return None;
            }
            Some(Vec2::new(
                (h1.b * h2.a.y - h2.b * h1.a.y) / det,
                (h1.a.x * h2.b - h2.a.x * h1.b) / det,
            ))
        }
        _ => None,
    }
}

/// Multipliers of the working set from `2(u - u_n) + Σ λ a = 0`.
fn working_multipliers(halves: &[Half], working: &[usize], u: Vec2, u_n: Vec2) -> Option<Vec<f64>> {
    let g = (u - u_n) * -2.0;
    match *working {
        [] => Some(vec![]),
        [c] => {
            let a = halves[c].a;
            Some(vec![g.dot(a) / a.norm_sq()])
        }
        [c1, c2] => {
            let (a1, a2) = (halves[c1].a, halves[c2].a);
            let det = a1.x * a2.y - a2.x * a1.y;
            if det == 0.0 {
                return None;
            }
            Some(vec![
                (g.x * a2.y - a2.x * g.y) / det,
                (a1.x * g.y - g.x * a1.y) / det,
            ])
        }
        _ => None,
    }
}

/// Primal active-set iterations from a feasible start. Returns the optimum
/// and its working set, or `None` if the iteration stalls.
fn active_set(halves: &[Half], u_n: Vec2, start: Vec2) -> Option<(Vec2, Vec<usize>)> {
    let mut u = start;
    let mut working: Vec<usize> = Vec::with_capacity(2);
    let scale = 1.0 + u_n.norm();
    for _ in 0..MAX_ACTIVE_SET_ITERS {
        let target = equality_minimizer(halves, &working, u_n)?;
        let step = target - u;
        if step.norm() <= 1e-13 * scale {
            u = target;
            let lambdas = working_multipliers(halves, &working, u, u_n)?;
            let worst = lambdas
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .filter(|(_, &l)| l < -1e-12 * scale);
            match worst {
                None => return Some((u, working)),
                Some((k, _)) => {
                    working.remove(k);
                    continue;
                }
            }
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for (c, h) in halves.iter().enumerate() {
            if working.contains(&c) {
                continue;
            }
            let rate = h.a.dot(step);
            if rate <= 1e-15 * h.a.norm() * step.norm() {
                continue;
            }
            let room = (h.b - h.a.dot(u)).max(0.0);
            let ratio = room / rate;
            if ratio < alpha {
                alpha = ratio;
                blocking = Some(c);
            }
        }
        u += step * alpha;
        if let Some(c) = blocking {
            if working.len() == 2 {
                return None;
            }
            working.push(c);
        }
    }
    None
}

fn lex_better(u: Vec2, f: f64, best: Option<(Vec2, f64)>) -> bool {
    match best {
        None => true,
        Some((bu, bf)) => f < bf || (f == bf && (u.x < bu.x || (u.x == bu.x && u.y < bu.y))),
    }
}

/// Exhaustive vertex/edge enumeration; fallback for degenerate geometry.
fn enumerate(halves: &[Half], u_n: Vec2) -> (Vec2, Vec<usize>) {
    let mut best: Option<(Vec2, f64)> = None;
    let mut best_set = Vec::new();
    let mut consider = |u: Vec2, set: Vec<usize>| {
        if halves.iter().all(|h| h.holds(u)) {
            let f = (u - u_n).norm_sq();
            if lex_better(u, f, best) {
                best = Some((u, f));
                best_set = set;
            }
        }
    };
    consider(u_n, vec![]);
    for c in 0..halves.len() {
        if let Some(u) = equality_minimizer(halves, &[c], u_n) {
            consider(u, vec![c]);
        }
        for d in c + 1..halves.len() {
            if let Some(u) = equality_minimizer(halves, &[c, d], u_n) {
                consider(u, vec![c, d]);
            }
        }
    }
    let (u, _) = best.expect("feasible polygon has at least one vertex");
    // keep only constraints whose multipliers are nonnegative
    let lambdas = working_multipliers(halves, &best_set, u, u_n).unwrap_or_default();
    let set = best_set
        .into_iter()
        .zip(lambdas)
        .filter(|&(_, l)| l > 0.0)
        .map(|(c, _)| c)
        .collect::<Vec<_>>();
    (u, set)
}

fn clamp_box(u: Vec2, u_box: f64) -> Vec2 {
    u.map(|c| c.clamp(-u_box, u_box))
}

/// Clamps into the box and moves coordinates within a few ulps of a face
/// onto it, so face activity is decided by exact comparison.
fn snap_to_box(u: Vec2, u_box: f64) -> Vec2 {
    let near = 4.0 * f64::EPSILON * u_box;
    clamp_box(u, u_box).map(|c| {
        if (c.abs() - u_box).abs() <= near {
            u_box.copysign(c)
        } else {
            c
        }
    })
}

fn finish_hard(problem: &QpProblem, halves: &[Half], u: Vec2, working: &[usize]) -> QpSolution {
    let m = problem.rows.len();
    let u_star = clamp_box(u, problem.u_box);
    let mut row_multipliers = vec![0.0; m];
    let mut box_multipliers = [0.0; 4];
    let lambdas =
        working_multipliers(halves, working, u_star, problem.u_nominal).unwrap_or_default();
    for (&c, &l) in working.iter().zip(&lambdas) {
        if c < m {
            row_multipliers[c] = l;
        } else {
            box_multipliers[c - m] = l;
        }
    }
    let active_set = halves
        .iter()
        .enumerate()
        .filter(|(c, h)| working.contains(c) || h.excess(u_star).abs() <= h.tol)
        .map(|(c, _)| bound_of(c, m))
        .collect();
    QpSolution {
        u_star,
        slack: vec![0.0; m],
        row_multipliers,
        box_multipliers,
        active_set,
        objective: (u_star - problem.u_nominal).norm_sq(),
        relaxed: false,
    }
}

/// `‖u - u_n‖² + rho Σ max(0, a·u - b)²`
fn relaxed_objective(problem: &QpProblem, u: Vec2) -> f64 {
    let pen: f64 = problem
        .rows
        .iter()
        .map(|r| r.excess(u).max(0.0).powi(2))
        .sum();
    (u - problem.u_nominal).norm_sq() + problem.slack_weight * pen
}

/// Quadratic `½ uᵀHu - gᵀu` with symmetric H, stored as (hxx, hxy, hyy).
#[derive(Debug, Clone, Copy)]
struct Quad {
    hxx: f64,
    hxy: f64,
    hyy: f64,
    g: Vec2,
}

impl Quad {
    fn value(&self, u: Vec2) -> f64 {
        0.5 * (self.hxx * u.x * u.x + 2.0 * self.hxy * u.x * u.y + self.hyy * u.y * u.y)
            - self.g.dot(u)
    }

    /// Exact minimizer over the square `|u_m| ≤ r`.
    fn box_minimizer(&self, r: f64) -> Vec2 {
        let det = self.hxx * self.hyy - self.hxy * self.hxy;
        if det > 0.0 {
            let free = Vec2::new(
                (self.hyy * self.g.x - self.hxy * self.g.y) / det,
                (self.hxx * self.g.y - self.hxy * self.g.x) / det,
            );
            if free.x.abs() <= r && free.y.abs() <= r {
                return free;
            }
        }
        let mut best: Option<(Vec2, f64)> = None;
        for side in [r, -r] {
            // x fixed at the side, y free
            let y = ((self.g.y - self.hxy * side) / self.hyy).clamp(-r, r);
            let x = ((self.g.x - self.hxy * side) / self.hxx).clamp(-r, r);
            for u in [Vec2::new(side, y), Vec2::new(x, side)] {
                let f = self.value(u);
                if lex_better(u, f, best) {
                    best = Some((u, f));
                }
            }
        }
        best.map(|b| b.0).unwrap_or(Vec2::ZERO)
    }
}

fn penalized_quad(problem: &QpProblem, u: Vec2) -> Quad {
    let rho = problem.slack_weight;
    let mut q = Quad {
        hxx: 2.0,
        hxy: 0.0,
        hyy: 2.0,
        g: problem.u_nominal * 2.0,
    };
    for r in problem.rows.iter().filter(|r| r.excess(u) > 0.0) {
        q.hxx += 2.0 * rho * r.a.x * r.a.x;
        q.hxy += 2.0 * rho * r.a.x * r.a.y;
        q.hyy += 2.0 * rho * r.a.y * r.a.y;
        q.g += r.a * (2.0 * rho * r.b);
    }
    q
}

/// Exact minimizer over `α ∈ [0, 1]` of the relaxed objective on `u + α d`.
fn line_search(problem: &QpProblem, u: Vec2, d: Vec2) -> f64 {
    let rho = problem.slack_weight;
    let pieces: Vec<(f64, f64)> = problem
        .rows
        .iter()
        .map(|r| (r.excess(u), r.a.dot(d)))
        .collect();
    // derivative on a segment whose interior contains `mid`: c0 + c1 α
    let slope = |mid: f64| {
        let mut c0 = 2.0 * d.dot(u - problem.u_nominal);
        let mut c1 = 2.0 * d.norm_sq();
        for &(e, s) in &pieces {
            if e + mid * s > 0.0 {
                c0 += 2.0 * rho * s * e;
                c1 += 2.0 * rho * s * s;
            }
        }
        (c0, c1)
    };
    let mut knots: Vec<f64> = pieces
        .iter()
        .filter(|&&(_, s)| s != 0.0)
        .map(|&(e, s)| -e / s)
        .filter(|&a| a > 0.0 && a < 1.0)
        .collect();
    knots.push(0.0);
    knots.push(1.0);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    for w in knots.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (c0, c1) = slope(0.5 * (lo + hi));
        if c0 + c1 * hi >= 0.0 {
            return (-c0 / c1).clamp(lo, hi);
        }
    }
    1.0
}

fn solve_relaxed(problem: &QpProblem) -> QpSolution {
    let r = problem.u_box;
    let mut u = clamp_box(problem.u_nominal, r);
    for _ in 0..MAX_RELAXED_ITERS {
        let target = penalized_quad(problem, u).box_minimizer(r);
        let d = target - u;
        if d.norm() <= 1e-15 * (1.0 + u.norm()) {
            break;
        }
        let alpha = line_search(problem, u, d);
        // a full step lands on the target exactly, box faces included
        let next = if alpha == 1.0 {
            target
        } else {
            snap_to_box(u + d * alpha, r)
        };
        if next == u {
            break;
        }
        u = next;
    }
    finish_relaxed(problem, u)
}

fn finish_relaxed(problem: &QpProblem, u: Vec2) -> QpSolution {
    let rho = problem.slack_weight;
    let r = problem.u_box;
    let m = problem.rows.len();
    let slack: Vec<f64> = problem
        .rows
        .iter()
        .map(|row| row.excess(u).max(0.0))
        .collect();
    let row_multipliers: Vec<f64> = slack.iter().map(|s| 2.0 * rho * s).collect();
    let mut grad = (u - problem.u_nominal) * 2.0;
    for (row, l) in problem.rows.iter().zip(&row_multipliers) {
        grad += row.a * *l;
    }
    let mut box_multipliers = [0.0; 4];
    if u.x == r {
        box_multipliers[0] = -grad.x;
    } else if u.x == -r {
        box_multipliers[1] = grad.x;
    }
    if u.y == r {
        box_multipliers[2] = -grad.y;
    } else if u.y == -r {
        box_multipliers[3] = grad.y;
    }
    let mut active_set: Vec<Bound> = (0..m)
        .filter(|&k| {
            let h = Half::new(problem.rows[k].a, problem.rows[k].b, r);
            slack[k] > 0.0 || h.excess(u).abs() <= h.tol
        })
        .map(Bound::Row)
        .collect();
    for (k, b) in BOX_BOUNDS.iter().enumerate() {
        let tight = match k {
            0 => u.x == r,
            1 => u.x == -r,
            2 => u.y == r,
            _ => u.y == -r,
        };
        if tight {
            active_set.push(*b);
        }
    }
    QpSolution {
        u_star: u,
        slack,
        row_multipliers,
        box_multipliers,
        active_set,
        objective: relaxed_objective(problem, u),
        relaxed: true,
    }
}

/// Scaled KKT residuals of a solution. For a solution with `relaxed == false`
/// they refer to the hard problem; otherwise to the slack-penalized one.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal_feasibility: f64,
    pub dual_feasibility: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_feasibility)
            .max(self.dual_feasibility)
            .max(self.complementarity)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// Checks the primal-dual pair carried by `solution` against the KKT system
/// of `problem`. Residuals are relative to the size of the terms involved.
pub fn verify_kkt(problem: &QpProblem, solution: &QpSolution) -> KktReport {
    let u = solution.u_star;
    let r = problem.u_box;
    let box_normals = [
        Vec2::new(1.0, 0.0),
        Vec2::new(-1.0, 0.0),
        Vec2::new(0.0, 1.0),
        Vec2::new(0.0, -1.0),
    ];

    let mut grad = (u - problem.u_nominal) * 2.0;
    let mut magnitude = 1.0f64.max(grad.norm());
    let mut dual = 0.0f64;
    let mut comp = 0.0f64;
    let mut primal = 0.0f64;

    for (k, row) in problem.rows.iter().enumerate() {
        let l = solution.row_multipliers[k];
        let s = solution.slack[k];
        grad += row.a * l;
        magnitude = magnitude.max(l.abs() * row.a.norm());
        dual = dual.max(-l).max(-s);
        let row_scale = (row.a.norm() * r).max(row.b.abs()).max(1.0);
        let gap = row.b + s - row.a.dot(u);
        primal = primal.max(-gap / row_scale);
        comp = comp.max((l * gap).abs() / (row_scale * l.abs().max(1.0)));
        if solution.relaxed {
            // d/ds: 2 rho s - l - nu = 0 with nu ≥ 0 and nu s = 0
            let nu = 2.0 * problem.slack_weight * s - l;
            dual = dual.max(-nu / l.abs().max(1.0));
            comp = comp.max((nu * s).abs() / l.abs().max(1.0));
        } else {
            primal = primal.max(s.abs());
        }
    }
    for (k, n) in box_normals.iter().enumerate() {
        let mu = solution.box_multipliers[k];
        grad += *n * mu;
        magnitude = magnitude.max(mu.abs());
        dual = dual.max(-mu);
        let gap = r - n.dot(u);
        primal = primal.max(-gap / r.max(1.0));
        comp = comp.max((mu * gap).abs() / (r.max(1.0) * mu.abs().max(1.0)));
    }

    KktReport {
        stationarity: grad.norm() / magnitude,
        primal_feasibility: primal.max(0.0),
        dual_feasibility: dual.max(0.0),
        complementarity: comp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::BarrierSource;
    use proptest::prelude::*;

    fn row(a: Vec2, b: f64) -> ConstraintRow {
        ConstraintRow::barrier(a, b, BarrierSource::PlaygroundX)
    }

    fn problem(u_n: Vec2, rows: Vec<ConstraintRow>, u_box: f64) -> QpProblem {
        QpProblem {
            u_nominal: u_n,
            rows,
            u_box,
            slack_weight: 1e6,
        }
    }

    /// Exhaustive grid over the box at spacing `h`; returns the best point
    /// of the relaxed objective.
    fn grid_min(p: &QpProblem, h: f64) -> Vec2 {
        let n = (2.0 * p.u_box / h).round() as i64;
        let mut best = (Vec2::ZERO, f64::INFINITY);
        for i in 0..=n {
            for j in 0..=n {
                let u = Vec2::new(-p.u_box + i as f64 * h, -p.u_box + j as f64 * h);
                let f = relaxed_objective(p, u);
                if f < best.1 {
                    best = (u, f);
                }
            }
        }
        best.0
    }

    #[test]
    fn no_rows_returns_nominal() {
        let p = problem(Vec2::new(0.0, 0.3), vec![], 0.5);
        let s = solve(&p);
        assert_eq!(s.u_star, Vec2::new(0.0, 0.3));
        assert!(!s.relaxed);
        let k = verify_kkt(&p, &s);
        assert_eq!(k.max(), 0.0);
    }

    #[test]
    fn half_plane_projection() {
        let p = problem(
            Vec2::new(0.0, 0.3),
            vec![row(Vec2::new(0.0, 1.0), 0.1)],
            0.5,
        );
        let s = solve(&p);
        assert!((s.u_star - Vec2::new(0.0, 0.1)).norm() < 1e-15);
        assert_eq!(s.slack, vec![0.0]);
        assert!((s.row_multipliers[0] - 0.4).abs() < 1e-12);
        assert_eq!(s.active_set, vec![Bound::Row(0)]);
        assert!(verify_kkt(&p, &s).passes(1e-8));
        let g = grid_min(&p, 1e-3);
        assert!((g - s.u_star).norm() < 1e-3);
    }

    #[test]
    fn conflicting_row_is_absorbed_by_slack() {
        let p = problem(Vec2::ZERO, vec![row(Vec2::new(0.0, 1.0), -10.0)], 0.5);
        let s = solve(&p);
        assert!(s.relaxed);
        assert!((s.u_star - Vec2::new(0.0, -0.5)).norm() < 1e-12);
        assert!((s.slack[0] - 9.5).abs() < 1e-12);
        assert!(s.active_set.contains(&Bound::LowerY));
        assert!(verify_kkt(&p, &s).passes(1e-8), "{:?}", verify_kkt(&p, &s));
        let g = grid_min(&p, 1e-3);
        assert!((g - s.u_star).norm() < 2e-3);
    }

    #[test]
    fn feasible_nominal_is_returned_unchanged() {
        let u_n = Vec2::new(0.123456789, -0.3);
        let p = problem(
            u_n,
            vec![
                row(Vec2::new(1.0, 1.0), 0.0),
                row(Vec2::new(0.0, -1.0), 0.3),
            ],
            0.5,
        );
        assert_eq!(solve(&p).u_star, u_n);
    }

    #[test]
    fn nominal_outside_box_is_clamped() {
        let p = problem(Vec2::new(2.0, -3.0), vec![], 0.5);
        let s = solve(&p);
        assert_eq!(s.u_star, Vec2::new(0.5, -0.5));
        assert!(s.active_set.contains(&Bound::UpperX) && s.active_set.contains(&Bound::LowerY));
        assert!((s.box_multipliers[0] - 3.0).abs() < 1e-12);
        assert!((s.box_multipliers[3] - 5.0).abs() < 1e-12);
        assert!(verify_kkt(&p, &s).passes(1e-8));
    }

    #[test]
    fn vertex_of_two_rows() {
        let rows = vec![
            row(Vec2::new(1.0, 1.0), 0.2),
            row(Vec2::new(-1.0, 1.0), 0.0),
        ];
        let p = problem(Vec2::new(0.0, 0.5), rows, 0.5);
        let s = solve(&p);
        assert!((s.u_star - Vec2::new(0.1, 0.1)).norm() < 1e-14);
        assert!(verify_kkt(&p, &s).passes(1e-8));
    }

    #[test]
    fn zero_normal_rows() {
        // 0·u ≤ 1 is vacuous, 0·u ≤ -1 makes the problem infeasible
        let p = problem(Vec2::new(0.1, 0.1), vec![row(Vec2::ZERO, 1.0)], 0.5);
        assert_eq!(solve(&p).u_star, Vec2::new(0.1, 0.1));
        let p = problem(Vec2::new(0.1, 0.1), vec![row(Vec2::ZERO, -1.0)], 0.5);
        let s = solve(&p);
        assert!(s.relaxed);
        assert_eq!(s.slack, vec![1.0]);
        assert_eq!(s.u_star, Vec2::new(0.1, 0.1));
    }

    #[test]
    fn polygon_clipping() {
        assert_eq!(feasible_polygon(&[], 1.0).len(), 4);
        let cut = feasible_polygon(&[row(Vec2::new(1.0, 0.0), 0.0)], 1.0);
        assert_eq!(cut.len(), 4);
        assert!(cut.iter().all(|p| p.x <= 2e-12));
        assert!(feasible_polygon(&[row(Vec2::new(1.0, 0.0), -2.0)], 1.0).is_empty());
        // a single point left over still counts as feasible
        let pt = feasible_polygon(&[row(Vec2::new(1.0, 1.0), -2.0)], 1.0);
        assert!(!pt.is_empty());
    }

    #[test]
    fn solve_is_deterministic() {
        let rows = vec![
            row(Vec2::new(0.3, 1.0), 0.05),
            row(Vec2::new(-1.0, 0.2), -0.1),
        ];
        let p = problem(Vec2::new(-0.2, 0.4), rows, 0.4);
        assert_eq!(solve(&p), solve(&p));
    }

    fn arb_rows() -> impl Strategy<Value = Vec<ConstraintRow>> {
        prop::collection::vec(
            (0.0..std::f64::consts::TAU, -1.0..2.0f64, -0.5..0.5f64),
            0..12,
        )
        .prop_map(|specs| {
            specs
                .into_iter()
                .map(|(angle, log_scale, offset)| {
                    let a = Vec2::new(angle.cos(), angle.sin()) * 10f64.powf(log_scale);
                    row(a, offset * a.norm())
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn solution_is_optimal_and_in_the_box(
            rows in arb_rows(),
            ux in -0.6..0.6f64, uy in -0.6..0.6f64,
            u_box in 0.2..0.5f64,
        ) {
            let p = problem(Vec2::new(ux, uy), rows, u_box);
            let sol = solve(&p);
            prop_assert!(sol.u_star.x.abs() <= u_box && sol.u_star.y.abs() <= u_box);
            prop_assert!(verify_kkt(&p, &sol).max() <= 1e-8);
            let feasible = !feasible_polygon(&p.rows, u_box).is_empty();
            prop_assert_eq!(sol.relaxed, !feasible);
            if feasible {
                prop_assert!(sol.slack.iter().all(|&s| s == 0.0));
                for r in &p.rows {
                    prop_assert!(r.a.dot(sol.u_star) <= r.b + 1e-9 * r.a.norm().max(1.0));
                }
            }
        }

        #[test]
        fn feasible_nominal_is_returned_exactly(
            rows in arb_rows(),
            ux in -0.2..0.2f64, uy in -0.2..0.2f64,
        ) {
            let u_n = Vec2::new(ux, uy);
            // shift every row so the nominal satisfies it
            let rows: Vec<_> = rows
                .into_iter()
                .map(|r| row(r.a, r.b.max(r.a.dot(u_n))))
                .collect();
            let p = problem(u_n, rows, 0.3);
            prop_assert_eq!(solve(&p).u_star, u_n);
        }
    }
}
