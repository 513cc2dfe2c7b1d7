//! Picard iteration for the integral form `x(t) = x0 + int_0^t f(s, x(s), r(s)) ds`,
//! where `r_j(s)` is the running max of `h_j(x)` over `[0, s]`.
//!
//! Besides the general solver this module carries three specialized schemes
//! with closed-form a-priori error bounds:
//!
//! * the logistic scheme `x_n = x0 g_n` for `x' = x - max x^2`,
//! * the monotone scheme for `x' = x - max y`, `y' = y - max x` with `0 < y0 < x0`,
//! * the bounded scheme for `x' = x - max y^2`, `y' = y - max x^2`.
//!
//! Bound checks are one-sided and carry a discretization slack `eps_grid`
//! (default `10 h`): the bounds hold for exact integrals, the iterates here
//! use the trapezoid rule.

use serde::Serialize;
use thiserror::Error;

use crate::expr::EvalError;
use crate::horizon::{logistic_horizon, quadratic_feasible, HorizonError};
use crate::problem::ProblemSpec;
use crate::trajectory::{cumint, prefix_max, sup_dist, Grid, RunningMaxTrack, Trajectory, TrajectoryError};

/// Discretization slack per unit step.
pub const EPS_GRID_FACTOR: f64 = 10.0;

/// Default slack `10 h` for bound checks on `grid`.
pub fn default_eps_grid(grid: &Grid) -> f64 {
    EPS_GRID_FACTOR * grid.step()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PicardError {
    #[error("evaluation failed at node {node}: {source}")]
    Eval { node: usize, source: EvalError },
    #[error("iterate {iter} is not finite at node {node}")]
    NonFinite { iter: usize, node: usize },
    #[error("trajectory has dimension {found}, problem has {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("equal initial data x0 = y0 = {0}: the ordering x_n >= y_n that makes the running maxima explicit cannot start, so the monotone scheme is undefined")]
    EqualInitialData(f64),
    #[error("the monotone scheme needs 0 < y0 < x0, got x0 = {x0}, y0 = {y0}")]
    Ordering { x0: f64, y0: f64 },
    #[error("initial data must be positive, got x0 = {x0}, y0 = {y0}")]
    NonPositive { x0: f64, y0: f64 },
    #[error("(T = {t}, c0 = {c0}) is infeasible: {label} fails")]
    Infeasible { t: f64, c0: f64, label: &'static str },
    #[error("grid ends at {grid_end}, expected {expected}")]
    GridEnd { grid_end: f64, expected: f64 },
    #[error("horizon {t_star} is not below the admissible bound {bound}")]
    BeyondHorizon { t_star: f64, bound: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Horizon(#[from] HorizonError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// One application of the Picard map: node `k` of the result is
/// `x0 + trapezoid(f(t_i, x_i, r_i), i <= k)`.
pub fn picard_operator(spec: &ProblemSpec, x: &Trajectory) -> Result<Trajectory, PicardError> {
    let m = spec.dim();
    if x.dim() != m {
        return Err(PicardError::Dimension { expected: m, found: x.dim() });
    }
    let grid = *x.grid();
    let h = grid.step();
    let mut track = RunningMaxTrack::new();
    let mut out = Trajectory::constant(grid, spec.x0());
    let mut prev = vec![0.0; m];
    let mut cur = vec![0.0; m];
    let mut acc = vec![0.0; m];
    for (k, state) in x.states().enumerate() {
        let r = track.append(state, spec.maxima()).map_err(|e| match e {
            TrajectoryError::Eval(source) => PicardError::Eval { node: k, source },
            other => other.into(),
        })?;
        spec.eval_rhs(grid.node(k), state, r, &mut cur)
            .map_err(|source| PicardError::Eval { node: k, source })?;
        if k > 0 {
            let row = out.state_mut(k);
            for i in 0..m {
                acc[i] += 0.5 * h * (prev[i] + cur[i]);
                row[i] = spec.x0()[i] + acc[i];
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardConfig {
    pub grid: Grid,
    pub tol: f64,
    pub max_iter: usize,
    /// Contraction factor supplied by the horizon analysis, if any.
    pub contraction: Option<f64>,
    /// Overrides the default `10 h` slack of the contraction check.
    pub eps_grid: Option<f64>,
}

impl PicardConfig {
    pub fn new(grid: Grid, tol: f64, max_iter: usize) -> PicardConfig {
        PicardConfig { grid, tol, max_iter, contraction: None, eps_grid: None }
    }

    pub fn with_contraction(mut self, q: f64) -> PicardConfig {
        self.contraction = Some(q);
        self
    }

    fn validate(&self) -> Result<(), PicardError> {
        if !(self.tol > 0.0) {
            return Err(PicardError::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(PicardError::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardReport {
    pub n_iters: usize,
    /// `||x_{n+1} - x_n||_inf` per iteration.
    pub deltas: Vec<f64>,
    /// Allowed value of each delta under the contraction bound; empty without one.
    pub bound_curve: Vec<f64>,
    pub converged: bool,
    pub bound_violations: usize,
}

impl PicardReport {
    /// Ratios `deltas[n+1] / deltas[n]` while both are above `floor`.
    pub fn ratios(&self, floor: f64) -> Vec<f64> {
        self.deltas
            .windows(2)
            .take_while(|w| w[0] > floor && w[1] > floor)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

/// Iterator over Picard iterates `x_1, x_2, ...` starting from `x_0 = x0`.
pub struct PicardIterates<'a> {
    spec: &'a ProblemSpec,
    current: Trajectory,
    iter: usize,
}

impl<'a> PicardIterates<'a> {
    pub fn new(spec: &'a ProblemSpec, grid: Grid) -> PicardIterates<'a> {
        PicardIterates { spec, current: Trajectory::constant(grid, spec.x0()), iter: 0 }
    }

    pub fn current(&self) -> &Trajectory {
        &self.current
    }
}

impl Iterator for PicardIterates<'_> {
    type Item = Result<Trajectory, PicardError>;

    fn next(&mut self) -> Option<Self::Item> {
        let next = match picard_operator(self.spec, &self.current) {
            Ok(n) => n,
            Err(e) => return Some(Err(e)),
        };
        self.iter += 1;
        if let Some(node) = next.first_non_finite() {
            return Some(Err(PicardError::NonFinite { iter: self.iter, node }));
        }
        self.current = next.clone();
        Some(Ok(next))
    }
}

/// Iterates from the constant initial guess until successive iterates are
/// within `tol` in sup-norm or `max_iter` is reached.
pub fn solve_picard(spec: &ProblemSpec, cfg: &PicardConfig) -> Result<(Trajectory, PicardReport), PicardError> {
    cfg.validate()?;
    let eps = cfg.eps_grid.unwrap_or_else(|| default_eps_grid(&cfg.grid));
    let mut iterates = PicardIterates::new(spec, cfg.grid);
    let mut prev = iterates.current().clone();
    let mut report = PicardReport {
        n_iters: 0,
        deltas: Vec::new(),
        bound_curve: Vec::new(),
        converged: false,
        bound_violations: 0,
    };
    for _ in 0..cfg.max_iter {
        let next = iterates.next().expect("unbounded iterator")?;
        let delta = sup_dist(&prev, &next)?;
        if let Some(q) = cfg.contraction {
            let allowed = match report.deltas.last() {
                Some(&last) => q * last * (1.0 + eps),
                None => delta,
            };
            // below the rounding floor the ratio carries no information
            let floor = 1e-13 * next.states().flatten().fold(1.0_f64, |a, v| a.max(v.abs()));
            if delta > allowed && delta > floor {
                report.bound_violations += 1;
            }
            report.bound_curve.push(allowed);
        }
        report.deltas.push(delta);
        prev = next;
        if delta <= cfg.tol {
            report.converged = true;
            break;
        }
    }
    report.n_iters = report.deltas.len();
    Ok((prev, report))
}

/// Outcome of a specialized scheme's a-priori bound check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    /// Nodewise comparisons performed.
    pub checks: usize,
    /// Violations of the uniform magnitude bound.
    pub magnitude_violations: usize,
    /// Violations of the successive-difference bound.
    pub difference_violations: usize,
    /// Violations of structural invariants (ordering, monotonicity).
    pub invariant_violations: usize,
    /// Sup over nodes (and components) of `|iterate_{n+1} - iterate_n|`.
    pub deltas: Vec<f64>,
    /// Difference bound evaluated at the end of the grid.
    pub bound_at_end: Vec<f64>,
    /// Largest `lhs - (rhs + eps)` seen; negative when every check passes.
    pub worst_excess: f64,
}

impl BoundReport {
    fn new() -> BoundReport {
        BoundReport {
            checks: 0,
            magnitude_violations: 0,
            difference_violations: 0,
            invariant_violations: 0,
            deltas: Vec::new(),
            bound_at_end: Vec::new(),
            worst_excess: f64::NEG_INFINITY,
        }
    }

    pub fn violations(&self) -> usize {
        self.magnitude_violations + self.difference_violations + self.invariant_violations
    }

    fn record(&mut self, excess: f64) -> bool {
        self.checks += 1;
        self.worst_excess = self.worst_excess.max(excess);
        excess > 0.0
    }
}

/// `z^p / p!`, computed as a running product.
fn power_over_factorial(z: f64, p: usize) -> f64 {
    (1..=p).fold(1.0, |acc, i| acc * z / i as f64)
}

fn check_grid_end(grid: &Grid, expected: f64) -> Result<(), PicardError> {
    if (grid.end() - expected).abs() > 1e-9 * expected.abs().max(1.0) {
        return Err(PicardError::GridEnd { grid_end: grid.end(), expected });
    }
    Ok(())
}

/// `g_0 ≡ 1`, `g_n = 1 + int g_{n-1} - x0 int max[g_{n-1}^2]`; the logistic
/// iterates are `x_n = x0 g_n`.
pub fn logistic_g_sequence(x0: f64, n: usize, grid: &Grid) -> Vec<Vec<f64>> {
    let h = grid.step();
    let mut seq = vec![vec![1.0; grid.n_nodes()]];
    for _ in 0..n {
        let prev = seq.last().expect("nonempty");
        let lin = cumint(prev, h);
        let sq: Vec<f64> = prev.iter().map(|g| g * g).collect();
        let quad = cumint(&prefix_max(&sq), h);
        let next = lin.iter().zip(&quad).map(|(a, b)| 1.0 + (a - x0 * b)).collect();
        seq.push(next);
    }
    seq
}

/// Checks `|g_n| <= alpha` and
/// `|g_{n+1} - g_n| <= |1-x0|/K * (K t)^{n+1} / (n+1)!`, `K = 1 + 2 alpha |x0|`,
/// at every node, each with slack `eps_grid`.
pub fn logistic_bound_check(
    x0: f64,
    alpha: f64,
    t_star: f64,
    grid: &Grid,
    seq: &[Vec<f64>],
    eps_grid: f64,
) -> Result<BoundReport, PicardError> {
    let bound = logistic_horizon(x0, alpha)?;
    if !(t_star < bound) {
        return Err(PicardError::BeyondHorizon { t_star, bound });
    }
    check_grid_end(grid, t_star)?;
    let k = 1.0 + 2.0 * alpha * x0.abs();
    let scale = (1.0 - x0).abs() / k;
    let mut rep = BoundReport::new();
    for g in seq {
        for &v in g {
            if rep.record(v.abs() - (alpha + eps_grid)) {
                rep.magnitude_violations += 1;
            }
        }
    }
    for (n, w) in seq.windows(2).enumerate() {
        let mut sup = 0.0_f64;
        for (i, t) in grid.nodes().enumerate() {
            let diff = (w[1][i] - w[0][i]).abs();
            sup = sup.max(diff);
            let rhs = scale * power_over_factorial(k * t, n + 1);
            if rep.record(diff - (rhs + eps_grid)) {
                rep.difference_violations += 1;
            }
        }
        rep.deltas.push(sup);
        rep.bound_at_end.push(scale * power_over_factorial(k * grid.end(), n + 1));
    }
    Ok(rep)
}

/// Iterates sequence pairs `(x_0..x_n, y_0..y_n)` sampled on a grid.
pub type SequencePair = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Monotone scheme `x_{n+1} = x0 + int (x_n - y0)`, `y_{n+1} = y0 + int (y_n - x_n)`
/// for `x' = x - max y`, `y' = y - max x` with `0 < y0 < x0`: the x-iterates
/// increase and the y-iterates decrease, so the running maxima are `x_n` and `y0`.
pub fn coupled_linear_sequence(x0: f64, y0: f64, n: usize, grid: &Grid) -> Result<SequencePair, PicardError> {
    if x0 == y0 {
        return Err(PicardError::EqualInitialData(x0));
    }
    if !(y0 > 0.0) {
        return Err(PicardError::NonPositive { x0, y0 });
    }
    if x0 < y0 {
        return Err(PicardError::Ordering { x0, y0 });
    }
    let h = grid.step();
    let mut xs = vec![vec![x0; grid.n_nodes()]];
    let mut ys = vec![vec![y0; grid.n_nodes()]];
    for _ in 0..n {
        let (xp, yp) = (xs.last().expect("nonempty"), ys.last().expect("nonempty"));
        let ix = cumint(&xp.iter().map(|v| v - y0).collect::<Vec<_>>(), h);
        let iy = cumint(&yp.iter().zip(xp).map(|(y, x)| y - x).collect::<Vec<_>>(), h);
        let xn = ix.iter().map(|v| x0 + v).collect();
        let yn = iy.iter().map(|v| y0 + v).collect();
        xs.push(xn);
        ys.push(yn);
    }
    Ok((xs, ys))
}

/// Checks `|x_{n+1} - x_n| <= |x0-y0| t^{n+1}/(n+1)!`,
/// `|y_{n+1} - y_n| <= |x0-y0| T t^{n+1}/n!` and the structural invariants
/// `x_n >= y0`, `y_n <= x_n`, `x_n` nondecreasing, `y_n` nonincreasing.
pub fn coupled_linear_bound_check(
    x0: f64,
    y0: f64,
    t_end: f64,
    grid: &Grid,
    seqs: &SequencePair,
    eps_grid: f64,
) -> Result<BoundReport, PicardError> {
    check_grid_end(grid, t_end)?;
    let (xs, ys) = seqs;
    let d = (x0 - y0).abs();
    let mut rep = BoundReport::new();
    for (xn, yn) in xs.iter().zip(ys) {
        for i in 0..xn.len() {
            if xn[i] < y0 || yn[i] > xn[i] {
                rep.invariant_violations += 1;
            }
            if i > 0 && (xn[i] < xn[i - 1] || yn[i] > yn[i - 1]) {
                rep.invariant_violations += 1;
            }
        }
    }
    for n in 0..xs.len().saturating_sub(1) {
        let mut sup = 0.0_f64;
        for (i, t) in grid.nodes().enumerate() {
            let dx = (xs[n + 1][i] - xs[n][i]).abs();
            let dy = (ys[n + 1][i] - ys[n][i]).abs();
            sup = sup.max(dx).max(dy);
            let bx = d * power_over_factorial(t, n + 1);
            // t^{n+1}/n! = (n+1) t^{n+1}/(n+1)!
            let by = d * t_end * (n + 1) as f64 * power_over_factorial(t, n + 1);
            if rep.record(dx - (bx + eps_grid)) {
                rep.difference_violations += 1;
            }
            if rep.record(dy - (by + eps_grid)) {
                rep.difference_violations += 1;
            }
        }
        rep.deltas.push(sup);
        rep.bound_at_end.push(d * power_over_factorial(t_end, n + 1));
    }
    Ok(rep)
}

/// Bounded scheme `x_{n+1} = x0 + int x_n - int max y_n^2`,
/// `y_{n+1} = y0 + int y_n - int max x_n^2` on `[0, T]`, `T` the grid end.
/// Requires positive data and `(T, c0)` satisfying all four feasibility inequalities.
pub fn coupled_quadratic_sequence(x0: f64, y0: f64, n: usize, grid: &Grid, c0: f64) -> Result<SequencePair, PicardError> {
    if !(x0 > 0.0 && y0 > 0.0) {
        return Err(PicardError::NonPositive { x0, y0 });
    }
    let feas = quadratic_feasible(x0, y0, grid.end(), c0);
    if let Some((_, label)) = feas.first_violation() {
        return Err(PicardError::Infeasible { t: grid.end(), c0, label });
    }
    let h = grid.step();
    let mut xs = vec![vec![x0; grid.n_nodes()]];
    let mut ys = vec![vec![y0; grid.n_nodes()]];
    let sq_max = |v: &[f64]| prefix_max(&v.iter().map(|a| a * a).collect::<Vec<_>>());
    for _ in 0..n {
        let (xp, yp) = (xs.last().expect("nonempty"), ys.last().expect("nonempty"));
        let ix = cumint(xp, h);
        let iy = cumint(yp, h);
        let my = cumint(&sq_max(yp), h);
        let mx = cumint(&sq_max(xp), h);
        let xn = ix.iter().zip(&my).map(|(a, b)| x0 + (a - b)).collect();
        let yn = iy.iter().zip(&mx).map(|(a, b)| y0 + (a - b)).collect();
        xs.push(xn);
        ys.push(yn);
    }
    Ok((xs, ys))
}

/// Checks `|x_n|, |y_n| <= c0` and both difference bounds
/// `(c0/T) (1 + 2 c0)^n t^{n+1} / (n+1)!`, each with slack `eps_grid`.
pub fn coupled_quadratic_bound_check(
    c0: f64,
    t_end: f64,
    grid: &Grid,
    seqs: &SequencePair,
    eps_grid: f64,
) -> Result<BoundReport, PicardError> {
    check_grid_end(grid, t_end)?;
    let (xs, ys) = seqs;
    let mut rep = BoundReport::new();
    for v in xs.iter().chain(ys).flatten() {
        if rep.record(v.abs() - (c0 + eps_grid)) {
            rep.magnitude_violations += 1;
        }
    }
    let growth = 1.0 + 2.0 * c0;
    for n in 0..xs.len().saturating_sub(1) {
        let mut sup = 0.0_f64;
        let coef = c0 / t_end * growth.powi(n as i32);
        for (i, t) in grid.nodes().enumerate() {
            let rhs = coef * power_over_factorial(t, n + 1);
            for seq in [xs, ys] {
                let diff = (seq[n + 1][i] - seq[n][i]).abs();
                sup = sup.max(diff);
                if rep.record(diff - (rhs + eps_grid)) {
                    rep.difference_violations += 1;
                }
            }
        }
        rep.deltas.push(sup);
        rep.bound_at_end.push(coef * power_over_factorial(t_end, n + 1));
    }
    Ok(rep)
}
