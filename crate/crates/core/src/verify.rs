//! Bundled verification suite: bound checks, oracle comparisons and
//! residuals, each reported as one pass/fail line.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::catalog::{guarantee, Demo, GuaranteeOptions, DEMOS};
use crate::expr::{parse, print, BinOp, Expr, Func};
use crate::horizon::{horizon_for, logistic_horizon, quadratic_feasible};
use crate::integrate::{closed_form_constant_coeff, euler_max, heun_max, residual, zero_crossings, ConstantCoeffSystem};
use crate::picard::{
    coupled_linear_bound_check, coupled_linear_sequence, coupled_quadratic_bound_check, coupled_quadratic_sequence,
    default_eps_grid, logistic_bound_check, logistic_g_sequence, solve_picard, PicardConfig, PicardError,
};
use crate::problem::ProblemSpec;
use crate::trajectory::{prefix_max, sup_dist, Grid, Trajectory};

pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyOptions {
    /// Overrides the `10 h` discretization slack of every bound check.
    pub eps_grid: Option<f64>,
    pub seed: Option<u64>,
    /// Runs only criteria whose key or tags contain this string.
    pub filter: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub key: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!("[{}] C{:<2} {:<24} {}", if self.passed { "PASS" } else { "FAIL" }, self.id, self.key, self.detail)
    }
}

type Check = fn(&VerifyOptions) -> Outcome;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Outcome {
        Outcome { passed, detail: detail.into() }
    }

    fn fail(detail: impl std::fmt::Display) -> Outcome {
        Outcome { passed: false, detail: detail.to_string() }
    }
}

struct Criterion {
    id: usize,
    key: &'static str,
    tags: &'static [&'static str],
    run: Check,
}

const CRITERIA: [Criterion; 11] = [
    Criterion { id: 1, key: "constant-solutions", tags: &["logistic", "steppers", "picard"], run: constant_solutions },
    Criterion { id: 2, key: "logistic-bounds", tags: &["logistic", "bounds", "picard"], run: logistic_bounds },
    Criterion { id: 3, key: "logistic-reduction", tags: &["logistic", "picard"], run: logistic_reduction },
    Criterion { id: 4, key: "coupled-linear", tags: &["coupled_linear", "bounds", "picard"], run: coupled_linear },
    Criterion { id: 5, key: "equal-data-guard", tags: &["coupled_linear"], run: equal_data_guard },
    Criterion { id: 6, key: "constant-coeff", tags: &["constant_coeff", "closed_form"], run: constant_coeff },
    Criterion { id: 7, key: "coupled-quadratic", tags: &["coupled_quadratic", "bounds", "picard"], run: coupled_quadratic },
    Criterion { id: 8, key: "contraction-horizon", tags: &["logistic", "horizon", "picard"], run: contraction_horizon },
    Criterion { id: 9, key: "max-operator", tags: &["max", "properties"], run: max_operator },
    Criterion { id: 10, key: "cross-solver", tags: &["demos", "steppers", "picard"], run: cross_solver },
    Criterion { id: 11, key: "parser-round-trip", tags: &["parser", "properties"], run: parser_round_trip },
];

fn selected(c: &Criterion, filter: &Option<String>) -> bool {
    match filter {
        None => true,
        Some(f) => c.key.contains(f.as_str()) || c.tags.iter().any(|t| t.contains(f.as_str())),
    }
}

/// Runs the selected criteria in fixed order.
pub fn run(opts: &VerifyOptions) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .filter(|c| selected(c, &opts.filter))
        .map(|c| {
            let out = (c.run)(opts);
            CriterionResult { id: c.id, key: c.key, passed: out.passed, detail: out.detail }
        })
        .collect()
}

fn eps_for(opts: &VerifyOptions, grid: &Grid) -> f64 {
    opts.eps_grid.unwrap_or_else(|| default_eps_grid(grid))
}

fn logistic(x0: f64, t: f64) -> ProblemSpec {
    ProblemSpec::from_strings(&["x1 - m1"], &["x1^2"], vec![x0], t).expect("valid logistic problem")
}

fn max_deviation(traj: &Trajectory, c: f64) -> f64 {
    traj.states().flatten().map(|v| (v - c).abs()).fold(0.0, f64::max)
}

fn constant_solutions(_: &VerifyOptions) -> Outcome {
    let grid = Grid::with_step(1.0, 1e-3).expect("grid");
    let mut worst = 0.0_f64;
    for c in [0.0, 1.0] {
        let spec = logistic(c, 1.0);
        let cfg = PicardConfig::new(grid, 1e-12, 50);
        let runs = [
            euler_max(&spec, &grid).map_err(|e| e.to_string()),
            heun_max(&spec, &grid).map_err(|e| e.to_string()),
            solve_picard(&spec, &cfg).map(|(t, _)| t).map_err(|e| e.to_string()),
        ];
        for r in runs {
            match r {
                Ok(t) => worst = worst.max(max_deviation(&t, c)),
                Err(e) => return Outcome::fail(e),
            }
        }
    }
    Outcome::new(worst <= 1e-14, format!("max deviation {worst:.3e} <= 1e-14"))
}

fn logistic_bounds(opts: &VerifyOptions) -> Outcome {
    let alpha = 2.0;
    let mut total = 0;
    let mut worst = f64::NEG_INFINITY;
    for x0 in [0.25, 0.5, 0.75, 1.5, -0.5] {
        let t_star = 0.8 * logistic_horizon(x0, alpha).expect("alpha > 1");
        let grid = Grid::with_step(t_star, 1e-3).expect("grid");
        let seq = logistic_g_sequence(x0, 20, &grid);
        match logistic_bound_check(x0, alpha, t_star, &grid, &seq, eps_for(opts, &grid)) {
            Ok(rep) => {
                total += rep.violations();
                worst = worst.max(rep.worst_excess);
            }
            Err(e) => return Outcome::fail(e),
        }
    }
    Outcome::new(total == 0, format!("{total} violations over 5 initial values, n <= 20 (worst excess {worst:.3e})"))
}

fn logistic_exact(x0: f64, t: f64) -> f64 {
    x0 * t.exp() / (1.0 - x0 + x0 * t.exp())
}

fn logistic_reduction(_: &VerifyOptions) -> Outcome {
    let x0 = 0.5;
    let grid = Grid::with_step(0.2, 1e-3).expect("grid");
    let (traj, rep) = match solve_picard(&logistic(x0, 0.2), &PicardConfig::new(grid, 1e-12, 100)) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(e),
    };
    let xs = traj.component(0);
    let increasing = xs.windows(2).all(|w| w[1] >= w[0]);
    let err = grid
        .nodes()
        .zip(&xs)
        .map(|(t, v)| (v - logistic_exact(x0, t)).abs())
        .fold(0.0, f64::max);
    Outcome::new(
        rep.converged && increasing && err <= 1e-5,
        format!("converged={} in {} iters, increasing={increasing}, sup error {err:.3e} <= 1e-5", rep.converged, rep.n_iters),
    )
}

fn coupled_linear(opts: &VerifyOptions) -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (x0, y0) in [(2.0, 1.0), (1.0, 0.5)] {
        let grid = Grid::with_step(1.0, 1e-3).expect("grid");
        let h = grid.step();
        let exact = |t: f64| (y0 + (x0 - y0) * t.exp(), y0 - (x0 - y0) * t * t.exp());
        let rows: Vec<Vec<f64>> = grid.nodes().map(|t| { let (a, b) = exact(t); vec![a, b] }).collect();
        let oracle = Trajectory::from_rows(grid, rows).expect("rows");
        let spec = ProblemSpec::from_strings(&["x1 - m2", "x2 - m1"], &["x1", "x2"], vec![x0, y0], 1.0).expect("spec");
        let oracle_res = match residual(&spec, &oracle) {
            Ok(r) => r.sup_residual,
            Err(e) => return Outcome::fail(e),
        };
        let seqs = match coupled_linear_sequence(x0, y0, 40, &grid) {
            Ok(s) => s,
            Err(e) => return Outcome::fail(e),
        };
        let rep = match coupled_linear_bound_check(x0, y0, 1.0, &grid, &seqs, eps_for(opts, &grid)) {
            Ok(r) => r,
            Err(e) => return Outcome::fail(e),
        };
        let last = Trajectory::from_components(grid, &[seqs.0[40].clone(), seqs.1[40].clone()]).expect("limit");
        let err = sup_dist(&last, &oracle).expect("same grid");
        ok &= oracle_res <= 10.0 * h * h && rep.violations() == 0 && err <= 1e-5;
        details.push(format!(
            "({x0},{y0}): oracle residual {oracle_res:.2e}, {} violations, limit error {err:.2e}",
            rep.violations()
        ));
    }
    Outcome::new(ok, details.join("; "))
}

fn equal_data_guard(_: &VerifyOptions) -> Outcome {
    let grid = Grid::with_step(1.0, 1e-2).expect("grid");
    match coupled_linear_sequence(1.0, 1.0, 5, &grid) {
        Err(e @ PicardError::EqualInitialData(_)) => Outcome::new(true, format!("rejected: {e}")),
        Err(e) => Outcome::fail(format!("wrong error: {e}")),
        Ok(_) => Outcome::fail("x0 = y0 was accepted"),
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn constant_coeff(_: &VerifyOptions) -> Outcome {
    let sys = ConstantCoeffSystem::new(1.0, 1.0, 1.0, 3.0, 1.0, 2.0).expect("valid system");
    let h = 1e-4;
    let grid = Grid::with_step(0.6, h).expect("grid");
    let traj = match closed_form_constant_coeff(&sys, &grid) {
        Ok(t) => t,
        Err(e) => return Outcome::fail(e),
    };
    let spec = sys.to_spec(0.6).expect("spec");
    let res = residual(&spec, &traj).expect("residual").sup_residual;
    let z = zero_crossings(&sys).expect("valid");
    let (tx, ty) = (z.t_x.unwrap_or(f64::NAN), z.t_y.unwrap_or(f64::NAN));
    let bx = bisect(|t| sys.eval(t).0, 0.0, 2.0);
    let by = bisect(|t| sys.eval(t).1, 0.0, 2.0);
    let ok = res <= 5.0 * h * h
        && (tx - bx).abs() <= 1e-8
        && (ty - by).abs() <= 1e-8
        && (tx - 2f64.ln()).abs() <= 1e-12
        && (ty - 3f64.ln()).abs() <= 1e-12;
    Outcome::new(
        ok,
        format!("residual {res:.2e} <= {:.1e}; t_x {tx:.9} (bisection {bx:.9}), t_y {ty:.9} (bisection {by:.9})", 5.0 * h * h),
    )
}

fn coupled_quadratic(opts: &VerifyOptions) -> Outcome {
    let (x0, y0, t, c0) = (0.05, 0.05, 0.5, 0.2);
    let feas = quadratic_feasible(x0, y0, t, c0);
    let expected = [0.12625, 0.12625, 0.03, 0.03];
    let slack_err = feas.slacks.iter().zip(expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let grid = Grid::with_step(t, 1e-3).expect("grid");
    let seqs = match coupled_quadratic_sequence(x0, y0, 15, &grid, c0) {
        Ok(s) => s,
        Err(e) => return Outcome::fail(e),
    };
    let rep = match coupled_quadratic_bound_check(c0, t, &grid, &seqs, eps_for(opts, &grid)) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(e),
    };
    Outcome::new(
        feas.feasible && slack_err <= 1e-12 && rep.violations() == 0,
        format!("feasible={}, slack error {slack_err:.1e}, {} bound violations for n <= 15", feas.feasible, rep.violations()),
    )
}

fn contraction_horizon(_: &VerifyOptions) -> Outcome {
    let spec = logistic(0.5, 0.2);
    let (data, hz) = match horizon_for(&spec, 2.0) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(e),
    };
    let q = hz.contraction_factor;
    let grid = Grid::with_step(hz.t_rec, 1e-3).expect("grid");
    let cfg = PicardConfig::new(grid, 1e-12, 100).with_contraction(q);
    let rep = match solve_picard(&spec, &cfg) {
        Ok((_, r)) => r,
        Err(e) => return Outcome::fail(e),
    };
    let ratios = rep.ratios(1e-13);
    let eventual = ratios.iter().skip(1).copied().fold(0.0, f64::max);
    Outcome::new(
        q < 1.0 && rep.converged && eventual <= q + 0.05 && rep.bound_violations == 0,
        format!(
            "M={:.4} L_f={:.4} L_g={:.4} (estimated); T_rec={:.5}, q={q:.4}, max ratio after first {eventual:.4}",
            data.m_bound, data.l_f, data.l_g, hz.t_rec
        ),
    )
}

fn max_operator(opts: &VerifyOptions) -> Outcome {
    let mut rng = StdRng::seed_from_u64(opts.seed.unwrap_or(DEFAULT_SEED));
    let mut failures = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..64);
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let h: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let (pg, ph) = (prefix_max(&g), prefix_max(&h));
        let mut sup = 0.0_f64;
        for k in 0..n {
            sup = sup.max((g[k] - h[k]).abs());
            if (pg[k] - ph[k]).abs() > sup {
                failures += 1;
            }
        }
        if prefix_max(&pg) != pg {
            failures += 1;
        }
        let upper: Vec<f64> = g.iter().zip(&h).map(|(a, b)| a.max(*b)).collect();
        if prefix_max(&upper).iter().zip(&pg).any(|(u, p)| p > u) {
            failures += 1;
        }
    }
    Outcome::new(failures == 0, format!("{failures} failures over 1000 random pairs"))
}

/// End time covered by an existence result for a demo, or its own horizon
/// when none applies.
fn covered_horizon(demo: &Demo, spec: &ProblemSpec) -> f64 {
    let t = spec.horizon();
    // The constant-coefficient demo is covered by its closed form.
    if !demo.guaranteed || demo.name == "constant_coeff" {
        return t;
    }
    match guarantee(spec, t, GuaranteeOptions::default()) {
        Ok(g) if g.ok => t,
        _ => horizon_for(spec, 1.0).map(|(_, r)| r.t_rec.min(t)).unwrap_or(t),
    }
}

fn cross_solver(_: &VerifyOptions) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for demo in DEMOS {
        let spec = demo.spec();
        let t_end = covered_horizon(&demo, &spec);
        let grid = Grid::with_step(t_end, 1e-3).expect("grid");
        let h = grid.step();
        let heun = match heun_max(&spec, &grid) {
            Ok(t) => t,
            Err(e) => return Outcome::fail(format!("{}: {e}", demo.name)),
        };
        let (pic, rep) = match solve_picard(&spec, &PicardConfig::new(grid, 1e-12, 200)) {
            Ok(r) => r,
            Err(e) => return Outcome::fail(format!("{}: {e}", demo.name)),
        };
        let d = sup_dist(&heun, &pic).expect("same grid");
        let pass = rep.converged && d <= 100.0 * h * h;
        ok &= pass;
        let flag = if demo.guaranteed { "" } else { " [no existence guarantee]" };
        parts.push(format!("{} [0,{t_end:.4}] {d:.1e}{flag}", demo.name));
    }
    Outcome::new(ok, format!("heun vs picard <= 100 h^2: {}", parts.join(", ")))
}

/// Random expression trees shaped like parser output (nonnegative constants).
pub fn random_expr(rng: &mut impl Rng, depth: u32, dim: usize, n_max: usize) -> Expr {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        return match rng.gen_range(0..4) {
            0 => {
                let v: f64 = match rng.gen_range(0..3) {
                    0 => rng.gen_range(0..100) as f64,
                    1 => rng.gen_range(0.0..10.0),
                    _ => rng.gen_range(0.0..1e-3),
                };
                Expr::Constant(v)
            }
            1 => Expr::Time,
            2 => Expr::State(rng.gen_range(1..=dim)),
            _ if n_max > 0 => Expr::Max(rng.gen_range(1..=n_max)),
            _ => Expr::State(1),
        };
    }
    match rng.gen_range(0..7) {
        0 => Expr::negate(random_expr(rng, depth - 1, dim, n_max)),
        1 => Expr::call(Func::ALL[rng.gen_range(0..Func::ALL.len())], random_expr(rng, depth - 1, dim, n_max)),
        k => {
            let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow][k - 2];
            Expr::binary(op, random_expr(rng, depth - 1, dim, n_max), random_expr(rng, depth - 1, dim, n_max))
        }
    }
}

fn parser_round_trip(opts: &VerifyOptions) -> Outcome {
    let mut rng = StdRng::seed_from_u64(opts.seed.unwrap_or(DEFAULT_SEED).wrapping_add(1));
    let mut failures = Vec::new();
    for _ in 0..500 {
        let e = random_expr(&mut rng, 5, 3, 2);
        let text = print(&e);
        let ok = match parse(&text) {
            Ok(p) => p == e && parse(&print(&p)).as_ref() == Ok(&p),
            Err(_) => false,
        };
        if !ok {
            failures.push(text);
        }
    }
    let detail = match failures.first() {
        None => "500 generated expressions round-trip".to_string(),
        Some(f) => format!("{} failures, first: {f}", failures.len()),
    };
    Outcome::new(failures.is_empty(), detail)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_selects_logistic_criteria() {
        let opts = VerifyOptions { filter: Some("logistic".into()), ..Default::default() };
        let ids: Vec<usize> = CRITERIA.iter().filter(|c| selected(c, &opts.filter)).map(|c| c.id).collect();
        assert_eq!(ids, vec![1, 2, 3, 8]);
    }

    #[test]
    fn full_suite_passes() {
        let results = run(&VerifyOptions::default());
        for r in &results {
            println!("{}", r.line());
        }
        assert_eq!(results.len(), 11);
        assert!(results.iter().all(|r| r.passed));
    }

    #[test]
    fn bisection_finds_roots() {
        assert!((bisect(|t| t * t - 2.0, 0.0, 2.0) - 2f64.sqrt()).abs() < 1e-11);
    }
}
