//! Direct time stepping with running maxima, the explicit solution of the
//! constant-coefficient linear system, and the integral-form residual.

use serde::Serialize;
use thiserror::Error;

use crate::expr::EvalError;
use crate::picard::{picard_operator, PicardError};
use crate::problem::ProblemSpec;
use crate::trajectory::{Grid, RunningMaxTrack, Trajectory, TrajectoryError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("evaluation failed at node {node}: {source}")]
    Eval { node: usize, source: EvalError },
    #[error("state became non-finite at node {node}")]
    NonFinite { node: usize },
    #[error("{0}")]
    InvalidSystem(String),
    #[error("no explicit solution: {0}")]
    OutsideValidity(String),
    #[error(transparent)]
    Picard(#[from] PicardError),
}

fn eval_at(node: usize) -> impl Fn(TrajectoryError) -> IntegrateError {
    move |e| match e {
        TrajectoryError::Eval(source) => IntegrateError::Eval { node, source },
        other => IntegrateError::InvalidSystem(other.to_string()),
    }
}

/// Explicit Euler with the running max advanced after every accepted step.
pub fn euler_max(spec: &ProblemSpec, grid: &Grid) -> Result<Trajectory, IntegrateError> {
    let m = spec.dim();
    let h = grid.step();
    let mut traj = Trajectory::constant(*grid, spec.x0());
    let mut track = RunningMaxTrack::new();
    track.append(spec.x0(), spec.maxima()).map_err(eval_at(0))?;
    let mut slope = vec![0.0; m];
    for k in 0..grid.n_steps() {
        let x: Vec<f64> = traj.state(k).to_vec();
        let r = track.current().expect("seeded");
        spec.eval_rhs(grid.node(k), &x, r, &mut slope)
            .map_err(|source| IntegrateError::Eval { node: k, source })?;
        let next = traj.state_mut(k + 1);
        for i in 0..m {
            next[i] = x[i] + h * slope[i];
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(IntegrateError::NonFinite { node: k + 1 });
        }
        let next = next.to_vec();
        track.append(&next, spec.maxima()).map_err(eval_at(k + 1))?;
    }
    Ok(traj)
}

/// Heun's method. The corrector stage sees `max(r_k, h_j(predictor))`;
/// only the corrected state enters the persistent track.
pub fn heun_max(spec: &ProblemSpec, grid: &Grid) -> Result<Trajectory, IntegrateError> {
    let m = spec.dim();
    let h = grid.step();
    let mut traj = Trajectory::constant(*grid, spec.x0());
    let mut track = RunningMaxTrack::new();
    track.append(spec.x0(), spec.maxima()).map_err(eval_at(0))?;
    let mut s1 = vec![0.0; m];
    let mut s2 = vec![0.0; m];
    let mut pred = vec![0.0; m];
    for k in 0..grid.n_steps() {
        let x: Vec<f64> = traj.state(k).to_vec();
        let r = track.current().expect("seeded");
        spec.eval_rhs(grid.node(k), &x, r, &mut s1)
            .map_err(|source| IntegrateError::Eval { node: k, source })?;
        for i in 0..m {
            pred[i] = x[i] + h * s1[i];
        }
        let r_pred = track.peek_with(&pred, spec.maxima()).map_err(eval_at(k + 1))?;
        spec.eval_rhs(grid.node(k + 1), &pred, &r_pred, &mut s2)
            .map_err(|source| IntegrateError::Eval { node: k + 1, source })?;
        let next = traj.state_mut(k + 1);
        for i in 0..m {
            next[i] = x[i] + 0.5 * h * (s1[i] + s2[i]);
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(IntegrateError::NonFinite { node: k + 1 });
        }
        let next = next.to_vec();
        track.append(&next, spec.maxima()).map_err(eval_at(k + 1))?;
    }
    Ok(traj)
}

/// `x' = a x - b max y`, `y' = c y - d max x` with constant nonnegative
/// coefficients and positive initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantCoeffSystem {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub x0: f64,
    pub y0: f64,
}

impl ConstantCoeffSystem {
    pub fn new(a: f64, b: f64, c: f64, d: f64, x0: f64, y0: f64) -> Result<ConstantCoeffSystem, IntegrateError> {
        if [a, b, c, d].iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(IntegrateError::InvalidSystem("coefficients a, b, c, d must be nonnegative".into()));
        }
        if !(x0 > 0.0 && y0 > 0.0) {
            return Err(IntegrateError::InvalidSystem("initial data must be positive".into()));
        }
        Ok(ConstantCoeffSystem { a, b, c, d, x0, y0 })
    }

    /// `A = a x0 - b y0`, the initial slope of `x`.
    pub fn slope_x(&self) -> f64 {
        self.a * self.x0 - self.b * self.y0
    }

    /// `B = c y0 - d x0`, the initial slope of `y`.
    pub fn slope_y(&self) -> f64 {
        self.c * self.y0 - self.d * self.x0
    }

    /// Explicit solution exists when both components start decreasing and
    /// both growth rates are positive: then the running maxima stay at the
    /// initial values and the system decouples.
    pub fn check_validity(&self) -> Result<(), IntegrateError> {
        let (sa, sb) = (self.slope_x(), self.slope_y());
        if sa < 0.0 && sb < 0.0 && self.a > 0.0 && self.c > 0.0 {
            return Ok(());
        }
        Err(IntegrateError::OutsideValidity(format!(
            "need A = a x0 - b y0 < 0, B = c y0 - d x0 < 0, a > 0, c > 0; got A = {sa}, B = {sb}, a = {}, c = {}. \
             Other sign patterns have no explicit representation; integrate numerically instead",
            self.a, self.c
        )))
    }

    /// `(x(t), y(t))` of the explicit solution; no validity check.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let x = self.x0 + self.slope_x() / self.a * (self.a * t).exp_m1();
        let y = self.y0 + self.slope_y() / self.c * (self.c * t).exp_m1();
        (x, y)
    }

    /// The same system as a problem definition on `[0, horizon]`.
    pub fn to_spec(&self, horizon: f64) -> Result<ProblemSpec, crate::problem::ProblemError> {
        let f = [
            format!("{} * x1 - {} * m2", self.a, self.b),
            format!("{} * x2 - {} * m1", self.c, self.d),
        ];
        ProblemSpec::from_strings(&f, &["x1".to_string(), "x2".to_string()], vec![self.x0, self.y0], horizon)
    }
}

/// Samples the explicit solution `x0 + (A/a)(e^{at} - 1)`, `y0 + (B/c)(e^{ct} - 1)`.
pub fn closed_form_constant_coeff(sys: &ConstantCoeffSystem, grid: &Grid) -> Result<Trajectory, IntegrateError> {
    sys.check_validity()?;
    let rows = grid.nodes().map(|t| {
        let (x, y) = sys.eval(t);
        vec![x, y]
    });
    Trajectory::from_rows(*grid, rows.collect()).map_err(|e| IntegrateError::InvalidSystem(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroCrossings {
    pub t_x: Option<f64>,
    pub t_y: Option<f64>,
}

/// Time at which `v0 + (slope/rate)(e^{rate t} - 1)` vanishes, i.e.
/// `(1/rate) log(ratio)`. No positive crossing when `ratio < 1`.
fn crossing_time(rate: f64, ratio: f64) -> Option<f64> {
    if ratio < 1.0 {
        None
    } else {
        Some(ratio.ln() / rate)
    }
}

/// `t_x = (1/a) log(b y0 / |A|)`, `t_y = (1/c) log(d x0 / |B|)`.
pub fn zero_crossings(sys: &ConstantCoeffSystem) -> Result<ZeroCrossings, IntegrateError> {
    sys.check_validity()?;
    Ok(ZeroCrossings {
        t_x: crossing_time(sys.a, sys.b * sys.y0 / sys.slope_x().abs()),
        t_y: crossing_time(sys.c, sys.d * sys.x0 / sys.slope_y().abs()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub sup_residual: f64,
    pub per_node: Vec<f64>,
    pub argmax: usize,
}

/// Nodewise defect `|x(t_k) - x0 - int_0^{t_k} f(s, x, max h(x)) ds|`
/// under the trapezoid rule.
pub fn residual(spec: &ProblemSpec, traj: &Trajectory) -> Result<ResidualReport, IntegrateError> {
    let image = picard_operator(spec, traj)?;
    let per_node: Vec<f64> = traj
        .states()
        .zip(image.states())
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
        .collect();
    let (argmax, sup_residual) = per_node
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |best, (k, v)| if v > best.1 { (k, v) } else { best });
    Ok(ResidualReport { sup_residual, per_node, argmax })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    fn logistic(x0: f64) -> ProblemSpec {
        ProblemSpec::from_strings(&["x1 - m1"], &["x1^2"], vec![x0], 1.0).unwrap()
    }

    fn example_system() -> ConstantCoeffSystem {
        ConstantCoeffSystem::new(1.0, 1.0, 1.0, 3.0, 1.0, 2.0).unwrap()
    }

    #[test]
    fn steppers_keep_constant_solutions() {
        let g = Grid::over(1.0, 100).unwrap();
        for c in [0.0, 1.0] {
            for traj in [euler_max(&logistic(c), &g).unwrap(), heun_max(&logistic(c), &g).unwrap()] {
                assert!(traj.states().all(|s| s[0] == c));
            }
        }
    }

    #[test]
    fn euler_first_step_sign() {
        let g = Grid::over(0.1, 10).unwrap();
        let tr = euler_max(&logistic(2.0), &g).unwrap();
        assert_abs_diff_eq!(tr.state(1)[0], 2.0 - 2.0 * 0.01, epsilon = 1e-15);
        assert!(tr.state(1)[0] < 2.0);
        let tr = euler_max(&logistic(0.5), &g).unwrap();
        assert!(tr.state(1)[0] > 0.5);
    }

    #[test]
    fn stepper_errors() {
        let g = Grid::over(2.0, 4).unwrap();
        let spec = ProblemSpec::from_strings(&["1 / (1 - t)"], &[], vec![0.0], 2.0).unwrap();
        assert_eq!(euler_max(&spec, &g), Err(IntegrateError::Eval { node: 2, source: EvalError::DivisionByZero }));
        let spec = ProblemSpec::from_strings(&["exp(x1)^40"], &[], vec![5.0], 2.0).unwrap();
        assert!(matches!(heun_max(&spec, &g), Err(IntegrateError::NonFinite { .. })));
    }

    #[test]
    fn closed_form_example() {
        let sys = example_system();
        assert_eq!(sys.slope_x(), -1.0);
        assert_eq!(sys.slope_y(), -1.0);
        let g = Grid::over(1.0, 100).unwrap();
        let tr = closed_form_constant_coeff(&sys, &g).unwrap();
        assert_eq!(tr.state(0), &[1.0, 2.0]);
        for (k, t) in g.nodes().enumerate() {
            assert_abs_diff_eq!(tr.state(k)[0], 2.0 - t.exp(), epsilon = 1e-14);
            assert_abs_diff_eq!(tr.state(k)[1], 3.0 - t.exp(), epsilon = 1e-14);
        }
        // both decrease, so the running maxima are the initial values
        let spec = sys.to_spec(1.0).unwrap();
        let track = RunningMaxTrack::for_trajectory(&tr, spec.maxima()).unwrap();
        assert!(track.series(0).iter().all(|&v| v == 1.0));
        assert!(track.series(1).iter().all(|&v| v == 2.0));
    }

    #[test]
    fn closed_form_rejects_other_sign_patterns() {
        let g = Grid::over(1.0, 10).unwrap();
        let up = ConstantCoeffSystem::new(2.0, 1.0, 1.0, 3.0, 1.0, 1.0).unwrap();
        let err = closed_form_constant_coeff(&up, &g).unwrap_err();
        assert!(matches!(err, IntegrateError::OutsideValidity(_)));
        let flat = ConstantCoeffSystem::new(0.0, 1.0, 1.0, 3.0, 1.0, 2.0).unwrap();
        assert!(zero_crossings(&flat).is_err());
        assert!(ConstantCoeffSystem::new(-1.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(ConstantCoeffSystem::new(1.0, 1.0, 1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn zero_crossing_example() {
        let z = zero_crossings(&example_system()).unwrap();
        assert_abs_diff_eq!(z.t_x.unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(z.t_y.unwrap(), 3f64.ln(), epsilon = 1e-15);
        assert_eq!(crossing_time(2.0, 1.0), Some(0.0));
        assert_eq!(crossing_time(2.0, 0.5), None);
        let sym = ConstantCoeffSystem::new(1.0, 2.0, 1.0, 2.0, 1.5, 1.5).unwrap();
        let z = zero_crossings(&sym).unwrap();
        assert_eq!(z.t_x, z.t_y);
    }

    #[test]
    fn residual_of_exact_constant_solution() {
        let g = Grid::over(1.0, 100).unwrap();
        let tr = Trajectory::constant(g, &[1.0]);
        let rep = residual(&logistic(1.0), &tr).unwrap();
        assert!(rep.sup_residual <= 1e-14);
        assert_eq!(rep.per_node.len(), 101);
    }

    #[test]
    fn residual_detects_corruption() {
        let sys = example_system();
        let g = Grid::over(0.6, 600).unwrap();
        let mut tr = closed_form_constant_coeff(&sys, &g).unwrap();
        let spec = sys.to_spec(0.6).unwrap();
        assert!(residual(&spec, &tr).unwrap().sup_residual < 1e-6);
        tr.state_mut(300)[0] += 0.1;
        let rep = residual(&spec, &tr).unwrap();
        assert!(rep.sup_residual >= 0.05);
        assert!(rep.argmax >= 300);
    }
}
