//! Uniform grids, sampled trajectories and running maxima along them.
//!
//! The running maximum is taken over grid nodes only: `r_j[k]` is the max of
//! `h_j(x(t_i))` for `i <= k`. Between nodes the state is interpolated
//! linearly, but the max is never re-evaluated on the interpolant.

use std::io::Write;

use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("grid mismatch: {0}")]
    Mismatch(String),
    #[error("time {t} outside [0, {end}]")]
    OutOfRange { t: f64, end: f64 },
    #[error("state has length {found}, expected {expected}")]
    Shape { expected: usize, found: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Uniform grid `t_k = k h`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_steps: usize,
    h: f64,
}

impl Grid {
    pub fn new(n_steps: usize, h: f64) -> Result<Grid, TrajectoryError> {
        if n_steps == 0 {
            return Err(TrajectoryError::Grid("at least one step is required".into()));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(TrajectoryError::Grid(format!("step must be positive and finite, got {h}")));
        }
        Ok(Grid { n_steps, h })
    }

    /// Grid on `[0, t_end]` with `n_steps` equal steps.
    pub fn over(t_end: f64, n_steps: usize) -> Result<Grid, TrajectoryError> {
        if n_steps == 0 {
            return Err(TrajectoryError::Grid("at least one step is required".into()));
        }
        Grid::new(n_steps, t_end / n_steps as f64)
    }

    /// Grid on `[0, t_end]` whose step is as close to `h` as possible without exceeding it.
    pub fn with_step(t_end: f64, h: f64) -> Result<Grid, TrajectoryError> {
        if !(h > 0.0) {
            return Err(TrajectoryError::Grid(format!("step must be positive, got {h}")));
        }
        let n = (t_end / h - 1e-9).ceil().max(1.0) as usize;
        Grid::over(t_end, n)
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    pub fn end(&self) -> f64 {
        self.node(self.n_steps)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(move |k| self.node(k))
    }
}

/// Per-node state vectors on a uniform grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: Grid,
    dim: usize,
    values: Vec<f64>,
}

impl Trajectory {
    pub fn from_rows(grid: Grid, rows: Vec<Vec<f64>>) -> Result<Trajectory, TrajectoryError> {
        if rows.len() != grid.n_nodes() {
            return Err(TrajectoryError::Mismatch(format!("{} rows for {} nodes", rows.len(), grid.n_nodes())));
        }
        let dim = rows[0].len();
        let mut values = Vec::with_capacity(dim * rows.len());
        for r in &rows {
            if r.len() != dim {
                return Err(TrajectoryError::Shape { expected: dim, found: r.len() });
            }
            values.extend_from_slice(r);
        }
        Ok(Trajectory { grid, dim, values })
    }

    /// Builds a trajectory from per-component sample arrays.
    pub fn from_components(grid: Grid, comps: &[Vec<f64>]) -> Result<Trajectory, TrajectoryError> {
        let dim = comps.len();
        if dim == 0 {
            return Err(TrajectoryError::Shape { expected: 1, found: 0 });
        }
        for c in comps {
            if c.len() != grid.n_nodes() {
                return Err(TrajectoryError::Mismatch(format!("{} samples for {} nodes", c.len(), grid.n_nodes())));
            }
        }
        let values = (0..grid.n_nodes()).flat_map(|k| comps.iter().map(move |c| c[k])).collect();
        Ok(Trajectory { grid, dim, values })
    }

    /// The constant trajectory `x(t) = x0`.
    pub fn constant(grid: Grid, x0: &[f64]) -> Trajectory {
        let values = x0.iter().copied().cycle().take(x0.len() * grid.n_nodes()).collect();
        Trajectory { grid, dim: x0.len(), values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.n_nodes()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn state_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// Samples of component `i` (0-based).
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.states().map(|s| s[i]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// First node holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite()).map(|p| p / self.dim)
    }

    /// Piecewise-linear interpolation; exact at nodes.
    pub fn interpolate(&self, t: f64) -> Result<Vec<f64>, TrajectoryError> {
        let end = self.grid.end();
        if !(t >= 0.0 && t <= end) {
            return Err(TrajectoryError::OutOfRange { t, end });
        }
        let s = t / self.grid.step();
        let k = (s.floor() as usize).min(self.grid.n_steps());
        let frac = s - k as f64;
        if k == self.grid.n_steps() || frac == 0.0 {
            return Ok(self.state(k).to_vec());
        }
        let (a, b) = (self.state(k), self.state(k + 1));
        Ok(a.iter().zip(b).map(|(a, b)| a + frac * (b - a)).collect())
    }
}

/// `out[k] = max(samples[0..=k])`.
pub fn prefix_max(samples: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut running = f64::NEG_INFINITY;
    for &s in samples {
        running = running.max(s);
        out.push(running);
    }
    out
}

/// Cumulative trapezoidal integral with `out[0] = 0`.
pub fn cumint(samples: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = 0.0;
    if let Some(&first) = samples.first() {
        out.push(0.0);
        let mut prev = first;
        for &s in &samples[1..] {
            acc += 0.5 * h * (prev + s);
            out.push(acc);
            prev = s;
        }
    }
    out
}

/// Max over nodes of the Euclidean distance between two trajectories.
pub fn sup_dist(a: &Trajectory, b: &Trajectory) -> Result<f64, TrajectoryError> {
    if a.grid != b.grid {
        return Err(TrajectoryError::Mismatch(format!(
            "{} steps of {} vs {} steps of {}",
            a.grid.n_steps, a.grid.h, b.grid.n_steps, b.grid.h
        )));
    }
    if a.dim != b.dim {
        return Err(TrajectoryError::Shape { expected: a.dim, found: b.dim });
    }
    Ok(a.states()
        .zip(b.states())
        .map(|(u, v)| u.iter().zip(v).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
        .fold(0.0, f64::max))
}

/// Incrementally maintained running maxima `r_j[k]` of the functionals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunningMaxTrack {
    rows: Vec<Vec<f64>>,
}

impl RunningMaxTrack {
    pub fn new() -> RunningMaxTrack {
        RunningMaxTrack::default()
    }

    /// Appends one state, updating every `r_j` in O(k).
    pub fn append(&mut self, state: &[f64], maxima: &[Expr]) -> Result<&[f64], TrajectoryError> {
        let mut row = Vec::with_capacity(maxima.len());
        for (j, h) in maxima.iter().enumerate() {
            let v = h.eval(0.0, state, &[])?;
            row.push(match self.rows.last() {
                Some(prev) => prev[j].max(v),
                None => v,
            });
        }
        self.rows.push(row);
        Ok(self.rows.last().expect("just pushed"))
    }

    /// `max(current, h_j(state))` without recording the state.
    pub fn peek_with(&self, state: &[f64], maxima: &[Expr]) -> Result<Vec<f64>, TrajectoryError> {
        maxima
            .iter()
            .enumerate()
            .map(|(j, h)| {
                let v = h.eval(0.0, state, &[])?;
                Ok(match self.rows.last() {
                    Some(prev) => prev[j].max(v),
                    None => v,
                })
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn current(&self) -> Option<&[f64]> {
        self.rows.last().map(Vec::as_slice)
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }

    /// History of functional `j` (0-based).
    pub fn series(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Track for a whole trajectory.
    pub fn for_trajectory(traj: &Trajectory, maxima: &[Expr]) -> Result<RunningMaxTrack, TrajectoryError> {
        let mut track = RunningMaxTrack::new();
        for s in traj.states() {
            track.append(s, maxima)?;
        }
        Ok(track)
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `t,x1..xm,m1..mk` rows at 17 significant digits.
pub fn write_csv<W: Write>(mut w: W, spec: &ProblemSpec, traj: &Trajectory) -> Result<(), CsvError> {
    let track = RunningMaxTrack::for_trajectory(traj, spec.maxima())?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=traj.dim()).map(|i| format!("x{i}")));
    header.extend((1..=spec.n_maxima()).map(|j| format!("m{j}")));
    writeln!(w, "{}", header.join(","))?;
    for (k, s) in traj.states().enumerate() {
        let mut row = vec![fmt17(traj.grid().node(k))];
        row.extend(s.iter().map(|&v| fmt17(v)));
        row.extend(track.row(k).iter().map(|&v| fmt17(v)));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::expr::parse;

    #[test]
    fn prefix_max_examples() {
        assert_eq!(prefix_max(&[1.0, 3.0, 2.0, 5.0]), vec![1.0, 3.0, 3.0, 5.0]);
        assert_eq!(prefix_max(&[2.5; 4]), vec![2.5; 4]);
        assert_eq!(prefix_max(&[4.0, 3.0, 2.0, -1.0]), vec![4.0; 4]);
    }

    #[test]
    fn cumint_examples() {
        assert_eq!(cumint(&[1.0, 1.0, 1.0], 0.5), vec![0.0, 0.5, 1.0]);
        assert_eq!(cumint(&[0.0, 1.0, 2.0], 1.0), vec![0.0, 0.5, 2.0]);
        assert_eq!(cumint(&[0.0; 5], 0.1), vec![0.0; 5]);
        assert!(cumint(&[], 0.1).is_empty());
    }

    #[test]
    fn sup_dist_examples() {
        let g = Grid::new(2, 1.0).unwrap();
        let a = Trajectory::from_components(g, &[vec![0.0, 1.0, 0.0]]).unwrap();
        let b = Trajectory::from_components(g, &[vec![0.0, 0.0, 2.0]]).unwrap();
        assert_eq!(sup_dist(&a, &a).unwrap(), 0.0);
        assert_eq!(sup_dist(&a, &b).unwrap(), 2.0);
        assert_eq!(sup_dist(&b, &a).unwrap(), 2.0);
        let z = Trajectory::constant(g, &[0.0]);
        let three = Trajectory::constant(g, &[3.0]);
        assert_eq!(sup_dist(&z, &three).unwrap(), 3.0);
        let other = Trajectory::constant(Grid::new(3, 1.0).unwrap(), &[0.0]);
        assert!(matches!(sup_dist(&z, &other), Err(TrajectoryError::Mismatch(_))));
        let wide = Trajectory::constant(g, &[0.0, 0.0]);
        assert!(matches!(sup_dist(&z, &wide), Err(TrajectoryError::Shape { .. })));
    }

    #[test]
    fn interpolate_examples() {
        let g = Grid::new(2, 0.5).unwrap();
        let tr = Trajectory::from_components(g, &[vec![1.0, 0.0, 2.0]]).unwrap();
        assert_eq!(tr.interpolate(0.0).unwrap(), vec![1.0]);
        assert_eq!(tr.interpolate(0.5).unwrap(), vec![0.0]);
        assert_eq!(tr.interpolate(0.75).unwrap(), vec![1.0]);
        assert_eq!(tr.interpolate(1.0).unwrap(), vec![2.0]);
        assert!(matches!(tr.interpolate(1.1), Err(TrajectoryError::OutOfRange { .. })));
        assert!(tr.interpolate(-0.1).is_err());
    }

    #[test]
    fn track_examples() {
        let sq = vec![parse("x1^2").unwrap()];
        let mut track = RunningMaxTrack::new();
        assert_eq!(track.append(&[2.0], &sq).unwrap(), &[4.0]);
        assert_eq!(track.peek_with(&[3.0], &sq).unwrap(), vec![9.0]);
        assert_eq!(track.len(), 1);
        track.append(&[1.0], &sq).unwrap();
        assert_eq!(track.series(0), vec![4.0, 4.0]);

        let mut track = RunningMaxTrack::new();
        track.append(&[2.0], &sq).unwrap();
        track.append(&[3.0], &sq).unwrap();
        assert_eq!(track.series(0), vec![4.0, 9.0]);
    }

    #[test]
    fn grid_construction() {
        let g = Grid::over(0.2, 200).unwrap();
        assert_eq!(g.n_nodes(), 201);
        assert!((g.end() - 0.2).abs() < 1e-15);
        assert_eq!(Grid::with_step(1.0, 1e-3).unwrap().n_steps(), 1000);
        assert_eq!(Grid::with_step(0.25, 0.1).unwrap().n_steps(), 3);
        assert!(Grid::new(0, 0.1).is_err());
        assert!(Grid::new(3, 0.0).is_err());
        assert!(Grid::new(3, f64::NAN).is_err());
    }

    #[test]
    fn csv_layout() {
        let spec = ProblemSpec::from_strings(&["x1 - m1"], &["x1^2"], vec![0.5], 1.0).unwrap();
        let g = Grid::new(2, 0.5).unwrap();
        let tr = Trajectory::from_components(g, &[vec![0.5, 0.75, 0.6]]).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &spec, &tr).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,m1");
        assert_eq!(lines[1], "0.0000000000000000e0,5.0000000000000000e-1,2.5000000000000000e-1");
        assert_eq!(lines[3], "1.0000000000000000e0,5.9999999999999998e-1,5.6250000000000000e-1");
        for line in &lines[1..] {
            for field in line.split(',') {
                let v: f64 = field.parse().unwrap();
                assert_eq!(format!("{v:.16e}"), field);
            }
        }
    }

    fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..40).prop_flat_map(|n| {
            (prop::collection::vec(-1e3f64..1e3, n), prop::collection::vec(-1e3f64..1e3, n))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn max_difference_inequality((g, h) in pairs()) {
            let (pg, ph) = (prefix_max(&g), prefix_max(&h));
            let mut worst = 0.0_f64;
            for k in 0..g.len() {
                worst = worst.max((g[k] - h[k]).abs());
                prop_assert!((pg[k] - ph[k]).abs() <= worst);
            }
        }

        #[test]
        fn prefix_max_idempotent_and_monotone((g, h) in pairs()) {
            let pg = prefix_max(&g);
            prop_assert_eq!(&prefix_max(&pg), &pg);
            prop_assert!(pg.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(pg[0], g[0]);
            let upper: Vec<f64> = g.iter().zip(&h).map(|(a, b)| a.max(*b)).collect();
            let pu = prefix_max(&upper);
            prop_assert!(pg.iter().zip(&pu).all(|(a, b)| a <= b));
        }

        #[test]
        fn track_matches_batch_prefix_max(xs in prop::collection::vec(-5.0f64..5.0, 1..60)) {
            let maxima = vec![parse("x1^2 - x1").unwrap(), parse("sin(x1)").unwrap()];
            let mut track = RunningMaxTrack::new();
            for &x in &xs {
                track.append(&[x], &maxima).unwrap();
            }
            for (j, h) in maxima.iter().enumerate() {
                let batch: Vec<f64> = xs.iter().map(|&x| h.eval(0.0, &[x], &[]).unwrap()).collect();
                prop_assert_eq!(track.series(j), prefix_max(&batch));
            }
        }

        #[test]
        fn cumint_of_nonnegative_is_nondecreasing(s in prop::collection::vec(0.0f64..10.0, 1..60), h in 1e-3f64..1.0) {
            let c = cumint(&s, h);
            prop_assert_eq!(c[0], 0.0);
            prop_assert!(c.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
