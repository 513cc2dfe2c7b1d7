//! Lattice sampling estimates of sup-norms and Lipschitz constants.
//!
//! Both estimators evaluate on a deterministic uniform lattice that includes
//! the box corners. They are lower estimates of the true suprema, not
//! certified bounds: callers that need rigor supply the constants directly.

use thiserror::Error;

use super::{EvalError, Expr};

/// Default lattice resolution per sampled dimension.
pub const DEFAULT_LATTICE: usize = 33;
/// Upper limit on expression evaluations for one estimate.
pub const MAX_EVALUATIONS: usize = 1_000_000;

/// Relative finite-difference step, scaled by the coordinate's box width.
const FD_REL_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Interval, SampleError> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(SampleError::EmptyInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(v: f64) -> Interval {
        Interval { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn node(&self, i: usize, n: usize) -> f64 {
        if n <= 1 {
            return self.lo;
        }
        if i + 1 == n {
            return self.hi;
        }
        self.lo + self.width() * (i as f64 / (n - 1) as f64)
    }
}

/// Product box over time, state components and running-max values.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub time: Interval,
    pub state: Vec<Interval>,
    pub maxima: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("empty interval [{lo}, {hi}]")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("at least 2 samples per dimension are required, got {0}")]
    TooFewSamples(usize),
    #[error("expression references {what}{index} but the box has {len}")]
    OutsideBox { what: &'static str, index: usize, len: usize },
    #[error("evaluation failed at sample point: {0}")]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Coord {
    Time,
    State(usize),
    Max(usize),
}

impl SampleBox {
    fn interval(&self, c: Coord) -> Interval {
        match c {
            Coord::Time => self.time,
            Coord::State(i) => self.state[i - 1],
            Coord::Max(j) => self.maxima[j - 1],
        }
    }

    /// Coordinates referenced by any of the expressions, checked against the box.
    fn coords(&self, exprs: &[Expr]) -> Result<Vec<Coord>, SampleError> {
        let mut coords = Vec::new();
        if exprs.iter().any(Expr::uses_time) {
            coords.push(Coord::Time);
        }
        let mut states: Vec<usize> = exprs.iter().flat_map(Expr::state_indices).collect();
        states.sort_unstable();
        states.dedup();
        let mut maxima: Vec<usize> = exprs.iter().flat_map(Expr::max_indices).collect();
        maxima.sort_unstable();
        maxima.dedup();
        for i in states {
            if i > self.state.len() {
                return Err(SampleError::OutsideBox { what: "x", index: i, len: self.state.len() });
            }
            coords.push(Coord::State(i));
        }
        for j in maxima {
            if j > self.maxima.len() {
                return Err(SampleError::OutsideBox { what: "m", index: j, len: self.maxima.len() });
            }
            coords.push(Coord::Max(j));
        }
        Ok(coords)
    }

    fn base_point(&self) -> (f64, Vec<f64>, Vec<f64>) {
        (
            self.time.mid(),
            self.state.iter().map(Interval::mid).collect(),
            self.maxima.iter().map(Interval::mid).collect(),
        )
    }
}

struct Point {
    t: f64,
    x: Vec<f64>,
    m: Vec<f64>,
}

impl Point {
    fn get(&self, c: Coord) -> f64 {
        match c {
            Coord::Time => self.t,
            Coord::State(i) => self.x[i - 1],
            Coord::Max(j) => self.m[j - 1],
        }
    }

    fn set(&mut self, c: Coord, v: f64) {
        match c {
            Coord::Time => self.t = v,
            Coord::State(i) => self.x[i - 1] = v,
            Coord::Max(j) => self.m[j - 1] = v,
        }
    }
}

/// Largest per-dimension count not above `requested` keeping the lattice
/// within the evaluation budget; never below 2.
fn lattice_size(requested: usize, dims: usize, evals_per_point: usize) -> usize {
    let budget = MAX_EVALUATIONS / evals_per_point.max(1);
    let mut n = requested;
    while n > 2 && (n as f64).powi(dims as i32) > budget as f64 {
        n -= 1;
    }
    n
}

/// Calls `visit` on every lattice point; stops at the first error.
fn for_each_point(
    sbox: &SampleBox,
    coords: &[Coord],
    n: usize,
    mut visit: impl FnMut(&mut Point) -> Result<(), SampleError>,
) -> Result<(), SampleError> {
    let (t, x, m) = sbox.base_point();
    let mut p = Point { t, x, m };
    let mut counter = vec![0usize; coords.len()];
    loop {
        for (c, &i) in coords.iter().zip(&counter) {
            p.set(*c, sbox.interval(*c).node(i, n));
        }
        visit(&mut p)?;
        // mixed-radix increment
        let mut d = 0;
        loop {
            if d == counter.len() {
                return Ok(());
            }
            counter[d] += 1;
            if counter[d] < n {
                break;
            }
            counter[d] = 0;
            d += 1;
        }
    }
}

fn eval_norm(exprs: &[Expr], p: &Point) -> Result<f64, SampleError> {
    let mut sum = 0.0;
    for e in exprs {
        let v = e.eval(p.t, &p.x, &p.m)?;
        sum += v * v;
    }
    Ok(sum.sqrt())
}

/// Maximum over the lattice of the Euclidean norm of the vector of
/// expression values. A lower estimate of the supremum over the box.
pub fn estimate_bound(exprs: &[Expr], sbox: &SampleBox, n_samples: usize) -> Result<f64, SampleError> {
    if n_samples < 2 {
        return Err(SampleError::TooFewSamples(n_samples));
    }
    let coords = sbox.coords(exprs)?;
    let n = lattice_size(n_samples, coords.len(), exprs.len());
    let mut best = 0.0_f64;
    for_each_point(sbox, &coords, n, |p| {
        best = best.max(eval_norm(exprs, p)?);
        Ok(())
    })?;
    Ok(best)
}

/// Maximum over the lattice of the Frobenius norm of the central-difference
/// Jacobian with respect to the state and max-value coordinates (time is
/// sampled but not differentiated). Estimated, not certified.
pub fn estimate_lipschitz(exprs: &[Expr], sbox: &SampleBox, n_samples: usize) -> Result<f64, SampleError> {
    if n_samples < 2 {
        return Err(SampleError::TooFewSamples(n_samples));
    }
    let coords = sbox.coords(exprs)?;
    let diff: Vec<Coord> = coords.iter().copied().filter(|c| *c != Coord::Time).collect();
    if diff.is_empty() {
        return Ok(0.0);
    }
    let steps: Vec<f64> = diff
        .iter()
        .map(|c| {
            let w = sbox.interval(*c).width();
            if w > 0.0 { FD_REL_STEP * w } else { FD_REL_STEP }
        })
        .collect();
    let n = lattice_size(n_samples, coords.len(), 2 * diff.len() * exprs.len());
    let mut best = 0.0_f64;
    for_each_point(sbox, &coords, n, |p| {
        let mut sum = 0.0;
        for (c, &step) in diff.iter().zip(&steps) {
            let centre = p.get(*c);
            for e in exprs {
                p.set(*c, centre + step);
                let up = e.eval(p.t, &p.x, &p.m)?;
                p.set(*c, centre - step);
                let down = e.eval(p.t, &p.x, &p.m)?;
                let g = (up - down) / (2.0 * step);
                sum += g * g;
            }
            p.set(*c, centre);
        }
        best = best.max(sum.sqrt());
        Ok(())
    })?;
    Ok(best)
}
