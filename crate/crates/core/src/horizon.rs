//! Guaranteed local-existence horizons.
//!
//! * [`existence_horizon`]: for a componentwise system, the Picard map is a
//!   self-map and a contraction on the radius-`alpha` ball of `C([0, T]; R^m)`
//!   whenever `T < min{ alpha / M, 1 / (L_f (1 + L_g sqrt(m))), T_ref }`.
//! * [`logistic_horizon`], [`logistic_horizon_opt`]: the horizon of the
//!   logistic scheme `x' = x - max x^2` and its optimum over `alpha`.
//! * [`quadratic_feasible`], [`quadratic_search`]: the four inequalities that
//!   keep the coupled quadratic scheme uniformly bounded by `c0` on `[0, T]`.
//!
//! `L_f` is the two-slot Lipschitz constant
//! `|f(t,u1,v1) - f(t,u2,v2)| <= L_f (|u1 - u2| + |v1 - v2|)`.

use serde::Serialize;
use thiserror::Error;

use crate::expr::{estimate_bound, estimate_lipschitz, Interval, SampleBox, SampleError, DEFAULT_LATTICE};
use crate::problem::ProblemSpec;

/// Fraction of the supremum used as the recommended horizon.
pub const SAFETY_FACTOR: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HorizonError {
    #[error("the sup bound M must be positive, got {0}")]
    NonPositiveBound(f64),
    #[error("alpha must exceed 1, got {0}")]
    AlphaTooSmall(f64),
    #[error("invalid contraction data: {0}")]
    Invalid(String),
    #[error("the horizon estimate needs one functional per component, each depending on its own component only")]
    NotComponentwise,
    #[error("constant estimation failed: {0}")]
    Sample(#[from] SampleError),
}

/// Inputs of the contraction horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionData {
    pub alpha: f64,
    /// Reference horizon over which `M` and `L_f` hold.
    pub t_ref: f64,
    /// Sup of `|f|` over the ball.
    pub m_bound: f64,
    pub l_f: f64,
    /// Common Lipschitz constant of the functionals.
    pub l_g: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `alpha / M` is the binding term.
    Radius,
    /// `1 / (L_f (1 + L_g sqrt(m)))` is the binding term.
    Lipschitz,
    /// The reference horizon is the binding term.
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HorizonResult {
    pub t_sup: f64,
    pub t_rec: f64,
    pub contraction_factor: f64,
    pub branch: Branch,
}

impl ContractionData {
    fn validate(&self) -> Result<(), HorizonError> {
        let bad = |what: &str| Err(HorizonError::Invalid(what.to_string()));
        if !(self.alpha > 0.0) {
            return bad("alpha must be positive");
        }
        if !(self.t_ref > 0.0) || !self.t_ref.is_finite() {
            return bad("reference horizon must be positive and finite");
        }
        if !(self.l_f >= 0.0) || !(self.l_g >= 0.0) {
            return bad("Lipschitz constants must be nonnegative");
        }
        if self.dim == 0 {
            return bad("dimension must be at least 1");
        }
        if !(self.m_bound > 0.0) {
            return Err(HorizonError::NonPositiveBound(self.m_bound));
        }
        Ok(())
    }

    /// `L_f (1 + L_g sqrt(m))`; the contraction factor per unit time.
    pub fn lipschitz_rate(&self) -> f64 {
        self.l_f * (1.0 + self.l_g * (self.dim as f64).sqrt())
    }

    /// Estimates `M`, `L_f` and `L_g` by lattice sampling over the box
    /// `[x0 - alpha, x0 + alpha]^m` and the images of the functionals on it.
    /// The constants are estimated, not certified.
    pub fn estimate(spec: &ProblemSpec, alpha: f64, t_ref: f64, n_samples: usize) -> Result<ContractionData, HorizonError> {
        if !spec.is_componentwise() {
            return Err(HorizonError::NotComponentwise);
        }
        if !(alpha > 0.0) {
            return Err(HorizonError::Invalid("alpha must be positive".into()));
        }
        let state: Vec<Interval> = spec
            .x0()
            .iter()
            .map(|&c| Interval::new(c - alpha, c + alpha))
            .collect::<Result<_, _>>()?;
        let time = Interval::new(0.0, t_ref)?;

        let mut maxima = Vec::with_capacity(spec.n_maxima());
        let mut l_g = 0.0_f64;
        for h in spec.maxima() {
            // the functional's image is sampled on a fine 1-D lattice
            let probe = SampleBox { time, state: state.clone(), maxima: Vec::new() };
            let (lo, hi) = image_range(h, &probe, 1025)?;
            maxima.push(Interval::new(lo, hi)?);
            l_g = l_g.max(estimate_lipschitz(std::slice::from_ref(h), &probe, n_samples)?);
        }
        let sbox = SampleBox { time, state, maxima };
        let m_bound = estimate_bound(spec.rhs(), &sbox, n_samples)?;
        let l_f = estimate_lipschitz(spec.rhs(), &sbox, n_samples)?;
        Ok(ContractionData { alpha, t_ref, m_bound, l_f, l_g, dim: spec.dim() })
    }
}

fn image_range(h: &crate::expr::Expr, sbox: &SampleBox, n: usize) -> Result<(f64, f64), HorizonError> {
    let idx = h.state_indices();
    let mut x: Vec<f64> = sbox.state.iter().map(Interval::mid).collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    match idx.as_slice() {
        [] => {
            let v = h.eval(0.0, &x, &[]).map_err(SampleError::from)?;
            return Ok((v, v));
        }
        [i] => {
            let iv = sbox.state[i - 1];
            for s in 0..n {
                x[i - 1] = if s + 1 == n { iv.hi } else { iv.lo + iv.width() * s as f64 / (n - 1) as f64 };
                let v = h.eval(0.0, &x, &[]).map_err(SampleError::from)?;
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        _ => return Err(HorizonError::NotComponentwise),
    }
    Ok((lo, hi))
}

/// Supremum of admissible horizons, the recommended horizon at
/// [`SAFETY_FACTOR`] of it, and the contraction factor there.
pub fn existence_horizon(data: &ContractionData) -> Result<HorizonResult, HorizonError> {
    data.validate()?;
    let radius = data.alpha / data.m_bound;
    let rate = data.lipschitz_rate();
    let lipschitz = if rate > 0.0 { 1.0 / rate } else { f64::INFINITY };
    let mut t_sup = radius;
    let mut branch = Branch::Radius;
    if lipschitz < t_sup {
        t_sup = lipschitz;
        branch = Branch::Lipschitz;
    }
    if data.t_ref < t_sup {
        t_sup = data.t_ref;
        branch = Branch::Reference;
    }
    let t_rec = SAFETY_FACTOR * t_sup;
    Ok(HorizonResult { t_sup, t_rec, contraction_factor: t_rec * rate, branch })
}

/// Strict upper bound `(alpha - 1) / (alpha (1 + alpha |x0|))` for the
/// logistic scheme's horizon.
pub fn logistic_horizon(x0: f64, alpha: f64) -> Result<f64, HorizonError> {
    if !(alpha > 1.0) {
        return Err(HorizonError::AlphaTooSmall(alpha));
    }
    Ok((alpha - 1.0) / (alpha * (1.0 + alpha * x0.abs())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogisticOptimum {
    /// Maximizing radius; `None` when the supremum is only approached as alpha grows.
    pub alpha_star: Option<f64>,
    pub t_star: f64,
}

/// Maximizes [`logistic_horizon`] over `alpha > 1`.
///
/// With `c = |x0| > 0` the stationary point solves `c a^2 - 2 c a - 1 = 0`,
/// i.e. `a = 1 + sqrt(1 + 1/c)`. For `x0 = 0` the bound `(a - 1)/a`
/// increases to 1 without a maximizer.
pub fn logistic_horizon_opt(x0: f64) -> LogisticOptimum {
    let c = x0.abs();
    if c == 0.0 {
        return LogisticOptimum { alpha_star: None, t_star: 1.0 };
    }
    let alpha = 1.0 + (1.0 + 1.0 / c).sqrt();
    let t_star = (alpha - 1.0) / (alpha * (1.0 + alpha * c));
    LogisticOptimum { alpha_star: Some(alpha), t_star }
}

/// The four inequalities for the coupled quadratic scheme, as slacks
/// `c0 - lhs` (feasible iff every slack is nonnegative).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticFeasibility {
    pub x0: f64,
    pub y0: f64,
    pub t: f64,
    pub c0: f64,
    pub slacks: [f64; 4],
    pub feasible: bool,
}

impl QuadraticFeasibility {
    pub const LABELS: [&'static str; 4] = [
        "|x0| + |x0 - y0^2| T <= c0",
        "|y0| + |y0 - x0^2| T <= c0",
        "|x0| + c0 T + c0^2 T <= c0",
        "|y0| + c0 T + c0^2 T <= c0",
    ];

    /// Index and label of the first failing inequality.
    pub fn first_violation(&self) -> Option<(usize, &'static str)> {
        self.slacks.iter().position(|&s| s < 0.0).map(|i| (i, Self::LABELS[i]))
    }

    /// Left-hand side of inequality `i`.
    pub fn lhs(&self, i: usize) -> f64 {
        self.c0 - self.slacks[i]
    }
}

pub fn quadratic_feasible(x0: f64, y0: f64, t: f64, c0: f64) -> QuadraticFeasibility {
    let growth = c0 * t + c0 * c0 * t;
    let slacks = [
        c0 - (x0.abs() + (x0 - y0 * y0).abs() * t),
        c0 - (y0.abs() + (y0 - x0 * x0).abs() * t),
        c0 - (x0.abs() + growth),
        c0 - (y0.abs() + growth),
    ];
    let feasible = slacks.iter().all(|&s| s >= 0.0);
    QuadraticFeasibility { x0, y0, t, c0, slacks, feasible }
}

/// Upper end of the `c0` scan.
pub const C0_SCAN_MAX: f64 = 1e3;
const C0_SCAN_POINTS: usize = 4001;
const C0_SCAN_FLOOR: f64 = 1e-6;

/// Smallest feasible `c0` on a logarithmic grid over
/// `[max(|x0|, |y0|), 1e3]`, if any.
pub fn quadratic_search(x0: f64, y0: f64, t: f64) -> Option<f64> {
    let lo = x0.abs().max(y0.abs()).max(C0_SCAN_FLOOR);
    if lo > C0_SCAN_MAX {
        return None;
    }
    let (a, b) = (lo.ln(), C0_SCAN_MAX.ln());
    (0..C0_SCAN_POINTS)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == C0_SCAN_POINTS {
                C0_SCAN_MAX
            } else {
                (a + (b - a) * i as f64 / (C0_SCAN_POINTS - 1) as f64).exp()
            }
        })
        .find(|&c0| quadratic_feasible(x0, y0, t, c0).feasible)
}

/// Convenience: estimate constants over the radius-`alpha` box and compute
/// the horizon with the problem's own `T` as reference.
pub fn horizon_for(spec: &ProblemSpec, alpha: f64) -> Result<(ContractionData, HorizonResult), HorizonError> {
    let data = ContractionData::estimate(spec, alpha, spec.horizon(), DEFAULT_LATTICE)?;
    let res = existence_horizon(&data)?;
    Ok((data, res))
}
