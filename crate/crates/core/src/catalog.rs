//! Bundled demo problems and recognition of the special systems that have
//! their own existence results.

use serde::Serialize;

use crate::horizon::{
    horizon_for, logistic_horizon_opt, quadratic_feasible, quadratic_search, HorizonError,
    QuadraticFeasibility,
};
use crate::problem::ProblemSpec;

/// A bundled problem file.
#[derive(Debug, Clone, Copy)]
pub struct Demo {
    pub name: &'static str,
    pub source: &'static str,
    /// Whether any existence result covers the demo.
    pub guaranteed: bool,
}

pub const DEMOS: [Demo; 6] = [
    Demo { name: "logistic", source: include_str!("../problems/logistic.json"), guaranteed: true },
    Demo { name: "coupled_linear", source: include_str!("../problems/coupled_linear.json"), guaranteed: true },
    Demo { name: "coupled_quadratic", source: include_str!("../problems/coupled_quadratic.json"), guaranteed: true },
    Demo { name: "constant_coeff", source: include_str!("../problems/constant_coeff.json"), guaranteed: true },
    Demo { name: "time_varying", source: include_str!("../problems/time_varying.json"), guaranteed: true },
    Demo { name: "lotka_volterra", source: include_str!("../problems/lotka_volterra.json"), guaranteed: false },
];

impl Demo {
    pub fn spec(&self) -> ProblemSpec {
        ProblemSpec::from_json_str(self.source).expect("bundled problem files are valid")
    }

    pub fn by_name(name: &str) -> Option<Demo> {
        DEMOS.into_iter().find(|d| d.name == name)
    }
}

/// Structural class of a problem, decided on canonical expression forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `x' = x - max x^2`
    Logistic { x0: f64 },
    /// `x' = x - max y`, `y' = y - max x`
    CoupledLinear { x0: f64, y0: f64 },
    /// `x' = x - max y^2`, `y' = y - max x^2`
    CoupledQuadratic { x0: f64, y0: f64 },
    General,
}

impl Family {
    pub fn of(spec: &ProblemSpec) -> Family {
        let f: Vec<String> = spec.rhs().iter().map(ToString::to_string).collect();
        let h: Vec<String> = spec.maxima().iter().map(ToString::to_string).collect();
        let x = spec.x0();
        let (f, h): (Vec<&str>, Vec<&str>) = (f.iter().map(String::as_str).collect(), h.iter().map(String::as_str).collect());
        match (f.as_slice(), h.as_slice()) {
            (["(x1 - m1)"], ["(x1 ^ 2)"]) => Family::Logistic { x0: x[0] },
            (["(x1 - m2)", "(x2 - m1)"], ["x1", "x2"]) => Family::CoupledLinear { x0: x[0], y0: x[1] },
            (["(x1 - m2)", "(x2 - m1)"], ["(x1 ^ 2)", "(x2 ^ 2)"]) => Family::CoupledQuadratic { x0: x[0], y0: x[1] },
            _ => Family::General,
        }
    }
}

/// Verdict of the existence check for a requested end time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Guarantee {
    pub ok: bool,
    /// Largest end time covered, when one is known (`None` means unbounded).
    pub limit: Option<f64>,
    pub reason: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<QuadraticFeasibility>,
}

/// Options for the general contraction horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuaranteeOptions {
    pub alpha: f64,
    /// Bound constant for the coupled quadratic system; searched when absent.
    pub c0: Option<f64>,
}

impl Default for GuaranteeOptions {
    fn default() -> Self {
        GuaranteeOptions { alpha: 1.0, c0: None }
    }
}

/// Decides whether an existence result covers `[0, t_end]`.
pub fn guarantee(spec: &ProblemSpec, t_end: f64, opts: GuaranteeOptions) -> Result<Guarantee, HorizonError> {
    let verdict = |ok: bool, limit: Option<f64>, reason: String| Guarantee { ok, limit, reason, feasibility: None };
    Ok(match Family::of(spec) {
        Family::Logistic { x0 } => {
            if x0 == 0.0 || x0 == 1.0 {
                verdict(true, None, format!("x0 = {x0} gives a constant solution"))
            } else {
                let opt = logistic_horizon_opt(x0);
                let alpha = opt.alpha_star.map(|a| format!(" at alpha = {a}")).unwrap_or_default();
                verdict(
                    t_end < opt.t_star,
                    Some(opt.t_star),
                    format!("logistic scheme converges for T < {}{alpha}", opt.t_star),
                )
            }
        }
        Family::CoupledLinear { x0, y0 } => {
            let ok = x0 > 0.0 && y0 > 0.0 && x0 != y0;
            let reason = if ok {
                "monotone scheme converges on every [0, T] for positive, distinct initial data".to_string()
            } else {
                format!("monotone scheme needs positive, distinct initial data, got x0 = {x0}, y0 = {y0}")
            };
            verdict(ok, None, reason)
        }
        Family::CoupledQuadratic { x0, y0 } => {
            let c0 = opts.c0.or_else(|| quadratic_search(x0, y0, t_end));
            match c0 {
                None => verdict(false, None, format!("no feasible c0 found for T = {t_end}")),
                Some(c0) => {
                    let feas = quadratic_feasible(x0, y0, t_end, c0);
                    let reason = match feas.first_violation() {
                        None => format!("(T = {t_end}, c0 = {c0}) satisfies all four bound inequalities"),
                        Some((i, label)) => format!(
                            "(T = {t_end}, c0 = {c0}) fails inequality {}: {label} (lhs {} > {c0})",
                            i + 1,
                            feas.lhs(i)
                        ),
                    };
                    Guarantee { ok: feas.feasible, limit: None, reason, feasibility: Some(feas) }
                }
            }
        }
        Family::General => {
            if !spec.is_componentwise() {
                verdict(false, None, "no existence result covers non-componentwise functionals".to_string())
            } else {
                let (_, res) = horizon_for(spec, opts.alpha)?;
                verdict(
                    t_end < res.t_sup,
                    Some(res.t_sup),
                    format!("contraction horizon {} (estimated constants, alpha = {})", res.t_sup, opts.alpha),
                )
            }
        }
    })
}
