//! Problem definitions and the JSON problem-file format.
//!
//! ```json
//! {"m": 1, "f": ["x1 - m1"], "maxima": ["x1^2"], "x0": [0.5], "T": 0.2}
//! ```
//!
//! `f[i]` is the right-hand side of component `i+1` and may reference `t`,
//! `x1..xm` and `m1..mk`; `maxima[j]` is the functional `h_{j+1}` whose
//! running maximum over `[0, t]` is `m{j+1}`. Functionals see the state only.

use std::path::Path;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::expr::{parse, print, Expr, ParseError};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: cannot parse \"{text}\": {source}")]
    Parse { path: String, text: String, source: ParseError },
    #[error("{path}: expression \"{expr}\" references {what}{index}, but only {limit} {noun} exist")]
    IndexRange { path: String, expr: String, what: &'static str, index: usize, limit: usize, noun: &'static str },
}

impl ProblemError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> ProblemError {
        ProblemError::Schema { path: path.into(), message: message.into() }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, ProblemError::Io { .. })
    }
}

/// A validated initial value problem with running-maximum terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    f: Vec<Expr>,
    maxima: Vec<Expr>,
    x0: Vec<f64>,
    horizon: f64,
}

impl ProblemSpec {
    pub fn new(f: Vec<Expr>, maxima: Vec<Expr>, x0: Vec<f64>, horizon: f64) -> Result<ProblemSpec, ProblemError> {
        let m = f.len();
        if m == 0 {
            return Err(ProblemError::schema("f", "at least one right-hand side is required"));
        }
        if x0.len() != m {
            return Err(ProblemError::schema("x0", format!("expected {m} values, found {}", x0.len())));
        }
        if let Some(i) = x0.iter().position(|v| !v.is_finite()) {
            return Err(ProblemError::schema(format!("x0[{i}]"), "must be finite"));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(ProblemError::schema("T", format!("must be positive and finite, found {horizon}")));
        }
        let k = maxima.len();
        for (i, e) in f.iter().enumerate() {
            check_indices(&format!("f[{i}]"), e, m, k)?;
        }
        for (j, e) in maxima.iter().enumerate() {
            let path = format!("maxima[{j}]");
            if e.uses_time() {
                return Err(ProblemError::schema(path, format!("\"{e}\" must not reference t")));
            }
            if let Some(&idx) = e.max_indices().first() {
                return Err(ProblemError::schema(path, format!("\"{e}\" must not reference m{idx}")));
            }
            check_indices(&path, e, m, 0)?;
        }
        Ok(ProblemSpec { f, maxima, x0, horizon })
    }

    /// Parses every expression; `path` prefixes are used in error messages.
    pub fn from_strings<S: AsRef<str>>(f: &[S], maxima: &[S], x0: Vec<f64>, horizon: f64) -> Result<ProblemSpec, ProblemError> {
        let f = parse_all("f", f)?;
        let maxima = parse_all("maxima", maxima)?;
        ProblemSpec::new(f, maxima, x0, horizon)
    }

    pub fn from_json_str(text: &str) -> Result<ProblemSpec, ProblemError> {
        let v: Value = serde_json::from_str(text)?;
        ProblemSpec::from_json(&v)
    }

    pub fn from_json(v: &Value) -> Result<ProblemSpec, ProblemError> {
        let obj = v.as_object().ok_or_else(|| ProblemError::schema("$", "expected a JSON object"))?;
        for key in obj.keys() {
            if !["m", "f", "maxima", "x0", "T"].contains(&key.as_str()) {
                return Err(ProblemError::schema(key.clone(), "unknown field"));
            }
        }
        let m = field(obj, "m")?
            .as_u64()
            .ok_or_else(|| ProblemError::schema("m", "expected a positive integer"))? as usize;
        if m == 0 {
            return Err(ProblemError::schema("m", "dimension must be at least 1"));
        }
        let f = string_list(obj, "f")?;
        if f.is_empty() {
            return Err(ProblemError::schema("f", "list is empty"));
        }
        if f.len() != m {
            return Err(ProblemError::schema("f", format!("expected {m} expressions, found {}", f.len())));
        }
        let maxima = match obj.get("maxima") {
            None => Vec::new(),
            Some(_) => string_list(obj, "maxima")?,
        };
        let x0 = number_list(obj, "x0")?;
        let horizon = field(obj, "T")?
            .as_f64()
            .ok_or_else(|| ProblemError::schema("T", "expected a number"))?;
        ProblemSpec::from_strings(&f, &maxima, x0, horizon)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ProblemSpec, ProblemError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ProblemError::Io { path: path.display().to_string(), source })?;
        ProblemSpec::from_json_str(&text)
    }

    /// Serializes back to the problem-file layout using canonical expressions.
    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "m": self.dim(),
            "f": self.f.iter().map(print).collect::<Vec<_>>(),
            "maxima": self.maxima.iter().map(print).collect::<Vec<_>>(),
            "x0": self.x0,
            "T": self.horizon,
        })
    }

    /// Stable text form of the problem, used for digests.
    pub fn canonical(&self) -> String {
        self.to_json().to_string()
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn n_maxima(&self) -> usize {
        self.maxima.len()
    }

    pub fn rhs(&self) -> &[Expr] {
        &self.f
    }

    pub fn maxima(&self) -> &[Expr] {
        &self.maxima
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn with_x0(&self, x0: Vec<f64>) -> Result<ProblemSpec, ProblemError> {
        ProblemSpec::new(self.f.clone(), self.maxima.clone(), x0, self.horizon)
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<ProblemSpec, ProblemError> {
        ProblemSpec::new(self.f.clone(), self.maxima.clone(), self.x0.clone(), horizon)
    }

    /// One functional per component, each depending on its own component only.
    pub fn is_componentwise(&self) -> bool {
        self.maxima.len() == self.dim()
            && self.maxima.iter().enumerate().all(|(j, h)| h.state_indices().iter().all(|&i| i == j + 1))
    }

    /// Values of all functionals at one state.
    pub fn eval_maxima(&self, x: &[f64]) -> Result<Vec<f64>, crate::expr::EvalError> {
        self.maxima.iter().map(|h| h.eval(0.0, x, &[])).collect()
    }

    /// Right-hand side at `(t, x, running maxima)`, written into `out`.
    pub fn eval_rhs(&self, t: f64, x: &[f64], mvals: &[f64], out: &mut [f64]) -> Result<(), crate::expr::EvalError> {
        for (o, e) in out.iter_mut().zip(&self.f) {
            *o = e.eval(t, x, mvals)?;
        }
        Ok(())
    }
}

fn check_indices(path: &str, e: &Expr, m: usize, k: usize) -> Result<(), ProblemError> {
    let s = e.max_state_index();
    if s > m {
        return Err(ProblemError::IndexRange {
            path: path.to_string(),
            expr: print(e),
            what: "x",
            index: s,
            limit: m,
            noun: "state components",
        });
    }
    let j = e.max_max_index();
    if j > k {
        return Err(ProblemError::IndexRange {
            path: path.to_string(),
            expr: print(e),
            what: "m",
            index: j,
            limit: k,
            noun: "max-functionals",
        });
    }
    Ok(())
}

fn parse_all<S: AsRef<str>>(name: &str, src: &[S]) -> Result<Vec<Expr>, ProblemError> {
    src.iter()
        .enumerate()
        .map(|(i, s)| {
            parse(s.as_ref()).map_err(|source| ProblemError::Parse {
                path: format!("{name}[{i}]"),
                text: s.as_ref().to_string(),
                source,
            })
        })
        .collect()
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value, ProblemError> {
    obj.get(key).ok_or_else(|| ProblemError::schema(key, "missing field"))
}

fn string_list(obj: &Map<String, Value>, key: &str) -> Result<Vec<String>, ProblemError> {
    let arr = field(obj, key)?
        .as_array()
        .ok_or_else(|| ProblemError::schema(key, "expected a list of strings"))?;
    arr.iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| ProblemError::schema(format!("{key}[{i}]"), "expected a string"))
        })
        .collect()
}

fn number_list(obj: &Map<String, Value>, key: &str) -> Result<Vec<f64>, ProblemError> {
    let arr = field(obj, key)?
        .as_array()
        .ok_or_else(|| ProblemError::schema(key, "expected a list of numbers"))?;
    arr.iter()
        .enumerate()
        .map(|(i, v)| v.as_f64().ok_or_else(|| ProblemError::schema(format!("{key}[{i}]"), "expected a number")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOGISTIC: &str = r#"{"m":1,"f":["x1 - m1"],"maxima":["x1^2"],"x0":[0.5],"T":0.2}"#;

    #[test]
    fn loads_logistic() {
        let p = ProblemSpec::from_json_str(LOGISTIC).unwrap();
        assert_eq!(p.dim(), 1);
        assert_eq!(p.n_maxima(), 1);
        assert_eq!(p.x0(), &[0.5]);
        assert_eq!(p.horizon(), 0.2);
        assert!(p.is_componentwise());
        assert_eq!(
            p.canonical(),
            r#"{"T":0.2,"f":["(x1 - m1)"],"m":1,"maxima":["(x1 ^ 2)"],"x0":[0.5]}"#
        );
        // canonical form re-loads to the same problem
        assert_eq!(ProblemSpec::from_json_str(&p.canonical()).unwrap(), p);
    }

    #[test]
    fn rejects_out_of_range_state() {
        let err = ProblemSpec::from_json_str(r#"{"m":1,"f":["x2 - m1"],"maxima":["x1^2"],"x0":[0.5],"T":1}"#)
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("f[0]") && msg.contains("x2"), "{msg}");
        assert!(matches!(err, ProblemError::IndexRange { index: 2, limit: 1, .. }));
    }

    #[test]
    fn schema_errors_name_the_field() {
        let cases = [
            (r#"{"m":1,"f":[],"maxima":[],"x0":[0.5],"T":1}"#, "f"),
            (r#"{"m":1,"f":["x1"],"maxima":[],"x0":[0.5, 1],"T":1}"#, "x0"),
            (r#"{"m":1,"f":["x1"],"maxima":[],"x0":[0.5],"T":-1}"#, "T"),
            (r#"{"m":1,"f":[3],"maxima":[],"x0":[0.5],"T":1}"#, "f[0]"),
            (r#"{"m":1,"f":["x1"],"maxima":["t*x1"],"x0":[0.5],"T":1}"#, "maxima[0]"),
            (r#"{"m":1,"f":["x1"],"maxima":["m1"],"x0":[0.5],"T":1}"#, "maxima[0]"),
            (r#"{"m":1,"f":["x1"],"x0":[0.5]}"#, "T"),
            (r#"{"m":2,"f":["x1"],"x0":[0.5],"T":1}"#, "f"),
            (r#"{"m":1,"f":["x1"],"x0":[0.5],"T":1,"extra":0}"#, "extra"),
            (r#"[1]"#, "$"),
        ];
        for (src, path) in cases {
            match ProblemSpec::from_json_str(src) {
                Err(ProblemError::Schema { path: p, .. }) => assert_eq!(p, path, "{src}"),
                other => panic!("{src}: {other:?}"),
            }
        }
        assert!(matches!(
            ProblemSpec::from_json_str(r#"{"m":1,"f":["x1 +"],"x0":[0.5],"T":1}"#),
            Err(ProblemError::Parse { .. })
        ));
        assert!(matches!(ProblemSpec::from_json_str("{"), Err(ProblemError::Json(_))));
    }

    #[test]
    fn componentwise_detection() {
        let lv = ProblemSpec::from_strings(&["x1 - m1", "x2 + m1"], &["x1*x2"], vec![1.0, 0.5], 1.0).unwrap();
        assert!(!lv.is_componentwise());
        let lin = ProblemSpec::from_strings(&["x1 - m2", "x2 - m1"], &["x1", "x2"], vec![2.0, 1.0], 1.0).unwrap();
        assert!(lin.is_componentwise());
        let swapped = ProblemSpec::from_strings(&["x1 - m1", "x2 - m2"], &["x2", "x1"], vec![2.0, 1.0], 1.0).unwrap();
        assert!(!swapped.is_componentwise());
    }
}
