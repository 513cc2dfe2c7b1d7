use thiserror::Error;

use super::{BinOp, Expr, Func};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("log of nonpositive value {0}")]
    LogDomain(f64),
    #[error("sqrt of negative value {0}")]
    SqrtDomain(f64),
    #[error("zero raised to negative power {0}")]
    ZeroToNegative(f64),
    #[error("negative base {base} raised to non-integer power {exponent}")]
    PowDomain { base: f64, exponent: f64 },
    #[error("state index x{index} out of range (dimension {len})")]
    StateIndex { index: usize, len: usize },
    #[error("max index m{index} out of range ({len} functionals)")]
    MaxIndex { index: usize, len: usize },
    #[error("result is NaN")]
    NotANumber,
}

pub(super) fn eval(e: &Expr, t: f64, x: &[f64], m: &[f64]) -> Result<f64, EvalError> {
    let v = match e {
        Expr::Constant(v) => *v,
        Expr::Time => t,
        Expr::State(i) => *x
            .get(i.wrapping_sub(1))
            .ok_or(EvalError::StateIndex { index: *i, len: x.len() })?,
        Expr::Max(j) => *m
            .get(j.wrapping_sub(1))
            .ok_or(EvalError::MaxIndex { index: *j, len: m.len() })?,
        Expr::Neg(a) => -eval(a, t, x, m)?,
        Expr::Binary(op, a, b) => {
            let a = eval(a, t, x, m)?;
            let b = eval(b, t, x, m)?;
            binary(*op, a, b)?
        }
        Expr::Call(func, a) => call(*func, eval(a, t, x, m)?)?,
    };
    if v.is_nan() {
        return Err(EvalError::NotANumber);
    }
    Ok(v)
}

fn binary(op: BinOp, a: f64, b: f64) -> Result<f64, EvalError> {
    Ok(match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            a / b
        }
        BinOp::Pow => pow(a, b)?,
    })
}

fn pow(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if base == 0.0 && exponent < 0.0 {
        return Err(EvalError::ZeroToNegative(exponent));
    }
    let integral = exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64;
    if integral {
        return Ok(base.powi(exponent as i32));
    }
    if base < 0.0 {
        return Err(EvalError::PowDomain { base, exponent });
    }
    Ok(base.powf(exponent))
}

fn call(func: Func, a: f64) -> Result<f64, EvalError> {
    Ok(match func {
        Func::Exp => a.exp(),
        Func::Log => {
            if a <= 0.0 {
                return Err(EvalError::LogDomain(a));
            }
            a.ln()
        }
        Func::Abs => a.abs(),
        Func::Sqrt => {
            if a < 0.0 {
                return Err(EvalError::SqrtDomain(a));
            }
            a.sqrt()
        }
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
    })
}
