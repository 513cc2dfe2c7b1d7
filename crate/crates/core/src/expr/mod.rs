//! Scalar expressions over time, state components and running-maximum values.
//!
//! Expressions are written in a small infix language (see [`parse`]) and are
//! used for both the right-hand side `f` of a system and for the functionals
//! `h_j` whose running maxima feed back into `f`.

mod eval;
mod parse;
mod sample;

use std::fmt;

pub use eval::EvalError;
pub use parse::{parse, ParseError};
pub use sample::{estimate_bound, estimate_lipschitz, Interval, SampleBox, SampleError, DEFAULT_LATTICE, MAX_EVALUATIONS};

/// Unary functions available in the expression language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Abs,
    Sqrt,
    Sin,
    Cos,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Exp, Func::Log, Func::Abs, Func::Sqrt, Func::Sin, Func::Cos];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Expression tree. State and max-value indices are 1-based, as written.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Constant(f64),
    Time,
    State(usize),
    Max(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Constant(v)
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn negate(inner: Expr) -> Expr {
        Expr::Neg(Box::new(inner))
    }

    pub fn call(func: Func, arg: Expr) -> Expr {
        Expr::Call(func, Box::new(arg))
    }

    /// Visits every node in pre-order.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        visit(self);
        match self {
            Expr::Neg(a) | Expr::Call(_, a) => a.walk(visit),
            Expr::Binary(_, a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
            Expr::Constant(_) | Expr::Time | Expr::State(_) | Expr::Max(_) => {}
        }
    }

    pub fn uses_time(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::Time));
        found
    }

    /// Largest state index referenced, 0 if none.
    pub fn max_state_index(&self) -> usize {
        let mut idx = 0;
        self.walk(&mut |e| {
            if let Expr::State(i) = e {
                idx = idx.max(*i);
            }
        });
        idx
    }

    /// Largest max-value index referenced, 0 if none.
    pub fn max_max_index(&self) -> usize {
        let mut idx = 0;
        self.walk(&mut |e| {
            if let Expr::Max(j) = e {
                idx = idx.max(*j);
            }
        });
        idx
    }

    /// Sorted, deduplicated state indices referenced by the expression.
    pub fn state_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::State(i) = e {
                out.push(*i);
            }
        });
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Sorted, deduplicated max-value indices referenced by the expression.
    pub fn max_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Max(j) = e {
                out.push(*j);
            }
        });
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn eval(&self, t: f64, x: &[f64], mvals: &[f64]) -> Result<f64, EvalError> {
        eval::eval(self, t, x, mvals)
    }
}

/// Canonical, fully parenthesized rendering. `parse(&e.to_string())`
/// reproduces the tree for every expression the parser can produce.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Constant(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => {
                write!(f, "(-{})", -v)
            }
            Expr::Constant(v) => write!(f, "{v}"),
            Expr::Time => f.write_str("t"),
            Expr::State(i) => write!(f, "x{i}"),
            Expr::Max(j) => write!(f, "m{j}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// Renders the canonical form of an expression.
pub fn print(expr: &Expr) -> String {
    expr.to_string()
}
