//! Recursive-descent parser.
//!
//! ```text
//! expr    = term , { ( "+" | "-" ) , term } ;
//! term    = unary , { ( "*" | "/" ) , unary } ;
//! unary   = "-" , unary | power ;
//! power   = primary , [ "^" , unary ] ;          (* right-associative *)
//! primary = number | "t" | state | max | func , "(" , expr , ")" | "(" , expr , ")" ;
//! ```

use thiserror::Error;

use super::{BinOp, Expr, Func};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("unexpected character '{ch}' at position {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("malformed number '{text}' at position {pos}")]
    BadNumber { text: String, pos: usize },
    #[error("unknown identifier '{name}' at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("invalid index in '{name}' at position {pos}: indices start at 1 with no leading zeros")]
    BadIndex { name: String, pos: usize },
    #[error("expected {expected} at position {pos}, found {found}")]
    Expected { expected: &'static str, found: String, pos: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent only when followed by a digit, optionally signed
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s = &text[start..i];
            let v: f64 = s.parse().map_err(|_| ParseError::BadNumber { text: s.to_string(), pos: start })?;
            out.push(Token { tok: Tok::Num(v), pos: start });
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(text[start..i].to_string()), pos: start });
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    let ch = text[start..].chars().next().unwrap_or(c);
                    return Err(ParseError::UnexpectedChar { ch, pos: start });
                }
            };
            out.push(Token { tok, pos: start });
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.at).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.at).map_or(self.end, |t| t.pos)
    }

    fn found(&self) -> String {
        match self.peek() {
            None => "end of input".to_string(),
            Some(Tok::Num(v)) => format!("number {v}"),
            Some(Tok::Ident(s)) => format!("'{s}'"),
            Some(Tok::Op(c)) => format!("'{c}'"),
            Some(Tok::LParen) => "'('".to_string(),
            Some(Tok::RParen) => "')'".to_string(),
        }
    }

    fn eat_op(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &'static str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.at += 1;
            Ok(())
        } else {
            Err(ParseError::Expected { expected: what, found: self.found(), pos: self.pos() })
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat_op('+') {
                BinOp::Add
            } else if self.eat_op('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat_op('*') {
                BinOp::Mul
            } else if self.eat_op('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_op('-') {
            Ok(Expr::negate(self.unary()?))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat_op('^') {
            let exponent = self.unary()?;
            Ok(Expr::binary(BinOp::Pow, base, exponent))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.at += 1;
                Ok(Expr::Constant(v))
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                if let Some(func) = Func::from_name(&name) {
                    self.expect(Tok::LParen, "'(' after function name")?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "')'")?;
                    return Ok(Expr::call(func, arg));
                }
                identifier(&name, pos)
            }
            _ => Err(ParseError::Expected { expected: "an operand", found: self.found(), pos }),
        }
    }
}

fn identifier(name: &str, pos: usize) -> Result<Expr, ParseError> {
    if name == "t" {
        return Ok(Expr::Time);
    }
    let (head, digits) = name.split_at(1);
    let build: fn(usize) -> Expr = match head {
        "x" => Expr::State,
        "m" => Expr::Max,
        _ => return Err(ParseError::UnknownIdentifier { name: name.to_string(), pos }),
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseError::UnknownIdentifier { name: name.to_string(), pos });
    }
    if digits.starts_with('0') {
        return Err(ParseError::BadIndex { name: name.to_string(), pos });
    }
    let idx: usize = digits.parse().map_err(|_| ParseError::BadIndex { name: name.to_string(), pos })?;
    Ok(build(idx))
}

/// Parses an expression in the infix language described at module level.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    if tokens.is_empty() {
        return Err(ParseError::Empty);
    }
    let mut p = Parser { tokens, at: 0, end: text.len() };
    let e = p.expr()?;
    if p.at != p.tokens.len() {
        return Err(ParseError::Expected { expected: "an operator or end of input", found: p.found(), pos: p.pos() });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::print;

    fn c(v: f64) -> Expr {
        Expr::Constant(v)
    }

    #[test]
    fn grammar_examples() {
        assert_eq!(parse("x1 - m1").unwrap(), Expr::binary(BinOp::Sub, Expr::State(1), Expr::Max(1)));
        assert_eq!(
            parse("x1 - x1^2").unwrap(),
            Expr::binary(BinOp::Sub, Expr::State(1), Expr::binary(BinOp::Pow, Expr::State(1), c(2.0)))
        );
        assert_eq!(
            parse("1 + 2*t").unwrap(),
            Expr::binary(BinOp::Add, c(1.0), Expr::binary(BinOp::Mul, c(2.0), Expr::Time))
        );
    }

    #[test]
    fn precedence_and_associativity() {
        // power binds tighter than unary minus
        assert_eq!(parse("-x1^2").unwrap(), Expr::negate(Expr::binary(BinOp::Pow, Expr::State(1), c(2.0))));
        assert_eq!(print(&parse("2^3^2").unwrap()), "(2 ^ (3 ^ 2))");
        assert_eq!(print(&parse("1 - 2 - 3").unwrap()), "((1 - 2) - 3)");
        assert_eq!(print(&parse("8 / 4 / 2").unwrap()), "((8 / 4) / 2)");
        assert_eq!(print(&parse("x1^-1").unwrap()), "(x1 ^ (-1))");
        assert_eq!(print(&parse("-2*x1").unwrap()), "((-2) * x1)");
        assert_eq!(print(&parse("exp(-t) * abs(x2)").unwrap()), "(exp((-t)) * abs(x2))");
        assert_eq!(print(&parse("1.5e-3 + .5").unwrap()), "(0.0015 + 0.5)");
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(parse(""), Err(ParseError::Empty));
        assert_eq!(parse("   "), Err(ParseError::Empty));
        assert!(matches!(parse("x1 + y"), Err(ParseError::UnknownIdentifier { pos: 5, .. })));
        assert!(matches!(parse("x0"), Err(ParseError::BadIndex { pos: 0, .. })));
        assert!(matches!(parse("m01"), Err(ParseError::BadIndex { .. })));
        assert!(matches!(parse("x"), Err(ParseError::UnknownIdentifier { .. })));
        assert!(matches!(parse("x1a"), Err(ParseError::UnknownIdentifier { .. })));
        assert!(matches!(parse("x1 +"), Err(ParseError::Expected { pos: 4, .. })));
        assert!(matches!(parse("(x1"), Err(ParseError::Expected { pos: 3, .. })));
        assert!(matches!(parse("x1 x2"), Err(ParseError::Expected { pos: 3, .. })));
        assert!(matches!(parse("x1 # 2"), Err(ParseError::UnexpectedChar { ch: '#', pos: 3 })));
        assert!(matches!(parse("exp x1"), Err(ParseError::Expected { .. })));
        assert!(matches!(parse("1..2"), Err(ParseError::BadNumber { .. })));
    }
}
