//! A small arithmetic language for describing test functions, boundary data,
//! coefficients and exponents in config files.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus and is right-associative, so `-2^2`
//! is `-(2^2)` and `2^3^2` is `2^(3^2)`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{name}` expects {expected} argument(s), got {found}")]
    Arity {
        name: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Abs,
    Ln,
    Exp,
    Sin,
    Cos,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryFn {
    Min,
    Max,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Number(f64),
    /// Coordinate `x1..x3`, stored 1-based.
    Coord(usize),
    /// Euclidean norm of the evaluation point.
    Radius,
    Neg(Box<Expression>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
    Call1(UnaryFn, Box<Expression>),
    Call2(BinaryFn, Box<Expression>, Box<Expression>),
}

impl UnaryFn {
    fn name(self) -> &'static str {
        match self {
            UnaryFn::Abs => "abs",
            UnaryFn::Ln => "ln",
            UnaryFn::Exp => "exp",
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Sqrt => "sqrt",
        }
    }
}

impl BinaryFn {
    fn name(self) -> &'static str {
        match self {
            BinaryFn::Min => "min",
            BinaryFn::Max => "max",
            BinaryFn::Pow => "pow",
        }
    }
}

/// `a ^ b` for real operands: positive bases only, plus `0 ^ b = 0` when `b > 0`.
pub fn real_pow(base: f64, exponent: f64) -> Result<f64, ExprError> {
    if base > 0.0 {
        Ok(base.powf(exponent))
    } else if base == 0.0 && exponent > 0.0 {
        Ok(0.0)
    } else {
        Err(ExprError::Domain(format!(
            "{base} ^ {exponent} is not a real power"
        )))
    }
}

impl Expression {
    /// Evaluate at `point`, which must have exactly `dim` coordinates.
    pub fn evaluate(&self, point: &[f64], dim: usize) -> Result<f64, ExprError> {
        if !(1..=3).contains(&dim) {
            return Err(ExprError::Dimension(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if point.len() != dim {
            return Err(ExprError::Dimension(format!(
                "point has {} coordinates but dim is {dim}",
                point.len()
            )));
        }
        let value = self.eval(point)?;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(ExprError::Domain(format!("non-finite result {value}")))
        }
    }

    fn eval(&self, p: &[f64]) -> Result<f64, ExprError> {
        let v = match self {
            Expression::Number(v) => *v,
            Expression::Coord(k) => *p.get(k - 1).ok_or_else(|| {
                ExprError::Dimension(format!("x{k} used in dimension {}", p.len()))
            })?,
            Expression::Radius => p.iter().map(|c| c * c).sum::<f64>().sqrt(),
            Expression::Neg(e) => -e.eval(p)?,
            Expression::Binary(op, l, r) => {
                let a = l.eval(p)?;
                let b = r.eval(p)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(ExprError::Domain("division by zero".into()));
                        }
                        a / b
                    }
                    BinOp::Pow => real_pow(a, b)?,
                }
            }
            Expression::Call1(f, e) => {
                let a = e.eval(p)?;
                match f {
                    UnaryFn::Abs => a.abs(),
                    UnaryFn::Ln => {
                        if a <= 0.0 {
                            return Err(ExprError::Domain(format!("ln({a})")));
                        }
                        a.ln()
                    }
                    UnaryFn::Exp => a.exp(),
                    UnaryFn::Sin => a.sin(),
                    UnaryFn::Cos => a.cos(),
                    UnaryFn::Sqrt => {
                        if a < 0.0 {
                            return Err(ExprError::Domain(format!("sqrt({a})")));
                        }
                        a.sqrt()
                    }
                }
            }
            Expression::Call2(f, l, r) => {
                let a = l.eval(p)?;
                let b = r.eval(p)?;
                match f {
                    BinaryFn::Min => a.min(b),
                    BinaryFn::Max => a.max(b),
                    BinaryFn::Pow => real_pow(a, b)?,
                }
            }
        };
        if v.is_nan() {
            return Err(ExprError::Domain("NaN produced".into()));
        }
        Ok(v)
    }

    /// Height of the expression tree (1 for a leaf).
    pub fn depth(&self) -> usize {
        match self {
            Expression::Number(_) | Expression::Coord(_) | Expression::Radius => 1,
            Expression::Neg(e) | Expression::Call1(_, e) => 1 + e.depth(),
            Expression::Binary(_, l, r) | Expression::Call2(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Highest coordinate index referenced (0 when none).
    pub fn max_coord(&self) -> usize {
        match self {
            Expression::Number(_) | Expression::Radius => 0,
            Expression::Coord(k) => *k,
            Expression::Neg(e) | Expression::Call1(_, e) => e.max_coord(),
            Expression::Binary(_, l, r) | Expression::Call2(_, l, r) => {
                l.max_coord().max(r.max_coord())
            }
        }
    }
}

impl std::str::FromStr for Expression {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expression(s)
    }
}

/// Fully parenthesized printing; parsing the output gives back the same tree.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Number(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expression::Coord(k) => write!(f, "x{k}"),
            Expression::Radius => write!(f, "r"),
            Expression::Neg(e) => write!(f, "(-{e})"),
            Expression::Binary(op, l, r) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({l} {sym} {r})")
            }
            Expression::Call1(func, e) => write!(f, "{}({e})", func.name()),
            Expression::Call2(func, l, r) => write!(f, "{}({l}, {r})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokenize(text: &'a str) -> Result<Vec<(Tok, usize)>, ExprError> {
        let mut lx = Lexer {
            src: text.as_bytes(),
            pos: 0,
        };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lx.next_token()?;
            let done = tok == Tok::End;
            out.push((tok, at));
            if done {
                return Ok(out);
            }
        }
    }

    fn next_token(&mut self) -> Result<(Tok, usize), ExprError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            return Ok((t, start));
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos])
                .expect("ascii identifier")
                .to_string();
            return Ok((Tok::Ident(name), start));
        }
        Err(ExprError::Syntax {
            offset: start,
            message: format!("unexpected character {:?}", char::from(c)),
        })
    }

    fn digits(&mut self) -> usize {
        let s = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        self.pos - s
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize), ExprError> {
        let mut mantissa = self.digits();
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            mantissa += self.digits();
        }
        if mantissa == 0 {
            return Err(ExprError::Syntax {
                offset: start,
                message: "malformed number".into(),
            });
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.digits() == 0 {
                self.pos = save;
                return Err(ExprError::Syntax {
                    offset: save,
                    message: "missing exponent digits".into(),
                });
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
            offset: start,
            message: format!("malformed number `{text}`"),
        })?;
        if !value.is_finite() {
            return Err(ExprError::Syntax {
                offset: start,
                message: format!("number `{text}` overflows"),
            });
        }
        Ok((Tok::Num(value), start))
    }
}

/// Largest accepted tree height.
pub const MAX_DEPTH: usize = 256;

// Parser recursion guard so hostile input cannot blow the stack. Printing a
// tree of height d nests at most 2d + 2 levels, so printed output of any
// accepted tree parses again.
const MAX_NESTING: usize = 2 * MAX_DEPTH + 2;

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn offset(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if t != Tok::End {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn enter(&mut self) -> Result<(), ExprError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return self.err("expression nested too deeply");
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expression, ExprError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expression, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expression, ExprError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            self.enter()?;
            let inner = self.unary()?;
            self.depth -= 1;
            return Ok(Expression::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression, ExprError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            self.enter()?;
            let exponent = self.unary()?;
            self.depth -= 1;
            return Ok(Expression::Binary(
                BinOp::Pow,
                Box::new(base),
                Box::new(exponent),
            ));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expression, ExprError> {
        let offset = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expression::Number(v)),
            Tok::LParen => {
                let e = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return self.err("expected `)`");
                }
                self.bump();
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    if *self.peek() != Tok::RParen {
                        return self.err("expected `)` or `,`");
                    }
                    self.bump();
                    call(&name, offset, args)
                } else {
                    variable(&name, offset)
                }
            }
            Tok::End => Err(ExprError::Syntax {
                offset,
                message: "unexpected end of input".into(),
            }),
            other => Err(ExprError::Syntax {
                offset,
                message: format!("unexpected token {other:?}"),
            }),
        }
    }
}

fn variable(name: &str, offset: usize) -> Result<Expression, ExprError> {
    match name {
        "x1" => Ok(Expression::Coord(1)),
        "x2" => Ok(Expression::Coord(2)),
        "x3" => Ok(Expression::Coord(3)),
        "r" => Ok(Expression::Radius),
        "pi" => Ok(Expression::Number(std::f64::consts::PI)),
        _ => Err(ExprError::UnknownIdentifier {
            name: name.to_string(),
            offset,
        }),
    }
}

fn call(name: &str, offset: usize, mut args: Vec<Expression>) -> Result<Expression, ExprError> {
    let unary = match name {
        "abs" => Some(UnaryFn::Abs),
        "ln" => Some(UnaryFn::Ln),
        "exp" => Some(UnaryFn::Exp),
        "sin" => Some(UnaryFn::Sin),
        "cos" => Some(UnaryFn::Cos),
        "sqrt" => Some(UnaryFn::Sqrt),
        _ => None,
    };
    if let Some(f) = unary {
        if args.len() != 1 {
            return Err(ExprError::Arity {
                name: f.name(),
                expected: 1,
                found: args.len(),
            });
        }
        return Ok(Expression::Call1(f, Box::new(args.remove(0))));
    }
    let binary = match name {
        "min" => BinaryFn::Min,
        "max" => BinaryFn::Max,
        "pow" => BinaryFn::Pow,
        _ => {
            return Err(ExprError::UnknownIdentifier {
                name: name.to_string(),
                offset,
            })
        }
    };
    if args.len() != 2 {
        return Err(ExprError::Arity {
            name: binary.name(),
            expected: 2,
            found: args.len(),
        });
    }
    let r = args.pop().expect("two args");
    let l = args.pop().expect("two args");
    Ok(Expression::Call2(binary, Box::new(l), Box::new(r)))
}

/// Parse `text` into an expression tree.
pub fn parse_expression(text: &str) -> Result<Expression, ExprError> {
    if text.trim().is_empty() {
        return Err(ExprError::Syntax {
            offset: text.len(),
            message: "empty expression".into(),
        });
    }
    let toks = Lexer::tokenize(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        depth: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.err("trailing input");
    }
    if e.depth() > MAX_DEPTH {
        return Err(ExprError::Syntax {
            offset: 0,
            message: format!("expression tree deeper than {MAX_DEPTH}"),
        });
    }
    Ok(e)
}

/// Parse and evaluate in one step.
pub fn evaluate(e: &Expression, point: &[f64], dim: usize) -> Result<f64, ExprError> {
    e.evaluate(point, dim)
}
