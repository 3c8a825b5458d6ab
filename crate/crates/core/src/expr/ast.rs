use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<UnaryOp> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "tan" => UnaryOp::Tan,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

/// Expression tree over chart variables `x1..xn`.
///
/// Variables are stored zero-based: `Var(0)` prints as `x1`.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Var(usize),
    Num(f64),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// Integer power.
    Pow(Box<Expr>, i32),
}

impl Expr {
    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    /// Negation; folds numeric literals so that `-2` is a single literal.
    pub fn neg(e: Expr) -> Expr {
        match e {
            Expr::Num(v) => Expr::Num(-v),
            other => Expr::Unary(UnaryOp::Neg, Box::new(other)),
        }
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Expr {
        if op == UnaryOp::Neg {
            return Expr::neg(e);
        }
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Mul, a, b)
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Div, a, b)
    }

    pub fn powi(a: Expr, k: i32) -> Expr {
        Expr::Pow(Box::new(a), k)
    }

    /// Largest variable index used, plus one (0 for constant expressions).
    pub fn arity(&self) -> usize {
        match self {
            Expr::Var(i) => i + 1,
            Expr::Num(_) => 0,
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.arity(),
            Expr::Binary(_, a, b) => a.arity().max(b.arity()),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Var(_) | Expr::Num(_) => 1,
            Expr::Unary(_, a) | Expr::Pow(a, _) => 1 + a.depth(),
            Expr::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Substitutes `x_i -> subs[i]` for every variable.
    pub fn substitute(&self, subs: &[Expr]) -> Expr {
        match self {
            Expr::Var(i) => subs[*i].clone(),
            Expr::Num(v) => Expr::Num(*v),
            Expr::Unary(op, a) => Expr::unary(*op, a.substitute(subs)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.substitute(subs), b.substitute(subs)),
            Expr::Pow(a, k) => Expr::powi(a.substitute(subs), *k),
        }
    }

    /// Plain `f64` evaluation without derivatives.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Var(i) => x[*i],
            Expr::Num(v) => *v,
            Expr::Unary(op, a) => {
                let a = a.eval(x);
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Tan => a.tan(),
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Log => a.ln(),
                    UnaryOp::Sqrt => a.sqrt(),
                }
            }
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => a / b,
                }
            }
            Expr::Pow(a, k) => a.eval(x).powi(*k),
        }
    }
}

fn fmt_num(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
        write!(f, "(-{})", -v)
    } else {
        write!(f, "{}", v)
    }
}

/// Canonical printer: every compound node is parenthesised, so the output
/// parses back to an identical tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Num(v) => fmt_num(*v, f),
            Expr::Unary(UnaryOp::Neg, a) => write!(f, "(-{})", a),
            Expr::Unary(op, a) => write!(f, "{}({})", op.name(), a),
            Expr::Binary(op, a, b) => write!(f, "({} {} {})", a, op.symbol(), b),
            Expr::Pow(a, k) => {
                if *k < 0 {
                    write!(f, "({})^({})", a, k)
                } else {
                    write!(f, "({})^{}", a, k)
                }
            }
        }
    }
}
