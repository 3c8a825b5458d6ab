//! Expression language for chart components and forward-mode jets.

mod ast;
mod jet;
mod parser;

pub use ast::{BinaryOp, Expr, UnaryOp};
pub use jet::{vec as jetvec, Jet};
pub use parser::{parse_expression, ParseError};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("point has {got} coordinates, expression needs {need}")]
    Dimension { got: usize, need: usize },
    #[error("jet order {0} not supported (max 3)")]
    Order(u8),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Evaluates `ast` at `point` with all partial derivatives up to `order`.
pub fn evaluate_jet(ast: &Expr, point: &[f64], order: u8) -> Result<Jet, EvalError> {
    if order > 3 {
        return Err(EvalError::Order(order));
    }
    if ast.arity() > point.len() {
        return Err(EvalError::Dimension {
            got: point.len(),
            need: ast.arity(),
        });
    }
    let j = eval(ast, point, order)?;
    if !j.is_finite() {
        return Err(EvalError::Domain(format!(
            "non-finite result evaluating {ast} at {point:?}"
        )));
    }
    Ok(j)
}

fn eval(e: &Expr, x: &[f64], order: u8) -> Result<Jet, EvalError> {
    let n = x.len();
    Ok(match e {
        Expr::Var(i) => Jet::variable(*i, x[*i], n, order),
        Expr::Num(v) => Jet::constant(*v, n, order),
        Expr::Unary(op, a) => {
            let a = eval(a, x, order)?;
            let v = a.value();
            match op {
                UnaryOp::Neg => -&a,
                UnaryOp::Sin => a.sin(),
                UnaryOp::Cos => a.cos(),
                UnaryOp::Tan => {
                    if v.cos() == 0.0 {
                        return Err(EvalError::Domain(format!("tan pole at {v}")));
                    }
                    a.tan()
                }
                UnaryOp::Exp => a.exp(),
                UnaryOp::Log => {
                    if v <= 0.0 {
                        return Err(EvalError::Domain(format!("log of non-positive {v}")));
                    }
                    a.ln()
                }
                UnaryOp::Sqrt => {
                    if v < 0.0 || (v == 0.0 && order > 0) {
                        return Err(EvalError::Domain(format!("sqrt of {v}")));
                    }
                    a.sqrt()
                }
            }
        }
        Expr::Binary(op, a, b) => {
            let a = eval(a, x, order)?;
            let b = eval(b, x, order)?;
            match op {
                BinaryOp::Add => &a + &b,
                BinaryOp::Sub => &a - &b,
                BinaryOp::Mul => &a * &b,
                BinaryOp::Div => {
                    if b.value() == 0.0 {
                        return Err(EvalError::Domain("division by zero".into()));
                    }
                    a.div_jet(&b)
                }
            }
        }
        Expr::Pow(a, k) => {
            let a = eval(a, x, order)?;
            if *k < 0 && a.value() == 0.0 {
                return Err(EvalError::Domain("negative power of zero".into()));
            }
            a.powi(*k)
        }
    })
}
