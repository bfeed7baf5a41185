//! Flattened numeric evaluators for hot loops (RK4 right-hand sides, grid
//! quadrature). Coefficients are converted to f64 once at compile time and
//! variables are resolved to slot indices, so evaluation is allocation-free.

use super::{Expr, ExprError, TrigKind};
use num_traits::ToPrimitive;

#[derive(Debug, Clone)]
struct CompiledLin {
    constant: f64,
    coeffs: Vec<(usize, f64)>,
}

impl CompiledLin {
    fn eval(&self, vals: &[f64]) -> f64 {
        let mut acc = self.constant;
        for &(slot, c) in &self.coeffs {
            acc += c * vals[slot];
        }
        acc
    }
}

#[derive(Debug, Clone)]
struct CompiledTerm {
    coeff: f64,
    vars: Vec<(usize, i32)>,
    exp: Option<CompiledLin>,
    trig: Vec<(TrigKind, CompiledLin, i32)>,
}

/// An expression lowered onto a fixed variable ordering.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    terms: Vec<CompiledTerm>,
}

impl CompiledExpr {
    /// Lower `e` against the slot order `order`; unknown variables error.
    pub fn compile(e: &Expr, order: &[String]) -> Result<Self, ExprError> {
        let slot = |name: &String| -> Result<usize, ExprError> {
            order
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| ExprError::UnknownVariable { name: name.clone() })
        };
        let lower_lin = |arg: &super::LinArg| -> Result<CompiledLin, ExprError> {
            let mut coeffs = Vec::new();
            for (v, c) in arg.coeffs.iter() {
                coeffs.push((slot(v)?, c.to_f64().unwrap_or(f64::NAN)));
            }
            Ok(CompiledLin {
                constant: arg.constant.to_f64().unwrap_or(f64::NAN),
                coeffs,
            })
        };
        let mut terms = Vec::new();
        for (m, c) in e.terms.iter() {
            let mut vars = Vec::new();
            for (v, k) in m.vars.iter() {
                vars.push((slot(v)?, *k));
            }
            let exp = if m.exp_arg.is_zero() {
                None
            } else {
                Some(lower_lin(&m.exp_arg)?)
            };
            let mut trig = Vec::new();
            for ((kind, arg), pow) in m.trig.iter() {
                trig.push((*kind, lower_lin(arg)?, *pow as i32));
            }
            terms.push(CompiledTerm {
                coeff: c.to_f64().unwrap_or(f64::NAN),
                vars,
                exp,
                trig,
            });
        }
        Ok(CompiledExpr { terms })
    }

    /// Evaluate on the slot values. Out-of-domain powers follow IEEE rules
    /// (0^-1 = inf); callers in integration loops catch non-finite states.
    pub fn eval(&self, vals: &[f64]) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            let mut v = t.coeff;
            for &(slot, k) in &t.vars {
                v *= vals[slot].powi(k);
            }
            if let Some(lin) = &t.exp {
                v *= lin.eval(vals).exp();
            }
            for (kind, lin, pow) in &t.trig {
                let a = lin.eval(vals);
                let f = match kind {
                    TrigKind::Sin => a.sin(),
                    TrigKind::Cos => a.cos(),
                };
                v *= f.powi(*pow);
            }
            acc += v;
        }
        acc
    }
}
