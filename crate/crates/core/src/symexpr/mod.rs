//! Exact symbolic scalars over named chart coordinates.
//!
//! The expression class is deliberately small: Laurent polynomials with exact
//! rational coefficients, times `exp`/`sin`/`cos` factors whose arguments are
//! rational-linear in the coordinates. That class is closed under addition,
//! multiplication, partial differentiation and the substitutions the geometry
//! needs, and zero-testing inside it is exact: expressions are kept in an
//! expanded canonical form (sorted monomials, merged exponential factors,
//! sign-normalized trigonometric arguments), so an expression is zero iff its
//! term map is empty. `sin`/`cos` with distinct arguments are treated as
//! independent transcendentals; no trigonometric identities are applied, which
//! keeps `is_zero` conservative outside the polynomial-exponential fragment.
//!
//! Values are immutable after construction and freely shareable across
//! threads.

mod compiled;
mod parse;

pub use compiled::CompiledExpr;
pub use parse::parse;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

pub type Rat = BigRational;

/// Exact rational from a small integer.
pub fn rat(n: i64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

/// Exact rational n/d.
pub fn ratio(n: i64, d: i64) -> Rat {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Every finite f64 is a dyadic rational; the conversion is exact.
pub fn rat_from_f64(x: f64) -> Option<Rat> {
    BigRational::from_float(x)
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ExprError {
    #[error("argument of {func} is not linear in the coordinates")]
    NonLinearArg { func: &'static str },
    #[error("negative power of a non-monomial expression")]
    NegativePowerOfSum,
    #[error("negative power of a trigonometric factor is outside the class")]
    TrigInverse,
    #[error("division by zero expression")]
    DivisionByZero,
    #[error("divisor does not canonicalize to an invertible monomial")]
    DivisorNotMonomial,
    #[error("variable `{name}` is not declared on this chart")]
    UnknownVariable { name: String },
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("no value assigned for variable `{name}`")]
    MissingAssignment { name: String },
    #[error("domain error: {detail}")]
    Domain { detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrigKind {
    Sin,
    Cos,
}

/// Rational-linear form c0 + Σ ci·xi, the admissible transcendental argument.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default, Hash)]
pub struct LinArg {
    coeffs: BTreeMap<String, Rat>,
    constant: Rat,
}

impl LinArg {
    fn zero() -> Self {
        Self::default()
    }

    fn is_zero(&self) -> bool {
        self.coeffs.is_empty() && self.constant.is_zero()
    }

    fn add(&self, other: &LinArg) -> LinArg {
        let mut coeffs = self.coeffs.clone();
        for (v, c) in &other.coeffs {
            let entry = coeffs.entry(v.clone()).or_insert_with(Rat::zero);
            *entry += c;
        }
        coeffs.retain(|_, c| !c.is_zero());
        LinArg {
            coeffs,
            constant: &self.constant + &other.constant,
        }
    }

    fn neg(&self) -> LinArg {
        LinArg {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), -c)).collect(),
            constant: -&self.constant,
        }
    }

    fn coeff_of(&self, var: &str) -> Rat {
        self.coeffs.get(var).cloned().unwrap_or_else(Rat::zero)
    }

    /// Sign of the leading entry (first coefficient in name order, else the
    /// constant); used to orient trigonometric arguments canonically.
    fn leading_is_negative(&self) -> bool {
        if let Some((_, c)) = self.coeffs.iter().next() {
            c.is_negative()
        } else {
            self.constant.is_negative()
        }
    }

    fn eval(&self, pt: &Point) -> Result<f64, EvalError> {
        let mut acc = self.constant.to_f64().unwrap_or(f64::NAN);
        for (v, c) in &self.coeffs {
            let x = pt.get(v).ok_or_else(|| EvalError::MissingAssignment {
                name: v.clone(),
            })?;
            acc += c.to_f64().unwrap_or(f64::NAN) * x;
        }
        Ok(acc)
    }

    fn rename_vars(&self) -> impl Iterator<Item = &String> {
        self.coeffs.keys()
    }
}

/// One canonical product: variable powers × optional exp factor × trig factors.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default, Hash)]
pub struct Monomial {
    vars: BTreeMap<String, i32>,
    exp_arg: LinArg,
    trig: BTreeMap<(TrigKind, LinArg), u32>,
}

impl Monomial {
    fn one() -> Self {
        Self::default()
    }

    fn is_one(&self) -> bool {
        self.vars.is_empty() && self.exp_arg.is_zero() && self.trig.is_empty()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut vars = self.vars.clone();
        for (v, k) in &other.vars {
            let e = vars.entry(v.clone()).or_insert(0);
            *e += k;
        }
        vars.retain(|_, k| *k != 0);
        let mut trig = self.trig.clone();
        for (f, k) in &other.trig {
            *trig.entry(f.clone()).or_insert(0) += k;
        }
        Monomial {
            vars,
            exp_arg: self.exp_arg.add(&other.exp_arg),
            trig,
        }
    }

}

/// A symbolic scalar in canonical form: a finite sum `Σ coeff · monomial`.
///
/// Construction is eager: the arithmetic operators and the `exp`/`sin`/`cos`
/// constructors canonicalize on the way in, so two structurally equal `Expr`
/// values denote the same function and `is_zero` is a plain emptiness check.
#[derive(Clone, PartialEq, Eq, Default, Hash)]
pub struct Expr {
    terms: Arc<BTreeMap<Monomial, Rat>>,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", self)
    }
}

impl Expr {
    fn from_terms(mut terms: BTreeMap<Monomial, Rat>) -> Self {
        terms.retain(|_, c| !c.is_zero());
        Expr {
            terms: Arc::new(terms),
        }
    }

    pub fn zero() -> Self {
        Expr::default()
    }

    pub fn one() -> Self {
        Expr::from_int(1)
    }

    pub fn from_int(n: i64) -> Self {
        Expr::constant(rat(n))
    }

    pub fn constant(c: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(), c);
        }
        Expr::from_terms(terms)
    }

    /// Exact constant from a float; NaN/∞ are rejected.
    pub fn from_f64(x: f64) -> Option<Self> {
        rat_from_f64(x).map(Expr::constant)
    }

    pub fn var(name: &str) -> Self {
        let mut vars = BTreeMap::new();
        vars.insert(name.to_string(), 1);
        let mono = Monomial {
            vars,
            ..Monomial::default()
        };
        let mut terms = BTreeMap::new();
        terms.insert(mono, rat(1));
        Expr::from_terms(terms)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1
            && self
                .terms
                .iter()
                .next()
                .map(|(m, c)| m.is_one() && c.is_one())
                .unwrap_or(false)
    }

    /// The constant value, if the expression is a constant.
    pub fn as_constant(&self) -> Option<Rat> {
        if self.terms.is_empty() {
            return Some(Rat::zero());
        }
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            if m.is_one() {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Canonicalization is idempotent; expressions are stored canonically, so
    /// this is the identity. Kept as an explicit operation so callers can
    /// state intent and tests can assert `canon(canon(e)) == canon(e)`.
    pub fn canon(&self) -> Expr {
        self.clone()
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for m in self.terms.keys() {
            out.extend(m.vars.keys().cloned());
            out.extend(m.exp_arg.rename_vars().cloned());
            for (_, arg) in m.trig.keys() {
                out.extend(arg.rename_vars().cloned());
            }
        }
        out
    }

    pub fn depends_on(&self, var: &str) -> bool {
        self.free_vars().contains(var)
    }

    fn add_assign_term(terms: &mut BTreeMap<Monomial, Rat>, mono: Monomial, coeff: Rat) {
        if coeff.is_zero() {
            return;
        }
        let entry = terms.entry(mono).or_insert_with(Rat::zero);
        *entry += coeff;
        // emptiness is restored by from_terms at the end of each op
    }

    fn add_impl(&self, other: &Expr) -> Expr {
        let mut terms = (*self.terms).clone();
        for (m, c) in other.terms.iter() {
            Self::add_assign_term(&mut terms, m.clone(), c.clone());
        }
        Expr::from_terms(terms)
    }

    fn neg_impl(&self) -> Expr {
        Expr::from_terms(self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect())
    }

    fn mul_impl(&self, other: &Expr) -> Expr {
        let mut terms = BTreeMap::new();
        for (ma, ca) in self.terms.iter() {
            for (mb, cb) in other.terms.iter() {
                Self::add_assign_term(&mut terms, ma.mul(mb), ca * cb);
            }
        }
        Expr::from_terms(terms)
    }

    pub fn scale(&self, k: &Rat) -> Expr {
        if k.is_zero() {
            return Expr::zero();
        }
        Expr::from_terms(self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect())
    }

    /// Integer power. Negative exponents require the base to be a single
    /// trig-free monomial (the Laurent fragment is closed under those).
    pub fn powi(&self, k: i32) -> Result<Expr, ExprError> {
        if k == 0 {
            return Ok(Expr::one());
        }
        if k > 0 {
            let mut acc = Expr::one();
            for _ in 0..k {
                acc = acc.mul_impl(self);
            }
            return Ok(acc);
        }
        let inv = self.invert_monomial()?;
        inv.powi(-k)
    }

    fn invert_monomial(&self) -> Result<Expr, ExprError> {
        if self.terms.is_empty() {
            return Err(ExprError::DivisionByZero);
        }
        if self.terms.len() != 1 {
            return Err(ExprError::NegativePowerOfSum);
        }
        let (m, c) = self.terms.iter().next().unwrap();
        if !m.trig.is_empty() {
            return Err(ExprError::TrigInverse);
        }
        let mono = Monomial {
            vars: m.vars.iter().map(|(v, k)| (v.clone(), -k)).collect(),
            exp_arg: m.exp_arg.neg(),
            trig: BTreeMap::new(),
        };
        let mut terms = BTreeMap::new();
        terms.insert(mono, c.recip());
        Ok(Expr::from_terms(terms))
    }

    /// Exact division; the divisor must canonicalize to an invertible monomial.
    pub fn div(&self, other: &Expr) -> Result<Expr, ExprError> {
        let inv = other.invert_monomial().map_err(|e| match e {
            ExprError::NegativePowerOfSum | ExprError::TrigInverse => {
                ExprError::DivisorNotMonomial
            }
            e => e,
        })?;
        Ok(self.mul_impl(&inv))
    }

    /// The linear form of this expression, if it is one.
    fn try_linear(&self) -> Option<LinArg> {
        let mut arg = LinArg::zero();
        for (m, c) in self.terms.iter() {
            if !m.exp_arg.is_zero() || !m.trig.is_empty() {
                return None;
            }
            match m.vars.len() {
                0 => arg.constant += c,
                1 => {
                    let (v, k) = m.vars.iter().next().unwrap();
                    if *k != 1 {
                        return None;
                    }
                    let e = arg.coeffs.entry(v.clone()).or_insert_with(Rat::zero);
                    *e += c;
                }
                _ => return None,
            }
        }
        arg.coeffs.retain(|_, c| !c.is_zero());
        Some(arg)
    }

    fn single(mono: Monomial, coeff: Rat) -> Expr {
        let mut terms = BTreeMap::new();
        Self::add_assign_term(&mut terms, mono, coeff);
        Expr::from_terms(terms)
    }

    /// `exp` of a rational-linear argument.
    pub fn exp_of(arg: &Expr) -> Result<Expr, ExprError> {
        let lin = arg
            .try_linear()
            .ok_or(ExprError::NonLinearArg { func: "exp" })?;
        if lin.is_zero() {
            return Ok(Expr::one());
        }
        Ok(Expr::single(
            Monomial {
                exp_arg: lin,
                ..Monomial::default()
            },
            rat(1),
        ))
    }

    /// `sin` of a rational-linear argument; `sin(-a)` normalizes to `-sin(a)`.
    pub fn sin_of(arg: &Expr) -> Result<Expr, ExprError> {
        let lin = arg
            .try_linear()
            .ok_or(ExprError::NonLinearArg { func: "sin" })?;
        if lin.is_zero() {
            return Ok(Expr::zero());
        }
        let (lin, sign) = if lin.leading_is_negative() {
            (lin.neg(), rat(-1))
        } else {
            (lin, rat(1))
        };
        let mut trig = BTreeMap::new();
        trig.insert((TrigKind::Sin, lin), 1);
        Ok(Expr::single(
            Monomial {
                trig,
                ..Monomial::default()
            },
            sign,
        ))
    }

    /// `cos` of a rational-linear argument; `cos(-a)` normalizes to `cos(a)`.
    pub fn cos_of(arg: &Expr) -> Result<Expr, ExprError> {
        let lin = arg
            .try_linear()
            .ok_or(ExprError::NonLinearArg { func: "cos" })?;
        if lin.is_zero() {
            return Ok(Expr::one());
        }
        let lin = if lin.leading_is_negative() {
            lin.neg()
        } else {
            lin
        };
        let mut trig = BTreeMap::new();
        trig.insert((TrigKind::Cos, lin), 1);
        Ok(Expr::single(
            Monomial {
                trig,
                ..Monomial::default()
            },
            rat(1),
        ))
    }

    /// Exact partial derivative; the class is closed under it, and the result
    /// is canonical by construction.
    pub fn diff(&self, var: &str) -> Expr {
        let mut out = Expr::zero();
        for (m, c) in self.terms.iter() {
            // power rule over the variable factors
            for (v, k) in &m.vars {
                if v != var {
                    continue;
                }
                let mut vars = m.vars.clone();
                if *k == 1 {
                    vars.remove(v);
                } else {
                    vars.insert(v.clone(), k - 1);
                }
                let mono = Monomial {
                    vars,
                    exp_arg: m.exp_arg.clone(),
                    trig: m.trig.clone(),
                };
                out = out.add_impl(&Expr::single(mono, c * rat(*k as i64)));
            }
            // chain rule through the exponential factor
            let ec = m.exp_arg.coeff_of(var);
            if !ec.is_zero() {
                out = out.add_impl(&Expr::single(m.clone(), c * ec));
            }
            // chain rule through each trigonometric factor
            for ((kind, arg), pow) in &m.trig {
                let ac = arg.coeff_of(var);
                if ac.is_zero() {
                    continue;
                }
                let mut trig = m.trig.clone();
                if *pow == 1 {
                    trig.remove(&(*kind, arg.clone()));
                } else {
                    trig.insert((*kind, arg.clone()), pow - 1);
                }
                let (partner, sign) = match kind {
                    TrigKind::Sin => (TrigKind::Cos, rat(1)),
                    TrigKind::Cos => (TrigKind::Sin, rat(-1)),
                };
                *trig.entry((partner, arg.clone())).or_insert(0) += 1;
                let mono = Monomial {
                    vars: m.vars.clone(),
                    exp_arg: m.exp_arg.clone(),
                    trig,
                };
                out = out.add_impl(&Expr::single(mono, c * ac * sign * rat(*pow as i64)));
            }
        }
        out
    }

    /// Numeric evaluation at a point assigning every free variable.
    pub fn eval(&self, pt: &Point) -> Result<f64, EvalError> {
        let mut acc = 0.0;
        for (m, c) in self.terms.iter() {
            let mut v = c.to_f64().unwrap_or(f64::NAN);
            for (name, k) in &m.vars {
                let x = pt.get(name).ok_or_else(|| EvalError::MissingAssignment {
                    name: name.clone(),
                })?;
                if x == 0.0 && *k < 0 {
                    return Err(EvalError::Domain {
                        detail: format!("0^{k} while evaluating `{name}`"),
                    });
                }
                v *= x.powi(*k);
            }
            if !m.exp_arg.is_zero() {
                v *= m.exp_arg.eval(pt)?.exp();
            }
            for ((kind, arg), pow) in &m.trig {
                let a = arg.eval(pt)?;
                let t = match kind {
                    TrigKind::Sin => a.sin(),
                    TrigKind::Cos => a.cos(),
                };
                v *= t.powi(*pow as i32);
            }
            acc += v;
        }
        Ok(acc)
    }

    /// Substitute variables by expressions. Stays inside the class: images of
    /// variables occurring in transcendental arguments must be linear, and
    /// negative powers require invertible-monomial images.
    pub fn subst(&self, map: &BTreeMap<String, Expr>) -> Result<Expr, ExprError> {
        let mut out = Expr::zero();
        for (m, c) in self.terms.iter() {
            let mut term = Expr::constant(c.clone());
            for (v, k) in &m.vars {
                let image = match map.get(v) {
                    Some(e) => e.clone(),
                    None => Expr::var(v),
                };
                term = term.mul_impl(&image.powi(*k)?);
            }
            if !m.exp_arg.is_zero() {
                let arg = Self::subst_linarg(&m.exp_arg, map)?;
                term = term.mul_impl(&Expr::exp_of(&arg)?);
            }
            for ((kind, arg), pow) in &m.trig {
                let arg = Self::subst_linarg(arg, map)?;
                let factor = match kind {
                    TrigKind::Sin => Expr::sin_of(&arg)?,
                    TrigKind::Cos => Expr::cos_of(&arg)?,
                };
                term = term.mul_impl(&factor.powi(*pow as i32)?);
            }
            out = out.add_impl(&term);
        }
        Ok(out)
    }

    fn subst_linarg(arg: &LinArg, map: &BTreeMap<String, Expr>) -> Result<Expr, ExprError> {
        let mut e = Expr::constant(arg.constant.clone());
        for (v, c) in &arg.coeffs {
            let image = match map.get(v) {
                Some(img) => img.clone(),
                None => Expr::var(v),
            };
            e = e.add_impl(&image.scale(c));
        }
        Ok(e)
    }

    /// Splits into (u-independent part, rest) where "u-independent" means no
    /// dependence on any of the given variables.
    pub fn split_independent(&self, vars: &[String]) -> (Expr, Expr) {
        let mut indep = BTreeMap::new();
        let mut dep = BTreeMap::new();
        for (m, c) in self.terms.iter() {
            let touches = vars.iter().any(|v| {
                m.vars.contains_key(v)
                    || !m.exp_arg.coeff_of(v).is_zero()
                    || m.trig.iter().any(|((_, a), _)| !a.coeff_of(v).is_zero())
            });
            if touches {
                dep.insert(m.clone(), c.clone());
            } else {
                indep.insert(m.clone(), c.clone());
            }
        }
        (Expr::from_terms(indep), Expr::from_terms(dep))
    }
}

impl std::ops::Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        self.add_impl(rhs)
    }
}

impl std::ops::Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        self.add_impl(&rhs.neg_impl())
    }
}

impl std::ops::Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        self.mul_impl(rhs)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.neg_impl()
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        self.add_impl(&rhs)
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self.add_impl(&rhs.neg_impl())
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        self.mul_impl(&rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.neg_impl()
    }
}

fn fmt_rat(c: &Rat) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn fmt_linarg(arg: &LinArg) -> String {
    let mut parts: Vec<String> = Vec::new();
    for (v, c) in &arg.coeffs {
        if c.is_one() {
            parts.push(v.clone());
        } else if (-c).is_one() {
            parts.push(format!("-{v}"));
        } else {
            parts.push(format!("{}*{v}", fmt_rat(c)));
        }
    }
    if !arg.constant.is_zero() || parts.is_empty() {
        parts.push(fmt_rat(&arg.constant));
    }
    let mut out = String::new();
    for (i, p) in parts.iter().enumerate() {
        if i == 0 {
            out.push_str(p);
        } else if let Some(rest) = p.strip_prefix('-') {
            out.push_str(" - ");
            out.push_str(rest);
        } else {
            out.push_str(" + ");
            out.push_str(p);
        }
    }
    out
}

impl fmt::Display for Expr {
    /// Ordinary infix notation, parseable back by [`parse`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter() {
            let mut factors: Vec<String> = Vec::new();
            for (v, k) in &m.vars {
                if *k == 1 {
                    factors.push(v.clone());
                } else {
                    factors.push(format!("{v}^{k}"));
                }
            }
            if !m.exp_arg.is_zero() {
                factors.push(format!("exp({})", fmt_linarg(&m.exp_arg)));
            }
            for ((kind, arg), pow) in &m.trig {
                let name = match kind {
                    TrigKind::Sin => "sin",
                    TrigKind::Cos => "cos",
                };
                if *pow == 1 {
                    factors.push(format!("{name}({})", fmt_linarg(arg)));
                } else {
                    factors.push(format!("{name}({})^{pow}", fmt_linarg(arg)));
                }
            }
            let abs = c.abs();
            let coeff_str = fmt_rat(&abs);
            let body = if factors.is_empty() {
                coeff_str
            } else if abs.is_one() {
                factors.join("*")
            } else {
                format!("{}*{}", coeff_str, factors.join("*"))
            };
            if first {
                if c.is_negative() {
                    write!(f, "-{body}")?;
                } else {
                    write!(f, "{body}")?;
                }
                first = false;
            } else if c.is_negative() {
                write!(f, " - {body}")?;
            } else {
                write!(f, " + {body}")?;
            }
        }
        Ok(())
    }
}

/// Assignment of real values to chart variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Point {
    vals: BTreeMap<String, f64>,
}

impl Point {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.vals.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.vals.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.vals.get(name).copied()
    }
}

impl<const N: usize> From<[(&str, f64); N]> for Point {
    fn from(pairs: [(&str, f64); N]) -> Self {
        let mut p = Point::new();
        for (k, v) in pairs {
            p.set(k, v);
        }
        p
    }
}
