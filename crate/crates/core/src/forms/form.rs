//! Sparse exterior forms with exact symbolic coefficients, and the graded
//! operations on them: wedge, exterior derivative, interior product,
//! Lichnerowicz differential, slotwise connection contraction.

use crate::symexpr::{EvalError, Expr, Point};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::{ChartSpec, FormError};

/// Sorts basis indices in place; returns the permutation sign, or `None` when
/// an index repeats (the wedge monomial is zero).
pub(crate) fn sort_with_sign(indices: &mut [u8]) -> Option<i32> {
    let mut sign = 1;
    for i in 1..indices.len() {
        let mut j = i;
        while j > 0 && indices[j - 1] > indices[j] {
            indices.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    for w in indices.windows(2) {
        if w[0] == w[1] {
            return None;
        }
    }
    Some(sign)
}

/// A degree-k exterior form on a chart: map from strictly increasing basis
/// index sets to nonzero coefficients.
#[derive(Clone)]
pub struct DifferentialForm {
    chart: Arc<ChartSpec>,
    degree: usize,
    terms: BTreeMap<Vec<u8>, Expr>,
}

impl DifferentialForm {
    pub fn zero(chart: Arc<ChartSpec>, degree: usize) -> Self {
        DifferentialForm {
            chart,
            degree,
            terms: BTreeMap::new(),
        }
    }

    /// Single term `coeff · dz_{i1} ∧ … ∧ dz_{ik}` with the indices in any
    /// order; repeated indices yield the zero form.
    pub fn monomial(
        chart: Arc<ChartSpec>,
        indices: &[u8],
        coeff: Expr,
    ) -> Result<Self, FormError> {
        for &i in indices {
            if (i as usize) >= chart.dim() {
                return Err(FormError::CoordinateIndexOutOfRange { index: i });
            }
        }
        let mut form = DifferentialForm::zero(chart, indices.len());
        form.add_term(indices, coeff);
        Ok(form)
    }

    /// Degree-0 form from a scalar.
    pub fn scalar(chart: Arc<ChartSpec>, value: Expr) -> Self {
        let mut form = DifferentialForm::zero(chart, 0);
        form.add_term(&[], value);
        form
    }

    pub(crate) fn add_term(&mut self, indices: &[u8], coeff: Expr) {
        if coeff.is_zero() {
            return;
        }
        let mut idx = indices.to_vec();
        let Some(sign) = sort_with_sign(&mut idx) else {
            return;
        };
        debug_assert_eq!(idx.len(), self.degree);
        let signed = if sign < 0 { -&coeff } else { coeff };
        let entry = self.terms.entry(idx);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(signed);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get() + &signed;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn chart(&self) -> &Arc<ChartSpec> {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u8>, &Expr)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of the (sorted or unsorted) basis subset, sign-adjusted.
    pub fn coefficient(&self, indices: &[u8]) -> Expr {
        let mut idx = indices.to_vec();
        let Some(sign) = sort_with_sign(&mut idx) else {
            return Expr::zero();
        };
        match self.terms.get(&idx) {
            None => Expr::zero(),
            Some(c) => {
                if sign < 0 {
                    -c
                } else {
                    c.clone()
                }
            }
        }
    }

    fn check_compatible(&self, other: &DifferentialForm) -> Result<(), FormError> {
        if !self.chart.same_coords(&other.chart) {
            return Err(FormError::ChartMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &DifferentialForm) -> Result<DifferentialForm, FormError> {
        self.check_compatible(other)?;
        if self.degree != other.degree {
            return Err(FormError::DegreeMismatch {
                expected: self.degree,
                got: other.degree,
            });
        }
        let mut out = self.clone();
        for (idx, c) in &other.terms {
            out.add_term(idx, c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DifferentialForm) -> Result<DifferentialForm, FormError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> DifferentialForm {
        DifferentialForm {
            chart: self.chart.clone(),
            degree: self.degree,
            terms: self.terms.iter().map(|(k, v)| (k.clone(), -v)).collect(),
        }
    }

    pub fn scale(&self, k: &Expr) -> DifferentialForm {
        let mut out = DifferentialForm::zero(self.chart.clone(), self.degree);
        for (idx, c) in &self.terms {
            out.add_term(idx, k * c);
        }
        out
    }

    /// Exterior product. Degrees beyond the chart dimension give the zero
    /// form of the combined degree, not an error.
    pub fn wedge(&self, other: &DifferentialForm) -> Result<DifferentialForm, FormError> {
        self.check_compatible(other)?;
        let degree = self.degree + other.degree;
        let mut out = DifferentialForm::zero(self.chart.clone(), degree);
        if degree > self.chart.dim() {
            return Ok(out);
        }
        for (ia, ca) in &self.terms {
            for (ib, cb) in &other.terms {
                let mut idx = Vec::with_capacity(ia.len() + ib.len());
                idx.extend_from_slice(ia);
                idx.extend_from_slice(ib);
                out.add_term(&idx, ca * cb);
            }
        }
        Ok(out)
    }

    /// Exterior derivative: degree k → k+1, linear, graded Leibniz over wedge.
    pub fn exterior_derivative(&self) -> DifferentialForm {
        let chart = self.chart.clone();
        let mut out = DifferentialForm::zero(chart.clone(), self.degree + 1);
        for (idx, c) in &self.terms {
            for v in 0..chart.dim() {
                let dv = c.diff(&chart.coords()[v]);
                if dv.is_zero() {
                    continue;
                }
                let mut ext = Vec::with_capacity(idx.len() + 1);
                ext.push(v as u8);
                ext.extend_from_slice(idx);
                out.add_term(&ext, dv);
            }
        }
        out
    }

    /// Interior product with a vector field: graded antiderivation, degree
    /// k → k−1. Degree-0 input is an error.
    pub fn interior_product(&self, v: &VectorField) -> Result<DifferentialForm, FormError> {
        if !self.chart.same_coords(&v.chart) {
            return Err(FormError::ChartMismatch);
        }
        if self.degree == 0 {
            return Err(FormError::InteriorOfScalar);
        }
        let mut out = DifferentialForm::zero(self.chart.clone(), self.degree - 1);
        for (idx, c) in &self.terms {
            for (slot, &i) in idx.iter().enumerate() {
                let Some(comp) = v.comps.get(&i) else {
                    continue;
                };
                let sign = if slot % 2 == 0 { 1 } else { -1 };
                let rest: Vec<u8> = idx
                    .iter()
                    .enumerate()
                    .filter(|(s, _)| *s != slot)
                    .map(|(_, &j)| j)
                    .collect();
                let coeff = comp * c;
                out.add_term(&rest, if sign < 0 { -&coeff } else { coeff });
            }
        }
        Ok(out)
    }

    /// Lichnerowicz differential d_θ a = d a − θ ∧ a for a one-form θ.
    pub fn lichnerowicz(&self, theta: &DifferentialForm) -> Result<DifferentialForm, FormError> {
        self.check_compatible(theta)?;
        if theta.degree != 1 {
            return Err(FormError::NotAOneForm {
                degree: theta.degree,
            });
        }
        self.exterior_derivative().sub(&theta.wedge(self)?)
    }

    /// Slotwise contraction Σ_j dxʲ ∧ ι_{h_j} a against base-indexed
    /// horizontal fields. This is the tensor contraction ι_h used by the
    /// connection form of the HDW condition.
    pub fn contract_slotwise(
        &self,
        horizontals: &[(u8, VectorField)],
    ) -> Result<DifferentialForm, FormError> {
        if self.degree == 0 {
            return Err(FormError::InteriorOfScalar);
        }
        let mut out = DifferentialForm::zero(self.chart.clone(), self.degree);
        for (j, h) in horizontals {
            let inner = self.interior_product(h)?;
            let dxj = DifferentialForm::monomial(self.chart.clone(), &[*j], Expr::one())?;
            out = out.add(&dxj.wedge(&inner)?)?;
        }
        Ok(out)
    }

    /// Multiply every coefficient by a scalar factor (used for conformal
    /// rescalings e^{−σ}·Ω).
    pub fn scaled_by(&self, factor: &Expr) -> DifferentialForm {
        self.scale(factor)
    }

    /// Numeric snapshot of all coefficients at a point.
    pub fn eval_coefficients(&self, pt: &Point) -> Result<Vec<(Vec<u8>, f64)>, EvalError> {
        let mut out = Vec::with_capacity(self.terms.len());
        for (idx, c) in &self.terms {
            out.push((idx.clone(), c.eval(pt)?));
        }
        Ok(out)
    }

    /// Max |coefficient| over the given sample points; the numeric residual
    /// norm used by verifier reports.
    pub fn max_abs_on(&self, points: &[Point]) -> Result<f64, EvalError> {
        let mut max = 0.0f64;
        for pt in points {
            for (_, v) in self.eval_coefficients(pt)? {
                max = max.max(v.abs());
            }
        }
        Ok(max)
    }

    fn basis_label(&self, idx: &[u8]) -> String {
        if idx.is_empty() {
            return "1".to_string();
        }
        idx.iter()
            .map(|&i| format!("d{}", self.chart.coord_name(i)))
            .collect::<Vec<_>>()
            .join("∧")
    }

    /// Report serialization: one `(basis, coefficient)` pair per line.
    pub fn describe(&self) -> Vec<(String, String)> {
        self.terms
            .iter()
            .map(|(idx, c)| (self.basis_label(idx), c.to_string()))
            .collect()
    }
}

impl fmt::Debug for DifferentialForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(idx, c)| format!("({}) {}", c, self.basis_label(idx)))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl fmt::Display for DifferentialForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl PartialEq for DifferentialForm {
    fn eq(&self, other: &Self) -> bool {
        self.chart.same_coords(&other.chart)
            && self.degree == other.degree
            && self.terms == other.terms
    }
}

/// A vector field on a chart: coordinate components as expressions.
#[derive(Debug, Clone)]
pub struct VectorField {
    chart: Arc<ChartSpec>,
    comps: BTreeMap<u8, Expr>,
}

impl VectorField {
    pub fn new(chart: Arc<ChartSpec>) -> Self {
        VectorField {
            chart,
            comps: BTreeMap::new(),
        }
    }

    pub fn with_component(mut self, name: &str, e: Expr) -> Result<Self, FormError> {
        let idx = self
            .chart
            .index_of(name)
            .ok_or_else(|| FormError::UnknownCoordinate {
                name: name.to_string(),
            })?;
        if e.is_zero() {
            self.comps.remove(&idx);
        } else {
            self.comps.insert(idx, e);
        }
        Ok(self)
    }

    pub fn set_component_index(&mut self, idx: u8, e: Expr) {
        if e.is_zero() {
            self.comps.remove(&idx);
        } else {
            self.comps.insert(idx, e);
        }
    }

    pub fn component(&self, name: &str) -> Expr {
        self.chart
            .index_of(name)
            .and_then(|i| self.comps.get(&i).cloned())
            .unwrap_or_else(Expr::zero)
    }

    pub fn chart(&self) -> &Arc<ChartSpec> {
        &self.chart
    }

    pub fn components(&self) -> impl Iterator<Item = (&u8, &Expr)> {
        self.comps.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }
}
