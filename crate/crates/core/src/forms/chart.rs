//! Coordinate charts for the bundles the theory lives on.
//!
//! A chart fixes an ordered list of coordinate names. Base coordinates come
//! first, then fiber coordinates `u1..uN`, then (on the multimomentum chart)
//! the affine coordinate `p`, then the momenta `p<base>_<α>` in row-major
//! `(i, α)` order. All forms, vector fields and sections refer to coordinates
//! through these indices.

use crate::symexpr::{Expr, ExprError};
use std::collections::BTreeSet;
use std::sync::Arc;

use super::FormError;

/// Which bundle the chart models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartKind {
    /// The total space E with coordinates (xⁱ, uᵅ).
    Total,
    /// The quotient J¹π* with coordinates (xⁱ, uᵅ, pⁱ_α).
    JetDual,
    /// The multimomentum bundle Λᵐ₂E with coordinates (xⁱ, uᵅ, p, pⁱ_α).
    MultiMomentum,
}

#[derive(Debug, Clone)]
pub struct ChartSpec {
    kind: ChartKind,
    base: Vec<String>,
    fiber: Vec<String>,
    affine: Option<String>,
    momenta: Vec<Vec<String>>,
    metric: Vec<Vec<Expr>>,
    volume: Expr,
    coords: Vec<String>,
}

impl ChartSpec {
    fn build(
        kind: ChartKind,
        base: Vec<String>,
        n_fields: usize,
        metric: Vec<Vec<Expr>>,
        volume: Expr,
    ) -> Result<Arc<Self>, FormError> {
        let fiber: Vec<String> = (1..=n_fields).map(|a| format!("u{a}")).collect();
        let affine = match kind {
            ChartKind::MultiMomentum => Some("p".to_string()),
            _ => None,
        };
        let momenta: Vec<Vec<String>> = match kind {
            ChartKind::Total => Vec::new(),
            _ => base
                .iter()
                .map(|b| (1..=n_fields).map(|a| format!("p{b}_{a}")).collect())
                .collect(),
        };
        let mut coords = base.clone();
        coords.extend(fiber.iter().cloned());
        if let Some(p) = &affine {
            coords.push(p.clone());
        }
        for row in &momenta {
            coords.extend(row.iter().cloned());
        }
        let unique: BTreeSet<&String> = coords.iter().collect();
        if unique.len() != coords.len() {
            return Err(FormError::DuplicateCoordinate);
        }
        let m = base.len();
        if metric.len() != m || metric.iter().any(|row| row.len() != m) {
            return Err(FormError::MetricShape { expected: m });
        }
        for i in 0..m {
            for j in (i + 1)..m {
                if !(&metric[i][j] - &metric[j][i]).is_zero() {
                    return Err(FormError::MetricAsymmetric { i, j });
                }
            }
        }
        Ok(Arc::new(ChartSpec {
            kind,
            base,
            fiber,
            affine,
            momenta,
            metric,
            volume,
            coords,
        }))
    }

    pub fn kind(&self) -> ChartKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn base_dim(&self) -> usize {
        self.base.len()
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn coord_name(&self, idx: u8) -> &str {
        &self.coords[idx as usize]
    }

    pub fn index_of(&self, name: &str) -> Option<u8> {
        self.coords.iter().position(|c| c == name).map(|i| i as u8)
    }

    pub fn base_names(&self) -> &[String] {
        &self.base
    }

    pub fn fiber_names(&self) -> &[String] {
        &self.fiber
    }

    pub fn base_index(&self, i: usize) -> u8 {
        debug_assert!(i < self.base.len());
        i as u8
    }

    pub fn fiber_index(&self, alpha: usize) -> u8 {
        debug_assert!(alpha < self.fiber.len());
        (self.base.len() + alpha) as u8
    }

    pub fn affine_index(&self) -> Option<u8> {
        self.affine
            .as_ref()
            .map(|_| (self.base.len() + self.fiber.len()) as u8)
    }

    pub fn affine_name(&self) -> Option<&str> {
        self.affine.as_deref()
    }

    /// Index of pⁱ_α.
    pub fn momentum_index(&self, i: usize, alpha: usize) -> u8 {
        debug_assert!(!self.momenta.is_empty());
        let offset = self.base.len() + self.fiber.len() + usize::from(self.affine.is_some());
        (offset + i * self.fiber.len() + alpha) as u8
    }

    pub fn momentum_name(&self, i: usize, alpha: usize) -> &str {
        &self.momenta[i][alpha]
    }

    pub fn has_momenta(&self) -> bool {
        !self.momenta.is_empty()
    }

    pub fn metric(&self) -> &[Vec<Expr>] {
        &self.metric
    }

    pub fn volume_factor(&self) -> &Expr {
        &self.volume
    }

    /// Charts are interchangeable for form arithmetic iff they list the same
    /// coordinates in the same order.
    pub fn same_coords(&self, other: &ChartSpec) -> bool {
        self.coords == other.coords
    }

    /// Partial derivative restricted to declared chart variables.
    pub fn diff(&self, e: &Expr, var: &str) -> Result<Expr, ExprError> {
        if self.index_of(var).is_none() {
            return Err(ExprError::UnknownVariable {
                name: var.to_string(),
            });
        }
        Ok(e.diff(var))
    }
}

/// The chart triple (E, J¹π*, Λᵐ₂E) over one base, sharing coordinate names.
#[derive(Debug, Clone)]
pub struct BundleCharts {
    pub total: Arc<ChartSpec>,
    pub jet_dual: Arc<ChartSpec>,
    pub multimomentum: Arc<ChartSpec>,
}

impl BundleCharts {
    fn from_base(
        base: Vec<String>,
        n_fields: usize,
        metric: Option<Vec<Vec<Expr>>>,
        volume: Option<Expr>,
    ) -> Result<Self, FormError> {
        let m = base.len();
        let metric = metric.unwrap_or_else(|| {
            (0..m)
                .map(|i| {
                    (0..m)
                        .map(|j| if i == j { Expr::one() } else { Expr::zero() })
                        .collect()
                })
                .collect()
        });
        let volume = volume.unwrap_or_else(Expr::one);
        Ok(BundleCharts {
            total: ChartSpec::build(
                ChartKind::Total,
                base.clone(),
                n_fields,
                metric.clone(),
                volume.clone(),
            )?,
            jet_dual: ChartSpec::build(
                ChartKind::JetDual,
                base.clone(),
                n_fields,
                metric.clone(),
                volume.clone(),
            )?,
            multimomentum: ChartSpec::build(
                ChartKind::MultiMomentum,
                base,
                n_fields,
                metric,
                volume,
            )?,
        })
    }

    /// Time-dependent mechanics: m = 1 with base coordinate `t`.
    pub fn mechanics(n_fields: usize) -> Self {
        Self::from_base(vec!["t".into()], n_fields, None, None)
            .expect("mechanics chart construction cannot fail")
    }

    /// Unsliced field chart over base `x, y, z` (m ≤ 3 here).
    pub fn field(
        m: usize,
        n_fields: usize,
        metric: Option<Vec<Vec<Expr>>>,
        volume: Option<Expr>,
    ) -> Result<Self, FormError> {
        let names = ["x", "y", "z"];
        assert!((1..=3).contains(&m), "field charts cover 1 <= m <= 3");
        let base = names[..m].iter().map(|s| s.to_string()).collect();
        Self::from_base(base, n_fields, metric, volume)
    }

    /// Time-sliced chart over base `t, x, y` for the Cauchy formulation
    /// (n spatial dimensions, m = n + 1).
    pub fn cauchy(
        n_spatial: usize,
        n_fields: usize,
        metric: Option<Vec<Vec<Expr>>>,
        volume: Option<Expr>,
    ) -> Result<Self, FormError> {
        let names = ["t", "x", "y"];
        assert!((1..=2).contains(&n_spatial), "cauchy charts cover 1 <= n <= 2");
        let base = names[..=n_spatial].iter().map(|s| s.to_string()).collect();
        Self::from_base(base, n_fields, metric, volume)
    }

    pub fn base_dim(&self) -> usize {
        self.total.base_dim()
    }

    pub fn fiber_dim(&self) -> usize {
        self.total.fiber_dim()
    }
}
