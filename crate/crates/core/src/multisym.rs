//! The untwisted multisymplectic path, coded directly from the coordinate
//! displays rather than through the conformal constructors. The θ → 0 limit
//! of every conformal operation is compared against these.

use crate::bundle::{
    base_contraction, volume_basis, BundleError, Connection, HamiltonianData,
};
use crate::forms::{BundleCharts, DifferentialForm};
use crate::symexpr::Expr;
use std::collections::BTreeMap;

/// Ω_h = dH ∧ d_m x − dpⁱ_α ∧ duᵅ ∧ (∂ᵢ⌟d_m x), assembled term by term.
pub fn omega_h_direct(
    charts: &BundleCharts,
    ham: &HamiltonianData,
) -> Result<DifferentialForm, BundleError> {
    let chart = &charts.jet_dual;
    let dmx = volume_basis(chart);
    let dh = DifferentialForm::scalar(chart.clone(), ham.expr().clone()).exterior_derivative();
    let mut out = dh.wedge(&dmx)?;
    for i in 0..chart.base_dim() {
        let contraction = base_contraction(chart, i);
        for alpha in 0..chart.fiber_dim() {
            let dp = DifferentialForm::monomial(
                chart.clone(),
                &[chart.momentum_index(i, alpha)],
                Expr::one(),
            )?;
            let du = DifferentialForm::monomial(
                chart.clone(),
                &[chart.fiber_index(alpha)],
                Expr::one(),
            )?;
            out = out.sub(&dp.wedge(&du)?.wedge(&contraction)?)?;
        }
    }
    Ok(out)
}

/// The HDW connection: Γᵅᵢ = ∂H/∂pⁱ_α, trace Γʲ_{αj} = −∂H/∂uᵅ, diagonal
/// split, no Lee-form term.
pub fn hdw_connection(
    charts: &BundleCharts,
    ham: &HamiltonianData,
) -> Result<Connection, BundleError> {
    let chart = &charts.jet_dual;
    let m = chart.base_dim();
    let n = chart.fiber_dim();
    let mut fiber = vec![vec![Expr::zero(); n]; m];
    for j in 0..m {
        for alpha in 0..n {
            fiber[j][alpha] = ham.d_momentum(charts, j, alpha);
        }
    }
    let inv_m = Expr::one().div(&Expr::from_int(m as i64)).expect("m > 0");
    let mut momentum = vec![vec![vec![Expr::zero(); n]; m]; m];
    for alpha in 0..n {
        let share = &(-&ham.d_fiber(charts, alpha)) * &inv_m;
        for j in 0..m {
            momentum[j][j][alpha] = share.clone();
        }
    }
    Connection::new(chart.clone(), fiber, momentum)
}

/// d(h∘γ) for a candidate section γⁱ_α(x, u): the closedness condition of the
/// untwisted Hamilton–Jacobi theorem, with h∘γ built from its coordinate
/// display −H∘γ d_m x + γⁱ_α duᵅ ∧ (∂ᵢ⌟d_m x).
pub fn closed_hj_form(
    charts: &BundleCharts,
    ham: &HamiltonianData,
    gamma: &[Vec<Expr>],
) -> Result<DifferentialForm, BundleError> {
    let chart = &charts.total;
    let jet = &charts.jet_dual;
    let m = charts.base_dim();
    let n = charts.fiber_dim();
    let mut subst_map = BTreeMap::new();
    for i in 0..m {
        for alpha in 0..n {
            subst_map.insert(jet.momentum_name(i, alpha).to_string(), gamma[i][alpha].clone());
        }
    }
    let h_composed = ham.expr().subst(&subst_map)?;
    let mut form = volume_basis(chart).scale(&-&h_composed);
    for i in 0..m {
        let contraction = base_contraction(chart, i);
        for alpha in 0..n {
            let du = DifferentialForm::monomial(
                chart.clone(),
                &[chart.fiber_index(alpha)],
                Expr::one(),
            )?;
            form = form.add(&du.wedge(&contraction)?.scale(&gamma[i][alpha]))?;
        }
    }
    Ok(form.exterior_derivative())
}
