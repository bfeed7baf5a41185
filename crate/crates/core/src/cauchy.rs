//! Discretized Cauchy-data-space formulation: quadrature of integrated forms
//! over the Cauchy surface, precosymplectic checks, and the
//! infinite-dimensional HDW/HJ conditions.
//!
//! A point of the embedding space is a [`FieldState`]; a tangent element is a
//! per-node vector into the jet chart ([`TangentSection`]). A (k+n)-form α on
//! the chart integrates to a k-form on the embedding space by contracting
//! with k tangents, pulling back along the embedding (periodic central
//! differences supply the embedding Jacobian), and summing node values with
//! the uniform quadrature weight. Node contributions are reduced by pairwise
//! summation so the result does not depend on reduction order.

use crate::bundle::{eta, BundleError, HamiltonianData, LeeForm};
use crate::dynamics::{
    fill_state_slots, state_slot_count, CauchyOps, DynError, FieldState, GridSpec, Residual,
};
use crate::forms::{BundleCharts, DifferentialForm};
use crate::hj::GammaSection;
use crate::symexpr::CompiledExpr;
use crate::util::{pairwise_sum, SplitMix64};
use std::collections::BTreeMap;

#[derive(Debug, Clone, thiserror::Error)]
pub enum CauchyError {
    #[error("form of degree {got} cannot pair {tangents} tangents over an n = {n} surface")]
    DegreeMismatch {
        got: usize,
        tangents: usize,
        n: usize,
    },
    #[error("tangent sections must share the state's grid")]
    GridMismatch,
    #[error("need at least {needed} states")]
    TooFewStates { needed: usize },
    #[error(transparent)]
    Dyn(#[from] DynError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Hj(#[from] crate::hj::HjError),
    #[error(transparent)]
    Expr(#[from] crate::symexpr::ExprError),
}

/// A tangent element of the embedding space at some state: per-node
/// components over the jet-chart coordinates. Missing components are zero.
#[derive(Debug, Clone)]
pub struct TangentSection {
    nodes: usize,
    comps: BTreeMap<u8, Vec<f64>>,
}

impl TangentSection {
    pub fn new(nodes: usize) -> Self {
        TangentSection {
            nodes,
            comps: BTreeMap::new(),
        }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn set_constant(&mut self, coord: u8, value: f64) {
        if value == 0.0 {
            self.comps.remove(&coord);
        } else {
            self.comps.insert(coord, vec![value; self.nodes]);
        }
    }

    pub fn set_profile(&mut self, coord: u8, values: Vec<f64>) {
        assert_eq!(values.len(), self.nodes);
        self.comps.insert(coord, values);
    }

    pub fn component(&self, coord: u8, node: usize) -> f64 {
        self.comps.get(&coord).map(|v| v[node]).unwrap_or(0.0)
    }

    pub fn components(&self) -> impl Iterator<Item = (&u8, &Vec<f64>)> {
        self.comps.iter()
    }

    /// Sum of two tangents (used by the linearity checks).
    pub fn add(&self, other: &TangentSection) -> TangentSection {
        let mut out = self.clone();
        for (coord, values) in &other.comps {
            let entry = out
                .comps
                .entry(*coord)
                .or_insert_with(|| vec![0.0; self.nodes]);
            for (e, v) in entry.iter_mut().zip(values) {
                *e += v;
            }
        }
        out
    }
}

/// Per-axis central-difference tables of every chart field, indexed by the
/// chart coordinate they differentiate; the embedding Jacobian of the state.
struct EmbeddingJacobian {
    n_spatial: usize,
    n_fields: usize,
    /// d(coord)/dx_a at each node: `tables[coord_idx][a][node]`; base
    /// coordinates are handled analytically.
    tables: Vec<Vec<Vec<f64>>>,
}

impl EmbeddingJacobian {
    fn new(state: &FieldState) -> Self {
        let grid = state.grid;
        let n_spatial = grid.spatial_dim();
        let n_fields = state.n_fields();
        let dim = state_slot_count(n_spatial, n_fields);
        let mut tables = vec![Vec::new(); dim];
        let fiber_base = 1 + n_spatial;
        for alpha in 0..n_fields {
            let mut per_axis = Vec::with_capacity(n_spatial);
            for a in 0..n_spatial {
                per_axis.push(grid.central_diff(&state.sigma[alpha], a));
            }
            tables[fiber_base + alpha] = per_axis;
        }
        let pt_base = fiber_base + n_fields;
        for alpha in 0..n_fields {
            let mut per_axis = Vec::with_capacity(n_spatial);
            for a in 0..n_spatial {
                per_axis.push(grid.central_diff(&state.pt[alpha], a));
            }
            tables[pt_base + alpha] = per_axis;
        }
        let sp_base = pt_base + n_fields;
        for b in 0..n_spatial {
            for alpha in 0..n_fields {
                let mut per_axis = Vec::with_capacity(n_spatial);
                for a in 0..n_spatial {
                    per_axis.push(grid.central_diff(&state.psp[b][alpha], a));
                }
                tables[sp_base + b * n_fields + alpha] = per_axis;
            }
        }
        EmbeddingJacobian {
            n_spatial,
            n_fields,
            tables,
        }
    }

    /// d(coord)/dx_a at the node. Base t is constant on the slice; spatial
    /// base coordinates are the identity.
    fn entry(&self, coord: u8, a: usize, node: usize) -> f64 {
        let c = coord as usize;
        if c == 0 {
            return 0.0;
        }
        if c <= self.n_spatial {
            return if c - 1 == a { 1.0 } else { 0.0 };
        }
        let _ = self.n_fields;
        self.tables[c][a][node]
    }
}

fn det_small(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        0 => 1.0,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            // n ≤ 2 at desk scale; Laplace expansion keeps this total
            let mut acc = 0.0;
            for (j, lead) in m[0].iter().enumerate() {
                if *lead == 0.0 {
                    continue;
                }
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(k, _)| *k != j)
                            .map(|(_, v)| *v)
                            .collect()
                    })
                    .collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * lead * det_small(&minor);
            }
            acc
        }
    }
}

/// Integrated-form evaluation: contract `alpha` (degree k+n on the jet chart)
/// with the k tangents, pull back along the state's embedding, integrate over
/// the unit-measure Cauchy surface.
pub fn integrate_form(
    charts: &BundleCharts,
    alpha: &DifferentialForm,
    state: &FieldState,
    tangents: &[&TangentSection],
) -> Result<f64, CauchyError> {
    let grid = state.grid;
    let n = grid.spatial_dim();
    let k = tangents.len();
    if alpha.degree() != k + n {
        return Err(CauchyError::DegreeMismatch {
            got: alpha.degree(),
            tangents: k,
            n,
        });
    }
    for t in tangents {
        if t.nodes() != grid.total_nodes() {
            return Err(CauchyError::GridMismatch);
        }
    }
    let order: Vec<String> = charts.jet_dual.coords().to_vec();
    let mut compiled: Vec<(Vec<u8>, CompiledExpr)> = Vec::new();
    for (idx, coeff) in alpha.terms() {
        compiled.push((idx.clone(), CompiledExpr::compile(coeff, &order)?));
    }
    let jac = EmbeddingJacobian::new(state);
    let n_fields = state.n_fields();
    let mut slots = vec![0.0; state_slot_count(n, n_fields)];
    let weight = grid.weight();
    let nodes = grid.total_nodes();
    let mut contributions = vec![0.0; nodes];
    for node in 0..nodes {
        fill_state_slots(n, n_fields, &mut slots, state, node);
        // numeric form at this node
        let mut terms: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
        for (idx, c) in &compiled {
            let v = c.eval(&slots);
            if v != 0.0 {
                *terms.entry(idx.clone()).or_insert(0.0) += v;
            }
        }
        // contract with the tangents in order: ι_{X_k} … ι_{X_1} α
        for tangent in tangents {
            let mut next: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
            for (idx, v) in &terms {
                for (slot_pos, coord) in idx.iter().enumerate() {
                    let comp = tangent.component(*coord, node);
                    if comp == 0.0 {
                        continue;
                    }
                    let sign = if slot_pos % 2 == 0 { 1.0 } else { -1.0 };
                    let rest: Vec<u8> = idx
                        .iter()
                        .enumerate()
                        .filter(|(s, _)| *s != slot_pos)
                        .map(|(_, c)| *c)
                        .collect();
                    *next.entry(rest).or_insert(0.0) += sign * comp * v;
                }
            }
            terms = next;
        }
        // embedding pullback: each remaining n-subset contributes its
        // Jacobian determinant against dx¹∧…∧dxⁿ
        let mut value = 0.0;
        for (idx, v) in &terms {
            if *v == 0.0 {
                continue;
            }
            let mat: Vec<Vec<f64>> = idx
                .iter()
                .map(|&coord| (0..n).map(|a| jac.entry(coord, a, node)).collect())
                .collect();
            value += v * det_small(&mat);
        }
        contributions[node] = value * weight;
    }
    Ok(pairwise_sum(&contributions))
}

/// The horizontal-lift tangent X̃^𝐡 at a state: ∂/∂t component 1, fiber
/// components Γᵅ₀ = ∂H/∂pᵗ_α, and the pᵗ_α component completed from the
/// state as the trace Christoffel composed with the spatial divergence,
/// −Σ_a ∂pᵃ_α/∂xᵃ − ∂H/∂uᵅ + θᵢpⁱ_α. The lcHDW condition fixes only the
/// trace of Γⁱ_{αj}; this completion is the one against which the
/// integrated-form kernel identities close (the spatial-momentum components
/// drop out of every contraction over the surface and are set to zero).
pub fn horizontal_lift_tangent(
    charts: &BundleCharts,
    ham: &HamiltonianData,
    theta: &LeeForm,
    state: &FieldState,
) -> Result<TangentSection, CauchyError> {
    let ops = CauchyOps::new(charts, ham, theta)?;
    let grid = state.grid;
    let nodes = grid.total_nodes();
    let chart = &charts.jet_dual;
    let mut out = TangentSection::new(nodes);
    out.set_constant(chart.base_index(0), 1.0);
    let mut slots = vec![0.0; ops.slot_count()];
    let mut fiber = vec![vec![0.0; nodes]; ops.n_fields];
    let mut pt = vec![vec![0.0; nodes]; ops.n_fields];
    let mut div = vec![vec![0.0; nodes]; ops.n_fields];
    for a in 0..ops.n_spatial {
        for alpha in 0..ops.n_fields {
            let d = grid.central_diff(&state.psp[a][alpha], a);
            for node in 0..nodes {
                div[alpha][node] += d[node];
            }
        }
    }
    for node in 0..nodes {
        ops.fill_slots(&mut slots, state, node);
        for alpha in 0..ops.n_fields {
            fiber[alpha][node] = ops.dh_dpt[alpha].eval(&slots);
            let mut twist = ops.theta[0].eval(&slots) * state.pt[alpha][node];
            for a in 0..ops.n_spatial {
                twist += ops.theta[a + 1].eval(&slots) * state.psp[a][alpha][node];
            }
            pt[alpha][node] = -div[alpha][node] - ops.dh_du[alpha].eval(&slots) + twist;
        }
    }
    for alpha in 0..ops.n_fields {
        out.set_profile(chart.fiber_index(alpha), fiber[alpha].clone());
        out.set_profile(chart.momentum_index(0, alpha), pt[alpha].clone());
    }
    Ok(out)
}

/// A reproducible set of vertical probe tangents: per vertical coordinate,
/// one constant profile and `extra` low-mode Fourier profiles.
pub fn vertical_probes(
    charts: &BundleCharts,
    grid: GridSpec,
    extra: usize,
    seed: u64,
) -> Vec<TangentSection> {
    let chart = &charts.jet_dual;
    let n = grid.spatial_dim();
    let n_fields = charts.fiber_dim();
    let nodes = grid.total_nodes();
    let mut rng = SplitMix64::new(seed);
    let mut vertical_coords: Vec<u8> = Vec::new();
    for alpha in 0..n_fields {
        vertical_coords.push(chart.fiber_index(alpha));
    }
    for i in 0..=n {
        for alpha in 0..n_fields {
            vertical_coords.push(chart.momentum_index(i, alpha));
        }
    }
    let tau = std::f64::consts::TAU;
    let mut probes = Vec::new();
    for &coord in &vertical_coords {
        let mut constant = TangentSection::new(nodes);
        constant.set_constant(coord, 1.0);
        probes.push(constant);
        for _ in 0..extra {
            let a0 = rng.range_f64(-1.0, 1.0);
            let mut modes = Vec::new();
            for _ in 0..n {
                let per_axis: Vec<(f64, f64)> = (0..3)
                    .map(|_| (rng.range_f64(-1.0, 1.0), rng.range_f64(-1.0, 1.0)))
                    .collect();
                modes.push(per_axis);
            }
            // cross modes so multi-axis surfaces see product-profile
            // integrands, which separable sums are orthogonal to
            let cross: Vec<(f64, f64, f64)> = if n >= 2 {
                (0..2)
                    .map(|_| {
                        (
                            rng.range_f64(-1.0, 1.0),
                            rng.range_f64(0.0, tau),
                            rng.range_f64(0.0, tau),
                        )
                    })
                    .collect()
            } else {
                Vec::new()
            };
            let mut profile = vec![0.0; nodes];
            for (node, value) in profile.iter_mut().enumerate() {
                let mut v = a0;
                for (axis, per_axis) in modes.iter().enumerate() {
                    let x = grid.position(node, axis);
                    for (k, (ak, bk)) in per_axis.iter().enumerate() {
                        let phase = tau * (k + 1) as f64 * x;
                        v += ak * phase.cos() + bk * phase.sin();
                    }
                }
                if n >= 2 {
                    let x = grid.position(node, 0);
                    let y = grid.position(node, 1);
                    for (c, phase_x, phase_y) in &cross {
                        v += c * (tau * x + phase_x).cos() * (tau * y + phase_y).cos();
                    }
                }
                *value = v;
            }
            let mut t = TangentSection::new(nodes);
            t.set_profile(coord, profile);
            probes.push(t);
        }
    }
    probes
}

/// Precosymplectic pairing residuals at a state:
/// |(Ω̃_θ)_h(X̃^𝐡, Z̃)| for each probe Z̃, and |η̃(X̃^𝐡) − 1|.
pub fn check_precosymplectic(
    charts: &BundleCharts,
    ham: &HamiltonianData,
    theta: &LeeForm,
    state: &FieldState,
    probes: &[TangentSection],
) -> Result<Residual, CauchyError> {
    let omega = crate::bundle::omega_h(charts, ham, theta)?;
    let lift = horizontal_lift_tangent(charts, ham, theta, state)?;
    let mut out = Residual::default();
    let eta_form = eta(&charts.jet_dual);
    let eta_pairing = integrate_form(charts, &eta_form, state, &[&lift])?;
    out.push("eta", eta_pairing - 1.0);
    for (k, probe) in probes.iter().enumerate() {
        let v = integrate_form(charts, &omega, state, &[&lift, probe])?;
        out.push(format!("probe[{k}]"), v);
    }
    Ok(out)
}

/// φ̇ tangents along a dumped trajectory: second-order three-point stencils
/// (central at interior dumps, one-sided at the ends), correct for uneven
/// dump spacing as well.
pub fn trajectory_velocities(traj: &[FieldState]) -> Result<Vec<TangentSection>, CauchyError> {
    if traj.len() < 3 {
        return Err(CauchyError::TooFewStates { needed: 3 });
    }
    let grid = traj[0].grid;
    let nodes = grid.total_nodes();
    let n_fields = traj[0].n_fields();
    let n = grid.spatial_dim();
    // Lagrange derivative weights of the 3-point stencil (ta, tb, tc) at t
    let weights = |t: f64, ta: f64, tb: f64, tc: f64| -> (f64, f64, f64) {
        (
            (2.0 * t - tb - tc) / ((ta - tb) * (ta - tc)),
            (2.0 * t - ta - tc) / ((tb - ta) * (tb - tc)),
            (2.0 * t - ta - tb) / ((tc - ta) * (tc - tb)),
        )
    };
    let mut out = Vec::with_capacity(traj.len());
    let diff = |k: usize, pick: &dyn Fn(&FieldState) -> &Vec<f64>| -> Vec<f64> {
        let last = traj.len() - 1;
        let (a, b, c) = if k == 0 {
            (0, 1, 2)
        } else if k == last {
            (last - 2, last - 1, last)
        } else {
            (k - 1, k, k + 1)
        };
        let (wa, wb, wc) = weights(traj[k].t, traj[a].t, traj[b].t, traj[c].t);
        let (fa, fb, fc) = (pick(&traj[a]), pick(&traj[b]), pick(&traj[c]));
        let mut d = vec![0.0; nodes];
        for i in 0..nodes {
            d[i] = wa * fa[i] + wb * fb[i] + wc * fc[i];
        }
        d
    };
    for k in 0..traj.len() {
        let mut v = TangentSection::new(nodes);
        v.set_constant(0, 1.0); // d(slice time)/dt
        for alpha in 0..n_fields {
            let a = alpha;
            v.set_profile(
                (1 + n + alpha) as u8,
                diff(k, &move |s: &FieldState| &s.sigma[a]),
            );
            v.set_profile(
                (1 + n + n_fields + alpha) as u8,
                diff(k, &move |s: &FieldState| &s.pt[a]),
            );
            for b in 0..n {
                v.set_profile(
                    (1 + n + 2 * n_fields + b * n_fields + alpha) as u8,
                    diff(k, &move |s: &FieldState| &s.psp[b][a]),
                );
            }
        }
        out.push(v);
    }
    Ok(out)
}

/// Residual of the integrated Hamilton equation ι_{φ̇}(Ω̃_θ)_h = 0 along a
/// trajectory: max over dumps and probes of |(Ω̃_θ)_h(φ̇, Z̃)|.
pub fn infinite_hdw_residual(
    charts: &BundleCharts,
    traj: &[FieldState],
    ham: &HamiltonianData,
    theta: &LeeForm,
    probes: &[TangentSection],
) -> Result<Residual, CauchyError> {
    let velocities = trajectory_velocities(traj)?;
    let omega = crate::bundle::omega_h(charts, ham, theta)?;
    let mut out = Residual::default();
    for (k, state) in traj.iter().enumerate() {
        let mut worst = 0.0f64;
        for probe in probes {
            let v = integrate_form(charts, &omega, state, &[&velocities[k], probe])?;
            worst = worst.max(v.abs());
        }
        out.push(format!("t={:.6}", state.t), worst);
    }
    Ok(out)
}

/// Composition γ̃(σ_Σ): keep the σ-part of the state, fill every momentum
/// with γⁱ_α(t, x, σ(x)).
pub fn compose_gamma_state(
    charts: &BundleCharts,
    g: &GammaSection,
    state: &FieldState,
) -> Result<FieldState, CauchyError> {
    let grid = state.grid;
    let n = grid.spatial_dim();
    let n_fields = state.n_fields();
    let order: Vec<String> = charts.total.coords().to_vec();
    let mut compiled = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut row = Vec::with_capacity(n_fields);
        for alpha in 0..n_fields {
            row.push(CompiledExpr::compile(g.component(i, alpha), &order)?);
        }
        compiled.push(row);
    }
    let mut composed = state.clone();
    let mut slots = vec![0.0; order.len()];
    for node in 0..grid.total_nodes() {
        slots[0] = state.t;
        for a in 0..n {
            slots[1 + a] = grid.position(node, a);
        }
        for alpha in 0..n_fields {
            slots[1 + n + alpha] = state.sigma[alpha][node];
        }
        for alpha in 0..n_fields {
            composed.pt[alpha][node] = compiled[0][alpha].eval(&slots);
            for a in 0..n {
                composed.psp[a][alpha][node] = compiled[a + 1][alpha].eval(&slots);
            }
        }
    }
    Ok(composed)
}

/// Tγ̃ push-forward of a tangent to Ẽ (components over t and uᵅ): the
/// momentum components pick up ∂γⁱ_α/∂t·ṫ + ∂γⁱ_α/∂uᵝ·ξᵝ, evaluated along
/// the embedded section.
pub fn push_tangent_through_gamma(
    charts: &BundleCharts,
    g: &GammaSection,
    state: &FieldState,
    base_speed: f64,
    fiber_profiles: &[Vec<f64>],
) -> Result<TangentSection, CauchyError> {
    let grid = state.grid;
    let nodes = grid.total_nodes();
    let n = grid.spatial_dim();
    let n_fields = state.n_fields();
    assert_eq!(fiber_profiles.len(), n_fields);
    let chart = &charts.jet_dual;
    let order: Vec<String> = charts.total.coords().to_vec();
    let mut out = TangentSection::new(nodes);
    if base_speed != 0.0 {
        out.set_constant(chart.base_index(0), base_speed);
    }
    for alpha in 0..n_fields {
        out.set_profile(chart.fiber_index(alpha), fiber_profiles[alpha].clone());
    }
    let mut slots = vec![0.0; order.len()];
    for i in 0..=n {
        for alpha in 0..n_fields {
            let dt_part = CompiledExpr::compile(&g.component(i, alpha).diff("t"), &order)?;
            let mut du_parts = Vec::with_capacity(n_fields);
            for beta in 0..n_fields {
                du_parts.push(CompiledExpr::compile(
                    &g.component(i, alpha)
                        .diff(&charts.total.fiber_names()[beta]),
                    &order,
                )?);
            }
            let mut profile = vec![0.0; nodes];
            for node in 0..nodes {
                slots[0] = state.t;
                for a in 0..n {
                    slots[1 + a] = grid.position(node, a);
                }
                for beta in 0..n_fields {
                    slots[1 + n + beta] = state.sigma[beta][node];
                }
                let mut v = base_speed * dt_part.eval(&slots);
                for beta in 0..n_fields {
                    v += du_parts[beta].eval(&slots) * fiber_profiles[beta][node];
                }
                profile[node] = v;
            }
            out.set_profile(chart.momentum_index(i, alpha), profile);
        }
    }
    Ok(out)
}

/// The two residuals of the infinite-dimensional HJ theorem for a candidate
/// γ: (i) the pullback γ̃*(Ω̃_θ)_h on pairs of lifted probes, and (ii) the
/// contraction along the γ̃-pushed reduced-connection lift against vertical
/// probes, both on the composed states.
pub fn hj_infinite_check(
    charts: &BundleCharts,
    g: &GammaSection,
    ham: &HamiltonianData,
    theta: &LeeForm,
    states: &[FieldState],
    seed: u64,
) -> Result<(Residual, Residual), CauchyError> {
    if states.is_empty() {
        return Err(CauchyError::TooFewStates { needed: 1 });
    }
    let omega = crate::bundle::omega_h(charts, ham, theta)?;
    let grid = states[0].grid;
    let nodes = grid.total_nodes();
    let n = grid.spatial_dim();
    let n_fields = states[0].n_fields();
    let mut rng = SplitMix64::new(seed);
    let tau = std::f64::consts::TAU;
    let profile = |rng: &mut SplitMix64| -> Vec<f64> {
        let a0 = rng.range_f64(-1.0, 1.0);
        let a1 = rng.range_f64(-1.0, 1.0);
        let b1 = rng.range_f64(-1.0, 1.0);
        (0..nodes)
            .map(|node| {
                let x = grid.position(node, 0);
                a0 + a1 * (tau * x).cos() + b1 * (tau * x).sin()
            })
            .collect()
    };
    let mut part_i = Residual::default();
    let mut part_ii = Residual::default();
    let probes = vertical_probes(charts, grid, 1, seed ^ 0x9e37_79b9);
    for (si, state) in states.iter().enumerate() {
        let composed = compose_gamma_state(charts, g, state)?;
        // (i): pairs of Ẽ-tangent probes lifted through Tγ̃
        for pair in 0..3 {
            let mk = |speed: f64, rng: &mut SplitMix64| -> Result<TangentSection, CauchyError> {
                let profiles: Vec<Vec<f64>> = (0..n_fields).map(|_| profile(rng)).collect();
                push_tangent_through_gamma(charts, g, state, speed, &profiles)
            };
            let x1 = mk(if pair == 0 { 1.0 } else { 0.0 }, &mut rng)?;
            let x2 = mk(if pair == 2 { 1.0 } else { 0.0 }, &mut rng)?;
            let v = integrate_form(charts, &omega, &composed, &[&x1, &x2])?;
            part_i.push(format!("state[{si}] pair[{pair}]"), v);
        }
        // (ii): the reduced-connection lift through Tγ̃ against the probes
        let mut slope_profiles = Vec::with_capacity(n_fields);
        let order: Vec<String> = charts.jet_dual.coords().to_vec();
        let mut slots = vec![0.0; state_slot_count(n, n_fields)];
        for alpha in 0..n_fields {
            let slope = CompiledExpr::compile(&ham.d_momentum(charts, 0, alpha), &order)?;
            let mut values = vec![0.0; nodes];
            for node in 0..nodes {
                fill_state_slots(n, n_fields, &mut slots, &composed, node);
                values[node] = slope.eval(&slots);
            }
            slope_profiles.push(values);
        }
        let lifted = push_tangent_through_gamma(charts, g, state, 1.0, &slope_profiles)?;
        let mut worst = 0.0f64;
        for probe in &probes {
            let v = integrate_form(charts, &omega, &composed, &[&lifted, probe])?;
            worst = worst.max(v.abs());
        }
        part_ii.push(format!("state[{si}]"), worst);
    }
    Ok((part_i, part_ii))
}

/// Node-wise values of the coordinate bracket from the HJ proof expansion:
///
/// −Σ_a d/dxᵃ(γᵃ_α ∘ σ) − ∂γᵗ_α/∂t − ∂γᵗ_α/∂uᵝ Γᵝ₀ − ∂H/∂uᵅ + θᵢpⁱ_α,
///
/// the integrand multiplying a uᵅ-vertical probe in residual (ii); the
/// quadrature route is cross-checked against this in the test suite.
pub fn hj_coordinate_bracket(
    charts: &BundleCharts,
    g: &GammaSection,
    ham: &HamiltonianData,
    theta: &LeeForm,
    state: &FieldState,
) -> Result<Vec<Vec<f64>>, CauchyError> {
    let grid = state.grid;
    let nodes = grid.total_nodes();
    let n = grid.spatial_dim();
    let n_fields = state.n_fields();
    let composed = compose_gamma_state(charts, g, state)?;
    let order: Vec<String> = charts.jet_dual.coords().to_vec();
    let mut slots = vec![0.0; state_slot_count(n, n_fields)];
    let fiber = charts.total.fiber_names().to_vec();
    let mut out = vec![vec![0.0; nodes]; n_fields];
    // spatial divergence of the composed spatial momenta
    let mut div = vec![vec![0.0; nodes]; n_fields];
    for a in 0..n {
        for alpha in 0..n_fields {
            let d = grid.central_diff(&composed.psp[a][alpha], a);
            for node in 0..nodes {
                div[alpha][node] += d[node];
            }
        }
    }
    for alpha in 0..n_fields {
        let dgt_dt = CompiledExpr::compile(&g.component(0, alpha).diff("t"), &order)?;
        let mut dgt_du = Vec::new();
        for beta in 0..n_fields {
            dgt_du.push(CompiledExpr::compile(
                &g.component(0, alpha).diff(&fiber[beta]),
                &order,
            )?);
        }
        let dh_du = CompiledExpr::compile(&ham.d_fiber(charts, alpha), &order)?;
        let mut slopes = Vec::new();
        for beta in 0..n_fields {
            slopes.push(CompiledExpr::compile(
                &ham.d_momentum(charts, 0, beta),
                &order,
            )?);
        }
        let mut theta_c = Vec::new();
        for i in 0..=n {
            theta_c.push(CompiledExpr::compile(theta.component(i), &order)?);
        }
        for node in 0..nodes {
            fill_state_slots(n, n_fields, &mut slots, &composed, node);
            let mut v = -div[alpha][node] - dgt_dt.eval(&slots) - dh_du.eval(&slots);
            for beta in 0..n_fields {
                v -= dgt_du[beta].eval(&slots) * slopes[beta].eval(&slots);
            }
            v += theta_c[0].eval(&slots) * composed.pt[alpha][node];
            for a in 0..n {
                v += theta_c[a + 1].eval(&slots) * composed.psp[a][alpha][node];
            }
            out[alpha][node] = v;
        }
    }
    Ok(out)
}

/// Shift a state along a (vertical) tangent: the finite-difference motion in
/// the embedding space used by the d̃-commutation check.
pub fn shift_state(
    charts: &BundleCharts,
    state: &FieldState,
    tangent: &TangentSection,
    eps: f64,
) -> FieldState {
    let chart = &charts.jet_dual;
    let grid = state.grid;
    let n = grid.spatial_dim();
    let n_fields = state.n_fields();
    let mut out = state.clone();
    for node in 0..grid.total_nodes() {
        for alpha in 0..n_fields {
            out.sigma[alpha][node] +=
                eps * tangent.component(chart.fiber_index(alpha), node);
            out.pt[alpha][node] +=
                eps * tangent.component(chart.momentum_index(0, alpha), node);
            for a in 0..n {
                out.psp[a][alpha][node] +=
                    eps * tangent.component(chart.momentum_index(a + 1, alpha), node);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests;
