//! Evaluates lcHDW residuals on candidate solutions and integrates the
//! equations: classical RK4 for m = 1 mechanics, method of lines on a
//! periodic Cauchy grid for field theory.
//!
//! Grid states are double-buffered between steps; node updates within a step
//! are independent.

use crate::bundle::{BundleError, HamiltonianData, LeeForm};
use crate::forms::BundleCharts;
use crate::symexpr::{CompiledExpr, Expr, Point};
use std::collections::BTreeMap;

#[derive(Debug, Clone, thiserror::Error)]
pub enum DynError {
    #[error("numeric abort at step {step} (t = {t}): {detail}")]
    NumericAbort { step: usize, t: f64, detail: String },
    #[error("unsupported Hamiltonian: {reason}")]
    UnsupportedHamiltonian { reason: String },
    #[error("state shape mismatch: {detail}")]
    Shape { detail: String },
    #[error("trajectory needs at least {needed} samples")]
    TooFewSamples { needed: usize },
    #[error("mechanics integration requires a one-dimensional base")]
    NotMechanics,
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Expr(#[from] crate::symexpr::ExprError),
    #[error(transparent)]
    Eval(#[from] crate::symexpr::EvalError),
}

/// Numeric residual summary: named entries and their max absolute value.
#[derive(Debug, Clone, Default)]
pub struct Residual {
    pub entries: Vec<(String, f64)>,
    pub max_abs: f64,
}

impl Residual {
    pub fn push(&mut self, name: impl Into<String>, value: f64) {
        self.max_abs = self.max_abs.max(value.abs());
        self.entries.push((name.into(), value));
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_abs <= tolerance
    }
}

/// Symbolic residual: named expression components; zero iff all vanish.
#[derive(Debug, Clone, Default)]
pub struct SymResidual {
    pub components: Vec<(String, Expr)>,
}

impl SymResidual {
    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|(_, e)| e.is_zero())
    }

    pub fn max_abs_on(&self, points: &[Point]) -> Result<f64, crate::symexpr::EvalError> {
        let mut max = 0.0f64;
        for pt in points {
            for (_, e) in &self.components {
                max = max.max(e.eval(pt)?.abs());
            }
        }
        Ok(max)
    }
}

/// A symbolic candidate section of τ: M → J¹π*: σᵅ(x) and pⁱ_α(x).
#[derive(Debug, Clone)]
pub struct FieldSection {
    /// σᵅ, indexed by α.
    pub sigma: Vec<Expr>,
    /// pⁱ_α, indexed `[i][α]`.
    pub momenta: Vec<Vec<Expr>>,
}

impl FieldSection {
    fn subst_map(&self, charts: &BundleCharts) -> BTreeMap<String, Expr> {
        let jet = &charts.jet_dual;
        let mut map = BTreeMap::new();
        for (alpha, s) in self.sigma.iter().enumerate() {
            map.insert(jet.fiber_names()[alpha].clone(), s.clone());
        }
        for (i, row) in self.momenta.iter().enumerate() {
            for (alpha, p) in row.iter().enumerate() {
                map.insert(jet.momentum_name(i, alpha).to_string(), p.clone());
            }
        }
        map
    }
}

/// Locally conformal HDW residual of a symbolic section:
/// r₁ᵅᵢ = ∂σᵅ/∂xⁱ − ∂H/∂pⁱ_α∘φ and
/// r₂_α = ∂pⁱ_α/∂xⁱ + ∂H/∂uᵅ∘φ − θᵢ pⁱ_α∘φ.
pub fn lchdw_residual_symbolic(
    charts: &BundleCharts,
    section: &FieldSection,
    ham: &HamiltonianData,
    theta: &LeeForm,
) -> Result<SymResidual, DynError> {
    let m = charts.base_dim();
    let n = charts.fiber_dim();
    if section.sigma.len() != n || section.momenta.len() != m {
        return Err(DynError::Shape {
            detail: format!("expected {n} fields and {m} momentum rows"),
        });
    }
    let base = charts.total.base_names();
    let map = section.subst_map(charts);
    let mut out = SymResidual::default();
    for i in 0..m {
        for alpha in 0..n {
            let slope = ham.d_momentum(charts, i, alpha).subst(&map)?;
            let r = &section.sigma[alpha].diff(&base[i]) - &slope;
            out.components
                .push((format!("r1[{},{}]", base[i], alpha + 1), r));
        }
    }
    for alpha in 0..n {
        let mut divergence = Expr::zero();
        let mut twist = Expr::zero();
        for i in 0..m {
            divergence = &divergence + &section.momenta[i][alpha].diff(&base[i]);
            twist = &twist + &(theta.component(i) * &section.momenta[i][alpha]);
        }
        let du = ham.d_fiber(charts, alpha).subst(&map)?;
        let r = &(&divergence + &du) - &twist;
        out.components.push((format!("r2[{}]", alpha + 1), r));
    }
    Ok(out)
}

/// The untwisted HDW residual, coded without any Lee-form machinery; equals
/// the conformal residual at θ = 0.
pub fn hdw_residual_symbolic(
    charts: &BundleCharts,
    section: &FieldSection,
    ham: &HamiltonianData,
) -> Result<SymResidual, DynError> {
    let m = charts.base_dim();
    let n = charts.fiber_dim();
    if section.sigma.len() != n || section.momenta.len() != m {
        return Err(DynError::Shape {
            detail: format!("expected {n} fields and {m} momentum rows"),
        });
    }
    let base = charts.total.base_names();
    let map = section.subst_map(charts);
    let mut out = SymResidual::default();
    for i in 0..m {
        for alpha in 0..n {
            let slope = ham.d_momentum(charts, i, alpha).subst(&map)?;
            out.components.push((
                format!("r1[{},{}]", base[i], alpha + 1),
                &section.sigma[alpha].diff(&base[i]) - &slope,
            ));
        }
    }
    for alpha in 0..n {
        let mut divergence = Expr::zero();
        for i in 0..m {
            divergence = &divergence + &section.momenta[i][alpha].diff(&base[i]);
        }
        let du = ham.d_fiber(charts, alpha).subst(&map)?;
        out.components
            .push((format!("r2[{}]", alpha + 1), &divergence + &du));
    }
    Ok(out)
}

/// A mechanics trajectory on a uniform time grid.
#[derive(Debug, Clone)]
pub struct MechTrajectory {
    pub times: Vec<f64>,
    /// σᵅ(t_k), indexed `[sample][α]`.
    pub sigma: Vec<Vec<f64>>,
    /// p_α(t_k), indexed `[sample][α]`.
    pub momentum: Vec<Vec<f64>>,
}

impl MechTrajectory {
    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            return 0.0;
        }
        self.times[1] - self.times[0]
    }

    pub fn last(&self) -> (f64, &[f64], &[f64]) {
        let k = self.times.len() - 1;
        (self.times[k], &self.sigma[k], &self.momentum[k])
    }
}

struct MechRhs {
    n: usize,
    dh_dp: Vec<CompiledExpr>,
    dh_du: Vec<CompiledExpr>,
    theta_t: CompiledExpr,
}

impl MechRhs {
    fn new(
        charts: &BundleCharts,
        ham: &HamiltonianData,
        theta: &LeeForm,
    ) -> Result<Self, DynError> {
        let jet = &charts.jet_dual;
        let order: Vec<String> = jet.coords().to_vec();
        let n = charts.fiber_dim();
        let mut dh_dp = Vec::with_capacity(n);
        let mut dh_du = Vec::with_capacity(n);
        for alpha in 0..n {
            dh_dp.push(CompiledExpr::compile(
                &ham.d_momentum(charts, 0, alpha),
                &order,
            )?);
            dh_du.push(CompiledExpr::compile(&ham.d_fiber(charts, alpha), &order)?);
        }
        let theta_t = CompiledExpr::compile(theta.component(0), &order)?;
        Ok(MechRhs {
            n,
            dh_dp,
            dh_du,
            theta_t,
        })
    }

    /// slots: [t, u_1..u_N, p_1..p_N]; y: [σ..., p...]
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64], slots: &mut [f64]) {
        slots[0] = t;
        slots[1..1 + self.n].copy_from_slice(&y[..self.n]);
        slots[1 + self.n..1 + 2 * self.n].copy_from_slice(&y[self.n..]);
        let tw = self.theta_t.eval(slots);
        for alpha in 0..self.n {
            dy[alpha] = self.dh_dp[alpha].eval(slots);
            dy[self.n + alpha] = -self.dh_du[alpha].eval(slots) + tw * y[self.n + alpha];
        }
    }
}

/// Classical fourth-order Runge–Kutta on
/// dσᵅ/dt = ∂H/∂p_α, dp_α/dt = −∂H/∂uᵅ + θ_t p_α.
pub fn integrate_mechanics(
    charts: &BundleCharts,
    ham: &HamiltonianData,
    theta: &LeeForm,
    init_sigma: &[f64],
    init_momentum: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<MechTrajectory, DynError> {
    if charts.base_dim() != 1 {
        return Err(DynError::NotMechanics);
    }
    assert!(dt > 0.0, "dt must be positive");
    let n = charts.fiber_dim();
    if init_sigma.len() != n || init_momentum.len() != n {
        return Err(DynError::Shape {
            detail: format!("expected {n} initial positions and momenta"),
        });
    }
    let rhs = MechRhs::new(charts, ham, theta)?;
    let steps = (t_end / dt).round() as usize;
    let mut y: Vec<f64> = init_sigma.iter().chain(init_momentum).copied().collect();
    let mut slots = vec![0.0; 1 + 2 * n];
    let mut times = Vec::with_capacity(steps + 1);
    let mut sigma = Vec::with_capacity(steps + 1);
    let mut momentum = Vec::with_capacity(steps + 1);
    let record = |times: &mut Vec<f64>,
                  sigma: &mut Vec<Vec<f64>>,
                  momentum: &mut Vec<Vec<f64>>,
                  t: f64,
                  y: &[f64]| {
        times.push(t);
        sigma.push(y[..n].to_vec());
        momentum.push(y[n..].to_vec());
    };
    record(&mut times, &mut sigma, &mut momentum, 0.0, &y);
    let mut k1 = vec![0.0; 2 * n];
    let mut k2 = vec![0.0; 2 * n];
    let mut k3 = vec![0.0; 2 * n];
    let mut k4 = vec![0.0; 2 * n];
    let mut stage = vec![0.0; 2 * n];
    for step in 0..steps {
        let t = step as f64 * dt;
        rhs.eval(t, &y, &mut k1, &mut slots);
        for i in 0..2 * n {
            stage[i] = y[i] + 0.5 * dt * k1[i];
        }
        rhs.eval(t + 0.5 * dt, &stage, &mut k2, &mut slots);
        for i in 0..2 * n {
            stage[i] = y[i] + 0.5 * dt * k2[i];
        }
        rhs.eval(t + 0.5 * dt, &stage, &mut k3, &mut slots);
        for i in 0..2 * n {
            stage[i] = y[i] + dt * k3[i];
        }
        rhs.eval(t + dt, &stage, &mut k4, &mut slots);
        for i in 0..2 * n {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(DynError::NumericAbort {
                step,
                t: t + dt,
                detail: "non-finite state".into(),
            });
        }
        record(&mut times, &mut sigma, &mut momentum, (step + 1) as f64 * dt, &y);
    }
    Ok(MechTrajectory {
        times,
        sigma,
        momentum,
    })
}

/// Closed form of the conformal mechanics system dσ/dt = p, dp/dt = ϑ p for
/// constant ϑ: p(t) = p₀e^{ϑt}, σ(t) = σ₀ + p₀(e^{ϑt}−1)/ϑ. The removable
/// singularity at ϑ = 0 is handled by a series branch.
pub fn conformal_closed_form(theta_t: f64, sigma0: f64, p0: f64, t: f64) -> (f64, f64) {
    let p = p0 * (theta_t * t).exp();
    let growth = if theta_t.abs() < 1e-8 {
        t * (1.0 + theta_t * t / 2.0 + theta_t * theta_t * t * t / 6.0)
    } else {
        (theta_t * t).exp_m1() / theta_t
    };
    (sigma0 + p0 * growth, p)
}

/// Residual of a mechanics trajectory under the lcHDW system, time
/// derivatives by central differences on interior samples.
pub fn lchdw_residual_mech(
    traj: &MechTrajectory,
    charts: &BundleCharts,
    ham: &HamiltonianData,
    theta: &LeeForm,
) -> Result<Residual, DynError> {
    if traj.times.len() < 3 {
        return Err(DynError::TooFewSamples { needed: 3 });
    }
    let n = charts.fiber_dim();
    let rhs = MechRhs::new(charts, ham, theta)?;
    let dt = traj.dt();
    let mut slots = vec![0.0; 1 + 2 * n];
    let mut res = Residual::default();
    let mut r1_max = 0.0f64;
    let mut r2_max = 0.0f64;
    for k in 1..traj.times.len() - 1 {
        let t = traj.times[k];
        slots[0] = t;
        slots[1..1 + n].copy_from_slice(&traj.sigma[k]);
        slots[1 + n..].copy_from_slice(&traj.momentum[k]);
        let tw = rhs.theta_t.eval(&slots);
        for alpha in 0..n {
            let dsigma = (traj.sigma[k + 1][alpha] - traj.sigma[k - 1][alpha]) / (2.0 * dt);
            let dp = (traj.momentum[k + 1][alpha] - traj.momentum[k - 1][alpha]) / (2.0 * dt);
            let r1 = dsigma - rhs.dh_dp[alpha].eval(&slots);
            let r2 = dp + rhs.dh_du[alpha].eval(&slots) - tw * traj.momentum[k][alpha];
            r1_max = r1_max.max(r1.abs());
            r2_max = r2_max.max(r2.abs());
        }
    }
    res.push("r1", r1_max);
    res.push("r2", r2_max);
    Ok(res)
}

/// Periodic uniform grid on [0,1)ⁿ. Quadrature weight is Δxⁿ, so the total
/// measure is exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    n: usize,
    nodes_per_dim: usize,
}

impl GridSpec {
    pub fn new(n: usize, nodes_per_dim: usize) -> Self {
        assert!((1..=2).contains(&n), "grids cover 1 <= n <= 2");
        assert!(nodes_per_dim >= 4, "grid too coarse");
        GridSpec { n, nodes_per_dim }
    }

    pub fn spatial_dim(&self) -> usize {
        self.n
    }

    pub fn nodes_per_dim(&self) -> usize {
        self.nodes_per_dim
    }

    pub fn total_nodes(&self) -> usize {
        self.nodes_per_dim.pow(self.n as u32)
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.nodes_per_dim as f64
    }

    pub fn weight(&self) -> f64 {
        self.dx().powi(self.n as i32)
    }

    /// Multi-index of a flat node id (row-major).
    pub fn coords_of(&self, node: usize) -> Vec<usize> {
        let mut out = vec![0; self.n];
        let mut rest = node;
        for a in (0..self.n).rev() {
            out[a] = rest % self.nodes_per_dim;
            rest /= self.nodes_per_dim;
        }
        out
    }

    /// Position of the node along spatial axis a.
    pub fn position(&self, node: usize, a: usize) -> f64 {
        self.coords_of(node)[a] as f64 * self.dx()
    }

    /// Row-major stride of axis a.
    fn stride(&self, a: usize) -> usize {
        self.nodes_per_dim.pow((self.n - 1 - a) as u32)
    }

    /// Flat id of the node shifted by `offset` along axis `a`, wrapping.
    pub fn neighbor(&self, node: usize, a: usize, offset: isize) -> usize {
        let stride = self.stride(a);
        let k = self.nodes_per_dim as isize;
        let coord = (node / stride) % self.nodes_per_dim;
        let shifted = (coord as isize + offset).rem_euclid(k) as usize;
        node - coord * stride + shifted * stride
    }

    /// Second-order central difference along axis a.
    pub fn central_diff(&self, field: &[f64], a: usize) -> Vec<f64> {
        let mut out = vec![0.0; field.len()];
        let scale = 1.0 / (2.0 * self.dx());
        let stride = self.stride(a);
        let k = self.nodes_per_dim;
        for (node, slot) in out.iter_mut().enumerate() {
            let coord = (node / stride) % k;
            let base = node - coord * stride;
            let plus = field[base + ((coord + 1) % k) * stride];
            let minus = field[base + ((coord + k - 1) % k) * stride];
            *slot = (plus - minus) * scale;
        }
        out
    }
}

/// Field data on a periodic Cauchy grid at one time slice.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub grid: GridSpec,
    pub t: f64,
    /// σᵅ, indexed `[α][node]`.
    pub sigma: Vec<Vec<f64>>,
    /// pᵗ_α, indexed `[α][node]`.
    pub pt: Vec<Vec<f64>>,
    /// pᵃ_α, indexed `[a][α][node]`.
    pub psp: Vec<Vec<Vec<f64>>>,
}

impl FieldState {
    pub fn zeros(grid: GridSpec, n_fields: usize, t: f64) -> Self {
        let nodes = grid.total_nodes();
        FieldState {
            grid,
            t,
            sigma: vec![vec![0.0; nodes]; n_fields],
            pt: vec![vec![0.0; nodes]; n_fields],
            psp: vec![vec![vec![0.0; nodes]; n_fields]; grid.spatial_dim()],
        }
    }

    pub fn n_fields(&self) -> usize {
        self.sigma.len()
    }

    pub fn max_abs(&self) -> f64 {
        let mut max = 0.0f64;
        for arr in self.sigma.iter().chain(self.pt.iter()) {
            for v in arr {
                max = max.max(v.abs());
            }
        }
        for block in &self.psp {
            for arr in block {
                for v in arr {
                    max = max.max(v.abs());
                }
            }
        }
        max
    }

    fn check_shape(&self, n_fields: usize) -> Result<(), DynError> {
        let nodes = self.grid.total_nodes();
        let ok = self.sigma.len() == n_fields
            && self.pt.len() == n_fields
            && self.psp.len() == self.grid.spatial_dim()
            && self.sigma.iter().all(|a| a.len() == nodes)
            && self.pt.iter().all(|a| a.len() == nodes)
            && self
                .psp
                .iter()
                .all(|b| b.len() == n_fields && b.iter().all(|a| a.len() == nodes));
        if ok {
            Ok(())
        } else {
            Err(DynError::Shape {
                detail: "field arrays do not match the grid shape".into(),
            })
        }
    }
}

/// Compiled node-wise evaluators for the Cauchy evolution.
pub(crate) struct CauchyOps {
    pub n_fields: usize,
    pub n_spatial: usize,
    pub dh_dpt: Vec<CompiledExpr>,
    pub dh_du: Vec<CompiledExpr>,
    pub theta: Vec<CompiledExpr>,
    /// κ_{aα} = ∂²H/∂(pᵃ_α)², the constant stiffness of each spatial slot.
    pub kappa: Vec<Vec<f64>>,
}

impl CauchyOps {
    pub(crate) fn new(
        charts: &BundleCharts,
        ham: &HamiltonianData,
        theta: &LeeForm,
    ) -> Result<Self, DynError> {
        let jet = &charts.jet_dual;
        let m = charts.base_dim();
        let n_spatial = m - 1;
        let n_fields = charts.fiber_dim();
        let order: Vec<String> = jet.coords().to_vec();
        let mut dh_dpt = Vec::new();
        let mut dh_du = Vec::new();
        for alpha in 0..n_fields {
            dh_dpt.push(CompiledExpr::compile(
                &ham.d_momentum(charts, 0, alpha),
                &order,
            )?);
            dh_du.push(CompiledExpr::compile(&ham.d_fiber(charts, alpha), &order)?);
        }
        let mut theta_c = Vec::new();
        for i in 0..m {
            theta_c.push(CompiledExpr::compile(theta.component(i), &order)?);
        }
        // the momentum block must be diagonal quadratic with constant
        // coefficients so the spatial slots invert
        let mut kappa = vec![vec![0.0; n_fields]; n_spatial];
        for a in 0..n_spatial {
            for alpha in 0..n_fields {
                let name = jet.momentum_name(a + 1, alpha);
                let slope = ham.d_momentum(charts, a + 1, alpha);
                let second = slope.diff(name);
                let k = second.as_constant().ok_or_else(|| {
                    DynError::UnsupportedHamiltonian {
                        reason: format!("∂²H/∂({name})² is not constant"),
                    }
                })?;
                use num_traits::ToPrimitive;
                let k = k.to_f64().unwrap_or(f64::NAN);
                if k == 0.0 || !k.is_finite() {
                    return Err(DynError::UnsupportedHamiltonian {
                        reason: format!("∂²H/∂({name})² vanishes; spatial slot not invertible"),
                    });
                }
                // no coupling to other coordinates
                let linear_part = &slope - &(&Expr::var(name) * &Expr::from_f64(k).unwrap());
                if !linear_part.is_zero() {
                    return Err(DynError::UnsupportedHamiltonian {
                        reason: format!("∂H/∂{name} couples beyond the diagonal term"),
                    });
                }
                kappa[a][alpha] = k;
            }
        }
        Ok(CauchyOps {
            n_fields,
            n_spatial,
            dh_dpt,
            dh_du,
            theta: theta_c,
            kappa,
        })
    }

    /// Fill the slot buffer with the node's chart coordinates.
    pub(crate) fn fill_slots(&self, slots: &mut [f64], state: &FieldState, node: usize) {
        fill_state_slots(self.n_spatial, self.n_fields, slots, state, node);
    }

    pub(crate) fn slot_count(&self) -> usize {
        state_slot_count(self.n_spatial, self.n_fields)
    }
}

/// Slot layout of a Cauchy jet chart: [t, x.., u.., pᵗ.., pᵃ..] matching the
/// chart coordinate order.
pub(crate) fn state_slot_count(n_spatial: usize, n_fields: usize) -> usize {
    1 + n_spatial + n_fields * (2 + n_spatial)
}

pub(crate) fn fill_state_slots(
    n_spatial: usize,
    n_fields: usize,
    slots: &mut [f64],
    state: &FieldState,
    node: usize,
) {
    slots[0] = state.t;
    for a in 0..n_spatial {
        slots[1 + a] = state.grid.position(node, a);
    }
    let base = 1 + n_spatial;
    for alpha in 0..n_fields {
        slots[base + alpha] = state.sigma[alpha][node];
    }
    let pt_base = base + n_fields;
    for alpha in 0..n_fields {
        slots[pt_base + alpha] = state.pt[alpha][node];
    }
    let sp_base = pt_base + n_fields;
    for a in 0..n_spatial {
        for alpha in 0..n_fields {
            slots[sp_base + a * n_fields + alpha] = state.psp[a][alpha][node];
        }
    }
}

fn cauchy_rhs(ops: &CauchyOps, state: &FieldState, slots: &mut [f64]) -> FieldState {
    let grid = state.grid;
    let nodes = grid.total_nodes();
    let mut out = FieldState::zeros(grid, ops.n_fields, 1.0);
    // spatial divergences of the spatial momenta, and the gradient of the
    // slope field ∂H/∂pᵗ (which drives dpᵃ/dt through the constraint)
    let mut slope = vec![vec![0.0; nodes]; ops.n_fields];
    for node in 0..nodes {
        ops.fill_slots(slots, state, node);
        for alpha in 0..ops.n_fields {
            slope[alpha][node] = ops.dh_dpt[alpha].eval(slots);
        }
    }
    let mut div_psp = vec![vec![0.0; nodes]; ops.n_fields];
    for a in 0..ops.n_spatial {
        for alpha in 0..ops.n_fields {
            let d = grid.central_diff(&state.psp[a][alpha], a);
            for node in 0..nodes {
                div_psp[alpha][node] += d[node];
            }
        }
    }
    for node in 0..nodes {
        ops.fill_slots(slots, state, node);
        let theta_t = ops.theta[0].eval(slots);
        for alpha in 0..ops.n_fields {
            // dσ/dt = ∂H/∂pᵗ
            out.sigma[alpha][node] = slope[alpha][node];
            // dpᵗ/dt = −Σ_a ∂pᵃ/∂xᵃ − ∂H/∂u + θᵢ pⁱ
            let mut twist = theta_t * state.pt[alpha][node];
            for a in 0..ops.n_spatial {
                twist += ops.theta[a + 1].eval(slots) * state.psp[a][alpha][node];
            }
            out.pt[alpha][node] =
                -div_psp[alpha][node] - ops.dh_du[alpha].eval(slots) + twist;
        }
    }
    // dpᵃ/dt = (1/κ_a) ∂_a(∂H/∂pᵗ), the time derivative of the spatial
    // constraint ∂σ/∂xᵃ = κ_a pᵃ
    for a in 0..ops.n_spatial {
        for alpha in 0..ops.n_fields {
            let d = grid.central_diff(&slope[alpha], a);
            for node in 0..nodes {
                out.psp[a][alpha][node] = d[node] / ops.kappa[a][alpha];
            }
        }
    }
    out
}

fn axpy_state(dst: &mut FieldState, scale: f64, rhs: &FieldState, base: &FieldState) {
    for alpha in 0..dst.sigma.len() {
        for node in 0..dst.sigma[alpha].len() {
            dst.sigma[alpha][node] = base.sigma[alpha][node] + scale * rhs.sigma[alpha][node];
            dst.pt[alpha][node] = base.pt[alpha][node] + scale * rhs.pt[alpha][node];
        }
    }
    for a in 0..dst.psp.len() {
        for alpha in 0..dst.psp[a].len() {
            for node in 0..dst.psp[a][alpha].len() {
                dst.psp[a][alpha][node] =
                    base.psp[a][alpha][node] + scale * rhs.psp[a][alpha][node];
            }
        }
    }
}

/// Method of lines on the periodic Cauchy grid: second-order central
/// differences in space, classical RK4 in time. The spatial r₁ constraints
/// are not enforced during stepping; they are monitored through
/// [`lchdw_residual_grid`]. Returns the dumped states (initial and final
/// slices always included).
pub fn integrate_cauchy(
    charts: &BundleCharts,
    ham: &HamiltonianData,
    theta: &LeeForm,
    init: &FieldState,
    t_end: f64,
    dt: f64,
    dump_every: usize,
) -> Result<Vec<FieldState>, DynError> {
    let ops = CauchyOps::new(charts, ham, theta)?;
    init.check_shape(ops.n_fields)?;
    if init.grid.spatial_dim() != ops.n_spatial {
        return Err(DynError::Shape {
            detail: "grid dimension does not match the chart".into(),
        });
    }
    assert!(dt > 0.0, "dt must be positive");
    let dump_every = dump_every.max(1);
    let steps = (t_end / dt).round() as usize;
    let guard = 1e6 * (1.0 + init.max_abs());
    let mut slots = vec![0.0; ops.slot_count()];
    let mut state = init.clone();
    state.t = 0.0;
    let mut dumps = vec![state.clone()];
    let mut stage = state.clone();
    for step in 0..steps {
        let t = step as f64 * dt;
        state.t = t;
        let k1 = cauchy_rhs(&ops, &state, &mut slots);
        axpy_state(&mut stage, 0.5 * dt, &k1, &state);
        stage.t = t + 0.5 * dt;
        let k2 = cauchy_rhs(&ops, &stage, &mut slots);
        axpy_state(&mut stage, 0.5 * dt, &k2, &state);
        stage.t = t + 0.5 * dt;
        let k3 = cauchy_rhs(&ops, &stage, &mut slots);
        axpy_state(&mut stage, dt, &k3, &state);
        stage.t = t + dt;
        let k4 = cauchy_rhs(&ops, &stage, &mut slots);
        let base = state.clone();
        axpy_state(&mut state, dt / 6.0, &k1, &base);
        let snapshot = state.clone();
        axpy_state(&mut state, dt / 3.0, &k2, &snapshot);
        let snapshot = state.clone();
        axpy_state(&mut state, dt / 3.0, &k3, &snapshot);
        let snapshot = state.clone();
        axpy_state(&mut state, dt / 6.0, &k4, &snapshot);
        state.t = t + dt;
        let norm = state.max_abs();
        if !norm.is_finite() || norm > guard {
            return Err(DynError::NumericAbort {
                step,
                t: state.t,
                detail: format!("state norm {norm:.3e} exceeds the blow-up guard"),
            });
        }
        if (step + 1) % dump_every == 0 || step + 1 == steps {
            dumps.push(state.clone());
        }
    }
    Ok(dumps)
}

/// lcHDW residual of a dumped grid trajectory: time derivatives by central
/// differences across consecutive dumps, spatial derivatives on the grid.
/// Covers the evolution equations and the monitored spatial constraints.
pub fn lchdw_residual_grid(
    traj: &[FieldState],
    charts: &BundleCharts,
    ham: &HamiltonianData,
    theta: &LeeForm,
) -> Result<Residual, DynError> {
    if traj.len() < 3 {
        return Err(DynError::TooFewSamples { needed: 3 });
    }
    let ops = CauchyOps::new(charts, ham, theta)?;
    let mut slots = vec![0.0; ops.slot_count()];
    let mut r1_time = 0.0f64;
    let mut r1_space = 0.0f64;
    let mut r2 = 0.0f64;
    for k in 1..traj.len() - 1 {
        let state = &traj[k];
        // second-order three-point weights, valid for uneven dump spacing
        let (ta, tb, tc) = (traj[k - 1].t, traj[k].t, traj[k + 1].t);
        let wa = (tb - tc) / ((ta - tb) * (ta - tc));
        let wb = (2.0 * tb - ta - tc) / ((tb - ta) * (tb - tc));
        let wc = (tb - ta) / ((tc - ta) * (tc - tb));
        let grid = state.grid;
        let nodes = grid.total_nodes();
        let mut div = vec![vec![0.0; nodes]; ops.n_fields];
        let mut grad_sigma = Vec::new();
        for a in 0..ops.n_spatial {
            let mut per_alpha = Vec::new();
            for alpha in 0..ops.n_fields {
                let d = grid.central_diff(&state.psp[a][alpha], a);
                for node in 0..nodes {
                    div[alpha][node] += d[node];
                }
                per_alpha.push(grid.central_diff(&state.sigma[alpha], a));
            }
            grad_sigma.push(per_alpha);
        }
        for node in 0..nodes {
            ops.fill_slots(&mut slots, state, node);
            for alpha in 0..ops.n_fields {
                let dsigma_dt = wa * traj[k - 1].sigma[alpha][node]
                    + wb * traj[k].sigma[alpha][node]
                    + wc * traj[k + 1].sigma[alpha][node];
                let dpt_dt = wa * traj[k - 1].pt[alpha][node]
                    + wb * traj[k].pt[alpha][node]
                    + wc * traj[k + 1].pt[alpha][node];
                r1_time = r1_time.max((dsigma_dt - ops.dh_dpt[alpha].eval(&slots)).abs());
                for a in 0..ops.n_spatial {
                    let constraint = grad_sigma[a][alpha][node]
                        - ops.kappa[a][alpha] * state.psp[a][alpha][node];
                    r1_space = r1_space.max(constraint.abs());
                }
                let mut twist = ops.theta[0].eval(&slots) * state.pt[alpha][node];
                for a in 0..ops.n_spatial {
                    twist += ops.theta[a + 1].eval(&slots) * state.psp[a][alpha][node];
                }
                let r = dpt_dt + div[alpha][node] + ops.dh_du[alpha].eval(&slots) - twist;
                r2 = r2.max(r.abs());
            }
        }
    }
    let mut out = Residual::default();
    out.push("r1_time", r1_time);
    out.push("r1_space", r1_space);
    out.push("r2", r2);
    Ok(out)
}
