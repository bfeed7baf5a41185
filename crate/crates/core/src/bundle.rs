//! Geometric objects of the theory on concrete charts: canonical forms on the
//! multimomentum bundle, their conformal deformations by a closed Lee form,
//! Hamiltonian sections, Ehresmann connections and their reductions, and the
//! local rescaling / Lagrangian-submanifold checks.

use crate::forms::{
    BundleCharts, ChartKind, ChartSpec, DifferentialForm, FormError, SectionMap, VectorField,
};
use crate::symexpr::Expr;
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum BundleError {
    #[error("operation requires the {expected:?} chart")]
    WrongChartKind { expected: ChartKind },
    #[error("Lee form component {index} depends on non-base coordinates")]
    LeeFormNotBasic { index: usize },
    #[error("Lee form is not closed: d component ({i},{j}) nonzero")]
    LeeFormNotClosed { i: usize, j: usize },
    #[error("Hamiltonian depends on the affine coordinate `{name}`")]
    HamiltonianDependsOnAffine { name: String },
    #[error("Hamiltonian depends on `{name}`, not a J¹π* coordinate")]
    HamiltonianOutsideChart { name: String },
    #[error("conformal factor does not satisfy d(sigma) = theta at component {index}")]
    ConformalFactorMismatch { index: usize },
    #[error("Christoffel table has the wrong shape")]
    ChristoffelShape,
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Expr(#[from] crate::symexpr::ExprError),
}

/// The closed one-form ϑ on the base, pulled back verbatim to the total
/// spaces (θᵢ = ϑᵢ in chart components).
#[derive(Debug, Clone, PartialEq)]
pub struct LeeForm {
    components: Vec<Expr>,
}

impl LeeForm {
    /// Validates that the components live on the base and are closed.
    pub fn new(charts: &BundleCharts, components: Vec<Expr>) -> Result<Self, BundleError> {
        let base = charts.total.base_names();
        assert_eq!(
            components.len(),
            base.len(),
            "one component per base coordinate"
        );
        for (i, c) in components.iter().enumerate() {
            for v in c.free_vars() {
                if !base.contains(&v) {
                    return Err(BundleError::LeeFormNotBasic { index: i });
                }
            }
        }
        for i in 0..base.len() {
            for j in (i + 1)..base.len() {
                let cross = &components[i].diff(&base[j]) - &components[j].diff(&base[i]);
                if !cross.is_zero() {
                    return Err(BundleError::LeeFormNotClosed { i, j });
                }
            }
        }
        Ok(LeeForm { components })
    }

    pub fn zero(charts: &BundleCharts) -> Self {
        LeeForm {
            components: vec![Expr::zero(); charts.base_dim()],
        }
    }

    /// Constant components, the common scenario case.
    pub fn constant(charts: &BundleCharts, values: &[f64]) -> Self {
        let components = values
            .iter()
            .map(|&v| Expr::from_f64(v).expect("finite component"))
            .collect();
        LeeForm::new(charts, components).expect("constant forms are closed and basic")
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Expr {
        &self.components[i]
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Expr::is_zero)
    }

    /// θ = Σ ϑᵢ dxⁱ on any chart of the family.
    pub fn one_form(&self, chart: &Arc<ChartSpec>) -> DifferentialForm {
        let mut out = DifferentialForm::zero(chart.clone(), 1);
        for (i, c) in self.components.iter().enumerate() {
            if !c.is_zero() {
                let term =
                    DifferentialForm::monomial(chart.clone(), &[chart.base_index(i)], c.clone())
                        .expect("base index in range");
                out = out.add(&term).expect("degree-1 sum");
            }
        }
        out
    }
}

/// The local Hamiltonian function H(xⁱ, uᵅ, pⁱ_α); the density coefficient is
/// p + H.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianData {
    h: Expr,
}

impl HamiltonianData {
    pub fn new(charts: &BundleCharts, h: Expr) -> Result<Self, BundleError> {
        let jet = &charts.jet_dual;
        let affine = charts.multimomentum.affine_name().unwrap_or("p");
        for v in h.free_vars() {
            if v == affine {
                return Err(BundleError::HamiltonianDependsOnAffine { name: v });
            }
            if jet.index_of(&v).is_none() {
                return Err(BundleError::HamiltonianOutsideChart { name: v });
            }
        }
        Ok(HamiltonianData { h })
    }

    pub fn expr(&self) -> &Expr {
        &self.h
    }

    /// ∂H/∂pⁱ_α.
    pub fn d_momentum(&self, charts: &BundleCharts, i: usize, alpha: usize) -> Expr {
        self.h.diff(charts.jet_dual.momentum_name(i, alpha))
    }

    /// ∂H/∂uᵅ.
    pub fn d_fiber(&self, charts: &BundleCharts, alpha: usize) -> Expr {
        self.h.diff(&charts.jet_dual.fiber_names()[alpha])
    }
}

/// Ehresmann connection data: Christoffel expressions for the horizontal lift
/// dxʲ ⊗ (∂ⱼ + Γᵅⱼ ∂_α + Γⁱ_{αj} ∂_{pⁱ_α}). On charts without momenta (the
/// reduced connection on E → M) the momentum table is empty.
#[derive(Debug, Clone)]
pub struct Connection {
    chart: Arc<ChartSpec>,
    fiber: Vec<Vec<Expr>>,
    momentum: Vec<Vec<Vec<Expr>>>,
}

impl Connection {
    /// `fiber[j][α] = Γᵅⱼ`, `momentum[j][i][α] = Γⁱ_{αj}`.
    pub fn new(
        chart: Arc<ChartSpec>,
        fiber: Vec<Vec<Expr>>,
        momentum: Vec<Vec<Vec<Expr>>>,
    ) -> Result<Self, BundleError> {
        let m = chart.base_dim();
        let n = chart.fiber_dim();
        if fiber.len() != m || fiber.iter().any(|r| r.len() != n) {
            return Err(BundleError::ChristoffelShape);
        }
        if chart.has_momenta() {
            if momentum.len() != m
                || momentum
                    .iter()
                    .any(|byi| byi.len() != m || byi.iter().any(|r| r.len() != n))
            {
                return Err(BundleError::ChristoffelShape);
            }
        } else if !momentum.is_empty() {
            return Err(BundleError::ChristoffelShape);
        }
        Ok(Connection {
            chart,
            fiber,
            momentum,
        })
    }

    pub fn zero(chart: Arc<ChartSpec>) -> Self {
        let m = chart.base_dim();
        let n = chart.fiber_dim();
        let momentum = if chart.has_momenta() {
            vec![vec![vec![Expr::zero(); n]; m]; m]
        } else {
            Vec::new()
        };
        Connection {
            fiber: vec![vec![Expr::zero(); n]; m],
            momentum,
            chart,
        }
    }

    pub fn chart(&self) -> &Arc<ChartSpec> {
        &self.chart
    }

    /// Γᵅⱼ.
    pub fn fiber_christoffel(&self, j: usize, alpha: usize) -> &Expr {
        &self.fiber[j][alpha]
    }

    /// Γⁱ_{αj}.
    pub fn momentum_christoffel(&self, j: usize, i: usize, alpha: usize) -> &Expr {
        &self.momentum[j][i][alpha]
    }

    /// The horizontal lift of ∂ⱼ.
    pub fn horizontal_field(&self, j: usize) -> VectorField {
        let chart = &self.chart;
        let mut v = VectorField::new(chart.clone());
        v.set_component_index(chart.base_index(j), Expr::one());
        for alpha in 0..chart.fiber_dim() {
            v.set_component_index(chart.fiber_index(alpha), self.fiber[j][alpha].clone());
        }
        if chart.has_momenta() {
            for i in 0..chart.base_dim() {
                for alpha in 0..chart.fiber_dim() {
                    v.set_component_index(
                        chart.momentum_index(i, alpha),
                        self.momentum[j][i][alpha].clone(),
                    );
                }
            }
        }
        v
    }

    pub fn horizontal_fields(&self) -> Vec<(u8, VectorField)> {
        (0..self.chart.base_dim())
            .map(|j| (self.chart.base_index(j), self.horizontal_field(j)))
            .collect()
    }
}

/// Slotwise tensor contraction ι_𝐡 a = Σⱼ dxʲ ∧ ι_{hⱼ} a.
pub fn contract_connection(
    conn: &Connection,
    a: &DifferentialForm,
) -> Result<DifferentialForm, BundleError> {
    Ok(a.contract_slotwise(&conn.horizontal_fields())?)
}

/// Local conformal factor σ_A; construction validates dσ_A = θ on the chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalFactor {
    sigma: Expr,
}

impl ConformalFactor {
    pub fn new(charts: &BundleCharts, sigma: Expr, theta: &LeeForm) -> Result<Self, BundleError> {
        for (i, name) in charts.total.base_names().iter().enumerate() {
            if !(&sigma.diff(name) - theta.component(i)).is_zero() {
                return Err(BundleError::ConformalFactorMismatch { index: i });
            }
        }
        Ok(ConformalFactor { sigma })
    }

    pub fn expr(&self) -> &Expr {
        &self.sigma
    }
}

/// The coordinate volume d_m x = dx⁰ ∧ … ∧ dx^{m−1}.
pub fn volume_basis(chart: &Arc<ChartSpec>) -> DifferentialForm {
    let idx: Vec<u8> = (0..chart.base_dim()).map(|i| chart.base_index(i)).collect();
    DifferentialForm::monomial(chart.clone(), &idx, Expr::one()).expect("base indices in range")
}

/// ∂ᵢ ⌟ d_m x with its orientation sign.
pub fn base_contraction(chart: &Arc<ChartSpec>, i: usize) -> DifferentialForm {
    let mut v = VectorField::new(chart.clone());
    v.set_component_index(chart.base_index(i), Expr::one());
    volume_basis(chart)
        .interior_product(&v)
        .expect("volume form has positive degree")
}

/// The volume form η = √det|g| · d_m x on the chart.
pub fn eta(chart: &Arc<ChartSpec>) -> DifferentialForm {
    volume_basis(chart).scale(chart.volume_factor())
}

/// Canonical forms on Λᵐ₂E: Θ₂ = p·d_m x + pⁱ_α duᵅ ∧ (∂ᵢ⌟d_m x) and
/// Ω₂ = −dΘ₂.
pub fn canonical_forms(
    charts: &BundleCharts,
) -> Result<(DifferentialForm, DifferentialForm), BundleError> {
    let chart = &charts.multimomentum;
    if chart.kind() != ChartKind::MultiMomentum {
        return Err(BundleError::WrongChartKind {
            expected: ChartKind::MultiMomentum,
        });
    }
    let p = Expr::var(chart.affine_name().expect("multimomentum chart has p"));
    let mut theta2 = volume_basis(chart).scale(&p);
    for i in 0..chart.base_dim() {
        let contraction = base_contraction(chart, i);
        for alpha in 0..chart.fiber_dim() {
            let p_ia = Expr::var(chart.momentum_name(i, alpha));
            let du =
                DifferentialForm::monomial(chart.clone(), &[chart.fiber_index(alpha)], Expr::one())?;
            theta2 = theta2.add(&du.wedge(&contraction)?.scale(&p_ia))?;
        }
    }
    let omega2 = theta2.exterior_derivative().neg();
    Ok((theta2, omega2))
}

/// The l.c.m-s. form Ω₂,θ = −d_θ Θ₂ = Ω₂ + θ ∧ Θ₂ for a closed Lee form.
pub fn lcms_form(charts: &BundleCharts, theta: &LeeForm) -> Result<DifferentialForm, BundleError> {
    let (theta2, _) = canonical_forms(charts)?;
    let theta_form = theta.one_form(&charts.multimomentum);
    Ok(theta2.lichnerowicz(&theta_form)?.neg())
}

/// The Hamiltonian section h: J¹π* → Λᵐ₂E, locally p = −H.
pub fn hamiltonian_section(
    charts: &BundleCharts,
    ham: &HamiltonianData,
) -> Result<SectionMap, BundleError> {
    let p_name = charts
        .multimomentum
        .affine_name()
        .expect("multimomentum chart has p");
    let mut images = BTreeMap::new();
    images.insert(p_name.to_string(), -ham.expr());
    Ok(SectionMap::new(
        charts.jet_dual.clone(),
        charts.multimomentum.clone(),
        images,
    )?)
}

/// (Ω_θ)_h = h*(Ω₂,θ) on J¹π*; for θ = 0 this is Ω_h.
pub fn omega_h(
    charts: &BundleCharts,
    ham: &HamiltonianData,
    theta: &LeeForm,
) -> Result<DifferentialForm, BundleError> {
    let h = hamiltonian_section(charts, ham)?;
    Ok(h.pullback(&lcms_form(charts, theta)?)?)
}

/// Θ_h = h*(Θ₂), the Liouville form pulled to J¹π*.
pub fn theta_h(
    charts: &BundleCharts,
    ham: &HamiltonianData,
) -> Result<DifferentialForm, BundleError> {
    let h = hamiltonian_section(charts, ham)?;
    let (theta2, _) = canonical_forms(charts)?;
    Ok(h.pullback(&theta2)?)
}

/// A connection satisfying ι_𝐡 (Ω_θ)_h = (m−1)(Ω_θ)_h:
/// Γᵅᵢ = ∂H/∂pⁱ_α and trace Γʲ_{αj} = −∂H/∂uᵅ + θᵢ pⁱ_α. The condition fixes
/// only the trace; it is distributed uniformly over the diagonal, which
/// reproduces the m = 1 case exactly and leaves the integral-section
/// equations unchanged.
pub fn connection_from_hamiltonian(
    charts: &BundleCharts,
    ham: &HamiltonianData,
    theta: &LeeForm,
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
        let mut trace = -&ham.d_fiber(charts, alpha);
        for k in 0..m {
            let p_k = Expr::var(chart.momentum_name(k, alpha));
            trace = &trace + &(theta.component(k) * &p_k);
        }
        let share = &trace * &inv_m;
        for j in 0..m {
            momentum[j][j][alpha] = share.clone();
        }
    }
    Connection::new(chart.clone(), fiber, momentum)
}

/// Residual of the connection form of the lcHDW equation:
/// ι_𝐡 (Ω_θ)_h − (m−1)(Ω_θ)_h; the zero form iff the condition holds.
pub fn check_connection_condition(
    charts: &BundleCharts,
    conn: &Connection,
    ham: &HamiltonianData,
    theta: &LeeForm,
) -> Result<DifferentialForm, BundleError> {
    let omega = omega_h(charts, ham, theta)?;
    let contracted = contract_connection(conn, &omega)?;
    let m = charts.base_dim() as i64;
    Ok(contracted.sub(&omega.scale(&Expr::from_int(m - 1)))?)
}

/// The reduced connection 𝐡^γ on E → M: ∂ⱼ ↦ ∂ⱼ + (Γᵅⱼ ∘ γ) ∂_α for a
/// section γ of J¹π* → E. The lift choice drops out of the definition; only
/// the base components of the lifted field survive the projection.
pub fn reduce_connection(
    charts: &BundleCharts,
    conn: &Connection,
    gamma: &SectionMap,
) -> Result<Connection, BundleError> {
    if !gamma.source().same_coords(&charts.total)
        || !gamma.target().same_coords(&charts.jet_dual)
    {
        return Err(BundleError::Form(FormError::ChartMismatch));
    }
    let m = charts.base_dim();
    let n = charts.fiber_dim();
    let mut image_map = BTreeMap::new();
    for name in charts.jet_dual.coords() {
        image_map.insert(
            name.clone(),
            gamma.image(name).expect("section is total").clone(),
        );
    }
    let mut fiber = vec![vec![Expr::zero(); n]; m];
    for j in 0..m {
        for alpha in 0..n {
            fiber[j][alpha] = conn.fiber_christoffel(j, alpha).subst(&image_map)?;
        }
    }
    Connection::new(charts.total.clone(), fiber, Vec::new())
}

/// Curvature components of a reduced connection on E → M:
/// R^α_{ij} = ∂ᵢΓᵅⱼ − ∂ⱼΓᵅᵢ + Γᵝᵢ ∂_β Γᵅⱼ − Γᵝⱼ ∂_β Γᵅᵢ. All zero iff the
/// horizontal distribution is integrable, the flatness hypothesis of the
/// Hamilton–Jacobi theorems (automatic for m = 1; checked per scenario
/// otherwise).
pub fn reduced_connection_curvature(conn: &Connection) -> Vec<(String, Expr)> {
    let chart = conn.chart();
    let base = chart.base_names();
    let fiber = chart.fiber_names();
    let m = chart.base_dim();
    let n = chart.fiber_dim();
    let mut out = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            for alpha in 0..n {
                let mut r = &conn.fiber_christoffel(j, alpha).diff(&base[i])
                    - &conn.fiber_christoffel(i, alpha).diff(&base[j]);
                for beta in 0..n {
                    let lift_term = conn.fiber_christoffel(i, beta)
                        * &conn.fiber_christoffel(j, alpha).diff(&fiber[beta]);
                    let drop_term = conn.fiber_christoffel(j, beta)
                        * &conn.fiber_christoffel(i, alpha).diff(&fiber[beta]);
                    r = &(&r + &lift_term) - &drop_term;
                }
                out.push((format!("R[{},{},{}]", base[i], base[j], alpha + 1), r));
            }
        }
    }
    out
}

/// d(e^{−σ}·Ω_θ): the zero form iff the rescaled structure is closed on the
/// chart, i.e. the local multisymplectic structure is recovered.
pub fn local_rescaling_check(
    omega_theta: &DifferentialForm,
    sigma: &ConformalFactor,
) -> Result<DifferentialForm, BundleError> {
    let factor = Expr::exp_of(&-sigma.expr())?;
    Ok(omega_theta.scaled_by(&factor).exterior_derivative())
}

/// γ̄ as an m-form on E, realized as the pullback γ̄*Θ₂ (which equals γ̄).
pub fn section_as_form(
    charts: &BundleCharts,
    gamma_bar: &SectionMap,
) -> Result<DifferentialForm, BundleError> {
    if !gamma_bar.source().same_coords(&charts.total)
        || !gamma_bar.target().same_coords(&charts.multimomentum)
    {
        return Err(BundleError::Form(FormError::ChartMismatch));
    }
    let (theta2, _) = canonical_forms(charts)?;
    Ok(gamma_bar.pullback(&theta2)?)
}

/// Lagrangian-submanifold criterion: the image of γ̄ is Lagrangian in the
/// l.c.m-s. structure iff γ̄ is d_ϑ-closed (θ = 0 degenerates to d-closed).
pub fn lagrangian_check(
    charts: &BundleCharts,
    gamma_bar: &SectionMap,
    theta: &LeeForm,
) -> Result<(bool, DifferentialForm), BundleError> {
    let form = section_as_form(charts, gamma_bar)?;
    let theta_total = theta.one_form(&charts.total);
    let residual = form.lichnerowicz(&theta_total)?;
    Ok((residual.is_zero(), residual))
}
