use super::*;
use crate::bundle::omega_h;
use crate::dynamics::{conformal_closed_form, integrate_cauchy};
use crate::symexpr::{parse, Expr};

fn p(src: &str) -> Expr {
    parse(src).unwrap()
}

fn minkowski_charts() -> BundleCharts {
    let metric = vec![
        vec![Expr::one(), Expr::zero()],
        vec![Expr::zero(), -&Expr::one()],
    ];
    BundleCharts::cauchy(1, 1, Some(metric), None).unwrap()
}

fn wave_hamiltonian(charts: &BundleCharts) -> HamiltonianData {
    HamiltonianData::new(charts, p("1/2*pt_1^2 - 1/2*px_1^2")).unwrap()
}

fn plane_wave_state(grid: GridSpec, t: f64) -> FieldState {
    let mut state = FieldState::zeros(grid, 1, t);
    let tau = std::f64::consts::TAU;
    for node in 0..grid.total_nodes() {
        let x = grid.position(node, 0);
        state.sigma[0][node] = (tau * x).sin() * (tau * t).cos();
        state.pt[0][node] = -tau * (tau * x).sin() * (tau * t).sin();
        state.psp[0][0][node] = -tau * (tau * x).cos() * (tau * t).cos();
    }
    state
}

fn constant_state(grid: GridSpec, t: f64, sigma: f64, pt: f64) -> FieldState {
    let mut state = FieldState::zeros(grid, 1, t);
    for node in 0..grid.total_nodes() {
        state.sigma[0][node] = sigma;
        state.pt[0][node] = pt;
    }
    state
}

#[test]
fn quadrature_is_exact_for_constants_and_trig_polynomials() {
    let charts = minkowski_charts();
    let chart = &charts.jet_dual;
    let grid = GridSpec::new(1, 64);

    // constant contracted integrand c over the unit-measure surface → c
    let form = DifferentialForm::monomial(
        chart.clone(),
        &[chart.base_index(0), chart.base_index(1)],
        p("7/2"),
    )
    .unwrap();
    let state = constant_state(grid, 0.3, 0.0, 0.0);
    let mut x_tilde = TangentSection::new(grid.total_nodes());
    x_tilde.set_constant(chart.base_index(0), 1.0);
    let v = integrate_form(&charts, &form, &state, &[&x_tilde]).unwrap();
    assert!((v - 3.5).abs() < 1e-12);

    // integrand u1 with σ = sin(2πx): a below-Nyquist mode integrates to 0
    let form_u = DifferentialForm::monomial(
        chart.clone(),
        &[chart.base_index(0), chart.base_index(1)],
        p("u1"),
    )
    .unwrap();
    let mut wave = constant_state(grid, 0.0, 0.0, 0.0);
    let tau = std::f64::consts::TAU;
    for node in 0..grid.total_nodes() {
        wave.sigma[0][node] = (tau * grid.position(node, 0)).sin();
    }
    let v = integrate_form(&charts, &form_u, &wave, &[&x_tilde]).unwrap();
    assert!(v.abs() < 1e-12, "mode-1 integral {v}");

    // integrand u1²: sin² = 1/2 − cos(4πx)/2 integrates to exactly 1/2
    let form_u2 = DifferentialForm::monomial(
        chart.clone(),
        &[chart.base_index(0), chart.base_index(1)],
        p("u1^2"),
    )
    .unwrap();
    let v = integrate_form(&charts, &form_u2, &wave, &[&x_tilde]).unwrap();
    assert!((v - 0.5).abs() < 1e-12, "sin^2 integral {v}");
}

#[test]
fn eta_pairing_normalizes_to_one() {
    let charts = minkowski_charts();
    let ham = wave_hamiltonian(&charts);
    let theta = LeeForm::zero(&charts);
    for state in [
        constant_state(GridSpec::new(1, 32), 0.1, 0.4, 1.3),
        plane_wave_state(GridSpec::new(1, 32), 0.2),
    ] {
        let lift = horizontal_lift_tangent(&charts, &ham, &theta, &state).unwrap();
        let eta_form = eta(&charts.jet_dual);
        let v = integrate_form(&charts, &eta_form, &state, &[&lift]).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "eta pairing {v}");
    }
}

#[test]
fn integrate_form_is_linear_in_the_tangent() {
    let charts = minkowski_charts();
    let chart = &charts.jet_dual;
    let grid = GridSpec::new(1, 32);
    let state = plane_wave_state(grid, 0.15);
    let form = DifferentialForm::monomial(
        chart.clone(),
        &[chart.base_index(0), chart.base_index(1)],
        p("u1*pt_1"),
    )
    .unwrap()
    .add(
        &DifferentialForm::monomial(
            chart.clone(),
            &[chart.fiber_index(0), chart.base_index(1)],
            p("px_1"),
        )
        .unwrap(),
    )
    .unwrap();
    let probes = vertical_probes(&charts, grid, 1, 11);
    let mut with_t = probes[0].clone();
    with_t.set_constant(chart.base_index(0), 0.7);
    let x1 = with_t;
    let x2 = probes[3].clone();
    let sum = x1.add(&x2);
    let a = integrate_form(&charts, &form, &state, &[&x1]).unwrap();
    let b = integrate_form(&charts, &form, &state, &[&x2]).unwrap();
    let c = integrate_form(&charts, &form, &state, &[&sum]).unwrap();
    assert!((a + b - c).abs() < 1e-12);
}

#[test]
fn degree_mismatch_is_rejected() {
    let charts = minkowski_charts();
    let chart = &charts.jet_dual;
    let grid = GridSpec::new(1, 16);
    let state = constant_state(grid, 0.0, 0.0, 0.0);
    let one_form =
        DifferentialForm::monomial(chart.clone(), &[chart.base_index(0)], Expr::one()).unwrap();
    let mut x = TangentSection::new(grid.total_nodes());
    x.set_constant(chart.base_index(0), 1.0);
    assert!(matches!(
        integrate_form(&charts, &one_form, &state, &[&x]),
        Err(CauchyError::DegreeMismatch { .. })
    ));
}

#[test]
fn horizontal_lift_on_constant_states_is_the_mechanics_field() {
    // spatially constant state: lift = (1, p, ϑp) in the (t, u, pᵗ) slots
    let charts = minkowski_charts();
    let chart = &charts.jet_dual;
    let ham = wave_hamiltonian(&charts);
    let theta = LeeForm::new(&charts, vec![p("1/2"), p("0")]).unwrap();
    let grid = GridSpec::new(1, 16);
    let state = constant_state(grid, 0.0, 0.3, 2.0);
    let lift = horizontal_lift_tangent(&charts, &ham, &theta, &state).unwrap();
    for node in 0..grid.total_nodes() {
        assert!((lift.component(chart.base_index(0), node) - 1.0).abs() < 1e-15);
        assert!((lift.component(chart.fiber_index(0), node) - 2.0).abs() < 1e-15);
        assert!((lift.component(chart.momentum_index(0, 0), node) - 1.0).abs() < 1e-15);
        assert_eq!(lift.component(chart.momentum_index(1, 0), node), 0.0);
    }
}

#[test]
fn horizontal_lift_fiber_components_match_the_momentum_slope() {
    // plane-wave state: the uᵅ component is ∂H/∂pᵗ_α node-wise
    let charts = minkowski_charts();
    let chart = &charts.jet_dual;
    let ham = wave_hamiltonian(&charts);
    let theta = LeeForm::zero(&charts);
    let grid = GridSpec::new(1, 32);
    let state = plane_wave_state(grid, 0.1);
    let lift = horizontal_lift_tangent(&charts, &ham, &theta, &state).unwrap();
    for node in 0..grid.total_nodes() {
        let expected = state.pt[0][node]; // ∂H/∂pᵗ = pᵗ for the wave H
        assert!((lift.component(chart.fiber_index(0), node) - expected).abs() < 1e-13);
    }
}

#[test]
fn precosymplectic_residual_vanishes_on_constant_conformal_states() {
    // no spatial derivatives involved: the finite-dimensional identity
    let charts = minkowski_charts();
    let ham = wave_hamiltonian(&charts);
    let theta = LeeForm::new(&charts, vec![p("1/2"), p("0")]).unwrap();
    let grid = GridSpec::new(1, 32);
    let (sigma, pt) = conformal_closed_form(0.5, 0.0, 1.0, 0.4);
    let state = constant_state(grid, 0.4, sigma, pt);
    let probes = vertical_probes(&charts, grid, 2, 31);
    let res = check_precosymplectic(&charts, &ham, &theta, &state, &probes).unwrap();
    assert!(res.max_abs < 1e-10, "residual {}", res.max_abs);
}

#[test]
fn precosymplectic_residual_converges_at_second_order() {
    let charts = minkowski_charts();
    let ham = wave_hamiltonian(&charts);
    let theta = LeeForm::zero(&charts);
    let mut values = Vec::new();
    for nodes in [64usize, 128, 256] {
        let grid = GridSpec::new(1, nodes);
        let state = plane_wave_state(grid, 0.125);
        let probes = vertical_probes(&charts, grid, 2, 77);
        let res = check_precosymplectic(&charts, &ham, &theta, &state, &probes).unwrap();
        values.push(res.max_abs);
    }
    for w in values.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(
            (1.7..2.3).contains(&order),
            "order {order:.2} from {values:?}"
        );
    }
    // negative control: a constraint-violating state does not converge
    let grid = GridSpec::new(1, 64);
    let mut bad = plane_wave_state(grid, 0.125);
    for v in bad.psp[0][0].iter_mut() {
        *v *= 1.5;
    }
    let probes = vertical_probes(&charts, grid, 2, 77);
    let res = check_precosymplectic(&charts, &ham, &theta, &bad, &probes).unwrap();
    assert!(res.max_abs > 1e-2);
}

#[test]
fn infinite_hdw_residual_small_on_integrated_solutions() {
    let charts = minkowski_charts();
    let ham = wave_hamiltonian(&charts);
    let theta = LeeForm::zero(&charts);
    let grid = GridSpec::new(1, 64);
    let init = plane_wave_state(grid, 0.0);
    let dumps = integrate_cauchy(&charts, &ham, &theta, &init, 0.1, 1e-3, 5).unwrap();
    let probes = vertical_probes(&charts, grid, 2, 5);
    let res = infinite_hdw_residual(&charts, &dumps, &ham, &theta, &probes).unwrap();
    // spatial truncation dominates: O(Δx²) ≈ 1e-2 scale at 64 nodes
    assert!(res.max_abs < 5e-2, "residual {}", res.max_abs);

    // perturbed trajectory is a non-solution
    let mut perturbed = dumps.clone();
    for state in perturbed.iter_mut() {
        for v in state.sigma[0].iter_mut() {
            *v *= 1.1;
        }
    }
    let res_bad =
        infinite_hdw_residual(&charts, &perturbed, &ham, &theta, &probes).unwrap();
    assert!(res_bad.max_abs > 1e-2);
}

#[test]
fn infinite_hdw_residual_refines_at_second_order() {
    let charts = minkowski_charts();
    let ham = wave_hamiltonian(&charts);
    let theta = LeeForm::zero(&charts);
    let mut values = Vec::new();
    for nodes in [64usize, 128, 256] {
        let grid = GridSpec::new(1, nodes);
        let dt = 1e-4;
        let traj: Vec<FieldState> = [-dt, 0.0, dt]
            .iter()
            .map(|&s| plane_wave_state(grid, 0.125 + s))
            .collect();
        let probes = vertical_probes(&charts, grid, 2, 13);
        let res = infinite_hdw_residual(&charts, &traj, &ham, &theta, &probes).unwrap();
        values.push(res.max_abs);
    }
    for w in values.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(
            (1.7..2.3).contains(&order),
            "order {order:.2} from {values:?}"
        );
    }
}

#[test]
fn infinite_residual_small_on_constant_conformal_mechanics() {
    let charts = minkowski_charts();
    let ham = wave_hamiltonian(&charts);
    let theta = LeeForm::new(&charts, vec![p("1/2"), p("0")]).unwrap();
    let grid = GridSpec::new(1, 16);
    let dt = 1e-3;
    let traj: Vec<FieldState> = (0..5)
        .map(|k| {
            let t = k as f64 * dt;
            let (sigma, pt) = conformal_closed_form(0.5, 0.0, 1.0, t);
            constant_state(grid, t, sigma, pt)
        })
        .collect();
    let probes = vertical_probes(&charts, grid, 1, 3);
    let res = infinite_hdw_residual(&charts, &traj, &ham, &theta, &probes).unwrap();
    assert!(res.max_abs < 1e-6, "residual {}", res.max_abs);
}

#[test]
fn finite_and_infinite_residuals_agree_in_both_directions() {
    // the integrated Hamilton equation discretized: node-wise pass iff integrated pass,
    // with two independent negative controls
    let charts = minkowski_charts();
    let ham = wave_hamiltonian(&charts);
    let theta = LeeForm::zero(&charts);
    let grid = GridSpec::new(1, 64);
    let dt = 1e-4;
    let make = |perturb: fn(&mut FieldState)| -> Vec<FieldState> {
        [-dt, 0.0, dt]
            .iter()
            .map(|&s| {
                let mut st = plane_wave_state(grid, 0.125 + s);
                perturb(&mut st);
                st
            })
            .collect()
    };
    let probes = vertical_probes(&charts, grid, 2, 23);
    let tol_grid = 5e-2;
    let tol_int = 5e-2;

    let clean = make(|_| {});
    let g = crate::dynamics::lchdw_residual_grid(&clean, &charts, &ham, &theta).unwrap();
    let i = infinite_hdw_residual(&charts, &clean, &ham, &theta, &probes).unwrap();
    assert!(g.max_abs < tol_grid && i.max_abs < tol_int);

    let bad_sigma = make(|st| {
        for v in st.sigma[0].iter_mut() {
            *v *= 1.3;
        }
    });
    let g = crate::dynamics::lchdw_residual_grid(&bad_sigma, &charts, &ham, &theta).unwrap();
    let i = infinite_hdw_residual(&charts, &bad_sigma, &ham, &theta, &probes).unwrap();
    assert!(g.max_abs > tol_grid && i.max_abs > tol_int);

    let bad_pt = make(|st| {
        for v in st.pt[0].iter_mut() {
            *v += 0.5;
        }
    });
    let g = crate::dynamics::lchdw_residual_grid(&bad_pt, &charts, &ham, &theta).unwrap();
    let i = infinite_hdw_residual(&charts, &bad_pt, &ham, &theta, &probes).unwrap();
    assert!(g.max_abs > tol_grid && i.max_abs > tol_int);
}

#[test]
fn uneven_final_dump_interval_is_handled() {
    // 250 steps dumped every 35 leaves a short last interval; the
    // three-point stencils must stay second order there
    let charts = minkowski_charts();
    let ham = wave_hamiltonian(&charts);
    let theta = LeeForm::new(&charts, vec![p("1/2"), p("0")]).unwrap();
    let grid = GridSpec::new(1, 8);
    let mut init = FieldState::zeros(grid, 1, 0.0);
    for node in 0..grid.total_nodes() {
        init.pt[0][node] = 1.0;
    }
    let dumps = integrate_cauchy(&charts, &ham, &theta, &init, 0.25, 1e-3, 35).unwrap();
    let spacings: Vec<f64> = dumps.windows(2).map(|w| w[1].t - w[0].t).collect();
    assert!(spacings.last().unwrap() < &0.02, "short tail interval");
    let probes = vertical_probes(&charts, grid, 1, 5);
    let res = infinite_hdw_residual(&charts, &dumps, &ham, &theta, &probes).unwrap();
    assert!(res.max_abs < 1e-3, "residual {}", res.max_abs);
}

#[test]
fn hj_infinite_check_on_the_conformal_mechanics_solution() {
    // γ = e^{ϑt} lifted to spatially constant integral states
    let charts = minkowski_charts();
    let ham = wave_hamiltonian(&charts);
    let theta = LeeForm::new(&charts, vec![p("1/2"), p("0")]).unwrap();
    let g = GammaSection::new(
        &charts,
        vec![vec![p("exp(1/2*t)")], vec![p("0")]],
        None,
    )
    .unwrap();
    let grid = GridSpec::new(1, 16);
    let states: Vec<FieldState> = [0.0f64, 0.4, 0.8]
        .iter()
        .map(|&t| {
            // integral section of 𝐡^γ: dσ/dt = γ(t) → σ(t) = 2(e^{t/2}−1)
            let sigma = 2.0 * ((0.5 * t).exp() - 1.0);
            constant_state(grid, t, sigma, 0.0)
        })
        .collect();
    let (part_i, part_ii) = hj_infinite_check(&charts, &g, &ham, &theta, &states, 7).unwrap();
    assert!(part_i.max_abs < 1e-8, "(i) {}", part_i.max_abs);
    assert!(part_ii.max_abs < 1e-8, "(ii) {}", part_ii.max_abs);
}

#[test]
fn hj_infinite_check_zero_section_trivial_case() {
    let charts = minkowski_charts();
    let ham = wave_hamiltonian(&charts);
    let theta = LeeForm::zero(&charts);
    let g = GammaSection::new(&charts, vec![vec![p("0")], vec![p("0")]], None).unwrap();
    let grid = GridSpec::new(1, 16);
    let states = vec![constant_state(grid, 0.0, 0.7, 0.0)];
    let (part_i, part_ii) = hj_infinite_check(&charts, &g, &ham, &theta, &states, 9).unwrap();
    assert!(part_i.max_abs < 1e-12);
    assert!(part_ii.max_abs < 1e-12);
}

#[test]
fn hj_infinite_negative_control_matches_the_coordinate_bracket() {
    // perturbed γ: residual (ii) is nonzero and equals the quadrature of the
    // proof's uᵅ-bracket against the probe profile
    let charts = minkowski_charts();
    let ham = wave_hamiltonian(&charts);
    let theta = LeeForm::new(&charts, vec![p("1/2"), p("0")]).unwrap();
    let g = GammaSection::new(
        &charts,
        vec![vec![p("exp(1/2*t) + 1/10*u1")], vec![p("0")]],
        None,
    )
    .unwrap();
    let grid = GridSpec::new(1, 32);
    let state = constant_state(grid, 0.3, 0.8, 0.0);
    let states = vec![state.clone()];
    let (_, part_ii) = hj_infinite_check(&charts, &g, &ham, &theta, &states, 21).unwrap();
    assert!(part_ii.max_abs > 1e-3, "(ii) {}", part_ii.max_abs);

    // quadrature route against the node-wise bracket for a u-probe
    let chart = &charts.jet_dual;
    let bracket = hj_coordinate_bracket(&charts, &g, &ham, &theta, &state).unwrap();
    let composed = compose_gamma_state(&charts, &g, &state).unwrap();
    let omega = omega_h(&charts, &ham, &theta).unwrap();
    let mut probe = TangentSection::new(grid.total_nodes());
    let profile: Vec<f64> = (0..grid.total_nodes())
        .map(|node| 0.5 + (std::f64::consts::TAU * grid.position(node, 0)).cos())
        .collect();
    probe.set_profile(chart.fiber_index(0), profile.clone());
    // lifted reduced-connection tangent, as inside hj_infinite_check
    let order: Vec<String> = chart.coords().to_vec();
    let slope = CompiledExpr::compile(&ham.d_momentum(&charts, 0, 0), &order).unwrap();
    let mut slots = vec![0.0; state_slot_count(1, 1)];
    let mut slope_profile = vec![0.0; grid.total_nodes()];
    for node in 0..grid.total_nodes() {
        fill_state_slots(1, 1, &mut slots, &composed, node);
        slope_profile[node] = slope.eval(&slots);
    }
    let lifted =
        push_tangent_through_gamma(&charts, &g, &state, 1.0, &[slope_profile]).unwrap();
    let quadrature = integrate_form(&charts, &omega, &composed, &[&lifted, &probe]).unwrap();
    let by_bracket: f64 = (0..grid.total_nodes())
        .map(|node| profile[node] * bracket[0][node] * grid.weight())
        .sum();
    assert!(
        (quadrature - by_bracket).abs() < 1e-12 * (1.0 + by_bracket.abs()),
        "quadrature {quadrature} vs bracket {by_bracket}"
    );
}

#[test]
fn two_dimensional_quadrature_and_pairing() {
    // n = 2 surface: exactness for below-Nyquist products, and the η̃
    // pairing against the horizontal lift
    let metric = vec![
        vec![Expr::one(), Expr::zero(), Expr::zero()],
        vec![Expr::zero(), -&Expr::one(), Expr::zero()],
        vec![Expr::zero(), Expr::zero(), -&Expr::one()],
    ];
    let charts = BundleCharts::cauchy(2, 1, Some(metric), None).unwrap();
    let chart = &charts.jet_dual;
    let ham = HamiltonianData::new(
        &charts,
        p("1/2*pt_1^2 - 1/2*px_1^2 - 1/2*py_1^2"),
    )
    .unwrap();
    let theta = LeeForm::zero(&charts);
    let grid = GridSpec::new(2, 16);
    let tau = std::f64::consts::TAU;
    let mut state = FieldState::zeros(grid, 1, 0.3);
    for node in 0..grid.total_nodes() {
        let x = grid.position(node, 0);
        let y = grid.position(node, 1);
        state.sigma[0][node] = (tau * x).sin() * (tau * y).cos();
        state.pt[0][node] = 0.7;
    }
    // ∫ u1² = ∫ sin²(2πx)cos²(2πy) = 1/4 exactly on the periodic grid
    let form = DifferentialForm::monomial(
        chart.clone(),
        &[chart.base_index(0), chart.base_index(1), chart.base_index(2)],
        p("u1^2"),
    )
    .unwrap();
    let mut x_tilde = TangentSection::new(grid.total_nodes());
    x_tilde.set_constant(chart.base_index(0), 1.0);
    let v = integrate_form(&charts, &form, &state, &[&x_tilde]).unwrap();
    assert!((v - 0.25).abs() < 1e-12, "quadrature {v}");

    let lift = horizontal_lift_tangent(&charts, &ham, &theta, &state).unwrap();
    let eta_form = eta(&charts.jet_dual);
    let pairing = integrate_form(&charts, &eta_form, &state, &[&lift]).unwrap();
    assert!((pairing - 1.0).abs() < 1e-12);
}

#[test]
fn two_dimensional_infinite_residual_vanishes_on_exact_solutions() {
    let metric = vec![
        vec![Expr::one(), Expr::zero(), Expr::zero()],
        vec![Expr::zero(), -&Expr::one(), Expr::zero()],
        vec![Expr::zero(), Expr::zero(), -&Expr::one()],
    ];
    let charts = BundleCharts::cauchy(2, 1, Some(metric), None).unwrap();
    let ham = HamiltonianData::new(
        &charts,
        p("1/2*pt_1^2 - 1/2*px_1^2 - 1/2*py_1^2"),
    )
    .unwrap();
    let theta = LeeForm::zero(&charts);
    let tau = std::f64::consts::TAU;
    let omega = tau * 2.0f64.sqrt();
    let exact = |grid: GridSpec, t: f64| -> FieldState {
        let mut st = FieldState::zeros(grid, 1, t);
        for node in 0..grid.total_nodes() {
            let x = grid.position(node, 0);
            let y = grid.position(node, 1);
            let profile = (tau * x).sin() * (tau * y).sin();
            st.sigma[0][node] = profile * (omega * t).cos();
            st.pt[0][node] = -omega * profile * (omega * t).sin();
            st.psp[0][0][node] =
                -tau * (tau * x).cos() * (tau * y).sin() * (omega * t).cos();
            st.psp[1][0][node] =
                -tau * (tau * x).sin() * (tau * y).cos() * (omega * t).cos();
        }
        st
    };
    let mut values = Vec::new();
    for nodes in [16usize, 32] {
        let grid = GridSpec::new(2, nodes);
        let dt = 1e-4;
        let traj: Vec<FieldState> = [-dt, 0.0, dt]
            .iter()
            .map(|&s| exact(grid, 0.1 + s))
            .collect();
        let probes = vertical_probes(&charts, grid, 1, 3);
        let res = infinite_hdw_residual(&charts, &traj, &ham, &theta, &probes).unwrap();
        values.push(res.max_abs);
    }
    let order = (values[0] / values[1]).log2();
    assert!(
        (1.6..2.4).contains(&order),
        "2d order {order:.2} from {values:?}"
    );
}

#[test]
fn exterior_derivative_commutes_with_integration() {
    // d(Ω̃_θ)_h evaluated two ways: integrate d(Ω_θ)_h directly, and
    // antisymmetrized state-space finite differences of the integrated form
    let charts = minkowski_charts();
    let ham = wave_hamiltonian(&charts);
    let theta = LeeForm::new(&charts, vec![p("1/3"), p("0")]).unwrap();
    let omega = omega_h(&charts, &ham, &theta).unwrap();
    let d_omega = omega.exterior_derivative();
    let grid = GridSpec::new(1, 64);
    let state = plane_wave_state(grid, 0.125);
    let probes = vertical_probes(&charts, grid, 1, 17);
    let triples = [[0usize, 2, 4], [1, 3, 5], [0, 3, 4]];
    let eps = 1e-5;
    for triple in triples {
        let x = &probes[triple[0]];
        let y = &probes[triple[1]];
        let z = &probes[triple[2]];
        let lhs = integrate_form(&charts, &d_omega, &state, &[x, y, z]).unwrap();
        let pair = |a: &TangentSection, b: &TangentSection, st: &FieldState| {
            integrate_form(&charts, &omega, st, &[a, b]).unwrap()
        };
        let dir = |along: &TangentSection, a: &TangentSection, b: &TangentSection| {
            let plus = shift_state(&charts, &state, along, eps);
            let minus = shift_state(&charts, &state, along, -eps);
            (pair(a, b, &plus) - pair(a, b, &minus)) / (2.0 * eps)
        };
        let rhs = dir(x, y, z) - dir(y, x, z) + dir(z, x, y);
        assert!(
            (lhs - rhs).abs() < 1e-6 * (1.0 + lhs.abs()),
            "lhs {lhs} rhs {rhs}"
        );
    }
}
