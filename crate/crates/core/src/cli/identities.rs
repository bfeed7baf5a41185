//! Randomized symbolic identity suite: the exterior-calculus and conformal
//! identities checked on freshly generated polynomial data, reported
//! per-identity for the CLI and the acceptance gate.

use crate::bundle::{canonical_forms, lcms_form, section_as_form, LeeForm};
use crate::forms::{BundleCharts, ChartSpec, DifferentialForm, SectionMap};
use crate::symexpr::Expr;
use crate::util::SplitMix64;
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct IdentityOutcome {
    pub name: String,
    pub pass: bool,
    pub cases: usize,
}

fn random_expr(rng: &mut SplitMix64, chart: &ChartSpec) -> Expr {
    let mut e = Expr::zero();
    for _ in 0..(1 + rng.below(2)) {
        let mut term = Expr::from_int(rng.int_in(-3, 3));
        for _ in 0..rng.below(3) {
            let v = &chart.coords()[rng.below(chart.dim())];
            term = &term * &Expr::var(v);
        }
        e = &e + &term;
    }
    e
}

fn random_base_expr(rng: &mut SplitMix64, chart: &ChartSpec) -> Expr {
    let mut e = Expr::zero();
    for _ in 0..(1 + rng.below(2)) {
        let mut term = Expr::from_int(rng.int_in(-2, 2));
        for _ in 0..(1 + rng.below(2)) {
            let v = &chart.base_names()[rng.below(chart.base_dim())];
            term = &term * &Expr::var(v);
        }
        e = &e + &term;
    }
    e
}

fn random_form(rng: &mut SplitMix64, chart: &Arc<ChartSpec>, degree: usize) -> DifferentialForm {
    let mut out = DifferentialForm::zero(chart.clone(), degree);
    for _ in 0..(1 + rng.below(3)) {
        let mut indices = Vec::new();
        while indices.len() < degree {
            let i = rng.below(chart.dim()) as u8;
            if !indices.contains(&i) {
                indices.push(i);
            }
        }
        let term = DifferentialForm::monomial(chart.clone(), &indices, random_expr(rng, chart))
            .expect("indices in range");
        out = out.add(&term).expect("degree match");
    }
    out
}

/// A random closed one-form: the differential of a random base polynomial.
fn random_closed_theta(rng: &mut SplitMix64, charts: &BundleCharts) -> LeeForm {
    let sigma = random_base_expr(rng, &charts.total);
    let comps: Vec<Expr> = charts
        .total
        .base_names()
        .iter()
        .map(|name| sigma.diff(name))
        .collect();
    LeeForm::new(charts, comps).expect("exact forms are closed")
}

fn suite_charts() -> Vec<BundleCharts> {
    vec![
        BundleCharts::mechanics(1),
        BundleCharts::mechanics(2),
        BundleCharts::field(2, 1, None, None).expect("euclidean chart"),
        BundleCharts::field(3, 1, None, None).expect("euclidean chart"),
    ]
}

fn d_squared(rng: &mut SplitMix64, instances: usize) -> IdentityOutcome {
    let charts = suite_charts();
    let mut cases = 0;
    let mut pass = true;
    for k in 0..instances {
        let chart = &charts[k % charts.len()].multimomentum;
        let degree = rng.below(3);
        let a = random_form(rng, chart, degree);
        pass &= a.exterior_derivative().exterior_derivative().is_zero();
        cases += 1;
    }
    IdentityOutcome {
        name: "d_squared_zero".into(),
        pass,
        cases,
    }
}

fn graded_leibniz(rng: &mut SplitMix64, instances: usize) -> IdentityOutcome {
    let charts = suite_charts();
    let mut pass = true;
    for k in 0..instances {
        let chart = &charts[k % charts.len()].multimomentum;
        let j = rng.below(2);
        let l = 1 + rng.below(2);
        let a = random_form(rng, chart, j);
        let b = random_form(rng, chart, l);
        let lhs = a.wedge(&b).expect("same chart").exterior_derivative();
        let mut rhs = a.exterior_derivative().wedge(&b).expect("same chart");
        let tail = a.wedge(&b.exterior_derivative()).expect("same chart");
        rhs = if j % 2 == 0 {
            rhs.add(&tail).expect("degree match")
        } else {
            rhs.sub(&tail).expect("degree match")
        };
        pass &= lhs.sub(&rhs).expect("degree match").is_zero();
    }
    IdentityOutcome {
        name: "graded_leibniz".into(),
        pass,
        cases: instances,
    }
}

fn lichnerowicz_flat(rng: &mut SplitMix64, instances: usize) -> IdentityOutcome {
    let charts = suite_charts();
    let mut pass = true;
    for k in 0..instances {
        let family = &charts[k % charts.len()];
        let chart = &family.multimomentum;
        let theta = random_closed_theta(rng, family).one_form(chart);
        let degree = 1 + rng.below(2);
        let a = random_form(rng, chart, degree);
        let twice = a
            .lichnerowicz(&theta)
            .expect("one-form")
            .lichnerowicz(&theta)
            .expect("one-form");
        pass &= twice.is_zero();
    }
    IdentityOutcome {
        name: "lichnerowicz_squared_zero".into(),
        pass,
        cases: instances,
    }
}

fn conformal_closedness(rng: &mut SplitMix64, instances: usize) -> IdentityOutcome {
    // dΩ₂,θ = θ ∧ Ω₂,θ on every constructed chart
    let charts = suite_charts();
    let mut pass = true;
    for k in 0..instances {
        let family = &charts[k % charts.len()];
        let theta = random_closed_theta(rng, family);
        let omega = lcms_form(family, &theta).expect("closed lee form");
        let lhs = omega.exterior_derivative();
        let rhs = theta
            .one_form(&family.multimomentum)
            .wedge(&omega)
            .expect("same chart");
        pass &= lhs.sub(&rhs).expect("degree match").is_zero();
    }
    IdentityOutcome {
        name: "conformal_closedness".into(),
        pass,
        cases: instances,
    }
}

fn random_section(rng: &mut SplitMix64, family: &BundleCharts) -> SectionMap {
    let mm = &family.multimomentum;
    let mut images = BTreeMap::new();
    images.insert(
        mm.affine_name().expect("multimomentum chart").to_string(),
        random_expr(rng, &family.total),
    );
    for i in 0..family.base_dim() {
        for alpha in 0..family.fiber_dim() {
            images.insert(
                mm.momentum_name(i, alpha).to_string(),
                random_expr(rng, &family.total),
            );
        }
    }
    SectionMap::new(family.total.clone(), mm.clone(), images).expect("valid section")
}

fn tautological_pullback(rng: &mut SplitMix64, instances: usize) -> IdentityOutcome {
    // κ*Θ₂ = κ and κ*Ω₂ = −dκ
    let charts = suite_charts();
    let mut pass = true;
    for k in 0..instances {
        let family = &charts[k % charts.len()];
        let kappa = random_section(rng, family);
        let (theta2, omega2) = canonical_forms(family).expect("multimomentum chart");
        let as_form = section_as_form(family, &kappa).expect("section of the lift");
        let pulled_theta = kappa.pullback(&theta2).expect("same chart");
        pass &= pulled_theta.sub(&as_form).expect("degree").is_zero();
        let pulled_omega = kappa.pullback(&omega2).expect("same chart");
        let minus_dk = as_form.exterior_derivative().neg();
        pass &= pulled_omega.sub(&minus_dk).expect("degree").is_zero();
    }
    IdentityOutcome {
        name: "tautological_pullback".into(),
        pass,
        cases: instances,
    }
}

fn conformal_pullback(rng: &mut SplitMix64, instances: usize) -> IdentityOutcome {
    // γ̄*(Ω₂,θ) = −d_ϑ(γ̄)
    let charts = suite_charts();
    let mut pass = true;
    for k in 0..instances {
        let family = &charts[k % charts.len()];
        let theta = random_closed_theta(rng, family);
        let omega = lcms_form(family, &theta).expect("closed lee form");
        let gamma_bar = random_section(rng, family);
        let lhs = gamma_bar.pullback(&omega).expect("same chart");
        let form = section_as_form(family, &gamma_bar).expect("section of the lift");
        let rhs = form
            .lichnerowicz(&theta.one_form(&family.total))
            .expect("one-form")
            .neg();
        pass &= lhs.sub(&rhs).expect("degree").is_zero();
    }
    IdentityOutcome {
        name: "conformal_pullback".into(),
        pass,
        cases: instances,
    }
}

/// Run the whole randomized identity suite.
pub fn run_all(seed: u64, instances: usize) -> Vec<IdentityOutcome> {
    let mut rng = SplitMix64::new(seed);
    vec![
        d_squared(&mut rng, instances),
        graded_leibniz(&mut rng, instances),
        lichnerowicz_flat(&mut rng, instances),
        conformal_closedness(&mut rng, instances),
        tautological_pullback(&mut rng, instances),
        conformal_pullback(&mut rng, instances),
    ]
}
