//! Scenario runner: loads a sectioned key-value config, builds the geometry,
//! runs the integrators and verifiers, and writes CSV data plus a
//! human-readable residual report.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 config error,
//! 3 numeric abort.

use crate::bundle::{BundleError, HamiltonianData, LeeForm};
use crate::dynamics::{
    conformal_closed_form, integrate_cauchy, integrate_mechanics, lchdw_residual_grid,
    lchdw_residual_mech, lchdw_residual_symbolic, CauchyOps, DynError, FieldSection, FieldState,
    GridSpec, MechTrajectory,
};
use crate::forms::BundleCharts;
use crate::hj::{
    reduced_hj_residual, roundtrip_verify, sample_points, GammaSection,
    RoundtripTolerances,
};
use crate::symexpr::{parse, Expr};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub mod identities;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error{}: {msg}", location(.line, .field))]
    Config {
        line: Option<usize>,
        field: Option<String>,
        msg: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("numeric abort: {0}")]
    Numeric(String),
}

fn location(line: &Option<usize>, field: &Option<String>) -> String {
    match (line, field) {
        (Some(l), Some(f)) => format!(" (line {l}, field `{f}`)"),
        (Some(l), None) => format!(" (line {l})"),
        (None, Some(f)) => format!(" (field `{f}`)"),
        (None, None) => String::new(),
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numeric(_) => 3,
            _ => 2,
        }
    }

    fn field(field: &str, msg: impl Into<String>) -> Self {
        CliError::Config {
            line: None,
            field: Some(field.to_string()),
            msg: msg.into(),
        }
    }
}

fn from_dyn(e: DynError) -> CliError {
    match e {
        DynError::NumericAbort { .. } => CliError::Numeric(e.to_string()),
        other => CliError::Config {
            line: None,
            field: None,
            msg: other.to_string(),
        },
    }
}

fn from_bundle(e: BundleError) -> CliError {
    CliError::Config {
        line: None,
        field: None,
        msg: e.to_string(),
    }
}

/// Raw sectioned key-value text: `key = value` lines grouped under
/// `[section]` headers; `#` starts a comment. Keys before any header land in
/// the empty section.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, (usize, String)>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut out = RawConfig::default();
        let mut current = String::new();
        for (no, raw_line) in text.lines().enumerate() {
            let line_no = no + 1;
            let line = match raw_line.find('#') {
                Some(k) => &raw_line[..k],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or(CliError::Config {
                    line: Some(line_no),
                    field: None,
                    msg: "unterminated section header".into(),
                })?;
                current = name.trim().to_string();
                out.sections.entry(current.clone()).or_default();
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(CliError::Config {
                    line: Some(line_no),
                    field: None,
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = line[..eq].trim().to_string();
            let value = line[eq + 1..].trim().to_string();
            if key.is_empty() {
                return Err(CliError::Config {
                    line: Some(line_no),
                    field: None,
                    msg: "empty key".into(),
                });
            }
            out.sections
                .entry(current.clone())
                .or_default()
                .insert(key, (line_no, value));
        }
        Ok(out)
    }

    fn get(&self, section: &str, key: &str) -> Option<&(usize, String)> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    fn require(&self, section: &str, key: &str) -> Result<&str, CliError> {
        self.get(section, key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| CliError::field(&format!("{section}.{key}"), "missing"))
    }

    fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, CliError> {
        match self.get(section, key) {
            None => Ok(default),
            Some((line, v)) => v.parse().map_err(|_| CliError::Config {
                line: Some(*line),
                field: Some(format!("{section}.{key}")),
                msg: format!("`{v}` is not a number"),
            }),
        }
    }

    fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize, CliError> {
        match self.get(section, key) {
            None => Ok(default),
            Some((line, v)) => v.parse().map_err(|_| CliError::Config {
                line: Some(*line),
                field: Some(format!("{section}.{key}")),
                msg: format!("`{v}` is not an integer"),
            }),
        }
    }

    fn u64_or(&self, section: &str, key: &str, default: u64) -> Result<u64, CliError> {
        match self.get(section, key) {
            None => Ok(default),
            Some((line, v)) => v.parse().map_err(|_| CliError::Config {
                line: Some(*line),
                field: Some(format!("{section}.{key}")),
                msg: format!("`{v}` is not an integer"),
            }),
        }
    }

    /// Parse an expression value; `pi` and `tau` are predefined constants.
    fn expr(&self, section: &str, key: &str) -> Result<Expr, CliError> {
        let (line, text) = self
            .get(section, key)
            .ok_or_else(|| CliError::field(&format!("{section}.{key}"), "missing"))?;
        parse_expr_value(text).map_err(|msg| CliError::Config {
            line: Some(*line),
            field: Some(format!("{section}.{key}")),
            msg,
        })
    }

    fn expr_or(&self, section: &str, key: &str, default: Expr) -> Result<Expr, CliError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(_) => self.expr(section, key),
        }
    }

    fn has(&self, section: &str, key: &str) -> bool {
        self.get(section, key).is_some()
    }
}

/// Expression dialect of config values: symexpr infix with `pi`/`tau`
/// resolved to numeric literals before parsing (so they may appear inside
/// transcendental arguments like `sin(tau*x)`).
pub fn parse_expr_value(text: &str) -> Result<Expr, String> {
    let resolved = replace_constants(text);
    parse(&resolved).map_err(|e| e.to_string())
}

fn replace_constants(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() {
                let c = bytes[i] as char;
                if c.is_ascii_alphanumeric() || c == '_' {
                    i += 1;
                } else {
                    break;
                }
            }
            match &text[start..i] {
                "pi" => {
                    let _ = write!(out, "({:?})", std::f64::consts::PI);
                }
                "tau" => {
                    let _ = write!(out, "({:?})", std::f64::consts::TAU);
                }
                ident => out.push_str(ident),
            }
        } else {
            out.push(c);
            i += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Mechanics,
    ScalarField,
    HjVerify,
    Cauchy,
    IdentitySuite,
}

/// A fully parsed scenario: the raw config plus the global knobs every
/// scenario shares.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub raw: RawConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub tolerance_scale: f64,
    pub refine_levels: usize,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let raw = RawConfig::parse(text)?;
        let kind = match raw.require("", "kind")? {
            "mechanics" => ScenarioKind::Mechanics,
            "scalar-field" => ScenarioKind::ScalarField,
            "hj-verify" => ScenarioKind::HjVerify,
            "cauchy" => ScenarioKind::Cauchy,
            "identity-suite" => ScenarioKind::IdentitySuite,
            other => {
                return Err(CliError::field(
                    "kind",
                    format!("unknown scenario kind `{other}`"),
                ))
            }
        };
        let out_dir = PathBuf::from(
            raw.get("run", "out")
                .map(|(_, v)| v.clone())
                .unwrap_or_else(|| "out".to_string()),
        );
        let seed = raw.u64_or("run", "seed", 42)?;
        let tolerance_scale = raw.f64_or("run", "tolerance_scale", 1.0)?;
        Ok(ScenarioConfig {
            kind,
            raw,
            out_dir,
            seed,
            tolerance_scale,
            refine_levels: 0,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub scenario: String,
    pub checks: Vec<CheckResult>,
    pub notes: Vec<(String, String)>,
    pub outputs: Vec<PathBuf>,
    pub wall_ms: u128,
}

impl RunReport {
    fn check(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        let name = name.into();
        self.checks.push(CheckResult {
            pass: value.abs() <= tolerance,
            name,
            value,
            tolerance,
        });
    }

    fn note(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.notes.push((key.into(), value.into()));
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Key: value report text, one line per check.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario: {}", self.scenario);
        for (k, v) in &self.notes {
            let _ = writeln!(out, "{k}: {v}");
        }
        for c in &self.checks {
            let _ = writeln!(
                out,
                "check {}: value={:.6e} tolerance={:.3e} {}",
                c.name,
                c.value,
                c.tolerance,
                if c.pass { "pass" } else { "FAIL" }
            );
        }
        let _ = writeln!(out, "wall_ms: {}", self.wall_ms);
        let _ = writeln!(out, "overall: {}", if self.pass() { "pass" } else { "FAIL" });
        out
    }

    /// Machine-readable rows: `check,value,tolerance,pass`.
    pub fn csv(&self) -> String {
        let mut out = String::from("check,value,tolerance,pass\n");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{},{:.17e},{:.17e},{}",
                c.name, c.value, c.tolerance, c.pass
            );
        }
        out
    }
}

fn write_file(report: &mut RunReport, path: PathBuf, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    report.outputs.push(path);
    Ok(())
}

/// Trajectory CSV: header t,sigma_1..,p_1.., one row per sample.
pub fn mech_trajectory_csv(traj: &MechTrajectory) -> String {
    let n = traj.sigma.first().map(|r| r.len()).unwrap_or(0);
    let mut header = String::from("t");
    for alpha in 1..=n {
        let _ = write!(header, ",sigma_{alpha}");
    }
    for alpha in 1..=n {
        let _ = write!(header, ",p_{alpha}");
    }
    let mut out = header;
    out.push('\n');
    for k in 0..traj.times.len() {
        let _ = write!(out, "{:.17e}", traj.times[k]);
        for v in &traj.sigma[k] {
            let _ = write!(out, ",{v:.17e}");
        }
        for v in &traj.momentum[k] {
            let _ = write!(out, ",{v:.17e}");
        }
        out.push('\n');
    }
    out
}

/// Field CSV for one dump: t,node,x[,y],sigma_α,pt_α,p<axis>_α columns.
pub fn field_state_csv(charts: &BundleCharts, state: &FieldState) -> String {
    let grid = state.grid;
    let n = grid.spatial_dim();
    let n_fields = state.n_fields();
    let base = charts.total.base_names();
    let mut header = String::from("t,node");
    for name in base.iter().skip(1) {
        let _ = write!(header, ",{name}");
    }
    for alpha in 1..=n_fields {
        let _ = write!(header, ",sigma_{alpha}");
    }
    for alpha in 0..n_fields {
        let _ = write!(header, ",{}", charts.jet_dual.momentum_name(0, alpha));
    }
    for a in 0..n {
        for alpha in 0..n_fields {
            let _ = write!(header, ",{}", charts.jet_dual.momentum_name(a + 1, alpha));
        }
    }
    let mut out = header;
    out.push('\n');
    for node in 0..grid.total_nodes() {
        let _ = write!(out, "{:.17e},{node}", state.t);
        for a in 0..n {
            let _ = write!(out, ",{:.17e}", grid.position(node, a));
        }
        for alpha in 0..n_fields {
            let _ = write!(out, ",{:.17e}", state.sigma[alpha][node]);
        }
        for alpha in 0..n_fields {
            let _ = write!(out, ",{:.17e}", state.pt[alpha][node]);
        }
        for a in 0..n {
            for alpha in 0..n_fields {
                let _ = write!(out, ",{:.17e}", state.psp[a][alpha][node]);
            }
        }
        out.push('\n');
    }
    out
}

fn chart_from_config(cfg: &ScenarioConfig) -> Result<BundleCharts, CliError> {
    let raw = &cfg.raw;
    let n_fields = raw.usize_or("chart", "fields", 1)?;
    let kind = cfg.kind;
    let metric_entries: Option<Vec<Expr>> = match raw.get("chart", "metric") {
        None => None,
        Some((line, v)) => {
            let mut entries = Vec::new();
            for part in v.split(',') {
                let e = parse_expr_value(part.trim()).map_err(|msg| CliError::Config {
                    line: Some(*line),
                    field: Some("chart.metric".into()),
                    msg,
                })?;
                entries.push(e);
            }
            Some(entries)
        }
    };
    let volume = if raw.has("chart", "volume") {
        Some(raw.expr("chart", "volume")?)
    } else {
        None
    };
    let build_metric = |m: usize| -> Result<Option<Vec<Vec<Expr>>>, CliError> {
        match &metric_entries {
            None => Ok(None),
            Some(diag) => {
                if diag.len() != m {
                    return Err(CliError::field(
                        "chart.metric",
                        format!("expected {m} diagonal entries"),
                    ));
                }
                let mut g = vec![vec![Expr::zero(); m]; m];
                for (i, e) in diag.iter().enumerate() {
                    g[i][i] = e.clone();
                }
                Ok(Some(g))
            }
        }
    };
    match kind {
        ScenarioKind::Mechanics | ScenarioKind::HjVerify => {
            let m = raw.usize_or("chart", "m", 1)?;
            if m != 1 {
                return Err(CliError::field("chart.m", "mechanics scenarios use m = 1"));
            }
            Ok(BundleCharts::mechanics(n_fields))
        }
        ScenarioKind::ScalarField => {
            let m = raw.usize_or("chart", "m", 2)?;
            if !(1..=3).contains(&m) {
                return Err(CliError::field("chart.m", "field charts cover 1 <= m <= 3"));
            }
            BundleCharts::field(m, n_fields, build_metric(m)?, volume).map_err(|e| {
                CliError::field("chart", e.to_string())
            })
        }
        ScenarioKind::Cauchy => {
            let n = raw.usize_or("chart", "n", 1)?;
            if !(1..=2).contains(&n) {
                return Err(CliError::field("chart.n", "cauchy charts cover 1 <= n <= 2"));
            }
            BundleCharts::cauchy(n, n_fields, build_metric(n + 1)?, volume).map_err(|e| {
                CliError::field("chart", e.to_string())
            })
        }
        ScenarioKind::IdentitySuite => Ok(BundleCharts::mechanics(n_fields)),
    }
}

fn lee_form_from_config(
    cfg: &ScenarioConfig,
    charts: &BundleCharts,
) -> Result<LeeForm, CliError> {
    let mut comps = Vec::new();
    for name in charts.total.base_names() {
        comps.push(cfg.raw.expr_or("lee-form", &format!("theta_{name}"), Expr::zero())?);
    }
    LeeForm::new(charts, comps).map_err(from_bundle)
}

fn hamiltonian_from_config(
    cfg: &ScenarioConfig,
    charts: &BundleCharts,
) -> Result<HamiltonianData, CliError> {
    let h = cfg.raw.expr("hamiltonian", "H")?;
    HamiltonianData::new(charts, h).map_err(from_bundle)
}

/// Run one scenario to a report, writing its CSV artifacts under the
/// configured output directory.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport, CliError> {
    let started = Instant::now();
    let mut report = match cfg.kind {
        ScenarioKind::Mechanics => run_mechanics(cfg)?,
        ScenarioKind::ScalarField => run_scalar_field(cfg)?,
        ScenarioKind::HjVerify => run_hj_verify(cfg)?,
        ScenarioKind::Cauchy => run_cauchy(cfg)?,
        ScenarioKind::IdentitySuite => run_identity_suite(cfg)?,
    };
    report.wall_ms = started.elapsed().as_millis();
    let text = report.render();
    write_file(&mut report, cfg.out_dir.join("report.txt"), &text)?;
    let csv = report.csv();
    write_file(&mut report, cfg.out_dir.join("report.csv"), &csv)?;
    Ok(report)
}

fn run_mechanics(cfg: &ScenarioConfig) -> Result<RunReport, CliError> {
    let raw = &cfg.raw;
    let charts = chart_from_config(cfg)?;
    let ham = hamiltonian_from_config(cfg, &charts)?;
    let theta = lee_form_from_config(cfg, &charts)?;
    let n = charts.fiber_dim();
    let t_end = raw.f64_or("run", "t_end", 1.0)?;
    let dt = raw.f64_or("run", "dt", 1e-3)?;
    let mut sigma0 = Vec::new();
    let mut p0 = Vec::new();
    for alpha in 1..=n {
        sigma0.push(raw.f64_or("run", &format!("sigma0_{alpha}"), 0.0)?);
        p0.push(raw.f64_or("run", &format!("p0_{alpha}"), 1.0)?);
    }
    let traj = integrate_mechanics(&charts, &ham, &theta, &sigma0, &p0, t_end, dt)
        .map_err(from_dyn)?;
    let mut report = RunReport {
        scenario: "mechanics".into(),
        ..Default::default()
    };
    let (tf, sf, pf) = traj.last();
    report.note("t_final", format!("{tf:.6}"));
    for alpha in 0..n {
        report.note(format!("sigma_{}(T)", alpha + 1), format!("{:.10}", sf[alpha]));
        report.note(format!("p_{}(T)", alpha + 1), format!("{:.10}", pf[alpha]));
    }
    let residual = lchdw_residual_mech(&traj, &charts, &ham, &theta).map_err(from_dyn)?;
    let tol = raw.f64_or("run", "residual_tolerance", 1e-6)? * cfg.tolerance_scale;
    report.check("lchdw_residual", residual.max_abs, tol);
    let value_tol = raw.f64_or("run", "tolerance", 1e-8)? * cfg.tolerance_scale;
    for alpha in 1..=n {
        if raw.has("run", &format!("expect_p_{alpha}")) {
            let expect = raw.f64_or("run", &format!("expect_p_{alpha}"), 0.0)?;
            report.check(
                format!("p_{alpha}(T) - expected"),
                pf[alpha - 1] - expect,
                value_tol,
            );
        }
        if raw.has("run", &format!("expect_sigma_{alpha}")) {
            let expect = raw.f64_or("run", &format!("expect_sigma_{alpha}"), 0.0)?;
            report.check(
                format!("sigma_{alpha}(T) - expected"),
                sf[alpha - 1] - expect,
                value_tol,
            );
        }
    }
    // against the closed form when H is the free quadratic and θ constant
    let theta_const = theta.component(0).as_constant();
    if let Some(tc) = theta_const {
        use num_traits::ToPrimitive;
        let quadratic = (0..n).all(|alpha| {
            let d2 = ham.d_momentum(&charts, 0, alpha).diff(
                charts.jet_dual.momentum_name(0, alpha),
            );
            d2.is_one() && ham.d_fiber(&charts, alpha).is_zero()
        });
        if quadratic {
            let tc = tc.to_f64().unwrap_or(0.0);
            let mut worst = 0.0f64;
            for alpha in 0..n {
                let (se, pe) = conformal_closed_form(tc, sigma0[alpha], p0[alpha], tf);
                worst = worst
                    .max((sf[alpha] - se).abs())
                    .max((pf[alpha] - pe).abs());
            }
            report.check("closed_form_deviation", worst, value_tol);
        }
    }
    let csv = mech_trajectory_csv(&traj);
    write_file(&mut report, cfg.out_dir.join("trajectory.csv"), &csv)?;
    Ok(report)
}

fn gamma_from_config(
    cfg: &ScenarioConfig,
    charts: &BundleCharts,
    section: &str,
) -> Result<Option<GammaSection>, CliError> {
    if !cfg.raw.sections.contains_key(section) {
        return Ok(None);
    }
    let m = charts.base_dim();
    let n = charts.fiber_dim();
    let mut gamma = vec![vec![Expr::zero(); n]; m];
    for i in 0..m {
        for alpha in 0..n {
            let key = charts.jet_dual.momentum_name(i, alpha).to_string();
            gamma[i][alpha] = cfg.raw.expr_or(section, &key, Expr::zero())?;
        }
    }
    let rho = if cfg.raw.has(section, "rho") {
        Some(cfg.raw.expr(section, "rho")?)
    } else {
        None
    };
    GammaSection::new(charts, gamma, rho)
        .map(Some)
        .map_err(|e| CliError::field(section, e.to_string()))
}

fn run_scalar_field(cfg: &ScenarioConfig) -> Result<RunReport, CliError> {
    let raw = &cfg.raw;
    let charts = chart_from_config(cfg)?;
    let ham = hamiltonian_from_config(cfg, &charts)?;
    let theta = lee_form_from_config(cfg, &charts)?;
    let n = charts.fiber_dim();
    let m = charts.base_dim();
    let mut report = RunReport {
        scenario: "scalar-field".into(),
        ..Default::default()
    };
    let points = sample_points(&charts, 1.0);
    let sym_tol = raw.f64_or("run", "symbolic_tolerance", 1e-10)? * cfg.tolerance_scale;
    if raw.sections.contains_key("candidate") {
        let mut sigma = Vec::new();
        for alpha in 1..=n {
            sigma.push(raw.expr("candidate", &format!("sigma_{alpha}"))?);
        }
        let mut momenta = vec![vec![Expr::zero(); n]; m];
        for i in 0..m {
            for alpha in 0..n {
                let key = charts.jet_dual.momentum_name(i, alpha).to_string();
                momenta[i][alpha] = raw.expr_or("candidate", &key, Expr::zero())?;
            }
        }
        let section = FieldSection { sigma, momenta };
        let res =
            lchdw_residual_symbolic(&charts, &section, &ham, &theta).map_err(from_dyn)?;
        report.note("residual_components", format!("{}", res.components.len()));
        for (name, expr) in &res.components {
            if !expr.is_zero() {
                report.note(format!("residual {name}"), expr.to_string());
            }
        }
        report.check(
            "lchdw_symbolic_zero",
            if res.is_zero() { 0.0 } else { 1.0 },
            0.5,
        );
        let numeric = res.max_abs_on(&points).map_err(|e| CliError::Config {
            line: None,
            field: None,
            msg: e.to_string(),
        })?;
        report.check("lchdw_numeric", numeric, sym_tol);
    }
    if raw.sections.contains_key("reduced-hj") {
        let mut family = Vec::new();
        for name in charts.total.base_names() {
            family.push(raw.expr_or("reduced-hj", &format!("S_{name}"), Expr::zero())?);
        }
        let f = if raw.has("reduced-hj", "f") {
            Some(raw.expr("reduced-hj", "f")?)
        } else {
            None
        };
        let outcome = reduced_hj_residual(&charts, &family, &ham, f.as_ref())
            .map_err(|e| CliError::field("reduced-hj", e.to_string()))?;
        if outcome.f_was_inferred {
            report.note(
                "f_inferred",
                outcome
                    .inferred_f
                    .as_ref()
                    .map(|e| e.to_string())
                    .unwrap_or_default(),
            );
        }
        report.check(
            "reduced_hj_symbolic_zero",
            if outcome.residual.is_zero() { 0.0 } else { 1.0 },
            0.5,
        );
        let numeric = outcome
            .residual
            .max_abs_on(&points)
            .map_err(|e| CliError::Config {
                line: None,
                field: None,
                msg: e.to_string(),
            })?;
        report.check("reduced_hj_numeric", numeric, sym_tol);
    }
    if report.checks.is_empty() {
        return Err(CliError::field(
            "candidate",
            "scalar-field scenarios need a [candidate] or [reduced-hj] section",
        ));
    }
    Ok(report)
}

fn run_hj_verify(cfg: &ScenarioConfig) -> Result<RunReport, CliError> {
    let raw = &cfg.raw;
    let charts = chart_from_config(cfg)?;
    let ham = hamiltonian_from_config(cfg, &charts)?;
    let theta = lee_form_from_config(cfg, &charts)?;
    let g = gamma_from_config(cfg, &charts, "gamma")?
        .ok_or_else(|| CliError::field("gamma", "hj-verify scenarios need a [gamma] section"))?;
    let n = charts.fiber_dim();
    let t_end = raw.f64_or("run", "t_end", 1.0)?;
    let dt = raw.f64_or("run", "dt", 1e-3)?;
    let mut sigma0 = Vec::new();
    for alpha in 1..=n {
        sigma0.push(raw.f64_or("run", &format!("sigma0_{alpha}"), 0.0)?);
    }
    let tol = RoundtripTolerances {
        hj: raw.f64_or("run", "hj_tolerance", 1e-10)? * cfg.tolerance_scale,
        roundtrip: raw.f64_or("run", "roundtrip_tolerance", 1e-6)? * cfg.tolerance_scale,
    };
    let hjr = roundtrip_verify(&charts, &g, &ham, &theta, &sigma0, t_end, dt, tol)
        .map_err(|e| match e {
            crate::hj::HjError::Dyn(d) => from_dyn(d),
            other => CliError::Config {
                line: None,
                field: None,
                msg: other.to_string(),
            },
        })?;
    let mut report = RunReport {
        scenario: "hj-verify".into(),
        ..Default::default()
    };
    for (k, v) in hjr.describe() {
        report.note(k, v);
    }
    report.check("closedness", hjr.closedness_numeric, tol.hj);
    report.check("hj_residual", hjr.hj_numeric, tol.hj);
    report.check("roundtrip_residual", hjr.roundtrip_residual, tol.roundtrip);
    report.check(
        "equivalence",
        if hjr.equivalence { 0.0 } else { 1.0 },
        0.5,
    );
    let csv = mech_trajectory_csv(&hjr.trajectory);
    write_file(&mut report, cfg.out_dir.join("roundtrip.csv"), &csv)?;
    Ok(report)
}

fn cauchy_initial_state(
    cfg: &ScenarioConfig,
    charts: &BundleCharts,
    ham: &HamiltonianData,
    theta: &LeeForm,
    grid: GridSpec,
) -> Result<FieldState, CliError> {
    use crate::symexpr::CompiledExpr;
    let raw = &cfg.raw;
    let n = grid.spatial_dim();
    let n_fields = charts.fiber_dim();
    let spatial: Vec<String> = charts.total.base_names()[1..].to_vec();
    let ops = CauchyOps::new(charts, ham, theta).map_err(from_dyn)?;
    let mut state = FieldState::zeros(grid, n_fields, 0.0);
    for alpha in 0..n_fields {
        let sigma_expr = raw.expr("init", &format!("sigma_{}", alpha + 1))?;
        let pt_expr = raw.expr_or("init", &format!("pt_{}", alpha + 1), Expr::zero())?;
        let sigma_c = CompiledExpr::compile(&sigma_expr, &spatial).map_err(|e| {
            CliError::field("init", e.to_string())
        })?;
        let pt_c = CompiledExpr::compile(&pt_expr, &spatial).map_err(|e| {
            CliError::field("init", e.to_string())
        })?;
        // spatial momenta from the constraint pᵃ = (∂σ/∂xᵃ)/κ_a
        let mut grads = Vec::new();
        for name in &spatial {
            let c = CompiledExpr::compile(&sigma_expr.diff(name), &spatial)
                .map_err(|e| CliError::field("init", e.to_string()))?;
            grads.push(c);
        }
        let mut slots = vec![0.0; n];
        for node in 0..grid.total_nodes() {
            for a in 0..n {
                slots[a] = grid.position(node, a);
            }
            state.sigma[alpha][node] = sigma_c.eval(&slots);
            state.pt[alpha][node] = pt_c.eval(&slots);
            for a in 0..n {
                state.psp[a][alpha][node] = grads[a].eval(&slots) / ops.kappa[a][alpha];
            }
        }
    }
    Ok(state)
}

fn run_cauchy_once(
    cfg: &ScenarioConfig,
    charts: &BundleCharts,
    ham: &HamiltonianData,
    theta: &LeeForm,
    nodes: usize,
    scale: usize,
    report: &mut RunReport,
    write_fields: bool,
) -> Result<CauchyRunSummary, CliError> {
    let raw = &cfg.raw;
    let n = charts.base_dim() - 1;
    if nodes < 4 {
        return Err(CliError::field("grid.nodes", "needs at least 4 nodes"));
    }
    let grid = GridSpec::new(n, nodes);
    let t_end = raw.f64_or("run", "t_end", 0.5)?;
    // refinement ladders halve the time sampling together with Δx so both
    // truncation sources contract at the same order
    let dt = raw.f64_or("run", "dt", 1e-3)? / scale as f64;
    let dumps_wanted = (raw.usize_or("grid", "dumps", 10)?.max(2)) * scale;
    let steps = (t_end / dt).round() as usize;
    let dump_every = (steps / dumps_wanted).max(1);
    let init = cauchy_initial_state(cfg, charts, ham, theta, grid)?;
    let dumps = integrate_cauchy(charts, ham, theta, &init, t_end, dt, dump_every)
        .map_err(from_dyn)?;
    let grid_res = lchdw_residual_grid(&dumps, charts, ham, theta).map_err(from_dyn)?;
    let probes = crate::cauchy::vertical_probes(charts, grid, 2, cfg.seed);
    let to_cli = |e: crate::cauchy::CauchyError| -> CliError {
        CliError::Config {
            line: None,
            field: None,
            msg: e.to_string(),
        }
    };
    let preco = crate::cauchy::check_precosymplectic(charts, ham, theta, dumps.last().unwrap(), &probes)
        .map_err(to_cli)?;
    let infinite =
        crate::cauchy::infinite_hdw_residual(charts, &dumps, ham, theta, &probes).map_err(to_cli)?;
    let eta_entry = preco
        .entries
        .iter()
        .find(|(name, _)| name == "eta")
        .map(|(_, v)| *v)
        .unwrap_or(0.0);
    let preco_probes = preco
        .entries
        .iter()
        .filter(|(name, _)| name != "eta")
        .map(|(_, v)| v.abs())
        .fold(0.0f64, f64::max);
    if write_fields {
        for (k, state) in dumps.iter().enumerate() {
            let csv = field_state_csv(charts, state);
            write_file(report, cfg.out_dir.join(format!("fields_{k:04}.csv")), &csv)?;
        }
        // residual trace: one row per interior dump window
        let mut res_csv = String::from("t,r1_time,r1_space,r2\n");
        for k in 1..dumps.len().saturating_sub(1) {
            let window = &dumps[k - 1..=k + 1];
            let r = lchdw_residual_grid(window, charts, ham, theta).map_err(from_dyn)?;
            let _ = writeln!(
                res_csv,
                "{:.17e},{:.17e},{:.17e},{:.17e}",
                dumps[k].t, r.entries[0].1, r.entries[1].1, r.entries[2].1
            );
        }
        write_file(report, cfg.out_dir.join("residuals.csv"), &res_csv)?;
        report.note("eta_normalization_error", format!("{eta_entry:.3e}"));
    }
    if let Some(g) = gamma_from_config(cfg, charts, "gamma")? {
        let (part_i, part_ii) =
            crate::cauchy::hj_infinite_check(charts, &g, ham, theta, &dumps, cfg.seed)
                .map_err(to_cli)?;
        let hj_tol = raw.f64_or("run", "hj_infinite_tolerance", 1e-8)? * cfg.tolerance_scale;
        if write_fields {
            report.check("hj_infinite_pullback", part_i.max_abs, hj_tol);
            report.check("hj_infinite_contraction", part_ii.max_abs, hj_tol);
        }
    }
    Ok(CauchyRunSummary {
        eta: eta_entry,
        preco: preco_probes,
        infinite: infinite.max_abs,
        grid_residual: grid_res.max_abs,
        dt_dump: dump_every as f64 * dt,
    })
}

/// Aggregates of one Cauchy run: the residual monitors are central-difference
/// evaluations at the dump spacing, so their truncation floor is
/// O(Δx² + Δt_dump²).
struct CauchyRunSummary {
    eta: f64,
    preco: f64,
    infinite: f64,
    grid_residual: f64,
    dt_dump: f64,
}

fn run_cauchy(cfg: &ScenarioConfig) -> Result<RunReport, CliError> {
    let raw = &cfg.raw;
    let charts = chart_from_config(cfg)?;
    let ham = hamiltonian_from_config(cfg, &charts)?;
    let theta = lee_form_from_config(cfg, &charts)?;
    let nodes = raw.usize_or("grid", "nodes", 64)?;
    let mut report = RunReport {
        scenario: "cauchy".into(),
        ..Default::default()
    };
    let summary = run_cauchy_once(cfg, &charts, &ham, &theta, nodes, 1, &mut report, true)?;
    let dx = 1.0 / nodes as f64;
    let factor = raw.f64_or("run", "grid_tolerance_factor", 400.0)?;
    let grid_tol =
        factor * (dx * dx + summary.dt_dump * summary.dt_dump) * cfg.tolerance_scale;
    report.check("eta_normalization", summary.eta, 1e-12 * cfg.tolerance_scale);
    report.check("lchdw_grid", summary.grid_residual, grid_tol);
    report.check("precosymplectic", summary.preco, grid_tol);
    report.check("infinite_hdw", summary.infinite, grid_tol);
    if cfg.refine_levels > 0 {
        let mut ladder = Vec::new();
        for level in 0..=cfg.refine_levels {
            let nn = nodes << level;
            let mut scratch = RunReport::default();
            let s =
                run_cauchy_once(cfg, &charts, &ham, &theta, nn, 1 << level, &mut scratch, false)?;
            ladder.push((1.0 / nn as f64, s.preco.max(s.infinite)));
        }
        let mut csv = String::from("dx,residual\n");
        for (dx, r) in &ladder {
            let _ = writeln!(csv, "{dx:.17e},{r:.17e}");
        }
        write_file(&mut report, cfg.out_dir.join("refinement.csv"), &csv)?;
        for w in ladder.windows(2) {
            let order = (w[0].1 / w[1].1).log2();
            report.check("refinement_order - 2", order - 2.0, 0.3);
        }
        let monotone = ladder.windows(2).all(|w| w[1].1 < w[0].1);
        report.check("refinement_monotone", if monotone { 0.0 } else { 1.0 }, 0.5);
    }
    Ok(report)
}

fn run_identity_suite(cfg: &ScenarioConfig) -> Result<RunReport, CliError> {
    let instances = cfg.raw.usize_or("run", "instances", 50)?;
    let outcomes = identities::run_all(cfg.seed, instances);
    let mut report = RunReport {
        scenario: "identity-suite".into(),
        ..Default::default()
    };
    for outcome in outcomes {
        report.check(
            outcome.name,
            if outcome.pass { 0.0 } else { 1.0 },
            0.5,
        );
    }
    Ok(report)
}

/// Parsed command line: `lcmst run <config> [--out dir] [--seed n]
/// [--tolerance-scale f] [--refine levels]`.
pub struct CliArgs {
    pub config_path: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tolerance_scale: Option<f64>,
    pub refine: Option<usize>,
}

impl CliArgs {
    pub fn parse(args: &[String]) -> Result<Self, String> {
        let mut it = args.iter();
        match it.next().map(|s| s.as_str()) {
            Some("run") => {}
            Some(other) => return Err(format!("unknown command `{other}`; expected `run`")),
            None => return Err("usage: lcmst run <config> [--out dir] [--seed n] [--tolerance-scale f] [--refine levels]".into()),
        }
        let config_path = PathBuf::from(
            it.next()
                .ok_or_else(|| "missing config path".to_string())?,
        );
        let mut out = None;
        let mut seed = None;
        let mut tolerance_scale = None;
        let mut refine = None;
        while let Some(flag) = it.next() {
            let mut value = |name: &str| -> Result<String, String> {
                it.next()
                    .cloned()
                    .ok_or_else(|| format!("{name} needs a value"))
            };
            match flag.as_str() {
                "--out" => out = Some(PathBuf::from(value("--out")?)),
                "--seed" => {
                    seed = Some(
                        value("--seed")?
                            .parse()
                            .map_err(|_| "--seed needs an integer".to_string())?,
                    )
                }
                "--tolerance-scale" => {
                    tolerance_scale = Some(
                        value("--tolerance-scale")?
                            .parse()
                            .map_err(|_| "--tolerance-scale needs a number".to_string())?,
                    )
                }
                "--refine" => {
                    refine = Some(
                        value("--refine")?
                            .parse()
                            .map_err(|_| "--refine needs an integer".to_string())?,
                    )
                }
                other => return Err(format!("unknown flag `{other}`")),
            }
        }
        Ok(CliArgs {
            config_path,
            out,
            seed,
            tolerance_scale,
            refine,
        })
    }
}

/// Load, apply overrides, run; returns the report and the process exit code.
pub fn execute(args: &CliArgs) -> (Option<RunReport>, i32) {
    let mut cfg = match ScenarioConfig::load(&args.config_path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return (None, e.exit_code());
        }
    };
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(scale) = args.tolerance_scale {
        cfg.tolerance_scale = scale;
    }
    if let Some(levels) = args.refine {
        cfg.refine_levels = levels;
    }
    match run_scenario(&cfg) {
        Ok(report) => {
            print!("{}", report.render());
            let code = if report.pass() { 0 } else { 1 };
            (Some(report), code)
        }
        Err(e) => {
            eprintln!("{e}");
            (None, e.exit_code())
        }
    }
}
