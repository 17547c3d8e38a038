//! Metric specifications: the on-disk format, validation, and evaluation of
//! the squared norm `F^2` over scalars and jets.
//!
//! A metric file is TOML with a `[metric]` header and kind specific sections:
//!
//! ```toml
//! [metric]
//! name = "euclidean"
//! kind = "general"          # or "alpha_beta" or "randers"
//! dim = 3
//! region_center = [0.0, 0.0, 0.0]
//! region_radius = 0.5
//!
//! [general]
//! f2 = "y1^2 + y2^2 + y3^2"
//! ```
//!
//! `alpha_beta` metrics give a Riemannian matrix `[alpha]` with entries
//! `a_ij` for `i <= j` (missing off-diagonal entries default to zero), a one
//! form `[beta]` with entries `b_i`, and `[phi]` with the generating function
//! `phi` in the single variable `s`; the norm is `F = alpha phi(beta/alpha)`.
//! `randers` metrics are the special case `phi = 1 + s` and must not carry a
//! `[phi]` section. Components of `alpha` and `beta` may reference only
//! `x1..xn`, which makes `F` structurally homogeneous; `general` metrics give
//! `f2 = F^2` in `x1..xn, y1..yn` directly and are checked numerically for
//! homogeneity of degree two in `y` at load time.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::expr::{Expr, JetContext, ScalarContext};
use crate::jet::{Jet, JetConfig};
use crate::num::Real;
use crate::rng::Pcg32;

/// Component data of an `alpha_beta` or `randers` metric.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaBetaData {
    /// Full symmetric matrix of expressions in `x1..xn`.
    pub a: Vec<Vec<Expr>>,
    /// One form components in `x1..xn`.
    pub b: Vec<Expr>,
    /// Generating function in the single variable `s`.
    pub phi: Expr,
}

/// Metric kind with its defining expressions.
#[derive(Clone, Debug, PartialEq)]
pub enum MetricKind {
    General { f2: Expr },
    AlphaBeta(AlphaBetaData),
    Randers(AlphaBetaData),
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::General { .. } => "general",
            MetricKind::AlphaBeta(_) => "alpha_beta",
            MetricKind::Randers(_) => "randers",
        }
    }

    /// The alpha/beta data when this metric has that structure.
    pub fn alpha_beta(&self) -> Option<&AlphaBetaData> {
        match self {
            MetricKind::General { .. } => None,
            MetricKind::AlphaBeta(d) | MetricKind::Randers(d) => Some(d),
        }
    }
}

/// A validated metric with its sampling region.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricSpec {
    pub name: String,
    pub dim: usize,
    pub region_center: Vec<f64>,
    pub region_radius: f64,
    pub kind: MetricKind,
}

/// Position variable names `x1..xn`.
pub fn x_names(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

/// Direction variable names `y1..yn`.
pub fn y_names(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("y{i}")).collect()
}

/// Resolves `x1..xn, y1..yn` to the variable index in the `2n` jet layout,
/// positions first.
pub fn state_index(name: &str, dim: usize) -> Option<usize> {
    let (head, tail) = name.split_at(1);
    let idx: usize = tail.parse().ok()?;
    if idx == 0 || idx > dim {
        return None;
    }
    match head {
        "x" => Some(idx - 1),
        "y" => Some(dim + idx - 1),
        _ => None,
    }
}

impl MetricSpec {
    /// Builds and validates a metric from parts.
    pub fn new(
        name: String,
        dim: usize,
        region_center: Vec<f64>,
        region_radius: f64,
        kind: MetricKind,
    ) -> Result<MetricSpec> {
        let spec = MetricSpec { name, dim, region_center, region_radius, kind };
        spec.validate()?;
        Ok(spec)
    }

    /// Parses and validates a metric file.
    pub fn from_file_string(source: &str) -> Result<MetricSpec> {
        parse_metric_file(source)
    }

    /// Renders the metric in the canonical file format; the output parses
    /// back to an equal specification.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        out.push_str("[metric]\n");
        out.push_str(&format!("name = \"{}\"\n", self.name));
        out.push_str(&format!("kind = \"{}\"\n", self.kind.name()));
        out.push_str(&format!("dim = {}\n", self.dim));
        let center: Vec<String> = self.region_center.iter().map(|c| format_float(*c)).collect();
        out.push_str(&format!("region_center = [{}]\n", center.join(", ")));
        out.push_str(&format!("region_radius = {}\n", format_float(self.region_radius)));
        match &self.kind {
            MetricKind::General { f2 } => {
                out.push_str("\n[general]\n");
                out.push_str(&format!("f2 = \"{f2}\"\n"));
            }
            MetricKind::AlphaBeta(data) | MetricKind::Randers(data) => {
                out.push_str("\n[alpha]\n");
                for i in 0..self.dim {
                    for j in i..self.dim {
                        // Zero entries are omitted; they reload as defaults.
                        if data.a[i][j] == Expr::Number(0.0) {
                            continue;
                        }
                        out.push_str(&format!("a_{}{} = \"{}\"\n", i + 1, j + 1, data.a[i][j]));
                    }
                }
                out.push_str("\n[beta]\n");
                for (i, b) in data.b.iter().enumerate() {
                    if *b == Expr::Number(0.0) {
                        continue;
                    }
                    out.push_str(&format!("b_{} = \"{}\"\n", i + 1, b));
                }
                if matches!(self.kind, MetricKind::AlphaBeta(_)) {
                    out.push_str("\n[phi]\n");
                    out.push_str(&format!("phi = \"{}\"\n", data.phi));
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.dim) {
            return Err(Error::UnsupportedDimension {
                dim: self.dim,
                msg: "supported dimensions are 2..=4".into(),
            });
        }
        if self.name.is_empty() {
            return Err(Error::MetricFile { field: "metric.name".into(), msg: "empty".into() });
        }
        if self.region_center.len() != self.dim {
            return Err(Error::MetricFile {
                field: "metric.region_center".into(),
                msg: format!(
                    "expected {} coordinates, got {}",
                    self.dim,
                    self.region_center.len()
                ),
            });
        }
        if !(self.region_radius > 0.0) || !self.region_radius.is_finite() {
            return Err(Error::MetricFile {
                field: "metric.region_radius".into(),
                msg: "must be positive and finite".into(),
            });
        }
        let x_allowed: BTreeSet<String> = x_names(self.dim).into_iter().collect();
        let mut xy_allowed = x_allowed.clone();
        xy_allowed.extend(y_names(self.dim));
        match &self.kind {
            MetricKind::General { f2 } => {
                check_variables("general.f2", f2, &xy_allowed)?;
                self.check_homogeneity()?;
            }
            MetricKind::AlphaBeta(data) | MetricKind::Randers(data) => {
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        check_variables(&format!("alpha.a_{}{}", i + 1, j + 1), &data.a[i][j], &x_allowed)?;
                    }
                }
                for (i, b) in data.b.iter().enumerate() {
                    check_variables(&format!("beta.b_{}", i + 1), b, &x_allowed)?;
                }
                let s_only: BTreeSet<String> = std::iter::once("s".to_string()).collect();
                check_variables("phi.phi", &data.phi, &s_only)?;
                self.check_alpha_positive(data)?;
            }
        }
        Ok(())
    }

    /// Numeric check that `f2` is homogeneous of degree two in `y`:
    /// `f2(x, t y) = t^2 f2(x, y)` for `t` in `{2, 3}` at five sampled
    /// points, to relative `1e-9`.
    fn check_homogeneity(&self) -> Result<()> {
        let mut rng = Pcg32::new(0xF1A5);
        let mut checked = 0;
        let mut attempts = 0;
        while checked < 5 {
            attempts += 1;
            if attempts > 100 {
                return Err(Error::MetricFile {
                    field: "general.f2".into(),
                    msg: "cannot evaluate inside the region (domain errors at sampled points)"
                        .into(),
                });
            }
            let x = rng.in_ball::<f64>(&self.region_center, self.region_radius);
            let y = rng.unit_vector::<f64>(self.dim);
            let base = match self.eval_f2_scalar(&x, &y) {
                Ok(v) => v,
                Err(_) => continue,
            };
            for t in [2.0f64, 3.0] {
                let ty: Vec<f64> = y.iter().map(|v| v * t).collect();
                let scaled = match self.eval_f2_scalar(&x, &ty) {
                    Ok(v) => v,
                    Err(_) => continue,
                };
                let expected = t * t * base;
                let deviation = (scaled - expected).abs() / expected.abs().max(1e-30);
                if deviation > 1e-9 {
                    return Err(Error::Homogeneity {
                        what: "f2 in y".into(),
                        expected,
                        observed: scaled,
                        deviation,
                    });
                }
            }
            checked += 1;
        }
        Ok(())
    }

    /// The Riemannian part of an alpha/beta metric must be positive definite
    /// at the region center.
    fn check_alpha_positive(&self, data: &AlphaBetaData) -> Result<()> {
        let a = self.eval_alpha_matrix(&self.region_center, data)?;
        let mat = crate::linalg::Mat::from_fn(self.dim, self.dim, |i, j| a[i][j]);
        crate::linalg::cholesky_solve(&mat, &vec![0.0; self.dim]).map_err(|e| match e {
            Error::NotPositiveDefinite { pivot, step } => Error::MetricFile {
                field: "alpha".into(),
                msg: format!(
                    "matrix is not positive definite at the region center (pivot {pivot:.3e} at step {step})"
                ),
            },
            other => other,
        })?;
        Ok(())
    }

    fn eval_alpha_matrix(&self, x: &[f64], data: &AlphaBetaData) -> Result<Vec<Vec<f64>>> {
        let names = x_names(self.dim);
        let ctx = ScalarContext::<f64>::new(names.clone(), |n| {
            state_index(n, self.dim).filter(|&i| i < self.dim).map(|i| x[i])
        });
        let mut out = vec![vec![0.0; self.dim]; self.dim];
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i][j] = data.a[i][j].eval(&ctx)?;
            }
        }
        Ok(out)
    }

    /// Scalar `F^2` at `(x, y)`.
    pub fn eval_f2_scalar(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match &self.kind {
            MetricKind::General { f2 } => {
                let ctx = ScalarContext::<f64>::new(
                    x_names(self.dim).into_iter().chain(y_names(self.dim)).collect(),
                    |n| {
                        state_index(n, self.dim).map(|i| if i < self.dim { x[i] } else { y[i - self.dim] })
                    },
                );
                f2.eval(&ctx)
            }
            MetricKind::AlphaBeta(data) | MetricKind::Randers(data) => {
                let a = self.eval_alpha_matrix(x, data)?;
                let names = x_names(self.dim);
                let ctx = ScalarContext::<f64>::new(names, |n| {
                    state_index(n, self.dim).filter(|&i| i < self.dim).map(|i| x[i])
                });
                let mut alpha2 = 0.0;
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        alpha2 += a[i][j] * y[i] * y[j];
                    }
                }
                if alpha2 <= 0.0 {
                    return Err(Error::Domain { func: "sqrt", value: alpha2 });
                }
                let alpha = alpha2.sqrt();
                let mut beta = 0.0;
                for (i, b) in data.b.iter().enumerate() {
                    beta += b.eval(&ctx)? * y[i];
                }
                let s = beta / alpha;
                let phi_ctx =
                    ScalarContext::<f64>::new(vec!["s".into()], move |n| (n == "s").then_some(s));
                let phi = data.phi.eval(&phi_ctx)?;
                Ok(alpha2 * phi * phi)
            }
        }
    }

    /// Scalar `F` at `(x, y)`; errors if `F^2` is not positive there.
    pub fn eval_f_scalar(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let f2 = self.eval_f2_scalar(x, y)?;
        if f2 <= 0.0 {
            return Err(Error::Domain { func: "sqrt", value: f2 });
        }
        Ok(f2.sqrt())
    }

    /// `F^2` as a jet in the `2n` state variables, lifted at `(x, y)`.
    pub fn f2_jet<T: Real>(&self, config: &JetConfig, x: &[T], y: &[T]) -> Result<Jet<T>> {
        assert_eq!(config.num_vars(), 2 * self.dim, "jet config must have 2 dim variables");
        let lift = |var: usize| -> Result<Jet<T>> {
            let value = if var < self.dim { x[var] } else { y[var - self.dim] };
            Jet::variable(config, var, value)
        };
        match &self.kind {
            MetricKind::General { f2 } => {
                let dim = self.dim;
                let ctx = JetContext::<T>::new(
                    config.clone(),
                    x_names(dim).into_iter().chain(y_names(dim)).collect(),
                    move |n| state_index(n, dim).and_then(|v| lift(v).ok()),
                );
                f2.eval(&ctx)
            }
            MetricKind::AlphaBeta(data) | MetricKind::Randers(data) => {
                let dim = self.dim;
                let x_ctx = JetContext::<T>::new(config.clone(), x_names(dim), move |n| {
                    state_index(n, dim).filter(|&v| v < dim).and_then(|v| lift(v).ok())
                });
                let y_jets: Vec<Jet<T>> = (0..dim)
                    .map(|i| Jet::variable(config, dim + i, y[i]))
                    .collect::<Result<_>>()?;
                let mut alpha2 = Jet::constant(config, T::zero());
                for i in 0..dim {
                    for j in 0..dim {
                        let aij = data.a[i][j].eval(&x_ctx)?;
                        let term = aij.mul(&y_jets[i])?.mul(&y_jets[j])?;
                        alpha2 = alpha2.add(&term)?;
                    }
                }
                let alpha = alpha2.sqrt()?;
                let mut beta = Jet::constant(config, T::zero());
                for (i, b) in data.b.iter().enumerate() {
                    beta = beta.add(&b.eval(&x_ctx)?.mul(&y_jets[i])?)?;
                }
                let s = beta.div(&alpha)?;
                let series = phi_series::<T>(&data.phi, s.value(), s.valid_order())?;
                let phi = s.compose_series(&series);
                alpha2.mul(&phi)?.mul(&phi)
            }
        }
    }
}

/// Univariate Taylor coefficients of an expression in `s` at `s0`, in the
/// derivative-over-factorial convention, computed by running the jet engine
/// on a two variable configuration with `s` lifted as the first variable.
pub fn phi_series<T: Real>(phi: &Expr, s0: T, order: usize) -> Result<Vec<T>> {
    let config = JetConfig::get(2, order.max(1))?;
    let ctx = JetContext::<T>::new(config.clone(), vec!["s".into()], {
        let config = config.clone();
        move |n| (n == "s").then(|| Jet::variable(&config, 0, s0).expect("var 0 exists"))
    });
    let jet = phi.eval(&ctx)?;
    let mut out = Vec::with_capacity(order + 1);
    for k in 0..=order {
        out.push(jet.coeff(&[k as u8, 0])?);
    }
    Ok(out)
}

fn format_float(v: f64) -> String {
    let s = format!("{v}");
    // Keep TOML floats recognizable as floats.
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

fn check_variables(field: &str, expr: &Expr, allowed: &BTreeSet<String>) -> Result<()> {
    for var in expr.variables() {
        if !allowed.contains(&var) {
            return Err(Error::MetricFile {
                field: field.into(),
                msg: format!(
                    "unknown variable '{var}' (expected one of: {})",
                    allowed.iter().cloned().collect::<Vec<_>>().join(", ")
                ),
            });
        }
    }
    Ok(())
}

fn parse_metric_file(source: &str) -> Result<MetricSpec> {
    let table: toml::Table = source.parse().map_err(|e: toml::de::Error| Error::MetricFile {
        field: "file".into(),
        msg: e.to_string(),
    })?;
    for key in table.keys() {
        if !["metric", "general", "alpha", "beta", "phi"].contains(&key.as_str()) {
            return Err(Error::MetricFile {
                field: key.clone(),
                msg: "unknown section".into(),
            });
        }
    }
    let metric = get_table(&table, "metric")?;
    for key in metric.keys() {
        if !["name", "kind", "dim", "region_center", "region_radius"].contains(&key.as_str()) {
            return Err(Error::MetricFile {
                field: format!("metric.{key}"),
                msg: "unknown key".into(),
            });
        }
    }
    let name = get_str(metric, "metric", "name")?;
    let kind_name = get_str(metric, "metric", "kind")?;
    let dim = get_usize(metric, "metric", "dim")?;
    if !(2..=4).contains(&dim) {
        return Err(Error::UnsupportedDimension { dim, msg: "supported dimensions are 2..=4".into() });
    }
    let region_center = get_float_array(metric, "metric", "region_center")?;
    let region_radius = get_float(metric, "metric", "region_radius")?;

    let kind = match kind_name.as_str() {
        "general" => {
            require_sections(&table, &["general"], &["alpha", "beta", "phi"])?;
            let general = get_table(&table, "general")?;
            for key in general.keys() {
                if key != "f2" {
                    return Err(Error::MetricFile {
                        field: format!("general.{key}"),
                        msg: "unknown key".into(),
                    });
                }
            }
            let f2 = parse_expr_field(general, "general", "f2")?;
            MetricKind::General { f2 }
        }
        "alpha_beta" | "randers" => {
            if kind_name == "alpha_beta" {
                require_sections(&table, &["alpha", "beta", "phi"], &["general"])?;
            } else {
                require_sections(&table, &["alpha", "beta"], &["general", "phi"])?;
            }
            let alpha = get_table(&table, "alpha")?;
            let beta = get_table(&table, "beta")?;
            let mut a = vec![vec![Expr::Number(0.0); dim]; dim];
            let mut seen_diag = vec![false; dim];
            for (key, value) in alpha {
                let (i, j) = parse_matrix_key(key, dim, "alpha")?;
                let expr = parse_expr_value(value, &format!("alpha.{key}"))?;
                if i == j {
                    seen_diag[i] = true;
                }
                a[i][j] = expr.clone();
                a[j][i] = expr;
            }
            for (i, seen) in seen_diag.iter().enumerate() {
                if !seen {
                    return Err(Error::MetricFile {
                        field: format!("alpha.a_{}{}", i + 1, i + 1),
                        msg: "missing diagonal entry".into(),
                    });
                }
            }
            let mut b = vec![Expr::Number(0.0); dim];
            for (key, value) in beta {
                let i = parse_vector_key(key, dim, "beta")?;
                b[i] = parse_expr_value(value, &format!("beta.{key}"))?;
            }
            let phi = if kind_name == "alpha_beta" {
                let phi_table = get_table(&table, "phi")?;
                for key in phi_table.keys() {
                    if key != "phi" {
                        return Err(Error::MetricFile {
                            field: format!("phi.{key}"),
                            msg: "unknown key".into(),
                        });
                    }
                }
                parse_expr_field(phi_table, "phi", "phi")?
            } else {
                Expr::parse("1 + s").expect("static expression parses")
            };
            let data = AlphaBetaData { a, b, phi };
            if kind_name == "alpha_beta" {
                MetricKind::AlphaBeta(data)
            } else {
                MetricKind::Randers(data)
            }
        }
        other => {
            return Err(Error::MetricFile {
                field: "metric.kind".into(),
                msg: format!("unknown kind '{other}' (expected general, alpha_beta, or randers)"),
            });
        }
    };

    MetricSpec::new(name, dim, region_center, region_radius, kind)
}

fn require_sections(table: &toml::Table, required: &[&str], forbidden: &[&str]) -> Result<()> {
    for section in required {
        if !table.contains_key(*section) {
            return Err(Error::MetricFile {
                field: (*section).into(),
                msg: "section is required for this metric kind".into(),
            });
        }
    }
    for section in forbidden {
        if table.contains_key(*section) {
            return Err(Error::MetricFile {
                field: (*section).into(),
                msg: "section is not allowed for this metric kind".into(),
            });
        }
    }
    Ok(())
}

fn parse_matrix_key(key: &str, dim: usize, section: &str) -> Result<(usize, usize)> {
    let bad = || Error::MetricFile {
        field: format!("{section}.{key}"),
        msg: format!("expected keys a_ij with 1 <= i <= j <= {dim}"),
    };
    let digits = key.strip_prefix("a_").ok_or_else(bad)?;
    if digits.len() != 2 {
        return Err(bad());
    }
    let i: usize = digits[..1].parse().map_err(|_| bad())?;
    let j: usize = digits[1..].parse().map_err(|_| bad())?;
    if i == 0 || j == 0 || i > dim || j > dim || i > j {
        return Err(bad());
    }
    Ok((i - 1, j - 1))
}

fn parse_vector_key(key: &str, dim: usize, section: &str) -> Result<usize> {
    let bad = || Error::MetricFile {
        field: format!("{section}.{key}"),
        msg: format!("expected keys b_i with 1 <= i <= {dim}"),
    };
    let digits = key.strip_prefix("b_").ok_or_else(bad)?;
    let i: usize = digits.parse().map_err(|_| bad())?;
    if i == 0 || i > dim {
        return Err(bad());
    }
    Ok(i - 1)
}

fn get_table<'a>(table: &'a toml::Table, key: &str) -> Result<&'a toml::Table> {
    table
        .get(key)
        .and_then(|v| v.as_table())
        .ok_or_else(|| Error::MetricFile { field: key.into(), msg: "missing section".into() })
}

fn get_str(table: &toml::Table, section: &str, key: &str) -> Result<String> {
    table
        .get(key)
        .and_then(|v| v.as_str())
        .map(String::from)
        .ok_or_else(|| Error::MetricFile {
            field: format!("{section}.{key}"),
            msg: "missing or not a string".into(),
        })
}

fn get_usize(table: &toml::Table, section: &str, key: &str) -> Result<usize> {
    table
        .get(key)
        .and_then(|v| v.as_integer())
        .filter(|&v| v >= 0)
        .map(|v| v as usize)
        .ok_or_else(|| Error::MetricFile {
            field: format!("{section}.{key}"),
            msg: "missing or not a nonnegative integer".into(),
        })
}

fn get_float(table: &toml::Table, section: &str, key: &str) -> Result<f64> {
    table
        .get(key)
        .and_then(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)))
        .ok_or_else(|| Error::MetricFile {
            field: format!("{section}.{key}"),
            msg: "missing or not a number".into(),
        })
}

fn get_float_array(table: &toml::Table, section: &str, key: &str) -> Result<Vec<f64>> {
    let arr = table.get(key).and_then(|v| v.as_array()).ok_or_else(|| Error::MetricFile {
        field: format!("{section}.{key}"),
        msg: "missing or not an array".into(),
    })?;
    arr.iter()
        .map(|v| {
            v.as_float().or_else(|| v.as_integer().map(|i| i as f64)).ok_or_else(|| {
                Error::MetricFile {
                    field: format!("{section}.{key}"),
                    msg: "array entries must be numbers".into(),
                }
            })
        })
        .collect()
}

fn parse_expr_field(table: &toml::Table, section: &str, key: &str) -> Result<Expr> {
    let text = get_str(table, section, key)?;
    Expr::parse(&text).map_err(|e| match e {
        Error::Parse { line, col, msg } => Error::MetricFile {
            field: format!("{section}.{key}"),
            msg: format!("parse error at line {line}, column {col}: {msg}"),
        },
        other => other,
    })
}

fn parse_expr_value(value: &toml::Value, field: &str) -> Result<Expr> {
    let text = value.as_str().ok_or_else(|| Error::MetricFile {
        field: field.into(),
        msg: "expected a string containing an expression".into(),
    })?;
    Expr::parse(text).map_err(|e| match e {
        Error::Parse { line, col, msg } => Error::MetricFile {
            field: field.into(),
            msg: format!("parse error at line {line}, column {col}: {msg}"),
        },
        other => other,
    })
}
