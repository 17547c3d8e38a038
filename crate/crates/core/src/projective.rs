//! Projective deformations of sprays, `G^i ↦ G^i + P y^i` with a
//! 1-homogeneous factor `P`, and numerical checks of the quantities that
//! such a change preserves or transports by a closed formula.

use crate::classify::{self, lowered_y, project_off_y, FitResult};
use crate::curvature::CurvatureBundle;
use crate::error::{Error, Result};
use crate::expr::{Expr, JetContext};
use crate::geometry::{sample_states, SprayJets};
use crate::jet::{Jet, JetConfig};
use crate::metric::{state_index, x_names, y_names, MetricSpec};
use crate::num::{real, Real};
use crate::tensor::{JetTensor, TensorSample, Variance};
use serde::{Deserialize, Serialize};

/// Relative tolerance for the 1-homogeneity validation of a factor.
const HOMOGENEITY_TOL: f64 = 1e-9;
/// Number of random states the homogeneity validation samples.
const HOMOGENEITY_POINTS: usize = 5;

/// A projective factor `P(x, y)`, positively `y`-homogeneous of degree one.
#[derive(Debug, Clone)]
pub enum ProjectiveFactor {
    /// Arbitrary expression in the state variables; homogeneity is checked
    /// numerically before use.
    Expression(Expr),
    /// `c·β` for a metric carrying a 1-form.
    ScaledBeta(f64),
    /// `c·α` for a metric carrying a Riemannian norm.
    ScaledAlpha(f64),
    /// `c·F`, the metric's own norm.
    ScaledNorm(f64),
}

impl ProjectiveFactor {
    /// Parses `"beta"`, `"alpha"`, `"F"`, optionally scaled as in
    /// `"0.1*F"` or `"2.5*beta"`; anything else is parsed as an expression
    /// in the state variables.
    pub fn parse(source: &str) -> Result<ProjectiveFactor> {
        let trimmed = source.trim();
        let (scale, keyword) = match trimmed.split_once('*') {
            Some((num, rest)) => match num.trim().parse::<f64>() {
                Ok(c) => (c, rest.trim()),
                Err(_) => return Ok(ProjectiveFactor::Expression(Expr::parse(trimmed)?)),
            },
            None => (1.0, trimmed),
        };
        Ok(match keyword {
            "beta" => ProjectiveFactor::ScaledBeta(scale),
            "alpha" => ProjectiveFactor::ScaledAlpha(scale),
            "F" => ProjectiveFactor::ScaledNorm(scale),
            _ => ProjectiveFactor::Expression(Expr::parse(trimmed)?),
        })
    }

    /// Human-readable form for reports.
    pub fn describe(&self) -> String {
        match self {
            ProjectiveFactor::Expression(e) => format!("{e}"),
            ProjectiveFactor::ScaledBeta(c) => format!("{c} * beta"),
            ProjectiveFactor::ScaledAlpha(c) => format!("{c} * alpha"),
            ProjectiveFactor::ScaledNorm(c) => format!("{c} * F"),
        }
    }

    /// Lifts the factor to a jet at `(x, y)` under the metric's state
    /// variables.
    pub fn jet<T: Real>(
        &self,
        metric: &MetricSpec,
        config: &JetConfig,
        x: &[T],
        y: &[T],
    ) -> Result<Jet<T>> {
        let n = metric.dim;
        assert_eq!(config.num_vars(), 2 * n, "jet config must have 2 dim variables");
        match self {
            ProjectiveFactor::Expression(expr) => {
                let lift = move |var: usize| -> Result<Jet<T>> {
                    let value = if var < n { x[var] } else { y[var - n] };
                    Jet::variable(config, var, value)
                };
                let ctx = JetContext::<T>::new(
                    config.clone(),
                    x_names(n).into_iter().chain(y_names(n)).collect(),
                    move |name| state_index(name, n).and_then(|v| lift(v).ok()),
                );
                expr.eval(&ctx)
            }
            ProjectiveFactor::ScaledBeta(c) => {
                Ok(form_jets(metric, config, x, y, "projective factor beta")?
                    .1
                    .scale(real::<T>(*c)))
            }
            ProjectiveFactor::ScaledAlpha(c) => {
                Ok(form_jets(metric, config, x, y, "projective factor alpha")?
                    .0
                    .scale(real::<T>(*c)))
            }
            ProjectiveFactor::ScaledNorm(c) => {
                Ok(metric.f2_jet(config, x, y)?.sqrt()?.scale(real::<T>(*c)))
            }
        }
    }

    /// Verifies `P(x, λy) = λ P(x, y)` for `λ ∈ {2, 3}` at a handful of
    /// sampled states, to relative accuracy.
    pub fn validate(&self, metric: &MetricSpec, seed: u64) -> Result<()> {
        let config = JetConfig::get(2 * metric.dim, 1)?;
        let states = sample_states(metric, HOMOGENEITY_POINTS, seed)?;
        for state in &states {
            let base: f64 = self.jet::<f64>(metric, &config, &state.x, &state.y)?.value();
            for lambda in [2.0f64, 3.0] {
                let scaled_y: Vec<f64> = state.y.iter().map(|v| lambda * v).collect();
                let scaled = self.jet::<f64>(metric, &config, &state.x, &scaled_y)?.value();
                let expected = lambda * base;
                let deviation = (scaled - expected).abs();
                if deviation > HOMOGENEITY_TOL * (1.0 + expected.abs()) {
                    return Err(Error::Homogeneity {
                        what: format!(
                            "projective factor {} must be 1-homogeneous in y",
                            self.describe()
                        ),
                        expected,
                        observed: scaled,
                        deviation,
                    });
                }
            }
        }
        Ok(())
    }
}

/// `(α, β)` jets for the factor library, built from a metric's form data.
fn form_jets<T: Real>(
    metric: &MetricSpec,
    config: &JetConfig,
    x: &[T],
    y: &[T],
    op: &'static str,
) -> Result<(Jet<T>, Jet<T>)> {
    let Some(data) = metric.kind.alpha_beta() else {
        return Err(Error::NotAlphaBeta { op: op.to_string(), kind: metric.kind.name().to_string() });
    };
    let n = metric.dim;
    let x_owned: Vec<T> = x.to_vec();
    let cfg = config.clone();
    let x_ctx = JetContext::<T>::new(config.clone(), x_names(n), move |name| {
        state_index(name, n)
            .filter(|&v| v < n)
            .and_then(|v| Jet::variable(&cfg, v, x_owned[v]).ok())
    });
    let y_jets: Vec<Jet<T>> = (0..n)
        .map(|i| Jet::variable(config, n + i, y[i]))
        .collect::<Result<_>>()?;
    let mut alpha2 = Jet::constant(config, T::zero());
    for i in 0..n {
        for j in 0..n {
            let aij = data.a[i][j].eval(&x_ctx)?;
            alpha2 = alpha2.add(&aij.mul(&y_jets[i])?.mul(&y_jets[j])?)?;
        }
    }
    let mut beta = Jet::constant(config, T::zero());
    for (i, b) in data.b.iter().enumerate() {
        beta = beta.add(&b.eval(&x_ctx)?.mul(&y_jets[i])?)?;
    }
    Ok((alpha2.sqrt()?, beta))
}

/// Builds the projectively deformed spray `Ḡ^i = G^i + P y^i` on top of the
/// base metric data; the fundamental tensor and norm stay those of the base.
pub fn transform_spray<T: Real>(base: &SprayJets<T>, p: &Jet<T>) -> Result<SprayJets<T>> {
    let y_jets = base.y_jets();
    let spray = JetTensor::from_fn(base.dim(), &[Variance::Up], |idx| {
        base.spray.get(&[idx[0]]).add(&p.mul(&y_jets[idx[0]])?)
    })?;
    base.with_spray(spray)
}

/// All residuals of the transport and invariance formulas at one state.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
pub struct ProjectiveResiduals<T> {
    /// `‖D̄ − D‖ / (1 + ‖D‖)`: the Douglas tensor is unchanged.
    pub douglas_invariance: T,
    /// Residual of `R̄^i_k = R^i_k + Ξ δ^i_k + τ_k y^i` with
    /// `Ξ = P² − P_{|0}` and `τ_k = 3(P_{|k} − P P_{.k}) + Ξ_{.k}`, the
    /// covariant derivatives taken in the base connection; relative to
    /// `1 + ‖R‖ + ‖R̄‖`.
    pub riemann_law: T,
    /// Residual of the Berwald expansion
    /// `B̄ = B + P_{.j.k} δ^i_l + P_{.j.l} δ^i_k + P_{.k.l} δ^i_j
    ///  + P_{.j.k.l} y^i`.
    pub berwald_expansion: T,
    /// Residual of the transport law
    /// `D_{jkl‖0}{}^i − D_{jkl|0}{}^i = P_{.r} D_{jkl}{}^r y^i`, where `‖`
    /// uses the deformed connection.
    pub douglas_transport: T,
    /// `‖W̄ − W‖ / (1 + ‖W‖ + ‖W̄‖)`: Weyl-type curvature is unchanged.
    pub weyl_invariance: T,
    /// Difference of the `y`-projected `D̃` tensors of the two sprays,
    /// relative to `1 + ‖D̃‖`; both projections use the base metric.
    pub gdw_invariance: T,
}

impl<T: Real> ProjectiveResiduals<T> {
    pub fn entries(&self) -> [(&'static str, T); 6] {
        [
            ("douglas_invariance", self.douglas_invariance),
            ("riemann_law", self.riemann_law),
            ("berwald_expansion", self.berwald_expansion),
            ("douglas_transport", self.douglas_transport),
            ("weyl_invariance", self.weyl_invariance),
            ("gdw_invariance", self.gdw_invariance),
        ]
    }

    pub fn max(&self) -> T {
        self.entries()
            .into_iter()
            .map(|(_, v)| v)
            .fold(T::zero(), T::max)
    }
}

/// Base and deformed sprays prepared for the checks at one state point.
pub struct ProjectivePair<T: Real> {
    pub base: SprayJets<T>,
    pub transformed: SprayJets<T>,
    pub factor: Jet<T>,
}

impl<T: Real> ProjectivePair<T> {
    /// Builds both sprays at `(x, y)`; the factor jet shares the sprays'
    /// truncation order.
    pub fn new(
        metric: &MetricSpec,
        factor: &ProjectiveFactor,
        order: usize,
        x: &[T],
        y: &[T],
    ) -> Result<ProjectivePair<T>> {
        let base = SprayJets::from_metric(metric, order, x, y)?;
        let p = factor.jet(metric, base.config(), x, y)?;
        let transformed = transform_spray(&base, &p)?;
        Ok(ProjectivePair { base, transformed, factor: p })
    }

    /// Runs every transport and invariance check.
    pub fn residuals(&self) -> Result<ProjectiveResiduals<T>> {
        let base_bundle = CurvatureBundle::new(&self.base);
        let bar_bundle = CurvatureBundle::new(&self.transformed);
        Ok(ProjectiveResiduals {
            douglas_invariance: douglas_invariance_residual(&base_bundle, &bar_bundle)?,
            riemann_law: riemann_law_residual(&base_bundle, &bar_bundle, &self.factor)?,
            berwald_expansion: berwald_expansion_residual(&base_bundle, &bar_bundle, &self.factor)?,
            douglas_transport: douglas_transport_residual(
                &base_bundle,
                &self.transformed,
                &self.factor,
            )?,
            weyl_invariance: weyl_invariance_residual(&base_bundle, &bar_bundle)?,
            gdw_invariance: gdw_invariance_residual(&base_bundle, &bar_bundle)?,
        })
    }
}

/// `‖D̄ − D‖ / (1 + ‖D‖)`.
pub fn douglas_invariance_residual<T: Real>(
    base: &CurvatureBundle<'_, T>,
    transformed: &CurvatureBundle<'_, T>,
) -> Result<T> {
    let d = base.douglas()?.values();
    let d_bar = transformed.douglas()?.values();
    Ok(d_bar.sub(&d).frobenius() / (T::one() + d.frobenius()))
}

/// `‖W̄ − W‖ / (1 + ‖W‖ + ‖W̄‖)`.
pub fn weyl_invariance_residual<T: Real>(
    base: &CurvatureBundle<'_, T>,
    transformed: &CurvatureBundle<'_, T>,
) -> Result<T> {
    let w = base.weyl()?.values();
    let w_bar = transformed.weyl()?.values();
    Ok(w_bar.sub(&w).frobenius() / (T::one() + w.frobenius() + w_bar.frobenius()))
}

/// Residual of the Riemann curvature transport law; see
/// [`ProjectiveResiduals::riemann_law`].
pub fn riemann_law_residual<T: Real>(
    base: &CurvatureBundle<'_, T>,
    transformed: &CurvatureBundle<'_, T>,
    p: &Jet<T>,
) -> Result<T> {
    let spray = base.spray();
    let n = spray.dim();
    let y = spray.y();
    let p_scalar = JetTensor::scalar(p.clone(), n);
    let p_zero = spray.horizontal_zero(&p_scalar)?.into_scalar();
    let xi = p.mul(p)?.sub(&p_zero)?;
    let p_cov = spray.horizontal_deriv(&p_scalar)?;
    let r = base.riemann()?.values();
    let r_bar = transformed.riemann()?.values();
    let num_vars = spray.config().num_vars();
    let mut tau = vec![T::zero(); n];
    for (k, slot) in tau.iter_mut().enumerate() {
        let p_dot_k = p.partial(n + k)?.value();
        let xi_dot_k = xi.partial(n + k)?.value();
        *slot = real::<T>(3.0) * (p_cov.get(&[k]).value() - p.value() * p_dot_k) + xi_dot_k;
    }
    debug_assert_eq!(num_vars, 2 * n);
    let model = TensorSample::from_fn(n, 2, |idx| {
        let delta = if idx[0] == idx[1] { xi.value() } else { T::zero() };
        r.get(idx) + delta + tau[idx[1]] * y[idx[0]]
    });
    Ok(r_bar.sub(&model).frobenius() / (T::one() + r.frobenius() + r_bar.frobenius()))
}

/// Residual of the Berwald curvature expansion; see
/// [`ProjectiveResiduals::berwald_expansion`].
pub fn berwald_expansion_residual<T: Real>(
    base: &CurvatureBundle<'_, T>,
    transformed: &CurvatureBundle<'_, T>,
    p: &Jet<T>,
) -> Result<T> {
    let spray = base.spray();
    let n = spray.dim();
    let y = spray.y();
    let b = base.berwald()?.values();
    let b_bar = transformed.berwald()?.values();
    // Second and third vertical derivatives of P at the state point.
    let mut p2 = vec![T::zero(); n * n];
    let mut p3 = vec![T::zero(); n * n * n];
    for j in 0..n {
        let pj = p.partial(n + j)?;
        for k in j..n {
            let pjk = pj.partial(n + k)?;
            p2[j * n + k] = pjk.value();
            p2[k * n + j] = pjk.value();
            for l in k..n {
                let v = pjk.partial(n + l)?.value();
                for perm in [[j, k, l], [j, l, k], [k, j, l], [k, l, j], [l, j, k], [l, k, j]] {
                    p3[(perm[0] * n + perm[1]) * n + perm[2]] = v;
                }
            }
        }
    }
    let model = TensorSample::from_fn(n, 4, |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let mut v = b.get(idx) + p3[(j * n + k) * n + l] * y[i];
        if i == l {
            v += p2[j * n + k];
        }
        if i == k {
            v += p2[j * n + l];
        }
        if i == j {
            v += p2[k * n + l];
        }
        v
    });
    Ok(b_bar.sub(&model).frobenius() / (T::one() + b.frobenius() + b_bar.frobenius()))
}

/// Residual of the transport law for the flow derivative of the Douglas
/// tensor; see [`ProjectiveResiduals::douglas_transport`].
pub fn douglas_transport_residual<T: Real>(
    base: &CurvatureBundle<'_, T>,
    transformed_spray: &SprayJets<T>,
    p: &Jet<T>,
) -> Result<T> {
    let spray = base.spray();
    let n = spray.dim();
    let y = spray.y();
    let douglas = base.douglas()?;
    let along_base = spray.horizontal_zero(douglas)?.values();
    let along_bar = transformed_spray.horizontal_zero(douglas)?.values();
    let d_values = douglas.values();
    let p_dot: Vec<T> = (0..n)
        .map(|r| p.partial(n + r).map(|j| j.value()))
        .collect::<Result<_>>()?;
    let model = TensorSample::from_fn(n, 4, |idx| {
        let mut carried = T::zero();
        let mut probe = idx.to_vec();
        for r in 0..n {
            probe[0] = r;
            carried += p_dot[r] * d_values.get(&probe);
        }
        along_base.get(idx) + carried * y[idx[0]]
    });
    Ok(along_bar.sub(&model).frobenius() / (T::one() + along_base.frobenius()))
}

/// Difference of the `y`-projected flow derivatives of the Douglas tensor
/// for the two sprays; see [`ProjectiveResiduals::gdw_invariance`].
pub fn gdw_invariance_residual<T: Real>(
    base: &CurvatureBundle<'_, T>,
    transformed: &CurvatureBundle<'_, T>,
) -> Result<T> {
    let spray = base.spray();
    let y_low = lowered_y(spray);
    let y = spray.y();
    let f2 = spray.f2.value();
    let dtilde = base.douglas_tilde()?.values();
    let dtilde_bar = transformed.douglas_tilde()?.values();
    let projected = project_off_y(&dtilde, &y_low, y, f2);
    let projected_bar = project_off_y(&dtilde_bar, &y_low, y, f2);
    Ok(projected_bar.sub(&projected).frobenius() / (T::one() + dtilde.frobenius()))
}

/// Outcome of running the W-GDW class test on both sprays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
pub struct WgdwInvariance<T> {
    pub base: FitResult<T>,
    pub transformed: FitResult<T>,
    /// Both residuals fall on the same side of the tolerance.
    pub verdicts_match: bool,
    /// `|λ̄F − (λF + 2P)| / (1 + |λF| + 2|P|)` when both fits produced a
    /// constrained `λ`; `None` when either `λ` is unconstrained or vacuous.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_relation: Option<T>,
}

/// Runs the W-GDW test on base and deformed sprays and checks the fitted
/// scalars against the transport relation `λ̄F = λF + 2P`.
pub fn wgdw_invariance_check<T: Real>(
    pair: &ProjectivePair<T>,
    tolerance: f64,
) -> Result<WgdwInvariance<T>> {
    let base_bundle = CurvatureBundle::new(&pair.base);
    let bar_bundle = CurvatureBundle::new(&pair.transformed);
    let base = classify::test_wgdw(&base_bundle)?;
    let transformed = classify::test_wgdw(&bar_bundle)?;
    let tol = real::<T>(tolerance);
    let verdicts_match = (base.residual < tol) == (transformed.residual < tol);
    let lambda_relation = match (&base, &transformed) {
        (
            FitResult { lambda: Some(l), vacuous: false, note: None, .. },
            FitResult { lambda: Some(l_bar), vacuous: false, note: None, .. },
        ) => {
            let f = pair.base.f()?.value();
            let p = pair.factor.value();
            let lhs = *l_bar * f;
            let rhs = *l * f + real::<T>(2.0) * p;
            Some((lhs - rhs).abs() / (T::one() + (*l * f).abs() + real::<T>(2.0) * p.abs()))
        }
        _ => None,
    };
    Ok(WgdwInvariance { base, transformed, verdicts_match, lambda_relation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_states;

    fn sphere_chart() -> MetricSpec {
        MetricSpec::from_file_string(
            r#"
            [metric]
            name = "unit-test-sphere"
            kind = "general"
            dim = 2
            region_center = [0.0, 0.0]
            region_radius = 0.7

            [general]
            f2 = "4 * (y1^2 + y2^2) / (1 + x1^2 + x2^2)^2"
            "#,
        )
        .unwrap()
    }

    fn toy_randers() -> MetricSpec {
        MetricSpec::from_file_string(
            r#"
            [metric]
            name = "unit-test-randers"
            kind = "randers"
            dim = 2
            region_center = [0.0, 0.0]
            region_radius = 0.4

            [alpha]
            a_11 = "1"
            a_12 = "0"
            a_22 = "1"

            [beta]
            b_1 = "0.3 * x2"
            b_2 = "-0.3 * x1"
            "#,
        )
        .unwrap()
    }

    fn first_state(metric: &MetricSpec) -> (Vec<f64>, Vec<f64>) {
        let state = sample_states(metric, 1, 77).unwrap().remove(0);
        (state.x, state.y)
    }

    #[test]
    fn parse_recognizes_the_factor_library() {
        assert!(matches!(ProjectiveFactor::parse("beta").unwrap(), ProjectiveFactor::ScaledBeta(c) if c == 1.0));
        assert!(matches!(ProjectiveFactor::parse("0.1*F").unwrap(), ProjectiveFactor::ScaledNorm(c) if c == 0.1));
        assert!(matches!(
            ProjectiveFactor::parse(" 2.5 * alpha ").unwrap(),
            ProjectiveFactor::ScaledAlpha(c) if c == 2.5
        ));
        assert!(matches!(ProjectiveFactor::parse("y1 + y2").unwrap(), ProjectiveFactor::Expression(_)));
        // A product that is not scalar * keyword falls back to expression.
        assert!(matches!(ProjectiveFactor::parse("x1 * y1").unwrap(), ProjectiveFactor::Expression(_)));
    }

    #[test]
    fn homogeneity_validation_accepts_degree_one_and_rejects_others() {
        let metric = sphere_chart();
        ProjectiveFactor::parse("0.3*F").unwrap().validate(&metric, 5).unwrap();
        ProjectiveFactor::parse("y1 + 0.5*y2").unwrap().validate(&metric, 5).unwrap();
        let bad = ProjectiveFactor::parse("x1").unwrap().validate(&metric, 5);
        assert!(matches!(bad, Err(Error::Homogeneity { .. })));
        let quadratic = ProjectiveFactor::parse("y1^2").unwrap().validate(&metric, 5);
        assert!(matches!(quadratic, Err(Error::Homogeneity { .. })));
    }

    #[test]
    fn beta_factor_requires_form_data() {
        let metric = sphere_chart();
        let (x, y) = first_state(&metric);
        let spray = SprayJets::<f64>::from_metric(&metric, 4, &x, &y).unwrap();
        let err = ProjectiveFactor::ScaledBeta(1.0).jet::<f64>(&metric, spray.config(), &x, &y);
        assert!(matches!(err, Err(Error::NotAlphaBeta { .. })));
    }

    #[test]
    fn zero_factor_is_the_identity() {
        let metric = toy_randers();
        let (x, y) = first_state(&metric);
        let pair = ProjectivePair::<f64>::new(
            &metric,
            &ProjectiveFactor::parse("0").unwrap(),
            8,
            &x,
            &y,
        )
        .unwrap();
        let res = pair.residuals().unwrap();
        for (name, value) in res.entries() {
            assert!(value < 1e-12, "{name} residual {value} with P = 0");
        }
    }

    #[test]
    fn norm_factor_shifts_the_spray_by_f_times_y() {
        let metric = sphere_chart();
        let (x, y) = first_state(&metric);
        let pair = ProjectivePair::<f64>::new(
            &metric,
            &ProjectiveFactor::ScaledNorm(1.0),
            4,
            &x,
            &y,
        )
        .unwrap();
        let f = pair.base.f().unwrap().value();
        for i in 0..2 {
            let shift = pair.transformed.spray.get(&[i]).value() - pair.base.spray.get(&[i]).value();
            assert!((shift - f * y[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn opposite_factors_compose_to_the_identity() {
        let metric = toy_randers();
        let (x, y) = first_state(&metric);
        let base = SprayJets::<f64>::from_metric(&metric, 6, &x, &y).unwrap();
        let p = ProjectiveFactor::ScaledBeta(1.0)
            .jet::<f64>(&metric, base.config(), &x, &y)
            .unwrap();
        let there = transform_spray(&base, &p).unwrap();
        let back = transform_spray(&there, &p.scale(-1.0)).unwrap();
        for i in 0..2 {
            let diff = back.spray.get(&[i]).sub(base.spray.get(&[i])).unwrap();
            assert!(diff.value().abs() < 1e-12);
            for k in 0..4 {
                assert!(diff.partial(k).unwrap().value().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn riemannian_sphere_obeys_the_transport_laws() {
        let metric = sphere_chart();
        for factor in ["0.25*F", "y1"] {
            let factor = ProjectiveFactor::parse(factor).unwrap();
            factor.validate(&metric, 11).unwrap();
            let (x, y) = first_state(&metric);
            let pair = ProjectivePair::<f64>::new(&metric, &factor, 8, &x, &y).unwrap();
            let res = pair.residuals().unwrap();
            assert!(res.riemann_law < 1e-6, "riemann law {:.3e}", res.riemann_law);
            assert!(res.douglas_invariance < 1e-9, "douglas {:.3e}", res.douglas_invariance);
            assert!(res.berwald_expansion < 1e-9, "berwald {:.3e}", res.berwald_expansion);
            assert!(res.douglas_transport < 1e-9, "transport {:.3e}", res.douglas_transport);
            assert!(res.weyl_invariance < 1e-9, "weyl {:.3e}", res.weyl_invariance);
        }
    }

    #[test]
    fn randers_with_beta_factor_obeys_every_law() {
        let metric = toy_randers();
        let (x, y) = first_state(&metric);
        let pair = ProjectivePair::<f64>::new(
            &metric,
            &ProjectiveFactor::ScaledBeta(1.0),
            9,
            &x,
            &y,
        )
        .unwrap();
        let res = pair.residuals().unwrap();
        assert!(res.douglas_invariance < 1e-7, "douglas {:.3e}", res.douglas_invariance);
        assert!(res.riemann_law < 1e-6, "riemann law {:.3e}", res.riemann_law);
        assert!(res.berwald_expansion < 1e-10, "berwald {:.3e}", res.berwald_expansion);
        assert!(res.douglas_transport < 1e-7, "transport {:.3e}", res.douglas_transport);
        assert!(res.weyl_invariance < 1e-6, "weyl {:.3e}", res.weyl_invariance);
        assert!(res.gdw_invariance < 1e-7, "gdw {:.3e}", res.gdw_invariance);

        let wgdw = wgdw_invariance_check(&pair, classify::DEFAULT_TOLERANCE).unwrap();
        assert!(wgdw.verdicts_match);
    }
}
