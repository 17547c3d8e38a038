//! Residual-based membership tests for the curvature-defined metric classes,
//! with least-squares fits for the free scalars and covectors the defining
//! conditions introduce.
//!
//! Every condition of the form "tensor expression = coefficient ⊗ y" is
//! decided by removing the `y`-parallel part of the upper index with the
//! metric-orthogonal projector and measuring what is left, so the unknown
//! coefficient tensor never has to be materialized. Conditions that are
//! linear in free scalars are fitted by least squares on flattened component
//! arrays with the Euclidean index metric; any positive-definite contraction
//! has the same zero set, and this one keeps the fits linear.

use crate::curvature::{jet_inner_product, CurvatureBundle, TensorKind};
use crate::error::{Error, Result};
use crate::geometry::{sample_states, SprayJets, StatePoint};
use crate::linalg::{least_squares, Mat};
use crate::metric::MetricSpec;
use crate::num::{real, Real};
use crate::tensor::{JetTensor, TensorSample};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default acceptance tolerance for relative residuals.
pub const DEFAULT_TOLERANCE: f64 = 1e-5;
/// Default jet order: high enough for the deepest derivative chain used by
/// any class test.
pub const DEFAULT_ORDER: usize = 9;
/// Absolute floor below which a reference tensor counts as vanishing.
const VACUOUS_ABS: f64 = 1e-14;
/// Relative floor: a reference tensor smaller than this times one plus its
/// parent tensor's norm is numerical noise left over from an analytic zero,
/// not a signal, and the test is vacuous.
const VACUOUS_REL: f64 = 1e-6;
/// Below this squared norm a least-squares direction is indeterminate.
const INDETERMINATE: f64 = 1e-28;
/// Absolute guard for denominators.
const EPS: f64 = 1e-300;
/// Recurrence is accepted below this residual, enabling the λ stage of the
/// D-recurrent test.
const RECURRENCE_TOL: f64 = 1e-6;

/// Fitted parameters and the relative residual of one class test at one
/// state point. Only the parameters the class actually introduces are set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
pub struct FitResult<T> {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<T>,
    /// Relative residual of the defining condition after the fit.
    pub residual: T,
    /// Magnitude of the tensors driving the condition (the fit's reference
    /// norm); a vacuous test reports the norm that was found negligible.
    pub reference: T,
    /// True when the reference tensors vanish and the condition holds emptily.
    pub vacuous: bool,
    /// True when a least-squares fit had rank-deficient normal equations and
    /// the minimum-norm solution was taken.
    pub rank_deficient: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl<T: Real> FitResult<T> {
    fn bare(residual: T, reference: T) -> Self {
        FitResult {
            lambda: None,
            mu: None,
            sigma: None,
            c: None,
            k: None,
            residual,
            reference,
            vacuous: false,
            rank_deficient: false,
            note: None,
        }
    }

    fn vacuous(reference: T, note: &str) -> Self {
        let mut fit = Self::bare(T::zero(), reference);
        fit.vacuous = true;
        fit.note = Some(note.into());
        fit
    }
}

/// Removes the `y`-parallel part of the leading upper index:
/// `T^i ↦ T^i − (g_mr T^m y^r / F²) y^i` for each fixed tuple of remaining
/// indices. The output contracts to zero against `y_i = g_ij y^j`.
pub fn project_off_y<T: Real>(
    t: &TensorSample<T>,
    y_low: &[T],
    y: &[T],
    f2: T,
) -> TensorSample<T> {
    let dim = y.len();
    TensorSample::from_fn(dim, t.rank(), |idx| {
        let mut parallel = T::zero();
        let mut probe = idx.to_vec();
        for m in 0..dim {
            probe[0] = m;
            parallel += y_low[m] * t.get(&probe);
        }
        t.get(idx) - parallel / f2 * y[idx[0]]
    })
}

/// `y_m = g_mr y^r` values at the spray's state point.
pub fn lowered_y<T: Real>(spray: &SprayJets<T>) -> Vec<T> {
    let n = spray.dim();
    let y = spray.y();
    (0..n)
        .map(|m| (0..n).map(|r| spray.g.get(&[m, r]).value() * y[r]).sum())
        .collect()
}

fn vacuous_threshold<T: Real>(parent_norm: T) -> T {
    real::<T>(VACUOUS_ABS).max(real::<T>(VACUOUS_REL) * (T::one() + parent_norm))
}

struct Projected<T> {
    y_low: Vec<T>,
    y: Vec<T>,
    f2: T,
    f: T,
}

impl<T: Real> Projected<T> {
    fn of(bundle: &CurvatureBundle<'_, T>) -> Result<Projected<T>> {
        let spray = bundle.spray();
        Ok(Projected {
            y_low: lowered_y(spray),
            y: spray.y().to_vec(),
            f2: spray.f2.value(),
            f: spray.f()?.value(),
        })
    }

    fn project(&self, t: &TensorSample<T>) -> TensorSample<T> {
        project_off_y(t, &self.y_low, &self.y, self.f2)
    }
}

/// Residuals of the four classes defined by a single vanishing tensor,
/// reported as `‖X‖/(1 + ‖X‖)` with the raw norm as reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
pub struct BasicResiduals<T> {
    pub berwald: FitResult<T>,
    pub douglas: FitResult<T>,
    pub weakly_berwald: FitResult<T>,
    pub weyl: FitResult<T>,
}

fn norm_residual<T: Real>(norm: T) -> FitResult<T> {
    FitResult::bare(norm / (T::one() + norm), norm)
}

/// Berwald (`B = 0`), Douglas (`D = 0`), weakly Berwald (`E = 0`) and Weyl
/// (`W = 0`) class residuals.
pub fn test_basic_classes<T: Real>(bundle: &CurvatureBundle<'_, T>) -> Result<BasicResiduals<T>> {
    let mut weyl = norm_residual(bundle.sample(TensorKind::Weyl)?.frobenius());
    if bundle.spray().dim() == 2 {
        weyl.note = Some("projective Weyl-type curvature vanishes identically in dimension two".into());
    }
    Ok(BasicResiduals {
        berwald: norm_residual(bundle.sample(TensorKind::Berwald)?.frobenius()),
        douglas: norm_residual(bundle.sample(TensorKind::Douglas)?.frobenius()),
        weakly_berwald: norm_residual(bundle.sample(TensorKind::MeanBerwald)?.frobenius()),
        weyl,
    })
}

/// `D_{jkl|0}{}^i = T_jkl y^i`: residual is the part of `D̃` that survives
/// projection off `y`, relative to `‖D̃‖`.
pub fn test_gdw<T: Real>(bundle: &CurvatureBundle<'_, T>) -> Result<FitResult<T>> {
    let proj = Projected::of(bundle)?;
    let dtilde = bundle.sample(TensorKind::DouglasTilde)?;
    let reference = dtilde.frobenius();
    let parent = bundle.sample(TensorKind::Douglas)?.frobenius();
    if reference < vacuous_threshold(parent) {
        return Ok(FitResult::vacuous(reference, "vacuously GDW: derivative tensor vanishes"));
    }
    let surviving = proj.project(&dtilde).frobenius();
    Ok(FitResult::bare(surviving / (reference + real::<T>(EPS)), reference))
}

/// `D̃_{jkl|0}{}^i + λF D̃_{jkl}{}^i = U_jkl y^i`: with the `y`-parallel parts
/// removed, fits `λ` so the projected combination is smallest.
pub fn test_wgdw<T: Real>(bundle: &CurvatureBundle<'_, T>) -> Result<FitResult<T>> {
    let proj = Projected::of(bundle)?;
    let dtilde = bundle.sample(TensorKind::DouglasTilde)?;
    let dtilde0 = bundle.sample(TensorKind::DouglasTildeZero)?;
    let reference = dtilde0.frobenius() + dtilde.frobenius();
    let parent = bundle.sample(TensorKind::Douglas)?.frobenius();
    if reference < vacuous_threshold(parent) {
        return Ok(FitResult::vacuous(
            reference,
            "vacuously W-GDW: derivative tensors vanish",
        ));
    }
    let a = proj.project(&dtilde0);
    let c = proj.project(&dtilde);
    let projected_norm = a.frobenius() + c.frobenius();
    if projected_norm < vacuous_threshold(reference) {
        // The projections vanish, so both derivative tensors are y-parallel
        // and the condition holds for every lambda; dividing noise by noise
        // here would report garbage and spoil the class containment.
        let mut fit = FitResult::bare(projected_norm / (reference + real::<T>(EPS)), reference);
        fit.note = Some(
            "projected derivative tensors vanish (GDW condition already holds); \
             lambda unconstrained"
                .into(),
        );
        return Ok(fit);
    }
    let cc = c.dot(&c);
    let mut fit;
    if cc < real::<T>(INDETERMINATE) {
        fit = FitResult::bare(
            a.frobenius() / (a.frobenius() + c.frobenius() + real::<T>(EPS)),
            reference,
        );
        fit.lambda = Some(T::zero());
        fit.note = Some("lambda indeterminate: projected direction vanishes".into());
    } else {
        let lambda = -a.dot(&c) / (proj.f * cc);
        let combo = a.add(&c.scale(lambda * proj.f));
        fit = FitResult::bare(
            combo.frobenius() / (a.frobenius() + c.frobenius() + real::<T>(EPS)),
            reference,
        );
        fit.lambda = Some(lambda);
    }
    Ok(fit)
}

/// `D̃_{jkl|0}{}^i + μ_r D̃_{jkl}{}^r y^i = 0`: linear least squares in the
/// covector `μ` over all components.
pub fn test_generalized_dtilde<T: Real>(bundle: &CurvatureBundle<'_, T>) -> Result<FitResult<T>> {
    let spray = bundle.spray();
    let n = spray.dim();
    let y = spray.y();
    let dtilde = bundle.sample(TensorKind::DouglasTilde)?;
    let dtilde0 = bundle.sample(TensorKind::DouglasTildeZero)?;
    let reference = dtilde0.frobenius() + dtilde.frobenius();
    let parent = bundle.sample(TensorKind::Douglas)?.frobenius();
    if reference < vacuous_threshold(parent) {
        return Ok(FitResult::vacuous(
            reference,
            "vacuously generalized D-tilde: derivative tensors vanish",
        ));
    }
    // Row per component (i, j, k, l); column r carries D̃_jkl{}^r y^i.
    let rows = n * n * n * n;
    let mut rhs = vec![T::zero(); rows];
    let design = Mat::from_fn(rows, n, |row, r| {
        let idx = unflatten(row, n, 4);
        dtilde.get(&[r, idx[1], idx[2], idx[3]]) * y[idx[0]]
    });
    for (row, slot) in rhs.iter_mut().enumerate() {
        let idx = unflatten(row, n, 4);
        *slot = -dtilde0.get(&idx);
    }
    let solved = least_squares(&design, &rhs);
    let mu = solved.params;
    let mut worst = T::zero();
    for row in 0..rows {
        let idx = unflatten(row, n, 4);
        let mut combo = dtilde0.get(&idx);
        for (r, m) in mu.iter().enumerate() {
            combo += *m * dtilde.get(&[r, idx[1], idx[2], idx[3]]) * y[idx[0]];
        }
        worst += combo * combo;
    }
    let mut fit = FitResult::bare(worst.sqrt() / (reference + real::<T>(EPS)), reference);
    fit.mu = Some(mu);
    fit.rank_deficient = solved.rank_deficient;
    Ok(fit)
}

/// `W̃_{jkl|0}{}^i + λF W̃_{jkl}{}^i = μ_r W̃_{jkl}{}^r y^i`: joint linear
/// least squares in `(λ, μ)`.
pub fn test_generalized_weakly_weyl<T: Real>(
    bundle: &CurvatureBundle<'_, T>,
) -> Result<FitResult<T>> {
    let spray = bundle.spray();
    let n = spray.dim();
    let y = spray.y();
    let f = spray.f()?.value();
    let wtilde = bundle.sample(TensorKind::WeylTilde)?;
    let wtilde0 = bundle.sample(TensorKind::WeylTildeZero)?;
    let reference = wtilde0.frobenius() + wtilde.frobenius();
    let parent = bundle.sample(TensorKind::Weyl)?.frobenius();
    if reference < vacuous_threshold(parent) {
        let note = if n == 2 {
            "vacuously generalized weakly-Weyl: Weyl-type curvature vanishes identically in dimension two"
        } else {
            "vacuously generalized weakly-Weyl: derivative tensors vanish"
        };
        return Ok(FitResult::vacuous(reference, note));
    }
    let rows = n * n * n * n;
    let mut rhs = vec![T::zero(); rows];
    let design = Mat::from_fn(rows, 1 + n, |row, col| {
        let idx = unflatten(row, n, 4);
        if col == 0 {
            f * wtilde.get(&idx)
        } else {
            -wtilde.get(&[col - 1, idx[1], idx[2], idx[3]]) * y[idx[0]]
        }
    });
    for (row, slot) in rhs.iter_mut().enumerate() {
        let idx = unflatten(row, n, 4);
        *slot = -wtilde0.get(&idx);
    }
    let solved = least_squares(&design, &rhs);
    let lambda = solved.params[0];
    let mu = solved.params[1..].to_vec();
    let mut sum = T::zero();
    for row in 0..rows {
        let idx = unflatten(row, n, 4);
        let mut combo = wtilde0.get(&idx) + lambda * f * wtilde.get(&idx);
        for (r, m) in mu.iter().enumerate() {
            combo -= *m * wtilde.get(&[r, idx[1], idx[2], idx[3]]) * y[idx[0]];
        }
        sum += combo * combo;
    }
    let mut fit = FitResult::bare(sum.sqrt() / (reference + real::<T>(EPS)), reference);
    fit.lambda = Some(lambda);
    fit.mu = Some(mu);
    fit.rank_deficient = solved.rank_deficient;
    Ok(fit)
}

/// `D̃_{|0} + λF D̃ = 0` with no `y`-projection.
pub fn test_relatively_isotropic_dtilde<T: Real>(
    bundle: &CurvatureBundle<'_, T>,
) -> Result<FitResult<T>> {
    let f = bundle.spray().f()?.value();
    let dtilde = bundle.sample(TensorKind::DouglasTilde)?;
    let dtilde0 = bundle.sample(TensorKind::DouglasTildeZero)?;
    let reference = dtilde0.frobenius() + dtilde.frobenius();
    let parent = bundle.sample(TensorKind::Douglas)?.frobenius();
    if reference < vacuous_threshold(parent) {
        return Ok(FitResult::vacuous(
            reference,
            "vacuously relatively isotropic D-tilde: derivative tensors vanish",
        ));
    }
    let cc = dtilde.dot(&dtilde);
    let mut fit;
    if cc < real::<T>(INDETERMINATE) {
        fit = FitResult::bare(
            dtilde0.frobenius() / (reference + real::<T>(EPS)),
            reference,
        );
        fit.lambda = Some(T::zero());
        fit.note = Some("lambda indeterminate: D-tilde vanishes".into());
    } else {
        let lambda = -dtilde0.dot(&dtilde) / (f * cc);
        let combo = dtilde0.add(&dtilde.scale(lambda * f));
        fit = FitResult::bare(combo.frobenius() / (reference + real::<T>(EPS)), reference);
        fit.lambda = Some(lambda);
    }
    Ok(fit)
}

/// `𝔇_{jklm}{}^i = λ (D_{jkl|m}{}^i − D_{jkm|l}{}^i)`: fits `λ` against the
/// antisymmetrized covariant derivative of the Douglas tensor.
pub fn test_isotropic_stretch_douglas<T: Real>(
    bundle: &CurvatureBundle<'_, T>,
) -> Result<FitResult<T>> {
    let stretch = bundle.sample(TensorKind::StretchDouglas)?;
    let skew = bundle.douglas_deriv_skew()?.values();
    let reference = stretch.frobenius() + skew.frobenius();
    let parent = bundle.sample(TensorKind::Douglas)?.frobenius();
    if reference < vacuous_threshold(parent) {
        return Ok(FitResult::vacuous(
            reference,
            "vacuously isotropic stretch Douglas: derivative tensors vanish",
        ));
    }
    let ss = skew.dot(&skew);
    let mut fit;
    if ss < real::<T>(INDETERMINATE) {
        fit = FitResult::bare(
            stretch.frobenius() / (reference + real::<T>(EPS)),
            reference,
        );
        fit.lambda = Some(T::zero());
        fit.note = Some("lambda indeterminate: reference direction vanishes".into());
    } else {
        let lambda = stretch.dot(&skew) / ss;
        let combo = stretch.sub(&skew.scale(lambda));
        fit = FitResult::bare(combo.frobenius() / (reference + real::<T>(EPS)), reference);
        fit.lambda = Some(lambda);
    }
    Ok(fit)
}

/// `E_ij = ((n+1)/2) c F⁻¹ h_ij`: fits the scalar `c`.
pub fn test_isotropic_mean_berwald<T: Real>(
    bundle: &CurvatureBundle<'_, T>,
) -> Result<FitResult<T>> {
    let spray = bundle.spray();
    let n = spray.dim();
    let f = spray.f()?.value();
    let e = bundle.sample(TensorKind::MeanBerwald)?;
    let parent = bundle.sample(TensorKind::Berwald)?.frobenius();
    if e.frobenius() < vacuous_threshold(parent) {
        let mut fit = FitResult::vacuous(
            e.frobenius(),
            "vacuously isotropic mean Berwald: the mean Berwald curvature vanishes",
        );
        fit.c = Some(T::zero());
        return Ok(fit);
    }
    let h = bundle.sample(TensorKind::Angular)?;
    let hh = h.dot(&h);
    let scale = real::<T>((n + 1) as f64) / (real::<T>(2.0) * f);
    let c = if hh < real::<T>(INDETERMINATE) {
        T::zero()
    } else {
        e.dot(&h) / (hh * scale)
    };
    let model = h.scale(c * scale);
    let reference = e.frobenius() + model.frobenius();
    let residual = e.sub(&model).frobenius() / (reference + real::<T>(EPS));
    let mut fit = FitResult::bare(residual, reference);
    fit.c = Some(c);
    Ok(fit)
}

/// `D_{jkl|0}{}^i = σ D_{jkl}{}^i` with `σ` a scalar on the tangent bundle;
/// when the recurrence holds, also fits `λ` in `σ_{|0} + σ² + λFσ = 0`.
pub fn test_d_recurrent<T: Real>(bundle: &CurvatureBundle<'_, T>) -> Result<FitResult<T>> {
    let douglas = bundle.sample(TensorKind::Douglas)?;
    let d_norm = douglas.frobenius();
    if d_norm < real::<T>(1e-10) {
        return Ok(FitResult::vacuous(
            d_norm,
            "vacuously D-recurrent: Douglas tensor vanishes",
        ));
    }
    let dtilde = bundle.sample(TensorKind::DouglasTilde)?;
    let dtilde_norm = dtilde.frobenius();
    let sigma_jet = bundle.recurrence_ratio()?;
    let sigma = sigma_jet.value();
    let residual = dtilde.sub(&douglas.scale(sigma)).frobenius()
        / (dtilde_norm + real::<T>(EPS));
    let mut fit = FitResult::bare(residual, dtilde_norm + d_norm);
    fit.sigma = Some(sigma);
    if sigma.abs() < real::<T>(1e-12) && dtilde_norm > vacuous_threshold(d_norm) {
        fit.note = Some(
            "sigma vanishes while the derivative tensor does not: \
             recurrence needs a non-zero scalar"
                .into(),
        );
        return Ok(fit);
    }
    if residual < real::<T>(RECURRENCE_TOL) && sigma.abs() > real::<T>(1e-12) {
        let f = bundle.spray().f()?.value();
        let sigma_zero = bundle
            .spray()
            .horizontal_zero(&JetTensor::scalar(sigma_jet, bundle.spray().dim()))?
            .get(&[])
            .value();
        fit.lambda = Some(-(sigma_zero + sigma * sigma) / (f * sigma));
        fit.note = Some("recurrence holds; lambda solves sigma|0 + sigma^2 + lambda F sigma = 0".into());
    }
    Ok(fit)
}

/// `R^i_k = K (F² δ^i_k − y^i y_k)`: fits the flag curvature scalar `K`.
pub fn fit_scalar_flag_curvature<T: Real>(
    bundle: &CurvatureBundle<'_, T>,
) -> Result<FitResult<T>> {
    let spray = bundle.spray();
    let n = spray.dim();
    let y = spray.y();
    let y_low = lowered_y(spray);
    let f2 = spray.f2.value();
    let riemann = bundle.sample(TensorKind::Riemann)?;
    let model = TensorSample::from_fn(n, 2, |idx| {
        let delta = if idx[0] == idx[1] { f2 } else { T::zero() };
        delta - y[idx[0]] * y_low[idx[1]]
    });
    let mm = model.dot(&model);
    let k = if mm < real::<T>(INDETERMINATE) {
        T::zero()
    } else {
        riemann.dot(&model) / mm
    };
    let residual = riemann.sub(&model.scale(k)).frobenius()
        / ((T::one() + k.abs()) * model.frobenius() + real::<T>(EPS));
    let mut fit = FitResult::bare(residual, riemann.frobenius());
    fit.k = Some(k);
    Ok(fit)
}

/// Directional derivative of a scalar observable along the geodesic flow,
/// by Richardson-extrapolated central differences: states are advanced to
/// `(x ± εy − ε²G, y ∓ 2εG)` and the observable re-evaluated from scratch.
/// Serves as an independent check on jet-computed horizontal derivatives.
pub fn flow_derivative_fd<T: Real>(
    metric: &MetricSpec,
    x: &[T],
    y: &[T],
    order: usize,
    eps: f64,
    observable: &dyn Fn(&CurvatureBundle<'_, T>) -> Result<T>,
) -> Result<T> {
    let base = SprayJets::from_metric(metric, order, x, y)?;
    let n = metric.dim;
    let g: Vec<T> = (0..n).map(|i| base.spray.get(&[i]).value()).collect();
    let eval = |step: f64| -> Result<T> {
        let e = real::<T>(step);
        let xs: Vec<T> = (0..n).map(|i| x[i] + e * y[i] - e * e * g[i]).collect();
        let ys: Vec<T> = (0..n).map(|i| y[i] - real::<T>(2.0) * e * g[i]).collect();
        let spray = SprayJets::from_metric(metric, order, &xs, &ys)?;
        let bundle = CurvatureBundle::new(&spray);
        observable(&bundle)
    };
    let central = |e: f64| -> Result<T> {
        Ok((eval(e)? - eval(-e)?) / real::<T>(2.0 * e))
    };
    let coarse = central(eps)?;
    let fine = central(eps / 2.0)?;
    // Fourth-order Richardson combination of the two second-order stencils.
    Ok((real::<T>(4.0) * fine - coarse) / real::<T>(3.0))
}

fn unflatten(mut row: usize, dim: usize, rank: usize) -> Vec<usize> {
    let mut idx = vec![0usize; rank];
    for slot in (0..rank).rev() {
        idx[slot] = row % dim;
        row /= dim;
    }
    idx
}

/// Everything the classifier reports for one state point.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
pub struct PointFits<T> {
    pub berwald: FitResult<T>,
    pub douglas: FitResult<T>,
    pub weakly_berwald: FitResult<T>,
    pub weyl: FitResult<T>,
    pub gdw: FitResult<T>,
    pub wgdw: FitResult<T>,
    pub generalized_dtilde: FitResult<T>,
    pub generalized_weakly_weyl: FitResult<T>,
    pub relatively_isotropic_dtilde: FitResult<T>,
    pub isotropic_stretch_douglas: FitResult<T>,
    pub isotropic_mean_berwald: FitResult<T>,
    pub d_recurrent: FitResult<T>,
    pub scalar_flag_curvature: FitResult<T>,
}

/// Class names in report order.
pub const CLASS_NAMES: [&str; 13] = [
    "berwald",
    "douglas",
    "weakly_berwald",
    "weyl",
    "gdw",
    "wgdw",
    "generalized_dtilde",
    "generalized_weakly_weyl",
    "relatively_isotropic_dtilde",
    "isotropic_stretch_douglas",
    "isotropic_mean_berwald",
    "d_recurrent",
    "scalar_flag_curvature",
];

impl<T: Real> PointFits<T> {
    pub fn entries(&self) -> [(&'static str, &FitResult<T>); 13] {
        [
            ("berwald", &self.berwald),
            ("douglas", &self.douglas),
            ("weakly_berwald", &self.weakly_berwald),
            ("weyl", &self.weyl),
            ("gdw", &self.gdw),
            ("wgdw", &self.wgdw),
            ("generalized_dtilde", &self.generalized_dtilde),
            ("generalized_weakly_weyl", &self.generalized_weakly_weyl),
            ("relatively_isotropic_dtilde", &self.relatively_isotropic_dtilde),
            ("isotropic_stretch_douglas", &self.isotropic_stretch_douglas),
            ("isotropic_mean_berwald", &self.isotropic_mean_berwald),
            ("d_recurrent", &self.d_recurrent),
            ("scalar_flag_curvature", &self.scalar_flag_curvature),
        ]
    }

    pub fn get(&self, class: &str) -> Option<&FitResult<T>> {
        self.entries()
            .into_iter()
            .find_map(|(name, fit)| (name == class).then_some(fit))
    }
}

/// Runs every class test against a prepared curvature bundle.
pub fn classify_bundle<T: Real>(bundle: &CurvatureBundle<'_, T>) -> Result<PointFits<T>> {
    let basic = test_basic_classes(bundle)?;
    Ok(PointFits {
        berwald: basic.berwald,
        douglas: basic.douglas,
        weakly_berwald: basic.weakly_berwald,
        weyl: basic.weyl,
        gdw: test_gdw(bundle)?,
        wgdw: test_wgdw(bundle)?,
        generalized_dtilde: test_generalized_dtilde(bundle)?,
        generalized_weakly_weyl: test_generalized_weakly_weyl(bundle)?,
        relatively_isotropic_dtilde: test_relatively_isotropic_dtilde(bundle)?,
        isotropic_stretch_douglas: test_isotropic_stretch_douglas(bundle)?,
        isotropic_mean_berwald: test_isotropic_mean_berwald(bundle)?,
        d_recurrent: test_d_recurrent(bundle)?,
        scalar_flag_curvature: fit_scalar_flag_curvature(bundle)?,
    })
}

/// Classifies one state point from scratch: the direction is normalized to
/// `F(x, y) = 1` first, so residuals are scale-free.
pub fn classify_point<T: Real>(
    metric: &MetricSpec,
    x: &[T],
    y: &[T],
    order: usize,
) -> Result<PointFits<T>> {
    let xf: Vec<f64> = x.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
    let yf: Vec<f64> = y.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
    let f = match metric.eval_f_scalar(&xf, &yf) {
        Ok(f) if f.is_finite() && f > 0.0 => f,
        Ok(f) => {
            return Err(Error::InvalidPoint(format!(
                "F(x, y) = {f} is not a positive number at the requested state"
            )))
        }
        Err(Error::Domain { value, .. }) => {
            return Err(Error::InvalidPoint(format!(
                "F^2(x, y) = {value} is not positive at the requested state"
            )))
        }
        Err(e) => return Err(e),
    };
    let y_unit: Vec<T> = y.iter().map(|v| *v / real::<T>(f)).collect();
    let spray = SprayJets::from_metric(metric, order, x, &y_unit)?;
    let bundle = CurvatureBundle::new(&spray);
    classify_bundle(&bundle)
}

/// Batch options for [`classify_metric`].
#[derive(Debug, Clone)]
pub struct ClassifyOptions {
    pub points: usize,
    pub seed: u64,
    pub order: usize,
    pub tolerance: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            points: 10,
            seed: 0x00c0ffee,
            order: DEFAULT_ORDER,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

/// One classified state point.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
pub struct PointRecord<T> {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub fits: PointFits<T>,
}

/// Worst-case summary of one class over the sampled batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
pub struct ClassSummary<T> {
    pub class: String,
    pub worst_residual: T,
    /// True when the worst residual over all points is below the tolerance.
    pub verdict: bool,
    pub vacuous_points: usize,
}

/// Full classification of a metric over a sampled batch of state points.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: serde::de::DeserializeOwned"))]
pub struct ClassificationReport<T> {
    pub metric: String,
    pub dim: usize,
    pub order: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub points: Vec<PointRecord<T>>,
    pub classes: Vec<ClassSummary<T>>,
    /// Deviation of the fitted W-GDW `λ` under `y ↦ 2y` at the first point;
    /// a degree-zero homogeneous `λ` keeps it near zero.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wgdw_lambda_rescale_deviation: Option<T>,
}

impl<T: Real> ClassificationReport<T> {
    pub fn summary_for(&self, class: &str) -> Option<&ClassSummary<T>> {
        self.classes.iter().find(|c| c.class == class)
    }
}

/// Classifies a metric over a deterministic random batch, in parallel over
/// points with a deterministic assembly order.
pub fn classify_metric<T: Real>(
    metric: &MetricSpec,
    opts: &ClassifyOptions,
) -> Result<ClassificationReport<T>> {
    let states = sample_states(metric, opts.points, opts.seed)?;
    let fits: Vec<PointFits<T>> = states
        .par_iter()
        .map(|state| {
            let x: Vec<T> = state.x.iter().map(|v| real::<T>(*v)).collect();
            let y: Vec<T> = state.y.iter().map(|v| real::<T>(*v)).collect();
            classify_point(metric, &x, &y, opts.order)
        })
        .collect::<Result<_>>()?;

    let classes = CLASS_NAMES
        .iter()
        .map(|&class| {
            let mut worst = T::zero();
            let mut vacuous_points = 0usize;
            for fit in &fits {
                let f = fit.get(class).expect("class name enumerated");
                worst = worst.max(f.residual);
                if f.vacuous {
                    vacuous_points += 1;
                }
            }
            ClassSummary {
                class: class.to_string(),
                worst_residual: worst,
                verdict: worst < real::<T>(opts.tolerance),
                vacuous_points,
            }
        })
        .collect();

    let rescale_dev = wgdw_rescale_deviation(metric, &states, opts.order)?;
    let points = states
        .into_iter()
        .zip(fits)
        .map(|(state, fits)| PointRecord { x: state.x, y: state.y, fits })
        .collect();
    Ok(ClassificationReport {
        metric: metric.name.clone(),
        dim: metric.dim,
        order: opts.order,
        tolerance: opts.tolerance,
        seed: opts.seed,
        points,
        classes,
        wgdw_lambda_rescale_deviation: rescale_dev,
    })
}

/// Deviation of the fitted W-GDW `λ` between `y` and `2y` at the first state,
/// relative to one plus its magnitude. `None` when either fit has no `λ`.
fn wgdw_rescale_deviation<T: Real>(
    metric: &MetricSpec,
    states: &[StatePoint],
    order: usize,
) -> Result<Option<T>> {
    let Some(state) = states.first() else {
        return Ok(None);
    };
    let x: Vec<T> = state.x.iter().map(|v| real::<T>(*v)).collect();
    let y: Vec<T> = state.y.iter().map(|v| real::<T>(*v)).collect();
    let doubled: Vec<T> = y.iter().map(|v| *v * real::<T>(2.0)).collect();
    let fit_lambda = |yv: &[T]| -> Result<Option<T>> {
        let spray = SprayJets::from_metric(metric, order, &x, yv)?;
        let bundle = CurvatureBundle::new(&spray);
        Ok(test_wgdw(&bundle)?.lambda)
    };
    match (fit_lambda(&y)?, fit_lambda(&doubled)?) {
        (Some(a), Some(b)) => Ok(Some((a - b).abs() / (T::one() + a.abs()))),
        _ => Ok(None),
    }
}

/// Inner product of two jet tensors as a scalar jet — re-exported here
/// because consistency checks between fitted scalars and their jet
/// counterparts live beside the fits.
pub fn recurrence_inner<T: Real>(
    a: &JetTensor<T>,
    b: &JetTensor<T>,
) -> Result<crate::jet::Jet<T>> {
    jet_inner_product(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_states;

    fn euclidean() -> MetricSpec {
        MetricSpec::from_file_string(
            r#"
            [metric]
            name = "unit-test-euclidean"
            kind = "general"
            dim = 2
            region_center = [0.0, 0.0]
            region_radius = 0.8

            [general]
            f2 = "y1^2 + y2^2"
            "#,
        )
        .unwrap()
    }

    fn sphere_chart() -> MetricSpec {
        // Round two-sphere in a stereographic chart: constant curvature one.
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

    fn first_state(metric: &MetricSpec) -> StatePoint {
        sample_states(metric, 1, 42).unwrap().remove(0)
    }

    #[test]
    fn projection_annihilates_parallel_part() {
        let metric = toy_randers();
        let state = first_state(&metric);
        let spray = SprayJets::<f64>::from_metric(&metric, 3, &state.x, &state.y).unwrap();
        let y_low = lowered_y(&spray);
        let f2 = spray.f2.value();
        let y = spray.y();

        // T^i = y^i maps to zero.
        let parallel = TensorSample::from_fn(2, 1, |idx| y[idx[0]]);
        let projected = project_off_y(&parallel, &y_low, y, f2);
        assert!(projected.frobenius() < 1e-14);

        // A g-orthogonal vector is untouched.
        let orth = TensorSample::from_fn(2, 1, |idx| match idx[0] {
            0 => -y_low[1],
            _ => y_low[0],
        });
        let kept = project_off_y(&orth, &y_low, y, f2);
        assert!(kept.sub(&orth).frobenius() < 1e-14);

        // Any projection output contracts to zero against y_m, and the
        // projector is idempotent.
        let random = TensorSample::from_fn(2, 3, |idx| {
            (idx[0] as f64 + 1.0) * 0.3 - (idx[1] as f64) * 0.7 + (idx[2] as f64) * 0.11
        });
        let once = project_off_y(&random, &y_low, y, f2);
        let twice = project_off_y(&once, &y_low, y, f2);
        assert!(twice.sub(&once).frobenius() < 1e-12);
        for j in 0..2 {
            for k in 0..2 {
                let contracted: f64 = (0..2).map(|m| y_low[m] * once.get(&[m, j, k])).sum();
                assert!(contracted.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn euclidean_passes_everything() {
        let metric = euclidean();
        let report = classify_metric::<f64>(
            &metric,
            &ClassifyOptions { points: 2, seed: 9, order: 9, ..Default::default() },
        )
        .unwrap();
        for summary in &report.classes {
            assert!(
                summary.verdict,
                "{} should pass on flat space, worst {:.3e}",
                summary.class, summary.worst_residual
            );
        }
        // Flat space is vacuous for the derivative-tensor classes.
        let gdw = report.summary_for("gdw").unwrap();
        assert_eq!(gdw.vacuous_points, 2);
        let rec = report.summary_for("d_recurrent").unwrap();
        assert_eq!(rec.vacuous_points, 2);
    }

    #[test]
    fn sphere_has_unit_flag_curvature() {
        let metric = sphere_chart();
        let state = first_state(&metric);
        let fits = classify_point::<f64>(&metric, &state.x, &state.y, 9).unwrap();
        let k = fits.scalar_flag_curvature.k.unwrap();
        assert!((k - 1.0).abs() < 1e-7, "K = {k}");
        assert!(fits.scalar_flag_curvature.residual < 1e-7);
        assert!(fits.berwald.residual < 1e-9, "Riemannian metrics are Berwald");
    }

    #[test]
    fn fitted_scalars_minimize_their_residuals() {
        let metric = toy_randers();
        let state = first_state(&metric);
        let spray = SprayJets::<f64>::from_metric(&metric, 9, &state.x, &state.y).unwrap();
        let bundle = CurvatureBundle::new(&spray);
        let proj = Projected::of(&bundle).unwrap();
        let f = proj.f;

        // Relatively isotropic D-tilde: perturbing lambda cannot help.
        let fit = test_relatively_isotropic_dtilde(&bundle).unwrap();
        if !fit.vacuous {
            let dtilde = bundle.sample(TensorKind::DouglasTilde).unwrap();
            let dtilde0 = bundle.sample(TensorKind::DouglasTildeZero).unwrap();
            let lambda = fit.lambda.unwrap();
            let cost = |l: f64| dtilde0.add(&dtilde.scale(l * f)).frobenius();
            assert!(cost(lambda) <= cost(lambda + 1e-3) + 1e-15);
            assert!(cost(lambda) <= cost(lambda - 1e-3) + 1e-15);
        }

        // Scalar flag curvature: same one-dimensional optimality.
        let flag = fit_scalar_flag_curvature(&bundle).unwrap();
        let riemann = bundle.sample(TensorKind::Riemann).unwrap();
        let y = spray.y();
        let y_low = lowered_y(&spray);
        let f2 = spray.f2.value();
        let model = TensorSample::from_fn(2, 2, |idx| {
            let delta = if idx[0] == idx[1] { f2 } else { 0.0 };
            delta - y[idx[0]] * y_low[idx[1]]
        });
        let k = flag.k.unwrap();
        let cost = |kk: f64| riemann.sub(&model.scale(kk)).frobenius();
        assert!(cost(k) <= cost(k + 1e-3) + 1e-15);
        assert!(cost(k) <= cost(k - 1e-3) + 1e-15);

        // Mean Berwald: optimality of c.
        let mb = test_isotropic_mean_berwald(&bundle).unwrap();
        let e = bundle.sample(TensorKind::MeanBerwald).unwrap();
        let h = bundle.sample(TensorKind::Angular).unwrap();
        let scale = 3.0 / (2.0 * f);
        let c = mb.c.unwrap();
        let cost = |cc: f64| e.sub(&h.scale(cc * scale)).frobenius();
        assert!(cost(c) <= cost(c + 1e-3) + 1e-15);
        assert!(cost(c) <= cost(c - 1e-3) + 1e-15);
    }

    #[test]
    fn verdicts_survive_y_rescaling() {
        let metric = toy_randers();
        let state = first_state(&metric);
        let base = classify_point::<f64>(&metric, &state.x, &state.y, 9).unwrap();
        let doubled: Vec<f64> = state.y.iter().map(|v| 2.0 * v).collect();
        let rescaled = classify_point::<f64>(&metric, &state.x, &doubled, 9).unwrap();
        let tripled: Vec<f64> = state.y.iter().map(|v| 3.0 * v).collect();
        let rescaled3 = classify_point::<f64>(&metric, &state.x, &tripled, 9).unwrap();
        for ((name, a), ((_, b), (_, c))) in base
            .entries()
            .into_iter()
            .zip(rescaled.entries().into_iter().zip(rescaled3.entries()))
        {
            assert!(
                (a.residual - b.residual).abs() < 1e-12,
                "{name}: residual changed under y -> 2y: {} vs {}",
                a.residual,
                b.residual
            );
            assert!(
                (a.residual - c.residual).abs() < 1e-9,
                "{name}: residual changed under y -> 3y: {} vs {}",
                a.residual,
                c.residual
            );
        }
    }

    #[test]
    fn generalized_fits_report_parameters() {
        let metric = toy_randers();
        let state = first_state(&metric);
        let spray = SprayJets::<f64>::from_metric(&metric, 9, &state.x, &state.y).unwrap();
        let bundle = CurvatureBundle::new(&spray);
        let gen_dt = test_generalized_dtilde(&bundle).unwrap();
        if !gen_dt.vacuous {
            let mu = gen_dt.mu.as_ref().unwrap();
            assert_eq!(mu.len(), 2);
            assert!(mu.iter().all(|m| m.is_finite()));
        }
        let wgdw = test_wgdw(&bundle).unwrap();
        assert!(wgdw.residual >= 0.0);
        let stretch = test_isotropic_stretch_douglas(&bundle).unwrap();
        assert!(stretch.residual.is_finite());
    }

    #[test]
    fn recurrence_flow_derivative_matches_finite_differences() {
        let metric = toy_randers();
        let state = first_state(&metric);
        let spray = SprayJets::<f64>::from_metric(&metric, 9, &state.x, &state.y).unwrap();
        let bundle = CurvatureBundle::new(&spray);
        let sigma_jet = bundle.recurrence_ratio().unwrap();
        let jet_route = spray
            .horizontal_zero(&JetTensor::scalar(sigma_jet, 2))
            .unwrap()
            .get(&[])
            .value();
        let fd_route = flow_derivative_fd::<f64>(
            &metric,
            &state.x,
            &state.y,
            9,
            1e-3,
            &|b| Ok(b.recurrence_ratio()?.value()),
        )
        .unwrap();
        assert!(
            (jet_route - fd_route).abs() < 1e-6 * (1.0 + jet_route.abs()),
            "sigma|0 jet {jet_route} vs finite differences {fd_route}"
        );
    }

    #[test]
    fn report_round_trips_through_json() {
        let metric = euclidean();
        let report = classify_metric::<f64>(
            &metric,
            &ClassifyOptions { points: 2, seed: 3, order: 9, ..Default::default() },
        )
        .unwrap();
        let text = serde_json::to_string(&report).unwrap();
        let back: ClassificationReport<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back.metric, report.metric);
        assert_eq!(back.points.len(), report.points.len());
        assert_eq!(back.classes.len(), report.classes.len());
        for (a, b) in report.classes.iter().zip(&back.classes) {
            assert_eq!(a.class, b.class);
            assert_eq!(a.verdict, b.verdict);
            assert!((a.worst_residual - b.worst_residual).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_states_are_rejected() {
        let metric = euclidean();
        let err = classify_point::<f64>(&metric, &[0.0, 0.0], &[0.0, 0.0], 4);
        assert!(matches!(err, Err(Error::InvalidPoint(_))));
    }
}
