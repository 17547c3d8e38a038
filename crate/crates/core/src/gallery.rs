//! Bundled example metrics with machine-checked expectation manifests.
//!
//! Each entry embeds a metric file in the documented TOML format together
//! with a manifest of numerical claims: classifier verdicts, vanishing
//! curvature tensors, closed-form flag curvature, quadrature bounds on the
//! S-curvature, and covariant properties of the defining 1-form.  The
//! manifest is never trusted as stored data — [`verify_entry`] re-derives
//! every claim from the metric itself.

use crate::alphabeta::AlphaBetaJets;
use crate::classify::{classify_metric, ClassifyOptions, PointFits, CLASS_NAMES};
use crate::curvature::{CurvatureBundle, TensorKind};
use crate::error::{Error, Result};
use crate::geometry::{sample_states, SprayJets};
use crate::metric::MetricSpec;
use crate::quadrature::{s_curvature, QuadratureSpec, SphereRule};
use serde::Serialize;

/// Names accepted by [`load`], in presentation order.
pub const GALLERY_NAMES: [&str; 6] = [
    "euclidean",
    "riemannian_diag",
    "sphere2",
    "funk_ball_randers",
    "shen_avec_randers",
    "killing_s3_alphabeta",
];

const EUCLIDEAN_FILE: &str = r#"[metric]
name = "euclidean"
kind = "general"
dim = 2
region_center = [0.0, 0.0]
region_radius = 0.8

[general]
f2 = "y1^2 + y2^2"
"#;

const RIEMANNIAN_DIAG_FILE: &str = r#"[metric]
name = "riemannian_diag"
kind = "general"
dim = 2
region_center = [0.0, 0.0]
region_radius = 0.6

[general]
f2 = "(1 + 0.5 * x2^2) * y1^2 + (1 + 0.5 * x1^2) * y2^2"
"#;

const SPHERE2_FILE: &str = r#"[metric]
name = "sphere2"
kind = "general"
dim = 2
region_center = [0.0, 0.0]
region_radius = 0.7

[general]
f2 = "4 * (y1^2 + y2^2) / (1 + x1^2 + x2^2)^2"
"#;

/// Randers metric on the unit ball of `R^3` whose defining data depend on
/// the first two coordinates only; it has zero flag curvature, zero
/// S-curvature, zero mean Berwald curvature, and a non-closed 1-form.
const FUNK_BALL_RANDERS_FILE: &str = r#"[metric]
name = "funk_ball_randers"
kind = "randers"
dim = 3
region_center = [0.0, 0.0, 0.0]
region_radius = 0.5

[alpha]
a_11 = "(1 - x1^2) / (1 - x1^2 - x2^2)^2"
a_12 = "-(x1 * x2) / (1 - x1^2 - x2^2)^2"
a_13 = "0"
a_22 = "(1 - x2^2) / (1 - x1^2 - x2^2)^2"
a_23 = "0"
a_33 = "1 / (1 - x1^2 - x2^2)"

[beta]
b_1 = "-x2 / (1 - x1^2 - x2^2)"
b_2 = "x1 / (1 - x1^2 - x2^2)"
b_3 = "0"
"#;

/// Randers metric of scalar flag curvature and isotropic S-curvature built
/// from the constant vector `a = (-1, 0, 0)`:
/// `b_k = 2 (c / D) x_k - (|x|^2 / D) c_k` and `a_jk = d_jk / D + b_j b_k`
/// with `c = -x1`, `c_k = -d_1k`, and `D = 1 - |x|^4`.  The form solves the
/// Zermelo navigation problem on flat space for the quadratic conformal
/// field `2 <a, x> x - |x|^2 a`, whose Euclidean norm is `|x|^2`; that norm
/// makes `D = 1 - |x|^4` the unique denominator for which `b^i = D^2 b_i`
/// and `|b|_a^2 = |x|^4`.
const SHEN_AVEC_RANDERS_FILE: &str = r#"[metric]
name = "shen_avec_randers"
kind = "randers"
dim = 3
region_center = [0.0, 0.0, 0.0]
region_radius = 0.4

[alpha]
a_11 = "1 / (1 - (x1^2 + x2^2 + x3^2)^2) + ((x2^2 + x3^2 - x1^2) / (1 - (x1^2 + x2^2 + x3^2)^2))^2"
a_12 = "((x2^2 + x3^2 - x1^2) / (1 - (x1^2 + x2^2 + x3^2)^2)) * (-2 * x1 * x2 / (1 - (x1^2 + x2^2 + x3^2)^2))"
a_13 = "((x2^2 + x3^2 - x1^2) / (1 - (x1^2 + x2^2 + x3^2)^2)) * (-2 * x1 * x3 / (1 - (x1^2 + x2^2 + x3^2)^2))"
a_22 = "1 / (1 - (x1^2 + x2^2 + x3^2)^2) + (-2 * x1 * x2 / (1 - (x1^2 + x2^2 + x3^2)^2))^2"
a_23 = "(-2 * x1 * x2 / (1 - (x1^2 + x2^2 + x3^2)^2)) * (-2 * x1 * x3 / (1 - (x1^2 + x2^2 + x3^2)^2))"
a_33 = "1 / (1 - (x1^2 + x2^2 + x3^2)^2) + (-2 * x1 * x3 / (1 - (x1^2 + x2^2 + x3^2)^2))^2"

[beta]
b_1 = "(x2^2 + x3^2 - x1^2) / (1 - (x1^2 + x2^2 + x3^2)^2)"
b_2 = "-2 * x1 * x2 / (1 - (x1^2 + x2^2 + x3^2)^2)"
b_3 = "-2 * x1 * x3 / (1 - (x1^2 + x2^2 + x3^2)^2)"
"#;

/// Non-Randers (alpha, beta) metric on the round 3-sphere in a stereographic
/// chart, `a_ij = 4 d_ij / (1 + |x|^2)^2`, with `b` a Killing field of
/// constant length 0.8 (a scaled left-invariant unit field pulled through
/// the chart) and generating function `phi(s) = 1 + s + s^2/4`.
const KILLING_S3_FILE: &str = r#"[metric]
name = "killing_s3_alphabeta"
kind = "alpha_beta"
dim = 3
region_center = [0.0, 0.0, 0.0]
region_radius = 0.4

[alpha]
a_11 = "4 / (1 + x1^2 + x2^2 + x3^2)^2"
a_12 = "0"
a_13 = "0"
a_22 = "4 / (1 + x1^2 + x2^2 + x3^2)^2"
a_23 = "0"
a_33 = "4 / (1 + x1^2 + x2^2 + x3^2)^2"

[beta]
b_1 = "3.2 * (x1 * x3 - x2) / (1 + x1^2 + x2^2 + x3^2)^2"
b_2 = "3.2 * (x2 * x3 + x1) / (1 + x1^2 + x2^2 + x3^2)^2"
b_3 = "1.6 * (1 + x3^2 - x1^2 - x2^2) / (1 + x1^2 + x2^2 + x3^2)^2"

[phi]
phi = "1 + s + 0.25 * s^2"
"#;

/// A single numerical claim about a gallery metric.  Claims are re-derived
/// by [`verify_entry`]; the stored numbers are bounds, not golden values.
#[derive(Debug, Clone, Serialize)]
pub enum Expectation {
    /// Worst residual of every classifier test stays below `bound` on the
    /// sampled batch (vacuous fits report residual zero).
    AllClassResidualsBelow { bound: f64 },
    /// Worst residual of the named classifier test stays below `bound`.
    ClassResidualBelow { class: &'static str, bound: f64 },
    /// Worst residual of the named classifier test exceeds `bound`: the
    /// metric genuinely fails that membership test somewhere in the batch.
    ClassResidualAbove { class: &'static str, bound: f64 },
    /// Frobenius norm of the named curvature tensor stays below `bound` at
    /// every sampled state with `y` normalized to `F(x, y) = 1`.
    TensorNormBelow { kind: TensorKind, bound: f64 },
    /// Fitted flag curvature equals `value` (within `tol * (1 + |value|)`)
    /// at every sampled state.
    ConstantFlagCurvature { value: f64, tol: f64 },
    /// `|S|` from indicatrix quadrature stays below `bound` at every
    /// sampled state with `y` normalized to `F(x, y) = 1`.
    SCurvatureBelow { bound: f64 },
    /// Covariant profile of the defining 1-form at a witness point:
    /// `|r_ij| <= r_bound`, `|s_i| <= s_bound` (Killing field of `alpha`),
    /// while `|s_ij| >= s_ij_floor` (the form is not closed).
    FormProfile { witness: [f64; 3], r_bound: f64, s_bound: f64, s_ij_floor: f64 },
    /// `|s_ij| >= floor` at a witness point: the defining 1-form is not
    /// closed there.
    NonClosedForm { witness: [f64; 3], floor: f64 },
    /// The defining 1-form has `alpha`-norm `value` (within `tol`) at every
    /// sampled base point.
    ConstantFormNorm { value: f64, tol: f64 },
}

impl Expectation {
    /// Human-readable statement of the claim.
    pub fn describe(&self) -> String {
        match self {
            Expectation::AllClassResidualsBelow { bound } => {
                format!("every classifier residual < {bound:.1e}")
            }
            Expectation::ClassResidualBelow { class, bound } => {
                format!("{class} residual < {bound:.1e}")
            }
            Expectation::ClassResidualAbove { class, bound } => {
                format!("{class} residual > {bound:.1e} (membership fails)")
            }
            Expectation::TensorNormBelow { kind, bound } => {
                format!("|{}| < {bound:.1e} on unit-speed states", kind.name())
            }
            Expectation::ConstantFlagCurvature { value, tol } => {
                format!("flag curvature = {value} (tol {tol:.1e})")
            }
            Expectation::SCurvatureBelow { bound } => {
                format!("|S| < {bound:.1e} by indicatrix quadrature")
            }
            Expectation::FormProfile { witness, r_bound, s_bound, s_ij_floor } => format!(
                "1-form at {witness:?}: |r_ij| <= {r_bound:.1e}, |s_i| <= {s_bound:.1e}, |s_ij| >= {s_ij_floor:.1e}"
            ),
            Expectation::NonClosedForm { witness, floor } => {
                format!("1-form not closed at {witness:?}: |s_ij| >= {floor:.1e}")
            }
            Expectation::ConstantFormNorm { value, tol } => {
                format!("constant 1-form alpha-norm {value} (tol {tol:.1e})")
            }
        }
    }
}

/// Result of re-deriving one manifest claim.
#[derive(Debug, Clone, Serialize)]
pub struct ExpectationOutcome {
    pub description: String,
    /// Worst observed value on the side the claim bounds.
    pub observed: f64,
    /// The claimed bound (floor for `*Above`/`NonClosedForm` claims).
    pub bound: f64,
    pub passed: bool,
}

/// A bundled metric: the file it ships as, the parsed specification, and the
/// manifest of claims checked against it.
#[derive(Debug, Clone)]
pub struct GalleryEntry {
    pub name: &'static str,
    /// One-line description of what the metric exhibits.
    pub summary: &'static str,
    /// Metric file contents in the documented format.
    pub file: &'static str,
    pub spec: MetricSpec,
    pub expectations: Vec<Expectation>,
}

/// Names of all bundled metrics.
pub fn names() -> &'static [&'static str] {
    &GALLERY_NAMES
}

/// Raw metric file for a bundled metric, as written by `gallery export`.
pub fn file_string(name: &str) -> Result<&'static str> {
    Ok(match name {
        "euclidean" => EUCLIDEAN_FILE,
        "riemannian_diag" => RIEMANNIAN_DIAG_FILE,
        "sphere2" => SPHERE2_FILE,
        "funk_ball_randers" => FUNK_BALL_RANDERS_FILE,
        "shen_avec_randers" => SHEN_AVEC_RANDERS_FILE,
        "killing_s3_alphabeta" => KILLING_S3_FILE,
        other => return Err(Error::UnknownGallery(other.into())),
    })
}

/// Loads and validates a bundled metric together with its manifest.
pub fn load(name: &str) -> Result<GalleryEntry> {
    let file = file_string(name)?;
    let spec = MetricSpec::from_file_string(file)?;
    let entry = match name {
        "euclidean" => GalleryEntry {
            name: "euclidean",
            summary: "flat Euclidean plane; every curvature vanishes",
            file,
            spec,
            expectations: vec![
                Expectation::AllClassResidualsBelow { bound: 1e-8 },
                Expectation::TensorNormBelow { kind: TensorKind::Riemann, bound: 1e-10 },
                Expectation::TensorNormBelow { kind: TensorKind::Berwald, bound: 1e-10 },
                Expectation::ConstantFlagCurvature { value: 0.0, tol: 1e-10 },
                Expectation::SCurvatureBelow { bound: 1e-7 },
            ],
        },
        "riemannian_diag" => GalleryEntry {
            name: "riemannian_diag",
            summary: "curved diagonal Riemannian metric; Berwald and Douglas by construction",
            file,
            spec,
            expectations: vec![
                Expectation::AllClassResidualsBelow { bound: 1e-5 },
                Expectation::ClassResidualBelow { class: "berwald", bound: 1e-9 },
                Expectation::ClassResidualBelow { class: "douglas", bound: 1e-9 },
                Expectation::SCurvatureBelow { bound: 1e-7 },
            ],
        },
        "sphere2" => GalleryEntry {
            name: "sphere2",
            summary: "round 2-sphere in a stereographic chart; constant flag curvature one",
            file,
            spec,
            expectations: vec![
                Expectation::AllClassResidualsBelow { bound: 1e-5 },
                Expectation::ConstantFlagCurvature { value: 1.0, tol: 1e-6 },
                Expectation::ClassResidualBelow { class: "berwald", bound: 1e-9 },
                Expectation::SCurvatureBelow { bound: 1e-7 },
            ],
        },
        "funk_ball_randers" => GalleryEntry {
            name: "funk_ball_randers",
            summary: "Randers metric on the unit ball with K = 0, S = 0, E = 0, \
                      zero Weyl curvature, non-closed 1-form (not Douglas)",
            file,
            spec,
            expectations: vec![
                Expectation::TensorNormBelow { kind: TensorKind::Riemann, bound: 1e-7 },
                Expectation::TensorNormBelow { kind: TensorKind::MeanBerwald, bound: 1e-7 },
                Expectation::TensorNormBelow { kind: TensorKind::Weyl, bound: 1e-7 },
                Expectation::TensorNormBelow { kind: TensorKind::Theta, bound: 1e-6 },
                Expectation::ConstantFlagCurvature { value: 0.0, tol: 1e-7 },
                Expectation::SCurvatureBelow { bound: 1e-4 },
                Expectation::ClassResidualBelow { class: "weyl", bound: 1e-7 },
                Expectation::ClassResidualBelow { class: "generalized_dtilde", bound: 1e-6 },
                Expectation::ClassResidualBelow { class: "gdw", bound: 1e-6 },
                Expectation::ClassResidualBelow { class: "isotropic_mean_berwald", bound: 1e-6 },
                Expectation::ClassResidualAbove { class: "douglas", bound: 1e-3 },
                Expectation::NonClosedForm { witness: [0.2, 0.15, -0.1], floor: 1e-3 },
            ],
        },
        "shen_avec_randers" => GalleryEntry {
            name: "shen_avec_randers",
            summary: "Randers metric of scalar flag curvature and isotropic S-curvature \
                      that is Weyl but neither Douglas nor generalized D-tilde",
            file,
            spec,
            expectations: vec![
                Expectation::ClassResidualBelow { class: "weyl", bound: 1e-6 },
                Expectation::ClassResidualBelow { class: "scalar_flag_curvature", bound: 1e-4 },
                Expectation::ClassResidualBelow { class: "gdw", bound: 1e-6 },
                Expectation::ClassResidualBelow { class: "wgdw", bound: 1e-6 },
                Expectation::ClassResidualBelow { class: "isotropic_mean_berwald", bound: 1e-6 },
                Expectation::ClassResidualAbove { class: "douglas", bound: 1e-3 },
                Expectation::ClassResidualAbove { class: "generalized_dtilde", bound: 1e-2 },
                Expectation::ClassResidualAbove {
                    class: "relatively_isotropic_dtilde",
                    bound: 1e-2,
                },
                Expectation::NonClosedForm { witness: [0.2, 0.15, -0.1], floor: 1e-3 },
            ],
        },
        "killing_s3_alphabeta" => {
            let entry = GalleryEntry {
                name: "killing_s3_alphabeta",
                summary: "non-Randers (alpha, beta) metric on the round 3-sphere whose \
                          1-form is a constant-length Killing field",
                file,
                spec,
                expectations: vec![
                    Expectation::FormProfile {
                        witness: [0.15, 0.1, -0.12],
                        r_bound: 1e-8,
                        s_bound: 1e-8,
                        s_ij_floor: 1e-3,
                    },
                    Expectation::ConstantFormNorm { value: 0.8, tol: 1e-9 },
                    // A constant-length Killing form makes the S-curvature
                    // and the mean Berwald curvature vanish identically.
                    Expectation::ClassResidualBelow { class: "weakly_berwald", bound: 1e-9 },
                    Expectation::ClassResidualBelow {
                        class: "isotropic_mean_berwald",
                        bound: 1e-8,
                    },
                    Expectation::SCurvatureBelow { bound: 1e-4 },
                    Expectation::ClassResidualAbove { class: "gdw", bound: 0.1 },
                    Expectation::ClassResidualAbove { class: "wgdw", bound: 0.1 },
                    Expectation::ClassResidualAbove { class: "weyl", bound: 1e-2 },
                    Expectation::ClassResidualAbove { class: "douglas", bound: 1e-2 },
                ],
            };
            validate_killing_entry(&entry)?;
            entry
        }
        other => return Err(Error::UnknownGallery(other.into())),
    };
    Ok(entry)
}

/// Loads every bundled metric.
pub fn all() -> Result<Vec<GalleryEntry>> {
    GALLERY_NAMES.iter().map(|name| load(name)).collect()
}

/// Load-time validation of the Killing construction: the defining 1-form
/// must satisfy `r_ij = 0` and `s_i = 0` while `s_ij` stays genuinely
/// non-zero, otherwise the bundled data are corrupt.
fn validate_killing_entry(entry: &GalleryEntry) -> Result<()> {
    let witness = [0.15, 0.1, -0.12];
    let probe_y = [0.3, 0.4, 0.5];
    let jets = AlphaBetaJets::<f64>::new(&entry.spec, 2, &witness, &probe_y)?;
    let (r_norm, s_norm, _) = jets.covariant_norms();
    let s_ij_norm = form_skew_norm(&jets);
    if r_norm > 1e-8 || s_norm > 1e-8 || s_ij_norm < 1e-3 {
        return Err(Error::HypothesisViolated {
            op: format!("gallery load `{}`", entry.name),
            detail: format!(
                "1-form is not a non-closed Killing field: |r_ij| = {r_norm:.3e}, \
                 |s_i| = {s_norm:.3e}, |s_ij| = {s_ij_norm:.3e}"
            ),
        });
    }
    Ok(())
}

fn form_skew_norm(jets: &AlphaBetaJets<f64>) -> f64 {
    let n = jets.s_low.len();
    let mut sum = 0.0;
    for row in &jets.s_low {
        debug_assert_eq!(row.len(), n);
        for jet in row {
            sum += jet.value().powi(2);
        }
    }
    sum.sqrt()
}

/// Sampling controls for [`verify_entry`].
#[derive(Debug, Clone, Copy)]
pub struct GalleryCheckOptions {
    pub points: usize,
    pub seed: u64,
    /// Jet order for the classifier (tensor-norm checks pick the smallest
    /// order each tensor needs).
    pub order: usize,
    /// Verdict tolerance handed to the classifier.
    pub tolerance: f64,
}

impl Default for GalleryCheckOptions {
    fn default() -> Self {
        GalleryCheckOptions { points: 10, seed: 0x00c0_ffee, order: 9, tolerance: 1e-5 }
    }
}

impl GalleryCheckOptions {
    fn classify_options(&self) -> ClassifyOptions {
        ClassifyOptions {
            points: self.points,
            seed: self.seed,
            order: self.order,
            tolerance: self.tolerance,
        }
    }
}

/// Re-derives every manifest claim of `entry` and reports pass/fail per
/// claim.  Claims never read stored results; each one is recomputed from the
/// metric specification.
pub fn verify_entry(
    entry: &GalleryEntry,
    opts: &GalleryCheckOptions,
) -> Result<Vec<ExpectationOutcome>> {
    let needs_classifier = entry.expectations.iter().any(|e| {
        matches!(
            e,
            Expectation::AllClassResidualsBelow { .. }
                | Expectation::ClassResidualBelow { .. }
                | Expectation::ClassResidualAbove { .. }
                | Expectation::ConstantFlagCurvature { .. }
        )
    });
    let report = if needs_classifier {
        Some(classify_metric::<f64>(&entry.spec, &opts.classify_options())?)
    } else {
        None
    };
    let report = report.as_ref();

    let mut outcomes = Vec::with_capacity(entry.expectations.len());
    for expectation in &entry.expectations {
        let outcome = match expectation {
            Expectation::AllClassResidualsBelow { bound } => {
                let report = report.expect("classifier report prepared");
                let observed = CLASS_NAMES
                    .iter()
                    .filter_map(|&class| report.summary_for(class))
                    .map(|summary| summary.worst_residual)
                    .fold(0.0f64, f64::max);
                outcome_below(expectation, observed, *bound)
            }
            Expectation::ClassResidualBelow { class, bound } => {
                let summary = class_summary(report, class)?;
                outcome_below(expectation, summary.worst_residual, *bound)
            }
            Expectation::ClassResidualAbove { class, bound } => {
                let summary = class_summary(report, class)?;
                outcome_above(expectation, summary.worst_residual, *bound)
            }
            Expectation::ConstantFlagCurvature { value, tol } => {
                let report = report.expect("classifier report prepared");
                let observed = report
                    .points
                    .iter()
                    .map(|point| flag_curvature_deviation(&point.fits, *value))
                    .fold(0.0f64, f64::max);
                outcome_below(expectation, observed, tol * (1.0 + value.abs()))
            }
            Expectation::TensorNormBelow { kind, bound } => {
                let observed = worst_tensor_norm(&entry.spec, *kind, opts)?;
                outcome_below(expectation, observed, *bound)
            }
            Expectation::SCurvatureBelow { bound } => {
                let observed = worst_s_curvature(&entry.spec, opts)?;
                outcome_below(expectation, observed, *bound)
            }
            Expectation::FormProfile { witness, r_bound, s_bound, s_ij_floor } => {
                let jets = form_jets_at(&entry.spec, witness)?;
                let (r_norm, s_norm, _) = jets.covariant_norms();
                let s_ij_norm = form_skew_norm(&jets);
                let passed =
                    r_norm <= *r_bound && s_norm <= *s_bound && s_ij_norm >= *s_ij_floor;
                ExpectationOutcome {
                    description: expectation.describe(),
                    observed: r_norm.max(s_norm),
                    bound: r_bound.max(*s_bound),
                    passed,
                }
            }
            Expectation::NonClosedForm { witness, floor } => {
                let jets = form_jets_at(&entry.spec, witness)?;
                outcome_above(expectation, form_skew_norm(&jets), *floor)
            }
            Expectation::ConstantFormNorm { value, tol } => {
                let observed = worst_form_norm_deviation(&entry.spec, *value, opts)?;
                outcome_below(expectation, observed, *tol)
            }
        };
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

fn outcome_below(expectation: &Expectation, observed: f64, bound: f64) -> ExpectationOutcome {
    ExpectationOutcome {
        description: expectation.describe(),
        observed,
        bound,
        passed: observed < bound,
    }
}

fn outcome_above(expectation: &Expectation, observed: f64, floor: f64) -> ExpectationOutcome {
    ExpectationOutcome {
        description: expectation.describe(),
        observed,
        bound: floor,
        passed: observed > floor,
    }
}

fn class_summary<'r>(
    report: Option<&'r crate::classify::ClassificationReport<f64>>,
    class: &str,
) -> Result<&'r crate::classify::ClassSummary<f64>> {
    report
        .expect("classifier report prepared")
        .summary_for(class)
        .ok_or_else(|| Error::UnknownTensor(class.to_string()))
}

fn flag_curvature_deviation(fits: &PointFits<f64>, value: f64) -> f64 {
    match fits.scalar_flag_curvature.k {
        Some(k) => (k - value).abs(),
        None => f64::INFINITY,
    }
}

/// Worst Frobenius norm of `kind` over the sampled batch, with `y` scaled to
/// unit Finsler length so the bound is scale-free.
fn worst_tensor_norm(
    metric: &MetricSpec,
    kind: TensorKind,
    opts: &GalleryCheckOptions,
) -> Result<f64> {
    let order = kind.min_order();
    let mut worst = 0.0f64;
    for state in sample_states(metric, opts.points, opts.seed)? {
        let y = unit_speed(metric, &state.x, &state.y)?;
        let spray = SprayJets::from_metric(metric, order, &state.x, &y)?;
        let bundle = CurvatureBundle::new(&spray);
        worst = worst.max(bundle.sample(kind)?.frobenius());
    }
    Ok(worst)
}

fn worst_s_curvature(metric: &MetricSpec, opts: &GalleryCheckOptions) -> Result<f64> {
    let rule = SphereRule::build(metric.dim, &QuadratureSpec::default())?;
    let mut worst = 0.0f64;
    for state in sample_states(metric, opts.points, opts.seed)? {
        let y = unit_speed(metric, &state.x, &state.y)?;
        let spray = SprayJets::from_metric(metric, 3, &state.x, &y)?;
        worst = worst.max(s_curvature(metric, &spray, &rule)?.abs());
    }
    Ok(worst)
}

fn worst_form_norm_deviation(
    metric: &MetricSpec,
    value: f64,
    opts: &GalleryCheckOptions,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for state in sample_states(metric, opts.points, opts.seed)? {
        let jets = form_jets_at(metric, &state.x)?;
        worst = worst.max((jets.b2.value().sqrt() - value).abs());
    }
    Ok(worst)
}

fn form_jets_at(metric: &MetricSpec, x: &[f64]) -> Result<AlphaBetaJets<f64>> {
    let probe_y = probe_direction(metric.dim);
    AlphaBetaJets::new(metric, 2, x, &probe_y)
}

/// Fixed non-axis direction used when a check only needs base-point data.
fn probe_direction(dim: usize) -> Vec<f64> {
    (0..dim).map(|i| 0.3 + 0.1 * i as f64).collect()
}

fn unit_speed(metric: &MetricSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let f = metric.eval_f_scalar(x, y)?;
    Ok(y.iter().map(|v| v / f).collect())
}
