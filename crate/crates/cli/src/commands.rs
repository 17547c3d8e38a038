//! Command implementations.

use std::process::ExitCode;
use std::time::Instant;

use finsler::alphabeta::AlphaBetaJets;
use finsler::classify::{classify_metric, ClassificationReport, ClassifyOptions, CLASS_NAMES};
use finsler::curvature::{CurvatureBundle, TensorKind};
use finsler::error::{Error, Result};
use finsler::gallery;
use finsler::geometry::{sample_states, SprayJets, StatePoint};
use finsler::metric::MetricSpec;
use finsler::projective::{wgdw_invariance_check, ProjectiveFactor, ProjectivePair};
use finsler::quadrature::{s_curvature, QuadratureSpec, SphereRule};
use finsler::tensor::TensorSample;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::report::{self, csv_num, verdict_word, Format, IdentityRow};
use crate::{
    Cli, ClassifyArgs, Command, GalleryAction, GalleryArgs, IdentitiesArgs, MetricSource,
    ProjectiveArgs, Suite, TensorArgs,
};

/// Bounds for the identity rows, matching the accuracy each computation
/// supports: pure jet identities are exact to rounding, finite differences
/// of quadrature values carry the discretization error.
const RIEMANN_BERWALD_BOUND: f64 = 1e-6;
const ES_BOUND: f64 = 1e-3;
const LEMMA_BOUND: f64 = 1e-6;
const DOUGLAS_ROUTES_BOUND: f64 = 1e-10;
const TRACE_BOUND: f64 = 1e-9;
const KILLING_BOUND: f64 = 1e-7;
const PROJ_DOUGLAS_BOUND: f64 = 1e-7;
const PROJ_RIEMANN_BOUND: f64 = 1e-6;
const PROJ_BERWALD_BOUND: f64 = 1e-6;
const PROJ_TRANSPORT_BOUND: f64 = 1e-7;
const PROJ_WEYL_BOUND: f64 = 1e-7;
const PROJ_GDW_BOUND: f64 = 1e-7;
const PROJ_LAMBDA_BOUND: f64 = 1e-4;

/// Step for the central-difference fiber Hessian of the S-curvature.
const ES_FD_STEP: f64 = 1e-2;

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Classify(args) => cmd_classify(args),
        Command::Tensor(args) => cmd_tensor(args),
        Command::Identities(args) => cmd_identities(args),
        Command::Projective(args) => cmd_projective(args),
        Command::Gallery(args) => cmd_gallery(args),
    }
}

fn load_metric(source: &MetricSource) -> Result<(MetricSpec, String)> {
    match (&source.metric, &source.gallery) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)?;
            Ok((MetricSpec::from_file_string(&text)?, path.display().to_string()))
        }
        (None, Some(name)) => Ok((gallery::load(name)?.spec, format!("gallery:{name}"))),
        _ => unreachable!("clap enforces exactly one metric source"),
    }
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        if n > 0 {
            // A second initialization in the same process is harmless.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

// ---------------------------------------------------------------- classify

fn cmd_classify(args: ClassifyArgs) -> Result<ExitCode> {
    init_threads(args.threads);
    let (metric, source) = load_metric(&args.source)?;
    let order = args.order.resolve(finsler::classify::DEFAULT_ORDER);
    let opts = ClassifyOptions {
        points: args.sample.points,
        seed: args.sample.seed,
        order,
        tolerance: args.tol,
    };
    let start = Instant::now();
    let rep = classify_metric::<f64>(&metric, &opts)?;
    eprintln!(
        "classify: {} points at order {} in {:.3}s",
        rep.points.len(),
        order,
        start.elapsed().as_secs_f64()
    );

    let content = match args.output.format {
        Format::Json => {
            let config = json!({
                "command": "classify",
                "source": source,
                "points": opts.points,
                "seed": opts.seed,
                "order": opts.order,
                "tolerance": opts.tolerance,
                "format": args.output.format.name(),
            });
            let states: Vec<StatePoint> = rep
                .points
                .iter()
                .map(|p| StatePoint { x: p.x.clone(), y: p.y.clone() })
                .collect();
            let doc = report::base_document(
                &rep.metric,
                config,
                report::points_json(&states),
                classes_json(&rep),
                Value::Array(Vec::new()),
            );
            report::json_string(&doc)
        }
        Format::Text => classify_text(&metric, &source, &opts, &rep),
        Format::Csv => classify_csv(&rep, args.tol, metric.dim),
    };
    report::emit(&args.output.out, &content)?;
    Ok(ExitCode::SUCCESS)
}

fn classes_json(rep: &ClassificationReport<f64>) -> Value {
    let mut classes = Map::new();
    for class in CLASS_NAMES {
        let summary = rep.summary_for(class).expect("every class is summarized");
        let fits: Vec<Value> = rep
            .points
            .iter()
            .map(|p| {
                let fit = p.fits.get(class).expect("class name is enumerated");
                serde_json::to_value(fit).expect("fit values are finite")
            })
            .collect();
        let mut obj = Map::new();
        obj.insert("verdict".into(), json!(summary.verdict));
        obj.insert("worst_residual".into(), json!(summary.worst_residual));
        obj.insert("vacuous_points".into(), json!(summary.vacuous_points));
        if class == "wgdw" {
            if let Some(dev) = rep.wgdw_lambda_rescale_deviation {
                obj.insert("lambda_rescale_deviation".into(), json!(dev));
            }
        }
        obj.insert("fits".into(), Value::Array(fits));
        classes.insert(class.to_string(), Value::Object(obj));
    }
    Value::Object(classes)
}

fn classify_text(
    metric: &MetricSpec,
    source: &str,
    opts: &ClassifyOptions,
    rep: &ClassificationReport<f64>,
) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "metric: {} ({}, dim {})\nsource: {}\npoints: {}   seed: {}   order: {}   tolerance: {:.1e}\n\n",
        rep.metric,
        metric.kind.name(),
        metric.dim,
        source,
        opts.points,
        opts.seed,
        opts.order,
        opts.tolerance,
    ));
    let width = CLASS_NAMES.iter().map(|c| c.len()).max().unwrap_or(5);
    out.push_str(&format!(
        "{:<width$}  {:>14}  {:>7}  verdict\n",
        "class", "worst residual", "vacuous"
    ));
    let mut passed = 0usize;
    for class in CLASS_NAMES {
        let s = rep.summary_for(class).expect("every class is summarized");
        if s.verdict {
            passed += 1;
        }
        out.push_str(&format!(
            "{:<width$}  {:>14.4e}  {:>7}  {}\n",
            s.class,
            s.worst_residual,
            s.vacuous_points,
            verdict_word(s.verdict)
        ));
    }
    out.push_str(&format!("\n{passed} of {} classes pass\n", CLASS_NAMES.len()));
    if let Some(dev) = rep.wgdw_lambda_rescale_deviation {
        out.push_str(&format!("wgdw lambda rescale deviation: {dev:.4e}\n"));
    }
    out
}

fn classify_csv(rep: &ClassificationReport<f64>, tol: f64, dim: usize) -> String {
    let mut out = String::from("point_index,class,residual,verdict,lambda");
    for i in 1..=dim {
        out.push_str(&format!(",mu_{i}"));
    }
    out.push_str(",sigma,c,k\n");
    for (index, point) in rep.points.iter().enumerate() {
        for (class, fit) in point.fits.entries() {
            let opt = |v: Option<f64>| v.map(csv_num).unwrap_or_default();
            out.push_str(&format!(
                "{index},{class},{},{},{}",
                csv_num(fit.residual),
                verdict_word(fit.residual < tol),
                opt(fit.lambda),
            ));
            for i in 0..dim {
                let cell = fit.mu.as_ref().map(|m| csv_num(m[i])).unwrap_or_default();
                out.push_str(&format!(",{cell}"));
            }
            out.push_str(&format!(
                ",{},{},{}\n",
                opt(fit.sigma),
                opt(fit.c),
                opt(fit.k),
            ));
        }
    }
    out
}

// ------------------------------------------------------------------ tensor

fn cmd_tensor(args: TensorArgs) -> Result<ExitCode> {
    let (metric, source) = load_metric(&args.source)?;
    let kind = parse_tensor_name(&args.name)?;
    let (x, y) = parse_state(&args.at, metric.dim)?;
    let order = args.order.resolve(kind.min_order());
    let start = Instant::now();
    let spray = SprayJets::from_metric(&metric, order, &x, &y)?;
    let bundle = CurvatureBundle::new(&spray);
    let sample = bundle.sample(kind)?;
    eprintln!(
        "tensor: {} at order {} in {:.3}s",
        kind.name(),
        order,
        start.elapsed().as_secs_f64()
    );

    let content = match args.output.format {
        Format::Json => {
            let config = json!({
                "command": "tensor",
                "source": source,
                "name": kind.name(),
                "at": args.at,
                "order": order,
                "format": args.output.format.name(),
            });
            let states = [StatePoint { x: x.clone(), y: y.clone() }];
            let mut doc = report::base_document(
                &metric.name,
                config,
                report::points_json(&states),
                Value::Object(Map::new()),
                Value::Array(Vec::new()),
            );
            doc.as_object_mut().expect("base document is an object").insert(
                "tensor".into(),
                json!({
                    "name": kind.name(),
                    "rank": sample.rank(),
                    "dim": sample.dim(),
                    "order": order,
                    "shape": vec![sample.dim(); sample.rank()],
                    "components": sample.components(),
                    "frobenius": sample.frobenius(),
                    "max_abs": sample.max_abs(),
                }),
            );
            report::json_string(&doc)
        }
        Format::Text => tensor_text(&metric, kind, order, &x, &y, &sample),
        Format::Csv => tensor_csv(&sample),
    };
    report::emit(&args.output.out, &content)?;
    Ok(ExitCode::SUCCESS)
}

fn parse_tensor_name(name: &str) -> Result<TensorKind> {
    TensorKind::ALL
        .iter()
        .copied()
        .find(|k| k.name() == name)
        .ok_or_else(|| {
            let known: Vec<&str> = TensorKind::ALL.iter().map(|k| k.name()).collect();
            Error::UnknownTensor(format!("{name}; expected one of: {}", known.join(", ")))
        })
}

fn parse_state(at: &str, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut x = None;
    let mut y = None;
    for part in at.split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (key, rest) = part.split_once('=').ok_or_else(|| {
            Error::InvalidPoint(format!("expected `x=...` or `y=...`, got `{part}`"))
        })?;
        let values = rest
            .split(',')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidPoint(format!("bad number `{}` in `{part}`", v.trim()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        match key.trim() {
            "x" => x = Some(values),
            "y" => y = Some(values),
            other => {
                return Err(Error::InvalidPoint(format!(
                    "unknown block `{other}` (expected `x` or `y`)"
                )))
            }
        }
    }
    let x = x.ok_or_else(|| Error::InvalidPoint("missing `x=...` block".into()))?;
    let y = y.ok_or_else(|| Error::InvalidPoint("missing `y=...` block".into()))?;
    for (label, v) in [("x", &x), ("y", &y)] {
        if v.len() != dim {
            return Err(Error::InvalidPoint(format!(
                "`{label}` has {} components, the metric dimension is {dim}",
                v.len()
            )));
        }
    }
    Ok((x, y))
}

/// Decodes a row-major flat position into 1-based tensor indices.
fn tensor_indices(flat: usize, dim: usize, rank: usize) -> Vec<usize> {
    let mut idx = vec![0usize; rank];
    let mut rem = flat;
    for slot in (0..rank).rev() {
        idx[slot] = rem % dim + 1;
        rem /= dim;
    }
    idx
}

fn index_label(idx: &[usize], sep: &str) -> String {
    idx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(sep)
}

fn tensor_text(
    metric: &MetricSpec,
    kind: TensorKind,
    order: usize,
    x: &[f64],
    y: &[f64],
    sample: &TensorSample<f64>,
) -> String {
    let mut out = format!(
        "metric: {} ({}, dim {})\ntensor: {}  rank {}  order {}\nx = {x:?}\ny = {y:?}\n\n",
        metric.name,
        metric.kind.name(),
        metric.dim,
        kind.name(),
        sample.rank(),
        order,
    );
    let name = kind.name();
    for (flat, value) in sample.components().iter().enumerate() {
        if sample.rank() == 0 {
            out.push_str(&format!("{name} = {value:.16e}\n"));
        } else {
            let idx = tensor_indices(flat, sample.dim(), sample.rank());
            out.push_str(&format!("{name}[{}] = {value:.16e}\n", index_label(&idx, ",")));
        }
    }
    out.push_str(&format!(
        "\nfrobenius norm = {:.16e}\nmax |component| = {:.16e}\n",
        sample.frobenius(),
        sample.max_abs()
    ));
    out
}

fn tensor_csv(sample: &TensorSample<f64>) -> String {
    let mut out = String::from("component,value\n");
    for (flat, value) in sample.components().iter().enumerate() {
        let idx = tensor_indices(flat, sample.dim(), sample.rank());
        let label = if sample.rank() == 0 { "value".to_string() } else { index_label(&idx, ".") };
        out.push_str(&format!("{label},{}\n", csv_num(*value)));
    }
    out.push_str(&format!("frobenius,{}\n", csv_num(sample.frobenius())));
    out.push_str(&format!("max_abs,{}\n", csv_num(sample.max_abs())));
    out
}

// -------------------------------------------------------------- identities

type RawRow = (String, f64, f64);

fn cmd_identities(args: IdentitiesArgs) -> Result<ExitCode> {
    init_threads(args.threads);
    let (metric, source) = load_metric(&args.source)?;
    let order = args.order.resolve(finsler::classify::DEFAULT_ORDER);
    let states = sample_states(&metric, args.sample.points, args.sample.seed)?;
    let start = Instant::now();
    let rows = identity_rows(&metric, args.suite, &states, order, args.quad)?;
    eprintln!(
        "identities: {} rows over {} points in {:.3}s",
        rows.len(),
        states.len(),
        start.elapsed().as_secs_f64()
    );

    let all_pass = rows.iter().all(|r| r.verdict);
    let content = match args.output.format {
        Format::Json => {
            let config = json!({
                "command": "identities",
                "source": source,
                "suite": args.suite.name(),
                "points": args.sample.points,
                "seed": args.sample.seed,
                "order": order,
                "quad": args.quad,
                "format": args.output.format.name(),
            });
            let doc = report::base_document(
                &metric.name,
                config,
                report::points_json(&states),
                Value::Object(Map::new()),
                report::identities_json(&rows),
            );
            report::json_string(&doc)
        }
        Format::Text => {
            let mut out = format!(
                "metric: {} ({}, dim {})\nsource: {}\nsuite: {}   points: {}   seed: {}   order: {}   quad: {}\n\n",
                metric.name,
                metric.kind.name(),
                metric.dim,
                source,
                args.suite.name(),
                args.sample.points,
                args.sample.seed,
                order,
                args.quad,
            );
            out.push_str(&report::identities_text(&rows));
            out
        }
        Format::Csv => report::identities_csv(&rows),
    };
    report::emit(&args.output.out, &content)?;
    Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

/// Runs the selected suites at every state and keeps each row's worst
/// residual. Row sets are identical across points, so the merge preserves
/// the first point's row order.
fn identity_rows(
    metric: &MetricSpec,
    suite: Suite,
    states: &[StatePoint],
    order: usize,
    quad: usize,
) -> Result<Vec<IdentityRow>> {
    let wants = |s: Suite| suite == Suite::All || suite == s;

    let quad_rule = if wants(Suite::Es) && (2..=3).contains(&metric.dim) {
        Some(SphereRule::build(metric.dim, &QuadratureSpec::scaled(quad))?)
    } else {
        if wants(Suite::Es) {
            eprintln!(
                "note: skipping the quadrature S-curvature row (dimension {} has no sphere rule)",
                metric.dim
            );
        }
        None
    };

    // For `all`, the Killing rows only apply when the metric carries a
    // 1-form that actually is a constant-length Killing form; probe at the
    // first state. An explicit `--suite killing` skips the probe so the
    // hypothesis failure surfaces as an input error.
    let killing_on = match suite {
        Suite::Killing => true,
        Suite::All => {
            metric.kind.alpha_beta().is_some()
                && !states.is_empty()
                && AlphaBetaJets::<f64>::new(metric, 2, &states[0].x, &states[0].y)
                    .and_then(|ab| ab.require_killing("identity suite selection"))
                    .is_ok()
        }
        _ => false,
    };
    if suite == Suite::All && metric.kind.alpha_beta().is_some() && !killing_on {
        eprintln!("note: skipping the Killing rows (the 1-form is not a constant-length Killing form)");
    }

    let factors = if wants(Suite::Projective) {
        let mut factors = vec![ProjectiveFactor::parse("0.1*F")?];
        if metric.kind.alpha_beta().is_some() {
            factors.push(ProjectiveFactor::parse("beta")?);
        }
        factors
    } else {
        Vec::new()
    };

    let per_point: Vec<Vec<RawRow>> = states
        .par_iter()
        .map(|st| {
            point_rows(metric, suite, order, quad_rule.as_ref(), killing_on, &factors, &st.x, &st.y)
        })
        .collect::<Result<_>>()?;

    let mut merged: Vec<RawRow> = Vec::new();
    for rows in per_point {
        for (name, value, bound) in rows {
            match merged.iter_mut().find(|(n, _, _)| *n == name) {
                Some(entry) => entry.1 = entry.1.max(value),
                None => merged.push((name, value, bound)),
            }
        }
    }
    Ok(merged
        .into_iter()
        .map(|(name, value, bound)| IdentityRow::new(name, value, bound))
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn point_rows(
    metric: &MetricSpec,
    suite: Suite,
    order: usize,
    quad_rule: Option<&SphereRule>,
    killing_on: bool,
    factors: &[ProjectiveFactor],
    x: &[f64],
    y: &[f64],
) -> Result<Vec<RawRow>> {
    let wants = |s: Suite| suite == Suite::All || suite == s;
    let mut rows: Vec<RawRow> = Vec::new();

    if wants(Suite::RiemannBerwald) || wants(Suite::Es) || wants(Suite::LemmaWdtheta) {
        let spray = SprayJets::from_metric(metric, order, x, y)?;
        let bundle = CurvatureBundle::new(&spray);
        if wants(Suite::RiemannBerwald) {
            rows.push((
                "riemann_berwald_exchange".into(),
                bundle.riemann_berwald_residual()?,
                RIEMANN_BERWALD_BOUND,
            ));
        }
        if wants(Suite::Es) {
            rows.push((
                "mean_berwald_distortion".into(),
                bundle.mean_berwald_distortion_residual()?,
                ES_BOUND,
            ));
            if let Some(rule) = quad_rule {
                let e = bundle.sample(TensorKind::MeanBerwald)?;
                rows.push((
                    "mean_berwald_quadrature".into(),
                    mean_berwald_quadrature_residual(metric, rule, x, y, &e)?,
                    ES_BOUND,
                ));
            }
        }
        if wants(Suite::LemmaWdtheta) {
            rows.push((
                "weyl_douglas_theta".into(),
                bundle.weyl_douglas_theta_residual()?,
                LEMMA_BOUND,
            ));
            rows.push((
                "douglas_two_routes".into(),
                bundle.douglas_route_residual()?,
                DOUGLAS_ROUTES_BOUND,
            ));
            for (name, violation) in bundle.trace_annihilation_residuals()? {
                rows.push((name.to_string(), violation, TRACE_BOUND));
            }
        }
    }

    if killing_on {
        let ab = AlphaBetaJets::<f64>::new(metric, order, x, y)?;
        let spray = SprayJets::from_metric(metric, order, x, y)?;
        let suite_rows = ab.killing_suite(&spray)?;
        for (name, value) in suite_rows.entries() {
            rows.push((format!("killing {name}"), value, KILLING_BOUND));
        }
    }

    for factor in factors {
        rows.extend(projective_rows_at(
            metric,
            factor,
            order,
            finsler::classify::DEFAULT_TOLERANCE,
            x,
            y,
        )?);
    }

    Ok(rows)
}

/// `E_{jk}` from jets against half the central-difference fiber Hessian of
/// the quadrature S-curvature; worst entry over `1 + max |E|`.
fn mean_berwald_quadrature_residual(
    metric: &MetricSpec,
    rule: &SphereRule,
    x: &[f64],
    y: &[f64],
    e_jets: &TensorSample<f64>,
) -> Result<f64> {
    let n = metric.dim;
    let h = ES_FD_STEP;
    let s_at = |point: &[f64]| -> Result<f64> {
        let spray = SprayJets::from_metric(metric, 3, x, point)?;
        s_curvature(metric, &spray, rule)
    };
    let shifted = |j: usize, dj: f64, k: usize, dk: f64| -> Vec<f64> {
        let mut out = y.to_vec();
        out[j] += dj;
        out[k] += dk;
        out
    };
    let s0 = s_at(y)?;
    let mut worst = 0.0f64;
    for j in 0..n {
        for k in j..n {
            let half_hessian = if j == k {
                (s_at(&shifted(j, h, j, 0.0))? - 2.0 * s0 + s_at(&shifted(j, -h, j, 0.0))?)
                    / (2.0 * h * h)
            } else {
                (s_at(&shifted(j, h, k, h))? - s_at(&shifted(j, h, k, -h))?
                    - s_at(&shifted(j, -h, k, h))?
                    + s_at(&shifted(j, -h, k, -h))?)
                    / (8.0 * h * h)
            };
            worst = worst.max((half_hessian - e_jets.get(&[j, k])).abs());
        }
    }
    Ok(worst / (1.0 + e_jets.max_abs()))
}

// -------------------------------------------------------------- projective

fn cmd_projective(args: ProjectiveArgs) -> Result<ExitCode> {
    init_threads(args.threads);
    let (metric, source) = load_metric(&args.source)?;
    let factor = ProjectiveFactor::parse(&args.factor)?;
    factor.validate(&metric, args.sample.seed)?;
    let order = args.order.resolve(finsler::classify::DEFAULT_ORDER);
    let states = sample_states(&metric, args.sample.points, args.sample.seed)?;
    let start = Instant::now();

    let per_point: Vec<Vec<RawRow>> = states
        .par_iter()
        .map(|st| projective_rows_at(&metric, &factor, order, args.tol, &st.x, &st.y))
        .collect::<Result<_>>()?;
    eprintln!(
        "projective: {} points in {:.3}s",
        states.len(),
        start.elapsed().as_secs_f64()
    );

    let mut merged: Vec<RawRow> = Vec::new();
    for rows in per_point {
        for (name, value, bound) in rows {
            match merged.iter_mut().find(|(n, _, _)| *n == name) {
                Some(entry) => entry.1 = entry.1.max(value),
                None => merged.push((name, value, bound)),
            }
        }
    }
    let rows: Vec<IdentityRow> = merged
        .into_iter()
        .map(|(name, value, bound)| IdentityRow::new(name, value, bound))
        .collect();

    let content = match args.output.format {
        Format::Json => {
            let config = json!({
                "command": "projective",
                "source": source,
                "factor": factor.describe(),
                "points": args.sample.points,
                "seed": args.sample.seed,
                "order": order,
                "tolerance": args.tol,
                "format": args.output.format.name(),
            });
            let doc = report::base_document(
                &metric.name,
                config,
                report::points_json(&states),
                Value::Object(Map::new()),
                report::identities_json(&rows),
            );
            report::json_string(&doc)
        }
        Format::Text => {
            let mut out = format!(
                "metric: {} ({}, dim {})\nsource: {}\nfactor: P = {}   points: {}   seed: {}   order: {}\n\n",
                metric.name,
                metric.kind.name(),
                metric.dim,
                source,
                factor.describe(),
                args.sample.points,
                args.sample.seed,
                order,
            );
            out.push_str(&report::identities_text(&rows));
            out
        }
        Format::Csv => report::identities_csv(&rows),
    };
    report::emit(&args.output.out, &content)?;
    Ok(ExitCode::SUCCESS)
}

fn projective_bound(name: &str) -> f64 {
    match name {
        "douglas_invariance" => PROJ_DOUGLAS_BOUND,
        "riemann_law" => PROJ_RIEMANN_BOUND,
        "berwald_expansion" => PROJ_BERWALD_BOUND,
        "douglas_transport" => PROJ_TRANSPORT_BOUND,
        "weyl_invariance" => PROJ_WEYL_BOUND,
        "gdw_invariance" => PROJ_GDW_BOUND,
        other => unreachable!("unlisted projective residual `{other}`"),
    }
}

fn projective_rows_at(
    metric: &MetricSpec,
    factor: &ProjectiveFactor,
    order: usize,
    tolerance: f64,
    x: &[f64],
    y: &[f64],
) -> Result<Vec<RawRow>> {
    let label = factor.describe();
    let pair = ProjectivePair::new(metric, factor, order, x, y)?;
    let residuals = pair.residuals()?;
    let mut rows: Vec<RawRow> = residuals
        .entries()
        .into_iter()
        .map(|(name, value)| (format!("[P = {label}] {name}"), value, projective_bound(name)))
        .collect();
    let wgdw = wgdw_invariance_check(&pair, tolerance)?;
    rows.push((
        format!("[P = {label}] wgdw_verdict_preserved"),
        if wgdw.verdicts_match { 0.0 } else { 1.0 },
        0.5,
    ));
    // The transport law for the fitted scalar presupposes that the W-GDW
    // condition holds on both sides; otherwise lambda is a fit artifact.
    let lambda_meaningful =
        wgdw.base.residual < tolerance && wgdw.transformed.residual < tolerance;
    if let (Some(relation), true) = (wgdw.lambda_relation, lambda_meaningful) {
        rows.push((format!("[P = {label}] wgdw_lambda_relation"), relation, PROJ_LAMBDA_BOUND));
    }
    Ok(rows)
}

// ----------------------------------------------------------------- gallery

fn cmd_gallery(args: GalleryArgs) -> Result<ExitCode> {
    match args.action {
        GalleryAction::List { output } => {
            let entries = gallery::all()?;
            let content = match output.format {
                Format::Json => {
                    let list: Vec<Value> = entries
                        .iter()
                        .map(|e| {
                            json!({
                                "name": e.name,
                                "dim": e.spec.dim,
                                "kind": e.spec.kind.name(),
                                "summary": e.summary,
                            })
                        })
                        .collect();
                    report::json_string(&Value::Array(list))
                }
                Format::Text => {
                    let width = entries.iter().map(|e| e.name.len()).max().unwrap_or(4);
                    let mut out =
                        format!("{:<width$}  dim  {:<10}  summary\n", "name", "kind");
                    for e in &entries {
                        out.push_str(&format!(
                            "{:<width$}  {:>3}  {:<10}  {}\n",
                            e.name,
                            e.spec.dim,
                            e.spec.kind.name(),
                            e.summary
                        ));
                    }
                    out
                }
                Format::Csv => {
                    let mut out = String::from("name,dim,kind,summary\n");
                    for e in &entries {
                        out.push_str(&format!(
                            "{},{},{},\"{}\"\n",
                            e.name,
                            e.spec.dim,
                            e.spec.kind.name(),
                            e.summary.replace('"', "\"\"")
                        ));
                    }
                    out
                }
            };
            report::emit(&output.out, &content)?;
        }
        GalleryAction::Export { name, out } => {
            let file = gallery::file_string(&name)?;
            report::emit(&out, file)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
