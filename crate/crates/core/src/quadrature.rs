//! Numerical quadrature over directions: indicatrix volumes, the
//! Busemann-Hausdorff normalization, and the S-curvature.
//!
//! The indicatrix `{ y : F(x, y) < 1 }` is star shaped, so its volume is the
//! radial integral `vol = (1/n) \oint r(w)^n dS(w)` over the unit sphere with
//! `r(w)` solved from `F(x, r w) = 1`. The distortion of the metric is
//! `tau = ln sqrt(det g) - ln sigma` with `sigma = vol(B^n)/vol(indicatrix)`,
//! and the S-curvature is its derivative along the geodesic flow,
//! `S = tau_{|0}`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::SprayJets;
use crate::jet::{Jet, JetConfig};
use crate::metric::MetricSpec;
use crate::tensor::JetTensor;

/// Direction-space quadrature resolutions, adjustable from the command line.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureSpec {
    /// Trapezoid points on the circle (surfaces of dimension 1).
    pub circle_points: usize,
    /// Gauss-Legendre points along the polar angle (dimension 2 spheres).
    pub polar_points: usize,
    /// Trapezoid points along the azimuth (dimension 2 spheres).
    pub azimuthal_points: usize,
}

impl Default for QuadratureSpec {
    fn default() -> QuadratureSpec {
        QuadratureSpec { circle_points: 512, polar_points: 64, azimuthal_points: 128 }
    }
}

impl QuadratureSpec {
    /// Uniformly scales all resolutions (used by the `--quad` flag).
    pub fn scaled(factor: usize) -> QuadratureSpec {
        let base = QuadratureSpec::default();
        let f = factor.max(1);
        QuadratureSpec {
            circle_points: base.circle_points * f,
            polar_points: base.polar_points * f,
            azimuthal_points: base.azimuthal_points * f,
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre recurrence from the Chebyshev-like initial guesses.
pub fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(count >= 1, "quadrature needs at least one node");
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let m = count.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (count as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_count and its derivative at x by upward recurrence.
            let mut p0 = 1.0f64;
            let mut p1 = x;
            for k in 2..=count {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = count as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[count - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[count - 1 - i] = w;
    }
    if count % 2 == 1 {
        nodes[count / 2] = 0.0;
    }
    (nodes, weights)
}

/// A quadrature rule on the unit sphere `S^{n-1}`: unit direction nodes with
/// weights summing to the sphere's surface measure.
pub struct SphereRule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn build(dim: usize, spec: &QuadratureSpec) -> Result<SphereRule> {
        match dim {
            2 => {
                let n = spec.circle_points.max(8);
                let w = 2.0 * PI / n as f64;
                let mut nodes = Vec::with_capacity(n);
                for k in 0..n {
                    let t = 2.0 * PI * k as f64 / n as f64;
                    nodes.push(vec![t.cos(), t.sin()]);
                }
                Ok(SphereRule { nodes, weights: vec![w; n] })
            }
            3 => {
                let np = spec.polar_points.max(4);
                let na = spec.azimuthal_points.max(8);
                let (u, wu) = gauss_legendre(np);
                let wa = 2.0 * PI / na as f64;
                let mut nodes = Vec::with_capacity(np * na);
                let mut weights = Vec::with_capacity(np * na);
                for (ui, wui) in u.iter().zip(&wu) {
                    let sin_theta = (1.0 - ui * ui).sqrt();
                    for k in 0..na {
                        let phi = 2.0 * PI * k as f64 / na as f64;
                        nodes.push(vec![sin_theta * phi.cos(), sin_theta * phi.sin(), *ui]);
                        weights.push(wui * wa);
                    }
                }
                Ok(SphereRule { nodes, weights })
            }
            other => Err(Error::UnsupportedDimension {
                dim: other,
                msg: "direction quadrature rules exist for dimensions 2 and 3".to_string(),
            }),
        }
    }
}

/// Volume of the Euclidean unit ball in `dim` dimensions.
pub fn unit_ball_volume(dim: usize) -> Result<f64> {
    match dim {
        2 => Ok(PI),
        3 => Ok(4.0 * PI / 3.0),
        4 => Ok(PI * PI / 2.0),
        other => Err(Error::UnsupportedDimension {
            dim: other,
            msg: "unit ball volume is tabulated for dimensions 2 through 4".to_string(),
        }),
    }
}

/// One radial solve: the radius `r` with `F(x, r w) = 1` by Newton iteration,
/// plus the value and full state gradient of `F` at `(x, w)` for volume
/// derivatives.
struct RadialSolve {
    radius: f64,
    f_at_direction: f64,
    fx_at_direction: Vec<f64>,
}

fn solve_radius(
    metric: &MetricSpec,
    config: &JetConfig,
    x: &[f64],
    direction: &[f64],
) -> Result<RadialSolve> {
    let n = metric.dim;
    let f_dir = metric.f2_jet(config, x, direction)?.sqrt()?;
    let f0 = f_dir.value();
    if !(f0.is_finite() && f0 > 0.0) {
        return Err(Error::NewtonDiverged {
            direction: direction.to_vec(),
            residual: f0,
        });
    }
    let mut fx = Vec::with_capacity(n);
    let mut orders = vec![0u8; 2 * n];
    for m in 0..n {
        orders[m] = 1;
        fx.push(f_dir.derivative(&orders)?);
        orders[m] = 0;
    }
    let mut r = 1.0 / f0;
    let mut residual = f64::INFINITY;
    for _ in 0..30 {
        let y: Vec<f64> = direction.iter().map(|v| v * r).collect();
        let f = metric.f2_jet(config, x, &y)?.sqrt()?;
        residual = f.value() - 1.0;
        if residual.abs() < 1e-13 {
            break;
        }
        let mut slope = 0.0;
        for m in 0..n {
            orders[n + m] = 1;
            slope += f.derivative(&orders)? * direction[m];
            orders[n + m] = 0;
        }
        if !(slope.is_finite() && slope.abs() > 1e-300) {
            return Err(Error::NewtonDiverged {
                direction: direction.to_vec(),
                residual,
            });
        }
        r -= residual / slope;
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::NewtonDiverged {
                direction: direction.to_vec(),
                residual,
            });
        }
    }
    if residual.abs() > 1e-9 {
        return Err(Error::NewtonDiverged {
            direction: direction.to_vec(),
            residual,
        });
    }
    Ok(RadialSolve { radius: r, f_at_direction: f0, fx_at_direction: fx })
}

/// Indicatrix volume at `x` together with its base-point gradient
/// `d vol / d x^m = -\oint F_{x^m} / F^{n+1} dS`.
pub fn indicatrix_volume_and_gradient(
    metric: &MetricSpec,
    x: &[f64],
    rule: &SphereRule,
) -> Result<(f64, Vec<f64>)> {
    let n = metric.dim;
    let config = JetConfig::get(2 * n, 1)?;
    let mut volume = 0.0;
    let mut gradient = vec![0.0; n];
    for (node, w) in rule.nodes.iter().zip(&rule.weights) {
        let solve = solve_radius(metric, &config, x, node)?;
        volume += w * solve.radius.powi(n as i32) / n as f64;
        let f_pow = solve.f_at_direction.powi(n as i32 + 1);
        for m in 0..n {
            gradient[m] -= w * solve.fx_at_direction[m] / f_pow;
        }
    }
    Ok((volume, gradient))
}

/// Indicatrix volume alone.
pub fn indicatrix_volume(metric: &MetricSpec, x: &[f64], rule: &SphereRule) -> Result<f64> {
    Ok(indicatrix_volume_and_gradient(metric, x, rule)?.0)
}

/// Busemann-Hausdorff normalization `sigma = vol(B^n) / vol(indicatrix)`.
pub fn bh_normalization(metric: &MetricSpec, x: &[f64], rule: &SphereRule) -> Result<f64> {
    Ok(unit_ball_volume(metric.dim)? / indicatrix_volume(metric, x, rule)?)
}

/// S-curvature `S(x, y) = tau_{|0}` with
/// `tau = ln sqrt(det g) - ln sigma`: the metric part comes from jets and the
/// volume part from the quadrature gradient of the indicatrix volume.
pub fn s_curvature(
    metric: &MetricSpec,
    spray: &SprayJets<f64>,
    rule: &SphereRule,
) -> Result<f64> {
    let n = spray.dim();
    let rows: Vec<Vec<Jet<f64>>> = (0..n)
        .map(|i| (0..n).map(|j| spray.g.get(&[i, j]).clone()).collect())
        .collect();
    let ln_det = crate::linalg::jet_det(&rows)?.ln()?;
    let metric_part = spray
        .horizontal_zero(&JetTensor::scalar(ln_det, n))?
        .into_scalar()
        .value()
        * 0.5;
    let (volume, gradient) = indicatrix_volume_and_gradient(metric, spray.x(), rule)?;
    let volume_part: f64 = (0..n).map(|m| spray.y()[m] * gradient[m] / volume).sum();
    Ok(metric_part + volume_part)
}
