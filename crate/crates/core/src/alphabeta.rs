//! Closed-form machinery for metrics of the form `F = α · φ(β/α)`, where
//! `α = sqrt(a_ij(x) y^i y^j)` is a Riemannian norm and `β = b_i(x) y^i` a
//! one-form.
//!
//! Everything the closed formulas need — the Riemannian data, the covariant
//! derivatives of `β`, the chain of `φ` derivatives — is carried as jets so
//! the same structure serves both as a standalone evaluator and as an
//! independent oracle against the generic jet pipeline built from `F²` alone.
//! Derivatives of `φ` are always obtained by running the jet engine on `φ` as
//! a univariate expression in `s`; no hand-differentiated `φ` formulas exist
//! anywhere in this module.

use crate::error::{Error, Result};
use crate::expr::{Expr, ScalarContext};
use crate::geometry::SprayJets;
use crate::jet::{Jet, JetConfig};
use crate::linalg::{self, Mat};
use crate::metric::{phi_series, x_names, AlphaBetaData, MetricSpec};
use crate::num::{real, real_usize, Real};
use crate::quadrature::gauss_legendre;
use crate::rng::Pcg32;
use crate::tensor::{JetTensor, TensorSample, Variance};

/// Grid spacing used by the regularity scan and the Randers-type fit.
const GRID_STEP: f64 = 1e-3;
/// A best fit of `φ` by `c1 sqrt(1 + c2 s²) + c3 s` within this deviation
/// counts as a Randers-type function.
const RANDERS_FIT_TOL: f64 = 1e-9;
/// Relative tolerance for treating `r_ij` and `s_i` as vanishing.
const KILLING_TOL: f64 = 1e-8;
/// Guard against division by a vanishing denominator in scalar fits.
const FIT_EPS: f64 = 1e-12;

/// Taylor coefficients of the `d`-th derivative of a function whose own
/// coefficients (derivative-over-factorial convention) are `coeffs`:
/// `c'_k = c_{k+d} (k+d)! / k!`.
fn shift_series<T: Real>(coeffs: &[T], d: usize) -> Vec<T> {
    (0..coeffs.len().saturating_sub(d))
        .map(|k| {
            let mut factor = T::one();
            for m in 1..=d {
                factor *= real_usize::<T>(k + m);
            }
            coeffs[k + d] * factor
        })
        .collect()
}

/// Point values of the scalar data attached to an `(α, β)` metric.
#[derive(Debug, Clone, Copy)]
pub struct AlphaBetaValues<T> {
    pub alpha: T,
    pub beta: T,
    /// `s = β/α`.
    pub s: T,
    /// `b² = a^{ij} b_i b_j`.
    pub b2: T,
    pub phi: T,
    pub phi1: T,
    pub phi2: T,
    pub phi3: T,
    /// `ρ = φ(φ − sφ′)`.
    pub rho: T,
    /// `ρ₀ = φφ″ + φ′φ′`.
    pub rho0: T,
    /// `ρ₁ = s(φφ″ + φ′φ′) − φφ′`.
    pub rho1: T,
    /// `Q = φ′ / (φ − sφ′)`.
    pub q: T,
    /// `Θ = (φφ′ − s(φφ″ + φ′φ′)) / (2φ[(φ − sφ′) + (b² − s²)φ″])`.
    pub theta: T,
    /// `Ψ = φ″ / (2[(φ − sφ′) + (b² − s²)φ″])`.
    pub psi: T,
}

/// The projective split of the spray of `F` over the spray of `α`:
/// `G^i = ᾱG^i + P y^i + Q^i`.
#[derive(Debug, Clone)]
pub struct GeodesicSplit<T: Real> {
    /// `P = α⁻¹ Θ [r_00 − 2 α Q s_0]`, degree-one homogeneous in `y`.
    pub p: Jet<T>,
    /// `Q^i = α Q s^i_0 + Ψ [r_00 − 2 α Q s_0] b^i`, degree-two homogeneous.
    pub q_up: Vec<Jet<T>>,
}

/// Residuals of the horizontal-derivative identities that hold when `β` has
/// `r_ij = 0` and `s_i = 0`. Each residual is the evaluated left side over
/// one plus the magnitude of its constituent terms.
#[derive(Debug, Clone, Copy)]
pub struct KillingIdentitySuite<T> {
    /// `s_{|0}` (equals `r_00 / α` in general).
    pub s_h0: T,
    /// `α_{|0}`.
    pub alpha_h0: T,
    /// `α_{.k|0} b^k`.
    pub alpha_y_b: T,
    /// `α s_{.j|0} b^j`.
    pub s_y_b: T,
    /// `α_{.j.k|0} b^j b^k`.
    pub alpha_yy_bb: T,
    /// `α_{.j.k.l|0} b^j b^k b^l`.
    pub alpha_yyy_bbb: T,
    /// `(αQ)_{.j.k|0} b^j b^k`.
    pub alpha_q_yy_bb: T,
    /// `(αQ)_{.j.k.l|0} b^j b^k b^l`.
    pub alpha_q_yyy_bbb: T,
}

impl<T: Real> KillingIdentitySuite<T> {
    /// Named residuals in a fixed report order.
    pub fn entries(&self) -> [(&'static str, T); 8] {
        [
            ("s|0", self.s_h0),
            ("alpha|0", self.alpha_h0),
            ("alpha.k|0 b^k", self.alpha_y_b),
            ("alpha s.j|0 b^j", self.s_y_b),
            ("alpha.j.k|0 b^j b^k", self.alpha_yy_bb),
            ("alpha.j.k.l|0 b^j b^k b^l", self.alpha_yyy_bbb),
            ("(alpha Q).j.k|0 b^j b^k", self.alpha_q_yy_bb),
            ("(alpha Q).j.k.l|0 b^j b^k b^l", self.alpha_q_yyy_bbb),
        ]
    }

    pub fn max_residual(&self) -> T {
        self.entries()
            .iter()
            .map(|(_, v)| v.abs())
            .fold(T::zero(), T::max)
    }
}

/// Deviations between jet differentiation of `αQ` and its closed-form
/// expansions in `α_{.j}`, `s_{.j}`, and the `s`-derivatives of `Q`.
#[derive(Debug, Clone, Copy)]
pub struct ExpansionResiduals<T> {
    /// `(αQ)_{.j} − [(Q − sQ′) α_{.j} + b_j Q′]`.
    pub first: T,
    /// `(αQ)_{.j.k} − [(Q − sQ′) α_{.j.k} + α Q″ s_{.j} s_{.k}]`.
    pub second: T,
    /// Third-order expansion with the `Q‴` term.
    pub third: T,
    /// `α s_{.j.l} + s α_{.j.l} + α_{.j} s_{.l} + α_{.l} s_{.j}`.
    pub s_hessian: T,
}

impl<T: Real> ExpansionResiduals<T> {
    pub fn max_residual(&self) -> T {
        self.first
            .abs()
            .max(self.second.abs())
            .max(self.third.abs())
            .max(self.s_hessian.abs())
    }
}

/// Result of fitting the scalar condition `u + λ F v = 0` with
/// `u = b^l s^m_{l|0|0} y_m` and `v = b^l s^m_{l|0} y_m`.
#[derive(Debug, Clone, Copy)]
pub struct WgdwCondition<T> {
    pub u: T,
    pub v: T,
    /// Fitted `λ` (zero when `v` vanishes).
    pub lambda: T,
    /// `|u + λ F v| / (|u| + |v| + ε)`.
    pub residual: T,
    /// True when both `u` and `v` vanish, so the condition holds emptily.
    pub vacuous: bool,
}

/// Fits `λ` in `u + λ F v = 0` at a single state point.
pub fn wgdw_fit<T: Real>(u: T, v: T, f: T) -> WgdwCondition<T> {
    let eps = real::<T>(FIT_EPS);
    let lambda = if v.abs() > eps { -u / (f * v) } else { T::zero() };
    let residual = (u + lambda * f * v).abs() / (u.abs() + v.abs() + eps);
    WgdwCondition {
        u,
        v,
        lambda,
        residual,
        vacuous: u.abs() <= eps && v.abs() <= eps,
    }
}

/// Jet-valued data of an `(α, β)` metric at one state point `(x, y)`.
///
/// All fields live in the full `2n`-variable jet space, so any of them can be
/// differentiated in `x` or `y` and fed to the horizontal-derivative
/// machinery of a surrounding spray.
pub struct AlphaBetaJets<T: Real> {
    config: JetConfig,
    dim: usize,
    x: Vec<T>,
    y: Vec<T>,
    phi_expr: Expr,
    y_jets: Vec<Jet<T>>,
    /// `a_ij(x)` lifted as jets.
    pub a: Vec<Vec<Jet<T>>>,
    /// `a^{ij}`.
    pub a_inv: Vec<Vec<Jet<T>>>,
    /// `b_i(x)`.
    pub b_low: Vec<Jet<T>>,
    /// `b^i = a^{ij} b_j`.
    pub b_up: Vec<Jet<T>>,
    /// `b² = b^i b_i`.
    pub b2: Jet<T>,
    /// `α² = a_ij y^i y^j`.
    pub alpha2: Jet<T>,
    pub alpha: Jet<T>,
    pub beta: Jet<T>,
    /// `s = β/α`.
    pub s: Jet<T>,
    /// Covariant derivative `b_{i;j}` with respect to the Levi-Civita
    /// connection of `a`.
    pub b_cov: Vec<Vec<Jet<T>>>,
    /// Symmetric part `r_ij = ½(b_{i;j} + b_{j;i})`.
    pub r_low: Vec<Vec<Jet<T>>>,
    /// Antisymmetric part `s_ij = ½(b_{i;j} − b_{j;i})`.
    pub s_low: Vec<Vec<Jet<T>>>,
    /// `s^i_j = a^{ir} s_rj`.
    pub s_mixed: Vec<Vec<Jet<T>>>,
    /// `r_j = b^i r_ij`.
    pub r_vec: Vec<Jet<T>>,
    /// `s_j = b^i s_ij`.
    pub s_vec: Vec<Jet<T>>,
    /// `r_00 = r_ij y^i y^j`.
    pub r00: Jet<T>,
    /// `r_0 = r_j y^j`.
    pub r0: Jet<T>,
    /// `s_0 = s_j y^j`.
    pub s0: Jet<T>,
    /// `s^i_0 = s^i_j y^j`.
    pub s_up0: Vec<Jet<T>>,
    /// `s_{i0} = s_ij y^j`.
    pub s_low0: Vec<Jet<T>>,
    /// `r_{i0} = r_ij y^j`.
    pub r_low0: Vec<Jet<T>>,
    /// `φ(s)`, `φ′(s)`, `φ″(s)`, `φ‴(s)` composed onto the `s` jet.
    pub phi: Jet<T>,
    pub phi1: Jet<T>,
    pub phi2: Jet<T>,
    pub phi3: Jet<T>,
    /// `Q = φ′/(φ − sφ′)`.
    pub q: Jet<T>,
    /// `Θ` of the geodesic split.
    pub theta: Jet<T>,
    /// `Ψ` of the geodesic split.
    pub psi: Jet<T>,
}

impl<T: Real> AlphaBetaJets<T> {
    pub fn new(metric: &MetricSpec, order: usize, x: &[T], y: &[T]) -> Result<Self> {
        let data = metric.kind.alpha_beta().ok_or_else(|| Error::NotAlphaBeta {
            op: "alpha_beta_jets".into(),
            kind: metric.kind.name().into(),
        })?;
        let dim = metric.dim;
        assert_eq!(x.len(), dim, "state point x has wrong dimension");
        assert_eq!(y.len(), dim, "state point y has wrong dimension");
        let config = JetConfig::get(2 * dim, order)?;
        Self::from_data(data, config, dim, x, y)
    }

    fn from_data(
        data: &AlphaBetaData,
        config: JetConfig,
        dim: usize,
        x: &[T],
        y: &[T],
    ) -> Result<Self> {
        let lift_cfg = config.clone();
        let xs: Vec<T> = x.to_vec();
        let x_ctx = crate::expr::JetContext::<T>::new(config.clone(), x_names(dim), move |name| {
            x_names(dim)
                .iter()
                .position(|n| n == name)
                .and_then(|v| Jet::variable(&lift_cfg, v, xs[v]).ok())
        });
        let y_jets: Vec<Jet<T>> = (0..dim)
            .map(|i| Jet::variable(&config, dim + i, y[i]))
            .collect::<Result<_>>()?;

        let a: Vec<Vec<Jet<T>>> = data
            .a
            .iter()
            .map(|row| row.iter().map(|e| e.eval(&x_ctx)).collect())
            .collect::<Result<_>>()?;
        let b_low: Vec<Jet<T>> =
            data.b.iter().map(|e| e.eval(&x_ctx)).collect::<Result<_>>()?;
        let a_inv = linalg::jet_mat_inverse(&a)?;

        let zero = || Jet::constant(&config, T::zero());
        let mut b_up = Vec::with_capacity(dim);
        for i in 0..dim {
            let mut acc = zero();
            for j in 0..dim {
                acc = acc.add(&a_inv[i][j].mul(&b_low[j])?)?;
            }
            b_up.push(acc);
        }
        let mut b2 = zero();
        for i in 0..dim {
            b2 = b2.add(&b_up[i].mul(&b_low[i])?)?;
        }

        let mut alpha2 = zero();
        for i in 0..dim {
            for j in 0..dim {
                alpha2 = alpha2.add(&a[i][j].mul(&y_jets[i])?.mul(&y_jets[j])?)?;
            }
        }
        let alpha = alpha2.sqrt()?;
        let mut beta = zero();
        for i in 0..dim {
            beta = beta.add(&b_low[i].mul(&y_jets[i])?)?;
        }
        let s = beta.div(&alpha)?;

        // Christoffel symbols of `a`: γ^i_jk = ½ a^{il}(∂_j a_lk + ∂_k a_lj − ∂_l a_jk).
        let half = real::<T>(0.5);
        let mut gamma = vec![vec![vec![zero(); dim]; dim]; dim];
        for j in 0..dim {
            for k in j..dim {
                for i in 0..dim {
                    let mut acc = zero();
                    for l in 0..dim {
                        let sum = a[l][k]
                            .partial(j)?
                            .add(&a[l][j].partial(k)?)?
                            .sub(&a[j][k].partial(l)?)?;
                        acc = acc.add(&a_inv[i][l].mul(&sum)?)?;
                    }
                    let value = acc.scale(half);
                    gamma[i][j][k] = value.clone();
                    gamma[i][k][j] = value;
                }
            }
        }

        // b_{i;j} = ∂_j b_i − b_r γ^r_ij.
        let mut b_cov = vec![vec![zero(); dim]; dim];
        for i in 0..dim {
            for j in 0..dim {
                let mut hook = zero();
                for r in 0..dim {
                    hook = hook.add(&b_low[r].mul(&gamma[r][i][j])?)?;
                }
                b_cov[i][j] = b_low[i].partial(j)?.sub(&hook)?;
            }
        }
        let mut r_low = vec![vec![zero(); dim]; dim];
        let mut s_low = vec![vec![zero(); dim]; dim];
        for i in 0..dim {
            for j in 0..dim {
                r_low[i][j] = b_cov[i][j].add(&b_cov[j][i])?.scale(half);
                s_low[i][j] = b_cov[i][j].sub(&b_cov[j][i])?.scale(half);
            }
        }
        let mut s_mixed = vec![vec![zero(); dim]; dim];
        for i in 0..dim {
            for j in 0..dim {
                let mut acc = zero();
                for r in 0..dim {
                    acc = acc.add(&a_inv[i][r].mul(&s_low[r][j])?)?;
                }
                s_mixed[i][j] = acc;
            }
        }
        let mut r_vec = vec![zero(); dim];
        let mut s_vec = vec![zero(); dim];
        for j in 0..dim {
            for i in 0..dim {
                r_vec[j] = r_vec[j].add(&b_up[i].mul(&r_low[i][j])?)?;
                s_vec[j] = s_vec[j].add(&b_up[i].mul(&s_low[i][j])?)?;
            }
        }

        let contract_y = |m: &Vec<Vec<Jet<T>>>| -> Result<Vec<Jet<T>>> {
            (0..dim)
                .map(|i| {
                    let mut acc = zero();
                    for j in 0..dim {
                        acc = acc.add(&m[i][j].mul(&y_jets[j])?)?;
                    }
                    Ok(acc)
                })
                .collect()
        };
        let r_low0 = contract_y(&r_low)?;
        let s_low0 = contract_y(&s_low)?;
        let s_up0 = contract_y(&s_mixed)?;
        let mut r00 = zero();
        let mut r0 = zero();
        let mut s0 = zero();
        for i in 0..dim {
            r00 = r00.add(&r_low0[i].mul(&y_jets[i])?)?;
            r0 = r0.add(&r_vec[i].mul(&y_jets[i])?)?;
            s0 = s0.add(&s_vec[i].mul(&y_jets[i])?)?;
        }

        // φ chain composed onto the s jet, all from one Taylor expansion.
        let series = phi_series::<T>(&data.phi, s.value(), s.valid_order() + 3)?;
        let phi = s.compose_series(&shift_series(&series, 0));
        let phi1 = s.compose_series(&shift_series(&series, 1));
        let phi2 = s.compose_series(&shift_series(&series, 2));
        let phi3 = s.compose_series(&shift_series(&series, 3));

        let phi_minus_s_phi1 = phi.sub(&s.mul(&phi1)?)?;
        let q = phi1.div(&phi_minus_s_phi1)?;
        let s2 = s.mul(&s)?;
        let denom = phi_minus_s_phi1.add(&b2.sub(&s2)?.mul(&phi2)?)?;
        let theta_num = phi.mul(&phi1)?.sub(
            &s.mul(&phi.mul(&phi2)?.add(&phi1.mul(&phi1)?)?)?,
        )?;
        let theta = theta_num.div(&phi.mul(&denom)?.scale(real::<T>(2.0)))?;
        let psi = phi2.scale(half).div(&denom)?;

        Ok(AlphaBetaJets {
            config,
            dim,
            x: x.to_vec(),
            y: y.to_vec(),
            phi_expr: data.phi.clone(),
            y_jets,
            a,
            a_inv,
            b_low,
            b_up,
            b2,
            alpha2,
            alpha,
            beta,
            s,
            b_cov,
            r_low,
            s_low,
            s_mixed,
            r_vec,
            s_vec,
            r00,
            r0,
            s0,
            s_up0,
            s_low0,
            r_low0,
            phi,
            phi1,
            phi2,
            phi3,
            q,
            theta,
            psi,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn config(&self) -> &JetConfig {
        &self.config
    }

    /// Scalar values of every derived quantity at the state point.
    pub fn values(&self) -> AlphaBetaValues<T> {
        let phi = self.phi.value();
        let phi1 = self.phi1.value();
        let phi2 = self.phi2.value();
        let s = self.s.value();
        let rho0 = phi * phi2 + phi1 * phi1;
        AlphaBetaValues {
            alpha: self.alpha.value(),
            beta: self.beta.value(),
            s,
            b2: self.b2.value(),
            phi,
            phi1,
            phi2,
            phi3: self.phi3.value(),
            rho: phi * (phi - s * phi1),
            rho0,
            rho1: s * rho0 - phi * phi1,
            q: self.q.value(),
            theta: self.theta.value(),
            psi: self.psi.value(),
        }
    }

    fn a_values(&self) -> Mat<T> {
        Mat::from_fn(self.dim, self.dim, |i, j| self.a[i][j].value())
    }

    /// Fundamental tensor by the closed formula
    /// `g_ij = ρ a_ij + ρ₀ b_i b_j − ρ₁(b_i α_{.j} + b_j α_{.i}) + s ρ₁ α_{.i} α_{.j}`.
    pub fn closed_fundamental_tensor(&self) -> TensorSample<T> {
        let v = self.values();
        let n = self.dim;
        let a_vals = self.a_values();
        let alpha_dy: Vec<T> = (0..n)
            .map(|i| (0..n).map(|j| a_vals[(i, j)] * self.y[j]).sum::<T>() / v.alpha)
            .collect();
        let b: Vec<T> = self.b_low.iter().map(Jet::value).collect();
        TensorSample::from_fn(n, 2, |idx| {
            let (i, j) = (idx[0], idx[1]);
            v.rho * a_vals[(i, j)] + v.rho0 * b[i] * b[j]
                - v.rho1 * (b[i] * alpha_dy[j] + b[j] * alpha_dy[i])
                + v.s * v.rho1 * alpha_dy[i] * alpha_dy[j]
        })
    }

    /// Determinant of the fundamental tensor by the closed formula
    /// `det g = φ^{n+1} (φ − sφ′)^{n−2} [(φ − sφ′) + (b² − s²)φ″] det a`.
    pub fn closed_det(&self) -> T {
        let v = self.values();
        let n = self.dim;
        let pmsp = v.phi - v.s * v.phi1;
        let bracket = pmsp + (v.b2 - v.s * v.s) * v.phi2;
        let det_a = linalg::det(&self.a_values());
        v.phi.powi(n as i32 + 1) * pmsp.powi(n as i32 - 2) * bracket * det_a
    }

    /// Spray data of the Riemannian norm `α`, produced by the same generic
    /// pipeline used for `F` (applied to `F² = α²`).
    pub fn alpha_spray(&self) -> Result<SprayJets<T>> {
        SprayJets::from_f2(
            self.config.clone(),
            self.dim,
            &self.x,
            &self.y,
            self.alpha2.clone(),
        )
    }

    /// Projective factor and tilt of the spray of `F` over the spray of `α`.
    pub fn geodesic_split(&self) -> Result<GeodesicSplit<T>> {
        let aq = self.alpha.mul(&self.q)?;
        let h = self.r00.sub(&aq.mul(&self.s0)?.scale(real::<T>(2.0)))?;
        let p = self.theta.mul(&h)?.div(&self.alpha)?;
        let psi_h = self.psi.mul(&h)?;
        let q_up = (0..self.dim)
            .map(|i| aq.mul(&self.s_up0[i])?.add(&psi_h.mul(&self.b_up[i])?))
            .collect::<Result<_>>()?;
        Ok(GeodesicSplit { p, q_up })
    }

    /// `ᾱG^i + P y^i + Q^i`, which must reproduce the spray of `F`.
    pub fn reconstructed_spray(&self) -> Result<Vec<Jet<T>>> {
        let base = self.alpha_spray()?;
        let split = self.geodesic_split()?;
        (0..self.dim)
            .map(|i| {
                base.spray
                    .get(&[i])
                    .add(&split.p.mul(&self.y_jets[i])?)?
                    .add(&split.q_up[i])
            })
            .collect()
    }

    /// Frobenius norms of `(r_ij, s_i, b_{i;j})` values, used by the
    /// hypothesis checks.
    pub fn covariant_norms(&self) -> (T, T, T) {
        let n = self.dim;
        let mut r_norm = T::zero();
        let mut cov_norm = T::zero();
        for i in 0..n {
            for j in 0..n {
                r_norm += self.r_low[i][j].value().powi(2);
                cov_norm += self.b_cov[i][j].value().powi(2);
            }
        }
        let s_norm = self
            .s_vec
            .iter()
            .map(|v| v.value().powi(2))
            .sum::<T>()
            .sqrt();
        (r_norm.sqrt(), s_norm, cov_norm.sqrt())
    }

    /// Errors unless `r_ij ≈ 0` and `s_i ≈ 0` at this point.
    pub fn require_killing(&self, op: &str) -> Result<()> {
        let (r_norm, s_norm, cov_norm) = self.covariant_norms();
        let tol = real::<T>(KILLING_TOL) * (T::one() + cov_norm);
        if r_norm > tol || s_norm > tol {
            return Err(Error::HypothesisViolated {
                op: op.into(),
                detail: format!(
                    "needs r_ij = 0 and s_i = 0, found |r| = {:.3e}, |s_i| = {:.3e}",
                    r_norm.to_f64().unwrap_or(f64::NAN),
                    s_norm.to_f64().unwrap_or(f64::NAN)
                ),
            });
        }
        Ok(())
    }

    /// Iterated fiber derivatives of a scalar jet as a covariant tensor.
    fn y_partial_tensor(&self, base: &Jet<T>, count: usize) -> Result<JetTensor<T>> {
        let n = self.dim;
        JetTensor::from_fn(n, &vec![Variance::Down; count], |idx| {
            let mut jet = base.clone();
            for &k in idx {
                jet = jet.partial(n + k)?;
            }
            Ok(jet)
        })
    }

    /// Contracts every slot of a sampled tensor with `b^i` values, returning
    /// the sum and the magnitude of its summands.
    fn contract_all_b(&self, sample: &TensorSample<T>) -> (T, T) {
        let n = self.dim;
        let rank = sample.rank();
        let b: Vec<T> = self.b_up.iter().map(Jet::value).collect();
        let mut idx = vec![0usize; rank];
        let mut sum = T::zero();
        let mut l1 = T::zero();
        loop {
            let mut term = sample.get(&idx);
            for &k in &idx {
                term *= b[k];
            }
            sum += term;
            l1 += term.abs();
            // Odometer walk over all index tuples.
            let mut slot = rank;
            loop {
                if slot == 0 {
                    return (sum, l1);
                }
                slot -= 1;
                idx[slot] += 1;
                if idx[slot] < n {
                    break;
                }
                idx[slot] = 0;
            }
        }
    }

    fn h0_contracted(
        &self,
        spray: &SprayJets<T>,
        base: &Jet<T>,
        partials: usize,
    ) -> Result<(T, T)> {
        let t = self.y_partial_tensor(base, partials)?;
        let h0 = spray.horizontal_zero(&t)?;
        Ok(self.contract_all_b(&h0.values()))
    }

    /// Evaluates the horizontal-derivative identities that characterize a
    /// unit-length Killing form, using the full connection of `F` carried by
    /// `spray`. Errors if the hypotheses `r_ij = 0`, `s_i = 0` fail.
    pub fn killing_suite(&self, spray: &SprayJets<T>) -> Result<KillingIdentitySuite<T>> {
        self.require_killing("killing_suite")?;
        let one = T::one();
        let scalar_res = |value: T, scale: T| value.abs() / (one + scale.abs());

        let s_h0 = spray
            .horizontal_zero(&JetTensor::scalar(self.s.clone(), self.dim))?
            .get(&[])
            .value();
        let alpha_h0 = spray
            .horizontal_zero(&JetTensor::scalar(self.alpha.clone(), self.dim))?
            .get(&[])
            .value();

        let (a1_sum, a1_l1) = self.h0_contracted(spray, &self.alpha, 1)?;
        let (s1_sum, s1_l1) = self.h0_contracted(spray, &self.s, 1)?;
        let (a2_sum, a2_l1) = self.h0_contracted(spray, &self.alpha, 2)?;
        let (a3_sum, a3_l1) = self.h0_contracted(spray, &self.alpha, 3)?;
        let aq = self.alpha.mul(&self.q)?;
        let (q2_sum, q2_l1) = self.h0_contracted(spray, &aq, 2)?;
        let (q3_sum, q3_l1) = self.h0_contracted(spray, &aq, 3)?;

        let alpha_v = self.alpha.value();
        Ok(KillingIdentitySuite {
            s_h0: scalar_res(s_h0, self.s.value()),
            alpha_h0: scalar_res(alpha_h0, alpha_v),
            alpha_y_b: scalar_res(a1_sum, a1_l1),
            s_y_b: scalar_res(alpha_v * s1_sum, alpha_v * s1_l1),
            alpha_yy_bb: scalar_res(a2_sum, a2_l1),
            alpha_yyy_bbb: scalar_res(a3_sum, a3_l1),
            alpha_q_yy_bb: scalar_res(q2_sum, q2_l1),
            alpha_q_yyy_bbb: scalar_res(q3_sum, q3_l1),
        })
    }

    /// Berwald curvature by the closed formula valid when `r_ij = 0` and
    /// `s_i = 0` (so that `G^i = ᾱG^i + αQ s^i_0`):
    /// `B_j{}^i{}_{kl} = (αQ)_{.j.k} s^i_l + (αQ)_{.j.l} s^i_k + (αQ)_{.l.k} s^i_j + (αQ)_{.j.k.l} s^i_0`.
    /// Index order `[i, j, k, l]`.
    pub fn killing_closed_berwald(&self) -> Result<TensorSample<T>> {
        self.require_killing("killing_closed_berwald")?;
        let n = self.dim;
        let aq = self.alpha.mul(&self.q)?;
        let d1: Vec<Jet<T>> = (0..n).map(|j| aq.partial(n + j)).collect::<Result<_>>()?;
        let mut d2v = vec![vec![T::zero(); n]; n];
        let mut d3v = vec![vec![vec![T::zero(); n]; n]; n];
        for j in 0..n {
            for k in 0..n {
                let d2 = d1[j].partial(n + k)?;
                d2v[j][k] = d2.value();
                for l in 0..n {
                    d3v[j][k][l] = d2.partial(n + l)?.value();
                }
            }
        }
        let sm: Vec<Vec<T>> = self
            .s_mixed
            .iter()
            .map(|row| row.iter().map(Jet::value).collect())
            .collect();
        let s0v: Vec<T> = self.s_up0.iter().map(Jet::value).collect();
        Ok(TensorSample::from_fn(n, 4, |idx| {
            let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
            d2v[j][k] * sm[i][l] + d2v[j][l] * sm[i][k] + d2v[l][k] * sm[i][j]
                + d3v[j][k][l] * s0v[i]
        }))
    }

    /// Derivatives `Q, Q′, Q″, Q‴` with respect to `s`, computed by running
    /// the jet engine on the univariate composition.
    pub fn q_derivatives(&self) -> Result<[T; 4]> {
        let cfg = JetConfig::get(2, 4)?;
        let s0 = self.s.value();
        let su = Jet::variable(&cfg, 0, s0)?;
        let series = phi_series::<T>(&self.phi_expr, s0, 6)?;
        let phi_u = su.compose_series(&shift_series(&series, 0));
        let phi1_u = su.compose_series(&shift_series(&series, 1));
        let q_u = phi1_u.div(&phi_u.sub(&su.mul(&phi1_u)?)?)?;
        let mut out = [T::zero(); 4];
        for (d, slot) in out.iter_mut().enumerate() {
            *slot = q_u.derivative(&[d as u8, 0])?;
        }
        Ok(out)
    }

    /// Compares jet differentiation of `αQ` against its closed expansions in
    /// `α_{.j}`, `s_{.j}` and the `s`-derivatives of `Q`. Holds for every
    /// `(α, β)` metric; each residual is a max-norm deviation over one plus
    /// the left side's magnitude.
    pub fn expansion_residuals(&self) -> Result<ExpansionResiduals<T>> {
        let n = self.dim;
        let [q0, q1, q2, q3] = self.q_derivatives()?;
        let s_v = self.s.value();
        let alpha_v = self.alpha.value();
        let b: Vec<T> = self.b_low.iter().map(Jet::value).collect();

        let a1: Vec<Jet<T>> = (0..n)
            .map(|j| self.alpha.partial(n + j))
            .collect::<Result<_>>()?;
        let s1: Vec<Jet<T>> = (0..n)
            .map(|j| self.s.partial(n + j))
            .collect::<Result<_>>()?;
        let aq = self.alpha.mul(&self.q)?;
        let aq1: Vec<Jet<T>> = (0..n).map(|j| aq.partial(n + j)).collect::<Result<_>>()?;

        let a1v: Vec<T> = a1.iter().map(Jet::value).collect();
        let s1v: Vec<T> = s1.iter().map(Jet::value).collect();
        let mut a2v = vec![vec![T::zero(); n]; n];
        let mut s2v = vec![vec![T::zero(); n]; n];
        let mut aq2v = vec![vec![T::zero(); n]; n];
        let mut a3v = vec![vec![vec![T::zero(); n]; n]; n];
        let mut aq3v = vec![vec![vec![T::zero(); n]; n]; n];
        for j in 0..n {
            for k in 0..n {
                let a2 = a1[j].partial(n + k)?;
                let aq2 = aq1[j].partial(n + k)?;
                a2v[j][k] = a2.value();
                s2v[j][k] = s1[j].partial(n + k)?.value();
                aq2v[j][k] = aq2.value();
                for l in 0..n {
                    a3v[j][k][l] = a2.partial(n + l)?.value();
                    aq3v[j][k][l] = aq2.partial(n + l)?.value();
                }
            }
        }

        let q_minus = q0 - s_v * q1;
        let one = T::one();
        let mut first = T::zero();
        let mut second = T::zero();
        let mut third = T::zero();
        let mut s_hess = T::zero();
        for j in 0..n {
            let rhs = q_minus * a1v[j] + b[j] * q1;
            first = first.max((aq1v_at(&aq1, j) - rhs).abs() / (one + aq1v_at(&aq1, j).abs()));
            for k in 0..n {
                let rhs = q_minus * a2v[j][k] + alpha_v * q2 * s1v[j] * s1v[k];
                second = second.max((aq2v[j][k] - rhs).abs() / (one + aq2v[j][k].abs()));
                let hess = alpha_v * s2v[j][k]
                    + s_v * a2v[j][k]
                    + a1v[j] * s1v[k]
                    + a1v[k] * s1v[j];
                s_hess = s_hess.max(hess.abs() / (one + (alpha_v * s2v[j][k]).abs()));
                for l in 0..n {
                    let sym_mixed = s1v[j] * a2v[k][l] + s1v[k] * a2v[j][l] + s1v[l] * a2v[k][j];
                    let sym_outer =
                        a1v[j] * s1v[k] * s1v[l] + a1v[k] * s1v[j] * s1v[l] + a1v[l] * s1v[k] * s1v[j];
                    let rhs = q_minus * a3v[j][k][l] - q2 * (s_v * sym_mixed + sym_outer)
                        + alpha_v * q3 * s1v[j] * s1v[k] * s1v[l];
                    third = third.max((aq3v[j][k][l] - rhs).abs() / (one + aq3v[j][k][l].abs()));
                }
            }
        }
        Ok(ExpansionResiduals {
            first,
            second,
            third,
            s_hessian: s_hess,
        })
    }

    /// Fits `λ` in `b^l (s^m_{l|0|0} + λ F s^m_{l|0}) y_m = 0`, with `|0`
    /// taken along the full connection of `F` carried by `spray` and
    /// `y_m = g_mr y^r`. Requires a non-Randers `φ`, a unit-length Killing
    /// form (`r_ij = 0`, `s_i = 0`), and a non-closed `β`; every violated
    /// hypothesis is reported.
    pub fn wgdw_condition(
        &self,
        spray: &SprayJets<T>,
        phi_grid_bound: f64,
    ) -> Result<WgdwCondition<T>> {
        let mut violations = Vec::new();
        let deviation = randers_type_deviation(&self.phi_expr, phi_grid_bound)?;
        if deviation < RANDERS_FIT_TOL {
            violations.push(format!(
                "phi is Randers-type (fit deviation {deviation:.3e})"
            ));
        }
        let (r_norm, s_norm, cov_norm) = self.covariant_norms();
        let tol = real::<T>(KILLING_TOL) * (T::one() + cov_norm);
        if r_norm > tol || s_norm > tol {
            violations.push(format!(
                "needs r_ij = 0 and s_i = 0, found |r| = {:.3e}, |s_i| = {:.3e}",
                r_norm.to_f64().unwrap_or(f64::NAN),
                s_norm.to_f64().unwrap_or(f64::NAN)
            ));
        }
        let s_low_norm = {
            let mut acc = T::zero();
            for row in &self.s_low {
                for jet in row {
                    acc += jet.value().powi(2);
                }
            }
            acc.sqrt()
        };
        if s_low_norm <= tol {
            violations.push("beta is closed (s_ij = 0), the condition is empty".into());
        }
        if !violations.is_empty() {
            return Err(Error::HypothesisViolated {
                op: "wgdw_condition".into(),
                detail: violations.join("; "),
            });
        }

        let n = self.dim;
        let s_tensor = JetTensor::from_fn(n, &[Variance::Up, Variance::Down], |idx| {
            Ok(self.s_mixed[idx[0]][idx[1]].clone())
        })?;
        let once = spray.horizontal_zero(&s_tensor)?;
        let twice = spray.horizontal_zero(&once)?;
        let once_v = once.values();
        let twice_v = twice.values();
        let y_low: Vec<T> = (0..n)
            .map(|m| {
                (0..n)
                    .map(|r| spray.g.get(&[m, r]).value() * self.y[r])
                    .sum::<T>()
            })
            .collect();
        let b: Vec<T> = self.b_up.iter().map(Jet::value).collect();
        let mut u = T::zero();
        let mut v = T::zero();
        for m in 0..n {
            for l in 0..n {
                u += twice_v.get(&[m, l]) * b[l] * y_low[m];
                v += once_v.get(&[m, l]) * b[l] * y_low[m];
            }
        }
        let f = spray.f()?.value();
        Ok(wgdw_fit(u, v, f))
    }
}

fn aq1v_at<T: Real>(aq1: &[Jet<T>], j: usize) -> T {
    aq1[j].value()
}

/// A point at which the positivity requirements of `F = α φ(β/α)` fail.
#[derive(Debug, Clone)]
pub struct RegularityViolation {
    pub s: f64,
    pub b: f64,
    pub phi: f64,
    /// Value of `φ − sφ′ + (b² − s²)φ″` at the witness (NaN when `φ` itself
    /// failed to evaluate).
    pub condition: f64,
    pub reason: String,
}

/// Outcome of scanning `φ(s) > 0` and `φ − sφ′ + (b² − s²)φ″ > 0` over the
/// triangle `|s| ≤ b ≤ b₀`.
#[derive(Debug, Clone)]
pub struct RegularityReport {
    pub pass: bool,
    /// First violating `(s, b)` in scan order (s ascending, then b).
    pub witness: Option<RegularityViolation>,
}

/// Scans the regularity conditions on a uniform grid of spacing about 1e-3.
/// `eval` must return `(φ, φ′, φ″)` at a given `s`; evaluation errors and
/// non-finite values count as violations and are reported as the witness.
pub fn regularity_check_fn(
    eval: &dyn Fn(f64) -> Result<(f64, f64, f64)>,
    b0: f64,
) -> RegularityReport {
    let steps = ((b0 / GRID_STEP).ceil() as i64).max(1);
    let step = b0 / steps as f64;
    for is in -steps..=steps {
        let s = is as f64 * step;
        let (phi, phi1, phi2) = match eval(s) {
            Ok(vals) => vals,
            Err(e) => {
                return RegularityReport {
                    pass: false,
                    witness: Some(RegularityViolation {
                        s,
                        b: s.abs(),
                        phi: f64::NAN,
                        condition: f64::NAN,
                        reason: format!("phi evaluation failed: {e}"),
                    }),
                }
            }
        };
        if !(phi.is_finite() && phi1.is_finite() && phi2.is_finite()) {
            return RegularityReport {
                pass: false,
                witness: Some(RegularityViolation {
                    s,
                    b: s.abs(),
                    phi,
                    condition: f64::NAN,
                    reason: "non-finite phi derivative data".into(),
                }),
            };
        }
        if phi <= 0.0 {
            return RegularityReport {
                pass: false,
                witness: Some(RegularityViolation {
                    s,
                    b: s.abs(),
                    phi,
                    condition: f64::NAN,
                    reason: "phi <= 0".into(),
                }),
            };
        }
        for ib in is.abs()..=steps {
            let b = ib as f64 * step;
            let condition = (phi - s * phi1) + (b * b - s * s) * phi2;
            if !condition.is_finite() || condition <= 0.0 {
                return RegularityReport {
                    pass: false,
                    witness: Some(RegularityViolation {
                        s,
                        b,
                        phi,
                        condition,
                        reason: "phi - s phi' + (b^2 - s^2) phi'' <= 0".into(),
                    }),
                };
            }
        }
    }
    RegularityReport { pass: true, witness: None }
}

/// Regularity scan for a `φ` given as an expression in `s`; the derivative
/// data at each grid point comes from the univariate jet expansion.
pub fn regularity_check_expr(phi: &Expr, b0: f64) -> RegularityReport {
    let eval = |s: f64| -> Result<(f64, f64, f64)> {
        let c = phi_series::<f64>(phi, s, 2)?;
        Ok((c[0], c[1], 2.0 * c[2]))
    };
    regularity_check_fn(&eval, b0)
}

/// `φ(s) = c · exp ∫₀ˢ g(t) dt` with
/// `g(t) = (k₁ t + k₂ sqrt(b² − t²)) / (1 + t (k₁ t + k₂ sqrt(b² − t²)))`.
/// The integral is evaluated by Gauss–Legendre quadrature. The derivative of
/// the square root blows up as `|s| → b`, which is exactly the singular
/// behaviour the regularity scan must detect.
pub fn singular_exponential_phi(
    k1: f64,
    k2: f64,
    b: f64,
    c: f64,
) -> impl Fn(f64) -> Result<(f64, f64, f64)> {
    let (nodes, weights) = gauss_legendre(64);
    let g = move |t: f64| -> Result<(f64, f64)> {
        let disc = b * b - t * t;
        if disc < 0.0 {
            return Err(Error::Domain { func: "sqrt", value: disc });
        }
        let root = disc.sqrt();
        let u = k1 * t + k2 * root;
        let du = k1 - k2 * t / root;
        let den = 1.0 + t * u;
        if den == 0.0 {
            return Err(Error::Domain { func: "recip", value: den });
        }
        let dden = u + t * du;
        Ok((u / den, (du * den - u * dden) / (den * den)))
    };
    move |s: f64| -> Result<(f64, f64, f64)> {
        let mut integral = 0.0;
        for (node, weight) in nodes.iter().zip(&weights) {
            let t = 0.5 * s * (node + 1.0);
            integral += weight * g(t)?.0 * 0.5 * s;
        }
        let (h, dh) = g(s)?;
        let phi = c * integral.exp();
        Ok((phi, phi * h, phi * (h * h + dh)))
    }
}

/// Maximum deviation of `φ` from its best fit by `c₁ sqrt(1 + c₂ s²) + c₃ s`
/// over a uniform grid on `[−bound, bound]`. The odd part determines `c₃`
/// linearly; the squared even part is fitted by `A + B s²` so that
/// `c₁ = sqrt(A)`, `c₂ = B/A`. Infinity when no admissible fit exists.
pub fn randers_type_deviation(phi: &Expr, bound: f64) -> Result<f64> {
    let steps = ((bound / GRID_STEP).ceil() as i64).max(8);
    let step = bound / steps as f64;
    let eval = |s: f64| -> Result<f64> {
        let ctx =
            ScalarContext::<f64>::new(vec!["s".into()], move |name| (name == "s").then_some(s));
        phi.eval(&ctx)
    };
    let m = steps as usize;
    let mut values = vec![0.0; 2 * m + 1];
    for (k, slot) in values.iter_mut().enumerate() {
        *slot = eval((k as f64 - m as f64) * step)?;
    }
    let even = |k: usize| 0.5 * (values[m + k] + values[m - k]);
    let odd = |k: usize| 0.5 * (values[m + k] - values[m - k]);

    let mut num = 0.0;
    let mut den = 0.0;
    for k in 1..=m {
        let s = k as f64 * step;
        num += odd(k) * s;
        den += s * s;
    }
    let c3 = if den > 0.0 { num / den } else { 0.0 };

    // Least squares of (even part)² against [1, s²].
    let (mut s0, mut s2, mut s4, mut z0, mut z2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..=m {
        let s_sq = (k as f64 * step).powi(2);
        let z = even(k).powi(2);
        s0 += 1.0;
        s2 += s_sq;
        s4 += s_sq * s_sq;
        z0 += z;
        z2 += z * s_sq;
    }
    let det = s0 * s4 - s2 * s2;
    if det.abs() < 1e-300 {
        return Ok(f64::INFINITY);
    }
    let a = (z0 * s4 - z2 * s2) / det;
    let b = (s0 * z2 - s2 * z0) / det;
    if a <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let c1 = a.sqrt();
    let c2 = b / a;

    let mut deviation: f64 = 0.0;
    for (k, value) in values.iter().enumerate() {
        let s = (k as f64 - m as f64) * step;
        let radicand = 1.0 + c2 * s * s;
        if radicand <= 0.0 {
            return Ok(f64::INFINITY);
        }
        deviation = deviation.max((value - (c1 * radicand.sqrt() + c3 * s)).abs());
    }
    Ok(deviation)
}

/// Whether `φ` is of Randers type `c₁ sqrt(1 + c₂ s²) + c₃ s` up to the fit
/// tolerance.
pub fn is_randers_type(phi: &Expr, bound: f64) -> Result<bool> {
    Ok(randers_type_deviation(phi, bound)? < RANDERS_FIT_TOL)
}

/// Default bound `b₀` for the `|s| ≤ b ≤ b₀` range: the maximum of
/// `‖β‖ = sqrt(a^{ij} b_i b_j)` over a random sample of the metric's region,
/// padded by five percent.
pub fn default_beta_bound(metric: &MetricSpec, samples: usize, seed: u64) -> Result<f64> {
    let data = metric.kind.alpha_beta().ok_or_else(|| Error::NotAlphaBeta {
        op: "default_beta_bound".into(),
        kind: metric.kind.name().into(),
    })?;
    let dim = metric.dim;
    let mut rng = Pcg32::new(seed);
    let names = x_names(dim);
    let mut max_b2 = 0.0f64;
    for _ in 0..samples {
        let x: Vec<f64> = rng.in_ball(&metric.region_center, metric.region_radius);
        let ctx = ScalarContext::<f64>::new(names.clone(), |name| {
            names.iter().position(|n| n == name).map(|i| x[i])
        });
        let a_vals = {
            let mut m = Mat::from_fn(dim, dim, |_, _| 0.0);
            for i in 0..dim {
                for j in 0..dim {
                    m[(i, j)] = data.a[i][j].eval(&ctx)?;
                }
            }
            m
        };
        let b_vals: Vec<f64> = data.b.iter().map(|e| e.eval(&ctx)).collect::<Result<_>>()?;
        let raised = linalg::cholesky_solve(&a_vals, &b_vals)?;
        let b2: f64 = raised.iter().zip(&b_vals).map(|(u, v)| u * v).sum();
        max_b2 = max_b2.max(b2);
    }
    Ok(1.05 * max_b2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_states, SprayJets};
    use crate::metric::MetricSpec;

    fn randers_n2() -> MetricSpec {
        MetricSpec::from_file_string(
            r#"
            [metric]
            name = "unit-test-randers"
            kind = "randers"
            dim = 2
            region_center = [0.0, 0.0]
            region_radius = 0.5

            [alpha]
            a_11 = "1 + x2^2"
            a_12 = "0.1 * x1 * x2"
            a_22 = "1 / (1 + x1^2)"

            [beta]
            b_1 = "0.2 * x2"
            b_2 = "0.1 + 0.05 * x1"
            "#,
        )
        .expect("valid metric file")
    }

    fn quadratic_phi_n2() -> MetricSpec {
        MetricSpec::from_file_string(
            r#"
            [metric]
            name = "unit-test-quadratic-phi"
            kind = "alpha_beta"
            dim = 2
            region_center = [0.0, 0.0]
            region_radius = 0.5

            [alpha]
            a_11 = "1 + x2^2"
            a_12 = "0.1 * x1 * x2"
            a_22 = "1 / (1 + x1^2)"

            [beta]
            b_1 = "0.2 * x2"
            b_2 = "0.1 + 0.05 * x1"

            [phi]
            phi = "1 + s + 0.25 * s^2"
            "#,
        )
        .expect("valid metric file")
    }

    fn flat_constant_form() -> MetricSpec {
        MetricSpec::from_file_string(
            r#"
            [metric]
            name = "unit-test-flat-constant"
            kind = "alpha_beta"
            dim = 2
            region_center = [0.0, 0.0]
            region_radius = 0.5

            [alpha]
            a_11 = "1"
            a_12 = "0"
            a_22 = "1"

            [beta]
            b_1 = "0.3"
            b_2 = "0"

            [phi]
            phi = "1 + s + 0.25 * s^2"
            "#,
        )
        .expect("valid metric file")
    }

    fn states(metric: &MetricSpec, count: usize) -> Vec<crate::geometry::StatePoint> {
        sample_states(metric, count, 0x5eed).expect("sampling succeeds")
    }

    #[test]
    fn closed_fundamental_tensor_matches_jets() {
        for metric in [randers_n2(), quadratic_phi_n2()] {
            for state in states(&metric, 4) {
                let ab = AlphaBetaJets::<f64>::new(&metric, 3, &state.x, &state.y).unwrap();
                let spray =
                    SprayJets::<f64>::from_metric(&metric, 3, &state.x, &state.y).unwrap();
                let closed = ab.closed_fundamental_tensor();
                let generic = spray.g.values();
                let diff = closed.sub(&generic).max_abs();
                assert!(diff < 1e-10, "{}: g mismatch {diff:.3e}", metric.name);

                let det_closed = ab.closed_det();
                let mut g_mat = Mat::from_fn(2, 2, |i, j| generic.get(&[i, j]));
                let det_direct = linalg::det(&mut g_mat);
                assert!(
                    (det_closed - det_direct).abs() < 1e-10,
                    "{}: det mismatch {det_closed} vs {det_direct}",
                    metric.name
                );
            }
        }
    }

    #[test]
    fn riemannian_phi_reduces_to_alpha() {
        let metric = MetricSpec::from_file_string(
            r#"
            [metric]
            name = "unit-test-riemannian-phi"
            kind = "alpha_beta"
            dim = 2
            region_center = [0.0, 0.0]
            region_radius = 0.5

            [alpha]
            a_11 = "1 + x2^2"
            a_12 = "0"
            a_22 = "1"

            [beta]
            b_1 = "0"
            b_2 = "0"

            [phi]
            phi = "1"
            "#,
        )
        .unwrap();
        let x = [0.1, -0.2];
        let y = [0.7, 0.4];
        let ab = AlphaBetaJets::<f64>::new(&metric, 2, &x, &y).unwrap();
        let g = ab.closed_fundamental_tensor();
        for i in 0..2 {
            for j in 0..2 {
                let expected = ab.a[i][j].value();
                assert!((g.get(&[i, j]) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn geodesic_split_reconstructs_generic_spray() {
        for metric in [randers_n2(), quadratic_phi_n2()] {
            for state in states(&metric, 3) {
                let ab = AlphaBetaJets::<f64>::new(&metric, 3, &state.x, &state.y).unwrap();
                let spray =
                    SprayJets::<f64>::from_metric(&metric, 3, &state.x, &state.y).unwrap();
                let rebuilt = ab.reconstructed_spray().unwrap();
                for i in 0..metric.dim {
                    let diff = (rebuilt[i].value() - spray.spray.get(&[i]).value()).abs();
                    assert!(diff < 1e-9, "{}: spray [{i}] off by {diff:.3e}", metric.name);
                }
            }
        }
    }

    #[test]
    fn split_terms_are_homogeneous() {
        let metric = quadratic_phi_n2();
        let state = &states(&metric, 1)[0];
        let lambda = 1.7;
        let scaled: Vec<f64> = state.y.iter().map(|v| v * lambda).collect();
        let base = AlphaBetaJets::<f64>::new(&metric, 3, &state.x, &state.y).unwrap();
        let rescaled = AlphaBetaJets::<f64>::new(&metric, 3, &state.x, &scaled).unwrap();
        let split0 = base.geodesic_split().unwrap();
        let split1 = rescaled.geodesic_split().unwrap();
        let p_dev = (split1.p.value() - lambda * split0.p.value()).abs();
        assert!(p_dev < 1e-9, "P not degree-1 homogeneous: {p_dev:.3e}");
        for i in 0..metric.dim {
            let q_dev = (split1.q_up[i].value() - lambda * lambda * split0.q_up[i].value()).abs();
            assert!(q_dev < 1e-9, "Q^{i} not degree-2 homogeneous: {q_dev:.3e}");
        }
    }

    #[test]
    fn covariant_data_on_hand_example() {
        // Flat a, b = (x2, 0): b_{1;2} = 1 and all other entries vanish.
        let metric = MetricSpec::from_file_string(
            r#"
            [metric]
            name = "unit-test-shear-form"
            kind = "randers"
            dim = 2
            region_center = [0.0, 0.0]
            region_radius = 0.5

            [alpha]
            a_11 = "1"
            a_12 = "0"
            a_22 = "1"

            [beta]
            b_1 = "0.5 * x2"
            b_2 = "0"
            "#,
        )
        .unwrap();
        let x = [0.2, 0.1];
        let y = [0.8, 0.3];
        let ab = AlphaBetaJets::<f64>::new(&metric, 3, &x, &y).unwrap();
        assert!((ab.b_cov[0][1].value() - 0.5).abs() < 1e-14);
        assert!(ab.b_cov[1][0].value().abs() < 1e-14);
        assert!((ab.r_low[0][1].value() - 0.25).abs() < 1e-14);
        assert!((ab.s_low[0][1].value() - 0.25).abs() < 1e-14);
        assert!((ab.s_low[1][0].value() + 0.25).abs() < 1e-14);
        // s_ij antisymmetric, r_ij symmetric; s_j = b^i s_ij.
        for i in 0..2 {
            assert!(ab.s_low[i][i].value().abs() < 1e-14);
            for j in 0..2 {
                let sym = (ab.r_low[i][j].value() - ab.r_low[j][i].value()).abs();
                assert!(sym < 1e-14);
            }
        }
        let s1_expected = ab.b_up[0].value() * ab.s_low[0][1].value();
        assert!((ab.s_vec[1].value() - s1_expected).abs() < 1e-14);
    }

    #[test]
    fn cauchy_schwarz_bound_on_s() {
        let metric = randers_n2();
        for state in states(&metric, 8) {
            let ab = AlphaBetaJets::<f64>::new(&metric, 2, &state.x, &state.y).unwrap();
            let v = ab.values();
            assert!(v.s * v.s <= v.b2 + 1e-12, "s^2 = {} > b^2 = {}", v.s * v.s, v.b2);
            assert!(v.alpha > 0.0);
        }
    }

    #[test]
    fn expansions_match_jet_differentiation() {
        for metric in [randers_n2(), quadratic_phi_n2()] {
            for state in states(&metric, 3) {
                let ab = AlphaBetaJets::<f64>::new(&metric, 4, &state.x, &state.y).unwrap();
                let res = ab.expansion_residuals().unwrap();
                assert!(res.first < 1e-10, "{}: first {:.3e}", metric.name, res.first);
                assert!(res.second < 1e-10, "{}: second {:.3e}", metric.name, res.second);
                assert!(res.third < 1e-10, "{}: third {:.3e}", metric.name, res.third);
                assert!(
                    res.s_hessian < 1e-10,
                    "{}: s hessian {:.3e}",
                    metric.name,
                    res.s_hessian
                );
            }
        }
    }

    #[test]
    fn killing_suite_trivial_on_constant_form() {
        let metric = flat_constant_form();
        let state = &states(&metric, 1)[0];
        let ab = AlphaBetaJets::<f64>::new(&metric, 6, &state.x, &state.y).unwrap();
        let spray = SprayJets::<f64>::from_metric(&metric, 6, &state.x, &state.y).unwrap();
        let suite = ab.killing_suite(&spray).unwrap();
        assert!(
            suite.max_residual() < 1e-12,
            "constant form should satisfy every identity, max {:.3e}",
            suite.max_residual()
        );
        let closed = ab.killing_closed_berwald().unwrap();
        assert!(closed.max_abs() < 1e-12);
    }

    #[test]
    fn killing_suite_rejects_non_killing_form() {
        let metric = randers_n2();
        let state = &states(&metric, 1)[0];
        let ab = AlphaBetaJets::<f64>::new(&metric, 6, &state.x, &state.y).unwrap();
        let spray = SprayJets::<f64>::from_metric(&metric, 6, &state.x, &state.y).unwrap();
        match ab.killing_suite(&spray) {
            Err(Error::HypothesisViolated { op, detail }) => {
                assert_eq!(op, "killing_suite");
                assert!(detail.contains("|r|"), "detail should report norms: {detail}");
            }
            other => panic!("expected hypothesis violation, got {other:?}"),
        }
    }

    #[test]
    fn wgdw_rejects_randers_phi_and_closed_beta() {
        let metric = randers_n2();
        let state = &states(&metric, 1)[0];
        let ab = AlphaBetaJets::<f64>::new(&metric, 6, &state.x, &state.y).unwrap();
        let spray = SprayJets::<f64>::from_metric(&metric, 6, &state.x, &state.y).unwrap();
        match ab.wgdw_condition(&spray, 0.3) {
            Err(Error::HypothesisViolated { detail, .. }) => {
                assert!(detail.contains("Randers-type"), "{detail}");
                assert!(detail.contains("r_ij"), "{detail}");
            }
            other => panic!("expected hypothesis violation, got {other:?}"),
        }

        let flat = flat_constant_form();
        let state = &states(&flat, 1)[0];
        let ab = AlphaBetaJets::<f64>::new(&flat, 6, &state.x, &state.y).unwrap();
        let spray = SprayJets::<f64>::from_metric(&flat, 6, &state.x, &state.y).unwrap();
        match ab.wgdw_condition(&spray, 0.3) {
            Err(Error::HypothesisViolated { detail, .. }) => {
                assert!(detail.contains("closed"), "{detail}");
            }
            other => panic!("expected hypothesis violation, got {other:?}"),
        }
    }

    #[test]
    fn wgdw_fit_branches() {
        let fit = wgdw_fit(0.0f64, 0.0, 1.0);
        assert!(fit.vacuous);
        assert_eq!(fit.lambda, 0.0);
        assert!(fit.residual < 1e-9);

        let fit = wgdw_fit(0.3f64, 0.2, 2.0);
        assert!(!fit.vacuous);
        assert!((fit.lambda - (-0.3 / (2.0 * 0.2))).abs() < 1e-14);
        assert!(fit.residual < 1e-12);

        let fit = wgdw_fit(0.3f64, 0.0, 2.0);
        assert!(!fit.vacuous);
        assert_eq!(fit.lambda, 0.0);
        assert!(fit.residual > 0.9, "unsatisfiable fit should score ~1");
    }

    #[test]
    fn regularity_grid_examples() {
        let linear = crate::expr::Expr::parse("1 + s").unwrap();
        assert!(regularity_check_expr(&linear, 0.9).pass);

        let quadratic = crate::expr::Expr::parse("1 + s^2").unwrap();
        // φ − sφ′ + (b²−s²)φ″ = 1 − 3s² + 2b² ≥ 1 − b² > 0 on |s| ≤ b ≤ 0.5.
        assert!(regularity_check_expr(&quadratic, 0.5).pass);

        let negative = crate::expr::Expr::parse("s - 1").unwrap();
        let report = regularity_check_expr(&negative, 0.5);
        assert!(!report.pass);
        let witness = report.witness.expect("violation needs a witness");
        assert!(witness.reason.contains("phi <= 0"), "{}", witness.reason);
    }

    #[test]
    fn singular_exponential_family_fails_regularity() {
        let eval = singular_exponential_phi(1.0, 1.0, 0.8, 1.0);
        // The function itself is positive near s = 0.
        let (phi, _, _) = eval(0.0).unwrap();
        assert!((phi - 1.0).abs() < 1e-12);
        let report = regularity_check_fn(&eval, 0.8);
        assert!(!report.pass, "singular family must fail the scan");
        let witness = report.witness.expect("witness required");
        assert!(witness.b <= 0.8 + 1e-12 && witness.s.abs() <= 0.8 + 1e-12);
    }

    #[test]
    fn randers_detection_accepts_and_rejects() {
        let linear = crate::expr::Expr::parse("1 + s").unwrap();
        assert!(is_randers_type(&linear, 0.8).unwrap());

        let exact = crate::expr::Expr::parse("2 * sqrt(1 + 0.5 * s^2) + 0.3 * s").unwrap();
        assert!(is_randers_type(&exact, 0.8).unwrap());

        let quadratic = crate::expr::Expr::parse("1 + s + 0.25 * s^2").unwrap();
        assert!(!is_randers_type(&quadratic, 0.8).unwrap());
    }

    #[test]
    fn beta_bound_on_constant_form() {
        // Flat a with constant b = (0.3, 0) has ‖β‖ = 0.3 everywhere.
        let metric = flat_constant_form();
        let bound = default_beta_bound(&metric, 200, 7).unwrap();
        assert!((bound - 0.315).abs() < 1e-12, "bound = {bound}");
        assert!(matches!(
            default_beta_bound(
                &MetricSpec::from_file_string(
                    r#"
                    [metric]
                    name = "unit-test-general"
                    kind = "general"
                    dim = 2
                    region_center = [0.0, 0.0]
                    region_radius = 0.5

                    [general]
                    f2 = "y1^2 + y2^2"
                    "#,
                )
                .unwrap(),
                10,
                7
            ),
            Err(Error::NotAlphaBeta { .. })
        ));
    }
}
