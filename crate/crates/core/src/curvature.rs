//! Curvature tensors of a spray: Riemann, Berwald, mean Berwald, Douglas,
//! the horizontally differentiated "tilde" tensors, the projective Weyl
//! chain, and the `theta` tensor tying the two families together.
//!
//! All tensors are computed from jets of the spray coefficients, cached on
//! first use, and exposed both as jets (for further differentiation) and as
//! plain component arrays. Index conventions: the single upper slot always
//! comes first, lower slots follow in formula order, and derivative or
//! covariant-derivative slots append last.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::SprayJets;
use crate::jet::Jet;
use crate::num::{real, real_usize, Real};
use crate::tensor::{JetTensor, TensorSample, Variance};

const UP: Variance = Variance::Up;
const DOWN: Variance = Variance::Down;

/// The curvature tensors this library can compute, with the minimum jet
/// truncation order each needs for its value to be meaningful.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum TensorKind {
    Fundamental,
    FundamentalInverse,
    Angular,
    Spray,
    NonlinearConnection,
    BerwaldConnection,
    Riemann,
    RiemannThree,
    RiemannFull,
    Berwald,
    MeanBerwald,
    HCurvature,
    Douglas,
    DouglasTilde,
    DouglasTildeZero,
    StretchDouglas,
    Weyl,
    WeaklyWeyl,
    WeylTilde,
    WeylTildeZero,
    Theta,
    BerwaldTilde,
}

impl TensorKind {
    pub const ALL: [TensorKind; 22] = [
        TensorKind::Fundamental,
        TensorKind::FundamentalInverse,
        TensorKind::Angular,
        TensorKind::Spray,
        TensorKind::NonlinearConnection,
        TensorKind::BerwaldConnection,
        TensorKind::Riemann,
        TensorKind::RiemannThree,
        TensorKind::RiemannFull,
        TensorKind::Berwald,
        TensorKind::MeanBerwald,
        TensorKind::HCurvature,
        TensorKind::Douglas,
        TensorKind::DouglasTilde,
        TensorKind::DouglasTildeZero,
        TensorKind::StretchDouglas,
        TensorKind::Weyl,
        TensorKind::WeaklyWeyl,
        TensorKind::WeylTilde,
        TensorKind::WeylTildeZero,
        TensorKind::Theta,
        TensorKind::BerwaldTilde,
    ];

    /// Command line / report name.
    pub fn name(&self) -> &'static str {
        match self {
            TensorKind::Fundamental => "g",
            TensorKind::FundamentalInverse => "g_inv",
            TensorKind::Angular => "h",
            TensorKind::Spray => "spray",
            TensorKind::NonlinearConnection => "nonlinear",
            TensorKind::BerwaldConnection => "gamma",
            TensorKind::Riemann => "riemann",
            TensorKind::RiemannThree => "riemann3",
            TensorKind::RiemannFull => "riemann4",
            TensorKind::Berwald => "berwald",
            TensorKind::MeanBerwald => "mean_berwald",
            TensorKind::HCurvature => "h_curv",
            TensorKind::Douglas => "douglas",
            TensorKind::DouglasTilde => "dtilde",
            TensorKind::DouglasTildeZero => "dtilde0",
            TensorKind::StretchDouglas => "stretch_douglas",
            TensorKind::Weyl => "weyl",
            TensorKind::WeaklyWeyl => "weakly_weyl",
            TensorKind::WeylTilde => "wtilde",
            TensorKind::WeylTildeZero => "wtilde0",
            TensorKind::Theta => "theta",
            TensorKind::BerwaldTilde => "btilde",
        }
    }

    pub fn from_name(name: &str) -> Result<TensorKind> {
        TensorKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::UnknownTensor(name.to_string()))
    }

    /// Smallest jet order for which the tensor's components at the point are
    /// fully determined (deeper orders unlock further differentiation).
    ///
    /// Spray construction always materialises the nonlinear connection, so
    /// order 3 is the floor even for the fundamental tensor.
    pub fn min_order(&self) -> usize {
        match self {
            TensorKind::Fundamental
            | TensorKind::FundamentalInverse
            | TensorKind::Angular
            | TensorKind::Spray
            | TensorKind::NonlinearConnection => 3,
            TensorKind::BerwaldConnection | TensorKind::Riemann => 4,
            TensorKind::RiemannThree | TensorKind::Berwald | TensorKind::MeanBerwald => 5,
            TensorKind::Weyl => 5,
            TensorKind::RiemannFull
            | TensorKind::HCurvature
            | TensorKind::Douglas
            | TensorKind::BerwaldTilde => 6,
            TensorKind::DouglasTilde | TensorKind::WeaklyWeyl | TensorKind::Theta => 7,
            TensorKind::DouglasTildeZero | TensorKind::StretchDouglas | TensorKind::WeylTilde => 8,
            TensorKind::WeylTildeZero => 9,
        }
    }
}

/// Lazily computed curvature tensors of one spray at one state.
pub struct CurvatureBundle<'a, T: Real> {
    spray: &'a SprayJets<T>,
    riemann: OnceLock<JetTensor<T>>,
    ricci: OnceLock<Jet<T>>,
    riemann_three: OnceLock<JetTensor<T>>,
    riemann_full: OnceLock<JetTensor<T>>,
    berwald: OnceLock<JetTensor<T>>,
    mean_berwald: OnceLock<JetTensor<T>>,
    h_curvature: OnceLock<JetTensor<T>>,
    douglas: OnceLock<JetTensor<T>>,
    douglas_tilde: OnceLock<JetTensor<T>>,
    douglas_tilde_zero: OnceLock<JetTensor<T>>,
    stretch_douglas: OnceLock<JetTensor<T>>,
    douglas_deriv_skew: OnceLock<JetTensor<T>>,
    weyl: OnceLock<JetTensor<T>>,
    weakly_weyl: OnceLock<JetTensor<T>>,
    weyl_tilde: OnceLock<JetTensor<T>>,
    weyl_tilde_zero: OnceLock<JetTensor<T>>,
    theta: OnceLock<JetTensor<T>>,
    berwald_tilde: OnceLock<JetTensor<T>>,
    angular: OnceLock<JetTensor<T>>,
}

fn cached<'s, T: Real>(
    slot: &'s OnceLock<JetTensor<T>>,
    compute: impl FnOnce() -> Result<JetTensor<T>>,
) -> Result<&'s JetTensor<T>> {
    if let Some(t) = slot.get() {
        return Ok(t);
    }
    let value = compute()?;
    let _ = slot.set(value);
    Ok(slot.get().expect("slot was just filled"))
}

impl<'a, T: Real> CurvatureBundle<'a, T> {
    pub fn new(spray: &'a SprayJets<T>) -> CurvatureBundle<'a, T> {
        CurvatureBundle {
            spray,
            riemann: OnceLock::new(),
            ricci: OnceLock::new(),
            riemann_three: OnceLock::new(),
            riemann_full: OnceLock::new(),
            berwald: OnceLock::new(),
            mean_berwald: OnceLock::new(),
            h_curvature: OnceLock::new(),
            douglas: OnceLock::new(),
            douglas_tilde: OnceLock::new(),
            douglas_tilde_zero: OnceLock::new(),
            stretch_douglas: OnceLock::new(),
            douglas_deriv_skew: OnceLock::new(),
            weyl: OnceLock::new(),
            weakly_weyl: OnceLock::new(),
            weyl_tilde: OnceLock::new(),
            weyl_tilde_zero: OnceLock::new(),
            theta: OnceLock::new(),
            berwald_tilde: OnceLock::new(),
            angular: OnceLock::new(),
        }
    }

    pub fn spray(&self) -> &SprayJets<T> {
        self.spray
    }

    fn dim(&self) -> usize {
        self.spray.dim()
    }

    /// `R^i_k = 2 d_x^k G^i - y^m d^2 G^i/dx^m dy^k + 2 G^m d^2 G^i/dy^m dy^k
    ///  - dG^i/dy^m dG^m/dy^k`.
    pub fn riemann(&self) -> Result<&JetTensor<T>> {
        cached(&self.riemann, || {
            let n = self.dim();
            let g = &self.spray.spray;
            let two = real::<T>(2.0);
            JetTensor::from_fn(n, &[UP, DOWN], |idx| {
                let (i, k) = (idx[0], idx[1]);
                let gi = g.get(&[i]);
                let mut acc = gi.partial(k)?.scale(two);
                for m in 0..n {
                    let mixed = gi.partial(m)?.partial(n + k)?;
                    acc = acc.sub(&mixed.mul(&self.spray.y_jets()[m])?)?;
                    let second = gi.partial(n + m)?.partial(n + k)?;
                    acc = acc.add(&second.mul(g.get(&[m]))?.scale(two))?;
                    let cross = gi.partial(n + m)?.mul(&g.get(&[m]).partial(n + k)?)?;
                    acc = acc.sub(&cross)?;
                }
                Ok(acc)
            })
        })
    }

    /// `Ric = R^m_m`.
    pub fn ricci(&self) -> Result<&Jet<T>> {
        if let Some(r) = self.ricci.get() {
            return Ok(r);
        }
        let r = self.riemann()?;
        let mut acc = Jet::constant(self.spray.config(), T::zero());
        for m in 0..self.dim() {
            acc = acc.add(r.get(&[m, m]))?;
        }
        let _ = self.ricci.set(acc);
        Ok(self.ricci.get().expect("slot was just filled"))
    }

    /// `R^i_{kl} = (R^i_{k.l} - R^i_{l.k}) / 3`.
    pub fn riemann_three(&self) -> Result<&JetTensor<T>> {
        cached(&self.riemann_three, || {
            let d = self.riemann()?.partial_y()?; // [i, k, l]
            let swapped = d.permute(&[0, 2, 1]);
            Ok(d.sub(&swapped)?.scale(real::<T>(1.0 / 3.0)))
        })
    }

    /// `R_j{}^i{}_{kl} = R^i_{kl.j}`, stored as `[i, j, k, l]`.
    pub fn riemann_full(&self) -> Result<&JetTensor<T>> {
        cached(&self.riemann_full, || {
            let d = self.riemann_three()?.partial_y()?; // [i, k, l, j]
            Ok(d.permute(&[0, 3, 1, 2]))
        })
    }

    /// `B_j{}^i{}_{kl} = d^3 G^i / dy^j dy^k dy^l`, stored as `[i, j, k, l]`.
    pub fn berwald(&self) -> Result<&JetTensor<T>> {
        cached(&self.berwald, || {
            self.spray.spray.partial_y()?.partial_y()?.partial_y()
        })
    }

    /// `E_{jk} = B_j{}^m{}_{km} / 2`.
    pub fn mean_berwald(&self) -> Result<&JetTensor<T>> {
        cached(&self.mean_berwald, || {
            let b = self.berwald()?;
            Ok(b.trace(0, 3)?.scale(real::<T>(0.5)))
        })
    }

    /// `H_{jk} = E_{jk|0}`.
    pub fn h_curvature(&self) -> Result<&JetTensor<T>> {
        cached(&self.h_curvature, || {
            self.spray.horizontal_zero(self.mean_berwald()?)
        })
    }

    /// Douglas tensor, defining route:
    /// `D = B - (1/(n+1)) d^3 (dG^m/dy^m * y^i) / dy^j dy^k dy^l`.
    pub fn douglas(&self) -> Result<&JetTensor<T>> {
        cached(&self.douglas, || {
            let n = self.dim();
            let mut div = Jet::constant(self.spray.config(), T::zero());
            for m in 0..n {
                div = div.add(&self.spray.spray.get(&[m]).partial(n + m)?)?;
            }
            let vector = JetTensor::from_fn(n, &[UP], |idx| {
                div.mul(&self.spray.y_jets()[idx[0]])
            })?;
            let correction = vector.partial_y()?.partial_y()?.partial_y()?;
            let b = self.berwald()?;
            b.sub(&correction.scale(real::<T>(1.0 / real_usize::<f64>(n + 1))))
        })
    }

    /// Douglas tensor through the mean Berwald curvature:
    /// `D = B - (2/(n+1)) { E_{jk} d^i_l + E_{jl} d^i_k + E_{kl} d^i_j
    ///  + E_{jk.l} y^i }`. Independent of [`Self::douglas`]; used to
    /// cross-check the two published forms against each other.
    pub fn douglas_from_mean_berwald(&self) -> Result<JetTensor<T>> {
        let n = self.dim();
        let e = self.mean_berwald()?;
        let ed = e.partial_y()?; // [j, k, l]
        let b = self.berwald()?;
        let factor = real::<T>(2.0 / real_usize::<f64>(n + 1));
        JetTensor::from_fn(n, &[UP, DOWN, DOWN, DOWN], |idx| {
            let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
            let mut acc = Jet::constant(self.spray.config(), T::zero());
            if i == l {
                acc = acc.add(e.get(&[j, k]))?;
            }
            if i == k {
                acc = acc.add(e.get(&[j, l]))?;
            }
            if i == j {
                acc = acc.add(e.get(&[k, l]))?;
            }
            acc = acc.add(&ed.get(&[j, k, l]).mul(&self.spray.y_jets()[i])?)?;
            b.get(&[i, j, k, l]).sub(&acc.scale(factor))
        })
    }

    /// `D~_j{}^i{}_{kl} = D_j{}^i{}_{kl|0}`.
    pub fn douglas_tilde(&self) -> Result<&JetTensor<T>> {
        cached(&self.douglas_tilde, || {
            self.spray.horizontal_zero(self.douglas()?)
        })
    }

    /// `D~_j{}^i{}_{kl|0}`.
    pub fn douglas_tilde_zero(&self) -> Result<&JetTensor<T>> {
        cached(&self.douglas_tilde_zero, || {
            self.spray.horizontal_zero(self.douglas_tilde()?)
        })
    }

    /// Stretch Douglas tensor
    /// `2 (D~_j{}^i{}_{kl|m} - D~_j{}^i{}_{km|l})`, stored `[i, j, k, l, m]`.
    pub fn stretch_douglas(&self) -> Result<&JetTensor<T>> {
        cached(&self.stretch_douglas, || {
            let hd = self.spray.horizontal_deriv(self.douglas_tilde()?)?;
            let swapped = hd.permute(&[0, 1, 2, 4, 3]);
            Ok(hd.sub(&swapped)?.scale(real::<T>(2.0)))
        })
    }

    /// `D_j{}^i{}_{kl|m} - D_j{}^i{}_{km|l}`, the reference side of the
    /// isotropic stretch Douglas condition. Stored `[i, j, k, l, m]`.
    pub fn douglas_deriv_skew(&self) -> Result<&JetTensor<T>> {
        cached(&self.douglas_deriv_skew, || {
            let hd = self.spray.horizontal_deriv(self.douglas()?)?;
            let swapped = hd.permute(&[0, 1, 2, 4, 3]);
            hd.sub(&swapped)
        })
    }

    /// Projective Weyl curvature `W^i_k = A^i_k - (1/(n+1)) A^m_{k.m} y^i`
    /// with `A^i_k = R^i_k - (Ric/(n-1)) d^i_k`.
    pub fn weyl(&self) -> Result<&JetTensor<T>> {
        cached(&self.weyl, || {
            let n = self.dim();
            let r = self.riemann()?;
            let ric = self.ricci()?;
            let mean = ric.scale(real::<T>(1.0 / real_usize::<f64>(n - 1)));
            let a = JetTensor::from_fn(n, &[UP, DOWN], |idx| {
                let base = r.get(&[idx[0], idx[1]]).clone();
                if idx[0] == idx[1] {
                    base.sub(&mean)
                } else {
                    Ok(base)
                }
            })?;
            let contracted = a.partial_y()?.trace(0, 2)?; // A^m_{k.m} -> [k]
            let factor = real::<T>(1.0 / real_usize::<f64>(n + 1));
            JetTensor::from_fn(n, &[UP, DOWN], |idx| {
                let correction =
                    contracted.get(&[idx[1]]).mul(&self.spray.y_jets()[idx[0]])?;
                a.get(&[idx[0], idx[1]]).sub(&correction.scale(factor))
            })
        })
    }

    /// Weakly-Weyl curvature `W_j{}^i{}_{kl} = (W^i_{k.l} - W^i_{l.k})_{.j}/3`,
    /// stored `[i, j, k, l]`.
    pub fn weakly_weyl(&self) -> Result<&JetTensor<T>> {
        cached(&self.weakly_weyl, || {
            let d = self.weyl()?.partial_y()?; // [i, k, l]
            let skew = d.sub(&d.permute(&[0, 2, 1]))?.scale(real::<T>(1.0 / 3.0));
            let dd = skew.partial_y()?; // [i, k, l, j]
            Ok(dd.permute(&[0, 3, 1, 2]))
        })
    }

    /// `W~_j{}^i{}_{kl} = W_j{}^i{}_{ml.k} y^m`, stored `[i, j, k, l]`.
    pub fn weyl_tilde(&self) -> Result<&JetTensor<T>> {
        cached(&self.weyl_tilde, || {
            let d = self.weakly_weyl()?.partial_y()?; // [i, j, m, l, k]
            let contracted = d.contract_with(2, self.spray.y_jets())?; // [i, j, l, k]
            Ok(contracted.permute(&[0, 1, 3, 2]))
        })
    }

    /// `W~_j{}^i{}_{kl|0}`.
    pub fn weyl_tilde_zero(&self) -> Result<&JetTensor<T>> {
        cached(&self.weyl_tilde_zero, || {
            self.spray.horizontal_zero(self.weyl_tilde()?)
        })
    }

    /// `theta_{jkl} = 2 E_{jk|l} - (R^s_{l.s} - (n+2) R_{.l})_{.j.k} / 3`,
    /// where `R = R^m_m / (n-1)` is the same normalized curvature scalar
    /// that enters the Weyl tensor.
    pub fn theta(&self) -> Result<&JetTensor<T>> {
        cached(&self.theta, || {
            let n = self.dim();
            let e_deriv = self.spray.horizontal_deriv(self.mean_berwald()?)?; // [j, k, l]
            let traced = self.riemann()?.partial_y()?.trace(0, 2)?; // R^s_{l.s} -> [l]
            let ric = self.ricci()?;
            let np2 = real::<T>(real_usize::<f64>(n + 2) / real_usize::<f64>(n - 1));
            let vector = JetTensor::from_fn(n, &[DOWN], |idx| {
                let ric_l = ric.partial(n + idx[0])?;
                traced.get(&[idx[0]]).sub(&ric_l.scale(np2))
            })?;
            let second = vector.partial_y()?.partial_y()?; // [l, j, k]
            let second = second.permute(&[1, 2, 0]); // [j, k, l]
            e_deriv
                .scale(real::<T>(2.0))
                .sub(&second.scale(real::<T>(1.0 / 3.0)))
        })
    }

    /// `B_j{}^i{}_{kl|0}`, a by-product of the Berwald curvature.
    pub fn berwald_tilde(&self) -> Result<&JetTensor<T>> {
        cached(&self.berwald_tilde, || {
            self.spray.horizontal_zero(self.berwald()?)
        })
    }

    /// Angular metric `h_{ij} = g_{ij} - F_{.i} F_{.j}`.
    pub fn angular_metric(&self) -> Result<&JetTensor<T>> {
        cached(&self.angular, || {
            let n = self.dim();
            let f = self.spray.f()?;
            let df: Vec<Jet<T>> =
                (0..n).map(|i| f.partial(n + i)).collect::<Result<_>>()?;
            JetTensor::from_fn(n, &[DOWN, DOWN], |idx| {
                let cross = df[idx[0]].mul(&df[idx[1]])?;
                self.spray.g.get(&[idx[0], idx[1]]).sub(&cross)
            })
        })
    }

    /// Recurrence ratio `sigma = <D~, D> / <D, D>` as a jet. Only meaningful
    /// when the Douglas tensor does not vanish; callers must check first.
    pub fn recurrence_ratio(&self) -> Result<Jet<T>> {
        let num = jet_inner_product(self.douglas_tilde()?, self.douglas()?)?;
        let den = jet_inner_product(self.douglas()?, self.douglas()?)?;
        num.div(&den)
    }

    /// `(ln det g)_{|0}` as a scalar jet. This is twice the horizontal
    /// derivative along the flow of the metric part of the distortion; the
    /// volume-normalization part of the distortion is a function of the base
    /// point alone, so it drops out of every fiber derivative.
    pub fn log_det_g_zero(&self) -> Result<Jet<T>> {
        let n = self.dim();
        let rows: Vec<Vec<Jet<T>>> = (0..n)
            .map(|i| (0..n).map(|j| self.spray.g.get(&[i, j]).clone()).collect())
            .collect();
        let det = crate::linalg::jet_det(&rows)?;
        let ln = det.ln()?;
        let t = JetTensor::scalar(ln, n);
        Ok(self.spray.horizontal_zero(&t)?.into_scalar())
    }

    /// Residual of the identity `E_{jk} = S_{.j.k} / 2` between the mean
    /// Berwald curvature and the fiber Hessian of the S-curvature, normalized
    /// by `1 + |E|`. Since `S = (ln det g)_{|0} / 2 + (x-only linear in y)`,
    /// the Hessian is `(ln det g)_{|0 .j.k} / 4`.
    pub fn mean_berwald_distortion_residual(&self) -> Result<T> {
        let n = self.dim();
        let s_jet = self.log_det_g_zero()?;
        let quarter = real::<T>(0.25);
        let mut hessian = TensorSample::zeros(n, 2);
        for j in 0..n {
            let dj = s_jet.partial(n + j)?;
            for k in 0..n {
                hessian.set(&[j, k], dj.partial(n + k)?.value() * quarter);
            }
        }
        let e = self.mean_berwald()?.values();
        let diff = e.sub(&hessian);
        Ok(diff.frobenius() / (T::one() + e.frobenius()))
    }

    /// Component values for any supported tensor kind.
    pub fn sample(&self, kind: TensorKind) -> Result<TensorSample<T>> {
        let tensor: &JetTensor<T> = match kind {
            TensorKind::Fundamental => &self.spray.g,
            TensorKind::FundamentalInverse => &self.spray.g_inv,
            TensorKind::Angular => self.angular_metric()?,
            TensorKind::Spray => &self.spray.spray,
            TensorKind::NonlinearConnection => &self.spray.n_conn,
            TensorKind::BerwaldConnection => self.spray.gamma()?,
            TensorKind::Riemann => self.riemann()?,
            TensorKind::RiemannThree => self.riemann_three()?,
            TensorKind::RiemannFull => self.riemann_full()?,
            TensorKind::Berwald => self.berwald()?,
            TensorKind::MeanBerwald => self.mean_berwald()?,
            TensorKind::HCurvature => self.h_curvature()?,
            TensorKind::Douglas => self.douglas()?,
            TensorKind::DouglasTilde => self.douglas_tilde()?,
            TensorKind::DouglasTildeZero => self.douglas_tilde_zero()?,
            TensorKind::StretchDouglas => self.stretch_douglas()?,
            TensorKind::Weyl => self.weyl()?,
            TensorKind::WeaklyWeyl => self.weakly_weyl()?,
            TensorKind::WeylTilde => self.weyl_tilde()?,
            TensorKind::WeylTildeZero => self.weyl_tilde_zero()?,
            TensorKind::Theta => self.theta()?,
            TensorKind::BerwaldTilde => self.berwald_tilde()?,
        };
        Ok(tensor.values())
    }

    /// Residual of the Riemann-Berwald exchange identity
    /// `B_j{}^i{}_{ml|k} - B_j{}^i{}_{mk|l} = R_j{}^i{}_{kl.m}`,
    /// normalized by `1 + |RHS|`.
    pub fn riemann_berwald_residual(&self) -> Result<T> {
        let n = self.dim();
        let bd = self.spray.horizontal_deriv(self.berwald()?)?.values(); // [i,j,m,l,k]
        let rd = self.riemann_full()?.partial_y()?.values(); // [i,j,k,l,m]
        let mut diff2 = T::zero();
        let mut rhs2 = T::zero();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        for m in 0..n {
                            let lhs = bd.get(&[i, j, m, l, k]) - bd.get(&[i, j, m, k, l]);
                            let rhs = rd.get(&[i, j, k, l, m]);
                            diff2 += (lhs - rhs) * (lhs - rhs);
                            rhs2 += rhs * rhs;
                        }
                    }
                }
            }
        }
        Ok(diff2.sqrt() / (T::one() + rhs2.sqrt()))
    }

    /// Residual of the exchange identity
    /// `W_j{}^i{}_{ml.k} y^m = D~_j{}^i{}_{kl} - theta_{jkl} y^i / (n+1)`,
    /// normalized by `1 + max(|LHS|, |D~|)`. The two sides are computed from
    /// independent curvature chains, so this validates both.
    pub fn weyl_douglas_theta_residual(&self) -> Result<T> {
        let n = self.dim();
        let lhs = self.weyl_tilde()?.values();
        let dt = self.douglas_tilde()?.values();
        let th = self.theta()?.values();
        let y = self.spray.y();
        let factor = T::one() / real_usize::<T>(n + 1);
        let mut diff2 = T::zero();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let rhs = dt.get(&[i, j, k, l]) - th.get(&[j, k, l]) * y[i] * factor;
                        let d = lhs.get(&[i, j, k, l]) - rhs;
                        diff2 += d * d;
                    }
                }
            }
        }
        let scale = T::one() + lhs.frobenius().max(dt.frobenius());
        Ok(diff2.sqrt() / scale)
    }

    /// Relative disagreement between the two published Douglas tensor forms,
    /// normalized by `1 + |D|`.
    pub fn douglas_route_residual(&self) -> Result<T> {
        let a = self.douglas()?.values();
        let b = self.douglas_from_mean_berwald()?.values();
        let diff = a.sub(&b);
        Ok(diff.frobenius() / (T::one() + a.frobenius()))
    }

    /// Worst absolute violations of the algebraic trace and `y`-annihilation
    /// identities, as `(identity name, violation)` pairs: `R`, `W`, `h`, `B`,
    /// and `D` all annihilate `y` (on the slot each is contracted with here),
    /// and `W` and `D` are traceless.
    pub fn trace_annihilation_residuals(&self) -> Result<Vec<(&'static str, T)>> {
        let n = self.dim();
        let y = self.spray.y();
        let r = self.sample(TensorKind::Riemann)?;
        let w = self.sample(TensorKind::Weyl)?;
        let h = self.sample(TensorKind::Angular)?;
        let b = self.sample(TensorKind::Berwald)?;
        let d = self.sample(TensorKind::Douglas)?;

        let contract2 = |t: &TensorSample<T>| -> T {
            let mut worst = T::zero();
            for i in 0..n {
                let c: T = (0..n).map(|k| t.get(&[i, k]) * y[k]).sum();
                worst = worst.max(c.abs());
            }
            worst
        };
        let contract4 = |t: &TensorSample<T>| -> T {
            let mut worst = T::zero();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let c: T = (0..n).map(|l| t.get(&[i, j, k, l]) * y[l]).sum();
                        worst = worst.max(c.abs());
                    }
                }
            }
            worst
        };
        let w_trace: T = (0..n).map(|m| w.get(&[m, m])).sum();
        let mut d_trace = T::zero();
        for j in 0..n {
            for k in 0..n {
                let c: T = (0..n).map(|m| d.get(&[m, j, k, m])).sum();
                d_trace = d_trace.max(c.abs());
            }
        }
        Ok(vec![
            ("riemann_annihilates_y", contract2(&r)),
            ("weyl_annihilates_y", contract2(&w)),
            ("angular_annihilates_y", contract2(&h)),
            ("berwald_annihilates_y", contract4(&b)),
            ("douglas_annihilates_y", contract4(&d)),
            ("weyl_traceless", w_trace.abs()),
            ("douglas_traceless", d_trace),
        ])
    }
}

/// Component-wise inner product of two equally shaped jet tensors.
pub fn jet_inner_product<T: Real>(a: &JetTensor<T>, b: &JetTensor<T>) -> Result<Jet<T>> {
    a.check_same_shape(b)?;
    let mut acc = Jet::constant(a.config(), T::zero());
    let n = a.dim();
    let rank = a.rank();
    let mut idx = vec![0usize; rank];
    loop {
        acc = acc.add(&a.get(&idx).mul(b.get(&idx))?)?;
        let mut slot = rank;
        loop {
            if slot == 0 {
                return Ok(acc);
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

/// Contracts the last slot of a sample with a vector of values.
pub fn sample_contract_last<T: Real>(t: &TensorSample<T>, v: &[T]) -> TensorSample<T> {
    let rank = t.rank();
    let n = t.dim();
    let mut out = TensorSample::zeros(n, rank - 1);
    let mut idx = vec![0usize; rank - 1];
    loop {
        let mut acc = T::zero();
        let mut full = idx.clone();
        full.push(0);
        for (m, vm) in v.iter().enumerate() {
            full[rank - 1] = m;
            acc += t.get(&full) * *vm;
        }
        out.set(&idx, acc);
        let mut slot = rank - 1;
        loop {
            if slot == 0 {
                return out;
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
