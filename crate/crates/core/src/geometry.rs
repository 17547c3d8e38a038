//! Spray geometry: from a metric's squared norm to the geodesic spray, the
//! nonlinear connection, and horizontal derivatives of jet tensors.
//!
//! For a metric `F` on an `n` dimensional region, the fundamental tensor is
//! `g_ij = (F^2)_{y^i y^j} / 2` and the geodesic spray is
//!
//! ```text
//! G^i = g^{il} { (F^2)_{x^k y^l} y^k - (F^2)_{x^l} } / 4 .
//! ```
//!
//! The nonlinear connection is `N^i_j = dG^i/dy^j` and the Berwald
//! connection coefficients are `Gamma^i_{jk} = d^2 G^i / dy^j dy^k`. The
//! horizontal derivative of a tensor hooks connection terms onto every slot:
//!
//! ```text
//! T_{|m} = d_x^m T - N^r_m d_{y^r} T + sum_up T(..r..) Gamma^i_{rm}
//!                                    - sum_down T(..r..) Gamma^r_{jm} ,
//! ```
//!
//! and the contraction `T_{|0} = y^m T_{|m}` is computed directly as
//! `y^m d_x^m T - 2 G^r d_{y^r} T` plus `N` hooks, which costs one less jet
//! order than deriving and contracting.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetConfig};
use crate::linalg;
use crate::metric::MetricSpec;
use crate::num::{real, Real};
use crate::rng::Pcg32;
use crate::tensor::{JetTensor, Variance};

/// A sampled evaluation state: base point and fiber direction.
#[derive(Clone, Debug, PartialEq)]
pub struct StatePoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Samples `count` states in the metric's region with directions normalized
/// to `F(x, y) = 1`.
///
/// # Errors
/// [`Error::Sampling`] when the metric repeatedly fails to evaluate at drawn
/// states (bad domain inside the declared region).
pub fn sample_states(metric: &MetricSpec, count: usize, seed: u64) -> Result<Vec<StatePoint>> {
    let mut rng = Pcg32::new(seed);
    let mut out = Vec::with_capacity(count);
    let mut failures = 0usize;
    while out.len() < count {
        if failures > 100 + 20 * count {
            return Err(Error::Sampling(format!(
                "metric '{}' keeps failing to evaluate inside its region",
                metric.name
            )));
        }
        let x = rng.in_ball::<f64>(&metric.region_center, metric.region_radius);
        let y = rng.unit_vector::<f64>(metric.dim);
        match metric.eval_f_scalar(&x, &y) {
            Ok(f) if f.is_finite() && f > 0.0 => {
                let y = y.iter().map(|v| v / f).collect();
                out.push(StatePoint { x, y });
            }
            _ => failures += 1,
        }
    }
    Ok(out)
}

/// Per point spray data: the squared norm, fundamental tensor, spray, and
/// nonlinear connection as jets, with the Berwald coefficients on demand.
pub struct SprayJets<T: Real> {
    config: JetConfig,
    dim: usize,
    x: Vec<T>,
    y: Vec<T>,
    /// Lifted fiber variables `y^i`.
    y_jets: Vec<Jet<T>>,
    pub f2: Jet<T>,
    /// `g_ij`, lower lower.
    pub g: JetTensor<T>,
    /// `g^{ij}`, upper upper.
    pub g_inv: JetTensor<T>,
    /// `G^i`.
    pub spray: JetTensor<T>,
    /// `N^i_j`.
    pub n_conn: JetTensor<T>,
    gamma: OnceLock<JetTensor<T>>,
}

impl<T: Real> SprayJets<T> {
    /// Builds the spray data for `metric` at `(x, y)` with jets truncated at
    /// `order`.
    pub fn from_metric(
        metric: &MetricSpec,
        order: usize,
        x: &[T],
        y: &[T],
    ) -> Result<SprayJets<T>> {
        let n = metric.dim;
        let config = JetConfig::get(2 * n, order)?;
        let f2 = metric.f2_jet(&config, x, y)?;
        Self::from_f2(config, n, x, y, f2)
    }

    /// Builds the spray data from an externally assembled `F^2` jet.
    pub fn from_f2(
        config: JetConfig,
        dim: usize,
        x: &[T],
        y: &[T],
        f2: Jet<T>,
    ) -> Result<SprayJets<T>> {
        let n = dim;
        let y_jets: Vec<Jet<T>> = (0..n)
            .map(|i| Jet::variable(&config, n + i, y[i]))
            .collect::<Result<_>>()?;
        let half = real::<T>(0.5);
        let g = JetTensor::from_fn(n, &[Variance::Down, Variance::Down], |idx| {
            Ok(f2.partial(n + idx[0])?.partial(n + idx[1])?.scale(half))
        })?;
        // Positive definiteness at the point gives a clear early error.
        let g_values =
            linalg::Mat::from_fn(n, n, |i, j| g.get(&[i, j]).value().to_f64().unwrap_or(f64::NAN));
        linalg::cholesky_solve(&g_values, &vec![0.0; n]).map_err(|e| match e {
            Error::NotPositiveDefinite { pivot, step } => Error::NotPositiveDefinite { pivot, step },
            other => other,
        })?;
        let g_rows: Vec<Vec<Jet<T>>> =
            (0..n).map(|i| (0..n).map(|j| g.get(&[i, j]).clone()).collect()).collect();
        let g_inv_rows = linalg::jet_mat_inverse(&g_rows)?;
        let g_inv = JetTensor::from_fn(n, &[Variance::Up, Variance::Up], |idx| {
            Ok(g_inv_rows[idx[0]][idx[1]].clone())
        })?;
        // rhs_l = (F^2)_{x^k y^l} y^k - (F^2)_{x^l}.
        let mut rhs = Vec::with_capacity(n);
        for l in 0..n {
            let mut acc = f2.partial(l)?.neg();
            for k in 0..n {
                let mixed = f2.partial(k)?.partial(n + l)?;
                acc = acc.add(&mixed.mul(&y_jets[k])?)?;
            }
            rhs.push(acc);
        }
        let quarter = real::<T>(0.25);
        let spray = JetTensor::from_fn(n, &[Variance::Up], |idx| {
            let mut acc = Jet::constant(&config, T::zero());
            for l in 0..n {
                acc = acc.add(&g_inv.get(&[idx[0], l]).mul(&rhs[l])?)?;
            }
            Ok(acc.scale(quarter))
        })?;
        let n_conn = spray.partial_y()?;
        Ok(SprayJets {
            config,
            dim: n,
            x: x.to_vec(),
            y: y.to_vec(),
            y_jets,
            f2,
            g,
            g_inv,
            spray,
            n_conn,
            gamma: OnceLock::new(),
        })
    }

    /// Replaces the spray (keeping the metric data) and rebuilds the derived
    /// connection. Used for projective deformations `G -> G + P y`.
    pub fn with_spray(&self, spray: JetTensor<T>) -> Result<SprayJets<T>> {
        let n_conn = spray.partial_y()?;
        Ok(SprayJets {
            config: self.config.clone(),
            dim: self.dim,
            x: self.x.clone(),
            y: self.y.clone(),
            y_jets: self.y_jets.clone(),
            f2: self.f2.clone(),
            g: self.g.clone(),
            g_inv: self.g_inv.clone(),
            spray,
            n_conn,
            gamma: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &JetConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn y_jets(&self) -> &[Jet<T>] {
        &self.y_jets
    }

    /// The norm `F = sqrt(F^2)` as a jet.
    pub fn f(&self) -> Result<Jet<T>> {
        self.f2.sqrt()
    }

    /// Berwald connection coefficients `Gamma^i_{jk}`, computed on first use.
    pub fn gamma(&self) -> Result<&JetTensor<T>> {
        if let Some(g) = self.gamma.get() {
            return Ok(g);
        }
        let computed = self.n_conn.partial_y()?;
        let _ = self.gamma.set(computed);
        Ok(self.gamma.get().expect("just set"))
    }

    /// Spray coefficient jets as a plain vector.
    fn spray_jets(&self) -> Vec<Jet<T>> {
        (0..self.dim).map(|i| self.spray.get(&[i]).clone()).collect()
    }

    /// Horizontal derivative contracted with `y`: `T_{|0} = y^m T_{|m}`,
    /// computed directly as `y^m d_x T - 2 G^r d_y T` plus `N` hooks (the
    /// `Gamma` hooks contract to `N` against `y`). Costs one jet order.
    pub fn horizontal_zero(&self, t: &JetTensor<T>) -> Result<JetTensor<T>> {
        let rank = t.rank();
        let dx = t.partial_x()?;
        let mut out = dx.contract_with(rank, &self.y_jets)?;
        let dy = t.partial_y()?;
        let transport = dy.contract_with(rank, &self.spray_jets())?;
        out = out.sub(&transport.scale(real::<T>(2.0)))?;
        for slot in 0..rank {
            let hook = self.connection_hook(t, slot, &self.n_conn)?;
            out = match t.variance()[slot] {
                Variance::Up => out.add(&hook)?,
                Variance::Down => out.sub(&hook)?,
            };
        }
        Ok(out)
    }

    /// Full horizontal derivative `T_{|m}`, appending the `m` slot last.
    pub fn horizontal_deriv(&self, t: &JetTensor<T>) -> Result<JetTensor<T>> {
        let rank = t.rank();
        let n = self.dim;
        let dx = t.partial_x()?;
        let dy = t.partial_y()?;
        let gamma = self.gamma()?;
        let mut variance = t.variance().to_vec();
        variance.push(Variance::Down);
        JetTensor::from_fn(n, &variance, |idx| {
            let m = idx[rank];
            let base = &idx[..rank];
            let mut full: Vec<usize> = base.to_vec();
            full.push(m);
            let mut acc = dx.get(&full).clone();
            // -N^r_m d_{y^r} T
            for r in 0..n {
                full[rank] = r;
                let term = dy.get(&full).mul(self.n_conn.get(&[r, m]))?;
                acc = acc.sub(&term)?;
            }
            // Connection hooks on the original slots.
            let mut hooked: Vec<usize> = base.to_vec();
            for slot in 0..rank {
                let own = base[slot];
                for r in 0..n {
                    hooked[slot] = r;
                    let term = match t.variance()[slot] {
                        Variance::Up => t.get(&hooked).mul(gamma.get(&[own, r, m]))?,
                        Variance::Down => t.get(&hooked).mul(gamma.get(&[r, own, m]))?.neg(),
                    };
                    acc = acc.add(&term)?;
                }
                hooked[slot] = own;
            }
            Ok(acc)
        })
    }

    /// One connection hook `sum_r T(.. r ..) N(i, r)` (upper slots) or
    /// `sum_r T(.. r ..) N(r, j)` (lower slots), leaving other slots fixed.
    fn connection_hook(
        &self,
        t: &JetTensor<T>,
        slot: usize,
        conn: &JetTensor<T>,
    ) -> Result<JetTensor<T>> {
        let n = self.dim;
        let up = t.variance()[slot] == Variance::Up;
        JetTensor::from_fn(n, t.variance(), |idx| {
            let own = idx[slot];
            let mut src = idx.to_vec();
            let mut acc = Jet::constant(&self.config, T::zero());
            for r in 0..n {
                src[slot] = r;
                let c = if up { conn.get(&[own, r]) } else { conn.get(&[r, own]) };
                acc = acc.add(&t.get(&src).mul(c)?)?;
            }
            Ok(acc)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn metric_from(source: &str) -> MetricSpec {
        MetricSpec::from_file_string(source).unwrap()
    }

    fn euclidean3() -> MetricSpec {
        metric_from(
            r#"
[metric]
name = "euclidean"
kind = "general"
dim = 3
region_center = [0.0, 0.0, 0.0]
region_radius = 0.5

[general]
f2 = "y1^2 + y2^2 + y3^2"
"#,
        )
    }

    fn riemannian_diag() -> MetricSpec {
        metric_from(
            r#"
[metric]
name = "riemannian_diag"
kind = "general"
dim = 3
region_center = [0.0, 0.0, 0.0]
region_radius = 0.5

[general]
f2 = "(1 + x1^2) * y1^2 + y2^2 + y3^2"
"#,
        )
    }

    fn toy_randers() -> MetricSpec {
        metric_from(
            r#"
[metric]
name = "toy_randers"
kind = "randers"
dim = 2
region_center = [0.0, 0.0]
region_radius = 0.3

[alpha]
a_11 = "1"
a_22 = "1 + x1^2"

[beta]
b_1 = "0.3 * x2"
"#,
        )
    }

    #[test]
    fn euclidean_spray_vanishes() {
        let m = euclidean3();
        let s = SprayJets::<f64>::from_metric(&m, 4, &[0.1, -0.2, 0.3], &[0.5, 0.5, 0.2]).unwrap();
        for i in 0..3 {
            assert!(s.spray.get(&[i]).value().abs() < 1e-15);
            for j in 0..3 {
                assert!(s.n_conn.get(&[i, j]).value().abs() < 1e-15);
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(s.g.get(&[i, j]).value(), expected, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn christoffel_symbols_match_hand_computation() {
        // g = diag(1 + x1^2, 1, 1): the only nonzero Christoffel symbol is
        // Gamma^1_{11} = x1 / (1 + x1^2), so G^1 = x1 y1^2 / (2 (1 + x1^2)).
        let m = riemannian_diag();
        let x = [0.3, -0.1, 0.2];
        let y = [0.7, 0.4, -0.5];
        let s = SprayJets::<f64>::from_metric(&m, 5, &x, &y).unwrap();
        let expected_gamma = x[0] / (1.0 + x[0] * x[0]);
        let gamma = s.gamma().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let expected =
                        if (i, j, k) == (0, 0, 0) { expected_gamma } else { 0.0 };
                    assert_relative_eq!(
                        gamma.get(&[i, j, k]).value(),
                        expected,
                        epsilon = 1e-9,
                        max_relative = 1e-9
                    );
                }
            }
        }
        assert_relative_eq!(
            s.spray.get(&[0]).value(),
            0.5 * expected_gamma * y[0] * y[0],
            epsilon = 1e-12
        );
        assert!(s.spray.get(&[1]).value().abs() < 1e-13);
        assert!(s.spray.get(&[2]).value().abs() < 1e-13);
    }

    #[test]
    fn spray_is_homogeneous_of_degree_two() {
        let m = toy_randers();
        let x = [0.1, -0.05];
        let y = [0.6, 0.3];
        let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        let s1 = SprayJets::<f64>::from_metric(&m, 3, &x, &y).unwrap();
        let s2 = SprayJets::<f64>::from_metric(&m, 3, &x, &y2).unwrap();
        for i in 0..2 {
            assert_relative_eq!(
                s2.spray.get(&[i]).value(),
                4.0 * s1.spray.get(&[i]).value(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn norm_and_fiber_are_horizontally_constant() {
        let m = toy_randers();
        let s = SprayJets::<f64>::from_metric(&m, 6, &[0.12, -0.07], &[0.8, 0.35]).unwrap();
        // F_{|m} = 0.
        let f = JetTensor::scalar(s.f().unwrap(), 2);
        let df = s.horizontal_deriv(&f).unwrap();
        for mth in 0..2 {
            assert!(df.get(&[mth]).value().abs() < 1e-12, "F_(|{mth}) != 0");
        }
        // y^i_{|m} = 0.
        let y_tensor = JetTensor::from_fn(2, &[Variance::Up], |idx| {
            Ok(s.y_jets()[idx[0]].clone())
        })
        .unwrap();
        let dy = s.horizontal_deriv(&y_tensor).unwrap();
        for i in 0..2 {
            for mth in 0..2 {
                assert!(dy.get(&[i, mth]).value().abs() < 1e-12);
            }
        }
        // F_{|0} = 0 through the direct route as well.
        let f0 = s.horizontal_zero(&f).unwrap();
        assert!(f0.into_scalar().value().abs() < 1e-12);
    }

    #[test]
    fn direct_bar_zero_matches_contracted_derivative() {
        let m = toy_randers();
        let s = SprayJets::<f64>::from_metric(&m, 6, &[0.1, 0.08], &[0.7, 0.4]).unwrap();
        let t = s.g.clone();
        let direct = s.horizontal_zero(&t).unwrap();
        let contracted = {
            let d = s.horizontal_deriv(&t).unwrap();
            d.contract_with(2, s.y_jets()).unwrap()
        };
        let diff = direct.sub(&contracted).unwrap();
        let cfg = diff.config().clone();
        for i in 0..2 {
            for j in 0..2 {
                let jet = diff.get(&[i, j]);
                for idx in 0..cfg.monomials_upto(jet.valid_order()) {
                    let e = cfg.exponent(idx).to_vec();
                    assert!(jet.coeff(&e).unwrap().abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn replacing_the_spray_rebuilds_the_connection() {
        let m = toy_randers();
        let s = SprayJets::<f64>::from_metric(&m, 5, &[0.1, 0.08], &[0.7, 0.4]).unwrap();
        let replayed = s.with_spray(s.spray.clone()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(
                    s.n_conn.get(&[i, j]).value(),
                    replayed.n_conn.get(&[i, j]).value()
                );
            }
        }
    }

    #[test]
    fn sampled_states_are_normalized_and_in_region() {
        let m = toy_randers();
        let states = sample_states(&m, 25, 99).unwrap();
        assert_eq!(states.len(), 25);
        for st in &states {
            let f = m.eval_f_scalar(&st.x, &st.y).unwrap();
            assert_relative_eq!(f, 1.0, epsilon = 1e-12);
            let r: f64 = st.x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(r <= 0.3 + 1e-12);
        }
        // Determinism.
        let again = sample_states(&m, 25, 99).unwrap();
        assert_eq!(states, again);
    }
}
