//! Tensors with jet components and their extracted point values.
//!
//! A [`JetTensor`] is a dense rank-r array over an n dimensional index range
//! whose entries are jets in the `2n` state variables; each slot carries a
//! variance marker so covariant operations know whether to hook a connection
//! term with a plus or a minus sign. Formal derivative slots are appended
//! last; use [`JetTensor::permute`] to put indices into a formula's order.
//!
//! A [`TensorSample`] holds the extracted values at the base point and
//! provides the Euclidean (all components squared) norms the residual tests
//! are defined with.

use crate::error::{Error, Result};
use crate::jet::{Jet, JetConfig};
use crate::num::Real;

/// Index variance of one tensor slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variance {
    Up,
    Down,
}

/// Dense tensor of jets.
#[derive(Clone, Debug)]
pub struct JetTensor<T: Real> {
    dim: usize,
    variance: Vec<Variance>,
    data: Vec<Jet<T>>,
}

fn flat_index(dim: usize, idx: &[usize]) -> usize {
    let mut flat = 0;
    for &i in idx {
        debug_assert!(i < dim);
        flat = flat * dim + i;
    }
    flat
}

impl<T: Real> JetTensor<T> {
    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(
        dim: usize,
        variance: &[Variance],
        mut f: impl FnMut(&[usize]) -> Result<Jet<T>>,
    ) -> Result<JetTensor<T>> {
        let rank = variance.len();
        let total = dim.pow(rank as u32);
        let mut data = Vec::with_capacity(total);
        let mut idx = vec![0usize; rank];
        for flat in 0..total {
            let mut rem = flat;
            for slot in (0..rank).rev() {
                idx[slot] = rem % dim;
                rem /= dim;
            }
            data.push(f(&idx)?);
        }
        Ok(JetTensor { dim, variance: variance.to_vec(), data })
    }

    /// Rank zero tensor wrapping a single jet.
    pub fn scalar(jet: Jet<T>, dim: usize) -> JetTensor<T> {
        JetTensor { dim, variance: Vec::new(), data: vec![jet] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    /// Valid derivative order shared by the components (the minimum).
    pub fn valid_order(&self) -> usize {
        self.data.iter().map(|j| j.valid_order()).min().expect("tensors are nonempty")
    }

    pub fn get(&self, idx: &[usize]) -> &Jet<T> {
        assert_eq!(idx.len(), self.rank());
        &self.data[flat_index(self.dim, idx)]
    }

    /// The scalar component of a rank zero tensor.
    pub fn into_scalar(mut self) -> Jet<T> {
        assert_eq!(self.rank(), 0);
        self.data.pop().expect("rank zero tensor has one component")
    }

    /// Applies `f` to every component.
    pub fn map(&self, mut f: impl FnMut(&Jet<T>) -> Result<Jet<T>>) -> Result<JetTensor<T>> {
        let data: Vec<Jet<T>> = self.data.iter().map(|j| f(j)).collect::<Result<_>>()?;
        Ok(JetTensor { dim: self.dim, variance: self.variance.clone(), data })
    }

    pub fn check_same_shape(&self, other: &JetTensor<T>) -> Result<()> {
        if self.dim != other.dim || self.variance != other.variance {
            return Err(Error::ConfigMismatch(format!(
                "tensor shapes differ: dim {} variance {:?} vs dim {} variance {:?}",
                self.dim, self.variance, other.dim, other.variance
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &JetTensor<T>) -> Result<JetTensor<T>> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.add(b))
            .collect::<Result<_>>()?;
        Ok(JetTensor { dim: self.dim, variance: self.variance.clone(), data })
    }

    pub fn sub(&self, other: &JetTensor<T>) -> Result<JetTensor<T>> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<_>>()?;
        Ok(JetTensor { dim: self.dim, variance: self.variance.clone(), data })
    }

    pub fn scale(&self, factor: T) -> JetTensor<T> {
        let data = self.data.iter().map(|j| j.scale(factor)).collect();
        JetTensor { dim: self.dim, variance: self.variance.clone(), data }
    }

    /// Multiplies every component by a scalar jet.
    pub fn scale_jet(&self, factor: &Jet<T>) -> Result<JetTensor<T>> {
        self.map(|j| j.mul(factor))
    }

    /// Formal fiber derivative: appends a covariant slot holding the
    /// derivative with respect to `y^new`. Lowers the valid order by one.
    pub fn partial_y(&self) -> Result<JetTensor<T>> {
        self.append_partial(self.dim)
    }

    /// Formal base derivative slot with respect to `x^new`.
    pub fn partial_x(&self) -> Result<JetTensor<T>> {
        self.append_partial(0)
    }

    fn append_partial(&self, var_base: usize) -> Result<JetTensor<T>> {
        let mut variance = self.variance.clone();
        variance.push(Variance::Down);
        let mut data = Vec::with_capacity(self.data.len() * self.dim);
        for jet in &self.data {
            for v in 0..self.dim {
                data.push(jet.partial(var_base + v)?);
            }
        }
        Ok(JetTensor { dim: self.dim, variance, data })
    }

    /// Reorders slots so that new slot `k` is old slot `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> JetTensor<T> {
        let rank = self.rank();
        assert_eq!(perm.len(), rank);
        let variance: Vec<Variance> = perm.iter().map(|&p| self.variance[p]).collect();
        let total = self.data.len();
        let mut data = Vec::with_capacity(total);
        let mut new_idx = vec![0usize; rank];
        let mut old_idx = vec![0usize; rank];
        for flat in 0..total {
            let mut rem = flat;
            for slot in (0..rank).rev() {
                new_idx[slot] = rem % self.dim;
                rem /= self.dim;
            }
            for k in 0..rank {
                old_idx[perm[k]] = new_idx[k];
            }
            data.push(self.data[flat_index(self.dim, &old_idx)].clone());
        }
        JetTensor { dim: self.dim, variance, data }
    }

    /// Contracts a slot with a vector of jets (for example the lifted fiber
    /// variables `y` or the spray coefficients).
    pub fn contract_with(&self, slot: usize, jets: &[Jet<T>]) -> Result<JetTensor<T>> {
        assert_eq!(jets.len(), self.dim);
        let rank = self.rank();
        assert!(slot < rank);
        let mut variance = self.variance.clone();
        variance.remove(slot);
        let config = self.data[0].config().clone();
        let out_total = self.data.len() / self.dim;
        let mut data = Vec::with_capacity(out_total);
        let mut out_idx = vec![0usize; rank - 1];
        let mut full_idx = vec![0usize; rank];
        for flat in 0..out_total {
            let mut rem = flat;
            for s in (0..rank - 1).rev() {
                out_idx[s] = rem % self.dim;
                rem /= self.dim;
            }
            full_idx[..slot].copy_from_slice(&out_idx[..slot]);
            full_idx[slot + 1..].copy_from_slice(&out_idx[slot..]);
            let mut acc = Jet::constant(&config, T::zero());
            for m in 0..self.dim {
                full_idx[slot] = m;
                acc = acc.add(&self.data[flat_index(self.dim, &full_idx)].mul(&jets[m])?)?;
            }
            data.push(acc);
        }
        Ok(JetTensor { dim: self.dim, variance, data })
    }

    /// Trace over an upper and a lower slot.
    pub fn trace(&self, up_slot: usize, down_slot: usize) -> Result<JetTensor<T>> {
        let rank = self.rank();
        assert!(up_slot != down_slot && up_slot < rank && down_slot < rank);
        assert_eq!(self.variance[up_slot], Variance::Up, "trace needs an upper slot");
        assert_eq!(self.variance[down_slot], Variance::Down, "trace needs a lower slot");
        let mut variance = Vec::new();
        for (s, &v) in self.variance.iter().enumerate() {
            if s != up_slot && s != down_slot {
                variance.push(v);
            }
        }
        let config = self.data[0].config().clone();
        let out_rank = rank - 2;
        let out_total = self.dim.pow(out_rank as u32);
        let mut data = Vec::with_capacity(out_total);
        let mut out_idx = vec![0usize; out_rank];
        let mut full_idx = vec![0usize; rank];
        for flat in 0..out_total {
            let mut rem = flat;
            for s in (0..out_rank).rev() {
                out_idx[s] = rem % self.dim;
                rem /= self.dim;
            }
            let mut k = 0;
            for s in 0..rank {
                if s != up_slot && s != down_slot {
                    full_idx[s] = out_idx[k];
                    k += 1;
                }
            }
            let mut acc = Jet::constant(&config, T::zero());
            for m in 0..self.dim {
                full_idx[up_slot] = m;
                full_idx[down_slot] = m;
                acc = acc.add(&self.data[flat_index(self.dim, &full_idx)])?;
            }
            data.push(acc);
        }
        Ok(JetTensor { dim: self.dim, variance, data })
    }

    /// Point values of all components.
    pub fn values(&self) -> TensorSample<T> {
        TensorSample {
            dim: self.dim,
            rank: self.rank(),
            data: self.data.iter().map(|j| j.value()).collect(),
        }
    }

    pub fn config(&self) -> &JetConfig {
        self.data[0].config()
    }
}

/// Extracted tensor values at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSample<T> {
    dim: usize,
    rank: usize,
    data: Vec<T>,
}

impl<T: Real> TensorSample<T> {
    pub fn from_fn(dim: usize, rank: usize, mut f: impl FnMut(&[usize]) -> T) -> TensorSample<T> {
        let total = dim.pow(rank as u32);
        let mut data = Vec::with_capacity(total);
        let mut idx = vec![0usize; rank];
        for flat in 0..total {
            let mut rem = flat;
            for slot in (0..rank).rev() {
                idx[slot] = rem % dim;
                rem /= dim;
            }
            data.push(f(&idx));
        }
        TensorSample { dim, rank, data }
    }

    pub fn zeros(dim: usize, rank: usize) -> TensorSample<T> {
        TensorSample { dim, rank, data: vec![T::zero(); dim.pow(rank as u32)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn get(&self, idx: &[usize]) -> T {
        assert_eq!(idx.len(), self.rank);
        self.data[flat_index(self.dim, idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: T) {
        assert_eq!(idx.len(), self.rank);
        self.data[flat_index(self.dim, idx)] = value;
    }

    pub fn components(&self) -> &[T] {
        &self.data
    }

    /// Frobenius norm: square root of the sum of squared components.
    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Componentwise inner product.
    pub fn dot(&self, other: &TensorSample<T>) -> T {
        assert_eq!(self.data.len(), other.data.len());
        self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum()
    }

    pub fn add(&self, other: &TensorSample<T>) -> TensorSample<T> {
        assert_eq!(self.data.len(), other.data.len());
        TensorSample {
            dim: self.dim,
            rank: self.rank,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &TensorSample<T>) -> TensorSample<T> {
        assert_eq!(self.data.len(), other.data.len());
        TensorSample {
            dim: self.dim,
            rank: self.rank,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn scale(&self, factor: T) -> TensorSample<T> {
        TensorSample {
            dim: self.dim,
            rank: self.rank,
            data: self.data.iter().map(|&v| v * factor).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn config(n: usize, order: usize) -> JetConfig {
        JetConfig::get(2 * n, order).unwrap()
    }

    fn lift_state(c: &JetConfig, x: &[f64], y: &[f64]) -> (Vec<Jet<f64>>, Vec<Jet<f64>>) {
        let n = x.len();
        let xs = (0..n).map(|i| Jet::variable(c, i, x[i]).unwrap()).collect();
        let ys = (0..n).map(|i| Jet::variable(c, n + i, y[i]).unwrap()).collect();
        (xs, ys)
    }

    #[test]
    fn from_fn_and_get_round_trip() {
        let c = config(3, 2);
        let t = JetTensor::from_fn(3, &[Variance::Up, Variance::Down], |idx| {
            Ok(Jet::constant(&c, (idx[0] * 10 + idx[1]) as f64))
        })
        .unwrap();
        assert_eq!(t.get(&[2, 1]).value(), 21.0);
        assert_eq!(t.get(&[0, 2]).value(), 2.0);
        let v = t.values();
        assert_eq!(v.get(&[1, 2]), 12.0);
    }

    #[test]
    fn permute_transposes_components() {
        let c = config(2, 1);
        let t = JetTensor::from_fn(2, &[Variance::Up, Variance::Down, Variance::Down], |idx| {
            Ok(Jet::constant(&c, (idx[0] * 100 + idx[1] * 10 + idx[2]) as f64))
        })
        .unwrap();
        // With perm = [2, 0, 1], new slot k draws from old slot perm[k], so
        // p[a, b, c] = t[b, c, a].
        let p = t.permute(&[2, 0, 1]);
        assert_eq!(p.get(&[1, 0, 1]).value(), 11.0); // t[0, 1, 1]
        assert_eq!(p.get(&[0, 1, 0]).value(), 100.0); // t[1, 0, 0]
        assert_eq!(p.variance(), &[Variance::Down, Variance::Up, Variance::Down]);
    }

    #[test]
    fn fiber_derivative_and_euler_identity() {
        // f = y1^2 + y2^2 is 2-homogeneous: y^i df/dy^i = 2 f.
        let n = 2;
        let c = config(n, 3);
        let (_, ys) = lift_state(&c, &[0.1, -0.2], &[0.7, 0.4]);
        let f = ys[0].mul(&ys[0]).unwrap().add(&ys[1].mul(&ys[1]).unwrap()).unwrap();
        let t = JetTensor::scalar(f.clone(), n);
        let df = t.partial_y().unwrap();
        assert_eq!(df.rank(), 1);
        let contracted = df.contract_with(0, &ys).unwrap().into_scalar();
        let twice = f.scale(2.0);
        assert_relative_eq!(contracted.value(), twice.value(), epsilon = 1e-13);
        let cfg = contracted.config().clone();
        for idx in 0..cfg.monomials_upto(contracted.valid_order()) {
            let e = cfg.exponent(idx).to_vec();
            assert_relative_eq!(
                contracted.coeff(&e).unwrap(),
                twice.coeff(&e).unwrap(),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn trace_sums_diagonal() {
        let c = config(3, 1);
        let t = JetTensor::from_fn(3, &[Variance::Up, Variance::Down], |idx| {
            Ok(Jet::constant(&c, (idx[0] * 3 + idx[1]) as f64))
        })
        .unwrap();
        let tr = t.trace(0, 1).unwrap().into_scalar();
        assert_eq!(tr.value(), 0.0 + 4.0 + 8.0);
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let c = config(2, 1);
        let a = JetTensor::from_fn(2, &[Variance::Up], |_| Ok(Jet::constant(&c, 1.0))).unwrap();
        let b = JetTensor::from_fn(2, &[Variance::Down], |_| Ok(Jet::constant(&c, 1.0))).unwrap();
        assert!(matches!(a.add(&b), Err(Error::ConfigMismatch(_))));
    }

    #[test]
    fn sample_norms_are_euclidean() {
        let s = TensorSample::from_fn(2, 2, |idx| ((idx[0] * 2 + idx[1]) as f64) - 1.5);
        // Components -1.5, -0.5, 0.5, 1.5.
        assert_relative_eq!(s.frobenius(), (2.0f64 * (2.25 + 0.25)).sqrt(), epsilon = 1e-14);
        assert_relative_eq!(s.dot(&s), 5.0, epsilon = 1e-14);
        assert_relative_eq!(s.max_abs(), 1.5, epsilon = 1e-14);
        let d = s.sub(&s.scale(0.5));
        assert_relative_eq!(d.frobenius(), s.frobenius() * 0.5, epsilon = 1e-14);
    }
}
