//! Truncated multivariate Taylor polynomials ("jets").
//!
//! A jet stores the coefficients of a polynomial in `num_vars` offset
//! variables `z_0..z_{m-1}`, truncated at total degree `max_order`, in the
//! Taylor convention: the coefficient of the monomial `z^e` is the mixed
//! partial derivative divided by `e!`. With that scaling, multiplication is a
//! plain truncated convolution, so evaluating a formula on lifted variables
//! yields the exact mixed partial derivatives of the formula at the base
//! point, up to the stored order.
//!
//! Every jet carries a `valid` order: coefficients of total degree above it
//! are not stored. Arithmetic propagates validity (`min` of the operands),
//! formal differentiation lowers it by one, and extraction past it fails with
//! [`Error::InsufficientOrder`] instead of silently returning garbage.
//!
//! Monomials are enumerated by total degree first, lexicographically inside a
//! degree block. Products use a precomputed pair table when it is small
//! enough, and fall back to packed-exponent hashing for wide configurations.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::num::{real, real_usize, Real};

/// Hard limits keeping the monomial tables bounded.
pub const MAX_VARS: usize = 12;
/// Maximum supported truncation order.
pub const MAX_ORDER: usize = 16;
/// Pair tables beyond this size fall back to hashed multiplication.
const PAIR_TABLE_LIMIT: usize = 3_000_000;

fn pack(exponents: &[u8]) -> u64 {
    let mut key = 0u64;
    for &e in exponents {
        debug_assert!(e < 32);
        key = (key << 5) | e as u64;
    }
    key
}

struct PairTable {
    /// `(target, left, right)` monomial indices, grouped by total degree.
    entries: Vec<(u32, u32, u32)>,
    /// `prefix[d]` = number of entries with total degree `<= d`.
    prefix: Vec<usize>,
}

/// Shared immutable tables for one `(num_vars, max_order)` configuration.
pub struct ConfigInner {
    num_vars: usize,
    max_order: usize,
    /// Flat exponent storage, `num_vars` entries per monomial.
    exponents: Vec<u8>,
    /// `count_upto[d]` = number of monomials of total degree `<= d`.
    count_upto: Vec<usize>,
    index_map: HashMap<u64, u32>,
    pairs: Option<PairTable>,
}

impl ConfigInner {
    fn build(num_vars: usize, max_order: usize) -> Arc<ConfigInner> {
        let mut exponents: Vec<u8> = Vec::new();
        let mut count_upto = vec![0usize; max_order + 1];
        let mut current = vec![0u8; num_vars];
        for degree in 0..=max_order {
            enumerate_degree(&mut current, 0, degree as u8, &mut |e| {
                exponents.extend_from_slice(e);
            });
            count_upto[degree] = exponents.len() / num_vars;
        }
        let total = exponents.len() / num_vars;
        let mut index_map = HashMap::with_capacity(total * 2);
        for idx in 0..total {
            let e = &exponents[idx * num_vars..(idx + 1) * num_vars];
            index_map.insert(pack(e), idx as u32);
        }
        let mut inner = ConfigInner {
            num_vars,
            max_order,
            exponents,
            count_upto,
            index_map,
            pairs: None,
        };
        inner.pairs = inner.build_pairs();
        Arc::new(inner)
    }

    fn build_pairs(&self) -> Option<PairTable> {
        let mut size = 0usize;
        for d in 0..=self.max_order {
            for d1 in 0..=d {
                size += self.block(d1).len() * self.block(d - d1).len();
            }
        }
        if size > PAIR_TABLE_LIMIT {
            return None;
        }
        let mut entries = Vec::with_capacity(size);
        let mut prefix = vec![0usize; self.max_order + 1];
        let mut scratch = vec![0u8; self.num_vars];
        for d in 0..=self.max_order {
            let start = entries.len();
            for d1 in 0..=d {
                for i in self.block(d1) {
                    let ei = self.exponent(i);
                    for j in self.block(d - d1) {
                        let ej = self.exponent(j);
                        for v in 0..self.num_vars {
                            scratch[v] = ei[v] + ej[v];
                        }
                        let k = self.index_map[&pack(&scratch)];
                        entries.push((k, i as u32, j as u32));
                    }
                }
            }
            entries[start..].sort_unstable();
            prefix[d] = entries.len();
        }
        Some(PairTable { entries, prefix })
    }

    #[inline]
    fn block(&self, degree: usize) -> std::ops::Range<usize> {
        let lo = if degree == 0 { 0 } else { self.count_upto[degree - 1] };
        lo..self.count_upto[degree]
    }

    #[inline]
    fn exponent(&self, idx: usize) -> &[u8] {
        &self.exponents[idx * self.num_vars..(idx + 1) * self.num_vars]
    }
}

fn enumerate_degree(current: &mut [u8], var: usize, remaining: u8, emit: &mut impl FnMut(&[u8])) {
    if var + 1 == current.len() {
        current[var] = remaining;
        emit(current);
        return;
    }
    for head in (0..=remaining).rev() {
        current[var] = head;
        enumerate_degree(current, var + 1, remaining - head, emit);
    }
    current[var] = 0;
}

/// Handle to a cached jet configuration.
#[derive(Clone)]
pub struct JetConfig {
    inner: Arc<ConfigInner>,
}

impl JetConfig {
    /// Returns the shared configuration for `num_vars` variables truncated at
    /// `max_order`. Configurations are cached globally.
    ///
    /// # Errors
    /// `num_vars` must be even, at least 2 and at most [`MAX_VARS`];
    /// `max_order` must lie in `1..=MAX_ORDER`.
    pub fn get(num_vars: usize, max_order: usize) -> Result<JetConfig> {
        if num_vars < 2 || num_vars % 2 != 0 || num_vars > MAX_VARS {
            return Err(Error::ConfigMismatch(format!(
                "num_vars must be even and in 2..={MAX_VARS}, got {num_vars}"
            )));
        }
        if max_order == 0 || max_order > MAX_ORDER {
            return Err(Error::ConfigMismatch(format!(
                "max_order must be in 1..={MAX_ORDER}, got {max_order}"
            )));
        }
        static REGISTRY: OnceLock<Mutex<HashMap<(usize, usize), Arc<ConfigInner>>>> =
            OnceLock::new();
        let registry = REGISTRY.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = registry.lock().expect("jet config registry poisoned");
        let inner = guard
            .entry((num_vars, max_order))
            .or_insert_with(|| ConfigInner::build(num_vars, max_order))
            .clone();
        Ok(JetConfig { inner })
    }

    pub fn num_vars(&self) -> usize {
        self.inner.num_vars
    }

    pub fn max_order(&self) -> usize {
        self.inner.max_order
    }

    /// Number of monomials of total degree `<= order`.
    pub fn monomials_upto(&self, order: usize) -> usize {
        self.inner.count_upto[order.min(self.inner.max_order)]
    }

    /// Exponent tuple of the monomial at `idx`.
    pub fn exponent(&self, idx: usize) -> &[u8] {
        self.inner.exponent(idx)
    }

    fn index_of(&self, exponents: &[u8]) -> Option<usize> {
        if exponents.len() != self.inner.num_vars {
            return None;
        }
        self.inner.index_map.get(&pack(exponents)).map(|&i| i as usize)
    }

    fn same_as(&self, other: &JetConfig) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }
}

impl std::fmt::Debug for JetConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JetConfig")
            .field("num_vars", &self.inner.num_vars)
            .field("max_order", &self.inner.max_order)
            .finish()
    }
}

/// Truncated Taylor polynomial over scalar `T`.
#[derive(Clone)]
pub struct Jet<T: Real> {
    config: JetConfig,
    /// Coefficients of total degree above this are not stored.
    valid: usize,
    coeffs: Vec<T>,
}

impl<T: Real> Jet<T> {
    /// Constant jet: value with all derivatives zero, valid to full order.
    pub fn constant(config: &JetConfig, value: T) -> Jet<T> {
        let mut coeffs = vec![T::zero(); config.monomials_upto(config.max_order())];
        coeffs[0] = value;
        Jet { config: config.clone(), valid: config.max_order(), coeffs }
    }

    /// Lifts variable `var` at base value `value`: the seed `value + z_var`.
    ///
    /// # Errors
    /// `var` must be below `num_vars`.
    pub fn variable(config: &JetConfig, var: usize, value: T) -> Result<Jet<T>> {
        if var >= config.num_vars() {
            return Err(Error::ConfigMismatch(format!(
                "variable index {var} out of range for {} variables",
                config.num_vars()
            )));
        }
        let mut jet = Jet::constant(config, value);
        let mut e = vec![0u8; config.num_vars()];
        e[var] = 1;
        let idx = config.index_of(&e).expect("first order monomial exists");
        jet.coeffs[idx] = T::one();
        Ok(jet)
    }

    /// Builds a jet from explicit coefficients valid to `valid`.
    ///
    /// # Errors
    /// `coeffs` must have exactly one entry per monomial of degree `<= valid`.
    pub fn from_coefficients(config: &JetConfig, coeffs: Vec<T>, valid: usize) -> Result<Jet<T>> {
        if valid > config.max_order() {
            return Err(Error::ConfigMismatch(format!(
                "valid order {valid} exceeds max_order {}",
                config.max_order()
            )));
        }
        if coeffs.len() != config.monomials_upto(valid) {
            return Err(Error::ConfigMismatch(format!(
                "expected {} coefficients for valid order {valid}, got {}",
                config.monomials_upto(valid),
                coeffs.len()
            )));
        }
        Ok(Jet { config: config.clone(), valid, coeffs })
    }

    /// Value plus first order derivatives, valid to order 1. Used to inject
    /// externally computed quantities (for example quadrature results) into
    /// the jet pipeline.
    pub fn from_value_and_gradient(config: &JetConfig, value: T, gradient: &[T]) -> Result<Jet<T>> {
        if gradient.len() != config.num_vars() {
            return Err(Error::ConfigMismatch(format!(
                "gradient length {} does not match {} variables",
                gradient.len(),
                config.num_vars()
            )));
        }
        let mut coeffs = vec![T::zero(); config.monomials_upto(1)];
        coeffs[0] = value;
        let mut e = vec![0u8; config.num_vars()];
        for (var, g) in gradient.iter().enumerate() {
            e.fill(0);
            e[var] = 1;
            let idx = config.index_of(&e).expect("first order monomial exists");
            coeffs[idx] = *g;
        }
        Jet::from_coefficients(config, coeffs, 1)
    }

    pub fn config(&self) -> &JetConfig {
        &self.config
    }

    /// Highest total degree whose coefficients are trustworthy.
    pub fn valid_order(&self) -> usize {
        self.valid
    }

    /// Value of the underlying function at the base point.
    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    /// Taylor coefficient (mixed partial divided by the factorial of the
    /// multi-index) of the given monomial.
    ///
    /// # Errors
    /// Fails when the multi-index does not fit the configuration or when its
    /// total degree exceeds the valid order of this jet.
    pub fn coeff(&self, exponents: &[u8]) -> Result<T> {
        let degree: usize = exponents.iter().map(|&e| e as usize).sum();
        if degree > self.valid {
            return Err(Error::InsufficientOrder {
                requested: degree,
                required: degree,
                available: self.valid,
            });
        }
        let idx = self
            .config
            .index_of(exponents)
            .ok_or_else(|| Error::ConfigMismatch(format!("bad multi-index {exponents:?}")))?;
        Ok(self.coeffs[idx])
    }

    /// Actual mixed partial derivative for the multi-index (coefficient times
    /// the multi-index factorial).
    pub fn derivative(&self, exponents: &[u8]) -> Result<T> {
        let mut factorial = T::one();
        for &e in exponents {
            for k in 1..=e as usize {
                factorial = factorial * real_usize::<T>(k);
            }
        }
        Ok(self.coeff(exponents)? * factorial)
    }

    fn check_config(&self, other: &Jet<T>) -> Result<()> {
        if !self.config.same_as(&other.config) {
            return Err(Error::ConfigMismatch(format!(
                "operands built from different configs: ({}, {}) vs ({}, {})",
                self.config.num_vars(),
                self.config.max_order(),
                other.config.num_vars(),
                other.config.max_order()
            )));
        }
        Ok(())
    }

    fn truncated(&self, valid: usize) -> Jet<T> {
        let valid = valid.min(self.valid);
        Jet {
            config: self.config.clone(),
            valid,
            coeffs: self.coeffs[..self.config.monomials_upto(valid)].to_vec(),
        }
    }

    pub fn neg(&self) -> Jet<T> {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c = -*c;
        }
        out
    }

    pub fn scale(&self, factor: T) -> Jet<T> {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c = *c * factor;
        }
        out
    }

    pub fn add_scalar(&self, value: T) -> Jet<T> {
        let mut out = self.clone();
        out.coeffs[0] += value;
        out
    }

    pub fn add(&self, other: &Jet<T>) -> Result<Jet<T>> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Jet<T>) -> Result<Jet<T>> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Jet<T>, f: impl Fn(T, T) -> T) -> Result<Jet<T>> {
        self.check_config(other)?;
        let valid = self.valid.min(other.valid);
        let len = self.config.monomials_upto(valid);
        let mut coeffs = Vec::with_capacity(len);
        for i in 0..len {
            coeffs.push(f(self.coeffs[i], other.coeffs[i]));
        }
        Ok(Jet { config: self.config.clone(), valid, coeffs })
    }

    /// Truncated product. The result is valid to the minimum of the operand
    /// orders; coefficients beyond that are neither computed nor stored.
    pub fn mul(&self, other: &Jet<T>) -> Result<Jet<T>> {
        self.check_config(other)?;
        let target = self.valid.min(other.valid);
        let cfg = &self.config.inner;
        let mut out = vec![T::zero(); cfg.count_upto[target]];
        if let Some(table) = &cfg.pairs {
            for &(k, i, j) in &table.entries[..table.prefix[target]] {
                out[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
            }
        } else {
            let mut scratch = vec![0u8; cfg.num_vars];
            for d1 in 0..=target {
                for i in cfg.block(d1) {
                    let a = self.coeffs[i];
                    if a == T::zero() {
                        continue;
                    }
                    let ei = cfg.exponent(i).to_vec();
                    for d2 in 0..=(target - d1) {
                        for j in cfg.block(d2) {
                            let b = other.coeffs[j];
                            if b == T::zero() {
                                continue;
                            }
                            let ej = cfg.exponent(j);
                            for v in 0..cfg.num_vars {
                                scratch[v] = ei[v] + ej[v];
                            }
                            let k = cfg.index_map[&pack(&scratch)] as usize;
                            out[k] += a * b;
                        }
                    }
                }
            }
        }
        Ok(Jet { config: self.config.clone(), valid: target, coeffs: out })
    }

    /// Truncated quotient, solved degree by degree from `quotient * other =
    /// self`.
    ///
    /// # Errors
    /// [`Error::Domain`] when the divisor value vanishes.
    pub fn div(&self, other: &Jet<T>) -> Result<Jet<T>> {
        self.check_config(other)?;
        let b0 = other.coeffs[0];
        if b0 == T::zero() {
            return Err(Error::Domain { func: "div", value: 0.0 });
        }
        let target = self.valid.min(other.valid);
        let cfg = &self.config.inner;
        let len = cfg.count_upto[target];
        let mut quot = vec![T::zero(); len];
        quot[0] = self.coeffs[0] / b0;
        if let Some(table) = &cfg.pairs {
            for d in 1..=target {
                let range = table.prefix[d - 1]..table.prefix[d];
                // First fold in all known contributions of this degree block,
                // then divide by the divisor value; entries with a constant
                // left factor are exactly the unknowns being solved for.
                let lo = cfg.count_upto[d - 1];
                let hi = cfg.count_upto[d];
                let mut acc: Vec<T> = self.coeffs[lo..hi].to_vec();
                for &(k, i, j) in &table.entries[range] {
                    if i == 0 {
                        continue;
                    }
                    acc[k as usize - lo] -= other.coeffs[i as usize] * quot[j as usize];
                }
                for (offset, value) in acc.into_iter().enumerate() {
                    quot[lo + offset] = value / b0;
                }
            }
        } else {
            let mut scratch = vec![0u8; cfg.num_vars];
            for d in 1..=target {
                let lo = cfg.count_upto[d - 1];
                let hi = cfg.count_upto[d];
                let mut acc: Vec<T> = self.coeffs[lo..hi].to_vec();
                for d1 in 1..=d {
                    for i in cfg.block(d1) {
                        let b = other.coeffs[i];
                        if b == T::zero() {
                            continue;
                        }
                        let ei = cfg.exponent(i).to_vec();
                        for j in cfg.block(d - d1) {
                            let q = quot[j];
                            if q == T::zero() {
                                continue;
                            }
                            let ej = cfg.exponent(j);
                            for v in 0..cfg.num_vars {
                                scratch[v] = ei[v] + ej[v];
                            }
                            let k = cfg.index_map[&pack(&scratch)] as usize;
                            acc[k - lo] -= b * q;
                        }
                    }
                }
                for (offset, value) in acc.into_iter().enumerate() {
                    quot[lo + offset] = value / b0;
                }
            }
        }
        Ok(Jet { config: self.config.clone(), valid: target, coeffs: quot })
    }

    /// Formal partial derivative with respect to variable `var`. Lowers the
    /// valid order by one.
    ///
    /// # Errors
    /// Fails when the jet has no derivative information left (valid order 0)
    /// or `var` is out of range.
    pub fn partial(&self, var: usize) -> Result<Jet<T>> {
        if var >= self.config.num_vars() {
            return Err(Error::ConfigMismatch(format!(
                "variable index {var} out of range for {} variables",
                self.config.num_vars()
            )));
        }
        if self.valid == 0 {
            return Err(Error::InsufficientOrder { requested: 1, required: 1, available: 0 });
        }
        let cfg = &self.config.inner;
        let valid = self.valid - 1;
        let len = cfg.count_upto[valid];
        let mut out = vec![T::zero(); len];
        let mut scratch = vec![0u8; cfg.num_vars];
        for idx in 0..len {
            scratch.copy_from_slice(cfg.exponent(idx));
            scratch[var] += 1;
            let src = cfg.index_map[&pack(&scratch)] as usize;
            out[idx] = self.coeffs[src] * real_usize::<T>(scratch[var] as usize);
        }
        Ok(Jet { config: self.config.clone(), valid, coeffs: out })
    }

    /// Composes the univariate Taylor series `sum coeffs[k] w^k` with the
    /// nilpotent part `w = self - value(self)`. The series must be supplied
    /// in the same "derivative over factorial" convention the jets use.
    pub fn compose_series(&self, series: &[T]) -> Jet<T> {
        let order = self.valid;
        debug_assert!(series.len() > order, "series too short for composition");
        let mut w = self.clone();
        w.coeffs[0] = T::zero();
        let mut result = Jet::constant(&self.config, series[order]).truncated(order);
        for k in (0..order).rev() {
            result = result.mul(&w).expect("same config").add_scalar(series[k]);
        }
        result
    }

    fn unary(&self, series_at: impl Fn(T, usize) -> Result<Vec<T>>) -> Result<Jet<T>> {
        let series = series_at(self.coeffs[0], self.valid)?;
        Ok(self.compose_series(&series))
    }

    pub fn sqrt(&self) -> Result<Jet<T>> {
        self.unary(|x, order| {
            if x <= T::zero() {
                return Err(Error::Domain { func: "sqrt", value: x.to_f64().unwrap_or(f64::NAN) });
            }
            // c_k = C(1/2, k) x^{1/2 - k}
            let mut series = Vec::with_capacity(order + 1);
            let mut c = x.sqrt();
            series.push(c);
            let half = real::<T>(0.5);
            for k in 1..=order {
                let km1 = real_usize::<T>(k - 1);
                c = c * (half - km1) / (real_usize::<T>(k) * x);
                series.push(c);
            }
            Ok(series)
        })
    }

    pub fn exp(&self) -> Result<Jet<T>> {
        self.unary(|x, order| {
            let mut series = Vec::with_capacity(order + 1);
            let mut c = x.exp();
            series.push(c);
            for k in 1..=order {
                c = c / real_usize::<T>(k);
                series.push(c);
            }
            Ok(series)
        })
    }

    pub fn ln(&self) -> Result<Jet<T>> {
        self.unary(|x, order| {
            if x <= T::zero() {
                return Err(Error::Domain { func: "log", value: x.to_f64().unwrap_or(f64::NAN) });
            }
            let mut series = Vec::with_capacity(order + 1);
            series.push(x.ln());
            // c_k = (-1)^{k+1} / (k x^k)
            let mut power = T::one();
            for k in 1..=order {
                power = power * x;
                let sign = if k % 2 == 1 { T::one() } else { -T::one() };
                series.push(sign / (real_usize::<T>(k) * power));
            }
            Ok(series)
        })
    }

    pub fn sin(&self) -> Result<Jet<T>> {
        self.unary(|x, order| Ok(trig_series(x, order, true)))
    }

    pub fn cos(&self) -> Result<Jet<T>> {
        self.unary(|x, order| Ok(trig_series(x, order, false)))
    }

    /// Integer power by repeated squaring; negative exponents require a
    /// nonzero value.
    pub fn powi(&self, exponent: i64) -> Result<Jet<T>> {
        if exponent == 0 {
            return Ok(Jet::constant(&self.config, T::one()).truncated(self.valid));
        }
        let mut base = if exponent < 0 {
            Jet::constant(&self.config, T::one()).truncated(self.valid).div(self)?
        } else {
            self.clone()
        };
        let mut remaining = exponent.unsigned_abs();
        let mut acc: Option<Jet<T>> = None;
        while remaining > 0 {
            if remaining & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul(&base)?,
                });
            }
            remaining >>= 1;
            if remaining > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc.expect("nonzero exponent"))
    }

    /// Real power through the binomial series; requires a positive value.
    pub fn powf(&self, exponent: T) -> Result<Jet<T>> {
        self.unary(|x, order| {
            if x <= T::zero() {
                return Err(Error::Domain { func: "pow", value: x.to_f64().unwrap_or(f64::NAN) });
            }
            // c_k = r (r-1) .. (r-k+1) x^{r-k} / k!
            let mut series = Vec::with_capacity(order + 1);
            let mut c = x.powf(exponent);
            series.push(c);
            for k in 1..=order {
                let km1 = real_usize::<T>(k - 1);
                c = c * (exponent - km1) / (real_usize::<T>(k) * x);
                series.push(c);
            }
            Ok(series)
        })
    }
}

fn trig_series<T: Real>(x: T, order: usize, sine: bool) -> Vec<T> {
    let (s, c) = (x.sin(), x.cos());
    // Cycle of derivatives: sin, cos, -sin, -cos.
    let cycle = [s, c, -s, -c];
    let offset = if sine { 0 } else { 1 };
    let mut series = Vec::with_capacity(order + 1);
    let mut factorial = T::one();
    for k in 0..=order {
        if k > 0 {
            factorial = factorial * real_usize::<T>(k);
        }
        series.push(cycle[(k + offset) % 4] / factorial);
    }
    series
}

impl<T: Real> std::fmt::Debug for Jet<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Jet(vars={}, valid={}, value={:?})",
            self.config.num_vars(),
            self.valid,
            self.coeffs[0]
        )
    }
}

/// Mixed partial derivative of `f` at `point` by nested Richardson
/// extrapolated central differences; `orders[v]` is the derivative order in
/// variable `v`. Validation oracle for the jet engine, not a production path.
pub fn finite_difference_partial(
    f: &dyn Fn(&[f64]) -> f64,
    point: &[f64],
    orders: &[usize],
    step: f64,
) -> f64 {
    fn eval(f: &dyn Fn(&[f64]) -> f64, point: &[f64], orders: &[usize], step: f64) -> f64 {
        match orders.iter().position(|&o| o > 0) {
            None => f(point),
            Some(axis) => {
                let mut lower = orders.to_vec();
                lower[axis] -= 1;
                let central = |h: f64| {
                    let mut plus = point.to_vec();
                    plus[axis] += h;
                    let mut minus = point.to_vec();
                    minus[axis] -= h;
                    (eval(f, &plus, &lower, step) - eval(f, &minus, &lower, step)) / (2.0 * h)
                };
                let coarse = central(step);
                let fine = central(step / 2.0);
                (4.0 * fine - coarse) / 3.0
            }
        }
    }
    eval(f, point, orders, step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cfg(vars: usize, order: usize) -> JetConfig {
        JetConfig::get(vars, order).unwrap()
    }

    fn e(parts: &[u8]) -> Vec<u8> {
        parts.to_vec()
    }

    #[test]
    fn monomial_counts_match_binomials() {
        // C(vars + order, order) monomials of degree <= order.
        assert_eq!(cfg(4, 3).monomials_upto(3), 35);
        assert_eq!(cfg(6, 8).monomials_upto(8), 3003);
        assert_eq!(cfg(2, 5).monomials_upto(5), 21);
        assert_eq!(cfg(6, 10).monomials_upto(10), 8008);
    }

    #[test]
    fn config_rejects_bad_shapes() {
        assert!(JetConfig::get(3, 4).is_err());
        assert!(JetConfig::get(0, 4).is_err());
        assert!(JetConfig::get(4, 0).is_err());
        assert!(JetConfig::get(4, MAX_ORDER + 1).is_err());
    }

    #[test]
    fn lifted_variable_has_unit_first_derivative() {
        let c = cfg(4, 2);
        let z0 = Jet::<f64>::variable(&c, 0, 2.0).unwrap();
        assert_eq!(z0.value(), 2.0);
        assert_eq!(z0.coeff(&e(&[1, 0, 0, 0])).unwrap(), 1.0);
        assert_eq!(z0.coeff(&e(&[0, 1, 0, 0])).unwrap(), 0.0);
        assert_eq!(z0.coeff(&e(&[2, 0, 0, 0])).unwrap(), 0.0);
    }

    #[test]
    fn geometric_series_from_division() {
        // 1 / (1 + z0) = 1 - z0 + z0^2 - z0^3 at order 3.
        let c = cfg(2, 3);
        let one = Jet::<f64>::constant(&c, 1.0);
        let denom = Jet::<f64>::variable(&c, 0, 1.0).unwrap();
        let q = one.div(&denom).unwrap();
        assert_relative_eq!(q.coeff(&e(&[0, 0])).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(q.coeff(&e(&[1, 0])).unwrap(), -1.0, epsilon = 1e-14);
        assert_relative_eq!(q.coeff(&e(&[2, 0])).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(q.coeff(&e(&[3, 0])).unwrap(), -1.0, epsilon = 1e-14);
    }

    #[test]
    fn sqrt_series_matches_binomial_expansion() {
        // sqrt(1 + z0) = 1 + z0/2 - z0^2/8 at order 2.
        let c = cfg(2, 2);
        let a = Jet::<f64>::variable(&c, 0, 1.0).unwrap();
        let r = a.sqrt().unwrap();
        assert_relative_eq!(r.coeff(&e(&[0, 0])).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(r.coeff(&e(&[1, 0])).unwrap(), 0.5, epsilon = 1e-14);
        assert_relative_eq!(r.coeff(&e(&[2, 0])).unwrap(), -0.125, epsilon = 1e-14);
    }

    #[test]
    fn log_of_exp_is_identity() {
        let c = cfg(4, 5);
        let mut a = Jet::<f64>::variable(&c, 0, 0.3).unwrap();
        a = a.add(&Jet::variable(&c, 2, 0.0).unwrap().scale(0.5)).unwrap();
        let round = a.exp().unwrap().ln().unwrap();
        for idx in 0..c.monomials_upto(round.valid_order()) {
            let exps = c.exponent(idx).to_vec();
            assert_relative_eq!(
                round.coeff(&exps).unwrap(),
                a.coeff(&exps).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn sin_cos_pythagoras_holds_jetwise() {
        let c = cfg(2, 6);
        let a = Jet::<f64>::variable(&c, 0, 0.7).unwrap();
        let s = a.sin().unwrap();
        let q = s.mul(&s).unwrap().add(&a.cos().unwrap().mul(&a.cos().unwrap()).unwrap()).unwrap();
        assert_relative_eq!(q.value(), 1.0, epsilon = 1e-14);
        for idx in 1..c.monomials_upto(q.valid_order()) {
            assert!(q.coeffs[idx].abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_lowers_valid_order_until_error() {
        let c = cfg(2, 2);
        let a = Jet::<f64>::variable(&c, 0, 1.5).unwrap();
        let d1 = a.partial(0).unwrap();
        assert_eq!(d1.valid_order(), 1);
        assert_eq!(d1.value(), 1.0);
        let d2 = d1.partial(0).unwrap();
        assert_eq!(d2.valid_order(), 0);
        let err = d2.partial(0).unwrap_err();
        assert!(matches!(err, Error::InsufficientOrder { available: 0, .. }));
    }

    #[test]
    fn coefficient_extraction_past_validity_reports_orders() {
        let c = cfg(2, 3);
        let a = Jet::<f64>::variable(&c, 0, 1.0).unwrap();
        let d = a.partial(0).unwrap(); // valid 2
        let err = d.coeff(&e(&[3, 0])).unwrap_err();
        match err {
            Error::InsufficientOrder { required, available, .. } => {
                assert_eq!(required, 3);
                assert_eq!(available, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn config_mismatch_is_rejected() {
        let a = Jet::<f64>::constant(&cfg(2, 3), 1.0);
        let b = Jet::<f64>::constant(&cfg(4, 3), 1.0);
        assert!(matches!(a.add(&b), Err(Error::ConfigMismatch(_))));
    }

    #[test]
    fn division_by_zero_value_is_domain_error() {
        let c = cfg(2, 3);
        let one = Jet::<f64>::constant(&c, 1.0);
        let z = Jet::<f64>::variable(&c, 0, 0.0).unwrap();
        assert!(matches!(one.div(&z), Err(Error::Domain { func: "div", .. })));
        assert!(matches!(z.powi(-2), Err(Error::Domain { .. })));
        assert!(matches!(z.sqrt(), Err(Error::Domain { func: "sqrt", .. })));
        assert!(matches!(z.ln(), Err(Error::Domain { func: "log", .. })));
        assert!(matches!(z.powf(0.5), Err(Error::Domain { func: "pow", .. })));
    }

    #[test]
    fn integer_powers_match_repeated_products() {
        let c = cfg(2, 4);
        let a = Jet::<f64>::variable(&c, 0, 1.3).unwrap().add_scalar(0.2);
        let p3 = a.powi(3).unwrap();
        let manual = a.mul(&a).unwrap().mul(&a).unwrap();
        for idx in 0..c.monomials_upto(4) {
            assert_relative_eq!(p3.coeffs[idx], manual.coeffs[idx], epsilon = 1e-13);
        }
        let pm2 = a.powi(-2).unwrap();
        let inv = Jet::constant(&c, 1.0).div(&a).unwrap();
        let manual = inv.mul(&inv).unwrap();
        for idx in 0..c.monomials_upto(4) {
            assert_relative_eq!(pm2.coeffs[idx], manual.coeffs[idx], epsilon = 1e-12);
        }
        // Fractional power agrees with sqrt on positive values.
        let half = a.powf(0.5).unwrap();
        let root = a.sqrt().unwrap();
        for idx in 0..c.monomials_upto(4) {
            assert_relative_eq!(half.coeffs[idx], root.coeffs[idx], epsilon = 1e-12);
        }
    }

    #[test]
    fn jet_derivatives_match_finite_differences_for_exp_sin() {
        // Engine half of the validation gate: mixed partials of
        // f(u, v) = exp(u) sin(v) up to total order 5 against Richardson
        // extrapolated central differences at step 1e-2, evaluated through
        // the double-double oracle so the comparison is truncation limited.
        let c = cfg(2, 5);
        let mut rng = crate::rng::Pcg32::new(2024);
        for _ in 0..50 {
            let u = rng.uniform_in(-1.0, 1.0);
            let v = rng.uniform_in(-1.0, 1.0);
            let ju = Jet::<f64>::variable(&c, 0, u).unwrap();
            let jv = Jet::<f64>::variable(&c, 1, v).unwrap();
            let jet = ju.exp().unwrap().mul(&jv.sin().unwrap()).unwrap();
            for a in 0..=5usize {
                for b in 0..=(5 - a) {
                    let exact = jet.derivative(&[a as u8, b as u8]).unwrap();
                    let fd = crate::oracle::exp_sin_mixed_partial_fd([u, v], [a, b], 1e-2);
                    let scale = exact.abs().max(1.0);
                    assert!(
                        (exact - fd).abs() / scale < 1e-5,
                        "partial ({a},{b}) at ({u},{v}): jet {exact} vs fd {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn plain_f64_finite_differences_agree_at_low_order() {
        // The generic f64 oracle is roundoff limited at high order; check it
        // where it is trustworthy.
        let c = cfg(2, 3);
        let f = |p: &[f64]| (p[0] * p[1]).exp() + p[1].cos();
        let (u, v) = (0.4, -0.6);
        let ju = Jet::<f64>::variable(&c, 0, u).unwrap();
        let jv = Jet::<f64>::variable(&c, 1, v).unwrap();
        let jet = ju.mul(&jv).unwrap().exp().unwrap().add(&jv.cos().unwrap()).unwrap();
        for a in 0..=2usize {
            for b in 0..=(2 - a) {
                let exact = jet.derivative(&[a as u8, b as u8]).unwrap();
                let fd = finite_difference_partial(&f, &[u, v], &[a, b], 1e-3);
                assert!(
                    (exact - fd).abs() / exact.abs().max(1.0) < 1e-7,
                    "partial ({a},{b}): jet {exact} vs fd {fd}"
                );
            }
        }
    }

    /// Dense polynomial on 4 variables of degree <= 3, the brute force model
    /// the jet arithmetic is checked against.
    #[derive(Clone, Debug)]
    struct Poly {
        coeffs: Vec<(Vec<u8>, f64)>,
    }

    impl Poly {
        fn eval_jet(&self, c: &JetConfig, at: &[f64]) -> Jet<f64> {
            let mut acc = Jet::constant(c, 0.0);
            for (exps, coef) in &self.coeffs {
                let mut term = Jet::constant(c, *coef);
                for (var, &p) in exps.iter().enumerate() {
                    for _ in 0..p {
                        let z = Jet::variable(c, var, at[var]).unwrap();
                        term = term.mul(&z).unwrap();
                    }
                }
                acc = acc.add(&term).unwrap();
            }
            acc
        }

        fn eval(&self, at: &[f64]) -> f64 {
            self.coeffs
                .iter()
                .map(|(exps, coef)| {
                    coef * exps.iter().enumerate().map(|(v, &p)| at[v].powi(p as i32)).product::<f64>()
                })
                .sum()
        }
    }

    fn arb_poly() -> impl Strategy<Value = Poly> {
        let term = (proptest::collection::vec(0u8..2, 4), -2.0f64..2.0);
        proptest::collection::vec(term, 1..6).prop_map(|coeffs| Poly { coeffs })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn product_of_polynomials_matches_pointwise(p in arb_poly(), q in arb_poly()) {
            let c = cfg(4, 6);
            let at = [0.3, -0.7, 1.1, 0.4];
            let jp = p.eval_jet(&c, &at);
            let jq = q.eval_jet(&c, &at);
            let prod = jp.mul(&jq).unwrap();
            prop_assert!((prod.value() - p.eval(&at) * q.eval(&at)).abs() < 1e-10);
            // Product rule: d(pq) = p dq + q dp, checked on every variable.
            for var in 0..4 {
                let lhs = prod.partial(var).unwrap();
                let rhs = jp.partial(var).unwrap().mul(&jq).unwrap()
                    .add(&jq.partial(var).unwrap().mul(&jp).unwrap()).unwrap();
                for idx in 0..c.monomials_upto(lhs.valid_order().min(rhs.valid_order())) {
                    prop_assert!((lhs.coeffs[idx] - rhs.coeffs[idx]).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn division_inverts_multiplication(p in arb_poly(), q in arb_poly()) {
            let c = cfg(4, 5);
            let at = [0.3, -0.7, 1.1, 0.4];
            let jq = q.eval_jet(&c, &at).add_scalar(4.0); // keep the value away from zero
            let jp = p.eval_jet(&c, &at);
            let back = jp.div(&jq).unwrap().mul(&jq).unwrap();
            for idx in 0..c.monomials_upto(back.valid_order()) {
                prop_assert!((back.coeffs[idx] - jp.coeffs[idx]).abs() < 1e-9);
            }
        }

        #[test]
        fn chain_rule_through_exp(p in arb_poly()) {
            let c = cfg(4, 4);
            let at = [0.1, -0.2, 0.5, -0.4];
            let g = p.eval_jet(&c, &at);
            let eg = g.exp().unwrap();
            for var in 0..4 {
                let lhs = eg.partial(var).unwrap();
                let rhs = eg.mul(&g.partial(var).unwrap()).unwrap();
                for idx in 0..c.monomials_upto(lhs.valid_order().min(rhs.valid_order())) {
                    prop_assert!((lhs.coeffs[idx] - rhs.coeffs[idx]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn hashed_fallback_matches_pair_table() {
        // Wide configurations skip the pair table; both multiplication and
        // division must agree with the table path exactly.
        let tabled = cfg(4, 5);
        let mut stripped = ConfigInner::build(4, 5);
        Arc::get_mut(&mut stripped).unwrap().pairs = None;
        let hashed = JetConfig { inner: stripped };

        let build = |c: &JetConfig| -> (Jet<f64>, Jet<f64>) {
            let z0 = Jet::<f64>::variable(c, 0, 0.4).unwrap();
            let z1 = Jet::<f64>::variable(c, 1, -0.7).unwrap();
            let z3 = Jet::<f64>::variable(c, 3, 1.2).unwrap();
            let a = z0.mul(&z1).unwrap().add(&z3.sin().unwrap()).unwrap().add_scalar(2.0);
            let b = z1.exp().unwrap().add(&z0.mul(&z0).unwrap()).unwrap();
            (a, b)
        };
        let (a_t, b_t) = build(&tabled);
        let (a_h, b_h) = build(&hashed);
        let prod_t = a_t.mul(&b_t).unwrap();
        let prod_h = a_h.mul(&b_h).unwrap();
        let quot_t = a_t.div(&b_t).unwrap();
        let quot_h = a_h.div(&b_h).unwrap();
        for idx in 0..tabled.monomials_upto(5) {
            assert_eq!(prod_t.coeffs[idx], prod_h.coeffs[idx]);
            assert!((quot_t.coeffs[idx] - quot_h.coeffs[idx]).abs() < 1e-15);
        }
    }

    #[test]
    fn from_value_and_gradient_round_trips() {
        let c = cfg(4, 6);
        let j = Jet::<f64>::from_value_and_gradient(&c, 2.5, &[1.0, -2.0, 3.0, 0.5]).unwrap();
        assert_eq!(j.valid_order(), 1);
        assert_eq!(j.value(), 2.5);
        assert_eq!(j.coeff(&e(&[0, 1, 0, 0])).unwrap(), -2.0);
        // Arithmetic on low order jets stays at the lowest validity.
        let k = j.mul(&j).unwrap();
        assert_eq!(k.valid_order(), 1);
        assert_eq!(k.value(), 6.25);
    }
}
