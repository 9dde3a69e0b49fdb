//! Finite Clifford probability space generated by one Fermion increment per
//! time step.
//!
//! The mode `j` (1-based) carries the increment `gamma_j = W(t_j) - W(t_{j-1})`
//! with `gamma_j gamma_k + gamma_k gamma_j = 2 delta_jk dt`. Elements are
//! stored in the orthonormal basis `e_S = dt^{-|S|/2} gamma_S`, keyed by the
//! bitmask of `S` (bit `j-1` set iff `j` is in `S`). With this ordering the
//! filtration subspace `H_k` is exactly the first `2^k` coefficients, and the
//! state `m` reads the coefficient of the empty monomial.

mod superop;

pub(crate) use superop::matrix_to_json;
pub use superop::{mul_superop, Adjointness, Side, SuperOperator, HERMITIAN_TOL, PSD_TOL};

use std::ops::{Add, Mul, Neg, Sub};

use serde_json::{Map, Value};

use crate::error::{QslqError, Result};
use crate::linalg::{c, dot, Mat, Vect, C64, ONE, ZERO};

/// Relative mass allowed outside `H_k` before an element counts as
/// non-adapted.
pub const ADAPTED_TOL: f64 = 1e-10;

/// Largest supported mode count; `2^MAX_MODES` coefficients per element.
pub const MAX_MODES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CliffordSpace {
    modes: usize,
    dt: f64,
}

impl CliffordSpace {
    pub fn new(modes: usize, dt: f64) -> Result<Self> {
        if modes > MAX_MODES {
            return Err(QslqError::Invalid(format!(
                "mode count {modes} exceeds {MAX_MODES}"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(QslqError::Invalid(format!(
                "step length {dt} must be positive"
            )));
        }
        Ok(Self { modes, dt })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        1 << self.modes
    }

    /// `dim H_k = 2^k`.
    pub fn filtration_dim(&self, k: usize) -> Result<usize> {
        self.check_index(k)?;
        Ok(1 << k)
    }

    pub(crate) fn check_index(&self, k: usize) -> Result<()> {
        if k > self.modes {
            return Err(QslqError::FiltrationIndex {
                index: k,
                modes: self.modes,
            });
        }
        Ok(())
    }

    /// `dt^{-|S|/2}`: the factor turning the raw blade `gamma_S` into `e_S`.
    pub fn normalization(&self, mask: usize) -> f64 {
        self.dt.powf(-(mask.count_ones() as f64) / 2.0)
    }

    pub fn zero(&self) -> CliffordElement {
        CliffordElement {
            space: *self,
            coeffs: Vect::zeros(self.dim()),
        }
    }

    pub fn scalar(&self, value: C64) -> CliffordElement {
        let mut e = self.zero();
        e.coeffs[0] = value;
        e
    }

    pub fn one(&self) -> CliffordElement {
        self.scalar(ONE)
    }

    /// Orthonormal basis vector `e_S`.
    pub fn basis(&self, mask: usize) -> CliffordElement {
        let mut e = self.zero();
        e.coeffs[mask] = ONE;
        e
    }

    /// Raw blade `gamma_S = dt^{|S|/2} e_S`.
    pub fn blade(&self, mask: usize) -> CliffordElement {
        let mut e = self.zero();
        e.coeffs[mask] = c(1.0 / self.normalization(mask));
        e
    }

    /// The increment `gamma_j`, `1 <= j <= N`.
    pub fn generator(&self, j: usize) -> Result<CliffordElement> {
        if j == 0 || j > self.modes {
            return Err(QslqError::Invalid(format!(
                "generator index {j} outside 1..={}",
                self.modes
            )));
        }
        Ok(self.blade(1 << (j - 1)))
    }

    /// Fermion Brownian motion at node `k`: `W(t_k) = sum_{j<=k} gamma_j`.
    pub fn brownian(&self, k: usize) -> Result<CliffordElement> {
        self.check_index(k)?;
        let mut w = self.zero();
        let s = self.dt.sqrt();
        for j in 0..k {
            w.coeffs[1 << j] = c(s);
        }
        Ok(w)
    }

    pub fn element(&self, coeffs: Vect) -> Result<CliffordElement> {
        if coeffs.len() != self.dim() {
            return Err(QslqError::Dimension(format!(
                "expected {} coefficients, got {}",
                self.dim(),
                coeffs.len()
            )));
        }
        Ok(CliffordElement {
            space: *self,
            coeffs,
        })
    }

    fn same(&self, other: &CliffordSpace) -> bool {
        self.modes == other.modes && self.dt.to_bits() == other.dt.to_bits()
    }
}

/// Result of multiplying two raw blades.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BladeProduct {
    pub sign: f64,
    pub scale: f64,
    pub mask: usize,
}

/// Sign of `e_S e_T = sign * e_{S xor T}`: the parity of the number of pairs
/// `(i in S, j in T)` with `i > j`.
pub fn onb_sign(s: usize, t: usize) -> f64 {
    let mut swaps = 0u32;
    let mut rest = t;
    while rest != 0 {
        let j = rest.trailing_zeros();
        swaps += (s >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    if swaps.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `gamma_S gamma_T = sign * dt^{|S and T|} * gamma_{S xor T}`.
pub fn blade_product(s: usize, t: usize, dt: f64) -> BladeProduct {
    BladeProduct {
        sign: onb_sign(s, t),
        scale: dt.powi((s & t).count_ones() as i32),
        mask: s ^ t,
    }
}

/// `(-1)^{|S|(|S|-1)/2}`: reversal sign of a monomial under `*`.
pub fn reversal_sign(mask: usize) -> f64 {
    let k = mask.count_ones();
    if (k * (k.saturating_sub(1)) / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// An element of `L^2` of the Clifford algebra, in the `e_S` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CliffordElement {
    space: CliffordSpace,
    coeffs: Vect,
}

impl CliffordElement {
    pub fn space(&self) -> &CliffordSpace {
        &self.space
    }

    pub fn coeffs(&self) -> &Vect {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut Vect {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vect {
        self.coeffs
    }

    fn check_space(&self, other: &CliffordElement) -> Result<()> {
        if !self.space.same(&other.space) {
            return Err(QslqError::Dimension(format!(
                "elements live in different spaces (N={}, dt={}) vs (N={}, dt={})",
                self.space.modes, self.space.dt, other.space.modes, other.space.dt
            )));
        }
        Ok(())
    }

    /// The trace state `m(a)`.
    pub fn mean(&self) -> C64 {
        self.coeffs[0]
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::vec_norm(&self.coeffs)
    }

    pub fn mul(&self, other: &CliffordElement) -> Result<CliffordElement> {
        self.check_space(other)?;
        let mut out = Vect::zeros(self.space.dim());
        for (s, &a) in self.coeffs.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            for (t, &b) in other.coeffs.iter().enumerate() {
                if b == ZERO {
                    continue;
                }
                out[s ^ t] += a * b * onb_sign(s, t);
            }
        }
        Ok(CliffordElement {
            space: self.space,
            coeffs: out,
        })
    }

    pub fn adjoint(&self) -> CliffordElement {
        let coeffs = Vect::from_shape_fn(self.coeffs.len(), |s| {
            self.coeffs[s].conj() * reversal_sign(s)
        });
        CliffordElement {
            space: self.space,
            coeffs,
        }
    }

    /// `<a, b> = m(a* b)`.
    pub fn inner(&self, other: &CliffordElement) -> Result<C64> {
        self.check_space(other)?;
        Ok(dot(&self.coeffs, &other.coeffs))
    }

    /// Conditional expectation onto `H_k`.
    pub fn cond_expect(&self, k: usize) -> Result<CliffordElement> {
        self.space.check_index(k)?;
        let mut out = self.clone();
        out.coeffs
            .slice_mut(ndarray::s![(1usize << k)..])
            .fill(ZERO);
        Ok(out)
    }

    /// Grading automorphism: odd monomials change sign.
    pub fn parity(&self) -> CliffordElement {
        let coeffs = Vect::from_shape_fn(self.coeffs.len(), |s| {
            if s.count_ones() % 2 == 0 {
                self.coeffs[s]
            } else {
                -self.coeffs[s]
            }
        });
        CliffordElement {
            space: self.space,
            coeffs,
        }
    }

    /// l2 mass of the coefficients outside `H_k`.
    pub fn mass_outside(&self, k: usize) -> f64 {
        mass_outside(&self.coeffs, k)
    }

    pub fn is_adapted(&self, k: usize) -> bool {
        is_adapted(&self.coeffs, k)
    }

    /// `a * gamma_j`.
    pub fn right_mul_generator(&self, j: usize) -> CliffordElement {
        CliffordElement {
            space: self.space,
            coeffs: right_mul_generator(&self.coeffs, j, self.space.dt),
        }
    }

    pub fn scale(&self, factor: C64) -> CliffordElement {
        CliffordElement {
            space: self.space,
            coeffs: &self.coeffs * factor,
        }
    }

    /// Debug dump: `{"0x<mask>": [re, im], ...}` over nonzero coefficients.
    pub fn to_json(&self) -> Value {
        let mut map = Map::new();
        for (s, z) in self.coeffs.iter().enumerate() {
            if *z != ZERO {
                map.insert(format!("0x{s:x}"), serde_json::json!([z.re, z.im]));
            }
        }
        Value::Object(map)
    }

    pub fn from_json(space: &CliffordSpace, value: &Value) -> Result<CliffordElement> {
        let map = value
            .as_object()
            .ok_or_else(|| QslqError::Invalid("element dump must be a JSON object".into()))?;
        let mut e = space.zero();
        for (key, pair) in map {
            let hex = key
                .strip_prefix("0x")
                .ok_or_else(|| QslqError::Invalid(format!("bad mask key {key:?}")))?;
            let mask = usize::from_str_radix(hex, 16)
                .map_err(|_| QslqError::Invalid(format!("bad mask key {key:?}")))?;
            if mask >= space.dim() {
                return Err(QslqError::Dimension(format!(
                    "mask {key} outside a {}-mode space",
                    space.modes
                )));
            }
            let arr = pair
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| QslqError::Invalid(format!("value for {key} must be [re, im]")))?;
            let re = arr[0].as_f64();
            let im = arr[1].as_f64();
            match (re, im) {
                (Some(re), Some(im)) => e.coeffs[mask] = C64::new(re, im),
                _ => return Err(QslqError::Invalid(format!("non-numeric value for {key}"))),
            }
        }
        Ok(e)
    }
}

impl Add for &CliffordElement {
    type Output = CliffordElement;
    fn add(self, rhs: &CliffordElement) -> CliffordElement {
        assert!(
            self.space.same(&rhs.space),
            "adding elements of different spaces"
        );
        CliffordElement {
            space: self.space,
            coeffs: &self.coeffs + &rhs.coeffs,
        }
    }
}

impl Sub for &CliffordElement {
    type Output = CliffordElement;
    fn sub(self, rhs: &CliffordElement) -> CliffordElement {
        assert!(
            self.space.same(&rhs.space),
            "subtracting elements of different spaces"
        );
        CliffordElement {
            space: self.space,
            coeffs: &self.coeffs - &rhs.coeffs,
        }
    }
}

impl Neg for &CliffordElement {
    type Output = CliffordElement;
    fn neg(self) -> CliffordElement {
        self.scale(c(-1.0))
    }
}

impl Mul<C64> for &CliffordElement {
    type Output = CliffordElement;
    fn mul(self, rhs: C64) -> CliffordElement {
        self.scale(rhs)
    }
}

pub(crate) fn mass_outside(v: &Vect, k: usize) -> f64 {
    v.iter()
        .skip(1usize << k)
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn is_adapted(v: &Vect, k: usize) -> bool {
    if k >= usize::BITS as usize || (1usize << k) >= v.len() {
        return true;
    }
    mass_outside(v, k) <= ADAPTED_TOL * crate::linalg::vec_norm(v)
}

pub(crate) fn check_adapted(v: &Vect, k: usize) -> Result<()> {
    if is_adapted(v, k) {
        Ok(())
    } else {
        Err(QslqError::NotAdapted {
            step: k,
            mass: mass_outside(v, k),
        })
    }
}

/// Sign of `e_S e_j` for the single generator `j` (1-based).
#[inline]
fn generator_sign(s: usize, j: usize) -> f64 {
    if (s >> j).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Coefficients of `v * gamma_j` (1-based `j`).
pub(crate) fn right_mul_generator(v: &Vect, j: usize, dt: f64) -> Vect {
    let bit = 1usize << (j - 1);
    let s = dt.sqrt();
    let mut out = Vect::zeros(v.len());
    for (mask, z) in v.iter().enumerate() {
        out[mask ^ bit] = *z * (s * generator_sign(mask, j));
    }
    out
}

/// Row-wise version of [`right_mul_generator`]: every column of `m` is
/// multiplied on the right by `gamma_j`.
pub(crate) fn right_mul_generator_mat(m: &Mat, j: usize, dt: f64) -> Mat {
    let bit = 1usize << (j - 1);
    let s = dt.sqrt();
    let mut out = Mat::zeros(m.dim());
    for (mask, row) in m.rows().into_iter().enumerate() {
        let f = s * generator_sign(mask, j);
        out.row_mut(mask ^ bit).assign(&row.mapv(|z| z * f));
    }
    out
}

/// `int f dW` over steps `from..to`: `sum_k f_k gamma_{k+1}` with `f_k` in
/// `H_k` checked.
pub fn stochastic_integral(
    f: &[CliffordElement],
    from: usize,
    to: usize,
) -> Result<CliffordElement> {
    if from > to || to > f.len() {
        return Err(QslqError::Invalid(format!(
            "integration range {from}..{to} outside a path of {} steps",
            f.len()
        )));
    }
    let Some(first) = f.first() else {
        return Err(QslqError::Invalid("empty integrand".into()));
    };
    let space = first.space;
    if to > space.modes {
        return Err(QslqError::FiltrationIndex {
            index: to,
            modes: space.modes,
        });
    }
    let mut acc = space.zero();
    for k in from..to {
        first.check_space(&f[k])?;
        check_adapted(&f[k].coeffs, k)?;
        acc.coeffs += &right_mul_generator(&f[k].coeffs, k + 1, space.dt);
    }
    Ok(acc)
}

/// `a = mean + sum_k kernel[k-1] * gamma_k` with `kernel[k-1]` in `H_{k-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleRepr {
    pub mean: C64,
    pub kernel: Vec<CliffordElement>,
}

impl MartingaleRepr {
    pub fn reconstruct(&self, space: &CliffordSpace) -> Result<CliffordElement> {
        let mut out = space.scalar(self.mean);
        for (i, c_k) in self.kernel.iter().enumerate() {
            out.coeffs += &right_mul_generator(&c_k.coeffs, i + 1, space.dt);
        }
        Ok(out)
    }
}

/// Exact discrete martingale representation: monomials are grouped by their
/// largest index `k` and `e_S = e_{S \ k} e_k`.
pub fn martingale_repr(a: &CliffordElement) -> MartingaleRepr {
    let space = a.space;
    let inv = 1.0 / space.dt.sqrt();
    let kernel = (1..=space.modes)
        .map(|k| {
            let lo = 1usize << (k - 1);
            let mut ck = space.zero();
            for s in lo..(lo << 1) {
                ck.coeffs[s - lo] = a.coeffs[s] * inv;
            }
            ck
        })
        .collect();
    MartingaleRepr {
        mean: a.mean(),
        kernel,
    }
}

/// Splits `v` in `H_{k+1}` as `E_k v + Y gamma_{k+1}` and returns `Y`.
pub(crate) fn increment_kernel(v: &Vect, k: usize, dt: f64) -> Vect {
    let lo = 1usize << k;
    let inv = 1.0 / dt.sqrt();
    let mut y = Vect::zeros(v.len());
    for s in lo..(lo << 1).min(v.len()) {
        y[s - lo] = v[s] * inv;
    }
    y
}

/// Column-wise [`increment_kernel`].
pub(crate) fn increment_kernel_mat(m: &Mat, k: usize, dt: f64) -> Mat {
    let lo = 1usize << k;
    let inv = 1.0 / dt.sqrt();
    let mut y = Mat::zeros(m.dim());
    for s in lo..(lo << 1).min(m.nrows()) {
        y.row_mut(s - lo).assign(&m.row(s).mapv(|z| z * inv));
    }
    y
}

pub(crate) fn truncate_rows(m: &mut Mat, k: usize) {
    let lo = 1usize << k;
    if lo < m.nrows() {
        m.slice_mut(ndarray::s![lo.., ..]).fill(ZERO);
    }
}

pub(crate) fn truncate(v: &mut Vect, k: usize) {
    let lo = 1usize << k;
    if lo < v.len() {
        v.slice_mut(ndarray::s![lo..]).fill(ZERO);
    }
}
