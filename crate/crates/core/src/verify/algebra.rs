//! Exactness checks of the discrete Clifford model.

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::random::random_adapted;
use crate::clifford::{martingale_repr, stochastic_integral, CliffordElement, CliffordSpace};
use crate::error::Result;
use crate::linalg::{c, ONE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlgebraDefects {
    /// `max ||gamma_i gamma_j + gamma_j gamma_i - 2 delta_ij dt||`.
    pub car: f64,
    /// `max |m(ab) - m(ba)|` over the sampled pairs.
    pub trace: f64,
    /// Norm and multiplicativity defect of the parity automorphism.
    pub parity: f64,
    /// `|m(1) - 1|`.
    pub unit: f64,
}

impl AlgebraDefects {
    pub fn max(&self) -> f64 {
        self.car.max(self.trace).max(self.parity).max(self.unit)
    }
}

/// CAR relations over all generator pairs plus trace and parity checks on
/// `samples` random pairs.
pub fn algebra_defects(
    space: &CliffordSpace,
    rng: &mut ChaCha8Rng,
    samples: usize,
) -> Result<AlgebraDefects> {
    let n = space.modes();
    let dim = space.dim();
    let gens: Vec<CliffordElement> = (1..=n).map(|j| space.generator(j)).collect::<Result<_>>()?;
    let mut car = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let ab = gens[i].mul(&gens[j])?;
            let ba = gens[j].mul(&gens[i])?;
            let want = if i == j {
                space.scalar(c(2.0 * space.dt()))
            } else {
                space.zero()
            };
            car = car.max((&(&ab + &ba) - &want).norm());
        }
    }
    let mut trace = 0.0f64;
    let mut parity = 0.0f64;
    for _ in 0..samples {
        let a = space.element(random_adapted(rng, dim, n))?;
        let b = space.element(random_adapted(rng, dim, n))?;
        let ab = a.mul(&b)?;
        trace = trace.max((ab.mean() - b.mul(&a)?.mean()).norm());
        let pa = a.parity();
        parity = parity
            .max((pa.norm() - a.norm()).abs())
            .max((&pa.parity() - &a).norm())
            .max((&ab.parity() - &pa.mul(&b.parity())?).norm());
    }
    Ok(AlgebraDefects {
        car,
        trace,
        parity,
        unit: (space.one().mean() - ONE).norm(),
    })
}

/// `max_k ||W(t_k)^2 - t_k||`.
pub fn brownian_square_defect(space: &CliffordSpace) -> Result<f64> {
    let mut worst = 0.0f64;
    for k in 0..=space.modes() {
        let w = space.brownian(k)?;
        let want = space.scalar(c(k as f64 * space.dt()));
        worst = worst.max((&w.mul(&w)? - &want).norm());
    }
    Ok(worst)
}

/// Relative isometry defect `| ||int f dW||^2 - sum ||f_k||^2 dt | / sum ||f_k||^2 dt`
/// for a random adapted integrand.
pub fn ito_isometry_defect(space: &CliffordSpace, rng: &mut ChaCha8Rng) -> Result<f64> {
    let n = space.modes();
    let f: Vec<CliffordElement> = (0..n)
        .map(|k| space.element(random_adapted(rng, space.dim(), k)))
        .collect::<Result<_>>()?;
    let integral = stochastic_integral(&f, 0, n)?;
    let quad: f64 = f.iter().map(|fk| fk.norm().powi(2) * space.dt()).sum();
    Ok((integral.norm().powi(2) - quad).abs() / quad)
}

/// Round-trip error of the martingale representation of a random element.
pub fn martingale_defect(space: &CliffordSpace, rng: &mut ChaCha8Rng) -> Result<f64> {
    let a = space.element(random_adapted(rng, space.dim(), space.modes()))?;
    let back = martingale_repr(&a).reconstruct(space)?;
    Ok((&back - &a).norm())
}
