//! Seeded random problem instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::clifford::{onb_sign, SuperOperator};
use crate::error::{QslqError, Result};
use crate::linalg::{adj, c, Mat, Vect, C64};
use crate::lq::ProblemSpec;
use crate::qsde::{CoefficientPath, TimeGrid};
use crate::riccati::Weights;

/// Name of the generator recorded in every report.
pub const RNG_ALGORITHM: &str = "ChaCha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    /// `A, C, M, G` multiples of the identity; random `B, D, R`.
    Scalar,
    /// Left multiplications by random adapted elements.
    Filtration,
    /// As `Filtration`, with `range(A_k), range(C_k)` inside `H_k`.
    Strict,
}

/// Size and shape knobs for [`random_problem`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomScales {
    pub drift: f64,
    pub noise: f64,
    pub control: f64,
    pub state_weight: f64,
    pub terminal_weight: f64,
    /// `rho` in `R = r^* r + rho I`.
    pub control_floor: f64,
    pub horizon: f64,
}

impl Default for RandomScales {
    fn default() -> Self {
        Self {
            drift: 0.5,
            noise: 0.5,
            control: 0.5,
            state_weight: 0.5,
            terminal_weight: 0.7,
            control_floor: 0.5,
            horizon: 1.0,
        }
    }
}

/// Generator for the cell `(modes, m)` under `seed`, on stream `purpose`:
/// one ChaCha8 stream per use, so problems and samples can be drawn in any
/// order.
pub fn cell_rng(seed: u64, modes: usize, m: usize, purpose: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((modes as u64) << 48) | ((m as u64) << 32) | purpose as u64);
    rng
}

pub(crate) fn gauss(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Left multiplication by a random element of the algebra generated by the
/// first `k` modes, normalized so that its operator norm is at most `scale`.
/// Left multiplications commute with the right action of the noise, which is
/// what keeps the operator Riccati equation consistent with the scheme.
pub fn random_left_mul(rng: &mut ChaCha8Rng, dim: usize, k: usize, scale: f64) -> Mat {
    let lo = 1usize << k;
    let alpha: Vec<C64> = (0..lo).map(|_| gauss(rng)).collect();
    let l1: f64 = alpha.iter().map(|a| a.norm()).sum();
    let mut m = Mat::zeros((dim, dim));
    for (t, &a) in alpha.iter().enumerate() {
        let a = a * (scale / l1);
        for s in 0..dim {
            m[(s ^ t, s)] += a * onb_sign(t, s);
        }
    }
    m
}

fn random_control_map(rng: &mut ChaCha8Rng, dim: usize, m: usize, k: usize, scale: f64) -> Mat {
    let lo = 1usize << k;
    let mut out = Mat::zeros((dim, m));
    for i in 0..lo {
        for j in 0..m {
            out[(i, j)] = gauss(rng) * (scale / (lo as f64).sqrt());
        }
    }
    out
}

fn gram(s: &Mat) -> Mat {
    adj(s).dot(s)
}

fn project_rows(m: &mut Mat, k: usize) {
    crate::clifford::truncate_rows(m, k);
}

/// Seeded random instance with PSD weights and filtration-compatible
/// coefficients.
pub fn random_problem(
    modes: usize,
    m: usize,
    seed: u64,
    structure: Structure,
    scales: &RandomScales,
) -> Result<ProblemSpec> {
    if modes < 2 || m < 1 {
        return Err(QslqError::Invalid(format!(
            "need N >= 2 and m >= 1, got N={modes}, m={m}"
        )));
    }
    let grid = TimeGrid::new(0.0, scales.horizon, modes)?;
    let dim = 1usize << modes;
    let mut rng = cell_rng(seed, modes, m, 0);
    let mut coeffs = CoefficientPath::zero(&grid, m);
    coeffs.strict = structure == Structure::Strict;
    let mut wm = Vec::with_capacity(modes);
    let mut wr = Vec::with_capacity(modes);
    let (sa, sc, sq) = match structure {
        Structure::Scalar => (
            gauss(&mut rng).re * scales.drift,
            gauss(&mut rng).re * scales.noise,
            rng.random::<f64>() * scales.state_weight,
        ),
        _ => (0.0, 0.0, 0.0),
    };
    for k in 0..modes {
        let (a, cm, mw) = match structure {
            Structure::Scalar => (
                Mat::eye(dim) * c(sa),
                Mat::eye(dim) * c(sc),
                Mat::eye(dim) * c(sq),
            ),
            Structure::Filtration | Structure::Strict => {
                let mut a = random_left_mul(&mut rng, dim, k, scales.drift);
                let mut cm = random_left_mul(&mut rng, dim, k, scales.noise);
                if structure == Structure::Strict {
                    project_rows(&mut a, k);
                    project_rows(&mut cm, k);
                }
                let s = random_left_mul(&mut rng, dim, k, scales.state_weight.sqrt());
                (a, cm, gram(&s))
            }
        };
        coeffs.a[k] = SuperOperator::general(a)?;
        coeffs.c[k] = SuperOperator::general(cm)?;
        coeffs.b[k] = random_control_map(&mut rng, dim, m, k, scales.control);
        coeffs.d[k] = random_control_map(&mut rng, dim, m, k, scales.control);
        wm.push(SuperOperator::psd(mw)?);
        let r = Mat::from_shape_fn((m, m), |_| gauss(&mut rng)) * c(1.0 / (m as f64).sqrt());
        wr.push(gram(&r) + Mat::eye(m) * c(scales.control_floor));
    }
    let g = match structure {
        Structure::Scalar => Mat::eye(dim) * c(rng.random::<f64>() * scales.terminal_weight),
        _ => gram(&random_left_mul(
            &mut rng,
            dim,
            modes,
            scales.terminal_weight.sqrt(),
        )),
    };
    let space = grid.space()?;
    let eta = space.scalar(gauss(&mut rng) + c(1.0));
    let spec = ProblemSpec {
        grid,
        coeffs,
        weights: Weights {
            m: wm,
            r: wr,
            g: SuperOperator::psd(g)?,
        },
        eta,
        seed: Some(seed),
        provenance: format!("{RNG_ALGORITHM} seed={seed} N={modes} m={m} structure={structure:?}"),
    };
    spec.validate()?;
    Ok(spec)
}

/// Random adapted element of `H_k` with unit expected norm.
pub fn random_adapted(rng: &mut ChaCha8Rng, dim: usize, k: usize) -> Vect {
    let lo = 1usize << k;
    let s = 1.0 / (lo as f64).sqrt();
    Vect::from_shape_fn(dim, |i| {
        if i < lo {
            gauss(rng) * s
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Random control path with `O(1)` entries.
pub fn random_controls(rng: &mut ChaCha8Rng, steps: usize, m: usize, scale: f64) -> Vec<Vect> {
    (0..steps)
        .map(|_| Vect::from_shape_fn(m, |_| gauss(rng) * scale))
        .collect()
}
