//! Jordan-Wigner representation of the Clifford model as dense `2^N x 2^N`
//! matrices, built independently of the library's sign tables.
//!
//! `e_j = Z x ... x Z x X x I x ... x I` (X on site `j`), `e_S` is the
//! ordered product over `S`, and the trace state is the normalized trace.

#![allow(dead_code)]

use qslq::linalg::{Mat, C64};
use qslq::CliffordElement;

fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Mat::from_shape_fn((ar * br, ac * bc), |(i, j)| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

fn pauli(name: char) -> Mat {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    match name {
        'I' => Mat::from_shape_vec((2, 2), vec![o, z, z, o]).unwrap(),
        'X' => Mat::from_shape_vec((2, 2), vec![z, o, o, z]).unwrap(),
        'Z' => Mat::from_shape_vec((2, 2), vec![o, z, z, -o]).unwrap(),
        _ => unreachable!(),
    }
}

pub struct JordanWigner {
    pub modes: usize,
    /// `e_1 .. e_N`.
    pub gens: Vec<Mat>,
    /// `Z x ... x Z`, implementing the grading.
    pub parity: Mat,
}

impl JordanWigner {
    pub fn new(modes: usize) -> Self {
        let gens = (0..modes)
            .map(|j| {
                let mut m = Mat::eye(1);
                for site in 0..modes {
                    let p = if site < j {
                        'Z'
                    } else if site == j {
                        'X'
                    } else {
                        'I'
                    };
                    m = kron(&m, &pauli(p));
                }
                m
            })
            .collect();
        let mut parity = Mat::eye(1);
        for _ in 0..modes {
            parity = kron(&parity, &pauli('Z'));
        }
        Self {
            modes,
            gens,
            parity,
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.modes
    }

    /// `e_S` as an ordered product, lowest index first.
    pub fn monomial(&self, mask: usize) -> Mat {
        let mut m = Mat::eye(self.dim());
        for j in 0..self.modes {
            if mask >> j & 1 == 1 {
                m = m.dot(&self.gens[j]);
            }
        }
        m
    }

    pub fn rep(&self, a: &CliffordElement) -> Mat {
        let mut out = Mat::zeros((self.dim(), self.dim()));
        for (s, z) in a.coeffs().iter().enumerate() {
            if z.norm_sqr() > 0.0 {
                out = out + self.monomial(s) * *z;
            }
        }
        out
    }

    pub fn trace_state(&self, m: &Mat) -> C64 {
        m.diag().sum() / self.dim() as f64
    }

    /// Conditional expectation onto the algebra of `e_1 .. e_k`: those
    /// operators act on the first `k` sites only, so this is the normalized
    /// partial trace over the remaining sites, tensored with the identity.
    pub fn cond_expect(&self, m: &Mat, k: usize) -> Mat {
        let inner = 1usize << (self.modes - k);
        let outer = 1usize << k;
        let mut out = Mat::zeros((self.dim(), self.dim()));
        for a in 0..outer {
            for b in 0..outer {
                let mut tr = C64::new(0.0, 0.0);
                for r in 0..inner {
                    tr += m[(a * inner + r, b * inner + r)];
                }
                tr /= inner as f64;
                for r in 0..inner {
                    out[(a * inner + r, b * inner + r)] = tr;
                }
            }
        }
        out
    }
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn dagger(m: &Mat) -> Mat {
    m.t().mapv(|z| z.conj())
}
