use serde::{Deserialize, Serialize};

use super::{onb_sign, CliffordElement, CliffordSpace};
use crate::error::{QslqError, Result};
use crate::linalg::{adj, fro_norm, hermitian_defect, min_eig, Mat, ONE, ZERO};

/// Tolerance on `|M - M^*|` for the Hermitian flag.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Most negative eigenvalue accepted under the PSD flag.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adjointness {
    None,
    Hermitian,
    Psd,
}

/// Linear map on `L^2` in the `e_S` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    matrix: Mat,
    kind: Adjointness,
}

impl SuperOperator {
    /// Wraps `matrix`, validating the requested flag. Hermitian and PSD
    /// inputs are symmetrized after the check.
    pub fn new(mut matrix: Mat, kind: Adjointness) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(QslqError::Dimension(format!(
                "superoperator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if kind != Adjointness::None {
            let scale = fro_norm(&matrix).max(1.0);
            let defect = hermitian_defect(&matrix);
            if defect > HERMITIAN_TOL * scale {
                return Err(QslqError::NotHermitian {
                    what: "superoperator flagged Hermitian".into(),
                    defect,
                });
            }
            crate::linalg::symmetrize(&mut matrix);
        }
        if kind == Adjointness::Psd {
            let lo = min_eig(&matrix);
            if lo < -PSD_TOL {
                return Err(QslqError::NotPositive {
                    what: "superoperator flagged PSD".into(),
                    min_eig: lo,
                });
            }
        }
        Ok(Self { matrix, kind })
    }

    pub fn general(matrix: Mat) -> Result<Self> {
        Self::new(matrix, Adjointness::None)
    }

    pub fn hermitian(matrix: Mat) -> Result<Self> {
        Self::new(matrix, Adjointness::Hermitian)
    }

    pub fn psd(matrix: Mat) -> Result<Self> {
        Self::new(matrix, Adjointness::Psd)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: Mat::eye(dim),
            kind: Adjointness::Psd,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            matrix: Mat::zeros((dim, dim)),
            kind: Adjointness::Psd,
        }
    }

    /// Orthogonal projection onto `H_k`.
    pub fn projection(space: &CliffordSpace, k: usize) -> Result<Self> {
        let lo = space.filtration_dim(k)?;
        let matrix = Mat::from_shape_fn((space.dim(), space.dim()), |(i, j)| {
            if i == j && i < lo {
                ONE
            } else {
                ZERO
            }
        });
        Ok(Self {
            matrix,
            kind: Adjointness::Psd,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn kind(&self) -> Adjointness {
        self.kind
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat {
        self.matrix
    }

    pub fn apply(&self, x: &CliffordElement) -> Result<CliffordElement> {
        if x.space().dim() != self.dim() {
            return Err(QslqError::Dimension(format!(
                "operator of size {} applied to element of size {}",
                self.dim(),
                x.space().dim()
            )));
        }
        x.space().element(self.matrix.dot(x.coeffs()))
    }

    pub fn adjoint(&self) -> SuperOperator {
        Self {
            matrix: adj(&self.matrix),
            kind: self.kind,
        }
    }

    pub fn compose(&self, other: &SuperOperator) -> Result<SuperOperator> {
        if self.dim() != other.dim() {
            return Err(QslqError::Dimension(format!(
                "cannot compose sizes {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(Self {
            matrix: self.matrix.dot(&other.matrix),
            kind: Adjointness::None,
        })
    }

    /// Dense dump: rows of `[re, im]` pairs.
    pub fn to_json(&self) -> serde_json::Value {
        matrix_to_json(&self.matrix)
    }
}

pub(crate) fn matrix_to_json(m: &Mat) -> serde_json::Value {
    serde_json::Value::Array(
        m.rows()
            .into_iter()
            .map(|row| {
                serde_json::Value::Array(
                    row.iter()
                        .map(|z| serde_json::json!([z.re, z.im]))
                        .collect(),
                )
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// The map `xi -> b xi` (left) or `xi -> xi b` (right). Flagged Hermitian
/// when `b` is self-adjoint, since the trace makes both maps symmetric then.
pub fn mul_superop(b: &CliffordElement, side: Side) -> SuperOperator {
    let dim = b.space().dim();
    let mut matrix = Mat::zeros((dim, dim));
    for (t, &bt) in b.coeffs().iter().enumerate() {
        if bt == ZERO {
            continue;
        }
        for s in 0..dim {
            let sign = match side {
                Side::Left => onb_sign(t, s),
                Side::Right => onb_sign(s, t),
            };
            matrix[(s ^ t, s)] += bt * sign;
        }
    }
    let star = b.adjoint();
    let scale = b.norm().max(1.0);
    let kind = if (&star - b).norm() <= HERMITIAN_TOL * scale {
        crate::linalg::symmetrize(&mut matrix);
        Adjointness::Hermitian
    } else {
        Adjointness::None
    };
    SuperOperator { matrix, kind }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, C64};

    #[test]
    fn multiplication_by_one_is_identity() {
        let sp = CliffordSpace::new(3, 0.5).unwrap();
        let op = mul_superop(&sp.one(), Side::Left);
        assert_eq!(op.matrix(), &Mat::eye(8));
        assert_eq!(mul_superop(&sp.one(), Side::Right).matrix(), &Mat::eye(8));
    }

    #[test]
    fn right_generator_squares_to_dt() {
        let sp = CliffordSpace::new(3, 0.5).unwrap();
        for j in 1..=3 {
            let r = mul_superop(&sp.generator(j).unwrap(), Side::Right);
            assert_eq!(r.kind(), Adjointness::Hermitian);
            let sq = r.matrix().dot(r.matrix());
            assert!(fro_norm(&(sq - Mat::eye(8) * c(0.5))) < 1e-14);
        }
    }

    #[test]
    fn flags_are_validated() {
        let mut m = Mat::eye(2);
        m[(0, 1)] = c(1.0);
        assert!(matches!(
            SuperOperator::hermitian(m),
            Err(QslqError::NotHermitian { .. })
        ));
        let neg = Mat::eye(2) * c(-1.0);
        assert!(matches!(
            SuperOperator::psd(neg.clone()),
            Err(QslqError::NotPositive { .. })
        ));
        assert!(SuperOperator::hermitian(neg).is_ok());
        assert!(SuperOperator::general(Mat::zeros((2, 3))).is_err());
    }

    #[test]
    fn projection_zeroes_future() {
        let sp = CliffordSpace::new(3, 0.5).unwrap();
        let p = SuperOperator::projection(&sp, 1).unwrap();
        let a = &sp.basis(0b011).scale(C64::new(0.0, 1.0)) + &sp.basis(0b001);
        assert_eq!(p.apply(&a).unwrap(), a.cond_expect(1).unwrap());
    }
}
