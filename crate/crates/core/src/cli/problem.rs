//! Problem sources accepted by `solve-riccati` and `simulate`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clifford::{Adjointness, CliffordElement, SuperOperator};
use crate::error::{QslqError, Result};
use crate::linalg::{Mat, Vect, C64};
use crate::lq::ProblemSpec;
use crate::qsde::{CoefficientPath, TimeGrid};
use crate::riccati::Weights;
use crate::verify::{random_problem, RandomScales, ScalarFamily, Structure};

/// Dense complex matrix as rows of `[re, im]` pairs.
pub type DenseMatrix = Vec<Vec<[f64; 2]>>;
/// Dense complex vector as `[re, im]` pairs.
pub type DenseVector = Vec<[f64; 2]>;

/// A problem either generated from parameters or given densely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSource {
    ScalarFamily {
        modes: usize,
        #[serde(default)]
        family: ScalarFamily,
    },
    Random {
        modes: usize,
        controls: usize,
        /// Falls back to the run seed.
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default = "default_structure")]
        structure: Structure,
        #[serde(default)]
        scales: RandomScales,
    },
    Dense(DenseProblem),
}

fn default_structure() -> Structure {
    Structure::Filtration
}

impl ProblemSource {
    pub fn build(&self, run_seed: u64) -> Result<ProblemSpec> {
        match self {
            ProblemSource::ScalarFamily { modes, family } => family.problem(*modes),
            ProblemSource::Random {
                modes,
                controls,
                seed,
                structure,
                scales,
            } => random_problem(
                *modes,
                *controls,
                seed.unwrap_or(run_seed),
                *structure,
                scales,
            ),
            ProblemSource::Dense(d) => d.to_spec(),
        }
    }

    /// Mode count, known without building anything.
    pub fn modes(&self) -> usize {
        match self {
            ProblemSource::ScalarFamily { modes, .. } | ProblemSource::Random { modes, .. } => {
                *modes
            }
            ProblemSource::Dense(d) => d.modes,
        }
    }
}

/// Every coefficient written out in the `e_S` basis. `A, C` are taken as
/// general maps, `M, G` must be PSD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseProblem {
    pub t0: f64,
    pub t_end: f64,
    pub modes: usize,
    pub control_dim: usize,
    pub a: Vec<DenseMatrix>,
    pub b: Vec<DenseMatrix>,
    pub c: Vec<DenseMatrix>,
    pub d: Vec<DenseMatrix>,
    pub m: Vec<DenseMatrix>,
    pub r: Vec<DenseMatrix>,
    pub g: DenseMatrix,
    /// Initial state as a `"0x<mask>": [re, im]` map.
    pub eta: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    pub drift_source: Option<Vec<DenseVector>>,
    #[serde(default)]
    pub noise_source: Option<Vec<DenseVector>>,
    #[serde(default)]
    pub strict: bool,
}

fn to_mat(rows: &DenseMatrix, what: &str) -> Result<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(QslqError::Dimension(format!("{what}: ragged rows")));
    }
    Ok(Mat::from_shape_fn((nrows, ncols), |(i, j)| {
        let [re, im] = rows[i][j];
        C64::new(re, im)
    }))
}

fn from_mat(m: &Mat) -> DenseMatrix {
    m.rows()
        .into_iter()
        .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

fn to_vect(v: &DenseVector) -> Vect {
    v.iter().map(|[re, im]| C64::new(*re, *im)).collect()
}

fn from_vect(v: &Vect) -> DenseVector {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn ops(list: &[DenseMatrix], what: &str, kind: Adjointness) -> Result<Vec<SuperOperator>> {
    list.iter()
        .enumerate()
        .map(|(k, m)| SuperOperator::new(to_mat(m, &format!("{what}[{k}]"))?, kind))
        .collect()
}

fn mats(list: &[DenseMatrix], what: &str) -> Result<Vec<Mat>> {
    list.iter()
        .enumerate()
        .map(|(k, m)| to_mat(m, &format!("{what}[{k}]")))
        .collect()
}

impl DenseProblem {
    pub fn to_spec(&self) -> Result<ProblemSpec> {
        crate::verify::check_budget(self.modes)?;
        let grid = TimeGrid::new(self.t0, self.t_end, self.modes)?;
        let coeffs = CoefficientPath {
            a: ops(&self.a, "a", Adjointness::None)?,
            b: mats(&self.b, "b")?,
            c: ops(&self.c, "c", Adjointness::None)?,
            d: mats(&self.d, "d")?,
            f: self
                .drift_source
                .as_ref()
                .map(|v| v.iter().map(to_vect).collect()),
            g: self
                .noise_source
                .as_ref()
                .map(|v| v.iter().map(to_vect).collect()),
            control_dim: self.control_dim,
            strict: self.strict,
        };
        let weights = Weights {
            m: ops(&self.m, "m", Adjointness::Psd)?,
            r: mats(&self.r, "r")?,
            g: SuperOperator::psd(to_mat(&self.g, "g")?)?,
        };
        let eta = CliffordElement::from_json(
            &grid.space()?,
            &serde_json::to_value(&self.eta).map_err(json_err)?,
        )?;
        let spec = ProblemSpec {
            grid,
            coeffs,
            weights,
            eta,
            seed: None,
            provenance: "dense problem file".into(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &ProblemSpec) -> Self {
        let eta = spec
            .eta
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm_sqr() > 0.0)
            .map(|(s, z)| (format!("0x{s:x}"), [z.re, z.im]))
            .collect();
        let sup = |list: &[SuperOperator]| list.iter().map(|op| from_mat(op.matrix())).collect();
        let plain = |list: &[Mat]| list.iter().map(from_mat).collect();
        let src = |v: &Option<Vec<Vect>>| v.as_ref().map(|v| v.iter().map(from_vect).collect());
        Self {
            t0: spec.grid.t0(),
            t_end: spec.grid.t_end(),
            modes: spec.steps(),
            control_dim: spec.control_dim(),
            a: sup(&spec.coeffs.a),
            b: plain(&spec.coeffs.b),
            c: sup(&spec.coeffs.c),
            d: plain(&spec.coeffs.d),
            m: sup(&spec.weights.m),
            r: plain(&spec.weights.r),
            g: from_mat(spec.weights.g.matrix()),
            eta,
            drift_source: src(&spec.coeffs.f),
            noise_source: src(&spec.coeffs.g),
            strict: spec.coeffs.strict,
        }
    }
}

fn json_err(e: serde_json::Error) -> QslqError {
    QslqError::Invalid(e.to_string())
}
