//! Random problem generation, the identity and convergence suite, and
//! structured check results.

mod algebra;
mod family;
mod ladder;
mod random;
mod suite;

pub use algebra::{
    algebra_defects, brownian_square_defect, ito_isometry_defect, martingale_defect, AlgebraDefects,
};
pub use family::{
    check_budget, dense_bytes, grade, reduced_lyapunov_path, reduced_riccati_path,
    reduction_defect, ScalarFamily, MAX_DENSE_MODES, MEMORY_BUDGET,
};
pub use ladder::{
    convergence_study, family_point, ladder, smooth_control, smooth_probes, substep_row,
    LadderPoint, OrderRow, OrderTable, EXACT_FLOOR,
};
pub use random::{
    cell_rng, random_adapted, random_controls, random_left_mul, random_problem, RandomScales,
    Structure, RNG_ALGORITHM,
};
pub use suite::{
    ladder_checks, ladder_results, problem_checks, problem_seeds, run_suite, CheckResult, Mutation,
    SuiteConfig, Tolerances,
};
