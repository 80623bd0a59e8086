//! Proper, agnostic learning of univariate log-concave densities.

// Negated comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod constants;
pub mod dp;
pub mod error;
pub mod families;
pub mod grid;
pub mod interval_error;
pub mod nonproper;
pub mod oracle;
pub mod proper_fit;
pub mod pwfunc;
pub mod pwl_approx;
pub mod robust_stats;
pub mod scalar;

pub use bench::{run_scenario, BenchRow, Scenario};
pub use constants::{Constants, DiscreteAccounting};
pub use dp::{shortest_path, shortest_path_fit, DpResult, EdgeWeights, OracleWeights, TableWeights};
pub use error::{Error, Result};
pub use families::{tv_to_reference, verify_lc_facts, Contaminated, Family, Noise};
pub use grid::{build_grid, FitGrid};
pub use nonproper::{learn_pwl, LearnerConfig};
pub use oracle::{brute_force_best, riemann_l1, TinyInstance};
pub use proper_fit::{fit_proper, learn_logconcave, recommended_samples, FitReport};
pub use pwfunc::io::{from_json, to_json};
pub use pwfunc::{
    check_log_concave, l1_distance, tv_distance, AnyDensity, Density, DomainKind, IntegerCodedLevels, Piecewise,
    PiecewiseExpDensity, PiecewiseLinearDensity,
};
pub use pwl_approx::{pwl_approximate, LcOracle};
pub use robust_stats::{robust_location_scale, RobustMoments};
pub use scalar::Scalar;

pub type PwlDensity = PiecewiseLinearDensity<f64>;
pub type PwlDensityF32 = PiecewiseLinearDensity<f32>;
pub type PwExpDensity = PiecewiseExpDensity<f64>;
pub type PwExpDensityF32 = PiecewiseExpDensity<f32>;
