//! Distribution-shift experiments: closed-form quadratic pools, dataset
//! mixing, fine-tuning trials and loss interpolation.

mod interp;
mod mix;
mod quadratic;
mod trials;

pub use interp::{alpha_grid, interpolation_curve, pearson, CurvePoint, LossSurface, NeuralSurface};
pub use mix::{mix_datasets, MixSpec};
pub use quadratic::{
    delta_bound, delta_exact, delta_first_order, exact_minimizer, random_problem, FDivergenceSpec, QuadInstance,
    QuadraticShiftProblem,
};
pub use trials::{
    default_grid, fine_tune, linear_fit, run_quadratic_trials, run_shift_trials, FinetuneConfig, FinetuneOutcome,
    LinearFit, ShiftTrialRecord, ShiftTrialReport,
};
