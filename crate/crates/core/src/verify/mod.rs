//! Monte Carlo checks of the closed-form laws, with k·stderr + bias budget
//! acceptance, and the suite runner behind `levylab verify`.

mod checks;
mod estimate;
mod suite;

pub use checks::*;
pub use estimate::{MCEstimate, Summary};
pub use suite::{resolve_checks, run_suite, SimSettings, SuiteReport, SuiteSpec, CHECK_NAMES};
