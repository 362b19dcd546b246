//! Set objectives: diversity, the polychromic score, set formation and the
//! factor validator.

mod objective;
mod sets;
mod validate;

pub use objective::{diversity, f_poly, mean_return_objective, score_set, DiversityKind, SetObjective};
pub use sets::{binomial, form_sets, SetSample};
pub use validate::{action_tuples, validate_polychromic, ValidationMode, ValidationReport};
