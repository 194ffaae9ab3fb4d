//! Convex dissipation potentials, their conjugates and stress selection.

mod conjugate;
mod hypotheses;
mod model;
mod profile;
mod tensor;

pub use hypotheses::{
    validate_hypotheses, validate_hypotheses_seeded, HypothesisReport, HypothesisVerdict,
    DEFAULT_HYPOTHESIS_SEED,
};
pub use model::{ConjugateMode, RheologyKind, RheologyModel, RheologyParams, GAP_TOL_ABS, GAP_TOL_REL};
pub use tensor::{upper_len, upper_pairs, SymTensor};
