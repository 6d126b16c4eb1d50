//! Bundle of space-form isometry groups realized inside `GL(n+1)`.

pub mod algebra;
pub mod checks;
pub mod expm;
pub mod group;
pub mod reductive;

pub use algebra::{
    algebra_basis, bracket_closure_residual, bracket_closure_residual_of, commutator, embed,
    eta_form, invariance_residual, AlgebraBasis, AlgebraElement, QuadraticForm,
};
pub use checks::{
    closure_check, deformed_bracket_check, section_check, two_letter_word, BracketReport,
    ClosureReport, SectionReport,
};
pub use expm::expm;
pub use group::{
    complement_and_slice_check, complement_basis, group_membership_residual,
    membership_equations_residual, section, CheckReport, GroupWord, SliceElement, SLICE_MARGIN,
};
pub use reductive::{PairElement, ReductivePair};
