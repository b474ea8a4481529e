//! Universal classical-quantum channel codes at desk scale.
//!
//! Builds the Schur-Weyl universal state, conditional-type states and a
//! channel-independent threshold decoder, then evaluates them exactly on
//! small tensor-power spaces.

pub mod channel;
pub mod code;
pub mod combinatorics;
pub mod error;
pub mod limits;
pub mod operator;
pub mod random;
pub mod schur_weyl;
pub mod verify;

pub use channel::{Channel, ExponentOptions, ExponentReport};
pub use code::{CPolicy, Codebook, ErrorReport, UniversalDecoder};
pub use combinatorics::{ConditionalType, Sequence, TypeVector, YoungDiagram};
pub use error::{Error, Result};
pub use limits::Limits;
pub use operator::{DensityOperator, HermitianOperator, Permutation};
