//! Discrete minimization of `J(u) = ∫ ½|∇u|² − F(x, u)` over fields with
//! prescribed total mass, with numerical checks of the structural
//! inequalities behind existence of minimizers.
//!
//! * [`grid`]: periodic box and spectral calculus
//! * [`field`]: vector fields, mass projection, dilation, lattice shifts, splitting
//! * [`nonlin`]: nonlinearity families and the sampled assumption checker
//! * [`energy`]: functionals, gradients, multiplier, Gagliardo–Nirenberg checks
//! * [`flow`]: normalized gradient flow
//! * [`ccdiag`]: concentration function, trichotomy classifier, lemma verifiers
//! * [`cli`]: configuration, file formats and batch commands

pub mod ccdiag;
pub mod cli;
pub mod energy;
pub mod error;
pub mod field;
pub mod flow;
pub mod grid;
pub mod nonlin;

pub use error::{Error, Result};
pub use field::{SplitPair, VectorField};
pub use grid::{Grid, GridSpec, ScalarField};
pub use nonlin::{AssumptionConstants, NonlinearitySpec};
