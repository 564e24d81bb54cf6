//! Exact symbolic engine for acyclic sign-skew-symmetric cluster algebras with
//! principal coefficients.

pub mod exchange;
pub mod laurent;
pub mod seed;
pub mod unfolding;
pub mod verify;

pub use exchange::{ExchangeError, ExchangeMatrix, MutationSequence};
pub use laurent::{Grading, Homogeneity, LaurentError, LaurentPoly, Monomial, Var};
pub use seed::{g_recurrence_step, GMatrix, GVector, Seed, SeedError, SeedKey};
pub use unfolding::{Covering, GroupAction, IceQuiver, UnfoldingError};
