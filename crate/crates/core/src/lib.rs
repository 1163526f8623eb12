//! Finite-scale diagnostics for modulus-modulated Wijsman convergence of
//! sequences of closed sets.
//!
//! * [`modulus`]: modulus functions, axiom checks and the compatibility
//!   estimators `phi_hat` / `phi_theta_hat`.
//! * [`metric_sets`]: closed sets of `R^d`, point-to-set distances and set
//!   sequences.
//! * [`diagnostics`]: statistical, Cesàro, lacunary and uniform-integrability
//!   traces over a witness set, and converged-at-scale verdicts.
//! * [`constructions`]: generators for the separating sequences.
//! * [`reproduce`]: scripted end-to-end suites, one per theorem.

pub mod cli;
pub mod constructions;
pub mod diagnostics;
pub mod error;
pub mod lacunary;
pub mod lambert;
pub mod metric_sets;
pub mod modulus;
pub mod reproduce;

pub use error::{Error, Result};
pub use lacunary::{LacunarySchedule, ScheduleRule};
pub use metric_sets::{dist, gap, ClosedSet, Point, SetSequence};
pub use modulus::{make_builtin, Builtin, ModulusFunction};
