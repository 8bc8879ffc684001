//! The attack laboratory: secret recovery from compromised neighbors via a
//! discrete-log oracle and a linear system, plus exact and Monte Carlo
//! measurements of how often that attack succeeds.

pub mod linalg;
pub mod probability;
pub mod recovery;

pub use linalg::{MatFp, SolveOutcome};
pub use probability::{
    estimate_sp, exact_sp_small, impersonation_experiment, sample_star, ExactCensus,
    ImpersonationStats, SpEstimate, StarLeaf, StarSample,
};
pub use recovery::{
    live_authenticate, recover_secret, sample_candidate, AttackSystem, RecoveryOutcome,
    RecoveryReport,
};
