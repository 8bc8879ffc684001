//! Topology-authenticated key establishment over elliptic curves.
//!
//! A certification authority assigns every node of a planned network graph a
//! pair of secret vectors over `F_p` and, per outbound arrow, a published pair
//! of curve points. Two nodes that are neighbors in the graph can then derive
//! a shared secret from one ephemeral message, seal traffic with authenticated
//! encryption, and a master node can broadcast to a provisioned cluster under
//! a single key. The `attacklab` module replays the known secret-recovery
//! attack (two compromised neighbors plus a discrete-log oracle feeding a
//! linear system) and measures its success probability.
//!
//! Everything is sized for desk-scale parameters: moduli fit in a machine
//! word, the discrete-log oracle is guarded exhaustive search, and curve
//! discovery is exhaustive enumeration. None of this is hardened against
//! side channels; do not ship it anywhere near production keys.

pub mod algebra;
pub mod attacklab;
pub mod authority;
pub mod error;
pub mod files;
pub mod fixtures;
pub mod session;
pub mod topology;

pub use error::{Error, Result};
