//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across the toolkit, from field arithmetic up
/// to wire-format parsing.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    // -- algebra --
    #[error("inversion or division by zero in F_{modulus}")]
    ZeroInverse { modulus: u64 },
    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),
    #[error("point is not on the curve")]
    InvalidPoint,
    #[error("target point is not in the subgroup generated by the base")]
    NotInSubgroup,
    #[error("discrete-log oracle refused: order {order} exceeds the search guard {guard}")]
    OracleRefused { order: u64, guard: u64 },
    #[error("degenerate constraint: coefficient vector is zero")]
    DegenerateConstraint,
    #[error("no sample satisfied the constraint after {attempts} attempts")]
    InfeasibleConstraint { attempts: u32 },

    // -- topology --
    #[error("arrow ({0}, {1}) has no reverse arrow ({1}, {0})")]
    AsymmetricArrow(u32, u32),
    #[error("self-loop at node {0}")]
    SelfLoop(u32),
    #[error("node id {id} out of range 1..={n}")]
    IdOutOfRange { id: u32, n: u32 },
    #[error("roots do not match connected components: {0}")]
    RootsMismatch(String),

    // -- authority --
    #[error("node {0} already has a secret component")]
    AlreadyProvisioned(u32),
    #[error("prerequisite missing: {0}")]
    PrerequisiteMissing(String),
    #[error("assignment forces a zero session key on arrow ({0}, {1})")]
    ZeroSessionKey(u32, u32),
    #[error("member {0} has an existing edge product that conflicts with the cluster")]
    ClusterConflict(u32),
    #[error("unknown node {0}")]
    UnknownNode(u32),
    #[error("node id {0} already present in the topology")]
    IdCollision(u32),

    // -- session --
    #[error("peer {0} is not an outbound neighbor in this node's public component")]
    UnknownPeer(u32),
    #[error("ephemeral share is the all-identity pair")]
    InvalidShare,
    #[error("authentication tag mismatch")]
    BadTag,
    #[error("malformed wire message: {0}")]
    MalformedMessage(String),
    #[error("members do not form a consistent cluster under this master")]
    ClusterNotFormed,

    // -- attack lab / cli --
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("file format error: {0}")]
    FileFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::FileFormat(e.to_string())
    }
}
