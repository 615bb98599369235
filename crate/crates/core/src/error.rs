use thiserror::Error;

use crate::topology::{FlowId, LinkId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("platoon needs at least 3 vehicles, got {0}")]
    TooFewVehicles(usize),

    #[error("platoon of {0} vehicles exceeds the supported maximum of {max}", max = crate::topology::MAX_VEHICLES)]
    TooManyVehicles(usize),

    #[error("node {node} is outside the platoon [0, {last}]")]
    NodeOutOfRange { node: usize, last: usize },

    #[error("link {0} does not exist")]
    InvalidLink(LinkId),

    #[error("flow {0} does not exist")]
    InvalidFlow(FlowId),

    #[error("flow {flow} is not routed over link {link}")]
    LinkNotInRoute { link: LinkId, flow: FlowId },

    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),

    #[error("demand {demand:?} needs {needed} slots but the frame has only {frame_len}")]
    InfeasibleDemand {
        demand: Vec<u32>,
        needed: u32,
        frame_len: u32,
    },

    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("failed to parse config: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Whether the error stems from user input rather than from running a simulation.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
