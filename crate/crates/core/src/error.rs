use crate::geometry::Vec3;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("coincident particles {i} and {j}: pair force is singular")]
    Singularity { i: usize, j: usize },

    #[error(
        "displacement guard violated at step {step}: max displacement {max_disp:.6} >= buffer/2 = {limit:.6}; \
         increase the Verlet buffer or reneighbor more often"
    )]
    DisplacementGuard {
        step: u64,
        max_disp: f64,
        limit: f64,
    },

    #[error("particle at {pos:?} lies {shells:.3} cells outside the cell grid (missed exchange?)")]
    OutsideGrid { pos: Vec3, shells: f64 },

    #[error("protocol error on rank {rank}: {msg}")]
    Protocol { rank: usize, msg: String },

    #[error("wire format error: {0}")]
    Wire(String),

    #[error("transport aborted: {0}")]
    Aborted(String),

    #[error("rank {rank} at step {step}: {source}")]
    AtStep {
        rank: usize,
        step: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }

    pub fn protocol(rank: usize, msg: impl Into<String>) -> Self {
        Error::Protocol {
            rank,
            msg: msg.into(),
        }
    }

    pub fn at_step(self, rank: usize, step: u64) -> Self {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                rank,
                step,
                source: Box::new(e),
            },
        }
    }
}
