use std::path::PathBuf;

use crate::corpus::EntityKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what}: {message}")]
    Parse { what: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("factorization rank {rank} exceeds min(#members = {members}, #skills = {skills})")]
    RankTooLarge {
        rank: usize,
        members: usize,
        skills: usize,
    },
    #[error("unconstrained query: every facet is empty")]
    UnconstrainedQuery,
    #[error("{kind} entity {id} is not in the query facet")]
    NotInFacet { kind: EntityKind, id: u32 },
    #[error("feature registry mismatch: {0}")]
    RegistryMismatch(String),
    #[error("unknown member {0}")]
    UnknownMember(u64),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            message: message.to_string(),
        }
    }
}
