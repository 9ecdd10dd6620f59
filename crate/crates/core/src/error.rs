use crate::adjacency::AdjacencyError;
use crate::ingest::IngestError;
use crate::metrics::MetricsError;
use crate::query::QueryError;
use crate::store::StoreError;
use crate::workspace::WorkspaceError;

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Adjacency(#[from] AdjacencyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
