//! Geographic adjacency between regions.
//!
//! Adjacency is either read from an `id_a,id_b` list or derived from polygon
//! geometries with the Egenhofer Meet predicate (boundaries touch, interiors
//! stay disjoint).

mod geometry;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::model::Level;
use crate::store::GraphStore;

pub use geometry::{
    derive_adjacency, derive_level_adjacency, feature_id, load_geometries, meets, parse_geometries, Geometry,
    MeetOptions, DEFAULT_TOLERANCE_DEG,
};

#[derive(Debug, thiserror::Error)]
pub enum AdjacencyError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{path}:{line}: unknown region {id:?}")]
    UnknownRegion { path: PathBuf, line: u64, id: String },
    #[error("{path}:{line}: region {id:?} paired with itself")]
    SelfPair { path: PathBuf, line: u64, id: String },
    #[error("region {0:?} paired with itself")]
    SelfLoop(String),
    #[error("no geometry for region {0:?}")]
    MissingGeometry(String),
    #[error("invalid ring in geometry {id:?}: {reason}")]
    InvalidRing { id: String, reason: String },
    #[error("tolerance must be finite and nonnegative, got {0}")]
    BadTolerance(f64),
}

/// Symmetric, irreflexive set of adjacent region pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdjacencyIndex {
    // each pair stored once with the smaller id first
    pairs: BTreeSet<(String, String)>,
}

impl AdjacencyIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns whether the pair was newly added.
    pub fn insert(&mut self, a: &str, b: &str) -> Result<bool, AdjacencyError> {
        if a == b {
            return Err(AdjacencyError::SelfLoop(a.to_string()));
        }
        Ok(self.pairs.insert(ordered(a, b)))
    }

    /// Symmetric lookup. `a == b` and unknown ids are never adjacent.
    pub fn is_adjacent(&self, a: &str, b: &str) -> bool {
        if a == b {
            return false;
        }
        self.pairs.contains(&ordered(a, b))
    }

    /// Pairs in order, smaller id first.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn neighbors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.pairs.iter().filter_map(move |(a, b)| {
            if a == id {
                Some(b.as_str())
            } else if b == id {
                Some(a.as_str())
            } else {
                None
            }
        })
    }

    pub fn extend(&mut self, other: &AdjacencyIndex) {
        self.pairs.extend(other.pairs.iter().cloned());
    }

    /// Adjacency of the coarser units at `level`: two units are adjacent when any
    /// of their finer members are. Pairs inside one unit are dropped.
    pub fn lift_to_level(&self, store: &GraphStore, level: Level) -> AdjacencyIndex {
        let mut out = AdjacencyIndex::new();
        for (a, b) in self.pairs() {
            let (Some(ua), Some(ub)) = (store.ancestor_at(a, level), store.ancestor_at(b, level)) else {
                continue;
            };
            if ua != ub {
                out.pairs.insert(ordered(ua, ub));
            }
        }
        out
    }

    /// This index plus the lifted adjacency of every coarser level present in the store.
    pub fn with_lifted_levels(&self, store: &GraphStore) -> AdjacencyIndex {
        let mut out = self.clone();
        for level in [Level::Division, Level::Region] {
            out.extend(&self.lift_to_level(store, level));
        }
        out
    }
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a < b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Free-function form of [`AdjacencyIndex::is_adjacent`].
pub fn is_adjacent(index: &AdjacencyIndex, a: &str, b: &str) -> bool {
    index.is_adjacent(a, b)
}

#[derive(Deserialize)]
struct PairRow {
    id_a: String,
    id_b: String,
}

/// Reads an `id_a,id_b` adjacency list. Every id must name a region in `store`.
pub fn load_adjacency(path: &Path, store: &GraphStore) -> Result<AdjacencyIndex, AdjacencyError> {
    let file = std::fs::File::open(path).map_err(|source| AdjacencyError::Io { path: path.to_path_buf(), source })?;
    read_adjacency(file, path, store)
}

pub fn read_adjacency<R: std::io::Read>(
    reader: R,
    path: &Path,
    store: &GraphStore,
) -> Result<AdjacencyIndex, AdjacencyError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut index = AdjacencyIndex::new();
    for (i, row) in rdr.deserialize::<PairRow>().enumerate() {
        // header is line 1
        let line = i as u64 + 2;
        let row = row.map_err(|e| AdjacencyError::Parse { path: path.to_path_buf(), line, message: e.to_string() })?;
        for id in [&row.id_a, &row.id_b] {
            if store.region(id).is_none() {
                return Err(AdjacencyError::UnknownRegion { path: path.to_path_buf(), line, id: id.clone() });
            }
        }
        if row.id_a == row.id_b {
            return Err(AdjacencyError::SelfPair { path: path.to_path_buf(), line, id: row.id_a });
        }
        index.pairs.insert(ordered(&row.id_a, &row.id_b));
    }
    Ok(index)
}

/// Writes the index as an `id_a,id_b` list.
pub fn write_adjacency<W: std::io::Write>(index: &AdjacencyIndex, sink: W) -> csv::Result<()> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    wtr.write_record(["id_a", "id_b"])?;
    for (a, b) in index.pairs() {
        wtr.write_record([a, b])?;
    }
    wtr.flush()?;
    Ok(())
}
