//! Workspace bundles: a directory holding the store as Turtle, the optional
//! geometry layer and a manifest with the counts used to check a reload.
//!
//! ```text
//! <dir>/graph.ttl           the store, as written by GraphStore::export_turtle
//! <dir>/geometries.geojson  the input FeatureCollection, when one was given
//! <dir>/manifest.json       counts and years
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::adjacency::{self, AdjacencyError, AdjacencyIndex, Geometry, MeetOptions};
use crate::ingest::{self, FlowLoadSummary, IngestError, SelfFlowHandling, SuppressedPolicy};
use crate::model::Level;
use crate::store::{GraphStore, StoreError};

pub const GRAPH_FILE: &str = "graph.ttl";
pub const GEOMETRY_FILE: &str = "geometries.geojson";
pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT: &str = "flowres-workspace/1";

#[derive(Debug, thiserror::Error)]
pub enum WorkspaceError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("no workspace at {0} (run `flowres ingest` first)")]
    Missing(PathBuf),
    #[error("workspace {path} is inconsistent: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Adjacency(#[from] AdjacencyError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub regions: usize,
    pub codes: usize,
    pub flows: usize,
    pub adjacency_pairs: usize,
    pub years: Vec<i32>,
    /// Flow counts per level token.
    pub flows_by_level: BTreeMap<String, usize>,
    pub has_geometries: bool,
}

impl Manifest {
    fn of(store: &GraphStore, has_geometries: bool) -> Self {
        let mut flows_by_level = BTreeMap::new();
        for (key, _) in store.flows() {
            *flows_by_level.entry(key.level.token().to_string()).or_insert(0) += 1;
        }
        Manifest {
            format: FORMAT.to_string(),
            regions: store.region_count(),
            codes: store.code_count(),
            flows: store.flow_count(),
            adjacency_pairs: store.adjacency().len(),
            years: store.years(),
            flows_by_level,
            has_geometries,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Workspace {
    pub store: GraphStore,
    /// The input GeoJSON FeatureCollection, kept verbatim for map exports.
    pub geometries: Option<Value>,
}

/// Input files and switches of an ingest run.
#[derive(Debug, Clone)]
pub struct IngestInputs {
    pub regions: PathBuf,
    pub codes: PathBuf,
    pub flows: PathBuf,
    /// `id_a,id_b` list of adjacent states; takes precedence over derivation.
    pub adjacency: Option<PathBuf>,
    /// FeatureCollection of region geometries; adjacency is derived from it when no list is given.
    pub geojson: Option<PathBuf>,
    pub suppressed: SuppressedPolicy,
    pub meet: MeetOptions,
    /// Roll state flows up to division and region level, unless native tables exist.
    pub rollup: Option<SelfFlowHandling>,
}

impl IngestInputs {
    pub fn new(regions: impl Into<PathBuf>, codes: impl Into<PathBuf>, flows: impl Into<PathBuf>) -> Self {
        IngestInputs {
            regions: regions.into(),
            codes: codes.into(),
            flows: flows.into(),
            adjacency: None,
            geojson: None,
            suppressed: SuppressedPolicy::Drop,
            meet: MeetOptions::default(),
            rollup: Some(SelfFlowHandling::Keep),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestReport {
    pub regions: usize,
    pub codes: usize,
    pub flows: FlowLoadSummary,
    pub rolled_up: usize,
    pub adjacency_pairs: usize,
}

fn read_json(path: &Path) -> Result<Value, WorkspaceError> {
    let text = fs::read_to_string(path).map_err(|source| WorkspaceError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| WorkspaceError::Json { path: path.into(), source })
}

impl Workspace {
    /// Runs the ingest pipeline: regions, codes, flows, adjacency, then the optional rollup.
    pub fn ingest(inputs: &IngestInputs) -> Result<(Workspace, IngestReport), WorkspaceError> {
        let mut store = GraphStore::new();
        let regions = ingest::load_regions(&mut store, &inputs.regions)?;
        let codes = ingest::load_codes(&mut store, &inputs.codes)?;
        let flows = ingest::load_flows(&mut store, &inputs.flows, inputs.suppressed)?;

        let mut geometries = None;
        let mut shapes: Option<BTreeMap<String, Geometry>> = None;
        if let Some(path) = &inputs.geojson {
            let text = fs::read_to_string(path).map_err(|source| WorkspaceError::Io { path: path.clone(), source })?;
            shapes = Some(adjacency::parse_geometries(&text, path)?);
            geometries = Some(
                serde_json::from_str(&text).map_err(|source| WorkspaceError::Json { path: path.clone(), source })?,
            );
        }
        if let Some(shapes) = &shapes {
            let ids: Vec<String> = shapes.keys().filter(|id| store.region(id).is_some()).cloned().collect();
            for id in ids {
                let mut node = store.region(&id).expect("filtered above").clone();
                node.geometry_ref = Some(id);
                store.upsert_region(node)?;
            }
        }
        let base = match (&inputs.adjacency, &shapes) {
            (Some(path), _) => adjacency::load_adjacency(path, &store)?,
            (None, Some(shapes)) => adjacency::derive_level_adjacency(&store, Level::State, shapes, inputs.meet)?,
            (None, None) => AdjacencyIndex::new(),
        };
        store.set_adjacency(base.with_lifted_levels(&store))?;

        let rolled_up = match inputs.rollup {
            Some(handling) => ingest::rollup_missing_levels(&mut store, handling)?,
            None => 0,
        };
        let report = IngestReport { regions, codes, flows, rolled_up, adjacency_pairs: store.adjacency().len() };
        Ok((Workspace { store, geometries }, report))
    }

    pub fn manifest(&self) -> Manifest {
        Manifest::of(&self.store, self.geometries.is_some())
    }

    /// Writes the bundle, creating `dir` if needed.
    pub fn save(&self, dir: &Path) -> Result<(), WorkspaceError> {
        let io = |path: PathBuf| move |source| WorkspaceError::Io { path, source };
        fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
        let graph = dir.join(GRAPH_FILE);
        let mut file = fs::File::create(&graph).map_err(io(graph.clone()))?;
        self.store.export_turtle(&mut file)?;

        let geometry_path = dir.join(GEOMETRY_FILE);
        match &self.geometries {
            Some(doc) => {
                let text = serde_json::to_string_pretty(doc).expect("JSON values serialize") + "\n";
                fs::write(&geometry_path, text).map_err(io(geometry_path.clone()))?;
            }
            None if geometry_path.exists() => {
                fs::remove_file(&geometry_path).map_err(io(geometry_path.clone()))?;
            }
            None => {}
        }
        let manifest_path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes") + "\n";
        fs::write(&manifest_path, text).map_err(io(manifest_path.clone()))?;
        Ok(())
    }

    /// Reads a bundle and checks it against its manifest.
    pub fn load(dir: &Path) -> Result<Workspace, WorkspaceError> {
        let manifest_path = dir.join(MANIFEST_FILE);
        if !manifest_path.is_file() {
            return Err(WorkspaceError::Missing(dir.to_path_buf()));
        }
        let manifest: Manifest = serde_json::from_value(read_json(&manifest_path)?)
            .map_err(|source| WorkspaceError::Json { path: manifest_path.clone(), source })?;
        let corrupt = |message: String| WorkspaceError::Corrupt { path: dir.to_path_buf(), message };
        if manifest.format != FORMAT {
            return Err(corrupt(format!("unsupported format {:?}", manifest.format)));
        }
        let store = ingest::load_turtle(&dir.join(GRAPH_FILE))?;
        let geometry_path = dir.join(GEOMETRY_FILE);
        let geometries = if manifest.has_geometries { Some(read_json(&geometry_path)?) } else { None };
        let workspace = Workspace { store, geometries };
        let actual = workspace.manifest();
        if actual != manifest {
            return Err(corrupt(format!(
                "manifest lists {} regions and {} flows, graph holds {} and {}",
                manifest.regions, manifest.flows, actual.regions, actual.flows
            )));
        }
        Ok(workspace)
    }
}
