//! Loading regions, commodity codes and flows from CSV, and rolling state
//! flows up to coarser levels.

mod turtle;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::model::{normalize_code, CommodityCode, CommodityFlow, FlowValue, Level, RegionNode, TokenError};
use crate::store::{GraphStore, StoreError};

pub use turtle::{load_turtle, read_turtle};

/// Value token the survey uses for withheld cells.
pub const SUPPRESSED_TOKEN: &str = "S";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{path}:{line}: unknown region {id:?}")]
    UnknownRegion { path: PathBuf, line: u64, id: String },
    #[error("{path}:{line}: unknown commodity code {code:?}")]
    UnknownCode { path: PathBuf, line: u64, code: String },
    #[error("{path}:{line}: {source}")]
    Store { path: PathBuf, line: u64, source: StoreError },
    #[error("region {0:?} has no ancestor at the rollup target level")]
    MissingParent(String),
    #[error("rollup target {target} must be coarser than source {source_level}")]
    BadRollup { source_level: Level, target: Level },
    #[error("{0}")]
    Rollup(StoreError),
    #[error("turtle line {line}: {message}")]
    Turtle { line: u64, message: String },
}

fn parse_err(path: &Path, line: u64, message: impl fmt::Display) -> IngestError {
    IngestError::Parse { path: path.to_path_buf(), line, message: message.to_string() }
}

fn open(path: &Path) -> Result<std::fs::File, IngestError> {
    std::fs::File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}

/// Deserializes every data row, paired with its 1-based line number.
fn read_rows<T: DeserializeOwned, R: Read>(reader: R, path: &Path) -> Result<Vec<(u64, T)>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(path, 1, e))?.clone();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e)
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row = record.deserialize(Some(&headers)).map_err(|e| parse_err(path, line, e))?;
        rows.push((line, row));
    }
    Ok(rows)
}

fn non_empty(s: Option<String>) -> Option<String> {
    s.filter(|s| !s.is_empty())
}

#[derive(Deserialize)]
struct RegionRow {
    id: String,
    name: String,
    level: String,
    parent_id: Option<String>,
    #[serde(default)]
    feature_code: Option<String>,
}

/// Loads `id,name,level,parent_id,feature_code` rows. Coarser levels are inserted first so
/// that rows may appear in any order. Returns the number of rows loaded.
pub fn load_regions(store: &mut GraphStore, path: &Path) -> Result<usize, IngestError> {
    read_regions(store, open(path)?, path)
}

pub fn read_regions<R: Read>(store: &mut GraphStore, reader: R, path: &Path) -> Result<usize, IngestError> {
    let rows: Vec<(u64, RegionRow)> = read_rows(reader, path)?;
    let mut parsed = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        let level: Level = row.level.parse().map_err(|e: TokenError| parse_err(path, line, e))?;
        if row.id.is_empty() {
            return Err(parse_err(path, line, "empty region id"));
        }
        let mut node = RegionNode::new(row.id, row.name, level);
        node.parent_id = non_empty(row.parent_id);
        node.feature_code = row.feature_code.unwrap_or_default();
        parsed.push((line, node));
    }
    // stable: file order within a level
    parsed.sort_by_key(|(_, node)| std::cmp::Reverse(node.level));
    let count = parsed.len();
    for (line, node) in parsed {
        store.upsert_region(node).map_err(|source| IngestError::Store { path: path.to_path_buf(), line, source })?;
    }
    Ok(count)
}

#[derive(Deserialize)]
struct CodeRow {
    code: String,
    #[serde(default)]
    description: String,
    parent: Option<String>,
    is_aggregate: String,
}

fn parse_bool(token: &str) -> Option<bool> {
    match token.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "y" => Some(true),
        "false" | "0" | "no" | "n" | "" => Some(false),
        _ => None,
    }
}

/// Loads `code,description,parent,is_aggregate` rows into a code forest.
/// Numeric codes are zero-padded; every leaf must end up under exactly one aggregate.
pub fn load_codes(store: &mut GraphStore, path: &Path) -> Result<usize, IngestError> {
    read_codes(store, open(path)?, path)
}

pub fn read_codes<R: Read>(store: &mut GraphStore, reader: R, path: &Path) -> Result<usize, IngestError> {
    let rows: Vec<(u64, CodeRow)> = read_rows(reader, path)?;
    let mut pending: Vec<(u64, CommodityCode)> = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        let code = normalize_code(&row.code);
        if code.is_empty() {
            return Err(parse_err(path, line, "empty commodity code"));
        }
        let is_aggregate = parse_bool(&row.is_aggregate)
            .ok_or_else(|| parse_err(path, line, format!("bad is_aggregate {:?}", row.is_aggregate)))?;
        let parent = non_empty(row.parent).map(|p| normalize_code(&p));
        pending.push((
            line,
            CommodityCode { code, description: row.description, parent, is_aggregate, external_class_iri: None },
        ));
    }
    let count = pending.len();
    let lines: BTreeMap<String, u64> = pending.iter().map(|(l, c)| (c.code.clone(), *l)).collect();

    // insert parents before children; a pass without progress means a cycle or a dangling parent
    while !pending.is_empty() {
        let before = pending.len();
        let mut rest = Vec::new();
        for (line, code) in pending {
            let ready = match &code.parent {
                None => true,
                Some(p) => p != &code.code && store.code(p).is_some(),
            };
            if ready {
                store.upsert_code(code).map_err(|source| IngestError::Store {
                    path: path.to_path_buf(),
                    line,
                    source,
                })?;
            } else {
                rest.push((line, code));
            }
        }
        if rest.len() == before {
            let (line, code) = rest.swap_remove(0);
            let parent = code.parent.clone().unwrap_or_default();
            let source = if lines.contains_key(&parent) {
                StoreError::CycleDetected(code.code)
            } else {
                StoreError::DanglingCodeParent { code: code.code, parent }
            };
            return Err(IngestError::Store { path: path.to_path_buf(), line, source });
        }
        pending = rest;
    }

    if let Err(err) = store.validate_codes() {
        let line = match &err {
            StoreError::AggregateAncestry { code, .. } => lines.get(code).copied().unwrap_or(0),
            _ => 0,
        };
        return Err(parse_err(path, line, err));
    }
    Ok(count)
}

/// Handling of flow rows whose value is the suppressed token.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SuppressedPolicy {
    #[default]
    Drop,
    Zero,
}

impl FromStr for SuppressedPolicy {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "drop" => Ok(SuppressedPolicy::Drop),
            "zero" => Ok(SuppressedPolicy::Zero),
            _ => Err(TokenError { kind: "suppressed policy", token: s.to_string() }),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlowLoadSummary {
    /// Rows stored as flows.
    pub stored: usize,
    /// Suppressed rows that were dropped.
    pub dropped: usize,
    /// Data rows read.
    pub rows: usize,
}

#[derive(Deserialize)]
struct FlowRow {
    year: i32,
    origin_id: String,
    dest_id: String,
    sctg_code: String,
    value_musd: String,
    avg_miles: String,
    #[serde(default)]
    weight: Option<String>,
}

fn is_suppressed(token: &str) -> bool {
    token.eq_ignore_ascii_case(SUPPRESSED_TOKEN)
}

fn parse_number(path: &Path, line: u64, field: &str, token: &str) -> Result<f64, IngestError> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(path, line, format!("{field}: not a number: {token:?}")))
}

/// Loads `year,origin_id,dest_id,sctg_code,value_musd,avg_miles,weight` rows.
/// A suppressed value or mileage makes the row suppressed.
pub fn load_flows(
    store: &mut GraphStore,
    path: &Path,
    policy: SuppressedPolicy,
) -> Result<FlowLoadSummary, IngestError> {
    read_flows(store, open(path)?, path, policy)
}

pub fn read_flows<R: Read>(
    store: &mut GraphStore,
    reader: R,
    path: &Path,
    policy: SuppressedPolicy,
) -> Result<FlowLoadSummary, IngestError> {
    let rows: Vec<(u64, FlowRow)> = read_rows(reader, path)?;
    let mut summary = FlowLoadSummary { rows: rows.len(), ..Default::default() };
    for (line, row) in rows {
        for id in [&row.origin_id, &row.dest_id] {
            if store.region(id).is_none() {
                return Err(IngestError::UnknownRegion { path: path.to_path_buf(), line, id: id.clone() });
            }
        }
        let code = normalize_code(&row.sctg_code);
        if store.code(&code).is_none() {
            return Err(IngestError::UnknownCode { path: path.to_path_buf(), line, code });
        }
        let suppressed = is_suppressed(&row.value_musd) || is_suppressed(&row.avg_miles);
        if suppressed && policy == SuppressedPolicy::Drop {
            summary.dropped += 1;
            continue;
        }
        let number = |field: &str, token: &str| -> Result<f64, IngestError> {
            if is_suppressed(token) {
                Ok(0.0)
            } else {
                parse_number(path, line, field, token)
            }
        };
        let value = number("value_musd", &row.value_musd)?;
        let avg_mileage = number("avg_miles", &row.avg_miles)?;
        let weight = match non_empty(row.weight) {
            Some(w) if !is_suppressed(&w) => Some(parse_number(path, line, "weight", &w)?),
            _ => None,
        };
        let mut flow = CommodityFlow::new(row.origin_id, row.dest_id, code, row.year, value, avg_mileage);
        flow.weight = weight;
        store.add_flow(flow).map_err(|source| IngestError::Store { path: path.to_path_buf(), line, source })?;
        summary.stored += 1;
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MileageCombine {
    /// Value-weighted mean of member mileages; simple mean when the merged value is 0.
    #[default]
    ValueWeightedMean,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SelfFlowHandling {
    #[default]
    Keep,
    Drop,
}

impl FromStr for SelfFlowHandling {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "keep" => Ok(SelfFlowHandling::Keep),
            "drop" => Ok(SelfFlowHandling::Drop),
            _ => Err(TokenError { kind: "self-flow handling", token: s.to_string() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RollupPolicy {
    pub target_level: Level,
    pub mileage_combine: MileageCombine,
    pub self_flow_handling: SelfFlowHandling,
}

impl RollupPolicy {
    pub fn to(target_level: Level) -> Self {
        RollupPolicy {
            target_level,
            mileage_combine: MileageCombine::ValueWeightedMean,
            self_flow_handling: SelfFlowHandling::Keep,
        }
    }

    pub fn with_self_flows(self, self_flow_handling: SelfFlowHandling) -> Self {
        RollupPolicy { self_flow_handling, ..self }
    }
}

#[derive(Default)]
struct Merge {
    dollars: i64,
    weighted_miles: f64,
    miles: f64,
    members: usize,
    weight: Option<f64>,
    all_weighted: bool,
}

/// Synthesizes flows at `policy.target_level` from the `source_level` flows of `year`.
///
/// Member values are summed exactly. A synthesized flow that already exists with the
/// same attributes is skipped, so repeating a rollup adds nothing. Returns the number
/// of flows added.
pub fn rollup(
    store: &mut GraphStore,
    source_level: Level,
    policy: RollupPolicy,
    year: i32,
) -> Result<usize, IngestError> {
    let target = policy.target_level;
    if !target.is_coarser_than(source_level) {
        return Err(IngestError::BadRollup { source_level, target });
    }
    let mut merged: BTreeMap<(String, String, String), Merge> = BTreeMap::new();
    for flow in store.flows_at(year, source_level) {
        let lift = |id: &str| {
            store.ancestor_at(id, target).map(str::to_string).ok_or_else(|| IngestError::MissingParent(id.to_string()))
        };
        let (o, d) = (lift(&flow.origin)?, lift(&flow.dest)?);
        if o == d && policy.self_flow_handling == SelfFlowHandling::Drop {
            continue;
        }
        let entry = merged
            .entry((o, d, flow.code.clone()))
            .or_insert_with(|| Merge { all_weighted: true, ..Default::default() });
        let dollars = flow.value.dollars();
        entry.dollars = entry.dollars.checked_add(dollars).expect("flow value total fits in i64");
        entry.weighted_miles += dollars as f64 * flow.avg_mileage;
        entry.miles += flow.avg_mileage;
        entry.members += 1;
        match flow.weight {
            Some(w) => entry.weight = Some(entry.weight.unwrap_or(0.0) + w),
            None => entry.all_weighted = false,
        }
    }

    let mut added = 0;
    for ((origin, dest, code), m) in merged {
        let avg_mileage = if m.dollars > 0 { m.weighted_miles / m.dollars as f64 } else { m.miles / m.members as f64 };
        let flow = CommodityFlow {
            origin,
            dest,
            code,
            year,
            value: FlowValue::from_dollars(m.dollars),
            avg_mileage,
            weight: if m.all_weighted { m.weight } else { None },
        };
        let key = crate::store::FlowKey {
            year,
            level: target,
            origin: flow.origin.clone(),
            dest: flow.dest.clone(),
            code: flow.code.clone(),
        };
        if store.flow(&key).as_ref() == Some(&flow) {
            continue;
        }
        store.add_flow(flow).map_err(IngestError::Rollup)?;
        added += 1;
    }
    Ok(added)
}

/// Rolls state flows up to every coarser level that has no flows of its own for the year,
/// so native coarse tables take precedence over synthesized ones.
pub fn rollup_missing_levels(
    store: &mut GraphStore,
    self_flow_handling: SelfFlowHandling,
) -> Result<usize, IngestError> {
    let mut added = 0;
    for year in store.years() {
        for target in [Level::Division, Level::Region] {
            if store.flows_at(year, target).next().is_none() {
                let policy = RollupPolicy::to(target).with_self_flows(self_flow_handling);
                added += rollup(store, Level::State, policy, year)?;
            }
        }
    }
    Ok(added)
}
