//! Named query functions over a store: node rankings, influence rankings,
//! network resilience per year and level, and cross-year rank changes.
//!
//! Every query recomputes its metrics from a fresh snapshot, so a changed
//! parameter set is never answered from stale results.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::metrics::{self, MetricsError, NetworkResilienceReport, ResilienceParams, ViewResilience};
use crate::model::{Direction, Level, TokenError};
use crate::store::{GraphStore, StoreError, ViewOptions};

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("bad query parameters: {0}")]
    BadParams(String),
    #[error("failed to write output: {0}")]
    Write(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryFunction {
    NodeExportResilience,
    NodeImportResilience,
    NetworkResilience,
    Influence,
    RankDelta,
}

impl QueryFunction {
    pub fn as_str(self) -> &'static str {
        match self {
            QueryFunction::NodeExportResilience => "node_export_resilience",
            QueryFunction::NodeImportResilience => "node_import_resilience",
            QueryFunction::NetworkResilience => "network_resilience",
            QueryFunction::Influence => "influence",
            QueryFunction::RankDelta => "rank_delta",
        }
    }
}

impl fmt::Display for QueryFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QueryFunction {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "node_export_resilience" => Ok(QueryFunction::NodeExportResilience),
            "node_import_resilience" => Ok(QueryFunction::NodeImportResilience),
            "network_resilience" => Ok(QueryFunction::NetworkResilience),
            "influence" => Ok(QueryFunction::Influence),
            "rank_delta" => Ok(QueryFunction::RankDelta),
            _ => Err(TokenError { kind: "query function", token: s.to_string() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRequest {
    pub function: QueryFunction,
    pub years: Vec<i32>,
    pub level: Level,
    /// Mileage mode, adjacency factor and self-flow policy. The direction is used by
    /// `influence` and `rank_delta`; the node resilience functions fix their own.
    pub params: ResilienceParams,
    pub top_k: Option<usize>,
    pub node: Option<String>,
}

impl QueryRequest {
    pub fn new(function: QueryFunction, year: i32, level: Level) -> Self {
        QueryRequest {
            function,
            years: vec![year],
            level,
            params: ResilienceParams::default(),
            top_k: None,
            node: None,
        }
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        if self.years.is_empty() {
            return Err(QueryError::BadParams("at least one year is required".into()));
        }
        if self.top_k == Some(0) {
            return Err(QueryError::BadParams("top-k must be at least 1".into()));
        }
        if self.function == QueryFunction::RankDelta && self.years.len() != 2 {
            return Err(QueryError::BadParams("rank_delta takes exactly two years".into()));
        }
        self.params.validate()?;
        Ok(())
    }

    fn direction(&self) -> Direction {
        match self.function {
            QueryFunction::NodeExportResilience => Direction::Export,
            QueryFunction::NodeImportResilience => Direction::Import,
            _ => self.params.direction,
        }
    }
}

/// Metrics of every node in one view.
pub fn evaluate(
    store: &GraphStore,
    year: i32,
    level: Level,
    direction: Direction,
    params: &ResilienceParams,
) -> Result<ViewResilience, QueryError> {
    let options = ViewOptions { include_self_flows: params.include_self_flows };
    let view = store.snapshot_view_with(year, level, direction, options)?;
    Ok(metrics::evaluate_view(&view, store.adjacency(), params)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedNode {
    /// 1-based position in the full ranking.
    pub rank: usize,
    pub node_id: String,
    pub name: String,
    pub resilience: f64,
    pub v_prime: f64,
    pub influence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankBy {
    Resilience,
    Influence,
}

impl FromStr for RankBy {
    type Err = TokenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "r" | "resilience" => Ok(RankBy::Resilience),
            "i" | "influence" => Ok(RankBy::Influence),
            _ => Err(TokenError { kind: "metric", token: s.to_string() }),
        }
    }
}

/// All nodes of the view, descending by the metric with ties in id order.
pub fn rank(store: &GraphStore, evaluated: &ViewResilience, by: RankBy) -> Vec<RankedNode> {
    let mut rows: Vec<RankedNode> = evaluated
        .nodes
        .iter()
        .map(|n| RankedNode {
            rank: 0,
            node_id: n.node.clone(),
            name: store.region(&n.node).map(|r| r.name.clone()).unwrap_or_default(),
            resilience: n.resilience,
            v_prime: n.total_adjusted,
            influence: n.influence.unwrap_or(0.0),
        })
        .collect();
    let key = |r: &RankedNode| match by {
        RankBy::Resilience => r.resilience,
        RankBy::Influence => r.influence,
    };
    rows.sort_by(|a, b| key(b).total_cmp(&key(a)).then_with(|| a.node_id.cmp(&b.node_id)));
    for (i, row) in rows.iter_mut().enumerate() {
        row.rank = i + 1;
    }
    rows
}

fn ranked_query(store: &GraphStore, req: &QueryRequest, by: RankBy) -> Result<Vec<RankedNode>, QueryError> {
    req.validate()?;
    let evaluated = evaluate(store, req.years[0], req.level, req.direction(), &req.params)?;
    let mut rows = rank(store, &evaluated, by);
    if let Some(node) = &req.node {
        rows.retain(|r| &r.node_id == node);
    }
    if let Some(k) = req.top_k {
        rows.truncate(k);
    }
    Ok(rows)
}

/// Nodes ranked by resilience for the first requested year.
pub fn node_resilience_query(store: &GraphStore, req: &QueryRequest) -> Result<Vec<RankedNode>, QueryError> {
    ranked_query(store, req, RankBy::Resilience)
}

/// Nodes ranked by influence for the first requested year.
pub fn influence_query(store: &GraphStore, req: &QueryRequest) -> Result<Vec<RankedNode>, QueryError> {
    ranked_query(store, req, RankBy::Influence)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkYear {
    pub year: i32,
    pub level: Level,
    pub report: NetworkResilienceReport,
}

fn network_report(
    store: &GraphStore,
    year: i32,
    level: Level,
    params: &ResilienceParams,
) -> Result<NetworkResilienceReport, QueryError> {
    let import = evaluate(store, year, level, Direction::Import, params)?;
    let export = evaluate(store, year, level, Direction::Export, params)?;
    Ok(NetworkResilienceReport::from_directions(import.network, export.network))
}

/// Import, export and overall network resilience for every requested year.
pub fn network_resilience_query(store: &GraphStore, req: &QueryRequest) -> Result<Vec<NetworkYear>, QueryError> {
    req.validate()?;
    req.years
        .iter()
        .map(|&year| {
            Ok(NetworkYear { year, level: req.level, report: network_report(store, year, req.level, &req.params)? })
        })
        .collect()
}

/// Percent change from `a` to `b`, rounded to one decimal.
pub fn percent_change(a: f64, b: f64) -> f64 {
    ((b - a) / a * 1000.0).round() / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkMatrixRow {
    pub level: Level,
    /// One report per requested year, in request order.
    pub years: Vec<NetworkYear>,
    /// Percent change of the overall resilience from the first to the last year;
    /// absent for a single year or a zero first value.
    pub change_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkMatrix {
    pub years: Vec<i32>,
    pub rows: Vec<NetworkMatrixRow>,
}

/// Overall network resilience for every (level, year) pair.
pub fn network_matrix(
    store: &GraphStore,
    years: &[i32],
    levels: &[Level],
    params: &ResilienceParams,
) -> Result<NetworkMatrix, QueryError> {
    if years.is_empty() || levels.is_empty() {
        return Err(QueryError::BadParams("at least one year and one level are required".into()));
    }
    params.validate()?;
    let mut rows = Vec::with_capacity(levels.len());
    for &level in levels {
        let mut cells = Vec::with_capacity(years.len());
        for &year in years {
            cells.push(NetworkYear { year, level, report: network_report(store, year, level, params)? });
        }
        let change_pct = match (cells.first(), cells.last()) {
            // undefined from a zero baseline
            (Some(a), Some(b)) if cells.len() > 1 && a.report.overall > 0.0 => {
                Some(percent_change(a.report.overall, b.report.overall))
            }
            _ => None,
        };
        rows.push(NetworkMatrixRow { level, years: cells, change_pct });
    }
    Ok(NetworkMatrix { years: years.to_vec(), rows })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankDelta {
    pub node_id: String,
    pub rank_a: Option<usize>,
    pub rank_b: Option<usize>,
    /// `rank_a - rank_b`: positive when the node moved up.
    pub delta: Option<i64>,
}

/// Influence rank changes between the two requested years. Rows ranked in both years
/// come first ordered by `rank_b`, then rows missing from year a, then rows missing
/// from year b, each group ordered by its known rank.
pub fn rank_delta(store: &GraphStore, req: &QueryRequest) -> Result<Vec<RankDelta>, QueryError> {
    req.validate()?;
    let direction = req.direction();
    let ranks = |year: i32| -> Result<BTreeMap<String, usize>, QueryError> {
        let evaluated = evaluate(store, year, req.level, direction, &req.params)?;
        Ok(rank(store, &evaluated, RankBy::Influence).into_iter().map(|r| (r.node_id, r.rank)).collect())
    };
    let a = ranks(req.years[0])?;
    let b = ranks(req.years[1])?;
    let mut ids: Vec<&String> = a.keys().chain(b.keys()).collect();
    ids.sort();
    ids.dedup();
    let mut rows: Vec<RankDelta> = ids
        .into_iter()
        .map(|id| {
            let (ra, rb) = (a.get(id).copied(), b.get(id).copied());
            RankDelta {
                node_id: id.clone(),
                rank_a: ra,
                rank_b: rb,
                delta: ra.zip(rb).map(|(x, y)| x as i64 - y as i64),
            }
        })
        .collect();
    let group = |r: &RankDelta| match (r.rank_a, r.rank_b) {
        (Some(_), Some(b)) => (0, b),
        (None, Some(b)) => (1, b),
        (Some(a), None) => (2, a),
        (None, None) => (3, 0),
    };
    rows.sort_by_key(group);
    if let Some(node) = &req.node {
        rows.retain(|r| &r.node_id == node);
    }
    if let Some(k) = req.top_k {
        rows.truncate(k);
    }
    Ok(rows)
}

/// The input FeatureCollection restricted to regions at the view's level, each feature
/// carrying `R`, `I` and `rank` properties (null for regions without flows).
pub fn geojson_layer(
    store: &GraphStore,
    geometries: &serde_json::Value,
    evaluated: &ViewResilience,
    by: RankBy,
) -> serde_json::Value {
    use serde_json::{json, Value};
    let ranked: BTreeMap<String, RankedNode> =
        rank(store, evaluated, by).into_iter().map(|r| (r.node_id.clone(), r)).collect();
    let features = geometries.get("features").and_then(Value::as_array).map(Vec::as_slice).unwrap_or_default();
    let mut out = Vec::new();
    for feature in features {
        let Some(id) = crate::adjacency::feature_id(feature) else { continue };
        if store.region(&id).is_none_or(|r| r.level != evaluated.level) {
            continue;
        }
        let mut feature = feature.clone();
        let row = ranked.get(&id);
        let props =
            feature.as_object_mut().expect("features are objects").entry("properties").or_insert_with(|| json!({}));
        if !props.is_object() {
            *props = json!({});
        }
        let props = props.as_object_mut().expect("replaced above");
        props.insert("id".into(), json!(id));
        props.insert("R".into(), json!(row.map(|r| r.resilience)));
        props.insert("I".into(), json!(row.map(|r| r.influence)));
        props.insert("rank".into(), json!(row.map(|r| r.rank)));
        out.push(feature);
    }
    json!({
        "type": "FeatureCollection",
        "properties": {
            "year": evaluated.year,
            "level": evaluated.level.token(),
            "direction": evaluated.direction.as_str(),
        },
        "features": out,
    })
}

/// Fixed-point number with six decimals, as used in every CSV table.
pub fn csv_number(x: f64) -> String {
    format!("{x:.6}")
}

fn csv_writer<W: Write>(sink: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink)
}

fn csv_io(e: csv::Error) -> QueryError {
    QueryError::Write(e.into())
}

/// `node_id,name,R,V_prime,I`
pub fn write_ranked_csv<W: Write>(rows: &[RankedNode], sink: W) -> Result<(), QueryError> {
    let mut w = csv_writer(sink);
    w.write_record(["node_id", "name", "R", "V_prime", "I"]).map_err(csv_io)?;
    for r in rows {
        w.write_record([
            r.node_id.as_str(),
            r.name.as_str(),
            &csv_number(r.resilience),
            &csv_number(r.v_prime),
            &csv_number(r.influence),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// `node_id,name,level,year,direction,R,V_prime,I`
pub fn write_metric_csv<W: Write>(
    rows: &[RankedNode],
    level: Level,
    year: i32,
    direction: Direction,
    sink: W,
) -> Result<(), QueryError> {
    let mut w = csv_writer(sink);
    w.write_record(["node_id", "name", "level", "year", "direction", "R", "V_prime", "I"]).map_err(csv_io)?;
    let year = year.to_string();
    for r in rows {
        w.write_record([
            r.node_id.as_str(),
            r.name.as_str(),
            level.token(),
            year.as_str(),
            direction.as_str(),
            &csv_number(r.resilience),
            &csv_number(r.v_prime),
            &csv_number(r.influence),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// `level,<year>...,change_pct`; the change column is present only for two or more years.
pub fn write_network_csv<W: Write>(matrix: &NetworkMatrix, sink: W) -> Result<(), QueryError> {
    let mut w = csv_writer(sink);
    let with_change = matrix.years.len() > 1;
    let mut header = vec!["level".to_string()];
    header.extend(matrix.years.iter().map(|y| y.to_string()));
    if with_change {
        header.push("change_pct".into());
    }
    w.write_record(&header).map_err(csv_io)?;
    for row in &matrix.rows {
        let mut record = vec![row.level.token().to_string()];
        record.extend(row.years.iter().map(|y| csv_number(y.report.overall)));
        if with_change {
            record.push(row.change_pct.map(|c| format!("{c:+.1}")).unwrap_or_default());
        }
        w.write_record(&record).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// `node_id,rank_a,rank_b,delta` with blanks for missing ranks.
pub fn write_rank_delta_csv<W: Write>(rows: &[RankDelta], sink: W) -> Result<(), QueryError> {
    let mut w = csv_writer(sink);
    w.write_record(["node_id", "rank_a", "rank_b", "delta"]).map_err(csv_io)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in rows {
        w.write_record([
            r.node_id.clone(),
            opt(r.rank_a.map(|v| v.to_string())),
            opt(r.rank_b.map(|v| v.to_string())),
            opt(r.delta.map(|v| v.to_string())),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with full-precision numbers and a trailing newline.
pub fn write_json<T: Serialize, W: Write>(value: &T, mut sink: W) -> Result<(), QueryError> {
    serde_json::to_writer_pretty(&mut sink, value).map_err(std::io::Error::from)?;
    sink.write_all(b"\n")?;
    sink.flush()?;
    Ok(())
}
