//! C ABI for flowres.
//!
//! Workspaces are opaque handles. Every fallible call returns a `FlowresStatus`;
//! on failure the message is kept per thread and read with `flowres_last_error`.
//! Strings returned through out-parameters are owned by the caller and released
//! with `flowres_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use flowres::adjacency::AdjacencyError;
use flowres::ingest::IngestError;
use flowres::metrics::{self, AtmMode, MetricsError, ResilienceParams, SelfFlowBeta};
use flowres::query::{self, QueryError, QueryFunction, QueryRequest, RankBy};
use flowres::store::StoreError;
use flowres::workspace::{IngestInputs, Workspace, WorkspaceError};

/// Opaque handle to a loaded workspace.
pub struct FlowresWorkspace(Workspace);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowresStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    /// Referential or hierarchy violation in the input data.
    Integrity = 5,
    /// No flows match the requested year, level or node.
    EmptySelection = 6,
    /// All influence values are zero.
    Degenerate = 7,
    Internal = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowresLevel {
    State = 0,
    Division = 1,
    Region = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowresDirection {
    Import = 0,
    Export = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowresRankBy {
    Resilience = 0,
    Influence = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowresParams {
    /// Divide by sqrt(ATM) when true, otherwise ignore mileage.
    pub atm_sqrt: bool,
    /// Discount for flows between adjacent regions, in (0, 1].
    pub ga_factor: f64,
    /// Treat a self-flow as adjacent to itself.
    pub self_flow_adjacent: bool,
    pub include_self_flows: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlowresNodeResilience {
    pub resilience: f64,
    pub influence: f64,
    /// Adjusted value in millions of dollars.
    pub total_adjusted: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlowresNetworkResilience {
    pub import_resilience: f64,
    pub export_resilience: f64,
    pub overall: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(CString::new(message).expect("NULs removed")));
}

struct Failure(FlowresStatus, String);

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure(FlowresStatus::InvalidArgument, message.into())
    }
}

fn store_status(e: &StoreError) -> FlowresStatus {
    match e {
        StoreError::EmptySelection { .. } => FlowresStatus::EmptySelection,
        StoreError::SinkWrite(_) => FlowresStatus::Io,
        _ => FlowresStatus::Integrity,
    }
}

fn metrics_status(e: &MetricsError) -> FlowresStatus {
    match e {
        MetricsError::DegenerateNetwork => FlowresStatus::Degenerate,
        MetricsError::NoFlows(_) | MetricsError::AllZero => FlowresStatus::EmptySelection,
        MetricsError::InvalidParams(_) => FlowresStatus::InvalidArgument,
    }
}

impl From<QueryError> for Failure {
    fn from(e: QueryError) -> Self {
        let status = match &e {
            QueryError::Store(s) => store_status(s),
            QueryError::Metrics(m) => metrics_status(m),
            QueryError::BadParams(_) => FlowresStatus::InvalidArgument,
            QueryError::Write(_) => FlowresStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

impl From<WorkspaceError> for Failure {
    fn from(e: WorkspaceError) -> Self {
        let status = match &e {
            WorkspaceError::Io { .. } | WorkspaceError::Missing(_) => FlowresStatus::Io,
            WorkspaceError::Json { .. } => FlowresStatus::Parse,
            WorkspaceError::Corrupt { .. } => FlowresStatus::Integrity,
            WorkspaceError::Ingest(IngestError::Io { .. }) => FlowresStatus::Io,
            WorkspaceError::Ingest(
                IngestError::Parse { .. } | IngestError::Turtle { .. } | IngestError::BadRollup { .. },
            ) => FlowresStatus::Parse,
            WorkspaceError::Ingest(_) => FlowresStatus::Integrity,
            WorkspaceError::Adjacency(AdjacencyError::Io { .. }) => FlowresStatus::Io,
            WorkspaceError::Adjacency(_) => FlowresStatus::Parse,
            WorkspaceError::Store(s) => store_status(s),
        };
        Failure(status, e.to_string())
    }
}

/// Runs `body`, converting errors and panics into a status plus the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> FlowresStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            FlowresStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FlowresStatus::Internal
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(FlowresStatus::NullArgument, format!("{name} is null"))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::invalid(format!("{name} is not UTF-8")))
}

unsafe fn optional_path(p: *const c_char, name: &str) -> Result<Option<PathBuf>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, name).map(|s| Some(PathBuf::from(s)))
    }
}

unsafe fn workspace<'a>(ws: *const FlowresWorkspace) -> Result<&'a Workspace, Failure> {
    ws.as_ref().map(|w| &w.0).ok_or_else(|| null("workspace"))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn params(p: *const FlowresParams) -> Result<ResilienceParams, Failure> {
    let Some(p) = p.as_ref() else {
        return Ok(ResilienceParams::default());
    };
    let params = ResilienceParams {
        atm_mode: if p.atm_sqrt { AtmMode::Sqrt } else { AtmMode::Unity },
        ga_factor: p.ga_factor,
        self_flow_beta: if p.self_flow_adjacent { SelfFlowBeta::Adjacent } else { SelfFlowBeta::NonAdjacent },
        include_self_flows: p.include_self_flows,
        ..ResilienceParams::default()
    };
    params.validate().map_err(|e| Failure::invalid(e.to_string()))?;
    Ok(params)
}

fn level(l: FlowresLevel) -> flowres::Level {
    match l {
        FlowresLevel::State => flowres::Level::State,
        FlowresLevel::Division => flowres::Level::Division,
        FlowresLevel::Region => flowres::Level::Region,
    }
}

fn direction(d: FlowresDirection) -> flowres::Direction {
    match d {
        FlowresDirection::Import => flowres::Direction::Import,
        FlowresDirection::Export => flowres::Direction::Export,
    }
}

fn give_string(s: String, slot: &mut *mut c_char) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(FlowresStatus::Internal, "output contains NUL".into()))?;
    *slot = c.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn flowres_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Defaults: sqrt mileage, ga 0.9, self-flows adjacent and included.
#[no_mangle]
pub extern "C" fn flowres_params_default() -> FlowresParams {
    let d = ResilienceParams::default();
    FlowresParams {
        atm_sqrt: d.atm_mode == AtmMode::Sqrt,
        ga_factor: d.ga_factor,
        self_flow_adjacent: d.self_flow_beta == SelfFlowBeta::Adjacent,
        include_self_flows: d.include_self_flows,
    }
}

/// Ingests CSV inputs into a new workspace. `adjacency` and `geojson` may be null.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowres_workspace_ingest(
    regions: *const c_char,
    codes: *const c_char,
    flows: *const c_char,
    adjacency: *const c_char,
    geojson: *const c_char,
    out_ws: *mut *mut FlowresWorkspace,
) -> FlowresStatus {
    guard(|| {
        let slot = out(out_ws, "out")?;
        let mut inputs = IngestInputs::new(text(regions, "regions")?, text(codes, "codes")?, text(flows, "flows")?);
        inputs.adjacency = optional_path(adjacency, "adjacency")?;
        inputs.geojson = optional_path(geojson, "geojson")?;
        let (ws, _) = Workspace::ingest(&inputs)?;
        *slot = Box::into_raw(Box::new(FlowresWorkspace(ws)));
        Ok(())
    })
}

/// # Safety
/// `dir` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowres_workspace_load(
    dir: *const c_char,
    out_ws: *mut *mut FlowresWorkspace,
) -> FlowresStatus {
    guard(|| {
        let slot = out(out_ws, "out")?;
        let ws = Workspace::load(text(dir, "dir")?.as_ref())?;
        *slot = Box::into_raw(Box::new(FlowresWorkspace(ws)));
        Ok(())
    })
}

/// # Safety
/// `ws` must come from this library; `dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn flowres_workspace_save(ws: *const FlowresWorkspace, dir: *const c_char) -> FlowresStatus {
    guard(|| {
        workspace(ws)?.save(text(dir, "dir")?.as_ref())?;
        Ok(())
    })
}

/// Number of stored flows at every level, or 0 for a null handle.
///
/// # Safety
/// `ws` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn flowres_workspace_flow_count(ws: *const FlowresWorkspace) -> usize {
    ws.as_ref().map_or(0, |w| w.0.store.flow_count())
}

/// # Safety
/// `ws` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn flowres_workspace_free(ws: *mut FlowresWorkspace) {
    if !ws.is_null() {
        drop(Box::from_raw(ws));
    }
}

/// Distance- and adjacency-adjusted value of one flow. A null `params` means defaults.
///
/// # Safety
/// `params` must be null or valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flowres_adjusted_value(
    value: f64,
    avg_mileage: f64,
    adjacent: bool,
    params_ptr: *const FlowresParams,
    out_value: *mut f64,
) -> FlowresStatus {
    guard(|| {
        let slot = out(out_value, "out")?;
        if !(value.is_finite() && value >= 0.0 && avg_mileage.is_finite() && avg_mileage >= 0.0) {
            return Err(Failure::invalid("value and mileage must be finite and nonnegative"));
        }
        *slot = metrics::adjusted_value(value, avg_mileage, adjacent, &params(params_ptr)?);
        Ok(())
    })
}

/// Resilience and influence of one node in the view for `year`, `level` and `direction`.
///
/// # Safety
/// Pointers must be valid as documented for the other calls.
#[no_mangle]
pub unsafe extern "C" fn flowres_node_resilience(
    ws: *const FlowresWorkspace,
    year: i32,
    lvl: FlowresLevel,
    dir: FlowresDirection,
    node: *const c_char,
    params_ptr: *const FlowresParams,
    out_node: *mut FlowresNodeResilience,
) -> FlowresStatus {
    guard(|| {
        let slot = out(out_node, "out")?;
        let (ws, node) = (workspace(ws)?, text(node, "node")?);
        let eval = query::evaluate(&ws.store, year, level(lvl), direction(dir), &params(params_ptr)?)?;
        let report = eval
            .node(node)
            .ok_or_else(|| Failure(FlowresStatus::EmptySelection, format!("node {node:?} has no flows")))?;
        *slot = FlowresNodeResilience {
            resilience: report.resilience,
            influence: report.influence.unwrap_or(0.0),
            total_adjusted: report.total_adjusted,
        };
        Ok(())
    })
}

/// Import, export and overall network resilience for one year and level.
///
/// # Safety
/// Pointers must be valid as documented for the other calls.
#[no_mangle]
pub unsafe extern "C" fn flowres_network_resilience(
    ws: *const FlowresWorkspace,
    year: i32,
    lvl: FlowresLevel,
    params_ptr: *const FlowresParams,
    out_net: *mut FlowresNetworkResilience,
) -> FlowresStatus {
    guard(|| {
        let slot = out(out_net, "out")?;
        let req = QueryRequest {
            params: params(params_ptr)?,
            ..QueryRequest::new(QueryFunction::NetworkResilience, year, level(lvl))
        };
        let years = query::network_resilience_query(&workspace(ws)?.store, &req)?;
        let report = &years[0].report;
        *slot = FlowresNetworkResilience {
            import_resilience: report.import.resilience,
            export_resilience: report.export.resilience,
            overall: report.overall,
        };
        Ok(())
    })
}

/// Ranked nodes as CSV (`node_id,name,R,V_prime,I`). Free the result with `flowres_string_free`.
///
/// # Safety
/// Pointers must be valid as documented for the other calls.
#[no_mangle]
pub unsafe extern "C" fn flowres_rankings_csv(
    ws: *const FlowresWorkspace,
    year: i32,
    lvl: FlowresLevel,
    dir: FlowresDirection,
    by: FlowresRankBy,
    params_ptr: *const FlowresParams,
    out_csv: *mut *mut c_char,
) -> FlowresStatus {
    guard(|| {
        let slot = out(out_csv, "out")?;
        let store = &workspace(ws)?.store;
        let eval = query::evaluate(store, year, level(lvl), direction(dir), &params(params_ptr)?)?;
        let by = match by {
            FlowresRankBy::Resilience => RankBy::Resilience,
            FlowresRankBy::Influence => RankBy::Influence,
        };
        let mut buf = Vec::new();
        query::write_ranked_csv(&query::rank(store, &eval, by), &mut buf)?;
        give_string(String::from_utf8(buf).expect("CSV output is UTF-8"), slot)
    })
}

/// The whole graph as Turtle. Free the result with `flowres_string_free`.
///
/// # Safety
/// Pointers must be valid as documented for the other calls.
#[no_mangle]
pub unsafe extern "C" fn flowres_export_turtle(
    ws: *const FlowresWorkspace,
    out_ttl: *mut *mut c_char,
) -> FlowresStatus {
    guard(|| {
        let slot = out(out_ttl, "out")?;
        give_string(workspace(ws)?.store.to_turtle_string(), slot)
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn flowres_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
