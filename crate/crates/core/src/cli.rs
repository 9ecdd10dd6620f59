//! The `flowres` command line.
//!
//! Exit codes: 0 on success, 1 for data or selection errors, 2 for usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::adjacency::MeetOptions;
use crate::ingest::{SelfFlowHandling, SuppressedPolicy};
use crate::metrics::{AtmMode, ResilienceParams, SelfFlowBeta};
use crate::model::{Direction, Level};
use crate::query::{self, QueryError, QueryFunction, QueryRequest, RankBy};
use crate::workspace::{IngestInputs, Workspace, WorkspaceError};
use crate::Error;

/// Environment variable that overrides `--workspace`.
pub const WORKSPACE_ENV: &str = "FLOWRES_WORKSPACE";
pub const DEFAULT_WORKSPACE: &str = "flowres-workspace";

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "flowres", version, about = "Resilience of multi-commodity flow networks")]
struct Cli {
    /// Workspace bundle directory (the FLOWRES_WORKSPACE variable takes precedence)
    #[arg(long, global = true, value_name = "DIR")]
    workspace: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load CSV inputs into a workspace bundle
    Ingest(IngestArgs),
    /// Rank nodes by resilience
    Resilience(RankArgs),
    /// Rank nodes by influence
    Influence(RankArgs),
    /// Network resilience per year and level
    Network(NetworkArgs),
    /// Write the graph, a metric map layer or a metric table
    Export(ExportArgs),
    /// Influence rank changes between two years
    RankDelta(RankDeltaArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// id,name,level,parent_id,feature_code
    #[arg(long)]
    regions: PathBuf,
    /// code,description,parent,is_aggregate
    #[arg(long)]
    codes: PathBuf,
    /// year,origin_id,dest_id,sctg_code,value_musd,avg_miles,weight
    #[arg(long)]
    flows: PathBuf,
    /// id_a,id_b list of adjacent states
    #[arg(long)]
    adjacency: Option<PathBuf>,
    /// GeoJSON FeatureCollection; adjacency is derived from it when --adjacency is absent
    #[arg(long)]
    geojson: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "drop")]
    suppressed: SuppressedArg,
    /// Boundary contact tolerance in degrees for derived adjacency
    #[arg(long, default_value_t = crate::adjacency::DEFAULT_TOLERANCE_DEG)]
    tolerance: f64,
    /// Require a shared boundary of positive length (corner contact is not adjacency)
    #[arg(long)]
    positive_length: bool,
    /// Synthesize division and region flows from state flows where none were loaded
    #[arg(long, value_enum, default_value = "keep")]
    rollup: RollupArg,
}

#[derive(Args, Debug, Clone)]
struct ParamArgs {
    #[arg(long, value_enum, default_value = "sqrt")]
    atm: AtmArg,
    /// Value factor for geographically adjacent partners, in (0, 1]
    #[arg(long, default_value_t = 0.9)]
    ga: f64,
    #[arg(long, value_enum, default_value = "adjacent")]
    self_flow_beta: SelfBetaArg,
    /// Leave flows with origin == destination out of the metrics
    #[arg(long)]
    exclude_self_flows: bool,
}

impl ParamArgs {
    fn params(&self, direction: Direction) -> ResilienceParams {
        ResilienceParams {
            atm_mode: match self.atm {
                AtmArg::Sqrt => AtmMode::Sqrt,
                AtmArg::Unity => AtmMode::Unity,
            },
            ga_factor: self.ga,
            self_flow_beta: match self.self_flow_beta {
                SelfBetaArg::Adjacent => SelfFlowBeta::Adjacent,
                SelfBetaArg::Nonadjacent => SelfFlowBeta::NonAdjacent,
            },
            direction,
            include_self_flows: !self.exclude_self_flows,
        }
    }
}

#[derive(Args, Debug)]
struct RankArgs {
    /// Survey year
    #[arg(long)]
    year: i32,
    #[arg(long, value_enum, default_value = "state")]
    level: LevelArg,
    #[arg(long, value_enum, default_value = "export")]
    direction: DirectionArg,
    #[command(flatten)]
    params: ParamArgs,
    /// Keep only the first N rows
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    top: Option<u64>,
    /// Report a single node
    #[arg(long)]
    node: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    out: OutArg,
    /// Write to a file instead of standard output
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NetworkArgs {
    /// Comma-separated years, e.g. 2012,2017
    #[arg(long, value_delimiter = ',', required = true)]
    years: Vec<i32>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "state")]
    levels: Vec<LevelArg>,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum, default_value = "csv")]
    out: OutArg,
    /// Write to a file instead of standard output
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long, value_enum)]
    format: FormatArg,
    /// Metric that orders the rank property of map layers
    #[arg(long, value_enum, default_value = "r")]
    metric: MetricArg,
    /// Survey year; required by the geojson and csv formats
    #[arg(long)]
    year: Option<i32>,
    #[arg(long, value_enum, default_value = "state")]
    level: LevelArg,
    #[arg(long, value_enum, default_value = "export")]
    direction: DirectionArg,
    #[command(flatten)]
    params: ParamArgs,
    /// Write to a file instead of standard output
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RankDeltaArgs {
    /// Two years, e.g. 2012,2017
    #[arg(long, value_delimiter = ',', required = true, num_args = 1)]
    years: Vec<i32>,
    #[arg(long, value_enum, default_value = "export")]
    direction: DirectionArg,
    #[arg(long, value_enum, default_value = "state")]
    level: LevelArg,
    #[command(flatten)]
    params: ParamArgs,
    /// Write to a file instead of standard output
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SuppressedArg {
    Drop,
    Zero,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RollupArg {
    Keep,
    Drop,
    Off,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AtmArg {
    Sqrt,
    Unity,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SelfBetaArg {
    Adjacent,
    Nonadjacent,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum LevelArg {
    State,
    Division,
    Region,
}

impl From<LevelArg> for Level {
    fn from(value: LevelArg) -> Self {
        match value {
            LevelArg::State => Level::State,
            LevelArg::Division => Level::Division,
            LevelArg::Region => Level::Region,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DirectionArg {
    Import,
    Export,
}

impl From<DirectionArg> for Direction {
    fn from(value: DirectionArg) -> Self {
        match value {
            DirectionArg::Import => Direction::Import,
            DirectionArg::Export => Direction::Export,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum OutArg {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Turtle,
    Geojson,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MetricArg {
    R,
    I,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl<E: Into<Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

/// Runs the command line with explicit streams and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let workspace = std::env::var_os(WORKSPACE_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or(cli.workspace)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_WORKSPACE));
    match dispatch(cli.command, &workspace, stdout) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(message)) => {
            let _ = writeln!(stderr, "error: {message}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_DATA
        }
    }
}

fn dispatch(command: Command, workspace: &Path, stdout: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Ingest(args) => ingest(args, workspace, stdout),
        Command::Resilience(args) => ranking(args, QueryFunction::NodeExportResilience, workspace, stdout),
        Command::Influence(args) => ranking(args, QueryFunction::Influence, workspace, stdout),
        Command::Network(args) => network(args, workspace, stdout),
        Command::Export(args) => export(args, workspace, stdout),
        Command::RankDelta(args) => rank_delta(args, workspace, stdout),
    }
}

/// Writes to `--output` when given, otherwise to standard output.
fn emit(
    output: Option<&Path>,
    stdout: &mut dyn Write,
    write: impl FnOnce(&mut dyn Write) -> Result<(), QueryError>,
) -> Result<(), Failure> {
    match output {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|source| WorkspaceError::Io { path: path.to_path_buf(), source })?;
            let mut file = std::io::BufWriter::new(file);
            write(&mut file)?;
            file.flush().map_err(QueryError::from)?;
        }
        None => write(stdout)?,
    }
    Ok(())
}

fn ingest(args: IngestArgs, workspace: &Path, stdout: &mut dyn Write) -> Result<(), Failure> {
    let mut inputs = IngestInputs::new(args.regions, args.codes, args.flows);
    inputs.adjacency = args.adjacency;
    inputs.geojson = args.geojson;
    inputs.suppressed = match args.suppressed {
        SuppressedArg::Drop => SuppressedPolicy::Drop,
        SuppressedArg::Zero => SuppressedPolicy::Zero,
    };
    inputs.meet = MeetOptions { tolerance_deg: args.tolerance, require_shared_length: args.positive_length };
    inputs.rollup = match args.rollup {
        RollupArg::Keep => Some(SelfFlowHandling::Keep),
        RollupArg::Drop => Some(SelfFlowHandling::Drop),
        RollupArg::Off => None,
    };
    let (ws, _) = Workspace::ingest(&inputs)?;
    ws.save(workspace)?;
    writeln!(stdout, "regions={} flows={}", ws.store.region_count(), ws.store.flow_count())
        .map_err(QueryError::from)?;
    Ok(())
}

fn ranking(args: RankArgs, function: QueryFunction, workspace: &Path, stdout: &mut dyn Write) -> Result<(), Failure> {
    let ws = Workspace::load(workspace)?;
    let direction: Direction = args.direction.into();
    let function = match (function, direction) {
        (QueryFunction::NodeExportResilience, Direction::Import) => QueryFunction::NodeImportResilience,
        (f, _) => f,
    };
    let req = QueryRequest {
        function,
        years: vec![args.year],
        level: args.level.into(),
        params: args.params.params(direction),
        top_k: args.top.map(|k| k as usize),
        node: args.node,
    };
    req.params.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let rows = match function {
        QueryFunction::Influence => query::influence_query(&ws.store, &req)?,
        _ => query::node_resilience_query(&ws.store, &req)?,
    };
    emit(args.output.as_deref(), stdout, |w| match args.out {
        OutArg::Csv => query::write_ranked_csv(&rows, w),
        OutArg::Json => query::write_json(
            &serde_json::json!({
                "function": function.as_str(),
                "year": args.year,
                "level": req.level.token(),
                "direction": direction.as_str(),
                "params": req.params,
                "rows": rows,
            }),
            w,
        ),
    })
}

fn network(args: NetworkArgs, workspace: &Path, stdout: &mut dyn Write) -> Result<(), Failure> {
    let ws = Workspace::load(workspace)?;
    let params = args.params.params(Direction::Export);
    params.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let levels: Vec<Level> = args.levels.iter().map(|&l| l.into()).collect();
    let matrix = query::network_matrix(&ws.store, &args.years, &levels, &params)?;
    emit(args.output.as_deref(), stdout, |w| match args.out {
        OutArg::Csv => query::write_network_csv(&matrix, w),
        OutArg::Json => query::write_json(&matrix, w),
    })
}

fn export(args: ExportArgs, workspace: &Path, stdout: &mut dyn Write) -> Result<(), Failure> {
    let ws = Workspace::load(workspace)?;
    if let FormatArg::Turtle = args.format {
        return emit(args.output.as_deref(), stdout, |w| {
            ws.store.export_turtle(w).map_err(|e| match e {
                crate::store::StoreError::SinkWrite(io) => QueryError::Write(io),
                other => QueryError::Store(other),
            })
        });
    }
    let year = args.year.ok_or_else(|| Failure::Usage("--year is required for this format".into()))?;
    let direction: Direction = args.direction.into();
    let level: Level = args.level.into();
    let params = args.params.params(direction);
    params.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let by = match args.metric {
        MetricArg::R => RankBy::Resilience,
        MetricArg::I => RankBy::Influence,
    };
    let evaluated = query::evaluate(&ws.store, year, level, direction, &params)?;
    match args.format {
        FormatArg::Geojson => {
            let geometries = ws.geometries.as_ref().ok_or_else(|| {
                Failure::Data(
                    crate::adjacency::AdjacencyError::MissingGeometry(
                        "workspace has no geometry layer (ingest with --geojson)".into(),
                    )
                    .into(),
                )
            })?;
            let layer = query::geojson_layer(&ws.store, geometries, &evaluated, by);
            emit(args.output.as_deref(), stdout, |w| query::write_json(&layer, w))
        }
        FormatArg::Csv => {
            let rows = query::rank(&ws.store, &evaluated, by);
            emit(args.output.as_deref(), stdout, |w| query::write_metric_csv(&rows, level, year, direction, w))
        }
        FormatArg::Turtle => unreachable!("handled above"),
    }
}

fn rank_delta(args: RankDeltaArgs, workspace: &Path, stdout: &mut dyn Write) -> Result<(), Failure> {
    if args.years.len() != 2 {
        return Err(Failure::Usage(format!("--years takes exactly two years, got {}", args.years.len())));
    }
    let ws = Workspace::load(workspace)?;
    let direction: Direction = args.direction.into();
    let req = QueryRequest {
        function: QueryFunction::RankDelta,
        years: args.years.clone(),
        level: args.level.into(),
        params: args.params.params(direction),
        top_k: None,
        node: None,
    };
    req.params.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let rows = query::rank_delta(&ws.store, &req)?;
    emit(args.output.as_deref(), stdout, |w| query::write_rank_delta_csv(&rows, w))
}
