#![allow(dead_code)]

pub mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use flowres::adjacency::AdjacencyIndex;
use flowres::metrics::{self, AtmMode, ResilienceParams, SelfFlowBeta, ViewResilience};
use flowres::{Direction, Level, NetworkView};
use rand::Rng;

use oracle::{OFlow, OParams};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

#[derive(Debug, Clone)]
pub struct RandomNetwork {
    pub flows: Vec<OFlow>,
    pub aggregate_of: BTreeMap<String, String>,
    pub adjacent: BTreeSet<(String, String)>,
    pub params: ResilienceParams,
}

/// 2-6 nodes, 1-4 leaf codes over aggregates A and B, values in [0, 1000], mileage in [0, 2500].
pub fn random_network<R: Rng>(rng: &mut R) -> RandomNetwork {
    let n = rng.gen_range(2..=6);
    let nodes: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
    let k = rng.gen_range(1..=4);
    let mut aggregate_of = BTreeMap::new();
    for c in 0..k {
        // first code under A, second under B, then random
        let agg = match c {
            0 => "A",
            1 => "B",
            _ if rng.gen_bool(0.5) => "A",
            _ => "B",
        };
        aggregate_of.insert(format!("0{}", c + 1), agg.to_string());
    }
    let mut adjacent = BTreeSet::new();
    for a in &nodes {
        for b in &nodes {
            if a < b && rng.gen_bool(0.4) {
                adjacent.insert((a.clone(), b.clone()));
            }
        }
    }
    let mut flows = Vec::new();
    for o in &nodes {
        for d in &nodes {
            for code in aggregate_of.keys() {
                let p = if o == d { 0.2 } else { 0.6 };
                if !rng.gen_bool(p) {
                    continue;
                }
                let value = if rng.gen_bool(0.05) { 0.0 } else { rng.gen_range(0.0..=1000.0) };
                let atm = if rng.gen_bool(0.1) { rng.gen_range(0.0..1.0) } else { rng.gen_range(0.0..=2500.0) };
                flows.push(OFlow { origin: o.clone(), dest: d.clone(), code: code.clone(), value, atm });
            }
        }
    }
    if flows.is_empty() {
        let code = aggregate_of.keys().next().unwrap().clone();
        flows.push(OFlow { origin: nodes[0].clone(), dest: nodes[1].clone(), code, value: 10.0, atm: 5.0 });
    }
    let params = ResilienceParams {
        atm_mode: if rng.gen_bool(0.8) { AtmMode::Sqrt } else { AtmMode::Unity },
        ga_factor: if rng.gen_bool(0.5) { 0.9 } else { rng.gen_range(0.05..=1.0) },
        self_flow_beta: if rng.gen_bool(0.5) { SelfFlowBeta::Adjacent } else { SelfFlowBeta::NonAdjacent },
        direction: Direction::Export,
        include_self_flows: rng.gen_bool(0.7),
    };
    RandomNetwork { flows, aggregate_of, adjacent, params }
}

impl RandomNetwork {
    pub fn view(&self, direction: Direction) -> NetworkView {
        let mut b = NetworkView::builder(2017, Level::State, direction);
        for f in &self.flows {
            let (focal, partner) = match direction {
                Direction::Export => (&f.origin, &f.dest),
                Direction::Import => (&f.dest, &f.origin),
            };
            b.push(focal, partner, &f.code, &self.aggregate_of[&f.code], f.value, f.atm);
        }
        b.build().unwrap()
    }

    pub fn adjacency(&self) -> AdjacencyIndex {
        let mut index = AdjacencyIndex::new();
        for (a, b) in &self.adjacent {
            index.insert(a, b).unwrap();
        }
        index
    }

    pub fn oracle_params(&self) -> OParams {
        OParams {
            sqrt_atm: self.params.atm_mode == AtmMode::Sqrt,
            ga: self.params.ga_factor,
            self_adjacent: self.params.self_flow_beta == SelfFlowBeta::Adjacent,
            include_self: self.params.include_self_flows,
        }
    }

    pub fn engine(&self, direction: Direction) -> Result<ViewResilience, metrics::MetricsError> {
        metrics::evaluate_view(&self.view(direction), &self.adjacency(), &self.params)
    }

    pub fn oracle(&self, direction: Direction) -> oracle::ODirection {
        oracle::evaluate(
            &self.flows,
            &self.aggregate_of,
            &self.adjacent,
            self.oracle_params(),
            direction == Direction::Export,
        )
    }
}

/// Largest absolute difference between engine and oracle over every reported quantity,
/// or an error describing a structural mismatch.
pub fn compare(
    engine: &Result<ViewResilience, metrics::MetricsError>,
    oracle: &oracle::ODirection,
) -> Result<f64, String> {
    let engine = match (engine, oracle.r_net) {
        (Err(metrics::MetricsError::DegenerateNetwork), None) => return Ok(0.0),
        (Err(metrics::MetricsError::NoFlows(_)), None) if oracle.r.is_empty() => return Ok(0.0),
        (Err(e), _) => return Err(format!("engine failed: {e}")),
        (Ok(_), None) => return Err("oracle degenerate, engine not".into()),
        (Ok(v), Some(_)) => v,
    };
    let mut worst: f64 = 0.0;
    let mut diff = |a: f64, b: f64| worst = worst.max((a - b).abs());
    if engine.nodes.len() != oracle.r.len() {
        return Err(format!("node count {} vs {}", engine.nodes.len(), oracle.r.len()));
    }
    for node in &engine.nodes {
        let id = &node.node;
        diff(node.resilience, oracle.r[id]);
        diff(node.breakdown.node_dependence, oracle.d_node[id]);
        diff(node.influence.unwrap(), oracle.influence[id]);
        for c in &node.breakdown.codes {
            let expected = oracle.d_code.get(&(id.clone(), c.code.clone())).ok_or("extra code")?;
            diff(c.dependence, *expected);
        }
        for a in &node.breakdown.aggregates {
            let expected = oracle.d_agg.get(&(id.clone(), a.aggregate.clone())).ok_or("extra aggregate")?;
            diff(a.dependence, *expected);
        }
        let codes = oracle.d_code.keys().filter(|(n, _)| n == id).count();
        if codes != node.breakdown.codes.len() {
            return Err(format!("code count mismatch at {id}"));
        }
        // relative check for the scale-dependent total
        diff(node.total_adjusted / oracle.v_prime[id], 1.0);
    }
    diff(engine.network.resilience, oracle.r_net.unwrap());
    Ok(worst)
}

/// Runs the `flowres` binary with the workspace variable set.
pub fn flowres(workspace: &std::path::Path, args: &[&str], threads: Option<usize>) -> std::process::Output {
    let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_flowres"));
    cmd.args(args).env("FLOWRES_WORKSPACE", workspace);
    if let Some(n) = threads {
        cmd.env("RAYON_NUM_THREADS", n.to_string());
    }
    cmd.output().expect("flowres binary runs")
}

/// Full CLI pipeline over a bundled fixture: ingest, then every query and export.
/// Returns each command's standard output under a golden-file name.
pub fn run_pipeline(
    fixture: &str,
    workspace: &std::path::Path,
    years: (i32, i32),
    threads: Option<usize>,
) -> Result<Vec<(String, Vec<u8>)>, String> {
    let dir = data_dir().join(fixture);
    let path = |f: &str| dir.join(f).to_string_lossy().into_owned();
    let (a, b) = (years.0.to_string(), years.1.to_string());
    let both = format!("{a},{b}");
    let ingest = [
        "ingest",
        "--regions",
        &path("regions.csv"),
        "--codes",
        &path("codes.csv"),
        "--flows",
        &path("flows.csv"),
        "--adjacency",
        &path("adjacency.csv"),
        "--geojson",
        &path("geometries.geojson"),
    ];
    let steps: Vec<(&str, Vec<&str>)> = vec![
        ("ingest.txt", ingest.to_vec()),
        ("resilience_export.csv", vec!["resilience", "--year", &b, "--direction", "export", "--top", "10"]),
        ("resilience_import.csv", vec!["resilience", "--year", &b, "--direction", "import"]),
        ("resilience_neutral.csv", vec!["resilience", "--year", &b, "--atm", "unity", "--ga", "1.0"]),
        ("resilience_export.json", vec!["resilience", "--year", &b, "--out", "json"]),
        ("influence_export.csv", vec!["influence", "--year", &b, "--direction", "export"]),
        ("network.csv", vec!["network", "--years", &both, "--levels", "state,division,region"]),
        ("network.json", vec!["network", "--years", &both, "--levels", "state,division,region", "--out", "json"]),
        ("rank_delta_export.csv", vec!["rank-delta", "--years", &both, "--direction", "export"]),
        ("rank_delta_import.csv", vec!["rank-delta", "--years", &both, "--direction", "import"]),
        ("export.ttl", vec!["export", "--format", "turtle"]),
        ("export_metrics.csv", vec!["export", "--format", "csv", "--year", &b]),
        ("export_influence.geojson", vec!["export", "--format", "geojson", "--metric", "i", "--year", &b]),
    ];
    let mut outputs = Vec::new();
    for (name, args) in steps {
        let out = flowres(workspace, &args, threads);
        if !out.status.success() {
            return Err(format!("{name}: {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
        }
        outputs.push((name.to_string(), out.stdout));
    }
    Ok(outputs)
}

pub fn golden_dir(fixture: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(fixture)
}

/// Compares outputs with the golden files; with FLOWRES_BLESS=1 rewrites them instead.
pub fn check_golden(fixture: &str, outputs: &[(String, Vec<u8>)]) -> Result<(), String> {
    let dir = golden_dir(fixture);
    if std::env::var_os("FLOWRES_BLESS").is_some() {
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        for (name, bytes) in outputs {
            std::fs::write(dir.join(name), bytes).map_err(|e| e.to_string())?;
        }
        return Ok(());
    }
    let mut mismatched = Vec::new();
    for (name, bytes) in outputs {
        match std::fs::read(dir.join(name)) {
            Ok(expected) if &expected == bytes => {}
            Ok(_) => mismatched.push(format!("{name} differs")),
            Err(e) => mismatched.push(format!("{name}: {e}")),
        }
    }
    if mismatched.is_empty() {
        Ok(())
    } else {
        Err(mismatched.join("; "))
    }
}
