//! Reproduction of the published CFS 2012/2017 results. Needs the public state
//! tables converted to the ingest schema, in `$FLOWRES_CFS_DIR/flows.csv`.

mod common;

use flowres::metrics::ResilienceParams;
use flowres::query::{self, QueryFunction, QueryRequest};
use flowres::workspace::{IngestInputs, Workspace};
use flowres::{Direction, Level};

#[test]
#[ignore = "needs CFS tables in FLOWRES_CFS_DIR"]
fn published_network_values() {
    let dir = std::path::PathBuf::from(std::env::var_os("FLOWRES_CFS_DIR").expect("FLOWRES_CFS_DIR is set"));
    let us = common::data_dir().join("us");
    let mut inputs = IngestInputs::new(us.join("regions.csv"), us.join("codes.csv"), dir.join("flows.csv"));
    inputs.adjacency = Some(us.join("adjacency.csv"));
    let (ws, _) = Workspace::ingest(&inputs).unwrap();

    let params = ResilienceParams::default();
    let matrix = query::network_matrix(&ws.store, &[2012, 2017], &Level::ALL, &params).unwrap();
    let state = &matrix.rows[0];
    assert!((state.years[0].report.overall - 0.867).abs() <= 0.02);
    assert!((state.years[1].report.overall - 0.880).abs() <= 0.02);
    let signs: Vec<bool> = matrix.rows.iter().map(|r| r.change_pct.unwrap_or(0.0) > 0.0).collect();
    assert_eq!(signs, [true, false, false]);

    let req = QueryRequest {
        params: params.with_direction(Direction::Export),
        top_k: Some(2),
        ..QueryRequest::new(QueryFunction::Influence, 2017, Level::State)
    };
    let mut top: Vec<String> =
        query::influence_query(&ws.store, &req).unwrap().into_iter().map(|r| r.node_id).collect();
    top.sort();
    assert_eq!(top, ["CA", "TX"]);
}
