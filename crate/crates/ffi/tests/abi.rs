use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::ptr;

use flowres_ffi::*;

fn data(fixture: &str, file: &str) -> CString {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(fixture).join(file);
    CString::new(path.to_string_lossy().into_owned()).unwrap()
}

fn last_error() -> String {
    let p = flowres_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn toy() -> *mut FlowresWorkspace {
    let (r, c, f, a) =
        (data("toy", "regions.csv"), data("toy", "codes.csv"), data("toy", "flows.csv"), data("toy", "adjacency.csv"));
    let mut ws = ptr::null_mut();
    let status =
        unsafe { flowres_workspace_ingest(r.as_ptr(), c.as_ptr(), f.as_ptr(), a.as_ptr(), ptr::null(), &mut ws) };
    assert_eq!(status, FlowresStatus::Ok);
    assert!(!ws.is_null());
    ws
}

unsafe fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = CStr::from_ptr(p).to_string_lossy().into_owned();
    flowres_string_free(p);
    s
}

#[test]
fn adjusted_value_matches_defaults() {
    let mut v = 0.0;
    let status = unsafe { flowres_adjusted_value(100.0, 400.0, true, ptr::null(), &mut v) };
    assert_eq!(status, FlowresStatus::Ok);
    assert!((v - 1800.0).abs() < 1e-9, "{v}");
    assert!(flowres_last_error().is_null());

    let mut params = flowres_params_default();
    params.atm_sqrt = false;
    params.ga_factor = 1.0;
    unsafe { flowres_adjusted_value(100.0, 400.0, true, &params, &mut v) };
    assert_eq!(v, 100.0);
}

#[test]
fn invalid_arguments_set_status_and_message() {
    let mut v = 0.0;
    let mut params = flowres_params_default();
    params.ga_factor = 0.0;
    let status = unsafe { flowres_adjusted_value(1.0, 1.0, false, &params, &mut v) };
    assert_eq!(status, FlowresStatus::InvalidArgument);
    assert!(last_error().contains("ga"), "{}", last_error());

    let status = unsafe { flowres_adjusted_value(1.0, 1.0, false, ptr::null(), ptr::null_mut()) };
    assert_eq!(status, FlowresStatus::NullArgument);

    let mut ws = ptr::null_mut();
    let missing = CString::new("/nonexistent/regions.csv").unwrap();
    let status = unsafe {
        flowres_workspace_ingest(
            missing.as_ptr(),
            missing.as_ptr(),
            missing.as_ptr(),
            ptr::null(),
            ptr::null(),
            &mut ws,
        )
    };
    assert_eq!(status, FlowresStatus::Io);
    assert!(ws.is_null());
    assert!(last_error().contains("/nonexistent/regions.csv"));
}

#[test]
fn node_and_network_resilience() {
    let ws = toy();
    unsafe {
        let node = CString::new("IL").unwrap();
        let mut r = FlowresNodeResilience::default();
        let status = flowres_node_resilience(
            ws,
            2017,
            FlowresLevel::State,
            FlowresDirection::Export,
            node.as_ptr(),
            ptr::null(),
            &mut r,
        );
        assert_eq!(status, FlowresStatus::Ok);
        assert!((r.resilience - 0.5).abs() < 1e-12);
        assert!((r.influence - 0.5).abs() < 1e-12);

        let mut net = FlowresNetworkResilience::default();
        let status = flowres_network_resilience(ws, 2012, FlowresLevel::State, ptr::null(), &mut net);
        assert_eq!(status, FlowresStatus::Ok);
        assert!((net.overall - 0.5).abs() < 1e-12);

        let status = flowres_network_resilience(ws, 1999, FlowresLevel::State, ptr::null(), &mut net);
        assert_eq!(status, FlowresStatus::EmptySelection);
        assert!(last_error().contains("1999"));
        flowres_workspace_free(ws);
    }
}

#[test]
fn string_outputs() {
    let ws = toy();
    unsafe {
        let mut csv = ptr::null_mut();
        let status = flowres_rankings_csv(
            ws,
            2017,
            FlowresLevel::State,
            FlowresDirection::Import,
            FlowresRankBy::Influence,
            ptr::null(),
            &mut csv,
        );
        assert_eq!(status, FlowresStatus::Ok);
        let csv = take_string(csv);
        assert!(csv.starts_with("node_id,name,R,V_prime,I\n"), "{csv}");
        assert_eq!(csv.lines().count(), 3);

        let mut ttl = ptr::null_mut();
        assert_eq!(flowres_export_turtle(ws, &mut ttl), FlowresStatus::Ok);
        let ttl = take_string(ttl);
        assert!(ttl.starts_with("@prefix") && ttl.contains("cfs:region_IL"), "{ttl}");
        flowres_workspace_free(ws);
    }
}

#[test]
fn save_and_load_through_the_abi() {
    let ws = toy();
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().to_string_lossy().into_owned()).unwrap();
    unsafe {
        assert_eq!(flowres_workspace_save(ws, path.as_ptr()), FlowresStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(flowres_workspace_load(path.as_ptr(), &mut back), FlowresStatus::Ok);
        assert_eq!(flowres_workspace_flow_count(back), flowres_workspace_flow_count(ws));
        assert!(flowres_workspace_flow_count(ws) > 0);
        flowres_workspace_free(back);
        flowres_workspace_free(ws);
        flowres_workspace_free(ptr::null_mut());
        assert_eq!(flowres_workspace_flow_count(ptr::null()), 0);
    }
}
