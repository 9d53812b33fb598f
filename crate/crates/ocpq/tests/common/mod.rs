#![allow(dead_code)]

use ocpq::ocel::import_ocel2_json;
use ocpq::query_json::parse_query_json;
use ocpq_core::{
    build_index, evaluate_tree, EvalOptions, EvaluationResult, IndexedLog, Oced, QueryTree,
};

pub const QUERIES: [&str; 7] = ["q1", "q2", "q3", "q4", "q5", "q6", "q7"];

pub fn fixture_path(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn log(name: &str) -> (Oced, IndexedLog) {
    let log = import_ocel2_json(&fixture(name), true).unwrap().log;
    let idx = build_index(&log).unwrap();
    (log, idx)
}

pub fn query(name: &str) -> QueryTree {
    parse_query_json(&fixture(name)).unwrap()
}

pub fn eval(tree: &QueryTree, idx: &IndexedLog) -> EvaluationResult {
    evaluate_tree(tree, idx, EvalOptions::with_threads(1)).unwrap()
}
