mod common;

use std::num::NonZeroUsize;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use common::{fixture, QUERIES};
use http_body_util::BodyExt;
use ocpq::export::{export_csv, CsvOptions};
use ocpq::ocel::import_ocel2_json;
use ocpq::query_json::parse_query_json;
use ocpq::server::{router, AppState, ServerConfig};
use ocpq_core::synthetic::{generate_loan_log, LoanConfig};
use ocpq_core::{build_index, evaluate_tree, EvalOptions};
use serde_json::{json, Value};
use tower::ServiceExt;

struct Reply {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

async fn send(state: &Arc<AppState>, method: Method, uri: &str, body: Vec<u8>) -> Reply {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .header(header::ORIGIN, "http://localhost:5173")
        .body(Body::from(body))
        .unwrap();
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    Reply {
        status,
        headers,
        body,
    }
}

async fn get(state: &Arc<AppState>, uri: &str) -> Reply {
    send(state, Method::GET, uri, Vec::new()).await
}

async fn upload(state: &Arc<AppState>, log: Vec<u8>) -> String {
    let r = send(state, Method::POST, "/api/log", log).await;
    assert_eq!(
        r.status,
        StatusCode::OK,
        "{}",
        String::from_utf8_lossy(&r.body)
    );
    r.json()["logId"].as_str().unwrap().to_string()
}

async fn evaluate(state: &Arc<AppState>, log_id: &str, tree: Value) -> Reply {
    let body = serde_json::to_vec(&json!({"logId": log_id, "tree": tree})).unwrap();
    send(state, Method::POST, "/api/query/evaluate", body).await
}

fn tree_json(name: &str) -> Value {
    serde_json::from_slice(&fixture(name)).unwrap()
}

fn state() -> Arc<AppState> {
    AppState::new(ServerConfig::default())
}

#[tokio::test]
async fn log_metadata() {
    let s = state();
    let r = send(&s, Method::POST, "/api/log", fixture("l_ex.json")).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert_eq!(
        v["counts"],
        json!({"events": 6, "objects": 4, "relationships": 14})
    );
    assert_eq!(v["objectTypes"], json!(["customers", "items", "orders"]));
    assert_eq!(
        v["eventTypes"],
        json!([
            "pack item",
            "pay order",
            "payment reminder",
            "place order",
            "ship items"
        ])
    );
    assert!(v["qualifiers"]
        .as_array()
        .unwrap()
        .contains(&json!("places")));
    assert_eq!(v["logId"].as_str().unwrap().len(), 64);
    assert!(r.headers.contains_key(header::ACCESS_CONTROL_ALLOW_ORIGIN));

    let info = get(
        &s,
        &format!("/api/log/{}/info", v["logId"].as_str().unwrap()),
    )
    .await;
    assert_eq!(info.status, StatusCode::OK);
    assert_eq!(info.json(), v);
    assert_eq!(
        get(&s, "/api/log/deadbeef/info").await.status,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn invalid_logs() {
    let s = state();
    let r = send(&s, Method::POST, "/api/log", b"{\"objects\": ".to_vec()).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["error"], "ParseError");
    let empty_e2o =
        br#"{"objects": [], "events": [{"id": "e1", "type": "a", "time": "2023-01-01T00:00:00Z"}]}"#.to_vec();
    let r = send(&s, Method::POST, "/api/log?strict=true", empty_e2o.clone()).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["findings"][0]["code"], "EventWithoutObjects");
    let r = send(&s, Method::POST, "/api/log", empty_e2o).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["warnings"][0]["code"], "EventWithoutObjects");
}

#[tokio::test]
async fn oversized_log_is_rejected() {
    let s = AppState::new(ServerConfig {
        max_body_bytes: 512,
        ..ServerConfig::default()
    });
    let r = send(&s, Method::POST, "/api/log", fixture("l_ex.json")).await;
    assert_eq!(r.status, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn constraint_example_summary() {
    let s = state();
    let log_id = upload(&s, fixture("l_confirm.json")).await;
    let r = evaluate(&s, &log_id, tree_json("confirm_tree.json")).await;
    assert_eq!(
        r.status,
        StatusCode::OK,
        "{}",
        String::from_utf8_lossy(&r.body)
    );
    let v = r.json();
    assert_eq!(
        v["perNode"][0],
        json!({"nodeId": "v0", "totalBasic": 4, "satisfied": 2, "violated": 2, "cbsExcluded": 0, "violationPercent": "50.00"})
    );
    assert_eq!(v["perNode"][1]["violationPercent"], "0.00");

    let result_id = v["resultId"].as_str().unwrap();
    let page = get(&s, &format!("/api/result/{result_id}/node/v0"))
        .await
        .json();
    assert_eq!(page["total"], 4);
    assert_eq!(page["columns"]["vars"], json!(["o1", "e1"]));
    assert_eq!(
        page["rows"][2],
        json!({"index": 2, "parent": null, "binding": {"o1": "o3", "e1": "e3"}, "cbsExcluded": false,
               "verdicts": [false], "labels": {}})
    );
    let child = get(&s, &format!("/api/result/{result_id}/node/v1"))
        .await
        .json();
    assert_eq!(
        child["rows"][0]["binding"],
        json!({"o1": "o1", "e1": "e1", "e2": "e7"})
    );
    assert_eq!(child["rows"][0]["parent"], 0);

    let csv = get(&s, &format!("/api/result/{result_id}/node/v0/export.csv")).await;
    assert_eq!(csv.status, StatusCode::OK);
    assert!(csv.headers[header::CONTENT_TYPE]
        .to_str()
        .unwrap()
        .starts_with("text/csv"));
    assert_eq!(
        String::from_utf8(csv.body).unwrap(),
        "o1,e1,satisfied\no1,e1,true\no2,e2,true\no3,e3,false\no4,e4,false\n"
    );
}

#[tokio::test]
async fn basic_only_rows_on_request() {
    let s = state();
    let log_id = upload(&s, fixture("l_payments.json")).await;
    let v = evaluate(&s, &log_id, tree_json("payments_cbs_tree.json"))
        .await
        .json();
    assert_eq!(v["perNode"][0]["cbsExcluded"], 3);
    let rid = v["resultId"].as_str().unwrap();
    let page = get(&s, &format!("/api/result/{rid}/node/v0")).await.json();
    assert_eq!(page["total"], 1);
    assert_eq!(page["rows"][0]["binding"]["o1"], "o4");
    let page = get(
        &s,
        &format!("/api/result/{rid}/node/v0?includeBasicOnly=true"),
    )
    .await
    .json();
    assert_eq!(page["total"], 4);
    let flags: Vec<bool> = page["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["cbsExcluded"].as_bool().unwrap())
        .collect();
    assert_eq!(flags, [true, true, true, false]);
    let csv = get(
        &s,
        &format!("/api/result/{rid}/node/v0/export.csv?includeBasicOnly=true"),
    )
    .await;
    assert_eq!(String::from_utf8(csv.body).unwrap().lines().count(), 5);
}

#[tokio::test]
async fn page_beyond_end() {
    let s = state();
    let log_id = upload(&s, fixture("l_confirm.json")).await;
    let v = evaluate(&s, &log_id, tree_json("confirm_tree.json"))
        .await
        .json();
    let rid = v["resultId"].as_str().unwrap();
    let page = get(&s, &format!("/api/result/{rid}/node/v0?offset=10&limit=5")).await;
    assert_eq!(page.status, StatusCode::OK);
    let page = page.json();
    assert_eq!(page["rows"], json!([]));
    assert_eq!(page["total"], 4);
    assert_eq!(
        get(&s, &format!("/api/result/{rid}/node/v7")).await.status,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        get(&s, "/api/result/nope/node/v0").await.status,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        get(&s, &format!("/api/result/{rid}/node/v7/export.csv"))
            .await
            .status,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn invalid_trees_are_422() {
    let s = state();
    let log_id = upload(&s, fixture("l_payments.json")).await;
    let mut tree = tree_json("payments_tree.json");
    tree["edges"][1]["label"] = json!("A");
    let r = evaluate(&s, &log_id, tree).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    let v = r.json();
    assert_eq!(v["error"], "InvalidTree");
    let f = v["findings"].as_array().unwrap();
    assert!(
        f.iter()
            .any(|f| f["code"] == "DuplicateEdgeLabel" && f["location"] == "A"),
        "{v}"
    );

    let r = evaluate(&s, &log_id, json!({"root": 1})).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r.json()["error"], "ParseError");
    let r = send(
        &s,
        Method::POST,
        "/api/query/evaluate",
        b"not json".to_vec(),
    )
    .await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    let r = evaluate(&s, "unknown", tree_json("payments_tree.json")).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn row_cap_is_409() {
    let s = AppState::new(ServerConfig {
        eval: EvalOptions {
            threads: 1,
            max_rows_per_node: 2,
        },
        ..ServerConfig::default()
    });
    let log_id = upload(&s, fixture("l_confirm.json")).await;
    let r = evaluate(&s, &log_id, tree_json("confirm_tree.json")).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.json()["error"], "ResultTooLarge");
    assert_eq!(r.json()["limit"], 2);
}

fn loan_log() -> Vec<u8> {
    ocpq::ocel::export_ocel2_json(&generate_loan_log(&LoanConfig {
        num_applications: 60,
        seed: 9,
        ..LoanConfig::default()
    }))
}

#[tokio::test]
async fn responses_are_deterministic() {
    let log = loan_log();
    let mut bodies = Vec::new();
    for threads in [1, 2, 8] {
        let s = AppState::new(ServerConfig {
            eval: EvalOptions::with_threads(threads),
            ..ServerConfig::default()
        });
        let id = upload(&s, log.clone()).await;
        let mut per_state = Vec::new();
        for q in QUERIES {
            let tree = tree_json(&format!("{q}.json"));
            let first = evaluate(&s, &id, tree.clone()).await;
            let again = evaluate(&s, &id, tree).await;
            assert_eq!(first.status, StatusCode::OK);
            assert_eq!(first.body, again.body);
            let rid = first.json()["resultId"].as_str().unwrap().to_string();
            let page = get(
                &s,
                &format!("/api/result/{rid}/node/v1?limit=10000&includeBasicOnly=true"),
            )
            .await;
            per_state.push((first.body, page.body));
        }
        bodies.push(per_state);
    }
    assert_eq!(bodies[0], bodies[1]);
    assert_eq!(bodies[0], bodies[2]);
}

#[tokio::test]
async fn pages_concatenate_to_the_full_table() {
    let log = loan_log();
    let s = state();
    let id = upload(&s, log.clone()).await;
    let imported = import_ocel2_json(&log, true).unwrap().log;
    let idx = build_index(&imported).unwrap();
    for q in ["q2", "q5", "q7"] {
        let tree = parse_query_json(&fixture(&format!("{q}.json"))).unwrap();
        let expected = evaluate_tree(&tree, &idx, EvalOptions::with_threads(1)).unwrap();
        let v = evaluate(&s, &id, tree_json(&format!("{q}.json")))
            .await
            .json();
        let rid = v["resultId"].as_str().unwrap();
        for (node, table) in tree.nodes.iter().zip(&expected.nodes) {
            for limit in [1, 7, 50] {
                let mut rows = Vec::new();
                let mut offset = 0;
                loop {
                    let uri = format!("/api/result/{rid}/node/{}?offset={offset}&limit={limit}&includeBasicOnly=true", node.id);
                    let page = get(&s, &uri).await.json();
                    assert_eq!(page["total"], table.rows.len());
                    let chunk = page["rows"].as_array().unwrap().clone();
                    if chunk.is_empty() {
                        break;
                    }
                    assert!(chunk.len() <= limit);
                    rows.extend(chunk);
                    offset += limit;
                }
                let full = get(
                    &s,
                    &format!(
                        "/api/result/{rid}/node/{}?limit=10000&includeBasicOnly=true",
                        node.id
                    ),
                )
                .await
                .json();
                assert_eq!(Value::from(rows.clone()), full["rows"]);
                let indices: Vec<u64> = rows.iter().map(|r| r["index"].as_u64().unwrap()).collect();
                assert_eq!(indices, (0..table.rows.len() as u64).collect::<Vec<_>>());
            }
            let opts = CsvOptions {
                include_basic_only: false,
                include_labels: true,
            };
            let csv = get(
                &s,
                &format!("/api/result/{rid}/node/{}/export.csv", node.id),
            )
            .await;
            assert_eq!(
                csv.body,
                export_csv(&expected, &tree, &idx, &node.id, opts).unwrap()
            );
        }
    }
}

#[tokio::test]
async fn results_are_evicted() {
    let s = AppState::new(ServerConfig {
        max_results: NonZeroUsize::new(1).unwrap(),
        max_logs: NonZeroUsize::new(1).unwrap(),
        ..ServerConfig::default()
    });
    let confirm_log = upload(&s, fixture("l_confirm.json")).await;
    let first = evaluate(&s, &confirm_log, tree_json("confirm_tree.json"))
        .await
        .json();
    let rid = first["resultId"].as_str().unwrap();
    evaluate(&s, &confirm_log, tree_json("payments_tree.json")).await;
    assert_eq!(
        get(&s, &format!("/api/result/{rid}/node/v0")).await.status,
        StatusCode::NOT_FOUND
    );
    upload(&s, fixture("l_payments.json")).await;
    assert_eq!(
        get(&s, &format!("/api/log/{confirm_log}/info"))
            .await
            .status,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn slow_evaluations_time_out() {
    let s = AppState::new(ServerConfig {
        eval_timeout: Duration::ZERO,
        ..ServerConfig::default()
    });
    let id = upload(&s, loan_log()).await;
    // An unconstrained cross product with several hundred thousand rows.
    let var = |n: &str, k: &str, t: &str| json!({"name": n, "kind": k, "types": [t]});
    let tree = json!({"root": "v0", "nodes": [{"id": "v0", "vars": [
        var("a", "event", "O_Sent"), var("b", "event", "O_Created"), var("r", "object", "Resource"),
        var("s", "object", "Resource")]}]});
    let r = evaluate(&s, &id, tree).await;
    assert_eq!(r.status, StatusCode::GATEWAY_TIMEOUT);
    assert_eq!(r.json()["error"], "Timeout");
}

#[tokio::test]
async fn static_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>editor</h1>").unwrap();
    let s = AppState::new(ServerConfig {
        static_dir: Some(dir.path().to_path_buf()),
        ..ServerConfig::default()
    });
    let r = get(&s, "/").await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body, b"<h1>editor</h1>");
    assert_eq!(get(&s, "/missing.js").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn serves_over_tcp() {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let server = tokio::spawn(ocpq::server::serve(listener, state()));
    let mut conn = tokio::net::TcpStream::connect(addr).await.unwrap();
    conn.write_all(b"GET /api/log/x/info HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut buf = String::new();
    conn.read_to_string(&mut buf).await.unwrap();
    assert!(buf.starts_with("HTTP/1.1 404"), "{buf}");
    server.abort();
}
