mod common;

use common::{eval, log, query};
use ocpq::export::{export_csv, summary_json, CsvOptions, ExportError};
use ocpq_core::synthetic::{generate_synthetic, random_query_tree, small_config, RandomTreeConfig};
use ocpq_core::{
    build_index, BindingBox, Event, Object, Oced, Predicate, Qualifier, QueryTree, Timestamp,
};
use proptest::prelude::*;

fn records(bytes: &[u8]) -> Vec<Vec<String>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(bytes)
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

fn column(table: &[Vec<String>], name: &str) -> Vec<String> {
    let i = table[0].iter().position(|h| h == name).unwrap();
    table[1..].iter().map(|r| r[i].clone()).collect()
}

const ALL: CsvOptions = CsvOptions {
    include_basic_only: true,
    include_labels: true,
};

#[test]
fn constraint_verdicts_column() {
    let (_, idx) = log("l_confirm.json");
    let tree = query("confirm_tree.json");
    let result = eval(&tree, &idx);
    let table = records(&export_csv(&result, &tree, &idx, "v0", CsvOptions::default()).unwrap());
    assert_eq!(table[0], ["o1", "e1", "satisfied"]);
    assert_eq!(table.len(), 5);
    assert_eq!(
        column(&table, "satisfied"),
        ["true", "true", "false", "false"]
    );
    assert_eq!(column(&table, "o1"), ["o1", "o2", "o3", "o4"]);

    let s = summary_json(&result);
    assert_eq!(s[0].violation_percent, "50.00");
    assert_eq!((s[0].satisfied, s[0].violated), (2, 2));
    assert_eq!(s[1].violation_percent, "0.00");
}

#[test]
fn excluded_rows_are_flagged_or_dropped() {
    let (_, idx) = log("l_payments.json");
    let tree = query("payments_cbs_tree.json");
    let result = eval(&tree, &idx);
    let with = records(&export_csv(&result, &tree, &idx, "v0", ALL).unwrap());
    assert_eq!(with[0], ["o1", "e1", "cbs_excluded"]);
    assert_eq!(
        column(&with, "cbs_excluded"),
        ["true", "true", "true", "false"]
    );
    let without = records(&export_csv(&result, &tree, &idx, "v0", CsvOptions::default()).unwrap());
    assert_eq!(without, [vec!["o1", "e1"], vec!["o4", "e4"]]);
}

#[test]
fn child_tables_list_declared_variables() {
    let (_, idx) = log("l_payments.json");
    let tree = query("payments_tree.json");
    let result = eval(&tree, &idx);
    let v1 = records(&export_csv(&result, &tree, &idx, "v1", ALL).unwrap());
    assert_eq!(v1[0], ["o1", "e1", "e2", "cbs_excluded"]);
    assert_eq!(
        v1[1..],
        [
            vec!["o3", "e3", "e7", "false"],
            vec!["o3", "e3", "e8", "false"]
        ]
    );
    let v2 = records(&export_csv(&result, &tree, &idx, "v2", CsvOptions::default()).unwrap());
    assert_eq!(column(&v2, "e2"), ["e5", "e6", "e9"]);
}

#[test]
fn labels_in_milliseconds() {
    let (_, idx) = log("l_payments.json");
    let mut tree = query("payments_tree.json");
    tree.nodes[0].binding_box = tree.nodes[0]
        .binding_box
        .clone()
        .with_label("n", ocpq_core::LabelAggregation::Count { edge: "A".into() })
        .with_label(
            "slowest",
            ocpq_core::LabelAggregation::MaxDuration {
                edge: "A".into(),
                from: "e1".into(),
                to: "e2".into(),
            },
        );
    let result = eval(&tree, &idx);
    let t = records(&export_csv(&result, &tree, &idx, "v0", ALL).unwrap());
    assert_eq!(t[0], ["o1", "e1", "n", "slowest", "cbs_excluded"]);
    assert_eq!(column(&t, "n"), ["0", "0", "2", "0"]);
    assert_eq!(column(&t, "slowest"), ["", "", "1468800000", ""]);
    let no_labels = CsvOptions {
        include_labels: false,
        ..ALL
    };
    let t = records(&export_csv(&result, &tree, &idx, "v0", no_labels).unwrap());
    assert_eq!(t[0], ["o1", "e1", "cbs_excluded"]);
}

#[test]
fn empty_node_is_header_only() {
    let log = Oced::new(vec![], vec![Object::new("o1", "orders")]);
    let idx = build_index(&log).unwrap();
    let tree = QueryTree::new(
        "v0",
        BindingBox::new()
            .event_var("e", ["pay order"])
            .object_var("o", ["orders"]),
    );
    let result = eval(&tree, &idx);
    assert_eq!(
        export_csv(&result, &tree, &idx, "v0", ALL).unwrap(),
        b"e,o,cbs_excluded\n"
    );
    assert_eq!(
        export_csv(&result, &tree, &idx, "v9", ALL),
        Err(ExportError::UnknownNode("v9".into()))
    );
}

#[test]
fn ids_are_quoted() {
    let log = Oced::new(
        vec![Event::new("e,1", "a", Timestamp::from_millis(0)).with_object("q", "o \"x\"")],
        vec![Object::new("o \"x\"", "t")],
    );
    let idx = build_index(&log).unwrap();
    let tree = QueryTree::new(
        "v0",
        BindingBox::new()
            .event_var("e", ["a"])
            .object_var("o", ["t"])
            .with_predicate(Predicate::e2o("e", "o", Qualifier::Wildcard)),
    );
    let result = eval(&tree, &idx);
    let bytes = export_csv(&result, &tree, &idx, "v0", CsvOptions::default()).unwrap();
    assert_eq!(
        String::from_utf8(bytes).unwrap(),
        "e,o\n\"e,1\",\"o \"\"x\"\"\"\n"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn csv_rows_match_node_rows(log_seed in 0u64..500, tree_seed in any::<u64>(), basic_only in any::<bool>()) {
        let log = generate_synthetic(&small_config(log_seed));
        let idx = build_index(&log).unwrap();
        let cfg = RandomTreeConfig { max_depth: 3, max_vars: 4, max_children: 2 };
        let tree = random_query_tree(&log, &cfg, tree_seed);
        let result = eval(&tree, &idx);
        let opts = CsvOptions { include_basic_only: basic_only, include_labels: true };
        for (node, table) in tree.nodes.iter().zip(&result.nodes) {
            let rows = records(&export_csv(&result, &tree, &idx, &node.id, opts).unwrap());
            let expected = if basic_only { table.rows.len() } else { table.rows.len() - table.excluded_count() };
            prop_assert_eq!(rows.len() - 1, expected);
            prop_assert!(rows.iter().all(|r| r.len() == rows[0].len()));
        }
    }
}
