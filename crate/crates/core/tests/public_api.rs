use ocpq_core::synthetic::{
    generate_loan_log, generate_synthetic, random_query_tree, small_config, LoanConfig,
    RandomTreeConfig,
};
use ocpq_core::{
    brute_force_evaluate, build_index, evaluate_tree, summarize, validate, BindingBox, EngineError,
    EvalOptions, OracleError, Predicate, QueryTree,
};

#[test]
fn engine_agrees_with_oracle_on_loan_logs() {
    let cfg = RandomTreeConfig::default();
    for seed in 0..20u64 {
        let log = generate_loan_log(&LoanConfig {
            num_applications: 4,
            seed,
            ..LoanConfig::default()
        });
        assert!(validate(&log, true).is_ok());
        let idx = build_index(&log).unwrap();
        for t in 0..10 {
            let tree = random_query_tree(&log, &cfg, seed * 100 + t);
            let engine = evaluate_tree(&tree, &idx, EvalOptions::with_threads(1));
            match brute_force_evaluate(&tree, &log) {
                Ok(oracle) => assert_eq!(engine.unwrap(), oracle, "seed {seed} tree {t}"),
                Err(OracleError::TooLargeForOracle { .. }) => {}
                Err(e) => panic!("{e:?}"),
            }
        }
    }
}

#[test]
fn generators_are_seeded() {
    assert_eq!(
        generate_synthetic(&small_config(9)),
        generate_synthetic(&small_config(9))
    );
    let loan = |seed| {
        generate_loan_log(&LoanConfig {
            num_applications: 10,
            seed,
            ..LoanConfig::default()
        })
    };
    assert_eq!(loan(1), loan(1));
    assert_ne!(loan(1), loan(2));
}

#[test]
fn row_cap_and_summary() {
    let log = generate_synthetic(&small_config(3));
    let idx = build_index(&log).unwrap();
    let tree = QueryTree::new(
        "all",
        BindingBox::new()
            .object_var("o", ["orders"])
            .object_var("i", ["items"]),
    );
    let res = evaluate_tree(&tree, &idx, EvalOptions::with_threads(1)).unwrap();
    let rows = res.nodes[0].rows.len();
    assert!(rows > 1);
    let s = &summarize(&res)[0];
    assert_eq!((s.total_basic, s.satisfied, s.violated), (rows, rows, 0));
    let capped = EvalOptions {
        max_rows_per_node: rows - 1,
        ..EvalOptions::with_threads(1)
    };
    assert!(matches!(
        evaluate_tree(&tree, &idx, capped),
        Err(EngineError::ResultTooLarge { ref node, .. }) if node == "all"
    ));

    let bad = QueryTree::new(
        "r",
        BindingBox::new().with_predicate(Predicate::cbs("A", 0, Some(0))),
    );
    assert!(matches!(
        evaluate_tree(&bad, &idx, EvalOptions::default()),
        Err(EngineError::InvalidTree(_))
    ));
}
