//! Query-tree JSON files.
//!
//! ```json
//! {"root": "v0",
//!  "nodes": [{"id": "v0",
//!             "vars": [{"name": "o1", "kind": "object", "types": ["orders"]}],
//!             "predicates": [{"t": "e2o", "ev": "e1", "ob": "o1", "qual": null}],
//!             "constraints": [{"t": "cbs", "edge": "A", "min": 1, "max": 1}],
//!             "labels": [{"name": "n", "agg": "count", "edge": "A"}]}],
//!  "edges": [{"from": "v0", "to": "v1", "label": "A"}]}
//! ```
//!
//! A `null` qualifier is the wildcard, a `null` bound is unbounded. Durations
//! are milliseconds, ISO-8601 durations (`"P28D"`, `"-PT1H30M"`) or shorthand
//! (`"4w"`, `"90m"`, `"1d12h"`).

use ocpq_core::{
    validate_tree, BindingBox, Edge, LabelAggregation, LabelSpec, Predicate, Qualifier, QueryNode,
    QueryTree, StructuralError, TimeDelta, VarDecl, VarKind,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid query tree: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<StructuralError>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeJson {
    root: String,
    nodes: Vec<NodeJson>,
    #[serde(default)]
    edges: Vec<EdgeJson>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeJson {
    id: String,
    #[serde(default)]
    vars: Vec<VarJson>,
    #[serde(default)]
    predicates: Vec<PredJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    constraints: Vec<PredJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    labels: Vec<LabelJson>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VarJson {
    name: String,
    kind: KindJson,
    types: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindJson {
    Event,
    Object,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeJson {
    from: String,
    to: String,
    label: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "lowercase", deny_unknown_fields)]
enum PredJson {
    E2o {
        ev: String,
        ob: String,
        #[serde(default)]
        qual: Option<String>,
    },
    O2o {
        from: String,
        to: String,
        #[serde(default)]
        qual: Option<String>,
    },
    Tbe {
        from: String,
        to: String,
        #[serde(default)]
        min: Value,
        #[serde(default)]
        max: Value,
    },
    Cbs {
        edge: String,
        min: u64,
        #[serde(default)]
        max: Option<u64>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelJson {
    name: String,
    agg: AggJson,
    edge: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    to: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AggJson {
    Count,
    MinDur,
    MaxDur,
    MeanDur,
}

/// Parses a duration given as milliseconds, ISO-8601 or shorthand.
pub fn parse_duration(v: &Value) -> Result<Option<TimeDelta>, String> {
    match v {
        Value::Null => Ok(None),
        Value::Number(n) => n
            .as_i64()
            .map(|ms| Some(TimeDelta::from_millis(ms)))
            .ok_or_else(|| format!("duration `{n}` is not a whole number of milliseconds")),
        Value::String(s) => parse_duration_str(s).map(Some),
        other => Err(format!("unsupported duration `{other}`")),
    }
}

fn parse_duration_str(s: &str) -> Result<TimeDelta, String> {
    let err = || format!("unsupported duration `{s}`");
    let t = s.trim();
    let (negative, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let ms = if let Some(iso) = body.strip_prefix('P').or_else(|| body.strip_prefix('p')) {
        parse_iso(iso).ok_or_else(err)?
    } else {
        parse_shorthand(body).ok_or_else(err)?
    };
    Ok(TimeDelta::from_millis(if negative { -ms } else { ms }))
}

/// Splits "12.5h3m" into (12.5, "h"), (3, "m").
fn components(s: &str) -> Option<Vec<(f64, &str)>> {
    let mut out = Vec::new();
    let mut rest = s;
    while !rest.is_empty() {
        let num_end = rest
            .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == ','))
            .unwrap_or(rest.len());
        let unit_end = rest[num_end..]
            .find(|c: char| c.is_ascii_digit())
            .map_or(rest.len(), |i| num_end + i);
        if num_end == 0 || num_end == unit_end {
            return None;
        }
        let n: f64 = rest[..num_end].replace(',', ".").parse().ok()?;
        out.push((n, &rest[num_end..unit_end]));
        rest = &rest[unit_end..];
    }
    (!out.is_empty()).then_some(out)
}

const MS_PER: [(&str, f64); 6] = [
    ("w", 604_800_000.0),
    ("d", 86_400_000.0),
    ("h", 3_600_000.0),
    ("m", 60_000.0),
    ("s", 1_000.0),
    ("ms", 1.0),
];

fn unit_ms(unit: &str) -> Option<f64> {
    MS_PER.iter().find(|(u, _)| *u == unit).map(|&(_, ms)| ms)
}

fn parse_shorthand(s: &str) -> Option<i64> {
    let mut total = 0.0;
    for (n, unit) in components(&s.to_ascii_lowercase())? {
        total += n * unit_ms(unit.trim())?;
    }
    Some(total.round() as i64)
}

/// `nWnDTnHnMnS` after the leading `P`; years and months are rejected as
/// they have no fixed length.
fn parse_iso(s: &str) -> Option<i64> {
    let s = s.to_ascii_uppercase();
    let (date, time) = match s.split_once('T') {
        Some((d, t)) => (d.to_string(), Some(t.to_string())),
        None => (s, None),
    };
    let mut total = 0.0;
    if !date.is_empty() {
        for (n, unit) in components(&date)? {
            total += n * match unit {
                "W" => 604_800_000.0,
                "D" => 86_400_000.0,
                _ => return None,
            };
        }
    }
    if let Some(time) = time {
        for (n, unit) in components(&time)? {
            total += n * match unit {
                "H" => 3_600_000.0,
                "M" => 60_000.0,
                "S" => 1_000.0,
                _ => return None,
            };
        }
    }
    Some(total.round() as i64)
}

fn qualifier(q: Option<String>) -> Qualifier {
    q.map_or(Qualifier::Wildcard, Qualifier::Named)
}

fn predicate(p: PredJson) -> Result<Predicate, String> {
    Ok(match p {
        PredJson::E2o { ev, ob, qual } => Predicate::E2O {
            event: ev,
            object: ob,
            qualifier: qualifier(qual),
        },
        PredJson::O2o { from, to, qual } => Predicate::O2O {
            from,
            to,
            qualifier: qualifier(qual),
        },
        PredJson::Tbe { from, to, min, max } => Predicate::TBE {
            from,
            to,
            min: parse_duration(&min)?,
            max: parse_duration(&max)?,
        },
        PredJson::Cbs { edge, min, max } => {
            if max.is_some_and(|m| m < min) {
                return Err(format!(
                    "CBS({edge}, {min}, {}) has max below min",
                    max.unwrap_or_default()
                ));
            }
            Predicate::CBS { edge, min, max }
        }
    })
}

fn label(l: LabelJson) -> Result<LabelSpec, String> {
    let durations = |l: &LabelJson| match (&l.from, &l.to) {
        (Some(f), Some(t)) => Ok((f.clone(), t.clone())),
        _ => Err(format!("label `{}` needs `from` and `to`", l.name)),
    };
    let edge = l.edge.clone();
    let aggregation = match l.agg {
        AggJson::Count => LabelAggregation::Count { edge },
        AggJson::MinDur => {
            let (from, to) = durations(&l)?;
            LabelAggregation::MinDuration { edge, from, to }
        }
        AggJson::MaxDur => {
            let (from, to) = durations(&l)?;
            LabelAggregation::MaxDuration { edge, from, to }
        }
        AggJson::MeanDur => {
            let (from, to) = durations(&l)?;
            LabelAggregation::MeanDuration { edge, from, to }
        }
    };
    Ok(LabelSpec {
        name: l.name,
        aggregation,
    })
}

/// Parses a query tree without structural validation.
pub fn parse_query_unchecked(bytes: &[u8]) -> Result<QueryTree, QueryError> {
    let tree: TreeJson =
        serde_json::from_slice(bytes).map_err(|e| QueryError::Parse(e.to_string()))?;
    from_json(tree).map_err(QueryError::Parse)
}

/// Parses a query tree and runs structural validation on it.
pub fn parse_query_json(bytes: &[u8]) -> Result<QueryTree, QueryError> {
    let tree = parse_query_unchecked(bytes)?;
    let findings = validate_tree(&tree);
    if findings.is_empty() {
        Ok(tree)
    } else {
        Err(QueryError::Invalid(findings))
    }
}

/// Like [`parse_query_json`] for an already parsed JSON value.
pub fn query_from_value(v: Value) -> Result<QueryTree, QueryError> {
    let tree: TreeJson = serde_json::from_value(v).map_err(|e| QueryError::Parse(e.to_string()))?;
    let tree = from_json(tree).map_err(QueryError::Parse)?;
    let findings = validate_tree(&tree);
    if findings.is_empty() {
        Ok(tree)
    } else {
        Err(QueryError::Invalid(findings))
    }
}

fn from_json(t: TreeJson) -> Result<QueryTree, String> {
    let mut nodes = Vec::with_capacity(t.nodes.len());
    for n in t.nodes {
        let vars = n
            .vars
            .into_iter()
            .map(|v| {
                let kind = match v.kind {
                    KindJson::Event => VarKind::Event,
                    KindJson::Object => VarKind::Object,
                };
                VarDecl::new(&v.name, kind, v.types)
            })
            .collect();
        let binding_box = BindingBox {
            vars,
            predicates: n
                .predicates
                .into_iter()
                .map(predicate)
                .collect::<Result<_, _>>()?,
            constraints: n
                .constraints
                .into_iter()
                .map(predicate)
                .collect::<Result<_, _>>()?,
            labels: n.labels.into_iter().map(label).collect::<Result<_, _>>()?,
        };
        nodes.push(QueryNode {
            id: n.id,
            binding_box,
        });
    }
    Ok(QueryTree {
        nodes,
        edges: t
            .edges
            .into_iter()
            .map(|e| Edge {
                from: e.from,
                to: e.to,
                label: e.label,
            })
            .collect(),
        root: t.root,
    })
}

fn qual_json(q: &Qualifier) -> Option<String> {
    match q {
        Qualifier::Wildcard => None,
        Qualifier::Named(s) => Some(s.clone()),
    }
}

fn bound_json(d: Option<TimeDelta>) -> Value {
    d.map_or(Value::Null, |d| Value::from(d.as_millis()))
}

fn pred_json(p: &Predicate) -> PredJson {
    match p {
        Predicate::E2O {
            event,
            object,
            qualifier,
        } => PredJson::E2o {
            ev: event.clone(),
            ob: object.clone(),
            qual: qual_json(qualifier),
        },
        Predicate::O2O {
            from,
            to,
            qualifier,
        } => PredJson::O2o {
            from: from.clone(),
            to: to.clone(),
            qual: qual_json(qualifier),
        },
        Predicate::TBE { from, to, min, max } => PredJson::Tbe {
            from: from.clone(),
            to: to.clone(),
            min: bound_json(*min),
            max: bound_json(*max),
        },
        Predicate::CBS { edge, min, max } => PredJson::Cbs {
            edge: edge.clone(),
            min: *min,
            max: *max,
        },
    }
}

fn label_json(l: &LabelSpec) -> LabelJson {
    let (agg, vars) = match &l.aggregation {
        LabelAggregation::Count { .. } => (AggJson::Count, None),
        LabelAggregation::MinDuration { from, to, .. } => (AggJson::MinDur, Some((from, to))),
        LabelAggregation::MaxDuration { from, to, .. } => (AggJson::MaxDur, Some((from, to))),
        LabelAggregation::MeanDuration { from, to, .. } => (AggJson::MeanDur, Some((from, to))),
    };
    LabelJson {
        name: l.name.clone(),
        agg,
        edge: l.aggregation.edge().to_string(),
        from: vars.map(|(f, _)| f.clone()),
        to: vars.map(|(_, t)| t.clone()),
    }
}

fn to_json(t: &QueryTree) -> TreeJson {
    TreeJson {
        root: t.root.clone(),
        nodes: t
            .nodes
            .iter()
            .map(|n| {
                let b = &n.binding_box;
                NodeJson {
                    id: n.id.clone(),
                    vars: b
                        .vars
                        .iter()
                        .map(|v| VarJson {
                            name: v.name.clone(),
                            kind: match v.kind {
                                VarKind::Event => KindJson::Event,
                                VarKind::Object => KindJson::Object,
                            },
                            types: v.types.iter().cloned().collect(),
                        })
                        .collect(),
                    predicates: b.predicates.iter().map(pred_json).collect(),
                    constraints: b.constraints.iter().map(pred_json).collect(),
                    labels: b.labels.iter().map(label_json).collect(),
                }
            })
            .collect(),
        edges: t
            .edges
            .iter()
            .map(|e| EdgeJson {
                from: e.from.clone(),
                to: e.to.clone(),
                label: e.label.clone(),
            })
            .collect(),
    }
}

/// Canonical pretty JSON; durations are written as milliseconds.
pub fn serialize_query(t: &QueryTree) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&to_json(t)).expect("query structures serialize");
    out.push(b'\n');
    out
}

pub fn query_to_value(t: &QueryTree) -> Value {
    serde_json::to_value(to_json(t)).expect("query structures serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn ms(v: Value) -> Result<Option<i64>, String> {
        parse_duration(&v).map(|d| d.map(|d| d.as_millis()))
    }

    #[test]
    fn duration_forms() {
        let week = 604_800_000;
        assert_eq!(ms(json!("4w")), Ok(Some(4 * week)));
        assert_eq!(ms(json!("P4W")), Ok(Some(4 * week)));
        assert_eq!(ms(json!("P28D")), Ok(Some(4 * week)));
        assert_eq!(ms(json!("PT1H30M")), Ok(Some(5_400_000)));
        assert_eq!(ms(json!("-PT0.5S")), Ok(Some(-500)));
        assert_eq!(ms(json!("P1DT2H")), Ok(Some(93_600_000)));
        assert_eq!(ms(json!("1d12h")), Ok(Some(129_600_000)));
        assert_eq!(ms(json!("250ms")), Ok(Some(250)));
        assert_eq!(ms(json!("-2h")), Ok(Some(-7_200_000)));
        assert_eq!(ms(json!(1500)), Ok(Some(1500)));
        assert_eq!(ms(json!(null)), Ok(None));
        for bad in [
            json!("P1M"),
            json!("P1Y"),
            json!("4 fortnights"),
            json!(""),
            json!(1.5),
            json!(true),
            json!("w"),
        ] {
            assert!(ms(bad.clone()).is_err(), "{bad}");
        }
    }
}
