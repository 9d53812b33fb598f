//! Reference evaluator that works on the raw [`Oced`] without any index.
//!
//! For every parent binding it enumerates all assignments of the node's new
//! variables to entities of the declared types and checks every basic
//! predicate of the node with string lookups. It is exponential in the number
//! of variables and only meant for differential testing of the engine.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::binding::{Binding, EntityRef};
use crate::oced::{Oced, TimeDelta};
use crate::query::{
    BindingBox, LabelAggregation, Predicate, QueryTree, StructuralError, TreeLayout, VarKind,
};
use crate::result::{EvaluationResult, LabelValue, NodeResult, Row};

/// Upper bound on the assignments the oracle enumerates per parent binding.
pub const ORACLE_ASSIGNMENT_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("invalid query tree ({} finding(s))", .0.len())]
    InvalidTree(Vec<StructuralError>),
    #[error("node `{node}` needs {assignments} assignments per parent binding")]
    TooLargeForOracle { node: String, assignments: u128 },
}

type Assignment<'a> = BTreeMap<&'a str, &'a str>;

struct OracleRow<'a> {
    assignment: Assignment<'a>,
    excluded: bool,
    verdicts: Vec<bool>,
    labels: Vec<LabelValue>,
    children: Vec<(usize, Vec<OracleRow<'a>>)>,
}

struct Oracle<'a> {
    tree: &'a QueryTree,
    log: &'a Oced,
    layout: TreeLayout,
    /// Per node: new variable names with their candidate entity ids.
    candidates: Vec<Vec<(&'a str, Vec<&'a str>)>>,
}

pub fn brute_force_evaluate(tree: &QueryTree, log: &Oced) -> Result<EvaluationResult, OracleError> {
    let layout = tree.layout().map_err(OracleError::InvalidTree)?;
    let mut candidates = Vec::with_capacity(tree.nodes.len());
    for (ni, node) in tree.nodes.iter().enumerate() {
        let parent_box = layout.parent[ni].map(|(p, _)| &tree.nodes[p].binding_box);
        let mut per_var = Vec::new();
        let mut product: u128 = 1;
        for decl in &node.binding_box.vars {
            if parent_box.is_some_and(|b| b.var(&decl.name).is_some()) {
                continue;
            }
            let ids: Vec<&str> = match decl.kind {
                VarKind::Event => log
                    .events()
                    .iter()
                    .enumerate()
                    .filter(|(i, e)| {
                        decl.types.contains(&e.activity)
                            && log.event_position(&e.id) == Some(*i as u32)
                    })
                    .map(|(_, e)| e.id.as_str())
                    .collect(),
                VarKind::Object => log
                    .objects()
                    .iter()
                    .enumerate()
                    .filter(|(i, o)| {
                        decl.types.contains(&o.otype)
                            && log.object_position(&o.id) == Some(*i as u32)
                    })
                    .map(|(_, o)| o.id.as_str())
                    .collect(),
            };
            product = product.saturating_mul(ids.len() as u128);
            per_var.push((decl.name.as_str(), ids));
        }
        if product > ORACLE_ASSIGNMENT_LIMIT {
            return Err(OracleError::TooLargeForOracle {
                node: node.id.clone(),
                assignments: product,
            });
        }
        candidates.push(per_var);
    }

    let oracle = Oracle {
        tree,
        log,
        layout,
        candidates,
    };
    let root = oracle.layout.root();
    let rows = oracle.node_rows(root, &Assignment::new());
    Ok(oracle.tables(rows))
}

impl<'a> Oracle<'a> {
    fn node_rows(&self, node: usize, parent: &Assignment<'a>) -> Vec<OracleRow<'a>> {
        let bx = &self.tree.nodes[node].binding_box;
        let vars = &self.candidates[node];
        let mut out = Vec::new();
        if vars.iter().any(|(_, ids)| ids.is_empty()) {
            return out;
        }
        let mut pick = vec![0usize; vars.len()];
        loop {
            let mut a = parent.clone();
            for ((name, ids), &i) in vars.iter().zip(&pick) {
                a.insert(name, ids[i]);
            }
            if bx.basic_predicates().all(|p| self.holds(p, &a)) {
                out.push(self.finish_row(node, bx, a));
            }
            // Odometer increment over the candidate lists.
            let mut k = 0;
            loop {
                if k == pick.len() {
                    return out;
                }
                pick[k] += 1;
                if pick[k] < vars[k].1.len() {
                    break;
                }
                pick[k] = 0;
                k += 1;
            }
        }
    }

    fn finish_row(&self, node: usize, bx: &BindingBox, a: Assignment<'a>) -> OracleRow<'a> {
        let children: Vec<(usize, Vec<OracleRow<'a>>)> = self.layout.children[node]
            .iter()
            .map(|&(edge, child)| (edge, self.node_rows(child, &a)))
            .collect();
        let child_set = |label: &str| {
            let (_, rows) = children
                .iter()
                .find(|(e, _)| self.tree.edges[*e].label == label)
                .expect("edge exists");
            rows.iter().filter(|r| !r.excluded).collect::<Vec<_>>()
        };
        let cbs_holds = |p: &Predicate| match p {
            Predicate::CBS { edge, min, max } => {
                let n = child_set(edge).len() as u64;
                *min <= n && max.is_none_or(|m| n <= m)
            }
            _ => unreachable!("not a CBS predicate"),
        };

        let excluded = !bx
            .predicates
            .iter()
            .filter(|p| !p.is_basic())
            .all(cbs_holds);
        let verdicts = if excluded {
            Vec::new()
        } else {
            bx.constraints
                .iter()
                .map(|p| {
                    if p.is_basic() {
                        self.holds(p, &a)
                    } else {
                        cbs_holds(p)
                    }
                })
                .collect()
        };
        let labels = bx
            .labels
            .iter()
            .map(|l| {
                let rows = child_set(l.aggregation.edge());
                let Some((from, to)) = l.aggregation.duration_vars() else {
                    return LabelValue::Count(rows.len() as u64);
                };
                let durations: Vec<i64> = rows
                    .iter()
                    .map(|r| {
                        let t = |v: &str| {
                            self.log
                                .time_of(r.assignment[v])
                                .expect("event")
                                .as_millis()
                        };
                        t(to) - t(from)
                    })
                    .collect();
                if durations.is_empty() {
                    return LabelValue::Absent;
                }
                let ms = match l.aggregation {
                    LabelAggregation::MinDuration { .. } => *durations.iter().min().unwrap(),
                    LabelAggregation::MaxDuration { .. } => *durations.iter().max().unwrap(),
                    _ => {
                        let sum: i128 = durations.iter().map(|&d| d as i128).sum();
                        sum.div_euclid(durations.len() as i128) as i64
                    }
                };
                LabelValue::Duration(TimeDelta::from_millis(ms))
            })
            .collect();

        OracleRow {
            assignment: a,
            excluded,
            verdicts,
            labels,
            children,
        }
    }

    fn holds(&self, p: &Predicate, a: &Assignment<'a>) -> bool {
        let log = self.log;
        match p {
            Predicate::E2O {
                event,
                object,
                qualifier,
            } => log
                .objects_of(a[event.as_str()], qualifier)
                .is_ok_and(|objs| objs.contains(a[object.as_str()])),
            Predicate::O2O {
                from,
                to,
                qualifier,
            } => log
                .objects_of(a[from.as_str()], qualifier)
                .is_ok_and(|objs| objs.contains(a[to.as_str()])),
            Predicate::TBE { from, to, min, max } => {
                let (Ok(t1), Ok(t2)) = (log.time_of(a[from.as_str()]), log.time_of(a[to.as_str()]))
                else {
                    return false;
                };
                let d = t2 - t1;
                min.is_none_or(|m| m <= d) && max.is_none_or(|m| d <= m)
            }
            Predicate::CBS { .. } => unreachable!("CBS is not basic"),
        }
    }

    fn binding(&self, a: &Assignment<'a>) -> Binding {
        Binding::from_entries(a.iter().map(|(name, id)| {
            let var = self.layout.var_id(name).expect("declared");
            let entity = match self.layout.var_kind(var) {
                VarKind::Event => EntityRef::Event(self.log.event_position(id).expect("event")),
                VarKind::Object => EntityRef::Object(self.log.object_position(id).expect("object")),
            };
            (var, entity)
        }))
    }

    fn tables(&self, rows: Vec<OracleRow<'a>>) -> EvaluationResult {
        // Tables of (binding, parent binding, row) per node, parent by value.
        let mut tables: Vec<Vec<(Binding, Option<Binding>, Row)>> =
            self.tree.nodes.iter().map(|_| Vec::new()).collect();
        let mut stack: Vec<(usize, Option<Binding>, OracleRow<'a>)> = rows
            .into_iter()
            .map(|r| (self.layout.root(), None, r))
            .collect();
        while let Some((node, parent, r)) = stack.pop() {
            let binding = self.binding(&r.assignment);
            for (edge, rows) in r.children {
                let child = self.layout.children[node]
                    .iter()
                    .find(|(e, _)| *e == edge)
                    .map(|&(_, c)| c)
                    .expect("child");
                stack.extend(
                    rows.into_iter()
                        .map(|cr| (child, Some(binding.clone()), cr)),
                );
            }
            let row = Row {
                binding: binding.clone(),
                parent: None,
                cbs_excluded: r.excluded,
                verdicts: r.verdicts,
                labels: r.labels,
            };
            tables[node].push((binding, parent, row));
        }

        let mut nodes: Vec<Option<NodeResult>> = self.tree.nodes.iter().map(|_| None).collect();
        let mut positions: Vec<BTreeMap<Binding, usize>> =
            self.tree.nodes.iter().map(|_| BTreeMap::new()).collect();
        for &node in &self.layout.order {
            let mut table = core::mem::take(&mut tables[node]);
            table.sort_by(|x, y| x.0.cmp(&y.0));
            let parent_node = self.layout.parent[node].map(|(p, _)| p);
            let mut out = Vec::with_capacity(table.len());
            for (i, (binding, parent, mut row)) in table.into_iter().enumerate() {
                row.parent = match (parent_node, parent) {
                    (Some(p), Some(pb)) => Some(positions[p][&pb]),
                    _ => None,
                };
                positions[node].insert(binding, i);
                out.push(row);
            }
            nodes[node] = Some(NodeResult::new(self.tree.nodes[node].id.clone(), out));
        }
        EvaluationResult {
            nodes: nodes
                .into_iter()
                .map(|n| n.expect("every node is reachable"))
                .collect(),
            wall_time: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oced::fixtures::{l_payments, t};
    use crate::oced::{Event, Object, Qualifier};
    use crate::query::fixtures::t2;
    use alloc::string::ToString;

    fn ids(log: &Oced, b: &Binding) -> Vec<String> {
        b.iter()
            .map(|(_, e)| match e {
                EntityRef::Event(c) => log.events()[c as usize].id.clone(),
                EntityRef::Object(c) => log.objects()[c as usize].id.clone(),
            })
            .collect()
    }

    #[test]
    fn single_box_output() {
        let log = Oced::new(
            vec![
                Event::new("e1", "place order", t(1)).with_object("order", "o1"),
                Event::new("e2", "place order", t(2)).with_object("order", "o2"),
                Event::new("e3", "confirm order", t(3)).with_object("order", "o1"),
            ],
            vec![
                Object::new("o1", "orders"),
                Object::new("o2", "orders"),
                Object::new("o3", "orders"),
            ],
        );
        let bx = BindingBox::new()
            .object_var("o1", ["orders"])
            .event_var("e1", ["place order", "confirm order"])
            .with_predicate(Predicate::e2o("e1", "o1", Qualifier::named("order")));
        let res = brute_force_evaluate(&QueryTree::new("a", bx), &log).unwrap();
        let got: Vec<Vec<String>> = res.nodes[0]
            .rows
            .iter()
            .map(|r| ids(&log, &r.binding))
            .collect();
        let expected: Vec<Vec<String>> = [["o1", "e1"], ["o1", "e3"], ["o2", "e2"]]
            .iter()
            .map(|r| r.iter().map(|s| s.to_string()).collect())
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn cbs_keeps_only_unpaid_unreminded_order() {
        let log = l_payments();
        let res = brute_force_evaluate(&t2(), &log).unwrap();
        let sat: Vec<Vec<String>> = res.nodes[0]
            .rows
            .iter()
            .filter(|r| r.is_satisfied())
            .map(|r| ids(&log, &r.binding))
            .collect();
        assert_eq!(sat, [["o4".to_string(), "e4".to_string()]]);
        assert_eq!(
            res.nodes[0].rows.iter().filter(|r| r.cbs_excluded).count(),
            3
        );
    }

    #[test]
    fn empty_log_gives_empty_tables() {
        let res = brute_force_evaluate(&t2(), &Oced::default()).unwrap();
        assert_eq!(res.nodes.len(), 3);
        assert!(res.nodes.iter().all(|n| n.rows.is_empty()));
    }

    #[test]
    fn guard_rejects_large_products() {
        let events: Vec<Event> = (0..500)
            .map(|i| Event::new(format!("x{i}"), "tick", t(i)).with_object("", "o"))
            .collect();
        let log = Oced::new(events, vec![Object::new("o", "thing")]);
        let bx = BindingBox::new()
            .event_var("a", ["tick"])
            .event_var("b", ["tick"]);
        assert!(brute_force_evaluate(&QueryTree::new("r", bx.clone()), &log).is_ok());
        let bx = bx.event_var("c", ["tick"]);
        assert!(matches!(
            brute_force_evaluate(&QueryTree::new("r", bx), &log),
            Err(OracleError::TooLargeForOracle { .. })
        ));
    }
}
