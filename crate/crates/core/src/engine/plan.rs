//! Binding order for the variables a node adds to its parent.
//!
//! Variables that can be reached through an E2O/O2O predicate from an
//! already bound variable are expanded over the adjacency lists; the rest are
//! enumerated from their type buckets. Each basic predicate becomes a filter
//! at the first step where all its variables are bound.

use alloc::string::String;
use alloc::vec::Vec;

use crate::binding::{Binding, EntityRef, VarId};
use crate::index::{IndexedLog, QualFilter, Relation};
use crate::query::VarKind;

const UNBOUND: u32 = u32::MAX;

/// A basic predicate with variables and qualifiers resolved to codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompiledPredicate {
    E2O {
        event: VarId,
        object: VarId,
        qualifier: QualFilter,
    },
    O2O {
        from: VarId,
        to: VarId,
        qualifier: QualFilter,
    },
    /// Bounds in milliseconds, inclusive.
    TBE {
        from: VarId,
        to: VarId,
        min: i64,
        max: i64,
    },
}

impl CompiledPredicate {
    pub fn vars(&self) -> [VarId; 2] {
        match *self {
            CompiledPredicate::E2O { event, object, .. } => [event, object],
            CompiledPredicate::O2O { from, to, .. } | CompiledPredicate::TBE { from, to, .. } => {
                [from, to]
            }
        }
    }

    /// Evaluates against a slot array (`u32::MAX` = unbound).
    #[inline]
    pub(crate) fn holds(&self, slots: &[u32], idx: &IndexedLog) -> bool {
        let get = |v: VarId| slots.get(v.0 as usize).copied().filter(|&c| c != UNBOUND);
        match *self {
            CompiledPredicate::E2O {
                event,
                object,
                qualifier,
            } => match (get(event), get(object)) {
                (Some(e), Some(o)) => idx.is_related(e, Relation::E2O, qualifier, o),
                _ => false,
            },
            CompiledPredicate::O2O {
                from,
                to,
                qualifier,
            } => match (get(from), get(to)) {
                (Some(a), Some(b)) => idx.is_related(a, Relation::O2O, qualifier, b),
                _ => false,
            },
            CompiledPredicate::TBE { from, to, min, max } => match (get(from), get(to)) {
                (Some(a), Some(b)) => {
                    let d = (idx.time(b) - idx.time(a)).as_millis();
                    min <= d && d <= max
                }
                _ => false,
            },
        }
    }
}

/// Whether `binding` satisfies a basic predicate. Unbound variables, or
/// variables bound to the wrong kind, make the predicate false.
pub fn satisfies_basic(binding: &Binding, p: &CompiledPredicate, idx: &IndexedLog) -> bool {
    let event = |v| match binding.get(v) {
        Some(EntityRef::Event(e)) if (e as usize) < idx.event_count() => Some(e),
        _ => None,
    };
    let object = |v| match binding.get(v) {
        Some(EntityRef::Object(o)) if (o as usize) < idx.object_count() => Some(o),
        _ => None,
    };
    match *p {
        CompiledPredicate::E2O {
            event: ev,
            object: ob,
            qualifier,
        } => match (event(ev), object(ob)) {
            (Some(e), Some(o)) => idx.is_related(e, Relation::E2O, qualifier, o),
            _ => false,
        },
        CompiledPredicate::O2O {
            from,
            to,
            qualifier,
        } => match (object(from), object(to)) {
            (Some(a), Some(b)) => idx.is_related(a, Relation::O2O, qualifier, b),
            _ => false,
        },
        CompiledPredicate::TBE { from, to, min, max } => match (event(from), event(to)) {
            (Some(a), Some(b)) => {
                let d = (idx.time(b) - idx.time(a)).as_millis();
                min <= d && d <= max
            }
            _ => false,
        },
    }
}

/// A variable introduced by a node, with its type set resolved to codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaVar {
    pub var: VarId,
    pub name: String,
    pub kind: VarKind,
    /// Event-type or object-type codes; names unknown to the log are dropped.
    pub types: Vec<u32>,
}

impl DeltaVar {
    fn estimated_size(&self, idx: &IndexedLog) -> usize {
        self.types
            .iter()
            .map(|&t| match self.kind {
                VarKind::Event => idx.events_of_type(t).len(),
                VarKind::Object => idx.objects_of_type(t).len(),
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BindingStep {
    /// Enumerate every entity of the given types.
    BindFromType {
        var: VarId,
        kind: VarKind,
        types: Vec<u32>,
    },
    /// Enumerate the neighbors of the already bound `source`.
    BindFromRelation {
        var: VarId,
        relation: Relation,
        qualifier: QualFilter,
        source: VarId,
        types: Vec<u32>,
    },
    Filter(CompiledPredicate),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("predicate references variable {0:?} that is neither bound nor introduced")]
    UnboundVariableInPredicate(VarId),
}

/// Orders the new variables of a node.
pub fn plan(
    delta_vars: &[DeltaVar],
    delta_preds: &[CompiledPredicate],
    bound: &[VarId],
    idx: &IndexedLog,
) -> Result<Vec<BindingStep>, PlanError> {
    plan_inner(delta_vars, delta_preds, bound, idx, None)
}

/// Like [`plan`] but binds the new variables in exactly `order`, still
/// preferring adjacency expansion for each of them when possible.
pub fn plan_in_order(
    delta_vars: &[DeltaVar],
    delta_preds: &[CompiledPredicate],
    bound: &[VarId],
    idx: &IndexedLog,
    order: &[VarId],
) -> Result<Vec<BindingStep>, PlanError> {
    plan_inner(delta_vars, delta_preds, bound, idx, Some(order))
}

fn plan_inner(
    delta_vars: &[DeltaVar],
    delta_preds: &[CompiledPredicate],
    bound: &[VarId],
    idx: &IndexedLog,
    forced: Option<&[VarId]>,
) -> Result<Vec<BindingStep>, PlanError> {
    let mut bound: Vec<VarId> = bound.to_vec();
    for p in delta_preds {
        for v in p.vars() {
            if !bound.contains(&v) && !delta_vars.iter().any(|d| d.var == v) {
                return Err(PlanError::UnboundVariableInPredicate(v));
            }
        }
    }

    let mut used = alloc::vec![false; delta_preds.len()];
    let mut remaining: Vec<&DeltaVar> = delta_vars.iter().collect();
    let mut steps = Vec::new();
    emit_filters(delta_preds, &mut used, &bound, &mut steps);

    while !remaining.is_empty() {
        let candidates: Vec<usize> = match forced {
            Some(order) => {
                let next = order
                    .iter()
                    .find_map(|v| remaining.iter().position(|d| d.var == *v))
                    .unwrap_or(0);
                alloc::vec![next]
            }
            None => (0..remaining.len()).collect(),
        };

        // (estimated size, name, predicate index) of the best relation expansion
        let mut best: Option<(usize, &str, usize, usize, BindingStep)> = None;
        for &ri in &candidates {
            let d = remaining[ri];
            for (pi, p) in delta_preds.iter().enumerate() {
                if used[pi] {
                    continue;
                }
                let Some(step) = relation_step(d, p, &bound) else {
                    continue;
                };
                let key = (d.estimated_size(idx), d.name.as_str(), pi);
                if best.as_ref().is_none_or(|b| key < (b.0, b.1, b.2)) {
                    best = Some((key.0, key.1, key.2, ri, step));
                }
            }
        }

        let ri = match best {
            Some((_, _, pi, ri, step)) => {
                used[pi] = true;
                steps.push(step);
                ri
            }
            None => {
                let ri = candidates
                    .iter()
                    .copied()
                    .min_by(|&a, &b| {
                        let (da, db) = (remaining[a], remaining[b]);
                        (da.estimated_size(idx), &da.name).cmp(&(db.estimated_size(idx), &db.name))
                    })
                    .expect("non-empty");
                let d = remaining[ri];
                steps.push(BindingStep::BindFromType {
                    var: d.var,
                    kind: d.kind,
                    types: d.types.clone(),
                });
                ri
            }
        };
        bound.push(remaining.remove(ri).var);
        emit_filters(delta_preds, &mut used, &bound, &mut steps);
    }
    Ok(steps)
}

fn emit_filters(
    preds: &[CompiledPredicate],
    used: &mut [bool],
    bound: &[VarId],
    steps: &mut Vec<BindingStep>,
) {
    for (pi, p) in preds.iter().enumerate() {
        if !used[pi] && p.vars().iter().all(|v| bound.contains(v)) {
            used[pi] = true;
            steps.push(BindingStep::Filter(*p));
        }
    }
}

fn relation_step(d: &DeltaVar, p: &CompiledPredicate, bound: &[VarId]) -> Option<BindingStep> {
    let step = |relation, qualifier, source| BindingStep::BindFromRelation {
        var: d.var,
        relation,
        qualifier,
        source,
        types: d.types.clone(),
    };
    match *p {
        CompiledPredicate::E2O {
            event,
            object,
            qualifier,
        } => {
            if event == d.var && bound.contains(&object) {
                Some(step(Relation::E2ORev, qualifier, object))
            } else if object == d.var && bound.contains(&event) {
                Some(step(Relation::E2O, qualifier, event))
            } else {
                None
            }
        }
        CompiledPredicate::O2O {
            from,
            to,
            qualifier,
        } => {
            if to == d.var && bound.contains(&from) && from != to {
                Some(step(Relation::O2O, qualifier, from))
            } else if from == d.var && bound.contains(&to) && from != to {
                Some(step(Relation::O2ORev, qualifier, to))
            } else {
                None
            }
        }
        CompiledPredicate::TBE { .. } => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::build_index;
    use crate::oced::fixtures::l_ex;
    use alloc::vec;

    fn dv(var: u32, name: &str, kind: VarKind, types: &[u32]) -> DeltaVar {
        DeltaVar {
            var: VarId(var),
            name: name.into(),
            kind,
            types: types.to_vec(),
        }
    }

    #[test]
    fn new_event_is_reached_through_bound_object() {
        let idx = build_index(&l_ex()).unwrap();
        let (o1, e1, e2) = (VarId(0), VarId(1), VarId(2));
        let e2o = CompiledPredicate::E2O {
            event: e2,
            object: o1,
            qualifier: QualFilter::Any,
        };
        let tbe = CompiledPredicate::TBE {
            from: e1,
            to: e2,
            min: 0,
            max: 4 * 604_800_000,
        };
        let steps = plan(
            &[dv(2, "e2", VarKind::Event, &[4])],
            &[e2o, tbe],
            &[o1, e1],
            &idx,
        )
        .unwrap();
        assert_eq!(
            steps,
            vec![
                BindingStep::BindFromRelation {
                    var: e2,
                    relation: Relation::E2ORev,
                    qualifier: QualFilter::Any,
                    source: o1,
                    types: vec![4],
                },
                BindingStep::Filter(tbe),
            ]
        );
    }

    #[test]
    fn empty_delta_plans_nothing() {
        let idx = build_index(&l_ex()).unwrap();
        assert_eq!(plan(&[], &[], &[VarId(0)], &idx).unwrap(), vec![]);
    }

    #[test]
    fn unreferenced_variable_falls_back_to_type_scan() {
        let idx = build_index(&l_ex()).unwrap();
        let e2o = CompiledPredicate::E2O {
            event: VarId(1),
            object: VarId(0),
            qualifier: QualFilter::Any,
        };
        let steps = plan(
            &[
                dv(1, "e1", VarKind::Event, &[0]),
                dv(2, "lonely", VarKind::Object, &[2]),
            ],
            &[e2o],
            &[VarId(0)],
            &idx,
        )
        .unwrap();
        assert!(matches!(
            steps[0],
            BindingStep::BindFromRelation { var: VarId(1), .. }
        ));
        assert!(matches!(
            steps.last(),
            Some(BindingStep::BindFromType { var: VarId(2), .. })
        ));
    }

    #[test]
    fn smallest_bucket_starts_a_fresh_plan() {
        let idx = build_index(&l_ex()).unwrap();
        // customers (1 object) before items (2 objects)
        let customers = idx.interner().object_types.get("customers").unwrap();
        let items = idx.interner().object_types.get("items").unwrap();
        let steps = plan(
            &[
                dv(0, "a", VarKind::Object, &[items]),
                dv(1, "b", VarKind::Object, &[customers]),
            ],
            &[],
            &[],
            &idx,
        )
        .unwrap();
        assert!(matches!(
            steps[0],
            BindingStep::BindFromType { var: VarId(1), .. }
        ));
    }

    #[test]
    fn filters_over_bound_variables_come_first() {
        let idx = build_index(&l_ex()).unwrap();
        let p = CompiledPredicate::E2O {
            event: VarId(1),
            object: VarId(0),
            qualifier: QualFilter::Any,
        };
        assert_eq!(
            plan(&[], &[p], &[VarId(0), VarId(1)], &idx).unwrap(),
            vec![BindingStep::Filter(p)]
        );
        assert_eq!(
            plan(&[], &[p], &[VarId(0)], &idx),
            Err(PlanError::UnboundVariableInPredicate(VarId(1)))
        );
    }
}
