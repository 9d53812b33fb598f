use alloc::string::String;
use alloc::vec::Vec;

use super::eval::EngineError;
use super::plan::{plan, plan_in_order, CompiledPredicate, DeltaVar, PlanError};
use super::BindingStep;
use crate::binding::VarId;
use crate::index::IndexedLog;
use crate::query::{LabelAggregation, Predicate, QueryTree, TreeLayout, VarKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum DurationAgg {
    Min,
    Max,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum CompiledLabel {
    Count(usize),
    Duration {
        child: usize,
        agg: DurationAgg,
        from: VarId,
        to: VarId,
    },
}

/// A CBS bound on child slot `child` (position in [`CompiledNode::children`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct CbsBound {
    pub child: usize,
    pub min: u64,
    pub max: u64,
}

impl CbsBound {
    pub fn holds(&self, sizes: &[u64]) -> bool {
        let n = sizes[self.child];
        self.min <= n && n <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum CompiledConstraint {
    Basic(CompiledPredicate),
    Cbs(CbsBound),
}

/// One node prepared for evaluation.
#[derive(Debug, Clone)]
pub struct CompiledNode {
    pub(crate) id: String,
    pub(crate) steps: Vec<BindingStep>,
    /// Variables added relative to the parent, in plan-independent order.
    pub(crate) new_vars: Vec<VarId>,
    /// Child node indices, in edge declaration order.
    pub(crate) children: Vec<usize>,
    pub(crate) cbs: Vec<CbsBound>,
    pub(crate) constraints: Vec<CompiledConstraint>,
    pub(crate) labels: Vec<CompiledLabel>,
    pub(crate) delta_vars: Vec<DeltaVar>,
    pub(crate) delta_preds: Vec<CompiledPredicate>,
    pub(crate) parent_vars: Vec<VarId>,
}

impl CompiledNode {
    pub fn steps(&self) -> &[BindingStep] {
        &self.steps
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn new_vars(&self) -> &[VarId] {
        &self.new_vars
    }
}

/// A validated query tree resolved against one log.
#[derive(Debug, Clone)]
pub struct CompiledTree {
    pub(crate) layout: TreeLayout,
    pub(crate) nodes: Vec<CompiledNode>,
    pub(crate) var_kinds: Vec<VarKind>,
}

impl CompiledTree {
    pub fn new(tree: &QueryTree, idx: &IndexedLog) -> Result<Self, EngineError> {
        let layout = tree.layout().map_err(EngineError::InvalidTree)?;
        let var_kinds: Vec<VarKind> = (0..layout.var_count())
            .map(|v| layout.var_kind(VarId(v as u32)))
            .collect();
        let var = |name: &str| layout.var_id(name).expect("validated variable");

        let compile_basic = |p: &Predicate| -> Option<CompiledPredicate> {
            Some(match p {
                Predicate::E2O {
                    event,
                    object,
                    qualifier,
                } => CompiledPredicate::E2O {
                    event: var(event),
                    object: var(object),
                    qualifier: idx.qualifier_filter(qualifier),
                },
                Predicate::O2O {
                    from,
                    to,
                    qualifier,
                } => CompiledPredicate::O2O {
                    from: var(from),
                    to: var(to),
                    qualifier: idx.qualifier_filter(qualifier),
                },
                Predicate::TBE { from, to, min, max } => CompiledPredicate::TBE {
                    from: var(from),
                    to: var(to),
                    min: min.map_or(i64::MIN, |d| d.as_millis()),
                    max: max.map_or(i64::MAX, |d| d.as_millis()),
                },
                Predicate::CBS { .. } => return None,
            })
        };

        let mut nodes = Vec::with_capacity(tree.nodes.len());
        for (ni, node) in tree.nodes.iter().enumerate() {
            let bx = &node.binding_box;
            let parent_box = layout.parent[ni].map(|(p, _)| &tree.nodes[p].binding_box);
            let parent_vars: Vec<VarId> = layout.parent[ni]
                .map(|(p, _)| layout.node_vars[p].clone())
                .unwrap_or_default();

            let mut delta_vars = Vec::new();
            for decl in &bx.vars {
                let id = var(&decl.name);
                if parent_vars.contains(&id) {
                    continue;
                }
                let types = decl
                    .types
                    .iter()
                    .filter_map(|t| match decl.kind {
                        VarKind::Event => idx.interner().event_types.get(t),
                        VarKind::Object => idx.interner().object_types.get(t),
                    })
                    .collect();
                delta_vars.push(DeltaVar {
                    var: id,
                    name: decl.name.clone(),
                    kind: decl.kind,
                    types,
                });
            }
            let delta_preds: Vec<CompiledPredicate> = bx
                .basic_predicates()
                .filter(|p| parent_box.is_none_or(|pb| !pb.basic_predicates().any(|q| q == *p)))
                .filter_map(&compile_basic)
                .collect();
            let steps = plan(&delta_vars, &delta_preds, &parent_vars, idx)?;

            let child_edges = &layout.children[ni];
            let slot_of = |label: &str| {
                child_edges
                    .iter()
                    .position(|&(e, _)| tree.edges[e].label == label)
                    .expect("validated edge label")
            };
            let cbs_of = |p: &Predicate| match p {
                Predicate::CBS { edge, min, max } => Some(CbsBound {
                    child: slot_of(edge),
                    min: *min,
                    max: max.unwrap_or(u64::MAX),
                }),
                _ => None,
            };
            let cbs = bx.predicates.iter().filter_map(cbs_of).collect();
            let constraints = bx
                .constraints
                .iter()
                .map(|p| match cbs_of(p) {
                    Some(c) => CompiledConstraint::Cbs(c),
                    None => CompiledConstraint::Basic(compile_basic(p).expect("basic predicate")),
                })
                .collect();
            let labels = bx
                .labels
                .iter()
                .map(|l| {
                    let child = slot_of(l.aggregation.edge());
                    let dur = |agg, from: &str, to: &str| CompiledLabel::Duration {
                        child,
                        agg,
                        from: var(from),
                        to: var(to),
                    };
                    match &l.aggregation {
                        LabelAggregation::Count { .. } => CompiledLabel::Count(child),
                        LabelAggregation::MinDuration { from, to, .. } => {
                            dur(DurationAgg::Min, from, to)
                        }
                        LabelAggregation::MaxDuration { from, to, .. } => {
                            dur(DurationAgg::Max, from, to)
                        }
                        LabelAggregation::MeanDuration { from, to, .. } => {
                            dur(DurationAgg::Mean, from, to)
                        }
                    }
                })
                .collect();

            let mut new_vars: Vec<VarId> = delta_vars.iter().map(|d| d.var).collect();
            new_vars.sort_unstable();
            nodes.push(CompiledNode {
                id: node.id.clone(),
                steps,
                new_vars,
                children: child_edges.iter().map(|&(_, c)| c).collect(),
                cbs,
                constraints,
                labels,
                delta_vars,
                delta_preds,
                parent_vars,
            });
        }
        Ok(CompiledTree {
            layout,
            nodes,
            var_kinds,
        })
    }

    pub fn layout(&self) -> &TreeLayout {
        &self.layout
    }

    pub fn node(&self, index: usize) -> &CompiledNode {
        &self.nodes[index]
    }

    pub fn var_kinds(&self) -> &[VarKind] {
        &self.var_kinds
    }

    /// Re-plans one node, binding its new variables in exactly `order`.
    pub fn replan(
        &mut self,
        node: usize,
        order: &[VarId],
        idx: &IndexedLog,
    ) -> Result<(), PlanError> {
        let n = &mut self.nodes[node];
        n.steps = plan_in_order(&n.delta_vars, &n.delta_preds, &n.parent_vars, idx, order)?;
        Ok(())
    }
}
