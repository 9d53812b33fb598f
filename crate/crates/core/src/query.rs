//! Binding boxes, predicates and query trees.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::binding::VarId;
use crate::oced::{Qualifier, TimeDelta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    Event,
    Object,
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarKind::Event => "event",
            VarKind::Object => "object",
        })
    }
}

/// A typed variable declaration: the variable ranges over entities of any of
/// `types`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VarDecl {
    pub name: String,
    pub kind: VarKind,
    pub types: BTreeSet<String>,
}

impl VarDecl {
    pub fn new<I, S>(name: &str, kind: VarKind, types: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        VarDecl {
            name: name.into(),
            kind,
            types: types.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Predicate {
    /// The object bound to `object` is referenced by the event bound to `event`.
    E2O {
        event: String,
        object: String,
        qualifier: Qualifier,
    },
    /// The object bound to `to` is referenced by the object bound to `from`.
    O2O {
        from: String,
        to: String,
        qualifier: Qualifier,
    },
    /// `min <= time(to) - time(from) <= max`; `None` bounds are unbounded.
    TBE {
        from: String,
        to: String,
        min: Option<TimeDelta>,
        max: Option<TimeDelta>,
    },
    /// The number of satisfying child bindings under `edge` lies in `min..=max`.
    CBS {
        edge: String,
        min: u64,
        max: Option<u64>,
    },
}

impl Predicate {
    pub fn e2o(event: &str, object: &str, qualifier: Qualifier) -> Self {
        Predicate::E2O {
            event: event.into(),
            object: object.into(),
            qualifier,
        }
    }

    pub fn o2o(from: &str, to: &str, qualifier: Qualifier) -> Self {
        Predicate::O2O {
            from: from.into(),
            to: to.into(),
            qualifier,
        }
    }

    pub fn tbe(from: &str, to: &str, min: Option<TimeDelta>, max: Option<TimeDelta>) -> Self {
        Predicate::TBE {
            from: from.into(),
            to: to.into(),
            min,
            max,
        }
    }

    pub fn cbs(edge: &str, min: u64, max: Option<u64>) -> Self {
        Predicate::CBS {
            edge: edge.into(),
            min,
            max,
        }
    }

    /// E2O, O2O and TBE.
    pub fn is_basic(&self) -> bool {
        !matches!(self, Predicate::CBS { .. })
    }

    /// Variables referenced, with the kind each position requires.
    pub fn variables(&self) -> Vec<(&str, VarKind)> {
        match self {
            Predicate::E2O { event, object, .. } => {
                vec![
                    (event.as_str(), VarKind::Event),
                    (object.as_str(), VarKind::Object),
                ]
            }
            Predicate::O2O { from, to, .. } => {
                vec![
                    (from.as_str(), VarKind::Object),
                    (to.as_str(), VarKind::Object),
                ]
            }
            Predicate::TBE { from, to, .. } => {
                vec![
                    (from.as_str(), VarKind::Event),
                    (to.as_str(), VarKind::Event),
                ]
            }
            Predicate::CBS { .. } => Vec::new(),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bound = |b: &Option<TimeDelta>, inf: &str| match b {
            Some(d) => format!("{}ms", d.as_millis()),
            None => inf.to_string(),
        };
        match self {
            Predicate::E2O {
                event,
                object,
                qualifier,
            } => write!(f, "E2O({event}, {object}, {qualifier})"),
            Predicate::O2O {
                from,
                to,
                qualifier,
            } => write!(f, "O2O({from}, {to}, {qualifier})"),
            Predicate::TBE { from, to, min, max } => {
                write!(
                    f,
                    "TBE({from}, {to}, {}, {})",
                    bound(min, "-inf"),
                    bound(max, "inf")
                )
            }
            Predicate::CBS { edge, min, max } => match max {
                Some(m) => write!(f, "CBS({edge}, {min}, {m})"),
                None => write!(f, "CBS({edge}, {min}, inf)"),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LabelAggregation {
    /// Size of the child set under `edge`.
    Count { edge: String },
    /// Aggregates of `time(to) - time(from)` over the child set under `edge`.
    MinDuration {
        edge: String,
        from: String,
        to: String,
    },
    MaxDuration {
        edge: String,
        from: String,
        to: String,
    },
    /// Mean rounded down to whole milliseconds.
    MeanDuration {
        edge: String,
        from: String,
        to: String,
    },
}

impl LabelAggregation {
    pub fn edge(&self) -> &str {
        match self {
            LabelAggregation::Count { edge }
            | LabelAggregation::MinDuration { edge, .. }
            | LabelAggregation::MaxDuration { edge, .. }
            | LabelAggregation::MeanDuration { edge, .. } => edge,
        }
    }

    pub fn duration_vars(&self) -> Option<(&str, &str)> {
        match self {
            LabelAggregation::Count { .. } => None,
            LabelAggregation::MinDuration { from, to, .. }
            | LabelAggregation::MaxDuration { from, to, .. }
            | LabelAggregation::MeanDuration { from, to, .. } => Some((from, to)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelSpec {
    pub name: String,
    pub aggregation: LabelAggregation,
}

/// Typed variable declarations plus filter predicates, constraint predicates
/// and label columns.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BindingBox {
    pub vars: Vec<VarDecl>,
    pub predicates: Vec<Predicate>,
    pub constraints: Vec<Predicate>,
    pub labels: Vec<LabelSpec>,
}

impl BindingBox {
    pub fn new() -> Self {
        Self::default()
    }

    /// A child box inheriting every variable and basic predicate of `self`.
    pub fn refine(&self) -> Self {
        BindingBox {
            vars: self.vars.clone(),
            predicates: self
                .predicates
                .iter()
                .filter(|p| p.is_basic())
                .cloned()
                .collect(),
            constraints: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn event_var<I, S>(mut self, name: &str, types: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.vars.push(VarDecl::new(name, VarKind::Event, types));
        self
    }

    pub fn object_var<I, S>(mut self, name: &str, types: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.vars.push(VarDecl::new(name, VarKind::Object, types));
        self
    }

    pub fn with_predicate(mut self, p: Predicate) -> Self {
        self.predicates.push(p);
        self
    }

    pub fn with_constraint(mut self, p: Predicate) -> Self {
        self.constraints.push(p);
        self
    }

    pub fn with_label(mut self, name: &str, aggregation: LabelAggregation) -> Self {
        self.labels.push(LabelSpec {
            name: name.into(),
            aggregation,
        });
        self
    }

    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.vars.iter().find(|v| v.name == name)
    }

    pub fn basic_predicates(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates.iter().filter(|p| p.is_basic())
    }
}

/// `a ⪯ b` restricted to basic predicates: every variable of `a` is declared
/// in `b` with the same kind and type set, and every basic predicate of `a`
/// occurs in `b`. CBS predicates and constraints are ignored.
pub fn is_refinement(a: &BindingBox, b: &BindingBox) -> bool {
    a.vars.iter().all(|va| b.var(&va.name) == Some(va))
        && a.basic_predicates()
            .all(|p| b.basic_predicates().any(|q| q == p))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryNode {
    pub id: String,
    pub binding_box: BindingBox,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub label: String,
}

/// Rooted tree of binding boxes with uniquely labeled edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryTree {
    pub nodes: Vec<QueryNode>,
    pub edges: Vec<Edge>,
    pub root: String,
}

impl QueryTree {
    pub fn new(root: &str, root_box: BindingBox) -> Self {
        QueryTree {
            nodes: vec![QueryNode {
                id: root.into(),
                binding_box: root_box,
            }],
            edges: Vec::new(),
            root: root.into(),
        }
    }

    /// Adds `child` below `parent` via an edge named `label`.
    pub fn with_child(
        mut self,
        parent: &str,
        label: &str,
        child: &str,
        child_box: BindingBox,
    ) -> Self {
        self.nodes.push(QueryNode {
            id: child.into(),
            binding_box: child_box,
        });
        self.edges.push(Edge {
            from: parent.into(),
            to: child.into(),
            label: label.into(),
        });
        self
    }

    pub fn node(&self, id: &str) -> Option<&QueryNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Structural layout with variable codes; fails with the same findings as
    /// [`validate_tree`].
    pub fn layout(&self) -> Result<TreeLayout, Vec<StructuralError>> {
        let errors = validate_tree(self);
        if !errors.is_empty() {
            return Err(errors);
        }
        Ok(TreeLayout::build_unchecked(self))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructuralError {
    EmptyTree,
    UnknownRoot(String),
    DuplicateNodeId(String),
    UnknownEdgeEndpoint {
        label: String,
        node: String,
    },
    DuplicateEdgeLabel(String),
    /// The node graph is not a tree rooted at the root node.
    NotATree {
        node: String,
        reason: String,
    },
    RefinementViolation {
        edge: String,
        detail: String,
    },
    DuplicateVariable {
        node: String,
        var: String,
    },
    EmptyTypeSet {
        node: String,
        var: String,
    },
    /// A predicate, constraint or label uses a variable not declared in scope.
    UnboundVariable {
        node: String,
        var: String,
    },
    /// A variable is used where the other kind is required, or declared with
    /// both kinds in one tree.
    KindMismatch {
        node: String,
        var: String,
        expected: VarKind,
    },
    InvalidInterval {
        node: String,
        predicate: String,
    },
    /// A CBS predicate or label names an edge that does not leave the node.
    UnknownCbsEdge {
        node: String,
        edge: String,
    },
    InvalidLabel {
        node: String,
        label: String,
        detail: String,
    },
}

impl StructuralError {
    pub fn code(&self) -> &'static str {
        match self {
            StructuralError::EmptyTree => "EmptyTree",
            StructuralError::UnknownRoot(_) => "UnknownRoot",
            StructuralError::DuplicateNodeId(_) => "DuplicateNodeId",
            StructuralError::UnknownEdgeEndpoint { .. } => "UnknownEdgeEndpoint",
            StructuralError::DuplicateEdgeLabel(_) => "DuplicateEdgeLabel",
            StructuralError::NotATree { .. } => "NotATree",
            StructuralError::RefinementViolation { .. } => "RefinementViolation",
            StructuralError::DuplicateVariable { .. } => "DuplicateVariable",
            StructuralError::EmptyTypeSet { .. } => "EmptyTypeSet",
            StructuralError::UnboundVariable { .. } => "UnboundVariable",
            StructuralError::KindMismatch { .. } => "KindMismatch",
            StructuralError::InvalidInterval { .. } => "InvalidInterval",
            StructuralError::UnknownCbsEdge { .. } => "UnknownCbsEdge",
            StructuralError::InvalidLabel { .. } => "InvalidLabel",
        }
    }

    /// The node or edge the finding is attached to, if any.
    pub fn location(&self) -> Option<&str> {
        match self {
            StructuralError::EmptyTree => None,
            StructuralError::UnknownRoot(n)
            | StructuralError::DuplicateNodeId(n)
            | StructuralError::DuplicateEdgeLabel(n) => Some(n),
            StructuralError::UnknownEdgeEndpoint { label, .. } => Some(label),
            StructuralError::RefinementViolation { edge, .. } => Some(edge),
            StructuralError::NotATree { node, .. }
            | StructuralError::DuplicateVariable { node, .. }
            | StructuralError::EmptyTypeSet { node, .. }
            | StructuralError::UnboundVariable { node, .. }
            | StructuralError::KindMismatch { node, .. }
            | StructuralError::InvalidInterval { node, .. }
            | StructuralError::UnknownCbsEdge { node, .. }
            | StructuralError::InvalidLabel { node, .. } => Some(node),
        }
    }
}

impl fmt::Display for StructuralError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructuralError::EmptyTree => write!(f, "query tree has no nodes"),
            StructuralError::UnknownRoot(r) => write!(f, "root `{r}` is not a node"),
            StructuralError::DuplicateNodeId(n) => write!(f, "node id `{n}` is used twice"),
            StructuralError::UnknownEdgeEndpoint { label, node } => {
                write!(f, "edge `{label}` refers to unknown node `{node}`")
            }
            StructuralError::DuplicateEdgeLabel(l) => write!(f, "edge label `{l}` is used twice"),
            StructuralError::NotATree { node, reason } => write!(f, "node `{node}`: {reason}"),
            StructuralError::RefinementViolation { edge, detail } => {
                write!(f, "edge `{edge}` does not refine its parent: {detail}")
            }
            StructuralError::DuplicateVariable { node, var } => {
                write!(f, "node `{node}` declares `{var}` twice")
            }
            StructuralError::EmptyTypeSet { node, var } => {
                write!(f, "variable `{var}` of node `{node}` has no types")
            }
            StructuralError::UnboundVariable { node, var } => {
                write!(f, "node `{node}` uses undeclared variable `{var}`")
            }
            StructuralError::KindMismatch {
                node,
                var,
                expected,
            } => {
                write!(
                    f,
                    "variable `{var}` in node `{node}` must be an {expected} variable"
                )
            }
            StructuralError::InvalidInterval { node, predicate } => {
                write!(f, "node `{node}`: empty interval in {predicate}")
            }
            StructuralError::UnknownCbsEdge { node, edge } => {
                write!(f, "node `{node}` has no outgoing edge `{edge}`")
            }
            StructuralError::InvalidLabel {
                node,
                label,
                detail,
            } => {
                write!(f, "label `{label}` of node `{node}`: {detail}")
            }
        }
    }
}

/// Checks every query-tree invariant and returns all findings.
pub fn validate_tree(t: &QueryTree) -> Vec<StructuralError> {
    let mut errors = Vec::new();
    if t.nodes.is_empty() {
        errors.push(StructuralError::EmptyTree);
        return errors;
    }

    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, n) in t.nodes.iter().enumerate() {
        if index.insert(&n.id, i).is_some() {
            errors.push(StructuralError::DuplicateNodeId(n.id.clone()));
        }
    }
    let root = match index.get(t.root.as_str()) {
        Some(&r) => Some(r),
        None => {
            errors.push(StructuralError::UnknownRoot(t.root.clone()));
            None
        }
    };

    let mut labels = BTreeSet::new();
    let mut parent_of: Vec<Option<usize>> = vec![None; t.nodes.len()];
    let mut outgoing: Vec<BTreeMap<&str, usize>> = vec![BTreeMap::new(); t.nodes.len()];
    for (ei, e) in t.edges.iter().enumerate() {
        if !labels.insert(e.label.as_str()) {
            errors.push(StructuralError::DuplicateEdgeLabel(e.label.clone()));
        }
        let (Some(&from), Some(&to)) = (index.get(e.from.as_str()), index.get(e.to.as_str()))
        else {
            for end in [&e.from, &e.to] {
                if !index.contains_key(end.as_str()) {
                    errors.push(StructuralError::UnknownEdgeEndpoint {
                        label: e.label.clone(),
                        node: end.clone(),
                    });
                }
            }
            continue;
        };
        if Some(to) == root {
            errors.push(StructuralError::NotATree {
                node: e.to.clone(),
                reason: "the root cannot have a parent".into(),
            });
        }
        if parent_of[to].is_some() {
            errors.push(StructuralError::NotATree {
                node: e.to.clone(),
                reason: "node has more than one parent".into(),
            });
        } else {
            parent_of[to] = Some(ei);
        }
        outgoing[from].insert(&e.label, to);
    }

    if let Some(root) = root {
        let mut seen = vec![false; t.nodes.len()];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(n) = queue.pop_front() {
            for &c in outgoing[n].values() {
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        for (i, s) in seen.iter().enumerate() {
            if !s {
                errors.push(StructuralError::NotATree {
                    node: t.nodes[i].id.clone(),
                    reason: "node is not reachable from the root".into(),
                });
            }
        }
    }

    let mut kinds: BTreeMap<&str, VarKind> = BTreeMap::new();
    for (ni, n) in t.nodes.iter().enumerate() {
        let b = &n.binding_box;
        let node = || n.id.clone();
        let mut declared = BTreeMap::new();
        for v in &b.vars {
            if declared.insert(v.name.as_str(), v.kind).is_some() {
                errors.push(StructuralError::DuplicateVariable {
                    node: node(),
                    var: v.name.clone(),
                });
            }
            if v.types.is_empty() {
                errors.push(StructuralError::EmptyTypeSet {
                    node: node(),
                    var: v.name.clone(),
                });
            }
            match kinds.get(v.name.as_str()) {
                Some(&k) if k != v.kind => errors.push(StructuralError::KindMismatch {
                    node: node(),
                    var: v.name.clone(),
                    expected: k,
                }),
                Some(_) => {}
                None => {
                    kinds.insert(&v.name, v.kind);
                }
            }
        }

        for p in b.predicates.iter().chain(&b.constraints) {
            for (var, kind) in p.variables() {
                match declared.get(var) {
                    None => errors.push(StructuralError::UnboundVariable {
                        node: node(),
                        var: var.into(),
                    }),
                    Some(&k) if k != kind => errors.push(StructuralError::KindMismatch {
                        node: node(),
                        var: var.into(),
                        expected: kind,
                    }),
                    Some(_) => {}
                }
            }
            match p {
                Predicate::TBE {
                    min: Some(lo),
                    max: Some(hi),
                    ..
                } if lo > hi => errors.push(StructuralError::InvalidInterval {
                    node: node(),
                    predicate: p.to_string(),
                }),
                Predicate::CBS { edge, min, max } => {
                    if matches!(max, Some(hi) if min > hi) {
                        errors.push(StructuralError::InvalidInterval {
                            node: node(),
                            predicate: p.to_string(),
                        });
                    }
                    if !outgoing[ni].contains_key(edge.as_str()) {
                        errors.push(StructuralError::UnknownCbsEdge {
                            node: node(),
                            edge: edge.clone(),
                        });
                    }
                }
                _ => {}
            }
        }

        let mut label_names = BTreeSet::new();
        for l in &b.labels {
            let bad = |detail: String| StructuralError::InvalidLabel {
                node: node(),
                label: l.name.clone(),
                detail,
            };
            if !label_names.insert(l.name.as_str()) {
                errors.push(bad("duplicate label name".into()));
            }
            let edge = l.aggregation.edge();
            let Some(&child) = outgoing[ni].get(edge) else {
                errors.push(StructuralError::UnknownCbsEdge {
                    node: node(),
                    edge: edge.into(),
                });
                continue;
            };
            if let Some((from, to)) = l.aggregation.duration_vars() {
                let child_box = &t.nodes[child].binding_box;
                for var in [from, to] {
                    match child_box.var(var) {
                        Some(v) if v.kind == VarKind::Event => {}
                        Some(_) => errors.push(bad(format!("`{var}` is not an event variable"))),
                        None => errors.push(bad(format!("`{var}` is not bound in the child node"))),
                    }
                }
            }
        }
    }

    for e in &t.edges {
        let (Some(&a), Some(&b)) = (index.get(e.from.as_str()), index.get(e.to.as_str())) else {
            continue;
        };
        let (pa, pb) = (&t.nodes[a].binding_box, &t.nodes[b].binding_box);
        for v in &pa.vars {
            match pb.var(&v.name) {
                None => errors.push(StructuralError::RefinementViolation {
                    edge: e.label.clone(),
                    detail: format!("child drops variable `{}`", v.name),
                }),
                Some(w) if w != v => errors.push(StructuralError::RefinementViolation {
                    edge: e.label.clone(),
                    detail: format!("child redeclares `{}` with different types", v.name),
                }),
                Some(_) => {}
            }
        }
        for p in pa.basic_predicates() {
            if !pb.basic_predicates().any(|q| q == p) {
                errors.push(StructuralError::RefinementViolation {
                    edge: e.label.clone(),
                    detail: format!("child drops predicate {p}"),
                });
            }
        }
    }

    errors
}

/// Node order, parent/child links and variable codes of a valid tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeLayout {
    /// Node indices, root first, breadth-first in edge declaration order.
    pub order: Vec<usize>,
    /// `(parent node, edge index)` per node.
    pub parent: Vec<Option<(usize, usize)>>,
    /// `(edge index, child node)` per node, in edge declaration order.
    pub children: Vec<Vec<(usize, usize)>>,
    /// Declared variables of each node, in declaration order.
    pub node_vars: Vec<Vec<VarId>>,
    var_names: Vec<String>,
    var_kinds: Vec<VarKind>,
    root: usize,
}

impl TreeLayout {
    fn build_unchecked(t: &QueryTree) -> Self {
        let index: BTreeMap<&str, usize> = t
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let root = index[t.root.as_str()];
        let mut parent = vec![None; t.nodes.len()];
        let mut children = vec![Vec::new(); t.nodes.len()];
        for (ei, e) in t.edges.iter().enumerate() {
            let (a, b) = (index[e.from.as_str()], index[e.to.as_str()]);
            parent[b] = Some((a, ei));
            children[a].push((ei, b));
        }
        let mut order = Vec::with_capacity(t.nodes.len());
        let mut queue = VecDeque::from([root]);
        while let Some(n) = queue.pop_front() {
            order.push(n);
            queue.extend(children[n].iter().map(|&(_, c)| c));
        }

        let mut var_names: Vec<String> = Vec::new();
        let mut var_kinds = Vec::new();
        let mut codes: BTreeMap<&str, VarId> = BTreeMap::new();
        let mut node_vars = vec![Vec::new(); t.nodes.len()];
        for &n in &order {
            for v in &t.nodes[n].binding_box.vars {
                let id = *codes.entry(&v.name).or_insert_with(|| {
                    var_names.push(v.name.clone());
                    var_kinds.push(v.kind);
                    VarId(var_names.len() as u32 - 1)
                });
                node_vars[n].push(id);
            }
        }
        TreeLayout {
            order,
            parent,
            children,
            node_vars,
            var_names,
            var_kinds,
            root,
        }
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn var_count(&self) -> usize {
        self.var_names.len()
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.var_names
            .iter()
            .position(|n| n == name)
            .map(|i| VarId(i as u32))
    }

    pub fn var_name(&self, id: VarId) -> &str {
        &self.var_names[id.0 as usize]
    }

    pub fn var_kind(&self, id: VarId) -> VarKind {
        self.var_kinds[id.0 as usize]
    }

    /// The child node reached from `node` over the edge labeled `label`.
    pub fn child_by_label(
        &self,
        t: &QueryTree,
        node: usize,
        label: &str,
    ) -> Option<(usize, usize)> {
        self.children[node]
            .iter()
            .copied()
            .find(|&(e, _)| t.edges[e].label == label)
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn example_trees_are_valid() {
        assert_eq!(validate_tree(&t1()), vec![]);
        assert_eq!(validate_tree(&t2()), vec![]);
        assert_eq!(validate_tree(&constraint_tree()), vec![]);
    }

    #[test]
    fn duplicate_edge_label() {
        let mut t = t1();
        t.edges[1].label = "A".into();
        let errs = validate_tree(&t);
        assert!(
            errs.contains(&StructuralError::DuplicateEdgeLabel("A".into())),
            "{errs:?}"
        );
    }

    #[test]
    fn child_dropping_a_variable() {
        let mut t = t1();
        let b = &mut t.nodes[1].binding_box;
        b.vars.retain(|v| v.name != "o1");
        b.predicates
            .retain(|p| !p.variables().iter().any(|(v, _)| *v == "o1"));
        let errs = validate_tree(&t);
        assert!(
            errs.iter().any(|e| e.code() == "RefinementViolation"),
            "{errs:?}"
        );
    }

    #[test]
    fn redeclared_types_violate_refinement() {
        let mut t = t1();
        t.nodes[2].binding_box.vars[0].types.insert("items".into());
        let errs = validate_tree(&t);
        assert!(
            matches!(&errs[..], [StructuralError::RefinementViolation { edge, .. }] if edge == "B")
        );
    }

    #[test]
    fn cbs_must_name_an_outgoing_edge() {
        let mut t = t2();
        t.nodes[1]
            .binding_box
            .predicates
            .push(Predicate::cbs("B", 0, None));
        let errs = validate_tree(&t);
        assert_eq!(
            errs,
            vec![StructuralError::UnknownCbsEdge {
                node: "v1".into(),
                edge: "B".into()
            }]
        );
    }

    #[test]
    fn intervals_and_kinds() {
        let b = root_box()
            .with_predicate(Predicate::tbe(
                "e1",
                "e1",
                Some(TimeDelta::from_millis(5)),
                Some(TimeDelta::from_millis(1)),
            ))
            .with_constraint(Predicate::e2o("o1", "o1", star()))
            .with_constraint(Predicate::o2o("o1", "zz", star()));
        let errs = validate_tree(&QueryTree::new("r", b));
        let codes: Vec<_> = errs.iter().map(|e| e.code()).collect();
        assert_eq!(
            codes,
            ["InvalidInterval", "KindMismatch", "UnboundVariable"]
        );
        let cbs = QueryTree::new(
            "r",
            root_box().with_predicate(Predicate::cbs("A", 2, Some(1))),
        )
        .with_child("r", "A", "c", root_box());
        assert_eq!(validate_tree(&cbs)[0].code(), "InvalidInterval");
    }

    #[test]
    fn shape_errors() {
        let mut t = t1();
        t.edges.push(Edge {
            from: "v1".into(),
            to: "v2".into(),
            label: "C".into(),
        });
        assert!(validate_tree(&t).iter().any(|e| e.code() == "NotATree"));

        let mut t = t1();
        t.root = "nope".into();
        assert_eq!(
            validate_tree(&t)[0],
            StructuralError::UnknownRoot("nope".into())
        );

        let mut t = t1();
        t.edges[0].to = "ghost".into();
        let errs = validate_tree(&t);
        assert!(errs.iter().any(|e| e.code() == "UnknownEdgeEndpoint"));
        assert!(
            errs.iter().any(|e| e.code() == "NotATree"),
            "v1 is unreachable"
        );

        let empty = QueryTree {
            nodes: vec![],
            edges: vec![],
            root: "x".into(),
        };
        assert_eq!(validate_tree(&empty), vec![StructuralError::EmptyTree]);
    }

    #[test]
    fn labels_are_checked() {
        let t = QueryTree::new(
            "v0",
            root_box()
                .with_label("n", LabelAggregation::Count { edge: "A".into() })
                .with_label(
                    "d",
                    LabelAggregation::MaxDuration {
                        edge: "A".into(),
                        from: "e1".into(),
                        to: "o1".into(),
                    },
                )
                .with_label(
                    "x",
                    LabelAggregation::MinDuration {
                        edge: "A".into(),
                        from: "e1".into(),
                        to: "nope".into(),
                    },
                ),
        )
        .with_child("v0", "A", "v1", v1_box());
        let codes: Vec<_> = validate_tree(&t).iter().map(|e| e.code()).collect();
        assert_eq!(codes, ["InvalidLabel", "InvalidLabel"]);
    }

    #[test]
    fn refinement_examples() {
        // {o1: orders} with no predicates refines into the box with e1 added
        let small = BindingBox::new().object_var("o1", ["orders"]);
        let big = root_box();
        assert!(is_refinement(&small, &big));
        assert!(!is_refinement(&big, &small));
        assert!(is_refinement(&big, &big));
        let with_cbs = big.clone().with_predicate(Predicate::cbs("A", 1, Some(3)));
        assert!(is_refinement(&with_cbs, &big));
        assert!(is_refinement(&big, &with_cbs));
    }

    #[test]
    fn layout_assigns_codes_in_breadth_first_order() {
        let t = t1();
        let l = t.layout().unwrap();
        assert_eq!(l.order, [0, 1, 2]);
        assert_eq!(l.var_name(VarId(0)), "o1");
        assert_eq!(l.var_name(VarId(1)), "e1");
        assert_eq!(l.var_name(VarId(2)), "e2");
        assert_eq!(l.var_count(), 3);
        assert_eq!(l.node_vars[2], [VarId(0), VarId(1), VarId(2)]);
        assert_eq!(l.parent[2], Some((0, 1)));
        assert_eq!(l.child_by_label(&t, 0, "B"), Some((1, 2)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_box() -> impl Strategy<Value = BindingBox> {
            let vars = proptest::sample::subsequence(vec!["a", "b", "c", "d"], 0..4);
            let preds = proptest::sample::subsequence(
                vec![
                    Predicate::e2o("a", "b", Qualifier::Wildcard),
                    Predicate::o2o("b", "d", Qualifier::named("q")),
                    Predicate::tbe("a", "c", None, Some(TimeDelta::DAY)),
                    Predicate::cbs("X", 0, None),
                ],
                0..4,
            );
            (vars, preds).prop_map(|(vars, preds)| {
                let mut b = BindingBox::new();
                for v in vars {
                    b.vars.push(VarDecl::new(v, VarKind::Object, ["t"]));
                }
                b.predicates = preds;
                b
            })
        }

        proptest! {
            #[test]
            fn refinement_is_a_preorder(a in arb_box(), b in arb_box(), c in arb_box()) {
                prop_assert!(is_refinement(&a, &a));
                if is_refinement(&a, &b) && is_refinement(&b, &c) {
                    prop_assert!(is_refinement(&a, &c));
                }
            }

            #[test]
            fn growing_the_target_preserves_refinement(a in arb_box(), extra in arb_box()) {
                let mut b = a.clone();
                for v in extra.vars {
                    if b.var(&v.name).is_none() {
                        b.vars.push(v);
                    }
                }
                b.predicates.extend(extra.predicates);
                prop_assert!(is_refinement(&a, &b));
            }
        }
    }
}
