use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use super::compile::{CompiledConstraint, CompiledLabel, CompiledTree, DurationAgg};
use super::expand::{run_steps, slots_to_binding, UNBOUND};
use super::plan::PlanError;
use crate::binding::{Binding, EntityRef, VarId};
use crate::index::IndexedLog;
use crate::query::{QueryTree, StructuralError};
use crate::result::{EvaluationResult, LabelValue, NodeResult, Row};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("invalid query tree ({} finding(s))", .0.len())]
    InvalidTree(Vec<StructuralError>),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("node `{node}` produced more than {limit} rows")]
    ResultTooLarge { node: String, limit: usize },
    #[error("could not start worker threads: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Worker threads; 0 uses the available parallelism. Ignored without the
    /// `parallel` feature.
    pub threads: usize,
    /// Evaluation aborts once any node exceeds this many rows.
    pub max_rows_per_node: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            threads: 0,
            max_rows_per_node: 10_000_000,
        }
    }
}

impl EvalOptions {
    pub fn with_threads(threads: usize) -> Self {
        EvalOptions {
            threads,
            ..Self::default()
        }
    }
}

/// Evaluates `tree` from the root under the empty binding.
pub fn evaluate_tree(
    tree: &QueryTree,
    idx: &IndexedLog,
    opts: EvalOptions,
) -> Result<EvaluationResult, EngineError> {
    let compiled = CompiledTree::new(tree, idx)?;
    evaluate_compiled(&compiled, idx, opts)
}

/// Bindings of one node under a fixed parent binding, split by whether they
/// pass the node's CBS predicates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeBindings {
    pub satisfied: Vec<Binding>,
    /// Satisfy the basic predicates but fail a CBS predicate.
    pub basic_only: Vec<Binding>,
}

/// Evaluates the subtree rooted at `node` (an index into the tree's nodes)
/// under `parent`, which must bind exactly the parent node's variables.
pub fn evaluate_node(
    tree: &CompiledTree,
    node: usize,
    parent: &Binding,
    idx: &IndexedLog,
) -> NodeBindings {
    let ev = Evaluator {
        tree,
        idx,
        rows: tree.nodes.iter().map(|_| AtomicUsize::new(0)).collect(),
        abort: AtomicBool::new(false),
        cap: usize::MAX,
        parallel: false,
    };
    let mut slots = vec![UNBOUND; tree.var_kinds.len()];
    for (v, e) in parent.iter() {
        slots[v.0 as usize] = e.code();
    }
    let mut out = NodeBindings::default();
    for sub in ev.eval_node(node, &slots) {
        if sub.excluded {
            out.basic_only.push(sub.binding);
        } else {
            out.satisfied.push(sub.binding);
        }
    }
    out.satisfied.sort_unstable();
    out.basic_only.sort_unstable();
    out
}

/// A binding of one node together with its evaluated subtree.
struct Subtree {
    binding: Binding,
    excluded: bool,
    verdicts: Vec<bool>,
    labels: Vec<LabelValue>,
    children: Vec<Vec<Subtree>>,
}

struct Evaluator<'a> {
    tree: &'a CompiledTree,
    idx: &'a IndexedLog,
    rows: Vec<AtomicUsize>,
    abort: AtomicBool,
    cap: usize,
    #[cfg_attr(not(feature = "parallel"), allow(dead_code))]
    parallel: bool,
}

pub fn evaluate_compiled(
    tree: &CompiledTree,
    idx: &IndexedLog,
    opts: EvalOptions,
) -> Result<EvaluationResult, EngineError> {
    #[cfg(feature = "std")]
    let start = std::time::Instant::now();

    let threads = resolve_threads(opts.threads);
    let ev = Evaluator {
        tree,
        idx,
        rows: tree.nodes.iter().map(|_| AtomicUsize::new(0)).collect(),
        abort: AtomicBool::new(false),
        cap: opts.max_rows_per_node,
        parallel: threads > 1,
    };
    let root = tree.layout.root();
    let slots = vec![UNBOUND; tree.var_kinds.len()];
    let top = run_with_threads(threads, || ev.eval_node(root, &slots))?;

    if ev.abort.load(Ordering::Relaxed) {
        let node = ev
            .rows
            .iter()
            .position(|n| n.load(Ordering::Relaxed) > ev.cap)
            .unwrap_or(root);
        return Err(EngineError::ResultTooLarge {
            node: tree.nodes[node].id.clone(),
            limit: ev.cap,
        });
    }

    let nodes = assemble(tree, top);
    #[cfg(feature = "std")]
    let wall_time = Some(start.elapsed());
    #[cfg(not(feature = "std"))]
    let wall_time = None;
    Ok(EvaluationResult { nodes, wall_time })
}

fn resolve_threads(requested: usize) -> usize {
    #[cfg(feature = "parallel")]
    {
        if requested == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            requested
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = requested;
        1
    }
}

fn run_with_threads<T: Send>(
    threads: usize,
    f: impl FnOnce() -> T + Send,
) -> Result<T, EngineError> {
    #[cfg(feature = "parallel")]
    if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| EngineError::ThreadPool(alloc::string::ToString::to_string(&e)))?;
        return Ok(pool.install(f));
    }
    let _ = threads;
    Ok(f())
}

impl Evaluator<'_> {
    fn eval_node(&self, node: usize, slots: &[u32]) -> Vec<Subtree> {
        if self.abort.load(Ordering::Relaxed) {
            return Vec::new();
        }
        let cn = &self.tree.nodes[node];
        let stride = cn.new_vars.len().max(1);

        let mut candidates: Vec<u32> = Vec::new();
        let mut local = slots.to_vec();
        let mut produced = 0usize;
        let counter = &self.rows[node];
        run_steps(&cn.steps, &mut local, self.idx, &mut |s| {
            if cn.new_vars.is_empty() {
                candidates.push(0);
            } else {
                candidates.extend(cn.new_vars.iter().map(|v| s[v.0 as usize]));
            }
            produced += 1;
            if produced.is_multiple_of(4096) && self.over_cap(counter, 4096) {
                produced = 0;
                return false;
            }
            true
        });
        if self.over_cap(counter, produced % 4096) {
            return Vec::new();
        }

        let process = |values: &[u32]| self.eval_binding(node, slots, values);
        #[cfg(feature = "parallel")]
        if self.parallel && candidates.len() > stride {
            use rayon::prelude::*;
            return candidates.par_chunks(stride).map(process).collect();
        }
        candidates.chunks(stride).map(process).collect()
    }

    fn over_cap(&self, counter: &AtomicUsize, add: usize) -> bool {
        if counter.fetch_add(add, Ordering::Relaxed) + add > self.cap {
            self.abort.store(true, Ordering::Relaxed);
        }
        self.abort.load(Ordering::Relaxed)
    }

    fn eval_binding(&self, node: usize, parent_slots: &[u32], values: &[u32]) -> Subtree {
        let cn = &self.tree.nodes[node];
        let mut slots = parent_slots.to_vec();
        for (v, &c) in cn.new_vars.iter().zip(values) {
            slots[v.0 as usize] = c;
        }
        let children: Vec<Vec<Subtree>> = cn
            .children
            .iter()
            .map(|&c| self.eval_node(c, &slots))
            .collect();
        let sizes: Vec<u64> = children
            .iter()
            .map(|rows| rows.iter().filter(|r| !r.excluded).count() as u64)
            .collect();

        let excluded = !cn.cbs.iter().all(|c| c.holds(&sizes));
        let verdicts = if excluded {
            Vec::new()
        } else {
            cn.constraints
                .iter()
                .map(|c| match c {
                    CompiledConstraint::Basic(p) => p.holds(&slots, self.idx),
                    CompiledConstraint::Cbs(b) => b.holds(&sizes),
                })
                .collect()
        };
        let labels = cn
            .labels
            .iter()
            .map(|l| match *l {
                CompiledLabel::Count(child) => LabelValue::Count(sizes[child]),
                CompiledLabel::Duration {
                    child,
                    agg,
                    from,
                    to,
                } => duration_label(self.idx, &children[child], agg, from, to),
            })
            .collect();

        Subtree {
            binding: slots_to_binding(&slots, &self.tree.var_kinds),
            excluded,
            verdicts,
            labels,
            children,
        }
    }
}

fn duration_label(
    idx: &IndexedLog,
    rows: &[Subtree],
    agg: DurationAgg,
    from: VarId,
    to: VarId,
) -> LabelValue {
    let event = |b: &Binding, v| match b.get(v) {
        Some(EntityRef::Event(e)) => Some(e),
        _ => None,
    };
    let mut durations = rows.iter().filter(|r| !r.excluded).filter_map(|r| {
        let (a, b) = (event(&r.binding, from)?, event(&r.binding, to)?);
        Some((idx.time(b) - idx.time(a)).as_millis())
    });
    let Some(first) = durations.next() else {
        return LabelValue::Absent;
    };
    let ms = match agg {
        DurationAgg::Min => durations.fold(first, i64::min),
        DurationAgg::Max => durations.fold(first, i64::max),
        DurationAgg::Mean => {
            let (sum, n) = durations.fold((i128::from(first), 1i128), |(s, n), d| {
                (s + i128::from(d), n + 1)
            });
            sum.div_euclid(n) as i64
        }
    };
    LabelValue::Duration(crate::oced::TimeDelta::from_millis(ms))
}

/// Flattens the subtrees into per-node tables and sorts every table by
/// binding, remapping parent links top-down.
fn assemble(tree: &CompiledTree, top: Vec<Subtree>) -> Vec<NodeResult> {
    let mut tables: Vec<Vec<Row>> = tree.nodes.iter().map(|_| Vec::new()).collect();
    let root = tree.layout.root();
    let mut stack: Vec<(usize, Option<usize>, Subtree)> =
        top.into_iter().rev().map(|t| (root, None, t)).collect();
    while let Some((node, parent, sub)) = stack.pop() {
        let row_index = tables[node].len();
        tables[node].push(Row {
            binding: sub.binding,
            parent,
            cbs_excluded: sub.excluded,
            verdicts: sub.verdicts,
            labels: sub.labels,
        });
        for (slot, rows) in sub.children.into_iter().enumerate() {
            let child = tree.nodes[node].children[slot];
            stack.extend(rows.into_iter().rev().map(|t| (child, Some(row_index), t)));
        }
    }

    let mut remap: Vec<Vec<usize>> = vec![Vec::new(); tree.nodes.len()];
    for &node in &tree.layout.order {
        let mut rows = core::mem::take(&mut tables[node]);
        if let Some((p, _)) = tree.layout.parent[node] {
            for r in &mut rows {
                r.parent = r.parent.map(|i| remap[p][i]);
            }
        }
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_unstable_by(|&a, &b| rows[a].binding.cmp(&rows[b].binding));
        let mut old_to_new = vec![0; rows.len()];
        for (new, &old) in order.iter().enumerate() {
            old_to_new[old] = new;
        }
        let mut slots: Vec<Option<Row>> = rows.into_iter().map(Some).collect();
        tables[node] = order
            .iter()
            .map(|&old| slots[old].take().expect("permutation"))
            .collect();
        remap[node] = old_to_new;
    }

    tables
        .into_iter()
        .zip(&tree.nodes)
        .map(|(rows, n)| NodeResult::new(n.id.clone(), rows))
        .collect()
}
