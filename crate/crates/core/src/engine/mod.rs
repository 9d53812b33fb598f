//! Recursive query-tree evaluation over an [`crate::IndexedLog`].
//!
//! For every binding of a node the engine expands each child node's added
//! variables, evaluates the child subtree, and uses the resulting child-set
//! sizes for CBS predicates, constraint verdicts and labels. Sibling bindings
//! are independent, so with the `parallel` feature they are evaluated on a
//! rayon pool; the final tables are sorted canonically so the output does not
//! depend on the thread count.

mod compile;
mod eval;
mod expand;
mod plan;

pub use compile::{CompiledNode, CompiledTree};
pub use eval::{
    evaluate_compiled, evaluate_node, evaluate_tree, EngineError, EvalOptions, NodeBindings,
};
pub use expand::expand;
pub use plan::{
    plan, plan_in_order, satisfies_basic, BindingStep, CompiledPredicate, DeltaVar, PlanError,
};
