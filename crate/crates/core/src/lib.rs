//! Object-centric process querying.
//!
//! The crate evaluates *query trees* of binding boxes over object-centric
//! event data (OCED). A binding box declares typed event/object variables and
//! a set of predicates; every node of a tree refines its parent, and
//! child-binding-set (CBS) predicates let a node filter on how many child
//! bindings it has under a labeled edge. Constraint predicates annotate rows as
//! satisfied or violated instead of filtering them.
//!
//! ```text
//! Oced ──build_index──> IndexedLog ──┐
//!                                     ├── evaluate_tree ──> EvaluationResult ──> summarize
//! QueryTree ──validate_tree──────────┘
//! ```
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. The `parallel` feature evaluates sibling bindings on a rayon pool.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod binding;
pub mod engine;
pub mod index;
pub mod oced;
pub mod oracle;
pub mod query;
pub mod result;
pub mod synthetic;
pub mod validate;

pub use binding::{is_child, Binding, EntityRef, VarId};
pub use engine::{evaluate_tree, EngineError, EvalOptions};
pub use index::{build_index, IndexError, IndexedLog, Relation};
pub use oced::{
    AttributeValue, Event, Object, ObjectAttribute, Oced, OcedError, Qualifier, Relationship,
    TimeDelta, Timestamp,
};
pub use oracle::{brute_force_evaluate, OracleError};
pub use query::{
    is_refinement, validate_tree, BindingBox, Edge, LabelAggregation, LabelSpec, Predicate,
    QueryNode, QueryTree, StructuralError, TreeLayout, VarDecl, VarKind,
};
pub use result::{summarize, EvaluationResult, LabelValue, NodeResult, NodeSummary, Row};
pub use validate::{validate, Finding, FindingCode, ValidationReport};
