//! Per-node output tables and their summaries.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::time::Duration;

use crate::binding::Binding;
use crate::oced::TimeDelta;

/// Value of one label column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LabelValue {
    /// Aggregate over an empty child set.
    Absent,
    Count(u64),
    Duration(TimeDelta),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub binding: Binding,
    /// Row index in the parent node's table; `None` for root rows.
    pub parent: Option<usize>,
    /// The binding satisfies the node's basic predicates but fails a CBS predicate.
    pub cbs_excluded: bool,
    /// One verdict per constraint predicate; empty for excluded rows.
    pub verdicts: Vec<bool>,
    pub labels: Vec<LabelValue>,
}

impl Row {
    pub fn is_satisfied(&self) -> bool {
        !self.cbs_excluded && self.verdicts.iter().all(|&v| v)
    }

    pub fn is_violated(&self) -> bool {
        !self.cbs_excluded && self.verdicts.iter().any(|&v| !v)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeCounts {
    /// Rows satisfying the basic predicates, CBS-excluded ones included.
    pub total_basic: usize,
    pub satisfied: usize,
    pub violated: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeResult {
    pub node_id: String,
    /// Rows in canonical order (ascending binding words).
    pub rows: Vec<Row>,
    pub counts: NodeCounts,
}

impl NodeResult {
    pub fn new(node_id: String, rows: Vec<Row>) -> Self {
        let counts = NodeCounts {
            total_basic: rows.len(),
            satisfied: rows.iter().filter(|r| r.is_satisfied()).count(),
            violated: rows.iter().filter(|r| r.is_violated()).count(),
        };
        NodeResult {
            node_id,
            rows,
            counts,
        }
    }

    pub fn excluded_count(&self) -> usize {
        self.rows.iter().filter(|r| r.cbs_excluded).count()
    }
}

/// One table per tree node, indexed like [`crate::QueryTree::nodes`].
#[derive(Debug, Clone)]
pub struct EvaluationResult {
    pub nodes: Vec<NodeResult>,
    pub wall_time: Option<Duration>,
}

impl PartialEq for EvaluationResult {
    /// Wall time is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl EvaluationResult {
    pub fn node(&self, id: &str) -> Option<&NodeResult> {
        self.nodes.iter().find(|n| n.node_id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSummary {
    pub node_id: String,
    pub total_basic: usize,
    pub satisfied: usize,
    pub violated: usize,
    /// `100 * violated / (satisfied + violated)`, 0 without verdict-bearing rows.
    pub violation_percent: f64,
}

impl NodeSummary {
    /// The percentage with two decimals, e.g. `50.00`.
    pub fn percent_text(&self) -> String {
        format!("{:.2}", self.violation_percent)
    }
}

pub fn summarize(result: &EvaluationResult) -> Vec<NodeSummary> {
    result
        .nodes
        .iter()
        .map(|n| {
            let c = &n.counts;
            let denom = c.satisfied + c.violated;
            let violation_percent = if denom == 0 {
                0.0
            } else {
                100.0 * c.violated as f64 / denom as f64
            };
            NodeSummary {
                node_id: n.node_id.clone(),
                total_basic: c.total_basic,
                satisfied: c.satisfied,
                violated: c.violated,
                violation_percent,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn row(excluded: bool, verdicts: &[bool]) -> Row {
        Row {
            binding: Binding::empty(),
            parent: None,
            cbs_excluded: excluded,
            verdicts: verdicts.to_vec(),
            labels: vec![],
        }
    }

    #[test]
    fn percentages() {
        let n = NodeResult::new(
            "v0".into(),
            vec![
                row(false, &[true]),
                row(false, &[true]),
                row(false, &[false]),
                row(false, &[false]),
            ],
        );
        let s = summarize(&EvaluationResult {
            nodes: vec![n],
            wall_time: None,
        });
        assert_eq!(s[0].percent_text(), "50.00");
        assert_eq!((s[0].satisfied, s[0].violated), (2, 2));
    }

    #[test]
    fn no_constraints_means_no_violations() {
        let n = NodeResult::new("v0".into(), vec![row(false, &[]), row(true, &[])]);
        let s = summarize(&EvaluationResult {
            nodes: vec![n],
            wall_time: None,
        });
        assert_eq!((s[0].total_basic, s[0].satisfied, s[0].violated), (2, 1, 0));
        assert_eq!(s[0].percent_text(), "0.00");
        let empty = NodeResult::new("v1".into(), vec![]);
        let s = summarize(&EvaluationResult {
            nodes: vec![empty],
            wall_time: None,
        });
        assert_eq!(s[0].violation_percent, 0.0);
    }
}
