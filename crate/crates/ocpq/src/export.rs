//! CSV tables and JSON summaries of evaluation results.

use ocpq_core::{
    summarize, EntityRef, EvaluationResult, IndexedLog, LabelValue, NodeResult, QueryTree, Row,
    TreeLayout, VarId,
};
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ExportError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("the query tree is not valid")]
    InvalidTree,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvOptions {
    /// Keep rows failing a CBS predicate and add a `cbs_excluded` column.
    pub include_basic_only: bool,
    pub include_labels: bool,
}

/// Column layout of one node's table.
pub struct NodeTable<'a> {
    node: &'a NodeResult,
    vars: Vec<(String, VarId)>,
    labels: Vec<String>,
    has_constraints: bool,
    idx: &'a IndexedLog,
}

impl<'a> NodeTable<'a> {
    pub fn new(
        result: &'a EvaluationResult,
        tree: &QueryTree,
        idx: &'a IndexedLog,
        node_id: &str,
    ) -> Result<Self, ExportError> {
        let ni = tree
            .node_index(node_id)
            .ok_or_else(|| ExportError::UnknownNode(node_id.into()))?;
        let node = result
            .nodes
            .get(ni)
            .ok_or_else(|| ExportError::UnknownNode(node_id.into()))?;
        let layout: TreeLayout = tree.layout().map_err(|_| ExportError::InvalidTree)?;
        let b = &tree.nodes[ni].binding_box;
        Ok(NodeTable {
            node,
            vars: layout.node_vars[ni]
                .iter()
                .map(|&v| (layout.var_name(v).to_string(), v))
                .collect(),
            labels: b.labels.iter().map(|l| l.name.clone()).collect(),
            has_constraints: !b.constraints.is_empty(),
            idx,
        })
    }

    pub fn node(&self) -> &NodeResult {
        self.node
    }

    pub fn var_names(&self) -> impl Iterator<Item = &str> {
        self.vars.iter().map(|(n, _)| n.as_str())
    }

    pub fn label_names(&self) -> &[String] {
        &self.labels
    }

    pub fn entity(&self, row: &Row, var: VarId) -> &str {
        match row.binding.get(var) {
            Some(EntityRef::Event(c)) => self.idx.event_id(c),
            Some(EntityRef::Object(c)) => self.idx.object_id(c),
            None => "",
        }
    }

    /// Indices of the rows kept under the filter, in canonical order.
    pub fn visible_rows(&self, include_basic_only: bool) -> Vec<usize> {
        (0..self.node.rows.len())
            .filter(|&i| include_basic_only || !self.node.rows[i].cbs_excluded)
            .collect()
    }

    pub fn header(&self, opts: CsvOptions) -> Vec<String> {
        let mut h: Vec<String> = self.var_names().map(String::from).collect();
        if opts.include_labels {
            h.extend(self.labels.iter().cloned());
        }
        if self.has_constraints {
            h.push("satisfied".into());
        }
        if opts.include_basic_only {
            h.push("cbs_excluded".into());
        }
        h
    }

    pub fn record(&self, row: &Row, opts: CsvOptions) -> Vec<String> {
        let mut rec: Vec<String> = self
            .vars
            .iter()
            .map(|&(_, v)| self.entity(row, v).to_string())
            .collect();
        if opts.include_labels {
            rec.extend(row.labels.iter().map(|l| label_text(*l)));
        }
        if self.has_constraints {
            rec.push(if row.cbs_excluded {
                String::new()
            } else {
                row.is_satisfied().to_string()
            });
        }
        if opts.include_basic_only {
            rec.push(row.cbs_excluded.to_string());
        }
        rec
    }

    /// JSON view of one row for paged API responses.
    pub fn row_json(&self, index: usize) -> Value {
        let row = &self.node.rows[index];
        let mut binding = Map::new();
        for (name, v) in &self.vars {
            binding.insert(name.clone(), Value::from(self.entity(row, *v)));
        }
        let mut labels = Map::new();
        for (name, l) in self.labels.iter().zip(&row.labels) {
            labels.insert(name.clone(), label_json(*l));
        }
        serde_json::json!({
            "index": index,
            "parent": row.parent,
            "binding": binding,
            "cbsExcluded": row.cbs_excluded,
            "verdicts": row.verdicts,
            "labels": labels,
        })
    }
}

/// Counts as integers, durations in milliseconds, absent values empty.
pub fn label_text(l: LabelValue) -> String {
    match l {
        LabelValue::Absent => String::new(),
        LabelValue::Count(n) => n.to_string(),
        LabelValue::Duration(d) => d.as_millis().to_string(),
    }
}

pub fn label_json(l: LabelValue) -> Value {
    match l {
        LabelValue::Absent => Value::Null,
        LabelValue::Count(n) => Value::from(n),
        LabelValue::Duration(d) => Value::from(d.as_millis()),
    }
}

/// One node's table as RFC 4180 CSV.
pub fn export_csv(
    result: &EvaluationResult,
    tree: &QueryTree,
    idx: &IndexedLog,
    node_id: &str,
    opts: CsvOptions,
) -> Result<Vec<u8>, ExportError> {
    let table = NodeTable::new(result, tree, idx, node_id)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = "writing CSV to memory cannot fail";
    w.write_record(table.header(opts)).expect(io);
    for i in table.visible_rows(opts.include_basic_only) {
        w.write_record(table.record(&table.node.rows[i], opts))
            .expect(io);
    }
    Ok(w.into_inner().expect(io))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SummaryJson {
    pub node_id: String,
    pub total_basic: usize,
    pub satisfied: usize,
    pub violated: usize,
    pub cbs_excluded: usize,
    /// Two decimals, e.g. `"50.00"`.
    pub violation_percent: String,
}

pub fn summary_json(result: &EvaluationResult) -> Vec<SummaryJson> {
    summarize(result)
        .into_iter()
        .zip(&result.nodes)
        .map(|(s, n)| SummaryJson {
            violation_percent: s.percent_text(),
            node_id: s.node_id,
            total_basic: s.total_basic,
            satisfied: s.satisfied,
            violated: s.violated,
            cbs_excluded: n.excluded_count(),
        })
        .collect()
}
