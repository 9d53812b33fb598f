//! Conformance checks for the mandatory parts of an event log.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use hashbrown::{HashMap, HashSet};

use crate::oced::Oced;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FindingCode {
    /// An event with no object reference.
    EventWithoutObjects,
    /// A reference to an object id that does not exist.
    DanglingRef,
    /// The same id used twice within events or within objects.
    DuplicateId,
    /// An id used for both an event and an object.
    AmbiguousId,
    EmptyActivity,
    EmptyObjectType,
    /// Two writes of the same object attribute at the same instant.
    DuplicateAttributeTime,
}

impl FindingCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingCode::EventWithoutObjects => "EventWithoutObjects",
            FindingCode::DanglingRef => "DanglingRef",
            FindingCode::DuplicateId => "DuplicateId",
            FindingCode::AmbiguousId => "AmbiguousId",
            FindingCode::EmptyActivity => "EmptyActivity",
            FindingCode::EmptyObjectType => "EmptyObjectType",
            FindingCode::DuplicateAttributeTime => "DuplicateAttributeTime",
        }
    }
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub code: FindingCode,
    pub ref_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has_error(&self, code: FindingCode) -> bool {
        self.errors.iter().any(|f| f.code == code)
    }

    fn push(&mut self, as_error: bool, code: FindingCode, ref_id: &str, message: String) {
        let finding = Finding {
            code,
            ref_id: ref_id.into(),
            message,
        };
        if as_error {
            self.errors.push(finding);
        } else {
            self.warnings.push(finding);
        }
    }
}

/// Checks every mandatory-attribute rule of `log`.
///
/// In lenient mode events without objects and ids shared between events and
/// objects are reported as warnings; strict mode makes them errors.
pub fn validate(log: &Oced, strict: bool) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut seen_events = HashSet::with_capacity(log.events().len());
    for e in log.events() {
        if !seen_events.insert(e.id.as_str()) {
            report.push(
                true,
                FindingCode::DuplicateId,
                &e.id,
                format!("event id `{}` is not unique", e.id),
            );
        }
    }
    let mut seen_objects = HashSet::with_capacity(log.objects().len());
    for o in log.objects() {
        if !seen_objects.insert(o.id.as_str()) {
            report.push(
                true,
                FindingCode::DuplicateId,
                &o.id,
                format!("object id `{}` is not unique", o.id),
            );
        }
        if seen_events.contains(o.id.as_str()) {
            report.push(
                strict,
                FindingCode::AmbiguousId,
                &o.id,
                format!("id `{}` names both an event and an object", o.id),
            );
        }
    }

    for e in log.events() {
        if e.activity.is_empty() {
            report.push(
                true,
                FindingCode::EmptyActivity,
                &e.id,
                format!("event `{}` has no activity", e.id),
            );
        }
        if e.e2o.is_empty() {
            report.push(
                strict,
                FindingCode::EventWithoutObjects,
                &e.id,
                format!("event `{}` references no object", e.id),
            );
        }
        for r in &e.e2o {
            if log.object(&r.object_id).is_none() {
                report.push(
                    true,
                    FindingCode::DanglingRef,
                    &e.id,
                    format!(
                        "event `{}` references unknown object `{}`",
                        e.id, r.object_id
                    ),
                );
            }
        }
    }

    for o in log.objects() {
        if o.otype.is_empty() {
            report.push(
                true,
                FindingCode::EmptyObjectType,
                &o.id,
                format!("object `{}` has no type", o.id),
            );
        }
        for r in &o.o2o {
            if log.object(&r.object_id).is_none() {
                report.push(
                    true,
                    FindingCode::DanglingRef,
                    &o.id,
                    format!(
                        "object `{}` references unknown object `{}`",
                        o.id, r.object_id
                    ),
                );
            }
        }
        let mut writes: HashMap<(&str, i64), usize> = HashMap::new();
        for a in &o.attributes {
            *writes
                .entry((a.name.as_str(), a.time.as_millis()))
                .or_default() += 1;
        }
        let mut dup: Vec<_> = writes
            .into_iter()
            .filter(|(_, n)| *n > 1)
            .map(|(k, _)| k)
            .collect();
        dup.sort_unstable();
        for (name, _) in dup {
            report.push(
                true,
                FindingCode::DuplicateAttributeTime,
                &o.id,
                format!("object `{}` writes `{}` twice at the same time", o.id, name),
            );
        }
    }

    report
}
