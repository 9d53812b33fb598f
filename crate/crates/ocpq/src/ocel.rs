//! OCEL 2.0 JSON import and export.

use std::collections::{BTreeMap, HashMap, HashSet};

use chrono::{DateTime, NaiveDateTime, SecondsFormat, Utc};
use ocpq_core::{
    validate, AttributeValue, Event, Finding, FindingCode, Object, ObjectAttribute, Oced,
    Relationship, Timestamp,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum ImportError {
    #[error("parse error: {0}")]
    Parse(String),
    /// Strict mode: the log violates a mandatory property.
    #[error("invalid log: {}", .0.iter().map(|f| f.message.as_str()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Finding>),
}

/// An imported log plus the findings lenient mode tolerated.
#[derive(Debug, Clone)]
pub struct Imported {
    pub log: Oced,
    /// Lenient mode drops relationships to unknown objects; each drop is
    /// reported here along with validation warnings.
    pub warnings: Vec<Finding>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct OcelFile {
    #[serde(default)]
    object_types: Vec<TypeDecl>,
    #[serde(default)]
    event_types: Vec<TypeDecl>,
    objects: Vec<OcelObject>,
    events: Vec<OcelEvent>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TypeDecl {
    name: String,
    #[serde(default)]
    attributes: Vec<AttrDecl>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AttrDecl {
    name: String,
    #[serde(rename = "type")]
    ty: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct OcelRelationship {
    object_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    qualifier: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EventAttr {
    name: String,
    value: Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct ObjectAttr {
    name: String,
    time: String,
    value: Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct OcelEvent {
    id: String,
    #[serde(rename = "type")]
    ty: String,
    time: String,
    #[serde(default)]
    attributes: Vec<EventAttr>,
    #[serde(default)]
    relationships: Vec<OcelRelationship>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OcelObject {
    id: String,
    #[serde(rename = "type")]
    ty: String,
    #[serde(default)]
    attributes: Vec<ObjectAttr>,
    #[serde(default)]
    relationships: Vec<OcelRelationship>,
}

/// Parses an RFC 3339 timestamp; a missing offset is read as UTC.
pub fn parse_time(s: &str) -> Option<Timestamp> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(Timestamp::from_millis(t.timestamp_millis()));
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|t| Timestamp::from_millis(t.and_utc().timestamp_millis()))
}

/// RFC 3339 in UTC with millisecond precision.
pub fn format_time(t: Timestamp) -> String {
    DateTime::<Utc>::from_timestamp_millis(t.as_millis())
        .map(|d| d.to_rfc3339_opts(SecondsFormat::Millis, true))
        .unwrap_or_else(|| t.as_millis().to_string())
}

fn attr_value(v: &Value, declared: Option<&str>) -> AttributeValue {
    match (v, declared) {
        (Value::Null, _) => AttributeValue::Null,
        (Value::Bool(b), _) => AttributeValue::Boolean(*b),
        (Value::Number(n), _) => AttributeValue::Number(n.as_f64().unwrap_or(f64::NAN)),
        (Value::String(s), Some("time" | "date" | "datetime")) => parse_time(s).map_or_else(
            || AttributeValue::String(s.clone()),
            AttributeValue::Timestamp,
        ),
        (Value::String(s), Some("integer" | "float" | "number")) => s.parse().map_or_else(
            |_| AttributeValue::String(s.clone()),
            AttributeValue::Number,
        ),
        (Value::String(s), Some("boolean")) => match s.as_str() {
            "true" => AttributeValue::Boolean(true),
            "false" => AttributeValue::Boolean(false),
            _ => AttributeValue::String(s.clone()),
        },
        (Value::String(s), _) => AttributeValue::String(s.clone()),
        (other, _) => AttributeValue::String(other.to_string()),
    }
}

fn declared_types(decls: &[TypeDecl]) -> HashMap<(&str, &str), &str> {
    decls
        .iter()
        .flat_map(|t| {
            t.attributes
                .iter()
                .map(move |a| ((t.name.as_str(), a.name.as_str()), a.ty.as_str()))
        })
        .collect()
}

/// Reads an OCEL 2.0 JSON document.
///
/// Strict mode rejects dangling references and events without objects; lenient
/// mode drops dangling relationships and reports them as warnings.
pub fn import_ocel2_json(bytes: &[u8], strict: bool) -> Result<Imported, ImportError> {
    let file: OcelFile =
        serde_json::from_slice(bytes).map_err(|e| ImportError::Parse(e.to_string()))?;
    let event_attr_types = declared_types(&file.event_types);
    let object_attr_types = declared_types(&file.object_types);
    let object_ids: HashSet<&str> = file.objects.iter().map(|o| o.id.as_str()).collect();

    let mut dropped = Vec::new();
    let mut relationships = |owner: &str, rels: &[OcelRelationship]| -> Vec<Relationship> {
        rels.iter()
            .filter(|r| {
                let known = object_ids.contains(r.object_id.as_str());
                if !known {
                    dropped.push(Finding {
                        code: FindingCode::DanglingRef,
                        ref_id: owner.to_string(),
                        message: format!("`{owner}` references unknown object `{}`", r.object_id),
                    });
                }
                known || strict
            })
            .map(|r| {
                Relationship::new(r.qualifier.clone().unwrap_or_default(), r.object_id.clone())
            })
            .collect()
    };

    let mut objects = Vec::with_capacity(file.objects.len());
    for o in &file.objects {
        let mut attributes = Vec::with_capacity(o.attributes.len());
        for a in &o.attributes {
            let time = parse_time(&a.time).ok_or_else(|| {
                ImportError::Parse(format!(
                    "object `{}`: bad attribute time `{}`",
                    o.id, a.time
                ))
            })?;
            let declared = object_attr_types
                .get(&(o.ty.as_str(), a.name.as_str()))
                .copied();
            attributes.push(ObjectAttribute {
                name: a.name.clone(),
                time,
                value: attr_value(&a.value, declared),
            });
        }
        objects.push(Object {
            id: o.id.clone(),
            otype: o.ty.clone(),
            o2o: relationships(&o.id, &o.relationships),
            attributes,
        });
    }

    let mut events = Vec::with_capacity(file.events.len());
    for e in &file.events {
        let time = parse_time(&e.time).ok_or_else(|| {
            ImportError::Parse(format!("event `{}`: bad time `{}`", e.id, e.time))
        })?;
        let attributes: BTreeMap<String, AttributeValue> = e
            .attributes
            .iter()
            .map(|a| {
                let declared = event_attr_types
                    .get(&(e.ty.as_str(), a.name.as_str()))
                    .copied();
                (a.name.clone(), attr_value(&a.value, declared))
            })
            .collect();
        events.push(Event {
            id: e.id.clone(),
            activity: e.ty.clone(),
            time,
            attributes,
            e2o: relationships(&e.id, &e.relationships),
        });
    }

    let log = Oced::new(events, objects);
    let report = validate(&log, strict);
    if !report.errors.is_empty() {
        return Err(ImportError::Invalid(report.errors));
    }
    let mut warnings = if strict { Vec::new() } else { dropped };
    warnings.extend(report.warnings);
    Ok(Imported { log, warnings })
}

/// Declared type of an attribute and its precedence when values of one
/// attribute differ in kind. Declaring `time` or `string` never retypes a value
/// on re-import: numbers and booleans keep their JSON kind, and strings left
/// over from a `time` declaration do not parse as timestamps.
fn attr_type(v: &AttributeValue) -> (u8, &'static str) {
    match v {
        AttributeValue::Timestamp(_) => (4, "time"),
        AttributeValue::String(_) => (3, "string"),
        AttributeValue::Number(_) => (2, "float"),
        AttributeValue::Boolean(_) => (1, "boolean"),
        AttributeValue::Null => (0, "string"),
    }
}

fn declare<'a>(
    decl: &mut BTreeMap<&'a str, (u8, &'static str)>,
    name: &'a str,
    v: &AttributeValue,
) {
    let t = attr_type(v);
    let slot = decl.entry(name).or_insert(t);
    if t.0 > slot.0 {
        *slot = t;
    }
}

fn attr_json(v: &AttributeValue) -> Value {
    match v {
        AttributeValue::String(s) => Value::String(s.clone()),
        AttributeValue::Number(n) => {
            serde_json::Number::from_f64(*n).map_or(Value::Null, Value::Number)
        }
        AttributeValue::Boolean(b) => Value::Bool(*b),
        AttributeValue::Timestamp(t) => Value::String(format_time(*t)),
        AttributeValue::Null => Value::Null,
    }
}

fn relationships_json(rels: &[Relationship]) -> Vec<OcelRelationship> {
    rels.iter()
        .map(|r| OcelRelationship {
            object_id: r.object_id.clone(),
            qualifier: Some(r.qualifier.clone()),
        })
        .collect()
}

/// Serializes a log as OCEL 2.0 JSON, declaring every attribute's type.
pub fn export_ocel2_json(log: &Oced) -> Vec<u8> {
    type Decls<'a> = BTreeMap<&'a str, BTreeMap<&'a str, (u8, &'static str)>>;
    let mut event_types: Decls = BTreeMap::new();
    for e in log.events() {
        let decl = event_types.entry(&e.activity).or_default();
        for (name, v) in &e.attributes {
            declare(decl, name, v);
        }
    }
    let mut object_types: Decls = BTreeMap::new();
    for o in log.objects() {
        let decl = object_types.entry(&o.otype).or_default();
        for a in &o.attributes {
            declare(decl, &a.name, &a.value);
        }
    }
    let decls = |m: Decls| {
        m.into_iter()
            .map(|(name, attrs)| TypeDecl {
                name: name.into(),
                attributes: attrs
                    .into_iter()
                    .map(|(n, (_, t))| AttrDecl {
                        name: n.into(),
                        ty: t.into(),
                    })
                    .collect(),
            })
            .collect()
    };
    let file = OcelFile {
        object_types: decls(object_types),
        event_types: decls(event_types),
        objects: log
            .objects()
            .iter()
            .map(|o| OcelObject {
                id: o.id.clone(),
                ty: o.otype.clone(),
                attributes: o
                    .attributes
                    .iter()
                    .map(|a| ObjectAttr {
                        name: a.name.clone(),
                        time: format_time(a.time),
                        value: attr_json(&a.value),
                    })
                    .collect(),
                relationships: relationships_json(&o.o2o),
            })
            .collect(),
        events: log
            .events()
            .iter()
            .map(|e| OcelEvent {
                id: e.id.clone(),
                ty: e.activity.clone(),
                time: format_time(e.time),
                attributes: e
                    .attributes
                    .iter()
                    .map(|(n, v)| EventAttr {
                        name: n.clone(),
                        value: attr_json(v),
                    })
                    .collect(),
                relationships: relationships_json(&e.e2o),
            })
            .collect(),
    };
    serde_json::to_vec_pretty(&file).expect("OCEL structures serialize")
}

/// Counts and vocabulary of a log, as shown to the query editor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LogInfo {
    pub counts: LogCounts,
    pub event_types: Vec<String>,
    pub object_types: Vec<String>,
    pub qualifiers: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LogCounts {
    pub events: usize,
    pub objects: usize,
    pub relationships: usize,
}

pub fn log_info(log: &Oced) -> LogInfo {
    let sorted = |it: &mut dyn Iterator<Item = &str>| {
        let mut v: Vec<String> = it.map(String::from).collect();
        v.sort();
        v.dedup();
        v
    };
    LogInfo {
        counts: LogCounts {
            events: log.events().len(),
            objects: log.objects().len(),
            relationships: log.relationship_count(),
        },
        event_types: sorted(&mut log.events().iter().map(|e| e.activity.as_str())),
        object_types: sorted(&mut log.objects().iter().map(|o| o.otype.as_str())),
        qualifiers: sorted(
            &mut log
                .events()
                .iter()
                .flat_map(|e| &e.e2o)
                .chain(log.objects().iter().flat_map(|o| &o.o2o))
                .map(|r| r.qualifier.as_str()),
        ),
    }
}
