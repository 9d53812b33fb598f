//! Object-centric event data: events, objects and their qualified relationships.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Sub};

use hashbrown::HashMap;

/// Absolute point in time, in milliseconds since the Unix epoch (UTC).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(i64);

/// Signed span of time in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TimeDelta(i64);

impl Timestamp {
    pub const fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub const fn as_millis(self) -> i64 {
        self.0
    }

    /// Builds a UTC timestamp from calendar fields (proleptic Gregorian).
    pub const fn from_utc(year: i64, month: u32, day: u32, hour: u32, min: u32, sec: u32) -> Self {
        // days_from_civil
        let y = if month <= 2 { year - 1 } else { year };
        let era = if y >= 0 { y } else { y - 399 } / 400;
        let yoe = y - era * 400;
        let m = month as i64;
        let mp = if m > 2 { m - 3 } else { m + 9 };
        let doy = (153 * mp + 2) / 5 + day as i64 - 1;
        let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        let days = era * 146_097 + doe - 719_468;
        let secs = days * 86_400 + hour as i64 * 3_600 + min as i64 * 60 + sec as i64;
        Timestamp(secs * 1_000)
    }
}

impl TimeDelta {
    pub const MILLISECOND: TimeDelta = TimeDelta(1);
    pub const SECOND: TimeDelta = TimeDelta(1_000);
    pub const MINUTE: TimeDelta = TimeDelta(60_000);
    pub const HOUR: TimeDelta = TimeDelta(3_600_000);
    pub const DAY: TimeDelta = TimeDelta(86_400_000);
    pub const WEEK: TimeDelta = TimeDelta(604_800_000);

    pub const fn from_millis(ms: i64) -> Self {
        TimeDelta(ms)
    }

    pub const fn as_millis(self) -> i64 {
        self.0
    }

    pub const fn times(self, n: i64) -> Self {
        TimeDelta(self.0 * n)
    }
}

impl Sub for Timestamp {
    type Output = TimeDelta;

    fn sub(self, rhs: Timestamp) -> TimeDelta {
        TimeDelta(self.0 - rhs.0)
    }
}

impl Add<TimeDelta> for Timestamp {
    type Output = Timestamp;

    fn add(self, rhs: TimeDelta) -> Timestamp {
        Timestamp(self.0 + rhs.0)
    }
}

/// Attribute value attached to events or objects.
#[derive(Debug, Clone, PartialEq)]
pub enum AttributeValue {
    String(String),
    Number(f64),
    Boolean(bool),
    Timestamp(Timestamp),
    Null,
}

impl PartialOrd for AttributeValue {
    /// Values only compare within the same tag.
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use AttributeValue::*;
        match (self, other) {
            (String(a), String(b)) => a.partial_cmp(b),
            (Number(a), Number(b)) => a.partial_cmp(b),
            (Boolean(a), Boolean(b)) => a.partial_cmp(b),
            (Timestamp(a), Timestamp(b)) => a.partial_cmp(b),
            (Null, Null) => Some(Ordering::Equal),
            _ => None,
        }
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::String(s) => f.write_str(s),
            AttributeValue::Number(n) => write!(f, "{n}"),
            AttributeValue::Boolean(b) => write!(f, "{b}"),
            AttributeValue::Timestamp(t) => write!(f, "{}", t.as_millis()),
            AttributeValue::Null => f.write_str("null"),
        }
    }
}

/// Relationship qualifier used when selecting references.
///
/// `Wildcard` matches every qualifier, including the empty one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Qualifier {
    Wildcard,
    Named(String),
}

impl Qualifier {
    pub fn named(q: impl Into<String>) -> Self {
        Qualifier::Named(q.into())
    }

    pub fn matches(&self, qualifier: &str) -> bool {
        match self {
            Qualifier::Wildcard => true,
            Qualifier::Named(q) => q == qualifier,
        }
    }
}

impl fmt::Display for Qualifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Qualifier::Wildcard => f.write_str("*"),
            Qualifier::Named(q) => f.write_str(q),
        }
    }
}

/// A qualified reference to an object.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Relationship {
    pub qualifier: String,
    pub object_id: String,
}

impl Relationship {
    pub fn new(qualifier: impl Into<String>, object_id: impl Into<String>) -> Self {
        Relationship {
            qualifier: qualifier.into(),
            object_id: object_id.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub id: String,
    pub activity: String,
    pub time: Timestamp,
    pub attributes: BTreeMap<String, AttributeValue>,
    pub e2o: Vec<Relationship>,
}

impl Event {
    pub fn new(id: impl Into<String>, activity: impl Into<String>, time: Timestamp) -> Self {
        Event {
            id: id.into(),
            activity: activity.into(),
            time,
            attributes: BTreeMap::new(),
            e2o: Vec::new(),
        }
    }

    pub fn with_object(mut self, qualifier: &str, object_id: &str) -> Self {
        self.e2o.push(Relationship::new(qualifier, object_id));
        self
    }

    pub fn with_attribute(mut self, name: &str, value: AttributeValue) -> Self {
        self.attributes.insert(name.into(), value);
        self
    }
}

/// One timestamped write of an object attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectAttribute {
    pub name: String,
    pub time: Timestamp,
    pub value: AttributeValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Object {
    pub id: String,
    pub otype: String,
    pub o2o: Vec<Relationship>,
    pub attributes: Vec<ObjectAttribute>,
}

impl Object {
    pub fn new(id: impl Into<String>, otype: impl Into<String>) -> Self {
        Object {
            id: id.into(),
            otype: otype.into(),
            o2o: Vec::new(),
            attributes: Vec::new(),
        }
    }

    pub fn with_object(mut self, qualifier: &str, object_id: &str) -> Self {
        self.o2o.push(Relationship::new(qualifier, object_id));
        self
    }

    pub fn with_attribute(mut self, name: &str, time: Timestamp, value: AttributeValue) -> Self {
        self.attributes.push(ObjectAttribute {
            name: name.into(),
            time,
            value,
        });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OcedError {
    #[error("unknown event or object id `{0}`")]
    UnknownRef(String),
}

/// An immutable object-centric event log.
///
/// Events and objects keep their insertion order; that order also fixes the
/// dense codes assigned by [`crate::build_index`].
#[derive(Debug, Clone, Default)]
pub struct Oced {
    events: Vec<Event>,
    objects: Vec<Object>,
    event_pos: HashMap<String, u32>,
    object_pos: HashMap<String, u32>,
}

impl PartialEq for Oced {
    fn eq(&self, other: &Self) -> bool {
        self.events == other.events && self.objects == other.objects
    }
}

impl Oced {
    /// Wraps events and objects. Duplicate ids keep their first position;
    /// [`crate::validate`] reports them.
    pub fn new(events: Vec<Event>, objects: Vec<Object>) -> Self {
        let mut event_pos = HashMap::with_capacity(events.len());
        for (i, e) in events.iter().enumerate() {
            event_pos.entry(e.id.clone()).or_insert(i as u32);
        }
        let mut object_pos = HashMap::with_capacity(objects.len());
        for (i, o) in objects.iter().enumerate() {
            object_pos.entry(o.id.clone()).or_insert(i as u32);
        }
        Oced {
            events,
            objects,
            event_pos,
            object_pos,
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn objects(&self) -> &[Object] {
        &self.objects
    }

    pub fn event(&self, id: &str) -> Option<&Event> {
        self.event_pos.get(id).map(|&i| &self.events[i as usize])
    }

    pub fn object(&self, id: &str) -> Option<&Object> {
        self.object_pos.get(id).map(|&i| &self.objects[i as usize])
    }

    pub fn event_position(&self, id: &str) -> Option<u32> {
        self.event_pos.get(id).copied()
    }

    pub fn object_position(&self, id: &str) -> Option<u32> {
        self.object_pos.get(id).copied()
    }

    /// Activity of an event or type of an object.
    pub fn type_of(&self, id: &str) -> Result<&str, OcedError> {
        if let Some(e) = self.event(id) {
            return Ok(&e.activity);
        }
        self.object(id)
            .map(|o| o.otype.as_str())
            .ok_or_else(|| OcedError::UnknownRef(id.into()))
    }

    pub fn time_of(&self, event_id: &str) -> Result<Timestamp, OcedError> {
        self.event(event_id)
            .map(|e| e.time)
            .ok_or_else(|| OcedError::UnknownRef(event_id.into()))
    }

    /// Objects referenced by an event (E2O) or an object (O2O) under `qualifier`.
    pub fn objects_of(&self, id: &str, qualifier: &Qualifier) -> Result<BTreeSet<&str>, OcedError> {
        let refs = if let Some(e) = self.event(id) {
            &e.e2o
        } else if let Some(o) = self.object(id) {
            &o.o2o
        } else {
            return Err(OcedError::UnknownRef(id.into()));
        };
        Ok(refs
            .iter()
            .filter(|r| qualifier.matches(&r.qualifier))
            .map(|r| r.object_id.as_str())
            .collect())
    }

    /// Value of the latest write of `attr` at or before `t`.
    pub fn attribute_at(
        &self,
        object_id: &str,
        attr: &str,
        t: Timestamp,
    ) -> Result<Option<&AttributeValue>, OcedError> {
        let object = self
            .object(object_id)
            .ok_or_else(|| OcedError::UnknownRef(object_id.into()))?;
        Ok(object
            .attributes
            .iter()
            .filter(|a| a.name == attr && a.time <= t)
            .max_by_key(|a| a.time)
            .map(|a| &a.value))
    }

    pub fn relationship_count(&self) -> usize {
        self.events.iter().map(|e| e.e2o.len()).sum::<usize>()
            + self.objects.iter().map(|o| o.o2o.len()).sum::<usize>()
    }
}
