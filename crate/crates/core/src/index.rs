//! Interned, immutable index over an [`Oced`].
//!
//! Every entity, type and qualifier string is mapped to a dense `u32` code.
//! Relationships are stored as compressed adjacency lists (one per direction)
//! whose entries pack `(neighbor, qualifier)` into a single `u64`, sorted by
//! neighbor first so that equal neighbors are adjacent.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::hash::BuildHasher;

use hashbrown::hash_table::Entry;
use hashbrown::{DefaultHashBuilder, HashTable};

use crate::oced::{Oced, Qualifier, Relationship, Timestamp};

/// Bidirectional string <-> dense code table. Codes are assigned in
/// first-seen order starting at 0.
#[derive(Debug, Clone, Default)]
pub struct Interner {
    strings: Vec<Box<str>>,
    table: HashTable<u32>,
    hasher: DefaultHashBuilder,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Interner {
            strings: Vec::with_capacity(n),
            table: HashTable::with_capacity(n),
            hasher: DefaultHashBuilder::default(),
        }
    }

    pub fn intern(&mut self, s: &str) -> u32 {
        let hash = self.hasher.hash_one(s);
        let strings = &self.strings;
        let hasher = &self.hasher;
        match self.table.entry(
            hash,
            |&code| &*strings[code as usize] == s,
            |&code| hasher.hash_one(&*strings[code as usize]),
        ) {
            Entry::Occupied(e) => *e.get(),
            Entry::Vacant(e) => {
                let code = u32::try_from(self.strings.len()).expect("more than u32::MAX strings");
                e.insert(code);
                self.strings.push(s.into());
                code
            }
        }
    }

    pub fn get(&self, s: &str) -> Option<u32> {
        let hash = self.hasher.hash_one(s);
        self.table
            .find(hash, |&code| &*self.strings[code as usize] == s)
            .copied()
    }

    pub fn resolve(&self, code: u32) -> Option<&str> {
        self.strings.get(code as usize).map(|s| &**s)
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.strings.iter().map(|s| &**s)
    }
}

/// The string tables of one log.
#[derive(Debug, Clone, Default)]
pub struct LogInterner {
    pub events: Interner,
    pub objects: Interner,
    pub event_types: Interner,
    pub object_types: Interner,
    pub qualifiers: Interner,
    pub attributes: Interner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    /// event -> objects
    E2O,
    /// object -> events
    E2ORev,
    /// object -> objects
    O2O,
    /// object -> objects, reversed
    O2ORev,
}

impl Relation {
    /// Whether the neighbors produced by this relation are events.
    pub fn targets_events(self) -> bool {
        self == Relation::E2ORev
    }

    pub fn source_is_event(self) -> bool {
        self == Relation::E2O
    }
}

/// A qualifier resolved against a log's qualifier table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QualFilter {
    Any,
    Code(u32),
    /// The qualifier does not occur in the log and matches nothing.
    Absent,
}

impl QualFilter {
    #[inline]
    pub fn accepts(self, code: u32) -> bool {
        match self {
            QualFilter::Any => true,
            QualFilter::Code(c) => c == code,
            QualFilter::Absent => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IndexError {
    #[error("`{from}` references unknown object `{to}`")]
    DanglingRef { from: String, to: String },
    #[error("id `{0}` occurs more than once")]
    DuplicateId(String),
    #[error("unknown code {0}")]
    UnknownRef(u32),
}

/// Compressed adjacency: `entries[offsets[i]..offsets[i + 1]]` are the
/// `(neighbor << 32 | qualifier)` words of source `i`.
#[derive(Debug, Clone, Default)]
struct Adjacency {
    offsets: Vec<usize>,
    entries: Vec<u64>,
}

#[inline]
fn pack(neighbor: u32, qual: u32) -> u64 {
    (u64::from(neighbor) << 32) | u64::from(qual)
}

#[inline]
pub(crate) fn unpack(word: u64) -> (u32, u32) {
    ((word >> 32) as u32, word as u32)
}

impl Adjacency {
    fn build(sources: usize, edges: &[(u32, u32, u32)]) -> Self {
        let mut offsets = vec![0usize; sources + 1];
        for &(src, _, _) in edges {
            offsets[src as usize + 1] += 1;
        }
        for i in 0..sources {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut entries = vec![0u64; edges.len()];
        for &(src, dst, qual) in edges {
            let slot = &mut fill[src as usize];
            entries[*slot] = pack(dst, qual);
            *slot += 1;
        }
        for i in 0..sources {
            entries[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Adjacency { offsets, entries }
    }

    #[inline]
    fn of(&self, src: u32) -> &[u64] {
        let i = src as usize;
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }

    fn sources(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }
}

/// Read-only query substrate built from an [`Oced`].
///
/// Event codes equal positions in [`Oced::events`], object codes positions in
/// [`Oced::objects`].
#[derive(Debug, Clone, Default)]
pub struct IndexedLog {
    interner: LogInterner,
    event_type: Vec<u32>,
    object_type: Vec<u32>,
    times: Vec<Timestamp>,
    per_event_type: Vec<Vec<u32>>,
    per_object_type: Vec<Vec<u32>>,
    e2o: Adjacency,
    e2o_rev: Adjacency,
    o2o: Adjacency,
    o2o_rev: Adjacency,
}

/// Builds the index. Fails on duplicate ids or references to unknown objects.
pub fn build_index(log: &Oced) -> Result<IndexedLog, IndexError> {
    let mut interner = LogInterner {
        events: Interner::with_capacity(log.events().len()),
        objects: Interner::with_capacity(log.objects().len()),
        ..LogInterner::default()
    };

    let mut object_type = Vec::with_capacity(log.objects().len());
    for (pos, o) in log.objects().iter().enumerate() {
        if interner.objects.intern(&o.id) as usize != pos {
            return Err(IndexError::DuplicateId(o.id.clone()));
        }
        object_type.push(interner.object_types.intern(&o.otype));
    }

    let mut event_type = Vec::with_capacity(log.events().len());
    let mut times = Vec::with_capacity(log.events().len());
    let mut e2o_edges = Vec::new();
    for (pos, e) in log.events().iter().enumerate() {
        if interner.events.intern(&e.id) as usize != pos {
            return Err(IndexError::DuplicateId(e.id.clone()));
        }
        event_type.push(interner.event_types.intern(&e.activity));
        times.push(e.time);
        for attr in e.attributes.keys() {
            interner.attributes.intern(attr);
        }
        resolve_refs(&mut interner, &e.id, pos as u32, &e.e2o, &mut e2o_edges)?;
    }

    let mut o2o_edges = Vec::new();
    for (pos, o) in log.objects().iter().enumerate() {
        for attr in &o.attributes {
            interner.attributes.intern(&attr.name);
        }
        resolve_refs(&mut interner, &o.id, pos as u32, &o.o2o, &mut o2o_edges)?;
    }

    let mut per_event_type = vec![Vec::new(); interner.event_types.len()];
    for (code, &ty) in event_type.iter().enumerate() {
        per_event_type[ty as usize].push(code as u32);
    }
    for bucket in &mut per_event_type {
        bucket.sort_by_key(|&e| (times[e as usize], e));
    }
    let mut per_object_type = vec![Vec::new(); interner.object_types.len()];
    for (code, &ty) in object_type.iter().enumerate() {
        per_object_type[ty as usize].push(code as u32);
    }

    let n_events = event_type.len();
    let n_objects = object_type.len();
    let e2o = Adjacency::build(n_events, &e2o_edges);
    let o2o = Adjacency::build(n_objects, &o2o_edges);
    let reverse = |edges: &mut Vec<(u32, u32, u32)>| {
        for edge in edges.iter_mut() {
            *edge = (edge.1, edge.0, edge.2);
        }
    };
    reverse(&mut e2o_edges);
    let e2o_rev = Adjacency::build(n_objects, &e2o_edges);
    drop(e2o_edges);
    reverse(&mut o2o_edges);
    let o2o_rev = Adjacency::build(n_objects, &o2o_edges);

    Ok(IndexedLog {
        interner,
        event_type,
        object_type,
        times,
        per_event_type,
        per_object_type,
        e2o,
        e2o_rev,
        o2o,
        o2o_rev,
    })
}

fn resolve_refs(
    interner: &mut LogInterner,
    from: &str,
    src: u32,
    refs: &[Relationship],
    out: &mut Vec<(u32, u32, u32)>,
) -> Result<(), IndexError> {
    for r in refs {
        let dst = interner
            .objects
            .get(&r.object_id)
            .ok_or_else(|| IndexError::DanglingRef {
                from: from.into(),
                to: r.object_id.clone(),
            })?;
        let qual = interner.qualifiers.intern(&r.qualifier);
        out.push((src, dst, qual));
    }
    Ok(())
}

impl IndexedLog {
    pub fn interner(&self) -> &LogInterner {
        &self.interner
    }

    pub fn event_count(&self) -> usize {
        self.event_type.len()
    }

    pub fn object_count(&self) -> usize {
        self.object_type.len()
    }

    #[inline]
    pub fn event_type(&self, event: u32) -> u32 {
        self.event_type[event as usize]
    }

    #[inline]
    pub fn object_type(&self, object: u32) -> u32 {
        self.object_type[object as usize]
    }

    #[inline]
    pub fn time(&self, event: u32) -> Timestamp {
        self.times[event as usize]
    }

    /// Events of one type, ascending by time.
    pub fn events_of_type(&self, ty: u32) -> &[u32] {
        self.per_event_type.get(ty as usize).map_or(&[], |v| v)
    }

    pub fn objects_of_type(&self, ty: u32) -> &[u32] {
        self.per_object_type.get(ty as usize).map_or(&[], |v| v)
    }

    pub fn event_id(&self, event: u32) -> &str {
        self.interner.events.resolve(event).unwrap_or("")
    }

    pub fn object_id(&self, object: u32) -> &str {
        self.interner.objects.resolve(object).unwrap_or("")
    }

    pub fn qualifier_filter(&self, q: &Qualifier) -> QualFilter {
        match q {
            Qualifier::Wildcard => QualFilter::Any,
            Qualifier::Named(name) => self
                .interner
                .qualifiers
                .get(name)
                .map_or(QualFilter::Absent, QualFilter::Code),
        }
    }

    fn adjacency(&self, relation: Relation) -> &Adjacency {
        match relation {
            Relation::E2O => &self.e2o,
            Relation::E2ORev => &self.e2o_rev,
            Relation::O2O => &self.o2o,
            Relation::O2ORev => &self.o2o_rev,
        }
    }

    /// Raw packed adjacency words of `from`; see [`unpack`].
    #[inline]
    pub(crate) fn neighbors_raw(&self, from: u32, relation: Relation) -> &[u64] {
        self.adjacency(relation).of(from)
    }

    /// Calls `f` once per distinct neighbor of `from` reachable under `qual`.
    #[inline]
    pub fn for_each_related(
        &self,
        from: u32,
        relation: Relation,
        qual: QualFilter,
        mut f: impl FnMut(u32),
    ) {
        let mut last = None;
        for &word in self.neighbors_raw(from, relation) {
            let (n, q) = unpack(word);
            if qual.accepts(q) && last != Some(n) {
                last = Some(n);
                f(n);
            }
        }
    }

    /// Distinct neighbors of `from`, ascending by code.
    pub fn related(
        &self,
        from: u32,
        relation: Relation,
        qual: QualFilter,
    ) -> Result<Vec<u32>, IndexError> {
        if from as usize >= self.adjacency(relation).sources() {
            return Err(IndexError::UnknownRef(from));
        }
        let mut out = Vec::new();
        self.for_each_related(from, relation, qual, |n| out.push(n));
        Ok(out)
    }

    /// Whether `to` is reachable from `from` under `qual`.
    #[inline]
    pub fn is_related(&self, from: u32, relation: Relation, qual: QualFilter, to: u32) -> bool {
        let list = self.neighbors_raw(from, relation);
        let start = list.partition_point(|&w| (w >> 32) < u64::from(to));
        list[start..]
            .iter()
            .take_while(|&&w| (w >> 32) as u32 == to)
            .any(|&w| qual.accepts(w as u32))
    }

    /// Number of adjacency entries of `from` (with duplicates).
    pub fn degree(&self, from: u32, relation: Relation) -> usize {
        self.neighbors_raw(from, relation).len()
    }

    /// Total entries across all sources of a relation.
    pub fn relation_size(&self, relation: Relation) -> usize {
        self.adjacency(relation).entries.len()
    }
}
