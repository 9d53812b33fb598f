//! Variable bindings packed into 64-bit words.
//!
//! Each entry stores `(variable, kind, entity)` as
//! `variable << 33 | kind << 32 | entity`, so sorting the words sorts entries
//! by variable code. A binding is a sorted, duplicate-free list of entries.

use alloc::vec::Vec;
use core::fmt;

/// Code of a variable name within one query tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

/// An event or object code of an [`crate::IndexedLog`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityRef {
    Event(u32),
    Object(u32),
}

impl EntityRef {
    pub fn code(self) -> u32 {
        match self {
            EntityRef::Event(c) | EntityRef::Object(c) => c,
        }
    }

    pub fn is_event(self) -> bool {
        matches!(self, EntityRef::Event(_))
    }
}

const KIND_BIT: u64 = 1 << 32;

#[inline]
pub(crate) fn pack_entry(var: VarId, entity: EntityRef) -> u64 {
    debug_assert!(var.0 < (1 << 31));
    let (kind, code) = match entity {
        EntityRef::Event(c) => (0, c),
        EntityRef::Object(c) => (KIND_BIT, c),
    };
    (u64::from(var.0) << 33) | kind | u64::from(code)
}

#[inline]
fn unpack_entry(word: u64) -> (VarId, EntityRef) {
    let var = VarId((word >> 33) as u32);
    let code = word as u32;
    let entity = if word & KIND_BIT == 0 {
        EntityRef::Event(code)
    } else {
        EntityRef::Object(code)
    };
    (var, entity)
}

/// Partial assignment of variables to events and objects.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Binding(Vec<u64>);

impl Binding {
    pub fn empty() -> Self {
        Binding(Vec::new())
    }

    /// Builds a binding from arbitrary-order entries. Later entries for the
    /// same variable replace earlier ones.
    pub fn from_entries(entries: impl IntoIterator<Item = (VarId, EntityRef)>) -> Self {
        let mut b = Binding::empty();
        for (v, e) in entries {
            b.insert(v, e);
        }
        b
    }

    /// Takes words that are already sorted by variable and duplicate-free.
    pub(crate) fn from_sorted_words(words: Vec<u64>) -> Self {
        debug_assert!(words.windows(2).all(|w| (w[0] >> 33) < (w[1] >> 33)));
        Binding(words)
    }

    pub fn insert(&mut self, var: VarId, entity: EntityRef) {
        let word = pack_entry(var, entity);
        match self.0.binary_search_by_key(&var.0, |w| (w >> 33) as u32) {
            Ok(i) => self.0[i] = word,
            Err(i) => self.0.insert(i, word),
        }
    }

    pub fn get(&self, var: VarId) -> Option<EntityRef> {
        self.0
            .binary_search_by_key(&var.0, |w| (w >> 33) as u32)
            .ok()
            .map(|i| unpack_entry(self.0[i]).1)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, EntityRef)> + '_ {
        self.0.iter().map(|&w| unpack_entry(w))
    }

    pub fn words(&self) -> &[u64] {
        &self.0
    }

    /// Keeps only the entries whose variable satisfies `keep`.
    pub fn restrict(&self, mut keep: impl FnMut(VarId) -> bool) -> Binding {
        Binding(
            self.0
                .iter()
                .copied()
                .filter(|&w| keep(VarId((w >> 33) as u32)))
                .collect(),
        )
    }
}

impl fmt::Debug for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.iter().map(|(v, e)| (v.0, e)))
            .finish()
    }
}

/// `parent ⊑ child`: every entry of `parent` occurs identically in `child`.
pub fn is_child(parent: &Binding, child: &Binding) -> bool {
    let mut rest = child.0.iter();
    'outer: for &p in &parent.0 {
        for &c in rest.by_ref() {
            if c == p {
                continue 'outer;
            }
            if c > p {
                return false;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ob(v: u32, o: u32) -> (VarId, EntityRef) {
        (VarId(v), EntityRef::Object(o))
    }
    fn ev(v: u32, e: u32) -> (VarId, EntityRef) {
        (VarId(v), EntityRef::Event(e))
    }

    // variables: o1=0, o2=1, o3=2, e1=3, e2=4
    #[test]
    fn child_relation_examples() {
        let b2 = Binding::from_entries([ob(0, 1)]);
        let b3 = Binding::from_entries([ob(1, 1)]);
        let b4 = Binding::from_entries([ev(3, 1), ev(4, 3), ob(0, 1), ob(2, 3)]);
        assert!(is_child(&b2, &b4));
        assert!(!is_child(&b3, &b4));
        assert!(is_child(&Binding::empty(), &b4));
        assert!(is_child(&Binding::empty(), &Binding::empty()));
        assert!(!is_child(&b4, &b2));
    }

    #[test]
    fn kind_is_part_of_the_entry() {
        let a = Binding::from_entries([ev(0, 5)]);
        let b = Binding::from_entries([ob(0, 5)]);
        assert!(!is_child(&a, &b));
        assert_eq!(b.get(VarId(0)), Some(EntityRef::Object(5)));
        assert_eq!(a.get(VarId(1)), None);
    }

    #[test]
    fn insert_keeps_sorted_order() {
        let b = Binding::from_entries([ob(7, 1), ev(2, 0), ob(4, 9), ob(7, 2)]);
        let vars: Vec<u32> = b.iter().map(|(v, _)| v.0).collect();
        assert_eq!(vars, [2, 4, 7]);
        assert_eq!(b.get(VarId(7)), Some(EntityRef::Object(2)));
        let r = b.restrict(|v| v.0 != 4);
        assert!(is_child(&r, &b));
        assert_eq!(r.len(), 2);
    }

    fn arb_binding() -> impl Strategy<Value = Binding> {
        proptest::collection::btree_map(0u32..6, (any::<bool>(), 0u32..3), 0..6).prop_map(|m| {
            Binding::from_entries(m.into_iter().map(|(v, (is_ev, c))| {
                (
                    VarId(v),
                    if is_ev {
                        EntityRef::Event(c)
                    } else {
                        EntityRef::Object(c)
                    },
                )
            }))
        })
    }

    fn naive_is_child(p: &Binding, c: &Binding) -> bool {
        p.iter().all(|(v, e)| c.get(v) == Some(e))
    }

    proptest! {
        #[test]
        fn matches_pointwise_definition(p in arb_binding(), c in arb_binding()) {
            prop_assert_eq!(is_child(&p, &c), naive_is_child(&p, &c));
        }

        #[test]
        fn partial_order_laws(a in arb_binding(), b in arb_binding(), c in arb_binding()) {
            prop_assert!(is_child(&a, &a));
            if is_child(&a, &b) && is_child(&b, &a) {
                prop_assert_eq!(&a, &b);
            }
            if is_child(&a, &b) && is_child(&b, &c) {
                prop_assert!(is_child(&a, &c));
            }
            // restrictions are always parents
            let r = b.restrict(|v| v.0 % 2 == 0);
            prop_assert!(is_child(&r, &b));
            prop_assert!(is_child(&Binding::empty(), &a));
        }
    }
}
