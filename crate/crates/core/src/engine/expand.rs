//! Depth-first execution of a binding plan.

use alloc::vec;
use alloc::vec::Vec;

use super::plan::BindingStep;
use crate::binding::{pack_entry, Binding, EntityRef, VarId};
use crate::index::{unpack, IndexedLog};
use crate::query::VarKind;

pub(crate) const UNBOUND: u32 = u32::MAX;

/// Runs `steps` on `slots` and calls `emit` for every complete assignment.
/// `emit` returns `false` to stop the enumeration.
pub(crate) fn run_steps(
    steps: &[BindingStep],
    slots: &mut [u32],
    idx: &IndexedLog,
    emit: &mut dyn FnMut(&[u32]) -> bool,
) -> bool {
    let Some((step, rest)) = steps.split_first() else {
        return emit(slots);
    };
    match step {
        BindingStep::Filter(p) => {
            if p.holds(slots, idx) {
                run_steps(rest, slots, idx, emit)
            } else {
                true
            }
        }
        BindingStep::BindFromType { var, kind, types } => {
            let slot = var.0 as usize;
            for &t in types {
                let bucket = match kind {
                    VarKind::Event => idx.events_of_type(t),
                    VarKind::Object => idx.objects_of_type(t),
                };
                for &entity in bucket {
                    slots[slot] = entity;
                    if !run_steps(rest, slots, idx, emit) {
                        slots[slot] = UNBOUND;
                        return false;
                    }
                }
            }
            slots[slot] = UNBOUND;
            true
        }
        BindingStep::BindFromRelation {
            var,
            relation,
            qualifier,
            source,
            types,
        } => {
            let slot = var.0 as usize;
            let from = slots[source.0 as usize];
            let to_events = relation.targets_events();
            let mut last = UNBOUND;
            for &word in idx.neighbors_raw(from, *relation) {
                let (n, q) = unpack(word);
                if n == last || !qualifier.accepts(q) {
                    continue;
                }
                last = n;
                let ty = if to_events {
                    idx.event_type(n)
                } else {
                    idx.object_type(n)
                };
                if !types.contains(&ty) {
                    continue;
                }
                slots[slot] = n;
                if !run_steps(rest, slots, idx, emit) {
                    slots[slot] = UNBOUND;
                    return false;
                }
            }
            slots[slot] = UNBOUND;
            true
        }
    }
}

/// Every child binding of `parent` produced by `steps`.
///
/// `var_kinds[v]` gives the kind of variable `v`; it must cover every variable
/// of `parent` and of `steps`.
pub fn expand(
    parent: &Binding,
    steps: &[BindingStep],
    var_kinds: &[VarKind],
    idx: &IndexedLog,
) -> Vec<Binding> {
    let mut slots = vec![UNBOUND; var_kinds.len()];
    for (v, e) in parent.iter() {
        slots[v.0 as usize] = e.code();
    }
    let mut out = Vec::new();
    run_steps(steps, &mut slots, idx, &mut |slots| {
        out.push(slots_to_binding(slots, var_kinds));
        true
    });
    out.sort_unstable();
    out
}

pub(crate) fn slots_to_binding(slots: &[u32], var_kinds: &[VarKind]) -> Binding {
    let words = slots
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != UNBOUND)
        .map(|(v, &c)| {
            let entity = match var_kinds[v] {
                VarKind::Event => EntityRef::Event(c),
                VarKind::Object => EntityRef::Object(c),
            };
            pack_entry(VarId(v as u32), entity)
        })
        .collect();
    Binding::from_sorted_words(words)
}
