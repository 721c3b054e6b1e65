//! Admission of vehicles to resource selection.

use crate::grid::Slot;

/// A vehicle waiting to select, and the slot its selection was triggered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Trigger {
    pub since: Slot,
    pub vehicle: usize,
}

/// Admits at most `n_max` triggers, oldest first, ties broken by vehicle id.
/// Returns `(admitted, deferred)`, both in admission order.
pub fn schedule_selectors(pending: &[Trigger], n_max: usize) -> (Vec<Trigger>, Vec<Trigger>) {
    let mut sorted = pending.to_vec();
    sorted.sort_unstable();
    let deferred = sorted.split_off(n_max.min(sorted.len()));
    (sorted, deferred)
}
