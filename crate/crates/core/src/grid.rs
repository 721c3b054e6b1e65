//! Time–frequency(–beam) resource pool, window arithmetic and sensing bitmaps.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Absolute slot number.
pub type Slot = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub slots_per_subframe: u32,
    /// Seconds.
    pub slot_duration: f64,
    pub subchannels: usize,
    pub rbs_pscch_per_subchannel: u32,
    pub rbs_pssch_per_subchannel: u32,
    /// Slots.
    pub sensing_window: u64,
    /// Slots.
    pub selection_window: u64,
    /// Slots.
    pub cbr_interval: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            slots_per_subframe: 8,
            slot_duration: 0.125e-3,
            subchannels: 10,
            rbs_pscch_per_subchannel: 10,
            rbs_pssch_per_subchannel: 12,
            sensing_window: 796,
            selection_window: 40,
            cbr_interval: 50,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("grid.slots_per_subframe", self.slots_per_subframe as u64),
            ("grid.subchannels", self.subchannels as u64),
            (
                "grid.rbs_pscch_per_subchannel",
                self.rbs_pscch_per_subchannel as u64,
            ),
            (
                "grid.rbs_pssch_per_subchannel",
                self.rbs_pssch_per_subchannel as u64,
            ),
            ("grid.sensing_window", self.sensing_window),
            ("grid.selection_window", self.selection_window),
            ("grid.cbr_interval", self.cbr_interval),
        ];
        for (key, v) in counts {
            if v < 1 {
                return Err(SimError::config(key, "must be >= 1"));
            }
        }
        if !(self.slot_duration > 0.0 && self.slot_duration.is_finite()) {
            return Err(SimError::config("grid.slot_duration", "must be > 0"));
        }
        if self.sensing_window < self.selection_window {
            return Err(SimError::config(
                "grid.sensing_window",
                "must be >= grid.selection_window",
            ));
        }
        Ok(())
    }

    /// Whole slots spanned by `ms` milliseconds, at least one.
    pub fn ms_to_slots(&self, ms: f64) -> u64 {
        ((ms * 1e-3 / self.slot_duration).round() as u64).max(1)
    }
}

/// One `(slot, sub-channel[, beam])` cell of the resource pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResourceIndex {
    pub slot: Slot,
    pub subchannel: usize,
    /// Codebook beam; `None` in the two-dimensional pool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam: Option<usize>,
}

impl ResourceIndex {
    pub fn new(slot: Slot, subchannel: usize) -> Self {
        Self {
            slot,
            subchannel,
            beam: None,
        }
    }

    pub fn with_beam(self, beam: Option<usize>) -> Self {
        Self { beam, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Sensing,
    Selection,
}

/// Half-open slot range of a window anchored at `now`.
pub fn window_view(grid: &GridConfig, now: Slot, kind: WindowKind) -> Result<Range<Slot>> {
    match kind {
        WindowKind::Sensing => {
            if now < grid.sensing_window {
                return Err(SimError::InsufficientHistory {
                    needed: grid.sensing_window,
                    available: now,
                });
            }
            Ok(now - grid.sensing_window..now)
        }
        WindowKind::Selection => Ok(now..now + grid.selection_window),
    }
}

/// Availability matrix over `(slot offset, sub-channel)`: `true` = available.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensingBitmap {
    origin: Slot,
    slots: usize,
    subchannels: usize,
    entries: Vec<bool>,
    beam: Option<usize>,
}

impl SensingBitmap {
    /// All-available bitmap covering `[origin, origin + slots)`.
    pub fn new(origin: Slot, slots: usize, subchannels: usize, beam: Option<usize>) -> Self {
        Self {
            origin,
            slots,
            subchannels,
            entries: vec![true; slots * subchannels],
            beam,
        }
    }

    /// Bitmap sized for the sensing window that ends at `now`.
    pub fn for_window(grid: &GridConfig, now: Slot, beam: Option<usize>) -> Result<Self> {
        let range = window_view(grid, now, WindowKind::Sensing)?;
        Ok(Self::new(
            range.start,
            grid.sensing_window as usize,
            grid.subchannels,
            beam,
        ))
    }

    pub fn origin(&self) -> Slot {
        self.origin
    }

    /// One past the last slot covered.
    pub fn end(&self) -> Slot {
        self.origin + self.slots as Slot
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn subchannels(&self) -> usize {
        self.subchannels
    }

    pub fn beam(&self) -> Option<usize> {
        self.beam
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn offset(&self, slot: Slot, subchannel: usize) -> Option<usize> {
        if slot < self.origin || slot >= self.end() || subchannel >= self.subchannels {
            return None;
        }
        Some((slot - self.origin) as usize * self.subchannels + subchannel)
    }

    pub fn contains(&self, idx: &ResourceIndex) -> bool {
        self.offset(idx.slot, idx.subchannel).is_some()
    }

    pub fn get(&self, slot: Slot, subchannel: usize) -> Option<bool> {
        self.offset(slot, subchannel).map(|o| self.entries[o])
    }

    pub fn set(&mut self, idx: &ResourceIndex, available: bool) -> Result<()> {
        let o = self
            .offset(idx.slot, idx.subchannel)
            .ok_or_else(|| self.out_of_window(idx))?;
        self.entries[o] = available;
        Ok(())
    }

    /// Marks the cell available iff `rsrp_dbm <= gamma_th_dbm`.
    pub fn set_entry(
        &mut self,
        idx: &ResourceIndex,
        rsrp_dbm: f64,
        gamma_th_dbm: f64,
    ) -> Result<()> {
        self.set(idx, rsrp_dbm <= gamma_th_dbm)
    }

    /// Number of available cells (the l0-norm of the matrix).
    pub fn count_available(&self) -> usize {
        self.entries.iter().filter(|&&e| e).count()
    }

    /// Percentage of available cells, in `[0, 100]`.
    pub fn candidate_ratio(&self) -> Result<f64> {
        if self.entries.is_empty() {
            return Err(SimError::Domain("candidate ratio of empty bitmap".into()));
        }
        Ok(self.count_available() as f64 * 100.0 / self.entries.len() as f64)
    }

    /// Zeroes the predicted reservations `anchor.slot + k * rri`, `k < rc`, on
    /// the anchor sub-channel. Slots outside the window are dropped.
    pub fn exclude_predicted(&mut self, anchor: &ResourceIndex, rri: u64, rc: u32) {
        if rri == 0 {
            return;
        }
        for k in 0..rc as u64 {
            let slot = anchor.slot + k * rri;
            if slot >= self.end() {
                break;
            }
            if let Some(o) = self.offset(slot, anchor.subchannel) {
                self.entries[o] = false;
            }
        }
    }

    /// Cell-wise AND with another bitmap of the same shape.
    pub fn intersect(&mut self, other: &SensingBitmap) {
        debug_assert_eq!(self.entries.len(), other.entries.len());
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a &= *b;
        }
    }

    /// Availability of a future cell, read from the most recent sensed slot of
    /// the same reservation phase (`slot mod rri`).
    ///
    /// Returns `None` when `slot` precedes the window or `rri` exceeds its
    /// length.
    pub fn projected(&self, slot: Slot, subchannel: usize, rri: u64) -> Option<bool> {
        if rri == 0 || rri > self.slots as u64 || slot < self.origin {
            return None;
        }
        let echo = if slot < self.end() {
            slot
        } else {
            let behind = slot - self.end() + 1;
            slot - rri * behind.div_ceil(rri)
        };
        self.get(echo, subchannel)
    }

    fn out_of_window(&self, idx: &ResourceIndex) -> SimError {
        SimError::OutOfWindow(format!(
            "({}, {}) not in [{}, {}) x [0, {})",
            idx.slot,
            idx.subchannel,
            self.origin,
            self.end(),
            self.subchannels
        ))
    }
}
