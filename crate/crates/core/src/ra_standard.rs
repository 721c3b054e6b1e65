//! Standard semi-persistent sensing and selection, and the grant counter
//! state machine.

use std::collections::BTreeSet;
use std::ops::{Range, RangeInclusive};

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::grid::{window_view, GridConfig, ResourceIndex, SensingBitmap, Slot, WindowKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpsConfig {
    /// Resource reservation interval, milliseconds.
    pub rri_ms: f64,
    /// Initial RSRP threshold, dBm.
    pub gamma_th_initial: f64,
    /// Lowest threshold the backoff loop may reach, dBm.
    pub gamma_th_floor: f64,
    /// Minimum candidate percentage before the threshold is lowered.
    pub occupancy_threshold: f64,
    /// Probability of keeping the resources when the counter expires.
    pub keep_probability: f64,
    /// Candidates sampled per selection (M).
    pub max_candidates: usize,
    /// Vehicles admitted to selection per slot (N_max).
    pub n_max: usize,
    pub blind_retransmissions: usize,
    /// Counter assumed for overheard reservations; `None` uses the midpoint
    /// of the counter law for the announced interval.
    pub rc_estimate: Option<u32>,
    /// How long a TB may wait for a grant before it is dropped, slots;
    /// `None` means one reservation interval. The default of 100 slots
    /// (12.5 ms) leaves room for one request/response exchange.
    pub selection_deadline: Option<u64>,
}

impl Default for SpsConfig {
    fn default() -> Self {
        Self {
            rri_ms: 2.0,
            gamma_th_initial: -60.0,
            gamma_th_floor: -110.0,
            occupancy_threshold: 20.0,
            keep_probability: 0.0,
            max_candidates: 32,
            n_max: 10,
            blind_retransmissions: 3,
            rc_estimate: None,
            selection_deadline: Some(100),
        }
    }
}

impl SpsConfig {
    pub fn validate(&self, grid: &GridConfig) -> Result<()> {
        if !(self.rri_ms > 0.0 && self.rri_ms.is_finite()) {
            return Err(SimError::config("sps.rri_ms", "must be > 0"));
        }
        if grid.ms_to_slots(self.rri_ms) > grid.sensing_window {
            return Err(SimError::config(
                "sps.rri_ms",
                "longer than the sensing window",
            ));
        }
        if !self.gamma_th_initial.is_finite() || !self.gamma_th_floor.is_finite() {
            return Err(SimError::config("sps.gamma_th_initial", "must be finite"));
        }
        if self.gamma_th_floor > self.gamma_th_initial {
            return Err(SimError::config(
                "sps.gamma_th_floor",
                "must be <= sps.gamma_th_initial",
            ));
        }
        if !(0.0..=100.0).contains(&self.occupancy_threshold) {
            return Err(SimError::config(
                "sps.occupancy_threshold",
                "must be in [0, 100]",
            ));
        }
        if !(0.0..=0.8).contains(&self.keep_probability) {
            return Err(SimError::config(
                "sps.keep_probability",
                "must be in [0, 0.8]",
            ));
        }
        if !(1..=32).contains(&self.max_candidates) {
            return Err(SimError::config("sps.max_candidates", "must be in [1, 32]"));
        }
        if self.n_max < 1 {
            return Err(SimError::config("sps.n_max", "must be >= 1"));
        }
        if self.blind_retransmissions > 3 {
            return Err(SimError::config(
                "sps.blind_retransmissions",
                "must be in [0, 3]",
            ));
        }
        if self.rc_estimate == Some(0) {
            return Err(SimError::config("sps.rc_estimate", "must be >= 1"));
        }
        Ok(())
    }

    pub fn rri_slots(&self, grid: &GridConfig) -> u64 {
        grid.ms_to_slots(self.rri_ms)
    }

    /// Counter assumed for an overheard reservation with interval `rri_ms`.
    pub fn estimated_rc(&self, rri_ms: f64) -> u32 {
        self.rc_estimate.unwrap_or_else(|| {
            rc_bounds(rri_ms)
                .map(|b| (b.start() + b.end()).div_ceil(2))
                .unwrap_or(1)
        })
    }
}

/// Support of the re-selection counter for a reservation interval.
pub fn rc_bounds(rri_ms: f64) -> Result<RangeInclusive<u32>> {
    if !(rri_ms > 0.0) {
        return Err(SimError::Domain(format!("rri must be > 0, got {rri_ms}")));
    }
    if rri_ms >= 100.0 {
        return Ok(5..=15);
    }
    let c = 100.0 / rri_ms.max(20.0);
    Ok((5.0 * c).round() as u32..=(15.0 * c).round() as u32)
}

pub fn draw_rc<R: Rng + ?Sized>(rri_ms: f64, rng: &mut R) -> Result<u32> {
    Ok(rng.random_range(rc_bounds(rri_ms)?))
}

/// A decoded control message seen during sensing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Announcement {
    pub slot: Slot,
    pub subchannel: usize,
    /// Announced reservation interval in slots; 0 for one-shot messages.
    pub rri: u64,
    pub rsrp_dbm: f64,
}

/// What a vehicle measured over its sensing window, on one receive channel.
pub trait Observations {
    /// Received power in `(slot, subchannel)`; `-inf` when silent or not
    /// observed.
    fn rsrp_dbm(&self, slot: Slot, subchannel: usize) -> f64;

    /// Decoded control messages whose slot lies in `window`.
    fn announcements(&self, window: Range<Slot>) -> Vec<Announcement>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SenseOutcome {
    pub bitmap: SensingBitmap,
    /// Threshold the bitmap was built with, dBm.
    pub gamma_th: f64,
    /// Number of 3 dB reductions applied.
    pub threshold_steps: u32,
    /// Candidate percentage of the returned bitmap.
    pub ratio: f64,
    /// The floor was reached without exceeding the occupancy threshold; the
    /// bitmap is the best-effort one from the initial threshold.
    pub congested: bool,
}

/// Builds the availability bitmap for the window ending at `now`, lowering
/// the threshold in 3 dB steps while the candidate percentage stays at or
/// below the occupancy threshold, then excludes the predicted reservations of
/// decoded announcements.
pub fn sense<O: Observations + ?Sized>(
    obs: &O,
    now: Slot,
    beam: Option<usize>,
    sps: &SpsConfig,
    grid: &GridConfig,
) -> Result<SenseOutcome> {
    let window = window_view(grid, now, WindowKind::Sensing)?;
    let subchannels = grid.subchannels;
    let rsrp: Vec<f64> = window
        .clone()
        .flat_map(|s| (0..subchannels).map(move |f| (s, f)))
        .map(|(s, f)| obs.rsrp_dbm(s, f))
        .collect();

    let build = |gamma: f64| {
        let mut b = SensingBitmap::new(
            window.start,
            grid.sensing_window as usize,
            subchannels,
            beam,
        );
        for (i, &p) in rsrp.iter().enumerate() {
            if p > gamma {
                let idx =
                    ResourceIndex::new(window.start + (i / subchannels) as Slot, i % subchannels);
                b.set(&idx, false).expect("cell inside window");
            }
        }
        b
    };

    let mut gamma = sps.gamma_th_initial;
    let mut steps = 0;
    let mut first: Option<(SensingBitmap, f64)> = None;
    loop {
        let bitmap = build(gamma);
        let ratio = bitmap.candidate_ratio()?;
        if ratio > sps.occupancy_threshold {
            let mut bitmap = bitmap;
            for a in obs.announcements(window.clone()) {
                if a.rsrp_dbm > gamma && a.rri > 0 {
                    let rri_ms = a.rri as f64 * grid.slot_duration * 1e3;
                    let anchor = ResourceIndex::new(a.slot, a.subchannel);
                    bitmap.exclude_predicted(&anchor, a.rri, sps.estimated_rc(rri_ms));
                }
            }
            let ratio = bitmap.candidate_ratio()?;
            return Ok(SenseOutcome {
                bitmap,
                gamma_th: gamma,
                threshold_steps: steps,
                ratio,
                congested: false,
            });
        }
        if first.is_none() {
            first = Some((bitmap, ratio));
        }
        if gamma - 3.0 < sps.gamma_th_floor {
            let (bitmap, ratio) = first.expect("set above");
            return Ok(SenseOutcome {
                bitmap,
                gamma_th: sps.gamma_th_initial,
                threshold_steps: steps,
                ratio,
                congested: true,
            });
        }
        gamma -= 3.0;
        steps += 1;
    }
}

/// Slots a selector must not use: absolute slots and periodic phases
/// (`slot mod rri`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BusySlots {
    rri: u64,
    slots: BTreeSet<Slot>,
    phases: BTreeSet<u64>,
}

impl BusySlots {
    pub fn new(rri: u64) -> Self {
        Self {
            rri: rri.max(1),
            ..Default::default()
        }
    }

    pub fn add_slot(&mut self, slot: Slot) {
        self.slots.insert(slot);
    }

    pub fn add_phase_of(&mut self, slot: Slot) {
        self.phases.insert(slot % self.rri);
    }

    pub fn extend(&mut self, other: &BusySlots) {
        self.slots.extend(other.slots.iter().copied());
        for p in &other.phases {
            self.phases.insert(p % self.rri);
        }
    }

    pub fn contains(&self, slot: Slot) -> bool {
        self.slots.contains(&slot) || self.phases.contains(&(slot % self.rri))
    }

    pub fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        self.slots.iter().copied()
    }
}

/// A semi-persistent reservation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grant {
    pub id: u64,
    pub owner: usize,
    /// First transmission resource, then retransmission resources.
    pub resources: Vec<ResourceIndex>,
    /// Reservation interval, slots.
    pub rri: u64,
    pub rc_remaining: u32,
    /// Slot the grant was selected in; it reserves nothing earlier.
    pub start: Slot,
}

impl Grant {
    /// Cells carrying a TB that becomes ready at `ready`: for every resource,
    /// the first slot of its phase at or after `max(ready, start)`.
    pub fn occasion(&self, ready: Slot) -> Vec<ResourceIndex> {
        let from = ready.max(self.start);
        self.resources
            .iter()
            .map(|r| {
                let phase = r.slot % self.rri;
                let base = from - from % self.rri + phase;
                let slot = if base >= from { base } else { base + self.rri };
                ResourceIndex { slot, ..*r }
            })
            .collect()
    }

    /// Whether `idx` is one of the periodic cells reserved by this grant.
    pub fn covers(&self, idx: &ResourceIndex) -> bool {
        idx.slot >= self.start
            && self.resources.iter().any(|r| {
                r.subchannel == idx.subchannel
                    && r.beam == idx.beam
                    && r.slot % self.rri == idx.slot % self.rri
            })
    }

    pub fn phases(&self) -> impl Iterator<Item = u64> + '_ {
        self.resources.iter().map(|r| r.slot % self.rri)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub chosen: ResourceIndex,
    pub retransmissions: Vec<ResourceIndex>,
    pub grant: Grant,
}

/// Cells of `window` that are available in `bitmap` (read at the same
/// reservation phase) and not in `busy`.
pub fn candidates(
    bitmap: &SensingBitmap,
    window: Range<Slot>,
    rri: u64,
    busy: &BusySlots,
) -> Vec<ResourceIndex> {
    let mut out = Vec::new();
    for slot in window {
        if busy.contains(slot) {
            continue;
        }
        for f in 0..bitmap.subchannels() {
            if bitmap.projected(slot, f, rri) == Some(true) {
                out.push(ResourceIndex::new(slot, f).with_beam(bitmap.beam()));
            }
        }
    }
    out
}

/// Picks the transmission resource and up to `retransmissions` further
/// resources, in pairwise distinct reservation phases, from `M` candidates
/// sampled uniformly among the available cells of `window`.
pub fn select<R: Rng + ?Sized>(
    bitmap: &SensingBitmap,
    window: Range<Slot>,
    owner: usize,
    busy: &BusySlots,
    retransmissions: usize,
    sps: &SpsConfig,
    grid: &GridConfig,
    rng: &mut R,
) -> Result<SelectionOutcome> {
    let rri = sps.rri_slots(grid);
    let start = window.start;
    let pool = candidates(bitmap, window, rri, busy);
    if pool.is_empty() {
        return Err(SimError::NoCandidates);
    }
    let m = sps.max_candidates.min(pool.len());
    // `sample` returns the indices fully shuffled.
    let picked: Vec<ResourceIndex> = index::sample(rng, pool.len(), m)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    let chosen = picked[0];
    let mut rest = picked[1..].to_vec();
    rest.shuffle(rng);
    let mut phases = vec![chosen.slot % rri];
    let mut retx = Vec::new();
    for r in rest {
        if retx.len() == retransmissions {
            break;
        }
        let ph = r.slot % rri;
        if !phases.contains(&ph) {
            phases.push(ph);
            retx.push(r);
        }
    }
    let rc = draw_rc(sps.rri_ms, rng)?;
    let mut resources = vec![chosen];
    resources.extend(retx.iter().copied());
    Ok(SelectionOutcome {
        chosen,
        retransmissions: retx,
        grant: Grant {
            id: 0,
            owner,
            resources,
            rri,
            rc_remaining: rc,
            start,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrantStep {
    Keep,
    Reselect,
}

/// Counts one completed TB transmission against the grant. When the counter
/// expires the resources are kept with probability `P` (and the counter is
/// redrawn), otherwise reselection is signalled.
pub fn step_grant<R: Rng + ?Sized>(
    grant: &mut Grant,
    sps: &SpsConfig,
    rng: &mut R,
) -> Result<GrantStep> {
    grant.rc_remaining = grant.rc_remaining.saturating_sub(1);
    if grant.rc_remaining > 0 {
        return Ok(GrantStep::Keep);
    }
    let u: f64 = rng.random();
    if u < 1.0 - sps.keep_probability {
        Ok(GrantStep::Reselect)
    } else {
        grant.rc_remaining = draw_rc(sps.rri_ms, rng)?;
        Ok(GrantStep::Keep)
    }
}
