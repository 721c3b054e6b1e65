//! Per-beam sensing and the cooperative request/response selection, where the
//! receiving vehicle picks the resources from the bitmap of the beam it
//! receives on.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::grid::{GridConfig, ResourceIndex, SensingBitmap, Slot};
use crate::ra_standard::{
    self, BusySlots, Grant, Observations, SelectionOutcome, SenseOutcome, SpsConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoopConfig {
    /// When false the transmitter selects alone on its own transmit-beam
    /// bitmap and no signaling is exchanged.
    pub enabled: bool,
    /// Request attempts (first try included) before falling back to the
    /// standard procedure.
    pub max_attempts: u32,
}

impl Default for CoopConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            max_attempts: 3,
        }
    }
}

impl CoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_attempts < 1 {
            return Err(SimError::config("coop.max_attempts", "must be >= 1"));
        }
        Ok(())
    }
}

/// One sensing outcome per codebook beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamBitmapSet {
    pub owner: usize,
    per_beam: Vec<SenseOutcome>,
}

impl BeamBitmapSet {
    pub fn new(owner: usize, per_beam: Vec<SenseOutcome>) -> Self {
        Self { owner, per_beam }
    }

    pub fn depth(&self) -> usize {
        self.per_beam.len()
    }

    pub fn outcome(&self, beam: usize) -> &SenseOutcome {
        &self.per_beam[beam]
    }

    pub fn bitmap(&self, beam: usize) -> &SensingBitmap {
        &self.per_beam[beam].bitmap
    }

    /// A cell is available only if it is available on every beam.
    pub fn merged(&self) -> SensingBitmap {
        let first = &self.per_beam[0].bitmap;
        let mut out = SensingBitmap::new(first.origin(), first.slots(), first.subchannels(), None);
        for o in &self.per_beam {
            out.intersect(&o.bitmap);
        }
        out
    }
}

/// Beam tag carried by bitmaps and resources; a single-beam codebook is the
/// two-dimensional pool.
pub fn beam_tag(beam: usize, depth: usize) -> Option<usize> {
    (depth > 1).then_some(beam)
}

/// Runs the standard sensing pipeline independently on every beam.
pub fn sense_3d<O: Observations>(
    owner: usize,
    per_beam: &[O],
    now: Slot,
    sps: &SpsConfig,
    grid: &GridConfig,
) -> Result<BeamBitmapSet> {
    if per_beam.is_empty() {
        return Err(SimError::Domain("empty codebook".into()));
    }
    let depth = per_beam.len();
    let outcomes = per_beam
        .iter()
        .enumerate()
        .map(|(b, obs)| ra_standard::sense(obs, now, beam_tag(b, depth), sps, grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(BeamBitmapSet::new(owner, outcomes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaRequest {
    pub tx: usize,
    pub rx: usize,
    pub tb_count: usize,
    pub issue_slot: Slot,
    pub carrying: ResourceIndex,
    pub attempt: u32,
    /// Slots and phases in which the transmitter cannot receive or is
    /// already committed.
    pub tx_busy: BusySlots,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaResponse {
    pub tx: usize,
    pub rx: usize,
    /// `None` is a negative response.
    pub granted: Option<SelectionOutcome>,
    /// Receive beam the grant was chosen on.
    pub responder_beam: usize,
    pub carrying: ResourceIndex,
}

/// Places the request on one resource picked by the standard selection over
/// the transmitter's merged bitmap.
#[allow(clippy::too_many_arguments)]
pub fn issue_request<R: Rng + ?Sized>(
    tx: usize,
    rx: usize,
    tb_count: usize,
    merged: &SensingBitmap,
    window: Range<Slot>,
    tx_busy: BusySlots,
    attempt: u32,
    sps: &SpsConfig,
    grid: &GridConfig,
    rng: &mut R,
) -> Result<RaRequest> {
    let issue_slot = window.start;
    let out = ra_standard::select(merged, window, tx, &tx_busy, 0, sps, grid, rng)?;
    Ok(RaRequest {
        tx,
        rx,
        tb_count,
        issue_slot,
        carrying: out.chosen,
        attempt,
        tx_busy,
    })
}

/// Receiver side: picks the response resource from its merged bitmap and the
/// granted resources from the bitmap of its receive beam `rx_beam`.
///
/// Fails with [`SimError::NoCandidates`] when no resource is left for the
/// response itself; an empty receive-beam bitmap yields a negative response.
#[allow(clippy::too_many_arguments)]
pub fn respond<R: Rng + ?Sized>(
    request: &RaRequest,
    bitmaps: &BeamBitmapSet,
    rx_beam: usize,
    window: Range<Slot>,
    rx_busy: &BusySlots,
    sps: &SpsConfig,
    grid: &GridConfig,
    rng: &mut R,
) -> Result<RaResponse> {
    let mut busy = rx_busy.clone();
    busy.extend(&request.tx_busy);
    let merged = bitmaps.merged();
    let carrying = ra_standard::select(
        &merged,
        window.clone(),
        request.rx,
        &busy,
        0,
        sps,
        grid,
        rng,
    )?
    .chosen;
    let mut busy = busy;
    busy.add_slot(carrying.slot);
    let granted = match ra_standard::select(
        bitmaps.bitmap(rx_beam),
        window,
        request.tx,
        &busy,
        sps.blind_retransmissions,
        sps,
        grid,
        rng,
    ) {
        Ok(o) => Some(o),
        Err(SimError::NoCandidates) => None,
        Err(e) => return Err(e),
    };
    Ok(RaResponse {
        tx: request.tx,
        rx: request.rx,
        granted,
        responder_beam: rx_beam,
        carrying,
    })
}

/// The transmitter adopts the granted configuration verbatim.
pub fn apply_response(response: &RaResponse) -> Option<Grant> {
    response.granted.as_ref().map(|o| o.grant.clone())
}

/// What the transmitter does when a response does not arrive in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetryDecision {
    Retry { attempt: u32 },
    Fallback,
}

pub fn on_timeout(attempt: u32, cfg: &CoopConfig) -> RetryDecision {
    if attempt < cfg.max_attempts {
        RetryDecision::Retry {
            attempt: attempt + 1,
        }
    } else {
        RetryDecision::Fallback
    }
}
