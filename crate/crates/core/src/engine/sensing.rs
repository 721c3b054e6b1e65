//! Per-vehicle memory of what was sensed over the last sensing window.

use std::collections::VecDeque;
use std::ops::Range;

use crate::grid::Slot;
use crate::ra_standard::{Announcement, Observations};
use crate::radio::{beam_gain, mw_to_dbm, RadioConfig};

/// A decoded reservation announcement, kept with enough geometry to
/// evaluate its RSRP on any receive beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct HeardAnnouncement {
    pub slot: Slot,
    pub subchannel: usize,
    pub rri: u64,
    /// Bit `b` set when the announcement decoded on beam `b`.
    pub beams: u32,
    /// Received power before the receive gain, dBm.
    pub pre_rx_dbm: f64,
    /// Direction of arrival, radians.
    pub bearing: f64,
}

/// Ring buffer of per-cell received power over the sensing window.
///
/// With `merged = true` a single channel holds the maximum over beams, which
/// is what a direction-agnostic sensor reports; otherwise there is one
/// channel per beam.
#[derive(Debug, Clone)]
pub(crate) struct SensingRing {
    window: u64,
    subchannels: usize,
    channels: usize,
    merged: bool,
    power_mw: Vec<f64>,
    heard: VecDeque<HeardAnnouncement>,
}

impl SensingRing {
    pub fn new(window: u64, subchannels: usize, depth: usize, merged: bool) -> Self {
        let channels = if merged { 1 } else { depth };
        Self {
            window,
            subchannels,
            channels,
            merged,
            power_mw: vec![0.0; window as usize * subchannels * channels],
            heard: VecDeque::new(),
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Stores one slot. `per_beam[f * depth + b]` is the power on beam `b`;
    /// `None` marks a slot the vehicle could not observe (it was
    /// transmitting), which reads back as silence.
    pub fn record(&mut self, slot: Slot, per_beam: Option<&[f64]>, depth: usize) {
        let base = (slot % self.window) as usize * self.subchannels * self.channels;
        let row = &mut self.power_mw[base..base + self.subchannels * self.channels];
        match per_beam {
            None => row.fill(0.0),
            Some(p) if self.merged => {
                for f in 0..self.subchannels {
                    row[f] = p[f * depth..(f + 1) * depth]
                        .iter()
                        .copied()
                        .fold(0.0, f64::max);
                }
            }
            Some(p) => row.copy_from_slice(&p[..self.subchannels * depth]),
        }
        let oldest = (slot + 1).saturating_sub(self.window);
        while self.heard.front().is_some_and(|h| h.slot < oldest) {
            self.heard.pop_front();
        }
    }

    pub fn hear(&mut self, a: HeardAnnouncement) {
        self.heard.push_back(a);
    }

    pub fn view<'a>(
        &'a self,
        channel: usize,
        angles: &'a [f64],
        radio: &'a RadioConfig,
    ) -> ChannelView<'a> {
        ChannelView {
            ring: self,
            channel,
            angles,
            radio,
        }
    }
}

/// One channel of a [`SensingRing`] seen through the [`Observations`] trait.
pub(crate) struct ChannelView<'a> {
    ring: &'a SensingRing,
    channel: usize,
    angles: &'a [f64],
    radio: &'a RadioConfig,
}

impl ChannelView<'_> {
    fn announcement_rsrp(&self, h: &HeardAnnouncement) -> Option<f64> {
        let on_beam = |b: usize| h.pre_rx_dbm + beam_gain(self.angles[b], h.bearing, self.radio);
        if self.ring.merged {
            (0..self.angles.len())
                .filter(|&b| h.beams & (1 << b) != 0)
                .map(on_beam)
                .reduce(f64::max)
        } else {
            (h.beams & (1 << self.channel) != 0).then(|| on_beam(self.channel))
        }
    }
}

impl Observations for ChannelView<'_> {
    fn rsrp_dbm(&self, slot: Slot, subchannel: usize) -> f64 {
        let r = self.ring;
        let i =
            ((slot % r.window) as usize * r.subchannels + subchannel) * r.channels + self.channel;
        mw_to_dbm(r.power_mw[i])
    }

    fn announcements(&self, window: Range<Slot>) -> Vec<Announcement> {
        self.ring
            .heard
            .iter()
            .filter(|h| window.contains(&h.slot))
            .filter_map(|h| {
                self.announcement_rsrp(h).map(|rsrp_dbm| Announcement {
                    slot: h.slot,
                    subchannel: h.subchannel,
                    rri: h.rri,
                    rsrp_dbm,
                })
            })
            .collect()
    }
}
