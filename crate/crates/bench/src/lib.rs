//! Fixtures shared by the benchmarks.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sidelink_core::ra_standard::{Announcement, Observations};
use sidelink_core::{GridConfig, Slot};

/// A sensing window with random per-cell power and announcements.
pub struct RandomField {
    origin: Slot,
    subchannels: usize,
    rsrp: Vec<f64>,
    announcements: Vec<Announcement>,
}

impl RandomField {
    /// About `busy` of the cells carry power between -100 and -40 dBm.
    pub fn new(grid: &GridConfig, now: Slot, busy: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let origin = now - grid.sensing_window;
        let cells = grid.sensing_window as usize * grid.subchannels;
        let rsrp = (0..cells)
            .map(|_| {
                if rng.random_bool(busy) {
                    rng.random_range(-100.0..-40.0)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let announcements = (0..200)
            .map(|_| Announcement {
                slot: origin + rng.random_range(0..grid.sensing_window),
                subchannel: rng.random_range(0..grid.subchannels),
                rri: 16,
                rsrp_dbm: rng.random_range(-90.0..-40.0),
            })
            .collect();
        Self {
            origin,
            subchannels: grid.subchannels,
            rsrp,
            announcements,
        }
    }
}

impl Observations for RandomField {
    fn rsrp_dbm(&self, slot: Slot, subchannel: usize) -> f64 {
        self.rsrp[(slot - self.origin) as usize * self.subchannels + subchannel]
    }

    fn announcements(&self, window: Range<Slot>) -> Vec<Announcement> {
        self.announcements
            .iter()
            .filter(|a| window.contains(&a.slot))
            .copied()
            .collect()
    }
}
