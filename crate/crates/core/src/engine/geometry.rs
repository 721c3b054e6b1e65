//! Pairwise link budget cache, refreshed whenever vehicles move.

use crate::radio::{beam_gain, dbm_to_mw, pathloss, Codebook, LinkGeometry, RadioConfig};

/// Per ordered pair `(i, j)`: path gain, bearing from `i` to `j`, the beam of
/// `i` closest to that bearing and the linear gain of every beam of `i`
/// towards `j`.
#[derive(Debug, Clone)]
pub struct Geometry {
    n: usize,
    depth: usize,
    tx_power_mw: f64,
    path_gain: Vec<f64>,
    bearing: Vec<f64>,
    distance: Vec<f64>,
    best_beam: Vec<usize>,
    gain: Vec<f64>,
}

impl Geometry {
    /// `shadowing_db`, when given, is a symmetric `n * n` matrix added to the
    /// path loss.
    pub fn compute(
        positions: &[(f64, f64)],
        codebook: &Codebook,
        radio: &RadioConfig,
        shadowing_db: Option<&[f64]>,
    ) -> Self {
        let n = positions.len();
        let depth = codebook.depth();
        let mut g = Geometry {
            n,
            depth,
            tx_power_mw: dbm_to_mw(radio.tx_power),
            path_gain: vec![0.0; n * n],
            bearing: vec![0.0; n * n],
            distance: vec![0.0; n * n],
            best_beam: vec![0; n * n],
            gain: vec![0.0; n * n * depth],
        };
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let k = i * n + j;
                let link = LinkGeometry::between(positions[i], positions[j]);
                let shadow = shadowing_db.map_or(0.0, |s| s[k]);
                g.path_gain[k] = dbm_to_mw(-pathloss(link.distance, radio) - shadow);
                g.bearing[k] = link.aod;
                g.distance[k] = link.distance;
                g.best_beam[k] = codebook.nearest(link.aod);
                for (b, &angle) in codebook.angles().iter().enumerate() {
                    g.gain[k * depth + b] = dbm_to_mw(beam_gain(angle, link.aod, radio));
                }
            }
        }
        g
    }

    pub fn vehicles(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn bearing(&self, from: usize, to: usize) -> f64 {
        self.bearing[from * self.n + to]
    }

    pub fn distance(&self, from: usize, to: usize) -> f64 {
        self.distance[from * self.n + to]
    }

    /// Beam of `from` that points closest to `to`.
    pub fn best_beam(&self, from: usize, to: usize) -> usize {
        self.best_beam[from * self.n + to]
    }

    /// Linear gain of beam `beam` of `from` in the direction of `to`.
    pub fn gain(&self, from: usize, to: usize, beam: usize) -> f64 {
        self.gain[(from * self.n + to) * self.depth + beam]
    }

    /// Power (mW) at `rx` on receive beam `rx_beam` before the receive gain
    /// is applied, from `tx` transmitting on `tx_beam`.
    pub fn pre_rx_mw(&self, tx: usize, rx: usize, tx_beam: usize) -> f64 {
        self.tx_power_mw * self.path_gain[tx * self.n + rx] * self.gain(tx, rx, tx_beam)
    }

    /// Received power (mW) at `rx` on `rx_beam` from `tx` on `tx_beam`.
    pub fn received_mw(&self, tx: usize, rx: usize, tx_beam: usize, rx_beam: usize) -> f64 {
        self.pre_rx_mw(tx, rx, tx_beam) * self.gain(rx, tx, rx_beam)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::{mw_to_dbm, rsrp};
    use approx::assert_abs_diff_eq;

    #[test]
    fn matches_link_budget() {
        let radio = RadioConfig::default();
        let cb = Codebook::uniform(16, &radio).unwrap();
        let pos = [(0.0, 0.0), (80.0, 30.0), (-20.0, 5.0)];
        let g = Geometry::compute(&pos, &cb, &radio, None);
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            for (bt, br) in [(0, 0), (3, 11), (g.best_beam(i, j), g.best_beam(j, i))] {
                let link = LinkGeometry::between(pos[i], pos[j]);
                let want = rsrp(&link, cb.angle(bt), cb.angle(br), &radio);
                assert_abs_diff_eq!(mw_to_dbm(g.received_mw(i, j, bt, br)), want, epsilon = 1e-9);
            }
        }
        assert_eq!(g.best_beam(0, 2), 15);
        assert_abs_diff_eq!(g.distance(1, 0), 30.0f64.hypot(80.0), epsilon = 1e-12);
    }
}
