//! Link budget, beam patterns, interference aggregation and SINR.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    /// dBm.
    pub tx_power: f64,
    /// dBm.
    pub noise_power: f64,
    /// Hz.
    pub carrier_frequency: f64,
    pub array_rows: u32,
    pub array_cols: u32,
    pub pathloss_exponent: f64,
    /// Meters.
    pub pathloss_ref_distance: f64,
    /// dB.
    pub sinr_decode_threshold: f64,
    /// Log-normal shadowing standard deviation in dB; 0 disables it.
    pub shadowing_sigma: f64,
    /// Number of beams L in the codebook.
    pub codebook_depth: usize,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            tx_power: 23.0,
            noise_power: -68.0,
            carrier_frequency: 30e9,
            array_rows: 4,
            array_cols: 4,
            pathloss_exponent: 2.0,
            pathloss_ref_distance: 1.0,
            sinr_decode_threshold: 5.0,
            shadowing_sigma: 0.0,
            codebook_depth: 16,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("radio.tx_power", self.tx_power),
            ("radio.noise_power", self.noise_power),
            ("radio.sinr_decode_threshold", self.sinr_decode_threshold),
        ] {
            if !v.is_finite() {
                return Err(SimError::config(key, "must be finite"));
            }
        }
        if !(self.carrier_frequency > 0.0) {
            return Err(SimError::config("radio.carrier_frequency", "must be > 0"));
        }
        if self.array_rows < 1 || self.array_cols < 1 {
            return Err(SimError::config(
                "radio.array_rows",
                "array dimensions must be >= 1",
            ));
        }
        if !(self.pathloss_exponent >= 2.0) {
            return Err(SimError::config("radio.pathloss_exponent", "must be >= 2"));
        }
        if !(self.pathloss_ref_distance > 0.0) {
            return Err(SimError::config(
                "radio.pathloss_ref_distance",
                "must be > 0",
            ));
        }
        if !(self.shadowing_sigma >= 0.0) {
            return Err(SimError::config("radio.shadowing_sigma", "must be >= 0"));
        }
        if self.codebook_depth < 1 {
            return Err(SimError::config("radio.codebook_depth", "must be >= 1"));
        }
        Ok(())
    }

    pub fn elements(&self) -> u32 {
        self.array_rows * self.array_cols
    }

    /// Boresight array gain, dBi.
    pub fn peak_gain(&self) -> f64 {
        10.0 * (self.elements() as f64).log10()
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// `0 mW` maps to `-inf`.
pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Distance and bearings of a directed link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub distance: f64,
    /// Bearing of the receiver seen from the transmitter.
    pub aod: f64,
    /// Bearing of the transmitter seen from the receiver.
    pub aoa: f64,
}

impl LinkGeometry {
    pub fn between(tx: (f64, f64), rx: (f64, f64)) -> Self {
        let (dx, dy) = (rx.0 - tx.0, rx.1 - tx.1);
        let aod = wrap_angle(dy.atan2(dx));
        Self {
            distance: dx.hypot(dy),
            aod,
            aoa: wrap_angle(aod + PI),
        }
    }
}

/// Log-distance path loss anchored to free space at the reference distance.
/// Distances below the reference are clamped to it.
pub fn pathloss(distance: f64, cfg: &RadioConfig) -> f64 {
    let d0 = cfg.pathloss_ref_distance;
    let d = distance.max(d0);
    let fspl_ref = 20.0 * (4.0 * PI * d0 * cfg.carrier_frequency / SPEED_OF_LIGHT).log10();
    fspl_ref + 10.0 * cfg.pathloss_exponent * (d / d0).log10()
}

/// Normalized power pattern of an `n`-element half-wavelength line array at
/// phase progression `psi`; 1 at `psi = 0`.
fn line_array_factor(n: u32, psi: f64) -> f64 {
    if n <= 1 {
        return 1.0;
    }
    let half = 0.5 * psi;
    let den = (n as f64) * half.sin();
    if den.abs() < 1e-12 {
        return 1.0;
    }
    let r = (n as f64 * half).sin() / den;
    r * r
}

/// Element pattern attenuation (dB, <= 0): 65 degree half-power width,
/// 30 dB front-to-back.
fn element_attenuation(delta: f64) -> f64 {
    const HPBW: f64 = 65.0 * PI / 180.0;
    -(12.0 * (delta / HPBW).powi(2)).min(30.0)
}

/// Azimuth gain (dBi) of the planar array steered to `pointing`, towards
/// `direction`.
///
/// Columns are horizontal, rows vertical; the row factor is coherent in the
/// road plane. A single-element array is isotropic (0 dBi).
pub fn beam_gain(pointing: f64, direction: f64, cfg: &RadioConfig) -> f64 {
    if cfg.elements() == 1 {
        return 0.0;
    }
    let delta = wrap_angle(direction - pointing);
    let af = line_array_factor(cfg.array_cols, PI * delta.sin());
    cfg.peak_gain() + element_attenuation(delta) + 10.0 * af.max(1e-30).log10()
}

/// Full half-power beamwidth of [`beam_gain`], radians.
pub fn half_power_beamwidth(cfg: &RadioConfig) -> f64 {
    if cfg.elements() == 1 {
        return 2.0 * PI;
    }
    let peak = beam_gain(0.0, 0.0, cfg);
    let (mut lo, mut hi) = (0.0, PI / 2.0);
    // Main lobe is monotone up to the first null, which lies inside pi/2 for
    // any column count >= 2; for a single column the element sets the width.
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if beam_gain(0.0, mid, cfg) > peak - 3.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    2.0 * 0.5 * (lo + hi)
}

/// Uniform azimuth codebook over `[-pi, pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    beams: Vec<f64>,
    beamwidth: f64,
}

impl Codebook {
    pub fn uniform(depth: usize, cfg: &RadioConfig) -> Result<Self> {
        if depth == 0 {
            return Err(SimError::config("radio.codebook_depth", "must be >= 1"));
        }
        let step = 2.0 * PI / depth as f64;
        Ok(Self {
            beams: (0..depth).map(|l| -PI + step * l as f64).collect(),
            beamwidth: half_power_beamwidth(cfg),
        })
    }

    pub fn depth(&self) -> usize {
        self.beams.len()
    }

    pub fn angle(&self, beam: usize) -> f64 {
        self.beams[beam]
    }

    pub fn angles(&self) -> &[f64] {
        &self.beams
    }

    pub fn beamwidth(&self) -> f64 {
        self.beamwidth
    }

    /// Beam whose pointing angle is closest to `bearing`.
    pub fn nearest(&self, bearing: f64) -> usize {
        let step = 2.0 * PI / self.beams.len() as f64;
        let pos = (wrap_angle(bearing) + PI) / step;
        (pos.round() as usize) % self.beams.len()
    }
}

/// `P_t - PL + G_tx + G_rx`, dBm.
pub fn rsrp(geom: &LinkGeometry, tx_pointing: f64, rx_pointing: f64, cfg: &RadioConfig) -> f64 {
    let g_tx = beam_gain(tx_pointing, geom.aod, cfg);
    let g_rx = beam_gain(rx_pointing, geom.aoa, cfg);
    rsrp_from_budget(cfg.tx_power, pathloss(geom.distance, cfg), g_tx, g_rx)
}

pub fn rsrp_from_budget(tx_power: f64, pathloss: f64, g_tx: f64, g_rx: f64) -> f64 {
    tx_power - pathloss + g_tx + g_rx
}

/// Linear-power sum of received powers in dBm; `-inf` when empty.
pub fn aggregate_interference<I: IntoIterator<Item = f64>>(powers_dbm: I) -> f64 {
    let total: f64 = powers_dbm.into_iter().map(dbm_to_mw).sum();
    mw_to_dbm(total)
}

/// `signal - 10 log10(10^(I/10) + 10^(N/10))`, dB.
pub fn sinr(signal_dbm: f64, interference_dbm: f64, cfg: &RadioConfig) -> f64 {
    signal_dbm - mw_to_dbm(dbm_to_mw(interference_dbm) + dbm_to_mw(cfg.noise_power))
}

pub fn decodes(sinr_db: f64, cfg: &RadioConfig) -> bool {
    sinr_db >= cfg.sinr_decode_threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cfg() -> RadioConfig {
        RadioConfig::default()
    }

    #[test]
    fn pathloss_reference_and_slopes() {
        let c = cfg();
        let fspl = 20.0 * (4.0 * PI * 1.0 * 30e9 / SPEED_OF_LIGHT).log10();
        assert_abs_diff_eq!(pathloss(1.0, &c), fspl, epsilon = 1e-12);
        assert_abs_diff_eq!(pathloss(1.0, &c), 61.98, epsilon = 0.02);
        assert_abs_diff_eq!(pathloss(10.0, &c), fspl + 20.0, epsilon = 1e-9);
        let c25 = RadioConfig {
            pathloss_exponent: 2.5,
            ..c.clone()
        };
        assert_abs_diff_eq!(pathloss(100.0, &c25), fspl + 50.0, epsilon = 1e-9);
        // near-field clamp
        assert_eq!(pathloss(0.2, &c), pathloss(1.0, &c));
    }

    #[test]
    fn beam_gain_peak_back_symmetry() {
        let c = cfg();
        assert_abs_diff_eq!(
            beam_gain(0.3, 0.3, &c),
            10.0 * 16f64.log10(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(beam_gain(0.0, 0.0, &c), 12.04, epsilon = 0.01);
        assert!(beam_gain(0.0, PI, &c) <= c.peak_gain() - 10.0);
        for k in 1..50 {
            let d = k as f64 * 0.06;
            assert_abs_diff_eq!(
                beam_gain(1.0, 1.0 + d, &c),
                beam_gain(1.0, 1.0 - d, &c),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn isotropic_single_element() {
        let c = RadioConfig {
            array_rows: 1,
            array_cols: 1,
            ..cfg()
        };
        assert_eq!(beam_gain(0.0, 2.0, &c), 0.0);
        let g = LinkGeometry {
            distance: 50.0,
            aod: 0.4,
            aoa: -1.0,
        };
        assert_abs_diff_eq!(
            rsrp(&g, 0.0, 0.0, &c),
            c.tx_power - pathloss(50.0, &c),
            epsilon = 1e-12
        );
    }

    #[test]
    fn beamwidth_of_four_by_four() {
        let c = cfg();
        let bw = half_power_beamwidth(&c);
        assert_abs_diff_eq!(
            beam_gain(0.0, bw / 2.0, &c),
            c.peak_gain() - 3.0,
            epsilon = 1e-6
        );
        // 4-element half-wavelength line: ~26 degrees, slightly narrowed by
        // the element.
        assert!(
            bw.to_degrees() > 20.0 && bw.to_degrees() < 28.0,
            "{}",
            bw.to_degrees()
        );
    }

    #[test]
    fn rsrp_budget_example() {
        assert_abs_diff_eq!(
            rsrp_from_budget(23.0, 100.0, 12.04, 12.04),
            -52.92,
            epsilon = 1e-9
        );
    }

    #[test]
    fn misaligned_interferer_is_ten_db_down() {
        let c = cfg();
        let bw = half_power_beamwidth(&c);
        let geom = LinkGeometry {
            distance: 80.0,
            aod: 0.0,
            aoa: PI,
        };
        let aligned = rsrp(&geom, 0.0, PI, &c);
        for k in 1..200 {
            let off = bw + k as f64 * (PI - bw) / 200.0;
            let mis = rsrp(&geom, 0.0, wrap_angle(PI + off), &c);
            assert!(mis <= aligned - 10.0, "offset {off}: {mis} vs {aligned}");
        }
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(
            aggregate_interference(std::iter::empty()),
            f64::NEG_INFINITY
        );
        assert_abs_diff_eq!(aggregate_interference([-71.5]), -71.5, epsilon = 1e-12);
        assert_abs_diff_eq!(
            aggregate_interference([-60.0, -60.0]),
            10.0 * (2e-6f64).log10(),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            aggregate_interference([-60.0, -60.0]),
            -56.99,
            epsilon = 0.01
        );
    }

    #[test]
    fn sinr_examples() {
        let c = cfg();
        let noise_limited = sinr(-53.0, f64::NEG_INFINITY, &c);
        assert_abs_diff_eq!(noise_limited, 15.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sinr(-68.0, f64::NEG_INFINITY, &c), 0.0, epsilon = 1e-9);
        let s = sinr(-40.0, -58.0, &c);
        assert!((s - 18.0).abs() <= 0.5);
        assert!(decodes(5.0, &c));
        assert!(!decodes(4.99, &c));
    }

    #[test]
    fn codebook_layout() {
        let c = cfg();
        let cb = Codebook::uniform(8, &c).unwrap();
        assert_eq!(cb.depth(), 8);
        assert_eq!(cb.angle(0), -PI);
        for w in cb.angles().windows(2) {
            assert!(w[1] > w[0]);
            assert_abs_diff_eq!(w[1] - w[0], PI / 4.0, epsilon = 1e-12);
        }
        assert_eq!(cb.nearest(0.0), 4);
        assert_eq!(cb.nearest(PI - 0.01), 0);
        assert_eq!(cb.nearest(-PI / 2.0 + 0.1), 2);
        assert!(Codebook::uniform(0, &c).is_err());
    }

    #[test]
    fn gain_argmax_at_boresight_for_every_beam() {
        let c = cfg();
        let cb = Codebook::uniform(16, &c).unwrap();
        for &p in cb.angles() {
            let best = (0..3600)
                .map(|k| -PI + k as f64 * 2.0 * PI / 3600.0)
                .max_by(|a, b| beam_gain(p, *a, &c).total_cmp(&beam_gain(p, *b, &c)))
                .unwrap();
            assert!(wrap_angle(best - p).abs() < 2.0 * PI / 3600.0 + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn aggregate_permutation_and_monotone(
            mut xs in proptest::collection::vec(-120.0f64..-20.0, 1..12),
            extra in -120.0f64..-20.0,
        ) {
            let a = aggregate_interference(xs.clone());
            xs.reverse();
            let b = aggregate_interference(xs.clone());
            prop_assert!((a - b).abs() < 1e-9);
            xs.push(extra);
            prop_assert!(aggregate_interference(xs) >= a);
        }

        #[test]
        fn rsrp_decreases_with_distance(d in 1.0f64..500.0, step in 0.1f64..100.0, aod in -3.1f64..3.1) {
            let c = cfg();
            let near = LinkGeometry { distance: d, aod, aoa: wrap_angle(aod + PI) };
            let far = LinkGeometry { distance: d + step, ..near };
            prop_assert!(rsrp(&far, 0.0, 0.0, &c) < rsrp(&near, 0.0, 0.0, &c));
        }

        #[test]
        fn wrap_angle_range(a in -100.0f64..100.0) {
            let w = wrap_angle(a);
            prop_assert!((-PI..PI).contains(&w));
        }
    }
}
