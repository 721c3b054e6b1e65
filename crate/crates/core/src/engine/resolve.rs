//! Reception of the transmissions of one slot.

use crate::radio::{decodes, mw_to_dbm, sinr, RadioConfig};

use super::geometry::Geometry;

/// One transmission on air in the slot being resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotTx {
    pub vehicle: usize,
    pub subchannel: usize,
    /// Physical beam of the transmitter.
    pub tx_beam: usize,
    /// Intended receiver.
    pub dst: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reception {
    /// Index into the transmissions passed to [`resolve_slot`].
    pub tx_index: usize,
    pub rx: usize,
    pub success: bool,
    /// `None` when the receiver was itself transmitting.
    pub sinr_db: Option<f64>,
    /// Aggregate co-channel interference; `None` when there was none.
    pub interference_dbm: Option<f64>,
}

/// Decodes every transmission at its intended receiver. The receiver points
/// its closest beam at the transmitter; every other transmitter on the same
/// sub-channel interferes. A receiver that transmits in the slot decodes
/// nothing.
pub fn resolve_slot(txs: &[SlotTx], geo: &Geometry, radio: &RadioConfig) -> Vec<Reception> {
    txs.iter()
        .enumerate()
        .map(|(k, t)| {
            let rx = t.dst;
            if txs.iter().any(|o| o.vehicle == rx) {
                return Reception {
                    tx_index: k,
                    rx,
                    success: false,
                    sinr_db: None,
                    interference_dbm: None,
                };
            }
            let rx_beam = geo.best_beam(rx, t.vehicle);
            let signal = geo.received_mw(t.vehicle, rx, t.tx_beam, rx_beam);
            let mut interferers = 0;
            let mut interference = 0.0;
            for o in txs {
                if o.subchannel == t.subchannel && o.vehicle != t.vehicle {
                    interferers += 1;
                    interference += geo.received_mw(o.vehicle, rx, o.tx_beam, rx_beam);
                }
            }
            let i_dbm = mw_to_dbm(interference);
            let s = sinr(mw_to_dbm(signal), i_dbm, radio);
            Reception {
                tx_index: k,
                rx,
                success: decodes(s, radio),
                sinr_db: Some(s),
                interference_dbm: (interferers > 0).then_some(i_dbm),
            }
        })
        .collect()
}
