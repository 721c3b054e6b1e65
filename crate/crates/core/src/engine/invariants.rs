//! Checks over a complete event log.

use std::collections::{BTreeMap, BTreeSet};

use crate::grid::{ResourceIndex, Slot};
use crate::ra_standard::Grant;

use super::log::{Event, Payload};

/// No vehicle decodes successfully in a slot where it transmits, and no
/// vehicle transmits twice in one slot.
pub fn check_half_duplex(events: &[Event]) -> Result<(), String> {
    let mut tx: BTreeMap<Slot, BTreeSet<usize>> = BTreeMap::new();
    for e in events {
        if let Event::Tx { slot, vehicle, .. } = *e {
            if !tx.entry(slot).or_default().insert(vehicle) {
                return Err(format!("vehicle {vehicle} transmits twice in slot {slot}"));
            }
        }
    }
    for e in events {
        if let Event::Decode {
            slot,
            rx,
            success: true,
            ..
        } = *e
        {
            if tx.get(&slot).is_some_and(|s| s.contains(&rx)) {
                return Err(format!(
                    "vehicle {rx} decoded while transmitting in slot {slot}"
                ));
            }
        }
    }
    Ok(())
}

/// Every data transmission sits on a periodic cell of the grant it names,
/// and that grant belongs to the transmitter.
pub fn check_grant_adherence(events: &[Event]) -> Result<(), String> {
    let mut grants: BTreeMap<u64, (usize, Grant)> = BTreeMap::new();
    for e in events {
        match e {
            Event::Grant {
                vehicle,
                grant,
                resources,
                rri,
                rc,
                start,
                ..
            } => {
                let g = Grant {
                    id: *grant,
                    owner: *vehicle,
                    resources: resources.clone(),
                    rri: *rri,
                    rc_remaining: *rc,
                    start: *start,
                };
                grants.insert(*grant, (*vehicle, g));
            }
            Event::Tx {
                slot,
                vehicle,
                subchannel,
                beam,
                payload: Payload::Data,
                grant,
                ..
            } => {
                let id =
                    grant.ok_or_else(|| format!("data tx of {vehicle} at {slot} without grant"))?;
                let (owner, g) = grants.get(&id).ok_or_else(|| {
                    format!("data tx of {vehicle} at {slot} names unknown grant {id}")
                })?;
                if owner != vehicle {
                    return Err(format!(
                        "vehicle {vehicle} used grant {id} of vehicle {owner}"
                    ));
                }
                let idx = ResourceIndex {
                    slot: *slot,
                    subchannel: *subchannel,
                    beam: *beam,
                };
                if !g.covers(&idx) {
                    return Err(format!(
                        "tx {idx:?} of vehicle {vehicle} outside grant {id}"
                    ));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// TB bookkeeping: every outcome refers to a generated TB, no TB ends twice,
/// a TB reported delivered had a successful data decode, and
/// `generated = delivered + lost + in flight` holds at every slot.
pub fn check_conservation(events: &[Event]) -> Result<(), String> {
    let mut generated = BTreeSet::new();
    let mut decoded = BTreeSet::new();
    let mut finished = BTreeSet::new();
    let (mut delivered, mut lost) = (0usize, 0usize);
    for e in events {
        match *e {
            Event::TbGenerated { tb, .. } => {
                if !generated.insert(tb) {
                    return Err(format!("tb {tb} generated twice"));
                }
            }
            Event::Decode {
                tb: Some(tb),
                success: true,
                ..
            } => {
                decoded.insert(tb);
            }
            Event::TbOutcome {
                tb, delivered: d, ..
            } => {
                if !generated.contains(&tb) || !finished.insert(tb) {
                    return Err(format!("tb {tb} ended without being live"));
                }
                if d != decoded.contains(&tb) {
                    return Err(format!("tb {tb} outcome {d} disagrees with its decodes"));
                }
                if d {
                    delivered += 1;
                } else {
                    lost += 1;
                }
            }
            Event::TbDropped { tb, .. } => {
                if !generated.contains(&tb) || !finished.insert(tb) {
                    return Err(format!("tb {tb} dropped without being live"));
                }
                lost += 1;
            }
            _ => {}
        }
        let in_flight = generated.len() - finished.len();
        if generated.len() != delivered + lost + in_flight {
            return Err(format!("conservation broken at slot {}", e.slot()));
        }
    }
    Ok(())
}

/// All of the above.
pub fn check_all(events: &[Event]) -> Result<(), String> {
    check_half_duplex(events)?;
    check_grant_adherence(events)?;
    check_conservation(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::log::GrantSource;

    fn tx(slot: Slot, vehicle: usize, subchannel: usize, grant: u64) -> Event {
        Event::Tx {
            slot,
            vehicle,
            subchannel,
            beam: None,
            payload: Payload::Data,
            dst: 9,
            tb: Some(0),
            grant: Some(grant),
        }
    }

    fn grant(vehicle: usize, id: u64) -> Event {
        Event::Grant {
            slot: 100,
            vehicle,
            grant: id,
            resources: vec![ResourceIndex::new(101, 2)],
            rri: 16,
            rc: 5,
            start: 100,
            source: GrantSource::Standard,
        }
    }

    #[test]
    fn adherence() {
        assert!(check_grant_adherence(&[grant(1, 0), tx(117, 1, 2, 0)]).is_ok());
        assert!(check_grant_adherence(&[grant(1, 0), tx(118, 1, 2, 0)]).is_err());
        assert!(check_grant_adherence(&[grant(1, 0), tx(117, 2, 2, 0)]).is_err());
        assert!(check_grant_adherence(&[tx(117, 1, 2, 0)]).is_err());
    }

    #[test]
    fn half_duplex() {
        let decode = Event::Decode {
            slot: 117,
            tx: 3,
            rx: 1,
            payload: Payload::Data,
            tb: Some(4),
            success: true,
            sinr_db: Some(9.0),
            interference_dbm: None,
        };
        assert!(check_half_duplex(&[tx(117, 1, 2, 0), decode.clone()]).is_err());
        assert!(check_half_duplex(&[tx(118, 1, 2, 0), decode]).is_ok());
        assert!(check_half_duplex(&[tx(5, 1, 2, 0), tx(5, 1, 3, 0)]).is_err());
    }

    #[test]
    fn conservation() {
        let g = Event::TbGenerated {
            slot: 1,
            tb: 0,
            src: 0,
            dst: 1,
        };
        let out = Event::TbOutcome {
            slot: 2,
            tb: 0,
            delivered: false,
        };
        assert!(check_conservation(&[g.clone(), out.clone()]).is_ok());
        assert!(check_conservation(&[g.clone(), out.clone(), out.clone()]).is_err());
        assert!(check_conservation(&[out]).is_err());
        let bogus = Event::TbOutcome {
            slot: 2,
            tb: 0,
            delivered: true,
        };
        assert!(check_conservation(&[g, bogus]).is_err());
    }
}
