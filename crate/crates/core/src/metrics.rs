//! Delivery, channel occupancy and collision statistics computed from event
//! logs. Every function here is a pure function of the log.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::{Event, GrantSource, Payload, RunOutput};
use crate::grid::{ResourceIndex, Slot};
use crate::radio::{dbm_to_mw, mw_to_dbm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPdr {
    pub src: usize,
    pub dst: usize,
    pub delivered: usize,
    pub lost: usize,
    pub pdr: Option<f64>,
    /// Linear mean over the link's data receptions, dBm.
    pub mean_interference_dbm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub pdr: Option<f64>,
    pub links: Vec<LinkPdr>,
    pub cbr_series: Vec<f64>,
    pub collision_probability: Option<f64>,
    pub mean_interference_dbm: Option<f64>,
    pub tb_generated: usize,
    pub tb_delivered: usize,
    pub tb_lost: usize,
    pub data_tx: usize,
    pub signaling_tx: usize,
    pub fallbacks: usize,
}

impl MetricsRecord {
    pub fn mean_cbr(&self) -> Option<f64> {
        (!self.cbr_series.is_empty())
            .then(|| self.cbr_series.iter().sum::<f64>() / self.cbr_series.len() as f64)
    }

    pub fn median_cbr(&self) -> Option<f64> {
        median(&self.cbr_series)
    }
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Lower edge of the `width` dB bin that holds `dbm`.
pub fn interference_bin(dbm: f64, width: f64) -> f64 {
    (dbm / width).floor() * width
}

/// Empirical CDF as `(value, fraction <= value)` over the distinct values,
/// ascending. Non-finite values are ignored.
pub fn ecdf(xs: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = f,
            _ => out.push((x, f)),
        }
    }
    out
}

/// Delivered TBs over finished TBs (delivered or lost), optionally
/// restricted to one `(src, dst)` link. A TB counts once however many of its
/// copies decoded. `None` when no TB finished.
pub fn pdr(events: &[Event], link: Option<(usize, usize)>) -> Option<f64> {
    let links = tb_links(events);
    let (mut ok, mut total) = (0usize, 0usize);
    for e in events {
        let (tb, delivered) = match *e {
            Event::TbOutcome { tb, delivered, .. } => (tb, delivered),
            Event::TbDropped { tb, .. } => (tb, false),
            _ => continue,
        };
        if link.is_some_and(|l| links.get(&tb) != Some(&l)) {
            continue;
        }
        total += 1;
        ok += delivered as usize;
    }
    (total > 0).then(|| ok as f64 / total as f64)
}

fn tb_links(events: &[Event]) -> BTreeMap<u64, (usize, usize)> {
    events
        .iter()
        .filter_map(|e| match *e {
            Event::TbGenerated { tb, src, dst, .. } => Some((tb, (src, dst))),
            _ => None,
        })
        .collect()
}

/// Busy fraction of the `(slot, sub-channel)` cells per interval of
/// `interval` slots over `[from, to)`; a cell is busy if any transmission,
/// data or signalling, occupies it. A trailing partial interval is dropped.
pub fn cbr(events: &[Event], interval: u64, subchannels: usize, from: Slot, to: Slot) -> Vec<f64> {
    let n = (to.saturating_sub(from) / interval) as usize;
    let mut busy: BTreeSet<(Slot, usize)> = BTreeSet::new();
    for e in events {
        if let Event::Tx {
            slot, subchannel, ..
        } = *e
        {
            if slot >= from && slot < from + n as u64 * interval {
                busy.insert((slot, subchannel));
            }
        }
    }
    let mut counts = vec![0usize; n];
    for (slot, _) in busy {
        counts[((slot - from) / interval) as usize] += 1;
    }
    let cells = (interval as usize * subchannels) as f64;
    counts.into_iter().map(|c| c as f64 / cells).collect()
}

/// Share of the distinct selected cells that two or more vehicles selected.
/// `selections[v]` lists the cells of vehicle `v`; duplicates within one
/// vehicle count once. `None` when nothing was selected.
pub fn collision_probability_of(selections: &[Vec<ResourceIndex>]) -> Option<f64> {
    let mut owners: BTreeMap<ResourceIndex, usize> = BTreeMap::new();
    for cells in selections {
        let distinct: BTreeSet<_> = cells.iter().copied().collect();
        for c in distinct {
            *owners.entry(c).or_default() += 1;
        }
    }
    if owners.is_empty() {
        return None;
    }
    let collided = owners.values().filter(|&&k| k >= 2).count();
    Some(collided as f64 / owners.len() as f64)
}

/// Collision probability of the data cells used at or after `from`. Cells
/// carry the beam tag, so two receivers granting the same `(t, f)` on
/// different receive beams do not collide.
pub fn collision_probability(events: &[Event], from: Slot) -> Option<f64> {
    let mut per_vehicle: BTreeMap<usize, Vec<ResourceIndex>> = BTreeMap::new();
    for e in events {
        if let Event::Tx {
            slot,
            vehicle,
            subchannel,
            beam,
            payload: Payload::Data,
            ..
        } = *e
        {
            if slot >= from {
                per_vehicle.entry(vehicle).or_default().push(ResourceIndex {
                    slot,
                    subchannel,
                    beam,
                });
            }
        }
    }
    collision_probability_of(&per_vehicle.into_values().collect::<Vec<_>>())
}

/// All metrics of one run. Statistics cover the slots at or after the
/// warm-up.
pub fn compute(out: &RunOutput, cbr_interval: u64, subchannels: usize) -> MetricsRecord {
    let events = &out.events;
    let links = tb_links(events);
    let mut per_link: BTreeMap<(usize, usize), (usize, usize, f64, usize)> = BTreeMap::new();
    let (mut i_sum, mut i_n) = (0.0, 0usize);
    let (mut data_tx, mut signaling_tx, mut fallbacks) = (0, 0, 0);
    for e in events {
        match *e {
            Event::TbOutcome { tb, delivered, .. } => {
                let l = per_link.entry(links[&tb]).or_default();
                if delivered {
                    l.0 += 1;
                } else {
                    l.1 += 1;
                }
            }
            Event::TbDropped { tb, .. } => per_link.entry(links[&tb]).or_default().1 += 1,
            Event::Decode {
                payload: Payload::Data,
                tb: Some(tb),
                sinr_db: Some(_),
                interference_dbm,
                ..
            } => {
                let mw = interference_dbm.map_or(0.0, dbm_to_mw);
                let l = per_link.entry(links[&tb]).or_default();
                l.2 += mw;
                l.3 += 1;
                i_sum += mw;
                i_n += 1;
            }
            Event::Tx { slot, payload, .. } if slot >= out.warmup => {
                if payload == Payload::Data {
                    data_tx += 1;
                } else {
                    signaling_tx += 1;
                }
            }
            Event::Grant {
                source: GrantSource::Fallback,
                ..
            } => fallbacks += 1,
            _ => {}
        }
    }
    let mean_dbm = |sum: f64, n: usize| (n > 0 && sum > 0.0).then(|| mw_to_dbm(sum / n as f64));
    let link_rows: Vec<LinkPdr> = per_link
        .into_iter()
        .map(|((src, dst), (ok, lost, isum, n))| LinkPdr {
            src,
            dst,
            delivered: ok,
            lost,
            pdr: (ok + lost > 0).then(|| ok as f64 / (ok + lost) as f64),
            mean_interference_dbm: mean_dbm(isum, n),
        })
        .collect();
    let tb_delivered = link_rows.iter().map(|l| l.delivered).sum();
    let tb_lost = link_rows.iter().map(|l| l.lost).sum();
    MetricsRecord {
        pdr: pdr(events, None),
        links: link_rows,
        cbr_series: cbr(events, cbr_interval, subchannels, out.warmup, out.end),
        collision_probability: collision_probability(events, out.warmup),
        mean_interference_dbm: mean_dbm(i_sum, i_n),
        tb_generated: links.len(),
        tb_delivered,
        tb_lost,
        data_tx,
        signaling_tx,
        fallbacks,
    }
}
