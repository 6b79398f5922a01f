//! Reference-user selection and the feedback protocol behind it.
//!
//! Each REFIM BS periodically publishes, for its candidate users, the
//! time-averaged cross gains toward its neighbours, the user's weight, its
//! received signal and its interference-plus-noise. Every slot the BSs only
//! exchange the indices of their scheduled users. A BS picks as reference,
//! per subchannel, the neighbour-scheduled user it hurts the most.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::GainSnapshot;
use crate::power::PowerMatrix;
use crate::scheduling::{interference_plus_noise, ScheduleMap};
use crate::topology::{Mobility, Network, Tier};

/// Fields published per candidate record (cross gain, weight, signal, I+N).
pub const FIELDS_PER_RECORD: u64 = 4;
const BYTES_PER_VALUE: u64 = 4;
const BYTES_PER_INDEX: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedbackConfig {
    /// Publication period T, slots.
    pub period_slots: u64,
    pub nomadic_period_slots: Option<u64>,
    pub mobile_period_slots: Option<u64>,
    /// Macro and pico BSs publish only their edge users.
    pub edge_only: bool,
    pub edge_threshold_db: f64,
    /// Femto BSs learn macro schedules by overhearing control messages.
    pub femto_overhear: bool,
    /// Number of reference users M per (BS, subchannel).
    pub reference_count: usize,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        FeedbackConfig {
            period_slots: 1,
            nomadic_period_slots: None,
            mobile_period_slots: None,
            edge_only: false,
            edge_threshold_db: 6.0,
            femto_overhear: true,
            reference_count: 1,
        }
    }
}

impl FeedbackConfig {
    pub fn period_for(&self, mobility: Mobility) -> u64 {
        let p = match mobility {
            Mobility::Nomadic => self.nomadic_period_slots,
            Mobility::Mobile { .. } => self.mobile_period_slots,
        };
        p.unwrap_or(self.period_slots).max(1)
    }
}

/// Published feedback for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub user: usize,
    pub serving_bs: usize,
    /// Neighbours of the serving BS, in neighbour-set order.
    pub neighbors: Vec<usize>,
    /// Cross gain toward each neighbour, row-major (neighbour, subchannel).
    pub cross_gain: Vec<f64>,
    pub weight: f64,
    /// Received signal g·p per subchannel, W.
    pub signal_w: Vec<f64>,
    /// Interference plus noise per subchannel, W.
    pub inr_w: Vec<f64>,
    pub last_update_slot: u64,
}

impl CandidateRecord {
    fn zeros(net: &Network, user: usize) -> CandidateRecord {
        let serving_bs = net.users[user].serving_bs;
        let neighbors = net.neighbors(serving_bs).to_vec();
        let s = net.subchannels();
        CandidateRecord {
            user,
            serving_bs,
            cross_gain: vec![0.0; neighbors.len() * s],
            neighbors,
            weight: 0.0,
            signal_w: vec![0.0; s],
            inr_w: vec![0.0; s],
            last_update_slot: 0,
        }
    }

    /// Instantaneous measurement.
    pub fn measure(
        net: &Network,
        gains: &GainSnapshot,
        powers: &PowerMatrix,
        weights: &[f64],
        user: usize,
        slot: u64,
    ) -> CandidateRecord {
        let mut rec = CandidateRecord::zeros(net, user);
        rec.accumulate(gains, powers, weights);
        rec.last_update_slot = slot;
        rec
    }

    fn accumulate(&mut self, gains: &GainSnapshot, powers: &PowerMatrix, weights: &[f64]) {
        let s_count = self.signal_w.len();
        let (k, n0) = (self.user, self.serving_bs);
        for (j, &m) in self.neighbors.iter().enumerate() {
            for s in 0..s_count {
                self.cross_gain[j * s_count + s] += gains.gain(k, m, s);
            }
        }
        self.weight += weights[k];
        for s in 0..s_count {
            self.signal_w[s] += gains.gain(k, n0, s) * powers.get(n0, s);
            self.inr_w[s] += interference_plus_noise(gains, powers, k, n0, s);
        }
    }

    fn scaled(&self, factor: f64, slot: u64) -> CandidateRecord {
        let scale = |v: &Vec<f64>| v.iter().map(|x| x * factor).collect();
        CandidateRecord {
            user: self.user,
            serving_bs: self.serving_bs,
            neighbors: self.neighbors.clone(),
            cross_gain: scale(&self.cross_gain),
            weight: self.weight * factor,
            signal_w: scale(&self.signal_w),
            inr_w: scale(&self.inr_w),
            last_update_slot: slot,
        }
    }

    /// F0 toward `bs` on `subchannel`, if `bs` neighbours the serving BS.
    pub fn cross_gain_toward(&self, bs: usize, subchannel: usize) -> Option<f64> {
        let s_count = self.signal_w.len();
        self.neighbors
            .iter()
            .position(|&m| m == bs)
            .map(|j| self.cross_gain[j * s_count + subchannel])
    }
}

/// A selected reference user with the fields the taxation needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceUser {
    /// BS serving the reference user.
    pub bs: usize,
    pub user: usize,
    pub subchannel: usize,
    /// Gain from the taxed BS to the reference user.
    pub cross_gain: f64,
    pub weight: f64,
    pub signal_w: f64,
    pub inr_w: f64,
}

#[derive(Debug, Clone)]
struct Window {
    sum: CandidateRecord,
    count: u32,
}

/// Which users publish feedback.
fn eligible(net: &Network, user: usize, edge: &[bool], cfg: &FeedbackConfig) -> bool {
    let bs = &net.base_stations[net.users[user].serving_bs];
    bs.refim_enabled && (!cfg.edge_only || bs.tier == Tier::Femto || edge[user])
}

/// The published tables seen by neighbours, plus the running windows.
#[derive(Debug, Clone)]
pub struct CandidateTables {
    published: Vec<Option<CandidateRecord>>,
    windows: Vec<Option<Window>>,
}

impl CandidateTables {
    pub fn new(users: usize) -> CandidateTables {
        CandidateTables {
            published: vec![None; users],
            windows: vec![None; users],
        }
    }

    /// Tables holding a single fresh measurement per eligible user.
    pub fn snapshot_of(
        net: &Network,
        gains: &GainSnapshot,
        powers: &PowerMatrix,
        weights: &[f64],
        edge: &[bool],
        cfg: &FeedbackConfig,
        slot: u64,
    ) -> CandidateTables {
        let published = (0..net.user_count())
            .map(|k| eligible(net, k, edge, cfg).then(|| CandidateRecord::measure(net, gains, powers, weights, k, slot)))
            .collect();
        CandidateTables {
            published,
            windows: vec![None; net.user_count()],
        }
    }

    pub fn record(&self, user: usize) -> Option<&CandidateRecord> {
        self.published.get(user).and_then(|r| r.as_ref())
    }

    pub fn published_count(&self) -> usize {
        self.published.iter().filter(|r| r.is_some()).count()
    }

    /// Adds this slot's measurement to every eligible user's window and
    /// publishes the window mean for users whose period ends now
    /// (`slot % T == 0`). Returns, per BS, the number of records published.
    #[allow(clippy::too_many_arguments)]
    pub fn refresh(
        &mut self,
        net: &Network,
        gains: &GainSnapshot,
        powers: &PowerMatrix,
        weights: &[f64],
        edge: &[bool],
        cfg: &FeedbackConfig,
        slot: u64,
    ) -> Vec<usize> {
        let mut per_bs = vec![0; net.bs_count()];
        for k in 0..net.user_count() {
            if !eligible(net, k, edge, cfg) {
                self.windows[k] = None;
                let period = cfg.period_for(net.users[k].mobility);
                if slot.is_multiple_of(period) {
                    self.published[k] = None;
                }
                continue;
            }
            let win = self.windows[k].get_or_insert_with(|| Window {
                sum: CandidateRecord::zeros(net, k),
                count: 0,
            });
            win.sum.accumulate(gains, powers, weights);
            win.count += 1;
            let period = cfg.period_for(net.users[k].mobility);
            if slot.is_multiple_of(period) {
                let rec = win.sum.scaled(1.0 / win.count as f64, slot);
                self.published[k] = Some(rec);
                self.windows[k] = None;
                per_bs[net.users[k].serving_bs] += 1;
            }
        }
        per_bs
    }

    /// Builds the reference entry for `user` as seen by `taxed_bs` on `subchannel`.
    pub fn reference_toward(&self, user: usize, taxed_bs: usize, subchannel: usize) -> Option<ReferenceUser> {
        let rec = self.record(user)?;
        Some(ReferenceUser {
            bs: rec.serving_bs,
            user,
            subchannel,
            cross_gain: rec.cross_gain_toward(taxed_bs, subchannel)?,
            weight: rec.weight,
            signal_w: rec.signal_w[subchannel],
            inr_w: rec.inr_w[subchannel],
        })
    }

    /// Re-reads a previously selected reference from these tables.
    pub fn remeasure(&self, _net: &Network, r: &ReferenceUser, taxed_bs: usize) -> Option<ReferenceUser> {
        self.reference_toward(r.user, taxed_bs, r.subchannel)
    }
}

/// What one BS believes its neighbours scheduled, indexed like its neighbour set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborView {
    pub bs: usize,
    subchannels: usize,
    entries: Vec<Option<usize>>,
}

impl NeighborView {
    /// Scheduled user of the `j`-th neighbour on `subchannel`.
    pub fn get(&self, j: usize, subchannel: usize) -> Option<usize> {
        self.entries[j * self.subchannels + subchannel]
    }

    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(|e| e.is_none())
    }
}

/// Per-BS views of the neighbours' scheduled users.
///
/// * macro/pico ↔ macro/pico: exact, both ends must run REFIM;
/// * femto observing a macro/pico: overheard (exact) unless overhearing is off;
/// * anyone observing a femto: the femto's lowest-index user, always.
///
/// BSs without REFIM get an empty view.
pub fn exchange_scheduled_indices(net: &Network, schedule: &ScheduleMap, cfg: &FeedbackConfig) -> Vec<NeighborView> {
    let s_count = net.subchannels();
    (0..net.bs_count())
        .map(|n| {
            let observer = &net.base_stations[n];
            let neighbors = net.neighbors(n);
            let mut entries = vec![None; neighbors.len() * s_count];
            let blind = !observer.refim_enabled || (observer.tier == Tier::Femto && !cfg.femto_overhear);
            if !blind {
                for (j, &m) in neighbors.iter().enumerate() {
                    let target = &net.base_stations[m];
                    for s in 0..s_count {
                        entries[j * s_count + s] = if target.tier == Tier::Femto {
                            net.users_of(m).iter().copied().min()
                        } else if observer.tier == Tier::Femto || target.refim_enabled {
                            schedule.get(m, s)
                        } else {
                            None
                        };
                    }
                }
            }
            NeighborView {
                bs: n,
                subchannels: s_count,
                entries,
            }
        })
        .collect()
}

/// The top-`count` neighbour-scheduled users on `subchannel` by recorded cross
/// gain toward `bs`. Ties go to the lower neighbour BS index; neighbours whose
/// user has no published record are skipped.
pub fn select_reference(
    net: &Network,
    bs: usize,
    subchannel: usize,
    view: &NeighborView,
    tables: &CandidateTables,
    count: usize,
) -> Vec<ReferenceUser> {
    if count == 0 {
        return Vec::new();
    }
    let mut found: Vec<ReferenceUser> = net
        .neighbors(bs)
        .iter()
        .enumerate()
        .filter_map(|(j, _)| view.get(j, subchannel))
        .filter_map(|k| tables.reference_toward(k, bs, subchannel))
        .collect();
    found.sort_by(|a, b| b.cross_gain.total_cmp(&a.cross_gain).then(a.bs.cmp(&b.bs)));
    found.truncate(count);
    found
}

/// References for every subchannel of `bs`.
pub fn references_for_bs(
    net: &Network,
    bs: usize,
    view: &NeighborView,
    tables: &CandidateTables,
    count: usize,
) -> Vec<Vec<ReferenceUser>> {
    (0..net.subchannels())
        .map(|s| select_reference(net, bs, s, view, tables, count))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    ScheduledIndices,
    CandidateTable,
}

impl MessageKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MessageKind::ScheduledIndices => "scheduled_indices",
            MessageKind::CandidateTable => "candidate_table",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolMessage {
    pub slot: u64,
    pub sender: usize,
    pub receiver: usize,
    pub kind: MessageKind,
    pub bytes: u64,
}

/// Backhaul signalling counters with an optional per-message trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProtocolStats {
    pub index_messages: u64,
    pub index_bytes: u64,
    pub table_messages: u64,
    pub table_bytes: u64,
    #[serde(skip)]
    pub trace: Option<Vec<ProtocolMessage>>,
}

impl ProtocolStats {
    pub fn with_trace() -> ProtocolStats {
        ProtocolStats {
            trace: Some(Vec::new()),
            ..Default::default()
        }
    }

    fn push(&mut self, msg: ProtocolMessage) {
        match msg.kind {
            MessageKind::ScheduledIndices => {
                self.index_messages += 1;
                self.index_bytes += msg.bytes;
            }
            MessageKind::CandidateTable => {
                self.table_messages += 1;
                self.table_bytes += msg.bytes;
            }
        }
        if let Some(t) = self.trace.as_mut() {
            t.push(msg);
        }
    }

    /// Logs one slot of index exchange: one backhaul message per ordered pair
    /// of REFIM macro/pico neighbours. Overheard and representative views are free.
    pub fn log_index_exchange(&mut self, net: &Network, slot: u64) {
        let bytes = net.subchannels() as u64 * BYTES_PER_INDEX;
        for n in 0..net.bs_count() {
            let rx = &net.base_stations[n];
            if !rx.refim_enabled || rx.tier == Tier::Femto {
                continue;
            }
            for &m in net.neighbors(n) {
                let tx = &net.base_stations[m];
                if tx.refim_enabled && tx.tier != Tier::Femto {
                    self.push(ProtocolMessage {
                        slot,
                        sender: m,
                        receiver: n,
                        kind: MessageKind::ScheduledIndices,
                        bytes,
                    });
                }
            }
        }
    }

    /// Logs table publications: each BS sends its new records to every REFIM neighbour.
    pub fn log_publications(&mut self, net: &Network, published_per_bs: &[usize], slot: u64) {
        let per_record = FIELDS_PER_RECORD * net.subchannels() as u64 * BYTES_PER_VALUE;
        for (m, &records) in published_per_bs.iter().enumerate() {
            if records == 0 {
                continue;
            }
            for &n in net.neighbors(m) {
                if net.base_stations[n].refim_enabled {
                    self.push(ProtocolMessage {
                        slot,
                        sender: m,
                        receiver: n,
                        kind: MessageKind::CandidateTable,
                        bytes: records as u64 * per_record,
                    });
                }
            }
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "slot,sender,receiver,message_type,bytes")?;
        for m in self.trace.iter().flatten() {
            writeln!(out, "{},{},{},{},{}", m.slot, m.sender, m.receiver, m.kind.as_str(), m.bytes)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_hex_grid, build_linear_two_cell, place_users, Spectrum, TierUserCounts};

    fn spectrum(s: usize) -> Spectrum {
        Spectrum {
            subchannels: s,
            bandwidth_hz: 1e6,
        }
    }

    #[test]
    fn period_overrides() {
        let cfg = FeedbackConfig {
            period_slots: 10,
            mobile_period_slots: Some(3),
            ..Default::default()
        };
        assert_eq!(cfg.period_for(Mobility::Nomadic), 10);
        assert_eq!(cfg.period_for(Mobility::Mobile { speed_mps: 1.0 }), 3);
    }

    #[test]
    fn argmax_reference() {
        let grid = build_hex_grid(1, 1000.0, false, spectrum(1)).unwrap();
        let net = place_users(&grid, TierUserCounts { macro_users: 1, femto_users: 0 }, 3).unwrap();
        // BS 0's neighbours 1..6; user of BS 3 gets the strongest gain toward BS 0
        let g = GainSnapshot::from_fn(
            7,
            7,
            1,
            |k, n, _| match (k, n) {
                (2, 0) => 0.5,
                (3, 0) => 0.9,
                _ if net.users[k].serving_bs == n => 1.0,
                _ => 0.01,
            },
            |_, _| 1e-3,
        );
        let p = PowerMatrix::from_network(&net);
        let w = vec![1.0; 7];
        let cfg = FeedbackConfig::default();
        let edge = vec![true; 7];
        let tables = CandidateTables::snapshot_of(&net, &g, &p, &w, &edge, &cfg, 0);
        let mut sched = ScheduleMap::empty(7, 1);
        for n in 0..7 {
            sched.set(n, 0, Some(net.users_of(n)[0]));
        }
        let views = exchange_scheduled_indices(&net, &sched, &cfg);
        let r = select_reference(&net, 0, 0, &views[0], &tables, 1);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].user, net.users_of(3)[0]);
        assert!(select_reference(&net, 0, 0, &views[0], &tables, 0).is_empty());
        assert_eq!(select_reference(&net, 0, 0, &views[0], &tables, 6).len(), 6);
    }

    #[test]
    fn periodic_publication_averages_window() {
        let net = build_linear_two_cell(2000.0, (200.0, 400.0), (700.0, 900.0), 1, spectrum(1), 1).unwrap();
        let p = PowerMatrix::from_network(&net);
        let cfg = FeedbackConfig {
            period_slots: 2,
            ..Default::default()
        };
        let edge = vec![true; 4];
        let mut tables = CandidateTables::new(4);
        let mut published = Vec::new();
        for slot in 0..3u64 {
            let w = vec![1.0 + slot as f64; 4];
            let g = GainSnapshot::from_fn(4, 2, 1, |_, _, _| 1.0, |_, _| 1.0);
            published.push(tables.refresh(&net, &g, &p, &w, &edge, &cfg, slot));
            let rec = tables.record(0).unwrap();
            match slot {
                0 | 1 => assert_eq!(rec.weight, 1.0),
                _ => assert_eq!(rec.weight, 2.5),
            }
        }
        assert_eq!(published[1], vec![0, 0]);
        assert_eq!(published[2], vec![2, 2]);
    }

    #[test]
    fn overhearing_off_blinds_femto() {
        let net = build_linear_two_cell(2000.0, (200.0, 400.0), (700.0, 900.0), 1, spectrum(2), 1).unwrap();
        let mut sched = ScheduleMap::empty(2, 2);
        sched.set(1, 0, Some(3));
        let views = exchange_scheduled_indices(&net, &sched, &FeedbackConfig::default());
        assert_eq!(views[0].get(0, 0), Some(3));
        assert_eq!(views[0].get(0, 1), None);
        let legacy = net.with_refim_enabled(&[true, false]);
        let views = exchange_scheduled_indices(&legacy, &sched, &FeedbackConfig::default());
        assert!(views[0].is_empty() && views[1].is_empty());
    }

    #[test]
    fn protocol_byte_counts() {
        let net = build_linear_two_cell(2000.0, (200.0, 400.0), (700.0, 900.0), 1, spectrum(16), 1).unwrap();
        let mut stats = ProtocolStats::with_trace();
        stats.log_index_exchange(&net, 0);
        stats.log_publications(&net, &[2, 0], 0);
        assert_eq!(stats.index_messages, 2);
        assert_eq!(stats.index_bytes, 2 * 32);
        assert_eq!(stats.table_bytes, 2 * 4 * 16 * 4);
        let mut buf = Vec::new();
        stats.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("slot,sender,receiver,message_type,bytes\n0,1,0,scheduled_indices,32\n"));
    }
}
