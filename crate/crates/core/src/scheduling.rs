//! SINR and rate evaluation, proportional-fair weights and per-subchannel
//! weighted-rate argmax scheduling.

use serde::{Deserialize, Serialize};

use crate::channel::GainSnapshot;
use crate::power::PowerMatrix;
use crate::topology::Network;

/// Interference from every other BS plus noise at `user` on `subchannel`.
pub fn interference_plus_noise(
    gains: &GainSnapshot,
    powers: &PowerMatrix,
    user: usize,
    bs: usize,
    subchannel: usize,
) -> f64 {
    let mut acc = gains.noise(user, subchannel);
    for m in 0..gains.bss {
        if m != bs {
            acc += gains.gain(user, m, subchannel) * powers.get(m, subchannel);
        }
    }
    acc
}

/// γ = g^{k,n} p^n / (Σ_{m≠n} g^{k,m} p^m + σ).
pub fn sinr(gains: &GainSnapshot, powers: &PowerMatrix, user: usize, bs: usize, subchannel: usize) -> f64 {
    gains.gain(user, bs, subchannel) * powers.get(bs, subchannel)
        / interference_plus_noise(gains, powers, user, bs, subchannel)
}

/// log₂(1 + γ/Γ), bits/s/Hz.
pub fn spectral_efficiency(gamma: f64, gap: f64) -> f64 {
    (gamma / gap).ln_1p() / std::f64::consts::LN_2
}

/// (B/S)·log₂(1 + γ/Γ) in bps.
pub fn rate(gamma: f64, gap: f64, subchannel_bw_hz: f64) -> f64 {
    subchannel_bw_hz * spectral_efficiency(gamma, gap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Utility {
    Log,
    AlphaFair { alpha: f64 },
}

impl Utility {
    /// Marginal utility at throughput `r`.
    pub fn weight(&self, r: f64) -> f64 {
        match *self {
            Utility::Log => 1.0 / r,
            Utility::AlphaFair { alpha } => r.powf(-alpha),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    /// EWMA throughput R_k, bps.
    pub avg_throughput_bps: f64,
}

pub fn update_weights(states: &[UserState], utility: Utility) -> Vec<f64> {
    states.iter().map(|s| utility.weight(s.avg_throughput_bps)).collect()
}

/// R_k ← (1−β)R_k + β·served_k.
pub fn update_throughput(states: &mut [UserState], served_bps: &[f64], beta: f64) {
    debug_assert!(beta > 0.0 && beta <= 1.0);
    for (st, &r) in states.iter_mut().zip(served_bps) {
        st.avg_throughput_bps = (1.0 - beta) * st.avg_throughput_bps + beta * r;
    }
}

/// Scheduled user per (BS, subchannel), or `None`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleMap {
    pub bss: usize,
    pub subchannels: usize,
    entries: Vec<Option<usize>>,
}

impl ScheduleMap {
    pub fn empty(bss: usize, subchannels: usize) -> ScheduleMap {
        ScheduleMap {
            bss,
            subchannels,
            entries: vec![None; bss * subchannels],
        }
    }

    pub fn get(&self, bs: usize, subchannel: usize) -> Option<usize> {
        self.entries[bs * self.subchannels + subchannel]
    }

    pub fn set(&mut self, bs: usize, subchannel: usize, user: Option<usize>) {
        self.entries[bs * self.subchannels + subchannel] = user;
    }

    pub fn set_bs(&mut self, bs: usize, users: &[Option<usize>]) {
        self.entries[bs * self.subchannels..(bs + 1) * self.subchannels].copy_from_slice(users);
    }

    pub fn row(&self, bs: usize) -> &[Option<usize>] {
        &self.entries[bs * self.subchannels..(bs + 1) * self.subchannels]
    }

    /// I_s^{k,n}.
    pub fn indicator(&self, user: usize, bs: usize, subchannel: usize) -> bool {
        self.get(bs, subchannel) == Some(user)
    }

    /// Number of (n, s) entries violating the one-user-per-subchannel rule or
    /// scheduling a user of another cell.
    pub fn violations(&self, net: &Network) -> usize {
        let mut bad = 0;
        for n in 0..self.bss {
            for s in 0..self.subchannels {
                if let Some(k) = self.get(n, s) {
                    if k >= net.user_count() || net.users[k].serving_bs != n {
                        bad += 1;
                    }
                }
            }
        }
        bad
    }
}

/// Per-subchannel PF choice for one BS: `k(n,s) = argmax_{k∈𝒦ₙ} w_k·r_s^{k,n}(p_s)`.
///
/// Subchannels with a zero mask are left unscheduled. When the BS's own
/// evaluation power on a subchannel is zero every rate is zero, so users are
/// ranked by the p→0⁺ limit of the same argmax, `w_k·g^{k,n}/(I+σ)`.
/// Ties go to the lowest user index.
pub fn schedule_users(
    net: &Network,
    bs: usize,
    gains: &GainSnapshot,
    powers: &PowerMatrix,
    weights: &[f64],
    gap: f64,
) -> Vec<Option<usize>> {
    let members = net.users_of(bs);
    (0..gains.subchannels)
        .map(|s| {
            if powers.mask(bs, s) <= 0.0 || members.is_empty() {
                return None;
            }
            let own = powers.get(bs, s);
            let mut best: Option<(usize, f64)> = None;
            for &k in members {
                let inr = interference_plus_noise(gains, powers, k, bs, s);
                let score = if own > 0.0 {
                    weights[k] * spectral_efficiency(gains.gain(k, bs, s) * own / inr, gap)
                } else {
                    weights[k] * gains.gain(k, bs, s) / inr
                };
                match best {
                    Some((_, b)) if score <= b => {}
                    _ => best = Some((k, score)),
                }
            }
            best.map(|(k, _)| k)
        })
        .collect()
}

/// Schedules every BS against the same evaluation powers.
pub fn schedule_all(net: &Network, gains: &GainSnapshot, powers: &PowerMatrix, weights: &[f64], gap: f64) -> ScheduleMap {
    let mut map = ScheduleMap::empty(net.bs_count(), net.subchannels());
    for n in 0..net.bs_count() {
        map.set_bs(n, &schedule_users(net, n, gains, powers, weights, gap));
    }
    map
}

/// h(p, I) = Σ_n Σ_s w_{k(n,s)} log₂(1 + γ/Γ), in bits/s/Hz units.
pub fn objective(gains: &GainSnapshot, powers: &PowerMatrix, schedule: &ScheduleMap, weights: &[f64], gap: f64) -> f64 {
    let mut h = 0.0;
    for n in 0..schedule.bss {
        for s in 0..schedule.subchannels {
            if let Some(k) = schedule.get(n, s) {
                h += weights[k] * spectral_efficiency(sinr(gains, powers, k, n, s), gap);
            }
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_linear_two_cell, Spectrum};

    fn powers_from(rows: &[&[f64]]) -> PowerMatrix {
        let s = rows[0].len();
        let mut p = PowerMatrix::new(vec![100.0; rows.len()], vec![100.0; rows.len() * s], s);
        for (n, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                p.set(n, j, v);
            }
        }
        p
    }

    #[test]
    fn sinr_matches_direct_arithmetic() {
        // g=2, p=3 from BS 0; interference 1 W·1 from BS 1; σ=0.5
        let g = GainSnapshot::from_fn(1, 2, 1, |_, n, _| if n == 0 { 2.0 } else { 1.0 }, |_, _| 0.5);
        let p = powers_from(&[&[3.0], &[1.0]]);
        assert!((sinr(&g, &p, 0, 0, 0) - 4.0).abs() < 1e-12);
        let p0 = powers_from(&[&[0.0], &[1.0]]);
        assert_eq!(sinr(&g, &p0, 0, 0, 0), 0.0);
        let single = GainSnapshot::from_fn(1, 1, 1, |_, _, _| 1.0, |_, _| 1.0);
        assert_eq!(sinr(&single, &powers_from(&[&[1.0]]), 0, 0, 0), 1.0);
    }

    #[test]
    fn rate_spot_values() {
        assert!((rate(1.0, 1.0, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(rate(0.0, 1.0, 1.0), 0.0);
        assert!((rate(3.0, 1.0, 1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn weights_follow_utility() {
        let states = [UserState { avg_throughput_bps: 2.0 }, UserState { avg_throughput_bps: 2.0 }];
        let w = update_weights(&states, Utility::Log);
        assert_eq!(w, vec![0.5, 0.5]);
        let wa = update_weights(&states, Utility::AlphaFair { alpha: 1.0 });
        assert_eq!(wa, w);
    }

    #[test]
    fn throughput_ewma() {
        let mut st = [UserState { avg_throughput_bps: 1.0 }];
        update_throughput(&mut st, &[3.0], 0.5);
        assert_eq!(st[0].avg_throughput_bps, 2.0);
        update_throughput(&mut st, &[7.0], 1.0);
        assert_eq!(st[0].avg_throughput_bps, 7.0);
        let mut st = [UserState { avg_throughput_bps: 1.0 }];
        for _ in 0..10 {
            update_throughput(&mut st, &[0.0], 0.001);
        }
        assert!((st[0].avg_throughput_bps - 0.999f64.powi(10)).abs() < 1e-15);
    }

    fn two_cell() -> Network {
        build_linear_two_cell(2000.0, (200.0, 400.0), (700.0, 900.0), 1, Spectrum { subchannels: 1, bandwidth_hz: 1.0 }, 1)
            .unwrap()
    }

    #[test]
    fn argmax_and_tie_break() {
        let net = two_cell();
        // users 0 and 1 belong to BS 0; equal gains, weights decide
        let g = GainSnapshot::from_fn(4, 2, 1, |_, n, _| if n == 0 { 1.0 } else { 1e-3 }, |_, _| 1.0);
        let p = powers_from(&[&[1.0], &[1.0]]);
        let picked = schedule_users(&net, 0, &g, &p, &[0.3, 0.7, 1.0, 1.0], 1.0);
        assert_eq!(picked, vec![Some(1)]);
        let tie = schedule_users(&net, 0, &g, &p, &[1.0, 1.0, 1.0, 1.0], 1.0);
        assert_eq!(tie, vec![Some(0)]);
    }

    #[test]
    fn zero_power_uses_limit_ranking() {
        let net = two_cell();
        let g = GainSnapshot::from_fn(4, 2, 1, |k, n, _| if n == 0 { 1.0 + k as f64 } else { 1e-3 }, |_, _| 1.0);
        let p = powers_from(&[&[0.0], &[1.0]]);
        assert_eq!(schedule_users(&net, 0, &g, &p, &[1.0; 4], 1.0), vec![Some(1)]);
    }

    #[test]
    fn violations_detect_foreign_user() {
        let net = two_cell();
        let mut map = ScheduleMap::empty(2, 1);
        map.set(0, 0, Some(0));
        map.set(1, 0, Some(2));
        assert_eq!(map.violations(&net), 0);
        map.set(1, 0, Some(0));
        assert_eq!(map.violations(&net), 1);
    }
}
