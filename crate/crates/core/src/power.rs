//! Per-BS power allocation.
//!
//! * EQ spreads the budget evenly over the usable subchannels.
//! * WF water-fills against the measured interference of the scheduled users.
//! * REFIM adds a per-subchannel tax for the harm done to the reference user
//!   and solves the clipped KKT fixed point
//!   `p_s = [w_s/(λ ln2 + t_s) − (I_s+σ_s)/g_s]_0^{mask_s}` by bisection on λ.
//!
//! [`general_algorithm`] runs the looped scheduling/power variant with
//! configurable iteration caps; with caps (1, 1) it collapses to one REFIM step.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::GainSnapshot;
use crate::reference::{self, CandidateTables, FeedbackConfig, ReferenceUser};
use crate::scheduling::{self, interference_plus_noise, ScheduleMap};
use crate::topology::Network;
use crate::{Error, Result};

const LN2: f64 = std::f64::consts::LN_2;

/// Transmit powers p_s^n with their budgets and spectral masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerMatrix {
    subchannels: usize,
    budgets: Vec<f64>,
    masks: Vec<f64>,
    p: Vec<f64>,
}

impl PowerMatrix {
    /// All-zero powers. `masks` is row-major (BS, subchannel).
    pub fn new(budgets: Vec<f64>, masks: Vec<f64>, subchannels: usize) -> PowerMatrix {
        assert_eq!(masks.len(), budgets.len() * subchannels);
        let p = vec![0.0; masks.len()];
        PowerMatrix {
            subchannels,
            budgets,
            masks,
            p,
        }
    }

    pub fn from_network(net: &Network) -> PowerMatrix {
        let budgets = net.base_stations.iter().map(|b| b.max_power_w).collect();
        let masks = net.base_stations.iter().flat_map(|b| b.mask_w.iter().copied()).collect();
        PowerMatrix::new(budgets, masks, net.subchannels())
    }

    pub fn bss(&self) -> usize {
        self.budgets.len()
    }

    pub fn subchannels(&self) -> usize {
        self.subchannels
    }

    #[inline]
    pub fn get(&self, bs: usize, subchannel: usize) -> f64 {
        self.p[bs * self.subchannels + subchannel]
    }

    pub fn set(&mut self, bs: usize, subchannel: usize, watts: f64) {
        self.p[bs * self.subchannels + subchannel] = watts;
    }

    pub fn row(&self, bs: usize) -> &[f64] {
        &self.p[bs * self.subchannels..(bs + 1) * self.subchannels]
    }

    pub fn set_row(&mut self, bs: usize, watts: &[f64]) {
        self.p[bs * self.subchannels..(bs + 1) * self.subchannels].copy_from_slice(watts);
    }

    pub fn budget(&self, bs: usize) -> f64 {
        self.budgets[bs]
    }

    pub fn mask(&self, bs: usize, subchannel: usize) -> f64 {
        self.masks[bs * self.subchannels + subchannel]
    }

    pub fn masks_row(&self, bs: usize) -> &[f64] {
        &self.masks[bs * self.subchannels..(bs + 1) * self.subchannels]
    }

    pub fn set_mask(&mut self, bs: usize, subchannel: usize, watts: f64) {
        self.masks[bs * self.subchannels + subchannel] = watts;
    }

    pub fn total(&self, bs: usize) -> f64 {
        self.row(bs).iter().sum()
    }

    /// Count of budget and mask violations at relative tolerance `rel_tol`.
    pub fn violations(&self, rel_tol: f64) -> usize {
        let mut bad = 0;
        for n in 0..self.bss() {
            if self.total(n) > self.budgets[n] * (1.0 + rel_tol) {
                bad += 1;
            }
            for s in 0..self.subchannels {
                let p = self.get(n, s);
                let mask = self.mask(n, s);
                if !(p >= 0.0) || p > mask * (1.0 + rel_tol) + f64::MIN_POSITIVE {
                    bad += 1;
                }
            }
        }
        bad
    }

    pub fn max_abs_diff(&self, other: &PowerMatrix) -> f64 {
        self.p
            .iter()
            .zip(&other.p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Same budgets and masks, zero powers.
    pub fn zeroed(&self) -> PowerMatrix {
        PowerMatrix {
            p: vec![0.0; self.p.len()],
            ..self.clone()
        }
    }
}

/// `min(P^max / |usable|, mask_s)` on every subchannel with a positive mask.
pub fn equal_power(budget: f64, masks: &[f64]) -> Vec<f64> {
    let usable = masks.iter().filter(|&&m| m > 0.0).count();
    if usable == 0 {
        return vec![0.0; masks.len()];
    }
    let share = budget / usable as f64;
    masks.iter().map(|&m| if m > 0.0 { share.min(m) } else { 0.0 }).collect()
}

/// t = w_ref·g^{ref,n}·γ_ref / (received signal + interference + noise at the
/// reference user), from the fed-back quantities (F0)–(F3).
pub fn taxation_from_feedback(weight: f64, cross_gain: f64, signal_w: f64, inr_w: f64) -> f64 {
    if !(inr_w > 0.0) {
        return 0.0;
    }
    let gamma = signal_w / inr_w;
    weight * cross_gain * gamma / (signal_w + inr_w)
}

/// Sum of the per-reference taxation terms; zero without references.
pub fn taxation_term(references: &[ReferenceUser]) -> f64 {
    references
        .iter()
        .map(|r| taxation_from_feedback(r.weight, r.cross_gain, r.signal_w, r.inr_w))
        .sum()
}

/// Clipped KKT power `[w/(λ ln2 + t) − (I+σ)/g]_0^{mask}`.
///
/// A zero denominator means an unbounded water level; the mask clamps it.
pub fn kkt_power(weight: f64, lambda: f64, tax: f64, inr_over_gain: f64, mask: f64) -> f64 {
    if weight <= 0.0 || mask <= 0.0 {
        return 0.0;
    }
    let denom = lambda * LN2 + tax;
    if denom <= 0.0 {
        return mask;
    }
    (weight / denom - inr_over_gain).clamp(0.0, mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionSettings {
    /// Budget tolerance δ relative to P^max.
    pub budget_tol_rel: f64,
    /// λ tolerance relative to λ_max.
    pub lambda_tol_rel: f64,
    pub max_doublings: u32,
}

impl Default for BisectionSettings {
    fn default() -> Self {
        BisectionSettings {
            budget_tol_rel: 1e-6,
            lambda_tol_rel: 1e-9,
            max_doublings: 64,
        }
    }
}

/// Inputs of one BS's allocation problem, one entry per subchannel.
#[derive(Debug, Clone, PartialEq)]
pub struct BsProblem {
    pub weights: Vec<f64>,
    pub taxes: Vec<f64>,
    /// (I + σ)/g at the scheduled user.
    pub inr_over_gain: Vec<f64>,
    /// σ/g at the scheduled user, used for λ_max.
    pub noise_over_gain: Vec<f64>,
    pub masks: Vec<f64>,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub powers: Vec<f64>,
    pub lambda: f64,
    pub iterations: u32,
    /// ⌈log₂(λ_max/δ_λ)⌉ for the final bracket.
    pub iteration_bound: u32,
}

impl Allocation {
    pub fn within_bound(&self) -> bool {
        self.iterations <= self.iteration_bound
    }
}

/// Smallest λ that forces every power to zero without taxes, using noise only:
/// `max_s w_s·g_s/(σ_s ln2)`.
pub fn lambda_upper_bound(weights: &[f64], noise_over_gain: &[f64], masks: &[f64]) -> f64 {
    weights
        .iter()
        .zip(noise_over_gain)
        .zip(masks)
        .filter(|((&w, _), &m)| w > 0.0 && m > 0.0)
        .map(|((&w, &x), _)| w / (x * LN2))
        .fold(0.0, f64::max)
}

fn powers_at(problem: &BsProblem, lambda: f64) -> Vec<f64> {
    (0..problem.weights.len())
        .map(|s| {
            kkt_power(
                problem.weights[s],
                lambda,
                problem.taxes[s],
                problem.inr_over_gain[s],
                problem.masks[s],
            )
        })
        .collect()
}

/// Bisection on λ ∈ [0, λ_max] until the budget is met within δ.
///
/// If the λ = 0 allocation already fits the budget it is returned as is (the
/// BS leaves power unused). The returned powers always satisfy the budget
/// within δ.
pub fn allocate_bisection(
    bs: usize,
    problem: &BsProblem,
    lambda_max: f64,
    settings: &BisectionSettings,
) -> Result<Allocation> {
    let budget = problem.budget;
    let delta = settings.budget_tol_rel * budget;
    let at_zero = powers_at(problem, 0.0);
    if at_zero.iter().sum::<f64>() <= budget {
        return Ok(Allocation {
            powers: at_zero,
            lambda: 0.0,
            iterations: 0,
            iteration_bound: 0,
        });
    }
    let mut hi = if lambda_max > 0.0 && lambda_max.is_finite() {
        lambda_max
    } else {
        1.0
    };
    let mut doublings = 0;
    loop {
        let sum: f64 = powers_at(problem, hi).iter().sum();
        if sum <= budget {
            break;
        }
        if doublings >= settings.max_doublings {
            return Err(Error::Bracket {
                bs,
                lambda_max: hi,
                sum,
                budget,
            });
        }
        hi *= 2.0;
        doublings += 1;
    }
    let lambda_tol = settings.lambda_tol_rel * hi;
    let iteration_bound = (hi / lambda_tol).log2().ceil() as u32;
    let (mut a, mut b) = (0.0, hi);
    let mut iterations = 0;
    while b - a > lambda_tol {
        let lambda = 0.5 * (a + b);
        iterations += 1;
        let p = powers_at(problem, lambda);
        let sum: f64 = p.iter().sum();
        if (sum - budget).abs() < delta {
            return Ok(Allocation {
                powers: p,
                lambda,
                iterations,
                iteration_bound,
            });
        }
        if sum > budget {
            a = lambda;
        } else {
            b = lambda;
        }
    }
    Ok(Allocation {
        powers: powers_at(problem, b),
        lambda: b,
        iterations,
        iteration_bound,
    })
}

/// Read-only inputs shared by every BS within a slot.
#[derive(Debug, Clone, Copy)]
pub struct SlotContext<'a> {
    pub net: &'a Network,
    pub gains: &'a GainSnapshot,
    pub weights: &'a [f64],
    pub gap: f64,
}

/// Builds BS `bs`'s problem from its schedule, the evaluation powers of every
/// BS and per-subchannel taxes.
pub fn build_bs_problem(
    ctx: &SlotContext<'_>,
    bs: usize,
    schedule: &ScheduleMap,
    eval: &PowerMatrix,
    taxes: &[f64],
) -> BsProblem {
    let s_count = eval.subchannels();
    let mut weights = vec![0.0; s_count];
    let mut inr_over_gain = vec![f64::INFINITY; s_count];
    let mut noise_over_gain = vec![f64::INFINITY; s_count];
    for s in 0..s_count {
        if let Some(k) = schedule.get(bs, s) {
            let g = ctx.gains.gain(k, bs, s);
            weights[s] = ctx.weights[k];
            inr_over_gain[s] = interference_plus_noise(ctx.gains, eval, k, bs, s) / g;
            noise_over_gain[s] = ctx.gains.noise(k, s) / g;
        }
    }
    BsProblem {
        weights,
        taxes: taxes.to_vec(),
        inr_over_gain,
        noise_over_gain,
        masks: eval.masks_row(bs).to_vec(),
        budget: eval.budget(bs),
    }
}

pub fn solve_bs_problem(bs: usize, problem: &BsProblem, settings: &BisectionSettings) -> Result<Allocation> {
    let lambda_max = lambda_upper_bound(&problem.weights, &problem.noise_over_gain, &problem.masks);
    if lambda_max == 0.0 {
        // nothing scheduled anywhere on this BS
        return Ok(Allocation {
            powers: vec![0.0; problem.weights.len()],
            lambda: 0.0,
            iterations: 0,
            iteration_bound: 0,
        });
    }
    allocate_bisection(bs, problem, lambda_max, settings)
}

/// Selfish water-filling for one BS against the evaluation powers.
pub fn wf_step(
    ctx: &SlotContext<'_>,
    bs: usize,
    schedule: &ScheduleMap,
    eval: &PowerMatrix,
    settings: &BisectionSettings,
) -> Result<Allocation> {
    let taxes = vec![0.0; eval.subchannels()];
    solve_bs_problem(bs, &build_bs_problem(ctx, bs, schedule, eval, &taxes), settings)
}

/// One REFIM allocation for BS `bs`: measured interference and taxes are both
/// frozen at the previous-slot powers `prev`, then one bisection.
pub fn refim_step(
    ctx: &SlotContext<'_>,
    bs: usize,
    schedule: &ScheduleMap,
    references: &[Vec<ReferenceUser>],
    prev: &PowerMatrix,
    settings: &BisectionSettings,
) -> Result<Allocation> {
    let taxes: Vec<f64> = references.iter().map(|r| taxation_term(r)).collect();
    solve_bs_problem(bs, &build_bs_problem(ctx, bs, schedule, prev, &taxes), settings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialPower {
    Uniform,
    Random,
    Previous,
}

/// Initial powers for a slot. `template` carries budgets and masks; `prev` is
/// p(t−1) and falls back to uniform when absent.
pub fn initial_power(
    strategy: InitialPower,
    template: &PowerMatrix,
    prev: Option<&PowerMatrix>,
    rng: &mut ChaCha8Rng,
) -> PowerMatrix {
    let mut out = template.zeroed();
    match (strategy, prev) {
        (InitialPower::Previous, Some(p)) => {
            for n in 0..out.bss() {
                out.set_row(n, p.row(n));
            }
        }
        (InitialPower::Random, _) => {
            for n in 0..out.bss() {
                let masks = template.masks_row(n);
                let usable = masks.iter().filter(|&&m| m > 0.0).count().max(1);
                let cap = template.budget(n) / usable as f64;
                let mut row: Vec<f64> = masks
                    .iter()
                    .map(|&m| if m > 0.0 { rng.random_range(0.0..cap) } else { 0.0 })
                    .collect();
                let sum: f64 = row.iter().sum();
                if sum > 0.0 {
                    let scale = template.budget(n) / sum;
                    for (p, &m) in row.iter_mut().zip(masks) {
                        *p = (*p * scale).min(m);
                    }
                }
                out.set_row(n, &row);
            }
        }
        _ => {
            for n in 0..out.bss() {
                out.set_row(n, &equal_power(template.budget(n), template.masks_row(n)));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralSettings {
    pub sched_iters: usize,
    pub power_iters: usize,
    pub reference_count: usize,
    /// Max-norm power change, Watts, below which the power loop stops.
    pub power_tol_w: f64,
    pub bisection: BisectionSettings,
}

impl Default for GeneralSettings {
    fn default() -> Self {
        GeneralSettings {
            sched_iters: 1,
            power_iters: 1,
            reference_count: 1,
            power_tol_w: 1e-9,
            bisection: BisectionSettings::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneralOutcome {
    pub schedule: ScheduleMap,
    pub powers: PowerMatrix,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// h(p, I) after each outer iteration.
    pub objective_trace: Vec<f64>,
    pub allocations: Vec<Allocation>,
}

/// The looped scheduling/power algorithm.
///
/// Outer loop: schedule against the current powers and pick references.
/// Inner loop: re-measure the references' feedback at the current powers,
/// recompute taxes, and let every BS re-solve its allocation, until the powers
/// stop moving or the cap is hit. BSs with `taxed[n] == false` water-fill.
/// Feedback is complete and instantaneous here (per-slot tables, no edge
/// filtering).
pub fn general_algorithm(
    ctx: &SlotContext<'_>,
    init: PowerMatrix,
    taxed: &[bool],
    feedback: &FeedbackConfig,
    settings: &GeneralSettings,
) -> Result<GeneralOutcome> {
    let net = ctx.net;
    let mut p = init;
    let mut prev_schedule: Option<ScheduleMap> = None;
    let mut objective_trace = Vec::new();
    let mut allocations = Vec::new();
    let mut inner_total = 0;
    let mut outer = 0;
    let mut schedule = ScheduleMap::empty(net.bs_count(), net.subchannels());
    let all_edge = vec![true; net.user_count()];
    let fresh = FeedbackConfig {
        period_slots: 1,
        nomadic_period_slots: None,
        mobile_period_slots: None,
        edge_only: false,
        reference_count: settings.reference_count,
        ..feedback.clone()
    };

    for _ in 0..settings.sched_iters.max(1) {
        outer += 1;
        schedule = scheduling::schedule_all(net, ctx.gains, &p, ctx.weights, ctx.gap);
        let views = reference::exchange_scheduled_indices(net, &schedule, &fresh);
        let tables = CandidateTables::snapshot_of(net, ctx.gains, &p, ctx.weights, &all_edge, &fresh, 0);
        let chosen: Vec<Vec<Vec<ReferenceUser>>> = (0..net.bs_count())
            .map(|n| {
                if taxed[n] {
                    reference::references_for_bs(net, n, &views[n], &tables, settings.reference_count)
                } else {
                    vec![Vec::new(); net.subchannels()]
                }
            })
            .collect();

        for _ in 0..settings.power_iters.max(1) {
            inner_total += 1;
            let tables = CandidateTables::snapshot_of(net, ctx.gains, &p, ctx.weights, &all_edge, &fresh, 0);
            let mut next = p.zeroed();
            #[allow(clippy::needless_range_loop)]
            for n in 0..net.bs_count() {
                let refreshed: Vec<Vec<ReferenceUser>> = chosen[n]
                    .iter()
                    .map(|refs| refs.iter().filter_map(|r| tables.remeasure(net, r, n)).collect())
                    .collect();
                let alloc = refim_step(ctx, n, &schedule, &refreshed, &p, &settings.bisection)?;
                next.set_row(n, &alloc.powers);
                allocations.push(alloc);
            }
            let change = next.max_abs_diff(&p);
            p = next;
            if change < settings.power_tol_w {
                break;
            }
        }
        objective_trace.push(scheduling::objective(ctx.gains, &p, &schedule, ctx.weights, ctx.gap));
        if prev_schedule.as_ref() == Some(&schedule) {
            break;
        }
        prev_schedule = Some(schedule.clone());
    }
    Ok(GeneralOutcome {
        schedule,
        powers: p,
        outer_iterations: outer,
        inner_iterations: inner_total,
        objective_trace,
        allocations,
    })
}
