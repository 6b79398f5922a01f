//! Exhaustive joint optimizer for tiny instances.
//!
//! Every BS's per-subchannel power is drawn from `{0, 1/(L−1), …, 1}·mask`,
//! combinations over budget are dropped, and every schedule is tried. The best
//! weighted sum rate is the yardstick the distributed algorithms are compared
//! against.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, GainSnapshot, PropagationConfig};
use crate::power::{self, equal_power, BisectionSettings, PowerMatrix, SlotContext};
use crate::reference::{self, CandidateTables, FeedbackConfig};
use crate::rng::{self, Stream};
use crate::scheduling::{self, ScheduleMap};
use crate::topology::{BaseStation, Coverage, Mobility, Network, Point, Spectrum, Tier, User};
use crate::{dbm_to_watts, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Power levels per subchannel, including zero and the mask.
    pub levels: usize,
    /// Largest number of (power, schedule) combinations we agree to enumerate.
    pub cap: u128,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            levels: 9,
            cap: 10_000_000,
        }
    }
}

/// Weighted sum rate and the arguments that achieve it.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub objective: f64,
    pub powers: PowerMatrix,
    pub schedule: ScheduleMap,
    pub evaluated: u128,
}

/// `L^(N·S) · Π_n |K_n|^S`, saturating.
pub fn combinations(net: &Network, grid: &GridSpec) -> u128 {
    let s = net.subchannels() as u32;
    let mut total: u128 = 1;
    for n in 0..net.bs_count() {
        let users = net.users_of(n).len().max(1) as u128;
        total = total
            .saturating_mul((grid.levels as u128).saturating_pow(s))
            .saturating_mul(users.saturating_pow(s));
    }
    total
}

/// Odometer over mixed radices; returns false after the last combination.
fn advance(digits: &mut [usize], radices: &[usize]) -> bool {
    for i in (0..digits.len()).rev() {
        digits[i] += 1;
        if digits[i] < radices[i] {
            return true;
        }
        digits[i] = 0;
    }
    false
}

/// Budget-feasible power rows for one BS, in lexicographic level order.
fn feasible_rows(template: &PowerMatrix, bs: usize, levels: usize) -> Vec<Vec<f64>> {
    let s = template.subchannels();
    let masks = template.masks_row(bs);
    let budget = template.budget(bs);
    let step = |l: usize, m: f64| if levels <= 1 { m } else { m * l as f64 / (levels - 1) as f64 };
    let mut digits = vec![0; s];
    let radices = vec![levels.max(1); s];
    let mut rows = Vec::new();
    loop {
        let row: Vec<f64> = (0..s).map(|j| step(digits[j], masks[j])).collect();
        if row.iter().sum::<f64>() <= budget * (1.0 + 1e-12) {
            rows.push(row);
        }
        if !advance(&mut digits, &radices) {
            break;
        }
    }
    rows
}

/// The discrete maximum of the weighted sum rate over the grid and all
/// schedules. Ties keep the lexicographically first (powers, schedule).
pub fn brute_force(
    net: &Network,
    gains: &GainSnapshot,
    weights: &[f64],
    template: &PowerMatrix,
    gap: f64,
    grid: &GridSpec,
) -> Result<OracleSolution> {
    let total = combinations(net, grid);
    if total > grid.cap || grid.levels == 0 {
        return Err(Error::InstanceTooLarge {
            combinations: total,
            cap: grid.cap,
            detail: format!(
                "{} BSs, {} subchannels, users per BS {:?}, {} levels",
                net.bs_count(),
                net.subchannels(),
                (0..net.bs_count()).map(|n| net.users_of(n).len()).collect::<Vec<_>>(),
                grid.levels
            ),
        });
    }
    let n_bs = net.bs_count();
    let s_count = net.subchannels();
    let rows: Vec<Vec<Vec<f64>>> = (0..n_bs).map(|n| feasible_rows(template, n, grid.levels)).collect();
    let power_radices: Vec<usize> = rows.iter().map(|r| r.len()).collect();
    // one schedule digit per (BS, subchannel); cells without users stay empty
    let sched_radices: Vec<usize> = (0..n_bs)
        .flat_map(|n| std::iter::repeat_n(net.users_of(n).len().max(1), s_count))
        .collect();

    let mut best: Option<OracleSolution> = None;
    let mut evaluated: u128 = 0;
    let mut p_digits = vec![0; n_bs];
    let mut p = template.zeroed();
    loop {
        for n in 0..n_bs {
            p.set_row(n, &rows[n][p_digits[n]]);
        }
        let mut s_digits = vec![0; sched_radices.len()];
        loop {
            let mut schedule = ScheduleMap::empty(n_bs, s_count);
            for n in 0..n_bs {
                let members = net.users_of(n);
                for s in 0..s_count {
                    if !members.is_empty() {
                        schedule.set(n, s, Some(members[s_digits[n * s_count + s]]));
                    }
                }
            }
            let h = scheduling::objective(gains, &p, &schedule, weights, gap);
            evaluated += 1;
            if best.as_ref().is_none_or(|b| h > b.objective) {
                best = Some(OracleSolution {
                    objective: h,
                    powers: p.clone(),
                    schedule,
                    evaluated: 0,
                });
            }
            if !advance(&mut s_digits, &sched_radices) {
                break;
            }
        }
        if !advance(&mut p_digits, &power_radices) {
            break;
        }
    }
    let mut best = best.expect("at least the all-zero power row is feasible");
    best.evaluated = evaluated;
    Ok(best)
}

/// Maximum of the weighted sum rate over all schedules at fixed powers.
pub fn exhaustive_schedule(
    net: &Network,
    gains: &GainSnapshot,
    powers: &PowerMatrix,
    weights: &[f64],
    gap: f64,
) -> (f64, ScheduleMap) {
    let n_bs = net.bs_count();
    let s_count = net.subchannels();
    let radices: Vec<usize> = (0..n_bs)
        .flat_map(|n| std::iter::repeat_n(net.users_of(n).len().max(1), s_count))
        .collect();
    let mut digits = vec![0; radices.len()];
    let mut best = (f64::NEG_INFINITY, ScheduleMap::empty(n_bs, s_count));
    loop {
        let mut schedule = ScheduleMap::empty(n_bs, s_count);
        for n in 0..n_bs {
            let members = net.users_of(n);
            for s in 0..s_count {
                if !members.is_empty() {
                    schedule.set(n, s, Some(members[digits[n * s_count + s]]));
                }
            }
        }
        let h = scheduling::objective(gains, powers, &schedule, weights, gap);
        if h > best.0 {
            best = (h, schedule);
        }
        if !advance(&mut digits, &radices) {
            break;
        }
    }
    best
}

/// Parameters of a random toy instance: BSs 1 km apart on a line, users
/// uniform in a disc around their BS, real path loss, shadowing and fading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToySpec {
    pub bss: usize,
    pub subchannels: usize,
    pub users_per_cell: usize,
    pub bs_spacing_m: f64,
    pub cell_radius_m: f64,
    pub max_power_dbm: f64,
    pub subchannel_bandwidth_hz: f64,
    /// Random per-user weights in [0.5, 2]; otherwise all weights are 1.
    pub random_weights: bool,
    pub seed: u64,
    pub grid: GridSpec,
    /// Static iterations the distributed algorithms get from uniform power.
    pub iterations: usize,
}

impl Default for ToySpec {
    fn default() -> Self {
        ToySpec {
            bss: 2,
            subchannels: 2,
            users_per_cell: 1,
            bs_spacing_m: 1000.0,
            cell_radius_m: 500.0,
            max_power_dbm: 43.0,
            subchannel_bandwidth_hz: 625e3,
            random_weights: false,
            seed: 1,
            grid: GridSpec::default(),
            iterations: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyInstance {
    pub net: Network,
    pub gains: GainSnapshot,
    pub weights: Vec<f64>,
    pub template: PowerMatrix,
    pub gap: f64,
}

impl ToyInstance {
    pub fn context(&self) -> SlotContext<'_> {
        SlotContext {
            net: &self.net,
            gains: &self.gains,
            weights: &self.weights,
            gap: self.gap,
        }
    }
}

pub fn toy_instance(spec: &ToySpec) -> Result<ToyInstance> {
    if spec.bss == 0 || spec.subchannels == 0 || spec.users_per_cell == 0 {
        return Err(Error::Config("toy instance needs BSs, subchannels and users".into()));
    }
    if !(spec.cell_radius_m > 1.0 && spec.bs_spacing_m > 0.0 && spec.subchannel_bandwidth_hz > 0.0) {
        return Err(Error::Config("toy geometry and bandwidth must be positive".into()));
    }
    let spectrum = Spectrum {
        subchannels: spec.subchannels,
        bandwidth_hz: spec.subchannel_bandwidth_hz * spec.subchannels as f64,
    };
    let p_max = dbm_to_watts(spec.max_power_dbm);
    let base_stations: Vec<BaseStation> = (0..spec.bss)
        .map(|n| {
            let position = Point::new(n as f64 * spec.bs_spacing_m, 0.0);
            BaseStation {
                id: n,
                tier: Tier::Macro,
                position,
                max_power_w: p_max,
                mask_w: vec![p_max; spec.subchannels],
                refim_enabled: true,
                home: None,
                coverage: Coverage::Disc {
                    center: position,
                    radius: spec.cell_radius_m,
                },
            }
        })
        .collect();
    let mut rng = rng::stream(spec.seed, Stream::Users);
    let mut users = Vec::new();
    let mut cell_users = vec![Vec::new(); spec.bss];
    for (n, bs) in base_stations.iter().enumerate() {
        for _ in 0..spec.users_per_cell {
            // uniform over the annulus [10 m, radius]
            let r = (rng.random_range((10.0f64 / spec.cell_radius_m).powi(2)..1.0)).sqrt() * spec.cell_radius_m;
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let id = users.len();
            cell_users[n].push(id);
            users.push(User {
                id,
                position: Point::new(bs.position.x + r * a.cos(), bs.position.y + r * a.sin()),
                serving_bs: n,
                mobility: Mobility::Nomadic,
                indoor: false,
                home: None,
                group: None,
            });
        }
    }
    let neighbor_sets = (0..spec.bss).map(|n| (0..spec.bss).filter(|&m| m != n).collect()).collect();
    let net = Network {
        base_stations,
        users,
        neighbor_sets,
        spectrum,
        homes: Vec::new(),
        wrap_shifts: Vec::new(),
        cell_users,
    };
    net.validate()?;
    let propagation = PropagationConfig::default();
    let gains = ChannelModel::new(&net, &propagation, spec.seed).snapshot();
    let weights = if spec.random_weights {
        (0..net.user_count()).map(|_| rng.random_range(0.5..2.0)).collect()
    } else {
        vec![1.0; net.user_count()]
    };
    let template = PowerMatrix::from_network(&net);
    Ok(ToyInstance {
        net,
        gains,
        weights,
        template,
        gap: propagation.sinr_gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StaticAlgorithm {
    Eq,
    Wf,
    Refim,
}

/// Runs a distributed allocator on a frozen instance for `iterations` slots
/// from uniform power, each slot rescheduling and reallocating against the
/// previous powers. Returns the final (powers, schedule) and its objective.
pub fn iterate_static(
    inst: &ToyInstance,
    algo: StaticAlgorithm,
    iterations: usize,
    reference_count: usize,
) -> Result<(f64, PowerMatrix, ScheduleMap)> {
    let ctx = inst.context();
    let net = &inst.net;
    let mut p = inst.template.zeroed();
    for n in 0..net.bs_count() {
        p.set_row(n, &equal_power(p.budget(n), p.masks_row(n)));
    }
    let mut schedule = scheduling::schedule_all(net, &inst.gains, &p, &inst.weights, inst.gap);
    if algo == StaticAlgorithm::Eq {
        let h = scheduling::objective(&inst.gains, &p, &schedule, &inst.weights, inst.gap);
        return Ok((h, p, schedule));
    }
    let fb = FeedbackConfig {
        reference_count,
        ..FeedbackConfig::default()
    };
    let settings = BisectionSettings::default();
    let everyone = vec![true; net.user_count()];
    for _ in 0..iterations.max(1) {
        schedule = scheduling::schedule_all(net, &inst.gains, &p, &inst.weights, inst.gap);
        let mut next = p.zeroed();
        let (views, tables) = if algo == StaticAlgorithm::Refim {
            (
                reference::exchange_scheduled_indices(net, &schedule, &fb),
                CandidateTables::snapshot_of(net, &inst.gains, &p, &inst.weights, &everyone, &fb, 0),
            )
        } else {
            (Vec::new(), CandidateTables::new(net.user_count()))
        };
        #[allow(clippy::needless_range_loop)]
        for n in 0..net.bs_count() {
            let alloc = if algo == StaticAlgorithm::Refim {
                let refs = reference::references_for_bs(net, n, &views[n], &tables, reference_count);
                power::refim_step(&ctx, n, &schedule, &refs, &p, &settings)?
            } else {
                power::wf_step(&ctx, n, &schedule, &p, &settings)?
            };
            next.set_row(n, &alloc.powers);
        }
        p = next;
    }
    let h = scheduling::objective(&inst.gains, &p, &schedule, &inst.weights, inst.gap);
    Ok((h, p, schedule))
}

/// Oracle optimum and each allocator's objective on one toy instance.
#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub seed: u64,
    pub oracle: f64,
    pub eq: f64,
    pub wf: f64,
    pub refim: f64,
    pub evaluated: u128,
}

impl Comparison {
    pub fn ratio(&self, h: f64) -> f64 {
        if self.oracle > 0.0 {
            h / self.oracle
        } else {
            1.0
        }
    }
}

pub fn compare(spec: &ToySpec) -> Result<Comparison> {
    let inst = toy_instance(spec)?;
    let best = brute_force(&inst.net, &inst.gains, &inst.weights, &inst.template, inst.gap, &spec.grid)?;
    let run = |a| iterate_static(&inst, a, spec.iterations, 1).map(|r| r.0);
    Ok(Comparison {
        seed: spec.seed,
        oracle: best.objective,
        eq: run(StaticAlgorithm::Eq)?,
        wf: run(StaticAlgorithm::Wf)?,
        refim: run(StaticAlgorithm::Refim)?,
        evaluated: best.evaluated,
    })
}
