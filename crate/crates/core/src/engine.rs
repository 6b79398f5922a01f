//! Scenario description, the per-slot simulation loop, metrics and sweeps.
//!
//! Slot order: advance channel → snapshot → weights → initial powers →
//! schedule → refresh feedback tables → exchange indices → pick references →
//! taxes and bisection → served rates under the committed powers → EWMA.

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, GainSnapshot, PropagationConfig};
use crate::power::{
    self, build_bs_problem, equal_power, initial_power, solve_bs_problem, Allocation, BisectionSettings,
    GeneralSettings, InitialPower, PowerMatrix, SlotContext,
};
use crate::reference::{self, CandidateTables, FeedbackConfig, ProtocolStats};
use crate::rng::{self, Stream};
use crate::scheduling::{self, ScheduleMap, UserState, Utility};
use crate::topology::{
    self, DeploymentMix, Mobility, Network, PlacementGroup, Spectrum, Tier, TierUserCounts, Zone,
};
use crate::{db_to_linear, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Eq,
    Wf,
    Refim,
    /// Looped scheduling/power variant, caps in [`LoopCaps`].
    General,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Eq => "eq",
            Algorithm::Wf => "wf",
            Algorithm::Refim => "refim",
            Algorithm::General => "general",
        }
    }

    pub fn parse(s: &str) -> Result<Algorithm> {
        match s.to_ascii_lowercase().as_str() {
            "eq" => Ok(Algorithm::Eq),
            "wf" => Ok(Algorithm::Wf),
            "refim" => Ok(Algorithm::Refim),
            "general" => Ok(Algorithm::General),
            other => Err(Error::Config(format!("unknown algorithm '{other}' (eq, wf, refim, general)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopCaps {
    pub sched_iters: usize,
    pub power_iters: usize,
}

impl Default for LoopCaps {
    fn default() -> Self {
        LoopCaps {
            sched_iters: 1,
            power_iters: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumPolicy {
    Sharing,
    /// Macro/pico BSs use subchannels `[0, macro_subchannels)`, femtos the rest.
    Splitting { macro_subchannels: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    Hex {
        rings: usize,
        inter_site_distance_m: f64,
        wrap: bool,
        users_per_cell: usize,
    },
    TwoCell {
        bs_distance_m: f64,
        center_band_m: (f64, f64),
        edge_band_m: (f64, f64),
        users_per_group: usize,
    },
    Hetnet {
        rings: usize,
        inter_site_distance_m: f64,
        wrap: bool,
        femtos_per_macro: usize,
        home_size_m: f64,
        #[serde(default)]
        users: TierUserCounts,
        #[serde(default)]
        mix: DeploymentMix,
    },
    MixedDensity {
        zones: Vec<Zone>,
        users_per_cell: usize,
    },
    /// A network JSON document as written by [`Network::to_json`].
    File { path: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MobilitySpec {
    Nomadic,
    Mobile { speed_kmh: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceOptions {
    pub powers: bool,
    pub schedule: bool,
    pub protocol: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub network: NetworkSpec,
    pub spectrum: Spectrum,
    pub propagation: PropagationConfig,
    pub mobility: MobilitySpec,
    pub algorithm: Algorithm,
    pub loop_caps: LoopCaps,
    pub feedback: FeedbackConfig,
    pub initial_power: InitialPower,
    pub spectrum_policy: SpectrumPolicy,
    pub utility: Utility,
    pub ewma_beta: f64,
    pub initial_throughput_bps: f64,
    pub slots: u64,
    pub warmup_slots: u64,
    pub seed: u64,
    /// Share of BSs running REFIM, densest first; the rest water-fill.
    pub deployment_fraction: f64,
    /// Log-normal error on measured interference, dB standard deviation.
    pub measurement_noise_db: f64,
    pub bisection: BisectionSettings,
    /// Convergence threshold of the looped variant's power loop.
    pub power_tol_w: f64,
    pub trace: TraceOptions,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            network: NetworkSpec::Hex {
                rings: 2,
                inter_site_distance_m: 1000.0,
                wrap: true,
                users_per_cell: 20,
            },
            spectrum: Spectrum::default(),
            propagation: PropagationConfig::default(),
            mobility: MobilitySpec::Nomadic,
            algorithm: Algorithm::Refim,
            loop_caps: LoopCaps::default(),
            feedback: FeedbackConfig::default(),
            initial_power: InitialPower::Previous,
            spectrum_policy: SpectrumPolicy::Sharing,
            utility: Utility::Log,
            ewma_beta: 1e-3,
            initial_throughput_bps: 1e-3,
            slots: 2000,
            warmup_slots: 500,
            seed: 1,
            deployment_fraction: 1.0,
            measurement_noise_db: 0.0,
            bisection: BisectionSettings::default(),
            power_tol_w: 1e-9,
            trace: TraceOptions::default(),
        }
    }
}

pub const PRESETS: &[&str] = &["hex19", "two-cell", "hetnet5", "hetnet10", "mixed-density"];

impl Scenario {
    /// Named presets: `hex19`, `two-cell`, `hetnet5`, `hetnet10`, `mixed-density`.
    pub fn preset(name: &str) -> Result<Scenario> {
        let base = Scenario::default();
        let hetnet = |femtos| NetworkSpec::Hetnet {
            rings: 2,
            inter_site_distance_m: 1000.0,
            wrap: true,
            femtos_per_macro: femtos,
            home_size_m: 10.0,
            users: TierUserCounts::default(),
            mix: DeploymentMix::default(),
        };
        let sc = match name {
            "hex19" => base,
            "two-cell" => Scenario {
                network: NetworkSpec::TwoCell {
                    bs_distance_m: 2000.0,
                    center_band_m: (200.0, 400.0),
                    edge_band_m: (700.0, 900.0),
                    users_per_group: 5,
                },
                // groups are defined by distance; shadowing would blur them
                propagation: PropagationConfig {
                    macro_shadowing_db: 0.0,
                    ..base.propagation.clone()
                },
                ..base
            },
            "hetnet5" => Scenario {
                network: hetnet(5),
                ..base
            },
            "hetnet10" => Scenario {
                network: hetnet(10),
                ..base
            },
            "mixed-density" => Scenario {
                network: NetworkSpec::MixedDensity {
                    zones: topology::default_zones(500.0),
                    users_per_cell: 20,
                },
                ..base
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown preset '{other}' (known: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.slots == 0 {
            return bad("slots must be positive");
        }
        if self.warmup_slots >= self.slots {
            return bad("warmup_slots must be smaller than slots");
        }
        if !(self.ewma_beta > 0.0 && self.ewma_beta <= 1.0) {
            return bad("ewma_beta must lie in (0, 1]");
        }
        if !(self.initial_throughput_bps > 0.0) {
            return bad("initial_throughput_bps must be positive");
        }
        if !(0.0..=1.0).contains(&self.deployment_fraction) {
            return bad("deployment_fraction must lie in [0, 1]");
        }
        if !(self.measurement_noise_db >= 0.0) {
            return bad("measurement_noise_db must be non-negative");
        }
        if self.spectrum.subchannels == 0 || !(self.spectrum.bandwidth_hz > 0.0) {
            return bad("spectrum needs subchannels and a positive bandwidth");
        }
        if let SpectrumPolicy::Splitting { macro_subchannels } = self.spectrum_policy {
            if macro_subchannels > self.spectrum.subchannels {
                return bad("macro_subchannels exceeds the number of subchannels");
            }
        }
        if self.feedback.period_slots == 0 {
            return bad("feedback period must be at least one slot");
        }
        if let Utility::AlphaFair { alpha } = self.utility {
            if !(alpha >= 0.0) {
                return bad("alpha must be non-negative");
            }
        }
        if self.algorithm == Algorithm::General && (self.loop_caps.sched_iters == 0 || self.loop_caps.power_iters == 0)
        {
            return bad("loop caps must be at least 1");
        }
        if let MobilitySpec::Mobile { speed_kmh } = self.mobility {
            if !(speed_kmh >= 0.0) {
                return bad("speed must be non-negative");
            }
        }
        self.propagation.validate()
    }

    /// Builds the network, mobility and REFIM deployment described by the scenario.
    pub fn build_network(&self) -> Result<Network> {
        let seed = self.seed;
        let spectrum = self.spectrum;
        let net = match &self.network {
            NetworkSpec::Hex {
                rings,
                inter_site_distance_m,
                wrap,
                users_per_cell,
            } => {
                let grid = topology::build_hex_grid(*rings, *inter_site_distance_m, *wrap, spectrum)?;
                topology::place_users(
                    &grid,
                    TierUserCounts {
                        macro_users: *users_per_cell,
                        femto_users: 0,
                    },
                    seed,
                )?
            }
            NetworkSpec::TwoCell {
                bs_distance_m,
                center_band_m,
                edge_band_m,
                users_per_group,
            } => topology::build_linear_two_cell(
                *bs_distance_m,
                *center_band_m,
                *edge_band_m,
                *users_per_group,
                spectrum,
                seed,
            )?,
            NetworkSpec::Hetnet {
                rings,
                inter_site_distance_m,
                wrap,
                femtos_per_macro,
                home_size_m,
                users,
                mix,
            } => {
                let grid = topology::build_hex_grid(*rings, *inter_site_distance_m, *wrap, spectrum)?;
                let het = topology::build_heterogeneous(&grid, *femtos_per_macro, *mix, *home_size_m, seed)?;
                topology::place_users(&het, *users, seed)?
            }
            NetworkSpec::MixedDensity { zones, users_per_cell } => {
                let grid = topology::build_mixed_density(zones, spectrum)?;
                topology::place_users(
                    &grid,
                    TierUserCounts {
                        macro_users: *users_per_cell,
                        femto_users: 0,
                    },
                    seed,
                )?
            }
            NetworkSpec::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read network file {path}: {e}")))?;
                let net = Network::from_json(&text)?;
                if net.spectrum.subchannels != spectrum.subchannels {
                    return Err(Error::Config(format!(
                        "network file has {} subchannels, scenario {}",
                        net.spectrum.subchannels, spectrum.subchannels
                    )));
                }
                net
            }
        };
        let net = match self.mobility {
            MobilitySpec::Nomadic => topology::with_mobility(&net, Mobility::Nomadic),
            MobilitySpec::Mobile { speed_kmh } => topology::with_mobility(
                &net,
                Mobility::Mobile {
                    speed_mps: speed_kmh / 3.6,
                },
            ),
        };
        Ok(apply_deployment(net, self.deployment_fraction))
    }
}

/// Enables REFIM on the densest `ceil(fraction·N)` BSs.
pub fn apply_deployment(net: Network, fraction: f64) -> Network {
    let n = net.bs_count();
    let enabled_count = ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut enabled = vec![false; n];
    for &b in net.bs_by_density().iter().take(enabled_count) {
        enabled[b] = true;
    }
    net.with_refim_enabled(&enabled)
}

/// Budgets and the policy-adjusted masks, zero powers.
pub fn power_template(net: &Network, policy: SpectrumPolicy) -> PowerMatrix {
    let mut t = PowerMatrix::from_network(net);
    if let SpectrumPolicy::Splitting { macro_subchannels } = policy {
        for (n, bs) in net.base_stations.iter().enumerate() {
            for s in 0..net.subchannels() {
                let macro_band = s < macro_subchannels;
                let femto = bs.tier == Tier::Femto;
                if macro_band == femto {
                    t.set_mask(n, s, 0.0);
                }
            }
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserResult {
    pub id: usize,
    pub serving_bs: usize,
    pub tier: Tier,
    /// Mean served rate over the measured (post-warm-up) slots.
    pub throughput_bps: f64,
    /// EWMA R_k at the end of the run.
    pub final_ewma_bps: f64,
    pub is_edge: bool,
    pub group: Option<PlacementGroup>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub power_violations: u64,
    pub schedule_violations: u64,
    pub bisections: u64,
    pub bisection_bound_violations: u64,
    pub max_bisection_iterations: u32,
    pub max_bisection_bound: u32,
}

impl Counters {
    fn absorb(&mut self, a: &Allocation) {
        self.bisections += 1;
        if !a.within_bound() {
            self.bisection_bound_violations += 1;
        }
        self.max_bisection_iterations = self.max_bisection_iterations.max(a.iterations);
        self.max_bisection_bound = self.max_bisection_bound.max(a.iteration_bound);
    }
}

/// What happened in one slot.
#[derive(Debug, Clone)]
pub struct SlotOutcome {
    pub slot: u64,
    pub schedule: ScheduleMap,
    pub powers: PowerMatrix,
    /// Served rate per user, bps.
    pub served_bps: Vec<f64>,
    /// Served rate per (BS, subchannel), bps.
    pub link_rate_bps: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub slots: u64,
    pub warmup_slots: u64,
    pub users: Vec<UserResult>,
    pub gat_bps: f64,
    pub aet_bps: f64,
    pub aat_bps: f64,
    pub edge_fraction: f64,
    pub counters: Counters,
    pub protocol: ProtocolStats,
    #[serde(skip)]
    pub power_trace: Vec<(u64, PowerMatrix)>,
    #[serde(skip)]
    pub schedule_trace: Vec<(u64, ScheduleMap, Vec<f64>)>,
    #[serde(skip)]
    pub network: Option<Network>,
}

impl RunResult {
    pub fn throughputs(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.throughput_bps).collect()
    }
}

/// Geometric mean; zero (with a warning) when any throughput is zero.
pub fn gat(throughputs: &[f64]) -> f64 {
    if throughputs.is_empty() {
        return 0.0;
    }
    if throughputs.iter().any(|&r| r <= 0.0) {
        warn!("zero user throughput; geometric mean reported as 0");
        return 0.0;
    }
    (throughputs.iter().map(|r| r.ln()).sum::<f64>() / throughputs.len() as f64).exp()
}

/// Mean of the `⌈fraction·K⌉` smallest throughputs.
pub fn aet_with(throughputs: &[f64], fraction: f64) -> f64 {
    if throughputs.is_empty() {
        return 0.0;
    }
    let mut v = throughputs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = ((fraction * v.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    v[..m].iter().sum::<f64>() / m as f64
}

pub fn aet(throughputs: &[f64]) -> f64 {
    aet_with(throughputs, 0.05)
}

pub fn aat(throughputs: &[f64]) -> f64 {
    if throughputs.is_empty() {
        return 0.0;
    }
    throughputs.iter().sum::<f64>() / throughputs.len() as f64
}

/// The slot loop over one scenario, stepped by [`Simulation::step`].
pub struct Simulation {
    scenario: Scenario,
    net: Network,
    channel: ChannelModel,
    template: PowerMatrix,
    prev: Option<PowerMatrix>,
    states: Vec<UserState>,
    tables: CandidateTables,
    edge: Vec<bool>,
    init_rng: ChaCha8Rng,
    measurement_rng: ChaCha8Rng,
    slot: u64,
    served_sum: Vec<f64>,
    counters: Counters,
    protocol: ProtocolStats,
    power_trace: Vec<(u64, PowerMatrix)>,
    schedule_trace: Vec<(u64, ScheduleMap, Vec<f64>)>,
}

impl Simulation {
    pub fn new(scenario: &Scenario) -> Result<Simulation> {
        scenario.validate()?;
        let net = scenario.build_network()?;
        Simulation::with_network(scenario, net)
    }

    /// Runs `scenario` on a prebuilt network (mobility and deployment as given).
    pub fn with_network(scenario: &Scenario, net: Network) -> Result<Simulation> {
        scenario.validate()?;
        net.validate()?;
        if net.user_count() == 0 {
            return Err(Error::Config("network has no users".into()));
        }
        if net.subchannels() != scenario.spectrum.subchannels {
            return Err(Error::Config("network and scenario disagree on the subchannel count".into()));
        }
        let channel = ChannelModel::new(&net, &scenario.propagation, scenario.seed);
        let edge = topology::classify_edge_users(&net, &channel.mean_snapshot(), scenario.feedback.edge_threshold_db);
        let template = power_template(&net, scenario.spectrum_policy);
        let users = net.user_count();
        let protocol = if scenario.trace.protocol {
            ProtocolStats::with_trace()
        } else {
            ProtocolStats::default()
        };
        Ok(Simulation {
            scenario: scenario.clone(),
            channel,
            template,
            prev: None,
            states: vec![
                UserState {
                    avg_throughput_bps: scenario.initial_throughput_bps
                };
                users
            ],
            tables: CandidateTables::new(users),
            edge,
            init_rng: rng::stream(scenario.seed, Stream::InitialPower),
            measurement_rng: rng::stream(scenario.seed, Stream::Measurement),
            slot: 0,
            served_sum: vec![0.0; users],
            counters: Counters::default(),
            protocol,
            power_trace: Vec::new(),
            schedule_trace: Vec::new(),
            net,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn edge_flags(&self) -> &[bool] {
        &self.edge
    }

    pub fn user_states(&self) -> &[UserState] {
        &self.states
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    /// Solves one BS's allocation, applying measurement noise if configured.
    #[allow(clippy::too_many_arguments)]
    fn allocate(
        scenario: &Scenario,
        counters: &mut Counters,
        measurement_rng: &mut ChaCha8Rng,
        ctx: &SlotContext<'_>,
        bs: usize,
        schedule: &ScheduleMap,
        eval: &PowerMatrix,
        taxes: &[f64],
    ) -> Result<Vec<f64>> {
        let mut problem = build_bs_problem(ctx, bs, schedule, eval, taxes);
        let sigma = scenario.measurement_noise_db;
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("validated sigma");
            for x in problem.inr_over_gain.iter_mut() {
                if x.is_finite() {
                    *x *= db_to_linear(normal.sample(measurement_rng));
                }
            }
        }
        let alloc = solve_bs_problem(bs, &problem, &scenario.bisection)?;
        counters.absorb(&alloc);
        Ok(alloc.powers)
    }

    /// Runs one slot and returns its schedule, powers and served rates.
    pub fn step(&mut self) -> Result<SlotOutcome> {
        let t = self.slot;
        if t > 0 {
            self.channel.step(&self.net);
            if t.is_multiple_of(50) && self.net.users.iter().any(|u| matches!(u.mobility, Mobility::Mobile { .. })) {
                self.edge = topology::classify_edge_users(
                    &self.net,
                    &self.channel.mean_snapshot(),
                    self.scenario.feedback.edge_threshold_db,
                );
            }
        }
        let sc = &self.scenario;
        let gains = self.channel.snapshot();
        let weights = scheduling::update_weights(&self.states, sc.utility);
        let gap = sc.propagation.sinr_gap;
        let net = &self.net;
        let ctx = SlotContext {
            net,
            gains: &gains,
            weights: &weights,
            gap,
        };
        let s_count = net.subchannels();

        let (schedule, committed) = match sc.algorithm {
            Algorithm::Eq => {
                let mut p = self.template.zeroed();
                for n in 0..net.bs_count() {
                    p.set_row(n, &equal_power(p.budget(n), p.masks_row(n)));
                }
                (scheduling::schedule_all(net, &gains, &p, &weights, gap), p)
            }
            Algorithm::Wf | Algorithm::Refim => {
                let eval = initial_power(sc.initial_power, &self.template, self.prev.as_ref(), &mut self.init_rng);
                let schedule = scheduling::schedule_all(net, &gains, &eval, &weights, gap);
                let refim = sc.algorithm == Algorithm::Refim;
                let views = if refim {
                    let published =
                        self.tables
                            .refresh(net, &gains, &eval, &weights, &self.edge, &sc.feedback, t);
                    self.protocol.log_publications(net, &published, t);
                    self.protocol.log_index_exchange(net, t);
                    reference::exchange_scheduled_indices(net, &schedule, &sc.feedback)
                } else {
                    Vec::new()
                };
                let mut next = self.template.zeroed();
                #[allow(clippy::needless_range_loop)]
                for n in 0..net.bs_count() {
                    let taxes: Vec<f64> = if refim && net.base_stations[n].refim_enabled {
                        reference::references_for_bs(net, n, &views[n], &self.tables, sc.feedback.reference_count)
                            .iter()
                            .map(|r| power::taxation_term(r))
                            .collect()
                    } else {
                        vec![0.0; s_count]
                    };
                    let row = Simulation::allocate(
                        sc,
                        &mut self.counters,
                        &mut self.measurement_rng,
                        &ctx,
                        n,
                        &schedule,
                        &eval,
                        &taxes,
                    )?;
                    next.set_row(n, &row);
                }
                (schedule, next)
            }
            Algorithm::General => {
                let init = initial_power(sc.initial_power, &self.template, self.prev.as_ref(), &mut self.init_rng);
                let taxed: Vec<bool> = net.base_stations.iter().map(|b| b.refim_enabled).collect();
                let settings = GeneralSettings {
                    sched_iters: sc.loop_caps.sched_iters,
                    power_iters: sc.loop_caps.power_iters,
                    reference_count: sc.feedback.reference_count,
                    power_tol_w: sc.power_tol_w,
                    bisection: sc.bisection,
                };
                let out = power::general_algorithm(&ctx, init, &taxed, &sc.feedback, &settings)?;
                for a in &out.allocations {
                    self.counters.absorb(a);
                }
                (out.schedule, out.powers)
            }
        };

        self.counters.power_violations += committed.violations(1e-6) as u64;
        self.counters.schedule_violations += schedule.violations(net) as u64;

        let bw = net.spectrum.subchannel_bandwidth_hz();
        let mut served = vec![0.0; net.user_count()];
        let mut link_rate = vec![0.0; net.bs_count() * s_count];
        for n in 0..net.bs_count() {
            for s in 0..s_count {
                if let Some(k) = schedule.get(n, s) {
                    let r = scheduling::rate(scheduling::sinr(&gains, &committed, k, n, s), gap, bw);
                    served[k] += r;
                    link_rate[n * s_count + s] = r;
                }
            }
        }
        scheduling::update_throughput(&mut self.states, &served, sc.ewma_beta);
        if t >= sc.warmup_slots {
            for (acc, r) in self.served_sum.iter_mut().zip(&served) {
                *acc += r;
            }
        }
        if sc.trace.powers {
            self.power_trace.push((t, committed.clone()));
        }
        if sc.trace.schedule {
            self.schedule_trace.push((t, schedule.clone(), link_rate.clone()));
        }
        self.prev = Some(committed.clone());
        self.slot += 1;
        Ok(SlotOutcome {
            slot: t,
            schedule,
            powers: committed,
            served_bps: served,
            link_rate_bps: link_rate,
        })
    }

    pub fn finish(self) -> RunResult {
        let measured = (self.slot.saturating_sub(self.scenario.warmup_slots)).max(1) as f64;
        let users: Vec<UserResult> = self
            .net
            .users
            .iter()
            .enumerate()
            .map(|(k, u)| UserResult {
                id: u.id,
                serving_bs: u.serving_bs,
                tier: self.net.base_stations[u.serving_bs].tier,
                throughput_bps: self.served_sum[k] / measured,
                final_ewma_bps: self.states[k].avg_throughput_bps,
                is_edge: self.edge[k],
                group: u.group,
            })
            .collect();
        let r: Vec<f64> = users.iter().map(|u| u.throughput_bps).collect();
        RunResult {
            algorithm: self.scenario.algorithm,
            seed: self.scenario.seed,
            slots: self.slot,
            warmup_slots: self.scenario.warmup_slots,
            gat_bps: gat(&r),
            aet_bps: aet(&r),
            aat_bps: aat(&r),
            edge_fraction: topology::edge_fraction(&self.edge),
            users,
            counters: self.counters,
            protocol: self.protocol,
            power_trace: self.power_trace,
            schedule_trace: self.schedule_trace,
            network: Some(self.net),
        }
    }
}

/// Builds the scenario's network and runs every slot.
pub fn run(scenario: &Scenario) -> Result<RunResult> {
    let mut sim = Simulation::new(scenario)?;
    run_sim(&mut sim, scenario.slots)?;
    Ok(sim.finish())
}

/// Runs `scenario` on a prebuilt network.
pub fn run_on(scenario: &Scenario, net: Network) -> Result<RunResult> {
    let mut sim = Simulation::with_network(scenario, net)?;
    run_sim(&mut sim, scenario.slots)?;
    Ok(sim.finish())
}

fn run_sim(sim: &mut Simulation, slots: u64) -> Result<()> {
    for _ in 0..slots {
        sim.step()?;
    }
    debug!("finished {} slots, counters {:?}", slots, sim.counters());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    FeedbackPeriod,
    SplitRatio,
    FemtoDensity,
    RefCount,
    LoopCaps,
    DeploymentFraction,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 6] = [
        SweepAxis::FeedbackPeriod,
        SweepAxis::SplitRatio,
        SweepAxis::FemtoDensity,
        SweepAxis::RefCount,
        SweepAxis::LoopCaps,
        SweepAxis::DeploymentFraction,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::FeedbackPeriod => "feedback_period",
            SweepAxis::SplitRatio => "split_ratio",
            SweepAxis::FemtoDensity => "femto_density",
            SweepAxis::RefCount => "ref_count",
            SweepAxis::LoopCaps => "loop_caps",
            SweepAxis::DeploymentFraction => "deployment_fraction",
        }
    }

    pub fn parse(s: &str) -> Result<SweepAxis> {
        SweepAxis::ALL
            .iter()
            .copied()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<_> = SweepAxis::ALL.iter().map(|a| a.as_str()).collect();
                Error::Config(format!("unknown sweep axis '{s}' (known: {})", known.join(", ")))
            })
    }
}

fn parse_value<T: std::str::FromStr>(axis: SweepAxis, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{v}' for axis {}", axis.as_str())))
}

/// Copy of `base` with one axis set to `value`.
///
/// `loop_caps` values look like `2x3` (schedule iterations × power iterations)
/// and switch the algorithm to the looped variant.
pub fn apply_axis(base: &Scenario, axis: SweepAxis, value: &str) -> Result<Scenario> {
    let mut sc = base.clone();
    match axis {
        SweepAxis::FeedbackPeriod => sc.feedback.period_slots = parse_value(axis, value)?,
        SweepAxis::SplitRatio => {
            sc.spectrum_policy = SpectrumPolicy::Splitting {
                macro_subchannels: parse_value(axis, value)?,
            }
        }
        SweepAxis::FemtoDensity => match &mut sc.network {
            NetworkSpec::Hetnet { femtos_per_macro, .. } => *femtos_per_macro = parse_value(axis, value)?,
            _ => return Err(Error::Config("femto_density needs a hetnet network".into())),
        },
        SweepAxis::RefCount => sc.feedback.reference_count = parse_value(axis, value)?,
        SweepAxis::LoopCaps => {
            let (a, b) = value
                .split_once(['x', 'X', ':'])
                .ok_or_else(|| Error::Config(format!("loop_caps value '{value}' must look like 2x3")))?;
            sc.loop_caps = LoopCaps {
                sched_iters: parse_value(axis, a)?,
                power_iters: parse_value(axis, b)?,
            };
            sc.algorithm = Algorithm::General;
        }
        SweepAxis::DeploymentFraction => sc.deployment_fraction = parse_value(axis, value)?,
    }
    sc.validate()?;
    Ok(sc)
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub axis: SweepAxis,
    pub value: String,
    pub result: RunResult,
}

/// One run per value, all sharing the base seed.
pub fn sweep(base: &Scenario, axis: SweepAxis, values: &[String]) -> Result<Vec<SweepPoint>> {
    let scenarios: Vec<Scenario> = values
        .iter()
        .map(|v| apply_axis(base, axis, v))
        .collect::<Result<_>>()?;
    scenarios
        .iter()
        .zip(values)
        .map(|(sc, v)| {
            Ok(SweepPoint {
                axis,
                value: v.clone(),
                result: run(sc)?,
            })
        })
        .collect()
}

/// Expands `"0..16"` (inclusive) or `"1,10,50"` into value strings.
pub fn expand_values(spec: &str) -> Result<Vec<String>> {
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once("..") {
        let lo: i64 = a.trim().parse().map_err(|_| Error::Config(format!("bad range '{spec}'")))?;
        let hi: i64 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| Error::Config(format!("bad range '{spec}'")))?;
        if hi < lo {
            return Err(Error::Config(format!("empty range '{spec}'")));
        }
        return Ok((lo..=hi).map(|v| v.to_string()).collect());
    }
    let values: Vec<String> = spec.split(',').map(|v| v.trim().to_string()).collect();
    if values.iter().any(|v| v.is_empty()) {
        return Err(Error::Config(format!("bad value list '{spec}'")));
    }
    Ok(values)
}

/// Share of edge-group served (slot, subchannel) pairs within `window` that
/// fall on the upper half of their BS's subchannels ranked by average power
/// over the same window. Needs power and schedule traces.
pub fn edge_high_power_share(result: &RunResult, window: std::ops::Range<u64>) -> Option<f64> {
    let net = result.network.as_ref()?;
    let powers: Vec<&PowerMatrix> = result
        .power_trace
        .iter()
        .filter(|(t, _)| window.contains(t))
        .map(|(_, p)| p)
        .collect();
    if powers.is_empty() {
        return None;
    }
    let s_count = net.subchannels();
    let mut upper = vec![vec![false; s_count]; net.bs_count()];
    for (n, up) in upper.iter_mut().enumerate() {
        let mut avg: Vec<(usize, f64)> = (0..s_count)
            .map(|s| (s, powers.iter().map(|p| p.get(n, s)).sum::<f64>() / powers.len() as f64))
            .collect();
        avg.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(s, _) in avg.iter().take(s_count / 2) {
            up[s] = true;
        }
    }
    let (mut hits, mut total) = (0u64, 0u64);
    for (t, schedule, rates) in &result.schedule_trace {
        if !window.contains(t) {
            continue;
        }
        for n in 0..net.bs_count() {
            for s in 0..s_count {
                let Some(k) = schedule.get(n, s) else { continue };
                if net.users[k].group != Some(PlacementGroup::Edge) || rates[n * s_count + s] <= 0.0 {
                    continue;
                }
                total += 1;
                if upper[n][s] {
                    hits += 1;
                }
            }
        }
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

/// One-slot inputs for single-shot comparisons of the allocators.
#[derive(Debug, Clone)]
pub struct SlotInstance {
    pub net: Network,
    pub gains: GainSnapshot,
    pub weights: Vec<f64>,
    pub prev: PowerMatrix,
}

impl SlotInstance {
    /// Random instance from a scenario: first-slot gains, log-uniform weights
    /// in [0.1, 10] and random previous powers.
    pub fn random(scenario: &Scenario, seed: u64) -> Result<SlotInstance> {
        use rand::Rng;
        let sc = Scenario {
            seed,
            ..scenario.clone()
        };
        let net = sc.build_network()?;
        let channel = ChannelModel::new(&net, &sc.propagation, seed);
        let gains = channel.snapshot();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let weights = (0..net.user_count())
            .map(|_| 10f64.powf(rng.random_range(-1.0..1.0)))
            .collect();
        let template = power_template(&net, sc.spectrum_policy);
        let prev = initial_power(InitialPower::Random, &template, None, &mut rng);
        Ok(SlotInstance {
            net,
            gains,
            weights,
            prev,
        })
    }

    pub fn context(&self, gap: f64) -> SlotContext<'_> {
        SlotContext {
            net: &self.net,
            gains: &self.gains,
            weights: &self.weights,
            gap,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_examples() {
        assert!((gat(&[1.0, 4.0]) - 2.0).abs() < 1e-12);
        assert!((gat(&[2.0, 8.0, 4.0]) - 4.0).abs() < 1e-12);
        assert_eq!(gat(&[3.0, 0.0]), 0.0);
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(aet(&v), 1.0);
        let v: Vec<f64> = (1..=40).map(f64::from).collect();
        assert_eq!(aet(&v), 1.5);
        assert_eq!(aet(&[7.0; 3]), 7.0);
        assert_eq!(aat(&[1.0, 2.0, 3.0]), 2.0);
    }

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            Scenario::preset(name).unwrap().validate().unwrap();
        }
        assert!(Scenario::preset("nope").is_err());
    }

    #[test]
    fn value_lists() {
        assert_eq!(expand_values("0..3").unwrap(), vec!["0", "1", "2", "3"]);
        assert_eq!(expand_values("1, 10,50").unwrap(), vec!["1", "10", "50"]);
        assert!(expand_values("3..1").is_err());
        assert!(expand_values("1,,2").is_err());
    }

    #[test]
    fn splitting_template_is_orthogonal() {
        let sc = Scenario::preset("hetnet5").unwrap();
        let net = sc.build_network().unwrap();
        let t = power_template(&net, SpectrumPolicy::Splitting { macro_subchannels: 6 });
        for (n, bs) in net.base_stations.iter().enumerate() {
            for s in 0..16 {
                let allowed = (s < 6) != (bs.tier == Tier::Femto);
                assert_eq!(t.mask(n, s) > 0.0, allowed);
            }
        }
    }

    #[test]
    fn deployment_picks_densest() {
        let sc = Scenario {
            deployment_fraction: 0.5,
            ..Scenario::preset("mixed-density").unwrap()
        };
        let net = sc.build_network().unwrap();
        let enabled: Vec<usize> = (0..net.bs_count()).filter(|&n| net.base_stations[n].refim_enabled).collect();
        assert_eq!(enabled.len(), 19);
        assert!(enabled.iter().filter(|&&n| n < 15).count() == 15);
    }
}
