//! Link gains g_s^{k,n}: distance path loss, per-link log-normal shadowing,
//! wall penetration and sum-of-sinusoids Jakes fading, plus thermal noise.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::{self, Stream};
use crate::topology::{Coverage, Mobility, Network, Point, Tier};
use crate::{db_to_linear, dbm_to_watts};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// `a + b·log10(d)` in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossCoeffs {
    pub a: f64,
    pub b: f64,
}

impl PathLossCoeffs {
    pub fn eval(&self, d: f64) -> f64 {
        self.a + self.b * d.log10()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    pub macro_pathloss: PathLossCoeffs,
    pub indoor_pathloss: PathLossCoeffs,
    pub penetration_loss_db: f64,
    pub macro_shadowing_db: f64,
    pub femto_shadowing_db: f64,
    pub carrier_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    /// SINR gap Γ, linear.
    pub sinr_gap: f64,
    pub min_distance_m: f64,
    pub oscillators: usize,
    pub slot_s: f64,
    /// Fading speed of nomadic users.
    pub nomadic_speed_mps: f64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            macro_pathloss: PathLossCoeffs { a: 16.62, b: 37.6 },
            indoor_pathloss: PathLossCoeffs { a: 37.0, b: 32.0 },
            penetration_loss_db: 10.0,
            macro_shadowing_db: 8.0,
            femto_shadowing_db: 4.0,
            carrier_hz: 2e9,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 9.0,
            sinr_gap: 1.0,
            min_distance_m: 1.0,
            oscillators: 8,
            slot_s: 1e-3,
            nomadic_speed_mps: 3.0 / 3.6,
        }
    }
}

/// Which path-loss law applies to a BS→user link and whether it crosses a wall.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub bs_tier: Tier,
    pub crosses_wall: bool,
}

impl Link {
    pub fn between(net: &Network, user: usize, bs: usize) -> Link {
        let u = &net.users[user];
        let b = &net.base_stations[bs];
        let crosses_wall = match b.tier {
            Tier::Femto => u.home.is_none() || u.home != b.home,
            Tier::Macro | Tier::Pico => u.indoor,
        };
        Link {
            bs_tier: b.tier,
            crosses_wall,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.macro_pathloss.b > 0.0 && self.indoor_pathloss.b > 0.0) {
            return Err(crate::Error::Config("path-loss slopes must be positive".into()));
        }
        if !(self.sinr_gap >= 1.0) {
            return Err(crate::Error::Config("SINR gap must be at least 1".into()));
        }
        if self.macro_shadowing_db < 0.0 || self.femto_shadowing_db < 0.0 {
            return Err(crate::Error::Config("shadowing sigma must be non-negative".into()));
        }
        if self.oscillators == 0 || !(self.slot_s > 0.0) || !(self.carrier_hz > 0.0) {
            return Err(crate::Error::Config("fading needs oscillators, a slot length and a carrier".into()));
        }
        if !(self.min_distance_m > 0.0) {
            return Err(crate::Error::Config("minimum distance must be positive".into()));
        }
        Ok(())
    }

    /// Path loss in dB, distance clamped at `min_distance_m`.
    pub fn path_loss_db(&self, link: Link, distance_m: f64) -> f64 {
        let d = distance_m.max(self.min_distance_m);
        let base = match link.bs_tier {
            Tier::Femto => self.indoor_pathloss.eval(d),
            Tier::Macro | Tier::Pico => self.macro_pathloss.eval(d),
        };
        if link.crosses_wall {
            base + self.penetration_loss_db
        } else {
            base
        }
    }

    pub fn shadowing_sigma_db(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Femto => self.femto_shadowing_db,
            Tier::Macro | Tier::Pico => self.macro_shadowing_db,
        }
    }

    /// Thermal noise per subchannel in Watts.
    pub fn noise_power_w(&self, subchannel_bw_hz: f64) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz + 10.0 * subchannel_bw_hz.log10() + self.noise_figure_db)
    }

    pub fn doppler_hz(&self, speed_mps: f64) -> f64 {
        speed_mps * self.carrier_hz / SPEED_OF_LIGHT
    }
}

/// Zero-mean Gaussian shadowing sample in dB.
pub fn sample_shadowing(rng: &mut ChaCha8Rng, sigma_db: f64) -> f64 {
    if sigma_db == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma_db).expect("sigma is finite and non-negative").sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ONE: Complex = Complex { re: 1.0, im: 0.0 };

    pub fn from_angle(theta: f64) -> Complex {
        let (s, c) = theta.sin_cos();
        Complex { re: c, im: s }
    }

    pub fn conj(self) -> Complex {
        Complex { re: self.re, im: -self.im }
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

impl std::ops::Mul for Complex {
    type Output = Complex;

    #[inline]
    fn mul(self, o: Complex) -> Complex {
        Complex {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
}

/// Sum-of-sinusoids Jakes fading for every (user, BS, subchannel) link.
///
/// Each (user, BS) pair owns `L` oscillators at Doppler shifts
/// `f_d·cos(α_i)`, `α_i = 2π(i + θ)/L`, advanced by complex rotation. Every
/// subchannel adds its own random phase to each oscillator, so subchannels
/// fade independently while sharing the Doppler spectrum:
/// `h_s(t) = L^{-1/2} Σ_i e^{j(2π f_d cos(α_i) t + φ_{s,i})}`.
#[derive(Debug, Clone)]
pub struct FadingState {
    users: usize,
    bss: usize,
    subchannels: usize,
    oscillators: usize,
    /// Doppler shift per user, Hz.
    doppler_hz: Vec<f64>,
    /// cos(α_i) per (user, bs, oscillator).
    cos_alpha: Vec<f64>,
    /// Running phasors e^{j ω_i t} per (user, bs, oscillator).
    phasors: Vec<Complex>,
    /// Cached per-step rotations for `rotation_dt`.
    rotations: Vec<Complex>,
    rotation_dt: f64,
    /// Static per-subchannel phase offsets per (user, bs, subchannel, oscillator).
    offsets_re: Vec<f32>,
    offsets_im: Vec<f32>,
    steps: u64,
}

impl FadingState {
    pub fn new(
        users: usize,
        bss: usize,
        subchannels: usize,
        oscillators: usize,
        doppler_hz: Vec<f64>,
        rng: &mut ChaCha8Rng,
    ) -> FadingState {
        assert_eq!(doppler_hz.len(), users);
        let pairs = users * bss;
        let mut cos_alpha = Vec::with_capacity(pairs * oscillators);
        for _ in 0..pairs {
            // θ away from 0 and 1/2 keeps the L Doppler shifts distinct
            let theta = 0.25 + rng.random_range(-0.125..0.125);
            for i in 0..oscillators {
                cos_alpha.push((2.0 * PI * (i as f64 + theta) / oscillators as f64).cos());
            }
        }
        let total = pairs * subchannels * oscillators;
        let mut offsets_re = Vec::with_capacity(total);
        let mut offsets_im = Vec::with_capacity(total);
        for _ in 0..total {
            let c = Complex::from_angle(rng.random_range(0.0..2.0 * PI));
            offsets_re.push(c.re as f32);
            offsets_im.push(c.im as f32);
        }
        FadingState {
            users,
            bss,
            subchannels,
            oscillators,
            doppler_hz,
            cos_alpha,
            phasors: vec![Complex::ONE; pairs * oscillators],
            rotations: Vec::new(),
            rotation_dt: f64::NAN,
            offsets_re,
            offsets_im,
            steps: 0,
        }
    }

    pub fn doppler_hz(&self, user: usize) -> f64 {
        self.doppler_hz[user]
    }

    /// Advances every oscillator by `dt` seconds.
    pub fn advance(&mut self, dt: f64) {
        if dt == 0.0 {
            return;
        }
        if dt != self.rotation_dt {
            self.rotations = self
                .cos_alpha
                .iter()
                .enumerate()
                .map(|(idx, &ca)| {
                    let user = idx / (self.bss * self.oscillators);
                    Complex::from_angle(2.0 * PI * self.doppler_hz[user] * ca * dt)
                })
                .collect();
            self.rotation_dt = dt;
        }
        for (p, r) in self.phasors.iter_mut().zip(&self.rotations) {
            *p = *p * *r;
        }
        self.steps += 1;
        if self.steps.is_multiple_of(1024) {
            for p in &mut self.phasors {
                let m = p.norm_sqr().sqrt();
                p.re /= m;
                p.im /= m;
            }
        }
    }

    /// Complex coefficient h for one link.
    pub fn coefficient(&self, user: usize, bs: usize, subchannel: usize) -> Complex {
        let l = self.oscillators;
        let pair = user * self.bss + bs;
        let ph = &self.phasors[pair * l..(pair + 1) * l];
        let base = (pair * self.subchannels + subchannel) * l;
        let ore = &self.offsets_re[base..base + l];
        let oim = &self.offsets_im[base..base + l];
        let mut acc = Complex::default();
        for i in 0..l {
            let o = Complex {
                re: ore[i] as f64,
                im: oim[i] as f64,
            };
            let z = o * ph[i];
            acc.re += z.re;
            acc.im += z.im;
        }
        let scale = 1.0 / (l as f64).sqrt();
        Complex {
            re: acc.re * scale,
            im: acc.im * scale,
        }
    }

    /// |h|² for every subchannel of one (user, bs) pair, written into `out`.
    pub fn power_gains_into(&self, user: usize, bs: usize, out: &mut [f64]) {
        for (s, o) in out.iter_mut().enumerate().take(self.subchannels) {
            *o = self.coefficient(user, bs, s).norm_sqr();
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.users, self.bss, self.subchannels)
    }
}

/// Per-slot gains g_s^{k,n} (linear) and noise σ_s^k (Watts).
#[derive(Debug, Clone, PartialEq)]
pub struct GainSnapshot {
    pub users: usize,
    pub bss: usize,
    pub subchannels: usize,
    gains: Vec<f64>,
    noise: Vec<f64>,
    pub slot: u64,
}

impl GainSnapshot {
    /// Builds a snapshot from closures; handy for hand-made instances.
    pub fn from_fn(
        users: usize,
        bss: usize,
        subchannels: usize,
        gain: impl Fn(usize, usize, usize) -> f64,
        noise: impl Fn(usize, usize) -> f64,
    ) -> GainSnapshot {
        let mut g = Vec::with_capacity(users * bss * subchannels);
        for k in 0..users {
            for n in 0..bss {
                for s in 0..subchannels {
                    g.push(gain(k, n, s));
                }
            }
        }
        let mut sigma = Vec::with_capacity(users * subchannels);
        for k in 0..users {
            for s in 0..subchannels {
                sigma.push(noise(k, s));
            }
        }
        GainSnapshot {
            users,
            bss,
            subchannels,
            gains: g,
            noise: sigma,
            slot: 0,
        }
    }

    #[inline]
    pub fn gain(&self, user: usize, bs: usize, subchannel: usize) -> f64 {
        self.gains[(user * self.bss + bs) * self.subchannels + subchannel]
    }

    #[inline]
    pub fn noise(&self, user: usize, subchannel: usize) -> f64 {
        self.noise[user * self.subchannels + subchannel]
    }

    /// Gains from every BS to `user` on `subchannel`, strided view collected.
    pub fn gains_row(&self, user: usize, bs: usize) -> &[f64] {
        let base = (user * self.bss + bs) * self.subchannels;
        &self.gains[base..base + self.subchannels]
    }

    pub fn mean_over_subchannels(&self, user: usize, bs: usize) -> f64 {
        self.gains_row(user, bs).iter().sum::<f64>() / self.subchannels as f64
    }

    pub fn all_positive(&self) -> bool {
        self.gains.iter().all(|&g| g > 0.0) && self.noise.iter().all(|&s| s > 0.0)
    }

    /// CSV dump with header `user,bs,subchannel,gain`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "user,bs,subchannel,gain")?;
        for k in 0..self.users {
            for n in 0..self.bss {
                for s in 0..self.subchannels {
                    writeln!(w, "{k},{n},{s},{:e}", self.gain(k, n, s))?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Waypoint {
    destination: Point,
}

/// Time-varying channel for one network: positions, shadowing, fading.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    config: PropagationConfig,
    positions: Vec<Point>,
    /// Shadowing in dB per (user, bs), fixed for the run.
    shadowing_db: Vec<f64>,
    /// 10^(-(PL+SH)/10) per (user, bs).
    mean_gain: Vec<f64>,
    fading: FadingState,
    noise_w: f64,
    waypoints: Vec<Option<Waypoint>>,
    mobility_rng: ChaCha8Rng,
    slot: u64,
}

impl ChannelModel {
    pub fn new(net: &Network, config: &PropagationConfig, seed: u64) -> ChannelModel {
        let users = net.user_count();
        let bss = net.bs_count();
        let mut shadow_rng = rng::stream(seed, Stream::Shadowing);
        let mut shadowing_db = Vec::with_capacity(users * bss);
        for _ in 0..users {
            for bs in &net.base_stations {
                shadowing_db.push(sample_shadowing(&mut shadow_rng, config.shadowing_sigma_db(bs.tier)));
            }
        }
        let doppler = net
            .users
            .iter()
            .map(|u| {
                let speed = match u.mobility {
                    Mobility::Nomadic => config.nomadic_speed_mps,
                    Mobility::Mobile { speed_mps } => speed_mps,
                };
                config.doppler_hz(speed)
            })
            .collect();
        let mut fading_rng = rng::stream(seed, Stream::Fading);
        let fading = FadingState::new(
            users,
            bss,
            net.subchannels(),
            config.oscillators,
            doppler,
            &mut fading_rng,
        );
        let mut mobility_rng = rng::stream(seed, Stream::Mobility);
        let positions: Vec<Point> = net.users.iter().map(|u| u.position).collect();
        let waypoints = net
            .users
            .iter()
            .map(|u| match u.mobility {
                Mobility::Mobile { .. } => Some(Waypoint {
                    destination: sample_waypoint(net, u.serving_bs, &u.position, &mut mobility_rng),
                }),
                Mobility::Nomadic => None,
            })
            .collect();
        let mut model = ChannelModel {
            config: config.clone(),
            positions,
            shadowing_db,
            mean_gain: vec![0.0; users * bss],
            fading,
            noise_w: config.noise_power_w(net.spectrum.subchannel_bandwidth_hz()),
            waypoints,
            mobility_rng,
            slot: 0,
        };
        for k in 0..users {
            model.refresh_mean_gains(net, k);
        }
        model
    }

    fn refresh_mean_gains(&mut self, net: &Network, user: usize) {
        let bss = net.bs_count();
        for n in 0..bss {
            let d = net.distance_to_bs(&self.positions[user], n);
            let pl = self.config.path_loss_db(Link::between(net, user, n), d);
            self.mean_gain[user * bss + n] = db_to_linear(-(pl + self.shadowing_db[user * bss + n]));
        }
    }

    pub fn config(&self) -> &PropagationConfig {
        &self.config
    }

    pub fn noise_w(&self) -> f64 {
        self.noise_w
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn position(&self, user: usize) -> Point {
        self.positions[user]
    }

    pub fn fading(&self) -> &FadingState {
        &self.fading
    }

    /// Moves mobile users and advances fading by one slot.
    pub fn step(&mut self, net: &Network) {
        let dt = self.config.slot_s;
        for k in 0..self.positions.len() {
            let speed = match net.users[k].mobility {
                Mobility::Mobile { speed_mps } => speed_mps,
                Mobility::Nomadic => continue,
            };
            let mut remaining = speed * dt;
            while remaining > 0.0 {
                let wp = self.waypoints[k].as_mut().expect("mobile users carry a waypoint");
                let here = self.positions[k];
                let d = here.distance(&wp.destination);
                if d <= remaining {
                    self.positions[k] = wp.destination;
                    remaining -= d;
                    let next = sample_waypoint(net, net.users[k].serving_bs, &net.users[k].position, &mut self.mobility_rng);
                    self.waypoints[k].as_mut().unwrap().destination = next;
                    if d == 0.0 && remaining == speed * dt {
                        // degenerate zero-length leg; try again next slot
                        break;
                    }
                } else {
                    let f = remaining / d;
                    self.positions[k] = Point::new(
                        here.x + (wp.destination.x - here.x) * f,
                        here.y + (wp.destination.y - here.y) * f,
                    );
                    remaining = 0.0;
                }
            }
            self.refresh_mean_gains(net, k);
        }
        self.fading.advance(dt);
        self.slot += 1;
    }

    /// Long-term gains (path loss and shadowing only) with |h|² = 1.
    pub fn mean_snapshot(&self) -> GainSnapshot {
        let (users, bss, subchannels) = self.fading.dims();
        GainSnapshot::from_fn(
            users,
            bss,
            subchannels,
            |k, n, _| self.mean_gain[k * bss + n],
            |_, _| self.noise_w,
        )
    }

    /// g_s^{k,n} = 10^(-(PL+SH)/10)·|h|² and σ for the current slot.
    pub fn snapshot(&self) -> GainSnapshot {
        let (users, bss, subchannels) = self.fading.dims();
        let mut gains = vec![0.0; users * bss * subchannels];
        for k in 0..users {
            for n in 0..bss {
                let base = (k * bss + n) * subchannels;
                let row = &mut gains[base..base + subchannels];
                self.fading.power_gains_into(k, n, row);
                let m = self.mean_gain[k * bss + n];
                for g in row.iter_mut() {
                    // |h|² can underflow to exactly zero; keep gains strictly positive
                    *g = (*g * m).max(f64::MIN_POSITIVE);
                }
            }
        }
        GainSnapshot {
            users,
            bss,
            subchannels,
            gains,
            noise: vec![self.noise_w; users * subchannels],
            slot: self.slot,
        }
    }
}

fn sample_waypoint(net: &Network, bs: usize, origin: &Point, rng: &mut ChaCha8Rng) -> Point {
    let b = &net.base_stations[bs];
    match b.coverage {
        Coverage::Hexagon {
            center,
            inter_site_distance,
        } => {
            let circum = inter_site_distance / 3f64.sqrt();
            loop {
                let p = Point::new(
                    center.x + rng.random_range(-circum..circum),
                    center.y + rng.random_range(-circum..circum),
                );
                let dx = p.x - center.x;
                let dy = p.y - center.y;
                let inside = [0.0f64, PI / 3.0, 2.0 * PI / 3.0]
                    .iter()
                    .all(|a| (dx * a.cos() + dy * a.sin()).abs() <= inter_site_distance / 2.0);
                if inside {
                    return p;
                }
            }
        }
        Coverage::Disc { center, radius } => {
            let r = radius * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..2.0 * PI);
            Point::new(center.x + r * a.cos(), center.y + r * a.sin())
        }
        Coverage::Voronoi { radius } => loop {
            let r = radius * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..2.0 * PI);
            let p = Point::new(b.position.x + r * a.cos(), b.position.y + r * a.sin());
            let own = p.distance(&b.position);
            if net.base_stations.iter().all(|o| o.id == bs || p.distance(&o.position) > own) {
                return p;
            }
        },
        // layout-fixed users wander within 50 m of their drop point
        Coverage::Fixed => {
            let r = 50.0 * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..2.0 * PI);
            Point::new(origin.x + r * a.cos(), origin.y + r * a.sin())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_hex_grid, place_users, Spectrum, TierUserCounts};
    use rand::SeedableRng;

    fn macro_link() -> Link {
        Link {
            bs_tier: Tier::Macro,
            crosses_wall: false,
        }
    }

    #[test]
    fn path_loss_spot_values() {
        let cfg = PropagationConfig::default();
        assert!((cfg.path_loss_db(macro_link(), 100.0) - 91.82).abs() < 1e-9);
        let indoor = Link {
            bs_tier: Tier::Femto,
            crosses_wall: false,
        };
        assert!((cfg.path_loss_db(indoor, 10.0) - 69.0).abs() < 1e-9);
        let wall = Link {
            bs_tier: Tier::Macro,
            crosses_wall: true,
        };
        assert!((cfg.path_loss_db(wall, 100.0) - 101.82).abs() < 1e-9);
    }

    #[test]
    fn path_loss_clamps_below_min_distance() {
        let cfg = PropagationConfig::default();
        assert_eq!(cfg.path_loss_db(macro_link(), 0.0), cfg.path_loss_db(macro_link(), 1.0));
        assert!(cfg.path_loss_db(macro_link(), 0.0).is_finite());
    }

    #[test]
    fn zero_sigma_shadowing_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_shadowing(&mut rng, 0.0), 0.0);
        }
        let a = sample_shadowing(&mut ChaCha8Rng::seed_from_u64(9), 8.0);
        let b = sample_shadowing(&mut ChaCha8Rng::seed_from_u64(9), 8.0);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_speed_fading_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut f = FadingState::new(1, 1, 2, 8, vec![0.0], &mut rng);
        let h0 = f.coefficient(0, 0, 1);
        for _ in 0..50 {
            f.advance(1e-3);
        }
        assert_eq!(f.coefficient(0, 0, 1), h0);
    }

    #[test]
    fn zero_dt_leaves_state_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut f = FadingState::new(1, 1, 1, 8, vec![100.0], &mut rng);
        f.advance(1e-3);
        let h = f.coefficient(0, 0, 0);
        f.advance(0.0);
        assert_eq!(f.coefficient(0, 0, 0), h);
    }

    #[test]
    fn snapshot_is_pure_and_positive() {
        let net = place_users(
            &build_hex_grid(1, 1000.0, false, Spectrum::default()).unwrap(),
            TierUserCounts::default(),
            2,
        )
        .unwrap();
        let mut ch = ChannelModel::new(&net, &PropagationConfig::default(), 5);
        ch.step(&net);
        let a = ch.snapshot();
        let b = ch.snapshot();
        assert_eq!(a, b);
        assert!(a.all_positive());
    }

    #[test]
    fn mobile_users_move_at_speed() {
        let net = place_users(
            &build_hex_grid(0, 1000.0, false, Spectrum::default()).unwrap(),
            TierUserCounts {
                macro_users: 3,
                femto_users: 1,
            },
            2,
        )
        .unwrap();
        let net = crate::topology::with_mobility(&net, Mobility::Mobile { speed_mps: 10.0 });
        let mut ch = ChannelModel::new(&net, &PropagationConfig::default(), 5);
        let before = ch.position(0);
        ch.step(&net);
        let moved = before.distance(&ch.position(0));
        assert!(moved <= 10.0 * 1e-3 + 1e-12 && moved > 0.0);
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let g = GainSnapshot::from_fn(1, 2, 2, |_, n, s| (n + s + 1) as f64, |_, _| 1.0);
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("user,bs,subchannel,gain\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
