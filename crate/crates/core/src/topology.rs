//! Network layouts: macro hex grids, the linear two-cell line, macro+femto
//! heterogeneous deployments, and a mixed-density layout with urban,
//! suburban and rural zones.
//!
//! A [`Network`] is immutable once built. Builders return fresh networks and
//! never mutate their input.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::GainSnapshot;
use crate::rng::{self, Stream};
use crate::{dbm_to_watts, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn offset(&self, dx: f64, dy: f64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Macro,
    Pico,
    Femto,
}

impl Tier {
    pub fn default_max_power_dbm(self) -> f64 {
        match self {
            Tier::Macro => 43.0,
            Tier::Pico => 30.0,
            Tier::Femto => 15.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Macro => "macro",
            Tier::Pico => "pico",
            Tier::Femto => "femto",
        }
    }
}

/// Region in which a cell's users are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Coverage {
    /// Hexagon with inradius `inter_site_distance / 2`, neighbours at 0°, 60°, ...
    Hexagon { center: Point, inter_site_distance: f64 },
    Disc { center: Point, radius: f64 },
    /// Points within `radius` of the BS that are closer to it than to any other BS.
    Voronoi { radius: f64 },
    /// Users are placed by the layout builder itself.
    Fixed,
}

impl Coverage {
    fn contains_hex(center: &Point, isd: f64, p: &Point) -> bool {
        let dx = p.x - center.x;
        let dy = p.y - center.y;
        let half = isd / 2.0;
        [0.0f64, PI / 3.0, 2.0 * PI / 3.0]
            .iter()
            .all(|a| (dx * a.cos() + dy * a.sin()).abs() <= half)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: usize,
    pub tier: Tier,
    pub position: Point,
    pub max_power_w: f64,
    /// Spectral mask per subchannel, Watts.
    pub mask_w: Vec<f64>,
    pub refim_enabled: bool,
    /// Home the femto sits in, used for wall-crossing decisions.
    pub home: Option<usize>,
    pub coverage: Coverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Mobility {
    Nomadic,
    Mobile { speed_mps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementGroup {
    Center,
    Edge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: usize,
    pub position: Point,
    pub serving_bs: usize,
    pub mobility: Mobility,
    pub indoor: bool,
    pub home: Option<usize>,
    pub group: Option<PlacementGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Home {
    pub id: usize,
    pub center: Point,
    pub size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Spectrum {
    pub subchannels: usize,
    pub bandwidth_hz: f64,
}

impl Default for Spectrum {
    fn default() -> Self {
        Spectrum {
            subchannels: 16,
            bandwidth_hz: 10e6,
        }
    }
}

impl Spectrum {
    pub fn subchannel_bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz / self.subchannels as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub base_stations: Vec<BaseStation>,
    pub users: Vec<User>,
    /// 𝒩(n) for every BS, sorted ascending.
    pub neighbor_sets: Vec<Vec<usize>>,
    pub spectrum: Spectrum,
    pub homes: Vec<Home>,
    /// Translations of the wrap-around images; empty without wrap-around.
    pub wrap_shifts: Vec<Point>,
    /// 𝒦ₙ for every BS, ascending user ids.
    pub cell_users: Vec<Vec<usize>>,
}

impl Network {
    pub fn bs_count(&self) -> usize {
        self.base_stations.len()
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn subchannels(&self) -> usize {
        self.spectrum.subchannels
    }

    pub fn users_of(&self, bs: usize) -> &[usize] {
        &self.cell_users[bs]
    }

    pub fn neighbors(&self, bs: usize) -> &[usize] {
        &self.neighbor_sets[bs]
    }

    /// Distance from `p` to BS `bs`, honouring wrap-around images.
    pub fn distance_to_bs(&self, p: &Point, bs: usize) -> f64 {
        let b = self.base_stations[bs].position;
        let direct = p.distance(&b);
        self.wrap_shifts
            .iter()
            .map(|s| p.distance(&b.offset(s.x, s.y)))
            .fold(direct, f64::min)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Network> {
        let net: Network = serde_json::from_str(s)?;
        net.validate()?;
        Ok(net)
    }

    /// Checks the structural invariants of a network.
    pub fn validate(&self) -> Result<()> {
        let n = self.base_stations.len();
        if self.spectrum.subchannels == 0 {
            return Err(Error::Topology("subchannel count must be at least 1".into()));
        }
        if self.neighbor_sets.len() != n || self.cell_users.len() != n {
            return Err(Error::Topology("per-BS tables do not match BS count".into()));
        }
        for (i, bs) in self.base_stations.iter().enumerate() {
            if bs.id != i {
                return Err(Error::Topology(format!("BS {i} carries id {}", bs.id)));
            }
            if !(bs.max_power_w > 0.0) {
                return Err(Error::Topology(format!("BS {i} has non-positive power budget")));
            }
            if bs.mask_w.len() != self.spectrum.subchannels || bs.mask_w.iter().any(|&m| !(m > 0.0)) {
                return Err(Error::Topology(format!("BS {i} has an invalid spectral mask")));
            }
            if self.neighbor_sets[i].contains(&i) {
                return Err(Error::Topology(format!("BS {i} lists itself as a neighbour")));
            }
            if self.neighbor_sets[i].iter().any(|&m| m >= n) {
                return Err(Error::Topology(format!("BS {i} has an unknown neighbour")));
            }
        }
        let mut seen = vec![false; self.users.len()];
        for (b, members) in self.cell_users.iter().enumerate() {
            for &k in members {
                let u = self.users.get(k).ok_or_else(|| Error::Topology(format!("unknown user {k}")))?;
                if u.serving_bs != b || seen[k] {
                    return Err(Error::Topology(format!("user {k} is not partitioned cleanly")));
                }
                seen[k] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Topology("some user is not associated with any BS".into()));
        }
        for (i, u) in self.users.iter().enumerate() {
            if u.id != i || u.serving_bs >= n {
                return Err(Error::Topology(format!("user {i} is malformed")));
            }
        }
        Ok(())
    }

    fn rebuild_cells(&mut self) {
        let mut cells = vec![Vec::new(); self.base_stations.len()];
        for u in &self.users {
            cells[u.serving_bs].push(u.id);
        }
        self.cell_users = cells;
    }

    /// Marks which BSs run the reference-based allocator; the rest fall back to WF.
    pub fn with_refim_enabled(mut self, enabled: &[bool]) -> Network {
        for (bs, &e) in self.base_stations.iter_mut().zip(enabled) {
            bs.refim_enabled = e;
        }
        self
    }

    /// BS indices ordered from densest to sparsest (nearest-neighbour distance,
    /// ties by index).
    pub fn bs_by_density(&self) -> Vec<usize> {
        let nearest: Vec<f64> = (0..self.bs_count())
            .map(|n| {
                let p = self.base_stations[n].position;
                (0..self.bs_count())
                    .filter(|&m| m != n)
                    .map(|m| self.distance_to_bs(&p, m))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let mut order: Vec<usize> = (0..self.bs_count()).collect();
        order.sort_by(|&a, &b| nearest[a].total_cmp(&nearest[b]).then(a.cmp(&b)));
        order
    }
}

fn make_bs(id: usize, tier: Tier, position: Point, spectrum: &Spectrum, coverage: Coverage) -> BaseStation {
    let max_power_w = dbm_to_watts(tier.default_max_power_dbm());
    BaseStation {
        id,
        tier,
        position,
        max_power_w,
        mask_w: vec![max_power_w; spectrum.subchannels],
        refim_enabled: true,
        home: None,
        coverage,
    }
}

fn hex_distance(a: (i64, i64), b: (i64, i64)) -> i64 {
    let dq = a.0 - b.0;
    let dr = a.1 - b.1;
    (dq.abs() + dr.abs() + (dq + dr).abs()) / 2
}

fn axial_to_point(q: i64, r: i64, isd: f64) -> Point {
    Point::new(isd * (q as f64 + r as f64 / 2.0), isd * (3f64.sqrt() / 2.0) * r as f64)
}

/// Macro hex grid with `1 + 3·rings·(rings+1)` cells and one-hop neighbour sets.
pub fn build_hex_grid(rings: usize, inter_site_distance: f64, wrap: bool, spectrum: Spectrum) -> Result<Network> {
    if !(inter_site_distance > 0.0) {
        return Err(Error::Config("inter-site distance must be positive".into()));
    }
    if spectrum.subchannels == 0 || !(spectrum.bandwidth_hz > 0.0) {
        return Err(Error::Config("spectrum needs at least one subchannel and positive bandwidth".into()));
    }
    let r = rings as i64;
    let mut cells: Vec<(i64, i64)> = Vec::new();
    for q in -r..=r {
        for s in -r..=r {
            if hex_distance((q, s), (0, 0)) <= r {
                cells.push((q, s));
            }
        }
    }
    // centre first, then ring by ring counter-clockwise from the +x axis
    cells.sort_by(|a, b| {
        let ra = hex_distance(*a, (0, 0));
        let rb = hex_distance(*b, (0, 0));
        let pa = axial_to_point(a.0, a.1, 1.0);
        let pb = axial_to_point(b.0, b.1, 1.0);
        let ang = |p: Point| {
            let t = p.y.atan2(p.x);
            // snap so exactly-on-axis cells sort first
            let t = if t < -1e-12 { t + 2.0 * PI } else { t.max(0.0) };
            (t * 1e9).round() as i64
        };
        ra.cmp(&rb).then(ang(pa).cmp(&ang(pb)))
    });

    let shifts_axial: Vec<(i64, i64)> = if wrap && r > 0 {
        let a = (2 * r + 1, -r);
        let b = (r, r + 1);
        let c = (a.0 - b.0, a.1 - b.1);
        vec![a, b, c, (-a.0, -a.1), (-b.0, -b.1), (-c.0, -c.1)]
    } else {
        Vec::new()
    };

    let base_stations: Vec<BaseStation> = cells
        .iter()
        .enumerate()
        .map(|(i, &(q, s))| {
            let p = axial_to_point(q, s, inter_site_distance);
            make_bs(
                i,
                Tier::Macro,
                p,
                &spectrum,
                Coverage::Hexagon {
                    center: p,
                    inter_site_distance,
                },
            )
        })
        .collect();

    let neighbor_sets = (0..cells.len())
        .map(|i| {
            (0..cells.len())
                .filter(|&j| j != i)
                .filter(|&j| {
                    let a = cells[i];
                    let b = cells[j];
                    hex_distance(a, b) == 1
                        || shifts_axial
                            .iter()
                            .any(|sh| hex_distance(a, (b.0 + sh.0, b.1 + sh.1)) == 1)
                })
                .collect()
        })
        .collect();

    let wrap_shifts = shifts_axial
        .iter()
        .map(|&(q, s)| axial_to_point(q, s, inter_site_distance))
        .collect();

    let n = cells.len();
    Ok(Network {
        base_stations,
        users: Vec::new(),
        neighbor_sets,
        spectrum,
        homes: Vec::new(),
        wrap_shifts,
        cell_users: vec![Vec::new(); n],
    })
}

/// Two BSs on a line; each cell gets `users_per_group` users at a distance drawn
/// uniformly from the centre band and from the edge band, placed between the BSs.
pub fn build_linear_two_cell(
    bs_distance: f64,
    center_band: (f64, f64),
    edge_band: (f64, f64),
    users_per_group: usize,
    spectrum: Spectrum,
    seed: u64,
) -> Result<Network> {
    if !(bs_distance > 0.0) {
        return Err(Error::Config("BS distance must be positive".into()));
    }
    for (name, (lo, hi)) in [("centre", center_band), ("edge", edge_band)] {
        if !(lo > 0.0 && hi < bs_distance && lo < hi) {
            return Err(Error::Config(format!(
                "{name} band ({lo}, {hi}) must satisfy 0 < lo < hi < {bs_distance}"
            )));
        }
    }
    if center_band.1 > edge_band.0 && edge_band.1 > center_band.0 {
        return Err(Error::Config("centre and edge bands overlap".into()));
    }
    if users_per_group == 0 {
        return Err(Error::Config("users_per_group must be at least 1".into()));
    }
    let positions = [Point::new(0.0, 0.0), Point::new(bs_distance, 0.0)];
    let base_stations = positions
        .iter()
        .enumerate()
        .map(|(i, &p)| make_bs(i, Tier::Macro, p, &spectrum, Coverage::Fixed))
        .collect();

    let mut rng = rng::stream(seed, Stream::Users);
    let mut users = Vec::new();
    for (bs, origin) in positions.iter().enumerate() {
        let dir = if bs == 0 { 1.0 } else { -1.0 };
        for (group, (lo, hi)) in [(PlacementGroup::Center, center_band), (PlacementGroup::Edge, edge_band)] {
            for _ in 0..users_per_group {
                let d = rng.random_range(lo..hi);
                users.push(User {
                    id: users.len(),
                    position: Point::new(origin.x + dir * d, 0.0),
                    serving_bs: bs,
                    mobility: Mobility::Nomadic,
                    indoor: false,
                    home: None,
                    group: Some(group),
                });
            }
        }
    }
    let mut net = Network {
        base_stations,
        users,
        neighbor_sets: vec![vec![1], vec![0]],
        spectrum,
        homes: Vec::new(),
        wrap_shifts: Vec::new(),
        cell_users: Vec::new(),
    };
    net.rebuild_cells();
    Ok(net)
}

/// Relative frequencies of the three femto deployment cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeploymentMix {
    pub single: f64,
    pub symmetric_pair: f64,
    pub asymmetric_pair: f64,
}

impl Default for DeploymentMix {
    fn default() -> Self {
        DeploymentMix {
            single: 1.0,
            symmetric_pair: 1.0,
            asymmetric_pair: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeploymentCase {
    Single,
    SymmetricPair,
    AsymmetricPair,
}

impl DeploymentMix {
    fn validate(&self) -> Result<()> {
        let w = [self.single, self.symmetric_pair, self.asymmetric_pair];
        if w.iter().any(|x| !(*x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("deployment mix weights must be non-negative with a positive sum".into()));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> DeploymentCase {
        let total = self.single + self.symmetric_pair + self.asymmetric_pair;
        let x = rng.random::<f64>() * total;
        if x < self.single {
            DeploymentCase::Single
        } else if x < self.single + self.symmetric_pair {
            DeploymentCase::SymmetricPair
        } else {
            DeploymentCase::AsymmetricPair
        }
    }
}

const FEMTO_PLACEMENT_ATTEMPTS: usize = 10_000;

fn sample_in_hexagon(rng: &mut ChaCha8Rng, center: &Point, isd: f64) -> Point {
    let circum = isd / 3f64.sqrt();
    loop {
        let p = center.offset(rng.random_range(-circum..circum), rng.random_range(-circum..circum));
        if Coverage::contains_hex(center, isd, &p) {
            return p;
        }
    }
}

fn sample_in_disc(rng: &mut ChaCha8Rng, center: &Point, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..2.0 * PI);
    center.offset(r * a.cos(), r * a.sin())
}

/// Adds `femtos_per_macro` femto BSs inside every macro hexagon. Existing users
/// are dropped; call [`place_users`] afterwards.
pub fn build_heterogeneous(
    macro_net: &Network,
    femtos_per_macro: usize,
    mix: DeploymentMix,
    home_size: f64,
    seed: u64,
) -> Result<Network> {
    if femtos_per_macro == 0 {
        return Ok(macro_net.clone());
    }
    mix.validate()?;
    if !(home_size > 0.0) {
        return Err(Error::Config("home size must be positive".into()));
    }
    let mut net = macro_net.clone();
    let mut rng = rng::stream(seed, Stream::Topology);
    let macros: Vec<usize> = net
        .base_stations
        .iter()
        .filter(|b| b.tier == Tier::Macro)
        .map(|b| b.id)
        .collect();
    let min_bs_clearance = home_size.max(20.0);

    for &m in &macros {
        let (center, isd) = match net.base_stations[m].coverage {
            Coverage::Hexagon {
                center,
                inter_site_distance,
            } => (center, inter_site_distance),
            _ => return Err(Error::Topology(format!("macro BS {m} has no hexagonal coverage"))),
        };
        let mut placed = 0;
        while placed < femtos_per_macro {
            let mut case = mix.draw(&mut rng);
            if case != DeploymentCase::Single && femtos_per_macro - placed < 2 {
                case = DeploymentCase::Single;
            }
            let mut ok = None;
            for _ in 0..FEMTO_PLACEMENT_ATTEMPTS {
                let c1 = sample_in_hexagon(&mut rng, &center, isd);
                let mut centers = vec![c1];
                if case != DeploymentCase::Single {
                    let a = rng.random_range(0.0..2.0 * PI);
                    centers.push(c1.offset(home_size * a.cos(), home_size * a.sin()));
                }
                let inside = centers.iter().all(|c| Coverage::contains_hex(&center, isd, c));
                let clear_of_bs = centers
                    .iter()
                    .all(|c| net.base_stations.iter().all(|b| b.position.distance(c) >= min_bs_clearance));
                let clear_of_homes = centers
                    .iter()
                    .all(|c| net.homes.iter().all(|h| h.center.distance(c) >= 2.0 * home_size));
                if inside && clear_of_bs && clear_of_homes {
                    ok = Some(centers);
                    break;
                }
            }
            let centers = ok.ok_or_else(|| {
                Error::Topology(format!(
                    "could not place femto home in macro cell {m} after {FEMTO_PLACEMENT_ATTEMPTS} attempts"
                ))
            })?;

            let mut new_ids = Vec::new();
            for (i, c) in centers.iter().enumerate() {
                let home_id = net.homes.len();
                net.homes.push(Home {
                    id: home_id,
                    center: *c,
                    size: home_size,
                });
                let position = if case == DeploymentCase::AsymmetricPair && i == 0 {
                    // femto 1 sits on the wall shared with home 2
                    let other = centers[1];
                    let d = c.distance(&other);
                    c.offset((other.x - c.x) / d * home_size / 2.0, (other.y - c.y) / d * home_size / 2.0)
                } else {
                    *c
                };
                let id = net.base_stations.len();
                let mut bs = make_bs(
                    id,
                    Tier::Femto,
                    position,
                    &net.spectrum,
                    Coverage::Disc {
                        center: *c,
                        radius: home_size / 2.0,
                    },
                );
                bs.home = Some(home_id);
                net.base_stations.push(bs);
                net.neighbor_sets.push(vec![m]);
                net.cell_users.push(Vec::new());
                new_ids.push(id);
            }
            if new_ids.len() == 2 {
                net.neighbor_sets[new_ids[0]].push(new_ids[1]);
                net.neighbor_sets[new_ids[1]].push(new_ids[0]);
            }
            net.neighbor_sets[m].extend(&new_ids);
            placed += new_ids.len();
        }
    }
    for set in &mut net.neighbor_sets {
        set.sort_unstable();
    }
    net.users.clear();
    net.rebuild_cells();
    Ok(net)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TierUserCounts {
    pub macro_users: usize,
    pub femto_users: usize,
}

impl Default for TierUserCounts {
    fn default() -> Self {
        TierUserCounts {
            macro_users: 20,
            femto_users: 4,
        }
    }
}

/// Drops users uniformly in every cell's coverage region, replacing any
/// existing users. Femto users are indoor and belong to the femto's home.
pub fn place_users(network: &Network, counts: TierUserCounts, seed: u64) -> Result<Network> {
    let has = |t: Tier| network.base_stations.iter().any(|b| b.tier == t);
    if (has(Tier::Macro) || has(Tier::Pico)) && counts.macro_users == 0 {
        return Err(Error::Config("macro/pico cells need at least one user".into()));
    }
    if has(Tier::Femto) && counts.femto_users == 0 {
        return Err(Error::Config("femto cells need at least one user".into()));
    }
    let mut net = network.clone();
    let mut rng = rng::stream(seed, Stream::Users);
    let mut users = Vec::new();
    for bs in &network.base_stations {
        let count = match bs.tier {
            Tier::Femto => counts.femto_users,
            _ => counts.macro_users,
        };
        for _ in 0..count {
            let position = match bs.coverage {
                Coverage::Hexagon {
                    center,
                    inter_site_distance,
                } => sample_in_hexagon(&mut rng, &center, inter_site_distance),
                Coverage::Disc { center, radius } => sample_in_disc(&mut rng, &center, radius),
                Coverage::Voronoi { radius } => {
                    let mut attempts = 0;
                    loop {
                        let p = sample_in_disc(&mut rng, &bs.position, radius);
                        let d_own = p.distance(&bs.position);
                        if network
                            .base_stations
                            .iter()
                            .all(|o| o.id == bs.id || p.distance(&o.position) > d_own)
                        {
                            break p;
                        }
                        attempts += 1;
                        if attempts > 100_000 {
                            return Err(Error::Topology(format!("BS {} has an empty Voronoi region", bs.id)));
                        }
                    }
                }
                Coverage::Fixed => {
                    return Err(Error::Config(format!(
                        "BS {} has layout-fixed users and cannot be re-populated",
                        bs.id
                    )))
                }
            };
            let indoor = bs.tier == Tier::Femto;
            users.push(User {
                id: users.len(),
                position,
                serving_bs: bs.id,
                mobility: Mobility::Nomadic,
                indoor,
                home: if indoor { bs.home } else { None },
                group: None,
            });
        }
    }
    net.users = users;
    net.rebuild_cells();
    Ok(net)
}

/// Sets every user's mobility class.
pub fn with_mobility(network: &Network, mobility: Mobility) -> Network {
    let mut net = network.clone();
    for u in &mut net.users {
        u.mobility = mobility;
    }
    net
}

/// One zone of the mixed-density layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub bs_count: usize,
    #[serde(rename = "inter_site_distance_m")]
    pub inter_site_distance: f64,
}

/// Urban, suburban and rural zones side by side along x, each a hex-lattice
/// patch. Suburban and rural spacings default to 1.5× and 2× the urban one.
pub fn build_mixed_density(zones: &[Zone], spectrum: Spectrum) -> Result<Network> {
    if zones.is_empty() || zones.iter().any(|z| z.bs_count == 0 || !(z.inter_site_distance > 0.0)) {
        return Err(Error::Config("every zone needs BSs and a positive spacing".into()));
    }
    let mut positions: Vec<(Point, f64)> = Vec::new();
    let mut right_edge: Option<(f64, f64)> = None;
    for z in zones {
        let isd = z.inter_site_distance;
        let span = (z.bs_count as f64).sqrt().ceil() as i64 + 2;
        let mut pts: Vec<Point> = Vec::new();
        for q in -2 * span..=2 * span {
            for r in -span..=span {
                pts.push(axial_to_point(q, r, isd));
            }
        }
        // fill a roughly square patch: nearest lattice points to the origin in max-norm
        pts.sort_by(|a, b| {
            let ka = a.x.abs().max(a.y.abs());
            let kb = b.x.abs().max(b.y.abs());
            ka.total_cmp(&kb).then(a.y.total_cmp(&b.y)).then(a.x.total_cmp(&b.x))
        });
        pts.truncate(z.bs_count);
        let min_x = pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let dx = match right_edge {
            None => 0.0,
            Some((edge, prev_isd)) => edge + (prev_isd + isd) / 2.0 - min_x,
        };
        for p in &pts {
            positions.push((p.offset(dx, 0.0), isd));
        }
        let max_x = pts.iter().map(|p| p.x + dx).fold(f64::NEG_INFINITY, f64::max);
        right_edge = Some((max_x, isd));
    }
    let base_stations: Vec<BaseStation> = positions
        .iter()
        .enumerate()
        .map(|(i, (p, isd))| make_bs(i, Tier::Macro, *p, &spectrum, Coverage::Voronoi { radius: *isd }))
        .collect();
    let neighbor_sets = (0..positions.len())
        .map(|i| {
            (0..positions.len())
                .filter(|&j| j != i)
                .filter(|&j| {
                    let limit = 1.2 * positions[i].1.max(positions[j].1);
                    positions[i].0.distance(&positions[j].0) <= limit
                })
                .collect()
        })
        .collect();
    let n = positions.len();
    Ok(Network {
        base_stations,
        users: Vec::new(),
        neighbor_sets,
        spectrum,
        homes: Vec::new(),
        wrap_shifts: Vec::new(),
        cell_users: vec![Vec::new(); n],
    })
}

/// Default mixed-density zones: 15 urban, 15 suburban, 8 rural BSs.
pub fn default_zones(urban_isd: f64) -> Vec<Zone> {
    vec![
        Zone {
            bs_count: 15,
            inter_site_distance: urban_isd,
        },
        Zone {
            bs_count: 15,
            inter_site_distance: 1.5 * urban_isd,
        },
        Zone {
            bs_count: 8,
            inter_site_distance: 2.0 * urban_isd,
        },
    ]
}

/// Flags users whose strongest neighbour gain is within `threshold_db` of
/// their serving gain. Gains are averaged over subchannels first.
pub fn classify_edge_users(network: &Network, gains: &GainSnapshot, threshold_db: f64) -> Vec<bool> {
    network
        .users
        .iter()
        .map(|u| {
            let serving = gains.mean_over_subchannels(u.id, u.serving_bs);
            let best = network
                .neighbors(u.serving_bs)
                .iter()
                .map(|&m| gains.mean_over_subchannels(u.id, m))
                .fold(f64::NEG_INFINITY, f64::max);
            if best == f64::NEG_INFINITY {
                return false;
            }
            let ratio_db = 10.0 * (best / serving).log10();
            ratio_db >= -threshold_db
        })
        .collect()
}

/// Fraction of edge users (ρ).
pub fn edge_fraction(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        return 0.0;
    }
    flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hex(rings: usize, isd: f64, wrap: bool) -> Network {
        build_hex_grid(rings, isd, wrap, Spectrum::default()).unwrap()
    }

    #[test]
    fn hex_counts_follow_formula() {
        for rings in 0..=4 {
            let net = hex(rings, 1000.0, false);
            assert_eq!(net.bs_count(), 1 + 3 * rings * (rings + 1));
        }
        assert_eq!(hex(2, 1000.0, false).bs_count(), 19);
    }

    #[test]
    fn single_cell_has_no_neighbors() {
        let net = hex(0, 1000.0, false);
        assert_eq!(net.bs_count(), 1);
        assert!(net.neighbors(0).is_empty());
    }

    #[test]
    fn center_of_seven_cells_has_six_neighbors_at_isd() {
        let net = hex(1, 2000.0, false);
        assert_eq!(net.bs_count(), 7);
        assert_eq!(net.neighbors(0).len(), 6);
        for &m in net.neighbors(0) {
            let d = net.base_stations[0].position.distance(&net.base_stations[m].position);
            assert!((d - 2000.0).abs() < 1e-9);
        }
    }

    #[test]
    fn hex_neighbors_symmetric_and_bounded() {
        for wrap in [false, true] {
            let net = hex(2, 1000.0, wrap);
            for n in 0..net.bs_count() {
                assert!(net.neighbors(n).len() <= 6);
                if wrap {
                    assert_eq!(net.neighbors(n).len(), 6);
                }
                for &m in net.neighbors(n) {
                    assert!(net.neighbors(m).contains(&n));
                }
            }
        }
    }

    #[test]
    fn wrap_shortens_edge_distances() {
        let net = hex(2, 1000.0, true);
        let edge_bs = net.bs_count() - 1;
        let far = net.base_stations.iter().map(|b| b.id).filter(|&b| b != edge_bs).collect::<Vec<_>>();
        let p = net.base_stations[edge_bs].position;
        let max_wrapped = far.iter().map(|&m| net.distance_to_bs(&p, m)).fold(0.0, f64::max);
        // in a wrapped 19-cell cluster no BS is more than two hops away
        assert!(max_wrapped <= 2.0 * 1000.0 + 1e-6, "{max_wrapped}");
    }

    #[test]
    fn two_cell_layout_respects_bands() {
        let net = build_linear_two_cell(2000.0, (200.0, 400.0), (700.0, 900.0), 3, Spectrum::default(), 5).unwrap();
        assert_eq!(net.bs_count(), 2);
        assert_eq!(net.users_of(0).len(), 6);
        assert_eq!(net.neighbors(0), &[1]);
        assert_eq!(net.neighbors(1), &[0]);
        for u in &net.users {
            let d = net.distance_to_bs(&u.position, u.serving_bs);
            match u.group.unwrap() {
                PlacementGroup::Center => assert!((200.0..400.0).contains(&d)),
                PlacementGroup::Edge => assert!((700.0..900.0).contains(&d)),
            }
        }
        let one = build_linear_two_cell(2000.0, (200.0, 400.0), (700.0, 900.0), 1, Spectrum::default(), 5).unwrap();
        assert_eq!(one.users_of(1).len(), 2);
    }

    #[test]
    fn two_cell_rejects_bad_bands() {
        let s = Spectrum::default();
        assert!(build_linear_two_cell(2000.0, (400.0, 200.0), (700.0, 900.0), 1, s, 0).is_err());
        assert!(build_linear_two_cell(2000.0, (200.0, 800.0), (700.0, 900.0), 1, s, 0).is_err());
        assert!(build_linear_two_cell(2000.0, (200.0, 400.0), (700.0, 2100.0), 1, s, 0).is_err());
    }

    #[test]
    fn heterogeneous_counts_and_neighbors() {
        let macro_net = hex(2, 1000.0, false);
        let het = build_heterogeneous(&macro_net, 5, DeploymentMix::default(), 10.0, 3).unwrap();
        let femtos = het.base_stations.iter().filter(|b| b.tier == Tier::Femto).count();
        assert_eq!(het.bs_count(), 19 + 95);
        assert_eq!(femtos, 95);
        for bs in het.base_stations.iter().filter(|b| b.tier == Tier::Femto) {
            let nb = het.neighbors(bs.id);
            let macros: Vec<_> = nb.iter().filter(|&&m| het.base_stations[m].tier == Tier::Macro).collect();
            assert_eq!(macros.len(), 1);
            assert!(het.neighbors(*macros[0]).contains(&bs.id));
            assert!(nb.len() <= 2);
        }
        assert_eq!(build_heterogeneous(&macro_net, 0, DeploymentMix::default(), 10.0, 3).unwrap(), macro_net);
    }

    #[test]
    fn symmetric_pair_spacing_equals_home_size() {
        let macro_net = hex(0, 1000.0, false);
        let mix = DeploymentMix {
            single: 0.0,
            symmetric_pair: 1.0,
            asymmetric_pair: 0.0,
        };
        let het = build_heterogeneous(&macro_net, 2, mix, 12.0, 9).unwrap();
        let d = het.base_stations[1].position.distance(&het.base_stations[2].position);
        assert!((d - 12.0).abs() < 1e-9);
        let asym = DeploymentMix {
            single: 0.0,
            symmetric_pair: 0.0,
            asymmetric_pair: 1.0,
        };
        let het = build_heterogeneous(&macro_net, 2, asym, 12.0, 9).unwrap();
        let d = het.base_stations[1].position.distance(&het.base_stations[2].position);
        assert!((d - 6.0).abs() < 1e-9);
    }

    #[test]
    fn place_users_counts_and_determinism() {
        let macro_net = hex(2, 1000.0, false);
        let a = place_users(&macro_net, TierUserCounts::default(), 11).unwrap();
        let b = place_users(&macro_net, TierUserCounts::default(), 11).unwrap();
        assert_eq!(a.user_count(), 380);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        a.validate().unwrap();
        for u in &a.users {
            if let Coverage::Hexagon { center, inter_site_distance } = a.base_stations[u.serving_bs].coverage {
                assert!(Coverage::contains_hex(&center, inter_site_distance, &u.position));
            }
        }

        let het = build_heterogeneous(&macro_net, 5, DeploymentMix::default(), 10.0, 3).unwrap();
        let het = place_users(&het, TierUserCounts::default(), 4).unwrap();
        for bs in het.base_stations.iter().filter(|b| b.tier == Tier::Femto) {
            let members = het.users_of(bs.id);
            assert_eq!(members.len(), 4);
            assert!(members.iter().all(|&k| het.users[k].indoor));
        }
        let total: usize = (0..het.bs_count()).map(|n| het.users_of(n).len()).sum();
        assert_eq!(total, het.user_count());
    }

    #[test]
    fn place_users_rejects_empty_tier() {
        let macro_net = hex(1, 1000.0, false);
        let counts = TierUserCounts {
            macro_users: 0,
            femto_users: 4,
        };
        assert!(place_users(&macro_net, counts, 1).is_err());
    }

    #[test]
    fn mixed_density_zones_and_symmetry() {
        let net = build_mixed_density(&default_zones(500.0), Spectrum::default()).unwrap();
        assert_eq!(net.bs_count(), 38);
        for n in 0..net.bs_count() {
            assert!(!net.neighbors(n).is_empty(), "BS {n} isolated");
            for &m in net.neighbors(n) {
                assert!(net.neighbors(m).contains(&n));
            }
        }
        let populated = place_users(&net, TierUserCounts::default(), 2).unwrap();
        assert_eq!(populated.user_count(), 38 * 20);
        let order = net.bs_by_density();
        assert!(order[..15].iter().all(|&b| b < 15));
    }

    #[test]
    fn json_round_trip() {
        let net = place_users(&hex(1, 1000.0, true), TierUserCounts::default(), 1).unwrap();
        let back = Network::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(back, net);
    }
}
