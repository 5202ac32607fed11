//! Base-station layouts and channel-power marks.
//!
//! A realization places each tier on a disc centred on the typical user at the
//! origin, either as a homogeneous PPP or as a randomly translated and rotated
//! hexagonal lattice, then attaches a direct mark `h ~ Gamma(delta, 1)` and an
//! interfering mark `g ~ Gamma(psi, 1)` to every base station. Gamma marks are
//! sums of unit exponentials read from the slot's own stream, so two systems
//! sampled with the same `(seed, index)` share exponential prefixes.

pub mod stream;

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use sha2::{Digest, Sha256};

use crate::model::{self, ConfigError, NetworkConfig};
pub use stream::{mix64, Role, StreamKey, TIER_SLOT};

/// Polar position of a base station relative to the typical user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub distance: f64,
    pub angle: f64,
}

/// How a tier's base stations are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementKind {
    #[default]
    Ppp,
    HexGrid,
}

/// Per-tier placement; tiers beyond the listed ones use a PPP.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Placement(pub Vec<PlacementKind>);

impl Placement {
    pub fn ppp() -> Self {
        Self(Vec::new())
    }

    pub fn kind(&self, tier: usize) -> PlacementKind {
        self.0.get(tier).copied().unwrap_or_default()
    }

    fn validate(&self, config: &NetworkConfig) -> Result<(), ConfigError> {
        if self.0.len() > config.tiers.len() {
            return Err(ConfigError::PlacementLength { placements: self.0.len(), tiers: config.tiers.len() });
        }
        for (tier, kind) in self.0.iter().enumerate() {
            if *kind == PlacementKind::HexGrid && config.tiers[tier].thinning.is_some() {
                return Err(ConfigError::HexThinned { tier });
            }
        }
        Ok(())
    }
}

/// How marks are drawn for single-antenna tiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarkModel {
    /// Physical model: a SISO base station has one exp(1) channel power that
    /// serves as both its direct and interfering mark.
    #[default]
    Technique,
    /// Every tier is described only by its shape pair `(delta, psi)` and the two
    /// marks are always independent. Used for coupled ordering checks, where a
    /// SISO tier enters as `(1, 1)`.
    ShapeProfile,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsRecord {
    pub tier: usize,
    pub distance: f64,
    pub direct_mark: f64,
    pub interference_mark: f64,
}

/// SHA-256 of a configuration's canonical JSON form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConfigDigest(pub [u8; 32]);

impl ConfigDigest {
    pub fn of<T: serde::Serialize>(value: &T) -> Self {
        let json = serde_json::to_vec(value).expect("configuration serializes to JSON");
        Self(Sha256::digest(&json).into())
    }
}

impl std::fmt::Display for ConfigDigest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub bs: Vec<BsRecord>,
    pub seed: u64,
    pub index: u64,
    pub config_digest: ConfigDigest,
}

/// Uniform on `(0, 1]`.
#[inline]
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(mean).expect("finite positive Poisson mean").sample(rng);
    draw as u64
}

fn for_each_ppp_point<R: Rng + ?Sized>(density: f64, radius: f64, rng: &mut R, mut visit: impl FnMut(u64, Point)) {
    let count = poisson_count(density * PI * radius * radius, rng);
    for slot in 0..count {
        let distance = radius * open_unit(rng).sqrt();
        let angle = 2.0 * PI * rng.random::<f64>();
        visit(slot, Point { distance, angle });
    }
}

/// Homogeneous PPP of `density` on the disc of `radius` around the origin:
/// a Poisson(`density * pi * radius^2`) count of i.i.d. uniform points.
pub fn sample_ppp_tier<R: Rng + ?Sized>(density: f64, radius: f64, rng: &mut R) -> Vec<Point> {
    let mut points = Vec::new();
    for_each_ppp_point(density, radius, rng, |_, p| points.push(p));
    points
}

/// Nearest-neighbour spacing of a hexagonal lattice with `density` points per
/// unit area (`density = 2 / (sqrt(3) d^2)`).
pub fn hex_spacing(density: f64) -> f64 {
    (2.0 / (3f64.sqrt() * density)).sqrt()
}

/// Hexagonal lattice points within `radius` of the origin. The lattice is
/// translated by `offset`, given in lattice coordinates in `[0, 1)^2`, and then
/// rotated by `rotation` radians.
pub fn hex_lattice(density: f64, radius: f64, offset: [f64; 2], rotation: f64) -> Vec<Point> {
    let d = hex_spacing(density);
    let row = d * 3f64.sqrt() / 2.0;
    let rows = ((radius + 2.0 * d) / row).ceil() as i64;
    let cols = ((radius + 2.0 * d) / d).ceil() as i64 + rows / 2 + 1;
    let (ox, oy) = (offset[0] * d + offset[1] * d / 2.0, offset[1] * row);
    let mut points = Vec::new();
    for j in -rows..=rows {
        for i in -cols..=cols {
            let x = ox + i as f64 * d + j as f64 * d / 2.0;
            let y = oy + j as f64 * row;
            let distance = x.hypot(y);
            if distance <= radius {
                points.push(Point { distance, angle: y.atan2(x) + rotation });
            }
        }
    }
    points
}

/// Hexagonal lattice with a uniform random translation over one cell and a
/// uniform random rotation, so the origin is a typical location.
pub fn sample_hex_tier<R: Rng + ?Sized>(density: f64, radius: f64, rng: &mut R) -> Vec<Point> {
    let offset = [rng.random::<f64>(), rng.random::<f64>()];
    let rotation = 2.0 * PI * rng.random::<f64>();
    hex_lattice(density, radius, offset, rotation)
}

/// `Gamma(shape, 1)` draw as the sum of `shape` unit exponentials.
pub fn sample_gamma_mark<R: Rng + ?Sized>(shape: u32, rng: &mut R) -> f64 {
    (0..shape).map(|_| -> f64 { Exp1.sample(rng) }).sum()
}

/// Prepared sampler for one configuration and placement.
#[derive(Debug, Clone)]
pub struct Sampler {
    config: NetworkConfig,
    placement: Placement,
    radius: f64,
    digest: ConfigDigest,
    marks: MarkModel,
}

impl Sampler {
    pub fn new(config: &NetworkConfig, placement: &Placement) -> Result<Self, ConfigError> {
        let config = model::validate(config)?;
        placement.validate(&config)?;
        Ok(Self {
            radius: config.effective_radius(),
            digest: ConfigDigest::of(&config),
            config,
            placement: placement.clone(),
            marks: MarkModel::Technique,
        })
    }

    pub fn with_mark_model(mut self, marks: MarkModel) -> Self {
        self.marks = marks;
        self
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn placement(&self) -> &Placement {
        &self.placement
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn digest(&self) -> ConfigDigest {
        self.digest
    }

    /// Sample realization `index` under `seed` into `out`, replacing its contents.
    pub fn fill(&self, seed: u64, index: u64, out: &mut Vec<BsRecord>) {
        out.clear();
        for (tier_index, tier) in self.config.tiers.iter().enumerate() {
            if tier.density <= 0.0 {
                continue;
            }
            let stream = self.config.stream_id(tier_index);
            let key = |slot, role| StreamKey::new(seed, index, stream, slot, role);
            let delta = tier.delta();
            let psi = tier.psi();
            let shared_siso = tier.is_siso() && self.marks == MarkModel::Technique;
            let mut place = |slot: u64, point: Point| {
                if let Some(band) = tier.thinning {
                    let u: f64 = key(slot, Role::Thinning).open().random();
                    if !band.contains(u) {
                        return;
                    }
                }
                let interference_mark = sample_gamma_mark(psi, &mut key(slot, Role::Interference).open());
                let direct_mark = if shared_siso {
                    interference_mark
                } else {
                    sample_gamma_mark(delta, &mut key(slot, Role::Direct).open())
                };
                out.push(BsRecord { tier: tier_index, distance: point.distance, direct_mark, interference_mark });
            };
            let mut location = key(TIER_SLOT, Role::Location).open();
            match self.placement.kind(tier_index) {
                PlacementKind::Ppp => {
                    for_each_ppp_point(tier.sampled_density(), self.radius, &mut location, &mut place)
                }
                PlacementKind::HexGrid => {
                    for (slot, point) in
                        sample_hex_tier(tier.density, self.radius, &mut location).into_iter().enumerate()
                    {
                        place(slot as u64, point);
                    }
                }
            }
        }
    }

    pub fn realization(&self, seed: u64, index: u64) -> Realization {
        let mut bs = Vec::new();
        self.fill(seed, index, &mut bs);
        Realization { bs, seed, index, config_digest: self.digest }
    }
}

/// One realization of `config`; `(seed, index)` determines it completely.
pub fn sample_realization(
    config: &NetworkConfig,
    placement: &Placement,
    seed: u64,
    index: u64,
) -> Result<Realization, ConfigError> {
    Ok(Sampler::new(config, placement)?.realization(seed, index))
}

/// Debug dump: one CSV row `tier,distance,h,g` per base station.
pub fn write_realization_csv<W: Write>(realization: &Realization, mut out: W) -> io::Result<()> {
    writeln!(out, "# seed: {}", realization.seed)?;
    writeln!(out, "# index: {}", realization.index)?;
    writeln!(out, "# config_digest: {}", realization.config_digest)?;
    writeln!(out, "tier,distance,h,g")?;
    for bs in &realization.bs {
        writeln!(out, "{},{:.9e},{:.9e},{:.9e}", bs.tier + 1, bs.distance, bs.direct_mark, bs.interference_mark)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{split_theta, Access, ThetaSplit, TierConfig, TransmissionTechnique};
    use rand::SeedableRng;
    use rand_xoshiro::SplitMix64;

    fn rng(seed: u64) -> SplitMix64 {
        SplitMix64::seed_from_u64(seed)
    }

    fn ks_uniform(mut u: Vec<f64>) -> f64 {
        u.sort_by(f64::total_cmp);
        let n = u.len() as f64;
        u.iter()
            .enumerate()
            .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
            .fold(0.0, f64::max)
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn zero_density_is_empty() {
        assert!(sample_ppp_tier(0.0, 10.0, &mut rng(1)).is_empty());
    }

    #[test]
    fn ppp_count_has_poisson_mean() {
        // lambda pi R^2 = 100; mean of 1e4 counts has sd 0.1.
        let radius = (100.0 / PI).sqrt();
        let mut r = rng(2);
        let n = 10_000;
        let counts: Vec<f64> = (0..n).map(|_| sample_ppp_tier(1.0, radius, &mut r).len() as f64).collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 100.0).abs() < 0.3, "mean {mean}");
        assert!((var - 100.0).abs() < 5.0, "variance {var}");
    }

    #[test]
    fn ppp_points_are_uniform_on_disc() {
        let radius = 3.0;
        let mut r = rng(3);
        let mut u = Vec::new();
        let mut angles = Vec::new();
        while u.len() < 100_000 {
            for p in sample_ppp_tier(2.0, radius, &mut r) {
                assert!(p.distance > 0.0 && p.distance <= radius);
                u.push((p.distance / radius).powi(2));
                angles.push(p.angle / (2.0 * PI));
            }
        }
        assert!(ks_uniform(u) < 0.01);
        assert!(ks_uniform(angles) < 0.01);
    }

    #[test]
    fn hex_nearest_point_within_cell_circumradius() {
        let density = 0.7;
        let d = hex_spacing(density);
        assert!((2.0 / (3f64.sqrt() * d * d) - density).abs() < 1e-12);
        let mut r = rng(4);
        let mut max_nearest: f64 = 0.0;
        for _ in 0..5_000 {
            let pts = sample_hex_tier(density, 6.0 * d, &mut r);
            let nearest = pts.iter().map(|p| p.distance).fold(f64::INFINITY, f64::min);
            assert!(nearest <= d / 3f64.sqrt() + 1e-12);
            max_nearest = max_nearest.max(nearest);
        }
        // The support reaches the cell corner.
        assert!(max_nearest > 0.95 * d / 3f64.sqrt());
    }

    #[test]
    fn hex_density_matches() {
        let density = 1.0;
        let radius = 20.0;
        let mut r = rng(5);
        let n = 10_000;
        let total: usize = (0..n).map(|_| sample_hex_tier(density, radius, &mut r).len()).sum();
        let empirical = total as f64 / (n as f64 * PI * radius * radius);
        assert!((empirical - density).abs() < 0.02 * density, "{empirical}");
    }

    #[test]
    fn hex_zero_offset_is_deterministic() {
        let a = hex_lattice(1.0, 5.0, [0.0, 0.0], 0.0);
        let b = hex_lattice(1.0, 5.0, [0.0, 0.0], 0.0);
        assert_eq!(a, b);
        assert!(a.iter().any(|p| p.distance == 0.0));
        let d = hex_spacing(1.0);
        let ring = a.iter().filter(|p| (p.distance - d).abs() < 1e-9).count();
        assert_eq!(ring, 6);
    }

    #[test]
    fn gamma_mark_moments() {
        let mut r = rng(6);
        let n = 1_000_000;
        let mean1 = (0..n).map(|_| sample_gamma_mark(1, &mut r)).sum::<f64>() / n as f64;
        assert!((mean1 - 1.0).abs() < 0.01, "{mean1}");
        let draws: Vec<f64> = (0..n).map(|_| sample_gamma_mark(4, &mut r)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 4.0).abs() < 0.02, "{mean}");
        assert!((var - 4.0).abs() < 0.1, "{var}");
    }

    #[test]
    fn gamma_mark_fixed_seed_is_reproducible() {
        let a: Vec<u64> =
            (0..100).map(|_| 0).scan(rng(9), |r, _: u64| Some(sample_gamma_mark(3, r).to_bits())).collect();
        let b: Vec<u64> =
            (0..100).map(|_| 0).scan(rng(9), |r, _: u64| Some(sample_gamma_mark(3, r).to_bits())).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn coupled_marks_are_pathwise_ordered() {
        for slot in 0..20_000u64 {
            let key = StreamKey::new(11, 0, 0, slot, Role::Direct);
            let small = sample_gamma_mark(2, &mut key.open());
            let large = sample_gamma_mark(5, &mut key.open());
            assert!(large >= small);
        }
    }

    fn two_tier(technique: TransmissionTechnique, antennas: u32) -> NetworkConfig {
        let mut cfg = NetworkConfig::new(
            vec![
                TierConfig::new(1.0, 1.0, 1.0, technique, antennas).unwrap(),
                TierConfig::new(0.01, 2.0, 1.0, technique, antennas).unwrap(),
            ],
            3.8,
        );
        cfg.min_expected_bs_per_tier = 200;
        cfg
    }

    #[test]
    fn realization_counts_follow_densities() {
        let cfg = two_tier(TransmissionTechnique::SuBf, 4);
        let sampler = Sampler::new(&cfg, &Placement::ppp()).unwrap();
        let n = 2_000;
        let mut counts = [0usize; 2];
        for index in 0..n {
            for bs in sampler.realization(1, index).bs {
                counts[bs.tier] += 1;
            }
        }
        let mean = counts.map(|c| c as f64 / n as f64);
        // sd of each mean: sqrt(200/2000) = 0.32 and sqrt(400/2000) = 0.45.
        assert!((mean[0] - 200.0).abs() < 1.5, "{mean:?}");
        assert!((mean[1] - 400.0).abs() < 2.0, "{mean:?}");
    }

    #[test]
    fn siso_marks_coincide() {
        let cfg = two_tier(TransmissionTechnique::Siso, 1);
        let r = sample_realization(&cfg, &Placement::ppp(), 3, 0).unwrap();
        assert!(!r.bs.is_empty());
        assert!(r.bs.iter().all(|b| b.direct_mark == b.interference_mark));
        let shaped =
            Sampler::new(&cfg, &Placement::ppp()).unwrap().with_mark_model(MarkModel::ShapeProfile).realization(3, 0);
        assert!(shaped.bs.iter().any(|b| b.direct_mark != b.interference_mark));
    }

    #[test]
    fn realization_is_deterministic() {
        let cfg = two_tier(TransmissionTechnique::Sdma { users: 2 }, 4);
        let a = sample_realization(&cfg, &Placement::ppp(), 5, 17).unwrap();
        let b = sample_realization(&cfg, &Placement::ppp(), 5, 17).unwrap();
        assert_eq!(a, b);
        let c = sample_realization(&cfg, &Placement::ppp(), 5, 18).unwrap();
        assert_ne!(a.bs, c.bs);
    }

    #[test]
    fn direct_and_interference_marks_uncorrelated() {
        let mut cfg = two_tier(TransmissionTechnique::Sdma { users: 2 }, 4);
        cfg.tiers.truncate(1);
        let sampler = Sampler::new(&cfg, &Placement::ppp()).unwrap();
        let (mut h, mut g) = (Vec::new(), Vec::new());
        let mut index = 0;
        while h.len() < 100_000 {
            for bs in sampler.realization(8, index).bs {
                h.push(bs.direct_mark);
                g.push(bs.interference_mark);
            }
            index += 1;
        }
        assert!(correlation(&h, &g).abs() < 0.01);
    }

    #[test]
    fn counts_at_successive_indices_uncorrelated() {
        let mut cfg = two_tier(TransmissionTechnique::Siso, 1);
        cfg.tiers.truncate(1);
        cfg.min_expected_bs_per_tier = 50;
        let sampler = Sampler::new(&cfg, &Placement::ppp()).unwrap();
        let counts: Vec<f64> = (0..100_000).map(|i| sampler.realization(21, i).bs.len() as f64).collect();
        let rho = correlation(&counts[..counts.len() - 1], &counts[1..]);
        assert!(rho.abs() < 0.01, "{rho}");
    }

    #[test]
    fn theta_split_partitions_the_parent() {
        let cfg = two_tier(TransmissionTechnique::SuBf, 4);
        let whole = Sampler::new(&cfg, &Placement::ppp()).unwrap();
        let split = split_theta(&cfg, ThetaSplit { tier_index: 1, open_fraction: 0.3 }).unwrap();
        let parts = Sampler::new(&split, &Placement::ppp()).unwrap();
        for index in 0..20 {
            let a = whole.realization(4, index);
            let b = parts.realization(4, index);
            let key = |r: &BsRecord| (r.distance.to_bits(), r.direct_mark.to_bits());
            let mut tier2: Vec<_> = a.bs.iter().filter(|r| r.tier == 1).map(key).collect();
            let mut sub: Vec<_> = b.bs.iter().filter(|r| r.tier >= 1).map(key).collect();
            tier2.sort();
            sub.sort();
            assert_eq!(tier2, sub);
            let tier1 = |r: &Realization| r.bs.iter().filter(|x| x.tier == 0).copied().collect::<Vec<_>>();
            assert_eq!(tier1(&a), tier1(&b));
        }
        let open_share = {
            let (mut open, mut all) = (0usize, 0usize);
            for index in 0..200 {
                for bs in parts.realization(4, index).bs.iter().filter(|r| r.tier >= 1) {
                    all += 1;
                    open += usize::from(bs.tier == 1);
                }
            }
            open as f64 / all as f64
        };
        assert!((open_share - 0.3).abs() < 0.01, "{open_share}");
        assert_eq!(split.tiers[2].access, Access::Closed);
    }

    #[test]
    fn hex_thinning_rejected() {
        let cfg = two_tier(TransmissionTechnique::SuBf, 4);
        let split = split_theta(&cfg, ThetaSplit { tier_index: 1, open_fraction: 0.3 }).unwrap();
        let placement = Placement(vec![PlacementKind::Ppp, PlacementKind::HexGrid]);
        assert!(matches!(Sampler::new(&split, &placement), Err(ConfigError::HexThinned { tier: 1 })));
    }

    #[test]
    fn dump_writes_one_row_per_bs() {
        let cfg = two_tier(TransmissionTechnique::SuBf, 2);
        let r = sample_realization(&cfg, &Placement::ppp(), 1, 1).unwrap();
        let mut buf = Vec::new();
        write_realization_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows = text.lines().filter(|l| !l.starts_with('#')).count();
        assert_eq!(rows, r.bs.len() + 1);
    }
}
