//! Network and tier configuration.
//!
//! Absolute units are arbitrary. Without thermal noise only the ratios of
//! transmit powers and of deployment densities affect any result, so powers
//! can be given relative to the strongest tier and densities relative to the
//! first.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of base stations every positive-density tier is expected to
/// place inside the simulation disc.
pub const DEFAULT_MIN_EXPECTED_BS: u32 = 500;

/// Largest Gamma shape a tier may use. Each mark draws at most this many
/// exponentials from its per-slot stream.
pub const MAX_SHAPE: u32 = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("network has no tiers")]
    NoTiers,
    #[error("path_loss_exponent {0} must exceed 2")]
    PathLossExponent(f64),
    #[error("tier {tier}: users_served exceeds antennas ({users} > {antennas})")]
    UsersExceedAntennas { tier: usize, users: u32, antennas: u32 },
    #[error("tier {tier}: {field} must be at least 1")]
    ZeroCount { tier: usize, field: &'static str },
    #[error("tier {tier}: {field} is {value}, must be at most {MAX_SHAPE}")]
    ShapeTooLarge { tier: usize, field: &'static str, value: u32 },
    #[error("tier {tier}: {field} must be positive and finite (got {value})")]
    NotPositive { tier: usize, field: &'static str, value: f64 },
    #[error("tier {tier}: {field} must be non-negative and finite (got {value})")]
    Negative { tier: usize, field: &'static str, value: f64 },
    #[error("tier {tier}: resource_fraction {value} must lie in (0, 1]")]
    ResourceFraction { tier: usize, value: f64 },
    #[error("tier {tier}: thinning band [{lo}, {hi}) is not a sub-interval of [0, 1]")]
    ThinningBand { tier: usize, lo: f64, hi: f64 },
    #[error("tier {tier}: density {density} does not match parent density times band width")]
    ThinningDensity { tier: usize, density: f64 },
    #[error("tiers {first} and {second} share stream {stream} but are not thinned from one parent")]
    StreamClash { first: usize, second: usize, stream: u32 },
    #[error("sim_radius {0} must be positive and finite")]
    SimRadius(f64),
    #[error("min_expected_bs_per_tier must be at least 1")]
    MinExpected,
    #[error("tier index {index} out of range for {tiers} tiers")]
    TierIndex { index: usize, tiers: usize },
    #[error("open fraction {0} must lie in [0, 1]")]
    OpenFraction(f64),
    #[error("{technique} requires {requirement} (antennas = {antennas})")]
    Technique { technique: &'static str, requirement: &'static str, antennas: u32 },
    #[error("placement lists {placements} tiers but the network has {tiers}")]
    PlacementLength { placements: usize, tiers: usize },
    #[error("tier {tier}: hex-grid placement cannot be combined with thinning")]
    HexThinned { tier: usize },
}

/// Whether a typical user may be served by a tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    #[default]
    Open,
    Closed,
}

/// Multi-antenna transmission technique under zero-forcing precoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransmissionTechnique {
    /// One antenna, one user.
    Siso,
    /// Single-user beamforming: `M >= 2` antennas serve one user.
    SuBf,
    /// Space-division multiple access serving `users` with `2 <= users <= M`.
    /// Full SDMA is `users == M`.
    Sdma { users: u32 },
}

impl TransmissionTechnique {
    pub fn name(&self) -> &'static str {
        match self {
            TransmissionTechnique::Siso => "SISO",
            TransmissionTechnique::SuBf => "SU-BF",
            TransmissionTechnique::Sdma { .. } => "SDMA",
        }
    }
}

/// Gamma shapes `(delta, psi)` of the direct and interfering channel powers for
/// a technique on `antennas` antennas: direct `h ~ Gamma(M - psi + 1, 1)`,
/// interfering `g ~ Gamma(psi, 1)`.
pub fn technique_shapes(technique: TransmissionTechnique, antennas: u32) -> Result<(u32, u32), ConfigError> {
    match technique {
        TransmissionTechnique::Siso if antennas == 1 => Ok((1, 1)),
        TransmissionTechnique::Siso => {
            Err(ConfigError::Technique { technique: "SISO", requirement: "exactly one antenna", antennas })
        }
        TransmissionTechnique::SuBf if antennas >= 2 => Ok((antennas, 1)),
        TransmissionTechnique::SuBf => {
            Err(ConfigError::Technique { technique: "SU-BF", requirement: "at least two antennas", antennas })
        }
        TransmissionTechnique::Sdma { users } if users >= 2 && users <= antennas => Ok((antennas - users + 1, users)),
        TransmissionTechnique::Sdma { .. } => {
            Err(ConfigError::Technique { technique: "SDMA", requirement: "2 <= users <= antennas", antennas })
        }
    }
}

/// Marks a tier as an independent thinning of a parent PPP. Base stations of
/// the parent whose thinning uniform falls in `[lo, hi)` belong to this tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thinning {
    pub parent_density: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Thinning {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, u: f64) -> bool {
        u >= self.lo && u < self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierConfig {
    /// Per-user transmit power.
    pub power: f64,
    /// Base stations per unit area.
    pub density: f64,
    /// Target SIR, linear.
    pub target_sir: f64,
    pub antennas: u32,
    pub users_served: u32,
    #[serde(default)]
    pub access: Access,
    /// Share of time-frequency resources each user receives.
    pub resource_fraction: f64,
    /// Rate target, in bits/s/Hz after the `resource_fraction` scaling.
    pub rate_target: f64,
    /// Random-stream identifier; defaults to the tier index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thinning: Option<Thinning>,
}

impl TierConfig {
    /// Open-access tier with unit resource fraction and zero rate target.
    pub fn new(
        power: f64,
        density: f64,
        target_sir: f64,
        technique: TransmissionTechnique,
        antennas: u32,
    ) -> Result<Self, ConfigError> {
        let (_, psi) = technique_shapes(technique, antennas)?;
        Ok(Self {
            power,
            density,
            target_sir,
            antennas,
            users_served: psi,
            access: Access::Open,
            resource_fraction: 1.0,
            rate_target: 0.0,
            stream: None,
            thinning: None,
        })
    }

    pub fn with_access(mut self, access: Access) -> Self {
        self.access = access;
        self
    }

    pub fn with_rate(mut self, resource_fraction: f64, rate_target: f64) -> Self {
        self.resource_fraction = resource_fraction;
        self.rate_target = rate_target;
        self
    }

    /// Replace antennas and users served by those of `technique`.
    pub fn set_technique(&mut self, technique: TransmissionTechnique, antennas: u32) -> Result<(), ConfigError> {
        let (_, psi) = technique_shapes(technique, antennas)?;
        self.antennas = antennas;
        self.users_served = psi;
        Ok(())
    }

    /// Direct-link Gamma shape `M - psi + 1`. Assumes a validated tier.
    pub fn delta(&self) -> u32 {
        self.antennas + 1 - self.users_served
    }

    /// Interfering-link Gamma shape.
    pub fn psi(&self) -> u32 {
        self.users_served
    }

    pub fn technique(&self) -> TransmissionTechnique {
        match (self.antennas, self.users_served) {
            (1, _) => TransmissionTechnique::Siso,
            (_, 1) => TransmissionTechnique::SuBf,
            (_, users) => TransmissionTechnique::Sdma { users },
        }
    }

    pub fn is_siso(&self) -> bool {
        self.antennas == 1
    }

    pub fn is_open(&self) -> bool {
        self.access == Access::Open
    }

    /// Density of the point process the sampler actually draws for this tier.
    pub fn sampled_density(&self) -> f64 {
        self.thinning.map_or(self.density, |t| t.parent_density)
    }

    fn validate(&self, tier: usize) -> Result<(), ConfigError> {
        let positive = |field, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::NotPositive { tier, field, value })
            }
        };
        let non_negative = |field, value: f64| {
            if value.is_finite() && value >= 0.0 {
                Ok(())
            } else {
                Err(ConfigError::Negative { tier, field, value })
            }
        };
        positive("power", self.power)?;
        non_negative("density", self.density)?;
        positive("target_sir", self.target_sir)?;
        non_negative("rate_target", self.rate_target)?;
        if self.antennas == 0 {
            return Err(ConfigError::ZeroCount { tier, field: "antennas" });
        }
        if self.users_served == 0 {
            return Err(ConfigError::ZeroCount { tier, field: "users_served" });
        }
        if self.users_served > self.antennas {
            return Err(ConfigError::UsersExceedAntennas { tier, users: self.users_served, antennas: self.antennas });
        }
        if self.antennas > MAX_SHAPE {
            return Err(ConfigError::ShapeTooLarge { tier, field: "antennas", value: self.antennas });
        }
        if !(self.resource_fraction > 0.0 && self.resource_fraction <= 1.0) {
            return Err(ConfigError::ResourceFraction { tier, value: self.resource_fraction });
        }
        if let Some(t) = self.thinning {
            positive("parent_density", t.parent_density)?;
            if !(t.lo >= 0.0 && t.lo <= t.hi && t.hi <= 1.0) {
                return Err(ConfigError::ThinningBand { tier, lo: t.lo, hi: t.hi });
            }
            let expected = t.parent_density * t.width();
            if (self.density - expected).abs() > 1e-9 * t.parent_density {
                return Err(ConfigError::ThinningDensity { tier, density: self.density });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub tiers: Vec<TierConfig>,
    pub path_loss_exponent: f64,
    /// Radius of the simulation disc. When absent it is derived from
    /// `min_expected_bs_per_tier`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim_radius: Option<f64>,
    pub min_expected_bs_per_tier: u32,
}

impl NetworkConfig {
    pub fn new(tiers: Vec<TierConfig>, path_loss_exponent: f64) -> Self {
        Self { tiers, path_loss_exponent, sim_radius: None, min_expected_bs_per_tier: DEFAULT_MIN_EXPECTED_BS }
    }

    pub fn alpha(&self) -> f64 {
        self.path_loss_exponent
    }

    /// `2 / alpha`.
    pub fn delta_exponent(&self) -> f64 {
        2.0 / self.path_loss_exponent
    }

    pub fn deltas(&self) -> Vec<u32> {
        self.tiers.iter().map(TierConfig::delta).collect()
    }

    pub fn psis(&self) -> Vec<u32> {
        self.tiers.iter().map(TierConfig::psi).collect()
    }

    pub fn stream_id(&self, tier: usize) -> u32 {
        self.tiers[tier].stream.unwrap_or(tier as u32)
    }

    pub fn has_open_tier(&self) -> bool {
        self.tiers.iter().any(|t| t.is_open() && t.density > 0.0)
    }

    pub fn total_density(&self) -> f64 {
        self.tiers.iter().map(|t| t.density).sum()
    }

    /// Simulation disc radius: the explicit `sim_radius`, or the smallest radius
    /// at which every sampled positive-density tier expects at least
    /// `min_expected_bs_per_tier` points.
    pub fn effective_radius(&self) -> f64 {
        if let Some(r) = self.sim_radius {
            return r;
        }
        let min_density =
            self.tiers.iter().map(TierConfig::sampled_density).filter(|&d| d > 0.0).fold(f64::INFINITY, f64::min);
        if min_density.is_finite() {
            (f64::from(self.min_expected_bs_per_tier) / (std::f64::consts::PI * min_density)).sqrt()
        } else {
            1.0
        }
    }

    /// Set every tier's target SIR.
    pub fn with_uniform_target(mut self, target_sir: f64) -> Self {
        for tier in &mut self.tiers {
            tier.target_sir = target_sir;
        }
        self
    }
}

/// Check every invariant of `config` and return it unchanged.
pub fn validate(config: &NetworkConfig) -> Result<NetworkConfig, ConfigError> {
    if config.tiers.is_empty() {
        return Err(ConfigError::NoTiers);
    }
    let alpha = config.path_loss_exponent;
    if !(alpha.is_finite() && alpha > 2.0) {
        return Err(ConfigError::PathLossExponent(alpha));
    }
    if let Some(r) = config.sim_radius {
        if !(r.is_finite() && r > 0.0) {
            return Err(ConfigError::SimRadius(r));
        }
    }
    if config.min_expected_bs_per_tier == 0 {
        return Err(ConfigError::MinExpected);
    }
    for (i, tier) in config.tiers.iter().enumerate() {
        tier.validate(i)?;
    }
    for i in 0..config.tiers.len() {
        for j in i + 1..config.tiers.len() {
            let stream = config.stream_id(i);
            if stream != config.stream_id(j) {
                continue;
            }
            let shared_parent = match (config.tiers[i].thinning, config.tiers[j].thinning) {
                (Some(a), Some(b)) => a.parent_density == b.parent_density,
                _ => false,
            };
            if !shared_parent {
                return Err(ConfigError::StreamClash { first: i, second: j, stream });
            }
        }
    }
    Ok(config.clone())
}

/// Open-access share `theta` of one tier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaSplit {
    pub tier_index: usize,
    pub open_fraction: f64,
}

/// Replace one tier by an open sub-tier of density `theta * lambda` and a
/// closed sub-tier of density `(1 - theta) * lambda`.
///
/// Both sub-tiers are thinnings of the same parent stream, so configurations
/// split at different `theta` stay coupled realization by realization.
pub fn split_theta(config: &NetworkConfig, split: ThetaSplit) -> Result<NetworkConfig, ConfigError> {
    let tiers = config.tiers.len();
    if split.tier_index >= tiers {
        return Err(ConfigError::TierIndex { index: split.tier_index, tiers });
    }
    let theta = split.open_fraction;
    if !(0.0..=1.0).contains(&theta) {
        return Err(ConfigError::OpenFraction(theta));
    }
    let mut out = config.clone();
    // Pin stream ids so indices shifted by the split keep their streams.
    for (i, tier) in out.tiers.iter_mut().enumerate() {
        tier.stream.get_or_insert(i as u32);
    }
    let parent = out.tiers[split.tier_index].clone();
    let band = parent.thinning.unwrap_or(Thinning { parent_density: parent.density, lo: 0.0, hi: 1.0 });
    let cut = band.lo + theta * band.width();
    let open_density = theta * parent.density;
    let open = TierConfig {
        density: open_density,
        access: Access::Open,
        thinning: Some(Thinning { hi: cut, ..band }),
        ..parent.clone()
    };
    let closed = TierConfig {
        density: parent.density - open_density,
        access: Access::Closed,
        thinning: Some(Thinning { lo: cut, ..band }),
        ..parent
    };
    out.tiers.splice(split.tier_index..=split.tier_index, [open, closed]);
    Ok(out)
}

/// Convert a decibel value to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn two_tier(technique: TransmissionTechnique, antennas: u32) -> NetworkConfig {
        NetworkConfig::new(
            vec![
                TierConfig::new(1.0, 1.0, 1.0, technique, antennas).unwrap(),
                TierConfig::new(0.01, 2.0, 1.0, technique, antennas).unwrap(),
            ],
            3.8,
        )
    }

    #[test]
    fn validate_two_tier_full_sdma() {
        let cfg = two_tier(TransmissionTechnique::Sdma { users: 4 }, 4);
        let valid = validate(&cfg).unwrap();
        assert_eq!(valid.deltas(), vec![1, 1]);
        assert_eq!(valid, cfg);
    }

    #[test]
    fn validate_rejects_users_above_antennas() {
        let mut cfg = two_tier(TransmissionTechnique::SuBf, 2);
        cfg.tiers[0].users_served = 3;
        let err = validate(&cfg).unwrap_err();
        assert!(err.to_string().contains("users_served exceeds antennas"), "{err}");
    }

    #[test]
    fn validate_su_bf_delta() {
        let cfg = two_tier(TransmissionTechnique::SuBf, 4);
        assert_eq!(validate(&cfg).unwrap().deltas(), vec![4, 4]);
    }

    #[test]
    fn validate_rejects_bad_fields() {
        let base = two_tier(TransmissionTechnique::Siso, 1);
        let mut cfg = base.clone();
        cfg.path_loss_exponent = 2.0;
        assert_eq!(validate(&cfg), Err(ConfigError::PathLossExponent(2.0)));
        let mut cfg = base.clone();
        cfg.tiers[1].resource_fraction = 1.5;
        assert!(matches!(validate(&cfg), Err(ConfigError::ResourceFraction { tier: 1, .. })));
        let mut cfg = base.clone();
        cfg.tiers[0].power = 0.0;
        assert!(matches!(validate(&cfg), Err(ConfigError::NotPositive { field: "power", .. })));
        let mut cfg = base.clone();
        cfg.tiers[0].density = -1.0;
        assert!(validate(&cfg).is_err());
        let mut cfg = base.clone();
        cfg.tiers.clear();
        assert_eq!(validate(&cfg), Err(ConfigError::NoTiers));
        let mut cfg = base;
        cfg.tiers[1].stream = Some(0);
        assert!(matches!(validate(&cfg), Err(ConfigError::StreamClash { .. })));
    }

    #[test]
    fn technique_shape_examples() {
        assert_eq!(technique_shapes(TransmissionTechnique::SuBf, 4), Ok((4, 1)));
        assert_eq!(technique_shapes(TransmissionTechnique::Sdma { users: 4 }, 4), Ok((1, 4)));
        assert_eq!(technique_shapes(TransmissionTechnique::Siso, 1), Ok((1, 1)));
        assert!(technique_shapes(TransmissionTechnique::Siso, 2).is_err());
        assert!(technique_shapes(TransmissionTechnique::SuBf, 1).is_err());
        assert!(technique_shapes(TransmissionTechnique::Sdma { users: 5 }, 4).is_err());
        assert!(technique_shapes(TransmissionTechnique::Sdma { users: 1 }, 4).is_err());
    }

    #[test]
    fn technique_round_trips_through_tier() {
        for (tech, m) in [
            (TransmissionTechnique::Siso, 1),
            (TransmissionTechnique::SuBf, 4),
            (TransmissionTechnique::Sdma { users: 3 }, 4),
        ] {
            let tier = TierConfig::new(1.0, 1.0, 1.0, tech, m).unwrap();
            assert_eq!(tier.technique(), tech);
        }
    }

    #[test]
    fn split_theta_half() {
        let cfg = two_tier(TransmissionTechnique::SuBf, 4);
        let split = split_theta(&cfg, ThetaSplit { tier_index: 1, open_fraction: 0.5 }).unwrap();
        let densities: Vec<f64> = split.tiers.iter().map(|t| t.density).collect();
        assert_eq!(densities, vec![1.0, 1.0, 1.0]);
        assert_eq!(split.tiers[1].access, Access::Open);
        assert_eq!(split.tiers[2].access, Access::Closed);
        assert_eq!(split.stream_id(1), 1);
        assert_eq!(split.stream_id(2), 1);
        validate(&split).unwrap();
    }

    #[test]
    fn split_theta_extremes() {
        let cfg = two_tier(TransmissionTechnique::Siso, 1);
        let full = split_theta(&cfg, ThetaSplit { tier_index: 1, open_fraction: 1.0 }).unwrap();
        assert_eq!(full.tiers[2].density, 0.0);
        let none = split_theta(&cfg, ThetaSplit { tier_index: 1, open_fraction: 0.0 }).unwrap();
        assert_eq!(none.tiers[1].density, 0.0);
        validate(&full).unwrap();
        validate(&none).unwrap();
        // Radius is driven by the parent density, not the sub-tier share.
        assert_eq!(full.effective_radius(), cfg.effective_radius());
        assert_eq!(none.effective_radius(), cfg.effective_radius());
    }

    #[test]
    fn split_theta_errors() {
        let cfg = two_tier(TransmissionTechnique::Siso, 1);
        assert!(matches!(
            split_theta(&cfg, ThetaSplit { tier_index: 2, open_fraction: 0.5 }),
            Err(ConfigError::TierIndex { .. })
        ));
        assert!(split_theta(&cfg, ThetaSplit { tier_index: 0, open_fraction: 1.5 }).is_err());
    }

    #[test]
    fn db_conversions() {
        assert!((db_to_linear(3.0) - 1.995_262_314_968_879_5).abs() < 1e-15);
        assert_eq!(db_to_linear(0.0), 1.0);
        assert!((linear_to_db(100.0) - 20.0).abs() < 1e-12);
    }

    fn arb_tier() -> impl Strategy<Value = TierConfig> {
        (1e-3f64..10.0, 0.0f64..10.0, 1e-2f64..100.0, 1u32..9, 0u32..9, any::<bool>()).prop_map(
            |(power, density, beta, m, users, closed)| {
                let users = 1 + users % m;
                TierConfig {
                    power,
                    density,
                    target_sir: beta,
                    antennas: m,
                    users_served: users,
                    access: if closed { Access::Closed } else { Access::Open },
                    resource_fraction: 1.0,
                    rate_target: 0.0,
                    stream: None,
                    thinning: None,
                }
            },
        )
    }

    proptest! {
        #[test]
        fn split_preserves_density_and_parameters(
            tiers in proptest::collection::vec(arb_tier(), 1..4),
            pick in 0usize..4,
            theta in 0.0f64..=1.0,
        ) {
            let cfg = NetworkConfig::new(tiers, 3.5);
            let index = pick % cfg.tiers.len();
            let split = split_theta(&cfg, ThetaSplit { tier_index: index, open_fraction: theta }).unwrap();
            prop_assert_eq!(split.tiers.len(), cfg.tiers.len() + 1);
            let before: f64 = cfg.total_density();
            let after: f64 = split.total_density();
            prop_assert!((before - after).abs() <= 4.0 * f64::EPSILON * before.max(1.0));
            let parent = &cfg.tiers[index];
            for sub in &split.tiers[index..index + 2] {
                prop_assert_eq!(sub.power, parent.power);
                prop_assert_eq!(sub.target_sir, parent.target_sir);
                prop_assert_eq!(sub.antennas, parent.antennas);
                prop_assert_eq!(sub.users_served, parent.users_served);
            }
            prop_assert!(validate(&split).is_ok());
            // Nested splits keep working and keep the total.
            let again = split_theta(&split, ThetaSplit { tier_index: index, open_fraction: 0.5 }).unwrap();
            prop_assert!(validate(&again).is_ok());
        }

        #[test]
        fn validate_is_idempotent(tiers in proptest::collection::vec(arb_tier(), 1..4)) {
            let cfg = NetworkConfig::new(tiers, 4.0);
            let once = validate(&cfg).unwrap();
            let twice = validate(&once).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn shapes_sum_to_antennas_plus_one(m in 2u32..64, users in 1u32..64) {
            let users = 1 + users % m;
            let technique = if users == 1 { TransmissionTechnique::SuBf } else { TransmissionTechnique::Sdma { users } };
            let (delta, psi) = technique_shapes(technique, m).unwrap();
            prop_assert_eq!(delta + psi, m + 1);
        }
    }
}
