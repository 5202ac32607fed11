//! Experiment specifications: network files, sweep axes and cases, as read
//! from TOML and resolved into validated configurations.

pub mod run;
pub mod table;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{self, db_to_linear, Access, ConfigError, NetworkConfig, TierConfig, TransmissionTechnique};
use crate::sampling::{ConfigDigest, Placement, PlacementKind};

pub use run::{bound_report, linear_fit, run_experiment, Report};
pub use table::Table;

/// Seed used when neither the spec nor the command line sets one.
pub const DEFAULT_SEED: u64 = 2013;

/// Exit status classes of the command-line tool.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("run failed: {0}")]
    Runtime(String),
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Validation(_) => 1,
            ExperimentError::Runtime(_) => 2,
        }
    }
}

impl From<ConfigError> for ExperimentError {
    fn from(e: ConfigError) -> Self {
        ExperimentError::Validation(e.to_string())
    }
}

impl From<crate::montecarlo::McError> for ExperimentError {
    fn from(e: crate::montecarlo::McError) -> Self {
        match e {
            crate::montecarlo::McError::Pool(_) => ExperimentError::Runtime(e.to_string()),
            other => ExperimentError::Validation(other.to_string()),
        }
    }
}

impl From<crate::ordering::OrderingError> for ExperimentError {
    fn from(e: crate::ordering::OrderingError) -> Self {
        match e {
            crate::ordering::OrderingError::Simulation(inner) => inner.into(),
            other => ExperimentError::Validation(other.to_string()),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Validation(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    CoverageSweep,
    BoundVsMc,
    Ordering,
    AseCompare,
    ThetaSweep,
    CandidateCount,
    Ccdf,
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::CoverageSweep => "coverage_sweep",
            Kind::BoundVsMc => "bound_vs_mc",
            Kind::Ordering => "ordering",
            Kind::AseCompare => "ase_compare",
            Kind::ThetaSweep => "theta_sweep",
            Kind::CandidateCount => "candidate_count",
            Kind::Ccdf => "ccdf",
        }
    }
}

/// Inclusive arithmetic axis `start, start + step, .., <= stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>, ExperimentError> {
        if !(self.step > 0.0) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(invalid(format!("axis step must be positive and ends finite (got {self:?})")));
        }
        if self.start > self.stop {
            return Err(invalid(format!("axis is empty: start {} exceeds stop {}", self.start, self.stop)));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        if count > 100_000 {
            return Err(invalid("axis has more than 100000 points"));
        }
        // Round to 1e-9 so accumulated steps print cleanly.
        Ok((0..count).map(|i| ((self.start + i as f64 * self.step) * 1e9).round() / 1e9).collect())
    }

    pub fn describe(&self) -> String {
        format!("{}:{}:{}", self.start, self.stop, self.step)
    }
}

/// `siso`, `su_bf:M`, `sdma:M` (full SDMA) or `sdma:M:USERS`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TechniqueSpec {
    pub technique: TransmissionTechnique,
    pub antennas: u32,
}

impl std::str::FromStr for TechniqueSpec {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| p.parse::<u32>().map_err(|_| invalid(format!("technique `{s}`: `{p}` is not a count")));
        let spec = match parts.as_slice() {
            ["siso"] => Self { technique: TransmissionTechnique::Siso, antennas: 1 },
            ["su_bf", m] => Self { technique: TransmissionTechnique::SuBf, antennas: num(m)? },
            ["sdma", m] => {
                let m = num(m)?;
                Self { technique: TransmissionTechnique::Sdma { users: m }, antennas: m }
            }
            ["sdma", m, u] => Self { technique: TransmissionTechnique::Sdma { users: num(u)? }, antennas: num(m)? },
            _ => return Err(invalid(format!("unknown technique `{s}`; use siso, su_bf:M, sdma:M or sdma:M:USERS"))),
        };
        model::technique_shapes(spec.technique, spec.antennas)?;
        Ok(spec)
    }
}

impl std::fmt::Display for TechniqueSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.technique {
            TransmissionTechnique::Siso => write!(f, "siso"),
            TransmissionTechnique::SuBf => write!(f, "su_bf:{}", self.antennas),
            TransmissionTechnique::Sdma { users } if users == self.antennas => write!(f, "sdma:{users}"),
            TransmissionTechnique::Sdma { users } => write!(f, "sdma:{}:{users}", self.antennas),
        }
    }
}

fn parse_technique(s: &str) -> Result<TechniqueSpec, ExperimentError> {
    s.parse()
}

fn default_technique() -> String {
    "siso".into()
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierSpec {
    pub power: f64,
    /// Density relative to the network's `base_density`.
    pub density: f64,
    #[serde(default)]
    pub target_sir_db: f64,
    #[serde(default = "default_technique")]
    pub technique: String,
    #[serde(default)]
    pub access: Access,
    #[serde(default = "one")]
    pub resource_fraction: f64,
    #[serde(default)]
    pub rate_target: f64,
    #[serde(default)]
    pub placement: PlacementKind,
}

fn default_min_expected() -> u32 {
    model::DEFAULT_MIN_EXPECTED_BS
}

/// Network file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub path_loss_exponent: f64,
    #[serde(default = "one")]
    pub base_density: f64,
    #[serde(default = "default_min_expected")]
    pub min_expected_bs_per_tier: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim_radius: Option<f64>,
    pub tiers: Vec<TierSpec>,
}

impl NetworkSpec {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| invalid(format!("network file: {e}")))
    }

    /// Validated configuration and per-tier placement.
    pub fn build(&self) -> Result<(NetworkConfig, Placement), ExperimentError> {
        let mut tiers = Vec::with_capacity(self.tiers.len());
        for t in &self.tiers {
            let tech = parse_technique(&t.technique)?;
            let mut tier = TierConfig::new(
                t.power,
                t.density * self.base_density,
                db_to_linear(t.target_sir_db),
                tech.technique,
                tech.antennas,
            )?
            .with_access(t.access)
            .with_rate(t.resource_fraction, t.rate_target);
            tier.stream = None;
            tiers.push(tier);
        }
        let mut config = NetworkConfig::new(tiers, self.path_loss_exponent);
        config.min_expected_bs_per_tier = self.min_expected_bs_per_tier;
        config.sim_radius = self.sim_radius;
        let config = model::validate(&config)?;
        let placement = Placement(self.tiers.iter().map(|t| t.placement).collect());
        Ok((config, placement))
    }
}

/// Per-case overrides of the network. Per-tier lists may have one entry, which
/// then applies to every tier.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub techniques: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub access: Vec<Access>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub placements: Vec<PlacementKind>,
    /// Absolute per-tier targets, used when no SIR sweep is given.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets_db: Vec<f64>,
    /// Per-tier offsets added to the swept target.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub target_offsets_db: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub resource_fractions: Vec<f64>,
    /// Multiplies every tier density.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_scale: Option<f64>,
    /// Keep only the first `tiers` tiers of the network.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiers: Option<usize>,
}

fn per_tier<T: Clone>(values: &[T], tiers: usize, what: &str, label: &str) -> Result<Option<Vec<T>>, ExperimentError> {
    match values.len() {
        0 => Ok(None),
        1 => Ok(Some(vec![values[0].clone(); tiers])),
        n if n == tiers => Ok(Some(values.to_vec())),
        n => Err(invalid(format!("case `{label}`: {what} lists {n} entries for {tiers} tiers"))),
    }
}

/// A case resolved against its network.
#[derive(Debug, Clone)]
pub struct ResolvedCase {
    pub label: String,
    pub config: NetworkConfig,
    pub placement: Placement,
    /// Per-tier offsets from the swept target, in dB.
    pub offsets_db: Vec<f64>,
}

impl CaseSpec {
    pub fn resolve(&self, network: &NetworkSpec) -> Result<ResolvedCase, ExperimentError> {
        let mut net = network.clone();
        if let Some(n) = self.tiers {
            if n == 0 || n > net.tiers.len() {
                return Err(invalid(format!("case `{}`: tiers = {n} out of range", self.label)));
            }
            net.tiers.truncate(n);
        }
        let k = net.tiers.len();
        let label = self.label.as_str();
        if let Some(v) = per_tier(&self.techniques, k, "techniques", label)? {
            for (t, s) in net.tiers.iter_mut().zip(v) {
                t.technique = s;
            }
        }
        if let Some(v) = per_tier(&self.access, k, "access", label)? {
            for (t, a) in net.tiers.iter_mut().zip(v) {
                t.access = a;
            }
        }
        if let Some(v) = per_tier(&self.placements, k, "placements", label)? {
            for (t, p) in net.tiers.iter_mut().zip(v) {
                t.placement = p;
            }
        }
        if let Some(v) = per_tier(&self.targets_db, k, "targets_db", label)? {
            for (t, b) in net.tiers.iter_mut().zip(v) {
                t.target_sir_db = b;
            }
        }
        if let Some(v) = per_tier(&self.resource_fractions, k, "resource_fractions", label)? {
            for (t, o) in net.tiers.iter_mut().zip(v) {
                t.resource_fraction = o;
            }
        }
        if let Some(scale) = self.density_scale {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(invalid(format!("case `{label}`: density_scale must be positive")));
            }
            net.base_density *= scale;
        }
        let offsets_db = per_tier(&self.target_offsets_db, k, "target_offsets_db", label)?.unwrap_or(vec![0.0; k]);
        let (config, placement) = net.build()?;
        Ok(ResolvedCase { label: self.label.clone(), config, placement, offsets_db })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

fn default_realizations() -> u64 {
    crate::montecarlo::DEFAULT_REALIZATIONS
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_split_tier() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: Kind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_realizations")]
    pub realizations: u64,
    /// Cases share random streams.
    #[serde(default)]
    pub paired: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_db: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Axis>,
    /// 1-based tier split into open and closed parts by a theta sweep.
    #[serde(default = "default_split_tier")]
    pub split_tier: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cases: Vec<CaseSpec>,
    /// Pairs of case labels compared by an ordering experiment; consecutive
    /// cases when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comparisons: Vec<[String; 2]>,
    /// `(k, m)` shapes of the Gamma ratios plotted by a CCDF experiment.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<[u32; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

/// Command-line overrides applied on top of a spec file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub realizations: Option<u64>,
    pub sweep_db: Option<Axis>,
    pub theta: Option<Axis>,
    pub paired: bool,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| invalid(format!("experiment file: {e}")))
    }

    pub fn apply(mut self, o: &Overrides) -> Self {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(n) = o.realizations {
            self.realizations = n;
        }
        if o.sweep_db.is_some() {
            self.sweep_db = o.sweep_db;
        }
        if o.theta.is_some() {
            self.theta = o.theta;
        }
        self.paired |= o.paired;
        self
    }

    /// Digest of the fully resolved spec, written into every output.
    pub fn digest(&self) -> ConfigDigest {
        ConfigDigest::of(self)
    }

    pub fn cases(&self) -> Result<Vec<ResolvedCase>, ExperimentError> {
        let default = [CaseSpec { label: self.name.clone(), ..CaseSpec::default() }];
        let cases = if self.cases.is_empty() { &default[..] } else { &self.cases[..] };
        let mut labels = std::collections::BTreeSet::new();
        for c in cases {
            if !labels.insert(c.label.as_str()) {
                return Err(invalid(format!("duplicate case label `{}`", c.label)));
            }
        }
        let network =
            self.network.as_ref().ok_or_else(|| invalid(format!("{} needs a [network] table", self.kind.name())))?;
        cases.iter().map(|c| c.resolve(network)).collect()
    }

    /// Seed of case `index`: shared when paired, otherwise derived per case.
    pub fn case_seed(&self, index: usize) -> u64 {
        if self.paired {
            self.seed
        } else {
            crate::sampling::mix64(self.seed ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.realizations == 0 && self.kind != Kind::Ccdf {
            return Err(invalid("realizations must be at least 1"));
        }
        if let Some(a) = self.sweep_db {
            a.values()?;
        }
        match self.kind {
            Kind::ThetaSweep => {
                let thetas = self.theta.ok_or_else(|| invalid("theta_sweep needs a theta axis"))?.values()?;
                if thetas.iter().any(|t| !(0.0..=1.0).contains(t)) {
                    return Err(invalid("theta values must lie in [0, 1]"));
                }
            }
            Kind::Ccdf => {
                if self.pairs.is_empty() {
                    return Err(invalid("ccdf needs at least one (k, m) pair"));
                }
                if self.pairs.iter().any(|p| p[0] == 0 || p[1] == 0) {
                    return Err(invalid("ccdf shapes must be at least 1"));
                }
                if let Some(g) = self.grid {
                    if !(g.lo > 0.0 && g.lo < g.hi && g.points >= 2) {
                        return Err(invalid("ccdf grid needs 0 < lo < hi and at least 2 points"));
                    }
                }
            }
            Kind::Ordering | Kind::BoundVsMc => {
                if self.sweep_db.is_none() {
                    return Err(invalid(format!("{} needs a sweep_db axis", self.kind.name())));
                }
            }
            _ => {}
        }
        if self.kind != Kind::Ccdf {
            let cases = self.cases()?;
            if self.kind == Kind::ThetaSweep {
                for c in &cases {
                    if self.split_tier == 0 || self.split_tier > c.config.tiers.len() {
                        return Err(invalid(format!(
                            "case `{}`: split_tier {} out of range",
                            c.label, self.split_tier
                        )));
                    }
                }
            }
            if self.kind == Kind::Ordering {
                self.comparison_indices(&cases)?;
            }
        }
        Ok(())
    }

    pub fn comparison_indices(&self, cases: &[ResolvedCase]) -> Result<Vec<(usize, usize)>, ExperimentError> {
        if self.comparisons.is_empty() {
            if cases.len() < 2 {
                return Err(invalid("ordering needs at least two cases"));
            }
            return Ok((1..cases.len()).map(|i| (i - 1, i)).collect());
        }
        let find = |label: &str| {
            cases.iter().position(|c| c.label == label).ok_or_else(|| invalid(format!("unknown case `{label}`")))
        };
        self.comparisons.iter().map(|[a, b]| Ok((find(a)?, find(b)?))).collect()
    }
}

/// Experiment specs shipped with the tool, by name.
pub const BUILTIN: &[(&str, &str)] = &[
    ("gamma-ccdf", include_str!("../../experiments/gamma-ccdf.toml")),
    ("grid-vs-ppp", include_str!("../../experiments/grid-vs-ppp.toml")),
    ("sdma-bound", include_str!("../../experiments/sdma-bound.toml")),
    ("second-tier", include_str!("../../experiments/second-tier.toml")),
    ("closed-tier", include_str!("../../experiments/closed-tier.toml")),
    ("theta-split", include_str!("../../experiments/theta-split.toml")),
    ("ase", include_str!("../../experiments/ase.toml")),
    ("ordering", include_str!("../../experiments/ordering.toml")),
    ("candidates", include_str!("../../experiments/candidates.toml")),
];

pub fn builtin(name: &str) -> Result<ExperimentSpec, ExperimentError> {
    let text = BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<&str> = BUILTIN.iter().map(|(n, _)| *n).collect();
        invalid(format!("unknown experiment `{name}`; available: {}", names.join(", ")))
    })?;
    ExperimentSpec::from_toml(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_values() {
        let a = Axis { start: -10.0, stop: 15.0, step: 2.5 };
        let v = a.values().unwrap();
        assert_eq!(v.len(), 11);
        assert_eq!((v[0], v[10]), (-10.0, 15.0));
        let t = Axis { start: 0.0, stop: 1.0, step: 0.1 }.values().unwrap();
        assert_eq!(t.len(), 11);
        assert_eq!(t[3], 0.3);
        assert!(Axis { start: 1.0, stop: 0.0, step: 0.1 }.values().is_err());
        assert!(Axis { start: 0.0, stop: 1.0, step: 0.0 }.values().is_err());
        assert_eq!(Axis { start: 2.0, stop: 2.0, step: 1.0 }.values().unwrap(), vec![2.0]);
    }

    #[test]
    fn technique_strings_round_trip() {
        for s in ["siso", "su_bf:4", "sdma:4", "sdma:4:2"] {
            assert_eq!(s.parse::<TechniqueSpec>().unwrap().to_string(), s);
        }
        for bad in ["", "mimo", "su_bf", "su_bf:1", "sdma:2:3", "siso:2", "sdma:x"] {
            assert!(bad.parse::<TechniqueSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn builtin_specs_parse_and_validate() {
        for (name, _) in BUILTIN {
            let spec = builtin(name).unwrap();
            spec.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&spec.name, name);
        }
        assert!(builtin("nope").is_err());
    }

    #[test]
    fn network_densities_are_ratios() {
        let net = NetworkSpec::from_toml(
            r#"
            path_loss_exponent = 3.8
            base_density = 2.0
            [[tiers]]
            power = 1.0
            density = 1.0
            technique = "su_bf:4"
            [[tiers]]
            power = 0.01
            density = 2.0
            target_sir_db = 3.0
            technique = "sdma:4"
            access = "closed"
            placement = "ppp"
            "#,
        )
        .unwrap();
        let (cfg, placement) = net.build().unwrap();
        assert_eq!(cfg.tiers[0].density, 2.0);
        assert_eq!(cfg.tiers[1].density, 4.0);
        assert_eq!(cfg.tiers[1].access, Access::Closed);
        assert_eq!(cfg.tiers[1].psi(), 4);
        assert!((cfg.tiers[1].target_sir - db_to_linear(3.0)).abs() < 1e-12);
        assert_eq!(placement.kind(1), PlacementKind::Ppp);
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = NetworkSpec::from_toml("path_loss_exponent = 4.0\ntiers = []\nbogus = 1\n");
        assert!(matches!(e, Err(ExperimentError::Validation(_))));
    }

    #[test]
    fn case_overrides() {
        let spec = builtin("closed-tier").unwrap();
        let cases = spec.cases().unwrap();
        assert!(cases.iter().all(|c| c.config.tiers[1].access == Access::Closed));
        let bad = CaseSpec { label: "x".into(), techniques: vec!["siso".into(); 3], ..CaseSpec::default() };
        assert!(bad.resolve(spec.network.as_ref().unwrap()).is_err());
    }

    #[test]
    fn digest_tracks_overrides() {
        let spec = builtin("second-tier").unwrap();
        let a = spec.clone().apply(&Overrides::default()).digest();
        let b = spec.clone().apply(&Overrides { seed: Some(9), ..Overrides::default() }).digest();
        assert_eq!(a, spec.digest());
        assert_ne!(a, b);
    }

    #[test]
    fn empty_sweep_is_a_validation_error() {
        let spec = builtin("second-tier")
            .unwrap()
            .apply(&Overrides { sweep_db: Some(Axis { start: 5.0, stop: 0.0, step: 1.0 }), ..Overrides::default() });
        assert_eq!(spec.validate().unwrap_err().exit_code(), 1);
    }
}
