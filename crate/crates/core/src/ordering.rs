//! Stochastic-ordering checks between transmission techniques.
//!
//! Exact checks compare Gamma-ratio CCDFs on a grid. Coupled checks simulate
//! two systems from the same exponential streams: a `Gamma(k, 1)` mark is the
//! sum of the first `k` exponentials of its stream, so a larger shape gives a
//! pathwise larger mark. When every direct shape grows and every interfering
//! shape shrinks, each base station's SIR is pathwise larger and any violation
//! is a defect, not noise.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{self, ConfigError, NetworkConfig};
use crate::montecarlo::{with_pool, Evaluator, McError, McSettings, SweepPoint};
use crate::sampling::{sample_gamma_mark, MarkModel, Placement, Sampler};
use crate::specfun::{gamma_ratio_ccdf, GammaRatioParams};

/// CCDF differences within this tolerance are treated as roundoff.
pub const DOMINANCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrderingError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Simulation(#[from] McError),
    #[error("evaluation grid must be non-empty and strictly increasing")]
    Grid,
    #[error("no prediction: {0}")]
    NoPrediction(String),
    #[error("systems are not comparable: {0}")]
    Incomparable(String),
}

/// Sufficient condition for `Z_{k1,m1} >=_st Z_{k2,m2}`.
pub fn ratio_dominance_condition(k1: u32, m1: u32, k2: u32, m2: u32) -> bool {
    k1 >= k2 && m1 <= m2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Dominates,
    Dominated,
    Crossing,
    Indistinguishable,
}

impl Relation {
    pub fn name(&self) -> &'static str {
        match self {
            Relation::Dominates => "dominates",
            Relation::Dominated => "dominated",
            Relation::Crossing => "crossing",
            Relation::Indistinguishable => "indistinguishable",
        }
    }
}

/// Outcome of comparing CCDF 1 against CCDF 2 on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceVerdict {
    pub relation: Relation,
    /// Largest `CCDF_2 - CCDF_1` on the grid, or 0.
    pub max_violation: f64,
    pub grid: Vec<f64>,
}

/// 200 logarithmically spaced points on `[1e-3, 1e3]`.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-3, 1e3, 200)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp()).collect()
}

fn check_grid(grid: &[f64]) -> Result<(), OrderingError> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(OrderingError::Grid);
    }
    Ok(())
}

fn classify(diffs: impl Iterator<Item = f64>, tolerance: f64, grid: &[f64]) -> DominanceVerdict {
    let (mut above, mut below, mut worst) = (false, false, 0.0_f64);
    for d in diffs {
        above |= d > tolerance;
        below |= d < -tolerance;
        worst = worst.max(-d);
    }
    let relation = match (above, below) {
        (true, true) => Relation::Crossing,
        (_, false) => Relation::Dominates,
        (false, true) => Relation::Dominated,
    };
    DominanceVerdict { relation, max_violation: worst, grid: grid.to_vec() }
}

/// Exact comparison of `P(Z_1 > z)` and `P(Z_2 > z)`. Without a difference
/// below `-tolerance` the first dominates; differences of both signs are a
/// crossing.
pub fn check_ccdf_dominance(
    first: GammaRatioParams,
    second: GammaRatioParams,
    grid: &[f64],
    tolerance: f64,
) -> Result<DominanceVerdict, OrderingError> {
    check_grid(grid)?;
    let diffs: Vec<f64> = grid
        .iter()
        .map(|&z| {
            let a = gamma_ratio_ccdf(first, z).expect("grid point is non-negative");
            let b = gamma_ratio_ccdf(second, z).expect("grid point is non-negative");
            a - b
        })
        .collect();
    Ok(classify(diffs.into_iter(), tolerance, grid))
}

/// Empirical comparison of two samples. Differences within `tolerance` (for
/// instance a DKW band) are ignored; if none exceed it the samples are
/// indistinguishable.
pub fn check_empirical_dominance(
    first: &[f64],
    second: &[f64],
    grid: &[f64],
    tolerance: f64,
) -> Result<DominanceVerdict, OrderingError> {
    check_grid(grid)?;
    let ccdf = |sample: &[f64]| {
        let mut s = sample.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        grid.iter().map(|&z| (s.len() - s.partition_point(|&x| x <= z)) as f64 / n).collect::<Vec<_>>()
    };
    let (a, b) = (ccdf(first), ccdf(second));
    let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let mut verdict = classify(diffs.iter().copied(), tolerance, grid);
    if diffs.iter().all(|d| d.abs() <= tolerance) {
        verdict.relation = Relation::Indistinguishable;
    }
    Ok(verdict)
}

/// `Z = X1 / X2` with `X1 ~ Gamma(k, 1)`, `X2 ~ Gamma(m, 1)`.
pub fn sample_gamma_ratio<R: Rng + ?Sized>(params: GammaRatioParams, rng: &mut R) -> f64 {
    sample_gamma_mark(params.k(), rng) / sample_gamma_mark(params.m(), rng)
}

/// Per-tier Gamma shapes of a system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShapeProfile {
    pub deltas: Vec<u32>,
    pub psis: Vec<u32>,
}

impl ShapeProfile {
    pub fn of(config: &NetworkConfig) -> Self {
        Self { deltas: config.deltas(), psis: config.psis() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    /// The first system is at least as good.
    FirstBetter,
    SecondBetter,
    /// Shapes agree on every relevant tier.
    Equal,
}

impl Prediction {
    pub fn name(&self) -> &'static str {
        match self {
            Prediction::FirstBetter => "first",
            Prediction::SecondBetter => "second",
            Prediction::Equal => "equal",
        }
    }
}

/// Two shape profiles over the same tiers. Direct shapes only matter for
/// tiers the user may connect to; interfering shapes matter for every tier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderingClaim {
    pub first: ShapeProfile,
    pub second: ShapeProfile,
    pub allowed: Vec<bool>,
}

impl OrderingClaim {
    pub fn new(first: ShapeProfile, second: ShapeProfile, allowed: Vec<bool>) -> Result<Self, OrderingError> {
        let n = allowed.len();
        if [first.deltas.len(), first.psis.len(), second.deltas.len(), second.psis.len()].iter().any(|&l| l != n) {
            return Err(OrderingError::Incomparable("profiles cover different numbers of tiers".into()));
        }
        Ok(Self { first, second, allowed })
    }

    fn holds(better: &ShapeProfile, worse: &ShapeProfile, allowed: &[bool]) -> bool {
        let direct = (0..allowed.len()).all(|k| !allowed[k] || better.deltas[k] >= worse.deltas[k]);
        let interfering = better.psis.iter().zip(&worse.psis).all(|(a, b)| a <= b);
        direct && interfering
    }

    /// Direction implied by the shape conditions. Refuses when the conditions
    /// hold in neither direction, including when they hold only for some tiers.
    pub fn predict(&self) -> Result<Prediction, OrderingError> {
        match (
            Self::holds(&self.first, &self.second, &self.allowed),
            Self::holds(&self.second, &self.first, &self.allowed),
        ) {
            (true, true) => Ok(Prediction::Equal),
            (true, false) => Ok(Prediction::FirstBetter),
            (false, true) => Ok(Prediction::SecondBetter),
            (false, false) => Err(OrderingError::NoPrediction(format!(
                "shapes {:?} vs {:?} are not ordered on every tier",
                self.first, self.second
            ))),
        }
    }
}

/// Replace each tier's antennas and users by those realizing `profile`.
pub fn apply_profile(config: &NetworkConfig, profile: &ShapeProfile) -> Result<NetworkConfig, OrderingError> {
    let mut out = config.clone();
    if profile.deltas.len() != out.tiers.len() || profile.psis.len() != out.tiers.len() {
        return Err(OrderingError::Incomparable("profile length differs from tier count".into()));
    }
    for ((t, &d), &p) in out.tiers.iter_mut().zip(&profile.deltas).zip(&profile.psis) {
        if d == 0 || p == 0 {
            return Err(ConfigError::ZeroCount { tier: 0, field: "shape" }.into());
        }
        t.antennas = d + p - 1;
        t.users_served = p;
    }
    Ok(model::validate(&out)?)
}

/// Which indicator the pathwise comparison tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Coverage,
    Rate,
}

/// Paired counts at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct PairedPoint {
    /// Realizations where the predicted-better system's indicator is 1.
    pub better: u64,
    pub worse: u64,
    /// Realizations where the predicted-better indicator is 0 and the other 1.
    pub indicator_violations: u64,
    /// Realizations where the predicted-better system has fewer candidate BSs.
    pub candidate_violations: u64,
    /// Realizations where the two indicators differ.
    pub discordant: u64,
}

impl PairedPoint {
    fn merge(mut self, o: Self) -> Self {
        self.better += o.better;
        self.worse += o.worse;
        self.indicator_violations += o.indicator_violations;
        self.candidate_violations += o.candidate_violations;
        self.discordant += o.discordant;
        self
    }

    /// Mean of the paired difference `better - worse`.
    pub fn mean_difference(&self, n: u64) -> f64 {
        (self.better as f64 - self.worse as f64) / n as f64
    }

    /// Standard error of the mean paired difference.
    pub fn paired_standard_error(&self, n: u64) -> f64 {
        let nf = n as f64;
        let mean = self.mean_difference(n);
        let second_moment = self.discordant as f64 / nf;
        ((second_moment - mean * mean).max(0.0) / (nf - 1.0).max(1.0)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    pub metric: Metric,
    pub prediction: Prediction,
    pub realizations: u64,
    pub points: Vec<PairedPoint>,
    /// Allowed-tier base stations compared across both systems.
    pub bs_compared: u64,
    /// Of those, how many had a smaller SIR in the predicted-better system.
    pub sir_violations: u64,
}

impl OrderingReport {
    pub fn total_violations(&self) -> u64 {
        self.sir_violations + self.points.iter().map(|p| p.indicator_violations + p.candidate_violations).sum::<u64>()
    }
}

fn comparable(a: &NetworkConfig, b: &NetworkConfig, metric: Metric) -> Result<(), OrderingError> {
    let bad = |what: &str| Err(OrderingError::Incomparable(format!("systems differ in {what}")));
    if a.tiers.len() != b.tiers.len() {
        return bad("tier count");
    }
    if a.path_loss_exponent != b.path_loss_exponent || a.effective_radius() != b.effective_radius() {
        return bad("path loss or simulation window");
    }
    for (k, (x, y)) in a.tiers.iter().zip(&b.tiers).enumerate() {
        if x.power != y.power || x.density != y.density || x.access != y.access || x.thinning != y.thinning {
            return bad("power, density, access or thinning");
        }
        if a.stream_id(k) != b.stream_id(k) {
            return bad("stream assignment");
        }
        if metric == Metric::Rate && x.resource_fraction != y.resource_fraction {
            return Err(OrderingError::NoPrediction("resource fractions differ between the systems".into()));
        }
    }
    Ok(())
}

/// Paired coupled simulation of two systems that differ only in their
/// transmission techniques. Both use independent direct and interfering marks
/// (`MarkModel::ShapeProfile`), so a single-antenna tier enters as shapes (1, 1).
pub fn check_ordering(
    first: &NetworkConfig,
    second: &NetworkConfig,
    metric: Metric,
    placement: &Placement,
    points: &[SweepPoint],
    settings: &McSettings,
) -> Result<OrderingReport, OrderingError> {
    let first = model::validate(first)?;
    let second = model::validate(second)?;
    comparable(&first, &second, metric)?;
    let allowed: Vec<bool> = first.tiers.iter().map(|t| t.is_open()).collect();
    let claim = OrderingClaim::new(ShapeProfile::of(&first), ShapeProfile::of(&second), allowed.clone())?;
    let prediction = claim.predict()?;
    let (better, worse) = match prediction {
        Prediction::SecondBetter => (&second, &first),
        _ => (&first, &second),
    };
    let sb = Sampler::new(better, placement)?.with_mark_model(MarkModel::ShapeProfile);
    let sw = Sampler::new(worse, placement)?.with_mark_model(MarkModel::ShapeProfile);
    if !first.has_open_tier() {
        return Err(McError::NoOpenTier.into());
    }
    if settings.realizations == 0 {
        return Err(McError::NoRealizations.into());
    }
    let (eb, ew) = (Evaluator::new(better), Evaluator::new(worse));
    let seed = settings.seed;
    type Acc = (Vec<PairedPoint>, u64, u64);
    let empty = || -> Acc { (vec![PairedPoint::default(); points.len()], 0, 0) };
    let merge =
        |a: Acc, b: Acc| -> Acc { (a.0.into_iter().zip(b.0).map(|(x, y)| x.merge(y)).collect(), a.1 + b.1, a.2 + b.2) };
    let (tallies, compared, sir_violations) = with_pool(settings.workers, || {
        (0..settings.realizations)
            .into_par_iter()
            .fold(
                || (empty(), Scratch::default()),
                |(mut acc, mut s), index| {
                    sb.fill(seed, index, &mut s.bs_b);
                    sw.fill(seed, index, &mut s.bs_w);
                    assert_eq!(s.bs_b.len(), s.bs_w.len(), "coupled layouts must coincide");
                    eb.sir_into(&s.bs_b, &mut s.sir_b, &mut s.terms);
                    ew.sir_into(&s.bs_w, &mut s.sir_w, &mut s.terms);
                    for ((b, &x), &y) in s.bs_b.iter().zip(&s.sir_b).zip(&s.sir_w) {
                        if allowed[b.tier] {
                            acc.1 += 1;
                            acc.2 += u64::from(x < y);
                        }
                    }
                    for (tally, point) in acc.0.iter_mut().zip(points) {
                        let ob = eb.outcome(&s.bs_b, &s.sir_b, point);
                        let ow = ew.outcome(&s.bs_w, &s.sir_w, point);
                        let (ib, iw) = match metric {
                            Metric::Coverage => (ob.covered, ow.covered),
                            Metric::Rate => (ob.rate_covered, ow.rate_covered),
                        };
                        tally.better += u64::from(ib);
                        tally.worse += u64::from(iw);
                        tally.indicator_violations += u64::from(!ib && iw);
                        tally.discordant += u64::from(ib != iw);
                        tally.candidate_violations += u64::from(ob.candidates < ow.candidates);
                    }
                    (acc, s)
                },
            )
            .map(|(acc, _)| acc)
            .reduce(empty, merge)
    })?;
    Ok(OrderingReport {
        metric,
        prediction,
        realizations: settings.realizations,
        points: tallies,
        bs_compared: compared,
        sir_violations,
    })
}

#[derive(Default)]
struct Scratch {
    bs_b: Vec<crate::sampling::BsRecord>,
    bs_w: Vec<crate::sampling::BsRecord>,
    sir_b: Vec<f64>,
    sir_w: Vec<f64>,
    terms: Vec<f64>,
}

pub fn check_coverage_ordering(
    first: &NetworkConfig,
    second: &NetworkConfig,
    placement: &Placement,
    points: &[SweepPoint],
    settings: &McSettings,
) -> Result<OrderingReport, OrderingError> {
    check_ordering(first, second, Metric::Coverage, placement, points, settings)
}

/// Rate-coverage ordering; refuses unless both systems give users the same
/// resource fraction in every tier.
pub fn check_rate_ordering(
    first: &NetworkConfig,
    second: &NetworkConfig,
    placement: &Placement,
    points: &[SweepPoint],
    settings: &McSettings,
) -> Result<OrderingReport, OrderingError> {
    check_ordering(first, second, Metric::Rate, placement, points, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{db_to_linear, Access, TierConfig, TransmissionTechnique};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_xoshiro::SplitMix64;

    fn params(k: u32, m: u32) -> GammaRatioParams {
        GammaRatioParams::new(k, m).unwrap()
    }

    fn two_tier(technique: TransmissionTechnique, m: u32) -> NetworkConfig {
        let mut cfg = NetworkConfig::new(
            vec![
                TierConfig::new(1.0, 1.0, 1.0, technique, m).unwrap(),
                TierConfig::new(0.01, 2.0, 1.0, technique, m).unwrap(),
            ],
            3.8,
        );
        cfg.min_expected_bs_per_tier = 300;
        cfg
    }

    fn sweep(cfg: &NetworkConfig) -> Vec<SweepPoint> {
        (-10..=15).step_by(5).map(|d| SweepPoint::uniform(cfg, db_to_linear(f64::from(d)))).collect()
    }

    #[test]
    fn ratio_dominance_examples() {
        assert!(ratio_dominance_condition(4, 1, 1, 1));
        assert!(!ratio_dominance_condition(4, 2, 100, 100));
        assert!(ratio_dominance_condition(3, 5, 3, 5));
    }

    #[test]
    fn ccdf_dominance_examples() {
        let grid = default_grid();
        assert_eq!(grid.len(), 200);
        let v = check_ccdf_dominance(params(4, 2), params(2, 2), &grid, DOMINANCE_TOLERANCE).unwrap();
        assert_eq!(v.relation, Relation::Dominates);
        let v = check_ccdf_dominance(params(4, 2), params(100, 100), &grid, DOMINANCE_TOLERANCE).unwrap();
        assert_eq!(v.relation, Relation::Crossing);
        assert!((v.max_violation - 0.091_656_917).abs() < 1e-3, "{}", v.max_violation);
        let v = check_ccdf_dominance(params(3, 3), params(3, 3), &grid, DOMINANCE_TOLERANCE).unwrap();
        assert_eq!((v.relation, v.max_violation), (Relation::Dominates, 0.0));
        let v = check_ccdf_dominance(params(2, 2), params(4, 2), &grid, DOMINANCE_TOLERANCE).unwrap();
        assert_eq!(v.relation, Relation::Dominated);
        assert!(check_ccdf_dominance(params(1, 1), params(1, 1), &[], 0.0).is_err());
        assert!(check_ccdf_dominance(params(1, 1), params(1, 1), &[2.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn ratio_dominance_condition_implies_exact_dominance() {
        let grid = default_grid();
        for k1 in 1..=8 {
            for m1 in 1..=8 {
                for k2 in 1..=k1 {
                    for m2 in m1..=8 {
                        let v =
                            check_ccdf_dominance(params(k1, m1), params(k2, m2), &grid, DOMINANCE_TOLERANCE).unwrap();
                        assert_eq!(v.relation, Relation::Dominates, "({k1},{m1}) vs ({k2},{m2})");
                    }
                }
            }
        }
    }

    #[test]
    fn dominance_chain_is_transitive() {
        let grid = default_grid();
        let dom = |a, b| check_ccdf_dominance(a, b, &grid, DOMINANCE_TOLERANCE).unwrap().relation;
        assert_eq!(dom(params(4, 1), params(2, 1)), Relation::Dominates);
        assert_eq!(dom(params(2, 1), params(1, 1)), Relation::Dominates);
        assert_eq!(dom(params(4, 1), params(1, 1)), Relation::Dominates);
    }

    #[test]
    fn coupled_ratio_mean_matches_inverse_gamma_moment() {
        // E[Z] = k / (m - 1); m >= 3 keeps the variance finite.
        for (k, m) in [(1, 3), (4, 3), (2, 5), (8, 4)] {
            let mut rng = SplitMix64::seed_from_u64(u64::from(k * 100 + m));
            let n = 1_000_000;
            let mean = (0..n).map(|_| sample_gamma_ratio(params(k, m), &mut rng)).sum::<f64>() / f64::from(n);
            let expected = f64::from(k) / f64::from(m - 1);
            assert!((mean / expected - 1.0).abs() < 0.02, "({k},{m}): {mean}");
        }
    }

    #[test]
    fn empirical_dominance_agrees_with_exact() {
        let mut rng = SplitMix64::seed_from_u64(3);
        let a: Vec<f64> = (0..50_000).map(|_| sample_gamma_ratio(params(4, 2), &mut rng)).collect();
        let b: Vec<f64> = (0..50_000).map(|_| sample_gamma_ratio(params(100, 100), &mut rng)).collect();
        let c: Vec<f64> = (0..50_000).map(|_| sample_gamma_ratio(params(4, 2), &mut rng)).collect();
        let grid = default_grid();
        // DKW band at 50_000 samples per side, both sides.
        let band = 2.0 * ((2.0f64 / 0.001).ln() / (2.0 * 50_000.0)).sqrt();
        assert_eq!(check_empirical_dominance(&a, &b, &grid, band).unwrap().relation, Relation::Crossing);
        assert_eq!(check_empirical_dominance(&a, &c, &grid, band).unwrap().relation, Relation::Indistinguishable);
    }

    #[test]
    fn predictions() {
        let su = ShapeProfile { deltas: vec![4, 4], psis: vec![1, 1] };
        let siso = ShapeProfile { deltas: vec![1, 1], psis: vec![1, 1] };
        let sdma = ShapeProfile { deltas: vec![1, 1], psis: vec![4, 4] };
        let open = vec![true, true];
        let p = |a: &ShapeProfile, b: &ShapeProfile| {
            OrderingClaim::new(a.clone(), b.clone(), open.clone()).unwrap().predict()
        };
        assert_eq!(p(&su, &siso).unwrap(), Prediction::FirstBetter);
        assert_eq!(p(&sdma, &siso).unwrap(), Prediction::SecondBetter);
        assert_eq!(p(&su, &su).unwrap(), Prediction::Equal);
        let mixed = ShapeProfile { deltas: vec![4, 1], psis: vec![1, 4] };
        assert!(matches!(p(&mixed, &siso), Err(OrderingError::NoPrediction(_))));
        // A closed tier's direct shape is irrelevant.
        let claim = OrderingClaim::new(
            ShapeProfile { deltas: vec![4, 1], psis: vec![1, 1] },
            ShapeProfile { deltas: vec![4, 4], psis: vec![1, 1] },
            vec![true, false],
        )
        .unwrap();
        assert_eq!(claim.predict().unwrap(), Prediction::Equal);
    }

    #[test]
    fn su_bf_beats_full_sdma_pathwise() {
        let su = two_tier(TransmissionTechnique::SuBf, 4);
        let sd = two_tier(TransmissionTechnique::Sdma { users: 4 }, 4);
        let r = check_coverage_ordering(&su, &sd, &Placement::ppp(), &sweep(&su), &McSettings::new(1, 1_000)).unwrap();
        assert_eq!(r.prediction, Prediction::FirstBetter);
        assert_eq!(r.total_violations(), 0);
        assert!(r.bs_compared > 0);
        assert!(r.points.iter().any(|p| p.better > p.worse));
    }

    #[test]
    fn siso_beats_full_sdma_and_loses_to_su_bf() {
        let siso = two_tier(TransmissionTechnique::Siso, 1);
        let sd = two_tier(TransmissionTechnique::Sdma { users: 4 }, 4);
        let su = two_tier(TransmissionTechnique::SuBf, 4);
        let s = McSettings::new(2, 1_000);
        let r = check_coverage_ordering(&sd, &siso, &Placement::ppp(), &sweep(&siso), &s).unwrap();
        assert_eq!(r.prediction, Prediction::SecondBetter);
        assert_eq!(r.total_violations(), 0);
        let r = check_rate_ordering(&siso, &su, &Placement::ppp(), &sweep(&siso), &s).unwrap();
        assert_eq!(r.prediction, Prediction::SecondBetter);
        assert_eq!(r.total_violations(), 0);
    }

    #[test]
    fn gaps_at_sweep_center_exceed_paired_error() {
        let siso = two_tier(TransmissionTechnique::Siso, 1);
        let sd = two_tier(TransmissionTechnique::Sdma { users: 4 }, 4);
        let su = two_tier(TransmissionTechnique::SuBf, 4);
        let center = [SweepPoint::uniform(&siso, db_to_linear(2.5))];
        let s = McSettings::new(3, 4_000);
        for (a, b) in [(&su, &siso), (&siso, &sd)] {
            let r = check_coverage_ordering(a, b, &Placement::ppp(), &center, &s).unwrap();
            let p = r.points[0];
            assert!(p.mean_difference(r.realizations) > 2.0 * p.paired_standard_error(r.realizations));
        }
    }

    #[test]
    fn identical_profiles_have_zero_difference() {
        let su = two_tier(TransmissionTechnique::SuBf, 3);
        let r = check_coverage_ordering(&su, &su, &Placement::ppp(), &sweep(&su), &McSettings::new(4, 300)).unwrap();
        assert_eq!(r.prediction, Prediction::Equal);
        assert!(r.points.iter().all(|p| p.better == p.worse && p.discordant == 0));
    }

    #[test]
    fn zero_rate_targets_make_both_indicators_one() {
        let su = two_tier(TransmissionTechnique::SuBf, 4);
        let sd = two_tier(TransmissionTechnique::Sdma { users: 4 }, 4);
        let r = check_rate_ordering(&su, &sd, &Placement::ppp(), &sweep(&su), &McSettings::new(5, 300)).unwrap();
        assert!(r.points.iter().all(|p| p.better == 300 && p.worse == 300));
    }

    #[test]
    fn refusals() {
        let su = two_tier(TransmissionTechnique::SuBf, 4);
        let mut sd = two_tier(TransmissionTechnique::Sdma { users: 4 }, 4);
        sd.tiers[0].resource_fraction = 0.5;
        let s = McSettings::new(6, 10);
        let pts = sweep(&su);
        assert!(matches!(
            check_rate_ordering(&su, &sd, &Placement::ppp(), &pts, &s),
            Err(OrderingError::NoPrediction(_))
        ));
        assert!(check_coverage_ordering(&su, &sd, &Placement::ppp(), &pts, &s).is_ok());
        let mut mixed = two_tier(TransmissionTechnique::SuBf, 4);
        mixed.tiers[1].set_technique(TransmissionTechnique::Sdma { users: 4 }, 4).unwrap();
        let siso = two_tier(TransmissionTechnique::Siso, 1);
        let sdma2 = {
            let mut c = two_tier(TransmissionTechnique::Siso, 1);
            c.tiers[0].set_technique(TransmissionTechnique::Sdma { users: 2 }, 2).unwrap();
            c.tiers[1].set_technique(TransmissionTechnique::SuBf, 2).unwrap();
            c
        };
        let r = check_coverage_ordering(&mixed, &sdma2, &Placement::ppp(), &pts, &s);
        assert!(matches!(r, Err(OrderingError::NoPrediction(_))), "{r:?}");
        let mut other_density = siso.clone();
        other_density.tiers[1].density = 3.0;
        assert!(matches!(
            check_coverage_ordering(&siso, &other_density, &Placement::ppp(), &pts, &s),
            Err(OrderingError::Incomparable(_))
        ));
    }

    #[test]
    fn closed_tier_technique_does_not_block_prediction() {
        let mut a = two_tier(TransmissionTechnique::SuBf, 4);
        a.tiers[1] =
            TierConfig::new(0.01, 2.0, 1.0, TransmissionTechnique::Siso, 1).unwrap().with_access(Access::Closed);
        let mut b = a.clone();
        b.tiers[1].set_technique(TransmissionTechnique::SuBf, 4).unwrap();
        let r = check_coverage_ordering(&a, &b, &Placement::ppp(), &sweep(&a), &McSettings::new(7, 200)).unwrap();
        assert_eq!(r.prediction, Prediction::Equal);
        assert_eq!(r.total_violations(), 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn coupled_sir_ordering_holds_for_ordered_shapes(
            d_hi in 1u32..6, d_lo_frac in 0.0f64..1.0, p_lo in 1u32..4, p_extra in 0u32..3, seed in 0u64..1000
        ) {
            let d_lo = 1 + ((d_hi - 1) as f64 * d_lo_frac) as u32;
            let better = ShapeProfile { deltas: vec![d_hi, d_hi], psis: vec![p_lo, p_lo] };
            let worse = ShapeProfile { deltas: vec![d_lo, d_lo], psis: vec![p_lo + p_extra, p_lo + p_extra] };
            let base = two_tier(TransmissionTechnique::Siso, 1);
            let a = apply_profile(&base, &better).unwrap();
            let b = apply_profile(&base, &worse).unwrap();
            let r = check_coverage_ordering(&a, &b, &Placement::ppp(), &sweep(&a), &McSettings::new(seed, 40)).unwrap();
            prop_assert_eq!(r.total_violations(), 0);
        }
    }
}
