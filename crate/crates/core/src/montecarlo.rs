//! Monte Carlo estimators over sampled realizations.
//!
//! Every realization is evaluated once and tested against all sweep points.
//! Tallies are integer counts, so merging them is order-insensitive and the
//! estimates do not depend on the number of workers.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{ConfigError, NetworkConfig};
use crate::sampling::{BsRecord, Placement, Sampler};

/// Tag for the per-tier crediting rule, written into run metadata. A covered
/// realization is credited to the tier of the base station maximizing
/// `SIR / beta_k`, ties going to the lowest tier index.
pub const CREDITING_RULE: &str = "max-sir-over-target;ties-lowest-tier";

/// Two-sided 95% normal quantile used for Wilson intervals.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Realizations per sweep point when the caller does not choose.
pub const DEFAULT_REALIZATIONS: u64 = 20_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no open-access tier with positive density: coverage is undefined")]
    NoOpenTier,
    #[error("number of realizations must be at least 1")]
    NoRealizations,
    #[error("sweep point lists {got} per-tier values, network has {tiers} tiers")]
    PointLength { got: usize, tiers: usize },
    #[error("sweep point target for tier {tier} must be positive (got {value})")]
    PointTarget { tier: usize, value: f64 },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSettings {
    pub seed: u64,
    pub realizations: u64,
    /// Worker threads; 0 selects the available parallelism.
    pub workers: usize,
}

impl McSettings {
    pub fn new(seed: u64, realizations: u64) -> Self {
        Self { seed, realizations, workers: 0 }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

/// Run `f` on a pool of `workers` threads (0: default size).
pub fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, McError> {
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| McError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Per-tier SIR targets and rate targets evaluated on each realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// Linear SIR target per tier.
    pub sir_targets: Vec<f64>,
    /// Rate target per tier in bits/s/Hz.
    pub rate_targets: Vec<f64>,
}

impl SweepPoint {
    /// Targets as stored in `config`.
    pub fn from_config(config: &NetworkConfig) -> Self {
        Self {
            sir_targets: config.tiers.iter().map(|t| t.target_sir).collect(),
            rate_targets: config.tiers.iter().map(|t| t.rate_target).collect(),
        }
    }

    /// Every tier uses `sir_target`; rate targets come from `config`.
    pub fn uniform(config: &NetworkConfig, sir_target: f64) -> Self {
        Self { sir_targets: vec![sir_target; config.tiers.len()], ..Self::from_config(config) }
    }

    fn check(&self, tiers: usize) -> Result<(), McError> {
        for len in [self.sir_targets.len(), self.rate_targets.len()] {
            if len != tiers {
                return Err(McError::PointLength { got: len, tiers });
            }
        }
        for (tier, &value) in self.sir_targets.iter().enumerate() {
            if !(value > 0.0) {
                return Err(McError::PointTarget { tier, value });
            }
        }
        Ok(())
    }
}

/// Static per-tier data needed to score a realization.
#[derive(Debug, Clone)]
pub struct Evaluator {
    alpha: f64,
    powers: Vec<f64>,
    open: Vec<bool>,
    resource: Vec<f64>,
}

impl Evaluator {
    pub fn new(config: &NetworkConfig) -> Self {
        Self {
            alpha: config.alpha(),
            powers: config.tiers.iter().map(|t| t.power).collect(),
            open: config.tiers.iter().map(|t| t.is_open()).collect(),
            resource: config.tiers.iter().map(|t| t.resource_fraction).collect(),
        }
    }

    pub fn tiers(&self) -> usize {
        self.powers.len()
    }

    /// SIR of every base station, with its own interference term excluded.
    /// A base station with no interferers gets `+inf`.
    pub fn sir_into(&self, bs: &[BsRecord], sirs: &mut Vec<f64>, terms: &mut Vec<f64>) {
        sirs.clear();
        terms.clear();
        let n = bs.len();
        // terms[i] = received interference power of BS i; sirs holds suffix sums.
        terms.extend(bs.iter().map(|b| self.powers[b.tier] * b.interference_mark * b.distance.powf(-self.alpha)));
        sirs.resize(n + 1, 0.0);
        for i in (0..n).rev() {
            sirs[i] = sirs[i + 1] + terms[i];
        }
        let mut prefix = 0.0;
        for i in 0..n {
            let interference = prefix + sirs[i + 1];
            prefix += terms[i];
            let b = &bs[i];
            let signal = self.powers[b.tier] * b.direct_mark * b.distance.powf(-self.alpha);
            sirs[i] = if interference > 0.0 { signal / interference } else { f64::INFINITY };
        }
        sirs.truncate(n);
    }

    fn prepare(&self, point: &SweepPoint) -> Prepared {
        Prepared {
            target: point.sir_targets.clone(),
            inv_target: point.sir_targets.iter().map(|b| 1.0 / b).collect(),
            rate_threshold: point.rate_targets.iter().zip(&self.resource).map(|(t, o)| (t / o).exp2() - 1.0).collect(),
        }
    }

    /// Score one realization against one sweep point.
    pub fn outcome(&self, bs: &[BsRecord], sirs: &[f64], point: &SweepPoint) -> Outcome {
        self.outcome_prepared(bs, sirs, &self.prepare(point))
    }

    fn outcome_prepared(&self, bs: &[BsRecord], sirs: &[f64], p: &Prepared) -> Outcome {
        let mut out = Outcome { covered: false, rate_covered: false, candidates: 0, server: None };
        let mut best = f64::NEG_INFINITY;
        for (b, &sir) in bs.iter().zip(sirs) {
            let k = b.tier;
            if !self.open[k] {
                continue;
            }
            if sir > p.target[k] {
                out.covered = true;
                out.candidates += 1;
            }
            out.rate_covered |= sir > p.rate_threshold[k];
            let ratio = sir * p.inv_target[k];
            if ratio > best || (ratio == best && out.server.is_some_and(|s| k < s)) {
                best = ratio;
                out.server = Some(k);
            }
        }
        out
    }
}

struct Prepared {
    target: Vec<f64>,
    inv_target: Vec<f64>,
    rate_threshold: Vec<f64>,
}

/// Indicators of one realization at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    /// Some allowed BS has SIR above its tier target.
    pub covered: bool,
    /// Some allowed BS has `O_k log2(1 + SIR) > T_k`.
    pub rate_covered: bool,
    /// Number of allowed BSs with SIR above their tier target.
    pub candidates: u32,
    /// Tier of the allowed BS maximizing `SIR / beta_k`.
    pub server: Option<usize>,
}

/// SIR of every base station in `r`, paired with its tier index.
pub fn sir_per_bs(r: &crate::sampling::Realization, config: &NetworkConfig) -> Vec<(usize, f64)> {
    let eval = Evaluator::new(config);
    let (mut sirs, mut terms) = (Vec::new(), Vec::new());
    eval.sir_into(&r.bs, &mut sirs, &mut terms);
    r.bs.iter().map(|b| b.tier).zip(sirs).collect()
}

/// Integer counts for one sweep point.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PointTally {
    pub realizations: u64,
    pub covered: u64,
    pub rate_covered: u64,
    /// `candidates[n]` realizations had exactly `n` candidate BSs.
    pub candidates: Vec<u64>,
    /// Covered realizations credited to each tier.
    pub credited: Vec<u64>,
    /// Realizations whose best allowed BS is in each tier.
    pub served: Vec<u64>,
}

impl PointTally {
    fn new(tiers: usize) -> Self {
        Self { credited: vec![0; tiers], served: vec![0; tiers], ..Self::default() }
    }

    fn record(&mut self, o: &Outcome) {
        self.realizations += 1;
        self.covered += u64::from(o.covered);
        self.rate_covered += u64::from(o.rate_covered);
        let n = o.candidates as usize;
        if self.candidates.len() <= n {
            self.candidates.resize(n + 1, 0);
        }
        self.candidates[n] += 1;
        if let Some(k) = o.server {
            self.served[k] += 1;
            if o.covered {
                self.credited[k] += 1;
            }
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.realizations += other.realizations;
        self.covered += other.covered;
        self.rate_covered += other.rate_covered;
        if self.candidates.len() < other.candidates.len() {
            self.candidates.resize(other.candidates.len(), 0);
        }
        for (a, b) in self.candidates.iter_mut().zip(&other.candidates) {
            *a += b;
        }
        for (a, b) in self.credited.iter_mut().zip(&other.credited) {
            *a += b;
        }
        for (a, b) in self.served.iter_mut().zip(&other.served) {
            *a += b;
        }
        self
    }

    pub fn coverage(&self) -> CoverageEstimate {
        CoverageEstimate::wilson(self.covered, self.realizations)
    }

    pub fn rate_coverage(&self) -> CoverageEstimate {
        CoverageEstimate::wilson(self.rate_covered, self.realizations)
    }

    pub fn candidate_histogram(&self) -> CandidateCountHistogram {
        let counts = self.candidates.iter().enumerate().filter(|(_, &c)| c > 0).map(|(n, &c)| (n as u32, c)).collect();
        CandidateCountHistogram { counts, realizations: self.realizations }
    }

    pub fn per_tier(&self) -> PerTierCoverage {
        let n = self.realizations as f64;
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        PerTierCoverage {
            overall: self.covered as f64 / n,
            share: self.credited.iter().map(|&c| c as f64 / n).collect(),
            serving_fraction: self.served.iter().map(|&s| s as f64 / n).collect(),
            conditional: self.credited.iter().zip(&self.served).map(|(&c, &s)| ratio(c, s)).collect(),
        }
    }
}

/// Evaluate `settings.realizations` realizations of `sampler` at every point.
pub fn simulate(sampler: &Sampler, points: &[SweepPoint], settings: &McSettings) -> Result<Vec<PointTally>, McError> {
    let config = sampler.config();
    if !config.has_open_tier() {
        return Err(McError::NoOpenTier);
    }
    if settings.realizations == 0 {
        return Err(McError::NoRealizations);
    }
    let tiers = config.tiers.len();
    for p in points {
        p.check(tiers)?;
    }
    let eval = Evaluator::new(config);
    let prepared: Vec<Prepared> = points.iter().map(|p| eval.prepare(p)).collect();
    let empty = || vec![PointTally::new(tiers); points.len()];
    let seed = settings.seed;
    with_pool(settings.workers, || {
        (0..settings.realizations)
            .into_par_iter()
            .fold(
                || (empty(), Vec::new(), Vec::new(), Vec::new()),
                |(mut tallies, mut bs, mut sirs, mut terms), index| {
                    sampler.fill(seed, index, &mut bs);
                    eval.sir_into(&bs, &mut sirs, &mut terms);
                    for (tally, p) in tallies.iter_mut().zip(&prepared) {
                        tally.record(&eval.outcome_prepared(&bs, &sirs, p));
                    }
                    (tallies, bs, sirs, terms)
                },
            )
            .map(|(tallies, ..)| tallies)
            .reduce(empty, |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect())
    })
}

/// Fraction estimate with a 95% Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageEstimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_realizations: u64,
}

impl CoverageEstimate {
    pub fn wilson(successes: u64, n: u64) -> Self {
        let nf = n as f64;
        let p = successes as f64 / nf;
        let z2 = Z_95 * Z_95;
        let denom = 1.0 + z2 / nf;
        let center = (p + z2 / (2.0 * nf)) / denom;
        let half = Z_95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
        Self {
            value: p,
            ci_low: (center - half).clamp(0.0, p),
            ci_high: (center + half).clamp(p, 1.0),
            n_realizations: n,
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

/// Empirical distribution of the number of candidate serving BSs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateCountHistogram {
    /// Realizations with exactly `n` candidates, for every observed `n`.
    pub counts: BTreeMap<u32, u64>,
    pub realizations: u64,
}

impl CandidateCountHistogram {
    pub fn probability(&self, n: u32) -> f64 {
        self.counts.get(&n).map_or(0.0, |&c| c as f64 / self.realizations as f64)
    }

    /// `P(X > n)`.
    pub fn tail(&self, n: u32) -> f64 {
        let above: u64 = self.counts.range(n + 1..).map(|(_, c)| c).sum();
        above as f64 / self.realizations as f64
    }

    pub fn probabilities(&self) -> BTreeMap<u32, f64> {
        self.counts.keys().map(|&n| (n, self.probability(n))).collect()
    }
}

/// Coverage split by tier.
#[derive(Debug, Clone, PartialEq)]
pub struct PerTierCoverage {
    pub overall: f64,
    /// `P(covered and credited to tier k)`; sums to `overall`.
    pub share: Vec<f64>,
    /// `P(best allowed BS is in tier k)`.
    pub serving_fraction: Vec<f64>,
    /// `P(covered | best allowed BS is in tier k)`; 0 for tiers that never serve.
    pub conditional: Vec<f64>,
}

/// `sum_k psi_k lambda_k log2(1 + beta_k) Pc_k` over open tiers, with `Pc_k`
/// the coverage conditional on being served by tier `k`.
pub fn ase_from(config: &NetworkConfig, point: &SweepPoint, per_tier: &PerTierCoverage) -> f64 {
    config
        .tiers
        .iter()
        .zip(&point.sir_targets)
        .zip(&per_tier.conditional)
        .filter(|((t, _), _)| t.is_open())
        .map(|((t, &beta), &pc)| f64::from(t.psi()) * t.density * beta.ln_1p() / std::f64::consts::LN_2 * pc)
        .sum()
}

fn single_point(
    config: &NetworkConfig,
    placement: &Placement,
    settings: &McSettings,
) -> Result<(SweepPoint, PointTally), McError> {
    let sampler = Sampler::new(config, placement)?;
    let point = SweepPoint::from_config(sampler.config());
    let tally = simulate(&sampler, std::slice::from_ref(&point), settings)?.remove(0);
    Ok((point, tally))
}

/// Coverage with each tier's own target.
pub fn estimate_coverage(
    config: &NetworkConfig,
    placement: &Placement,
    settings: &McSettings,
) -> Result<CoverageEstimate, McError> {
    Ok(single_point(config, placement, settings)?.1.coverage())
}

/// Coverage at each uniform target of `targets`, all from the same realizations.
pub fn estimate_coverage_sweep(
    config: &NetworkConfig,
    placement: &Placement,
    targets: &[f64],
    settings: &McSettings,
) -> Result<Vec<CoverageEstimate>, McError> {
    let sampler = Sampler::new(config, placement)?;
    let points: Vec<_> = targets.iter().map(|&b| SweepPoint::uniform(config, b)).collect();
    Ok(simulate(&sampler, &points, settings)?.iter().map(PointTally::coverage).collect())
}

pub fn estimate_candidate_count(
    config: &NetworkConfig,
    placement: &Placement,
    settings: &McSettings,
) -> Result<CandidateCountHistogram, McError> {
    Ok(single_point(config, placement, settings)?.1.candidate_histogram())
}

pub fn estimate_rate_coverage(
    config: &NetworkConfig,
    placement: &Placement,
    settings: &McSettings,
) -> Result<CoverageEstimate, McError> {
    Ok(single_point(config, placement, settings)?.1.rate_coverage())
}

pub fn estimate_ase(
    config: &NetworkConfig,
    placement: &Placement,
    settings: &McSettings,
) -> Result<(f64, PerTierCoverage), McError> {
    let (point, tally) = single_point(config, placement, settings)?;
    let per_tier = tally.per_tier();
    Ok((ase_from(config, &point, &per_tier), per_tier))
}
