//! Execution of experiment specs into tables.

use super::table::{e9, f2, f6, Table};
use super::{ExperimentError, ExperimentSpec, Kind, ResolvedCase};
use crate::analytic::{self, AnalyticError};
use crate::model::{self, db_to_linear, linear_to_db, NetworkConfig, ThetaSplit};
use crate::montecarlo::{self, McSettings, PointTally, SweepPoint, CREDITING_RULE};
use crate::ordering::{self, Metric, OrderingError, Prediction};
use crate::sampling::{Placement, Sampler};
use crate::specfun::{gamma_ratio_ccdf, GammaRatioParams};

/// A finished experiment: the table written to disk and one-line summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: Table,
    pub summary: Vec<String>,
}

impl Report {
    pub fn to_csv(&self) -> String {
        self.table.to_csv()
    }
}

/// Run `spec` on `workers` threads (0: default). Output does not depend on
/// the worker count.
pub fn run_experiment(spec: &ExperimentSpec, workers: usize) -> Result<Report, ExperimentError> {
    spec.validate()?;
    let mut report = match spec.kind {
        Kind::CoverageSweep | Kind::BoundVsMc => coverage(spec, workers)?,
        Kind::CandidateCount => candidates(spec, workers)?,
        Kind::AseCompare => ase(spec, workers)?,
        Kind::ThetaSweep => theta(spec, workers)?,
        Kind::Ordering => orderings(spec, workers)?,
        Kind::Ccdf => ccdf(spec)?,
    };
    let mut meta = Table::default();
    meta.meta("tool", format!("hetnet {}", env!("CARGO_PKG_VERSION")));
    meta.meta("experiment", &spec.name);
    meta.meta("kind", spec.kind.name());
    meta.meta("config_digest", spec.digest());
    meta.meta("seed", spec.seed);
    meta.meta("realizations", spec.realizations);
    meta.meta("crediting_rule", CREDITING_RULE);
    meta.meta("paired", spec.paired || spec.kind == Kind::Ordering);
    if let Some(a) = spec.sweep_db {
        meta.meta("sweep_db", a.describe());
    }
    if let Some(a) = spec.theta {
        meta.meta("theta", a.describe());
    }
    meta.metadata.append(&mut report.table.metadata);
    report.table.metadata = meta.metadata;
    Ok(report)
}

/// Rate target of a tier: its own when set, otherwise the Shannon rate of its
/// SIR target.
fn rate_target(config: &NetworkConfig, tier: usize, sir_target: f64) -> f64 {
    let own = config.tiers[tier].rate_target;
    if own > 0.0 {
        own
    } else {
        sir_target.log2_1p()
    }
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

fn point_with_targets(config: &NetworkConfig, sir_targets: Vec<f64>) -> SweepPoint {
    let rate_targets = sir_targets.iter().enumerate().map(|(k, &b)| rate_target(config, k, b)).collect();
    SweepPoint { sir_targets, rate_targets }
}

/// `(label dB, point)` for every sweep value, or the case's own targets.
fn sweep_points(spec: &ExperimentSpec, case: &ResolvedCase) -> Result<Vec<(f64, SweepPoint)>, ExperimentError> {
    let cfg = &case.config;
    match spec.sweep_db {
        Some(axis) => Ok(axis
            .values()?
            .into_iter()
            .map(|v| {
                let targets = case.offsets_db.iter().map(|o| db_to_linear(v + o)).collect();
                (v, point_with_targets(cfg, targets))
            })
            .collect()),
        None => {
            let targets = cfg.tiers.iter().map(|t| t.target_sir).collect();
            Ok(vec![(linear_to_db(cfg.tiers[0].target_sir), point_with_targets(cfg, targets))])
        }
    }
}

fn with_targets(config: &NetworkConfig, point: &SweepPoint) -> NetworkConfig {
    let mut c = config.clone();
    for (t, &b) in c.tiers.iter_mut().zip(&point.sir_targets) {
        t.target_sir = b;
    }
    c
}

fn settings(spec: &ExperimentSpec, case_index: usize, workers: usize) -> McSettings {
    McSettings::new(spec.case_seed(case_index), spec.realizations).with_workers(workers)
}

fn simulate_case(
    spec: &ExperimentSpec,
    index: usize,
    case: &ResolvedCase,
    points: &[SweepPoint],
    workers: usize,
) -> Result<Vec<PointTally>, ExperimentError> {
    let sampler = Sampler::new(&case.config, &case.placement)?;
    Ok(montecarlo::simulate(&sampler, points, &settings(spec, index, workers))?)
}

fn joined(values: &[f64]) -> String {
    values.iter().map(|&v| f6(v)).collect::<Vec<_>>().join(";")
}

fn coverage(spec: &ExperimentSpec, workers: usize) -> Result<Report, ExperimentError> {
    let mut table = Table::new(&[
        "case",
        "sir_db",
        "coverage",
        "ci_low",
        "ci_high",
        "rate_coverage",
        "bound",
        "bound_raw",
        "bound_exceeds_one",
        "gap",
        "bound_status",
        "per_tier_share",
        "n",
    ]);
    let mut summary = Vec::new();
    for (i, case) in spec.cases()?.iter().enumerate() {
        let labelled = sweep_points(spec, case)?;
        let points: Vec<SweepPoint> = labelled.iter().map(|(_, p)| p.clone()).collect();
        let tallies = simulate_case(spec, i, case, &points, workers)?;
        let mut worst_gap = f64::NEG_INFINITY;
        for ((db, point), tally) in labelled.iter().zip(&tallies) {
            let est = tally.coverage();
            let (bound, raw, exceeds, status) =
                match analytic::coverage_bound_general(&with_targets(&case.config, point)) {
                    Ok(r) => (r.value, r.raw_value, r.exceeds_one.to_string(), "ok".to_string()),
                    Err(e) => (f64::NAN, f64::NAN, String::new(), e.to_string()),
                };
            if raw.is_finite() {
                worst_gap = worst_gap.max(raw - est.value);
            }
            table.push(vec![
                case.label.clone(),
                f2(*db),
                f6(est.value),
                f6(est.ci_low),
                f6(est.ci_high),
                f6(tally.rate_coverage().value),
                f6(bound),
                f6(raw),
                exceeds,
                f6(raw - est.value),
                status,
                joined(&tally.per_tier().share),
                tally.realizations.to_string(),
            ]);
        }
        let first = tallies[0].coverage().value;
        let last = tallies[tallies.len() - 1].coverage().value;
        summary.push(format!("{}: coverage {first:.4} .. {last:.4}, largest bound gap {worst_gap:.4}", case.label));
    }
    Ok(Report { table, summary })
}

fn candidates(spec: &ExperimentSpec, workers: usize) -> Result<Report, ExperimentError> {
    let mut table = Table::new(&["case", "sir_db", "p_x0", "p_x1", "p_x_gt1", "mean_candidates", "n"]);
    let mut summary = Vec::new();
    for (i, case) in spec.cases()?.iter().enumerate() {
        let labelled = sweep_points(spec, case)?;
        let points: Vec<SweepPoint> = labelled.iter().map(|(_, p)| p.clone()).collect();
        let tallies = simulate_case(spec, i, case, &points, workers)?;
        for ((db, _), tally) in labelled.iter().zip(&tallies) {
            let h = tally.candidate_histogram();
            let mean = h.counts.iter().map(|(&n, &c)| f64::from(n) * c as f64).sum::<f64>() / h.realizations as f64;
            table.push(vec![
                case.label.clone(),
                f2(*db),
                f6(h.probability(0)),
                f6(h.probability(1)),
                f6(h.tail(1)),
                f6(mean),
                tally.realizations.to_string(),
            ]);
        }
        let h = tallies[0].candidate_histogram();
        summary.push(format!("{}: P(X > 1) = {:.4} at the first point", case.label, h.tail(1)));
    }
    Ok(Report { table, summary })
}

fn ase(spec: &ExperimentSpec, workers: usize) -> Result<Report, ExperimentError> {
    let mut table = Table::new(&[
        "case",
        "sir_db",
        "ase_mc",
        "ase_closed_form",
        "ase_low_sir_limit",
        "coverage",
        "per_tier_conditional",
        "n",
    ]);
    let mut summary = Vec::new();
    for (i, case) in spec.cases()?.iter().enumerate() {
        let labelled = sweep_points(spec, case)?;
        let points: Vec<SweepPoint> = labelled.iter().map(|(_, p)| p.clone()).collect();
        let tallies = simulate_case(spec, i, case, &points, workers)?;
        let mut peak = (f64::NEG_INFINITY, 0.0);
        for ((db, point), tally) in labelled.iter().zip(&tallies) {
            let per_tier = tally.per_tier();
            let mc = montecarlo::ase_from(&case.config, point, &per_tier);
            let cfg = with_targets(&case.config, point);
            let closed = analytic::ase_symmetric_config(&cfg).map(|r| f6(r.value)).unwrap_or_default();
            if mc > peak.0 {
                peak = (mc, *db);
            }
            table.push(vec![
                case.label.clone(),
                f2(*db),
                f6(mc),
                closed,
                f6(analytic::ase_low_sir_limit(&cfg)),
                f6(per_tier.overall),
                joined(&per_tier.conditional),
                tally.realizations.to_string(),
            ]);
        }
        summary.push(format!("{}: peak ASE {:.4} at {:.1} dB", case.label, peak.0, peak.1));
    }
    Ok(Report { table, summary })
}

/// Least-squares line `y = a + b x` and its coefficient of determination.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (intercept, slope, r2)
}

fn theta(spec: &ExperimentSpec, workers: usize) -> Result<Report, ExperimentError> {
    if spec.sweep_db.is_some() {
        return Err(ExperimentError::Validation("theta_sweep takes its targets from the cases, not sweep_db".into()));
    }
    let thetas = spec.theta.expect("validated").values()?;
    let split = spec.split_tier - 1;
    let mut table = Table::new(&["case", "theta", "coverage", "ci_low", "ci_high", "n"]);
    let mut summary = Vec::new();
    for (i, case) in spec.cases()?.iter().enumerate() {
        let mut ys = Vec::with_capacity(thetas.len());
        for &theta in &thetas {
            let cfg = model::split_theta(&case.config, ThetaSplit { tier_index: split, open_fraction: theta })?;
            let mut kinds = case.placement.0.clone();
            kinds.resize(case.config.tiers.len(), Default::default());
            kinds.insert(split, kinds[split]);
            let point = point_with_targets(&cfg, cfg.tiers.iter().map(|t| t.target_sir).collect());
            let sampler = Sampler::new(&cfg, &Placement(kinds))?;
            let tally = montecarlo::simulate(&sampler, &[point], &settings(spec, i, workers))?.remove(0);
            let est = tally.coverage();
            ys.push(est.value);
            table.push(vec![
                case.label.clone(),
                f2(theta),
                f6(est.value),
                f6(est.ci_low),
                f6(est.ci_high),
                tally.realizations.to_string(),
            ]);
        }
        let (intercept, slope, r2) = linear_fit(&thetas, &ys);
        table.trailer.push(format!(
            "fit {}: intercept={} slope={} r2={}",
            case.label,
            f6(intercept),
            f6(slope),
            f6(r2)
        ));
        summary.push(format!("{}: coverage {:.4} + {:.4} theta, R^2 {:.4}", case.label, intercept, slope, r2));
    }
    Ok(Report { table, summary })
}

fn orderings(spec: &ExperimentSpec, workers: usize) -> Result<Report, ExperimentError> {
    let cases = spec.cases()?;
    let pairs = spec.comparison_indices(&cases)?;
    let mut table = Table::new(&[
        "comparison",
        "metric",
        "sir_db",
        "predicted_better",
        "better",
        "worse",
        "mean_difference",
        "paired_se",
        "indicator_violations",
        "candidate_violations",
        "sir_violations",
        "bs_compared",
        "n",
    ]);
    let mut summary = Vec::new();
    let settings = McSettings::new(spec.seed, spec.realizations).with_workers(workers);
    for (a, b) in pairs {
        let (first, second) = (&cases[a], &cases[b]);
        if first.placement != second.placement {
            return Err(ExperimentError::Validation(format!(
                "cases `{}` and `{}` use different placements",
                first.label, second.label
            )));
        }
        let name = format!("{} vs {}", first.label, second.label);
        let labelled = sweep_points(spec, first)?;
        let points: Vec<SweepPoint> = labelled.iter().map(|(_, p)| p.clone()).collect();
        for metric in [Metric::Coverage, Metric::Rate] {
            let metric_name = match metric {
                Metric::Coverage => "coverage",
                Metric::Rate => "rate",
            };
            let report = match ordering::check_ordering(
                &first.config,
                &second.config,
                metric,
                &first.placement,
                &points,
                &settings,
            ) {
                Ok(r) => r,
                Err(OrderingError::NoPrediction(why)) => {
                    summary.push(format!("{name} ({metric_name}): no prediction, {why}"));
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let better = match report.prediction {
                Prediction::FirstBetter => first.label.as_str(),
                Prediction::SecondBetter => second.label.as_str(),
                Prediction::Equal => "equal",
            };
            let n = report.realizations;
            for ((db, _), p) in labelled.iter().zip(&report.points) {
                table.push(vec![
                    name.clone(),
                    metric_name.into(),
                    f2(*db),
                    better.into(),
                    f6(p.better as f64 / n as f64),
                    f6(p.worse as f64 / n as f64),
                    f6(p.mean_difference(n)),
                    f6(p.paired_standard_error(n)),
                    p.indicator_violations.to_string(),
                    p.candidate_violations.to_string(),
                    report.sir_violations.to_string(),
                    report.bs_compared.to_string(),
                    n.to_string(),
                ]);
            }
            summary.push(format!(
                "{name} ({metric_name}): {better} predicted better, {} violations",
                report.total_violations()
            ));
        }
    }
    Ok(Report { table, summary })
}

fn ccdf(spec: &ExperimentSpec) -> Result<Report, ExperimentError> {
    let grid = match spec.grid {
        Some(g) => ordering::log_grid(g.lo, g.hi, g.points),
        None => ordering::log_grid(1e-2, 1e2, 81),
    };
    let params: Vec<GammaRatioParams> = spec
        .pairs
        .iter()
        .map(|&[k, m]| GammaRatioParams::new(k, m).map_err(|e| ExperimentError::Validation(e.to_string())))
        .collect::<Result<_, _>>()?;
    let labels: Vec<String> = spec.pairs.iter().map(|[k, m]| format!("Z_{k}_{m}")).collect();
    let mut header = vec!["z"];
    header.extend(labels.iter().map(String::as_str));
    let mut table = Table::new(&header);
    for &z in &grid {
        let mut row = vec![e9(z)];
        for &p in &params {
            row.push(e9(gamma_ratio_ccdf(p, z).map_err(|e| ExperimentError::Runtime(e.to_string()))?));
        }
        table.push(row);
    }
    let mut summary = Vec::new();
    for i in 0..params.len() {
        for j in i + 1..params.len() {
            let v = ordering::check_ccdf_dominance(params[i], params[j], &grid, ordering::DOMINANCE_TOLERANCE)
                .map_err(|e| ExperimentError::Runtime(e.to_string()))?;
            let line = format!(
                "dominance {} vs {}: {} (max violation {})",
                labels[i],
                labels[j],
                v.relation.name(),
                f6(v.max_violation)
            );
            table.trailer.push(line.clone());
            summary.push(line);
        }
    }
    Ok(Report { table, summary })
}

/// Union bound on coverage over a target sweep, without simulation.
pub fn bound_report(network: &super::NetworkSpec, sweep: Option<super::Axis>) -> Result<Report, ExperimentError> {
    let spec = ExperimentSpec {
        name: "bound".into(),
        kind: Kind::CoverageSweep,
        seed: super::DEFAULT_SEED,
        realizations: 1,
        paired: false,
        sweep_db: sweep,
        theta: None,
        split_tier: 2,
        network: Some(network.clone()),
        cases: Vec::new(),
        comparisons: Vec::new(),
        pairs: Vec::new(),
        grid: None,
    };
    spec.validate()?;
    let case = &spec.cases()?[0];
    let mut table = Table::new(&["sir_db", "bound", "bound_raw", "exceeds_one", "method", "est_abs_error"]);
    table.meta("tool", format!("hetnet {}", env!("CARGO_PKG_VERSION")));
    table.meta("kind", "bound");
    table.meta("config_digest", crate::sampling::ConfigDigest::of(network));
    let mut summary = Vec::new();
    for (db, point) in sweep_points(&spec, case)? {
        let r = analytic::coverage_bound_general(&with_targets(&case.config, &point))?;
        table.push(vec![
            f2(db),
            f6(r.value),
            f6(r.raw_value),
            r.exceeds_one.to_string(),
            r.method.name().into(),
            e9(r.est_abs_error),
        ]);
        if r.exceeds_one {
            summary.push(format!("{db:.2} dB: union bound {:.4} exceeds 1, reported clamped", r.raw_value));
        }
    }
    Ok(Report { table, summary })
}

impl From<AnalyticError> for ExperimentError {
    fn from(e: AnalyticError) -> Self {
        match e {
            AnalyticError::Quadrature { .. } => ExperimentError::Runtime(e.to_string()),
            other => ExperimentError::Validation(other.to_string()),
        }
    }
}
