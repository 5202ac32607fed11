//! Closed-form and quadrature results: the interference Laplace transform and
//! its derivatives, union upper bounds on coverage, and area spectral
//! efficiency (ASE) formulas.

use std::f64::consts::{LN_2, PI};

use serde::Serialize;
use thiserror::Error;

use crate::model::{self, ConfigError, NetworkConfig, TransmissionTechnique};
use crate::specfun::{gamma, interference_constant, DomainError};

pub mod quad;

/// Absolute error target for quadrature-based bounds.
pub const BOUND_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("quadrature did not converge: estimated error {achieved:e} exceeds {target:e}")]
    Quadrature { achieved: f64, target: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    SeriesLimit,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::Quadrature => "quadrature",
            Method::SeriesLimit => "series_limit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticResult {
    /// Result clamped to at most 1 when it bounds a probability.
    pub value: f64,
    /// Unclamped result.
    pub raw_value: f64,
    pub method: Method,
    /// Zero for closed forms.
    pub est_abs_error: f64,
    /// The raw union bound is above 1 and `value` was clamped.
    pub exceeds_one: bool,
}

impl AnalyticResult {
    fn closed_form(value: f64) -> Self {
        Self { value, raw_value: value, method: Method::ClosedForm, est_abs_error: 0.0, exceeds_one: false }
    }

    fn probability_bound(raw: f64, method: Method, est_abs_error: f64) -> Self {
        Self { value: raw.min(1.0), raw_value: raw, method, est_abs_error, exceeds_one: raw > 1.0 }
    }
}

/// Parameters of `L_I(s) = exp(-C s^(2/alpha))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceSpec {
    /// `C = sum_j lambda_j P_j^(2/alpha) C(alpha, psi_j)` over every tier.
    pub aggregate: f64,
    pub alpha: f64,
}

impl LaplaceSpec {
    pub fn new(aggregate: f64, alpha: f64) -> Result<Self, AnalyticError> {
        if !(aggregate > 0.0 && aggregate.is_finite()) {
            return Err(AnalyticError::Precondition(format!("aggregate constant {aggregate} must be positive")));
        }
        if !(alpha > 2.0 && alpha.is_finite()) {
            return Err(ConfigError::PathLossExponent(alpha).into());
        }
        Ok(Self { aggregate, alpha })
    }

    /// Interference seen by the typical user from all tiers, open or closed.
    pub fn from_config(config: &NetworkConfig) -> Result<Self, AnalyticError> {
        let config = model::validate(config)?;
        let delta = config.delta_exponent();
        let mut aggregate = 0.0;
        for t in &config.tiers {
            aggregate += t.density * t.power.powf(delta) * interference_constant(config.alpha(), t.psi())?.value;
        }
        Self::new(aggregate, config.alpha())
    }

    pub fn delta(&self) -> f64 {
        2.0 / self.alpha
    }
}

/// `L_I(s) = exp(-C s^(2/alpha))`.
pub fn laplace_interference(spec: &LaplaceSpec, s: f64) -> Result<f64, AnalyticError> {
    if !(s >= 0.0) {
        return Err(DomainError::Negative { function: "laplace_interference", value: s }.into());
    }
    Ok((-spec.aggregate * s.powf(spec.delta())).exp())
}

/// Complete Bell polynomials `B_0..=B_n` of `x = [x_1, .., x_n]`, from
/// `B_{n+1} = sum_k binom(n, k) B_{n-k} x_{k+1}`.
pub fn complete_bell(x: &[f64]) -> Vec<f64> {
    let mut b = Vec::with_capacity(x.len() + 1);
    b.push(1.0);
    for n in 0..x.len() {
        let mut binom = 1.0;
        let mut sum = 0.0;
        for k in 0..=n {
            sum += binom * b[n - k] * x[k];
            binom *= (n - k) as f64 / (k + 1) as f64;
        }
        b.push(sum);
    }
    b
}

/// `|(d)_j| / (j - 1)!` for `j = 1..=n`, where `(d)_j` is the falling factorial.
fn falling_factorial_weights(d: f64, n: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(n);
    let mut cur = d;
    for j in 1..=n {
        c.push(cur);
        cur *= (d - j as f64).abs() / j as f64;
    }
    c
}

/// Derivatives `L_I^(0..=order)(s)` for `s > 0`. The exponent `g(s) = -C s^delta`
/// has `g^(j)(s) = -C (delta)_j s^(delta - j)`, and Faa di Bruno's formula for
/// `exp(g)` gives `L^(n) = L B_n(g', .., g^(n))`.
pub fn laplace_derivatives(spec: &LaplaceSpec, s: f64, order: usize) -> Result<Vec<f64>, AnalyticError> {
    if !(s > 0.0) {
        return Err(DomainError::NonPositive { function: "laplace_derivatives", value: s }.into());
    }
    let d = spec.delta();
    let mut falling = 1.0;
    let x: Vec<f64> = (0..order)
        .map(|j| {
            falling *= d - j as f64;
            -spec.aggregate * falling * s.powf(d - (j + 1) as f64)
        })
        .collect();
    let l = laplace_interference(spec, s)?;
    Ok(complete_bell(&x).into_iter().map(|b| l * b).collect())
}

/// Integrand of the shape factor: `e^(-w) sum_{i<shape} (-s)^i L^(i)(s) / (i! L(s))`
/// at `w = C s^delta`. All Bell terms are non-negative after the sign flip, and
/// the sum is rescaled as it grows so large shapes do not overflow.
fn shape_integrand(weights: &[f64], shape: usize, w: f64, b: &mut Vec<f64>) -> f64 {
    b.clear();
    b.push(1.0);
    let mut log_scale = 0.0;
    let mut total = 1.0;
    for n in 0..shape.saturating_sub(1) {
        let s: f64 = (0..=n).map(|k| b[n - k] * weights[k]).sum();
        let next = w * s / (n + 1) as f64;
        b.push(next);
        total += next;
        if total > 1e100 {
            for v in b.iter_mut() {
                *v *= 1e-100;
            }
            total *= 1e-100;
            log_scale += 100.0 * std::f64::consts::LN_10;
        }
    }
    total * (log_scale - w).exp()
}

/// `S(shape) = int_0^inf e^(-w) sum_{i<shape} (-s)^i L^(i)(s) / (i! L(s)) dw`,
/// the factor by which a `Gamma(shape, 1)` direct link scales the one-term
/// bound. Returns `(value, estimated absolute error)`.
pub fn bound_shape_factor(delta: f64, shape: u32, target: f64) -> Result<(f64, f64), AnalyticError> {
    if shape == 0 {
        return Err(DomainError::ZeroShape { function: "bound_shape_factor" }.into());
    }
    let n = shape as usize;
    let weights = falling_factorial_weights(delta, n);
    let mut scratch = Vec::with_capacity(n);
    let mut f = |w: f64| shape_integrand(&weights, n, w, &mut scratch);
    // Integrate up to where the integrand is negligible; f(0) = 1.
    let mut upper = 32.0_f64.max(2.0 * f64::from(shape));
    while f(upper) > 1e-17 || f(2.0 * upper) > 1e-17 {
        upper *= 2.0;
    }
    let tail = f(upper) * upper;
    let out = quad::integrate(f, 0.0, upper, target)
        .map_err(|e| AnalyticError::Quadrature { achieved: e.abs_error + tail, target })?;
    Ok((out.value, out.abs_error + tail))
}

fn check_alpha(alpha: f64) -> Result<(), AnalyticError> {
    if alpha > 2.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::PathLossExponent(alpha).into())
    }
}

/// Per-tier coefficient `lambda_k pi (P_k / beta_k)^delta / C` of the shape
/// factor, for open tiers with positive density.
fn bound_terms(config: &NetworkConfig) -> Result<(NetworkConfig, Vec<(usize, f64)>), AnalyticError> {
    let config = model::validate(config)?;
    if !config.has_open_tier() {
        return Err(AnalyticError::Precondition("no open-access tier with positive density".into()));
    }
    let spec = LaplaceSpec::from_config(&config)?;
    let delta = spec.delta();
    let terms = config
        .tiers
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_open() && t.density > 0.0)
        .map(|(k, t)| (k, t.density * PI * (t.power / t.target_sir).powf(delta) / spec.aggregate))
        .collect();
    Ok((config, terms))
}

/// Union bound on coverage when every allowed tier has a `Gamma(1, 1)` direct
/// link: `pi sum_k lambda_k (P_k / beta_k)^delta / C`.
pub fn coverage_bound_delta1(config: &NetworkConfig) -> Result<AnalyticResult, AnalyticError> {
    let (config, terms) = bound_terms(config)?;
    if let Some(&(k, _)) = terms.iter().find(|&&(k, _)| config.tiers[k].delta() != 1) {
        return Err(AnalyticError::Precondition(format!(
            "tier {} has direct-link shape {}, the closed form needs 1",
            k + 1,
            config.tiers[k].delta()
        )));
    }
    let raw = terms.iter().map(|(_, a)| a).sum();
    Ok(AnalyticResult::probability_bound(raw, Method::ClosedForm, 0.0))
}

/// Union bound on coverage for arbitrary direct-link shapes, each tier's term
/// scaled by its quadrature shape factor.
pub fn coverage_bound_general(config: &NetworkConfig) -> Result<AnalyticResult, AnalyticError> {
    let (config, terms) = bound_terms(config)?;
    let delta = config.delta_exponent();
    let total: f64 = terms.iter().map(|(_, a)| a).sum();
    let target = (0.1 * BOUND_TOLERANCE / total).max(1e-14);
    let mut factors: Vec<(u32, (f64, f64))> = Vec::new();
    let (mut raw, mut error) = (0.0, 0.0);
    for &(k, a) in &terms {
        let shape = config.tiers[k].delta();
        let (s, e) = match factors.iter().find(|(d, _)| *d == shape) {
            Some(&(_, v)) => v,
            None => {
                let v = bound_shape_factor(delta, shape, target)?;
                factors.push((shape, v));
                v
            }
        };
        raw += a * s;
        error += a * e;
    }
    let allowed = BOUND_TOLERANCE.max(1e-12 * raw);
    if error > allowed {
        return Err(AnalyticError::Quadrature { achieved: error, target: allowed });
    }
    Ok(AnalyticResult::probability_bound(raw, Method::Quadrature, error))
}

/// ASE of a symmetric network (equal targets and technique in every tier)
/// whose tiers all have `Gamma(1, 1)` direct links: full SDMA or SISO.
/// `eta = psi (pi / C(alpha, psi)) beta^(-delta) log2(1 + beta) sum lambda`.
pub fn ase_symmetric(
    alpha: f64,
    technique: TransmissionTechnique,
    antennas: u32,
    beta: f64,
    total_density: f64,
) -> Result<AnalyticResult, AnalyticError> {
    check_alpha(alpha)?;
    let (delta_shape, psi) = model::technique_shapes(technique, antennas)?;
    if delta_shape != 1 {
        return Err(AnalyticError::Precondition(format!(
            "{} on {antennas} antennas has no closed-form ASE; use the Monte Carlo estimate",
            technique.name()
        )));
    }
    if !(beta > 0.0) || !(total_density >= 0.0) {
        return Err(AnalyticError::Precondition("target must be positive and density non-negative".into()));
    }
    let c = interference_constant(alpha, psi)?.value;
    let pc = PI / c * beta.powf(-2.0 / alpha);
    Ok(AnalyticResult::closed_form(f64::from(psi) * pc * beta.ln_1p() / LN_2 * total_density))
}

/// [`ase_symmetric`] for a configuration, after checking that every tier has
/// the same target and technique and that all tiers are open.
pub fn ase_symmetric_config(config: &NetworkConfig) -> Result<AnalyticResult, AnalyticError> {
    let config = model::validate(config)?;
    let first = &config.tiers[0];
    let symmetric = config.tiers.iter().all(|t| {
        t.target_sir == first.target_sir
            && t.antennas == first.antennas
            && t.users_served == first.users_served
            && t.is_open()
    });
    if !symmetric {
        return Err(AnalyticError::Precondition(
            "tiers differ in target, technique or access; the symmetric formula does not apply".into(),
        ));
    }
    ase_symmetric(config.alpha(), first.technique(), first.antennas, first.target_sir, config.total_density())
}

/// Exact ASE ratio of full SDMA on `m` antennas to SISO: `m C(alpha, 1) / C(alpha, m)`.
pub fn ase_ratio_exact(alpha: f64, m: u32) -> Result<f64, AnalyticError> {
    check_alpha(alpha)?;
    Ok(f64::from(m) * interference_constant(alpha, 1)?.value / interference_constant(alpha, m)?.value)
}

/// Large-`m` approximation of the ASE ratio: `Gamma(1 + delta) m^(1 - delta)`,
/// or `Gamma(1 + delta) m^(-delta)` when both systems serve the same user density.
pub fn ase_ratio_approx(alpha: f64, m: u32, same_user_density: bool) -> Result<f64, AnalyticError> {
    check_alpha(alpha)?;
    if m == 0 {
        return Err(DomainError::ZeroShape { function: "ase_ratio_approx" }.into());
    }
    let delta = 2.0 / alpha;
    let exponent = if same_user_density { -delta } else { 1.0 - delta };
    Ok(gamma(1.0 + delta)? * f64::from(m).powf(exponent))
}

/// Low-target limit of the ASE, where every allowed tier covers with
/// probability 1: `sum_k psi_k lambda_k log2(1 + beta_k)` over open tiers.
pub fn ase_low_sir_limit(config: &NetworkConfig) -> f64 {
    config
        .tiers
        .iter()
        .filter(|t| t.is_open())
        .map(|t| f64::from(t.psi()) * t.density * t.target_sir.ln_1p() / LN_2)
        .sum()
}
