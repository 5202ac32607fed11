//! Special-function kernels: log-Gamma, Beta, the interference constant
//! `C(alpha, psi)`, the CDF of a ratio of Gamma variables and the integer-shape
//! Gamma tail.
//!
//! Every function here is pure and works on `f64`. Shape parameters are
//! integers throughout; non-integer shapes are not supported.

use std::f64::consts::PI;

use thiserror::Error;

/// Argument outside the domain of a special function.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("{function}: argument {value} must be positive")]
    NonPositive { function: &'static str, value: f64 },
    #[error("{function}: argument {value} must be non-negative")]
    Negative { function: &'static str, value: f64 },
    #[error("{function}: path-loss exponent {alpha} must exceed 2")]
    PathLossExponent { function: &'static str, alpha: f64 },
    #[error("{function}: shape parameter must be at least 1")]
    ZeroShape { function: &'static str },
}

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x).
        return (PI / (PI * x).sin()).ln() - ln_gamma_unchecked(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + LANCZOS_G + 0.5;
    let series =
        LANCZOS_COEF[1..].iter().enumerate().fold(LANCZOS_COEF[0], |acc, (i, c)| acc + c / (x + (i + 1) as f64));
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + series.ln()
}

/// Natural logarithm of the Gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64, DomainError> {
    if x.is_nan() || x <= 0.0 {
        return Err(DomainError::NonPositive { function: "log_gamma", value: x });
    }
    Ok(ln_gamma_unchecked(x))
}

/// Gamma function for `x > 0`, evaluated as `exp(log_gamma(x))`.
pub fn gamma(x: f64) -> Result<f64, DomainError> {
    log_gamma(x).map(f64::exp)
}

/// Euler's Beta function `B(x, y) = Gamma(x) Gamma(y) / Gamma(x + y)`.
///
/// Evaluated through log-Gamma differences so large arguments do not overflow.
pub fn beta(x: f64, y: f64) -> Result<f64, DomainError> {
    for value in [x, y] {
        if value.is_nan() || value <= 0.0 {
            return Err(DomainError::NonPositive { function: "beta", value });
        }
    }
    Ok((ln_gamma_unchecked(x) + ln_gamma_unchecked(y) - ln_gamma_unchecked(x + y)).exp())
}

/// `C(alpha, psi)`: the per-tier constant in the exponent of the interference
/// Laplace transform when interferers carry `Gamma(psi, 1)` channel powers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceConstant {
    pub alpha: f64,
    pub psi: u32,
    pub value: f64,
}

fn check_alpha(function: &'static str, alpha: f64) -> Result<(), DomainError> {
    if alpha.is_nan() || alpha <= 2.0 {
        Err(DomainError::PathLossExponent { function, alpha })
    } else {
        Ok(())
    }
}

/// `C(alpha, psi) = (2 pi / alpha) sum_{m=1}^{psi} binom(psi, m) B(psi - m + 2/alpha, m - 2/alpha)`.
pub fn interference_constant(alpha: f64, psi: u32) -> Result<InterferenceConstant, DomainError> {
    check_alpha("interference_constant", alpha)?;
    if psi == 0 {
        return Err(DomainError::ZeroShape { function: "interference_constant" });
    }
    let delta = 2.0 / alpha;
    let n = f64::from(psi);
    let mut binom = 1.0;
    let mut sum = 0.0;
    for m in 1..=psi {
        let m = f64::from(m);
        binom *= (n - m + 1.0) / m;
        sum += binom * beta(n - m + delta, m - delta)?;
    }
    Ok(InterferenceConstant { alpha, psi, value: 2.0 * PI / alpha * sum })
}

/// Closed form of `C(alpha, 1)`: `2 pi^2 csc(2 pi / alpha) / alpha`.
pub fn interference_constant_siso(alpha: f64) -> Result<f64, DomainError> {
    check_alpha("interference_constant_siso", alpha)?;
    Ok(2.0 * PI * PI / ((2.0 * PI / alpha).sin() * alpha))
}

/// Large-`psi` limit of `C(alpha, psi) / psi^(2/alpha)`, equal to `pi Gamma(1 - 2/alpha)`.
pub fn interference_constant_limit(alpha: f64) -> Result<f64, DomainError> {
    check_alpha("interference_constant_limit", alpha)?;
    Ok(PI * ln_gamma_unchecked(1.0 - 2.0 / alpha).exp())
}

/// Shapes `(k, m)` of the ratio `Z = X1 / X2` with `X1 ~ Gamma(k, 1)` and
/// `X2 ~ Gamma(m, 1)` independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GammaRatioParams {
    k: u32,
    m: u32,
}

impl GammaRatioParams {
    pub fn new(k: u32, m: u32) -> Result<Self, DomainError> {
        if k == 0 || m == 0 {
            return Err(DomainError::ZeroShape { function: "GammaRatioParams::new" });
        }
        Ok(Self { k, m })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn m(&self) -> u32 {
        self.m
    }
}

/// `P(Z > z)`, the sum that the CDF subtracts from one.
///
/// Terms are accumulated from `i = 0` with the ratio `Gamma(m+i)/Gamma(1+i)`
/// advanced by `(m + i - 1) / i` at each step.
pub fn gamma_ratio_ccdf(params: GammaRatioParams, z: f64) -> Result<f64, DomainError> {
    if z.is_nan() || z < 0.0 {
        return Err(DomainError::Negative { function: "gamma_ratio_ccdf", value: z });
    }
    if z.is_infinite() {
        return Ok(0.0);
    }
    let m = f64::from(params.m);
    let q = z / (z + 1.0);
    let mut term = (-m * z.ln_1p()).exp();
    let mut sum = term;
    for i in 1..params.k {
        let i = f64::from(i);
        term *= (m + i - 1.0) / i * q;
        sum += term;
    }
    Ok(sum.min(1.0))
}

/// CDF of `Z_{k,m}`:
/// `1 - (1/Gamma(m)) sum_{i<k} Gamma(m+i)/Gamma(1+i) z^i / (z+1)^(m+i)`.
pub fn gamma_ratio_cdf(params: GammaRatioParams, z: f64) -> Result<f64, DomainError> {
    if z.is_nan() || z < 0.0 {
        return Err(DomainError::Negative { function: "gamma_ratio_cdf", value: z });
    }
    Ok(1.0 - gamma_ratio_ccdf(params, z)?)
}

/// `P(h > z)` for `h ~ Gamma(delta, 1)` with integer `delta`:
/// `exp(-z) sum_{i<delta} z^i / i!`.
pub fn gamma_ccdf_integer_shape(delta: u32, z: f64) -> Result<f64, DomainError> {
    if delta == 0 {
        return Err(DomainError::ZeroShape { function: "gamma_ccdf_integer_shape" });
    }
    if z.is_nan() || z < 0.0 {
        return Err(DomainError::Negative { function: "gamma_ccdf_integer_shape", value: z });
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..delta {
        term *= z / f64::from(i);
        sum += term;
    }
    Ok((-z).exp() * sum)
}
