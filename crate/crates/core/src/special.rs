//! Gamma-family special values used by the information matrices and by
//! Skovgaard's covariance approximations.

/// Euler–Mascheroni constant.
pub const EULER: f64 = 0.577_215_664_901_532_9;

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

pub fn digamma(x: f64) -> f64 {
    statrs::function::gamma::digamma(x)
}

/// Trigamma `psi'(x)` for `x > 0`: upward recurrence to `x >= 15`, then the
/// asymptotic series.
pub fn trigamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 15.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let r = 1.0 / x;
    let r2 = r * r;
    // B2/x^3 + B4/x^5 + ... with Bernoulli numbers
    let series = r2 * (1.0 / 6.0 - r2 * (1.0 / 30.0 - r2 * (1.0 / 42.0 - r2 * (1.0 / 30.0 - r2 * 5.0 / 66.0))));
    acc + r + 0.5 * r2 + r * series
}

/// First derivative of the gamma function, `Gamma(x) psi(x)`.
pub fn gamma1(x: f64) -> f64 {
    gamma(x) * digamma(x)
}

/// Second derivative of the gamma function, `Gamma(x) (psi(x)^2 + psi'(x))`.
pub fn gamma2(x: f64) -> f64 {
    let p = digamma(x);
    gamma(x) * (p * p + trigamma(x))
}
