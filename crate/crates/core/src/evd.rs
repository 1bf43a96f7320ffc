//! Type I extreme value (Gumbel) distribution for maxima and minima.
//!
//! `Max` has density `exp(-z - exp(-z)) / sigma` with `z = (y - mu) / sigma`;
//! `Min` is its mirror image: `y ~ Min(mu, sigma)` iff `-y ~ Max(-mu, sigma)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::EULER;

/// Which extreme the distribution describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Max,
    Min,
}

impl Tail {
    pub fn flipped(self) -> Tail {
        match self {
            Tail::Max => Tail::Min,
            Tail::Min => Tail::Max,
        }
    }

    /// +1 for `Max`, -1 for `Min`.
    pub fn sign(self) -> f64 {
        match self {
            Tail::Max => 1.0,
            Tail::Min => -1.0,
        }
    }
}

impl std::str::FromStr for Tail {
    type Err = Error;

    fn from_str(s: &str) -> Result<Tail> {
        match s.trim().to_ascii_lowercase().as_str() {
            "max" => Ok(Tail::Max),
            "min" => Ok(Tail::Min),
            other => Err(Error::Domain(format!("unknown tail '{other}' (expected max or min)"))),
        }
    }
}

/// Smallest and largest uniform values fed to the quantile function when
/// sampling. Values outside saturate to the corresponding bound.
const U_LO: f64 = 1e-300;
const U_HI: f64 = 1.0 - 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GumbelParams {
    mu: f64,
    sigma: f64,
    tail: Tail,
}

impl GumbelParams {
    pub fn new(mu: f64, sigma: f64, tail: Tail) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::Domain(format!("location must be finite, got {mu}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!("dispersion must be positive and finite, got {sigma}")));
        }
        Ok(Self { mu, sigma, tail })
    }

    pub fn max(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(mu, sigma, Tail::Max)
    }

    pub fn min(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(mu, sigma, Tail::Min)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    /// `(mu, sigma, Max) <-> (-mu, sigma, Min)`.
    pub fn reflect(&self) -> GumbelParams {
        GumbelParams { mu: -self.mu, sigma: self.sigma, tail: self.tail.flipped() }
    }

    pub fn log_density(&self, y: f64) -> Result<f64> {
        check_finite(y)?;
        let z = (y - self.mu) / self.sigma;
        Ok(match self.tail {
            Tail::Max => -self.sigma.ln() - z - (-z).exp(),
            Tail::Min => -self.sigma.ln() + z - z.exp(),
        })
    }

    pub fn density(&self, y: f64) -> Result<f64> {
        self.log_density(y).map(f64::exp)
    }

    pub fn cdf(&self, y: f64) -> Result<f64> {
        check_finite(y)?;
        let z = (y - self.mu) / self.sigma;
        Ok(match self.tail {
            Tail::Max => (-(-z).exp()).exp(),
            Tail::Min => -(-z.exp()).exp_m1(),
        })
    }

    /// Inverse CDF. `u` must lie in the open unit interval.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("quantile level must be in (0, 1), got {u}")));
        }
        Ok(self.quantile_saturating(u))
    }

    fn quantile_saturating(&self, u: f64) -> f64 {
        let u = u.clamp(U_LO, U_HI);
        match self.tail {
            Tail::Max => self.mu - self.sigma * (-u.ln()).ln(),
            // mirror of the Max quantile at 1 - u
            Tail::Min => self.mu + self.sigma * (-(-u).ln_1p()).ln(),
        }
    }

    /// One draw by inversion; consumes exactly one uniform from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.quantile_saturating(u)
    }

    pub fn mean(&self) -> f64 {
        self.mu + self.tail.sign() * EULER * self.sigma
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma * std::f64::consts::PI.powi(2) / 6.0
    }
}

fn check_finite(y: f64) -> Result<()> {
    if y.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("observation must be finite, got {y}")))
    }
}

/// Free-function form of [`GumbelParams::log_density`].
pub fn log_density(y: f64, p: &GumbelParams) -> Result<f64> {
    p.log_density(y)
}

pub fn cdf(y: f64, p: &GumbelParams) -> Result<f64> {
    p.cdf(y)
}

pub fn quantile(u: f64, p: &GumbelParams) -> Result<f64> {
    p.quantile(u)
}

pub fn reflect(p: &GumbelParams) -> GumbelParams {
    p.reflect()
}
