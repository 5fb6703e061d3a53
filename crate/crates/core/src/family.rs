//! Exponential families with canonical link.
//!
//! The negative log-likelihood kernel is `l(θ, y) = b(θ) − θ y`, where `b`
//! is the cumulant (log-partition) function; `b′` is the mean and `b″` the
//! variance function. The dispersion parameter is not modelled.

use core::fmt;
use core::str::FromStr;

use crate::error::{contract, domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// `b(θ) = θ²/2`
    Gaussian,
    /// `b(θ) = log(1 + exp θ)`
    BinomialLogit,
    /// `b(θ) = exp θ`
    Poisson,
}

/// `b(θ)`, `b′(θ)`, `b″(θ)` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cumulant {
    pub b: f64,
    pub b1: f64,
    pub b2: f64,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Gaussian, Family::BinomialLogit, Family::Poisson];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::BinomialLogit => "binomial",
            Family::Poisson => "poisson",
        }
    }

    /// Cumulant and its first two derivatives. Only rejects non-finite `θ`.
    pub fn cumulant(self, theta: f64) -> Result<Cumulant> {
        if !theta.is_finite() {
            return Err(domain!("cumulant evaluated at non-finite theta {}", theta));
        }
        Ok(self.cumulant_unchecked(theta))
    }

    #[inline]
    pub(crate) fn cumulant_unchecked(self, theta: f64) -> Cumulant {
        match self {
            Family::Gaussian => Cumulant {
                b: 0.5 * theta * theta,
                b1: theta,
                b2: 1.0,
            },
            Family::BinomialLogit => {
                // e = exp(-|θ|) never overflows
                let e = libm::exp(-theta.abs());
                let b = theta.max(0.0) + libm::log1p(e);
                let b1 = if theta >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
                let b2 = e / ((1.0 + e) * (1.0 + e));
                Cumulant { b, b1, b2 }
            }
            Family::Poisson => {
                let e = libm::exp(theta);
                Cumulant { b: e, b1: e, b2: e }
            }
        }
    }

    #[inline]
    pub(crate) fn b(self, theta: f64) -> f64 {
        match self {
            Family::Gaussian => 0.5 * theta * theta,
            Family::BinomialLogit => theta.max(0.0) + libm::log1p(libm::exp(-theta.abs())),
            Family::Poisson => libm::exp(theta),
        }
    }

    /// The mean function `b′(θ)`.
    #[inline]
    pub fn mean(self, theta: f64) -> f64 {
        self.cumulant_unchecked(theta).b1
    }

    /// Canonical link `θ = (b′)⁻¹(μ)`, clamped so that boundary means give a
    /// finite starting value.
    pub(crate) fn link_clamped(self, mu: f64) -> f64 {
        match self {
            Family::Gaussian => mu,
            Family::BinomialLogit => {
                let m = mu.clamp(1e-6, 1.0 - 1e-6);
                libm::log(m / (1.0 - m))
            }
            Family::Poisson => libm::log(mu.max(1e-6)),
        }
    }

    /// Checks that every response value lies in the family's support.
    pub fn validate_response(self, y: &[f64]) -> Result<()> {
        let bad = match self {
            Family::Gaussian => y.iter().position(|v| !v.is_finite()),
            Family::BinomialLogit => y.iter().position(|&v| v != 0.0 && v != 1.0),
            Family::Poisson => y
                .iter()
                .position(|&v| !(v >= 0.0) || !v.is_finite() || libm::floor(v) != v),
        };
        match bad {
            Some(i) => Err(domain!(
                "response value {} at row {} is outside the {} support",
                y[i],
                i,
                self.name()
            )),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" | "linear" => Ok(Family::Gaussian),
            "binomial" | "binomial_logit" | "logistic" | "logit" => Ok(Family::BinomialLogit),
            "poisson" => Ok(Family::Poisson),
            other => Err(domain!("unknown family '{}'", other)),
        }
    }
}

/// Free-function form of [`Family::cumulant`].
pub fn cumulant(family: Family, theta: f64) -> Result<Cumulant> {
    family.cumulant(theta)
}

/// Mean negative log-likelihood `(1/n) Σ [b(ηᵢ) − ηᵢ yᵢ]`.
pub fn neg_loglik(family: Family, eta: &[f64], y: &[f64]) -> Result<f64> {
    if eta.len() != y.len() {
        return Err(contract!("eta has length {}, y has length {}", eta.len(), y.len()));
    }
    if eta.is_empty() {
        return Err(contract!("neg_loglik needs at least one observation"));
    }
    Ok(mean_nll(family, eta, y))
}

#[inline]
pub(crate) fn mean_nll(family: Family, eta: &[f64], y: &[f64]) -> f64 {
    let s: f64 = eta.iter().zip(y).map(|(&e, &v)| family.b(e) - e * v).sum();
    s / eta.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-15 * (1.0 + b.abs())
    }

    #[test]
    fn cumulant_table() {
        let c = cumulant(Family::Gaussian, 2.0).unwrap();
        assert_eq!((c.b, c.b1, c.b2), (2.0, 2.0, 1.0));

        let c = cumulant(Family::BinomialLogit, 0.0).unwrap();
        assert!(close(c.b, core::f64::consts::LN_2));
        assert_eq!((c.b1, c.b2), (0.5, 0.25));

        let c = cumulant(Family::Poisson, 1.0).unwrap();
        let e = core::f64::consts::E;
        assert!(close(c.b, e) && close(c.b1, e) && close(c.b2, e));
    }

    #[test]
    fn binomial_is_overflow_safe() {
        let c = cumulant(Family::BinomialLogit, 800.0).unwrap();
        assert_eq!(c.b, 800.0);
        assert_eq!(c.b1, 1.0);
        let c = cumulant(Family::BinomialLogit, -800.0).unwrap();
        assert_eq!(c.b, 0.0);
        assert_eq!(c.b1, 0.0);
        // moderately large arguments keep b'' strictly positive
        assert!(cumulant(Family::BinomialLogit, 40.0).unwrap().b2 > 0.0);
        assert!(cumulant(Family::BinomialLogit, -40.0).unwrap().b2 > 0.0);
    }

    #[test]
    fn non_finite_theta_is_domain_error() {
        for f in Family::ALL {
            assert!(matches!(f.cumulant(f64::NAN), Err(Error::Domain(_))));
            assert!(matches!(f.cumulant(f64::INFINITY), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn neg_loglik_examples() {
        assert_eq!(neg_loglik(Family::Gaussian, &[0.0, 0.0], &[1.0, -1.0]).unwrap(), 0.0);
        assert!(close(
            neg_loglik(Family::BinomialLogit, &[0.0], &[1.0]).unwrap(),
            core::f64::consts::LN_2
        ));
        assert_eq!(neg_loglik(Family::Gaussian, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), -1.25);
        assert!(neg_loglik(Family::Gaussian, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn response_support() {
        assert!(Family::BinomialLogit.validate_response(&[0.0, 1.0, 1.0]).is_ok());
        assert!(Family::BinomialLogit.validate_response(&[0.0, 2.0]).is_err());
        assert!(Family::Poisson.validate_response(&[0.0, 3.0]).is_ok());
        assert!(Family::Poisson.validate_response(&[-1.0]).is_err());
        assert!(Family::Poisson.validate_response(&[0.5]).is_err());
    }

    #[test]
    fn parse_names() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert!("gamma".parse::<Family>().is_err());
    }
}
