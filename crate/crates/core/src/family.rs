//! Exponential families for canonical-link GLMs.
//!
//! A family is identified by its log-partition function `a`: the loss of a
//! score `u` against a response `y` is `a(u) - y*u`, the conditional mean is
//! `a'(u)`, and the curvature `a''(u)` drives the IRLS weights. Dispersion is
//! fixed to 1 throughout; fitting and selection are invariant to a positive
//! affine rescaling of the loss.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Floor applied to IRLS weights so the inner linear system stays
/// nonsingular when logistic scores saturate.
pub const WEIGHT_FLOOR: f64 = 1e-10;

/// Poisson scores beyond this are rejected: e^50 is already far outside any
/// meaningful signal range at this scale.
pub const POISSON_SCORE_CAP: f64 = 50.0;

// Largest f64 below 1.0; sigmoid outputs are clamped into
// [MIN_POSITIVE, 1 - eps/2] so the mean stays in the open interval (0,1).
const ONE_MINUS_HALF_EPS: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Logistic,
    Poisson,
}

fn check_finite(name: &str, u: f64) -> Result<()> {
    if u.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {u}")))
    }
}

/// Numerically stable sigmoid, clamped into the open interval (0,1).
fn sigmoid(u: f64) -> f64 {
    let s = if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, ONE_MINUS_HALF_EPS)
}

impl Family {
    fn check_poisson_cap(self, u: f64) -> Result<()> {
        if self == Family::Poisson && u > POISSON_SCORE_CAP {
            return Err(Error::Domain(format!(
                "poisson score {u} exceeds cap {POISSON_SCORE_CAP}"
            )));
        }
        Ok(())
    }

    /// Log-partition function `a(u)`: u^2/2 (Gaussian), log(1+e^u)
    /// (Logistic, branch-stable), e^u (Poisson).
    pub fn log_partition(self, u: f64) -> Result<f64> {
        check_finite("score", u)?;
        self.check_poisson_cap(u)?;
        Ok(match self {
            Family::Gaussian => 0.5 * u * u,
            // For u > 0 use u + log(1+e^-u) to avoid overflow in e^u.
            Family::Logistic => {
                if u > 0.0 {
                    u + (-u).exp().ln_1p()
                } else {
                    u.exp().ln_1p()
                }
            }
            Family::Poisson => u.exp(),
        })
    }

    /// Canonical mean map `a'(u)`; the logistic branch returns values in the
    /// open interval (0,1).
    pub fn mean(self, u: f64) -> Result<f64> {
        check_finite("score", u)?;
        self.check_poisson_cap(u)?;
        Ok(match self {
            Family::Gaussian => u,
            Family::Logistic => sigmoid(u),
            Family::Poisson => u.exp(),
        })
    }

    /// Curvature `a''(u)`; strictly positive for all finite scores.
    pub fn variance(self, u: f64) -> Result<f64> {
        check_finite("score", u)?;
        self.check_poisson_cap(u)?;
        Ok(match self {
            Family::Gaussian => 1.0,
            Family::Logistic => {
                let s = sigmoid(u);
                (s * (1.0 - s)).max(f64::MIN_POSITIVE)
            }
            Family::Poisson => u.exp().max(f64::MIN_POSITIVE),
        })
    }

    /// Bregman divergence `D_a(u, v) = a(u) - a(v) - a'(v)(u - v)`.
    ///
    /// Nonnegative, zero iff `u == v`. Each family uses an algebraically
    /// equal form that avoids the cancellation of the three-term expression
    /// when `u` and `v` are close: Gaussian reduces to `(u - v)^2 / 2`,
    /// Poisson factors as `e^v (expm1(d) - d)`, and the logistic branch
    /// switches to midpoint curvature `a''(v + d/2) d^2 / 2` for tiny gaps.
    pub fn bregman(self, u: f64, v: f64) -> Result<f64> {
        check_finite("first argument", u)?;
        check_finite("second argument", v)?;
        let d = u - v;
        match self {
            Family::Gaussian => Ok(0.5 * d * d),
            Family::Poisson => {
                self.check_poisson_cap(u)?;
                self.check_poisson_cap(v)?;
                Ok(v.exp() * (d.exp_m1() - d))
            }
            Family::Logistic => {
                if d.abs() <= 1e-5 {
                    Ok(0.5 * d * d * self.variance(v + 0.5 * d)?)
                } else {
                    Ok(self.log_partition(u)? - self.log_partition(v)? - self.mean(v)? * d)
                }
            }
        }
    }

    /// IRLS weight and pseudo-response at linear score `eta` for response `y`.
    ///
    /// With the canonical link the weight is `a''(eta)` and the pseudo-response
    /// is `eta + (y - a'(eta)) / a''(eta)`. Both the returned weight and the
    /// denominator are floored at [`WEIGHT_FLOOR`] so saturated scores stay
    /// finite.
    pub fn irls_step_terms(self, eta: f64, y: f64) -> Result<(f64, f64)> {
        check_finite("score", eta)?;
        self.validate_response(y)?;
        Ok(match self {
            // a'' = 1 and a'(eta) = eta, so the pseudo-response is y itself.
            Family::Gaussian => (1.0, y),
            Family::Logistic => {
                let mu = sigmoid(eta);
                let w = (mu * (1.0 - mu)).max(WEIGHT_FLOOR);
                (w, eta + (y - mu) / w)
            }
            Family::Poisson => {
                self.check_poisson_cap(eta)?;
                let mu = eta.exp();
                let w = mu.max(WEIGHT_FLOOR);
                (w, eta + (y - mu) / w)
            }
        })
    }

    /// Checks that `y` lies in the family's response range. Logistic accepts
    /// soft labels in [0,1].
    pub fn validate_response(self, y: f64) -> Result<()> {
        check_finite("response", y)?;
        match self {
            Family::Gaussian => Ok(()),
            Family::Logistic => {
                if (0.0..=1.0).contains(&y) {
                    Ok(())
                } else {
                    Err(Error::Domain(format!(
                        "logistic response {y} outside [0,1]"
                    )))
                }
            }
            Family::Poisson => {
                if y >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::Domain(format!("poisson response {y} is negative")))
                }
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Gaussian => "gaussian",
            Family::Logistic => "logistic",
            Family::Poisson => "poisson",
        };
        f.write_str(s)
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Family::Gaussian),
            "logistic" => Ok(Family::Logistic),
            "poisson" => Ok(Family::Poisson),
            other => Err(Error::Domain(format!("unknown family '{other}'"))),
        }
    }
}
