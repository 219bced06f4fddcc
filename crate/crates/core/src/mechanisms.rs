//! Biased multiplicative noise mechanisms.
//!
//! A released e-value is multiplied by `exp(-xi)`. Validity of the release as
//! an e-value requires `E[exp(-xi)] <= 1`, which forces the noise to carry a
//! strictly positive mean — the "bias" — on top of the spread that buys
//! privacy. Two families are supported:
//!
//! * **Biased Gaussian.** `xi ~ N(mu, sigma^2)` with
//!   `sigma^2 = alpha Delta^2 / (2 eps)` and `mu = sigma^2 / 2` achieves
//!   `(alpha, eps)`-RDP for a statistic with log-sensitivity `Delta` and makes
//!   `E[exp(-xi)] = exp(-mu + sigma^2/2) = 1` exactly. Defined for every
//!   budget.
//! * **Biased Laplace.** `xi ~ Laplace(mu, b)` with
//!   `b = 1 / h_alpha^{-1}((2 alpha - 1) e^{(alpha-1) eps})` and
//!   `mu = -log(1 - b^2)`. The moment `E[exp(-xi)] = e^{-mu} / (1 - b^2)`
//!   only exists for `b < 1`, so the mechanism is **undefined** whenever the
//!   calibration yields `b >= 1` — a value-level outcome, not an error.
//!
//! Zero sensitivity short-circuits to the [`NoiseSpec::Identity`] spec: a
//! statistic that does not depend on any individual needs no noise.

use crate::error::{require, Error, Result};
use crate::privacy::{ApproxDPBudget, LogSensitivity, PrivacyBudget, RenyiBudget};
use rand::Rng;

/// Tolerance on the validity check `E[exp(-xi)] <= 1`; calibrated specs hit
/// the bound exactly and only float rounding can push them past it.
pub const VALIDITY_TOLERANCE: f64 = 1e-12;

/// Relative tolerance of the bisection behind [`invert_h_alpha`].
pub const INVERSION_TOLERANCE: f64 = 1e-12;

/// Gaussian noise parameters on the log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianNoiseSpec {
    mean: f64,
    variance: f64,
}

impl GaussianNoiseSpec {
    /// Builds a spec and enforces the e-value validity bound
    /// `mean >= variance / 2`.
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        let spec = GaussianNoiseSpec::raw(mean, variance)?;
        if spec.mean < spec.variance / 2.0 {
            return Err(Error::InvalidSpec {
                mean: spec.mean,
                min_mean: spec.variance / 2.0,
            });
        }
        Ok(spec)
    }

    /// Builds a spec without the validity bound, e.g. the zero-bias variants
    /// used as negative controls. Positivity and finiteness still hold.
    pub fn raw(mean: f64, variance: f64) -> Result<Self> {
        require(mean.is_finite(), "mean", "finite", mean)?;
        require(
            variance.is_finite() && variance > 0.0,
            "variance",
            "finite and > 0",
            variance,
        )?;
        Ok(GaussianNoiseSpec { mean, variance })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Laplace noise parameters on the log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceNoiseSpec {
    mean: f64,
    scale: f64,
}

impl LaplaceNoiseSpec {
    /// Builds a spec and enforces `scale < 1` together with the validity
    /// bound `mean >= -log(1 - scale^2)`.
    pub fn new(mean: f64, scale: f64) -> Result<Self> {
        let spec = LaplaceNoiseSpec::raw(mean, scale)?;
        if spec.scale >= 1.0 {
            return Err(Error::MgfUndefined { scale: spec.scale });
        }
        let min_mean = -(-spec.scale * spec.scale).ln_1p();
        if spec.mean < min_mean {
            return Err(Error::InvalidSpec {
                mean: spec.mean,
                min_mean,
            });
        }
        Ok(spec)
    }

    /// Builds a spec without the validity bound (any positive scale), for
    /// negative controls and for exercising the MGF error path.
    pub fn raw(mean: f64, scale: f64) -> Result<Self> {
        require(mean.is_finite(), "mean", "finite", mean)?;
        require(
            scale.is_finite() && scale > 0.0,
            "scale",
            "finite and > 0",
            scale,
        )?;
        Ok(LaplaceNoiseSpec { mean, scale })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// The noise distribution attached to a release.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    Gaussian(GaussianNoiseSpec),
    Laplace(LaplaceNoiseSpec),
    /// No noise: the non-private baseline, and the calibration result for
    /// statistics with zero log-sensitivity.
    Identity,
}

impl NoiseSpec {
    /// Expected value of the noise, i.e. the bias.
    pub fn mean(&self) -> f64 {
        match self {
            NoiseSpec::Gaussian(g) => g.mean,
            NoiseSpec::Laplace(l) => l.mean,
            NoiseSpec::Identity => 0.0,
        }
    }

    /// Draws one noise value. Deterministic given the RNG state, so replaying
    /// a seeded stream replays the noise.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSpec::Gaussian(g) => {
                // Box-Muller transform of two uniforms; u1 is kept away from
                // zero so the logarithm stays finite.
                let u1: f64 = 1.0 - rng.gen::<f64>();
                let u2: f64 = rng.gen();
                let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                g.mean + g.variance.sqrt() * z
            }
            NoiseSpec::Laplace(l) => {
                // Inverse CDF of the standard Laplace, shifted and scaled.
                loop {
                    let u: f64 = rng.gen::<f64>() - 0.5;
                    let t = 1.0 - 2.0 * u.abs();
                    if t > 0.0 {
                        return l.mean - l.scale * u.signum() * t.ln();
                    }
                }
            }
            NoiseSpec::Identity => 0.0,
        }
    }

    /// `E[exp(-xi)]`, the quantity that must stay at or below one for the
    /// noised release to remain an e-value. Undefined for Laplace noise with
    /// scale >= 1, where the expectation diverges.
    pub fn mgf_at_minus_one(&self) -> Result<f64> {
        match self {
            NoiseSpec::Gaussian(g) => Ok((-g.mean + g.variance / 2.0).exp()),
            NoiseSpec::Laplace(l) => {
                if l.scale >= 1.0 {
                    return Err(Error::MgfUndefined { scale: l.scale });
                }
                Ok((-l.mean).exp() / (1.0 - l.scale * l.scale))
            }
            NoiseSpec::Identity => Ok(1.0),
        }
    }

    /// Whether the spec satisfies the e-value validity bound.
    pub fn is_valid(&self) -> bool {
        matches!(self.mgf_at_minus_one(), Ok(m) if m <= 1.0 + VALIDITY_TOLERANCE)
    }

    /// Expected per-observation loss of log growth incurred by privatizing an
    /// e-value built from `n` observations: `E[xi] / n`.
    pub fn growth_penalty(&self, n: u64) -> Result<f64> {
        require(n >= 1, "n", "a positive integer", n as f64)?;
        Ok(self.mean() / n as f64)
    }

    /// The same spread with the bias removed — an invalid spec by
    /// construction, used as a negative control to demonstrate that the bias
    /// is what preserves e-value validity.
    pub fn zero_bias(&self) -> NoiseSpec {
        match self {
            NoiseSpec::Gaussian(g) => {
                NoiseSpec::Gaussian(GaussianNoiseSpec::raw(0.0, g.variance).expect("variance already validated"))
            }
            NoiseSpec::Laplace(l) => {
                NoiseSpec::Laplace(LaplaceNoiseSpec::raw(0.0, l.scale).expect("scale already validated"))
            }
            NoiseSpec::Identity => NoiseSpec::Identity,
        }
    }
}

/// User-facing mechanism selector shared by the confidence, monitor, and
/// conformal procedures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MechanismKind {
    Gaussian,
    Laplace,
    /// No noise: the non-private reference lane.
    Identity,
}

impl MechanismKind {
    /// Calibrates this mechanism for a statistic with log-sensitivity `sens`
    /// at the Rényi budget. Laplace budgets without a valid scale produce
    /// [`Error::LaplaceUndefined`], whose message points at the Gaussian
    /// fallback.
    pub fn calibrate_rdp(
        &self,
        sens: LogSensitivity,
        budget: RenyiBudget,
    ) -> Result<CalibratedNoise> {
        match self {
            MechanismKind::Gaussian => Ok(calibrate_gaussian_rdp(sens, budget)),
            MechanismKind::Laplace => {
                calibrate_laplace_rdp(sens, budget).ok_or(Error::LaplaceUndefined {
                    alpha: budget.alpha(),
                    epsilon: budget.epsilon(),
                    sensitivity: sens.get(),
                })
            }
            MechanismKind::Identity => Ok(CalibratedNoise {
                spec: NoiseSpec::Identity,
                budget: PrivacyBudget::Renyi(budget),
            }),
        }
    }
}

impl std::str::FromStr for MechanismKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gaussian" => Ok(MechanismKind::Gaussian),
            "laplace" => Ok(MechanismKind::Laplace),
            "identity" => Ok(MechanismKind::Identity),
            other => Err(format!(
                "unknown mechanism {other:?} (expected gaussian, laplace, or identity)"
            )),
        }
    }
}

impl std::fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MechanismKind::Gaussian => "gaussian",
            MechanismKind::Laplace => "laplace",
            MechanismKind::Identity => "identity",
        })
    }
}

/// A noise spec paired with the privacy budget its calibration promises.
/// Privatization consumes these rather than bare specs so every released
/// value carries its guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibratedNoise {
    spec: NoiseSpec,
    budget: PrivacyBudget,
}

impl CalibratedNoise {
    /// Pairs a spec with a budget after re-checking the validity bound, for
    /// callers that construct specs by hand.
    pub fn new(spec: NoiseSpec, budget: PrivacyBudget) -> Result<Self> {
        let mgf = spec.mgf_at_minus_one()?;
        if mgf > 1.0 + VALIDITY_TOLERANCE {
            let (mean, min_mean) = match spec {
                NoiseSpec::Gaussian(g) => (g.mean, g.variance / 2.0),
                NoiseSpec::Laplace(l) => (l.mean, -(-l.scale * l.scale).ln_1p()),
                NoiseSpec::Identity => unreachable!("identity MGF is one"),
            };
            return Err(Error::InvalidSpec { mean, min_mean });
        }
        Ok(CalibratedNoise { spec, budget })
    }

    pub fn spec(&self) -> NoiseSpec {
        self.spec
    }

    pub fn budget(&self) -> PrivacyBudget {
        self.budget
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.spec.sample(rng)
    }
}

/// Calibrates biased Gaussian noise for `(alpha, eps)`-RDP at log-sensitivity
/// `Delta`: `sigma^2 = alpha Delta^2 / (2 eps)`, `mu = sigma^2 / 2`. Zero
/// sensitivity yields the identity spec.
pub fn calibrate_gaussian_rdp(sens: LogSensitivity, budget: RenyiBudget) -> CalibratedNoise {
    let budget_tag = PrivacyBudget::Renyi(budget);
    if sens.get() == 0.0 {
        return CalibratedNoise {
            spec: NoiseSpec::Identity,
            budget: budget_tag,
        };
    }
    let variance = budget.alpha() * sens.get() * sens.get() / (2.0 * budget.epsilon());
    // mean = variance / 2 exactly, so the MGF sits at one to the last bit.
    let spec = GaussianNoiseSpec {
        mean: variance / 2.0,
        variance,
    };
    CalibratedNoise {
        spec: NoiseSpec::Gaussian(spec),
        budget: budget_tag,
    }
}

/// The strictly increasing function whose inverse calibrates the biased
/// Laplace scale:
///
/// ```text
/// h_alpha(t) = alpha e^{(alpha-1) Delta t} + (alpha - 1) e^{-alpha Delta t}
/// ```
///
/// with `h_alpha(0) = 2 alpha - 1`.
pub fn h_alpha(t: f64, sens: f64, alpha: f64) -> Result<f64> {
    require(t.is_finite() && t >= 0.0, "t", "finite and >= 0", t)?;
    require(sens.is_finite() && sens > 0.0, "sens", "finite and > 0", sens)?;
    require(
        alpha.is_finite() && alpha > 1.0,
        "alpha",
        "finite and > 1",
        alpha,
    )?;
    Ok(alpha * ((alpha - 1.0) * sens * t).exp() + (alpha - 1.0) * (-alpha * sens * t).exp())
}

/// Inverts [`h_alpha`] on `t >= 0` by bisection: the bracket doubles upward
/// from one until it straddles the target, then halves down to relative width
/// [`INVERSION_TOLERANCE`].
pub fn invert_h_alpha(target: f64, sens: f64, alpha: f64) -> Result<f64> {
    let minimum = h_alpha(0.0, sens, alpha)?;
    require(target.is_finite(), "target", "finite", target)?;
    if target < minimum {
        return Err(Error::TargetBelowRange { target, minimum });
    }
    if target == minimum {
        return Ok(0.0);
    }
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while h_alpha(hi, sens, alpha)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e18 {
            // h_alpha grows exponentially; reaching this bracket means the
            // target was astronomically large yet still finite.
            break;
        }
    }
    while hi - lo > INVERSION_TOLERANCE * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if h_alpha(mid, sens, alpha)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Calibrates biased Laplace noise for `(alpha, eps)`-RDP at log-sensitivity
/// `Delta`, returning `None` when the mechanism is undefined (the calibrated
/// scale would reach 1 and the validity bias would have to be infinite).
///
/// The scale solves `h_alpha(1/b) = (2 alpha - 1) e^{(alpha-1) eps}` and the
/// bias is `mu = -log(1 - b^2)`. Zero sensitivity yields the identity spec.
pub fn calibrate_laplace_rdp(
    sens: LogSensitivity,
    budget: RenyiBudget,
) -> Option<CalibratedNoise> {
    let budget_tag = PrivacyBudget::Renyi(budget);
    if sens.get() == 0.0 {
        return Some(CalibratedNoise {
            spec: NoiseSpec::Identity,
            budget: budget_tag,
        });
    }
    let alpha = budget.alpha();
    // Work with log(target) to keep large (alpha - 1) eps in range: defined
    // iff log target > log h_alpha(1).
    let log_target = (2.0 * alpha - 1.0).ln() + (alpha - 1.0) * budget.epsilon();
    let log_h_at_one = crate::numeric::log_add_exp(
        alpha.ln() + (alpha - 1.0) * sens.get(),
        (alpha - 1.0).ln() - alpha * sens.get(),
    );
    if log_target <= log_h_at_one {
        return None;
    }
    let target = log_target.exp();
    let t = invert_h_alpha(target, sens.get(), alpha).expect("target above h_alpha(0) by construction");
    let scale = 1.0 / t;
    let mean = -(-scale * scale).ln_1p();
    Some(CalibratedNoise {
        spec: NoiseSpec::Laplace(LaplaceNoiseSpec { mean, scale }),
        budget: budget_tag,
    })
}

/// Calibrates biased Gaussian noise for `(eps, delta)`-approximate DP:
/// `sigma^2 = 2 log(1.25/delta) Delta^2 / eps^2`, `mu = sigma^2 / 2`.
/// Requires `delta > 0`; zero sensitivity yields the identity spec.
pub fn calibrate_gaussian_approx_dp(
    sens: LogSensitivity,
    budget: ApproxDPBudget,
) -> Result<CalibratedNoise> {
    require(
        budget.delta() > 0.0,
        "delta",
        "strictly positive for the Gaussian mechanism",
        budget.delta(),
    )?;
    let budget_tag = PrivacyBudget::Approx(budget);
    if sens.get() == 0.0 {
        return Ok(CalibratedNoise {
            spec: NoiseSpec::Identity,
            budget: budget_tag,
        });
    }
    let c2 = 2.0 * (1.25 / budget.delta()).ln();
    let variance = c2 * sens.get() * sens.get() / (budget.epsilon() * budget.epsilon());
    let spec = GaussianNoiseSpec {
        mean: variance / 2.0,
        variance,
    };
    Ok(CalibratedNoise {
        spec: NoiseSpec::Gaussian(spec),
        budget: budget_tag,
    })
}

/// Calibrates biased Laplace noise for pure `eps`-DP: scale `b = Delta / eps`
/// and bias `mu = -log(1 - b^2)`, which requires `eps > Delta` so that
/// `b < 1`. Zero sensitivity yields the identity spec.
pub fn calibrate_laplace_pure_dp(sens: LogSensitivity, epsilon: f64) -> Result<CalibratedNoise> {
    require(
        epsilon.is_finite() && epsilon > 0.0,
        "epsilon",
        "finite and > 0",
        epsilon,
    )?;
    if sens.get() == 0.0 {
        return Ok(CalibratedNoise {
            spec: NoiseSpec::Identity,
            budget: PrivacyBudget::Approx(ApproxDPBudget::new(epsilon, 0.0)?),
        });
    }
    if epsilon <= sens.get() {
        return Err(Error::PureDpUndefined {
            epsilon,
            sensitivity: sens.get(),
        });
    }
    let scale = sens.get() / epsilon;
    let mean = -(-scale * scale).ln_1p();
    Ok(CalibratedNoise {
        spec: NoiseSpec::Laplace(LaplaceNoiseSpec { mean, scale }),
        budget: PrivacyBudget::Approx(ApproxDPBudget::new(epsilon, 0.0)?),
    })
}
