//! Diagonal-Gaussian action distributions and the KL diagnostics built on
//! their closed forms.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, shape_err, Error, Result};
use crate::numeric::{integrate_pieces, normal_pdf, LN_SQRT_2PI};

/// `N(mu, diag(sigma²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if mu.len() != sigma.len() || mu.is_empty() {
            return Err(shape_err(
                "DiagGaussian::new",
                format!("mu has {} entries, sigma has {}", mu.len(), sigma.len()),
            ));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("DiagGaussian mean"));
        }
        if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(invalid(format!("sigma entries must be finite and > 0, got {sigma:?}")));
        }
        Ok(Self { mu, sigma })
    }

    /// One-dimensional convenience constructor.
    pub fn scalar(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(vec![mu], vec![sigma])
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    fn check_len(&self, n: usize, op: &'static str) -> Result<()> {
        if n != self.dim() {
            return Err(shape_err(op, format!("expected length {}, got {n}", self.dim())));
        }
        Ok(())
    }

    /// Log-density at `action`.
    pub fn log_prob(&self, action: &[f64]) -> Result<f64> {
        self.check_len(action.len(), "log_prob")?;
        Ok(action
            .iter()
            .zip(&self.mu)
            .zip(&self.sigma)
            .map(|((a, m), s)| {
                let z = (a - m) / s;
                -s.ln() - LN_SQRT_2PI - 0.5 * z * z
            })
            .sum())
    }

    /// Reparameterized draw `mu + sigma ⊙ noise`.
    pub fn sample(&self, noise: &[f64]) -> Result<Vec<f64>> {
        self.check_len(noise.len(), "sample")?;
        Ok(self
            .mu
            .iter()
            .zip(&self.sigma)
            .zip(noise)
            .map(|((m, s), e)| m + s * e)
            .collect())
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let noise: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        self.sample(&noise).expect("noise length matches by construction")
    }
}

fn check_same_dim(p: &DiagGaussian, q: &DiagGaussian, op: &'static str) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(shape_err(op, format!("dimensions {} and {}", p.dim(), q.dim())));
    }
    Ok(())
}

/// `D_KL(p ‖ q)` summed over independent dimensions.
pub fn kl_closed_form(p: &DiagGaussian, q: &DiagGaussian) -> Result<f64> {
    check_same_dim(p, q, "kl_closed_form")?;
    Ok(p.mu
        .iter()
        .zip(&p.sigma)
        .zip(q.mu.iter().zip(&q.sigma))
        .map(|((mp, sp), (mq, sq))| {
            let d = mp - mq;
            (sq / sp).ln() + (sp * sp + d * d) / (2.0 * sq * sq) - 0.5
        })
        .sum())
}

/// Forward and reverse KL together with their difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlPair {
    /// `D_KL(p ‖ q)`.
    pub forward: f64,
    /// `D_KL(q ‖ p)`.
    pub reverse: f64,
    /// `forward - reverse`.
    pub asymmetry: f64,
}

pub fn kl_asymmetry(p: &DiagGaussian, q: &DiagGaussian) -> Result<KlPair> {
    let forward = kl_closed_form(p, q)?;
    let reverse = kl_closed_form(q, p)?;
    Ok(KlPair {
        forward,
        reverse,
        asymmetry: forward - reverse,
    })
}

/// The asymmetry difference written directly in terms of the parameters:
/// per dimension `ln(σq/σp)² + (σp² − σq²)[(μp − μq)² + σp² + σq²] / (2σp²σq²)`.
pub fn asymmetry_closed_form(p: &DiagGaussian, q: &DiagGaussian) -> Result<f64> {
    check_same_dim(p, q, "asymmetry_closed_form")?;
    Ok(p.mu
        .iter()
        .zip(&p.sigma)
        .zip(q.mu.iter().zip(&q.sigma))
        .map(|((mp, sp), (mq, sq))| {
            let (vp, vq) = (sp * sp, sq * sq);
            let d = mp - mq;
            2.0 * (sq / sp).ln() + (vp - vq) * (d * d + vp + vq) / (2.0 * vp * vq)
        })
        .sum())
}

/// Outcome of comparing squared total variation against KL.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinskerReport {
    pub tv: f64,
    pub kl: f64,
    pub tolerance: f64,
    pub holds: bool,
}

pub const PINSKER_MIN_SAMPLES: usize = 10_000;

/// Checks `tv² ≤ kl` with total variation estimated by quadrature (one
/// dimension) or by Monte Carlo (several dimensions). The check allows a
/// slack of `3/√samples` for Monte-Carlo error.
///
/// The Monte-Carlo estimate uses `E_p[(1 − q/p)⁺]`, which has the same mean
/// as `½ E_p |1 − q/p|` but a bounded integrand; the latter has infinite
/// variance once `σ_q > √2 σ_p` in some coordinate.
pub fn pinsker_check<R: Rng + ?Sized>(
    p: &DiagGaussian,
    q: &DiagGaussian,
    samples: usize,
    rng: &mut R,
) -> Result<PinskerReport> {
    check_same_dim(p, q, "pinsker_check")?;
    if samples < PINSKER_MIN_SAMPLES {
        return Err(invalid(format!("pinsker_check needs >= {PINSKER_MIN_SAMPLES} samples, got {samples}")));
    }
    let kl = kl_closed_form(p, q)?;
    let tv = if p.dim() == 1 {
        tv_quadrature_1d(p.mu[0], p.sigma[0], q.mu[0], q.sigma[0])
    } else {
        let mut acc = 0.0;
        for _ in 0..samples {
            let x = p.sample_with(rng);
            let log_ratio = q.log_prob(&x)? - p.log_prob(&x)?;
            acc += (1.0 - log_ratio.exp()).max(0.0);
        }
        acc / samples as f64
    };
    let tolerance = 3.0 / (samples as f64).sqrt();
    Ok(PinskerReport {
        tv,
        kl,
        tolerance,
        holds: tv * tv <= kl + tolerance,
    })
}

/// `½ ∫ |p − q|` for two univariate normals, split at the density crossings.
pub fn tv_quadrature_1d(mp: f64, sp: f64, mq: f64, sq: f64) -> f64 {
    if mp == mq && sp == sq {
        return 0.0;
    }
    let lo = (mp - 14.0 * sp).min(mq - 14.0 * sq);
    let hi = (mp + 14.0 * sp).max(mq + 14.0 * sq);
    // ln p − ln q = a x² + b x + c
    let a = 1.0 / (2.0 * sq * sq) - 1.0 / (2.0 * sp * sp);
    let b = mp / (sp * sp) - mq / (sq * sq);
    let c = mq * mq / (2.0 * sq * sq) - mp * mp / (2.0 * sp * sp) + (sq / sp).ln();
    let mut breaks = vec![lo, hi, mp, mq];
    if a.abs() > 1e-300 {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let r = disc.sqrt();
            breaks.push((-b + r) / (2.0 * a));
            breaks.push((-b - r) / (2.0 * a));
        }
    } else if b != 0.0 {
        breaks.push(-c / b);
    }
    breaks.retain(|x| x.is_finite() && *x >= lo && *x <= hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    0.5 * integrate_pieces(
        |x| (normal_pdf(x, mp, sp) - normal_pdf(x, mq, sq)).abs(),
        &breaks,
        1e-13,
        50,
    )
}

/// `min(β1, β2) · Σ_i [2 ln h_i + (1 − h_i⁴)/(2 h_i²)]`, the left side of the
/// KL-penalty inefficiency condition with `h_i = σ1_i / σ2_i`.
///
/// For equal means this equals `β · (D_KL(π2‖π1) − D_KL(π1‖π2))`.
pub fn theorem1_lower_bound(h: &[f64], beta1: f64, beta2: f64) -> Result<f64> {
    if h.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(invalid(format!("variance ratios must be positive, got {h:?}")));
    }
    if !(beta1 > 0.0 && beta2 > 0.0) {
        return Err(invalid("penalty coefficients must be positive"));
    }
    let sum: f64 = h
        .iter()
        .map(|&hi| {
            let h2 = hi * hi;
            2.0 * hi.ln() + (1.0 - h2 * h2) / (2.0 * h2)
        })
        .sum();
    Ok(beta1.min(beta2) * sum)
}

/// Side-by-side evaluation of the two KL-penalized surrogates for a pair of
/// policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderingReport {
    /// `L(π2|π1) = adv12 − β1 · D_KL(π1‖π2)`: moving from π1 to π2.
    pub surrogate_to_pi2: f64,
    /// `L(π1|π2) = adv21 − β2 · D_KL(π2‖π1)`: moving from π2 to π1.
    pub surrogate_to_pi1: f64,
    pub kl_12: f64,
    pub kl_21: f64,
    /// Left side of the inefficiency condition; `None` when a coefficient is
    /// zero (the condition is undefined without a penalty).
    pub lower_bound: Option<f64>,
    /// Whether `lower_bound > adv12 − adv21`.
    pub premise_holds: bool,
    /// The penalized surrogates rank the two policies opposite to their
    /// importance-weighted advantages.
    pub reversal: bool,
}

/// Evaluates both penalized surrogates and reports whether the penalty flips
/// the ordering implied by the advantage terms. Reports only; asserts
/// nothing.
pub fn surrogate_ordering_diagnostic(
    pi1: &DiagGaussian,
    pi2: &DiagGaussian,
    adv12: f64,
    adv21: f64,
    beta1: f64,
    beta2: f64,
) -> Result<OrderingReport> {
    let kl_12 = kl_closed_form(pi1, pi2)?;
    let kl_21 = kl_closed_form(pi2, pi1)?;
    let surrogate_to_pi2 = adv12 - beta1 * kl_12;
    let surrogate_to_pi1 = adv21 - beta2 * kl_21;
    let h: Vec<f64> = pi1.sigma.iter().zip(&pi2.sigma).map(|(a, b)| a / b).collect();
    let lower_bound = if beta1 > 0.0 && beta2 > 0.0 {
        Some(theorem1_lower_bound(&h, beta1, beta2)?)
    } else {
        None
    };
    let premise_holds = lower_bound.is_some_and(|lb| lb > adv12 - adv21);
    let reversal = (adv12 - adv21) * (surrogate_to_pi2 - surrogate_to_pi1) < 0.0;
    Ok(OrderingReport {
        surrogate_to_pi2,
        surrogate_to_pi1,
        kl_12,
        kl_21,
        lower_bound,
        premise_holds,
        reversal,
    })
}
