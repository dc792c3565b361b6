//! Kernels, correntropy and the correntropy induced metric (CIM).
//!
//! Every kernel is a function of the Euclidean norm `r = ‖x − y‖` of the
//! difference between paired samples. Compact-support families are truncated
//! at zero from below so that all six kernels are nonnegative.

use std::fmt;
use std::str::FromStr;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{invalid, shape_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Epanechnikov,
    Biweight,
    Triangular,
    Laplace,
    Gaussian,
    Rectangular,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 6] = [
        KernelFamily::Epanechnikov,
        KernelFamily::Biweight,
        KernelFamily::Triangular,
        KernelFamily::Laplace,
        KernelFamily::Gaussian,
        KernelFamily::Rectangular,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Epanechnikov => "epanechnikov",
            KernelFamily::Biweight => "biweight",
            KernelFamily::Triangular => "triangular",
            KernelFamily::Laplace => "laplace",
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Rectangular => "rectangular",
        }
    }

    /// Value at zero distance.
    pub fn peak(self) -> f64 {
        match self {
            KernelFamily::Epanechnikov => 3.0 / (4.0 * 5f64.sqrt()),
            KernelFamily::Biweight => 15.0 / 16.0,
            KernelFamily::Triangular | KernelFamily::Laplace | KernelFamily::Gaussian => 1.0,
            KernelFamily::Rectangular => 0.5,
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelFamily::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                invalid(format!(
                    "unknown kernel '{s}' (expected epanechnikov|biweight|triangular|laplace|gaussian|rectangular)"
                ))
            })
    }
}

/// A kernel family with a bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    bandwidth: f64,
}

impl Kernel {
    pub fn new(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(invalid(format!("kernel bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Self { family, bandwidth })
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, bandwidth)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// `κ(0)`.
    pub fn peak(&self) -> f64 {
        self.family.peak()
    }

    /// Kernel value at distance `r ≥ 0`.
    pub fn at_distance(&self, r: f64) -> f64 {
        self.at(r, r * r)
    }

    // `r` and `r2 = r²` are both passed so the quadratic families never take
    // a square root.
    fn at(&self, r: f64, r2: f64) -> f64 {
        let s = self.bandwidth;
        match self.family {
            KernelFamily::Epanechnikov => (self.peak() * (1.0 - r2 / (5.0 * s * s))).max(0.0),
            KernelFamily::Biweight => {
                if r2 <= s * s {
                    let u = 1.0 - r2 / (s * s);
                    self.peak() * u * u
                } else {
                    0.0
                }
            }
            KernelFamily::Triangular => (1.0 - r / s).max(0.0),
            KernelFamily::Laplace => (-r / s).exp(),
            KernelFamily::Gaussian => (-r2 / (2.0 * s * s)).exp(),
            KernelFamily::Rectangular => {
                if r < s {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }
}

/// `κ(‖diff‖)`.
pub fn kernel_eval(k: &Kernel, diff: &[f64]) -> Result<f64> {
    if diff.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("kernel_eval"));
    }
    let r2: f64 = diff.iter().map(|d| d * d).sum();
    Ok(k.at(r2.sqrt(), r2))
}

/// Sample-mean estimate of `E[κ(x − y)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrentropyEstimate {
    pub value: f64,
    pub samples: usize,
    pub kernel: Kernel,
}

/// Views a 1-D tensor as `N` scalar samples and a 2-D tensor as `N` rows.
fn sample_rows(t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [n] => Ok((*n, 1)),
        [n, d] => Ok((*n, *d)),
        s => Err(shape_err("correntropy", format!("samples must be 1-D or 2-D, got {s:?}"))),
    }
}

/// Paired estimator `(1/N) Σ_j κ(x_j − y_j)`.
pub fn correntropy(k: &Kernel, xs: &Tensor, ys: &Tensor) -> Result<CorrentropyEstimate> {
    let (n, d) = sample_rows(xs)?;
    if xs.shape() != ys.shape() {
        return Err(shape_err("correntropy", format!("{:?} vs {:?}", xs.shape(), ys.shape())));
    }
    if n == 0 {
        return Err(invalid("correntropy needs at least one sample pair"));
    }
    let mut diff = vec![0.0; d];
    let mut acc = 0.0;
    for j in 0..n {
        for (t, (a, b)) in diff.iter_mut().zip(xs.data()[j * d..].iter().zip(&ys.data()[j * d..])) {
            *t = a - b;
        }
        acc += kernel_eval(k, &diff)?;
    }
    Ok(CorrentropyEstimate {
        value: acc / n as f64,
        samples: n,
        kernel: *k,
    })
}

/// `sqrt(κ(0) − V(xs, ys))`.
pub fn cim(k: &Kernel, xs: &Tensor, ys: &Tensor) -> Result<f64> {
    let v = correntropy(k, xs, ys)?.value;
    Ok((k.peak() - v).max(0.0).sqrt())
}

/// Records `κ(‖row‖)` for every row of a `(B, d)` node, giving a `(B)` node.
pub fn kernel_on_tape(tape: &mut Tape, k: &Kernel, diff: Var) -> Result<Var> {
    let s = k.bandwidth;
    let sq = tape.square(diff);
    let r2 = tape.sum_rows(sq)?;
    Ok(match k.family {
        KernelFamily::Gaussian => {
            let z = tape.scale(r2, -1.0 / (2.0 * s * s));
            tape.exp(z)
        }
        KernelFamily::Laplace => {
            let r = tape.sqrt(r2);
            let z = tape.scale(r, -1.0 / s);
            tape.exp(z)
        }
        KernelFamily::Triangular => {
            let r = tape.sqrt(r2);
            let u = tape.scale(r, -1.0 / s);
            let u = tape.shift(u, 1.0);
            tape.clamp_min(u, 0.0)
        }
        KernelFamily::Epanechnikov => {
            let u = tape.scale(r2, -1.0 / (5.0 * s * s));
            let u = tape.shift(u, 1.0);
            let u = tape.clamp_min(u, 0.0);
            tape.scale(u, k.peak())
        }
        KernelFamily::Biweight => {
            let u = tape.scale(r2, -1.0 / (s * s));
            let u = tape.shift(u, 1.0);
            let u = tape.clamp_min(u, 0.0);
            let u = tape.square(u);
            tape.scale(u, k.peak())
        }
        KernelFamily::Rectangular => {
            // Piecewise constant: no gradient anywhere it is differentiable.
            let vals: Vec<f64> = tape.value(r2).data().iter().map(|&v| k.at(v.sqrt(), v)).collect();
            let n = vals.len();
            tape.constant(Tensor::new(vec![n], vals)?)
        }
    })
}

/// CIM between an old and a new diagonal-Gaussian policy batch, estimated
/// from paired reparameterized actions that share the noise `ε`:
/// `a_old = μ_old + σ_old ⊙ ε`, `a_new = μ_new + σ_new ⊙ ε`.
///
/// The old policy enters as constants, so gradients reach only `new_mu` and
/// `new_sigma` (both `(B, A)` nodes).
pub fn cim_penalty(
    tape: &mut Tape,
    k: &Kernel,
    old_mu: &Tensor,
    old_sigma: &Tensor,
    new_mu: Var,
    new_sigma: Var,
    noise: &Tensor,
) -> Result<Var> {
    cim_penalty_draws(tape, k, old_mu, old_sigma, new_mu, new_sigma, std::slice::from_ref(noise))
}

/// [`cim_penalty`] with several noise draws per state; the correntropy is
/// averaged over all `B · draws` pairs before the square root.
pub fn cim_penalty_draws(
    tape: &mut Tape,
    k: &Kernel,
    old_mu: &Tensor,
    old_sigma: &Tensor,
    new_mu: Var,
    new_sigma: Var,
    noises: &[Tensor],
) -> Result<Var> {
    if noises.is_empty() {
        return Err(invalid("cim_penalty needs at least one noise draw"));
    }
    let mut total: Option<Var> = None;
    for noise in noises {
        let shape = noise.shape();
        if shape.len() != 2
            || old_mu.shape() != shape
            || old_sigma.shape() != shape
            || tape.value(new_mu).shape() != shape
            || tape.value(new_sigma).shape() != shape
        {
            return Err(shape_err(
                "cim_penalty",
                format!(
                    "noise {shape:?}, old mu {:?}, old sigma {:?}, new mu {:?}, new sigma {:?}",
                    old_mu.shape(),
                    old_sigma.shape(),
                    tape.value(new_mu).shape(),
                    tape.value(new_sigma).shape()
                ),
            ));
        }
        let a_old: Vec<f64> = old_mu
            .data()
            .iter()
            .zip(old_sigma.data())
            .zip(noise.data())
            .map(|((m, s), e)| m + s * e)
            .collect();
        let a_old = tape.constant(Tensor::new(shape.to_vec(), a_old)?);
        let eps = tape.constant(noise.clone());
        let spread = tape.mul(new_sigma, eps)?;
        let a_new = tape.add(new_mu, spread)?;
        let diff = tape.sub(a_old, a_new)?;
        let kv = kernel_on_tape(tape, k, diff)?;
        let v = tape.mean(kv);
        total = Some(match total {
            None => v,
            Some(t) => tape.add(t, v)?,
        });
    }
    let v = tape.scale(total.unwrap(), 1.0 / noises.len() as f64);
    let gap = tape.neg(v);
    let gap = tape.shift(gap, k.peak());
    let gap = tape.clamp_min(gap, 0.0);
    Ok(tape.sqrt(gap))
}

/// Silverman's rule of thumb `1.06 · s · N^(−1/5)` with `s` the sample
/// standard deviation. Falls back to 1.0 when the spread is below `1e-8`.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(invalid(format!("silverman bandwidth needs >= 2 samples, got {n}")));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("silverman_bandwidth"));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd < 1e-8 {
        return Ok(1.0);
    }
    Ok(1.06 * sd * (n as f64).powf(-0.2))
}

/// `Σ_{n < terms} (−1)^n / n! · (r² / (2σ²))^n`, the truncated series of the
/// Gaussian kernel.
pub fn gaussian_taylor_partial_sum(r: f64, sigma_k: f64, terms: usize) -> f64 {
    let x = r * r / (2.0 * sigma_k * sigma_k);
    let mut term = 1.0;
    let mut sum = 0.0;
    for n in 0..terms {
        if n > 0 {
            term *= -x / n as f64;
        }
        sum += term;
    }
    sum
}
