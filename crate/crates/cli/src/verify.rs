//! Self-check suites run by `rl-lab verify`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rl_lab_core::autodiff::Tensor;
use rl_lab_core::correntropy::{cim, gaussian_taylor_partial_sum, Kernel, KernelFamily};
use rl_lab_core::gaussian::{asymmetry_closed_form, kl_asymmetry, kl_closed_form, pinsker_check, DiagGaussian};
use rl_lab_core::numeric::{integrate, normal_pdf};
use rl_lab_core::ppo::{objective_and_grad, objective_value, ActionPolicy, GaussianPolicy, Objective, UpdateBatch};

use crate::error::{usage, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Kl,
    Asymmetry,
    Cim,
    Pinsker,
    Taylor,
    Grad,
}

impl Suite {
    pub const ALL: [Suite; 6] = [Suite::Kl, Suite::Asymmetry, Suite::Cim, Suite::Pinsker, Suite::Taylor, Suite::Grad];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Kl => "kl",
            Suite::Asymmetry => "asymmetry",
            Suite::Cim => "cim",
            Suite::Pinsker => "pinsker",
            Suite::Taylor => "taylor",
            Suite::Grad => "grad",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Suite::Kl => "KL closed form vs quadrature and Monte Carlo",
            Suite::Asymmetry => "KL asymmetry formula and magnitude",
            Suite::Cim => "CIM metric properties",
            Suite::Pinsker => "Pinsker inequality sweep",
            Suite::Taylor => "Gaussian kernel Taylor series",
            Suite::Grad => "surrogate gradients vs finite differences",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| usage(format!("unknown suite '{s}'")))
    }
}

/// Deliberate breakage used to check that the suites catch errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Negate the closed-form KL.
    KlSign,
}

impl FromStr for Fault {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "kl-sign" => Ok(Fault::KlSign),
            other => Err(usage(format!("unknown fault '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub passed: bool,
    pub detail: String,
}

pub fn run_suite(suite: Suite, fault: Option<Fault>) -> SuiteOutcome {
    let res = match suite {
        Suite::Kl => kl_suite(fault),
        Suite::Asymmetry => asymmetry_suite(),
        Suite::Cim => cim_suite(),
        Suite::Pinsker => pinsker_suite(),
        Suite::Taylor => taylor_suite(),
        Suite::Grad => grad_suite(),
    };
    match res {
        Ok(detail) => SuiteOutcome { suite, passed: true, detail },
        Err(detail) => SuiteOutcome { suite, passed: false, detail },
    }
}

type Check = Result<String, String>;

fn ok_or<E: fmt::Display, T>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn kl_suite(fault: Option<Fault>) -> Check {
    let kl = |p: &DiagGaussian, q: &DiagGaussian| -> Result<f64, String> {
        let v = ok_or(kl_closed_form(p, q))?;
        Ok(if fault == Some(Fault::KlSign) { -v } else { v })
    };
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let (mp, mq) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let (sp, sq): (f64, f64) = (rng.random_range(0.05..5.0), rng.random_range(0.05..5.0));
        let p = ok_or(DiagGaussian::scalar(mp, sp))?;
        let q = ok_or(DiagGaussian::scalar(mq, sq))?;
        let quad = integrate(
            |x| {
                let lp = -0.5 * ((x - mp) / sp).powi(2) - sp.ln();
                let lq = -0.5 * ((x - mq) / sq).powi(2) - sq.ln();
                normal_pdf(x, mp, sp) * (lp - lq)
            },
            mp - 14.0 * sp,
            mp + 14.0 * sp,
            1e-13,
            50,
        );
        let err = (kl(&p, &q)? - quad).abs();
        worst = worst.max(err);
        if err > 1e-8 {
            return Err(format!("1-D pair ({mp},{sp})‖({mq},{sq}): |closed − quadrature| = {err:.3e}"));
        }
    }
    let n = 100_000;
    for dim in [2, 4] {
        let p = ok_or(DiagGaussian::new(vec![0.4; dim], vec![0.7; dim]))?;
        let q = ok_or(DiagGaussian::new(vec![-0.1; dim], vec![1.4; dim]))?;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = p.sample_with(&mut rng);
            let d = ok_or(p.log_prob(&x))? - ok_or(q.log_prob(&x))?;
            s += d;
            s2 += d * d;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        let closed = kl(&p, &q)?;
        if (closed - mean).abs() > 4.0 * se {
            return Err(format!("dim {dim}: closed {closed:.6} vs Monte Carlo {mean:.6} ± {se:.2e}"));
        }
    }
    Ok(format!("max 1-D error {worst:.2e}"))
}

fn asymmetry_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..100 {
        let dim = rng.random_range(1..5);
        let draw = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> Vec<f64> { (0..dim).map(|_| rng.random_range(lo..hi)).collect() };
        let p = ok_or(DiagGaussian::new(draw(&mut rng, -3.0, 3.0), draw(&mut rng, 0.05, 5.0)))?;
        let q = ok_or(DiagGaussian::new(draw(&mut rng, -3.0, 3.0), draw(&mut rng, 0.05, 5.0)))?;
        let a = ok_or(kl_asymmetry(&p, &q))?;
        let direct = ok_or(asymmetry_closed_form(&p, &q))?;
        let scale = 1.0 + a.forward.abs() + a.reverse.abs();
        if (a.asymmetry - direct).abs() > 1e-9 * scale {
            return Err(format!("asymmetry {} vs direct {direct}", a.asymmetry));
        }
    }
    let mut max: f64 = 0.0;
    for i in 0..60 {
        for j in 0..60 {
            let s1 = 0.01 * 1000f64.powf(i as f64 / 59.0);
            let s2 = 0.01 * 1000f64.powf(j as f64 / 59.0);
            let p = ok_or(DiagGaussian::scalar(1.0, s1))?;
            let q = ok_or(DiagGaussian::scalar(2.0, s2))?;
            max = max.max(ok_or(kl_asymmetry(&p, &q))?.asymmetry.abs());
        }
    }
    if max < 1e4 {
        return Err(format!("max |asymmetry| on σ ∈ [0.01, 10] is only {max:.3e}"));
    }
    Ok(format!("max |asymmetry| {max:.3e}"))
}

fn cim_suite() -> Check {
    let families = [
        KernelFamily::Gaussian,
        KernelFamily::Laplace,
        KernelFamily::Epanechnikov,
        KernelFamily::Biweight,
        KernelFamily::Triangular,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst: f64 = 0.0;
    for fam in families {
        for _ in 0..200 {
            let n = rng.random_range(1..8);
            let d = rng.random_range(1..4);
            let bw = rng.random_range(0.3..3.0);
            let k = ok_or(Kernel::new(fam, bw))?;
            let mut set = || ok_or(Tensor::new(vec![n, d], (0..n * d).map(|_| rng.random_range(-3.0..3.0)).collect()));
            let (x, y, z) = (set()?, set()?, set()?);
            let xy = ok_or(cim(&k, &x, &y))?;
            let yx = ok_or(cim(&k, &y, &x))?;
            let xz = ok_or(cim(&k, &x, &z))?;
            let yz = ok_or(cim(&k, &y, &z))?;
            if xy < 0.0 || xy != yx {
                return Err(format!("{fam}: non-negativity or symmetry failed ({xy} vs {yx})"));
            }
            let excess = xz - xy - yz;
            worst = worst.max(excess);
            if excess > 1e-12 {
                return Err(format!("{fam}: triangle inequality off by {excess:.3e}"));
            }
        }
    }
    Ok(format!("worst triangle excess {worst:.2e}"))
}

fn pinsker_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for _ in 0..20 {
        let dim = rng.random_range(1..4);
        let draw = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> Vec<f64> { (0..dim).map(|_| rng.random_range(lo..hi)).collect() };
        let p = ok_or(DiagGaussian::new(draw(&mut rng, -2.0, 2.0), draw(&mut rng, 0.2, 3.0)))?;
        let q = ok_or(DiagGaussian::new(draw(&mut rng, -2.0, 2.0), draw(&mut rng, 0.2, 3.0)))?;
        let r = ok_or(pinsker_check(&p, &q, 10_000, &mut rng))?;
        if !r.holds {
            return Err(format!("tv² = {:.4} > kl + tol = {:.4}", r.tv * r.tv, r.kl + r.tolerance));
        }
    }
    Ok("20 pairs".into())
}

fn taylor_suite() -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let r = 2.0 * i as f64 / 49.0;
        let err = (gaussian_taylor_partial_sum(r, 1.0, 20) - (-r * r / 2.0).exp()).abs();
        worst = worst.max(err);
    }
    if worst > 1e-9 {
        return Err(format!("20-term error {worst:.3e}"));
    }
    Ok(format!("max error {worst:.2e}"))
}

/// Random 8-transition batch whose old policy is a perturbed copy of
/// `policy`, so ratios differ from one.
fn perturbed_batch(policy: &GaussianPolicy, rng: &mut ChaCha8Rng) -> rl_lab_core::Result<UpdateBatch> {
    let b = 8;
    let mut old = policy.clone();
    for p in old.params_mut() {
        for v in p.data_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    let sd = policy.state_dim();
    let ad = policy.action_dim();
    let states = Tensor::new(vec![b, sd], (0..b * sd).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let (old_mu, old_sigma) = old.batch_moments(&states)?;
    let mut actions = Vec::with_capacity(b * ad);
    let mut old_lp = Vec::with_capacity(b);
    for i in 0..b {
        let dist = old.distribution(states.row(i))?;
        let a = dist.sample_with(rng);
        old_lp.push(dist.log_prob(&a)?);
        actions.extend(a);
    }
    Ok(UpdateBatch {
        states,
        actions: Tensor::new(vec![b, ad], actions)?,
        old_log_probs: Tensor::vector(old_lp)?,
        advantages: Tensor::vector((0..b).map(|_| rng.random_range(-2.0..2.0)).collect())?,
        old_mu,
        old_sigma,
    })
}

fn grad_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let mut policy = ok_or(GaussianPolicy::new(3, 2, &[8], -0.3, &mut rng))?;
        for p in policy.params_mut() {
            for v in p.data_mut() {
                *v += rng.random_range(-0.3..0.3);
            }
        }
        let batch = ok_or(perturbed_batch(&policy, &mut rng))?;
        let noise = [ok_or(Tensor::new(vec![8, 2], (0..16).map(|_| rng.random_range(-2.0..2.0)).collect()))?];
        let objectives = [
            ("clip", Objective::Clip { eps: 0.2 }),
            ("kl", Objective::Kl { beta: 0.7 }),
            ("cim", Objective::Cim { alpha: 1.0, kernel: ok_or(Kernel::gaussian(1.0))?, noises: &noise }),
        ];
        for (name, obj) in &objectives {
            let (_, grads) = ok_or(objective_and_grad(&policy, &batch, obj))?;
            for (pi, g) in grads.iter().enumerate() {
                for j in 0..g.len() {
                    let mut plus = policy.clone();
                    plus.params_mut()[pi].data_mut()[j] += h;
                    let mut minus = policy.clone();
                    minus.params_mut()[pi].data_mut()[j] -= h;
                    let fd = (ok_or(objective_value(&plus, &batch, obj))? - ok_or(objective_value(&minus, &batch, obj))?)
                        / (2.0 * h);
                    let an = g.data()[j];
                    let err = (an - fd).abs() / (an.abs().max(fd.abs()) + 1e-6);
                    worst = worst.max(err);
                    if err > 1e-3 {
                        return Err(format!("{name}: param {pi}[{j}] analytic {an:.6e} vs fd {fd:.6e}"));
                    }
                }
            }
        }
    }
    Ok(format!("max relative error {worst:.2e}"))
}
