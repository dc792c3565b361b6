//! Small numerical helpers shared by the diagnostics.

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Density of `N(mu, sigma²)` at `x`.
pub fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`, recursing at most `max_depth` levels.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // The second test stops refinement once the correction is at rounding level,
    // which a halved absolute tolerance can otherwise never reach.
    let noise = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if depth == 0 || !delta.is_finite() || delta.abs() <= 15.0 * tol || delta.abs() <= noise || m <= a || m >= b {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Integrates over consecutive sub-intervals split at `breaks`.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64, max_depth: u32) -> f64 {
    let pieces = (breaks.len().saturating_sub(1)).max(1) as f64;
    breaks
        .windows(2)
        .map(|w| integrate(&f, w[0], w[1], tol / pieces, max_depth))
        .sum()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divides by `n`).
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_the_normal_density() {
        let v = integrate(|x| normal_pdf(x, 0.3, 0.7), -10.0, 10.0, 1e-13, 40);
        assert!((v - 1.0).abs() < 1e-11);
    }

    #[test]
    fn ln_sqrt_2pi_constant() {
        assert!((LN_SQRT_2PI - 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-16);
    }

    #[test]
    fn population_std() {
        assert!((std_dev(&[1.0, 3.0]) - 1.0).abs() < 1e-15);
    }
}
