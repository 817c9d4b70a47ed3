//! Regularized incomplete gamma function and chi-square distribution helpers.

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
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

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx)
        let s = (std::f64::consts::PI * x).sin();
        return std::f64::consts::PI.ln() - s.abs().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Returns (P(a, x), Q(a, x)), the regularized lower and upper incomplete gamma.
fn incomplete_gamma(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    let log_prefix = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        let p = (log_prefix.exp() * sum).min(1.0);
        (p, 1.0 - p)
    } else {
        // Modified Lentz on the continued fraction for Q.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-17 {
                break;
            }
        }
        let q = (log_prefix.exp() * h).min(1.0);
        (1.0 - q, q)
    }
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    incomplete_gamma(a, x).0
}

/// Regularized upper incomplete gamma Q(a, x) = 1 − P(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    incomplete_gamma(a, x).1
}

/// Chi-square CDF with `dof` degrees of freedom.
pub fn chi2_cdf(dof: f64, x: f64) -> f64 {
    gamma_p(0.5 * dof, 0.5 * x)
}

fn chi2_pdf(dof: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = 0.5 * dof;
    ((k - 1.0) * x.ln() - 0.5 * x - k * 2f64.ln() - ln_gamma(k)).exp()
}

/// Quantile of the chi-square distribution: the x with P(dof/2, x/2) = prob.
///
/// Safeguarded Newton iteration on the incomplete gamma; the upper tail is
/// solved through Q to avoid cancellation for prob near 1.
pub fn chi2_quantile(dof: u32, prob: f64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::DomainError(
            "chi-square dof must be at least 1".into(),
        ));
    }
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::DomainError(format!(
            "probability {prob} outside (0, 1)"
        )));
    }
    let k = dof as f64;
    if dof == 2 {
        return Ok(-2.0 * (-prob).ln_1p());
    }
    let upper = prob > 0.5;
    let target = if upper { 1.0 - prob } else { prob };
    // f is increasing in x in both branches.
    let f = |x: f64| {
        let (p, q) = incomplete_gamma(0.5 * k, 0.5 * x);
        if upper {
            target - q
        } else {
            p - target
        }
    };

    let mut lo = 0.0;
    let mut hi = k.max(1.0);
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..300 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let deriv = chi2_pdf(k, x);
        let mut next = x - fx / deriv;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs() || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gamma_p_closed_forms() {
        for &x in &[0.01, 0.5, 1.0, 2.5, 7.0, 30.0] {
            assert!((gamma_p(1.0, x) - (1.0 - (-x).exp())).abs() < 1e-14);
            // P(a+1, x) = P(a, x) − x^a e^{−x} / Γ(a+1)
            let a = 2.5;
            let rec = gamma_p(a, x) - (a * x.ln() - x - ln_gamma(a + 1.0)).exp();
            assert!((gamma_p(a + 1.0, x) - rec).abs() < 1e-13);
        }
    }

    #[test]
    fn two_dof_is_exponential() {
        let q = chi2_quantile(2, 0.99).unwrap();
        assert!((q - 9.2103404).abs() < 1e-7);
        assert!((q + 2.0 * 0.01f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn quantile_solves_cdf() {
        for dof in [1u32, 3, 5, 10, 40] {
            for prob in [1e-6, 0.01, 0.3, 0.5, 0.975, 0.99, 0.999999] {
                let x = chi2_quantile(dof, prob).unwrap();
                let p = chi2_cdf(dof as f64, x);
                assert!(((p - prob) / prob).abs() < 1e-8, "dof {dof} prob {prob}");
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(chi2_quantile(3, 0.0).is_err());
        assert!(chi2_quantile(3, 1.0).is_err());
        assert!(chi2_quantile(0, 0.5).is_err());
    }

    #[test]
    fn monotone_on_grid() {
        for dof in 1u32..=12 {
            let mut prev = 0.0;
            for i in 1..100 {
                let x = chi2_quantile(dof, i as f64 / 100.0).unwrap();
                assert!(x > prev);
                prev = x;
                assert!(chi2_quantile(dof + 1, i as f64 / 100.0).unwrap() > x);
            }
        }
    }
}
