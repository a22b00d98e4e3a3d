//! Real-argument digamma, trigamma, shifted Hurwitz zeta and harmonic numbers.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Arguments closer than this to a non-positive integer are treated as poles.
pub const POLE_TOL: f64 = 1e-13;

const ASYMPTOTIC_FROM: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecialValue {
    pub value: f64,
    pub abs_err_est: f64,
}

fn check_pole(x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite argument {x}")));
    }
    let r = x.round();
    if r <= 0.0 && (x - r).abs() < POLE_TOL {
        return Err(Error::Pole { x });
    }
    Ok(())
}

// ln x - 1/(2x) - sum B_{2k} / (2k x^{2k}), k = 1..7
fn digamma_asymptotic(y: f64) -> f64 {
    let w = 1.0 / (y * y);
    let series = w
        * (1.0 / 12.0
            - w * (1.0 / 120.0
                - w * (1.0 / 252.0
                    - w * (1.0 / 240.0 - w * (1.0 / 132.0 - w * (691.0 / 32760.0 - w / 12.0))))));
    y.ln() - 0.5 / y - series
}

// 1/x + 1/(2x^2) + sum B_{2k} / x^{2k+1}, k = 1..7
fn trigamma_asymptotic(y: f64) -> f64 {
    let w = 1.0 / (y * y);
    let series = w
        * (1.0 / 6.0
            - w * (1.0 / 30.0
                - w * (1.0 / 42.0
                    - w * (1.0 / 30.0 - w * (5.0 / 66.0 - w * (691.0 / 2730.0 - w * 7.0 / 6.0))))));
    (1.0 + 0.5 / y + series) / y
}

fn shift_count(x: f64) -> usize {
    if x >= ASYMPTOTIC_FROM {
        0
    } else {
        (ASYMPTOTIC_FROM - x).ceil() as usize
    }
}

/// Digamma function, Ψ(x) = Γ'(x)/Γ(x).
///
/// Negative arguments go through the upward recurrence only; there is no
/// reflection step.
pub fn digamma(x: f64) -> Result<f64> {
    digamma_est(x).map(|v| v.value)
}

pub fn digamma_est(x: f64) -> Result<SpecialValue> {
    check_pole(x)?;
    let n = shift_count(x);
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    for j in (0..n).rev() {
        let t = 1.0 / (x + j as f64);
        sum += t;
        abs_sum += t.abs();
    }
    let y = x + n as f64;
    let tail = digamma_asymptotic(y);
    let value = tail - sum;
    let eps = f64::EPSILON;
    let abs_err_est = eps * ((n as f64 + 4.0) * abs_sum + 4.0 * tail.abs()) + 1e-16;
    Ok(SpecialValue { value, abs_err_est })
}

/// Trigamma function Ψ'(x).
pub fn trigamma(x: f64) -> Result<f64> {
    trigamma_est(x).map(|v| v.value)
}

pub fn trigamma_est(x: f64) -> Result<SpecialValue> {
    check_pole(x)?;
    let n = shift_count(x);
    let mut sum = 0.0;
    for j in (0..n).rev() {
        let t = 1.0 / (x + j as f64);
        sum += t * t;
    }
    let y = x + n as f64;
    let value = sum + trigamma_asymptotic(y);
    let abs_err_est = f64::EPSILON * (n as f64 + 4.0) * value.abs() + 1e-16;
    Ok(SpecialValue { value, abs_err_est })
}

// B_{2k} / (2k)!, k = 1..7
const EM_COEFFS: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
];

/// ζ(s, a) = Σ_{n≥1} (n+a)^{-s}. The sum starts at n = 1.
pub fn hurwitz_zeta_shifted(s: u32, a: f64) -> Result<f64> {
    if s < 2 {
        return Err(Error::Domain(format!("hurwitz zeta needs s >= 2, got {s}")));
    }
    if !(a > -1.0) || !a.is_finite() {
        return Err(Error::Domain(format!("hurwitz zeta needs a > -1, got {a}")));
    }
    let sf = s as f64;
    let threshold = (2.0 * sf).max(20.0);
    let big_n = ((threshold - a).ceil() as i64).max(1) as u64;

    let mut direct = 0.0;
    for n in (1..big_n).rev() {
        direct += (n as f64 + a).powi(-(s as i32));
    }

    let x = big_n as f64 + a;
    let mut tail = x.powf(1.0 - sf) / (sf - 1.0) + 0.5 * x.powf(-sf);
    // rising factorial s (s+1) ... (s+2k-2) times x^{-s-2k+1}
    let mut rising = sf;
    let mut pow = x.powf(-sf - 1.0);
    for (k, c) in EM_COEFFS.iter().enumerate() {
        if k > 0 {
            let m = 2.0 * k as f64;
            rising *= (sf + m - 1.0) * (sf + m);
            pow /= x * x;
        }
        tail += c * rising * pow;
    }
    Ok(direct + tail)
}

/// H_p = 1 + 1/2 + ... + 1/p, summed in binary64.
pub fn harmonic(p: u64) -> f64 {
    (1..=p).map(|k| 1.0 / k as f64).sum()
}

/// Ψ(z+1) + γ, the Bernstein transform of Lebesgue measure on (0,1).
pub fn bernstein_uniform(z: f64) -> Result<f64> {
    Ok(digamma(z + 1.0)? + EULER_GAMMA)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // Ψ(x) = -γ + Σ_{k≥0} (1/(k+1) - 1/(k+x)), summed far out with a 1/N tail fix.
    fn digamma_series(x: f64) -> f64 {
        let n = 2_000_000u64;
        let mut s = 0.0;
        for k in (0..n).rev() {
            let k = k as f64;
            s += 1.0 / (k + 1.0) - 1.0 / (k + x);
        }
        // remaining tail Σ_{k≥N} (x-1)/((k+1)(k+x)) ≈ (x-1)/(N + x/2)
        s += (x - 1.0) / (n as f64 + 0.5 * x);
        s - EULER_GAMMA
    }

    #[test]
    fn classical_values() {
        assert!((digamma(1.0).unwrap() + EULER_GAMMA).abs() < 1e-15);
        assert!((digamma(2.0).unwrap() - (1.0 - EULER_GAMMA)).abs() < 1e-15);
        assert!((trigamma(1.0).unwrap() - PI * PI / 6.0).abs() < 1e-14);
        assert!((trigamma(2.0).unwrap() - (PI * PI / 6.0 - 1.0)).abs() < 1e-14);
        assert!((digamma(0.5).unwrap() - (-EULER_GAMMA - 2.0 * 2f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn digamma_matches_slow_series() {
        for &x in &[0.3, 1.7, 4.2, 9.99, 10.01, -0.5, -2.25, -7.6] {
            let a = digamma(x).unwrap();
            let b = digamma_series(x);
            assert!((a - b).abs() < 1e-9, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn large_argument() {
        let x = 1e6_f64;
        let expect = x.ln() - 0.5 / x - 1.0 / (12.0 * x * x);
        assert!((digamma(x).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn poles_are_reported() {
        for &x in &[0.0, -1.0, -5.0, -3.0 + 1e-14] {
            assert!(matches!(digamma(x), Err(Error::Pole { .. })));
            assert!(matches!(trigamma(x), Err(Error::Pole { .. })));
        }
        assert!(digamma(-3.0 + 1e-9).is_ok());
        assert!(matches!(bernstein_uniform(-2.0), Err(Error::Pole { .. })));
    }

    #[test]
    fn root_of_shifted_digamma_in_first_shell() {
        // plain bisection on the slow series; independent of the recurrence code
        let g = |x: f64| digamma_series(1.0 + x) + EULER_GAMMA;
        let (mut a, mut b) = (-2.0 + 1e-6, -1.0 - 1e-6);
        for _ in 0..40 {
            let m = 0.5 * (a + b);
            if g(m) < 0.0 {
                a = m
            } else {
                b = m
            }
        }
        let oracle = 0.5 * (a + b);
        let h = |x: f64| digamma(1.0 + x).unwrap() + EULER_GAMMA;
        let (mut a, mut b) = (-2.0 + 1e-9, -1.0 - 1e-9);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if h(m) < 0.0 {
                a = m
            } else {
                b = m
            }
        }
        assert!((0.5 * (a + b) - oracle).abs() < 1e-8);
        assert!(oracle > -1.6 && oracle < -1.5);
    }

    #[test]
    fn trigamma_finite_difference() {
        let (x, h) = (3.7, 1e-4);
        let fd = (digamma(x + h).unwrap() - digamma(x - h).unwrap()) / (2.0 * h);
        assert!((fd - trigamma(x).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn hurwitz_values() {
        let z2 = PI * PI / 6.0;
        assert!((hurwitz_zeta_shifted(2, 0.0).unwrap() - z2).abs() < 1e-13);
        assert!((hurwitz_zeta_shifted(2, 1.0).unwrap() - (z2 - 1.0)).abs() < 1e-13);
        assert!((hurwitz_zeta_shifted(4, 0.0).unwrap() - PI.powi(4) / 90.0).abs() < 1e-13);
        assert!(hurwitz_zeta_shifted(1, 0.0).is_err());
        assert!(hurwitz_zeta_shifted(2, -1.0).is_err());
    }

    #[test]
    fn hurwitz_against_long_partial_sum() {
        // 10^6 terms plus the integral tail bound
        let (s, a) = (3u32, 0.5);
        let n = 1_000_000u64;
        let mut direct = 0.0;
        for k in (1..=n).rev() {
            direct += (k as f64 + a).powi(-3);
        }
        let x = n as f64 + a;
        let tail = 0.5 / (x * x) - 0.5 / (x * x * x);
        let oracle = direct + tail;
        assert!((hurwitz_zeta_shifted(s, a).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn hurwitz_high_order() {
        // for large s the sum is dominated by its first terms
        let a = 0.25;
        let direct: f64 = (1..200).map(|n| (n as f64 + a).powi(-30)).sum();
        let v = hurwitz_zeta_shifted(30, a).unwrap();
        assert!(((v - direct) / direct).abs() < 1e-13);
    }

    #[test]
    fn harmonic_numbers() {
        assert_eq!(harmonic(1), 1.0);
        assert_eq!(harmonic(2), 1.5);
        for p in [1u64, 7, 100, 2500, 10_000] {
            let d = digamma(p as f64 + 1.0).unwrap() + EULER_GAMMA;
            assert!((harmonic(p) - d).abs() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn bernstein_uniform_at_integers() {
        assert!((bernstein_uniform(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(bernstein_uniform(0.0).unwrap().abs() < 1e-15);
        for k in 1..30u64 {
            assert!((bernstein_uniform(k as f64).unwrap() - harmonic(k)).abs() < 1e-13);
        }
    }

    #[test]
    fn error_estimates_are_nonnegative() {
        for &x in &[0.1, -4.5, 33.0] {
            assert!(digamma_est(x).unwrap().abs_err_est >= 0.0);
            assert!(trigamma_est(x).unwrap().abs_err_est >= 0.0);
        }
    }
}
