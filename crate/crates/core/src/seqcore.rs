//! The fixed-point sequence m_n, its reciprocals λ_n, seeded orbits λ_n(s),
//! the G iteration and asymptotic diagnostics.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;

/// A finite prefix (a_0, ..., a_n) of a normalized moment sequence.
///
/// Only `a_0 = 1` is enforced here. Whether the prefix is consistent with a
/// Hausdorff sequence is a question for [`crate::divisibility`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSequence {
    values: Vec<f64>,
}

impl MomentSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        match values.first() {
            None => return Err(Error::Domain("empty moment sequence".into())),
            Some(&a0) if (a0 - 1.0).abs() > 1e-12 => {
                return Err(Error::Domain(format!("a_0 must be 1, got {a0}")))
            }
            _ => {}
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite moment {bad}")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        self.values.get(k).copied()
    }

    /// sup_k |a_k - b_k| over the common prefix.
    pub fn sup_distance(&self, other: &MomentSequence) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Positive root of z^2 - y z - 1 = 0 without cancellation.
#[inline]
pub fn positive_root(y: f64) -> f64 {
    let r = (y * y + 4.0).sqrt();
    if y >= 0.0 {
        0.5 * (y + r)
    } else {
        2.0 / (r - y)
    }
}

/// (m_0, ..., m_{n_max}) with m_0 = 1 and m_{n+1}^2 + m_{n+1}/m_n - 1 = 0.
pub fn fixed_point_moments(n_max: usize) -> MomentSequence {
    let mut values = Vec::with_capacity(n_max + 1);
    let mut m = 1.0f64;
    values.push(m);
    for _ in 0..n_max {
        let b = 1.0 / m;
        m = 2.0 / (b + (b * b + 4.0).sqrt());
        values.push(m);
    }
    MomentSequence { values }
}

/// λ_0 = 0, λ_{n+1} = (λ_n + sqrt(λ_n^2 + 4))/2.
pub fn lambda_sequence(n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut x = 0.0f64;
    out.push(x);
    for _ in 0..n_max {
        x = positive_root(x);
        out.push(x);
    }
    out
}

/// Shared read-only λ table for repeated evaluations.
#[derive(Debug, Clone)]
pub struct LambdaTable {
    values: Vec<f64>,
}

impl LambdaTable {
    pub fn new(n_max: usize) -> Self {
        Self {
            values: lambda_sequence(n_max),
        }
    }

    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    #[inline]
    pub fn get(&self, n: usize) -> f64 {
        self.values[n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSeed {
    pub seed: f64,
    pub values: Vec<f64>,
}

impl LambdaSeed {
    pub fn last(&self) -> f64 {
        *self.values.last().expect("seeded sequence is never empty")
    }
}

/// λ_0(s) = s, λ_{n+1}(s) the positive preimage of λ_n(s) under ψ.
pub fn lambda_seeded(s: f64, n: usize) -> LambdaSeed {
    let mut values = Vec::with_capacity(n + 1);
    let mut x = s;
    values.push(x);
    for _ in 0..n {
        x = positive_root(x);
        values.push(x);
    }
    LambdaSeed { seed: s, values }
}

/// h_n = G^n(π/4) with G(x) = atan(2 tan x)/2.
pub fn g_iterate(n: usize) -> f64 {
    let mut h = FRAC_PI_4;
    for _ in 0..n {
        h = 0.5 * (2.0 * h.tan()).atan();
    }
    h
}

/// Φ(x) = (sqrt(4x^2+1) - 1)/(2x), the scalar map m_n -> m_{n+1}.
pub fn phi(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    2.0 * x / ((4.0 * x * x + 1.0).sqrt() + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub n: usize,
    pub lambda_sq_minus_2n: f64,
    /// (λ_n^2 - 2n)/ln n
    pub log_ratio: f64,
    /// m_n sqrt(2n)
    pub m_scaled: f64,
}

pub fn asymptotic_report(n: usize) -> Result<AsymptoticReport> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "asymptotic report needs n >= 2, got {n}"
        )));
    }
    let lam = lambda_sequence(n + 1);
    let ln = lam[n];
    let d = ln * ln - 2.0 * n as f64;
    let m_n = 1.0 / lam[n + 1];
    Ok(AsymptoticReport {
        n,
        lambda_sq_minus_2n: d,
        log_ratio: d / (n as f64).ln(),
        m_scaled: m_n * (2.0 * n as f64).sqrt(),
    })
}
