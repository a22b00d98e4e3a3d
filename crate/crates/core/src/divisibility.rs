//! Finite-difference certificates: complete monotonicity up to a given
//! order, infinite divisibility of (m_n^α), membership in the image of T
//! and log-convexity on grids.
//!
//! A passing report only says the prefix is consistent with complete
//! monotonicity up to the checked order.

use crate::error::{Error, Result};
use crate::numeric::two_sum;
use crate::seqcore::{fixed_point_moments, MomentSequence};
use crate::transform::t_inverse;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub max_order_checked: usize,
    /// min over j ≤ max_order and valid n of (-1)^j (Δ^j a)_n
    pub min_signed_difference: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// (n, order) of the first difference below -tolerance
    pub first_violation: Option<(usize, usize)>,
}

impl MonotonicityReport {
    pub fn summary(&self) -> String {
        if self.pass {
            format!(
                "consistent with complete monotonicity up to order {} (min {:e}, tol {:e})",
                self.max_order_checked, self.min_signed_difference, self.tolerance
            )
        } else {
            let (n, j) = self.first_violation.unwrap_or((0, 0));
            format!(
                "order {j} difference at n = {n} is negative (min {:e}, tol {:e})",
                self.min_signed_difference, self.tolerance
            )
        }
    }
}

// double-double value hi + lo
#[derive(Clone, Copy)]
struct Dd(f64, f64);

impl Dd {
    fn sub(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.0, -o.0);
        let e = e + (self.1 - o.1);
        let (hi, lo) = two_sum(s, e);
        Dd(hi, lo)
    }
}

/// All signed differences (-1)^j (Δ^j a)_n, row j = order.
pub fn signed_difference_table(a: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let mut row: Vec<Dd> = a.iter().map(|&v| Dd(v, 0.0)).collect();
    let mut out = vec![a.to_vec()];
    for j in 1..=max_order {
        if row.len() < 2 {
            break;
        }
        row = row.windows(2).map(|w| w[1].sub(w[0])).collect();
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        out.push(row.iter().map(|d| sign * (d.0 + d.1)).collect());
    }
    out
}

pub fn completely_monotone_check(
    a: &MomentSequence,
    max_order: usize,
    tol: f64,
) -> Result<MonotonicityReport> {
    check_slice(a.values(), max_order, tol)
}

fn check_slice(a: &[f64], max_order: usize, tol: f64) -> Result<MonotonicityReport> {
    if max_order + 1 > a.len() {
        return Err(Error::Domain(format!(
            "order {max_order} needs more than {} terms",
            a.len()
        )));
    }
    let table = signed_difference_table(a, max_order);
    let mut min = f64::INFINITY;
    let mut first = None;
    for (j, row) in table.iter().enumerate() {
        for (n, &v) in row.iter().enumerate() {
            min = min.min(v);
            if first.is_none() && !(v >= -tol) {
                first = Some((n, j));
            }
        }
    }
    Ok(MonotonicityReport {
        max_order_checked: max_order,
        min_signed_difference: min,
        tolerance: tol,
        pass: first.is_none(),
        first_violation: first,
    })
}

/// Largest spurious negative difference on a sequence known to be
/// completely monotone.
pub fn noise_floor(a: &[f64], max_order: usize) -> f64 {
    signed_difference_table(a, max_order)
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &v| acc.max(-v))
}

/// Tolerance for checks on (m_n^α): ten times the measured floor on m
/// itself, and never below ten times the rounding amplification 2^order ε.
pub fn calibrated_tol(n_len: usize, max_order: usize) -> f64 {
    let m = fixed_point_moments(n_len.saturating_sub(1));
    let measured = noise_floor(m.values(), max_order);
    let model = 2f64.powi(max_order as i32) * f64::EPSILON;
    10.0 * measured.max(model)
}

/// Complete monotonicity of (m_n^α), n < n_len, at the calibrated tolerance.
pub fn infdiv_check(alpha: f64, n_len: usize, max_order: usize) -> Result<MonotonicityReport> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("alpha = {alpha} must be positive")));
    }
    if n_len == 0 {
        return Err(Error::Domain("empty sequence".into()));
    }
    let m = fixed_point_moments(n_len - 1);
    let a: Vec<f64> = m.values().iter().map(|v| v.powf(alpha)).collect();
    check_slice(&a, max_order, calibrated_tol(n_len, max_order))
}

/// b ∈ T(H) test: T^{-1}(b) must be completely monotone and within [0, 1].
pub fn in_image_of_t(b: &MomentSequence, max_order: usize, tol: f64) -> Result<MonotonicityReport> {
    let c = t_inverse(b)?;
    let mut r = completely_monotone_check(&c, max_order, tol)?;
    if r.first_violation.is_none() {
        if let Some(n) = c.values().iter().position(|&v| v > 1.0 + tol || v < -tol) {
            r.first_violation = Some((n, 0));
        }
    }
    r.pass = r.first_violation.is_none();
    Ok(r)
}

/// F(x_i)² ≤ F(x_{i-1}) F(x_{i+1}) (1 + tol) at all interior points of a
/// uniform grid.
pub fn log_convexity_check(fvals: &[(f64, f64)], tol: f64) -> Result<bool> {
    if fvals.len() < 3 {
        return Ok(true);
    }
    let h = fvals[1].0 - fvals[0].0;
    for w in fvals.windows(2) {
        let d = w[1].0 - w[0].0;
        if !(d > 0.0) || (d - h).abs() > 1e-9 * h.abs().max(1.0) {
            return Err(Error::Domain("grid must be increasing and uniform".into()));
        }
    }
    if let Some(&(x, v)) = fvals.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::Domain(format!("non-positive value {v} at x = {x}")));
    }
    Ok(fvals
        .windows(3)
        .all(|w| w[1].1 * w[1].1 <= w[0].1 * w[2].1 * (1.0 + tol)))
}
