//! Real evaluation of the Bernstein transform f of the fixed point and of
//! its Mellin transform F = 1/f(· + 1).

use crate::error::{Error, Result};
use crate::numeric::{richardson_observed, CompensatedSum};
use crate::psidyn::PSI_POLE_TOL;
use crate::seqcore::{positive_root, LambdaTable};
use crate::specfun::{digamma, hurwitz_zeta_shifted, trigamma, EULER_GAMMA};
use crate::spectrum::SpectrumLedger;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Default orbit length for [`FEvaluator`].
pub const DEFAULT_ORBIT_LEN: usize = 1 << 16;
pub const ORBIT_CAP: usize = 100_000_000;
/// f_extended refuses results whose propagated error exceeds this.
pub const EXTENSION_ERR_LIMIT: f64 = 1e-3;
/// Minimum distance to a pole accepted by the extensions.
pub const POLE_GUARD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMethod {
    IterateFormula,
    ForwardRecursion,
    PsiExtension,
    SpectralPartialFraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub value: f64,
    pub abs_err_est: f64,
    pub method: EvalMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitBracket {
    pub lower: f64,
    pub upper: f64,
}

fn check_unit(s: f64, n: usize, table: &LambdaTable) -> Result<()> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Domain(format!("s = {s} outside (0, 1]")));
    }
    if n < 2 {
        return Err(Error::Domain(format!("orbit length {n} < 2")));
    }
    if n > ORBIT_CAP {
        return Err(Error::PrecisionCap {
            what: "orbit length",
            value: n,
            cap: ORBIT_CAP,
        });
    }
    if n + 1 > table.n_max() {
        return Err(Error::Domain(format!(
            "λ table of length {} too short for n = {n}",
            table.n_max()
        )));
    }
    Ok(())
}

fn orbit(start: f64, n: usize) -> Result<f64> {
    let mut w = start;
    for step in 1..=n {
        if w.abs() < PSI_POLE_TOL {
            return Err(Error::PoleEncountered { step });
        }
        w -= 1.0 / w;
    }
    Ok(w)
}

// λ_n r^s with r = λ_{n+1}/λ_n, without forming r - 1 by cancellation
fn scaled(lo: f64, hi: f64, s: f64) -> f64 {
    lo * (s * ((hi - lo) / lo).ln_1p()).exp()
}

/// ψ^n(λ_n (λ_{n+1}/λ_n)^s) with the explicit error bound of the
/// convergence proof.
pub fn f_unit(s: f64, n: usize) -> Result<EvalResult> {
    let table = LambdaTable::new(n + 1);
    f_unit_with(&table, s, n)
}

pub fn f_unit_with(table: &LambdaTable, s: f64, n: usize) -> Result<EvalResult> {
    check_unit(s, n, table)?;
    let (l0, l1, l2) = (table.get(n - 1), table.get(n), table.get(n + 1));
    let nf = n as f64;
    let abs_err_est = s * (nf + 1.0) * (l1 * l1 - l0 * l0) / (l1 * l0 * l0);
    // ψ^n(λ_{n+1}) = 1 identically
    let value = if s == 1.0 {
        1.0
    } else {
        orbit(scaled(l1, l2, s), n)?
    };
    Ok(EvalResult {
        value,
        abs_err_est,
        method: EvalMethod::IterateFormula,
    })
}

/// ψ^n(b_n(s)) ≤ f(s) ≤ ψ^n(a_n(s)).
pub fn f_unit_bracket(table: &LambdaTable, s: f64, n: usize) -> Result<UnitBracket> {
    check_unit(s, n, table)?;
    let (l0, l1, l2) = (table.get(n - 1), table.get(n), table.get(n + 1));
    Ok(UnitBracket {
        lower: orbit(scaled(l1, l2, s), n)?,
        upper: orbit(l1 * (s * ((l1 - l0) / l0).ln_1p()).exp(), n)?,
    })
}

/// Evaluator for f and F sharing one λ table.
///
/// On (0,1] the iterate formula is evaluated at orbit lengths n, n/2, n/4,
/// n/8 and extrapolated in n; the error estimate is the disagreement of the
/// two extrapolations plus a rounding floor.
#[derive(Debug, Clone)]
pub struct FEvaluator {
    table: LambdaTable,
    n: usize,
}

impl Default for FEvaluator {
    fn default() -> Self {
        Self::new(DEFAULT_ORBIT_LEN)
    }
}

impl FEvaluator {
    pub fn new(n: usize) -> Self {
        let n = n.clamp(64, ORBIT_CAP);
        Self {
            table: LambdaTable::new(n + 1),
            n,
        }
    }

    pub fn orbit_len(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &LambdaTable {
        &self.table
    }

    pub fn unit(&self, s: f64) -> Result<EvalResult> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::Domain(format!("s = {s} outside (0, 1]")));
        }
        if s == 1.0 {
            return Ok(EvalResult {
                value: 1.0,
                abs_err_est: 0.0,
                method: EvalMethod::IterateFormula,
            });
        }
        let v = |n: usize| -> Result<f64> {
            let (l1, l2) = (self.table.get(n), self.table.get(n + 1));
            orbit(scaled(l1, l2, s), n)
        };
        let n = self.n;
        let (v0, v1, v2, v3) = (v(n)?, v(n / 2)?, v(n / 4)?, v(n / 8)?);
        let (r1, _) = richardson_observed(v0, v1, v2);
        let (r2, _) = richardson_observed(v1, v2, v3);
        let floor = 20.0 * f64::EPSILON * n as f64;
        Ok(EvalResult {
            value: r1,
            abs_err_est: (r1 - r2).abs() + floor,
            method: EvalMethod::IterateFormula,
        })
    }

    /// f on (-1, ∞).
    pub fn f_real(&self, x: f64) -> Result<EvalResult> {
        if !(x > -1.0) || !x.is_finite() {
            return Err(Error::Domain(format!("f_real needs x > -1, got {x}")));
        }
        if x <= 0.0 {
            let u = self.unit(x + 1.0)?;
            let w = u.value;
            return Ok(EvalResult {
                value: w - 1.0 / w,
                abs_err_est: u.abs_err_est * (1.0 + 1.0 / (w * w)),
                method: EvalMethod::PsiExtension,
            });
        }
        if x <= 1.0 {
            return self.unit(x);
        }
        let k = x.ceil() - 1.0;
        let mut r = self.unit(x - k)?;
        for _ in 0..k as u64 {
            let w = positive_root(r.value);
            // the forward map contracts errors by 1/ψ'(w)
            r.abs_err_est = r.abs_err_est / (1.0 + 1.0 / (w * w)) + f64::EPSILON * w;
            r.value = w;
        }
        r.method = EvalMethod::ForwardRecursion;
        Ok(r)
    }

    /// f anywhere on the real line off its poles, by the ψ-orbit.
    pub fn f_extended(&self, x: f64) -> Result<EvalResult> {
        let r = self.f_extended_raw(x)?;
        if r.abs_err_est > EXTENSION_ERR_LIMIT {
            return Err(Error::PrecisionLoss {
                err: r.abs_err_est,
                limit: EXTENSION_ERR_LIMIT,
            });
        }
        Ok(r)
    }

    /// As [`Self::f_extended`] without the precision-loss check; the sign is
    /// still meaningful for bracketing when the error estimate is large.
    pub fn f_extended_raw(&self, x: f64) -> Result<EvalResult> {
        if x > -1.0 {
            return self.f_real(x);
        }
        let l = (-x).ceil();
        let y = x + l;
        if y <= 0.0 {
            return Err(Error::NearPole {
                x,
                dist: 0.0,
                value: 0.0,
            });
        }
        let mut r = self.unit(y)?;
        // rough slope dw/dx along the orbit, f' being of order one on (0,1)
        let mut slope = 1.0;
        for _ in 0..l as u64 {
            let w = r.value;
            if w.abs() / slope < POLE_GUARD || w.abs() <= r.abs_err_est.max(PSI_POLE_TOL) {
                return Err(Error::NearPole {
                    x,
                    dist: w.abs() / slope,
                    value: w,
                });
            }
            let d = 1.0 + 1.0 / (w * w);
            r.value = w - 1.0 / w;
            r.abs_err_est = r.abs_err_est * d + f64::EPSILON * r.value.abs();
            slope *= d;
        }
        r.method = EvalMethod::PsiExtension;
        Ok(r)
    }

    /// F(x) = 1/f(x+1).
    pub fn big_f_real(&self, x: f64) -> Result<EvalResult> {
        let r = self.f_extended(x + 1.0)?;
        if r.value == 0.0 {
            return Err(Error::Pole { x });
        }
        Ok(EvalResult {
            value: 1.0 / r.value,
            abs_err_est: r.abs_err_est / (r.value * r.value),
            method: r.method,
        })
    }
}

/// f on (-1, ∞) with a freshly built evaluator.
pub fn f_real(x: f64) -> Result<EvalResult> {
    FEvaluator::default().f_real(x)
}

pub fn f_extended(x: f64) -> Result<EvalResult> {
    FEvaluator::default().f_extended(x)
}

#[allow(non_snake_case)]
pub fn F_real(x: f64) -> Result<EvalResult> {
    FEvaluator::default().big_f_real(x)
}

// ---------------------------------------------------------------------------
// partial fractions

const COMPLEX_TERMS: usize = 48;

// Σ_{l≥1} [1/(l-ξ) - 1/(l-ξ+z)]: direct up to L, then Euler-Maclaurin.
fn complex_term(xi: f64, z: Complex64) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for l in 1..=COMPLEX_TERMS {
        let a = l as f64 - xi;
        s += 1.0 / a - 1.0 / (z + a);
    }
    let a = COMPLEX_TERMS as f64 - xi;
    let b = z + a;
    // h(x) = 1/a - 1/b, h^(k) = (-1)^k k! (a^{-k-1} - b^{-k-1})
    let h = |k: i32, fact: f64| -> Complex64 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        (Complex64::new(a.powi(-k - 1), 0.0) - b.powi(-k - 1)) * (sign * fact)
    };
    let integral = (b / a).ln();
    s + integral - h(0, 1.0) * 0.5 - h(1, 1.0) / 12.0 + h(3, 6.0) / 720.0 - h(5, 120.0) / 30240.0
}

/// Result of a partial-fraction evaluation at a complex point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralValue {
    pub value: Complex64,
    pub abs_err_est: f64,
    pub method: EvalMethod,
}

impl SpectralValue {
    pub fn real(&self) -> EvalResult {
        EvalResult {
            value: self.value.re,
            abs_err_est: self.abs_err_est,
            method: self.method,
        }
    }
}

/// f from the spectrum ledger: digamma form on the real axis (any real z
/// off the poles), partial fractions for Re z > -1 off the axis.
pub fn f_spectral(z: Complex64, ledger: &SpectrumLedger) -> Result<SpectralValue> {
    if ledger.p_max == 0 {
        return Err(Error::Domain("ledger has no shells".into()));
    }
    let p = ledger.p_max as f64;
    // without tail atoms: Ψ(u+z) - Ψ(u) ≤ |z|/(u-2) for u ≥ p+2
    let trunc = |zr: f64| {
        if ledger.tail.is_empty() {
            ledger.tail_deficit.max(0.0) * zr * (p + 2.0) / p
        } else {
            0.0
        }
    };
    let method = EvalMethod::SpectralPartialFraction;
    if z.im == 0.0 {
        let x = z.re;
        let xis = std::iter::once(0.0).chain(ledger.entries().map(|e| e.xi));
        for xi in xis {
            let a = x + 1.0 - xi;
            if a <= 0.5 && (a - a.round()).abs() < POLE_GUARD {
                return Err(Error::NearPole {
                    x,
                    dist: (a - a.round()).abs(),
                    value: a,
                });
            }
        }
        let mut s = CompensatedSum::new();
        let mut err = CompensatedSum::new();
        let g0 = digamma(x + 1.0)? + EULER_GAMMA;
        s.add(ledger.rho0 * g0);
        err.add(g0.abs() * ledger.rho0_err);
        for e in ledger.entries() {
            let g = digamma(x + 1.0 - e.xi)? - digamma(1.0 - e.xi)?;
            s.add(e.rho * g);
            let dxi = e.rho * (trigamma(1.0 - e.xi)? - trigamma(x + 1.0 - e.xi)?);
            err.add((g.abs() + dxi.abs()) * e.err);
        }
        let mut tail = CompensatedSum::new();
        for a in &ledger.tail {
            tail.add(a.rho * (digamma(x + 1.0 - a.xi)? - digamma(1.0 - a.xi)?));
        }
        let t = tail.value();
        s.add(t);
        err.add(t.abs() * ledger.tail_rel_err + trunc(x.abs()));
        return Ok(SpectralValue {
            value: Complex64::new(s.value(), 0.0),
            abs_err_est: err.value(),
            method,
        });
    }
    if !(z.re > -1.0) {
        return Err(Error::Domain(format!(
            "complex evaluation needs Re z > -1, got {z}"
        )));
    }
    let t0 = complex_term(0.0, z);
    let mut s = t0 * ledger.rho0;
    let mut err = t0.norm() * ledger.rho0_err;
    for e in ledger.entries() {
        let t = complex_term(e.xi, z);
        s += t * e.rho;
        // ∂/∂ρ and ∂/∂ξ are both bounded by |t| + |z| Ψ' terms; use 2|t|
        err += 2.0 * t.norm() * e.err;
    }
    let mut tail = Complex64::new(0.0, 0.0);
    for a in &ledger.tail {
        tail += complex_term(a.xi, z) * a.rho;
    }
    s += tail;
    err += tail.norm() * ledger.tail_rel_err + trunc(z.norm());
    Ok(SpectralValue {
        value: s,
        abs_err_est: err,
        method,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCoeffs {
    /// a_1..a_{n_max}: F(z) = 1 + Σ a_n z^n
    pub a: Vec<f64>,
    /// b_1..b_{n_max}: f(z) = Σ b_n z^n
    pub b: Vec<f64>,
    /// bounds on the contribution of the dropped shells
    pub a_tail: Vec<f64>,
    pub b_tail: Vec<f64>,
}

/// Taylor coefficients of F and f at 0 from the explicit shells.
pub fn power_coeffs(n_max: usize, ledger: &SpectrumLedger) -> Result<PowerCoeffs> {
    if n_max < 1 {
        return Err(Error::Domain("n_max must be at least 1".into()));
    }
    let p = ledger.p_max as f64;
    let deficit = ledger.tail_deficit.max(0.0);
    let mut out = PowerCoeffs {
        a: Vec::with_capacity(n_max),
        b: Vec::with_capacity(n_max),
        a_tail: Vec::with_capacity(n_max),
        b_tail: Vec::with_capacity(n_max),
    };
    for n in 1..=n_max {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let s = (n + 1) as u32;
        let mut a = CompensatedSum::new();
        let mut b = CompensatedSum::new();
        a.add(ledger.rho0);
        b.add(ledger.rho0 * hurwitz_zeta_shifted(s, 0.0)?);
        for e in ledger.entries() {
            let u = 1.0 - e.xi;
            a.add(e.rho * u.powi(-(n as i32) - 1));
            b.add(e.rho * hurwitz_zeta_shifted(s, -e.xi)?);
        }
        out.a.push(sign * a.value());
        out.b.push(-sign * b.value());
        // dropped atoms have u = 1 - ξ ≥ p+2 and Σ ρ/u = deficit
        out.a_tail.push(deficit * (p + 2.0).powi(-(n as i32)));
        out.b_tail
            .push(deficit * (p + 2.0) / (n as f64 * (p + 1.0).powi(n as i32)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_endpoints() {
        let r = f_unit(1.0, 1000).unwrap();
        assert_eq!(r.value, 1.0);
        let r = f_unit(1e-9, 1000).unwrap();
        assert!(r.value.abs() < 1e-8);
        assert!(f_unit(0.0, 10).is_err());
        assert!(f_unit(0.5, 1).is_err());
    }

    #[test]
    fn bracket_orders() {
        let t = LambdaTable::new(5001);
        for &s in &[0.1, 0.5, 0.9] {
            let b = f_unit_bracket(&t, s, 5000).unwrap();
            let v = f_unit_with(&t, s, 5000).unwrap();
            assert!(b.lower <= b.upper);
            assert_eq!(b.lower, v.value);
            assert!(b.upper - b.lower <= v.abs_err_est);
        }
    }

    #[test]
    fn complex_term_matches_digamma_on_axis() {
        for &xi in &[0.0, -1.46, -7.3] {
            for &x in &[0.3, 2.0, 11.5] {
                let t = complex_term(xi, Complex64::new(x, 0.0));
                let d = digamma(x + 1.0 - xi).unwrap() - digamma(1.0 - xi).unwrap();
                assert!((t.re - d).abs() < 1e-12, "{xi} {x}: {} vs {d}", t.re);
                assert_eq!(t.im, 0.0);
            }
        }
    }

    #[test]
    fn real_line_basics() {
        let ev = FEvaluator::new(1 << 14);
        assert_eq!(ev.f_real(1.0).unwrap().value, 1.0);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((ev.f_real(2.0).unwrap().value - phi).abs() < 1e-14);
        assert_eq!(ev.f_real(0.0).unwrap().value, 0.0);
        assert!(ev.f_real(-1.0).is_err());
        assert!(matches!(ev.f_extended(-2.0), Err(Error::NearPole { .. })));
    }
}
