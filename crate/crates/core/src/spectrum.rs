//! Zeros ξ_{p,k} and weights ρ_{p,k} of f, computed three ways, and the
//! density D(t) = ρ₀ + Σ ρ t^{-ξ} they define.

use crate::analytic::FEvaluator;
use crate::error::{Error, Result};
use crate::numeric::{richardson_observed, CompensatedSum};
use crate::par::{self, Exec};
use crate::psidyn::{level_sets_upto, residue_index, DEFAULT_LEVEL_CAP};
use crate::seqcore::{positive_root, LambdaTable};
use crate::transform::{iterate_spectral, Atom, SpectralMeasure, StepOptions};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA: &str = "momfix-ledger/1";
pub const BISECTION_CAP: usize = 10;
pub const BISECTION_WIDTH: f64 = 1e-9;
pub const DEFAULT_P_MAX: usize = 12;
pub const DEFAULT_STEPS: usize = 16;
/// Shells up to this one come from bisection in the merged ledger.
pub const MERGE_SPLIT: usize = 4;
pub const DENSITY_WARN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerMethod {
    BisectF,
    LimitFormula,
    ThatIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub k: usize,
    pub xi: f64,
    pub rho: f64,
    pub err: f64,
    pub method: LedgerMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerShell {
    pub p: usize,
    pub atoms: Vec<LedgerEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumLedger {
    pub schema: String,
    pub p_max: usize,
    pub rho0: f64,
    pub tail_deficit: f64,
    pub shells: Vec<LedgerShell>,
    #[serde(default)]
    pub rho0_err: f64,
    /// effective atoms for the shells beyond p_max, when known
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tail: Vec<Atom>,
    #[serde(default)]
    pub tail_rel_err: f64,
}

impl SpectrumLedger {
    fn assemble(rho0: f64, rho0_err: f64, shells: Vec<LedgerShell>) -> Self {
        let mut l = Self {
            schema: SCHEMA.to_string(),
            p_max: shells.len(),
            rho0,
            tail_deficit: 0.0,
            shells,
            rho0_err,
            tail: Vec::new(),
            tail_rel_err: 0.0,
        };
        l.tail_deficit = 1.0 - l.explicit_mass();
        l
    }

    pub fn shell(&self, p: usize) -> &[LedgerEntry] {
        &self.shells[p - 1].atoms
    }

    pub fn entries(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.shells.iter().flat_map(|s| s.atoms.iter())
    }

    pub fn explicit_mass(&self) -> f64 {
        let mut s = CompensatedSum::new();
        s.add(self.rho0);
        for e in self.entries() {
            s.add(e.rho / (1.0 - e.xi));
        }
        s.value()
    }

    pub fn max_err(&self, p_upto: usize) -> f64 {
        self.shells
            .iter()
            .take(p_upto)
            .flat_map(|s| s.atoms.iter().map(|e| e.err))
            .fold(self.rho0_err, f64::max)
    }

    pub fn to_measure(&self) -> SpectralMeasure {
        let shells = self
            .shells
            .iter()
            .map(|s| {
                s.atoms
                    .iter()
                    .map(|e| Atom {
                        xi: e.xi,
                        rho: e.rho,
                    })
                    .collect()
            })
            .collect();
        SpectralMeasure::from_parts(self.rho0, shells, self.tail.clone())
    }

    /// Checks the structural invariants: 2^{p-1} increasing zeros per
    /// shell inside (-p-1, -p), positive bounded weights, mass at most one.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvariantViolation(m));
        if self.schema != SCHEMA {
            return bad(format!("unknown schema {}", self.schema));
        }
        if !(self.rho0 > 0.0 && self.rho0 < 1.0) {
            return bad(format!("rho0 = {}", self.rho0));
        }
        if self.shells.len() != self.p_max {
            return bad("shell count differs from p_max".into());
        }
        for (i, s) in self.shells.iter().enumerate() {
            let p = i + 1;
            if s.p != p {
                return bad(format!("shell {i} labelled {}", s.p));
            }
            if s.atoms.len() != 1 << (p - 1) {
                return Err(Error::CountMismatch {
                    p,
                    found: s.atoms.len(),
                    expected: 1 << (p - 1),
                });
            }
            let (lo, hi) = (-(p as f64) - 1.0, -(p as f64));
            for (j, e) in s.atoms.iter().enumerate() {
                if e.k != j + 1 || !(e.xi > lo && e.xi < hi) {
                    return bad(format!("shell {p} entry {j}: k = {}, xi = {}", e.k, e.xi));
                }
                if j > 0 && s.atoms[j - 1].xi >= e.xi {
                    return bad(format!("shell {p} zeros not increasing"));
                }
                if !(e.rho > 0.0 && e.rho < p as f64 + 2.0) {
                    return bad(format!("shell {p}: rho = {}", e.rho));
                }
                if !(e.err >= 0.0) {
                    return bad(format!("shell {p}: err = {}", e.err));
                }
            }
        }
        if self.explicit_mass() > 1.0 + 1e-9 {
            return bad(format!("explicit mass {}", self.explicit_mass()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Domain(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let l: Self = serde_json::from_str(s).map_err(|e| Error::Domain(e.to_string()))?;
        if l.schema != SCHEMA {
            return Err(Error::Domain(format!("unknown schema {}", l.schema)));
        }
        Ok(l)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::Domain(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Domain(e.to_string()))?;
        Self::from_json(&s)
    }
}

fn entries_from(atoms: &[Atom], errs: &[f64], method: LedgerMethod) -> Vec<LedgerEntry> {
    atoms
        .iter()
        .zip(errs)
        .enumerate()
        .map(|(j, (a, &err))| LedgerEntry {
            k: j + 1,
            xi: a.xi,
            rho: a.rho,
            err,
            method,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// bisection on the ψ-orbit extension of f

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectOptions {
    pub exec: Exec,
    /// orbit length of the f evaluator on (0,1]
    pub orbit_len: usize,
}

impl Default for BisectOptions {
    fn default() -> Self {
        Self {
            exec: Exec::default(),
            orbit_len: crate::analytic::DEFAULT_ORBIT_LEN,
        }
    }
}

// five-point derivative at step h and h/2; returns (value, error estimate)
fn derivative(ev: &FEvaluator, x: f64, h: f64) -> Result<(f64, f64)> {
    let f = |t: f64| ev.f_extended_raw(t);
    let stencil = |h: f64| -> Result<(f64, f64)> {
        let (a, b, c, d) = (f(x - 2.0 * h)?, f(x - h)?, f(x + h)?, f(x + 2.0 * h)?);
        let v = (a.value - 8.0 * b.value + 8.0 * c.value - d.value) / (12.0 * h);
        let e = (a.abs_err_est + 8.0 * b.abs_err_est + 8.0 * c.abs_err_est + d.abs_err_est)
            / (12.0 * h);
        Ok((v, e))
    };
    let (d1, e1) = stencil(h)?;
    let (d2, e2) = stencil(0.5 * h)?;
    Ok((d1, (d1 - d2).abs() + e1 + e2))
}

fn bisect_gap(ev: &FEvaluator, p: usize, lo: f64, hi: f64) -> Result<(Atom, f64)> {
    let (mut a, mut b) = (lo, hi);
    let (mut saw_neg, mut saw_pos) = (false, false);
    while b - a > BISECTION_WIDTH {
        let m = 0.5 * (a + b);
        let v = ev.f_extended_raw(m)?.value;
        if v < 0.0 {
            a = m;
            saw_neg = true;
        } else {
            b = m;
            saw_pos = true;
        }
    }
    // every probe on one side means the bracket collapsed onto a pole
    if !(saw_neg && saw_pos) {
        return Err(Error::BracketFailure { p, a: lo, b: hi });
    }
    let xi = 0.5 * (a + b);
    let gap = (xi - lo).min(hi - xi);
    let h = (gap / 4.0).min(2e-3);
    let (d, d_err) = derivative(ev, xi, h)?;
    if !(d > 0.0) {
        return Err(Error::InvariantViolation(format!(
            "non-positive slope {d} at xi = {xi}"
        )));
    }
    let rho = 1.0 / d;
    let f_err = ev.f_extended_raw(xi)?.abs_err_est;
    let xi_err = 0.5 * BISECTION_WIDTH + f_err * rho;
    let rho_err = rho * rho * d_err;
    Ok((Atom { xi, rho }, xi_err.max(rho_err)))
}

/// Zeros of f located by bisecting the ψ-orbit extension between the
/// generated poles; weights from finite differences.
pub fn ledger_by_bisection(p_max: usize) -> Result<SpectrumLedger> {
    ledger_by_bisection_with(p_max, &BisectOptions::default())
}

pub fn ledger_by_bisection_with(p_max: usize, opts: &BisectOptions) -> Result<SpectrumLedger> {
    if p_max == 0 {
        return Err(Error::Domain("p_max must be at least 1".into()));
    }
    if p_max > BISECTION_CAP {
        return Err(Error::PrecisionCap {
            what: "p_max for bisection",
            value: p_max,
            cap: BISECTION_CAP,
        });
    }
    let ev = FEvaluator::new(opts.orbit_len);
    let mut zeros: Vec<Vec<f64>> = Vec::new();
    let mut shells = Vec::with_capacity(p_max);
    for p in 1..=p_max {
        let mut poles = vec![-(p as f64)];
        for (i, z) in zeros.iter().enumerate() {
            let shift = (p - i - 1) as f64;
            poles.extend(z.iter().map(|x| x - shift));
        }
        poles.sort_by(f64::total_cmp);
        let mut edges = vec![-(p as f64) - 1.0];
        edges.extend(poles);
        let gaps: Vec<(f64, f64)> = edges.windows(2).map(|w| (w[0], w[1])).collect();
        let expected = 1 << (p - 1);
        if gaps.len() != expected {
            return Err(Error::CountMismatch {
                p,
                found: gaps.len(),
                expected,
            });
        }
        let found = par::map_slice_with(opts.exec, &gaps, |&(lo, hi)| bisect_gap(&ev, p, lo, hi));
        let found: Vec<(Atom, f64)> = found.into_iter().collect::<Result<_>>()?;
        let atoms: Vec<Atom> = found.iter().map(|x| x.0).collect();
        let errs: Vec<f64> = found.iter().map(|x| x.1).collect();
        zeros.push(atoms.iter().map(|a| a.xi).collect());
        shells.push(LedgerShell {
            p,
            atoms: entries_from(&atoms, &errs, LedgerMethod::BisectF),
        });
    }
    let (d0, d0_err) = derivative(&ev, 0.0, 2e-3)?;
    let rho0 = 1.0 / d0;
    Ok(SpectrumLedger::assemble(rho0, rho0 * rho0 * d0_err, shells))
}

// ---------------------------------------------------------------------------
// limit formulas

#[derive(Debug, Clone, Copy, Default)]
struct LimitSample {
    xi: f64,
    log_rho: f64,
}

/// The limit formulas for ξ and ρ evaluated at N, N/2, N/4 and extrapolated
/// with the observed convergence ratio; err = |value(N) - value(N/2)|.
pub fn ledger_by_limit(p_max: usize, n: usize) -> Result<SpectrumLedger> {
    ledger_by_limit_with(p_max, n, Exec::default())
}

pub fn ledger_by_limit_with(p_max: usize, n: usize, exec: Exec) -> Result<SpectrumLedger> {
    if n < 1000 {
        return Err(Error::Domain(format!("N = {n} below 1000")));
    }
    if p_max == 0 {
        return Err(Error::Domain("p_max must be at least 1".into()));
    }
    if p_max > DEFAULT_LEVEL_CAP {
        return Err(Error::CapExceeded {
            n: p_max,
            cap: DEFAULT_LEVEL_CAP,
        });
    }
    let levels = level_sets_upto(p_max)?;
    let lam = LambdaTable::new(n);
    let marks = [n, n / 2, n / 4];

    // ρ₀ from the λ products
    let mut lq = CompensatedSum::new();
    let mut rho0_at = [0.0; 3];
    for l in 1..=n {
        let x = lam.get(l);
        lq.add((1.0 / (x * x)).ln_1p());
        for (i, &m) in marks.iter().enumerate() {
            if l == m {
                rho0_at[i] = (2.0 * m as f64).sqrt() * (-lq.value()).exp();
            }
        }
    }
    let (rho0, _) = richardson_observed(rho0_at[0], rho0_at[1], rho0_at[2]);
    let rho0_err = (rho0_at[0] - rho0_at[1]).abs();

    let mut cells = Vec::new();
    for p in 1..=p_max {
        for k in 1..=(1usize << (p - 1)) {
            cells.push((p, k));
        }
    }
    let samples = par::map_slice_with(exec, &cells, |&(p, k)| {
        let alpha = levels[p].alpha(k);
        let mut s1 = CompensatedSum::new();
        let mut lp = CompensatedSum::new();
        for (l, level) in levels.iter().enumerate().take(p + 1).skip(1) {
            let a = level.alpha(residue_index(k as u64, l as u32) as usize);
            s1.add(1.0 / a);
            lp.add((1.0 / (a * a)).ln_1p());
        }
        let mut s2 = CompensatedSum::new();
        let mut lq = CompensatedSum::new();
        let mut out = [LimitSample::default(); 3];
        let mut x = alpha;
        for l in 1..=n {
            x = positive_root(x);
            lq.add((1.0 / (x * x)).ln_1p());
            for (i, &m) in marks.iter().enumerate() {
                if l + p == m {
                    let mut y = CompensatedSum::new();
                    y.add(s1.value());
                    y.add(s2.value() + 1.0 / x);
                    y.add(-lam.get(m));
                    out[i].xi = (2.0 * m as f64).sqrt() * y.value();
                }
                if l == m {
                    out[i].log_rho = 0.5 * (2.0 * m as f64).ln() - lp.value() - lq.value();
                }
            }
            s2.add(1.0 / x);
        }
        out
    });

    let mut shells: Vec<LedgerShell> = (1..=p_max)
        .map(|p| LedgerShell {
            p,
            atoms: Vec::new(),
        })
        .collect();
    for (&(p, k), s) in cells.iter().zip(samples) {
        let (xi, _) = richardson_observed(s[0].xi, s[1].xi, s[2].xi);
        let r: Vec<f64> = s.iter().map(|v| v.log_rho.exp()).collect();
        let (rho, _) = richardson_observed(r[0], r[1], r[2]);
        let err = (s[0].xi - s[1].xi).abs().max((r[0] - r[1]).abs());
        shells[p - 1].atoms.push(LedgerEntry {
            k,
            xi,
            rho,
            err,
            method: LedgerMethod::LimitFormula,
        });
    }
    Ok(SpectrumLedger::assemble(rho0, rho0_err, shells))
}

// ---------------------------------------------------------------------------
// iteration of the measure map

// per-atom change between two measures, matching each atom with the
// nearest one of the same shell in the other measure
fn movement(cur: &SpectralMeasure, prev: &SpectralMeasure, p: usize) -> Vec<f64> {
    let old = prev.shell(p);
    cur.shell(p)
        .iter()
        .map(|a| {
            old.iter()
                .map(|b| ((a.xi - b.xi).abs(), (a.rho - b.rho).abs()))
                .min_by(|x, y| x.0.total_cmp(&y.0))
                .map(|(dx, dr)| dx.max(dr))
                .unwrap_or(f64::INFINITY)
        })
        .collect()
}

/// Truncation error ≈ this many times the change from p_max - 1 to p_max
/// (geometric convergence in p_max with ratio at most 2/3).
const TRUNC_FACTOR: f64 = 2.0;

/// μ₂ = uniform followed by `steps` applications of T̂; the final measure
/// read as a ledger. err = largest movement over the last two steps plus
/// the truncation sensitivity against a run with p_max - 1.
pub fn ledger_by_iteration(p_max: usize, steps: usize) -> Result<SpectrumLedger> {
    ledger_by_iteration_with(p_max, steps, &StepOptions::default())
}

pub fn ledger_by_iteration_with(
    p_max: usize,
    steps: usize,
    opts: &StepOptions,
) -> Result<SpectrumLedger> {
    if steps < 4 || !steps.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "steps must be even and >= 4, got {steps}"
        )));
    }
    let ms = iterate_spectral(steps, p_max, opts)?;
    let cur = &ms[steps];
    let (p1, p2) = (&ms[steps - 1], &ms[steps - 2]);
    // same run one shell shorter, to see how much the truncation moves things
    let lower = if p_max >= 2 {
        Some(
            iterate_spectral(steps, p_max - 1, opts)?
                .pop()
                .expect("nonempty"),
        )
    } else {
        None
    };
    let mut last_trunc = 0.0;
    let mut shells = Vec::with_capacity(p_max);
    for p in 1..=p_max {
        let n = cur.shell(p).len();
        if n != 1 << (p - 1) {
            return Err(Error::CountMismatch {
                p,
                found: n,
                expected: 1 << (p - 1),
            });
        }
        let e1 = movement(cur, p1, p);
        let e2 = movement(p1, p2, p);
        // p1 may have fewer atoms; fall back to e1 for unmatched ones
        let trunc = match &lower {
            Some(low) if p < p_max => movement(cur, low, p)
                .iter()
                .map(|d| TRUNC_FACTOR * d)
                .collect(),
            _ => vec![last_trunc; n],
        };
        last_trunc = 2.0 * trunc.iter().copied().fold(0.0, f64::max);
        let errs: Vec<f64> = (0..n)
            .map(|j| {
                let m2 = e2.get(j).copied().unwrap_or(e1[j]);
                e1[j].max(m2) + trunc[j]
            })
            .collect();
        shells.push(LedgerShell {
            p,
            atoms: entries_from(cur.shell(p), &errs, LedgerMethod::ThatIteration),
        });
    }
    let rho0_err = (cur.rho0 - p1.rho0).abs().max((p1.rho0 - p2.rho0).abs())
        + lower
            .as_ref()
            .map_or(0.0, |low| TRUNC_FACTOR * (cur.rho0 - low.rho0).abs());
    let mut l = SpectrumLedger::assemble(cur.rho0, rho0_err, shells);
    l.tail = cur.tail.clone();
    let (t0, t1) = (cur.tail_mass(), p1.tail_mass());
    l.tail_rel_err = if t0 > 0.0 {
        (t0 - t1).abs() / t0 + cur.tail_fit_residual
    } else {
        0.0
    };
    Ok(l)
}

/// Bisection for shells up to [`MERGE_SPLIT`], iteration above.
pub fn ledger_merged(p_max: usize, steps: usize) -> Result<SpectrumLedger> {
    ledger_merged_with(
        p_max,
        steps,
        &BisectOptions::default(),
        &StepOptions::default(),
    )
}

pub fn ledger_merged_with(
    p_max: usize,
    steps: usize,
    bopts: &BisectOptions,
    sopts: &StepOptions,
) -> Result<SpectrumLedger> {
    let it = ledger_by_iteration_with(p_max, steps, sopts)?;
    let split = p_max.min(MERGE_SPLIT);
    let bi = ledger_by_bisection_with(split, bopts)?;
    let mut shells = bi.shells.clone();
    shells.extend(it.shells[split..].iter().cloned());
    let mut l = SpectrumLedger::assemble(bi.rho0, bi.rho0_err, shells);
    l.tail = it.tail;
    l.tail_rel_err = it.tail_rel_err;
    Ok(l)
}

// ---------------------------------------------------------------------------
// density and moments

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub t: f64,
    pub d: f64,
    /// bound on the contribution of the shells beyond p_max
    pub tail_est: f64,
    /// set when tail_est exceeds [`DENSITY_WARN`]
    pub warning: bool,
}

/// D(t) = ρ₀ + Σ ρ t^{-ξ} over the explicit shells.
pub fn density(ledger: &SpectrumLedger, t: f64) -> Result<DensityPoint> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(format!("t = {t} outside (0, 1)")));
    }
    let lt = t.ln();
    let mut s = CompensatedSum::new();
    s.add(ledger.rho0);
    for e in ledger.entries() {
        s.add(e.rho * (-e.xi * lt).exp());
    }
    // a dropped atom at u = 1 - ξ ≥ p_max + 2 contributes
    // (ρ/u)·u t^{u-1}, and Σ ρ/u is the deficit
    let u0 = ledger.p_max as f64 + 2.0;
    let u_star = -1.0 / lt;
    let g = if u_star <= u0 {
        u0 * t.powf(u0 - 1.0)
    } else {
        u_star * (-1.0f64).exp() / t
    };
    let tail_est = ledger.tail_deficit.max(0.0) * g;
    Ok(DensityPoint {
        t,
        d: s.value(),
        tail_est,
        warning: tail_est > DENSITY_WARN,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub samples: Vec<(f64, f64)>,
    /// (t, D(t) √(2π(1-t)))
    pub asymptotic_ratio: Vec<(f64, f64)>,
    pub tail_est: Vec<f64>,
}

pub fn density_profile(ledger: &SpectrumLedger, ts: &[f64]) -> Result<DensityProfile> {
    let mut out = DensityProfile {
        samples: Vec::with_capacity(ts.len()),
        asymptotic_ratio: Vec::with_capacity(ts.len()),
        tail_est: Vec::with_capacity(ts.len()),
    };
    for &t in ts {
        let d = density(ledger, t)?;
        out.samples.push((t, d.d));
        out.asymptotic_ratio
            .push((t, d.d * (2.0 * std::f64::consts::PI * (1.0 - t)).sqrt()));
        out.tail_est.push(d.tail_est);
    }
    Ok(out)
}

/// ρ₀/(n+1) + Σ ρ/(n+1-ξ) over the explicit shells.
pub fn reconstruct_moment(ledger: &SpectrumLedger, n: usize) -> f64 {
    let z = n as f64 + 1.0;
    let mut s = CompensatedSum::new();
    s.add(ledger.rho0 / z);
    for e in ledger.entries() {
        s.add(e.rho / (z - e.xi));
    }
    s.value()
}

/// Bound on what the dropped shells add to the n-th moment: each dropped
/// atom contributes (ρ/u)·u/(n+u) ≤ ρ/u.
pub fn reconstruct_moment_tail(ledger: &SpectrumLedger, _n: usize) -> f64 {
    ledger.tail_deficit.max(0.0)
}

/// As [`reconstruct_moment`] with the fitted tail atoms added. Diagnostic.
pub fn reconstruct_moment_with_tail(ledger: &SpectrumLedger, n: usize) -> f64 {
    let z = n as f64 + 1.0;
    reconstruct_moment(ledger, n) + ledger.tail.iter().map(|a| a.rho / (z - a.xi)).sum::<f64>()
}
