//! The map T on moment sequences and its lift to measures of the form
//! (ρ₀ + Σ ρ t^{-ξ}) dt on (0,1).

use crate::error::{Error, Result};
use crate::numeric::{nnls, Chebyshev, CompensatedSum};
use crate::par::{self, Exec};
use crate::seqcore::{fixed_point_moments, MomentSequence};
use crate::specfun::{digamma, trigamma, EULER_GAMMA};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Offset from each pole at which a bracket starts.
pub const BRACKET_INSET: f64 = 1e-9;
/// Bisection stops once the bracket is this narrow.
pub const BISECT_WIDTH: f64 = 1e-13;
pub const DEFAULT_TAIL_TOL: f64 = 0.5;
/// Poles with smaller weight may swallow their neighbouring zero.
pub const UNRESOLVED_WEIGHT: f64 = 1e-9;

const WINDOW_PAD: f64 = 0.5;
const TAIL_NODES: usize = 30;
const TAIL_U_MAX: f64 = 1e7;

// ---------------------------------------------------------------------------
// sequences

/// b_n = 1/(a_0 + ... + a_n).
pub fn t_map(a: &MomentSequence) -> Result<MomentSequence> {
    let mut s = CompensatedSum::new();
    let mut out = Vec::with_capacity(a.len());
    for (n, &v) in a.values().iter().enumerate() {
        s.add(v);
        let total = s.value();
        if total <= 0.0 {
            return Err(Error::Domain(format!("partial sum {total} at n = {n}")));
        }
        out.push(1.0 / total);
    }
    MomentSequence::new(out)
}

/// c_0 = 1, c_n = 1/b_n - 1/b_{n-1}.
pub fn t_inverse(b: &MomentSequence) -> Result<MomentSequence> {
    let v = b.values();
    if let Some((n, x)) = v.iter().enumerate().find(|(_, x)| **x <= 0.0) {
        return Err(Error::Domain(format!("b_{n} = {x} is not positive")));
    }
    let mut out = Vec::with_capacity(v.len());
    out.push(1.0);
    for w in v.windows(2) {
        out.push(1.0 / w[1] - 1.0 / w[0]);
    }
    MomentSequence::new(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// T(a), T²(a), ...
    pub iterates: Vec<MomentSequence>,
    /// sup-distance of each iterate to the fixed point over the prefix
    pub distance_to_fixed: Vec<f64>,
}

pub fn iterate_t(a: &MomentSequence, steps: usize) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::Domain("iterate_t needs at least one step".into()));
    }
    let m = fixed_point_moments(a.len() - 1);
    let mut iterates = Vec::with_capacity(steps);
    let mut distance_to_fixed = Vec::with_capacity(steps);
    let mut cur = a.clone();
    for _ in 0..steps {
        cur = t_map(&cur)?;
        distance_to_fixed.push(cur.sup_distance(&m));
        iterates.push(cur.clone());
    }
    Ok(Trajectory {
        iterates,
        distance_to_fixed,
    })
}

// ---------------------------------------------------------------------------
// spectral measures

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub xi: f64,
    pub rho: f64,
}

/// Density ρ₀ + Σ ρ t^{-ξ} on (0,1), truncated at shell `p_max`.
///
/// `tail` holds a few effective atoms (with ξ below -p_max-1) standing in
/// for the dropped shells when evaluating the Bernstein transform. Moments
/// and densities use the explicit shells only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    pub rho0: f64,
    /// shells[p-1] holds the atoms of shell p sorted by ξ
    pub shells: Vec<Vec<Atom>>,
    pub p_max: usize,
    #[serde(default)]
    pub tail: Vec<Atom>,
    /// 1 - (ρ₀ + Σ ρ/(1-ξ)) over explicit atoms
    pub tail_deficit: f64,
    #[serde(default)]
    pub tail_fit_residual: f64,
    /// zeros closer to a negligible pole than binary64 resolves, left out
    #[serde(default)]
    pub dropped_zeros: usize,
}

impl SpectralMeasure {
    /// Lebesgue measure on (0,1), i.e. T²(δ₀).
    pub fn uniform(p_max: usize) -> Self {
        Self {
            rho0: 1.0,
            shells: vec![Vec::new(); p_max],
            p_max,
            tail: Vec::new(),
            tail_deficit: 0.0,
            tail_fit_residual: 0.0,
            dropped_zeros: 0,
        }
    }

    pub fn from_parts(rho0: f64, shells: Vec<Vec<Atom>>, tail: Vec<Atom>) -> Self {
        let p_max = shells.len();
        let mut mu = Self {
            rho0,
            shells,
            p_max,
            tail,
            tail_deficit: 0.0,
            tail_fit_residual: 0.0,
            dropped_zeros: 0,
        };
        mu.tail_deficit = 1.0 - mu.explicit_mass();
        mu
    }

    pub fn shell(&self, p: usize) -> &[Atom] {
        &self.shells[p - 1]
    }

    pub fn atom_count(&self) -> usize {
        self.shells.iter().map(Vec::len).sum()
    }

    pub fn explicit_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.shells.iter().flatten()
    }

    pub fn explicit_mass(&self) -> f64 {
        let mut s = CompensatedSum::new();
        s.add(self.rho0);
        for a in self.explicit_atoms() {
            s.add(a.rho / (1.0 - a.xi));
        }
        s.value()
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail.iter().map(|a| a.rho / (1.0 - a.xi)).sum()
    }

    pub fn validate(&self, tail_tol: f64) -> Result<()> {
        let bad = |m: String| Err(Error::InvariantViolation(m));
        if !(self.rho0 > 0.0 && self.rho0 <= 1.0) {
            return bad(format!("rho0 = {}", self.rho0));
        }
        if self.shells.len() != self.p_max {
            return bad(format!(
                "{} shells for p_max {}",
                self.shells.len(),
                self.p_max
            ));
        }
        for (i, shell) in self.shells.iter().enumerate() {
            let p = i + 1;
            if shell.len() > 1usize << (p - 1) {
                return bad(format!("shell {p} has {} atoms", shell.len()));
            }
            let (lo, hi) = (-(p as f64) - 1.0, -(p as f64));
            for (j, a) in shell.iter().enumerate() {
                if !(a.xi > lo && a.xi < hi) {
                    return bad(format!("shell {p}: xi = {} outside ({lo}, {hi})", a.xi));
                }
                if !(a.rho > 0.0 && a.rho < p as f64 + 2.0) {
                    return bad(format!("shell {p}: rho = {}", a.rho));
                }
                if j > 0 && shell[j - 1].xi >= a.xi {
                    return bad(format!("shell {p} not strictly increasing"));
                }
            }
        }
        let mass = self.explicit_mass();
        if !(mass >= 1.0 - tail_tol && mass <= 1.0 + 1e-9) {
            return bad(format!("explicit mass {mass} outside [1 - {tail_tol}, 1]"));
        }
        Ok(())
    }

    // all atoms that enter f, with ρ₀ as an atom at ξ = 0
    fn terms(&self) -> impl Iterator<Item = Atom> + '_ {
        std::iter::once(Atom {
            xi: 0.0,
            rho: self.rho0,
        })
        .chain(self.explicit_atoms().copied())
        .chain(self.tail.iter().copied())
    }
}

/// Where a pole of f comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoleOrigin {
    /// the pole at -l
    Integer { l: usize },
    /// ξ_{p,k} - shift
    ShiftedZero { p: usize, k: usize, shift: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub x: f64,
    pub origin: PoleOrigin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleList {
    pub p_max: usize,
    pub poles: Vec<Pole>,
}

impl PoleList {
    /// Poles in (-p_max-1, 0] generated by the explicit atoms of `mu`.
    pub fn build(mu: &SpectralMeasure, p_max: usize) -> Self {
        let mut poles: Vec<Pole> = (1..=p_max)
            .map(|l| Pole {
                x: -(l as f64),
                origin: PoleOrigin::Integer { l },
            })
            .collect();
        for (i, shell) in mu.shells.iter().enumerate() {
            let q = i + 1;
            for (j, a) in shell.iter().enumerate() {
                for shift in 1..=p_max.saturating_sub(q) {
                    poles.push(Pole {
                        x: a.xi - shift as f64,
                        origin: PoleOrigin::ShiftedZero {
                            p: q,
                            k: j + 1,
                            shift,
                        },
                    });
                }
            }
        }
        poles.sort_by(|a, b| a.x.total_cmp(&b.x));
        Self { p_max, poles }
    }

    /// Poles in (-p-1, -p], increasing.
    pub fn shell(&self, p: usize) -> Vec<f64> {
        let (lo, hi) = (-(p as f64) - 1.0, -(p as f64));
        self.poles
            .iter()
            .map(|q| q.x)
            .filter(|&x| x > lo && x <= hi)
            .collect()
    }
}

/// f(z) = ρ₀(Ψ(z+1)+γ) + Σ ρ(Ψ(z+1-ξ) - Ψ(1-ξ)), tail atoms included.
pub fn bernstein_spectral(mu: &SpectralMeasure, z: f64) -> Result<f64> {
    let mut s = CompensatedSum::new();
    s.add(mu.rho0 * (digamma(z + 1.0)? + EULER_GAMMA));
    for a in mu.explicit_atoms().chain(&mu.tail) {
        s.add(a.rho * (digamma(z + 1.0 - a.xi)? - digamma(1.0 - a.xi)?));
    }
    Ok(s.value())
}

pub fn bernstein_spectral_deriv(mu: &SpectralMeasure, z: f64) -> Result<f64> {
    let mut s = CompensatedSum::new();
    for a in mu.terms() {
        s.add(a.rho * trigamma(z + 1.0 - a.xi)?);
    }
    Ok(s.value())
}

/// ρ₀/(n+1) + Σ ρ/(n+1-ξ) over the explicit shells.
pub fn moments_of_spectral(mu: &SpectralMeasure, n: usize) -> f64 {
    let z = n as f64 + 1.0;
    let mut s = CompensatedSum::new();
    s.add(mu.rho0 / z);
    for a in mu.explicit_atoms() {
        s.add(a.rho / (z - a.xi));
    }
    s.value()
}

/// Same as [`moments_of_spectral`] but with the tail atoms added. Diagnostic.
pub fn moments_with_tail(mu: &SpectralMeasure, n: usize) -> f64 {
    let z = n as f64 + 1.0;
    moments_of_spectral(mu, n) + mu.tail.iter().map(|a| a.rho / (z - a.xi)).sum::<f64>()
}

// ---------------------------------------------------------------------------
// one step of the measure iteration

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOptions {
    pub exec: Exec,
    /// fit effective atoms for the shells beyond p_max
    pub fit_tail: bool,
    pub tail_tol: f64,
    /// Chebyshev nodes per shell window
    pub cheb_nodes: usize,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            exec: Exec::default(),
            fit_tail: true,
            tail_tol: DEFAULT_TAIL_TOL,
            cheb_nodes: 32,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Term {
    xi: f64,
    rho: f64,
    base: f64,
}

fn prepare(mu: &SpectralMeasure) -> Result<Vec<Term>> {
    mu.terms()
        .map(|a| {
            Ok(Term {
                xi: a.xi,
                rho: a.rho,
                base: digamma(1.0 - a.xi)?,
            })
        })
        .collect()
}

fn eval_terms(terms: &[Term], z: f64) -> Result<f64> {
    let mut s = CompensatedSum::new();
    for t in terms {
        s.add(t.rho * (digamma(z + 1.0 - t.xi)? - t.base));
    }
    Ok(s.value())
}

// Ψ(x) + Σ_{m=lo}^{hi} 1/(x+m), evaluated without touching the removed poles.
fn digamma_without(x: f64, range: Option<(usize, usize)>) -> Result<f64> {
    let need = (1.0 - x).ceil().max(0.0) as usize;
    let m_top = match range {
        Some((_, hi)) => need.max(hi + 1),
        None => need,
    };
    let mut s = CompensatedSum::new();
    s.add(digamma(x + m_top as f64)?);
    for j in (0..m_top).rev() {
        if let Some((lo, hi)) = range {
            if j >= lo && j <= hi {
                continue;
            }
        }
        s.add(-1.0 / (x + j as f64));
    }
    Ok(s.value())
}

fn near_range(xi: f64, p: usize) -> Option<(usize, usize)> {
    let pf = p as f64;
    let lo = (xi - 1.0 + pf - WINDOW_PAD).ceil().max(0.0);
    let hi = (xi + pf + WINDOW_PAD).floor();
    (hi >= lo).then_some((lo as usize, hi as usize))
}

// f on [-p-1, -p]: Chebyshev fit of the smooth part plus the nearby poles.
struct ShellWindow {
    cheb: Chebyshev,
    near: Vec<(f64, f64)>,
}

impl ShellWindow {
    fn value(&self, z: f64) -> f64 {
        let mut s = CompensatedSum::new();
        s.add(self.cheb.eval(z));
        for &(pole, rho) in &self.near {
            s.add(-rho / (z - pole));
        }
        s.value()
    }

    fn deriv(&self, z: f64) -> f64 {
        let mut s = CompensatedSum::new();
        s.add(self.cheb.eval_deriv(z));
        for &(pole, rho) in &self.near {
            let d = z - pole;
            s.add(rho / (d * d));
        }
        s.value()
    }
}

fn smooth_value(terms: &[Term], p: usize, z: f64) -> Result<f64> {
    let mut s = CompensatedSum::new();
    for t in terms {
        let r = near_range(t.xi, p);
        s.add(t.rho * (digamma_without(z + 1.0 - t.xi, r)? - t.base));
    }
    Ok(s.value())
}

fn build_windows(terms: &[Term], p_max: usize, opts: &StepOptions) -> Result<Vec<ShellWindow>> {
    let n = opts.cheb_nodes.max(8);
    let jobs: Vec<(usize, f64)> = (1..=p_max)
        .flat_map(|p| {
            let (a, b) = (-(p as f64) - 1.0, -(p as f64));
            Chebyshev::nodes(a, b, n).into_iter().map(move |z| (p, z))
        })
        .collect();
    let vals = par::map_slice_with(opts.exec, &jobs, |&(p, z)| smooth_value(terms, p, z));
    let vals: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(p_max);
    for p in 1..=p_max {
        let (a, b) = (-(p as f64) - 1.0, -(p as f64));
        let cheb = Chebyshev::from_values(a, b, &vals[(p - 1) * n..p * n]);
        let mut near = Vec::new();
        for t in terms {
            if let Some((lo, hi)) = near_range(t.xi, p) {
                for m in lo..=hi {
                    near.push((t.xi - (m + 1) as f64, t.rho));
                }
            }
        }
        out.push(ShellWindow { cheb, near });
    }
    Ok(out)
}

// Offsets tried, in order, when stepping away from a pole. A zero can sit
// much closer than BRACKET_INSET to a pole carrying a tiny weight.
fn insets(pole: f64) -> impl Iterator<Item = f64> {
    let ulp = f64::EPSILON * pole.abs().max(1.0);
    [BRACKET_INSET, 1e-10, 1e-11, 1e-12, 1e-13, 1e-14]
        .into_iter()
        .chain([64.0 * ulp, 16.0 * ulp, 4.0 * ulp, ulp])
        .filter(move |&d| d >= ulp)
}

// Root of an increasing function on (lo, hi) with poles at both ends.
fn solve_gap(w: &ShellWindow, p: usize, lo: f64, hi: f64) -> Result<Option<(f64, f64)>> {
    let fail = || Error::BracketFailure { p, a: lo, b: hi };
    // a zero pinned within rounding distance of a negligible pole
    let negligible = |edge: f64| {
        w.near
            .iter()
            .any(|&(q, rho)| q == edge && rho < UNRESOLVED_WEIGHT)
    };
    let Some(mut a) = insets(lo)
        .map(|d| lo + d)
        .find(|&z| z < hi && w.value(z) < 0.0)
    else {
        return if negligible(lo) {
            Ok(None)
        } else {
            Err(fail())
        };
    };
    let Some(mut b) = insets(hi)
        .map(|d| hi - d)
        .find(|&z| z > a && w.value(z) > 0.0)
    else {
        return if negligible(hi) {
            Ok(None)
        } else {
            Err(fail())
        };
    };
    while b - a > BISECT_WIDTH {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let v = w.value(m);
        if v < 0.0 {
            a = m;
        } else if v > 0.0 {
            b = m;
        } else {
            a = m;
            b = m;
        }
    }
    let m = 0.5 * (a + b);
    let d = w.deriv(m);
    let mut z = m - w.value(m) / d;
    if !(z >= a && z <= b) {
        z = m;
    }
    Ok(Some((z, w.deriv(z))))
}

/// One step μ ↦ T̂(μ) on shells 1..=p_max.
pub fn that_step(mu: &SpectralMeasure, p_max: usize) -> Result<SpectralMeasure> {
    that_step_with(mu, p_max, &StepOptions::default())
}

pub fn that_step_with(
    mu: &SpectralMeasure,
    p_max: usize,
    opts: &StepOptions,
) -> Result<SpectralMeasure> {
    if p_max == 0 {
        return Err(Error::Domain("p_max must be at least 1".into()));
    }
    if p_max > mu.p_max + 1 {
        return Err(Error::Domain(format!(
            "cannot resolve shell {p_max} from a measure truncated at {}",
            mu.p_max
        )));
    }
    let terms = prepare(mu)?;
    let windows = build_windows(&terms, p_max, opts)?;
    let poles = PoleList::build(mu, p_max);

    let mut gaps = Vec::new();
    for p in 1..=p_max {
        let mut edges = vec![-(p as f64) - 1.0];
        edges.extend(poles.shell(p));
        for e in edges.windows(2) {
            gaps.push((p, e[0], e[1]));
        }
    }
    let roots = par::map_slice_with(opts.exec, &gaps, |&(p, lo, hi)| {
        solve_gap(&windows[p - 1], p, lo, hi)
    });

    let mut shells: Vec<Vec<Atom>> = vec![Vec::new(); p_max];
    let mut dropped = 0;
    for (&(p, _, _), r) in gaps.iter().zip(roots) {
        let Some((xi, d)) = r? else {
            dropped += 1;
            continue;
        };
        let rho = 1.0 / d;
        if !(rho > 0.0 && rho < p as f64 + 2.0) {
            return Err(Error::InvariantViolation(format!(
                "shell {p}: weight {rho} at xi = {xi}"
            )));
        }
        shells[p - 1].push(Atom { xi, rho });
    }
    for (i, s) in shells.iter().enumerate() {
        let p = i + 1;
        if s.is_empty() || s.len() > 1 << (p - 1) {
            return Err(Error::CountMismatch {
                p,
                found: s.len(),
                expected: 1 << (p - 1),
            });
        }
    }

    let mut d0 = CompensatedSum::new();
    for t in &terms {
        d0.add(t.rho * trigamma(1.0 - t.xi)?);
    }
    let rho0 = 1.0 / d0.value();

    let mut out = SpectralMeasure::from_parts(rho0, shells, Vec::new());
    out.dropped_zeros = dropped;
    if opts.fit_tail {
        let (tail, resid) = fit_tail(&terms, &out, opts.exec)?;
        out.tail = tail;
        out.tail_fit_residual = resid;
    }
    out.validate(opts.tail_tol)?;
    Ok(out)
}

// The new measure has Mellin transform 1/f_mu(z+1). Whatever the explicit
// shells do not account for is matched by effective atoms at fixed
// positions u = 1 - ξ beyond the last shell, with weights from a
// relative non-negative least-squares fit.
fn fit_tail(terms: &[Term], new: &SpectralMeasure, exec: Exec) -> Result<(Vec<Atom>, f64)> {
    let (nlin, ngeo) = (40, 60);
    let mut ws: Vec<f64> = (0..nlin)
        .map(|i| -0.9 + 3.9 * i as f64 / (nlin - 1) as f64)
        .collect();
    let (g0, g1) = (3.5f64.ln(), 1e5f64.ln());
    ws.extend((0..ngeo).map(|i| (g0 + (g1 - g0) * i as f64 / (ngeo - 1) as f64).exp()));

    let fv = par::map_slice_with(exec, &ws, |&w| eval_terms(terms, w + 1.0));
    let mut rows = Vec::new();
    for (&w, f) in ws.iter().zip(fv) {
        let f = f?;
        let z = w + 1.0;
        let mut s = CompensatedSum::new();
        s.add(1.0 / f);
        s.add(-new.rho0 / z);
        for a in new.explicit_atoms() {
            s.add(-a.rho / (z - a.xi));
        }
        let target = s.value();
        if target > 0.0 && target.is_finite() {
            rows.push((w, target));
        }
    }
    // too little signal left to fit anything: no tail, full misfit
    if rows.len() < 10 {
        return Ok((Vec::new(), 1.0));
    }

    let u_min = new.p_max as f64 + 2.5;
    let nn = TAIL_NODES;
    let (l0, l1) = (u_min.ln(), TAIL_U_MAX.ln());
    let us: Vec<f64> = (0..nn)
        .map(|j| (l0 + (l1 - l0) * j as f64 / (nn - 1) as f64).exp())
        .collect();
    let a = DMatrix::from_fn(rows.len(), us.len(), |i, j| {
        1.0 / ((rows[i].0 + us[j]) * rows[i].1)
    });
    let b = DVector::from_element(rows.len(), 1.0);
    let (c, _) = nnls(&a, &b, 5000);
    let resid = (&a * &c - &b).amax();
    let tail = us
        .iter()
        .zip(c.iter())
        .filter(|(_, &c)| c > 0.0)
        .map(|(&u, &c)| Atom {
            xi: 1.0 - u,
            rho: c,
        })
        .collect();
    Ok((tail, resid))
}

/// μ₂ = uniform followed by `steps` applications of T̂. Returns every
/// measure produced, starting with the uniform one.
pub fn iterate_spectral(
    steps: usize,
    p_max: usize,
    opts: &StepOptions,
) -> Result<Vec<SpectralMeasure>> {
    let mut out = vec![SpectralMeasure::uniform(p_max)];
    for _ in 0..steps {
        let next = that_step_with(out.last().unwrap(), p_max, opts)?;
        out.push(next);
    }
    Ok(out)
}
