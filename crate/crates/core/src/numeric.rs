//! Small numerical building blocks: compensated sums, Chebyshev fits,
//! non-negative least squares and Richardson extrapolation.

use nalgebra::{DMatrix, DVector};

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = CompensatedSum::new();
    for v in it {
        s.add(v);
    }
    s.value()
}

/// Error-free transformation a + b = s + e.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Chebyshev interpolant on [a, b].
#[derive(Debug, Clone)]
pub struct Chebyshev {
    a: f64,
    b: f64,
    coeffs: Vec<f64>,
    deriv: Vec<f64>,
}

impl Chebyshev {
    pub fn nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|j| {
                let t = (std::f64::consts::PI * (j as f64 + 0.5) / n as f64).cos();
                0.5 * (a + b) + 0.5 * (b - a) * t
            })
            .collect()
    }

    /// Builds the interpolant from values at `Chebyshev::nodes(a, b, n)`.
    pub fn from_values(a: f64, b: f64, values: &[f64]) -> Self {
        let n = values.len();
        let mut coeffs = vec![0.0; n];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, v) in values.iter().enumerate() {
                s += v * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / n as f64).cos();
            }
            *c = 2.0 * s / n as f64;
        }
        coeffs[0] *= 0.5;
        // derivative series: c'_{k-1} = c'_{k+1} + 2k c_k, then scale
        let mut deriv = vec![0.0; n.max(1)];
        if n > 1 {
            let mut d = vec![0.0; n + 1];
            for k in (1..n).rev() {
                d[k - 1] = d[k + 1] + 2.0 * k as f64 * coeffs[k];
            }
            d[0] *= 0.5;
            let scale = 2.0 / (b - a);
            for k in 0..n {
                deriv[k] = d[k] * scale;
            }
        }
        Self {
            a,
            b,
            coeffs,
            deriv,
        }
    }

    fn clenshaw(c: &[f64], t: f64) -> f64 {
        let (mut b1, mut b2) = (0.0, 0.0);
        for &ck in c.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + ck;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + c[0]
    }

    #[inline]
    fn to_unit(&self, x: f64) -> f64 {
        (2.0 * x - self.a - self.b) / (self.b - self.a)
    }

    pub fn eval(&self, x: f64) -> f64 {
        Self::clenshaw(&self.coeffs, self.to_unit(x))
    }

    pub fn eval_deriv(&self, x: f64) -> f64 {
        Self::clenshaw(&self.deriv, self.to_unit(x))
    }

    /// Size of the trailing coefficients, a rough accuracy indicator.
    pub fn tail_magnitude(&self) -> f64 {
        let n = self.coeffs.len();
        self.coeffs[n.saturating_sub(3)..]
            .iter()
            .map(|c| c.abs())
            .fold(0.0, f64::max)
    }
}

/// Lawson-Hanson non-negative least squares: min |Ax - b| subject to x >= 0.
/// Returns the solution and the residual norm.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, max_iter: usize) -> (DVector<f64>, f64) {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.norm() * b.norm().max(1.0);

    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let mut s = DVector::zeros(n);
        if idx.is_empty() {
            return s;
        }
        let sub = a.select_columns(&idx);
        let svd = sub.svd(true, true);
        let sol = svd
            .solve(b, 1e-15)
            .unwrap_or_else(|_| DVector::zeros(idx.len()));
        for (i, &j) in idx.iter().enumerate() {
            s[j] = sol[i];
        }
        s
    };

    for _ in 0..max_iter {
        let w = a.transpose() * (b - a * &x);
        let mut best = None;
        for j in 0..n {
            if !passive[j] && w[j] > tol && best.is_none_or(|(_, v)| w[j] > v) {
                best = Some((j, w[j]));
            }
        }
        let Some((t, _)) = best else { break };
        passive[t] = true;

        let mut guard = 0;
        loop {
            guard += 1;
            let s = solve_passive(&passive);
            let bad: Vec<usize> = (0..n).filter(|&j| passive[j] && s[j] <= 0.0).collect();
            if bad.is_empty() || guard > 3 * n {
                x = s.map(|v| v.max(0.0));
                break;
            }
            let mut alpha = f64::INFINITY;
            for &j in &bad {
                let d = x[j] - s[j];
                if d > 0.0 {
                    alpha = alpha.min(x[j] / d);
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            x = &x + (&s - &x) * alpha;
            for j in 0..n {
                if passive[j] && x[j] <= 1e-300 {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
    let res = (b - a * &x).norm();
    (x, res)
}

/// Extrapolates v(N), v(N/2), v(N/4) using the observed convergence ratio.
/// Returns (value, |v(N) - v(N/2)|).
pub fn richardson_observed(v_n: f64, v_half: f64, v_quarter: f64) -> (f64, f64) {
    let d1 = v_n - v_half;
    let d2 = v_half - v_quarter;
    let err = d1.abs();
    if d1 == 0.0 {
        return (v_n, 0.0);
    }
    let r = d2 / d1;
    if r.is_finite() && r > 1.2 && r < 64.0 {
        (v_n + d1 / (r - 1.0), err)
    } else {
        (v_n, err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_beats_naive() {
        let mut v = vec![1.0];
        v.extend(std::iter::repeat_n(1e-16, 10_000));
        let c = compensated_sum(v.iter().copied());
        assert!((c - (1.0 + 1e-12)).abs() < 1e-18);
        let (s, e) = two_sum(1.0, 1e-17);
        assert_eq!(s, 1.0);
        assert_eq!(e, 1e-17);
    }

    #[test]
    fn chebyshev_exp() {
        let (a, b) = (-3.0, -2.0);
        let nodes = Chebyshev::nodes(a, b, 24);
        let vals: Vec<f64> = nodes.iter().map(|x| x.exp()).collect();
        let c = Chebyshev::from_values(a, b, &vals);
        for i in 0..=50 {
            let x = a + (b - a) * i as f64 / 50.0;
            assert!((c.eval(x) - x.exp()).abs() < 1e-15);
            let e = (c.eval_deriv(x) - x.exp()).abs();
            assert!(e < 5e-13, "{x} {e}");
        }
        assert!(c.tail_magnitude() < 1e-15);
    }

    #[test]
    fn nnls_recovers_nonnegative_solution() {
        let a = DMatrix::from_fn(20, 4, |i, j| 1.0 / (i as f64 + j as f64 + 1.0));
        let xt = DVector::from_vec(vec![1.0, 0.0, 2.5, 0.0]);
        let b = &a * &xt;
        let (x, r) = nnls(&a, &b, 100);
        assert!(r < 1e-10);
        assert!(x.iter().all(|&v| v >= 0.0));
        assert!((&a * &x - &b).norm() < 1e-10);
    }

    #[test]
    fn nnls_clips_negative_direction() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![2.0, -1.0, 0.0]);
        let (x, _) = nnls(&a, &b, 50);
        assert!((x[0] - 2.0).abs() < 1e-14);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn richardson_first_order() {
        let v = |n: f64| 2.0 + 3.0 / n;
        let (e, err) = richardson_observed(v(1000.0), v(500.0), v(250.0));
        assert!((e - 2.0).abs() < 1e-12);
        assert!((err - 0.003).abs() < 1e-12);
    }
}
