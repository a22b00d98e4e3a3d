use momfix::seqcore::{fixed_point_moments, MomentSequence};
use momfix::specfun::{digamma, harmonic, trigamma, EULER_GAMMA};
use momfix::transform::*;
use rand::{Rng, SeedableRng};
use std::sync::OnceLock;

// 30-digit roots of Ψ(1+x) = -γ in the first two shells
const MU3_XI: [f64; 2] = [-1.567_353_753_101_655_3, -2.628_460_873_290_122_9];

fn delta0(len: usize) -> MomentSequence {
    let mut v = vec![0.0; len];
    v[0] = 1.0;
    MomentSequence::new(v).unwrap()
}

/// Moments of a random discrete probability measure on [0, 1].
fn random_hausdorff(rng: &mut impl Rng, len: usize) -> (Vec<(f64, f64)>, MomentSequence) {
    let k = rng.random_range(1..6);
    let mut atoms: Vec<(f64, f64)> = (0..k)
        .map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.1..1.0)))
        .collect();
    let w: f64 = atoms.iter().map(|a| a.1).sum();
    atoms.iter_mut().for_each(|a| a.1 /= w);
    (atoms.clone(), moments_of(&atoms, len))
}

fn moments_of(atoms: &[(f64, f64)], len: usize) -> MomentSequence {
    let v = (0..len)
        .map(|n| {
            if n == 0 {
                1.0
            } else {
                atoms.iter().map(|(x, w)| w * x.powi(n as i32)).sum()
            }
        })
        .collect();
    MomentSequence::new(v).unwrap()
}

// μ_2 .. μ_6 at p_max = 12
fn measures_p12() -> &'static [SpectralMeasure] {
    static M: OnceLock<Vec<SpectralMeasure>> = OnceLock::new();
    M.get_or_init(|| iterate_spectral(4, 12, &StepOptions::default()).unwrap())
}

#[test]
fn t_map_examples() {
    let ones = t_map(&delta0(30)).unwrap();
    assert!(ones.values().iter().all(|&v| v == 1.0));
    let h = t_map(&ones).unwrap();
    for (k, v) in h.values().iter().enumerate() {
        assert!((v - 1.0 / (k as f64 + 1.0)).abs() < 1e-16);
    }
    let m = fixed_point_moments(200);
    let tm = t_map(&m).unwrap();
    assert!(tm.sup_distance(&m) < 1e-14);
}

#[test]
fn t_inverse_examples() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(5);
    for _ in 0..50 {
        let (_, a) = random_hausdorff(&mut rng, 40);
        let back = t_inverse(&t_map(&a).unwrap()).unwrap();
        for (x, y) in a.values().iter().zip(back.values()) {
            assert!((x - y).abs() < 1e-11 * (1.0 + x.abs()));
        }
    }
    let b = MomentSequence::new((0..30).map(|n| 1.0 / ((n + 1) as f64).powi(2)).collect()).unwrap();
    let c = t_inverse(&b).unwrap();
    for n in 1..30 {
        assert!((c.values()[n] - (2 * n + 1) as f64).abs() < 1e-9);
    }
    let m = fixed_point_moments(100);
    assert!(t_inverse(&m).unwrap().sup_distance(&m) < 1e-12);
}

#[test]
fn trajectory_from_delta0() {
    let tr = iterate_t(&delta0(60), 6).unwrap();
    assert_eq!(tr.iterates.len(), 6);
    let m = fixed_point_moments(59);
    let (t4, t6) = (&tr.iterates[3], &tr.iterates[5]);
    for k in 1..=20 {
        let e4 = (t4.values()[k] - m.values()[k]).abs();
        let e6 = (t6.values()[k] - m.values()[k]).abs();
        assert!(e6 < e4, "k = {k}");
    }
    // T^n(δ₀) for n = 2, 4, 6 increases, n = 3, 5 decreases, m in between
    for k in 1..60 {
        let at = |n: usize| tr.iterates[n - 1].values()[k];
        assert!(at(2) < at(4) && at(4) < at(6) && at(6) < m.values()[k]);
        assert!(at(3) > at(5) && at(5) > m.values()[k]);
    }
    assert!(tr.distance_to_fixed[5] < tr.distance_to_fixed[3]);
}

#[test]
fn t_is_order_reversing() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(9);
    for _ in 0..50 {
        let (atoms, a) = random_hausdorff(&mut rng, 30);
        // moving atoms to the right raises every moment
        let shifted: Vec<(f64, f64)> = atoms
            .iter()
            .map(|&(x, w)| (x + rng.random_range(0.0..1.0) * (1.0 - x), w))
            .collect();
        let b = moments_of(&shifted, 30);
        let (ta, tb) = (t_map(&a).unwrap(), t_map(&b).unwrap());
        for (x, y) in ta.values().iter().zip(tb.values()) {
            assert!(x >= y);
        }
    }
}

#[test]
fn uniform_transform() {
    let u = SpectralMeasure::uniform(6);
    assert!((bernstein_spectral(&u, 1.0).unwrap() - 1.0).abs() < 1e-15);
    for k in 1..15u64 {
        assert!((bernstein_spectral(&u, k as f64).unwrap() - harmonic(k)).abs() < 1e-13);
    }
    assert!((bernstein_spectral_deriv(&u, 0.0).unwrap() - trigamma(1.0).unwrap()).abs() < 1e-15);
    for n in 0..30 {
        assert!((moments_of_spectral(&u, n) - 1.0 / (n as f64 + 1.0)).abs() < 1e-16);
    }
}

#[test]
fn transform_near_zero() {
    for mu in measures_p12() {
        let v = bernstein_spectral(mu, 1e-10).unwrap();
        assert!(v > 0.0 && v < 1e-8);
    }
}

#[test]
fn derivative_matches_finite_difference() {
    let h = 1e-5;
    let z = 0.3;
    for mu in measures_p12() {
        let explicit = SpectralMeasure::from_parts(mu.rho0, mu.shells.clone(), Vec::new());
        let f = |x: f64| bernstein_spectral(&explicit, x).unwrap();
        let fd = (f(z + h) - f(z - h)) / (2.0 * h);
        let d = bernstein_spectral_deriv(&explicit, z).unwrap();
        assert!((fd - d).abs() < 1e-6, "{fd} {d}");
    }
}

#[test]
fn derivative_with_tail_atoms() {
    // the fitted tail has large weights, so a wider five-point stencil
    let h = 1e-3;
    let z = 0.3;
    for mu in measures_p12() {
        let f = |x: f64| bernstein_spectral(mu, x).unwrap();
        let fd = (f(z - 2.0 * h) - 8.0 * f(z - h) + 8.0 * f(z + h) - f(z + 2.0 * h)) / (12.0 * h);
        let d = bernstein_spectral_deriv(mu, z).unwrap();
        assert!((fd - d).abs() < 1e-6, "{fd} {d}");
    }
}

#[test]
fn derivative_positive_right_of_minus_one() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(2);
    for mu in measures_p12() {
        for _ in 0..100 {
            let z = rng.random_range(-0.999..50.0);
            assert!(bernstein_spectral_deriv(mu, z).unwrap() > 0.0);
        }
    }
}

#[test]
fn mu3_atoms() {
    let mu3 = that_step(&SpectralMeasure::uniform(12), 12).unwrap();
    for p in 1..=12 {
        let shell = mu3.shell(p);
        assert_eq!(shell.len(), 1, "shell {p}");
        let a = shell[0];
        assert!((digamma(1.0 + a.xi).unwrap() + EULER_GAMMA).abs() < 1e-9);
        assert!((a.rho - 1.0 / trigamma(1.0 + a.xi).unwrap()).abs() < 1e-12 * a.rho);
    }
    for (p, x) in MU3_XI.iter().enumerate() {
        assert!((mu3.shell(p + 1)[0].xi - x).abs() < 1e-12);
    }
    let r0 = 1.0 / trigamma(1.0).unwrap();
    assert!((mu3.rho0 - r0).abs() < 1e-15);
}

#[test]
fn mu3_moments_with_tail() {
    let mu3 = &measures_p12()[1];
    for k in 0..=20u64 {
        let v = moments_with_tail(mu3, k as usize);
        assert!((v - 1.0 / harmonic(k + 1)).abs() < 1e-6, "k = {k}");
    }
}

#[test]
#[ignore = "the dropped shells of μ₃ carry mass ~1/ln P, far above 1e-6"]
fn mu3_moments_explicit() {
    let mu3 = &measures_p12()[1];
    for k in 0..=20u64 {
        let v = moments_of_spectral(mu3, k as usize);
        assert!((v - 1.0 / harmonic(k + 1)).abs() < 1e-6, "k = {k}: {v}");
    }
}

#[test]
fn shell_counts_follow_recursion() {
    let ms = iterate_spectral(10, 8, &StepOptions::default()).unwrap();
    let mut expect: Vec<usize> = vec![0; 8];
    for (j, mu) in ms.iter().enumerate() {
        if j > 0 {
            // N(n+1, p) = 1 + Σ_{q<p} N(n, q), capped by 2^{p-1}
            let prev = expect.clone();
            for p in 1..=8 {
                expect[p - 1] = 1 + prev[..p - 1].iter().sum::<usize>();
            }
        }
        let found: Vec<usize> = (1..=8).map(|p| mu.shell(p).len()).collect();
        for p in 1..=8 {
            assert!(found[p - 1] <= 1 << (p - 1));
        }
        assert_eq!(
            found.iter().sum::<usize>() + mu.dropped_zeros,
            expect.iter().sum::<usize>(),
            "step {j}"
        );
    }
    assert!((1..=8).all(|p| ms[10].shell(p).len() == 1 << (p - 1)));
}

#[test]
fn measure_iteration_reproduces_sequence_iteration() {
    let tr = iterate_t(&delta0(30), 6).unwrap();
    for (j, mu) in measures_p12().iter().enumerate() {
        let seq = &tr.iterates[j + 1];
        for k in 0..=20 {
            let v = moments_with_tail(mu, k);
            assert!((v - seq.values()[k]).abs() < 1e-6, "μ_{} k {k}", j + 2);
        }
    }
}

#[test]
#[ignore = "explicit atoms alone miss the truncated mass (0.07 to 0.25 for μ₃..μ₆)"]
fn measure_iteration_explicit_moments() {
    let tr = iterate_t(&delta0(30), 6).unwrap();
    for (j, mu) in measures_p12().iter().enumerate() {
        for k in 0..=20 {
            let v = moments_of_spectral(mu, k);
            assert!((v - tr.iterates[j + 1].values()[k]).abs() < 1e-6);
        }
    }
}

#[test]
fn measure_level_sandwich() {
    let ms = measures_p12();
    for k in 1..=20 {
        let m = |n: usize| moments_with_tail(&ms[n - 2], k);
        assert!(m(2) < m(4) && m(4) < m(6), "k = {k}");
        assert!(m(3) > m(5), "k = {k}");
    }
}

#[test]
fn mass_within_budget() {
    for mu in measures_p12() {
        mu.validate(DEFAULT_TAIL_TOL).unwrap();
        assert!((mu.explicit_mass() + mu.tail_deficit - 1.0).abs() < 1e-12);
        assert!((moments_with_tail(mu, 0) - 1.0).abs() < 1e-6);
    }
}

#[test]
fn pole_lists() {
    let mu = &measures_p12()[3];
    let pl = PoleList::build(mu, 6);
    assert!(pl.poles.windows(2).all(|w| w[0].x < w[1].x));
    for l in 1..=6 {
        assert!(pl.poles.iter().any(|p| p.x == -(l as f64)));
    }
    assert!(pl.poles.iter().all(|p| p.x > -7.0 && p.x <= 0.0));
}

#[test]
fn inverse_rejects_nonpositive() {
    let b = MomentSequence::new(vec![1.0, 0.5, 0.0]).unwrap();
    assert!(t_inverse(&b).is_err());
}
