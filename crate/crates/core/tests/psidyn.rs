use momfix::psidyn::*;
use momfix::seqcore::{lambda_seeded, lambda_sequence};
use momfix::Error;
use rand::{Rng, SeedableRng};

#[test]
fn psi_values() {
    assert_eq!(psi(1.0).unwrap(), 0.0);
    assert_eq!(psi(-1.0).unwrap(), 0.0);
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((psi(g).unwrap() - 1.0).abs() < 1e-15);
    assert!(matches!(psi(0.0), Err(Error::Pole { .. })));
    assert_eq!(psi_prime(1.0).unwrap(), 2.0);
    assert!((psi_prime(1e9).unwrap() - 1.0).abs() < 1e-15);
    assert!(psi_prime(0.0).is_err());
    let lam = lambda_sequence(50);
    for n in 1..=50 {
        assert!(psi_prime(lam[n]).unwrap() <= 1.0 + 1.0 / n as f64 + 1e-15);
    }
}

#[test]
fn psi_iteration() {
    let lam = lambda_sequence(3);
    assert!(psi_iter(lam[3], 3).unwrap().abs() < 1e-10);
    assert_eq!(psi_iter(0.37, 0).unwrap(), 0.37);
    let a22 = (1.0 - 5f64.sqrt()) / 2.0;
    assert!(psi_iter(a22, 2).unwrap().abs() < 1e-15);
    match psi_iter(1.0, 3) {
        Err(Error::PoleEncountered { step }) => assert_eq!(step, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn preimages() {
    assert_eq!(preimage_pair(0.0), (-1.0, 1.0));
    let (a, b) = preimage_pair(1.0);
    assert!((a - (1.0 - 5f64.sqrt()) / 2.0).abs() < 1e-15);
    assert!((b - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    for _ in 0..200 {
        let y: f64 = rng.random_range(-50.0..50.0);
        let (a, b) = preimage_pair(y);
        assert!(a < 0.0 && b > 0.0);
        assert!((a * b + 1.0).abs() < 1e-13);
        assert!((psi(a).unwrap() - y).abs() < 1e-12 * y.abs().max(1.0));
        assert!((psi(b).unwrap() - y).abs() < 1e-12 * y.abs().max(1.0));
        assert_eq!(b, lambda_seeded(y, 1).last());
    }
}

#[test]
fn small_level_sets() {
    assert_eq!(level_set(0).unwrap().points, vec![0.0]);
    assert_eq!(level_set(1).unwrap().points, vec![-1.0, 1.0]);
    let s5 = 5f64.sqrt();
    let expect = [
        -(1.0 + s5) / 2.0,
        (1.0 - s5) / 2.0,
        (s5 - 1.0) / 2.0,
        (1.0 + s5) / 2.0,
    ];
    let y2 = level_set(2).unwrap();
    for (a, b) in y2.points.iter().zip(expect) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((y2.alpha(2) + 0.618034).abs() < 1e-6);
    assert!(matches!(
        level_set_with_cap(5, 4),
        Err(Error::CapExceeded { n: 5, cap: 4 })
    ));
}

#[test]
fn level_set_invariants() {
    let sets = level_sets_upto(12).unwrap();
    let lam = lambda_sequence(12);
    for n in 1..=12 {
        let y = &sets[n];
        assert_eq!(y.len(), 1 << n);
        assert!(y.points.windows(2).all(|w| w[0] < w[1]));
        let len = y.len();
        for k in 1..=len {
            assert_eq!(y.alpha(k), -y.alpha(len + 1 - k));
        }
        assert!((y.alpha(len) - lam[n]).abs() < 1e-12 * lam[n]);
        // ψ(Y_n) ⊆ Y_{n-1}
        let prev = &sets[n - 1].points;
        for &x in &y.points {
            let v = psi(x).unwrap();
            let d = prev
                .iter()
                .map(|q| (q - v).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-9);
        }
    }
}

#[test]
fn interlacing() {
    let sets = level_sets_upto(12).unwrap();
    for n in 1..=12 {
        let mut older: Vec<f64> = sets[..n]
            .iter()
            .flat_map(|s| s.points.iter().copied())
            .collect();
        older.sort_by(f64::total_cmp);
        let new = &sets[n].points;
        // one new point below, one above, one in each gap
        let below = new.iter().filter(|&&x| x < older[0]).count();
        let above = new.iter().filter(|&&x| x > older[older.len() - 1]).count();
        assert_eq!((below, above), (1, 1));
        for w in older.windows(2) {
            let c = new.iter().filter(|&&x| x > w[0] && x < w[1]).count();
            assert_eq!(c, 1, "n = {n}, gap ({}, {})", w[0], w[1]);
        }
    }
}

#[test]
fn residue_indices() {
    assert_eq!(residue_index(3, 1), 1);
    assert_eq!(residue_index(4, 2), 4);
    assert_eq!(residue_index(17, 0), 1);
    for p in 0..8u32 {
        for k in 1..=(1u64 << p) {
            assert_eq!(residue_index(k, p), k);
        }
    }
    for k in 0..200u64 {
        for l in 0..6u32 {
            let r = residue_index(k, l);
            assert!(r >= 1 && r <= 1 << l);
            assert_eq!((r - (k % (1 << l))) % (1 << l), 0);
        }
    }
}

#[test]
fn folding_of_labels() {
    let sets = level_sets_upto(10).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    for _ in 0..300 {
        let p = rng.random_range(1..=10usize);
        let k = rng.random_range(1..=(1u64 << p));
        let l = rng.random_range(0..=p);
        let v = psi_iter(sets[p].alpha(k as usize), l).unwrap();
        let target = sets[p - l].alpha(residue_index(k, (p - l) as u32) as usize);
        assert!((v - target).abs() < 1e-8, "p {p} k {k} l {l}");
    }
}
