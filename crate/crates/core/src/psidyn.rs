//! The rational map ψ(z) = z - 1/z, its backward orbits of 0 and the
//! congruence index r(k, l).

use crate::error::{Error, Result};
use crate::seqcore::positive_root;
use serde::{Deserialize, Serialize};

pub const PSI_POLE_TOL: f64 = 1e-14;
pub const DEFAULT_LEVEL_CAP: usize = 22;

pub fn psi(z: f64) -> Result<f64> {
    if z == 0.0 {
        return Err(Error::Pole { x: z });
    }
    Ok(z - 1.0 / z)
}

pub fn psi_prime(z: f64) -> Result<f64> {
    if z == 0.0 {
        return Err(Error::Pole { x: z });
    }
    Ok(1.0 + 1.0 / (z * z))
}

/// n-fold composition of ψ. Fails with the (1-based) step whose input was
/// within [`PSI_POLE_TOL`] of zero.
pub fn psi_iter(z: f64, n: usize) -> Result<f64> {
    let mut w = z;
    for step in 1..=n {
        if w.abs() < PSI_POLE_TOL {
            return Err(Error::PoleEncountered { step });
        }
        w -= 1.0 / w;
    }
    Ok(w)
}

/// The two real preimages of y, negative one first.
pub fn preimage_pair(y: f64) -> (f64, f64) {
    let pos = positive_root(y);
    // product of the roots is -1
    (-1.0 / pos, pos)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSet {
    pub n: usize,
    /// α_{n,1} < ... < α_{n,2^n}
    pub points: Vec<f64>,
}

impl LevelSet {
    /// α_{n,k}, 1-based.
    pub fn alpha(&self, k: usize) -> f64 {
        self.points[k - 1]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Y_n = (ψ^n)^{-1}(0), built level by level.
pub fn level_set(n: usize) -> Result<LevelSet> {
    level_set_with_cap(n, DEFAULT_LEVEL_CAP)
}

pub fn level_set_with_cap(n: usize, cap: usize) -> Result<LevelSet> {
    if n > cap {
        return Err(Error::CapExceeded { n, cap });
    }
    let mut points = vec![0.0];
    for _ in 0..n {
        points = next_level(&points);
    }
    Ok(LevelSet { n, points })
}

/// All levels Y_0 ..= Y_n.
pub fn level_sets_upto(n: usize) -> Result<Vec<LevelSet>> {
    if n > DEFAULT_LEVEL_CAP {
        return Err(Error::CapExceeded {
            n,
            cap: DEFAULT_LEVEL_CAP,
        });
    }
    let mut out = vec![LevelSet {
        n: 0,
        points: vec![0.0],
    }];
    for l in 1..=n {
        let points = next_level(&out[l - 1].points);
        out.push(LevelSet { n: l, points });
    }
    Ok(out)
}

// y -> negative preimage is increasing, as is y -> positive preimage, so the
// two halves come out sorted and every negative preimage is below every
// positive one.
fn next_level(prev: &[f64]) -> Vec<f64> {
    let pos: Vec<f64> = crate::par::map_slice(prev, |&y| positive_root(y));
    let mut out = Vec::with_capacity(2 * prev.len());
    // the negative half is the mirror image of the positive half
    out.extend(pos.iter().rev().map(|&p| -p));
    out.extend(pos);
    out
}

/// The representative of k mod 2^l in {1, ..., 2^l}.
pub fn residue_index(k: u64, l: u32) -> u64 {
    let m = 1u64 << l;
    match k % m {
        0 => m,
        r => r,
    }
}
