//! Explicit path enumeration. Independent of the dynamic programs in the
//! parent module and used to check them on small lattices.

use super::{Alignment, EmissionLattice};
use crate::error::{Error, Result};
use crate::numerics::{Tensor, LOG_ZERO};

pub const MAX_BRUTE_FORCE_PATHS: u128 = 1_000_000;

/// Number of complete monotone paths, `C(T-1, N-1)`.
pub fn path_count(frames: usize, states: usize) -> u128 {
    if states == 0 || frames < states {
        return 0;
    }
    let (n, k) = ((frames - 1) as u128, (states - 1) as u128);
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

/// Calls `visit` with every complete path (as a state sequence).
fn for_each_path(frames: usize, states: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(path: &mut Vec<usize>, frames: usize, states: usize, visit: &mut dyn FnMut(&[usize])) {
        let t = path.len();
        if t == frames {
            if path[t - 1] == states - 1 {
                visit(path);
            }
            return;
        }
        let cur = path[t - 1];
        for next in [cur, cur + 1] {
            // prune paths that can no longer reach the last state
            if next < states && states - 1 - next <= frames - 1 - t {
                path.push(next);
                rec(path, frames, states, visit);
                path.pop();
            }
        }
    }
    let mut path = vec![0];
    rec(&mut path, frames, states, &mut visit);
}

fn guard(lat: &EmissionLattice) -> Result<()> {
    lat.check_feasible()?;
    let count = path_count(lat.frames(), lat.states());
    if count > MAX_BRUTE_FORCE_PATHS {
        return Err(Error::TooManyPaths {
            count,
            limit: MAX_BRUTE_FORCE_PATHS,
        });
    }
    Ok(())
}

fn path_scores(lat: &EmissionLattice) -> Result<Vec<(Vec<usize>, f64)>> {
    guard(lat)?;
    let mut out = Vec::new();
    for_each_path(lat.frames(), lat.states(), |p| {
        let a = Alignment::new(p.to_vec());
        let lp = lat.path_log_prob(&a).expect("enumerated paths are complete");
        out.push((p.to_vec(), lp));
    });
    Ok(out)
}

/// Sums `exp(log p)` with Neumaier compensation after shifting by the maximum.
fn compensated_log_sum(scores: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = scores.clone().fold(LOG_ZERO, f64::max);
    if max == LOG_ZERO {
        return LOG_ZERO;
    }
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for s in scores {
        let x = (s - max).exp();
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    max + (sum + comp).ln()
}

/// Log likelihood by enumerating every complete path.
pub fn brute_force_loglik(lat: &EmissionLattice) -> Result<f64> {
    let scores = path_scores(lat)?;
    Ok(compensated_log_sum(scores.iter().map(|(_, s)| *s)))
}

/// Highest-scoring path by enumeration. Ties are not resolved the way
/// [`super::viterbi`] resolves them, so comparisons should use tie-free lattices.
pub fn brute_force_viterbi(lat: &EmissionLattice) -> Result<(Alignment, f64)> {
    let scores = path_scores(lat)?;
    let (path, score) = scores
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("feasible lattice has a path");
    Ok((Alignment::new(path), score))
}

/// Occupancy posteriors by path-weighted state counts.
pub fn brute_force_posterior(lat: &EmissionLattice) -> Result<Tensor> {
    let scores = path_scores(lat)?;
    let total = compensated_log_sum(scores.iter().map(|(_, s)| *s));
    let mut gamma = Tensor::zeros(lat.frames(), lat.states());
    for (path, s) in &scores {
        let w = (s - total).exp();
        for (t, &n) in path.iter().enumerate() {
            let cur = gamma.get(t, n);
            gamma.set(t, n, cur + w);
        }
    }
    Ok(gamma)
}
