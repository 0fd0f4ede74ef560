use rand::{Rng, SeedableRng};

use super::*;
use crate::numerics::{ln_binomial, log_sigmoid};

fn random_lattice(frames: usize, states: usize, rng: &mut Prng) -> EmissionLattice {
    let emission = (0..frames * states).map(|_| rng.random_range(-6.0..1.0)).collect();
    let logits: Vec<f64> = (0..frames * states).map(|_| rng.random_range(-4.0..4.0)).collect();
    EmissionLattice::from_logits(frames, states, emission, &logits).unwrap()
}

fn constant_lattice(frames: usize, states: usize, emission: f64, tau: f64) -> EmissionLattice {
    let cells = frames * states;
    EmissionLattice::new(
        frames,
        states,
        vec![emission; cells],
        vec![tau.ln(); cells],
        vec![(1.0 - tau).ln(); cells],
    )
    .unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn single_path_examples() {
    let lat = EmissionLattice::from_logits(1, 1, vec![-1.25], &[0.3]).unwrap();
    assert!((forward_loglik(&lat).unwrap() - (-1.25 + log_sigmoid(0.3))).abs() < 1e-15);

    let lat = EmissionLattice::from_logits(2, 1, vec![-1.0, -2.0], &[0.5, -0.7]).unwrap();
    let expected = -1.0 + log_sigmoid(-0.5) + -2.0 + log_sigmoid(-0.7);
    assert!((forward_loglik(&lat).unwrap() - expected).abs() < 1e-14);
}

#[test]
fn infeasible_lattice_is_rejected() {
    let lat = constant_lattice(3, 5, -1.0, 0.5);
    assert!(matches!(
        forward_loglik(&lat),
        Err(Error::Infeasible { frames: 3, states: 5 })
    ));
    assert!(viterbi(&lat).is_err());
    assert!(occupancy_posterior(&lat).is_err());
}

#[test]
fn inconsistent_transition_pair_is_rejected() {
    assert!(EmissionLattice::new(1, 1, vec![0.0], vec![0.5f64.ln()], vec![0.4f64.ln()]).is_err());
    assert!(EmissionLattice::new(1, 1, vec![f64::NAN], vec![0.5f64.ln()], vec![0.5f64.ln()]).is_err());
}

#[test]
fn constant_lattice_closed_form() {
    for (t, n) in [(1, 1), (3, 2), (8, 4), (12, 5), (40, 20)] {
        let (p, tau) = (-1.3f64, 0.27f64);
        let expected =
            ln_binomial(t - 1, n - 1) + t as f64 * p + n as f64 * tau.ln() + (t - n) as f64 * (1.0 - tau).ln();
        let got = forward_loglik(&constant_lattice(t, n, p, tau)).unwrap();
        assert!(rel_err(got, expected) < 1e-12, "T={t} N={n}: {got} vs {expected}");
    }
}

#[test]
fn forward_matches_enumeration() {
    let mut rng = Prng::seed_from_u64(1);
    for _ in 0..60 {
        let n = rng.random_range(1..=4);
        let t = rng.random_range(n..=8);
        let lat = random_lattice(t, n, &mut rng);
        let fwd = forward_loglik(&lat).unwrap();
        let brute = brute_force_loglik(&lat).unwrap();
        assert!(rel_err(fwd, brute) < 1e-10, "T={t} N={n}: {fwd} vs {brute}");
    }
}

#[test]
fn viterbi_matches_enumeration_and_is_bounded() {
    let mut rng = Prng::seed_from_u64(2);
    for _ in 0..60 {
        let n = rng.random_range(1..=4);
        let t = rng.random_range(n..=8);
        let lat = random_lattice(t, n, &mut rng);
        let (path, score) = viterbi(&lat).unwrap();
        let (bpath, bscore) = brute_force_viterbi(&lat).unwrap();
        assert!(path.is_valid(n, true));
        assert_eq!(path, bpath);
        assert!((score - bscore).abs() < 1e-10);
        assert!((lat.path_log_prob(&path).unwrap() - score).abs() < 1e-10);
        assert!(score <= forward_loglik(&lat).unwrap() + 1e-12);
    }
}

#[test]
fn viterbi_unique_path_when_frames_equal_states() {
    let mut rng = Prng::seed_from_u64(3);
    for n in 1..6 {
        let lat = random_lattice(n, n, &mut rng);
        let (path, _) = viterbi(&lat).unwrap();
        assert_eq!(path.states(), (0..n).collect::<Vec<_>>().as_slice());
        let gamma = occupancy_posterior(&lat).unwrap();
        for t in 0..n {
            for s in 0..n {
                assert!((gamma.get(t, s) - if t == s { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn viterbi_ties_prefer_staying() {
    // every path has the same score; staying first gives 0,0,1
    let (path, _) = viterbi(&constant_lattice(3, 2, -1.0, 0.5)).unwrap();
    assert_eq!(path.states(), &[0, 0, 1]);
}

#[test]
fn posterior_matches_enumeration() {
    let mut rng = Prng::seed_from_u64(4);
    for _ in 0..40 {
        let n = rng.random_range(1..=3);
        let t = rng.random_range(n..=6);
        let lat = random_lattice(t, n, &mut rng);
        let gamma = occupancy_posterior(&lat).unwrap();
        let oracle = brute_force_posterior(&lat).unwrap();
        for row in 0..t {
            let sum: f64 = gamma.row(row).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            for s in 0..n {
                assert!((gamma.get(row, s) - oracle.get(row, s)).abs() < 1e-9);
                if !in_band(row, s, t, n) {
                    assert_eq!(gamma.get(row, s), 0.0);
                }
            }
        }
    }
}

#[test]
fn trellis_band_sparsity() {
    let mut rng = Prng::seed_from_u64(5);
    let lat = random_lattice(7, 4, &mut rng);
    let tr = forward_trellis(&lat).unwrap();
    assert_eq!(tr.log_alpha(0, 0), lat.emission(0, 0));
    for t in 0..7 {
        for n in 0..4 {
            let outside = n > t || 3 - n > 6 - t;
            assert_eq!(outside, !in_band(t, n, 7, 4));
            assert_eq!(tr.log_alpha(t, n) == LOG_ZERO, outside, "cell ({t},{n})");
        }
    }
}

/// Graph built directly from lattice values; returns loglik and the emission leaves.
fn graph_forward(g: &mut Graph, lat: &EmissionLattice) -> (Var, LatticeVars) {
    let (t, n) = (lat.frames(), lat.states());
    let col = |g: &mut Graph, f: &dyn Fn(usize) -> f64| g.constant(Tensor::new(n, 1, (0..n).map(f).collect()));
    let mut vars = LatticeVars {
        frames: t,
        states: n,
        emission: Vec::new(),
        log_tau: Vec::new(),
        log_stay: Vec::new(),
    };
    for f in 0..t {
        vars.emission.push(col(g, &|s| lat.emission(f, s)));
        vars.log_tau.push(col(g, &|s| lat.log_tau(f, s)));
        vars.log_stay.push(col(g, &|s| lat.log_stay(f, s)));
    }
    let ll = forward_loglik_graph(g, &vars).unwrap();
    (ll, vars)
}

#[test]
fn graph_forward_agrees_and_emission_gradient_is_posterior() {
    let mut rng = Prng::seed_from_u64(6);
    for _ in 0..30 {
        let n = rng.random_range(1..=4);
        let t = rng.random_range(n..=9);
        let lat = random_lattice(t, n, &mut rng);
        let mut g = Graph::new();
        let (ll, vars) = graph_forward(&mut g, &lat);
        assert!(rel_err(g.scalar(ll), forward_loglik(&lat).unwrap()) < 1e-12);
        assert_eq!(vars.values(&g).unwrap(), lat);
        let grads = g.backward(ll).unwrap();
        let gamma = occupancy_posterior(&lat).unwrap();
        for f in 0..t {
            let d = grads.wrt(vars.emission[f]).expect("emission gradient");
            for s in 0..n {
                assert!(d.data()[s].is_finite());
                assert!((d.data()[s] - gamma.get(f, s)).abs() < 1e-9);
            }
            for v in [vars.log_tau[f], vars.log_stay[f]] {
                if let Some(d) = grads.wrt(v) {
                    assert!(d.all_finite());
                    for s in 0..n {
                        if !in_band(f, s, t, n) {
                            assert_eq!(d.data()[s], 0.0);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn extreme_values_stay_finite() {
    // saturated transitions and very small emissions
    let (t, n) = (6, 3);
    let emission = vec![-700.0; t * n];
    let logits = vec![40.0; t * n];
    let lat = EmissionLattice::from_logits(t, n, emission, &logits).unwrap();
    let mut g = Graph::new();
    let (ll, _) = graph_forward(&mut g, &lat);
    assert!(g.scalar(ll).is_finite());
    let grads = g.backward(ll).unwrap();
    for (_, t) in grads.params(&g) {
        assert!(t.all_finite());
    }
    assert!(occupancy_posterior(&lat).unwrap().all_finite());
}

#[test]
fn enumeration_refuses_large_lattices() {
    assert_eq!(path_count(3, 2), 2);
    assert_eq!(path_count(8, 4), 35);
    let lat = constant_lattice(40, 20, -1.0, 0.5);
    assert!(matches!(brute_force_loglik(&lat), Err(Error::TooManyPaths { .. })));
}
