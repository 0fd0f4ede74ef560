//! Exact sequence likelihood over the left-right no-skip topology.
//!
//! A lattice holds, for every frame `t` and state `n`, the emission log density
//! `ℓ(t,n)` and the log transition pair `ln τ(t,n)`, `ln(1 − τ(t,n))`. A path
//! starts in state 0, either stays or advances by one after each frame, and
//! must leave the last state after the last frame. The likelihood therefore
//! includes the final factor `τ(T,N)`.
//!
//! Indices are 0-based throughout.

mod alignment;
mod brute;
mod export;
mod loss;

use crate::error::{Error, Result};
use crate::model::{Bound, Model};
use crate::numerics::{log_add_exp, Graph, Tensor, Var, LOG_ZERO};
use crate::Prng;

pub use alignment::Alignment;
pub use brute::{brute_force_loglik, brute_force_posterior, brute_force_viterbi, path_count, MAX_BRUTE_FORCE_PATHS};
pub use export::{read_alignment, write_alignment, AlignmentRow};
pub use loss::{nll_loss, utterance_loglik, InfeasiblePolicy, LossOptions, NllOutput, NllReport};

/// Numeric `T × N` lattice, row-major by frame.
#[derive(Clone, Debug, PartialEq)]
pub struct EmissionLattice {
    frames: usize,
    states: usize,
    emission: Vec<f64>,
    log_tau: Vec<f64>,
    log_stay: Vec<f64>,
}

impl EmissionLattice {
    pub fn new(
        frames: usize,
        states: usize,
        emission: Vec<f64>,
        log_tau: Vec<f64>,
        log_stay: Vec<f64>,
    ) -> Result<Self> {
        let cells = frames * states;
        if frames == 0 || states == 0 {
            return Err(Error::Contract("lattice needs at least one frame and one state".into()));
        }
        if emission.len() != cells || log_tau.len() != cells || log_stay.len() != cells {
            return Err(Error::Contract(format!(
                "lattice arrays must hold {frames}x{states} cells"
            )));
        }
        if let Some(i) = emission.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!(
                "emission log density at frame {}, state {} is not finite",
                i / states,
                i % states
            )));
        }
        for (i, (&lt, &ls)) in log_tau.iter().zip(&log_stay).enumerate() {
            if !(lt <= 0.0 && ls <= 0.0) || ((lt.exp() + ls.exp()) - 1.0).abs() > 1e-10 {
                return Err(Error::Contract(format!(
                    "transition log probabilities at frame {}, state {} are inconsistent",
                    i / states,
                    i % states
                )));
            }
        }
        Ok(EmissionLattice {
            frames,
            states,
            emission,
            log_tau,
            log_stay,
        })
    }

    /// Builds the transition pair from logits of `τ`.
    pub fn from_logits(frames: usize, states: usize, emission: Vec<f64>, tau_logits: &[f64]) -> Result<Self> {
        let log_tau = tau_logits.iter().map(|&y| crate::numerics::log_sigmoid(y)).collect();
        let log_stay = tau_logits
            .iter()
            .map(|&y| crate::numerics::log_one_minus_sigmoid(y))
            .collect();
        Self::new(frames, states, emission, log_tau, log_stay)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn states(&self) -> usize {
        self.states
    }

    #[inline]
    pub fn emission(&self, t: usize, n: usize) -> f64 {
        self.emission[t * self.states + n]
    }

    #[inline]
    pub fn log_tau(&self, t: usize, n: usize) -> f64 {
        self.log_tau[t * self.states + n]
    }

    #[inline]
    pub fn log_stay(&self, t: usize, n: usize) -> f64 {
        self.log_stay[t * self.states + n]
    }

    pub fn check_feasible(&self) -> Result<()> {
        check_feasible(self.frames, self.states)
    }

    /// Log probability of one complete alignment, including the exit factor.
    pub fn path_log_prob(&self, alignment: &Alignment) -> Result<f64> {
        alignment.validate(self.states, true)?;
        let s = alignment.states();
        if s.len() != self.frames {
            return Err(Error::Contract(format!(
                "alignment covers {} frames, lattice has {}",
                s.len(),
                self.frames
            )));
        }
        let mut lp = 0.0;
        for t in 0..self.frames {
            lp += self.emission(t, s[t]);
            let advance = t + 1 == self.frames || s[t + 1] != s[t];
            lp += if advance {
                self.log_tau(t, s[t])
            } else {
                self.log_stay(t, s[t])
            };
        }
        Ok(lp)
    }
}

pub(crate) fn check_feasible(frames: usize, states: usize) -> Result<()> {
    if frames < states || states == 0 {
        Err(Error::Infeasible { frames, states })
    } else {
        Ok(())
    }
}

/// Whether state `n` can be occupied at frame `t` by some complete path.
#[inline]
pub fn in_band(t: usize, n: usize, frames: usize, states: usize) -> bool {
    n <= t && states - 1 - n <= frames - 1 - t
}

/// Forward variables `ln α(t,n)`; cells outside the feasible band are `-inf`.
#[derive(Clone, Debug)]
pub struct ForwardTrellis {
    pub frames: usize,
    pub states: usize,
    pub log_alpha: Vec<f64>,
    pub log_likelihood: f64,
}

impl ForwardTrellis {
    pub fn log_alpha(&self, t: usize, n: usize) -> f64 {
        self.log_alpha[t * self.states + n]
    }
}

pub fn forward_trellis(lat: &EmissionLattice) -> Result<ForwardTrellis> {
    lat.check_feasible()?;
    let (frames, states) = (lat.frames, lat.states);
    let mut alpha = vec![LOG_ZERO; frames * states];
    alpha[0] = lat.emission(0, 0);
    for t in 1..frames {
        for n in 0..states {
            if !in_band(t, n, frames, states) {
                continue;
            }
            let stay = alpha[(t - 1) * states + n] + lat.log_stay(t - 1, n);
            let adv = if n > 0 {
                alpha[(t - 1) * states + n - 1] + lat.log_tau(t - 1, n - 1)
            } else {
                LOG_ZERO
            };
            alpha[t * states + n] = lat.emission(t, n) + log_add_exp(stay, adv);
        }
    }
    let log_likelihood = alpha[(frames - 1) * states + states - 1] + lat.log_tau(frames - 1, states - 1);
    Ok(ForwardTrellis {
        frames,
        states,
        log_alpha: alpha,
        log_likelihood,
    })
}

/// `ln p(x₁..x_T)` summed over every complete monotone path.
pub fn forward_loglik(lat: &EmissionLattice) -> Result<f64> {
    Ok(forward_trellis(lat)?.log_likelihood)
}

/// Most likely complete alignment and its log probability. On ties the path
/// stays in its current state, so advances happen as late as possible.
pub fn viterbi(lat: &EmissionLattice) -> Result<(Alignment, f64)> {
    lat.check_feasible()?;
    let (frames, states) = (lat.frames, lat.states);
    let mut delta = vec![LOG_ZERO; frames * states];
    // true when the best predecessor of (t, n) is (t-1, n-1)
    let mut advanced = vec![false; frames * states];
    delta[0] = lat.emission(0, 0);
    for t in 1..frames {
        for n in 0..states {
            if !in_band(t, n, frames, states) {
                continue;
            }
            let stay = delta[(t - 1) * states + n] + lat.log_stay(t - 1, n);
            let adv = if n > 0 {
                delta[(t - 1) * states + n - 1] + lat.log_tau(t - 1, n - 1)
            } else {
                LOG_ZERO
            };
            let (best, from_adv) = if adv >= stay && adv > LOG_ZERO {
                (adv, true)
            } else {
                (stay, false)
            };
            delta[t * states + n] = lat.emission(t, n) + best;
            advanced[t * states + n] = from_adv;
        }
    }
    let score = delta[(frames - 1) * states + states - 1] + lat.log_tau(frames - 1, states - 1);
    let mut path = vec![0; frames];
    let mut n = states - 1;
    for t in (0..frames).rev() {
        path[t] = n;
        if t > 0 && advanced[t * states + n] {
            n -= 1;
        }
    }
    Ok((Alignment::new(path), score))
}

/// State occupancy posteriors `γ(t,n) = P(s_t = n | x₁..x_T)` as a `T × N` tensor.
pub fn occupancy_posterior(lat: &EmissionLattice) -> Result<Tensor> {
    let fwd = forward_trellis(lat)?;
    let (frames, states) = (lat.frames, lat.states);
    let mut beta = vec![LOG_ZERO; frames * states];
    beta[(frames - 1) * states + states - 1] = lat.log_tau(frames - 1, states - 1);
    for t in (0..frames - 1).rev() {
        for n in 0..states {
            if !in_band(t, n, frames, states) {
                continue;
            }
            let stay = lat.log_stay(t, n) + lat.emission(t + 1, n) + beta[(t + 1) * states + n];
            let adv = if n + 1 < states {
                lat.log_tau(t, n) + lat.emission(t + 1, n + 1) + beta[(t + 1) * states + n + 1]
            } else {
                LOG_ZERO
            };
            beta[t * states + n] = log_add_exp(stay, adv);
        }
    }
    let total = fwd.log_likelihood;
    let data = fwd
        .log_alpha
        .iter()
        .zip(&beta)
        .map(|(&a, &b)| {
            if a == LOG_ZERO || b == LOG_ZERO {
                0.0
            } else {
                (a + b - total).exp()
            }
        })
        .collect();
    Ok(Tensor::new(frames, states, data))
}

/// Differentiable lattice: one `N × 1` column per frame for each quantity.
#[derive(Clone, Debug)]
pub struct LatticeVars {
    pub frames: usize,
    pub states: usize,
    pub emission: Vec<Var>,
    pub log_tau: Vec<Var>,
    pub log_stay: Vec<Var>,
}

impl LatticeVars {
    pub fn values(&self, g: &Graph) -> Result<EmissionLattice> {
        let collect = |cols: &[Var]| -> Vec<f64> { cols.iter().flat_map(|&v| g.value(v).data().to_vec()).collect() };
        EmissionLattice::new(
            self.frames,
            self.states,
            collect(&self.emission),
            collect(&self.log_tau),
            collect(&self.log_stay),
        )
    }
}

/// Evaluates the model on a `T × N` grid with teacher forcing: `a_t` is computed
/// once per frame from the ground-truth `x_{t-1}` (go token at the first frame)
/// and shared by all states.
pub fn build_lattice(
    g: &mut Graph,
    model: &Model,
    bound: &Bound,
    states: Var,
    frames: &Tensor,
    mut dropout: Option<&mut Prng>,
) -> Result<LatticeVars> {
    let n_states = g.value(states).rows();
    let n_frames = frames.rows();
    check_feasible(n_frames, n_states)?;
    if frames.cols() != model.config().acoustic_dim {
        return Err(Error::Contract(format!(
            "frames have {} dims, model expects {}",
            frames.cols(),
            model.config().acoustic_dim
        )));
    }
    let x = g.constant(frames.clone());
    let projected = model.project_states(g, bound, states);
    let mut dec = model.decoder_start(g, bound);
    let mut lat = LatticeVars {
        frames: n_frames,
        states: n_states,
        emission: Vec::with_capacity(n_frames),
        log_tau: Vec::with_capacity(n_frames),
        log_stay: Vec::with_capacity(n_frames),
    };
    for t in 0..n_frames {
        let prev = if t == 0 {
            bound.go_token()
        } else {
            g.slice_rows(x, t - 1, 1)
        };
        dec = model.decoder_advance(g, bound, prev, &dec, dropout.as_deref_mut())?;
        let em = model.output_net_projected(g, bound, projected, &dec);
        let xt = g.slice_rows(x, t, 1);
        lat.emission.push(g.gaussian_logpdf(xt, em.mu, em.sigma));
        lat.log_tau.push(em.log_tau);
        lat.log_stay.push(em.log_stay);
    }
    Ok(lat)
}

/// Numeric lattice of `frames` given `symbols` under `model`, pre-net dropout off.
pub fn model_lattice(model: &Model, symbols: &[usize], frames: &Tensor) -> Result<EmissionLattice> {
    model.check_symbols(symbols)?;
    check_feasible(frames.rows(), model.config().num_states(symbols.len()))?;
    let mut g = Graph::new();
    let bound = model.bind(&mut g);
    let states = model.encode(&mut g, &bound, symbols)?;
    build_lattice(&mut g, model, &bound, states, frames, None)?.values(&g)
}

/// Differentiable forward algorithm; same recursion and band as [`forward_trellis`].
pub fn forward_loglik_graph(g: &mut Graph, lat: &LatticeVars) -> Result<Var> {
    check_feasible(lat.frames, lat.states)?;
    let (frames, states) = (lat.frames, lat.states);
    let mask = |g: &mut Graph, t: usize| {
        let m = (0..states)
            .map(|n| if in_band(t, n, frames, states) { 0.0 } else { LOG_ZERO })
            .collect();
        g.constant(Tensor::new(states, 1, m))
    };
    let m0 = mask(g, 0);
    let mut alpha = g.add(lat.emission[0], m0);
    for t in 1..frames {
        let stay = g.add(alpha, lat.log_stay[t - 1]);
        let leave = g.add(alpha, lat.log_tau[t - 1]);
        let adv = g.shift_rows(leave, 1, LOG_ZERO);
        let into = g.log_add_exp(stay, adv);
        let with_emission = g.add(into, lat.emission[t]);
        let mt = mask(g, t);
        alpha = g.add(with_emission, mt);
    }
    let exit = g.add(alpha, lat.log_tau[frames - 1]);
    Ok(g.element(exit, states - 1, 0))
}

#[cfg(test)]
mod tests;
