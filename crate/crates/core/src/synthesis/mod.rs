//! Frame-by-frame generation from a trained model.
//!
//! Each frame: advance the decoder on the previous output, evaluate the output
//! network for the current state only, emit a frame, then decide whether the
//! next frame belongs to the same state. Generation ends when the last state is
//! left or the frame cap is hit.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::lattice::Alignment;
use crate::model::Model;
use crate::numerics::{Graph, Tensor};
use crate::Prng;

/// Relative slack when comparing the survival product with `1 - q`, so that
/// thresholds hit exactly in real arithmetic are not missed by rounding.
pub const QUANTILE_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AcousticMode {
    Sampled,
    Mean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DurationMode {
    Sampled,
    Quantile,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transition {
    Stay,
    Advance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Completed,
    CapReached,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::CapReached => "cap_reached",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisOptions {
    pub acoustic: AcousticMode,
    pub duration: DurationMode,
    pub quantile: f64,
    /// Per-state thresholds overriding `quantile`, keyed by 0-based state index.
    pub state_quantiles: BTreeMap<usize, f64>,
    /// Frame cap; `None` means 30 frames per state.
    pub max_frames: Option<usize>,
    pub seed: u64,
    pub dropout: bool,
}

impl SynthesisOptions {
    /// Deterministic defaults for a model with `states_per_symbol` states per symbol.
    pub fn for_states_per_symbol(states_per_symbol: usize) -> Self {
        SynthesisOptions {
            acoustic: AcousticMode::Mean,
            duration: DurationMode::Quantile,
            quantile: default_quantile(states_per_symbol),
            state_quantiles: BTreeMap::new(),
            max_frames: None,
            seed: 0,
            dropout: true,
        }
    }

    pub fn cap(&self, states: usize) -> usize {
        self.max_frames.unwrap_or(30 * states)
    }

    pub fn quantile_for(&self, state: usize) -> f64 {
        self.state_quantiles.get(&state).copied().unwrap_or(self.quantile)
    }

    pub fn validate(&self, states: usize) -> Result<()> {
        let check_q = |q: f64, what: &str| {
            if q > 0.0 && q < 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must lie in (0, 1), got {q}")))
            }
        };
        check_q(self.quantile, "quantile")?;
        for (&s, &q) in &self.state_quantiles {
            if s >= states {
                return Err(Error::Config(format!(
                    "quantile override for state {s}, but the input has {states} states"
                )));
            }
            check_q(q, &format!("quantile for state {s}"))?;
        }
        if self.cap(states) < states {
            return Err(Error::Config(format!(
                "max_frames {} is below the state count {states}",
                self.cap(states)
            )));
        }
        Ok(())
    }
}

/// 0.57 with two or more states per symbol, 0.45 with one.
pub fn default_quantile(states_per_symbol: usize) -> f64 {
    if states_per_symbol >= 2 {
        0.57
    } else {
        0.45
    }
}

/// Running survival product `S_d = Π (1 - τ_i)` over the frames spent in a state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantileTracker {
    survival: f64,
}

impl Default for QuantileTracker {
    fn default() -> Self {
        QuantileTracker { survival: 1.0 }
    }
}

impl QuantileTracker {
    /// Records one more frame with advance probability `tau`; advances once
    /// the implied duration CDF `1 - S_d` reaches `q`.
    pub fn observe(&mut self, tau: f64, q: f64) -> Transition {
        self.survival *= 1.0 - tau;
        if self.survival <= (1.0 - q) * (1.0 + QUANTILE_TIE_TOLERANCE) {
            *self = Self::default();
            Transition::Advance
        } else {
            Transition::Stay
        }
    }

    pub fn survival(&self) -> f64 {
        self.survival
    }
}

/// Quantile decision after the frames whose advance probabilities are `history`.
pub fn quantile_advance(history: &[f64], q: f64) -> Transition {
    let survival: f64 = history.iter().map(|t| 1.0 - t).product();
    if survival <= (1.0 - q) * (1.0 + QUANTILE_TIE_TOLERANCE) {
        Transition::Advance
    } else {
        Transition::Stay
    }
}

/// `Advance` with probability `tau`.
pub fn sampled_advance(tau: f64, rng: &mut Prng) -> Transition {
    if rng.random::<f64>() < tau {
        Transition::Advance
    } else {
        Transition::Stay
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisResult {
    /// `T × D`, in the model's (normalized) feature space.
    pub frames: Tensor,
    pub alignment: Alignment,
    /// Frames spent in each state; unreached states have 0.
    pub durations: Vec<usize>,
    /// Advance probability of the occupied state at every frame.
    pub tau_trace: Vec<f64>,
    pub termination: Termination,
}

pub fn synthesize(model: &Model, symbols: &[usize], opts: &SynthesisOptions) -> Result<SynthesisResult> {
    model.check_symbols(symbols)?;
    let cfg = model.config();
    let states = cfg.num_states(symbols.len());
    opts.validate(states)?;
    let cap = opts.cap(states);
    let dim = cfg.acoustic_dim;

    // independent streams so switching one mode leaves the others unchanged
    let stream = |k: u64| {
        let mut r = Prng::seed_from_u64(opts.seed);
        r.set_stream(k);
        r
    };
    let (mut dropout_rng, mut noise_rng, mut duration_rng) = (stream(0), stream(1), stream(2));

    // encoder output once; every frame then runs on a fresh graph so memory
    // stays flat however long generation lasts
    let projected = {
        let mut g = Graph::new();
        let bound = model.bind(&mut g);
        let h = model.encode(&mut g, &bound, symbols)?;
        let p = model.project_states(&mut g, &bound, h);
        g.value(p).clone()
    };
    let mut carry: Option<(Tensor, Tensor)> = None;
    let mut prev: Option<Vec<f64>> = None;

    let mut data = Vec::with_capacity(cap.min(4096) * dim);
    let mut path = Vec::new();
    let mut durations = vec![0; states];
    let mut tau_trace = Vec::new();
    let mut tracker = QuantileTracker::default();
    let mut n = 0;
    let mut termination = Termination::CapReached;

    while path.len() < cap {
        let mut g = Graph::new();
        let bound = model.bind(&mut g);
        let mut dec = model.decoder_start(&mut g, &bound);
        if let Some((h, c)) = &carry {
            dec.h = g.constant(h.clone());
            dec.c = g.constant(c.clone());
            dec.frame = path.len();
        }
        let input = match &prev {
            Some(x) => g.constant(Tensor::row_vector(x.clone())),
            None => bound.go_token(),
        };
        let rng = opts.dropout.then_some(&mut dropout_rng);
        dec = model.decoder_advance(&mut g, &bound, input, &dec, rng)?;
        let row = g.constant(Tensor::row_vector(projected.row(n).to_vec()));
        let em = model.output_net_projected(&mut g, &bound, row, &dec).row(&g, 0);
        let x: Vec<f64> = match opts.acoustic {
            AcousticMode::Mean => em.mu.clone(),
            AcousticMode::Sampled => em
                .mu
                .iter()
                .zip(&em.sigma)
                .map(|(m, s)| {
                    let z: f64 = StandardNormal.sample(&mut noise_rng);
                    m + s * z
                })
                .collect(),
        };
        if x.iter().any(|v| !v.is_finite()) || !em.tau.is_finite() {
            return Err(Error::Numerical(format!("non-finite output at frame {}", path.len())));
        }
        data.extend_from_slice(&x);
        path.push(n);
        durations[n] += 1;
        tau_trace.push(em.tau);
        carry = Some((g.value(dec.h).clone(), g.value(dec.c).clone()));
        prev = Some(x);

        let decision = match opts.duration {
            DurationMode::Quantile => tracker.observe(em.tau, opts.quantile_for(n)),
            DurationMode::Sampled => sampled_advance(em.tau, &mut duration_rng),
        };
        if decision == Transition::Advance {
            n += 1;
            if n == states {
                termination = Termination::Completed;
                break;
            }
        }
    }
    let frames = Tensor::new(path.len(), dim, data);
    Ok(SynthesisResult {
        frames,
        alignment: Alignment::new(path),
        durations,
        tau_trace,
        termination,
    })
}

/// Duration summary of a synthesis run.
#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub per_state: Vec<usize>,
    pub per_symbol: Vec<usize>,
    pub total_frames: usize,
    pub mean_frames_per_symbol: f64,
    pub termination: Termination,
}

pub fn rate_report(result: &SynthesisResult, states_per_symbol: usize) -> Result<RateReport> {
    if states_per_symbol == 0 || !result.durations.len().is_multiple_of(states_per_symbol) {
        return Err(Error::Contract(format!(
            "{} states do not split into symbols of {states_per_symbol}",
            result.durations.len()
        )));
    }
    let per_symbol: Vec<usize> = result
        .durations
        .chunks(states_per_symbol)
        .map(|c| c.iter().sum())
        .collect();
    let total_frames = result.durations.iter().sum();
    Ok(RateReport {
        mean_frames_per_symbol: total_frames as f64 / per_symbol.len() as f64,
        per_state: result.durations.clone(),
        per_symbol,
        total_frames,
        termination: result.termination,
    })
}

impl RateReport {
    /// `key = value` lines, preceded by `extra` pairs (provenance and such).
    pub fn to_text(&self, extra: &[(&str, String)]) -> String {
        let join = |v: &[usize]| v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
        let mut out = String::new();
        for (k, v) in extra {
            let _ = writeln!(out, "{k}={v}");
        }
        let _ = writeln!(out, "total_frames={}", self.total_frames);
        let _ = writeln!(out, "symbols={}", self.per_symbol.len());
        let _ = writeln!(out, "states={}", self.per_state.len());
        let _ = writeln!(out, "mean_frames_per_symbol={}", self.mean_frames_per_symbol);
        let _ = writeln!(out, "termination={}", self.termination.as_str());
        let _ = writeln!(out, "state_durations={}", join(&self.per_state));
        let _ = writeln!(out, "symbol_durations={}", join(&self.per_symbol));
        out
    }
}
