use super::{build_lattice, check_feasible, forward_loglik_graph};
use crate::data::Utterance;
use crate::error::{Error, Result};
use crate::model::{Bound, Model};
use crate::numerics::{Graph, Tensor, Var};
use crate::Prng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InfeasiblePolicy {
    #[default]
    Abort,
    Skip,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct LossOptions {
    /// Pre-net dropout during the teacher-forced pass.
    pub dropout: bool,
    /// Optimize NLL per frame instead of NLL per utterance.
    pub per_frame: bool,
    pub infeasible: InfeasiblePolicy,
    pub gradients: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NllReport {
    /// Mean over items of `-ln p(x | symbols)`.
    pub mean_nll: f64,
    /// Total NLL divided by total frames.
    pub nll_per_frame: f64,
    pub items: usize,
    pub frames: usize,
    /// Per-item log likelihoods in batch order (skipped items omitted).
    pub logliks: Vec<f64>,
    pub skipped: Vec<String>,
}

pub struct NllOutput {
    pub report: NllReport,
    /// Gradient of the optimized objective, aligned with `model.params()`.
    pub gradients: Option<Vec<Tensor>>,
}

/// Graph node for `ln p(frames | symbols)` under the model.
pub fn utterance_loglik(
    g: &mut Graph,
    model: &Model,
    bound: &Bound,
    symbols: &[usize],
    frames: &Tensor,
    dropout: Option<&mut Prng>,
) -> Result<Var> {
    check_feasible(frames.rows(), model.config().num_states(symbols.len()))?;
    let states = model.encode(g, bound, symbols)?;
    let lat = build_lattice(g, model, bound, states, frames, dropout)?;
    forward_loglik_graph(g, &lat)
}

/// Mean negative log likelihood of a batch, optionally with gradients.
/// Each item gets its own graph; gradients are summed in batch order.
pub fn nll_loss(model: &Model, batch: &[&Utterance], opts: &LossOptions, rng: &mut Prng) -> Result<NllOutput> {
    let k = model.config().states_per_symbol;
    let mut feasible: Vec<&Utterance> = Vec::with_capacity(batch.len());
    let mut skipped = Vec::new();
    for u in batch {
        let states = k * u.symbols.len();
        if u.frames.rows() < states {
            match opts.infeasible {
                InfeasiblePolicy::Abort => {
                    return Err(Error::Input(format!(
                        "utterance {}: {} frames cannot cover {} states",
                        u.id,
                        u.frames.rows(),
                        states
                    )))
                }
                InfeasiblePolicy::Skip => skipped.push(u.id.clone()),
            }
        } else {
            feasible.push(u);
        }
    }
    if feasible.is_empty() {
        return Err(Error::Input("no feasible utterances in batch".into()));
    }

    let total_frames: usize = feasible.iter().map(|u| u.frames.rows()).sum();
    let items = feasible.len();
    let mut grads: Option<Vec<Tensor>> = opts.gradients.then(|| {
        model
            .params()
            .iter()
            .map(|(_, p)| Tensor::zeros(p.value.rows(), p.value.cols()))
            .collect()
    });
    let mut logliks = Vec::with_capacity(items);

    for u in feasible {
        let mut g = Graph::new();
        let bound = model.bind(&mut g);
        let dropout = if opts.dropout { Some(&mut *rng) } else { None };
        let ll = utterance_loglik(&mut g, model, &bound, &u.symbols, &u.frames, dropout)?;
        let value = g.scalar(ll);
        if !value.is_finite() {
            let diag = g
                .first_non_finite()
                .map(|(i, op)| format!(" (first non-finite node #{i}, {op})"))
                .unwrap_or_default();
            return Err(Error::Numerical(format!(
                "log likelihood of utterance {} is {value}{diag}",
                u.id
            )));
        }
        logliks.push(value);
        if let Some(acc) = grads.as_mut() {
            // d(-ll)/dθ, scaled to the batch objective
            let scale = if opts.per_frame {
                -1.0 / total_frames as f64
            } else {
                -1.0 / items as f64
            };
            let gr = g.backward(ll)?;
            for (id, t) in gr.params(&g) {
                let dst = &mut acc[id.index()];
                for (a, b) in dst.data_mut().iter_mut().zip(t.data()) {
                    *a += scale * b;
                }
            }
        }
    }

    let total_nll: f64 = -logliks.iter().sum::<f64>();
    Ok(NllOutput {
        report: NllReport {
            mean_nll: total_nll / items as f64,
            nll_per_frame: total_nll / total_frames as f64,
            items,
            frames: total_frames,
            logliks,
            skipped,
        },
        gradients: grads,
    })
}
