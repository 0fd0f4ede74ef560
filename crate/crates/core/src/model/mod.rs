//! Neural parameterization of the HMM.
//!
//! * The encoder maps input symbols to `N = K · L` state vectors.
//! * The decoder is a pre-net followed by an LSTM; its state `a_t` depends only
//!   on previous frames, never on the HMM state, so it is computed once per frame
//!   and shared by all states.
//! * The output network is strictly feedforward and maps `(h_n, a_t)` to the
//!   emission mean and standard deviation plus the transition probability.

pub mod checkpoint;
mod config;
mod layers;

use rand::{Rng, SeedableRng};

pub use config::ModelConfig;
use layers::{BoundLinear, BoundLstm, Linear, Lstm};

use crate::error::{Error, Result};
use crate::numerics::{logit, softplus_inverse, Graph, ParamId, ParamStore, Tensor, Var};
use crate::Prng;

/// Transition probability used at flat start when no data statistics are available.
pub const FALLBACK_INIT_TAU: f64 = 0.1;

#[derive(Clone, Debug)]
struct Layout {
    embedding: ParamId,
    conv: Vec<ParamId>,
    conv_b: ParamId,
    enc_fwd: Lstm,
    enc_bwd: Lstm,
    enc_proj: Linear,
    go_token: Option<ParamId>,
    prenet: Vec<Linear>,
    decoder: Lstm,
    out_hidden_g: ParamId,
    out_hidden_a: ParamId,
    out_hidden_b: ParamId,
    out_layer: Linear,
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
    layout: Layout,
}

/// Graph leaves for every parameter of a [`Model`].
#[derive(Clone, Debug)]
pub struct Bound {
    embedding: Var,
    conv: Vec<Var>,
    conv_b: Var,
    enc_fwd: BoundLstm,
    enc_bwd: BoundLstm,
    enc_proj: BoundLinear,
    go_token: Var,
    prenet: Vec<BoundLinear>,
    decoder: BoundLstm,
    out_hidden_g: Var,
    out_hidden_a: Var,
    out_hidden_b: Var,
    out_layer: BoundLinear,
}

impl Bound {
    /// The learnable initial autoregressive input `x₀`.
    pub fn go_token(&self) -> Var {
        self.go_token
    }
}

/// Decoder recurrence state after consuming `frame` frames.
#[derive(Clone, Copy, Debug)]
pub struct DecoderState {
    pub h: Var,
    pub c: Var,
    pub frame: usize,
}

/// Per-row emission and transition parameters as graph nodes.
/// All fields have one row per queried state.
#[derive(Clone, Copy, Debug)]
pub struct EmissionVars {
    pub mu: Var,
    pub sigma: Var,
    pub tau_logit: Var,
    pub log_tau: Var,
    pub log_stay: Var,
}

/// Plain values of one state's emission parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct EmissionParams {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub tau: f64,
    pub log_tau: f64,
    pub log_stay: f64,
}

impl EmissionVars {
    pub fn row(&self, g: &Graph, r: usize) -> EmissionParams {
        let logit_v = g.value(self.tau_logit).get(r, 0);
        EmissionParams {
            mu: g.value(self.mu).row(r).to_vec(),
            sigma: g.value(self.sigma).row(r).to_vec(),
            tau: crate::numerics::sigmoid(logit_v),
            log_tau: g.value(self.log_tau).get(r, 0),
            log_stay: g.value(self.log_stay).get(r, 0),
        }
    }
}

/// Data summary used to pick the initial transition probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatStartStats {
    pub symbols: usize,
    pub frames: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCount {
    pub per_tensor: Vec<(String, usize)>,
    pub total: usize,
}

impl Model {
    /// All layers randomly initialized, including the output layer.
    pub fn new_random(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Prng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let layout = Layout::create(&config, &mut params, &mut rng);
        Ok(Model { config, params, layout })
    }

    /// Flat start: every layer initialized as in [`Model::new_random`] except the
    /// output layer, whose weights are zero and whose biases make every state
    /// emit `μ = 0`, `σ = 1` with transition probability `init_tau`.
    pub fn flat_start(config: ModelConfig, seed: u64, init_tau: f64) -> Result<Self> {
        let mut m = Self::new_random(config, seed)?;
        m.reset_output_layer(init_tau)?;
        Ok(m)
    }

    /// Initial transition probability `K · symbols / frames`, clamped to
    /// `[0.01, 0.99]`, or [`FALLBACK_INIT_TAU`] without statistics.
    pub fn init_tau_from_stats(config: &ModelConfig, stats: Option<FlatStartStats>) -> f64 {
        match stats {
            Some(s) if s.frames > 0 && s.symbols > 0 => {
                (config.states_per_symbol as f64 * s.symbols as f64 / s.frames as f64).clamp(0.01, 0.99)
            }
            _ => FALLBACK_INIT_TAU,
        }
    }

    pub fn reset_output_layer(&mut self, init_tau: f64) -> Result<()> {
        if !(init_tau > 0.0 && init_tau < 1.0) {
            return Err(Error::Config(format!("initial tau must lie in (0, 1), got {init_tau}")));
        }
        let d = self.config.acoustic_dim;
        let out = self.config.output_dim();
        let w = self.layout.out_layer.w;
        let (rows, cols) = self.params.get(w).shape();
        self.params.set_value(w, Tensor::zeros(rows, cols))?;
        let mut bias = vec![0.0; out];
        bias[d..2 * d].fill(softplus_inverse(1.0));
        bias[2 * d] = logit(init_tau);
        self.params.set_value(self.layout.out_layer.b, Tensor::row_vector(bias))
    }

    /// Rebuilds a model from stored tensors, checking names and shapes.
    pub fn from_params(config: ModelConfig, stored: &ParamStore) -> Result<Self> {
        let mut m = Self::new_random(config, 0)?;
        if stored.len() != m.params.len() {
            return Err(Error::Input(format!(
                "checkpoint holds {} tensors, configuration expects {}",
                stored.len(),
                m.params.len()
            )));
        }
        for (_, p) in stored.iter() {
            let id = m
                .params
                .id(&p.name)
                .ok_or_else(|| Error::Input(format!("unexpected tensor {}", p.name)))?;
            m.params
                .set_value(id, p.value.clone())
                .map_err(|e| Error::Input(e.to_string()))?;
        }
        Ok(m)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Current transition logit bias of the output layer.
    pub fn tau_bias(&self) -> f64 {
        let d = self.config.acoustic_dim;
        self.params.get(self.layout.out_layer.b).value.data()[2 * d]
    }

    pub fn param_count(&self) -> ParamCount {
        let per_tensor: Vec<(String, usize)> = self
            .params
            .iter()
            .map(|(_, p)| (p.name.clone(), p.value.len()))
            .collect();
        let total = per_tensor.iter().map(|(_, n)| n).sum();
        ParamCount { per_tensor, total }
    }

    pub fn bind(&self, g: &mut Graph) -> Bound {
        let p = &self.params;
        let l = &self.layout;
        let go_token = match l.go_token {
            Some(id) => p.bind(g, id),
            None => g.constant(Tensor::zeros(1, self.config.acoustic_dim)),
        };
        Bound {
            embedding: p.bind(g, l.embedding),
            conv: l.conv.iter().map(|&id| p.bind(g, id)).collect(),
            conv_b: p.bind(g, l.conv_b),
            enc_fwd: l.enc_fwd.bind(p, g),
            enc_bwd: l.enc_bwd.bind(p, g),
            enc_proj: l.enc_proj.bind(p, g),
            go_token,
            prenet: l.prenet.iter().map(|x| x.bind(p, g)).collect(),
            decoder: l.decoder.bind(p, g),
            out_hidden_g: p.bind(g, l.out_hidden_g),
            out_hidden_a: p.bind(g, l.out_hidden_a),
            out_hidden_b: p.bind(g, l.out_hidden_b),
            out_layer: l.out_layer.bind(p, g),
        }
    }

    pub fn check_symbols(&self, symbols: &[usize]) -> Result<()> {
        if symbols.is_empty() {
            return Err(Error::Input("empty symbol sequence".into()));
        }
        if let Some((pos, &id)) = symbols.iter().enumerate().find(|(_, &s)| s >= self.config.vocab_size) {
            return Err(Error::Input(format!(
                "symbol id {id} at position {pos} is outside the vocabulary of size {}",
                self.config.vocab_size
            )));
        }
        Ok(())
    }

    /// Maps symbols to the `N × state_dim` matrix of HMM state vectors; the
    /// `K` sub-states of each symbol are consecutive rows.
    pub fn encode(&self, g: &mut Graph, b: &Bound, symbols: &[usize]) -> Result<Var> {
        self.check_symbols(symbols)?;
        let cfg = &self.config;
        let len = symbols.len();
        let emb = g.gather_rows(b.embedding, symbols);

        let centre = (cfg.encoder_kernel / 2) as isize;
        let mut acc: Option<Var> = None;
        for (k, &w) in b.conv.iter().enumerate() {
            let shifted = g.shift_rows(emb, centre - k as isize, 0.0);
            let term = g.matmul(shifted, w);
            acc = Some(match acc {
                Some(a) => g.add(a, term),
                None => term,
            });
        }
        let conv_pre = g.add_row(acc.expect("kernel is non-empty"), b.conv_b);
        let conv = g.relu(conv_pre);

        let run = |g: &mut Graph, lstm: &BoundLstm, order: &mut dyn Iterator<Item = usize>| {
            let (mut h, mut c) = lstm.zero_state(g);
            let mut outs = vec![None; len];
            for i in order {
                let x = g.slice_rows(conv, i, 1);
                (h, c) = lstm.step(g, x, h, c);
                outs[i] = Some(h);
            }
            let outs: Vec<Var> = outs.into_iter().map(|v| v.expect("every step visited")).collect();
            g.stack_rows(&outs)
        };
        let fwd = run(g, &b.enc_fwd, &mut (0..len));
        let bwd = run(g, &b.enc_bwd, &mut (0..len).rev());
        let both = g.concat_cols(fwd, bwd);
        let proj = b.enc_proj.forward(g, both);
        Ok(g.reshape(proj, cfg.num_states(len), cfg.state_dim))
    }

    pub fn decoder_start(&self, g: &mut Graph, b: &Bound) -> DecoderState {
        let (h, c) = b.decoder.zero_state(g);
        DecoderState { h, c, frame: 0 }
    }

    /// Consumes `x_{t-1}` and returns `a_t`. Pre-net dropout is applied to every
    /// pre-net layer (go token included) whenever `dropout` carries a generator.
    pub fn decoder_advance(
        &self,
        g: &mut Graph,
        b: &Bound,
        prev_frame: Var,
        state: &DecoderState,
        dropout: Option<&mut Prng>,
    ) -> Result<DecoderState> {
        let (rows, cols) = g.value(prev_frame).shape();
        if rows != 1 || cols != self.config.acoustic_dim {
            return Err(Error::Contract(format!(
                "decoder input must be 1x{}, got {rows}x{cols}",
                self.config.acoustic_dim
            )));
        }
        let p = self.config.prenet_dropout;
        let mut rng = dropout;
        let mut x = prev_frame;
        for layer in &b.prenet {
            let pre = layer.forward(g, x);
            x = g.relu(pre);
            if let Some(rng) = rng.as_deref_mut() {
                if p > 0.0 {
                    let width = g.value(x).cols();
                    let keep = 1.0 / (1.0 - p);
                    let mask: Vec<f64> = (0..width)
                        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
                        .collect();
                    let m = g.constant(Tensor::row_vector(mask));
                    x = g.mul(x, m);
                }
            }
        }
        let (h, c) = b.decoder.step(g, x, state.h, state.c);
        Ok(DecoderState {
            h,
            c,
            frame: state.frame + 1,
        })
    }

    /// `states · W_g`, the state-dependent half of the output network's
    /// hidden layer. Computed once per utterance.
    pub fn project_states(&self, g: &mut Graph, b: &Bound, states: Var) -> Var {
        g.matmul(states, b.out_hidden_g)
    }

    /// Output network on pre-projected state vectors (see [`Model::project_states`]).
    pub fn output_net_projected(&self, g: &mut Graph, b: &Bound, projected: Var, a: &DecoderState) -> EmissionVars {
        let d = self.config.acoustic_dim;
        let from_a = g.matmul(a.h, b.out_hidden_a);
        let shared = g.add(from_a, b.out_hidden_b);
        let pre = g.add_row(projected, shared);
        let hidden = g.tanh(pre);
        let out = b.out_layer.forward(g, hidden);
        let mu = g.slice_cols(out, 0, d);
        let sigma_raw = g.slice_cols(out, d, d);
        let tau_logit = g.slice_cols(out, 2 * d, 1);
        let sigma = g.floored_softplus(sigma_raw, self.config.variance_floor);
        let log_tau = g.log_sigmoid(tau_logit);
        let neg = g.scale(tau_logit, -1.0);
        let log_stay = g.log_sigmoid(neg);
        EmissionVars {
            mu,
            sigma,
            tau_logit,
            log_tau,
            log_stay,
        }
    }

    /// Emission and transition parameters for each row of `states` given `a_t`.
    pub fn output_net(&self, g: &mut Graph, b: &Bound, states: Var, a: &DecoderState) -> EmissionVars {
        let projected = self.project_states(g, b, states);
        self.output_net_projected(g, b, projected, a)
    }
}

impl Layout {
    fn create(cfg: &ModelConfig, store: &mut ParamStore, rng: &mut impl Rng) -> Self {
        let e = cfg.embed_dim;
        let h = cfg.encoder_dim;
        let embedding = store.add(
            "encoder.embedding",
            layers::uniform(cfg.vocab_size, e, (3.0 / e as f64).sqrt(), rng),
        );
        let conv_bound = (6.0 / (cfg.encoder_kernel * e + h) as f64).sqrt();
        let conv = (0..cfg.encoder_kernel)
            .map(|k| store.add(format!("encoder.conv.w{k}"), layers::uniform(e, h, conv_bound, rng)))
            .collect();
        let conv_b = store.add("encoder.conv.b", Tensor::zeros(1, h));
        let enc_fwd = Lstm::new(store, "encoder.lstm_fwd", h, h, rng);
        let enc_bwd = Lstm::new(store, "encoder.lstm_bwd", h, h, rng);
        let enc_proj = Linear::new(store, "encoder.proj", 2 * h, cfg.states_per_symbol * cfg.state_dim, rng);

        let go_token = cfg
            .learn_go_token
            .then(|| store.add("decoder.go_token", Tensor::zeros(1, cfg.acoustic_dim)));
        let mut prenet = Vec::new();
        let mut width = cfg.acoustic_dim;
        for (i, &d) in cfg.prenet_dims.iter().enumerate() {
            prenet.push(Linear::new(store, &format!("decoder.prenet.{i}"), width, d, rng));
            width = d;
        }
        let decoder = Lstm::new(store, "decoder.lstm", width, cfg.decoder_dim, rng);

        let f = cfg.output_hidden_dim;
        let fan_in = cfg.state_dim + cfg.decoder_dim;
        let bound = (6.0 / (fan_in + f) as f64).sqrt();
        let out_hidden_g = store.add("output.hidden.wg", layers::uniform(cfg.state_dim, f, bound, rng));
        let out_hidden_a = store.add("output.hidden.wa", layers::uniform(cfg.decoder_dim, f, bound, rng));
        let out_hidden_b = store.add("output.hidden.b", Tensor::zeros(1, f));
        let out_layer = Linear::new(store, "output.layer", f, cfg.output_dim(), rng);
        Layout {
            embedding,
            conv,
            conv_b,
            enc_fwd,
            enc_bwd,
            enc_proj,
            go_token,
            prenet,
            decoder,
            out_hidden_g,
            out_hidden_a,
            out_hidden_b,
            out_layer,
        }
    }
}
