use crate::error::{Error, Result};
use crate::kv;
use crate::numerics::{check_floor, DEFAULT_VARIANCE_FLOOR};

/// Architecture hyperparameters.
///
/// The encoder emits `states_per_symbol · state_dim` values per input symbol,
/// read as `states_per_symbol` consecutive state vectors, so an utterance of
/// `L` symbols defines an HMM with `N = states_per_symbol · L` states.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    /// Width of the single encoder convolution; must be odd.
    pub encoder_kernel: usize,
    /// Convolution channels and per-direction recurrent width of the encoder.
    pub encoder_dim: usize,
    pub states_per_symbol: usize,
    pub state_dim: usize,
    pub prenet_dims: Vec<usize>,
    pub decoder_dim: usize,
    /// Width of the feedforward layer inside the output network.
    pub output_hidden_dim: usize,
    pub acoustic_dim: usize,
    pub variance_floor: f64,
    pub prenet_dropout: f64,
    pub learn_go_token: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: 8,
            embed_dim: 16,
            encoder_kernel: 3,
            encoder_dim: 16,
            states_per_symbol: 2,
            state_dim: 16,
            prenet_dims: vec![16, 16],
            decoder_dim: 32,
            output_hidden_dim: 32,
            acoustic_dim: 4,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
            prenet_dropout: 0.5,
            learn_go_token: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("encoder_kernel", self.encoder_kernel),
            ("encoder_dim", self.encoder_dim),
            ("states_per_symbol", self.states_per_symbol),
            ("state_dim", self.state_dim),
            ("decoder_dim", self.decoder_dim),
            ("output_hidden_dim", self.output_hidden_dim),
            ("acoustic_dim", self.acoustic_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.encoder_kernel.is_multiple_of(2) {
            return Err(Error::Config("encoder_kernel must be odd".into()));
        }
        if self.prenet_dims.contains(&0) {
            return Err(Error::Config("prenet_dims must all be positive".into()));
        }
        check_floor(self.variance_floor)?;
        if !(0.0..1.0).contains(&self.prenet_dropout) {
            return Err(Error::Config(format!(
                "prenet_dropout must lie in [0, 1), got {}",
                self.prenet_dropout
            )));
        }
        Ok(())
    }

    /// Number of HMM states for an input of `symbols` symbols.
    pub fn num_states(&self, symbols: usize) -> usize {
        self.states_per_symbol * symbols
    }

    pub fn prenet_out_dim(&self) -> usize {
        self.prenet_dims.last().copied().unwrap_or(self.acoustic_dim)
    }

    /// Output layer width: mean, pre-softplus σ, and the transition logit.
    pub fn output_dim(&self) -> usize {
        2 * self.acoustic_dim + 1
    }

    /// Applies one `key = value` setting. Returns `false` for keys that are not
    /// model settings.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<bool> {
        match key {
            "vocab_size" => self.vocab_size = kv::value(key, raw)?,
            "embed_dim" => self.embed_dim = kv::value(key, raw)?,
            "encoder_kernel" => self.encoder_kernel = kv::value(key, raw)?,
            "encoder_dim" => self.encoder_dim = kv::value(key, raw)?,
            "states_per_symbol" => self.states_per_symbol = kv::value(key, raw)?,
            "state_dim" => self.state_dim = kv::value(key, raw)?,
            "prenet_dims" => self.prenet_dims = kv::list(key, raw)?,
            "decoder_dim" => self.decoder_dim = kv::value(key, raw)?,
            "output_hidden_dim" => self.output_hidden_dim = kv::value(key, raw)?,
            "acoustic_dim" => self.acoustic_dim = kv::value(key, raw)?,
            "variance_floor" => self.variance_floor = kv::value(key, raw)?,
            "prenet_dropout" => self.prenet_dropout = kv::value(key, raw)?,
            "learn_go_token" => self.learn_go_token = kv::value(key, raw)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Settings in `key = value` form; floats use round-trip formatting.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("vocab_size", self.vocab_size.to_string()),
            ("embed_dim", self.embed_dim.to_string()),
            ("encoder_kernel", self.encoder_kernel.to_string()),
            ("encoder_dim", self.encoder_dim.to_string()),
            ("states_per_symbol", self.states_per_symbol.to_string()),
            ("state_dim", self.state_dim.to_string()),
            ("prenet_dims", kv::join(&self.prenet_dims)),
            ("decoder_dim", self.decoder_dim.to_string()),
            ("output_hidden_dim", self.output_hidden_dim.to_string()),
            ("acoustic_dim", self.acoustic_dim.to_string()),
            ("variance_floor", format!("{:?}", self.variance_floor)),
            ("prenet_dropout", format!("{:?}", self.prenet_dropout)),
            ("learn_go_token", self.learn_go_token.to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_round_trip() {
        let cfg = ModelConfig {
            prenet_dims: vec![7, 3, 5],
            variance_floor: 0.0123,
            learn_go_token: false,
            ..ModelConfig::default()
        };
        let mut back = ModelConfig::default();
        for (k, v) in cfg.to_pairs() {
            assert!(back.set(k, &v).unwrap());
        }
        assert_eq!(back, cfg);
        assert!(!back.set("lr", "0.1").unwrap());
        assert!(back.set("state_dim", "x").is_err());
    }
}
