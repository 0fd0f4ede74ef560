//! Synthetic corpora with known alignments.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use super::Utterance;
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::Prng;

/// Generator settings. Each symbol owns one or more segment means; a symbol
/// occurrence of `d` frames splits its frames evenly across its segments, so
/// two segments give a bimodal pattern within the symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct ToySpec {
    pub dim: usize,
    /// `means[symbol][segment]` is a `dim`-vector.
    pub means: Vec<Vec<Vec<f64>>>,
    pub min_duration: usize,
    pub max_duration: usize,
    pub noise: f64,
    pub min_symbols: usize,
    pub max_symbols: usize,
    pub seed: u64,
}

impl ToySpec {
    /// Means drawn uniformly from `[-2, 2]^dim`, `segments` per symbol.
    pub fn random(vocab_size: usize, dim: usize, segments: usize, seed: u64) -> Self {
        let mut rng = Prng::seed_from_u64(seed ^ 0x5eed_70c0);
        let means = (0..vocab_size)
            .map(|_| {
                (0..segments)
                    .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
                    .collect()
            })
            .collect();
        ToySpec {
            dim,
            means,
            min_duration: 3.max(2 * segments),
            max_duration: 8.max(4 * segments),
            noise: 0.3,
            min_symbols: 2,
            max_symbols: 6,
            seed,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.means.len()
    }

    pub fn validate(&self, states_per_symbol: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.means.is_empty() || self.dim == 0 {
            return bad("toy spec needs at least one symbol and one dimension".into());
        }
        for (s, segs) in self.means.iter().enumerate() {
            if segs.is_empty() || segs.iter().any(|m| m.len() != self.dim) {
                return bad(format!("toy symbol {s} needs segment means of dimension {}", self.dim));
            }
            if self.min_duration < segs.len() {
                return bad(format!("toy symbol {s} has more segments than min_duration"));
            }
        }
        if self.min_duration < states_per_symbol.max(1) {
            return bad(format!(
                "toy min_duration {} is below states per symbol {states_per_symbol}",
                self.min_duration
            ));
        }
        if self.max_duration < self.min_duration {
            return bad("toy max_duration is below min_duration".into());
        }
        if self.min_symbols == 0 || self.max_symbols < self.min_symbols {
            return bad("toy symbol count range is empty".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("toy noise must be finite and non-negative".into());
        }
        Ok(())
    }
}

/// `count` utterances with gold alignments. Pure in `(spec, count)`.
pub fn generate_toy_corpus(spec: &ToySpec, count: usize) -> Result<Vec<Utterance>> {
    spec.validate(1)?;
    let mut rng = Prng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let len = rng.random_range(spec.min_symbols..=spec.max_symbols);
        let symbols: Vec<usize> = (0..len).map(|_| rng.random_range(0..spec.vocab_size())).collect();
        let mut data = Vec::new();
        let mut gold = Vec::new();
        for (pos, &s) in symbols.iter().enumerate() {
            let d = rng.random_range(spec.min_duration..=spec.max_duration);
            let segs = &spec.means[s];
            for f in 0..d {
                let mean = &segs[f * segs.len() / d];
                for &m in mean {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    data.push(m + spec.noise * z);
                }
                gold.push(pos);
            }
        }
        out.push(Utterance {
            id: format!("toy{i:05}"),
            symbols,
            frames: Tensor::new(gold.len(), spec.dim, data),
            gold: Some(gold),
        });
    }
    Ok(out)
}

/// Per-frame target means implied by the gold alignment of a toy utterance.
pub fn gold_means(spec: &ToySpec, utt: &Utterance) -> Result<Tensor> {
    let gold = utt
        .gold
        .as_ref()
        .ok_or_else(|| Error::Contract(format!("utterance {} has no gold alignment", utt.id)))?;
    let mut out = Tensor::zeros(gold.len(), spec.dim);
    let mut t = 0;
    while t < gold.len() {
        let pos = gold[t];
        let d = gold[t..].iter().take_while(|&&p| p == pos).count();
        let segs = &spec.means[utt.symbols[pos]];
        for f in 0..d {
            out.row_mut(t + f).copy_from_slice(&segs[f * segs.len() / d]);
        }
        t += d;
    }
    Ok(out)
}
