use super::Utterance;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Per-dimension mean and (population) standard deviation of the training frames.
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn identity(dim: usize) -> Self {
        NormStats {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn compute<'a>(utterances: impl IntoIterator<Item = &'a Utterance>) -> Result<Self> {
        Self::from_frames(utterances.into_iter().map(|u| &u.frames))
    }

    pub fn from_frames<'a>(frames: impl IntoIterator<Item = &'a Tensor>) -> Result<Self> {
        let mats: Vec<&Tensor> = frames.into_iter().collect();
        let dim = mats.first().map_or(0, |m| m.cols());
        if mats.iter().any(|m| m.cols() != dim) {
            return Err(Error::Input("utterances have differing feature dimensions".into()));
        }
        let count: usize = mats.iter().map(|m| m.rows()).sum();
        if count < 2 || dim == 0 {
            return Err(Error::Input(format!(
                "normalization needs at least 2 frames, got {count}"
            )));
        }
        let mut mean = vec![0.0; dim];
        for m in &mats {
            for r in 0..m.rows() {
                for (acc, v) in mean.iter_mut().zip(m.row(r)) {
                    *acc += v;
                }
            }
        }
        mean.iter_mut().for_each(|v| *v /= count as f64);
        let mut var = vec![0.0; dim];
        for m in &mats {
            for r in 0..m.rows() {
                for ((acc, v), mu) in var.iter_mut().zip(m.row(r)).zip(&mean) {
                    *acc += (v - mu) * (v - mu);
                }
            }
        }
        let std: Vec<f64> = var.iter().map(|v| (v / count as f64).sqrt()).collect();
        if let Some(d) = std.iter().position(|&s| s.is_nan() || s <= 1e-12) {
            return Err(Error::Input(format!("feature dimension {d} has zero variance")));
        }
        Ok(NormStats { mean, std })
    }

    fn check(&self, m: &Tensor) -> Result<()> {
        if m.cols() != self.dim() {
            return Err(Error::Contract(format!(
                "frames have {} dims, normalization has {}",
                m.cols(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, m: &Tensor) -> Result<Tensor> {
        self.check(m)?;
        let mut out = m.clone();
        for r in 0..out.rows() {
            for ((v, mu), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - mu) / s;
            }
        }
        Ok(out)
    }

    pub fn invert(&self, m: &Tensor) -> Result<Tensor> {
        self.check(m)?;
        let mut out = m.clone();
        for r in 0..out.rows() {
            for ((v, mu), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + mu;
            }
        }
        Ok(out)
    }

    pub fn apply_all(&self, utts: &mut [Utterance]) -> Result<()> {
        for u in utts {
            u.frames = self.apply(&u.frames)?;
        }
        Ok(())
    }
}
