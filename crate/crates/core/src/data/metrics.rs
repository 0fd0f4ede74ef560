use crate::error::{Error, Result};
use crate::lattice::Alignment;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignmentScore {
    pub frame_accuracy: f64,
    pub boundary_f1: f64,
}

/// Frames `t` where a new symbol starts (`t > 0`).
fn boundaries(symbols: &[usize]) -> Vec<usize> {
    (1..symbols.len()).filter(|&t| symbols[t] != symbols[t - 1]).collect()
}

/// Greedy one-to-one matching within `tol` frames; both lists ascending.
fn matched(gold: &[usize], pred: &[usize], tol: usize) -> usize {
    let mut used = vec![false; pred.len()];
    let mut hits = 0;
    for &b in gold {
        let best = pred
            .iter()
            .enumerate()
            .filter(|&(j, &p)| !used[j] && p.abs_diff(b) <= tol)
            .min_by_key(|&(_, &p)| p.abs_diff(b));
        if let Some((j, _)) = best {
            used[j] = true;
            hits += 1;
        }
    }
    hits
}

/// Compares a state alignment, collapsed to symbol positions, with a gold
/// symbol-position alignment. Boundaries match within one frame.
pub fn alignment_accuracy(predicted: &Alignment, gold: &[usize], states_per_symbol: usize) -> Result<AlignmentScore> {
    if predicted.len() != gold.len() {
        return Err(Error::Contract(format!(
            "alignment has {} frames, gold has {}",
            predicted.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::Contract("empty alignment".into()));
    }
    let pred = predicted.to_symbols(states_per_symbol);
    let correct = pred.iter().zip(gold).filter(|(a, b)| a == b).count();
    let (gb, pb) = (boundaries(gold), boundaries(&pred));
    let boundary_f1 = if gb.is_empty() && pb.is_empty() {
        1.0
    } else {
        let hits = matched(&gb, &pb, 1) as f64;
        2.0 * hits / (gb.len() + pb.len()) as f64
    };
    Ok(AlignmentScore {
        frame_accuracy: correct as f64 / gold.len() as f64,
        boundary_f1,
    })
}
