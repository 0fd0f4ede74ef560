use crate::error::{Error, Result};

/// Frame-to-state map `s₀..s_{T-1}` (0-based states).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alignment {
    states: Vec<usize>,
}

impl Alignment {
    pub fn new(states: Vec<usize>) -> Self {
        Alignment { states }
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Checks locality and monotonicity (`s₀ = 0`, increments in {0, 1}, all
    /// states `< num_states`) and, when `complete`, that the last frame is in
    /// the last state.
    pub fn validate(&self, num_states: usize, complete: bool) -> Result<()> {
        let s = &self.states;
        if s.is_empty() {
            return Err(Error::Contract("empty alignment".into()));
        }
        if s[0] != 0 {
            return Err(Error::Contract(format!("alignment starts in state {}", s[0])));
        }
        for (t, w) in s.windows(2).enumerate() {
            if w[1] != w[0] && w[1] != w[0] + 1 {
                return Err(Error::Contract(format!(
                    "alignment jumps from state {} to {} at frame {}",
                    w[0],
                    w[1],
                    t + 1
                )));
            }
        }
        let last = *s.last().expect("non-empty");
        if last >= num_states {
            return Err(Error::Contract(format!(
                "alignment reaches state {last} of {num_states}"
            )));
        }
        if complete && last != num_states - 1 {
            return Err(Error::Contract(format!(
                "alignment ends in state {last}, expected {}",
                num_states - 1
            )));
        }
        Ok(())
    }

    pub fn is_valid(&self, num_states: usize, complete: bool) -> bool {
        self.validate(num_states, complete).is_ok()
    }

    /// Frames spent in each of `num_states` states.
    pub fn durations(&self, num_states: usize) -> Vec<usize> {
        let mut d = vec![0; num_states];
        for &s in &self.states {
            if s < num_states {
                d[s] += 1;
            }
        }
        d
    }

    /// Collapses `K` sub-states per symbol to symbol indices.
    pub fn to_symbols(&self, states_per_symbol: usize) -> Vec<usize> {
        self.states.iter().map(|s| s / states_per_symbol).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Alignment::new(vec![0, 0, 1, 2, 2]).is_valid(3, true));
        assert!(!Alignment::new(vec![0, 0, 1]).is_valid(3, true));
        assert!(Alignment::new(vec![0, 0, 1]).is_valid(3, false));
        assert!(!Alignment::new(vec![1, 1, 2]).is_valid(3, false));
        assert!(!Alignment::new(vec![0, 2]).is_valid(3, false));
        assert!(!Alignment::new(vec![0, 1, 0]).is_valid(3, false));
        assert!(!Alignment::new(vec![]).is_valid(3, false));
    }

    #[test]
    fn durations_and_symbols() {
        let a = Alignment::new(vec![0, 0, 1, 2, 2, 2, 3]);
        assert_eq!(a.durations(4), vec![2, 1, 3, 1]);
        assert_eq!(a.to_symbols(2), vec![0, 0, 0, 1, 1, 1, 1]);
    }
}
