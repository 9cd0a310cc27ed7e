use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::numerics::Tensor2D;
use crate::worldkit::{normalize_returns, Dataset, ReturnNormalizer, Standardizer};

/// One training example: `H` consecutive states and the normalised return
/// of the episode they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    pub states: Tensor2D,
    pub ret: f64,
    pub episode: usize,
    pub start: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowSet {
    pub windows: Vec<Window>,
    pub returns: ReturnNormalizer,
}

/// Stride-1 windows over every episode long enough to hold one.
pub fn window_dataset(dataset: &Dataset, horizon: usize) -> Result<WindowSet> {
    if horizon == 0 {
        return Err(Error::Config("window length must be positive".into()));
    }
    let (returns, scaled) = normalize_returns(dataset)?;
    let mut windows = Vec::new();
    for (episode, (ep, &ret)) in dataset.episodes.iter().zip(&scaled).enumerate() {
        if ep.states.len() < horizon {
            continue;
        }
        for start in 0..=ep.states.len() - horizon {
            windows.push(Window {
                states: Tensor2D::from_rows(&ep.states[start..start + horizon])?,
                ret,
                episode,
                start,
            });
        }
    }
    if windows.is_empty() {
        return Err(Error::Length(format!(
            "no episode holds {horizon} states"
        )));
    }
    Ok(WindowSet { windows, returns })
}

/// The `len` states ending at `states[end]`, front-padded with the first
/// state, matching what a [`HistoryQueue`] holds at that point.
pub fn history_before(states: &[Vec<f64>], end: usize, len: usize) -> Result<Tensor2D> {
    if end >= states.len() || len == 0 {
        return Err(Error::Length(format!(
            "history of {len} ending at {end} in an episode of {}",
            states.len()
        )));
    }
    let rows: Vec<&Vec<f64>> = (0..len)
        .map(|k| &states[(end + k + 1).saturating_sub(len)])
        .collect();
    Tensor2D::from_rows(&rows)
}

/// Per-dimension state standardiser fitted on every recorded state.
pub fn fit_state_normalizer(dataset: &Dataset) -> Result<Standardizer> {
    let rows: Vec<&Vec<f64>> = dataset.episodes.iter().flat_map(|e| &e.states).collect();
    Standardizer::fit(&Tensor2D::from_rows(&rows)?)
}

/// Bounded FIFO of observed states.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryQueue {
    capacity: usize,
    states: VecDeque<Vec<f64>>,
}

impl HistoryQueue {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "history capacity must be positive");
        Self {
            capacity,
            states: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn push(&mut self, state: Vec<f64>) {
        if self.states.len() == self.capacity {
            self.states.pop_front();
        }
        self.states.push_back(state);
    }

    pub fn latest(&self) -> Option<&[f64]> {
        self.states.back().map(Vec::as_slice)
    }

    pub fn clear(&mut self) {
        self.states.clear();
    }

    /// `capacity` rows, oldest first, front-padded with the oldest state.
    pub fn padded(&self) -> Result<Tensor2D> {
        let oldest = self
            .states
            .front()
            .ok_or_else(|| Error::Length("history queue is empty".into()))?;
        let pad = self.capacity - self.states.len();
        let rows: Vec<&Vec<f64>> = std::iter::repeat(oldest)
            .take(pad)
            .chain(self.states.iter())
            .collect();
        Tensor2D::from_rows(&rows)
    }
}
