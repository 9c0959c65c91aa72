//! Per-history random streams.
//!
//! Every history draws from its own ChaCha8 stream keyed by the run seed and
//! selected by the history index, so the variates a history sees never depend
//! on which worker runs it or in what order.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

/// Source of uniform variates on the open interval (0, 1).
pub trait UniformSource {
    fn open01(&mut self) -> f64;
}

impl<T: UniformSource + ?Sized> UniformSource for &mut T {
    fn open01(&mut self) -> f64 {
        (**self).open01()
    }
}

/// Counter-mode stream for one history.
#[derive(Debug, Clone)]
pub struct HistoryStream(ChaCha8Rng);

impl HistoryStream {
    pub fn new(seed: u64, history: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(history);
        Self(rng)
    }
}

impl UniformSource for HistoryStream {
    fn open01(&mut self) -> f64 {
        self.0.sample(Open01)
    }
}

/// Replays a fixed list of variates. Panics when exhausted.
#[derive(Debug, Clone, Default)]
pub struct ScriptedStream {
    values: VecDeque<f64>,
}

impl ScriptedStream {
    pub fn new(values: impl IntoIterator<Item = f64>) -> Self {
        Self {
            values: values.into_iter().collect(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.values.len()
    }
}

impl UniformSource for ScriptedStream {
    fn open01(&mut self) -> f64 {
        self.values.pop_front().expect("scripted stream exhausted")
    }
}
