/// What the training loop should do after an epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    /// New best development score; keep this epoch's weights.
    Improved,
    Continue,
    Stop,
}

/// Stops once the development MSE has failed to improve on the best value
/// for `patience` consecutive epochs.
#[derive(Clone, Debug)]
pub struct EarlyStopper {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        assert!(patience >= 1, "patience must be at least 1");
        Self { patience, best: None, stale: 0 }
    }

    /// Records the score of `epoch` (1-based). Non-finite scores never
    /// count as improvements.
    pub fn observe(&mut self, epoch: usize, dev_mse: f64) -> StopDecision {
        let improved = dev_mse.is_finite() && self.best.is_none_or(|(_, b)| dev_mse < b);
        if improved {
            self.best = Some((epoch, dev_mse));
            self.stale = 0;
            return StopDecision::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    /// Epoch and score of the best observation so far.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}
