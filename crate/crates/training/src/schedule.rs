use serde::{Deserialize, Serialize};

use crate::{Result, TrainingError};

/// Cosine decay with warm restarts.
///
/// Cycle `i` lasts `first_cycle_steps · cycle_growth^i` steps and starts at
/// `lr_initial · peak_decay^i`; within a cycle the rate follows a half
/// cosine down towards the absolute floor `lr_min`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    pub lr_initial: f64,
    pub first_cycle_steps: u64,
    pub cycle_growth: u64,
    pub peak_decay: f64,
    pub lr_min: f64,
}

impl Default for TrainingSchedule {
    fn default() -> Self {
        Self { lr_initial: 1e-4, first_cycle_steps: 100, cycle_growth: 5, peak_decay: 0.9, lr_min: 1e-5 }
    }
}

impl TrainingSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr_min.is_finite()
            && self.lr_initial.is_finite()
            && self.lr_min >= 0.0
            && self.lr_min < self.lr_initial
            && self.cycle_growth >= 1
            && self.first_cycle_steps >= 1
            && self.peak_decay > 0.0
            && self.peak_decay <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(TrainingError::Config(format!("invalid schedule {self:?}")))
        }
    }

    /// Cycle index and step within that cycle.
    fn locate(&self, step: u64) -> (u32, u64, u64) {
        let (mut cycle, mut start, mut len) = (0u32, 0u64, self.first_cycle_steps);
        while step - start >= len {
            start += len;
            cycle += 1;
            len = len.saturating_mul(self.cycle_growth);
        }
        (cycle, step - start, len)
    }

    pub fn learning_rate_at(&self, step: u64) -> f64 {
        let (cycle, t, len) = self.locate(step);
        // Once the peak has decayed below the floor the rate stays put.
        let peak = (self.lr_initial * self.peak_decay.powi(cycle as i32)).max(self.lr_min);
        let cos = (std::f64::consts::PI * t as f64 / len as f64).cos();
        self.lr_min + (peak - self.lr_min) * 0.5 * (1.0 + cos)
    }
}

pub fn learning_rate_at(step: u64, schedule: &TrainingSchedule) -> f64 {
    schedule.learning_rate_at(step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cycle_boundaries() {
        let s = TrainingSchedule::default();
        assert_eq!(s.locate(99), (0, 99, 100));
        assert_eq!(s.locate(100), (1, 0, 500));
        assert_eq!(s.locate(600), (2, 0, 2500));
        assert_eq!(s.locate(3099), (2, 2499, 2500));
    }

    #[test]
    fn rejects_inverted_bounds() {
        let s = TrainingSchedule { lr_min: 2e-4, ..Default::default() };
        assert!(s.validate().is_err());
        assert!(TrainingSchedule { cycle_growth: 0, ..Default::default() }.validate().is_err());
        assert!(TrainingSchedule::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn decreasing_within_a_cycle(step in 0u64..1_000_000) {
            let s = TrainingSchedule::default();
            let (_, t, len) = s.locate(step);
            if t + 1 < len {
                prop_assert!(s.learning_rate_at(step + 1) <= s.learning_rate_at(step));
            } else {
                prop_assert!(s.learning_rate_at(step + 1) >= s.learning_rate_at(step));
            }
        }

        #[test]
        fn custom_schedules_stay_in_bounds(step in 0u64..100_000, growth in 1u64..4, first in 1u64..50, decay in 0.1f64..1.0) {
            let s = TrainingSchedule { first_cycle_steps: first, cycle_growth: growth, peak_decay: decay, ..Default::default() };
            let lr = s.learning_rate_at(step);
            prop_assert!(lr >= s.lr_min && lr <= s.lr_initial);
        }
    }
}
