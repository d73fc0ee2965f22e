use serde::{Deserialize, Serialize};

/// What the learning-rate schedule decided after an epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleEvent {
    None,
    HalveLr,
    Stop,
}

impl std::fmt::Display for ScheduleEvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScheduleEvent::None => "none",
            ScheduleEvent::HalveLr => "halve",
            ScheduleEvent::Stop => "stop",
        })
    }
}

/// Plateau halving and early stopping on the validation loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub best_val_loss: f64,
    pub epochs_since_best: usize,
    pub epochs_above_best_consecutive: usize,
    pub current_lr: f64,
    pub halving_patience: usize,
    pub stop_patience: usize,
}

impl ScheduleState {
    pub fn new(initial_lr: f64, halving_patience: usize, stop_patience: usize) -> Self {
        ScheduleState {
            best_val_loss: f64::INFINITY,
            epochs_since_best: 0,
            epochs_above_best_consecutive: 0,
            current_lr: initial_lr,
            halving_patience,
            stop_patience,
        }
    }

    /// Only a strictly lower loss is a new best; ties count against it. The
    /// plateau counter restarts after each halving, so a long plateau halves
    /// repeatedly. Stopping takes precedence when both fire.
    pub fn update(&mut self, val_loss: f64) -> ScheduleEvent {
        if val_loss < self.best_val_loss {
            self.best_val_loss = val_loss;
            self.epochs_since_best = 0;
            self.epochs_above_best_consecutive = 0;
            return ScheduleEvent::None;
        }
        self.epochs_since_best += 1;
        self.epochs_above_best_consecutive += 1;
        if self.epochs_since_best >= self.stop_patience {
            ScheduleEvent::Stop
        } else if self.epochs_above_best_consecutive >= self.halving_patience {
            self.current_lr /= 2.0;
            self.epochs_above_best_consecutive = 0;
            ScheduleEvent::HalveLr
        } else {
            ScheduleEvent::None
        }
    }
}

pub fn schedule_update(state: &mut ScheduleState, val_loss: f64) -> ScheduleEvent {
    state.update(val_loss)
}
