//! Training-symbol bookkeeping shared by all alignment methods.

use rand::Rng;

use crate::arrays::WeightVector;
use crate::channel::{estimate_gain, simulate_training, ChannelSnapshot, GainEstimate, TrainingSignal};
use crate::error::Result;

/// One beam-alignment session: a frozen channel, fixed BS weights and the
/// random stream that supplies receiver noise.
///
/// Every call to [`Trainer::train`] consumes one training OFDM symbol and
/// one gain estimation; the running count is what the budget audits read.
pub struct Trainer<'a, R: Rng + ?Sized> {
    chan: &'a ChannelSnapshot,
    tx_w: &'a WeightVector,
    sig: &'a TrainingSignal,
    rng: &'a mut R,
    trainings: usize,
}

impl<'a, R: Rng + ?Sized> Trainer<'a, R> {
    pub fn new(
        chan: &'a ChannelSnapshot,
        tx_w: &'a WeightVector,
        sig: &'a TrainingSignal,
        rng: &'a mut R,
    ) -> Self {
        Self {
            chan,
            tx_w,
            sig,
            rng,
            trainings: 0,
        }
    }

    /// Receives one training symbol through `rx_w` and returns the ML gain
    /// estimate.
    pub fn train(&mut self, rx_w: &WeightVector) -> Result<GainEstimate> {
        let received = simulate_training(self.chan, self.tx_w, rx_w, self.sig, self.rng)?;
        let est = estimate_gain(&received, self.sig)?;
        self.trainings += 1;
        Ok(est)
    }

    pub fn trainings(&self) -> usize {
        self.trainings
    }

    pub fn channel(&self) -> &ChannelSnapshot {
        self.chan
    }
}
