//! Learned policy: relaxed decisions from an MLP, quantized into candidate
//! binary decisions, and trained on the critic's choices.

pub mod memory;
pub mod mlp;
pub mod quantizer;

use rand::Rng;

pub use memory::ReplayMemory;
pub use mlp::{Adam, MlpParameters};
pub use quantizer::{nop_quantize, nop_quantize_with_noise, order_preserving, QuantizerSchedule};

use crate::config::SimConfig;
use crate::env::{mean_channel_gains, FrameObservation};
use crate::error::Result;
use crate::resalloc::OffloadDecision;

/// Network input `[h/h̄, Q/Q_scale, Y/Y_scale]`, length 3N.
pub fn normalize_input(obs: &FrameObservation, cfg: &SimConfig) -> Vec<f64> {
    normalize_with(obs, &mean_channel_gains(cfg), cfg)
}

fn normalize_with(obs: &FrameObservation, mean_gain: &[f64], cfg: &SimConfig) -> Vec<f64> {
    let l = &cfg.learning;
    obs.h
        .iter()
        .zip(mean_gain)
        .map(|(h, m)| h / m)
        .chain(obs.q.iter().map(|q| q / l.queue_scale))
        .chain(obs.y.iter().map(|y| y / l.energy_queue_scale))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainStatus {
    /// Not enough samples yet, or not a training frame.
    Skipped,
    Trained { loss: f64 },
}

/// Output of the actor for one frame.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub features: Vec<f64>,
    pub relaxed: Vec<f64>,
    pub candidates: Vec<OffloadDecision>,
}

#[derive(Debug, Clone)]
pub struct Actor {
    pub params: MlpParameters,
    pub adam: Adam,
    pub memory: ReplayMemory,
    pub schedule: QuantizerSchedule,
    batch_size: usize,
    training_interval: usize,
    mean_gain: Vec<f64>,
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(cfg: &SimConfig, init_rng: &mut R) -> Self {
        let l = &cfg.learning;
        let n = cfg.num_devices;
        let mut sizes = vec![3 * n];
        sizes.extend(&l.hidden);
        sizes.push(n);
        let params = MlpParameters::init(&sizes, l.init, init_rng);
        Self {
            adam: Adam::new(&sizes, l.learning_rate, l.adam_beta1, l.adam_beta2, l.adam_epsilon),
            params,
            memory: ReplayMemory::new(l.memory_size),
            schedule: QuantizerSchedule::new(n, l.m_update_interval),
            batch_size: l.batch_size,
            training_interval: l.training_interval,
            mean_gain: mean_channel_gains(cfg),
        }
    }

    /// Update `M_t`, run the network and quantize.
    pub fn propose<R: Rng + ?Sized>(
        &mut self,
        obs: &FrameObservation,
        cfg: &SimConfig,
        quant_rng: &mut R,
    ) -> Result<Proposal> {
        let m = self.schedule.update(obs.t);
        let features = normalize_with(obs, &self.mean_gain, cfg);
        let relaxed = self.params.forward(&features)?;
        let candidates = nop_quantize(&relaxed, m, quant_rng)?;
        Ok(Proposal {
            features,
            relaxed,
            candidates,
        })
    }

    /// Store the critic's choice and note its index for the `M_t` schedule.
    pub fn record_choice(&mut self, features: Vec<f64>, x: &OffloadDecision, index: usize) {
        self.memory.record(features, x);
        self.schedule.record(index);
    }

    /// Whether the warm-up threshold (more than q/2 samples) is met.
    pub fn warmed_up(&self) -> bool {
        self.memory.len() > self.memory.capacity() / 2
    }

    /// One Adam step on a uniformly sampled batch.
    pub fn train_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<TrainStatus> {
        if !self.warmed_up() {
            return Ok(TrainStatus::Skipped);
        }
        let idx = self.memory.sample_indices(rng, self.batch_size);
        let (inputs, targets): (Vec<&[f64]>, Vec<&[f64]>) = idx.iter().map(|&k| self.memory.get(k)).unzip();
        let (loss, grads) = self.params.loss_and_gradient(&inputs, &targets)?;
        self.adam.apply(&mut self.params, &grads);
        Ok(TrainStatus::Trained { loss })
    }

    /// Train if frame `t` is a training frame.
    pub fn maybe_train<R: Rng + ?Sized>(&mut self, t: usize, rng: &mut R) -> Result<TrainStatus> {
        if !t.is_multiple_of(self.training_interval) {
            return Ok(TrainStatus::Skipped);
        }
        self.train_step(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn normalization_blocks() {
        let c = SimConfig::with_devices(2).unwrap();
        let h = mean_channel_gains(&c);
        let obs = FrameObservation {
            t: 1,
            h: h.clone(),
            q: vec![0.0; 2],
            y: vec![0.0; 2],
        };
        assert_eq!(normalize_input(&obs, &c), vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let doubled = FrameObservation {
            h: h.iter().map(|v| 2.0 * v).collect(),
            q: vec![50.0, 10.0],
            y: vec![500.0, 0.0],
            ..obs
        };
        let f = normalize_input(&doubled, &c);
        assert_eq!(f.len(), 6);
        assert_eq!(&f[..2], &[2.0, 2.0]);
        assert_eq!(&f[2..], &[0.5, 0.1, 0.5, 0.0]);
    }

    #[test]
    fn training_waits_for_warm_up() {
        let mut c = SimConfig::with_devices(2).unwrap();
        c.learning.memory_size = 4;
        let mut rng = stream(2, Stream::NetworkInit);
        let mut actor = Actor::new(&c, &mut rng);
        let x = OffloadDecision::from_bits(&[1, 0]);
        for _ in 0..2 {
            actor.record_choice(vec![0.1; 6], &x, 0);
        }
        assert_eq!(actor.train_step(&mut rng).unwrap(), TrainStatus::Skipped);
        actor.record_choice(vec![0.2; 6], &x, 0);
        assert!(matches!(actor.train_step(&mut rng).unwrap(), TrainStatus::Trained { .. }));
        assert_eq!(actor.maybe_train(3, &mut rng).unwrap(), TrainStatus::Skipped);
    }

    #[test]
    fn imitation_of_a_fixed_decision() {
        let c = SimConfig::with_devices(3).unwrap();
        let mut rng = stream(4, Stream::NetworkInit);
        let mut actor = Actor::new(&c, &mut rng);
        let x = OffloadDecision::from_bits(&[1, 0, 1]);
        let features = vec![0.9, 1.1, 0.8, 0.1, 0.05, 0.2, 0.0, 0.3, 0.1];
        for _ in 0..actor.memory.capacity() {
            actor.record_choice(features.clone(), &x, 0);
        }
        let mut loss = f64::INFINITY;
        for _ in 0..500 {
            if let TrainStatus::Trained { loss: l } = actor.train_step(&mut rng).unwrap() {
                loss = l;
            }
        }
        assert!(loss < 1e-2, "{loss}");
        let out = actor.params.forward(&features).unwrap();
        assert!(out[0] > 0.9 && out[1] < 0.1 && out[2] > 0.9);
    }
}
