use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{adam_step, AdamConfig, AdamState, ReverbModel};
use crate::autodiff::Tensor;
use crate::degrade::{draw_reverb_branch, DEFAULT_SWITCH_PROBABILITY};
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::signal::LogMelSpectrogram;

/// One supervised triple. `clean` and `reverberant` share a frame count;
/// `degraded` is the encoder input.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub clean: LogMelSpectrogram,
    pub reverberant: LogMelSpectrogram,
    pub degraded: LogMelSpectrogram,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub q: f64,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            q: DEFAULT_SWITCH_PROBABILITY,
            steps: 5000,
            batch: 8,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::invalid(format!(
                "switch probability {} outside [0, 1]",
                self.q
            )));
        }
        if self.batch == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean example loss per step.
    pub losses: Vec<f64>,
    pub clean_branches: usize,
    pub reverb_branches: usize,
}

/// Trains `model` with the switching objective. `on_step` is called after
/// every update with the step index (0-based), the step loss and the
/// current model.
pub fn train(
    items: &[TrainItem],
    mut model: ReverbModel,
    cfg: &TrainConfig,
    mut on_step: impl FnMut(usize, f64, &ReverbModel) -> Result<()>,
) -> Result<(ReverbModel, TrainReport)> {
    cfg.validate()?;
    if items.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let mut adam = AdamState::new(cfg.adam, model.params().into_iter().map(|(_, t)| t));
    let mut report = TrainReport::default();

    for step in 0..cfg.steps {
        let mut rng = stream_rng(cfg.seed, step as u64);
        let draws: Vec<(usize, bool)> = (0..cfg.batch)
            .map(|_| {
                (
                    rng.random_range(0..items.len()),
                    draw_reverb_branch(cfg.q, &mut rng),
                )
            })
            .collect();
        let results: Vec<Result<(f64, Vec<Tensor>)>> = draws
            .par_iter()
            .map(|&(i, branch)| {
                let it = &items[i];
                model.branch_loss_and_grad(&it.clean, &it.reverberant, &it.degraded, branch)
            })
            .collect();

        let mut loss = 0.0;
        let mut grads: Option<Vec<Tensor>> = None;
        for ((item, branch), r) in draws.iter().zip(results) {
            let (l, g) = r?;
            if !l.is_finite() || g.iter().any(|t| !t.is_finite()) {
                return Err(Error::NonFiniteLoss { step, batch: *item });
            }
            if *branch {
                report.reverb_branches += 1;
            } else {
                report.clean_branches += 1;
            }
            loss += l;
            match &mut grads {
                None => grads = Some(g),
                Some(acc) => {
                    for (a, b) in acc.iter_mut().zip(&g) {
                        for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                            *x += y;
                        }
                    }
                }
            }
        }
        let scale = 1.0 / cfg.batch as f64;
        let mut grads = grads.expect("batch is non-empty");
        for g in &mut grads {
            g.data_mut().iter_mut().for_each(|v| *v *= scale);
        }
        loss *= scale;
        adam_step(&mut model.params_mut(), &grads, &mut adam)?;
        report.losses.push(loss);
        if step % 100 == 0 {
            log::debug!("step {step}: loss {loss:.4}");
        }
        on_step(step, loss, &model)?;
    }
    Ok((model, report))
}
