//! The self-distillation training loop: per-image multi-crop losses, batched
//! optimizer steps on the student, centering updates, momentum updates of the
//! teacher (per epoch by default, per step optionally), and a collapse alarm
//! on teacher output entropy.

use rand::seq::SliceRandom;

use crate::arch::EncoderConfig;
use crate::dino::loss::dino_loss_backward;
use crate::dino::model::{ema_update, DistillModel, TeacherState};
use crate::dino::schedule::cosine_momentum;
use crate::dino::{DistillationConfig, COLLAPSE_ENTROPY_FACTOR};
use crate::error::{Error, Result};
use crate::image::Frame;
use crate::nn::{LrSchedule, Optimizer, OptimizerKind};
use crate::rng::{stream, stream_indexed};
use crate::tensor::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub teacher_entropy: f64,
    pub lambda: f64,
}

#[derive(Debug)]
pub struct PretrainResult<T: Scalar> {
    pub student: DistillModel<T>,
    pub teacher: TeacherState<T>,
    pub stats: Vec<EpochStats>,
}

fn momentum_at(cfg: &DistillationConfig, update: usize, total_updates: usize) -> Result<f64> {
    if let Some(l) = cfg.lambda_fixed {
        return Ok(l);
    }
    let total = total_updates.saturating_sub(1).max(1);
    cosine_momentum(update.min(total), total, cfg.lambda_start)
}

/// Pre-train the encoder on unlabeled frames.
///
/// Halts with a collapse diagnostic if the teacher's output entropy stays
/// below 0.1 ln K for every image of a full epoch.
pub fn pretrain<T: Scalar>(
    dataset: &[Frame],
    enc_cfg: &EncoderConfig,
    cfg: &DistillationConfig,
    epochs: usize,
    seed: u64,
) -> Result<PretrainResult<T>> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidInput("pre-training dataset is empty".into()));
    }
    if epochs == 0 {
        return Err(Error::InvalidInput("epochs must be >= 1".into()));
    }

    let mut student = DistillModel::<T>::build(enc_cfg, cfg, &mut stream(seed, "distill-init"))?;
    let mut teacher = TeacherState::from_student(&student, cfg);
    let mut opt = Optimizer::new(
        OptimizerKind::adam_default(),
        LrSchedule::new(cfg.learning_rate, usize::MAX),
    );

    let n_batches_per_epoch = dataset.len().div_ceil(cfg.batch_size);
    let total_updates = if cfg.ema_per_step {
        epochs * n_batches_per_epoch
    } else {
        epochs
    };
    let threshold = cfg.collapse_threshold();

    let mut stats = Vec::with_capacity(epochs);
    let mut view_counter = 0u64;
    let mut step_counter = 0usize;
    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut stream_indexed(seed, "distill-shuffle", epoch as u64));

        let mut loss_sum = 0.0;
        let mut entropy_sum = 0.0;
        let mut any_above_threshold = false;
        let mut lambda_logged = f64::NAN;
        for chunk in order.chunks(cfg.batch_size) {
            student.zero_grads();
            let mut batch_logits = Vec::with_capacity(chunk.len() * 2);
            for &idx in chunk {
                let mut view_rng = stream_indexed(seed, "distill-views", view_counter);
                view_counter += 1;
                let views = crate::dino::views::make_views(&dataset[idx], &mut view_rng, cfg)?;
                let center = if cfg.centering_enabled {
                    Some(teacher.center.as_slice())
                } else {
                    None
                };
                let out = dino_loss_backward(
                    &views,
                    &mut student,
                    &teacher.model,
                    cfg,
                    center,
                    1.0 / chunk.len() as f64,
                )?;
                if !out.total.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("distillation loss at epoch {epoch}"),
                    });
                }
                loss_sum += out.total.f64();
                entropy_sum += out.teacher_entropy;
                if out.teacher_entropy >= threshold {
                    any_above_threshold = true;
                }
                batch_logits.extend(out.teacher_logits);
            }
            let mut params = student.params_mut();
            opt.step(&mut params, 0)?;
            drop(params);
            if cfg.centering_enabled {
                teacher.update_center(&batch_logits, cfg.center_momentum);
            }
            if cfg.ema_per_step {
                let lambda = momentum_at(cfg, step_counter, total_updates)?;
                ema_update(&mut teacher.model, &student, lambda)?;
                teacher.steps += 1;
                lambda_logged = lambda;
            }
            step_counter += 1;
        }

        if !cfg.ema_per_step {
            let lambda = momentum_at(cfg, epoch, total_updates)?;
            ema_update(&mut teacher.model, &student, lambda)?;
            teacher.steps += 1;
            lambda_logged = lambda;
        }

        let mean_loss = loss_sum / dataset.len() as f64;
        let teacher_entropy = entropy_sum / dataset.len() as f64;
        stats.push(EpochStats {
            epoch,
            mean_loss,
            teacher_entropy,
            lambda: lambda_logged,
        });
        if !any_above_threshold {
            return Err(Error::Collapse {
                entropy: teacher_entropy,
                threshold,
                epoch,
            });
        }
    }

    Ok(PretrainResult {
        student,
        teacher,
        stats,
    })
}

/// CSV rows for the run log: epoch, mean loss, teacher entropy, lambda.
pub fn stats_to_csv(stats: &[EpochStats]) -> String {
    let mut s = String::from("epoch,mean_loss,teacher_entropy,lambda\n");
    for row in stats {
        s.push_str(&format!(
            "{},{:.9},{:.9},{:.9}\n",
            row.epoch, row.mean_loss, row.teacher_entropy, row.lambda
        ));
    }
    s
}

/// True when an entropy trace qualifies as collapsed under the run threshold.
pub fn is_collapsed(entropy: f64, k: usize) -> bool {
    entropy < COLLAPSE_ENTROPY_FACTOR * (k as f64).ln()
}
