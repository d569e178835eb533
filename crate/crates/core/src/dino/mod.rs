//! Self-distillation pre-training of the vision encoder: multi-crop view
//! generation, temperature-sharpened distributions, cross-entropy over view
//! pairs, and momentum-averaged teacher updates.

pub mod loss;
pub mod model;
pub mod pretrain;
pub mod schedule;
pub mod views;

pub use loss::{
    cross_entropy, dino_loss, dino_loss_backward, dino_loss_backward_from_targets,
    dino_loss_from_targets, entropy, sharpen_softmax, teacher_targets, DinoLossValue,
    TeacherTargets,
};
pub use model::{ema_update, DistillModel, TeacherState};
pub use pretrain::{pretrain, EpochStats, PretrainResult};
pub use schedule::cosine_momentum;
pub use views::{make_views, CropRecord, ViewKind, ViewSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knobs of the self-distillation stage. Temperatures must be positive and
/// global crops must be larger than local ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillationConfig {
    /// Student softmax temperature.
    pub tau_s: f64,
    /// Teacher softmax temperature.
    pub tau_t: f64,
    /// Output distribution dimension.
    pub k: usize,
    /// Momentum at the start of the cosine schedule.
    pub lambda_start: f64,
    /// Pin the momentum to a fixed value instead of the cosine schedule.
    pub lambda_fixed: Option<f64>,
    /// Number of local views per image.
    pub num_local: usize,
    pub global_res: usize,
    pub local_res: usize,
    pub centering_enabled: bool,
    pub center_momentum: f64,
    /// Apply the teacher update every optimizer step instead of per epoch.
    pub ema_per_step: bool,
    /// Hidden width of the two-layer projection head.
    pub proj_hidden: usize,
    /// Scale applied to the projection output layer's initial weights; keeps
    /// early teacher distributions soft at sharp teacher temperatures.
    pub proj_output_gain: f64,
    /// Images per optimizer step.
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for DistillationConfig {
    fn default() -> Self {
        DistillationConfig {
            tau_s: 0.1,
            tau_t: 0.04,
            k: 256,
            lambda_start: 0.996,
            lambda_fixed: None,
            num_local: 4,
            global_res: 64,
            local_res: 32,
            centering_enabled: true,
            center_momentum: 0.9,
            ema_per_step: false,
            proj_hidden: 512,
            proj_output_gain: 0.05,
            batch_size: 8,
            learning_rate: 1e-4,
        }
    }
}

/// Teacher entropy below this fraction of ln K counts as collapsed.
pub const COLLAPSE_ENTROPY_FACTOR: f64 = 0.1;

impl DistillationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau_s <= 0.0 || self.tau_t <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "temperatures must be positive: tau_s={}, tau_t={}",
                self.tau_s, self.tau_t
            )));
        }
        if self.k < 2 {
            return Err(Error::InvalidConfig("output dimension k must be >= 2".into()));
        }
        if !(0.0 < self.lambda_start && self.lambda_start <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda_start must be in (0,1], got {}",
                self.lambda_start
            )));
        }
        if let Some(l) = self.lambda_fixed {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::InvalidConfig(format!("lambda_fixed must be in [0,1], got {l}")));
            }
        }
        if self.num_local == 0 {
            return Err(Error::InvalidConfig("num_local must be positive".into()));
        }
        if self.global_res <= self.local_res {
            return Err(Error::InvalidConfig(format!(
                "global_res ({}) must exceed local_res ({})",
                self.global_res, self.local_res
            )));
        }
        if !(0.0 < self.center_momentum && self.center_momentum < 1.0) {
            return Err(Error::InvalidConfig("center_momentum must be in (0,1)".into()));
        }
        if self.batch_size == 0 || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("batch_size and learning_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn collapse_threshold(&self) -> f64 {
        COLLAPSE_ENTROPY_FACTOR * (self.k as f64).ln()
    }
}
