//! Student/teacher model pair: shared backbone encoder plus a two-layer
//! projection head, and the momentum update that keeps the teacher a moving
//! average of the student.

use crate::arch::EncoderConfig;
use crate::dino::DistillationConfig;
use crate::error::{Error, Result};
use crate::nn::{LayerSpec, Network, Tape};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

/// Encoder + projection head. The head exists only for pre-training and is
/// discarded once the encoder moves into the driving agent.
#[derive(Debug, Clone)]
pub struct DistillModel<T: Scalar> {
    pub encoder: Network<T>,
    pub head: Network<T>,
}

impl<T: Scalar> DistillModel<T> {
    pub fn build(enc_cfg: &EncoderConfig, cfg: &DistillationConfig, rng: &mut Rng) -> Result<Self> {
        let encoder = enc_cfg.build_network(rng)?;
        let mut head = Network::new(
            &[enc_cfg.embed_dim],
            &[
                LayerSpec::Linear {
                    in_dim: enc_cfg.embed_dim,
                    out_dim: cfg.proj_hidden,
                },
                LayerSpec::Relu,
                LayerSpec::Linear {
                    in_dim: cfg.proj_hidden,
                    out_dim: cfg.k,
                },
            ],
            rng,
        )?;
        head.scale_layer_weights(2, cfg.proj_output_gain);
        Ok(DistillModel { encoder, head })
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.head.forward(&self.encoder.forward(x)?)
    }

    pub fn forward_with_tape(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Tape<T>, Tape<T>)> {
        let (emb, enc_tape) = self.encoder.forward_with_tape(x)?;
        let (logits, head_tape) = self.head.forward_with_tape(&emb)?;
        Ok((logits, enc_tape, head_tape))
    }

    pub fn backward(
        &mut self,
        enc_tape: &Tape<T>,
        head_tape: &Tape<T>,
        upstream: &Tensor<T>,
    ) -> Result<()> {
        let d_emb = self.head.backward(head_tape, upstream)?;
        self.encoder.backward(enc_tape, &d_emb)?;
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        self.encoder.zero_grads();
        self.head.zero_grads();
    }

    pub fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out: Vec<(String, &Tensor<T>)> = self
            .encoder
            .params()
            .into_iter()
            .map(|(n, p)| (format!("encoder.{n}"), p))
            .collect();
        out.extend(
            self.head
                .params()
                .into_iter()
                .map(|(n, p)| (format!("head.{n}"), p)),
        );
        out
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out: Vec<(String, &mut Tensor<T>)> = self
            .encoder
            .params_mut()
            .into_iter()
            .map(|(n, p)| (format!("encoder.{n}"), p))
            .collect();
        out.extend(
            self.head
                .params_mut()
                .into_iter()
                .map(|(n, p)| (format!("head.{n}"), p)),
        );
        out
    }

    pub fn copy_params_from(&mut self, other: &DistillModel<T>) -> Result<()> {
        self.encoder.copy_params_from(&other.encoder)?;
        self.head.copy_params_from(&other.head)
    }

    pub fn cast<U: Scalar>(&self) -> DistillModel<U> {
        DistillModel {
            encoder: self.encoder.cast(),
            head: self.head.cast(),
        }
    }
}

/// Teacher-side state: mirrored parameters (never touched by the optimizer),
/// the running center of teacher logits, and progress counters.
#[derive(Debug, Clone)]
pub struct TeacherState<T: Scalar> {
    pub model: DistillModel<T>,
    pub center: Vec<T>,
    pub steps: u64,
}

impl<T: Scalar> TeacherState<T> {
    /// The teacher starts as an exact copy of the student.
    pub fn from_student(student: &DistillModel<T>, cfg: &DistillationConfig) -> Self {
        TeacherState {
            model: student.clone(),
            center: vec![T::zero(); cfg.k],
            steps: 0,
        }
    }

    /// Running-mean update: c <- m c + (1-m) mean(batch logits).
    pub fn update_center(&mut self, batch_logits: &[Vec<T>], momentum: f64) {
        if batch_logits.is_empty() {
            return;
        }
        let k = self.center.len();
        let mut mean = vec![T::zero(); k];
        for row in batch_logits {
            assert_eq!(row.len(), k, "teacher logit width mismatch");
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let inv = T::c(1.0 / batch_logits.len() as f64);
        let m = T::c(momentum);
        let one_minus = T::c(1.0 - momentum);
        for (c, s) in self.center.iter_mut().zip(mean) {
            *c = m * *c + one_minus * s * inv;
        }
    }
}

/// theta_t <- lambda theta_t + (1-lambda) theta_s, componentwise.
///
/// Endpoints are exact (lambda=1 leaves the teacher bit-identical, lambda=0
/// copies the student), and every updated component is clamped into the
/// closed interval spanned by its previous value and the student's value.
pub fn ema_update<T: Scalar>(
    teacher: &mut DistillModel<T>,
    student: &DistillModel<T>,
    lambda: f64,
) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidInput(format!("lambda must be in [0,1], got {lambda}")));
    }
    let src = student.params();
    let mut dst = teacher.params_mut();
    if src.len() != dst.len() {
        return Err(Error::InvalidInput("teacher/student parameter count mismatch".into()));
    }
    if lambda == 1.0 {
        return Ok(());
    }
    for ((dn, d), (sn, s)) in dst.iter_mut().zip(&src) {
        if d.shape() != s.shape() {
            return Err(Error::InvalidInput(format!(
                "teacher/student shape mismatch at {dn}/{sn}: {:?} vs {:?}",
                d.shape(),
                s.shape()
            )));
        }
        if lambda == 0.0 {
            d.data_mut().copy_from_slice(s.data());
            continue;
        }
        let alpha = T::c(1.0 - lambda);
        for (t, &sv) in d.data_mut().iter_mut().zip(s.data()) {
            let old = *t;
            let new = old + alpha * (sv - old);
            *t = new.max(old.min(sv)).min(old.max(sv));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn tiny() -> (EncoderConfig, DistillationConfig) {
        let enc = EncoderConfig {
            frame_h: 8,
            frame_w: 8,
            conv_channels: vec![2, 3],
            embed_dim: 6,
        };
        let cfg = DistillationConfig {
            k: 5,
            proj_hidden: 7,
            global_res: 8,
            local_res: 4,
            ..DistillationConfig::default()
        };
        (enc, cfg)
    }

    #[test]
    fn lambda_one_is_a_fixed_point() {
        let (enc, cfg) = tiny();
        let student = DistillModel::<f64>::build(&enc, &cfg, &mut rng_from_seed(1)).unwrap();
        let mut teacher = DistillModel::<f64>::build(&enc, &cfg, &mut rng_from_seed(2)).unwrap();
        let before: Vec<f64> = teacher.params().iter().flat_map(|(_, p)| p.data().to_vec()).collect();
        ema_update(&mut teacher, &student, 1.0).unwrap();
        let after: Vec<f64> = teacher.params().iter().flat_map(|(_, p)| p.data().to_vec()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn lambda_zero_copies_student() {
        let (enc, cfg) = tiny();
        let student = DistillModel::<f64>::build(&enc, &cfg, &mut rng_from_seed(1)).unwrap();
        let mut teacher = DistillModel::<f64>::build(&enc, &cfg, &mut rng_from_seed(2)).unwrap();
        ema_update(&mut teacher, &student, 0.0).unwrap();
        for ((_, t), (_, s)) in teacher.params().iter().zip(student.params().iter()) {
            assert_eq!(t.data(), s.data());
        }
    }

    #[test]
    fn ema_arithmetic() {
        let (enc, cfg) = tiny();
        let mut student = DistillModel::<f64>::build(&enc, &cfg, &mut rng_from_seed(1)).unwrap();
        let mut teacher = student.clone();
        for (_, p) in teacher.params_mut() {
            p.fill(1.0);
        }
        for (_, p) in student.params_mut() {
            p.fill(0.0);
        }
        ema_update(&mut teacher, &student, 0.996).unwrap();
        for (_, p) in teacher.params() {
            for &v in p.data() {
                assert!((v - 0.996).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_out_of_range_lambda() {
        let (enc, cfg) = tiny();
        let student = DistillModel::<f64>::build(&enc, &cfg, &mut rng_from_seed(1)).unwrap();
        let mut teacher = student.clone();
        assert!(ema_update(&mut teacher, &student, 1.5).is_err());
        assert!(ema_update(&mut teacher, &student, -0.1).is_err());
    }

    #[test]
    fn rejects_shape_mismatch() {
        let (enc, cfg) = tiny();
        let student = DistillModel::<f64>::build(&enc, &cfg, &mut rng_from_seed(1)).unwrap();
        let enc2 = EncoderConfig {
            embed_dim: 7,
            ..enc
        };
        let mut teacher = DistillModel::<f64>::build(&enc2, &cfg, &mut rng_from_seed(2)).unwrap();
        assert!(ema_update(&mut teacher, &student, 0.5).is_err());
    }
}
