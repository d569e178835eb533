//! Temperature-sharpened distributions and the multi-view distillation loss.
//!
//! The loss pairs each global view's teacher distribution with the student
//! distribution of every *other* view: exactly 2(|V|-1) cross-entropy terms.
//! Teacher outputs are computed without a tape and enter the loss as
//! constants, so no gradient ever reaches teacher parameters.

use crate::dino::model::DistillModel;
use crate::dino::views::ViewSet;
use crate::dino::DistillationConfig;
use crate::error::{Error, Result};
use crate::image::frames_to_batch;
use crate::tensor::{Scalar, Tensor};

/// Softmax of `logits / tau`, stabilized by max subtraction. Output entries
/// are strictly positive and sum to 1 within 1e-9 even for logits up to 1e4.
pub fn sharpen_softmax<T: Scalar>(logits: &[T], tau: f64) -> Result<Vec<T>> {
    let log_p = log_sharpen_softmax(logits, tau)?;
    Ok(log_p.iter().map(|&v| v.exp()).collect())
}

/// Log of [`sharpen_softmax`], computed directly for numerical headroom.
pub fn log_sharpen_softmax<T: Scalar>(logits: &[T], tau: f64) -> Result<Vec<T>> {
    if tau <= 0.0 {
        return Err(Error::InvalidInput(format!("temperature must be positive, got {tau}")));
    }
    if logits.is_empty() {
        return Err(Error::InvalidInput("empty logits".into()));
    }
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite {
            context: "softmax logits".into(),
        });
    }
    let tau = T::c(tau);
    let max = logits.iter().copied().fold(logits[0], T::max);
    let scaled: Vec<T> = logits.iter().map(|&z| (z - max) / tau).collect();
    let mut sum = T::zero();
    for &v in &scaled {
        sum += v.exp();
    }
    let lse = sum.ln();
    Ok(scaled.iter().map(|&v| v - lse).collect())
}

/// Shannon entropy in nats.
pub fn entropy<T: Scalar>(p: &[T]) -> f64 {
    p.iter()
        .map(|&v| {
            let v = v.f64();
            if v > 0.0 {
                -v * v.ln()
            } else {
                0.0
            }
        })
        .sum()
}

const CE_EPS: f64 = 1e-12;
const SUM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct CrossEntropyTerm<T> {
    pub value: T,
    /// Entries of the prediction that had to be clamped up to epsilon.
    pub clamped: usize,
}

/// -sum_i p_t[i] ln p_s[i] for probability vectors. Zero entries of the
/// prediction are clamped to 1e-12 and counted in the returned diagnostics.
pub fn cross_entropy<T: Scalar>(p_t: &[T], p_s: &[T]) -> Result<CrossEntropyTerm<T>> {
    if p_t.len() != p_s.len() {
        return Err(Error::InvalidInput(format!(
            "cross_entropy dimension mismatch: {} vs {}",
            p_t.len(),
            p_s.len()
        )));
    }
    for (name, p) in [("target", p_t), ("prediction", p_s)] {
        let sum: f64 = p.iter().map(|v| v.f64()).sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "cross_entropy {name} sums to {sum}, expected 1"
            )));
        }
        if p.iter().any(|v| v.f64() < 0.0) {
            return Err(Error::InvalidInput(format!("cross_entropy {name} has negative entries")));
        }
    }
    let eps = T::c(CE_EPS);
    let mut clamped = 0;
    let mut acc = T::zero();
    for (&t, &s) in p_t.iter().zip(p_s) {
        let s = if s < eps {
            clamped += 1;
            eps
        } else {
            s
        };
        acc += t * s.ln();
    }
    Ok(CrossEntropyTerm {
        value: -acc,
        clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm {
    pub teacher_view: usize,
    pub student_view: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct DinoLossValue<T: Scalar> {
    pub total: T,
    pub terms: Vec<PairTerm>,
    /// Mean entropy of the teacher's sharpened global-view distributions.
    pub teacher_entropy: f64,
    /// Raw (uncentered) teacher logits per global view, for center updates.
    pub teacher_logits: Vec<Vec<T>>,
}

/// Teacher distributions for one view set, snapshotted once per training
/// step. The differentiated objective takes these as constants: that is the
/// stop-gradient contract, and it is what makes the numerical gradient of the
/// loss with respect to teacher parameters exactly zero.
#[derive(Debug, Clone)]
pub struct TeacherTargets<T: Scalar> {
    pub probs: Vec<Vec<T>>,
    pub raw_logits: Vec<Vec<T>>,
    pub entropy_mean: f64,
}

/// Run the teacher on the two global views (no tape) and sharpen with tau_t,
/// subtracting `center` from the logits first when centering is on.
pub fn teacher_targets<T: Scalar>(
    views: &ViewSet,
    teacher: &DistillModel<T>,
    cfg: &DistillationConfig,
    center: Option<&[T]>,
) -> Result<TeacherTargets<T>> {
    views.validate()?;
    if let Some(c) = center {
        if c.len() != cfg.k {
            return Err(Error::InvalidInput(format!(
                "center length {} does not match k={}",
                c.len(),
                cfg.k
            )));
        }
    }
    let g_batch = frames_to_batch::<T>(&[&views.globals[0], &views.globals[1]]);
    let t_logits = teacher.forward(&g_batch)?;
    let k = cfg.k;
    if t_logits.shape() != [2, k] {
        return Err(Error::InvalidInput(format!(
            "teacher produced shape {:?}, expected [2, {k}]",
            t_logits.shape()
        )));
    }
    let mut raw_logits = Vec::with_capacity(2);
    let mut probs = Vec::with_capacity(2);
    for g in 0..2 {
        let row = &t_logits.data()[g * k..(g + 1) * k];
        raw_logits.push(row.to_vec());
        let centered: Vec<T> = match center {
            Some(c) => row.iter().zip(c).map(|(&z, &m)| z - m).collect(),
            None => row.to_vec(),
        };
        probs.push(sharpen_softmax(&centered, cfg.tau_t)?);
    }
    let entropy_mean = probs.iter().map(|p| entropy(p)).sum::<f64>() / 2.0;
    Ok(TeacherTargets {
        probs,
        raw_logits,
        entropy_mean,
    })
}

fn student_distributions<T: Scalar>(
    views: &ViewSet,
    student: &DistillModel<T>,
    cfg: &DistillationConfig,
    mut tapes: Option<&mut Vec<(Tensor<T>, crate::nn::Tape<T>, crate::nn::Tape<T>)>>,
) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>)> {
    let mut log_probs = Vec::with_capacity(views.len());
    let mut probs = Vec::with_capacity(views.len());
    for idx in 0..views.len() {
        let x = frames_to_batch::<T>(&[views.view(idx)]);
        let logits_row: Vec<T> = if let Some(tapes) = tapes.as_deref_mut() {
            let (logits, enc_tape, head_tape) = student.forward_with_tape(&x)?;
            let row = logits.data().to_vec();
            tapes.push((logits, enc_tape, head_tape));
            row
        } else {
            student.forward(&x)?.into_data()
        };
        if logits_row.len() != cfg.k {
            return Err(Error::InvalidInput(format!(
                "student produced {} logits, expected {}",
                logits_row.len(),
                cfg.k
            )));
        }
        log_probs.push(log_sharpen_softmax(&logits_row, cfg.tau_s)?);
        probs.push(sharpen_softmax(&logits_row, cfg.tau_s)?);
    }
    Ok((log_probs, probs))
}

fn assemble_terms<T: Scalar>(
    teacher_probs: &[Vec<T>],
    student_log_probs: &[Vec<T>],
) -> (T, Vec<PairTerm>) {
    let n_views = student_log_probs.len();
    let mut total = T::zero();
    let mut terms = Vec::with_capacity(2 * (n_views - 1));
    for (g, p_t) in teacher_probs.iter().enumerate() {
        for (v, log_p_s) in student_log_probs.iter().enumerate() {
            if v == g {
                continue;
            }
            let mut h = T::zero();
            for (&t, &lp) in p_t.iter().zip(log_p_s) {
                h += t * lp;
            }
            let value = -h;
            total += value;
            terms.push(PairTerm {
                teacher_view: g,
                student_view: v,
                value: value.f64(),
            });
        }
    }
    (total, terms)
}

fn check_views(views: &ViewSet) -> Result<()> {
    views.validate()?;
    if views.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 views".into()));
    }
    Ok(())
}

/// Evaluate the multi-view loss against frozen teacher targets.
pub fn dino_loss_from_targets<T: Scalar>(
    views: &ViewSet,
    student: &DistillModel<T>,
    targets: &TeacherTargets<T>,
    cfg: &DistillationConfig,
) -> Result<DinoLossValue<T>> {
    check_views(views)?;
    let (log_probs, _) = student_distributions(views, student, cfg, None)?;
    let (total, terms) = assemble_terms(&targets.probs, &log_probs);
    Ok(DinoLossValue {
        total,
        terms,
        teacher_entropy: targets.entropy_mean,
        teacher_logits: targets.raw_logits.clone(),
    })
}

/// Evaluate the loss against frozen targets and accumulate its gradient
/// (scaled by `grad_scale`) into the student's parameter grad slots.
pub fn dino_loss_backward_from_targets<T: Scalar>(
    views: &ViewSet,
    student: &mut DistillModel<T>,
    targets: &TeacherTargets<T>,
    cfg: &DistillationConfig,
    grad_scale: f64,
) -> Result<DinoLossValue<T>> {
    check_views(views)?;
    let mut tapes = Vec::with_capacity(views.len());
    let (log_probs, probs) = student_distributions(views, student, cfg, Some(&mut tapes))?;
    let (total, terms) = assemble_terms(&targets.probs, &log_probs);

    // dH(p_t, softmax(z/tau_s))/dz = (p_s - p_t)/tau_s per pair; a student
    // view paired with both globals accumulates both contributions.
    let inv_tau = T::c(grad_scale / cfg.tau_s);
    for (v, (logits, enc_tape, head_tape)) in tapes.iter().enumerate() {
        let mut up = vec![T::zero(); cfg.k];
        let mut active = false;
        for (g, p_t) in targets.probs.iter().enumerate() {
            if v == g {
                continue;
            }
            active = true;
            for i in 0..cfg.k {
                up[i] += (probs[v][i] - p_t[i]) * inv_tau;
            }
        }
        if active {
            let upstream = Tensor::new(logits.shape().to_vec(), up);
            student.backward(enc_tape, head_tape, &upstream)?;
        }
    }

    Ok(DinoLossValue {
        total,
        terms,
        teacher_entropy: targets.entropy_mean,
        teacher_logits: targets.raw_logits.clone(),
    })
}

/// Evaluate the multi-view distillation loss (no gradients).
pub fn dino_loss<T: Scalar>(
    views: &ViewSet,
    student: &DistillModel<T>,
    teacher: &DistillModel<T>,
    cfg: &DistillationConfig,
    center: Option<&[T]>,
) -> Result<DinoLossValue<T>> {
    let targets = teacher_targets(views, teacher, cfg, center)?;
    dino_loss_from_targets(views, student, &targets, cfg)
}

/// Snapshot the teacher and run one loss-with-gradient evaluation. Teacher
/// parameters receive no gradient.
pub fn dino_loss_backward<T: Scalar>(
    views: &ViewSet,
    student: &mut DistillModel<T>,
    teacher: &DistillModel<T>,
    cfg: &DistillationConfig,
    center: Option<&[T]>,
    grad_scale: f64,
) -> Result<DinoLossValue<T>> {
    let targets = teacher_targets(views, teacher, cfg, center)?;
    dino_loss_backward_from_targets(views, student, &targets, cfg, grad_scale)
}
