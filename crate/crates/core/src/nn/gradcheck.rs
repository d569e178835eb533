//! Central finite-difference verification of analytic gradients.
//!
//! Runs in double precision. The target exposes its parameters as flat
//! blocks; the checker perturbs components, re-evaluates the loss, and
//! compares against the analytic gradient block by block.

use crate::error::Result;
use crate::nn::network::Network;
use crate::tensor::Tensor;

/// Anything whose gradient can be checked: a loss over named parameter blocks.
pub trait FdTarget {
    fn block_names(&self) -> Vec<String>;
    fn block_len(&self, block: usize) -> usize;
    fn get(&self, block: usize, idx: usize) -> f64;
    fn set(&mut self, block: usize, idx: usize, v: f64);
    /// Loss at the current parameters (no gradient side effects needed).
    fn loss(&mut self) -> f64;
    /// Analytic gradients for every block at the current parameters.
    fn analytic_grads(&mut self) -> Vec<Vec<f64>>;
}

#[derive(Debug, Clone, Copy)]
pub struct FdConfig {
    /// Central-difference half step.
    pub h: f64,
    pub tolerance: f64,
    /// Cap on components checked per block (evenly strided); None = all.
    pub max_per_block: Option<usize>,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            h: 1e-5,
            tolerance: 1e-4,
            max_per_block: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn pass(&self) -> bool {
        self.blocks.iter().all(|b| b.pass)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.blocks.iter().fold(0.0, |m, b| m.max(b.max_rel_err))
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for b in &self.blocks {
            s.push_str(&format!(
                "{} {:<28} checked {:>5}  max rel err {:.3e}\n",
                if b.pass { "PASS" } else { "FAIL" },
                b.name,
                b.checked,
                b.max_rel_err
            ));
        }
        s.push_str(&format!(
            "overall: {} (max rel err {:.3e}, tolerance {:.1e})",
            if self.pass() { "PASS" } else { "FAIL" },
            self.max_rel_err(),
            self.tolerance
        ));
        s
    }
}

/// Relative error with a floor so that near-zero pairs compare sanely.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Compare analytic gradients of `target` against central finite differences.
pub fn finite_difference_check<M: FdTarget>(target: &mut M, cfg: &FdConfig) -> GradCheckReport {
    let names = target.block_names();
    let analytic = target.analytic_grads();
    assert_eq!(analytic.len(), names.len());
    let mut blocks = Vec::with_capacity(names.len());
    for (b, name) in names.iter().enumerate() {
        let len = target.block_len(b);
        assert_eq!(analytic[b].len(), len, "analytic grad length mismatch for {name}");
        let indices: Vec<usize> = match cfg.max_per_block {
            Some(k) if k < len => {
                let stride = len as f64 / k as f64;
                (0..k).map(|i| (i as f64 * stride) as usize).collect()
            }
            _ => (0..len).collect(),
        };
        let mut max_err = 0.0f64;
        let mut worst = 0usize;
        for &j in &indices {
            let old = target.get(b, j);
            target.set(b, j, old + cfg.h);
            let lp = target.loss();
            target.set(b, j, old - cfg.h);
            let lm = target.loss();
            target.set(b, j, old);
            let fd = (lp - lm) / (2.0 * cfg.h);
            let err = rel_err(analytic[b][j], fd);
            if err > max_err {
                max_err = err;
                worst = j;
            }
        }
        blocks.push(BlockReport {
            name: name.clone(),
            checked: indices.len(),
            max_rel_err: max_err,
            worst_index: worst,
            pass: max_err < cfg.tolerance,
        });
    }
    GradCheckReport {
        blocks,
        tolerance: cfg.tolerance,
    }
}

/// Terminal loss used by the ready-made network target.
#[derive(Debug, Clone)]
pub enum TerminalLoss {
    /// Sum of all outputs.
    Sum,
    /// Mean absolute error against a fixed target vector.
    L1 { target: Vec<f64> },
}

impl TerminalLoss {
    fn value(&self, y: &[f64]) -> f64 {
        match self {
            TerminalLoss::Sum => y.iter().sum(),
            TerminalLoss::L1 { target } => {
                assert_eq!(y.len(), target.len());
                y.iter().zip(target).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64
            }
        }
    }

    fn upstream(&self, y: &[f64]) -> Vec<f64> {
        match self {
            TerminalLoss::Sum => vec![1.0; y.len()],
            TerminalLoss::L1 { target } => {
                let n = y.len() as f64;
                y.iter()
                    .zip(target)
                    .map(|(a, b)| {
                        if a > b {
                            1.0 / n
                        } else if a < b {
                            -1.0 / n
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
        }
    }
}

/// FdTarget over a plain sequential network with a fixed input batch.
pub struct NetworkFdTarget {
    pub net: Network<f64>,
    pub input: Tensor<f64>,
    pub terminal: TerminalLoss,
}

impl NetworkFdTarget {
    pub fn new(net: Network<f64>, input: Tensor<f64>, terminal: TerminalLoss) -> Self {
        NetworkFdTarget {
            net,
            input,
            terminal,
        }
    }

    /// Smallest |pre-activation| over all ReLU layers for the current input;
    /// large values mean finite differences cannot cross a kink.
    pub fn min_relu_margin(&self) -> Result<f64> {
        let (_, tape) = self.net.forward_with_tape(&self.input)?;
        let mut margin = f64::INFINITY;
        for t in tape.relu_inputs(&self.net) {
            for &v in t.data() {
                margin = margin.min(v.abs());
            }
        }
        Ok(margin)
    }
}

impl FdTarget for NetworkFdTarget {
    fn block_names(&self) -> Vec<String> {
        self.net.params().iter().map(|(n, _)| n.clone()).collect()
    }

    fn block_len(&self, block: usize) -> usize {
        self.net.params()[block].1.len()
    }

    fn get(&self, block: usize, idx: usize) -> f64 {
        self.net.params()[block].1.data()[idx]
    }

    fn set(&mut self, block: usize, idx: usize, v: f64) {
        self.net.params_mut()[block].1.data_mut()[idx] = v;
    }

    fn loss(&mut self) -> f64 {
        let y = self.net.forward(&self.input).expect("forward");
        self.terminal.value(y.data())
    }

    fn analytic_grads(&mut self) -> Vec<Vec<f64>> {
        self.net.zero_grads();
        let (y, tape) = self.net.forward_with_tape(&self.input).expect("forward");
        let up = Tensor::new(y.shape().to_vec(), self.terminal.upstream(y.data()));
        self.net.backward(&tape, &up).expect("backward");
        self.net
            .params()
            .iter()
            .map(|(_, p)| p.grad().map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; p.len()]))
            .collect()
    }
}
