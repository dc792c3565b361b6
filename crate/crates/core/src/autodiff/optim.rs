use super::tensor::Tensor;
use crate::error::{invalid, shape_err, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Result of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// A gradient contained NaN or infinity; parameters were left untouched.
    SkippedNonFinite,
}

/// SGD or Adam state for a fixed list of parameter tensors.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(invalid(format!("learning rate must be positive, got {lr}")));
        }
        Ok(Self {
            kind,
            lr,
            m: Vec::new(),
            v: Vec::new(),
            step: 0,
        })
    }

    pub fn sgd(lr: f64) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, lr)
    }

    pub fn adam(lr: f64) -> Result<Self> {
        Self::new(OptimizerKind::Adam, lr)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Number of applied steps.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update in place. Skipped steps leave both the parameters
    /// and the moment buffers untouched.
    pub fn step<'a, I>(&mut self, params: I, grads: &[Tensor]) -> Result<StepOutcome>
    where
        I: IntoIterator<Item = &'a mut Tensor>,
    {
        let params: Vec<&mut Tensor> = params.into_iter().collect();
        if params.len() != grads.len() {
            return Err(shape_err(
                "optimizer_step",
                format!("{} params vs {} grads", params.len(), grads.len()),
            ));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(shape_err("optimizer_step", format!("{:?} vs {:?}", p.shape(), g.shape())));
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len() || self.m.iter().zip(&params).any(|(m, p)| m.len() != p.len()) {
            return Err(shape_err("optimizer_step", "parameter layout changed between steps"));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            log::warn!("non-finite gradient at optimizer step {}; update skipped", self.step + 1);
            return Ok(StepOutcome::SkippedNonFinite);
        }

        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.into_iter().zip(grads) {
                    for (x, &d) in p.data_mut().iter_mut().zip(g.data()) {
                        *x -= self.lr * d;
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let bc1 = 1.0 - ADAM_BETA1.powi(t);
                let bc2 = 1.0 - ADAM_BETA2.powi(t);
                for (i, (p, g)) in params.into_iter().zip(grads).enumerate() {
                    let (m, v) = (&mut self.m[i], &mut self.v[i]);
                    for (k, (x, &d)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                        m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * d;
                        v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * d * d;
                        let m_hat = m[k] / bc1;
                        let v_hat = v[k] / bc2;
                        *x -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        Ok(StepOutcome::Applied)
    }
}
