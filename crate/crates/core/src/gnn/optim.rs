use serde::{Deserialize, Serialize};

use super::model::ModelParams;
use crate::error::{Result, WiceError};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = WiceError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(WiceError::InvalidConfig(format!("unknown optimizer {s:?}"))),
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Optimizer with its per-parameter state.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    /// Number of updates applied so far.
    pub step: u64,
    /// Adam first and second moments, one per tensor; empty for SGD.
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, params: &ModelParams) -> Self {
        let (m, v) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam => (params.zeros_like(), params.zeros_like()),
        };
        Optimizer { kind, lr, step: 0, m, v }
    }

    /// Apply one update. Nothing changes when any gradient is non-finite.
    pub fn update(&mut self, params: &mut ModelParams, grads: &[Matrix]) -> Result<()> {
        assert_eq!(grads.len(), params.tensors.len(), "one gradient per tensor");
        for (t, g) in params.tensors.iter().zip(grads) {
            if !g.is_finite() {
                return Err(WiceError::NonFiniteGradient { param: t.name.clone(), context: None });
            }
        }
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (t, g) in params.tensors.iter_mut().zip(grads) {
                    for (p, d) in t.value.as_mut_slice().iter_mut().zip(g.as_slice()) {
                        *p -= self.lr * d;
                    }
                }
            }
            OptimizerKind::Adam => {
                let bc1 = 1.0 - ADAM_BETA1.powf(self.step as f64);
                let bc2 = 1.0 - ADAM_BETA2.powf(self.step as f64);
                for (i, (t, g)) in params.tensors.iter_mut().zip(grads).enumerate() {
                    let m = self.m[i].as_mut_slice();
                    let v = self.v[i].as_mut_slice();
                    for (j, (p, d)) in t.value.as_mut_slice().iter_mut().zip(g.as_slice()).enumerate() {
                        m[j] = ADAM_BETA1 * m[j] + (1.0 - ADAM_BETA1) * d;
                        v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * d * d;
                        let m_hat = m[j] / bc1;
                        let v_hat = v[j] / bc2;
                        *p -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::model::{Architecture, ModelConfig, NamedTensor};

    fn scalar_params(x: f64) -> ModelParams {
        ModelParams {
            config: ModelConfig::new(Architecture::Gcn, 1, 0),
            tensors: vec![NamedTensor { name: "x".into(), value: Matrix::filled(1, 1, x) }],
        }
    }

    #[test]
    fn sgd_step() {
        let mut p = scalar_params(1.0);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, &p);
        opt.update(&mut p, &[Matrix::filled(1, 1, 1.0)]).unwrap();
        assert!((p.tensors[0].value[(0, 0)] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        for g in [1e-3, 0.5, -7.0] {
            let mut p = scalar_params(0.0);
            let mut opt = Optimizer::new(OptimizerKind::Adam, 1e-3, &p);
            opt.update(&mut p, &[Matrix::filled(1, 1, g)]).unwrap();
            let moved = -p.tensors[0].value[(0, 0)];
            assert!((moved - 1e-3 * g.signum()).abs() < 1e-6, "g={g} moved={moved}");
        }
    }

    #[test]
    fn non_finite_gradient_is_named() {
        let mut p = scalar_params(1.0);
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1, &p);
        let err = opt.update(&mut p, &[Matrix::filled(1, 1, f64::NAN)]).unwrap_err();
        assert!(matches!(err, WiceError::NonFiniteGradient { ref param, .. } if param == "x"));
        assert_eq!(p.tensors[0].value[(0, 0)], 1.0);
        assert_eq!(opt.step, 0);
    }
}
