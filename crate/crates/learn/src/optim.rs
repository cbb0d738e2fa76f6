use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;
use crate::{LearnError, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdMomentum,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd_momentum" | "sgd" => Ok(OptimizerKind::SgdMomentum),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(LearnError::Config(format!("unknown optimizer '{s}' (sgd_momentum | adam)"))),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::SgdMomentum => "sgd_momentum",
            OptimizerKind::Adam => "adam",
        })
    }
}

pub const MOMENTUM: f64 = 0.9;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Optimizer state for one parameter list.
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    momentum: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: i32,
}

impl Optimizer {
    /// `momentum` applies to SGD only.
    pub fn new(kind: OptimizerKind, lr: f64, momentum: f64, params: &[Tensor]) -> Self {
        let zeros = || params.iter().map(Tensor::zeros_like).collect();
        Self {
            kind,
            lr,
            momentum,
            m: zeros(),
            v: if kind == OptimizerKind::Adam { zeros() } else { Vec::new() },
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) {
        self.t += 1;
        match self.kind {
            OptimizerKind::SgdMomentum => {
                let (mu, lr) = (self.momentum as Real, self.lr as Real);
                for ((p, g), m) in params.iter_mut().zip(grads).zip(&mut self.m) {
                    for ((p, g), m) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()) {
                        *m = mu * *m + *g;
                        *p -= lr * *m;
                    }
                }
            }
            OptimizerKind::Adam => {
                let b1 = ADAM_BETA1 as Real;
                let b2 = ADAM_BETA2 as Real;
                let c1 = 1.0 - ADAM_BETA1.powi(self.t);
                let c2 = 1.0 - ADAM_BETA2.powi(self.t);
                let step = (self.lr * c2.sqrt() / c1) as Real;
                let eps = (ADAM_EPS * c2.sqrt()) as Real;
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
                    for (((p, g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                        *m = b1 * *m + (1.0 - b1) * *g;
                        *v = b2 * *v + (1.0 - b2) * *g * *g;
                        *p -= step * *m / (v.sqrt() + eps);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_descent(kind: OptimizerKind, lr: f64) -> Real {
        // minimize (p - 3)^2
        let mut p = vec![Tensor::filled(&[1], 0.0)];
        let mut opt = Optimizer::new(kind, lr, MOMENTUM, &p);
        for _ in 0..500 {
            let g = vec![Tensor::filled(&[1], 2.0 * (p[0].data()[0] - 3.0))];
            opt.step(&mut p, &g);
        }
        p[0].data()[0]
    }

    #[test]
    fn both_converge_on_a_quadratic() {
        assert!((quad_descent(OptimizerKind::SgdMomentum, 0.01) - 3.0).abs() < 1e-3);
        assert!((quad_descent(OptimizerKind::Adam, 0.05) - 3.0).abs() < 1e-2);
    }

    #[test]
    fn vanishing_lr_leaves_params() {
        for kind in [OptimizerKind::SgdMomentum, OptimizerKind::Adam] {
            let mut p = vec![Tensor::from_vec(&[3], vec![0.25, -1.5, 7.0]).unwrap()];
            let before = p.clone();
            let g = vec![Tensor::from_vec(&[3], vec![10.0, -3.0, 0.5]).unwrap()];
            Optimizer::new(kind, 1e-30, MOMENTUM, &p).step(&mut p, &g);
            for (a, b) in p[0].data().iter().zip(before[0].data()) {
                assert!((*a as f64 - *b as f64).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("adam".parse::<OptimizerKind>().unwrap(), OptimizerKind::Adam);
        assert_eq!(OptimizerKind::SgdMomentum.to_string().parse::<OptimizerKind>().unwrap(), OptimizerKind::SgdMomentum);
        assert!("rmsprop".parse::<OptimizerKind>().is_err());
    }
}
