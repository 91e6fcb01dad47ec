use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant { lr: f64 },
    /// `peak · ½(1 + cos(π t / total))`, clamped at `total`.
    Cosine { peak: f64, total_steps: u64 },
    /// `initial · rate^t`.
    Exponential { initial: f64, rate: f64 },
}

impl Schedule {
    pub fn lr(&self, step: u64) -> f64 {
        match *self {
            Schedule::Constant { lr } => lr,
            Schedule::Cosine { peak, total_steps } => {
                let t = step.min(total_steps) as f64 / total_steps.max(1) as f64;
                peak * 0.5 * (1.0 + (PI * t).cos())
            }
            Schedule::Exponential { initial, rate } => initial * rate.powf(step as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Adam,
    /// Decoupled weight decay.
    AdamW { weight_decay: f64 },
}

/// Adam-family optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub schedule: Schedule,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, schedule: Schedule, num_params: usize) -> Self {
        Self {
            kind,
            schedule,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first: vec![0.0; num_params],
            second: vec![0.0; num_params],
            steps: 0,
        }
    }

    pub fn adamw(schedule: Schedule, num_params: usize) -> Self {
        Self::new(OptimizerKind::AdamW { weight_decay: 1e-2 }, schedule, num_params)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn current_lr(&self) -> f64 {
        self.schedule.lr(self.steps)
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::BadLength { expected: self.first.len(), got: grads.len() });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        let lr = self.schedule.lr(self.steps);
        self.steps += 1;
        let t = self.steps as f64;
        let c1 = 1.0 - self.beta1.powf(t);
        let c2 = 1.0 - self.beta2.powf(t);
        let decay = match self.kind {
            OptimizerKind::Adam => 0.0,
            OptimizerKind::AdamW { weight_decay } => weight_decay,
        };
        for i in 0..params.len() {
            let g = grads[i];
            self.first[i] = self.beta1 * self.first[i] + (1.0 - self.beta1) * g;
            self.second[i] = self.beta2 * self.second[i] + (1.0 - self.beta2) * g * g;
            let m = self.first[i] / c1;
            let v = self.second[i] / c2;
            params[i] -= lr * (m / (v.sqrt() + self.eps) + decay * params[i]);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_endpoints() {
        let s = Schedule::Cosine { peak: 1e-3, total_steps: 100 };
        assert_eq!(s.lr(0), 1e-3);
        assert!(s.lr(100) <= 1e-6);
        assert!((s.lr(50) - 5e-4).abs() < 1e-15);
    }

    #[test]
    fn exponential_schedule() {
        let s = Schedule::Exponential { initial: 0.01, rate: 0.999 };
        assert!((s.lr(10) - 0.01 * 0.999f64.powi(10)).abs() < 1e-18);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut p = vec![3.0, -2.0];
        let mut opt = Optimizer::new(OptimizerKind::Adam, Schedule::Constant { lr: 0.05 }, 2);
        for _ in 0..2000 {
            let g = vec![2.0 * p[0], 2.0 * p[1]];
            opt.step(&mut p, &g).unwrap();
        }
        assert!(p.iter().all(|x| x.abs() < 1e-2));
    }

    #[test]
    fn deterministic_steps() {
        let run = || {
            let mut p: Vec<f64> = (0..10).map(|i| (i as f64).cos()).collect();
            let mut opt = Optimizer::adamw(Schedule::Cosine { peak: 1e-2, total_steps: 100 }, 10);
            for s in 0..100 {
                let g: Vec<f64> = p.iter().enumerate().map(|(i, x)| x * (s + i) as f64 / 50.0 - 0.1).collect();
                opt.step(&mut p, &g).unwrap();
            }
            p
        };
        let a = run();
        let b = run();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn rejects_non_finite_gradients() {
        let mut opt = Optimizer::adamw(Schedule::Constant { lr: 0.1 }, 1);
        assert!(opt.step(&mut [1.0], &[f64::NAN]).is_err());
    }
}
