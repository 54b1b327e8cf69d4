use super::{NumKitError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// First-order optimizer over a fixed flat parameter layout.
///
/// Callers pass the same sequence of parameter slices (same order, same
/// lengths) to every `step`; Adam moment buffers are laid out to match.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    adam: Option<Adam>,
}

impl Optimizer {
    pub fn sgd(lr: f64) -> Self {
        Self { kind: OptimizerKind::Sgd, lr, adam: None }
    }

    pub fn adam(lr: f64, total_params: usize) -> Self {
        Self { kind: OptimizerKind::Adam, lr, adam: Some(Adam::new(lr, total_params)) }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        match self.kind {
            OptimizerKind::Sgd => {
                check_layout(params, grads, None)?;
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pi, gi) in p.iter_mut().zip(g.iter()) {
                        *pi -= self.lr * gi;
                    }
                }
                Ok(())
            }
            OptimizerKind::Adam => self.adam.as_mut().expect("adam state").step(params, grads),
        }
    }
}

/// Adam with the standard defaults: beta1 0.9, beta2 0.999, eps 1e-8.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, total_params: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; total_params],
            v: vec![0.0; total_params],
        }
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        check_layout(params, grads, Some(self.m.len()))?;
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        let mut off = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            for (i, (pi, gi)) in p.iter_mut().zip(g.iter()).enumerate() {
                let m = &mut self.m[off + i];
                let v = &mut self.v[off + i];
                *m = self.beta1 * *m + (1.0 - self.beta1) * gi;
                *v = self.beta2 * *v + (1.0 - self.beta2) * gi * gi;
                let mhat = *m / b1t;
                let vhat = *v / b2t;
                *pi -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
            off += p.len();
        }
        Ok(())
    }
}

fn check_layout(params: &[&mut [f64]], grads: &[&[f64]], total: Option<usize>) -> Result<()> {
    if params.len() != grads.len() {
        return Err(NumKitError::Shape(format!(
            "optimizer step: {} param slices vs {} grad slices",
            params.len(),
            grads.len()
        )));
    }
    let mut n = 0;
    for (p, g) in params.iter().zip(grads) {
        if p.len() != g.len() {
            return Err(NumKitError::Shape(format!(
                "optimizer step: param slice of {} vs grad slice of {}",
                p.len(),
                g.len()
            )));
        }
        n += p.len();
    }
    if let Some(t) = total {
        if n != t {
            return Err(NumKitError::Shape(format!(
                "optimizer step: layout has {n} params, state sized for {t}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_moves_against_gradient() {
        let mut opt = Optimizer::sgd(0.1);
        let mut p = vec![1.0, 2.0];
        opt.step(&mut [&mut p], &[&[1.0, -1.0]]).unwrap();
        assert_eq!(p, vec![0.9, 2.1]);
    }

    #[test]
    fn adam_converges_on_quadratic() {
        // minimize f(x) = (x - 3)^2
        let mut opt = Optimizer::adam(0.1, 1);
        let mut x = vec![0.0];
        for _ in 0..500 {
            let g = 2.0 * (x[0] - 3.0);
            opt.step(&mut [&mut x], &[&[g]]).unwrap();
        }
        assert!((x[0] - 3.0).abs() < 1e-3, "x={}", x[0]);
    }

    #[test]
    fn adam_rejects_layout_drift() {
        let mut opt = Optimizer::adam(0.1, 2);
        let mut p = vec![0.0];
        assert!(opt.step(&mut [&mut p], &[&[1.0]]).is_err());
    }

    #[test]
    fn adam_first_step_size_is_lr() {
        // bias correction makes the very first step exactly lr * sign(g)
        let mut adam = Adam::new(0.01, 1);
        let mut p = vec![0.0];
        adam.step(&mut [&mut p], &[&[123.4]]).unwrap();
        assert!((p[0] + 0.01).abs() < 1e-9, "p={}", p[0]);
    }
}
