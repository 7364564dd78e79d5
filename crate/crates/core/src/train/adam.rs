use crate::tensor::{ParamSet, Tensor, TensorError};

/// Bias-corrected Adam with optional L2 weight decay folded into the gradient.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update; `grads` is indexed like `params.ids()`.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Tensor]) -> Result<(), TensorError> {
        if grads.len() != params.len() {
            return Err(TensorError::Invalid(format!(
                "{} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(TensorError::NonFinite { op: "adam" });
        }
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.data().len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (pi, g) in grads.iter().enumerate() {
            let id = params.ids()[pi];
            let value = params.value_mut(id);
            if value.shape() != g.shape() {
                return Err(TensorError::Shape {
                    op: "adam",
                    left: value.shape(),
                    right: g.shape(),
                });
            }
            let (m, v) = (&mut self.m[pi], &mut self.v[pi]);
            for (i, (x, &gi)) in value.data_mut().iter_mut().zip(g.data()).enumerate() {
                let gi = gi + self.weight_decay * *x;
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                *x -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
