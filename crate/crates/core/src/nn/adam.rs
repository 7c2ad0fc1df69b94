//! Adam optimizer state for one parameter buffer.

/// First/second moment planes plus the step counter for one buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64, beta1: f64, beta2: f64) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
            beta1,
            beta2,
            eps: 1e-8,
        }
    }

    /// One bias-corrected update. `params` and `grads` must be congruent
    /// with the moment planes.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "adam: parameter shape changed");
        assert_eq!(grads.len(), self.m.len(), "adam: gradient shape mismatch");
        self.t += 1;
        let b1 = self.beta1;
        let b2 = self.beta2;
        let corr1 = 1.0 - b1.powi(self.t as i32);
        let corr2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            let mhat = self.m[i] / corr1;
            let vhat = self.v[i] / corr2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}
