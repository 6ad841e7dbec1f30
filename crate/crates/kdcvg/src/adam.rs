//! Adam optimizer over a flat parameter slice, with bias correction.

/// First/second-moment state for one parameter tensor.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64, n_params: usize) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    /// One descent step in place. `params` and `grads` must match the length
    /// given at construction.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        assert_eq!(grads.len(), self.m.len(), "gradient count changed");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With bias correction the very first update is lr * g/|g| = lr * sign(g)
        // up to the epsilon regularizer.
        let mut adam = Adam::new(0.1, 0.9, 0.999, 1e-8, 2);
        let mut params = vec![1.0, -2.0];
        adam.step(&mut params, &[0.5, -3.0]);
        assert!((params[0] - 0.9).abs() < 1e-6);
        assert!((params[1] + 1.9).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_is_a_noop() {
        let mut adam = Adam::new(0.1, 0.9, 0.999, 1e-8, 3);
        let mut params = vec![1.0, 2.0, 3.0];
        adam.step(&mut params, &[0.0, 0.0, 0.0]);
        assert_eq!(params, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn converges_on_a_quadratic() {
        // f(x) = (x - 3)^2, gradient 2(x - 3).
        let mut adam = Adam::new(0.05, 0.9, 0.999, 1e-8, 1);
        let mut x = vec![0.0];
        for _ in 0..2000 {
            let g = 2.0 * (x[0] - 3.0);
            adam.step(&mut x, &[g]);
        }
        assert!((x[0] - 3.0).abs() < 1e-3, "got {}", x[0]);
    }
}
