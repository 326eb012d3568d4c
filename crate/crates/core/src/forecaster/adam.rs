use super::model::LstmModel;

/// Adam with bias-corrected first and second moment estimates, one moment
/// slot per model parameter in [`LstmModel::params`] order.
#[derive(Debug, Clone)]
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(param_count: usize, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam { learning_rate, beta1, beta2, epsilon, step: 0, m: vec![0.0; param_count], v: vec![0.0; param_count] }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    pub fn update(&mut self, model: &mut LstmModel, grads: &LstmModel) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let mut slot = 0;
        for (p, g) in model.params_mut().into_iter().zip(grads.params()) {
            for (w, &dw) in p.iter_mut().zip(g) {
                let m = &mut self.m[slot];
                let v = &mut self.v[slot];
                *m = self.beta1 * *m + (1.0 - self.beta1) * dw;
                *v = self.beta2 * *v + (1.0 - self.beta2) * dw * dw;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                slot += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut model = LstmModel::zeros(1, 1);
        let mut grads = model.zeros_like();
        grads.proj_bias[0] = 0.3;
        grads.gate_bias[0] = -5.0;
        let mut adam = Adam::new(model.param_count(), 0.01, 0.9, 0.999, 1e-8);
        adam.update(&mut model, &grads);
        // Bias correction makes the first step +-lr regardless of scale.
        assert!((model.proj_bias[0] + 0.01).abs() < 1e-9);
        assert!((model.gate_bias[0] - 0.01).abs() < 1e-9);
        assert_eq!(model.gate_bias[1], 0.0);
        assert_eq!(adam.steps_taken(), 1);
    }
}
