use crate::error::{Error, Result};

/// Moment accumulators and hyper-parameters of the Adam optimiser.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
        }
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64, eps: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self.eps = eps;
        self
    }
}

/// One bias-corrected Adam update of `params` in place. A non-finite gradient
/// rejects the step and leaves everything untouched.
pub fn adam_step(state: &mut AdamState, grad: &[f64], params: &mut [f64]) -> Result<()> {
    if grad.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} parameters", state.m.len()),
            found: format!("{} gradients, {} parameters", grad.len(), params.len()),
        });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite gradient {} at parameter {i} (step {})",
            grad[i],
            state.t + 1
        )));
    }
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grad)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(3, 0.1);
        let mut p = vec![1.0, -2.0, 3.0];
        for _ in 0..10 {
            adam_step(&mut s, &[0.0; 3], &mut p).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(s.t, 10);
    }

    #[test]
    fn nan_gradient_rejected() {
        let mut s = AdamState::new(2, 0.1);
        let mut p = vec![1.0, 1.0];
        assert!(adam_step(&mut s, &[f64::NAN, 0.0], &mut p).is_err());
        assert_eq!(s.t, 0);
    }
}
