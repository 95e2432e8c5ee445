//! Adam optimizer over the flat learnable vector.

/// First/second moment state. Lives only for the duration of a training run.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    /// Steps taken so far.
    pub t: usize,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState { m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }
}

/// One bias-corrected Adam update in place. `step_index` starts at 1.
pub fn adam_step(
    params: &mut [f64],
    grad: &[f64],
    state: &mut AdamState,
    step_index: usize,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) {
    assert_eq!(params.len(), grad.len());
    assert_eq!(params.len(), state.m.len());
    assert!(step_index >= 1);
    state.t = step_index;
    let bc1 = 1.0 - beta1.powi(step_index as i32);
    let bc2 = 1.0 - beta2.powi(step_index as i32);
    for i in 0..params.len() {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
        let mhat = state.m[i] / bc1;
        let vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (vhat.sqrt() + epsilon);
    }
}

/// Scale the gradient down to a global L2 norm bound. No-op when already
/// within the bound or when the bound is non-positive.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grad {
            *g *= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_sign() {
        // With |g| >> epsilon, the bias-corrected ratio at t = 1 is sign(g).
        let mut p = vec![1.0, -2.0, 0.5];
        let g = vec![1000.0, -512.0, 3.0];
        let mut st = AdamState::new(3);
        adam_step(&mut p, &g, &mut st, 1, 0.01, 0.9, 0.999, 1e-8);
        assert!((p[0] - (1.0 - 0.01)).abs() < 1e-6);
        assert!((p[1] - (-2.0 + 0.01)).abs() < 1e-6);
        assert!((p[2] - (0.5 - 0.01)).abs() < 1e-5);
    }

    #[test]
    fn zero_grad_or_zero_lr_leaves_params() {
        let mut p = vec![0.3, 0.7];
        let mut st = AdamState::new(2);
        for t in 1..=5 {
            adam_step(&mut p, &[0.0, 0.0], &mut st, t, 0.01, 0.9, 0.999, 1e-8);
        }
        assert_eq!(p, vec![0.3, 0.7]);
        let mut st = AdamState::new(2);
        for t in 1..=5 {
            adam_step(&mut p, &[1.0, -1.0], &mut st, t, 0.0, 0.9, 0.999, 1e-8);
        }
        assert_eq!(p, vec![0.3, 0.7]);
    }

    #[test]
    fn clip_rescales_to_bound() {
        let mut g = vec![3.0, 4.0];
        clip_grad_norm(&mut g, 1.0);
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!((g[0] / g[1] - 0.75).abs() < 1e-12);
        let mut g = vec![0.3, 0.4];
        clip_grad_norm(&mut g, 1.0);
        assert_eq!(g, vec![0.3, 0.4]);
    }
}
