use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract, ensure_finite};
use crate::math;
use crate::Result;

/// Adam moment buffers and hyperparameters for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self {
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. Parameters are left untouched on error.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    contract!(
        params.len() == grads.len() && grads.len() == state.first_moment.len(),
        "adam shapes differ: params {}, grads {}, moments {}",
        params.len(),
        grads.len(),
        state.first_moment.len()
    );
    ensure_finite("adam gradient", grads)?;
    state.step_count += 1;
    let t = state.step_count as i32;
    let c1 = 1.0 - math::powi(state.beta1, t);
    let c2 = 1.0 - math::powi(state.beta2, t);
    let (b1, b2) = (state.beta1, state.beta2);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= state.learning_rate * m_hat / (math::sqrt(v_hat) + state.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2, 0.1);
        s.first_moment = vec![0.5, 0.5];
        adam_step(&mut p, &[0.0, 0.0], &mut s).unwrap();
        // moments decay but the bias-corrected step is nonzero only through m
        assert_eq!(s.first_moment, vec![0.45, 0.45]);
        let mut q = vec![1.0, -2.0];
        let mut fresh = AdamState::new(2, 0.1);
        adam_step(&mut q, &[0.0, 0.0], &mut fresh).unwrap();
        assert_eq!(q, vec![1.0, -2.0]);
    }

    #[test]
    fn step_count_increments() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(1, 0.01);
        assert_eq!(s.step_count, 0);
        adam_step(&mut p, &[1.0], &mut s).unwrap();
        assert_eq!(s.step_count, 1);
    }

    /// Independent scalar recurrence for f(x) = x², written out longhand.
    fn scalar_adam_quadratic(x0: f64, lr: f64, steps: usize) -> f64 {
        let (mut x, mut m, mut v) = (x0, 0.0f64, 0.0f64);
        for t in 1..=steps {
            let g = 2.0 * x;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - libm::pow(0.9, t as f64));
            let vh = v / (1.0 - libm::pow(0.999, t as f64));
            x -= lr * mh / (libm::sqrt(vh) + 1e-8);
        }
        x
    }

    #[test]
    fn quadratic_converges_like_scalar_recurrence() {
        let reference = scalar_adam_quadratic(1.0, 0.1, 200);
        assert!(reference.abs() < 0.05, "oracle itself: {reference}");
        let mut x = vec![1.0];
        let mut s = AdamState::new(1, 0.1);
        for _ in 0..200 {
            let g = [2.0 * x[0]];
            adam_step(&mut x, &g, &mut s).unwrap();
        }
        assert!(x[0].abs() < 0.05);
        assert!((x[0] - reference).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = vec![1.0, 1.0];
        let mut s = AdamState::new(2, 0.1);
        let err = adam_step(&mut p, &[0.1, f64::INFINITY], &mut s).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
        assert_eq!(p, vec![1.0, 1.0]);
        assert_eq!(s.step_count, 0);
    }

    #[test]
    fn quadratic_loss_decreases_after_burn_in() {
        // f(x) = Σ c_k x_k², positive definite
        let c = [1.0, 4.0, 0.25];
        let mut x = vec![1.0, -1.0, 2.0];
        let mut s = AdamState::new(3, 0.01);
        let loss = |x: &[f64]| x.iter().zip(&c).map(|(a, k)| k * a * a).sum::<f64>();
        let mut prev = loss(&x);
        for step in 0..300 {
            let g: Vec<f64> = x.iter().zip(&c).map(|(a, k)| 2.0 * k * a).collect();
            adam_step(&mut x, &g, &mut s).unwrap();
            let now = loss(&x);
            if step >= 20 {
                assert!(now <= prev, "step {step}: {now} > {prev}");
            }
            prev = now;
        }
    }
}
