use alloc::vec::Vec;

use super::DenseNet;

/// Outcome of comparing analytic and central-difference gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Relative error with an absolute floor of `1e-4` on the denominator, so
/// components that are essentially zero compare on an absolute scale.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

pub fn compare_gradients(analytic: &[f64], numeric: &[f64], tolerance: f64) -> GradCheckReport {
    let mut worst = (0.0, None);
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let e = relative_error(*a, *n);
        if e > worst.0 || e.is_nan() {
            worst = (e, Some(i));
        }
    }
    GradCheckReport {
        checked: analytic.len().min(numeric.len()),
        max_rel_error: worst.0,
        worst_index: worst.1,
        tolerance,
        passed: analytic.len() == numeric.len() && worst.0 < tolerance,
    }
}

/// Central differences of `Σ_k weights[k] · out[k]` with respect to every parameter.
pub fn numeric_param_gradient(net: &DenseNet, input: &[f64], weights: &[f64], step: f64) -> Vec<f64> {
    let mut probe = net.clone();
    let scalar = |n: &DenseNet| -> f64 {
        n.forward(input)
            .expect("probe shares the checked network's shape")
            .iter()
            .zip(weights)
            .map(|(o, w)| o * w)
            .sum()
    };
    (0..net.num_params())
        .map(|i| {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + step;
            let up = scalar(&probe);
            probe.params_mut()[i] = orig - step;
            let down = scalar(&probe);
            probe.params_mut()[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Checks `backward` against central differences (step `1e-5`) on the scalar
/// `Σ_k w_k · out_k` with fixed alternating weights.
pub fn grad_check(net: &DenseNet, input: &[f64], tolerance: f64) -> GradCheckReport {
    let weights: Vec<f64> = (0..net.output_dim())
        .map(|k| if k % 2 == 0 { 1.0 } else { -0.5 })
        .collect();
    let analytic = match net.backward(input, &weights) {
        Ok((g, _)) => g,
        Err(_) => {
            return GradCheckReport {
                checked: 0,
                max_rel_error: f64::INFINITY,
                worst_index: None,
                tolerance,
                passed: false,
            }
        }
    };
    let numeric = numeric_param_gradient(net, input, &weights, 1e-5);
    compare_gradients(&analytic, &numeric, tolerance)
}
