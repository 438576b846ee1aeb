//! Adaptive-moment optimizer with decoupled weight decay.

use super::{Gradients, Mlp};
use crate::error::{CoreError, Result};
use crate::fmath;

/// Optimizer hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 1e-5,
        }
    }
}

/// First and second moment accumulators plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamState {
    first: Gradients,
    second: Gradients,
    step: u64,
}

impl AdamState {
    pub fn new(params: &Mlp) -> Self {
        AdamState {
            first: Gradients::zeros_like(params),
            second: Gradients::zeros_like(params),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One update: moments, bias correction, decoupled decay. The step counter
/// increments exactly once per call.
pub fn adam_step(
    params: &mut Mlp,
    grads: &Gradients,
    state: &mut AdamState,
    hp: &AdamParams,
) -> Result<()> {
    let shapes_ok = params.layers().len() == grads.weights.len()
        && params
            .layers()
            .iter()
            .zip(grads.weights.iter())
            .all(|(l, g)| l.weight.same_shape(g))
        && params
            .layers()
            .iter()
            .zip(grads.biases.iter())
            .all(|(l, b)| l.bias.len() == b.len());
    if !shapes_ok {
        return Err(CoreError::ShapeMismatch {
            context: "adam step",
        });
    }

    state.step += 1;
    let t = state.step as f64;
    let bias1 = 1.0 - pow(hp.beta1, t);
    let bias2 = 1.0 - pow(hp.beta2, t);

    for (l, layer) in params.layers_mut().iter_mut().enumerate() {
        update_slice(
            layer.weight.as_mut_slice(),
            grads.weights[l].as_slice(),
            state.first.weights[l].as_mut_slice(),
            state.second.weights[l].as_mut_slice(),
            hp,
            bias1,
            bias2,
        );
        update_slice(
            &mut layer.bias,
            &grads.biases[l],
            &mut state.first.biases[l],
            &mut state.second.biases[l],
            hp,
            bias1,
            bias2,
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn update_slice(
    params: &mut [f64],
    grads: &[f64],
    first: &mut [f64],
    second: &mut [f64],
    hp: &AdamParams,
    bias1: f64,
    bias2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        first[i] = hp.beta1 * first[i] + (1.0 - hp.beta1) * g;
        second[i] = hp.beta2 * second[i] + (1.0 - hp.beta2) * g * g;
        let m_hat = first[i] / bias1;
        let v_hat = second[i] / bias2;
        params[i] -= hp.lr * m_hat / (fmath::sqrt(v_hat) + hp.epsilon);
        params[i] -= hp.lr * hp.weight_decay * params[i];
    }
}

fn pow(base: f64, exponent: f64) -> f64 {
    libm::pow(base, exponent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{Activation, Layer, Matrix, Mlp};
    use alloc::vec;
    use alloc::vec::Vec;

    fn scalar_net(values: Vec<f64>) -> Mlp {
        let n = values.len();
        Mlp::from_layers(vec![Layer {
            weight: Matrix::from_vec(1, n, values).unwrap(),
            bias: vec![0.0],
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    #[test]
    fn zero_gradient_and_zero_decay_leave_params_unchanged() {
        let mut net = scalar_net(vec![0.3, -0.7, 1.1]);
        let before = net.clone();
        let mut state = AdamState::new(&net);
        let grads = Gradients::zeros_like(&net);
        let hp = AdamParams {
            weight_decay: 0.0,
            ..AdamParams::default()
        };
        adam_step(&mut net, &grads, &mut state, &hp).unwrap();
        assert_eq!(net, before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_roughly_lr_in_sign_direction() {
        let mut net = scalar_net(vec![1.0, 1.0]);
        let mut state = AdamState::new(&net);
        let mut grads = Gradients::zeros_like(&net);
        grads.weights[0].as_mut_slice()[0] = 0.5;
        grads.weights[0].as_mut_slice()[1] = -2.0;
        let hp = AdamParams {
            lr: 0.05,
            weight_decay: 0.0,
            ..AdamParams::default()
        };
        adam_step(&mut net, &grads, &mut state, &hp).unwrap();
        let w = net.layers()[0].weight.as_slice();
        // Bias correction makes the very first update ≈ lr · sign(g).
        assert!((w[0] - (1.0 - 0.05)).abs() < 1e-6);
        assert!((w[1] - (1.0 + 0.05)).abs() < 1e-6);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut net = scalar_net(vec![1.0, 2.0]);
        let other = scalar_net(vec![1.0, 2.0, 3.0]);
        let mut state = AdamState::new(&net);
        let grads = Gradients::zeros_like(&other);
        assert_eq!(
            adam_step(&mut net, &grads, &mut state, &AdamParams::default()),
            Err(CoreError::ShapeMismatch {
                context: "adam step"
            })
        );
    }

    #[test]
    fn quadratic_bowl_converges() {
        // Minimize 0.5‖w‖² from a point at distance ~2.
        let mut net = scalar_net(vec![1.2, -1.5, 0.8]);
        let mut state = AdamState::new(&net);
        let hp = AdamParams {
            lr: 0.05,
            weight_decay: 0.0,
            ..AdamParams::default()
        };
        for _ in 0..500 {
            let mut grads = Gradients::zeros_like(&net);
            let w = net.layers()[0].weight.as_slice().to_vec();
            grads.weights[0]
                .as_mut_slice()
                .copy_from_slice(&w);
            adam_step(&mut net, &grads, &mut state, &hp).unwrap();
        }
        let norm = crate::numeric::norm(net.layers()[0].weight.as_slice());
        assert!(norm < 1e-3, "final norm {norm}");
        assert_eq!(state.step_count(), 500);
    }
}
