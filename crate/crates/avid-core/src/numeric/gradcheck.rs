//! Central finite-difference verification of analytic gradients.

use super::{Gradients, Mlp};
use crate::fmath;

/// Largest relative disagreement between `analytic` and the central
/// finite-difference estimate of `f`'s gradient at `params`.
///
/// When both gradients are tiny the absolute difference is reported instead,
/// so exact zeros do not blow up the ratio.
pub fn finite_diff_check<F>(mut f: F, params: &Mlp, analytic: &Gradients, epsilon: f64) -> f64
where
    F: FnMut(&Mlp) -> f64,
{
    let mut work = params.clone();
    let mut worst: f64 = 0.0;
    let n_layers = params.layers().len();
    for l in 0..n_layers {
        let weight_len = {
            let layer = &params.layers()[l];
            layer.weight.rows() * layer.weight.cols()
        };
        for i in 0..weight_len {
            let original = work.layers()[l].weight.as_slice()[i];
            work.layers_mut()[l].weight.as_mut_slice()[i] = original + epsilon;
            let plus = f(&work);
            work.layers_mut()[l].weight.as_mut_slice()[i] = original - epsilon;
            let minus = f(&work);
            work.layers_mut()[l].weight.as_mut_slice()[i] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            worst = worst.max(relative_error(analytic.weights[l].as_slice()[i], numeric));
        }
        let bias_len = params.layers()[l].bias.len();
        for i in 0..bias_len {
            let original = work.layers()[l].bias[i];
            work.layers_mut()[l].bias[i] = original + epsilon;
            let plus = f(&work);
            work.layers_mut()[l].bias[i] = original - epsilon;
            let minus = f(&work);
            work.layers_mut()[l].bias[i] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            worst = worst.max(relative_error(analytic.biases[l][i], numeric));
        }
    }
    worst
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = fmath::abs(analytic - numeric);
    let scale = fmath::abs(analytic).max(fmath::abs(numeric));
    if scale < 1e-8 {
        diff
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::dot;

    fn half_norm_squared(net: &Mlp) -> f64 {
        let mut total = 0.0;
        for layer in net.layers() {
            total += dot(layer.weight.as_slice(), layer.weight.as_slice());
            total += dot(&layer.bias, &layer.bias);
        }
        0.5 * total
    }

    #[test]
    fn quadratic_gradient_is_exact_under_central_differences() {
        let mut rng = crate::rng::stream_rng(31, "gc");
        let net = Mlp::new_random(&[3, 4, 2], &mut rng).unwrap();
        // d(0.5‖p‖²)/dp = p.
        let mut analytic = Gradients::zeros_like(&net);
        for (l, layer) in net.layers().iter().enumerate() {
            analytic.weights[l]
                .as_mut_slice()
                .copy_from_slice(layer.weight.as_slice());
            analytic.biases[l].copy_from_slice(&layer.bias);
        }
        let err = finite_diff_check(half_norm_squared, &net, &analytic, 1e-5);
        assert!(err < 1e-8, "relative error {err}");
    }

    #[test]
    fn constant_function_has_zero_gradient_both_ways() {
        let mut rng = crate::rng::stream_rng(32, "gc2");
        let net = Mlp::new_random(&[3, 3], &mut rng).unwrap();
        let analytic = Gradients::zeros_like(&net);
        let err = finite_diff_check(|_| 7.25, &net, &analytic, 1e-5);
        assert!(err < 1e-10, "error {err}");
    }

    #[test]
    fn mlp_backward_matches_finite_differences_over_many_seeds() {
        // Scalar loss: 0.5‖y‖² of the network output at a fixed input.
        for seed in 0..20u64 {
            let mut rng = crate::rng::stream_rng(seed, "gc3");
            let net = Mlp::new_random(&[4, 6, 5, 3], &mut rng).unwrap();
            let x = crate::rng::normal_vector(&mut rng, 4);
            let (y, cache) = net.forward(&x).unwrap();
            let (_, analytic) = net.backward(&cache, &y).unwrap();
            let err = finite_diff_check(
                |p| {
                    let out = p.infer(&x).unwrap();
                    0.5 * dot(&out, &out)
                },
                &net,
                &analytic,
                1e-5,
            );
            assert!(err < 1e-4, "seed {seed}: relative error {err}");
        }
    }
}
