//! Analytic gradients against central finite differences.

use gaitspeed::nn::{global_max_pool, global_max_pool_backward, mae_loss, relu, relu_grad, Conv2d, Dense, Tensor};
use gaitspeed::rng::seeded_rng;
use gaitspeed::speednet::random_window;
use gaitspeed::{ArchSpec, SpeedNetParams};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-8 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Central difference of `f(i, x_i)` around `base[i]`, or `None` when steps
/// of `h` and `h / 2` disagree, which means a kink lies inside the stencil.
fn central_diff(base: &[f64], i: usize, f: &mut impl FnMut(usize, f64) -> f64) -> Option<f64> {
    let x = base[i];
    let mut diff = |h: f64| (f(i, x + h) - f(i, x - h)) / (2.0 * h);
    let full = diff(H);
    let half = diff(H / 2.0);
    (rel_err(full, half) < 1e-3).then_some(full)
}

/// Checks `grad` against finite differences at the given indices and returns
/// (checked, skipped at kinks).
fn check_indices(
    base: &[f64],
    grad: &[f64],
    indices: impl IntoIterator<Item = usize>,
    mut f: impl FnMut(usize, f64) -> f64,
) -> (usize, usize) {
    let (mut checked, mut skipped) = (0, 0);
    for i in indices {
        match central_diff(base, i, &mut f) {
            Some(numeric) => {
                let err = rel_err(grad[i], numeric);
                assert!(err < TOL, "index {i}: analytic {} numeric {numeric} rel err {err}", grad[i]);
                checked += 1;
            }
            None => skipped += 1,
        }
    }
    (checked, skipped)
}

fn replaced(base: &[f64], i: usize, v: f64) -> Vec<f64> {
    let mut out = base.to_vec();
    out[i] = v;
    out
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn conv_weights_bias_and_input() {
    let mut rng = seeded_rng(11);
    let (c, k, h, w) = (2, 3, 5, 4);
    let conv = Conv2d::init(c, k, &mut rng);
    let input = Tensor::new(&[c, h, w], uniform(&mut rng, c * h * w, 1.0)).unwrap();
    let probe = uniform(&mut rng, k * h * w, 1.0);
    let grads = conv
        .backward(&input, &Tensor::new(&[k, h, w], probe.clone()).unwrap())
        .unwrap();

    let (checked, _) = check_indices(&conv.weights, &grads.weights, 0..conv.weights.len(), |i, v| {
        let layer = Conv2d {
            weights: replaced(&conv.weights, i, v),
            ..conv.clone()
        };
        dot(layer.forward(&input).unwrap().data(), &probe)
    });
    assert_eq!(checked, conv.weights.len());

    check_indices(&conv.bias, &grads.bias, 0..k, |i, v| {
        let layer = Conv2d {
            bias: replaced(&conv.bias, i, v),
            ..conv.clone()
        };
        dot(layer.forward(&input).unwrap().data(), &probe)
    });

    check_indices(input.data(), grads.input.data(), 0..c * h * w, |i, v| {
        let t = Tensor::new(&[c, h, w], replaced(input.data(), i, v)).unwrap();
        dot(conv.forward(&t).unwrap().data(), &probe)
    });
}

#[test]
fn dense_weights_bias_and_input() {
    let mut rng = seeded_rng(12);
    let layer = Dense::init(7, 4, &mut rng);
    let x = uniform(&mut rng, 7, 2.0);
    let probe = uniform(&mut rng, 4, 1.0);
    let grads = layer.backward(&x, &probe).unwrap();

    check_indices(&layer.weights, &grads.weights, 0..28, |i, v| {
        let l = Dense {
            weights: replaced(&layer.weights, i, v),
            ..layer.clone()
        };
        dot(&l.forward(&x).unwrap(), &probe)
    });
    check_indices(&layer.bias, &grads.bias, 0..4, |i, v| {
        let l = Dense {
            bias: replaced(&layer.bias, i, v),
            ..layer.clone()
        };
        dot(&l.forward(&x).unwrap(), &probe)
    });
    check_indices(&x, &grads.input, 0..7, |i, v| {
        dot(&layer.forward(&replaced(&x, i, v)).unwrap(), &probe)
    });
}

#[test]
fn global_max_pool_routes_to_argmax() {
    let mut rng = seeded_rng(13);
    let shape = [3, 4, 5];
    let x = uniform(&mut rng, 60, 1.0);
    let probe = uniform(&mut rng, 3, 1.0);
    let (_, argmax) = global_max_pool(&Tensor::new(&shape, x.clone()).unwrap()).unwrap();
    let grad = global_max_pool_backward(&shape, &argmax, &probe);
    let (checked, _) = check_indices(&x, grad.data(), 0..60, |i, v| {
        let t = Tensor::new(&shape, replaced(&x, i, v)).unwrap();
        dot(&global_max_pool(&t).unwrap().0, &probe)
    });
    assert_eq!(checked, 60);
}

#[test]
fn relu_away_from_zero() {
    let x = vec![-2.0, -0.3, 0.4, 1.5, 3.0, -1e-2];
    let probe = vec![0.5, -1.0, 2.0, 0.25, -0.75, 1.0];
    let grad: Vec<f64> = relu_grad(&x).iter().zip(&probe).map(|(g, p)| g * p).collect();
    let (checked, _) = check_indices(&x, &grad, 0..6, |i, v| dot(&relu(&replaced(&x, i, v)), &probe));
    assert_eq!(checked, 6);
}

#[test]
fn mae_away_from_ties() {
    let pred = vec![1.0, 2.5, -3.0, 4.2];
    let truth = [0.0, 3.0, -1.0, 4.0];
    let (_, grad) = mae_loss(&pred, &truth).unwrap();
    let (checked, _) = check_indices(&pred, &grad, 0..4, |i, v| mae_loss(&replaced(&pred, i, v), &truth).unwrap().0);
    assert_eq!(checked, 4);
}

fn shrunk_arch(dropout: f64) -> ArchSpec {
    ArchSpec {
        input_frames: 16,
        conv_filters: vec![4, 6],
        dense_units: vec![8, 4],
        dropout,
    }
}

/// Labels a fixed distance above or below each prediction keep the MAE away
/// from its kink.
fn batch(params: &SpeedNetParams, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = seeded_rng(seed);
    let windows: Vec<Vec<f64>> = (0..n).map(|_| random_window(params.arch.input_frames, &mut rng)).collect();
    let labels = windows
        .iter()
        .enumerate()
        .map(|(i, w)| params.predict(w).unwrap() + if i % 2 == 0 { 5.0 } else { -5.0 })
        .collect();
    (windows, labels)
}

fn with_param(params: &SpeedNetParams, tensor: usize, index: usize, value: f64) -> SpeedNetParams {
    let mut p = params.clone();
    p.tensors_mut()[tensor][index] = value;
    p
}

/// Compares every parameter (or `limit` random ones) of `params` and
/// returns the number checked.
fn check_network(
    params: &SpeedNetParams,
    windows: &[Vec<f64>],
    labels: &[f64],
    dropout_seed: Option<u64>,
    limit: Option<usize>,
) -> usize {
    let views: Vec<&[f64]> = windows.iter().map(Vec::as_slice).collect();
    let loss = |p: &SpeedNetParams| {
        let mut rng = dropout_seed.map(seeded_rng);
        p.loss_and_gradient(&views, labels, rng.as_mut()).unwrap().0
    };
    let mut rng = dropout_seed.map(seeded_rng);
    let (_, grads) = params.loss_and_gradient(&views, labels, rng.as_mut()).unwrap();
    let grad_flat = grads.flat();

    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let total: usize = sizes.iter().sum();
    let chosen: Vec<usize> = match limit {
        Some(k) => sample(&mut seeded_rng(99), total, k.min(total)).into_vec(),
        None => (0..total).collect(),
    };
    let locate = |mut i: usize| {
        for (t, &n) in sizes.iter().enumerate() {
            if i < n {
                return (t, i);
            }
            i -= n;
        }
        unreachable!("index beyond parameter count")
    };
    let (checked, skipped) = check_indices(&params.flat(), &grad_flat, chosen.iter().copied(), |i, v| {
        let (t, j) = locate(i);
        loss(&with_param(params, t, j, v))
    });
    assert!(skipped * 100 <= chosen.len(), "{skipped} of {} parameters sat on kinks", chosen.len());
    checked
}

#[test]
fn shrunk_network_all_parameters() {
    let params = SpeedNetParams::init(&shrunk_arch(0.0), 5).unwrap();
    let (windows, labels) = batch(&params, 3, 6);
    let checked = check_network(&params, &windows, &labels, None, None);
    assert!(checked >= params.param_count() * 99 / 100);
}

#[test]
fn shrunk_network_with_fixed_dropout_masks() {
    let params = SpeedNetParams::init(&shrunk_arch(0.3), 8).unwrap();
    let (windows, labels) = batch(&params, 2, 9);
    check_network(&params, &windows, &labels, Some(17), None);
}

#[test]
fn default_network_random_parameters() {
    let params = SpeedNetParams::init(&ArchSpec::default(), 21).unwrap();
    let (windows, labels) = batch(&params, 2, 22);
    let checked = check_network(&params, &windows, &labels, None, Some(100));
    assert!(checked >= 99);
}
