//! Central finite-difference verification of every layer kind's gradients.
//!
//! The oracle freezes the dropout masks sampled by one training forward,
//! then perturbs each parameter by +/- 1e-5 and compares the analytic
//! gradient of the mean cross-entropy against (L+ - L-) / 2h in 64-bit.

use candlekit::market::Class;
use candlekit::nnet::{LayerSpec, Network, Tensor};
use candlekit::num::rng_from;
use rand::Rng;

const FD_STEP: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Max relative error between analytic and finite-difference gradients.
fn check_network(mut net: Network, batch: &Tensor, labels: &[Class], seed: u64) -> f64 {
    let mut rng = rng_from(&[seed, 0xF0]);
    net.zero_grads();
    net.train_step(batch, labels, &mut rng).unwrap();
    let analytic = net.grads_flat();
    let base = net.params_flat();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += FD_STEP;
        net.set_params_flat(&plus).unwrap();
        let lp = net.loss_frozen(batch, labels).unwrap();

        let mut minus = base.clone();
        minus[i] -= FD_STEP;
        net.set_params_flat(&minus).unwrap();
        let lm = net.loss_frozen(batch, labels).unwrap();

        let fd = (lp - lm) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(analytic[i], fd));
    }
    net.set_params_flat(&base).unwrap();
    worst
}

fn random_batch(rows: usize, cols: usize, seed: u64) -> (Tensor, Vec<Class>) {
    let mut rng = rng_from(&[seed, 0xDA7A]);
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let labels: Vec<Class> = (0..rows)
        .map(|_| {
            if rng.gen::<bool>() {
                Class::Positive
            } else {
                Class::Negative
            }
        })
        .collect();
    (Tensor::new(vec![rows, cols], data).unwrap(), labels)
}

fn conv_net(width: usize, seed: u64) -> Network {
    Network::new(
        80,
        vec![
            LayerSpec::Conv {
                filters: 8,
                width,
                input_width: 20,
            },
            LayerSpec::Relu,
            LayerSpec::Dropout { rate: 0.5 },
            LayerSpec::Dense {
                inputs: 160,
                units: 10,
            },
            LayerSpec::Relu,
            LayerSpec::Dropout { rate: 0.5 },
            LayerSpec::Dense {
                inputs: 10,
                units: 2,
            },
            LayerSpec::Softmax,
        ],
        seed,
    )
    .unwrap()
}

fn dense_net(seed: u64) -> Network {
    Network::new(
        12,
        vec![
            LayerSpec::Dense {
                inputs: 12,
                units: 9,
            },
            LayerSpec::Relu,
            LayerSpec::Dropout { rate: 0.5 },
            LayerSpec::Dense {
                inputs: 9,
                units: 7,
            },
            LayerSpec::Relu,
            LayerSpec::Dense {
                inputs: 7,
                units: 2,
            },
            LayerSpec::Softmax,
        ],
        seed,
    )
    .unwrap()
}

#[test]
fn conv_nets_pass_central_differences() {
    for (i, width) in [1usize, 2, 3, 1, 2, 3, 1, 2, 3, 3].iter().enumerate() {
        let seed = 100 + i as u64;
        let net = conv_net(*width, seed);
        let (batch, labels) = random_batch(6, 80, seed);
        let err = check_network(net, &batch, &labels, seed);
        assert!(
            err < TOLERANCE,
            "conv width {width} seed {seed}: max relative error {err:.3e}"
        );
    }
}

#[test]
fn dense_nets_pass_central_differences() {
    for i in 0..10u64 {
        let seed = 500 + i;
        let net = dense_net(seed);
        let (batch, labels) = random_batch(8, 12, seed);
        let err = check_network(net, &batch, &labels, seed);
        assert!(err < TOLERANCE, "seed {seed}: max relative error {err:.3e}");
    }
}
