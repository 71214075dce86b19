//! Central finite differences against backprop for each layer type.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use soundmask::nn::{
    Conv1d, Conv2d, ConvTranspose1d, Dense, Gru, LeakyRelu, MaxPool2d, Relu, Reshape, Sequential,
    Tanh, Tensor, ToSequence, Trim,
};

const H: f64 = 1e-6;

/// Loss = <probe, net(x)>, a fixed random projection of the output.
fn loss(net: &Sequential, x: &Tensor, probe: &[f64]) -> f64 {
    net.infer(x)
        .data
        .iter()
        .zip(probe)
        .map(|(a, b)| a * b)
        .sum()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn check(mut net: Sequential, input_shape: Vec<usize>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = input_shape.iter().product();
    let x = Tensor::new(
        input_shape,
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    );
    let out = net.forward(&x);
    let probe: Vec<f64> = (0..out.data.len())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    net.zero_grad();
    let dx = net.backward(&Tensor::new(out.shape.clone(), probe.clone()), true);

    let mut numeric_dx = Vec::with_capacity(n);
    for i in 0..n {
        let mut xp = x.clone();
        xp.data[i] += H;
        let mut xm = x.clone();
        xm.data[i] -= H;
        numeric_dx.push((loss(&net, &xp, &probe) - loss(&net, &xm, &probe)) / (2.0 * H));
    }
    let e = rel_err(&dx.data, &numeric_dx);
    assert!(e < 1e-6, "input gradient rel err {e}");

    let analytic: Vec<Vec<f64>> = net
        .named_params()
        .iter()
        .map(|(_, p)| p.grad.clone())
        .collect();
    for (pi, grads) in analytic.iter().enumerate() {
        let mut numeric = Vec::with_capacity(grads.len());
        for j in 0..grads.len() {
            let orig = net.params_mut()[pi].value[j];
            net.params_mut()[pi].value[j] = orig + H;
            let lp = loss(&net, &x, &probe);
            net.params_mut()[pi].value[j] = orig - H;
            let lm = loss(&net, &x, &probe);
            net.params_mut()[pi].value[j] = orig;
            numeric.push((lp - lm) / (2.0 * H));
        }
        let e = rel_err(grads, &numeric);
        assert!(e < 1e-6, "param {pi} gradient rel err {e}");
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn dense_tanh() {
    let mut r = rng(1);
    check(
        Sequential::new()
            .with(Dense::new(5, 4, &mut r))
            .with(Tanh::new())
            .with(Dense::new(4, 3, &mut r)),
        vec![3, 5],
        11,
    );
}

#[test]
fn conv1d_strided_leaky() {
    let mut r = rng(2);
    check(
        Sequential::new()
            .with(Conv1d::new(2, 3, 5, 4, &mut r))
            .with(LeakyRelu::new(0.2))
            .with(Conv1d::new(3, 2, 3, 2, &mut r)),
        vec![2, 2, 23],
        12,
    );
}

#[test]
fn conv_transpose_reshape_trim() {
    let mut r = rng(3);
    check(
        Sequential::new()
            .with(Dense::new(4, 6, &mut r))
            .with(Reshape::new(vec![2, 3]))
            .with(Tanh::new())
            .with(ConvTranspose1d::new(2, 3, 5, 4, &mut r))
            .with(Tanh::new())
            .with(ConvTranspose1d::new(3, 1, 5, 2, &mut r))
            .with(Trim::new(20)),
        vec![2, 4],
        13,
    );
}

#[test]
fn conv2d_pool_relu() {
    let mut r = rng(4);
    check(
        Sequential::new()
            .with(Conv2d::new(1, 3, 3, &mut r))
            .with(LeakyRelu::new(0.1))
            .with(MaxPool2d::new(2))
            .with(Conv2d::new(3, 2, 3, &mut r))
            .with(Relu::new())
            .with(Dense::new(2 * 3 * 2, 3, &mut r)),
        vec![2, 1, 7, 5],
        14,
    );
}

#[test]
fn gru_last_state() {
    let mut r = rng(5);
    check(
        Sequential::new()
            .with(Gru::new(3, 4, false, &mut r))
            .with(Dense::new(4, 2, &mut r)),
        vec![2, 6, 3],
        15,
    );
}

#[test]
fn stacked_gru_sequences() {
    let mut r = rng(6);
    check(
        Sequential::new()
            .with(Gru::new(3, 4, true, &mut r))
            .with(Gru::new(4, 3, false, &mut r)),
        vec![3, 5, 3],
        16,
    );
}

#[test]
fn conv_into_recurrent() {
    let mut r = rng(7);
    check(
        Sequential::new()
            .with(Conv2d::new(1, 2, 3, &mut r))
            .with(MaxPool2d::new(2))
            .with(ToSequence::new())
            .with(Gru::new(2 * 2, 3, false, &mut r))
            .with(Dense::new(3, 2, &mut r)),
        vec![2, 1, 6, 4],
        17,
    );
}
