//! Losses over logits, each returning the batch-mean loss and its gradient
//! with respect to the logits.

use super::Tensor;

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax of a `[B, K]` tensor.
pub fn softmax(logits: &Tensor) -> Vec<Vec<f64>> {
    let k = logits.shape[1];
    logits
        .data
        .chunks_exact(k)
        .map(|row| {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / sum).collect()
        })
        .collect()
}

/// Mean categorical cross-entropy of softmax(logits) against class indices.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &[usize]) -> (f64, Tensor) {
    let (b, k) = (logits.shape[0], logits.shape[1]);
    assert_eq!(targets.len(), b);
    let probs = softmax(logits);
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(b * k);
    for (p, &y) in probs.iter().zip(targets) {
        loss -= p[y].max(f64::MIN_POSITIVE).ln();
        for (c, &pc) in p.iter().enumerate() {
            grad.push((pc - if c == y { 1.0 } else { 0.0 }) / b as f64);
        }
    }
    (loss / b as f64, Tensor::new(vec![b, k], grad))
}

/// Binary cross-entropy of independent sigmoids, summed over outputs and
/// averaged over the batch. `targets` is `[B, K]` in {0, 1}.
pub fn sigmoid_binary_cross_entropy(logits: &Tensor, targets: &[f64]) -> (f64, Tensor) {
    let b = logits.shape[0];
    assert_eq!(targets.len(), logits.data.len());
    let mut loss = 0.0;
    let grad = logits
        .data
        .iter()
        .zip(targets)
        .map(|(&l, &y)| {
            // -[y ln σ(l) + (1-y) ln(1-σ(l))]
            loss += y * softplus(-l) + (1.0 - y) * softplus(l);
            (sigmoid(l) - y) / b as f64
        })
        .collect();
    (loss / b as f64, Tensor::new(logits.shape.clone(), grad))
}

/// Discriminator objective as a loss: `-mean ln D(real) - mean ln(1 - D(fake))`.
/// Returns the loss and gradients for the real and fake logit batches.
pub fn discriminator_loss(real_logits: &[f64], fake_logits: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let nr = real_logits.len() as f64;
    let nf = fake_logits.len() as f64;
    let loss = real_logits.iter().map(|&l| softplus(-l)).sum::<f64>() / nr
        + fake_logits.iter().map(|&l| softplus(l)).sum::<f64>() / nf;
    let g_real = real_logits.iter().map(|&l| -sigmoid(-l) / nr).collect();
    let g_fake = fake_logits.iter().map(|&l| sigmoid(l) / nf).collect();
    (loss, g_real, g_fake)
}

/// Non-saturating generator loss `-mean ln D(G(z))`.
pub fn generator_loss(fake_logits: &[f64]) -> (f64, Vec<f64>) {
    let n = fake_logits.len() as f64;
    let loss = fake_logits.iter().map(|&l| softplus(-l)).sum::<f64>() / n;
    let grad = fake_logits.iter().map(|&l| -sigmoid(-l) / n).collect();
    (loss, grad)
}
