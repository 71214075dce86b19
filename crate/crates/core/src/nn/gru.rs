use rand::Rng;

use super::{gemm, Layer, Param, Tensor};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct GruCache {
    input: Tensor,
    /// Per step `[B, H]` blocks, step-major.
    h_prev: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    /// Hidden-side candidate pre-activation `W_hn h + b_hn`.
    ghn: Vec<f64>,
}

/// Gated recurrent layer over `[B, T, F]` sequences, zero initial state.
///
/// Gates follow the reset/update/candidate convention with the reset gate
/// applied to the hidden-side candidate term. Output is the final hidden
/// state `[B, H]`, or every state `[B, T, H]` when `return_sequences`.
pub struct Gru {
    w_ih: Param,
    w_hh: Param,
    b_ih: Param,
    b_hh: Param,
    return_sequences: bool,
    cache: Option<GruCache>,
}

impl Gru {
    pub fn new(inputs: usize, hidden: usize, return_sequences: bool, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        Self {
            w_ih: Param::uniform("w_ih", vec![3 * hidden, inputs], bound, rng),
            w_hh: Param::uniform("w_hh", vec![3 * hidden, hidden], bound, rng),
            b_ih: Param::uniform("b_ih", vec![3 * hidden], bound, rng),
            b_hh: Param::uniform("b_hh", vec![3 * hidden], bound, rng),
            return_sequences,
            cache: None,
        }
    }

    pub fn param_count(inputs: usize, hidden: usize) -> usize {
        3 * hidden * (inputs + hidden + 2)
    }

    fn hidden(&self) -> usize {
        self.w_hh.shape[1]
    }

    fn inputs(&self) -> usize {
        self.w_ih.shape[1]
    }

    fn run(&self, x: &Tensor, mut cache: Option<&mut GruCache>) -> Tensor {
        let (b, t, f) = (x.shape[0], x.shape[1], x.shape[2]);
        assert_eq!(f, self.inputs());
        let hd = self.hidden();
        let g3 = 3 * hd;
        let mut gi = vec![0.0; b * t * g3];
        for row in gi.chunks_exact_mut(g3) {
            row.copy_from_slice(&self.b_ih.value);
        }
        gemm(
            b * t,
            f,
            g3,
            &x.data,
            false,
            &self.w_ih.value,
            true,
            &mut gi,
            1.0,
        );

        let mut h = vec![0.0; b * hd];
        let mut gh = vec![0.0; b * g3];
        let mut seq = if self.return_sequences {
            vec![0.0; b * t * hd]
        } else {
            Vec::new()
        };
        for step in 0..t {
            for row in gh.chunks_exact_mut(g3) {
                row.copy_from_slice(&self.b_hh.value);
            }
            gemm(b, hd, g3, &h, false, &self.w_hh.value, true, &mut gh, 1.0);
            if let Some(c) = cache.as_deref_mut() {
                c.h_prev.extend_from_slice(&h);
            }
            for bi in 0..b {
                let gi_row = &gi[(bi * t + step) * g3..(bi * t + step + 1) * g3];
                let gh_row = &gh[bi * g3..(bi + 1) * g3];
                for j in 0..hd {
                    let r = sigmoid(gi_row[j] + gh_row[j]);
                    let z = sigmoid(gi_row[hd + j] + gh_row[hd + j]);
                    let ghn = gh_row[2 * hd + j];
                    let n = (gi_row[2 * hd + j] + r * ghn).tanh();
                    let hp = h[bi * hd + j];
                    h[bi * hd + j] = (1.0 - z) * n + z * hp;
                    if let Some(c) = cache.as_deref_mut() {
                        c.r.push(r);
                        c.z.push(z);
                        c.n.push(n);
                        c.ghn.push(ghn);
                    }
                }
                if self.return_sequences {
                    seq[(bi * t + step) * hd..(bi * t + step + 1) * hd]
                        .copy_from_slice(&h[bi * hd..(bi + 1) * hd]);
                }
            }
        }
        if self.return_sequences {
            Tensor::new(vec![b, t, hd], seq)
        } else {
            Tensor::new(vec![b, hd], h)
        }
    }
}

impl Layer for Gru {
    fn kind(&self) -> &'static str {
        "gru"
    }

    fn infer(&self, x: &Tensor) -> Tensor {
        self.run(x, None)
    }

    fn forward(&mut self, x: &Tensor) -> Tensor {
        let mut cache = GruCache {
            input: x.clone(),
            h_prev: Vec::new(),
            r: Vec::new(),
            z: Vec::new(),
            n: Vec::new(),
            ghn: Vec::new(),
        };
        let y = self.run(x, Some(&mut cache));
        self.cache = Some(cache);
        y
    }

    fn backward(&mut self, grad: &Tensor, param_grads: bool) -> Tensor {
        let cache = self.cache.take().expect("backward before forward");
        let x = &cache.input;
        let (b, t, f) = (x.shape[0], x.shape[1], x.shape[2]);
        let hd = self.hidden();
        let g3 = 3 * hd;
        let mut dgi = vec![0.0; b * t * g3];
        let mut dgh = vec![0.0; b * g3];
        let mut dh = vec![0.0; b * hd];
        if !self.return_sequences {
            dh.copy_from_slice(&grad.data);
        }
        let mut dh_next = vec![0.0; b * hd];
        for step in (0..t).rev() {
            if self.return_sequences {
                for bi in 0..b {
                    for j in 0..hd {
                        dh[bi * hd + j] += grad.data[(bi * t + step) * hd + j];
                    }
                }
            }
            let off = step * b * hd;
            let h_prev = &cache.h_prev[off..off + b * hd];
            for bi in 0..b {
                for j in 0..hd {
                    let i = bi * hd + j;
                    let (r, z, n, ghn) = (
                        cache.r[off + i],
                        cache.z[off + i],
                        cache.n[off + i],
                        cache.ghn[off + i],
                    );
                    let d = dh[i];
                    let dn_pre = d * (1.0 - z) * (1.0 - n * n);
                    let dz_pre = d * (h_prev[i] - n) * z * (1.0 - z);
                    let dr_pre = dn_pre * ghn * r * (1.0 - r);
                    let row = (bi * t + step) * g3;
                    dgi[row + j] = dr_pre;
                    dgi[row + hd + j] = dz_pre;
                    dgi[row + 2 * hd + j] = dn_pre;
                    dgh[bi * g3 + j] = dr_pre;
                    dgh[bi * g3 + hd + j] = dz_pre;
                    dgh[bi * g3 + 2 * hd + j] = dn_pre * r;
                    dh_next[i] = d * z;
                }
            }
            if param_grads {
                gemm(
                    g3,
                    b,
                    hd,
                    &dgh,
                    true,
                    h_prev,
                    false,
                    &mut self.w_hh.grad,
                    1.0,
                );
                for row in dgh.chunks_exact(g3) {
                    for (acc, v) in self.b_hh.grad.iter_mut().zip(row) {
                        *acc += v;
                    }
                }
            }
            gemm(
                b,
                g3,
                hd,
                &dgh,
                false,
                &self.w_hh.value,
                false,
                &mut dh_next,
                1.0,
            );
            std::mem::swap(&mut dh, &mut dh_next);
        }
        if param_grads {
            gemm(
                g3,
                b * t,
                f,
                &dgi,
                true,
                &x.data,
                false,
                &mut self.w_ih.grad,
                1.0,
            );
            for row in dgi.chunks_exact(g3) {
                for (acc, v) in self.b_ih.grad.iter_mut().zip(row) {
                    *acc += v;
                }
            }
        }
        let mut dx = vec![0.0; b * t * f];
        gemm(
            b * t,
            g3,
            f,
            &dgi,
            false,
            &self.w_ih.value,
            false,
            &mut dx,
            0.0,
        );
        self.cache = Some(cache);
        Tensor::new(vec![b, t, f], dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.w_ih, &self.w_hh, &self.b_ih, &self.b_hh]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.w_ih,
            &mut self.w_hh,
            &mut self.b_ih,
            &mut self.b_hh,
        ]
    }
}
