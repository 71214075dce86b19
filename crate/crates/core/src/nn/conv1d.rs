use rand::Rng;

use super::{gemm, he_bound, Layer, Param, Tensor};

/// Range of output positions `j` whose tap `j*stride + k - pad` lands inside
/// `[0, len_in)`.
fn valid_range(
    k: usize,
    pad: usize,
    stride: usize,
    len_in: usize,
    len_out: usize,
) -> (usize, usize) {
    let lo = if k >= pad {
        0
    } else {
        (pad - k).div_ceil(stride)
    };
    let hi_excl = if len_in + pad <= k {
        0
    } else {
        ((len_in - 1 + pad - k) / stride + 1).min(len_out)
    };
    (lo, hi_excl.max(lo))
}

/// `cols[(c*K + k), j] = x[c, j*stride + k - pad]`, zero outside the signal.
fn im2col(
    x: &[f64],
    channels: usize,
    kernel: usize,
    len_in: usize,
    len_out: usize,
    stride: usize,
    pad: usize,
    cols: &mut [f64],
) {
    cols.iter_mut().for_each(|v| *v = 0.0);
    for c in 0..channels {
        let xc = &x[c * len_in..(c + 1) * len_in];
        for k in 0..kernel {
            let row = &mut cols[(c * kernel + k) * len_out..(c * kernel + k + 1) * len_out];
            let (lo, hi) = valid_range(k, pad, stride, len_in, len_out);
            for (j, slot) in row.iter_mut().enumerate().take(hi).skip(lo) {
                *slot = xc[j * stride + k - pad];
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds columns back onto the signal.
fn col2im(
    cols: &[f64],
    channels: usize,
    kernel: usize,
    len_in: usize,
    len_out: usize,
    stride: usize,
    pad: usize,
    x: &mut [f64],
) {
    for c in 0..channels {
        let xc = &mut x[c * len_in..(c + 1) * len_in];
        for k in 0..kernel {
            let row = &cols[(c * kernel + k) * len_out..(c * kernel + k + 1) * len_out];
            let (lo, hi) = valid_range(k, pad, stride, len_in, len_out);
            for (j, &v) in row.iter().enumerate().take(hi).skip(lo) {
                xc[j * stride + k - pad] += v;
            }
        }
    }
}

/// Strided 1-D convolution with "same" padding: output length is
/// `ceil(L / stride)` and the kernel is centred at `(K-1)/2`.
pub struct Conv1d {
    weight: Param,
    bias: Param,
    stride: usize,
    input: Option<Tensor>,
}

impl Conv1d {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            weight: Param::uniform(
                "weight",
                vec![out_ch, in_ch, kernel],
                he_bound(in_ch * kernel),
                rng,
            ),
            bias: Param::zeros("bias", vec![out_ch]),
            stride,
            input: None,
        }
    }

    pub fn param_count(in_ch: usize, out_ch: usize, kernel: usize) -> usize {
        out_ch * in_ch * kernel + out_ch
    }

    pub fn output_len(len: usize, stride: usize) -> usize {
        len.div_ceil(stride)
    }

    fn dims(&self) -> (usize, usize, usize) {
        (
            self.weight.shape[1],
            self.weight.shape[0],
            self.weight.shape[2],
        )
    }
}

impl Layer for Conv1d {
    fn kind(&self) -> &'static str {
        "conv1d"
    }

    fn infer(&self, x: &Tensor) -> Tensor {
        let (cin, cout, k) = self.dims();
        let (b, l) = (x.shape[0], x.shape[2]);
        assert_eq!(x.shape[1], cin);
        let lout = Self::output_len(l, self.stride);
        let pad = (k - 1) / 2;
        let mut cols = vec![0.0; cin * k * lout];
        let mut y = vec![0.0; b * cout * lout];
        for (bi, yb) in y.chunks_exact_mut(cout * lout).enumerate() {
            im2col(x.item(bi), cin, k, l, lout, self.stride, pad, &mut cols);
            for (row, &bias) in yb.chunks_exact_mut(lout).zip(&self.bias.value) {
                row.iter_mut().for_each(|v| *v = bias);
            }
            gemm(
                cout,
                cin * k,
                lout,
                &self.weight.value,
                false,
                &cols,
                false,
                yb,
                1.0,
            );
        }
        Tensor::new(vec![b, cout, lout], y)
    }

    fn forward(&mut self, x: &Tensor) -> Tensor {
        self.input = Some(x.clone());
        self.infer(x)
    }

    fn backward(&mut self, grad: &Tensor, param_grads: bool) -> Tensor {
        let x = self.input.as_ref().expect("backward before forward");
        let (cin, cout, k) = self.dims();
        let (b, l) = (x.shape[0], x.shape[2]);
        let lout = grad.shape[2];
        let pad = (k - 1) / 2;
        let mut cols = vec![0.0; cin * k * lout];
        let mut dcols = vec![0.0; cin * k * lout];
        let mut dx = Tensor::zeros(x.shape.clone());
        for bi in 0..b {
            let g = grad.item(bi);
            if param_grads {
                im2col(x.item(bi), cin, k, l, lout, self.stride, pad, &mut cols);
                gemm(
                    cout,
                    lout,
                    cin * k,
                    g,
                    false,
                    &cols,
                    true,
                    &mut self.weight.grad,
                    1.0,
                );
                for (db, row) in self.bias.grad.iter_mut().zip(g.chunks_exact(lout)) {
                    *db += row.iter().sum::<f64>();
                }
            }
            gemm(
                cin * k,
                cout,
                lout,
                &self.weight.value,
                true,
                g,
                false,
                &mut dcols,
                0.0,
            );
            col2im(
                &dcols,
                cin,
                k,
                l,
                lout,
                self.stride,
                pad,
                &mut dx.data[bi * cin * l..(bi + 1) * cin * l],
            );
        }
        dx
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Transposed 1-D convolution, the adjoint of [`Conv1d`]'s sampling
/// pattern: an input of length `L` becomes `L * stride` samples.
pub struct ConvTranspose1d {
    /// `[in_ch, out_ch, kernel]`.
    weight: Param,
    bias: Param,
    stride: usize,
    input: Option<Tensor>,
}

impl ConvTranspose1d {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        rng: &mut impl Rng,
    ) -> Self {
        // each output sample sees about in_ch * kernel / stride inputs
        let fan_in = (in_ch * kernel / stride).max(1);
        Self {
            weight: Param::uniform("weight", vec![in_ch, out_ch, kernel], he_bound(fan_in), rng),
            bias: Param::zeros("bias", vec![out_ch]),
            stride,
            input: None,
        }
    }

    pub fn param_count(in_ch: usize, out_ch: usize, kernel: usize) -> usize {
        in_ch * out_ch * kernel + out_ch
    }

    fn dims(&self) -> (usize, usize, usize) {
        (
            self.weight.shape[0],
            self.weight.shape[1],
            self.weight.shape[2],
        )
    }
}

impl Layer for ConvTranspose1d {
    fn kind(&self) -> &'static str {
        "conv_transpose1d"
    }

    fn infer(&self, x: &Tensor) -> Tensor {
        let (cin, cout, k) = self.dims();
        let (b, l) = (x.shape[0], x.shape[2]);
        assert_eq!(x.shape[1], cin);
        let lo = l * self.stride;
        let pad = (k - 1) / 2;
        let mut cols = vec![0.0; cout * k * l];
        let mut y = vec![0.0; b * cout * lo];
        for (bi, yb) in y.chunks_exact_mut(cout * lo).enumerate() {
            gemm(
                cout * k,
                cin,
                l,
                &self.weight.value,
                true,
                x.item(bi),
                false,
                &mut cols,
                0.0,
            );
            for (row, &bias) in yb.chunks_exact_mut(lo).zip(&self.bias.value) {
                row.iter_mut().for_each(|v| *v = bias);
            }
            col2im(&cols, cout, k, lo, l, self.stride, pad, yb);
        }
        Tensor::new(vec![b, cout, lo], y)
    }

    fn forward(&mut self, x: &Tensor) -> Tensor {
        self.input = Some(x.clone());
        self.infer(x)
    }

    fn backward(&mut self, grad: &Tensor, param_grads: bool) -> Tensor {
        let x = self.input.as_ref().expect("backward before forward");
        let (cin, cout, k) = self.dims();
        let (b, l) = (x.shape[0], x.shape[2]);
        let lo = grad.shape[2];
        let pad = (k - 1) / 2;
        let mut dcols = vec![0.0; cout * k * l];
        let mut dx = Tensor::zeros(x.shape.clone());
        for bi in 0..b {
            let g = grad.item(bi);
            im2col(g, cout, k, lo, l, self.stride, pad, &mut dcols);
            if param_grads {
                gemm(
                    cin,
                    l,
                    cout * k,
                    x.item(bi),
                    false,
                    &dcols,
                    true,
                    &mut self.weight.grad,
                    1.0,
                );
                for (db, row) in self.bias.grad.iter_mut().zip(g.chunks_exact(lo)) {
                    *db += row.iter().sum::<f64>();
                }
            }
            gemm(
                cin,
                cout * k,
                l,
                &self.weight.value,
                false,
                &dcols,
                false,
                &mut dx.data[bi * cin * l..(bi + 1) * cin * l],
                0.0,
            );
        }
        dx
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn conv_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conv = Conv1d::new(2, 3, 5, 2, &mut rng);
        let x = Tensor::new(
            vec![1, 2, 9],
            (0..18).map(|i| (i as f64 * 0.3).sin()).collect(),
        );
        let y = conv.infer(&x);
        assert_eq!(y.shape, vec![1, 3, 5]);
        let w = &conv.weight.value;
        for co in 0..3 {
            for j in 0..5 {
                let mut acc = 0.0;
                for ci in 0..2 {
                    for k in 0..5 {
                        let pos = (j * 2 + k) as isize - 2;
                        if (0..9).contains(&pos) {
                            acc += w[(co * 2 + ci) * 5 + k] * x.data[ci * 9 + pos as usize];
                        }
                    }
                }
                assert!((y.data[co * 5 + j] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transpose_is_adjoint_of_conv() {
        // <conv(x), y> == <x, convT(y)> when both share the kernel
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let conv = Conv1d::new(2, 3, 7, 4, &mut rng);
        let mut tconv = ConvTranspose1d::new(3, 2, 7, 4, &mut rng);
        // conv weight [out=3, in=2, k]; tconv weight [in=3, out=2, k]: same layout
        tconv.weight.value.copy_from_slice(&conv.weight.value);
        let x = Tensor::new(
            vec![1, 2, 16],
            (0..32).map(|i| (i as f64 * 0.7).cos()).collect(),
        );
        let y = Tensor::new(
            vec![1, 3, 4],
            (0..12).map(|i| (i as f64 * 0.4).sin()).collect(),
        );
        let cx = conv.infer(&x);
        let ty = tconv.infer(&y);
        assert_eq!(ty.shape, vec![1, 2, 16]);
        let lhs: f64 = cx.data.iter().zip(&y.data).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data.iter().zip(&ty.data).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} {rhs}");
    }

    #[test]
    fn same_padding_lengths() {
        assert_eq!(Conv1d::output_len(32000, 2), 16000);
        assert_eq!(Conv1d::output_len(250, 4), 63);
        assert_eq!(Conv1d::output_len(63, 4), 16);
    }
}
