use rand::Rng;

use super::{gemm, he_bound, Layer, Param, Tensor};

/// Column buffer for an odd `k × k` kernel with same padding, stride 1.
/// Rows are `(c, ky, kx)`, columns are output pixels `(h, w)`.
fn im2col(x: &[f64], channels: usize, h: usize, w: usize, k: usize, cols: &mut [f64]) {
    let pad = k / 2;
    let hw = h * w;
    cols.iter_mut().for_each(|v| *v = 0.0);
    for c in 0..channels {
        let xc = &x[c * hw..(c + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((c * k + ky) * k + kx) * hw..((c * k + ky) * k + kx + 1) * hw];
                for oy in 0..h {
                    let iy = oy as isize + ky as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &xc[iy as usize * w..(iy as usize + 1) * w];
                    let dst = &mut row[oy * w..(oy + 1) * w];
                    let shift = kx as isize - pad as isize;
                    let (lo, hi) = (
                        (-shift).max(0) as usize,
                        (w as isize - shift).min(w as isize).max(0) as usize,
                    );
                    for ox in lo..hi {
                        dst[ox] = src[(ox as isize + shift) as usize];
                    }
                }
            }
        }
    }
}

fn col2im(cols: &[f64], channels: usize, h: usize, w: usize, k: usize, x: &mut [f64]) {
    let pad = k / 2;
    let hw = h * w;
    for c in 0..channels {
        let xc = &mut x[c * hw..(c + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &cols[((c * k + ky) * k + kx) * hw..((c * k + ky) * k + kx + 1) * hw];
                for oy in 0..h {
                    let iy = oy as isize + ky as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &row[oy * w..(oy + 1) * w];
                    let dst = &mut xc[iy as usize * w..(iy as usize + 1) * w];
                    let shift = kx as isize - pad as isize;
                    let (lo, hi) = (
                        (-shift).max(0) as usize,
                        (w as isize - shift).min(w as isize).max(0) as usize,
                    );
                    for ox in lo..hi {
                        dst[(ox as isize + shift) as usize] += src[ox];
                    }
                }
            }
        }
    }
}

/// 2-D convolution over `[B, C, H, W]` with an odd square kernel, stride 1
/// and same padding.
pub struct Conv2d {
    weight: Param,
    bias: Param,
    input: Option<Tensor>,
}

impl Conv2d {
    pub fn new(in_ch: usize, out_ch: usize, kernel: usize, rng: &mut impl Rng) -> Self {
        assert!(kernel % 2 == 1, "kernel must be odd");
        Self {
            weight: Param::uniform(
                "weight",
                vec![out_ch, in_ch, kernel, kernel],
                he_bound(in_ch * kernel * kernel),
                rng,
            ),
            bias: Param::zeros("bias", vec![out_ch]),
            input: None,
        }
    }

    pub fn param_count(in_ch: usize, out_ch: usize, kernel: usize) -> usize {
        out_ch * in_ch * kernel * kernel + out_ch
    }

    fn dims(&self) -> (usize, usize, usize) {
        (
            self.weight.shape[1],
            self.weight.shape[0],
            self.weight.shape[2],
        )
    }
}

impl Layer for Conv2d {
    fn kind(&self) -> &'static str {
        "conv2d"
    }

    fn infer(&self, x: &Tensor) -> Tensor {
        let (cin, cout, k) = self.dims();
        let (b, h, w) = (x.shape[0], x.shape[2], x.shape[3]);
        assert_eq!(x.shape[1], cin);
        let hw = h * w;
        let mut cols = vec![0.0; cin * k * k * hw];
        let mut y = vec![0.0; b * cout * hw];
        for (bi, yb) in y.chunks_exact_mut(cout * hw).enumerate() {
            im2col(x.item(bi), cin, h, w, k, &mut cols);
            for (row, &bias) in yb.chunks_exact_mut(hw).zip(&self.bias.value) {
                row.iter_mut().for_each(|v| *v = bias);
            }
            gemm(
                cout,
                cin * k * k,
                hw,
                &self.weight.value,
                false,
                &cols,
                false,
                yb,
                1.0,
            );
        }
        Tensor::new(vec![b, cout, h, w], y)
    }

    fn forward(&mut self, x: &Tensor) -> Tensor {
        self.input = Some(x.clone());
        self.infer(x)
    }

    fn backward(&mut self, grad: &Tensor, param_grads: bool) -> Tensor {
        let x = self.input.as_ref().expect("backward before forward");
        let (cin, cout, k) = self.dims();
        let (b, h, w) = (x.shape[0], x.shape[2], x.shape[3]);
        let hw = h * w;
        let mut cols = vec![0.0; cin * k * k * hw];
        let mut dcols = vec![0.0; cin * k * k * hw];
        let mut dx = Tensor::zeros(x.shape.clone());
        for bi in 0..b {
            let g = grad.item(bi);
            if param_grads {
                im2col(x.item(bi), cin, h, w, k, &mut cols);
                gemm(
                    cout,
                    hw,
                    cin * k * k,
                    g,
                    false,
                    &cols,
                    true,
                    &mut self.weight.grad,
                    1.0,
                );
                for (db, row) in self.bias.grad.iter_mut().zip(g.chunks_exact(hw)) {
                    *db += row.iter().sum::<f64>();
                }
            }
            gemm(
                cin * k * k,
                cout,
                hw,
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
                h,
                w,
                k,
                &mut dx.data[bi * cin * hw..(bi + 1) * cin * hw],
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

/// Non-overlapping max pooling over `[B, C, H, W]`; trailing rows or
/// columns that do not fill a window are dropped.
pub struct MaxPool2d {
    size: usize,
    input_shape: Option<Vec<usize>>,
    argmax: Vec<usize>,
}

impl MaxPool2d {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            input_shape: None,
            argmax: Vec::new(),
        }
    }

    pub fn output_dims(h: usize, w: usize, size: usize) -> (usize, usize) {
        (h / size, w / size)
    }

    fn pool(&self, x: &Tensor, mut record: Option<&mut Vec<usize>>) -> Tensor {
        let (b, c, h, w) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
        let s = self.size;
        let (oh, ow) = Self::output_dims(h, w, s);
        let mut out = Vec::with_capacity(b * c * oh * ow);
        for plane in 0..b * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = base + oy * s * w + ox * s;
                    for dy in 0..s {
                        for dx in 0..s {
                            let idx = base + (oy * s + dy) * w + ox * s + dx;
                            if x.data[idx] > best {
                                best = x.data[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out.push(best);
                    if let Some(rec) = record.as_deref_mut() {
                        rec.push(best_idx);
                    }
                }
            }
        }
        Tensor::new(vec![b, c, oh, ow], out)
    }
}

impl Layer for MaxPool2d {
    fn kind(&self) -> &'static str {
        "max_pool2d"
    }

    fn infer(&self, x: &Tensor) -> Tensor {
        self.pool(x, None)
    }

    fn forward(&mut self, x: &Tensor) -> Tensor {
        let mut argmax = Vec::new();
        let y = self.pool(x, Some(&mut argmax));
        self.argmax = argmax;
        self.input_shape = Some(x.shape.clone());
        y
    }

    fn backward(&mut self, grad: &Tensor, _: bool) -> Tensor {
        let shape = self.input_shape.clone().expect("backward before forward");
        let mut dx = Tensor::zeros(shape);
        for (&idx, &g) in self.argmax.iter().zip(&grad.data) {
            dx.data[idx] += g;
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn conv2d_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let conv = Conv2d::new(2, 2, 3, &mut rng);
        let (h, w) = (4, 5);
        let x = Tensor::new(
            vec![1, 2, h, w],
            (0..40).map(|i| (i as f64 * 0.21).sin()).collect(),
        );
        let y = conv.infer(&x);
        let wt = &conv.weight.value;
        for co in 0..2 {
            for oy in 0..h {
                for ox in 0..w {
                    let mut acc = 0.0;
                    for ci in 0..2 {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let (iy, ix) =
                                    (oy as isize + ky as isize - 1, ox as isize + kx as isize - 1);
                                if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                                    acc += wt[((co * 2 + ci) * 3 + ky) * 3 + kx]
                                        * x.data[(ci * h + iy as usize) * w + ix as usize];
                                }
                            }
                        }
                    }
                    assert!((y.data[(co * h + oy) * w + ox] - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pool_picks_maxima_and_routes_gradient() {
        let mut pool = MaxPool2d::new(2);
        let x = Tensor::new(
            vec![1, 1, 2, 5],
            vec![1.0, 5.0, 2.0, 0.0, 9.0, 3.0, 4.0, 8.0, 7.0, 9.5],
        );
        let y = pool.forward(&x);
        assert_eq!(y.shape, vec![1, 1, 1, 2]);
        assert_eq!(y.data, vec![5.0, 8.0]);
        let dx = pool.backward(&Tensor::new(vec![1, 1, 1, 2], vec![1.0, 2.0]), true);
        assert_eq!(
            dx.data,
            vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0]
        );
    }
}
