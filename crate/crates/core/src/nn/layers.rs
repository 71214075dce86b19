use rand::Rng;

use super::{gemm, he_bound, Layer, Param, Tensor};

/// Fully connected layer over the flattened per-item input.
pub struct Dense {
    weight: Param,
    bias: Param,
    input: Option<Tensor>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        Self::with_bound(inputs, outputs, he_bound(inputs), rng)
    }

    pub fn with_bound(inputs: usize, outputs: usize, bound: f64, rng: &mut impl Rng) -> Self {
        Self {
            weight: Param::uniform("weight", vec![outputs, inputs], bound, rng),
            bias: Param::zeros("bias", vec![outputs]),
            input: None,
        }
    }

    pub fn param_count(inputs: usize, outputs: usize) -> usize {
        inputs * outputs + outputs
    }

    fn dims(&self) -> (usize, usize) {
        (self.weight.shape[1], self.weight.shape[0])
    }
}

impl Layer for Dense {
    fn kind(&self) -> &'static str {
        "dense"
    }

    fn infer(&self, x: &Tensor) -> Tensor {
        let (inputs, outputs) = self.dims();
        let b = x.batch();
        assert_eq!(
            x.item_len(),
            inputs,
            "dense expects {inputs} inputs per item"
        );
        let mut y = vec![0.0; b * outputs];
        for row in y.chunks_exact_mut(outputs) {
            row.copy_from_slice(&self.bias.value);
        }
        gemm(
            b,
            inputs,
            outputs,
            &x.data,
            false,
            &self.weight.value,
            true,
            &mut y,
            1.0,
        );
        Tensor::new(vec![b, outputs], y)
    }

    fn forward(&mut self, x: &Tensor) -> Tensor {
        self.input = Some(x.clone());
        self.infer(x)
    }

    fn backward(&mut self, grad: &Tensor, param_grads: bool) -> Tensor {
        let x = self.input.as_ref().expect("backward before forward");
        let (inputs, outputs) = self.dims();
        let b = x.batch();
        if param_grads {
            gemm(
                outputs,
                b,
                inputs,
                &grad.data,
                true,
                &x.data,
                false,
                &mut self.weight.grad,
                1.0,
            );
            for row in grad.data.chunks_exact(outputs) {
                for (g, r) in self.bias.grad.iter_mut().zip(row) {
                    *g += r;
                }
            }
        }
        let mut dx = vec![0.0; b * inputs];
        gemm(
            b,
            outputs,
            inputs,
            &grad.data,
            false,
            &self.weight.value,
            false,
            &mut dx,
            0.0,
        );
        Tensor::new(x.shape.clone(), dx)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[derive(Default)]
pub struct Relu {
    input: Option<Tensor>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for Relu {
    fn kind(&self) -> &'static str {
        "relu"
    }

    fn infer(&self, x: &Tensor) -> Tensor {
        Tensor::new(
            x.shape.clone(),
            x.data.iter().map(|&v| v.max(0.0)).collect(),
        )
    }

    fn forward(&mut self, x: &Tensor) -> Tensor {
        self.input = Some(x.clone());
        self.infer(x)
    }

    fn backward(&mut self, grad: &Tensor, _: bool) -> Tensor {
        let x = self.input.as_ref().expect("backward before forward");
        let data = grad
            .data
            .iter()
            .zip(&x.data)
            .map(|(&g, &v)| if v > 0.0 { g } else { 0.0 })
            .collect();
        Tensor::new(grad.shape.clone(), data)
    }
}

pub struct LeakyRelu {
    slope: f64,
    input: Option<Tensor>,
}

impl LeakyRelu {
    pub fn new(slope: f64) -> Self {
        Self { slope, input: None }
    }
}

impl Layer for LeakyRelu {
    fn kind(&self) -> &'static str {
        "leaky_relu"
    }

    fn infer(&self, x: &Tensor) -> Tensor {
        let a = self.slope;
        Tensor::new(
            x.shape.clone(),
            x.data
                .iter()
                .map(|&v| if v > 0.0 { v } else { a * v })
                .collect(),
        )
    }

    fn forward(&mut self, x: &Tensor) -> Tensor {
        self.input = Some(x.clone());
        self.infer(x)
    }

    fn backward(&mut self, grad: &Tensor, _: bool) -> Tensor {
        let x = self.input.as_ref().expect("backward before forward");
        let a = self.slope;
        let data = grad
            .data
            .iter()
            .zip(&x.data)
            .map(|(&g, &v)| if v > 0.0 { g } else { a * g })
            .collect();
        Tensor::new(grad.shape.clone(), data)
    }
}

#[derive(Default)]
pub struct Tanh {
    output: Option<Tensor>,
}

impl Tanh {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for Tanh {
    fn kind(&self) -> &'static str {
        "tanh"
    }

    fn infer(&self, x: &Tensor) -> Tensor {
        Tensor::new(x.shape.clone(), x.data.iter().map(|v| v.tanh()).collect())
    }

    fn forward(&mut self, x: &Tensor) -> Tensor {
        let y = self.infer(x);
        self.output = Some(y.clone());
        y
    }

    fn backward(&mut self, grad: &Tensor, _: bool) -> Tensor {
        let y = self.output.as_ref().expect("backward before forward");
        let data = grad
            .data
            .iter()
            .zip(&y.data)
            .map(|(&g, &t)| g * (1.0 - t * t))
            .collect();
        Tensor::new(grad.shape.clone(), data)
    }
}

/// Reinterprets each item with a new shape (batch axis untouched).
pub struct Reshape {
    item_shape: Vec<usize>,
    input_shape: Option<Vec<usize>>,
}

impl Reshape {
    pub fn new(item_shape: Vec<usize>) -> Self {
        Self {
            item_shape,
            input_shape: None,
        }
    }
}

impl Layer for Reshape {
    fn kind(&self) -> &'static str {
        "reshape"
    }

    fn infer(&self, x: &Tensor) -> Tensor {
        let mut shape = vec![x.batch()];
        shape.extend_from_slice(&self.item_shape);
        x.clone().reshaped(shape)
    }

    fn forward(&mut self, x: &Tensor) -> Tensor {
        self.input_shape = Some(x.shape.clone());
        self.infer(x)
    }

    fn backward(&mut self, grad: &Tensor, _: bool) -> Tensor {
        grad.clone()
            .reshaped(self.input_shape.clone().expect("backward before forward"))
    }
}

/// Keeps the first `len` steps of a `[B, C, L]` signal.
pub struct Trim {
    len: usize,
    input_shape: Option<Vec<usize>>,
}

impl Trim {
    pub fn new(len: usize) -> Self {
        Self {
            len,
            input_shape: None,
        }
    }
}

impl Layer for Trim {
    fn kind(&self) -> &'static str {
        "trim"
    }

    fn infer(&self, x: &Tensor) -> Tensor {
        let (b, c, l) = (x.shape[0], x.shape[1], x.shape[2]);
        assert!(self.len <= l);
        let mut data = Vec::with_capacity(b * c * self.len);
        for row in x.data.chunks_exact(l) {
            data.extend_from_slice(&row[..self.len]);
        }
        Tensor::new(vec![b, c, self.len], data)
    }

    fn forward(&mut self, x: &Tensor) -> Tensor {
        self.input_shape = Some(x.shape.clone());
        self.infer(x)
    }

    fn backward(&mut self, grad: &Tensor, _: bool) -> Tensor {
        let shape = self.input_shape.clone().expect("backward before forward");
        let l = shape[2];
        let mut dx = Tensor::zeros(shape);
        for (dst, src) in dx
            .data
            .chunks_exact_mut(l)
            .zip(grad.data.chunks_exact(self.len))
        {
            dst[..self.len].copy_from_slice(src);
        }
        dx
    }
}

/// `[B, C, T, F]` feature maps to a `[B, T, C*F]` sequence.
#[derive(Default)]
pub struct ToSequence {
    input_shape: Option<Vec<usize>>,
}

impl ToSequence {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Layer for ToSequence {
    fn kind(&self) -> &'static str {
        "to_sequence"
    }

    fn infer(&self, x: &Tensor) -> Tensor {
        let (b, c, t, f) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
        let mut out = vec![0.0; x.data.len()];
        for bi in 0..b {
            for ci in 0..c {
                for ti in 0..t {
                    let src = ((bi * c + ci) * t + ti) * f;
                    let dst = (bi * t + ti) * c * f + ci * f;
                    out[dst..dst + f].copy_from_slice(&x.data[src..src + f]);
                }
            }
        }
        Tensor::new(vec![b, t, c * f], out)
    }

    fn forward(&mut self, x: &Tensor) -> Tensor {
        self.input_shape = Some(x.shape.clone());
        self.infer(x)
    }

    fn backward(&mut self, grad: &Tensor, _: bool) -> Tensor {
        let shape = self.input_shape.clone().expect("backward before forward");
        let (b, c, t, f) = (shape[0], shape[1], shape[2], shape[3]);
        let mut dx = vec![0.0; grad.data.len()];
        for bi in 0..b {
            for ci in 0..c {
                for ti in 0..t {
                    let dst = ((bi * c + ci) * t + ti) * f;
                    let src = (bi * t + ti) * c * f + ci * f;
                    dx[dst..dst + f].copy_from_slice(&grad.data[src..src + f]);
                }
            }
        }
        Tensor::new(shape, dx)
    }
}
