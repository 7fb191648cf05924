use rand::Rng;

use super::kernels::{axpy, col2im, im2col, ConvGeom};
use super::{LayerSpec, NnError, Scalar, Tensor};

/// Weights `[rows, cols]` as given by [`LayerSpec::weight_shape`] plus one bias per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub w: Vec<T>,
    pub b: Vec<T>,
}

impl<T: Scalar> Param<T> {
    fn zeros(rows: usize, cols: usize) -> Self {
        Param {
            w: vec![T::zero(); rows * cols],
            b: vec![T::zero(); rows],
        }
    }

    fn cast<U: Scalar>(&self) -> Param<U> {
        let c = |v: &Vec<T>| v.iter().map(|&x| U::from(x).unwrap()).collect();
        Param { w: c(&self.w), b: c(&self.b) }
    }
}

pub(crate) fn conv_geom(spec: &LayerSpec) -> Option<ConvGeom> {
    match *spec {
        LayerSpec::Conv {
            in_channels,
            kernel,
            stride,
            in_height,
            in_width,
            ..
        } => {
            let (out_h, out_w) = spec.conv_out_hw()?;
            Some(ConvGeom {
                channels: in_channels,
                height: in_height,
                width: in_width,
                kernel,
                stride,
                out_h,
                out_w,
            })
        }
        _ => None,
    }
}

/// Layers applied in order to a `[batch, features]` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequential<T> {
    specs: Vec<LayerSpec>,
    params: Vec<Option<Param<T>>>,
}

/// Gradient accumulator with the same layout as the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Grads<T> {
    pub layers: Vec<Option<Param<T>>>,
}

impl<T: Scalar> Grads<T> {
    pub fn zero(&mut self) {
        for p in self.layers.iter_mut().flatten() {
            p.w.iter_mut().chain(p.b.iter_mut()).for_each(|v| *v = T::zero());
        }
    }

    pub fn norm(&self) -> T {
        self.layers
            .iter()
            .flatten()
            .flat_map(|p| p.w.iter().chain(&p.b))
            .fold(T::zero(), |acc, &v| acc + v * v)
            .sqrt()
    }

    pub fn scale(&mut self, k: T) {
        for p in self.layers.iter_mut().flatten() {
            p.w.iter_mut().chain(p.b.iter_mut()).for_each(|v| *v *= k);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .flatten()
            .all(|p| p.w.iter().chain(&p.b).all(|v| v.is_finite()))
    }
}

fn check_chain(specs: &[LayerSpec]) -> Result<(), NnError> {
    if specs.is_empty() {
        return Err(NnError::Shape("empty network".into()));
    }
    for pair in specs.windows(2) {
        if pair[0].output_len() != pair[1].input_len() {
            return Err(NnError::Shape(format!("{} does not feed {}", pair[0], pair[1])));
        }
    }
    Ok(())
}

impl<T: Scalar> Sequential<T> {
    pub fn zeros(specs: Vec<LayerSpec>) -> Result<Self, NnError> {
        check_chain(&specs)?;
        let params = specs
            .iter()
            .map(|s| s.weight_shape().map(|(r, c)| Param::zeros(r, c)))
            .collect();
        Ok(Sequential { specs, params })
    }

    /// Uniform `±1/sqrt(fan_in)` initialisation for weights and biases.
    pub fn init(specs: Vec<LayerSpec>, rng: &mut impl Rng) -> Result<Self, NnError> {
        Self::init_with_gain(specs, rng, 1.0)
    }

    /// Weights uniform in `±gain/sqrt(fan_in)`, biases in `±1/sqrt(fan_in)`.
    pub fn init_with_gain(specs: Vec<LayerSpec>, rng: &mut impl Rng, gain: f64) -> Result<Self, NnError> {
        let mut model = Self::zeros(specs)?;
        for p in model.params.iter_mut().flatten() {
            let fan_in = p.w.len() / p.b.len();
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in p.w.iter_mut() {
                *v = T::from(rng.gen_range(-gain * bound..gain * bound)).unwrap();
            }
            for v in p.b.iter_mut() {
                *v = T::from(rng.gen_range(-bound..bound)).unwrap();
            }
        }
        Ok(model)
    }

    pub fn from_params(specs: Vec<LayerSpec>, params: Vec<Option<Param<T>>>) -> Result<Self, NnError> {
        check_chain(&specs)?;
        if params.len() != specs.len() {
            return Err(NnError::Shape(format!("{} parameter slots for {} layers", params.len(), specs.len())));
        }
        for (s, p) in specs.iter().zip(&params) {
            let ok = match (s.weight_shape(), p) {
                (Some((r, c)), Some(p)) => p.w.len() == r * c && p.b.len() == r,
                (None, None) => true,
                _ => false,
            };
            if !ok {
                return Err(NnError::Shape(format!("parameters do not fit {s}")));
            }
        }
        Ok(Sequential { specs, params })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[Option<Param<T>>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Option<Param<T>>] {
        &mut self.params
    }

    pub fn input_len(&self) -> usize {
        self.specs[0].input_len()
    }

    pub fn output_len(&self) -> usize {
        self.specs.last().unwrap().output_len()
    }

    pub fn param_count(&self) -> usize {
        self.specs.iter().map(|s| s.param_count()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Sequential<U> {
        Sequential {
            specs: self.specs.clone(),
            params: self.params.iter().map(|p| p.as_ref().map(Param::cast)).collect(),
        }
    }

    pub fn zero_grads(&self) -> Grads<T> {
        Grads {
            layers: self
                .specs
                .iter()
                .map(|s| s.weight_shape().map(|(r, c)| Param::zeros(r, c)))
                .collect(),
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(), NnError> {
        if x.shape().len() != 2 || x.row_len() != self.input_len() {
            return Err(NnError::Shape(format!(
                "network expects [batch, {}], got {:?}",
                self.input_len(),
                x.shape()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for (spec, param) in self.specs.iter().zip(&self.params) {
            cur = layer_forward(spec, param.as_ref(), &cur);
        }
        Ok(cur)
    }

    /// Forward pass keeping each layer's input for [`Sequential::backward`].
    pub fn forward_cached(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Vec<Tensor<T>>), NnError> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.specs.len());
        let mut cur = x.clone();
        for (spec, param) in self.specs.iter().zip(&self.params) {
            let next = layer_forward(spec, param.as_ref(), &cur);
            acts.push(cur);
            cur = next;
        }
        Ok((cur, acts))
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the network input when `input_grad` is set.
    pub fn backward(
        &self,
        acts: &[Tensor<T>],
        dy: Tensor<T>,
        grads: &mut Grads<T>,
        input_grad: bool,
    ) -> Result<Option<Tensor<T>>, NnError> {
        if acts.len() != self.specs.len() || dy.row_len() != self.output_len() {
            return Err(NnError::Shape("backward does not match the cached forward pass".into()));
        }
        let mut grad = dy;
        for i in (0..self.specs.len()).rev() {
            let need_dx = input_grad || i > 0;
            grad = layer_backward(
                &self.specs[i],
                self.params[i].as_ref(),
                &acts[i],
                &grad,
                grads.layers[i].as_mut(),
                need_dx,
            );
        }
        Ok(input_grad.then_some(grad))
    }

    pub fn sgd_step(&mut self, grads: &Grads<T>, lr: T) {
        for (p, g) in self.params.iter_mut().zip(&grads.layers) {
            if let (Some(p), Some(g)) = (p, g) {
                axpy(-lr, &g.w, &mut p.w);
                axpy(-lr, &g.b, &mut p.b);
            }
        }
    }
}

fn layer_forward<T: Scalar>(spec: &LayerSpec, param: Option<&Param<T>>, x: &Tensor<T>) -> Tensor<T> {
    let batch = x.rows();
    let out_len = spec.output_len();
    let mut y = vec![T::zero(); batch * out_len];
    match *spec {
        LayerSpec::Relu { .. } => {
            for (o, &v) in y.iter_mut().zip(x.data()) {
                *o = if v > T::zero() { v } else { T::zero() };
            }
        }
        LayerSpec::Linear { inputs, outputs } => {
            let p = param.expect("linear layer without parameters");
            for out in y.chunks_mut(outputs) {
                out.copy_from_slice(&p.b);
            }
            // y = x w^T + b, with w stored one output per row.
            T::gemm(batch, inputs, outputs, T::one(), (x.data(), inputs as isize, 1), (&p.w, 1, inputs as isize), T::one(), &mut y, outputs);
        }
        LayerSpec::Conv { out_channels, .. } => {
            let p = param.expect("conv layer without parameters");
            let g = conv_geom(spec).unwrap();
            let (pos, patch) = (g.positions(), g.patch());
            let mut cols = Vec::with_capacity(pos * patch);
            for (b, out) in y.chunks_mut(out_len).enumerate() {
                im2col(x.row(b), &g, &mut cols);
                for (c, plane) in out.chunks_mut(pos).enumerate() {
                    plane.fill(p.b[c]);
                }
                T::gemm(out_channels, patch, pos, T::one(), (&p.w, patch as isize, 1), (&cols, 1, patch as isize), T::one(), out, pos);
            }
        }
    }
    Tensor::new(y, vec![batch, out_len]).unwrap()
}

fn layer_backward<T: Scalar>(
    spec: &LayerSpec,
    param: Option<&Param<T>>,
    x: &Tensor<T>,
    dy: &Tensor<T>,
    grad: Option<&mut Param<T>>,
    need_dx: bool,
) -> Tensor<T> {
    let batch = x.rows();
    let in_len = spec.input_len();
    let mut dx = vec![T::zero(); if need_dx { batch * in_len } else { 0 }];
    match *spec {
        LayerSpec::Relu { .. } => {
            if need_dx {
                for ((d, &g), &v) in dx.iter_mut().zip(dy.data()).zip(x.data()) {
                    *d = if v > T::zero() { g } else { T::zero() };
                }
            }
        }
        LayerSpec::Linear { inputs, outputs } => {
            let p = param.unwrap();
            let gp = grad.unwrap();
            // dw += dy^T x, db += column sums of dy, dx = dy w.
            T::gemm(outputs, batch, inputs, T::one(), (dy.data(), 1, outputs as isize), (x.data(), inputs as isize, 1), T::one(), &mut gp.w, inputs);
            for b in 0..batch {
                for (gb, &d) in gp.b.iter_mut().zip(dy.row(b)) {
                    *gb += d;
                }
            }
            if need_dx {
                T::gemm(batch, outputs, inputs, T::one(), (dy.data(), outputs as isize, 1), (&p.w, inputs as isize, 1), T::zero(), &mut dx, inputs);
            }
        }
        LayerSpec::Conv { out_channels, .. } => {
            let p = param.unwrap();
            let gp = grad.unwrap();
            let g = conv_geom(spec).unwrap();
            let (pos, patch) = (g.positions(), g.patch());
            let mut cols = Vec::with_capacity(pos * patch);
            let mut dcols = vec![T::zero(); if need_dx { pos * patch } else { 0 }];
            for b in 0..batch {
                im2col(x.row(b), &g, &mut cols);
                let dyr = dy.row(b);
                // dw += dy cols, dcols = dy^T w.
                T::gemm(out_channels, pos, patch, T::one(), (dyr, pos as isize, 1), (&cols, patch as isize, 1), T::one(), &mut gp.w, patch);
                for (gb, plane) in gp.b.iter_mut().zip(dyr.chunks(pos)) {
                    *gb += plane.iter().fold(T::zero(), |s, &d| s + d);
                }
                if need_dx {
                    T::gemm(pos, out_channels, patch, T::one(), (dyr, 1, pos as isize), (&p.w, patch as isize, 1), T::zero(), &mut dcols, patch);
                    col2im(&dcols, &g, &mut dx[b * in_len..(b + 1) * in_len]);
                }
            }
        }
    }
    if need_dx {
        Tensor::new(dx, vec![batch, in_len]).unwrap()
    } else {
        Tensor::zeros(vec![0, in_len])
    }
}

/// Mean over unmasked rows of the squared error summed across outputs, with
/// its gradient. Masked rows contribute nothing to either.
pub fn masked_mse<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>, mask: &[bool]) -> Result<(T, Tensor<T>), NnError> {
    if pred.shape() != target.shape() || mask.len() != pred.rows() {
        return Err(NnError::Shape(format!(
            "prediction {:?}, target {:?}, mask {}",
            pred.shape(),
            target.shape(),
            mask.len()
        )));
    }
    let active = mask.iter().filter(|&&m| m).count();
    let mut dy = Tensor::zeros(pred.shape().to_vec());
    if active == 0 {
        return Ok((T::zero(), dy));
    }
    let scale = T::one() / T::from(active).unwrap();
    let two = T::one() + T::one();
    let w = pred.row_len();
    let mut loss = T::zero();
    for (r, &m) in mask.iter().enumerate() {
        if !m {
            continue;
        }
        let (p, t) = (pred.row(r), target.row(r));
        let d = &mut dy.data_mut()[r * w..(r + 1) * w];
        for j in 0..w {
            let e = p[j] - t[j];
            loss += e * e;
            d[j] = two * e * scale;
        }
    }
    Ok((loss * scale, dy))
}
