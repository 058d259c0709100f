//! Layer vocabulary, shape inference and per-sample forward/backward passes.
//!
//! Parameters of all layers live in one flat vector; each parametrized layer
//! owns `weights` followed by `bias` starting at its `offset`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Valid (unpadded) 2-D convolution.
    Conv {
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
    },
    Relu,
    /// Non-overlapping max pooling; trailing rows/columns that do not fill a
    /// window are dropped.
    MaxPool { kernel: usize },
    Flatten,
    Dense { out_features: usize },
    /// Marks the output as probabilities. Only allowed last.
    Softmax,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Map {
        channels: usize,
        height: usize,
        width: usize,
    },
    Flat(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Map {
                channels,
                height,
                width,
            } => channels * height * width,
            Shape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Layer {
    Conv {
        in_channels: usize,
        in_height: usize,
        in_width: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        out_height: usize,
        out_width: usize,
        offset: usize,
    },
    Relu,
    MaxPool {
        channels: usize,
        in_height: usize,
        in_width: usize,
        kernel: usize,
        out_height: usize,
        out_width: usize,
    },
    Flatten,
    Dense {
        inputs: usize,
        outputs: usize,
        offset: usize,
    },
}

fn shape_error(layer: usize, msg: String) -> Error {
    Error::ShapeMismatch {
        expected: format!("layer {layer} to accept its input"),
        got: msg,
    }
}

/// Resolves layer shapes; returns the layers, the output shape and the
/// number of parameters.
pub(crate) fn resolve(specs: &[LayerSpec], input: Shape) -> Result<(Vec<Layer>, Shape, usize)> {
    let mut shape = input;
    let mut offset = 0;
    let mut layers = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let layer = match (*spec, shape) {
            (LayerSpec::Softmax, _) => {
                if i + 1 != specs.len() {
                    return Err(shape_error(i, "softmax must be the last layer".into()));
                }
                continue;
            }
            (
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                    stride,
                },
                Shape::Map {
                    channels,
                    height,
                    width,
                },
            ) => {
                if out_channels == 0 || kernel == 0 || stride == 0 || kernel > height || kernel > width {
                    return Err(shape_error(
                        i,
                        format!("conv {kernel}x{kernel}/{stride} with {out_channels} filters on {height}x{width}"),
                    ));
                }
                let layer = Layer::Conv {
                    in_channels: channels,
                    in_height: height,
                    in_width: width,
                    out_channels,
                    kernel,
                    stride,
                    out_height: (height - kernel) / stride + 1,
                    out_width: (width - kernel) / stride + 1,
                    offset,
                };
                offset += out_channels * channels * kernel * kernel + out_channels;
                layer
            }
            (LayerSpec::Relu, _) => Layer::Relu,
            (
                LayerSpec::MaxPool { kernel },
                Shape::Map {
                    channels,
                    height,
                    width,
                },
            ) => {
                if kernel == 0 || kernel > height || kernel > width {
                    return Err(shape_error(i, format!("max pool {kernel} on {height}x{width}")));
                }
                Layer::MaxPool {
                    channels,
                    in_height: height,
                    in_width: width,
                    kernel,
                    out_height: height / kernel,
                    out_width: width / kernel,
                }
            }
            (LayerSpec::Flatten, _) => Layer::Flatten,
            (LayerSpec::Dense { out_features }, Shape::Flat(inputs)) => {
                if out_features == 0 {
                    return Err(shape_error(i, "dense layer with zero outputs".into()));
                }
                let layer = Layer::Dense {
                    inputs,
                    outputs: out_features,
                    offset,
                };
                offset += out_features * inputs + out_features;
                layer
            }
            (spec, shape) => return Err(shape_error(i, format!("{spec:?} cannot follow shape {shape:?}"))),
        };
        shape = layer.output_shape(shape);
        layers.push(layer);
    }
    Ok((layers, shape, offset))
}

impl Layer {
    fn output_shape(&self, input: Shape) -> Shape {
        match *self {
            Layer::Conv {
                out_channels,
                out_height,
                out_width,
                ..
            } => Shape::Map {
                channels: out_channels,
                height: out_height,
                width: out_width,
            },
            Layer::MaxPool {
                channels,
                out_height,
                out_width,
                ..
            } => Shape::Map {
                channels,
                height: out_height,
                width: out_width,
            },
            Layer::Relu => input,
            Layer::Flatten => Shape::Flat(input.len()),
            Layer::Dense { outputs, .. } => Shape::Flat(outputs),
        }
    }

    /// `(offset, fan_in, weight_count, bias_count)` for parametrized layers.
    pub(crate) fn param_block(&self) -> Option<(usize, usize, usize, usize)> {
        match *self {
            Layer::Conv {
                in_channels,
                out_channels,
                kernel,
                offset,
                ..
            } => {
                let fan_in = in_channels * kernel * kernel;
                Some((offset, fan_in, out_channels * fan_in, out_channels))
            }
            Layer::Dense {
                inputs,
                outputs,
                offset,
            } => Some((offset, inputs, inputs * outputs, outputs)),
            _ => None,
        }
    }

    pub(crate) fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        match *self {
            Layer::Conv {
                in_channels,
                in_height,
                in_width,
                out_channels,
                kernel,
                stride,
                out_height,
                out_width,
                offset,
            } => {
                let geom = ConvGeom {
                    in_channels,
                    in_height,
                    in_width,
                    out_channels,
                    kernel,
                    stride,
                    out_height,
                    out_width,
                };
                let n_w = out_channels * in_channels * kernel * kernel;
                let weights = &params[offset..offset + n_w];
                let bias = &params[offset + n_w..offset + n_w + out_channels];
                if is_sparse(x) {
                    geom.forward_sparse(weights, bias, x)
                } else {
                    geom.forward_dense(weights, bias, x)
                }
            }
            Layer::Relu => x.iter().map(|&v| v.max(0.0)).collect(),
            Layer::MaxPool {
                channels,
                in_height,
                in_width,
                kernel,
                out_height,
                out_width,
            } => {
                let mut out = Vec::with_capacity(channels * out_height * out_width);
                for c in 0..channels {
                    for oy in 0..out_height {
                        for ox in 0..out_width {
                            let at = pool_argmax(x, c, oy, ox, in_height, in_width, kernel);
                            out.push(x[at]);
                        }
                    }
                }
                out
            }
            Layer::Flatten => x.to_vec(),
            Layer::Dense {
                inputs,
                outputs,
                offset,
            } => {
                let weights = &params[offset..offset + inputs * outputs];
                let bias = &params[offset + inputs * outputs..offset + inputs * outputs + outputs];
                weights
                    .chunks_exact(inputs)
                    .zip(bias)
                    .map(|(row, &b)| b + dot(row, x))
                    .collect()
            }
        }
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the input when `want_input_grad` is set.
    pub(crate) fn backward(
        &self,
        params: &[f64],
        x: &[f64],
        y: &[f64],
        dy: &[f64],
        grad: &mut [f64],
        want_input_grad: bool,
    ) -> Vec<f64> {
        match *self {
            Layer::Conv {
                in_channels,
                in_height,
                in_width,
                out_channels,
                kernel,
                stride,
                out_height,
                out_width,
                offset,
            } => {
                let geom = ConvGeom {
                    in_channels,
                    in_height,
                    in_width,
                    out_channels,
                    kernel,
                    stride,
                    out_height,
                    out_width,
                };
                let n_w = out_channels * in_channels * kernel * kernel;
                let weights = &params[offset..offset + n_w];
                let (grad_w, grad_b) = grad[offset..offset + n_w + out_channels].split_at_mut(n_w);
                if is_sparse(dy) {
                    geom.backward_sparse(weights, x, dy, grad_w, grad_b, want_input_grad)
                } else {
                    geom.backward_dense(weights, x, dy, grad_w, grad_b, want_input_grad)
                }
            }
            Layer::Relu => dy
                .iter()
                .zip(y)
                .map(|(&d, &out)| if out > 0.0 { d } else { 0.0 })
                .collect(),
            Layer::MaxPool {
                channels,
                in_height,
                in_width,
                kernel,
                out_height,
                out_width,
            } => {
                let mut dx = vec![0.0; x.len()];
                let mut k = 0;
                for c in 0..channels {
                    for oy in 0..out_height {
                        for ox in 0..out_width {
                            dx[pool_argmax(x, c, oy, ox, in_height, in_width, kernel)] += dy[k];
                            k += 1;
                        }
                    }
                }
                dx
            }
            Layer::Flatten => dy.to_vec(),
            Layer::Dense {
                inputs,
                outputs,
                offset,
            } => {
                let n_w = inputs * outputs;
                let weights = &params[offset..offset + n_w];
                let (grad_w, grad_b) = grad[offset..offset + n_w + outputs].split_at_mut(n_w);
                let mut dx = if want_input_grad { vec![0.0; inputs] } else { Vec::new() };
                for (j, &d) in dy.iter().enumerate() {
                    grad_b[j] += d;
                    if d == 0.0 {
                        continue;
                    }
                    for (g, &v) in grad_w[j * inputs..(j + 1) * inputs].iter_mut().zip(x) {
                        *g += d * v;
                    }
                    if want_input_grad {
                        for (g, &w) in dx.iter_mut().zip(&weights[j * inputs..(j + 1) * inputs]) {
                            *g += w * d;
                        }
                    }
                }
                dx
            }
        }
    }
}

/// Encoded images and post-pool gradients are mostly zeros; below this
/// density the convolution walks only the nonzero entries.
const SPARSE_DENSITY: f64 = 0.05;

/// Dot product with independent partial sums so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut lanes = [0.0; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            lanes[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    lanes.iter().sum::<f64>() + tail
}

fn is_sparse(values: &[f64]) -> bool {
    let nonzero = values.iter().filter(|&&v| v != 0.0).count();
    (nonzero as f64) < SPARSE_DENSITY * values.len() as f64
}

#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    in_channels: usize,
    in_height: usize,
    in_width: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    out_height: usize,
    out_width: usize,
}

impl ConvGeom {
    fn weight_index(&self, o: usize, c: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_channels + c) * self.kernel + ky) * self.kernel + kx
    }

    /// Output coordinate fed by input coordinate `i` through kernel tap `k`.
    fn out_coord(&self, i: usize, k: usize, limit: usize) -> Option<usize> {
        let shifted = i.checked_sub(k)?;
        (shifted % self.stride == 0 && shifted / self.stride < limit).then(|| shifted / self.stride)
    }

    /// Input patches laid out as `[in_channels·k·k, out_height·out_width]`.
    fn im2col(&self, x: &[f64]) -> Vec<f64> {
        let plane = self.out_height * self.out_width;
        let in_plane = self.in_height * self.in_width;
        let mut cols = vec![0.0; self.in_channels * self.kernel * self.kernel * plane];
        let mut rows = cols.chunks_exact_mut(plane);
        for c in 0..self.in_channels {
            let input = &x[c * in_plane..(c + 1) * in_plane];
            for ky in 0..self.kernel {
                for kx in 0..self.kernel {
                    let dst = rows.next().expect("patch row");
                    for (oy, dst_row) in dst.chunks_exact_mut(self.out_width).enumerate() {
                        let start = (oy * self.stride + ky) * self.in_width + kx;
                        if self.stride == 1 {
                            dst_row.copy_from_slice(&input[start..start + self.out_width]);
                        } else {
                            for (ox, d) in dst_row.iter_mut().enumerate() {
                                *d = input[start + ox * self.stride];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn forward_dense(&self, weights: &[f64], bias: &[f64], x: &[f64]) -> Vec<f64> {
        let plane = self.out_height * self.out_width;
        let taps = self.in_channels * self.kernel * self.kernel;
        let cols = self.im2col(x);
        let mut out = vec![0.0; self.out_channels * plane];
        for ((out_o, w_o), &b) in out.chunks_exact_mut(plane).zip(weights.chunks_exact(taps)).zip(bias) {
            out_o.fill(b);
            for (&w, col) in w_o.iter().zip(cols.chunks_exact(plane)) {
                if w == 0.0 {
                    continue;
                }
                for (acc, &v) in out_o.iter_mut().zip(col) {
                    *acc += w * v;
                }
            }
        }
        out
    }

    fn forward_sparse(&self, weights: &[f64], bias: &[f64], x: &[f64]) -> Vec<f64> {
        let plane = self.out_height * self.out_width;
        let in_plane = self.in_height * self.in_width;
        let mut out = vec![0.0; self.out_channels * plane];
        for (o, out_o) in out.chunks_exact_mut(plane).enumerate() {
            out_o.fill(bias[o]);
        }
        for (idx, &v) in x.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let (c, iy, ix) = (idx / in_plane, (idx % in_plane) / self.in_width, idx % self.in_width);
            for ky in 0..self.kernel {
                let Some(oy) = self.out_coord(iy, ky, self.out_height) else { continue };
                for kx in 0..self.kernel {
                    let Some(ox) = self.out_coord(ix, kx, self.out_width) else { continue };
                    let at = oy * self.out_width + ox;
                    for o in 0..self.out_channels {
                        out[o * plane + at] += weights[self.weight_index(o, c, ky, kx)] * v;
                    }
                }
            }
        }
        out
    }

    fn backward_dense(
        &self,
        weights: &[f64],
        x: &[f64],
        dy: &[f64],
        grad_w: &mut [f64],
        grad_b: &mut [f64],
        want_input_grad: bool,
    ) -> Vec<f64> {
        let plane = self.out_height * self.out_width;
        let taps = self.in_channels * self.kernel * self.kernel;
        let cols = self.im2col(x);
        let mut dcols = if want_input_grad { vec![0.0; cols.len()] } else { Vec::new() };
        for (o, dy_o) in dy.chunks_exact(plane).enumerate() {
            grad_b[o] += dy_o.iter().sum::<f64>();
            let gw_o = &mut grad_w[o * taps..(o + 1) * taps];
            for (g, col) in gw_o.iter_mut().zip(cols.chunks_exact(plane)) {
                *g += dot(dy_o, col);
            }
            if want_input_grad {
                let w_o = &weights[o * taps..(o + 1) * taps];
                for (&w, dcol) in w_o.iter().zip(dcols.chunks_exact_mut(plane)) {
                    for (g, &d) in dcol.iter_mut().zip(dy_o) {
                        *g += w * d;
                    }
                }
            }
        }
        if want_input_grad {
            self.col2im(&dcols, x.len())
        } else {
            Vec::new()
        }
    }

    /// Adjoint of [`ConvGeom::im2col`]: sums patch entries back onto the input grid.
    fn col2im(&self, cols: &[f64], len: usize) -> Vec<f64> {
        let plane = self.out_height * self.out_width;
        let in_plane = self.in_height * self.in_width;
        let mut dx = vec![0.0; len];
        let mut rows = cols.chunks_exact(plane);
        for c in 0..self.in_channels {
            let dx_c = &mut dx[c * in_plane..(c + 1) * in_plane];
            for ky in 0..self.kernel {
                for kx in 0..self.kernel {
                    let src = rows.next().expect("patch row");
                    for (oy, src_row) in src.chunks_exact(self.out_width).enumerate() {
                        let start = (oy * self.stride + ky) * self.in_width + kx;
                        for (ox, &v) in src_row.iter().enumerate() {
                            dx_c[start + ox * self.stride] += v;
                        }
                    }
                }
            }
        }
        dx
    }

    fn backward_sparse(
        &self,
        weights: &[f64],
        x: &[f64],
        dy: &[f64],
        grad_w: &mut [f64],
        grad_b: &mut [f64],
        want_input_grad: bool,
    ) -> Vec<f64> {
        let plane = self.out_height * self.out_width;
        let in_plane = self.in_height * self.in_width;
        let mut dx = if want_input_grad { vec![0.0; x.len()] } else { Vec::new() };
        for (idx, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let (o, oy, ox) = (idx / plane, (idx % plane) / self.out_width, idx % self.out_width);
            grad_b[o] += d;
            for c in 0..self.in_channels {
                for ky in 0..self.kernel {
                    let row = c * in_plane + (oy * self.stride + ky) * self.in_width + ox * self.stride;
                    let wi = self.weight_index(o, c, ky, 0);
                    for kx in 0..self.kernel {
                        grad_w[wi + kx] += d * x[row + kx];
                    }
                    if want_input_grad {
                        for kx in 0..self.kernel {
                            dx[row + kx] += weights[wi + kx] * d;
                        }
                    }
                }
            }
        }
        dx
    }
}

/// Flat index of the maximum in a pooling window; the first maximum wins ties.
fn pool_argmax(
    x: &[f64],
    c: usize,
    oy: usize,
    ox: usize,
    height: usize,
    width: usize,
    kernel: usize,
) -> usize {
    let base = c * height * width;
    let mut best = base + oy * kernel * width + ox * kernel;
    for ky in 0..kernel {
        for kx in 0..kernel {
            let at = base + (oy * kernel + ky) * width + ox * kernel + kx;
            if x[at] > x[best] {
                best = at;
            }
        }
    }
    best
}
