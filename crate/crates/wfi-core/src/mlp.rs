//! Fully connected networks with tanh hidden layers: the parameter fields
//! and surrogate wavefields of both inversion routes.
//!
//! Three evaluation modes share one parameter store:
//! * scalar / batched forward passes (ndarray matmuls),
//! * reverse-mode parameter gradients for a weighted sum of outputs,
//! * jet propagation (all input derivatives to order ≤ 4 at a point, see
//!   [`crate::jet`]) with its own exact reverse pass — the piece that lets a
//!   loss built from `∂^e y` train the parameters.
//!
//! Checkpoint serialization walks parameters in layer order, each weight
//! matrix row-major (output-neuron major) followed by that layer's biases;
//! [`MlpNetwork::params_flat`] and [`MlpNetwork::set_params`] are the two
//! ends of that contract.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::jet::{
    coeff_count, compose, compose_reverse, factorial_product, softplus_series, tanh_series,
    ComposeTape, Jet, Tps, MAX_ORDER,
};

/// Map applied to the final affine layer's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputTransform {
    /// Raw affine output.
    Identity,
    /// `ln(1 + e^z)` per component; keeps outputs strictly positive, used
    /// for coefficient fields with a physical sign.
    Softplus,
}

impl OutputTransform {
    fn apply(self, z: f64) -> f64 {
        match self {
            OutputTransform::Identity => z,
            OutputTransform::Softplus => {
                (z.max(0.0) + (-z.abs()).exp().ln_1p()).max(f64::MIN_POSITIVE)
            }
        }
    }

    /// d(transform)/dz.
    fn derivative(self, z: f64) -> f64 {
        match self {
            OutputTransform::Identity => 1.0,
            OutputTransform::Softplus => 1.0 / (1.0 + (-z).exp()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Layer {
    /// Shape (outputs, inputs).
    pub(crate) w: Array2<f64>,
    pub(crate) b: Array1<f64>,
}

impl Layer {
    pub fn weights(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn biases(&self) -> &Array1<f64> {
        &self.b
    }
}

/// Feed-forward network: affine → tanh, repeated, with an affine output
/// layer followed by the configured [`OutputTransform`].
#[derive(Debug, Clone)]
pub struct MlpNetwork {
    layers: Vec<Layer>,
    transform: OutputTransform,
}

/// Glorot-uniform weights (`±√(6/(fan_in+fan_out))`), zero biases, drawn
/// layer by layer, row-major, from a ChaCha8 stream — the same seed always
/// builds the same network.
pub fn init_network(shape: &[usize], transform: OutputTransform, seed: u64) -> Result<MlpNetwork> {
    if shape.len() < 2 {
        return Err(Error::arg("network shape needs at least input and output sizes"));
    }
    if shape.iter().any(|&n| n == 0) {
        return Err(Error::arg("network shape entries must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(shape.len() - 1);
    for win in shape.windows(2) {
        let (fan_in, fan_out) = (win[0], win[1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new(-bound, bound);
        let w = Array2::from_shape_fn((fan_out, fan_in), |_| dist.sample(&mut rng));
        layers.push(Layer {
            w,
            b: Array1::zeros(fan_out),
        });
    }
    Ok(MlpNetwork { layers, transform })
}

impl MlpNetwork {
    /// Rebuild a network from its serialized parameter vector.
    pub fn from_params(
        shape: &[usize],
        transform: OutputTransform,
        params: &[f64],
    ) -> Result<MlpNetwork> {
        let mut net = init_network(shape, transform, 0)?;
        net.set_params(params)?;
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn transform(&self) -> OutputTransform {
        self.transform
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.nrows()
    }

    /// Layer widths, inputs first.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.w.nrows()));
        s
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// All parameters in serialization order.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    /// Overwrite all parameters from serialization order.
    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::dim(format!(
                "parameter vector has {} entries, network needs {}",
                params.len(),
                self.param_count()
            )));
        }
        let mut k = 0;
        for l in &mut self.layers {
            for w in l.w.iter_mut() {
                *w = params[k];
                k += 1;
            }
            for b in l.b.iter_mut() {
                *b = params[k];
                k += 1;
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::dim(format!(
                "input has {} entries, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut a: Vec<f64> = x.to_vec();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z: Vec<f64> = layer.b.to_vec();
            for (j, zj) in z.iter_mut().enumerate() {
                for (i, ai) in a.iter().enumerate() {
                    *zj += layer.w[(j, i)] * ai;
                }
            }
            let last = li + 1 == self.layers.len();
            a = if last {
                z.iter().map(|&v| self.transform.apply(v)).collect()
            } else {
                z.iter().map(|&v| v.tanh()).collect()
            };
        }
        Ok(a)
    }

    /// Batched forward pass; rows of `xs` are input points.
    pub fn forward_batch(&self, xs: ArrayView2<f64>) -> Result<Array2<f64>> {
        if xs.ncols() != self.input_dim() {
            return Err(Error::dim(format!(
                "batch has {} columns, network expects {}",
                xs.ncols(),
                self.input_dim()
            )));
        }
        let mut a = xs.to_owned();
        for (li, layer) in self.layers.iter().enumerate() {
            let z = a.dot(&layer.w.t()) + &layer.b;
            let last = li + 1 == self.layers.len();
            a = if last {
                z.mapv(|v| self.transform.apply(v))
            } else {
                z.mapv(f64::tanh)
            };
        }
        Ok(a)
    }

    /// Gradient of `Σ_batch Σ_k upstream[b,k]·y_k(x_b)` with respect to every
    /// weight and bias.
    pub fn backprop_params(
        &self,
        xs: ArrayView2<f64>,
        upstream: ArrayView2<f64>,
    ) -> Result<GradientSet> {
        if upstream.nrows() != xs.nrows() || upstream.ncols() != self.output_dim() {
            return Err(Error::dim(format!(
                "upstream gradient shape ({}, {}) does not match batch ({}, {})",
                upstream.nrows(),
                upstream.ncols(),
                xs.nrows(),
                self.output_dim()
            )));
        }
        // Forward, keeping each layer's input and pre-activation.
        let mut inputs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let mut pre: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let mut a = xs.to_owned();
        for (li, layer) in self.layers.iter().enumerate() {
            inputs.push(a.clone());
            let z = a.dot(&layer.w.t()) + &layer.b;
            let last = li + 1 == self.layers.len();
            a = if last {
                z.mapv(|v| self.transform.apply(v))
            } else {
                z.mapv(f64::tanh)
            };
            pre.push(z);
        }

        let mut grads = GradientSet::zeros_like(self);
        let last = self.layers.len() - 1;
        let mut dz =
            &upstream.to_owned() * &pre[last].mapv(|v| self.transform.derivative(v));
        for li in (0..self.layers.len()).rev() {
            grads.layers[li].0 += &dz.t().dot(&inputs[li]);
            grads.layers[li].1 += &dz.sum_axis(Axis(0));
            if li > 0 {
                let da = dz.dot(&self.layers[li].w);
                // tanh' = 1 − tanh², with tanh(z) recomputed from the stored z.
                dz = da * pre[li - 1].mapv(|v| 1.0 - v.tanh().powi(2));
            }
        }
        Ok(grads)
    }

    fn check_jet_args(&self, x: &[f64], order: u8) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::dim(format!(
                "input has {} entries, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        if order as usize > MAX_ORDER {
            return Err(Error::arg(format!(
                "jet order {order} exceeds supported maximum {MAX_ORDER}"
            )));
        }
        Ok(())
    }

    /// Propagate a jet: the first `min(2, input_dim)` inputs are the
    /// differentiation variables, any further inputs are held constant.
    pub fn forward_jet(&self, x: &[f64], order: u8) -> Result<Jet> {
        self.check_jet_args(x, order)?;
        let (outputs, _) = self.jet_pass::<false>(x, order)?;
        let point = [x[0], if x.len() > 1 { x[1] } else { 0.0 }];
        Ok(Jet::from_tps(order, point, &outputs))
    }

    /// Accumulate into `grads` the parameter gradient of
    /// `Σ_out Σ_e upstream[out·nc + idx(e)] · ∂^e y_out(x)`, where `nc` is
    /// [`coeff_count`] of `order` and `idx` the graded-lex position — i.e.
    /// reverse mode through the whole jet propagation. `upstream` is in
    /// derivative-value space, matching [`Jet::get`].
    pub fn backprop_jet(
        &self,
        x: &[f64],
        order: u8,
        upstream: &[f64],
        grads: &mut GradientSet,
    ) -> Result<()> {
        self.check_jet_args(x, order)?;
        let nc = coeff_count(order as usize);
        if upstream.len() != nc * self.output_dim() {
            return Err(Error::dim(format!(
                "upstream jet gradient has {} entries, expected {}",
                upstream.len(),
                nc * self.output_dim()
            )));
        }
        let (_, tape) = self.jet_pass::<true>(x, order)?;
        let tape = tape.expect("tape recorded");

        // Derivative-value gradients → coefficient-space gradients.
        let n = order as usize;
        let mut ybar: Vec<Tps> = (0..self.output_dim())
            .map(|o| {
                let mut t = Tps::zero(n);
                for e1 in 0..=n {
                    for e2 in 0..=(n - e1) {
                        let idx = crate::jet::coeff_index(e1, e2);
                        t.coeffs_mut()[idx] =
                            upstream[o * nc + idx] * factorial_product(e1 as u8, e2 as u8);
                    }
                }
                t
            })
            .collect();

        // Through the output transform (if any), then layer by layer.
        if let Some(out_tapes) = &tape.output_tapes {
            for (t, tp) in ybar.iter_mut().zip(out_tapes) {
                *t = compose_reverse(tp, t);
            }
        }
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let zbar = &ybar;
            let inputs = &tape.layer_inputs[li];
            let (gw, gb) = &mut grads.layers[li];
            for (j, zb) in zbar.iter().enumerate() {
                gb[j] += zb.coeffs()[0];
                for (i, inp) in inputs.iter().enumerate() {
                    let mut acc = 0.0;
                    for (a, b) in zb.coeffs().iter().zip(inp.coeffs()) {
                        acc += a * b;
                    }
                    gw[(j, i)] += acc;
                }
            }
            if li == 0 {
                break;
            }
            let mut abar: Vec<Tps> = vec![Tps::zero(n); inputs.len()];
            for (j, zb) in zbar.iter().enumerate() {
                for (i, ab) in abar.iter_mut().enumerate() {
                    ab.axpy(layer.w[(j, i)], zb);
                }
            }
            // Through the previous layer's tanh.
            ybar = abar
                .iter()
                .zip(&tape.activation_tapes[li - 1])
                .map(|(ab, tp)| compose_reverse(tp, ab))
                .collect();
        }
        Ok(())
    }

    /// Shared jet forward pass; records tapes when `RECORD` is set.
    fn jet_pass<const RECORD: bool>(
        &self,
        x: &[f64],
        order: u8,
    ) -> Result<(Vec<Tps>, Option<JetTape>)> {
        let n = order as usize;
        let nvars = x.len().min(2);
        let mut a: Vec<Tps> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if i < nvars {
                    Tps::variable(n, i, v)
                } else {
                    Tps::constant(n, v)
                }
            })
            .collect();
        let mut tape = if RECORD {
            Some(JetTape {
                layer_inputs: Vec::with_capacity(self.layers.len()),
                activation_tapes: Vec::with_capacity(self.layers.len().saturating_sub(1)),
                output_tapes: None,
            })
        } else {
            None
        };
        let mut series = [0.0f64; MAX_ORDER + 2];
        for (li, layer) in self.layers.iter().enumerate() {
            if let Some(t) = tape.as_mut() {
                t.layer_inputs.push(a.clone());
            }
            let mut z: Vec<Tps> = (0..layer.w.nrows())
                .map(|j| {
                    let mut acc = Tps::constant(n, layer.b[j]);
                    for (i, ai) in a.iter().enumerate() {
                        acc.axpy(layer.w[(j, i)], ai);
                    }
                    acc
                })
                .collect();
            let last = li + 1 == self.layers.len();
            if !last {
                let mut layer_tapes = Vec::new();
                for zj in z.iter_mut() {
                    tanh_series(zj.coeffs()[0], n + 1, &mut series);
                    if RECORD {
                        let mut tp = empty_tape(n);
                        *zj = compose(zj, &series, Some(&mut tp));
                        layer_tapes.push(tp);
                    } else {
                        *zj = compose(zj, &series, None);
                    }
                }
                if let Some(t) = tape.as_mut() {
                    t.activation_tapes.push(layer_tapes);
                }
            } else if self.transform == OutputTransform::Softplus {
                let mut out_tapes = Vec::new();
                for zj in z.iter_mut() {
                    softplus_series(zj.coeffs()[0], n + 1, &mut series);
                    if RECORD {
                        let mut tp = empty_tape(n);
                        *zj = compose(zj, &series, Some(&mut tp));
                        out_tapes.push(tp);
                    } else {
                        *zj = compose(zj, &series, None);
                    }
                }
                if let Some(t) = tape.as_mut() {
                    t.output_tapes = Some(out_tapes);
                }
            }
            a = z;
        }
        Ok((a, tape))
    }
}

fn empty_tape(order: usize) -> ComposeTape {
    ComposeTape {
        s: Tps::zero(order),
        series: [0.0; MAX_ORDER + 2],
        intermediates: Vec::new(),
    }
}

/// Everything the jet reverse pass needs from the forward pass.
struct JetTape {
    /// Input series of each layer (activations of the previous one).
    layer_inputs: Vec<Vec<Tps>>,
    /// Per hidden layer, per neuron: the tanh composition record.
    activation_tapes: Vec<Vec<ComposeTape>>,
    /// Softplus records for the output layer, when that transform is active.
    output_tapes: Option<Vec<ComposeTape>>,
}

/// Parameter gradients with the same shapes as a network's layers.
#[derive(Debug, Clone)]
pub struct GradientSet {
    layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl GradientSet {
    pub fn zeros_like(net: &MlpNetwork) -> Self {
        GradientSet {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.w.dim()), Array1::zeros(l.b.len())))
                .collect(),
        }
    }

    pub fn add(&mut self, other: &GradientSet) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.0 += &b.0;
            a.1 += &b.1;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (w, b) in &mut self.layers {
            w.mapv_inplace(|v| v * factor);
            b.mapv_inplace(|v| v * factor);
        }
    }

    /// Gradients in the network's parameter serialization order.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|(w, b)| {
                w.iter().map(|v| v * v).sum::<f64>() + b.iter().map(|v| v * v).sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// ADAM optimizer state (β₁ = 0.9, β₂ = 0.999, ε = 1e-8) with bias-corrected
/// moment estimates.
#[derive(Debug, Clone)]
pub struct AdamState {
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        AdamState {
            t: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn for_network(net: &MlpNetwork) -> Self {
        AdamState::new(net.param_count())
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update: `θ ← θ − lr·m̂/(√v̂ + ε)`.
    pub fn step(&mut self, net: &mut MlpNetwork, grads: &GradientSet, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        let mut k = 0;
        for (layer, (gw, gb)) in net.layers.iter_mut().zip(&grads.layers) {
            for (p, g) in layer
                .w
                .iter_mut()
                .chain(layer.b.iter_mut())
                .zip(gw.iter().chain(gb.iter()))
            {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS);
                k += 1;
            }
        }
    }

    /// Update a plain parameter slice in place (for non-network unknowns).
    pub fn step_slice(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), self.m.len());
        debug_assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for ((p, &g), k) in params.iter_mut().zip(grads).zip(0..) {
            let m = &mut self.m[k];
            let v = &mut self.v[k];
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS);
        }
    }
}

/// Tensor-product central finite differences with one Richardson step —
/// the reference oracle the jet implementation is checked against.
pub mod fd_check {
    use crate::signal::MultiIndex;

    /// Central stencil (offsets, weights) for a pure derivative of order m,
    /// second-order accurate.
    fn stencil(m: u8) -> (Vec<i32>, Vec<f64>) {
        match m {
            0 => (vec![0], vec![1.0]),
            1 => (vec![-1, 1], vec![-0.5, 0.5]),
            2 => (vec![-1, 0, 1], vec![1.0, -2.0, 1.0]),
            3 => (vec![-2, -1, 1, 2], vec![-0.5, 1.0, -1.0, 0.5]),
            4 => (vec![-2, -1, 0, 1, 2], vec![1.0, -4.0, 6.0, -4.0, 1.0]),
            _ => unreachable!("orders above 4 are rejected upstream"),
        }
    }

    fn fd_once<F: Fn(f64, f64) -> f64>(f: &F, x: [f64; 2], e: MultiIndex, h: f64) -> f64 {
        let (o1, w1) = stencil(e.e1());
        let (o2, w2) = stencil(e.e2());
        let mut acc = 0.0;
        for (d1, c1) in o1.iter().zip(&w1) {
            for (d2, c2) in o2.iter().zip(&w2) {
                acc += c1 * c2 * f(x[0] + *d1 as f64 * h, x[1] + *d2 as f64 * h);
            }
        }
        acc / h.powi(e.order() as i32)
    }

    /// `∂^e f` at `x` by central differences at steps h, h/2 and h/4 with
    /// two Richardson levels (h² and h⁴ error terms eliminated).
    pub fn richardson<F: Fn(f64, f64) -> f64>(f: F, x: [f64; 2], e: MultiIndex, h: f64) -> f64 {
        let d_h = fd_once(&f, x, e, h);
        let d_h2 = fd_once(&f, x, e, h / 2.0);
        let d_h4 = fd_once(&f, x, e, h / 4.0);
        let r1 = (4.0 * d_h2 - d_h) / 3.0;
        let r2 = (4.0 * d_h4 - d_h2) / 3.0;
        (16.0 * r2 - r1) / 15.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::MultiIndex;
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let a = init_network(&[2, 8, 1], OutputTransform::Identity, 7).unwrap();
        let b = init_network(&[2, 8, 1], OutputTransform::Identity, 7).unwrap();
        let c = init_network(&[2, 8, 1], OutputTransform::Identity, 8).unwrap();
        assert_eq!(a.params_flat(), b.params_flat());
        assert_ne!(a.params_flat(), c.params_flat());
    }

    #[test]
    fn init_matches_glorot_variance() {
        let net = init_network(&[64, 64], OutputTransform::Identity, 3).unwrap();
        let w = &net.layers()[0].w;
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / w.len() as f64;
        let expected = 2.0 / (64.0 + 64.0);
        assert!((var - expected).abs() < 0.2 * expected, "var {var} vs {expected}");
        assert!(net.layers()[0].b.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn forward_and_forward_batch_agree() {
        let net = init_network(&[3, 10, 4, 2], OutputTransform::Softplus, 11).unwrap();
        let xs = array![[0.1, -0.4, 0.9], [1.5, 0.0, -2.0], [0.0, 0.0, 0.0]];
        let batch = net.forward_batch(xs.view()).unwrap();
        for (r, row) in xs.outer_iter().enumerate() {
            let single = net.forward(row.as_slice().unwrap()).unwrap();
            for (c, v) in single.iter().enumerate() {
                assert_relative_eq!(batch[(r, c)], v, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn zero_input_zero_bias_identity_network_outputs_zero() {
        let net = init_network(&[2, 16, 16, 3], OutputTransform::Identity, 5).unwrap();
        let y = net.forward(&[0.0, 0.0]).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn softplus_outputs_stay_positive() {
        let net = init_network(&[3, 8, 4], OutputTransform::Softplus, 19).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1e6..1e6)).collect();
            let y = net.forward(&x).unwrap();
            assert!(y.iter().all(|&v| v > 0.0 && v.is_finite()), "{y:?}");
        }
    }

    #[test]
    fn single_tanh_neuron_jet_matches_closed_form() {
        // Shape [1, 1, 1] with unit output layer: y = tanh(w·x + b).
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let (w, b, x) = (
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.5..1.5),
            );
            let mut net = init_network(&[1, 1, 1], OutputTransform::Identity, 0).unwrap();
            net.set_params(&[w, b, 1.0, 0.0]).unwrap();
            let jet = net.forward_jet(&[x], 3).unwrap();
            let t = (w * x + b).tanh();
            let d1 = w * (1.0 - t * t);
            let d2 = w * w * (-2.0 * t * (1.0 - t * t));
            let d3 = w * w * w * ((1.0 - t * t) * (6.0 * t * t - 2.0));
            assert_relative_eq!(jet.value(0), t, max_relative = 1e-13);
            assert_relative_eq!(
                jet.get(0, MultiIndex::new(1, 0).unwrap()).unwrap(),
                d1,
                max_relative = 1e-12
            );
            assert_relative_eq!(
                jet.get(0, MultiIndex::new(2, 0).unwrap()).unwrap(),
                d2,
                max_relative = 1e-11,
                epsilon = 1e-13
            );
            assert_relative_eq!(
                jet.get(0, MultiIndex::new(3, 0).unwrap()).unwrap(),
                d3,
                max_relative = 1e-10,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn jet_value_entry_equals_forward() {
        for seed in 0..10 {
            let net = init_network(&[2, 12, 7, 2], OutputTransform::Softplus, seed).unwrap();
            let x = [0.3 * seed as f64 - 1.2, 0.7 - 0.1 * seed as f64];
            let jet = net.forward_jet(&x, 4).unwrap();
            let y = net.forward(&x).unwrap();
            for (o, v) in y.iter().enumerate() {
                assert_relative_eq!(jet.value(o), v, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn jet_matches_richardson_finite_differences() {
        let net = init_network(&[2, 20, 40, 20, 2], OutputTransform::Identity, 123).unwrap();
        let x = [0.35, -0.6];
        let jet = net.forward_jet(&x, 4).unwrap();
        for o in 0..2 {
            let f = |a: f64, b: f64| net.forward(&[a, b]).unwrap()[o];
            for e in MultiIndex::up_to_order(4) {
                if e.order() == 0 {
                    continue;
                }
                let h = if e.order() <= 2 { 0.04 } else { 0.12 };
                let fd = fd_check::richardson(f, x, e, h);
                let got = jet.get(o, e).unwrap();
                let (tol, floor) = if e.order() <= 2 {
                    (1e-6, 1e-8)
                } else {
                    (1e-4, 1e-6)
                };
                assert_relative_eq!(got, fd, max_relative = tol, epsilon = floor);
            }
        }
    }

    #[test]
    fn jet_respects_affine_reparameterization() {
        // Folding x = A·z + c into the first layer must transform the jet by
        // the chain rule; compare first and second derivatives directly.
        let net = init_network(&[2, 10, 6, 1], OutputTransform::Identity, 31).unwrap();
        let a = [[0.8, -0.3], [0.25, 1.1]];
        let c = [0.12, -0.4];
        let mut merged = net.clone();
        let w0 = net.layers()[0].w.clone();
        for j in 0..w0.nrows() {
            merged.layers[0].w[(j, 0)] = w0[(j, 0)] * a[0][0] + w0[(j, 1)] * a[1][0];
            merged.layers[0].w[(j, 1)] = w0[(j, 0)] * a[0][1] + w0[(j, 1)] * a[1][1];
            merged.layers[0].b[j] += w0[(j, 0)] * c[0] + w0[(j, 1)] * c[1];
        }
        let z = [0.4, -0.2];
        let x = [
            a[0][0] * z[0] + a[0][1] * z[1] + c[0],
            a[1][0] * z[0] + a[1][1] * z[1] + c[1],
        ];
        let jx = net.forward_jet(&x, 2).unwrap();
        let jz = merged.forward_jet(&z, 2).unwrap();
        let gx = [
            jx.get(0, MultiIndex::new(1, 0).unwrap()).unwrap(),
            jx.get(0, MultiIndex::new(0, 1).unwrap()).unwrap(),
        ];
        for (zi, col) in [(0usize, [a[0][0], a[1][0]]), (1usize, [a[0][1], a[1][1]])] {
            let expect = gx[0] * col[0] + gx[1] * col[1];
            let e = if zi == 0 {
                MultiIndex::new(1, 0).unwrap()
            } else {
                MultiIndex::new(0, 1).unwrap()
            };
            assert_relative_eq!(jz.get(0, e).unwrap(), expect, max_relative = 1e-11);
        }
        let hxx = [
            [
                jx.get(0, MultiIndex::new(2, 0).unwrap()).unwrap(),
                jx.get(0, MultiIndex::new(1, 1).unwrap()).unwrap(),
            ],
            [
                jx.get(0, MultiIndex::new(1, 1).unwrap()).unwrap(),
                jx.get(0, MultiIndex::new(0, 2).unwrap()).unwrap(),
            ],
        ];
        // ∂²y/∂z_i∂z_j = Σ_{kl} A_ki A_lj ∂²y/∂x_k∂x_l.
        let hz = |i: usize, j: usize| -> f64 {
            let mut s = 0.0;
            for k in 0..2 {
                for l in 0..2 {
                    s += a[k][i] * a[l][j] * hxx[k][l];
                }
            }
            s
        };
        assert_relative_eq!(
            jz.get(0, MultiIndex::new(2, 0).unwrap()).unwrap(),
            hz(0, 0),
            max_relative = 1e-10,
            epsilon = 1e-13
        );
        assert_relative_eq!(
            jz.get(0, MultiIndex::new(1, 1).unwrap()).unwrap(),
            hz(0, 1),
            max_relative = 1e-10,
            epsilon = 1e-13
        );
        assert_relative_eq!(
            jz.get(0, MultiIndex::new(0, 2).unwrap()).unwrap(),
            hz(1, 1),
            max_relative = 1e-10,
            epsilon = 1e-13
        );
    }

    #[test]
    fn backprop_params_matches_finite_differences() {
        let net = init_network(&[2, 6, 4, 2], OutputTransform::Softplus, 77).unwrap();
        let xs = array![[0.2, -0.5], [1.1, 0.4], [-0.7, 0.9]];
        let gy = array![[0.3, -1.2], [0.8, 0.1], [-0.5, 0.6]];
        let grads = net.backprop_params(xs.view(), gy.view()).unwrap();
        let flat = grads.flat();

        let loss = |net: &MlpNetwork| -> f64 {
            let y = net.forward_batch(xs.view()).unwrap();
            (&y * &gy).sum()
        };
        let p0 = net.params_flat();
        let h = 1e-6;
        for k in 0..p0.len() {
            let mut plus = p0.clone();
            plus[k] += h;
            let mut minus = p0.clone();
            minus[k] -= h;
            let mut np = net.clone();
            np.set_params(&plus).unwrap();
            let mut nm = net.clone();
            nm.set_params(&minus).unwrap();
            let fd = (loss(&np) - loss(&nm)) / (2.0 * h);
            assert_relative_eq!(flat[k], fd, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn backprop_jet_matches_finite_differences() {
        let net = init_network(&[2, 8, 2], OutputTransform::Softplus, 99).unwrap();
        let x = [0.4, -0.3];
        let order = 2u8;
        let nc = coeff_count(order as usize);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let upstream: Vec<f64> = (0..nc * 2).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mut grads = GradientSet::zeros_like(&net);
        net.backprop_jet(&x, order, &upstream, &mut grads).unwrap();
        let flat = grads.flat();

        let loss = |net: &MlpNetwork| -> f64 {
            let jet = net.forward_jet(&x, order).unwrap();
            let mut acc = 0.0;
            for o in 0..2 {
                for d in 0..=order {
                    for e2 in 0..=d {
                        let e = MultiIndex::new(d - e2, e2).unwrap();
                        let idx = crate::jet::coeff_index(e.e1() as usize, e.e2() as usize);
                        acc += upstream[o * nc + idx] * jet.get(o, e).unwrap();
                    }
                }
            }
            acc
        };
        let p0 = net.params_flat();
        let h = 1e-5;
        for k in 0..p0.len() {
            let mut plus = p0.clone();
            plus[k] += h;
            let mut minus = p0.clone();
            minus[k] -= h;
            let mut np = net.clone();
            np.set_params(&plus).unwrap();
            let mut nm = net.clone();
            nm.set_params(&minus).unwrap();
            let fd = (loss(&np) - loss(&nm)) / (2.0 * h);
            assert_relative_eq!(flat[k], fd, max_relative = 1e-5, epsilon = 1e-8);
        }
    }

    #[test]
    fn adam_zero_gradient_leaves_parameters_unchanged() {
        let mut net = init_network(&[2, 5, 1], OutputTransform::Identity, 1).unwrap();
        let before = net.params_flat();
        let grads = GradientSet::zeros_like(&net);
        let mut adam = AdamState::for_network(&net);
        adam.step(&mut net, &grads, 0.01);
        assert_eq!(net.params_flat(), before);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn adam_constant_gradient_step_magnitude_approaches_lr() {
        let mut net = init_network(&[1, 1], OutputTransform::Identity, 2).unwrap();
        let mut grads = GradientSet::zeros_like(&net);
        grads.layers[0].0[(0, 0)] = 3.7;
        grads.layers[0].1[0] = -0.9;
        let mut adam = AdamState::for_network(&net);
        let lr = 0.005;
        for _ in 0..200 {
            adam.step(&mut net, &grads, lr);
        }
        let prev = net.params_flat();
        adam.step(&mut net, &grads, lr);
        let now = net.params_flat();
        for (a, b) in prev.iter().zip(&now) {
            assert_relative_eq!((a - b).abs(), lr, max_relative = 0.02);
        }
    }

    #[test]
    fn adam_minimizes_quadratic_bowl() {
        // L = ½‖θ − θ*‖² over the raw parameter vector.
        let mut net = init_network(&[2, 3, 1], OutputTransform::Identity, 6).unwrap();
        let target: Vec<f64> = (0..net.param_count()).map(|k| 0.1 * k as f64 - 0.4).collect();
        let mut adam = AdamState::for_network(&net);
        for _ in 0..10_000 {
            let p = net.params_flat();
            let mut grads = GradientSet::zeros_like(&net);
            let gflat: Vec<f64> = p.iter().zip(&target).map(|(a, b)| a - b).collect();
            let mut k = 0;
            for (gw, gb) in &mut grads.layers {
                for g in gw.iter_mut().chain(gb.iter_mut()) {
                    *g = gflat[k];
                    k += 1;
                }
            }
            adam.step(&mut net, &grads, 0.01);
        }
        let p = net.params_flat();
        let err = p
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-3, "distance to optimum {err}");
    }

    #[test]
    fn params_round_trip_through_flat_vector() {
        let net = init_network(&[3, 7, 5, 2], OutputTransform::Softplus, 13).unwrap();
        let rebuilt =
            MlpNetwork::from_params(&[3, 7, 5, 2], OutputTransform::Softplus, &net.params_flat())
                .unwrap();
        assert_eq!(net.params_flat(), rebuilt.params_flat());
        assert_eq!(net.shape(), rebuilt.shape());
    }

    #[test]
    fn shape_validation_rejects_degenerate_networks() {
        assert!(init_network(&[4], OutputTransform::Identity, 0).is_err());
        assert!(init_network(&[4, 0, 2], OutputTransform::Identity, 0).is_err());
        let net = init_network(&[2, 4, 1], OutputTransform::Identity, 0).unwrap();
        assert!(net.forward(&[1.0]).is_err());
        assert!(net.forward_jet(&[1.0, 2.0], 5).is_err());
    }
}
