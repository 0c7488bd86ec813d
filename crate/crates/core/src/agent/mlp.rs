//! Dense feed-forward networks with explicit backpropagation.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Identity => {}
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Checkpoint(format!("unknown activation {other:?}"))),
        }
    }
}

/// Rectifier hidden layers followed by a configurable output activation.
/// Weights are stored `(fan_in, fan_out)` so a batch forward pass is `x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    output: Activation,
}

/// Parameter-shaped gradient storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Layer outputs kept from a forward pass; `activations[0]` is the input.
#[derive(Debug, Clone)]
pub struct Trace {
    activations: Vec<Array2<f64>>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("trace holds the input at least")
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
    }
    Ok(())
}

impl Mlp {
    /// Xavier-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: Activation, rng: &mut R) -> Result<Self> {
        check_sizes(sizes)?;
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(Array2::from_shape_simple_fn((fan_in, fan_out), || rng.gen_range(-limit..limit)));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self { sizes: sizes.to_vec(), weights, biases, output })
    }

    pub fn zeros(sizes: &[usize], output: Activation) -> Result<Self> {
        check_sizes(sizes)?;
        Ok(Self {
            sizes: sizes.to_vec(),
            weights: sizes.windows(2).map(|p| Array2::zeros((p[0], p[1]))).collect(),
            biases: sizes.windows(2).map(|p| Array1::zeros(p[1])).collect(),
            output,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }

    /// Parameters in layer order, each layer's weights (row-major) then biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters given, network has {}",
                params.len(),
                self.param_count()
            )));
        }
        let mut rest = params;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let (head, tail) = rest.split_at(w.len());
            w.iter_mut().zip(head).for_each(|(dst, &v)| *dst = v);
            let (head, tail) = tail.split_at(b.len());
            b.iter_mut().zip(head).for_each(|(dst, &v)| *dst = v);
            rest = tail;
        }
        Ok(())
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn layer_activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.weights.len() {
            self.output
        } else {
            Activation::Relu
        }
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut a = x.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            a = a.dot(w) + b;
            self.layer_activation(l).apply(&mut a);
        }
        Ok(a)
    }

    pub fn forward_trace(&self, x: ArrayView2<f64>) -> Result<Trace> {
        self.check_input(&x)?;
        let mut activations = Vec::with_capacity(self.weights.len() + 1);
        activations.push(x.to_owned());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut a = activations[l].dot(w) + b;
            self.layer_activation(l).apply(&mut a);
            activations.push(a);
        }
        Ok(Trace { activations })
    }

    /// Backpropagates `grad_output` (dL/d output) through a recorded pass.
    /// Returns parameter gradients and dL/d input.
    pub fn backward(&self, trace: &Trace, grad_output: ArrayView2<f64>) -> Result<(Gradients, Array2<f64>)> {
        let out = trace.output();
        if grad_output.dim() != out.dim() {
            return Err(Error::Shape(format!(
                "output gradient {:?} does not match output {:?}",
                grad_output.dim(),
                out.dim()
            )));
        }
        let layers = self.weights.len();
        let mut gw = Vec::with_capacity(layers);
        let mut gb = Vec::with_capacity(layers);
        let mut delta = grad_output.to_owned();
        for l in (0..layers).rev() {
            let act = self.layer_activation(l);
            delta.zip_mut_with(&trace.activations[l + 1], |d, &y| *d *= act.derivative_from_output(y));
            gw.push(trace.activations[l].t().dot(&delta));
            gb.push(delta.sum_axis(Axis(0)));
            delta = delta.dot(&self.weights[l].t());
        }
        gw.reverse();
        gb.reverse();
        Ok((Gradients { weights: gw, biases: gb }, delta))
    }

    /// Plain gradient step `theta <- theta - lr * grad`.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        if !grads.all_finite() {
            return Err(Error::Divergence("non-finite gradient".into()));
        }
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            w.scaled_add(-lr, g);
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            b.scaled_add(-lr, g);
        }
        Ok(())
    }

    /// `self <- (1 - tau) * self + tau * live`.
    pub fn polyak_from(&mut self, live: &Mlp, tau: f64) -> Result<()> {
        if self.sizes != live.sizes {
            return Err(Error::Shape(format!(
                "target sizes {:?} differ from live sizes {:?}",
                self.sizes, live.sizes
            )));
        }
        let blend = |t: &mut f64, &l: &f64| *t = (1.0 - tau) * *t + tau * l;
        for (t, l) in self.weights.iter_mut().zip(&live.weights) {
            t.zip_mut_with(l, blend);
        }
        for (t, l) in self.biases.iter_mut().zip(&live.biases) {
            t.zip_mut_with(l, blend);
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Splits the trailing `width` columns off a matrix.
pub(crate) fn trailing_columns(m: &Array2<f64>, width: usize) -> Array2<f64> {
    m.slice(s![.., m.ncols() - width..]).to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[3, 4, 2], Activation::Tanh).unwrap();
        let y = net.forward(array![[1.0, -2.0, 3.0]].view()).unwrap();
        assert_eq!(y, array![[0.0, 0.0]]);
    }

    #[test]
    fn forward_matches_hand_computation() {
        let mut net = Mlp::zeros(&[2, 2, 1], Activation::Identity).unwrap();
        // W1 = [[1, -1], [2, 0]], b1 = [0, 1], W2 = [[1], [3]], b2 = [0.5]
        net.set_flat_params(&[1.0, -1.0, 2.0, 0.0, 0.0, 1.0, 1.0, 3.0, 0.5]).unwrap();
        let y = net.forward(array![[1.0, 1.0]].view()).unwrap();
        // hidden = relu([3, 0]) = [3, 0]; out = 3 + 0 + 0.5
        assert_eq!(y[[0, 0]], 3.5);
    }

    #[test]
    fn shape_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::new(&[3, 4, 2], Activation::Tanh, &mut rng).unwrap();
        assert!(matches!(net.forward(array![[1.0, 2.0]].view()), Err(Error::Shape(_))));
        assert!(Mlp::new(&[3], Activation::Tanh, &mut rng).is_err());
        let other = Mlp::zeros(&[3, 5, 2], Activation::Tanh).unwrap();
        let mut target = net.clone();
        assert!(target.polyak_from(&other, 0.5).is_err());
    }

    #[test]
    fn xavier_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[10, 30, 1], Activation::Identity, &mut rng).unwrap();
        let limit = (6.0f64 / 40.0).sqrt();
        assert!(net.weights[0].iter().all(|w| w.abs() < limit));
        assert!(net.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::new(&[4, 6, 3], Activation::Tanh, &mut rng).unwrap();
        let mut copy = Mlp::zeros(&[4, 6, 3], Activation::Tanh).unwrap();
        copy.set_flat_params(&net.flat_params()).unwrap();
        assert_eq!(copy, net);
        assert_eq!(net.flat_params().len(), net.param_count());
    }

    #[test]
    fn polyak_examples() {
        let live = {
            let mut m = Mlp::zeros(&[2, 2], Activation::Identity).unwrap();
            m.set_flat_params(&[1.0; 6]).unwrap();
            m
        };
        let mut target = Mlp::zeros(&[2, 2], Activation::Identity).unwrap();
        target.polyak_from(&live, 0.05).unwrap();
        assert!(target.flat_params().iter().all(|&v| v == 0.05));
        let before = target.clone();
        target.polyak_from(&live, 0.0).unwrap();
        assert_eq!(target, before);
        target.polyak_from(&live, 1.0).unwrap();
        assert_eq!(target, live);
    }
}
