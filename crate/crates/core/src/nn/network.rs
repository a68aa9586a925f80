use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::layers::{conv1d_bwd, conv1d_fwd, dense_bwd, dense_fwd, maxpool_bwd, maxpool_fwd, ConvDims, LayerSpec};
use super::recurrent::{
    gru_bwd, gru_fwd, lstm_bwd, lstm_fwd, rnn_bwd, rnn_fwd, RecurrentCache, RecurrentGrads, SeqDims,
};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::substream;

/// Ordered layers applied to a `[input_len × input_channels]` window. The last
/// layer must produce a single value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input_len: usize,
    #[serde(default = "one")]
    pub input_channels: usize,
    pub layers: Vec<LayerSpec>,
    /// Seed of the weight initialization.
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl NetworkSpec {
    /// Shapes at every layer boundary, input first. Fails if any pair does not
    /// compose or the output is not a single value.
    pub fn shapes(&self) -> Result<Vec<(usize, usize)>> {
        if self.input_len == 0 || self.input_channels == 0 {
            return Err(Error::Shape("network input must be non-empty".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::Shape("network has no layers".into()));
        }
        let mut shapes = vec![(self.input_len, self.input_channels)];
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer
                .output_shape(*shapes.last().unwrap())
                .map_err(|e| Error::Shape(format!("layer {i} ({}): {e}", layer.kind())))?;
            shapes.push(next);
        }
        let out = *shapes.last().unwrap();
        if out.0 * out.1 != 1 {
            return Err(Error::Shape(format!("network must end in one value, got [{} × {}]", out.0, out.1)));
        }
        Ok(shapes)
    }

    pub fn param_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let shapes = self.shapes()?;
        Ok(self
            .layers
            .iter()
            .zip(&shapes)
            .flat_map(|(l, &(_, c))| l.param_shapes(c))
            .collect())
    }

    pub fn n_parameters(&self) -> Result<usize> {
        Ok(self.param_shapes()?.iter().map(|s| s.iter().product::<usize>()).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Weights uniform in ±sqrt(6 / (fan_in + fan_out)), biases zero, LSTM
    /// forget-gate bias one.
    #[default]
    GlorotUniform,
    Zeros,
}

#[derive(Debug, Clone, PartialEq)]
struct Plan {
    input: (usize, usize),
    output: (usize, usize),
    first: usize,
}

/// A network description together with its parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    params: Vec<Tensor>,
    plan: Vec<Plan>,
}

pub(crate) enum Cache {
    Conv { x: Vec<f64>, y: Vec<f64> },
    Pool { argmax: Vec<usize> },
    Flatten,
    Dense { x: Vec<f64>, y: Vec<f64> },
    Recurrent(RecurrentCache),
}

fn plan(spec: &NetworkSpec) -> Result<Vec<Plan>> {
    let shapes = spec.shapes()?;
    let mut first = 0;
    Ok(spec
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let p = Plan {
                input: shapes[i],
                output: shapes[i + 1],
                first,
            };
            first += l.param_shapes(shapes[i].1).len();
            p
        })
        .collect())
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        Self::with_init(spec, Init::GlorotUniform)
    }

    pub fn with_init(spec: NetworkSpec, init: Init) -> Result<Self> {
        let plan = plan(&spec)?;
        let mut rng = substream(spec.seed, "init");
        let mut params = Vec::new();
        for (layer, p) in spec.layers.iter().zip(&plan) {
            let c_in = p.input.1;
            for (k, shape) in layer.param_shapes(c_in).iter().enumerate() {
                let mut t = Tensor::zeros(shape);
                let is_bias = shape.len() == 1;
                if init == Init::GlorotUniform && !is_bias {
                    let (fan_in, fan_out) = match *layer {
                        LayerSpec::Conv1d { filters, kernel, .. } => (kernel * c_in, kernel * filters),
                        _ => (shape[1], shape[0]),
                    };
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    t.data.iter_mut().for_each(|v| *v = rng.random_range(-limit..limit));
                }
                if init == Init::GlorotUniform && is_bias && k == 2 {
                    if let LayerSpec::Lstm { units } = *layer {
                        t.data[units..2 * units].iter_mut().for_each(|v| *v = 1.0);
                    }
                }
                params.push(t);
            }
        }
        Ok(Self { spec, params, plan })
    }

    /// Rebuilds a network from stored tensors, checking every shape.
    pub fn from_params(spec: NetworkSpec, params: Vec<Tensor>) -> Result<Self> {
        let plan = plan(&spec)?;
        let want = spec.param_shapes()?;
        if want.len() != params.len() {
            return Err(Error::Shape(format!("spec needs {} tensors, got {}", want.len(), params.len())));
        }
        for (i, (w, p)) in want.iter().zip(&params).enumerate() {
            if *w != p.shape || !p.is_consistent() {
                return Err(Error::Shape(format!("tensor {i}: expected {w:?}, got {:?}", p.shape)));
            }
        }
        Ok(Self { spec, params, plan })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<Tensor> {
        self.params
    }

    pub fn input_size(&self) -> usize {
        self.spec.input_len * self.spec.input_channels
    }

    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| Tensor::zeros(&p.shape)).collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_size() {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {}",
                self.input_size(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Single forward pass.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.forward_cached(x).0[0])
    }

    pub(crate) fn forward_cached(&self, x: &[f64]) -> (Vec<f64>, Vec<Cache>) {
        let mut caches = Vec::with_capacity(self.plan.len());
        let mut cur = x.to_vec();
        for (layer, p) in self.spec.layers.iter().zip(&self.plan) {
            let ps = &self.params[p.first..];
            let (t, c) = p.input;
            let (next, cache) = match *layer {
                LayerSpec::Conv1d { filters, kernel, activation } => {
                    let d = ConvDims { t, c_in: c, filters, kernel };
                    let y = conv1d_fwd(&ps[0].data, &ps[1].data, &cur, &d, activation);
                    (y.clone(), Cache::Conv { x: cur, y })
                }
                LayerSpec::MaxPool { size } => {
                    let (y, argmax) = maxpool_fwd(&cur, t, c, size);
                    (y, Cache::Pool { argmax })
                }
                LayerSpec::Flatten => (cur, Cache::Flatten),
                LayerSpec::Dense { activation, .. } => {
                    let y = dense_fwd(&ps[0].data, &ps[1].data, &cur, c, activation);
                    (y.clone(), Cache::Dense { x: cur, y })
                }
                LayerSpec::Lstm { units } | LayerSpec::Gru { units } | LayerSpec::Rnn { units } => {
                    let s = SeqDims { t, d: c, h: units };
                    let f = match layer {
                        LayerSpec::Lstm { .. } => lstm_fwd,
                        LayerSpec::Gru { .. } => gru_fwd,
                        _ => rnn_fwd,
                    };
                    let rc = f(&ps[0].data, &ps[1].data, &ps[2].data, &cur, s);
                    (rc.h.clone(), Cache::Recurrent(rc))
                }
            };
            caches.push(cache);
            cur = next;
        }
        (cur, caches)
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the input.
    pub(crate) fn backward(&self, caches: &[Cache], dout: &[f64], grads: &mut [Tensor]) -> Vec<f64> {
        let mut d = dout.to_vec();
        for ((layer, p), cache) in self.spec.layers.iter().zip(&self.plan).zip(caches).rev() {
            let ps = &self.params[p.first..];
            let (t, c) = p.input;
            d = match (*layer, cache) {
                (LayerSpec::Conv1d { filters, kernel, activation }, Cache::Conv { x, y }) => {
                    let dims = ConvDims { t, c_in: c, filters, kernel };
                    let (gw, rest) = grads[p.first..].split_at_mut(1);
                    conv1d_bwd(&ps[0].data, x, y, &d, &dims, activation, &mut gw[0].data, &mut rest[0].data)
                }
                (LayerSpec::MaxPool { .. }, Cache::Pool { argmax }) => maxpool_bwd(argmax, &d, t * c),
                (LayerSpec::Flatten, Cache::Flatten) => d,
                (LayerSpec::Dense { activation, .. }, Cache::Dense { x, y }) => {
                    let (gw, rest) = grads[p.first..].split_at_mut(1);
                    dense_bwd(&ps[0].data, x, y, &d, c, activation, &mut gw[0].data, &mut rest[0].data)
                }
                (LayerSpec::Lstm { units } | LayerSpec::Gru { units } | LayerSpec::Rnn { units }, Cache::Recurrent(rc)) => {
                    let s = SeqDims { t, d: c, h: units };
                    let [gv, gw, gb] = &mut grads[p.first..p.first + 3] else {
                        unreachable!()
                    };
                    let g = RecurrentGrads {
                        v: &mut gv.data,
                        w: &mut gw.data,
                        b: &mut gb.data,
                    };
                    let f = match layer {
                        LayerSpec::Lstm { .. } => lstm_bwd,
                        LayerSpec::Gru { .. } => gru_bwd,
                        _ => rnn_bwd,
                    };
                    f(&ps[0].data, &ps[1].data, rc, &d, s, g)
                }
                _ => unreachable!("cache does not match layer"),
            };
        }
        d
    }

    /// Output shape at every layer boundary, input first.
    pub fn boundary_shapes(&self) -> Vec<(usize, usize)> {
        std::iter::once(self.plan[0].input).chain(self.plan.iter().map(|p| p.output)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::Activation;

    fn spec(layers: Vec<LayerSpec>) -> NetworkSpec {
        NetworkSpec { input_len: 10, input_channels: 1, layers, seed: 7 }
    }

    #[test]
    fn shapes_compose_and_fail_at_construction() {
        let good = spec(vec![
            LayerSpec::Conv1d { filters: 4, kernel: 3, activation: Activation::Relu },
            LayerSpec::MaxPool { size: 4 },
            LayerSpec::Lstm { units: 3 },
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 1, activation: Activation::Linear },
        ]);
        let n = Network::new(good).unwrap();
        assert_eq!(n.boundary_shapes(), vec![(10, 1), (10, 4), (3, 4), (3, 3), (1, 9), (1, 1)]);

        let no_flatten = spec(vec![LayerSpec::Lstm { units: 3 }, LayerSpec::Dense { units: 1, activation: Activation::Linear }]);
        assert!(matches!(Network::new(no_flatten), Err(Error::Shape(_))));
        let even = spec(vec![LayerSpec::Conv1d { filters: 1, kernel: 2, activation: Activation::Linear }]);
        assert!(matches!(Network::new(even), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_init_dense_predicts_bias() {
        let s = spec(vec![LayerSpec::Flatten, LayerSpec::Dense { units: 1, activation: Activation::Linear }]);
        let mut n = Network::with_init(s, Init::Zeros).unwrap();
        assert_eq!(n.predict(&[3.0; 10]).unwrap(), 0.0);
        n.params_mut()[1].data[0] = 0.25;
        assert_eq!(n.predict(&[-8.0; 10]).unwrap(), 0.25);
        assert!(matches!(n.predict(&[0.0; 9]), Err(Error::Shape(_))));
    }

    #[test]
    fn init_is_seeded_and_sets_forget_bias() {
        let s = spec(vec![LayerSpec::Lstm { units: 2 }, LayerSpec::Flatten, LayerSpec::Dense { units: 1, activation: Activation::Linear }]);
        let a = Network::new(s.clone()).unwrap();
        assert_eq!(a, Network::new(s.clone()).unwrap());
        assert_eq!(a.params()[2].data, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let limit = (6.0f64 / 9.0).sqrt();
        assert!(a.params()[0].data.iter().all(|v| v.abs() < limit));
        let b = Network::new(NetworkSpec { seed: 8, ..s }).unwrap();
        assert_ne!(a.params()[0], b.params()[0]);
    }

    #[test]
    fn from_params_checks_shapes() {
        let s = spec(vec![LayerSpec::Flatten, LayerSpec::Dense { units: 1, activation: Activation::Linear }]);
        let n = Network::new(s.clone()).unwrap();
        assert_eq!(Network::from_params(s.clone(), n.params().to_vec()).unwrap(), n);
        assert!(Network::from_params(s.clone(), vec![Tensor::zeros(&[1, 9]), Tensor::zeros(&[1])]).is_err());
        assert!(Network::from_params(s, vec![]).is_err());
    }
}
