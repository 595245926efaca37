use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TensorError};
use crate::params::{Bound, ParamId, ParamStore};
use crate::tape::Var;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Silu,
    Relu,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

/// Stack of linear layers with an activation between consecutive layers
/// (none after the last).
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    layers: Vec<Linear>,
    activation: Activation,
}

impl Mlp {
    /// Registers weights `{prefix}.{l}.weight` (`w_in × w_out`, scaled normal)
    /// and zero biases `{prefix}.{l}.bias` for each consecutive width pair.
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        widths: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        assert!(widths.len() >= 2, "an MLP needs at least one layer");
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| Linear {
                weight: store.insert_scaled_normal(
                    format!("{prefix}.{l}.weight"),
                    &[w[0], w[1]],
                    w[0],
                    rng,
                ),
                bias: store.insert(format!("{prefix}.{l}.bias"), Tensor::zeros(&[w[1]])),
            })
            .collect();
        Self {
            widths: widths.to_vec(),
            layers,
            activation,
        }
    }

    /// Re-attaches an MLP to parameters already present in `store`.
    pub fn attach(
        store: &ParamStore,
        prefix: &str,
        widths: &[usize],
        activation: Activation,
    ) -> Result<Self> {
        let mut layers = Vec::new();
        for (l, w) in widths.windows(2).enumerate() {
            let find = |suffix: &str, shape: &[usize]| -> Result<ParamId> {
                let name = format!("{prefix}.{l}.{suffix}");
                let id = store
                    .id(&name)
                    .ok_or_else(|| TensorError::Format(format!("missing parameter {name}")))?;
                if store.get(id).shape() != shape {
                    return Err(TensorError::Shape {
                        op: "Mlp::attach",
                        lhs: store.get(id).shape().to_vec(),
                        rhs: shape.to_vec(),
                    });
                }
                Ok(id)
            };
            layers.push(Linear {
                weight: find("weight", &[w[0], w[1]])?,
                bias: find("bias", &[w[1]])?,
            });
        }
        Ok(Self {
            widths: widths.to_vec(),
            layers,
            activation,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn d_in(&self) -> usize {
        self.widths[0]
    }

    pub fn d_out(&self) -> usize {
        *self.widths.last().expect("non-empty widths")
    }

    /// Applies the network to the rows of an `[n, d_in]` tensor.
    pub fn forward<'t>(&self, params: &Bound<'t>, x: &Var<'t>) -> Result<Var<'t>> {
        match x.shape() {
            [_, d] if *d == self.d_in() => {}
            other => {
                return Err(TensorError::Shape {
                    op: "mlp_forward",
                    lhs: other.to_vec(),
                    rhs: vec![self.d_in()],
                })
            }
        }
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            h = h
                .matmul(params.var(layer.weight))?
                .add(params.var(layer.bias))?;
            if l + 1 < self.layers.len() {
                h = match self.activation {
                    Activation::Silu => h.silu(),
                    Activation::Relu => h.relu(),
                    Activation::Identity => h,
                };
            }
        }
        Ok(h)
    }

    /// Applies a `1 → … → 1` network to every entry of `x` independently,
    /// preserving its shape.
    pub fn forward_elementwise<'t>(&self, params: &Bound<'t>, x: &Var<'t>) -> Result<Var<'t>> {
        let shape = x.shape().to_vec();
        let n = x.value().numel();
        self.forward(params, &x.reshape(&[n, 1])?)?.reshape(&shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::Tape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(store: &mut ParamStore, id: ParamId, shape: &[usize], data: &[f64]) {
        store
            .set(id, Tensor::new(shape.to_vec(), data.to_vec()).unwrap())
            .unwrap();
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let mlp = Mlp::init(&mut store, "m", &[3, 3, 2], Activation::Silu, &mut rng);
        for l in mlp.layers() {
            let w = store.get(l.weight).shape().to_vec();
            set(&mut store, l.weight, &w, &vec![0.0; w.iter().product()]);
        }
        let tape = Tape::new();
        let b = store.bind(&tape);
        let x = tape.leaf(Tensor::from_rows(&[[1.0, -2.0, 3.0]]).unwrap());
        let y = mlp.forward(&b, &x).unwrap();
        assert_eq!(y.value().data(), &[0.0, 0.0]);
    }

    #[test]
    fn single_identity_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let mlp = Mlp::init(&mut store, "m", &[2, 2], Activation::Silu, &mut rng);
        set(&mut store, mlp.layers()[0].weight, &[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let tape = Tape::new();
        let b = store.bind(&tape);
        let x = tape.leaf(Tensor::from_rows(&[[0.5, -7.0], [2.0, 3.0]]).unwrap());
        let y = mlp.forward(&b, &x).unwrap();
        assert_eq!(y.value(), x.value());
    }

    #[test]
    fn hand_evaluated_relu_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let mlp = Mlp::init(&mut store, "m", &[1, 1, 1], Activation::Relu, &mut rng);
        set(&mut store, mlp.layers()[0].weight, &[1, 1], &[2.0]);
        set(&mut store, mlp.layers()[0].bias, &[1], &[1.0]);
        set(&mut store, mlp.layers()[1].weight, &[1, 1], &[3.0]);
        set(&mut store, mlp.layers()[1].bias, &[1], &[0.0]);
        let tape = Tape::new();
        let b = store.bind(&tape);
        let x = tape.leaf(Tensor::from_rows(&[[2.0]]).unwrap());
        assert_eq!(mlp.forward(&b, &x).unwrap().value().data(), &[15.0]);
    }

    #[test]
    fn width_mismatch_is_dimension_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        let mlp = Mlp::init(&mut store, "m", &[3, 1], Activation::Silu, &mut rng);
        let tape = Tape::new();
        let b = store.bind(&tape);
        let x = tape.leaf(Tensor::zeros(&[2, 4]));
        assert!(matches!(
            mlp.forward(&b, &x),
            Err(TensorError::Shape { op: "mlp_forward", .. })
        ));
    }

    #[test]
    fn attach_finds_existing_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let a = Mlp::init(&mut store, "phi", &[4, 4, 1], Activation::Silu, &mut rng);
        let b = Mlp::attach(&store, "phi", &[4, 4, 1], Activation::Silu).unwrap();
        assert_eq!(a, b);
        assert!(Mlp::attach(&store, "phi", &[4, 5, 1], Activation::Silu).is_err());
    }
}
