//! Model configuration, parameter initialization and persistence, and
//! tape-free inference helpers.

use std::path::Path;

use get_tensor::{load_params, save_params, Activation, Bound, ParamStore, Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GetError, Result};
use crate::heads::{self, HeadParams};
use crate::layers::{get_forward, GetStackParams, GraphIndex, State};
use crate::repr::ComplexGraph;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d_h: usize,
    pub d_r: usize,
    pub d_e: usize,
    pub n_layers: usize,
    /// Hidden width of the scalar-to-scalar maps (distance and coordinate
    /// weighting) and of the radial map.
    pub scalar_hidden: usize,
    pub activation: Activation,
    pub ln_eps: f64,
    /// Names of the affinity heads; training tasks pick heads by name.
    pub regression_heads: Vec<String>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_h: 32,
            d_r: 8,
            d_e: 16,
            n_layers: 3,
            scalar_hidden: 1,
            activation: Activation::Silu,
            ln_eps: 1e-10,
            regression_heads: vec!["affinity".into()],
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_h", self.d_h),
            ("d_r", self.d_r),
            ("d_e", self.d_e),
            ("n_layers", self.n_layers),
            ("scalar_hidden", self.scalar_hidden),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(GetError::Config(format!("{name} must be positive")));
        }
        if !(self.ln_eps.is_finite() && self.ln_eps > 0.0) {
            return Err(GetError::Config("ln_eps must be positive".into()));
        }
        if self.regression_heads.is_empty() {
            return Err(GetError::Config("at least one regression head".into()));
        }
        Ok(())
    }

    pub fn head_index(&self, name: &str) -> Option<usize> {
        self.regression_heads.iter().position(|h| h == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub stack: GetStackParams,
    pub heads: HeadParams,
}

/// Encoder output with atoms in block order.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoding {
    /// `[N, d_h]`
    pub h: Tensor,
    /// `[N, 3]`
    pub x: Tensor,
    pub block_offsets: Vec<usize>,
}

impl Model {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let stack = GetStackParams::init(&mut store, &config, &mut rng);
        let heads = HeadParams::init(&mut store, &config, &mut rng);
        Ok(Self {
            config,
            store,
            stack,
            heads,
        })
    }

    /// Wraps loaded parameters; names, order and shapes must match what
    /// `init` produces for `config`.
    pub fn with_params(config: ModelConfig, store: ParamStore) -> Result<Self> {
        let template = Self::init(config, 0)?;
        if template.store.len() != store.len() {
            return Err(GetError::Schema(format!(
                "expected {} parameter tensors, found {}",
                template.store.len(),
                store.len()
            )));
        }
        for ((_, n1, t1), (_, n2, t2)) in template.store.iter().zip(store.iter()) {
            if n1 != n2 || t1.shape() != t2.shape() {
                return Err(GetError::Schema(format!(
                    "parameter {n2} {:?} does not match {n1} {:?}",
                    t2.shape(),
                    t1.shape()
                )));
            }
        }
        if !store.is_finite() {
            return Err(GetError::Schema("non-finite parameter values".into()));
        }
        Ok(Self { store, ..template })
    }

    pub fn meta(&self) -> serde_json::Value {
        serde_json::json!({ "model": self.config })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(save_params(path, &self.store, &self.meta())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (store, meta) = load_params(path)?;
        let config: ModelConfig = serde_json::from_value(
            meta.get("model")
                .cloned()
                .ok_or_else(|| GetError::Schema("parameter file lacks a model config".into()))?,
        )
        .map_err(|e| GetError::Schema(e.to_string()))?;
        Self::with_params(config, store)
    }

    /// Runs the encoder on an already bound parameter set.
    pub fn forward<'t>(&self, b: &Bound<'t>, idx: &GraphIndex) -> Result<State<'t>> {
        get_forward(&self.stack, b, idx)
    }

    /// Pooled graph vector `[1, d_h]` on a tape.
    pub fn graph_vec<'t>(&self, b: &Bound<'t>, idx: &GraphIndex) -> Result<Var<'t>> {
        let s = self.forward(b, idx)?;
        Ok(heads::hierarchical_pool(&s.h, &idx.atom_block, idx.n_blocks)?.0)
    }

    pub fn encode(&self, g: &ComplexGraph) -> Result<Encoding> {
        let idx = GraphIndex::new(g)?;
        let tape = Tape::new();
        let b = self.store.bind(&tape);
        let s = self.forward(&b, &idx)?;
        Ok(Encoding {
            h: s.h.value().clone(),
            x: s.x.value().clone(),
            block_offsets: idx.block_offsets.clone(),
        })
    }

    pub fn predict_affinity(&self, g: &ComplexGraph, head: usize) -> Result<f64> {
        let mlp = self
            .heads
            .regressors
            .get(head)
            .ok_or_else(|| GetError::Config(format!("no regression head {head}")))?;
        let idx = GraphIndex::new(g)?;
        let tape = Tape::new();
        let b = self.store.bind(&tape);
        let v = self.graph_vec(&b, &idx)?;
        Ok(heads::affinity(mlp, &b, &v)?.value().data()[0])
    }

    pub fn predict_efficacy(&self, active: &ComplexGraph, inactive: &ComplexGraph) -> Result<f64> {
        let (ia, ii) = (GraphIndex::new(active)?, GraphIndex::new(inactive)?);
        let tape = Tape::new();
        let b = self.store.bind(&tape);
        let va = self.graph_vec(&b, &ia)?;
        let vi = self.graph_vec(&b, &ii)?;
        let logit = heads::efficacy_logit(&self.heads.classifier, &b, &va, &vi)?;
        Ok(get_tensor::sigmoid(logit.value().data()[0]))
    }
}
