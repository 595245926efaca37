//! Hierarchical sum pooling and the affinity / efficacy heads.

use get_tensor::{Bound, Index, Mlp, ParamStore, Tape, Tensor, Var};
use rand::Rng;

use crate::error::Result;
use crate::model::ModelConfig;

pub const POOL_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PoolingOutput {
    /// `[d_h]`
    pub graph_vec: Tensor,
    /// `[B, d_h]`
    pub block_vecs: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams {
    /// One `d_h → 1` regressor per affinity task.
    pub regressors: Vec<Mlp>,
    /// `2·d_h → 1` logit over `[active ‖ inactive]`.
    pub classifier: Mlp,
}

impl HeadParams {
    pub fn init<R: Rng + ?Sized>(store: &mut ParamStore, cfg: &ModelConfig, rng: &mut R) -> Self {
        let d = cfg.d_h;
        let regressors = (0..cfg.regression_heads.len())
            .map(|t| Mlp::init(store, &format!("head.reg{t}"), &[d, d, 1], cfg.activation, rng))
            .collect();
        let classifier = Mlp::init(store, "head.cls", &[2 * d, 2 * d, 1], cfg.activation, rng);
        Self {
            regressors,
            classifier,
        }
    }
}

/// Sums atom rows per block and normalizes, then sums the block vectors and
/// normalizes again. Returns `([1, d_h], [B, d_h])`.
pub fn hierarchical_pool<'t>(
    h: &Var<'t>,
    atom_block: &Index,
    n_blocks: usize,
) -> Result<(Var<'t>, Var<'t>)> {
    let d = h.shape()[1];
    let blocks = h.scatter_add_rows(atom_block, n_blocks)?.normalize_rows(POOL_EPS)?;
    let graph = blocks.sum_rows()?.reshape(&[1, d])?.normalize_rows(POOL_EPS)?;
    Ok((graph, blocks))
}

/// Pooling of a plain `[N, d_h]` feature matrix.
pub fn pool(h: &Tensor, atom_block: &Index, n_blocks: usize) -> Result<PoolingOutput> {
    let tape = Tape::new();
    let (g, b) = hierarchical_pool(&tape.leaf(h.clone()), atom_block, n_blocks)?;
    Ok(PoolingOutput {
        graph_vec: g.value().reshape(&[h.shape()[1]])?,
        block_vecs: b.value().clone(),
    })
}

/// Affinity prediction, `[1, 1]`.
pub fn affinity<'t>(head: &Mlp, b: &Bound<'t>, graph_vec: &Var<'t>) -> Result<Var<'t>> {
    Ok(head.forward(b, graph_vec)?)
}

/// Efficacy logit, `[1, 1]`; the probability is its logistic.
pub fn efficacy_logit<'t>(
    head: &Mlp,
    b: &Bound<'t>,
    active: &Var<'t>,
    inactive: &Var<'t>,
) -> Result<Var<'t>> {
    Ok(head.forward(b, &Var::concat_cols(&[active, inactive])?)?)
}

pub fn predict_affinity(graph_vec: &Tensor, head: &Mlp, store: &ParamStore) -> Result<f64> {
    let tape = Tape::new();
    let b = store.bind(&tape);
    let d = graph_vec.numel();
    let out = affinity(head, &b, &tape.leaf(graph_vec.reshape(&[1, d])?))?;
    Ok(out.value().data()[0])
}

pub fn predict_efficacy(
    active: &Tensor,
    inactive: &Tensor,
    head: &Mlp,
    store: &ParamStore,
) -> Result<f64> {
    let tape = Tape::new();
    let b = store.bind(&tape);
    let d = active.numel();
    let a = tape.leaf(active.reshape(&[1, d])?);
    let i = tape.leaf(inactive.reshape(&[1, d])?);
    let logit = efficacy_logit(head, &b, &a, &i)?;
    Ok(get_tensor::sigmoid(logit.value().data()[0]))
}
