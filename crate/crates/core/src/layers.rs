//! The three equivariant modules of a GET layer (bilevel attention,
//! block-centroid feed-forward, equivariant layer norm) and the stacked
//! encoder.
//!
//! A graph is flattened once into a [`GraphIndex`]: atoms in block order,
//! edges stably sorted by destination block, and for every edge `j → i` the
//! rows `(edge, p)` for atoms `p` of block `i` and the pairs `(edge, p, q)`
//! for atoms `q` of block `j`. Every per-edge matrix of the layer equations
//! is then a slice of one flat tensor, and every sum over neighbors or atoms
//! is a scatter-add in that fixed order.

use std::sync::Arc;

use get_tensor::{Bound, Index, Mlp, ParamId, ParamStore, Tape, Tensor, Var};
use rand::Rng;

use crate::error::{GetError, Result};
use crate::model::ModelConfig;
use crate::repr::ComplexGraph;
use crate::vocab::{BlockType, EdgeKind, Element, PosCode};

/// Precomputed, parameter-independent indexing of one graph.
#[derive(Clone, Debug)]
pub struct GraphIndex {
    pub n_atoms: usize,
    pub n_blocks: usize,
    pub n_edges: usize,
    pub n_rows: usize,
    pub n_pairs: usize,
    pub block_offsets: Vec<usize>,
    pub atom_block: Index,
    pub inv_block_size: Tensor,
    pub atom_element: Index,
    pub atom_pos: Index,
    pub atom_block_type: Index,
    pub coords: Tensor,
    /// Position of each internal edge in the graph's own edge list.
    pub edge_order: Vec<usize>,
    pub edge_src: Vec<usize>,
    pub edge_dst: Vec<usize>,
    pub edge_kind: Index,
    /// Edge segments per destination block, for the neighbor softmax.
    pub edge_offsets: Index,
    /// `1 / (n_i n_j)` per edge, shape `[E, 1]`.
    pub edge_inv_pairs: Tensor,
    pub row_edge: Index,
    pub row_atom: Index,
    /// Pair segments per row, for the atom-level softmax.
    pub pair_offsets: Index,
    pub pair_row: Index,
    pub pair_edge: Index,
    pub pair_p: Index,
    pub pair_q: Index,
}

fn index(v: Vec<usize>) -> Index {
    Arc::from(v)
}

impl GraphIndex {
    pub fn new(g: &ComplexGraph) -> Result<Self> {
        let blocks = g.blocks();
        let mut block_offsets = Vec::with_capacity(blocks.len() + 1);
        block_offsets.push(0);
        let (mut atom_block, mut element, mut pos, mut btype, mut coords) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, b) in blocks.iter().enumerate() {
            for a in &b.atoms {
                atom_block.push(i);
                element.push(a.element.id());
                pos.push(a.pos_code.id());
                btype.push(b.block_type.id());
                coords.extend_from_slice(&a.coord);
            }
            block_offsets.push(atom_block.len());
        }
        let n_atoms = atom_block.len();
        let size = |i: usize| block_offsets[i + 1] - block_offsets[i];

        let mut edge_order: Vec<usize> = (0..g.edges().len()).collect();
        edge_order.sort_by_key(|&e| g.edges()[e].dst);
        let edges: Vec<_> = edge_order.iter().map(|&e| g.edges()[e]).collect();
        let mut edge_offsets = vec![0usize; blocks.len() + 1];
        for e in &edges {
            edge_offsets[e.dst + 1] += 1;
        }
        for i in 0..blocks.len() {
            if edge_offsets[i + 1] == 0 {
                return Err(GetError::Contract(format!("block {i} has no neighbors")));
            }
            edge_offsets[i + 1] += edge_offsets[i];
        }

        let (mut row_edge, mut row_atom) = (Vec::new(), Vec::new());
        let (mut pair_row, mut pair_edge, mut pair_p, mut pair_q) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut pair_offsets = vec![0];
        let mut inv_pairs = Vec::with_capacity(edges.len());
        for (e, edge) in edges.iter().enumerate() {
            let (i, j) = (edge.dst, edge.src);
            inv_pairs.push(1.0 / (size(i) * size(j)) as f64);
            for p in block_offsets[i]..block_offsets[i + 1] {
                let r = row_edge.len();
                row_edge.push(e);
                row_atom.push(p);
                for q in block_offsets[j]..block_offsets[j + 1] {
                    pair_row.push(r);
                    pair_edge.push(e);
                    pair_p.push(p);
                    pair_q.push(q);
                }
                pair_offsets.push(pair_row.len());
            }
        }

        Ok(Self {
            n_atoms,
            n_blocks: blocks.len(),
            n_edges: edges.len(),
            n_rows: row_edge.len(),
            n_pairs: pair_row.len(),
            inv_block_size: Tensor::vector((0..blocks.len()).map(|i| 1.0 / size(i) as f64).collect()),
            block_offsets,
            atom_block: index(atom_block),
            atom_element: index(element),
            atom_pos: index(pos),
            atom_block_type: index(btype),
            coords: Tensor::new(vec![n_atoms, 3], coords)?,
            edge_src: edges.iter().map(|e| e.src).collect(),
            edge_dst: edges.iter().map(|e| e.dst).collect(),
            edge_kind: index(edges.iter().map(|e| e.kind.id()).collect()),
            edge_order,
            edge_offsets: index(edge_offsets),
            edge_inv_pairs: Tensor::new(vec![edges.len(), 1], inv_pairs)?,
            row_edge: index(row_edge),
            row_atom: index(row_atom),
            pair_offsets: index(pair_offsets),
            pair_row: index(pair_row),
            pair_edge: index(pair_edge),
            pair_p: index(pair_p),
            pair_q: index(pair_q),
        })
    }
}

/// Scale `γ`, shift `β` (both `d_h`) and coordinate scale `σ` (one entry).
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNormParams {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub sigma: ParamId,
}

impl LayerNormParams {
    fn init(store: &mut ParamStore, prefix: &str, d_h: usize) -> Self {
        Self {
            gamma: store.insert(format!("{prefix}.gamma"), Tensor::full(&[d_h], 1.0)),
            beta: store.insert(format!("{prefix}.beta"), Tensor::zeros(&[d_h])),
            sigma: store.insert(format!("{prefix}.sigma"), Tensor::full(&[1], 1.0)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GetLayerParams {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    /// Element-wise map applied to atom distances.
    pub sigma_d: Mlp,
    pub phi_e: Mlp,
    pub phi_m: Mlp,
    /// Element-wise map applied to attention logits, weighting coordinates.
    pub phi_xa: Mlp,
    pub phi_r: Mlp,
    pub phi_h: Mlp,
    pub phi_x: Mlp,
    pub ln_att: LayerNormParams,
    pub ln_ffn: LayerNormParams,
    pub d_r: usize,
    pub ln_eps: f64,
}

impl GetLayerParams {
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        cfg: &ModelConfig,
        rng: &mut R,
    ) -> Self {
        let (d_h, d_r, d_e, s) = (cfg.d_h, cfg.d_r, cfg.d_e, cfg.scalar_hidden);
        let act = cfg.activation;
        let mut w = |name: &str| store_matrix(store, &format!("{prefix}.{name}"), d_h, d_r, rng);
        let (w_q, w_k, w_v) = (w("w_q"), w("w_k"), w("w_v"));
        let mlp = |store: &mut ParamStore, rng: &mut R, name: &str, widths: &[usize]| {
            Mlp::init(store, &format!("{prefix}.{name}"), widths, act, rng)
        };
        let sigma_d = mlp(store, rng, "sigma_d", &[1, s, 1]);
        let phi_e = mlp(store, rng, "phi_e", &[d_e, d_e, 1]);
        let phi_m = mlp(store, rng, "phi_m", &[d_r, d_r, d_h]);
        let phi_xa = mlp(store, rng, "phi_xa", &[1, s, 1]);
        let ln_att = LayerNormParams::init(store, &format!("{prefix}.ln_att"), d_h);
        let phi_r = mlp(store, rng, "phi_r", &[1, s, d_h]);
        let phi_h = mlp(store, rng, "phi_h", &[3 * d_h, 3 * d_h, d_h]);
        let phi_x = mlp(store, rng, "phi_x", &[3 * d_h, 3 * d_h, 1]);
        let ln_ffn = LayerNormParams::init(store, &format!("{prefix}.ln_ffn"), d_h);
        Self {
            w_q,
            w_k,
            w_v,
            sigma_d,
            phi_e,
            phi_m,
            phi_xa,
            phi_r,
            phi_h,
            phi_x,
            ln_att,
            ln_ffn,
            d_r,
            ln_eps: cfg.ln_eps,
        }
    }
}

fn store_matrix<R: Rng + ?Sized>(
    store: &mut ParamStore,
    name: &str,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> ParamId {
    store.insert_scaled_normal(name, &[rows, cols], rows, rng)
}

/// Embedding tables plus the layer stack.
#[derive(Clone, Debug, PartialEq)]
pub struct GetStackParams {
    pub atom_table: ParamId,
    pub block_table: ParamId,
    pub pos_table: ParamId,
    pub edge_table: ParamId,
    pub layers: Vec<GetLayerParams>,
}

impl GetStackParams {
    pub fn init<R: Rng + ?Sized>(store: &mut ParamStore, cfg: &ModelConfig, rng: &mut R) -> Self {
        let (d_h, d_e) = (cfg.d_h, cfg.d_e);
        // Unit-variance rows: each atom feature sums three of them.
        let atom_table = store.insert_scaled_normal("embed.atom", &[Element::VOCAB, d_h], 3, rng);
        let block_table =
            store.insert_scaled_normal("embed.block", &[BlockType::VOCAB, d_h], 3, rng);
        let pos_table = store.insert_scaled_normal("embed.pos", &[PosCode::VOCAB, d_h], 3, rng);
        let edge_table = store.insert_scaled_normal("embed.edge", &[EdgeKind::VOCAB, d_e], 1, rng);
        let layers = (0..cfg.n_layers)
            .map(|l| GetLayerParams::init(store, &format!("layer{l}"), cfg, rng))
            .collect();
        Self {
            atom_table,
            block_table,
            pos_table,
            edge_table,
            layers,
        }
    }
}

/// Per-atom features `[N, d_h]` and coordinates `[N, 3]` on a tape.
#[derive(Clone)]
pub struct State<'t> {
    pub h: Var<'t>,
    pub x: Var<'t>,
}

/// Attention weights of one attention pass: `alpha` per pair `(edge, p, q)`
/// and `beta` per edge, both in [`GraphIndex`] order.
#[derive(Clone)]
pub struct AttentionWeights<'t> {
    pub alpha: Var<'t>,
    pub beta: Var<'t>,
}

fn constant<'t>(tape: &'t Tape, t: &Tensor) -> Var<'t> {
    tape.leaf(t.clone())
}

/// Initial features: `atom[a] + block[b] + pos[p]` per atom, plus the edge
/// type embeddings `[E, d_e]`.
pub fn embed<'t>(
    stack: &GetStackParams,
    b: &Bound<'t>,
    idx: &GraphIndex,
) -> Result<(State<'t>, Var<'t>)> {
    let tape = b.var(stack.atom_table).tape();
    let h = b
        .var(stack.atom_table)
        .gather_rows(&idx.atom_element)?
        .add(&b.var(stack.block_table).gather_rows(&idx.atom_block_type)?)?
        .add(&b.var(stack.pos_table).gather_rows(&idx.atom_pos)?)?;
    let x = constant(tape, &idx.coords);
    let edge_feat = b.var(stack.edge_table).gather_rows(&idx.edge_kind)?;
    Ok((State { h, x }, edge_feat))
}

/// Bilevel attention with residual updates of features and coordinates.
pub fn bilevel_attention<'t>(
    p: &GetLayerParams,
    b: &Bound<'t>,
    idx: &GraphIndex,
    edge_feat: &Var<'t>,
    s: &State<'t>,
) -> Result<(State<'t>, AttentionWeights<'t>)> {
    let tape = s.h.tape();
    let q = s.h.matmul(b.var(p.w_q))?;
    let k = s.h.matmul(b.var(p.w_k))?;
    let v = s.h.matmul(b.var(p.w_v))?;

    let dot = q
        .gather_rows(&idx.pair_p)?
        .mul(&k.gather_rows(&idx.pair_q)?)?
        .sum_cols()?
        .scale(1.0 / (p.d_r as f64).sqrt());
    let xrel = s.x.gather_rows(&idx.pair_p)?.sub(&s.x.gather_rows(&idx.pair_q)?)?;
    let dist = xrel.row_norms()?;
    let logits = dot.add(&p.sigma_d.forward_elementwise(b, &dist)?)?;
    let alpha = logits.segment_softmax(&idx.pair_offsets)?;

    let block_logits = logits
        .reshape(&[idx.n_pairs, 1])?
        .scatter_add_rows(&idx.pair_edge, idx.n_edges)?
        .mul(&constant(tape, &idx.edge_inv_pairs))?
        .add(&p.phi_e.forward(b, edge_feat)?)?
        .reshape(&[idx.n_edges])?;
    let beta = block_logits.segment_softmax(&idx.edge_offsets)?;
    let beta_row = beta.gather_rows(&idx.row_edge)?;

    let attended = v
        .gather_rows(&idx.pair_q)?
        .scale_rows(&alpha)?
        .scatter_add_rows(&idx.pair_row, idx.n_rows)?;
    let dh = p
        .phi_m
        .forward(b, &attended)?
        .scale_rows(&beta_row)?
        .scatter_add_rows(&idx.row_atom, idx.n_atoms)?;

    let weight = alpha.mul(&p.phi_xa.forward_elementwise(b, &logits)?)?;
    let dx = xrel
        .scale_rows(&weight)?
        .scatter_add_rows(&idx.pair_row, idx.n_rows)?
        .scale_rows(&beta_row)?
        .scatter_add_rows(&idx.row_atom, idx.n_atoms)?;

    Ok((
        State {
            h: s.h.add(&dh)?,
            x: s.x.add(&dx)?,
        },
        AttentionWeights { alpha, beta },
    ))
}

/// Feed-forward update of every atom against its block centroid.
pub fn equivariant_ffn<'t>(
    p: &GetLayerParams,
    b: &Bound<'t>,
    idx: &GraphIndex,
    s: &State<'t>,
) -> Result<State<'t>> {
    let inv_n = constant(s.h.tape(), &idx.inv_block_size);
    let centroid = |v: &Var<'t>| -> Result<Var<'t>> {
        Ok(v
            .scatter_add_rows(&idx.atom_block, idx.n_blocks)?
            .scale_rows(&inv_n)?
            .gather_rows(&idx.atom_block)?)
    };
    let h_c = centroid(&s.h)?;
    let dx = s.x.sub(&centroid(&s.x)?)?;
    let sq = dx.square().sum_cols()?;
    let ratio = sq.mul(&sq.add_scalar(1.0).recip())?.reshape(&[idx.n_atoms, 1])?;
    let r = p.phi_r.forward(b, &ratio)?;
    let input = Var::concat_cols(&[&s.h, &h_c, &r])?;
    let h = s.h.add(&p.phi_h.forward(b, &input)?)?;
    let coef = p.phi_x.forward(b, &input)?.reshape(&[idx.n_atoms])?;
    let x = s.x.add(&dx.scale_rows(&coef)?)?;
    Ok(State { h, x })
}

/// Per-atom feature normalization and graph-wide coordinate normalization
/// about the centroid of all atoms.
pub fn equivariant_layernorm<'t>(
    p: &LayerNormParams,
    eps: f64,
    b: &Bound<'t>,
    s: &State<'t>,
) -> Result<State<'t>> {
    let (n, d) = s.h.value().dims2("layernorm")?;
    let mean = s.h.sum_cols()?.scale(1.0 / d as f64);
    let centered = s.h.sub(&mean.broadcast_cols(d)?)?;
    let var = centered.square().sum_cols()?.scale(1.0 / d as f64);
    let h = centered
        .scale_rows(&var.add_scalar(eps).sqrt().recip())?
        .mul(b.var(p.gamma))?
        .add(b.var(p.beta))?;

    let e = s.x.sum_rows()?.scale(1.0 / n as f64);
    let cx = s.x.sub(&e)?;
    let var_x = cx.square().sum().scale(1.0 / (3 * n) as f64);
    let x = cx
        .mul(&var_x.add_scalar(eps).sqrt().recip())?
        .mul(b.var(p.sigma))?
        .add(&e)?;
    Ok(State { h, x })
}

/// Attention, norm, feed-forward, norm.
pub fn get_layer<'t>(
    p: &GetLayerParams,
    b: &Bound<'t>,
    idx: &GraphIndex,
    edge_feat: &Var<'t>,
    s: &State<'t>,
) -> Result<(State<'t>, AttentionWeights<'t>)> {
    let (s, w) = bilevel_attention(p, b, idx, edge_feat, s)?;
    let s = equivariant_layernorm(&p.ln_att, p.ln_eps, b, &s)?;
    let s = equivariant_ffn(p, b, idx, &s)?;
    let s = equivariant_layernorm(&p.ln_ffn, p.ln_eps, b, &s)?;
    Ok((s, w))
}

/// Embedding followed by every layer of the stack.
pub fn get_forward<'t>(
    stack: &GetStackParams,
    b: &Bound<'t>,
    idx: &GraphIndex,
) -> Result<State<'t>> {
    let (mut s, edge_feat) = embed(stack, b, idx)?;
    for layer in &stack.layers {
        s = get_layer(layer, b, idx, &edge_feat, &s)?.0;
    }
    Ok(s)
}
