//! Unified bilevel representation: a complex is a graph whose nodes are
//! blocks (residues, or single atoms of small molecules), each carrying an
//! unordered set of atoms.
//!
//! Edges come from a k-nearest-neighbor search under the block distance
//! (minimum inter-atom distance). Every block also gets a self edge. Edges
//! are directed: edge `(src, dst)` means `src` is one of the neighbors that
//! `dst` attends to.

use std::collections::{BTreeSet, HashSet};

use get_tensor::Tensor;

use crate::error::{GetError, Result};
use crate::vocab::{BlockType, EdgeKind, Element, PosCode};

pub const DEFAULT_K: usize = 9;
pub const DEFAULT_INTERFACE_CUTOFF: f64 = 6.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub element: Element,
    pub pos_code: PosCode,
    pub coord: [f64; 3],
}

impl Atom {
    pub fn new(element: Element, pos_code: PosCode, coord: [f64; 3]) -> Self {
        Self {
            element,
            pos_code,
            coord,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub block_type: BlockType,
    pub atoms: Vec<Atom>,
    pub molecule_id: u32,
}

impl Block {
    pub fn new(block_type: BlockType, atoms: Vec<Atom>, molecule_id: u32) -> Self {
        Self {
            block_type,
            atoms,
            molecule_id,
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn centroid(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for a in &self.atoms {
            for d in 0..3 {
                c[d] += a.coord[d];
            }
        }
        let n = self.atoms.len().max(1) as f64;
        c.map(|v| v / n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

/// Per-block embedded features `H_i` (`n_i × d_h`) and coordinates `X_i`
/// (`n_i × 3`).
#[derive(Clone, Debug, PartialEq)]
pub struct BlockFeatures {
    pub h: Tensor,
    pub x: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexGraph {
    blocks: Vec<Block>,
    edges: Vec<Edge>,
    k: usize,
    embedded: Option<Vec<BlockFeatures>>,
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Minimum distance over all inter-block atom pairs.
pub fn block_distance(a: &Block, b: &Block) -> f64 {
    let mut best = f64::INFINITY;
    for p in &a.atoms {
        for q in &b.atoms {
            best = best.min(distance(&p.coord, &q.coord));
        }
    }
    best
}

fn edge_kind(blocks: &[Block], src: usize, dst: usize) -> EdgeKind {
    if src == dst {
        EdgeKind::SelfLoop
    } else if blocks[src].molecule_id == blocks[dst].molecule_id {
        EdgeKind::Intra
    } else {
        EdgeKind::Inter
    }
}

fn distance_matrix(blocks: &[Block]) -> Vec<Vec<f64>> {
    let b = blocks.len();
    let mut d = vec![vec![0.0; b]; b];
    for i in 0..b {
        for j in i + 1..b {
            let v = block_distance(&blocks[i], &blocks[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// For every block `i`: its self edge, then edges from its `k` nearest other
/// blocks in order of increasing block distance, ties going to the lower
/// block index. Edges are grouped by `dst` in ascending order.
pub fn build_knn_graph(blocks: &[Block], k: usize) -> Vec<Edge> {
    let d = distance_matrix(blocks);
    let mut edges = Vec::with_capacity(blocks.len() * (k + 1));
    for (i, row) in d.iter().enumerate() {
        edges.push(Edge {
            src: i,
            dst: i,
            kind: EdgeKind::SelfLoop,
        });
        let mut others: Vec<usize> = (0..blocks.len()).filter(|&j| j != i).collect();
        let by_distance =
            |a: &usize, b: &usize| row[*a].total_cmp(&row[*b]).then_with(|| a.cmp(b));
        if others.len() > k {
            others.select_nth_unstable_by(k, by_distance);
            others.truncate(k);
        }
        others.sort_by(by_distance);
        edges.extend(others.into_iter().map(|j| Edge {
            src: j,
            dst: i,
            kind: edge_kind(blocks, j, i),
        }));
    }
    edges
}

/// Indices of blocks within `cutoff` of some block of a different molecule.
pub fn interface_survivors(blocks: &[Block], cutoff: f64) -> Vec<usize> {
    (0..blocks.len())
        .filter(|&i| {
            blocks.iter().any(|other| {
                other.molecule_id != blocks[i].molecule_id
                    && block_distance(&blocks[i], other) <= cutoff
            })
        })
        .collect()
}

impl ComplexGraph {
    /// Validates the blocks and connects them by kNN with self edges.
    pub fn new(blocks: Vec<Block>, k: usize) -> Result<Self> {
        validate_blocks(&blocks)?;
        if k == 0 {
            return Err(GetError::Config("k must be at least 1".into()));
        }
        let edges = build_knn_graph(&blocks, k);
        Ok(Self {
            blocks,
            edges,
            k,
            embedded: None,
        })
    }

    /// Uses a given edge list after checking the graph invariants.
    pub fn with_edges(blocks: Vec<Block>, edges: Vec<Edge>, k: usize) -> Result<Self> {
        validate_blocks(&blocks)?;
        validate_edges(&blocks, &edges)?;
        Ok(Self {
            blocks,
            edges,
            k,
            embedded: None,
        })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn embedded(&self) -> Option<&[BlockFeatures]> {
        self.embedded.as_deref()
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_atoms(&self) -> usize {
        self.blocks.iter().map(Block::len).sum()
    }

    pub fn molecule_ids(&self) -> BTreeSet<u32> {
        self.blocks.iter().map(|b| b.molecule_id).collect()
    }

    /// Neighbors `j` of block `i` (sources of edges into `i`), self included.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.dst == i)
    }

    /// Applies `f` to every coordinate. Edges are kept, which is exact for
    /// distance-preserving maps.
    pub fn map_coords(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut g = self.clone();
        for b in &mut g.blocks {
            for a in &mut b.atoms {
                a.coord = f(a.coord);
            }
        }
        g.embedded = None;
        g
    }

    /// Reorders atoms inside each block: new atom `p` of block `i` is old
    /// atom `perms[i][p]`. Block distances, and therefore edges, are unchanged.
    pub fn permute_atoms(&self, perms: &[Vec<usize>]) -> Result<Self> {
        if perms.len() != self.blocks.len() {
            return Err(GetError::Contract("one permutation per block".into()));
        }
        let mut g = self.clone();
        for (b, perm) in g.blocks.iter_mut().zip(perms) {
            let mut seen = vec![false; b.atoms.len()];
            if perm.len() != b.atoms.len()
                || perm.iter().any(|&p| p >= seen.len() || std::mem::replace(&mut seen[p], true))
            {
                return Err(GetError::Contract("not a permutation".into()));
            }
            b.atoms = perm.iter().map(|&p| b.atoms[p].clone()).collect();
        }
        g.embedded = None;
        Ok(g)
    }

    /// Same blocks, edges rebuilt with a different `k`.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        let mut g = Self::new(self.blocks.clone(), k)?;
        g.embedded = self.embedded.clone();
        Ok(g)
    }
}

fn validate_blocks(blocks: &[Block]) -> Result<()> {
    if blocks.is_empty() {
        return Err(GetError::EmptyGraph);
    }
    for (i, b) in blocks.iter().enumerate() {
        if b.atoms.is_empty() {
            return Err(GetError::EmptyBlock(i));
        }
        for (p, a) in b.atoms.iter().enumerate() {
            if !a.coord.iter().all(|c| c.is_finite()) {
                return Err(GetError::NonFiniteCoordinate { block: i, atom: p });
            }
        }
    }
    Ok(())
}

fn validate_edges(blocks: &[Block], edges: &[Edge]) -> Result<()> {
    let n = blocks.len();
    let mut seen = HashSet::with_capacity(edges.len());
    let mut self_count = vec![0usize; n];
    for e in edges {
        if e.src >= n || e.dst >= n {
            return Err(GetError::InvalidGraph(format!(
                "edge ({}, {}) references a missing block",
                e.src, e.dst
            )));
        }
        if !seen.insert((e.src, e.dst)) {
            return Err(GetError::InvalidGraph(format!(
                "duplicate edge ({}, {})",
                e.src, e.dst
            )));
        }
        if e.kind != edge_kind(blocks, e.src, e.dst) {
            return Err(GetError::InvalidGraph(format!(
                "edge ({}, {}) has type {}",
                e.src,
                e.dst,
                e.kind.name()
            )));
        }
        if e.src == e.dst {
            self_count[e.src] += 1;
        }
    }
    if let Some(i) = self_count.iter().position(|&c| c != 1) {
        return Err(GetError::InvalidGraph(format!("block {i} lacks a self edge")));
    }
    Ok(())
}

/// Trainable lookup tables for atom, block, position and edge types.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTables {
    pub atom: Tensor,
    pub block: Tensor,
    pub pos: Tensor,
    pub edge: Tensor,
}

impl EmbeddingTables {
    pub fn d_h(&self) -> usize {
        self.atom.shape()[1]
    }

    pub fn d_e(&self) -> usize {
        self.edge.shape()[1]
    }

    pub fn zeros(d_h: usize, d_e: usize) -> Self {
        Self {
            atom: Tensor::zeros(&[Element::VOCAB, d_h]),
            block: Tensor::zeros(&[BlockType::VOCAB, d_h]),
            pos: Tensor::zeros(&[PosCode::VOCAB, d_h]),
            edge: Tensor::zeros(&[EdgeKind::VOCAB, d_e]),
        }
    }
}

fn table_row(table: &Tensor, id: usize) -> &[f64] {
    // Ids outside the table fall back to the [UNK] row.
    let id = if id < table.shape()[0] { id } else { 0 };
    table.row(id)
}

/// `H_i[p] = atom[a_i[p]] + block[b_i] + pos[p_i[p]]`; `X_i` from atom
/// coordinates.
pub fn embed_graph(g: &ComplexGraph, tables: &EmbeddingTables) -> Result<ComplexGraph> {
    let d_h = tables.d_h();
    if tables.block.shape()[1] != d_h || tables.pos.shape()[1] != d_h {
        return Err(GetError::Config("embedding tables disagree on d_h".into()));
    }
    let embedded = g
        .blocks
        .iter()
        .map(|b| {
            let block_row = table_row(&tables.block, b.block_type.id());
            let mut h = Vec::with_capacity(b.len() * d_h);
            let mut x = Vec::with_capacity(b.len() * 3);
            for a in &b.atoms {
                let ar = table_row(&tables.atom, a.element.id());
                let pr = table_row(&tables.pos, a.pos_code.id());
                h.extend((0..d_h).map(|c| ar[c] + block_row[c] + pr[c]));
                x.extend_from_slice(&a.coord);
            }
            Ok(BlockFeatures {
                h: Tensor::new(vec![b.len(), d_h], h)?,
                x: Tensor::new(vec![b.len(), 3], x)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = g.clone();
    out.embedded = Some(embedded);
    Ok(out)
}

/// Keeps blocks within `cutoff` Å of another molecule and rebuilds edges.
pub fn extract_interface(g: &ComplexGraph, cutoff: f64) -> Result<ComplexGraph> {
    let molecules = g.molecule_ids().len();
    if molecules < 2 {
        return Err(GetError::TooFewMolecules(molecules));
    }
    let keep = interface_survivors(&g.blocks, cutoff);
    if keep.is_empty() {
        return Err(GetError::EmptyInterface { cutoff });
    }
    let blocks = keep.iter().map(|&i| g.blocks[i].clone()).collect();
    let mut out = ComplexGraph::new(blocks, g.k)?;
    out.embedded = g
        .embedded
        .as_ref()
        .map(|e| keep.iter().map(|&i| e[i].clone()).collect());
    Ok(out)
}

/// Every atom becomes its own block, keeping molecule and block type.
pub fn to_atom_level(g: &ComplexGraph) -> Result<ComplexGraph> {
    let mut blocks = Vec::with_capacity(g.n_atoms());
    let mut feats = g.embedded.as_ref().map(|_| Vec::with_capacity(g.n_atoms()));
    for (i, b) in g.blocks.iter().enumerate() {
        for (p, a) in b.atoms.iter().enumerate() {
            blocks.push(Block::new(b.block_type, vec![a.clone()], b.molecule_id));
            if let (Some(out), Some(e)) = (feats.as_mut(), g.embedded.as_ref()) {
                let f = &e[i];
                out.push(BlockFeatures {
                    h: Tensor::new(vec![1, f.h.shape()[1]], f.h.row(p).to_vec())?,
                    x: Tensor::new(vec![1, 3], f.x.row(p).to_vec())?,
                });
            }
        }
    }
    let mut out = ComplexGraph::new(blocks, g.k)?;
    out.embedded = feats;
    Ok(out)
}

/// Each block collapses to one pseudo-atom at its coordinate centroid. With
/// embedded features, the pseudo-atom's feature is the mean of the block's
/// rows. The pseudo-atom's element is `[UNK]` and its position code
/// `[BLANK]`.
pub fn to_block_level(g: &ComplexGraph) -> Result<ComplexGraph> {
    let blocks = g
        .blocks
        .iter()
        .map(|b| {
            Block::new(
                b.block_type,
                vec![Atom::new(Element::UNK, PosCode::Blank, b.centroid())],
                b.molecule_id,
            )
        })
        .collect();
    let mut out = ComplexGraph::new(blocks, g.k)?;
    if let Some(e) = &g.embedded {
        let feats = e
            .iter()
            .map(|f| {
                Ok(BlockFeatures {
                    h: row_mean(&f.h)?,
                    x: row_mean(&f.x)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.embedded = Some(feats);
    }
    Ok(out)
}

fn row_mean(t: &Tensor) -> Result<Tensor> {
    let (n, m) = t.dims2("row_mean")?;
    let mut acc = vec![0.0; m];
    for i in 0..n {
        for (a, v) in acc.iter_mut().zip(t.row(i)) {
            *a += v;
        }
    }
    Ok(Tensor::new(vec![1, m], acc.into_iter().map(|v| v / n as f64).collect())?)
}
