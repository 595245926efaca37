//! Canonical JSON form of a complex graph (schema version 1).
//!
//! ```json
//! {"version": 1, "k": 9,
//!  "molecules": [{"id": 0, "blocks": [{"type": "GLY",
//!     "atoms": [{"element": "C", "pos_code": "CA", "xyz": [0.0, 0.0, 0.0]}]}]}],
//!  "edges": [{"src": 0, "dst": 0, "type": "self"}]}
//! ```
//!
//! Block indices count through molecules in order. `k` and `edges` are
//! optional on input; without edges the kNN graph is rebuilt.

use serde::{Deserialize, Serialize};

use crate::error::{GetError, Result};
use crate::repr::{Atom, Block, ComplexGraph, Edge, DEFAULT_K};
use crate::vocab::{BlockType, EdgeKind, Element, PosCode, UNK};

pub const SCHEMA_VERSION: u32 = 1;

fn default_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ComplexDoc {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub molecules: Vec<MoleculeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<EdgeDoc>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MoleculeDoc {
    pub id: u32,
    pub blocks: Vec<BlockDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BlockDoc {
    #[serde(rename = "type")]
    pub block_type: String,
    pub atoms: Vec<AtomDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AtomDoc {
    pub element: String,
    pub pos_code: String,
    pub xyz: [f64; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub src: usize,
    pub dst: usize,
    #[serde(rename = "type")]
    pub kind: String,
}

fn element_from_doc(s: &str) -> Element {
    if s == UNK {
        Element::UNK
    } else {
        Element::from_symbol(s)
    }
}

/// Groups consecutive blocks of the same molecule.
pub fn blocks_to_doc(blocks: &[Block]) -> Vec<MoleculeDoc> {
    let mut molecules: Vec<MoleculeDoc> = Vec::new();
    for b in blocks {
        let doc = BlockDoc {
            block_type: b.block_type.name().to_string(),
            atoms: b
                .atoms
                .iter()
                .map(|a| AtomDoc {
                    element: a.element.symbol().to_string(),
                    pos_code: a.pos_code.name().to_string(),
                    xyz: a.coord,
                })
                .collect(),
        };
        match molecules.last_mut() {
            Some(m) if m.id == b.molecule_id => m.blocks.push(doc),
            _ => molecules.push(MoleculeDoc {
                id: b.molecule_id,
                blocks: vec![doc],
            }),
        }
    }
    molecules
}

pub fn graph_to_doc(g: &ComplexGraph) -> ComplexDoc {
    ComplexDoc {
        version: SCHEMA_VERSION,
        k: Some(g.k()),
        molecules: blocks_to_doc(g.blocks()),
        edges: Some(
            g.edges()
                .iter()
                .map(|e| EdgeDoc {
                    src: e.src,
                    dst: e.dst,
                    kind: e.kind.name().to_string(),
                })
                .collect(),
        ),
    }
}

pub fn doc_to_blocks(doc: &ComplexDoc) -> Result<Vec<Block>> {
    if doc.version != SCHEMA_VERSION {
        return Err(GetError::Schema(format!(
            "unsupported version {}",
            doc.version
        )));
    }
    let mut blocks = Vec::new();
    for m in &doc.molecules {
        for b in &m.blocks {
            let block_type = if b.block_type == UNK {
                BlockType::UNK
            } else {
                BlockType::from_name(&b.block_type)
            };
            let atoms = b
                .atoms
                .iter()
                .map(|a| {
                    Atom::new(
                        element_from_doc(&a.element),
                        PosCode::from_name(&a.pos_code),
                        a.xyz,
                    )
                })
                .collect();
            blocks.push(Block::new(block_type, atoms, m.id));
        }
    }
    Ok(blocks)
}

/// Builds a graph from a document. Given edges are validated; otherwise
/// edges come from kNN with the document's `k` or `default_k`.
pub fn doc_to_graph(doc: &ComplexDoc, default_k: usize) -> Result<ComplexGraph> {
    let blocks = doc_to_blocks(doc)?;
    let k = doc.k.unwrap_or(default_k);
    match &doc.edges {
        None => ComplexGraph::new(blocks, k),
        Some(edges) => {
            let edges = edges
                .iter()
                .map(|e| {
                    let kind = EdgeKind::from_name(&e.kind).ok_or_else(|| {
                        GetError::Schema(format!("unknown edge type {:?}", e.kind))
                    })?;
                    Ok(Edge {
                        src: e.src,
                        dst: e.dst,
                        kind,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            ComplexGraph::with_edges(blocks, edges, k)
        }
    }
}

pub fn graph_to_json(g: &ComplexGraph) -> String {
    serde_json::to_string_pretty(&graph_to_doc(g)).expect("complex document serializes")
}

pub fn graph_from_json(s: &str) -> Result<ComplexGraph> {
    let doc: ComplexDoc =
        serde_json::from_str(s).map_err(|e| GetError::Schema(e.to_string()))?;
    doc_to_graph(&doc, DEFAULT_K)
}
