//! Brute-force counterparts of library routines.

use get_core::repr::{Atom, Block, Edge};
use get_core::vocab::{BlockType, EdgeKind, Element, PosCode};
use rand::Rng;

/// O(B²) neighbor lists: sort every other block by (distance, index).
pub fn brute_knn(blocks: &[Block], k: usize) -> Vec<Edge> {
    let dist = |a: &Block, b: &Block| {
        let mut best = f64::INFINITY;
        for p in &a.atoms {
            for q in &b.atoms {
                let d: f64 = (0..3).map(|c| (p.coord[c] - q.coord[c]).powi(2)).sum();
                best = best.min(d.sqrt());
            }
        }
        best
    };
    let mut out = Vec::new();
    for i in 0..blocks.len() {
        out.push(Edge { src: i, dst: i, kind: EdgeKind::SelfLoop });
        let mut all: Vec<(f64, usize)> = (0..blocks.len())
            .filter(|&j| j != i)
            .map(|j| (dist(&blocks[i], &blocks[j]), j))
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for &(_, j) in all.iter().take(k) {
            let kind = if blocks[i].molecule_id == blocks[j].molecule_id {
                EdgeKind::Intra
            } else {
                EdgeKind::Inter
            };
            out.push(Edge { src: j, dst: i, kind });
        }
    }
    out
}

/// Blocks on a coarse integer lattice so that equal distances are common.
pub fn lattice_blocks<R: Rng + ?Sized>(rng: &mut R, n_blocks: usize, max_atoms: usize) -> Vec<Block> {
    (0..n_blocks)
        .map(|i| {
            let n = rng.random_range(1..=max_atoms);
            let atoms = (0..n)
                .map(|_| {
                    let c = [0; 3].map(|_| rng.random_range(-4..=4) as f64);
                    Atom::new(Element::from_symbol("C"), PosCode::Alpha, c)
                })
                .collect();
            Block::new(BlockType::residue("ALA"), atoms, (i % 2) as u32)
        })
        .collect()
}

/// Fraction of (positive, negative) pairs ordered correctly, ties counting half.
pub fn concordance(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}
