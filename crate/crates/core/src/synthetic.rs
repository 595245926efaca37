//! Synthetic two-molecule complexes with distance-derived labels.
//!
//! Regression label: `−ln(d_min) + Σ 1/d(i, j)` over block pairs `(i, j)`
//! from different molecules, with `d` the block distance and `d_min` its
//! minimum. Classification samples pair a complex with a reference copy in
//! which the second molecule sits at the dataset's median centroid
//! separation; the label is 1 when the complex is tighter than the median.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{GetError, Result};
use crate::repr::{block_distance, Atom, Block, ComplexGraph};
use crate::vocab::{BlockType, Element, PosCode, RESIDUES};

/// Which kind of interface the generator imitates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flavor {
    /// Residue blocks on both sides.
    PpaLike,
    /// Residue blocks against a small molecule of single-atom blocks.
    LbaLike,
}

impl Flavor {
    pub fn name(self) -> &'static str {
        match self {
            Flavor::PpaLike => "ppa-like",
            Flavor::LbaLike => "lba-like",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSample {
    pub graph: ComplexGraph,
    /// Second input of a classification pair.
    pub reference: Option<ComplexGraph>,
    pub label: f64,
    pub flavor: Flavor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorOptions {
    pub blocks: std::ops::RangeInclusive<usize>,
    pub atoms: std::ops::RangeInclusive<usize>,
    pub k: usize,
    /// Surface gap range between the two molecules, Å.
    pub gap: (f64, f64),
    /// Resample placements closer than this, Å.
    pub min_contact: f64,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self {
            blocks: 4..=16,
            atoms: 1..=6,
            k: 9,
            gap: (0.0, 6.0),
            min_contact: 1.5,
        }
    }
}

pub fn min_inter_distance(blocks: &[Block]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in blocks.iter().enumerate() {
        for b in &blocks[i + 1..] {
            if a.molecule_id != b.molecule_id {
                best = best.min(block_distance(a, b));
            }
        }
    }
    best
}

pub fn regression_label(blocks: &[Block]) -> f64 {
    let mut energy = 0.0;
    for (i, a) in blocks.iter().enumerate() {
        for b in &blocks[i + 1..] {
            if a.molecule_id != b.molecule_id {
                energy += 1.0 / block_distance(a, b);
            }
        }
    }
    -min_inter_distance(blocks).ln() + energy
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> [f64; 3] {
    [0; 3].map(|_| {
        let z: f64 = StandardNormal.sample(rng);
        sigma * z
    })
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn residue<R: Rng + ?Sized>(rng: &mut R, center: [f64; 3], n: usize, mol: u32) -> Block {
    const BACKBONE: [(&str, PosCode); 4] = [
        ("N", PosCode::BackboneN),
        ("C", PosCode::BackboneCa),
        ("C", PosCode::BackboneC),
        ("O", PosCode::BackboneO),
    ];
    const SIDE: [PosCode; 5] = [
        PosCode::Beta,
        PosCode::Gamma,
        PosCode::Delta,
        PosCode::Epsilon,
        PosCode::Zeta,
    ];
    let side_elements = ["C", "C", "C", "N", "O", "S"];
    let atoms = (0..n)
        .map(|p| {
            let (el, code) = if p < 4 {
                BACKBONE[p]
            } else {
                (side_elements[rng.random_range(0..side_elements.len())], SIDE[(p - 4) % 5])
            };
            Atom::new(Element::from_symbol(el), code, add(center, gaussian3(rng, 0.8)))
        })
        .collect();
    let name = RESIDUES[rng.random_range(0..RESIDUES.len())];
    Block::new(BlockType::residue(name), atoms, mol)
}

fn ligand_atom<R: Rng + ?Sized>(rng: &mut R, at: [f64; 3], mol: u32) -> Block {
    let elements = ["C", "C", "C", "N", "O", "S", "F", "Cl"];
    let e = Element::from_symbol(elements[rng.random_range(0..elements.len())]);
    Block::new(
        BlockType::small_molecule(e),
        vec![Atom::new(e, PosCode::Blank, at)],
        mol,
    )
}

/// Blocks of one molecule around the origin, and its radius estimate.
fn molecule<R: Rng + ?Sized>(
    rng: &mut R,
    n_blocks: usize,
    ligand: bool,
    atoms: &std::ops::RangeInclusive<usize>,
    mol: u32,
) -> (Vec<Block>, f64) {
    let mut blocks = Vec::with_capacity(n_blocks);
    if ligand {
        // Random walk with bond-length steps, then centered.
        let mut at = [0.0; 3];
        let mut pts = Vec::with_capacity(n_blocks);
        for _ in 0..n_blocks {
            pts.push(at);
            let d: [f64; 3] = UnitSphere.sample(rng);
            at = add(at, d.map(|v| 1.5 * v));
        }
        let c = centroid(&pts);
        for p in pts {
            blocks.push(ligand_atom(rng, [p[0] - c[0], p[1] - c[1], p[2] - c[2]], mol));
        }
    } else {
        let radius = 2.5 * (n_blocks as f64).cbrt();
        for _ in 0..n_blocks {
            let d: [f64; 3] = UnitSphere.sample(rng);
            let r = radius * rng.random::<f64>().cbrt();
            let n = rng.random_range(atoms.clone());
            blocks.push(residue(rng, d.map(|v| r * v), n, mol));
        }
    }
    let pts: Vec<[f64; 3]> = blocks.iter().flat_map(|b| b.atoms.iter().map(|a| a.coord)).collect();
    let c = centroid(&pts);
    let radius = pts
        .iter()
        .map(|p| crate::repr::distance(p, &c))
        .fold(0.0, f64::max);
    (blocks, radius)
}

fn centroid(pts: &[[f64; 3]]) -> [f64; 3] {
    let mut c = [0.0; 3];
    for p in pts {
        for d in 0..3 {
            c[d] += p[d];
        }
    }
    c.map(|v| v / pts.len().max(1) as f64)
}

fn molecule_centroid(blocks: &[Block], mol: u32) -> [f64; 3] {
    let pts: Vec<[f64; 3]> = blocks
        .iter()
        .filter(|b| b.molecule_id == mol)
        .flat_map(|b| b.atoms.iter().map(|a| a.coord))
        .collect();
    centroid(&pts)
}

/// Distance between the centroids of molecules 0 and 1.
pub fn separation(blocks: &[Block]) -> f64 {
    crate::repr::distance(&molecule_centroid(blocks, 0), &molecule_centroid(blocks, 1))
}

fn shift_molecule(blocks: &[Block], mol: u32, by: [f64; 3]) -> Vec<Block> {
    blocks
        .iter()
        .map(|b| {
            let mut b = b.clone();
            if b.molecule_id == mol {
                for a in &mut b.atoms {
                    a.coord = add(a.coord, by);
                }
            }
            b
        })
        .collect()
}

/// One complex: molecule 0 around the origin, molecule 1 offset along a
/// random direction with a random surface gap.
pub fn make_complex<R: Rng + ?Sized>(
    rng: &mut R,
    flavor: Flavor,
    opts: &GeneratorOptions,
) -> Vec<Block> {
    let total = rng.random_range(opts.blocks.clone());
    let n_a = rng.random_range(2..=total - 2);
    let (a, ra) = molecule(rng, n_a, false, &opts.atoms, 0);
    let (b, rb) = molecule(rng, total - n_a, flavor == Flavor::LbaLike, &opts.atoms, 1);
    let dir: [f64; 3] = UnitSphere.sample(rng);
    let mut gap = rng.random_range(opts.gap.0..=opts.gap.1);
    loop {
        let s = ra + rb + gap;
        let mut blocks = a.clone();
        blocks.extend(shift_molecule(&b, 1, dir.map(|v| s * v)));
        if min_inter_distance(&blocks) >= opts.min_contact {
            return blocks;
        }
        gap += 0.25;
    }
}

/// `n` regression samples of one flavor.
pub fn make_regression_dataset<R: Rng + ?Sized>(
    n: usize,
    flavor: Flavor,
    opts: &GeneratorOptions,
    rng: &mut R,
) -> Result<Vec<SyntheticSample>> {
    if n == 0 {
        return Err(GetError::Config("dataset size must be at least 1".into()));
    }
    (0..n)
        .map(|_| {
            let blocks = make_complex(rng, flavor, opts);
            let label = regression_label(&blocks);
            Ok(SyntheticSample {
                graph: ComplexGraph::new(blocks, opts.k)?,
                reference: None,
                label,
                flavor,
            })
        })
        .collect()
}

/// `n` classification pairs; the threshold is the median separation of the
/// generated complexes.
pub fn make_classification_dataset<R: Rng + ?Sized>(
    n: usize,
    flavor: Flavor,
    opts: &GeneratorOptions,
    rng: &mut R,
) -> Result<Vec<SyntheticSample>> {
    if n == 0 {
        return Err(GetError::Config("dataset size must be at least 1".into()));
    }
    let complexes: Vec<Vec<Block>> = (0..n).map(|_| make_complex(rng, flavor, opts)).collect();
    let seps: Vec<f64> = complexes.iter().map(|c| separation(c)).collect();
    let median = median(&seps);
    complexes
        .into_iter()
        .zip(seps)
        .map(|(blocks, s)| {
            let (ca, cb) = (molecule_centroid(&blocks, 0), molecule_centroid(&blocks, 1));
            let u = [cb[0] - ca[0], cb[1] - ca[1], cb[2] - ca[2]].map(|v| v / s);
            let reference = shift_molecule(&blocks, 1, u.map(|v| (median - s) * v));
            Ok(SyntheticSample {
                graph: ComplexGraph::new(blocks, opts.k)?,
                reference: Some(ComplexGraph::new(reference, opts.k)?),
                label: if s < median { 1.0 } else { 0.0 },
                flavor,
            })
        })
        .collect()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
