//! Executable symmetry checks: random rigid motions (with reflections),
//! random intra-block permutations, and a finite-difference gradient check
//! of the full model.

use std::fmt::Write as _;

use get_tensor::{finite_difference_check, ParamStore, Tape, Tensor};
use nalgebra::Matrix3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::heads;
use crate::layers::GraphIndex;
use crate::model::{Encoding, Model};
use crate::repr::{Atom, Block, ComplexGraph};
use crate::vocab::{BlockType, Element, PosCode};

pub const COORD_TOL: f64 = 1e-6;
pub const FEATURE_TOL: f64 = 1e-8;
pub const PERMUTATION_TOL: f64 = 1e-10;
pub const GRAD_STEP: f64 = 1e-6;
pub const GRAD_TOL: f64 = 1e-4;
pub const GRAD_MAX_COORDS: usize = 200;

/// `x ↦ Q x + t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RigidTransform {
    pub q: [[f64; 3]; 3],
    pub t: [f64; 3],
    pub proper: bool,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            q: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            t: [0.0; 3],
            proper: true,
        }
    }

    pub fn translation(t: [f64; 3]) -> Self {
        Self {
            t,
            ..Self::identity()
        }
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let mut out = self.t;
        for (r, o) in out.iter_mut().enumerate() {
            *o += self.q[r][0] * p[0] + self.q[r][1] * p[1] + self.q[r][2] * p[2];
        }
        out
    }

    /// Applies the transform to every row of an `[N, 3]` tensor.
    pub fn apply_rows(&self, x: &Tensor) -> Tensor {
        let data = x
            .data()
            .chunks(3)
            .flat_map(|r| self.apply([r[0], r[1], r[2]]))
            .collect();
        Tensor::new(x.shape().to_vec(), data).expect("same shape")
    }

    pub fn apply_graph(&self, g: &ComplexGraph) -> ComplexGraph {
        g.map_coords(|p| self.apply(p))
    }

    fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.q[r][c])
    }

    pub fn determinant(&self) -> f64 {
        self.matrix().determinant()
    }

    /// `max |QᵀQ − I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let m = self.matrix();
        (m.transpose() * m - Matrix3::identity()).abs().max()
    }
}

/// Orthogonal factor of a Gaussian matrix, with the signs of `R`'s diagonal
/// folded in so the distribution is uniform; `reflect` selects det = −1,
/// otherwise det = +1. Translation is uniform in `[−10, 10]³`.
pub fn sample_rigid<R: Rng + ?Sized>(rng: &mut R, reflect: bool) -> RigidTransform {
    let a = Matrix3::from_fn(|_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z
    });
    let qr = a.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for c in 0..3 {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    if reflect {
        q.column_mut(0).neg_mut();
    }
    let t = [0; 3].map(|_| rng.random_range(-10.0..=10.0));
    RigidTransform {
        q: [0, 1, 2].map(|r| [0, 1, 2].map(|c| q[(r, c)])),
        t,
        proper: !reflect,
    }
}

/// Anything mapping a graph to per-atom features and coordinates.
pub trait Encoder: Sync {
    fn encode(&self, g: &ComplexGraph) -> Result<Encoding>;
}

impl Encoder for Model {
    fn encode(&self, g: &ComplexGraph) -> Result<Encoding> {
        Model::encode(self, g)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub trials: usize,
    pub max_abs_deviation: f64,
    pub max_rel_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckRecord {
    fn new(name: &str, trials: usize, dev: Deviation, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            trials,
            max_abs_deviation: dev.abs,
            max_rel_deviation: dev.rel,
            tolerance,
            passed: dev.rel <= tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub seed: u64,
    pub checks: Vec<CheckRecord>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<26} {:>6} {:>12} {:>12} {:>10}  verdict\n",
            "check", "trials", "max abs", "max rel", "tol"
        );
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<26} {:>6} {:>12.3e} {:>12.3e} {:>10.1e}  {}",
                c.name,
                c.trials,
                c.max_abs_deviation,
                c.max_rel_deviation,
                c.tolerance,
                if c.passed { "PASS" } else { "FAIL" }
            );
        }
        let _ = writeln!(s, "seed {}", self.seed);
        s
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Deviation {
    pub abs: f64,
    pub rel: f64,
}

impl Deviation {
    fn max(self, o: Deviation) -> Deviation {
        Deviation {
            abs: self.abs.max(o.abs),
            rel: self.rel.max(o.rel),
        }
    }
}

/// `max |a − b|` and that value over `max |reference|`.
pub fn deviation(actual: &[f64], reference: &[f64]) -> Deviation {
    let abs = actual
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = reference.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let rel = if abs == 0.0 {
        0.0
    } else {
        abs / scale.max(f64::MIN_POSITIVE)
    };
    Deviation { abs, rel }
}

/// Deviations of coordinates and features between `encode(T g)` and
/// `T encode(g)`.
pub fn transform_deviation<E: Encoder + ?Sized>(
    enc: &E,
    g: &ComplexGraph,
    reference: &Encoding,
    t: &RigidTransform,
) -> Result<(Deviation, Deviation)> {
    let out = enc.encode(&t.apply_graph(g))?;
    let expect_x = t.apply_rows(&reference.x);
    Ok((
        deviation(out.x.data(), expect_x.data()),
        deviation(out.h.data(), reference.h.data()),
    ))
}

/// Transforms for `n_trials` trials; odd trials are reflections.
pub fn sample_transforms<R: Rng + ?Sized>(rng: &mut R, n_trials: usize) -> Vec<RigidTransform> {
    (0..n_trials).map(|k| sample_rigid(rng, k % 2 == 1)).collect()
}

/// Returns the coordinate and the feature record.
pub fn check_equivariance<E: Encoder + ?Sized, R: Rng + ?Sized>(
    enc: &E,
    g: &ComplexGraph,
    n_trials: usize,
    coord_tol: f64,
    feature_tol: f64,
    rng: &mut R,
) -> Result<[CheckRecord; 2]> {
    let transforms = sample_transforms(rng, n_trials);
    let reference = enc.encode(g)?;
    let (dx, dh) = transforms
        .par_iter()
        .map(|t| transform_deviation(enc, g, &reference, t))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((Deviation::default(), Deviation::default()), |(ax, ah), (x, h)| {
            (ax.max(x), ah.max(h))
        });
    Ok([
        CheckRecord::new("equivariance.coordinates", n_trials, dx, coord_tol),
        CheckRecord::new("equivariance.features", n_trials, dh, feature_tol),
    ])
}

pub fn sample_permutations<R: Rng + ?Sized>(rng: &mut R, g: &ComplexGraph) -> Vec<Vec<usize>> {
    g.blocks()
        .iter()
        .map(|b| {
            let mut p: Vec<usize> = (0..b.len()).collect();
            p.shuffle(rng);
            p
        })
        .collect()
}

/// Compares outputs for permuted input against the reference rows permuted
/// the same way; features and coordinates are pooled into one deviation.
pub fn permutation_deviation<E: Encoder + ?Sized>(
    enc: &E,
    g: &ComplexGraph,
    reference: &Encoding,
    perms: &[Vec<usize>],
) -> Result<Deviation> {
    let out = enc.encode(&g.permute_atoms(perms)?)?;
    let (mut eh, mut ex) = (Vec::new(), Vec::new());
    for (i, perm) in perms.iter().enumerate() {
        let off = reference.block_offsets[i];
        for &p in perm {
            eh.extend_from_slice(reference.h.row(off + p));
            ex.extend_from_slice(reference.x.row(off + p));
        }
    }
    Ok(deviation(out.h.data(), &eh).max(deviation(out.x.data(), &ex)))
}

pub fn check_block_permutation<E: Encoder + ?Sized, R: Rng + ?Sized>(
    enc: &E,
    g: &ComplexGraph,
    n_trials: usize,
    tol: f64,
    rng: &mut R,
) -> Result<CheckRecord> {
    let perms: Vec<_> = (0..n_trials).map(|_| sample_permutations(rng, g)).collect();
    let reference = enc.encode(g)?;
    let dev = perms
        .par_iter()
        .map(|p| permutation_deviation(enc, g, &reference, p))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(Deviation::default(), Deviation::max);
    Ok(CheckRecord::new("permutation", n_trials, dev, tol))
}

/// Squared error of the first affinity head against `target`, evaluated
/// with the parameter values in `store`.
pub fn regression_loss(model: &Model, store: &ParamStore, idx: &GraphIndex, target: f64) -> Result<f64> {
    let tape = Tape::new();
    let b = store.bind(&tape);
    let v = model.graph_vec(&b, idx)?;
    let y = heads::affinity(&model.heads.regressors[0], &b, &v)?;
    Ok((y.value().data()[0] - target).powi(2))
}

/// Analytic gradient of [`regression_loss`] per parameter tensor.
pub fn regression_gradients(model: &Model, idx: &GraphIndex, target: f64) -> Result<Vec<Tensor>> {
    let tape = Tape::new();
    let b = model.store.bind(&tape);
    let v = model.graph_vec(&b, idx)?;
    let y = heads::affinity(&model.heads.regressors[0], &b, &v)?;
    let loss = y.add_scalar(-target).square().sum();
    let grads = tape.backward(&loss)?;
    Ok(b.gradients(&grads))
}

pub fn check_gradients<R: Rng + ?Sized>(
    model: &Model,
    g: &ComplexGraph,
    step: f64,
    tol: f64,
    max_coords: usize,
    rng: &mut R,
) -> Result<CheckRecord> {
    let idx = GraphIndex::new(g)?;
    let target = 1.0;
    let analytic = regression_gradients(model, &idx, target)?;
    let report = finite_difference_check(
        |store| regression_loss(model, store, &idx, target).unwrap_or(f64::NAN),
        &model.store,
        &analytic,
        step,
        tol,
        max_coords,
        rng,
    );
    Ok(CheckRecord {
        name: "gradients".into(),
        trials: report.coordinates_checked,
        max_abs_deviation: report.max_abs_deviation,
        max_rel_deviation: report.max_deviation,
        tolerance: tol,
        passed: report.passed,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditOptions {
    pub trials: usize,
    pub seed: u64,
    pub gradients: bool,
    pub grad_max_coords: usize,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 0,
            gradients: true,
            grad_max_coords: GRAD_MAX_COORDS,
        }
    }
}

/// Identity, translation, rigid-motion, permutation and gradient checks,
/// all driven by one seeded generator.
pub fn run_audit(model: &Model, g: &ComplexGraph, opts: &AuditOptions) -> Result<AuditReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let reference = model.encode(g)?;
    let mut checks = Vec::new();

    let (dx, dh) = transform_deviation(model, g, &reference, &RigidTransform::identity())?;
    checks.push(CheckRecord::new("identity", 1, dx.max(dh), 0.0));
    let shift = RigidTransform::translation([0; 3].map(|_| rng.random_range(-10.0..=10.0)));
    let (_, dh) = transform_deviation(model, g, &reference, &shift)?;
    checks.push(CheckRecord::new("translation.features", 1, dh, 1e-12));

    checks.extend(check_equivariance(model, g, opts.trials, COORD_TOL, FEATURE_TOL, &mut rng)?);
    checks.push(check_block_permutation(model, g, opts.trials, PERMUTATION_TOL, &mut rng)?);
    if opts.gradients {
        checks.push(check_gradients(
            model,
            g,
            GRAD_STEP,
            GRAD_TOL,
            opts.grad_max_coords,
            &mut rng,
        )?);
    }
    Ok(AuditReport {
        seed: opts.seed,
        checks,
    })
}

/// Random two-molecule graph with `B` blocks in `blocks` and `n_i` atoms in
/// `atoms`, block centers spread so that neighborhoods vary.
pub fn random_graph<R: Rng + ?Sized>(
    rng: &mut R,
    blocks: std::ops::RangeInclusive<usize>,
    atoms: std::ops::RangeInclusive<usize>,
    k: usize,
) -> ComplexGraph {
    let b = rng.random_range(blocks);
    let spread = 2.0 * (b as f64).cbrt() + 2.0;
    let elements: Vec<Element> = Element::all_known().collect();
    let out: Vec<Block> = (0..b)
        .map(|i| {
            let n = rng.random_range(atoms.clone());
            let center = [0; 3].map(|_| rng.random_range(-spread..=spread));
            let block_type = BlockType::from_id(rng.random_range(0..BlockType::VOCAB));
            let molecule = u32::from(i % 2 == 1 || rng.random_bool(0.25));
            let atoms = (0..n)
                .map(|_| {
                    let coord = center.map(|c| {
                        let z: f64 = StandardNormal.sample(rng);
                        c + 0.8 * z
                    });
                    Atom::new(
                        elements[rng.random_range(0..elements.len())],
                        PosCode::from_id(rng.random_range(0..PosCode::VOCAB)),
                        coord,
                    )
                })
                .collect();
            Block::new(block_type, atoms, molecule)
        })
        .collect();
    ComplexGraph::new(out, k).expect("random blocks are valid")
}
