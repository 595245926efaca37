//! Supervised training on synthetic complexes: dynamic batching by block
//! budget, Adam with geometric learning-rate decay, top-k checkpointing by
//! validation loss, and evaluation.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use get_tensor::{ParamStore, Tape, Tensor, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex_json::{doc_to_graph, graph_to_doc, ComplexDoc};
use crate::error::{GetError, Result};
use crate::heads;
use crate::layers::GraphIndex;
use crate::metrics::{classification_metrics, regression_metrics, MetricMap};
use crate::model::{Model, ModelConfig};
use crate::repr::DEFAULT_K;
use crate::synthetic::{
    make_classification_dataset, make_regression_dataset, Flavor, GeneratorOptions,
    SyntheticSample,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskType {
    Regression,
    Classification,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub d_h: usize,
    pub d_r: usize,
    pub lr: f64,
    pub final_lr: f64,
    pub max_epoch: usize,
    pub save_topk: usize,
    pub n_layers: usize,
    /// Upper bound on the number of blocks in one batch.
    pub max_n_vertex: usize,
    pub seed: u64,
    pub task: TaskType,
    /// Synthetic data families; two or more regression flavors train one
    /// encoder with one head per flavor.
    pub flavors: Vec<Flavor>,
    /// Samples per flavor in each split.
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub d_e: usize,
    pub scalar_hidden: usize,
    pub k: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d_h: 32,
            d_r: 8,
            lr: 1e-3,
            final_lr: 1e-4,
            max_epoch: 30,
            save_topk: 3,
            n_layers: 3,
            max_n_vertex: 1500,
            seed: 0,
            task: TaskType::Regression,
            flavors: vec![Flavor::PpaLike],
            n_train: 512,
            n_valid: 64,
            n_test: 64,
            d_e: 16,
            scalar_hidden: 1,
            k: DEFAULT_K,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GetError::Config(m.to_string()));
        if !(self.final_lr > 0.0 && self.lr >= self.final_lr && self.lr.is_finite()) {
            return bad("need lr >= final_lr > 0");
        }
        if self.max_epoch == 0 || self.save_topk == 0 {
            return bad("max_epoch and save_topk must be positive");
        }
        if self.n_train == 0 || self.n_valid == 0 || self.n_test < 2 {
            return bad("need n_train >= 1, n_valid >= 1, n_test >= 2");
        }
        if self.flavors.is_empty() {
            return bad("flavors must not be empty");
        }
        let mut seen = self.flavors.clone();
        seen.dedup();
        if seen.len() != self.flavors.len() {
            return bad("flavors must be distinct");
        }
        if self.task == TaskType::Classification && self.flavors.len() != 1 {
            return bad("classification trains on a single flavor");
        }
        self.model_config().validate()
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            d_h: self.d_h,
            d_r: self.d_r,
            d_e: self.d_e,
            n_layers: self.n_layers,
            scalar_hidden: self.scalar_hidden,
            regression_heads: self.flavors.iter().map(|f| f.name().to_string()).collect(),
            ..ModelConfig::default()
        }
    }
}

/// `lr · (final_lr / lr)^(epoch / (max_epoch − 1))`.
pub fn lr_at(lr: f64, final_lr: f64, epoch: usize, max_epoch: usize) -> f64 {
    if max_epoch <= 1 {
        return lr;
    }
    if epoch + 1 == max_epoch {
        return final_lr;
    }
    lr * (final_lr / lr).powf(epoch as f64 / (max_epoch - 1) as f64)
}

/// Greedy packing in the given order; a batch closes when the next graph
/// would push its block count over `budget`.
pub fn dynamic_batches(sizes: &[usize], budget: usize) -> Result<Vec<Vec<usize>>> {
    let mut batches: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::new();
    let mut used = 0;
    for (i, &s) in sizes.iter().enumerate() {
        if s > budget {
            return Err(GetError::BudgetExceeded {
                graph: i,
                blocks: s,
                budget,
            });
        }
        if used + s > budget && !current.is_empty() {
            batches.push(std::mem::take(&mut current));
            used = 0;
        }
        current.push(i);
        used += s;
    }
    if !current.is_empty() {
        batches.push(current);
    }
    Ok(batches)
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, _, t)| vec![0.0; t.numel()]).collect();
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &[Vec<f64>], lr: f64) -> Result<()> {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let ids: Vec<_> = store.ids().collect();
        for (k, id) in ids.into_iter().enumerate() {
            let p = store.get(id);
            let mut data = p.data().to_vec();
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads[k]);
            for i in 0..data.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                data[i] -= lr * mh / (vh.sqrt() + self.eps);
            }
            let shape = p.shape().to_vec();
            store.set(id, Tensor::new(shape, data)?)?;
        }
        Ok(())
    }
}

/// A sample with its graph indexing precomputed.
pub struct Prepared {
    pub idx: GraphIndex,
    pub reference: Option<GraphIndex>,
    pub label: f64,
    pub head: usize,
    pub n_blocks: usize,
}

pub fn prepare(samples: &[SyntheticSample], cfg: &ModelConfig) -> Result<Vec<Prepared>> {
    samples
        .iter()
        .map(|s| {
            let head = cfg.head_index(s.flavor.name()).unwrap_or(0);
            let reference = s.reference.as_ref().map(GraphIndex::new).transpose()?;
            Ok(Prepared {
                n_blocks: s.graph.n_blocks() + reference.as_ref().map_or(0, |r| r.n_blocks),
                idx: GraphIndex::new(&s.graph)?,
                reference,
                label: s.label,
                head,
            })
        })
        .collect()
}

/// Prediction (regression value or classification logit) on a tape.
fn output<'t>(model: &Model, b: &get_tensor::Bound<'t>, s: &Prepared) -> Result<Var<'t>> {
    let v = model.graph_vec(b, &s.idx)?;
    match &s.reference {
        None => heads::affinity(&model.heads.regressors[s.head], b, &v),
        Some(r) => {
            let vr = model.graph_vec(b, r)?;
            heads::efficacy_logit(&model.heads.classifier, b, &v, &vr)
        }
    }
}

/// Squared error, or binary cross-entropy `softplus(z) − y·z` on a logit.
fn loss_of<'t>(out: &Var<'t>, s: &Prepared) -> Var<'t> {
    match s.reference {
        None => out.add_scalar(-s.label).square().sum(),
        Some(_) => out.softplus().sum().add(&out.scale(-s.label).sum()).expect("scalars"),
    }
}

fn sample_gradients(model: &Model, s: &Prepared) -> Result<(f64, Vec<Tensor>)> {
    let tape = Tape::new();
    let b = model.store.bind(&tape);
    let loss = loss_of(&output(model, &b, s)?, s);
    let grads = tape.backward(&loss)?;
    Ok((loss.value().data()[0], b.gradients(&grads)))
}

/// Mean loss and mean gradient over a batch; per-sample work runs in
/// parallel and is merged in sample order.
pub fn batch_gradients(model: &Model, batch: &[&Prepared]) -> Result<(f64, Vec<Vec<f64>>, Vec<f64>)> {
    let results = batch
        .par_iter()
        .map(|s| sample_gradients(model, s))
        .collect::<Result<Vec<_>>>()?;
    let mut total: Vec<Vec<f64>> = model
        .store
        .iter()
        .map(|(_, _, t)| vec![0.0; t.numel()])
        .collect();
    let mut losses = Vec::with_capacity(results.len());
    for (loss, grads) in &results {
        losses.push(*loss);
        for (acc, g) in total.iter_mut().zip(grads) {
            for (a, v) in acc.iter_mut().zip(g.data()) {
                *a += v;
            }
        }
    }
    let n = batch.len() as f64;
    for acc in &mut total {
        for a in acc.iter_mut() {
            *a /= n;
        }
    }
    Ok((losses.iter().sum::<f64>() / n, total, losses))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub loss: f64,
    pub predictions: Vec<f64>,
    pub labels: Vec<f64>,
    pub metrics: MetricMap,
}

/// Mean loss over `samples` plus task metrics (per flavor when several
/// heads are trained, keyed `flavor/metric`).
pub fn evaluate(model: &Model, samples: &[Prepared]) -> Result<Evaluation> {
    let outs = samples
        .par_iter()
        .map(|s| {
            let tape = Tape::new();
            let b = model.store.bind(&tape);
            let out = output(model, &b, s)?;
            let loss = loss_of(&out, s).value().data()[0];
            Ok((out.value().data()[0], loss))
        })
        .collect::<Result<Vec<_>>>()?;
    let loss = outs.iter().map(|o| o.1).sum::<f64>() / samples.len().max(1) as f64;
    let classification = samples.first().is_some_and(|s| s.reference.is_some());
    let predictions: Vec<f64> = outs
        .iter()
        .map(|o| if classification { get_tensor::sigmoid(o.0) } else { o.0 })
        .collect();
    let labels: Vec<f64> = samples.iter().map(|s| s.label).collect();
    let mut metrics = MetricMap::default();
    if samples.len() >= 2 {
        if classification {
            let l: Vec<bool> = labels.iter().map(|v| *v > 0.5).collect();
            metrics = classification_metrics(&predictions, &l)?;
        } else {
            let heads: std::collections::BTreeSet<usize> = samples.iter().map(|s| s.head).collect();
            for &h in &heads {
                let sel: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].head == h).collect();
                if sel.len() < 2 {
                    continue;
                }
                let p: Vec<f64> = sel.iter().map(|&i| predictions[i]).collect();
                let t: Vec<f64> = sel.iter().map(|&i| labels[i]).collect();
                let m = regression_metrics(&p, &t)?;
                let prefix = if heads.len() > 1 {
                    format!("{}/", model.config.regression_heads[h])
                } else {
                    String::new()
                };
                for (k, v) in m.values {
                    metrics.values.insert(format!("{prefix}{k}"), v);
                }
                metrics.warnings.extend(m.warnings);
            }
        }
    }
    Ok(Evaluation {
        loss,
        predictions,
        labels,
        metrics,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
    pub val_metrics: BTreeMap<String, f64>,
}

#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Vec<SyntheticSample>,
    pub valid: Vec<SyntheticSample>,
    pub test: Vec<SyntheticSample>,
}

/// Generates `n_train + n_valid + n_test` samples per flavor from the
/// configured seed and splits them in order.
pub fn make_splits(cfg: &TrainConfig) -> Result<Splits> {
    cfg.validate()?;
    let opts = GeneratorOptions {
        k: cfg.k,
        ..GeneratorOptions::default()
    };
    let mut splits = Splits {
        train: Vec::new(),
        valid: Vec::new(),
        test: Vec::new(),
    };
    let n = cfg.n_train + cfg.n_valid + cfg.n_test;
    for &flavor in &cfg.flavors {
        // Seeded per flavor, so a flavor's data does not depend on the others.
        let stream = match flavor {
            Flavor::PpaLike => 1,
            Flavor::LbaLike => 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1000 * stream));
        let mut data = match cfg.task {
            TaskType::Regression => make_regression_dataset(n, flavor, &opts, &mut rng)?,
            TaskType::Classification => make_classification_dataset(n, flavor, &opts, &mut rng)?,
        };
        let test = data.split_off(cfg.n_train + cfg.n_valid);
        let valid = data.split_off(cfg.n_train);
        splits.train.extend(data);
        splits.valid.extend(valid);
        splits.test.extend(test);
    }
    Ok(splits)
}

pub struct TrainOutcome {
    /// Latest epoch among the top-k validation checkpoints.
    pub model: Model,
    pub selected_epoch: usize,
    pub history: Vec<EpochRecord>,
    /// Epochs of the retained checkpoints, best validation loss first.
    pub kept: Vec<usize>,
}

fn param_norms(store: &ParamStore) -> String {
    store
        .iter()
        .map(|(_, n, t)| format!("{n}={:.3e}", t.l2_norm()))
        .collect::<Vec<_>>()
        .join(", ")
}

fn checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join("checkpoints").join(format!("epoch{epoch:03}.bin"))
}

fn history_csv(history: &[EpochRecord]) -> String {
    let keys: Vec<String> = history
        .last()
        .map(|r| r.val_metrics.keys().cloned().collect())
        .unwrap_or_default();
    let mut s = String::from("epoch,train_loss,val_loss,lr");
    for k in &keys {
        s.push_str(&format!(",val_{k}"));
    }
    s.push('\n');
    for r in history {
        s.push_str(&format!("{},{},{},{}", r.epoch, r.train_loss, r.val_loss, r.lr));
        for k in &keys {
            let v = r.val_metrics.get(k).copied().unwrap_or(f64::NAN);
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut name = path
        .file_name()
        .ok_or_else(|| GetError::Config(format!("{} is not a file path", path.display())))?
        .to_os_string();
    name.push(".tmp");
    let tmp = path.with_file_name(name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs training. With `out_dir`, writes `checkpoints/epochNNN.bin` for the
/// retained top-k, `history.csv`, `final.bin` and `config.json`.
pub fn train(cfg: &TrainConfig, splits: &Splits, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut model = Model::init(cfg.model_config(), cfg.seed)?;
    let train_set = prepare(&splits.train, &model.config)?;
    let valid_set = prepare(&splits.valid, &model.config)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir.join("checkpoints"))?;
        write_atomic(&dir.join("config.json"), serde_json::to_string_pretty(cfg)?.as_bytes())?;
    }
    let mut adam = Adam::new(&model.store);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed);
    let mut history = Vec::with_capacity(cfg.max_epoch);
    // (val_loss, epoch, params)
    let mut top: Vec<(f64, usize, ParamStore)> = Vec::new();

    for epoch in 0..cfg.max_epoch {
        let lr = lr_at(cfg.lr, cfg.final_lr, epoch, cfg.max_epoch);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng);
        let sizes: Vec<usize> = order.iter().map(|&i| train_set[i].n_blocks).collect();
        let batches = dynamic_batches(&sizes, cfg.max_n_vertex)?;
        let mut loss_sum = 0.0;
        for (bi, batch) in batches.iter().enumerate() {
            let members: Vec<&Prepared> = batch.iter().map(|&k| &train_set[order[k]]).collect();
            let (loss, grads, _) = batch_gradients(&model, &members)?;
            if !loss.is_finite() {
                return Err(GetError::NonFiniteLoss {
                    epoch,
                    batch: bi,
                    norms: param_norms(&model.store),
                });
            }
            loss_sum += loss * members.len() as f64;
            adam.step(&mut model.store, &grads, lr)?;
        }
        let val = evaluate(&model, &valid_set)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_loss: val.loss,
            lr,
            val_metrics: val.metrics.values.clone(),
        };
        log::info!(
            "epoch {epoch}: train {:.5} val {:.5} lr {lr:.2e}",
            record.train_loss,
            record.val_loss
        );
        history.push(record);

        let score = if val.loss.is_finite() { val.loss } else { f64::INFINITY };
        top.push((score, epoch, model.store.clone()));
        top.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let evicted: Vec<usize> = top.drain(cfg.save_topk.min(top.len())..).map(|t| t.1).collect();
        if let Some(dir) = out_dir {
            if top.iter().any(|t| t.1 == epoch) {
                model.save(&checkpoint_path(dir, epoch))?;
            }
            for e in evicted.into_iter().filter(|&e| e != epoch) {
                let _ = fs::remove_file(checkpoint_path(dir, e));
            }
            write_atomic(&dir.join("history.csv"), history_csv(&history).as_bytes())?;
        }
    }

    let (_, selected_epoch, store) = top
        .iter()
        .max_by_key(|t| t.1)
        .cloned()
        .expect("at least one epoch ran");
    let selected = Model::with_params(model.config.clone(), store)?;
    if let Some(dir) = out_dir {
        selected.save(&dir.join("final.bin"))?;
    }
    Ok(TrainOutcome {
        model: selected,
        selected_epoch,
        history,
        kept: top.iter().map(|t| t.1).collect(),
    })
}

/// One line of a JSONL dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataLine {
    /// `ppa-like`, `lba-like` or `lep-like`.
    pub task: String,
    pub label: f64,
    pub graph: ComplexDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ComplexDoc>,
}

pub fn write_jsonl(path: &Path, samples: &[SyntheticSample]) -> Result<()> {
    let mut s = String::new();
    for sample in samples {
        let line = DataLine {
            task: if sample.reference.is_some() {
                "lep-like".into()
            } else {
                sample.flavor.name().into()
            },
            label: sample.label,
            graph: graph_to_doc(&sample.graph),
            reference: sample.reference.as_ref().map(graph_to_doc),
        };
        s.push_str(&serde_json::to_string(&line)?);
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<SyntheticSample>> {
    let f = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let d: DataLine = serde_json::from_str(&line)
            .map_err(|e| GetError::Schema(format!("line {}: {e}", n + 1)))?;
        let flavor = match d.task.as_str() {
            "ppa-like" => Flavor::PpaLike,
            "lba-like" | "lep-like" => Flavor::LbaLike,
            other => return Err(GetError::Schema(format!("line {}: unknown task {other:?}", n + 1))),
        };
        let reference = d.reference.as_ref().map(|r| doc_to_graph(r, DEFAULT_K)).transpose()?;
        if (d.task == "lep-like") != reference.is_some() {
            return Err(GetError::Schema(format!(
                "line {}: lep-like samples need a reference graph, others must not have one",
                n + 1
            )));
        }
        out.push(SyntheticSample {
            graph: doc_to_graph(&d.graph, DEFAULT_K)?,
            reference,
            label: d.label,
            flavor,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        assert_eq!(lr_at(1e-3, 1e-4, 0, 30), 1e-3);
        assert!((lr_at(1e-3, 1e-4, 29, 30) - 1e-4).abs() <= 1e-12);
        let mid = lr_at(1e-3, 1e-5, 1, 3);
        assert!((mid - 1e-4).abs() < 1e-15);
        assert_eq!(lr_at(1e-3, 1e-4, 0, 1), 1e-3);
    }

    #[test]
    fn batching_examples() {
        assert_eq!(dynamic_batches(&[5, 5, 5], 10).unwrap(), vec![vec![0, 1], vec![2]]);
        assert_eq!(dynamic_batches(&[3, 4, 5], 12).unwrap(), vec![vec![0, 1, 2]]);
        assert!(matches!(
            dynamic_batches(&[3, 20], 10),
            Err(GetError::BudgetExceeded { graph: 1, .. })
        ));
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::vector(vec![1.0, -1.0]));
        let mut adam = Adam::new(&store);
        adam.step(&mut store, &[vec![0.5, -2.0]], 0.1).unwrap();
        let w = store.by_name("w").unwrap().data();
        assert!((w[0] - 0.9).abs() < 1e-7 && (w[1] + 0.9).abs() < 1e-7);
    }

    #[test]
    fn config_rules() {
        assert!(TrainConfig::default().validate().is_ok());
        let c = TrainConfig {
            lr: 1e-5,
            final_lr: 1e-4,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            task: TaskType::Classification,
            flavors: vec![Flavor::PpaLike, Flavor::LbaLike],
            ..Default::default()
        };
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<TrainConfig>(r#"{"dh": 3}"#).is_err());
        let c: TrainConfig = serde_json::from_str(r#"{"d_h": 16, "flavors": ["lba-like"]}"#).unwrap();
        assert_eq!((c.d_h, c.flavors[0]), (16, Flavor::LbaLike));
    }

    #[test]
    fn smoke_run_two_epochs() {
        let cfg = TrainConfig {
            d_h: 8,
            d_r: 4,
            n_layers: 1,
            max_epoch: 2,
            n_train: 8,
            n_valid: 4,
            n_test: 4,
            max_n_vertex: 40,
            ..Default::default()
        };
        let splits = make_splits(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = train(&cfg, &splits, Some(dir.path())).unwrap();
        assert_eq!(out.history.len(), 2);
        assert!(out.history.iter().all(|r| r.train_loss.is_finite() && r.val_loss.is_finite()));
        assert_eq!(out.selected_epoch, 1);
        let csv = fs::read_to_string(dir.path().join("history.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(dir.path().join("final.bin").exists());

        let again = train(&cfg, &splits, None).unwrap();
        assert_eq!(again.model.store, out.model.store);
    }

    #[test]
    fn jsonl_round_trip() {
        let cfg = TrainConfig {
            task: TaskType::Classification,
            flavors: vec![Flavor::LbaLike],
            n_train: 3,
            n_valid: 1,
            n_test: 2,
            ..Default::default()
        };
        let splits = make_splits(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_jsonl(&path, &splits.train).unwrap();
        assert_eq!(read_jsonl(&path).unwrap(), splits.train);
    }
}
