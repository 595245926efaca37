use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use get_core::audit::{run_audit, AuditOptions, GRAD_MAX_COORDS};
use get_core::complex_json::{graph_from_json, graph_to_json};
use get_core::model::{Model, ModelConfig};
use get_core::pdb::{assemble_complex, parse_pdb_with, AssembleOptions, PairingRule, ParseOptions};
use get_core::repr::{extract_interface, to_atom_level, to_block_level, ComplexGraph, DEFAULT_K};
use get_core::trainer::{
    evaluate, make_splits, prepare, read_jsonl, train, write_atomic, write_jsonl, TrainConfig,
};

#[derive(Parser)]
#[command(name = "get", version, about = "Generalist Equivariant Transformer toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Unified,
    Atom,
    Block,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pairing {
    /// One molecule per input file.
    PerStructure,
    /// Residues against hetero atoms.
    ProteinVsHetero,
    /// One molecule per chain.
    PerChain,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Task {
    PpaLike,
    LbaLike,
    LepLike,
}

impl Task {
    fn name(self) -> &'static str {
        match self {
            Task::PpaLike => "ppa-like",
            Task::LbaLike => "lba-like",
            Task::LepLike => "lep-like",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a complex graph from PDB files or a graph JSON file.
    Encode {
        /// Input file (.pdb or .json); repeat for one structure per molecule.
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Keep only blocks within this distance (Å) of another molecule.
        #[arg(long, num_args = 0..=1, default_missing_value = "6.0")]
        interface: Option<f64>,
        /// Neighbors per block; defaults to 9, or the k stored in a JSON input.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value = "unified")]
        level: Level,
        /// Keep HOH/WAT residues.
        #[arg(long)]
        keep_waters: bool,
        /// Defaults to per-structure for several files and protein-vs-hetero
        /// for one.
        #[arg(long, value_enum)]
        pairing: Option<Pairing>,
    },
    /// Check equivariance, permutation invariance and gradients of a model.
    Audit {
        #[arg(long)]
        graph: PathBuf,
        /// Parameter file; without it a model is initialized from --config.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, conflicts_with = "params")]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the JSON report (default: stdout after the table).
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        no_gradients: bool,
        #[arg(long, default_value_t = GRAD_MAX_COORDS)]
        grad_coords: usize,
    },
    /// Initialize a parameter file.
    Init {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on synthetic data.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the synthetic train/valid/test splits of a training config.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a parameter file on a JSONL dataset.
    Eval {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn encode(
    inputs: &[PathBuf],
    interface: Option<f64>,
    k: Option<usize>,
    level: Level,
    keep_waters: bool,
    pairing: Option<Pairing>,
) -> Result<ComplexGraph> {
    let graph = if inputs.iter().any(|p| is_json(p)) {
        if inputs.len() != 1 {
            bail!("a graph JSON input cannot be combined with other inputs");
        }
        let g = graph_from_json(&read(&inputs[0])?)
            .with_context(|| format!("loading {}", inputs[0].display()))?;
        let g = match k {
            Some(k) if k != g.k() => g.with_k(k)?,
            _ => g,
        };
        match interface {
            Some(c) => extract_interface(&g, c)?,
            None => g,
        }
    } else {
        let opts = ParseOptions { keep_waters };
        let structures = inputs
            .iter()
            .map(|p| parse_pdb_with(&read(p)?, &opts).with_context(|| format!("parsing {}", p.display())))
            .collect::<Result<Vec<_>>>()?;
        let rule = match pairing {
            Some(Pairing::PerStructure) => PairingRule::PerStructure,
            Some(Pairing::ProteinVsHetero) => PairingRule::ProteinVsHetero,
            Some(Pairing::PerChain) => PairingRule::PerChain,
            None if inputs.len() > 1 => PairingRule::PerStructure,
            None => PairingRule::ProteinVsHetero,
        };
        let opts = AssembleOptions {
            k: k.unwrap_or(DEFAULT_K),
            interface,
            allow_single: true,
        };
        assemble_complex(&structures, rule, &opts)?
    };
    Ok(match level {
        Level::Unified => graph,
        Level::Atom => to_atom_level(&graph)?,
        Level::Block => to_block_level(&graph)?,
    })
}

fn load_model(params: Option<&Path>, config: Option<&Path>, seed: u64) -> Result<Model> {
    if let Some(p) = params {
        return Model::load(p).with_context(|| format!("loading {}", p.display()));
    }
    let cfg: ModelConfig = match config {
        Some(c) => read_config(c)?,
        None => ModelConfig::default(),
    };
    Ok(Model::init(cfg, seed)?)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Encode {
            inputs,
            out,
            interface,
            k,
            level,
            keep_waters,
            pairing,
        } => {
            let g = encode(&inputs, interface, k, level, keep_waters, pairing)?;
            write_atomic(&out, graph_to_json(&g).as_bytes())?;
            eprintln!(
                "{} blocks, {} atoms, {} edges -> {}",
                g.n_blocks(),
                g.n_atoms(),
                g.edges().len(),
                out.display()
            );
        }
        Command::Audit {
            graph,
            params,
            config,
            trials,
            seed,
            report,
            no_gradients,
            grad_coords,
        } => {
            let g = graph_from_json(&read(&graph)?)
                .with_context(|| format!("loading {}", graph.display()))?;
            let model = load_model(params.as_deref(), config.as_deref(), seed)?;
            let opts = AuditOptions {
                trials,
                seed,
                gradients: !no_gradients,
                grad_max_coords: grad_coords,
            };
            let r = run_audit(&model, &g, &opts)?;
            print!("{}", r.table());
            match report {
                Some(path) => write_atomic(&path, r.to_json().as_bytes())?,
                None => println!("{}", r.to_json()),
            }
            if !r.passed() {
                eprintln!("audit failed");
                return Ok(ExitCode::from(2));
            }
        }
        Command::Init { config, seed, out } => {
            let model = load_model(None, config.as_deref(), seed)?;
            model.save(&out)?;
            eprintln!(
                "{} parameters in {} tensors -> {}",
                model.store.total_elements(),
                model.store.len(),
                out.display()
            );
        }
        Command::Train { config, out } => {
            let cfg: TrainConfig = read_config(&config)?;
            cfg.validate()?;
            let splits = make_splits(&cfg)?;
            let outcome = train(&cfg, &splits, Some(&out))?;
            write_jsonl(&out.join("test.jsonl"), &splits.test)?;
            let test = evaluate(&outcome.model, &prepare(&splits.test, &outcome.model.config)?)?;
            let summary = serde_json::json!({
                "selected_epoch": outcome.selected_epoch,
                "kept_epochs": outcome.kept,
                "test_loss": test.loss,
                "test_metrics": test.metrics,
            });
            let text = serde_json::to_string_pretty(&summary)?;
            write_atomic(&out.join("metrics.json"), text.as_bytes())?;
            println!("{text}");
        }
        Command::Generate { config, out } => {
            let cfg: TrainConfig = read_config(&config)?;
            let splits = make_splits(&cfg)?;
            fs::create_dir_all(&out)?;
            write_jsonl(&out.join("train.jsonl"), &splits.train)?;
            write_jsonl(&out.join("valid.jsonl"), &splits.valid)?;
            write_jsonl(&out.join("test.jsonl"), &splits.test)?;
        }
        Command::Eval {
            params,
            data,
            task,
            out,
        } => {
            let model = load_model(Some(&params), None, 0)?;
            let samples = read_jsonl(&data).with_context(|| format!("reading {}", data.display()))?;
            if samples.len() < 2 {
                bail!("evaluation needs at least two samples");
            }
            let classification = task == Task::LepLike;
            if samples.iter().any(|s| s.reference.is_some() != classification) {
                bail!("{} does not match the samples in {}", task.name(), data.display());
            }
            let mut prepared = prepare(&samples, &model.config)?;
            if !classification {
                let head = match model.config.head_index(task.name()) {
                    Some(h) => h,
                    None if model.config.regression_heads.len() == 1 => 0,
                    None => bail!(
                        "model has no {} head (heads: {:?})",
                        task.name(),
                        model.config.regression_heads
                    ),
                };
                for p in &mut prepared {
                    p.head = head;
                }
            }
            let ev = evaluate(&model, &prepared)?;
            let text = serde_json::to_string_pretty(&serde_json::json!({
                "task": task.name(),
                "n": prepared.len(),
                "loss": ev.loss,
                "metrics": ev.metrics,
            }))?;
            if let Some(path) = out {
                write_atomic(&path, text.as_bytes())?;
            }
            println!("{text}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
