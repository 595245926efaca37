//! Minimal PDB reader and writer (ATOM/HETATM/TER/END records in fixed
//! columns) and assembly of parsed structures into complex graphs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{GetError, Result};
use crate::repr::{extract_interface, Atom, Block, ComplexGraph, DEFAULT_K};
use crate::vocab::{BlockType, Element, PosCode, UNK};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdbAtom {
    pub name: String,
    /// Canonical element symbol, or `[UNK]`.
    pub element: String,
    pub xyz: [f64; 3],
}

impl PdbAtom {
    pub fn element(&self) -> Element {
        element_from_symbol(&self.element)
    }

    pub fn pos_code(&self) -> PosCode {
        pos_code_for_atom_name(&self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residue {
    pub name: String,
    pub seq: i32,
    pub icode: String,
    pub atoms: Vec<PdbAtom>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub id: String,
    pub residues: Vec<Residue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeteroAtom {
    pub chain: String,
    pub residue_name: String,
    pub seq: i32,
    pub atom: PdbAtom,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedStructure {
    pub chains: Vec<Chain>,
    pub hetero: Vec<HeteroAtom>,
}

impl ParsedStructure {
    pub fn n_residues(&self) -> usize {
        self.chains.iter().map(|c| c.residues.len()).sum()
    }

    pub fn n_atoms(&self) -> usize {
        self.chains
            .iter()
            .flat_map(|c| &c.residues)
            .map(|r| r.atoms.len())
            .sum::<usize>()
            + self.hetero.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParseOptions {
    pub keep_waters: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { keep_waters: false }
    }
}

fn element_from_symbol(s: &str) -> Element {
    if s == UNK {
        Element::UNK
    } else {
        Element::from_symbol(s)
    }
}

/// Backbone names get their own codes; other names use the remoteness
/// letter following the element letter (`CB` → beta, `HA` → alpha,
/// `1HG2` → gamma).
pub fn pos_code_for_atom_name(name: &str) -> PosCode {
    let name = name.trim();
    match name {
        "N" => return PosCode::BackboneN,
        "CA" => return PosCode::BackboneCa,
        "C" => return PosCode::BackboneC,
        "O" | "OXT" => return PosCode::BackboneO,
        _ => {}
    }
    let stripped = name.trim_start_matches(|c: char| c.is_ascii_digit());
    stripped
        .chars()
        .nth(1)
        .map_or(PosCode::Unk, PosCode::from_remoteness)
}

/// Element guess from the 4-character atom name field: a leading blank or
/// digit means a one-letter element in the second column; otherwise a
/// recognized two-letter symbol wins over the first letter.
fn element_from_name(field: &str) -> Element {
    let chars: Vec<char> = field.chars().collect();
    let first = chars.first().copied().unwrap_or(' ');
    if first == ' ' || first.is_ascii_digit() {
        return chars
            .get(1)
            .map_or(Element::UNK, |c| Element::from_symbol(&c.to_string()));
    }
    if let Some(second) = chars.get(1).filter(|c| c.is_ascii_alphabetic()) {
        let two = Element::from_symbol(&format!("{first}{second}"));
        if two.is_known() && two.symbol().len() == 2 {
            return two;
        }
    }
    Element::from_symbol(&first.to_string())
}

fn column(line: &str, from: usize, to: usize) -> &str {
    // 1-based inclusive columns; short lines read as blanks.
    let start = (from - 1).min(line.len());
    let end = to.min(line.len());
    &line[start..end]
}

fn parse_coord(line: &str, n: usize, from: usize, to: usize, axis: &str) -> Result<f64> {
    let field = column(line, from, to).trim();
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(GetError::Parse {
            line: n,
            message: format!("malformed {axis} coordinate {field:?}"),
        }),
    }
}

pub fn parse_pdb_subset(text: &str) -> Result<ParsedStructure> {
    parse_pdb_with(text, &ParseOptions::default())
}

pub fn parse_pdb_with(text: &str, opts: &ParseOptions) -> Result<ParsedStructure> {
    let mut out = ParsedStructure::default();
    for (idx, raw) in text.lines().enumerate() {
        let n = idx + 1;
        if !raw.is_ascii() {
            return Err(GetError::Parse {
                line: n,
                message: "non-ASCII characters".into(),
            });
        }
        let line = raw.trim_end_matches('\r');
        let record = column(line, 1, 6).trim_end();
        let hetero = match record {
            "ATOM" => false,
            "HETATM" => true,
            "END" | "ENDMDL" => break,
            _ => continue,
        };
        let altloc = column(line, 17, 17);
        if !(altloc.trim().is_empty() || altloc == "A") {
            continue;
        }
        let res_name = column(line, 18, 20).trim().to_string();
        if !opts.keep_waters && (res_name == "HOH" || res_name == "WAT") {
            continue;
        }
        let name_field = format!("{:<4}", column(line, 13, 16));
        let seq_field = column(line, 23, 26).trim();
        let seq = if seq_field.is_empty() {
            0
        } else {
            seq_field.parse::<i32>().map_err(|_| GetError::Parse {
                line: n,
                message: format!("malformed residue number {seq_field:?}"),
            })?
        };
        let xyz = [
            parse_coord(line, n, 31, 38, "x")?,
            parse_coord(line, n, 39, 46, "y")?,
            parse_coord(line, n, 47, 54, "z")?,
        ];
        let element_field = column(line, 77, 78).trim();
        let element = if element_field.is_empty() {
            element_from_name(&name_field)
        } else {
            Element::from_symbol(element_field)
        };
        let atom = PdbAtom {
            name: name_field.trim().to_string(),
            element: element.symbol().to_string(),
            xyz,
        };
        let chain_id = column(line, 22, 22).trim().to_string();
        if hetero {
            out.hetero.push(HeteroAtom {
                chain: chain_id,
                residue_name: res_name,
                seq,
                atom,
            });
            continue;
        }
        let icode = column(line, 27, 27).trim().to_string();
        let chain = match out.chains.iter().position(|c| c.id == chain_id) {
            Some(i) => &mut out.chains[i],
            None => {
                out.chains.push(Chain {
                    id: chain_id,
                    residues: Vec::new(),
                });
                out.chains.last_mut().expect("just pushed")
            }
        };
        match chain.residues.last_mut() {
            Some(r) if r.seq == seq && r.icode == icode && r.name == res_name => r.atoms.push(atom),
            _ => chain.residues.push(Residue {
                name: res_name,
                seq,
                icode,
                atoms: vec![atom],
            }),
        }
    }
    if out.n_atoms() == 0 {
        return Err(GetError::EmptyStructure);
    }
    Ok(out)
}

fn name_field(name: &str, element: &str) -> String {
    if name.len() < 4 && element.len() <= 1 || (element == UNK && name.len() < 4) {
        format!(" {name:<3}")
    } else {
        format!("{name:<4}")
    }
}

fn write_record(
    out: &mut String,
    record: &str,
    serial: usize,
    atom: &PdbAtom,
    res_name: &str,
    chain: &str,
    seq: i32,
    icode: &str,
) {
    let element = if atom.element == UNK { "X" } else { &atom.element };
    let _ = writeln!(
        out,
        "{record:<6}{serial:>5} {name}{alt:1}{res:>3} {chain:1}{seq:>4}{icode:1}   {x:>8.3}{y:>8.3}{z:>8.3}{occ:>6.2}{b:>6.2}          {element:>2}",
        name = name_field(&atom.name, &atom.element),
        alt = "",
        res = res_name,
        x = atom.xyz[0],
        y = atom.xyz[1],
        z = atom.xyz[2],
        occ = 1.0,
        b = 0.0,
    );
}

/// Writes ATOM records chain by chain (each closed by TER), then HETATM
/// records, then END. Coordinates are written with three decimals.
pub fn write_pdb(s: &ParsedStructure) -> String {
    let mut out = String::new();
    let mut serial = 1;
    for chain in &s.chains {
        for r in &chain.residues {
            for a in &r.atoms {
                write_record(&mut out, "ATOM", serial, a, &r.name, &chain.id, r.seq, &r.icode);
                serial += 1;
            }
        }
        out.push_str("TER\n");
    }
    for h in &s.hetero {
        write_record(&mut out, "HETATM", serial, &h.atom, &h.residue_name, &h.chain, h.seq, "");
        serial += 1;
    }
    out.push_str("END\n");
    out
}

/// How parsed structures are split into molecules.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairingRule {
    /// One molecule per input structure.
    PerStructure,
    /// All residues form one molecule, all hetero atoms another.
    ProteinVsHetero,
    /// One molecule per chain id; hetero atoms join their chain's molecule.
    PerChain,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssembleOptions {
    pub k: usize,
    pub interface: Option<f64>,
    /// Accept a single molecule group (only without interface extraction).
    pub allow_single: bool,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            interface: None,
            allow_single: false,
        }
    }
}

fn residue_block(r: &Residue, molecule: u32) -> Block {
    Block::new(
        BlockType::residue(&r.name),
        r.atoms
            .iter()
            .map(|a| Atom::new(a.element(), a.pos_code(), a.xyz))
            .collect(),
        molecule,
    )
}

fn hetero_block(h: &HeteroAtom, molecule: u32) -> Block {
    let element = h.atom.element();
    Block::new(
        BlockType::small_molecule(element),
        vec![Atom::new(element, PosCode::Blank, h.atom.xyz)],
        molecule,
    )
}

/// Residues become blocks, hetero atoms become singleton blocks. Blocks
/// are ordered by molecule so each molecule is one contiguous run.
pub fn assemble_complex(
    structures: &[ParsedStructure],
    rule: PairingRule,
    opts: &AssembleOptions,
) -> Result<ComplexGraph> {
    // (group key) -> blocks, in first-seen order of keys.
    let mut groups: Vec<(String, Vec<Block>)> = Vec::new();
    let slot = |key: String, groups: &mut Vec<(String, Vec<Block>)>| -> usize {
        match groups.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                groups.push((key, Vec::new()));
                groups.len() - 1
            }
        }
    };
    for (si, s) in structures.iter().enumerate() {
        for chain in &s.chains {
            let key = match rule {
                PairingRule::PerStructure => format!("s{si}"),
                PairingRule::ProteinVsHetero => "protein".to_string(),
                PairingRule::PerChain => format!("s{si}:{}", chain.id),
            };
            let g = slot(key, &mut groups);
            for r in &chain.residues {
                let b = residue_block(r, g as u32);
                groups[g].1.push(b);
            }
        }
        for h in &s.hetero {
            let key = match rule {
                PairingRule::PerStructure => format!("s{si}"),
                PairingRule::ProteinVsHetero => "hetero".to_string(),
                PairingRule::PerChain => format!("s{si}:{}", h.chain),
            };
            let g = slot(key, &mut groups);
            let b = hetero_block(h, g as u32);
            groups[g].1.push(b);
        }
    }
    let groups: Vec<_> = groups.into_iter().filter(|(_, b)| !b.is_empty()).collect();
    let min_groups = if opts.allow_single && opts.interface.is_none() { 1 } else { 2 };
    if groups.len() < min_groups {
        return Err(GetError::TooFewMolecules(groups.len()));
    }
    let blocks: Vec<Block> = groups
        .into_iter()
        .enumerate()
        .flat_map(|(id, (_, blocks))| {
            blocks.into_iter().map(move |mut b| {
                b.molecule_id = id as u32;
                b
            })
        })
        .collect();
    let g = ComplexGraph::new(blocks, opts.k)?;
    match opts.interface {
        Some(cutoff) => extract_interface(&g, cutoff),
        None => Ok(g),
    }
}

/// Counts residues and hetero atoms per chain, for summaries.
pub fn chain_summary(s: &ParsedStructure) -> BTreeMap<String, (usize, usize)> {
    let mut m: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for c in &s.chains {
        m.entry(c.id.clone()).or_default().0 += c.residues.len();
    }
    for h in &s.hetero {
        m.entry(h.chain.clone()).or_default().1 += 1;
    }
    m
}
