//! Categorical vocabularies: atom elements, block types, atom position
//! codes and edge kinds. Index 0 of every embedding table is `[UNK]`.

use std::fmt;

pub const UNK: &str = "[UNK]";
pub const BLANK: &str = "[BLANK]";

const ELEMENTS: [&str; 22] = [
    "H", "B", "C", "N", "O", "F", "Na", "Mg", "P", "S", "Cl", "K", "Ca", "Mn", "Fe", "Co", "Ni",
    "Cu", "Zn", "Se", "Br", "I",
];

pub const RESIDUES: [&str; 20] = [
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE", "LEU", "LYS", "MET",
    "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Element(u8);

impl Element {
    pub const UNK: Element = Element(0);
    pub const VOCAB: usize = ELEMENTS.len() + 1;

    /// Case-insensitive symbol lookup; unknown symbols map to `[UNK]`.
    pub fn from_symbol(sym: &str) -> Self {
        let sym = sym.trim();
        ELEMENTS
            .iter()
            .position(|e| e.eq_ignore_ascii_case(sym))
            .map_or(Self::UNK, |i| Element(i as u8 + 1))
    }

    /// Out-of-range ids map to `[UNK]`.
    pub fn from_id(id: usize) -> Self {
        if id < Self::VOCAB {
            Element(id as u8)
        } else {
            Self::UNK
        }
    }

    pub fn id(self) -> usize {
        self.0 as usize
    }

    pub fn is_known(self) -> bool {
        self.0 != 0
    }

    pub fn symbol(self) -> &'static str {
        match self.0 {
            0 => UNK,
            i => ELEMENTS[i as usize - 1],
        }
    }

    pub fn all_known() -> impl Iterator<Item = Element> {
        (1..Self::VOCAB).map(|i| Element(i as u8))
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Residue types for protein blocks, one type per element for
/// small-molecule (single-atom) blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BlockType(u8);

impl BlockType {
    pub const UNK: BlockType = BlockType(0);
    pub const VOCAB: usize = 1 + RESIDUES.len() + ELEMENTS.len();

    pub fn residue(name: &str) -> Self {
        let name = name.trim();
        RESIDUES
            .iter()
            .position(|r| r.eq_ignore_ascii_case(name))
            .map_or(Self::UNK, |i| BlockType(i as u8 + 1))
    }

    pub fn small_molecule(element: Element) -> Self {
        if element.is_known() {
            BlockType((RESIDUES.len() + element.id()) as u8)
        } else {
            Self::UNK
        }
    }

    /// Parses the canonical name: a residue code or an element symbol.
    pub fn from_name(name: &str) -> Self {
        let r = Self::residue(name);
        if r != Self::UNK {
            return r;
        }
        Self::small_molecule(Element::from_symbol(name))
    }

    pub fn from_id(id: usize) -> Self {
        if id < Self::VOCAB {
            BlockType(id as u8)
        } else {
            Self::UNK
        }
    }

    pub fn id(self) -> usize {
        self.0 as usize
    }

    pub fn is_residue(self) -> bool {
        (1..=RESIDUES.len()).contains(&self.id())
    }

    pub fn name(self) -> &'static str {
        let i = self.id();
        if i == 0 {
            UNK
        } else if i <= RESIDUES.len() {
            RESIDUES[i - 1]
        } else {
            Element::from_id(i - RESIDUES.len()).symbol()
        }
    }
}

impl fmt::Display for BlockType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where an atom sits inside its block. Side-chain atoms use the Greek
/// remoteness letter (bonds from the alpha carbon); backbone atoms have their
/// own codes; atoms of small molecules are `[BLANK]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum PosCode {
    #[default]
    Unk,
    Blank,
    Alpha,
    Beta,
    Gamma,
    Delta,
    Epsilon,
    Zeta,
    Eta,
    BackboneN,
    /// The alpha carbon itself.
    BackboneCa,
    BackboneC,
    BackboneO,
}

const POS_CODES: [(PosCode, &str); 13] = [
    (PosCode::Unk, UNK),
    (PosCode::Blank, BLANK),
    (PosCode::Alpha, "alpha"),
    (PosCode::Beta, "beta"),
    (PosCode::Gamma, "gamma"),
    (PosCode::Delta, "delta"),
    (PosCode::Epsilon, "epsilon"),
    (PosCode::Zeta, "zeta"),
    (PosCode::Eta, "eta"),
    (PosCode::BackboneN, "N"),
    (PosCode::BackboneCa, "CA"),
    (PosCode::BackboneC, "C"),
    (PosCode::BackboneO, "O"),
];

impl PosCode {
    pub const VOCAB: usize = POS_CODES.len();

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Self {
        POS_CODES.get(id).map_or(PosCode::Unk, |(c, _)| *c)
    }

    pub fn name(self) -> &'static str {
        POS_CODES[self.id()].1
    }

    pub fn from_name(name: &str) -> Self {
        POS_CODES
            .iter()
            .find(|(_, n)| *n == name)
            .map_or(PosCode::Unk, |(c, _)| *c)
    }

    /// Greek remoteness letter as used in PDB atom names (`B` in `CB`).
    pub fn from_remoteness(letter: char) -> Self {
        match letter.to_ascii_uppercase() {
            'A' => PosCode::Alpha,
            'B' => PosCode::Beta,
            'G' => PosCode::Gamma,
            'D' => PosCode::Delta,
            'E' => PosCode::Epsilon,
            'Z' => PosCode::Zeta,
            'H' => PosCode::Eta,
            _ => PosCode::Unk,
        }
    }
}

impl fmt::Display for PosCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    SelfLoop,
    Intra,
    Inter,
}

impl EdgeKind {
    pub const VOCAB: usize = 3;

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::SelfLoop => "self",
            EdgeKind::Intra => "intra",
            EdgeKind::Inter => "inter",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "self" => Some(EdgeKind::SelfLoop),
            "intra" => Some(EdgeKind::Intra),
            "inter" => Some(EdgeKind::Inter),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_lookup() {
        assert_eq!(Element::from_symbol("CL").symbol(), "Cl");
        assert_eq!(Element::from_symbol("fe").symbol(), "Fe");
        assert_eq!(Element::from_symbol("Xx"), Element::UNK);
        assert_eq!(Element::from_id(999), Element::UNK);
        assert_eq!(Element::all_known().count(), Element::VOCAB - 1);
    }

    #[test]
    fn block_type_names_round_trip() {
        for id in 0..BlockType::VOCAB {
            let b = BlockType::from_id(id);
            assert_eq!(BlockType::from_name(b.name()), b, "{}", b.name());
        }
        assert!(BlockType::residue("GLY").is_residue());
        assert!(!BlockType::small_molecule(Element::from_symbol("C")).is_residue());
        assert_eq!(BlockType::residue("HOH"), BlockType::UNK);
    }

    #[test]
    fn pos_code_names_round_trip() {
        for id in 0..PosCode::VOCAB {
            let c = PosCode::from_id(id);
            assert_eq!(c.id(), id);
            assert_eq!(PosCode::from_name(c.name()), c);
        }
        assert_eq!(PosCode::from_id(77), PosCode::Unk);
        assert_eq!(PosCode::from_remoteness('g'), PosCode::Gamma);
        assert_eq!(PosCode::from_remoteness('X'), PosCode::Unk);
    }
}
