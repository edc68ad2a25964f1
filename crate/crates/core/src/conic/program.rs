use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::ops::Range;

use super::svec::tri_len;

/// One cone in the product cone partitioning the variable vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeBlock {
    /// `k` nonnegative scalars.
    NonNeg(usize),
    /// `(t, u)` with `||u|| <= t`, total dimension `d`.
    SecondOrder(usize),
    /// Symmetric PSD matrix of the given side, stored with [`svec`](super::svec::svec).
    Psd(usize),
}

impl ConeBlock {
    /// Scalar slots occupied by the block.
    pub fn len(&self) -> usize {
        match *self {
            ConeBlock::NonNeg(k) => k,
            ConeBlock::SecondOrder(d) => d,
            ConeBlock::Psd(s) => tri_len(s),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Barrier degree: the value of `<e, e>` for the block identity.
    pub fn degree(&self) -> usize {
        match *self {
            ConeBlock::NonNeg(k) => k,
            ConeBlock::SecondOrder(_) => 1,
            ConeBlock::Psd(s) => s,
        }
    }

    fn min_ok(&self) -> bool {
        match *self {
            ConeBlock::NonNeg(k) => k >= 1,
            ConeBlock::SecondOrder(d) => d >= 2,
            ConeBlock::Psd(s) => s >= 1,
        }
    }
}

impl fmt::Display for ConeBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ConeBlock::NonNeg(k) => write!(f, "nonneg {k}"),
            ConeBlock::SecondOrder(d) => write!(f, "soc {d}"),
            ConeBlock::Psd(s) => write!(f, "psd {s}"),
        }
    }
}

/// A sparse equality row `sum_k coef_k * x[idx_k] = rhs`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    pub entries: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl SparseRow {
    pub fn new(entries: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { entries, rhs }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.entries.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// `min c'x  s.t.  Ax = b,  x in K_1 x ... x K_p`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConeProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub eq_rows: Vec<SparseRow>,
    pub blocks: Vec<ConeBlock>,
    /// Semantic names for index ranges, used by model extraction and dumps.
    pub names: BTreeMap<String, Range<usize>>,
}

/// A violated structural invariant of a [`ConeProgram`].
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    BlockSizeMismatch {
        blocks_total: usize,
        num_vars: usize,
    },
    BlockTooSmall {
        block: usize,
        kind: ConeBlock,
    },
    ObjectiveLength {
        len: usize,
        num_vars: usize,
    },
    IndexOutOfRange {
        row: usize,
        index: usize,
    },
    DuplicateEntry {
        row: usize,
        index: usize,
    },
    NonFinite {
        row: Option<usize>,
        index: usize,
    },
    NameOutOfRange {
        name: String,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::BlockSizeMismatch {
                blocks_total,
                num_vars,
            } => write!(
                f,
                "block sizes sum to {blocks_total} but num_vars is {num_vars}"
            ),
            Diagnostic::BlockTooSmall { block, kind } => {
                write!(f, "block {block} ({kind}) is below the minimum size")
            }
            Diagnostic::ObjectiveLength { len, num_vars } => {
                write!(f, "objective has length {len}, expected {num_vars}")
            }
            Diagnostic::IndexOutOfRange { row, index } => {
                write!(
                    f,
                    "row {row} references index {index} outside the variable vector"
                )
            }
            Diagnostic::DuplicateEntry { row, index } => {
                write!(
                    f,
                    "row {row} has more than one coefficient for index {index}"
                )
            }
            Diagnostic::NonFinite {
                row: Some(r),
                index,
            } => {
                write!(f, "row {r} has a non-finite value at index {index}")
            }
            Diagnostic::NonFinite { row: None, index } => {
                write!(f, "objective has a non-finite value at index {index}")
            }
            Diagnostic::NameOutOfRange { name } => {
                write!(f, "named range '{name}' lies outside the variable vector")
            }
        }
    }
}

impl ConeProgram {
    /// Empty program with no variables.
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a cone block and returns the index range of its slots.
    pub fn add_block(&mut self, block: ConeBlock) -> Range<usize> {
        let start = self.num_vars;
        self.num_vars += block.len();
        self.objective.resize(self.num_vars, 0.0);
        self.blocks.push(block);
        start..self.num_vars
    }

    /// Appends a named cone block.
    pub fn add_named_block(&mut self, name: &str, block: ConeBlock) -> Range<usize> {
        let range = self.add_block(block);
        self.names.insert(name.to_string(), range.clone());
        range
    }

    pub fn add_row(&mut self, entries: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.eq_rows.push(SparseRow::new(entries, rhs));
        self.eq_rows.len() - 1
    }

    /// Start offset of every block.
    pub fn block_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.blocks.len());
        let mut acc = 0;
        for b in &self.blocks {
            off.push(acc);
            acc += b.len();
        }
        off
    }

    pub fn barrier_degree(&self) -> usize {
        self.blocks.iter().map(ConeBlock::degree).sum()
    }

    pub fn primal_objective(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Checks every structural invariant; an empty result means well-formed.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let blocks_total: usize = self.blocks.iter().map(ConeBlock::len).sum();
        if blocks_total != self.num_vars {
            out.push(Diagnostic::BlockSizeMismatch {
                blocks_total,
                num_vars: self.num_vars,
            });
        }
        for (block, kind) in self.blocks.iter().enumerate() {
            if !kind.min_ok() {
                out.push(Diagnostic::BlockTooSmall { block, kind: *kind });
            }
        }
        if self.objective.len() != self.num_vars {
            out.push(Diagnostic::ObjectiveLength {
                len: self.objective.len(),
                num_vars: self.num_vars,
            });
        }
        for (index, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                out.push(Diagnostic::NonFinite { row: None, index });
            }
        }
        for (row, r) in self.eq_rows.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for &(index, a) in &r.entries {
                if index >= self.num_vars {
                    out.push(Diagnostic::IndexOutOfRange { row, index });
                } else if !seen.insert(index) {
                    out.push(Diagnostic::DuplicateEntry { row, index });
                }
                if !a.is_finite() {
                    out.push(Diagnostic::NonFinite {
                        row: Some(row),
                        index,
                    });
                }
            }
            if !r.rhs.is_finite() {
                out.push(Diagnostic::NonFinite {
                    row: Some(row),
                    index: usize::MAX,
                });
            }
        }
        for (name, range) in &self.names {
            if range.end > self.num_vars || range.start > range.end {
                out.push(Diagnostic::NameOutOfRange { name: name.clone() });
            }
        }
        out
    }

    /// Plain-text dump for diffing programs across implementations.
    ///
    /// Reals are printed with 17 significant digits so the dump is lossless.
    pub fn dump_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "num_vars {}", self.num_vars);
        let _ = writeln!(s, "blocks {}", self.blocks.len());
        for b in &self.blocks {
            let _ = writeln!(s, "  {b}");
        }
        for (name, r) in &self.names {
            let _ = writeln!(s, "name {name} {} {}", r.start, r.end);
        }
        let nz: Vec<_> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .collect();
        let _ = writeln!(s, "objective {}", nz.len());
        for (j, c) in nz {
            let _ = writeln!(s, "  {j} {c:.16e}");
        }
        let _ = writeln!(s, "rows {}", self.eq_rows.len());
        for r in &self.eq_rows {
            let _ = write!(s, "  rhs {:.16e} |", r.rhs);
            for &(j, a) in &r.entries {
                let _ = write!(s, " {j}:{a:.16e}");
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_lp() -> ConeProgram {
        let mut p = ConeProgram::new();
        p.add_block(ConeBlock::NonNeg(2));
        p.objective[0] = 1.0;
        p.add_row(vec![(0, 1.0), (1, 1.0)], 1.0);
        p
    }

    #[test]
    fn well_formed_lp_has_no_diagnostics() {
        assert!(small_lp().validate().is_empty());
    }

    #[test]
    fn block_sum_mismatch() {
        let mut p = small_lp();
        p.num_vars = 3;
        p.objective.push(0.0);
        let d = p.validate();
        assert_eq!(d.len(), 1);
        assert!(matches!(
            d[0],
            Diagnostic::BlockSizeMismatch {
                blocks_total: 2,
                num_vars: 3
            }
        ));
    }

    #[test]
    fn index_out_of_range() {
        let mut p = small_lp();
        p.add_row(vec![(2, 1.0)], 0.0);
        let d = p.validate();
        assert_eq!(d, vec![Diagnostic::IndexOutOfRange { row: 1, index: 2 }]);
    }

    #[test]
    fn duplicate_entry() {
        let mut p = small_lp();
        p.add_row(vec![(0, 1.0), (0, 2.0)], 0.0);
        assert_eq!(
            p.validate(),
            vec![Diagnostic::DuplicateEntry { row: 1, index: 0 }]
        );
    }

    #[test]
    fn tiny_soc_rejected() {
        let mut p = ConeProgram::new();
        p.add_block(ConeBlock::SecondOrder(1));
        assert_eq!(p.validate().len(), 1);
    }

    #[test]
    fn dump_lists_blocks_and_rows() {
        let d = small_lp().dump_text();
        assert!(d.contains("nonneg 2"));
        assert!(d.contains("rows 1"));
        assert!(d.contains("0:1.0000000000000000e0"));
    }
}
