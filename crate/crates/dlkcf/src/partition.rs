//! Overlapping sections of a freeway, their one-hop path topology and the
//! overlap selectors used to compare neighboring estimates.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::FilterError;

/// A contiguous block of cells assigned to one agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    /// Global index of the first cell.
    pub start: usize,
    /// Number of cells.
    pub len: usize,
}

impl Section {
    /// Global index one past the last cell.
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    /// Global cell range.
    pub fn range(&self) -> Range<usize> {
        self.start..self.end()
    }
}

/// Partition of `n_total` cells into consecutive overlapping sections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionLayout {
    n_total: usize,
    sections: Vec<Section>,
}

/// Selector picking the cells of section `from` that it shares with section `to`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projection {
    /// Section whose state is restricted.
    pub from: usize,
    /// Neighbor the overlap is shared with.
    pub to: usize,
    /// Local indices (in `from`) of the shared cells, ascending.
    pub local: Vec<usize>,
    /// Dimension of the state of `from`.
    pub n_from: usize,
}

impl Projection {
    /// Number of shared cells.
    pub fn dim(&self) -> usize {
        self.local.len()
    }

    /// Dense selector matrix of shape `dim × n_from`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.n_from);
        for (row, &col) in self.local.iter().enumerate() {
            m[(row, col)] = 1.0;
        }
        m
    }

    /// Restricts a state of section `from` to the shared cells.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.local.iter().map(|&l| x[l]))
    }

    /// Embeds an overlap vector back into the state space of `from`.
    pub fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(self.n_from);
        for (row, &l) in self.local.iter().enumerate() {
            x[l] += y[row];
        }
        x
    }

    /// Columns of `m` at the shared cells, i.e. `m · selectorᵀ`.
    pub fn right_transpose(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m.select_columns(self.local.iter())
    }

    /// Rows of `m` at the shared cells, i.e. `selector · m`.
    pub fn left(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m.select_rows(self.local.iter())
    }
}

impl PartitionLayout {
    /// Uniform layout of `n_sections` sections with `n_local` cells each and
    /// `overlap` shared cells between consecutive sections.
    ///
    /// The arithmetic `n_sections·(n_local − overlap) + overlap = n_total` must
    /// hold exactly; otherwise the residual is reported.
    pub fn uniform(n_total: usize, n_sections: usize, n_local: usize, overlap: usize) -> Result<Self, FilterError> {
        if n_sections == 0 {
            return Err(FilterError::Layout("at least one section is required".into()));
        }
        if n_sections > 1 && overlap >= n_local {
            return Err(FilterError::Layout(format!("overlap {overlap} must be smaller than the section size {n_local}")));
        }
        let covered = if n_sections == 1 { n_local } else { n_sections * (n_local - overlap) + overlap };
        if covered != n_total {
            let residual = n_total as i64 - covered as i64;
            return Err(FilterError::Layout(format!(
                "{n_sections} sections of {n_local} cells with overlap {overlap} cover {covered} cells, \
                 not {n_total} (residual {residual})"
            )));
        }
        let sections = (0..n_sections).map(|i| Section { start: i * (n_local - overlap), len: n_local }).collect();
        Self::from_sections(n_total, sections)
    }

    /// Layout from explicit (possibly non-uniform) sections.
    pub fn from_sections(n_total: usize, sections: Vec<Section>) -> Result<Self, FilterError> {
        let layout = Self { n_total, sections };
        layout.validate()?;
        Ok(layout)
    }

    /// Checks section sizes, coverage and the path-graph overlap structure.
    pub fn validate(&self) -> Result<(), FilterError> {
        let s = &self.sections;
        if s.is_empty() {
            return Err(FilterError::Layout("at least one section is required".into()));
        }
        for (i, sec) in s.iter().enumerate() {
            if sec.len < 2 {
                return Err(FilterError::Layout(format!("section {i} has {} cells; at least 2 are required", sec.len)));
            }
        }
        if s[0].start != 0 || s[s.len() - 1].end() != self.n_total {
            return Err(FilterError::Layout(format!("sections must cover cells 0..{}", self.n_total)));
        }
        for i in 1..s.len() {
            if s[i].start <= s[i - 1].start || s[i].start >= s[i - 1].end() || s[i].end() <= s[i - 1].end() {
                return Err(FilterError::Layout(format!("sections {} and {i} must overlap and advance", i - 1)));
            }
            if i >= 2 && s[i].start < s[i - 2].end() {
                return Err(FilterError::Layout(format!("sections {} and {i} overlap but are not neighbors", i - 2)));
            }
        }
        Ok(())
    }

    /// Total number of cells.
    pub fn n_total(&self) -> usize {
        self.n_total
    }

    /// Number of sections.
    pub fn n_sections(&self) -> usize {
        self.sections.len()
    }

    /// All sections in upstream-to-downstream order.
    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    /// Section `i`.
    pub fn section(&self, i: usize) -> Section {
        self.sections[i]
    }

    /// Dimension of section `i`.
    pub fn dim(&self, i: usize) -> usize {
        self.sections[i].len
    }

    /// One-hop neighbors of section `i` in ascending order.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(2);
        if i > 0 {
            out.push(i - 1);
        }
        if i + 1 < self.n_sections() {
            out.push(i + 1);
        }
        out
    }

    /// Whether `i` and `j` are one-hop neighbors.
    pub fn are_neighbors(&self, i: usize, j: usize) -> bool {
        i.abs_diff(j) == 1 && i.max(j) < self.n_sections()
    }

    /// Global cells shared by neighbors `i` and `j`.
    pub fn overlap(&self, i: usize, j: usize) -> Result<Range<usize>, FilterError> {
        if !self.are_neighbors(i, j) {
            return Err(FilterError::NotNeighbor(i, j));
        }
        let (a, b) = (self.sections[i.min(j)], self.sections[i.max(j)]);
        Ok(b.start..a.end())
    }

    /// Selector of the cells of `i` shared with neighbor `j`.
    pub fn project(&self, i: usize, j: usize) -> Result<Projection, FilterError> {
        let cells = self.overlap(i, j)?;
        let start = self.sections[i].start;
        Ok(Projection { from: i, to: j, local: cells.map(|g| g - start).collect(), n_from: self.dim(i) })
    }

    /// Local index of global cell `g` within section `i`, if it lies there.
    pub fn local_index(&self, i: usize, g: usize) -> Option<usize> {
        let sec = self.sections[i];
        sec.range().contains(&g).then(|| g - sec.start)
    }

    /// Number of overlaps each cell of section `i` belongs to.
    pub fn overlap_counts(&self, i: usize) -> Vec<usize> {
        let mut c = vec![0; self.dim(i)];
        for j in self.neighbors(i) {
            for l in self.project(i, j).expect("neighbor").local {
                c[l] += 1;
            }
        }
        c
    }

    /// Laplacian of the communication graph.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.n_sections();
        DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                self.neighbors(r).len() as f64
            } else if self.are_neighbors(r, c) {
                -1.0
            } else {
                0.0
            }
        })
    }

    /// Restricts a global density vector to section `i`.
    pub fn restrict(&self, i: usize, global: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(&global[self.sections[i].range()])
    }
}
