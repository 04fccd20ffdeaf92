// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;

use thiserror::Error;

use super::tile::{ResourceCensus, TileKind};
use crate::crc::crc32;

const CMOS28: &str = include_str!("../../layouts/cmos28.csv");
const CMOS130: &str = include_str!("../../layouts/cmos130.csv");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LayoutError {
    #[error("empty layout")]
    Empty,
    #[error("unknown tile name {name:?} at row {row}, column {col}")]
    UnknownTileName { row: usize, col: usize, name: String },
    #[error("row {row} has {found} tiles, expected {expected}")]
    RaggedGrid { row: usize, expected: usize, found: usize },
    #[error("DSP half at row {row}, column {col} has no partner")]
    UnpairedDspHalf { row: usize, col: usize },
    #[error("missing or misplaced termination at row {row}, column {col}")]
    MissingTermination { row: usize, col: usize },
    #[error("unknown bundled layout {0:?}")]
    UnknownBundled(String),
}

/// A tile coordinate, row 0 at the north edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TileCoord {
    pub row: usize,
    pub col: usize,
}

impl TileCoord {
    pub fn new(row: usize, col: usize) -> Self {
        TileCoord { row, col }
    }

    pub fn manhattan(self, other: TileCoord) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

/// Rectangular grid of tiles. Construct with [`FabricLayout::parse`] or
/// [`FabricLayout::from_grid`]; both enforce the structural invariants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FabricLayout {
    name: String,
    rows: usize,
    cols: usize,
    grid: Vec<TileKind>,
}

impl FabricLayout {
    pub fn parse(text: &str) -> Result<FabricLayout, LayoutError> {
        let mut name = String::new();
        let mut rows: Vec<Vec<TileKind>> = Vec::new();
        let mut first = true;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if first {
                    if let Some(label) = comment.trim().strip_prefix("name=") {
                        name = label.trim().to_string();
                    }
                }
                first = false;
                continue;
            }
            first = false;
            let row = rows.len();
            let tiles = line
                .split(',')
                .enumerate()
                .map(|(col, cell)| {
                    let cell = cell.trim();
                    cell.parse::<TileKind>().map_err(|_| LayoutError::UnknownTileName {
                        row,
                        col,
                        name: cell.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(tiles);
        }
        FabricLayout::from_grid(name, rows)
    }

    pub fn from_grid(name: impl Into<String>, rows: Vec<Vec<TileKind>>) -> Result<FabricLayout, LayoutError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if n_rows == 0 || n_cols == 0 {
            return Err(LayoutError::Empty);
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n_cols {
                return Err(LayoutError::RaggedGrid { row, expected: n_cols, found: r.len() });
            }
        }
        let layout = FabricLayout {
            name: name.into(),
            rows: n_rows,
            cols: n_cols,
            grid: rows.into_iter().flatten().collect(),
        };
        layout.validate()?;
        Ok(layout)
    }

    /// The layouts shipped with the crate: `cmos28` and `cmos130`.
    pub fn bundled(name: &str) -> Result<FabricLayout, LayoutError> {
        let text = match name {
            "cmos28" => CMOS28,
            "cmos130" => CMOS130,
            other => return Err(LayoutError::UnknownBundled(other.to_string())),
        };
        Ok(FabricLayout::parse(text).expect("bundled layout is valid"))
    }

    pub fn cmos28() -> FabricLayout {
        FabricLayout::bundled("cmos28").unwrap()
    }

    pub fn cmos130() -> FabricLayout {
        FabricLayout::bundled("cmos130").unwrap()
    }

    fn validate(&self) -> Result<(), LayoutError> {
        let last_row = self.rows - 1;
        let last_col = self.cols - 1;
        for row in 0..self.rows {
            for col in 0..self.cols {
                let at = TileCoord::new(row, col);
                match self.tile(at) {
                    TileKind::DspTop => {
                        if row == last_row || self.tile(TileCoord::new(row + 1, col)) != TileKind::DspBot {
                            return Err(LayoutError::UnpairedDspHalf { row, col });
                        }
                    }
                    TileKind::DspBot => {
                        if row == 0 || self.tile(TileCoord::new(row - 1, col)) != TileKind::DspTop {
                            return Err(LayoutError::UnpairedDspHalf { row, col });
                        }
                    }
                    TileKind::NTerm if row != 0 => return Err(LayoutError::MissingTermination { row, col }),
                    TileKind::STerm if row != last_row => return Err(LayoutError::MissingTermination { row, col }),
                    _ => {}
                }
            }
        }
        if self.rows < 3 || self.cols < 3 {
            // Too small to carry a terminated interior; it must be empty.
            return match self.grid.iter().position(|&k| k != TileKind::Null) {
                None => Ok(()),
                Some(i) => Err(LayoutError::MissingTermination { row: i / self.cols, col: i % self.cols }),
            };
        }
        for (row, col) in [(0, 0), (0, last_col), (last_row, 0), (last_row, last_col)] {
            if self.tile(TileCoord::new(row, col)) != TileKind::Null {
                return Err(LayoutError::MissingTermination { row, col });
            }
        }
        for col in 1..last_col {
            let occupied = (1..last_row).any(|row| self.tile(TileCoord::new(row, col)) != TileKind::Null);
            if !occupied {
                continue;
            }
            if self.tile(TileCoord::new(0, col)) != TileKind::NTerm {
                return Err(LayoutError::MissingTermination { row: 0, col });
            }
            if self.tile(TileCoord::new(last_row, col)) != TileKind::STerm {
                return Err(LayoutError::MissingTermination { row: last_row, col });
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn tile(&self, at: TileCoord) -> TileKind {
        self.grid[at.row * self.cols + at.col]
    }

    pub fn get(&self, row: isize, col: isize) -> Option<TileKind> {
        if row < 0 || col < 0 || row as usize >= self.rows || col as usize >= self.cols {
            return None;
        }
        Some(self.grid[row as usize * self.cols + col as usize])
    }

    pub fn index(&self, at: TileCoord) -> usize {
        at.row * self.cols + at.col
    }

    pub fn coord(&self, index: usize) -> TileCoord {
        TileCoord::new(index / self.cols, index % self.cols)
    }

    /// All tiles in row-major order.
    pub fn tiles(&self) -> impl Iterator<Item = (TileCoord, TileKind)> + '_ {
        self.grid.iter().enumerate().map(|(i, &k)| (self.coord(i), k))
    }

    pub fn tiles_of(&self, kind: TileKind) -> impl Iterator<Item = TileCoord> + '_ {
        self.tiles().filter(move |&(_, k)| k == kind).map(|(c, _)| c)
    }

    pub fn count(&self, kind: TileKind) -> usize {
        self.grid.iter().filter(|&&k| k == kind).count()
    }

    /// Canonical text form; `parse(render(l)) == l`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if !self.name.is_empty() {
            let _ = writeln!(out, "# name={}", self.name);
        }
        for row in self.grid.chunks(self.cols) {
            let names: Vec<&str> = row.iter().map(|k| k.name()).collect();
            out.push_str(&names.join(","));
            out.push('\n');
        }
        out
    }

    /// 32-bit identity of the layout, stamped into bitstreams.
    pub fn digest(&self) -> u32 {
        crc32(self.render().as_bytes())
    }
}

/// Sum of per-tile contributions over the whole grid.
pub fn census(layout: &FabricLayout) -> ResourceCensus {
    let mut c = ResourceCensus::default();
    let mut halves = 0;
    for (_, kind) in layout.tiles() {
        let t = kind.cell_counts();
        c.logic_cells += t.logic_cells;
        c.flip_flops += t.flip_flops;
        c.registers += t.registers;
        c.io_input_bits += t.io_in;
        c.io_output_bits += t.io_out;
        halves += t.dsp_halves;
    }
    // pairing is a layout invariant, so halves is always even
    c.dsp_slices = halves / 2;
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cmos28_census_totals() {
        let layout = FabricLayout::cmos28();
        assert_eq!((layout.rows(), layout.cols()), (10, 10));
        assert_eq!(layout.count(TileKind::Lut4ab), 56);
        let c = census(&layout);
        assert_eq!(c.logic_cells, 448);
        assert_eq!(c.dsp_slices, 4);
        assert_eq!(c.flip_flops, 448);
    }

    #[test]
    fn cmos130_census_totals() {
        let c = census(&FabricLayout::cmos130());
        assert_eq!(c.logic_cells, 384);
        assert_eq!(c.registers, 128);
        assert_eq!(c.dsp_slices, 4);
    }

    #[test]
    fn all_null_is_empty_fabric() {
        let layout = FabricLayout::parse("NULL,NULL,NULL\nNULL,NULL,NULL\nNULL,NULL,NULL\n").unwrap();
        assert_eq!(census(&layout), ResourceCensus::default());
    }

    #[test]
    fn unpaired_dsp() {
        let text = "NULL,N_term,NULL\nNULL,DSP_top,NULL\nNULL,LUT4AB,NULL\nNULL,S_term,NULL\n";
        assert_eq!(FabricLayout::parse(text), Err(LayoutError::UnpairedDspHalf { row: 1, col: 1 }));
        let text = "NULL,N_term,NULL\nNULL,LUT4AB,NULL\nNULL,DSP_bot,NULL\nNULL,S_term,NULL\n";
        assert_eq!(FabricLayout::parse(text), Err(LayoutError::UnpairedDspHalf { row: 2, col: 1 }));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            FabricLayout::parse("NULL,LUT6,NULL"),
            Err(LayoutError::UnknownTileName { row: 0, col: 1, .. })
        ));
        assert_eq!(
            FabricLayout::parse("NULL,NULL\nNULL\n"),
            Err(LayoutError::RaggedGrid { row: 1, expected: 2, found: 1 })
        );
        let unterminated = "NULL,NULL,NULL\nNULL,LUT4AB,NULL\nNULL,S_term,NULL\n";
        assert_eq!(
            FabricLayout::parse(unterminated),
            Err(LayoutError::MissingTermination { row: 0, col: 1 })
        );
        assert_eq!(FabricLayout::parse("# name=x\n"), Err(LayoutError::Empty));
    }

    #[test]
    fn header_is_optional() {
        let l = FabricLayout::parse("NULL\n").unwrap();
        assert_eq!(l.name(), "");
        assert_eq!(FabricLayout::parse(&l.render()).unwrap(), l);
    }

    #[test]
    fn digest_distinguishes_bundled_layouts() {
        assert_ne!(FabricLayout::cmos28().digest(), FabricLayout::cmos130().digest());
    }
}
