//! Cross-section and rod lattices in hatted (unit-spacing) integer coordinates.
//!
//! A cross-section is given by its cell midpoints `(i + 1/2, j + 1/2)`, stored as
//! the integer pair `(i, j)`. Corners are plain integer points. The rod lattice
//! stacks `n + 1` copies of the corner set along the axis (`n = floor(kL)`), and
//! atoms are numbered lexicographically in `(x1, x2, x3)`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::LazyLock;

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 3x8 matrix holding the eight corner vectors of a cell, in `DIRECTIONS` order.
pub type CellMatrix = SMatrix<f64, 3, 8>;

/// Doubled direction vectors: `DIRECTIONS[i] = SIGNS[i] / 2`.
pub const SIGNS: [[i32; 3]; 8] = [
    [-1, -1, -1],
    [-1, -1, 1],
    [-1, 1, 1],
    [-1, 1, -1],
    [1, -1, -1],
    [1, -1, 1],
    [1, 1, 1],
    [1, 1, -1],
];

/// Bitmask with all eight corners present.
pub const FULL_MASK: u8 = 0xff;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondKind {
    /// Nearest neighbours, reference distance 1.
    Nn,
    /// Next-to-nearest neighbours (face diagonals), reference distance sqrt(2).
    Nnn,
}

/// A bond between two corner slots of a cell and its share of the bond energy.
#[derive(Debug, Clone, Copy)]
pub struct CellBond {
    pub a: usize,
    pub b: usize,
    pub kind: BondKind,
    pub weight: f64,
}

/// The 12 edges (weight 1/4, shared by four cells) and 12 face diagonals
/// (weight 1/2, shared by two cells) of the unit cube.
pub static CELL_BONDS: LazyLock<Vec<CellBond>> = LazyLock::new(|| {
    let mut out = Vec::with_capacity(24);
    for a in 0..8 {
        for b in (a + 1)..8 {
            let d2: i32 = (0..3)
                .map(|c| {
                    let d = SIGNS[a][c] - SIGNS[b][c];
                    d * d
                })
                .sum();
            // doubled coordinates: |z_a - z_b|^2 = d2 / 4
            match d2 {
                4 => out.push(CellBond { a, b, kind: BondKind::Nn, weight: 0.25 }),
                8 => out.push(CellBond { a, b, kind: BondKind::Nnn, weight: 0.5 }),
                _ => {}
            }
        }
    }
    out
});

/// The reference cell `Id_bar = (z^1 | ... | z^8)`.
pub fn reference_cell() -> CellMatrix {
    CellMatrix::from_fn(|r, c| 0.5 * SIGNS[c][r] as f64)
}

/// Corner slot whose direction has the given doubled signs.
pub fn slot_of(signs: [i32; 3]) -> usize {
    SIGNS.iter().position(|s| *s == signs).expect("signs must be +-1")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("cross-section has no cells")]
    EmptyCrossSection,
    #[error("cross-section is not connected")]
    DisconnectedCrossSection,
    #[error("all four corners of ({0}+1/2, {1}+1/2) are lattice points but the cell is missing")]
    MissingMidpoint(i32, i32),
    #[error("rod too short: floor(k*L) = {layers} for L = {length}, k = {k}")]
    DegenerateRod { length: f64, k: u32, layers: i64 },
    #[error("unknown cell (axial {axial}, midpoint {mid:?})")]
    UnknownCell { axial: i32, mid: (i32, i32) },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    midpoints: Vec<(i32, i32)>,
    midpoint_set: HashSet<(i32, i32)>,
    corners: Vec<(i32, i32)>,
    corner_index: HashMap<(i32, i32), usize>,
    ext_midpoints: Vec<(i32, i32)>,
    ext_corners: Vec<(i32, i32)>,
}

impl CrossSection {
    /// Builds a cross-section from cell indices `(i, j)`, each meaning the
    /// midpoint `(i + 1/2, j + 1/2)`.
    pub fn new(cells: &[(i32, i32)]) -> Result<Self, LatticeError> {
        if cells.is_empty() {
            return Err(LatticeError::EmptyCrossSection);
        }
        let midpoint_set: HashSet<(i32, i32)> = cells.iter().copied().collect();
        let mut midpoints: Vec<_> = midpoint_set.iter().copied().collect();
        midpoints.sort_unstable();

        // 4-neighbour flood fill
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([midpoints[0]]);
        seen.insert(midpoints[0]);
        while let Some((i, j)) = queue.pop_front() {
            for n in [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)] {
                if midpoint_set.contains(&n) && seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        if seen.len() != midpoints.len() {
            return Err(LatticeError::DisconnectedCrossSection);
        }

        let corner_set: HashSet<(i32, i32)> = midpoints
            .iter()
            .flat_map(|&(i, j)| [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)])
            .collect();
        let mut corners: Vec<_> = corner_set.iter().copied().collect();
        corners.sort_unstable();

        // every square whose four corners are present must be a cell
        for &(a, b) in &corners {
            let square = [(a, b), (a + 1, b), (a, b + 1), (a + 1, b + 1)];
            if square.iter().all(|c| corner_set.contains(c)) && !midpoint_set.contains(&(a, b)) {
                return Err(LatticeError::MissingMidpoint(a, b));
            }
        }

        let corner_index = corners.iter().enumerate().map(|(n, &c)| (c, n)).collect();
        let ext_midpoints = dilate(&midpoints);
        let ext_corners = dilate(&corners);
        Ok(Self { midpoints, midpoint_set, corners, corner_index, ext_midpoints, ext_corners })
    }

    /// A `width x height` block of cells anchored at the origin.
    pub fn rectangle(width: i32, height: i32) -> Result<Self, LatticeError> {
        let cells: Vec<_> = (0..width).flat_map(|i| (0..height).map(move |j| (i, j))).collect();
        Self::new(&cells)
    }

    pub fn unit_square() -> Self {
        Self::rectangle(1, 1).expect("unit square is valid")
    }

    /// Cell indices of `L'`, sorted.
    pub fn midpoints(&self) -> &[(i32, i32)] {
        &self.midpoints
    }

    pub fn contains_midpoint(&self, mid: (i32, i32)) -> bool {
        self.midpoint_set.contains(&mid)
    }

    /// Corner set `L`, sorted lexicographically.
    pub fn corners(&self) -> &[(i32, i32)] {
        &self.corners
    }

    pub fn corner_index(&self, c: (i32, i32)) -> Option<usize> {
        self.corner_index.get(&c).copied()
    }

    /// `L'^ext = L' + {-1,0,1}^2`, sorted.
    pub fn ext_midpoints(&self) -> &[(i32, i32)] {
        &self.ext_midpoints
    }

    /// `L^ext = L + {-1,0,1}^2`, sorted.
    pub fn ext_corners(&self) -> &[(i32, i32)] {
        &self.ext_corners
    }

    /// Number of ordered pairs of corners at in-plane distance 1.
    pub fn ordered_unit_pairs(&self) -> usize {
        self.corners
            .iter()
            .map(|&(a, b)| {
                [(a + 1, b), (a - 1, b), (a, b + 1), (a, b - 1)]
                    .iter()
                    .filter(|c| self.corner_index.contains_key(c))
                    .count()
            })
            .sum()
    }

    /// Bitmask of the corner slots of a cell with in-plane midpoint `mid` that
    /// are lattice points of the cross-section (axial position ignored).
    pub fn in_plane_mask(&self, mid: (i32, i32)) -> u8 {
        let mut mask = 0u8;
        for (slot, s) in SIGNS.iter().enumerate() {
            if self.corner_index.contains_key(&corner_of(mid, s)) {
                mask |= 1 << slot;
            }
        }
        mask
    }

    /// Cell list as integer pairs, the form used in configuration files.
    pub fn to_cells(&self) -> Vec<(i32, i32)> {
        self.midpoints.clone()
    }
}

fn dilate(points: &[(i32, i32)]) -> Vec<(i32, i32)> {
    let set: HashSet<(i32, i32)> = points
        .iter()
        .flat_map(|&(a, b)| {
            (-1..=1).flat_map(move |da| (-1..=1).map(move |db| (a + da, b + db)))
        })
        .collect();
    let mut out: Vec<_> = set.into_iter().collect();
    out.sort_unstable();
    out
}

/// In-plane corner of the cell with midpoint index `mid` in direction `s`.
fn corner_of(mid: (i32, i32), s: &[i32; 3]) -> (i32, i32) {
    (mid.0 + (s[1] + 1) / 2, mid.1 + (s[2] + 1) / 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellClass {
    Interior,
    Surface,
    End,
}

/// A cell `x + {-1/2, 1/2}^3`. `axial = a` means axial midpoint `a + 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellIndex {
    pub axial: i32,
    pub mid: (i32, i32),
}

/// Corner atoms of a cell in direction order; `None` marks a ghost corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellCorners {
    pub atoms: [Option<usize>; 8],
}

impl CellCorners {
    pub fn mask(&self) -> u8 {
        self.atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_some())
            .fold(0u8, |m, (i, _)| m | (1 << i))
    }

    pub fn ghost_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.is_none()).count()
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub index: CellIndex,
    pub class: CellClass,
    pub corners: CellCorners,
}

/// Atom and cell index structure of a rod at refinement `k`.
#[derive(Debug, Clone)]
pub struct RodLattice {
    cross_section: CrossSection,
    length: f64,
    k: u32,
    layers: usize,
    end_cells: bool,
    cells: Vec<Cell>,
    cell_lookup: HashMap<CellIndex, usize>,
}

impl RodLattice {
    /// Rod of length `L` at refinement `k`: `floor(kL) + 1` atom layers plus
    /// the two end-cell layers.
    pub fn new(cross_section: CrossSection, length: f64, k: u32) -> Result<Self, LatticeError> {
        let raw = k as f64 * length;
        // tolerate representation error such as 0.3 * 10 = 2.9999999999999996
        let layers = (raw * (1.0 + 1e-12)).floor() as i64;
        if !(length > 0.0) || k == 0 || layers < 1 {
            return Err(LatticeError::DegenerateRod { length, k, layers });
        }
        Ok(Self::build(cross_section, length, k, layers as usize, true))
    }

    /// Lattice with `layers` axial cells and no end-cell layers, as used for
    /// blown-up crack windows.
    pub fn window(cross_section: CrossSection, layers: usize, k: u32) -> Result<Self, LatticeError> {
        if layers < 1 || k == 0 {
            return Err(LatticeError::DegenerateRod { length: layers as f64 / k.max(1) as f64, k, layers: layers as i64 });
        }
        Ok(Self::build(cross_section, layers as f64 / k as f64, k, layers, false))
    }

    fn build(cross_section: CrossSection, length: f64, k: u32, layers: usize, end_cells: bool) -> Self {
        let per_layer = cross_section.corners().len();
        let (first, last) = if end_cells { (-1, layers as i32) } else { (0, layers as i32 - 1) };
        let mut cells = Vec::new();
        for axial in first..=last {
            for &mid in cross_section.ext_midpoints() {
                let mut atoms = [None; 8];
                for (slot, s) in SIGNS.iter().enumerate() {
                    let layer = axial + (s[0] + 1) / 2;
                    if layer < 0 || layer > layers as i32 {
                        continue;
                    }
                    if let Some(c) = cross_section.corner_index(corner_of(mid, s)) {
                        atoms[slot] = Some(layer as usize * per_layer + c);
                    }
                }
                let class = if axial < 0 || axial >= layers as i32 {
                    CellClass::End
                } else if cross_section.contains_midpoint(mid) {
                    CellClass::Interior
                } else {
                    CellClass::Surface
                };
                cells.push(Cell { index: CellIndex { axial, mid }, class, corners: CellCorners { atoms } });
            }
        }
        let cell_lookup = cells.iter().enumerate().map(|(n, c)| (c.index, n)).collect();
        Self { cross_section, length, k, layers, end_cells, cells, cell_lookup }
    }

    pub fn cross_section(&self) -> &CrossSection {
        &self.cross_section
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Number of axial cell layers `k L_k`; atom layers are `0..=layers`.
    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn has_end_cells(&self) -> bool {
        self.end_cells
    }

    pub fn atoms_per_layer(&self) -> usize {
        self.cross_section.corners().len()
    }

    pub fn atom_count(&self) -> usize {
        (self.layers + 1) * self.atoms_per_layer()
    }

    /// Hatted integer coordinates of an atom.
    pub fn atom_coords(&self, atom: usize) -> [i32; 3] {
        let per = self.atoms_per_layer();
        let (x2, x3) = self.cross_section.corners()[atom % per];
        [(atom / per) as i32, x2, x3]
    }

    pub fn atom_at(&self, coords: [i32; 3]) -> Option<usize> {
        if coords[0] < 0 || coords[0] > self.layers as i32 {
            return None;
        }
        let c = self.cross_section.corner_index((coords[1], coords[2]))?;
        Some(coords[0] as usize * self.atoms_per_layer() + c)
    }

    /// Reference (undeformed) physical position of an atom.
    pub fn reference_position(&self, atom: usize) -> [f64; 3] {
        let c = self.atom_coords(atom);
        let k = self.k as f64;
        [c[0] as f64 / k, c[1] as f64 / k, c[2] as f64 / k]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, index: CellIndex) -> Option<&Cell> {
        self.cell_lookup.get(&index).map(|&n| &self.cells[n])
    }

    pub fn cell_corners(&self, index: CellIndex) -> Result<CellCorners, LatticeError> {
        self.cell(index)
            .map(|c| c.corners)
            .ok_or(LatticeError::UnknownCell { axial: index.axial, mid: index.mid })
    }

    /// Range of cell positions in `cells()` belonging to each axial layer, in
    /// axial order.
    pub fn slices(&self) -> Vec<(i32, std::ops::Range<usize>)> {
        let per = self.cross_section.ext_midpoints().len();
        let first = if self.end_cells { -1 } else { 0 };
        (0..self.cells.len() / per)
            .map(|n| (first + n as i32, n * per..(n + 1) * per))
            .collect()
    }

    /// Unordered NN and NNN atom pairs of the rod, each listed once.
    pub fn bonds(&self) -> Vec<(usize, usize, BondKind)> {
        const NN: [[i32; 3]; 3] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
        const NNN: [[i32; 3]; 6] =
            [[1, 1, 0], [1, -1, 0], [1, 0, 1], [1, 0, -1], [0, 1, 1], [0, 1, -1]];
        let mut out = Vec::new();
        for a in 0..self.atom_count() {
            let c = self.atom_coords(a);
            for (offsets, kind) in [(&NN[..], BondKind::Nn), (&NNN[..], BondKind::Nnn)] {
                for o in offsets {
                    if let Some(b) = self.atom_at([c[0] + o[0], c[1] + o[1], c[2] + o[2]]) {
                        out.push((a, b, kind));
                    }
                }
            }
        }
        out
    }

    /// Unordered atom pairs that are corners of a common unit cube.
    pub fn cell_sharing_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.atom_count() {
            let c = self.atom_coords(a);
            for d1 in -1..=1 {
                for d2 in -1..=1 {
                    for d3 in -1..=1 {
                        if (d1, d2, d3) <= (0, 0, 0) {
                            continue;
                        }
                        if let Some(b) = self.atom_at([c[0] + d1, c[1] + d2, c[2] + d3]) {
                            out.push((a, b));
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_sets() {
        let cs = CrossSection::unit_square();
        assert_eq!(cs.corners(), &[(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(cs.ext_corners().len(), 16);
        assert_eq!(cs.ext_midpoints().len(), 9);
        assert_eq!(cs.ordered_unit_pairs(), 8);
    }

    #[test]
    fn two_by_two_block() {
        let cs = CrossSection::rectangle(2, 2).unwrap();
        assert_eq!(cs.corners().len(), 9);
        assert_eq!(cs.midpoints().len(), 4);
        // 3x3 atoms: 12 unordered grid edges
        assert_eq!(cs.ordered_unit_pairs(), 24);
    }

    #[test]
    fn cross_section_errors() {
        assert_eq!(CrossSection::new(&[]), Err(LatticeError::EmptyCrossSection));
        assert_eq!(CrossSection::new(&[(0, 0), (1, 1)]), Err(LatticeError::DisconnectedCrossSection));
        // a ring of eight cells around a hole whose corners are all present
        let ring: Vec<_> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).filter(|&c| c != (1, 1)).collect();
        assert_eq!(CrossSection::new(&ring), Err(LatticeError::MissingMidpoint(1, 1)));
    }

    #[test]
    fn rod_counts() {
        let lat = RodLattice::new(CrossSection::unit_square(), 2.0, 4).unwrap();
        assert_eq!(lat.layers(), 8);
        assert_eq!(lat.atom_count(), 36);
        for axial in 0..8 {
            let row: Vec<_> = lat.cells().iter().filter(|c| c.index.axial == axial).collect();
            assert_eq!(row.iter().filter(|c| c.class == CellClass::Interior).count(), 1);
            assert_eq!(row.iter().filter(|c| c.class == CellClass::Surface).count(), 8);
        }
        assert_eq!(lat.cells().iter().filter(|c| c.class == CellClass::End).count(), 18);
        assert!(matches!(
            RodLattice::new(CrossSection::unit_square(), 0.1, 4),
            Err(LatticeError::DegenerateRod { .. })
        ));
    }

    #[test]
    fn atom_ordering_is_lexicographic_bijection() {
        let lat = RodLattice::new(CrossSection::rectangle(2, 1).unwrap(), 1.0, 3).unwrap();
        let coords: Vec<_> = (0..lat.atom_count()).map(|a| lat.atom_coords(a)).collect();
        let mut sorted = coords.clone();
        sorted.sort();
        assert_eq!(coords, sorted);
        for (a, c) in coords.iter().enumerate() {
            assert_eq!(lat.atom_at(*c), Some(a));
        }
    }

    #[test]
    fn corners_follow_direction_table() {
        let lat = RodLattice::new(CrossSection::unit_square(), 1.0, 4).unwrap();
        let cc = lat.cell_corners(CellIndex { axial: 1, mid: (0, 0) }).unwrap();
        assert_eq!(cc.ghost_count(), 0);
        for (slot, s) in SIGNS.iter().enumerate() {
            let c = lat.atom_coords(cc.atoms[slot].unwrap());
            // corner = midpoint + z, midpoint = (1.5, 0.5, 0.5)
            assert_eq!(2 * c[0] - 3, s[0]);
            assert_eq!(2 * c[1] - 1, s[1]);
            assert_eq!(2 * c[2] - 1, s[2]);
        }
    }

    #[test]
    fn ghosts_on_surface_and_end_cells() {
        let lat = RodLattice::new(CrossSection::unit_square(), 1.0, 4).unwrap();
        let surf = lat.cell_corners(CellIndex { axial: 0, mid: (1, 0) }).unwrap();
        assert!(surf.ghost_count() >= 1);
        let end = lat.cell_corners(CellIndex { axial: -1, mid: (0, 0) }).unwrap();
        for (slot, s) in SIGNS.iter().enumerate() {
            assert_eq!(end.atoms[slot].is_some(), s[0] == 1);
        }
        assert!(lat.cell_corners(CellIndex { axial: 7, mid: (0, 0) }).is_err());
    }

    #[test]
    fn cell_bond_table() {
        let nn = CELL_BONDS.iter().filter(|b| b.kind == BondKind::Nn).count();
        let nnn = CELL_BONDS.iter().filter(|b| b.kind == BondKind::Nnn).count();
        assert_eq!((nn, nnn), (12, 12));
    }

    #[test]
    fn classes_partition_cells() {
        let lat = RodLattice::new(CrossSection::rectangle(2, 1).unwrap(), 1.0, 3).unwrap();
        let unique: HashSet<_> = lat.cells().iter().map(|c| c.index).collect();
        assert_eq!(unique.len(), lat.cells().len());
        let slices = lat.slices();
        assert_eq!(slices.len(), lat.layers() + 2);
        assert_eq!(slices.last().unwrap().1.end, lat.cells().len());
    }
}
