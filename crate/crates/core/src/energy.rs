//! Deformations, the total energy and its gradient, slice measures and the
//! piecewise affine interpolant.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::geometry::{discrete_gradient, dist_so3bar};
use crate::lattice::{BondKind, CellClass, CellCorners, CellMatrix, RodLattice, FULL_MASK, SIGNS};
use crate::potentials::CellEnergyModel;

/// Atom positions in physical units (spacing about `1/k`).
#[derive(Debug, Clone)]
pub struct Deformation {
    lattice: Arc<RodLattice>,
    positions: Vec<Vector3<f64>>,
}

impl Deformation {
    pub fn new(lattice: Arc<RodLattice>, positions: Vec<Vector3<f64>>) -> Result<Self> {
        if positions.len() != lattice.atom_count() {
            return Err(Error::InvalidParameters(format!(
                "{} positions for {} atoms",
                positions.len(),
                lattice.atom_count()
            )));
        }
        if !positions.iter().all(|p| p.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinitePosition);
        }
        Ok(Self { lattice, positions })
    }

    /// Reference configuration `y(x) = x`.
    pub fn identity(lattice: Arc<RodLattice>) -> Self {
        let positions = (0..lattice.atom_count()).map(|a| Vector3::from(lattice.reference_position(a))).collect();
        Self { lattice, positions }
    }

    /// `y(x) = f(x)` at every atom, with `x` the physical reference position.
    pub fn from_fn(lattice: Arc<RodLattice>, f: impl Fn(Vector3<f64>) -> Vector3<f64>) -> Result<Self> {
        let positions = (0..lattice.atom_count()).map(|a| f(Vector3::from(lattice.reference_position(a)))).collect();
        Self::new(lattice, positions)
    }

    pub fn lattice(&self) -> &Arc<RodLattice> {
        &self.lattice
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn into_positions(self) -> Vec<Vector3<f64>> {
        self.positions
    }

    /// `y -> R y + c`.
    pub fn rigidly_moved(&self, r: &Matrix3<f64>, c: &Vector3<f64>) -> Self {
        Self { lattice: self.lattice.clone(), positions: self.positions.iter().map(|p| r * p + c).collect() }
    }

    /// Hatted corner matrix `k y` of a cell; ghost columns are zero.
    pub fn cell_matrix(&self, corners: &CellCorners) -> CellMatrix {
        hatted_cell(&self.positions, corners, self.lattice.k() as f64)
    }
}

fn hatted_cell(positions: &[Vector3<f64>], corners: &CellCorners, k: f64) -> CellMatrix {
    let mut y = CellMatrix::zeros();
    for (slot, atom) in corners.atoms.iter().enumerate() {
        if let Some(a) = atom {
            y.set_column(slot, &(k * positions[*a]));
        }
    }
    y
}

/// Precomputed cell data for repeated energy evaluation on one lattice.
#[derive(Debug, Clone)]
pub struct Evaluator {
    model: CellEnergyModel,
    k: u32,
    cells: Vec<(u8, CellCorners)>,
    slices: Vec<(i32, std::ops::Range<usize>)>,
    atom_cells: Vec<Vec<usize>>,
}

impl Evaluator {
    pub fn new(model: &CellEnergyModel, lattice: &RodLattice) -> Self {
        let cells: Vec<_> = lattice.cells().iter().map(|c| (c.corners.mask(), c.corners)).collect();
        let mut atom_cells = vec![Vec::new(); lattice.atom_count()];
        for (n, (_, c)) in cells.iter().enumerate() {
            for a in c.atoms.iter().flatten() {
                atom_cells[*a].push(n);
            }
        }
        Self { model: *model, k: lattice.k(), cells, slices: lattice.slices(), atom_cells }
    }

    pub fn model(&self) -> &CellEnergyModel {
        &self.model
    }

    pub fn cell_energy(&self, positions: &[Vector3<f64>], cell: usize) -> f64 {
        let (mask, corners) = &self.cells[cell];
        self.model.cell_energy(*mask, &hatted_cell(positions, corners, self.k as f64), self.k)
    }

    /// Per-slice energy sums in axial order; each slice summed in cell order.
    pub fn slice_sums(&self, positions: &[Vector3<f64>]) -> Vec<f64> {
        self.slices
            .par_iter()
            .map(|(_, range)| range.clone().map(|c| self.cell_energy(positions, c)).sum())
            .collect()
    }

    /// `E^(k)`: slice sums added in axial order.
    pub fn energy(&self, positions: &[Vector3<f64>]) -> f64 {
        self.slice_sums(positions).iter().sum()
    }

    /// `k E^(k)`, accumulated as the sum of the scaled slice masses.
    pub fn scaled_energy(&self, positions: &[Vector3<f64>]) -> f64 {
        let k = self.k as f64;
        self.slice_sums(positions).iter().map(|s| k * s).sum()
    }

    /// Energy of the cells touching `atom`.
    pub fn local_energy(&self, positions: &[Vector3<f64>], atom: usize) -> f64 {
        self.atom_cells[atom].iter().map(|&c| self.cell_energy(positions, c)).sum()
    }

    /// Energy of the cells touching any atom in `atoms` (each cell once).
    pub fn local_energy_of(&self, positions: &[Vector3<f64>], atoms: &[usize]) -> f64 {
        let mut cells: Vec<usize> = atoms.iter().flat_map(|&a| self.atom_cells[a].iter().copied()).collect();
        cells.sort_unstable();
        cells.dedup();
        cells.iter().map(|&c| self.cell_energy(positions, c)).sum()
    }

    /// Number of interior cells on which the orientation penalty is active.
    pub fn penalty_active(&self, positions: &[Vector3<f64>]) -> usize {
        let k = self.k as f64;
        self.cells
            .iter()
            .filter(|(mask, c)| *mask == FULL_MASK && self.model.orientation.value(&hatted_cell(positions, c, k), self.k) > 0.0)
            .count()
    }

    /// Energy and its gradient with respect to physical positions.
    pub fn energy_and_gradient(&self, positions: &[Vector3<f64>], grad: &mut [Vector3<f64>]) -> f64 {
        let k = self.k as f64;
        let per_slice: Vec<(f64, Vec<(usize, CellMatrix)>)> = self
            .slices
            .par_iter()
            .map(|(_, range)| {
                let mut e = 0.0;
                let mut gs = Vec::with_capacity(range.len());
                for c in range.clone() {
                    let (mask, corners) = &self.cells[c];
                    let y = hatted_cell(positions, corners, k);
                    e += self.model.cell_energy(*mask, &y, self.k);
                    let mut g = CellMatrix::zeros();
                    self.model.cell_gradient(*mask, &y, self.k, &mut g);
                    gs.push((c, g));
                }
                (e, gs)
            })
            .collect();
        grad.iter_mut().for_each(|g| *g = Vector3::zeros());
        let mut total = 0.0;
        for (e, gs) in per_slice {
            total += e;
            for (c, g) in gs {
                for (slot, atom) in self.cells[c].1.atoms.iter().enumerate() {
                    if let Some(a) = atom {
                        // d/dy = k d/dy_hat
                        grad[*a] += k * g.column(slot);
                    }
                }
            }
        }
        total
    }
}

/// Energy with its per-cell breakdown (in lattice cell order).
#[derive(Debug, Clone)]
pub struct EnergyReport {
    pub energy: f64,
    pub per_cell: Vec<f64>,
}

pub fn total_energy(model: &CellEnergyModel, def: &Deformation) -> Result<EnergyReport> {
    model.validate()?;
    let lat = def.lattice();
    let ev = Evaluator::new(model, lat);
    let per_cell: Vec<f64> = (0..lat.cells().len()).into_par_iter().map(|c| ev.cell_energy(def.positions(), c)).collect();
    let energy = lat.slices().iter().map(|(_, r)| per_cell[r.clone()].iter().sum::<f64>()).sum();
    Ok(EnergyReport { energy, per_cell })
}

/// `k E^(k)` with the slice-mass summation order.
pub fn scaled_energy(model: &CellEnergyModel, def: &Deformation) -> Result<f64> {
    model.validate()?;
    Ok(Evaluator::new(model, def.lattice()).scaled_energy(def.positions()))
}

/// Direct bond sum, each lattice bond counted once, plus orientation penalties
/// on interior cells.
pub fn pair_sum_energy(model: &CellEnergyModel, def: &Deformation) -> Result<f64> {
    let (nn, nnn) = model.pair_potentials().ok_or(Error::ModelNotPairwise)?;
    let lat = def.lattice();
    let k = lat.k();
    let kf = k as f64;
    let y = def.positions();
    let mut e = 0.0;
    for (a, b, kind) in lat.bonds() {
        let r = kf * (y[a] - y[b]).norm();
        e += match kind {
            BondKind::Nn => nn.energy(r, k),
            BondKind::Nnn => nnn.energy(r / std::f64::consts::SQRT_2, k),
        };
    }
    for cell in lat.cells().iter().filter(|c| c.class == CellClass::Interior) {
        e += model.orientation.value(&def.cell_matrix(&cell.corners), k);
    }
    Ok(e)
}

/// Gradient of `E^(k)` with respect to the physical atom positions.
pub fn energy_gradient(model: &CellEnergyModel, def: &Deformation) -> Result<Vec<Vector3<f64>>> {
    model.validate()?;
    let ev = Evaluator::new(model, def.lattice());
    let mut grad = vec![Vector3::zeros(); def.positions().len()];
    ev.energy_and_gradient(def.positions(), &mut grad);
    Ok(grad)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceEnergyProfile {
    /// Axial cell index `a` of each slice (midpoint `a + 1/2` in hatted units).
    pub axial: Vec<i32>,
    /// `k` times the energy of the cells of each slice.
    pub masses: Vec<f64>,
    pub broken: Vec<bool>,
    pub threshold: f64,
}

impl SliceEnergyProfile {
    pub fn broken_count(&self) -> usize {
        self.broken.iter().filter(|b| **b).count()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }
}

/// Slice masses and broken-slice flags. A slice is broken when one of its
/// interior cells is farther than `c_frac / (sqrt(3 #L') c_e)` from the rigid set.
pub fn slice_profile(model: &CellEnergyModel, def: &Deformation, c_e: f64) -> Result<SliceEnergyProfile> {
    if !(c_e >= 1.0) {
        return Err(Error::InvalidParameters(format!("extension constant {c_e} must be >= 1")));
    }
    let lat = def.lattice();
    let k = lat.k();
    let th = model.thresholds(k)?;
    let threshold = th.c_frac / ((3.0 * lat.cross_section().midpoints().len() as f64).sqrt() * c_e);
    let ev = Evaluator::new(model, lat);
    let sums = ev.slice_sums(def.positions());
    let slices = lat.slices();
    let mut axial = Vec::with_capacity(slices.len());
    let mut broken = Vec::with_capacity(slices.len());
    for (a, range) in &slices {
        axial.push(*a);
        let is_broken = lat.cells()[range.clone()].iter().any(|c| {
            c.class == CellClass::Interior
                && dist_so3bar(&discrete_gradient(&def.cell_matrix(&c.corners))) > threshold
        });
        broken.push(is_broken);
    }
    let masses = sums.iter().map(|s| k as f64 * s).collect();
    Ok(SliceEnergyProfile { axial, masses, broken, threshold })
}

fn locate(v: f64, lo: i32, hi: i32) -> Vec<i32> {
    let f = v.floor() as i32;
    let mut out = vec![f.clamp(lo, hi)];
    if v == v.floor() {
        out.push((f - 1).clamp(lo, hi));
    }
    out
}

/// Value of the piecewise affine interpolant (24 simplices per cell) at a
/// physical point `x` with `x_1` in `[0, L_k]` and `k x'` in the closed cross-section.
pub fn interpolate_value(def: &Deformation, x: [f64; 3]) -> Result<Vector3<f64>> {
    let lat = def.lattice();
    let k = lat.k() as f64;
    let p = [k * x[0], k * x[1], k * x[2]];
    let n = lat.layers() as i32;
    if !p.iter().all(|v| v.is_finite()) || p[0] < -1e-12 || p[0] > n as f64 + 1e-12 {
        return Err(Error::OutOfDomain(x));
    }
    let a = (p[0].floor() as i32).clamp(0, n - 1);
    let cs = lat.cross_section();
    let mid = locate(p[1], i32::MIN, i32::MAX)
        .into_iter()
        .flat_map(|i| locate(p[2], i32::MIN, i32::MAX).into_iter().map(move |j| (i, j)))
        .find(|m| cs.contains_midpoint(*m) && (p[1] - m.0 as f64) <= 1.0 && (p[2] - m.1 as f64) <= 1.0)
        .ok_or(Error::OutOfDomain(x))?;
    let cell = lat
        .cell(crate::lattice::CellIndex { axial: a, mid })
        .ok_or(Error::OutOfDomain(x))?;
    let ys: Vec<Vector3<f64>> = cell.corners.atoms.iter().map(|c| def.positions()[c.expect("interior cell")]).collect();
    let xi = [p[0] - a as f64 - 0.5, p[1] - mid.0 as f64 - 0.5, p[2] - mid.1 as f64 - 0.5];

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| xi[j].abs().partial_cmp(&xi[i].abs()).unwrap());
    let [d, e, f] = order;
    let centre: Vector3<f64> = ys.iter().sum::<Vector3<f64>>() / 8.0;
    if xi[d] == 0.0 {
        return Ok(centre);
    }
    let s = if xi[d] > 0.0 { 1 } else { -1 };
    let t = if xi[e] >= 0.0 { 1 } else { -1 };
    let face: Vector3<f64> = (0..8).filter(|&c| SIGNS[c][d] == s).map(|c| ys[c]).sum::<Vector3<f64>>() / 4.0;
    let mut edge = [0usize; 2];
    for c in 0..8 {
        if SIGNS[c][d] == s && SIGNS[c][e] == t {
            edge[if SIGNS[c][f] < 0 { 0 } else { 1 }] = c;
        }
    }
    let l0 = 1.0 - 2.0 * xi[d].abs();
    let lf = 2.0 * (xi[d].abs() - xi[e].abs());
    let sum = 2.0 * xi[e].abs();
    let diff = 2.0 * xi[f];
    let (li, lj) = (0.5 * (sum - diff), 0.5 * (sum + diff));
    Ok(l0 * centre + lf * face + li * ys[edge[0]] + lj * ys[edge[1]])
}
