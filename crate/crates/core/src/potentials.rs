//! Pair potentials and cell energies.
//!
//! A pair cell energy charges every unordered NN bond of the cube with weight
//! 1/4 and every face diagonal with weight 1/2, so that each bond of the rod,
//! summed over the cells containing it, is counted exactly once. Surface and
//! end cells use the same weights restricted to bonds between real atoms.

use nalgebra::{Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{discrete_gradient, dist_reflected};
use crate::lattice::{BondKind, CellMatrix, CELL_BONDS, FULL_MASK};

/// Hessian of a cell energy on `vec(y)`, index `3 * corner + component`.
pub type CellHessian = SMatrix<f64, 24, 24>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairPotential {
    /// `d (1 - r^-6)^2`, truncated at `1/k` for `r >= 1`.
    Ljts { depth: f64 },
    /// `K (r - 1)^2` capped at `c_plus / k` (stretch) and `c_minus / k` (compression).
    TruncHarmonic { stiffness: f64, plateau_plus: f64, plateau_minus: f64 },
    /// `(omega / k) S(k K (r - 1)^2 / omega)` with a C2 quintic saturation `S`.
    Splined { stiffness: f64, omega: f64 },
}

/// Saturation onset of the splined potential.
const SPLINE_ONSET: f64 = 0.25;

fn spline(t: f64) -> (f64, f64) {
    if t <= SPLINE_ONSET {
        return (t, 1.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let w = 1.0 - SPLINE_ONSET;
    let s = (t - SPLINE_ONSET) / w;
    // p(s) = s + 4s^3 - 7s^4 + 3s^5 joins (0, slope 1, curvature 0) to (1, 0, 0)
    let p = s + s * s * s * (4.0 + s * (-7.0 + 3.0 * s));
    let dp = 1.0 + s * s * (12.0 + s * (-28.0 + 15.0 * s));
    (SPLINE_ONSET + w * p, dp)
}

fn lj(depth: f64, r: f64) -> f64 {
    let a = 1.0 - r.powi(-6);
    depth * a * a
}

fn lj_prime(depth: f64, r: f64) -> f64 {
    12.0 * depth * (r.powi(-7) - r.powi(-13))
}

impl PairPotential {
    pub fn trunc_harmonic(stiffness: f64, plateau: f64) -> Self {
        PairPotential::TruncHarmonic { stiffness, plateau_plus: plateau, plateau_minus: plateau }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PairPotential::Ljts { depth } => depth > 0.0 && depth.is_finite(),
            PairPotential::TruncHarmonic { stiffness, plateau_plus, plateau_minus } => {
                [stiffness, plateau_plus, plateau_minus].iter().all(|v| *v > 0.0 && v.is_finite())
            }
            PairPotential::Splined { stiffness, omega } => {
                stiffness > 0.0 && omega > 0.0 && stiffness.is_finite() && omega.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameters(format!("{self:?}")))
        }
    }

    /// Energy at separation `r` (reference spacing 1). `+inf` at `r <= 0` for LJTS.
    pub fn energy(&self, r: f64, k: u32) -> f64 {
        let kf = k as f64;
        match *self {
            PairPotential::Ljts { depth } => {
                if r <= 0.0 {
                    return f64::INFINITY;
                }
                let w = lj(depth, r);
                if r < 1.0 {
                    w
                } else {
                    w.min(1.0 / kf)
                }
            }
            PairPotential::TruncHarmonic { stiffness, plateau_plus, plateau_minus } => {
                let cap = if r >= 1.0 { plateau_plus } else { plateau_minus };
                (stiffness * (r - 1.0) * (r - 1.0)).min(cap / kf)
            }
            PairPotential::Splined { stiffness, omega } => {
                let t = kf * stiffness * (r - 1.0) * (r - 1.0) / omega;
                omega / kf * spline(t).0
            }
        }
    }

    /// Derivative in `r` on the active branch (one-sided at truncation kinks).
    pub fn derivative(&self, r: f64, k: u32) -> f64 {
        let kf = k as f64;
        match *self {
            PairPotential::Ljts { depth } => {
                if r <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                if r < 1.0 || lj(depth, r) < 1.0 / kf {
                    lj_prime(depth, r)
                } else {
                    0.0
                }
            }
            PairPotential::TruncHarmonic { stiffness, plateau_plus, plateau_minus } => {
                let cap = if r >= 1.0 { plateau_plus } else { plateau_minus };
                if stiffness * (r - 1.0) * (r - 1.0) < cap / kf {
                    2.0 * stiffness * (r - 1.0)
                } else {
                    0.0
                }
            }
            PairPotential::Splined { stiffness, omega } => {
                let t = kf * stiffness * (r - 1.0) * (r - 1.0) / omega;
                spline(t).1 * 2.0 * stiffness * (r - 1.0)
            }
        }
    }

    /// Untruncated elastic core `W_0`.
    pub fn core_energy(&self, r: f64) -> f64 {
        match *self {
            PairPotential::Ljts { depth } => {
                if r <= 0.0 {
                    f64::INFINITY
                } else {
                    lj(depth, r)
                }
            }
            PairPotential::TruncHarmonic { stiffness, .. } | PairPotential::Splined { stiffness, .. } => {
                stiffness * (r - 1.0) * (r - 1.0)
            }
        }
    }

    /// `W_0''(1)`.
    pub fn core_curvature(&self) -> f64 {
        match *self {
            PairPotential::Ljts { depth } => 72.0 * depth,
            PairPotential::TruncHarmonic { stiffness, .. } | PairPotential::Splined { stiffness, .. } => {
                2.0 * stiffness
            }
        }
    }

    /// `lim k * W^(k)(r)` for `r -> infinity`.
    pub fn omega(&self) -> f64 {
        match *self {
            PairPotential::Ljts { .. } => 1.0,
            PairPotential::TruncHarmonic { plateau_plus, .. } => plateau_plus,
            PairPotential::Splined { omega, .. } => omega,
        }
    }

    /// Supremum of `k * W^(k)` over all separations, if finite.
    pub fn scaled_bound(&self) -> Option<f64> {
        match *self {
            PairPotential::Ljts { .. } => None,
            PairPotential::TruncHarmonic { plateau_plus, plateau_minus, .. } => {
                Some(plateau_plus.max(plateau_minus))
            }
            PairPotential::Splined { omega, .. } => Some(omega),
        }
    }

    /// Separations at which the active branch changes.
    pub fn kinks(&self, k: u32) -> Vec<f64> {
        let kf = k as f64;
        match *self {
            PairPotential::Ljts { depth } => {
                let s = 1.0 / (depth * kf).sqrt();
                if s < 1.0 {
                    vec![(1.0 - s).powf(-1.0 / 6.0)]
                } else {
                    vec![]
                }
            }
            PairPotential::TruncHarmonic { stiffness, plateau_plus, plateau_minus } => vec![
                1.0 + (plateau_plus / (kf * stiffness)).sqrt(),
                1.0 - (plateau_minus / (kf * stiffness)).sqrt(),
            ],
            PairPotential::Splined { .. } => vec![],
        }
    }

    /// Cell-level elastic threshold contributed by this potential: if the
    /// discrete gradient is within this distance of the rigid set, every bond
    /// using this potential is on its untruncated branch.
    pub fn cell_threshold(&self, k: u32) -> Result<f64> {
        let kf = k as f64;
        match *self {
            PairPotential::Ljts { depth } => {
                if depth <= 1.0 / kf {
                    return Err(Error::InvalidParameters(format!(
                        "LJTS depth {depth} must exceed 1/k = {}",
                        1.0 / kf
                    )));
                }
                let lo = (depth - 1.0 / kf).powf(1.0 / 6.0);
                let hi = (depth + (depth / kf).sqrt()).powf(1.0 / 6.0);
                Ok((hi - lo) / (2.0 * lo))
            }
            PairPotential::TruncHarmonic { stiffness, plateau_plus, plateau_minus } => {
                Ok((plateau_plus.min(plateau_minus) / (kf * stiffness)).sqrt() / 2f64.sqrt())
            }
            PairPotential::Splined { stiffness, omega } => {
                Ok((SPLINE_ONSET * omega / (kf * stiffness)).sqrt() / 2f64.sqrt())
            }
        }
    }
}

/// `pair_energy` with argument checks.
pub fn pair_energy(p: &PairPotential, r: f64, k: u32) -> Result<f64> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::NonFinitePosition);
    }
    if r <= 0.0 && matches!(p, PairPotential::Ljts { .. }) {
        return Err(Error::NonpositiveSeparation(r));
    }
    Ok(p.energy(r, k))
}

/// Penalty `strength / k` on cells whose discrete gradient lies within
/// `radius` of the orientation-reversing rigid set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrientationPenalty {
    pub strength: f64,
    pub radius: f64,
}

impl Default for OrientationPenalty {
    fn default() -> Self {
        Self { strength: 1.0, radius: 0.1 }
    }
}

impl OrientationPenalty {
    pub fn value(&self, y: &CellMatrix, k: u32) -> f64 {
        if self.strength == 0.0 {
            return 0.0;
        }
        if dist_reflected(&discrete_gradient(y)) < self.radius {
            self.strength / k as f64
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CellKind {
    Pair { nn: PairPotential, nnn: PairPotential },
    /// `min{W_0(y), cbar1 / k}` with `W_0` the harmonic spring cell of the given stiffness.
    SimplifiedMin { stiffness: f64, cbar1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellEnergyModel {
    pub cell: CellKind,
    #[serde(default)]
    pub orientation: OrientationPenalty,
}

/// Elastic threshold data of a model at a fixed `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticThresholds {
    pub c_frac: f64,
    /// Lower bound on cell energies outside the elastic regime.
    pub cbar1: f64,
    pub omega_nn: Option<f64>,
    pub omega_nnn: Option<f64>,
}

impl CellEnergyModel {
    pub fn pair(nn: PairPotential, nnn: PairPotential) -> Self {
        Self { cell: CellKind::Pair { nn, nnn }, orientation: OrientationPenalty::default() }
    }

    pub fn trunc_harmonic(stiffness: f64, plateau: f64) -> Self {
        let p = PairPotential::trunc_harmonic(stiffness, plateau);
        Self::pair(p, p)
    }

    pub fn ljts(depth: f64) -> Self {
        let p = PairPotential::Ljts { depth };
        Self::pair(p, p)
    }

    pub fn splined(stiffness: f64, omega: f64) -> Self {
        let p = PairPotential::Splined { stiffness, omega };
        Self::pair(p, p)
    }

    pub fn simplified_min(stiffness: f64, cbar1: f64) -> Self {
        Self { cell: CellKind::SimplifiedMin { stiffness, cbar1 }, orientation: OrientationPenalty::default() }
    }

    pub fn with_orientation(mut self, orientation: OrientationPenalty) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.cell {
            CellKind::Pair { nn, nnn } => {
                nn.validate()?;
                nnn.validate()?;
            }
            CellKind::SimplifiedMin { stiffness, cbar1 } => {
                if !(stiffness > 0.0 && cbar1 > 0.0 && stiffness.is_finite() && cbar1.is_finite()) {
                    return Err(Error::InvalidParameters(format!("{:?}", self.cell)));
                }
            }
        }
        let o = self.orientation;
        if !(o.strength >= 0.0 && o.radius >= 0.0 && o.strength.is_finite() && o.radius.is_finite()) {
            return Err(Error::InvalidParameters(format!("{o:?}")));
        }
        Ok(())
    }

    pub fn pair_potentials(&self) -> Option<(PairPotential, PairPotential)> {
        match self.cell {
            CellKind::Pair { nn, nnn } => Some((nn, nnn)),
            CellKind::SimplifiedMin { .. } => None,
        }
    }

    /// Both potentials saturate at finite plateaus.
    pub fn is_mass_spring(&self) -> bool {
        match self.cell {
            CellKind::Pair { nn, nnn } => nn.scaled_bound().is_some() && nnn.scaled_bound().is_some(),
            CellKind::SimplifiedMin { .. } => false,
        }
    }

    /// Stable hash of the model parameters.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("model serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Hessian of the untruncated core at the reference cell, restricted to
    /// the bonds present in `mask`.
    pub fn core_hessian(&self, mask: u8) -> CellHessian {
        let (cn, cnn) = match self.cell {
            CellKind::Pair { nn, nnn } => (nn.core_curvature(), nnn.core_curvature()),
            CellKind::SimplifiedMin { stiffness, .. } => (2.0 * stiffness, 2.0 * stiffness),
        };
        let idb = crate::lattice::reference_cell();
        let mut h = CellHessian::zeros();
        for b in CELL_BONDS.iter() {
            if !has_bond(mask, b.a, b.b) {
                continue;
            }
            let d: Vector3<f64> = idb.column(b.a) - idb.column(b.b);
            let n = d.normalize();
            // second derivative of W(|d| / s) along the bond, s^2 = |d|^2
            let c = b.weight * if b.kind == BondKind::Nn { cn } else { cnn } / d.norm_squared();
            let block: Matrix3<f64> = c * n * n.transpose();
            for (i, j, sign) in [(b.a, b.a, 1.0), (b.b, b.b, 1.0), (b.a, b.b, -1.0), (b.b, b.a, -1.0)] {
                let mut view = h.fixed_view_mut::<3, 3>(3 * i, 3 * j);
                view += sign * block;
            }
        }
        h
    }

    /// Bond-sum energy of the untruncated core.
    pub fn core_energy(&self, mask: u8, y: &CellMatrix) -> f64 {
        let (nn, nnn) = match self.cell {
            CellKind::Pair { nn, nnn } => (nn, nnn),
            CellKind::SimplifiedMin { stiffness, .. } => {
                let p = PairPotential::trunc_harmonic(stiffness, 1.0);
                (p, p)
            }
        };
        bond_sum(mask, y, |kind, r| match kind {
            BondKind::Nn => nn.core_energy(r),
            BondKind::Nnn => nnn.core_energy(r),
        })
    }

    /// Cell energy at refinement `k` of a cell whose real corners are given by
    /// `mask`. The orientation penalty applies to full (interior) cells only.
    pub fn cell_energy(&self, mask: u8, y: &CellMatrix, k: u32) -> f64 {
        let elastic = match self.cell {
            CellKind::Pair { nn, nnn } => bond_sum(mask, y, |kind, r| match kind {
                BondKind::Nn => nn.energy(r, k),
                BondKind::Nnn => nnn.energy(r, k),
            }),
            CellKind::SimplifiedMin { cbar1, .. } => self.core_energy(mask, y).min(cbar1 / k as f64),
        };
        if mask == FULL_MASK {
            elastic + self.orientation.value(y, k)
        } else {
            elastic
        }
    }

    /// Checked variant of [`cell_energy`](Self::cell_energy).
    pub fn cell_energy_checked(&self, mask: u8, y: &CellMatrix, k: u32) -> Result<f64> {
        for (slot, col) in y.column_iter().enumerate() {
            if mask & (1 << slot) != 0 && !col.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinitePosition);
            }
        }
        Ok(self.cell_energy(mask, y, k))
    }

    /// Adds the gradient of the cell energy with respect to the corners to `grad`.
    pub fn cell_gradient(&self, mask: u8, y: &CellMatrix, k: u32, grad: &mut CellMatrix) {
        match self.cell {
            CellKind::Pair { nn, nnn } => bond_gradient(mask, y, grad, |kind, r| match kind {
                BondKind::Nn => nn.derivative(r, k),
                BondKind::Nnn => nnn.derivative(r, k),
            }),
            CellKind::SimplifiedMin { stiffness, cbar1 } => {
                if self.core_energy(mask, y) < cbar1 / k as f64 {
                    bond_gradient(mask, y, grad, |_, r| 2.0 * stiffness * (r - 1.0));
                }
            }
        }
    }

    pub fn thresholds(&self, k: u32) -> Result<ElasticThresholds> {
        self.validate()?;
        let kf = k as f64;
        let c_w = 0.25 * self.min_positive_curvature();
        let penalty = self.orientation.strength / kf;
        match self.cell {
            CellKind::Pair { nn, nnn } => {
                let c_frac = nn.cell_threshold(k)?.min(nnn.cell_threshold(k)?);
                let omega_min = nn.omega().min(nnn.omega());
                let mut cbar1 = (omega_min / (8.0 * kf)).min(c_w * c_frac * c_frac);
                if penalty > 0.0 {
                    cbar1 = cbar1.min(penalty);
                }
                Ok(ElasticThresholds { c_frac, cbar1, omega_nn: Some(nn.omega()), omega_nnn: Some(nnn.omega()) })
            }
            CellKind::SimplifiedMin { stiffness, cbar1 } => {
                // W_0 <= 12 K dist^2 on the full cell
                let c_frac = (cbar1 / (12.0 * stiffness * kf)).sqrt();
                let mut lower = (cbar1 / kf).min(c_w * c_frac * c_frac);
                if penalty > 0.0 {
                    lower = lower.min(penalty);
                }
                Ok(ElasticThresholds { c_frac, cbar1: lower, omega_nn: None, omega_nnn: None })
            }
        }
    }

    /// Upper bound on every cell energy at refinement `k`, if the model is bounded.
    pub fn upper_bound(&self, k: u32) -> Option<f64> {
        let kf = k as f64;
        let bulk = match self.cell {
            CellKind::Pair { nn, nnn } => {
                let nn_total: f64 = CELL_BONDS.iter().filter(|b| b.kind == BondKind::Nn).map(|b| b.weight).sum();
                let nnn_total: f64 = CELL_BONDS.iter().filter(|b| b.kind == BondKind::Nnn).map(|b| b.weight).sum();
                nn_total * nn.scaled_bound()? + nnn_total * nnn.scaled_bound()?
            }
            CellKind::SimplifiedMin { cbar1, .. } => cbar1,
        };
        Some((bulk + self.orientation.strength) / kf)
    }

    /// Smallest nonzero eigenvalue of the interior core Hessian.
    pub fn min_positive_curvature(&self) -> f64 {
        let eig = self.core_hessian(FULL_MASK).symmetric_eigenvalues();
        let mut vals: Vec<f64> = eig.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // six rigid directions
        vals[6]
    }
}

fn has_bond(mask: u8, a: usize, b: usize) -> bool {
    mask & (1 << a) != 0 && mask & (1 << b) != 0
}

fn bond_length(y: &CellMatrix, a: usize, b: usize, kind: BondKind) -> (Vector3<f64>, f64, f64) {
    let d: Vector3<f64> = y.column(a) - y.column(b);
    let len = d.norm();
    let scale = if kind == BondKind::Nn { 1.0 } else { std::f64::consts::SQRT_2 };
    (d, len, scale)
}

fn bond_sum(mask: u8, y: &CellMatrix, w: impl Fn(BondKind, f64) -> f64) -> f64 {
    let mut e = 0.0;
    for b in CELL_BONDS.iter() {
        if has_bond(mask, b.a, b.b) {
            let (_, len, scale) = bond_length(y, b.a, b.b, b.kind);
            e += b.weight * w(b.kind, len / scale);
        }
    }
    e
}

fn bond_gradient(mask: u8, y: &CellMatrix, grad: &mut CellMatrix, dw: impl Fn(BondKind, f64) -> f64) {
    for b in CELL_BONDS.iter() {
        if has_bond(mask, b.a, b.b) {
            let (d, len, scale) = bond_length(y, b.a, b.b, b.kind);
            let f = b.weight * dw(b.kind, len / scale) / (scale * len);
            let g = f * d;
            let mut ca = grad.column_mut(b.a);
            ca += g;
            let mut cb = grad.column_mut(b.b);
            cb -= g;
        }
    }
}
