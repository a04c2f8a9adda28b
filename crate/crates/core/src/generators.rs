//! Deformation families: rigid motions, recovery sequences of smooth frames,
//! and frames with spliced crack profiles.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::crack::{clean_break_config, kink_config, CrackProblem, CrackWindow, ScheduleEntry};
use crate::elastic::{q3rel, QuadraticFormTable, SkewGenerator};
use crate::energy::Deformation;
use crate::error::{Error, Result};
use crate::frame::FrameCurve;
use crate::geometry::is_rotation;
use crate::lattice::{CrossSection, RodLattice};
use crate::potentials::CellEnergyModel;

/// `y(x) = R x + c` at every atom.
pub fn rigid_config(lat: Arc<RodLattice>, r: &Matrix3<f64>, c: &Vector3<f64>) -> Result<Deformation> {
    if !is_rotation(r, 1e-9) {
        return Err(Error::NonRotation);
    }
    Deformation::from_fn(lat, |x| r * x + c)
}

/// Per-segment corrector data: `q' = R g` and `beta(x1, x') = R(x1) alpha(x')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentCorrector {
    pub g: Vector3<f64>,
    /// Indexed like `CrossSection::ext_corners`.
    pub alpha: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectorChoice {
    #[default]
    None,
    /// Minimizers of the relaxed form for each segment generator.
    Optimal,
}

/// `y(x) = y~(x1) + (x2 d2 + x3 d3)/k + q(x1)/k + beta(x)/k^2` with `x'` in
/// hatted units.
#[derive(Debug, Clone)]
pub struct RecoveryAnsatz {
    pub frame: FrameCurve,
    pub cs: CrossSection,
    pub k: u32,
    /// One entry per frame segment, or empty for `q = beta = 0`.
    pub correctors: Vec<SegmentCorrector>,
}

impl RecoveryAnsatz {
    pub fn new(frame: FrameCurve, cs: CrossSection, k: u32) -> Self {
        Self { frame, cs, k, correctors: Vec::new() }
    }

    /// Uses the relaxed-form minimizers of each segment as correctors.
    pub fn with_optimal_correctors(mut self, table: &QuadraticFormTable) -> Result<Self> {
        self.correctors = (0..self.frame.segment_count())
            .map(|n| {
                let sol = q3rel(&SkewGenerator::new(self.frame.generator(n))?, &self.cs, table)?;
                Ok(SegmentCorrector { g: sol.g, alpha: sol.alpha })
            })
            .collect::<Result<_>>()?;
        Ok(self)
    }

    pub fn with_correctors(self, choice: CorrectorChoice, table: &QuadraticFormTable) -> Result<Self> {
        match choice {
            CorrectorChoice::None => Ok(self),
            CorrectorChoice::Optimal => self.with_optimal_correctors(table),
        }
    }

    fn check(&self) -> Result<()> {
        if !self.correctors.is_empty() {
            if self.correctors.len() != self.frame.segment_count() {
                return Err(Error::InvalidParameters(format!(
                    "{} correctors for {} segments",
                    self.correctors.len(),
                    self.frame.segment_count()
                )));
            }
            let n = self.cs.ext_corners().len();
            if self.correctors.iter().any(|c| c.alpha.len() != n) {
                return Err(Error::InvalidParameters(format!("corrector alpha needs {n} entries")));
            }
        }
        Ok(())
    }

    /// `q` at the start of each segment, continuous across breakpoints.
    fn q_offsets(&self) -> Vec<Vector3<f64>> {
        let mut out = Vec::with_capacity(self.frame.segment_count());
        let mut q = Vector3::zeros();
        for n in 0..self.frame.segment_count() {
            out.push(q);
            if let Some(c) = self.correctors.get(n) {
                let (_, end) = self.frame.segment_bounds(n);
                q += self.frame.rotation_integral_in(n, end) * c.g;
            }
        }
        out
    }

    /// Ansatz value at `s` on segment `n` for the hatted corner `c`.
    fn value(&self, q0: &[Vector3<f64>], n: usize, s: f64, c: (i32, i32)) -> Vector3<f64> {
        let k = self.k as f64;
        let r = self.frame.rotation_in(n, s);
        let mut y = self.frame.position_in(n, s) + r * Vector3::new(0.0, c.0 as f64, c.1 as f64) / k;
        if let Some(cor) = self.correctors.get(n) {
            let q = q0[n] + self.frame.rotation_integral_in(n, s) * cor.g;
            let slot = self.cs.ext_corners().iter().position(|e| *e == c).expect("lattice corner");
            y += q / k + r * cor.alpha[slot] / (k * k);
        }
        y
    }
}

/// Lattice evaluation of the ansatz for a frame without cracks.
pub fn smooth_frame_config(ansatz: &RecoveryAnsatz) -> Result<Deformation> {
    if ansatz.frame.cracks().next().is_some() {
        return Err(Error::InadmissibleFrame("frame has jumps; use the spliced generator".into()));
    }
    ansatz.check()?;
    let lat = Arc::new(RodLattice::new(ansatz.cs.clone(), ansatz.frame.length(), ansatz.k)?);
    let q0 = ansatz.q_offsets();
    let k = ansatz.k as f64;
    let pos = (0..lat.atom_count())
        .map(|a| {
            let c = lat.atom_coords(a);
            let s = c[0] as f64 / k;
            ansatz.value(&q0, ansatz.frame.segment_at(s), s, (c[1], c[2]))
        })
        .collect();
    Deformation::new(lat, pos)
}

/// Crack profile on a window lattice with rigid boundary zones `x -> x` on
/// the left and `x -> r_rel x + u` on the right.
#[derive(Debug, Clone)]
pub struct CrackProfile {
    pub deformation: Deformation,
    pub r_rel: Matrix3<f64>,
    pub u: Vector3<f64>,
}

/// Clean break for a nonzero jump, kink otherwise.
pub fn default_profile(
    u: &Vector3<f64>,
    r_rel: &Matrix3<f64>,
    model: &CellEnergyModel,
    cs: &CrossSection,
    entry: ScheduleEntry,
) -> Result<CrackProfile> {
    let p = CrackProblem { u: *u, r_rel: *r_rel, model: *model, cs: cs.clone(), schedule: Vec::new() };
    if *u != Vector3::zeros() {
        Ok(CrackProfile { deformation: clean_break_config(&p, entry)?, r_rel: *r_rel, u: *u })
    } else {
        let kc = kink_config(&p, entry)?;
        Ok(CrackProfile { deformation: kc.deformation, r_rel: *r_rel, u: kc.right_translation })
    }
}

/// Default splice half-width `k^(-1/2)`.
pub fn default_radius(k: u32) -> f64 {
    1.0 / (k as f64).sqrt()
}

/// Jump of a frame in the frame of its left side: `(R(s-)^T [y~], R(s-)^T R(s+))`.
pub fn local_jump(fc: &FrameCurve, position: f64) -> (Vector3<f64>, Matrix3<f64>) {
    let j = fc.jumps().iter().find(|j| j.position == position).expect("breakpoint");
    let rm = fc.rotation_in(fc.segment_before(position), position);
    (rm.transpose() * j.translation, j.rotation)
}

/// Smooth ansatz away from the cracks of `ansatz.frame`; in the `2 floor(r k)`
/// cells around each crack the profile is spliced in. The profile is attached
/// to the rigid tangent of the frame at the left edge of its window, and the
/// remainder of the rod is moved rigidly to continue from its right zone.
/// `profiles[i]` belongs to the `i`-th crack; `None` selects the default.
pub fn jump_frame_config(
    ansatz: &RecoveryAnsatz,
    model: &CellEnergyModel,
    r: Option<f64>,
    profiles: &[Option<CrackProfile>],
) -> Result<Deformation> {
    ansatz.check()?;
    let fc = &ansatz.frame;
    let k = ansatz.k;
    let kf = k as f64;
    let r = r.unwrap_or_else(|| default_radius(k));
    let lat = Arc::new(RodLattice::new(ansatz.cs.clone(), fc.length(), k)?);
    let entry = ScheduleEntry::new(r, k);
    let m = entry.half_layers() as i64;
    if m == 0 {
        return Err(Error::InvalidParameters(format!("splice radius {r} holds no layer at k = {k}")));
    }

    let cracks: Vec<f64> = fc.cracks().map(|j| j.position).collect();
    if !profiles.is_empty() && profiles.len() != cracks.len() {
        return Err(Error::InvalidParameters(format!("{} profiles for {} cracks", profiles.len(), cracks.len())));
    }
    for pair in cracks.windows(2) {
        if pair[1] - pair[0] < 4.0 * r {
            return Err(Error::JumpTooClose(pair[0], pair[1]));
        }
    }

    let layers = lat.layers() as i64;
    let centres: Vec<i64> = cracks.iter().map(|s| (kf * s * (1.0 + 1e-12)).floor() as i64).collect();
    for (&c, &s) in centres.iter().zip(&cracks) {
        if c - m < 0 || c + m > layers {
            return Err(Error::JumpTooClose(s, if c - m < 0 { 0.0 } else { fc.length() }));
        }
    }

    let window = CrackWindow::new(&ansatz.cs, entry)?;
    let mut spliced = Vec::with_capacity(cracks.len());
    for (i, &s) in cracks.iter().enumerate() {
        let (u, rr) = local_jump(fc, s);
        let profile = match profiles.get(i).cloned().flatten() {
            Some(p) => p,
            None => default_profile(&u, &rr, model, &ansatz.cs, entry)?,
        };
        check_profile(&window, &profile)?;
        spliced.push(profile);
    }

    let q0 = ansatz.q_offsets();
    let per = lat.atoms_per_layer();
    let corners = ansatz.cs.corners();
    let mut pos = vec![Vector3::zeros(); lat.atom_count()];
    // rigid motion applied to the current smooth piece
    let (mut rot, mut shift) = (Matrix3::identity(), Vector3::zeros());
    let mut layer = 0i64;
    for (ci, profile) in spliced.iter().enumerate() {
        let a = centres[ci] - m;
        for l in layer..a {
            let s = l as f64 / kf;
            let n = fc.segment_at(s);
            for (c, &corner) in corners.iter().enumerate() {
                pos[l as usize * per + c] = rot * ansatz.value(&q0, n, s, corner) + shift;
            }
        }
        // rigid tangent at the left edge of the window
        let sa = a as f64 / kf;
        let na = fc.segment_before(sa);
        let o = rot * fc.rotation_in(na, sa);
        let origin = rot * ansatz.value(&q0, na, sa, (0, 0)) + shift;
        let c_minus = origin - o * Vector3::new(-m as f64 / kf, 0.0, 0.0);
        for j in -m..=m {
            let l = (centres[ci] + j) as usize;
            for c in 0..per {
                let atom = ((j + m) as usize) * per + c;
                pos[l * per + c] = o * profile.deformation.positions()[atom] + c_minus;
            }
        }
        // continue after the window with the rigid frame of the right zone
        let b = centres[ci] + m;
        let sb = b as f64 / kf;
        let nb = fc.segment_at(sb);
        let target_rot = o * profile.r_rel;
        let target_origin = o * (profile.r_rel * Vector3::new(m as f64 / kf, 0.0, 0.0) + profile.u) + c_minus;
        rot = target_rot * fc.rotation_in(nb, sb).transpose();
        shift = target_origin - rot * ansatz.value(&q0, nb, sb, (0, 0));
        layer = b + 1;
    }
    for l in layer..=layers {
        let s = l as f64 / kf;
        let n = fc.segment_at(s);
        for (c, &corner) in corners.iter().enumerate() {
            pos[l as usize * per + c] = rot * ansatz.value(&q0, n, s, corner) + shift;
        }
    }
    Deformation::new(lat, pos)
}

/// The profile lives on the window lattice and its boundary zones are rigid
/// with the declared data.
fn check_profile(w: &CrackWindow, p: &CrackProfile) -> Result<()> {
    let lat = p.deformation.lattice();
    if lat.k() != w.lattice().k() || lat.layers() != w.lattice().layers() || lat.cross_section() != w.lattice().cross_section() {
        return Err(Error::ProfileBoundaryMismatch(f64::INFINITY));
    }
    let k = lat.k() as f64;
    let mut worst: f64 = 0.0;
    for a in 0..lat.atom_count() {
        if !w.is_frozen(a) {
            continue;
        }
        let x = w.reference(a);
        let t = if w.axial(a) < 0 { x } else { p.r_rel * x + p.u };
        worst = worst.max(k * (p.deformation.positions()[a] - t).norm());
    }
    if worst > 1e-9 {
        return Err(Error::ProfileBoundaryMismatch(worst));
    }
    Ok(())
}
