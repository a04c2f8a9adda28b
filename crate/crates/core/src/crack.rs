//! The crack cell problem on blown-up windows.
//!
//! An entry `(r, k)` of a schedule is realised as a window lattice with `2m`
//! axial cells, `m = floor(r k)`, whose atom layers carry the axial index
//! `j = -m..=m` (blown-up coordinate `w = j / (r k)`, physical offset `j / k`).
//! Atoms with `|j| >= 3 r k / 4` form the rigid boundary zones: the left zone
//! follows `x -> x`, the right zone `x -> R_rel x + u`. The energy of a window
//! configuration is `k E^(k)`.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use petgraph::unionfind::UnionFind;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descent::{minimize, DescentOptions, DescentStatus};
use crate::energy::{slice_profile, Deformation, Evaluator};
use crate::error::{Error, Result};
use crate::geometry::is_rotation;
use crate::lattice::{BondKind, CrossSection, RodLattice};
use crate::potentials::CellEnergyModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub r: f64,
    pub k: u32,
}

impl ScheduleEntry {
    pub fn new(r: f64, k: u32) -> Self {
        Self { r, k }
    }

    pub fn half_layers(&self) -> usize {
        (self.r * self.k as f64 * (1.0 + 1e-12)).floor() as usize
    }
}

/// Geometry of one blown-up window.
#[derive(Debug, Clone)]
pub struct CrackWindow {
    lattice: Arc<RodLattice>,
    entry: ScheduleEntry,
    m: usize,
    frozen: Vec<bool>,
}

impl CrackWindow {
    pub fn new(cs: &CrossSection, entry: ScheduleEntry) -> Result<Self> {
        if !(entry.r > 0.0 && entry.r < 1.0) {
            return Err(Error::InvalidParameters(format!("window radius r = {} not in (0, 1)", entry.r)));
        }
        let m = entry.half_layers();
        if m == 0 {
            return Err(Error::InvalidParameters(format!("window r = {} holds no layer at k = {}", entry.r, entry.k)));
        }
        let lattice = Arc::new(RodLattice::window(cs.clone(), 2 * m, entry.k)?);
        let rk = entry.r * entry.k as f64;
        let per = lattice.atoms_per_layer();
        let frozen = (0..lattice.atom_count()).map(|a| ((a / per) as f64 - m as f64).abs() >= 0.75 * rk).collect();
        Ok(Self { lattice, entry, m, frozen })
    }

    pub fn lattice(&self) -> &Arc<RodLattice> {
        &self.lattice
    }

    pub fn entry(&self) -> ScheduleEntry {
        self.entry
    }

    pub fn half_layers(&self) -> usize {
        self.m
    }

    /// Axial index `j` of an atom.
    pub fn axial(&self, atom: usize) -> i32 {
        (atom / self.lattice.atoms_per_layer()) as i32 - self.m as i32
    }

    /// Physical reference position with `j = 0` at the origin.
    pub fn reference(&self, atom: usize) -> Vector3<f64> {
        let c = self.lattice.atom_coords(atom);
        Vector3::new(self.axial(atom) as f64, c[1] as f64, c[2] as f64) / self.entry.k as f64
    }

    pub fn is_frozen(&self, atom: usize) -> bool {
        self.frozen[atom]
    }

    pub fn free_atoms(&self) -> Vec<usize> {
        (0..self.frozen.len()).filter(|&a| !self.frozen[a]).collect()
    }

    /// Two rigid halves split between `j = 0` and `j = 1`.
    pub fn two_halves(&self, r_plus: &Matrix3<f64>, y_plus: &Vector3<f64>) -> Deformation {
        let pos = (0..self.lattice.atom_count())
            .map(|a| {
                let x = self.reference(a);
                if self.axial(a) <= 0 {
                    x
                } else {
                    r_plus * x + y_plus
                }
            })
            .collect();
        Deformation::new(self.lattice.clone(), pos).expect("finite rigid data")
    }
}

/// Data of the cell problem `phi(u, R_rel)`.
#[derive(Debug, Clone)]
pub struct CrackProblem {
    pub u: Vector3<f64>,
    pub r_rel: Matrix3<f64>,
    pub model: CellEnergyModel,
    pub cs: CrossSection,
    pub schedule: Vec<ScheduleEntry>,
}

impl CrackProblem {
    pub fn new(
        u: Vector3<f64>,
        r_rel: Matrix3<f64>,
        model: CellEnergyModel,
        cs: CrossSection,
        schedule: Vec<ScheduleEntry>,
    ) -> Result<Self> {
        if !is_rotation(&r_rel, 1e-9) {
            return Err(Error::NonRotation);
        }
        if !u.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameters("non-finite jump".into()));
        }
        model.validate()?;
        for e in &schedule {
            if e.r * (e.k as f64) < 8.0 {
                return Err(Error::InvalidParameters(format!("r k = {} below 8", e.r * e.k as f64)));
            }
            CrackWindow::new(&cs, *e)?;
        }
        Ok(Self { u, r_rel, model, cs, schedule })
    }

    pub fn window(&self, entry: ScheduleEntry) -> Result<CrackWindow> {
        CrackWindow::new(&self.cs, entry)
    }

    /// Rigid boundary target of an atom.
    pub fn target(&self, w: &CrackWindow, atom: usize) -> Vector3<f64> {
        let x = w.reference(atom);
        if w.axial(atom) < 0 {
            x
        } else {
            self.r_rel * x + self.u
        }
    }

    fn with_exact_boundary(&self, w: &CrackWindow, mut pos: Vec<Vector3<f64>>) -> Vec<Vector3<f64>> {
        for (a, p) in pos.iter_mut().enumerate() {
            if w.is_frozen(a) {
                *p = self.target(w, a);
            }
        }
        pos
    }
}

/// Two rigid halves with the prescribed boundary data, split at `j = 0 | 1`.
pub fn clean_break_config(p: &CrackProblem, entry: ScheduleEntry) -> Result<Deformation> {
    let limit = 2.0 / entry.k as f64;
    let norm = p.u.norm();
    if norm > 0.0 && norm < limit {
        return Err(Error::Interpenetration { norm, limit });
    }
    Ok(p.window(entry)?.two_halves(&p.r_rel, &p.u))
}

/// Closest cross-gap pair of the kink construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPair {
    /// Cross-section corner on the right (`j = 1`) and left (`j = 0`) layer.
    pub right: (i32, i32),
    pub left: (i32, i32),
    pub kind: BondKind,
}

#[derive(Debug, Clone)]
pub struct KinkConfig {
    pub deformation: Deformation,
    pub contact_time: f64,
    pub contact: ContactPair,
    /// Translation of the right half, which tends to zero as `k` grows.
    pub right_translation: Vector3<f64>,
}

/// Smallest `t` in `[0, 1]` with `|d - t w| = rho`, given `|d| > rho`.
fn first_contact(d: &Vector3<f64>, w: &Vector3<f64>, rho: f64) -> Option<f64> {
    let a = w.norm_squared();
    let b = -2.0 * d.dot(w);
    let c = d.norm_squared() - rho * rho;
    let disc = b * b - 4.0 * a * c;
    if a == 0.0 || disc < 0.0 {
        return None;
    }
    let t = (-b - disc.sqrt()) / (2.0 * a);
    (0.0..=1.0).contains(&t).then_some(t)
}

/// Shifted-contact kink: start from two separated rigid halves related by
/// `R_rel`, then translate the right half back towards the left until the
/// first cross-gap NN pair reaches distance `1/k` or NNN pair `sqrt(2)/k`.
pub fn kink_config(p: &CrackProblem, entry: ScheduleEntry) -> Result<KinkConfig> {
    if (p.r_rel - Matrix3::identity()).norm() < 1e-12 {
        return Err(Error::InvalidParameters("kink needs a nontrivial relative rotation".into()));
    }
    if p.u != Vector3::zeros() {
        return Err(Error::InvalidParameters("kink needs a zero jump".into()));
    }
    let w = p.window(entry)?;
    let kf = entry.k as f64;
    let corners = p.cs.corners();
    let left = |c: (i32, i32)| Vector3::new(0.0, c.0 as f64, c.1 as f64) / kf;
    let right = |c: (i32, i32)| p.r_rel * Vector3::new(1.0, c.0 as f64, c.1 as f64) / kf;
    let mut pairs = Vec::new();
    for &a in corners {
        for &b in corners {
            let d2 = (a.0 - b.0).pow(2) + (a.1 - b.1).pow(2);
            match d2 {
                0 => pairs.push((a, b, BondKind::Nn, 1.0 / kf)),
                1 => pairs.push((a, b, BondKind::Nnn, std::f64::consts::SQRT_2 / kf)),
                _ => {}
            }
        }
    }
    let e1 = Vector3::x();
    let mut dir = e1 + p.r_rel * e1;
    if dir.norm() < 1e-8 {
        dir = Vector3::y();
    }
    dir.normalize_mut();
    let diam = corners
        .iter()
        .flat_map(|a| corners.iter().map(move |b| (((a.0 - b.0).pow(2) + (a.1 - b.1).pow(2)) as f64).sqrt()))
        .fold(0.0, f64::max);
    let mut sep = (4.0 + 2.0 * diam) / kf;
    let separated = |s: f64| pairs.iter().all(|(a, b, _, rho)| (right(*a) + s * dir - left(*b)).norm() > *rho);
    let mut tries = 0;
    while !separated(sep) {
        sep *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::NoContactFound);
        }
    }
    let u_aux = sep * dir;
    let x0 = corners[0];
    let shift = right(x0) + u_aux - left(x0);
    let mut best: Option<(f64, ContactPair)> = None;
    for (a, b, kind, rho) in &pairs {
        let d = right(*a) + u_aux - left(*b);
        if let Some(t) = first_contact(&d, &shift, *rho) {
            if best.is_none_or(|(tb, _)| t < tb) {
                best = Some((t, ContactPair { right: *a, left: *b, kind: *kind }));
            }
        }
    }
    let (t0, contact) = best.ok_or(Error::NoContactFound)?;
    let right_translation = u_aux - t0 * shift;
    Ok(KinkConfig {
        deformation: w.two_halves(&p.r_rel, &right_translation),
        contact_time: t0,
        contact,
        right_translation,
    })
}

/// `#L omega_NN + #{ordered in-plane unit pairs} omega_NNN`.
pub fn phi_explicit_masspring(u: &Vector3<f64>, model: &CellEnergyModel, cs: &CrossSection) -> Result<f64> {
    if !model.is_mass_spring() {
        return Err(Error::ModelNotMassSpring);
    }
    if *u == Vector3::zeros() {
        return Err(Error::ModelNotApplicable("explicit crack energy needs a nonzero jump".into()));
    }
    let (nn, nnn) = model.pair_potentials().ok_or(Error::ModelNotMassSpring)?;
    Ok(cs.corners().len() as f64 * nn.omega() + cs.ordered_unit_pairs() as f64 * nnn.omega())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrackOptions {
    /// Total number of starting configurations per schedule entry.
    pub starts: usize,
    pub seed: u64,
    /// Standard deviation of the seeded perturbations, in lattice spacings.
    pub noise: f64,
    pub descent: DescentOptions,
    /// Maximum number of bond-reactivation attempts after descent.
    pub reactivations: usize,
    /// Raise `NonConvergent` when every start of an entry stalls.
    pub strict: bool,
}

impl Default for CrackOptions {
    fn default() -> Self {
        Self { starts: 8, seed: 0, noise: 0.05, descent: DescentOptions::default(), reactivations: 24, strict: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartRecord {
    pub name: String,
    pub initial: f64,
    pub fin: f64,
    pub iterations: usize,
    pub status: DescentStatus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntryResult {
    pub r: f64,
    pub k: u32,
    pub energy: f64,
    pub best_start: String,
    pub starts: Vec<StartRecord>,
    pub reactivated: usize,
    pub broken_slices: usize,
    /// Fibres with at least one fully broken NN bond (mass-spring models).
    pub gap_fibres: Option<usize>,
    #[serde(skip)]
    pub deformation: Option<Deformation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrackSolution {
    pub u: [f64; 3],
    pub r_rel: [[f64; 3]; 3],
    pub schedule: Vec<ScheduleEntry>,
    pub entries: Vec<EntryResult>,
    /// Energy of the last schedule entry.
    pub estimate: f64,
    pub nonincreasing: bool,
    /// Largest minus smallest per-entry energy.
    pub spread: f64,
    /// `k cbar1^(k)` at the last entry.
    pub lower_bound: f64,
    pub fibres: usize,
}

impl CrackSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// Every fibre of the final minimizer carries a full gap.
    pub fn gap_in_every_fibre(&self) -> bool {
        self.entries.last().and_then(|e| e.gap_fibres).is_some_and(|g| g == self.fibres)
    }
}

fn starts(p: &CrackProblem, w: &CrackWindow, opts: &CrackOptions) -> Vec<(String, Vec<Vector3<f64>>)> {
    let entry = w.entry();
    let mut out: Vec<(String, Vec<Vector3<f64>>)> = Vec::new();
    if let Ok(d) = clean_break_config(p, entry) {
        out.push(("clean_break".into(), d.into_positions()));
    }
    if p.u == Vector3::zeros() {
        if let Ok(kc) = kink_config(p, entry) {
            out.push(("kink".into(), p.with_exact_boundary(w, kc.deformation.into_positions())));
        }
    }
    // straight interpolation of the two rigid maps across the free zone
    let rk = entry.r * entry.k as f64;
    let interp = (0..w.lattice().atom_count())
        .map(|a| {
            let x = w.reference(a);
            let s = ((w.axial(a) as f64 + 0.75 * rk) / (1.5 * rk)).clamp(0.0, 1.0);
            (1.0 - s) * x + s * (p.r_rel * x + p.u)
        })
        .collect();
    out.push(("interpolation".into(), p.with_exact_boundary(w, interp)));
    let base = out.len();
    let normal = Normal::new(0.0, opts.noise / entry.k as f64).expect("finite noise");
    let mut n = 0;
    while out.len() < opts.starts.max(base) {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ ((entry.k as u64) << 32) ^ (n as u64).wrapping_mul(0x9e37_79b9));
        let (name, src) = &out[n % base];
        let mut pos = src.clone();
        for (a, q) in pos.iter_mut().enumerate() {
            if !w.is_frozen(a) {
                *q += Vector3::from_fn(|_, _| normal.sample(&mut rng));
            }
        }
        out.push((format!("{name}+noise{n}"), pos));
        n += 1;
    }
    out
}

/// Fully broken bonds (on the plateau) with a free endpoint.
fn broken_bonds(p: &CrackProblem, w: &CrackWindow, pos: &[Vector3<f64>]) -> Vec<(usize, usize, f64)> {
    let Some((nn, nnn)) = p.model.pair_potentials() else { return Vec::new() };
    let k = w.entry().k;
    let kf = k as f64;
    w.lattice()
        .bonds()
        .into_iter()
        .filter(|(a, b, _)| !w.is_frozen(*a) || !w.is_frozen(*b))
        .filter_map(|(a, b, kind)| {
            let (pot, rest) = match kind {
                BondKind::Nn => (nn, 1.0),
                BondKind::Nnn => (nnn, std::f64::consts::SQRT_2),
            };
            let r = kf * (pos[a] - pos[b]).norm() / rest;
            let broken = r > 1.0 && pot.scaled_bound().is_some_and(|bd| kf * pot.energy(r, k) >= bd * (1.0 - 1e-12));
            broken.then_some((a, b, rest / kf))
        })
        .collect()
}

fn gap_fibres(p: &CrackProblem, w: &CrackWindow, pos: &[Vector3<f64>]) -> Option<usize> {
    let (nn, _) = p.model.pair_potentials()?;
    let bound = nn.scaled_bound()?;
    let k = w.entry().k;
    let kf = k as f64;
    let lat = w.lattice();
    let per = lat.atoms_per_layer();
    let count = (0..per)
        .filter(|&c| {
            (0..lat.layers()).any(|l| {
                let r = kf * (pos[l * per + c] - pos[(l + 1) * per + c]).norm();
                r > 1.0 && kf * nn.energy(r, k) >= bound * (1.0 - 1e-12)
            })
        })
        .count();
    Some(count)
}

fn solve_entry(p: &CrackProblem, entry: ScheduleEntry, opts: &CrackOptions) -> Result<EntryResult> {
    let w = p.window(entry)?;
    let ev = Evaluator::new(&p.model, w.lattice());
    let free = w.free_atoms();
    let seeds = starts(p, &w, opts);
    let runs: Vec<_> = seeds
        .par_iter()
        .map(|(name, pos)| {
            let initial = ev.scaled_energy(pos);
            let res = minimize(&ev, pos, &free, entry.k, &opts.descent);
            (StartRecord { name: name.clone(), initial, fin: res.energy, iterations: res.iterations, status: res.status }, res)
        })
        .collect();
    let (best_idx, _) = runs
        .iter()
        .enumerate()
        .filter(|(_, (_, r))| r.energy.is_finite())
        .min_by(|a, b| a.1 .1.energy.total_cmp(&b.1 .1.energy))
        .ok_or_else(|| Error::NonConvergent { reason: "no start has finite energy".into(), best: f64::INFINITY })?;
    if opts.strict && runs.iter().all(|(_, r)| r.status == DescentStatus::Stalled) {
        return Err(Error::NonConvergent { reason: format!("all starts stalled at k = {}", entry.k), best: runs[best_idx].1.energy });
    }
    let mut best = runs[best_idx].1.clone();
    let best_start = runs[best_idx].0.name.clone();

    let mut reactivated = 0;
    let reopts = DescentOptions { max_iters: opts.descent.max_iters.min(500), ..opts.descent };
    for (a, b, rest) in broken_bonds(p, &w, &best.positions).into_iter().take(opts.reactivations) {
        let (mover, anchor) = if !w.is_frozen(b) { (b, a) } else { (a, b) };
        let mut trial = best.positions.clone();
        let d = trial[mover] - trial[anchor];
        trial[mover] = trial[anchor] + d * (rest / d.norm());
        let res = minimize(&ev, &trial, &free, entry.k, &reopts);
        if res.energy < best.energy - 1e-12 {
            best = res;
            reactivated += 1;
        }
    }

    let def = Deformation::new(w.lattice().clone(), best.positions)?;
    let broken_slices = slice_profile(&p.model, &def, 1.0)?.broken_count();
    Ok(EntryResult {
        r: entry.r,
        k: entry.k,
        energy: best.energy,
        best_start,
        starts: runs.into_iter().map(|(s, _)| s).collect(),
        reactivated,
        broken_slices,
        gap_fibres: gap_fibres(p, &w, def.positions()),
        deformation: Some(def),
    })
}

/// Multistart estimate of `phi(u, R_rel)` along the schedule.
pub fn phi_numeric(p: &CrackProblem, opts: &CrackOptions) -> Result<CrackSolution> {
    if p.schedule.is_empty() {
        return Err(Error::InvalidParameters("empty schedule".into()));
    }
    let entries = p.schedule.par_iter().map(|e| solve_entry(p, *e, opts)).collect::<Result<Vec<_>>>()?;
    let energies: Vec<f64> = entries.iter().map(|e| e.energy).collect();
    let estimate = *energies.last().expect("nonempty");
    let nonincreasing = energies.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    let spread = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let last = p.schedule.last().expect("nonempty");
    let lower_bound = last.k as f64 * p.model.thresholds(last.k)?.cbar1;
    Ok(CrackSolution {
        u: p.u.into(),
        r_rel: p.r_rel.transpose().into(),
        schedule: p.schedule.clone(),
        entries,
        estimate,
        nonincreasing,
        spread,
        lower_bound,
        fibres: p.cs.corners().len(),
    })
}

/// Connected components of the graph joining cell-sharing atoms whose hatted
/// deformed distance is below `threshold`, ordered by their first axial layer.
pub fn component_decomposition(def: &Deformation, threshold: f64) -> Result<Vec<Vec<usize>>> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameters(format!("gap threshold {threshold} must be positive")));
    }
    let lat = def.lattice();
    let k = lat.k() as f64;
    let y = def.positions();
    let n = lat.atom_count();
    let mut uf = UnionFind::<usize>::new(n);
    for (a, b) in lat.cell_sharing_pairs() {
        if k * (y[a] - y[b]).norm() < threshold {
            uf.union(a, b);
        }
    }
    let labels = uf.into_labeling();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index = std::collections::HashMap::new();
    // atoms are in axial order, so first appearance orders the components
    for (a, l) in labels.iter().enumerate() {
        let g = *index.entry(*l).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(a);
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation_about;

    fn problem(u: Vector3<f64>, r: Matrix3<f64>) -> CrackProblem {
        CrackProblem::new(
            u,
            r,
            CellEnergyModel::trunc_harmonic(1.0, 0.3),
            CrossSection::unit_square(),
            vec![ScheduleEntry::new(0.5, 16)],
        )
        .unwrap()
    }

    #[test]
    fn clean_break_costs_twelve_plateaus() {
        let p = problem(Vector3::new(0.5, 0.0, 0.0), Matrix3::identity());
        let def = clean_break_config(&p, p.schedule[0]).unwrap();
        let e = Evaluator::new(&p.model, def.lattice()).scaled_energy(def.positions());
        assert!((e - 3.6).abs() < 1e-9, "{e}");
        assert_eq!(component_decomposition(&def, 2.0).unwrap().len(), 2);
    }

    #[test]
    fn explicit_formula_counts() {
        let m = CellEnergyModel::trunc_harmonic(1.0, 0.3);
        let u = Vector3::x();
        assert!((phi_explicit_masspring(&u, &m, &CrossSection::unit_square()).unwrap() - 3.6).abs() < 1e-12);
        let m1 = CellEnergyModel::trunc_harmonic(1.0, 1.0);
        assert!((phi_explicit_masspring(&u, &m1, &CrossSection::rectangle(2, 2).unwrap()).unwrap() - 33.0).abs() < 1e-12);
        assert!(phi_explicit_masspring(&Vector3::zeros(), &m, &CrossSection::unit_square()).is_err());
        assert!(matches!(
            phi_explicit_masspring(&u, &CellEnergyModel::ljts(1.5), &CrossSection::unit_square()),
            Err(Error::ModelNotMassSpring)
        ));
    }

    #[test]
    fn small_jumps_interpenetrate() {
        let p = CrackProblem::new(
            Vector3::new(1e-9, 0.0, 0.0),
            Matrix3::identity(),
            CellEnergyModel::trunc_harmonic(1.0, 0.3),
            CrossSection::unit_square(),
            vec![ScheduleEntry::new(0.08, 100)],
        )
        .unwrap();
        assert!(matches!(clean_break_config(&p, p.schedule[0]), Err(Error::Interpenetration { .. })));
    }

    #[test]
    fn kink_contact_is_at_rest_length() {
        let p = problem(Vector3::zeros(), rotation_about(&Vector3::y(), std::f64::consts::FRAC_PI_2));
        let kc = kink_config(&p, p.schedule[0]).unwrap();
        assert!(kc.contact_time > 0.0 && kc.contact_time < 1.0);
        let e = Evaluator::new(&p.model, kc.deformation.lattice()).scaled_energy(kc.deformation.positions());
        assert!(e <= 3.3 + 1e-9, "{e}");
        assert!(kink_config(&problem(Vector3::zeros(), Matrix3::identity()), p.schedule[0]).is_err());
    }

    #[test]
    fn no_crack_is_free() {
        let p = problem(Vector3::zeros(), Matrix3::identity());
        let sol = phi_numeric(&p, &CrackOptions { starts: 3, ..Default::default() }).unwrap();
        assert!(sol.estimate.abs() < 1e-12);
    }
}
