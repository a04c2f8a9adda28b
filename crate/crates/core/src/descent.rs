//! Limited-memory quasi-Newton descent of `k E^(k)` over a subset of atoms.
//!
//! Variables are hatted positions `k y` of the free atoms; all other atoms
//! stay bit-identical. Steps that raise the number of cells inside the
//! orientation penalty zone are rejected by the line search.

use std::collections::VecDeque;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::energy::Evaluator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescentOptions {
    pub max_iters: usize,
    /// Stop when the largest gradient component falls below this value.
    pub grad_tol: f64,
    pub memory: usize,
    pub max_backtracks: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self { max_iters: 2000, grad_tol: 1e-9, memory: 8, max_backtracks: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentStatus {
    Converged,
    /// No admissible decrease along the steepest-descent direction.
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct DescentResult {
    pub positions: Vec<Vector3<f64>>,
    /// `k E^(k)` at `positions`.
    pub energy: f64,
    pub iterations: usize,
    pub status: DescentStatus,
}

struct Problem<'a> {
    ev: &'a Evaluator,
    base: Vec<Vector3<f64>>,
    free: &'a [usize],
    k: f64,
}

impl Problem<'_> {
    fn positions(&self, x: &[f64]) -> Vec<Vector3<f64>> {
        let mut p = self.base.clone();
        for (n, &a) in self.free.iter().enumerate() {
            p[a] = Vector3::new(x[3 * n], x[3 * n + 1], x[3 * n + 2]) / self.k;
        }
        p
    }

    fn value(&self, x: &[f64]) -> (f64, usize) {
        let p = self.positions(x);
        (self.ev.scaled_energy(&p), self.ev.penalty_active(&p))
    }

    /// `d(k E)/d(k y) = dE/dy`.
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let p = self.positions(x);
        let mut g = vec![Vector3::zeros(); p.len()];
        self.ev.energy_and_gradient(&p, &mut g);
        self.free.iter().flat_map(|&a| [g[a].x, g[a].y, g[a].z]).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimizes `k E^(k)` over the atoms in `free`, starting from `start`.
pub fn minimize(ev: &Evaluator, start: &[Vector3<f64>], free: &[usize], k: u32, opts: &DescentOptions) -> DescentResult {
    let kf = k as f64;
    let pb = Problem { ev, base: start.to_vec(), free, k: kf };
    let mut x: Vec<f64> = free.iter().flat_map(|&a| (kf * start[a]).iter().copied().collect::<Vec<_>>()).collect();
    let (mut f, penalty) = pb.value(&x);
    if free.is_empty() || !f.is_finite() {
        return DescentResult { positions: start.to_vec(), energy: f, iterations: 0, status: DescentStatus::Converged };
    }
    let mut g = pb.gradient(&x);
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut status = DescentStatus::MaxIterations;
    let mut flat = 0;
    let mut iters = 0;
    while iters < opts.max_iters {
        if sup(&g) < opts.grad_tol {
            status = DescentStatus::Converged;
            break;
        }
        iters += 1;
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        if dot(&d, &g) >= 0.0 {
            mem.clear();
            d = g.iter().map(|v| -v).collect();
        }

        let mut accepted = None;
        for attempt in 0..2 {
            let slope = dot(&d, &g);
            // first step of a fresh direction moves no atom by more than one spacing
            let mut alpha = if mem.is_empty() { (1.0 / sup(&d)).min(1.0) } else { 1.0 };
            for _ in 0..opts.max_backtracks {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
                let (ft, pt) = pb.value(&trial);
                if ft.is_finite() && pt <= penalty && ft <= f + 1e-4 * alpha * slope {
                    accepted = Some((trial, ft));
                    break;
                }
                alpha *= 0.5;
            }
            if accepted.is_some() || attempt == 1 || mem.is_empty() {
                break;
            }
            mem.clear();
            d = g.iter().map(|v| -v).collect();
        }
        let Some((xn, fnew)) = accepted else {
            status = DescentStatus::Stalled;
            break;
        };
        let gn = pb.gradient(&xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if mem.len() == opts.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        flat = if f - fnew <= 1e-15 * f.abs().max(1.0) { flat + 1 } else { 0 };
        x = xn;
        f = fnew;
        g = gn;
        if flat >= 5 {
            status = DescentStatus::Converged;
            break;
        }
    }
    DescentResult { positions: pb.positions(&x), energy: f, iterations: iters, status }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{CrossSection, RodLattice};
    use crate::potentials::CellEnergyModel;

    #[test]
    fn relaxes_a_perturbed_atom() {
        let lat = RodLattice::window(CrossSection::unit_square(), 4, 8).unwrap();
        let model = CellEnergyModel::trunc_harmonic(1.0, 0.3);
        let ev = Evaluator::new(&model, &lat);
        let mut p: Vec<Vector3<f64>> = (0..lat.atom_count()).map(|a| Vector3::from(lat.reference_position(a))).collect();
        let a = lat.atom_at([2, 1, 0]).unwrap();
        p[a] += Vector3::new(0.01, -0.02, 0.015);
        let start = ev.scaled_energy(&p);
        let res = minimize(&ev, &p, &[a], 8, &DescentOptions::default());
        assert!(start > 0.0);
        assert!(res.energy < 1e-14, "{}", res.energy);
        assert_eq!(res.status, DescentStatus::Converged);
        for (b, q) in res.positions.iter().enumerate() {
            if b != a {
                assert_eq!(*q, p[b]);
            }
        }
    }
}
