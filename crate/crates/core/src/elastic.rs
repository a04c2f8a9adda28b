//! Quadratic forms at the reference cell and the relaxed bending/torsion form.

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, SVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{axial, skew};
use crate::lattice::{reference_cell, CellMatrix, CrossSection, FULL_MASK, SIGNS};
use crate::potentials::{CellEnergyModel, CellHessian};

type Vec24 = SVector<f64, 24>;

/// A 3x3 skew-symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewGenerator(Matrix3<f64>);

impl SkewGenerator {
    pub fn new(a: Matrix3<f64>) -> Result<Self> {
        let asym = (a + a.transpose()).norm();
        if !(asym <= 1e-12 * (1.0 + a.norm())) {
            return Err(Error::NonSkewInput(asym));
        }
        Ok(Self(0.5 * (a - a.transpose())))
    }

    /// `A v = w x v`.
    pub fn from_axial(w: Vector3<f64>) -> Self {
        Self(skew(&w))
    }

    /// Bending with curvature `kappa` in the plane spanned by `e1` and
    /// `cos(theta) e2 + sin(theta) e3`.
    pub fn bending(kappa: f64, theta: f64) -> Self {
        let d = Vector3::new(0.0, theta.cos(), theta.sin());
        let e1 = Vector3::x();
        Self(kappa * (d * e1.transpose() - e1 * d.transpose()))
    }

    /// Twist at rate `tau` about `e1`.
    pub fn twist(tau: f64) -> Self {
        Self::from_axial(Vector3::new(tau, 0.0, 0.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn axial(&self) -> Vector3<f64> {
        axial(&self.0)
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self(t * self.0)
    }
}

/// Hessian forms `Q_tot(x', .)` for every `x'` in the extended midpoint set.
#[derive(Debug, Clone)]
pub struct QuadraticFormTable {
    pub mids: Vec<(i32, i32)>,
    pub interior: Vec<bool>,
    pub forms: Vec<CellHessian>,
    /// Ascending eigenvalues of the interior form.
    pub interior_eigenvalues: Vec<f64>,
}

impl QuadraticFormTable {
    pub fn interior_form(&self) -> Option<&CellHessian> {
        self.interior.iter().position(|i| *i).map(|n| &self.forms[n])
    }
}

pub fn vec_of(m: &CellMatrix) -> Vec24 {
    Vec24::from_iterator(m.iter().copied())
}

/// `Q(G) = vec(G)^T H vec(G)`.
pub fn apply_form(h: &CellHessian, g: &CellMatrix) -> f64 {
    let v = vec_of(g);
    v.dot(&(h * v))
}

/// Basis of translations and infinitesimal rotations of the reference cell.
pub fn rigid_directions() -> Vec<CellMatrix> {
    let idb = reference_cell();
    let mut out = Vec::with_capacity(6);
    for c in 0..3 {
        let mut t = CellMatrix::zeros();
        t.row_mut(c).fill(1.0);
        out.push(t);
    }
    for c in 0..3 {
        out.push(skew(&Vector3::ith(c, 1.0)) * idb);
    }
    out
}

fn validate_kernel(h: &CellHessian) -> Result<()> {
    let scale = h.norm().max(1e-300);
    for d in rigid_directions() {
        let r = (h * vec_of(&d)).norm() / scale;
        if r > 1e-9 {
            return Err(Error::KernelViolation(r));
        }
    }
    Ok(())
}

fn build_table(cs: &CrossSection, form: impl Fn(u8) -> CellHessian) -> Result<QuadraticFormTable> {
    let mids = cs.ext_midpoints().to_vec();
    let interior: Vec<bool> = mids.iter().map(|m| cs.contains_midpoint(*m)).collect();
    let forms: Vec<CellHessian> = mids.iter().map(|m| form(cs.in_plane_mask(*m))).collect();
    for h in &forms {
        validate_kernel(h)?;
    }
    let full = form(FULL_MASK);
    let mut interior_eigenvalues: Vec<f64> = full.symmetric_eigenvalues().iter().copied().collect();
    interior_eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(QuadraticFormTable { mids, interior, forms, interior_eigenvalues })
}

/// Analytic Hessians assembled from the second derivatives of the pair cores at `r = 1`.
pub fn hessian_forms(model: &CellEnergyModel, cs: &CrossSection) -> Result<QuadraticFormTable> {
    model.validate()?;
    let curv = match model.pair_potentials() {
        Some((nn, nnn)) => [nn.core_curvature(), nnn.core_curvature()],
        None => [1.0, 1.0],
    };
    if !curv.iter().all(|c| c.is_finite() && *c > 0.0) {
        return Err(Error::NotTwiceDifferentiable);
    }
    build_table(cs, |mask| model.core_hessian(mask))
}

/// Central second differences of the elastic core with one Richardson step.
pub fn hessian_forms_fd(model: &CellEnergyModel, cs: &CrossSection) -> Result<QuadraticFormTable> {
    model.validate()?;
    build_table(cs, |mask| fd_hessian(|y| model.core_energy(mask, y), 1e-5))
}

fn fd_hessian(f: impl Fn(&CellMatrix) -> f64, h: f64) -> CellHessian {
    let idb = reference_cell();
    let at = |i: usize, si: f64, j: usize, sj: f64| {
        let mut y = idb;
        y[i] += si;
        y[j] += sj;
        f(&y)
    };
    let second = |i: usize, j: usize, h: f64| {
        (at(i, h, j, h) - at(i, h, j, -h) - at(i, -h, j, h) + at(i, -h, j, -h)) / (4.0 * h * h)
    };
    let mut out = CellHessian::zeros();
    for i in 0..24 {
        for j in i..24 {
            let v = (4.0 * second(i, j, h / 2.0) - second(i, j, h)) / 3.0;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Ultrathin correction `1/4 A S` where column `i` of `S` is `4 z_1^i (0, z_2^i, z_3^i)`.
fn ultrathin_term(a: &Matrix3<f64>) -> CellMatrix {
    let s = CellMatrix::from_fn(|r, c| if r == 0 { 0.0 } else { (SIGNS[c][0] * SIGNS[c][r]) as f64 });
    0.25 * a * s
}

/// Minimiser of the relaxed-form problem.
#[derive(Debug, Clone)]
pub struct Q3relSolution {
    pub value: f64,
    /// Corrector on the extended corner set, in `CrossSection::ext_corners` order.
    pub alpha: Vec<Vector3<f64>>,
    pub g: Vector3<f64>,
    /// Norm of the least-squares residual (`sqrt(value)`).
    pub residual: f64,
}

struct LinearModel {
    /// Stacked `L_x' m0(x')` and `L_x' B(x')`.
    rhs: DVector<f64>,
    mat: DMatrix<f64>,
}

/// Column `i` of the corrector block at `x'` refers to the extended corner of slot `i`.
fn corner_slots(cs: &CrossSection, mid: (i32, i32)) -> [usize; 8] {
    let ext = cs.ext_corners();
    std::array::from_fn(|slot| {
        let s = SIGNS[slot];
        let c = (mid.0 + (s[1] + 1) / 2, mid.1 + (s[2] + 1) / 2);
        ext.binary_search(&c).expect("corner lies in the extended set")
    })
}

fn factor(h: &CellHessian) -> SMatrix<f64, 24, 24> {
    let eig = h.symmetric_eigen();
    let tol = 1e-12 * eig.eigenvalues.amax().max(1e-300);
    let mut l = SMatrix::<f64, 24, 24>::zeros();
    for (n, lam) in eig.eigenvalues.iter().enumerate() {
        if *lam > tol {
            let row = lam.sqrt() * eig.eigenvectors.column(n).transpose();
            l.set_row(n, &row);
        }
    }
    l
}

fn assemble(a: &Matrix3<f64>, cs: &CrossSection, table: &QuadraticFormTable) -> LinearModel {
    let n_alpha = cs.ext_corners().len();
    let unknowns = 3 * n_alpha + 3;
    let rows = 24 * table.mids.len();
    let mut mat = DMatrix::zeros(rows, unknowns);
    let mut rhs = DVector::zeros(rows);
    let e1_id: [f64; 8] = std::array::from_fn(|c| 0.5 * SIGNS[c][0] as f64);
    let ultra = ultrathin_term(a);
    for (n, (&mid, h)) in table.mids.iter().zip(&table.forms).enumerate() {
        let l = factor(h);
        let x = Vector3::new(0.0, mid.0 as f64 + 0.5, mid.1 as f64 + 0.5);
        let ax = a * x;
        let m0 = CellMatrix::from_fn(|r, c| ax[r] * e1_id[c]) + ultra;
        // B maps (alpha, g) to vec(M - m0)
        let mut b = DMatrix::<f64>::zeros(24, unknowns);
        let slots = corner_slots(cs, mid);
        for c in 0..8 {
            for r in 0..3 {
                let row = 3 * c + r;
                b[(row, 3 * n_alpha + r)] = e1_id[c];
                // alpha at the slot's corner minus the mean of the four in-plane corners
                for c2 in 0..4 {
                    b[(row, 3 * slots[c2] + r)] -= 0.25;
                }
                b[(row, 3 * slots[c] + r)] += 1.0;
            }
        }
        let lb = DMatrix::from_column_slice(24, 24, l.as_slice()) * b;
        mat.view_mut((24 * n, 0), (24, unknowns)).copy_from(&lb);
        let lm0 = l * vec_of(&m0);
        rhs.rows_mut(24 * n, 24).copy_from(&lm0);
    }
    LinearModel { rhs, mat }
}

/// `Q3rel(A)` by minimum-norm least squares over the corrector and `g`.
pub fn q3rel(a: &SkewGenerator, cs: &CrossSection, table: &QuadraticFormTable) -> Result<Q3relSolution> {
    let lm = assemble(a.matrix(), cs, table);
    let n_alpha = cs.ext_corners().len();
    let scale = lm.mat.norm().max(1e-300);
    let svd = lm.mat.clone().svd(true, true);
    let u = svd
        .solve(&(-&lm.rhs), 1e-12 * scale)
        .map_err(|e| Error::InvalidParameters(e.to_string()))?;
    let resid = &lm.rhs + &lm.mat * &u;
    let value = resid.norm_squared();
    let alpha = (0..n_alpha).map(|i| Vector3::new(u[3 * i], u[3 * i + 1], u[3 * i + 2])).collect();
    let g = Vector3::new(u[3 * n_alpha], u[3 * n_alpha + 1], u[3 * n_alpha + 2]);
    Ok(Q3relSolution { value, alpha, g, residual: value.sqrt() })
}

/// Objective of the relaxed-form problem for given correctors, assembled
/// directly from the 3x8 matrices.
pub fn q3rel_objective(
    a: &Matrix3<f64>,
    cs: &CrossSection,
    table: &QuadraticFormTable,
    alpha: &[Vector3<f64>],
    g: &Vector3<f64>,
) -> f64 {
    table
        .mids
        .iter()
        .zip(&table.forms)
        .map(|(&mid, h)| apply_form(h, &corrected_matrix(a, cs, mid, alpha, g)))
        .sum()
}

fn corrected_matrix(a: &Matrix3<f64>, cs: &CrossSection, mid: (i32, i32), alpha: &[Vector3<f64>], g: &Vector3<f64>) -> CellMatrix {
    let x = Vector3::new(0.0, mid.0 as f64 + 0.5, mid.1 as f64 + 0.5);
    let v = a * x + g;
    let ext = cs.ext_corners();
    let at = |c: (i32, i32)| alpha[ext.binary_search(&c).unwrap()];
    let quad = [at(mid), at((mid.0, mid.1 + 1)), at((mid.0 + 1, mid.1 + 1)), at((mid.0 + 1, mid.1))];
    let mean = (quad[0] + quad[1] + quad[2] + quad[3]) / 4.0;
    // in-plane corner order of z^1..z^4 is (-,-), (-,+), (+,+), (+,-)
    let mut m = CellMatrix::zeros();
    for c in 0..8 {
        let s = SIGNS[c];
        let col = 0.5 * s[0] as f64 * v
            + 0.25 * s[0] as f64 * a * Vector3::new(0.0, s[1] as f64, s[2] as f64)
            + (quad[c % 4] - mean);
        m.set_column(c, &col);
    }
    m
}

/// Independent check of [`q3rel`]: conjugate-gradient descent with exact
/// line search on the directly assembled objective, best of `starts` seeded
/// random initialisations.
pub fn q3rel_oracle(a: &SkewGenerator, cs: &CrossSection, table: &QuadraticFormTable, starts: usize, seed: u64) -> f64 {
    let n_alpha = cs.ext_corners().len();
    let dim = 3 * n_alpha + 3;
    let zero = Matrix3::zeros();
    let split = |u: &[f64]| -> (Vec<Vector3<f64>>, Vector3<f64>) {
        let alpha = (0..n_alpha).map(|i| Vector3::new(u[3 * i], u[3 * i + 1], u[3 * i + 2])).collect();
        (alpha, Vector3::new(u[dim - 3], u[dim - 2], u[dim - 1]))
    };
    let f = |u: &[f64]| {
        let (al, g) = split(u);
        q3rel_objective(a.matrix(), cs, table, &al, &g)
    };
    // homogeneous part: the objective with A = 0 is the quadratic form in u
    let quad = |d: &[f64]| {
        let (al, g) = split(d);
        q3rel_objective(&zero, cs, table, &al, &g)
    };
    let grad = |u: &[f64]| -> Vec<f64> {
        // the objective is quadratic, so central differences are exact up to rounding
        let mut out = vec![0.0; dim];
        let mut w = u.to_vec();
        let h = 1e-3;
        for i in 0..dim {
            w[i] = u[i] + h;
            let fp = f(&w);
            w[i] = u[i] - h;
            let fm = f(&w);
            w[i] = u[i];
            out[i] = (fp - fm) / (2.0 * h);
        }
        out
    };
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..starts.max(1) {
        let mut u: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut gr = grad(&u);
        let mut dir: Vec<f64> = gr.iter().map(|v| -v).collect();
        let g0 = dot(&gr, &gr).sqrt();
        for it in 0..20 * dim {
            let curv = quad(&dir);
            if curv <= 0.0 {
                break;
            }
            let t = -dot(&gr, &dir) / (2.0 * curv);
            for (ui, di) in u.iter_mut().zip(&dir) {
                *ui += t * di;
            }
            let new_gr = grad(&u);
            let gn = dot(&new_gr, &new_gr);
            if gn.sqrt() <= 1e-13 * (1.0 + g0) {
                break;
            }
            // Polak-Ribiere, restarted periodically
            let beta = if it % dim == dim - 1 {
                0.0
            } else {
                (dot(&new_gr, &new_gr) - dot(&new_gr, &gr)).max(0.0) / dot(&gr, &gr)
            };
            for (di, gi) in dir.iter_mut().zip(&new_gr) {
                *di = -gi + beta * *di;
            }
            gr = new_gr;
        }
        best = best.min(f(&u));
    }
    best
}

/// The relaxed form as a 3x3 matrix on axial vectors: `Q3rel(A) = w^T K w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxedForm {
    pub matrix: [[f64; 3]; 3],
}

impl RelaxedForm {
    /// Polarisation from six evaluations.
    pub fn from_table(cs: &CrossSection, table: &QuadraticFormTable) -> Result<Self> {
        let q = |w: Vector3<f64>| q3rel(&SkewGenerator::from_axial(w), cs, table).map(|s| s.value);
        let mut m = [[0.0; 3]; 3];
        let diag: Vec<f64> = (0..3).map(|i| q(Vector3::ith(i, 1.0))).collect::<Result<_>>()?;
        for i in 0..3 {
            m[i][i] = diag[i];
            for j in (i + 1)..3 {
                let v = (q(Vector3::ith(i, 1.0) + Vector3::ith(j, 1.0))? - diag[i] - diag[j]) / 2.0;
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        Ok(Self { matrix: m })
    }

    pub fn eval(&self, a: &Matrix3<f64>) -> f64 {
        let w = axial(a);
        let k = Matrix3::from_fn(|i, j| self.matrix[i][j]);
        w.dot(&(k * w))
    }
}

/// File cache of relaxed-form values keyed by model fingerprint and the
/// generator entries rounded to 1e-12.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Q3relCache {
    pub entries: std::collections::BTreeMap<String, f64>,
}

impl Q3relCache {
    pub fn key(model: &CellEnergyModel, cs: &CrossSection, a: &SkewGenerator) -> String {
        let w = a.matrix();
        let parts: Vec<String> = w.iter().map(|v| format!("{}", (v * 1e12).round() as i64)).collect();
        let cells: Vec<String> = cs.midpoints().iter().map(|(i, j)| format!("{i},{j}")).collect();
        format!("{}|{}|{}", model.fingerprint(), cells.join(";"), parts.join(","))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        if !path.exists() {
            return Ok(Self::default());
        }
        serde_json::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?)?;
        Ok(())
    }

    pub fn get_or_compute(
        &mut self,
        model: &CellEnergyModel,
        cs: &CrossSection,
        table: &QuadraticFormTable,
        a: &SkewGenerator,
    ) -> Result<f64> {
        let key = Self::key(model, cs, a);
        if let Some(v) = self.entries.get(&key) {
            return Ok(*v);
        }
        let v = q3rel(a, cs, table)?.value;
        self.entries.insert(key, v);
        Ok(v)
    }
}
