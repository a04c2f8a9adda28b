//! Rotations, skew matrices and distances to the rigid cell set.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::lattice::{reference_cell, CellMatrix};

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Axial vector of the skew part of `a`.
pub fn axial(a: &Matrix3<f64>) -> Vector3<f64> {
    0.5 * Vector3::new(a[(2, 1)] - a[(1, 2)], a[(0, 2)] - a[(2, 0)], a[(1, 0)] - a[(0, 1)])
}

pub fn skew_part(a: &Matrix3<f64>) -> Matrix3<f64> {
    0.5 * (a - a.transpose())
}

/// Rotation by `|v|` about `v`.
pub fn rotation_from_axis_angle(v: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::from_scaled_axis(*v).into_inner()
}

pub fn rotation_about(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle).into_inner()
}

/// Axis-angle vector of a rotation matrix.
pub fn axis_angle_of(r: &Matrix3<f64>) -> Vector3<f64> {
    Rotation3::from_matrix_unchecked(*r).scaled_axis()
}

pub fn is_rotation(r: &Matrix3<f64>, tol: f64) -> bool {
    r.iter().all(|x| x.is_finite())
        && (r.transpose() * r - Matrix3::identity()).norm() <= tol
        && (r.determinant() - 1.0).abs() <= tol
}

/// Haar-distributed rotation from a normalised Gaussian quaternion.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let quat = nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]);
    nalgebra::UnitQuaternion::from_quaternion(quat).to_rotation_matrix().into_inner()
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Column-mean-free part of a cell matrix.
pub fn discrete_gradient(y: &CellMatrix) -> CellMatrix {
    let mean = y.column_mean();
    let mut g = *y;
    for mut c in g.column_iter_mut() {
        c -= &mean;
    }
    g
}

fn procrustes_terms(g: &CellMatrix) -> (f64, f64, f64) {
    let m: Matrix3<f64> = g * reference_cell().transpose();
    let sv = m.singular_values();
    let sum = sv.sum();
    let smallest = sv.min();
    (g.norm_squared() + 6.0, sum - smallest, smallest * m.determinant().signum())
}

/// Frobenius distance from a mean-free `g` to `{R Id_bar : R in SO(3)}`.
pub fn dist_so3bar(g: &CellMatrix) -> f64 {
    let (base, top, last) = procrustes_terms(g);
    (base - 2.0 * (top + last)).max(0.0).sqrt()
}

/// Frobenius distance from a mean-free `g` to the reflected set
/// `{R Id_bar : R in O(3), det R = -1}`.
pub fn dist_reflected(g: &CellMatrix) -> f64 {
    let (base, top, last) = procrustes_terms(g);
    (base - 2.0 * (top - last)).max(0.0).sqrt()
}

/// Rotation closest to `m` in Frobenius norm.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        // flip the direction of the smallest singular value
        let (imin, _) = svd.singular_values.argmin();
        d[(imin, imin)] = -1.0;
    }
    u * d * v_t
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reference_cell_norm() {
        assert!((reference_cell().norm_squared() - 6.0).abs() < 1e-15);
        let idb = reference_cell();
        assert!((idb * idb.transpose() - 2.0 * Matrix3::<f64>::identity()).norm() < 1e-15);
    }

    #[test]
    fn distance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let idb = reference_cell();
        for _ in 0..20 {
            let r = random_rotation(&mut rng);
            assert!(dist_so3bar(&(r * idb)) < 1e-7);
            assert!((dist_reflected(&(r * idb)) - 8f64.sqrt()).abs() < 1e-12);
        }
        assert!((dist_so3bar(&(2.0 * idb)) - 6f64.sqrt()).abs() < 1e-12);
        let refl = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0));
        assert!(dist_so3bar(&(refl * idb)) > 1.0);
        assert!(dist_reflected(&(refl * idb)) < 1e-7);
    }

    #[test]
    fn discrete_gradient_removes_translation() {
        let idb = reference_cell();
        let mut y = idb;
        for mut c in y.column_iter_mut() {
            c += Vector3::new(1.0, -2.0, 3.5);
        }
        assert!((discrete_gradient(&y) - idb).norm() < 1e-14);
    }

    #[test]
    fn nearest_rotation_recovers_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = random_rotation(&mut rng);
        assert!(is_rotation(&r, 1e-12));
        assert!((nearest_rotation(&(3.0 * r)) - r).norm() < 1e-12);
        let v = Vector3::new(0.3, -0.2, 0.1);
        assert!((axis_angle_of(&rotation_from_axis_angle(&v)) - v).norm() < 1e-14);
        assert!((axial(&skew(&v)) - v).norm() < 1e-15);
    }
}
