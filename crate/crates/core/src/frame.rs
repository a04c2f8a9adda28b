//! Piecewise rod configurations `(y, d2, d3)` with constant-generator segments.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::elastic::{q3rel, QuadraticFormTable, RelaxedForm, SkewGenerator};
use crate::error::{Error, Result};
use crate::geometry::{axial, is_rotation, rotation_from_axis_angle, skew_part};
use crate::lattice::CrossSection;

/// Closed-form segment shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SegmentShape {
    Straight,
    /// Constant curvature in the plane of `e1` and `cos(angle) e2 + sin(angle) e3`.
    Arc { curvature: f64, #[serde(default)] angle: f64 },
    Twist { rate: f64 },
    /// Bending plus twist.
    Helix { curvature: f64, torsion: f64, #[serde(default)] angle: f64 },
}

impl SegmentShape {
    pub fn generator(&self) -> SkewGenerator {
        match *self {
            SegmentShape::Straight => SkewGenerator::from_axial(Vector3::zeros()),
            SegmentShape::Arc { curvature, angle } => SkewGenerator::bending(curvature, angle),
            SegmentShape::Twist { rate } => SkewGenerator::twist(rate),
            SegmentShape::Helix { curvature, torsion, angle } => {
                let b = SkewGenerator::bending(curvature, angle);
                let t = SkewGenerator::twist(torsion);
                SkewGenerator::new(b.matrix() + t.matrix()).expect("sum of skew matrices")
            }
        }
    }
}

/// Jump at an interior breakpoint: `y(s+) = y(s-) + translation` and
/// `R(s+) = R(s-) rotation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub position: f64,
    pub translation: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl Jump {
    pub fn is_trivial(&self) -> bool {
        self.translation == Vector3::zeros() && self.rotation == Matrix3::identity()
    }
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    start: f64,
    end: f64,
    a: Matrix3<f64>,
    r0: Matrix3<f64>,
    p0: Vector3<f64>,
}

impl Piece {
    /// `int_0^t exp(s A) ds` in closed form.
    fn phi(&self, t: f64) -> Matrix3<f64> {
        let theta = (0.5 * self.a.norm_squared()).sqrt();
        let a2 = self.a * self.a;
        let (c1, c2) = if theta * t.abs() < 1e-4 {
            let x = theta * theta;
            (t * t / 2.0 - x * t.powi(4) / 24.0, t.powi(3) / 6.0 - x * t.powi(5) / 120.0)
        } else {
            let th = theta * t;
            ((1.0 - th.cos()) / (theta * theta), (th - th.sin()) / theta.powi(3))
        };
        t * Matrix3::identity() + c1 * self.a + c2 * a2
    }

    fn rotation(&self, s: f64) -> Matrix3<f64> {
        self.r0 * rotation_from_axis_angle(&((s - self.start) * axial(&self.a)))
    }

    fn position(&self, s: f64) -> Vector3<f64> {
        self.p0 + self.r0 * self.phi(s - self.start) * Vector3::x()
    }
}

/// A rod frame on `[0, L]` made of constant-generator segments separated by
/// breakpoints, with optional jumps at the breakpoints.
#[derive(Debug, Clone)]
pub struct FrameCurve {
    length: f64,
    pieces: Vec<Piece>,
    jumps: Vec<Jump>,
}

impl FrameCurve {
    /// Builds a frame starting at `p0` with orientation `r0`. `jumps[i]` sits
    /// between `shapes[i]` and `shapes[i + 1]`; trivial jumps mark plain breakpoints.
    pub fn new(
        length: f64,
        shapes: &[SegmentShape],
        jumps: &[Jump],
        r0: Matrix3<f64>,
        p0: Vector3<f64>,
    ) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InadmissibleFrame(format!("length {length}")));
        }
        if shapes.len() != jumps.len() + 1 {
            return Err(Error::InadmissibleFrame(format!(
                "{} segments need {} breakpoints, got {}",
                shapes.len(),
                shapes.len() - 1,
                jumps.len()
            )));
        }
        if !is_rotation(&r0, 1e-8) {
            return Err(Error::InadmissibleFrame("initial frame is not a rotation".into()));
        }
        let mut last = 0.0;
        for j in jumps {
            if !(j.position > last && j.position < length) {
                return Err(Error::InadmissibleFrame(format!("breakpoint {} out of order", j.position)));
            }
            if !is_rotation(&j.rotation, 1e-8) {
                return Err(Error::InadmissibleFrame(format!("jump rotation at {} is not in SO(3)", j.position)));
            }
            if !j.translation.iter().all(|v| v.is_finite()) {
                return Err(Error::InadmissibleFrame("non-finite jump".into()));
            }
            last = j.position;
        }
        let mut pieces = Vec::with_capacity(shapes.len());
        let (mut r, mut p) = (r0, p0);
        for (n, shape) in shapes.iter().enumerate() {
            let a = *shape.generator().matrix();
            if !a.iter().all(|v| v.is_finite()) {
                return Err(Error::InadmissibleFrame(format!("segment {n} has non-finite parameters")));
            }
            let start = if n == 0 { 0.0 } else { jumps[n - 1].position };
            let end = if n == jumps.len() { length } else { jumps[n].position };
            let piece = Piece { start, end, a, r0: r, p0: p };
            if n < jumps.len() {
                r = piece.rotation(end) * jumps[n].rotation;
                p = piece.position(end) + jumps[n].translation;
            }
            pieces.push(piece);
        }
        let fc = Self { length, pieces, jumps: jumps.to_vec() };
        for piece in &fc.pieces {
            for i in 0..=8 {
                let s = piece.start + (piece.end - piece.start) * i as f64 / 8.0;
                if !is_rotation(&piece.rotation(s), 1e-8) {
                    return Err(Error::InadmissibleFrame(format!("frame leaves SO(3) at {s}")));
                }
            }
        }
        Ok(fc)
    }

    /// Single smooth segment starting at the origin with the identity frame.
    pub fn smooth(length: f64, shape: SegmentShape) -> Result<Self> {
        Self::new(length, &[shape], &[], Matrix3::identity(), Vector3::zeros())
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// Nontrivial jumps only.
    pub fn cracks(&self) -> impl Iterator<Item = &Jump> {
        self.jumps.iter().filter(|j| !j.is_trivial())
    }

    pub fn segment_count(&self) -> usize {
        self.pieces.len()
    }

    pub fn segment_bounds(&self, n: usize) -> (f64, f64) {
        (self.pieces[n].start, self.pieces[n].end)
    }

    pub fn generator(&self, n: usize) -> Matrix3<f64> {
        self.pieces[n].a
    }

    /// Index of the segment containing `s`; breakpoints belong to the right segment.
    pub fn segment_at(&self, s: f64) -> usize {
        self.pieces.iter().rposition(|p| s >= p.start).unwrap_or(0)
    }

    /// Left limit of the segment index at `s` (breakpoints belong to the left segment).
    pub fn segment_before(&self, s: f64) -> usize {
        self.pieces.iter().position(|p| s <= p.end).unwrap_or(self.pieces.len() - 1)
    }

    pub fn rotation_in(&self, n: usize, s: f64) -> Matrix3<f64> {
        self.pieces[n].rotation(s)
    }

    pub fn position_in(&self, n: usize, s: f64) -> Vector3<f64> {
        self.pieces[n].position(s)
    }

    /// `int_{start}^{s} R(t) dt` within segment `n`.
    pub fn rotation_integral_in(&self, n: usize, s: f64) -> Matrix3<f64> {
        let p = &self.pieces[n];
        p.r0 * p.phi(s - p.start)
    }

    pub fn rotation(&self, s: f64) -> Matrix3<f64> {
        self.rotation_in(self.segment_at(s), s)
    }

    pub fn position(&self, s: f64) -> Vector3<f64> {
        self.position_in(self.segment_at(s), s)
    }

    /// `R^T dR/ds` at `s` in segment `n`, skew-projected.
    pub fn curvature_in(&self, n: usize, s: f64) -> Matrix3<f64> {
        let r = self.rotation_in(n, s);
        let dr = r * self.pieces[n].a;
        skew_part(&(r.transpose() * dr))
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss-Legendre integral of `f` on `[a, b]` with `parts` subintervals.
pub fn composite_gauss(f: &impl Fn(f64) -> f64, a: f64, b: f64, points: usize, parts: usize) -> f64 {
    let (x, w) = gauss_legendre(points);
    let h = (b - a) / parts as f64;
    (0..parts)
        .map(|p| {
            let lo = a + p as f64 * h;
            let mid = lo + h / 2.0;
            x.iter().zip(&w).map(|(xi, wi)| wi * f(mid + h / 2.0 * xi)).sum::<f64>() * h / 2.0
        })
        .sum()
}

/// Doubles the number of subintervals until the relative change is below `tol`.
pub fn adaptive_gauss(f: &impl Fn(f64) -> f64, a: f64, b: f64, points: usize, tol: f64) -> f64 {
    let mut parts = 1;
    let mut prev = composite_gauss(f, a, b, points, parts);
    while parts < 1 << 16 {
        parts *= 2;
        let next = composite_gauss(f, a, b, points, parts);
        if (next - prev).abs() <= tol * next.abs().max(1e-300) {
            return next;
        }
        prev = next;
    }
    prev
}

/// `1/2 int_0^L Q3rel(R^T R') ds`, by segment-wise adaptive Gauss-Legendre quadrature.
pub fn elastic_energy_of_frame(
    fc: &FrameCurve,
    cs: &CrossSection,
    table: &QuadraticFormTable,
    points: usize,
) -> Result<f64> {
    let form = RelaxedForm::from_table(cs, table)?;
    Ok(elastic_energy_with_form(fc, &form, points))
}

/// As [`elastic_energy_of_frame`] with a precomputed relaxed form.
pub fn elastic_energy_with_form(fc: &FrameCurve, form: &RelaxedForm, points: usize) -> f64 {
    (0..fc.segment_count())
        .map(|n| {
            let (a, b) = fc.segment_bounds(n);
            let f = |s: f64| form.eval(&fc.curvature_in(n, s));
            0.5 * adaptive_gauss(&f, a, b, points.max(1), 1e-8)
        })
        .sum()
}

/// Single relaxed-form evaluation, exposed for constant-generator checks.
pub fn q3rel_of(a: &Matrix3<f64>, cs: &CrossSection, table: &QuadraticFormTable) -> Result<f64> {
    Ok(q3rel(&SkewGenerator::new(*a)?, cs, table)?.value)
}
