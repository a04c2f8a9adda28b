//! Acceptance gate. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each; exits nonzero if any criterion fails.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use nanorod::config::{default_schedule, StudyConfig};
use nanorod::crack::{clean_break_config, kink_config, phi_numeric, CrackOptions, CrackProblem};
use nanorod::elastic::{apply_form, hessian_forms, q3rel, q3rel_oracle, rigid_directions, SkewGenerator};
use nanorod::energy::{energy_gradient, pair_sum_energy, scaled_energy, slice_profile, total_energy, Deformation, Evaluator};
use nanorod::frame::{FrameCurve, SegmentShape};
use nanorod::generators::{smooth_frame_config, RecoveryAnsatz};
use nanorod::geometry::{discrete_gradient, dist_so3bar, random_rotation, rotation_about};
use nanorod::lattice::{reference_cell, BondKind, CellClass, CellMatrix, CrossSection, RodLattice, FULL_MASK};
use nanorod::potentials::CellEnergyModel;
use nanorod::study::run_convergence_study;

struct Outcome {
    pass: bool,
    detail: String,
}

fn th() -> CellEnergyModel {
    CellEnergyModel::trunc_harmonic(1.0, 0.3)
}

fn ljts() -> CellEnergyModel {
    CellEnergyModel::ljts(1.0)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_deformation(lat: &Arc<RodLattice>, rng: &mut ChaCha8Rng, amp: f64) -> Deformation {
    let k = lat.k() as f64;
    let r = random_rotation(rng);
    let c = Vector3::from_fn(|_, _| normal(rng));
    let pos = (0..lat.atom_count())
        .map(|a| r * Vector3::from(lat.reference_position(a)) + c + Vector3::from_fn(|_, _| amp * normal(rng) / k))
        .collect();
    Deformation::new(lat.clone(), pos).unwrap()
}

fn decomposition_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for n in 0..200 {
        let k = [4, 8, 16][n % 3];
        let cs = CrossSection::rectangle(rng.random_range(1..=3), rng.random_range(1..=3)).unwrap();
        let cells = rng.random_range(1..=32);
        let lat = Arc::new(RodLattice::new(cs, cells as f64 / k as f64, k).unwrap());
        let model = if n % 2 == 0 { th() } else { ljts() };
        let amp = [0.01, 0.1, 0.5, 2.0][rng.random_range(0..4)];
        let def = random_deformation(&lat, &mut rng, amp);
        let e = total_energy(&model, &def).unwrap().energy;
        let p = pair_sum_energy(&model, &def).unwrap();
        worst = worst.max((e - p).abs() / (1.0 + e));
    }
    Outcome { pass: worst <= 1e-10, detail: format!("max |E - pair sum|/(1+E) = {worst:.2e} over 200 deformations") }
}

fn frame_indifference() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let lat = Arc::new(RodLattice::new(CrossSection::rectangle(2, 2).unwrap(), 1.0, 8).unwrap());
    let mut worst: f64 = 0.0;
    let mut identity: f64 = 0.0;
    for n in 0..100 {
        let model = if n % 2 == 0 { th() } else { ljts() };
        let def = random_deformation(&lat, &mut rng, 0.2);
        let e = total_energy(&model, &def).unwrap().energy;
        let moved = def.rigidly_moved(&random_rotation(&mut rng), &Vector3::from_fn(|_, _| 10.0 * normal(&mut rng)));
        let e2 = total_energy(&model, &moved).unwrap().energy;
        worst = worst.max((e - e2).abs() / e.abs().max(1e-300));
        identity = identity.max(total_energy(&model, &Deformation::identity(lat.clone())).unwrap().energy.abs());
    }
    Outcome {
        pass: worst <= 1e-9 && identity <= 1e-12,
        detail: format!("rigid motions rel dev {worst:.2e}, E(identity) = {identity:.2e}"),
    }
}

fn random_cell(rng: &mut ChaCha8Rng) -> CellMatrix {
    let base = reference_cell();
    match rng.random_range(0..3) {
        0 => {
            let amp = 10f64.powf(rng.random_range(-3.0..0.5));
            random_rotation(rng) * base + CellMatrix::from_fn(|_, _| amp * normal(rng))
        }
        1 => CellMatrix::from_fn(|_, _| 2.0 * normal(rng)),
        _ => {
            // anisotropic stretch
            let s = Matrix3::from_diagonal(&Vector3::from_fn(|_, _| rng.random_range(0.2..2.5)));
            random_rotation(rng) * s * base
        }
    }
}

fn monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst: f64 = 0.0;
    let models = [th(), ljts()];
    for _ in 0..10_000 {
        let y = random_cell(&mut rng);
        for model in &models {
            let mut prev = 4.0 * model.cell_energy(FULL_MASK, &y, 4);
            for k in 5..=64u32 {
                let cur = k as f64 * model.cell_energy(FULL_MASK, &y, k);
                worst = worst.max(prev - cur);
                prev = cur;
            }
        }
    }
    Outcome {
        pass: worst <= 1e-12,
        detail: format!("max decrease of k W^(k) = {worst:.2e} on 10^4 inputs, k = 4..64"),
    }
}

fn relaxed_form() -> Outcome {
    let model = th();
    let cs = CrossSection::unit_square();
    let table = hessian_forms(&model, &cs).unwrap();
    let zero = q3rel(&SkewGenerator::from_axial(Vector3::zeros()), &cs, &table).unwrap().value;
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let (mut hom, mut orc): (f64, f64) = (0.0, 0.0);
    for n in 0..10 {
        let a = SkewGenerator::from_axial(Vector3::from_fn(|_, _| normal(&mut rng)));
        let v = q3rel(&a, &cs, &table).unwrap().value;
        let t = rng.random_range(0.1..3.0);
        let vt = q3rel(&a.scaled(t), &cs, &table).unwrap().value;
        hom = hom.max((vt - t * t * v).abs() / (t * t * v));
        let o = q3rel_oracle(&a, &cs, &table, 3, 500 + n);
        orc = orc.max((v - o).abs() / v);
    }
    Outcome {
        pass: zero.abs() <= 1e-14 && hom <= 1e-9 && orc <= 1e-6,
        detail: format!("Q(0) = {zero:.1e}, homogeneity {hom:.2e}, oracle rel dev {orc:.2e}"),
    }
}

fn hessian_kernel() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, model) in [("TruncHarmonic", th()), ("LJTS", ljts())] {
        let table = hessian_forms(&model, &CrossSection::unit_square()).unwrap();
        let h = table.interior_form().unwrap();
        let scale = h.norm();
        let kernel = rigid_directions().iter().map(|d| apply_form(h, d).abs() / scale).fold(0.0, f64::max);
        let ev = &table.interior_eigenvalues;
        let top = ev.last().copied().unwrap();
        let zeros = ev[..6].iter().map(|v| v.abs()).fold(0.0, f64::max) / top;
        let seventh = ev[6] / top;
        pass &= kernel <= 1e-9 && zeros <= 1e-9 && seventh > 1e-6;
        parts.push(format!("{name}: kernel {kernel:.1e}, 7th eigenvalue {:.3e}", ev[6]));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn explicit_crack_energy() -> Outcome {
    let model = th();
    let cs = CrossSection::unit_square();
    let p = CrackProblem::new(Vector3::new(0.5, 0.0, 0.0), Matrix3::identity(), model, cs, default_schedule()).unwrap();
    let mut worst: f64 = 0.0;
    for &e in &p.schedule {
        let d = clean_break_config(&p, e).unwrap();
        worst = worst.max((scaled_energy(&model, &d).unwrap() - 3.6).abs());
    }
    let sol = phi_numeric(&p, &CrackOptions::default()).unwrap();
    let dev = (sol.estimate - 3.6).abs();
    let dominant = sol.gap_in_every_fibre();
    Outcome {
        pass: worst <= 1e-9 && dev <= 1e-6 && dominant,
        detail: format!(
            "clean break max dev {worst:.1e}, phi_numeric = {:.10} (dev {dev:.1e}), gap in every fibre: {dominant}",
            sol.estimate
        ),
    }
}

fn kink_bound() -> Outcome {
    let model = th();
    let cs = CrossSection::unit_square();
    let r = rotation_about(&Vector3::y(), std::f64::consts::FRAC_PI_2);
    let p = CrackProblem::new(Vector3::zeros(), r, model, cs, default_schedule()).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for &e in &p.schedule {
        let kc = kink_config(&p, e).unwrap();
        worst = worst.max(scaled_energy(&model, &kc.deformation).unwrap());
    }
    let sol = phi_numeric(&p, &CrackOptions::default()).unwrap();
    Outcome {
        pass: worst <= 3.3 + 1e-9 && sol.estimate > 0.0 && sol.estimate <= 3.3,
        detail: format!("kink energy max {worst:.6}, phi_numeric(0, R) = {:.6}", sol.estimate),
    }
}

fn near_kink(model: &CellEnergyModel, def: &Deformation) -> bool {
    let (nn, nnn) = model.pair_potentials().unwrap();
    let lat = def.lattice();
    let k = lat.k();
    let y = def.positions();
    lat.bonds().iter().any(|&(a, b, kind)| {
        let r = k as f64 * (y[a] - y[b]).norm();
        let (p, arg) = match kind {
            BondKind::Nn => (nn, r),
            BondKind::Nnn => (nnn, r / std::f64::consts::SQRT_2),
        };
        p.kinks(k).iter().any(|kp| (arg - kp).abs() < 1e-4)
    })
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut skipped = 0;
    while checked < 50 {
        let model = if checked % 2 == 0 { th() } else { ljts() };
        let k = [4, 8][(checked / 2) % 2];
        let lat = Arc::new(RodLattice::new(CrossSection::rectangle(2, 1).unwrap(), 4.0 / k as f64, k).unwrap());
        let def = random_deformation(&lat, &mut rng, 0.08);
        if near_kink(&model, &def) {
            skipped += 1;
            continue;
        }
        let g = energy_gradient(&model, &def).unwrap();
        let ev = Evaluator::new(&model, &lat);
        let mut pos = def.positions().to_vec();
        let scale = g.iter().map(|v| v.amax()).fold(0.0, f64::max).max(1e-300);
        let mut err: f64 = 0.0;
        for a in 0..pos.len() {
            for c in 0..3 {
                pos[a][c] += h;
                let ep = ev.local_energy(&pos, a);
                pos[a][c] -= 2.0 * h;
                let em = ev.local_energy(&pos, a);
                pos[a][c] += h;
                err = err.max(((ep - em) / (2.0 * h) - g[a][c]).abs());
            }
        }
        worst = worst.max(err / scale);
        checked += 1;
    }
    Outcome {
        pass: worst <= 1e-6,
        detail: format!("max |FD - grad|/|grad|_inf = {worst:.2e} on 50 configurations ({skipped} near kinks skipped)"),
    }
}

const BEND: &str = r#"
[model.cell]
kind = "pair"
nn = { kind = "trunc_harmonic", stiffness = 1.0, plateau_plus = 0.3, plateau_minus = 0.3 }
nnn = { kind = "trunc_harmonic", stiffness = 1.0, plateau_plus = 0.3, plateau_minus = 0.3 }

[frame]
length = 2.0
segments = [{ kind = "arc", curvature = 0.2 }]

[study]
k = [8, 16, 32]
correctors = "optimal"
"#;

fn convergence_trend() -> Outcome {
    let cfg = StudyConfig::from_toml_str(BEND).unwrap();
    let report = run_convergence_study(&cfg).unwrap();
    let errs: Vec<f64> = report.rows.iter().map(|r| r.rel_err).collect();
    let monotone = errs.windows(2).all(|w| w[1] <= w[0]);
    let last = *errs.last().unwrap();
    Outcome {
        pass: monotone && last <= 0.15,
        detail: format!("E_lim = {:.6}, rel errors {errs:.4?}", report.limit.total),
    }
}

fn broken_slices() -> Outcome {
    let model = th();
    let cs = CrossSection::unit_square();
    let table = hessian_forms(&model, &cs).unwrap();
    let mut bend_broken = 0;
    let mut qualifying = 0;
    let mut exact = true;
    for kappa in [0.05, 0.1, 0.2] {
        for k in [8, 16, 32] {
            let fc = FrameCurve::smooth(2.0, SegmentShape::Arc { curvature: kappa, angle: 0.0 }).unwrap();
            let ansatz = RecoveryAnsatz::new(fc, cs.clone(), k).with_optimal_correctors(&table).unwrap();
            let def = smooth_frame_config(&ansatz).unwrap();
            let c_frac = model.thresholds(k).unwrap().c_frac;
            let strain = def
                .lattice()
                .cells()
                .iter()
                .filter(|c| c.class == CellClass::Interior)
                .map(|c| dist_so3bar(&discrete_gradient(&def.cell_matrix(&c.corners))))
                .fold(0.0, f64::max);
            let prof = slice_profile(&model, &def, 1.0).unwrap();
            exact &= prof.total_mass() == scaled_energy(&model, &def).unwrap();
            if strain < c_frac / 10.0 {
                qualifying += 1;
                bend_broken += prof.broken_count();
            }
        }
    }
    let p = CrackProblem::new(Vector3::new(0.5, 0.0, 0.0), Matrix3::identity(), model, cs, default_schedule()).unwrap();
    let mut clean = Vec::new();
    for &e in &p.schedule {
        let d = clean_break_config(&p, e).unwrap();
        let prof = slice_profile(&model, &d, 1.0).unwrap();
        clean.push(prof.broken_count());
        exact &= prof.total_mass() == scaled_energy(&model, &d).unwrap();
    }
    Outcome {
        pass: qualifying >= 6 && bend_broken == 0 && clean.iter().all(|c| *c == 1) && exact,
        detail: format!(
            "{qualifying} elastic bends, broken {bend_broken}, clean break broken {clean:?}, masses exact: {exact}"
        ),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 decomposition identity", decomposition_identity),
        ("2 frame indifference and energy well", frame_indifference),
        ("3 monotonicity in k", monotonicity),
        ("4 relaxed form", relaxed_form),
        ("5 Hessian kernel and positivity", hessian_kernel),
        ("6 explicit crack energy", explicit_crack_energy),
        ("7 kink bound", kink_bound),
        ("8 gradient correctness", gradient_check),
        ("9 convergence trend", convergence_trend),
        ("10 broken-slice detector", broken_slices),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let t0 = Instant::now();
        let out = run();
        let secs = t0.elapsed().as_secs_f64();
        println!("{} [{name}] {} ({secs:.1} s)", if out.pass { "PASS" } else { "FAIL" }, out.detail);
        if !out.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
