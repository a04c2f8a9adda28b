use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

use nanorod::crack::component_decomposition;
use nanorod::elastic::{hessian_forms, q3rel, SkewGenerator};
use nanorod::energy::{scaled_energy, slice_profile, total_energy, Deformation};
use nanorod::frame::{FrameCurve, SegmentShape};
use nanorod::generators::{smooth_frame_config, RecoveryAnsatz};
use nanorod::geometry::rotation_from_axis_angle;
use nanorod::io::{format_deformation, parse_deformation};
use nanorod::lattice::{CrossSection, RodLattice};
use nanorod::potentials::CellEnergyModel;

fn vec3(scale: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-scale..scale).prop_map(Vector3::from)
}

fn noisy(lat: &Arc<RodLattice>, noise: &[f64], amp: f64) -> Deformation {
    let k = lat.k() as f64;
    let pos = (0..lat.atom_count())
        .map(|a| {
            let n = Vector3::new(noise[(3 * a) % noise.len()], noise[(3 * a + 1) % noise.len()], noise[(3 * a + 2) % noise.len()]);
            Vector3::from(lat.reference_position(a)) + amp * n / k
        })
        .collect();
    Deformation::new(lat.clone(), pos).unwrap()
}

fn model(which: bool) -> CellEnergyModel {
    if which {
        CellEnergyModel::trunc_harmonic(1.0, 0.3)
    } else {
        CellEnergyModel::ljts(1.0)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn energy_is_frame_indifferent(
        noise in prop::collection::vec(-1.0f64..1.0, 30..60),
        amp in 0.0f64..0.6,
        axis in vec3(3.0),
        shift in vec3(5.0),
        which in any::<bool>(),
        k in 3u32..9,
    ) {
        let lat = Arc::new(RodLattice::new(CrossSection::rectangle(2, 1).unwrap(), 3.0 / k as f64, k).unwrap());
        let m = model(which);
        let def = noisy(&lat, &noise, amp);
        let e = total_energy(&m, &def).unwrap().energy;
        let moved = def.rigidly_moved(&rotation_from_axis_angle(&axis), &shift);
        let e2 = total_energy(&m, &moved).unwrap().energy;
        prop_assert!((e - e2).abs() <= 1e-9 * e.max(1e-12));
    }

    #[test]
    fn components_are_rigidly_invariant(
        noise in prop::collection::vec(-1.0f64..1.0, 30..60),
        gap in 0.0f64..4.0,
        axis in vec3(3.0),
        shift in vec3(5.0),
    ) {
        let lat = Arc::new(RodLattice::new(CrossSection::unit_square(), 1.0, 6).unwrap());
        let mut def = noisy(&lat, &noise, 0.1).into_positions();
        // open a gap between the first three layers and the rest
        for (a, p) in def.iter_mut().enumerate() {
            if lat.atom_coords(a)[0] >= 3 {
                p.x += gap / 6.0;
            }
        }
        let def = Deformation::new(lat.clone(), def).unwrap();
        let before = component_decomposition(&def, 1.5).unwrap();
        let after = component_decomposition(&def.rigidly_moved(&rotation_from_axis_angle(&axis), &shift), 1.5).unwrap();
        prop_assert_eq!(&before, &after);
        let total: usize = before.iter().map(|c| c.len()).sum();
        prop_assert_eq!(total, lat.atom_count());
        if gap > 1.0 {
            prop_assert!(before.len() >= 2);
        }
    }

    #[test]
    fn relaxed_form_is_nonnegative_and_quadratic(w in vec3(2.0), t in 0.05f64..4.0) {
        let m = CellEnergyModel::trunc_harmonic(1.0, 0.3);
        let cs = CrossSection::unit_square();
        let table = hessian_forms(&m, &cs).unwrap();
        let a = SkewGenerator::from_axial(w);
        let v = q3rel(&a, &cs, &table).unwrap().value;
        let vt = q3rel(&a.scaled(t), &cs, &table).unwrap().value;
        prop_assert!(v >= -1e-12);
        prop_assert!((vt - t * t * v).abs() <= 1e-9 * (t * t * v).max(1e-12));
    }

    #[test]
    fn slice_masses_sum_to_scaled_energy(
        noise in prop::collection::vec(-1.0f64..1.0, 30..60),
        amp in 0.0f64..1.0,
        which in any::<bool>(),
    ) {
        let lat = Arc::new(RodLattice::new(CrossSection::rectangle(1, 2).unwrap(), 1.0, 5).unwrap());
        let m = model(which);
        let def = noisy(&lat, &noise, amp);
        let p = slice_profile(&m, &def, 1.0).unwrap();
        prop_assert_eq!(p.total_mass(), scaled_energy(&m, &def).unwrap());
    }

    #[test]
    fn recovery_energy_ignores_global_rigid_motions(
        kappa in 0.0f64..0.4,
        axis in vec3(3.0),
        origin in vec3(5.0),
    ) {
        let m = CellEnergyModel::trunc_harmonic(1.0, 0.3);
        let cs = CrossSection::unit_square();
        let shape = SegmentShape::Arc { curvature: kappa, angle: 0.3 };
        let plain = FrameCurve::smooth(1.0, shape).unwrap();
        let moved = FrameCurve::new(1.0, &[shape], &[], rotation_from_axis_angle(&axis), origin).unwrap();
        let e1 = scaled_energy(&m, &smooth_frame_config(&RecoveryAnsatz::new(plain, cs.clone(), 8)).unwrap()).unwrap();
        let e2 = scaled_energy(&m, &smooth_frame_config(&RecoveryAnsatz::new(moved, cs, 8)).unwrap()).unwrap();
        prop_assert!((e1 - e2).abs() <= 1e-9 * e1.max(1e-12), "{} {}", e1, e2);
    }

    #[test]
    fn deformation_files_round_trip(noise in prop::collection::vec(-1.0f64..1.0, 30..60), amp in 0.0f64..2.0) {
        let lat = Arc::new(RodLattice::new(CrossSection::rectangle(2, 2).unwrap(), 0.5, 4).unwrap());
        let def = noisy(&lat, &noise, amp);
        let back = parse_deformation(&format_deformation(&def)).unwrap();
        prop_assert_eq!(back.positions(), def.positions());
        prop_assert_eq!(back.lattice().k(), 4);
    }
}

#[test]
fn rotation_helper_is_orthogonal() {
    let r = rotation_from_axis_angle(&Vector3::new(0.3, -1.2, 0.7));
    assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-14);
}
