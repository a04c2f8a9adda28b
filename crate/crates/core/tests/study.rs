use nanorod::config::{ReportFormat, StudyConfig};
use nanorod::frame::{FrameCurve, Jump, SegmentShape};
use nanorod::lattice::CrossSection;
use nanorod::potentials::CellEnergyModel;
use nanorod::study::{
    emit_report, evaluate_limit_functional, format_report, parse_report, run_convergence_study, LimitOptions, PhiMemo,
    PhiMethod,
};
use nanorod::Error;
use nalgebra::{Matrix3, Vector3};

const MODEL: &str = r#"
[model.cell]
kind = "pair"
nn = { kind = "trunc_harmonic", stiffness = 1.0, plateau_plus = 0.3, plateau_minus = 0.3 }
nnn = { kind = "trunc_harmonic", stiffness = 1.0, plateau_plus = 0.3, plateau_minus = 0.3 }
"#;

fn crack_config() -> String {
    format!(
        "{MODEL}
[frame]
length = 2.0
segments = [{{ kind = \"straight\" }}, {{ kind = \"straight\" }}]
jumps = [{{ position = 1.0, translation = [0.5, 0.0, 0.0] }}]

[study]
k = [8, 16, 32]
"
    )
}

#[test]
fn crack_study_column_is_constant() {
    let cfg = StudyConfig::from_toml_str(&crack_config()).unwrap();
    let report = run_convergence_study(&cfg).unwrap();
    assert_eq!(report.rows.len(), 3);
    for row in &report.rows {
        assert!((row.k_e - 3.6).abs() <= 1e-9, "{row:?}");
        assert!(row.e_lim_elastic.abs() < 1e-14);
        assert!((row.e_lim_crack - 3.6).abs() < 1e-12);
        assert_eq!(row.broken_slices, 1);
    }
}

#[test]
fn studies_are_deterministic_apart_from_timing() {
    let cfg = StudyConfig::from_toml_str(&crack_config()).unwrap();
    let strip = |text: String| -> Vec<String> {
        text.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
    };
    let a = format_report(&run_convergence_study(&cfg).unwrap().rows, ReportFormat::Csv).unwrap();
    let b = format_report(&run_convergence_study(&cfg).unwrap().rows, ReportFormat::Csv).unwrap();
    assert_eq!(strip(a), strip(b));
}

#[test]
fn bend_with_jump_adds_both_parts() {
    let model = CellEnergyModel::trunc_harmonic(1.0, 0.3);
    let cs = CrossSection::unit_square();
    let arc = SegmentShape::Arc { curvature: 0.2, angle: 0.0 };
    let jump = Jump { position: 1.0, translation: Vector3::new(0.5, 0.0, 0.0), rotation: Matrix3::identity() };
    let fc = FrameCurve::new(2.0, &[arc, arc], &[jump], Matrix3::identity(), Vector3::zeros()).unwrap();
    let smooth = FrameCurve::smooth(2.0, arc).unwrap();
    let memo = PhiMemo::new();
    let opts = LimitOptions::default();
    let b = evaluate_limit_functional(&fc, &model, &cs, &opts, &memo).unwrap();
    let e = evaluate_limit_functional(&smooth, &model, &cs, &opts, &memo).unwrap();
    assert!((b.total - (e.total + 3.6)).abs() < 1e-10);
    assert_eq!(b.jumps[0].method, PhiMethod::Explicit);
    assert_eq!(memo.numeric_calls(), 0);
}

#[test]
fn numeric_cell_formula_is_memoized() {
    let model = CellEnergyModel::trunc_harmonic(1.0, 0.3);
    let cs = CrossSection::unit_square();
    let rot = nanorod::geometry::rotation_about(&Vector3::y(), std::f64::consts::FRAC_PI_2);
    let kink = Jump { position: 1.0, translation: Vector3::zeros(), rotation: rot };
    let fc = FrameCurve::new(2.0, &[SegmentShape::Straight; 2], &[kink], Matrix3::identity(), Vector3::zeros()).unwrap();
    let memo = PhiMemo::new();
    let opts = LimitOptions::default();
    let first = evaluate_limit_functional(&fc, &model, &cs, &opts, &memo).unwrap();
    let second = evaluate_limit_functional(&fc, &model, &cs, &opts, &memo).unwrap();
    assert_eq!(memo.numeric_calls(), 1);
    assert_eq!(first.total, second.total);
    assert_eq!(first.jumps[0].method, PhiMethod::Numeric);
    assert!(first.crack > 0.0 && first.crack <= 3.3);
}

#[test]
fn invalid_cross_section_is_a_config_error() {
    let text = format!("cross_section = [[0, 0], [2, 0]]\n{}", crack_config());
    match StudyConfig::from_toml_str(&text) {
        Err(Error::Config { field, .. }) => assert_eq!(field, "cross_section"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn reports_round_trip_through_files() {
    let cfg = StudyConfig::from_toml_str(&crack_config()).unwrap();
    let rows = run_convergence_study(&cfg).unwrap().rows;
    let dir = tempfile::tempdir().unwrap();
    for format in [ReportFormat::Csv, ReportFormat::Json] {
        let path = dir.path().join("report");
        emit_report(&rows, format, &path).unwrap();
        let back = parse_report(&std::fs::read_to_string(&path).unwrap(), format).unwrap();
        assert_eq!(back, rows);
    }
}
