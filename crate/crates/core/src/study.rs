//! Limit functional, discrete-to-limit convergence studies and reports.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{FrameDef, ReportFormat, StudyConfig};
use crate::crack::{phi_explicit_masspring, phi_numeric, CrackOptions, CrackProblem, ScheduleEntry};
use crate::elastic::{hessian_forms, RelaxedForm};
use crate::energy::slice_profile;
use crate::error::{Error, Result};
use crate::frame::{elastic_energy_with_form, FrameCurve};
use crate::generators::{jump_frame_config, local_jump, smooth_frame_config, RecoveryAnsatz};
use crate::geometry::axis_angle_of;
use crate::lattice::CrossSection;
use crate::potentials::CellEnergyModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiMethod {
    Explicit,
    Numeric,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JumpTerm {
    pub position: f64,
    /// Jump of `y~` in the frame of the left side.
    pub u: [f64; 3],
    /// Axis-angle vector of the relative rotation.
    pub rotation: [f64; 3],
    pub phi: f64,
    pub method: PhiMethod,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitBreakdown {
    pub elastic: f64,
    pub crack: f64,
    pub total: f64,
    pub jumps: Vec<JumpTerm>,
    /// Set when the frame is inadmissible and `total` is infinite.
    pub reason: Option<String>,
}

impl LimitBreakdown {
    fn inadmissible(reason: String) -> Self {
        Self { elastic: f64::INFINITY, crack: 0.0, total: f64::INFINITY, jumps: Vec::new(), reason: Some(reason) }
    }
}

/// Settings for numerical cell-formula estimates inside the limit functional.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitOptions {
    pub schedule: Vec<ScheduleEntry>,
    pub crack: CrackOptions,
    pub quadrature_points: usize,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self { schedule: crate::config::default_schedule(), crack: CrackOptions::default(), quadrature_points: 5 }
    }
}

/// Memo of numerical cell-formula values, shared between evaluations.
#[derive(Debug, Default)]
pub struct PhiMemo {
    values: Mutex<HashMap<String, f64>>,
    numeric_calls: AtomicUsize,
}

impl PhiMemo {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of `phi_numeric` runs performed so far.
    pub fn numeric_calls(&self) -> usize {
        self.numeric_calls.load(Ordering::Relaxed)
    }

    fn key(u: &Vector3<f64>, r: &Matrix3<f64>, model: &CellEnergyModel, cs: &CrossSection, opts: &LimitOptions) -> String {
        let round = |v: f64| format!("{}", (v * 1e10).round() as i64);
        let nums: Vec<String> = u.iter().chain(r.iter()).map(|v| round(*v)).collect();
        format!(
            "{}|{:?}|{}|{:?}|{:?}",
            model.fingerprint(),
            cs.midpoints(),
            nums.join(","),
            opts.schedule,
            opts.crack
        )
    }

    fn get_or_compute(
        &self,
        u: &Vector3<f64>,
        r: &Matrix3<f64>,
        model: &CellEnergyModel,
        cs: &CrossSection,
        opts: &LimitOptions,
    ) -> Result<f64> {
        let key = Self::key(u, r, model, cs, opts);
        if let Some(v) = self.values.lock().expect("memo lock").get(&key) {
            return Ok(*v);
        }
        let p = CrackProblem::new(*u, *r, *model, cs.clone(), opts.schedule.clone())?;
        self.numeric_calls.fetch_add(1, Ordering::Relaxed);
        let v = phi_numeric(&p, &opts.crack)?.estimate;
        self.values.lock().expect("memo lock").insert(key, v);
        Ok(v)
    }
}

/// `E_lim = 1/2 int Q3rel(R^T R') + sum_jumps phi(R(s-)^T [y~], R(s-)^T R(s+))`.
/// Jumps with `u != 0` under mass-spring models use the explicit formula;
/// all others are estimated numerically through `memo`.
pub fn evaluate_limit_functional(
    fc: &FrameCurve,
    model: &CellEnergyModel,
    cs: &CrossSection,
    opts: &LimitOptions,
    memo: &PhiMemo,
) -> Result<LimitBreakdown> {
    let table = hessian_forms(model, cs)?;
    let form = RelaxedForm::from_table(cs, &table)?;
    let elastic = elastic_energy_with_form(fc, &form, opts.quadrature_points);
    let mut jumps = Vec::new();
    for j in fc.cracks() {
        let (u, r) = local_jump(fc, j.position);
        let (phi, method) = match phi_explicit_masspring(&u, model, cs) {
            Ok(v) => (v, PhiMethod::Explicit),
            Err(Error::ModelNotMassSpring | Error::ModelNotApplicable(_)) => {
                (memo.get_or_compute(&u, &r, model, cs, opts)?, PhiMethod::Numeric)
            }
            Err(e) => return Err(e),
        };
        jumps.push(JumpTerm { position: j.position, u: u.into(), rotation: axis_angle_of(&r).into(), phi, method });
    }
    let crack = jumps.iter().fold(0.0, |s, j| s + j.phi);
    Ok(LimitBreakdown { elastic, crack, total: elastic + crack, jumps, reason: None })
}

/// As [`evaluate_limit_functional`] for a frame description; an inadmissible
/// frame yields an infinite total with the reason attached.
pub fn evaluate_limit_of_def(
    frame: &FrameDef,
    model: &CellEnergyModel,
    cs: &CrossSection,
    opts: &LimitOptions,
    memo: &PhiMemo,
) -> Result<LimitBreakdown> {
    match frame.build() {
        Ok(fc) => evaluate_limit_functional(&fc, model, cs, opts, memo),
        Err(Error::InadmissibleFrame(reason)) => Ok(LimitBreakdown::inadmissible(reason)),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub k: u32,
    #[serde(rename = "kE")]
    pub k_e: f64,
    #[serde(rename = "E_lim_elastic")]
    pub e_lim_elastic: f64,
    #[serde(rename = "E_lim_crack")]
    pub e_lim_crack: f64,
    pub rel_err: f64,
    pub broken_slices: usize,
    pub wall_ms: u64,
}

pub fn relative_error(k_e: f64, e_lim: f64) -> f64 {
    (k_e - e_lim).abs() / e_lim.max(1e-12)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub limit: LimitBreakdown,
    pub rows: Vec<StudyRow>,
}

pub fn limit_options(cfg: &StudyConfig) -> LimitOptions {
    LimitOptions {
        schedule: cfg.phi.schedule.clone(),
        crack: cfg.phi.options(cfg.seed),
        quadrature_points: cfg.study.quadrature_points,
    }
}

/// Builds the recovery configuration for each `k`, evaluates `k E^(k)` and
/// compares it with the limit functional. Rows are ordered like `study.k`.
pub fn run_convergence_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let cs = cfg.cross_section()?;
    let fc = cfg.frame_def()?.build()?;
    let model = cfg.model;
    let memo = PhiMemo::new();
    let limit = evaluate_limit_functional(&fc, &model, &cs, &limit_options(cfg), &memo)?;
    let table = hessian_forms(&model, &cs)?;
    let has_cracks = fc.cracks().next().is_some();
    let rows = cfg
        .study
        .k
        .par_iter()
        .map(|&k| {
            let t0 = Instant::now();
            let ansatz = RecoveryAnsatz::new(fc.clone(), cs.clone(), k).with_correctors(cfg.study.correctors, &table)?;
            let def = if has_cracks {
                jump_frame_config(&ansatz, &model, cfg.study.splice_radius, &[])?
            } else {
                smooth_frame_config(&ansatz)?
            };
            let profile = slice_profile(&model, &def, cfg.study.extension_constant)?;
            let k_e = profile.total_mass();
            if !k_e.is_finite() {
                return Err(Error::NonConvergent { reason: format!("non-finite energy at k = {k}"), best: k_e });
            }
            Ok(StudyRow {
                k,
                k_e,
                e_lim_elastic: limit.elastic,
                e_lim_crack: limit.crack,
                rel_err: relative_error(k_e, limit.total),
                broken_slices: profile.broken_count(),
                wall_ms: t0.elapsed().as_millis() as u64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyReport { limit, rows })
}

pub fn format_report(rows: &[StudyRow], format: ReportFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptyReport);
    }
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.serialize(row).map_err(|e| Error::Parse(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
        }
        ReportFormat::Json => serde_json::to_string_pretty(rows).map_err(|e| Error::Parse(e.to_string())),
    }
}

pub fn parse_report(text: &str, format: ReportFormat) -> Result<Vec<StudyRow>> {
    match format {
        ReportFormat::Csv => csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<std::result::Result<Vec<StudyRow>, _>>()
            .map_err(|e| Error::Parse(e.to_string())),
        ReportFormat::Json => serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string())),
    }
}

/// Writes the rows to `path`.
pub fn emit_report(rows: &[StudyRow], format: ReportFormat, path: &Path) -> Result<()> {
    let text = format_report(rows, format)?;
    std::fs::write(path, text)?;
    Ok(())
}
