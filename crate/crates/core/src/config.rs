//! TOML study configuration.
//!
//! Every table rejects unknown keys. Parse failures are reported as
//! [`Error::Config`] with the dotted path of the offending field and, where
//! available, the line and column.

use std::path::PathBuf;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::crack::{CrackOptions, ScheduleEntry};
use crate::descent::DescentOptions;
use crate::error::{Error, Result};
use crate::frame::{FrameCurve, Jump, SegmentShape};
use crate::generators::CorrectorChoice;
use crate::geometry::rotation_from_axis_angle;
use crate::lattice::CrossSection;
use crate::potentials::CellEnergyModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpDef {
    pub position: f64,
    #[serde(default)]
    pub translation: [f64; 3],
    /// Axis-angle vector of the relative rotation `R(s-)^T R(s+)`.
    #[serde(default)]
    pub rotation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameDef {
    pub length: f64,
    #[serde(default = "straight")]
    pub segments: Vec<SegmentShape>,
    #[serde(default)]
    pub jumps: Vec<JumpDef>,
    /// Axis-angle vector of the frame at `s = 0`.
    #[serde(default)]
    pub initial_rotation: [f64; 3],
    #[serde(default)]
    pub origin: [f64; 3],
}

fn straight() -> Vec<SegmentShape> {
    vec![SegmentShape::Straight]
}

impl FrameDef {
    pub fn build(&self) -> Result<FrameCurve> {
        let jumps: Vec<Jump> = self
            .jumps
            .iter()
            .map(|j| Jump {
                position: j.position,
                translation: Vector3::from(j.translation),
                rotation: rotation_from_axis_angle(&Vector3::from(j.rotation)),
            })
            .collect();
        FrameCurve::new(
            self.length,
            &self.segments,
            &jumps,
            rotation_from_axis_angle(&Vector3::from(self.initial_rotation)),
            Vector3::from(self.origin),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySettings {
    pub k: Vec<u32>,
    pub correctors: CorrectorChoice,
    /// Splice half-width; `k^(-1/2)` when absent.
    pub splice_radius: Option<f64>,
    pub extension_constant: f64,
    pub quadrature_points: usize,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            k: vec![8, 16, 32],
            correctors: CorrectorChoice::Optimal,
            splice_radius: None,
            extension_constant: 1.0,
            quadrature_points: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhiSettings {
    pub u: [f64; 3],
    /// Axis-angle vector of `R_rel`.
    pub rotation: [f64; 3],
    pub schedule: Vec<ScheduleEntry>,
    pub starts: usize,
    pub noise: f64,
    pub reactivations: usize,
    pub strict: bool,
    pub descent: DescentOptions,
}

impl Default for PhiSettings {
    fn default() -> Self {
        let o = CrackOptions::default();
        Self {
            u: [0.0; 3],
            rotation: [0.0; 3],
            schedule: default_schedule(),
            starts: o.starts,
            noise: o.noise,
            reactivations: o.reactivations,
            strict: o.strict,
            descent: o.descent,
        }
    }
}

pub fn default_schedule() -> Vec<ScheduleEntry> {
    vec![ScheduleEntry::new(0.5, 16), ScheduleEntry::new(0.25, 64), ScheduleEntry::new(0.125, 256)]
}

impl PhiSettings {
    pub fn options(&self, seed: u64) -> CrackOptions {
        CrackOptions {
            starts: self.starts,
            seed,
            noise: self.noise,
            descent: self.descent,
            reactivations: self.reactivations,
            strict: self.strict,
        }
    }

    pub fn jump(&self) -> (Vector3<f64>, Matrix3<f64>) {
        (Vector3::from(self.u), rotation_from_axis_angle(&Vector3::from(self.rotation)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QrelSettings {
    /// Axial vectors of the generators to tabulate.
    pub generators: Vec<[f64; 3]>,
    pub cache: Option<PathBuf>,
}

impl Default for QrelSettings {
    fn default() -> Self {
        Self { generators: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], cache: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSettings {
    pub k: Vec<u32>,
    pub samples: usize,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self { k: vec![4, 8, 16, 32, 64], samples: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergySettings {
    pub deformation: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    pub path: Option<PathBuf>,
    pub format: ReportFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub model: CellEnergyModel,
    #[serde(default = "unit_square")]
    pub cross_section: Vec<[i32; 2]>,
    pub frame: Option<FrameDef>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub study: StudySettings,
    #[serde(default)]
    pub phi: PhiSettings,
    #[serde(default)]
    pub qrel: QrelSettings,
    #[serde(default)]
    pub check: CheckSettings,
    #[serde(default)]
    pub energy: EnergySettings,
    #[serde(default)]
    pub output: OutputSettings,
}

fn unit_square() -> Vec<[i32; 2]> {
    vec![[0, 0]]
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

impl StudyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<toml>", e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = match inner.span() {
                Some(span) => {
                    let (l, c) = line_col(text, span.start);
                    format!("line {l}, column {c}: {}", inner.message())
                }
                None => inner.message().to_string(),
            };
            Error::config(if path == "." { "<root>".to_string() } else { path }, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn cross_section(&self) -> Result<CrossSection> {
        let cells: Vec<(i32, i32)> = self.cross_section.iter().map(|c| (c[0], c[1])).collect();
        CrossSection::new(&cells).map_err(|e| Error::config("cross_section", e.to_string()))
    }

    /// The frame table, required by the frame-based commands.
    pub fn frame_def(&self) -> Result<&FrameDef> {
        self.frame.as_ref().ok_or_else(|| Error::config("frame", "missing [frame] table"))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| Error::config("model", e.to_string()))?;
        self.cross_section()?;
        let s = &self.study;
        if s.k.is_empty() || s.k[0] == 0 {
            return Err(Error::config("study.k", "needs at least one positive k"));
        }
        if !s.k.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::config("study.k", "must be strictly increasing"));
        }
        if let Some(r) = s.splice_radius {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::config("study.splice_radius", format!("{r} is not in (0, 1)")));
            }
        }
        if !(s.extension_constant >= 1.0) {
            return Err(Error::config("study.extension_constant", "must be >= 1"));
        }
        if s.quadrature_points == 0 {
            return Err(Error::config("study.quadrature_points", "must be positive"));
        }
        for (i, e) in self.phi.schedule.iter().enumerate() {
            if !(e.r > 0.0 && e.r < 1.0) || e.k == 0 {
                return Err(Error::config(format!("phi.schedule[{i}]"), "needs r in (0, 1) and k > 0"));
            }
        }
        if self.phi.schedule.is_empty() {
            return Err(Error::config("phi.schedule", "must not be empty"));
        }
        if self.phi.starts == 0 {
            return Err(Error::config("phi.starts", "must be positive"));
        }
        if !self.phi.u.iter().chain(&self.phi.rotation).all(|v| v.is_finite()) {
            return Err(Error::config("phi.u", "non-finite entry"));
        }
        if self.check.k.contains(&0) {
            return Err(Error::config("check.k", "entries must be positive"));
        }
        if let Some(f) = &self.frame {
            if f.segments.len() != f.jumps.len() + 1 {
                return Err(Error::config(
                    "frame.jumps",
                    format!("{} segments need {} jumps, got {}", f.segments.len(), f.segments.len() - 1, f.jumps.len()),
                ));
            }
            if !(f.length > 0.0 && f.length.is_finite()) {
                return Err(Error::config("frame.length", "must be positive"));
            }
        }
        Ok(())
    }
}
