//! Declarative musculoskeletal model document.
//!
//! A [`ModelDoc`] is plain data addressed by names. Numerical modules work on
//! the index-resolved [`CompiledModel`] built from a structurally valid
//! document.

mod compiled;
mod native;
mod reference;

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::muscle::MuscleParams;

pub use compiled::{
    CompiledModel, CompiledMuscle, CompiledSurface, CompiledWrap, JointData, SegmentData,
};
pub use native::{load_native_model, serialize_native_model, to_json_17};
pub use reference::{parse_reference_model, ParsedReference};

/// Default joint damping for imported joints that declare none, N·m·s/rad.
pub const DEFAULT_JOINT_DAMPING: f64 = 0.0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("{element} references unknown segment '{segment}'")]
    DanglingReference { element: String, segment: String },
    #[error("{element} is missing required {what}")]
    MissingRequired { element: String, what: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("model violates structural invariants:\n{0}")]
    InvariantViolation(ValidationReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub name: String,
    /// Gravitational acceleration, m/s².
    pub gravity: [f64; 3],
    pub segments: Vec<BodySegment>,
    pub joints: Vec<JointSpec>,
    pub muscles: Vec<MuscleSpec>,
    pub markers: Vec<MarkerSpec>,
    pub wrap_surfaces: Vec<WrapSurfaceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySegment {
    pub name: String,
    pub mass: f64,
    /// Centre of mass in the segment frame, m.
    pub com: [f64; 3],
    /// Principal moments about the centre of mass, kg·m².
    pub inertia: [f64; 3],
    /// Origin of this segment in its parent's frame (world frame for the root).
    pub parent_offset: [f64; 3],
}

/// Hinge joint. The child frame coincides with the parent frame rotated
/// about `axis` (expressed in the parent frame) by the joint angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    pub parent: String,
    pub child: String,
    pub axis: [f64; 3],
    /// `[q_min, q_max]`, rad.
    pub range: [f64; 2],
    pub damping: f64,
}

impl JointSpec {
    pub fn mid_range(&self) -> f64 {
        0.5 * (self.range[0] + self.range[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathPoint {
    pub segment: String,
    pub local: [f64; 3],
}

/// A wrap surface used by a muscle, with the side site (in the surface's
/// owner-segment frame) selecting which side the path passes on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WrapAssignment {
    pub surface: String,
    pub side_site: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuscleSpec {
    pub name: String,
    /// Ordered origin to insertion.
    pub path: Vec<PathPoint>,
    pub wraps: Vec<WrapAssignment>,
    pub params: MuscleParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WrapKind {
    Cylinder,
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WrapSurfaceSpec {
    pub name: String,
    pub kind: WrapKind,
    pub segment: String,
    /// Centre in the owner segment frame, m.
    pub location: [f64; 3],
    /// Body-fixed XYZ Euler angles, rad. A cylinder's axis is the rotated z axis.
    pub orientation: [f64; 3],
    pub radius: f64,
    /// Cylinder half-length, m (unused for spheres).
    pub half_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerSpec {
    pub name: String,
    pub segment: String,
    pub local: [f64; 3],
}

/// One violated invariant with the path of the offending element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub entries: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.entries.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.entries {
            writeln!(f, "{}: {}", v.path, v.message)?;
        }
        Ok(())
    }
}

impl ModelDoc {
    pub fn segment(&self, name: &str) -> Option<&BodySegment> {
        self.segments.iter().find(|s| s.name == name)
    }

    pub fn muscle(&self, name: &str) -> Option<&MuscleSpec> {
        self.muscles.iter().find(|m| m.name == name)
    }

    pub fn muscle_index(&self, name: &str) -> Option<usize> {
        self.muscles.iter().position(|m| m.name == name)
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn wrap_surface_mut(&mut self, name: &str) -> Option<&mut WrapSurfaceSpec> {
        self.wrap_surfaces.iter_mut().find(|w| w.name == name)
    }

    /// Joint angles at the middle of every joint range.
    pub fn mid_range_posture(&self) -> Vec<f64> {
        self.joints.iter().map(JointSpec::mid_range).collect()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_structure(self)
    }
}

fn finite3(v: &[f64; 3]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn check_unique<'a>(
    report: &mut ValidationReport,
    kind: &str,
    names: impl Iterator<Item = &'a str>,
) {
    let mut seen = HashSet::new();
    for (i, name) in names.enumerate() {
        if !seen.insert(name) {
            report.push(
                format!("{kind}[{i}]"),
                format!("duplicate {kind} name '{name}' (names must be unique)"),
            );
        }
    }
}

/// Lists every violated structural invariant; empty iff the model is sound.
pub fn validate_structure(model: &ModelDoc) -> ValidationReport {
    let mut report = ValidationReport::default();
    if !finite3(&model.gravity) {
        report.push("gravity", "gravity must be finite");
    }

    check_unique(
        &mut report,
        "segments",
        model.segments.iter().map(|s| s.name.as_str()),
    );
    check_unique(
        &mut report,
        "joints",
        model.joints.iter().map(|j| j.name.as_str()),
    );
    check_unique(
        &mut report,
        "muscles",
        model.muscles.iter().map(|m| m.name.as_str()),
    );
    check_unique(
        &mut report,
        "markers",
        model.markers.iter().map(|m| m.name.as_str()),
    );
    check_unique(
        &mut report,
        "wrap_surfaces",
        model.wrap_surfaces.iter().map(|w| w.name.as_str()),
    );

    let segment_names: HashSet<&str> = model.segments.iter().map(|s| s.name.as_str()).collect();
    let surface_names: HashSet<&str> = model
        .wrap_surfaces
        .iter()
        .map(|w| w.name.as_str())
        .collect();

    for (i, s) in model.segments.iter().enumerate() {
        let path = format!("segments[{i}] ({})", s.name);
        if !(s.mass.is_finite() && s.mass >= 0.0) {
            report.push(
                &path,
                format!("mass must be finite and >= 0 (got {})", s.mass),
            );
        }
        if !s.inertia.iter().all(|x| x.is_finite() && *x >= 0.0) {
            report.push(&path, "inertia components must be finite and >= 0");
        }
        if !finite3(&s.com) || !finite3(&s.parent_offset) {
            report.push(&path, "com and parent_offset must be finite");
        }
    }
    if model.segments.is_empty() {
        report.push("segments", "model needs at least a ground segment");
    }

    let mut parent_of: HashMap<&str, &str> = HashMap::new();
    for (i, j) in model.joints.iter().enumerate() {
        let path = format!("joints[{i}] ({})", j.name);
        for (role, seg) in [("parent", &j.parent), ("child", &j.child)] {
            if !segment_names.contains(seg.as_str()) {
                report.push(&path, format!("{role} references unknown segment '{seg}'"));
            }
        }
        if j.parent == j.child {
            report.push(&path, "parent and child must be distinct segments");
        }
        if parent_of
            .insert(j.child.as_str(), j.parent.as_str())
            .is_some()
        {
            report.push(
                &path,
                format!("segment '{}' is the child of more than one joint", j.child),
            );
        }
        let norm = j.axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !finite3(&j.axis) || (norm - 1.0).abs() > 1e-9 {
            report.push(&path, format!("axis must have unit norm (|axis| = {norm})"));
        }
        if !(j.range[0].is_finite() && j.range[1].is_finite() && j.range[0] < j.range[1]) {
            report.push(
                &path,
                format!(
                    "range must be ordered with q_min < q_max (got [{}, {}])",
                    j.range[0], j.range[1]
                ),
            );
        }
        if !(j.damping.is_finite() && j.damping >= 0.0) {
            report.push(&path, format!("damping must be >= 0 (got {})", j.damping));
        }
    }

    // Tree check: exactly one root, every segment reaches it without cycles.
    let roots: Vec<&str> = model
        .segments
        .iter()
        .map(|s| s.name.as_str())
        .filter(|n| !parent_of.contains_key(n))
        .collect();
    if !model.segments.is_empty() && roots.len() != 1 {
        report.push(
            "joints",
            format!("joint graph must be a tree with one ground segment (found roots {roots:?})"),
        );
    }
    for s in &model.segments {
        let mut cur = s.name.as_str();
        let mut steps = 0;
        while let Some(&p) = parent_of.get(cur) {
            cur = p;
            steps += 1;
            if steps > model.segments.len() {
                report.push(
                    format!("segments ({})", s.name),
                    "joint graph contains a cycle",
                );
                break;
            }
        }
    }

    for (i, m) in model.muscles.iter().enumerate() {
        let path = format!("muscles[{i}] ({})", m.name);
        if m.path.len() < 2 {
            report.push(
                &path,
                format!("path needs at least 2 points (got {})", m.path.len()),
            );
        }
        for (k, p) in m.path.iter().enumerate() {
            if !segment_names.contains(p.segment.as_str()) {
                report.push(
                    format!("{path}.path[{k}]"),
                    format!("references unknown segment '{}'", p.segment),
                );
            }
            if !finite3(&p.local) {
                report.push(format!("{path}.path[{k}]"), "location must be finite");
            }
        }
        for (k, w) in m.wraps.iter().enumerate() {
            if !surface_names.contains(w.surface.as_str()) {
                report.push(
                    format!("{path}.wraps[{k}]"),
                    format!("references unknown wrap surface '{}'", w.surface),
                );
            }
            if !finite3(&w.side_site) {
                report.push(format!("{path}.wraps[{k}]"), "side site must be finite");
            }
        }
        for msg in m.params.violations() {
            report.push(format!("{path}.params"), msg);
        }
    }

    for (i, w) in model.wrap_surfaces.iter().enumerate() {
        let path = format!("wrap_surfaces[{i}] ({})", w.name);
        if !segment_names.contains(w.segment.as_str()) {
            report.push(&path, format!("references unknown segment '{}'", w.segment));
        }
        if !(w.radius.is_finite() && w.radius > 0.0) {
            report.push(&path, format!("radius must be > 0 (got {})", w.radius));
        }
        if w.kind == WrapKind::Cylinder && !(w.half_length.is_finite() && w.half_length > 0.0) {
            report.push(
                &path,
                format!("cylinder half-length must be > 0 (got {})", w.half_length),
            );
        }
        if !finite3(&w.location) || !finite3(&w.orientation) {
            report.push(&path, "location and orientation must be finite");
        }
    }

    for (i, m) in model.markers.iter().enumerate() {
        let path = format!("markers[{i}] ({})", m.name);
        if !segment_names.contains(m.segment.as_str()) {
            report.push(&path, format!("references unknown segment '{}'", m.segment));
        }
        if !finite3(&m.local) {
            report.push(&path, "location must be finite");
        }
    }

    report
}
