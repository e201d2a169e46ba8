use std::collections::HashMap;

use nalgebra::{Matrix3, Unit};

use super::{validate_structure, ModelDoc, ModelError, WrapKind};
use crate::geometry::{assign_wrap_segments, Pose};
use crate::muscle::MuscleParams;
use crate::spatial::{euler_xyz_matrix, vec3, Vec3};

#[derive(Debug, Clone)]
pub struct SegmentData {
    pub name: String,
    pub mass: f64,
    pub com: Vec3,
    pub inertia: Vec3,
    pub offset: Vec3,
    pub parent: Option<usize>,
    /// Joint whose child this segment is.
    pub joint: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct JointData {
    pub name: String,
    pub parent: usize,
    pub child: usize,
    pub axis: Unit<Vec3>,
    pub range: [f64; 2],
    pub damping: f64,
}

#[derive(Debug, Clone)]
pub struct CompiledSurface {
    pub name: String,
    pub kind: WrapKind,
    pub segment: usize,
    pub location: Vec3,
    /// Surface orientation relative to the owner segment.
    pub rotation: Matrix3<f64>,
    pub radius: f64,
    pub half_length: f64,
}

#[derive(Debug, Clone)]
pub struct CompiledWrap {
    pub surface: usize,
    pub side_site: Vec3,
    /// Index `k` of the straight path piece between points `k` and `k + 1`
    /// that this wrap acts on.
    pub piece: usize,
}

#[derive(Debug, Clone)]
pub struct CompiledMuscle {
    pub name: String,
    pub points: Vec<(usize, Vec3)>,
    pub wraps: Vec<CompiledWrap>,
    pub params: MuscleParams,
}

/// Index-resolved, immutable view of a structurally valid [`ModelDoc`].
#[derive(Debug, Clone)]
pub struct CompiledModel {
    doc: ModelDoc,
    pub segments: Vec<SegmentData>,
    /// Segment indices, parents before children.
    pub order: Vec<usize>,
    pub joints: Vec<JointData>,
    pub muscles: Vec<CompiledMuscle>,
    pub surfaces: Vec<CompiledSurface>,
    pub markers: Vec<(String, usize, Vec3)>,
    pub gravity: Vec3,
}

impl CompiledModel {
    pub fn new(doc: &ModelDoc) -> Result<Self, ModelError> {
        let report = validate_structure(doc);
        if !report.is_empty() {
            return Err(ModelError::InvariantViolation(report));
        }
        let seg_index: HashMap<&str, usize> = doc
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.as_str(), i))
            .collect();
        let surf_index: HashMap<&str, usize> = doc
            .wrap_surfaces
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.as_str(), i))
            .collect();

        let mut segments: Vec<SegmentData> = doc
            .segments
            .iter()
            .map(|s| SegmentData {
                name: s.name.clone(),
                mass: s.mass,
                com: vec3(&s.com),
                inertia: vec3(&s.inertia),
                offset: vec3(&s.parent_offset),
                parent: None,
                joint: None,
            })
            .collect();

        let joints: Vec<JointData> = doc
            .joints
            .iter()
            .enumerate()
            .map(|(ji, j)| {
                let parent = seg_index[j.parent.as_str()];
                let child = seg_index[j.child.as_str()];
                segments[child].parent = Some(parent);
                segments[child].joint = Some(ji);
                JointData {
                    name: j.name.clone(),
                    parent,
                    child,
                    axis: Unit::new_normalize(vec3(&j.axis)),
                    range: j.range,
                    damping: j.damping,
                }
            })
            .collect();

        let root = segments
            .iter()
            .position(|s| s.parent.is_none())
            .expect("validated tree has a root");
        let mut order = vec![root];
        let mut head = 0;
        while head < order.len() {
            let cur = order[head];
            head += 1;
            order.extend(joints.iter().filter(|j| j.parent == cur).map(|j| j.child));
        }

        let surfaces = doc
            .wrap_surfaces
            .iter()
            .map(|w| CompiledSurface {
                name: w.name.clone(),
                kind: w.kind,
                segment: seg_index[w.segment.as_str()],
                location: vec3(&w.location),
                rotation: euler_xyz_matrix(&w.orientation),
                radius: w.radius,
                half_length: w.half_length,
            })
            .collect();

        let muscles = doc
            .muscles
            .iter()
            .map(|m| CompiledMuscle {
                name: m.name.clone(),
                points: m
                    .path
                    .iter()
                    .map(|p| (seg_index[p.segment.as_str()], vec3(&p.local)))
                    .collect(),
                wraps: m
                    .wraps
                    .iter()
                    .map(|w| CompiledWrap {
                        surface: surf_index[w.surface.as_str()],
                        side_site: vec3(&w.side_site),
                        piece: 0,
                    })
                    .collect(),
                params: m.params.clone(),
            })
            .collect();

        let markers = doc
            .markers
            .iter()
            .map(|m| {
                (
                    m.name.clone(),
                    seg_index[m.segment.as_str()],
                    vec3(&m.local),
                )
            })
            .collect();

        let mut model = CompiledModel {
            doc: doc.clone(),
            segments,
            order,
            joints,
            muscles,
            surfaces,
            markers,
            gravity: vec3(&doc.gravity),
        };

        // Each wrap acts on the path piece passing closest to it at mid-range.
        let pose = Pose::new(&model, &doc.mid_range_posture());
        let pieces: Vec<Vec<usize>> = model
            .muscles
            .iter()
            .map(|m| assign_wrap_segments(&model, &pose, m))
            .collect();
        for (m, p) in model.muscles.iter_mut().zip(pieces) {
            for (w, piece) in m.wraps.iter_mut().zip(p) {
                w.piece = piece;
            }
        }
        Ok(model)
    }

    pub fn doc(&self) -> &ModelDoc {
        &self.doc
    }

    pub fn n_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn n_muscles(&self) -> usize {
        self.muscles.len()
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn muscle_index(&self, name: &str) -> Option<usize> {
        self.muscles.iter().position(|m| m.name == name)
    }

    pub fn segment_index(&self, name: &str) -> Option<usize> {
        self.segments.iter().position(|s| s.name == name)
    }

    /// Adds point masses at segment centres of mass (inertia about the centre
    /// is unchanged).
    pub fn add_point_masses(&mut self, masses: &[(String, f64)]) -> Result<(), ModelError> {
        for (name, kg) in masses {
            let i = self
                .segment_index(name)
                .ok_or_else(|| ModelError::DanglingReference {
                    element: "added mass".into(),
                    segment: name.clone(),
                })?;
            self.segments[i].mass += kg;
        }
        Ok(())
    }
}
