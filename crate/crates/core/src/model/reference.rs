//! Importer for a subset of the OpenSim 3 model XML.
//!
//! Supported: `BodySet` bodies (mass, centre of mass, principal inertia) with
//! nested `PinJoint` or single-rotation `CustomJoint`, `WrapCylinder` and
//! `WrapSphere` objects (`WrapEllipsoid`/`WrapTorus` are approximated),
//! `MarkerSet` markers, and muscles in `ForceSet` with their path points,
//! path wraps and scalar properties. Anything else is skipped with a warning.
//!
//! Angles are radians unless the model declares
//! `<angle_units>degrees</angle_units>`.

use std::collections::HashMap;

use roxmltree::{Document, Node};

use super::{
    validate_structure, BodySegment, JointSpec, MarkerSpec, ModelDoc, ModelError, MuscleSpec,
    PathPoint, WrapAssignment, WrapKind, WrapSurfaceSpec, DEFAULT_JOINT_DAMPING,
};
use crate::muscle::{MuscleParams, DEFAULT_V_MAX};
use crate::spatial::{arr3, euler_xyz_matrix, vec3};

/// Result of an import: the model plus one line per skipped or approximated
/// element.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReference {
    pub model: ModelDoc,
    pub warnings: Vec<String>,
}

/// Default wrap cylinder half-length when the file gives no `length`, m.
const DEFAULT_HALF_LENGTH: f64 = 0.05;

const SILENT_BODY_CHILDREN: &[&str] = &[
    "VisibleObject",
    "attached_geometry",
    "FrameGeometry",
    "WrapObjectSet",
    "Joint",
];
const MODEL_CHILDREN: &[&str] = &[
    "gravity",
    "angle_units",
    "BodySet",
    "ForceSet",
    "MarkerSet",
    "credits",
    "publications",
    "length_units",
    "force_units",
    "defaults",
];

struct Ctx {
    degrees: bool,
    warnings: Vec<String>,
}

impl Ctx {
    fn angle(&self, v: f64) -> f64 {
        if self.degrees {
            v.to_radians()
        } else {
            v
        }
    }

    fn angles3(&self, v: [f64; 3]) -> [f64; 3] {
        v.map(|a| self.angle(a))
    }

    fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }
}

fn child<'a, 'i>(node: Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(tag))
}

fn elements<'a, 'i>(node: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(|c| c.is_element())
}

/// Children of `<Set><objects>...</objects></Set>`.
fn set_objects<'a, 'i>(node: Node<'a, 'i>, set: &str) -> Vec<Node<'a, 'i>> {
    child(node, set)
        .and_then(|s| child(s, "objects"))
        .map(|o| elements(o).collect())
        .unwrap_or_default()
}

fn text<'a>(node: Node<'a, '_>) -> &'a str {
    node.text().unwrap_or("").trim()
}

fn name_of(node: Node) -> String {
    node.attribute("name").unwrap_or("").to_string()
}

fn numbers(node: Node, tag: &str) -> Result<Vec<f64>, ModelError> {
    text(node)
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ModelError::Parse(format!("<{tag}>: '{t}' is not a finite number")))
        })
        .collect()
}

fn opt_scalar(node: Node, tag: &str) -> Result<Option<f64>, ModelError> {
    match child(node, tag) {
        None => Ok(None),
        Some(c) => match numbers(c, tag)?.as_slice() {
            [v] => Ok(Some(*v)),
            _ => Err(ModelError::Parse(format!("<{tag}> must hold one number"))),
        },
    }
}

fn scalar(node: Node, tag: &str, owner: &str) -> Result<f64, ModelError> {
    opt_scalar(node, tag)?.ok_or_else(|| ModelError::MissingRequired {
        element: owner.to_string(),
        what: format!("<{tag}>"),
    })
}

fn opt_vec3(node: Node, tag: &str) -> Result<Option<[f64; 3]>, ModelError> {
    match child(node, tag) {
        None => Ok(None),
        Some(c) => match numbers(c, tag)?.as_slice() {
            [x, y, z] => Ok(Some([*x, *y, *z])),
            _ => Err(ModelError::Parse(format!(
                "<{tag}> must hold three numbers"
            ))),
        },
    }
}

fn vec3_or_zero(node: Node, tag: &str) -> Result<[f64; 3], ModelError> {
    Ok(opt_vec3(node, tag)?.unwrap_or([0.0; 3]))
}

/// Strips OpenSim 4 style socket paths such as `/bodyset/forearm`.
fn body_ref(node: Node) -> Option<String> {
    let raw = child(node, "body")
        .or_else(|| child(node, "socket_parent_frame"))
        .map(text)?;
    Some(raw.rsplit('/').next().unwrap_or(raw).to_string())
}

struct PendingWrap {
    spec: WrapSurfaceSpec,
    /// Side site in the owner segment frame.
    side_site: [f64; 3],
}

/// Parses reference XML text into a model document.
pub fn parse_reference_model(xml_text: &str) -> Result<ParsedReference, ModelError> {
    let doc = Document::parse(xml_text).map_err(|e| ModelError::MalformedXml(e.to_string()))?;
    let root = doc.root_element();
    let model_node = if root.has_tag_name("Model") {
        Some(root)
    } else {
        child(root, "Model")
    };
    let model_node = model_node.ok_or_else(|| ModelError::MissingRequired {
        element: "document".into(),
        what: "<Model> element".into(),
    })?;

    let degrees = child(model_node, "angle_units")
        .map(|n| text(n).eq_ignore_ascii_case("degrees"))
        .unwrap_or(false);
    let mut ctx = Ctx {
        degrees,
        warnings: Vec::new(),
    };

    for c in elements(model_node) {
        if !MODEL_CHILDREN.contains(&c.tag_name().name()) {
            ctx.warn(format!("ignored element <{}>", c.tag_name().name()));
        }
    }

    let gravity = opt_vec3(model_node, "gravity")?.unwrap_or([0.0, -9.80665, 0.0]);

    let mut segments = Vec::new();
    let mut joints = Vec::new();
    let mut wraps: Vec<PendingWrap> = Vec::new();
    let bodies = set_objects(model_node, "BodySet");
    let body_names: Vec<String> = bodies.iter().map(|b| name_of(*b)).collect();

    for body in &bodies {
        if !body.has_tag_name("Body") {
            ctx.warn(format!("ignored <{}> in BodySet", body.tag_name().name()));
            continue;
        }
        let name = name_of(*body);
        for c in elements(*body) {
            let tag = c.tag_name().name();
            let known = [
                "mass",
                "mass_center",
                "inertia",
                "inertia_xx",
                "inertia_yy",
                "inertia_zz",
                "inertia_xy",
                "inertia_xz",
                "inertia_yz",
            ];
            if !known.contains(&tag) && !SILENT_BODY_CHILDREN.contains(&tag) {
                ctx.warn(format!("body '{name}': ignored element <{tag}>"));
            }
        }
        let mass = opt_scalar(*body, "mass")?.unwrap_or(0.0);
        let com = vec3_or_zero(*body, "mass_center")?;
        let inertia = body_inertia(*body, &name, &mut ctx)?;

        let mut parent_offset = [0.0; 3];
        let joint_node = child(*body, "Joint").and_then(|j| elements(j).next());
        if let Some(jn) = joint_node {
            let (spec, offset) = parse_joint(jn, &name, &body_names, &mut ctx)?;
            parent_offset = offset;
            joints.push(spec);
        }
        segments.push(BodySegment {
            name: name.clone(),
            mass,
            com,
            inertia,
            parent_offset,
        });

        for w in set_objects(*body, "WrapObjectSet") {
            if let Some(p) = parse_wrap(w, &name, &mut ctx)? {
                wraps.push(p);
            }
        }
    }

    let side_sites: HashMap<String, [f64; 3]> = wraps
        .iter()
        .map(|w| (w.spec.name.clone(), w.side_site))
        .collect();
    let wrap_surfaces: Vec<WrapSurfaceSpec> = wraps.into_iter().map(|w| w.spec).collect();

    let mut muscles = Vec::new();
    for force in set_objects(model_node, "ForceSet") {
        let tag = force.tag_name().name();
        if !tag.contains("Muscle") {
            ctx.warn(format!("ignored force <{tag}> '{}'", name_of(force)));
            continue;
        }
        muscles.push(parse_muscle(force, &body_names, &side_sites, &mut ctx)?);
    }

    let mut markers = Vec::new();
    for m in set_objects(model_node, "MarkerSet") {
        let name = name_of(m);
        let segment = body_ref(m).ok_or_else(|| ModelError::MissingRequired {
            element: format!("marker '{name}'"),
            what: "<body>".into(),
        })?;
        if !body_names.contains(&segment) {
            return Err(ModelError::DanglingReference {
                element: format!("marker '{name}'"),
                segment,
            });
        }
        markers.push(MarkerSpec {
            name,
            segment,
            local: vec3_or_zero(m, "location")?,
        });
    }

    let model = ModelDoc {
        name: model_node.attribute("name").unwrap_or("model").to_string(),
        gravity,
        segments,
        joints,
        muscles,
        markers,
        wrap_surfaces,
    };
    let report = validate_structure(&model);
    if !report.is_empty() {
        return Err(ModelError::InvariantViolation(report));
    }
    Ok(ParsedReference {
        model,
        warnings: ctx.warnings,
    })
}

fn body_inertia(body: Node, name: &str, ctx: &mut Ctx) -> Result<[f64; 3], ModelError> {
    if let Some(n) = child(body, "inertia") {
        let v = numbers(n, "inertia")?;
        if v.len() != 3 && v.len() != 6 {
            return Err(ModelError::Parse(format!(
                "body '{name}': <inertia> needs 3 or 6 numbers"
            )));
        }
        if v.len() == 6 && v[3..].iter().any(|p| *p != 0.0) {
            ctx.warn(format!("body '{name}': products of inertia ignored"));
        }
        return Ok([v[0], v[1], v[2]]);
    }
    let diag = [
        opt_scalar(body, "inertia_xx")?.unwrap_or(0.0),
        opt_scalar(body, "inertia_yy")?.unwrap_or(0.0),
        opt_scalar(body, "inertia_zz")?.unwrap_or(0.0),
    ];
    for tag in ["inertia_xy", "inertia_xz", "inertia_yz"] {
        if opt_scalar(body, tag)?.is_some_and(|v| v != 0.0) {
            ctx.warn(format!("body '{name}': products of inertia ignored"));
            break;
        }
    }
    Ok(diag)
}

/// Reduces a pin or custom joint to a hinge. Returns the spec and the child
/// origin in the parent frame.
fn parse_joint(
    jn: Node,
    child_body: &str,
    bodies: &[String],
    ctx: &mut Ctx,
) -> Result<(JointSpec, [f64; 3]), ModelError> {
    let name = name_of(jn);
    let element = format!("joint '{name}'");
    let parent = body_ref(jn)
        .or_else(|| child(jn, "parent_body").map(|n| text(n).to_string()))
        .ok_or_else(|| ModelError::MissingRequired {
            element: element.clone(),
            what: "<parent_body>".into(),
        })?;
    if !bodies.contains(&parent) {
        return Err(ModelError::DanglingReference {
            element,
            segment: parent,
        });
    }
    let location = vec3_or_zero(jn, "location_in_parent")?;
    let orient = ctx.angles3(vec3_or_zero(jn, "orientation_in_parent")?);
    let child_loc = vec3_or_zero(jn, "location")?;
    let child_orient = ctx.angles3(vec3_or_zero(jn, "orientation")?);
    if child_loc != [0.0; 3] || child_orient != orient {
        ctx.warn(format!("{element}: child-side joint frame offset ignored"));
    }

    // Hinge axis in the joint frame.
    let local_axis = match jn.tag_name().name() {
        "PinJoint" => [0.0, 0.0, 1.0],
        "CustomJoint" => custom_joint_axis(jn, &element, ctx)?,
        other => {
            ctx.warn(format!("{element}: <{other}> treated as a pin joint"));
            [0.0, 0.0, 1.0]
        }
    };
    let axis = (euler_xyz_matrix(&orient) * vec3(&local_axis)).normalize();

    let coords: Vec<Node> = child(jn, "CoordinateSet")
        .and_then(|s| child(s, "objects"))
        .map(|o| elements(o).collect())
        .unwrap_or_default();
    let coord = coords.first().ok_or_else(|| ModelError::MissingRequired {
        element: element.clone(),
        what: "<Coordinate>".into(),
    })?;
    if coords.len() > 1 {
        ctx.warn(format!("{element}: only the first coordinate is kept"));
    }
    let range = match child(*coord, "range") {
        Some(r) => match numbers(r, "range")?.as_slice() {
            [lo, hi] => [ctx.angle(*lo), ctx.angle(*hi)],
            _ => {
                return Err(ModelError::Parse(format!(
                    "{element}: <range> must hold two numbers"
                )))
            }
        },
        None => {
            return Err(ModelError::MissingRequired {
                element,
                what: "<range>".into(),
            })
        }
    };
    let damping = opt_scalar(*coord, "damping")?.unwrap_or(DEFAULT_JOINT_DAMPING);
    let joint_name = if name.is_empty() {
        name_of(*coord)
    } else {
        name
    };
    Ok((
        JointSpec {
            name: joint_name,
            parent,
            child: child_body.to_string(),
            axis: arr3(&axis),
            range,
            damping,
        },
        location,
    ))
}

fn custom_joint_axis(jn: Node, element: &str, ctx: &mut Ctx) -> Result<[f64; 3], ModelError> {
    let transform = child(jn, "SpatialTransform").ok_or_else(|| ModelError::MissingRequired {
        element: element.to_string(),
        what: "<SpatialTransform>".into(),
    })?;
    let mut driven = Vec::new();
    for ta in transform
        .children()
        .filter(|c| c.has_tag_name("TransformAxis"))
    {
        let has_coord = child(ta, "coordinates")
            .map(|c| !text(c).is_empty())
            .unwrap_or(false);
        if has_coord {
            let axis = opt_vec3(ta, "axis")?.ok_or_else(|| ModelError::MissingRequired {
                element: element.to_string(),
                what: "<axis>".into(),
            })?;
            driven.push((name_of(ta), axis));
        }
    }
    let rotations: Vec<_> = driven
        .iter()
        .filter(|(n, _)| n.starts_with("rotation"))
        .collect();
    let first = rotations
        .first()
        .ok_or_else(|| ModelError::MissingRequired {
            element: element.to_string(),
            what: "a coordinate-driven rotation axis".into(),
        })?;
    if driven.len() > 1 {
        ctx.warn(format!(
            "{element}: reduced to a single hinge about its first rotation"
        ));
    }
    Ok(first.1)
}

/// Unit direction for an OpenSim wrap `quadrant`, or `None` for "all".
fn quadrant_direction(q: &str) -> Option<[f64; 3]> {
    let q = q.trim().to_ascii_lowercase();
    let (sign, axis) = match q.strip_prefix('-') {
        Some(rest) => (-1.0, rest.to_string()),
        None => (1.0, q.trim_start_matches('+').to_string()),
    };
    let mut d = [0.0; 3];
    match axis.as_str() {
        "x" => d[0] = sign,
        "y" => d[1] = sign,
        "z" => d[2] = sign,
        _ => return None,
    }
    Some(d)
}

fn parse_wrap(w: Node, segment: &str, ctx: &mut Ctx) -> Result<Option<PendingWrap>, ModelError> {
    let name = name_of(w);
    let element = format!("wrap object '{name}'");
    let tag = w.tag_name().name();
    let (kind, radius, half_length) = match tag {
        "WrapCylinder" => {
            let r = scalar(w, "radius", &element)?;
            let hl = opt_scalar(w, "length")?
                .map(|l| 0.5 * l)
                .unwrap_or(DEFAULT_HALF_LENGTH);
            (WrapKind::Cylinder, r, hl)
        }
        "WrapSphere" => (WrapKind::Sphere, scalar(w, "radius", &element)?, 0.0),
        "WrapEllipsoid" => {
            let dims = opt_vec3(w, "dimensions")?.ok_or_else(|| ModelError::MissingRequired {
                element: element.clone(),
                what: "<dimensions>".into(),
            })?;
            let r = (dims[0] + dims[1] + dims[2]) / 3.0;
            ctx.warn(format!(
                "{element}: ellipsoid approximated by a sphere of radius {r}"
            ));
            (WrapKind::Sphere, r, 0.0)
        }
        "WrapTorus" => {
            let inner = scalar(w, "inner_radius", &element)?;
            let outer = scalar(w, "outer_radius", &element)?;
            let r = 0.5 * (outer - inner);
            ctx.warn(format!(
                "{element}: torus approximated by a cylinder of radius {r}"
            ));
            (WrapKind::Cylinder, r, r.max(DEFAULT_HALF_LENGTH))
        }
        other => {
            ctx.warn(format!("ignored wrap object <{other}> '{name}'"));
            return Ok(None);
        }
    };
    let orientation = ctx.angles3(vec3_or_zero(w, "xyz_body_rotation")?);
    let location = vec3_or_zero(w, "translation")?;
    // The side site sits two radii out along the quadrant direction; "all"
    // leaves it at the centre, which means no side preference.
    let quadrant = child(w, "quadrant").map(text).unwrap_or("all");
    let side_site = match quadrant_direction(quadrant) {
        Some(d) => {
            let offset = euler_xyz_matrix(&orientation) * vec3(&d) * (2.0 * radius);
            arr3(&(vec3(&location) + offset))
        }
        None => location,
    };
    Ok(Some(PendingWrap {
        spec: WrapSurfaceSpec {
            name,
            kind,
            segment: segment.to_string(),
            location,
            orientation,
            radius,
            half_length,
        },
        side_site,
    }))
}

fn parse_muscle(
    m: Node,
    bodies: &[String],
    side_sites: &HashMap<String, [f64; 3]>,
    ctx: &mut Ctx,
) -> Result<MuscleSpec, ModelError> {
    let name = name_of(m);
    let element = format!("muscle '{name}'");
    let missing_path = || ModelError::MissingRequired {
        element: element.clone(),
        what: "path points".into(),
    };
    let gp = child(m, "GeometryPath").ok_or_else(missing_path)?;

    let mut path = Vec::new();
    for p in set_objects(gp, "PathPointSet") {
        let tag = p.tag_name().name();
        match tag {
            "PathPoint" => {}
            "ConditionalPathPoint" | "MovingPathPoint" => ctx.warn(format!(
                "{element}: <{tag}> '{}' treated as a fixed point",
                name_of(p)
            )),
            other => {
                ctx.warn(format!("{element}: ignored <{other}>"));
                continue;
            }
        }
        let segment = body_ref(p).ok_or_else(|| ModelError::MissingRequired {
            element: format!("{element} point '{}'", name_of(p)),
            what: "<body>".into(),
        })?;
        if !bodies.contains(&segment) {
            return Err(ModelError::DanglingReference {
                element: element.clone(),
                segment,
            });
        }
        path.push(PathPoint {
            segment,
            local: vec3_or_zero(p, "location")?,
        });
    }
    if path.len() < 2 {
        return Err(missing_path());
    }

    let mut wraps = Vec::new();
    for pw in set_objects(gp, "PathWrapSet") {
        let surface = child(pw, "wrap_object")
            .map(|n| text(n).to_string())
            .unwrap_or_default();
        match side_sites.get(&surface) {
            Some(site) => wraps.push(WrapAssignment {
                surface,
                side_site: *site,
            }),
            None => {
                return Err(ModelError::MissingRequired {
                    element: element.clone(),
                    what: format!("wrap object '{surface}'"),
                })
            }
        }
    }

    let f_max = scalar(m, "max_isometric_force", &element)?;
    let ofl = scalar(m, "optimal_fiber_length", &element)?;
    let tsl = opt_scalar(m, "tendon_slack_length")?.unwrap_or(0.0);
    let l0 = ofl + tsl;
    let mut params = MuscleParams::new(f_max, l0);
    // Reference velocities are in optimal fibre lengths per second.
    params.v_max = opt_scalar(m, "max_contraction_velocity")?.unwrap_or(DEFAULT_V_MAX) * ofl / l0;
    if let Some(p) = opt_scalar(m, "pennation_angle_at_optimal")? {
        params.pennation = ctx.angle(p);
    }
    if let Some(t) = opt_scalar(m, "activation_time_constant")? {
        params.tau_act = t;
    }
    if let Some(t) = opt_scalar(m, "deactivation_time_constant")? {
        params.tau_deact = t;
    }
    Ok(MuscleSpec {
        name,
        path,
        wraps,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"<?xml version="1.0"?>
<OpenSimDocument Version="30000">
  <Model name="mini">
    <gravity>0 0 -9.81</gravity>
    <BodySet><objects>
      <Body name="ground"><mass>0</mass></Body>
      <Body name="arm">
        <mass>1</mass>
        <mass_center>0 0 -0.2</mass_center>
        <inertia_xx>0.01</inertia_xx><inertia_yy>0.01</inertia_yy><inertia_zz>0.001</inertia_zz>
        <Joint>
          <PinJoint name="hinge">
            <parent_body>ground</parent_body>
            <location_in_parent>0 0 -0.3</location_in_parent>
            <orientation_in_parent>1.5707963267948966 0 0</orientation_in_parent>
            <orientation>1.5707963267948966 0 0</orientation>
            <CoordinateSet><objects>
              <Coordinate name="hinge_q"><range>0 2.5</range></Coordinate>
            </objects></CoordinateSet>
          </PinJoint>
        </Joint>
      </Body>
    </objects></BodySet>
    <ForceSet><objects>
      <Thelen2003Muscle name="flexor">
        <GeometryPath><PathPointSet><objects>
          <PathPoint name="o"><body>ground</body><location>0.02 0 -0.1</location></PathPoint>
          <PathPoint name="i"><body>arm</body><location>0.02 0 -0.05</location></PathPoint>
        </objects></PathPointSet></GeometryPath>
        <max_isometric_force>200</max_isometric_force>
        <optimal_fiber_length>0.15</optimal_fiber_length>
        <tendon_slack_length>0.1</tendon_slack_length>
      </Thelen2003Muscle>
    </objects></ForceSet>
    <Ligament name="ignored"/>
  </Model>
</OpenSimDocument>"#;

    #[test]
    fn minimal_document() {
        let parsed = parse_reference_model(MINIMAL).unwrap();
        let m = &parsed.model;
        assert_eq!(
            (m.segments.len(), m.joints.len(), m.muscles.len()),
            (2, 1, 1)
        );
        assert_eq!(m.joints[0].name, "hinge");
        let a = m.joints[0].axis;
        assert!(a[0].abs() < 1e-12 && (a[1] + 1.0).abs() < 1e-12 && a[2].abs() < 1e-12);
        assert!((m.muscles[0].params.l0 - 0.25).abs() < 1e-15);
        assert_eq!(m.segments[1].parent_offset, [0.0, 0.0, -0.3]);
        assert!(parsed.warnings.iter().any(|w| w.contains("Ligament")));
    }

    #[test]
    fn dangling_path_segment() {
        let bad = MINIMAL.replace("<body>arm</body>", "<body>armX</body>");
        match parse_reference_model(&bad) {
            Err(ModelError::DanglingReference { element, segment }) => {
                assert!(element.contains("flexor"));
                assert_eq!(segment, "armX");
            }
            other => panic!("expected dangling reference, got {other:?}"),
        }
    }

    #[test]
    fn muscle_without_path() {
        let start = MINIMAL.find("<GeometryPath>").unwrap();
        let end = MINIMAL.find("</GeometryPath>").unwrap() + "</GeometryPath>".len();
        let bad = format!("{}{}", &MINIMAL[..start], &MINIMAL[end..]);
        assert!(matches!(
            parse_reference_model(&bad),
            Err(ModelError::MissingRequired { .. })
        ));
    }

    #[test]
    fn malformed_xml() {
        assert!(matches!(
            parse_reference_model("<Model><BodySet>"),
            Err(ModelError::MalformedXml(_))
        ));
        assert!(matches!(
            parse_reference_model(""),
            Err(ModelError::MalformedXml(_))
        ));
    }

    #[test]
    fn degrees_are_converted() {
        let deg = MINIMAL
            .replace("<gravity>", "<angle_units>degrees</angle_units><gravity>")
            .replace("1.5707963267948966 0 0", "90 0 0")
            .replace("<range>0 2.5</range>", "<range>0 135</range>");
        let m = parse_reference_model(&deg).unwrap().model;
        assert!((m.joints[0].range[1] - 135f64.to_radians()).abs() < 1e-15);
        assert!((m.joints[0].axis[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadrant_side_sites() {
        assert_eq!(quadrant_direction("-x"), Some([-1.0, 0.0, 0.0]));
        assert_eq!(quadrant_direction("+y"), Some([0.0, 1.0, 0.0]));
        assert_eq!(quadrant_direction("all"), None);
    }
}
