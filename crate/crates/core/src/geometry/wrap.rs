//! Shortest paths around sphere and cylinder wrap surfaces.
//!
//! All inputs are in the surface frame: centre at the origin, cylinder axis
//! along z. A straight piece that clears the surface stays straight. A piece
//! that penetrates it (or passes on the side opposite the side site) is
//! replaced by tangent line, arc, tangent line on the side-site side.

use std::f64::consts::TAU;

use nalgebra::Vector2;

use crate::spatial::Vec3;

type Vec2 = Vector2<f64>;

/// A path endpoint lies strictly inside the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InsideSurface;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrapOutcome {
    pub length: f64,
    pub wrapped: bool,
}

const INSIDE_TOL: f64 = 1e-12;

/// Length of the detour around a circle of radius `r` at the origin, or
/// `None` when the straight segment is kept.
pub(crate) fn circle_detour(a: Vec2, b: Vec2, r: f64, side: Option<Vec2>) -> Option<f64> {
    let d = b - a;
    let dd = d.norm_squared();
    if dd == 0.0 {
        return None;
    }
    let t = (-a.dot(&d) / dd).clamp(0.0, 1.0);
    let closest = a + d * t;
    let penetrates = closest.norm() < r;
    let side = side.filter(|s| s.norm() > 1e-12);
    match side {
        None if !penetrates => return None,
        Some(s) if !penetrates && closest.dot(&s) >= 0.0 => return None,
        _ => {}
    }

    let (na, nb) = (a.norm(), b.norm());
    let tan_a = (na * na - r * r).max(0.0).sqrt();
    let tan_b = (nb * nb - r * r).max(0.0).sqrt();
    let ang_a = a.y.atan2(a.x);
    let ang_b = b.y.atan2(b.x);
    let half_a = (r / na).min(1.0).acos();
    let half_b = (r / nb).min(1.0).acos();

    // Counter-clockwise pass: leave a at ang_a + half_a, arrive at ang_b - half_b.
    let ccw_start = ang_a + half_a;
    let ccw_end = ang_b - half_b;
    let ccw_sweep = (ccw_end - ccw_start).rem_euclid(TAU);
    // Clockwise pass.
    let cw_start = ang_a - half_a;
    let cw_end = ang_b + half_b;
    let cw_sweep = (cw_start - cw_end).rem_euclid(TAU);

    let use_ccw = match side {
        None => ccw_sweep <= cw_sweep,
        Some(s) => {
            let unit = |ang: f64| Vec2::new(ang.cos(), ang.sin());
            let ccw_mid = unit(ccw_start) + unit(ccw_end);
            let cw_mid = unit(cw_start) + unit(cw_end);
            let score = |m: Vec2| {
                if m.norm() > 1e-12 {
                    m.normalize().dot(&s)
                } else {
                    -1.0
                }
            };
            score(ccw_mid) >= score(cw_mid)
        }
    };
    let mut sweep = if use_ccw { ccw_sweep } else { cw_sweep };
    // A sweep a rounding error short of a full turn is a zero-length arc.
    if sweep > TAU - 1e-9 {
        sweep = 0.0;
    }
    Some(tan_a + tan_b + r * sweep)
}

/// Path from `p1` to `p2` around an infinite cylinder of radius `r` about z.
/// The wrapped length is the exact helical unrolling
/// `sqrt(planar_length² + dz²)`.
pub fn cylinder_path(
    p1: Vec3,
    p2: Vec3,
    r: f64,
    side: Option<Vec3>,
) -> Result<WrapOutcome, InsideSurface> {
    let a = Vec2::new(p1.x, p1.y);
    let b = Vec2::new(p2.x, p2.y);
    let limit = r * (1.0 - INSIDE_TOL);
    if a.norm() < limit || b.norm() < limit {
        return Err(InsideSurface);
    }
    let side2 = side.map(|s| Vec2::new(s.x, s.y));
    match circle_detour(a, b, r, side2) {
        None => Ok(WrapOutcome {
            length: (p2 - p1).norm(),
            wrapped: false,
        }),
        Some(planar) => {
            let dz = p2.z - p1.z;
            Ok(WrapOutcome {
                length: (planar * planar + dz * dz).sqrt(),
                wrapped: true,
            })
        }
    }
}

/// Path from `p1` to `p2` around a sphere of radius `r` at the origin. The
/// geodesic lies in the plane through the centre and both endpoints.
pub fn sphere_path(
    p1: Vec3,
    p2: Vec3,
    r: f64,
    side: Option<Vec3>,
) -> Result<WrapOutcome, InsideSurface> {
    let limit = r * (1.0 - INSIDE_TOL);
    if p1.norm() < limit || p2.norm() < limit {
        return Err(InsideSurface);
    }
    let straight = WrapOutcome {
        length: (p2 - p1).norm(),
        wrapped: false,
    };
    let e1 = p1.normalize();
    let mut normal = p1.cross(&p2);
    if normal.norm() < 1e-12 * p1.norm() * p2.norm() {
        // Endpoints collinear with the centre: take the plane holding the side site.
        normal = side.map(|s| p1.cross(&s)).unwrap_or_else(Vec3::zeros);
        if normal.norm() < 1e-12 {
            let helper = if e1.x.abs() < 0.9 {
                Vec3::x()
            } else {
                Vec3::y()
            };
            normal = e1.cross(&helper);
        }
    }
    let e2 = normal.normalize().cross(&e1);
    let a = Vec2::new(p1.dot(&e1), p1.dot(&e2));
    let b = Vec2::new(p2.dot(&e1), p2.dot(&e2));
    let side2 = side.map(|s| Vec2::new(s.dot(&e1), s.dot(&e2)));
    match circle_detour(a, b, r, side2) {
        None => Ok(straight),
        Some(len) => Ok(WrapOutcome {
            length: len,
            wrapped: true,
        }),
    }
}
