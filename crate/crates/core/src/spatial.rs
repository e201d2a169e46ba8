//! Small rotation helpers shared by the geometry, import and dynamics code.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};

pub type Vec3 = Vector3<f64>;

pub fn vec3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

pub fn arr3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Body-fixed XYZ Euler angles: `R = Rx(a) * Ry(b) * Rz(c)`.
pub fn euler_xyz_matrix(angles: &[f64; 3]) -> Matrix3<f64> {
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), angles[0]);
    let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), angles[1]);
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), angles[2]);
    (rx * ry * rz).into_inner()
}

/// Inverse of [`euler_xyz_matrix`] (for `|b| < pi/2`).
pub fn matrix_to_euler_xyz(m: &Matrix3<f64>) -> [f64; 3] {
    // R[0,2] = sin b; R[1,2] = -sin a cos b; R[2,2] = cos a cos b;
    // R[0,1] = -cos b sin c; R[0,0] = cos b cos c.
    let b = m[(0, 2)].clamp(-1.0, 1.0).asin();
    let a = (-m[(1, 2)]).atan2(m[(2, 2)]);
    let c = (-m[(0, 1)]).atan2(m[(0, 0)]);
    [a, b, c]
}

/// Rotation by `angle` about a unit `axis`.
pub fn axis_angle(axis: &Unit<Vec3>, angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(axis, angle).into_inner()
}
