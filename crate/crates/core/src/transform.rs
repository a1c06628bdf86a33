//! Rigid transforms as unit quaternion + translation, plus the XYZ Euler
//! parameterization used for 6-vector poses.

use nalgebra::{Matrix3, Point3, Quaternion, Rotation3, UnitQuaternion, Vector3};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Pitch magnitude at which Euler extraction clamps to avoid gimbal lock.
pub const EULER_PITCH_LIMIT: f64 = std::f64::consts::FRAC_PI_2 - 1e-6;

/// Intrinsic XYZ composition: R = Rx(a) * Ry(b) * Rz(c).
pub fn rotation_from_euler_xyz(e: &[f64; 3]) -> UnitQuaternion<f64> {
    let rx = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), e[0]);
    let ry = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), e[1]);
    let rz = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), e[2]);
    rx * ry * rz
}

/// Inverse of `rotation_from_euler_xyz`. Pitch comes from asin(R02) and is
/// clamped to EULER_PITCH_LIMIT, which keeps the extraction deterministic at
/// gimbal lock at the cost of exactness there.
pub fn euler_xyz_from_rotation(r: &UnitQuaternion<f64>) -> [f64; 3] {
    let m = r.to_rotation_matrix();
    let b = m[(0, 2)].clamp(-1.0, 1.0).asin();
    let b = b.clamp(-EULER_PITCH_LIMIT, EULER_PITCH_LIMIT);
    let a = (-m[(1, 2)]).atan2(m[(2, 2)]);
    let c = (-m[(0, 1)]).atan2(m[(0, 0)]);
    [a, b, c]
}

/// Maps XYZ Euler angle rates to world angular velocity: w = E(e) * de/dt.
/// Columns are the world-frame axes each Euler rate rotates about.
pub fn euler_xyz_rate_matrix(e: &[f64; 3]) -> Matrix3<f64> {
    let (sa, ca) = e[0].sin_cos();
    let (sb, cb) = e[1].sin_cos();
    Matrix3::new(
        1.0, 0.0, sb, //
        0.0, ca, -sa * cb, //
        0.0, sa, ca * cb,
    )
}

/// A rigid transform: rotation followed by translation.
///
/// Composition follows the usual convention: `(a * b).apply(p) = a.apply(b.apply(p))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::identity(), t)
    }

    pub fn from_rotation(r: UnitQuaternion<f64>) -> Self {
        Self::new(r, Vector3::zeros())
    }

    /// Rotation about `axis` (normalized internally) by `angle` radians.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(axis);
        Self::from_rotation(UnitQuaternion::from_axis_angle(&axis, angle))
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let inv_rot = self.rotation.inverse();
        Self {
            rotation: inv_rot,
            translation: -(inv_rot * self.translation),
        }
    }

    pub fn rotation_matrix(&self) -> Rotation3<f64> {
        self.rotation.to_rotation_matrix()
    }

    /// Quaternion norm drift from 1; kept below 1e-9 by construction.
    pub fn quaternion_drift(&self) -> f64 {
        (self.rotation.as_ref().norm() - 1.0).abs()
    }

    /// Pose as position plus intrinsic XYZ Euler angles.
    pub fn to_vec6(&self) -> [f64; 6] {
        let e = euler_xyz_from_rotation(&self.rotation);
        [
            self.translation.x,
            self.translation.y,
            self.translation.z,
            e[0],
            e[1],
            e[2],
        ]
    }

    pub fn from_vec6(v: &[f64; 6]) -> Self {
        Self {
            rotation: rotation_from_euler_xyz(&[v[3], v[4], v[5]]),
            translation: Vector3::new(v[0], v[1], v[2]),
        }
    }
}

impl std::ops::Mul for RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation * rhs.translation + self.translation,
        }
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

/// Serialized as `{"q": [w, x, y, z], "t": [x, y, z]}`.
#[derive(Serialize, Deserialize)]
struct PoseRepr {
    q: [f64; 4],
    t: [f64; 3],
}

impl Serialize for RigidTransform {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let q = self.rotation.as_ref();
        PoseRepr {
            q: [q.w, q.i, q.j, q.k],
            t: [self.translation.x, self.translation.y, self.translation.z],
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(deserializer)?;
        let [w, x, y, z] = repr.q;
        let quat = Quaternion::new(w, x, y, z);
        let norm = quat.norm();
        if !(norm.is_finite() && norm > 1e-9) {
            return Err(D::Error::custom("pose quaternion has near-zero norm"));
        }
        Ok(RigidTransform {
            rotation: UnitQuaternion::from_quaternion(quat),
            translation: Vector3::new(repr.t[0], repr.t[1], repr.t[2]),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn compose_then_invert_is_identity() {
        let a = RigidTransform::from_axis_angle(Vector3::new(1.0, 2.0, -0.5), 0.7)
            * RigidTransform::from_translation(Vector3::new(0.3, -0.2, 1.1));
        let id = a * a.inverse();
        assert_relative_eq!(id.translation.norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(id.rotation.angle(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn apply_matches_composition() {
        let a = RigidTransform::from_axis_angle(Vector3::z(), 0.5);
        let b = RigidTransform::from_translation(Vector3::new(1.0, 0.0, 0.0));
        let p = Point3::new(0.5, -0.25, 2.0);
        let lhs = (a * b).apply(&p);
        let rhs = a.apply(&b.apply(&p));
        assert_relative_eq!((lhs - rhs).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn euler_round_trips_away_from_gimbal_lock() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let e = [
                rng.random_range(-3.0..3.0),
                rng.random_range(-1.4..1.4),
                rng.random_range(-3.0..3.0),
            ];
            let r = rotation_from_euler_xyz(&e);
            let back = rotation_from_euler_xyz(&euler_xyz_from_rotation(&r));
            assert!(r.angle_to(&back) < 1e-9);
        }
    }

    #[test]
    fn vec6_round_trip_recovers_the_pose() {
        let pose = RigidTransform::from_axis_angle(Vector3::new(0.3, -0.8, 0.5), 1.1)
            * RigidTransform::from_translation(Vector3::new(0.4, -1.2, 0.9));
        let back = RigidTransform::from_vec6(&pose.to_vec6());
        assert!((pose.translation - back.translation).norm() < 1e-12);
        assert!(pose.rotation.angle_to(&back.rotation) < 1e-9);
    }

    #[test]
    fn euler_rate_matrix_matches_finite_difference_angular_velocity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let h = 1e-7;
        for _ in 0..50 {
            let e = [
                rng.random_range(-1.2..1.2),
                rng.random_range(-1.2..1.2),
                rng.random_range(-1.2..1.2),
            ];
            let rate = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let ep: Vec<f64> = (0..3).map(|i| e[i] + h * rate[i]).collect();
            let em: Vec<f64> = (0..3).map(|i| e[i] - h * rate[i]).collect();
            let rp = rotation_from_euler_xyz(&[ep[0], ep[1], ep[2]]);
            let rm = rotation_from_euler_xyz(&[em[0], em[1], em[2]]);
            // w = (R(e+h r) R(e-h r)^-1).scaled_axis() / 2h
            let w_fd = (rp * rm.inverse()).scaled_axis() / (2.0 * h);
            let w = euler_xyz_rate_matrix(&e) * Vector3::new(rate[0], rate[1], rate[2]);
            assert!((w - w_fd).norm() < 1e-6, "w {w:?} vs fd {w_fd:?}");
        }
    }

    #[test]
    fn json_round_trip() {
        let a = RigidTransform::from_axis_angle(Vector3::new(0.2, 0.4, 0.9), 1.3)
            * RigidTransform::from_translation(Vector3::new(-0.1, 0.6, 0.25));
        let text = serde_json::to_string(&a).unwrap();
        let back: RigidTransform = serde_json::from_str(&text).unwrap();
        assert_relative_eq!((a.translation - back.translation).norm(), 0.0, epsilon = 1e-12);
        assert!(a.rotation.angle_to(&back.rotation) < 1e-12);
        assert!(back.quaternion_drift() < 1e-9);
    }
}
