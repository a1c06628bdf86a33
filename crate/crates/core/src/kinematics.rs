//! Serial arm plus branching hand kinematics: link poses, palm pose,
//! geometric Jacobians, joint limits, damped-least-squares IK, and per-link
//! collision vertex sets.
//!
//! Chains are trees of revolute joints loaded from a JSON description. The
//! default robot is a 7-DOF arm carrying a four-finger hand with 16 joints,
//! of which the two proximal joints per finger form the 8-joint active
//! subset; distal joints are held at zero. Chains are immutable after
//! construction and all queries are pure.

use crate::error::{Error, Result};
use crate::transform::RigidTransform;
use nalgebra::{DMatrix, DVector, Matrix6, Point3, UnitQuaternion, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const IK_MAX_ITERS: usize = 500;
pub const IK_POSITION_TOL: f64 = 1e-3;
pub const IK_ROTATION_TOL: f64 = 1e-2;
const IK_DAMPING: f64 = 0.08;
const IK_MAX_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointGroup {
    Arm,
    Hand,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    pub parent: String,
    pub child: String,
    pub origin: RigidTransform,
    pub axis: [f64; 3],
    pub limits: [f64; 2],
    pub group: JointGroup,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Link {
    pub name: String,
    #[serde(default)]
    pub vertices: Vec<[f64; 3]>,
}

/// Tree of revolute joints. Joint angle slots are assigned arm joints first
/// (declaration order), then hand joints, so a full configuration vector is
/// the concatenation of q_a and q_h.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ChainRepr", into = "ChainRepr")]
pub struct KinematicChain {
    pub base: String,
    pub palm: String,
    pub fingertips: Vec<String>,
    pub links: Vec<Link>,
    pub joints: Vec<Joint>,
    pub active_hand: Vec<String>,

    link_index: BTreeMap<String, usize>,
    joint_slot: Vec<usize>,
    parent_joint: Vec<Option<usize>>,
    n_arm: usize,
    n_hand: usize,
}

/// Serialized form: the five declarative fields only.
#[derive(Serialize, Deserialize)]
struct ChainRepr {
    base: String,
    palm: String,
    #[serde(default)]
    fingertips: Vec<String>,
    links: Vec<Link>,
    joints: Vec<Joint>,
    #[serde(default)]
    active_hand: Vec<String>,
}

impl TryFrom<ChainRepr> for KinematicChain {
    type Error = Error;

    fn try_from(r: ChainRepr) -> Result<Self> {
        KinematicChain::new(r.base, r.palm, r.fingertips, r.links, r.joints, r.active_hand)
    }
}

impl From<KinematicChain> for ChainRepr {
    fn from(c: KinematicChain) -> Self {
        ChainRepr {
            base: c.base,
            palm: c.palm,
            fingertips: c.fingertips,
            links: c.links,
            joints: c.joints,
            active_hand: c.active_hand,
        }
    }
}

impl KinematicChain {
    pub fn new(
        base: String,
        palm: String,
        fingertips: Vec<String>,
        links: Vec<Link>,
        joints: Vec<Joint>,
        active_hand: Vec<String>,
    ) -> Result<Self> {
        let mut link_index = BTreeMap::new();
        for (i, link) in links.iter().enumerate() {
            if link_index.insert(link.name.clone(), i).is_some() {
                return Err(Error::ChainDefinition(format!(
                    "duplicate link {}",
                    link.name
                )));
            }
            for v in &link.vertices {
                if v.iter().any(|c| !c.is_finite()) {
                    return Err(Error::ChainDefinition(format!(
                        "non-finite vertex on link {}",
                        link.name
                    )));
                }
            }
        }
        if !link_index.contains_key(&base) {
            return Err(Error::ChainDefinition(format!("missing base link {base}")));
        }
        if !link_index.contains_key(&palm) {
            return Err(Error::ChainDefinition(format!("missing palm link {palm}")));
        }
        for tip in &fingertips {
            if !link_index.contains_key(tip) {
                return Err(Error::ChainDefinition(format!(
                    "missing fingertip link {tip}"
                )));
            }
        }

        // Joints must arrive in topological order: each parent link is the
        // base or the child of an earlier joint, and each link has at most
        // one parent joint.
        let mut reachable: BTreeMap<&str, ()> = BTreeMap::new();
        reachable.insert(base.as_str(), ());
        let mut parent_joint = vec![None; links.len()];
        let mut n_arm = 0;
        let mut n_hand = 0;
        for (ji, joint) in joints.iter().enumerate() {
            if !reachable.contains_key(joint.parent.as_str()) {
                return Err(Error::ChainDefinition(format!(
                    "joint {} attaches to unreachable link {}",
                    joint.name, joint.parent
                )));
            }
            let child = *link_index.get(&joint.child).ok_or_else(|| {
                Error::ChainDefinition(format!(
                    "joint {} references missing link {}",
                    joint.name, joint.child
                ))
            })?;
            if joint.child == base || parent_joint[child].is_some() {
                return Err(Error::ChainDefinition(format!(
                    "link {} has more than one parent",
                    joint.child
                )));
            }
            parent_joint[child] = Some(ji);
            reachable.insert(joint.child.as_str(), ());

            let norm = Vector3::from(joint.axis).norm();
            if !((norm - 1.0).abs() < 1e-9) {
                return Err(Error::ChainDefinition(format!(
                    "joint {} axis is not unit length",
                    joint.name
                )));
            }
            if !(joint.limits[0].is_finite()
                && joint.limits[1].is_finite()
                && joint.limits[0] < joint.limits[1])
            {
                return Err(Error::ChainDefinition(format!(
                    "joint {} has invalid limits",
                    joint.name
                )));
            }
            match joint.group {
                JointGroup::Arm => n_arm += 1,
                JointGroup::Hand => n_hand += 1,
            }
        }
        if reachable.len() != links.len() {
            return Err(Error::ChainDefinition(
                "not every link is reachable from the base".into(),
            ));
        }
        if n_hand > 0 && (n_arm != 7 || n_hand != 16 || active_hand.len() != 8) {
            return Err(Error::ChainDefinition(format!(
                "a handed chain needs 7 arm and 16 hand joints with 8 active, got {n_arm}/{n_hand}/{}",
                active_hand.len()
            )));
        }
        for name in &active_hand {
            match joints.iter().find(|j| &j.name == name) {
                Some(j) if j.group == JointGroup::Hand => {}
                _ => {
                    return Err(Error::ChainDefinition(format!(
                        "active joint {name} is not a hand joint"
                    )))
                }
            }
        }

        // Angle slots: arm joints in order, then hand joints in order.
        let mut joint_slot = vec![0usize; joints.len()];
        let mut next_arm = 0;
        let mut next_hand = n_arm;
        for (ji, joint) in joints.iter().enumerate() {
            joint_slot[ji] = match joint.group {
                JointGroup::Arm => {
                    next_arm += 1;
                    next_arm - 1
                }
                JointGroup::Hand => {
                    next_hand += 1;
                    next_hand - 1
                }
            };
        }

        Ok(Self {
            base,
            palm,
            fingertips,
            links,
            joints,
            active_hand,
            link_index,
            joint_slot,
            parent_joint,
            n_arm,
            n_hand,
        })
    }

    pub fn n_arm(&self) -> usize {
        self.n_arm
    }

    pub fn n_hand(&self) -> usize {
        self.n_hand
    }

    pub fn n_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn link_index(&self, name: &str) -> Result<usize> {
        self.link_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownLink(name.into()))
    }

    /// Slot in the full angle vector for each active hand joint.
    pub fn active_slots(&self) -> Vec<usize> {
        self.active_hand
            .iter()
            .map(|name| {
                let ji = self
                    .joints
                    .iter()
                    .position(|j| &j.name == name)
                    .expect("validated active joint");
                self.joint_slot[ji]
            })
            .collect()
    }

    /// Limits per slot of the full angle vector.
    pub fn slot_limits(&self) -> Vec<[f64; 2]> {
        let mut limits = vec![[0.0, 0.0]; self.joints.len()];
        for (ji, joint) in self.joints.iter().enumerate() {
            limits[self.joint_slot[ji]] = joint.limits;
        }
        limits
    }

    /// Poses of every link for a full angle vector, indexed like `links`.
    pub fn fk_full(&self, q: &[f64]) -> Result<Vec<RigidTransform>> {
        if q.len() != self.joints.len() {
            return Err(Error::DimensionMismatch {
                expected: self.joints.len(),
                got: q.len(),
                context: "joint angles",
            });
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("joint angles".into()));
        }
        let mut poses = vec![RigidTransform::identity(); self.links.len()];
        for (ji, joint) in self.joints.iter().enumerate() {
            let parent = poses[self.link_index[&joint.parent]];
            let angle = q[self.joint_slot[ji]];
            let spin = RigidTransform::from_rotation(UnitQuaternion::from_axis_angle(
                &nalgebra::Unit::new_normalize(Vector3::from(joint.axis)),
                angle,
            ));
            poses[self.link_index[&joint.child]] = parent * joint.origin * spin;
        }
        Ok(poses)
    }

    pub fn forward_kinematics(&self, q: &JointConfig) -> Result<BTreeMap<String, RigidTransform>> {
        let poses = self.fk_full(&q.full(self)?)?;
        Ok(self
            .links
            .iter()
            .map(|l| l.name.clone())
            .zip(poses)
            .collect())
    }

    pub fn link_pose(&self, q: &JointConfig, link: &str) -> Result<RigidTransform> {
        let idx = self.link_index(link)?;
        Ok(self.fk_full(&q.full(self)?)?[idx])
    }

    /// Palm pose depends only on the arm; hand joints are downstream of it.
    pub fn palm_pose(&self, q_a: &[f64]) -> Result<RigidTransform> {
        if q_a.len() != self.n_arm {
            return Err(Error::DimensionMismatch {
                expected: self.n_arm,
                got: q_a.len(),
                context: "arm joint angles",
            });
        }
        let mut q = q_a.to_vec();
        q.resize(self.joints.len(), 0.0);
        let idx = self.link_index(&self.palm)?;
        Ok(self.fk_full(&q)?[idx])
    }

    /// Palm pose as position plus intrinsic XYZ Euler angles.
    pub fn palm_pose_vec6(&self, q_a: &[f64]) -> Result<[f64; 6]> {
        Ok(self.palm_pose(q_a)?.to_vec6())
    }

    /// Chain of joint indices from the base to `link`, base-first.
    fn path_to(&self, link_idx: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut cursor = link_idx;
        while let Some(ji) = self.parent_joint[cursor] {
            path.push(ji);
            cursor = self.link_index[&self.joints[ji].parent];
        }
        path.reverse();
        path
    }

    /// Geometric Jacobian of the link origin, rows [linear; angular],
    /// columns over the full angle vector. Off-path columns are zero.
    pub fn jacobian(&self, q: &JointConfig, link: &str) -> Result<DMatrix<f64>> {
        let full = q.full(self)?;
        let poses = self.fk_full(&full)?;
        let link_idx = self.link_index(link)?;
        Ok(self.jacobian_with(&poses, link_idx))
    }

    fn jacobian_with(&self, poses: &[RigidTransform], link_idx: usize) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(6, self.joints.len());
        let p_link = Point3::from(poses[link_idx].translation);
        for ji in self.path_to(link_idx) {
            let joint = &self.joints[ji];
            let frame = poses[self.link_index[&joint.parent]] * joint.origin;
            let axis_w = frame.apply_vector(&Vector3::from(joint.axis));
            let arm = p_link - Point3::from(frame.translation);
            let linear = axis_w.cross(&arm);
            let col = self.joint_slot[ji];
            for r in 0..3 {
                jac[(r, col)] = linear[r];
                jac[(r + 3, col)] = axis_w[r];
            }
        }
        jac
    }

    /// Linear-velocity Jacobian (3 x n) of a point given in the link frame.
    pub fn point_jacobian(
        &self,
        q: &JointConfig,
        link: &str,
        p_local: &Point3<f64>,
    ) -> Result<DMatrix<f64>> {
        let full = q.full(self)?;
        let poses = self.fk_full(&full)?;
        let link_idx = self.link_index(link)?;
        Ok(self.point_jacobian_with(&poses, link_idx, p_local))
    }

    pub fn point_jacobian_with(
        &self,
        poses: &[RigidTransform],
        link_idx: usize,
        p_local: &Point3<f64>,
    ) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(3, self.joints.len());
        let p_world = poses[link_idx].apply(p_local);
        for ji in self.path_to(link_idx) {
            let joint = &self.joints[ji];
            let frame = poses[self.link_index[&joint.parent]] * joint.origin;
            let axis_w = frame.apply_vector(&Vector3::from(joint.axis));
            let linear = axis_w.cross(&(p_world - Point3::from(frame.translation)));
            let col = self.joint_slot[ji];
            for r in 0..3 {
                jac[(r, col)] = linear[r];
            }
        }
        jac
    }

    /// Collision vertices of every link in the world frame; counts preserved.
    pub fn link_vertices_world(&self, q: &JointConfig) -> Result<BTreeMap<String, Vec<Point3<f64>>>> {
        let poses = self.fk_full(&q.full(self)?)?;
        Ok(self
            .links
            .iter()
            .enumerate()
            .map(|(i, link)| {
                let verts = link
                    .vertices
                    .iter()
                    .map(|v| poses[i].apply(&Point3::new(v[0], v[1], v[2])))
                    .collect();
                (link.name.clone(), verts)
            })
            .collect())
    }

    pub fn clamp_limits(&self, q: &JointConfig) -> Result<JointConfig> {
        let mut full = q.full(self)?;
        for (slot, lim) in self.slot_limits().iter().enumerate() {
            full[slot] = full[slot].clamp(lim[0], lim[1]);
        }
        JointConfig::from_full(self, &full)
    }

    pub fn limits_satisfied(&self, q: &JointConfig) -> Result<bool> {
        let full = q.full(self)?;
        Ok(self
            .slot_limits()
            .iter()
            .enumerate()
            .all(|(slot, lim)| full[slot] >= lim[0] && full[slot] <= lim[1]))
    }

    /// Damped-least-squares IK for the palm. On success the returned arm
    /// configuration satisfies the limits, reaches the target within
    /// IK_POSITION_TOL / IK_ROTATION_TOL, and keeps the palm above
    /// `table_height`. Non-convergence is an error; the caller reseeds.
    pub fn ik_palm(
        &self,
        target: &RigidTransform,
        table_height: f64,
        q_seed: &[f64],
    ) -> Result<Vec<f64>> {
        if q_seed.len() != self.n_arm {
            return Err(Error::DimensionMismatch {
                expected: self.n_arm,
                got: q_seed.len(),
                context: "ik seed",
            });
        }
        if !(target.translation.iter().all(|v| v.is_finite()) && target.quaternion_drift() < 1e-6)
        {
            return Err(Error::NonFinite("ik target".into()));
        }
        let limits = self.slot_limits();
        let palm_idx = self.link_index(&self.palm)?;
        let mut q = q_seed.to_vec();
        for (i, v) in q.iter_mut().enumerate() {
            *v = v.clamp(limits[i][0], limits[i][1]);
        }

        let error_at = |q: &[f64], full: &mut [f64]| -> Result<(Vector6<f64>, RigidTransform)> {
            full[..self.n_arm].copy_from_slice(q);
            let palm = self.fk_full(full)?[palm_idx];
            let pos = target.translation - palm.translation;
            let rot = (target.rotation * palm.rotation.inverse()).scaled_axis();
            Ok((Vector6::new(pos.x, pos.y, pos.z, rot.x, rot.y, rot.z), palm))
        };

        let mut full = vec![0.0; self.joints.len()];
        let mut damping = IK_DAMPING;
        // Deterministic restart source for targets outside the seed's basin.
        let mut restart_rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x1c);
        let mut best_sq = f64::INFINITY;
        let mut stalled = 0usize;
        for _ in 0..IK_MAX_ITERS {
            let (err, palm) = error_at(&q, &mut full)?;
            if err.fixed_rows::<3>(0).norm() < IK_POSITION_TOL
                && err.fixed_rows::<3>(3).norm() < IK_ROTATION_TOL
            {
                if palm.translation.z <= table_height {
                    return Err(Error::IkFailure(format!(
                        "palm z {:.4} not above table {table_height:.4}",
                        palm.translation.z
                    )));
                }
                return Ok(q);
            }

            let poses = self.fk_full(&full)?;
            let jac = self
                .jacobian_with(&poses, palm_idx)
                .columns(0, self.n_arm)
                .into_owned();
            // J^T (J J^T + lambda^2 I)^-1 e, with backtracking on the squared
            // error and Levenberg-style damping growth when no step helps.
            let jjt = &jac * jac.transpose();
            let damped = Matrix6::from_iterator(jjt.iter().copied())
                + Matrix6::identity() * damping * damping;
            let y = damped
                .lu()
                .solve(&err)
                .ok_or_else(|| Error::IkFailure("singular damped system".into()))?;
            let mut step = jac.transpose() * DVector::from_column_slice(y.as_slice());
            let max_step = step.amax();
            if max_step > IK_MAX_STEP {
                step *= IK_MAX_STEP / max_step;
            }

            let base_sq = err.norm_squared();
            let mut improved = false;
            let mut alpha = 1.0;
            for _ in 0..5 {
                let trial: Vec<f64> = (0..self.n_arm)
                    .map(|i| (q[i] + alpha * step[i]).clamp(limits[i][0], limits[i][1]))
                    .collect();
                if error_at(&trial, &mut full)?.0.norm_squared() < base_sq {
                    q = trial;
                    improved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if improved {
                damping = (damping * 0.5).max(IK_DAMPING);
            } else {
                damping = (damping * 10.0).min(1e3);
            }
            let current_sq = error_at(&q, &mut full)?.0.norm_squared();
            if current_sq < 0.95 * best_sq {
                best_sq = current_sq;
                stalled = 0;
            } else {
                stalled += 1;
            }
            // Creeping progress means the basin is wrong: restart from a
            // fresh in-limit configuration and keep iterating.
            if stalled > 30 {
                for i in 0..self.n_arm {
                    q[i] = restart_rng.random_range(limits[i][0]..limits[i][1]);
                }
                damping = IK_DAMPING;
                best_sq = f64::INFINITY;
                stalled = 0;
            }
        }
        Err(Error::IkFailure(format!(
            "no convergence in {IK_MAX_ITERS} iterations"
        )))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Joint configuration split into arm and hand parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    pub q_a: Vec<f64>,
    pub q_h: Vec<f64>,
}

impl JointConfig {
    pub fn zeros(chain: &KinematicChain) -> Self {
        Self {
            q_a: vec![0.0; chain.n_arm()],
            q_h: vec![0.0; chain.n_hand()],
        }
    }

    /// Full angle vector: arm slots then hand slots.
    pub fn full(&self, chain: &KinematicChain) -> Result<Vec<f64>> {
        if self.q_a.len() != chain.n_arm() {
            return Err(Error::DimensionMismatch {
                expected: chain.n_arm(),
                got: self.q_a.len(),
                context: "arm joint angles",
            });
        }
        if self.q_h.len() != chain.n_hand() {
            return Err(Error::DimensionMismatch {
                expected: chain.n_hand(),
                got: self.q_h.len(),
                context: "hand joint angles",
            });
        }
        let mut full = Vec::with_capacity(self.q_a.len() + self.q_h.len());
        full.extend_from_slice(&self.q_a);
        full.extend_from_slice(&self.q_h);
        Ok(full)
    }

    pub fn from_full(chain: &KinematicChain, full: &[f64]) -> Result<Self> {
        if full.len() != chain.n_joints() {
            return Err(Error::DimensionMismatch {
                expected: chain.n_joints(),
                got: full.len(),
                context: "joint angles",
            });
        }
        Ok(Self {
            q_a: full[..chain.n_arm()].to_vec(),
            q_h: full[chain.n_arm()..].to_vec(),
        })
    }
}

fn box_vertices(center: [f64; 3], half: [f64; 3]) -> Vec<[f64; 3]> {
    let mut verts = Vec::with_capacity(8);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                verts.push([
                    center[0] + sx * half[0],
                    center[1] + sy * half[1],
                    center[2] + sz * half[2],
                ]);
            }
        }
    }
    verts
}

/// Default robot: a 7-DOF arm stacked along z with alternating z/y axes,
/// ending in a palm that carries four fingers. Each finger has four flexion
/// joints pointing out of the palm face; the two proximal joints per finger
/// are the active subset. Finger roots are yawed so positive flexion curls
/// toward the palm axis.
pub fn default_robot() -> KinematicChain {
    let mut links = vec![Link {
        name: "base_link".into(),
        vertices: box_vertices([0.0, 0.0, 0.05], [0.06, 0.06, 0.05]),
    }];
    let mut joints = Vec::new();

    let arm_segments: [(f64, [f64; 3], f64); 7] = [
        (0.15, [0.0, 0.0, 1.0], 2.9),
        (0.10, [0.0, 1.0, 0.0], 1.9),
        (0.25, [0.0, 0.0, 1.0], 2.9),
        (0.10, [0.0, 1.0, 0.0], 2.0),
        (0.25, [0.0, 0.0, 1.0], 2.9),
        (0.10, [0.0, 1.0, 0.0], 1.9),
        (0.08, [0.0, 0.0, 1.0], 2.9),
    ];
    let mut parent = "base_link".to_string();
    for (i, (offset, axis, limit)) in arm_segments.iter().enumerate() {
        let child = if i == 6 {
            "palm".to_string()
        } else {
            format!("arm_l{}", i + 1)
        };
        let half_len = arm_segments.get(i + 1).map_or(0.015, |next| next.0 / 2.0);
        let vertices = if child == "palm" {
            box_vertices([0.0, 0.0, 0.015], [0.11, 0.085, 0.015])
        } else {
            box_vertices([0.0, 0.0, half_len], [0.035, 0.035, half_len])
        };
        links.push(Link {
            name: child.clone(),
            vertices,
        });
        joints.push(Joint {
            name: format!("arm_j{}", i + 1),
            parent: parent.clone(),
            child: child.clone(),
            origin: RigidTransform::from_translation(Vector3::new(0.0, 0.0, *offset)),
            axis: *axis,
            limits: [-limit, *limit],
            group: JointGroup::Arm,
        });
        parent = child;
    }

    let mounts: [(f64, f64); 4] =
        [(0.095, 0.07), (0.095, -0.07), (-0.095, 0.07), (-0.095, -0.07)];
    let segment_lengths = [0.065, 0.012, 0.01, 0.008];
    let mut fingertips = Vec::new();
    let mut active_hand = Vec::new();
    for (fi, (mx, my)) in mounts.iter().enumerate() {
        let f = fi + 1;
        // Local +x points at the palm axis so positive flexion closes inward.
        let yaw = (-my).atan2(-mx);
        let mut parent = "palm".to_string();
        for seg in 0..4 {
            let link_name = format!("f{f}_l{}", seg + 1);
            let joint_name = format!("f{f}_j{}", seg + 1);
            let origin = if seg == 0 {
                RigidTransform::new(
                    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
                    Vector3::new(*mx, *my, 0.03),
                )
            } else {
                RigidTransform::from_translation(Vector3::new(0.0, 0.0, segment_lengths[seg - 1]))
            };
            let half_len = segment_lengths[seg] / 2.0;
            links.push(Link {
                name: link_name.clone(),
                vertices: box_vertices([0.0, 0.0, half_len], [0.008, 0.008, half_len]),
            });
            joints.push(Joint {
                name: joint_name.clone(),
                parent: parent.clone(),
                child: link_name.clone(),
                origin,
                axis: [0.0, 1.0, 0.0],
                limits: [-0.2, 1.8],
                group: JointGroup::Hand,
            });
            if seg < 2 {
                active_hand.push(joint_name);
            }
            parent = link_name;
        }
        fingertips.push(format!("f{f}_l4"));
    }

    KinematicChain::new(
        "base_link".into(),
        "palm".into(),
        fingertips,
        links,
        joints,
        active_hand,
    )
    .expect("default robot is well formed")
}
