//! Synthetic grasp datasets labeled by an analytic success oracle.
//!
//! Palm poses are sampled at a standoff along surface normals of the true
//! scene and reached through inverse kinematics; hand preshapes are drawn
//! uniformly. Each candidate is labeled by a deterministic close-and-contact
//! test instead of a physics rollout: the proximal finger joints advance at
//! an equal rate until contact or their limit, and the grasp succeeds when
//! at least two fingertips touch the surface with opposing contact normals.

use crate::camera::{low_res_intrinsics, observe_scene, NormalizedCloud, PointCloud};
use crate::error::{Error, Result};
use crate::grasp::{make_grasp_config, Approach, GraspConfig, SuccessDataset, SuccessExample};
use crate::kinematics::{JointConfig, JointGroup, KinematicChain};
use crate::sdf::{Primitive, PrimitiveScene, SceneObject};
use crate::transform::RigidTransform;
use nalgebra::{Point3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

/// A fingertip vertex within this distance of the surface counts as contact.
pub const CONTACT_TOL: f64 = 5e-3;
/// Minimum vertex SDF allowed at the preshape; anything below is penetration.
pub const PRESHAPE_SDF_MIN: f64 = -1e-4;
/// The two best contact normals must oppose at least this strongly.
pub const ANTIPODAL_DOT_MAX: f64 = -0.5;
/// Sampled preshape range for the active hand joints, in radians.
pub const PRESHAPE_RANGE: [f64; 2] = [0.0, 1.2];

const CLOSE_STEP: f64 = 1e-3;
/// The close halts a finger once a vertex is this near the surface: half the
/// contact band, so stopped links sit solidly inside it without penetrating.
const CLOSE_STOP_TOL: f64 = CONTACT_TOL / 2.0;
/// Upper bound on how far any finger vertex moves in one close step; used to
/// stride over free space without crossing the contact band.
const MAX_VERTEX_STEP: f64 = 2.5e-4;
const CLOSE_MAX_ITERS: usize = 4000;
/// Jitter added to the planned standoff, in meters.
const STANDOFF_JITTER: [f64; 2] = [-0.004, 0.004];
const STANDOFF_LIMITS: [f64; 2] = [0.032, 0.20];
/// Rolls drawn per candidate; the narrowest pinch width wins.
const ROLL_CANDIDATES: usize = 3;
/// Standoff offsets tried around the planned value, first success kept; the
/// kinematic plan cannot predict the exact contact depth, so the sampler
/// probes a small ladder like a grasp planner would.
const STANDOFF_SCAN: [f64; 5] = [0.0, -0.008, 0.008, -0.016, 0.016];
const ATTEMPTS_PER_SAMPLE: usize = 50;
/// Approaches steeper than 45 degrees below horizontal count as overhead.
const OVERHEAD_MIN_DOWNWARD: f64 = std::f64::consts::FRAC_1_SQRT_2;
/// Neutral elbow-up arm pose seeding every inverse-kinematics solve.
const ARM_SEED: [f64; 7] = [0.3, 0.5, -0.2, 0.8, 0.1, 0.6, -0.2];

/// One labeled grasp candidate. `scene` indexes into the dataset's
/// observations and scene list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspSample {
    pub scene: usize,
    pub config: GraspConfig,
    pub label: bool,
    pub approach: Approach,
}

/// Grasp dataset: one observation per scene plus labeled samples referencing
/// them by index.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspDataset {
    pub observations: Vec<NormalizedCloud>,
    pub scene_tags: Vec<String>,
    pub samples: Vec<GraspSample>,
}

impl GraspDataset {
    pub fn validate(&self) -> Result<()> {
        if self.observations.len() != self.scene_tags.len() {
            return Err(Error::DimensionMismatch {
                expected: self.observations.len(),
                got: self.scene_tags.len(),
                context: "one tag per observation",
            });
        }
        for sample in &self.samples {
            if sample.scene >= self.observations.len() {
                return Err(Error::InvalidArgument(format!(
                    "sample references scene {} of {}",
                    sample.scene,
                    self.observations.len()
                )));
            }
            if sample.config.frame != self.observations[sample.scene].frame {
                return Err(Error::InvalidArgument(
                    "sample config frame does not match its observation".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn observation_of(&self, sample: &GraspSample) -> &NormalizedCloud {
        &self.observations[sample.scene]
    }

    pub fn positive_rate(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().filter(|s| s.label).count() as f64 / self.samples.len() as f64
    }

    /// View for classifier training; clouds are shared per scene.
    pub fn to_success_dataset(&self) -> SuccessDataset {
        SuccessDataset {
            clouds: self.observations.clone(),
            grasps: self
                .samples
                .iter()
                .map(|s| SuccessExample {
                    cloud: s.scene,
                    config: s.config.clone(),
                    label: s.label,
                })
                .collect(),
        }
    }

    /// Writes `cloud-NNN.ply` per scene, `meta.json`, and `grasps.jsonl`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.validate()?;
        std::fs::create_dir_all(dir)?;
        let mut scenes = Vec::with_capacity(self.observations.len());
        for (i, obs) in self.observations.iter().enumerate() {
            let cloud_file = format!("cloud-{i:03}.ply");
            let ply = PointCloud {
                points: obs.points.clone(),
                frame: "normalized".into(),
            };
            crate::camera::save_ply(&ply, &dir.join(&cloud_file))?;
            scenes.push(SceneEntry {
                tag: self.scene_tags[i].clone(),
                cloud: cloud_file,
                frame: obs.frame,
            });
        }
        let meta = DatasetMeta { scenes };
        std::fs::write(
            dir.join("meta.json"),
            serde_json::to_string_pretty(&meta)?,
        )?;
        let mut records = std::io::BufWriter::new(std::fs::File::create(dir.join("grasps.jsonl"))?);
        for sample in &self.samples {
            writeln!(records, "{}", serde_json::to_string(sample)?)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: DatasetMeta =
            serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json"))?)?;
        let mut observations = Vec::with_capacity(meta.scenes.len());
        let mut scene_tags = Vec::with_capacity(meta.scenes.len());
        for entry in meta.scenes {
            let ply = crate::camera::load_ply(&dir.join(&entry.cloud))?;
            observations.push(NormalizedCloud {
                points: ply.points,
                frame: entry.frame,
            });
            scene_tags.push(entry.tag);
        }
        let mut samples = Vec::new();
        let records = std::io::BufReader::new(std::fs::File::open(dir.join("grasps.jsonl"))?);
        for line in records.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            samples.push(serde_json::from_str(&line)?);
        }
        let dataset = Self {
            observations,
            scene_tags,
            samples,
        };
        dataset.validate()?;
        Ok(dataset)
    }
}

#[derive(Serialize, Deserialize)]
struct SceneEntry {
    tag: String,
    cloud: String,
    frame: crate::camera::NormalizedFrame,
}

#[derive(Serialize, Deserialize)]
struct DatasetMeta {
    scenes: Vec<SceneEntry>,
}

/// Outcome of the close-and-contact oracle with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspLabel {
    pub success: bool,
    pub preshape_clear: bool,
    pub fingertip_contacts: usize,
    /// Smallest pairwise dot product among fingertip contact normals; +1
    /// when fewer than two fingertips touch.
    pub best_normal_dot: f64,
    /// Full joint vector after the synergy close.
    pub closed: Vec<f64>,
}

/// One finger: its links below the palm and the slots that close.
struct Finger {
    tip: usize,
    links: Vec<usize>,
    active: Vec<usize>,
}

fn finger_layout(chain: &KinematicChain) -> Result<Vec<Finger>> {
    let active_slots = chain.active_slots();
    let mut fingers = Vec::with_capacity(chain.fingertips.len());
    for tip_name in &chain.fingertips {
        let mut links = Vec::new();
        let mut joint_names = Vec::new();
        let mut current = tip_name.clone();
        while current != chain.palm {
            let joint = chain
                .joints
                .iter()
                .find(|j| j.child == current)
                .ok_or_else(|| {
                    Error::ChainDefinition(format!("fingertip {tip_name} is not below the palm"))
                })?;
            if joint.group != JointGroup::Hand {
                return Err(Error::ChainDefinition(format!(
                    "fingertip {tip_name} passes through arm joint {}",
                    joint.name
                )));
            }
            links.push(chain.link_index(&current)?);
            joint_names.push(joint.name.clone());
            current = joint.parent.clone();
        }
        let active = chain
            .active_hand
            .iter()
            .enumerate()
            .filter(|(_, name)| joint_names.contains(name))
            .map(|(i, _)| active_slots[i])
            .collect();
        fingers.push(Finger {
            tip: chain.link_index(tip_name)?,
            links,
            active,
        });
    }
    Ok(fingers)
}

/// Minimum scene SDF over the world-space vertices of the given links.
fn min_link_sdf(
    chain: &KinematicChain,
    poses: &[RigidTransform],
    links: &[usize],
    scene: &PrimitiveScene,
) -> f64 {
    let mut min = f64::INFINITY;
    for &li in links {
        let pose = &poses[li];
        for v in &chain.links[li].vertices {
            let p = pose.apply(&Point3::new(v[0], v[1], v[2]));
            min = min.min(scene.eval(&p));
        }
    }
    min
}

/// Success label for one grasp candidate; see [`label_grasp_detailed`].
pub fn label_grasp(scene: &PrimitiveScene, chain: &KinematicChain, q: &JointConfig) -> Result<bool> {
    Ok(label_grasp_detailed(scene, chain, q)?.success)
}

/// Labels a candidate by preshape clearance, a simulated synergy close, and
/// an antipodal check on the resulting fingertip contacts.
///
/// The label is 1 iff (a) no link vertex penetrates the scene at the
/// preshape, (b) after closing, at least two fingertips lie within
/// [`CONTACT_TOL`] of the surface, and (c) the best pair of contact normals
/// opposes with dot at most [`ANTIPODAL_DOT_MAX`].
pub fn label_grasp_detailed(
    scene: &PrimitiveScene,
    chain: &KinematicChain,
    q: &JointConfig,
) -> Result<GraspLabel> {
    let full = q.full(chain)?;
    let fingers = finger_layout(chain)?;
    let limits = chain.slot_limits();

    let poses = chain.fk_full(&full)?;
    let all_links: Vec<usize> = (0..chain.links.len())
        .filter(|&i| !chain.links[i].vertices.is_empty())
        .collect();
    let preshape_clear = min_link_sdf(chain, &poses, &all_links, scene) >= PRESHAPE_SDF_MIN;

    // Synergy close: every unstopped finger's active joints advance together
    // until that finger touches the scene or runs out of travel. Strides over
    // free space are sized so no vertex can cross the contact band unseen.
    let mut q_work = full;
    let mut stopped = vec![false; fingers.len()];
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > CLOSE_MAX_ITERS {
            return Err(Error::Degenerate(
                "synergy close failed to terminate".into(),
            ));
        }
        let poses = chain.fk_full(&q_work)?;
        let mut min_gap = f64::INFINITY;
        for (fi, finger) in fingers.iter().enumerate() {
            if stopped[fi] {
                continue;
            }
            let d = min_link_sdf(chain, &poses, &finger.links, scene);
            let at_limit = finger
                .active
                .iter()
                .all(|&slot| q_work[slot] >= limits[slot][1]);
            if d <= CLOSE_STOP_TOL || at_limit || finger.active.is_empty() {
                stopped[fi] = true;
            } else {
                min_gap = min_gap.min(d);
            }
        }
        if stopped.iter().all(|&s| s) {
            break;
        }
        let stride = (((min_gap - CLOSE_STOP_TOL) / MAX_VERTEX_STEP).floor() as usize).max(1);
        let advance = CLOSE_STEP * stride as f64;
        for (fi, finger) in fingers.iter().enumerate() {
            if stopped[fi] {
                continue;
            }
            for &slot in &finger.active {
                q_work[slot] = (q_work[slot] + advance).min(limits[slot][1]);
            }
        }
    }

    // Fingertip contacts and their surface normals at the closed state.
    let poses = chain.fk_full(&q_work)?;
    let mut normals = Vec::new();
    for finger in &fingers {
        let mut best: Option<(f64, Point3<f64>)> = None;
        let pose = &poses[finger.tip];
        for v in &chain.links[finger.tip].vertices {
            let p = pose.apply(&Point3::new(v[0], v[1], v[2]));
            let d = scene.eval(&p).abs();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, p));
            }
        }
        if let Some((d, p)) = best {
            if d < CONTACT_TOL {
                let g = scene.gradient(&p);
                if g.norm() > 1e-9 {
                    normals.push(g.normalize());
                }
            }
        }
    }
    let mut best_normal_dot = 1.0_f64;
    for i in 0..normals.len() {
        for j in i + 1..normals.len() {
            best_normal_dot = best_normal_dot.min(normals[i].dot(&normals[j]));
        }
    }

    let success =
        preshape_clear && normals.len() >= 2 && best_normal_dot <= ANTIPODAL_DOT_MAX;
    Ok(GraspLabel {
        success,
        preshape_clear,
        fingertip_contacts: normals.len(),
        best_normal_dot,
        closed: q_work,
    })
}

/// Palm standoff at which the sampled preshape's synergy close lands an
/// opposing fingertip pair on the target surface. The close sweep is
/// simulated kinematically (no scene): each fingertip's crossing of a ring
/// around the approach axis gives the depth at which that finger meets the
/// body, and the best depth-matched pair of fingers on opposite sides of
/// the palm fixes where the body center should sit. Falls back to parking
/// the body just past the preshape's deepest vertex when no opposed pair
/// crosses, which yields a near-miss candidate rather than an error; the
/// returned flag is true when a pinchable pair fixed the standoff.
///
/// `width` is the body's half-width across the pinch axis and `depth` its
/// center distance along the approach; both in meters.
fn plan_standoff(
    chain: &KinematicChain,
    q_h: &[f64],
    width: f64,
    depth: f64,
) -> Result<(f64, bool)> {
    const SWEEP_STEP: f64 = 0.025;
    const SWEEP_MAX: f64 = 2.0;
    let fingers = finger_layout(chain)?;
    if fingers.is_empty() {
        return Err(Error::ChainDefinition("chain has no fingertips".into()));
    }
    let limits = chain.slot_limits();
    let palm_li = chain.link_index(&chain.palm)?;
    // Rings around the approach axis: a finger must start outside the clear
    // ring (so preshape corners cannot penetrate), and its crossing depth is
    // read where the tip grazes the surface (touch ring), falling back to an
    // outer ring for preshapes that cannot curl that deep. Reading the depth
    // right at the surface matters for flat bodies, whose contact window
    // along the approach is only as deep as the face.
    let touch = width.max(0.015) + 0.003;
    let outer = touch + 0.012;
    let clear = touch + 0.004;

    // Palm-local mount direction per finger, for recognizing opposed pairs.
    let mut mounts = Vec::with_capacity(fingers.len());
    for finger in &fingers {
        let root = *finger.links.last().expect("finger has links");
        let joint = chain
            .joints
            .iter()
            .find(|j| chain.link_index(&j.child).ok() == Some(root))
            .ok_or_else(|| Error::ChainDefinition("finger root has no joint".into()))?;
        let m = joint.origin.translation;
        let planar = Vector3::new(m.x, m.y, 0.0);
        mounts.push(if planar.norm() > 1e-9 {
            planar.normalize()
        } else {
            Vector3::zeros()
        });
    }

    let base = JointConfig {
        q_a: vec![0.0; chain.n_arm()],
        q_h: q_h.to_vec(),
    }
    .full(chain)?;
    let mut cross_touch: Vec<Option<f64>> = vec![None; fingers.len()];
    let mut cross_outer: Vec<Option<f64>> = vec![None; fingers.len()];
    let mut started_clear: Vec<bool> = vec![false; fingers.len()];
    let mut deepest = 0.0_f64;
    let steps = (SWEEP_MAX / SWEEP_STEP) as usize;
    for s in 0..=steps {
        let t = s as f64 * SWEEP_STEP;
        let mut q = base.clone();
        for finger in &fingers {
            for &slot in &finger.active {
                q[slot] = (q[slot] + t).min(limits[slot][1]);
            }
        }
        let poses = chain.fk_full(&q)?;
        let palm_inv = poses[palm_li].inverse();
        for (fi, finger) in fingers.iter().enumerate() {
            if s == 0 {
                for &li in &finger.links {
                    let local = palm_inv * poses[li];
                    for v in &chain.links[li].vertices {
                        deepest = deepest.max(local.apply(&Point3::from(*v)).z);
                    }
                }
            }
            let far_z = chain.links[finger.tip]
                .vertices
                .iter()
                .map(|v| v[2])
                .fold(0.0_f64, f64::max);
            let p = (palm_inv * poses[finger.tip]).apply(&Point3::new(0.0, 0.0, far_z));
            let rad = (p.x * p.x + p.y * p.y).sqrt();
            if s == 0 {
                started_clear[fi] = rad > clear;
            }
            if started_clear[fi] {
                if cross_outer[fi].is_none() && rad <= outer {
                    cross_outer[fi] = Some(p.z);
                }
                if cross_touch[fi].is_none() && rad <= touch {
                    cross_touch[fi] = Some(p.z);
                }
            }
        }
    }

    let pair_depth = |cross: &[Option<f64>]| -> Option<f64> {
        let mut best = None;
        let mut best_split = f64::INFINITY;
        for i in 0..fingers.len() {
            for j in i + 1..fingers.len() {
                if mounts[i].dot(&mounts[j]) > -0.9 {
                    continue;
                }
                let (Some(zi), Some(zj)) = (cross[i], cross[j]) else {
                    continue;
                };
                // A pair whose crossing depths disagree cannot both land in
                // the contact band; treat it like no pair at all.
                let split = (zi - zj).abs();
                if split < best_split && split <= 0.02 {
                    best_split = split;
                    best = Some(0.5 * (zi + zj));
                }
            }
        }
        best
    };
    let center_depth = pair_depth(&cross_touch).or_else(|| pair_depth(&cross_outer));
    // No pinchable pair: park the body just past the preshape's deepest
    // vertex so the candidate is an honest near-miss, not a penetration.
    let pinched = center_depth.is_some();
    let center_depth = center_depth.unwrap_or(deepest + 0.004 + depth);
    Ok((center_depth - depth, pinched))
}

/// Unit palm-plane directions of opposed finger-mount pairs; the axes a
/// pinch can close across. Falls back to the palm x-axis for hands without
/// an opposed pair.
fn pinch_axes(chain: &KinematicChain) -> Result<Vec<Vector3<f64>>> {
    let fingers = finger_layout(chain)?;
    let mut mounts = Vec::with_capacity(fingers.len());
    for finger in &fingers {
        let root = *finger.links.last().expect("finger has links");
        let joint = chain
            .joints
            .iter()
            .find(|j| chain.link_index(&j.child).ok() == Some(root))
            .ok_or_else(|| Error::ChainDefinition("finger root has no joint".into()))?;
        let m = joint.origin.translation;
        let planar = Vector3::new(m.x, m.y, 0.0);
        if planar.norm() > 1e-9 {
            mounts.push(planar.normalize());
        }
    }
    let mut axes: Vec<Vector3<f64>> = Vec::new();
    for i in 0..mounts.len() {
        for j in i + 1..mounts.len() {
            if mounts[i].dot(&mounts[j]) < -0.9
                && !axes.iter().any(|a| a.dot(&mounts[i]).abs() > 0.99)
            {
                axes.push(mounts[i]);
            }
        }
    }
    if axes.is_empty() {
        axes.push(Vector3::x());
    }
    Ok(axes)
}

/// Half-width of the body around `center` along `axis`, by marching the
/// scene SDF outward in both directions. Returns `fallback` when `center`
/// is not inside the scene or no surface is found within reach.
fn pinch_half_width(
    scene: &PrimitiveScene,
    center: &Point3<f64>,
    axis: &Vector3<f64>,
    fallback: f64,
) -> f64 {
    const STEP: f64 = 0.005;
    const REACH: f64 = 0.12;
    if scene.eval(center) > 0.0 {
        return fallback;
    }
    let mut worst = 0.0_f64;
    for dir in [1.0, -1.0] {
        let mut inside = 0.0;
        let mut hit = None;
        let steps = (REACH / STEP) as usize;
        for i in 1..=steps {
            let t = i as f64 * STEP;
            if scene.eval(&(center + axis * (t * dir))) > 0.0 {
                let mut lo = inside;
                let mut hi = t;
                for _ in 0..20 {
                    let mid = 0.5 * (lo + hi);
                    if scene.eval(&(center + axis * (mid * dir))) > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hit = Some(0.5 * (lo + hi));
                break;
            }
            inside = t;
        }
        match hit {
            Some(w) => worst = worst.max(w),
            None => return fallback,
        }
    }
    worst
}

/// Samples labeled grasp candidates around every scene. Palm poses sit along
/// surface normals (roll randomized about the approach axis) at a standoff
/// sized so the sampled preshape's fingertip cage lands around the object
/// body, and are reached through IK; unreachable draws are retried.
/// Deterministic per seed: each scene owns RNG stream `scene index` of
/// `seed`.
pub fn generate_dataset(
    scenes: &[PrimitiveScene],
    chain: &KinematicChain,
    per_scene: u32,
    seed: u64,
) -> Result<GraspDataset> {
    if scenes.is_empty() {
        return Err(Error::EmptyInput("scene list".into()));
    }
    if per_scene == 0 {
        return Err(Error::InvalidArgument(
            "per_scene must be at least 1".into(),
        ));
    }
    let intr = low_res_intrinsics();
    let axes = pinch_axes(chain)?;
    let mut observations = Vec::with_capacity(scenes.len());
    let mut scene_tags = Vec::with_capacity(scenes.len());
    let mut samples = Vec::new();
    for (si, scene) in scenes.iter().enumerate() {
        let tag = format!("scene-{si:03}");
        let cloud = observe_scene(scene, &intr, 0.0, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(si as u64);
        let mut accepted = 0u32;
        let mut attempts = 0usize;
        while accepted < per_scene {
            attempts += 1;
            if attempts > ATTEMPTS_PER_SAMPLE * per_scene as usize {
                return Err(Error::Degenerate(format!(
                    "scene {si} produced {accepted}/{per_scene} samples in {attempts} attempts; \
                     is it within the arm's reach?"
                )));
            }
            let surface = scene.sample_surface(1, &mut rng)?[0];
            let normal = scene.gradient(&surface);
            if normal.norm() < 1e-9 {
                continue;
            }
            let normal = normal.normalize();
            let mut q_h = vec![0.0; chain.n_hand()];
            for slot in chain.active_slots() {
                q_h[slot - chain.n_arm()] =
                    rng.random_range(PRESHAPE_RANGE[0]..PRESHAPE_RANGE[1]);
            }
            let approach_dir = -normal;
            // Depth from the surface point to the scene's bulk along the
            // approach; the body the close sweep is aimed at is assumed to
            // be centered this deep behind the surface point.
            let depth = (scene.aabb()?.center() - surface)
                .dot(&approach_dir)
                .clamp(0.01, 0.08);
            let align = UnitQuaternion::rotation_between(&Vector3::z(), &approach_dir)
                .unwrap_or_else(|| {
                    UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI)
                });
            // Of a few candidate rolls, pinch across the narrowest body
            // width; blind rolls straddle elongated bodies lengthwise.
            let body_center = surface + approach_dir * depth;
            let mut width = f64::INFINITY;
            let mut roll = 0.0;
            for _ in 0..ROLL_CANDIDATES {
                let cand = rng.random_range(0.0..std::f64::consts::TAU);
                let rot = align * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), cand);
                let mut w = f64::INFINITY;
                for axis in &axes {
                    let u = rot * axis;
                    w = w.min(pinch_half_width(scene, &body_center, &u, depth));
                }
                if w < width || width.is_infinite() {
                    width = w;
                    roll = cand;
                }
            }
            if !width.is_finite() {
                width = depth;
            }
            let jitter = rng.random_range(STANDOFF_JITTER[0]..STANDOFF_JITTER[1]);
            let (planned, _) = plan_standoff(chain, &q_h, width, depth)?;
            let rotation = align * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), roll);
            let mut chosen = None;
            for offset in STANDOFF_SCAN {
                let standoff = (planned + jitter + offset)
                    .clamp(STANDOFF_LIMITS[0], STANDOFF_LIMITS[1]);
                let target =
                    RigidTransform::new(rotation, (surface + normal * standoff).coords);
                let Ok(q_a) = chain.ik_palm(&target, f64::NEG_INFINITY, &ARM_SEED) else {
                    continue;
                };
                let q = JointConfig {
                    q_a,
                    q_h: q_h.clone(),
                };
                let label = label_grasp(scene, chain, &q)?;
                if label || chosen.is_none() {
                    chosen = Some((q, label));
                }
                if label {
                    break;
                }
            }
            let Some((q, label)) = chosen else {
                continue;
            };
            let config = make_grasp_config(chain, &q, &cloud.frame, &tag)?;
            let approach = if approach_dir.z <= -OVERHEAD_MIN_DOWNWARD {
                Approach::Overhead
            } else {
                Approach::Side
            };
            samples.push(GraspSample {
                scene: si,
                config,
                label,
                approach,
            });
            accepted += 1;
        }
        observations.push(cloud);
        scene_tags.push(tag);
    }
    let dataset = GraspDataset {
        observations,
        scene_tags,
        samples,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Tabletop scenes within the default robot's reach: single primitives of
/// each kind plus one two-object scene, resting on a nominal z = 0.25 plane.
pub fn default_scenes() -> Vec<PrimitiveScene> {
    let place = |x: f64, y: f64, z: f64| RigidTransform::from_translation(Vector3::new(x, y, z));
    vec![
        PrimitiveScene::single(
            Primitive::Sphere { radius: 0.035 },
            place(0.50, 0.00, 0.285),
            "sphere-small",
        )
        .expect("static scene"),
        PrimitiveScene::single(
            Primitive::Sphere { radius: 0.045 },
            place(0.55, 0.12, 0.30),
            "sphere-large",
        )
        .expect("static scene"),
        PrimitiveScene::single(
            Primitive::Box {
                half_extents: [0.036, 0.04, 0.028],
            },
            RigidTransform::new(
                UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.4),
                Vector3::new(0.45, -0.12, 0.278),
            ),
            "box-upright",
        )
        .expect("static scene"),
        PrimitiveScene::single(
            Primitive::Cylinder {
                radius: 0.035,
                half_height: 0.045,
            },
            place(0.50, 0.14, 0.295),
            "cylinder-upright",
        )
        .expect("static scene"),
        PrimitiveScene::single(
            Primitive::Capsule {
                radius: 0.032,
                half_height: 0.035,
            },
            RigidTransform::new(
                UnitQuaternion::from_axis_angle(&Vector3::y_axis(), std::f64::consts::FRAC_PI_2),
                Vector3::new(0.52, -0.04, 0.282),
            ),
            "capsule-lying",
        )
        .expect("static scene"),
        PrimitiveScene::new(vec![
            SceneObject {
                primitive: Primitive::Sphere { radius: 0.036 },
                pose: place(0.47, 0.06, 0.286),
                tag: "clutter-sphere".into(),
            },
            SceneObject {
                primitive: Primitive::Box {
                    half_extents: [0.032, 0.036, 0.03],
                },
                pose: place(0.52, -0.07, 0.28),
                tag: "clutter-box".into(),
            },
        ])
        .expect("static scene"),
    ]
}
