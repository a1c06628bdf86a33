//! Grasp configurations, the grasp-success classifier over the shared cloud
//! embedding, the two-component Gaussian-mixture grasp prior, and the
//! combined log score that the planner minimizes.
//!
//! A grasp configuration is the 8 active hand joints plus the palm pose as a
//! 6-vector in the observation's object frame; its flattened form is the
//! 14-vector [q_h_active, palm]. The classifier consumes [embedding, grasp
//! 14-vector, object size scalar] and ends in a sigmoid. The prior is fit by
//! EM with components labeled side/overhead from data-generation metadata.

use crate::camera::{NormalizedCloud, NormalizedFrame};
use crate::error::{Error, Result};
use crate::kinematics::{JointConfig, KinematicChain};
use crate::nn::{
    adam_step, bce_loss, AdamState, Activation, DenseNetwork, NetworkGradient, PROB_CLAMP,
};
use crate::pointsdf::{canonical_points, embed_with, max_pool, CloudEmbedding, PointSdfModel};
use crate::transform::RigidTransform;
use nalgebra::{DVector, Point3, Quaternion, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const GRASP_DIMS: usize = 14;
pub const DEFAULT_ALPHA: f64 = 1.0;
const GMM_COMPONENTS: usize = 2;
const GMM_TOL: f64 = 1e-8;
const GMM_MAX_ITERS: usize = 500;
const VARIANCE_FLOOR: f64 = 1e-10;

/// Active hand joints plus the palm pose in the observation's object frame
/// (centroid-anchored, metric units). `tag` names the observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspConfig {
    pub q_h_active: [f64; 8],
    pub palm: [f64; 6],
    pub frame: NormalizedFrame,
    pub tag: String,
}

impl GraspConfig {
    /// Flattened [q_h_active, palm] vector shared by the classifier input
    /// layout and the prior.
    pub fn vec14(&self) -> [f64; GRASP_DIMS] {
        let mut v = [0.0; GRASP_DIMS];
        v[..8].copy_from_slice(&self.q_h_active);
        v[8..].copy_from_slice(&self.palm);
        v
    }

    pub fn from_vec14(v: &[f64; GRASP_DIMS], frame: NormalizedFrame, tag: &str) -> Self {
        let mut q_h_active = [0.0; 8];
        let mut palm = [0.0; 6];
        q_h_active.copy_from_slice(&v[..8]);
        palm.copy_from_slice(&v[8..]);
        Self {
            q_h_active,
            palm,
            frame,
            tag: tag.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vec14().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grasp config".into()));
        }
        Ok(())
    }

    /// Palm pose in the object frame as a transform.
    pub fn palm_transform(&self) -> RigidTransform {
        RigidTransform::from_vec6(&self.palm)
    }
}

/// Object frame of an observation: the normalization centroid and
/// orientation, at metric scale.
fn object_transform(frame: &NormalizedFrame) -> RigidTransform {
    let [w, x, y, z] = frame.orientation;
    RigidTransform::new(
        UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)),
        nalgebra::Vector3::from(frame.centroid),
    )
}

/// Extracts the active hand joints and expresses the palm pose in the
/// observation's object frame.
pub fn make_grasp_config(
    chain: &KinematicChain,
    q: &JointConfig,
    frame: &NormalizedFrame,
    tag: &str,
) -> Result<GraspConfig> {
    let full = q.full(chain)?;
    let active = chain.active_slots();
    if active.len() != 8 {
        return Err(Error::ChainDefinition(format!(
            "expected 8 active hand joints, chain has {}",
            active.len()
        )));
    }
    let mut q_h_active = [0.0; 8];
    for (i, slot) in active.iter().enumerate() {
        q_h_active[i] = full[*slot];
    }
    let palm_world = chain.palm_pose(&q.q_a)?;
    let palm_obj = object_transform(frame).inverse() * palm_world;
    let config = GraspConfig {
        q_h_active,
        palm: palm_obj.to_vec6(),
        frame: *frame,
        tag: tag.to_string(),
    };
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessMode {
    Scratch,
    Fixed,
}

/// Success classifier: a per-point encoder shared with the reconstruction
/// model feeding a sigmoid head over [embedding, 14-dim grasp, size].
#[derive(Debug, Clone)]
pub struct GraspSuccessModel {
    pub encoder: DenseNetwork,
    pub head: DenseNetwork,
    pub embedding_width: usize,
    pub max_points: usize,
    pub mode: SuccessMode,
}

pub const DEFAULT_HEAD_HIDDEN: [usize; 2] = [256, 128];

impl GraspSuccessModel {
    pub fn new(
        encoder: DenseNetwork,
        max_points: usize,
        head_hidden: &[usize],
        mode: SuccessMode,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let embedding_width = encoder.output_dim();
        let mut widths = vec![embedding_width + GRASP_DIMS + 1];
        widths.extend(head_hidden);
        widths.push(1);
        let mut acts = vec![Activation::Tanh; widths.len() - 2];
        acts.push(Activation::Sigmoid);
        let head = DenseNetwork::new(&widths, &acts, rng)?;
        Ok(Self {
            encoder,
            head,
            embedding_width,
            max_points,
            mode,
        })
    }

    /// Fresh random encoder of the same shape as `reference`; everything
    /// trains under the grasp loss.
    pub fn scratch_from(
        reference: &PointSdfModel,
        head_hidden: &[usize],
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let widths = reference.encoder.layer_widths();
        let acts = reference.encoder.activations();
        let encoder = DenseNetwork::new(&widths, &acts, rng)?;
        Self::new(
            encoder,
            reference.max_points,
            head_hidden,
            SuccessMode::Scratch,
            rng,
        )
    }

    /// Reuses the trained reconstruction encoder; callers freeze it during
    /// training.
    pub fn fixed_from(
        reference: &PointSdfModel,
        head_hidden: &[usize],
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Self::new(
            reference.encoder.clone(),
            reference.max_points,
            head_hidden,
            SuccessMode::Fixed,
            rng,
        )
    }

    pub fn embed(&self, cloud: &NormalizedCloud) -> Result<CloudEmbedding> {
        embed_with(&self.encoder, self.max_points, cloud)
    }

    fn head_input(&self, emb: &CloudEmbedding, size: f64, g: &GraspConfig) -> DVector<f64> {
        let e = self.embedding_width;
        let mut input = DVector::zeros(e + GRASP_DIMS + 1);
        input.as_mut_slice()[..e].copy_from_slice(&emb.vector);
        input.as_mut_slice()[e..e + GRASP_DIMS].copy_from_slice(&g.vec14());
        input[e + GRASP_DIMS] = size;
        input
    }

    /// Success probability in (0, 1), clamped away from the exact endpoints.
    pub fn predict_success(
        &self,
        emb: &CloudEmbedding,
        size: f64,
        g: &GraspConfig,
    ) -> Result<f64> {
        g.validate()?;
        if g.frame != emb.frame {
            return Err(Error::InvalidArgument(
                "grasp config frame does not match embedding frame".into(),
            ));
        }
        let trace = self.head.forward_trace(self.head_input(emb, size, g))?;
        Ok(trace.output()[0].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
    }

    /// Binary cross-entropy training with an internal deterministic
    /// train/test split; F1 is computed on the held-out part at threshold
    /// 0.5. With `freeze_encoder` the encoder is left bitwise unchanged.
    pub fn train_success(
        &mut self,
        data: &SuccessDataset,
        hyper: &SuccessHyper,
        freeze_encoder: bool,
    ) -> Result<SuccessReport> {
        data.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);

        let mut indices: Vec<usize> = (0..data.grasps.len()).collect();
        shuffle(&mut indices, &mut rng);
        let n_test = ((data.grasps.len() as f64) * hyper.test_fraction).round() as usize;
        let n_test = n_test.min(data.grasps.len().saturating_sub(2));
        let (test_idx, train_idx) = indices.split_at(n_test);
        let has = |idx: &[usize], label: bool| {
            idx.iter().any(|&i| data.grasps[i].label == label)
        };
        if !has(train_idx, true) || !has(train_idx, false) {
            return Err(Error::Degenerate(
                "training split needs both success and failure labels".into(),
            ));
        }

        // Group training grasps by cloud so each batch shares one embedding.
        let mut by_cloud: Vec<Vec<usize>> = vec![Vec::new(); data.clouds.len()];
        for &gi in train_idx {
            by_cloud[data.grasps[gi].cloud].push(gi);
        }
        let canonical: Vec<Vec<Point3<f64>>> = data
            .clouds
            .iter()
            .map(|c| canonical_points(c, self.max_points))
            .collect::<Result<_>>()?;
        let sizes: Vec<f64> = data.clouds.iter().map(|c| c.metric_bbox_diagonal()).collect();

        let mut enc_state = AdamState::new(&self.encoder);
        let mut head_state = AdamState::new(&self.head);
        let mut epoch_bce = Vec::with_capacity(hyper.epochs);
        let mut cloud_order: Vec<usize> = (0..data.clouds.len())
            .filter(|&c| !by_cloud[c].is_empty())
            .collect();
        let batch = hyper.batch_size.max(1);
        let n_train: usize = by_cloud.iter().map(|v| v.len()).sum();

        for epoch in 0..hyper.epochs {
            shuffle(&mut cloud_order, &mut rng);
            let mut loss_sum = 0.0;
            for &ci in &cloud_order {
                let mut grasp_order = by_cloud[ci].clone();
                shuffle(&mut grasp_order, &mut rng);
                for chunk in grasp_order.chunks(batch) {
                    loss_sum += self.train_batch(
                        data,
                        &canonical[ci],
                        sizes[ci],
                        chunk,
                        hyper.learning_rate,
                        freeze_encoder,
                        &mut enc_state,
                        &mut head_state,
                    )?;
                }
            }
            let mean = loss_sum / n_train as f64;
            if !mean.is_finite() {
                return Err(Error::TrainingDiverged { epoch, loss: mean });
            }
            epoch_bce.push(mean);
        }

        // Held-out evaluation at threshold 0.5.
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for &gi in test_idx {
            let grasp = &data.grasps[gi];
            let emb = self.embed(&data.clouds[grasp.cloud])?;
            let p = self.predict_success(&emb, sizes[grasp.cloud], &grasp.config)?;
            let predicted = p >= 0.5;
            match (predicted, grasp.label) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let f1 = if 2 * tp + fp + fn_ == 0 {
            0.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        };

        Ok(SuccessReport {
            final_bce: epoch_bce.last().copied().unwrap_or(f64::NAN),
            epoch_bce,
            f1,
            train_size: n_train,
            test_size: test_idx.len(),
            seed: hyper.seed,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn train_batch(
        &mut self,
        data: &SuccessDataset,
        pts: &[Point3<f64>],
        size: f64,
        grasp_idx: &[usize],
        lr: f64,
        freeze_encoder: bool,
        enc_state: &mut AdamState,
        head_state: &mut AdamState,
    ) -> Result<f64> {
        let e = self.embedding_width;
        let traces: Vec<crate::nn::ForwardTrace> = pts
            .iter()
            .map(|p| {
                self.encoder
                    .forward_trace(DVector::from_column_slice(&[p.x, p.y, p.z]))
            })
            .collect::<Result<_>>()?;
        let outputs: Vec<DVector<f64>> = traces.iter().map(|t| t.output().clone()).collect();
        let (vector, argmax) = max_pool(&outputs, e);

        let mut head_grads = NetworkGradient::zeros_like(&self.head);
        let mut emb_upstream = DVector::<f64>::zeros(e);
        let mut loss_sum = 0.0;
        let inv = 1.0 / grasp_idx.len() as f64;
        let mut input = DVector::zeros(e + GRASP_DIMS + 1);
        input.as_mut_slice()[..e].copy_from_slice(&vector);
        input[e + GRASP_DIMS] = size;
        for &gi in grasp_idx {
            let grasp = &data.grasps[gi];
            input.as_mut_slice()[e..e + GRASP_DIMS].copy_from_slice(&grasp.config.vec14());
            let trace = self.head.forward_trace(input.clone())?;
            let prob = trace.output()[0];
            let label = if grasp.label { 1.0 } else { 0.0 };
            let (loss, dprob) = bce_loss(prob, label)?;
            loss_sum += loss;
            let upstream = DVector::from_element(1, dprob * inv);
            let (grads, input_grad) = self.head.backward_trace(&trace, &upstream)?;
            head_grads.add_assign(&grads);
            if !freeze_encoder {
                emb_upstream += input_grad.rows(0, e);
            }
        }

        if !freeze_encoder {
            let mut enc_grads = NetworkGradient::zeros_like(&self.encoder);
            let mut per_point: Vec<Option<DVector<f64>>> = vec![None; pts.len()];
            for d in 0..e {
                let g = emb_upstream[d];
                if g == 0.0 {
                    continue;
                }
                per_point[argmax[d]].get_or_insert_with(|| DVector::zeros(e))[d] += g;
            }
            for (pi, upstream) in per_point.into_iter().enumerate() {
                if let Some(upstream) = upstream {
                    let (grads, _) = self.encoder.backward_trace(&traces[pi], &upstream)?;
                    enc_grads.add_assign(&grads);
                }
            }
            adam_step(&mut self.encoder, &enc_grads, enc_state, lr)?;
        }
        adam_step(&mut self.head, &head_grads, head_state, lr)?;
        Ok(loss_sum)
    }

    pub fn save(&self, manifest_path: &Path) -> Result<()> {
        let stem = manifest_path
            .file_stem()
            .ok_or_else(|| Error::InvalidArgument("model path has no file name".into()))?
            .to_string_lossy()
            .to_string();
        let encoder_file = format!("{stem}.encoder.bin");
        let head_file = format!("{stem}.head.bin");
        let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        self.encoder.save(&dir.join(&encoder_file))?;
        self.head.save(&dir.join(&head_file))?;
        let manifest = SuccessManifest {
            embedding_width: self.embedding_width,
            max_points: self.max_points,
            mode: self.mode,
            encoder: encoder_file,
            head: head_file,
        };
        std::fs::write(manifest_path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest: SuccessManifest =
            serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
        let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        let encoder = DenseNetwork::load(&dir.join(&manifest.encoder))?;
        let head = DenseNetwork::load(&dir.join(&manifest.head))?;
        if head.input_dim() != manifest.embedding_width + GRASP_DIMS + 1 {
            return Err(Error::ModelFormat(format!(
                "head fan-in {} does not match embedding width {} + {} + 1",
                head.input_dim(),
                manifest.embedding_width,
                GRASP_DIMS
            )));
        }
        Ok(Self {
            encoder,
            head,
            embedding_width: manifest.embedding_width,
            max_points: manifest.max_points,
            mode: manifest.mode,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SuccessManifest {
    embedding_width: usize,
    max_points: usize,
    mode: SuccessMode,
    encoder: String,
    head: String,
}

/// Grasp dataset for classifier training: clouds stored once and referenced
/// by index from grasp records.
#[derive(Debug, Clone)]
pub struct SuccessDataset {
    pub clouds: Vec<NormalizedCloud>,
    pub grasps: Vec<SuccessExample>,
}

#[derive(Debug, Clone)]
pub struct SuccessExample {
    pub cloud: usize,
    pub config: GraspConfig,
    pub label: bool,
}

impl SuccessDataset {
    pub fn validate(&self) -> Result<()> {
        if self.grasps.len() < 4 {
            return Err(Error::EmptyInput("success dataset".into()));
        }
        for g in &self.grasps {
            if g.cloud >= self.clouds.len() {
                return Err(Error::InvalidArgument(format!(
                    "grasp references cloud {} of {}",
                    g.cloud,
                    self.clouds.len()
                )));
            }
            if g.config.frame != self.clouds[g.cloud].frame {
                return Err(Error::InvalidArgument(
                    "grasp config frame does not match its cloud".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuccessHyper {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SuccessHyper {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 1e-3,
            batch_size: 32,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub epoch_bce: Vec<f64>,
    pub final_bce: f64,
    pub f1: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

fn shuffle<T>(items: &mut [T], rng: &mut impl Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    Side,
    Overhead,
}

/// Two-component diagonal Gaussian mixture over flattened grasp vectors.
/// Components carry the approach label they were initialized from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmPrior {
    pub weights: [f64; GMM_COMPONENTS],
    pub means: [[f64; GRASP_DIMS]; GMM_COMPONENTS],
    pub variances: [[f64; GRASP_DIMS]; GMM_COMPONENTS],
    pub labels: [Approach; GMM_COMPONENTS],
    pub floored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFitReport {
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub floored: usize,
}

fn log_normal_diag(x: &[f64; GRASP_DIMS], mean: &[f64; GRASP_DIMS], var: &[f64; GRASP_DIMS]) -> f64 {
    let mut lp = 0.0;
    for d in 0..GRASP_DIMS {
        let diff = x[d] - mean[d];
        lp += -0.5 * (2.0 * std::f64::consts::PI * var[d]).ln() - diff * diff / (2.0 * var[d]);
    }
    lp
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl GmmPrior {
    /// EM fit initialized from the labeled approach groups; after
    /// convergence components are relabeled by responsibility majority so a
    /// named component can be sampled later.
    pub fn fit(configs: &[GraspConfig], tags: &[Approach]) -> Result<(Self, GmmFitReport)> {
        if configs.len() != tags.len() {
            return Err(Error::DimensionMismatch {
                expected: configs.len(),
                got: tags.len(),
                context: "approach tags",
            });
        }
        if configs.len() < 2 * GMM_COMPONENTS {
            return Err(Error::EmptyInput(format!(
                "gmm fit needs at least {} samples, got {}",
                2 * GMM_COMPONENTS,
                configs.len()
            )));
        }
        let xs: Vec<[f64; GRASP_DIMS]> = configs.iter().map(|c| c.vec14()).collect();
        for x in &xs {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("grasp config in gmm fit".into()));
            }
        }
        let n = xs.len();

        // Initialization from the labeled groups; an absent group falls back
        // to a perturbed copy of the global statistics.
        let mut floored = 0usize;
        let group_stats = |tag: Approach| -> Option<([f64; GRASP_DIMS], [f64; GRASP_DIMS], f64)> {
            let members: Vec<&[f64; GRASP_DIMS]> = xs
                .iter()
                .zip(tags)
                .filter(|(_, t)| **t == tag)
                .map(|(x, _)| x)
                .collect();
            if members.is_empty() {
                return None;
            }
            let mut mean = [0.0; GRASP_DIMS];
            for x in &members {
                for d in 0..GRASP_DIMS {
                    mean[d] += x[d];
                }
            }
            for m in &mut mean {
                *m /= members.len() as f64;
            }
            let mut var = [0.0; GRASP_DIMS];
            for x in &members {
                for d in 0..GRASP_DIMS {
                    var[d] += (x[d] - mean[d]).powi(2);
                }
            }
            for v in &mut var {
                *v = (*v / members.len() as f64).max(VARIANCE_FLOOR);
            }
            Some((mean, var, members.len() as f64 / n as f64))
        };
        let side = group_stats(Approach::Side);
        let overhead = group_stats(Approach::Overhead);
        let (mut means, mut variances, mut weights) = match (side, overhead) {
            (Some(s), Some(o)) => ([s.0, o.0], [s.1, o.1], [s.2, o.2]),
            _ => {
                return Err(Error::Degenerate(
                    "gmm fit needs both side and overhead samples".into(),
                ))
            }
        };
        let mut labels = [Approach::Side, Approach::Overhead];

        let mut log_likelihood = Vec::new();
        let mut resp = vec![[0.0; GMM_COMPONENTS]; n];
        let mut iterations = 0;
        for _ in 0..GMM_MAX_ITERS {
            iterations += 1;
            // E step.
            let mut ll = 0.0;
            for (i, x) in xs.iter().enumerate() {
                let lp0 = weights[0].ln() + log_normal_diag(x, &means[0], &variances[0]);
                let lp1 = weights[1].ln() + log_normal_diag(x, &means[1], &variances[1]);
                let norm = log_sum_exp(lp0, lp1);
                resp[i][0] = (lp0 - norm).exp();
                resp[i][1] = (lp1 - norm).exp();
                ll += norm;
            }
            let converged = log_likelihood
                .last()
                .is_some_and(|prev: &f64| (ll - prev).abs() < GMM_TOL);
            log_likelihood.push(ll);
            if converged {
                break;
            }
            // M step.
            for c in 0..GMM_COMPONENTS {
                let nk: f64 = resp.iter().map(|r| r[c]).sum();
                weights[c] = (nk / n as f64).max(1e-12);
                let mut mean = [0.0; GRASP_DIMS];
                for (i, x) in xs.iter().enumerate() {
                    for d in 0..GRASP_DIMS {
                        mean[d] += resp[i][c] * x[d];
                    }
                }
                for m in &mut mean {
                    *m /= nk.max(1e-12);
                }
                let mut var = [0.0; GRASP_DIMS];
                for (i, x) in xs.iter().enumerate() {
                    for d in 0..GRASP_DIMS {
                        var[d] += resp[i][c] * (x[d] - mean[d]).powi(2);
                    }
                }
                for v in &mut var {
                    *v /= nk.max(1e-12);
                    if *v < VARIANCE_FLOOR {
                        *v = VARIANCE_FLOOR;
                        floored += 1;
                    }
                }
                means[c] = mean;
                variances[c] = var;
            }
            let wsum = weights[0] + weights[1];
            weights[0] /= wsum;
            weights[1] /= wsum;
        }

        // Relabel by responsibility majority over the tagged samples.
        let mut side_resp = [0.0; GMM_COMPONENTS];
        for (i, tag) in tags.iter().enumerate() {
            if *tag == Approach::Side {
                side_resp[0] += resp[i][0];
                side_resp[1] += resp[i][1];
            }
        }
        if side_resp[1] > side_resp[0] {
            labels = [Approach::Overhead, Approach::Side];
        }

        let prior = Self {
            weights,
            means,
            variances,
            labels,
            floored,
        };
        let report = GmmFitReport {
            log_likelihood,
            iterations,
            floored,
        };
        Ok((prior, report))
    }

    pub fn component(&self, label: Approach) -> usize {
        if self.labels[0] == label {
            0
        } else {
            1
        }
    }

    /// Exact mixture log density of a flattened grasp vector.
    pub fn log_density(&self, x: &[f64; GRASP_DIMS]) -> f64 {
        let lp0 = self.weights[0].ln() + log_normal_diag(x, &self.means[0], &self.variances[0]);
        let lp1 = self.weights[1].ln() + log_normal_diag(x, &self.means[1], &self.variances[1]);
        log_sum_exp(lp0, lp1)
    }

    /// d log density / d x: responsibility-weighted Gaussian gradients.
    pub fn log_density_gradient(&self, x: &[f64; GRASP_DIMS]) -> [f64; GRASP_DIMS] {
        let lp0 = self.weights[0].ln() + log_normal_diag(x, &self.means[0], &self.variances[0]);
        let lp1 = self.weights[1].ln() + log_normal_diag(x, &self.means[1], &self.variances[1]);
        let norm = log_sum_exp(lp0, lp1);
        let r = [(lp0 - norm).exp(), (lp1 - norm).exp()];
        let mut grad = [0.0; GRASP_DIMS];
        for c in 0..GMM_COMPONENTS {
            for d in 0..GRASP_DIMS {
                grad[d] += r[c] * (self.means[c][d] - x[d]) / self.variances[c][d];
            }
        }
        grad
    }

    /// Draws a flattened grasp vector, from a named component when given.
    pub fn sample(&self, component: Option<Approach>, rng: &mut impl Rng) -> [f64; GRASP_DIMS] {
        let c = match component {
            Some(label) => self.component(label),
            None => {
                if rng.random_range(0.0..1.0) < self.weights[0] {
                    0
                } else {
                    1
                }
            }
        };
        let mut x = [0.0; GRASP_DIMS];
        for d in 0..GRASP_DIMS {
            let normal = Normal::new(self.means[c][d], self.variances[c][d].sqrt())
                .expect("floored variance");
            x[d] = normal.sample(rng);
        }
        x
    }

    pub fn sample_config(
        &self,
        component: Option<Approach>,
        frame: &NormalizedFrame,
        tag: &str,
        rng: &mut impl Rng,
    ) -> GraspConfig {
        GraspConfig::from_vec14(&self.sample(component, rng), *frame, tag)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let prior: Self = serde_json::from_str(text)?;
        for c in 0..GMM_COMPONENTS {
            if prior.weights[c] <= 0.0 {
                return Err(Error::InvalidArgument("gmm weight not positive".into()));
            }
            if prior.variances[c].iter().any(|v| *v < VARIANCE_FLOOR) {
                return Err(Error::InvalidArgument("gmm variance below floor".into()));
            }
        }
        Ok(prior)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// s = -log h - alpha * log g. Lower is better.
pub fn combined_score(h: f64, log_prior: f64, alpha: f64) -> f64 {
    -h.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln() - alpha * log_prior
}

pub fn grasp_score(
    model: &GraspSuccessModel,
    prior: &GmmPrior,
    emb: &CloudEmbedding,
    size: f64,
    g: &GraspConfig,
    alpha: f64,
) -> Result<f64> {
    if alpha < 0.0 {
        return Err(Error::InvalidArgument("alpha must be nonnegative".into()));
    }
    let h = model.predict_success(emb, size, g)?;
    Ok(combined_score(h, prior.log_density(&g.vec14()), alpha))
}

/// Score plus its gradient with respect to the flattened grasp vector,
/// combining head backpropagation with the analytic mixture gradient.
pub fn grasp_score_with_gradient(
    model: &GraspSuccessModel,
    prior: &GmmPrior,
    emb: &CloudEmbedding,
    size: f64,
    g: &GraspConfig,
    alpha: f64,
) -> Result<(f64, [f64; GRASP_DIMS])> {
    if alpha < 0.0 {
        return Err(Error::InvalidArgument("alpha must be nonnegative".into()));
    }
    g.validate()?;
    if g.frame != emb.frame {
        return Err(Error::InvalidArgument(
            "grasp config frame does not match embedding frame".into(),
        ));
    }
    let e = model.embedding_width;
    let trace = model.head.forward_trace(model.head_input(emb, size, g))?;
    let raw = trace.output()[0];
    let h = raw.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let x = g.vec14();
    let score = combined_score(h, prior.log_density(&x), alpha);

    // -log h term: zero slope inside the clamp band, -1/h otherwise.
    let dh = if raw > PROB_CLAMP && raw < 1.0 - PROB_CLAMP {
        -1.0 / raw
    } else {
        0.0
    };
    let upstream = DVector::from_element(1, dh);
    let (_, input_grad) = model.head.backward_trace(&trace, &upstream)?;
    let prior_grad = prior.log_density_gradient(&x);
    let mut grad = [0.0; GRASP_DIMS];
    for d in 0..GRASP_DIMS {
        grad[d] = input_grad[e + d] - alpha * prior_grad[d];
    }
    Ok((score, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::default_robot;
    use crate::pointsdf::PointSdfConfig;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn tiny_reference(seed: u64) -> PointSdfModel {
        let config = PointSdfConfig {
            embedding_width: 8,
            encoder_hidden: vec![16],
            decoder_hidden: vec![16],
            max_points: 64,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointSdfModel::new(&config, &mut rng).unwrap()
    }

    fn tiny_success(seed: u64) -> GraspSuccessModel {
        let reference = tiny_reference(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        GraspSuccessModel::scratch_from(&reference, &[16, 16], &mut rng).unwrap()
    }

    fn ball_cloud(n: usize, center: [f64; 3], seed: u64) -> NormalizedCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n)
            .map(|_| {
                Point3::new(
                    center[0] + rng.random_range(-0.3..0.3),
                    center[1] + rng.random_range(-0.3..0.3),
                    center[2] + rng.random_range(-0.3..0.3),
                )
            })
            .collect();
        NormalizedCloud {
            points,
            frame: NormalizedFrame::identity(),
        }
    }

    fn config_at(palm: [f64; 6], frame: NormalizedFrame) -> GraspConfig {
        GraspConfig {
            q_h_active: [0.3; 8],
            palm,
            frame,
            tag: "test".into(),
        }
    }

    #[test]
    fn zero_config_identity_frame_gives_nominal_palm() {
        let chain = default_robot();
        let q = JointConfig::zeros(&chain);
        let frame = NormalizedFrame::identity();
        let g = make_grasp_config(&chain, &q, &frame, "obj").unwrap();
        assert_eq!(g.q_h_active, [0.0; 8]);
        let nominal = chain.palm_pose(&q.q_a).unwrap().to_vec6();
        assert_eq!(g.palm, nominal);
    }

    #[test]
    fn distal_joints_do_not_affect_the_config() {
        let chain = default_robot();
        let mut qa = JointConfig::zeros(&chain);
        qa.q_a = vec![0.2, 0.4, -0.1, 0.6, 0.0, 0.3, 0.1];
        let mut qb = qa.clone();
        // Distal two joints of each finger occupy slots 2,3 per finger.
        for f in 0..4 {
            qb.q_h[4 * f + 2] = 0.9;
            qb.q_h[4 * f + 3] = 1.1;
        }
        let frame = NormalizedFrame::identity();
        let ga = make_grasp_config(&chain, &qa, &frame, "obj").unwrap();
        let gb = make_grasp_config(&chain, &qb, &frame, "obj").unwrap();
        assert_eq!(ga, gb);
    }

    #[test]
    fn palm_component_is_expressed_in_the_object_frame() {
        let chain = default_robot();
        let mut q = JointConfig::zeros(&chain);
        q.q_a = vec![0.3, 0.7, -0.4, 0.9, 0.2, -0.5, 0.6];
        let frame = NormalizedFrame {
            centroid: [0.4, -0.2, 0.7],
            scale: 2.0,
            orientation: [1.0, 0.0, 0.0, 0.0],
        };
        let g = make_grasp_config(&chain, &q, &frame, "obj").unwrap();
        let palm_world = chain.palm_pose(&q.q_a).unwrap();
        let expected =
            RigidTransform::from_translation(-Vector3::from(frame.centroid)) * palm_world;
        let got = g.palm_transform();
        assert!((got.translation - expected.translation).norm() < 1e-12);
        assert!(got.rotation.angle_to(&expected.rotation) < 1e-9);
    }

    #[test]
    fn zeroed_head_predicts_one_half() {
        let mut model = tiny_success(1);
        for layer in &mut model.head.layers {
            layer.weights.fill(0.0);
            layer.biases.fill(0.0);
        }
        let cloud = ball_cloud(20, [0.0; 3], 2);
        let emb = model.embed(&cloud).unwrap();
        let g = config_at([0.0; 6], cloud.frame);
        assert_eq!(model.predict_success(&emb, 0.5, &g).unwrap(), 0.5);
    }

    #[test]
    fn predictions_are_clamped_away_from_zero_and_one() {
        let model = tiny_success(3);
        let cloud = ball_cloud(20, [0.0; 3], 4);
        let emb = model.embed(&cloud).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let g = config_at(
                [
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                ],
                cloud.frame,
            );
            let p = model.predict_success(&emb, 1.0, &g).unwrap();
            assert!(p > 0.0 && p < 1.0);
            assert!(p >= PROB_CLAMP && p <= 1.0 - PROB_CLAMP);
        }
    }

    #[test]
    fn frame_mismatch_is_rejected() {
        let model = tiny_success(6);
        let cloud = ball_cloud(20, [0.0; 3], 7);
        let emb = model.embed(&cloud).unwrap();
        let other = NormalizedFrame {
            centroid: [1.0, 0.0, 0.0],
            scale: 1.0,
            orientation: [1.0, 0.0, 0.0, 0.0],
        };
        let g = config_at([0.0; 6], other);
        assert!(model.predict_success(&emb, 1.0, &g).is_err());
    }

    #[test]
    fn prediction_inherits_point_order_invariance() {
        let model = tiny_success(8);
        let cloud = ball_cloud(30, [0.0; 3], 9);
        let mut reversed = cloud.clone();
        reversed.points.reverse();
        let g = config_at([0.1, -0.2, 0.3, 0.0, 0.1, -0.1], cloud.frame);
        let pa = model
            .predict_success(&model.embed(&cloud).unwrap(), 1.0, &g)
            .unwrap();
        let pb = model
            .predict_success(&model.embed(&reversed).unwrap(), 1.0, &g)
            .unwrap();
        assert_eq!(pa, pb);
    }

    /// Labels depend linearly on one palm coordinate, so the head can
    /// separate them almost perfectly.
    fn separable_dataset(cloud_seed: u64, n: usize) -> SuccessDataset {
        let cloud = ball_cloud(25, [0.0; 3], cloud_seed);
        let mut rng = ChaCha8Rng::seed_from_u64(cloud_seed + 100);
        let frame = cloud.frame;
        let grasps = (0..n)
            .map(|_| {
                let z = rng.random_range(-1.0..1.0);
                let config = config_at([0.0, 0.0, z, 0.0, 0.0, 0.0], frame);
                SuccessExample {
                    cloud: 0,
                    config,
                    label: z > 0.0,
                }
            })
            .collect();
        SuccessDataset {
            clouds: vec![cloud],
            grasps,
        }
    }

    #[test]
    fn separable_dataset_reaches_high_f1() {
        let mut model = tiny_success(10);
        let data = separable_dataset(11, 400);
        let report = model
            .train_success(
                &data,
                &SuccessHyper {
                    epochs: 60,
                    learning_rate: 3e-3,
                    batch_size: 32,
                    test_fraction: 0.25,
                    seed: 12,
                },
                false,
            )
            .unwrap();
        assert!(report.f1 >= 0.95, "f1 {}", report.f1);
        assert!(report.final_bce < report.epoch_bce[0]);
    }

    #[test]
    fn trained_model_separates_held_out_labels() {
        let mut model = tiny_success(13);
        let data = separable_dataset(14, 300);
        model
            .train_success(
                &data,
                &SuccessHyper {
                    epochs: 40,
                    learning_rate: 3e-3,
                    batch_size: 32,
                    test_fraction: 0.2,
                    seed: 15,
                },
                false,
            )
            .unwrap();
        let emb = model.embed(&data.clouds[0]).unwrap();
        let size = data.clouds[0].metric_bbox_diagonal();
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..100 {
            let z = rng.random_range(-1.0..1.0);
            let g = config_at([0.0, 0.0, z, 0.0, 0.0, 0.0], data.clouds[0].frame);
            let p = model.predict_success(&emb, size, &g).unwrap();
            if z > 0.0 {
                pos.push(p);
            } else {
                neg.push(p);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&pos) > mean(&neg) + 0.2);
    }

    #[test]
    fn frozen_encoder_stays_bitwise_identical() {
        let reference = tiny_reference(17);
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let mut model = GraspSuccessModel::fixed_from(&reference, &[16], &mut rng).unwrap();
        let before = model.encoder.clone();
        let data = separable_dataset(19, 120);
        model
            .train_success(
                &data,
                &SuccessHyper {
                    epochs: 5,
                    learning_rate: 1e-3,
                    batch_size: 16,
                    test_fraction: 0.2,
                    seed: 20,
                },
                true,
            )
            .unwrap();
        assert_eq!(model.encoder, before);
        assert_eq!(model.encoder, reference.encoder);
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let data = separable_dataset(21, 150);
        let hyper = SuccessHyper {
            epochs: 8,
            learning_rate: 1e-3,
            batch_size: 16,
            test_fraction: 0.2,
            seed: 22,
        };
        let mut a = tiny_success(23);
        let mut b = tiny_success(23);
        let ra = a.train_success(&data, &hyper, false).unwrap();
        let rb = b.train_success(&data, &hyper, false).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a.head, b.head);
    }

    #[test]
    fn single_class_dataset_is_rejected() {
        let mut model = tiny_success(24);
        let mut data = separable_dataset(25, 60);
        for g in &mut data.grasps {
            g.label = true;
        }
        assert!(model
            .train_success(&data, &SuccessHyper::default(), false)
            .is_err());
    }

    #[test]
    fn success_model_files_round_trip() {
        let model = tiny_success(26);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("success.json");
        model.save(&path).unwrap();
        let back = GraspSuccessModel::load(&path).unwrap();
        assert_eq!(model.encoder, back.encoder);
        assert_eq!(model.head, back.head);
        assert_eq!(model.mode, back.mode);
    }

    fn synthetic_mixture(
        n_per: usize,
        seed: u64,
    ) -> (Vec<GraspConfig>, Vec<Approach>, [f64; GRASP_DIMS], [f64; GRASP_DIMS]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = NormalizedFrame::identity();
        let mut mean_side = [0.0; GRASP_DIMS];
        let mut mean_over = [0.0; GRASP_DIMS];
        for d in 0..GRASP_DIMS {
            mean_side[d] = 0.1 * d as f64;
            mean_over[d] = 2.0 - 0.1 * d as f64;
        }
        let normal = Normal::new(0.0, 0.15).unwrap();
        let mut configs = Vec::new();
        let mut tags = Vec::new();
        for _ in 0..n_per {
            let mut a = [0.0; GRASP_DIMS];
            let mut b = [0.0; GRASP_DIMS];
            for d in 0..GRASP_DIMS {
                a[d] = mean_side[d] + normal.sample(&mut rng);
                b[d] = mean_over[d] + normal.sample(&mut rng);
            }
            configs.push(GraspConfig::from_vec14(&a, frame, "side"));
            tags.push(Approach::Side);
            configs.push(GraspConfig::from_vec14(&b, frame, "overhead"));
            tags.push(Approach::Overhead);
        }
        (configs, tags, mean_side, mean_over)
    }

    #[test]
    fn em_recovers_well_separated_means() {
        let (configs, tags, mean_side, mean_over) = synthetic_mixture(300, 27);
        let (prior, report) = GmmPrior::fit(&configs, &tags).unwrap();
        let cs = prior.component(Approach::Side);
        let co = prior.component(Approach::Overhead);
        for d in 0..GRASP_DIMS {
            assert!((prior.means[cs][d] - mean_side[d]).abs() < 0.05);
            assert!((prior.means[co][d] - mean_over[d]).abs() < 0.05);
        }
        // EM log-likelihood is non-decreasing.
        for w in report.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "ll decreased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn component_mean_dominates_far_points() {
        let (configs, tags, ..) = synthetic_mixture(100, 28);
        let (prior, _) = GmmPrior::fit(&configs, &tags).unwrap();
        let mean = prior.means[0];
        let mut far = mean;
        for f in &mut far {
            *f += 50.0;
        }
        assert!(prior.log_density(&mean) > prior.log_density(&far));
    }

    #[test]
    fn named_component_sampling_stays_near_its_mean() {
        let (configs, tags, mean_side, _) = synthetic_mixture(200, 29);
        let (prior, _) = GmmPrior::fit(&configs, &tags).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let mut acc = [0.0; GRASP_DIMS];
        let n = 500;
        for _ in 0..n {
            let x = prior.sample(Some(Approach::Side), &mut rng);
            for d in 0..GRASP_DIMS {
                acc[d] += x[d];
            }
        }
        for d in 0..GRASP_DIMS {
            assert!((acc[d] / n as f64 - mean_side[d]).abs() < 0.1);
        }

        // Sampling is deterministic per seed.
        let mut r1 = ChaCha8Rng::seed_from_u64(31);
        let mut r2 = ChaCha8Rng::seed_from_u64(31);
        assert_eq!(prior.sample(None, &mut r1), prior.sample(None, &mut r2));
    }

    #[test]
    fn gmm_json_round_trips() {
        let (configs, tags, ..) = synthetic_mixture(50, 32);
        let (prior, _) = GmmPrior::fit(&configs, &tags).unwrap();
        let back = GmmPrior::from_json(&prior.to_json().unwrap()).unwrap();
        assert_eq!(prior, back);
    }

    #[test]
    fn degenerate_variances_are_floored_and_reported() {
        let frame = NormalizedFrame::identity();
        // All side samples identical in every dimension.
        let mut configs = Vec::new();
        let mut tags = Vec::new();
        for _ in 0..10 {
            configs.push(GraspConfig::from_vec14(&[0.5; GRASP_DIMS], frame, "s"));
            tags.push(Approach::Side);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..10 {
            let mut v = [0.0; GRASP_DIMS];
            for d in &mut v {
                *d = 3.0 + rng.random_range(-0.1..0.1);
            }
            configs.push(GraspConfig::from_vec14(&v, frame, "o"));
            tags.push(Approach::Overhead);
        }
        let (prior, report) = GmmPrior::fit(&configs, &tags).unwrap();
        assert!(report.floored > 0);
        assert!(prior
            .variances
            .iter()
            .all(|vs| vs.iter().all(|v| *v >= VARIANCE_FLOOR)));
    }

    #[test]
    fn score_reduces_to_negative_log_h_at_alpha_zero() {
        let mut model = tiny_success(34);
        for layer in &mut model.head.layers {
            layer.weights.fill(0.0);
            layer.biases.fill(0.0);
        }
        let cloud = ball_cloud(15, [0.0; 3], 35);
        let emb = model.embed(&cloud).unwrap();
        let (configs, tags, ..) = synthetic_mixture(50, 36);
        let (prior, _) = GmmPrior::fit(&configs, &tags).unwrap();
        let g = config_at([0.0; 6], cloud.frame);
        let score = grasp_score(&model, &prior, &emb, 1.0, &g, 0.0).unwrap();
        // h = sigmoid(0) = 0.5 exactly.
        assert_relative_eq!(score, std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn score_is_monotone_in_success_and_prior_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..200 {
            let h1: f64 = rng.random_range(0.01..0.99);
            let h2 = rng.random_range(0.01..0.99);
            let lg1: f64 = rng.random_range(-10.0..2.0);
            let lg2 = rng.random_range(-10.0..2.0);
            let alpha = rng.random_range(0.1..2.0);
            if h1 < h2 {
                assert!(combined_score(h2, lg1, alpha) < combined_score(h1, lg1, alpha));
            }
            if lg1 < lg2 {
                assert!(combined_score(h1, lg2, alpha) < combined_score(h1, lg1, alpha));
            }
        }
    }

    #[test]
    fn score_gradient_matches_finite_differences() {
        let (configs, tags, ..) = synthetic_mixture(80, 38);
        let (prior, _) = GmmPrior::fit(&configs, &tags).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let h = 1e-6;
        for trial in 0..25 {
            let model = tiny_success(40 + trial);
            let cloud = ball_cloud(15, [0.0; 3], 60 + trial);
            let emb = model.embed(&cloud).unwrap();
            let mut v = [0.0; GRASP_DIMS];
            for d in &mut v {
                *d = rng.random_range(-0.5..2.0);
            }
            let g = GraspConfig::from_vec14(&v, cloud.frame, "t");
            let alpha = 0.7;
            let (_, grad) =
                grasp_score_with_gradient(&model, &prior, &emb, 1.0, &g, alpha).unwrap();
            for d in 0..GRASP_DIMS {
                let mut vp = v;
                let mut vm = v;
                vp[d] += h;
                vm[d] -= h;
                let gp = GraspConfig::from_vec14(&vp, cloud.frame, "t");
                let gm = GraspConfig::from_vec14(&vm, cloud.frame, "t");
                let sp = grasp_score(&model, &prior, &emb, 1.0, &gp, alpha).unwrap();
                let sm = grasp_score(&model, &prior, &emb, 1.0, &gm, alpha).unwrap();
                let fd = (sp - sm) / (2.0 * h);
                let denom = fd.abs().max(grad[d].abs()).max(1.0);
                assert!(
                    (fd - grad[d]).abs() / denom < 1e-5,
                    "trial {trial} dim {d}: fd {fd} vs {}",
                    grad[d]
                );
            }
        }
    }

    #[test]
    fn size_scalar_is_the_metric_bbox_diagonal() {
        // Metric cloud spanning a 1 x 2 x 3 box, normalized with L = 3.
        let frame = NormalizedFrame {
            centroid: [0.0; 3],
            scale: 1.0 / 3.0,
            orientation: [1.0, 0.0, 0.0, 0.0],
        };
        let metric = [
            Point3::new(-0.5, -1.0, -1.5),
            Point3::new(0.5, 1.0, 1.5),
            Point3::new(0.0, 0.0, 0.0),
        ];
        let cloud = NormalizedCloud {
            points: metric.iter().map(|p| frame.to_normalized(p)).collect(),
            frame,
        };
        assert_relative_eq!(
            cloud.metric_bbox_diagonal(),
            14.0_f64.sqrt(),
            epsilon = 1e-12
        );
    }
}
