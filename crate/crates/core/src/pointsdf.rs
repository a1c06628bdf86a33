//! Learned implicit surface model: a per-point encoder pooled into a cloud
//! embedding, and a decoder that maps (embedding, query) to a signed distance
//! in (-1, 1).
//!
//! The encoder runs the same small network over every point and max-pools
//! each embedding dimension. Clouds are canonicalized (sorted, deduplicated,
//! stride-subsampled) before encoding, so permutation invariance is exact
//! rather than approximate. Decoder hidden layers are tanh: queries are
//! differentiated at plan time and a smooth field keeps those gradients
//! finite-difference clean.

use crate::camera::{NormalizedCloud, NormalizedFrame, SdfSample};
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamState, Activation, DenseNetwork, NetworkGradient};
use crate::sdf::SdfField;
use nalgebra::{DVector, Point3, Quaternion, UnitQuaternion, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const DEFAULT_MAX_POINTS: usize = 1024;

/// Cloud embedding with the normalization metadata of its source cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudEmbedding {
    pub vector: Vec<f64>,
    pub frame: NormalizedFrame,
}

#[derive(Debug, Clone)]
pub struct PointSdfModel {
    pub encoder: DenseNetwork,
    pub decoder: DenseNetwork,
    pub embedding_width: usize,
    pub max_points: usize,
}

/// Sizes for a fresh model. `encoder_hidden`/`decoder_hidden` exclude the
/// input and output widths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointSdfConfig {
    pub embedding_width: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub max_points: usize,
}

impl Default for PointSdfConfig {
    fn default() -> Self {
        Self {
            embedding_width: 256,
            encoder_hidden: vec![64, 128],
            decoder_hidden: vec![512, 512, 256],
            max_points: DEFAULT_MAX_POINTS,
        }
    }
}

impl PointSdfConfig {
    /// Small configuration for time-budgeted end-to-end runs.
    pub fn lite() -> Self {
        Self {
            embedding_width: 64,
            encoder_hidden: vec![32, 64],
            decoder_hidden: vec![128, 128],
            max_points: 128,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainHyper {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            epochs: 40,
            learning_rate: 1e-3,
            batch_size: 64,
            seed: 0,
        }
    }
}

/// One cloud with its labeled queries, everything in normalized coordinates.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub cloud: NormalizedCloud,
    pub samples: Vec<SdfSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epoch_mse: Vec<f64>,
    pub final_mse: f64,
    pub examples: usize,
    pub total_samples: usize,
    pub seed: u64,
}

impl PointSdfModel {
    pub fn new<R: Rng>(config: &PointSdfConfig, rng: &mut R) -> Result<Self> {
        if config.embedding_width == 0 {
            return Err(Error::InvalidArgument("zero embedding width".into()));
        }
        let mut enc_widths = vec![3];
        enc_widths.extend(&config.encoder_hidden);
        enc_widths.push(config.embedding_width);
        let mut enc_acts = vec![Activation::Relu; enc_widths.len() - 2];
        enc_acts.push(Activation::Identity);
        let encoder = DenseNetwork::new(&enc_widths, &enc_acts, rng)?;

        let mut dec_widths = vec![config.embedding_width + 3];
        dec_widths.extend(&config.decoder_hidden);
        dec_widths.push(1);
        let mut dec_acts = vec![Activation::Tanh; dec_widths.len() - 2];
        dec_acts.push(Activation::Tanh);
        let decoder = DenseNetwork::new(&dec_widths, &dec_acts, rng)?;

        Ok(Self {
            encoder,
            decoder,
            embedding_width: config.embedding_width,
            max_points: config.max_points.max(1),
        })
    }

    fn canonical_points(&self, cloud: &NormalizedCloud) -> Result<Vec<Point3<f64>>> {
        canonical_points(cloud, self.max_points)
    }

    pub fn embed(&self, cloud: &NormalizedCloud) -> Result<CloudEmbedding> {
        embed_with(&self.encoder, self.max_points, cloud)
    }

    fn decoder_input(&self, emb: &CloudEmbedding, x: &Point3<f64>) -> DVector<f64> {
        let mut input = DVector::zeros(self.embedding_width + 3);
        input.as_mut_slice()[..self.embedding_width].copy_from_slice(&emb.vector);
        input[self.embedding_width] = x.x;
        input[self.embedding_width + 1] = x.y;
        input[self.embedding_width + 2] = x.z;
        input
    }

    /// Signed distance at a normalized-frame query; strictly inside (-1, 1)
    /// by the tanh head.
    pub fn predict(&self, emb: &CloudEmbedding, x: &Point3<f64>) -> f64 {
        let trace = self
            .decoder
            .forward_trace(self.decoder_input(emb, x))
            .expect("embedding width matches decoder fan-in");
        trace.output()[0]
    }

    pub fn predict_batch(&self, emb: &CloudEmbedding, xs: &[Point3<f64>]) -> Vec<f64> {
        xs.iter().map(|x| self.predict(emb, x)).collect()
    }

    /// Exact reverse-mode d predict / d x.
    pub fn query_gradient(&self, emb: &CloudEmbedding, x: &Point3<f64>) -> Vector3<f64> {
        let trace = self
            .decoder
            .forward_trace(self.decoder_input(emb, x))
            .expect("embedding width matches decoder fan-in");
        let upstream = DVector::from_element(1, 1.0);
        let (_, input_grad) = self
            .decoder
            .backward_trace(&trace, &upstream)
            .expect("upstream length 1");
        Vector3::new(
            input_grad[self.embedding_width],
            input_grad[self.embedding_width + 1],
            input_grad[self.embedding_width + 2],
        )
    }

    /// Minimizes MSE between predictions and labels with Adam, mutating the
    /// model in place. Deterministic for a fixed seed.
    pub fn train(
        &mut self,
        dataset: &[TrainingExample],
        hyper: &TrainHyper,
    ) -> Result<TrainingReport> {
        if dataset.is_empty() || dataset.iter().all(|ex| ex.samples.is_empty()) {
            return Err(Error::EmptyInput("training dataset".into()));
        }
        for ex in dataset {
            for s in &ex.samples {
                if !(-1.0..=1.0).contains(&s.sdf) {
                    return Err(Error::InvalidArgument(format!(
                        "label {} outside [-1, 1]",
                        s.sdf
                    )));
                }
            }
        }
        let batch = hyper.batch_size.max(1);
        let canonical: Vec<Vec<Point3<f64>>> = dataset
            .iter()
            .map(|ex| self.canonical_points(&ex.cloud))
            .collect::<Result<_>>()?;

        let mut enc_state = AdamState::new(&self.encoder);
        let mut dec_state = AdamState::new(&self.decoder);
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let total_samples: usize = dataset.iter().map(|ex| ex.samples.len()).sum();
        let mut epoch_mse = Vec::with_capacity(hyper.epochs);

        let mut order: Vec<usize> = (0..dataset.len()).collect();
        for epoch in 0..hyper.epochs {
            shuffle(&mut order, &mut rng);
            let mut sq_sum = 0.0;
            for &ei in &order {
                let ex = &dataset[ei];
                let pts = &canonical[ei];
                for chunk in ex.samples.chunks(batch) {
                    sq_sum += self.train_batch(
                        pts,
                        chunk,
                        hyper.learning_rate,
                        &mut enc_state,
                        &mut dec_state,
                    )?;
                }
            }
            let mse = sq_sum / total_samples as f64;
            if !mse.is_finite() {
                return Err(Error::TrainingDiverged { epoch, loss: mse });
            }
            epoch_mse.push(mse);
        }
        Ok(TrainingReport {
            final_mse: *epoch_mse.last().unwrap(),
            epoch_mse,
            examples: dataset.len(),
            total_samples,
            seed: hyper.seed,
        })
    }

    /// One gradient step over a batch of queries against one cloud. Returns
    /// the sum of squared errors measured before the update.
    fn train_batch(
        &mut self,
        pts: &[Point3<f64>],
        samples: &[SdfSample],
        lr: f64,
        enc_state: &mut AdamState,
        dec_state: &mut AdamState,
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

        let mut dec_grads = NetworkGradient::zeros_like(&self.decoder);
        let mut emb_upstream = DVector::<f64>::zeros(e);
        let mut sq_sum = 0.0;
        let inv = 1.0 / samples.len() as f64;
        let mut input = DVector::zeros(e + 3);
        input.as_mut_slice()[..e].copy_from_slice(&vector);
        for s in samples {
            input[e] = s.query[0];
            input[e + 1] = s.query[1];
            input[e + 2] = s.query[2];
            let trace = self.decoder.forward_trace(input.clone())?;
            let err = trace.output()[0] - s.sdf;
            sq_sum += err * err;
            let upstream = DVector::from_element(1, 2.0 * err * inv);
            let (grads, input_grad) = self.decoder.backward_trace(&trace, &upstream)?;
            dec_grads.add_assign(&grads);
            emb_upstream += input_grad.rows(0, e);
        }

        // The pooled embedding routes each dimension's gradient to the one
        // point that attained the max.
        let mut enc_grads = NetworkGradient::zeros_like(&self.encoder);
        let mut per_point: Vec<Option<DVector<f64>>> = vec![None; pts.len()];
        for d in 0..e {
            let g = emb_upstream[d];
            if g == 0.0 {
                continue;
            }
            per_point[argmax[d]]
                .get_or_insert_with(|| DVector::zeros(e))[d] += g;
        }
        for (pi, upstream) in per_point.into_iter().enumerate() {
            if let Some(upstream) = upstream {
                let (grads, _) = self.encoder.backward_trace(&traces[pi], &upstream)?;
                enc_grads.add_assign(&grads);
            }
        }

        adam_step(&mut self.decoder, &dec_grads, dec_state, lr)?;
        adam_step(&mut self.encoder, &enc_grads, enc_state, lr)?;
        Ok(sq_sum)
    }

    /// World-frame SDF view of one embedded observation: queries map through
    /// the normalization, values scale back to metric units.
    pub fn as_field<'a>(
        &'a self,
        emb: &'a CloudEmbedding,
        frame: &NormalizedFrame,
    ) -> LearnedSdfField<'a> {
        LearnedSdfField {
            model: self,
            emb,
            frame: *frame,
        }
    }

    pub fn save(&self, manifest_path: &Path) -> Result<()> {
        let stem = manifest_path
            .file_stem()
            .ok_or_else(|| Error::InvalidArgument("model path has no file name".into()))?
            .to_string_lossy()
            .to_string();
        let encoder_file = format!("{stem}.encoder.bin");
        let decoder_file = format!("{stem}.decoder.bin");
        let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        self.encoder.save(&dir.join(&encoder_file))?;
        self.decoder.save(&dir.join(&decoder_file))?;
        let manifest = ModelManifest {
            embedding_width: self.embedding_width,
            max_points: self.max_points,
            encoder: encoder_file,
            decoder: decoder_file,
            corpus_hash: None,
            notes: MANIFEST_NOTES.into(),
        };
        std::fs::write(manifest_path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn save_with_hash(&self, manifest_path: &Path, corpus_hash: &str) -> Result<()> {
        self.save(manifest_path)?;
        let mut manifest: ModelManifest =
            serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
        manifest.corpus_hash = Some(corpus_hash.to_string());
        std::fs::write(manifest_path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest: ModelManifest =
            serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
        let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        let encoder = DenseNetwork::load(&dir.join(&manifest.encoder))?;
        let decoder = DenseNetwork::load(&dir.join(&manifest.decoder))?;
        if decoder.input_dim() != manifest.embedding_width + 3 {
            return Err(Error::ModelFormat(format!(
                "decoder fan-in {} does not match embedding width {} + 3",
                decoder.input_dim(),
                manifest.embedding_width
            )));
        }
        if encoder.output_dim() != manifest.embedding_width {
            return Err(Error::ModelFormat(format!(
                "encoder fan-out {} does not match embedding width {}",
                encoder.output_dim(),
                manifest.embedding_width
            )));
        }
        Ok(Self {
            encoder,
            decoder,
            embedding_width: manifest.embedding_width,
            max_points: manifest.max_points,
        })
    }
}

const MANIFEST_NOTES: &str =
    "shared per-point encoder with max pooling; decoder tanh head over (embedding, query)";

/// Deterministic canonical form: lexicographic sort, exact-duplicate
/// removal, stride subsample down to `max_points`. Permutation invariance
/// of everything downstream is exact because of this ordering.
pub(crate) fn canonical_points(
    cloud: &NormalizedCloud,
    max_points: usize,
) -> Result<Vec<Point3<f64>>> {
    if cloud.points.is_empty() {
        return Err(Error::EmptyInput("embed cloud".into()));
    }
    let mut pts: Vec<Point3<f64>> = Vec::with_capacity(cloud.points.len());
    for p in &cloud.points {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return Err(Error::NonFinite("cloud point".into()));
        }
        pts.push(*p);
    }
    pts.sort_unstable_by(|a, b| {
        (a.x, a.y, a.z)
            .partial_cmp(&(b.x, b.y, b.z))
            .expect("finite coordinates")
    });
    pts.dedup();
    if pts.len() > max_points {
        let n = pts.len();
        pts = (0..max_points).map(|i| pts[i * n / max_points]).collect();
    }
    Ok(pts)
}

/// Componentwise max over per-point encoder outputs plus, per dimension,
/// which point attained the max (ties resolve to the earliest point).
pub(crate) fn max_pool(outputs: &[DVector<f64>], width: usize) -> (Vec<f64>, Vec<usize>) {
    let mut vector = vec![f64::NEG_INFINITY; width];
    let mut argmax = vec![0usize; width];
    for (pi, out) in outputs.iter().enumerate() {
        for d in 0..width {
            if out[d] > vector[d] {
                vector[d] = out[d];
                argmax[d] = pi;
            }
        }
    }
    (vector, argmax)
}

pub(crate) fn embed_with(
    encoder: &DenseNetwork,
    max_points: usize,
    cloud: &NormalizedCloud,
) -> Result<CloudEmbedding> {
    let pts = canonical_points(cloud, max_points)?;
    let outputs: Vec<DVector<f64>> = pts
        .iter()
        .map(|p| {
            Ok(encoder
                .forward_trace(DVector::from_column_slice(&[p.x, p.y, p.z]))?
                .output()
                .clone())
        })
        .collect::<Result<_>>()?;
    let (vector, _) = max_pool(&outputs, encoder.output_dim());
    Ok(CloudEmbedding {
        vector,
        frame: cloud.frame,
    })
}

#[derive(Serialize, Deserialize)]
struct ModelManifest {
    embedding_width: usize,
    max_points: usize,
    encoder: String,
    decoder: String,
    corpus_hash: Option<String>,
    notes: String,
}

fn shuffle<T, R: Rng>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// World-frame adapter over one embedding: `sdf(x)` is the model prediction
/// at the normalized image of `x`, scaled back to metric units. Gradients
/// need no scale factor (the normalization and value scales cancel), only
/// the frame rotation.
pub struct LearnedSdfField<'a> {
    model: &'a PointSdfModel,
    emb: &'a CloudEmbedding,
    frame: NormalizedFrame,
}

impl LearnedSdfField<'_> {
    fn orientation(&self) -> UnitQuaternion<f64> {
        let [w, x, y, z] = self.frame.orientation;
        UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z))
    }
}

impl SdfField for LearnedSdfField<'_> {
    fn sdf(&self, x: &Point3<f64>) -> f64 {
        let x_n = self.frame.to_normalized(x);
        self.model.predict(self.emb, &x_n) / self.frame.scale
    }

    fn sdf_gradient(&self, x: &Point3<f64>) -> Vector3<f64> {
        let x_n = self.frame.to_normalized(x);
        self.orientation() * self.model.query_gradient(self.emb, &x_n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{
        backproject, normalize_cloud, render_depth, sample_sdf_labels, CameraIntrinsics,
    };
    use crate::sdf::{Primitive, PrimitiveScene};
    use crate::transform::RigidTransform;
    use approx::assert_relative_eq;

    fn tiny_model(seed: u64) -> PointSdfModel {
        let config = PointSdfConfig {
            embedding_width: 8,
            encoder_hidden: vec![16],
            decoder_hidden: vec![16, 16],
            max_points: 64,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointSdfModel::new(&config, &mut rng).unwrap()
    }

    fn cloud_from(points: Vec<Point3<f64>>) -> NormalizedCloud {
        NormalizedCloud {
            points,
            frame: NormalizedFrame::identity(),
        }
    }

    fn random_cloud(n: usize, seed: u64) -> NormalizedCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        cloud_from(
            (0..n)
                .map(|_| {
                    Point3::new(
                        rng.random_range(-0.5..0.5),
                        rng.random_range(-0.5..0.5),
                        rng.random_range(-0.5..0.5),
                    )
                })
                .collect(),
        )
    }

    #[test]
    fn embedding_is_permutation_invariant_exactly() {
        let model = tiny_model(1);
        let cloud = random_cloud(40, 2);
        let base = model.embed(&cloud).unwrap();

        let mut reversed = cloud.clone();
        reversed.points.reverse();
        assert_eq!(model.embed(&reversed).unwrap().vector, base.vector);

        let mut rotated_order = cloud.clone();
        rotated_order.points.rotate_left(17);
        assert_eq!(model.embed(&rotated_order).unwrap().vector, base.vector);
    }

    #[test]
    fn embedding_ignores_duplicated_points() {
        let model = tiny_model(3);
        let cloud = random_cloud(30, 4);
        let base = model.embed(&cloud).unwrap();
        let mut doubled = cloud.clone();
        doubled.points.extend(cloud.points.iter().copied());
        assert_eq!(model.embed(&doubled).unwrap().vector, base.vector);
    }

    #[test]
    fn empty_cloud_is_rejected() {
        let model = tiny_model(5);
        assert!(model.embed(&cloud_from(vec![])).is_err());
    }

    #[test]
    fn zeroed_decoder_predicts_zero_with_zero_gradient() {
        let mut model = tiny_model(6);
        for layer in &mut model.decoder.layers {
            layer.weights.fill(0.0);
            layer.biases.fill(0.0);
        }
        let emb = model.embed(&random_cloud(20, 7)).unwrap();
        let x = Point3::new(0.2, -0.1, 0.3);
        assert_eq!(model.predict(&emb, &x), 0.0);
        assert_eq!(model.query_gradient(&emb, &x), Vector3::zeros());
    }

    #[test]
    fn predictions_stay_inside_the_open_unit_interval() {
        let model = tiny_model(8);
        let emb = model.embed(&random_cloud(20, 9)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let x = Point3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let v = model.predict(&emb, &x);
            assert!(v > -1.0 && v < 1.0);
        }
    }

    #[test]
    fn batched_queries_match_individual_queries() {
        let model = tiny_model(11);
        let emb = model.embed(&random_cloud(15, 12)).unwrap();
        let xs = vec![
            Point3::new(0.1, 0.2, 0.3),
            Point3::new(-0.4, 0.0, 0.2),
            Point3::new(0.0, 0.0, 0.0),
        ];
        let batch = model.predict_batch(&emb, &xs);
        for (x, b) in xs.iter().zip(&batch) {
            assert_eq!(model.predict(&emb, x), *b);
        }
    }

    #[test]
    fn query_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = 1e-5;
        let mut checked = 0;
        for trial in 0..100 {
            let model = tiny_model(100 + trial);
            let emb = model.embed(&random_cloud(12, 200 + trial)).unwrap();
            let x = Point3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            );
            let g = model.query_gradient(&emb, &x);
            for a in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[a] += h;
                xm[a] -= h;
                let fd = (model.predict(&emb, &xp) - model.predict(&emb, &xm)) / (2.0 * h);
                let denom = fd.abs().max(g[a].abs()).max(1e-6);
                assert!(
                    (fd - g[a]).abs() / denom < 1e-6,
                    "trial {trial} axis {a}: fd {fd} vs {}",
                    g[a]
                );
                checked += 1;
            }
        }
        assert_eq!(checked, 300);
    }

    fn sphere_example(radius: f64, seed: u64) -> TrainingExample {
        let scene = PrimitiveScene::single(
            Primitive::Sphere { radius },
            RigidTransform::from_translation(Vector3::new(0.0, 0.0, 0.8)),
            "s",
        )
        .unwrap();
        let intr = CameraIntrinsics::new(40.0, 40.0, 24.0, 24.0, 48, 48).unwrap();
        let img = render_depth(&scene, &RigidTransform::identity(), &intr).unwrap();
        let cloud = normalize_cloud(&backproject(&img).unwrap()).unwrap();
        let samples = sample_sdf_labels(&scene, &cloud.frame, 60, 60, seed).unwrap();
        TrainingExample { cloud, samples }
    }

    #[test]
    fn constant_zero_labels_drive_loss_to_zero() {
        let mut model = tiny_model(14);
        let mut ex = sphere_example(0.25, 15);
        for s in &mut ex.samples {
            s.sdf = 0.0;
        }
        let report = model
            .train(
                &[ex],
                &TrainHyper {
                    epochs: 150,
                    learning_rate: 1e-3,
                    batch_size: 32,
                    seed: 16,
                },
            )
            .unwrap();
        assert!(
            report.final_mse < 1e-4,
            "final mse {}",
            report.final_mse
        );
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let dataset = vec![sphere_example(0.25, 17), sphere_example(0.3, 18)];
        let hyper = TrainHyper {
            epochs: 3,
            learning_rate: 1e-3,
            batch_size: 32,
            seed: 19,
        };
        let mut a = tiny_model(20);
        let mut b = tiny_model(20);
        let report_a = a.train(&dataset, &hyper).unwrap();
        let report_b = b.train(&dataset, &hyper).unwrap();
        assert_eq!(report_a, report_b);
        assert_eq!(a.decoder, b.decoder);
        assert_eq!(a.encoder, b.encoder);
    }

    #[test]
    fn out_of_range_labels_are_rejected() {
        let mut model = tiny_model(21);
        let mut ex = sphere_example(0.25, 22);
        ex.samples[0].sdf = 1.5;
        assert!(model.train(&[ex], &TrainHyper::default()).is_err());
    }

    /// Shared trained fixture: one sphere observation fitted well enough to
    /// check signs, gradients, and embedding separation.
    fn trained_sphere() -> (PointSdfModel, TrainingExample) {
        let mut model = tiny_model(23);
        let ex = sphere_example(0.25, 24);
        model
            .train(
                std::slice::from_ref(&ex),
                &TrainHyper {
                    epochs: 150,
                    learning_rate: 2e-3,
                    batch_size: 32,
                    seed: 25,
                },
            )
            .unwrap();
        (model, ex)
    }

    #[test]
    fn trained_sphere_has_correct_signs_and_outward_gradient() {
        let (model, ex) = trained_sphere();
        let emb = model.embed(&ex.cloud).unwrap();
        // Object center and a far unit-box corner, in normalized coordinates.
        let center = ex.cloud.frame.to_normalized(&Point3::new(0.0, 0.0, 0.8));
        assert!(model.predict(&emb, &center) < 0.0);
        let corner = Point3::new(0.48, 0.48, 0.48);
        assert!(model.predict(&emb, &corner) > 0.0);

        let outward = (corner - center).normalize();
        let g = model.query_gradient(&emb, &corner);
        assert!(g.dot(&outward) > 0.0);
    }

    #[test]
    fn distinct_shapes_embed_differently_after_training() {
        let mut model = tiny_model(26);
        let sphere = sphere_example(0.25, 27);
        let box_scene = PrimitiveScene::single(
            Primitive::Box {
                half_extents: [0.2, 0.3, 0.15],
            },
            RigidTransform::from_translation(Vector3::new(0.0, 0.0, 0.8)),
            "b",
        )
        .unwrap();
        let intr = CameraIntrinsics::new(40.0, 40.0, 24.0, 24.0, 48, 48).unwrap();
        let img = render_depth(&box_scene, &RigidTransform::identity(), &intr).unwrap();
        let cloud = normalize_cloud(&backproject(&img).unwrap()).unwrap();
        let samples = sample_sdf_labels(&box_scene, &cloud.frame, 60, 60, 28).unwrap();
        let box_ex = TrainingExample { cloud, samples };

        model
            .train(
                &[sphere.clone(), box_ex.clone()],
                &TrainHyper {
                    epochs: 30,
                    learning_rate: 1e-3,
                    batch_size: 32,
                    seed: 29,
                },
            )
            .unwrap();
        let ea = model.embed(&sphere.cloud).unwrap();
        let eb = model.embed(&box_ex.cloud).unwrap();
        let dist: f64 = ea
            .vector
            .iter()
            .zip(&eb.vector)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(dist > 1e-6, "embeddings collapsed: distance {dist}");
    }

    #[test]
    fn world_field_respects_frame_and_scale() {
        let (model, ex) = trained_sphere();
        let emb = model.embed(&ex.cloud).unwrap();

        // Identity frame: the field is the raw prediction.
        let identity = NormalizedFrame::identity();
        let field = model.as_field(&emb, &identity);
        let x = Point3::new(0.1, -0.2, 0.05);
        assert_relative_eq!(field.sdf(&x), model.predict(&emb, &x), epsilon = 1e-15);

        // Same normalized query through two frames: halving the stored
        // multiplier doubles the reconstructed world distance.
        let frame_a = NormalizedFrame {
            centroid: [0.0; 3],
            scale: 0.5,
            orientation: [1.0, 0.0, 0.0, 0.0],
        };
        let frame_b = NormalizedFrame {
            centroid: [0.0; 3],
            scale: 0.25,
            orientation: [1.0, 0.0, 0.0, 0.0],
        };
        let q_n = Point3::new(0.2, 0.1, -0.1);
        let world_a = model.as_field(&emb, &frame_a).sdf(&frame_a.to_metric(&q_n));
        let world_b = model.as_field(&emb, &frame_b).sdf(&frame_b.to_metric(&q_n));
        assert_relative_eq!(world_b, 2.0 * world_a, epsilon = 1e-12);
    }

    #[test]
    fn world_gradient_matches_finite_differences() {
        let (model, ex) = trained_sphere();
        let emb = model.embed(&ex.cloud).unwrap();
        let field = model.as_field(&emb, &ex.cloud.frame);
        let h = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for _ in 0..20 {
            let x = Point3::new(
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                rng.random_range(0.5..1.1),
            );
            let g = field.sdf_gradient(&x);
            for a in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[a] += h;
                xm[a] -= h;
                let fd = (field.sdf(&xp) - field.sdf(&xm)) / (2.0 * h);
                assert!(
                    (fd - g[a]).abs() < 1e-5 * fd.abs().max(g[a].abs()).max(1.0),
                    "axis {a}: fd {fd} vs {}",
                    g[a]
                );
            }
        }
    }

    #[test]
    fn model_files_round_trip() {
        let model = tiny_model(31);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let back = PointSdfModel::load(&path).unwrap();
        assert_eq!(model.encoder, back.encoder);
        assert_eq!(model.decoder, back.decoder);
        assert_eq!(model.embedding_width, back.embedding_width);
        assert_eq!(model.max_points, back.max_points);

        model.save_with_hash(&path, "deadbeef").unwrap();
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(manifest["corpus_hash"], "deadbeef");
    }

    #[test]
    fn subsampling_caps_the_point_count() {
        let model = tiny_model(32);
        let big = random_cloud(500, 33);
        let pts = model.canonical_points(&big).unwrap();
        assert_eq!(pts.len(), 64);
        // Subsample of a sorted list stays sorted and unique.
        for w in pts.windows(2) {
            assert!((w[0].x, w[0].y, w[0].z) < (w[1].x, w[1].y, w[1].z));
        }
    }
}
