//! Motion prior distillation on a toy rectified-flow latent model:
//! motion-vector encoding, latent interpolation, the motion-discrepancy
//! objective with analytic gradients, low-rank adaptation training, explicit
//! Euler integration, and flow inversion.
//!
//! The velocity field is a single affine map over `[frame latent; t; n/N]`
//! with a low-rank adapter on that map, keeping every gradient analytic and
//! finite-difference checkable.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::adam::Adam;
use crate::error::{Error, Result};
use crate::matrixio::{matrix_from_rows, rows_of};

pub const MODEL_VERSION: &str = "VMODEL/1";

pub const DEFAULT_D_LAT: usize = 16;
pub const DEFAULT_N_FRAMES: usize = 17;
pub const DEFAULT_RANK: usize = 128;
pub const DEFAULT_SCALE: f64 = 1.0;
pub const DEFAULT_EULER_STEPS: usize = 100;

/// N x d_lat matrix of per-frame latents. The frame count is at least 2 and
/// every entry is finite; both are enforced at construction, so downstream
/// operations never re-validate.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTrajectory {
    frames: Array2<f64>,
}

impl LatentTrajectory {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::TooFewFrames {
                min: 2,
                got: rows.len(),
            });
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::ShapeMismatch("trajectory frames are empty".into()));
        }
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "ragged trajectory: frame of width {} after width {dim}",
                    row.len()
                )));
            }
            flat.extend_from_slice(row);
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory entry"));
        }
        let frames = Array2::from_shape_vec((rows.len(), dim), flat)
            .expect("length checked above");
        Ok(Self { frames })
    }

    pub fn from_array(frames: Array2<f64>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = frames.outer_iter().map(|r| r.to_vec()).collect();
        Self::from_rows(&rows)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.frames.outer_iter().map(|r| r.to_vec()).collect()
    }

    pub fn frames(&self) -> &Array2<f64> {
        &self.frames
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }
}

impl Serialize for LatentTrajectory {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LatentTrajectory {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        Self::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Seeded standard Gaussian trajectory, the rectified-flow source
/// distribution. Entries are drawn row-major.
pub fn gaussian_trajectory(n_frames: usize, d_lat: usize, seed: u64) -> Result<LatentTrajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gaussian_from_rng(n_frames, d_lat, &mut rng)
}

fn gaussian_from_rng(
    n_frames: usize,
    d_lat: usize,
    rng: &mut ChaCha8Rng,
) -> Result<LatentTrajectory> {
    let rows: Vec<Vec<f64>> = (0..n_frames)
        .map(|_| (0..d_lat).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    LatentTrajectory::from_rows(&rows)
}

/// The pinned smooth reference: one full sinusoidal cycle per coordinate
/// with seeded amplitudes in [0.5, 1.5) and phases in [0, 2pi). All
/// amplitudes are drawn before all phases.
pub fn water_drop_reference(n_frames: usize, d_lat: usize, seed: u64) -> Result<LatentTrajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps: Vec<f64> = (0..d_lat).map(|_| rng.gen_range(0.5..1.5)).collect();
    let phases: Vec<f64> = (0..d_lat)
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect();
    let rows: Vec<Vec<f64>> = (0..n_frames)
        .map(|n| {
            let pos = (n + 1) as f64 / n_frames as f64;
            (0..d_lat)
                .map(|j| amps[j] * (std::f64::consts::TAU * pos + phases[j]).sin())
                .collect()
        })
        .collect();
    LatentTrajectory::from_rows(&rows)
}

/// (N-1) x d_lat frame differences.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionVectors {
    pub vectors: Array2<f64>,
}

/// M^n = x^{n+1} - x^n for n = 1..N-1. Telescoping holds exactly:
/// the row sum equals x^N - x^1 in floating point.
pub fn motion_vectors(traj: &LatentTrajectory) -> MotionVectors {
    let n = traj.n_frames();
    let head = traj.frames.slice(ndarray::s![1..n, ..]);
    let tail = traj.frames.slice(ndarray::s![..n - 1, ..]);
    MotionVectors {
        vectors: &head - &tail,
    }
}

/// Cosine similarity of two motion-vector fields, flattened. Zero when
/// either field has zero norm.
pub fn motion_cosine(a: &MotionVectors, b: &MotionVectors) -> Result<f64> {
    if a.vectors.dim() != b.vectors.dim() {
        return Err(Error::ShapeMismatch(format!(
            "motion vectors {:?} vs {:?}",
            a.vectors.dim(),
            b.vectors.dim()
        )));
    }
    let dot: f64 = a.vectors.iter().zip(b.vectors.iter()).map(|(x, y)| x * y).sum();
    let na: f64 = a.vectors.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.vectors.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na * nb))
}

/// x_t = t*x1 + (1-t)*x0 elementwise. Endpoints are exact, and
/// motion_vectors(x_t) = t*M1 + (1-t)*M0 by linearity of differencing.
pub fn interpolate_latent(
    x0: &LatentTrajectory,
    x1: &LatentTrajectory,
    t: f64,
) -> Result<LatentTrajectory> {
    if x0.frames.dim() != x1.frames.dim() {
        return Err(Error::ShapeMismatch(format!(
            "interpolation endpoints {:?} vs {:?}",
            x0.frames.dim(),
            x1.frames.dim()
        )));
    }
    Ok(LatentTrajectory {
        frames: &x0.frames * (1.0 - t) + &x1.frames * t,
    })
}

/// Low-rank adapter on the affine velocity map. The effective update is
/// scale/rank * B*A; B starts at zero so a fresh adapter is a strict no-op.
/// The requested rank is capped at d_lat, the toy map's inner dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub rank: usize,
    pub scale: f64,
}

impl LoraAdapter {
    /// A is seeded Gaussian scaled by 1/sqrt(d_lat + 2); B is zero.
    pub fn seeded(d_lat: usize, requested_rank: usize, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let rank = requested_rank.min(d_lat).max(1);
        let d_in = d_lat + 2;
        let std = 1.0 / (d_in as f64).sqrt();
        let a = Array2::from_shape_fn((rank, d_in), |_| {
            let g: f64 = rng.sample(StandardNormal);
            g * std
        });
        Self {
            a,
            b: Array2::zeros((d_lat, rank)),
            rank,
            scale,
        }
    }

    /// scale/rank * B*A, shaped like the base map.
    pub fn delta(&self) -> Array2<f64> {
        self.b.dot(&self.a) * (self.scale / self.rank as f64)
    }
}

/// Affine velocity field over `[frame latent; t; n/N]` with a low-rank
/// adapter; the base map stands in for a frozen pretrained backbone.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityModel {
    pub w_base: Array2<f64>,
    pub lora: LoraAdapter,
    pub adapted: bool,
}

impl VelocityModel {
    pub fn new(w_base: Array2<f64>, lora: LoraAdapter, adapted: bool) -> Result<Self> {
        let (d, d_in) = w_base.dim();
        if d_in != d + 2 {
            return Err(Error::ShapeMismatch(format!(
                "base map is {d}x{d_in}, expected {d}x{}",
                d + 2
            )));
        }
        if lora.a.dim() != (lora.rank, d_in) || lora.b.dim() != (d, lora.rank) {
            return Err(Error::ShapeMismatch(format!(
                "adapter shapes A{:?} B{:?} inconsistent with rank {} and base {d}x{d_in}",
                lora.a.dim(),
                lora.b.dim(),
                lora.rank
            )));
        }
        Ok(Self {
            w_base,
            lora,
            adapted,
        })
    }

    /// All-zero base map with a seeded fresh adapter.
    pub fn zero_base(d_lat: usize, rank: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            w_base: Array2::zeros((d_lat, d_lat + 2)),
            lora: LoraAdapter::seeded(d_lat, rank, scale, &mut rng),
            adapted: false,
        }
    }

    /// Seeded standard-Gaussian base map standing in for a pretrained
    /// backbone (entries row-major), plus a fresh adapter from the same
    /// stream. A zero base makes adaptation trivially unrewarding; a random
    /// base gives training something to overwrite.
    pub fn seeded_base(d_lat: usize, rank: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w_base = Array2::from_shape_fn((d_lat, d_lat + 2), |_| rng.sample(StandardNormal));
        Self {
            w_base,
            lora: LoraAdapter::seeded(d_lat, rank, scale, &mut rng),
            adapted: false,
        }
    }

    pub fn d_lat(&self) -> usize {
        self.w_base.nrows()
    }

    /// Base map plus adapter update.
    pub fn effective_w(&self) -> Array2<f64> {
        &self.w_base + &self.lora.delta()
    }
}

/// Input rows `[x^n ; t ; n/N]` for every frame (n is 1-based).
fn field_inputs(frames: &Array2<f64>, t: f64) -> Array2<f64> {
    let (n, d) = frames.dim();
    let mut inputs = Array2::zeros((n, d + 2));
    inputs.slice_mut(ndarray::s![.., ..d]).assign(frames);
    for (row, mut r) in inputs.outer_iter_mut().enumerate() {
        r[d] = t;
        r[d + 1] = (row + 1) as f64 / n as f64;
    }
    inputs
}

fn field(w_eff: &Array2<f64>, frames: &Array2<f64>, t: f64) -> Array2<f64> {
    field_inputs(frames, t).dot(&w_eff.t())
}

/// Per-frame velocities v^n = (W_base + scale/rank * B*A) [x^n; t; n/N].
pub fn velocity(model: &VelocityModel, traj: &LatentTrajectory, t: f64) -> Array2<f64> {
    assert_eq!(
        model.d_lat(),
        traj.dim(),
        "velocity model dimension does not match trajectory"
    );
    field(&model.effective_w(), &traj.frames, t)
}

fn check_pair(model: &VelocityModel, x0: &LatentTrajectory, x1: &LatentTrajectory) -> Result<()> {
    if x0.frames.dim() != x1.frames.dim() {
        return Err(Error::ShapeMismatch(format!(
            "trajectory pair {:?} vs {:?}",
            x0.frames.dim(),
            x1.frames.dim()
        )));
    }
    if model.d_lat() != x0.dim() {
        return Err(Error::ShapeMismatch(format!(
            "model dimension {} vs trajectory dimension {}",
            model.d_lat(),
            x0.dim()
        )));
    }
    Ok(())
}

/// Frame-difference inputs `[x_t^{n+1} - x_t^n ; 0 ; 1/N]` at one t. The
/// velocity difference v^{n+1} - v^n equals the effective map applied to
/// these rows: the t channel cancels exactly and the position channel
/// contributes the constant 1/N.
fn difference_inputs(x_t: &LatentTrajectory) -> Array2<f64> {
    let (n, d) = x_t.frames.dim();
    let diffs = motion_vectors(x_t).vectors;
    let mut delta = Array2::zeros((n - 1, d + 2));
    delta.slice_mut(ndarray::s![.., ..d]).assign(&diffs);
    for mut row in delta.outer_iter_mut() {
        row[d + 1] = 1.0 / n as f64;
    }
    delta
}

/// Motion-discrepancy loss: mean over t in t_set and frame pairs n of
/// ||dM^n - (v_t^{n+1} - v_t^n)||^2, with v evaluated on the interpolated
/// trajectory x_t and dM = M1 - M0.
pub fn md_loss(
    model: &VelocityModel,
    x0: &LatentTrajectory,
    x1: &LatentTrajectory,
    t_set: &[f64],
) -> Result<f64> {
    check_pair(model, x0, x1)?;
    if t_set.is_empty() {
        return Err(Error::Metric("motion loss needs at least one t sample".into()));
    }
    let delta_m = &motion_vectors(x1).vectors - &motion_vectors(x0).vectors;
    let w_eff = model.effective_w();
    let n = x0.n_frames();
    let mut total = 0.0;
    for &t in t_set {
        let x_t = interpolate_latent(x0, x1, t)?;
        let resid = &difference_inputs(&x_t).dot(&w_eff.t()) - &delta_m;
        total += resid.iter().map(|r| r * r).sum::<f64>();
    }
    Ok(total / (t_set.len() as f64 * (n - 1) as f64))
}

/// Gradients of [md_loss] with respect to the adapter factors.
#[derive(Debug, Clone)]
pub struct MdGradient {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
}

/// Chain rule through the affine field: with G the loss gradient w.r.t. the
/// effective map, dL/dB = scale/rank * G A^T and dL/dA = scale/rank * B^T G.
pub fn md_loss_grad(
    model: &VelocityModel,
    x0: &LatentTrajectory,
    x1: &LatentTrajectory,
    t_set: &[f64],
) -> Result<MdGradient> {
    check_pair(model, x0, x1)?;
    if t_set.is_empty() {
        return Err(Error::Metric("motion loss needs at least one t sample".into()));
    }
    let delta_m = &motion_vectors(x1).vectors - &motion_vectors(x0).vectors;
    let w_eff = model.effective_w();
    let n = x0.n_frames();
    let d = x0.dim();
    let mut g = Array2::<f64>::zeros((d, d + 2));
    for &t in t_set {
        let x_t = interpolate_latent(x0, x1, t)?;
        let delta = difference_inputs(&x_t);
        let resid = &delta.dot(&w_eff.t()) - &delta_m;
        g = g + resid.t().dot(&delta);
    }
    g *= 2.0 / (t_set.len() as f64 * (n - 1) as f64);
    let factor = model.lora.scale / model.lora.rank as f64;
    Ok(MdGradient {
        a: model.lora.b.t().dot(&g) * factor,
        b: g.dot(&model.lora.a.t()) * factor,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdTrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Uniform t draws per step from [0,1), seeded.
    pub t_samples: usize,
    pub rng_seed: u64,
}

impl Default for MdTrainConfig {
    fn default() -> Self {
        Self {
            steps: 400,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t_samples: 8,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MdTrainReport {
    pub model: VelocityModel,
    /// Loss at each step's sampled t values, before that step's update.
    pub losses: Vec<f64>,
    /// The seeded noise endpoint the pair (x0, reference) was built from.
    pub x0: LatentTrajectory,
}

/// Adam on the motion-discrepancy loss; only the adapter factors move, the
/// base map is frozen. The noise endpoint x0 is drawn once from the seeded
/// stream and held fixed, then each step draws `t_samples` uniform t values
/// from the same stream.
pub fn train_mr_lora(
    reference: &LatentTrajectory,
    model: &VelocityModel,
    config: &MdTrainConfig,
) -> Result<MdTrainReport> {
    if config.steps == 0 || config.t_samples == 0 {
        return Err(Error::Config(
            "motion training needs steps >= 1 and t_samples >= 1".into(),
        ));
    }
    if model.d_lat() != reference.dim() {
        return Err(Error::ShapeMismatch(format!(
            "model dimension {} vs reference dimension {}",
            model.d_lat(),
            reference.dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let x0 = gaussian_from_rng(reference.n_frames(), reference.dim(), &mut rng)?;
    let mut trained = model.clone();
    let mut adam_a = Adam::new(
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.epsilon,
        trained.lora.a.len(),
    );
    let mut adam_b = Adam::new(
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.epsilon,
        trained.lora.b.len(),
    );
    let mut losses = Vec::with_capacity(config.steps);
    for _ in 0..config.steps {
        let t_set: Vec<f64> = (0..config.t_samples).map(|_| rng.gen::<f64>()).collect();
        let loss = md_loss(&trained, &x0, reference, &t_set)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("motion training loss"));
        }
        losses.push(loss);
        let grad = md_loss_grad(&trained, &x0, reference, &t_set)?;
        adam_a.step(
            trained.lora.a.as_slice_mut().expect("contiguous"),
            grad.a.as_slice().expect("contiguous"),
        );
        adam_b.step(
            trained.lora.b.as_slice_mut().expect("contiguous"),
            grad.b.as_slice().expect("contiguous"),
        );
    }
    trained.adapted = true;
    Ok(MdTrainReport {
        model: trained,
        losses,
        x0,
    })
}

/// Explicit Euler on dx/dt = v(x, t) from t=0 to t=1, uniform step 1/steps,
/// field evaluated at left endpoints, all frames updated jointly.
pub fn rf_integrate(model: &VelocityModel, x0: &LatentTrajectory, steps: usize) -> LatentTrajectory {
    assert!(steps >= 1, "integration needs at least one step");
    let w_eff = model.effective_w();
    let h = 1.0 / steps as f64;
    let mut x = x0.frames.clone();
    for i in 0..steps {
        let v = field(&w_eff, &x, i as f64 * h);
        x = x + &v * h;
    }
    LatentTrajectory { frames: x }
}

/// Explicit Euler backward on the same field from t=1 to t=0; composing
/// with [rf_integrate] recovers the input up to O(1/steps).
pub fn rf_invert(model: &VelocityModel, x1: &LatentTrajectory, steps: usize) -> LatentTrajectory {
    assert!(steps >= 1, "inversion needs at least one step");
    let w_eff = model.effective_w();
    let h = 1.0 / steps as f64;
    let mut x = x1.frames.clone();
    for i in 0..steps {
        let v = field(&w_eff, &x, 1.0 - i as f64 * h);
        x = x - &v * h;
    }
    LatentTrajectory { frames: x }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerateMode {
    FromNoise,
    FromInversion,
}

/// Generation: integrate from seeded noise, or invert a reference first and
/// re-integrate (the inversion condition).
pub fn generate(
    model: &VelocityModel,
    mode: GenerateMode,
    reference: Option<&LatentTrajectory>,
    n_frames: usize,
    steps: usize,
    seed: u64,
) -> Result<LatentTrajectory> {
    let out = match mode {
        GenerateMode::FromNoise => {
            let x0 = gaussian_trajectory(n_frames, model.d_lat(), seed)?;
            rf_integrate(model, &x0, steps)
        }
        GenerateMode::FromInversion => {
            let reference = reference.ok_or(Error::MissingComponent {
                component: "reference trajectory",
            })?;
            if reference.dim() != model.d_lat() {
                return Err(Error::ShapeMismatch(format!(
                    "model dimension {} vs reference dimension {}",
                    model.d_lat(),
                    reference.dim()
                )));
            }
            let x0 = rf_invert(model, reference, steps);
            rf_integrate(model, &x0, steps)
        }
    };
    if out.frames.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("generated trajectory"));
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: String,
    d_lat: usize,
    w_base: Vec<Vec<f64>>,
    lora_a: Vec<Vec<f64>>,
    lora_b: Vec<Vec<f64>>,
    rank: usize,
    scale: f64,
    adapted: bool,
}

pub fn save_model<W: std::io::Write>(model: &VelocityModel, mut writer: W) -> Result<()> {
    let file = ModelFile {
        version: MODEL_VERSION.to_string(),
        d_lat: model.d_lat(),
        w_base: rows_of(&model.w_base),
        lora_a: rows_of(&model.lora.a),
        lora_b: rows_of(&model.lora.b),
        rank: model.lora.rank,
        scale: model.lora.scale,
        adapted: model.adapted,
    };
    serde_json::to_writer_pretty(&mut writer, &file)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn load_model<R: std::io::Read>(reader: R) -> Result<VelocityModel> {
    let file: ModelFile = serde_json::from_reader(reader)?;
    if file.version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            expected: MODEL_VERSION.to_string(),
            found: file.version,
        });
    }
    let w_base = matrix_from_rows(&file.w_base, "w_base")?;
    if w_base.dim() != (file.d_lat, file.d_lat + 2) {
        return Err(Error::ShapeMismatch(format!(
            "w_base is {:?}, expected ({}, {})",
            w_base.dim(),
            file.d_lat,
            file.d_lat + 2
        )));
    }
    let lora = LoraAdapter {
        a: matrix_from_rows(&file.lora_a, "lora_a")?,
        b: matrix_from_rows(&file.lora_b, "lora_b")?,
        rank: file.rank,
        scale: file.scale,
    };
    VelocityModel::new(w_base, lora, file.adapted)
}

#[derive(Serialize, Deserialize)]
struct TrajectoryFile {
    d_lat: usize,
    frames: Vec<Vec<f64>>,
}

pub fn save_trajectory<W: std::io::Write>(traj: &LatentTrajectory, mut writer: W) -> Result<()> {
    let file = TrajectoryFile {
        d_lat: traj.dim(),
        frames: traj.to_rows(),
    };
    serde_json::to_writer_pretty(&mut writer, &file)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn load_trajectory<R: std::io::Read>(reader: R) -> Result<LatentTrajectory> {
    let file: TrajectoryFile = serde_json::from_reader(reader)?;
    let traj = LatentTrajectory::from_rows(&file.frames)?;
    if traj.dim() != file.d_lat {
        return Err(Error::DimensionMismatch {
            expected: file.d_lat,
            actual: traj.dim(),
        });
    }
    Ok(traj)
}
