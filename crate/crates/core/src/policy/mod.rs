//! Conditional denoising policy for articulated manipulation: four condition
//! encoders (point cloud, robot state, contact, affordance trajectory) feed a
//! FiLM-modulated temporal U-Net trained to predict the noise added to
//! expert action chunks; inference runs deterministic DDIM sampling inside a
//! receding-horizon loop.

pub mod net;
pub mod schedule;
pub mod tape;
pub mod tensor;

mod checkpoint;

use nalgebra::{Point3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::path::Path;

use crate::config::PolicyConfig;
use crate::error::{Error, Result};
use crate::geom::{pose_from_seven, pose_to_seven};
use crate::memory::{resample_waypoints, Affordance};
use crate::sim::render::render_observation;
use crate::sim::{Action, Gripper, GripperCmd, Motion, RobotState, Scene, SuccessCondition};

use net::{condition_dim, time_embedding, unet_forward};
use tape::{NodeId, Tape};

pub use net::{ACTION_DIM, POSE_DIM, STATE_DIM};
pub use schedule::{ddim_iterate, ddim_step, noised, NoiseSchedule};
pub use tensor::{GradStore, ParamStore, Tensor};

/// Trajectory waypoints per condition; fixed so attention shapes are static.
pub const TRAJ_POINTS: usize = 16;

/// H-step end-effector action sequence: per step 3 translation, 3 rotation
/// (axis-angle, body frame), and a gripper scalar (closed iff > 0).
#[derive(Debug, Clone, PartialEq)]
pub struct ActionChunk {
    pub steps: Vec<[f64; ACTION_DIM]>,
}

impl ActionChunk {
    pub fn zeros(horizon: usize) -> ActionChunk {
        ActionChunk {
            steps: vec![[0.0; ACTION_DIM]; horizon],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.steps.iter().flatten().all(|v| v.is_finite())
    }

    /// Flatten to `(ACTION_DIM, H)` row-major: `flat[d·H + t] = steps[t][d]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let h = self.steps.len();
        let mut flat = vec![0.0; ACTION_DIM * h];
        for (t, s) in self.steps.iter().enumerate() {
            for d in 0..ACTION_DIM {
                flat[d * h + t] = s[d];
            }
        }
        flat
    }

    pub fn from_flat(horizon: usize, flat: &[f64]) -> ActionChunk {
        assert_eq!(flat.len(), ACTION_DIM * horizon);
        let mut steps = vec![[0.0; ACTION_DIM]; horizon];
        for (t, s) in steps.iter_mut().enumerate() {
            for d in 0..ACTION_DIM {
                s[d] = flat[d * horizon + t];
            }
        }
        ActionChunk { steps }
    }
}

/// Encoder outputs plus their concatenation f_t.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionVector {
    pub f_point: Vec<f64>,
    pub f_state: Vec<f64>,
    pub f_contact: Vec<f64>,
    pub f_traj: Vec<f64>,
    pub concatenated: Vec<f64>,
}

/// Raw conditioning inputs before encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionInput {
    pub cloud: Vec<Point3<f64>>,
    pub state: [f64; STATE_DIM],
    pub contact: [f64; 3],
    pub traj: Vec<[f64; POSE_DIM]>,
}

impl ConditionInput {
    pub fn from_parts(
        cloud: Vec<Point3<f64>>,
        robot: &RobotState,
        affordance: &Affordance,
    ) -> ConditionInput {
        let traj = resample_waypoints(&affordance.trajectory, TRAJ_POINTS)
            .iter()
            .map(pose_to_seven)
            .collect();
        ConditionInput {
            cloud,
            state: state_vector(robot),
            contact: affordance.contact.coords.into(),
            traj,
        }
    }
}

/// Proprioception as an 8-vector: ee pose septuple plus a ±1 gripper flag.
pub fn state_vector(robot: &RobotState) -> [f64; STATE_DIM] {
    let p = pose_to_seven(&robot.ee_pose);
    let g = match robot.gripper {
        Gripper::Closed => 1.0,
        Gripper::Open => -1.0,
    };
    [p[0], p[1], p[2], p[3], p[4], p[5], p[6], g]
}

/// One control step of a demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoFrame {
    pub cloud: Vec<Point3<f64>>,
    pub state: [f64; STATE_DIM],
    pub contact: [f64; 3],
    pub traj: Vec<[f64; POSE_DIM]>,
    pub action: [f64; ACTION_DIM],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolicyDemo {
    pub frames: Vec<DemoFrame>,
}

/// Per-dimension z-score statistics for actions, stored with the weights and
/// inverted at inference.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionNorm {
    pub mean: [f64; ACTION_DIM],
    pub std: [f64; ACTION_DIM],
}

impl ActionNorm {
    pub fn identity() -> ActionNorm {
        ActionNorm {
            mean: [0.0; ACTION_DIM],
            std: [1.0; ACTION_DIM],
        }
    }

    fn fit(chunks: &[Vec<f64>], horizon: usize) -> ActionNorm {
        let mut mean = [0.0; ACTION_DIM];
        let mut var = [0.0; ACTION_DIM];
        let count = (chunks.len() * horizon) as f64;
        for flat in chunks {
            for d in 0..ACTION_DIM {
                for t in 0..horizon {
                    mean[d] += flat[d * horizon + t];
                }
            }
        }
        for m in &mut mean {
            *m /= count;
        }
        for flat in chunks {
            for d in 0..ACTION_DIM {
                for t in 0..horizon {
                    let v = flat[d * horizon + t] - mean[d];
                    var[d] += v * v;
                }
            }
        }
        let mut std = [0.0; ACTION_DIM];
        for d in 0..ACTION_DIM {
            std[d] = (var[d] / count).sqrt().max(1e-6);
        }
        ActionNorm { mean, std }
    }

    fn normalize_flat(&self, flat: &mut [f64], horizon: usize) {
        for d in 0..ACTION_DIM {
            for t in 0..horizon {
                flat[d * horizon + t] = (flat[d * horizon + t] - self.mean[d]) / self.std[d];
            }
        }
    }

    fn denormalize_flat(&self, flat: &mut [f64], horizon: usize) {
        for d in 0..ACTION_DIM {
            for t in 0..horizon {
                flat[d * horizon + t] = flat[d * horizon + t] * self.std[d] + self.mean[d];
            }
        }
    }
}

/// One training example: condition tensors plus the (normalized) chunk.
struct Window {
    cloud: Tensor,
    state: Tensor,
    contact: Tensor,
    traj: Tensor,
    chunk: Vec<f64>,
}

/// Deterministic, permutation-invariant downsample/pad to `n` points:
/// lexicographic sort, then evenly spaced picks (or cyclic repetition).
fn prepare_cloud(points: &[Point3<f64>], n: usize) -> Result<Tensor> {
    if points.is_empty() {
        return Err(Error::Encoding("empty conditioning cloud".into()));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (&points[a], &points[b]);
        p.x.total_cmp(&q.x)
            .then(p.y.total_cmp(&q.y))
            .then(p.z.total_cmp(&q.z))
    });
    let mut t = Tensor::zeros(n, 3);
    for i in 0..n {
        let src = if points.len() >= n {
            order[i * points.len() / n]
        } else {
            order[i % points.len()]
        };
        let p = &points[src];
        *t.at_mut(i, 0) = p.x;
        *t.at_mut(i, 1) = p.y;
        *t.at_mut(i, 2) = p.z;
    }
    Ok(t)
}

/// Resample a 7-vector waypoint list to the fixed attention length.
fn traj_tensor(traj: &[[f64; POSE_DIM]]) -> Result<Tensor> {
    if traj.is_empty() {
        return Err(Error::Encoding("empty affordance trajectory".into()));
    }
    let rows: Vec<[f64; POSE_DIM]> = if traj.len() == TRAJ_POINTS {
        traj.to_vec()
    } else {
        let poses: Vec<_> = traj.iter().map(pose_from_seven).collect();
        resample_waypoints(&poses, TRAJ_POINTS)
            .iter()
            .map(pose_to_seven)
            .collect()
    };
    let mut t = Tensor::zeros(TRAJ_POINTS, POSE_DIM);
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            *t.at_mut(i, j) = *v;
        }
    }
    Ok(t)
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn mix_seed(base: u64, a: u64, b: u64) -> u64 {
    splitmix(base ^ splitmix(a ^ splitmix(b)))
}

/// Result of a receding-horizon rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct ActOutcome {
    pub success: bool,
    pub steps: usize,
    pub chunks: usize,
}

pub struct Policy {
    cfg: PolicyConfig,
    params: ParamStore,
    norm: ActionNorm,
    sched: NoiseSchedule,
}

impl std::fmt::Debug for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Policy")
            .field("horizon", &self.cfg.horizon)
            .field("diffusion_steps", &self.cfg.diffusion_steps)
            .field("parameters", &self.params.scalar_count())
            .finish()
    }
}

impl Policy {
    /// Fresh, untrained policy with seeded initialization.
    pub fn new(cfg: &PolicyConfig) -> Policy {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Policy {
            cfg: cfg.clone(),
            params: net::build_params(cfg, &mut rng),
            norm: ActionNorm::identity(),
            sched: NoiseSchedule::cosine(cfg.diffusion_steps),
        }
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Mutable weight access (ablation and test hooks).
    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.sched
    }

    pub fn norm(&self) -> &ActionNorm {
        &self.norm
    }

    fn condition_graph(
        tape: &mut Tape,
        params: &ParamStore,
        cfg: &PolicyConfig,
        cloud: Tensor,
        state: Tensor,
        contact: Tensor,
        traj: Tensor,
    ) -> (NodeId, NodeId, NodeId, NodeId, NodeId) {
        let cloud = tape.leaf(cloud);
        let state = tape.leaf(state);
        let contact = tape.leaf(contact);
        let traj = tape.leaf(traj);
        let f_p = net::pointnet(tape, params, cloud);
        let f_s = net::state_mlp(tape, params, state);
        let f_c = net::contact_mlp(tape, params, contact);
        let f_t = net::traj_encoder(tape, params, traj, cfg.d_traj);
        let cat = tape.concat_cols(&[f_p, f_s, f_c, f_t]);
        (f_p, f_s, f_c, f_t, cat)
    }

    /// Encode raw conditioning inputs into the global condition vector.
    pub fn encode_condition(&self, input: &ConditionInput) -> Result<ConditionVector> {
        let cloud = prepare_cloud(&input.cloud, self.cfg.n_cloud_points)?;
        let state = Tensor::row_vec(input.state.to_vec());
        let contact = Tensor::row_vec(input.contact.to_vec());
        let traj = traj_tensor(&input.traj)?;
        let mut tape = Tape::new();
        let (f_p, f_s, f_c, f_t, cat) =
            Self::condition_graph(&mut tape, &self.params, &self.cfg, cloud, state, contact, traj);
        let out = ConditionVector {
            f_point: tape.value(f_p).data.clone(),
            f_state: tape.value(f_s).data.clone(),
            f_contact: tape.value(f_c).data.clone(),
            f_traj: tape.value(f_t).data.clone(),
            concatenated: tape.value(cat).data.clone(),
        };
        if !out.concatenated.iter().all(|v| v.is_finite()) {
            return Err(Error::Encoding("non-finite condition vector".into()));
        }
        Ok(out)
    }

    /// Noise prediction ε̂(aᵏ, k, f_t); forward only.
    fn predict_eps(&self, a_flat: &[f64], k: usize, f_t: &[f64]) -> Vec<f64> {
        let h = self.cfg.horizon;
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::from_vec(ACTION_DIM, h, a_flat.to_vec()));
        let cond_row = tape.leaf(Tensor::row_vec(f_t.to_vec()));
        let temb = tape.leaf(time_embedding(k));
        let cond = tape.concat_cols(&[cond_row, temb]);
        let eps = unet_forward(&mut tape, &self.params, &self.cfg, a, cond);
        tape.value(eps).data.clone()
    }

    /// DDPM ε-prediction loss on a batch of (chunk, encoded condition)
    /// pairs: per sample draw k ~ U{1..K} and ε ~ N(0, I), noise the
    /// normalized chunk, and average the squared prediction error.
    pub fn training_loss(
        &self,
        batch: &[(ActionChunk, ConditionVector)],
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        self.training_loss_with_predictor(batch, rng, |a_k, k, f_t| self.predict_eps(a_k, k, f_t))
    }

    /// `training_loss` with a caller-supplied noise predictor in place of the
    /// network; lets reference predictors bound the achievable loss.
    pub fn training_loss_with_predictor(
        &self,
        batch: &[(ActionChunk, ConditionVector)],
        rng: &mut ChaCha8Rng,
        mut predictor: impl FnMut(&[f64], usize, &[f64]) -> Vec<f64>,
    ) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Training("empty batch".into()));
        }
        let h = self.cfg.horizon;
        let d_f = condition_dim(&self.cfg);
        let mut total = 0.0;
        for (chunk, cond) in batch {
            if chunk.steps.len() != h {
                return Err(Error::Training(format!(
                    "chunk horizon {} != {h}",
                    chunk.steps.len()
                )));
            }
            if cond.concatenated.len() != d_f {
                return Err(Error::Training(format!(
                    "condition width {} != {d_f}",
                    cond.concatenated.len()
                )));
            }
            let mut a0 = chunk.to_flat();
            self.norm.normalize_flat(&mut a0, h);
            let k = rng.random_range(1..=self.sched.steps());
            let eps: Vec<f64> = (0..a0.len())
                .map(|_| StandardNormal.sample(rng))
                .collect();
            let a_k = noised(&a0, &eps, self.sched.alpha_bar[k]);
            let eps_hat = predictor(&a_k, k, &cond.concatenated);
            let mse = eps
                .iter()
                .zip(&eps_hat)
                .map(|(e, p)| (e - p) * (e - p))
                .sum::<f64>()
                / eps.len() as f64;
            if !mse.is_finite() {
                return Err(Error::Training("non-finite loss in forward pass".into()));
            }
            total += mse;
        }
        Ok(total / batch.len() as f64)
    }

    /// Full forward/backward for one window; returns (loss, gradients).
    fn window_pass(
        params: &ParamStore,
        cfg: &PolicyConfig,
        sched: &NoiseSchedule,
        w: &Window,
        seed: u64,
    ) -> (f64, GradStore) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = cfg.horizon;
        let k = rng.random_range(1..=sched.steps());
        let eps_data: Vec<f64> = (0..ACTION_DIM * h)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let a_k = noised(&w.chunk, &eps_data, sched.alpha_bar[k]);

        let mut tape = Tape::new();
        let (_, _, _, _, f_t) = Self::condition_graph(
            &mut tape,
            params,
            cfg,
            w.cloud.clone(),
            w.state.clone(),
            w.contact.clone(),
            w.traj.clone(),
        );
        let temb = tape.leaf(time_embedding(k));
        let cond = tape.concat_cols(&[f_t, temb]);
        let a = tape.leaf(Tensor::from_vec(ACTION_DIM, h, a_k));
        let eps_hat = unet_forward(&mut tape, params, cfg, a, cond);
        let eps = tape.leaf(Tensor::from_vec(ACTION_DIM, h, eps_data));
        let diff = tape.sub(eps_hat, eps);
        let sq = tape.mul(diff, diff);
        let loss = tape.mean_all(sq);
        let value = tape.value(loss).data[0];
        let grads = tape.backward(loss, params);
        (value, grads)
    }

    /// Train a fresh policy on demonstrations; returns the policy and the
    /// per-epoch mean loss curve.
    pub fn train(demos: &[PolicyDemo], cfg: &PolicyConfig) -> Result<(Policy, Vec<f64>)> {
        let windows = build_windows(demos, cfg)?;
        let norm = ActionNorm::fit(
            &windows.iter().map(|w| w.chunk.clone()).collect::<Vec<_>>(),
            cfg.horizon,
        );
        let mut windows = windows;
        for w in &mut windows {
            norm.normalize_flat(&mut w.chunk, cfg.horizon);
        }

        let mut policy = Policy::new(cfg);
        policy.norm = norm;
        let sched = policy.sched.clone();

        // Momentum-free adaptive steps: RMS-scaled per-parameter rates.
        let mut second_moment: Vec<Vec<f64>> = policy
            .params
            .iter()
            .map(|(_, t)| vec![0.0; t.len()])
            .collect();
        let (rho, eps_opt) = (0.99, 1e-8);

        let mut curve = Vec::with_capacity(cfg.epochs);
        let mut order: Vec<usize> = (0..windows.len()).collect();
        for epoch in 0..cfg.epochs {
            let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0xE0, epoch as u64));
            order.shuffle(&mut shuffle_rng);

            let mut epoch_loss = 0.0;
            let mut seen = 0usize;
            for (batch_idx, batch) in order.chunks(cfg.batch_size.max(1)).enumerate() {
                // Parallel forward/backward with a fixed-order reduction.
                let results: Vec<(f64, GradStore)> = batch
                    .par_iter()
                    .map(|&wi| {
                        let seed =
                            mix_seed(cfg.seed, (epoch * 0x10000 + batch_idx) as u64, wi as u64);
                        Self::window_pass(&policy.params, cfg, &sched, &windows[wi], seed)
                    })
                    .collect();

                let mut grads = GradStore::zeros_like(&policy.params);
                let mut batch_loss = 0.0;
                for (loss, g) in &results {
                    batch_loss += loss;
                    grads.accumulate(g);
                }
                batch_loss /= batch.len() as f64;
                grads.scale(1.0 / batch.len() as f64);

                if !batch_loss.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite loss at epoch {epoch}"
                    )));
                }
                if batch_loss > 1e3 {
                    return Err(Error::Training(format!(
                        "training diverged at epoch {epoch}: loss {batch_loss:.3e}"
                    )));
                }

                for (pid, g) in grads.grads.iter().enumerate() {
                    let v = &mut second_moment[pid];
                    let t = policy.params.get_mut(pid);
                    for (j, gj) in g.data.iter().enumerate() {
                        v[j] = rho * v[j] + (1.0 - rho) * gj * gj;
                        t.data[j] -= cfg.learning_rate * gj / (v[j].sqrt() + eps_opt);
                    }
                }
                epoch_loss += batch_loss * batch.len() as f64;
                seen += batch.len();
            }
            curve.push(epoch_loss / seen as f64);
            if !policy.params.all_finite() {
                return Err(Error::Training(format!(
                    "non-finite parameters after epoch {epoch}"
                )));
            }
        }
        Ok((policy, curve))
    }

    /// Deterministic DDIM sampling from the learned denoiser.
    pub fn ddim_sample(&self, cond: &ConditionVector, seed: u64) -> Result<ActionChunk> {
        let d_f = condition_dim(&self.cfg);
        if cond.concatenated.len() != d_f {
            return Err(Error::Policy(format!(
                "condition width {} != {d_f}",
                cond.concatenated.len()
            )));
        }
        let h = self.cfg.horizon;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init: Vec<f64> = (0..ACTION_DIM * h)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let mut flat = ddim_iterate(&self.sched, self.cfg.ddim_substeps, init, |a, k| {
            self.predict_eps(a, k, &cond.concatenated)
        })?;
        self.norm.denormalize_flat(&mut flat, h);
        let chunk = ActionChunk::from_flat(h, &flat);
        if !chunk.is_finite() {
            return Err(Error::Policy("non-finite action chunk".into()));
        }
        Ok(chunk)
    }

    /// Receding-horizon closed loop: encode, sample a chunk, execute the
    /// first `exec_horizon` steps, re-observe; stops on verified success or
    /// an exhausted step budget (a failure outcome, not an error).
    pub fn act(
        &self,
        scene: &mut Scene,
        part_label: &str,
        affordance: &Affordance,
        success: &SuccessCondition,
        budget: usize,
        seed: u64,
    ) -> Result<ActOutcome> {
        let mut steps = 0usize;
        let mut chunks = 0usize;
        loop {
            if scene.evaluate(success)? {
                return Ok(ActOutcome {
                    success: true,
                    steps,
                    chunks,
                });
            }
            if steps >= budget {
                return Ok(ActOutcome {
                    success: false,
                    steps,
                    chunks,
                });
            }

            let obs = render_observation(scene);
            let label = obs.labels.index_of(part_label).ok_or_else(|| {
                Error::Perception(format!("no visible points for {part_label}"))
            })?;
            let points = obs
                .cloud
                .select(&obs.cloud.indices_with_label(label))
                .points;
            let input = ConditionInput::from_parts(points, &scene.robot, affordance);
            let cond = self.encode_condition(&input)?;
            let chunk = self.ddim_sample(&cond, mix_seed(seed, 0xAC7, chunks as u64))?;
            chunks += 1;

            for step in chunk.steps.iter().take(self.cfg.exec_horizon.max(1)) {
                let mut translation = Vector3::new(step[0], step[1], step[2]);
                let max_step = scene.cfg.max_step;
                if translation.norm() > max_step {
                    translation *= max_step / translation.norm();
                }
                let rotation = Vector3::new(step[3], step[4], step[5]);
                let gripper = if step[6] > 0.0 {
                    GripperCmd::Close
                } else {
                    GripperCmd::Open
                };
                scene.step(&Action {
                    motion: Motion::Delta {
                        translation,
                        rotation,
                    },
                    gripper,
                });
                steps += 1;
                if scene.evaluate(success)? {
                    return Ok(ActOutcome {
                        success: true,
                        steps,
                        chunks,
                    });
                }
                if steps >= budget {
                    return Ok(ActOutcome {
                        success: false,
                        steps,
                        chunks,
                    });
                }
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.cfg, &self.params, &self.norm)
    }

    pub fn load(path: &Path, cfg: &PolicyConfig) -> Result<Policy> {
        let (params, norm) = checkpoint::load(path, cfg)?;
        Ok(Policy {
            cfg: cfg.clone(),
            params,
            norm,
            sched: NoiseSchedule::cosine(cfg.diffusion_steps),
        })
    }
}

/// Validate the analytic gradient of one full training pass (all four
/// encoders, the U-Net, and the ε-MSE loss) against central finite
/// differences with h = 1e-4. Every weight tensor is randomized first so
/// zero-initialized layers also carry gradient. Returns the worst per-tensor
/// relative error ‖g_analytic − g_fd‖ / max(‖g_analytic‖, ‖g_fd‖).
pub fn gradient_check(cfg: &PolicyConfig, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = net::build_params(cfg, &mut rng);
    let names: Vec<String> = params.iter().map(|(n, _)| n.to_string()).collect();
    for name in &names {
        let t = params.by_name_mut(name);
        let (rows, cols) = (t.rows, t.cols);
        *t = Tensor::xavier(rows, cols, &mut rng);
    }

    fn rand_tensor(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Tensor {
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-scale..scale))
            .collect();
        Tensor::from_vec(rows, cols, data)
    }

    // The pooled point feature is piecewise smooth; a finite-difference probe
    // is only valid while every column keeps its argmax. Resample the cloud
    // until each column's winner leads by a margin no ±h weight nudge can
    // close.
    let h = 1e-4;
    let cloud = (0..64)
        .map(|_| rand_tensor(cfg.n_cloud_points, 3, 0.5, &mut rng))
        .find(|cloud| {
            let mut probe = Tape::new();
            let c = probe.leaf(cloud.clone());
            let pre = net::pointnet_prepool(&mut probe, &params, c);
            let feats = probe.value(pre);
            (0..feats.cols).all(|col| {
                let mut best = f64::NEG_INFINITY;
                let mut second = f64::NEG_INFINITY;
                for r in 0..feats.rows {
                    let v = feats.at(r, col);
                    if v > best {
                        second = best;
                        best = v;
                    } else if v > second {
                        second = v;
                    }
                }
                best - second > 200.0 * h
            })
        })
        .ok_or_else(|| Error::Training("gradient check: no tie-free cloud found".into()))?;

    let window = Window {
        cloud,
        state: rand_tensor(1, STATE_DIM, 0.5, &mut rng),
        contact: rand_tensor(1, 3, 0.5, &mut rng),
        traj: rand_tensor(TRAJ_POINTS, POSE_DIM, 0.5, &mut rng),
        chunk: (0..ACTION_DIM * cfg.horizon)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    };

    let sched = NoiseSchedule::cosine(cfg.diffusion_steps);
    // One fixed pass seed: k and ε are then a deterministic function of it,
    // so the loss is a smooth function of the parameters alone.
    let pass_seed = splitmix(seed ^ 0x6AD);
    let (_, grads) = Policy::window_pass(&params, cfg, &sched, &window, pass_seed);

    let mut worst = 0.0f64;
    for pid in 0..params.len() {
        let n = params.get(pid).len();
        let mut diff_sq = 0.0;
        let mut an_sq = 0.0;
        let mut fd_sq = 0.0;
        for j in 0..n {
            let orig = params.get(pid).data[j];
            params.get_mut(pid).data[j] = orig + h;
            let (up, _) = Policy::window_pass(&params, cfg, &sched, &window, pass_seed);
            params.get_mut(pid).data[j] = orig - h;
            let (dn, _) = Policy::window_pass(&params, cfg, &sched, &window, pass_seed);
            params.get_mut(pid).data[j] = orig;
            let fd = (up - dn) / (2.0 * h);
            let an = grads.grads[pid].data[j];
            diff_sq += (an - fd) * (an - fd);
            an_sq += an * an;
            fd_sq += fd * fd;
        }
        let denom = an_sq.max(fd_sq).sqrt();
        if denom < 1e-9 {
            return Err(Error::Training(format!(
                "gradient check: tensor '{}' received no gradient",
                names[pid]
            )));
        }
        worst = worst.max(diff_sq.sqrt() / denom);
    }
    Ok(worst)
}

/// Convert demos to (condition, chunk) windows by sliding a length-H window
/// over each demo's actions (end-clamped), conditioning on the window's
/// first frame.
fn build_windows(demos: &[PolicyDemo], cfg: &PolicyConfig) -> Result<Vec<Window>> {
    let mut windows = Vec::new();
    let stride = cfg.window_stride.max(1);
    for demo in demos {
        let n = demo.frames.len();
        for start in (0..n).step_by(stride) {
            let frame = &demo.frames[start];
            let mut chunk = ActionChunk::zeros(cfg.horizon);
            for t in 0..cfg.horizon {
                chunk.steps[t] = demo.frames[(start + t).min(n - 1)].action;
            }
            windows.push(Window {
                cloud: prepare_cloud(&frame.cloud, cfg.n_cloud_points)?,
                state: Tensor::row_vec(frame.state.to_vec()),
                contact: Tensor::row_vec(frame.contact.to_vec()),
                traj: traj_tensor(&frame.traj)?,
                chunk: chunk.to_flat(),
            });
        }
    }
    if windows.is_empty() {
        return Err(Error::Training("empty training dataset".into()));
    }
    Ok(windows)
}

/// Append an `epoch,loss` CSV next to the other run artifacts.
pub fn write_loss_csv(path: &Path, losses: &[f64]) -> Result<()> {
    let mut out = String::from("epoch,loss\n");
    for (i, l) in losses.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}
