//! Global configuration. Every tunable the stack exposes lives here with its
//! default; run directories snapshot the effective config as TOML.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(default)]
pub struct Config {
    pub sim: SimConfig,
    pub planner: PlannerConfig,
    pub grasp: GraspConfig,
    pub policy: PolicyConfig,
    pub memory: MemoryConfig,
    pub transfer: TransferConfig,
    pub control: ControlConfig,
    pub bench: BenchConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SimConfig {
    /// Max end-effector translation per step (m); longer motions are split.
    pub max_step: f64,
    /// Position tolerance for grasp attachment on close (m).
    pub attach_pos_tol: f64,
    /// Orientation tolerance for attaching to articulated handles (rad).
    pub attach_rot_tol: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            max_step: 0.05,
            attach_pos_tol: 0.015,
            attach_rot_tol: 0.3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PlannerConfig {
    /// Verification failures tolerated per subtask before replanning.
    pub max_retries: u32,
    /// Remote planner request timeout (s).
    pub remote_timeout_secs: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            max_retries: 2,
            remote_timeout_secs: 30,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GraspConfig {
    /// Antipodal normal opposition tolerance (rad).
    pub normal_angle_tol: f64,
    /// Max distance between finger contacts (m).
    pub max_gripper_width: f64,
    /// Contact points must have a cloud neighbor inside the grounded region
    /// within this radius (m).
    pub region_tol: f64,
    /// Pre-grasp standoff along the approach direction (m).
    pub approach_offset: f64,
    /// Vertical lift after grasping (m).
    pub lift_height: f64,
    /// Swept-volume sampling resolution for collision pruning (m).
    pub sweep_resolution: f64,
    /// Candidate sampling seed.
    pub seed: u64,
}

impl Default for GraspConfig {
    fn default() -> Self {
        GraspConfig {
            normal_angle_tol: 0.3,
            max_gripper_width: 0.08,
            region_tol: 0.01,
            approach_offset: 0.08,
            lift_height: 0.10,
            sweep_resolution: 0.005,
            seed: 17,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PolicyConfig {
    /// Action-chunk horizon H.
    pub horizon: usize,
    /// Steps of each predicted chunk executed before re-observing.
    pub exec_horizon: usize,
    /// Points the conditioning cloud is downsampled/padded to.
    pub n_cloud_points: usize,
    /// Encoder output widths.
    pub d_point: usize,
    pub d_state: usize,
    pub d_contact: usize,
    pub d_traj: usize,
    /// Denoiser channel widths (two resolution levels).
    pub unet_channels: [usize; 2],
    /// Forward-process length K.
    pub diffusion_steps: usize,
    /// Deterministic sampling substeps S.
    pub ddim_substeps: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Demo frames skipped between consecutive training windows.
    pub window_stride: usize,
    pub seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            horizon: 16,
            exec_horizon: 8,
            n_cloud_points: 512,
            d_point: 64,
            d_state: 32,
            d_contact: 32,
            d_traj: 64,
            unet_channels: [64, 128],
            diffusion_steps: 50,
            ddim_substeps: 10,
            learning_rate: 1e-3,
            epochs: 80,
            batch_size: 16,
            window_stride: 1,
            seed: 0,
        }
    }
}

impl PolicyConfig {
    /// Hash of the architecture-shaping fields; a checkpoint written under
    /// one shape is rejected under another.
    pub fn shape_hash(&self) -> u64 {
        let repr = format!(
            "{}|{}|{}|{}|{}|{}|{}|{}|{}",
            self.horizon,
            self.n_cloud_points,
            self.d_point,
            self.d_state,
            self.d_contact,
            self.d_traj,
            self.unet_channels[0],
            self.unet_channels[1],
            self.diffusion_steps,
        );
        fnv1a(repr.as_bytes())
    }

    /// Frozen miniature configuration used for gradient checking.
    pub fn tiny() -> Self {
        PolicyConfig {
            horizon: 4,
            exec_horizon: 2,
            n_cloud_points: 16,
            d_point: 8,
            d_state: 8,
            d_contact: 8,
            d_traj: 8,
            unet_channels: [8, 16],
            diffusion_steps: 10,
            ddim_substeps: 5,
            learning_rate: 1e-3,
            epochs: 4,
            batch_size: 4,
            window_stride: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct MemoryConfig {
    /// Stored trajectories are arc-length resampled to this many waypoints.
    pub traj_waypoints: usize,
    /// Skip insertion when an entry in the same bucket is closer than this
    /// cosine similarity (off by default: unconditional append).
    pub dedup_threshold: Option<f32>,
    /// When the joint kind is unknown at query time, search both buckets.
    pub try_both_buckets: bool,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig {
            traj_waypoints: 16,
            dedup_threshold: None,
            try_both_buckets: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TransferConfig {
    pub ransac_iters: usize,
    /// RANSAC / ICP inlier distance (m).
    pub inlier_tol: f64,
    pub icp_max_iters: usize,
    /// ICP stops when RMS change falls below this.
    pub icp_tol: f64,
    /// Minimum points per part cloud for registration.
    pub min_points: usize,
    /// Below this inlier fraction the transfer is flagged low-confidence.
    pub low_confidence_frac: f64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            ransac_iters: 256,
            inlier_tol: 0.01,
            icp_max_iters: 50,
            icp_tol: 1e-6,
            min_points: 20,
            low_confidence_frac: 0.3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ControlConfig {
    /// Sim steps allowed per subtask.
    pub step_budget: usize,
    /// Execute transferred trajectories open-loop instead of the policy.
    pub open_loop: bool,
    /// Disable memory insertion during evaluation.
    pub freeze_bank: bool,
    /// Ablation: bypass task decomposition.
    pub use_reasoner: bool,
    /// Ablation: object-level instead of part-level correspondence.
    pub use_part_transfer: bool,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            step_budget: 400,
            open_loop: false,
            freeze_bank: false,
            use_reasoner: true,
            use_part_transfer: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct BenchConfig {
    /// Test-task counts for levels L0..L4.
    pub level_counts: [usize; 5],
    pub demos_per_task: usize,
    /// Placement jitter: uniform translation (m) and yaw (rad).
    pub jitter_translation: f64,
    pub jitter_yaw: f64,
    pub eval_seeds: Vec<u64>,
    pub suite_seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            level_counts: [10, 6, 6, 4, 4],
            demos_per_task: 50,
            jitter_translation: 0.05,
            jitter_yaw: 15.0_f64.to_radians(),
            eval_seeds: vec![0, 1, 2],
            suite_seed: 42,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Validation(format!("config serialization: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Hash of the policy-shaping fields, stored in checkpoints so a file
    /// trained under one architecture is rejected under another.
    pub fn policy_hash(&self) -> u64 {
        let repr = format!(
            "{}|{}|{}|{}|{}|{}|{}|{}|{}|{}",
            self.policy.horizon,
            self.policy.n_cloud_points,
            self.policy.d_point,
            self.policy.d_state,
            self.policy.d_contact,
            self.policy.d_traj,
            self.policy.unet_channels[0],
            self.policy.unet_channels[1],
            self.policy.diffusion_steps,
            self.memory.traj_waypoints,
        );
        fnv1a(repr.as_bytes())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = Config::default();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: Config = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg: Config = toml::from_str("[sim]\nmax_step = 0.02\n").unwrap();
        assert_eq!(cfg.sim.max_step, 0.02);
        assert_eq!(cfg.policy.horizon, 16);
        assert_eq!(cfg.bench.level_counts, [10, 6, 6, 4, 4]);
    }

    #[test]
    fn policy_hash_tracks_architecture() {
        let a = Config::default();
        let mut b = Config::default();
        b.policy.d_point = 32;
        assert_ne!(a.policy_hash(), b.policy_hash());
        assert_eq!(a.policy_hash(), Config::default().policy_hash());
    }
}
