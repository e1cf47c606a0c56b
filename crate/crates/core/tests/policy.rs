//! Denoising-policy behavior: end-to-end gradient checks against finite
//! differences, encoder invariances, loss statistics against closed-form
//! oracles, training determinism and memorization, DDIM sampling contracts,
//! checkpoint round trips, and the receding-horizon loop on a drawer scene.

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use articulab::config::{PolicyConfig, SimConfig};
use articulab::geom::pose_to_seven;
use articulab::memory::Affordance;
use articulab::policy::{
    gradient_check, state_vector, ActionChunk, ConditionInput, DemoFrame, Policy, PolicyDemo,
    ACTION_DIM, POSE_DIM, STATE_DIM, TRAJ_POINTS,
};
use articulab::sim::render::render_observation;
use articulab::sim::{
    Action, Attachment, Gripper, GripperCmd, Motion, Scene, SuccessCondition,
};

fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Scattered but reproducible point cloud.
fn random_cloud(n: usize, seed: u64) -> Vec<Point3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Point3::new(
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.4..0.4),
                rng.random_range(0.0..0.5),
            )
        })
        .collect()
}

/// Straight-line trajectory of 7-vector waypoints from `from` along `dir`.
fn line_traj(from: Point3<f64>, dir: Vector3<f64>, n: usize) -> Vec<[f64; POSE_DIM]> {
    (0..n)
        .map(|i| {
            let p = from + dir * (i as f64 / (n - 1).max(1) as f64);
            [p.x, p.y, p.z, 1.0, 0.0, 0.0, 0.0]
        })
        .collect()
}

fn condition_input(cloud: Vec<Point3<f64>>, traj: Vec<[f64; POSE_DIM]>) -> ConditionInput {
    ConditionInput {
        cloud,
        state: [0.4, 0.0, 0.3, 1.0, 0.0, 0.0, 0.0, -1.0],
        contact: [0.25, 0.05, 0.45],
        traj,
    }
}

// ---------------------------------------------------------------------------
// Gradient correctness
// ---------------------------------------------------------------------------

/// Analytic gradients of the full training pass (all encoders + U-Net + loss)
/// match central finite differences for every weight tensor, on three seeds.
#[test]
fn analytic_gradients_match_finite_differences() {
    let cfg = PolicyConfig::tiny();
    for seed in [1u64, 2, 3] {
        let worst = gradient_check(&cfg, seed).unwrap();
        assert!(
            worst < 1e-3,
            "seed {seed}: worst per-tensor relative gradient error {worst:.3e}"
        );
    }
}

// ---------------------------------------------------------------------------
// Condition encoding
// ---------------------------------------------------------------------------

/// The point-cloud feature is exactly invariant to point order, whether the
/// cloud is downsampled or padded.
#[test]
fn point_feature_ignores_cloud_permutation() {
    let cfg = PolicyConfig::tiny();
    let policy = Policy::new(&cfg);
    for n in [7usize, cfg.n_cloud_points, 3 * cfg.n_cloud_points + 5] {
        let cloud = random_cloud(n, 31 + n as u64);
        let traj = line_traj(Point3::new(0.25, 0.05, 0.45), Vector3::x() * 0.2, 5);
        let base = policy
            .encode_condition(&condition_input(cloud.clone(), traj.clone()))
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..3 {
            let mut shuffled = cloud.clone();
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.random_range(0..=i));
            }
            let out = policy
                .encode_condition(&condition_input(shuffled, traj.clone()))
                .unwrap();
            assert_eq!(out.f_point, base.f_point, "n = {n}");
            assert_eq!(out.concatenated, base.concatenated, "n = {n}");
        }
    }
}

/// Duplicating every point leaves the pooled feature unchanged.
#[test]
fn point_feature_ignores_duplicated_points() {
    let cfg = PolicyConfig::tiny();
    let policy = Policy::new(&cfg);
    let traj = line_traj(Point3::new(0.25, 0.05, 0.45), Vector3::x() * 0.2, 5);
    for n in [6usize, cfg.n_cloud_points, 2 * cfg.n_cloud_points] {
        let cloud = random_cloud(n, 77 + n as u64);
        let mut doubled = cloud.clone();
        doubled.extend_from_slice(&cloud);
        let a = policy
            .encode_condition(&condition_input(cloud, traj.clone()))
            .unwrap();
        let b = policy
            .encode_condition(&condition_input(doubled, traj.clone()))
            .unwrap();
        assert_eq!(a.f_point, b.f_point, "n = {n}");
    }
}

/// Zeroing the last layer of each encoder zeroes the whole condition vector.
#[test]
fn zeroed_output_layers_give_a_zero_condition() {
    let cfg = PolicyConfig::tiny();
    let mut policy = Policy::new(&cfg);
    for name in [
        "pnet/l2/w", "pnet/l2/b", "state/l1/w", "state/l1/b", "contact/l1/w", "contact/l1/b",
        "traj/out/w", "traj/out/b",
    ] {
        let t = policy.params_mut().by_name_mut(name);
        t.data.iter_mut().for_each(|v| *v = 0.0);
    }
    let cloud = random_cloud(40, 5);
    let traj = line_traj(Point3::new(0.25, 0.05, 0.45), Vector3::x() * 0.2, 9);
    let out = policy
        .encode_condition(&condition_input(cloud, traj))
        .unwrap();
    assert!(out.concatenated.iter().all(|&v| v == 0.0));
    assert_eq!(
        out.concatenated.len(),
        cfg.d_point + cfg.d_state + cfg.d_contact + cfg.d_traj
    );
}

#[test]
fn empty_cloud_is_an_encoding_error() {
    let cfg = PolicyConfig::tiny();
    let policy = Policy::new(&cfg);
    let traj = line_traj(Point3::new(0.25, 0.05, 0.45), Vector3::x() * 0.2, 5);
    let err = policy
        .encode_condition(&condition_input(Vec::new(), traj))
        .unwrap_err();
    assert!(matches!(err, articulab::error::Error::Encoding(_)), "{err}");
}

// ---------------------------------------------------------------------------
// Training loss
// ---------------------------------------------------------------------------

/// A fresh policy predicts ε̂ ≡ 0 (zero-initialized output layer), so the
/// loss is a mean of squared standard normals: within 0.1 of 1 once the
/// batch covers ≥ 10⁴ elements.
#[test]
fn initial_loss_matches_the_noise_variance() {
    let cfg = PolicyConfig::tiny();
    let policy = Policy::new(&cfg);
    let per_sample = ACTION_DIM * cfg.horizon;
    let batch_len = 10_000usize.div_ceil(per_sample);
    let cloud = random_cloud(24, 3);
    let traj = line_traj(Point3::new(0.25, 0.05, 0.45), Vector3::x() * 0.2, 7);
    let cond = policy
        .encode_condition(&condition_input(cloud, traj))
        .unwrap();
    let batch: Vec<_> = (0..batch_len)
        .map(|_| (ActionChunk::zeros(cfg.horizon), cond.clone()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let loss = policy.training_loss(&batch, &mut rng).unwrap();
    assert!(
        (loss - 1.0).abs() < 0.1,
        "loss {loss} over {} elements",
        batch_len * per_sample
    );
}

/// Reconstructing the drawn noise from the noised chunk (possible because
/// the data chunk is known) drives the loss to zero.
#[test]
fn oracle_noise_predictor_zeroes_the_loss() {
    let cfg = PolicyConfig::tiny();
    let policy = Policy::new(&cfg);
    let cloud = random_cloud(24, 4);
    let traj = line_traj(Point3::new(0.25, 0.05, 0.45), Vector3::x() * 0.2, 7);
    let cond = policy
        .encode_condition(&condition_input(cloud, traj))
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let chunk = ActionChunk::from_flat(
        cfg.horizon,
        &(0..ACTION_DIM * cfg.horizon)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect::<Vec<_>>(),
    );
    // A fresh policy has identity normalization, so a0 is the chunk itself:
    // ε = (aᵏ − √ᾱ_k·a0)/√(1−ᾱ_k).
    let a0 = chunk.to_flat();
    let sched = policy.schedule().clone();
    let batch = vec![(chunk, cond); 8];
    let mut loss_rng = ChaCha8Rng::seed_from_u64(33);
    let loss = policy
        .training_loss_with_predictor(&batch, &mut loss_rng, |a_k, k, _| {
            let ab = sched.alpha_bar[k];
            a_k.iter()
                .zip(&a0)
                .map(|(x, a)| (x - ab.sqrt() * a) / (1.0 - ab).sqrt())
                .collect()
        })
        .unwrap();
    assert!(loss < 1e-20, "oracle loss {loss}");
}

#[test]
fn training_loss_is_reproducible_for_a_fixed_seed() {
    let cfg = PolicyConfig::tiny();
    let policy = Policy::new(&cfg);
    let cloud = random_cloud(30, 6);
    let traj = line_traj(Point3::new(0.25, 0.05, 0.45), Vector3::x() * 0.2, 7);
    let cond = policy
        .encode_condition(&condition_input(cloud, traj))
        .unwrap();
    let chunk = ActionChunk::from_flat(
        cfg.horizon,
        &(0..ACTION_DIM * cfg.horizon)
            .map(|i| (i as f64 * 0.13).sin())
            .collect::<Vec<_>>(),
    );
    let batch = vec![(chunk, cond); 5];
    let a = policy
        .training_loss(&batch, &mut ChaCha8Rng::seed_from_u64(7))
        .unwrap();
    let b = policy
        .training_loss(&batch, &mut ChaCha8Rng::seed_from_u64(7))
        .unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn wrong_horizon_or_condition_width_is_a_training_error() {
    let cfg = PolicyConfig::tiny();
    let policy = Policy::new(&cfg);
    let cloud = random_cloud(30, 8);
    let traj = line_traj(Point3::new(0.25, 0.05, 0.45), Vector3::x() * 0.2, 7);
    let mut cond = policy
        .encode_condition(&condition_input(cloud, traj))
        .unwrap();
    let bad_chunk = ActionChunk::zeros(cfg.horizon + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(policy
        .training_loss(&[(bad_chunk, cond.clone())], &mut rng)
        .is_err());
    cond.concatenated.pop();
    assert!(policy
        .training_loss(&[(ActionChunk::zeros(cfg.horizon), cond)], &mut rng)
        .is_err());
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Synthetic demo whose per-frame state advances and whose actions follow a
/// smooth pattern, so each sliding window is identified by its condition.
fn synthetic_demo(n_frames: usize, action_fn: impl Fn(usize) -> [f64; ACTION_DIM]) -> PolicyDemo {
    let cloud = random_cloud(20, 44);
    let traj = line_traj(Point3::new(0.25, 0.05, 0.45), Vector3::x() * 0.25, TRAJ_POINTS);
    let frames = (0..n_frames)
        .map(|t| {
            let mut state = [0.0; STATE_DIM];
            state[0] = 0.3 + 0.03 * t as f64;
            state[2] = 0.4;
            state[3] = 1.0;
            state[7] = 1.0;
            DemoFrame {
                cloud: cloud.clone(),
                state,
                contact: [0.25, 0.05, 0.45],
                traj: traj.clone(),
                action: action_fn(t),
            }
        })
        .collect();
    PolicyDemo { frames }
}

/// One demo, 200 epochs, tiny dims: the network memorizes the mapping from
/// window condition to noise, ending below 0.05 mean squared error.
#[test]
fn training_memorizes_a_single_demo() {
    let mut cfg = PolicyConfig::tiny();
    cfg.epochs = 200;
    cfg.learning_rate = 5e-3;
    cfg.seed = 5;
    let demo = synthetic_demo(6, |t| {
        [
            0.01 * (t + 1) as f64,
            0.002 * t as f64,
            -0.005,
            0.0,
            0.0,
            0.0,
            if t < 3 { 1.0 } else { -1.0 },
        ]
    });
    let (_, curve) = Policy::train(&[demo], &cfg).unwrap();
    assert_eq!(curve.len(), cfg.epochs);
    let final_loss = *curve.last().unwrap();
    assert!(
        final_loss < 0.05,
        "final loss {final_loss} (first epoch {})",
        curve[0]
    );
    assert!(final_loss < curve[0], "loss failed to decrease");
}

#[test]
fn empty_dataset_is_a_training_error() {
    let cfg = PolicyConfig::tiny();
    let err = Policy::train(&[], &cfg).unwrap_err();
    assert!(matches!(err, articulab::error::Error::Training(_)), "{err}");
    let empty_demo = PolicyDemo { frames: Vec::new() };
    assert!(Policy::train(&[empty_demo], &cfg).is_err());
}

/// Two training runs from the same seed produce bit-identical parameters and
/// loss curves, regardless of the worker-pool width.
#[test]
fn training_is_bit_reproducible_across_thread_counts() {
    let mut cfg = PolicyConfig::tiny();
    cfg.epochs = 6;
    cfg.seed = 9;
    let demo = synthetic_demo(8, |t| [0.01, 0.0, 0.004 * t as f64, 0.0, 0.0, 0.0, 1.0]);

    let run = |threads: usize| -> (Vec<u64>, Vec<u64>) {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let (policy, curve) = pool.install(|| Policy::train(&[demo.clone()], &cfg)).unwrap();
        let bits: Vec<u64> = policy
            .params()
            .iter()
            .flat_map(|(_, t)| t.data.iter().map(|v| v.to_bits()))
            .collect();
        (bits, curve.iter().map(|l| l.to_bits()).collect())
    };

    let (p1, c1) = run(1);
    let (p4, c4) = run(4);
    assert_eq!(c1, c4, "loss curves differ across thread counts");
    assert_eq!(p1, p4, "parameters differ across thread counts");
}

// ---------------------------------------------------------------------------
// DDIM sampling
// ---------------------------------------------------------------------------

#[test]
fn sampling_is_deterministic_per_seed() {
    let cfg = PolicyConfig::tiny();
    let policy = Policy::new(&cfg);
    let cloud = random_cloud(30, 17);
    let traj = line_traj(Point3::new(0.25, 0.05, 0.45), Vector3::x() * 0.2, 7);
    let cond = policy
        .encode_condition(&condition_input(cloud, traj))
        .unwrap();
    let a = policy.ddim_sample(&cond, 123).unwrap();
    let b = policy.ddim_sample(&cond, 123).unwrap();
    let c = policy.ddim_sample(&cond, 124).unwrap();
    assert_eq!(a, b, "same seed must give bit-identical chunks");
    assert_ne!(a, c, "different seeds should explore different noise");
    assert_eq!(a.steps.len(), cfg.horizon);
    assert!(a.is_finite());
    let bad = articulab::policy::ConditionVector {
        f_point: vec![],
        f_state: vec![],
        f_contact: vec![],
        f_traj: vec![],
        concatenated: vec![0.0; 3],
    };
    assert!(policy.ddim_sample(&bad, 1).is_err());
}

/// Trained on two demos that differ only in their affordance trajectory,
/// the sampled chunk follows whichever trajectory conditions it.
#[test]
fn sampled_actions_follow_the_affordance_condition() {
    let mut cfg = PolicyConfig::tiny();
    cfg.epochs = 300;
    cfg.learning_rate = 5e-3;
    cfg.seed = 2;
    let contact = Point3::new(0.25, 0.05, 0.45);
    let traj_x = line_traj(contact, Vector3::x() * 0.25, TRAJ_POINTS);
    let traj_z = line_traj(contact, Vector3::z() * 0.25, TRAJ_POINTS);
    let action_x = [0.02, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
    let action_z = [0.0, 0.0, 0.02, 0.0, 0.0, 0.0, 1.0];

    let make_demo = |traj: &Vec<[f64; POSE_DIM]>, action: [f64; ACTION_DIM]| {
        let mut demo = synthetic_demo(6, move |_| action);
        for f in &mut demo.frames {
            f.traj = traj.clone();
        }
        demo
    };
    let demos = vec![make_demo(&traj_x, action_x), make_demo(&traj_z, action_z)];
    let (policy, curve) = Policy::train(&demos, &cfg).unwrap();
    assert!(
        curve.last().unwrap() < &0.2,
        "conditioning run did not converge: final loss {}",
        curve.last().unwrap()
    );

    let classify = |traj: &Vec<[f64; POSE_DIM]>, seed: u64| -> usize {
        let frame = &demos[0].frames[0];
        let cond = policy
            .encode_condition(&ConditionInput {
                cloud: frame.cloud.clone(),
                state: frame.state,
                contact: frame.contact,
                traj: traj.clone(),
            })
            .unwrap();
        let chunk = policy.ddim_sample(&cond, seed).unwrap();
        let dist = |target: [f64; ACTION_DIM]| -> f64 {
            chunk
                .steps
                .iter()
                .map(|s| {
                    s.iter()
                        .zip(&target)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                })
                .sum()
        };
        if dist(action_x) < dist(action_z) {
            0
        } else {
            1
        }
    };

    for seed in [10u64, 11, 12, 13] {
        assert_eq!(classify(&traj_x, seed), 0, "x-trajectory seed {seed}");
        assert_eq!(classify(&traj_z, seed), 1, "z-trajectory seed {seed}");
    }
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

#[test]
fn checkpoint_round_trip_preserves_weights_and_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("policy.bin");
    let mut cfg = PolicyConfig::tiny();
    cfg.epochs = 3;
    let demo = synthetic_demo(6, |t| [0.01 * t as f64, 0.0, -0.003, 0.0, 0.0, 0.0, 1.0]);
    let (policy, _) = Policy::train(&[demo], &cfg).unwrap();
    policy.save(&path).unwrap();

    let loaded = Policy::load(&path, &cfg).unwrap();
    for (name, t) in policy.params().iter() {
        let lt = loaded.params().by_name(name);
        assert_eq!((t.rows, t.cols), (lt.rows, lt.cols), "{name}");
        for (a, b) in t.data.iter().zip(&lt.data) {
            assert_eq!(*a as f32, *b as f32, "{name} beyond f32 precision");
        }
    }
    for d in 0..ACTION_DIM {
        assert_eq!(policy.norm().mean[d] as f32, loaded.norm().mean[d] as f32);
        assert_eq!(policy.norm().std[d] as f32, loaded.norm().std[d] as f32);
    }

    // Saving the loaded policy again is byte-identical: f32 quantization is
    // idempotent.
    let path2 = dir.path().join("policy2.bin");
    loaded.save(&path2).unwrap();
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(&path2).unwrap()
    );
}

#[test]
fn checkpoint_rejects_wrong_shapes_and_bad_magic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("policy.bin");
    let cfg = PolicyConfig::tiny();
    Policy::new(&cfg).save(&path).unwrap();

    let mut other = cfg.clone();
    other.d_point *= 2;
    assert!(Policy::load(&path, &other).is_err(), "shape mismatch accepted");

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] ^= 0xFF;
    let bad = dir.path().join("bad.bin");
    std::fs::write(&bad, &bytes).unwrap();
    assert!(Policy::load(&bad, &cfg).is_err(), "corrupt magic accepted");
}

// ---------------------------------------------------------------------------
// Receding-horizon control on a drawer
// ---------------------------------------------------------------------------

fn drawer_scene() -> Scene {
    Scene::load(&fixture("drawer3.scene"), &SimConfig::default()).unwrap()
}

/// Grips the middle drawer's handle via the public step API so the ee rides
/// the handle frame afterwards.
fn grip_middle_drawer(scene: &mut Scene) {
    let handle = {
        let obj = scene.object("cabinet").unwrap();
        let pi = obj.part_index("drawer_middle").unwrap();
        obj.handle_world(pi).unwrap()
    };
    scene.step(&Action {
        motion: Motion::Absolute(handle),
        gripper: GripperCmd::Close,
    });
    assert_eq!(scene.robot.gripper, Gripper::Closed);
    assert!(
        matches!(&scene.robot.attached, Some(Attachment::Part { part, .. }) if part == "drawer_middle"),
        "failed to attach to the drawer handle"
    );
}

/// Records frames while pulling the drawer open with a constant body-frame
/// action; the observation is the drawer's own labeled points.
fn record_drawer_demo(pull: [f64; ACTION_DIM], n_steps: usize) -> (PolicyDemo, Affordance) {
    let mut scene = drawer_scene();
    grip_middle_drawer(&mut scene);
    let start = scene.robot.ee_pose;
    let affordance = Affordance {
        contact: Point3::from(start.translation.vector),
        trajectory: (0..TRAJ_POINTS)
            .map(|i| {
                let dx = 0.25 * i as f64 / (TRAJ_POINTS - 1) as f64;
                Isometry3::from_parts(
                    Translation3::new(
                        start.translation.x + dx,
                        start.translation.y,
                        start.translation.z,
                    ),
                    UnitQuaternion::identity(),
                )
            })
            .collect(),
    };
    let traj7: Vec<[f64; POSE_DIM]> = affordance.trajectory.iter().map(pose_to_seven).collect();

    let mut frames = Vec::new();
    for _ in 0..n_steps {
        let obs = render_observation(&scene);
        let label = obs.labels.index_of("cabinet/drawer_middle").unwrap();
        let cloud = obs.cloud.select(&obs.cloud.indices_with_label(label)).points;
        frames.push(DemoFrame {
            cloud,
            state: state_vector(&scene.robot),
            contact: affordance.contact.coords.into(),
            traj: traj7.clone(),
            action: pull,
        });
        scene.step(&Action {
            motion: Motion::Delta {
                translation: Vector3::new(pull[0], pull[1], pull[2]),
                rotation: Vector3::zeros(),
            },
            gripper: GripperCmd::Close,
        });
    }
    (PolicyDemo { frames }, affordance)
}

/// Closed-loop drawer opening: train on one scripted pull, then let the
/// receding-horizon loop drive a fresh scene past 75% open.
#[test]
fn trained_policy_opens_the_drawer_closed_loop() {
    let pull = [0.02, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
    let (demo, affordance) = record_drawer_demo(pull, 14);
    let mut cfg = PolicyConfig::tiny();
    cfg.epochs = 30;
    cfg.seed = 3;
    let (policy, curve) = Policy::train(&[demo], &cfg).unwrap();
    assert!(
        curve.last().unwrap() < &curve[0],
        "training loss did not decrease"
    );

    let mut scene = drawer_scene();
    grip_middle_drawer(&mut scene);
    let goal = SuccessCondition::JointAbove {
        object: "cabinet".into(),
        joint: 1,
        frac: 0.75,
    };
    let outcome = policy
        .act(&mut scene, "cabinet/drawer_middle", &affordance, &goal, 150, 41)
        .unwrap();
    assert!(
        outcome.success,
        "drawer not opened: {} steps, {} chunks, joint at {:.3}",
        outcome.steps,
        outcome.chunks,
        scene.object("cabinet").unwrap().joints[1].value
    );
    assert!(outcome.steps <= 150);
    assert!(outcome.chunks >= 1);
    assert!(scene.evaluate(&goal).unwrap());
}

/// An untrained policy flails but the loop degrades to a clean failure.
#[test]
fn untrained_policy_fails_without_crashing() {
    let cfg = PolicyConfig::tiny();
    let policy = Policy::new(&cfg);
    let mut scene = drawer_scene();
    grip_middle_drawer(&mut scene);
    let start = scene.robot.ee_pose;
    let affordance = Affordance {
        contact: Point3::from(start.translation.vector),
        trajectory: vec![start, Isometry3::from_parts(
            Translation3::new(start.translation.x + 0.25, start.translation.y, start.translation.z),
            UnitQuaternion::identity(),
        )],
    };
    let goal = SuccessCondition::JointAbove {
        object: "cabinet".into(),
        joint: 1,
        frac: 0.95,
    };
    let outcome = policy
        .act(&mut scene, "cabinet/drawer_middle", &affordance, &goal, 40, 8)
        .unwrap();
    assert!(!outcome.success);
    assert_eq!(outcome.steps, 40);
}

#[test]
fn zero_budget_fails_immediately() {
    let cfg = PolicyConfig::tiny();
    let policy = Policy::new(&cfg);
    let mut scene = drawer_scene();
    grip_middle_drawer(&mut scene);
    let start = scene.robot.ee_pose;
    let affordance = Affordance {
        contact: Point3::from(start.translation.vector),
        trajectory: vec![start],
    };
    let goal = SuccessCondition::JointAbove {
        object: "cabinet".into(),
        joint: 1,
        frac: 0.5,
    };
    let outcome = policy
        .act(&mut scene, "cabinet/drawer_middle", &affordance, &goal, 0, 1)
        .unwrap();
    assert!(!outcome.success);
    assert_eq!(outcome.steps, 0);
    assert_eq!(outcome.chunks, 0);
}

#[test]
fn unknown_part_label_is_a_perception_error() {
    let cfg = PolicyConfig::tiny();
    let policy = Policy::new(&cfg);
    let mut scene = drawer_scene();
    let start = scene.robot.ee_pose;
    let affordance = Affordance {
        contact: Point3::from(start.translation.vector),
        trajectory: vec![start],
    };
    let goal = SuccessCondition::JointAbove {
        object: "cabinet".into(),
        joint: 1,
        frac: 0.5,
    };
    let err = policy
        .act(&mut scene, "cabinet/no_such_part", &affordance, &goal, 10, 1)
        .unwrap_err();
    assert!(matches!(err, articulab::error::Error::Perception(_)), "{err}");
}
