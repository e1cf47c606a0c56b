//! Grasp synthesis, filtering, pruning, selection, and keyframe planning
//! against analytic fixtures.

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use articulab::config::{GraspConfig, SimConfig};
use articulab::geom::shapes::{PrimitiveKind, Shape};
use articulab::geom::{Aabb, Pose};
use articulab::rigid::{
    execute_keyframes, filter_by_region, generate_candidates, gripper_collides, gripper_volume,
    plan_keyframes, prune_collisions, select_grasp, GraspCandidate, Phase, PixelBox,
};
use articulab::sim::render::render_observation;
use articulab::sim::{
    Camera, Observation, PointCloud, Region, RigidBody, RobotState, Scene, SuccessCondition,
};
use articulab::Error;

fn camera_at(id: &str, eye: Point3<f64>, target: Point3<f64>, up: Vector3<f64>) -> Camera {
    let rot = UnitQuaternion::face_towards(&(target - eye), &up);
    Camera {
        id: id.into(),
        pose: Isometry3::from_parts(Translation3::from(eye.coords), rot),
        fx: 150.0,
        fy: 150.0,
        cx: 64.0,
        cy: 64.0,
        width: 128,
        height: 128,
    }
}

/// Four side cameras looking at `center` from ±x and ±y.
fn ring_cameras(center: Point3<f64>, dist: f64) -> Vec<Camera> {
    vec![
        camera_at("cam_xp", center + Vector3::new(dist, 0.0, 0.0), center, Vector3::z()),
        camera_at("cam_xm", center - Vector3::new(dist, 0.0, 0.0), center, Vector3::z()),
        camera_at("cam_yp", center + Vector3::new(0.0, dist, 0.0), center, Vector3::z()),
        camera_at("cam_ym", center - Vector3::new(0.0, dist, 0.0), center, Vector3::z()),
    ]
}

fn cube(id: &str, center: Point3<f64>, half: f64) -> RigidBody {
    RigidBody {
        id: id.into(),
        shape: Shape::boxed(Vector3::new(half, half, half), Isometry3::identity()),
        pose: Isometry3::translation(center.x, center.y, center.z),
        graspable: true,
    }
}

fn slab(id: &str, center: Point3<f64>, half: Vector3<f64>) -> RigidBody {
    RigidBody {
        id: id.into(),
        shape: Shape::boxed(half, Isometry3::identity()),
        pose: Isometry3::translation(center.x, center.y, center.z),
        graspable: false,
    }
}

fn scene_with(rigid: Vec<RigidBody>, cameras: Vec<Camera>, regions: Vec<Region>) -> Scene {
    Scene {
        cameras,
        objects: vec![],
        rigid,
        regions,
        robot: RobotState::default(),
        steps: 0,
        cfg: SimConfig::default(),
    }
}

fn observe(scene: &Scene) -> Observation {
    render_observation(scene)
}

fn candidates_for(obs: &Observation, body: &str, cfg: &GraspConfig) -> Vec<GraspCandidate> {
    let label = obs.labels.index_of(body).expect("body in label table");
    generate_candidates(&obs.cloud, label, cfg).expect("candidate generation")
}

#[test]
fn cube_grasp_is_top_down_at_face_width() {
    let center = Point3::new(0.5, 0.0, 0.3);
    let scene = scene_with(vec![cube("cube", center, 0.02)], ring_cameras(center, 0.6), vec![]);
    let obs = observe(&scene);
    let cfg = GraspConfig::default();
    let cands = candidates_for(&obs, "cube", &cfg);
    assert!(!cands.is_empty(), "a 4 cm cube is graspable");

    // Contacts of every candidate lie on the target surface.
    let body = scene.body("cube").unwrap();
    for c in &cands {
        assert!(c.score > 0.0 && c.score <= 1.0, "score {} out of range", c.score);
        for contact in &c.contacts {
            assert!(
                body.shape.distance_to_surface(&body.pose, contact) < 1e-4,
                "contact off the surface"
            );
        }
    }

    let best = select_grasp(&cands).unwrap();
    let span = best.contacts[1] - best.contacts[0];
    assert!(
        (span.norm() - 0.04).abs() < 2e-3,
        "separation {} should match the cube width",
        span.norm()
    );
    let approach = best.pose.rotation * Vector3::z();
    assert!(approach.z < -0.95, "expected a top-down approach, got {approach:?}");
    let closing = best.pose.rotation * Vector3::x();
    assert!(closing.z.abs() < 0.2, "closing axis should be near-horizontal");
}

#[test]
fn candidate_generation_is_deterministic() {
    let center = Point3::new(0.5, 0.0, 0.3);
    let scene = scene_with(vec![cube("cube", center, 0.02)], ring_cameras(center, 0.6), vec![]);
    let obs = observe(&scene);
    let cfg = GraspConfig::default();
    let a = candidates_for(&obs, "cube", &cfg);
    let b = candidates_for(&obs, "cube", &cfg);
    assert_eq!(a, b);
}

#[test]
fn oversized_box_yields_no_candidates() {
    // Every face pair is wider than the 8 cm gripper opening.
    let center = Point3::new(0.5, 0.0, 0.3);
    let body = RigidBody {
        id: "bigbox".into(),
        shape: Shape::boxed(Vector3::new(0.06, 0.07, 0.05), Isometry3::identity()),
        pose: Isometry3::translation(center.x, center.y, center.z),
        graspable: true,
    };
    let scene = scene_with(vec![body], ring_cameras(center, 0.8), vec![]);
    let obs = observe(&scene);
    let cands = candidates_for(&obs, "bigbox", &GraspConfig::default());
    assert!(cands.is_empty(), "found {} candidates on an ungraspable box", cands.len());
}

#[test]
fn sparse_target_is_a_perception_error() {
    let center = Point3::new(0.5, 0.0, 0.3);
    let mut cam = camera_at("far", center + Vector3::new(0.6, 0.0, 0.0), center, Vector3::z());
    cam.fx = 20.0;
    cam.fy = 20.0;
    cam.cx = 16.0;
    cam.cy = 16.0;
    cam.width = 32;
    cam.height = 32;
    let scene = scene_with(vec![cube("cube", center, 0.02)], vec![cam], vec![]);
    let obs = observe(&scene);
    let label = obs.labels.index_of("cube").unwrap();
    let err = generate_candidates(&obs.cloud, label, &GraspConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Perception(_)), "got {err:?}");
}

#[test]
fn full_image_region_keeps_every_candidate() {
    let center = Point3::new(0.5, 0.0, 0.3);
    let scene = scene_with(vec![cube("cube", center, 0.02)], ring_cameras(center, 0.6), vec![]);
    let obs = observe(&scene);
    let cfg = GraspConfig::default();
    let cands = candidates_for(&obs, "cube", &cfg);
    let cam = &scene.cameras[0];
    let whole = PixelBox {
        u_min: 0.0,
        v_min: 0.0,
        u_max: cam.width as f64,
        v_max: cam.height as f64,
    };
    let kept = filter_by_region(&cands, &whole, cam, &obs.cloud, &cfg);
    assert_eq!(kept, cands);
}

#[test]
fn region_without_points_keeps_none() {
    let center = Point3::new(0.5, 0.0, 0.3);
    let scene = scene_with(vec![cube("cube", center, 0.02)], ring_cameras(center, 0.6), vec![]);
    let obs = observe(&scene);
    let cfg = GraspConfig::default();
    let cands = candidates_for(&obs, "cube", &cfg);
    assert!(!cands.is_empty());
    // A sliver in the image corner: no cloud point projects there.
    let corner = PixelBox {
        u_min: 0.0,
        v_min: 0.0,
        u_max: 2.0,
        v_max: 2.0,
    };
    let kept = filter_by_region(&cands, &corner, &scene.cameras[0], &obs.cloud, &cfg);
    assert!(kept.is_empty());
}

/// Pixel AABB of a body's points in one camera, padded by one pixel.
fn pixel_bounds(obs: &Observation, camera: &Camera, label: u32) -> PixelBox {
    let mut b = PixelBox {
        u_min: f64::INFINITY,
        v_min: f64::INFINITY,
        u_max: f64::NEG_INFINITY,
        v_max: f64::NEG_INFINITY,
    };
    for (i, p) in obs.cloud.points.iter().enumerate() {
        if obs.cloud.labels[i] != label {
            continue;
        }
        if let Some((u, v, _)) = camera.project(p) {
            b.u_min = b.u_min.min(u - 1.0);
            b.v_min = b.v_min.min(v - 1.0);
            b.u_max = b.u_max.max(u + 1.0);
            b.v_max = b.v_max.max(v + 1.0);
        }
    }
    b
}

fn brute_force_filter(
    cands: &[GraspCandidate],
    box2d: &PixelBox,
    camera: &Camera,
    cloud: &PointCloud,
    cfg: &GraspConfig,
) -> Vec<GraspCandidate> {
    let b = box2d.clamped(camera.width, camera.height);
    let selected: Vec<Point3<f64>> = cloud
        .points
        .iter()
        .filter(|p| camera.project(p).is_some_and(|(u, v, _)| b.contains(u, v)))
        .cloned()
        .collect();
    cands
        .iter()
        .filter(|c| {
            c.contacts.iter().all(|ct| {
                selected
                    .iter()
                    .any(|s| (s - ct).norm_squared() <= cfg.region_tol * cfg.region_tol)
            })
        })
        .cloned()
        .collect()
}

#[test]
fn region_box_selects_the_covered_object() {
    let left = Point3::new(0.5, -0.15, 0.3);
    let right = Point3::new(0.5, 0.15, 0.3);
    let mid = Point3::new(0.5, 0.0, 0.3);
    let scene = scene_with(
        vec![cube("cube_l", left, 0.02), cube("cube_r", right, 0.02)],
        ring_cameras(mid, 0.7),
        vec![],
    );
    let obs = observe(&scene);
    let cfg = GraspConfig::default();
    let mut cands = candidates_for(&obs, "cube_l", &cfg);
    let n_left = cands.len();
    cands.extend(candidates_for(&obs, "cube_r", &cfg));
    assert!(n_left > 0 && cands.len() > n_left);

    let cam = &scene.cameras[0];
    let label_l = obs.labels.index_of("cube_l").unwrap();
    let left_box = pixel_bounds(&obs, cam, label_l);
    let kept = filter_by_region(&cands, &left_box, cam, &obs.cloud, &cfg);
    assert_eq!(kept.len(), n_left, "only left-object grasps survive");
    assert_eq!(kept, cands[..n_left].to_vec());
    assert_eq!(kept, brute_force_filter(&cands, &left_box, cam, &obs.cloud, &cfg));
}

#[test]
fn region_filter_matches_brute_force_on_random_clouds() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let camera = camera_at(
        "probe",
        Point3::new(-1.0, 0.5, 0.5),
        Point3::new(1.0, 0.5, 0.5),
        Vector3::z(),
    );
    let cfg = GraspConfig::default();
    for trial in 0..25 {
        let n = 50 + (trial * 199) % 4951; // up to 5000 points
        let points: Vec<Point3<f64>> = (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(0.2..0.9),
                    rng.random_range(0.1..0.9),
                    rng.random_range(0.1..0.9),
                )
            })
            .collect();
        let cloud = PointCloud {
            normals: vec![Vector3::zeros(); n],
            labels: vec![1; n],
            sources: vec![(0, 0); n],
            points,
        };
        let cands: Vec<GraspCandidate> = (0..40)
            .map(|i| {
                let a = cloud.points[rng.random_range(0..n)]
                    + Vector3::new(
                        rng.random_range(-0.02..0.02),
                        rng.random_range(-0.02..0.02),
                        rng.random_range(-0.02..0.02),
                    );
                let b = cloud.points[rng.random_range(0..n)];
                GraspCandidate {
                    pose: Pose::identity(),
                    score: i as f64,
                    contacts: [a, b],
                }
            })
            .collect();
        let b = PixelBox {
            u_min: rng.random_range(0.0..60.0),
            v_min: rng.random_range(0.0..60.0),
            u_max: rng.random_range(60.0..128.0),
            v_max: rng.random_range(60.0..128.0),
        };
        let fast = filter_by_region(&cands, &b, &camera, &cloud, &cfg);
        let slow = brute_force_filter(&cands, &b, &camera, &cloud, &cfg);
        assert_eq!(fast, slow, "trial {trial} diverged");
    }
}

#[test]
fn free_cube_keeps_all_candidates_after_pruning() {
    let center = Point3::new(0.5, 0.0, 0.3);
    let scene = scene_with(vec![cube("cube", center, 0.02)], ring_cameras(center, 0.6), vec![]);
    let obs = observe(&scene);
    let cfg = GraspConfig::default();
    let cands = candidates_for(&obs, "cube", &cfg);
    let kept = prune_collisions(&cands, &scene, "cube", &cfg);
    assert_eq!(kept, cands);
}

/// Exact world AABB of an oriented box: center ± Σ_j |R_ij|·half_j.
fn oriented_box_aabb(half: &[f64; 3], pose: &Pose) -> Aabb {
    let m = pose.rotation.to_rotation_matrix();
    let m = m.matrix();
    let c = pose.translation.vector;
    let mut min = [0.0; 3];
    let mut max = [0.0; 3];
    for i in 0..3 {
        let r = (0..3).map(|j| m[(i, j)].abs() * half[j]).sum::<f64>();
        min[i] = c[i] - r;
        max[i] = c[i] + r;
    }
    Aabb { min, max }
}

fn aabbs_overlap(a: &Aabb, b: &Aabb) -> bool {
    (0..3).all(|i| a.min[i] <= b.max[i] && b.min[i] <= a.max[i])
}

#[test]
fn wall_blocks_grasps_that_approach_it() {
    let center = Point3::new(0.5, 0.0, 0.3);
    // Wall flush against the cube's +x face; cameras cover the other five.
    let wall = slab("wall", Point3::new(0.545, 0.0, 0.3), Vector3::new(0.025, 0.15, 0.15));
    let mut cameras = vec![
        camera_at("cam_xm", center - Vector3::new(0.6, 0.0, 0.0), center, Vector3::z()),
        camera_at("cam_yp", center + Vector3::new(0.0, 0.6, 0.0), center, Vector3::z()),
        camera_at("cam_ym", center - Vector3::new(0.0, 0.6, 0.0), center, Vector3::z()),
        camera_at("cam_top", center + Vector3::new(0.0, 0.0, 0.6), center, Vector3::x()),
        camera_at("cam_bot", center - Vector3::new(0.0, 0.0, 0.6), center, Vector3::x()),
    ];
    for c in &mut cameras {
        c.id = format!("wall_{}", c.id);
    }
    let scene = scene_with(vec![cube("cube", center, 0.02), wall], cameras, vec![]);
    let obs = observe(&scene);
    let cfg = GraspConfig::default();
    let cands = candidates_for(&obs, "cube", &cfg);

    // Vertical-closing candidates approach horizontally — straight into the
    // wall here, since the fallback approach is +x.
    let vertical: Vec<&GraspCandidate> = cands
        .iter()
        .filter(|c| (c.pose.rotation * Vector3::x()).z.abs() > 0.9)
        .collect();
    assert!(!vertical.is_empty(), "top/bottom coverage should yield vertical closings");

    let kept = prune_collisions(&cands, &scene, "cube", &cfg);
    assert!(!kept.is_empty(), "side grasps away from the wall survive");
    assert!(kept.len() < cands.len(), "the wall must prune something");

    // Vertical closings approach along +x; when the grasp center sits past
    // the cube midline the fingertips (2.5 cm beyond the contact plane)
    // reach into the wall and the candidate must be gone.
    let mut doomed = 0;
    for c in &cands {
        let vertical_closing = (c.pose.rotation * Vector3::x()).z.abs() > 0.9;
        if vertical_closing && c.pose.translation.vector.x > 0.501 {
            doomed += 1;
            assert!(!kept.contains(c), "fingertips through the wall survived pruning");
        }
    }
    assert!(doomed > 0, "expected vertical closings near the wall side");

    // Independent oracle on the axis-aligned candidates: interval overlap of
    // the gripper-box AABBs against the wall box.
    let wall_aabb = Aabb {
        min: [0.52, -0.15, 0.15],
        max: [0.57, 0.15, 0.45],
    };
    let mut checked = 0;
    for c in &cands {
        let m = c.pose.rotation.to_rotation_matrix();
        let axis_aligned = m
            .matrix()
            .iter()
            .all(|e| e.abs() < 1e-6 || (e.abs() - 1.0).abs() < 1e-6);
        if !axis_aligned {
            continue;
        }
        checked += 1;
        let collides = gripper_volume(&c.pose, &cfg).iter().any(|(kind, pose)| {
            let PrimitiveKind::Box { half_extents } = kind else {
                panic!("gripper volume is boxes");
            };
            aabbs_overlap(&oriented_box_aabb(half_extents, pose), &wall_aabb)
        });
        assert_eq!(
            kept.contains(c),
            !collides,
            "SAT pruning disagrees with the interval oracle"
        );
    }
    assert!(checked > 0, "no axis-aligned candidates to check");
}

#[test]
fn synthetic_colliding_candidates_prune_to_empty() {
    let center = Point3::new(0.5, 0.0, 0.3);
    let wall = slab("wall", Point3::new(0.8, 0.0, 0.3), Vector3::new(0.05, 0.3, 0.3));
    let scene = scene_with(vec![cube("cube", center, 0.02), wall], vec![], vec![]);
    let cfg = GraspConfig::default();
    // Grasp poses buried inside the wall volume.
    let cands: Vec<GraspCandidate> = (0..3)
        .map(|i| GraspCandidate {
            pose: Isometry3::translation(0.8, -0.1 + 0.1 * i as f64, 0.3),
            score: 0.5,
            contacts: [Point3::new(0.8, 0.0, 0.3), Point3::new(0.8, 0.0, 0.34)],
        })
        .collect();
    assert!(prune_collisions(&cands, &scene, "cube", &cfg).is_empty());
    assert!(matches!(
        select_grasp(&prune_collisions(&cands, &scene, "cube", &cfg)),
        Err(Error::GraspSelection(_))
    ));
}

#[test]
fn monotone_score_transforms_keep_the_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let transforms: [fn(f64) -> f64; 3] = [
        |s| s * s,
        |s| 0.1 + 0.5 * s,
        |s| (2.0 * s).tanh(),
    ];
    for _ in 0..20 {
        let cands: Vec<GraspCandidate> = (0..12)
            .map(|_| GraspCandidate {
                pose: Pose::identity(),
                score: rng.random_range(0.0..1.0),
                contacts: [Point3::origin(), Point3::origin()],
            })
            .collect();
        let base = select_grasp(&cands).unwrap();
        let base_idx = cands.iter().position(|c| std::ptr::eq(c, base)).unwrap();
        for f in &transforms {
            let mapped: Vec<GraspCandidate> = cands
                .iter()
                .map(|c| GraspCandidate {
                    score: f(c.score),
                    ..c.clone()
                })
                .collect();
            let picked = select_grasp(&mapped).unwrap();
            let idx = mapped.iter().position(|c| std::ptr::eq(c, picked)).unwrap();
            assert_eq!(idx, base_idx);
        }
    }
}

#[test]
fn free_pick_plans_four_keyframes() {
    let center = Point3::new(0.5, 0.0, 0.3);
    let mut scene =
        scene_with(vec![cube("cube", center, 0.02)], ring_cameras(center, 0.6), vec![]);
    let obs = observe(&scene);
    let cfg = GraspConfig::default();
    let cands = candidates_for(&obs, "cube", &cfg);
    let feasible = prune_collisions(&cands, &scene, "cube", &cfg);
    let best = select_grasp(&feasible).unwrap();
    let traj = plan_keyframes(&scene, best, "cube", None, &cfg).unwrap();

    let phases: Vec<Phase> = traj.frames.iter().map(|f| f.phase).collect();
    assert_eq!(phases, [Phase::Approach, Phase::Grasp, Phase::Lift, Phase::Retreat]);

    let steps = execute_keyframes(&mut scene, &traj);
    assert!(steps > 0);
    assert!(scene
        .evaluate(&SuccessCondition::Holding { body: "cube".into() })
        .unwrap());
    let lift = scene.body("cube").unwrap().pose.translation.vector.z;
    assert!(lift > center.z + cfg.lift_height, "cube should have been lifted");
}

fn bin_region(id: &str, center: Point3<f64>) -> Region {
    Region {
        id: id.into(),
        attached_to: None,
        aabb: Aabb {
            min: [center.x - 0.1, center.y - 0.1, center.z - 0.075],
            max: [center.x + 0.1, center.y + 0.1, center.z + 0.075],
        },
    }
}

#[test]
fn pick_and_place_ends_inside_the_goal_region() {
    let center = Point3::new(0.5, -0.2, 0.3);
    let goal = Point3::new(0.8, 0.2, 0.325);
    let mut scene = scene_with(
        vec![cube("cube", center, 0.02)],
        ring_cameras(center, 0.6),
        vec![bin_region("bin", goal)],
    );
    let obs = observe(&scene);
    let cfg = GraspConfig::default();
    let cands = candidates_for(&obs, "cube", &cfg);
    let feasible = prune_collisions(&cands, &scene, "cube", &cfg);
    let best = select_grasp(&feasible).unwrap();
    let traj = plan_keyframes(&scene, best, "cube", Some("bin"), &cfg).unwrap();

    let phases: Vec<Phase> = traj.frames.iter().map(|f| f.phase).collect();
    assert_eq!(
        phases,
        [
            Phase::Approach,
            Phase::Grasp,
            Phase::Lift,
            Phase::Transport,
            Phase::Place,
            Phase::Retreat
        ]
    );

    execute_keyframes(&mut scene, &traj);
    assert!(scene
        .evaluate(&SuccessCondition::Inside {
            body: "cube".into(),
            region: "bin".into()
        })
        .unwrap());
    assert!(!scene
        .evaluate(&SuccessCondition::Holding { body: "cube".into() })
        .unwrap());
}

#[test]
fn obstacle_forces_the_vertical_lift_variant_and_stays_collision_free() {
    let center = Point3::new(0.5, -0.2, 0.3);
    let goal = Point3::new(0.8, 0.2, 0.325);
    // A fence between pick and place, taller than the direct transport line.
    let fence = slab("fence", Point3::new(0.65, 0.0, 0.225), Vector3::new(0.005, 0.25, 0.225));
    let mut scene = scene_with(
        vec![cube("cube", center, 0.02), fence],
        ring_cameras(center, 0.6),
        vec![bin_region("bin", goal)],
    );
    let obs = observe(&scene);
    let cfg = GraspConfig::default();
    let cands = candidates_for(&obs, "cube", &cfg);
    let feasible = prune_collisions(&cands, &scene, "cube", &cfg);
    let best = select_grasp(&feasible).unwrap();
    let traj = plan_keyframes(&scene, best, "cube", Some("bin"), &cfg).unwrap();
    assert!(
        traj.frames.len() > 6,
        "direct transport crosses the fence; expected the lifted variant"
    );

    // Execute and verify the gripper volume never meets a non-target shape.
    let from = scene.robot.ee_pose;
    let mut checked = 0;
    for frame in &traj.frames {
        let start = scene.robot.ee_pose;
        let dist = (frame.pose.translation.vector - start.translation.vector).norm();
        let n = ((dist / scene.cfg.max_step).ceil() as usize).max(1);
        for k in 1..=n {
            let pose = articulab::geom::interpolate_pose(&start, &frame.pose, k as f64 / n as f64);
            scene.step(&articulab::sim::Action::absolute(pose));
            assert!(
                !gripper_collides(&scene, &scene.robot.ee_pose, "cube", &cfg),
                "gripper collided at {:?}",
                scene.robot.ee_pose.translation.vector
            );
            checked += 1;
        }
        match frame.gripper {
            articulab::sim::GripperCmd::Open => scene.step(&articulab::sim::Action::open()),
            articulab::sim::GripperCmd::Close => scene.step(&articulab::sim::Action::close()),
            articulab::sim::GripperCmd::Hold => {}
        }
    }
    assert!(checked > 20);
    let _ = from;
    assert!(scene
        .evaluate(&SuccessCondition::Inside {
            body: "cube".into(),
            region: "bin".into()
        })
        .unwrap());
}

#[test]
fn caged_goal_region_fails_planning() {
    let center = Point3::new(0.5, -0.2, 0.3);
    let goal = Point3::new(0.8, 0.2, 0.3);
    let cage = vec![
        slab("cage_xp", Point3::new(0.85, 0.2, 0.3), Vector3::new(0.005, 0.07, 0.07)),
        slab("cage_xm", Point3::new(0.75, 0.2, 0.3), Vector3::new(0.005, 0.07, 0.07)),
        slab("cage_yp", Point3::new(0.8, 0.25, 0.3), Vector3::new(0.07, 0.005, 0.07)),
        slab("cage_ym", Point3::new(0.8, 0.15, 0.3), Vector3::new(0.07, 0.005, 0.07)),
        slab("cage_top", Point3::new(0.8, 0.2, 0.35), Vector3::new(0.07, 0.07, 0.005)),
    ];
    let mut rigid = vec![cube("cube", center, 0.02)];
    rigid.extend(cage);
    let region = Region {
        id: "bin".into(),
        attached_to: None,
        aabb: Aabb {
            min: [goal.x - 0.03, goal.y - 0.03, goal.z - 0.03],
            max: [goal.x + 0.03, goal.y + 0.03, goal.z + 0.03],
        },
    };
    let scene = scene_with(rigid, ring_cameras(center, 0.6), vec![region]);
    let obs = observe(&scene);
    let cfg = GraspConfig::default();
    let cands = candidates_for(&obs, "cube", &cfg);
    let feasible = prune_collisions(&cands, &scene, "cube", &cfg);
    let best = select_grasp(&feasible).unwrap();
    let err = plan_keyframes(&scene, best, "cube", Some("bin"), &cfg).unwrap_err();
    assert!(matches!(err, Error::Planning(_)), "got {err:?}");
}
