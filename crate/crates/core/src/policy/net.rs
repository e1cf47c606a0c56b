//! Network definitions for the denoising policy: four condition encoders
//! (point cloud, robot state, contact, trajectory) and a FiLM-modulated
//! 1-D temporal U-Net operating on action chunks laid out as
//! `(action_dim, horizon)` matrices.

use rand_chacha::ChaCha8Rng;

use super::tape::{Act, NodeId, Tape};
use super::tensor::{ParamStore, Tensor};
use crate::config::PolicyConfig;

/// End-effector delta (3 translation + 3 rotation) plus gripper scalar.
pub const ACTION_DIM: usize = 7;
/// Pose septuple (translation + unit quaternion) plus gripper flag.
pub const STATE_DIM: usize = 8;
/// Pose septuple per trajectory waypoint.
pub const POSE_DIM: usize = 7;
/// Sinusoidal diffusion-step embedding width.
pub const TIME_EMB_DIM: usize = 16;

/// Width of the concatenated condition vector (without the time embedding).
pub fn condition_dim(cfg: &PolicyConfig) -> usize {
    cfg.d_point + cfg.d_state + cfg.d_contact + cfg.d_traj
}

/// Create every trainable tensor with its final name and shape. FiLM
/// projections start at zero so modulation begins as the identity; the
/// output convolution starts at zero so the initial noise prediction is
/// zero (loss starts near the noise variance).
pub fn build_params(cfg: &PolicyConfig, rng: &mut ChaCha8Rng) -> ParamStore {
    let mut p = ParamStore::new();
    let (dp, ds, dc, dt) = (cfg.d_point, cfg.d_state, cfg.d_contact, cfg.d_traj);
    let [c1, c2] = cfg.unet_channels;
    let cond = condition_dim(cfg) + TIME_EMB_DIM;

    let lin = |p: &mut ParamStore, name: &str, out: usize, inp: usize, rng: &mut ChaCha8Rng| {
        p.insert(&format!("{name}/w"), Tensor::xavier(out, inp, rng));
        p.insert(&format!("{name}/b"), Tensor::zeros(1, out));
    };

    lin(&mut p, "pnet/l0", dp, 3, rng);
    lin(&mut p, "pnet/l1", dp, dp, rng);
    lin(&mut p, "pnet/l2", dp, dp, rng);

    lin(&mut p, "state/l0", ds, STATE_DIM, rng);
    lin(&mut p, "state/l1", ds, ds, rng);

    lin(&mut p, "contact/l0", dc, 3, rng);
    lin(&mut p, "contact/l1", dc, dc, rng);

    lin(&mut p, "traj/in", dt, POSE_DIM, rng);
    p.insert("traj/q/w", Tensor::xavier(dt, dt, rng));
    p.insert("traj/k/w", Tensor::xavier(dt, dt, rng));
    p.insert("traj/v/w", Tensor::xavier(dt, dt, rng));
    lin(&mut p, "traj/ff0", dt, dt, rng);
    lin(&mut p, "traj/ff1", dt, dt, rng);
    lin(&mut p, "traj/out", dt, dt, rng);

    let conv = |p: &mut ParamStore, name: &str, co: usize, ci: usize, rng: &mut ChaCha8Rng| {
        p.insert(&format!("{name}/w"), Tensor::xavier(co, ci * 3, rng));
        p.insert(&format!("{name}/b"), Tensor::zeros(1, co));
    };
    let film = |p: &mut ParamStore, name: &str, ch: usize| {
        p.insert(&format!("{name}/w"), Tensor::zeros(2 * ch, cond));
        p.insert(&format!("{name}/b"), Tensor::zeros(1, 2 * ch));
    };

    conv(&mut p, "unet/in", c1, ACTION_DIM, rng);
    conv(&mut p, "unet/d1/conv", c1, c1, rng);
    film(&mut p, "unet/d1/film", c1);
    conv(&mut p, "unet/down1", c2, c1, rng);
    conv(&mut p, "unet/d2/conv", c2, c2, rng);
    film(&mut p, "unet/d2/film", c2);
    conv(&mut p, "unet/down2", c2, c2, rng);
    conv(&mut p, "unet/mid/conv", c2, c2, rng);
    film(&mut p, "unet/mid/film", c2);
    conv(&mut p, "unet/u1/conv", c2, c2 + c2, rng);
    film(&mut p, "unet/u1/film", c2);
    conv(&mut p, "unet/u2/conv", c1, c2 + c1, rng);
    film(&mut p, "unet/u2/film", c1);
    p.insert("unet/out/w", Tensor::zeros(ACTION_DIM, c1 * 3));
    p.insert("unet/out/b", Tensor::zeros(1, ACTION_DIM));

    p
}

fn layer(tape: &mut Tape, params: &ParamStore, name: &str, x: NodeId) -> NodeId {
    let w = tape.param(params, params.id(&format!("{name}/w")));
    let b = tape.param(params, params.id(&format!("{name}/b")));
    tape.linear(x, w, b)
}

fn project(tape: &mut Tape, params: &ParamStore, name: &str, x: NodeId) -> NodeId {
    let w = tape.param(params, params.id(name));
    let wt = tape.transpose(w);
    tape.matmul(x, wt)
}

/// Per-point feature stack, one row per point, before pooling.
pub fn pointnet_prepool(tape: &mut Tape, params: &ParamStore, cloud: NodeId) -> NodeId {
    let h = layer(tape, params, "pnet/l0", cloud);
    let h = tape.pointwise(h, Act::Silu);
    let h = layer(tape, params, "pnet/l1", h);
    let h = tape.pointwise(h, Act::Silu);
    layer(tape, params, "pnet/l2", h)
}

/// Shared per-point map followed by a coordinate-wise max over points.
pub fn pointnet(tape: &mut Tape, params: &ParamStore, cloud: NodeId) -> NodeId {
    let h = pointnet_prepool(tape, params, cloud);
    tape.max_over_rows(h)
}

pub fn state_mlp(tape: &mut Tape, params: &ParamStore, state: NodeId) -> NodeId {
    let h = layer(tape, params, "state/l0", state);
    let h = tape.pointwise(h, Act::Silu);
    layer(tape, params, "state/l1", h)
}

pub fn contact_mlp(tape: &mut Tape, params: &ParamStore, contact: NodeId) -> NodeId {
    let h = layer(tape, params, "contact/l0", contact);
    let h = tape.pointwise(h, Act::Silu);
    layer(tape, params, "contact/l1", h)
}

/// Single-head self-attention over the M waypoints with a residual
/// feed-forward stage, mean-pooled and projected.
pub fn traj_encoder(tape: &mut Tape, params: &ParamStore, waypoints: NodeId, d: usize) -> NodeId {
    let m = tape.value(waypoints).rows;
    let x = layer(tape, params, "traj/in", waypoints);
    let pe = tape.leaf(positional_encoding(m, d));
    let x = tape.add(x, pe);

    let q = project(tape, params, "traj/q/w", x);
    let k = project(tape, params, "traj/k/w", x);
    let v = project(tape, params, "traj/v/w", x);
    let kt = tape.transpose(k);
    let scores = tape.matmul(q, kt);
    let scores = tape.scale(scores, 1.0 / (d as f64).sqrt());
    let attn = tape.softmax_rows(scores);
    let mixed = tape.matmul(attn, v);
    let x = tape.add(x, mixed);

    let f = layer(tape, params, "traj/ff0", x);
    let f = tape.pointwise(f, Act::Silu);
    let f = layer(tape, params, "traj/ff1", f);
    let x = tape.add(x, f);

    let pooled = tape.mean_over_rows(x);
    layer(tape, params, "traj/out", pooled)
}

/// Sinusoidal embedding of the diffusion step index.
pub fn time_embedding(k: usize) -> Tensor {
    let half = TIME_EMB_DIM / 2;
    let mut data = vec![0.0; TIME_EMB_DIM];
    for i in 0..half {
        let freq = (10_000f64).powf(-(i as f64) / half as f64);
        data[2 * i] = (k as f64 * freq).sin();
        data[2 * i + 1] = (k as f64 * freq).cos();
    }
    Tensor::row_vec(data)
}

/// Fixed sinusoidal positions for the trajectory waypoints.
pub fn positional_encoding(m: usize, d: usize) -> Tensor {
    let mut t = Tensor::zeros(m, d);
    for pos in 0..m {
        for i in 0..d {
            let freq = (10_000f64).powf(-((i / 2) as f64) / (d as f64 / 2.0));
            let angle = pos as f64 * freq;
            *t.at_mut(pos, i) = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    t
}

/// conv → FiLM(cond) → SiLU, optionally with a residual connection when the
/// channel count is unchanged.
fn film_block(
    tape: &mut Tape,
    params: &ParamStore,
    name: &str,
    h: NodeId,
    cond: NodeId,
    channels: usize,
    residual: bool,
) -> NodeId {
    let w = tape.param(params, params.id(&format!("{name}/conv/w")));
    let b = tape.param(params, params.id(&format!("{name}/conv/b")));
    let y = tape.conv1d(h, w, b, 3, 1);

    let fw = tape.param(params, params.id(&format!("{name}/film/w")));
    let fb = tape.param(params, params.id(&format!("{name}/film/b")));
    let gamma_beta = tape.linear(cond, fw, fb);
    let gamma_raw = tape.slice_cols(gamma_beta, 0, channels);
    let beta = tape.slice_cols(gamma_beta, channels, channels);
    // Centered scale: zero-initialized FiLM starts as the identity map.
    let ones = tape.leaf(Tensor::row_vec(vec![1.0; channels]));
    let gamma = tape.add(gamma_raw, ones);
    let y = tape.channel_affine(y, gamma, beta);
    let y = tape.pointwise(y, Act::Silu);
    if residual {
        tape.add(y, h)
    } else {
        y
    }
}

fn strided_conv(tape: &mut Tape, params: &ParamStore, name: &str, h: NodeId) -> NodeId {
    let w = tape.param(params, params.id(&format!("{name}/w")));
    let b = tape.param(params, params.id(&format!("{name}/b")));
    tape.conv1d(h, w, b, 3, 2)
}

/// Noise prediction ε̂(aᵏ, k, f_t): two down blocks, bottleneck, two up
/// blocks with skip connections, temporal stride 2 per level.
pub fn unet_forward(
    tape: &mut Tape,
    params: &ParamStore,
    cfg: &PolicyConfig,
    a_k: NodeId,
    cond: NodeId,
) -> NodeId {
    let [c1, c2] = cfg.unet_channels;
    assert_eq!(
        cfg.horizon % 4,
        0,
        "horizon must be divisible by 4 for two stride-2 levels"
    );

    let w = tape.param(params, params.id("unet/in/w"));
    let b = tape.param(params, params.id("unet/in/b"));
    let h0 = tape.conv1d(a_k, w, b, 3, 1); // (c1, H)

    let h1 = film_block(tape, params, "unet/d1", h0, cond, c1, true);
    let d1 = strided_conv(tape, params, "unet/down1", h1); // (c2, H/2)
    let h2 = film_block(tape, params, "unet/d2", d1, cond, c2, true);
    let d2 = strided_conv(tape, params, "unet/down2", h2); // (c2, H/4)

    let mid = film_block(tape, params, "unet/mid", d2, cond, c2, true);

    let u1 = tape.upsample_cols(mid); // (c2, H/2)
    let u1 = tape.concat_rows(&[u1, h2]); // (2·c2, H/2)
    let u1 = film_block(tape, params, "unet/u1", u1, cond, c2, false);

    let u2 = tape.upsample_cols(u1); // (c2, H)
    let u2 = tape.concat_rows(&[u2, h1]); // (c2+c1, H)
    let u2 = film_block(tape, params, "unet/u2", u2, cond, c1, false);

    let w = tape.param(params, params.id("unet/out/w"));
    let b = tape.param(params, params.id("unet/out/b"));
    tape.conv1d(u2, w, b, 3, 1) // (ACTION_DIM, H)
}
