//! Cosine diffusion schedule, the forward noising map, and the
//! deterministic DDIM reverse iteration.

use crate::error::{Error, Result};

/// Cumulative signal fractions ᾱ_k for k = 0..=K, with ᾱ_0 = 1 and a
/// strictly decreasing positive tail.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    pub alpha_bar: Vec<f64>,
}

/// Terminal clamp keeping 1/√ᾱ_K numerically tame.
const ALPHA_BAR_FLOOR: f64 = 1e-4;

impl NoiseSchedule {
    /// Squared-cosine schedule: ᾱ_k = f(k)/f(0) with
    /// f(k) = cos²(((k/K + s)/(1 + s)) · π/2), s = 0.008.
    pub fn cosine(steps: usize) -> NoiseSchedule {
        assert!(steps >= 1, "schedule needs at least one step");
        let s = 0.008;
        let f = |k: f64| {
            let x = (k / steps as f64 + s) / (1.0 + s) * std::f64::consts::FRAC_PI_2;
            x.cos().powi(2)
        };
        let f0 = f(0.0);
        let mut alpha_bar = Vec::with_capacity(steps + 1);
        alpha_bar.push(1.0);
        for k in 1..=steps {
            let floored = (f(k as f64) / f0).max(ALPHA_BAR_FLOOR);
            // The floor can flatten consecutive tail entries; keep the
            // sequence strictly decreasing with a relative nudge.
            let ceiling = alpha_bar[k - 1] * (1.0 - 1e-6);
            alpha_bar.push(floored.min(ceiling));
        }
        let sched = NoiseSchedule { alpha_bar };
        debug_assert!(sched.is_valid());
        sched
    }

    pub fn steps(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    pub fn is_valid(&self) -> bool {
        self.alpha_bar.first() == Some(&1.0)
            && self.alpha_bar.windows(2).all(|w| w[0] > w[1])
            && self.alpha_bar.iter().all(|&a| a > 0.0)
    }

    /// `noised` with the schedule's ᾱ_k looked up by a range-checked step.
    pub fn noised_at(&self, a0: &[f64], eps: &[f64], k: usize) -> Result<Vec<f64>> {
        if k == 0 || k > self.steps() {
            return Err(Error::Training(format!(
                "noising step {k} out of range 1..={}",
                self.steps()
            )));
        }
        Ok(noised(a0, eps, self.alpha_bar[k]))
    }

    /// Strictly decreasing substep indices K = k_0 > k_1 > … > k_S = 0.
    pub fn substep_sequence(&self, substeps: usize) -> Result<Vec<usize>> {
        let k = self.steps();
        if substeps == 0 || substeps > k {
            return Err(Error::Training(format!(
                "substep count {substeps} out of range for a {k}-step schedule"
            )));
        }
        Ok((0..=substeps).map(|i| k * (substeps - i) / substeps).collect())
    }
}

/// aᵏ = √ᾱ_k · a₀ + √(1 − ᾱ_k) · ε, elementwise.
pub fn noised(a0: &[f64], eps: &[f64], alpha_bar_k: f64) -> Vec<f64> {
    let sa = alpha_bar_k.sqrt();
    let se = (1.0 - alpha_bar_k).sqrt();
    a0.iter().zip(eps).map(|(a, e)| sa * a + se * e).collect()
}

/// One DDIM update from step k to step k′ < k given the noise estimate ε̂:
/// aᵏ′ = √ᾱ_k′ · (aᵏ − √(1−ᾱ_k)·ε̂)/√ᾱ_k + √(1−ᾱ_k′)·ε̂.
pub fn ddim_step(a_k: &[f64], eps_hat: &[f64], ab_k: f64, ab_prev: f64) -> Vec<f64> {
    let sa_k = ab_k.sqrt();
    let se_k = (1.0 - ab_k).sqrt();
    let sa_p = ab_prev.sqrt();
    let se_p = (1.0 - ab_prev).sqrt();
    a_k.iter()
        .zip(eps_hat)
        .map(|(x, e)| {
            let a0_est = (x - se_k * e) / sa_k;
            sa_p * a0_est + se_p * e
        })
        .collect()
}

/// Run the DDIM iteration from an initial aᴷ with a caller-supplied noise
/// predictor ε̂(aᵏ, k); deterministic given its inputs.
pub fn ddim_iterate(
    sched: &NoiseSchedule,
    substeps: usize,
    init: Vec<f64>,
    mut predictor: impl FnMut(&[f64], usize) -> Vec<f64>,
) -> Result<Vec<f64>> {
    let ks = sched.substep_sequence(substeps)?;
    let mut a = init;
    for pair in ks.windows(2) {
        let (k, k_prev) = (pair[0], pair[1]);
        let eps_hat = predictor(&a, k);
        a = ddim_step(&a, &eps_hat, sched.alpha_bar[k], sched.alpha_bar[k_prev]);
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_schedule_is_monotone_and_positive() {
        for steps in [1, 10, 50, 200] {
            let s = NoiseSchedule::cosine(steps);
            assert_eq!(s.alpha_bar.len(), steps + 1);
            assert!(s.is_valid(), "invalid schedule for K={steps}");
        }
    }

    #[test]
    fn substep_sequences_descend_to_zero() {
        let s = NoiseSchedule::cosine(50);
        let ks = s.substep_sequence(10).unwrap();
        assert_eq!(ks.first(), Some(&50));
        assert_eq!(ks.last(), Some(&0));
        assert!(ks.windows(2).all(|w| w[0] > w[1]));
        let full = s.substep_sequence(50).unwrap();
        assert_eq!(full, (0..=50).rev().collect::<Vec<_>>());
        assert!(s.substep_sequence(0).is_err());
        assert!(s.substep_sequence(51).is_err());
    }

    #[test]
    fn step_indexed_noising_rejects_out_of_range_steps() {
        let s = NoiseSchedule::cosine(10);
        let a0 = [0.5, -0.5];
        let eps = [1.0, -1.0];
        assert!(s.noised_at(&a0, &eps, 0).is_err());
        assert!(s.noised_at(&a0, &eps, 11).is_err());
        let ok = s.noised_at(&a0, &eps, 7).unwrap();
        assert_eq!(ok, noised(&a0, &eps, s.alpha_bar[7]));
    }

    #[test]
    fn noising_at_full_signal_is_identity() {
        let a0 = [0.3, -1.2, 7.5];
        let eps = [5.0, -5.0, 5.0];
        assert_eq!(noised(&a0, &eps, 1.0), a0.to_vec());
    }

    #[test]
    fn noising_at_vanishing_signal_returns_the_noise() {
        let a0 = [0.3, -1.2, 7.5];
        let eps = [0.9, -0.4, 2.0];
        for (n, e) in noised(&a0, &eps, 1e-12).iter().zip(&eps) {
            assert!((n - e).abs() < 1e-5);
        }
    }

    #[test]
    fn noising_matches_scalar_arithmetic_at_point_sixty_four() {
        // √0.64 = 0.8 and √0.36 = 0.6 exactly.
        let a0 = [1.5, -2.0, 0.25, 10.0];
        let eps = [-0.5, 4.0, 8.0, -1.0];
        let out = noised(&a0, &eps, 0.64);
        for i in 0..4 {
            let expect = 0.8 * a0[i] + 0.6 * eps[i];
            assert!((out[i] - expect).abs() < 1e-12, "{} vs {expect}", out[i]);
        }
    }

    #[test]
    fn one_step_ddim_with_the_true_noise_recovers_the_signal() {
        let sched = NoiseSchedule::cosine(1);
        let a0 = vec![0.7, -0.3, 1.9];
        let eps = vec![0.2, 0.8, -1.1];
        let a1 = noised(&a0, &eps, sched.alpha_bar[1]);
        let out = ddim_iterate(&sched, 1, a1, |_, _| eps.clone()).unwrap();
        for (o, a) in out.iter().zip(&a0) {
            assert!((o - a).abs() < 1e-9, "{o} vs {a}");
        }
    }

    #[test]
    fn closed_form_denoiser_converges_to_the_data_point() {
        // Data distribution = δ_c. The optimal predictor is
        // ε̂(x, k) = (x − √ᾱ_k·c)/√(1−ᾱ_k); DDIM must land on c.
        let c = 0.37;
        let sched = NoiseSchedule::cosine(50);
        for init in [3.0, -2.0, 0.0] {
            let out = ddim_iterate(&sched, 10, vec![init], |x, k| {
                let ab = sched.alpha_bar[k];
                vec![(x[0] - ab.sqrt() * c) / (1.0 - ab).sqrt()]
            })
            .unwrap();
            assert!((out[0] - c).abs() < 1e-3, "init {init} → {}", out[0]);
        }
    }

    #[test]
    fn noised_variance_tracks_the_schedule() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let sched = NoiseSchedule::cosine(50);
        for &k in &[10usize, 25, 50] {
            let ab = sched.alpha_bar[k];
            let a0 = [0.5];
            let n = 10_000;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..n {
                let e: f64 = StandardNormal.sample(&mut rng);
                let v = noised(&a0, &[e], ab)[0];
                sum += v;
                sum_sq += v * v;
            }
            let mean = sum / n as f64;
            let var = sum_sq / n as f64 - mean * mean;
            let expect = 1.0 - ab;
            assert!(
                (var - expect).abs() < 0.05 * expect.max(0.02),
                "k={k}: var {var} vs {expect}"
            );
        }
    }
}
