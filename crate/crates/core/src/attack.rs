//! Attack synthesis and sampling.
//!
//! The attacker observes `z = Fx + ω_E` and forges
//! `v = Gz + Cω_c + ω̃_B`: a linear transformation of its observation plus
//! independent shaped Gaussian noise plus the attacked receiver's own
//! noise. Writing `B = GF`, the spoofed observation is `v = Bx + η` with
//! `η ~ N(0, K_η)`, `K_η = GK_EGᴴ + CCᴴ + K̃_B`.
//!
//! The divergence-minimizing choice for word covariance `K_x = M_x·I` is
//!
//! ```text
//! G*      = A K_x Fᴴ (F K_x Fᴴ)†
//! C*C*ᴴ   = K_B − σ_E²·A K_x Fᴴ [(F K_x Fᴴ)†]² F K_x Aᴴ − K̃_B
//! ```
//!
//! which shapes the total attack noise to the victim's nominal covariance,
//! `K_η = K_B`. The shaping covariance exists (is PSD) exactly when
//! `σ_B² − σ̃_B² ≥ σ_E²·λ_max(AK_xFᴴ[(FK_xFᴴ)†]²FK_xAᴴ)`; the signed slack
//! of that inequality is reported as the feasibility margin. Infeasible
//! scenarios still produce a best-effort policy with the negative part of
//! the shaping spectrum clipped to zero, so detection experiments can show
//! degraded attacks.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::DelayChannel;
use crate::error::{Error, Result};
use crate::linalg;
use crate::scenario::Scenario;
use crate::signaling;

/// A class-`C` attack policy: `v = Gz + Cω_c + ω̃_B`.
#[derive(Debug, Clone)]
pub struct AttackPolicy {
    /// Linear combiner applied to the attacker observation, `N × N`.
    pub g: DMatrix<f64>,
    /// Factor of the shaping covariance: `C·Cᵀ` is the shaped noise term.
    /// `N × r` with `r` the shaping rank.
    pub c_factor: DMatrix<f64>,
    /// Attacked-receiver per-component noise variance `σ̃_B²`.
    pub sigma_bt2: f64,
    /// Cached forged channel `B = G·F`.
    pub b: DMatrix<f64>,
    /// Cached total attack-noise covariance `K_η = σ_E²GGᵀ + CCᵀ + σ̃_B²I`.
    pub k_eta: DMatrix<f64>,
}

impl AttackPolicy {
    /// Assemble a class-`C` policy from its parts, caching `B` and `K_η`.
    pub fn new(
        g: DMatrix<f64>,
        c_factor: DMatrix<f64>,
        sigma_bt2: f64,
        f: &DelayChannel,
        sigma_e2: f64,
    ) -> Result<Self> {
        let n = g.nrows();
        if g.ncols() != f.rows() {
            return Err(Error::Dimension(format!(
                "combiner expects observation length {}, channel provides {}",
                g.ncols(),
                f.rows()
            )));
        }
        if c_factor.nrows() != n {
            return Err(Error::Dimension(format!(
                "shaping factor has {} rows, combiner output has {n}",
                c_factor.nrows()
            )));
        }
        let b = &g * f.matrix();
        let mut k_eta = sigma_e2 * (&g * g.transpose()) + &c_factor * c_factor.transpose();
        for i in 0..n {
            k_eta[(i, i)] += sigma_bt2;
        }
        let k_eta = (&k_eta + k_eta.transpose()) * 0.5;
        Ok(AttackPolicy {
            g,
            c_factor,
            sigma_bt2,
            b,
            k_eta,
        })
    }

    /// Output dimension `N`.
    pub fn rows(&self) -> usize {
        self.g.nrows()
    }

    /// A randomly perturbed class-`C` policy for optimality checks: both
    /// the combiner and the shaping factor receive a relative Frobenius
    /// perturbation of size `scale`.
    pub fn perturbed(
        &self,
        f: &DelayChannel,
        sigma_e2: f64,
        scale: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let n = self.g.nrows();
        let gn = self.g.norm().max(1.0);
        let dg = DMatrix::from_fn(n, self.g.ncols(), |_, _| rng.random_range(-1.0..1.0));
        let g = &self.g + dg * (scale * gn / (n as f64));
        // Perturb the factor, not the covariance, so CCᵀ stays PSD.
        let r = self.c_factor.ncols().max(1);
        let mut c = DMatrix::zeros(n, r);
        c.view_mut((0, 0), (n, self.c_factor.ncols()))
            .copy_from(&self.c_factor);
        let cn = self.c_factor.norm().max(self.sigma_bt2.sqrt()).max(1e-3);
        let dc = DMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0));
        let c = c + dc * (scale * cn / (n as f64));
        AttackPolicy::new(g, c, self.sigma_bt2, f, sigma_e2)
    }
}

/// Outcome of the feasibility test for the optimal shaping covariance.
#[derive(Debug, Clone, Copy)]
pub struct FeasibilityReport {
    /// True when the optimal shaping covariance is PSD within tolerance.
    pub feasible: bool,
    /// `(σ_B² − σ̃_B²) − σ_E²·λ_max`; the optimal attack exists iff ≥ 0.
    pub margin: f64,
    /// `λ_max(AK_xFᴴ[(FK_xFᴴ)†]²FK_xAᴴ)`.
    pub lambda_max: f64,
}

/// Synthesize the divergence-minimizing attack for a channel pair.
///
/// Always returns a policy: when the shaping covariance is indefinite its
/// negative eigenvalues are clipped to zero and the report marks the
/// scenario infeasible.
pub fn synthesize_optimal(
    a: &DelayChannel,
    f: &DelayChannel,
    sc: &Scenario,
) -> Result<(AttackPolicy, FeasibilityReport)> {
    if a.rows() != f.rows() || a.cols() != f.cols() {
        return Err(Error::Dimension(format!(
            "channel shapes disagree: {}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            f.rows(),
            f.cols()
        )));
    }
    let n = a.rows();
    let mx = sc.mx;
    // F K_x Fᴴ = M_x·FFᵀ is singular whenever padding leaves silent rows,
    // so the Moore-Penrose form is mandatory.
    let fkf = mx * (f.matrix() * f.matrix().transpose());
    let pinv = linalg::pinv_psd(&fkf, 1e-12);
    let akf = mx * (a.matrix() * f.matrix().transpose());
    let g = &akf * &pinv.pinv;
    // AK_xFᴴ[(FK_xFᴴ)†]²FK_xAᴴ, assembled in the shared eigenbasis.
    let m_mat = &akf * &pinv.pinv_sq * akf.transpose();
    let m_mat = (&m_mat + m_mat.transpose()) * 0.5;
    let (m_vals, _) = linalg::sym_eig(&m_mat);
    let lambda_max = m_vals.iter().cloned().fold(0.0_f64, f64::max);
    let margin = (sc.sigma_b2 - sc.sigma_bt2) - sc.sigma_e2 * lambda_max;

    let mut cch = -sc.sigma_e2 * &m_mat;
    for i in 0..n {
        cch[(i, i)] += sc.sigma_b2 - sc.sigma_bt2;
    }
    let fac = linalg::psd_factor(&cch, 1e-10);
    let tol = 1e-10 * (sc.sigma_b2 + sc.sigma_e2 * lambda_max);
    let feasible = margin >= -tol && !fac.clipped_negative;

    let policy = AttackPolicy::new(g, fac.factor, sc.sigma_bt2, f, sc.sigma_e2)?;
    Ok((
        policy,
        FeasibilityReport {
            feasible,
            margin,
            lambda_max,
        },
    ))
}

/// Sample a spoofed observation `v = Gz + Cω_c + ω̃_B`.
///
/// `ω_c` has per-component covariance `I` and `ω̃_B` per-component variance
/// `σ̃_B²`, so given `z` the per-component covariance of `v` is
/// `CCᴴ + K̃_B`. The combiner noise is drawn before the receiver noise;
/// zero-variance terms draw nothing.
pub fn sample_attack(policy: &AttackPolicy, z: &[Complex64], rng: &mut impl Rng) -> Vec<Complex64> {
    assert_eq!(z.len(), policy.g.ncols(), "observation length mismatch");
    let mut v = linalg::apply_real(&policy.g, z);
    if policy.c_factor.ncols() > 0 {
        let wc = signaling::draw_noise(policy.c_factor.ncols(), 1.0, rng);
        let shaped = linalg::apply_real(&policy.c_factor, &wc);
        for (vi, si) in v.iter_mut().zip(shaped.iter()) {
            *vi += si;
        }
    }
    if policy.sigma_bt2 > 0.0 {
        let wb = signaling::draw_noise(policy.rows(), policy.sigma_bt2, rng);
        for (vi, wi) in v.iter_mut().zip(wb.iter()) {
            *vi += wi;
        }
    }
    v
}

/// Structural classification of a scenario under the optimal attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitingScenario {
    /// Meaconing: the forged delays equal the attacker's own (`A = F`)
    /// with more than one satellite. Undetectable.
    S1Meaconing,
    /// Single satellite: relative delays carry no information.
    /// Undetectable.
    S2SingleSv,
    /// The legitimate channel is reachable from the attacker observation:
    /// the optimal policy reproduces `B = A` and `K_η = K_B` exactly even
    /// though `A ≠ F`. Undetectable.
    S3Degraded,
    /// General spoofing scenario with positive divergence floor.
    General,
}

impl std::fmt::Display for LimitingScenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LimitingScenario::S1Meaconing => write!(f, "S1-meaconing"),
            LimitingScenario::S2SingleSv => write!(f, "S2-single-sv"),
            LimitingScenario::S3Degraded => write!(f, "S3-degraded"),
            LimitingScenario::General => write!(f, "general"),
        }
    }
}

/// Classify a channel pair. `S3` is decided constructively: the optimal
/// policy is synthesized and checked for `B = A` and `K_η = K_B`.
pub fn limiting_scenario_classify(
    a: &DelayChannel,
    f: &DelayChannel,
    sc: &Scenario,
) -> Result<LimitingScenario> {
    const TOL: f64 = 1e-8;
    if sc.m == 1 {
        return Ok(LimitingScenario::S2SingleSv);
    }
    if a.matrix() == f.matrix() {
        return Ok(LimitingScenario::S1Meaconing);
    }
    let (policy, _) = synthesize_optimal(a, f, sc)?;
    let b_gap = (&policy.b - a.matrix()).norm() / a.matrix().norm();
    let mut kb_gap = policy.k_eta.clone();
    for i in 0..kb_gap.nrows() {
        kb_gap[(i, i)] -= sc.sigma_b2;
    }
    let kb_gap = kb_gap.norm() / (sc.sigma_b2 * (a.rows() as f64).sqrt());
    if b_gap <= TOL && kb_gap <= TOL {
        Ok(LimitingScenario::S3Degraded)
    } else {
        Ok(LimitingScenario::General)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::build_delay_channel;
    use crate::rng::{substream, StreamPurpose};
    use crate::scenario::Signaling;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn scenario(m: usize, n: usize, sigma_b2: f64, sigma_bt2: f64, sigma_e2: f64) -> Scenario {
        Scenario {
            m,
            n,
            mx: 1.0,
            sigma_b2,
            sigma_bt2,
            sigma_e2,
            tau_bob: vec![0; m],
            tau_eve: vec![0; m],
            tau_forged: vec![0; m],
            signaling: Signaling::Gaussian,
            seed: 5,
            trials: 10,
        }
    }

    #[test]
    fn identity_channels_reduce_to_scalar_formulas() {
        // A = F = I (m=1, n=2): G* = I, C*C*ᴴ = (σ_B² − σ_E² − σ̃_B²)·I.
        let a = build_delay_channel(&[0], 2, 2).unwrap();
        let f = a.clone();
        let sc = scenario(1, 2, 1.0, 0.25, 0.5);
        let (policy, feas) = synthesize_optimal(&a, &f, &sc).unwrap();
        assert_relative_eq!(policy.g, DMatrix::identity(2, 2), epsilon = 1e-12);
        let cch = &policy.c_factor * policy.c_factor.transpose();
        assert_relative_eq!(cch, DMatrix::identity(2, 2) * 0.25, epsilon = 1e-12);
        assert!(feas.feasible);
        assert_relative_eq!(feas.margin, 0.25, epsilon = 1e-12);
        assert_relative_eq!(feas.lambda_max, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_channels_flip_infeasible_at_threshold() {
        let a = build_delay_channel(&[0], 2, 2).unwrap();
        let f = a.clone();
        let sc = scenario(1, 2, 1.0, 0.25, 1.0);
        let (_, feas) = synthesize_optimal(&a, &f, &sc).unwrap();
        assert!(!feas.feasible);
        assert_relative_eq!(feas.margin, -0.25, epsilon = 1e-12);
    }

    // Independent synthesis route: SVD-based pseudoinverse with explicit
    // singular-value inversion, squared by plain matrix multiplication.
    fn synthesize_oracle(
        a: &DelayChannel,
        f: &DelayChannel,
        sc: &Scenario,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let fkf = sc.mx * (f.matrix() * f.matrix().transpose());
        let svd = fkf.clone().svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
        let mut inv = DVector::zeros(svd.singular_values.len());
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if s > 1e-12 * smax {
                inv[i] = 1.0 / s;
            }
        }
        let pinv =
            svd.v_t.unwrap().transpose() * DMatrix::from_diagonal(&inv) * svd.u.unwrap().transpose();
        let akf = sc.mx * (a.matrix() * f.matrix().transpose());
        let g = &akf * &pinv;
        let mid = &pinv * &pinv;
        let mut cch = -sc.sigma_e2 * (&akf * mid * akf.transpose());
        for i in 0..cch.nrows() {
            cch[(i, i)] += sc.sigma_b2 - sc.sigma_bt2;
        }
        (g, cch)
    }

    #[test]
    fn synthesis_matches_svd_oracle_route() {
        let mut sc = scenario(2, 2, 1.0, 0.1, 0.2);
        sc.tau_eve = vec![0, 0];
        sc.tau_forged = vec![0, 1];
        let rows = 3;
        let a = build_delay_channel(&sc.tau_forged, 2, rows).unwrap();
        let f = build_delay_channel(&sc.tau_eve, 2, rows).unwrap();
        let (policy, _) = synthesize_optimal(&a, &f, &sc).unwrap();
        let (g_oracle, cch_oracle) = synthesize_oracle(&a, &f, &sc);
        assert_relative_eq!(policy.g, g_oracle, epsilon = 1e-9);
        let cch = &policy.c_factor * policy.c_factor.transpose();
        assert_relative_eq!(cch, cch_oracle, epsilon = 1e-9);
    }

    #[test]
    fn passthrough_policy_returns_observation() {
        let f = build_delay_channel(&[0], 3, 3).unwrap();
        let policy = AttackPolicy::new(
            DMatrix::identity(3, 3),
            DMatrix::zeros(3, 0),
            0.0,
            &f,
            0.5,
        )
        .unwrap();
        let z = vec![
            Complex64::new(1.0, -2.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(-1.5, 3.0),
        ];
        let mut rng = substream(1, StreamPurpose::Attack, 0);
        let v = sample_attack(&policy, &z, &mut rng);
        assert_eq!(v, z);
    }

    #[test]
    fn meaconing_policy_reproduces_legitimate_channel_output() {
        // A = F, noiseless z = Fx: the forged mean is exactly Ax.
        let sc = scenario(3, 4, 1.0, 0.25, 0.5);
        let mut sc = sc;
        sc.tau_eve = vec![0, 2, 1];
        sc.tau_forged = vec![0, 2, 1];
        let rows = 6;
        let a = build_delay_channel(&sc.tau_forged, 4, rows).unwrap();
        let f = build_delay_channel(&sc.tau_eve, 4, rows).unwrap();
        let (mut policy, feas) = synthesize_optimal(&a, &f, &sc).unwrap();
        assert!(feas.feasible);
        // Disable both noise terms to isolate the mean map.
        policy.c_factor = DMatrix::zeros(rows, 0);
        policy.sigma_bt2 = 0.0;
        let mut wrng = substream(2, StreamPurpose::Word, 0);
        let x = signaling::draw_word(&sc, &mut wrng);
        let z = f.apply(&x.samples);
        let mut rng = substream(2, StreamPurpose::Attack, 0);
        let v = sample_attack(&policy, &z, &mut rng);
        let ax = a.apply(&x.samples);
        for (vi, yi) in v.iter().zip(ax.iter()) {
            assert!((vi - yi).norm() < 1e-10);
        }
    }

    #[test]
    fn sampled_attack_covariance_matches_shaping_plus_receiver_noise() {
        // Per-component covariance of v given fixed z is CCᴴ + K̃_B.
        let sc = scenario(2, 2, 1.0, 0.2, 0.3);
        let mut sc = sc;
        sc.tau_eve = vec![0, 1];
        sc.tau_forged = vec![0, 1];
        let rows = 3;
        let a = build_delay_channel(&sc.tau_forged, 2, rows).unwrap();
        let f = build_delay_channel(&sc.tau_eve, 2, rows).unwrap();
        let (policy, feas) = synthesize_optimal(&a, &f, &sc).unwrap();
        assert!(feas.feasible);
        let z = vec![Complex64::new(0.3, -0.7); rows];
        let mean = linalg::apply_real(&policy.g, &z);

        let draws = 100_000;
        let mut acc = DMatrix::<f64>::zeros(rows, rows);
        let mut rng = substream(17, StreamPurpose::Attack, 0);
        for _ in 0..draws {
            let v = sample_attack(&policy, &z, &mut rng);
            let d: Vec<Complex64> = v.iter().zip(mean.iter()).map(|(a, b)| a - b).collect();
            for i in 0..rows {
                for j in 0..rows {
                    // Per-component convention: half the Hermitian outer product.
                    acc[(i, j)] += 0.5 * (d[i] * d[j].conj()).re;
                }
            }
        }
        acc /= draws as f64;
        let mut expected = &policy.c_factor * policy.c_factor.transpose();
        for i in 0..rows {
            expected[(i, i)] += sc.sigma_bt2;
        }
        let rel = (&acc - &expected).norm() / expected.norm();
        assert!(rel < 0.03, "relative covariance error {rel}");
    }

    #[test]
    fn random_perturbations_never_beat_the_synthesized_policy() {
        let mut sc = scenario(2, 3, 1.0, 0.2, 0.3);
        sc.tau_eve = vec![0, 0];
        sc.tau_forged = vec![0, 1];
        sc.tau_bob = vec![0, 1];
        let rows = 4;
        let a = build_delay_channel(&sc.tau_forged, 3, rows).unwrap();
        let f = build_delay_channel(&sc.tau_eve, 3, rows).unwrap();
        let (policy, feas) = synthesize_optimal(&a, &f, &sc).unwrap();
        assert!(feas.feasible);
        let baseline =
            crate::divergence::kl_closed_form(a.matrix(), &policy.b, sc.mx, &policy.k_eta, sc.sigma_b2)
                .unwrap()
                .f_forward;
        let mut rng = substream(23, StreamPurpose::Perturb, 0);
        for _ in 0..25 {
            let pert = policy.perturbed(&f, sc.sigma_e2, 0.05, &mut rng).unwrap();
            let fp =
                crate::divergence::kl_closed_form(a.matrix(), &pert.b, sc.mx, &pert.k_eta, sc.sigma_b2)
                    .unwrap()
                    .f_forward;
            assert!(fp >= baseline - 1e-12, "{fp} < {baseline}");
        }
    }

    #[test]
    fn classify_meaconing_single_sv_and_general() {
        let sc3 = scenario(3, 2, 1.0, 0.25, 0.5);
        let a = build_delay_channel(&sc3.tau_forged, 2, 2).unwrap();
        let f = build_delay_channel(&sc3.tau_eve, 2, 2).unwrap();
        assert_eq!(
            limiting_scenario_classify(&a, &f, &sc3).unwrap(),
            LimitingScenario::S1Meaconing
        );

        let sc1 = scenario(1, 4, 1.0, 0.25, 0.5);
        let a1 = build_delay_channel(&[0], 4, 4).unwrap();
        assert_eq!(
            limiting_scenario_classify(&a1, &a1.clone(), &sc1).unwrap(),
            LimitingScenario::S2SingleSv
        );

        let mut scg = scenario(2, 2, 1.0, 0.25, 0.5);
        scg.tau_eve = vec![0, 0];
        scg.tau_forged = vec![0, 1];
        let rows = 3;
        let ag = build_delay_channel(&scg.tau_forged, 2, rows).unwrap();
        let fg = build_delay_channel(&scg.tau_eve, 2, rows).unwrap();
        assert_eq!(
            limiting_scenario_classify(&ag, &fg, &scg).unwrap(),
            LimitingScenario::General
        );
    }

    #[test]
    fn classify_detects_degraded_channel_via_band_swap() {
        // Disjoint delay bands swapped between the forged and attacker
        // patterns: the combiner permutes them exactly, so B* = A with
        // A ≠ F.
        let mut sc = scenario(2, 2, 1.0, 0.2, 0.3);
        sc.tau_eve = vec![0, 2];
        sc.tau_forged = vec![2, 0];
        let rows = 4;
        let a = build_delay_channel(&sc.tau_forged, 2, rows).unwrap();
        let f = build_delay_channel(&sc.tau_eve, 2, rows).unwrap();
        assert_eq!(
            limiting_scenario_classify(&a, &f, &sc).unwrap(),
            LimitingScenario::S3Degraded
        );
    }
}
