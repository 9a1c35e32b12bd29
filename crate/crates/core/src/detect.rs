//! Likelihood-ratio detection and Monte-Carlo DET estimation.
//!
//! Matched trials share one transmitted word: under the legitimate
//! hypothesis the verifier sees `r = Ax + ω_B`, under attack it sees the
//! spoofed `v` drawn through the policy. The LRT statistic
//!
//! ```text
//! L' = (r − Ax)ᴴ K_B⁻¹ (r − Ax) − (r − Bx)ᴴ K_η⁻¹ (r − Bx)
//! ```
//!
//! assumes the attack statistics are known; the GLRT drops that knowledge
//! and keeps only the first quadratic form. Both decide "attack" above a
//! threshold. The DET curve sweeps all distinct pooled statistic values
//! (or a caller grid) and attaches Wilson 95% intervals plus the analytic
//! `h(β,α) ≤ D` bound of the scenario.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::attack::{sample_attack, AttackPolicy};
use crate::channel::ChannelSet;
use crate::divergence::{bound_curve, h_min_over_box, kl_closed_form};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{substream, StreamPurpose};
use crate::scenario::Scenario;
use crate::signaling::{add, draw_noise, draw_word};

/// Which detection statistic to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    /// Likelihood-ratio test; requires the attack statistics.
    Lrt,
    /// Generalized LRT; uses only the legitimate model.
    Glrt,
}

impl std::fmt::Display for Detector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Detector::Lrt => write!(f, "lrt"),
            Detector::Glrt => write!(f, "glrt"),
        }
    }
}

impl std::str::FromStr for Detector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lrt" => Ok(Detector::Lrt),
            "glrt" => Ok(Detector::Glrt),
            other => Err(Error::invalid("detector", format!("unknown detector {other:?}"))),
        }
    }
}

/// One swept operating point.
#[derive(Debug, Clone, Copy)]
pub struct DetPoint {
    /// Decision threshold.
    pub theta: f64,
    /// False-alarm probability estimate.
    pub alpha: f64,
    /// Missed-detection probability estimate.
    pub beta: f64,
    /// Wilson 95% half-width for `alpha`.
    pub ci_alpha: f64,
    /// Wilson 95% half-width for `beta`.
    pub ci_beta: f64,
}

/// An estimated DET curve with its analytic bound.
#[derive(Debug, Clone)]
pub struct DetCurve {
    /// Operating points, thresholds ascending.
    pub points: Vec<DetPoint>,
    /// Trials per hypothesis.
    pub trials: usize,
    /// Statistic that produced the curve.
    pub detector: Detector,
    /// `(α, β_min)` pairs of the divergence bound on a log-spaced grid.
    pub bound: Vec<(f64, f64)>,
    /// Divergence `D = f(A, B, K_η)` used for the bound.
    pub d_forward: f64,
    /// Sorted per-hypothesis statistics, kept for curve-to-curve
    /// comparisons at matched false-alarm counts.
    pub stats_h0: Vec<f64>,
    /// Sorted statistics under attack.
    pub stats_h1: Vec<f64>,
}

impl DetCurve {
    /// True when every operating point satisfies `h(β, α) ≤ D` after
    /// widening by three Wilson half-widths in each coordinate.
    pub fn respects_bound(&self) -> bool {
        self.points.iter().all(|p| {
            h_min_over_box(p.alpha, p.beta, 3.0 * p.ci_alpha, 3.0 * p.ci_beta)
                <= self.d_forward + 1e-9
        })
    }

    /// The operating point whose false-alarm rate is closest to `alpha`.
    pub fn point_nearest_alpha(&self, alpha: f64) -> Option<&DetPoint> {
        self.points.iter().min_by(|a, b| {
            (a.alpha - alpha)
                .abs()
                .partial_cmp(&(b.alpha - alpha).abs())
                .expect("finite rates")
        })
    }

    /// `(α̂, β̂)` at the threshold placed between order statistics so that
    /// `k` of the legitimate-hypothesis statistics exceed it. With
    /// continuous statistics `α̂ = k/trials` exactly, which lets two
    /// curves with equal trial counts be compared at identical
    /// false-alarm rates. The achieved `α̂` is returned (ties can move it).
    pub fn operating_point_at_false_alarm_count(&self, k: usize) -> (f64, f64) {
        let t = self.trials;
        assert!(k >= 1 && k < t, "false-alarm count out of range");
        let theta = 0.5 * (self.stats_h0[t - k - 1] + self.stats_h0[t - k]);
        let alpha = count_above(&self.stats_h0, theta) as f64 / t as f64;
        let beta = self.stats_h1.partition_point(|&s| s <= theta) as f64 / t as f64;
        (alpha, beta)
    }
}

/// Wilson 95% score-interval half-width for `successes/trials`.
pub fn wilson_halfwidth(p_hat: f64, trials: usize) -> f64 {
    const Z: f64 = 1.959_963_984_540_054;
    let n = trials as f64;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    Z * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt() / denom
}

/// LRT statistic for one observation. `k_b` and `k_eta` are inverted per
/// call (with diagonal loading if near-singular); detection loops use
/// [`estimate_det`], which factors once.
pub fn lrt_statistic(
    r: &[Complex64],
    x: &[Complex64],
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    k_b: &DMatrix<f64>,
    k_eta: &DMatrix<f64>,
) -> Result<f64> {
    let inv_kb = linalg::hermitian_inverse_loaded(k_b)?;
    let inv_keta = linalg::hermitian_inverse_loaded(k_eta)?;
    let ax = linalg::apply_real(a, x);
    let bx = linalg::apply_real(b, x);
    let r0: Vec<Complex64> = r.iter().zip(ax.iter()).map(|(u, v)| u - v).collect();
    let r1: Vec<Complex64> = r.iter().zip(bx.iter()).map(|(u, v)| u - v).collect();
    Ok(linalg::quad_form(&inv_kb, &r0) - linalg::quad_form(&inv_keta, &r1))
}

/// GLRT statistic: the whitened energy of the residual against the
/// legitimate model. Nonnegative.
pub fn glrt_statistic(
    r: &[Complex64],
    x: &[Complex64],
    a: &DMatrix<f64>,
    k_b: &DMatrix<f64>,
) -> Result<f64> {
    let inv_kb = linalg::hermitian_inverse_loaded(k_b)?;
    let ax = linalg::apply_real(a, x);
    let r0: Vec<Complex64> = r.iter().zip(ax.iter()).map(|(u, v)| u - v).collect();
    Ok(linalg::quad_form(&inv_kb, &r0))
}

/// Per-trial statistics under both hypotheses, trial-indexed substreams.
fn run_trials(
    sc: &Scenario,
    channels: &ChannelSet,
    detector: Detector,
    policy: &AttackPolicy,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if policy.rows() != channels.a.rows() {
        return Err(Error::Dimension(format!(
            "policy output length {} does not match observation length {}",
            policy.rows(),
            channels.a.rows()
        )));
    }
    let inv_keta = match detector {
        Detector::Lrt => Some(linalg::hermitian_inverse_loaded(&policy.k_eta)?),
        Detector::Glrt => None,
    };
    let inv_sigma_b2 = 1.0 / sc.sigma_b2;
    let pairs: Vec<(f64, f64)> = (0..sc.trials)
        .into_par_iter()
        .map(|trial| {
            let idx = trial as u64;
            let mut word_rng = substream(sc.seed, StreamPurpose::Word, idx);
            let word = draw_word(sc, &mut word_rng);
            let x = &word.samples;
            let ax = channels.a.apply(x);
            // Legitimate observation.
            let mut bob_rng = substream(sc.seed, StreamPurpose::BobNoise, idx);
            let r0 = add(&ax, &draw_noise(channels.a.rows(), sc.sigma_b2, &mut bob_rng));
            // Spoofed observation: the legitimate signal is fully
            // cancelled and the verifier locks onto the forged one.
            let mut eve_rng = substream(sc.seed, StreamPurpose::EveNoise, idx);
            let z = add(&channels.f.apply(x), &draw_noise(channels.f.rows(), sc.sigma_e2, &mut eve_rng));
            let mut attack_rng = substream(sc.seed, StreamPurpose::Attack, idx);
            let v = sample_attack(policy, &z, &mut attack_rng);

            let bx = match detector {
                Detector::Lrt => Some(linalg::apply_real(&policy.b, x)),
                Detector::Glrt => None,
            };
            let stat = |r: &[Complex64]| -> f64 {
                let resid0: Vec<Complex64> = r.iter().zip(ax.iter()).map(|(u, w)| u - w).collect();
                let q0 = linalg::quad_form_scaled_identity(inv_sigma_b2, &resid0);
                match (&inv_keta, &bx) {
                    (Some(inv), Some(bx)) => {
                        let resid1: Vec<Complex64> =
                            r.iter().zip(bx.iter()).map(|(u, w)| u - w).collect();
                        q0 - linalg::quad_form(inv, &resid1)
                    }
                    _ => q0,
                }
            };
            (stat(&r0), stat(&v))
        })
        .collect();
    Ok(pairs.into_iter().unzip())
}

fn count_above(sorted: &[f64], theta: f64) -> usize {
    sorted.len() - sorted.partition_point(|&s| s <= theta)
}

/// Estimate the DET curve of a detector against a policy.
///
/// `thresholds`: explicit grid, or `None` to sweep every distinct pooled
/// statistic value. The divergence bound attached to the curve uses the
/// closed form of the supplied policy.
pub fn estimate_det(
    sc: &Scenario,
    channels: &ChannelSet,
    detector: Detector,
    policy: &AttackPolicy,
    thresholds: Option<&[f64]>,
) -> Result<DetCurve> {
    let (mut s0, mut s1) = run_trials(sc, channels, detector, policy)?;
    s0.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    s1.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));

    let thetas: Vec<f64> = match thresholds {
        Some(grid) => {
            let mut g = grid.to_vec();
            g.sort_by(|a, b| a.partial_cmp(b).expect("finite thresholds"));
            g
        }
        None => {
            let mut pooled: Vec<f64> = s0.iter().chain(s1.iter()).copied().collect();
            pooled.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
            pooled.dedup();
            pooled
        }
    };

    let trials = sc.trials;
    let points: Vec<DetPoint> = thetas
        .iter()
        .map(|&theta| {
            let alpha = count_above(&s0, theta) as f64 / trials as f64;
            let beta = (trials - count_above(&s1, theta)) as f64 / trials as f64;
            DetPoint {
                theta,
                alpha,
                beta,
                ci_alpha: wilson_halfwidth(alpha, trials),
                ci_beta: wilson_halfwidth(beta, trials),
            }
        })
        .collect();

    let report = kl_closed_form(
        channels.a.matrix(),
        &policy.b,
        sc.mx,
        &policy.k_eta,
        sc.sigma_b2,
    )?;
    let grid = log_alpha_grid(1e-4, 1.0, 200);
    let bound = bound_curve(report.f_forward.max(0.0), &grid);
    Ok(DetCurve {
        points,
        trials,
        detector,
        bound,
        d_forward: report.f_forward,
        stats_h0: s0,
        stats_h1: s1,
    })
}

/// Log-spaced grid of false-alarm levels, inclusive of both ends.
pub fn log_alpha_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let (llo, lhi) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(llo + (lhi - llo) * i as f64 / (count - 1) as f64))
        .collect()
}
