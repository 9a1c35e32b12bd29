//! Divergence analytics for class-`C` attacks.
//!
//! For a forged channel `B = GF` and total attack-noise covariance `K_η`,
//! the divergence between the joint attacked and legitimate observation
//! statistics splits into two terms,
//!
//! ```text
//! f = t₁ + t₂
//! t₁ = ½·[ Σᵢ (λᵢ/σ_B² − log(λᵢ/σ_B²)) − N ]      λᵢ: eigenvalues of K_η
//! t₂ = 1/(2σ_B²)·tr((B − A)·K_x·(B − A)ᴴ)
//! ```
//!
//! `t₁ ≥ 0` vanishes exactly when `K_η = K_B`, so `t₂` is the divergence
//! floor `D_min(B)` of the channel pair; with `K_x = M_x·I` it decomposes
//! into `(mn/2)·k·Λ₀` where `k = ‖A−B‖²_F/‖A‖²_F` is a diversity index
//! between the channels and `Λ₀ = (M_x/σ_B²)·‖A‖²_F/(mn)` the
//! legitimate-link SNR factor. The reverse direction swaps the spectrum
//! ratios; both directions coincide under the optimal attack.
//!
//! The divergence limits the error region of any detector through
//! `h(β, α) ≤ D` with `h(β,α) = β·log(β/(1−α)) + (1−β)·log((1−β)/α)`.
//!
//! Conventions: the formulas above use the per-component covariance
//! matrices (`K_B = σ_B²·I`) and real-Gaussian ½ factors, with `N` the
//! common padded observation length. They are the exact divergence of the
//! real-Gaussian reading of the model, which is what the Monte-Carlo
//! estimator [`kl_monte_carlo`] samples; the estimator run is the
//! convention cross-check. For circularly-symmetric complex sampling the
//! spectrum term doubles, but under the optimal attack `t₁ = 0` and the
//! divergence equals `t₂` in both readings — the bound attached to
//! detection experiments (which always face the optimal attack) is exact
//! either way.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::attack::{
    limiting_scenario_classify, synthesize_optimal, AttackPolicy, FeasibilityReport,
    LimitingScenario,
};
use crate::channel::{kernel_condition, ChannelSet, DelayChannel};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{substream, StreamPurpose};
use crate::scenario::Scenario;
use crate::signaling::draw_noise_real;

/// Joint second-order model of the transmitted word and the three
/// observations.
#[derive(Debug, Clone)]
pub struct GaussianJointModel {
    /// `K_x·Aᴴ`
    pub k_xy: DMatrix<f64>,
    /// `A·K_x·Aᴴ + K_B`
    pub k_y: DMatrix<f64>,
    /// `K_x·Fᴴ`
    pub k_xz: DMatrix<f64>,
    /// `F·K_x·Fᴴ + K_E`
    pub k_z: DMatrix<f64>,
    /// `K_x·Fᴴ·Gᴴ`
    pub k_xv: DMatrix<f64>,
    /// `B·K_x·Bᴴ + K_η`
    pub k_v: DMatrix<f64>,
    /// `σ_B²·I`
    pub k_b: DMatrix<f64>,
    /// `σ_E²·I`
    pub k_e: DMatrix<f64>,
    /// `σ̃_B²·I`
    pub k_tilde_b: DMatrix<f64>,
}

impl GaussianJointModel {
    /// Assemble all covariance blocks for `K_x = M_x·I`.
    pub fn assemble(
        a: &DelayChannel,
        f: &DelayChannel,
        policy: &AttackPolicy,
        mx: f64,
        sigma_b2: f64,
        sigma_e2: f64,
    ) -> Self {
        let n = a.rows();
        let k_b = DMatrix::identity(n, n) * sigma_b2;
        let k_e = DMatrix::identity(n, n) * sigma_e2;
        let k_tilde_b = DMatrix::identity(n, n) * policy.sigma_bt2;
        let k_xy = mx * a.matrix().transpose();
        let k_y = mx * (a.matrix() * a.matrix().transpose()) + &k_b;
        let k_xz = mx * f.matrix().transpose();
        let k_z = mx * (f.matrix() * f.matrix().transpose()) + &k_e;
        let k_xv = mx * f.matrix().transpose() * policy.g.transpose();
        let k_v = mx * (&policy.b * policy.b.transpose()) + &policy.k_eta;
        GaussianJointModel {
            k_xy,
            k_y,
            k_xz,
            k_z,
            k_xv,
            k_v,
            k_b,
            k_e,
            k_tilde_b,
        }
    }
}

/// Exact divergence record for one channel pair and attack policy.
#[derive(Debug, Clone)]
pub struct DivergenceReport {
    /// Spectrum term; zero exactly when `K_η = K_B`.
    pub t1: f64,
    /// Channel-mismatch term (the divergence floor).
    pub t2: f64,
    /// `t₁ + t₂`.
    pub f_forward: f64,
    /// Reverse-direction divergence.
    pub f_reverse: f64,
    /// Divergence floor `D_min(B)` from the trace form (equals `t2`).
    pub d_min: f64,
    /// Diversity index `‖A−B‖²_F/‖A‖²_F`.
    pub k: f64,
    /// Legitimate-link SNR factor `(M_x/σ_B²)·‖A‖²_F/(mn)`.
    pub lambda0: f64,
    /// Spectrum of `K_η`, ascending.
    pub eigenvalues: Vec<f64>,
}

impl DivergenceReport {
    /// `|f_forward − f_reverse|`; vanishes under the optimal attack.
    pub fn symmetry_gap(&self) -> f64 {
        (self.f_forward - self.f_reverse).abs()
    }
}

/// The divergence floor via the literal trace form with `K_x = M_x·I`:
/// `tr((B−A)·K_x·(B−A)ᴴ)/(2σ_B²)`, accumulated column by column.
pub fn d_min_trace(a: &DMatrix<f64>, b: &DMatrix<f64>, mx: f64, sigma_b2: f64) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        let mut col = 0.0;
        for i in 0..a.nrows() {
            let d = b[(i, j)] - a[(i, j)];
            col += d * d;
        }
        acc += mx * col;
    }
    acc / (2.0 * sigma_b2)
}

/// Trace form for a general word covariance matrix. Quadratic in `mn`;
/// used to cross-check the scaled-identity fast path.
pub fn d_min_trace_general(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    k_x: &DMatrix<f64>,
    sigma_b2: f64,
) -> f64 {
    let diff = b - a;
    let prod = &diff * k_x;
    let mut tr = 0.0;
    for i in 0..diff.nrows() {
        for j in 0..diff.ncols() {
            tr += prod[(i, j)] * diff[(i, j)];
        }
    }
    tr / (2.0 * sigma_b2)
}

/// `D_min(B)` decomposed as `(mn/2)·k·Λ₀`.
///
/// Valid for `K_x = M_x·I`. Errors when `A` has no energy.
pub fn d_min_decomposition(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    mx: f64,
    sigma_b2: f64,
) -> Result<(f64, f64, f64)> {
    let a_energy = linalg::frob_sq(a);
    if a_energy <= 0.0 {
        return Err(Error::Numerical("channel matrix has zero energy".into()));
    }
    let mn = a.ncols() as f64;
    let k = linalg::frob_sq(&(a - b)) / a_energy;
    let lambda0 = mx / sigma_b2 * a_energy / mn;
    let d_min = mn / 2.0 * k * lambda0;
    Ok((d_min, k, lambda0))
}

fn spectrum_of(k_eta: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = k_eta.nrows();
    let exactly_diagonal = (0..n).all(|i| (0..n).all(|j| i == j || k_eta[(i, j)] == 0.0));
    let mut vals: Vec<f64> = if exactly_diagonal {
        (0..n).map(|i| k_eta[(i, i)]).collect()
    } else {
        let (v, _) = linalg::sym_eig(k_eta);
        v.iter().copied().collect()
    };
    vals.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    let lmax = vals.last().copied().unwrap_or(0.0);
    if vals.first().copied().unwrap_or(0.0) < -1e-12 * lmax.max(1.0) {
        return Err(Error::Numerical(format!(
            "attack-noise covariance is not PSD (min eigenvalue {:.3e})",
            vals[0]
        )));
    }
    Ok(vals)
}

/// Closed-form divergence of a class-`C` attack with channel pair
/// `(A, B)`, word covariance `M_x·I`, and attack-noise covariance `K_η`.
///
/// Eigenvalues of `K_η` below `1e-14·λ_max` denote directions the attack
/// leaves silent while the legitimate signal does not; the divergence is
/// then infinite and reported as such.
pub fn kl_closed_form(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    mx: f64,
    k_eta: &DMatrix<f64>,
    sigma_b2: f64,
) -> Result<DivergenceReport> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "channel shapes disagree: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if k_eta.nrows() != a.nrows() || !k_eta.is_square() {
        return Err(Error::Dimension(format!(
            "attack covariance is {}x{}, observations have length {}",
            k_eta.nrows(),
            k_eta.ncols(),
            a.nrows()
        )));
    }
    let vals = spectrum_of(k_eta)?;
    let dim = vals.len() as f64;
    let lmax = vals.last().copied().unwrap_or(0.0);
    let cutoff = 1e-14 * lmax;

    let mut sum_fwd = 0.0;
    let mut sum_rev = 0.0;
    let mut silent = false;
    for &l in &vals {
        if l <= cutoff {
            silent = true;
            break;
        }
        let r = l / sigma_b2;
        sum_fwd += r - r.ln();
        sum_rev += 1.0 / r - (1.0 / r).ln();
    }
    let (t1, rev_t1) = if silent {
        (f64::INFINITY, f64::INFINITY)
    } else {
        (0.5 * (sum_fwd - dim), 0.5 * (sum_rev - dim))
    };

    let t2 = d_min_trace(a, b, mx, sigma_b2);
    let (k, lambda0) = match d_min_decomposition(a, b, mx, sigma_b2) {
        Ok((_, k, l0)) => (k, l0),
        Err(_) => (f64::NAN, f64::NAN),
    };
    Ok(DivergenceReport {
        t1,
        t2,
        f_forward: t1 + t2,
        f_reverse: rev_t1 + t2,
        d_min: t2,
        k,
        lambda0,
        eigenvalues: vals,
    })
}

/// The error-region function
/// `h(β, α) = β·log(β/(1−α)) + (1−β)·log((1−β)/α)` (natural log, with the
/// convention `0·log 0 = 0`). Nonnegative; zero exactly on the chance
/// line `β = 1 − α`; `+∞` when `α = 0` with `β < 1`.
pub fn h_function(beta: f64, alpha: f64) -> f64 {
    assert!((0.0..=1.0).contains(&alpha), "alpha out of [0,1]");
    assert!((0.0..=1.0).contains(&beta), "beta out of [0,1]");
    fn term(p: f64, q: f64) -> f64 {
        if p == 0.0 {
            0.0
        } else if q == 0.0 {
            f64::INFINITY
        } else {
            p * (p / q).ln()
        }
    }
    term(beta, 1.0 - alpha) + term(1.0 - beta, alpha)
}

/// Minimum of `h` over the rectangle `[α±dα]×[β±dβ]` clipped to `[0,1]²`.
/// Zero when the rectangle touches the chance line; otherwise `h` at the
/// rectangle corner nearest the line (its gradient points away from the
/// line on both sides).
pub fn h_min_over_box(alpha: f64, beta: f64, d_alpha: f64, d_beta: f64) -> f64 {
    let a_lo = (alpha - d_alpha).clamp(0.0, 1.0);
    let a_hi = (alpha + d_alpha).clamp(0.0, 1.0);
    let b_lo = (beta - d_beta).clamp(0.0, 1.0);
    let b_hi = (beta + d_beta).clamp(0.0, 1.0);
    if b_lo <= 1.0 - a_lo && b_hi >= 1.0 - a_hi {
        return 0.0;
    }
    if b_hi < 1.0 - a_hi {
        h_function(b_hi, a_hi)
    } else {
        h_function(b_lo, a_lo)
    }
}

/// For each false-alarm level, the smallest missed-detection probability
/// compatible with `h(β, α) ≤ d`: the root of `h(β, α) = d` on
/// `[0, 1−α]`, located by bisection to `1e-10`. Zero when `d ≥ −log α`.
pub fn bound_curve(d: f64, alphas: &[f64]) -> Vec<(f64, f64)> {
    assert!(d >= 0.0, "divergence bound must be nonnegative");
    alphas
        .iter()
        .map(|&alpha| {
            assert!((0.0..=1.0).contains(&alpha), "alpha out of [0,1]");
            if alpha == 0.0 {
                return (alpha, 1.0);
            }
            // Same arithmetic as h itself so the ties resolve consistently.
            if d >= h_function(0.0, alpha) {
                return (alpha, 0.0);
            }
            let mut lo = 0.0;
            let mut hi = 1.0 - alpha;
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                if h_function(mid, alpha) > d {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (alpha, hi)
        })
        .collect()
}

/// Monte-Carlo estimate of the divergence with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    /// Sample mean of the log-density ratio.
    pub estimate: f64,
    /// Standard error of the mean.
    pub std_error: f64,
    /// Number of samples used.
    pub samples: usize,
}

const MC_BATCH: usize = 8192;

/// Default sample budget for the Monte-Carlo estimator.
pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

/// Monte-Carlo divergence estimator, the independent oracle for
/// [`kl_closed_form`].
///
/// Samples `(x, v)` through the attack chain in the real-Gaussian reading
/// of the model (real vectors with exactly the covariance matrices of the
/// formulas: `K_x = M_x·I`, `K_E = σ_E²·I`, combiner noise `I`, receiver
/// noise `σ̃_B²·I`) and averages
/// `log N(v; Bx, K_η) − log N(v; Ax, K_B)`. Batches are reduced in index
/// order, so the result is identical for any thread count.
#[allow(clippy::too_many_arguments)]
pub fn kl_monte_carlo(
    a: &DMatrix<f64>,
    f: &DMatrix<f64>,
    policy: &AttackPolicy,
    mx: f64,
    sigma_b2: f64,
    sigma_e2: f64,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if a.nrows() != policy.rows() || f.ncols() != a.ncols() || policy.g.ncols() != f.nrows() {
        return Err(Error::Dimension(
            "channel, policy, and observation dimensions disagree".into(),
        ));
    }
    let dim = policy.rows();
    let (vals, vecs) = linalg::sym_eig(&policy.k_eta);
    if vals.iter().any(|&l| l <= 0.0) {
        return Err(Error::Numerical(
            "attack-noise covariance must be positive definite for density evaluation".into(),
        ));
    }
    let logdet_keta: f64 = vals.iter().map(|l| l.ln()).sum();
    let logdet_kb = dim as f64 * sigma_b2.ln();
    let inv_vals = DVector::from_iterator(dim, vals.iter().map(|l| 1.0 / l));
    let inv_keta = &vecs * DMatrix::from_diagonal(&inv_vals) * vecs.transpose();

    let batches = samples.div_ceil(MC_BATCH);
    let partials: Vec<(f64, f64)> = (0..batches)
        .into_par_iter()
        .map(|batch| {
            let mut rng = substream(seed, StreamPurpose::Oracle, batch as u64);
            let count = MC_BATCH.min(samples - batch * MC_BATCH);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..count {
                let x = DVector::from_vec(draw_noise_real(a.ncols(), mx, &mut rng));
                let fx = f * &x;
                let z = &fx + DVector::from_vec(draw_noise_real(f.nrows(), sigma_e2, &mut rng));
                let mut v = &policy.g * z;
                if policy.c_factor.ncols() > 0 {
                    let wc =
                        DVector::from_vec(draw_noise_real(policy.c_factor.ncols(), 1.0, &mut rng));
                    v += &policy.c_factor * wc;
                }
                if policy.sigma_bt2 > 0.0 {
                    v += DVector::from_vec(draw_noise_real(dim, policy.sigma_bt2, &mut rng));
                }
                let r1 = &v - &policy.b * &x;
                let q1 = r1.dot(&(&inv_keta * &r1));
                let r0 = &v - a * &x;
                let q0 = r0.dot(&r0) / sigma_b2;
                let ll = 0.5 * (q0 - q1) + 0.5 * (logdet_kb - logdet_keta);
                sum += ll;
                sumsq += ll * ll;
            }
            (sum, sumsq)
        })
        .collect();

    // Compensated cross-batch reduction in index order.
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let (mut cs, mut cq) = (0.0, 0.0);
    for &(bs, bq) in &partials {
        let y = bs - cs;
        let t = sum + y;
        cs = (t - sum) - y;
        sum = t;
        let y = bq - cq;
        let t = sumsq + y;
        cq = (t - sumsq) - y;
        sumsq = t;
    }
    let nf = samples as f64;
    let mean = sum / nf;
    let var = ((sumsq - sum * sum / nf) / (nf - 1.0)).max(0.0);
    Ok(McEstimate {
        estimate: mean,
        std_error: (var / nf).sqrt(),
        samples,
    })
}

/// Full analytic record for a scenario under the optimal attack.
#[derive(Debug, Clone)]
pub struct ScenarioAnalysis {
    /// The synthesized optimal policy.
    pub policy: AttackPolicy,
    /// Feasibility of the exact noise shaping.
    pub feasibility: FeasibilityReport,
    /// Structural classification of the channel pair.
    pub classification: LimitingScenario,
    /// `ker(A) ⊄ ker(F)`: the attacker observation cannot silently drop
    /// every direction the verifier sees.
    pub kernel_separates: bool,
    /// Divergence record of the optimal policy.
    pub report: DivergenceReport,
}

/// Synthesize the optimal attack for a scenario and evaluate its
/// divergence record.
pub fn analyze_scenario(sc: &Scenario) -> Result<ScenarioAnalysis> {
    sc.validate()?;
    let channels = ChannelSet::from_scenario(sc)?;
    let (policy, feasibility) = synthesize_optimal(&channels.a, &channels.f, sc)?;
    let classification = limiting_scenario_classify(&channels.a, &channels.f, sc)?;
    let kernel_separates = kernel_condition(&channels.a, &channels.f)?;
    let report = kl_closed_form(
        channels.a.matrix(),
        &policy.b,
        sc.mx,
        &policy.k_eta,
        sc.sigma_b2,
    )?;
    Ok(ScenarioAnalysis {
        policy,
        feasibility,
        classification,
        kernel_separates,
        report,
    })
}
