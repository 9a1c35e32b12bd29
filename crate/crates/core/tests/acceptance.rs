//! Acceptance suite. Each test covers one release criterion and prints a
//! single `ACCEPTANCE <n> ...: PASS` line with the measured figures; any
//! violated tolerance fails the test. Run with `--nocapture` to see the
//! lines on success.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use spoofsim_core::attack::{synthesize_optimal, AttackPolicy};
use spoofsim_core::channel::{build_delay_channel, ChannelSet};
use spoofsim_core::detect::{estimate_det, DetCurve, Detector};
use spoofsim_core::divergence::{analyze_scenario, kl_closed_form, kl_monte_carlo};
use spoofsim_core::rng::{substream, StreamPurpose};
use spoofsim_core::scenario::{delay_vector, normalize_delays, Scenario, Signaling};

#[allow(clippy::too_many_arguments)]
fn scenario(
    m: usize,
    n: usize,
    sigma_b2: f64,
    sigma_bt2: f64,
    sigma_e2: f64,
    tau_eve: Vec<usize>,
    tau_forged: Vec<usize>,
    trials: usize,
    seed: u64,
) -> Scenario {
    let sc = Scenario {
        m,
        n,
        mx: 1.0,
        sigma_b2,
        sigma_bt2,
        sigma_e2,
        tau_bob: tau_forged.clone(),
        tau_eve,
        tau_forged,
        signaling: Signaling::Gaussian,
        seed,
        trials,
    };
    sc.validate().expect("acceptance scenario is valid");
    sc
}

fn random_delays(m: usize, max: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut taus: Vec<usize> = (0..m).map(|_| rng.random_range(0..=max)).collect();
    normalize_delays(&mut taus);
    taus
}

/// Every DET point must satisfy the divergence bound with 3x Wilson slack.
fn assert_bound(curve: &DetCurve, label: &str) {
    assert!(
        curve.respects_bound(),
        "{label}: a DET point violates h(beta, alpha) <= D + 3*CI slack (D = {})",
        curve.d_forward
    );
}

/// Largest violation of |beta - (1 - alpha)| beyond the summed Wilson
/// intervals, over all points of the curve.
fn chance_line_excess(curve: &DetCurve) -> f64 {
    curve
        .points
        .iter()
        .map(|p| (p.beta - (1.0 - p.alpha)).abs() - (p.ci_alpha + p.ci_beta))
        .fold(f64::NEG_INFINITY, f64::max)
}

const ALPHA_COUNTS: [usize; 11] = [10, 25, 50, 100, 250, 500, 1000, 2000, 3500, 5000, 7500];

#[test]
fn acceptance_1_closed_form_consistency() {
    let start = Instant::now();
    let mut rng = substream(101, StreamPurpose::Perturb, 0);
    let mut max_rel: f64 = 0.0;
    for case in 0..50 {
        let m = rng.random_range(2..=6);
        let n = rng.random_range(2..=32);
        let te = random_delays(m, 6, &mut rng);
        let tf = random_delays(m, 6, &mut rng);
        let mut sc = scenario(m, n, 1.0, 0.2, 0.3, te, tf, 10, 1);
        sc.mx = rng.random_range(0.5..2.0);
        sc.sigma_b2 = rng.random_range(0.5..2.0);
        let ch = ChannelSet::from_scenario(&sc).unwrap();
        let (policy, _) = synthesize_optimal(&ch.a, &ch.f, &sc).unwrap();
        let rows = ch.a.rows();
        let b: DMatrix<f64> = if case % 2 == 0 {
            policy.b.clone()
        } else {
            DMatrix::from_fn(rows, ch.a.cols(), |_, _| rng.random_range(-1.0..1.0))
        };
        // Exact nominal covariance: t1 must vanish identically.
        let k_b = DMatrix::identity(rows, rows) * sc.sigma_b2;
        let rep = kl_closed_form(ch.a.matrix(), &b, sc.mx, &k_b, sc.sigma_b2).unwrap();
        assert_eq!(rep.t1, 0.0, "t1 must vanish when K_eta = K_B");
        assert_eq!(rep.f_forward, rep.t2, "divergence must equal t2 exactly");
        assert_eq!(rep.d_min, rep.t2);
        let mn = (m * n) as f64;
        let product = mn / 2.0 * rep.k * rep.lambda0;
        let rel = (rep.d_min - product).abs() / product.max(1e-300);
        max_rel = max_rel.max(rel);
        assert!(
            rel <= 1e-9,
            "trace form {} vs decomposition {} (rel {rel})",
            rep.d_min,
            product
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 1 (closed-form consistency): PASS — 50 scenarios, max rel gap {max_rel:.2e}, {:.2}s",
        elapsed.as_secs_f64()
    );
}

#[test]
fn acceptance_2_oracle_equivalence() {
    let start = Instant::now();
    let sc = scenario(2, 2, 1.0, 0.2, 0.3, vec![0, 0], vec![0, 1], 10, 2);
    let analysis = analyze_scenario(&sc).unwrap();
    assert!(analysis.feasibility.feasible);
    let ch = ChannelSet::from_scenario(&sc).unwrap();
    let est = kl_monte_carlo(
        ch.a.matrix(),
        ch.f.matrix(),
        &analysis.policy,
        sc.mx,
        sc.sigma_b2,
        sc.sigma_e2,
        spoofsim_core::divergence::DEFAULT_MC_SAMPLES,
        202,
    )
    .unwrap();
    let rel = (est.estimate - analysis.report.f_forward).abs() / analysis.report.f_forward;
    assert!(
        rel <= 0.02,
        "MC {} vs closed form {} (rel {rel})",
        est.estimate,
        analysis.report.f_forward
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 2 (oracle equivalence): PASS — MC {:.6} vs closed form {:.6}, rel {:.4}, {:.1}s",
        est.estimate,
        analysis.report.f_forward,
        rel,
        elapsed.as_secs_f64()
    );
}

#[test]
fn acceptance_3_limiting_scenarios_undetectable() {
    let start = Instant::now();
    // S1: meaconing with three satellites; S2: single satellite.
    let s1 = scenario(3, 8, 1.0, 0.25, 0.5, vec![0, 2, 1], vec![0, 2, 1], 10_000, 3);
    let s2 = scenario(1, 8, 1.0, 0.25, 0.5, vec![0], vec![0], 10_000, 4);
    let mut lines = Vec::new();
    for (label, sc) in [("S1", s1), ("S2", s2)] {
        let analysis = analyze_scenario(&sc).unwrap();
        assert!(
            analysis.report.d_min <= 1e-9,
            "{label}: divergence floor {} not zero",
            analysis.report.d_min
        );
        let ch = ChannelSet::from_scenario(&sc).unwrap();
        let curve = estimate_det(&sc, &ch, Detector::Lrt, &analysis.policy, None).unwrap();
        let excess = chance_line_excess(&curve);
        assert!(
            excess <= 0.0,
            "{label}: DET departs the chance line by {excess} beyond the Wilson intervals"
        );
        assert_bound(&curve, label);
        lines.push(format!("{label} d_min {:.1e} excess {excess:.4}", analysis.report.d_min));
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 3 (limiting scenarios): PASS — {}, {:.1}s",
        lines.join("; "),
        elapsed.as_secs_f64()
    );
}

#[test]
fn acceptance_4_optimal_attack_identities() {
    let mut rng = substream(404, StreamPurpose::Perturb, 0);
    let mut max_keta_gap: f64 = 0.0;
    let mut max_sym_gap: f64 = 0.0;
    for _ in 0..50 {
        let m = rng.random_range(2..=5);
        let n = rng.random_range(2..=16);
        let te = random_delays(m, 5, &mut rng);
        let tf = random_delays(m, 5, &mut rng);
        // Probe the spectrum first, then place the noise levels well inside
        // the feasible region.
        let probe = scenario(m, n, 1.0, 0.1, 0.1, te.clone(), tf.clone(), 10, 5);
        let ch = ChannelSet::from_scenario(&probe).unwrap();
        let (_, feas) = synthesize_optimal(&ch.a, &ch.f, &probe).unwrap();
        let sigma_e2 = 0.3 / feas.lambda_max.max(0.1);
        let sc = scenario(m, n, 1.0, 0.35, sigma_e2, te, tf, 10, 5);
        let analysis = analyze_scenario(&sc).unwrap();
        assert!(analysis.feasibility.feasible, "margin {}", analysis.feasibility.margin);

        let rows = analysis.policy.rows();
        let mut gap = analysis.policy.k_eta.clone();
        for i in 0..rows {
            gap[(i, i)] -= sc.sigma_b2;
        }
        let keta_rel = gap.norm() / (sc.sigma_b2 * (rows as f64).sqrt());
        max_keta_gap = max_keta_gap.max(keta_rel);
        assert!(keta_rel <= 1e-8, "K_eta differs from K_B by {keta_rel}");

        let sym = analysis.report.symmetry_gap() / analysis.report.f_forward.max(1.0);
        max_sym_gap = max_sym_gap.max(sym);
        assert!(sym <= 1e-8, "forward/reverse differ by {sym}");
    }
    println!(
        "ACCEPTANCE 4 (optimal-attack identities): PASS — 50 feasible scenarios, \
         max K_eta gap {max_keta_gap:.2e}, max symmetry gap {max_sym_gap:.2e}"
    );
}

#[test]
fn acceptance_5_bound_validity() {
    // Dedicated bound audit across detector types and divergence scales;
    // criteria 3 and 6-8 additionally enforce the same predicate on every
    // curve they produce.
    let start = Instant::now();
    let runs = [
        ("general-lrt", scenario(2, 16, 2.0, 0.5, 0.4, vec![0, 3], vec![0, 1], 10_000, 51), Detector::Lrt),
        ("general-glrt", scenario(2, 16, 2.0, 0.5, 0.4, vec![0, 3], vec![0, 1], 10_000, 52), Detector::Glrt),
        ("meaconing-lrt", scenario(4, 6, 1.0, 0.25, 0.5, vec![0, 1, 2, 3], vec![0, 1, 2, 3], 10_000, 53), Detector::Lrt),
        ("strong-lrt", scenario(3, 48, 5.0, 2.0, 1.0, vec![0, 1, 2], vec![0, 2, 4], 10_000, 54), Detector::Lrt),
    ];
    let mut audited = 0usize;
    for (label, sc, det) in runs {
        let analysis = analyze_scenario(&sc).unwrap();
        let ch = ChannelSet::from_scenario(&sc).unwrap();
        let curve = estimate_det(&sc, &ch, det, &analysis.policy, None).unwrap();
        assert_bound(&curve, label);
        audited += curve.points.len();
    }
    let elapsed = start.elapsed();
    println!(
        "ACCEPTANCE 5 (bound validity): PASS — {audited} DET points audited with 3xCI slack, {:.1}s",
        elapsed.as_secs_f64()
    );
}

#[test]
fn acceptance_6_attacker_snr_invariance() {
    let start = Instant::now();
    // m=4, n=200, SNR_SB = -20 dB (sigma_B^2 = 50); SNR_SE of -10 and
    // -15 dB. Same seed: identical words and victim noise, so the curves
    // differ only through the attacker-side draws.
    let sigma_se = |db: f64| 1.0 / (2.0 * 10f64.powf(db / 10.0));
    let te = vec![0, 3, 2, 6];
    let tf = vec![0, 3, 1, 6];
    let mut curves = Vec::new();
    for db in [-10.0, -15.0] {
        let sc = scenario(4, 200, 50.0, 25.0, sigma_se(db), te.clone(), tf.clone(), 10_000, 6);
        let analysis = analyze_scenario(&sc).unwrap();
        assert!(analysis.feasibility.feasible, "SNR_SE {db} dB must be feasible");
        let ch = ChannelSet::from_scenario(&sc).unwrap();
        let curve = estimate_det(&sc, &ch, Detector::Lrt, &analysis.policy, None).unwrap();
        assert_bound(&curve, "snr-invariance");
        curves.push(curve);
    }
    let mut worst: f64 = f64::NEG_INFINITY;
    for &k in &ALPHA_COUNTS {
        let (a1, b1) = curves[0].operating_point_at_false_alarm_count(k);
        let (a2, b2) = curves[1].operating_point_at_false_alarm_count(k);
        assert_eq!(a1, a2, "shared alpha grid point must match exactly");
        let allowed = spoofsim_core::detect::wilson_halfwidth(b1, curves[0].trials)
            + spoofsim_core::detect::wilson_halfwidth(b2, curves[1].trials);
        worst = worst.max((b1 - b2).abs() - allowed);
        assert!(
            (b1 - b2).abs() <= allowed,
            "alpha {:.4}: beta {b1:.4} vs {b2:.4} beyond pooled CI {allowed:.4}",
            a1
        );
    }
    let elapsed = start.elapsed();
    println!(
        "ACCEPTANCE 6 (attacker-SNR invariance): PASS — D {:.3}, worst excess {worst:.4}, {:.1}s",
        curves[0].d_forward,
        elapsed.as_secs_f64()
    );
}

#[test]
fn acceptance_7_gaussian_vs_bpsk_glrt() {
    let start = Instant::now();
    let te = vec![0, 5, 2, 4];
    let tf = vec![0, 3, 1, 6];
    let mut curves = Vec::new();
    for signaling in [Signaling::Gaussian, Signaling::Bpsk] {
        let mut sc = scenario(4, 400, 50.0, 25.0, 5.0, te.clone(), tf.clone(), 10_000, 7);
        sc.signaling = signaling;
        let analysis = analyze_scenario(&sc).unwrap();
        assert!(analysis.feasibility.feasible);
        let ch = ChannelSet::from_scenario(&sc).unwrap();
        let curve = estimate_det(&sc, &ch, Detector::Glrt, &analysis.policy, None).unwrap();
        assert_bound(&curve, "glrt-signaling");
        curves.push(curve);
    }
    let mut worst: f64 = f64::NEG_INFINITY;
    for &k in &ALPHA_COUNTS {
        let (a1, b1) = curves[0].operating_point_at_false_alarm_count(k);
        let (_a2, b2) = curves[1].operating_point_at_false_alarm_count(k);
        let allowed = spoofsim_core::detect::wilson_halfwidth(b1, curves[0].trials)
            + spoofsim_core::detect::wilson_halfwidth(b2, curves[1].trials);
        worst = worst.max((b1 - b2).abs() - allowed);
        assert!(
            (b1 - b2).abs() <= allowed,
            "alpha {a1:.4}: gaussian beta {b1:.4} vs bpsk beta {b2:.4} beyond combined CI {allowed:.4}"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 600.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 7 (gaussian vs BPSK GLRT): PASS — worst excess {worst:.4}, {:.1}s",
        elapsed.as_secs_f64()
    );
}

#[test]
fn acceptance_8_monotonicity_and_optimality() {
    let start = Instant::now();
    // (a) Longer words improve detection pointwise (up to CI).
    let mut n_curves = Vec::new();
    for n in [32usize, 64, 128] {
        let sc = scenario(3, n, 10.0, 4.0, 2.0, vec![0, 1, 2], vec![0, 2, 4], 5_000, 8);
        let analysis = analyze_scenario(&sc).unwrap();
        let ch = ChannelSet::from_scenario(&sc).unwrap();
        let curve = estimate_det(&sc, &ch, Detector::Lrt, &analysis.policy, None).unwrap();
        assert_bound(&curve, "n-sweep");
        n_curves.push((n, curve));
    }
    for w in n_curves.windows(2) {
        let (n_small, ref c_small) = w[0];
        let (n_large, ref c_large) = w[1];
        assert!(c_small.d_forward < c_large.d_forward);
        for &k in &ALPHA_COUNTS {
            let k = (k / 2).max(1); // 5000 trials
            let (_, b_small) = c_small.operating_point_at_false_alarm_count(k);
            let (_, b_large) = c_large.operating_point_at_false_alarm_count(k);
            let slack = spoofsim_core::detect::wilson_halfwidth(b_small, c_small.trials)
                + spoofsim_core::detect::wilson_halfwidth(b_large, c_large.trials);
            assert!(
                b_large <= b_small + slack,
                "n {n_large} should not be worse than n {n_small}: {b_large} vs {b_small}"
            );
        }
    }

    // (b) Larger distance between the attacker position and the forged
    // position improves detection. Delay vectors derived from geometry.
    let shell = 26_560_000.0f64;
    let deg = std::f64::consts::PI / 180.0;
    let on_sphere = |r: f64, lat: f64, lon: f64| -> [f64; 3] {
        [
            r * (lat * deg).cos() * (lon * deg).cos(),
            r * (lat * deg).cos() * (lon * deg).sin(),
            r * (lat * deg).sin(),
        ]
    };
    let svs = [
        on_sphere(shell, 55.0, 10.0),
        on_sphere(shell, 20.0, 40.0),
        on_sphere(shell, 35.0, -30.0),
        on_sphere(shell, 70.0, 60.0),
        on_sphere(shell, 10.0, -5.0),
    ];
    let rate = 20_000.0;
    let forged_pos = on_sphere(6_371_000.0, 45.4, 11.9);
    let tau_forged = delay_vector(&forged_pos, &svs, rate).unwrap();
    let mut pos_curves = Vec::new();
    for dlon in [0.05f64, 0.35, 0.7] {
        let attacker = on_sphere(6_371_000.0, 45.4, 11.9 + dlon);
        let tau_eve = delay_vector(&attacker, &svs, rate).unwrap();
        let sc = scenario(5, 64, 10.0, 4.0, 2.0, tau_eve, tau_forged.clone(), 5_000, 9);
        let analysis = analyze_scenario(&sc).unwrap();
        let ch = ChannelSet::from_scenario(&sc).unwrap();
        let curve = estimate_det(&sc, &ch, Detector::Lrt, &analysis.policy, None).unwrap();
        assert_bound(&curve, "position-sweep");
        pos_curves.push((dlon, curve));
    }
    for w in pos_curves.windows(2) {
        let (d_near, ref c_near) = w[0];
        let (d_far, ref c_far) = w[1];
        assert!(
            c_near.d_forward < c_far.d_forward,
            "divergence must grow with distance: {} vs {}",
            c_near.d_forward,
            c_far.d_forward
        );
        for &k in &ALPHA_COUNTS {
            let k = (k / 2).max(1);
            let (_, b_near) = c_near.operating_point_at_false_alarm_count(k);
            let (_, b_far) = c_far.operating_point_at_false_alarm_count(k);
            let slack = spoofsim_core::detect::wilson_halfwidth(b_near, c_near.trials)
                + spoofsim_core::detect::wilson_halfwidth(b_far, c_far.trials);
            assert!(
                b_far <= b_near + slack,
                "distance {d_far} should not detect worse than {d_near}"
            );
        }
    }

    // (c) The synthesized policy minimizes the closed-form divergence over
    // random class-C perturbations.
    let sc = scenario(2, 2, 1.0, 0.2, 0.3, vec![0, 0], vec![0, 1], 10, 10);
    let analysis = analyze_scenario(&sc).unwrap();
    let ch = ChannelSet::from_scenario(&sc).unwrap();
    let f_star = analysis.report.f_forward;
    let mut rng = substream(808, StreamPurpose::Perturb, 0);
    let mut strict = 0usize;
    for i in 0..120 {
        let scale = if i % 3 == 0 { 0.01 } else { 0.1 };
        let pert: AttackPolicy = analysis
            .policy
            .perturbed(&ch.f, sc.sigma_e2, scale, &mut rng)
            .unwrap();
        let rep = kl_closed_form(ch.a.matrix(), &pert.b, sc.mx, &pert.k_eta, sc.sigma_b2).unwrap();
        assert!(
            rep.f_forward >= f_star - 1e-12 * f_star.max(1.0),
            "perturbation {i} beats the optimum: {} < {f_star}",
            rep.f_forward
        );
        if rep.f_forward > f_star {
            strict += 1;
        }
    }
    assert!(strict >= 110, "perturbations should almost surely cost divergence");

    let elapsed = start.elapsed();
    println!(
        "ACCEPTANCE 8 (monotonicity + optimality): PASS — n-sweep D {:?}, position-sweep D {:?}, \
         120 perturbations all above optimum, {:.1}s",
        n_curves.iter().map(|(_, c)| (c.d_forward * 100.0).round() / 100.0).collect::<Vec<_>>(),
        pos_curves.iter().map(|(_, c)| (c.d_forward * 100.0).round() / 100.0).collect::<Vec<_>>(),
        elapsed.as_secs_f64()
    );
}

#[test]
fn acceptance_9_feasibility_boundary() {
    // A = F = I (m=1, n=2, M_x=1): lambda_max is exactly 1 and the margin
    // equals sigma_B^2 - sigma_Bt^2 - sigma_E^2 bit-for-bit.
    let a = build_delay_channel(&[0], 2, 2).unwrap();
    let cases = [
        (1.0, 0.25, 0.5, true),
        (1.0, 0.25, 0.75, true),            // margin exactly zero
        (1.0, 0.25, 0.75 + 1e-6, false),    // just past the threshold
        (1.0, 0.25, 1.0, false),
    ];
    for (sb, sbt, se, expect_feasible) in cases {
        let sc = scenario(1, 2, sb, sbt, se, vec![0], vec![0], 10, 11);
        let (_, feas) = synthesize_optimal(&a, &a.clone(), &sc).unwrap();
        assert_eq!(feas.lambda_max, 1.0, "identity channel has unit spectrum");
        assert_eq!(feas.margin, sb - sbt - se, "margin must be analytic exactly");
        assert_eq!(
            feas.feasible, expect_feasible,
            "sigma_E^2 = {se}: feasibility must flip at the analytic threshold"
        );
    }
    println!(
        "ACCEPTANCE 9 (feasibility boundary): PASS — margin analytic and exact, flip at sigma_B^2 - sigma_Bt^2"
    );
}
