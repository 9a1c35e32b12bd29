//! Experiment scenarios: physical parameters, signaling choice, and
//! simulation controls, parsed from a TOML document.
//!
//! Noise levels can be given either as per-component variances or as SNRs
//! in dB. The SNR definitions are `Λ_SB = M_x / (2σ_B²)` and
//! `Λ_SE = M_x / (2σ_E²)`: per-sample signal power over the total complex
//! noise power (each complex noise sample has variance `σ²` per real
//! component, `2σ²` in total).
//!
//! Delay vectors are integer sample counts. Each vector is normalized so
//! its minimum is zero; only relative delays matter to the model. The
//! `tau_forged` vector defines the delay pattern carried by the spoofed
//! signal, which is also the pattern the verifier locks onto and tests
//! against; `tau_eve` is the attacker's own reception pattern. `tau_bob`
//! records the victim's nominal reception pattern and enters the analysis
//! only through the common padded observation length.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in m/s, used to convert ranges to sample delays.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Modulation of the transmitted word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signaling {
    /// Circularly-symmetric complex Gaussian samples.
    Gaussian,
    /// Real antipodal samples `±√M_x`.
    Bpsk,
}

impl std::fmt::Display for Signaling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Signaling::Gaussian => write!(f, "gaussian"),
            Signaling::Bpsk => write!(f, "bpsk"),
        }
    }
}

/// A validated experiment scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    /// Number of satellites.
    pub m: usize,
    /// Per-satellite word length in samples.
    pub n: usize,
    /// Per-sample signal power `M_x`.
    pub mx: f64,
    /// Per-component noise variance at the victim receiver, nominal.
    pub sigma_b2: f64,
    /// Per-component noise variance at the victim receiver under attack.
    pub sigma_bt2: f64,
    /// Per-component noise variance at the attacker receiver.
    pub sigma_e2: f64,
    /// Victim reception delays, normalized to minimum zero.
    pub tau_bob: Vec<usize>,
    /// Attacker reception delays, normalized to minimum zero.
    pub tau_eve: Vec<usize>,
    /// Forged delays carried by the spoofed signal, normalized.
    pub tau_forged: Vec<usize>,
    /// Modulation of the transmitted word.
    pub signaling: Signaling,
    /// Root seed for all random substreams.
    pub seed: u64,
    /// Monte-Carlo trials per hypothesis.
    pub trials: usize,
}

impl Scenario {
    /// Largest victim reception delay.
    pub fn delta_bob(&self) -> usize {
        self.tau_bob.iter().copied().max().unwrap_or(0)
    }

    /// Largest attacker reception delay.
    pub fn delta_eve(&self) -> usize {
        self.tau_eve.iter().copied().max().unwrap_or(0)
    }

    /// Largest forged delay.
    pub fn delta_forged(&self) -> usize {
        self.tau_forged.iter().copied().max().unwrap_or(0)
    }

    /// Common observation length `N = n + max(δ_B, δ_E, δ_f)`. All channel
    /// outputs are zero-padded to this length so legitimate and spoofed
    /// observations live in one space.
    pub fn padded_len(&self) -> usize {
        self.n + self.delta_bob().max(self.delta_eve()).max(self.delta_forged())
    }

    /// Legitimate-link SNR `Λ_SB` in dB.
    pub fn snr_sb_db(&self) -> f64 {
        10.0 * (self.mx / (2.0 * self.sigma_b2)).log10()
    }

    /// Attacker-link SNR `Λ_SE` in dB.
    pub fn snr_se_db(&self) -> f64 {
        10.0 * (self.mx / (2.0 * self.sigma_e2)).log10()
    }

    /// Check every invariant; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::invalid("m", "must be ≥ 1"));
        }
        if self.n < 1 {
            return Err(Error::invalid("n", "must be ≥ 1"));
        }
        if self.trials < 1 {
            return Err(Error::invalid("trials", "must be ≥ 1"));
        }
        if self.mx.is_nan() || self.mx <= 0.0 {
            return Err(Error::invalid("mx", "must be > 0"));
        }
        for (name, v) in [
            ("sigma_b2", self.sigma_b2),
            ("sigma_bt2", self.sigma_bt2),
            ("sigma_e2", self.sigma_e2),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid(name, "must be a positive finite variance"));
            }
        }
        for (name, taus) in [
            ("tau_bob", &self.tau_bob),
            ("tau_eve", &self.tau_eve),
            ("tau_forged", &self.tau_forged),
        ] {
            if taus.len() != self.m {
                return Err(Error::invalid(
                    name,
                    format!("must list exactly m = {} delays, got {}", self.m, taus.len()),
                ));
            }
            if taus.iter().copied().min() != Some(0) {
                return Err(Error::invalid(name, "must be normalized to minimum 0"));
            }
        }
        Ok(())
    }

    /// Normalize all delay vectors to minimum zero. Idempotent.
    pub fn normalize(&mut self) {
        for taus in [&mut self.tau_bob, &mut self.tau_eve, &mut self.tau_forged] {
            normalize_delays(taus);
        }
    }

    /// Parse and validate a scenario from a TOML string.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_scenario()
    }

    /// Canonical TOML form: raw variances, explicit delay lists.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

/// Load and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_toml_str(&text)
}

/// Shift a delay vector so its minimum is zero.
pub fn normalize_delays(taus: &mut [usize]) {
    if let Some(&min) = taus.iter().min() {
        for t in taus.iter_mut() {
            *t -= min;
        }
    }
}

/// Receiver, attacker, and satellite geometry used to derive delay vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionSpec {
    /// Victim receiver position, ECEF meters.
    pub receiver_ecef: [f64; 3],
    /// Attacker position, ECEF meters.
    pub attacker_ecef: [f64; 3],
    /// Satellite positions, ECEF meters; one per satellite.
    pub sv_ecef: Vec<[f64; 3]>,
    /// Samples per second for the range-to-delay conversion.
    pub sample_rate: f64,
}

fn range(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Delay vector of a receiver at `rx`: propagation ranges rounded to whole
/// samples, then normalized to minimum zero.
pub fn delay_vector(rx: &[f64; 3], svs: &[[f64; 3]], sample_rate: f64) -> Result<Vec<usize>> {
    if sample_rate.is_nan() || sample_rate <= 0.0 {
        return Err(Error::invalid("sample_rate", "must be > 0"));
    }
    let raw: Vec<u64> = svs
        .iter()
        .map(|sv| (range(sv, rx) / SPEED_OF_LIGHT * sample_rate).round() as u64)
        .collect();
    let min = raw.iter().copied().min().unwrap_or(0);
    Ok(raw.iter().map(|&t| (t - min) as usize).collect())
}

/// Derive `(tau_bob, tau_eve)` from geometry.
pub fn delays_from_positions(spec: &PositionSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    for i in 0..spec.sv_ecef.len() {
        for j in (i + 1)..spec.sv_ecef.len() {
            if spec.sv_ecef[i] == spec.sv_ecef[j] {
                return Err(Error::invalid("svs", format!("positions {i} and {j} coincide")));
            }
        }
    }
    let bob = delay_vector(&spec.receiver_ecef, &spec.sv_ecef, spec.sample_rate)?;
    let eve = delay_vector(&spec.attacker_ecef, &spec.sv_ecef, spec.sample_rate)?;
    Ok((bob, eve))
}

// --- raw config document ---------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PositionsBlock {
    receiver: [f64; 3],
    attacker: [f64; 3],
    /// Optional position whose delay vector replaces `tau_forged`.
    forged: Option<[f64; 3]>,
    svs: Vec<[f64; 3]>,
    sample_rate: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    m: i64,
    n: i64,
    mx: f64,
    sigma_b2: Option<f64>,
    snr_sb_db: Option<f64>,
    sigma_bt2: f64,
    sigma_e2: Option<f64>,
    snr_se_db: Option<f64>,
    tau_bob: Option<Vec<i64>>,
    tau_eve: Option<Vec<i64>>,
    tau_forged: Option<Vec<i64>>,
    signaling: Signaling,
    seed: i64,
    trials: i64,
    positions: Option<PositionsBlock>,
}

fn variance_from(
    field: &str,
    raw: Option<f64>,
    snr_field: &str,
    snr_db: Option<f64>,
    mx: f64,
) -> Result<f64> {
    match (raw, snr_db) {
        (Some(v), None) => Ok(v),
        (None, Some(db)) => Ok(mx / (2.0 * 10f64.powf(db / 10.0))),
        (Some(_), Some(_)) => Err(Error::invalid(
            field,
            format!("and {snr_field} are both set; give exactly one"),
        )),
        (None, None) => Err(Error::invalid(
            field,
            format!("or {snr_field} is required"),
        )),
    }
}

fn delays_field(field: &str, raw: Option<Vec<i64>>) -> Result<Vec<usize>> {
    let raw = raw.ok_or_else(|| Error::invalid(field, "is required".to_string()))?;
    let mut out = Vec::with_capacity(raw.len());
    for v in raw {
        if v < 0 {
            return Err(Error::invalid(field, "delays must be ≥ 0"));
        }
        out.push(v as usize);
    }
    Ok(out)
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario> {
        if self.m < 1 {
            return Err(Error::invalid("m", "must be ≥ 1"));
        }
        if self.n < 1 {
            return Err(Error::invalid("n", "must be ≥ 1"));
        }
        if self.seed < 0 {
            return Err(Error::invalid("seed", "must be ≥ 0"));
        }
        if self.trials < 1 {
            return Err(Error::invalid("trials", "must be ≥ 1"));
        }
        let sigma_b2 = variance_from("sigma_b2", self.sigma_b2, "snr_sb_db", self.snr_sb_db, self.mx)?;
        let sigma_e2 = variance_from("sigma_e2", self.sigma_e2, "snr_se_db", self.snr_se_db, self.mx)?;

        let (tau_bob, tau_eve, tau_forged) = if let Some(pos) = self.positions {
            if self.tau_bob.is_some() || self.tau_eve.is_some() {
                return Err(Error::invalid(
                    "positions",
                    "replaces tau_bob/tau_eve; remove the explicit vectors",
                ));
            }
            let spec = PositionSpec {
                receiver_ecef: pos.receiver,
                attacker_ecef: pos.attacker,
                sv_ecef: pos.svs.clone(),
                sample_rate: pos.sample_rate,
            };
            let (bob, eve) = delays_from_positions(&spec)?;
            let forged = match (pos.forged, self.tau_forged) {
                (Some(p), None) => delay_vector(&p, &pos.svs, pos.sample_rate)?,
                (None, raw) => delays_field("tau_forged", raw)?,
                (Some(_), Some(_)) => {
                    return Err(Error::invalid(
                        "tau_forged",
                        "and positions.forged are both set; give exactly one",
                    ))
                }
            };
            (bob, eve, forged)
        } else {
            (
                delays_field("tau_bob", self.tau_bob)?,
                delays_field("tau_eve", self.tau_eve)?,
                delays_field("tau_forged", self.tau_forged)?,
            )
        };

        let mut sc = Scenario {
            m: self.m as usize,
            n: self.n as usize,
            mx: self.mx,
            sigma_b2,
            sigma_bt2: self.sigma_bt2,
            sigma_e2,
            tau_bob,
            tau_eve,
            tau_forged,
            signaling: self.signaling,
            seed: self.seed as u64,
            trials: self.trials as usize,
        };
        sc.normalize();
        sc.validate()?;
        Ok(sc)
    }
}
