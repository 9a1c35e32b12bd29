//! Transmitted words and receiver noise.
//!
//! Both signaling schemes share the word covariance `E[xxᴴ] = M_x·I`:
//! Gaussian words have i.i.d. circularly-symmetric samples with total
//! per-sample variance `M_x` (real and imaginary parts `M_x/2` each), BPSK
//! words are real antipodal `±√M_x`. Noise vectors are circularly
//! symmetric with the quoted variance in *each* real component, i.e. a
//! total per-sample variance of twice the quoted value; all covariance
//! matrices in the divergence and detection formulas are expressed in that
//! per-component convention.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::scenario::{Scenario, Signaling};

/// A transmitted word: the concatenation of the `m` per-satellite signals.
#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    /// `mn` complex samples.
    pub samples: Vec<Complex64>,
    /// Modulation that produced the samples.
    pub scheme: Signaling,
    /// Per-sample power `M_x`.
    pub power: f64,
}

/// Draw a word for the scenario from the given stream. Per-satellite
/// segments are independent because samples are i.i.d.
pub fn draw_word(sc: &Scenario, rng: &mut impl Rng) -> Word {
    let len = sc.m * sc.n;
    let samples = match sc.signaling {
        Signaling::Gaussian => {
            let sd = (sc.mx / 2.0).sqrt();
            (0..len)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re * sd, im * sd)
                })
                .collect()
        }
        Signaling::Bpsk => {
            let amp = sc.mx.sqrt();
            (0..len)
                .map(|_| {
                    let bit: bool = rng.random();
                    Complex64::new(if bit { amp } else { -amp }, 0.0)
                })
                .collect()
        }
    };
    Word {
        samples,
        scheme: sc.signaling,
        power: sc.mx,
    }
}

/// Draw circularly-symmetric complex noise with the given per-component
/// variance (real and imaginary parts each have this variance).
pub fn draw_noise(dim: usize, per_component_variance: f64, rng: &mut impl Rng) -> Vec<Complex64> {
    let sd = per_component_variance.sqrt();
    (0..dim)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * sd, im * sd)
        })
        .collect()
}

/// Draw a real Gaussian vector with the given per-component variance.
/// Used by the Monte-Carlo divergence oracle, which works in the
/// real-Gaussian reading of the model.
pub fn draw_noise_real(dim: usize, variance: f64, rng: &mut impl Rng) -> Vec<f64> {
    let sd = variance.sqrt();
    (0..dim)
        .map(|_| {
            let v: f64 = rng.sample(StandardNormal);
            v * sd
        })
        .collect()
}

/// Element-wise sum, asserting equal lengths.
pub fn add(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| x + y).collect()
}
