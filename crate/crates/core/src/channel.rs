//! Block delay-channel matrices.
//!
//! A delay channel maps the concatenated word `x ∈ C^{mn}` to the sum of
//! per-satellite words, each shifted by its integer delay. Block `i` embeds
//! the `n × n` identity into `N` rows starting at row `τ_i`; the channel
//! matrix is the horizontal concatenation of the `m` blocks. All channels
//! of one scenario share the padded height `N = n + max(δ_B, δ_E, δ_f)` so
//! legitimate and spoofed observations live in one space.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scenario::Scenario;

/// A pure delay channel with unit gains.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayChannel {
    matrix: DMatrix<f64>,
    delays: Vec<usize>,
    n: usize,
    delta: usize,
}

impl DelayChannel {
    /// Dense `N × mn` matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Per-satellite delays.
    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    /// This channel's own largest delay.
    pub fn delta(&self) -> usize {
        self.delta
    }

    /// Word length per satellite.
    pub fn word_len(&self) -> usize {
        self.n
    }

    /// Padded output length `N`.
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Input length `mn`.
    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// The per-satellite shift block for satellite `i`: the `τ_i`-sample
    /// downshift embedding of the `n × n` identity into `N` rows. The
    /// channel matrix is the horizontal concatenation of these blocks.
    pub fn block(&self, i: usize) -> DMatrix<f64> {
        assert!(i < self.delays.len(), "satellite index out of range");
        self.matrix.columns(i * self.n, self.n).into_owned()
    }

    /// Apply the channel to a word without materializing the matrix:
    /// the output is the sum of the `m` delayed segments.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols(), "word length mismatch");
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows()];
        for (i, &tau) in self.delays.iter().enumerate() {
            let seg = &x[i * self.n..(i + 1) * self.n];
            for (j, &s) in seg.iter().enumerate() {
                out[tau + j] += s;
            }
        }
        out
    }

    /// Real-plane variant of [`DelayChannel::apply`].
    pub fn apply_real(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols(), "word length mismatch");
        let mut out = vec![0.0; self.rows()];
        for (i, &tau) in self.delays.iter().enumerate() {
            for j in 0..self.n {
                out[tau + j] += x[i * self.n + j];
            }
        }
        out
    }
}

/// Build the channel for a delay vector, padded to `rows` output rows.
pub fn build_delay_channel(delays: &[usize], n: usize, rows: usize) -> Result<DelayChannel> {
    let max_delay = delays.iter().copied().max().unwrap_or(0);
    if rows < n + max_delay {
        return Err(Error::Dimension(format!(
            "padded rows {rows} too small for word length {n} and max delay {max_delay}"
        )));
    }
    let m = delays.len();
    let mut matrix = DMatrix::zeros(rows, m * n);
    for (i, &tau) in delays.iter().enumerate() {
        for j in 0..n {
            matrix[(tau + j, i * n + j)] = 1.0;
        }
    }
    Ok(DelayChannel {
        matrix,
        delays: delays.to_vec(),
        n,
        delta: max_delay,
    })
}

/// The channel pair entering the attack synthesis and the detector.
///
/// `a` is the legitimate-reference channel built from the forged delay
/// vector: the spoofed signal carries those delays, so they are what the
/// verifier locks onto and tests against (in nominal conditions the same
/// matrix plays the role of the victim's own channel). `f` is the channel
/// from the constellation to the attacker.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// Legitimate-reference channel (forged delays).
    pub a: DelayChannel,
    /// Attacker observation channel.
    pub f: DelayChannel,
}

impl ChannelSet {
    /// Build both channels of a scenario with the common padded length.
    pub fn from_scenario(sc: &Scenario) -> Result<Self> {
        let rows = sc.padded_len();
        Ok(ChannelSet {
            a: build_delay_channel(&sc.tau_forged, sc.n, rows)?,
            f: build_delay_channel(&sc.tau_eve, sc.n, rows)?,
        })
    }
}

/// True when `ker(A) ⊄ ker(F)`: some word annihilated by `A` survives `F`.
///
/// Decided by ranks: a basis of the null space of `A` is taken from the
/// SVD of `A`, and `F` restricted to that basis is checked for a nonzero
/// singular value. Singular values below `tol` times the largest one count
/// as zero.
pub fn kernel_condition(a: &DelayChannel, f: &DelayChannel) -> Result<bool> {
    if a.cols() != f.cols() {
        return Err(Error::Dimension(format!(
            "channels disagree on word length: {} vs {}",
            a.cols(),
            f.cols()
        )));
    }
    const TOL: f64 = 1e-10;
    let sv = a.matrix.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    let rank = sv.iter().filter(|&&s| s > TOL * smax).count();
    if rank == a.cols() {
        return Ok(false); // ker(A) = {0} is contained in every kernel
    }
    // Kernel basis from the eigendecomposition of AᵀA. The thin SVD keeps
    // only min(N, mn) right vectors, which misses kernel directions when
    // N < mn, so the square Gram form is used instead.
    let gram = a.matrix.transpose() * &a.matrix;
    let (vals, vecs) = linalg::sym_eig(&gram);
    let vmax = vals.iter().cloned().fold(0.0_f64, f64::max);
    let mut max_f_norm: f64 = 0.0;
    let f_scale = f
        .matrix
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max);
    for i in 0..vals.len() {
        if vals[i] <= (TOL * TOL) * vmax.max(1.0) {
            let dir = vecs.column(i).into_owned();
            let img = &f.matrix * &dir;
            max_f_norm = max_f_norm.max(img.norm());
        }
    }
    Ok(max_f_norm > TOL * f_scale.max(1.0))
}
