//! Frequency-flat block-fading MIMO channel with circular complex Gaussian
//! noise, plus the local-oscillator impairments used in the sensitivity
//! experiments (stationary phase noise and carrier frequency offset).

use crate::error::{DmiError, Result};
use crate::linalg::CMat;
use crate::C64;
use rand::Rng;
use rand_distr::StandardNormal;

/// What a frame holds. Purely descriptive; the math never branches on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameRole {
    Transmitted,
    Received,
    Recovered,
}

/// A block of complex baseband samples, one row per antenna (or recovered
/// stream), all rows the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoFrame {
    pub role: FrameRole,
    rows: Vec<Vec<C64>>,
}

impl MimoFrame {
    pub fn new(role: FrameRole, rows: Vec<Vec<C64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(DmiError::InvalidArgument("frame needs >= 1 antenna".into()));
        }
        let n = rows[0].len();
        if n == 0 {
            return Err(DmiError::InvalidArgument("frame needs >= 1 sample".into()));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(DmiError::InvalidArgument(
                "all antenna rows must have equal length".into(),
            ));
        }
        Ok(MimoFrame { role, rows })
    }

    pub fn n_antennas(&self) -> usize {
        self.rows.len()
    }

    /// Samples per antenna.
    pub fn len(&self) -> usize {
        self.rows[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false // N >= 1 by construction
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<C64>] {
        &self.rows
    }
}

/// N_r x N_t matrix of flat-fading channel gains, constant over a frame.
#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    m: CMat,
}

impl ChannelMatrix {
    /// Wraps an explicit gain matrix. Square matrices are accepted here so
    /// tests can build identity pass-through channels; `draw_channel` is the
    /// constructor that enforces the N_t < N_r operating assumption.
    pub fn from_matrix(m: CMat) -> ChannelMatrix {
        ChannelMatrix { m }
    }

    pub fn identity(n: usize) -> ChannelMatrix {
        ChannelMatrix {
            m: CMat::identity(n),
        }
    }

    pub fn n_r(&self) -> usize {
        self.m.rows()
    }

    pub fn n_t(&self) -> usize {
        self.m.cols()
    }

    pub fn entries(&self) -> &CMat {
        &self.m
    }
}

/// Draws a spatially-uncorrelated Rayleigh channel: i.i.d. unit-variance
/// circular complex Gaussian entries.
pub fn draw_channel(n_t: usize, n_r: usize, rng: &mut impl Rng) -> Result<ChannelMatrix> {
    if n_t == 0 {
        return Err(DmiError::InvalidArgument("n_t must be >= 1".into()));
    }
    if n_t >= n_r {
        return Err(DmiError::InvalidArgument(format!(
            "need n_t < n_r, got {n_t} >= {n_r}"
        )));
    }
    let m = CMat::from_fn(n_r, n_t, |_, _| complex_gaussian(1.0, rng));
    Ok(ChannelMatrix { m })
}

/// Total complex noise variance for a per-receive-antenna SNR: with
/// unit-variance symbols and channel entries the mean signal power at each
/// receive antenna is N_t, so sigma_w^2 = N_t * 10^(-snr/10).
pub fn noise_variance_for_snr(snr_db: f64, n_t: usize) -> f64 {
    debug_assert!(n_t >= 1);
    n_t as f64 * 10f64.powf(-snr_db / 10.0)
}

/// One draw of circular complex Gaussian noise with total variance `sigma2`
/// (split evenly between real and imaginary parts).
#[inline]
fn complex_gaussian(sigma2: f64, rng: &mut impl Rng) -> C64 {
    let s = (sigma2 / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// y_i(n) = sum_j h_ij x_j(n) + w_i(n).
pub fn transmit(
    x: &MimoFrame,
    h: &ChannelMatrix,
    sigma_w2: f64,
    rng: &mut impl Rng,
) -> Result<MimoFrame> {
    if x.n_antennas() != h.n_t() {
        return Err(DmiError::InvalidArgument(format!(
            "frame has {} streams but channel expects {}",
            x.n_antennas(),
            h.n_t()
        )));
    }
    if sigma_w2 < 0.0 {
        return Err(DmiError::InvalidArgument("sigma_w2 must be >= 0".into()));
    }
    let n = x.len();
    let mut rows = Vec::with_capacity(h.n_r());
    for i in 0..h.n_r() {
        let mut row = vec![C64::new(0.0, 0.0); n];
        for j in 0..h.n_t() {
            let hij = h.entries()[(i, j)];
            let src = x.row(j);
            for (y, &s) in row.iter_mut().zip(src) {
                *y += hij * s;
            }
        }
        if sigma_w2 > 0.0 {
            for y in row.iter_mut() {
                *y += complex_gaussian(sigma_w2, rng);
            }
        }
        rows.push(row);
    }
    Ok(MimoFrame {
        role: FrameRole::Received,
        rows,
    })
}

/// Receiver impairment knobs for the sensitivity scenarios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpairmentConfig {
    pub phase_noise_enabled: bool,
    /// Normalized -3 dB bandwidth of the phase-noise spectrum, cycles/sample.
    pub pn_bandwidth: f64,
    /// Phase-noise level near DC, dBc/Hz (normalized units).
    pub pn_level_dbc_hz: f64,
    pub cfo_enabled: bool,
    /// Carrier frequency offset, cycles/sample.
    pub cfo_normalized: f64,
}

impl Default for ImpairmentConfig {
    fn default() -> Self {
        ImpairmentConfig {
            phase_noise_enabled: false,
            pn_bandwidth: 2e-3,
            pn_level_dbc_hz: -3.0,
            cfo_enabled: false,
            cfo_normalized: 0.0,
        }
    }
}

impl ImpairmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.phase_noise_enabled && !(self.pn_bandwidth > 0.0 && self.pn_bandwidth < 0.5) {
            return Err(DmiError::InvalidArgument(format!(
                "pn_bandwidth must lie in (0, 0.5), got {}",
                self.pn_bandwidth
            )));
        }
        if !(0.0..0.5).contains(&self.cfo_normalized) {
            return Err(DmiError::InvalidArgument(format!(
                "cfo_normalized must lie in [0, 0.5), got {}",
                self.cfo_normalized
            )));
        }
        Ok(())
    }
}

/// Rotates every sample by e^{j 2 pi delta_f n}; the same rotation is shared
/// by all antennas (one downconverter reference per receiver).
pub fn apply_cfo(y: &MimoFrame, delta_f: f64) -> MimoFrame {
    assert!((0.0..0.5).contains(&delta_f), "delta_f out of [0, 0.5)");
    if delta_f == 0.0 {
        return y.clone();
    }
    let rows = y
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(n, &s)| {
                    s * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * delta_f * n as f64)
                })
                .collect()
        })
        .collect();
    MimoFrame { role: y.role, rows }
}

/// Stationary phase-noise process: white Gaussian noise through a one-pole
/// low-pass filter fitted to the (level, bandwidth) mask, started from the
/// stationary distribution. Returns phi(n) in radians.
fn phase_noise_process(
    n: usize,
    bandwidth: f64,
    level_dbc_hz: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    // Pole from the half-power frequency: 2 sqrt(a) sin(theta_c/2) = 1 - a.
    let s = (std::f64::consts::PI * bandwidth).sin();
    let sqrt_a = (s * s + 1.0).sqrt() - s;
    let a = sqrt_a * sqrt_a;
    // Gain from the DC level: g^2 / (1-a)^2 = 10^(level/10).
    let g = (1.0 - a) * 10f64.powf(level_dbc_hz / 20.0);

    let stationary_std = if g == 0.0 {
        0.0
    } else {
        (g * g / (1.0 - a * a)).sqrt()
    };
    let mut phi = Vec::with_capacity(n);
    let mut state = stationary_std * rng.sample::<f64, _>(StandardNormal);
    phi.push(state);
    for _ in 1..n {
        state = a * state + g * rng.sample::<f64, _>(StandardNormal);
        phi.push(state);
    }
    phi
}

/// Multiplies each antenna row by e^{j phi_i(n)} with an independent phase
/// noise realization per antenna (independent oscillators per chain).
pub fn apply_phase_noise(y: &MimoFrame, cfg: &ImpairmentConfig, rng: &mut impl Rng) -> MimoFrame {
    assert!(
        cfg.phase_noise_enabled,
        "phase noise path called while disabled"
    );
    let rows = y
        .rows()
        .iter()
        .map(|row| {
            let phi = phase_noise_process(row.len(), cfg.pn_bandwidth, cfg.pn_level_dbc_hz, rng);
            row.iter()
                .zip(phi)
                .map(|(&s, p)| s * C64::from_polar(1.0, p))
                .collect()
        })
        .collect();
    MimoFrame { role: y.role, rows }
}
