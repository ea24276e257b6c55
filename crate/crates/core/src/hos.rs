//! Higher-order statistics: sample moments, cumulants, noise offsets, and the
//! theoretical feature table used as classifier reference.
//!
//! The moment of order p with q conjugations is mu_pq = E{x^(p-q) (x*)^q}.
//! Moments estimated from a noisy stream y = x + w are biased by the noise;
//! for circular complex Gaussian w the bias terms depend only on the noise
//! power and the lower-order signal moments, so they can be subtracted once
//! the noise power is known (`denoise_moments`). Cumulants of order > 2 of a
//! Gaussian process vanish, so sample cumulants need no such offset.
//!
//! Feature vectors are self-normalized (each order-p statistic divided by
//! mu21^(p/2)) to cancel the scale ambiguity left by blind source separation.
//! The residual BSS phase phi multiplies each statistic by e^{j(p-2q)phi}, so
//! statistics with p = 2q are taken as real parts (rotation-invariant, sign
//! preserved) while all others are compared by modulus.

use crate::error::{DmiError, Result};
use crate::modem::ModulationScheme;
use crate::C64;

/// The ten sample moments the identification pipeline consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub mu20: C64,
    pub mu21: C64,
    pub mu40: C64,
    pub mu41: C64,
    pub mu42: C64,
    pub mu60: C64,
    pub mu61: C64,
    pub mu62: C64,
    pub mu63: C64,
    pub mu84: C64,
}

impl MomentSet {
    /// Estimates all ten moments in one pass over the samples.
    pub fn estimate(x: &[C64]) -> Result<MomentSet> {
        if x.is_empty() {
            return Err(DmiError::InvalidArgument(
                "cannot estimate moments of an empty sequence".into(),
            ));
        }
        let mut mu20 = C64::new(0.0, 0.0);
        let mut mu21 = 0.0f64;
        let mut mu40 = C64::new(0.0, 0.0);
        let mut mu41 = C64::new(0.0, 0.0);
        let mut mu42 = 0.0f64;
        let mut mu60 = C64::new(0.0, 0.0);
        let mut mu61 = C64::new(0.0, 0.0);
        let mut mu62 = C64::new(0.0, 0.0);
        let mut mu63 = 0.0f64;
        let mut mu84 = 0.0f64;
        for &s in x {
            let s2 = s * s; // x^2
            let a2 = s.norm_sqr(); // |x|^2
            let s4 = s2 * s2;
            let a4 = a2 * a2;
            mu20 += s2;
            mu21 += a2;
            mu40 += s4;
            mu41 += s2 * a2; // x^3 x* = x^2 |x|^2
            mu42 += a4;
            mu60 += s4 * s2;
            mu61 += s4 * a2; // x^5 x* = x^4 |x|^2
            mu62 += s2 * a4; // x^4 x*^2 = x^2 |x|^4
            mu63 += a4 * a2;
            mu84 += a4 * a4;
        }
        let n = x.len() as f64;
        Ok(MomentSet {
            mu20: mu20 / n,
            mu21: C64::new(mu21 / n, 0.0),
            mu40: mu40 / n,
            mu41: mu41 / n,
            mu42: C64::new(mu42 / n, 0.0),
            mu60: mu60 / n,
            mu61: mu61 / n,
            mu62: mu62 / n,
            mu63: C64::new(mu63 / n, 0.0),
            mu84: C64::new(mu84 / n, 0.0),
        })
    }
}

/// (1/N) sum x^(p-q) (x*)^q for arbitrary orders.
pub fn sample_moment(x: &[C64], p: u32, q: u32) -> Result<C64> {
    if x.is_empty() {
        return Err(DmiError::InvalidArgument(
            "cannot estimate a moment of an empty sequence".into(),
        ));
    }
    if q > p {
        return Err(DmiError::InvalidArgument(format!(
            "conjugation count q={q} exceeds order p={p}"
        )));
    }
    let sum: C64 = x.iter().map(|&s| s.powu(p - q) * s.conj().powu(q)).sum();
    Ok(sum / x.len() as f64)
}

/// The seven fourth- and sixth-order cumulants of the feature set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulantSet {
    pub k40: C64,
    pub k41: C64,
    pub k42: C64,
    pub k60: C64,
    pub k61: C64,
    pub k62: C64,
    pub k63: C64,
}

/// Zero-mean complex moment-to-cumulant relations. Odd-order moments vanish
/// for every symmetric constellation in the pool and are omitted.
pub fn cumulants_from_moments(m: &MomentSet) -> CumulantSet {
    let MomentSet {
        mu20,
        mu21,
        mu40,
        mu41,
        mu42,
        mu60,
        mu61,
        mu62,
        mu63,
        ..
    } = *m;
    let k40 = mu40 - 3.0 * mu20 * mu20;
    let k41 = mu41 - 3.0 * mu20 * mu21;
    let k42 = mu42 - mu20 * mu20.conj() - 2.0 * mu21 * mu21;
    let k60 = mu60 - 15.0 * mu40 * mu20 + 30.0 * mu20 * mu20 * mu20;
    let k61 = mu61 - 5.0 * mu40 * mu21 - 10.0 * mu41 * mu20 + 30.0 * mu20 * mu20 * mu21;
    let k62 = mu62 - mu40 * mu20.conj() - 8.0 * mu41 * mu21 - 6.0 * mu42 * mu20
        + 6.0 * mu20 * mu20 * mu20.conj()
        + 24.0 * mu21 * mu21 * mu20;
    let k63 = mu63 - 9.0 * mu42 * mu21 - 3.0 * mu41 * mu20.conj() - 3.0 * mu41.conj() * mu20
        + 12.0 * mu21 * mu21 * mu21
        + 18.0 * mu20 * mu20.conj() * mu21;
    CumulantSet {
        k40,
        k41,
        k42,
        k60,
        k61,
        k62,
        k63,
    }
}

/// Sample cumulants of a zero-mean sequence.
pub fn sample_cumulants(x: &[C64]) -> Result<CumulantSet> {
    Ok(cumulants_from_moments(&MomentSet::estimate(x)?))
}

/// mu_pq of circular complex Gaussian noise with total variance `sigma2`:
/// (p/2)! sigma2^(p/2) when q = p/2, zero elsewhere.
pub fn gaussian_moment(p: u32, q: u32, sigma2: f64) -> f64 {
    debug_assert!(q <= p);
    if p.is_multiple_of(2) && q == p / 2 {
        let half = p / 2;
        let fact: u64 = (1..=u64::from(half)).product::<u64>().max(1);
        fact as f64 * sigma2.powi(half as i32)
    } else {
        0.0
    }
}

/// Moment model of a circular complex Gaussian process.
#[derive(Debug, Clone, Copy)]
pub struct NoiseMomentModel {
    pub sigma2: f64,
}

impl NoiseMomentModel {
    pub fn moment(&self, p: u32, q: u32) -> f64 {
        gaussian_moment(p, q, self.sigma2)
    }
}

/// Subtracts the Gaussian-noise bias from the moments of a noisy stream,
/// given the (filtered) noise power of that branch. The recursion feeds the
/// already-denoised lower-order moments into the higher-order corrections;
/// mu20, mu40 and mu60 are noise-insensitive and pass through unchanged.
pub fn denoise_moments(noisy: &MomentSet, sigma2_branch: f64) -> MomentSet {
    let s2 = sigma2_branch;
    let s4 = s2 * s2;
    let s6 = s4 * s2;
    let s8 = s4 * s4;

    let mu21 = noisy.mu21 - s2;
    let mu41 = noisy.mu41 - 3.0 * noisy.mu20 * s2;
    let mu42 = noisy.mu42 - 4.0 * mu21 * s2 - 2.0 * s4;
    let mu61 = noisy.mu61 - 5.0 * noisy.mu40 * s2;
    let mu62 = noisy.mu62 - 8.0 * mu41 * s2 - 12.0 * noisy.mu20 * s4;
    let mu63 = noisy.mu63 - 9.0 * mu42 * s2 - 18.0 * mu21 * s4 - 6.0 * s6;
    let mu84 = noisy.mu84 - 16.0 * mu63 * s2 - 72.0 * mu42 * s4 - 96.0 * mu21 * s6 - 24.0 * s8;

    MomentSet {
        mu20: noisy.mu20,
        mu21,
        mu40: noisy.mu40,
        mu41,
        mu42,
        mu60: noisy.mu60,
        mu61,
        mu62,
        mu63,
        mu84,
    }
}

/// Which statistics feed the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureSet {
    /// Eight denoised moments plus seven cumulants.
    HosDenoised,
    /// Same fifteen statistics without the noise offset.
    HosRaw,
    /// The seven cumulants alone.
    HocOnly,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [
        FeatureSet::HosDenoised,
        FeatureSet::HosRaw,
        FeatureSet::HocOnly,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FeatureSet::HosDenoised => "denoised",
            FeatureSet::HosRaw => "raw",
            FeatureSet::HocOnly => "hoc",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Statistic order p per feature slot (table row order, moments then
/// cumulants); the normalizer is mu21^(p/2).
const FEATURE_ORDER: [u32; 15] = [4, 4, 4, 6, 6, 6, 6, 8, 4, 4, 4, 6, 6, 6, 6];
/// Slots with p = 2q: rotation-invariant, realified by taking the real part.
/// All other slots are realified by modulus.
const FEATURE_P2Q: [bool; 15] = [
    false, false, true, false, false, false, true, true, // mu40..mu84
    false, false, true, false, false, false, true, // k40..k63
];

const FEATURE_NAMES: [&str; 15] = [
    "mu40", "mu41", "mu42", "mu60", "mu61", "mu62", "mu63", "mu84", "k40", "k41", "k42", "k60",
    "k61", "k62", "k63",
];

/// Realified, self-normalized statistics for one recovered branch.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    feature_set: FeatureSet,
}

impl FeatureVector {
    /// Builds a vector from already-realified values: 15 entries for the HOS
    /// sets, 7 for cumulants only.
    pub fn new(values: Vec<f64>, feature_set: FeatureSet) -> Result<FeatureVector> {
        let want = match feature_set {
            FeatureSet::HocOnly => 7,
            _ => 15,
        };
        if values.len() != want {
            return Err(DmiError::InvalidArgument(format!(
                "{:?} expects {want} features, got {}",
                feature_set,
                values.len()
            )));
        }
        Ok(FeatureVector {
            values,
            feature_set,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn feature_set(&self) -> FeatureSet {
        self.feature_set
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Names matching `values()` slot for slot.
    pub fn names(feature_set: FeatureSet) -> &'static [&'static str] {
        match feature_set {
            FeatureSet::HocOnly => &FEATURE_NAMES[8..],
            _ => &FEATURE_NAMES,
        }
    }
}

fn realify(value: C64, slot: usize) -> f64 {
    if FEATURE_P2Q[slot] {
        value.re
    } else {
        value.norm()
    }
}

/// Divides each order-p statistic by mu21^(p/2), realifies, and packs the
/// requested feature set in table row order. `mu21` must be the signal-power
/// estimate consistent with the supplied moments (denoised when they are).
pub fn normalize_features(
    moments: &MomentSet,
    cumulants: &CumulantSet,
    mu21: f64,
    feature_set: FeatureSet,
) -> Result<FeatureVector> {
    if mu21 <= 0.0 || mu21.is_nan() {
        return Err(DmiError::DegenerateBranch { mu21 });
    }
    let stats: [C64; 15] = [
        moments.mu40,
        moments.mu41,
        moments.mu42,
        moments.mu60,
        moments.mu61,
        moments.mu62,
        moments.mu63,
        moments.mu84,
        cumulants.k40,
        cumulants.k41,
        cumulants.k42,
        cumulants.k60,
        cumulants.k61,
        cumulants.k62,
        cumulants.k63,
    ];
    let full = (0..15).map(|i| {
        let norm = mu21.powi(FEATURE_ORDER[i] as i32 / 2);
        realify(stats[i] / norm, i)
    });
    let values: Vec<f64> = match feature_set {
        FeatureSet::HocOnly => full.skip(8).collect(),
        _ => full.collect(),
    };
    Ok(FeatureVector {
        values,
        feature_set,
    })
}

/// Theoretical statistics of the six unit-variance noiseless constellations,
/// moments mu40..mu84 then cumulants k40..k63.
const THEORETICAL: [(ModulationScheme, [f64; 15]); 6] = [
    (
        ModulationScheme::Bpsk,
        [
            1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, //
            -2.0, -2.0, -2.0, 16.0, 16.0, 16.0, 16.0,
        ],
    ),
    (
        ModulationScheme::Qpsk,
        [
            1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 1.0, //
            1.0, 0.0, -1.0, 0.0, -4.0, 0.0, 4.0,
        ],
    ),
    (
        ModulationScheme::Psk8,
        [
            0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, //
            0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 4.0,
        ],
    ),
    (
        ModulationScheme::Ask4,
        [
            1.64, 1.64, 1.64, 2.92, 2.92, 2.92, 2.92, 5.25, //
            -1.36, -1.36, -1.36, 8.32, 8.32, 8.32, 8.32,
        ],
    ),
    (
        ModulationScheme::Ask8,
        [
            1.77, 1.77, 1.77, 3.62, 3.62, 3.62, 3.62, 7.92, //
            -1.24, -1.24, -1.24, 7.19, 7.19, 7.19, 7.19,
        ],
    ),
    (
        ModulationScheme::Qam16,
        [
            -0.67, 0.0, 1.32, 0.0, -1.32, 0.0, 1.96, 3.12, //
            -0.68, 0.0, -0.68, 0.0, 2.08, 0.0, 2.08,
        ],
    ),
];

/// The classifier reference table: one realified vector per scheme, in scheme
/// order, projected to the requested feature set.
pub fn theoretical_feature_table(
    feature_set: FeatureSet,
) -> Vec<(ModulationScheme, FeatureVector)> {
    THEORETICAL
        .iter()
        .map(|&(scheme, raw)| {
            let full = (0..15).map(|i| if FEATURE_P2Q[i] { raw[i] } else { raw[i].abs() });
            let values: Vec<f64> = match feature_set {
                FeatureSet::HocOnly => full.skip(8).collect(),
                _ => full.collect(),
            };
            (
                scheme,
                FeatureVector {
                    values,
                    feature_set,
                },
            )
        })
        .collect()
}
