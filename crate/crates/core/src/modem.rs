//! Symbol sources for the six supported digital modulation schemes.
//!
//! Every constellation is normalized to zero mean and unit average symbol
//! energy, so downstream statistics can be compared directly against the
//! theoretical unit-variance feature table. Symbols are drawn uniformly and
//! independently; there is no bit source, pulse shaping or oversampling —
//! everything operates at baseband symbol rate.

use crate::error::{DmiError, Result};
use crate::C64;
use rand::Rng;
use std::fmt;

/// The modulation scheme pool. The declaration order is the canonical total
/// order used for tie-breaking in the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModulationScheme {
    Bpsk,
    Qpsk,
    Psk8,
    Ask4,
    Ask8,
    Qam16,
}

impl ModulationScheme {
    pub const ALL: [ModulationScheme; 6] = [
        ModulationScheme::Bpsk,
        ModulationScheme::Qpsk,
        ModulationScheme::Psk8,
        ModulationScheme::Ask4,
        ModulationScheme::Ask8,
        ModulationScheme::Qam16,
    ];

    /// Constellation size M.
    pub fn order(self) -> usize {
        match self {
            ModulationScheme::Bpsk => 2,
            ModulationScheme::Qpsk => 4,
            ModulationScheme::Psk8 => 8,
            ModulationScheme::Ask4 => 4,
            ModulationScheme::Ask8 => 8,
            ModulationScheme::Qam16 => 16,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModulationScheme::Bpsk => "BPSK",
            ModulationScheme::Qpsk => "QPSK",
            ModulationScheme::Psk8 => "8PSK",
            ModulationScheme::Ask4 => "4ASK",
            ModulationScheme::Ask8 => "8ASK",
            ModulationScheme::Qam16 => "16QAM",
        }
    }

    /// Index in [`Self::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ModulationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Unit-variance, zero-mean symbol alphabet for one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationTable {
    pub scheme: ModulationScheme,
    pub points: Vec<C64>,
}

/// Returns the normalized alphabet for `scheme`. Deterministic: the same
/// scheme always yields the identical table.
pub fn constellation(scheme: ModulationScheme) -> ConstellationTable {
    let points = match scheme {
        ModulationScheme::Bpsk => vec![C64::new(-1.0, 0.0), C64::new(1.0, 0.0)],
        ModulationScheme::Qpsk => {
            let a = 0.5f64.sqrt();
            vec![
                C64::new(a, a),
                C64::new(-a, a),
                C64::new(-a, -a),
                C64::new(a, -a),
            ]
        }
        // Unrotated 8-PSK, e^{j k pi/4}.
        ModulationScheme::Psk8 => (0..8)
            .map(|k| C64::from_polar(1.0, k as f64 * std::f64::consts::FRAC_PI_4))
            .collect(),
        ModulationScheme::Ask4 => ask_levels(&[-3.0, -1.0, 1.0, 3.0]),
        ModulationScheme::Ask8 => ask_levels(&[-7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0]),
        ModulationScheme::Qam16 => {
            let levels = [-3.0, -1.0, 1.0, 3.0];
            // E{a^2 + b^2} = 5 + 5 = 10 for the square grid.
            let scale = 1.0 / 10f64.sqrt();
            let mut pts = Vec::with_capacity(16);
            for &a in &levels {
                for &b in &levels {
                    pts.push(C64::new(a * scale, b * scale));
                }
            }
            pts
        }
    };
    ConstellationTable { scheme, points }
}

fn ask_levels(levels: &[f64]) -> Vec<C64> {
    let energy = levels.iter().map(|a| a * a).sum::<f64>() / levels.len() as f64;
    let scale = 1.0 / energy.sqrt();
    levels.iter().map(|&a| C64::new(a * scale, 0.0)).collect()
}

/// A finite i.i.d. draw from one scheme's alphabet.
#[derive(Debug, Clone)]
pub struct SymbolStream {
    pub scheme: ModulationScheme,
    pub samples: Vec<C64>,
}

impl SymbolStream {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Draws `n` symbols uniformly and independently from the scheme's alphabet.
/// Reproducible: the stream is a pure function of the rng state.
pub fn generate_symbols(
    scheme: ModulationScheme,
    n: usize,
    rng: &mut impl Rng,
) -> Result<SymbolStream> {
    if n == 0 {
        return Err(DmiError::InvalidArgument(
            "symbol stream length must be >= 1".into(),
        ));
    }
    let table = constellation(scheme);
    let m = table.points.len();
    let samples = (0..n)
        .map(|_| table.points[rng.random_range(0..m)])
        .collect();
    Ok(SymbolStream { scheme, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn scheme_order_is_stable() {
        let all = ModulationScheme::ALL;
        for w in all.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert_eq!(all[0], ModulationScheme::Bpsk);
        assert_eq!(all[5], ModulationScheme::Qam16);
    }

    #[test]
    fn constellations_are_zero_mean_unit_energy() {
        for scheme in ModulationScheme::ALL {
            let table = constellation(scheme);
            assert_eq!(table.points.len(), scheme.order(), "{scheme}");
            let mean: C64 = table.points.iter().sum::<C64>() / table.points.len() as f64;
            assert!(mean.norm() < 1e-15, "{scheme} mean {mean}");
            let energy: f64 =
                table.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / table.points.len() as f64;
            assert!((energy - 1.0).abs() < 1e-12, "{scheme} energy {energy}");
        }
    }

    #[test]
    fn bpsk_is_antipodal() {
        let t = constellation(ModulationScheme::Bpsk);
        assert_eq!(t.points, vec![C64::new(-1.0, 0.0), C64::new(1.0, 0.0)]);
    }

    #[test]
    fn ask4_matches_normalized_levels() {
        let t = constellation(ModulationScheme::Ask4);
        let s = 5f64.sqrt();
        for (p, want) in t.points.iter().zip([-3.0, -1.0, 1.0, 3.0]) {
            assert!((p.re - want / s).abs() < 1e-15);
            assert_eq!(p.im, 0.0);
        }
    }

    #[test]
    fn qam16_grid_scale() {
        let t = constellation(ModulationScheme::Qam16);
        let s = 10f64.sqrt();
        assert!(t.points.contains(&C64::new(3.0 / s, -3.0 / s)));
        assert!(t.points.contains(&C64::new(-1.0 / s, 1.0 / s)));
    }

    #[test]
    fn generate_rejects_empty_request() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(matches!(
            generate_symbols(ModulationScheme::Bpsk, 0, &mut rng),
            Err(DmiError::InvalidArgument(_))
        ));
    }

    #[test]
    fn generated_symbols_are_alphabet_members() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for scheme in ModulationScheme::ALL {
            let table = constellation(scheme);
            let stream = generate_symbols(scheme, 512, &mut rng).unwrap();
            for s in &stream.samples {
                assert!(table.points.contains(s), "{scheme}: {s} not in alphabet");
            }
        }
    }

    #[test]
    fn generation_is_deterministic_for_a_seed() {
        let a = generate_symbols(
            ModulationScheme::Qam16,
            1000,
            &mut ChaCha12Rng::seed_from_u64(42),
        )
        .unwrap();
        let b = generate_symbols(
            ModulationScheme::Qam16,
            1000,
            &mut ChaCha12Rng::seed_from_u64(42),
        )
        .unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn bpsk_fourth_moment_is_exactly_one() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let stream = generate_symbols(ModulationScheme::Bpsk, 4096, &mut rng).unwrap();
        let mu40: C64 = stream.samples.iter().map(|x| x.powu(4)).sum::<C64>() / stream.len() as f64;
        assert_eq!(mu40, C64::new(1.0, 0.0));
    }

    #[test]
    fn qpsk_sample_mean_vanishes_at_large_n() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let stream = generate_symbols(ModulationScheme::Qpsk, 1_000_000, &mut rng).unwrap();
        let mean: C64 = stream.samples.iter().sum::<C64>() / stream.len() as f64;
        assert!(mean.re.abs() < 0.005, "re {}", mean.re);
        assert!(mean.im.abs() < 0.005, "im {}", mean.im);
    }

    #[test]
    fn empirical_power_converges_to_one_for_all_schemes() {
        for (i, scheme) in ModulationScheme::ALL.into_iter().enumerate() {
            let mut rng = ChaCha12Rng::seed_from_u64(100 + i as u64);
            let stream = generate_symbols(scheme, 1_000_000, &mut rng).unwrap();
            let mu21: f64 =
                stream.samples.iter().map(|x| x.norm_sqr()).sum::<f64>() / stream.len() as f64;
            assert!((mu21 - 1.0).abs() < 0.01, "{scheme}: mu21 {mu21}");
        }
    }
}
