//! Constellations, the complex-to-real system conversion, random instance
//! generation and hard quantization.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// A real alphabet value. All supported alphabets consist of odd integers.
pub type Symbol = i8;

const QPSK: [Symbol; 2] = [-1, 1];
const QAM16: [Symbol; 4] = [-3, -1, 1, 3];
const QAM64: [Symbol; 8] = [-7, -5, -3, -1, 1, 3, 5, 7];

/// Square QAM family member, described by its per-dimension real alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constellation {
    Qpsk,
    Qam16,
    Qam64,
}

impl Constellation {
    pub const ALL: [Constellation; 3] = [
        Constellation::Qpsk,
        Constellation::Qam16,
        Constellation::Qam64,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Constellation::Qpsk => "QPSK",
            Constellation::Qam16 => "16QAM",
            Constellation::Qam64 => "64QAM",
        }
    }

    /// Strictly increasing real alphabet, symmetric about zero.
    pub fn alphabet(self) -> &'static [Symbol] {
        match self {
            Constellation::Qpsk => &QPSK,
            Constellation::Qam16 => &QAM16,
            Constellation::Qam64 => &QAM64,
        }
    }

    pub fn levels(self) -> usize {
        self.alphabet().len()
    }

    /// Spacing between adjacent alphabet points; every neighbor step has this magnitude.
    pub fn delta(self) -> Symbol {
        2
    }

    pub fn bits_per_dimension(self) -> usize {
        self.levels().trailing_zeros() as usize
    }

    /// Mean energy of one complex symbol, `σ_s²`, for the unnormalized alphabet.
    pub fn symbol_power(self) -> f64 {
        let a = self.alphabet();
        2.0 * a.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>() / a.len() as f64
    }

    pub fn index_of(self, value: Symbol) -> Option<usize> {
        let top = self.levels() as i32 - 1;
        let v = i32::from(value);
        if v.rem_euclid(2) != 1 || v.abs() > top {
            return None;
        }
        Some(((v + top) / 2) as usize)
    }

    pub fn contains(self, value: Symbol) -> bool {
        self.index_of(value).is_some()
    }

    /// Nearest alphabet point; exact midpoints go to the larger value.
    pub fn quantize_scalar(self, x: f64) -> Symbol {
        let top = self.levels() - 1;
        let idx = ((x + top as f64) / 2.0 + 0.5).floor();
        let idx = if idx.is_nan() {
            0.0
        } else {
            idx.clamp(0.0, top as f64)
        };
        self.alphabet()[idx as usize]
    }

    /// Gray label of an alphabet point.
    pub fn gray_label(self, value: Symbol) -> Option<u32> {
        self.index_of(value).map(|i| {
            let i = i as u32;
            i ^ (i >> 1)
        })
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Constellation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '_'], "")
            .as_str()
        {
            "qpsk" | "4qam" | "qam4" => Ok(Constellation::Qpsk),
            "16qam" | "qam16" => Ok(Constellation::Qam16),
            "64qam" | "qam64" => Ok(Constellation::Qam64),
            other => Err(Error::Config(format!("unknown modulation '{other}'"))),
        }
    }
}

/// Complex baseband model `ỹ = H̃s̃ + ṽ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSystem {
    pub nt: usize,
    pub nr: usize,
    /// Row-major `nr × nt` channel.
    pub h: Vec<Complex64>,
    pub y: Vec<Complex64>,
    /// Transmitted symbols (ground truth).
    pub s: Vec<Complex64>,
    pub noise_var: f64,
    pub symbol_power: f64,
    pub constellation: Constellation,
}

impl ComplexSystem {
    pub fn h_at(&self, row: usize, col: usize) -> Complex64 {
        self.h[row * self.nt + col]
    }

    fn check(&self) -> Result<()> {
        if self.nt == 0 || self.nr == 0 {
            return Err(Error::Dimension("system needs nt, nr >= 1".into()));
        }
        if self.h.len() != self.nt * self.nr {
            return Err(Error::Dimension(format!(
                "channel has {} entries, expected {}x{}",
                self.h.len(),
                self.nr,
                self.nt
            )));
        }
        if self.y.len() != self.nr {
            return Err(Error::Dimension(format!(
                "y has {} entries, expected {}",
                self.y.len(),
                self.nr
            )));
        }
        if self.s.len() != self.nt {
            return Err(Error::Dimension(format!(
                "s has {} entries, expected {}",
                self.s.len(),
                self.nt
            )));
        }
        Ok(())
    }

    /// `‖ỹ − H̃x̃‖²`.
    pub fn metric(&self, x: &[Complex64]) -> f64 {
        (0..self.nr)
            .map(|i| {
                let hx: Complex64 = (0..self.nt).map(|j| self.h_at(i, j) * x[j]).sum();
                (self.y[i] - hx).norm_sqr()
            })
            .sum()
    }
}

/// Real-valued equivalent `y = Hs + v` with `M = 2nt` unknowns and `N = 2nr` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSystem {
    pub nt: usize,
    pub nr: usize,
    pub h: Matrix,
    pub y: Vec<f64>,
    pub s: Vec<Symbol>,
    pub constellation: Constellation,
}

impl RealSystem {
    /// Number of real unknowns, `M`.
    pub fn m(&self) -> usize {
        self.h.cols()
    }

    /// Number of real observations, `N`.
    pub fn n(&self) -> usize {
        self.h.rows()
    }

    /// ML metric `‖y − Hx‖²`, uncounted.
    pub fn metric(&self, x: &[Symbol]) -> f64 {
        let mut r = self.y.clone();
        for (j, &xj) in x.iter().enumerate() {
            let xj = f64::from(xj);
            for (ri, hij) in r.iter_mut().zip(self.h.col(j)) {
                *ri -= hij * xj;
            }
        }
        r.iter().map(|v| v * v).sum()
    }

    pub fn bits_per_vector(&self) -> usize {
        self.m() * self.constellation.bits_per_dimension()
    }
}

/// Stacks a complex system into its real equivalent.
pub fn to_real(sys: &ComplexSystem) -> Result<RealSystem> {
    sys.check()?;
    let (nt, nr) = (sys.nt, sys.nr);
    let mut h = Matrix::zeros(2 * nr, 2 * nt);
    for i in 0..nr {
        for j in 0..nt {
            let c = sys.h_at(i, j);
            h[(i, j)] = c.re;
            h[(i, j + nt)] = -c.im;
            h[(i + nr, j)] = c.im;
            h[(i + nr, j + nt)] = c.re;
        }
    }
    let y = sys
        .y
        .iter()
        .map(|c| c.re)
        .chain(sys.y.iter().map(|c| c.im))
        .collect();
    let mut s = Vec::with_capacity(2 * nt);
    for part in [0, 1] {
        for c in &sys.s {
            let v = if part == 0 { c.re } else { c.im };
            s.push(to_symbol(v, sys.constellation)?);
        }
    }
    Ok(RealSystem {
        nt,
        nr,
        h,
        y,
        s,
        constellation: sys.constellation,
    })
}

fn to_symbol(v: f64, constellation: Constellation) -> Result<Symbol> {
    let q = constellation.quantize_scalar(v);
    if f64::from(q) == v {
        Ok(q)
    } else {
        Err(Error::NotInAlphabet {
            value: v,
            constellation: constellation.name(),
        })
    }
}

/// Per-trial random stream: ChaCha8 keyed by the master seed, one stream per trial.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Draws a Rayleigh-fading instance at the given SNR (`σ_s²/σ_v²` in dB).
///
/// `snr_db = +∞` yields a noiseless instance. The stream is consumed in a
/// fixed order (channel row-major, then symbols, then noise) with the same
/// number of draws at every SNR, so instances at different SNRs share the
/// channel and symbols.
pub fn draw_instance<R: Rng + ?Sized>(
    nt: usize,
    nr: usize,
    constellation: Constellation,
    snr_db: f64,
    rng: &mut R,
) -> Result<ComplexSystem> {
    if nt == 0 || nr == 0 {
        return Err(Error::Dimension("nt and nr must be at least 1".into()));
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::OutOfRange(format!(
            "snr_db must be finite or +inf, got {snr_db}"
        )));
    }
    let symbol_power = constellation.symbol_power();
    let noise_var = if snr_db == f64::INFINITY {
        0.0
    } else {
        symbol_power / 10f64.powf(snr_db / 10.0)
    };

    let half = std::f64::consts::FRAC_1_SQRT_2;
    let gauss = |rng: &mut R, scale: f64| -> Complex64 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    };

    let h: Vec<Complex64> = (0..nt * nr).map(|_| gauss(rng, half)).collect();
    let alphabet = constellation.alphabet();
    let s: Vec<Complex64> = (0..nt)
        .map(|_| {
            let re = alphabet[rng.random_range(0..alphabet.len())];
            let im = alphabet[rng.random_range(0..alphabet.len())];
            Complex64::new(f64::from(re), f64::from(im))
        })
        .collect();
    let noise_scale = (noise_var / 2.0).sqrt();
    let y = (0..nr)
        .map(|i| {
            let hs: Complex64 = (0..nt).map(|j| h[i * nt + j] * s[j]).sum();
            let v = gauss(rng, noise_scale);
            if noise_var == 0.0 {
                hs
            } else {
                hs + v
            }
        })
        .collect();
    Ok(ComplexSystem {
        nt,
        nr,
        h,
        y,
        s,
        noise_var,
        symbol_power,
        constellation,
    })
}

/// Elementwise nearest-point quantization.
pub fn quantize(v: &[f64], constellation: Constellation) -> Vec<Symbol> {
    v.iter()
        .map(|&x| constellation.quantize_scalar(x))
        .collect()
}

/// Hamming distance between the Gray labels of two symbol vectors.
pub fn bit_errors(s_hat: &[Symbol], s: &[Symbol], constellation: Constellation) -> Result<u64> {
    if s_hat.len() != s.len() {
        return Err(Error::Dimension(format!(
            "vectors of length {} and {}",
            s_hat.len(),
            s.len()
        )));
    }
    let label = |v: Symbol| {
        constellation.gray_label(v).ok_or(Error::NotInAlphabet {
            value: f64::from(v),
            constellation: constellation.name(),
        })
    };
    s_hat.iter().zip(s).try_fold(0u64, |acc, (&a, &b)| {
        Ok(acc + u64::from((label(a)? ^ label(b)?).count_ones()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_by_one() -> ComplexSystem {
        ComplexSystem {
            nt: 1,
            nr: 1,
            h: vec![Complex64::new(1.0, 2.0)],
            y: vec![Complex64::new(3.0, -1.0)],
            s: vec![Complex64::new(1.0, -1.0)],
            noise_var: 0.1,
            symbol_power: 2.0,
            constellation: Constellation::Qpsk,
        }
    }

    #[test]
    fn alphabets() {
        assert_eq!(Constellation::Qpsk.alphabet(), &[-1, 1]);
        assert_eq!(Constellation::Qam16.alphabet(), &[-3, -1, 1, 3]);
        assert_eq!(
            Constellation::Qam64.alphabet(),
            &[-7, -5, -3, -1, 1, 3, 5, 7]
        );
        for c in Constellation::ALL {
            let a = c.alphabet();
            assert!(a.windows(2).all(|w| w[1] - w[0] == c.delta()));
            assert!(a.iter().zip(a.iter().rev()).all(|(x, y)| *x == -*y));
        }
        assert_eq!(Constellation::Qpsk.symbol_power(), 2.0);
        assert_eq!(Constellation::Qam16.symbol_power(), 10.0);
        assert_eq!(Constellation::Qam64.symbol_power(), 42.0);
        assert_eq!(
            "16-QAM".parse::<Constellation>().unwrap(),
            Constellation::Qam16
        );
        assert!("8psk".parse::<Constellation>().is_err());
    }

    #[test]
    fn real_conversion_block_structure() {
        let r = to_real(&one_by_one()).unwrap();
        assert_eq!(r.h[(0, 0)], 1.0);
        assert_eq!(r.h[(0, 1)], -2.0);
        assert_eq!(r.h[(1, 0)], 2.0);
        assert_eq!(r.h[(1, 1)], 1.0);
        assert_eq!(r.y, vec![3.0, -1.0]);
        assert_eq!(r.s, vec![1, -1]);
    }

    #[test]
    fn real_conversion_rejects_bad_shapes() {
        let mut sys = one_by_one();
        sys.y.push(Complex64::new(0.0, 0.0));
        assert!(matches!(to_real(&sys), Err(Error::Dimension(_))));
        let mut sys = one_by_one();
        sys.s[0] = Complex64::new(0.5, 1.0);
        assert!(matches!(to_real(&sys), Err(Error::NotInAlphabet { .. })));
    }

    #[test]
    fn paired_columns_have_equal_norms() {
        let mut rng = trial_rng(7, 0);
        let sys = draw_instance(2, 2, Constellation::Qpsk, 10.0, &mut rng).unwrap();
        let r = to_real(&sys).unwrap();
        let norm = |j: usize| r.h.col(j).iter().map(|v| v * v).sum::<f64>();
        assert!((norm(0) - norm(2)).abs() <= 1e-12 * norm(0));
        assert!((norm(1) - norm(3)).abs() <= 1e-12 * norm(1));
    }

    #[test]
    fn seeded_draws_are_reproducible() {
        let a = draw_instance(3, 4, Constellation::Qam16, 12.0, &mut trial_rng(99, 5)).unwrap();
        let b = draw_instance(3, 4, Constellation::Qam16, 12.0, &mut trial_rng(99, 5)).unwrap();
        assert_eq!(a, b);
        let c = draw_instance(3, 4, Constellation::Qam16, 12.0, &mut trial_rng(99, 6)).unwrap();
        assert_ne!(a.h, c.h);
    }

    #[test]
    fn noiseless_draw_is_exact() {
        let sys = draw_instance(
            3,
            3,
            Constellation::Qam64,
            f64::INFINITY,
            &mut trial_rng(1, 1),
        )
        .unwrap();
        assert_eq!(sys.noise_var, 0.0);
        assert_eq!(sys.metric(&sys.s), 0.0);
        assert!(draw_instance(3, 3, Constellation::Qam64, f64::NAN, &mut trial_rng(1, 1)).is_err());
    }

    #[test]
    fn snr_sets_noise_variance() {
        let sys = draw_instance(2, 2, Constellation::Qam16, 20.0, &mut trial_rng(3, 0)).unwrap();
        assert!((sys.noise_var - 0.1).abs() < 1e-12);
    }

    #[test]
    fn channel_entries_have_half_variance_per_dimension() {
        let mut rng = trial_rng(2024, 0);
        let mut samples = Vec::with_capacity(100_000);
        while samples.len() < 100_000 {
            let sys = draw_instance(10, 10, Constellation::Qpsk, 10.0, &mut rng).unwrap();
            samples.extend(sys.h.iter().map(|c| c.re));
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var =
            samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
        assert!((0.48..=0.52).contains(&var), "variance {var}");
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(&[0.3, -0.2], Constellation::Qpsk), vec![1, -1]);
        assert_eq!(quantize(&[-2.2, 3.9], Constellation::Qam16), vec![-3, 3]);
        assert_eq!(quantize(&[0.0], Constellation::Qpsk), vec![1]);
        assert_eq!(
            quantize(&[-2.0, 2.0, 4.0, -100.0], Constellation::Qam16),
            vec![-1, 3, 3, -3]
        );
        assert_eq!(quantize(&[6.0, -6.0], Constellation::Qam64), vec![7, -5]);
    }

    #[test]
    fn bit_error_examples() {
        let c = Constellation::Qpsk;
        assert_eq!(bit_errors(&[1, -1, 1], &[1, -1, 1], c).unwrap(), 0);
        assert_eq!(bit_errors(&[1, 1, 1], &[1, -1, 1], c).unwrap(), 1);
        // Gray map 00, 01, 11, 10 over [-3, -1, 1, 3].
        let q = Constellation::Qam16;
        assert_eq!(bit_errors(&[-3], &[-1], q).unwrap(), 1);
        assert_eq!(bit_errors(&[-3], &[1], q).unwrap(), 2);
        assert_eq!(bit_errors(&[-3], &[3], q).unwrap(), 1);
        assert!(matches!(
            bit_errors(&[0], &[1], c),
            Err(Error::NotInAlphabet { .. })
        ));
        assert!(bit_errors(&[1], &[1, 1], c).is_err());
    }

    fn arb_constellation() -> impl Strategy<Value = Constellation> {
        prop_oneof![
            Just(Constellation::Qpsk),
            Just(Constellation::Qam16),
            Just(Constellation::Qam64)
        ]
    }

    proptest! {
        #[test]
        fn quantize_is_idempotent(c in arb_constellation(), v in prop::collection::vec(-10.0f64..10.0, 1..16)) {
            let q = quantize(&v, c);
            prop_assert!(q.iter().all(|&x| c.contains(x)));
            let again = quantize(&q.iter().map(|&x| f64::from(x)).collect::<Vec<_>>(), c);
            prop_assert_eq!(q, again);
        }

        #[test]
        fn quantize_picks_a_nearest_point(c in arb_constellation(), x in -10.0f64..10.0) {
            let q = f64::from(c.quantize_scalar(x));
            let best = c.alphabet().iter().map(|&a| (f64::from(a) - x).abs()).fold(f64::INFINITY, f64::min);
            prop_assert!(((q - x).abs() - best).abs() < 1e-12);
        }

        #[test]
        fn real_model_preserves_metric(seed in any::<u64>(), nt in 1usize..5, nr in 1usize..5, c in arb_constellation()) {
            let sys = draw_instance(nt, nr, c, 8.0, &mut trial_rng(seed, 0)).unwrap();
            let real = to_real(&sys).unwrap();
            let a = sys.metric(&sys.s);
            let b = real.metric(&real.s);
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-300) + 1e-12);
            // Any other alphabet vector too.
            let x: Vec<Complex64> = sys.s.iter().map(|v| Complex64::new(v.im, -v.re)).collect();
            let xr: Vec<Symbol> = x.iter().map(|v| v.re as Symbol).chain(x.iter().map(|v| v.im as Symbol)).collect();
            let (a, b) = (sys.metric(&x), real.metric(&xr));
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-300) + 1e-12);
        }
    }
}
