//! FID synthesis, discrete spectra and peak picking.

pub mod experiments;

use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpinError};
use crate::state::PhysicalConstants;
use crate::suscept::{chi_ensemble, chi_noise_closed_form, chi_rf_closed_form, EnsembleSpec};
use crate::tolerance::PEAK_THRESHOLD;

/// Largest length transformed by the direct O(n²) DFT.
pub const DIRECT_DFT_MAX: usize = 4096;

/// Uniformly sampled susceptibility record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fid {
    pub dt: f64,
    pub t0: f64,
    pub samples: Vec<Complex64>,
}

impl Fid {
    pub fn new(dt: f64, t0: f64, samples: Vec<Complex64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(SpinError::InvalidArgument(format!("sample interval must be positive, got {dt}")));
        }
        if samples.len() < 8 {
            return Err(SpinError::InvalidArgument(format!(
                "an FID needs at least 8 samples, got {}",
                samples.len()
            )));
        }
        if !samples.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(SpinError::NonFinite { context: "FID samples" });
        }
        Ok(Self { dt, t0, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }
}

/// What the FID samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChiSource {
    Rf { n: f64, polarization: f64, omega_x: f64, omega0: f64 },
    Noise { n: f64, polarization: f64, k_rest: f64, omega0: f64 },
    Ensemble { spec: EnsembleSpec },
}

impl ChiSource {
    pub fn eval(&self, t: f64, consts: &PhysicalConstants) -> Result<Complex64> {
        match *self {
            ChiSource::Rf { n, polarization, omega_x, omega0 } => {
                chi_rf_closed_form(n, polarization, omega_x, omega0, t, consts)
            }
            ChiSource::Noise { n, polarization, k_rest, omega0 } => {
                chi_noise_closed_form(n, polarization, k_rest, omega0, t, consts)
            }
            ChiSource::Ensemble { ref spec } => Ok(chi_ensemble(spec, t, consts)?.n_squared),
        }
    }

    /// Highest angular frequency in the signal, when it is known in closed form.
    pub fn max_frequency(&self) -> Option<f64> {
        match *self {
            ChiSource::Rf { omega0, .. } | ChiSource::Noise { omega0, .. } => Some(2.0 * omega0.abs()),
            ChiSource::Ensemble { .. } => None,
        }
    }
}

/// Samples `source` at t_k = k·duration/n_samples, k = 0..n_samples.
pub fn synthesize_fid(
    source: &ChiSource,
    duration: f64,
    n_samples: usize,
    consts: &PhysicalConstants,
) -> Result<Fid> {
    if n_samples < 8 {
        return Err(SpinError::InvalidArgument(format!("an FID needs at least 8 samples, got {n_samples}")));
    }
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(SpinError::InvalidArgument(format!("duration must be positive, got {duration}")));
    }
    let dt = duration / n_samples as f64;
    let rate = 1.0 / dt;
    if let Some(w) = source.max_frequency() {
        let required = 2.0 * w / TAU;
        if rate <= required {
            return Err(SpinError::NyquistViolation { rate, required });
        }
    }
    let samples = (0..n_samples)
        .map(|k| source.eval(k as f64 * dt, consts))
        .collect::<Result<Vec<_>>>()?;
    Fid::new(dt, 0.0, samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// Bin j sits at +j·df (wrapped to negative above N/2); e^{−iωt} appears at −ω/2π.
    FullComplex,
    /// Frequencies negated so that e^{−iωt} appears at +ω/2π.
    NegativeFrequencyFolded,
}

/// DFT bins normalized by 1/N, analysis kernel e^{−i2πft}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub df: f64,
    pub bins: Vec<Complex64>,
    pub convention: Convention,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Signed frequency of bin j under the spectrum's convention.
    pub fn frequency(&self, j: usize) -> f64 {
        let n = self.bins.len() as i64;
        let j = j as i64;
        let signed = if j < (n + 1) / 2 { j } else { j - n } as f64 * self.df;
        match self.convention {
            Convention::FullComplex => signed,
            // `0.0 - x` keeps the DC bin at +0.0
            Convention::NegativeFrequencyFolded => 0.0 - signed,
        }
    }

    /// Index of the bin closest to `f` (Hz) under the convention.
    pub fn bin_of(&self, f: f64) -> usize {
        let n = self.bins.len() as f64;
        let raw = match self.convention {
            Convention::FullComplex => f,
            Convention::NegativeFrequencyFolded => -f,
        } / self.df;
        (raw.round().rem_euclid(n)) as usize
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.bins.iter().map(|z| z.norm()).collect()
    }

    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Unnormalized DFT Σ x_k e^{−i2πjk/N} by direct summation.
pub fn dft_direct(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let twiddle: Vec<Complex64> = (0..n)
        .map(|m| Complex64::from_polar(1.0, -TAU * m as f64 / n as f64))
        .collect();
    (0..n)
        .map(|j| {
            x.iter()
                .enumerate()
                .map(|(k, v)| v * twiddle[(j * k) % n])
                .sum()
        })
        .collect()
}

/// Unnormalized forward FFT with the same kernel as [`dft_direct`].
pub fn dft_fft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

pub fn spectrum_of(fid: &Fid) -> Spectrum {
    spectrum_with(fid, Convention::FullComplex)
}

pub fn spectrum_with(fid: &Fid, convention: Convention) -> Spectrum {
    let n = fid.len();
    let raw = if n <= DIRECT_DFT_MAX {
        dft_direct(&fid.samples)
    } else {
        dft_fft(&fid.samples)
    };
    let scale = 1.0 / n as f64;
    Spectrum {
        df: 1.0 / (n as f64 * fid.dt),
        bins: raw.into_iter().map(|z| z * scale).collect(),
        convention,
    }
}

/// Relative Parseval mismatch |Σ|x|²/N − Σ|X|²| / (Σ|x|²/N).
pub fn parseval_error(fid: &Fid, spec: &Spectrum) -> f64 {
    let time: f64 = fid.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / fid.len() as f64;
    let freq = spec.energy();
    if time == 0.0 {
        freq
    } else {
        (time - freq).abs() / time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub frequency_hz: f64,
    pub bin: usize,
    pub amplitude: Complex64,
}

/// Cyclic local maxima of |bin| above `PEAK_THRESHOLD` of the global maximum,
/// sorted by magnitude descending.
pub fn find_peaks(spec: &Spectrum) -> Vec<Peak> {
    let mags = spec.magnitudes();
    let n = mags.len();
    let max = mags.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 || n == 0 {
        return Vec::new();
    }
    let mut peaks: Vec<Peak> = (0..n)
        .filter(|&j| {
            let (prev, next) = (mags[(j + n - 1) % n], mags[(j + 1) % n]);
            mags[j] >= PEAK_THRESHOLD * max && mags[j] > prev && mags[j] >= next
        })
        .map(|j| Peak {
            frequency_hz: spec.frequency(j),
            bin: j,
            amplitude: spec.bins[j],
        })
        .collect();
    peaks.sort_by(|a, b| {
        b.amplitude
            .norm()
            .partial_cmp(&a.amplitude.norm())
            .expect("finite")
            .then(a.bin.cmp(&b.bin))
    });
    peaks
}

/// Smallest power of two ≥ n.
pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::c;
    use crate::state::PhysicalConstants;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tone(omega: f64, n: usize, dt: f64) -> Fid {
        Fid::new(dt, 0.0, (0..n).map(|k| Complex64::from_polar(1.0, -omega * k as f64 * dt)).collect()).unwrap()
    }

    fn random_fid(seed: u64, n: usize) -> Fid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Fid::new(1e-3, 0.0, (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
            .unwrap()
    }

    #[test]
    fn tone_lands_on_negative_frequency() {
        let (n, dt) = (64, 1e-3);
        let f0 = 5.0 / (n as f64 * dt);
        let s = spectrum_of(&tone(TAU * f0, n, dt));
        let j = s.bin_of(-f0);
        assert_eq!(j, n - 5);
        assert!((s.bins[j] - c(1.0, 0.0)).norm() < 1e-12);
        for (k, z) in s.bins.iter().enumerate() {
            if k != j {
                assert!(z.norm() < 1e-12);
            }
        }
        let folded = spectrum_with(&tone(TAU * f0, n, dt), Convention::NegativeFrequencyFolded);
        let p = find_peaks(&folded);
        assert_eq!(p.len(), 1);
        assert!((p[0].frequency_hz - f0).abs() < 1e-9);
    }

    #[test]
    fn two_line_rf_spectrum() {
        let consts = PhysicalConstants::unit();
        let w0 = TAU * 1e5;
        let src = ChiSource::Rf { n: 10.0, polarization: 0.1, omega_x: TAU * 1e3, omega0: w0 };
        let fid = synthesize_fid(&src, 16.0 / 1e5, 256, &consts).unwrap();
        let spec = spectrum_with(&fid, Convention::NegativeFrequencyFolded);
        let peaks = find_peaks(&spec);
        assert_eq!(peaks.len(), 2);
        let ratio = peaks[0].amplitude / peaks[1].amplitude;
        assert!((ratio + c(1.0, 0.0)).norm() < 1e-9);
        let mut fs: Vec<f64> = peaks.iter().map(|p| p.frequency_hz).collect();
        fs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((fs[0] - 1e5).abs() < 1e-6 && (fs[1] - 2e5).abs() < 1e-6);
    }

    #[test]
    fn zero_polarization_gives_zero_fid() {
        let src = ChiSource::Rf { n: 10.0, polarization: 0.0, omega_x: 1e3, omega0: 1e5 };
        let fid = synthesize_fid(&src, 1e-3, 64, &PhysicalConstants::unit()).unwrap();
        assert!(fid.samples.iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn nyquist_is_enforced() {
        let src = ChiSource::Rf { n: 1.0, polarization: 1.0, omega_x: 1.0, omega0: TAU * 1e3 };
        let r = synthesize_fid(&src, 1.0, 1000, &PhysicalConstants::unit());
        assert!(matches!(r, Err(SpinError::NyquistViolation { .. })));
    }

    #[test]
    fn parseval_and_linearity() {
        let (x, y) = (random_fid(1, 200), random_fid(2, 200));
        assert!(parseval_error(&x, &spectrum_of(&x)) < 1e-9);
        let (a, b) = (c(0.3, -1.2), c(2.0, 0.5));
        let mixed = Fid::new(
            1e-3,
            0.0,
            x.samples.iter().zip(&y.samples).map(|(u, v)| a * u + b * v).collect(),
        )
        .unwrap();
        let (sx, sy, sm) = (spectrum_of(&x), spectrum_of(&y), spectrum_of(&mixed));
        for j in 0..200 {
            assert!((sm.bins[j] - (a * sx.bins[j] + b * sy.bins[j])).norm() < 1e-10);
        }
    }

    #[test]
    fn direct_and_fast_transforms_agree() {
        for n in [8, 100, 1024, 4096] {
            let x = random_fid(n as u64, n);
            let (d, f) = (dft_direct(&x.samples), dft_fft(&x.samples));
            let scale = d.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let err = d.iter().zip(&f).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err <= 1e-9 * scale, "n={n} err={err:e}");
        }
    }

    #[test]
    fn non_integer_tone_peak_within_one_bin() {
        let (n, dt) = (128, 1e-3);
        let df = 1.0 / (n as f64 * dt);
        let f0 = 10.4 * df;
        let s = spectrum_with(&tone(TAU * f0, n, dt), Convention::NegativeFrequencyFolded);
        let p = find_peaks(&s);
        assert!((p[0].frequency_hz - f0).abs() <= df);
    }
}
