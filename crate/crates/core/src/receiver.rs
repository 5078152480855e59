//! Signal-level receiver: synthetic bi-phase UWB pulse trains, bandpass filtering,
//! template cross-correlation with band-limited peak interpolation, TDOA from peak
//! positions, and RSS as the mean squared correlation over a window after the peak.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples the pulse extends on each side of its centre, in units of its Gaussian width.
const PULSE_HALF_SPAN: f64 = 6.0;

/// Raw samples taken around the coarse peak for band-limited interpolation.
const INTERP_SEGMENT: usize = 256;

/// Half-width (raw samples) of the region searched on the interpolated grid.
const INTERP_SEARCH: usize = 16;

/// Interpolation factor and extra raw samples on each side for the RSS integral.
const RSS_UPSAMPLE: usize = 8;
const RSS_MARGIN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    /// Time of the first sample, s.
    pub t0: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: f64, t0: f64) -> Result<Self> {
        if !(sample_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter("waveform has non-finite samples".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
            t0,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn period(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn time_at(&self, i: f64) -> f64 {
        self.t0 + i / self.sample_rate
    }

    /// Last sample time.
    pub fn t_end(&self) -> f64 {
        self.time_at(self.samples.len().saturating_sub(1) as f64)
    }

    pub fn scaled(&self, k: f64) -> Waveform {
        Waveform {
            samples: self.samples.iter().map(|s| s * k).collect(),
            sample_rate: self.sample_rate,
            t0: self.t0,
        }
    }
}

/// Transmit signal description: a bi-phase coded train of band-limited pulses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    /// ±1 chip signs.
    pub chips: Vec<i8>,
    /// Pulse repetition frequency, Hz.
    pub prf: f64,
    /// Occupied band `(f_low, f_high)` at the -10 dB points, Hz.
    pub band: (f64, f64),
    /// Extra record length after the train, s; bounds the delays a record can hold.
    #[serde(default = "default_guard")]
    pub record_guard: f64,
}

fn default_guard() -> f64 {
    200e-9
}

pub const CHIP_COUNT: usize = 128;

impl SignalSpec {
    /// 128-chip code drawn from a seeded generator, 3 MHz PRF, 2.3-3.9 GHz band.
    pub fn with_seeded_code(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chips = (0..CHIP_COUNT)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        Self {
            chips,
            prf: 3e6,
            band: (2.3e9, 3.9e9),
            record_guard: default_guard(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chips.len() != CHIP_COUNT || self.chips.iter().any(|c| *c != 1 && *c != -1) {
            return Err(Error::InvalidParameter(format!(
                "chip code must hold {CHIP_COUNT} values of ±1"
            )));
        }
        if !(self.prf > 0.0) || !(self.band.0 > 0.0 && self.band.0 < self.band.1) {
            return Err(Error::InvalidParameter(
                "need prf > 0 and 0 < f_low < f_high".into(),
            ));
        }
        if !(self.record_guard >= 0.0) {
            return Err(Error::InvalidParameter("record guard must be >= 0".into()));
        }
        Ok(())
    }

    pub fn center_frequency(&self) -> f64 {
        0.5 * (self.band.0 + self.band.1)
    }

    /// Gaussian envelope width whose power spectrum is 10 dB down at the band edges.
    pub fn pulse_sigma(&self) -> f64 {
        std::f64::consts::LN_10.sqrt() / (PI * (self.band.1 - self.band.0))
    }

    /// Offset of the first pulse centre from the start of the transmission.
    pub fn group_delay(&self) -> f64 {
        PULSE_HALF_SPAN * self.pulse_sigma()
    }

    pub fn chip_period(&self) -> f64 {
        1.0 / self.prf
    }

    /// Duration of the ideal transmit signal, pulse tails included.
    pub fn train_duration(&self) -> f64 {
        (self.chips.len() - 1) as f64 * self.chip_period() + 2.0 * self.group_delay()
    }
}

fn synthesize(
    spec: &SignalSpec,
    delay: f64,
    amplitude: f64,
    sample_rate: f64,
    n: usize,
) -> Vec<f64> {
    let sigma = spec.pulse_sigma();
    let fc = spec.center_frequency();
    let span = PULSE_HALF_SPAN * sigma;
    let mut out = vec![0.0; n];
    for (m, &chip) in spec.chips.iter().enumerate() {
        let tc = delay + spec.group_delay() + m as f64 * spec.chip_period();
        let lo = ((tc - span) * sample_rate).ceil().max(0.0) as usize;
        let hi = (((tc + span) * sample_rate).floor().max(-1.0) + 1.0) as usize;
        for (i, s) in out.iter_mut().enumerate().take(hi.min(n)).skip(lo) {
            let dt = i as f64 / sample_rate - tc;
            *s += f64::from(chip)
                * amplitude
                * (-dt * dt / (2.0 * sigma * sigma)).exp()
                * (2.0 * PI * fc * dt).cos();
        }
    }
    out
}

fn check_sample_rate(spec: &SignalSpec, sample_rate: f64) -> Result<()> {
    if !(sample_rate >= 2.0 * spec.band.1) {
        return Err(Error::AliasingSampleRate {
            sample_rate,
            f_high: spec.band.1,
        });
    }
    Ok(())
}

/// Received record starting at `t = 0`: the train delayed by `delay`, scaled by
/// `attenuation_db` (amplitude dB, -6 roughly halves it), plus white Gaussian noise.
pub fn generate_signal<R: Rng + ?Sized>(
    spec: &SignalSpec,
    delay: f64,
    attenuation_db: f64,
    sample_rate: f64,
    noise_std: f64,
    rng: &mut R,
) -> Result<Waveform> {
    spec.validate()?;
    check_sample_rate(spec, sample_rate)?;
    if !(delay >= 0.0) || !(noise_std >= 0.0) {
        return Err(Error::InvalidParameter(
            "delay and noise std must be non-negative".into(),
        ));
    }
    let n = ((spec.train_duration() + spec.record_guard) * sample_rate).ceil() as usize + 1;
    let amplitude = 10f64.powf(attenuation_db / 20.0);
    let mut samples = synthesize(spec, delay, amplitude, sample_rate, n);
    if noise_std > 0.0 {
        for s in &mut samples {
            *s += noise_std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Waveform::new(samples, sample_rate, 0.0)
}

/// Ideal, undelayed transmit signal used as the correlation template.
pub fn template(spec: &SignalSpec, sample_rate: f64) -> Result<Waveform> {
    spec.validate()?;
    check_sample_rate(spec, sample_rate)?;
    let n = (spec.train_duration() * sample_rate).ceil() as usize + 1;
    Waveform::new(synthesize(spec, 0.0, 1.0, sample_rate, n), sample_rate, 0.0)
}

#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn design(f0: f64, fs: f64, highpass: bool) -> Self {
        let w0 = 2.0 * PI * f0 / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / std::f64::consts::SQRT_2;
        let a0 = 1.0 + alpha;
        let b = if highpass {
            [(1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0]
        } else {
            [(1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0]
        };
        Self {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &mut [f64]) {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * y + z2;
            z2 = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

/// Zero-phase 4th-order bandpass: 2nd-order Butterworth high- and low-pass sections run
/// forward and backward, so pulse symmetry (and the correlation peak) is preserved.
pub fn bandpass(x: &Waveform, band: (f64, f64)) -> Waveform {
    let sections = [
        Biquad::design(band.0, x.sample_rate, true),
        Biquad::design(band.1, x.sample_rate, false),
    ];
    let mut y = x.samples.clone();
    for s in &sections {
        s.run(&mut y);
    }
    y.reverse();
    for s in &sections {
        s.run(&mut y);
    }
    y.reverse();
    Waveform {
        samples: y,
        sample_rate: x.sample_rate,
        t0: x.t0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverConfig {
    pub band: (f64, f64),
    #[serde(default = "default_upsample")]
    pub upsample_factor: usize,
    /// Integration length for RSS, s.
    #[serde(default = "default_window")]
    pub window: f64,
}

fn default_upsample() -> usize {
    8
}

fn default_window() -> f64 {
    70e-9
}

impl ReceiverConfig {
    pub fn for_spec(spec: &SignalSpec) -> Self {
        Self {
            band: spec.band,
            upsample_factor: default_upsample(),
            window: default_window(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    /// Full cross-correlation at the input rate; `c.t0` is the lag of the first sample.
    pub c: Waveform,
    /// Lag of the interpolated correlation peak, s.
    pub peak_time: f64,
}

/// Cross-correlator holding the template spectrum for reuse across records.
pub struct Correlator {
    template: Waveform,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    fft_len: usize,
    record_len: usize,
    config: ReceiverConfig,
}

impl Correlator {
    /// Prepares correlation of records of `record_len` samples against `template`.
    pub fn new(template: &Waveform, record_len: usize, config: ReceiverConfig) -> Result<Self> {
        if config.upsample_factor < 1 {
            return Err(Error::InvalidParameter("upsample factor must be >= 1".into()));
        }
        if template.len() > record_len {
            return Err(Error::TemplateTooLong {
                template: template.len(),
                signal: record_len,
            });
        }
        let fft_len = (record_len + template.len() - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut spectrum: Vec<Complex64> = template
            .samples
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(fft_len)
            .collect();
        forward.process(&mut spectrum);
        spectrum.iter_mut().for_each(|z| *z = z.conj());
        Ok(Self {
            template: template.clone(),
            spectrum,
            forward,
            inverse,
            fft_len,
            record_len,
            config,
        })
    }

    /// Bandpass, correlate, interpolate around the strongest lag.
    pub fn correlate(&self, r: &Waveform) -> Result<CorrelationResult> {
        if r.len() != self.record_len {
            return Err(Error::LengthMismatch {
                left: r.len(),
                right: self.record_len,
            });
        }
        if (r.sample_rate - self.template.sample_rate).abs() > 1e-9 * r.sample_rate {
            return Err(Error::InvalidParameter(
                "record and template sample rates differ".into(),
            ));
        }
        let filtered = bandpass(r, self.config.band);
        let mut buf: Vec<Complex64> = filtered
            .samples
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(self.fft_len)
            .collect();
        self.forward.process(&mut buf);
        for (z, s) in buf.iter_mut().zip(&self.spectrum) {
            *z *= s;
        }
        self.inverse.process(&mut buf);

        // lags -(Ls-1) ..= Lr-1; negative lags wrap to the end of the circular result
        let ls = self.template.len();
        let lr = r.len();
        let scale = 1.0 / self.fft_len as f64;
        let samples: Vec<f64> = (0..lr + ls - 1)
            .map(|idx| {
                let lag = idx as isize - (ls as isize - 1);
                buf[lag.rem_euclid(self.fft_len as isize) as usize].re * scale
            })
            .collect();
        let c = Waveform {
            samples,
            sample_rate: r.sample_rate,
            t0: (r.t0 - self.template.t0) - (ls - 1) as f64 / r.sample_rate,
        };
        let peak_time = interpolated_peak(&c, self.config.upsample_factor);
        Ok(CorrelationResult { c, peak_time })
    }
}

/// Index of the largest magnitude; ties go to the earliest sample.
fn argmax_abs(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if v.abs() > x[best].abs() {
            best = i;
        }
    }
    best
}

/// Band-limited interpolation by zero-padding the DFT of `x` (even length).
fn upsample(x: &[f64], factor: usize) -> Vec<f64> {
    let n = x.len();
    let up_len = n * factor;
    let mut planner = FftPlanner::<f64>::new();
    let mut spec: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut spec);
    let mut padded = vec![Complex64::new(0.0, 0.0); up_len];
    let half = n / 2;
    padded[..half].copy_from_slice(&spec[..half]);
    padded[up_len - half + 1..].copy_from_slice(&spec[half + 1..]);
    // split the Nyquist bin so the interpolant stays real
    padded[half] = spec[half] * 0.5;
    padded[up_len - half] = spec[half] * 0.5;
    planner.plan_fft_inverse(up_len).process(&mut padded);
    padded.iter().map(|z| z.re / n as f64).collect()
}

/// Zero-padded-DFT upsampling of a segment around the coarse peak, then a three-point
/// parabolic fit on the upsampled magnitude.
fn interpolated_peak(c: &Waveform, factor: usize) -> f64 {
    let coarse = argmax_abs(&c.samples);
    if factor == 1 || c.len() < 8 {
        return c.time_at(coarse as f64);
    }
    let seg_len = INTERP_SEGMENT.min(c.len() & !1);
    let start = coarse
        .saturating_sub(seg_len / 2)
        .min(c.len() - seg_len);
    let up_len = seg_len * factor;

    let up = upsample(&c.samples[start..start + seg_len], factor);

    let rel = coarse - start;
    let lo = rel.saturating_sub(INTERP_SEARCH) * factor;
    let hi = ((rel + INTERP_SEARCH) * factor).min(up_len - 1);
    let mut best = lo;
    for i in lo..=hi {
        if up[i].abs() > up[best].abs() {
            best = i;
        }
    }
    let mut offset = best as f64;
    if best > 0 && best + 1 < up_len {
        let (a, b, d) = (up[best - 1].abs(), up[best].abs(), up[best + 1].abs());
        let denom = a - 2.0 * b + d;
        if denom < 0.0 {
            offset += (0.5 * (a - d) / denom).clamp(-0.5, 0.5);
        }
    }
    c.time_at(start as f64 + offset / factor as f64)
}

/// One-shot form of [`Correlator::correlate`].
pub fn correlate_and_detect(
    r: &Waveform,
    template: &Waveform,
    config: ReceiverConfig,
) -> Result<CorrelationResult> {
    Correlator::new(template, r.len(), config)?.correlate(r)
}

/// `t_a - t_b` from two correlation peaks.
pub fn estimate_tdoa(a: &CorrelationResult, b: &CorrelationResult) -> f64 {
    a.peak_time - b.peak_time
}

fn linear_at(c: &Waveform, t: f64) -> f64 {
    let x = (t - c.t0) * c.sample_rate;
    let i = (x.floor() as usize).min(c.len() - 1);
    if i + 1 >= c.len() {
        return c.samples[i];
    }
    let f = x - i as f64;
    c.samples[i] * (1.0 - f) + c.samples[i + 1] * f
}

/// Mean of `c(t)^2` over `[peak, peak + window]`, by the trapezoidal rule on a
/// band-limited upsampling of the correlation, with linearly interpolated end points.
pub fn rss_from_correlation(c: &CorrelationResult, window: f64) -> Result<f64> {
    let w = &c.c;
    let t_a = c.peak_time;
    let t_b = t_a + window;
    if !(window > 0.0) || w.is_empty() || t_a < w.t0 || t_b > w.t_end() {
        return Err(Error::WindowOutOfSupport {
            start: t_a,
            end: t_b,
        });
    }
    let fs = w.sample_rate;
    // the carrier gets only a few raw samples per cycle; integrate on a finer grid
    let first = (((t_a - w.t0) * fs).floor() as usize).saturating_sub(RSS_MARGIN);
    let last = ((((t_b - w.t0) * fs).ceil() as usize) + RSS_MARGIN).min(w.len() - 1);
    let mut seg_len = last - first + 1;
    seg_len -= seg_len % 2;
    let fine = if seg_len >= 8 {
        Waveform {
            samples: upsample(&w.samples[first..first + seg_len], RSS_UPSAMPLE),
            sample_rate: fs * RSS_UPSAMPLE as f64,
            t0: w.time_at(first as f64),
        }
    } else {
        w.clone()
    };
    let fs = fine.sample_rate;
    let i_a = ((t_a - fine.t0) * fs).ceil().max(0.0) as usize;
    let i_b = (((t_b - fine.t0) * fs).floor().max(0.0) as usize).min(fine.len() - 1);
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(i_b.saturating_sub(i_a) + 3);
    knots.push((t_a, linear_at(&fine, t_a)));
    for i in i_a..=i_b {
        let t = fine.time_at(i as f64);
        if t > t_a && t < t_b {
            knots.push((t, fine.samples[i]));
        }
    }
    knots.push((t_b, linear_at(&fine, t_b)));
    let integral: f64 = knots
        .windows(2)
        .map(|k| 0.5 * (k[1].0 - k[0].0) * (k[0].1 * k[0].1 + k[1].1 * k[1].1))
        .sum();
    Ok(integral / window)
}

/// `t,amplitude` per sample.
pub fn write_waveform_csv<W: Write>(w: &Waveform, mut out: W) -> Result<()> {
    writeln!(out, "t,amplitude")?;
    for (i, s) in w.samples.iter().enumerate() {
        writeln!(out, "{:.6e},{:.9e}", w.time_at(i as f64), s)?;
    }
    Ok(())
}

/// Reads a uniformly sampled `t,amplitude` CSV; the rate comes from the first two rows.
pub fn read_waveform_csv<R: Read>(input: R) -> Result<Waveform> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut t = Vec::new();
    let mut a = Vec::new();
    for rec in rdr.deserialize::<(f64, f64)>() {
        let (ti, ai) = rec?;
        t.push(ti);
        a.push(ai);
    }
    if t.len() < 2 {
        return Err(Error::InvalidParameter(
            "waveform CSV needs at least two samples".into(),
        ));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    Waveform::new(a, 1.0 / dt, t[0])
}
