//! Simulated detector pulse streams and the aligned, decimated datasets built from them.
//!
//! Pulses follow the CR-(RC)^N reference shape, arrive as a Poisson process and sit
//! on additive white Gaussian noise. Overlapping pulses simply add; pileup is kept.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::container::Container;
use crate::error::{config, domain, Error, Result};

/// Fractions of the shuffled windows assigned to train / validation / test.
pub const SPLIT_FRACTIONS: (f64, f64, f64) = (0.70, 0.20, 0.10);

/// Shaper orders covered by the simulator.
pub const SHAPER_ORDERS: std::ops::RangeInclusive<u32> = 1..=5;

/// Closed PSNR interval (linear ratio, not dB).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsnrRange {
    pub lo: f64,
    pub hi: f64,
}

/// Physics and sampling parameters of a simulated detector stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseStreamConfig {
    /// Order N of the CR-(RC)^N shaper.
    pub shaper_order: u32,
    /// Decay time constant, seconds.
    #[serde(rename = "tau_s")]
    pub tau: f64,
    /// Sampling period T, seconds.
    #[serde(rename = "sample_period_s")]
    pub sample_period: f64,
    pub psnr_range: PsnrRange,
    /// Poisson arrival rate, pulses per sample.
    #[serde(rename = "arrival_rate_per_sample")]
    pub mean_arrival_rate: f64,
    /// Number of samples in the stream.
    pub stream_length: usize,
    /// Noise standard deviation, amplitude units.
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl Default for PulseStreamConfig {
    fn default() -> Self {
        PulseStreamConfig {
            shaper_order: 3,
            tau: 25e-9,
            sample_period: 25e-9,
            psnr_range: PsnrRange { lo: 1.0, hi: 20.0 },
            mean_arrival_rate: default_arrival_rate(DEFAULT_WINDOW_HALF),
            stream_length: 5_000 * 2 * DEFAULT_WINDOW_HALF,
            noise_sigma: 1.0,
            rng_seed: 42,
        }
    }
}

/// Default window length parameter N_W.
pub const DEFAULT_WINDOW_HALF: usize = 32;
/// Default decimation factor M.
pub const DEFAULT_DECIMATION: usize = 4;

/// Arrival rate giving on average one pulse per four windows' worth of samples.
pub fn default_arrival_rate(window_half: usize) -> f64 {
    1.0 / (4.0 * window_half as f64)
}

impl PulseStreamConfig {
    pub fn validate(&self) -> Result<()> {
        if !SHAPER_ORDERS.contains(&self.shaper_order) {
            return Err(config(format!(
                "shaper_order must be in 1..=5, got {}",
                self.shaper_order
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return Err(config(format!(
                "sample_period must be positive, got {}",
                self.sample_period
            )));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(config(format!(
                "noise_sigma must be positive, got {}",
                self.noise_sigma
            )));
        }
        let PsnrRange { lo, hi } = self.psnr_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(config(format!("psnr_range must satisfy 0 < lo <= hi, got [{lo}, {hi}]")));
        }
        if !(self.mean_arrival_rate >= 0.0 && self.mean_arrival_rate.is_finite()) {
            return Err(config(format!(
                "mean_arrival_rate must be nonnegative, got {}",
                self.mean_arrival_rate
            )));
        }
        Ok(())
    }

    /// Constant that maps raw samples into the fixed-point input range: the
    /// largest nominal pulse peak plus four noise sigmas.
    pub fn input_scale(&self) -> f64 {
        (self.psnr_range.hi + 4.0) * self.noise_sigma
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// CR-(RC)^N reference shape `p[k] = (kT/tau)^N exp(-kT/tau) / N!`, zero for `k < 0`.
pub fn reference_shape(order: u32, tau: f64, sample_period: f64, k: i64) -> Result<f64> {
    if order == 0 {
        return Err(domain("shaper order must be at least 1"));
    }
    if !(tau > 0.0) {
        return Err(domain(format!("tau must be positive, got {tau}")));
    }
    if !(sample_period > 0.0) {
        return Err(domain(format!("sample period must be positive, got {sample_period}")));
    }
    if k < 0 {
        return Ok(0.0);
    }
    let x = k as f64 * sample_period / tau;
    Ok(x.powi(order as i32) * (-x).exp() / factorial(order))
}

/// Peak value `N^N e^-N / N!` of the continuous reference shape, reached at `t = N tau`.
pub fn peak_amplitude(order: u32) -> Result<f64> {
    if order == 0 {
        return Err(domain("shaper order must be at least 1"));
    }
    let n = f64::from(order);
    Ok(n.powi(order as i32) * (-n).exp() / factorial(order))
}

/// Peak signal-to-noise ratio as a linear ratio.
pub fn psnr(peak: f64, noise_sigma: f64) -> Result<f64> {
    if !(noise_sigma > 0.0) {
        return Err(domain(format!("noise sigma must be positive, got {noise_sigma}")));
    }
    Ok(peak / noise_sigma)
}

/// Converts a linear amplitude ratio to decibels.
pub fn ratio_to_db(ratio: f64) -> f64 {
    20.0 * ratio.log10()
}

/// One pulse in a stream. `amplitude` is the scale factor A applied to the reference shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub toa: u64,
    pub amplitude: f64,
}

#[derive(Debug, Clone)]
pub struct PulseStream {
    pub samples: Vec<f64>,
    /// Pulses sorted by time of arrival.
    pub pulses: Vec<Pulse>,
    /// Offset in samples from time of arrival to the sampled peak.
    pub peak_offset: usize,
}

/// Sampled reference shape from k = 0 until the tail is negligible.
pub fn shape_table(cfg: &PulseStreamConfig) -> Result<Vec<f64>> {
    let ratio = cfg.sample_period / cfg.tau;
    let span = ((f64::from(cfg.shaper_order) + 40.0) / ratio).ceil() as i64;
    (0..=span)
        .map(|k| reference_shape(cfg.shaper_order, cfg.tau, cfg.sample_period, k))
        .collect()
}

fn argmax_first(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Draws Poisson arrivals with amplitudes chosen so the peak PSNR is uniform over the configured range.
pub fn draw_pulses(cfg: &PulseStreamConfig, rng: &mut impl Rng) -> Result<Vec<Pulse>> {
    cfg.validate()?;
    if cfg.mean_arrival_rate == 0.0 {
        return Ok(Vec::new());
    }
    let gaps = Exp::new(cfg.mean_arrival_rate).map_err(|e| config(e.to_string()))?;
    let a_pk = peak_amplitude(cfg.shaper_order)?;
    let PsnrRange { lo, hi } = cfg.psnr_range;
    let mut pulses = Vec::new();
    let mut t: f64 = gaps.sample(rng);
    while t < cfg.stream_length as f64 {
        let target_psnr = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        pulses.push(Pulse {
            toa: t as u64,
            amplitude: target_psnr * cfg.noise_sigma / a_pk,
        });
        t += gaps.sample(rng);
    }
    Ok(pulses)
}

/// Superimposes `pulses` on the stream and, if `noise_rng` is given, adds Gaussian noise.
pub fn render_stream(
    cfg: &PulseStreamConfig,
    pulses: &[Pulse],
    noise_rng: Option<&mut ChaCha8Rng>,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let shape = shape_table(cfg)?;
    let mut samples = vec![0.0; cfg.stream_length];
    for p in pulses {
        let start = p.toa as usize;
        if start >= samples.len() {
            continue;
        }
        for (s, &v) in samples[start..].iter_mut().zip(&shape) {
            *s += p.amplitude * v;
        }
    }
    if let Some(rng) = noise_rng {
        for s in &mut samples {
            let z: f64 = StandardNormal.sample(rng);
            *s += cfg.noise_sigma * z;
        }
    }
    Ok(samples)
}

/// Generates the full noisy stream. Pulse draws and noise use separate ChaCha streams of the same seed.
pub fn generate_stream(cfg: &PulseStreamConfig) -> Result<PulseStream> {
    cfg.validate()?;
    let mut pulse_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    noise_rng.set_stream(1);
    let pulses = draw_pulses(cfg, &mut pulse_rng)?;
    let samples = render_stream(cfg, &pulses, Some(&mut noise_rng))?;
    let peak_offset = argmax_first(shape_table(cfg)?);
    Ok(PulseStream { samples, pulses, peak_offset })
}

/// Window emitted by the alignment stage.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedWindow {
    /// Stream index of the first sample of the source buffer.
    pub buffer_start: usize,
    /// Stream index of the located peak, `k_max`.
    pub peak_index: usize,
    /// `N_W + 1` samples centered on the peak, zero-padded past the buffer edges.
    pub samples: Vec<f64>,
}

impl AlignedWindow {
    /// Stream-index range `[lo, hi)` of window positions that carry real buffer data.
    pub fn covered_range(&self, window_half: usize) -> (usize, usize) {
        let half = window_half / 2;
        let buffer_end = self.buffer_start + 2 * window_half;
        let lo = self.peak_index.saturating_sub(half).max(self.buffer_start);
        let hi = (self.peak_index + half + 1).min(buffer_end);
        (lo, hi)
    }
}

fn check_window_half(window_half: usize) -> Result<()> {
    if window_half < 2 || window_half % 2 != 0 {
        return Err(domain(format!(
            "window length parameter must be even and at least 2, got {window_half}"
        )));
    }
    Ok(())
}

/// Coarse time alignment: split the stream into consecutive buffers of `2 N_W` samples, find the
/// first sample of maximal magnitude in each and emit the `N_W + 1` samples centered on it.
pub fn align_windows(stream: &[f64], window_half: usize) -> Result<Vec<AlignedWindow>> {
    check_window_half(window_half)?;
    let buf_len = 2 * window_half;
    if stream.len() < buf_len {
        return Err(Error::InsufficientStream { required: buf_len, available: stream.len() });
    }
    let half = window_half as i64 / 2;
    let windows = stream
        .chunks_exact(buf_len)
        .enumerate()
        .map(|(b, buf)| {
            let k_max = argmax_first(buf.iter().map(|v| v.abs()));
            let samples = (-half..=half)
                .map(|off| {
                    let idx = k_max as i64 + off;
                    if (0..buf_len as i64).contains(&idx) {
                        buf[idx as usize]
                    } else {
                        0.0
                    }
                })
                .collect();
            AlignedWindow {
                buffer_start: b * buf_len,
                peak_index: b * buf_len + k_max,
                samples,
            }
        })
        .collect();
    Ok(windows)
}

/// Keeps every `m`-th sample starting at index 0. Requires `m` to divide `len - 1`.
pub fn decimate<T: Copy>(window: &[T], m: usize) -> Result<Vec<T>> {
    if m == 0 {
        return Err(domain("decimation factor must be at least 1"));
    }
    if window.is_empty() || (window.len() - 1) % m != 0 {
        return Err(domain(format!(
            "decimation factor {m} does not divide window span {}",
            window.len().saturating_sub(1)
        )));
    }
    Ok(window.iter().step_by(m).copied().collect())
}

/// Input to the estimator: decimated, normalized samples plus the amplitude target.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub samples: Vec<f32>,
    /// Peak height `A * A_pk` of the labeled pulse divided by the input scale; 0 if no pulse peaks inside.
    pub amplitude_label: f32,
    /// Time of arrival (stream sample index) of the labeled pulse. Not persisted.
    pub true_toa: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetProvenance {
    pub stream: PulseStreamConfig,
    pub window_half: usize,
    pub decimation: usize,
    pub total_windows: usize,
    pub shuffle_seed: u64,
    pub input_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Window>,
    pub val: Vec<Window>,
    pub test: Vec<Window>,
    pub provenance: DatasetProvenance,
}

/// Split sizes for `n` windows: floor of the train and validation fractions, remainder to test.
pub fn split_counts(n: usize) -> (usize, usize, usize) {
    let train = (n as f64 * SPLIT_FRACTIONS.0).floor() as usize;
    let val = (n as f64 * SPLIT_FRACTIONS.1).floor() as usize;
    (train, val, n - train - val)
}

/// Stream length needed for `total_windows` alignment buffers.
pub fn required_stream_length(window_half: usize, total_windows: usize) -> usize {
    2 * window_half * total_windows
}

/// Generates, aligns, labels, decimates, shuffles and splits a dataset.
pub fn build_dataset(
    cfg: &PulseStreamConfig,
    window_half: usize,
    decimation: usize,
    total_windows: usize,
    seed: u64,
) -> Result<Dataset> {
    cfg.validate()?;
    check_window_half(window_half)?;
    if total_windows < 10 {
        return Err(domain(format!("at least 10 windows required, got {total_windows}")));
    }
    if decimation == 0 || window_half % decimation != 0 {
        return Err(domain(format!(
            "decimation factor {decimation} does not divide window length parameter {window_half}"
        )));
    }
    let required = required_stream_length(window_half, total_windows);
    if cfg.stream_length < required {
        return Err(Error::InsufficientStream { required, available: cfg.stream_length });
    }

    let stream = generate_stream(cfg)?;
    let aligned = align_windows(&stream.samples[..required], window_half)?;
    let a_pk = peak_amplitude(cfg.shaper_order)?;
    let scale = cfg.input_scale();
    let peaks: Vec<u64> = stream
        .pulses
        .iter()
        .map(|p| p.toa + stream.peak_offset as u64)
        .collect();

    let mut windows = Vec::with_capacity(aligned.len());
    for win in &aligned {
        let (lo, hi) = win.covered_range(window_half);
        let first = peaks.partition_point(|&pk| pk < lo as u64);
        let last = peaks.partition_point(|&pk| pk < hi as u64);
        let labeled = stream.pulses[first..last]
            .iter()
            .copied()
            .reduce(|a, b| if b.amplitude > a.amplitude { b } else { a });
        let samples = decimate(&win.samples, decimation)?
            .into_iter()
            .map(|s| (s / scale) as f32)
            .collect();
        windows.push(Window {
            samples,
            amplitude_label: labeled.map_or(0.0, |p| (p.amplitude * a_pk / scale) as f32),
            true_toa: labeled.map(|p| p.toa),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    windows.shuffle(&mut rng);
    let (n_train, n_val, _) = split_counts(windows.len());
    let test = windows.split_off(n_train + n_val);
    let val = windows.split_off(n_train);
    Ok(Dataset {
        train: windows,
        val,
        test,
        provenance: DatasetProvenance {
            stream: cfg.clone(),
            window_half,
            decimation,
            total_windows,
            shuffle_seed: seed,
            input_scale: scale,
        },
    })
}

impl Dataset {
    pub fn window_len(&self) -> usize {
        self.provenance.window_half / self.provenance.decimation + 1
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_container(&self) -> Result<Container> {
        let mut c = Container::new(json!({
            "kind": "dataset",
            "provenance": self.provenance,
            "window_len": self.window_len(),
            "splits": { "train": self.train.len(), "val": self.val.len(), "test": self.test.len() },
        }));
        for (name, split) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            c.push(
                format!("{name}_samples"),
                split.iter().flat_map(|w| w.samples.iter().copied()).collect(),
            );
            c.push(format!("{name}_labels"), split.iter().map(|w| w.amplitude_label).collect());
        }
        Ok(c)
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.header.get("kind").and_then(|k| k.as_str()) != Some("dataset") {
            return Err(Error::Format("container does not hold a dataset".into()));
        }
        let provenance: DatasetProvenance = serde_json::from_value(c.header["provenance"].clone())?;
        let window_len = provenance.window_half / provenance.decimation.max(1) + 1;
        let mut splits = Vec::with_capacity(3);
        for name in ["train", "val", "test"] {
            let samples = c
                .array(&format!("{name}_samples"))
                .ok_or_else(|| Error::Format(format!("missing {name} samples")))?;
            let labels = c
                .array(&format!("{name}_labels"))
                .ok_or_else(|| Error::Format(format!("missing {name} labels")))?;
            if samples.len() != labels.len() * window_len {
                return Err(Error::Format(format!("{name} split has inconsistent lengths")));
            }
            splits.push(
                samples
                    .chunks_exact(window_len)
                    .zip(labels)
                    .map(|(s, &l)| Window { samples: s.to_vec(), amplitude_label: l, true_toa: None })
                    .collect::<Vec<_>>(),
            );
        }
        let test = splits.pop().unwrap();
        let val = splits.pop().unwrap();
        let train = splits.pop().unwrap();
        Ok(Dataset { train, val, test, provenance })
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        self.to_container()?.write_to(path)
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        Self::from_container(&Container::read_from(path)?)
    }

    /// SHA-256 of the serialized container, hex encoded.
    pub fn digest(&self) -> Result<String> {
        let bytes = self.to_container()?.to_bytes()?;
        Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn reference_shape_examples() {
        assert_eq!(reference_shape(1, 1.0, 1.0, 0).unwrap(), 0.0);
        assert!(close(reference_shape(1, 1.0, 1.0, 1).unwrap(), (-1.0f64).exp(), 1e-15));
        assert_eq!(reference_shape(2, 1.0, 1.0, -3).unwrap(), 0.0);
        // 7^3 e^-7 / 3!, evaluated to 20 digits with mpmath.
        assert!(close(reference_shape(3, 1.0, 1.0, 7).unwrap(), 0.052_129_252_364_199_84, 1e-15));
    }

    #[test]
    fn reference_shape_rejects_bad_parameters() {
        assert!(reference_shape(0, 1.0, 1.0, 1).is_err());
        assert!(reference_shape(1, 0.0, 1.0, 1).is_err());
        assert!(reference_shape(1, -1.0, 1.0, 1).is_err());
    }

    #[test]
    fn peak_amplitude_examples() {
        assert!(close(peak_amplitude(1).unwrap(), 0.37, 0.005));
        assert!(close(peak_amplitude(5).unwrap(), 0.18, 0.005));
        assert!(close(peak_amplitude(2).unwrap(), 2.0 * (-2.0f64).exp(), 1e-15));
        assert!(peak_amplitude(0).is_err());
        for n in 1..5 {
            assert!(peak_amplitude(n + 1).unwrap() < peak_amplitude(n).unwrap());
        }
    }

    #[test]
    fn shape_is_unimodal_with_peak_at_n_tau() {
        for n in 1..=5 {
            let cfg = PulseStreamConfig { shaper_order: n, ..Default::default() };
            let table = shape_table(&cfg).unwrap();
            let peak = argmax_first(table.iter().copied());
            assert_eq!(peak, n as usize);
            assert!(table.iter().all(|&v| v >= 0.0));
            assert!(table[..=peak].windows(2).all(|w| w[0] <= w[1]));
            assert!(table[peak..].windows(2).all(|w| w[0] >= w[1]));
            assert!(close(table[peak], peak_amplitude(n).unwrap(), 1e-15));
        }
    }

    #[test]
    fn psnr_examples() {
        assert_eq!(psnr(0.5, 0.5).unwrap(), 1.0);
        assert!(close(psnr(0.37, 0.037).unwrap(), 10.0, 1e-12));
        assert!(close(ratio_to_db(20.0), 26.02, 0.005));
        assert!(psnr(1.0, 0.0).is_err());
    }

    #[test]
    fn noise_only_stream_has_configured_variance() {
        let cfg = PulseStreamConfig {
            mean_arrival_rate: 0.0,
            stream_length: 100_000,
            noise_sigma: 0.7,
            ..Default::default()
        };
        let s = generate_stream(&cfg).unwrap();
        assert!(s.pulses.is_empty());
        let n = s.samples.len() as f64;
        let mean = s.samples.iter().sum::<f64>() / n;
        let var = s.samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sigma2 = 0.49;
        assert!(mean.abs() < 3.0 * (sigma2 / n).sqrt());
        assert!((var - sigma2).abs() < 0.05 * sigma2);
    }

    #[test]
    fn noiseless_render_is_scaled_reference() {
        let cfg = PulseStreamConfig { stream_length: 200, ..Default::default() };
        let pulse = Pulse { toa: 50, amplitude: 2.5 };
        let s = render_stream(&cfg, &[pulse], None).unwrap();
        for (k, v) in s.iter().enumerate() {
            let want = 2.5 * reference_shape(3, cfg.tau, cfg.sample_period, k as i64 - 50).unwrap();
            assert!(close(*v, want, 1e-12), "k={k}");
        }
    }

    #[test]
    fn decimate_examples() {
        let w: Vec<usize> = (0..=8).collect();
        assert_eq!(decimate(&w, 2).unwrap(), vec![0, 2, 4, 6, 8]);
        let w33 = vec![0.0; 33];
        assert_eq!(decimate(&w33, 4).unwrap().len(), 9);
        assert_eq!(decimate(&w33, 1).unwrap(), w33);
        assert!(decimate(&w33, 5).is_err());
        assert!(decimate(&w33, 0).is_err());
    }

    #[test]
    fn align_impulse_and_ties() {
        let mut stream = vec![0.0; 64];
        stream[40] = 1.0;
        let w = align_windows(&stream, 32).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].samples.len(), 33);
        assert_eq!(w[0].samples[16], 1.0);
        assert_eq!(w[0].peak_index, 40);

        let zeros = vec![0.0; 128];
        let w = align_windows(&zeros, 32).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].peak_index, 0);
        assert_eq!(w[1].peak_index, 64);
        assert!(w.iter().all(|x| x.samples.len() == 33 && x.samples.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn align_zero_pads_past_buffer_edges() {
        let mut stream: Vec<f64> = (0..64).map(|i| 0.01 * i as f64).collect();
        stream[2] = -5.0;
        let w = &align_windows(&stream, 32).unwrap()[0];
        assert_eq!(w.peak_index, 2);
        assert!(w.samples[..14].iter().all(|&v| v == 0.0));
        assert_eq!(w.samples[14], stream[0]);
        assert_eq!(w.samples[16], -5.0);
        assert_eq!(w.covered_range(32), (0, 19));
    }

    #[test]
    fn align_noiseless_pulse_lands_on_peak() {
        let cfg = PulseStreamConfig { shaper_order: 2, stream_length: 128, ..Default::default() };
        let s = render_stream(&cfg, &[Pulse { toa: 70, amplitude: 1.0 }], None).unwrap();
        let w = align_windows(&s, 32).unwrap();
        assert_eq!(w[1].peak_index, 72);
    }

    #[test]
    fn align_rejects_bad_arguments() {
        assert!(align_windows(&[0.0; 10], 32).is_err());
        assert!(align_windows(&[0.0; 100], 1).is_err());
        assert!(align_windows(&[0.0; 100], 3).is_err());
    }

    #[test]
    fn split_rounding() {
        assert_eq!(split_counts(10), (7, 2, 1));
        assert_eq!(split_counts(98_583), (69_008, 19_716, 9_859));
        assert_eq!(split_counts(5_000), (3_500, 1_000, 500));
    }

    #[test]
    fn build_dataset_small_and_deterministic() {
        let cfg = PulseStreamConfig { stream_length: 640, ..Default::default() };
        let a = build_dataset(&cfg, 32, 4, 10, 9).unwrap();
        assert_eq!((a.train.len(), a.val.len(), a.test.len()), (7, 2, 1));
        assert!(a.train.iter().all(|w| w.samples.len() == 9));
        let b = build_dataset(&cfg, 32, 4, 10, 9).unwrap();
        assert_eq!(a.digest().unwrap(), b.digest().unwrap());
    }

    #[test]
    fn build_dataset_errors() {
        let cfg = PulseStreamConfig { stream_length: 600, ..Default::default() };
        match build_dataset(&cfg, 32, 4, 10, 0) {
            Err(Error::InsufficientStream { required, available }) => {
                assert_eq!((required, available), (640, 600));
            }
            other => panic!("unexpected {other:?}"),
        }
        let cfg = PulseStreamConfig::default();
        assert!(build_dataset(&cfg, 32, 4, 9, 0).is_err());
        assert!(build_dataset(&cfg, 32, 5, 100, 0).is_err());
    }

    #[test]
    fn dataset_labels_match_pulse_peaks() {
        let cfg = PulseStreamConfig { stream_length: 64 * 2000, ..Default::default() };
        let ds = build_dataset(&cfg, 32, 4, 2000, 1).unwrap();
        let scale = cfg.input_scale() as f32;
        let max_label = (cfg.psnr_range.hi * cfg.noise_sigma) as f32 / scale;
        let all: Vec<&Window> = ds.train.iter().chain(&ds.val).chain(&ds.test).collect();
        assert!(all.iter().all(|w| (0.0..=max_label * 1.0001).contains(&w.amplitude_label)));
        let labeled = all.iter().filter(|w| w.true_toa.is_some()).count();
        // Roughly half of the buffers hold a pulse at the default rate.
        assert!(labeled > 500 && labeled < 1200, "{labeled}");
        for w in &all {
            assert_eq!(w.amplitude_label == 0.0, w.true_toa.is_none());
        }
    }

    #[test]
    fn dataset_container_round_trip() {
        let cfg = PulseStreamConfig { stream_length: 64 * 50, ..Default::default() };
        let ds = build_dataset(&cfg, 32, 4, 50, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        ds.write_to(&path).unwrap();
        let back = Dataset::read_from(&path).unwrap();
        assert_eq!(back.provenance, ds.provenance);
        assert_eq!(back.digest().unwrap(), ds.digest().unwrap());
        assert_eq!(back.train[0].samples, ds.train[0].samples);
    }
}
