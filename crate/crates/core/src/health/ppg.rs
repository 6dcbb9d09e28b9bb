use std::collections::VecDeque;

use super::spo2_from_ratio;
use crate::world::PpgSample;

pub const DEFAULT_WINDOW_S: f64 = 10.0;
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 100.0;
/// Peaks must rise this many standard deviations above the window mean.
const PEAK_K: f64 = 0.5;
const MIN_PEAK_GAP_S: f64 = 0.3;

/// Paired IR/red ring buffers of fixed capacity.
#[derive(Debug, Clone)]
pub struct PpgWindow {
    ir: VecDeque<f64>,
    red: VecDeque<f64>,
    capacity: usize,
    sample_rate: f64,
}

impl PpgWindow {
    pub fn new(window_s: f64, sample_rate: f64) -> Self {
        let capacity = (window_s * sample_rate).round().max(3.0) as usize;
        Self {
            ir: VecDeque::with_capacity(capacity),
            red: VecDeque::with_capacity(capacity),
            capacity,
            sample_rate,
        }
    }

    pub fn push(&mut self, s: PpgSample) {
        if self.ir.len() == self.capacity {
            self.ir.pop_front();
            self.red.pop_front();
        }
        self.ir.push_back(s.ir);
        self.red.push_back(s.red);
    }

    pub fn is_full(&self) -> bool {
        self.ir.len() == self.capacity
    }

    pub fn len(&self) -> usize {
        self.ir.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ir.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn ir(&self) -> impl Iterator<Item = f64> + '_ {
        self.ir.iter().copied()
    }

    pub fn red(&self) -> impl Iterator<Item = f64> + '_ {
        self.red.iter().copied()
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Peak indices on the IR channel. Candidates within the minimum gap of the
/// previous kept peak replace it only if taller.
fn detect_peaks(xs: &[f64], sample_rate: f64) -> Vec<usize> {
    let (mean, std) = mean_std(xs);
    if std == 0.0 {
        return Vec::new();
    }
    let threshold = mean + PEAK_K * std;
    let min_gap = (MIN_PEAK_GAP_S * sample_rate).ceil() as usize;
    let mut peaks: Vec<usize> = Vec::new();
    for i in 1..xs.len() - 1 {
        if !(xs[i] > threshold && xs[i] > xs[i - 1] && xs[i] >= xs[i + 1]) {
            continue;
        }
        match peaks.last_mut() {
            Some(last) if i - *last < min_gap => {
                if xs[i] > xs[*last] {
                    *last = i;
                }
            }
            _ => peaks.push(i),
        }
    }
    peaks
}

pub fn compute_bpm(window: &PpgWindow) -> Option<f64> {
    if !window.is_full() {
        return None;
    }
    let xs: Vec<f64> = window.ir().collect();
    let peaks = detect_peaks(&xs, window.sample_rate);
    if peaks.len() < 2 {
        return None;
    }
    let span_s = (peaks[peaks.len() - 1] - peaks[0]) as f64 / window.sample_rate;
    Some(60.0 * (peaks.len() - 1) as f64 / span_s)
}

/// Ratio of ratios with AC as peak-to-peak and DC as the window mean.
pub fn compute_spo2(window: &PpgWindow) -> Option<f64> {
    if !window.is_full() {
        return None;
    }
    let ac_dc = |xs: &mut dyn Iterator<Item = f64>| {
        let (mut lo, mut hi, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
        for x in xs {
            lo = lo.min(x);
            hi = hi.max(x);
            sum += x;
            n += 1;
        }
        (hi - lo, sum / n as f64)
    };
    let (ac_ir, dc_ir) = ac_dc(&mut window.ir());
    let (ac_red, dc_red) = ac_dc(&mut window.red());
    if dc_ir <= 0.0 || dc_red <= 0.0 || ac_ir == 0.0 || ac_red == 0.0 {
        return None;
    }
    let r = (ac_red / dc_red) / (ac_ir / dc_ir);
    Some(spo2_from_ratio(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::world::{synth_ppg, UserProfile, PPG_DC_IR, PPG_PERFUSION_IR};
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn filled(profile: &UserProfile, noise_frac: f64, seed: u64) -> PpgWindow {
        let mut w = PpgWindow::new(DEFAULT_WINDOW_S, DEFAULT_SAMPLE_RATE_HZ);
        let ac = PPG_PERFUSION_IR * PPG_DC_IR;
        let mut r = rng::stream(seed);
        let noise = Normal::new(0.0, (noise_frac * ac).max(f64::MIN_POSITIVE)).unwrap();
        for i in 0..w.capacity() {
            let mut s = synth_ppg(profile, i as f64 / DEFAULT_SAMPLE_RATE_HZ);
            if noise_frac > 0.0 {
                s.ir += noise.sample(&mut r);
                s.red += noise.sample(&mut r);
            }
            w.push(s);
        }
        w
    }

    fn at_rate(bpm: f64) -> UserProfile {
        UserProfile { heart_rate_bpm: bpm, ..UserProfile::default() }
    }

    #[test]
    fn bpm_tracks_generator_rate() {
        for bpm in [50.0, 60.0, 72.0, 90.0, 120.0] {
            let got = compute_bpm(&filled(&at_rate(bpm), 0.0, 0)).unwrap();
            assert!((got - bpm).abs() <= 2.0, "{bpm}: {got}");
        }
    }

    #[test]
    fn bpm_tolerates_two_percent_noise() {
        for bpm in [50.0, 60.0, 72.0, 90.0, 120.0] {
            for seed in 0..20 {
                let got = compute_bpm(&filled(&at_rate(bpm), 0.02, seed)).unwrap();
                assert!((got - bpm).abs() <= 2.0, "{bpm} seed {seed}: {got}");
            }
        }
    }

    #[test]
    fn flat_line_is_unavailable() {
        let mut w = PpgWindow::new(1.0, 100.0);
        for _ in 0..100 {
            w.push(PpgSample { ir: 5.0, red: 3.0 });
        }
        assert_eq!(compute_bpm(&w), None);
        assert_eq!(compute_spo2(&w), None);
    }

    #[test]
    fn warm_up_is_unavailable() {
        let p = at_rate(72.0);
        let mut w = PpgWindow::new(DEFAULT_WINDOW_S, DEFAULT_SAMPLE_RATE_HZ);
        for i in 0..w.capacity() - 1 {
            w.push(synth_ppg(&p, i as f64 / 100.0));
        }
        assert_eq!(compute_bpm(&w), None);
        assert_eq!(compute_spo2(&w), None);
    }

    #[test]
    fn spo2_round_trips_targets() {
        for target in [90.0, 95.0, 98.0] {
            let p = UserProfile { spo2_target: target, ..UserProfile::default() };
            let got = compute_spo2(&filled(&p, 0.0, 0)).unwrap();
            assert!((got - target).abs() < 1e-6, "{target}: {got}");
            assert_eq!(got.round(), target);
        }
    }

    #[test]
    fn zero_variance_red_is_unavailable() {
        let p = at_rate(72.0);
        let mut w = PpgWindow::new(DEFAULT_WINDOW_S, DEFAULT_SAMPLE_RATE_HZ);
        for i in 0..w.capacity() {
            let s = synth_ppg(&p, i as f64 / 100.0);
            w.push(PpgSample { ir: s.ir, red: 30_000.0 });
        }
        assert_eq!(compute_spo2(&w), None);
    }

    #[test]
    fn ring_buffer_keeps_latest() {
        let mut w = PpgWindow::new(0.03, 100.0);
        for i in 0..5 {
            w.push(PpgSample { ir: i as f64, red: 0.0 });
        }
        assert_eq!(w.ir().collect::<Vec<_>>(), vec![2.0, 3.0, 4.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn spo2_is_scale_invariant(bpm in 40.0f64..150.0, target in 80.0f64..100.0, scale in 0.01f64..100.0) {
            let p = UserProfile { heart_rate_bpm: bpm, spo2_target: target, ..UserProfile::default() };
            let w = filled(&p, 0.0, 0);
            let mut scaled = PpgWindow::new(DEFAULT_WINDOW_S, DEFAULT_SAMPLE_RATE_HZ);
            for (ir, red) in w.ir().zip(w.red()) {
                scaled.push(PpgSample { ir: ir * scale, red: red * scale });
            }
            let a = compute_spo2(&w).unwrap();
            let b = compute_spo2(&scaled).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
