//! Transmit power amplifier models and the efficiency/PAPR reports they feed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WptError};
use crate::numerics;
use crate::rectenna::ReceivedSignal;
use crate::signal::SignalSpec;

/// Memoryless amplifier: ideal linear gain, or the Rapp solid-state model
/// `out = G·in / (1 + (G|in|/A_s)^{2β})^{1/(2β)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HpaModel {
    Linear { gain: f64, efficiency: f64 },
    Rapp { gain: f64, saturation: f64, smoothness: f64 },
}

impl HpaModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            HpaModel::Linear { gain, efficiency } => {
                if !(gain > 0.0) {
                    return Err(WptError::param("gain", "must be > 0"));
                }
                if !(efficiency > 0.0 && efficiency <= 1.0) {
                    return Err(WptError::param("efficiency", "must lie in (0, 1]"));
                }
            }
            HpaModel::Rapp { gain, saturation, smoothness } => {
                if !(gain > 0.0) {
                    return Err(WptError::param("gain", "must be > 0"));
                }
                if !(saturation > 0.0) {
                    return Err(WptError::param("saturation", "must be > 0"));
                }
                if !(smoothness >= 1.0) {
                    return Err(WptError::param("smoothness", "must be >= 1"));
                }
            }
        }
        Ok(())
    }

    pub fn gain(&self) -> f64 {
        match *self {
            HpaModel::Linear { gain, .. } | HpaModel::Rapp { gain, .. } => gain,
        }
    }

    /// Output magnitude for an input magnitude `r ≥ 0`.
    pub fn am_am(&self, r: f64) -> f64 {
        match *self {
            HpaModel::Linear { gain, .. } => gain * r,
            HpaModel::Rapp { gain, saturation, smoothness } => {
                let u = gain * r / saturation;
                if u == 0.0 {
                    return 0.0;
                }
                let two_b = 2.0 * smoothness;
                if u <= 1.0 {
                    gain * r / (1.0 + u.powf(two_b)).powf(1.0 / two_b)
                } else {
                    saturation / (1.0 + u.powf(-two_b)).powf(1.0 / two_b)
                }
            }
        }
    }

    /// Derivative of [`Self::am_am`] with respect to `r`.
    pub fn am_am_derivative(&self, r: f64) -> f64 {
        match *self {
            HpaModel::Linear { gain, .. } => gain,
            HpaModel::Rapp { gain, saturation, smoothness } => {
                let u = (gain * r / saturation).powf(2.0 * smoothness);
                gain * (1.0 + u).powf(-1.0 / (2.0 * smoothness) - 1.0)
            }
        }
    }

    /// Elementwise response to real voltage samples.
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        input.iter().map(|&v| v.signum() * self.am_am(v.abs())).collect()
    }

    /// Response to a complex envelope sample (AM/AM only).
    pub fn apply_envelope(&self, x: Complex64) -> Complex64 {
        let r = x.norm();
        if r == 0.0 {
            return x;
        }
        x * (self.am_am(r) / r)
    }
}

fn antenna_waveform(signal: &SignalSpec, m: usize) -> ReceivedSignal {
    ReceivedSignal::deterministic(signal.x[m].clone())
}

/// DC-to-RF efficiency of the amplifier for the deterministic part of `signal`.
///
/// Linear models report their constant. Rapp reports the time-averaged output
/// power over `G²` times the input power, so a linear regime gives 1.
pub fn e1_report(model: &HpaModel, signal: &SignalSpec) -> Result<f64> {
    model.validate()?;
    match *model {
        HpaModel::Linear { efficiency, .. } => Ok(efficiency),
        HpaModel::Rapp { gain, .. } => {
            let n = signal.n_tones().max(1);
            let samples = 4096 * n;
            let (mut p_in, mut p_out) = (0.0, 0.0);
            for m in 0..signal.n_tx() {
                let w = antenna_waveform(signal, m);
                let y = w.waveform();
                p_in += numerics::time_average(&y, 1.0, samples, 2, n)?.m2;
                p_out += numerics::time_average(|t| model.am_am(y(t).abs()), 1.0, samples, 2, n)?.m2;
            }
            if p_in == 0.0 {
                return Err(WptError::Degenerate("zero input power".into()));
            }
            Ok(p_out / (gain * gain * p_in))
        }
    }
}

/// Peak-to-average power ratio in dB, the largest over transmit antennas.
pub fn papr(signal: &SignalSpec) -> Result<f64> {
    if !signal.is_deterministic() {
        return Err(WptError::RandomSignal("PAPR of a modulated signal needs a Monte Carlo percentile".into()));
    }
    let n = signal.n_tones().max(1);
    let samples = 256 * (3 * n + 2);
    let mut best: Option<f64> = None;
    for m in 0..signal.n_tx() {
        let w = antenna_waveform(signal, m);
        let y = w.waveform();
        let (mut peak, mut avg) = (0.0f64, 0.0);
        for k in 0..samples {
            let v = y(k as f64 / samples as f64).powi(2);
            peak = peak.max(v);
            avg += v;
        }
        avg /= samples as f64;
        if avg > 0.0 {
            let r = 10.0 * (peak / avg).log10();
            best = Some(best.map_or(r, |b| b.max(r)));
        }
    }
    best.ok_or_else(|| WptError::Degenerate("PAPR of a zero signal is undefined".into()))
}
