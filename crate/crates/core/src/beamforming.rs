//! Transmit beamforming: MRT, joint beamforming and waveform design, and
//! CSIT-free transmit diversity by phase sweeping.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{cn01, ChannelResponse};
use crate::error::{Result, WptError};
use crate::numerics::SolverConfig;
use crate::rectenna::{EhTaylorModel, MomentConvention};
use crate::signal::SignalSpec;
use crate::waveform;

/// Per-tone transmit beamformers `w_n ∈ C^M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beamformer {
    pub w: Vec<Vec<Complex64>>,
}

impl Beamformer {
    pub fn power(&self) -> f64 {
        self.w.iter().flatten().map(|z| z.norm_sqr()).sum()
    }

    /// Multisine whose tone `n` is `w_n` (amplitude table indexed `[m][n]`).
    pub fn to_signal(&self, power_budget: f64) -> SignalSpec {
        let n = self.w.len();
        let m = self.w.first().map_or(0, |v| v.len());
        let x = (0..m).map(|mi| (0..n).map(|ni| self.w[ni][mi]).collect()).collect();
        SignalSpec::deterministic(x, power_budget)
    }
}

/// `w_n = √p_n·h_nᴴ/‖h_n‖` for a single-receive-antenna channel.
pub fn mrt(channel: &ChannelResponse, per_tone_power: &[f64]) -> Result<Beamformer> {
    if channel.n_rx() != 1 {
        return Err(WptError::Shape(format!("MRT needs Q = 1, got {}", channel.n_rx())));
    }
    if per_tone_power.len() != channel.n_tones() {
        return Err(WptError::Dimension(format!("{} powers for {} tones", per_tone_power.len(), channel.n_tones())));
    }
    let mut w = Vec::with_capacity(channel.n_tones());
    for (n, p) in per_tone_power.iter().enumerate() {
        let h = channel.row(n, 0);
        let nh = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nh == 0.0 {
            return Err(WptError::ZeroChannel(n));
        }
        let k = p.max(0.0).sqrt() / nh;
        w.push(h.iter().map(|z| z.conj() * k).collect());
    }
    Ok(Beamformer { w })
}

/// Per-tone MRT followed by the optimized power allocation over `A_n = ‖h_n‖`.
pub fn joint_bf_waveform(channel: &ChannelResponse, model: &EhTaylorModel, p: f64, cfg: &SolverConfig) -> Result<SignalSpec> {
    if channel.n_rx() != 1 {
        return Err(WptError::Shape(format!("expected Q = 1, got {}", channel.n_rx())));
    }
    let a: Vec<f64> = channel.h.iter().map(|h| h.norm()).collect();
    let s = waveform::optimize_amplitudes(&a, model, p, cfg)?;
    let pw: Vec<f64> = s.iter().map(|x| x * x).collect();
    let bf = mrt_or_zero(channel, &pw);
    Ok(bf.to_signal(p))
}

fn mrt_or_zero(channel: &ChannelResponse, p: &[f64]) -> Beamformer {
    let w = (0..channel.n_tones())
        .map(|n| {
            let h = channel.row(n, 0);
            let nh = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if nh == 0.0 {
                vec![Complex64::new(0.0, 0.0); h.len()]
            } else {
                h.iter().map(|z| z.conj() * (p[n].sqrt() / nh)).collect()
            }
        })
        .collect();
    Beamformer { w }
}

/// Small-scale fading law for the transmit-diversity study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    /// i.i.d. CN(0, 1) per antenna.
    #[default]
    Rayleigh,
    /// Unit-modulus gains with i.i.d. uniform phases.
    LineOfSight,
}

/// Per-draw and averaged outputs of the phase-sweeping study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub mean_v_out_td: f64,
    pub mean_v_out_single: f64,
    pub mean_p_dc_td: f64,
    pub mean_p_dc_single: f64,
    /// Slot-averaged received power per fading draw.
    pub m2_td: Vec<f64>,
    pub m2_single: Vec<f64>,
    /// Slot-averaged `v_out` per fading draw.
    pub v_td: Vec<f64>,
    pub v_single: Vec<f64>,
}

/// Antenna phases `ψ_{m}` for every slot. Depends only on `seed`, never on the channel.
pub fn sweep_phases(m: usize, slots: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = SolverConfig::with_seed(seed).rng(u64::MAX);
    (0..slots).map(|_| (0..m).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect()).collect()
}

/// Phase-swept CW from `M` antennas at `P/M` each versus one antenna at `P`.
pub fn transmit_diversity_eval(
    model: &EhTaylorModel,
    m: usize,
    fading_trials: usize,
    phase_slots: usize,
    p: f64,
    seed: u64,
    fading: Fading,
) -> Result<DiversityReport> {
    model.validate()?;
    if m < 2 {
        return Err(WptError::param("M", "transmit diversity needs M >= 2"));
    }
    if fading_trials == 0 || phase_slots == 0 {
        return Err(WptError::param("fading_trials", "trials and slots must be >= 1"));
    }
    let cfg = SolverConfig::with_seed(seed);
    let conv = MomentConvention::Passband;
    let amp = (p / m as f64).sqrt();
    let per_draw: Vec<(f64, f64, f64, f64)> = (0..fading_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = cfg.rng(t as u64);
            let h: Vec<Complex64> = (0..m)
                .map(|_| match fading {
                    Fading::Rayleigh => cn01(&mut rng),
                    Fading::LineOfSight => Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU)),
                })
                .collect();
            let mut prng = SolverConfig::with_seed(seed ^ 0x9e37_79b9_7f4a_7c15).rng(t as u64);
            let (mut m2, mut v) = (0.0, 0.0);
            for _ in 0..phase_slots {
                let y: Complex64 = h.iter().map(|hm| hm * Complex64::from_polar(amp, prng.gen_range(0.0..std::f64::consts::TAU))).sum();
                let a = y.norm();
                m2 += a * a;
                v += model.v_out_tone(a, conv);
            }
            let s = phase_slots as f64;
            let a1 = p.sqrt() * h[0].norm();
            (m2 / s, v / s, a1 * a1, model.v_out_tone(a1, conv))
        })
        .collect();
    let n = fading_trials as f64;
    let mean = |xs: Vec<f64>| xs.iter().sum::<f64>() / n;
    Ok(DiversityReport {
        mean_v_out_td: mean(per_draw.iter().map(|d| d.1).collect()),
        mean_v_out_single: mean(per_draw.iter().map(|d| d.3).collect()),
        mean_p_dc_td: mean(per_draw.iter().map(|d| model.p_dc(d.1)).collect()),
        mean_p_dc_single: mean(per_draw.iter().map(|d| model.p_dc(d.3)).collect()),
        m2_td: per_draw.iter().map(|d| d.0).collect(),
        m2_single: per_draw.iter().map(|d| d.2).collect(),
        v_td: per_draw.iter().map(|d| d.1).collect(),
        v_single: per_draw.iter().map(|d| d.3).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{rayleigh_iid, ToneGrid};
    use crate::rectenna;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mrt_examples() {
        let g = ToneGrid::with_tones(1, 1e6);
        let h = Complex64::from_polar(0.6, 0.8);
        let ch = ChannelResponse::siso(g, &[h]).unwrap();
        let bf = mrt(&ch, &[2.0]).unwrap();
        assert!((bf.w[0][0] - Complex64::from_polar(2f64.sqrt(), -0.8)).norm() < 1e-15);

        let ch = rayleigh_iid(3, 1, &ToneGrid::with_tones(4, 1e6), 2).unwrap();
        let p = [0.1, 0.2, 0.3, 0.4];
        let bf = mrt(&ch, &p).unwrap();
        let rx = bf.to_signal(1.0).received(&ch, 0).unwrap();
        let expect: f64 = (0..4).map(|n| p[n] * ch.h[n].norm_squared()).sum();
        let got: f64 = rx.c.iter().map(|c| c.norm_sqr()).sum();
        assert!((got - expect).abs() < 1e-14);

        let real = ChannelResponse::miso(g, &[vec![Complex64::new(0.5, 0.0), Complex64::new(2.0, 0.0)]]).unwrap();
        let bf = mrt(&real, &[1.0]).unwrap();
        assert!(bf.w[0].iter().all(|z| z.im == 0.0 && z.re > 0.0));

        let zero = ChannelResponse::miso(g, &[vec![Complex64::new(0.0, 0.0); 2]]).unwrap();
        assert!(matches!(mrt(&zero, &[1.0]), Err(WptError::ZeroChannel(0))));
    }

    #[test]
    fn mrt_beats_random_unit_beamformers() {
        let ch = rayleigh_iid(4, 1, &ToneGrid::with_tones(1, 1e6), 8).unwrap();
        let h = ch.row(0, 0);
        let nh = ch.h[0].norm();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let u = crate::numerics::random_unit_complex(&mut rng, 4);
            let v: Complex64 = h.iter().zip(&u).map(|(a, b)| a * b).sum();
            assert!(v.norm() <= nh + 1e-12);
        }
    }

    #[test]
    fn joint_design_reduces_and_dominates() {
        let m = EhTaylorModel::default();
        let cfg = SolverConfig::default();
        let ch1 = rayleigh_iid(1, 1, &ToneGrid::with_tones(3, 1e6), 4).unwrap();
        let a = joint_bf_waveform(&ch1, &m, 1e-4, &cfg).unwrap();
        let b = waveform::optimize_allocation(&ch1, &m, 1e-4, &cfg).unwrap();
        let va = rectenna::harvest(&m, &a.received(&ch1, 0).unwrap()).unwrap().v_out;
        let vb = rectenna::harvest(&m, &b.received(&ch1, 0).unwrap()).unwrap().v_out;
        assert!((va - vb).abs() <= 1e-12 * vb);

        let ch = rayleigh_iid(4, 1, &ToneGrid::with_tones(4, 1e6), 6).unwrap();
        let j = joint_bf_waveform(&ch, &m, 1e-4, &cfg).unwrap();
        let base = mrt(&ch, &[0.25e-4; 4]).unwrap().to_signal(1e-4);
        let vj = rectenna::harvest(&m, &j.received(&ch, 0).unwrap()).unwrap().v_out;
        let vb = rectenna::harvest(&m, &base.received(&ch, 0).unwrap()).unwrap().v_out;
        assert!(vj >= vb * (1.0 - 1e-12));
    }

    #[test]
    fn diversity_phases_ignore_channel() {
        assert_eq!(sweep_phases(2, 5, 3), sweep_phases(2, 5, 3));
        let m = EhTaylorModel::default();
        let a = transmit_diversity_eval(&m, 2, 50, 20, 1e-4, 9, Fading::Rayleigh).unwrap();
        let b = transmit_diversity_eval(&m, 2, 50, 20, 1e-4, 9, Fading::Rayleigh).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn diversity_second_moment_and_linear_model() {
        let p = 1e-4;
        let m4 = EhTaylorModel::default();
        let r = transmit_diversity_eval(&m4, 2, 2000, 64, p, 1, Fading::Rayleigh).unwrap();
        let diff: Vec<f64> = r.m2_td.iter().zip(&r.m2_single).map(|(a, b)| a - b).collect();
        let mean = diff.iter().sum::<f64>() / diff.len() as f64;
        let sd = (diff.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diff.len() as f64 - 1.0)).sqrt();
        assert!(mean.abs() <= 3.0 * sd / (diff.len() as f64).sqrt());

        let m2 = EhTaylorModel::with_order(2);
        let r = transmit_diversity_eval(&m2, 2, 2000, 64, p, 2, Fading::Rayleigh).unwrap();
        let diff: Vec<f64> = r.v_td.iter().zip(&r.v_single).map(|(a, b)| a - b).collect();
        let mean = diff.iter().sum::<f64>() / diff.len() as f64;
        let sd = (diff.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diff.len() as f64 - 1.0)).sqrt();
        assert!(mean.abs() <= 3.0 * sd / (diff.len() as f64).sqrt());
    }

    #[test]
    fn diversity_gain_on_static_channel() {
        let m = EhTaylorModel::default();
        let r = transmit_diversity_eval(&m, 2, 500, 256, 1e-4, 4, Fading::LineOfSight).unwrap();
        assert!(r.mean_v_out_td > r.mean_v_out_single);
    }
}
