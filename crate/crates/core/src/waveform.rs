//! Multisine waveform design: phase alignment, power allocation across tones
//! and the multi-user energy region.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beamforming;
use crate::channel::ChannelResponse;
use crate::error::{Result, WptError};
use crate::numerics::{self, SolverConfig};
use crate::rectenna::{self, EhTaylorModel};
pub use crate::signal::SignalSpec;

/// Per-user harvested DC power and the weights that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRegionPoint {
    pub p_dc: Vec<f64>,
    pub weights: Vec<f64>,
}

fn require_siso(channel: &ChannelResponse) -> Result<Vec<Complex64>> {
    channel.siso_gains()
}

/// Phases `φ_n = −arg h_n` that bring every received tone into phase.
pub fn optimal_phases(channel: &ChannelResponse) -> Result<Vec<f64>> {
    Ok(require_siso(channel)?.iter().map(|h| -h.arg()).collect())
}

fn argmax_lowest(a: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in a.iter().enumerate() {
        if *v > a[best] {
            best = i;
        }
    }
    best
}

/// Power split `s_n² ∝ A_n^{2β}` normalized to `Σ s_n² = P`; `β = ∞` puts
/// everything on the strongest tone.
pub fn smf_weights(a: &[f64], beta_exp: f64, p: f64) -> Result<Vec<f64>> {
    if !(beta_exp >= 0.0) {
        return Err(WptError::param("beta_exp", "must be >= 0"));
    }
    let amax = a.iter().cloned().fold(0.0, f64::max);
    if amax <= 0.0 {
        return Err(WptError::Degenerate("all channel amplitudes are zero".into()));
    }
    let w: Vec<f64> = if beta_exp.is_infinite() {
        let k = argmax_lowest(a);
        (0..a.len()).map(|n| if n == k { 1.0 } else { 0.0 }).collect()
    } else {
        a.iter().map(|x| (x / amax).powf(2.0 * beta_exp)).collect()
    };
    let total: f64 = w.iter().sum();
    Ok(w.iter().map(|x| (p * x / total).sqrt()).collect())
}

/// Scaled-matched-filter allocation with aligned phases.
pub fn smf_allocation(channel: &ChannelResponse, beta_exp: f64, p: f64) -> Result<SignalSpec> {
    let h = require_siso(channel)?;
    let a: Vec<f64> = h.iter().map(|z| z.norm()).collect();
    let s = smf_weights(&a, beta_exp, p)?;
    Ok(SignalSpec::siso(&s, &optimal_phases(channel)?, p))
}

/// Uniform allocation `s_n² = P/N` with aligned phases.
pub fn uniform_allocation(channel: &ChannelResponse, p: f64) -> Result<SignalSpec> {
    smf_allocation(channel, 0.0, p)
}

/// All power on the strongest tone.
pub fn single_tone_allocation(channel: &ChannelResponse, p: f64) -> Result<SignalSpec> {
    smf_allocation(channel, f64::INFINITY, p)
}

/// `v_out` of a phase-aligned multisine with amplitudes `s` over gains `a`.
pub fn aligned_v_out(model: &EhTaylorModel, a: &[f64], s: &[f64]) -> f64 {
    let u: Vec<Complex64> = a.iter().zip(s).map(|(a, s)| Complex64::new(a * s, 0.0)).collect();
    let m2: f64 = u.iter().map(|z| z.norm_sqr()).sum();
    let m4 = if model.order >= 4 { 1.5 * rectenna::balanced_quadruple_sum(&u) } else { 0.0 };
    model.beta(2) * m2 + model.beta(4) * m4
}

/// Normalized aligned objective `Σ u²a² + κ·Σ_k (Σ_{i+j=k} u_i a_i u_j a_j)²` and its gradient.
fn aligned_objective(a: &[f64], kappa: f64, u: &[f64]) -> (f64, Vec<f64>) {
    let n = a.len();
    let w: Vec<f64> = a.iter().zip(u).map(|(a, u)| a * u).collect();
    let mut s = vec![0.0; 2 * n - 1];
    for i in 0..n {
        for j in 0..n {
            s[i + j] += w[i] * w[j];
        }
    }
    let lin: f64 = w.iter().map(|x| x * x).sum();
    let quad: f64 = s.iter().map(|x| x * x).sum();
    let grad = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                acc += s[i + j] * w[j];
            }
            a[i] * (2.0 * w[i] + kappa * 4.0 * acc)
        })
        .collect();
    (lin + kappa * quad, grad)
}

/// Amplitudes `s ≥ 0`, `Σ s² ≤ P` maximizing the aligned `v_out` over gains `a`.
///
/// Starts from uniform, SMF with β ∈ {1, 3}, the strongest single tone and
/// `restarts` random points, so the result never falls below those baselines.
pub fn optimize_amplitudes(a: &[f64], model: &EhTaylorModel, p: f64, cfg: &SolverConfig) -> Result<Vec<f64>> {
    model.validate()?;
    cfg.validate()?;
    if a.is_empty() {
        return Err(WptError::Dimension("no tones".into()));
    }
    if !(p > 0.0) {
        return Err(WptError::param("P", "must be > 0"));
    }
    let amax = a.iter().cloned().fold(0.0, f64::max);
    if amax <= 0.0 {
        return Err(WptError::Degenerate("all channel amplitudes are zero".into()));
    }
    if model.order == 2 {
        return smf_weights(a, f64::INFINITY, p);
    }
    if model.order != 4 {
        return Err(WptError::Order(model.order));
    }
    let an: Vec<f64> = a.iter().map(|x| x / amax).collect();
    let kappa = 1.5 * model.beta(4) * p * amax * amax / model.beta(2);
    let f = |u: &[f64]| aligned_objective(&an, kappa, u);
    let project = |u: &mut [f64]| numerics::project_orthant_ball(u, 1.0);
    let sp = p.sqrt();
    let mut starts = Vec::new();
    for b in [0.0, 1.0, 3.0, f64::INFINITY] {
        starts.push(smf_weights(a, b, p)?.iter().map(|s| s / sp).collect::<Vec<f64>>());
    }
    let mut rng = cfg.rng(1);
    for _ in 0..cfg.restarts {
        starts.push((0..a.len()).map(|_| rng.gen::<f64>()).collect());
    }
    let out = numerics::best_of_starts(&f, &project, &starts, cfg)?;
    Ok(out.x.iter().map(|u| u * sp).collect())
}

/// Optimized single-antenna multisine for the Taylor model with `n_o = 4`.
pub fn optimize_allocation(channel: &ChannelResponse, model: &EhTaylorModel, p: f64, cfg: &SolverConfig) -> Result<SignalSpec> {
    let h = require_siso(channel)?;
    let a: Vec<f64> = h.iter().map(|z| z.norm()).collect();
    let s = optimize_amplitudes(&a, model, p, cfg)?;
    Ok(SignalSpec::siso(&s, &optimal_phases(channel)?, p))
}

/// `v_out` of each baseline and of the optimized waveform on a SISO channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyComparison {
    pub uniform: f64,
    pub smf1: f64,
    pub smf3: f64,
    pub single_tone: f64,
    pub optimized: f64,
}

pub fn compare_strategies(channel: &ChannelResponse, model: &EhTaylorModel, p: f64, cfg: &SolverConfig) -> Result<StrategyComparison> {
    let v = |s: &SignalSpec| -> Result<f64> { Ok(rectenna::harvest(model, &s.received(channel, 0)?)?.v_out) };
    Ok(StrategyComparison {
        uniform: v(&uniform_allocation(channel, p)?)?,
        smf1: v(&smf_allocation(channel, 1.0, p)?)?,
        smf3: v(&smf_allocation(channel, 3.0, p)?)?,
        single_tone: v(&single_tone_allocation(channel, p)?)?,
        optimized: v(&optimize_allocation(channel, model, p, cfg)?)?,
    })
}

// ---------------------------------------------------------------------------
// Multi-user energy region over deterministic space-frequency signals.

struct MultiUser<'a> {
    channels: &'a [ChannelResponse],
    model: &'a EhTaylorModel,
    m: usize,
    n: usize,
    p: f64,
}

impl<'a> MultiUser<'a> {
    fn new(channels: &'a [ChannelResponse], model: &'a EhTaylorModel, p: f64) -> Result<Self> {
        model.validate()?;
        if channels.is_empty() {
            return Err(WptError::Dimension("no users".into()));
        }
        if !(p > 0.0) {
            return Err(WptError::param("P", "must be > 0"));
        }
        let (m, n) = (channels[0].n_tx(), channels[0].n_tones());
        for (k, ch) in channels.iter().enumerate() {
            if ch.n_rx() != 1 {
                return Err(WptError::Shape(format!("user {k} has Q = {}", ch.n_rx())));
            }
            if ch.n_tx() != m || ch.n_tones() != n {
                return Err(WptError::Dimension(format!("user {k} channel shape differs")));
            }
        }
        if model.order > 4 {
            return Err(WptError::Order(model.order));
        }
        Ok(Self { channels, model, m, n, p })
    }

    fn unpack(&self, u: &[f64]) -> Vec<Complex64> {
        let sp = self.p.sqrt();
        (0..self.m * self.n).map(|i| Complex64::new(u[2 * i], u[2 * i + 1]) * sp).collect()
    }

    fn pack(&self, spec: &SignalSpec) -> Vec<f64> {
        let sp = self.p.sqrt();
        let mut u = vec![0.0; 2 * self.m * self.n];
        for m in 0..self.m {
            for n in 0..self.n {
                let i = m * self.n + n;
                u[2 * i] = spec.x[m][n].re / sp;
                u[2 * i + 1] = spec.x[m][n].im / sp;
            }
        }
        u
    }

    fn spec(&self, u: &[f64]) -> SignalSpec {
        let x = self.unpack(u);
        let rows = (0..self.m).map(|m| x[m * self.n..(m + 1) * self.n].to_vec()).collect();
        SignalSpec::deterministic(rows, self.p)
    }

    /// Per-user `P_dc` and its gradient with respect to the packed variables.
    fn user(&self, k: usize, x: &[Complex64]) -> (f64, Vec<f64>) {
        let ch = &self.channels[k];
        let (m_, n_) = (self.m, self.n);
        let c: Vec<Complex64> = (0..n_).map(|n| (0..m_).map(|m| ch.entry(n, 0, m) * x[m * n_ + n]).sum()).collect();
        let b2 = self.model.beta(2);
        let b4 = self.model.beta(4);
        let mut s = vec![Complex64::new(0.0, 0.0); 2 * n_ - 1];
        for i in 0..n_ {
            for j in 0..n_ {
                s[i + j] += c[i] * c[j];
            }
        }
        let m2: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        let m4 = 1.5 * s.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let v = b2 * m2 + b4 * m4;
        let pdc = v * v / self.model.load;
        // ∂v/∂c̄_j = β2 c_j + 3 β4 Σ_k S_k c̄_{k−j}
        let dv: Vec<Complex64> = (0..n_)
            .map(|j| {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 0..n_ {
                    acc += s[j + l] * c[l].conj();
                }
                c[j] * b2 + acc * (3.0 * b4)
            })
            .collect();
        let k = 2.0 * v / self.model.load;
        let sp = self.p.sqrt();
        let mut g = vec![0.0; 2 * m_ * n_];
        for m in 0..m_ {
            for n in 0..n_ {
                let z = ch.entry(n, 0, m).conj() * dv[n] * (2.0 * k * sp);
                let i = m * n_ + n;
                g[2 * i] = z.re;
                g[2 * i + 1] = z.im;
            }
        }
        (pdc, g)
    }

    fn energies(&self, u: &[f64]) -> Vec<f64> {
        let x = self.unpack(u);
        (0..self.channels.len()).map(|k| self.user(k, &x).0).collect()
    }

    fn single_user_starts(&self, cfg: &SolverConfig) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::new();
        for ch in self.channels {
            let spec = beamforming::joint_bf_waveform(ch, self.model, self.p, cfg)?;
            out.push(self.pack(&spec));
        }
        Ok(out)
    }

    fn random_starts(&self, cfg: &SolverConfig, count: usize) -> Vec<Vec<f64>> {
        let mut rng = cfg.rng(7);
        (0..count)
            .map(|_| {
                let mut u: Vec<f64> = (0..2 * self.m * self.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                numerics::project_ball(&mut u, 1.0);
                let nrm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                u.iter_mut().for_each(|v| *v /= nrm.max(1e-300));
                u
            })
            .collect()
    }
}

/// Maximize `Σ_k v_k·P_dc,k` over deterministic space-frequency signals.
pub fn weighted_sum_energy(
    channels: &[ChannelResponse],
    model: &EhTaylorModel,
    weights: &[f64],
    p: f64,
    cfg: &SolverConfig,
) -> Result<(SignalSpec, EnergyRegionPoint)> {
    cfg.validate()?;
    let mu = MultiUser::new(channels, model, p)?;
    if weights.len() != channels.len() || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(WptError::param("weights", "one nonnegative weight per user"));
    }
    let mut starts = mu.single_user_starts(cfg)?;
    let scale = starts
        .iter()
        .map(|u| mu.energies(u).iter().zip(weights).map(|(e, w)| e * w).sum::<f64>())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    starts.extend(mu.random_starts(cfg, cfg.restarts));
    let f = |u: &[f64]| {
        let x = mu.unpack(u);
        let mut val = 0.0;
        let mut grad = vec![0.0; u.len()];
        for (k, w) in weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let (e, g) = mu.user(k, &x);
            val += w * e;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += w * b);
        }
        (val / scale, grad.iter().map(|g| g / scale).collect())
    };
    let project = |u: &mut [f64]| numerics::project_ball(u, 1.0);
    let out = numerics::best_of_starts(&f, &project, &starts, cfg)?;
    let spec = mu.spec(&out.x);
    Ok((spec, EnergyRegionPoint { p_dc: mu.energies(&out.x), weights: weights.to_vec() }))
}

/// Best time-sharing value `max_k Σ_j v_j·P_dc,j(x_k)` where `x_k` is user `k`'s
/// single-user optimum transmitted at full power in its slot.
pub fn tdma_value(channels: &[ChannelResponse], model: &EhTaylorModel, weights: &[f64], p: f64, cfg: &SolverConfig) -> Result<f64> {
    let mu = MultiUser::new(channels, model, p)?;
    let mut best = 0.0f64;
    for u in mu.single_user_starts(cfg)? {
        let v: f64 = mu.energies(&u).iter().zip(weights).map(|(e, w)| e * w).sum();
        best = best.max(v);
    }
    Ok(best)
}

/// Maximize `min_k P_dc,k` through a log-sum-exp smoothed minimum with a
/// decreasing temperature schedule.
pub fn max_min_energy(
    channels: &[ChannelResponse],
    model: &EhTaylorModel,
    p: f64,
    cfg: &SolverConfig,
) -> Result<(SignalSpec, EnergyRegionPoint)> {
    cfg.validate()?;
    let k_users = channels.len();
    let equal = vec![1.0; k_users];
    let (ws_spec, _) = weighted_sum_energy(channels, model, &equal, p, cfg)?;
    let mu = MultiUser::new(channels, model, p)?;
    if k_users == 1 {
        let u = mu.pack(&ws_spec);
        return Ok((ws_spec, EnergyRegionPoint { p_dc: mu.energies(&u), weights: equal }));
    }
    let mut starts = vec![mu.pack(&ws_spec)];
    starts.extend(mu.single_user_starts(cfg)?);
    starts.extend(mu.random_starts(cfg, cfg.restarts));
    let scale = starts.iter().flat_map(|u| mu.energies(u)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let min_of = |u: &[f64]| mu.energies(u).into_iter().fold(f64::INFINITY, f64::min);

    let mut best_u = starts[0].clone();
    let mut best_min = min_of(&best_u);
    for x0 in &starts {
        let mut u = x0.clone();
        for temp in [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4] {
            let f = |v: &[f64]| {
                let x = mu.unpack(v);
                let parts: Vec<(f64, Vec<f64>)> = (0..k_users).map(|k| mu.user(k, &x)).collect();
                let e: Vec<f64> = parts.iter().map(|(e, _)| e / scale).collect();
                let emin = e.iter().cloned().fold(f64::INFINITY, f64::min);
                let w: Vec<f64> = e.iter().map(|ek| (-(ek - emin) / temp).exp()).collect();
                let z: f64 = w.iter().sum();
                let val = emin - temp * z.ln();
                let mut grad = vec![0.0; v.len()];
                for (k, (_, g)) in parts.iter().enumerate() {
                    let a = w[k] / z / scale;
                    grad.iter_mut().zip(g).for_each(|(d, gk)| *d += a * gk);
                }
                (val, grad)
            };
            let project = |v: &mut [f64]| numerics::project_ball(v, 1.0);
            let sub = SolverConfig { max_iters: cfg.max_iters.min(2000), ..*cfg };
            u = numerics::projected_ascent(&f, &project, &u, &sub)?.x;
        }
        let m = min_of(&u);
        if m > best_min {
            best_min = m;
            best_u = u;
        }
    }
    let e = mu.energies(&best_u);
    Ok((mu.spec(&best_u), EnergyRegionPoint { p_dc: e, weights: vec![] }))
}

/// Per-user `P_dc` of a deterministic signal.
pub fn user_energies(channels: &[ChannelResponse], model: &EhTaylorModel, spec: &SignalSpec) -> Result<Vec<f64>> {
    channels.iter().map(|ch| Ok(rectenna::harvest(model, &spec.received(ch, 0)?)?.p_dc)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{rayleigh_iid, ToneGrid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn siso(h: &[Complex64]) -> ChannelResponse {
        ChannelResponse::siso(ToneGrid::with_tones(h.len(), 1e6), h).unwrap()
    }

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn phases_examples() {
        let ch = siso(&[Complex64::new(1.0, 0.0), Complex64::new(0.3, 0.0)]);
        assert_eq!(optimal_phases(&ch).unwrap(), vec![0.0, 0.0]);
        let ch = siso(&[Complex64::from_polar(1.0, std::f64::consts::PI / 3.0)]);
        assert!((optimal_phases(&ch).unwrap()[0] + std::f64::consts::PI / 3.0).abs() < 1e-15);
        let ch = rayleigh_iid(1, 1, &ToneGrid::with_tones(6, 1e6), 3).unwrap();
        let spec = smf_allocation(&ch, 1.0, 1.0).unwrap();
        for c in spec.received(&ch, 0).unwrap().c {
            assert!(c.im.abs() < 1e-15 && c.re >= 0.0);
        }
    }

    #[test]
    fn smf_examples() {
        let ch = siso(&[Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0), Complex64::new(1.0, 0.0)]);
        let u = smf_allocation(&ch, 0.0, 3.0).unwrap();
        assert!(u.tone_powers().iter().all(|p| (p - 1.0).abs() < 1e-12));
        let st = smf_allocation(&ch, f64::INFINITY, 3.0).unwrap();
        let tp = st.tone_powers();
        assert!((tp[0] - 3.0).abs() < 1e-12 && tp[1] == 0.0 && tp[2] == 0.0);
        let flat = siso(&[Complex64::new(0.7, 0.0); 4]);
        let f = smf_allocation(&flat, 2.5, 1.0).unwrap();
        assert!(f.tone_powers().iter().all(|p| (p - 0.25).abs() < 1e-12));
        assert!(smf_allocation(&siso(&[Complex64::new(0.0, 0.0); 2]), 1.0, 1.0).is_err());
    }

    #[test]
    fn allocation_single_tone_and_flat() {
        let m = EhTaylorModel::default();
        let ch = siso(&[Complex64::new(0.4, 0.2)]);
        let s = optimize_allocation(&ch, &m, 1e-4, &cfg()).unwrap();
        assert!((s.tone_powers()[0] - 1e-4).abs() < 1e-15);

        let flat = siso(&[Complex64::new(1.0, 0.0); 4]);
        let c = compare_strategies(&flat, &m, 1e-4, &cfg()).unwrap();
        assert!(c.optimized >= c.uniform * (1.0 - 1e-12));
        let s = optimize_amplitudes(&[1.0; 4], &m, 1e-4, &cfg()).unwrap();
        assert!((s[0] - s[3]).abs() < 1e-6 * s[0] && (s[1] - s[2]).abs() < 1e-6 * s[1]);
    }

    #[test]
    fn allocation_two_tone_grid_oracle() {
        let m = EhTaylorModel::default();
        let p = 1e-4;
        let ch = siso(&[Complex64::new(0.9, 0.1), Complex64::new(-0.2, 0.6)]);
        let a: Vec<f64> = ch.siso_gains().unwrap().iter().map(|z| z.norm()).collect();
        let s = optimize_amplitudes(&a, &m, p, &cfg()).unwrap();
        let v = aligned_v_out(&m, &a, &s);
        let mut best = 0.0f64;
        for i in 0..200 {
            for j in 0..200 {
                let (x, y) = (i as f64 / 199.0, j as f64 / 199.0);
                if x * x + y * y <= 1.0 {
                    best = best.max(aligned_v_out(&m, &a, &[x * p.sqrt(), y * p.sqrt()]));
                }
            }
        }
        assert!(v >= best * (1.0 - 1e-4));
    }

    #[test]
    fn linear_model_picks_strongest_tone() {
        let m = EhTaylorModel::with_order(2);
        let ch = siso(&[Complex64::new(0.3, 0.0), Complex64::new(0.0, 0.9), Complex64::new(-0.9, 0.0)]);
        let s = optimize_allocation(&ch, &m, 1.0, &cfg()).unwrap();
        assert_eq!(s.tone_powers(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn global_phase_invariance_and_budget() {
        let m = EhTaylorModel::default();
        let ch = rayleigh_iid(1, 1, &ToneGrid::with_tones(4, 1e6), 9).unwrap();
        let rot = ch.scaled(Complex64::from_polar(1.0, 1.1));
        let a = optimize_allocation(&ch, &m, 1e-4, &cfg()).unwrap();
        let b = optimize_allocation(&rot, &m, 1e-4, &cfg()).unwrap();
        let va = rectenna::harvest(&m, &a.received(&ch, 0).unwrap()).unwrap().v_out;
        let vb = rectenna::harvest(&m, &b.received(&rot, 0).unwrap()).unwrap().v_out;
        assert!((va - vb).abs() <= 1e-9 * va);
        assert!(a.transmit_power() <= 1e-4 + 1e-12);
    }

    #[test]
    fn multi_user_gradient_matches_finite_difference() {
        let m = EhTaylorModel::default();
        let g = ToneGrid::with_tones(2, 1e6);
        let chs = vec![rayleigh_iid(2, 1, &g, 1).unwrap()];
        let mu = MultiUser::new(&chs, &m, 1e-4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u: Vec<f64> = (0..8).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let (_, grad) = mu.user(0, &mu.unpack(&u));
        for i in 0..8 {
            let h = 1e-6;
            let mut up = u.clone();
            up[i] += h;
            let mut dn = u.clone();
            dn[i] -= h;
            let fd = (mu.user(0, &mu.unpack(&up)).0 - mu.user(0, &mu.unpack(&dn)).0) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-5 * grad.iter().map(|x| x.abs()).fold(0.0, f64::max));
        }
    }

    #[test]
    fn weighted_sum_single_user_reduces() {
        let m = EhTaylorModel::default();
        let g = ToneGrid::with_tones(2, 1e6);
        let ch = rayleigh_iid(2, 1, &g, 5).unwrap();
        let (_, pt) = weighted_sum_energy(std::slice::from_ref(&ch), &m, &[1.0], 1e-4, &cfg()).unwrap();
        let joint = beamforming::joint_bf_waveform(&ch, &m, 1e-4, &cfg()).unwrap();
        let pj = rectenna::harvest(&m, &joint.received(&ch, 0).unwrap()).unwrap().p_dc;
        assert!((pt.p_dc[0] - pj).abs() <= 1e-6 * pj);
    }

    #[test]
    fn weighted_sum_symmetric_and_tdma() {
        let m = EhTaylorModel::default();
        let g = ToneGrid::with_tones(2, 1e6);
        let ch = rayleigh_iid(2, 1, &g, 12).unwrap();
        let chs = vec![ch.clone(), ch];
        let (_, pt) = weighted_sum_energy(&chs, &m, &[1.0, 1.0], 1e-4, &cfg()).unwrap();
        assert!((pt.p_dc[0] - pt.p_dc[1]).abs() < 1e-6 * pt.p_dc[0]);

        let chs = vec![rayleigh_iid(2, 1, &g, 13).unwrap(), rayleigh_iid(2, 1, &g, 14).unwrap()];
        let (_, pt) = weighted_sum_energy(&chs, &m, &[1.0, 1.0], 1e-4, &cfg()).unwrap();
        let tdma = tdma_value(&chs, &m, &[1.0, 1.0], 1e-4, &cfg()).unwrap();
        assert!(pt.p_dc.iter().sum::<f64>() >= tdma * (1.0 - 1e-12));
    }

    #[test]
    fn max_min_properties() {
        let m = EhTaylorModel::default();
        let g = ToneGrid::with_tones(2, 1e6);
        let ch = rayleigh_iid(2, 1, &g, 21).unwrap();
        let (_, one) = max_min_energy(std::slice::from_ref(&ch), &m, 1e-4, &cfg()).unwrap();
        let (_, ws) = weighted_sum_energy(std::slice::from_ref(&ch), &m, &[1.0], 1e-4, &cfg()).unwrap();
        assert!((one.p_dc[0] - ws.p_dc[0]).abs() <= 1e-9 * ws.p_dc[0]);

        let same = vec![ch.clone(), ch];
        let (_, mm) = max_min_energy(&same, &m, 1e-4, &cfg()).unwrap();
        assert!((mm.p_dc[0] - mm.p_dc[1]).abs() <= 1e-6 * mm.p_dc[0]);

        let asym = vec![rayleigh_iid(2, 1, &g, 31).unwrap(), rayleigh_iid(2, 1, &g, 32).unwrap().scaled(Complex64::new(0.5, 0.0))];
        let (_, mm) = max_min_energy(&asym, &m, 1e-4, &cfg()).unwrap();
        let (_, ws) = weighted_sum_energy(&asym, &m, &[1.0, 1.0], 1e-4, &cfg()).unwrap();
        let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min(&mm.p_dc) >= min(&ws.p_dc) * (1.0 - 1e-9));
    }
}
