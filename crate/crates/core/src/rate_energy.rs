//! Rate-energy tradeoffs: mutual information of single-subband inputs,
//! harvested power per input law, receiver architectures, and the
//! multi-carrier Gaussian frontier.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelResponse, ToneGrid};
use crate::error::{Result, WptError};
use crate::irs::{self, IrsLinks};
use crate::numerics::{self, SolverConfig};
use crate::rectenna::{self, EhTaylorModel, ReceivedSignal};
use crate::signal::InputDistribution;
use crate::waveform;

const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Receiver architecture that produced a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Receiver {
    Ideal,
    Ts { tau: f64 },
    Ps { rho: f64 },
}

/// One achievable `(rate, energy)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RePoint {
    /// Bits per channel use.
    pub rate: f64,
    /// Harvested DC power in watts.
    pub energy: f64,
    pub receiver: Receiver,
    pub dist: InputDistribution,
}

impl RePoint {
    /// Short label of the swept parameter, used in the CSV `param` column.
    pub fn param_label(&self) -> String {
        match self.receiver {
            Receiver::Ts { tau } => format!("tau={tau}"),
            Receiver::Ps { rho } => format!("rho={rho}"),
            Receiver::Ideal => match &self.dist {
                InputDistribution::AsymGaussian { p_r, .. } => format!("p_r={p_r}"),
                InputDistribution::OnOff { l, .. } => format!("l={l}"),
                InputDistribution::Mixture { p_ts, l, .. } => format!("p_ts={p_ts};l={l}"),
                _ => String::new(),
            },
        }
    }

    fn receiver_label(&self) -> &'static str {
        match self.receiver {
            Receiver::Ideal => "ideal",
            Receiver::Ts { .. } => "ts",
            Receiver::Ps { .. } => "ps",
        }
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// `ln p(y)` for a ring of radius `r` (uniform phase) in CN(0, σ²) noise.
fn ln_ring_density(y: f64, r: f64, s2: f64) -> f64 {
    let z = 2.0 * r * y / s2;
    numerics::bessel_i0e(z).ln() - (y - r).powi(2) / s2 - (std::f64::consts::PI * s2).ln()
}

/// Output entropy `h(y)` in nats for a finite mixture of received components,
/// each either a point `s` or a ring of radius `|s|`.
fn output_entropy(components: &[(f64, Complex64, bool)], s2: f64, nodes: usize) -> f64 {
    let (x, w) = numerics::gauss_hermite(nodes);
    let sd = s2.sqrt();
    let ln_pi_s2 = (std::f64::consts::PI * s2).ln();
    let ln_p = |y: Complex64| -> f64 {
        let terms: Vec<f64> = components
            .iter()
            .filter(|c| c.0 > 0.0)
            .map(|&(p, s, ring)| {
                if ring {
                    p.ln() + ln_ring_density(y.norm(), s.norm(), s2)
                } else {
                    p.ln() - (y - s).norm_sqr() / s2 - ln_pi_s2
                }
            })
            .collect();
        log_sum_exp(&terms)
    };
    let mut h = 0.0;
    for &(p, s, _) in components.iter().filter(|c| c.0 > 0.0) {
        let mut acc = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            for (xj, wj) in x.iter().zip(&w) {
                acc += wi * wj * ln_p(s + Complex64::new(sd * xi, sd * xj));
            }
        }
        h -= p * acc / std::f64::consts::PI;
    }
    h
}

fn discrete_information(components: &[(f64, Complex64, bool)], s2: f64) -> Result<f64> {
    let noise = 1.0 + (std::f64::consts::PI * s2).ln();
    let coarse = (output_entropy(components, s2, 48) - noise) * LOG2_E;
    let fine = (output_entropy(components, s2, 64) - noise) * LOG2_E;
    if !fine.is_finite() || (fine - coarse).abs() > 1e-5 * fine.abs().max(1.0) {
        return Err(WptError::Quadrature(format!("entropy did not settle: {coarse} vs {fine}")));
    }
    Ok(fine.max(0.0))
}

/// `I(x; y)` in bits for `y = h·x + n`, `n ~ CN(0, σ²)`.
pub fn mutual_information(dist: &InputDistribution, h: Complex64, noise_var: f64) -> Result<f64> {
    dist.validate()?;
    if !(noise_var > 0.0) {
        return Err(WptError::param("noise_var", "must be > 0"));
    }
    let g = h.norm_sqr() / noise_var;
    let half = |p: f64| 0.5 * (1.0 + 2.0 * p.max(0.0) * g).log2();
    let rate = match dist {
        InputDistribution::Cw { .. } => 0.0,
        InputDistribution::Cscg { power } => (1.0 + power * g).log2(),
        InputDistribution::RealGaussian { power } => half(*power),
        InputDistribution::AsymGaussian { p_r, p_i, mu_r, mu_i } => half(p_r - mu_r * mu_r) + half(p_i - mu_i * mu_i),
        InputDistribution::OnOff { l, power } => {
            if h.norm() == 0.0 || *power == 0.0 {
                0.0
            } else {
                let q = 1.0 / (l * l);
                let r = h * (l * power.sqrt());
                discrete_information(&[(1.0 - q, Complex64::new(0.0, 0.0), false), (q, r, true)], noise_var)?
            }
        }
        InputDistribution::Mixture { p_ts, l, power } => {
            p_ts * mutual_information(&InputDistribution::OnOff { l: *l, power: *power }, h, noise_var)?
                + (1.0 - p_ts) * mutual_information(&InputDistribution::Cscg { power: *power }, h, noise_var)?
        }
        InputDistribution::Constellation { points, probs } => {
            let comps: Vec<(f64, Complex64, bool)> = points.iter().zip(probs).map(|(s, p)| (*p, h * s, false)).collect();
            discrete_information(&comps, noise_var)?
        }
    };
    Ok(rate)
}

/// Monte Carlo estimate of `h(y) − log2(πeσ²)` for cross-checking the quadrature.
pub fn mutual_information_mc(dist: &InputDistribution, h: Complex64, noise_var: f64, samples: usize, seed: u64) -> Result<f64> {
    dist.validate()?;
    let comps: Vec<(f64, Complex64, bool)> = match dist {
        InputDistribution::OnOff { l, power } => {
            let q = 1.0 / (l * l);
            vec![(1.0 - q, Complex64::new(0.0, 0.0), false), (q, h * (l * power.sqrt()), true)]
        }
        InputDistribution::Constellation { points, probs } => points.iter().zip(probs).map(|(s, p)| (*p, h * s, false)).collect(),
        _ => return Err(WptError::Unsupported("Monte Carlo entropy is implemented for discrete inputs".into())),
    };
    let s2 = noise_var;
    let ln_pi_s2 = (std::f64::consts::PI * s2).ln();
    let cfg = SolverConfig::with_seed(seed);
    let chunks = 64usize;
    let per = samples.div_ceil(chunks);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = cfg.rng(c as u64);
            let mut acc = 0.0;
            for _ in 0..per {
                let x = dist.sample(&mut rng) * h;
                let y = x + crate::channel::cn01(&mut rng) * s2.sqrt();
                let terms: Vec<f64> = comps
                    .iter()
                    .filter(|c| c.0 > 0.0)
                    .map(|&(p, s, ring)| {
                        if ring {
                            p.ln() + ln_ring_density(y.norm(), s.norm(), s2)
                        } else {
                            p.ln() - (y - s).norm_sqr() / s2 - ln_pi_s2
                        }
                    })
                    .collect();
                acc -= log_sum_exp(&terms);
            }
            acc
        })
        .collect();
    let hy = partial.iter().sum::<f64>() / (per * chunks) as f64;
    Ok((hy - 1.0 - ln_pi_s2) * LOG2_E)
}

/// Harvested DC power of a single-subband input through gain `h`. A
/// time-sharing mixture averages the DC power of its two phases.
pub fn energy_of_distribution(model: &EhTaylorModel, dist: &InputDistribution, h: Complex64) -> Result<f64> {
    dist.validate()?;
    if let InputDistribution::Mixture { p_ts, l, power } = dist {
        let on = energy_of_distribution(model, &InputDistribution::OnOff { l: *l, power: *power }, h)?;
        let cs = energy_of_distribution(model, &InputDistribution::Cscg { power: *power }, h)?;
        return Ok(p_ts * on + (1.0 - p_ts) * cs);
    }
    Ok(rectenna::harvest(model, &ReceivedSignal::single(h, dist.clone()))?.p_dc)
}

/// Parametric single-subband input families swept by [`re_sweep_ideal`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReFamily {
    /// Zero-mean `Re`/`Im` powers `(P_r, P − P_r)` with `P_r` on a uniform grid of `points`.
    AsymGaussian { power: f64, points: usize },
    OnOff { power: f64, l: Vec<f64> },
    /// Time sharing between CSCG and on-off over the product grid.
    Mixture { power: f64, p_ts: Vec<f64>, l: Vec<f64> },
}

impl ReFamily {
    pub fn members(&self) -> Result<Vec<InputDistribution>> {
        let out = match self {
            ReFamily::AsymGaussian { power, points } => {
                if *points < 2 {
                    return Err(WptError::param("points", "must be >= 2"));
                }
                (0..*points)
                    .map(|k| {
                        let p_r = power * k as f64 / (*points - 1) as f64;
                        InputDistribution::AsymGaussian { p_r, p_i: power - p_r, mu_r: 0.0, mu_i: 0.0 }
                    })
                    .collect()
            }
            ReFamily::OnOff { power, l } => l.iter().map(|&l| InputDistribution::OnOff { l, power: *power }).collect(),
            ReFamily::Mixture { power, p_ts, l } => p_ts
                .iter()
                .flat_map(|&t| l.iter().map(move |&l| InputDistribution::Mixture { p_ts: t, l, power: *power }))
                .collect(),
        };
        Ok(out)
    }
}

/// Upper-right Pareto frontier, sorted by increasing energy (and so nonincreasing rate).
pub fn pareto_frontier(points: &[RePoint]) -> Vec<RePoint> {
    let mut sorted: Vec<&RePoint> = points.iter().collect();
    sorted.sort_by(|a, b| b.energy.total_cmp(&a.energy).then(b.rate.total_cmp(&a.rate)));
    let mut out: Vec<RePoint> = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for p in sorted {
        if p.rate > best {
            best = p.rate;
            out.push(p.clone());
        }
    }
    out.reverse();
    out
}

/// Largest frontier rate among points with energy at least `target`.
pub fn rate_at_energy(frontier: &[RePoint], target: f64) -> Option<f64> {
    frontier.iter().filter(|p| p.energy >= target).map(|p| p.rate).fold(None, |m, r| Some(m.map_or(r, |m: f64| m.max(r))))
}

/// Ideal-receiver `(rate, energy)` for every member of `family`.
pub fn re_sweep_ideal(model: &EhTaylorModel, family: &ReFamily, h: Complex64, noise_var: f64) -> Result<Vec<RePoint>> {
    model.validate()?;
    family
        .members()?
        .into_par_iter()
        .map(|dist| {
            Ok(RePoint {
                rate: mutual_information(&dist, h, noise_var)?,
                energy: energy_of_distribution(model, &dist, h)?,
                receiver: Receiver::Ideal,
                dist,
            })
        })
        .collect()
}

/// Practical receiver kind for [`re_sweep_receiver`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverKind {
    Ts,
    Ps,
}

/// Time switching or power splitting over a uniform grid of `points` values of `τ` or `ρ`.
///
/// TS decodes `info` for a fraction `1 − τ` and harvests `energy` for `τ`.
/// PS splits the `info` signal, adding the noise after the splitter.
pub fn re_sweep_receiver(
    model: &EhTaylorModel,
    info: &InputDistribution,
    energy: &InputDistribution,
    h: Complex64,
    noise_var: f64,
    kind: ReceiverKind,
    points: usize,
) -> Result<Vec<RePoint>> {
    model.validate()?;
    if points < 2 {
        return Err(WptError::param("points", "must be >= 2"));
    }
    let grid: Vec<f64> = (0..points).map(|k| k as f64 / (points - 1) as f64).collect();
    match kind {
        ReceiverKind::Ts => {
            let r = mutual_information(info, h, noise_var)?;
            let e = energy_of_distribution(model, energy, h)?;
            Ok(grid
                .iter()
                .map(|&tau| RePoint {
                    rate: (1.0 - tau) * r,
                    energy: tau * e,
                    receiver: Receiver::Ts { tau },
                    dist: if tau == 1.0 { energy.clone() } else { info.clone() },
                })
                .collect())
        }
        ReceiverKind::Ps => grid
            .into_par_iter()
            .map(|rho| {
                Ok(RePoint {
                    rate: mutual_information(info, h * (1.0 - rho).sqrt(), noise_var)?,
                    energy: energy_of_distribution(model, info, h * rho.sqrt())?,
                    receiver: Receiver::Ps { rho },
                    dist: info.clone(),
                })
            })
            .collect(),
    }
}

/// Per-tone nonzero-mean Gaussian input in the frame aligned with `h_n`:
/// `Re ~ N(mu_r, p_r − mu_r²)`, `Im ~ N(mu_i, p_i − mu_i²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ToneInput {
    pub mu_r: f64,
    pub mu_i: f64,
    pub p_r: f64,
    pub p_i: f64,
}

impl ToneInput {
    pub fn power(&self) -> f64 {
        self.p_r + self.p_i
    }

    /// The same input as a symbol law.
    pub fn distribution(&self) -> InputDistribution {
        InputDistribution::AsymGaussian { p_r: self.p_r, p_i: self.p_i, mu_r: self.mu_r, mu_i: self.mu_i }
    }
}

/// Gaussian input class allowed in the multi-carrier design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GaussianClass {
    /// Nonzero means and unequal `Re`/`Im` variances.
    #[default]
    Asymmetric,
    /// Nonzero means with equal `Re`/`Im` variances.
    SymmetricMean,
    /// Zero-mean circularly symmetric.
    ZeroMean,
}

/// One frontier point of the multi-carrier design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticarrierPoint {
    pub target: f64,
    pub rate: f64,
    pub energy: f64,
    pub tones: Vec<ToneInput>,
}

/// `Σ_n ½log2(1 + 2v_nr a_n/σ²) + ½log2(1 + 2v_ni a_n/σ²)` with `a_n = |h_n|²`.
pub fn multicarrier_rate(a: &[f64], tones: &[ToneInput], noise_var: f64) -> f64 {
    a.iter()
        .zip(tones)
        .map(|(a, t)| {
            let vr = (t.p_r - t.mu_r * t.mu_r).max(0.0);
            let vi = (t.p_i - t.mu_i * t.mu_i).max(0.0);
            0.5 * (1.0 + 2.0 * vr * a / noise_var).log2() + 0.5 * (1.0 + 2.0 * vi * a / noise_var).log2()
        })
        .sum()
}

/// Closed-form `(m2, m4)` and their gradients for per-tone inputs in the
/// channel-aligned frame with amplitudes `g_n = |h_n|`.
///
/// Inputs are `(μ_r, μ_i, v_r, v_i)` per tone; gradients follow the same layout.
fn gaussian_multisine_moments(g: &[f64], z: &[[f64; 4]]) -> (f64, f64, Vec<[f64; 4]>, Vec<[f64; 4]>) {
    let n = g.len();
    let d: Vec<Complex64> = g.iter().zip(z).map(|(g, z)| Complex64::new(g * z[0], g * z[1])).collect();
    let q: Vec<f64> = g.iter().zip(z).map(|(g, z)| g * g * (z[2] + z[3])).collect();
    let r: Vec<f64> = g.iter().zip(z).map(|(g, z)| g * g * (z[2] - z[3])).collect();
    let qs: f64 = q.iter().sum();
    let s: f64 = d.iter().map(|x| x.norm_sqr()).sum();
    let mut c = vec![Complex64::new(0.0, 0.0); 2 * n - 1];
    for i in 0..n {
        for j in 0..n {
            c[i + j] += d[i] * d[j];
        }
    }
    let b: f64 = c.iter().map(|x| x.norm_sqr()).sum();
    let t: f64 = (0..n).map(|k| r[k] * c[2 * k].re).sum();
    let r2: f64 = r.iter().map(|x| x * x).sum();
    let m2 = s + qs;
    let m4 = 1.5 * b + 6.0 * qs * s + 3.0 * t + 3.0 * qs * qs + 1.5 * r2;

    let mut dm2 = vec![[0.0; 4]; n];
    let mut dm4 = vec![[0.0; 4]; n];
    for j in 0..n {
        // Gradients with respect to (Re d_j, Im d_j), packed as a complex number.
        let mut gb = Complex64::new(0.0, 0.0);
        let mut gt = Complex64::new(0.0, 0.0);
        for l in 0..n {
            gb += c[j + l] * d[l].conj();
            if (j + l) % 2 == 0 {
                gt += d[l] * r[(j + l) / 2];
            }
        }
        let gd = gb * 4.0 * 1.5 + d[j] * (2.0 * 6.0 * qs) + gt.conj() * (2.0 * 3.0);
        dm4[j][0] = g[j] * gd.re;
        dm4[j][1] = g[j] * gd.im;
        let dq = 6.0 * s + 6.0 * qs;
        let dr = 3.0 * c[2 * j].re + 3.0 * r[j];
        let a2 = g[j] * g[j];
        dm4[j][2] = a2 * (dq + dr);
        dm4[j][3] = a2 * (dq - dr);
        dm2[j] = [2.0 * a2 * z[j][0], 2.0 * a2 * z[j][1], a2, a2];
    }
    (m2, m4, dm2, dm4)
}

/// DC power of per-tone Gaussian inputs (aligned frame) over gains `g_n = |h_n|`.
pub fn multicarrier_energy(model: &EhTaylorModel, g: &[f64], tones: &[ToneInput]) -> f64 {
    let z: Vec<[f64; 4]> = tones
        .iter()
        .map(|t| [t.mu_r, t.mu_i, (t.p_r - t.mu_r * t.mu_r).max(0.0), (t.p_i - t.mu_i * t.mu_i).max(0.0)])
        .collect();
    let (m2, m4, _, _) = gaussian_multisine_moments(g, &z);
    model.p_dc(model.beta(2) * m2 + model.beta(4) * m4)
}

/// Symmetric water-filling `p_n = (ν − σ²/a_n)⁺` with `Σ p_n = P`.
pub fn water_filling(a: &[f64], noise_var: f64, p: f64, cfg: &SolverConfig) -> Result<Vec<f64>> {
    if a.iter().all(|x| *x <= 0.0) {
        return Err(WptError::Degenerate("all channel gains are zero".into()));
    }
    let alloc = |nu: f64| -> Vec<f64> { a.iter().map(|&x| if x > 0.0 { (nu - noise_var / x).max(0.0) } else { 0.0 }).collect() };
    let floor = a.iter().filter(|x| **x > 0.0).map(|x| noise_var / x).fold(f64::INFINITY, f64::min);
    let ceil = a.iter().filter(|x| **x > 0.0).map(|x| noise_var / x).fold(0.0, f64::max) + p;
    let nu = numerics::bisect(|nu| alloc(nu).iter().sum::<f64>() - p, floor, ceil, cfg)?;
    let mut out = alloc(nu);
    let s: f64 = out.iter().sum();
    if s > 0.0 {
        out.iter_mut().for_each(|x| *x *= p / s);
    }
    Ok(out)
}

fn tones_from_params(x: &[f64], p: f64) -> Vec<ToneInput> {
    let sp = p.sqrt();
    x.chunks(4)
        .map(|c| {
            let (mr, mi) = (c[0] * sp, c[1] * sp);
            let (vr, vi) = (c[2] * c[2] * p, c[3] * c[3] * p);
            ToneInput { mu_r: mr, mu_i: mi, p_r: vr + mr * mr, p_i: vi + mi * mi }
        })
        .collect()
}

fn params_from_tones(t: &[ToneInput], p: f64) -> Vec<f64> {
    let sp = p.sqrt();
    t.iter()
        .flat_map(|t| {
            [
                t.mu_r / sp,
                t.mu_i / sp,
                ((t.p_r - t.mu_r * t.mu_r).max(0.0) / p).sqrt(),
                ((t.p_i - t.mu_i * t.mu_i).max(0.0) / p).sqrt(),
            ]
        })
        .collect()
}

fn project_class(x: &mut [f64], class: GaussianClass) {
    for c in x.chunks_mut(4) {
        if class == GaussianClass::ZeroMean {
            c[0] = 0.0;
            c[1] = 0.0;
        }
        c[2] = c[2].max(0.0);
        c[3] = c[3].max(0.0);
        if class != GaussianClass::Asymmetric {
            let v = 0.5 * (c[2] * c[2] + c[3] * c[3]);
            let w = v.sqrt();
            c[2] = w;
            c[3] = w;
        }
    }
    numerics::project_ball(x, 1.0);
}

/// Rate-energy frontier of per-tone Gaussian inputs on a SISO channel.
///
/// Targets that no start can reach within 0.1% are reported as infeasible.
/// Each target `Ē` is met by a quadratic penalty on `1 − v_out/v̄` with an
/// increasing weight, solved by projected gradient from several starts. The
/// parametrization uses standard deviations so that the power constraint is
/// a ball. Targets at or below the water-filling energy return water-filling.
pub fn re_multicarrier_gaussian(
    model: &EhTaylorModel,
    channel: &ChannelResponse,
    noise_var: f64,
    p: f64,
    targets: &[f64],
    class: GaussianClass,
    cfg: &SolverConfig,
) -> Result<Vec<MulticarrierPoint>> {
    model.validate()?;
    cfg.validate()?;
    if model.order != 4 {
        return Err(WptError::Order(model.order));
    }
    if channel.n_tones() < 2 {
        return Err(WptError::param("n_tones", "the multi-carrier design needs N >= 2"));
    }
    if !(noise_var > 0.0) || !(p > 0.0) {
        return Err(WptError::param("noise_var", "noise variance and power must be > 0"));
    }
    let h = channel.siso_gains()?;
    let g: Vec<f64> = h.iter().map(|z| z.norm()).collect();
    let a: Vec<f64> = g.iter().map(|x| x * x).collect();
    let n = g.len();

    let wf = water_filling(&a, noise_var, p, cfg)?;
    let wf_tones: Vec<ToneInput> = wf.iter().map(|q| ToneInput { mu_r: 0.0, mu_i: 0.0, p_r: q / 2.0, p_i: q / 2.0 }).collect();
    let wf_rate = multicarrier_rate(&a, &wf_tones, noise_var);
    let wf_energy = multicarrier_energy(model, &g, &wf_tones);

    let det_amp = waveform::optimize_amplitudes(&g, model, p, cfg)?;
    let det_tones: Vec<ToneInput> =
        det_amp.iter().map(|s| ToneInput { mu_r: *s, mu_i: 0.0, p_r: s * s, p_i: 0.0 }).collect();
    let e_max = multicarrier_energy(model, &g, &det_tones);

    let beta2 = model.beta(2);
    let beta4 = model.beta(4);
    let rate_scale = wf_rate.max(1e-12);
    let mut out = Vec::with_capacity(targets.len());
    for &target in targets {
        if !(target >= 0.0) {
            return Err(WptError::param("E_targets", "targets must be >= 0"));
        }
        if target <= wf_energy {
            out.push(MulticarrierPoint { target, rate: wf_rate, energy: wf_energy, tones: wf_tones.clone() });
            continue;
        }
        let v_target = (target * model.load).sqrt();
        let objective = |x: &[f64], weight: f64| -> (f64, Vec<f64>) {
            let z: Vec<[f64; 4]> = x
                .chunks(4)
                .map(|c| [c[0] * p.sqrt(), c[1] * p.sqrt(), c[2] * c[2] * p, c[3] * c[3] * p])
                .collect();
            let (m2, m4, dm2, dm4) = gaussian_multisine_moments(&g, &z);
            let v = beta2 * m2 + beta4 * m4;
            let short = 1.0 - v / v_target;
            let mut rate = 0.0;
            let mut grad = vec![0.0; 4 * n];
            for k in 0..n {
                let s = 2.0 * a[k] / noise_var;
                let (vr, vi) = (z[k][2], z[k][3]);
                rate += 0.5 * ((1.0 + s * vr).log2() + (1.0 + s * vi).log2());
                let dr_dvr = 0.5 * LOG2_E * s / (1.0 + s * vr);
                let dr_dvi = 0.5 * LOG2_E * s / (1.0 + s * vi);
                let pen = if short > 0.0 { weight * short / v_target } else { 0.0 };
                let dv = |i: usize| beta2 * dm2[k][i] + beta4 * dm4[k][i];
                let chain = [p.sqrt(), p.sqrt(), 2.0 * x[4 * k + 2] * p, 2.0 * x[4 * k + 3] * p];
                let dobj = [pen * dv(0), pen * dv(1), dr_dvr / rate_scale + pen * dv(2), dr_dvi / rate_scale + pen * dv(3)];
                for i in 0..4 {
                    grad[4 * k + i] = dobj[i] * chain[i];
                }
            }
            let val = rate / rate_scale - 0.5 * weight * short.max(0.0).powi(2);
            (val, grad)
        };
        let project = |x: &mut [f64]| project_class(x, class);
        let mut starts: Vec<Vec<f64>> = Vec::new();
        for frac in [0.9f64, 0.5, 0.1] {
            let t: Vec<ToneInput> = det_tones
                .iter()
                .zip(&wf)
                .map(|(d, w)| {
                    let mu = d.mu_r * frac.sqrt();
                    let var = (1.0 - frac) * w;
                    ToneInput { mu_r: mu, mu_i: 0.0, p_r: mu * mu + var / 2.0, p_i: var / 2.0 }
                })
                .collect();
            starts.push(params_from_tones(&t, p));
        }
        let improper: Vec<ToneInput> = det_tones.iter().map(|d| ToneInput { mu_r: 0.0, mu_i: 0.0, p_r: d.p_r, p_i: 0.0 }).collect();
        starts.push(params_from_tones(&improper, p));
        let mut wf_start = params_from_tones(&wf_tones, p);
        for (k, c) in wf_start.chunks_mut(4).enumerate() {
            c[0] = 1e-3 * det_amp[k] / p.sqrt();
        }
        starts.push(wf_start);
        let mut rng = cfg.rng(4);
        for _ in 0..cfg.restarts / 2 {
            starts.push((0..4 * n).map(|_| rng.gen::<f64>()).collect());
        }
        let mut best: Option<(Vec<f64>, f64, f64)> = None;
        for s in starts {
            let mut x = s;
            for weight in [1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8] {
                let f = |y: &[f64]| objective(y, weight);
                x = numerics::projected_ascent(&f, &project, &x, cfg)?.x;
            }
            let tones = tones_from_params(&x, p);
            let e = multicarrier_energy(model, &g, &tones);
            let r = multicarrier_rate(&a, &tones, noise_var);
            let feasible = e >= target * (1.0 - 1e-6);
            let better = match &best {
                None => true,
                Some((_, br, be)) => {
                    let bf = *be >= target * (1.0 - 1e-6);
                    (feasible && (!bf || r > *br)) || (!feasible && !bf && e > *be)
                }
            };
            if better {
                best = Some((x, r, e));
            }
        }
        let (x, rate, energy) = best.expect("at least one start");
        if energy < target * (1.0 - 1e-3) {
            return Err(WptError::Infeasible(format!(
                "target {target} W not reached (best {energy} W; deterministic maximum {e_max} W)"
            )));
        }
        out.push(MulticarrierPoint { target, rate, energy, tones: tones_from_params(&x, p) });
    }
    Ok(out)
}

/// Largest energy the multi-carrier design accepts: the optimized deterministic multisine.
pub fn multicarrier_max_energy(model: &EhTaylorModel, channel: &ChannelResponse, p: f64, cfg: &SolverConfig) -> Result<f64> {
    let g: Vec<f64> = channel.siso_gains()?.iter().map(|z| z.norm()).collect();
    let s = waveform::optimize_amplitudes(&g, model, p, cfg)?;
    Ok(model.p_dc(waveform::aligned_v_out(model, &g, &s)))
}

/// SISO channel with gains `‖h_n‖`: per-tone MRT reduces a MISO channel to it.
pub fn miso_effective_channel(channel: &ChannelResponse) -> Result<ChannelResponse> {
    if channel.n_rx() != 1 {
        return Err(WptError::Shape(format!("expected Q = 1, got {}", channel.n_rx())));
    }
    let g: Vec<Complex64> = channel.h.iter().map(|h| Complex64::new(h.norm(), 0.0)).collect();
    ChannelResponse::siso(channel.grid, &g)
}

/// IRS-aided frontier: `Θ` from the group-connected design on the strongest
/// tone, then the multi-carrier design on the effective channel. An empty
/// surface leaves the direct channel.
#[allow(clippy::too_many_arguments)]
pub fn re_irs(
    model: &EhTaylorModel,
    links: &IrsLinks,
    grid: ToneGrid,
    group_size: usize,
    noise_var: f64,
    p: f64,
    targets: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<MulticarrierPoint>> {
    let empty = links.g_r.iter().all(|r| r.is_empty());
    let channel = if empty {
        ChannelResponse::siso(grid, &links.g_d)?
    } else {
        irs::multitone_channel(links, grid, group_size)?.1
    };
    re_multicarrier_gaussian(model, &channel, noise_var, p, targets, GaussianClass::Asymmetric, cfg)
}

/// Write `receiver,param,rate_bits,energy_watts` rows.
pub fn write_frontier_csv<W: Write>(writer: W, points: &[RePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["receiver", "param", "rate_bits", "energy_watts"])?;
    for p in points {
        w.write_record([p.receiver_label().to_string(), p.param_label(), p.rate.to_string(), p.energy.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Multi-carrier frontier rows with the target as `param`.
pub fn write_multicarrier_csv<W: Write>(writer: W, points: &[MulticarrierPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["receiver", "param", "rate_bits", "energy_watts"])?;
    for p in points {
        w.write_record(["ideal".to_string(), format!("target={}", p.target), p.rate.to_string(), p.energy.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
