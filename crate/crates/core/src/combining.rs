//! Multi-antenna harvesters: one rectifier per antenna with DC combining, or
//! a phase-shifter RF combiner feeding a single rectifier.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beamforming::{self, Beamformer};
use crate::channel::{ChannelResponse, ToneGrid};
use crate::error::{Result, WptError};
use crate::numerics::{self, SolverConfig};
use crate::rectenna::{self, EhTaylorModel, HarvestReport, MomentConvention};

/// Receive-side RF combiner `w_R`. The constrained form is `w_R,q = e^{jθ_q}/√Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfCombiner {
    pub w_r: Vec<Complex64>,
    pub constrained: bool,
    pub theta: Option<Vec<f64>>,
}

impl RfCombiner {
    pub fn phase_shifters(theta: Vec<f64>) -> Self {
        let k = 1.0 / (theta.len() as f64).sqrt();
        let w_r = theta.iter().map(|t| Complex64::from_polar(k, *t)).collect();
        Self { w_r, constrained: true, theta: Some(theta) }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.w_r.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `w_Rᴴ·H`, a `1 × M` row.
    pub fn combine(&self, h: &DMatrix<Complex64>) -> Vec<Complex64> {
        (0..h.ncols()).map(|m| (0..h.nrows()).map(|q| self.w_r[q].conj() * h[(q, m)]).sum()).collect()
    }
}

/// Result of the alternating RF-combining design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfCombining {
    pub beamformer: Beamformer,
    pub combiner: RfCombiner,
    pub report: HarvestReport,
    /// `|w_Rᴴ H w_T|²` after each half-step of the best restart.
    pub trace: Vec<f64>,
}

fn single_tone(channel: &ChannelResponse) -> Result<&DMatrix<Complex64>> {
    if channel.n_tones() != 1 {
        return Err(WptError::Shape(format!("expected N = 1, got {}", channel.n_tones())));
    }
    Ok(&channel.h[0])
}

fn dot(row: &[Complex64], w: &[Complex64]) -> Complex64 {
    row.iter().zip(w).map(|(a, b)| a * b).sum()
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn report_from_voltages(model: &EhTaylorModel, p_rf: f64, v: &[f64]) -> HarvestReport {
    let p_dc: f64 = v.iter().map(|x| x * x).sum::<f64>() / model.load;
    HarvestReport::new(p_rf, (p_dc * model.load).sqrt(), model.load)
}

/// DC-combined harvest with one rectenna per receive antenna, each driven by
/// the single tone `h_q·w_T`. `v_out` is the equivalent `√(P_dc·R_L)`.
pub fn dc_combine_harvest(model: &EhTaylorModel, channel: &ChannelResponse, beamformer: &Beamformer, p: f64) -> Result<HarvestReport> {
    model.validate()?;
    let h = single_tone(channel)?;
    let w = beamformer.w.first().ok_or_else(|| WptError::Shape("empty beamformer".into()))?;
    if w.len() != h.ncols() {
        return Err(WptError::Dimension(format!("beamformer has {} antennas, channel {}", w.len(), h.ncols())));
    }
    if beamformer.power() > p * (1.0 + 1e-12) {
        return Err(WptError::Infeasible(format!("beamformer power {} exceeds budget {p}", beamformer.power())));
    }
    let rows: Vec<Vec<Complex64>> = (0..h.nrows()).map(|q| channel.row(0, q)).collect();
    let amps: Vec<f64> = rows.iter().map(|r| dot(r, w).norm()).collect();
    let v: Vec<f64> = amps.iter().map(|a| model.v_out_tone(*a, MomentConvention::Passband)).collect();
    Ok(report_from_voltages(model, amps.iter().map(|a| a * a).sum(), &v))
}

/// `Σ_q v_q²` with `v_q = Σ_i β_i k_i |h_q w|^i` under `convention`.
pub fn dc_combining_objective(model: &EhTaylorModel, channel: &ChannelResponse, w: &[Complex64], convention: MomentConvention) -> Result<f64> {
    let h = single_tone(channel)?;
    Ok((0..h.nrows()).map(|q| model.v_out_tone(dot(&channel.row(0, q), w).norm(), convention).powi(2)).sum())
}

fn pack(w: &[Complex64]) -> Vec<f64> {
    w.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn unpack(x: &[f64]) -> Vec<Complex64> {
    x.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

/// Dominant right singular vector of `H` and its singular value.
fn dominant_right(h: &DMatrix<Complex64>) -> (Vec<Complex64>, f64) {
    let svd = h.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let (k, s) = svd.singular_values.iter().enumerate().fold((0, -1.0), |b, (i, s)| if *s > b.1 { (i, *s) } else { b });
    ((0..h.ncols()).map(|m| v_t[(k, m)].conj()).collect(), s)
}

/// Dominant left singular vector of `H`.
fn dominant_left(h: &DMatrix<Complex64>) -> Vec<Complex64> {
    let svd = h.clone().svd(true, false);
    let u = svd.u.expect("requested u");
    let k = svd.singular_values.iter().enumerate().fold((0, -1.0), |b, (i, s)| if *s > b.1 { (i, *s) } else { b }).0;
    (0..h.nrows()).map(|q| u[(q, k)]).collect()
}

/// Transmit beamformer maximizing the DC-combined objective in the
/// cosine-moment (`ζ_i`) convention. The report uses that same convention.
pub fn optimize_dc_combining(model: &EhTaylorModel, channel: &ChannelResponse, p: f64, cfg: &SolverConfig) -> Result<(Beamformer, HarvestReport)> {
    model.validate()?;
    cfg.validate()?;
    let h = single_tone(channel)?;
    if !(p > 0.0) {
        return Err(WptError::param("P", "must be > 0"));
    }
    let conv = MomentConvention::Zeta;
    let (m, q) = (h.ncols(), h.nrows());
    let rows: Vec<Vec<Complex64>> = (0..q).map(|i| channel.row(0, i)).collect();
    if rows.iter().all(|r| norm(r) == 0.0) {
        return Err(WptError::ZeroChannel(0));
    }
    let scale = rows.iter().map(|r| norm(r)).fold(0.0, f64::max) * p.sqrt();
    let f0 = rows.len() as f64 * model.v_out_tone(scale, conv).powi(2);
    // Objective normalized by its crude upper bound, over w/√P in the unit ball.
    let f = |x: &[f64]| {
        let w = unpack(x);
        let mut g = vec![Complex64::new(0.0, 0.0); m];
        let mut val = 0.0;
        for r in &rows {
            let z = dot(r, &w) * p.sqrt();
            let a = z.norm();
            let v = model.v_out_tone(a, conv);
            val += v * v;
            if a > 0.0 {
                let k = 2.0 * v * model.dv_out_tone(a, conv) * p.sqrt() / a;
                for (gm, hm) in g.iter_mut().zip(r) {
                    *gm += hm.conj() * z * k;
                }
            }
        }
        (val / f0, g.iter().flat_map(|z| [z.re / f0, z.im / f0]).collect())
    };
    let project = |x: &mut [f64]| numerics::project_ball(x, 1.0);
    let mut starts = vec![pack(&dominant_right(h).0)];
    for r in &rows {
        let n = norm(r);
        if n > 0.0 {
            starts.push(pack(&r.iter().map(|z| z.conj() / n).collect::<Vec<_>>()));
        }
    }
    let mut rng = cfg.rng(2);
    for _ in 0..cfg.restarts {
        starts.push(pack(&numerics::random_unit_complex(&mut rng, m)));
    }
    let out = numerics::best_of_starts(&f, &project, &starts, cfg)?;
    let mut w = unpack(&out.x);
    let nw = norm(&w);
    if nw > 0.0 {
        w.iter_mut().for_each(|z| *z *= p.sqrt() / nw);
    }
    let amps: Vec<f64> = rows.iter().map(|r| dot(r, &w).norm()).collect();
    let v: Vec<f64> = amps.iter().map(|a| model.v_out_tone(*a, conv)).collect();
    let report = report_from_voltages(model, amps.iter().map(|a| a * a).sum(), &v);
    Ok((Beamformer { w: vec![w] }, report))
}

fn alternate(h: &DMatrix<Complex64>, p: f64, theta0: Vec<f64>, cfg: &SolverConfig) -> (Vec<f64>, Vec<Complex64>, Vec<f64>) {
    let mut theta = theta0;
    let mut trace = Vec::new();
    let mut w_t = vec![Complex64::new(0.0, 0.0); h.ncols()];
    let mut prev = -1.0;
    for _ in 0..cfg.max_iters {
        let g = RfCombiner::phase_shifters(theta.clone()).combine(h);
        let ng = norm(&g);
        if ng == 0.0 {
            break;
        }
        w_t = g.iter().map(|z| z.conj() * (p.sqrt() / ng)).collect();
        trace.push(p * ng * ng);
        let hw: Vec<Complex64> = (0..h.nrows()).map(|q| (0..h.ncols()).map(|m| h[(q, m)] * w_t[m]).sum()).collect();
        theta = hw.iter().map(|z| z.arg()).collect();
        let obj = hw.iter().map(|z| z.norm()).sum::<f64>().powi(2) / h.nrows() as f64;
        trace.push(obj);
        if obj - prev <= cfg.rel_tol * obj.abs() {
            break;
        }
        prev = obj;
    }
    (theta, w_t, trace)
}

/// Alternating optimization of the transmit beamformer and the
/// constant-modulus RF combiner for a single tone.
pub fn optimize_rf_combining(model: &EhTaylorModel, channel: &ChannelResponse, p: f64, cfg: &SolverConfig) -> Result<RfCombining> {
    model.validate()?;
    cfg.validate()?;
    let h = single_tone(channel)?;
    if !(p > 0.0) {
        return Err(WptError::param("P", "must be > 0"));
    }
    if h.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(WptError::ZeroChannel(0));
    }
    let mut starts = vec![dominant_left(h).iter().map(|z| z.arg()).collect::<Vec<f64>>()];
    let mut rng = cfg.rng(3);
    for _ in 0..cfg.restarts {
        starts.push((0..h.nrows()).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect());
    }
    let best = starts
        .into_iter()
        .map(|t| alternate(h, p, t, cfg))
        .max_by(|a, b| a.2.last().unwrap_or(&0.0).total_cmp(b.2.last().unwrap_or(&0.0)))
        .expect("at least one start");
    let (theta, w_t, trace) = best;
    let combiner = RfCombiner::phase_shifters(theta);
    let a = dot(&combiner.combine(h), &w_t).norm();
    let report = HarvestReport::new(a * a, model.v_out_tone(a, MomentConvention::Passband), model.load);
    Ok(RfCombining { beamformer: Beamformer { w: vec![w_t] }, combiner, report, trace })
}

/// DC power of the single rectifier for combined amplitude `a` under `convention`.
pub fn rf_combining_p_dc(model: &EhTaylorModel, a: f64, convention: MomentConvention) -> f64 {
    model.p_dc(model.v_out_tone(a, convention))
}

/// Unconstrained RF combining: dominant singular pair of `H`, amplitude `σ_max·√P`.
pub fn unconstrained_rf_combining(model: &EhTaylorModel, channel: &ChannelResponse, p: f64) -> Result<(Beamformer, RfCombiner, HarvestReport)> {
    model.validate()?;
    let h = single_tone(channel)?;
    let (v, s) = dominant_right(h);
    let u = dominant_left(h);
    let w_t: Vec<Complex64> = v.iter().map(|z| z * p.sqrt()).collect();
    let hw: DVector<Complex64> = h * DVector::from_vec(w_t.clone());
    let ip: Complex64 = u.iter().zip(hw.iter()).map(|(a, b)| a.conj() * b).sum();
    // Rotate u so that w_Rᴴ H w_T is real positive.
    let rot = if ip.norm() > 0.0 { ip / ip.norm() } else { Complex64::new(1.0, 0.0) };
    let w_r: Vec<Complex64> = u.iter().map(|z| z * rot).collect();
    let a = s * p.sqrt();
    Ok((
        Beamformer { w: vec![w_t] },
        RfCombiner { w_r, constrained: false, theta: None },
        HarvestReport::new(a * a, model.v_out_tone(a, MomentConvention::Passband), model.load),
    ))
}

/// Multi-tone RF combining with a tone-independent combiner designed on the
/// strongest tone, followed by joint MRT and power allocation on the
/// combined channel.
pub fn rf_combining_multitone(model: &EhTaylorModel, channel: &ChannelResponse, p: f64, cfg: &SolverConfig) -> Result<(RfCombiner, HarvestReport)> {
    let n_star = (0..channel.n_tones())
        .max_by(|&a, &b| channel.h[a].norm().total_cmp(&channel.h[b].norm()))
        .ok_or_else(|| WptError::Dimension("no tones".into()))?;
    let one = ChannelResponse::new(ToneGrid { n_tones: 1, ..channel.grid }, vec![channel.h[n_star].clone()])?;
    let rf = optimize_rf_combining(model, &one, p, cfg)?;
    let rows: Vec<Vec<Complex64>> = channel.h.iter().map(|h| rf.combiner.combine(h)).collect();
    let eff = ChannelResponse::miso(channel.grid, &rows)?;
    let spec = beamforming::joint_bf_waveform(&eff, model, p, cfg)?;
    let report = rectenna::harvest(model, &spec.received(&eff, 0)?)?;
    Ok((rf.combiner, report))
}
