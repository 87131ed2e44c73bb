//! Passive reflecting surfaces with single-, group- and fully-connected
//! impedance networks.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{cn01, ChannelResponse, ToneGrid};
use crate::error::{Result, WptError};
use crate::numerics::{self, SolverConfig};

/// Block-diagonal scattering matrix with `L / L_G` blocks of size `L_G`.
#[derive(Debug, Clone, PartialEq)]
pub struct IrsConfig {
    pub l: usize,
    pub group_size: usize,
    pub theta: DMatrix<Complex64>,
}

impl IrsConfig {
    pub fn groups(&self) -> usize {
        self.l / self.group_size
    }

    /// `max |Θ − Θᵀ|`.
    pub fn symmetry_residual(&self) -> f64 {
        (&self.theta - self.theta.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |ΘᴴΘ − I|`.
    pub fn unitarity_residual(&self) -> f64 {
        let g = self.theta.adjoint() * &self.theta - DMatrix::identity(self.l, self.l);
        g.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// True when every entry outside the diagonal blocks is exactly zero.
    pub fn is_block_diagonal(&self) -> bool {
        let lg = self.group_size;
        (0..self.l).all(|i| (0..self.l).all(|j| i / lg == j / lg || self.theta[(i, j)] == Complex64::new(0.0, 0.0)))
    }

    /// `g_d + g_r Θ g_i`.
    pub fn effective(&self, g_d: Complex64, g_r: &[Complex64], g_i: &[Complex64]) -> Complex64 {
        let mut acc = g_d;
        for i in 0..self.l {
            for j in 0..self.l {
                let t = self.theta[(i, j)];
                if t != Complex64::new(0.0, 0.0) {
                    acc += g_r[i] * t * g_i[j];
                }
            }
        }
        acc
    }
}

fn check(g_r: &[Complex64], g_i: &[Complex64]) -> Result<usize> {
    if g_r.len() != g_i.len() {
        return Err(WptError::Dimension(format!("g_r has {} entries, g_i {}", g_r.len(), g_i.len())));
    }
    if g_r.is_empty() {
        return Err(WptError::Dimension("surface has no elements".into()));
    }
    Ok(g_r.len())
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn target_phase(g_d: Complex64) -> f64 {
    if g_d == Complex64::new(0.0, 0.0) {
        0.0
    } else {
        g_d.arg()
    }
}

/// Group-connected design: each block reflects its sub-pair coherently with the direct path.
pub fn optimize_group_connected(g_d: Complex64, g_r: &[Complex64], g_i: &[Complex64], group_size: usize) -> Result<(IrsConfig, f64)> {
    let l = check(g_r, g_i)?;
    if group_size == 0 || l % group_size != 0 {
        return Err(WptError::Divisibility { l, group: group_size });
    }
    let phase = target_phase(g_d);
    let mut theta = DMatrix::<Complex64>::zeros(l, l);
    for g in 0..l / group_size {
        let r = g * group_size..(g + 1) * group_size;
        let (br, bi) = (&g_r[r.clone()], &g_i[r.clone()]);
        let block = if group_size == 1 {
            let p = br[0] * bi[0];
            let arg = if p == Complex64::new(0.0, 0.0) { 0.0 } else { p.arg() };
            DMatrix::from_element(1, 1, Complex64::from_polar(1.0, phase - arg))
        } else if norm(br) == 0.0 || norm(bi) == 0.0 {
            DMatrix::identity(group_size, group_size)
        } else {
            numerics::symmetric_unitary_from_pair(bi, br, phase)?
        };
        theta.view_mut((r.start, r.start), (group_size, group_size)).copy_from(&block);
    }
    let cfg = IrsConfig { l, group_size, theta };
    let h = cfg.effective(g_d, g_r, g_i).norm();
    Ok((cfg, h))
}

/// Diagonal `Θ` with `θ_l = arg g_d − arg(g_r,l·g_i,l)`.
pub fn optimize_single_connected(g_d: Complex64, g_r: &[Complex64], g_i: &[Complex64]) -> Result<(IrsConfig, f64)> {
    optimize_group_connected(g_d, g_r, g_i, 1)
}

/// Full symmetric unitary `Θ` reaching `|g_d| + ‖g_r‖‖g_i‖`.
pub fn optimize_fully_connected(g_d: Complex64, g_r: &[Complex64], g_i: &[Complex64]) -> Result<(IrsConfig, f64)> {
    let l = check(g_r, g_i)?;
    optimize_group_connected(g_d, g_r, g_i, l)
}

/// Optimal `|h|` for group size `L_G` without building `Θ`.
pub fn optimal_gain(g_d: Complex64, g_r: &[Complex64], g_i: &[Complex64], group_size: usize) -> Result<f64> {
    let l = check(g_r, g_i)?;
    if group_size == 0 || l % group_size != 0 {
        return Err(WptError::Divisibility { l, group: group_size });
    }
    Ok(g_d.norm() + g_r.chunks(group_size).zip(g_i.chunks(group_size)).map(|(a, b)| norm(a) * norm(b)).sum::<f64>())
}

/// Mean received-power gain of each architecture over single-connected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainStudy {
    pub l: usize,
    pub trials: usize,
    pub group_sizes: Vec<usize>,
    pub gains: Vec<f64>,
    pub mean_single: f64,
}

/// `mean(|h_arch|²)/mean(|h_single|²) − 1` over i.i.d. CN(0,1) reflecting
/// channels with no direct path.
pub fn gain_study(l: usize, group_sizes: &[usize], trials: usize, seed: u64) -> Result<GainStudy> {
    if l == 0 || trials == 0 {
        return Err(WptError::param("L", "L and trials must be >= 1"));
    }
    for &g in group_sizes {
        if g == 0 || !l.is_multiple_of(g) {
            return Err(WptError::Divisibility { l, group: g });
        }
    }
    let cfg = SolverConfig::with_seed(seed);
    let zero = Complex64::new(0.0, 0.0);
    let rows: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = cfg.rng(t as u64);
            let g_r: Vec<Complex64> = (0..l).map(|_| cn01(&mut rng)).collect();
            let g_i: Vec<Complex64> = (0..l).map(|_| cn01(&mut rng)).collect();
            let mut row = vec![optimal_gain(zero, &g_r, &g_i, 1).expect("validated").powi(2)];
            row.extend(group_sizes.iter().map(|&g| optimal_gain(zero, &g_r, &g_i, g).expect("validated").powi(2)));
            row
        })
        .collect();
    let sums = rows.iter().fold(vec![0.0; group_sizes.len() + 1], |a, b| a.iter().zip(b).map(|(x, y)| x + y).collect());
    let single = sums[0];
    Ok(GainStudy {
        l,
        trials,
        group_sizes: group_sizes.to_vec(),
        gains: sums[1..].iter().map(|s| s / single - 1.0).collect(),
        mean_single: single / trials as f64,
    })
}

/// Per-tone IRS links: direct gain and reflecting vectors on every tone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrsLinks {
    pub g_d: Vec<Complex64>,
    pub g_r: Vec<Vec<Complex64>>,
    pub g_i: Vec<Vec<Complex64>>,
}

impl IrsLinks {
    pub fn random(l: usize, n_tones: usize, direct_gain: f64, seed: u64) -> Self {
        let mut rng = SolverConfig::with_seed(seed).rng(0);
        let g_d = (0..n_tones).map(|_| cn01(&mut rng) * direct_gain).collect();
        let g_r = (0..n_tones).map(|_| (0..l).map(|_| cn01(&mut rng)).collect()).collect();
        let g_i = (0..n_tones).map(|_| (0..l).map(|_| cn01(&mut rng)).collect()).collect();
        Self { g_d, g_r, g_i }
    }
}

/// One frequency-flat `Θ` designed on the tone with the largest reflected
/// product `‖g_r,n‖·‖g_i,n‖`, applied to every tone.
pub fn multitone_channel(links: &IrsLinks, grid: ToneGrid, group_size: usize) -> Result<(IrsConfig, ChannelResponse)> {
    let n = links.g_d.len();
    if links.g_r.len() != n || links.g_i.len() != n || grid.n_tones != n {
        return Err(WptError::Dimension("IRS links and tone grid disagree".into()));
    }
    let best = (0..n)
        .max_by(|&a, &b| (norm(&links.g_r[a]) * norm(&links.g_i[a])).total_cmp(&(norm(&links.g_r[b]) * norm(&links.g_i[b]))))
        .ok_or_else(|| WptError::Dimension("no tones".into()))?;
    let (cfg, _) = optimize_group_connected(links.g_d[best], &links.g_r[best], &links.g_i[best], group_size)?;
    let h: Vec<Complex64> = (0..n).map(|k| cfg.effective(links.g_d[k], &links.g_r[k], &links.g_i[k])).collect();
    let ch = ChannelResponse::siso(grid, &h)?;
    Ok((cfg, ch))
}
