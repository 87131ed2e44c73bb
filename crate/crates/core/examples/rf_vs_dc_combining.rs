//! Receive-side combining: per-antenna rectifiers summed in DC against
//! phase-shifter RF combining into one rectifier.

use wptlab::channel::{self, ToneGrid};
use wptlab::combining;
use wptlab::numerics::SolverConfig;
use wptlab::rectenna::{EhTaylorModel, MomentConvention};

fn main() -> wptlab::Result<()> {
    let model = EhTaylorModel::default();
    let cfg = SolverConfig::with_seed(3);
    let grid = ToneGrid::with_tones(1, 1e6);
    for q in [1usize, 2, 4] {
        let (mut dc_sum, mut rf_sum) = (0.0, 0.0);
        let trials = 50;
        for t in 0..trials {
            let ch = channel::rayleigh_iid(2, q, &grid, t)?.scaled(num_complex::Complex64::new(1e-2, 0.0));
            let (_, dc) = combining::optimize_dc_combining(&model, &ch, 1e-2, &cfg)?;
            let rf = combining::optimize_rf_combining(&model, &ch, 1e-2, &cfg)?;
            dc_sum += dc.p_dc;
            rf_sum += combining::rf_combining_p_dc(&model, rf.report.p_rf.sqrt(), MomentConvention::Zeta);
        }
        println!("Q={q}: mean p_dc DC combining {:.4e} W, RF combining {:.4e} W", dc_sum / trials as f64, rf_sum / trials as f64);
    }
    Ok(())
}
