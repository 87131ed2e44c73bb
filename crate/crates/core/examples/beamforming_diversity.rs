//! Joint multi-antenna waveform design, then transmit diversity with random
//! phase sweeping under line-of-sight and Rayleigh fading.

use wptlab::beamforming::{self, Fading};
use wptlab::channel::{self, ToneGrid};
use wptlab::numerics::SolverConfig;
use wptlab::rectenna::{self, EhTaylorModel};

fn main() -> wptlab::Result<()> {
    let model = EhTaylorModel::default();
    let cfg = SolverConfig::with_seed(2);
    let grid = ToneGrid::with_tones(8, 1e6);
    for m in [1usize, 2, 4] {
        let ch = channel::rayleigh_iid(m, 1, &grid, 5)?.scaled(num_complex::Complex64::new(1e-2, 0.0));
        let spec = beamforming::joint_bf_waveform(&ch, &model, 1e-2, &cfg)?;
        let r = rectenna::harvest(&model, &spec.received(&ch, 0)?)?;
        println!("M={m}: joint design v_out = {:.4e} V", r.v_out);
    }
    for fading in [Fading::LineOfSight, Fading::Rayleigh] {
        let d = beamforming::transmit_diversity_eval(&model, 4, 2000, 64, 1e-4, 9, fading)?;
        println!(
            "{fading:?}: mean v_out with diversity {:.4e} V, single antenna {:.4e} V",
            d.mean_v_out_td, d.mean_v_out_single
        );
    }
    Ok(())
}
