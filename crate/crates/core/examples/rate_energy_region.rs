//! Rate-energy trade-off of asymmetric Gaussian and flash signalling, and of
//! time-switching and power-splitting receivers.

use num_complex::Complex64;
use wptlab::rate_energy::{self, ReFamily, ReceiverKind};
use wptlab::rectenna::EhTaylorModel;
use wptlab::signal::InputDistribution;

fn main() -> wptlab::Result<()> {
    let model = EhTaylorModel::default();
    let (p, s2, h) = (1e-5, 1e-7, Complex64::new(1.0, 0.0));
    let mut points = rate_energy::re_sweep_ideal(&model, &ReFamily::AsymGaussian { power: p, points: 11 }, h, s2)?;
    points.extend(rate_energy::re_sweep_ideal(&model, &ReFamily::OnOff { power: p, l: vec![1.0, 2.0, 4.0, 16.0] }, h, s2)?);
    for pt in rate_energy::pareto_frontier(&points) {
        println!("ideal  R = {:7.4} bit  E = {:.4e} W", pt.rate, pt.energy);
    }
    let info = InputDistribution::Cscg { power: p };
    let energy = InputDistribution::OnOff { l: 8.0, power: p };
    for kind in [ReceiverKind::Ts, ReceiverKind::Ps] {
        let pts = rate_energy::re_sweep_receiver(&model, &info, &energy, h, s2, kind, 5)?;
        for pt in pts {
            println!("{kind:?}  R = {:7.4} bit  E = {:.4e} W", pt.rate, pt.energy);
        }
    }
    Ok(())
}
