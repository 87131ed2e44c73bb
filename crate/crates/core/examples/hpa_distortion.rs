//! PAPR of multisines and the power-amplifier efficiency loss they cause.

use wptlab::hpa::{self, HpaModel};
use wptlab::signal::SignalSpec;

fn main() -> wptlab::Result<()> {
    let rapp = HpaModel::Rapp { gain: 1.0, saturation: 0.5, smoothness: 2.0 };
    for n in [1usize, 2, 4, 8, 16] {
        let spec = SignalSpec::siso(&vec![(0.1 / n as f64).sqrt(); n], &vec![0.0; n], 0.1);
        println!("N={n:>2}: PAPR {:6.2}, output power ratio {:.4}", hpa::papr(&spec)?, hpa::e1_report(&rapp, &spec)?);
    }
    Ok(())
}
