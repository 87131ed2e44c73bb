//! Fit a small neural harvester model to Taylor-model data, then learn a
//! 16-point constellation with and without an energy penalty.

use wptlab::learning::{self, Harvester, ModulationConfig};
use wptlab::rectenna::EhTaylorModel;

fn main() -> wptlab::Result<()> {
    let model = EhTaylorModel::default();
    let data = learning::taylor_training_data(&model, 200, 1e-6, 5e-4, 1);
    let net = learning::fit_eh_surrogate(&data, 20000, 0.02, 1)?;
    for p in [1e-5, 1e-4, 3e-4] {
        let d = learning::taylor_training_data(&model, 1, p, p, 0)[0].p_dc_watts;
        println!("P_in = {p:.0e} W: taylor {d:.4e} W, network {:.4e} W", net.predict(p));
    }
    for (label, h) in [("taylor", Harvester::Taylor(model)), ("network", Harvester::Surrogate(net))] {
        for lambda in [0.0, 5e-3] {
            let cfg = ModulationConfig { lambda, iters: 1500, seed: 4, ..ModulationConfig::default() };
            let c = learning::train_modulation(&h, &cfg)?;
            println!(
                "{label:>7} lambda={lambda:.0e}: rate {:.3} bit, p_dc {:.4e} W, near-origin fraction {:.2}",
                c.rate,
                c.p_dc,
                learning::near_origin_fraction(&c.points)
            );
        }
    }
    Ok(())
}
