//! Rough particle-step throughput of the simulator on capillary parameters.

use std::time::Instant;

use valor::physics::ChannelParams;
use valor::sim::{run_replication, SimConfig, SimDuration};

fn main() {
    let params = ChannelParams::capillary();
    let steps = 2000u32;
    let cfg = SimConfig {
        molecules: 100_000,
        duration: SimDuration::Fixed(steps as f64 * 1e-4),
        ..SimConfig::default()
    };
    let start = Instant::now();
    let rec = run_replication(&params, &cfg, 0).expect("simulation");
    let secs = start.elapsed().as_secs_f64();
    let total = cfg.molecules as f64 * steps as f64;
    println!(
        "{total:.3e} particle-steps in {secs:.2} s: {:.2} ns/particle-step ({} samples)",
        secs / total * 1e9,
        rec.len()
    );
}
