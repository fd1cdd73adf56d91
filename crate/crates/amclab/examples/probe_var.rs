use amclab::channel::{LosState, Mobility, PlacementMode, ScenarioConfig};
use amclab::datastore::{generate_dataset, histogram_stats, label_histogram, CatalogEntry};
use amclab::phy::LinkConfig;

fn variance(cfg: ScenarioConfig, frames: u32) -> (f64, Vec<u64>) {
    let ds = generate_dataset(&[CatalogEntry { cfg, frames }], &LinkConfig::default(), 3).unwrap();
    let hist = label_histogram(&ds, Some(0));
    let (_, var) = histogram_stats(&hist);
    (var, hist.to_vec())
}

fn main() {
    for seed in [404u64, 405, 7, 8] {
        let (var, hist) = variance(
            ScenarioConfig {
                mode: PlacementMode::OneCluster,
                los: LosState::Nlos,
                mobility: Mobility::Static,
                speed_mps: 0.0,
                master_seed: seed,
                ..ScenarioConfig::default()
            },
            1000,
        );
        println!("static one_cluster seed {seed}: var {var:.4} hist {hist:?}");
    }
    for (speed, frame_s) in [(3.0, 1e-3), (10.0, 1e-3), (30.0, 1e-3), (3.0, 1e-2), (3.0, 5e-2)] {
        for seed in [405u64, 7, 8] {
            let (var, hist) = variance(
                ScenarioConfig {
                    mode: PlacementMode::RandomPlacement,
                    los: LosState::Nlos,
                    mobility: Mobility::Mobile,
                    speed_mps: speed,
                    frame_s,
                    master_seed: seed,
                    ..ScenarioConfig::default()
                },
                1000,
            );
            println!("mobile random speed {speed} frame_s {frame_s} seed {seed}: var {var:.4} hist {hist:?}");
        }
    }
}
