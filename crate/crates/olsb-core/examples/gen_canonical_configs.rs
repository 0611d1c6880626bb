//! Regenerates the canonical experiment configs under `configs/`.
//!
//! Usage: `cargo run -p olsb-core --example gen_canonical_configs [dir]`

use olsb_core::config::{self, TopologySource};
use olsb_core::topology::TopologyFile;

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "configs".into());
    let dir = std::path::PathBuf::from(dir);
    std::fs::create_dir_all(&dir).expect("create config dir");

    let topo: TopologyFile = config::canonical_topology();
    std::fs::write(
        dir.join("topology_8x8.json"),
        serde_json::to_string_pretty(&topo).unwrap(),
    )
    .expect("write topology");

    for (file, name, lambda, slots) in [
        ("paper_light.json", "paper-light", 0.6, 100_000u64),
        ("paper_moderate.json", "paper-moderate", 1.0, 100_000),
        ("paper_high.json", "paper-high", 1.5, 60_000),
    ] {
        let mut spec = config::canonical_experiment(name, lambda, slots);
        spec.topology = TopologySource::File { file: "topology_8x8.json".into() };
        std::fs::write(dir.join(file), serde_json::to_string_pretty(&spec).unwrap())
            .expect("write config");
        println!("wrote {}", dir.join(file).display());
    }
}
