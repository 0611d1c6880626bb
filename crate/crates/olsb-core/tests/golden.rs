//! Golden-trace regression: a short canonical run must keep emitting the
//! exact same metrics bytes. Any change to sampling, arithmetic order, or
//! formatting shows up here first.

use olsb_core::analytics;
use olsb_core::config::{self, Algorithm};
use olsb_core::sha1;
use olsb_core::sim;

/// SHA-1 of the metrics CSV for the frozen reference run
/// (canonical network, olsb, K=1, lambda=1, seed=1, 2000 slots).
const GOLDEN_METRICS_SHA1: &str = "0b01dd6edfaaacfd87aa26f87d2b196d07694975";

fn golden_config() -> olsb_core::config::SimConfig {
    let mut spec = config::canonical_experiment("golden", 1.0, 2_000);
    spec.algorithms = vec![Algorithm::Olsb];
    spec.k = vec![1.0];
    spec.seeds = vec![1];
    spec.expand().unwrap().remove(0)
}

#[test]
fn golden_trace_is_stable() {
    let artifact = sim::run(&golden_config()).unwrap();
    let csv = analytics::metrics_to_csv(&artifact.metrics);
    let digest = sha1::sha1_hex(csv.as_bytes());
    assert_eq!(
        digest, GOLDEN_METRICS_SHA1,
        "golden trace changed; first lines:\n{}",
        csv.lines().take(4).collect::<Vec<_>>().join("\n")
    );
}

#[test]
fn golden_run_summary_facts() {
    let artifact = sim::run(&golden_config()).unwrap();
    let s = &artifact.summary;
    assert_eq!(s.counters.conservation_violations, 0);
    assert_eq!(s.counters.compliance_violations, 0);
    assert_eq!(s.counters.injected, s.counters.delivered + s.counters.in_system);
    assert!(s.regret_total > 0.0);
    // Spanner audit: nine flows, each reduced to at most three paths.
    assert_eq!(artifact.manifest.spanners.len(), 9);
    assert!(artifact.manifest.spanners.iter().all(|sp| sp.l <= 3 && sp.l >= 1));
    assert_eq!(artifact.manifest.topology_hash.len(), 40);
}
