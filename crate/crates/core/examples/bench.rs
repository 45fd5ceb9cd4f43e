//! Short throughput sweep over frames per turn.

use std::time::Duration;

use dojo::harness::{bench_csv, benchmark, BenchConfig, Transport};

fn main() {
    let rows = benchmark(&BenchConfig {
        frames_per_turn: vec![1, 10, 50],
        instances: vec![1],
        duration: Duration::from_secs(1),
        transport: Transport::Tcp,
        ..BenchConfig::default()
    })
    .unwrap();
    print!("{}", bench_csv(&rows));
}
