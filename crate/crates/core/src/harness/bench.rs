//! Throughput benchmark: random play for a fixed wall-clock duration.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::agent::mix;
use super::HarnessError;
use crate::env::Client;
use crate::proto::{serve, ServerConfig, SessionConfig};
use crate::rules::MatchSettings;
use crate::sim::Action;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transport {
    /// Each instance talks to a loopback TCP server.
    Tcp,
    /// Each instance drives an in-process session.
    Local,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub frames_per_turn: Vec<u32>,
    pub instances: Vec<usize>,
    pub duration: Duration,
    pub seed: u64,
    pub transport: Transport,
    pub matchframes: u64,
    pub engagement_distance: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            frames_per_turn: vec![1, 2, 5, 10, 20, 50],
            instances: vec![1, 2, 4],
            duration: Duration::from_secs(60),
            seed: 0,
            transport: Transport::Tcp,
            matchframes: 1000,
            engagement_distance: 1500.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub frames_per_turn: u32,
    pub instances: usize,
    pub frames: u64,
    pub seconds: f64,
    pub aggregate_fps: f64,
    pub per_instance_fps: f64,
    /// Agent decisions (turns) per second, summed over instances.
    pub decisions_per_second: f64,
}

struct Count {
    frames: u64,
    turns: u64,
}

fn run_instance(
    mut client: Client,
    settings: MatchSettings,
    seed: u64,
    deadline: Instant,
) -> Result<Count, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = Count {
        frames: 0,
        turns: 0,
    };
    let mut episode = 0u64;
    'outer: while Instant::now() < deadline {
        let mut s = settings.clone();
        s.seed = mix(seed, episode);
        episode += 1;
        client.new_game(&s, None)?;
        let (mut state, mut terminal) = client.get_state()?;
        while !terminal {
            if Instant::now() >= deadline {
                break 'outer;
            }
            client.make_actions(&Action::random(&mut rng), Some(&Action::random(&mut rng)))?;
            let before = state.frames_played;
            (state, terminal) = client.get_state()?;
            count.frames += state.frames_played - before;
            count.turns += 1;
        }
    }
    client.close()?;
    Ok(count)
}

/// Run every (frames per turn, instances) cell in turn.
pub fn benchmark(cfg: &BenchConfig) -> Result<Vec<BenchRow>, HarnessError> {
    if cfg.duration.is_zero() {
        return Err(HarnessError::Config("duration must be positive".into()));
    }
    let server = match cfg.transport {
        Transport::Tcp => Some(serve(ServerConfig {
            addr: "127.0.0.1:0".parse().expect("loopback"),
            replay_dir: None,
        })?),
        Transport::Local => None,
    };
    let mut rows = Vec::new();
    for &fpt in &cfg.frames_per_turn {
        for &n in &cfg.instances {
            let settings = MatchSettings {
                matchframes: cfg.matchframes,
                turnframes_schedule: vec![fpt],
                engagement_distance: cfg.engagement_distance,
                ..MatchSettings::default()
            };
            settings
                .validate()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            let clients = (0..n)
                .map(|_| match &server {
                    Some(s) => Client::connect(s.local_addr(), Duration::from_secs(5)),
                    None => Ok(Client::local(Arc::new(SessionConfig::default()))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let start = Instant::now();
            let deadline = start + cfg.duration;
            let counts = std::thread::scope(|scope| {
                let handles: Vec<_> = clients
                    .into_iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let s = settings.clone();
                        let seed = mix(cfg.seed, (u64::from(fpt) << 16) | k as u64);
                        scope.spawn(move || run_instance(c, s, seed, deadline))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("bench worker panicked"))
                    .collect::<Result<Vec<_>, _>>()
            })?;
            let seconds = start.elapsed().as_secs_f64();
            let frames: u64 = counts.iter().map(|c| c.frames).sum();
            let turns: u64 = counts.iter().map(|c| c.turns).sum();
            let aggregate = frames as f64 / seconds;
            log::info!("fpt {fpt} instances {n}: {aggregate:.0} frames/s");
            rows.push(BenchRow {
                frames_per_turn: fpt,
                instances: n,
                frames,
                seconds,
                aggregate_fps: aggregate,
                per_instance_fps: aggregate / n as f64,
                decisions_per_second: turns as f64 / seconds,
            });
        }
    }
    if let Some(s) = server {
        s.shutdown();
    }
    Ok(rows)
}

/// Versioned CSV table.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "# dojo bench v1\nframes_per_turn,instances,frames,seconds,aggregate_fps,per_instance_fps,decisions_per_second\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.3},{:.1},{:.1},{:.1}",
            r.frames_per_turn,
            r.instances,
            r.frames,
            r.seconds,
            r.aggregate_fps,
            r.per_instance_fps,
            r.decisions_per_second
        );
    }
    out
}

/// Whitespace columns with one block per instance count, for plotting
/// FPS against frames per turn.
pub fn bench_plot(rows: &[BenchRow]) -> String {
    let mut out = String::from("# dojo bench-plot v1\n# frames_per_turn aggregate_fps\n");
    let mut counts: Vec<usize> = rows.iter().map(|r| r.instances).collect();
    counts.sort_unstable();
    counts.dedup();
    for n in counts {
        let _ = writeln!(out, "\n\n# instances={n}");
        for r in rows.iter().filter(|r| r.instances == n) {
            let _ = writeln!(out, "{} {:.1}", r.frames_per_turn, r.aggregate_fps);
        }
    }
    out
}
