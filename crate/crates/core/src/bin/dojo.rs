use std::net::{IpAddr, SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use dojo::env::TaskConfig;
use dojo::harness::{
    antisymmetry_report, bench_csv, bench_plot, benchmark, crossplay_evaluate, local_env, mix,
    run_episode, search_agent_train, simulate_schedule, AgentHandle, BenchConfig,
    OpponentPoolConfig, RoleSchedule, SearchConfig, Transport,
};
use dojo::proto::{
    gateway, serve, GatewayConfig, ServerConfig, DEFAULT_GATEWAY_PORT, DEFAULT_PORT,
    GATEWAY_PORT_ENV, PORT_ENV,
};
use dojo::rules;

#[derive(Parser)]
#[command(
    name = "dojo",
    version,
    about = "Two-ragdoll combat environment: server, gateway and experiment tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportArg {
    Tcp,
    Local,
}

#[derive(Clone, Copy, ValueEnum)]
enum RolesArg {
    Fixed,
    Alternating,
}

#[derive(Subcommand)]
enum Command {
    /// Run the TCP control server.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, env = PORT_ENV, default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Directory for REPLAYSAVE/REPLAYLOAD files.
        #[arg(long)]
        replay_dir: Option<PathBuf>,
    },
    /// Run the WebSocket gateway in front of a control server.
    Gateway {
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, env = GATEWAY_PORT_ENV, default_value_t = DEFAULT_GATEWAY_PORT)]
        port: u16,
        /// Control server address.
        #[arg(long, default_value_t = format!("127.0.0.1:{DEFAULT_PORT}"))]
        upstream: String,
    },
    /// Measure physics frames per second under random play.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2, 5, 10, 20, 50])]
        fpt: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4])]
        instances: Vec<usize>,
        /// Seconds per cell.
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = TransportArg::Tcp)]
        transport: TransportArg,
        #[arg(long, default_value = "bench.csv")]
        out: PathBuf,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Evaluate every agent against every agent in both roles.
    Crossplay {
        /// Agents: `random:SEED`, `hold` or agent files. Defaults to two
        /// random agents, a freshly trained baseline and `hold`.
        #[arg(long, value_delimiter = ',')]
        agents: Vec<String>,
        #[arg(long, default_value = rules::AIKIDO_DOJO)]
        task: String,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Episode budget of the baseline trained for the default pool.
        #[arg(long, default_value_t = 320)]
        baseline_budget: usize,
        #[arg(long, default_value = "crossplay.tsv")]
        out: PathBuf,
        #[arg(long, default_value = "antisymmetry.tsv")]
        report: PathBuf,
    },
    /// Simulate self-play opponent selection statistics.
    SelfplayScheduleSim {
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        #[arg(long, default_value_t = 100_000)]
        games: usize,
        /// Number of past agent revisions in the pool.
        #[arg(long, default_value_t = 5)]
        past: usize,
        #[arg(long, value_enum, default_value_t = RolesArg::Alternating)]
        roles: RolesArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "schedule.tsv")]
        out: PathBuf,
    },
    /// Train the cross-entropy baseline on a single-agent task.
    TrainBaseline {
        #[arg(long, default_value = rules::DESTROY_UKE)]
        task: String,
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "baseline.agent")]
        out: PathBuf,
        #[arg(long, default_value = "curve.tsv")]
        curve: PathBuf,
    },
    /// Pit two agents against each other.
    Play {
        #[arg(long, default_value = "random:1")]
        p1: String,
        #[arg(long, default_value = "hold")]
        p2: String,
        #[arg(long, default_value = rules::AIKIDO_DOJO)]
        task: String,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "play.tsv")]
        out: PathBuf,
    },
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn task_by_id(id: &str) -> Result<TaskConfig, String> {
    TaskConfig::by_id(id).ok_or_else(|| {
        format!(
            "unknown task `{id}` (known: {}, {})",
            rules::DESTROY_UKE,
            rules::AIKIDO_DOJO
        )
    })
}

fn write(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn wait_for_ctrl_c() -> ! {
    loop {
        std::thread::park();
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Serve {
            host,
            port,
            replay_dir,
        } => {
            let h = serve(ServerConfig {
                addr: SocketAddr::new(host, port),
                replay_dir,
            })?;
            eprintln!("serving on {}", h.local_addr());
            h.join();
            Ok(())
        }
        Command::Gateway {
            host,
            port,
            upstream,
        } => {
            let upstream = upstream
                .to_socket_addrs()?
                .next()
                .ok_or_else(|| format!("cannot resolve {upstream}"))?;
            let h = gateway(GatewayConfig {
                addr: SocketAddr::new(host, port),
                upstream,
                connect_timeout: Duration::from_secs(5),
            })?;
            eprintln!("gateway on ws://{} -> {upstream}", h.local_addr());
            let _keep = h;
            wait_for_ctrl_c()
        }
        Command::Bench {
            fpt,
            instances,
            duration,
            seed,
            transport,
            out,
            plot,
        } => {
            if !(duration > 0.0) {
                return Err("duration must be positive".into());
            }
            let rows = benchmark(&BenchConfig {
                frames_per_turn: fpt,
                instances,
                duration: Duration::from_secs_f64(duration),
                seed,
                transport: match transport {
                    TransportArg::Tcp => Transport::Tcp,
                    TransportArg::Local => Transport::Local,
                },
                ..BenchConfig::default()
            })?;
            let csv = bench_csv(&rows);
            print!("{csv}");
            write(&out, &csv)?;
            if let Some(p) = plot {
                write(&p, &bench_plot(&rows))?;
            }
            Ok(())
        }
        Command::Crossplay {
            agents,
            task,
            episodes,
            seed,
            baseline_budget,
            out,
            report,
        } => {
            let task = task_by_id(&task)?;
            let pool = if agents.is_empty() {
                eprintln!("training baseline ({baseline_budget} episodes)");
                let base = search_agent_train(
                    &TaskConfig::destroy_uke(),
                    &SearchConfig::default(),
                    baseline_budget,
                    seed,
                )?;
                vec![
                    AgentHandle::random(mix(seed, 1)),
                    AgentHandle::random(mix(seed, 2)),
                    base.agent,
                    AgentHandle::hold(),
                ]
            } else {
                agents
                    .iter()
                    .map(|s| AgentHandle::from_spec(s))
                    .collect::<Result<_, _>>()?
            };
            let m = crossplay_evaluate(&pool, episodes, &task, seed)?;
            let r = antisymmetry_report(&m);
            let table = m.table();
            let rendered = r.render(&m.agents);
            print!("{table}{rendered}");
            write(&out, &table)?;
            write(&report, &rendered)
        }
        Command::SelfplayScheduleSim {
            draws,
            games,
            past,
            roles,
            seed,
            out,
        } => {
            let cfg = OpponentPoolConfig {
                past_pool: (0..past)
                    .map(|k| {
                        let mut a = AgentHandle::hold();
                        a.id = format!("past-{k}");
                        a.revision = k as u32;
                        a
                    })
                    .collect(),
                roles: match roles {
                    RolesArg::Fixed => RoleSchedule::Fixed,
                    RolesArg::Alternating => RoleSchedule::Alternating,
                },
                ..OpponentPoolConfig::default()
            };
            let stats = simulate_schedule(&cfg, draws, games, seed)?;
            let table = stats.table();
            print!("{table}");
            write(&out, &table)
        }
        Command::TrainBaseline {
            task,
            budget,
            seed,
            out,
            curve,
        } => {
            let task = task_by_id(&task)?;
            let res = search_agent_train(&task, &SearchConfig::default(), budget, seed)?;
            eprintln!(
                "best return {:.4} after {} episodes",
                res.best_return, res.episodes_used
            );
            write(&out, &res.agent.to_text().expect("open-loop agent"))?;
            write(&curve, &res.curve_table())
        }
        Command::Play {
            p1,
            p2,
            task,
            episodes,
            seed,
            out,
        } => {
            let mut task = task_by_id(&task)?;
            task.opponent = None;
            let a = AgentHandle::from_spec(&p1)?;
            let b = AgentHandle::from_spec(&p2)?;
            let mut table = format!(
                "# dojo play v1 p1={} p2={}\nepisode\twinner\tframes\tinjury_p1\tinjury_p2\n",
                a.id, b.id
            );
            let mut env = local_env(task);
            for e in 0..episodes {
                let (mut pa, mut pb) = (a.policy(), b.policy());
                let r = run_episode(
                    &mut env,
                    &mut [pa.as_mut(), pb.as_mut()],
                    mix(seed, e as u64),
                )?;
                table.push_str(&format!(
                    "{e}\t{}\t{}\t{:.3}\t{:.3}\n",
                    r.winner as u8, r.frames, r.injuries[0], r.injuries[1]
                ));
            }
            print!("{table}");
            write(&out, &table)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
