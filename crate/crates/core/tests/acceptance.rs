//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! criterion fails. Criteria that cannot be measured on this machine print
//! UNVERIFIED and do not fail the run.

use std::io::{BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use dojo::env::{
    normalize_observation, reward_destroy_uke, Client, Env, GameState, ObsBlocks, TaskConfig,
};
use dojo::harness::{
    antisymmetry_report, benchmark, crossplay_evaluate, local_env, mix, run_episode,
    search_agent_train, simulate_schedule, AgentHandle, BenchConfig, OpponentPoolConfig,
    SearchConfig, Transport,
};
use dojo::math::{Mat3, Vec3};
use dojo::proto::{
    decode, encode, read_line, serve, ErrCode, FrameMsg, Message, PlayerBlock, ServerConfig,
    SessionConfig, StateMsg, WireWinner,
};
use dojo::rules::{
    check_disqualification, preset, MatchSettings, MatchState, Reason, Replay, Winner, AIKIDO_DOJO,
};
use dojo::sim::skeleton::{self, mirror_part, GROIN, HEAD, L_FOOT, R_FOOT, R_HAND};
use dojo::sim::{
    make_world, mirror_world, step_frame, Action, FrameEvents, GripMode, JointMode, WorldSettings,
    WorldState, ACTION_LEN, JOINT_COUNT, PART_COUNT,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass,
    Fail,
    Unverified,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        detail: detail.into(),
    }
}

fn random_action(rng: &mut ChaCha8Rng) -> Action {
    let raw: Vec<i64> = (0..ACTION_LEN)
        .map(|i| {
            if i < JOINT_COUNT {
                rng.random_range(1..=4)
            } else {
                rng.random_range(1..=2)
            }
        })
        .collect();
    Action::from_wire(&raw).unwrap()
}

fn random_settings(rng: &mut ChaCha8Rng) -> MatchSettings {
    let turns = rng.random_range(1..=4);
    MatchSettings {
        matchframes: rng.random_range(60..=300),
        turnframes_schedule: (0..turns).map(|_| rng.random_range(1..=40)).collect(),
        engagement_distance: rng.random_range(60.0..400.0),
        dojo_radius: if rng.random_bool(0.5) {
            0.0
        } else {
            rng.random_range(150.0..400.0)
        },
        dq_enabled: rng.random_bool(0.5),
        dismemberment_enabled: rng.random_bool(0.5),
        gravity: Vec3::new(0.0, 0.0, -rng.random_range(0.0..1500.0)),
        seed: rng.random(),
        replay_name: None,
    }
}

/// Plays a recorded match to the end; actions come from `seed`.
fn play_recorded(settings: &MatchSettings, seed: u64) -> Replay {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = MatchState::recorded(settings.clone()).unwrap();
    while !m.terminal {
        let a = random_action(&mut rng);
        let b = random_action(&mut rng);
        m.submit_actions(&a, &b).unwrap();
    }
    m.replay()
}

fn frame_trace(r: &Replay) -> Vec<Vec<u8>> {
    r.playback().map(|f| f.to_bytes()).collect()
}

fn determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd0);
    let triples: Vec<(MatchSettings, u64)> = (0..50)
        .map(|_| (random_settings(&mut rng), rng.random()))
        .collect();
    let worker = {
        let triples = triples.clone();
        std::thread::spawn(move || {
            triples
                .iter()
                .map(|(s, seed)| frame_trace(&play_recorded(s, *seed)))
                .collect::<Vec<_>>()
        })
    };
    let here: Vec<_> = triples
        .iter()
        .map(|(s, seed)| frame_trace(&play_recorded(s, *seed)))
        .collect();
    let there = worker.join().unwrap();
    let frames: usize = here.iter().map(Vec::len).sum();
    let differing = here.iter().zip(&there).filter(|(a, b)| a != b).count();
    check(
        differing == 0 && frames > 0,
        format!("50 triples, {frames} frames, {differing} traces differ"),
    )
}

fn replay_round_trip() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut bad = Vec::new();
    let mut frames = 0;
    for k in 0..20u64 {
        let mut s = preset(AIKIDO_DOJO).unwrap();
        s.seed = k;
        s.engagement_distance = 100.0 + 10.0 * k as f64;
        let rec = play_recorded(&s, mix(7, k));
        let path = dir.path().join(format!("m{k}.rpl"));
        rec.save(std::fs::File::create(&path).unwrap()).unwrap();
        let loaded = Replay::load(std::fs::File::open(&path).unwrap()).unwrap();
        let resim = loaded.resimulate().unwrap();
        frames += rec.len();
        let want = frame_trace(&rec);
        if frame_trace(&loaded) != want {
            bad.push(format!("{k}: playback"));
        }
        if frame_trace(&resim) != want || resim.outcome != rec.outcome {
            bad.push(format!("{k}: resimulation"));
        }
    }
    check(
        bad.is_empty(),
        format!("20 matches, {frames} frames, mismatches {bad:?}"),
    )
}

fn injury_and_reward() -> Outcome {
    let task = TaskConfig::destroy_uke();
    let mut env = local_env(task);
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a);
    let (mut decreases, mut reward_mismatch, mut steps) = (0, 0, 0);
    let mut total = 0.0;
    for ep in 0..1000u64 {
        env.reset(ep).unwrap();
        let mut prev: Option<GameState> = None;
        loop {
            let step = env.step(&[random_action(&mut rng)]).unwrap();
            let cur = step.info.state.clone();
            let before = prev.as_ref().map_or([0.0; 2], |p| p.injuries());
            let after = cur.injuries();
            decreases += (0..2).filter(|&k| after[k] < before[k]).count();
            let want = ((after[1] - before[1]) - (after[0] - before[0])) / 5000.0;
            let lib = prev.as_ref().map_or(want, |p| reward_destroy_uke(p, &cur));
            if step.rewards[0].to_bits() != want.to_bits() || lib.to_bits() != want.to_bits() {
                reward_mismatch += 1;
            }
            total += step.rewards[0];
            steps += 1;
            prev = Some(cur);
            if step.terminal {
                break;
            }
        }
    }
    check(
        decreases == 0 && reward_mismatch == 0,
        format!(
            "1000 episodes, {steps} steps, {decreases} decreases, {reward_mismatch} reward mismatches, mean return {:.3}",
            total / 1000.0
        ),
    )
}

/// Independent reconstruction of one relative-position entry.
fn expected_entry(gs: &GameState, viewpoint: usize, index: usize) -> f64 {
    let me = &gs.players[viewpoint];
    let player = if index < 63 { viewpoint } else { 1 - viewpoint };
    let part = (index % 63) / 3;
    let axis = index % 3;
    let g = me.positions[GROIN];
    let d = gs.players[player].positions[part] - g;
    let r: Mat3 = me.groin_rotation;
    // column `axis` of R dotted with the offset
    let v = (0..3).map(|i| r.m[i][axis] * d[i]).sum::<f64>();
    let v = if player == viewpoint && part == GROIN && axis == 2 {
        g.z
    } else {
        v
    };
    (v / 10.0).clamp(-30.0, 30.0)
}

fn observation_contract() -> Outcome {
    let mut task = TaskConfig::aikido_dojo();
    task.settings.matchframes = 1000;
    task.settings.turnframes_schedule = vec![10];
    task.settings.dq_enabled = false;
    task.distance_range = (60.0, 300.0);
    task.match_info = false;
    let mut env = local_env(task);
    let mut rng = ChaCha8Rng::seed_from_u64(0x0b);
    let (mut states, mut bad_len, mut out_of_range, mut groin_bad, mut oracle_bad) =
        (0, 0, 0, 0, 0);
    let mut max_err = 0.0f64;
    let mut ep = 0u64;
    while states < 10_000 {
        env.reset(ep).unwrap();
        ep += 1;
        loop {
            let step = env
                .step(&[random_action(&mut rng), random_action(&mut rng)])
                .unwrap();
            let gs = &step.info.state;
            for v in 0..2 {
                let obs = &step.observations[v];
                let again = normalize_observation(gs, v, ObsBlocks::Positions);
                let x = &obs.relative_positions;
                states += 1;
                if x.len() != 126 || obs.len() != 126 || again.relative_positions != *x {
                    bad_len += 1;
                    continue;
                }
                out_of_range += x.iter().filter(|e| !(-30.0..=30.0).contains(*e)).count();
                let h = gs.players[v].positions[GROIN].z;
                let groin = &x[3 * GROIN..3 * GROIN + 3];
                if groin[0] != 0.0 || groin[1] != 0.0 || groin[2] != (h / 10.0).clamp(-30.0, 30.0) {
                    groin_bad += 1;
                }
                for (i, &e) in x.iter().enumerate() {
                    let err = (e - expected_entry(gs, v, i)).abs();
                    max_err = max_err.max(err);
                    if err > 1e-9 {
                        oracle_bad += 1;
                    }
                }
            }
            if step.terminal {
                break;
            }
        }
    }
    check(
        bad_len + out_of_range + groin_bad + oracle_bad == 0,
        format!(
            "{states} states, length errors {bad_len}, out of range {out_of_range}, groin errors {groin_bad}, oracle max error {max_err:.1e}"
        ),
    )
}

fn reflect(v: Vec3) -> Vec3 {
    Vec3::new(-v.x, v.y, v.z)
}

fn group_dev(pairs: &[(f64, f64)]) -> f64 {
    let scale = pairs.iter().fold(1.0f64, |m, (a, _)| m.max(a.abs()));
    pairs.iter().fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

/// Positions and velocities of `m` against the reflection of `w`, with
/// players swapped and left/right parts exchanged.
fn mirror_deviation(w: &WorldState, m: &WorldState) -> f64 {
    let (mut pos, mut vel) = (Vec::new(), Vec::new());
    for k in 0..2 {
        for i in 0..PART_COUNT {
            let a = &w.players[k].parts[i];
            let b = &m.players[1 - k].parts[mirror_part(i)];
            let (pa, va) = (reflect(a.position), reflect(a.velocity));
            for c in 0..3 {
                pos.push((pa[c], b.position[c]));
                vel.push((va[c], b.velocity[c]));
            }
        }
    }
    group_dev(&pos).max(group_dev(&vel))
}

fn mirror_property() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_full = 0.0f64;
    let mut involution = 0.0f64;
    let mut contacts = 0;
    for pair in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(0x3e, pair));
        let d = rng.random_range(60.0..250.0);
        let mut w = make_world(
            &WorldSettings {
                engagement_distance: d,
                ..Default::default()
            },
            pair,
        )
        .unwrap();
        let mut m = mirror_world(&w);
        for frame in 0..500 {
            if frame % 10 == 0 {
                for k in 0..2 {
                    let a = random_action(&mut rng);
                    w.set_joint_modes(k, &a).unwrap();
                    m.set_joint_modes(1 - k, &a.mirrored()).unwrap();
                }
            }
            contacts += step_frame(&mut w).player_contacts().count();
            step_frame(&mut m);
        }
        worst = worst.max(mirror_deviation(&w, &m));
        worst_full = worst_full.max(mirror_world(&w).max_relative_deviation(&m));
        let twice = mirror_world(&mirror_world(&w));
        involution = involution
            .max(twice.max_relative_deviation(&w))
            .max(mirror_deviation(&mirror_world(&w), &twice));
    }
    check(
        worst <= 1e-3 && worst_full <= 1e-3 && involution <= 1e-12 && contacts > 0,
        format!(
            "100 pairs x 500 frames, max deviation {worst:.2e} (full state {worst_full:.2e}), mirror twice {involution:.1e}, {contacts} contacts"
        ),
    )
}

fn rules_scenarios() -> Outcome {
    let base = MatchState::new(MatchSettings {
        dq_enabled: true,
        dojo_radius: 200.0,
        engagement_distance: 150.0,
        ..Default::default()
    })
    .unwrap();
    let touch = |m: &MatchState, player: usize, part: usize| {
        check_disqualification(
            &m.world,
            &m.settings,
            m.dojo_center,
            &FrameEvents {
                ground_touches: vec![(player, part)],
                ..Default::default()
            },
        )
    };
    let mut failures = Vec::new();

    // every non-hand/foot part, inside
    for part in (0..PART_COUNT).filter(|&p| !skeleton::is_hand_or_foot(p)) {
        let d = touch(&base, 1, part);
        if !matches!(d, Some(d) if d.player == 1 && d.part == part && d.inside_dojo) {
            failures.push(format!("part {part} inside: {d:?}"));
        }
    }
    // hands and feet, inside
    for part in (0..PART_COUNT).filter(|&p| skeleton::is_hand_or_foot(p)) {
        if let Some(d) = touch(&base, 0, part) {
            failures.push(format!("hand/foot {part} inside: {d:?}"));
        }
    }
    // anything outside, including a foot
    let mut out = base.clone();
    for part in [L_FOOT, R_FOOT, HEAD] {
        out.world.players[0].parts[part].position.x = -450.0;
        let d = touch(&out, 0, part);
        if !matches!(d, Some(d) if d.part == part && !d.inside_dojo) {
            failures.push(format!("part {part} outside: {d:?}"));
        }
    }
    // severed hand, inside
    let mut cut = base.clone();
    cut.world.players[1].parts[R_HAND].attached = false;
    if !matches!(touch(&cut, 1, R_HAND), Some(d) if d.player == 1 && d.part == R_HAND) {
        failures.push("severed hand".into());
    }
    // full match: a relaxed player falls and loses by disqualification
    let mut m = base.clone();
    let relax = Action::uniform(JointMode::Relax, GripMode::Release);
    while !m.terminal {
        m.submit_actions(&Action::hold(), &relax).unwrap();
    }
    let o = m.outcome.unwrap();
    if o.reason != Reason::Disqualification || o.winner != Winner::Player1 {
        failures.push(format!("relaxed match: {o:?}"));
    }
    check(
        failures.is_empty(),
        format!(
            "{} scripted fixtures, failures {failures:?}",
            2 * PART_COUNT + 5
        ),
    )
}

fn random_block(rng: &mut ChaCha8Rng) -> PlayerBlock {
    let mut f = || -> f64 {
        match rng.random_range(0..8) {
            0 => f64::from_bits(
                rng.random::<u64>() & !(0x7ff << 52) | (rng.random_range(1..0x7ff) << 52),
            ),
            1 => -0.0,
            2 => f64::INFINITY,
            3 => f64::MIN_POSITIVE / 3.0,
            _ => rng.random_range(-1e3..1e3),
        }
    };
    let mut b = PlayerBlock::default();
    b.positions.iter_mut().for_each(|v| *v = f());
    b.velocities.iter_mut().for_each(|v| *v = f());
    b.groin_rotation.iter_mut().for_each(|v| *v = f());
    b.injury = f();
    let a = random_action(rng);
    b.joint_modes = a.joints;
    b.grips = a.grips;
    b
}

fn random_message(rng: &mut ChaCha8Rng) -> Message {
    let word = |rng: &mut ChaCha8Rng| -> String {
        let n = rng.random_range(1..12);
        (0..n)
            .map(|i| {
                let pool = if i == 0 {
                    "abcdefghij_"
                } else {
                    "abcdefghij_0123456789"
                };
                pool.as_bytes()[rng.random_range(0..pool.len())] as char
            })
            .collect()
    };
    let settings = |rng: &mut ChaCha8Rng| -> Vec<(String, String)> {
        (0..rng.random_range(0..5))
            .map(|_| (word(rng), format!("{}", rng.random_range(-1e4..1e4))))
            .collect()
    };
    match rng.random_range(0..12) {
        0 => Message::Hello {
            version: rng.random(),
        },
        1 => Message::Ok,
        2 => Message::Err {
            code: ErrCode::ALL[rng.random_range(0..ErrCode::ALL.len())],
            text: format!("{} {}", word(rng), word(rng)),
        },
        3 => Message::NewGame {
            settings: settings(rng),
        },
        4 | 5 => Message::State(Box::new(StateMsg {
            terminal: rng.random(),
            frames_played: rng.random(),
            next_turnframes: rng.random(),
            players: [random_block(rng), random_block(rng)],
            winner: [
                WireWinner::Pending,
                WireWinner::Player1,
                WireWinner::Player2,
                WireWinner::Draw,
            ][rng.random_range(0..4)],
        })),
        6 => Message::Act {
            player: rng.random_range(1..=2),
            action: rng.random_bool(0.8).then(|| random_action(rng)),
        },
        7 => Message::Step,
        8 => Message::Reset {
            settings: settings(rng),
        },
        9 => Message::ReplaySave { name: word(rng) },
        10 => Message::Frame(Box::new(FrameMsg {
            cursor: rng.random(),
            frame_index: rng.random(),
            players: [random_block(rng), random_block(rng)],
        })),
        _ => Message::Quit,
    }
}

fn golden_transcript(addr: SocketAddr) -> Result<usize, String> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/session.txt");
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let s = TcpStream::connect(addr).map_err(|e| e.to_string())?;
    s.set_read_timeout(Some(Duration::from_secs(30))).unwrap();
    let mut reader = BufReader::new(s.try_clone().unwrap());
    let mut writer = s;
    let mut lines = text.lines();
    let mut n = 0;
    while let Some(req) = lines.next() {
        let req = req.strip_prefix("> ").ok_or("bad golden request line")?;
        let want = lines
            .next()
            .and_then(|l| l.strip_prefix("< "))
            .ok_or("bad golden reply line")?;
        writeln!(writer, "{req}").map_err(|e| e.to_string())?;
        let got = read_line(&mut reader)
            .map_err(|e| e.to_string())?
            .ok_or("server closed")?;
        if got.trim_end_matches('\n') != want {
            return Err(format!("reply {} differs", n + 1));
        }
        n += 1;
    }
    Ok(n)
}

fn wire_trace(mut env: Env, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    env.reset(seed).unwrap();
    let mut out = Vec::new();
    loop {
        let s = env.step(&[random_action(&mut rng)]).unwrap();
        out.push(encode(&Message::State(Box::new(s.info.state.to_wire()))));
        if s.terminal {
            break;
        }
    }
    env.close().unwrap();
    out
}

fn protocol() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let m = random_message(&mut rng);
        let line = encode(&m);
        match decode(&line) {
            Ok(back) if back == m && encode(&back) == line => {}
            _ => mismatches += 1,
        }
    }

    let server = serve(ServerConfig {
        addr: "127.0.0.1:0".parse().unwrap(),
        replay_dir: None,
    })
    .unwrap();
    let addr = server.local_addr();
    let golden = golden_transcript(addr);

    let tcp_env = move || {
        Env::new(
            Client::connect(addr, Duration::from_secs(5)).unwrap(),
            TaskConfig::destroy_uke(),
        )
    };
    let a = std::thread::spawn(move || wire_trace(tcp_env(), 21));
    let b = std::thread::spawn(move || wire_trace(tcp_env(), 22));
    let (a, b) = (a.join().unwrap(), b.join().unwrap());
    let local = |seed| {
        let client = Client::local(Arc::new(SessionConfig::default()));
        wire_trace(Env::new(client, TaskConfig::destroy_uke()), seed)
    };
    let independent = a == local(21) && b == local(22) && a != b;
    server.shutdown();

    let golden_ok = golden.is_ok();
    check(
        mismatches == 0 && golden_ok && independent,
        format!(
            "10000 messages, {mismatches} round-trip mismatches; golden {}; concurrent sessions match solo runs: {independent}",
            match golden {
                Ok(n) => format!("{n} replies match"),
                Err(e) => e,
            }
        ),
    )
}

/// Share of 100 random 1000-frame matches with any player-player contact,
/// and the total contact count.
fn contact_rate(distance: f64) -> (usize, usize) {
    let mut with_contact = 0;
    let mut total = 0;
    for ep in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(distance.to_bits(), ep));
        let mut m = MatchState::new(MatchSettings {
            engagement_distance: distance,
            seed: ep,
            ..Default::default()
        })
        .unwrap();
        let mut n = 0;
        while !m.terminal {
            let (a, b) = (random_action(&mut rng), random_action(&mut rng));
            let r = m.submit_actions(&a, &b).unwrap();
            n += r
                .events
                .iter()
                .map(|e| e.player_contacts().count())
                .sum::<usize>();
        }
        with_contact += usize::from(n > 0);
        total += n;
    }
    (with_contact, total)
}

fn calibration() -> Outcome {
    let (far_eps, far_total) = contact_rate(1500.0);
    let (near_eps, near_total) = contact_rate(100.0);
    check(
        far_total == 0 && near_eps >= 50,
        format!(
            "distance 1500: {far_eps}/100 episodes with contact ({far_total} contacts); distance 100: {near_eps}/100 ({near_total} contacts)"
        ),
    )
}

fn mean_return(agent: &AgentHandle, seeds: std::ops::Range<u64>) -> f64 {
    let mut env = local_env(TaskConfig::destroy_uke());
    let n = seeds.end - seeds.start;
    let mut sum = 0.0;
    for s in seeds {
        let mut p = agent.policy();
        sum += run_episode(&mut env, &mut [p.as_mut()], mix(0x5eed, s))
            .unwrap()
            .returns[0];
    }
    sum / n as f64
}

fn learnability() -> (Outcome, AgentHandle) {
    let t = Instant::now();
    let res = search_agent_train(
        &TaskConfig::destroy_uke(),
        &SearchConfig::default(),
        2000,
        1,
    )
    .unwrap();
    let secs = t.elapsed().as_secs_f64();
    let random = mean_return(&AgentHandle::random(99), 0..200);
    let trained = mean_return(&res.agent, 0..200);
    let ratio = trained / random;
    (
        check(
            res.episodes_used <= 2000 && random > 0.0 && ratio >= 3.0,
            format!(
                "{} episodes in {secs:.0} s; mean return over 200 held-out seeds: trained {trained:.3}, random {random:.3}, ratio {ratio:.2}",
                res.episodes_used
            ),
        ),
        res.agent,
    )
}

fn scaling() -> Vec<(&'static str, Outcome)> {
    let fpt = vec![1, 2, 5, 10, 20, 50];
    // best of two passes per cell
    let mut fps = vec![0.0f64; fpt.len()];
    for _ in 0..2 {
        let rows = benchmark(&BenchConfig {
            frames_per_turn: fpt.clone(),
            instances: vec![1],
            duration: Duration::from_secs(3),
            transport: Transport::Tcp,
            ..BenchConfig::default()
        })
        .unwrap();
        for (best, r) in fps.iter_mut().zip(&rows) {
            *best = best.max(r.aggregate_fps);
        }
    }
    let monotone = fps.windows(2).all(|w| w[1] > w[0]);
    let listing = fpt
        .iter()
        .zip(&fps)
        .map(|(f, v)| format!("{f}:{v:.0}"))
        .collect::<Vec<_>>()
        .join(" ");

    let headless = benchmark(&BenchConfig {
        frames_per_turn: vec![50],
        instances: vec![1],
        duration: Duration::from_secs(2),
        transport: Transport::Local,
        ..BenchConfig::default()
    })
    .unwrap()[0]
        .aggregate_fps;

    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let parallel = if cores < 4 {
        Outcome {
            verdict: Verdict::Unverified,
            detail: format!("{cores} core(s) available, needs at least 4"),
        }
    } else {
        let rows = benchmark(&BenchConfig {
            frames_per_turn: vec![20],
            instances: vec![1, 4],
            duration: Duration::from_secs(2),
            transport: Transport::Local,
            ..BenchConfig::default()
        })
        .unwrap();
        let ratio = rows[1].aggregate_fps / rows[0].aggregate_fps;
        check(
            ratio >= 3.0,
            format!(
                "1 instance {:.0} fps, 4 instances {:.0} fps, ratio {ratio:.2}",
                rows[0].aggregate_fps, rows[1].aggregate_fps
            ),
        )
    };
    vec![
        ("scaling: 4 instances >= 3x one", parallel),
        (
            "scaling: fps monotone in frames per turn",
            check(monotone, format!("fpt:fps over tcp {listing}")),
        ),
        (
            "scaling: single instance >= 5000 fps",
            check(headless >= 5000.0, format!("{headless:.0} fps headless")),
        ),
    ]
}

fn pool_statistics() -> Outcome {
    let cfg = OpponentPoolConfig {
        past_pool: (0..5).map(AgentHandle::random).collect(),
        ..OpponentPoolConfig::default()
    };
    let s = simulate_schedule(&cfg, 100_000, 100_000, 0x9001).unwrap();
    // tallied here from the raw counts
    let n = s.category_counts.iter().sum::<usize>() as f64;
    let f: Vec<f64> = s.category_counts.iter().map(|&c| c as f64 / n).collect();
    let swap = s.swaps as f64 / (s.games - 1) as f64;
    let ok = f
        .iter()
        .zip([0.2, 0.2, 0.6])
        .all(|(got, want)| (got - want).abs() <= 0.01)
        && (swap - 0.01).abs() <= 0.002
        && n == 100_000.0;
    check(
        ok,
        format!(
            "frequencies random {:.4} past {:.4} self {:.4}, swap rate {swap:.4}",
            f[0], f[1], f[2]
        ),
    )
}

fn crossplay(baseline: AgentHandle) -> Outcome {
    let pool = vec![
        AgentHandle::random(1),
        AgentHandle::random(2),
        baseline,
        AgentHandle::hold(),
    ];
    let task = TaskConfig::aikido_dojo();
    let m = crossplay_evaluate(&pool, 4, &task, 0xc0).unwrap();
    let again = crossplay_evaluate(&pool, 4, &task, 0xc0).unwrap();
    let r = antisymmetry_report(&m);
    let report = r.render(&m.agents);
    let table = m.table();
    let complete = m.entries.len() == 4
        && m.entries.iter().all(|row| row.len() == 4)
        && m.entries.iter().flatten().all(|e| (0.0..=1.0).contains(e));
    let deterministic = m == again && table == again.table();
    print!("{table}{report}");
    check(
        complete && deterministic && report.starts_with("# dojo antisymmetry v1"),
        format!(
            "4x4 matrix, 4 episodes per cell, mean deviation {:.3}, max {:.3}, deterministic {deterministic}",
            r.mean_deviation, r.max_deviation
        ),
    )
}

type Results = Vec<(&'static str, Outcome)>;

fn run(results: &mut Results, name: &'static str, f: impl FnOnce() -> Outcome) {
    let t = Instant::now();
    let o = f();
    report_line(name, &o, t.elapsed().as_secs_f64());
    results.push((name, o));
}

fn main() -> ExitCode {
    let mut results = Results::new();
    let r = &mut results;
    run(r, "determinism", determinism);
    run(r, "replay round trip", replay_round_trip);
    run(r, "injury monotonicity and reward", injury_and_reward);
    run(r, "observation contract", observation_contract);
    run(r, "mirror property", mirror_property);
    run(r, "rules scenarios", rules_scenarios);
    run(r, "protocol", protocol);
    run(r, "calibration", calibration);
    let mut baseline = None;
    run(r, "learnability: search >= 3x random", || {
        let (o, agent) = learnability();
        baseline = Some(agent);
        o
    });
    for (name, o) in scaling() {
        report_line(name, &o, 0.0);
        r.push((name, o));
    }
    run(r, "opponent pool statistics", pool_statistics);
    let base = baseline.expect("baseline trained");
    run(r, "crossplay", || crossplay(base));

    let failed = results
        .iter()
        .filter(|(_, o)| matches!(o.verdict, Verdict::Fail))
        .count();
    let unverified = results
        .iter()
        .filter(|(_, o)| matches!(o.verdict, Verdict::Unverified))
        .count();
    println!(
        "acceptance: {} passed, {failed} failed, {unverified} unverified",
        results.len() - failed - unverified
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn report_line(name: &str, o: &Outcome, secs: f64) {
    let tag = match o.verdict {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Unverified => "UNVERIFIED",
    };
    let time = if secs > 0.0 {
        format!(" [{secs:.1} s]")
    } else {
        String::new()
    };
    println!("{tag:<10} {name}: {}{time}", o.detail);
}
