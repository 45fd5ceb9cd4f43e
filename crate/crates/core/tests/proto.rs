use std::io::{BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::time::Duration;

use dojo::proto::message::{FRAME_FIELDS, PLAYER_FIELDS, STATE_FIELDS};
use dojo::proto::{
    decode, encode, gateway, read_line, serve, DecodeError, ErrCode, FrameMsg, GatewayConfig,
    Message, PlayerBlock, ServerConfig, ServerHandle, StateMsg, WireWinner,
};
use dojo::sim::{Action, GripMode, JointMode, JOINT_COUNT, PART_COUNT};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

struct Conn {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Conn {
    fn open(addr: SocketAddr) -> Conn {
        let s = TcpStream::connect(addr).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(30))).unwrap();
        Conn {
            reader: BufReader::new(s.try_clone().unwrap()),
            writer: s,
        }
    }

    fn send(&mut self, line: &str) {
        self.writer.write_all(line.as_bytes()).unwrap();
        self.writer.write_all(b"\n").unwrap();
    }

    fn recv(&mut self) -> String {
        read_line(&mut self.reader).unwrap().expect("server closed")
    }

    fn ask(&mut self, line: &str) -> String {
        self.send(line);
        self.recv()
    }
}

fn start(replay_dir: Option<PathBuf>) -> ServerHandle {
    serve(ServerConfig {
        addr: "127.0.0.1:0".parse().unwrap(),
        replay_dir,
    })
    .unwrap()
}

fn fields(line: &str) -> Vec<&str> {
    line.split_whitespace().collect()
}

// --- generators ---

fn any_float() -> impl Strategy<Value = f64> {
    prop_oneof![
        4 => -1e3f64..1e3,
        2 => any::<f64>().prop_filter("finite", |v| v.is_finite()),
        1 => Just(0.0),
        1 => Just(-0.0),
        1 => Just(f64::INFINITY),
        1 => Just(f64::NEG_INFINITY),
        1 => Just(f64::MIN_POSITIVE / 4.0),
    ]
}

fn joint_mode() -> impl Strategy<Value = JointMode> {
    (0usize..4).prop_map(|i| JointMode::ALL[i])
}

fn grip_mode() -> impl Strategy<Value = GripMode> {
    prop_oneof![Just(GripMode::Grip), Just(GripMode::Release)]
}

fn action() -> impl Strategy<Value = Action> {
    (
        prop::collection::vec(joint_mode(), JOINT_COUNT),
        grip_mode(),
        grip_mode(),
    )
        .prop_map(|(j, g0, g1)| Action {
            joints: j.try_into().unwrap(),
            grips: [g0, g1],
        })
}

fn block() -> impl Strategy<Value = PlayerBlock> {
    (
        prop::collection::vec(any_float(), 6 * PART_COUNT + 9),
        prop::collection::vec(joint_mode(), JOINT_COUNT),
        grip_mode(),
        grip_mode(),
        any_float(),
    )
        .prop_map(|(f, j, g0, g1, injury)| {
            let n = 3 * PART_COUNT;
            PlayerBlock {
                positions: f[..n].try_into().unwrap(),
                velocities: f[n..2 * n].try_into().unwrap(),
                groin_rotation: f[2 * n..].try_into().unwrap(),
                joint_modes: j.try_into().unwrap(),
                grips: [g0, g1],
                injury,
            }
        })
}

fn settings() -> impl Strategy<Value = Vec<(String, String)>> {
    prop::collection::vec(("[a-z_][a-z0-9_]{0,10}", "[!-~]{1,12}"), 0..5)
}

fn message() -> impl Strategy<Value = Message> {
    let winner = prop_oneof![
        Just(WireWinner::Pending),
        Just(WireWinner::Player1),
        Just(WireWinner::Player2),
        Just(WireWinner::Draw)
    ];
    prop_oneof![
        any::<u32>().prop_map(|version| Message::Hello { version }),
        Just(Message::Ok),
        ((0usize..ErrCode::ALL.len()), "[ -~]{0,40}").prop_map(|(c, text)| Message::Err {
            code: ErrCode::ALL[c],
            text
        }),
        settings().prop_map(|settings| Message::NewGame { settings }),
        (
            any::<bool>(),
            any::<u64>(),
            any::<u32>(),
            block(),
            block(),
            winner
        )
            .prop_map(|(terminal, frames_played, next_turnframes, a, b, winner)| {
                Message::State(Box::new(StateMsg {
                    terminal,
                    frames_played,
                    next_turnframes,
                    players: [a, b],
                    winner,
                }))
            }),
        (1u8..=2, prop::option::of(action()))
            .prop_map(|(player, action)| Message::Act { player, action }),
        Just(Message::Step),
        settings().prop_map(|settings| Message::Reset { settings }),
        "[A-Za-z0-9_-][A-Za-z0-9_.-]{0,20}".prop_map(|name| Message::ReplaySave { name }),
        "[A-Za-z0-9_-][A-Za-z0-9_.-]{0,20}".prop_map(|name| Message::ReplayLoad { name }),
        (any::<u64>(), any::<u64>(), block(), block()).prop_map(|(cursor, frame_index, a, b)| {
            Message::Frame(Box::new(FrameMsg {
                cursor,
                frame_index,
                players: [a, b],
            }))
        }),
        Just(Message::Quit),
    ]
}

#[test]
fn round_trip_ten_thousand_messages() {
    let mut runner = TestRunner::new(Config {
        cases: 10_000,
        ..Config::default()
    });
    runner
        .run(&message(), |m| {
            let line = encode(&m);
            prop_assert!(line.ends_with('\n'));
            prop_assert_eq!(line.matches('\n').count(), 1);
            prop_assert!(line.is_ascii());
            let back = decode(&line).map_err(|e| TestCaseError::fail(format!("{e}: {line}")))?;
            prop_assert_eq!(&back, &m);
            // PartialEq treats -0.0 == 0.0; the re-encoded text pins the bits
            prop_assert_eq!(encode(&back), line);
            Ok(())
        })
        .unwrap();
}

#[test]
fn floats_are_bit_exact() {
    let mut runner = TestRunner::new(Config {
        cases: 2000,
        ..Config::default()
    });
    runner
        .run(&any::<f64>(), |v| {
            let mut b = PlayerBlock::default();
            b.injury = v;
            let m = Message::State(Box::new(StateMsg {
                terminal: false,
                frames_played: 0,
                next_turnframes: 10,
                players: [b.clone(), b],
                winner: WireWinner::Pending,
            }));
            let Message::State(s) = decode(&encode(&m)).unwrap() else {
                unreachable!()
            };
            let got = s.players[0].injury;
            prop_assert!(got.to_bits() == v.to_bits() || (v.is_nan() && got.is_nan()));
            Ok(())
        })
        .unwrap();
    let Message::State(s) = decode(&encode(&Message::State(Box::new(StateMsg {
        terminal: false,
        frames_played: 0,
        next_turnframes: 1,
        players: [
            PlayerBlock {
                injury: 0.1,
                ..PlayerBlock::default()
            },
            PlayerBlock::default(),
        ],
        winner: WireWinner::Pending,
    }))))
    .unwrap() else {
        unreachable!()
    };
    assert_eq!(s.players[0].injury.to_bits(), 0.1f64.to_bits());
}

#[test]
fn field_counts_follow_the_layout() {
    // 21 parts x 3 x 2, 9 rotation, 20 joints, 2 grips, 1 injury
    assert_eq!(PLAYER_FIELDS, 63 + 63 + 9 + 20 + 2 + 1);
    assert_eq!(PLAYER_FIELDS, 158);
    assert_eq!(STATE_FIELDS, 320);
    assert_eq!(FRAME_FIELDS, 318);
}

#[test]
fn encoding_examples() {
    assert_eq!(encode(&Message::Ok), "OK\n");
    let act = encode(&Message::Act {
        player: 1,
        action: Some(Action::hold()),
    });
    let expected = format!("ACT 1{}{}\n", " 1".repeat(20), " 2".repeat(2));
    assert_eq!(act, expected);

    let mut bad = fields("ACT 1 1 1 1 1 1 1 1 1 1 1 1 1 1 1 1 1 1 1 1 1 2 2")
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>();
    bad[2] = "5".into();
    assert_eq!(
        decode(&bad.join(" ")),
        Err(DecodeError::Range {
            field: 2,
            text: "5".into()
        })
    );

    let state = encode(&Message::State(Box::new(StateMsg {
        terminal: false,
        frames_played: 0,
        next_turnframes: 10,
        players: [PlayerBlock::default(), PlayerBlock::default()],
        winner: WireWinner::Pending,
    })));
    let f = fields(&state);
    assert_eq!(f.len(), 1 + 320);
    let short = f[..f.len() - 1].join(" ");
    assert_eq!(
        decode(&short),
        Err(DecodeError::FieldCount {
            expected: 320,
            got: 319
        })
    );
    assert!(matches!(
        decode("HELLO"),
        Err(DecodeError::FieldCount { .. })
    ));
    assert!(matches!(
        decode("WHAT 1"),
        Err(DecodeError::MalformedTag(_))
    ));
    assert!(matches!(
        decode("HELLO x"),
        Err(DecodeError::Range { field: 1, .. })
    ));
}

// --- live server ---

const GOLDEN_SCRIPT: &[&str] = &[
    "HELLO 1",
    "STEP",
    "NEWGAME matchframes=30 turnframes=10 distance=150 seed=7 builtin=random",
    "STEP",
    "ACT 1 1 1 1 1 1 1 1 1 1 1 1 1 1 1 1 1 1 1 1 1 2 2",
    "ACT 1 -",
    "ACT 2 -",
    "STEP",
    "ACT 1 3 3 3 3 3 3 3 3 3 3 3 3 3 3 3 3 3 3 3 3 1 1",
    "ACT 2 -",
    "STEP",
    "ACT 9 -",
    "ACT 1 4 4 4 4 4 4 4 4 4 4 4 4 4 4 4 4 4 4 4 4 2 2",
    "ACT 2 2 2 2 2 2 2 2 2 2 2 2 2 2 2 2 2 2 2 2 2 1 2",
    "STEP",
    "STEP",
    "RESET",
    "NEWGAME bogus=1",
    "QUIT",
];

fn run_transcript(addr: SocketAddr, script: &[&str]) -> String {
    let mut c = Conn::open(addr);
    let mut out = String::new();
    for line in script {
        out.push_str(&format!("> {line}\n"));
        let reply = c.ask(line);
        out.push_str(&format!("< {reply}"));
    }
    out
}

#[test]
fn golden_session_transcript() {
    let server = start(None);
    let got = run_transcript(server.local_addr(), GOLDEN_SCRIPT);
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/session.txt");
    if std::env::var_os("DOJO_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &got).unwrap();
    }
    let want = std::fs::read_to_string(&path).expect("golden transcript missing");
    for (i, (g, w)) in got.lines().zip(want.lines()).enumerate() {
        assert_eq!(g, w, "transcript line {}", i + 1);
    }
    assert_eq!(got.lines().count(), want.lines().count());

    // structure, independent of the stored bytes
    let replies: Vec<&str> = got.lines().filter_map(|l| l.strip_prefix("< ")).collect();
    assert_eq!(replies[0], "OK");
    assert!(replies[1].starts_with("ERR order"));
    let s = fields(replies[2]);
    assert_eq!((s[0], s[1], s[2], s[3]), ("STATE", "0", "0", "10"));
    assert!(replies[3].starts_with("ERR order"));
    assert_eq!(replies[4], "OK");
    assert!(replies[5].starts_with("ERR order"));
    assert_eq!(fields(replies[7])[2], "10");
    assert_eq!(fields(replies[10])[2], "20");
    assert!(replies[11].starts_with("ERR malformed"));
    let last = fields(replies[14]);
    assert_eq!((last[1], last[2]), ("1", "30"));
    assert_ne!(*last.last().unwrap(), "0");
    assert!(replies[15].starts_with("ERR order"));
    assert_eq!(fields(replies[16])[..3], ["STATE", "0", "0"]);
    assert_eq!(
        replies[16], replies[2],
        "RESET with no settings restarts the same match"
    );
    assert!(replies[17].starts_with("ERR order"));
    assert_eq!(replies[18], "OK");
    server.shutdown();
}

fn play_match(addr: SocketAddr, seed: u64) -> Vec<String> {
    let mut c = Conn::open(addr);
    assert_eq!(c.ask("HELLO 1"), "OK\n");
    let mut states = vec![c.ask(&format!(
        "NEWGAME matchframes=1000 turnframes=10 distance=150 seed={seed} builtin=random"
    ))];
    for _ in 0..100 {
        assert_eq!(fields(states.last().unwrap())[1], "0");
        assert_eq!(c.ask("ACT 1 -"), "OK\n");
        assert_eq!(c.ask("ACT 2 -"), "OK\n");
        states.push(c.ask("STEP"));
    }
    let last = fields(states.last().unwrap());
    assert_eq!(
        (last[1], last[2]),
        ("1", "1000"),
        "terminal after 100 turns"
    );
    assert_eq!(c.ask("QUIT"), "OK\n");
    states
}

#[test]
fn hundred_turns_and_concurrent_sessions_are_independent() {
    let server = start(None);
    let addr = server.local_addr();
    let run_pair = || {
        let a = std::thread::spawn(move || play_match(addr, 11));
        let b = std::thread::spawn(move || play_match(addr, 12));
        (a.join().unwrap(), b.join().unwrap())
    };
    let (a1, b1) = run_pair();
    let (a2, b2) = run_pair();
    assert_eq!(a1, a2);
    assert_eq!(b1, b2);
    assert_ne!(a1, b1);
    assert_eq!(
        a1[0], b1[0],
        "the initial state does not depend on the seed"
    );
    server.shutdown();
}

#[test]
fn version_mismatch_closes_the_connection() {
    let server = start(None);
    let mut c = Conn::open(server.local_addr());
    assert!(c.ask("HELLO 99").starts_with("ERR version"));
    assert!(read_line(&mut c.reader).unwrap().is_none());
    server.shutdown();
}

#[test]
fn overlong_line_drops_the_connection() {
    let server = start(None);
    let mut c = Conn::open(server.local_addr());
    let junk = "X".repeat(dojo::proto::MAX_LINE + 10);
    let _ = c.writer.write_all(junk.as_bytes());
    assert!(matches!(read_line(&mut c.reader), Ok(None) | Err(_)));
    server.shutdown();
}

#[test]
fn replay_save_and_load_over_the_wire() {
    let dir = tempfile::tempdir().unwrap();
    let server = start(Some(dir.path().to_path_buf()));
    let mut c = Conn::open(server.local_addr());
    assert_eq!(c.ask("HELLO 1"), "OK\n");
    let first = c.ask("NEWGAME matchframes=20 turnframes=10 seed=3 builtin=random replay=auto");
    let mut states = vec![first];
    for _ in 0..2 {
        c.ask("ACT 1 -");
        c.ask("ACT 2 -");
        states.push(c.ask("STEP"));
    }
    assert!(dir.path().join("auto.replay").exists());
    assert_eq!(c.ask("REPLAYSAVE manual"), "OK\n");

    c.send("REPLAYLOAD manual");
    let mut frames = Vec::new();
    loop {
        let line = c.recv();
        if line == "OK\n" {
            break;
        }
        frames.push(decode(&line).unwrap());
    }
    assert_eq!(frames.len(), 21);
    // frame 0, 10, 20 carry the same bodies as the STATE lines
    for (k, state) in states.iter().enumerate() {
        let (Message::Frame(f), Message::State(s)) = (&frames[10 * k], decode(state).unwrap())
        else {
            panic!("unexpected messages")
        };
        assert_eq!(f.cursor, 10 * k as u64);
        assert_eq!(f.players, s.players);
    }
    assert!(c.ask("REPLAYLOAD missing").starts_with("ERR replay"));
    assert!(c.ask("REPLAYSAVE ../escape").starts_with("ERR malformed"));
    server.shutdown();
}

// --- gateway ---

fn ws_text(ws: &mut tungstenite::WebSocket<TcpStream>) -> String {
    loop {
        match ws.read().unwrap() {
            tungstenite::Message::Text(t) => return t,
            _ => continue,
        }
    }
}

#[test]
fn gateway_relays_lines_unchanged() {
    let server = start(None);
    let gw = gateway(GatewayConfig {
        addr: "127.0.0.1:0".parse().unwrap(),
        upstream: server.local_addr(),
        connect_timeout: Duration::from_secs(2),
    })
    .unwrap();

    let script = [
        "HELLO 1",
        "NEWGAME matchframes=20 seed=5 builtin=random",
        "this is not a message",
        "ACT 1 -",
        "ACT 2 -",
        "STEP",
        "QUIT",
    ];
    let mut direct = Conn::open(server.local_addr());
    let stream = TcpStream::connect(gw.local_addr()).unwrap();
    let url = format!("ws://{}/", gw.local_addr());
    let (mut ws, _) = tungstenite::client(url, stream).unwrap();
    for line in script {
        let want = direct.ask(line);
        ws.send(tungstenite::Message::Text(line.to_string()))
            .unwrap();
        let got = ws_text(&mut ws);
        assert!(!got.ends_with('\n'));
        assert_eq!(format!("{got}\n"), want, "relay of `{line}`");
    }
    gw.shutdown();
    server.shutdown();
}

#[test]
fn gateway_refuses_when_upstream_is_down() {
    let dead = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap()
    };
    let gw = gateway(GatewayConfig {
        addr: "127.0.0.1:0".parse().unwrap(),
        upstream: dead,
        connect_timeout: Duration::from_millis(500),
    })
    .unwrap();
    let stream = TcpStream::connect(gw.local_addr()).unwrap();
    let url = format!("ws://{}/", gw.local_addr());
    match tungstenite::client(url, stream) {
        Err(tungstenite::HandshakeError::Failure(tungstenite::Error::Http(resp))) => {
            assert_eq!(resp.status(), 502);
            let body = String::from_utf8(resp.body().clone().unwrap_or_default()).unwrap();
            assert!(body.contains("unreachable"), "diagnostic: {body}");
        }
        other => panic!("handshake should fail, got {:?}", other.map(|_| ())),
    }
    gw.shutdown();
}
