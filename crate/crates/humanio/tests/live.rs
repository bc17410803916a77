use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::json;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

use rlframe_core::env::{
    ActionVector, EnvDescriptor, EnvError, Environment, RewardVector, State, TankAction, TankBattle,
};
use rlframe_core::learn::{create_learner, LearnerSpec, MonitorSpec};
use rlframe_core::net::{Activation, DenseLayer, Loss, NetworkConfig, OptimizerConfig, PolicyNetwork};
use rlframe_core::wire::{Frame, FrameKind};
use rlframe_humanio::{serve, HumanEnvironment, HumanError, ServerConfig, Snapshot, EPISODE_END, SNAPSHOT};

const NO_OP: usize = TankAction::NoOp as usize;
const FIRE: usize = TankAction::Fire as usize;

/// Passes everything through and remembers the actions it received.
struct Recorder {
    inner: TankBattle,
    log: Arc<Mutex<Vec<Vec<usize>>>>,
}

impl Environment for Recorder {
    fn descriptor(&self) -> &EnvDescriptor {
        self.inner.descriptor()
    }
    fn clone_env(&mut self) -> Result<Box<dyn Environment>, EnvError> {
        self.inner.clone_env()
    }
    fn reset(&mut self) -> Result<(), EnvError> {
        self.inner.reset()
    }
    fn step(&mut self, actions: &ActionVector) -> Result<RewardVector, EnvError> {
        self.log.lock().unwrap().push(actions.0.clone());
        self.inner.step(actions)
    }
    fn get_state(&mut self) -> Result<Vec<State>, EnvError> {
        self.inner.get_state()
    }
    fn is_terminal(&mut self) -> Result<bool, EnvError> {
        self.inner.is_terminal()
    }
    fn elapsed_steps(&self) -> usize {
        self.inner.elapsed_steps()
    }
    fn supports_human_slots(&self) -> bool {
        true
    }
    fn render(&self) -> Option<rlframe_core::env::GridRender> {
        self.inner.render()
    }
}

fn recorded(tanks: TankBattle) -> (HumanEnvironment, Arc<Mutex<Vec<Vec<usize>>>>) {
    let log = Arc::new(Mutex::new(Vec::new()));
    let env = HumanEnvironment::new(Box::new(Recorder {
        inner: tanks,
        log: Arc::clone(&log),
    }));
    (env, log)
}

type Client = WebSocket<MaybeTlsStream<TcpStream>>;

fn connect(addr: std::net::SocketAddr) -> Client {
    let (ws, _) = tungstenite::connect(format!("ws://{addr}")).unwrap();
    if let MaybeTlsStream::Plain(s) = ws.get_ref() {
        s.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    }
    ws
}

fn next_frame(ws: &mut Client) -> Frame {
    loop {
        match ws.read().unwrap() {
            Message::Text(t) => return Frame::decode(&t).unwrap(),
            _ => continue,
        }
    }
}

fn quiet_config(capacity: usize) -> ServerConfig {
    ServerConfig {
        port: 0,
        queue_capacity: capacity,
        ..Default::default()
    }
}

#[test]
fn thousand_tick_episode_yields_thousand_ordered_snapshots() {
    let mut env = HumanEnvironment::new(Box::new(TankBattle::with_options(3, 2, 1000, false).unwrap()));
    env.attach_human(0, NO_OP).unwrap();
    env.set_tick_rate(Some(2000.0));
    let server = serve(&quiet_config(4096), env.slots().to_vec(), env.broadcaster()).unwrap();
    let mut ws = connect(server.local_addr());
    assert!(server.wait_for_clients(1, Duration::from_secs(5)));
    let runner = thread::spawn(move || {
        env.reset().unwrap();
        while !env.is_terminal().unwrap() {
            env.step(&ActionVector(vec![0, 0])).unwrap();
        }
    });
    let mut ticks = Vec::new();
    let mut terminal_seen = false;
    loop {
        let f = next_frame(&mut ws);
        if f.method == EPISODE_END {
            assert_eq!(f.payload["length"], 1000);
            break;
        }
        assert_eq!(f.method, SNAPSHOT);
        let s = Snapshot::from_payload(&f.payload).unwrap();
        assert_eq!(s.grid.len(), TankBattle::SIZE);
        assert!(s.grid[TankBattle::SIZE - 1].contains('H'));
        assert!(!terminal_seen);
        terminal_seen = s.terminal;
        ticks.push(s.tick);
    }
    runner.join().unwrap();
    assert_eq!(ticks.len(), 1000);
    assert!(ticks.windows(2).all(|w| w[0] < w[1]));
    assert!(terminal_seen);
}

#[test]
fn scripted_commands_reach_the_environment() {
    let seed = 8;
    let (mut env, log) = recorded(TankBattle::with_options(seed, 2, 60, true).unwrap());
    env.set_tick_rate(None);
    let slot = env.attach_human(0, NO_OP).unwrap();
    let script: Vec<(u64, usize)> = vec![(0, 1), (3, 5), (4, 2), (10, 4), (11, 5), (30, 3)];
    let mut expected = Vec::new();
    let mut observed = Vec::new();
    env.reset().unwrap();
    let mut tick = 0u64;
    while !env.is_terminal().unwrap() {
        let mut pending = None;
        for &(at, action) in &script {
            if at == tick {
                slot.submit(action);
                pending = Some(action);
            }
        }
        let ai = (tick % 6) as usize;
        let r = env.step(&ActionVector(vec![FIRE, ai])).unwrap();
        observed.push((r, env.get_state().unwrap()));
        expected.push(vec![pending.unwrap_or(NO_OP), ai]);
        tick += 1;
    }
    let sent = log.lock().unwrap().clone();
    assert_eq!(sent, expected);

    let mut replay = TankBattle::with_options(seed, 2, 60, true).unwrap();
    replay.reset().unwrap();
    for (actions, (r, s)) in sent.iter().zip(&observed) {
        assert_eq!(&replay.step(&ActionVector(actions.clone())).unwrap(), r);
        assert_eq!(&replay.get_state().unwrap(), s);
    }
}

fn tank_network(agents: usize) -> PolicyNetwork {
    let inputs = 2 * TankBattle::SIZE * TankBattle::SIZE + 7 * agents;
    let layer = |i, o, a| DenseLayer {
        in_dim: i,
        out_dim: o,
        activation: a,
    };
    PolicyNetwork::create_network(vec![
        NetworkConfig {
            name: "actor".into(),
            seed: 1,
            layers: vec![layer(inputs, 16, Activation::Tanh), layer(16, 6, Activation::Softmax)],
            loss: Loss::A3cComposite {
                value_coef: 0.5,
                entropy_coef: 0.01,
            },
            optimizer: OptimizerConfig::adam(1e-3),
        },
        NetworkConfig {
            name: "critic".into(),
            seed: 2,
            layers: vec![layer(inputs, 16, Activation::Tanh), layer(16, 1, Activation::Linear)],
            loss: Loss::Mse,
            optimizer: OptimizerConfig::adam(1e-3),
        },
    ])
    .unwrap()
}

#[test]
fn learner_only_drives_ai_agents() {
    let (mut env, log) = recorded(TankBattle::with_options(5, 2, 40, true).unwrap());
    env.set_tick_rate(None);
    env.attach_human(0, FIRE).unwrap();
    let monitor = MonitorSpec {
        steps_per_epoch: 200,
        eval_episodes: 2,
        ..Default::default()
    };
    let spec = LearnerSpec {
        algorithm: "a3c".into(),
        seed: 5,
        ..Default::default()
    };
    let mut learner = create_learner(monitor, spec, Box::new(env), Some(tank_network(2))).unwrap();
    learner.evaluate(None).unwrap();
    let sent = log.lock().unwrap().clone();
    assert!(!sent.is_empty());
    assert!(sent.iter().all(|a| a[0] == FIRE));
}

#[test]
fn client_commands_arrive_within_one_tick() {
    let (mut env, log) = recorded(TankBattle::with_options(2, 2, 80, false).unwrap());
    env.attach_human(0, NO_OP).unwrap();
    env.set_tick_rate(Some(40.0));
    let server = serve(&quiet_config(64), env.slots().to_vec(), env.broadcaster()).unwrap();
    let mut ws = connect(server.local_addr());
    assert!(server.wait_for_clients(1, Duration::from_secs(5)));
    let runner = thread::spawn(move || {
        env.reset().unwrap();
        while !env.is_terminal().unwrap() {
            env.step(&ActionVector(vec![0, 0])).unwrap();
        }
    });
    let mut sent = Vec::new();
    loop {
        let f = next_frame(&mut ws);
        if f.method == EPISODE_END {
            break;
        }
        let tick = f.payload["tick"].as_u64().unwrap();
        if tick.is_multiple_of(5) && tick < 70 {
            let action = 1 + (tick as usize / 5) % 5;
            let cmd = Frame::notification("command", json!({ "slot": 0, "action": action }));
            ws.send(Message::text(cmd.encode())).unwrap();
            sent.push((tick, action));
        }
    }
    runner.join().unwrap();
    let human: Vec<usize> = log.lock().unwrap().iter().map(|a| a[0]).collect();
    assert_eq!(human.len(), 80);
    let fired: Vec<usize> = (0..human.len()).filter(|&i| human[i] != NO_OP).collect();
    assert_eq!(fired.len(), sent.len(), "{human:?}");
    for ((tick, action), applied_index) in sent.iter().zip(&fired) {
        let applied_tick = *applied_index as u64 + 1;
        assert!(
            applied_tick == tick + 1 || applied_tick == tick + 2,
            "command after tick {tick} applied at {applied_tick}"
        );
        assert_eq!(human[*applied_index], *action);
    }
}

#[test]
fn late_joiner_sees_only_new_ticks() {
    let mut env = HumanEnvironment::new(Box::new(TankBattle::with_options(3, 1, 100, false).unwrap()));
    env.attach_human(0, NO_OP).unwrap();
    env.set_tick_rate(None);
    let server = serve(&quiet_config(16), env.slots().to_vec(), env.broadcaster()).unwrap();
    env.reset().unwrap();
    for _ in 0..10 {
        env.step(&ActionVector(vec![0])).unwrap();
    }
    let mut ws = connect(server.local_addr());
    assert!(server.wait_for_clients(1, Duration::from_secs(5)));
    env.step(&ActionVector(vec![0])).unwrap();
    let f = next_frame(&mut ws);
    assert_eq!(f.payload["tick"], 11);
}

#[test]
fn disconnect_restores_the_default_action() {
    let mut env = HumanEnvironment::new(Box::new(TankBattle::new(1, 2).unwrap()));
    let slot = env.attach_human(1, NO_OP).unwrap();
    let server = serve(&quiet_config(16), env.slots().to_vec(), env.broadcaster()).unwrap();
    let mut ws = connect(server.local_addr());
    assert!(server.wait_for_clients(1, Duration::from_secs(5)));
    let req = Frame::request(1, "command", json!({ "slot": 1, "action": FIRE }));
    ws.send(Message::text(req.encode())).unwrap();
    let ack = next_frame(&mut ws);
    assert_eq!((ack.kind, ack.id), (FrameKind::Response, 1));
    ws.close(None).unwrap();
    let deadline = Instant::now() + Duration::from_secs(5);
    while server.client_count() > 0 && Instant::now() < deadline {
        thread::sleep(Duration::from_millis(5));
    }
    assert_eq!(server.client_count(), 0);
    assert_eq!(slot.resolve(u64::MAX), NO_OP);
}

#[test]
fn bad_commands_get_error_frames() {
    let mut env = HumanEnvironment::new(Box::new(TankBattle::new(1, 2).unwrap()));
    env.attach_human(0, NO_OP).unwrap();
    let server = serve(&quiet_config(16), env.slots().to_vec(), env.broadcaster()).unwrap();
    let mut ws = connect(server.local_addr());
    for (text, code) in [
        ("garbage".to_string(), "bad_frame"),
        (Frame::request(2, "command", json!({ "slot": 0, "action": 9 })).encode(), "invalid_action"),
        (Frame::request(3, "command", json!({ "slot": 1, "action": 0 })).encode(), "invalid_params"),
        (Frame::request(4, "shoot", json!({})).encode(), "unknown_method"),
    ] {
        ws.send(Message::text(text)).unwrap();
        assert_eq!(next_frame(&mut ws).error_parts().unwrap().0, code);
    }
}

#[test]
fn slow_clients_never_stall_the_tick_loop() {
    let mut env = HumanEnvironment::new(Box::new(TankBattle::with_options(4, 1, 400, false).unwrap()));
    env.attach_human(0, NO_OP).unwrap();
    env.set_tick_rate(None);
    let server = serve(&quiet_config(2), env.slots().to_vec(), env.broadcaster()).unwrap();
    let _idle = connect(server.local_addr());
    assert!(server.wait_for_clients(1, Duration::from_secs(5)));
    let started = Instant::now();
    env.reset().unwrap();
    while !env.is_terminal().unwrap() {
        env.step(&ActionVector(vec![0])).unwrap();
    }
    assert!(started.elapsed() < Duration::from_secs(5));
}

#[test]
fn occupied_port_is_reported() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port();
    let config = ServerConfig {
        port,
        ..Default::default()
    };
    let env = HumanEnvironment::new(Box::new(TankBattle::new(1, 1).unwrap()));
    assert!(matches!(
        serve(&config, Vec::new(), env.broadcaster()),
        Err(HumanError::PortInUse(p)) if p == port
    ));
}
