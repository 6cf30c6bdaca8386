use std::cell::RefCell;
use std::io::{BufReader, Write};
use std::net::TcpListener;
use std::rc::Rc;
use std::thread;
use std::time::{Duration, Instant};

use egoact::grammar::{parse_sequence, serialize, Route, STOP_PHRASE};
use egoact::pose::Pose;
use egoact::runner::*;
use egoact::sim::scenario::{generate, ScenarioConfig};
use egoact::sim::*;

const WORLDS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../worlds");

fn golden_world(name: &str) -> World {
    load_world(&std::fs::read_to_string(format!("{WORLDS}/{name}")).unwrap()).unwrap()
}

fn always(text: &'static str) -> InProcess<impl FnMut(&PolicyRequest) -> String> {
    InProcess(move |_: &PolicyRequest| text.to_string())
}

fn target_distance(world: &World, pose: &Pose) -> f64 {
    let t = world.target().position;
    (t.x - pose.x).hypot(t.y - pose.y)
}

#[test]
fn stop_policy_ends_after_one_step() {
    let world = golden_world("empty_ahead.json");
    let start = world.start_pose();
    let r = run_episode(&world, start, &mut always(STOP_PHRASE), &RunConfig::default(), "stop").unwrap();
    assert_eq!(r.steps, 1);
    assert_eq!(r.final_pose, start);
    assert_eq!(r.terminal.as_ref().unwrap().route, Route::Stop);
    assert!(!r.truncated && !r.protocol_failure);
    assert_eq!(r.action_log, [STOP_PHRASE]);
}

#[test]
fn malformed_replies_consume_retries() {
    let world = golden_world("empty_ahead.json");
    let replies = Rc::new(RefCell::new(
        vec!["", "Say hi; Move forward 1.00 meters", STOP_PHRASE].into_iter(),
    ));
    let mut policy = InProcess(move |_: &PolicyRequest| replies.borrow_mut().next().unwrap().to_string());
    let r = run_episode(&world, world.start_pose(), &mut policy, &RunConfig::default(), "retry").unwrap();
    assert_eq!(r.retries, 2);
    assert_eq!(r.steps, 1);
    assert!(!r.protocol_failure && !r.truncated);
    assert_eq!(r.final_pose, world.start_pose());

    let cfg = RunConfig {
        retries: 1,
        ..RunConfig::default()
    };
    let r = run_episode(&world, world.start_pose(), &mut always(""), &cfg, "fail").unwrap();
    assert!(r.protocol_failure && r.truncated && r.terminal.is_none());
    assert_eq!((r.retries, r.steps), (2, 0));
}

#[test]
fn wrong_protocol_version_is_malformed() {
    struct OldVersion;
    impl PolicyEndpoint for OldVersion {
        fn exchange(&mut self, _: &str, _: Duration) -> Result<String, EndpointError> {
            Ok(r#"{"version":"egoact/0","action_text":"Stop and no action"}"#.into())
        }
    }
    let world = golden_world("empty_ahead.json");
    let r = run_episode(&world, world.start_pose(), &mut OldVersion, &RunConfig::default(), "v").unwrap();
    assert!(r.protocol_failure);
    assert_eq!(r.retries, 3);
}

#[test]
fn budget_caps_decisions() {
    let world = golden_world("empty_ahead.json");
    let cfg = RunConfig {
        max_steps: 7,
        ..RunConfig::default()
    };
    let r = run_episode(
        &world,
        world.start_pose(),
        &mut always("Turn left 10 degrees"),
        &cfg,
        "spin",
    )
    .unwrap();
    assert_eq!(r.steps, 7);
    assert!(r.truncated && r.terminal.is_none() && !r.protocol_failure);
    assert_eq!(r.pose_trace.len(), 8);
    assert!(r.action_log.iter().all(|a| a == "Turn left 10.0 degrees"));
}

#[test]
fn requests_carry_exact_history() {
    let world = golden_world("hallway_pillar.json");
    let seen: Rc<RefCell<Vec<PolicyRequest>>> = Rc::default();
    let log = seen.clone();
    let script = [
        "turn left 20 degrees; move forward 0.5 meter",
        "Look up 10 degrees",
        "Turn right 20 degrees",
        "Move forward 0.3 meters",
        "Left sidewalk 0.2 meters",
        "Open the white door",
    ];
    let mut policy = InProcess(move |req: &PolicyRequest| {
        log.borrow_mut().push(req.clone());
        script[req.step].to_string()
    });
    let r = run_episode(&world, world.start_pose(), &mut policy, &RunConfig::default(), "hist").unwrap();
    let requests = seen.borrow();
    assert_eq!(r.steps, script.len());
    for (k, req) in requests.iter().enumerate() {
        assert_eq!((req.step, req.version.as_str()), (k, PROTOCOL_VERSION));
        assert_eq!(req.instruction, world.instruction());
        assert_eq!(req.current.step, k);
        assert_eq!(req.pose, r.pose_trace[k]);
        let first = k.saturating_sub(3);
        let expected: Vec<&String> = r.action_log[first..k].iter().collect();
        assert_eq!(req.recent.iter().map(|s| &s.action).collect::<Vec<_>>(), expected);
        for (j, pair) in req.recent.iter().enumerate() {
            assert_eq!(pair.observation, requests[first + j].current);
        }
        assert_eq!(req.historical.len(), k.min(10));
        assert!(req.historical.iter().all(|o| o.step < k));
    }
    for (raw, logged) in script.iter().zip(&r.action_log) {
        assert_eq!(logged, &serialize(&parse_sequence(raw).unwrap().canonicalize()));
    }
    assert_eq!(r.action_log[0], "Turn left 20.0 degrees; Move forward 0.50 meters");
}

#[test]
fn prompt_view_of_a_request() {
    let world = golden_world("empty_ahead.json");
    let seen: Rc<RefCell<Vec<PolicyRequest>>> = Rc::default();
    let log = seen.clone();
    let mut policy = InProcess(move |req: &PolicyRequest| {
        log.borrow_mut().push(req.clone());
        if req.step < 12 {
            "Turn left 30 degrees"
        } else {
            STOP_PHRASE
        }
        .to_string()
    });
    run_episode(&world, world.start_pose(), &mut policy, &RunConfig::default(), "ep").unwrap();
    let req = &seen.borrow()[12];
    let sample = request_to_sample(req);
    assert_eq!(sample.historical.len(), 10);
    assert_eq!(sample.recent.len(), 3);
    assert_eq!(sample.recent[2].observation.image, "step-12");
    assert_eq!(sample.recent[1].action, "Turn left 30.0 degrees");
    let prompt = egoact::dataset::render_prompt(&sample);
    assert_eq!(prompt.matches("[Sampled Historical Observation #").count(), 10);
    assert_eq!(prompt.matches("[Recent Observation #").count(), 3);
    assert!(prompt.ends_with("Next action:"));
}

/// Field names and layout of the request record are frozen for external policies.
#[test]
fn request_wire_format_is_frozen() {
    let world = golden_world("empty_ahead.json");
    let seen: Rc<RefCell<Vec<String>>> = Rc::default();
    struct Spy(Rc<RefCell<Vec<String>>>);
    impl PolicyEndpoint for Spy {
        fn exchange(&mut self, line: &str, _: Duration) -> Result<String, EndpointError> {
            self.0.borrow_mut().push(line.to_string());
            let reply = if self.0.borrow().len() < 3 {
                "Turn left 10 degrees; Move forward 0.30 meters"
            } else {
                STOP_PHRASE
            };
            Ok(serde_json::to_string(&PolicyResponse::new(reply)).unwrap())
        }
    }
    let cfg = RunConfig {
        max_steps: 5,
        ..RunConfig::default()
    };
    run_episode(&world, world.start_pose(), &mut Spy(seen.clone()), &cfg, "wire").unwrap();
    let value: serde_json::Value = serde_json::from_str(&seen.borrow()[2]).unwrap();
    let actual = serde_json::to_string_pretty(&value).unwrap() + "\n";
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/wire/request_step2.json");
    if std::env::var_os("UPDATE_GOLDENS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &actual).unwrap();
    }
    assert_eq!(actual, std::fs::read_to_string(&path).unwrap());
    let back: PolicyRequest = serde_json::from_value(value).unwrap();
    assert_eq!(back.recent.len(), 2);
}

#[test]
fn decode_hint_passes_through() {
    let world = golden_world("empty_ahead.json");
    let hint = serde_json::json!({"temperature": 0.2});
    let seen: Rc<RefCell<Vec<String>>> = Rc::default();
    struct Spy(Rc<RefCell<Vec<String>>>);
    impl PolicyEndpoint for Spy {
        fn exchange(&mut self, line: &str, _: Duration) -> Result<String, EndpointError> {
            self.0.borrow_mut().push(line.to_string());
            Ok(serde_json::to_string(&PolicyResponse::new(STOP_PHRASE)).unwrap())
        }
    }
    let cfg = RunConfig {
        decode: Some(hint.clone()),
        ..RunConfig::default()
    };
    run_episode(&world, world.start_pose(), &mut Spy(seen.clone()), &cfg, "d").unwrap();
    let line: serde_json::Value = serde_json::from_str(&seen.borrow()[0]).unwrap();
    assert_eq!(line["decode"], hint);
    assert_eq!(line["version"], "egoact/1");
    for key in [
        "episode_id",
        "step",
        "instruction",
        "historical",
        "recent",
        "current",
        "pose",
    ] {
        assert!(line.get(key).is_some(), "{key}");
    }
}

#[test]
fn exec_endpoint_round_trip_and_timeout() {
    let world = golden_world("empty_ahead.json");
    let mut ok = ExecEndpoint::spawn(
        r#"while read line; do echo '{"version":"egoact/1","action_text":"Stop and no action"}'; done"#,
    )
    .unwrap();
    let r = run_episode(&world, world.start_pose(), &mut ok, &RunConfig::default(), "exec").unwrap();
    assert_eq!(r.terminal.unwrap().route, Route::Stop);

    let mut slow = ExecEndpoint::spawn("sleep 5").unwrap();
    let cfg = RunConfig {
        timeout_s: 0.2,
        ..RunConfig::default()
    };
    let began = Instant::now();
    let err = run_episode(&world, world.start_pose(), &mut slow, &cfg, "slow").unwrap_err();
    assert!(matches!(err, RunnerError::PolicyTimeout { step: 0, .. }), "{err}");
    assert!(began.elapsed() < Duration::from_secs(3));

    let mut dead = ExecEndpoint::spawn("true").unwrap();
    let err = run_episode(&world, world.start_pose(), &mut dead, &RunConfig::default(), "dead").unwrap_err();
    assert!(matches!(err, RunnerError::Endpoint { step: 0, .. }), "{err}");
}

#[test]
fn tcp_endpoint_serves_oracle() {
    let world = golden_world("empty_ahead.json");
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let served = world.clone();
    let server = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut oracle = OraclePolicy::new(served);
        serve(&mut oracle, BufReader::new(stream.try_clone().unwrap()), stream).unwrap();
    });
    let mut tcp = TcpEndpoint::connect(&addr).unwrap();
    let cfg = RunConfig {
        seed: 11,
        ..RunConfig::default()
    };
    let over_tcp = run_episode(&world, world.start_pose(), &mut tcp, &cfg, "tcp").unwrap();
    drop(tcp);
    server.join().unwrap();
    let in_process = run_episode(
        &world,
        world.start_pose(),
        &mut InProcess(OraclePolicy::new(world.clone())),
        &cfg,
        "tcp",
    )
    .unwrap();
    assert_eq!(over_tcp, in_process);
    assert_eq!(over_tcp.terminal.unwrap().text, "Say hi to the man in grey");
    assert!(over_tcp.final_pose.planar_distance(&world.goal.reference_pose) < 0.5);
}

#[test]
fn serve_answers_garbage_with_empty_action() {
    let mut out = Vec::new();
    serve(
        &mut |_: &PolicyRequest| "x".to_string(),
        "not json\n\n".as_bytes(),
        &mut out,
    )
    .unwrap();
    let resp: PolicyResponse = serde_json::from_slice(&out).unwrap();
    assert_eq!(resp, PolicyResponse::new(""));
    out.flush().unwrap();
}

fn seen_at(id: &str, distance: f64, bearing: f64) -> Observation {
    Observation {
        step: 0,
        visible: vec![VisibleEntity {
            id: id.into(),
            category: Category::Person,
            attributes: Default::default(),
            distance,
            bearing,
            elevation: 0.0,
        }],
        collided_last_step: false,
    }
}

#[test]
fn oracle_rules() {
    let world = golden_world("empty_ahead.json");
    let oracle = OraclePolicy::new(world.clone());
    let pose = Pose::default();
    // clamp to 30 degrees, move min(4 - 0.6, 1.0)
    assert_eq!(
        oracle.decide(&seen_at("man-0", 4.0, 50.0), pose),
        "Turn left 30.0 degrees; Move forward 1.00 meters"
    );
    assert_eq!(
        oracle.decide(&seen_at("man-0", 0.7, 5.0), pose),
        "Say hi to the man in grey"
    );
    assert_eq!(
        oracle.decide(&seen_at("man-0", 1.2, -10.0), pose),
        "Turn right 10.0 degrees; Move forward 0.60 meters"
    );
    // target behind: scan left
    let behind = Pose::planar(0.0, 0.0, 180.0);
    let empty = Observation {
        step: 0,
        visible: vec![],
        collided_last_step: false,
    };
    assert_eq!(oracle.decide(&empty, behind), "Turn left 30.0 degrees");

    let gain = OraclePolicy::new(golden_world("hallway_pillar.json"));
    let far = seen_at("door-0", 10.0, 0.0);
    let text = gain.decide(&far, Pose::planar(-0.5, 1.5, 0.0));
    assert_eq!(text, "Move forward 0.83 meters", "gain-compensated move");
}

#[test]
fn oracle_solves_golden_worlds() {
    for name in ["empty_ahead.json", "hallway_pillar.json", "behind_start.json"] {
        let world = golden_world(name);
        for seed in 0..5 {
            let cfg = RunConfig {
                seed,
                ..RunConfig::default()
            };
            let r = run_episode(
                &world,
                world.start_pose(),
                &mut InProcess(OraclePolicy::new(world.clone())),
                &cfg,
                name,
            )
            .unwrap();
            let d = r.final_pose.planar_distance(&world.goal.reference_pose);
            assert_eq!(
                r.terminal.as_ref().map(|t| t.text.as_str()),
                Some(world.goal.reference_nla.as_str()),
                "{name}"
            );
            assert!(d < 0.5, "{name} seed {seed}: {d}");
            assert_eq!(r.collisions, 0, "{name}");
            assert!(r.steps <= 60);
        }
    }
}

/// Once the target is in view, every step either translates toward it or is
/// a pure rotation.
#[test]
fn oracle_distance_decreases_once_target_seen() {
    for seed in 0..100 {
        let world = generate(seed, &ScenarioConfig::obstacle_free());
        let cfg = RunConfig {
            seed,
            ..RunConfig::default()
        };
        let r = run_episode(
            &world,
            world.start_pose(),
            &mut InProcess(OraclePolicy::new(world.clone())),
            &cfg,
            "c",
        )
        .unwrap();
        let first_seen = (0..r.pose_trace.len())
            .find(|&k| visibility(&r.pose_trace[k], world.target(), &world, &world.agent).is_some())
            .expect("target eventually seen");
        for k in first_seen..r.action_log.len().saturating_sub(1) {
            let (a, b) = (
                target_distance(&world, &r.pose_trace[k]),
                target_distance(&world, &r.pose_trace[k + 1]),
            );
            let rotation_only = !r.action_log[k].contains("Move");
            assert!(
                b < a || (rotation_only && b == a),
                "seed {seed} step {k}: {a} -> {b} via {}",
                r.action_log[k]
            );
        }
    }
}

#[test]
fn decisions_never_exceed_budget() {
    for max_steps in [1, 3, 10] {
        let world = generate(max_steps as u64, &ScenarioConfig::sparse());
        let cfg = RunConfig {
            max_steps,
            ..RunConfig::default()
        };
        let r = run_episode(
            &world,
            world.start_pose(),
            &mut InProcess(OraclePolicy::new(world.clone())),
            &cfg,
            "b",
        )
        .unwrap();
        assert!(r.steps <= max_steps);
        assert_eq!(r.terminal.is_some(), !r.truncated);
    }
}
