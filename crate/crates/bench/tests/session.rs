use approx::assert_relative_eq;
use serde_json::json;
use zpltune::lineshape::TrackStatus;
use zpltune::tuner::{TuneOutcome, TunePlan};
use zpltune_bench::config::config_from_value;
use zpltune_bench::log::Record;
use zpltune_bench::{
    replay, Aim, AutotuneRequest, BenchError, BurstRequest, Command, MapRequest, ReplayError, ScanRequest, Session,
    WaitRequest,
};

fn session(v: serde_json::Value) -> Session {
    Session::new(config_from_value(v).expect("valid config")).expect("session")
}

fn single(host: &str, detuning: f64, noiseless: bool) -> serde_json::Value {
    json!({
        "seed": 3,
        "host": host,
        "emitters": {"list": [{"id": "a", "x": 0.0, "y": 0.0, "detuning": detuning}]},
        "instrument": {"noise": {"noiseless": noiseless}},
        "backend": {"kinetics": {"hazards": false}}
    })
}

fn five(seed: u64) -> serde_json::Value {
    json!({
        "seed": seed,
        "host": "anthracene",
        "emitters": {"list": [
            {"id": "m0", "x": 0.0, "y": 0.0, "detuning": 0.0},
            {"id": "m1", "x": 5.0, "y": 0.0, "detuning": 6.0},
            {"id": "m2", "x": 10.0, "y": 0.0, "detuning": 11.0},
            {"id": "m3", "x": 0.0, "y": 5.0, "detuning": 15.5},
            {"id": "m4", "x": 5.0, "y": 5.0, "detuning": 21.0}
        ]},
        "backend": {"kinetics": {}}
    })
}

#[test]
fn explicit_emitters_are_all_live() {
    let s = session(five(1));
    let st = s.state();
    assert_eq!(st.emitters.len(), 5);
    assert!(st.emitters.iter().all(|e| e.alive));
    assert!(matches!(s.log()[0].record, Record::Snapshot(_)));
}

#[test]
fn same_seed_same_initial_table() {
    let cfg = json!({
        "seed": 42,
        "host": "dibromonaphthalene",
        "emitters": {"generate": {"count": 6, "extent_um": 30.0, "spread_ghz": 20.0}},
        "backend": {"kinetics": {}}
    });
    let a = session(cfg.clone()).state();
    let b = session(cfg).state();
    assert_eq!(a, b);
    for (i, e) in a.emitters.iter().enumerate() {
        for f in &a.emitters[i + 1..] {
            let d = ((e.position[0] - f.position[0]).powi(2) + (e.position[1] - f.position[1]).powi(2)).sqrt();
            assert!(d >= 3.0);
        }
    }
}

#[test]
fn empty_window_gives_background_only() {
    let mut s = session(single("anthracene", 0.0, true));
    let out = s.scan(&ScanRequest::window(10.0, 12.0)).unwrap();
    assert!(out.fits.is_empty());
    // Only the far Lorentzian tail of the line 10 GHz away remains.
    for r in out.spectrum.rates() {
        assert_relative_eq!(r, 100.0, max_relative = 5e-3);
    }
}

#[test]
fn noiseless_fit_hits_true_center() {
    let mut s = session(single("anthracene", 0.2137, true));
    let out = s.scan(&ScanRequest::window(-0.8, 1.2).aimed(Aim::Emitter("a".into()))).unwrap();
    assert_eq!(out.fits.len(), 1);
    assert_relative_eq!(out.fits[0].center, 0.2137, max_relative = 1e-6);
    assert_eq!(out.tracks.len(), 1);
    assert_eq!(out.tracks[0].status, TrackStatus::Tracked);
}

#[test]
fn burst_limits_and_noop() {
    let mut s = session(single("anthracene", 0.0, true));
    let over = s.burst(&BurstRequest { aim: Aim::Emitter("a".into()), power: 25.0, duration: 1.0 });
    match over {
        Err(e @ BenchError::LimitExceeded { .. }) => assert_eq!(e.body().pointer, "/power"),
        other => panic!("{other:?}"),
    }
    let long = s.burst(&BurstRequest { aim: Aim::Emitter("a".into()), power: 1.0, duration: 601.0 });
    assert!(matches!(long, Err(BenchError::LimitExceeded { .. })));
    let before = s.state();
    let rec = s.burst(&BurstRequest { aim: Aim::Emitter("a".into()), power: 5.0, duration: 0.0 }).unwrap();
    assert!(rec.effects.is_empty());
    let after = s.state();
    assert_eq!(before.emitters, after.emitters);
    assert_eq!(before.draws, after.draws);
    assert_eq!(after.next_seq, before.next_seq + 1);
}

#[test]
fn unknown_emitter_is_not_found() {
    let mut s = session(single("anthracene", 0.0, true));
    let r = s.burst(&BurstRequest { aim: Aim::Emitter("zz".into()), power: 1.0, duration: 1.0 });
    assert!(matches!(r, Err(BenchError::NotFound(_))));
}

#[test]
fn burst_far_away_leaves_emitter_alone() {
    let mut s = session(five(2));
    let before = s.state();
    s.burst(&BurstRequest { aim: Aim::Position([100.0, 100.0]), power: 10.0, duration: 60.0 }).unwrap();
    assert_eq!(
        before.emitters.iter().map(|e| e.current).collect::<Vec<_>>(),
        s.state().emitters.iter().map(|e| e.current).collect::<Vec<_>>()
    );
}

#[test]
fn dbn_burst_sequence_reaches_a_few_ghz() {
    // Documented default κ and α: the host's prior values.
    let host = zpltune::HostMatrix::Dibromonaphthalene;
    let r = host.kinetics_ranges();
    let k = r.kappa_prior();
    let a = r.alpha_prior;
    let cfg = json!({
        "seed": 11,
        "host": "dibromonaphthalene",
        "emitters": {"list": [{"id": "d", "x": 0.0, "y": 0.0, "detuning": 0.0}]},
        "instrument": {"noise": {"noiseless": true}},
        "backend": {"kinetics": {"hazards": false, "ranges": {
            "kappa": [k, k], "alpha": [a, a], "alpha_prior": a, "red_only": false,
            "bleach_coeff": 0.0, "jump_prob": 0.0, "jump_scale": 0.0
        }}}
    });
    let mut s = session(cfg);
    let durations = [0.5, 1.0, 2.0, 3.0, 1.5, 2.5, 3.0, 0.5, 3.0, 2.0, 3.0, 1.0, 3.0, 2.5, 3.0, 2.0, 3.0, 2.5];
    let total: f64 = durations.iter().sum();
    assert!(total < 40.0);
    for d in durations {
        s.burst(&BurstRequest { aim: Aim::Emitter("d".into()), power: 6.0, duration: d }).unwrap();
    }
    let shift = s.state().emitters[0].current.abs();
    assert!((2.0..=6.0).contains(&shift), "shift {shift} GHz");
}

#[test]
fn idle_day_changes_nothing() {
    let mut s = session(five(4));
    s.burst(&BurstRequest { aim: Aim::Emitter("m1".into()), power: 5.0, duration: 10.0 }).unwrap();
    let before = s.state();
    s.wait(&WaitRequest { seconds: 86_400.0 }).unwrap();
    let after = s.state();
    for (a, b) in before.emitters.iter().zip(&after.emitters) {
        assert_eq!(a.current, b.current);
    }
}

#[test]
fn detuned_spot_is_dimmed_by_the_lorentzian_factor() {
    let mut cfg = single("anthracene", 0.0, true);
    cfg["instrument"]["noise"]["dark_rate"] = json!(0.0);
    let mut s = session(cfg);
    let req = |probe| MapRequest { probe, x: [-1.0, 1.0], y: [-1.0, 1.0], step_um: 0.5, dwell: 0.1, probe_power: 1.0 };
    let on = s.map(&req(0.0)).unwrap();
    // Ten half-widths away from a 60 MHz line.
    let off = s.map(&req(0.3)).unwrap();
    let (c, r) = on.pixel_of(0.0, 0.0).unwrap();
    assert_relative_eq!(off.at(c, r) / on.at(c, r), 1.0 / 101.0, max_relative = 1e-12);
    assert!(on.at(0, 0) < on.at(c, r));
}

#[test]
fn map_without_resonance_is_uniform() {
    let mut s = session(single("anthracene", 0.0, true));
    let m = s
        .map(&MapRequest { probe: 500.0, x: [0.0, 2.0], y: [0.0, 2.0], step_um: 1.0, dwell: 0.1, probe_power: 1.0 })
        .unwrap();
    let first = m.counts[0];
    assert!(m.counts.iter().all(|c| (c - first).abs() < 1e-3 * first));
}

#[test]
fn autotune_synchronizes_five_lines() {
    let mut s = session(five(5));
    let report = s.autotune(&AutotuneRequest::default()).unwrap();
    assert!(report.succeeded(), "{:?}", report.entries.iter().map(|e| e.outcome).collect::<Vec<_>>());
    let live = report.entries.iter().filter(|e| e.outcome == TuneOutcome::Synchronized);
    let st = s.state();
    for e in live {
        let truth = st.emitters.iter().find(|v| v.id == e.id.0).unwrap().current;
        assert!((truth - report.target.0).abs() < 0.2, "{} at {truth}", e.id);
    }
    let kinds: Vec<&str> = s.log().iter().map(|e| e.record.kind()).collect();
    assert!(kinds.contains(&"target") && kinds.contains(&"estimate") && kinds.last() == Some(&"outcome"));
}

#[test]
fn autotune_respects_instrument_limits() {
    let mut s = session(five(5));
    let req = AutotuneRequest { plan: TunePlan { p_max: 50.0, ..TunePlan::default() }, ..AutotuneRequest::default() };
    let err = s.autotune(&req).unwrap_err();
    assert_eq!(err.body().pointer, "/plan/p_max");
}

fn scripted(s: &mut Session) {
    let cmds = [
        Command::Scan(ScanRequest::window(-2.0, 24.0)),
        Command::Burst(BurstRequest { aim: Aim::Emitter("m2".into()), power: 4.0, duration: 3.0 }),
        Command::Map(MapRequest {
            probe: 0.0,
            x: [-2.0, 12.0],
            y: [-2.0, 7.0],
            step_um: 1.0,
            dwell: 0.1,
            probe_power: 1.0,
        }),
        Command::Wait(WaitRequest { seconds: 60.0 }),
        Command::Autotune(AutotuneRequest::default()),
    ];
    for c in &cmds {
        s.execute(c).unwrap();
    }
}

#[test]
fn replay_reproduces_state_and_log() {
    let cfg = config_from_value(five(9)).unwrap();
    let mut live = Session::new(cfg.clone()).unwrap();
    scripted(&mut live);
    let mut text = Vec::new();
    zpltune_bench::log::write_jsonl(live.log(), &mut text).unwrap();
    let parsed = zpltune_bench::log::read_jsonl(&text[..]).unwrap();
    let again = replay(cfg, &parsed).unwrap();
    assert_eq!(again.state(), live.state());
    assert_eq!(again.log(), live.log());
}

#[test]
fn replay_of_empty_log_is_initial_state() {
    let cfg = config_from_value(five(9)).unwrap();
    let fresh = Session::new(cfg.clone()).unwrap();
    assert_eq!(replay(cfg, &[]).unwrap().state(), fresh.state());
}

#[test]
fn replay_rejects_gaps_and_foreign_configs() {
    let cfg = config_from_value(five(9)).unwrap();
    let mut live = Session::new(cfg.clone()).unwrap();
    scripted(&mut live);
    let mut log = live.log().to_vec();
    log.remove(3);
    match replay(cfg.clone(), &log) {
        Err(BenchError::Replay(ReplayError::SequenceGap { expected: 3, found: 4 })) => {}
        other => panic!("{other:?}"),
    }
    let mut other = cfg.clone();
    other.seed += 1;
    assert!(matches!(replay(other, live.log()), Err(BenchError::Replay(ReplayError::HashMismatch { .. }))));
}

#[test]
fn replay_detects_tampering() {
    let cfg = config_from_value(five(9)).unwrap();
    let mut live = Session::new(cfg.clone()).unwrap();
    scripted(&mut live);
    let mut log = live.log().to_vec();
    if let Record::Burst(b) = &mut log.iter_mut().find(|e| matches!(e.record, Record::Burst(_))).unwrap().record {
        b.dose += 1.0;
    }
    assert!(matches!(replay(cfg, &log), Err(BenchError::Replay(ReplayError::Divergence { .. }))));
}

#[test]
fn sequence_numbers_and_draws_are_monotone() {
    let mut s = session(five(12));
    scripted(&mut s);
    for w in s.log().windows(2) {
        assert_eq!(w[1].seq, w[0].seq + 1);
        assert!(w[1].draws >= w[0].draws);
        assert!(w[1].clock >= w[0].clock);
    }
}

#[test]
fn microscopic_session_runs_and_replays() {
    let cfg = config_from_value(json!({
        "seed": 5,
        "host": "anthracene",
        "emitters": {"list": [
            {"id": "a", "x": 0.0, "y": 0.0, "detuning": 0.0},
            {"id": "b", "x": 15.0, "y": 0.0, "detuning": 3.0}
        ]},
        "backend": {"microscopic": {}}
    }))
    .unwrap();
    let mut s = Session::new(cfg.clone()).unwrap();
    s.burst(&BurstRequest { aim: Aim::Emitter("a".into()), power: 5.0, duration: 2.0 }).unwrap();
    s.scan(&ScanRequest::window(-3.0, 1.0).aimed(Aim::Emitter("a".into()))).unwrap();
    let st = s.state();
    assert!(st.trapped_charges > 0);
    assert!(st.emitters[0].current < 0.0);
    assert!((st.emitters[1].current - 3.0).abs() < 1e-3);
    let again = replay(cfg, s.log()).unwrap();
    assert_eq!(again.state(), st);
}
