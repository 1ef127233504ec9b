use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voicecue_core::harness::{
    read_events, Choice, Experiment, HarnessConfig, HarnessEvent, HarnessService, ResponseMessage, TrialMessage,
};
use voicecue_core::listenersim::GenderResponse;

/// Scripted client: the odd interval is the one whose asset hash is unique.
fn scripted_choice(msg: &TrialMessage, rng: &mut ChaCha8Rng) -> Choice {
    if msg.ui_hints.mapping.is_some() {
        return Choice::Gender(if rng.random_bool(0.5) { GenderResponse::Male } else { GenderResponse::Female });
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for a in &msg.audio {
        *counts.entry(a.hash.as_str()).or_default() += 1;
    }
    let odd = msg.audio.iter().position(|a| counts[a.hash.as_str()] == 1).map(|i| i as u8 + 1);
    match odd {
        Some(i) if rng.random_bool(0.8) => Choice::Interval(i),
        _ => Choice::Interval(rng.random_range(1..=3)),
    }
}

fn respond(svc: &HarnessService, id: &str, msg: &TrialMessage, rng: &mut ChaCha8Rng) {
    let choice = scripted_choice(msg, rng);
    let latency_ms = msg.ui_hints.response_enabled_after_ms + rng.random_range(100.0..2000.0);
    svc.submit_response(id, ResponseMessage { trial_id: msg.trial_id.clone(), choice, latency_ms, client_timestamp: None })
        .unwrap();
}

fn run_to_end(svc: &HarnessService, id: &str, rng: &mut ChaCha8Rng) {
    loop {
        if let Some(p) = svc.pending(id).unwrap() {
            respond(svc, id, &p, rng);
            continue;
        }
        match svc.next_trial(id) {
            Ok(msg) => respond(svc, id, &msg, rng),
            Err(_) => break,
        }
    }
}

#[test]
fn completed_voice_cue_session_reports_four_jnds() {
    let dir = tempfile::tempdir().unwrap();
    let svc = HarnessService::open(HarnessConfig::new(dir.path())).unwrap();
    let id = svc.create_session(Experiment::VoiceCue, "laptop", Some(21)).unwrap().session_id;
    run_to_end(&svc, &id, &mut ChaCha8Rng::seed_from_u64(1));
    let bundle = svc.results(&id).unwrap();
    assert_eq!(bundle.runs.len(), 4);
    assert_eq!(bundle.jnds_st.len(), 4);
    assert!(bundle.jnds_st.iter().all(Option::is_some), "{:?}", bundle.jnds_st);
    assert!(bundle.discrimination_trials.iter().any(|r| r.run_index == 0));
    let session_dir = dir.path().join("sessions").join(&id);
    for f in ["results.json", "results.jsonl", "jnds.csv", "trials.csv"] {
        assert!(session_dir.join(f).is_file(), "{f}");
    }
    let jnds = std::fs::read_to_string(session_dir.join("jnds.csv")).unwrap();
    assert_eq!(jnds.lines().count(), 5);
}

#[test]
fn completed_gender_session_has_36_rows_and_weights() {
    let dir = tempfile::tempdir().unwrap();
    let svc = HarnessService::open(HarnessConfig::new(dir.path())).unwrap();
    let id = svc.create_session(Experiment::Gender, "robot", Some(4)).unwrap().session_id;
    run_to_end(&svc, &id, &mut ChaCha8Rng::seed_from_u64(2));
    let bundle = svc.results(&id).unwrap();
    assert_eq!(bundle.gender_trials.len(), 36);
    assert!(bundle.cue_weights.is_some() || bundle.cue_weights_error.is_some());
    let w = bundle.cue_weights.expect("36 random answers over 36 conditions still fit");
    assert_eq!(w.n_trials, 36);
}

#[test]
fn fixed_seed_and_script_give_identical_bundles() {
    let bundles: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let svc = HarnessService::open(HarnessConfig::new(dir.path())).unwrap();
            let id = svc.create_session(Experiment::VoiceCue, "robot", Some(77)).unwrap().session_id;
            run_to_end(&svc, &id, &mut ChaCha8Rng::seed_from_u64(9));
            svc.results(&id).unwrap();
            std::fs::read(dir.path().join("sessions").join(&id).join("results.json")).unwrap()
        })
        .collect();
    assert_eq!(bundles[0], bundles[1]);
}

#[test]
fn restart_resumes_at_the_pending_trial() {
    let reference = {
        let dir = tempfile::tempdir().unwrap();
        let svc = HarnessService::open(HarnessConfig::new(dir.path())).unwrap();
        let id = svc.create_session(Experiment::VoiceCue, "laptop", Some(5)).unwrap().session_id;
        run_to_end(&svc, &id, &mut ChaCha8Rng::seed_from_u64(3));
        svc.results(&id).unwrap().to_json_bytes()
    };

    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (id, pending) = {
        let svc = HarnessService::open(HarnessConfig::new(dir.path())).unwrap();
        let id = svc.create_session(Experiment::VoiceCue, "laptop", Some(5)).unwrap().session_id;
        for _ in 0..40 {
            let msg = svc.next_trial(&id).unwrap();
            respond(&svc, &id, &msg, &mut rng);
        }
        let pending = svc.next_trial(&id).unwrap();
        (id, pending)
    };
    // simulate a crash mid-write
    let log = dir.path().join("sessions").join(&id).join("events.jsonl");
    std::fs::OpenOptions::new()
        .append(true)
        .open(&log)
        .and_then(|mut f| std::io::Write::write_all(&mut f, b"{\"event\":\"resp"))
        .unwrap();

    let svc = HarnessService::open(HarnessConfig::new(dir.path())).unwrap();
    let resumed = svc.pending(&id).unwrap().expect("pending trial survives restart");
    assert_eq!(resumed.trial_id, pending.trial_id);
    assert_eq!(resumed.audio, pending.audio);
    assert_eq!(resumed.ui_hints, pending.ui_hints);
    run_to_end(&svc, &id, &mut rng);
    assert_eq!(svc.results(&id).unwrap().to_json_bytes(), reference);
}

#[test]
fn synthesis_latency_accounts_for_wall_clock_spans() {
    let dir = tempfile::tempdir().unwrap();
    let throttle = 40;
    let config = HarnessConfig { throttle_ms_per_stimulus: Some(throttle), ..HarnessConfig::new(dir.path()) };
    let svc = HarnessService::open(config).unwrap();
    let id = svc.create_session(Experiment::VoiceCue, "robot", Some(8)).unwrap().session_id;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let think = Duration::from_millis(15);
    let mut spans = Vec::new();
    for _ in 0..12 {
        let start = Instant::now();
        let msg = svc.next_trial(&id).unwrap();
        std::thread::sleep(think);
        respond(&svc, &id, &msg, &mut rng);
        spans.push(start.elapsed().as_secs_f64() * 1000.0);
    }
    let logged: Vec<f64> = read_events(&svc.events_path(&id).unwrap())
        .unwrap()
        .into_iter()
        .filter_map(|e| match e {
            HarnessEvent::TrialServed { synthesis_ms, .. } => Some(synthesis_ms),
            _ => None,
        })
        .collect();
    assert_eq!(logged.len(), spans.len());
    for (span, synth) in spans.iter().zip(&logged) {
        assert!(*synth >= 3.0 * throttle as f64);
        let unexplained = span - think.as_secs_f64() * 1000.0 - synth;
        assert!(unexplained.abs() < 50.0, "span {span} synth {synth}");
    }
}

#[test]
fn second_session_reuses_cached_audio() {
    let dir = tempfile::tempdir().unwrap();
    let svc = HarnessService::open(HarnessConfig::new(dir.path())).unwrap();
    let a = svc.create_session(Experiment::Gender, "laptop", Some(6)).unwrap().session_id;
    let b = svc.create_session(Experiment::Gender, "laptop", Some(6)).unwrap().session_id;
    let ta = svc.next_trial(&a).unwrap();
    let tb = svc.next_trial(&b).unwrap();
    assert_eq!(ta.audio, tb.audio);
    let bytes = svc.audio_wav(&ta.audio[0].hash).unwrap();
    assert_eq!(&bytes[..4], b"RIFF");
    assert!(svc.audio_wav(&"0".repeat(64)).is_err());
}
