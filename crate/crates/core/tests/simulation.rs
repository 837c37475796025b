mod common;

use qbe_core::label_gen::{
    load_sessions, make_coinmail_lists, save_sessions, Action, ActionCurve, LabelConfig, SessionKind, SimConfig,
};
use qbe_core::query_builder::MAX_IDEAL_CANDIDATES;

use common::small_world;

fn small_sim(seed: u64) -> SimConfig {
    SimConfig {
        keyword_sessions: 120,
        example_sessions: 40,
        seed,
        ..SimConfig::default()
    }
}

#[test]
fn same_seed_gives_identical_sessions() {
    let w = small_world();
    let a = w.simulator(small_sim(3)).simulate_sessions();
    let b = w.simulator(small_sim(3)).simulate_sessions();
    assert_eq!(a, b);
    let c = w.simulator(small_sim(4)).simulate_sessions();
    assert_ne!(a, c);
}

#[test]
fn sessions_are_well_formed() {
    let w = small_world();
    let sessions = w.simulator(small_sim(5)).simulate_sessions();
    assert!(sessions.iter().any(|s| s.kind == SessionKind::Keyword));
    assert!(sessions.iter().any(|s| s.kind == SessionKind::Example));
    for s in &sessions {
        s.validate().unwrap();
        assert!(s.results.len() <= 25);
        match s.kind {
            SessionKind::Keyword => assert!(s.ideal_candidates.is_empty()),
            SessionKind::Example => {
                assert!((1..=MAX_IDEAL_CANDIDATES).contains(&s.ideal_candidates.len()));
                assert!(s.ideal_candidates.iter().all(|c| !s.results.contains(c)));
            }
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sessions.jsonl");
    save_sessions(&path, &sessions).unwrap();
    assert_eq!(load_sessions(&path).unwrap(), sessions);
}

#[test]
fn engagement_rises_with_archetype_affinity() {
    let w = small_world();
    let sim = w.simulator(SimConfig {
        seed: 9,
        ..SimConfig::default()
    });
    const BINS: usize = 5;
    let mut shown = [0usize; BINS];
    let mut inmails = [0usize; BINS];
    let mut engaged = [0usize; BINS];
    let mut sessions = 0;
    for id in 0..10_000u64 {
        let Some((a, s)) = sim.keyword_session_traced(id) else {
            continue;
        };
        sessions += 1;
        for &m in &s.results {
            let bin = ((sim.affinity(&a, m) * BINS as f64) as usize).min(BINS - 1);
            shown[bin] += 1;
            match s.action(m).unwrap() {
                Action::Inmailed => {
                    inmails[bin] += 1;
                    engaged[bin] += 1;
                }
                Action::Clicked => engaged[bin] += 1,
                Action::Skipped => {}
            }
        }
    }
    assert!(sessions > 9_000, "{sessions} sessions");
    let populated: Vec<usize> = (0..BINS).filter(|&b| shown[b] >= 500).collect();
    assert!(populated.len() >= 3, "{shown:?}");
    for counts in [inmails, engaged] {
        let rates: Vec<(f64, f64)> = populated
            .iter()
            .map(|&b| {
                let p = counts[b] as f64 / shown[b] as f64;
                (p, (p * (1.0 - p) / shown[b] as f64).sqrt())
            })
            .collect();
        for pair in rates.windows(2) {
            let ((lo, se_lo), (hi, se_hi)) = (pair[0], pair[1]);
            assert!(hi + 3.0 * (se_lo + se_hi) >= lo, "{rates:?}");
        }
        assert!(rates.last().unwrap().0 > rates[0].0, "{rates:?}");
    }
}

#[test]
fn zero_inmail_probability_gives_no_coinmail_lists() {
    let w = small_world();
    let cfg = SimConfig {
        inmail: ActionCurve {
            scale: 0.0,
            ..SimConfig::default().inmail
        },
        ..small_sim(6)
    };
    let sessions = w.simulator(cfg).simulate_sessions();
    assert!(!sessions.is_empty());
    assert!(sessions.iter().all(|s| s.inmailed().is_empty()));
    assert!(make_coinmail_lists::<f64>(&sessions, &LabelConfig::default()).unwrap().is_empty());
}

#[test]
fn career_driven_affinity_is_career_similarity() {
    let w = small_world();
    let sim = w.simulator(SimConfig::career_driven());
    let (a, s) = (0..50).find_map(|i| sim.keyword_session_traced(i)).unwrap();
    let ctx = w.feature_context();
    for &m in &s.results {
        let r = w.profiles.get(m).unwrap();
        let expected = qbe_core::features::career_path_similarity(
            &a.prepared.positions,
            &r.positions,
            &ctx.node_model,
            &w.dicts,
            &ctx.career,
        );
        assert!((sim.affinity(&a, m) - expected).abs() < 1e-12);
    }
}
