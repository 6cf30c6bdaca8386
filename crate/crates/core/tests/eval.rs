use egoact::eval::*;
use egoact::grammar::Route;
use egoact::pose::Pose;
use egoact::runner::{EpisodeResult, TerminalAction};
use egoact::sim::{Category, GoalSpec, Observation, VisibleEntity};
use proptest::prelude::*;
use serde::Deserialize;

fn empty_view() -> Observation {
    Observation {
        step: 0,
        visible: vec![],
        collided_last_step: false,
    }
}

fn view(ids: &[&str]) -> Observation {
    Observation {
        visible: ids
            .iter()
            .map(|id| VisibleEntity {
                id: id.to_string(),
                category: Category::Person,
                attributes: Default::default(),
                distance: 1.0,
                bearing: 0.0,
                elevation: 0.0,
            })
            .collect(),
        ..empty_view()
    }
}

fn goal() -> GoalSpec {
    GoalSpec {
        target: "man-0".into(),
        reference_pose: Pose::planar(0.0, 0.0, 0.0),
        reference_nla: "Say hi to the man".into(),
    }
}

fn finished_at(id: &str, x: f64, y: f64, nla: &str) -> EpisodeResult {
    let final_pose = Pose::planar(x, y, 0.0);
    EpisodeResult {
        episode_id: id.into(),
        action_log: vec![nla.into()],
        pose_trace: vec![final_pose],
        final_pose,
        terminal: Some(TerminalAction {
            text: nla.into(),
            route: Route::Speech,
        }),
        truncated: false,
        protocol_failure: false,
        collisions: 0,
        steps: 1,
        retries: 0,
        final_observation: view(&["man-0"]),
    }
}

fn record(id: &str, run: usize, result: EpisodeResult) -> EpisodeRecord {
    EpisodeRecord {
        episode_id: id.into(),
        run,
        seed: run as u64,
        goal: goal(),
        reference_observation: view(&["man-0", "cup-1"]),
        result,
    }
}

fn metrics(run: usize, ids: &[&str], success: Vec<f64>) -> RunMetrics {
    RunMetrics {
        run,
        episode_ids: ids.iter().map(|s| s.to_string()).collect(),
        success,
        nla_f1: 0.5,
        view_similarity: 0.25,
        protocol_failures: 0,
        collisions: 0,
    }
}

#[test]
fn f1_hand_counted() {
    // overlap {pick, up, the, apple} = 4; precision 4/5, recall 4/4
    let f1 = unigram_f1("Pick up the red apple", "Pick up the apple");
    assert!((f1 - 8.0 / 9.0).abs() < 1e-9);
    assert_eq!(unigram_f1("Open the door", "Open the door"), 1.0);
    assert_eq!(unigram_f1("wave", "nod"), 0.0);
    assert_eq!(
        unigram_f1("Ask \"Where is the bathroom?\"", "ask where is the BATHROOM"),
        1.0
    );
}

proptest! {
    #[test]
    fn f1_is_symmetric_bounded_and_shuffle_invariant(
        a in prop::collection::vec("[a-zA-Z]{1,4}", 0..8),
        b in prop::collection::vec("[a-zA-Z]{1,4}", 0..8),
    ) {
        let (sa, sb) = (a.join(" "), b.join(" "));
        let f = unigram_f1(&sa, &sb);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f - unigram_f1(&sb, &sa)).abs() < 1e-12);
        let mut rev = a.clone();
        rev.reverse();
        let punctuated = rev.iter().map(|w| format!("{w},")).collect::<Vec<_>>().join("  ");
        prop_assert!((f - unigram_f1(&punctuated.to_uppercase(), &sb)).abs() < 1e-12);
    }

    #[test]
    fn curves_are_monotone_and_bounded(
        finals in prop::collection::vec((-4.0..4.0f64, -4.0..4.0f64, any::<bool>()), 1..30),
    ) {
        let results: Vec<_> = finals
            .iter()
            .enumerate()
            .map(|(i, &(x, y, truncated))| {
                let mut r = finished_at(&i.to_string(), x, y, "Say hi to the man");
                if truncated {
                    r.truncated = true;
                    r.terminal = None;
                }
                r
            })
            .collect();
        let goals = vec![goal(); results.len()];
        let curve = distance_success_curve(&results, &goals, &DEFAULT_THRESHOLDS).unwrap();
        prop_assert!(curve.iter().all(|r| (0.0..=1.0).contains(r)));
        prop_assert!(curve.windows(2).all(|w| w[0] <= w[1]));
        // direct predicate count
        for (t, rate) in DEFAULT_THRESHOLDS.iter().zip(&curve) {
            let hits = finals.iter().filter(|&&(x, y, tr)| !tr && x.hypot(y) < *t).count();
            prop_assert_eq!(*rate, hits as f64 / finals.len() as f64);
        }
    }
}

#[test]
fn curve_examples() {
    let at_09: Vec<_> = (0..4).map(|i| finished_at(&i.to_string(), 0.9, 0.0, "x")).collect();
    let goals = vec![goal(); 4];
    let curve = distance_success_curve(&at_09, &goals, &DEFAULT_THRESHOLDS).unwrap();
    assert_eq!(curve, vec![0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);

    let zero = [finished_at("z", 0.0, 0.0, "x")];
    assert_eq!(
        distance_success_curve(&zero, &goals[..1], &DEFAULT_THRESHOLDS).unwrap(),
        vec![1.0; 8]
    );

    let mut failed = finished_at("f", 0.0, 0.0, "x");
    failed.protocol_failure = true;
    assert_eq!(
        distance_success_curve(&[failed], &goals[..1], &DEFAULT_THRESHOLDS).unwrap(),
        vec![0.0; 8]
    );

    assert_eq!(
        distance_success_curve(&[], &[], &DEFAULT_THRESHOLDS),
        Err(EvalError::EmptyResults)
    );
}

#[test]
fn three_run_mean() {
    let ids = ["a", "b"];
    let runs: Vec<_> = [0.48, 0.52, 0.54]
        .iter()
        .enumerate()
        .map(|(i, r)| metrics(i + 1, &ids, vec![*r]))
        .collect();
    let report = aggregate_report(&runs, &[0.5]).unwrap();
    assert!((report.success[0] - (0.48 + 0.52 + 0.54) / 3.0).abs() < 1e-12);
    assert_eq!(report.runs, runs);
    assert_eq!(report.episode_count, 2);

    let single = aggregate_report(&runs[..1], &[0.5]).unwrap();
    assert_eq!(single.success, runs[0].success);
    assert_eq!(single.nla_f1, runs[0].nla_f1);

    let other = metrics(4, &["a", "c"], vec![0.5]);
    assert_eq!(
        aggregate_report(&[runs[0].clone(), other], &[0.5]),
        Err(EvalError::MismatchedEpisodeSets)
    );
    assert_eq!(aggregate_report(&[], &[0.5]), Err(EvalError::EmptyResults));
}

#[derive(Deserialize)]
struct CountTable {
    episodes: usize,
    thresholds: Vec<f64>,
    models: std::collections::BTreeMap<String, ModelCounts>,
}

#[derive(Deserialize)]
struct ModelCounts {
    runs: Vec<Vec<usize>>,
    table_percent: Vec<f64>,
}

/// Per-run success counts from the published three-run breakdown, averaged,
/// must reproduce the headline success row to one decimal.
#[test]
fn published_three_run_counts_average_to_headline_rows() {
    let table: CountTable = serde_json::from_str(include_str!("fixtures/three_run_counts.json")).unwrap();
    assert_eq!(table.thresholds, DEFAULT_THRESHOLDS);
    for (model, counts) in &table.models {
        let runs: Vec<_> = counts
            .runs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                metrics(
                    i + 1,
                    &["x"],
                    c.iter().map(|&k| k as f64 / table.episodes as f64).collect(),
                )
            })
            .collect();
        let report = aggregate_report(&runs, &table.thresholds).unwrap();
        let percent: Vec<f64> = report.success.iter().map(|r| (1000.0 * r).round() / 10.0).collect();
        assert_eq!(percent, counts.table_percent, "{model}");
        assert!(report.success.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn averaging_commutes_with_thresholding() {
    // three runs of the same five episodes at different final distances
    let distances = [
        [0.1, 0.7, 0.95, 2.2, 9.0],
        [0.4, 0.6, 1.3, 1.3, 0.2],
        [3.5, 0.79, 0.81, 1.0, 0.0],
    ];
    let ids = ["e0", "e1", "e2", "e3", "e4"];
    let cfg = MetricConfig::default();
    let registry = ScorerRegistry::default();
    let runs: Vec<_> = distances
        .iter()
        .enumerate()
        .map(|(run, ds)| {
            let records: Vec<_> = ids
                .iter()
                .zip(ds)
                .map(|(id, d)| record(id, run, finished_at(id, *d, 0.0, "Say hi to the man")))
                .collect();
            score_run(run, &records, &cfg, &registry).unwrap()
        })
        .collect();
    let report = aggregate_report(&runs, &cfg.thresholds).unwrap();
    for (i, t) in cfg.thresholds.iter().enumerate() {
        let pooled = distances.iter().flatten().filter(|d| **d < *t).count() as f64 / 15.0;
        assert!((report.success[i] - pooled).abs() < 1e-12);
    }
    assert_eq!(report.nla_f1, 1.0);
    assert_eq!(report.view_similarity, 0.5);
}

#[test]
fn run_scoring_penalizes_unfinished_episodes() {
    let mut truncated = finished_at("t", 0.0, 0.0, "");
    truncated.terminal = None;
    truncated.truncated = true;
    let mut failed = finished_at("p", 0.0, 0.0, "Say hi to the man");
    failed.protocol_failure = true;
    let records = [
        record("ok", 1, finished_at("ok", 0.2, 0.0, "Say hi to the man")),
        record("t", 1, truncated),
        record("p", 1, failed),
        record("w", 1, finished_at("w", 0.0, 0.0, "Wave to the man")),
    ];
    let m = score_run(1, &records, &MetricConfig::default(), &ScorerRegistry::default()).unwrap();
    assert_eq!(m.success[0], 0.5);
    let wave = unigram_f1("Wave to the man", "Say hi to the man");
    assert!((m.nla_f1 - (1.0 + wave) / 4.0).abs() < 1e-12);
    assert_eq!(m.protocol_failures, 1);
    assert_eq!(m.episode_ids, ["ok", "p", "t", "w"]);
}

#[test]
fn scorer_registry() {
    let mut reg = ScorerRegistry::default();
    assert_eq!(
        view_similarity(&view(&["a", "b", "c"]), &view(&["b", "c", "d"]), DEFAULT_SCORER, &reg),
        Ok(0.5)
    );
    assert_eq!(
        view_similarity(&view(&["a"]), &view(&["a"]), DEFAULT_SCORER, &reg),
        Ok(1.0)
    );
    assert_eq!(
        view_similarity(&view(&["a"]), &view(&["b"]), DEFAULT_SCORER, &reg),
        Ok(0.0)
    );
    reg.register("count-match", |a: &Observation, b: &Observation| {
        f64::from(a.visible.len() == b.visible.len())
    });
    assert_eq!(
        view_similarity(&view(&["a"]), &view(&["b"]), "count-match", &reg),
        Ok(1.0)
    );
    let cfg = MetricConfig {
        similarity: "clip".into(),
        ..MetricConfig::default()
    };
    assert_eq!(
        score_run(0, &[record("a", 0, finished_at("a", 0.0, 0.0, "x"))], &cfg, &reg),
        Err(EvalError::UnknownScorer("clip".into()))
    );
}

#[test]
fn config_validation() {
    assert!(MetricConfig::default().validate().is_ok());
    for thresholds in [vec![], vec![0.5, 0.5], vec![1.0, 0.5], vec![0.0, 1.0], vec![-1.0]] {
        let cfg = MetricConfig {
            thresholds,
            ..MetricConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(EvalError::InvalidConfig(_))));
    }
    let cfg = MetricConfig {
        runs: 0,
        ..MetricConfig::default()
    };
    assert!(cfg.validate().is_err());
}

#[test]
fn report_round_trips_and_renders() {
    let runs: Vec<_> = (1..=3)
        .map(|i| metrics(i, &["a"], vec![0.1 * i as f64, 1.0 / 3.0]))
        .collect();
    let report = aggregate_report(&runs, &[0.5, 1.0]).unwrap();
    let json = serde_json::to_string(&report).unwrap();
    let back: EvalReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);

    let table = render_table(&report, "oracle");
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].contains("<0.5 m") && lines[0].contains("Natural Language Action F1"));
    assert!(lines[1].starts_with("oracle") && lines[1].contains("20.0%") && lines[1].contains("33.3%"));
    assert!(lines[3].starts_with("run 2"));
    assert!(lines[1..].iter().all(|l| l.len() == lines[1].len()));
}
