//! Goal-distance success curves, unigram action F1, final-view similarity and
//! multi-run reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runner::{run_episode, EpisodeResult, PolicyEndpoint, RunConfig, RunnerError};
use crate::sim::{observe, GoalSpec, Observation, World};

pub const DEFAULT_THRESHOLDS: [f64; 8] = [0.5, 0.8, 1.0, 1.2, 1.5, 2.0, 2.5, 3.0];
pub const DEFAULT_SCORER: &str = "visible-set-jaccard";

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no episodes to evaluate")]
    EmptyResults,
    #[error("unknown view similarity scorer {0:?}")]
    UnknownScorer(String),
    #[error("runs cover different episode sets")]
    MismatchedEpisodeSets,
    #[error("{results} results but {goals} goals")]
    GoalCountMismatch { results: usize, goals: usize },
    #[error("invalid metric config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub thresholds: Vec<f64>,
    pub runs: usize,
    pub similarity: String,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            runs: 3,
            similarity: DEFAULT_SCORER.to_string(),
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let t = &self.thresholds;
        if t.is_empty() || t.iter().any(|x| !(x.is_finite() && *x > 0.0)) || t.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EvalError::InvalidConfig(
                "thresholds must be positive and strictly increasing".into(),
            ));
        }
        if self.runs == 0 {
            return Err(EvalError::InvalidConfig("at least one run".into()));
        }
        Ok(())
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Harmonic mean of unigram precision and recall with clipped counts.
pub fn unigram_f1(predicted: &str, reference: &str) -> f64 {
    let (p, r) = (tokens(predicted), tokens(reference));
    match (p.is_empty(), r.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &r {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &p {
        if let Some(c) = counts.get_mut(t.as_str()).filter(|c| **c > 0) {
            *c -= 1;
            overlap += 1;
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / p.len() as f64;
    let recall = overlap as f64 / r.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Planar distance between the final pose and the reference pose.
pub fn final_distance(result: &EpisodeResult, goal: &GoalSpec) -> f64 {
    result.final_pose.planar_distance(&goal.reference_pose)
}

/// Whether the episode ended properly; truncated or failed episodes never succeed.
pub fn is_complete(result: &EpisodeResult) -> bool {
    !result.truncated && !result.protocol_failure && result.terminal.is_some()
}

/// Fraction of episodes ending strictly closer than each threshold.
pub fn distance_success_curve(
    results: &[EpisodeResult],
    goals: &[GoalSpec],
    thresholds: &[f64],
) -> Result<Vec<f64>, EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptyResults);
    }
    if results.len() != goals.len() {
        return Err(EvalError::GoalCountMismatch {
            results: results.len(),
            goals: goals.len(),
        });
    }
    let distances: Vec<Option<f64>> = results
        .iter()
        .zip(goals)
        .map(|(r, g)| is_complete(r).then(|| final_distance(r, g)))
        .collect();
    Ok(success_rates(&distances, thresholds))
}

fn success_rates(distances: &[Option<f64>], thresholds: &[f64]) -> Vec<f64> {
    thresholds
        .iter()
        .map(|&t| distances.iter().filter(|d| d.is_some_and(|d| d < t)).count() as f64 / distances.len() as f64)
        .collect()
}

/// Agreement in [0, 1] between a final observation and the reference one.
pub trait ViewScorer: Send + Sync {
    fn score(&self, final_view: &Observation, reference: &Observation) -> f64;
}

impl<F: Fn(&Observation, &Observation) -> f64 + Send + Sync> ViewScorer for F {
    fn score(&self, final_view: &Observation, reference: &Observation) -> f64 {
        self(final_view, reference)
    }
}

/// Jaccard index of the visible entity ids; two empty views agree fully.
pub struct VisibleSetJaccard;

impl ViewScorer for VisibleSetJaccard {
    fn score(&self, a: &Observation, b: &Observation) -> f64 {
        let sa: std::collections::BTreeSet<&str> = a.visible.iter().map(|v| v.id.as_str()).collect();
        let sb: std::collections::BTreeSet<&str> = b.visible.iter().map(|v| v.id.as_str()).collect();
        let union = sa.union(&sb).count();
        if union == 0 {
            return 1.0;
        }
        sa.intersection(&sb).count() as f64 / union as f64
    }
}

pub struct ScorerRegistry {
    scorers: BTreeMap<String, Box<dyn ViewScorer>>,
}

impl Default for ScorerRegistry {
    fn default() -> Self {
        let mut r = Self {
            scorers: BTreeMap::new(),
        };
        r.register(DEFAULT_SCORER, VisibleSetJaccard);
        r
    }
}

impl ScorerRegistry {
    pub fn register(&mut self, id: &str, scorer: impl ViewScorer + 'static) {
        self.scorers.insert(id.to_string(), Box::new(scorer));
    }

    pub fn get(&self, id: &str) -> Result<&dyn ViewScorer, EvalError> {
        self.scorers
            .get(id)
            .map(|s| s.as_ref())
            .ok_or_else(|| EvalError::UnknownScorer(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.scorers.keys().map(String::as_str)
    }
}

pub fn view_similarity(
    final_view: &Observation,
    reference: &Observation,
    scorer: &str,
    registry: &ScorerRegistry,
) -> Result<f64, EvalError> {
    Ok(registry.get(scorer)?.score(final_view, reference).clamp(0.0, 1.0))
}

/// One simulated episode as stored in a run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode_id: String,
    pub run: usize,
    pub seed: u64,
    pub goal: GoalSpec,
    pub reference_observation: Observation,
    pub result: EpisodeResult,
}

impl EpisodeRecord {
    /// Runs one episode from the world's start pose and pairs it with the
    /// observation seen from the reference pose.
    pub fn simulate<E: PolicyEndpoint + ?Sized>(
        world: &World,
        policy: &mut E,
        cfg: &RunConfig,
        episode_id: &str,
        run: usize,
    ) -> Result<Self, RunnerError> {
        let result = run_episode(world, world.start_pose(), policy, cfg, episode_id)?;
        Ok(Self {
            episode_id: episode_id.to_string(),
            run,
            seed: cfg.seed,
            goal: world.goal.clone(),
            reference_observation: reference_observation(world),
            result,
        })
    }
}

/// What the agent sees when standing at the goal's reference pose.
pub fn reference_observation(world: &World) -> Observation {
    observe(&world.goal.reference_pose, world, &world.agent, 0, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run: usize,
    /// Sorted ids of the evaluated episodes.
    pub episode_ids: Vec<String>,
    pub success: Vec<f64>,
    pub nla_f1: f64,
    pub view_similarity: f64,
    pub protocol_failures: usize,
    pub collisions: usize,
}

/// Scores every episode of one run.
pub fn score_run(
    run: usize,
    records: &[EpisodeRecord],
    cfg: &MetricConfig,
    registry: &ScorerRegistry,
) -> Result<RunMetrics, EvalError> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(EvalError::EmptyResults);
    }
    let scorer = registry.get(&cfg.similarity)?;
    let results: Vec<EpisodeResult> = records.iter().map(|r| r.result.clone()).collect();
    let goals: Vec<GoalSpec> = records.iter().map(|r| r.goal.clone()).collect();
    let success = distance_success_curve(&results, &goals, &cfg.thresholds)?;
    let n = records.len() as f64;
    let nla_f1 = records
        .iter()
        .map(|r| {
            let predicted = if is_complete(&r.result) {
                r.result.terminal.as_ref().map_or("", |t| t.text.as_str())
            } else {
                ""
            };
            unigram_f1(predicted, &r.goal.reference_nla)
        })
        .sum::<f64>()
        / n;
    let view_similarity = records
        .iter()
        .map(|r| {
            scorer
                .score(&r.result.final_observation, &r.reference_observation)
                .clamp(0.0, 1.0)
        })
        .sum::<f64>()
        / n;
    let mut episode_ids: Vec<String> = records.iter().map(|r| r.episode_id.clone()).collect();
    episode_ids.sort();
    Ok(RunMetrics {
        run,
        episode_ids,
        success,
        nla_f1,
        view_similarity,
        protocol_failures: records.iter().filter(|r| r.result.protocol_failure).count(),
        collisions: records.iter().filter(|r| r.result.collisions > 0).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub thresholds: Vec<f64>,
    /// Mean success rate per threshold across runs.
    pub success: Vec<f64>,
    pub nla_f1: f64,
    pub view_similarity: f64,
    pub episode_count: usize,
    pub protocol_failures: usize,
    pub runs: Vec<RunMetrics>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

/// Averages each metric over runs that evaluated the same episodes.
pub fn aggregate_report(runs: &[RunMetrics], thresholds: &[f64]) -> Result<EvalReport, EvalError> {
    let first = runs.first().ok_or(EvalError::EmptyResults)?;
    if runs.iter().any(|r| r.episode_ids != first.episode_ids) {
        return Err(EvalError::MismatchedEpisodeSets);
    }
    if runs.iter().any(|r| r.success.len() != thresholds.len()) {
        return Err(EvalError::InvalidConfig(
            "run curves do not match the thresholds".into(),
        ));
    }
    let success = (0..thresholds.len())
        .map(|i| mean(runs.iter().map(|r| r.success[i])))
        .collect();
    Ok(EvalReport {
        thresholds: thresholds.to_vec(),
        success,
        nla_f1: mean(runs.iter().map(|r| r.nla_f1)),
        view_similarity: mean(runs.iter().map(|r| r.view_similarity)),
        episode_count: first.episode_ids.len(),
        protocol_failures: runs.iter().map(|r| r.protocol_failures).sum(),
        runs: runs.to_vec(),
    })
}

/// Fixed-width table: one row for the mean, one per run.
pub fn render_table(report: &EvalReport, label: &str) -> String {
    let name_w = label.len().max(8);
    let mut out = format!("{:<name_w$}", "");
    for t in &report.thresholds {
        let _ = write!(out, " {:>8}", format!("<{t:.1} m"));
    }
    out.push_str("  Natural Language Action F1  Final View Similarity\n");
    let mut row = |name: &str, success: &[f64], f1: f64, sim: f64| {
        let _ = write!(out, "{name:<name_w$}");
        for s in success {
            let _ = write!(out, " {:>8}", format!("{:.1}%", 100.0 * s));
        }
        let _ = writeln!(out, "  {f1:>26.2}  {sim:>21.2}");
    };
    row(label, &report.success, report.nla_f1, report.view_similarity);
    for r in &report.runs {
        row(&format!("run {}", r.run), &r.success, r.nla_f1, r.view_similarity);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_examples() {
        assert!((unigram_f1("Pick up the red apple", "Pick up the apple") - 8.0 / 9.0).abs() < 1e-12);
        assert_eq!(unigram_f1("Open the door", "open the DOOR!"), 1.0);
        assert_eq!(unigram_f1("a b", "c d"), 0.0);
        assert_eq!(unigram_f1("", "  "), 1.0);
        assert_eq!(unigram_f1("", "x"), 0.0);
        assert_eq!(unigram_f1("the the the", "the"), 0.5);
    }

    #[test]
    fn jaccard_examples() {
        let obs = |ids: &[&str]| Observation {
            step: 0,
            visible: ids
                .iter()
                .map(|id| crate::sim::VisibleEntity {
                    id: id.to_string(),
                    category: crate::sim::Category::Object,
                    attributes: Default::default(),
                    distance: 1.0,
                    bearing: 0.0,
                    elevation: 0.0,
                })
                .collect(),
            collided_last_step: false,
        };
        let reg = ScorerRegistry::default();
        let j = |a: &[&str], b: &[&str]| view_similarity(&obs(a), &obs(b), DEFAULT_SCORER, &reg).unwrap();
        assert_eq!(j(&["a", "b", "c"], &["b", "c", "d"]), 0.5);
        assert_eq!(j(&["a"], &["a"]), 1.0);
        assert_eq!(j(&["a"], &["b"]), 0.0);
        assert_eq!(
            view_similarity(&obs(&[]), &obs(&[]), "pixels", &reg),
            Err(EvalError::UnknownScorer("pixels".into()))
        );
    }
}
