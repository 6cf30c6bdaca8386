//! Closed-loop episodes: observe, query a policy, execute, repeat until the
//! policy emits a terminal natural-language action or the budget runs out.

mod endpoint;
mod oracle;
mod wire;

pub use endpoint::{answer_line, serve, EndpointError, ExecEndpoint, InProcess, Policy, PolicyEndpoint, TcpEndpoint};
pub use oracle::{OracleConfig, OraclePolicy};
pub use wire::{build_request, request_to_sample, PolicyRequest, PolicyResponse, RecentStep, PROTOCOL_VERSION};

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{parse_sequence_with, serialize, ActionSequence, Route, RouterConfig};
use crate::pose::Pose;
use crate::sim::{execute_sequence, observe, Observation, World};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("policy did not answer step {step} within {timeout:?}")]
    PolicyTimeout { step: usize, timeout: Duration },
    #[error("policy endpoint failed at step {step}: {source}")]
    Endpoint { step: usize, source: EndpointError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub max_steps: usize,
    /// Malformed responses tolerated per decision before giving up.
    pub retries: usize,
    pub timeout_s: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decode: Option<serde_json::Value>,
    pub router: RouterConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_steps: 60,
            retries: 2,
            timeout_s: 30.0,
            seed: 0,
            decode: None,
            router: RouterConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_s.max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminalAction {
    pub text: String,
    pub route: Route,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode_id: String,
    /// Canonical text of every executed decision.
    pub action_log: Vec<String>,
    /// Start pose followed by the pose after each decision.
    pub pose_trace: Vec<Pose>,
    pub final_pose: Pose,
    pub terminal: Option<TerminalAction>,
    pub truncated: bool,
    pub protocol_failure: bool,
    /// Decisions during which the agent bumped into something.
    pub collisions: usize,
    pub steps: usize,
    /// Malformed responses received over the whole episode.
    pub retries: usize,
    pub final_observation: Observation,
}

/// Validates a response line and parses its action text.
pub fn decode_response(line: &str, router: &RouterConfig) -> Result<ActionSequence, String> {
    let resp: PolicyResponse = serde_json::from_str(line).map_err(|e| format!("bad response record: {e}"))?;
    if resp.version != PROTOCOL_VERSION {
        return Err(format!("unsupported protocol version {:?}", resp.version));
    }
    parse_sequence_with(&resp.action_text, router).map_err(|e| format!("bad action text: {e}"))
}

pub fn run_episode<E: PolicyEndpoint + ?Sized>(
    world: &World,
    start: Pose,
    policy: &mut E,
    cfg: &RunConfig,
    episode_id: &str,
) -> Result<EpisodeResult, RunnerError> {
    let agent = &world.agent;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pose = start.normalized();
    let mut observations = vec![observe(&pose, world, agent, 0, false)];
    let mut actions: Vec<String> = Vec::new();
    let mut trace = vec![pose];
    let (mut collisions, mut retries) = (0, 0);
    let mut terminal = None;
    let mut protocol_failure = false;
    let mut last_collided = false;

    'episode: while actions.len() < cfg.max_steps {
        let step = actions.len();
        let request = build_request(
            episode_id,
            world.instruction(),
            &observations,
            &actions,
            pose,
            cfg.decode.as_ref(),
        );
        let line = serde_json::to_string(&request).expect("request serializes");
        let mut failures = 0;
        let seq = loop {
            let reply = policy.exchange(&line, cfg.timeout()).map_err(|e| match e {
                EndpointError::Timeout(timeout) => RunnerError::PolicyTimeout { step, timeout },
                source => RunnerError::Endpoint { step, source },
            })?;
            match decode_response(&reply, &cfg.router) {
                Ok(seq) => break seq,
                Err(_) => {
                    failures += 1;
                    retries += 1;
                    if failures > cfg.retries {
                        protocol_failure = true;
                        break 'episode;
                    }
                }
            }
        };
        let outcome = execute_sequence(pose, seq.slas(), agent, &mut rng, world);
        pose = outcome.pose;
        last_collided = outcome.collided;
        collisions += usize::from(outcome.collided);
        trace.push(pose);
        actions.push(serialize(&seq.canonicalize()));
        if let Some(t) = seq.terminal() {
            terminal = Some(TerminalAction {
                text: t.text().to_string(),
                route: t.route(),
            });
            break;
        }
        observations.push(observe(&pose, world, agent, actions.len(), outcome.collided));
    }

    Ok(EpisodeResult {
        episode_id: episode_id.to_string(),
        steps: actions.len(),
        final_observation: observe(&pose, world, agent, actions.len(), last_collided),
        action_log: actions,
        pose_trace: trace,
        final_pose: pose,
        truncated: terminal.is_none(),
        terminal,
        protocol_failure,
        collisions,
        retries,
    })
}
