//! One fully specified team-decision instance.

use crate::model::{ActionAlphabet, Scenario, StateAlphabet, UtilitySpec};
use crate::observe::{ChannelModel, ObservationModel};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("inconsistent problem: {0}")]
    Inconsistent(String),
}

/// Scenario, discretized channel, observation structure, per-transmitter
/// action alphabets and the utility under optimization. Immutable once
/// built; everything downstream (synthesis, region computation, Monte Carlo
/// evaluation) borrows it read-only.
#[derive(Debug, Clone)]
pub struct TeamProblem {
    pub scenario: Scenario,
    pub channel: ChannelModel,
    pub observation: ObservationModel,
    pub actions: Vec<ActionAlphabet>,
    pub utility: UtilitySpec,
}

impl TeamProblem {
    pub fn new(
        scenario: Scenario,
        channel: ChannelModel,
        observation: ObservationModel,
        actions: Vec<ActionAlphabet>,
        utility: UtilitySpec,
    ) -> Result<Self, ProblemError> {
        let k = scenario.k();
        if channel.n_links() != scenario.n_links() {
            return Err(ProblemError::Inconsistent(format!(
                "channel has {} links, scenario {}",
                channel.n_links(),
                scenario.n_links()
            )));
        }
        if observation.k() != k {
            return Err(ProblemError::Inconsistent(format!(
                "observation covers {} transmitters, scenario has {k}",
                observation.k()
            )));
        }
        if actions.len() != k {
            return Err(ProblemError::Inconsistent(format!(
                "{} action alphabets for {k} transmitters",
                actions.len()
            )));
        }
        if actions.iter().any(|a| a.is_empty()) {
            return Err(ProblemError::Inconsistent("empty action alphabet".into()));
        }
        if utility.weights.len() != k {
            return Err(ProblemError::Inconsistent(format!(
                "{} weights for {k} transmitters",
                utility.weights.len()
            )));
        }
        for l in 0..channel.n_links() {
            let n = channel.link(l).n_cells();
            if channel.states().radices()[l] != n {
                return Err(ProblemError::Inconsistent(format!(
                    "state alphabet link {l} has {} cells, channel model {n}",
                    channel.states().radices()[l]
                )));
            }
        }
        Ok(Self {
            scenario,
            channel,
            observation,
            actions,
            utility,
        })
    }

    /// Same instance with a shared action alphabet for every transmitter.
    pub fn with_shared_actions(
        scenario: Scenario,
        channel: ChannelModel,
        observation: ObservationModel,
        utility: UtilitySpec,
    ) -> Result<Self, ProblemError> {
        let alphabet = ActionAlphabet::enumerate(&scenario);
        let actions = vec![alphabet; scenario.k()];
        Self::new(scenario, channel, observation, actions, utility)
    }

    pub fn k(&self) -> usize {
        self.scenario.k()
    }
    pub fn states(&self) -> &StateAlphabet {
        self.channel.states()
    }
    pub fn obs_sizes(&self) -> Vec<usize> {
        self.observation.obs_sizes()
    }
    pub fn action_sizes(&self) -> Vec<usize> {
        self.actions.iter().map(|a| a.len()).collect()
    }

    /// Same problem under different scalarization weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Self {
        let mut p = self.clone();
        p.utility = self.utility.with_weights(weights).expect("valid weights");
        p
    }
}
