//! Desk-scale GRPO loop.
//!
//! Each task enumerates K complete replies; the policy is a softmax over them.
//! Rollouts are scored with the binary reward and the logits follow the
//! analytic gradient of the GRPO objective. This exercises the reward, the
//! advantage normalization, the clipped surrogate and the KL term end to end
//! without a language model.

use crate::error::{Error, Result};
use crate::grpo::{advantages, clamped_exp, clipped_term_grad, grpo_objective, kl_term, mean};
use crate::model::{GrpoConfig, RewardScheme, RolloutGroup, TrainingInstance};
use crate::reward::score;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

/// A task stops counting as unsolved once its winning reply has at least
/// this probability.
pub const CONVERGED_WIN_PROB: f64 = 0.95;

/// On-disk form of a task: one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub instance: TrainingInstance,
    pub responses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTask {
    instance: TrainingInstance,
    responses: Vec<String>,
    rewards: Vec<f64>,
    winner: Option<usize>,
    index: HashMap<String, usize>,
}

impl ToyTask {
    /// Scores every candidate; exactly one must earn the binary reward.
    pub fn new(instance: TrainingInstance, responses: Vec<String>) -> Result<Self> {
        let task = Self::build(instance, responses)?;
        if task.winner.is_none() {
            return Err(Error::InvalidTask(format!(
                "task {}: no response earns reward 1",
                task.instance.id
            )));
        }
        Ok(task)
    }

    /// A task with no correct reply at all. Useful to check that a group
    /// without reward signal leaves the policy alone.
    pub fn unsolvable(instance: TrainingInstance, responses: Vec<String>) -> Result<Self> {
        let task = Self::build(instance, responses)?;
        if task.winner.is_some() {
            return Err(Error::InvalidTask(format!(
                "task {}: expected no winning response",
                task.instance.id
            )));
        }
        Ok(task)
    }

    fn build(instance: TrainingInstance, responses: Vec<String>) -> Result<Self> {
        let id = instance.id.clone();
        if responses.len() < 2 {
            return Err(Error::InvalidTask(format!("task {id}: need at least 2 responses")));
        }
        let mut index = HashMap::with_capacity(responses.len());
        for (i, r) in responses.iter().enumerate() {
            if index.insert(r.clone(), i).is_some() {
                return Err(Error::InvalidTask(format!("task {id}: response {i} is a duplicate")));
            }
        }
        let rewards: Vec<f64> = responses
            .iter()
            .map(|r| score(&instance, r, RewardScheme::BinaryWithFormat).reward)
            .collect();
        let winners: Vec<usize> = (0..rewards.len()).filter(|&i| rewards[i] == 1.0).collect();
        if winners.len() > 1 {
            return Err(Error::InvalidTask(format!(
                "task {id}: {} responses earn reward 1, expected one",
                winners.len()
            )));
        }
        Ok(ToyTask {
            instance,
            responses,
            rewards,
            winner: winners.first().copied(),
            index,
        })
    }

    pub fn from_spec(spec: TaskSpec) -> Result<Self> {
        Self::new(spec.instance, spec.responses)
    }

    pub fn id(&self) -> &str {
        &self.instance.id
    }

    pub fn instance(&self) -> &TrainingInstance {
        &self.instance
    }

    pub fn responses(&self) -> &[String] {
        &self.responses
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn winner(&self) -> Option<usize> {
        self.winner
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    fn position(&self, response: &str) -> Result<usize> {
        self.index
            .get(response)
            .copied()
            .ok_or_else(|| Error::usage("group contains a response outside the task's space"))
    }
}

/// Read tasks from JSONL; blank lines are skipped.
pub fn read_tasks(reader: impl BufRead) -> Result<Vec<ToyTask>> {
    let mut tasks = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let spec: TaskSpec =
            serde_json::from_str(&line).map_err(|e| Error::InvalidTask(format!("line {}: {e}", n + 1)))?;
        tasks.push(ToyTask::from_spec(spec)?);
    }
    Ok(tasks)
}

/// The committed five-task fixture (K = 8 replies per task).
pub fn default_tasks() -> Vec<ToyTask> {
    read_tasks(include_str!("../fixtures/sim_tasks.jsonl").as_bytes()).expect("bundled simulation fixture is valid")
}

/// Categorical policy over a task's reply space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    pub logits: Vec<f64>,
    pub temperature: f64,
}

impl ToyPolicy {
    pub fn uniform(k: usize, temperature: f64) -> Self {
        ToyPolicy {
            logits: vec![0.0; k],
            temperature,
        }
    }

    pub fn log_probs(&self) -> Vec<f64> {
        let scaled: Vec<f64> = self.logits.iter().map(|z| z / self.temperature).collect();
        let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + scaled.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        scaled.iter().map(|s| s - lse).collect()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs().into_iter().map(f64::exp).collect()
    }

    /// Probability of the task's winning reply; 0 when there is none.
    pub fn win_prob(&self, task: &ToyTask) -> f64 {
        task.winner().map_or(0.0, |w| self.probs()[w])
    }

    fn sample_indices(&self, group_size: usize, seed: u64) -> Vec<usize> {
        let probs = self.probs();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..group_size)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return i;
                    }
                }
                // rounding left the cdf just short of 1
                probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
            })
            .collect()
    }
}

/// Draw `group_size` replies i.i.d. from the policy and score them.
///
/// `logp_old` and `logp_new` both hold the sampling policy's log-probabilities.
pub fn sample_group(policy: &ToyPolicy, task: &ToyTask, group_size: usize, seed: u64) -> Result<RolloutGroup> {
    if group_size < 2 {
        return Err(Error::usage("group_size must be at least 2"));
    }
    check_shape(policy, task)?;
    let logp = policy.log_probs();
    let picks = policy.sample_indices(group_size, seed);
    RolloutGroup::new(
        picks.iter().map(|&i| task.responses[i].clone()).collect(),
        picks.iter().map(|&i| task.rewards[i]).collect(),
        picks.iter().map(|&i| logp[i]).collect(),
        picks.iter().map(|&i| logp[i]).collect(),
        None,
    )
}

fn check_shape(policy: &ToyPolicy, task: &ToyTask) -> Result<()> {
    if policy.logits.len() != task.len() {
        return Err(Error::usage(format!(
            "policy has {} logits but task {} has {} responses",
            policy.logits.len(),
            task.id(),
            task.len()
        )));
    }
    Ok(())
}

fn sampled_positions(group: &RolloutGroup, task: &ToyTask) -> Result<Vec<usize>> {
    group.responses.iter().map(|r| task.position(r)).collect()
}

/// The group re-evaluated under `policy`: `logp_new` is replaced, everything
/// else is kept.
pub fn regroup(policy: &ToyPolicy, group: &RolloutGroup, task: &ToyTask) -> Result<RolloutGroup> {
    check_shape(policy, task)?;
    let logp = policy.log_probs();
    let positions = sampled_positions(group, task)?;
    let mut out = group.clone();
    out.logp_new = positions.iter().map(|&i| logp[i]).collect();
    Ok(out)
}

/// GRPO objective of `policy` on a group sampled earlier.
pub fn objective_at(policy: &ToyPolicy, group: &RolloutGroup, task: &ToyTask, config: &GrpoConfig) -> Result<f64> {
    Ok(grpo_objective(&regroup(policy, group, task)?, config)?.objective)
}

/// Analytic gradient of [`objective_at`] with respect to the logits.
pub fn objective_gradient(
    policy: &ToyPolicy,
    group: &RolloutGroup,
    task: &ToyTask,
    config: &GrpoConfig,
) -> Result<Vec<f64>> {
    let group = regroup(policy, group, task)?;
    group.validate()?;
    config.validate()?;
    let positions = sampled_positions(&group, task)?;
    let adv = advantages(&group.rewards, config.std_epsilon)?;
    let anchor = group.logp_ref.as_deref().unwrap_or(&group.logp_old);
    let probs = policy.probs();
    let n = group.len() as f64;
    let t = policy.temperature;

    let mut grad = vec![0.0; probs.len()];
    for i in 0..group.len() {
        let lp = group.logp_new[i];
        let (rho, _) = clamped_exp(lp - group.logp_old[i]);
        // d(surrogate)/d(logp) = d/d(rho) * rho ; d(-beta*k3)/d(logp) = beta * expm1(anchor - logp)
        let d = (anchor[i] - lp).clamp(-crate::grpo::EXP_CLAMP, crate::grpo::EXP_CLAMP);
        let dlogp = clipped_term_grad(rho, adv[i], config.clip_epsilon) * rho + config.kl_beta * d.exp_m1();
        let coeff = dlogp / (n * t);
        let s = positions[i];
        for (j, g) in grad.iter_mut().enumerate() {
            let indicator = if j == s { 1.0 } else { 0.0 };
            *g += coeff * (indicator - probs[j]);
        }
    }
    Ok(grad)
}

/// One gradient-ascent step. The policy passed in acts as π_old.
pub fn update_policy(
    policy: &ToyPolicy,
    group: &RolloutGroup,
    task: &ToyTask,
    config: &GrpoConfig,
    learning_rate: f64,
) -> Result<ToyPolicy> {
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::usage("learning_rate must be finite and > 0"));
    }
    let grad = objective_gradient(policy, group, task, config)?;
    let logits = policy
        .logits
        .iter()
        .zip(&grad)
        .map(|(z, g)| z + learning_rate * g)
        .collect();
    Ok(ToyPolicy {
        logits,
        temperature: policy.temperature,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: usize,
    pub mean_reward: f64,
    /// k3 of the updated policy against the pre-update policy on the sampled replies.
    pub mean_kl: f64,
    /// Mean length in characters of the sampled replies.
    pub mean_resp_len: f64,
    pub win_prob: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TrainRecord>,
    /// Step after which every task exceeded [`CONVERGED_WIN_PROB`].
    pub converged_at: Option<usize>,
    pub final_win_prob: BTreeMap<String, f64>,
}

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for record in &self.records {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Same columns as the JSONL form with `win_prob` flattened into one
    /// `win_prob.<task-id>` column per task.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let ids: Vec<&String> = self.final_win_prob.keys().collect();
        let mut header = vec![
            "step".to_owned(),
            "mean_reward".to_owned(),
            "mean_kl".to_owned(),
            "mean_resp_len".to_owned(),
        ];
        header.extend(ids.iter().map(|id| format!("win_prob.{id}")));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.step.to_string(),
                r.mean_reward.to_string(),
                r.mean_kl.to_string(),
                r.mean_resp_len.to_string(),
            ];
            row.extend(
                ids.iter()
                    .map(|id| r.win_prob.get(*id).copied().unwrap_or(0.0).to_string()),
            );
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn win_probs(policies: &[ToyPolicy], tasks: &[ToyTask]) -> BTreeMap<String, f64> {
    tasks
        .iter()
        .zip(policies)
        .map(|(t, p)| (t.id().to_owned(), p.win_prob(t)))
        .collect()
}

fn all_converged(probs: &BTreeMap<String, f64>, tasks: &[ToyTask]) -> bool {
    tasks
        .iter()
        .all(|t| t.winner().is_some() && probs[t.id()] > CONVERGED_WIN_PROB)
}

/// Round-robin GRPO over the tasks. One step samples and updates every task
/// once and appends one record.
pub fn run_simulation(
    tasks: &[ToyTask],
    config: &GrpoConfig,
    learning_rate: f64,
    max_steps: usize,
    seed: u64,
) -> Result<TrainTrace> {
    if tasks.is_empty() {
        return Err(Error::usage("simulation needs at least one task"));
    }
    config.validate()?;
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = tasks.iter().find(|t| !seen.insert(t.id())) {
        return Err(Error::usage(format!("duplicate task id {}", dup.id())));
    }

    let mut policies: Vec<ToyPolicy> = tasks
        .iter()
        .map(|t| ToyPolicy::uniform(t.len(), config.temperature))
        .collect();
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let mut converged_at = None;

    for step in 1..=max_steps {
        if all_converged(&win_probs(&policies, tasks), tasks) {
            break;
        }
        let mut rewards = Vec::new();
        let mut kls = Vec::new();
        let mut lengths = Vec::new();
        for (task, policy) in tasks.iter().zip(policies.iter_mut()) {
            let group = sample_group(policy, task, config.group_size, seeds.next_u64())?;
            let updated = update_policy(policy, &group, task, config, learning_rate)?;
            let after = regroup(&updated, &group, task)?;
            kls.extend(
                after
                    .logp_new
                    .iter()
                    .zip(&group.logp_old)
                    .map(|(&new, &old)| kl_term(new, old)),
            );
            rewards.extend_from_slice(&group.rewards);
            lengths.extend(group.responses.iter().map(|r| r.chars().count() as f64));
            *policy = updated;
        }
        let win_prob = win_probs(&policies, tasks);
        let done = all_converged(&win_prob, tasks);
        records.push(TrainRecord {
            step,
            mean_reward: mean(&rewards),
            mean_kl: mean(&kls),
            mean_resp_len: mean(&lengths),
            win_prob,
        });
        if done {
            converged_at = Some(step);
            break;
        }
    }

    Ok(TrainTrace {
        records,
        converged_at,
        final_win_prob: win_probs(&policies, tasks),
    })
}
