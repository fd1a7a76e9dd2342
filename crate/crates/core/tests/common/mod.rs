//! Shared helpers for the integration tests: fixture loading, random
//! generators and independent oracles.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{Map, Number, Value};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::PathBuf;
use toolreward::sim::{objective_at, objective_gradient, regroup};
use toolreward::{sample_group, Action, GrpoConfig, RolloutGroup, ToolCall, ToyPolicy, ToyTask, TrainingInstance};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(name: &str) -> Vec<T> {
    std::fs::read_to_string(fixture(name))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[derive(Debug, Clone, Deserialize)]
pub struct GoldenCase {
    pub name: String,
    pub instance: TrainingInstance,
    pub reply: String,
    pub expected: BTreeMap<String, f64>,
}

pub fn golden_cases() -> Vec<GoldenCase> {
    read_jsonl("reward_golden.jsonl")
}

// ---------------------------------------------------------------------------
// Random JSON and actions

const NAMES: [&str; 4] = ["get_weather", "send_email", "math.hypot", "lookup"];
const KEYS: [&str; 6] = ["city", "to", "x", "y", "unit", "body"];

/// Small JSON values. Floats are dyadic so their decimal form round-trips.
pub fn random_value(rng: &mut impl Rng, depth: u32) -> Value {
    let top = if depth == 0 { 5 } else { 7 };
    match rng.random_range(0..top) {
        0 => Value::Null,
        1 => Value::Bool(rng.random()),
        2 => Value::from(rng.random_range(-50i64..50)),
        3 => Value::from(rng.random_range(-64i32..64) as f64 / 8.0),
        4 => Value::String(["Paris", "Bob", "", "a b", "ünï", "42"][rng.random_range(0..6)].to_owned()),
        5 => Value::Array(
            (0..rng.random_range(0..3))
                .map(|_| random_value(rng, depth - 1))
                .collect(),
        ),
        _ => Value::Object(random_map(rng, depth - 1)),
    }
}

pub fn random_map(rng: &mut impl Rng, depth: u32) -> Map<String, Value> {
    let n = rng.random_range(0..4);
    let mut keys = KEYS.to_vec();
    keys.shuffle(rng);
    keys.into_iter()
        .take(n)
        .map(|k| (k.to_owned(), random_value(rng, depth)))
        .collect()
}

pub fn random_call(rng: &mut impl Rng) -> ToolCall {
    ToolCall {
        name: NAMES[rng.random_range(0..NAMES.len())].to_owned(),
        arguments: random_map(rng, 2),
    }
}

pub fn random_action(rng: &mut impl Rng, min: usize, max: usize) -> Action {
    Action::new((0..rng.random_range(min..=max)).map(|_| random_call(rng)).collect())
}

/// A value that differs from `v` under semantic equality.
fn mutate_value(rng: &mut impl Rng, v: &Value) -> Value {
    match v {
        Value::Number(n) if n.is_i64() => Value::from(n.as_i64().unwrap() + 1),
        Value::String(s) => Value::String(format!("{s}!")),
        Value::Bool(b) => Value::Bool(!b),
        Value::Object(m) if !m.is_empty() && rng.random() => {
            let mut m = m.clone();
            let k = m.keys().next().unwrap().clone();
            let inner = mutate_value(rng, &m[&k]);
            m.insert(k, inner);
            Value::Object(m)
        }
        _ => Value::from(999),
    }
}

/// Same call, numerically equal integers rewritten as floats (`2` -> `2.0`).
pub fn float_spelling(v: &Value) -> Value {
    match v {
        Value::Number(n) if n.is_i64() => Value::Number(Number::from_f64(n.as_i64().unwrap() as f64).unwrap()),
        Value::Array(xs) => Value::Array(xs.iter().map(float_spelling).collect()),
        Value::Object(m) => Value::Object(m.iter().map(|(k, v)| (k.clone(), float_spelling(v))).collect()),
        other => other.clone(),
    }
}

/// A prediction derived from `gt`: equal, equivalent, or broken in one of
/// several ways. Order is always shuffled.
pub fn perturb(rng: &mut impl Rng, gt: &Action) -> Action {
    let mut calls = gt.calls.clone();
    match rng.random_range(0..9) {
        0 | 1 => {}
        2 => {
            for c in &mut calls {
                c.arguments = match float_spelling(&Value::Object(c.arguments.clone())) {
                    Value::Object(m) => m,
                    _ => unreachable!(),
                };
            }
        }
        3 => {
            calls.remove(rng.random_range(0..calls.len()));
        }
        4 => calls.push(random_call(rng)),
        5 => {
            let i = rng.random_range(0..calls.len());
            calls.push(calls[i].clone());
        }
        6 => {
            let i = rng.random_range(0..calls.len());
            calls[i].name = NAMES[rng.random_range(0..NAMES.len())].to_owned();
        }
        7 => {
            let i = rng.random_range(0..calls.len());
            let args = &mut calls[i].arguments;
            if let Some(k) = args.keys().next().cloned() {
                let v = mutate_value(rng, &args[&k]);
                args.insert(k, v);
            } else {
                args.insert("extra".into(), Value::from(1));
            }
        }
        _ => {
            // replace with an unrelated action of the same size
            for c in &mut calls {
                *c = random_call(rng);
            }
        }
    }
    calls.shuffle(rng);
    Action::new(calls)
}

// ---------------------------------------------------------------------------
// Text rendering with a chosen key order

/// Serialize `v` with every object's keys in a random order.
pub fn shuffled_json(rng: &mut impl Rng, v: &Value) -> String {
    match v {
        Value::Object(m) => {
            let mut entries: Vec<(&String, &Value)> = m.iter().collect();
            entries.shuffle(rng);
            let parts: Vec<String> = entries
                .into_iter()
                .map(|(k, v)| format!("{}: {}", Value::String(k.clone()), shuffled_json(rng, v)))
                .collect();
            format!("{{{}}}", parts.join(", "))
        }
        Value::Array(xs) => {
            let parts: Vec<String> = xs.iter().map(|x| shuffled_json(rng, x)).collect();
            format!("[{}]", parts.join(", "))
        }
        other => other.to_string(),
    }
}

pub fn action_value(action: &Action) -> Value {
    serde_json::to_value(action).unwrap()
}

pub fn reply_text(think: &str, call_json: &str) -> String {
    format!("<think>{think}</think>\n<tool_call>{call_json}</tool_call>")
}

pub fn shuffled(rng: &mut impl Rng, a: &Action) -> Action {
    let mut calls = a.calls.clone();
    calls.shuffle(rng);
    Action::new(calls)
}

pub fn instance_for(gt: Action) -> TrainingInstance {
    let mut inst = toolreward::fixtures::hair_stylist_instance();
    inst.id = "random".into();
    inst.ground_truth = gt;
    inst
}

/// A reply for `gt`: correct, broken in its calls, or broken in its format.
pub fn random_reply(rng: &mut impl Rng, gt: &Action) -> (Action, String) {
    let pred = perturb(rng, gt);
    let body = shuffled_json(rng, &action_value(&pred));
    let text = match rng.random_range(0..6) {
        0 => format!("<think>t</think><tool_call>{body}</tool_call> trailing"),
        1 => format!("I will call {body}"),
        _ => reply_text("thinking", &body),
    };
    (pred, text)
}

/// The same reply with its call array re-serialized in another call and key order.
pub fn reorder_reply(rng: &mut impl Rng, pred: &Action, text: &str) -> String {
    let reordered = shuffled(rng, pred);
    let body = shuffled_json(rng, &action_value(&reordered));
    let start = text.find('[').unwrap();
    let end = text.rfind(']').unwrap();
    format!("{}{body}{}", &text[..start], &text[end + 1..])
}

// ---------------------------------------------------------------------------
// Corrupted pipeline input

/// Damage one JSONL record in one of several ways chosen by `how`.
pub fn mangle(line: &str, how: u8, cut: usize) -> String {
    let mut v: Value = serde_json::from_str(line).unwrap();
    let obj = v.as_object_mut().unwrap();
    let key = obj.keys().nth(cut % obj.len()).unwrap().clone();
    match how % 6 {
        0 => {
            let mut end = cut % line.len();
            while !line.is_char_boundary(end) {
                end -= 1;
            }
            line[..end].to_owned()
        }
        1 => {
            obj.remove(&key);
            v.to_string()
        }
        2 => {
            obj.insert(key, Value::from(42));
            v.to_string()
        }
        3 => {
            obj.insert(key, Value::Null);
            v.to_string()
        }
        4 => format!("{line}{line}"),
        _ => line.to_owned(),
    }
}

/// Every line of the committed pipeline fixtures.
pub fn pipeline_corpus() -> Vec<String> {
    ["pipeline_mixed.jsonl", "pipeline_multiturn.jsonl"]
        .iter()
        .flat_map(|f| {
            std::fs::read_to_string(fixture(f))
                .unwrap()
                .lines()
                .map(str::to_owned)
                .collect::<Vec<_>>()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Golden inputs as CLI files

/// Write the first `limit` golden cases as an instance file (one line per
/// distinct instance) and a reply file (one line per case).
pub fn write_golden_inputs(dir: &std::path::Path, limit: usize) -> (PathBuf, PathBuf) {
    let mut instances = BTreeMap::new();
    let mut replies = String::new();
    for c in golden_cases().into_iter().take(limit) {
        replies.push_str(&serde_json::json!({"id": c.instance.id, "reply": c.reply}).to_string());
        replies.push('\n');
        instances.insert(c.instance.id.clone(), c.instance);
    }
    let inst_path = dir.join("instances.jsonl");
    let reply_path = dir.join("replies.jsonl");
    let inst_text: String = instances
        .values()
        .map(|i| serde_json::to_string(i).unwrap() + "\n")
        .collect();
    std::fs::write(&inst_path, inst_text).unwrap();
    std::fs::write(&reply_path, replies).unwrap();
    (inst_path, reply_path)
}

// ---------------------------------------------------------------------------
// Oracles

/// Semantic JSON equality: numbers compare by value, objects as key sets.
pub fn json_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => x.as_f64() == y.as_f64(),
        (Value::Array(x), Value::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| json_eq(p, q)),
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| json_eq(v, w)))
        }
        _ => a == b,
    }
}

pub fn call_eq(a: &ToolCall, b: &ToolCall) -> bool {
    a.name == b.name && json_eq(&Value::Object(a.arguments.clone()), &Value::Object(b.arguments.clone()))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Exhaustive search for a bijection pairing every predicted call with an
/// equal reference call.
pub fn brute_force_match(pred: &Action, gt: &Action) -> bool {
    if pred.calls.len() != gt.calls.len() {
        return false;
    }
    permutations(gt.calls.len()).iter().any(|perm| {
        perm.iter()
            .enumerate()
            .all(|(i, &j)| call_eq(&pred.calls[i], &gt.calls[j]))
    })
}

/// Two-pass mean and population standard deviation.
pub fn mean_popstd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

// ---------------------------------------------------------------------------
// Gradient checks on the toy policy

/// Central-difference gradient of the objective with respect to the logits.
pub fn numeric_gradient(
    policy: &ToyPolicy,
    group: &RolloutGroup,
    task: &ToyTask,
    cfg: &GrpoConfig,
    h: f64,
) -> Vec<f64> {
    (0..policy.logits.len())
        .map(|j| {
            let mut up = policy.clone();
            up.logits[j] += h;
            let mut down = policy.clone();
            down.logits[j] -= h;
            (objective_at(&up, group, task, cfg).unwrap() - objective_at(&down, group, task, cfg).unwrap()) / (2.0 * h)
        })
        .collect()
}

/// Relative error with a floor on the denominator so that components that
/// are zero analytically compare on an absolute scale.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

pub struct GradientReport {
    pub states: usize,
    pub worst: f64,
    /// States skipped because a ratio sat within 1e-3 of a clip boundary.
    pub near_kink: usize,
    /// States skipped because the sampled rewards had no spread.
    pub flat: usize,
}

/// Compare analytic and numeric gradients on `states` random policy states.
pub fn gradient_check(tasks: &[ToyTask], states: usize, seed: u64) -> GradientReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradientReport {
        states: 0,
        worst: 0.0,
        near_kink: 0,
        flat: 0,
    };
    while report.states < states {
        let task = &tasks[rng.random_range(0..tasks.len())];
        let cfg = GrpoConfig {
            kl_beta: [0.0, 1e-3, 0.1][report.states % 3],
            ..GrpoConfig::default()
        };
        let old = ToyPolicy {
            logits: (0..task.len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            temperature: cfg.temperature,
        };
        let group = sample_group(&old, task, cfg.group_size, rng.random()).unwrap();
        if group.rewards.iter().all(|&r| r == group.rewards[0]) {
            report.flat += 1;
            continue;
        }
        let new = ToyPolicy {
            logits: old.logits.iter().map(|z| z + rng.random_range(-0.3..0.3)).collect(),
            temperature: cfg.temperature,
        };
        // the surrogate has a kink at the clip boundary where no derivative exists
        let moved = regroup(&new, &group, task).unwrap();
        let lo = 1.0 - cfg.clip_epsilon;
        let hi = 1.0 + cfg.clip_epsilon;
        let near_kink = moved.logp_new.iter().zip(&moved.logp_old).any(|(n, o)| {
            let rho = (n - o).exp();
            (rho - lo).abs() < 1e-3 || (rho - hi).abs() < 1e-3
        });
        if near_kink {
            report.near_kink += 1;
            continue;
        }
        let analytic = objective_gradient(&new, &group, task, &cfg).unwrap();
        let numeric = numeric_gradient(&new, &group, task, &cfg, 1e-5);
        for (a, n) in analytic.iter().zip(&numeric) {
            report.worst = report.worst.max(rel_err(*a, *n));
        }
        report.states += 1;
    }
    report
}

/// A group of one winner and four losers sampled under a uniform policy,
/// plus a policy that pushes every ratio past the clip range.
pub fn fully_clipped_state(task: &ToyTask) -> (RolloutGroup, ToyPolicy) {
    let w = task.winner().unwrap();
    let picks: Vec<usize> = std::iter::once(w)
        .chain((0..task.len()).filter(|&i| i != w).take(4))
        .collect();
    let old = ToyPolicy::uniform(task.len(), 0.7);
    let lp = old.log_probs();
    let group = RolloutGroup::new(
        picks.iter().map(|&i| task.responses()[i].clone()).collect(),
        picks.iter().map(|&i| task.rewards()[i]).collect(),
        picks.iter().map(|&i| lp[i]).collect(),
        picks.iter().map(|&i| lp[i]).collect(),
        None,
    )
    .unwrap();
    let mut new = old;
    new.logits[w] = 1.0;
    (group, new)
}

// ---------------------------------------------------------------------------
// Minimal blocking HTTP/1.1 client for talking to a live server

pub fn http(addr: SocketAddr, method: &str, path: &str, body: &[u8]) -> (u16, Vec<u8>) {
    let mut stream = TcpStream::connect(addr).unwrap();
    let head = format!(
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    stream.write_all(head.as_bytes()).unwrap();
    stream.write_all(body).unwrap();
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).unwrap();
    let split = raw
        .windows(4)
        .position(|w| w == b"\r\n\r\n")
        .expect("response has a header block");
    let status_line = String::from_utf8_lossy(&raw[..split])
        .lines()
        .next()
        .unwrap()
        .to_owned();
    let status = status_line.split_whitespace().nth(1).unwrap().parse().unwrap();
    (status, raw[split + 4..].to_vec())
}

/// A service running on an ephemeral port until dropped.
pub struct LiveServer {
    pub addr: SocketAddr,
    stop: Option<std::sync::mpsc::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl LiveServer {
    pub fn start(config: toolreward::service::ServiceConfig) -> LiveServer {
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (stop_tx, stop_rx) = std::sync::mpsc::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                toolreward::service::serve(listener, config, async {
                    let _ = tokio::task::spawn_blocking(move || stop_rx.recv()).await;
                })
                .await
                .unwrap();
            });
        });
        LiveServer {
            addr: addr_rx.recv().unwrap(),
            stop: Some(stop_tx),
            thread: Some(thread),
        }
    }
}

impl Drop for LiveServer {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
