//! UCT search over macro decisions.
//!
//! Tree edges are macro options; rollouts follow the greedy policy. Node
//! values are mean total plan lengths, min-max normalized over the tree so
//! the exploration constant is scale free. A subtree whose every leaf is
//! terminal is marked solved; the search stops early once the root is solved.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::macros::{apply_macro, build_plan, describe, greedy, macro_limit, options, Macro};
use super::{Plan, PlannerError, Task};
use crate::goals::GoalSpec;
use crate::worldsim::SceneGraph;

/// Horizon meaning "plan until the goal is satisfied".
pub const UNBOUNDED: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MctsConfig {
    pub num_simulations: usize,
    pub uct_exploration: f64,
    /// Maximum macros per rollout.
    pub rollout_horizon: usize,
    pub seed: u64,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig { num_simulations: 100, uct_exploration: std::f64::consts::SQRT_2, rollout_horizon: 30, seed: 0 }
    }
}

impl MctsConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        MctsConfig { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.num_simulations == 0 || self.rollout_horizon == 0 {
            return Err(PlannerError::InvalidConfig("num_simulations and rollout_horizon must be >= 1".into()));
        }
        if !(self.uct_exploration.is_finite() && self.uct_exploration >= 0.0) {
            return Err(PlannerError::InvalidConfig("uct_exploration must be finite and >= 0".into()));
        }
        Ok(())
    }
}

struct Node {
    state: SceneGraph,
    mac: Option<Macro>,
    /// Primitive steps from the root.
    depth_len: u32,
    children: Vec<usize>,
    untried: Vec<Macro>,
    visits: u32,
    sum_len: f64,
    terminal: bool,
    /// Terminal without satisfying the task.
    dead: bool,
    solved: bool,
}

impl Node {
    fn new(state: SceneGraph, mac: Option<Macro>, depth_len: u32, task: &Task, rng: &mut ChaCha8Rng) -> Self {
        let (terminal, dead, mut untried) = match options(&state, task) {
            None => (true, !task.commit_other && !task.is_met(&state), Vec::new()),
            Some(opts) => (opts.is_empty(), opts.is_empty(), opts.into_iter().map(|o| o.mac).collect::<Vec<_>>()),
        };
        untried.shuffle(rng);
        Node {
            state,
            mac,
            depth_len,
            children: Vec::new(),
            untried,
            visits: 0,
            sum_len: 0.0,
            terminal,
            dead,
            solved: terminal,
        }
    }

    fn mean(&self) -> f64 {
        self.sum_len / self.visits.max(1) as f64
    }
}

struct Tree<'a> {
    task: &'a Task,
    cfg: &'a MctsConfig,
    nodes: Vec<Node>,
    min_len: f64,
    max_len: f64,
    /// Cost charged for a rollout that does not finish.
    penalty: f64,
}

impl Tree<'_> {
    fn uct_child(&self, parent: usize) -> Option<usize> {
        let p = &self.nodes[parent];
        let ln_n = (p.visits.max(1) as f64).ln();
        let span = self.max_len - self.min_len;
        let mut best: Option<(f64, usize)> = None;
        for &c in &p.children {
            let ch = &self.nodes[c];
            let exploit = if span > 0.0 { (self.max_len - ch.mean()) / span } else { 0.5 };
            let score = exploit + self.cfg.uct_exploration * (ln_n / ch.visits.max(1) as f64).sqrt();
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, c));
            }
        }
        best.map(|(_, c)| c)
    }

    fn rollout(&self, node: usize) -> Result<f64, PlannerError> {
        let n = &self.nodes[node];
        if n.terminal {
            return Ok(n.depth_len as f64 + if n.dead { self.penalty } else { 0.0 });
        }
        let mut s = n.state.clone();
        match greedy(&mut s, self.task, self.cfg.rollout_horizon) {
            Ok((_, steps, true)) => Ok((n.depth_len + steps) as f64),
            Ok((_, steps, false)) => Ok((n.depth_len + steps) as f64 + self.penalty),
            Err(PlannerError::Unreachable(_)) => Ok(n.depth_len as f64 + self.penalty),
            Err(e) => Err(e),
        }
    }

    fn simulate(&mut self, rng: &mut ChaCha8Rng) -> Result<(), PlannerError> {
        let mut path = vec![0];
        let mut cur = 0;
        loop {
            let n = &self.nodes[cur];
            if n.terminal || !n.untried.is_empty() {
                break;
            }
            match self.uct_child(cur) {
                Some(c) => {
                    cur = c;
                    path.push(c);
                }
                None => break,
            }
        }
        if let Some(mac) = self.nodes[cur].untried.pop() {
            let mut s = self.nodes[cur].state.clone();
            let steps = apply_macro(&mut s, self.task.agent, mac)?;
            let child = Node::new(s, Some(mac), self.nodes[cur].depth_len + steps, self.task, rng);
            self.nodes.push(child);
            let id = self.nodes.len() - 1;
            self.nodes[cur].children.push(id);
            cur = id;
            path.push(id);
        }
        let total = self.rollout(cur)?;
        self.min_len = self.min_len.min(total);
        self.max_len = self.max_len.max(total);
        for &i in path.iter().rev() {
            let solved = {
                let n = &self.nodes[i];
                n.terminal || (n.untried.is_empty() && n.children.iter().all(|&c| self.nodes[c].solved))
            };
            let n = &mut self.nodes[i];
            n.visits += 1;
            n.sum_len += total;
            n.solved = solved;
        }
        Ok(())
    }

    /// Most-visited line from the root; ties go to the shorter mean, then to
    /// expansion order.
    fn best_line(&self) -> (Vec<Macro>, usize) {
        let mut line = Vec::new();
        let mut cur = 0;
        while let Some(&first) = self.nodes[cur].children.first() {
            let mut best = first;
            for &c in &self.nodes[cur].children[1..] {
                let (a, b) = (&self.nodes[c], &self.nodes[best]);
                if a.visits > b.visits || (a.visits == b.visits && a.mean() < b.mean()) {
                    best = c;
                }
            }
            line.push(self.nodes[best].mac.expect("non-root nodes carry a macro"));
            cur = best;
        }
        (line, cur)
    }
}

/// UCT plan for an arbitrary task, truncated to `horizon` primitive steps.
pub fn mcts_plan_for(
    state: &SceneGraph,
    task: &Task,
    horizon: usize,
    cfg: &MctsConfig,
) -> Result<Plan, PlannerError> {
    cfg.validate()?;
    if horizon == 0 {
        return Err(PlannerError::InvalidConfig("horizon must be >= 1".into()));
    }
    let mut probe = state.clone();
    let limit = macro_limit(state, task);
    let (greedy_line, greedy_len, done) = greedy(&mut probe, task, limit)?;
    if !done {
        return Err(PlannerError::Unreachable(describe(task)));
    }
    if greedy_line.len() <= 1 {
        return Ok(build_plan(state, task.agent, &greedy_line, horizon));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let root = Node::new(state.clone(), None, 0, task, &mut rng);
    let mut tree = Tree {
        task,
        cfg,
        nodes: vec![root],
        min_len: f64::INFINITY,
        max_len: f64::NEG_INFINITY,
        penalty: 2.0 * greedy_len as f64 + 50.0,
    };
    for _ in 0..cfg.num_simulations {
        if tree.nodes[0].solved {
            break;
        }
        tree.simulate(&mut rng)?;
    }
    let (mut line, leaf) = tree.best_line();
    let mut tail_state = tree.nodes[leaf].state.clone();
    match greedy(&mut tail_state, task, limit) {
        Ok((tail, _, true)) => line.extend(tail),
        _ => line = greedy_line,
    }
    Ok(build_plan(state, task.agent, &line, horizon))
}

/// UCT plan for the main agent toward `goal`.
pub fn mcts_plan(state: &SceneGraph, goal: &GoalSpec, horizon: usize, cfg: &MctsConfig) -> Result<Plan, PlannerError> {
    mcts_plan_for(state, &Task::goal(state.main_agent(), goal), horizon, cfg)
}
