//! Transition-based RRT in joint space.
//!
//! A plain RRT whose extensions must also pass a Metropolis test on a
//! configuration cost: moves downhill are always taken, uphill ones with
//! probability `exp(-dc / (K * T))`. The temperature `T` drops by `alpha` after
//! each accepted climb and rises by `alpha` after `max_fails` refusals in a row,
//! so the tree keeps to low-cost regions unless it is stuck.

use super::PlanError;
use crate::robot::{joint_distance, joint_distance_inf, JointConfig, DOF};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// What the planner needs to know about joint space.
pub trait ConfigSpace {
    fn limits(&self) -> [(f64, f64); DOF];
    fn is_free(&self, q: &JointConfig) -> bool;
    fn cost(&self, q: &JointConfig) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct TrrtConfig {
    /// Multiplies `K`, which is the mean cost of start and goal.
    pub cost_weight: f64,
    pub initial_temperature: f64,
    pub temperature_factor: f64,
    pub max_fails: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Collision-check and output resolution, per joint (rad).
    pub max_joint_step: f64,
    /// Longest tree extension (rad, Euclidean in joint space).
    pub extend_step: f64,
    pub goal_bias: f64,
    pub shortcut_attempts: usize,
}

impl Default for TrrtConfig {
    fn default() -> Self {
        Self {
            cost_weight: 1.0,
            initial_temperature: 1e-3,
            temperature_factor: 2.0,
            max_fails: 20,
            max_iter: 20000,
            seed: 0,
            max_joint_step: 0.02,
            extend_step: 0.3,
            goal_bias: 0.1,
            shortcut_attempts: 100,
        }
    }
}

/// Points strictly between `a` and `b`, then `b`, spaced at most `step` apart
/// per joint.
pub fn interpolate(a: &JointConfig, b: &JointConfig, step: f64) -> Vec<JointConfig> {
    let n = (joint_distance_inf(a, b) / step).ceil().max(1.0) as usize;
    (1..=n)
        .map(|i| if i == n { *b } else { crate::robot::lerp(a, b, i as f64 / n as f64) })
        .collect()
}

pub fn segment_free<S: ConfigSpace + ?Sized>(space: &S, a: &JointConfig, b: &JointConfig, step: f64) -> bool {
    interpolate(a, b, step).iter().all(|q| space.is_free(q))
}

struct Node {
    q: JointConfig,
    parent: usize,
    cost: f64,
}

/// Joint path from `start` to `goal`, shortcut-smoothed and resampled so that
/// consecutive waypoints differ by at most `max_joint_step` per joint.
pub fn plan_motion<S: ConfigSpace + ?Sized>(
    space: &S,
    start: &JointConfig,
    goal: &JointConfig,
    cfg: &TrrtConfig,
) -> Result<Vec<JointConfig>, PlanError> {
    if !space.is_free(start) {
        return Err(PlanError::StartInCollision);
    }
    if !space.is_free(goal) {
        return Err(PlanError::GoalInCollision);
    }
    if start == goal {
        return Ok(vec![*start]);
    }
    let step = cfg.max_joint_step;
    let limits = space.limits();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tree = vec![Node {
        q: *start,
        parent: usize::MAX,
        cost: space.cost(start),
    }];
    // Costs are compared relative to the endpoints' typical cost.
    let k = cfg.cost_weight * 0.5 * (space.cost(start) + space.cost(goal)).max(f64::MIN_POSITIVE);
    let mut temp = cfg.initial_temperature;
    let mut fails = 0usize;
    let mut reached = None;

    for _ in 0..cfg.max_iter {
        let target = if rng.random::<f64>() < cfg.goal_bias {
            *goal
        } else {
            let mut q = [0.0; DOF];
            for (x, (lo, hi)) in q.iter_mut().zip(limits) {
                *x = rng.random_range(lo..=hi);
            }
            q
        };
        let near = nearest(&tree, &target);
        let from = tree[near].q;
        let d = joint_distance(&from, &target);
        if d < 1e-12 {
            continue;
        }
        let q_new = if d > cfg.extend_step {
            crate::robot::lerp(&from, &target, cfg.extend_step / d)
        } else {
            target
        };
        if !segment_free(space, &from, &q_new, step) {
            continue;
        }
        let c_new = space.cost(&q_new);
        let dc = c_new - tree[near].cost;
        if dc > 0.0 {
            let p = (-dc / (k * temp)).exp();
            if rng.random::<f64>() < p {
                temp /= cfg.temperature_factor;
                fails = 0;
            } else {
                fails += 1;
                if fails > cfg.max_fails {
                    temp *= cfg.temperature_factor;
                    fails = 0;
                }
                continue;
            }
        }
        tree.push(Node {
            q: q_new,
            parent: near,
            cost: c_new,
        });
        let idx = tree.len() - 1;
        if q_new == *goal {
            reached = Some(idx);
            break;
        }
        if joint_distance(&q_new, goal) <= cfg.extend_step && segment_free(space, &q_new, goal, step) {
            tree.push(Node {
                q: *goal,
                parent: idx,
                cost: space.cost(goal),
            });
            reached = Some(tree.len() - 1);
            break;
        }
    }

    let Some(mut i) = reached else {
        return Err(PlanError::MotionTimeout {
            iterations: cfg.max_iter,
            tree: tree.len(),
        });
    };
    let mut path = vec![tree[i].q];
    while tree[i].parent != usize::MAX {
        i = tree[i].parent;
        path.push(tree[i].q);
    }
    path.reverse();
    let path = shortcut(space, path, cfg, &mut rng);
    Ok(densify(&path, step))
}

fn nearest(tree: &[Node], q: &JointConfig) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (i, n) in tree.iter().enumerate() {
        let d = joint_distance(&n.q, q);
        if d < bd {
            bd = d;
            best = i;
        }
    }
    best
}

/// Greedy pass from the start, then random shortcuts.
fn shortcut<S: ConfigSpace + ?Sized>(
    space: &S,
    path: Vec<JointConfig>,
    cfg: &TrrtConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<JointConfig> {
    let step = cfg.max_joint_step;
    let mut out = vec![path[0]];
    let mut i = 0;
    while i + 1 < path.len() {
        let mut j = path.len() - 1;
        while j > i + 1 && !segment_free(space, &path[i], &path[j], step) {
            j -= 1;
        }
        out.push(path[j]);
        i = j;
    }
    let mut path = out;
    for _ in 0..cfg.shortcut_attempts {
        if path.len() < 3 {
            break;
        }
        let a = rng.random_range(0..path.len() - 2);
        let b = rng.random_range(a + 2..path.len());
        if segment_free(space, &path[a], &path[b], step) {
            path.drain(a + 1..b);
        }
    }
    path
}

pub fn densify(path: &[JointConfig], step: f64) -> Vec<JointConfig> {
    let mut out = vec![path[0]];
    for w in path.windows(2) {
        out.extend(interpolate(&w[0], &w[1], step));
    }
    out
}

pub fn path_length(path: &[JointConfig]) -> f64 {
    path.windows(2).map(|w| joint_distance(&w[0], &w[1])).sum()
}
