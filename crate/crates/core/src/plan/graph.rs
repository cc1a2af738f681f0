//! Three-layer regrasp graph and keyframe search.
//!
//! A circle is one object pose with the grasps usable there. The top layer is
//! the initial pose, the bottom layer the goal, and the middle layer every
//! stable placement at a sampled yaw, all at the initial position. Grasps with
//! the same id in two circles are joined by a transfer edge (carry the object
//! with that grasp); grasps of one table-resting circle are all joined by
//! transit edges (put the object down and grasp it again).
//!
//! Both edge families are cliques, so they are searched through hub vertices
//! instead of being stored: one hub per circle for transit and one per grasp
//! id for transfer. Path costs are those of the explicit graph.

use super::PlanError;
use super::pipeline::CONTACT_TOL;
use crate::collision::{capsules_hit, signed_body_distance, ConvexBody, Obstacle};
use crate::grasp::{collision_filter, transform_grasps, FrameTag, GraspSet};
use crate::placement::{resting_pose, StablePlacement, TableModel};
use crate::robot::{JointConfig, RobotModel};
use crate::se3::Pose;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

/// Pose error (m and rad) that keyframe joint configurations are refined to.
const NODE_IK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layer {
    Top,
    Middle,
    Bottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GraphNode {
    pub grasp: usize,
    pub config: JointConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Circle {
    pub layer: Layer,
    pub object_pose: Pose,
    /// Placement index and yaw of a middle-layer circle.
    pub placement: Option<(usize, f64)>,
    /// Whether the object rests on the table here, which allows regrasping.
    pub resting: bool,
    /// Sorted by grasp id.
    pub nodes: Vec<GraphNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    Transfer,
    Transit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeRef {
    pub circle: usize,
    pub grasp: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub a: NodeRef,
    pub b: NodeRef,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GraphConfig {
    pub yaw_samples: usize,
    pub transfer_cost: f64,
    pub transit_cost: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            yaw_samples: 36,
            transfer_cost: 1.0,
            transit_cost: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GraspGraph {
    pub circles: Vec<Circle>,
}

impl GraspGraph {
    /// Checks that every node names a grasp of `free` and that node lists
    /// are sorted and unique.
    pub fn from_circles(circles: Vec<Circle>, free: &GraspSet) -> Result<Self, PlanError> {
        let ids = free.ids();
        for c in &circles {
            if c.layer == Layer::Bottom && c.resting && c.nodes.len() > 1 {
                log::debug!("bottom circle allows no regrasp even when resting");
            }
            for w in c.nodes.windows(2) {
                if w[0].grasp >= w[1].grasp {
                    return Err(PlanError::BadGraph("circle nodes must be sorted by unique grasp id"));
                }
            }
            if c.nodes.iter().any(|n| !ids.contains(&n.grasp)) {
                return Err(PlanError::BadGraph("node grasp id missing from the free-space set"));
            }
        }
        Ok(Self { circles })
    }

    pub fn node_count(&self) -> usize {
        self.circles.iter().map(|c| c.nodes.len()).sum()
    }

    pub fn layer_node_count(&self, layer: Layer) -> usize {
        self.circles
            .iter()
            .filter(|c| c.layer == layer)
            .map(|c| c.nodes.len())
            .sum()
    }

    fn allows_transit(c: &Circle) -> bool {
        c.resting && c.layer != Layer::Bottom
    }

    pub fn node(&self, r: NodeRef) -> Option<&GraphNode> {
        let c = self.circles.get(r.circle)?;
        c.nodes
            .binary_search_by_key(&r.grasp, |n| n.grasp)
            .ok()
            .map(|i| &c.nodes[i])
    }

    /// Every edge, listed once. Quadratic in the circle sizes; meant for small
    /// graphs and debugging dumps.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for (ci, c) in self.circles.iter().enumerate() {
            if Self::allows_transit(c) {
                for (i, a) in c.nodes.iter().enumerate() {
                    for b in &c.nodes[i + 1..] {
                        out.push(Edge {
                            a: NodeRef { circle: ci, grasp: a.grasp },
                            b: NodeRef { circle: ci, grasp: b.grasp },
                            kind: EdgeKind::Transit,
                        });
                    }
                }
            }
        }
        for (grasp, circles) in self.circles_by_grasp() {
            for (i, &a) in circles.iter().enumerate() {
                for &b in &circles[i + 1..] {
                    out.push(Edge {
                        a: NodeRef { circle: a, grasp },
                        b: NodeRef { circle: b, grasp },
                        kind: EdgeKind::Transfer,
                    });
                }
            }
        }
        out
    }

    fn circles_by_grasp(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut m: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (ci, c) in self.circles.iter().enumerate() {
            for n in &c.nodes {
                m.entry(n.grasp).or_default().push(ci);
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Keyframe {
    pub circle: usize,
    pub layer: Layer,
    pub object_pose: Pose,
    pub grasp_id: usize,
    pub config: JointConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct KeyframePlan {
    pub keyframes: Vec<Keyframe>,
    /// `segments[i]` joins `keyframes[i]` and `keyframes[i + 1]`.
    pub segments: Vec<EdgeKind>,
    pub cost: f64,
}

impl KeyframePlan {
    /// Whether each segment keeps what its type says it keeps: the grasp for
    /// a transfer, the circle for a transit.
    pub fn is_consistent(&self) -> bool {
        self.segments.len() + 1 == self.keyframes.len()
            && self.keyframes.windows(2).zip(&self.segments).all(|(w, k)| match k {
                EdgeKind::Transfer => w[0].grasp_id == w[1].grasp_id && w[0].circle != w[1].circle,
                EdgeKind::Transit => w[0].circle == w[1].circle && w[0].grasp_id != w[1].grasp_id,
            })
    }

    pub fn transfer_count(&self) -> usize {
        self.segments.iter().filter(|k| **k == EdgeKind::Transfer).count()
    }
}

/// Cheapest path from any top node to any bottom node. Ties go to the lower
/// (circle, grasp) pair.
pub fn search_keyframes(graph: &GraspGraph, cfg: &GraphConfig) -> Result<KeyframePlan, PlanError> {
    if cfg.transfer_cost < 0.0 || cfg.transit_cost < 0.0 {
        return Err(PlanError::BadSpec("edge costs must be non-negative"));
    }
    // Real vertices in (circle, grasp) order, then circle hubs, then grasp hubs.
    let mut offset = Vec::with_capacity(graph.circles.len());
    let mut refs = Vec::new();
    for (ci, c) in graph.circles.iter().enumerate() {
        offset.push(refs.len());
        refs.extend(c.nodes.iter().map(|n| NodeRef { circle: ci, grasp: n.grasp }));
    }
    let n_real = refs.len();
    let n_circ = graph.circles.len();
    let by_grasp = graph.circles_by_grasp();
    let grasp_hub: BTreeMap<usize, usize> = by_grasp
        .keys()
        .enumerate()
        .map(|(i, &g)| (g, n_real + n_circ + i))
        .collect();
    let hub_grasps: Vec<usize> = by_grasp.keys().copied().collect();
    let total = n_real + n_circ + grasp_hub.len();
    let index_of = |r: NodeRef| {
        let c = &graph.circles[r.circle];
        offset[r.circle] + c.nodes.binary_search_by_key(&r.grasp, |n| n.grasp).expect("node exists")
    };

    let mut dist = vec![f64::INFINITY; total];
    let mut prev = vec![usize::MAX; total];
    let mut heap = BinaryHeap::new();
    for (ci, c) in graph.circles.iter().enumerate() {
        if c.layer == Layer::Top {
            for k in 0..c.nodes.len() {
                let v = offset[ci] + k;
                dist[v] = 0.0;
                heap.push(Reverse((OrdF64(0.0), v)));
            }
        }
    }

    let mut best_goal: Option<usize> = None;
    while let Some(Reverse((OrdF64(d), v))) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        if let Some(g) = best_goal {
            if d > dist[g] {
                break;
            }
        }
        let mut relax = |u: usize, w: f64, heap: &mut BinaryHeap<_>| {
            let nd = d + w;
            if nd < dist[u] {
                dist[u] = nd;
                prev[u] = v;
                heap.push(Reverse((OrdF64(nd), u)));
            }
        };
        if v < n_real {
            let r = refs[v];
            let c = &graph.circles[r.circle];
            if c.layer == Layer::Bottom {
                if best_goal.is_none_or(|g| (dist[v], v) < (dist[g], g)) {
                    best_goal = Some(v);
                }
                continue;
            }
            if GraspGraph::allows_transit(c) {
                relax(n_real + r.circle, cfg.transit_cost, &mut heap);
            }
            relax(grasp_hub[&r.grasp], cfg.transfer_cost, &mut heap);
        } else if v < n_real + n_circ {
            let ci = v - n_real;
            for k in 0..graph.circles[ci].nodes.len() {
                relax(offset[ci] + k, 0.0, &mut heap);
            }
        } else {
            let g = hub_grasps[v - n_real - n_circ];
            for &ci in &by_grasp[&g] {
                relax(index_of(NodeRef { circle: ci, grasp: g }), 0.0, &mut heap);
            }
        }
    }

    let Some(goal) = best_goal else {
        return Err(PlanError::NoPath(diagnostics(graph, &dist[..n_real], &refs)));
    };
    let mut chain = vec![goal];
    let mut kinds = Vec::new();
    let mut v = goal;
    while prev[v] != usize::MAX {
        let hub = prev[v];
        let from = prev[hub];
        kinds.push(if hub < n_real + n_circ { EdgeKind::Transit } else { EdgeKind::Transfer });
        chain.push(from);
        v = from;
    }
    chain.reverse();
    kinds.reverse();
    let keyframes = chain
        .iter()
        .map(|&i| {
            let r = refs[i];
            let c = &graph.circles[r.circle];
            Keyframe {
                circle: r.circle,
                layer: c.layer,
                object_pose: c.object_pose,
                grasp_id: r.grasp,
                config: graph.node(r).expect("node exists").config,
            }
        })
        .collect();
    Ok(KeyframePlan {
        keyframes,
        segments: kinds,
        cost: dist[goal],
    })
}

fn diagnostics(graph: &GraspGraph, dist: &[f64], refs: &[NodeRef]) -> String {
    let mut parts = Vec::new();
    for layer in [Layer::Top, Layer::Middle, Layer::Bottom] {
        let circles = graph.circles.iter().filter(|c| c.layer == layer).count();
        let nodes = graph.layer_node_count(layer);
        let reached = refs
            .iter()
            .zip(dist)
            .filter(|(r, d)| graph.circles[r.circle].layer == layer && d.is_finite())
            .count();
        parts.push(format!("{layer:?}: {circles} circles, {nodes} nodes, {reached} reachable"));
    }
    parts.join("; ")
}

#[derive(Debug, Clone, Copy)]
struct OrdF64(f64);

impl PartialEq for OrdF64 {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o).is_eq()
    }
}

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

/// Where the object sits in a circle and what else is in the way.
pub struct CircleSpec {
    pub layer: Layer,
    pub pose: Pose,
    pub placement: Option<(usize, f64)>,
    pub resting: bool,
    /// Restricts the circle to these grasp ids.
    pub allowed: Option<BTreeSet<usize>>,
}

/// Shared context for filling circles with reachable grasps.
pub struct GraphWorld<'a> {
    pub robot: &'a RobotModel,
    pub table: &'a TableModel,
    /// Hull of the object being moved, in its own frame.
    pub body: &'a ConvexBody,
    pub obstacles: &'a [Obstacle],
}

impl GraphWorld<'_> {
    /// Grasps of `free` that clear the scene, are reachable, and leave the arm
    /// itself clear of the table, the obstacles and the object.
    pub fn populate(&self, free: &GraspSet, spec: &CircleSpec) -> Result<Circle, PlanError> {
        let base = match &spec.allowed {
            Some(ids) => GraspSet {
                tag: free.tag,
                grasps: free.grasps.iter().filter(|g| ids.contains(&g.id)).copied().collect(),
            },
            None => free.clone(),
        };
        let blocked = self
            .obstacles
            .iter()
            .any(|o| signed_body_distance(self.body, &spec.pose, &o.body, &o.pose) < -CONTACT_TOL);
        if blocked {
            // The part itself would overlap something here.
            return Ok(Circle {
                layer: spec.layer,
                object_pose: spec.pose,
                placement: spec.placement,
                resting: spec.resting,
                nodes: Vec::new(),
            });
        }
        let placed = transform_grasps(&base, &spec.pose, FrameTag::SurfaceRaw)?;
        let clear = collision_filter(&placed, self.robot, self.obstacles, Some(self.table));
        let mut world: Vec<Obstacle> = self.obstacles.to_vec();
        world.push(Obstacle {
            body: ConvexBody::table_slab(self.table),
            pose: Pose::identity(),
        });
        world.push(Obstacle {
            body: self.body.clone(),
            pose: spec.pose,
        });
        let nodes: Vec<Option<GraphNode>> = clear
            .grasps
            .par_iter()
            .map(|g| {
                let palm = g.palm_pose();
                let q = self.robot.solve_ik_default(&palm)?;
                // Keyframes are where parts are set down, so polish the coarse
                // solution; keep it if Newton steps leave the limits.
                let q = self.robot.refine_ik(&palm, &q, NODE_IK_TOL).unwrap_or(q);
                if capsules_hit(&self.robot.arm_capsules(&q), &world, 0.0) {
                    return None;
                }
                Some(GraphNode { grasp: g.id, config: q })
            })
            .collect();
        let mut nodes: Vec<GraphNode> = nodes.into_iter().flatten().collect();
        nodes.sort_by_key(|n| n.grasp);
        Ok(Circle {
            layer: spec.layer,
            object_pose: spec.pose,
            placement: spec.placement,
            resting: spec.resting,
            nodes,
        })
    }
}

/// Object pose at the initial circle, the goal circle and the grasps allowed
/// there.
pub struct GraphEnds {
    pub init: Pose,
    pub goal: Pose,
    pub goal_resting: bool,
    pub goal_allowed: Option<BTreeSet<usize>>,
}

/// Builds the three layers. Middle circles put every placement at
/// `yaw_samples` evenly spaced yaws, at the initial x and y.
pub fn build_grasp_graph(
    world: &GraphWorld<'_>,
    free: &GraspSet,
    placements: &[StablePlacement],
    ends: &GraphEnds,
    cfg: &GraphConfig,
) -> Result<GraspGraph, PlanError> {
    if free.is_empty() {
        return Err(PlanError::BadGraph("no free-space grasps"));
    }
    let mut specs = vec![CircleSpec {
        layer: Layer::Top,
        pose: ends.init,
        placement: None,
        resting: true,
        allowed: None,
    }];
    let (x, y) = (ends.init.position.x, ends.init.position.y);
    let n = cfg.yaw_samples;
    for (pi, p) in placements.iter().enumerate() {
        for k in 0..n {
            let yaw = std::f64::consts::TAU * k as f64 / n as f64;
            specs.push(CircleSpec {
                layer: Layer::Middle,
                pose: resting_pose(p, world.table, x, y, yaw),
                placement: Some((pi, yaw)),
                resting: true,
                allowed: None,
            });
        }
    }
    specs.push(CircleSpec {
        layer: Layer::Bottom,
        pose: ends.goal,
        placement: None,
        resting: ends.goal_resting,
        allowed: ends.goal_allowed.clone(),
    });
    let circles = specs
        .par_iter()
        .map(|s| world.populate(free, s))
        .collect::<Result<Vec<_>, _>>()?;
    GraspGraph::from_circles(circles, free)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grasp::Grasp;
    use crate::se3::{Rotation, Vec3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn free(n: usize) -> GraspSet {
        let grasps = (0..n)
            .map(|id| Grasp {
                id,
                p0: Vec3::new(-0.01, 0.0, 0.0),
                p1: Vec3::new(0.01, 0.0, 0.0),
                rotation: Rotation::identity(),
            })
            .collect();
        GraspSet::new(FrameTag::Free, grasps).unwrap()
    }

    fn circle(layer: Layer, ids: &[usize]) -> Circle {
        Circle {
            layer,
            object_pose: Pose::identity(),
            placement: None,
            resting: layer != Layer::Bottom,
            nodes: ids.iter().map(|&grasp| GraphNode { grasp, config: [0.0; 6] }).collect(),
        }
    }

    #[test]
    fn direct_transfer_is_two_keyframes() {
        let g = GraspGraph::from_circles(
            vec![circle(Layer::Top, &[0, 1, 2]), circle(Layer::Middle, &[1]), circle(Layer::Bottom, &[2, 3])],
            &free(4),
        )
        .unwrap();
        let plan = search_keyframes(&g, &GraphConfig::default()).unwrap();
        assert_eq!(plan.keyframes.len(), 2);
        assert_eq!(plan.segments, vec![EdgeKind::Transfer]);
        assert_eq!(plan.keyframes[0].grasp_id, 2);
        assert_eq!(plan.cost, 1.0);
        assert!(plan.is_consistent());
    }

    #[test]
    fn regrasp_goes_through_a_middle_circle() {
        // Top holds 0, bottom wants 3; only the middle circle swaps 1 for 3.
        let g = GraspGraph::from_circles(
            vec![
                circle(Layer::Top, &[0, 1]),
                circle(Layer::Middle, &[1, 3]),
                circle(Layer::Bottom, &[3]),
            ],
            &free(4),
        )
        .unwrap();
        let plan = search_keyframes(&g, &GraphConfig::default()).unwrap();
        let kinds = &plan.segments;
        assert_eq!(kinds, &vec![EdgeKind::Transfer, EdgeKind::Transit, EdgeKind::Transfer]);
        assert_eq!(plan.keyframes[1].layer, Layer::Middle);
        assert_eq!(plan.cost, 3.0);
        assert!(plan.is_consistent());
    }

    #[test]
    fn empty_bottom_reports_layers() {
        let g = GraspGraph::from_circles(
            vec![circle(Layer::Top, &[0]), circle(Layer::Middle, &[0]), circle(Layer::Bottom, &[])],
            &free(1),
        )
        .unwrap();
        match search_keyframes(&g, &GraphConfig::default()) {
            Err(PlanError::NoPath(msg)) => {
                assert!(msg.contains("Bottom: 1 circles, 0 nodes"), "{msg}");
                assert!(msg.contains("Middle: 1 circles, 1 nodes, 1 reachable"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bottom_circle_has_no_transit() {
        // Reaching grasp 1 in the bottom circle would need a regrasp there.
        let g = GraspGraph::from_circles(
            vec![circle(Layer::Top, &[0]), circle(Layer::Bottom, &[0, 1])],
            &free(2),
        )
        .unwrap();
        assert!(g.edges().iter().all(|e| e.kind == EdgeKind::Transfer));
        let plan = search_keyframes(&g, &GraphConfig::default()).unwrap();
        assert_eq!(plan.keyframes.last().unwrap().grasp_id, 0);
    }

    #[test]
    fn unknown_grasp_ids_are_rejected() {
        let r = GraspGraph::from_circles(vec![circle(Layer::Top, &[5])], &free(2));
        assert!(matches!(r, Err(PlanError::BadGraph(_))));
    }

    #[test]
    fn search_is_deterministic_under_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut circles = vec![circle(Layer::Top, &[0, 1, 2, 3, 4, 5])];
        for _ in 0..6 {
            let ids: Vec<usize> = (0..12).filter(|_| rng.random_bool(0.4)).collect();
            circles.push(circle(Layer::Middle, &ids));
        }
        circles.push(circle(Layer::Bottom, &[7, 9, 11]));
        let g = GraspGraph::from_circles(circles, &free(12)).unwrap();
        let a = search_keyframes(&g, &GraphConfig::default());
        let b = search_keyframes(&g, &GraphConfig::default());
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}
