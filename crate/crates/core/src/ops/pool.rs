use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::queue::ScoreQueue;
use super::sparse::{combine, SparseMap};
use super::OpsError;
use crate::mesh::{EdgeTopology, Point};
use crate::tensor::Tensor;

/// How collapse candidates are ranked.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolPolicy {
    /// Survivor scores are recomputed after every collapse.
    #[default]
    Enhanced,
    /// Scores are frozen at entry; the initial ranking is walked once.
    Legacy,
}

impl PoolPolicy {
    pub fn name(self) -> &'static str {
        match self {
            Self::Enhanced => "enhanced",
            Self::Legacy => "legacy",
        }
    }
}

impl fmt::Display for PoolPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PoolPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "enhanced" => Ok(Self::Enhanced),
            "legacy" => Ok(Self::Legacy),
            other => Err(format!("unknown pool policy `{other}` (expected enhanced or legacy)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollapseViolation {
    Removed,
    Boundary,
    IncidentBoundary,
    /// The endpoints share this many neighbors instead of exactly two.
    LinkCondition { common: usize },
    /// Both wing triangles over the opposite vertices exist; the collapse would fold the surface.
    Tetrahedron,
}

impl fmt::Display for CollapseViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Removed => f.write_str("edge was already removed"),
            Self::Boundary => f.write_str("edge lies on the boundary"),
            Self::IncidentBoundary => f.write_str("an edge at one of its endpoints lies on the boundary"),
            Self::LinkCondition { common } => {
                write!(f, "endpoints share {common} neighbors, link condition needs exactly 2")
            }
            Self::Tetrahedron => f.write_str("collapse would fold a tetrahedral cap"),
        }
    }
}

/// One collapse, in the edge and vertex numbering of the pooling stage's input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollapseRecord {
    pub collapsed_edge: usize,
    /// `[a, c]`
    pub surviving_edges: [usize; 2],
    /// `[e, b, d]`
    pub removed_edges: [usize; 3],
    /// `[[a, b, e], [c, d, e]]`
    pub source_sets: [[usize; 3]; 2],
    pub kept_vertex: usize,
    pub removed_vertex: usize,
}

/// Journal of one pooling stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolHistory {
    pub records: Vec<CollapseRecord>,
    pub initial_edge_count: usize,
    pub final_edge_count: usize,
    pub initial_vertex_count: usize,
    /// Input edge id of every output row, ascending.
    pub kept_edges: Vec<usize>,
    /// Input vertex id of every output vertex, ascending.
    pub kept_vertices: Vec<usize>,
}

impl PoolHistory {
    /// Parses JSON and checks that the journal replays cleanly.
    pub fn from_json(bytes: &[u8]) -> Result<Self, OpsError> {
        let h: Self = serde_json::from_slice(bytes).map_err(|e| OpsError::History(e.to_string()))?;
        h.check()?;
        Ok(h)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("history serializes")
    }

    /// Verifies counts, index ranges and that every record only touches live elements.
    pub fn check(&self) -> Result<(), OpsError> {
        let bad = |m: String| Err(OpsError::History(m));
        let expected_final = self.initial_edge_count.checked_sub(3 * self.records.len());
        if expected_final != Some(self.final_edge_count) {
            return bad(format!(
                "{} edges minus 3 per {} collapses is not {}",
                self.initial_edge_count,
                self.records.len(),
                self.final_edge_count
            ));
        }
        let mut edge_alive = vec![true; self.initial_edge_count];
        let mut vertex_alive = vec![true; self.initial_vertex_count];
        for (i, r) in self.records.iter().enumerate() {
            let [e, b, d] = r.removed_edges;
            let [a, c] = r.surviving_edges;
            if r.collapsed_edge != e || r.source_sets != [[a, b, e], [c, d, e]] {
                return bad(format!("record {i} is not self-consistent"));
            }
            let touched = [e, b, d, a, c];
            if touched.iter().any(|&x| x >= self.initial_edge_count)
                || touched.iter().collect::<HashSet<_>>().len() != 5
                || touched.iter().any(|&x| !edge_alive[x])
            {
                return bad(format!("record {i} touches a missing or repeated edge"));
            }
            let (p, q) = (r.kept_vertex, r.removed_vertex);
            if p == q || p >= self.initial_vertex_count || q >= self.initial_vertex_count || !vertex_alive[p] || !vertex_alive[q] {
                return bad(format!("record {i} touches a missing vertex"));
            }
            for x in [e, b, d] {
                edge_alive[x] = false;
            }
            vertex_alive[q] = false;
        }
        let alive = |flags: &[bool]| flags.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i).collect::<Vec<_>>();
        if alive(&edge_alive) != self.kept_edges {
            return bad("kept edges do not match the replay".into());
        }
        if alive(&vertex_alive) != self.kept_vertices {
            return bad("kept vertices do not match the replay".into());
        }
        Ok(())
    }

    /// Output rows as averages of input rows (`final x initial`), the linear map behind pooling.
    pub fn averaging_map(&self) -> SparseMap {
        let third = 1.0 / 3.0;
        let mut w: Vec<Vec<(usize, f64)>> = (0..self.initial_edge_count).map(|i| vec![(i, 1.0)]).collect();
        for r in &self.records {
            let [[a, b, e], [c, d, _]] = r.source_sets;
            let na = combine(&[(&w[a], third), (&w[b], third), (&w[e], third)]);
            let nc = combine(&[(&w[c], third), (&w[d], third), (&w[e], third)]);
            w[a] = na;
            w[c] = nc;
        }
        let rows = self.kept_edges.iter().map(|&k| std::mem::take(&mut w[k])).collect();
        SparseMap::new(rows, self.initial_edge_count)
    }

    /// Fan-out from pooled rows back to every input edge (`initial x final`).
    ///
    /// Records replay newest first: `b` copies `a`, `d` copies `c`, and `e` takes the mean of
    /// `a` and `c`.
    pub fn unpool_map(&self) -> SparseMap {
        let mut u: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.initial_edge_count];
        for (i, &k) in self.kept_edges.iter().enumerate() {
            u[k] = vec![(i, 1.0)];
        }
        for r in self.records.iter().rev() {
            let [e, b, d] = r.removed_edges;
            let [a, c] = r.surviving_edges;
            u[b] = u[a].clone();
            u[d] = u[c].clone();
            u[e] = combine(&[(&u[a], 0.5), (&u[c], 0.5)]);
        }
        SparseMap::new(u, self.final_edge_count)
    }

    /// Vertex positions after the stage, each collapse placing the kept vertex at the midpoint.
    pub fn apply_to_positions(&self, positions: &[Point]) -> Result<Vec<Point>, OpsError> {
        if positions.len() != self.initial_vertex_count {
            return Err(OpsError::RowMismatch {
                expected: self.initial_vertex_count,
                got: positions.len(),
            });
        }
        let mut pos = positions.to_vec();
        for r in &self.records {
            pos[r.kept_vertex] = nalgebra::center(&pos[r.kept_vertex], &pos[r.removed_vertex]);
        }
        Ok(self.kept_vertices.iter().map(|&v| pos[v]).collect())
    }

    /// For every input edge, the 1-based collapse step that removed it; survivors get
    /// `records.len() + 1`.
    pub fn removal_steps(&self) -> Vec<usize> {
        let mut steps = vec![self.records.len() + 1; self.initial_edge_count];
        for (i, r) in self.records.iter().enumerate() {
            for x in r.removed_edges {
                steps[x] = i + 1;
            }
        }
        steps
    }
}

#[derive(Debug, Clone)]
pub struct PoolOutput {
    pub features: Tensor,
    pub topology: EdgeTopology,
    pub history: PoolHistory,
}

struct Plan {
    e: usize,
    p: usize,
    q: usize,
    r: usize,
    s: usize,
    f1: usize,
    f2: usize,
    a: usize,
    b: usize,
    c: usize,
    d: usize,
}

/// Mutable connectivity keyed by the input ids; dead elements are flagged, never renumbered.
#[derive(Debug, Clone)]
struct Working {
    faces: Vec<[usize; 3]>,
    face_edges: Vec<[usize; 3]>,
    face_alive: Vec<bool>,
    edges: Vec<[usize; 2]>,
    edge_faces: Vec<[Option<usize>; 2]>,
    edge_alive: Vec<bool>,
    vertex_edges: Vec<Vec<usize>>,
    vertex_alive: Vec<bool>,
    live_edges: usize,
}

impl Working {
    fn new(t: &EdgeTopology) -> Self {
        let ne = t.edge_count();
        Self {
            faces: t.faces().to_vec(),
            face_edges: t.face_edges().to_vec(),
            face_alive: vec![true; t.face_count()],
            edges: t.edges().to_vec(),
            edge_faces: (0..ne).map(|e| t.face_slots(e)).collect(),
            edge_alive: vec![true; ne],
            vertex_edges: (0..t.vertex_count()).map(|v| t.vertex_edges(v).to_vec()).collect(),
            vertex_alive: vec![true; t.vertex_count()],
            live_edges: ne,
        }
    }

    fn other_end(&self, e: usize, v: usize) -> usize {
        let [x, y] = self.edges[e];
        if x == v {
            y
        } else {
            x
        }
    }

    /// Face containing the directed step `u -> v`, with the position of `u` in it.
    fn directed(&self, e: usize, u: usize, v: usize) -> Option<(usize, usize)> {
        self.edge_faces[e].iter().flatten().find_map(|&f| {
            let face = self.faces[f];
            (0..3).find(|&k| face[k] == u && face[(k + 1) % 3] == v).map(|k| (f, k))
        })
    }

    fn plan(&self, e: usize) -> Result<Plan, CollapseViolation> {
        if !self.edge_alive[e] {
            return Err(CollapseViolation::Removed);
        }
        let [p, q] = self.edges[e];
        let (Some((f1, k1)), Some((f2, k2))) = (self.directed(e, p, q), self.directed(e, q, p)) else {
            return Err(CollapseViolation::Boundary);
        };
        let interior = |v: usize| self.vertex_edges[v].iter().all(|&x| self.edge_faces[x].iter().all(Option::is_some));
        if !interior(p) || !interior(q) {
            return Err(CollapseViolation::IncidentBoundary);
        }
        let around = |v: usize| -> HashSet<usize> { self.vertex_edges[v].iter().map(|&x| self.other_end(x, v)).collect() };
        let common = around(p).intersection(&around(q)).count();
        if common != 2 {
            return Err(CollapseViolation::LinkCondition { common });
        }
        let (r, s) = (self.faces[f1][(k1 + 2) % 3], self.faces[f2][(k2 + 2) % 3]);
        if let Some(&rs) = self.vertex_edges[r].iter().find(|&&x| self.other_end(x, r) == s) {
            let holds = |v: usize| self.edge_faces[rs].iter().flatten().any(|&f| self.faces[f].contains(&v));
            if holds(p) && holds(q) {
                return Err(CollapseViolation::Tetrahedron);
            }
        }
        Ok(Plan {
            e,
            p,
            q,
            r,
            s,
            f1,
            f2,
            a: self.face_edges[f1][(k1 + 1) % 3],
            b: self.face_edges[f1][(k1 + 2) % 3],
            c: self.face_edges[f2][(k2 + 1) % 3],
            d: self.face_edges[f2][(k2 + 2) % 3],
        })
    }

    fn other_face(&self, e: usize, f: usize) -> usize {
        self.edge_faces[e]
            .iter()
            .flatten()
            .copied()
            .find(|&g| g != f)
            .expect("collapse plans only touch interior edges")
    }

    fn apply(&mut self, plan: &Plan) {
        let Plan {
            e,
            p,
            q,
            r,
            s,
            f1,
            f2,
            a,
            b,
            c,
            d,
        } = *plan;
        let fb = self.other_face(b, f1);
        let fd = self.other_face(d, f2);
        let q_faces: HashSet<usize> = self.vertex_edges[q]
            .iter()
            .flat_map(|&x| self.edge_faces[x].iter().flatten().copied())
            .filter(|&f| f != f1 && f != f2)
            .collect();

        for (face, old, new) in [(fb, b, a), (fd, d, c)] {
            for slot in self.face_edges[face].iter_mut() {
                if *slot == old {
                    *slot = new;
                }
            }
        }
        for (edge, old, new) in [(a, f1, fb), (c, f2, fd)] {
            for slot in self.edge_faces[edge].iter_mut() {
                if *slot == Some(old) {
                    *slot = Some(new);
                }
            }
        }
        for f in q_faces {
            for v in self.faces[f].iter_mut() {
                if *v == q {
                    *v = p;
                }
            }
        }

        let moved: Vec<usize> = std::mem::take(&mut self.vertex_edges[q])
            .into_iter()
            .filter(|&x| x != e && x != d)
            .collect();
        for &x in &moved {
            let o = self.other_end(x, q);
            self.edges[x] = [p.min(o), p.max(o)];
        }
        self.vertex_edges[p].retain(|&x| x != e && x != b);
        self.vertex_edges[p].extend(moved);
        self.vertex_edges[r].retain(|&x| x != b);
        self.vertex_edges[s].retain(|&x| x != d);

        self.vertex_alive[q] = false;
        self.face_alive[f1] = false;
        self.face_alive[f2] = false;
        for x in [e, b, d] {
            self.edge_alive[x] = false;
            self.edge_faces[x] = [None; 2];
        }
        self.live_edges -= 3;
    }

    /// Renumbers live elements in ascending order of their input ids.
    fn compact(&self) -> (EdgeTopology, Vec<usize>, Vec<usize>) {
        let alive = |flags: &[bool]| flags.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i).collect::<Vec<_>>();
        let kept_vertices = alive(&self.vertex_alive);
        let kept_edges = alive(&self.edge_alive);
        let mut vmap = vec![usize::MAX; self.vertex_alive.len()];
        for (i, &v) in kept_vertices.iter().enumerate() {
            vmap[v] = i;
        }
        let mut emap = vec![usize::MAX; self.edge_alive.len()];
        for (i, &x) in kept_edges.iter().enumerate() {
            emap[x] = i;
        }
        let live_faces = alive(&self.face_alive);
        let faces = live_faces.iter().map(|&f| self.faces[f].map(|v| vmap[v])).collect();
        let face_edges = live_faces.iter().map(|&f| self.face_edges[f].map(|x| emap[x])).collect();
        let topology = EdgeTopology::from_faces(kept_vertices.len(), faces, face_edges, kept_edges.len());
        (topology, kept_edges, kept_vertices)
    }
}

fn norm(row: &[f64]) -> f64 {
    row.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Incremental edge-collapse pooling over one mesh.
///
/// Candidates come off a [`ScoreQueue`] keyed by the L2 norm of each edge's features. Under
/// [`PoolPolicy::Enhanced`] the two survivors of every collapse are re-queued with the norm of
/// their averaged features; other edges keep their scores.
#[derive(Debug, Clone)]
pub struct Pooler {
    work: Working,
    features: Tensor,
    queue: ScoreQueue,
    policy: PoolPolicy,
    records: Vec<CollapseRecord>,
}

impl Pooler {
    pub fn new(features: &Tensor, topology: &EdgeTopology, policy: PoolPolicy) -> Result<Self, OpsError> {
        if features.rows() != topology.edge_count() {
            return Err(OpsError::RowMismatch {
                expected: topology.edge_count(),
                got: features.rows(),
            });
        }
        Ok(Self {
            work: Working::new(topology),
            queue: ScoreQueue::from_scores(&features.row_norms()),
            features: features.clone(),
            policy,
            records: Vec::new(),
        })
    }

    pub fn policy(&self) -> PoolPolicy {
        self.policy
    }

    /// Live edge count.
    pub fn edge_count(&self) -> usize {
        self.work.live_edges
    }

    pub fn is_alive(&self, edge: usize) -> bool {
        self.work.edge_alive[edge]
    }

    /// Queued score of `edge`, if it is still a candidate.
    pub fn current_score(&self, edge: usize) -> Option<f64> {
        self.queue.score(edge)
    }

    pub fn features_of(&self, edge: usize) -> &[f64] {
        self.features.row(edge)
    }

    pub fn records(&self) -> &[CollapseRecord] {
        &self.records
    }

    pub fn check(&self, edge: usize) -> Result<(), CollapseViolation> {
        self.work.plan(edge).map(|_| ())
    }

    /// Collapses `edge` regardless of its queue position.
    pub fn collapse(&mut self, edge: usize) -> Result<&CollapseRecord, OpsError> {
        let plan = self
            .work
            .plan(edge)
            .map_err(|violation| OpsError::IllegalCollapse { edge, violation })?;
        let Plan { e, p, q, a, b, c, d, .. } = plan;
        let ch = self.features.cols();
        for k in 0..ch {
            let fe = self.features.get(e, k);
            let na = (self.features.get(a, k) + self.features.get(b, k) + fe) / 3.0;
            let nc = (self.features.get(c, k) + self.features.get(d, k) + fe) / 3.0;
            self.features.set(a, k, na);
            self.features.set(c, k, nc);
        }
        self.work.apply(&plan);
        for x in [e, b, d] {
            self.queue.invalidate(x);
        }
        if self.policy == PoolPolicy::Enhanced {
            self.queue.push(a, norm(self.features.row(a)));
            self.queue.push(c, norm(self.features.row(c)));
        }
        self.records.push(CollapseRecord {
            collapsed_edge: e,
            surviving_edges: [a, c],
            removed_edges: [e, b, d],
            source_sets: [[a, b, e], [c, d, e]],
            kept_vertex: p,
            removed_vertex: q,
        });
        Ok(self.records.last().expect("just pushed"))
    }

    /// Collapses the lowest-scoring legal candidate. Illegal candidates are dropped from the
    /// queue. `None` once the queue is empty.
    pub fn step(&mut self) -> Option<&CollapseRecord> {
        while let Some((edge, _)) = self.queue.pop() {
            if self.work.plan(edge).is_ok() {
                return Some(self.collapse(edge).expect("plan was checked"));
            }
        }
        None
    }

    /// Current connectivity, renumbered as [`Pooler::finish`] would.
    pub fn snapshot_topology(&self) -> EdgeTopology {
        self.work.compact().0
    }

    pub fn finish(self) -> PoolOutput {
        let (topology, kept_edges, kept_vertices) = self.work.compact();
        let features = Tensor::from_vec(
            kept_edges.len(),
            self.features.cols(),
            kept_edges.iter().flat_map(|&e| self.features.row(e).iter().copied()).collect(),
        );
        let history = PoolHistory {
            initial_edge_count: self.work.edge_alive.len(),
            final_edge_count: kept_edges.len(),
            initial_vertex_count: self.work.vertex_alive.len(),
            records: self.records,
            kept_edges,
            kept_vertices,
        };
        PoolOutput {
            features,
            topology,
            history,
        }
    }
}

/// Collapses until at most `target_edges` remain.
pub fn pool_with_policy(
    features: &Tensor,
    topology: &EdgeTopology,
    target_edges: usize,
    policy: PoolPolicy,
) -> Result<PoolOutput, OpsError> {
    let current = topology.edge_count();
    if target_edges >= current {
        return Err(OpsError::InvalidTarget {
            target: target_edges,
            current,
        });
    }
    let mut pooler = Pooler::new(features, topology, policy)?;
    while pooler.edge_count() > target_edges {
        if pooler.step().is_none() {
            return Err(OpsError::Unreachable {
                achieved: pooler.edge_count(),
                target: target_edges,
            });
        }
    }
    Ok(pooler.finish())
}

/// Pooling with per-collapse score updates.
pub fn pool(features: &Tensor, topology: &EdgeTopology, target_edges: usize) -> Result<PoolOutput, OpsError> {
    pool_with_policy(features, topology, target_edges, PoolPolicy::Enhanced)
}

/// Pooling with scores frozen at entry.
pub fn pool_batch_legacy(
    features: &Tensor,
    topology: &EdgeTopology,
    target_edges: usize,
) -> Result<PoolOutput, OpsError> {
    pool_with_policy(features, topology, target_edges, PoolPolicy::Legacy)
}

/// Spreads pooled features back over the pre-pool edges.
pub fn unpool(features: &Tensor, history: &PoolHistory) -> Result<Tensor, OpsError> {
    if features.rows() != history.final_edge_count {
        return Err(OpsError::RowMismatch {
            expected: history.final_edge_count,
            got: features.rows(),
        });
    }
    Ok(history.unpool_map().apply(features))
}
