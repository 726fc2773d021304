use std::collections::HashMap;
use std::fmt;

use super::Mesh;

/// One manifoldness defect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Finding {
    /// An edge with three or more incident faces.
    NonManifoldEdge { edge: [usize; 2], faces: usize },
    /// Two faces traverse the edge in the same direction.
    InconsistentOrientation { edge: [usize; 2], faces: [usize; 2] },
    IsolatedVertex(usize),
    /// Two faces over the same vertex set.
    DuplicateFace { first: usize, second: usize },
    /// The faces around a vertex form more than one fan.
    NonManifoldVertex { vertex: usize, fans: usize },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::NonManifoldEdge { edge, faces } => {
                write!(f, "non-manifold edge {}-{} with {faces} incident faces", edge[0], edge[1])
            }
            Finding::InconsistentOrientation { edge, faces } => write!(
                f,
                "inconsistent orientation on edge {}-{} (faces {} and {})",
                edge[0], edge[1], faces[0], faces[1]
            ),
            Finding::IsolatedVertex(v) => write!(f, "isolated vertex {v}"),
            Finding::DuplicateFace { first, second } => {
                write!(f, "face {second} duplicates face {first}")
            }
            Finding::NonManifoldVertex { vertex, fans } => {
                write!(f, "non-manifold vertex {vertex} joins {fans} separate fans")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.findings.is_empty() {
            return writeln!(f, "ok");
        }
        for finding in &self.findings {
            writeln!(f, "{finding}")?;
        }
        Ok(())
    }
}

/// Lists every manifoldness defect; an empty report means [`super::build_edge_topology`]
/// accepts the mesh. Self-intersections are not checked.
pub fn validate_manifold(mesh: &Mesh) -> ValidationReport {
    let mut findings = Vec::new();

    // Undirected edge -> incident (face, runs low-to-high), keyed in first-appearance order.
    let mut order: Vec<(usize, usize)> = Vec::new();
    let mut incident: HashMap<(usize, usize), Vec<(usize, bool)>> = HashMap::new();
    for (fi, face) in mesh.faces().iter().enumerate() {
        for k in 0..3 {
            let (u, v) = (face[k], face[(k + 1) % 3]);
            let key = (u.min(v), u.max(v));
            incident
                .entry(key)
                .or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                })
                .push((fi, u < v));
        }
    }

    for key in &order {
        let inc = &incident[key];
        let edge = [key.0, key.1];
        if inc.len() > 2 {
            findings.push(Finding::NonManifoldEdge {
                edge,
                faces: inc.len(),
            });
        } else if inc.len() == 2 && inc[0].1 == inc[1].1 {
            findings.push(Finding::InconsistentOrientation {
                edge,
                faces: [inc[0].0, inc[1].0],
            });
        }
    }

    let mut seen_faces: HashMap<[usize; 3], usize> = HashMap::new();
    for (fi, face) in mesh.faces().iter().enumerate() {
        let mut key = *face;
        key.sort_unstable();
        if let Some(&first) = seen_faces.get(&key) {
            findings.push(Finding::DuplicateFace { first, second: fi });
        } else {
            seen_faces.insert(key, fi);
        }
    }

    let mut vertex_faces = vec![Vec::new(); mesh.vertex_count()];
    for (fi, face) in mesh.faces().iter().enumerate() {
        for &v in face {
            vertex_faces[v].push(fi);
        }
    }
    for (v, faces) in vertex_faces.iter().enumerate() {
        if faces.is_empty() {
            findings.push(Finding::IsolatedVertex(v));
            continue;
        }
        let fans = count_fans(mesh, v, faces, &incident);
        if fans > 1 {
            findings.push(Finding::NonManifoldVertex { vertex: v, fans });
        }
    }

    ValidationReport { findings }
}

/// Connected components of the faces around `v`, linked through manifold edges at `v`.
fn count_fans(
    mesh: &Mesh,
    v: usize,
    faces: &[usize],
    incident: &HashMap<(usize, usize), Vec<(usize, bool)>>,
) -> usize {
    let local = |f: usize| faces.iter().position(|&g| g == f);
    let mut parent: Vec<usize> = (0..faces.len()).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for &f in faces {
        for &w in &mesh.faces()[f] {
            if w == v {
                continue;
            }
            let inc = &incident[&(v.min(w), v.max(w))];
            if inc.len() != 2 {
                continue;
            }
            if let (Some(a), Some(b)) = (local(inc[0].0), local(inc[1].0)) {
                let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }
    (0..faces.len()).filter(|&i| root(&mut parent, i) == i).count()
}
