use std::collections::HashMap;

use super::{validate_manifold, Mesh, MeshError};

/// Edge-centric connectivity of a manifold triangle mesh.
///
/// Edges are stored with the smaller vertex index first. For every edge the incident faces
/// live in two orientation slots: slot 0 holds the face in which the edge runs from its smaller
/// to its larger vertex, slot 1 the face in which it runs the other way. The ordered 1-ring
/// `(a, b, c, d)` takes `(a, b)` from the slot-0 face and `(c, d)` from the slot-1 face, each
/// pair in counter-clockwise order after the edge itself. Boundary edges leave one slot empty
/// and the matching neighbor pair `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTopology {
    vertex_count: usize,
    faces: Vec<[usize; 3]>,
    face_edges: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_faces: Vec<[Option<usize>; 2]>,
    neighbors: Vec<[Option<usize>; 4]>,
    vertex_edges: Vec<Vec<usize>>,
}

/// Builds the edge topology, enumerating edges in first-appearance order over the face list.
pub fn build_edge_topology(mesh: &Mesh) -> Result<EdgeTopology, MeshError> {
    let report = validate_manifold(mesh);
    if let Some(finding) = report.findings.into_iter().next() {
        return Err(MeshError::Topology(finding));
    }

    let mut ids: HashMap<(usize, usize), usize> = HashMap::with_capacity(mesh.face_count() * 3 / 2 + 3);
    let mut face_edges = Vec::with_capacity(mesh.face_count());
    for face in mesh.faces() {
        let mut fe = [0usize; 3];
        for (k, slot) in fe.iter_mut().enumerate() {
            let (u, v) = (face[k], face[(k + 1) % 3]);
            let key = (u.min(v), u.max(v));
            let next = ids.len();
            *slot = *ids.entry(key).or_insert(next);
        }
        face_edges.push(fe);
    }
    Ok(EdgeTopology::from_faces(
        mesh.vertex_count(),
        mesh.faces().to_vec(),
        face_edges,
        ids.len(),
    ))
}

impl EdgeTopology {
    /// Assembles the topology from a face list whose edges are already numbered.
    ///
    /// `face_edges[f][k]` is the id of the edge from `faces[f][k]` to `faces[f][(k + 1) % 3]`.
    /// Callers guarantee manifoldness and consistent orientation.
    pub(crate) fn from_faces(
        vertex_count: usize,
        faces: Vec<[usize; 3]>,
        face_edges: Vec<[usize; 3]>,
        edge_count: usize,
    ) -> Self {
        let mut edges = vec![[usize::MAX; 2]; edge_count];
        let mut edge_faces = vec![[None; 2]; edge_count];
        let mut neighbors = vec![[None; 4]; edge_count];
        for (f, (face, fe)) in faces.iter().zip(&face_edges).enumerate() {
            for k in 0..3 {
                let (u, v) = (face[k], face[(k + 1) % 3]);
                let e = fe[k];
                edges[e] = [u.min(v), u.max(v)];
                let slot = usize::from(u > v);
                debug_assert!(edge_faces[e][slot].is_none(), "edge {e} orientation reused");
                edge_faces[e][slot] = Some(f);
                neighbors[e][2 * slot] = Some(fe[(k + 1) % 3]);
                neighbors[e][2 * slot + 1] = Some(fe[(k + 2) % 3]);
            }
        }
        let mut vertex_edges = vec![Vec::new(); vertex_count];
        for (e, &[u, v]) in edges.iter().enumerate() {
            vertex_edges[u].push(e);
            vertex_edges[v].push(e);
        }
        Self {
            vertex_count,
            faces,
            face_edges,
            edges,
            edge_faces,
            neighbors,
            vertex_edges,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_edges(&self) -> &[[usize; 3]] {
        &self.face_edges
    }

    /// Incident faces in orientation-slot order (see the type docs).
    pub fn face_slots(&self, e: usize) -> [Option<usize>; 2] {
        self.edge_faces[e]
    }

    pub fn edge_faces(&self, e: usize) -> impl Iterator<Item = usize> + '_ {
        self.edge_faces[e].iter().flatten().copied()
    }

    /// The ordered 1-ring `(a, b, c, d)`.
    pub fn neighbors(&self, e: usize) -> [Option<usize>; 4] {
        self.neighbors[e]
    }

    /// Exchanges `(a, b)` with `(c, d)` for edge `e`, i.e. reads its ring from the other face
    /// first. Only the ring and slot order change; faces and geometry are untouched.
    pub fn swap_ring_sides(&mut self, e: usize) {
        let [a, b, c, d] = self.neighbors[e];
        self.neighbors[e] = [c, d, a, b];
        self.edge_faces[e].swap(0, 1);
    }

    pub fn is_boundary(&self, e: usize) -> bool {
        self.edge_faces[e].iter().any(Option::is_none)
    }

    pub fn vertex_edges(&self, v: usize) -> &[usize] {
        &self.vertex_edges[v]
    }

    /// Vertices sharing an edge with `v`.
    pub fn vertex_neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.vertex_edges[v].iter().map(move |&e| {
            let [a, b] = self.edges[e];
            if a == v {
                b
            } else {
                a
            }
        })
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{fixtures, Point};
    use std::collections::HashSet;

    fn check_invariants(t: &EdgeTopology) {
        for e in 0..t.edge_count() {
            let faces: Vec<_> = t.edge_faces(e).collect();
            let ring = t.neighbors(e);
            let valid: Vec<usize> = ring.iter().flatten().copied().collect();
            match faces.len() {
                2 => {
                    assert_eq!(valid.len(), 4);
                    let distinct: HashSet<_> = valid.iter().collect();
                    assert_eq!(distinct.len(), 4, "edge {e} ring {ring:?}");
                }
                1 => assert_eq!(valid.len(), 2),
                n => panic!("edge {e} has {n} faces"),
            }
            for f in valid {
                assert!(t.neighbors(f).contains(&Some(e)), "asymmetric {e} -> {f}");
            }
            // (a, b) share a face with e, as do (c, d).
            for (slot, pair) in [(0, [ring[0], ring[1]]), (1, [ring[2], ring[3]])] {
                if let Some(face) = t.face_slots(e)[slot] {
                    for n in pair {
                        assert!(t.face_edges()[face].contains(&n.unwrap()));
                    }
                }
            }
        }
    }

    #[test]
    fn single_triangle() {
        let t = build_edge_topology(&fixtures::single_triangle()).unwrap();
        assert_eq!(t.edge_count(), 3);
        assert_eq!(t.edges(), &[[0, 1], [1, 2], [0, 2]]);
        for e in 0..3 {
            assert_eq!(t.edge_faces(e).count(), 1);
            assert_eq!(t.neighbors(e).iter().filter(|n| n.is_none()).count(), 2);
        }
        check_invariants(&t);
    }

    #[test]
    fn two_triangles_sharing_an_edge() {
        let t = build_edge_topology(&fixtures::flat_pair()).unwrap();
        assert_eq!(t.edge_count(), 5);
        let shared = t.edges().iter().position(|&e| e == [0, 2]).unwrap();
        assert_eq!(t.neighbors(shared).iter().flatten().count(), 4);
        for e in (0..5).filter(|&e| e != shared) {
            assert_eq!(t.neighbors(e).iter().flatten().count(), 2);
        }
        check_invariants(&t);
    }

    #[test]
    fn tetrahedron_matches_brute_force_adjacency() {
        let mesh = fixtures::tetrahedron();
        let t = build_edge_topology(&mesh).unwrap();
        assert_eq!(t.edge_count(), 6);
        check_invariants(&t);
        // Brute force: two edges are ring neighbors iff they are distinct and lie in a common face.
        for e in 0..6 {
            let expected: HashSet<usize> = (0..6)
                .filter(|&f| {
                    f != e
                        && mesh.faces().iter().any(|face| {
                            let has = |[u, v]: [usize; 2]| face.contains(&u) && face.contains(&v);
                            has(t.edge(e)) && has(t.edge(f))
                        })
                })
                .collect();
            let got: HashSet<usize> = t.neighbors(e).iter().flatten().copied().collect();
            assert_eq!(got, expected, "edge {e}");
        }
        assert_eq!(t.euler_characteristic(), 2);
    }

    #[test]
    fn ring_order_is_counter_clockwise_within_faces() {
        let t = build_edge_topology(&fixtures::flat_pair()).unwrap();
        // 0 -> 2 runs through face (0, 2, 3), 2 -> 0 through face (0, 1, 2).
        let e = t.edges().iter().position(|&e| e == [0, 2]).unwrap();
        let [a, b, c, d] = t.neighbors(e).map(Option::unwrap);
        assert_eq!(t.edge(a), [2, 3]);
        assert_eq!(t.edge(b), [0, 3]);
        assert_eq!(t.edge(c), [0, 1]);
        assert_eq!(t.edge(d), [1, 2]);
    }

    #[test]
    fn rejects_non_manifold_and_misoriented() {
        let v = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(0.0, -1.0, 0.0),
            Point::new(0.0, 0.0, 1.0),
        ];
        let fan = Mesh::new(v.clone(), vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]).unwrap();
        assert!(matches!(build_edge_topology(&fan), Err(MeshError::Topology(_))));
        let flipped = Mesh::new(v[..4].to_vec(), vec![[0, 1, 2], [0, 1, 3]]).unwrap();
        assert!(matches!(build_edge_topology(&flipped), Err(MeshError::Topology(_))));
    }

    #[test]
    fn deterministic_edge_order() {
        let m = fixtures::tetrahedron();
        assert_eq!(build_edge_topology(&m).unwrap(), build_edge_topology(&m).unwrap());
    }
}
