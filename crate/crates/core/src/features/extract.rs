use nalgebra::Vector3;

use super::{FeatureError, FeatureKind, FeatureTensor};
use crate::mesh::{EdgeTopology, Mesh, Point};

/// Unsigned is the angle between the face normals (flat = 0). Signed negates it where the
/// edge is concave with respect to the outward orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DihedralConvention {
    #[default]
    Unsigned,
    Signed,
}

fn face_area_vector(mesh: &Mesh, f: usize) -> (Vector3<f64>, f64) {
    let [i, j, k] = mesh.faces()[f];
    let v = mesh.vertices();
    let (e1, e2) = (v[j] - v[i], v[k] - v[i]);
    let e3 = v[k] - v[j];
    let longest = e1.norm_squared().max(e2.norm_squared()).max(e3.norm_squared());
    (e1.cross(&e2), longest)
}

/// Unit normal from the counter-clockwise winding.
pub fn face_normal(mesh: &Mesh, f: usize) -> Result<Vector3<f64>, FeatureError> {
    let (n, longest) = face_area_vector(mesh, f);
    let len = n.norm();
    if !(len > f64::EPSILON * longest) || !len.is_finite() {
        return Err(FeatureError::DegenerateFace { face: f });
    }
    Ok(n / len)
}

fn all_normals(mesh: &Mesh) -> Result<Vec<Vector3<f64>>, FeatureError> {
    (0..mesh.face_count()).map(|f| face_normal(mesh, f)).collect()
}

fn opposite_vertex(face: &[usize; 3], [u, v]: [usize; 2]) -> usize {
    *face.iter().find(|&&w| w != u && w != v).expect("face contains the edge")
}

fn dihedral_from_normals(
    topology: &EdgeTopology,
    mesh: &Mesh,
    normals: &[Vector3<f64>],
    e: usize,
    convention: DihedralConvention,
) -> f64 {
    let [Some(f0), Some(f1)] = topology.face_slots(e) else {
        return 0.0;
    };
    let (n0, n1) = (normals[f0], normals[f1]);
    let angle = n0.cross(&n1).norm().atan2(n0.dot(&n1));
    match convention {
        DihedralConvention::Unsigned => angle,
        DihedralConvention::Signed => {
            let [u, _] = topology.edge(e);
            let s = opposite_vertex(&topology.faces()[f1], topology.edge(e));
            let height = n0.dot(&(mesh.vertices()[s] - mesh.vertices()[u]));
            if height > 0.0 {
                -angle
            } else {
                angle
            }
        }
    }
}

/// Angle between the unit normals of the edge's two faces, in `[0, pi]`; boundary edges give 0.
pub fn dihedral_angle(topology: &EdgeTopology, mesh: &Mesh, e: usize) -> Result<f64, FeatureError> {
    dihedral_angle_with(topology, mesh, e, DihedralConvention::Unsigned)
}

pub fn dihedral_angle_with(
    topology: &EdgeTopology,
    mesh: &Mesh,
    e: usize,
    convention: DihedralConvention,
) -> Result<f64, FeatureError> {
    let [Some(f0), Some(f1)] = topology.face_slots(e) else {
        return Ok(0.0);
    };
    let mut normals = vec![Vector3::zeros(); mesh.face_count()];
    normals[f0] = face_normal(mesh, f0)?;
    normals[f1] = face_normal(mesh, f1)?;
    Ok(dihedral_from_normals(topology, mesh, &normals, e, convention))
}

fn edge_length(mesh: &Mesh, [u, v]: [usize; 2]) -> f64 {
    (mesh.vertices()[u] - mesh.vertices()[v]).norm()
}

/// Discrete first and second fundamental forms: `(length, dihedral)` per edge.
pub fn fundamental_forms(topology: &EdgeTopology, mesh: &Mesh) -> Result<FeatureTensor, FeatureError> {
    let normals = all_normals(mesh)?;
    let data = (0..topology.edge_count())
        .flat_map(|e| {
            [
                edge_length(mesh, topology.edge(e)),
                dihedral_from_normals(topology, mesh, &normals, e, DihedralConvention::Unsigned),
            ]
        })
        .collect();
    FeatureTensor::new(FeatureKind::Ff, topology.edge_count(), data)
}

/// Opposite angle and length-to-height ratio of `edge` inside face `f`.
fn face_terms(mesh: &Mesh, f: usize, edge: [usize; 2]) -> (f64, f64) {
    let w = opposite_vertex(&mesh.faces()[f], edge);
    let p = mesh.vertices();
    let (a, b) = (p[edge[0]] - p[w], p[edge[1]] - p[w]);
    let twice_area = a.cross(&b).norm();
    let angle = twice_area.atan2(a.dot(&b));
    let len_sq = (p[edge[0]] - p[edge[1]]).norm_squared();
    (angle, len_sq / twice_area)
}

/// Dihedral angle, the two opposite angles and the two length/height ratios. Each pair is
/// sorted ascending so the output does not depend on face order; boundary edges repeat their
/// single face's values.
pub fn meshcnn5(topology: &EdgeTopology, mesh: &Mesh) -> Result<FeatureTensor, FeatureError> {
    let normals = all_normals(mesh)?;
    let mut data = Vec::with_capacity(topology.edge_count() * 5);
    for e in 0..topology.edge_count() {
        let edge = topology.edge(e);
        let mut terms = topology.edge_faces(e).map(|f| face_terms(mesh, f, edge));
        let first = terms.next().expect("every edge has a face");
        let second = terms.next().unwrap_or(first);
        let angles = sorted(first.0, second.0);
        let ratios = sorted(first.1, second.1);
        data.push(dihedral_from_normals(
            topology,
            mesh,
            &normals,
            e,
            DihedralConvention::Unsigned,
        ));
        data.extend_from_slice(&angles);
        data.extend_from_slice(&ratios);
    }
    FeatureTensor::new(FeatureKind::Meshcnn5, topology.edge_count(), data)
}

fn sorted(a: f64, b: f64) -> [f64; 2] {
    if a <= b {
        [a, b]
    } else {
        [b, a]
    }
}

fn uniform_laplacian(topology: &EdgeTopology, mesh: &Mesh) -> Result<Vec<Vector3<f64>>, FeatureError> {
    (0..topology.vertex_count())
        .map(|v| {
            let mut sum = Vector3::zeros();
            let mut n = 0usize;
            for w in topology.vertex_neighbors(v) {
                sum += mesh.vertices()[w].coords;
                n += 1;
            }
            if n == 0 {
                return Err(FeatureError::IsolatedVertex(v));
            }
            Ok(mesh.vertices()[v].coords - sum / n as f64)
        })
        .collect()
}

/// Coordinate-based representations: `Xyz`, `XyzInv` or `Laplacian`.
pub fn coordinate_features(
    topology: &EdgeTopology,
    mesh: &Mesh,
    kind: FeatureKind,
) -> Result<FeatureTensor, FeatureError> {
    let p: &[Point] = mesh.vertices();
    let rows = topology.edge_count();
    let data: Vec<f64> = match kind {
        FeatureKind::Xyz => topology
            .edges()
            .iter()
            .flat_map(|&[u, v]| {
                let m = nalgebra::center(&p[u], &p[v]);
                [m.x, m.y, m.z]
            })
            .collect(),
        FeatureKind::XyzInv => topology
            .edges()
            .iter()
            .flat_map(|&[u, v]| {
                let (a, b) = (p[u].coords, p[v].coords);
                [a.dot(&b), 0.5 * (a.norm() + b.norm())]
            })
            .collect(),
        FeatureKind::Laplacian => {
            let delta = uniform_laplacian(topology, mesh)?;
            topology
                .edges()
                .iter()
                .flat_map(|&[u, v]| {
                    let m = (delta[u] + delta[v]) * 0.5;
                    [m.x, m.y, m.z]
                })
                .collect()
        }
        FeatureKind::Ff | FeatureKind::Meshcnn5 => return extract(kind, topology, mesh),
    };
    FeatureTensor::new(kind, rows, data)
}

pub fn extract(kind: FeatureKind, topology: &EdgeTopology, mesh: &Mesh) -> Result<FeatureTensor, FeatureError> {
    match kind {
        FeatureKind::Ff => fundamental_forms(topology, mesh),
        FeatureKind::Meshcnn5 => meshcnn5(topology, mesh),
        other => coordinate_features(topology, mesh, other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{apply_motion, build_edge_topology, fixtures, RigidMotion};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

    fn shared_edge(t: &EdgeTopology) -> usize {
        (0..t.edge_count()).find(|&e| !t.is_boundary(e)).unwrap()
    }

    /// Two unit equilateral triangles sharing edge 0-1, folded so the normals meet at `fold`.
    fn equilateral_pair(fold: f64) -> Mesh {
        let h = 3f64.sqrt() / 2.0;
        Mesh::new(
            vec![
                Point::new(0.0, 0.0, 0.0),
                Point::new(1.0, 0.0, 0.0),
                Point::new(0.5, h, 0.0),
                Point::new(0.5, -h * fold.cos(), h * fold.sin()),
            ],
            vec![[0, 1, 2], [1, 0, 3]],
        )
        .unwrap()
    }

    #[test]
    fn flat_pair_has_zero_dihedral() {
        let m = fixtures::flat_pair();
        let t = build_edge_topology(&m).unwrap();
        assert_eq!(dihedral_angle(&t, &m, shared_edge(&t)).unwrap(), 0.0);
    }

    #[test]
    fn perpendicular_fold() {
        let m = Mesh::new(
            vec![
                Point::new(0.0, 0.0, 0.0),
                Point::new(1.0, 0.0, 0.0),
                Point::new(0.0, 1.0, 0.0),
                Point::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 1, 2], [1, 0, 3]],
        )
        .unwrap();
        let t = build_edge_topology(&m).unwrap();
        assert_relative_eq!(dihedral_angle(&t, &m, shared_edge(&t)).unwrap(), FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn tetrahedron_dihedral_from_explicit_normals() {
        let m = fixtures::tetrahedron();
        let t = build_edge_topology(&m).unwrap();
        // Oracle: normals of faces (0,1,2) and (0,3,1) written out by hand, then arccos.
        let n012: Vector3<f64> = Vector3::new(1.0, 1.0, -1.0).normalize();
        let n031: Vector3<f64> = Vector3::new(1.0, -1.0, 1.0).normalize();
        let expected = n012.dot(&n031).acos();
        assert_relative_eq!(expected, PI - (1.0f64 / 3.0).acos(), epsilon = 1e-12);
        assert_relative_eq!(expected, 1.9106332362490186, epsilon = 1e-12);
        for e in 0..6 {
            assert_relative_eq!(dihedral_angle(&t, &m, e).unwrap(), expected, epsilon = 1e-12);
        }
        let ff = fundamental_forms(&t, &m).unwrap();
        let side = 8f64.sqrt();
        for e in 0..6 {
            assert_relative_eq!(ff.row(e)[0], side, epsilon = 1e-12);
            assert_relative_eq!(ff.row(e)[1], expected, epsilon = 1e-12);
        }
        let scaled = apply_motion(&m, &RigidMotion::identity().with_scale(1.0 / side));
        let ff = fundamental_forms(&t, &scaled).unwrap();
        assert_relative_eq!(ff.row(0)[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ff_of_flat_unit_pair_and_scaling() {
        let m = equilateral_pair(0.0);
        let t = build_edge_topology(&m).unwrap();
        let e = shared_edge(&t);
        let ff = fundamental_forms(&t, &m).unwrap();
        assert_relative_eq!(ff.row(e)[0], 1.0);
        assert_relative_eq!(ff.row(e)[1], 0.0, epsilon = 1e-15);

        let folded = equilateral_pair(0.7);
        let doubled = apply_motion(&folded, &RigidMotion::identity().with_scale(2.0));
        let (a, b) = (fundamental_forms(&t, &folded).unwrap(), fundamental_forms(&t, &doubled).unwrap());
        for r in 0..t.edge_count() {
            assert_relative_eq!(b.row(r)[0], 2.0 * a.row(r)[0], epsilon = 1e-12);
            assert_relative_eq!(b.row(r)[1], a.row(r)[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn signed_convention_marks_concavity() {
        // Folding the second face "up" (towards the first face's normal) is concave.
        let m = equilateral_pair(0.7);
        let t = build_edge_topology(&m).unwrap();
        let e = shared_edge(&t);
        let unsigned = dihedral_angle(&t, &m, e).unwrap();
        let signed = dihedral_angle_with(&t, &m, e, DihedralConvention::Signed).unwrap();
        assert_relative_eq!(unsigned, 0.7, epsilon = 1e-12);
        assert_relative_eq!(signed.abs(), unsigned);
        let tet = fixtures::tetrahedron();
        let tt = build_edge_topology(&tet).unwrap();
        assert!(dihedral_angle_with(&tt, &tet, 0, DihedralConvention::Signed).unwrap() > 0.0);
        let mirrored = equilateral_pair(-0.7);
        let s2 = dihedral_angle_with(&t, &mirrored, e, DihedralConvention::Signed).unwrap();
        assert!(signed * s2 < 0.0, "{signed} {s2}");
    }

    #[test]
    fn meshcnn5_equilateral_flat() {
        let m = equilateral_pair(0.0);
        let t = build_edge_topology(&m).unwrap();
        let f = meshcnn5(&t, &m).unwrap();
        let row = f.row(shared_edge(&t));
        let expected = [0.0, FRAC_PI_3, FRAC_PI_3, 2.0 / 3f64.sqrt(), 2.0 / 3f64.sqrt()];
        for (got, want) in row.iter().zip(expected) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn meshcnn5_right_isosceles_pair() {
        // Square split on its diagonal: the diagonal sees two right angles.
        let m = fixtures::flat_pair();
        let t = build_edge_topology(&m).unwrap();
        let row = meshcnn5(&t, &m).unwrap().row(shared_edge(&t)).to_vec();
        assert_relative_eq!(row[1], FRAC_PI_2, epsilon = 1e-12);
        assert_relative_eq!(row[2], FRAC_PI_2, epsilon = 1e-12);
        // length sqrt(2), height sqrt(2)/2.
        assert_relative_eq!(row[3], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn meshcnn5_independent_of_face_order() {
        let m = equilateral_pair(0.4).with_vertices(vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.2, 0.1, 0.0),
            Point::new(0.3, 0.9, 0.05),
            Point::new(0.7, -0.5, 0.6),
        ]);
        let swapped = Mesh::new(m.vertices().to_vec(), vec![m.faces()[1], m.faces()[0]]).unwrap();
        let (t1, t2) = (build_edge_topology(&m).unwrap(), build_edge_topology(&swapped).unwrap());
        let (f1, f2) = (meshcnn5(&t1, &m).unwrap(), meshcnn5(&t2, &swapped).unwrap());
        let e1 = shared_edge(&t1);
        let e2 = shared_edge(&t2);
        assert_eq!(f1.row(e1), f2.row(e2));
    }

    #[test]
    fn degenerate_face_is_reported() {
        let m = Mesh::new(
            vec![
                Point::new(0.0, 0.0, 0.0),
                Point::new(1.0, 0.0, 0.0),
                Point::new(2.0, 0.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let t = build_edge_topology(&m).unwrap();
        assert!(matches!(fundamental_forms(&t, &m), Err(FeatureError::DegenerateFace { face: 0 })));
        assert!(matches!(meshcnn5(&t, &m), Err(FeatureError::DegenerateFace { face: 0 })));
    }

    #[test]
    fn coordinate_variants() {
        let m = Mesh::new(
            vec![Point::new(0.0, 0.0, 0.0), Point::new(2.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let t = build_edge_topology(&m).unwrap();
        assert_eq!(t.edge(0), [0, 1]);
        let xyz = coordinate_features(&t, &m, FeatureKind::Xyz).unwrap();
        assert_eq!(xyz.row(0), &[1.0, 0.0, 0.0]);
        let inv = coordinate_features(&t, &m, FeatureKind::XyzInv).unwrap();
        assert_eq!(inv.row(0), &[0.0, 1.0]);
    }

    #[test]
    fn laplacian_vanishes_on_flat_grid_interior() {
        // 3x3 vertex grid, all diagonals running the same way; vertex 4 is the center.
        let mut v = Vec::new();
        for j in 0..3 {
            for i in 0..3 {
                v.push(Point::new(i as f64, j as f64, 0.0));
            }
        }
        let mut f = Vec::new();
        for j in 0..2 {
            for i in 0..2 {
                let a = j * 3 + i;
                f.push([a, a + 1, a + 4]);
                f.push([a, a + 4, a + 3]);
            }
        }
        let m = Mesh::new(v, f).unwrap();
        let t = build_edge_topology(&m).unwrap();
        let lap = coordinate_features(&t, &m, FeatureKind::Laplacian).unwrap();
        // The center's Laplacian is zero, so the 4-0 and 4-8 rows are half of the corner
        // Laplacians, which mirror each other.
        let find = |a: usize, b: usize| t.edges().iter().position(|&e| e == [a.min(b), a.max(b)]).unwrap();
        let (r0, r8) = (lap.row(find(4, 0)), lap.row(find(4, 8)));
        for k in 0..3 {
            assert_relative_eq!(r0[k], -r8[k], epsilon = 1e-15);
        }
        let delta = uniform_laplacian(&t, &m).unwrap();
        assert_eq!(delta[4], Vector3::zeros());
    }

    #[test]
    fn rigid_motion_invariance_and_equivariance() {
        let m = equilateral_pair(0.9).with_vertices(vec![
            Point::new(0.1, 0.2, 0.3),
            Point::new(1.1, 0.0, -0.2),
            Point::new(0.4, 1.0, 0.1),
            Point::new(0.6, -0.7, 0.8),
        ]);
        let t = build_edge_topology(&m).unwrap();
        let rotation = RigidMotion::from_axis_angle(Vector3::new(0.3, -1.0, 0.5), 1.234);
        let rigid = rotation.with_translation(Vector3::new(3.0, -1.0, 2.0));
        for kind in FeatureKind::ALL {
            let base = extract(kind, &t, &m).unwrap();
            let rotated = base.max_abs_diff(&extract(kind, &t, &apply_motion(&m, &rotation)).unwrap());
            let moved = base.max_abs_diff(&extract(kind, &t, &apply_motion(&m, &rigid)).unwrap());
            if kind.is_rigid_invariant() {
                assert!(moved < 1e-9, "{kind}: {moved}");
            } else {
                assert!(moved > 1e-3, "{kind} should move with the mesh");
            }
            if kind.is_rotation_invariant() {
                assert!(rotated < 1e-9, "{kind}: {rotated}");
            } else {
                assert!(rotated > 1e-3, "{kind} should rotate with the mesh");
            }
        }
    }
}
