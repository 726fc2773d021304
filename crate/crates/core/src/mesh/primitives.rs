//! Closed reference meshes with outward counter-clockwise winding.

use std::collections::HashMap;

use super::{Mesh, Point};

/// Regular icosahedron with circumradius 1: 12 vertices, 30 edges, 20 faces.
pub fn icosahedron() -> Mesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let r = (1.0 + phi * phi).sqrt();
    let vertices = raw.iter().map(|p| Point::new(p[0] / r, p[1] / r, p[2] / r)).collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    Mesh::new(vertices, faces).expect("icosahedron indices are valid")
}

/// Icosahedron split `level` times (each face into four), projected onto the unit sphere.
pub fn icosphere(level: usize) -> Mesh {
    let base = icosahedron();
    let mut vertices = base.vertices().to_vec();
    let mut faces = base.faces().to_vec();
    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |u: usize, v: usize, vertices: &mut Vec<Point>| {
            *midpoints.entry((u.min(v), u.max(v))).or_insert_with(|| {
                let m = nalgebra::center(&vertices[u], &vertices[v]);
                vertices.push(Point::from(m.coords.normalize()));
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Mesh::new(vertices, faces).expect("subdivision keeps indices valid")
}

/// Torus around the z axis on a `rings x sides` grid. `flip(i, j)` picks the diagonal of quad
/// `(i, j)`: `false` splits along `(i, j)-(i+1, j+1)`, `true` along the other diagonal.
///
/// Panics unless both grid sizes are at least 3.
pub fn torus(
    rings: usize,
    sides: usize,
    major: f64,
    minor: f64,
    mut flip: impl FnMut(usize, usize) -> bool,
) -> Mesh {
    assert!(rings >= 3 && sides >= 3, "torus grid needs at least 3x3 cells");
    let tau = std::f64::consts::TAU;
    let mut vertices = Vec::with_capacity(rings * sides);
    for i in 0..rings {
        let u = tau * i as f64 / rings as f64;
        for j in 0..sides {
            let v = tau * j as f64 / sides as f64;
            let w = major + minor * v.cos();
            vertices.push(Point::new(w * u.cos(), w * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: usize, j: usize| (i % rings) * sides + j % sides;
    let mut faces = Vec::with_capacity(2 * rings * sides);
    for i in 0..rings {
        for j in 0..sides {
            let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if flip(i, j) {
                faces.extend([[v00, v10, v01], [v10, v11, v01]]);
            } else {
                faces.extend([[v00, v10, v11], [v00, v11, v01]]);
            }
        }
    }
    Mesh::new(vertices, faces).expect("torus indices are valid")
}

/// Splits the counter-clockwise quad `q` into two triangles along `q0-q2`, or `q1-q3` when
/// `flip` is set.
pub fn push_quad(faces: &mut Vec<[usize; 3]>, q: [usize; 4], flip: bool) {
    if flip {
        faces.extend([[q[0], q[1], q[3]], [q[1], q[2], q[3]]]);
    } else {
        faces.extend([[q[0], q[1], q[2]], [q[0], q[2], q[3]]]);
    }
}

/// Closed tube: a start pole, rings of equal length, an end pole.
///
/// Outward winding needs each ring to run counter-clockwise when seen from the start pole's
/// side, i.e. ring direction `U x V = -T` for ring axes `U`, `V` and travel direction `T`.
/// Panics on fewer than one ring or rings shorter than 3.
pub fn capped_tube(start: Point, rings: &[Vec<Point>], end: Point, mut flip: impl FnMut(usize, usize) -> bool) -> Mesh {
    assert!(!rings.is_empty(), "tube needs a ring");
    let s = rings[0].len();
    assert!(s >= 3 && rings.iter().all(|r| r.len() == s), "rings need a common length of at least 3");
    let mut vertices = Vec::with_capacity(2 + s * rings.len());
    vertices.push(start);
    for ring in rings {
        vertices.extend_from_slice(ring);
    }
    vertices.push(end);
    let last = vertices.len() - 1;
    let at = |i: usize, j: usize| 1 + i * s + j % s;
    let mut faces = Vec::with_capacity(2 * s * (rings.len() + 1));
    for j in 0..s {
        faces.push([0, at(0, j), at(0, j + 1)]);
    }
    for i in 0..rings.len() - 1 {
        for j in 0..s {
            push_quad(&mut faces, [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)], flip(i, j));
        }
    }
    let k = rings.len() - 1;
    for j in 0..s {
        faces.push([last, at(k, j + 1), at(k, j)]);
    }
    Mesh::new(vertices, faces).expect("tube indices are valid")
}

/// Surface of revolution around z. `profile` lists `(radius, height)` from the top pole to
/// the bottom pole; both ends must have radius 0 and every interior point a positive radius.
pub fn lathe(profile: &[(f64, f64)], segments: usize, flip: impl FnMut(usize, usize) -> bool) -> Mesh {
    assert!(profile.len() >= 3, "profile needs both poles and a ring");
    let tau = std::f64::consts::TAU;
    let rings: Vec<Vec<Point>> = profile[1..profile.len() - 1]
        .iter()
        .map(|&(r, z)| {
            (0..segments)
                .map(|j| {
                    let phi = tau * j as f64 / segments as f64;
                    Point::new(r * phi.cos(), r * phi.sin(), z)
                })
                .collect()
        })
        .collect();
    let (top, bottom) = (profile[0], profile[profile.len() - 1]);
    capped_tube(Point::new(0.0, 0.0, top.1), &rings, Point::new(0.0, 0.0, bottom.1), flip)
}

/// UV sphere of radius 1 with `bands` latitude bands (at least 2) and `segments` meridians.
pub fn uv_sphere(bands: usize, segments: usize, flip: impl FnMut(usize, usize) -> bool) -> Mesh {
    assert!(bands >= 2);
    let profile: Vec<(f64, f64)> = (0..=bands)
        .map(|i| {
            let theta = std::f64::consts::PI * i as f64 / bands as f64;
            if i == 0 || i == bands {
                (0.0, theta.cos())
            } else {
                (theta.sin(), theta.cos())
            }
        })
        .collect();
    lathe(&profile, segments, flip)
}

/// Closed cone with apex at height 1 over a unit disc: `side_bands` rings from apex to rim
/// (the rim included) and `base_bands - 1` further rings between rim and base center.
pub fn closed_cone(segments: usize, side_bands: usize, base_bands: usize, flip: impl FnMut(usize, usize) -> bool) -> Mesh {
    assert!(side_bands >= 1 && base_bands >= 1);
    let mut profile = vec![(0.0, 1.0)];
    for i in 1..=side_bands {
        let t = i as f64 / side_bands as f64;
        profile.push((t, 1.0 - t));
    }
    for i in 1..base_bands {
        profile.push((1.0 - i as f64 / base_bands as f64, 0.0));
    }
    profile.push((0.0, 0.0));
    lathe(&profile, segments, flip)
}

/// Axis-aligned box surface on an integer lattice with `n[a]` cells along axis `a`.
///
/// Returns the mesh (lattice units, corner at the origin) and each vertex's lattice
/// coordinate. `flip(face, u, v)` picks the diagonal of cell `(u, v)` on face `face`
/// (`2 * axis + (positive side as usize)`).
pub fn box_grid(n: [usize; 3], mut flip: impl FnMut(usize, usize, usize) -> bool) -> (Mesh, Vec<[usize; 3]>) {
    assert!(n.iter().all(|&c| c >= 1), "box needs at least one cell per axis");
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut lattice = Vec::new();
    let mut id = |p: [usize; 3], lattice: &mut Vec<[usize; 3]>| {
        *index.entry(p).or_insert_with(|| {
            lattice.push(p);
            lattice.len() - 1
        })
    };
    let mut faces = Vec::new();
    for axis in 0..3 {
        for positive in [false, true] {
            // (u, v) with u x v pointing along the outward normal.
            let (mut u, mut v) = ((axis + 1) % 3, (axis + 2) % 3);
            if !positive {
                std::mem::swap(&mut u, &mut v);
            }
            let face = 2 * axis + usize::from(positive);
            for i in 0..n[u] {
                for j in 0..n[v] {
                    let corner = |di: usize, dj: usize| {
                        let mut p = [0; 3];
                        p[axis] = if positive { n[axis] } else { 0 };
                        p[u] = i + di;
                        p[v] = j + dj;
                        p
                    };
                    let q = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)].map(|p| id(p, &mut lattice));
                    push_quad(&mut faces, q, flip(face, i, j));
                }
            }
        }
    }
    let vertices = lattice.iter().map(|p| Point::new(p[0] as f64, p[1] as f64, p[2] as f64)).collect();
    (Mesh::new(vertices, faces).expect("box indices are valid"), lattice)
}
