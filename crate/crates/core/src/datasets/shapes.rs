//! Per-sample builders for the three generators.

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::DatasetError;
use crate::mesh::primitives::{box_grid, capped_tube, closed_cone, torus, uv_sphere};
use crate::mesh::{normalize_unit_box, Mesh, Point};

/// Families of the primitive zoo, in class order.
pub const ZOO_FAMILIES: [&str; 4] = ["sphere", "box", "torus", "cone"];

/// 4x4 stencils embossed on the engraved cube, one per class.
pub const GLYPHS: [[&str; 4]; 8] = [
    ["XXXX", "X..X", "X..X", "XXXX"],
    ["X..X", ".XX.", ".XX.", "X..X"],
    ["XXXX", "..X.", ".X..", "XXXX"],
    ["X...", "X...", "X...", "XXXX"],
    [".XX.", "XXXX", "XXXX", ".XX."],
    ["XXXX", "X...", "XXX.", "X..."],
    ["X.X.", ".X.X", "X.X.", ".X.X"],
    ["..X.", "..X.", "XXXX", "..X."],
];

/// Picks one parameter tuple whose edge count lands in `range`.
fn pick<T: Copy, R: Rng>(candidates: Vec<(T, usize)>, range: (usize, usize), rng: &mut R) -> Result<T, DatasetError> {
    let fitting: Vec<T> = candidates
        .into_iter()
        .filter(|&(_, e)| e >= range.0 && e <= range.1)
        .map(|(t, _)| t)
        .collect();
    fitting.choose(rng).copied().ok_or(DatasetError::UnreachableRange {
        min: range.0,
        max: range.1,
    })
}

fn jitter<R: Rng>(mesh: &Mesh, sigma: f64, rng: &mut R) -> Mesh {
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    let vertices = mesh
        .vertices()
        .iter()
        .map(|p| p + Vector3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng)))
        .collect();
    mesh.with_vertices(vertices)
}

fn scale_axes(mesh: &Mesh, s: Vector3<f64>) -> Mesh {
    let vertices = mesh.vertices().iter().map(|p| Point::from(p.coords.component_mul(&s))).collect();
    mesh.with_vertices(vertices)
}

fn finish<R: Rng>(mesh: Mesh, rng: &mut R, anisotropy: f64, sigma: f64) -> Result<Mesh, DatasetError> {
    let s = Vector3::from_fn(|_, _| if anisotropy > 0.0 { rng.gen_range(1.0 - anisotropy..1.0 + anisotropy) } else { 1.0 });
    let scaled = normalize_unit_box(&scale_axes(&mesh, s))?;
    Ok(jitter(&scaled, sigma, rng))
}

/// Closed primitive of family `class` (see [`ZOO_FAMILIES`]) with random tessellation, mild
/// anisotropic scaling and jitter, in canonical orientation inside the unit box.
pub fn zoo_sample<R: Rng>(class: usize, range: (usize, usize), rng: &mut R) -> Result<Mesh, DatasetError> {
    let mesh = match class {
        0 => {
            let c = (3..=20).flat_map(|b| (6..=24).map(move |s| ((b, s), 3 * s * (b - 1)))).collect();
            let (b, s) = pick(c, range, rng)?;
            let flips: Vec<bool> = (0..b * s).map(|_| rng.gen_bool(0.5)).collect();
            uv_sphere(b, s, |i, j| flips[i * s + j])
        }
        1 => {
            let c = (2..=8)
                .flat_map(|x| (2..=8).flat_map(move |y| (2..=8).map(move |z| ([x, y, z], 6 * (x * y + y * z + z * x)))))
                .collect();
            let n = pick(c, range, rng)?;
            let flips: Vec<bool> = (0..6 * 64).map(|_| rng.gen_bool(0.5)).collect();
            box_grid(n, |f, u, v| flips[f * 64 + u * 8 + v]).0
        }
        2 => {
            let c = (6..=30).flat_map(|r| (4..=12).map(move |s| ((r, s), 3 * r * s))).collect();
            let (r, s) = pick(c, range, rng)?;
            let flips: Vec<bool> = (0..r * s).map(|_| rng.gen_bool(0.5)).collect();
            let minor = rng.gen_range(0.3..0.45);
            torus(r, s, 1.0, minor, |i, j| flips[i * s + j])
        }
        3 => {
            let c = (6..=24)
                .flat_map(|s| (2..=8).flat_map(move |k| (1..=6).map(move |m| ((s, k, m), 3 * s * (k + m - 1)))))
                .collect();
            let (s, k, m) = pick(c, range, rng)?;
            let flips: Vec<bool> = (0..s * (k + m)).map(|_| rng.gen_bool(0.5)).collect();
            closed_cone(s, k, m, |i, j| flips[i * s + j])
        }
        other => return Err(DatasetError::InvalidSpec(format!("primitive zoo has no class {other}"))),
    };
    finish(mesh, rng, 0.15, 0.003)
}

/// Cube with glyph `class` embossed into one random face.
pub fn engraved_cube_sample<R: Rng>(class: usize, range: (usize, usize), rng: &mut R) -> Result<Mesh, DatasetError> {
    let glyph = GLYPHS
        .get(class)
        .ok_or_else(|| DatasetError::InvalidSpec(format!("engraved cube has no glyph {class}")))?;
    let n = pick((6..=10).map(|n| (n, 18 * n * n)).collect(), range, rng)?;
    let face = rng.gen_range(0..6);
    let flips: Vec<bool> = (0..6 * n * n).map(|_| rng.gen_bool(0.5)).collect();
    let (mesh, lattice) = box_grid([n; 3], |f, u, v| flips[(f * n + u) * n + v]);
    let axis = face / 2;
    let positive = face % 2 == 1;
    let (mut ua, mut va) = ((axis + 1) % 3, (axis + 2) % 3);
    if !positive {
        std::mem::swap(&mut ua, &mut va);
    }
    let offset = (n - 4) / 2;
    let inked = |cu: isize, cv: isize| -> bool {
        let (gu, gv) = (cu - offset as isize, cv - offset as isize);
        (0..4).contains(&gu) && (0..4).contains(&gv) && glyph[gv as usize].as_bytes()[gu as usize] == b'X'
    };
    let depth = 0.45 * if positive { 1.0 } else { -1.0 };
    let vertices = mesh
        .vertices()
        .iter()
        .zip(&lattice)
        .map(|(p, l)| {
            let on_face = l[axis] == if positive { n } else { 0 };
            let (u, v) = (l[ua] as isize, l[va] as isize);
            let raised = on_face && [(u - 1, v - 1), (u, v - 1), (u - 1, v), (u, v)].iter().any(|&(a, b)| inked(a, b));
            let mut q = *p;
            if raised {
                q[axis] += depth;
            }
            q
        })
        .collect();
    finish(mesh.with_vertices(vertices), rng, 0.0, 0.002)
}

/// Bent tube of `parts` segments with per-edge part labels.
pub fn limb_sample<R: Rng>(parts: usize, range: (usize, usize), rng: &mut R) -> Result<(Mesh, Vec<usize>), DatasetError> {
    if !(2..=6).contains(&parts) {
        return Err(DatasetError::InvalidSpec(format!("articulated limbs need 2 to 6 parts, got {parts}")));
    }
    // Stations per part and ring size; F = 2 s (rings + 1), E = 3 s (rings + 1).
    let c = (6..=14)
        .flat_map(|s| (3..=8).map(move |k| ((s, k), 3 * s * (parts * k + 1))))
        .collect();
    let (sides, per_part) = pick(c, range, rng)?;

    let mut heading = 0.0f64;
    let mut cursor = Point::origin();
    let mut joints = vec![cursor];
    let mut radii = Vec::new();
    for p in 0..parts {
        if p > 0 {
            let bend = rng.gen_range(25f64..70.0).to_radians();
            heading += if rng.gen_bool(0.5) { bend } else { -bend };
        }
        let length = rng.gen_range(0.9..1.1) * (1.0 - 0.12 * p as f64);
        cursor += Vector3::new(heading.cos(), heading.sin(), 0.0) * length;
        joints.push(cursor);
        radii.push(rng.gen_range(0.9..1.1) * 0.22 * (1.0 - 0.15 * p as f64));
    }

    let up = Vector3::z();
    let dir = |p: usize| (joints[p + 1] - joints[p]).normalize();
    let mut rings = Vec::new();
    let mut ring_part = Vec::new();
    for p in 0..parts {
        for k in 0..per_part {
            let t = k as f64 / per_part as f64;
            let center = joints[p] + (joints[p + 1] - joints[p]) * t;
            let tangent = if k == 0 && p > 0 { (dir(p - 1) + dir(p)).normalize() } else { dir(p) };
            rings.push((center, tangent, radii[p]));
            ring_part.push(p);
        }
    }
    rings.push((joints[parts], dir(parts - 1), radii[parts - 1]));
    ring_part.push(parts - 1);

    let tau = std::f64::consts::TAU;
    let ring_points: Vec<Vec<Point>> = rings
        .iter()
        .map(|&(c, t, r)| {
            let v = up.cross(&t);
            (0..sides)
                .map(|j| {
                    let phi = tau * j as f64 / sides as f64;
                    c + (up * phi.cos() + v * phi.sin()) * r
                })
                .collect()
        })
        .collect();
    let start = joints[0] - dir(0) * (0.5 * radii[0]);
    let end = joints[parts] + dir(parts - 1) * (0.5 * radii[parts - 1]);
    let flips: Vec<bool> = (0..rings.len() * sides).map(|_| rng.gen_bool(0.5)).collect();
    let mesh = capped_tube(start, &ring_points, end, |i, j| flips[i * sides + j]);

    // Vertex part: poles follow their adjacent ring.
    let mut vertex_part = vec![0];
    for &p in &ring_part {
        vertex_part.extend(std::iter::repeat(p).take(sides));
    }
    vertex_part.push(parts - 1);
    let mesh = finish(mesh, rng, 0.0, 0.002)?;
    let topology = crate::mesh::build_edge_topology(&mesh)?;
    let labels = topology
        .edges()
        .iter()
        .map(|&[u, v]| vertex_part[u].min(vertex_part[v]))
        .collect();
    Ok((mesh, labels))
}
