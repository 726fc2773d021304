use std::fmt::Write as _;

use super::{build_edge_topology, Mesh, MeshError, Point};

/// Parses the `v` / `f` subset of Wavefront OBJ.
///
/// Polygons are fan-triangulated, `vt`/`vn` references inside face tokens are dropped,
/// negative (relative) indices are resolved against the vertices read so far, and any other
/// directive is skipped.
pub fn parse_obj(bytes: &[u8]) -> Result<Mesh, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|e| MeshError::Parse {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
        message: "input is not valid UTF-8".into(),
    })?;

    let mut vertices = Vec::new();
    // (source line, triangle)
    let mut faces: Vec<(usize, [usize; 3])> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for c in coords.iter_mut() {
                    let tok = tokens.next().ok_or_else(|| MeshError::Parse {
                        line: line_no,
                        message: "vertex needs 3 coordinates".into(),
                    })?;
                    *c = parse_coordinate(tok).ok_or_else(|| MeshError::Parse {
                        line: line_no,
                        message: format!("malformed coordinate {tok:?}"),
                    })?;
                }
                vertices.push(Point::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let refs = tokens
                    .map(|tok| resolve_index(tok, vertices.len(), line_no))
                    .collect::<Result<Vec<_>, _>>()?;
                if refs.len() < 3 {
                    return Err(MeshError::Parse {
                        line: line_no,
                        message: format!("face needs at least 3 vertices, got {}", refs.len()),
                    });
                }
                for k in 1..refs.len() - 1 {
                    faces.push((line_no, [refs[0], refs[k], refs[k + 1]]));
                }
            }
            _ => {}
        }
    }

    if vertices.is_empty() {
        return Err(MeshError::Empty("vertices"));
    }
    if faces.is_empty() {
        return Err(MeshError::Empty("faces"));
    }
    for &(line, face) in &faces {
        if let Some(&bad) = face.iter().find(|&&i| i >= vertices.len()) {
            return Err(MeshError::Parse {
                line,
                message: format!(
                    "face index {} out of range ({} vertices)",
                    bad + 1,
                    vertices.len()
                ),
            });
        }
        if face[0] == face[1] || face[1] == face[2] || face[2] == face[0] {
            return Err(MeshError::Parse {
                line,
                message: "face repeats a vertex".into(),
            });
        }
    }
    Mesh::new(vertices, faces.into_iter().map(|(_, f)| f).collect())
}

fn parse_coordinate(tok: &str) -> Option<f64> {
    tok.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn resolve_index(tok: &str, seen: usize, line: usize) -> Result<usize, MeshError> {
    let head = tok.split('/').next().unwrap_or("");
    let raw: i64 = head.parse().map_err(|_| MeshError::Parse {
        line,
        message: format!("malformed face reference {tok:?}"),
    })?;
    let resolved = match raw {
        0 => None,
        r if r > 0 => Some(r as usize - 1),
        r => (seen as i64 + r).try_into().ok(),
    };
    resolved.ok_or_else(|| MeshError::Parse {
        line,
        message: format!("face index {raw} out of range"),
    })
}

/// Rounds to 9 significant digits and prints the shortest decimal that parses back to it.
pub fn format_number(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { format!("{x}") };
    }
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    format!("{rounded}")
}

/// OBJ text plus the optional per-edge scalar sidecar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjExport {
    pub obj: String,
    pub sidecar: Option<String>,
}

/// Serializes `mesh`; when `edge_field` is non-empty a sidecar with one `i j value` line per
/// edge (topology edge order) is produced as well.
pub fn write_obj(mesh: &Mesh, edge_field: Option<&[f64]>) -> Result<ObjExport, MeshError> {
    let mut obj = String::with_capacity(mesh.vertex_count() * 32 + mesh.face_count() * 16);
    for v in mesh.vertices() {
        let _ = writeln!(
            obj,
            "v {} {} {}",
            format_number(v.x),
            format_number(v.y),
            format_number(v.z)
        );
    }
    for f in mesh.faces() {
        let _ = writeln!(obj, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }

    let sidecar = match edge_field {
        Some(values) if !values.is_empty() => {
            let topology = build_edge_topology(mesh)?;
            if values.len() != topology.edge_count() {
                return Err(MeshError::FieldLength {
                    expected: topology.edge_count(),
                    got: values.len(),
                });
            }
            Some(write_edge_scalars(topology.edges(), values))
        }
        _ => None,
    };
    Ok(ObjExport { obj, sidecar })
}

pub fn write_edge_scalars(edges: &[[usize; 2]], values: &[f64]) -> String {
    let mut out = String::new();
    for (e, v) in edges.iter().zip(values) {
        let _ = writeln!(out, "{} {} {}", e[0], e[1], format_number(*v));
    }
    out
}

/// Reads an `i j value` sidecar back into (edge, value) pairs.
pub fn parse_edge_scalars(bytes: &[u8]) -> Result<Vec<([usize; 2], f64)>, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|_| MeshError::Parse {
        line: 0,
        message: "input is not valid UTF-8".into(),
    })?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: &str| MeshError::Parse {
            line: idx + 1,
            message: message.into(),
        };
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(err("expected `i j value`"));
        }
        let i = parts[0].parse().map_err(|_| err("bad vertex index"))?;
        let j = parts[1].parse().map_err(|_| err("bad vertex index"))?;
        let v = parse_coordinate(parts[2]).ok_or_else(|| err("bad value"))?;
        out.push(([i, j], v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures;

    #[test]
    fn single_triangle() {
        let m = parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3").unwrap();
        assert_eq!(m.vertex_count(), 3);
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn quad_is_fan_triangulated() {
        let m = parse_obj(b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn texture_and_normal_refs_are_dropped() {
        let src = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\nf 1/5/2 2/6/2 3/7/2\n";
        assert_eq!(parse_obj(src).unwrap().faces(), &[[0, 1, 2]]);
        let src = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1//2 2//2 3//2\n";
        assert_eq!(parse_obj(src).unwrap().faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn comments_unknown_directives_and_relative_indices() {
        let src = b"# header\nmtllib x.mtl\no thing\nv 0 0 0 # trailing\nv 1 0 0\nv 0 1 0\ns off\nf -3 -2 -1\n";
        assert_eq!(parse_obj(src).unwrap().faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn malformed_coordinate_reports_line() {
        let err = parse_obj(b"v 0 0 0\nv 1 zero 0\n").unwrap_err();
        assert!(matches!(err, MeshError::Parse { line: 2, .. }), "{err}");
        let err = parse_obj(b"v 0 0 nan\n").unwrap_err();
        assert!(matches!(err, MeshError::Parse { line: 1, .. }));
    }

    #[test]
    fn out_of_range_face_index() {
        let err = parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n").unwrap_err();
        assert!(matches!(err, MeshError::Parse { line: 4, .. }), "{err}");
        assert!(parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n").is_err());
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(parse_obj(b""), Err(MeshError::Empty("vertices"))));
        assert!(matches!(parse_obj(b"v 0 0 0\n"), Err(MeshError::Empty("faces"))));
    }

    #[test]
    fn round_trip_single_triangle() {
        let m = Mesh::new(
            vec![
                Point::new(0.1, 1.0 / 3.0, -2.5e-7),
                Point::new(12345.678901234, 0.0, 1.0),
                Point::new(-0.0, 7.0, 2.0 / 3.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let out = write_obj(&m, None).unwrap();
        assert!(out.sidecar.is_none());
        let back = parse_obj(out.obj.as_bytes()).unwrap();
        assert_eq!(back.faces(), m.faces());
        for (a, b) in back.vertices().iter().zip(m.vertices()) {
            for k in 0..3 {
                let scale = b[k].abs().max(f64::MIN_POSITIVE);
                assert!((a[k] - b[k]).abs() / scale < 5e-9, "{} vs {}", a[k], b[k]);
            }
        }
        assert_eq!(out.obj, write_obj(&back, None).unwrap().obj);
    }

    #[test]
    fn sidecar_one_line_per_edge() {
        let tri = fixtures::single_triangle();
        let out = write_obj(&tri, Some(&[0.1, 0.2, 0.3])).unwrap();
        assert_eq!(out.sidecar.unwrap().lines().count(), 3);

        let pair = fixtures::flat_pair();
        let field = [0.1, 0.2, 0.3, 0.4, 0.5];
        let sidecar = write_obj(&pair, Some(&field)).unwrap().sidecar.unwrap();
        assert_eq!(sidecar.lines().count(), 5);
        assert_eq!(sidecar.lines().next().unwrap(), "0 1 0.1");
        let parsed = parse_edge_scalars(sidecar.as_bytes()).unwrap();
        assert_eq!(parsed.len(), 5);
        assert_eq!(parsed[4].1, 0.5);

        assert!(matches!(
            write_obj(&pair, Some(&[0.1, 0.2, 0.3, 0.4])),
            Err(MeshError::FieldLength { expected: 5, got: 4 })
        ));
    }

    #[test]
    fn empty_field_emits_no_sidecar() {
        let out = write_obj(&fixtures::single_triangle(), Some(&[])).unwrap();
        assert!(out.sidecar.is_none());
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(0.1), "0.1");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333");
        assert_eq!(format_number(2.0), "2");
    }
}
