//! Triangle meshes, edge topology and the OBJ subset used on disk.
//!
//! A [`Mesh`] is the geometric ground truth: vertex positions plus a counter-clockwise
//! triangle list. [`EdgeTopology`] is the edge-centric view every network layer works on.

mod obj;
pub mod primitives;
mod topology;
mod transform;
mod validate;

pub use obj::{format_number, parse_edge_scalars, parse_obj, write_edge_scalars, write_obj, ObjExport};
pub use topology::{build_edge_topology, EdgeTopology};
pub use transform::{apply_motion, normalize_unit_box, RigidMotion};
pub use validate::{validate_manifold, Finding, ValidationReport};

use nalgebra::Point3;

pub type Point = Point3<f64>;

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("mesh has no {0}")]
    Empty(&'static str),
    #[error("face {face} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange { face: usize, index: usize, vertex_count: usize },
    #[error("face {face} repeats vertex {index}")]
    RepeatedVertex { face: usize, index: usize },
    #[error("topology: {0}")]
    Topology(Finding),
    #[error("degenerate mesh: {0}")]
    Degenerate(String),
    #[error("edge field has {got} values but the mesh has {expected} edges")]
    FieldLength { expected: usize, got: usize },
}

/// Vertex positions and counter-clockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    faces: Vec<[usize; 3]>,
}

impl Mesh {
    /// Checks index range and that no face repeats a vertex.
    pub fn new(vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        for (fi, face) in faces.iter().enumerate() {
            for (k, &v) in face.iter().enumerate() {
                if v >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index: v,
                        vertex_count: vertices.len(),
                    });
                }
                if face[(k + 1) % 3] == v {
                    return Err(MeshError::RepeatedVertex { face: fi, index: v });
                }
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Same connectivity, new positions.
    pub fn with_vertices(&self, vertices: Vec<Point>) -> Self {
        assert_eq!(vertices.len(), self.vertices.len(), "vertex count must not change");
        Self {
            vertices,
            faces: self.faces.clone(),
        }
    }

    pub(crate) fn map_vertices(&self, f: impl Fn(&Point) -> Point) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Bitwise-stable byte encoding of positions and faces, used for dataset hashing.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.vertices.len() * 24 + self.faces.len() * 24 + 16);
        out.extend_from_slice(&(self.vertices.len() as u64).to_le_bytes());
        for v in &self.vertices {
            for c in v.iter() {
                out.extend_from_slice(&c.to_bits().to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.faces.len() as u64).to_le_bytes());
        for f in &self.faces {
            for &i in f {
                out.extend_from_slice(&(i as u64).to_le_bytes());
            }
        }
        out
    }
}
