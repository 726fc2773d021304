//! Dataset directories: `index.tsv`, OBJ meshes and per-edge label sidecars.
//!
//! Index lines hold five tab-separated fields: sample id, mesh path, class label (`-` for
//! none), split (`train` or `test`) and edge-label sidecar path (`-` for none). Paths are
//! relative to the directory. Lines starting with `#` and blank lines are ignored.
//!
//! Edge-label sidecars hold one `i j label` line per edge, `i` and `j` being 0-based vertex
//! indices of the edge.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Component, Path};

use super::{DatasetError, LabeledMesh, Split};
use crate::mesh::{build_edge_topology, parse_obj, write_obj};

pub const INDEX_FILE: &str = "index.tsv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub id: String,
    pub path: String,
    pub class_label: Option<usize>,
    pub split: Split,
    pub edge_labels: Option<String>,
}

fn relative_path_ok(p: &str) -> bool {
    !p.is_empty() && Path::new(p).components().all(|c| matches!(c, Component::Normal(_)))
}

pub fn parse_index(bytes: &[u8]) -> Result<Vec<IndexEntry>, DatasetError> {
    let text = std::str::from_utf8(bytes).map_err(|_| DatasetError::Manifest {
        line: 0,
        message: "index is not UTF-8".into(),
    })?;
    let mut entries = Vec::new();
    let mut seen = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let err = |message: String| DatasetError::Manifest { line: line_no, message };
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, path, class, split, labels] = fields[..] else {
            return Err(err(format!("expected 5 tab-separated fields, found {}", fields.len())));
        };
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(err(format!("bad sample id `{id}`")));
        }
        if let Some(prev) = seen.insert(id.to_string(), line_no) {
            return Err(err(format!("sample id `{id}` already used on line {prev}")));
        }
        if !relative_path_ok(path) {
            return Err(err(format!("mesh path `{path}` must be relative and stay inside the dataset")));
        }
        let class_label = match class {
            "-" => None,
            c => Some(c.parse::<usize>().map_err(|_| err(format!("bad class label `{c}`")))?),
        };
        let split = match split {
            "train" => Split::Train,
            "test" => Split::Test,
            s => return Err(err(format!("split must be train or test, got `{s}`"))),
        };
        let edge_labels = match labels {
            "-" => None,
            p if relative_path_ok(p) => Some(p.to_string()),
            p => return Err(err(format!("label path `{p}` must be relative and stay inside the dataset"))),
        };
        entries.push(IndexEntry {
            id: id.to_string(),
            path: path.to_string(),
            class_label,
            split,
            edge_labels,
        });
    }
    Ok(entries)
}

pub fn write_edge_labels(edges: &[[usize; 2]], labels: &[usize]) -> String {
    let mut out = String::new();
    for (e, l) in edges.iter().zip(labels) {
        let _ = writeln!(out, "{} {} {l}", e[0], e[1]);
    }
    out
}

pub fn parse_edge_labels(bytes: &[u8]) -> Result<Vec<([usize; 2], usize)>, DatasetError> {
    let text = std::str::from_utf8(bytes).map_err(|_| DatasetError::Labels("sidecar is not UTF-8".into()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let nums: Result<Vec<usize>, _> = line.split_whitespace().map(str::parse::<usize>).collect();
        match nums.as_deref() {
            Ok(&[i, j, l]) if i != j => out.push(([i.min(j), i.max(j)], l)),
            _ => return Err(DatasetError::Labels(format!("line {}: expected `i j label`", n + 1))),
        }
    }
    Ok(out)
}

/// Orders sidecar entries by the topology's edge list; every edge must appear exactly once.
fn labels_for_edges(entries: &[([usize; 2], usize)], edges: &[[usize; 2]]) -> Result<Vec<usize>, DatasetError> {
    let mut by_pair: HashMap<[usize; 2], usize> = HashMap::with_capacity(entries.len());
    for &(pair, l) in entries {
        if by_pair.insert(pair, l).is_some() {
            return Err(DatasetError::Labels(format!("edge {}-{} listed twice", pair[0], pair[1])));
        }
    }
    if by_pair.len() != edges.len() {
        return Err(DatasetError::Labels(format!(
            "{} labeled edges for a mesh with {} edges",
            by_pair.len(),
            edges.len()
        )));
    }
    edges
        .iter()
        .map(|e| {
            by_pair
                .get(e)
                .copied()
                .ok_or_else(|| DatasetError::Labels(format!("edge {}-{} has no label", e[0], e[1])))
        })
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `meshes/<id>.obj`, `labels/<id>.labels` and the index under `dir`.
pub fn write_manifest(dir: &Path, samples: &[LabeledMesh]) -> Result<(), DatasetError> {
    let mesh_dir = dir.join("meshes");
    fs::create_dir_all(&mesh_dir).map_err(io_err(&mesh_dir))?;
    let mut index = String::from("# id\tpath\tclass\tsplit\tedge_labels\n");
    for s in samples {
        let rel = format!("meshes/{}.obj", s.id);
        let obj = write_obj(&s.mesh, None)?.obj;
        let path = dir.join(&rel);
        fs::write(&path, obj).map_err(io_err(&path))?;
        let label_rel = match &s.edge_labels {
            Some(labels) => {
                let label_dir = dir.join("labels");
                fs::create_dir_all(&label_dir).map_err(io_err(&label_dir))?;
                let topology = build_edge_topology(&s.mesh)?;
                let rel = format!("labels/{}.labels", s.id);
                let path = dir.join(&rel);
                fs::write(&path, write_edge_labels(topology.edges(), labels)).map_err(io_err(&path))?;
                rel
            }
            None => "-".into(),
        };
        let class = s.class_label.map_or("-".into(), |c| c.to_string());
        let _ = writeln!(index, "{}\t{rel}\t{class}\t{}\t{label_rel}", s.id, s.split);
    }
    let path = dir.join(INDEX_FILE);
    fs::write(&path, index).map_err(io_err(&path))
}

pub fn read_manifest(dir: &Path) -> Result<Vec<LabeledMesh>, DatasetError> {
    let index_path = dir.join(INDEX_FILE);
    let entries = parse_index(&fs::read(&index_path).map_err(io_err(&index_path))?)?;
    entries
        .into_iter()
        .map(|entry| {
            let path = dir.join(&entry.path);
            let mesh = parse_obj(&fs::read(&path).map_err(io_err(&path))?).map_err(|source| DatasetError::MeshFile {
                context: path.display().to_string(),
                source,
            })?;
            let edge_labels = match &entry.edge_labels {
                Some(rel) => {
                    let path = dir.join(rel);
                    let parsed = parse_edge_labels(&fs::read(&path).map_err(io_err(&path))?)?;
                    let topology = build_edge_topology(&mesh).map_err(|source| DatasetError::MeshFile {
                        context: entry.path.clone(),
                        source,
                    })?;
                    Some(labels_for_edges(&parsed, topology.edges())?)
                }
                None => None,
            };
            Ok(LabeledMesh {
                id: entry.id,
                mesh,
                class_label: entry.class_label,
                edge_labels,
                split: entry.split,
            })
        })
        .collect()
}
