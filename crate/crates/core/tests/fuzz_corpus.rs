//! Replays the checked-in fuzz seeds through the same round trips the fuzz targets check.

use std::fs;
use std::path::PathBuf;

use meshff::datasets::{parse_edge_labels, parse_index};
use meshff::features::{decode_features, encode_features};
use meshff::mesh::{build_edge_topology, parse_edge_scalars, parse_obj, validate_manifold, write_obj};
use meshff::nn::{decode_checkpoint, encode_checkpoint};
use meshff::ops::PoolHistory;
use meshff::pipelines::ExperimentConfig;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn obj_seeds() {
    for (name, data) in seeds("obj") {
        let mesh = parse_obj(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(validate_manifold(&mesh).is_empty(), build_edge_topology(&mesh).is_ok(), "{name}");
        let again = parse_obj(write_obj(&mesh, None).unwrap().obj.as_bytes()).unwrap();
        assert_eq!(again.faces(), mesh.faces());
    }
}

#[test]
fn feature_container_seeds() {
    for (name, data) in seeds("feature_container") {
        let f = decode_features(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(encode_features(&f), data, "{name}");
    }
}

#[test]
fn checkpoint_seeds() {
    for (name, data) in seeds("checkpoint") {
        let c = decode_checkpoint(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(encode_checkpoint(&c), data, "{name}");
    }
}

#[test]
fn config_seeds() {
    for (name, data) in seeds("config") {
        let text = String::from_utf8(data).unwrap();
        let c = ExperimentConfig::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap().hash(), c.hash());
    }
}

#[test]
fn manifest_index_seeds() {
    for (name, data) in seeds("manifest_index") {
        assert!(!parse_index(&data).unwrap_or_else(|e| panic!("{name}: {e}")).is_empty());
    }
}

#[test]
fn history_json_seeds() {
    for (name, data) in seeds("history_json") {
        let h = PoolHistory::from_json(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(h.averaging_map().output_rows(), h.final_edge_count);
        assert_eq!(h.unpool_map().output_rows(), h.initial_edge_count);
    }
}

#[test]
fn edge_sidecar_seeds() {
    for (name, data) in seeds("edge_sidecar") {
        let scalars = parse_edge_scalars(&data).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(!scalars.is_empty());
        if let Ok(labels) = parse_edge_labels(&data) {
            assert!(labels.iter().all(|([i, j], _)| i < j));
        }
    }
}
