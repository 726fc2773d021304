#![no_main]

use libfuzzer_sys::fuzz_target;
use meshff::mesh::{build_edge_topology, parse_obj, validate_manifold, write_obj};

fuzz_target!(|data: &[u8]| {
    let Ok(mesh) = parse_obj(data) else {
        return;
    };
    let report = validate_manifold(&mesh);
    // the topology builder must agree with the validator
    assert_eq!(report.is_empty(), build_edge_topology(&mesh).is_ok());
    let text = write_obj(&mesh, None).unwrap().obj;
    let again = parse_obj(text.as_bytes()).expect("written OBJ parses");
    assert_eq!(again.faces(), mesh.faces());
});
