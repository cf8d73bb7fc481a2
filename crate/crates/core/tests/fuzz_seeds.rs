//! Runs the checked-in fuzz corpus through the same entry points as the fuzz targets.

use std::fs;
use std::path::{Path, PathBuf};

use orbitrelay::connectivity::InterPlaneGraph;
use orbitrelay::harness::{LoadedConfig, RunManifest};
use orbitrelay::snn::{decode_params, encode_params, CheckpointManifest};
use orbitrelay::treeopt::RoutingTree;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(PathBuf, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|entry| {
            let path = entry.unwrap().path();
            let bytes = fs::read(&path).unwrap();
            (path, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

#[test]
fn config_seeds_load_and_validate() {
    for (path, bytes) in seeds("config_toml") {
        let loaded = LoadedConfig::from_toml(text(&bytes))
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        loaded.validate().unwrap();
    }
}

#[test]
fn graph_seeds_round_trip() {
    for (_, bytes) in seeds("graph_json") {
        let g = InterPlaneGraph::from_json(text(&bytes)).unwrap();
        let again = InterPlaneGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(g, again);
    }
}

#[test]
fn tree_seeds_round_trip() {
    for (_, bytes) in seeds("tree_json") {
        let t = RoutingTree::from_json(text(&bytes)).unwrap();
        let again = RoutingTree::from_json(&t.to_json()).unwrap();
        assert_eq!(t.edge_pairs(), again.edge_pairs());
        assert_eq!(t.weighted_diameter(), again.weighted_diameter());
    }
}

#[test]
fn checkpoint_seeds_validate() {
    for (_, bytes) in seeds("checkpoint_manifest") {
        CheckpointManifest::from_json(text(&bytes))
            .unwrap()
            .validate()
            .unwrap();
    }
    for (_, bytes) in seeds("checkpoint_weights") {
        let params = decode_params(&bytes).unwrap();
        assert_eq!(encode_params(&params), bytes);
    }
}

#[test]
fn run_manifest_seeds_parse() {
    for (_, bytes) in seeds("run_manifest") {
        let m: RunManifest = serde_json::from_slice(&bytes).unwrap();
        m.tree.into_tree().unwrap();
    }
}

#[test]
fn malformed_inputs_are_errors_not_panics() {
    let junk: [&[u8]; 6] = [
        b"",
        b"{",
        b"[]",
        b"\xff\xfe",
        b"{\"vertices\": 99999999999}",
        b"nan",
    ];
    for bytes in junk {
        if let Ok(s) = std::str::from_utf8(bytes) {
            assert!(LoadedConfig::from_toml(s).is_err());
            assert!(InterPlaneGraph::from_json(s).is_err());
            assert!(RoutingTree::from_json(s).is_err());
            assert!(CheckpointManifest::from_json(s).is_err());
        }
    }
    assert!(decode_params(&[0u8; 7]).is_err());
    assert!(decode_params(&f64::NAN.to_le_bytes()).is_err());
}
