#![no_main]

use libfuzzer_sys::fuzz_target;
use orbitrelay::treeopt::RoutingTree;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(tree) = RoutingTree::from_json(text) {
        assert_eq!(tree.edges().len() + 1, tree.vertices());
        let again = RoutingTree::from_json(&tree.to_json()).expect("round trip");
        assert_eq!(tree.edge_pairs(), again.edge_pairs());
        let _ = tree.hop_diameter();
        let _ = tree.to_dot();
    }
});
