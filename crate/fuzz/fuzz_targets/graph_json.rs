#![no_main]

use libfuzzer_sys::fuzz_target;
use orbitrelay::connectivity::InterPlaneGraph;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(graph) = InterPlaneGraph::from_json(text) {
        // A graph that parsed must serialize and parse back to itself.
        let again = InterPlaneGraph::from_json(&graph.to_json()).expect("round trip");
        assert_eq!(graph.vertices, again.vertices);
        assert_eq!(graph.edges.len(), again.edges.len());
        let _ = graph.components();
    }
});
