#![no_main]
use libfuzzer_sys::fuzz_target;
use offcenter_mesh::io::parse_node;

fuzz_target!(|text: &str| {
    if let Ok(node) = parse_node(text) {
        if let Some(kinds) = &node.kinds {
            assert_eq!(kinds.len(), node.points.len());
        }
    }
});
