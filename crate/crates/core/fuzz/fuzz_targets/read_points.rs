#![no_main]
use libfuzzer_sys::fuzz_target;
use offcenter_mesh::io::read_points;

fuzz_target!(|data: &[u8]| {
    // invalid UTF-8 must come back as an error too
    if let Ok(pts) = read_points(data) {
        assert!(pts.iter().all(|p| p.x.is_finite() && p.y.is_finite()));
    }
});
