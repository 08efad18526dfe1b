#![no_main]
use libfuzzer_sys::fuzz_target;
use offcenter_mesh::audit::audit_mesh;
use offcenter_mesh::{fast_refine_raw, refine_raw, FastConfig, RefinerConfig};

const BETA: f64 = std::f64::consts::SQRT_2;

fuzz_target!(|text: &str| {
    let Ok(pts) = offcenter_mesh::io::parse_points(text) else { return };
    if pts.len() > 48 {
        return;
    }
    if let Ok(m) = refine_raw(&pts, &RefinerConfig::new(BETA).with_max_insertions(20_000)) {
        assert!(m.stats.capped || audit_mesh(&m, BETA).pass());
    }
    if let Ok(out) = fast_refine_raw(&pts, &FastConfig::new(BETA).with_max_insertions(20_000)) {
        assert!(out.mesh.stats.capped || audit_mesh(&out.mesh, BETA).pass());
    }
});
