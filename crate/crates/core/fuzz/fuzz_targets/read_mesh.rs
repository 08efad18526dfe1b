#![no_main]
use libfuzzer_sys::fuzz_target;

// A .node and a .ele file separated by a NUL byte, written to disk and read
// back as a mesh.
fuzz_target!(|data: &[u8]| {
    let Some(split) = data.iter().position(|&b| b == 0) else { return };
    let dir = tempdir();
    let base = dir.join("m");
    std::fs::write(base.with_extension("node"), &data[..split]).unwrap();
    std::fs::write(base.with_extension("ele"), &data[split + 1..]).unwrap();
    if let Ok(files) = offcenter_mesh::io::read_mesh(&base) {
        let _ = files.transform();
        let _ = files.triangulate();
    }
});

fn tempdir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("offcenter-fuzz-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
