#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = offcenter_mesh::io::parse_csv(text);
});
