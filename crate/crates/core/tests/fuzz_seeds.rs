//! Replays the checked-in fuzz corpora through the parser entry points and
//! mutates them a little, so the seeds stay meaningful on stable.

use std::fs;
use std::path::{Path, PathBuf};

use offcenter_mesh::audit::audit_mesh;
use offcenter_mesh::io::{parse_csv, parse_ele, parse_node, parse_points, read_mesh, read_points};
use offcenter_mesh::{fast_refine_raw, refine_raw, FastConfig, RefinerConfig};
use proptest::prelude::*;

fn corpus(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "empty corpus {target}");
    out
}

fn node_case(data: &[u8]) {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(node) = parse_node(text) {
            if let Some(k) = &node.kinds {
                assert_eq!(k.len(), node.points.len());
            }
        }
    }
}

fn csv_case(data: &[u8]) {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_csv(text);
    }
}

fn points_case(data: &[u8]) {
    if let Ok(pts) = read_points(data) {
        assert!(pts.iter().all(|p| p.x.is_finite() && p.y.is_finite()));
    }
}

fn ele_case(data: &[u8]) {
    let Some((&base, rest)) = data.split_first() else { return };
    if let Ok(text) = std::str::from_utf8(rest) {
        let _ = parse_ele(text, (base & 1) as usize);
    }
}

fn mesh_case(data: &[u8], dir: &Path) {
    let Some(split) = data.iter().position(|&b| b == 0) else { return };
    let base = dir.join("m");
    fs::write(base.with_extension("node"), &data[..split]).unwrap();
    fs::write(base.with_extension("ele"), &data[split + 1..]).unwrap();
    if let Ok(files) = read_mesh(&base) {
        let _ = files.transform();
        let _ = files.triangulate();
    }
}

fn refine_case(data: &[u8]) {
    const BETA: f64 = std::f64::consts::SQRT_2;
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(pts) = parse_points(text) else { return };
    if pts.len() > 48 {
        return;
    }
    if let Ok(m) = refine_raw(&pts, &RefinerConfig::new(BETA).with_max_insertions(20_000)) {
        assert!(m.stats.capped || audit_mesh(&m, BETA).pass());
    }
    if let Ok(out) = fast_refine_raw(&pts, &FastConfig::new(BETA).with_max_insertions(20_000)) {
        assert!(out.mesh.stats.capped || audit_mesh(&out.mesh, BETA).pass());
    }
}

#[test]
fn seeds_replay() {
    let dir = tempfile::tempdir().unwrap();
    for (_, d) in corpus("parse_node") {
        node_case(&d);
    }
    for (_, d) in corpus("parse_csv") {
        csv_case(&d);
    }
    for (_, d) in corpus("read_points") {
        points_case(&d);
    }
    for (_, d) in corpus("parse_ele") {
        ele_case(&d);
    }
    for (_, d) in corpus("read_mesh") {
        mesh_case(&d, dir.path());
    }
    for (_, d) in corpus("refine_points") {
        refine_case(&d);
    }
}

#[test]
fn valid_seeds_parse() {
    let ok = |target: &str, name: &str| corpus(target).into_iter().find(|(p, _)| p.ends_with(name)).unwrap().1;
    assert!(parse_node(std::str::from_utf8(&ok("parse_node", "attrs_markers")).unwrap()).unwrap().kinds.is_some());
    assert!(parse_node(std::str::from_utf8(&ok("parse_node", "huge_attrs")).unwrap()).is_err());
    assert_eq!(parse_csv(std::str::from_utf8(&ok("parse_csv", "header")).unwrap()).unwrap().len(), 2);
    assert!(read_points(&ok("read_points", "bad_utf8")[..]).is_err());
    let dir = tempfile::tempdir().unwrap();
    let data = ok("read_mesh", "small_mesh");
    let split = data.iter().position(|&b| b == 0).unwrap();
    let base = dir.path().join("m");
    fs::write(base.with_extension("node"), &data[..split]).unwrap();
    fs::write(base.with_extension("ele"), &data[split + 1..]).unwrap();
    let files = read_mesh(&base).unwrap();
    assert!(files.triangulate().is_ok());
}

#[derive(Debug, Clone)]
enum Edit {
    Flip(usize, u8),
    Insert(usize, u8),
    Delete(usize),
    Splice(usize, usize),
}

fn mutate(mut d: Vec<u8>, edits: &[Edit]) -> Vec<u8> {
    for e in edits {
        let n = d.len().max(1);
        match *e {
            Edit::Flip(i, b) if !d.is_empty() => d[i % n] ^= b,
            Edit::Insert(i, b) => d.insert(i % (d.len() + 1), b),
            Edit::Delete(i) if !d.is_empty() => {
                d.remove(i % n);
            }
            Edit::Splice(i, j) if !d.is_empty() => {
                let (a, b) = ((i % n).min(j % n), (i % n).max(j % n));
                let chunk = d[a..b].to_vec();
                d.splice(a..a, chunk);
            }
            _ => {}
        }
    }
    d
}

fn edit() -> impl Strategy<Value = Edit> {
    const BYTES: &[u8] = b"0123456789 .,-+eE#\n\r\t\0\"nainf";
    let byte = prop::sample::select(BYTES);
    prop_oneof![
        (any::<usize>(), any::<u8>()).prop_map(|(i, b)| Edit::Flip(i, b)),
        (any::<usize>(), byte).prop_map(|(i, b)| Edit::Insert(i, b)),
        any::<usize>().prop_map(Edit::Delete),
        (any::<usize>(), any::<usize>()).prop_map(|(i, j)| Edit::Splice(i, j)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn mutated_parsers(pick in any::<usize>(), edits in prop::collection::vec(edit(), 1..8)) {
        let targets = ["parse_node", "parse_csv", "read_points", "parse_ele"];
        let target = targets[pick % targets.len()];
        let seeds = corpus(target);
        let data = mutate(seeds[(pick / targets.len()) % seeds.len()].1.clone(), &edits);
        match target {
            "parse_node" => node_case(&data),
            "parse_csv" => csv_case(&data),
            "read_points" => points_case(&data),
            _ => ele_case(&data),
        }
    }

    #[test]
    fn mutated_meshes_and_refinement(pick in any::<usize>(), edits in prop::collection::vec(edit(), 1..6)) {
        let dir = tempfile::tempdir().unwrap();
        let meshes = corpus("read_mesh");
        mesh_case(&mutate(meshes[pick % meshes.len()].1.clone(), &edits), dir.path());
        let sets = corpus("refine_points");
        refine_case(&mutate(sets[pick % sets.len()].1.clone(), &edits));
    }
}
