//! Point-set input and mesh output.
//!
//! Reads Triangle-style `.node` files and two-column CSV. Writes `.node`
//! (de-normalized coordinates, vertex kind as the single attribute), `.ele`
//! (1-indexed counter-clockwise triples) and an SVG rendering.

use std::fs;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rustc_hash::FxHashMap;

use crate::delaunay::Triangulation;
use crate::error::ParseError;
use crate::frame::Transform;
use crate::geometry::Point2;
use crate::mesh::{RefinedMesh, VertexKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointFormat {
    Node,
    Csv,
}

/// Contents of a `.node` file.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeFile {
    pub points: Vec<Point2>,
    /// Vertex kinds when the first attribute column holds valid kind codes.
    pub kinds: Option<Vec<VertexKind>>,
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, msg: msg.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, ParseError> {
    let v: f64 = tok.trim().parse().map_err(|_| syntax(line, format!("bad number {tok:?}")))?;
    if !v.is_finite() {
        return Err(ParseError::NonFinite { line });
    }
    Ok(v)
}

fn parse_usize(tok: &str, line: usize, what: &str) -> Result<usize, ParseError> {
    tok.parse().map_err(|_| syntax(line, format!("bad {what} {tok:?}")))
}

/// Rejects the second occurrence of any point.
#[derive(Default)]
struct DupCheck {
    seen: FxHashMap<(u64, u64), usize>,
}

impl DupCheck {
    fn check(&mut self, p: Point2, line: usize) -> Result<(), ParseError> {
        if self.seen.insert(p.key(), line).is_some() {
            return Err(ParseError::Duplicate { line, point: p });
        }
        Ok(())
    }
}

/// First significant line decides: a comma means CSV.
pub fn detect_format(text: &str) -> PointFormat {
    match text.lines().map(strip_comment).find(|l| !l.is_empty()) {
        Some(l) if l.contains(',') => PointFormat::Csv,
        _ => PointFormat::Node,
    }
}

pub fn parse_points(text: &str) -> Result<Vec<Point2>, ParseError> {
    match detect_format(text) {
        PointFormat::Node => Ok(parse_node(text)?.points),
        PointFormat::Csv => parse_csv(text),
    }
}

pub fn read_points<R: Read>(mut r: R) -> Result<Vec<Point2>, ParseError> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    parse_points(&text)
}

pub fn read_points_path(path: impl AsRef<Path>) -> Result<Vec<Point2>, ParseError> {
    read_points(fs::File::open(path)?)
}

/// Parse a `.node` file: header `N 2 attrs markers`, then `index x y
/// [attrs] [marker]`. Numbering may start at 0 or 1 but must be consecutive.
pub fn parse_node(text: &str) -> Result<NodeFile, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l))).filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| syntax(1, "missing header"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.is_empty() || h.len() > 4 {
        return Err(syntax(hline, "header must be `count 2 attributes markers`"));
    }
    let count = parse_usize(h[0], hline, "vertex count")?;
    let dim = h.get(1).map_or(Ok(2), |t| parse_usize(t, hline, "dimension"))?;
    if dim != 2 {
        return Err(syntax(hline, format!("dimension must be 2, got {dim}")));
    }
    let nattr = h.get(2).map_or(Ok(0), |t| parse_usize(t, hline, "attribute count"))?;
    let nmark = h.get(3).map_or(Ok(0), |t| parse_usize(t, hline, "marker count"))?;
    if nmark > 1 {
        return Err(syntax(hline, "at most one boundary marker column"));
    }
    let width = nattr.checked_add(3 + nmark).ok_or_else(|| syntax(hline, "attribute count too large"))?;
    let mut points = Vec::with_capacity(count.min(1 << 20));
    let mut codes = Vec::new();
    let mut dups = DupCheck::default();
    let mut base = None;
    for (ln, l) in lines.by_ref().take(count) {
        let tok: Vec<&str> = l.split_whitespace().collect();
        if tok.len() != width {
            return Err(syntax(ln, format!("expected {width} fields, found {}", tok.len())));
        }
        let idx = parse_usize(tok[0], ln, "vertex index")?;
        let b = *base.get_or_insert(idx);
        if b > 1 || idx != b + points.len() {
            return Err(syntax(ln, format!("vertex index {idx} out of sequence")));
        }
        let p = Point2::new(parse_f64(tok[1], ln)?, parse_f64(tok[2], ln)?);
        dups.check(p, ln)?;
        points.push(p);
        if nattr > 0 {
            codes.push(parse_f64(tok[3], ln)?);
        }
    }
    if points.len() != count {
        return Err(syntax(text.lines().count().max(1), format!("header promises {count} vertices, found {}", points.len())));
    }
    if let Some((ln, _)) = lines.next() {
        return Err(syntax(ln, "trailing data after the last vertex"));
    }
    let kinds = if nattr > 0 {
        codes
            .iter()
            .map(|&c| if c.fract() == 0.0 && (0.0..=255.0).contains(&c) { VertexKind::from_code(c as u8) } else { None })
            .collect()
    } else {
        None
    };
    Ok(NodeFile { points, kinds })
}

/// Two-column `x,y` CSV. A non-numeric first row is taken as a header.
pub fn parse_csv(text: &str) -> Result<Vec<Point2>, ParseError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    let mut dups = DupCheck::default();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            syntax(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != 2 {
            return Err(syntax(line, format!("expected 2 columns, found {}", rec.len())));
        }
        if i == 0 && rec[0].parse::<f64>().is_err() && rec[1].parse::<f64>().is_err() {
            continue;
        }
        let p = Point2::new(parse_f64(&rec[0], line)?, parse_f64(&rec[1], line)?);
        dups.check(p, line)?;
        out.push(p);
    }
    Ok(out)
}

/// Parse a `.ele` file into 0-based vertex triples. The numbering base is
/// given by the matching `.node` file.
pub fn parse_ele(text: &str, node_base: usize) -> Result<Vec<[u32; 3]>, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l))).filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| syntax(1, "missing header"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() < 2 {
        return Err(syntax(hline, "header must be `count 3 attributes`"));
    }
    let count = parse_usize(h[0], hline, "triangle count")?;
    if parse_usize(h[1], hline, "corner count")? != 3 {
        return Err(syntax(hline, "only 3-node triangles are supported"));
    }
    let nattr = h.get(2).map_or(Ok(0), |t| parse_usize(t, hline, "attribute count"))?;
    let width = nattr.checked_add(4).ok_or_else(|| syntax(hline, "attribute count too large"))?;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for (ln, l) in lines.take(count) {
        let tok: Vec<&str> = l.split_whitespace().collect();
        if tok.len() != width {
            return Err(syntax(ln, format!("expected {width} fields, found {}", tok.len())));
        }
        let mut t = [0u32; 3];
        for k in 0..3 {
            let v = parse_usize(tok[k + 1], ln, "vertex index")?;
            let v = v.checked_sub(node_base).ok_or_else(|| syntax(ln, format!("vertex index {v} below base")))?;
            t[k] = u32::try_from(v).map_err(|_| syntax(ln, "vertex index too large"))?;
        }
        out.push(t);
    }
    if out.len() != count {
        return Err(syntax(text.lines().count().max(1), format!("header promises {count} triangles, found {}", out.len())));
    }
    Ok(out)
}

/// Write `.node` with coordinates mapped back through `transform`.
pub fn write_node<W: Write>(mut w: W, points: &[Point2], kinds: &[VertexKind], transform: &Transform) -> io::Result<()> {
    writeln!(w, "{} 2 1 0", points.len())?;
    for (i, (p, k)) in points.iter().zip(kinds).enumerate() {
        let o = transform.invert(*p);
        writeln!(w, "{} {:.16e} {:.16e} {}", i + 1, o.x, o.y, k.code())?;
    }
    w.flush()
}

pub fn write_ele<W: Write>(mut w: W, tri: &Triangulation) -> io::Result<()> {
    let tris: Vec<[u32; 3]> = tri.triangles().collect();
    writeln!(w, "{} 3 0", tris.len())?;
    for (i, t) in tris.iter().enumerate() {
        writeln!(w, "{} {} {} {}", i + 1, t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    w.flush()
}

const SVG_SIZE: f64 = 1000.0;
const SVG_PAD: f64 = 20.0;

fn svg_xy(p: Point2) -> (f64, f64) {
    let s = SVG_SIZE - 2.0 * SVG_PAD;
    (SVG_PAD + s * p.x, SVG_PAD + s * (1.0 - p.y))
}

/// One `<line>` per edge, bad triangles (ratio above `beta`) filled red,
/// input vertices as dots. Drawn in normalized coordinates.
pub fn write_svg<W: Write>(mut w: W, tri: &Triangulation, kinds: &[VertexKind], beta: f64) -> io::Result<()> {
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SVG_SIZE}" height="{SVG_SIZE}" viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">"#
    )?;
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(w, r##"<g fill="#e33" fill-opacity="0.5" stroke="none">"##)?;
    for t in tri.triangles() {
        let bad = tri.triangle_geometry(t).radius_edge_ratio().map_or(true, |r| r > beta + 1e-9);
        if bad {
            let pts: Vec<String> = t
                .iter()
                .map(|&v| {
                    let (x, y) = svg_xy(tri.point(v));
                    format!("{x:.3},{y:.3}")
                })
                .collect();
            writeln!(w, r#"<polygon points="{}"/>"#, pts.join(" "))?;
        }
    }
    writeln!(w, "</g>")?;
    writeln!(w, r#"<g stroke="black" stroke-width="0.5">"#)?;
    for (a, b) in tri.edges() {
        let (x1, y1) = svg_xy(tri.point(a));
        let (x2, y2) = svg_xy(tri.point(b));
        writeln!(w, r#"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}"/>"#)?;
    }
    writeln!(w, "</g>")?;
    writeln!(w, r##"<g fill="#1565c0">"##)?;
    for (i, k) in kinds.iter().enumerate() {
        if *k == VertexKind::Input {
            let (x, y) = svg_xy(tri.point(i as u32));
            writeln!(w, r#"<circle cx="{x:.3}" cy="{y:.3}" r="2"/>"#)?;
        }
    }
    writeln!(w, "</g>")?;
    writeln!(w, "</svg>")?;
    w.flush()
}

fn with_ext(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Write `base.node`, `base.ele` and, when `svg_beta` is set, `base.svg`.
/// Returns the paths written.
pub fn write_mesh(mesh: &RefinedMesh, base: impl AsRef<Path>, svg_beta: Option<f64>) -> io::Result<Vec<PathBuf>> {
    let base = base.as_ref();
    let node = with_ext(base, "node");
    let ele = with_ext(base, "ele");
    write_node(BufWriter::new(fs::File::create(&node)?), mesh.points(), &mesh.kinds, &mesh.transform)?;
    write_ele(BufWriter::new(fs::File::create(&ele)?), &mesh.triangulation)?;
    let mut out = vec![node, ele];
    if let Some(beta) = svg_beta {
        let svg = with_ext(base, "svg");
        write_svg(BufWriter::new(fs::File::create(&svg)?), &mesh.triangulation, &mesh.kinds, beta)?;
        out.push(svg);
    }
    Ok(out)
}

/// A mesh read back from `.node`/`.ele` files.
#[derive(Clone, Debug)]
pub struct MeshFiles {
    /// Original coordinates.
    pub points: Vec<Point2>,
    pub kinds: Vec<VertexKind>,
    pub triangles: Vec<[u32; 3]>,
}

#[derive(Debug, thiserror::Error)]
pub enum MeshReadError {
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{0}: vertex kinds missing from the attribute column")]
    NoKinds(PathBuf),
    #[error("{0}: frame corners missing or degenerate")]
    NoFrame(PathBuf),
}

pub fn read_mesh(base: impl AsRef<Path>) -> Result<MeshFiles, MeshReadError> {
    let base = base.as_ref();
    let node = with_ext(base, "node");
    let ele = with_ext(base, "ele");
    let load = |p: &Path| fs::read_to_string(p).map_err(|e| MeshReadError::Parse { path: p.to_owned(), source: e.into() });
    let ntext = load(&node)?;
    let nf = parse_node(&ntext).map_err(|source| MeshReadError::Parse { path: node.clone(), source })?;
    let kinds = nf.kinds.ok_or_else(|| MeshReadError::NoKinds(node.clone()))?;
    let etext = load(&ele)?;
    let triangles = parse_ele(&etext, 1).map_err(|source| MeshReadError::Parse { path: ele.clone(), source })?;
    if let Some(bad) = triangles.iter().flatten().find(|&&v| v as usize >= nf.points.len()) {
        return Err(MeshReadError::Parse {
            path: ele,
            source: ParseError::Syntax { line: 0, msg: format!("vertex {} does not exist", bad + 1) },
        });
    }
    Ok(MeshFiles { points: nf.points, kinds, triangles })
}

impl MeshFiles {
    /// The normalizing transform, recovered from the frame: frame vertices
    /// span exactly the unit square.
    pub fn transform(&self) -> Option<Transform> {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for (p, _) in self.points.iter().zip(&self.kinds).filter(|(_, k)| k.is_boundary()) {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        let side = x1 - x0;
        if !(side > 0.0) || !side.is_finite() {
            return None;
        }
        Some(Transform { center: Point2::new(0.5 * (x0 + x1), 0.5 * (y0 + y1)), scale: 1.0 / side })
    }

    /// Points mapped back into the unit square.
    pub fn normalized(&self) -> Option<Vec<Point2>> {
        let t = self.transform()?;
        Some(self.points.iter().map(|&p| t.apply(p)).collect())
    }

    /// Delaunay triangulation of the normalized vertex set.
    pub fn triangulate(&self) -> Result<Triangulation, MeshReadError> {
        let pts = self.normalized().ok_or_else(|| MeshReadError::NoFrame(PathBuf::new()))?;
        Triangulation::build(&pts).map_err(|e| MeshReadError::Parse {
            path: PathBuf::new(),
            source: ParseError::Syntax { line: 0, msg: e.to_string() },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_example() {
        let p = parse_points("3 2 0 0\n1 0 0\n2 1 0\n3 0 1\n").unwrap();
        assert_eq!(p, vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)]);
    }

    #[test]
    fn node_zero_based_and_comments() {
        let p = parse_node("# pts\n2 2 0 0\n0 0.5 0.5 # first\n\n1 1e-3 2\n").unwrap();
        assert_eq!(p.points.len(), 2);
        assert_eq!(p.kinds, None);
    }

    #[test]
    fn csv_example() {
        assert_eq!(parse_points("0.1,0.2").unwrap(), vec![Point2::new(0.1, 0.2)]);
        assert_eq!(parse_points("x,y\n0.1, 0.2\n3,4\n").unwrap().len(), 2);
    }

    #[test]
    fn duplicate_reports_second_line() {
        match parse_points("0,0\n1,1\n0,0\n") {
            Err(ParseError::Duplicate { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_points("3 2 0 0\n1 0 0\n2 0 0\n3 1 1\n") {
            Err(ParseError::Duplicate { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_inputs_carry_line_numbers() {
        let cases = [
            ("2 3 0 0\n1 0 0\n2 1 1\n", 1),
            ("2 2 0 0\n1 0 0\n", 2),
            ("2 2 0 0\n1 0 0\n3 1 1\n", 3),
            ("1 2 0 0\n1 nan 0\n", 2),
            ("0,0\n1,inf\n", 2),
            ("0,0\n1,2,3\n", 2),
            ("0,0\nfoo,1\n", 2),
        ];
        for (text, want) in cases {
            let e = parse_points(text).unwrap_err();
            let line = match e {
                ParseError::Syntax { line, .. } | ParseError::NonFinite { line } | ParseError::Duplicate { line, .. } => line,
                ParseError::Io(_) => 0,
            };
            assert_eq!(line, want, "{text:?}: {e}");
        }
    }

    #[test]
    fn huge_attribute_counts_are_errors() {
        let max = usize::MAX;
        assert!(parse_node(&format!("1 2 {max} 1\n1 0 0\n")).is_err());
        assert!(parse_ele(&format!("1 3 {max}\n1 1 2 3\n"), 1).is_err());
    }

    #[test]
    fn single_triangle_ele() {
        let pts = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        let tri = Triangulation::build(&pts).unwrap();
        let mut buf = Vec::new();
        write_ele(&mut buf, &tri).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let body = text.lines().nth(1).unwrap();
        let t = parse_ele(&text, 1).unwrap()[0];
        assert_eq!(text.lines().next(), Some("1 3 0"));
        // one ccw triangle over the three vertices; rotation is not fixed
        let mut s = t;
        s.sort();
        assert_eq!(s, [0, 1, 2]);
        let g = tri.triangle_geometry(t);
        assert!(crate::geometry::orient2d(g.a, g.b, g.c) > 0.0);
        assert!(["1 1 2 3", "1 2 3 1", "1 3 1 2"].contains(&body), "{body}");
    }

    #[test]
    fn node_round_trip_exact() {
        let pts = vec![Point2::new(0.1, 0.2), Point2::new(1.0 / 3.0, std::f64::consts::PI), Point2::new(-1e-300, 7e12)];
        let kinds = vec![VertexKind::Input, VertexKind::Frame, VertexKind::Steiner];
        let t = Transform { center: Point2::new(3.0, -2.0), scale: 0.37 };
        let mut buf = Vec::new();
        write_node(&mut buf, &pts, &kinds, &t).unwrap();
        let back = parse_node(std::str::from_utf8(&buf).unwrap()).unwrap();
        let want: Vec<Point2> = pts.iter().map(|&p| t.invert(p)).collect();
        assert_eq!(back.points, want);
        assert_eq!(back.kinds, Some(kinds));
    }
}
