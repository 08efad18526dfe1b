use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate configuration (coincident or collinear points)")]
    Degenerate,
    #[error("beta {0} is below 1/2, no leaf disk exists")]
    BetaTooSmall(f64),
    #[error("need at least two reference points")]
    TooFewPoints,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("hull vertex has an unbounded gap")]
    HullVertex,
    #[error("point is not a member of the set")]
    NotInSet,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TriangulationError {
    #[error("fewer than three points")]
    TooFewPoints,
    #[error("all points are collinear")]
    AllCollinear,
    #[error("duplicate point {0}")]
    Duplicate(crate::Point2),
    #[error("point {0} lies outside the triangulated region")]
    OutsideHull(crate::Point2),
    #[error("non-finite coordinate")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefineError {
    #[error("empty input")]
    EmptyInput,
    #[error("duplicate input point {0}")]
    Duplicate(crate::Point2),
    #[error("non-finite input coordinate")]
    NonFinite,
    #[error("beta {0} is below sqrt(2); set an insertion cap to run in experimental mode")]
    BetaRequiresCap(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Triangulation(#[from] TriangulationError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Quadtree(#[from] QuadtreeError),
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: non-finite coordinate")]
    NonFinite { line: usize },
    #[error("line {line}: duplicate point {point}")]
    Duplicate { line: usize, point: crate::Point2 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadtreeError {
    #[error("duplicate point {0}")]
    Duplicate(crate::Point2),
    #[error("point {0} lies outside the unit square")]
    OutsideSquare(crate::Point2),
    #[error("points too close to separate within {0} levels")]
    TooDeep(u32),
    #[error("no cell up to the root satisfies the size bounds for distance {d}")]
    NoQualifyingCell { d: f64, start: u32 },
    #[error("invalid parameters: {0}")]
    Params(String),
}
