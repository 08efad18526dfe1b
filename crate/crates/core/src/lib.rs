//! Quality Delaunay refinement of planar point sets.
//!
//! Two refiners share one geometric kernel: a reference loop that removes the
//! shortest loose pair first ([`baseline`]), and a level-ordered refiner that
//! schedules work over a balanced quadtree ([`fast`]). Both insert off-centers
//! and produce meshes whose triangles have radius-edge ratio at most `beta`.

pub mod audit;
pub mod baseline;
pub mod delaunay;
pub mod error;
pub mod experiment;
pub mod fast;
pub mod frame;
pub mod geometry;
pub mod index;
pub mod io;
pub mod loose;
pub mod mesh;
pub mod quadtree;

pub use baseline::{refine, refine_raw, InsertionMode, RefinerConfig};
pub use delaunay::{InsertOutcome, Triangulation, VertexId, GHOST};
pub use error::{GeometryError, ParseError, QuadtreeError, RefineError, TriangulationError};
pub use fast::{fast_refine, fast_refine_raw, instrumented_run, FastConfig, FastOutcome, FastStats, InvariantReport, RefinementConstants};
pub use frame::{normalize_input, BoundingFrame, Transform};
pub use quadtree::{Quadtree, QuadtreeNode, QuadtreeParams};
pub use mesh::{RefinedMesh, RefinementStats, VertexKind};
pub use loose::{LoosePair, OffCenterKind, OffCenterResult};
pub use geometry::{CirclePosition, Disk, Orientation, Point2, Side, Triangle};
pub use audit::{audit, audit_mesh, MeshAudit};
