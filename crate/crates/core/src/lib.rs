//! Surface reconstruction from multi-scale point clouds with visibility
//! links.
//!
//! The point cloud is partitioned by an unrestricted octree; every set of
//! leaves sharing a lattice corner is tetrahedralized and labelled
//! inside/outside by an s-t min cut, and the overlapping local surfaces are
//! fused into one two-manifold mesh.

pub mod delaunay;
pub mod extract;
pub mod fuse;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod maxflow;
pub mod octree;
pub mod pointproc;
