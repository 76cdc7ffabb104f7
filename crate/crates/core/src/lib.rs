//! Discovery and analysis of facet Bell inequalities for bipartite scenarios.

pub mod detection;
pub mod exactlp;
pub mod facetgen;
pub mod linalg;
pub mod npa;
pub mod qdist;
pub mod rational;
pub mod scenario;
