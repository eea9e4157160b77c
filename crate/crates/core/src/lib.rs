//! Economic complexity metrics on geography x activity matrices: RCA,
//! reflections, ECI/PCI, Fitness-Complexity, product-space proximity,
//! BiCM-validated assist networks and green complexity scores.
//!
//! ```
//! use ecomplexity::bipartite::BinaryBipartite;
//! use ecomplexity::complexity::eci_pci;
//!
//! let m = BinaryBipartite::from_rows(&[[1, 1, 1], [1, 1, 0], [1, 0, 0]]).unwrap();
//! let (eci, _pci) = eci_pci(&m).unwrap();
//! assert_eq!(eci.ranking(), ["g1", "g2", "g3"]);
//! ```

pub mod bicm;
pub mod bipartite;
pub mod code;
pub mod complexity;
pub mod error;
pub mod export;
pub mod green;
pub mod ingest;
pub mod numeric;
pub mod pipeline;
pub mod plot;
pub mod relatedness;
pub mod validation;
