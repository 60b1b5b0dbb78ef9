//! Instance and solution file formats, the TSPLIB reader, and the two
//! seeded benchmark-family generators.
//!
//! Everything here is a pure function of its inputs; generators are
//! deterministic per `(spec, seed)` and reproducibility is checked
//! byte-wise on the serialized output. Random draws come from ChaCha8
//! (`rand_chacha`), a portable, documented keystream generator, so the
//! files can be regenerated identically from any implementation of the
//! same procedure.

mod format;
mod generate;
mod tsplib;

pub use format::{
    parse_instance, parse_solution, write_instance, write_solution, CustomerDoc, DroneMetric,
    InstanceDoc, ParseError, PointDoc, SolutionDoc, TruckMetric,
};
pub use generate::{
    derive_pdstsp, gen_murray_chu, DepotMode, GenError, GenSpecMurrayChu, GenSpecTsplib,
    MurrayDepot,
};
pub use tsplib::{parse_tsplib, TsplibError, TsplibFile, TsplibNode};
