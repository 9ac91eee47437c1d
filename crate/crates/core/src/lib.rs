//! Circuit synthesis, optimization, simulation and resource estimation for
//! product-formula simulation of the disordered Heisenberg model on
//! regular graphs.

pub mod circuit;
pub mod experiment;
pub mod ftcost;
pub mod graphs;
pub mod optimizer;
pub mod sim;
pub mod synth;

pub use circuit::{count_resources, parse, Circuit, CircuitError, Gate, ResourceReport};
pub use graphs::{ColoredLayout, Graph, GraphError};
pub use sim::{RSearchResult, SimError, UnitaryMatrix};
pub use synth::{DisorderedHeisenberg, Mode, ProductFormulaPlan};
