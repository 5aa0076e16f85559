//! fuzzlab generates labeled network-attack datasets by fuzzing protocol
//! fields inside a simulated LAN, trains small detection models on the
//! generated data, and measures how comprehensive and interpretable the
//! resulting datasets and models are.
//!
//! The pipeline runs in five stages, each deterministic given its seed:
//!
//! 1. [`sim`] drives one of four attack testbeds (PtH over the AUTHP lab
//!    protocol, ARP poisoning, DNS cache poisoning, TELNET session
//!    hijacking) and captures packets at the victim.
//! 2. [`fuzz`] assigns random in-range values to selected packet fields and
//!    picks which fields to fuzz by measuring attack success rates.
//! 3. [`data`] converts labeled captures into fixed-shape samples (type
//!    sequences, byte vectors, byte matrices, header vectors).
//! 4. [`model`] trains from-scratch MLP / LSTM / CNN / linear-SVM
//!    classifiers and computes confusion-matrix metrics.
//! 5. [`analysis`] measures permutation feature importance, the covered-by
//!    coverage rate, and exports first-layer CNN filters.
//!
//! [`pipeline`] wires the stages together behind the `fuzzlab` CLI.

pub mod analysis;
pub mod data;
pub mod fuzz;
pub mod model;
pub mod packet;
pub mod pipeline;
pub mod rng;
pub mod sim;
