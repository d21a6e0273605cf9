//! Tabu-search detection for large MIMO systems.
//!
//! The crate provides three tabu-search detectors that visit exactly the
//! same candidates but differ in how neighbor metrics are evaluated:
//!
//! * [`conventional_ts`]: full metric `‖u + h_d δ_d‖²` per neighbor,
//! * [`qr_ts`]: QR-reduced metric exploiting the triangular `R`,
//! * [`ngts_detect`]: neighbor-grouped search with a simplified group cost,
//!   lazily updated `zᵀr_d` products and optional channel ordering.
//!
//! Every detector reports its arithmetic in an [`OpLedger`]. Exact ML
//! references ([`brute_force_ml`], [`se_sphere_decode`]) and a Monte-Carlo
//! [`harness`] complete the toolkit.

pub mod complexity;
pub mod detector;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod ngts;
pub mod oracle;
pub mod tabu;

pub use complexity::{measured_reduction, OpCount, OpLedger, Phase};
pub use detector::DetectorKind;
pub use error::{Error, Result};
pub use linalg::{order_columns, qr_householder, zf_solve, Matrix, QrFactors};
pub use model::{
    bit_errors, draw_instance, quantize, to_real, trial_rng, ComplexSystem, Constellation,
    RealSystem, Symbol,
};
pub use ngts::{ngts_detect, ngts_init, NgtsState};
pub use oracle::{brute_force_ml, se_sphere_decode, MlResult};
pub use tabu::{conventional_ts, qr_ts, Detection, Move, SearchTrace, TabuList, TabuParams};
