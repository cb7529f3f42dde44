//! Serialization of representations, distance matrices, and embeddings,
//! plus the synthetic toy-corpus generator.
//!
//! The on-disk representation format is a *bundle*: a directory holding a
//! `manifest.json` and one binary block per condition. Each block file
//! `cond_<m>.bin` starts with the 8-byte magic `SSMB\x01\x00\x00\x00`
//! (magic + format version 1), two little-endian `u32` dimensions
//! `(rows, cols)`, and `rows·cols` little-endian `f64` values, row-major.
//! Moment-form conditions store a `(1+n)×n` block — the mean row stacked on
//! the covariance — while sample-form conditions store the raw `L×n` trials.
//! Round trips are bit-exact.
//!
//! A plain-CSV fallback (`cond_<m>.csv`, header `x1,…,xn`, one trial per
//! row) covers interchange with other tooling at decimal-parse fidelity.

mod bundle;
mod tables;
mod toy;

pub use bundle::{read_bundle, read_bundle_auto, read_csv_bundle, write_bundle, write_csv_bundle};
pub use tables::{
    read_distance_csv, read_targets_csv, render_distance_csv, render_embedding_csv,
    write_distance_csv, write_embedding_csv, write_objective_trace_csv, write_targets_csv,
};
pub use toy::{generate_toy, ToyParams, ToySpec};
