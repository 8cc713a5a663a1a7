// SPDX-License-Identifier: Apache-2.0
//! Static analysis that annotates data-science notebooks with the machine
//! learning operations each code cell performs.
pub mod annotate;
pub mod callgraph;
pub mod classify;
pub mod eag;
pub mod frontend;
pub mod notebook;
pub mod pipeline;
pub mod stubs;

pub use pipeline::{analyze, annotate_notebook, Analysis, Options};
