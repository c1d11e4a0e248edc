// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter domain: {0}")]
    ParameterDomain(String),

    #[error("did not converge: {0}")]
    Convergence(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("layer {layer} has kind {found}, expected {expected}")]
    LayerKind {
        layer: String,
        found: &'static str,
        expected: &'static str,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("cgp decomposition: {0}")]
    Decomposition(String),

    #[error("layout check failed for cell {cell}: {msg}")]
    Drc { cell: String, msg: String },

    #[error("characterization of arc {arc} failed: {msg}")]
    Characterization { arc: String, msg: String },

    #[error("missing gate for features: {0}")]
    Feature(String),

    #[error("capacity: {0}")]
    Capacity(String),

    #[error("netlist: {0}")]
    Netlist(String),

    #[error("timing graph: {0}")]
    Timing(String),

    #[error("domain: {0}")]
    Domain(String),

    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("config: {0}")]
    Config(String),

    #[error("flow at vdd={v_dd} V, f_tar={f_tar} GHz: {source}")]
    Flow {
        v_dd: f64,
        f_tar: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::ParameterDomain(msg.into())
    }
}
