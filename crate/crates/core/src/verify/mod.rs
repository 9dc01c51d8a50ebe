//! Monte Carlo checks of the probabilistic claims on simulated ensembles.
//!
//! Every estimator is a map over paths followed by a reduction in path
//! order, so results are bit-identical for a fixed ensemble regardless of
//! the thread count.

mod martingale;
mod occupation;
mod paths;

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::SamplePath;

pub use martingale::{
    check_time_changed_symbol, martingale_defect, small_time_symbol, unit_weight, MartingaleTestResult,
    SmallTimeEstimate, TimeChangedSymbolResult, Weight,
};
pub use occupation::{occupation_divergence, OccupationResult, OccupationVerdict};
pub use paths::{holder_index_check, maximal_inequality_check, Anchor, HolderIndexResult, MaximalIneqResult};

/// One line of the verification table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub test: String,
    pub params: String,
    pub estimate: Complex64,
    pub stderr: f64,
    pub pass: bool,
}

/// Writes `test,params,estimate_re,estimate_im,stderr,pass` rows.
///
/// Params are `;`-separated and never contain commas.
pub fn write_verify_csv<W: Write>(mut out: W, rows: &[VerifyRow]) -> Result<()> {
    writeln!(out, "test,params,estimate_re,estimate_im,stderr,pass")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.test,
            r.params.replace(',', ";"),
            r.estimate.re,
            r.estimate.im,
            r.stderr,
            r.pass
        )?;
    }
    Ok(())
}

fn check_paths(paths: &[SamplePath], dim: usize) -> Result<()> {
    let Some(first) = paths.first() else {
        return Err(Error::Statistics("empty ensemble".into()));
    };
    for p in paths {
        if p.dim() != dim {
            return Err(Error::InvalidParameter(format!("path dimension {} differs from {dim}", p.dim())));
        }
        if p.times() != first.times() {
            return Err(Error::InvalidParameter("paths must share one time grid".into()));
        }
    }
    Ok(())
}
