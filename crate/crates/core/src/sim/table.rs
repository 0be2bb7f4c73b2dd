//! Sweep result tables and their CSV serialization.
//!
//! Every CSV starts with a `#`-prefixed metadata preamble (tool version,
//! master seed, full config echo), then a header row, then one data row per
//! sweep point. Floats are printed in scientific notation with ten
//! significant digits so reruns with the same seed are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// Preamble content shared by every output table.
#[derive(Debug, Clone)]
pub struct RunMetadata {
    /// Tool name and version, e.g. `mmwave-sim 0.1.0`.
    pub tool: String,
    pub master_seed: u64,
    /// Full config echo as `key = value` pairs.
    pub config: Vec<(String, String)>,
    /// Extra campaign-specific annotations.
    pub extra: Vec<(String, String)>,
}

impl RunMetadata {
    fn write_preamble(&self, out: &mut String) {
        writeln!(out, "# {}", self.tool).unwrap();
        writeln!(out, "# master_seed = {}", self.master_seed).unwrap();
        for (k, v) in &self.config {
            writeln!(out, "# {k} = {v}").unwrap();
        }
        for (k, v) in &self.extra {
            writeln!(out, "# {k} = {v}").unwrap();
        }
    }
}

/// Float formatting used in every CSV cell: ten significant digits,
/// lowercase `inf`/`nan` for the special values.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.9e}")
    }
}

/// One row of the measurement-count sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRow {
    pub m_requested: usize,
    pub m_bs: usize,
    pub m_ms: usize,
    pub m_realized: usize,
    pub n_trials: usize,
    pub p_success: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub mean_rate_per_user: f64,
    pub stderr_rate: f64,
    pub sum_rate: f64,
    pub mean_single_user_rate: f64,
    pub perfect_csi_rate: f64,
    /// `mean_single_user_rate * (1 - U/N_BS) * p_success`.
    pub lower_bound: f64,
}

/// Measurement-count sweep output.
#[derive(Debug, Clone)]
pub struct MeasurementSweepTable {
    pub metadata: RunMetadata,
    pub rows: Vec<MeasurementRow>,
}

impl MeasurementSweepTable {
    pub const COLUMNS: [&'static str; 14] = [
        "m_requested",
        "m_bs",
        "m_ms",
        "m_realized",
        "n_trials",
        "p_success",
        "wilson_low",
        "wilson_high",
        "mean_rate_per_user",
        "stderr_rate",
        "sum_rate",
        "mean_single_user_rate",
        "perfect_csi_rate",
        "lower_bound",
    ];

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        self.metadata.write_preamble(&mut out);
        writeln!(out, "{}", Self::COLUMNS.join(",")).unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.m_requested,
                r.m_bs,
                r.m_ms,
                r.m_realized,
                r.n_trials,
                fmt_float(r.p_success),
                fmt_float(r.wilson_low),
                fmt_float(r.wilson_high),
                fmt_float(r.mean_rate_per_user),
                fmt_float(r.stderr_rate),
                fmt_float(r.sum_rate),
                fmt_float(r.mean_single_user_rate),
                fmt_float(r.perfect_csi_rate),
                fmt_float(r.lower_bound),
            )
            .unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// One row of the coherence-length sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceRow {
    pub coherence_symbols: f64,
    pub m_requested: usize,
    pub m_bs: usize,
    pub m_ms: usize,
    pub m_realized: usize,
    pub n_trials: usize,
    pub p_success: f64,
    pub mean_rate_per_user: f64,
    pub stderr_rate: f64,
    /// `mean_rate_per_user * max(0, 1 - m_realized / coherence_symbols)`.
    pub effective_rate: f64,
    /// Eq.-13-style analytic bound at this row's overhead; `nan` when the
    /// measured success probability misses the `1 - epsilon` target.
    pub analytic_bound: f64,
    /// Requested M maximizing the effective rate at this coherence length.
    pub best_m_for_lc: usize,
}

/// Coherence sweep output.
#[derive(Debug, Clone)]
pub struct CoherenceSweepTable {
    pub metadata: RunMetadata,
    pub rows: Vec<CoherenceRow>,
}

impl CoherenceSweepTable {
    pub const COLUMNS: [&'static str; 12] = [
        "coherence_symbols",
        "m_requested",
        "m_bs",
        "m_ms",
        "m_realized",
        "n_trials",
        "p_success",
        "mean_rate_per_user",
        "stderr_rate",
        "effective_rate",
        "analytic_bound",
        "best_m_for_lc",
    ];

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        self.metadata.write_preamble(&mut out);
        writeln!(out, "{}", Self::COLUMNS.join(",")).unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                fmt_float(r.coherence_symbols),
                r.m_requested,
                r.m_bs,
                r.m_ms,
                r.m_realized,
                r.n_trials,
                fmt_float(r.p_success),
                fmt_float(r.mean_rate_per_user),
                fmt_float(r.stderr_rate),
                fmt_float(r.effective_rate),
                fmt_float(r.analytic_bound),
                r.best_m_for_lc,
            )
            .unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// One point of the `M_eps` search curve.
#[derive(Debug, Clone, PartialEq)]
pub struct MEpsilonPoint {
    pub m_requested: usize,
    pub m_bs: usize,
    pub m_ms: usize,
    pub m_realized: usize,
    pub n_trials: usize,
    pub p_success: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

/// Result of the minimum-measurement search.
#[derive(Debug, Clone)]
pub struct MEpsilonSearch {
    pub metadata: RunMetadata,
    pub epsilon: f64,
    /// Realized training length of the first grid point reaching the target,
    /// if any.
    pub m_epsilon: Option<usize>,
    pub m_epsilon_requested: Option<usize>,
    pub curve: Vec<MEpsilonPoint>,
}

impl MEpsilonSearch {
    pub const COLUMNS: [&'static str; 8] = [
        "m_requested",
        "m_bs",
        "m_ms",
        "m_realized",
        "n_trials",
        "p_success",
        "wilson_low",
        "wilson_high",
    ];

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        self.metadata.write_preamble(&mut out);
        writeln!(out, "# epsilon = {}", fmt_float(self.epsilon)).unwrap();
        match self.m_epsilon {
            Some(m) => writeln!(out, "# m_epsilon = {m}").unwrap(),
            None => writeln!(out, "# m_epsilon = not-reached").unwrap(),
        }
        writeln!(out, "{}", Self::COLUMNS.join(",")).unwrap();
        for r in &self.curve {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.m_requested,
                r.m_bs,
                r.m_ms,
                r.m_realized,
                r.n_trials,
                fmt_float(r.p_success),
                fmt_float(r.wilson_low),
                fmt_float(r.wilson_high),
            )
            .unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}
