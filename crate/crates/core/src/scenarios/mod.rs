//! Pre-registered runs for each figure and quoted number, plus the generic
//! config-driven run, steady-state solve and sweep.

mod figures;
mod model;
mod sweep;
mod table;

pub use figures::{
    figure_settings, hybrid_space,
    fig4_couplings, run_fig2, run_fig2_inset, run_fig3, run_fig4, run_full_vs_restricted, run_realistic_n20,
    Fig2Params, Fig3Params, Fig4Params, FullVsRestrictedParams, InsetParams, N20Variant, RealisticParams,
};
pub use model::{run_config, run_steady, Model};
pub use sweep::{sweep, sweep_cells};
pub use table::{Cell, Table};

use toml::Table as Doc;

use crate::dynamics::{IntegratorStats, StateDiagnostics};

/// Everything a scenario produced.
#[derive(Clone, Debug)]
pub struct ScenarioResult {
    pub id: String,
    /// Resolved parameters in user-facing units; enough to re-run.
    pub parameters: Doc,
    pub tables: Vec<Table>,
    /// Headline numbers (name, value).
    pub summary: Vec<(String, f64)>,
    pub notes: Vec<String>,
    pub stats: IntegratorStats,
    /// Worst state diagnostics over every output time of every run.
    pub diagnostics: Option<StateDiagnostics>,
    pub wall_time_s: f64,
}

impl ScenarioResult {
    pub(crate) fn new(id: impl Into<String>, parameters: Doc) -> Self {
        ScenarioResult {
            id: id.into(),
            parameters,
            tables: Vec::new(),
            summary: Vec::new(),
            notes: Vec::new(),
            stats: IntegratorStats::default(),
            diagnostics: None,
            wall_time_s: 0.0,
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary_value(&self, name: &str) -> Option<f64> {
        self.summary.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub(crate) fn absorb(&mut self, stats: IntegratorStats, diag: Option<StateDiagnostics>) {
        self.stats.accepted_steps += stats.accepted_steps;
        self.stats.rejected_steps += stats.rejected_steps;
        self.stats.rhs_evaluations += stats.rhs_evaluations;
        self.stats.propagators += stats.propagators;
        self.diagnostics = match (self.diagnostics, diag) {
            (Some(a), Some(b)) => Some(a.worst(b)),
            (a, b) => a.or(b),
        };
    }
}
