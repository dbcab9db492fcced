//! Time evolution, steady states and effective decay rates.

mod decay;
mod integrate;
mod steady;

pub use decay::{adiabatic_estimate, fit_effective_decay, omega_for_rate, DecayFit, DecayRegime, RESIDUAL_THRESHOLD};
pub use steady::{steady_state, SteadyState};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::observables::Observable;
use crate::operators::{DensityMatrix, Liouvillian, C64};

/// Integration scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    /// Dormand–Prince 5(4) with PI step control.
    Adaptive,
    /// exp(L Δt) between output times (dense superoperator).
    Expm,
    /// Classical fourth-order Runge–Kutta with step at most `dt` µs.
    Rk4 { dt: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorSettings {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    /// µs; infinite means unbounded.
    pub max_step: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            method: Method::Adaptive,
            rtol: 1e-8,
            atol: 1e-10,
            max_step: f64::INFINITY,
        }
    }
}

impl IntegratorSettings {
    pub fn with_method(method: Method) -> Self {
        IntegratorSettings {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0) {
            return Err(Error::validation("rtol", "must be > 0"));
        }
        if !(self.atol > 0.0) {
            return Err(Error::validation("atol", "must be > 0"));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::validation("max_step_us", "must be > 0"));
        }
        if let Method::Rk4 { dt } = self.method {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::validation("fixed_step_us", "must be a positive step"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IntegratorStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    /// Matrix exponentials computed.
    pub propagators: usize,
}

/// Validity diagnostics of a density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDiagnostics {
    /// |Tr ρ − 1|
    pub trace_error: f64,
    /// max |ρ − ρ†|
    pub hermiticity_error: f64,
    /// Smallest eigenvalue of (ρ + ρ†)/2.
    pub min_eigenvalue: f64,
}

impl StateDiagnostics {
    pub fn is_valid(&self) -> bool {
        self.trace_error < 1e-8 && self.hermiticity_error < 1e-10 && self.min_eigenvalue > -1e-9
    }

    /// Elementwise worst of two records.
    pub fn worst(self, other: StateDiagnostics) -> StateDiagnostics {
        StateDiagnostics {
            trace_error: self.trace_error.max(other.trace_error),
            hermiticity_error: self.hermiticity_error.max(other.hermiticity_error),
            min_eigenvalue: self.min_eigenvalue.min(other.min_eigenvalue),
        }
    }
}

pub fn validate_state(rho: &DensityMatrix) -> StateDiagnostics {
    let m = rho.matrix();
    let adj = m.adjoint();
    let hermiticity_error = (m - &adj).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let h = (m + adj) * C64::new(0.5, 0.0);
    let min_eigenvalue = if h.nrows() == 0 {
        0.0
    } else {
        h.symmetric_eigenvalues().min()
    };
    StateDiagnostics {
        trace_error: (rho.trace() - C64::new(1.0, 0.0)).norm(),
        hermiticity_error,
        min_eigenvalue,
    }
}

/// Observable records sampled on an output grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// values[c][i]: channel c at times[i].
    pub values: Vec<Vec<f64>>,
    /// State diagnostics before symmetrization, one per output time.
    pub diagnostics: Vec<StateDiagnostics>,
    pub final_state: DensityMatrix,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i].as_slice())
    }

    /// Value of `name` at the output time closest to `t`.
    pub fn value_at(&self, name: &str, t: f64) -> Option<f64> {
        let c = self.channel(name)?;
        let i = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        Some(c[i])
    }

    pub fn worst_diagnostics(&self) -> Option<StateDiagnostics> {
        self.diagnostics.iter().copied().reduce(StateDiagnostics::worst)
    }
}

fn check_inputs(l: &Liouvillian, rho0: &DensityMatrix, times: &[f64]) -> Result<()> {
    if rho0.dim() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            found: rho0.dim(),
        });
    }
    let diag = validate_state(rho0);
    if !diag.is_valid() {
        return Err(Error::validation(
            "rho0",
            format!(
                "not a density matrix (trace error {:.2e}, hermiticity error {:.2e}, min eigenvalue {:.2e})",
                diag.trace_error, diag.hermiticity_error, diag.min_eigenvalue
            ),
        ));
    }
    if times.is_empty() {
        return Err(Error::validation("times", "empty output grid"));
    }
    if times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::validation("times", "must be finite, non-negative and strictly increasing"));
    }
    Ok(())
}

/// Integrate from `rho0` (taken at `times[0]`) and call `visit` with each
/// output time's state. The state handed to `visit` is the raw integrator
/// state; integration continues from its Hermitian part.
pub fn propagate<F>(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    times: &[f64],
    settings: &IntegratorSettings,
    mut visit: F,
) -> Result<IntegratorStats>
where
    F: FnMut(usize, &DensityMatrix) -> Result<()>,
{
    settings.validate()?;
    check_inputs(l, rho0, times)?;
    let mut stats = IntegratorStats::default();
    let mut rho = rho0.matrix().clone();
    let mut stepper = integrate::Stepper::new(l, settings)?;
    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            stepper.advance(&mut rho, times[i - 1], t, &mut stats)?;
        }
        let raw = DensityMatrix::from_matrix(rho)?;
        visit(i, &raw)?;
        rho = hermitian_part(raw.into_matrix());
    }
    Ok(stats)
}

fn hermitian_part(m: DMatrix<C64>) -> DMatrix<C64> {
    let adj = m.adjoint();
    (m + adj) * C64::new(0.5, 0.0)
}

/// Evolve and record `observables` plus state diagnostics at every output
/// time. Observables see the symmetrized state.
pub fn evolve(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    times: &[f64],
    settings: &IntegratorSettings,
    observables: &[Observable],
) -> Result<Trajectory> {
    for o in observables {
        if let Some(d) = o.dim() {
            if d != l.dim() {
                return Err(Error::DimensionMismatch {
                    expected: l.dim(),
                    found: d,
                });
            }
        }
    }
    let mut values = vec![Vec::with_capacity(times.len()); observables.len()];
    let mut diagnostics = Vec::with_capacity(times.len());
    let mut last = None;
    let stats = propagate(l, rho0, times, settings, |_, raw| {
        diagnostics.push(validate_state(raw));
        let sym = DensityMatrix::from_matrix(hermitian_part(raw.matrix().clone()))?;
        for (o, v) in observables.iter().zip(values.iter_mut()) {
            let x = o.evaluate(&sym)?;
            if !x.is_finite() {
                return Err(Error::Numerical(format!("observable {} is not finite", o.name)));
            }
            v.push(x);
        }
        last = Some(sym);
        Ok(())
    })?;
    Ok(Trajectory {
        times: times.to_vec(),
        names: observables.iter().map(|o| o.name.clone()).collect(),
        values,
        diagnostics,
        final_state: last.expect("at least one output time"),
        stats,
    })
}

/// Symmetrized states at every output time.
pub fn evolve_states(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    times: &[f64],
    settings: &IntegratorSettings,
) -> Result<Vec<DensityMatrix>> {
    let mut out = Vec::with_capacity(times.len());
    propagate(l, rho0, times, settings, |_, raw| {
        out.push(DensityMatrix::from_matrix(hermitian_part(raw.matrix().clone()))?);
        Ok(())
    })?;
    Ok(out)
}
