use crate::error::{Error, Result};
use crate::hilbert::{restricted_space_engineered, BasisLabel, Level};
use crate::model::AtomScheme;
use crate::observables::Observable;
use crate::operators::{collapse_operators, hamiltonian_restricted, liouvillian, DensityMatrix};

use super::{evolve, IntegratorSettings, Method};

/// rms of ln P − fit above which the decay is reported as non-exponential.
pub const RESIDUAL_THRESHOLD: f64 = 0.35;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayRegime {
    /// P_r falls through [0.1, 0.9] monotonically.
    Exponential,
    /// P_r revives after dropping below 0.1; the fit uses P_r + P_e.
    CoherentExchange,
    /// P_r never leaves the window start (ω = 0 or too slow to resolve).
    Frozen,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    /// Fitted rate of |r⟩ population loss (rad/µs).
    pub rate: f64,
    /// ω²κ/(ω² + κ²/4).
    pub gamma_est: f64,
    pub rms_residual: f64,
    pub regime: DecayRegime,
    /// True if the decay is not a clean exponential.
    pub flagged: bool,
}

pub fn adiabatic_estimate(omega_e: f64, kappa: f64) -> f64 {
    let w2 = omega_e * omega_e;
    w2 * kappa / (w2 + kappa * kappa / 4.0)
}

/// Samples from the first one at or below 0.9 up to the last one at or above 0.1.
fn window(p: &[f64]) -> Option<(usize, usize)> {
    let i0 = p.iter().position(|&x| x <= 0.9)?;
    let i1 = i0 + p[i0..].iter().position(|&x| x < 0.1).unwrap_or(p.len() - i0);
    (i1 > i0 + 2).then_some((i0, i1))
}

/// Least-squares ln P = −γ t through the origin; returns (γ, rms residual).
fn fit_through_origin(t: &[f64], p: &[f64]) -> (f64, f64) {
    let lp: Vec<f64> = p.iter().map(|x| x.ln()).collect();
    let b = t.iter().zip(&lp).map(|(a, b)| a * b).sum::<f64>() / t.iter().map(|a| a * a).sum::<f64>();
    let rms = (t.iter().zip(&lp).map(|(a, y)| (y - b * a).powi(2)).sum::<f64>() / t.len() as f64).sqrt();
    (-b, rms)
}

/// Decay of |r⟩ coupled by ω to |e⟩, which decays at κ to a sink.
pub fn fit_effective_decay(omega_e: f64, kappa: f64) -> Result<DecayFit> {
    if !(omega_e >= 0.0 && omega_e.is_finite()) {
        return Err(Error::validation("omega_E", "must be finite and >= 0"));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::validation("kappa", "must be finite and > 0"));
    }
    let gamma_est = adiabatic_estimate(omega_e, kappa);
    let scheme = AtomScheme::four_level(0.0, 0.0, omega_e, kappa);
    let space = restricted_space_engineered(1)?;
    let h = hamiltonian_restricted(&scheme, &space, None)?;
    let l = liouvillian(&h, &collapse_operators(&scheme, &space)?)?;
    let horizon = if gamma_est > 0.0 { 30.0 / gamma_est } else { 30.0 / kappa };
    let samples = 6000;
    let times: Vec<f64> = (0..=samples).map(|i| horizon * i as f64 / samples as f64).collect();
    let r = space.index_of(&BasisLabel::R(1)).expect("restricted basis has R_1");
    let traj = evolve(
        &l,
        &DensityMatrix::basis(space.dim(), r),
        &times,
        &IntegratorSettings::with_method(Method::Expm),
        &[Observable::level("r", &space, Level::R), Observable::level("e", &space, Level::E)],
    )?;
    let pr = traj.channel("r").unwrap();
    let pe = traj.channel("e").unwrap();
    let Some((_, i1)) = window(pr) else {
        return Ok(DecayFit {
            rate: 0.0,
            gamma_est,
            rms_residual: 0.0,
            regime: DecayRegime::Frozen,
            flagged: gamma_est > 0.0,
        });
    };
    let revives = pr[i1..].iter().any(|&x| x > 0.1);
    let (regime, series): (_, Vec<f64>) = if revives {
        (DecayRegime::CoherentExchange, pr.iter().zip(pe).map(|(a, b)| a + b).collect())
    } else {
        (DecayRegime::Exponential, pr.to_vec())
    };
    let (j0, j1) = window(&series).ok_or_else(|| Error::Numerical("survival never enters the fit window".into()))?;
    let (rate, rms) = fit_through_origin(&times[j0..j1], &series[j0..j1]);
    Ok(DecayFit {
        rate,
        gamma_est,
        rms_residual: rms,
        regime,
        flagged: revives || rms > RESIDUAL_THRESHOLD,
    })
}

/// Coupling ω giving adiabatic rate γ < κ: ω = √(γκ² / (4(κ − γ))).
pub fn omega_for_rate(gamma: f64, kappa: f64) -> Result<f64> {
    if !(gamma >= 0.0 && gamma < kappa) {
        return Err(Error::validation("gamma", "needs 0 <= gamma < kappa"));
    }
    Ok((gamma * kappa * kappa / (4.0 * (kappa - gamma))).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::mhz;

    #[test]
    fn estimate_closed_form() {
        let k = 5.0;
        assert!((adiabatic_estimate(k / 4.0, k) - k / 5.0).abs() < 1e-14);
        assert!((adiabatic_estimate(k / 2.0, k) - k / 2.0).abs() < 1e-14);
        assert_eq!(adiabatic_estimate(0.0, k), 0.0);
    }

    #[test]
    fn inverse_hits_targets() {
        let k = mhz(5.0);
        for (g, w) in [(k / 5.0, k / 4.0), (0.4 * k, k / 6f64.sqrt()), (k / 2.0, k / 2.0)] {
            let omega = omega_for_rate(g, k).unwrap();
            assert!((omega - w).abs() < 1e-12 * k);
            assert!((adiabatic_estimate(omega, k) - g).abs() < 1e-12 * k);
        }
        assert!(omega_for_rate(k, k).is_err());
    }

    #[test]
    fn weak_coupling_matches_estimate() {
        let k = mhz(5.0);
        let f = fit_effective_decay(k / 4.0, k).unwrap();
        assert_eq!(f.regime, DecayRegime::Exponential);
        assert!(!f.flagged);
        assert!((f.rate / (k / 5.0) - 1.0).abs() < 0.1, "{f:?}");
    }

    #[test]
    fn strong_coupling_saturates_at_half_kappa() {
        let f = fit_effective_decay(mhz(24.0), mhz(6.0)).unwrap();
        assert_eq!(f.regime, DecayRegime::CoherentExchange);
        assert!(f.flagged);
        assert!((f.rate / mhz(3.0) - 1.0).abs() < 0.15, "{f:?}");
    }

    #[test]
    fn no_coupling_no_decay() {
        let f = fit_effective_decay(0.0, 1.0).unwrap();
        assert_eq!(f.rate, 0.0);
        assert_eq!(f.regime, DecayRegime::Frozen);
        assert!(fit_effective_decay(-1.0, 1.0).is_err());
        assert!(fit_effective_decay(1.0, 0.0).is_err());
    }
}
