//! Scalar observables evaluated on density matrices at output times.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{symmetric_states, HilbertSpace, Level, SpaceKind};
use crate::operators::{dark_state, DensityMatrix, StateVector, C64};

/// What an [`Observable`] measures.
#[derive(Clone, Debug, PartialEq)]
pub enum ObservableKind {
    /// ⟨ψ|ρ|ψ⟩ for a fixed target such as the dark state.
    ProjectorPopulation(StateVector),
    /// Tr ρ².
    Purity,
    /// ⟨ψ|ρ|ψ⟩ read as a fidelity with a pure reference state.
    PureStateFidelity(StateVector),
    /// Σ_i w_i ρ_ii with w_i the number of atoms of basis state i in a level.
    LevelPopulation(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub name: String,
    pub kind: ObservableKind,
}

impl Observable {
    pub fn projector(name: impl Into<String>, psi: StateVector) -> Self {
        Observable {
            name: name.into(),
            kind: ObservableKind::ProjectorPopulation(psi),
        }
    }

    pub fn purity() -> Self {
        Observable {
            name: "purity".into(),
            kind: ObservableKind::Purity,
        }
    }

    pub fn fidelity(name: impl Into<String>, psi: StateVector) -> Self {
        Observable {
            name: name.into(),
            kind: ObservableKind::PureStateFidelity(psi),
        }
    }

    pub fn level(name: impl Into<String>, space: &HilbertSpace, level: Level) -> Self {
        Observable {
            name: name.into(),
            kind: ObservableKind::LevelPopulation(level_weights(space, level)),
        }
    }

    /// Dimension the observable expects, if it fixes one.
    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            ObservableKind::ProjectorPopulation(p) | ObservableKind::PureStateFidelity(p) => Some(p.dim()),
            ObservableKind::LevelPopulation(w) => Some(w.len()),
            ObservableKind::Purity => None,
        }
    }

    pub fn evaluate(&self, rho: &DensityMatrix) -> Result<f64> {
        if let Some(d) = self.dim() {
            check_dim(d, rho)?;
        }
        Ok(match &self.kind {
            ObservableKind::ProjectorPopulation(psi) | ObservableKind::PureStateFidelity(psi) => {
                overlap(rho.matrix(), psi)
            }
            ObservableKind::Purity => purity(rho),
            ObservableKind::LevelPopulation(w) => w
                .iter()
                .enumerate()
                .map(|(i, &x)| x * rho.matrix()[(i, i)].re)
                .sum(),
        })
    }
}

fn check_dim(expected: usize, rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: rho.dim(),
        });
    }
    Ok(())
}

fn overlap(rho: &DMatrix<C64>, psi: &StateVector) -> f64 {
    let v = psi.amplitudes();
    v.dotc(&(rho * v)).re
}

fn level_weights(space: &HilbertSpace, level: Level) -> Vec<f64> {
    space
        .configs()
        .map(|c| c.iter().filter(|&&l| l == level).count() as f64)
        .collect()
}

/// ⟨ψ_D|ρ|ψ_D⟩.
pub fn dark_state_population(rho: &DensityMatrix, psi_d: &StateVector) -> Result<f64> {
    check_dim(psi_d.dim(), rho)?;
    Ok(overlap(rho.matrix(), psi_d))
}

/// Tr ρ², computed as Σ|ρ_ij|² (valid for Hermitian ρ).
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.matrix().iter().map(|z| z.norm_sqr()).sum()
}

/// Population of the collective |S⟩ = N^(-1/2) Σ_k |S_k⟩.
pub fn w_state_population(rho: &DensityMatrix, space: &HilbertSpace) -> Result<f64> {
    check_dim(space.dim(), rho)?;
    let (_, w) = symmetric_states(space)?;
    Ok(overlap(rho.matrix(), &w))
}

/// Overlap with the dark state of all 2N atoms of a composite space.
pub fn composite_dark_population(rho: &DensityMatrix, space: &HilbertSpace, omega_r: f64, omega_m: f64) -> Result<f64> {
    if !matches!(space.kind(), SpaceKind::Composite { .. }) {
        return Err(Error::IncompatibleSpace("expected a composite space".into()));
    }
    check_dim(space.dim(), rho)?;
    let psi = dark_state(space, omega_r, omega_m)?;
    Ok(overlap(rho.matrix(), &psi))
}

/// Expected number of atoms in `level`.
pub fn level_population(rho: &DensityMatrix, space: &HilbertSpace, level: Level) -> Result<f64> {
    Observable::level("", space, level).evaluate(rho)
}

/// First sample at which `values` exceeds `threshold`.
pub fn first_crossing(times: &[f64], values: &[f64], threshold: f64) -> Option<f64> {
    times.iter().zip(values).find(|(_, &v)| v > threshold).map(|(&t, _)| t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{composite_space, restricted_space};

    #[test]
    fn dark_state_examples() {
        let s1 = restricted_space(1).unwrap();
        let psi = dark_state(&s1, 1.0, 1.0).unwrap();
        assert!((dark_state_population(&psi.projector(), &psi).unwrap() - 1.0).abs() < 1e-15);
        let g = DensityMatrix::basis(3, 0);
        assert!((dark_state_population(&g, &psi).unwrap() - 0.5).abs() < 1e-15);
        assert!(dark_state_population(&DensityMatrix::basis(4, 0), &psi).is_err());
    }

    #[test]
    fn complement_sums_to_one() {
        let sp = restricted_space(3).unwrap();
        let psi = dark_state(&sp, 0.7, 1.3).unwrap();
        let rho = DensityMatrix::maximally_mixed(sp.dim());
        let p = dark_state_population(&rho, &psi).unwrap();
        let id = DMatrix::<C64>::identity(sp.dim(), sp.dim());
        let q = (rho.matrix() * (id - psi.projector().matrix())).trace().re;
        assert!((p + q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn purity_examples() {
        let sp = restricted_space(2).unwrap();
        assert!((purity(&dark_state(&sp, 1.0, 2.0).unwrap().projector()) - 1.0).abs() < 1e-15);
        assert!((purity(&DensityMatrix::maximally_mixed(5)) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn w_state_examples() {
        let n = 20;
        let sp = restricted_space(n).unwrap();
        let (_, w) = symmetric_states(&sp).unwrap();
        assert!((w_state_population(&w.projector(), &sp).unwrap() - 1.0).abs() < 1e-12);
        let psi = dark_state(&sp, 1.0, (n as f64).sqrt()).unwrap();
        let rho = psi.projector();
        let pw = w_state_population(&rho, &sp).unwrap();
        let pg = rho.matrix()[(0, 0)].re;
        assert!((pw - 0.5).abs() < 1e-12);
        assert!((pw - pg).abs() < 1e-12);
    }

    #[test]
    fn composite_ground_overlap() {
        let r3 = restricted_space(3).unwrap();
        let c = composite_space(&r3, &r3).unwrap();
        let g = DensityMatrix::basis(c.dim(), c.ground_index().unwrap());
        let (or, om) = (1.0, 2.0);
        let expect = om * om / (om * om + 6.0 * or * or);
        assert!((composite_dark_population(&g, &c, or, om).unwrap() - expect).abs() < 1e-14);
        assert!(composite_dark_population(&DensityMatrix::basis(7, 0), &r3, or, om).is_err());
    }

    #[test]
    fn level_populations() {
        let sp = restricted_space(2).unwrap();
        let rho = DensityMatrix::maximally_mixed(5);
        assert!((level_population(&rho, &sp, Level::R).unwrap() - 0.4).abs() < 1e-15);
        assert!((level_population(&rho, &sp, Level::G).unwrap() - 1.2).abs() < 1e-15);
        assert_eq!(first_crossing(&[0.0, 1.0, 2.0], &[0.1, 0.5, 0.995], 0.99), Some(2.0));
        assert_eq!(first_crossing(&[0.0], &[0.1], 0.99), None);
    }
}
