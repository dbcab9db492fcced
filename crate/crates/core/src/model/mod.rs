//! Physical description of a driven Rydberg ensemble: level scheme, drive
//! strengths, dissipation and pairwise interactions.
//!
//! Everything stored here is in the internal unit system: angular frequency
//! in rad/µs and time in µs. User-facing values (ν = ω/2π in MHz or kHz) are
//! converted at the boundary by [`mhz`] / [`khz`] and back by [`to_mhz`].

mod config;

pub use config::{
    denormalize, normalize_units, BlockadeMode, CrossSpec, GeometrySpec, InitialState, ModelKind,
    ScenarioConfig, SweepAxis, TimeGrid,
};
pub(crate) use config::set_key;

use std::f64::consts::TAU;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// ν in MHz → ω in rad/µs.
pub fn mhz(nu: f64) -> f64 {
    nu * TAU
}

/// ν in kHz → ω in rad/µs.
pub fn khz(nu: f64) -> f64 {
    nu * TAU * 1e-3
}

/// ω in rad/µs → ν in MHz.
pub fn to_mhz(omega: f64) -> f64 {
    omega / TAU
}

/// How the decay of |r⟩ is produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RydbergDecay {
    /// |r⟩ only decays through its intrinsic rate.
    None,
    /// Three-level model: effective decay r → g at `gamma_r`.
    Direct { gamma_r: f64 },
    /// Four-level model: r couples resonantly to a short-lived |e⟩ at
    /// `omega_e`, and |e⟩ decays to |g⟩ at `kappa`.
    Engineered { omega_e: f64, kappa: f64 },
}

/// Which Rydberg levels are dephased.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DephasedLevels {
    R,
    S,
    Both,
}

/// Whether dephasing noise is independent per atom or common to the whole
/// ensemble (e.g. a fluctuating bias field shifting every Rydberg level alike).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DephasingCorrelation {
    PerAtom,
    Collective,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dephasing {
    pub levels: DephasedLevels,
    pub correlation: DephasingCorrelation,
}

impl Default for Dephasing {
    fn default() -> Self {
        Dephasing {
            levels: DephasedLevels::Both,
            correlation: DephasingCorrelation::PerAtom,
        }
    }
}

/// Single-atom level structure (g, r, s and optionally e) with drives and
/// dissipation. All values in rad/µs.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomScheme {
    /// Laser Rabi coupling g ↔ r.
    pub omega_r: f64,
    /// Microwave Rabi coupling r ↔ s.
    pub omega_m: f64,
    pub r_decay: RydbergDecay,
    /// Intrinsic decay s → g.
    pub gamma_s: f64,
    /// Intrinsic decay r → g.
    pub gamma_r_intrinsic: f64,
    /// Dephasing rate of the Rydberg levels.
    pub gamma_d: f64,
    pub dephasing: Dephasing,
    /// Optional per-atom multipliers on the engineered/direct decay of |r⟩,
    /// giving rates γ_k = factor_k · γ.
    pub decay_profile: Option<Vec<f64>>,
}

impl AtomScheme {
    /// Resonant three-level atom with effective decay `gamma_r` of |r⟩ and no
    /// other dissipation.
    pub fn three_level(omega_r: f64, omega_m: f64, gamma_r: f64) -> Self {
        AtomScheme {
            omega_r,
            omega_m,
            r_decay: if gamma_r > 0.0 {
                RydbergDecay::Direct { gamma_r }
            } else {
                RydbergDecay::None
            },
            gamma_s: 0.0,
            gamma_r_intrinsic: 0.0,
            gamma_d: 0.0,
            dephasing: Dephasing::default(),
            decay_profile: None,
        }
    }

    /// Four-level atom: |r⟩ coupled at `omega_e` to |e⟩, which decays at `kappa`.
    pub fn four_level(omega_r: f64, omega_m: f64, omega_e: f64, kappa: f64) -> Self {
        AtomScheme {
            r_decay: RydbergDecay::Engineered { omega_e, kappa },
            ..AtomScheme::three_level(omega_r, omega_m, 0.0)
        }
    }

    pub fn is_engineered(&self) -> bool {
        matches!(self.r_decay, RydbergDecay::Engineered { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let mut fields = vec![
            ("omega_R", self.omega_r),
            ("omega_M", self.omega_m),
            ("gamma_s", self.gamma_s),
            ("gamma_r_intrinsic", self.gamma_r_intrinsic),
            ("gamma_d", self.gamma_d),
        ];
        match self.r_decay {
            RydbergDecay::None => {}
            RydbergDecay::Direct { gamma_r } => fields.push(("gamma_r", gamma_r)),
            RydbergDecay::Engineered { omega_e, kappa } => {
                fields.push(("omega_E", omega_e));
                fields.push(("kappa", kappa));
            }
        }
        for (name, v) in fields {
            check_rate(name, v)?;
        }
        if let Some(profile) = &self.decay_profile {
            for &f in profile {
                check_rate("decay_profile", f)?;
            }
        }
        Ok(())
    }
}

fn check_rate(field: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::validation(field, format!("{v} is not finite")));
    }
    if v < 0.0 {
        return Err(Error::validation(field, format!("{v} is negative")));
    }
    Ok(())
}

/// Interaction between one pair of atoms in one channel (rr, ss or rs).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairCoupling {
    /// Finite strength in rad/µs.
    Finite(f64),
    /// Infinitely strong: the doubly excited states are removed from the basis.
    Perfect,
}

impl PairCoupling {
    pub fn value(self) -> Option<f64> {
        match self {
            PairCoupling::Finite(v) => Some(v),
            PairCoupling::Perfect => None,
        }
    }

    pub fn is_perfect(self) -> bool {
        matches!(self, PairCoupling::Perfect)
    }
}

/// Symmetric pairwise interaction table for one channel.
#[derive(Clone, Debug, PartialEq)]
pub struct PairTable {
    n: usize,
    entries: Vec<PairCoupling>,
}

impl PairTable {
    pub fn uniform(n: usize, coupling: PairCoupling) -> Self {
        let mut entries = vec![coupling; n * n];
        for i in 0..n {
            entries[i * n + i] = PairCoupling::Finite(0.0);
        }
        PairTable { n, entries }
    }

    pub fn zeros(n: usize) -> Self {
        Self::uniform(n, PairCoupling::Finite(0.0))
    }

    /// Table from an explicit symmetric matrix with zero diagonal.
    pub fn from_matrix(field: &str, m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::validation(field, "matrix is not square"));
        }
        for i in 0..n {
            if m[(i, i)] != 0.0 {
                return Err(Error::validation(field, "diagonal must be zero"));
            }
            for j in 0..n {
                let v = m[(i, j)];
                if !v.is_finite() {
                    return Err(Error::validation(field, "entries must be finite"));
                }
                if (v - m[(j, i)]).abs() > 1e-12 * v.abs().max(1.0) {
                    return Err(Error::validation(field, "matrix is not symmetric"));
                }
            }
        }
        let entries = (0..n * n)
            .map(|k| PairCoupling::Finite(m[(k / n, k % n)]))
            .collect();
        Ok(PairTable { n, entries })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> PairCoupling {
        self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, c: PairCoupling) {
        assert!(i != j, "diagonal pair entries are fixed at zero");
        self.entries[i * self.n + j] = c;
        self.entries[j * self.n + i] = c;
    }

    /// Finite values as a matrix; perfect entries read as +∞.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            self.get(i, j).value().unwrap_or(f64::INFINITY)
        })
    }
}

/// The three interaction channels between every pair of atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct PairCouplings {
    pub rr: PairTable,
    pub ss: PairTable,
    pub rs: PairTable,
}

impl PairCouplings {
    pub fn zeros(n: usize) -> Self {
        PairCouplings {
            rr: PairTable::zeros(n),
            ss: PairTable::zeros(n),
            rs: PairTable::zeros(n),
        }
    }

    pub fn uniform(n: usize, rr: PairCoupling, ss: PairCoupling, rs: PairCoupling) -> Self {
        PairCouplings {
            rr: PairTable::uniform(n, rr),
            ss: PairTable::uniform(n, ss),
            rs: PairTable::uniform(n, rs),
        }
    }

    pub fn atoms(&self) -> usize {
        self.rr.len()
    }
}

/// Interaction coefficients in rad/µs·µmⁿ, or explicit pair matrices in rad/µs.
#[derive(Clone, Debug, PartialEq)]
pub enum Interactions {
    Coefficients { c6_rr: f64, c6_ss: f64, c3_rs: f64 },
    Explicit {
        v_rr: DMatrix<f64>,
        v_ss: DMatrix<f64>,
        v_rs: DMatrix<f64>,
    },
}

/// Atom positions (µm) and the interaction law between them.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleGeometry {
    pub positions: Vec<[f64; 3]>,
    pub interactions: Interactions,
    /// Pairs treated as perfectly blockaded in every channel.
    pub perfect_pairs: Vec<(usize, usize)>,
}

impl EnsembleGeometry {
    pub fn atoms(&self) -> usize {
        match &self.interactions {
            Interactions::Explicit { v_rr, .. } if self.positions.is_empty() => v_rr.nrows(),
            _ => self.positions.len(),
        }
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Pairwise V_rr, V_ss (C₆/r⁶) and V_rs (C₃/r³), with `perfect_pairs` flagged
/// for basis exclusion instead of carrying a number.
pub fn pairwise_couplings(geometry: &EnsembleGeometry) -> Result<PairCouplings> {
    let n = geometry.atoms();
    let mut couplings = match &geometry.interactions {
        Interactions::Coefficients { c6_rr, c6_ss, c3_rs } => {
            for (name, c) in [("C6_rr", c6_rr), ("C6_ss", c6_ss), ("C3_rs", c3_rs)] {
                check_rate(name, *c)?;
            }
            let mut out = PairCouplings::zeros(n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let r = distance(&geometry.positions[i], &geometry.positions[j]);
                    if r <= 0.0 || !r.is_finite() {
                        return Err(Error::validation(
                            "positions_um",
                            format!("atoms {i} and {j} coincide; coupling is singular"),
                        ));
                    }
                    out.rr.set(i, j, PairCoupling::Finite(c6_rr / r.powi(6)));
                    out.ss.set(i, j, PairCoupling::Finite(c6_ss / r.powi(6)));
                    out.rs.set(i, j, PairCoupling::Finite(c3_rs / r.powi(3)));
                }
            }
            out
        }
        Interactions::Explicit { v_rr, v_ss, v_rs } => {
            let out = PairCouplings {
                rr: PairTable::from_matrix("V_rr", v_rr)?,
                ss: PairTable::from_matrix("V_ss", v_ss)?,
                rs: PairTable::from_matrix("V_rs", v_rs)?,
            };
            if out.ss.len() != n || out.rs.len() != n {
                return Err(Error::validation("V_ss", "pair matrices differ in size"));
            }
            out
        }
    };
    for &(i, j) in &geometry.perfect_pairs {
        if i >= n || j >= n || i == j {
            return Err(Error::validation(
                "perfect_pairs",
                format!("({i}, {j}) is not a pair of distinct atoms"),
            ));
        }
        couplings.rr.set(i, j, PairCoupling::Perfect);
        couplings.ss.set(i, j, PairCoupling::Perfect);
        couplings.rs.set(i, j, PairCoupling::Perfect);
    }
    Ok(couplings)
}

/// Van der Waals blockade radius (C₆/Ω_R)^(1/6), in the length unit of `c6`.
pub fn blockade_radius(c6: f64, omega_r: f64) -> Result<f64> {
    if !(c6 > 0.0) || !c6.is_finite() {
        return Err(Error::validation("C6_ss", "must be positive"));
    }
    if !(omega_r > 0.0) || !omega_r.is_finite() {
        return Err(Error::validation("omega_R", "must be positive"));
    }
    Ok((c6 / omega_r).powf(1.0 / 6.0))
}

/// C₆ (rad/µs·µm⁶) reproducing interaction `v` (rad/µs) at distance `r` (µm).
pub fn c6_from_value(v: f64, r: f64) -> f64 {
    v * r.powi(6)
}

/// C₃ (rad/µs·µm³) reproducing interaction `v` (rad/µs) at distance `r` (µm).
pub fn c3_from_value(v: f64, r: f64) -> f64 {
    v * r.powi(3)
}
