//! Label-wise assembly of Hamiltonians and jump operators.
//!
//! Each builder walks the basis configurations of a space and connects a
//! state to every image that is itself present in the basis. States removed
//! by blockade are therefore never reached, which is how "perfect" couplings
//! enter without ever appearing as numbers.

use nalgebra::{DMatrix, DVector};

use super::{CsrMatrix, LindbladChannel, QOperator, Representation, StateVector, C64};
use crate::error::{Error, Result};
use crate::hilbert::{HilbertSpace, Level, SpaceKind};
use crate::model::{AtomScheme, DephasedLevels, DephasingCorrelation, PairCoupling, PairCouplings, RydbergDecay};

/// Interactions between the two ensembles of a composite space, indexed
/// (left atom, right atom). Values in rad/µs.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossCouplings {
    pub rr: DMatrix<f64>,
    pub ss: DMatrix<f64>,
    pub rs: DMatrix<f64>,
}

impl CrossCouplings {
    pub fn uniform(left: usize, right: usize, v_rr: f64, v_ss: f64, v_rs: f64) -> Self {
        CrossCouplings {
            rr: DMatrix::from_element(left, right, v_rr),
            ss: DMatrix::from_element(left, right, v_ss),
            rs: DMatrix::from_element(left, right, v_rs),
        }
    }

    fn to_pair_couplings(&self, left: usize, right: usize) -> Result<PairCouplings> {
        for m in [&self.rr, &self.ss, &self.rs] {
            if m.shape() != (left, right) {
                return Err(Error::DimensionMismatch {
                    expected: left * right,
                    found: m.len(),
                });
            }
        }
        let mut out = PairCouplings::zeros(left + right);
        for i in 0..left {
            for j in 0..right {
                out.rr.set(i, left + j, PairCoupling::Finite(self.rr[(i, j)]));
                out.ss.set(i, left + j, PairCoupling::Finite(self.ss[(i, j)]));
                out.rs.set(i, left + j, PairCoupling::Finite(self.rs[(i, j)]));
            }
        }
        Ok(out)
    }
}

fn r(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn check_levels(scheme: &AtomScheme, space: &HilbertSpace) -> Result<()> {
    let has_e = match space.kind() {
        SpaceKind::Full { levels } | SpaceKind::Truncated { levels } => levels == 4,
        SpaceKind::Restricted { engineered } => engineered,
        SpaceKind::Composite { .. } => false,
    };
    match (scheme.is_engineered(), has_e) {
        (true, false) => Err(Error::IncompatibleSpace(
            "the atom scheme has an engineered |e> level but the space has none".into(),
        )),
        (false, true) => Err(Error::IncompatibleSpace(
            "the space has an |e> level but the atom scheme sets no omega_E/kappa".into(),
        )),
        _ => Ok(()),
    }
}

fn assemble(scheme: &AtomScheme, couplings: &PairCouplings, space: &HilbertSpace) -> Result<QOperator> {
    let n = space.atoms();
    if couplings.atoms() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: couplings.atoms(),
        });
    }
    let omega_e = match scheme.r_decay {
        RydbergDecay::Engineered { omega_e, .. } => omega_e,
        _ => 0.0,
    };
    let mut triplets = Vec::new();
    let mut target = vec![Level::G; n];
    for i in 0..space.dim() {
        let c = space.config(i);
        // Drives, visited from the lower level so each pair is seen once.
        for k in 0..n {
            let (upper, strength) = match c[k] {
                Level::G => (Level::R, scheme.omega_r),
                Level::R => (Level::S, scheme.omega_m),
                _ => continue,
            };
            let mut push = |upper: Level, strength: f64| {
                if strength == 0.0 {
                    return;
                }
                target.copy_from_slice(c);
                target[k] = upper;
                if let Some(j) = space.index_of_config(&target) {
                    triplets.push((i, j, r(strength)));
                    triplets.push((j, i, r(strength)));
                }
            };
            push(upper, strength);
            if c[k] == Level::R {
                push(Level::E, omega_e);
            }
        }
        // Van der Waals shifts and resonant exchange.
        let mut shift = 0.0;
        for a in 0..n {
            for b in (a + 1)..n {
                let (table, exchange) = match (c[a], c[b]) {
                    (Level::R, Level::R) => (&couplings.rr, false),
                    (Level::S, Level::S) => (&couplings.ss, false),
                    (Level::R, Level::S) | (Level::S, Level::R) => (&couplings.rs, true),
                    _ => continue,
                };
                let v = match table.get(a, b) {
                    PairCoupling::Finite(v) => v,
                    PairCoupling::Perfect => {
                        return Err(Error::IncompatibleSpace(format!(
                            "basis state {} doubly excites the perfectly blockaded pair ({}, {}); \
                             exclude it with HilbertSpace::blockaded",
                            space.label(i),
                            a + 1,
                            b + 1
                        )))
                    }
                };
                if v == 0.0 {
                    continue;
                }
                if exchange {
                    target.copy_from_slice(c);
                    target.swap(a, b);
                    if let Some(j) = space.index_of_config(&target) {
                        triplets.push((i, j, r(v)));
                    }
                } else {
                    shift += v;
                }
            }
        }
        if shift != 0.0 {
            triplets.push((i, i, r(shift)));
        }
    }
    let m = CsrMatrix::from_triplets(space.dim(), space.dim(), &triplets);
    QOperator::from_csr(m, Representation::default()).into_hermitian()
}

/// Full N-atom Hamiltonian: single-atom drives (plus the r↔e coupling for a
/// four-level scheme), van der Waals shifts V_rr, V_ss and the resonant
/// exchange V_rs |r_i s_j⟩⟨s_i r_j| + h.c. Rotating frame, zero detunings.
pub fn hamiltonian_full(scheme: &AtomScheme, couplings: &PairCouplings, space: &HilbertSpace) -> Result<QOperator> {
    if !matches!(space.kind(), SpaceKind::Full { .. } | SpaceKind::Truncated { .. }) {
        return Err(Error::IncompatibleSpace("hamiltonian_full needs a product space".into()));
    }
    check_levels(scheme, space)?;
    assemble(scheme, couplings, space)
}

/// Effective Hamiltonian on the single-excitation space,
/// Σ_k (Ω_R|G⟩⟨R_k| + Ω_M|R_k⟩⟨S_k| + h.c.). On a composite space each
/// ensemble gets its own copy and `cross` adds the finite inter-ensemble
/// V_ss shift and V_rs exchange.
pub fn hamiltonian_restricted(
    scheme: &AtomScheme,
    space: &HilbertSpace,
    cross: Option<&CrossCouplings>,
) -> Result<QOperator> {
    let couplings = match (space.kind(), cross) {
        (SpaceKind::Restricted { .. }, _) => {
            check_levels(scheme, space)?;
            PairCouplings::zeros(space.atoms())
        }
        (SpaceKind::Composite { left, right }, Some(cross)) => {
            if scheme.is_engineered() {
                return Err(Error::IncompatibleSpace(
                    "composite spaces carry no |e> level".into(),
                ));
            }
            cross.to_pair_couplings(left, right)?
        }
        (SpaceKind::Composite { .. }, None) => {
            return Err(Error::Config("a composite space needs cross couplings".into()))
        }
        _ => {
            return Err(Error::IncompatibleSpace(
                "hamiltonian_restricted needs a restricted or composite space".into(),
            ))
        }
    };
    assemble(scheme, &couplings, space)
}

/// (Ω_M|G⟩ − Ω_R Σ_k|S_k⟩)/Ω_N with Ω_N = √(Ω_M² + N Ω_R²), N = every atom
/// in the space (both ensembles for a composite).
pub fn dark_state(space: &HilbertSpace, omega_r: f64, omega_m: f64) -> Result<StateVector> {
    if omega_r == 0.0 && omega_m == 0.0 {
        return Err(Error::validation(
            "omega_R",
            "the dark state is undefined when both drives vanish",
        ));
    }
    let n = space.atoms();
    let omega_n = (omega_m * omega_m + n as f64 * omega_r * omega_r).sqrt();
    let mut v = DVector::zeros(space.dim());
    let g = space
        .ground_index()
        .ok_or_else(|| Error::IncompatibleSpace("space has no ground state".into()))?;
    v[g] = r(omega_m / omega_n);
    let mut c = vec![Level::G; n];
    for k in 0..n {
        c[k] = Level::S;
        let i = space
            .index_of_config(&c)
            .ok_or_else(|| Error::IncompatibleSpace(format!("space has no |S_{}> state", k + 1)))?;
        v[i] = r(-omega_r / omega_n);
        c[k] = Level::G;
    }
    StateVector::new(v)
}

/// Σ over basis states with atom `k` in `from` of |…to_k…⟩⟨…from_k…|.
fn transition(space: &HilbertSpace, k: usize, from: Level, to: Level, amp: f64) -> CsrMatrix {
    let mut t = Vec::new();
    let mut target = vec![Level::G; space.atoms()];
    for i in 0..space.dim() {
        let c = space.config(i);
        if c[k] != from {
            continue;
        }
        target.copy_from_slice(c);
        target[k] = to;
        if let Some(j) = space.index_of_config(&target) {
            t.push((j, i, r(amp)));
        }
    }
    CsrMatrix::from_triplets(space.dim(), space.dim(), &t)
}

/// Projector onto basis states with any atom in `atoms` at `level`, counted
/// once per such atom.
fn level_projector(space: &HilbertSpace, atoms: &[usize], level: Level, amp: f64) -> CsrMatrix {
    let t: Vec<_> = (0..space.dim())
        .filter_map(|i| {
            let count = atoms.iter().filter(|&&k| space.config(i)[k] == level).count();
            (count > 0).then(|| (i, i, r(amp * count as f64)))
        })
        .collect();
    CsrMatrix::from_triplets(space.dim(), space.dim(), &t)
}

/// Jump operators for every enabled dissipation process. Zero rates and
/// operators with no support in the space are omitted.
pub fn collapse_operators(scheme: &AtomScheme, space: &HilbertSpace) -> Result<Vec<LindbladChannel>> {
    scheme.validate()?;
    let n = space.atoms();
    let has_e = space.has_level(Level::E);
    let profile = match &scheme.decay_profile {
        Some(p) if p.len() != n => {
            return Err(Error::validation(
                "decay_profile",
                format!("has {} entries for {n} atoms", p.len()),
            ))
        }
        Some(p) => p.clone(),
        None => vec![1.0; n],
    };
    let mut out = Vec::new();
    let mut push = |name: String, op: CsrMatrix| -> Result<()> {
        if op.nnz() > 0 {
            out.push(LindbladChannel::new(name, op)?);
        }
        Ok(())
    };
    match scheme.r_decay {
        RydbergDecay::None => {}
        RydbergDecay::Direct { gamma_r } => {
            if has_e {
                return Err(Error::IncompatibleSpace(
                    "a direct gamma_r decay cannot be combined with an |e> level".into(),
                ));
            }
            for k in 0..n {
                let rate = gamma_r * profile[k];
                if rate > 0.0 {
                    push(format!("decay_r[{}]", k + 1), transition(space, k, Level::R, Level::G, rate.sqrt()))?;
                }
            }
        }
        RydbergDecay::Engineered { kappa, .. } => {
            if !has_e {
                return Err(Error::Config(
                    "engineered decay needs a space with the |e> level (or set a direct gamma_r)".into(),
                ));
            }
            for k in 0..n {
                let rate = kappa * profile[k];
                if rate > 0.0 {
                    push(format!("kappa[{}]", k + 1), transition(space, k, Level::E, Level::G, rate.sqrt()))?;
                }
            }
        }
    }
    for k in 0..n {
        if scheme.gamma_r_intrinsic > 0.0 {
            push(
                format!("gamma_r[{}]", k + 1),
                transition(space, k, Level::R, Level::G, scheme.gamma_r_intrinsic.sqrt()),
            )?;
        }
        if scheme.gamma_s > 0.0 {
            push(
                format!("gamma_s[{}]", k + 1),
                transition(space, k, Level::S, Level::G, scheme.gamma_s.sqrt()),
            )?;
        }
    }
    if scheme.gamma_d > 0.0 {
        let amp = (2.0 * scheme.gamma_d).sqrt();
        let levels: &[Level] = match scheme.dephasing.levels {
            DephasedLevels::R => &[Level::R],
            DephasedLevels::S => &[Level::S],
            DephasedLevels::Both => &[Level::R, Level::S],
        };
        for &level in levels {
            let tag = level.symbol();
            match scheme.dephasing.correlation {
                DephasingCorrelation::PerAtom => {
                    for k in 0..n {
                        push(format!("dephase_{tag}[{}]", k + 1), level_projector(space, &[k], level, amp))?;
                    }
                }
                DephasingCorrelation::Collective => {
                    let all: Vec<usize> = (0..n).collect();
                    push(format!("dephase_{tag}[all]"), level_projector(space, &all, level, amp))?;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{composite_space, full_space, restricted_space, restricted_space_engineered, BasisLabel};
    use crate::model::{mhz, PairCouplings};
    use proptest::prelude::*;

    fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
        a.kronecker(b)
    }

    /// Single-atom 3-level Hamiltonian in the g, r, s basis.
    fn h1(omega_r: f64, omega_m: f64) -> DMatrix<C64> {
        let mut h = DMatrix::zeros(3, 3);
        h[(0, 1)] = r(omega_r);
        h[(1, 0)] = r(omega_r);
        h[(1, 2)] = r(omega_m);
        h[(2, 1)] = r(omega_m);
        h
    }

    fn proj(i: usize, j: usize) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(3, 3);
        m[(i, j)] = r(1.0);
        m
    }

    /// Full Hamiltonian from explicit Kronecker products, independent of the
    /// label-wise builder.
    fn kron_hamiltonian(n: usize, omega_r: f64, omega_m: f64, v: &[(usize, usize, f64, f64, f64)]) -> DMatrix<C64> {
        let id = DMatrix::<C64>::identity(3, 3);
        let embed = |ops: &[(usize, DMatrix<C64>)]| {
            let mut acc = DMatrix::<C64>::identity(1, 1);
            for site in 0..n {
                let factor = ops.iter().find(|(k, _)| *k == site).map(|(_, m)| m.clone()).unwrap_or(id.clone());
                acc = kron(&acc, &factor);
            }
            acc
        };
        let d = 3usize.pow(n as u32);
        let mut h = DMatrix::zeros(d, d);
        for k in 0..n {
            h += embed(&[(k, h1(omega_r, omega_m))]);
        }
        for &(i, j, vrr, vss, vrs) in v {
            h += embed(&[(i, proj(1, 1)), (j, proj(1, 1))]) * r(vrr);
            h += embed(&[(i, proj(2, 2)), (j, proj(2, 2))]) * r(vss);
            // |r_i s_j⟩⟨s_i r_j| + h.c.
            h += embed(&[(i, proj(1, 2)), (j, proj(2, 1))]) * r(vrs);
            h += embed(&[(i, proj(2, 1)), (j, proj(1, 2))]) * r(vrs);
        }
        h
    }

    fn couplings(n: usize, v: &[(usize, usize, f64, f64, f64)]) -> PairCouplings {
        let mut c = PairCouplings::zeros(n);
        for &(i, j, vrr, vss, vrs) in v {
            c.rr.set(i, j, PairCoupling::Finite(vrr));
            c.ss.set(i, j, PairCoupling::Finite(vss));
            c.rs.set(i, j, PairCoupling::Finite(vrs));
        }
        c
    }

    #[test]
    fn single_atom_matrix() {
        let s = AtomScheme::three_level(1.3, 0.7, 0.0);
        let h = hamiltonian_full(&s, &PairCouplings::zeros(1), &full_space(1, 3).unwrap()).unwrap();
        assert_eq!(h.to_dense(), h1(1.3, 0.7));
        assert!(h.is_hermitian());
    }

    #[test]
    fn full_matches_kronecker_construction() {
        let v3 = [(0, 1, 3.0, 5.0, 7.0), (0, 2, 1.0, 2.0, 0.5), (1, 2, 11.0, 13.0, 17.0)];
        for (n, v) in [(2usize, &v3[..1]), (3, &v3[..])] {
            let s = AtomScheme::three_level(1.1, 0.9, 0.0);
            let h = hamiltonian_full(&s, &couplings(n, v), &full_space(n, 3).unwrap()).unwrap();
            let oracle = kron_hamiltonian(n, 1.1, 0.9, v);
            assert!((h.to_dense() - oracle).camax() < 1e-14);
        }
    }

    #[test]
    fn non_interacting_pair_is_a_sum() {
        let s = AtomScheme::three_level(0.4, 2.0, 0.0);
        let h = hamiltonian_full(&s, &PairCouplings::zeros(2), &full_space(2, 3).unwrap()).unwrap();
        let id = DMatrix::<C64>::identity(3, 3);
        let expect = kron(&h1(0.4, 2.0), &id) + kron(&id, &h1(0.4, 2.0));
        assert!((h.to_dense() - expect).camax() < 1e-15);
    }

    #[test]
    fn exchange_eigenstates() {
        let v = mhz(140.0);
        let s = AtomScheme::three_level(0.0, 0.0, 0.0);
        let space = full_space(2, 3).unwrap();
        let h = hamiltonian_full(&s, &couplings(2, &[(0, 1, 0.0, 0.0, v)]), &space).unwrap().to_dense();
        let rs = space.index_of_str("rs").unwrap();
        let sr = space.index_of_str("sr").unwrap();
        for sign in [1.0, -1.0] {
            let mut psi = DVector::<C64>::zeros(9);
            psi[sr] = r(1.0 / 2f64.sqrt());
            psi[rs] = r(sign / 2f64.sqrt());
            let hpsi = &h * &psi;
            assert!((hpsi - psi * r(sign * v)).camax() < 1e-12);
        }
    }

    #[test]
    fn restricted_is_the_effective_hamiltonian() {
        let n = 4;
        let (or, om) = (0.8, 1.7);
        let s = AtomScheme::three_level(or, om, 0.0);
        let h = hamiltonian_restricted(&s, &restricted_space(n).unwrap(), None).unwrap().to_dense();
        let mut expect = DMatrix::zeros(2 * n + 1, 2 * n + 1);
        for k in 1..=n {
            expect[(0, k)] = r(or);
            expect[(k, 0)] = r(or);
            expect[(k, n + k)] = r(om);
            expect[(n + k, k)] = r(om);
        }
        assert_eq!(h, expect);
    }

    #[test]
    fn restricted_single_atom_equals_full() {
        let s = AtomScheme::three_level(0.3, 0.6, 0.0);
        let a = hamiltonian_restricted(&s, &restricted_space(1).unwrap(), None).unwrap();
        let b = hamiltonian_full(&s, &PairCouplings::zeros(1), &full_space(1, 3).unwrap()).unwrap();
        assert_eq!(a.to_dense(), b.to_dense());
    }

    #[test]
    fn perfect_blockade_projection_equals_restricted() {
        for n in 1..=3 {
            let s = AtomScheme::three_level(1.0, 1.4, 0.0);
            let perfect = PairCouplings::uniform(n, PairCoupling::Perfect, PairCoupling::Perfect, PairCoupling::Perfect);
            let blockaded = full_space(n, 3).unwrap().blockaded(&perfect).unwrap();
            let hb = hamiltonian_full(&s, &perfect, &blockaded).unwrap().to_dense();
            let restricted = restricted_space(n).unwrap();
            let hr = hamiltonian_restricted(&s, &restricted, None).unwrap().to_dense();
            assert_eq!(blockaded.dim(), restricted.dim());
            let map: Vec<usize> = restricted.configs().map(|c| blockaded.index_of_config(c).unwrap()).collect();
            for i in 0..restricted.dim() {
                for j in 0..restricted.dim() {
                    assert_eq!(hr[(i, j)], hb[(map[i], map[j])]);
                }
            }
            // And against the Kronecker oracle restricted to the embedded basis.
            let full = full_space(n, 3).unwrap();
            let oracle = kron_hamiltonian(n, 1.0, 1.4, &[]);
            let emb: Vec<usize> = restricted.configs().map(|c| full.index_of_config(c).unwrap()).collect();
            for i in 0..restricted.dim() {
                for j in 0..restricted.dim() {
                    assert_eq!(hr[(i, j)], oracle[(emb[i], emb[j])]);
                }
            }
        }
    }

    #[test]
    fn perfect_pair_in_basis_is_an_error() {
        let s = AtomScheme::three_level(1.0, 1.0, 0.0);
        let perfect = PairCouplings::uniform(2, PairCoupling::Perfect, PairCoupling::Perfect, PairCoupling::Perfect);
        assert!(hamiltonian_full(&s, &perfect, &full_space(2, 3).unwrap()).is_err());
    }

    #[test]
    fn composite_without_cross_terms() {
        let s = AtomScheme::three_level(0.9, 1.2, 0.0);
        let r2 = restricted_space(2).unwrap();
        let c = composite_space(&r2, &r2).unwrap();
        let h = hamiltonian_restricted(&s, &c, Some(&CrossCouplings::uniform(2, 2, 0.0, 0.0, 0.0))).unwrap();
        let he = hamiltonian_restricted(&s, &r2, None).unwrap().to_dense();
        let id = DMatrix::<C64>::identity(5, 5);
        assert!((h.to_dense() - (kron(&he, &id) + kron(&id, &he))).camax() < 1e-15);
        assert!(hamiltonian_restricted(&s, &c, None).is_err());
    }

    #[test]
    fn composite_cross_terms() {
        let s = AtomScheme::three_level(0.0, 0.0, 0.0);
        let r2 = restricted_space(2).unwrap();
        let c = composite_space(&r2, &r2).unwrap();
        let h = hamiltonian_restricted(&s, &c, Some(&CrossCouplings::uniform(2, 2, 1.0, 2.0, 3.0))).unwrap().to_dense();
        let ss = c.index_of_str("(S_1,S_2)").unwrap();
        let rs = c.index_of_str("(R_1,S_2)").unwrap();
        let sr = c.index_of_str("(S_1,R_2)").unwrap();
        let rr = c.index_of_str("(R_2,R_1)").unwrap();
        assert_eq!(h[(ss, ss)], r(2.0));
        assert_eq!(h[(rr, rr)], r(1.0));
        assert_eq!(h[(rs, sr)], r(3.0));
        assert_eq!(h[(sr, rs)], r(3.0));
        assert_eq!(h[(rs, rs)], r(0.0));
    }

    #[test]
    fn four_level_adds_engineered_coupling() {
        let s = AtomScheme::four_level(1.0, 2.0, 3.0, 4.0);
        let sp = full_space(1, 4).unwrap();
        let h = hamiltonian_full(&s, &PairCouplings::zeros(1), &sp).unwrap().to_dense();
        assert_eq!(h[(1, 3)], r(3.0));
        assert_eq!(h[(3, 1)], r(3.0));
        assert!(hamiltonian_full(&s, &PairCouplings::zeros(1), &full_space(1, 3).unwrap()).is_err());
        let re = restricted_space_engineered(2).unwrap();
        let h = hamiltonian_restricted(&s, &re, None).unwrap().to_dense();
        assert_eq!(h[(re.index_of_str("R_2").unwrap(), re.index_of_str("E_2").unwrap())], r(3.0));
    }

    #[test]
    fn dark_state_examples() {
        let s1 = restricted_space(1).unwrap();
        let d = dark_state(&s1, 1.0, 1.0).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((d.amplitudes()[0] - r(h)).norm() < 1e-15);
        assert!((d.amplitudes()[2] - r(-h)).norm() < 1e-15);

        let s20 = restricted_space(20).unwrap();
        let d = dark_state(&s20, mhz(1.0), mhz(20f64.sqrt())).unwrap();
        let (_, w) = crate::hilbert::symmetric_states(&s20).unwrap();
        let overlap = w.amplitudes().dotc(d.amplitudes());
        assert!((d.amplitudes()[0].re - h).abs() < 1e-12);
        assert!((overlap.re + h).abs() < 1e-12);

        let g = dark_state(&s20, 0.0, 1.0).unwrap();
        assert_eq!(g.amplitudes()[0], r(1.0));
        assert!(dark_state(&s20, 0.0, 0.0).is_err());
    }

    #[test]
    fn collapse_examples() {
        let s = AtomScheme::three_level(mhz(1.0), mhz(1.0), mhz(2.0));
        let sp = restricted_space(2).unwrap();
        let ch = collapse_operators(&s, &sp).unwrap();
        assert_eq!(ch.len(), 2);
        let g = mhz(2.0).sqrt();
        for (k, c) in ch.iter().enumerate() {
            let d = c.op.to_dense();
            assert!((d[(0, 1 + k)].re - g).abs() < 1e-15);
            assert_eq!(c.op.nnz(), 1);
        }
        let quiet = AtomScheme::three_level(1.0, 1.0, 0.0);
        assert!(collapse_operators(&quiet, &sp).unwrap().is_empty());

        let mut single = s.clone();
        single.decay_profile = Some(vec![1.0, 0.0]);
        assert_eq!(collapse_operators(&single, &sp).unwrap().len(), 1);

        let eng = AtomScheme::four_level(1.0, 1.0, 1.0, 1.0);
        assert!(matches!(collapse_operators(&eng, &sp), Err(Error::Config(_))));
        let ch = collapse_operators(&eng, &full_space(2, 4).unwrap()).unwrap();
        assert_eq!(ch.len(), 2);
        assert_eq!(ch[0].op.nnz(), 4);
    }

    #[test]
    fn dephasing_channels() {
        let mut s = AtomScheme::three_level(1.0, 1.0, 0.0);
        s.gamma_d = 0.5;
        let sp = restricted_space(3).unwrap();
        assert_eq!(collapse_operators(&s, &sp).unwrap().len(), 6);
        s.dephasing.correlation = DephasingCorrelation::Collective;
        let ch = collapse_operators(&s, &sp).unwrap();
        assert_eq!(ch.len(), 2);
        let ps = ch.iter().find(|c| c.name == "dephase_s[all]").unwrap().op.to_dense();
        for k in 1..=3 {
            let i = sp.index_of(&BasisLabel::S(k)).unwrap();
            assert!((ps[(i, i)].re - 1.0).abs() < 1e-15);
        }
        s.dephasing.levels = DephasedLevels::S;
        assert_eq!(collapse_operators(&s, &sp).unwrap().len(), 1);
    }

    proptest! {
        #[test]
        fn dark_state_is_null(n in 1usize..=20, or in 0.01f64..50.0, om in 0.01f64..50.0) {
            let sp = restricted_space(n).unwrap();
            let h = hamiltonian_restricted(&AtomScheme::three_level(or, om, 0.0), &sp, None).unwrap();
            let d = dark_state(&sp, or, om).unwrap();
            prop_assert!(h.apply(d.amplitudes()).norm() < 1e-12 * or.max(om).max(1.0));
        }

        #[test]
        fn hamiltonians_are_hermitian(n in 1usize..=3, v in prop::array::uniform3(0.0f64..100.0)) {
            let s = AtomScheme::three_level(1.0, 2.0, 0.0);
            let c = PairCouplings::uniform(n, PairCoupling::Finite(v[0]), PairCoupling::Finite(v[1]), PairCoupling::Finite(v[2]));
            let h = hamiltonian_full(&s, &c, &full_space(n, 3).unwrap()).unwrap();
            prop_assert!(h.hermiticity_defect() < 1e-12);
        }
    }
}
