use nalgebra::DMatrix;

use super::{CsrMatrix, LindbladChannel, QOperator, Representation, C64};
use crate::error::{Error, Result};

/// Largest superoperator dimension (d²) [`Liouvillian::to_matrix`] will
/// materialize.
pub const DEFAULT_SUPEROPERATOR_CAP: usize = 4096;

/// GKSL generator ρ̇ = −i[H,ρ] + Σ_k (C_k ρ C_k† − ½{C_k†C_k, ρ}).
///
/// Stored as H_eff = H − (i/2) Σ C_k†C_k plus the jump list, so applying it
/// costs a few operator products; the explicit d²×d² matrix is built only on
/// request, in the column-stacking convention vec(ρ)[i + j·d] = ρ_ij.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    dim: usize,
    h_eff: QOperator,
    jumps: Vec<CsrMatrix>,
    names: Vec<String>,
}

pub fn liouvillian(h: &QOperator, channels: &[LindbladChannel]) -> Result<Liouvillian> {
    let d = h.dim();
    let mut t: Vec<(usize, usize, C64)> = h.to_csr().triplets().collect();
    for c in channels {
        if c.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: c.dim(),
            });
        }
        t.extend(
            c.op.adjoint_times_self()
                .triplets()
                .map(|(i, j, z)| (i, j, z * C64::new(0.0, -0.5))),
        );
    }
    let repr = if h.is_sparse() {
        Representation::Sparse
    } else {
        Representation::default()
    };
    Ok(Liouvillian {
        dim: d,
        h_eff: QOperator::from_csr(CsrMatrix::from_triplets(d, d, &t), repr),
        jumps: channels.iter().map(|c| c.op.clone()).collect(),
        names: channels.iter().map(|c| c.name.clone()).collect(),
    })
}

impl Liouvillian {
    pub fn zero(dim: usize) -> Self {
        Liouvillian {
            dim,
            h_eff: QOperator::zeros(dim),
            jumps: Vec::new(),
            names: Vec::new(),
        }
    }

    /// Hilbert-space dimension d (the superoperator acts on d²).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h_eff(&self) -> &QOperator {
        &self.h_eff
    }

    pub fn channel_names(&self) -> &[String] {
        &self.names
    }

    pub fn n_channels(&self) -> usize {
        self.jumps.len()
    }

    /// out = L(ρ). `scratch` must be d×d; its contents are overwritten.
    pub fn apply_into(&self, rho: &DMatrix<C64>, scratch: &mut DMatrix<C64>, out: &mut DMatrix<C64>) {
        out.fill(C64::new(0.0, 0.0));
        self.h_eff.mul_dense_acc(rho, C64::new(0.0, -1.0), out);
        self.h_eff.dense_mul_adjoint_acc(rho, C64::new(0.0, 1.0), out);
        for c in &self.jumps {
            c.sandwich_acc(rho, scratch, out);
        }
    }

    /// out = L(ρ) for Hermitian ρ, computed as A + A† with
    /// A = −i H_eff ρ + ½ Σ C ρ C†. The result is Hermitian to the last bit;
    /// for non-Hermitian input it equals L applied to the Hermitian part of ρ
    /// only when ρ is Hermitian.
    pub fn apply_hermitian_into(&self, rho: &DMatrix<C64>, scratch: &mut DMatrix<C64>, out: &mut DMatrix<C64>) {
        out.fill(C64::new(0.0, 0.0));
        for c in &self.jumps {
            c.sandwich_acc(rho, scratch, out);
        }
        if !self.jumps.is_empty() {
            *out *= C64::new(0.5, 0.0);
        }
        self.h_eff.mul_dense_acc(rho, C64::new(0.0, -1.0), out);
        let d = self.dim;
        for j in 0..d {
            out[(j, j)] = C64::new(2.0 * out[(j, j)].re, 0.0);
            for i in (j + 1)..d {
                let z = out[(i, j)] + out[(j, i)].conj();
                out[(i, j)] = z;
                out[(j, i)] = z.conj();
            }
        }
    }

    pub fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let d = self.dim;
        let mut scratch = DMatrix::zeros(d, d);
        let mut out = DMatrix::zeros(d, d);
        self.apply_into(rho, &mut scratch, &mut out);
        out
    }

    pub fn to_matrix(&self) -> Result<DMatrix<C64>> {
        self.to_matrix_with_cap(DEFAULT_SUPEROPERATOR_CAP)
    }

    pub fn to_matrix_with_cap(&self, cap: usize) -> Result<DMatrix<C64>> {
        let d = self.dim;
        let n = d * d;
        if n > cap {
            return Err(Error::DimensionCap { dim: n, cap });
        }
        let mut l = DMatrix::zeros(n, n);
        let minus_i = C64::new(0.0, -1.0);
        for (a, b, h) in self.h_eff.to_csr().triplets() {
            for k in 0..d {
                l[(k * d + a, k * d + b)] += minus_i * h;
                l[(a * d + k, b * d + k)] += -minus_i * h.conj();
            }
        }
        for c in &self.jumps {
            let t: Vec<_> = c.triplets().collect();
            for &(a, b, x) in &t {
                for &(p, q, y) in &t {
                    l[(a * d + p, b * d + q)] += x.conj() * y;
                }
            }
        }
        Ok(l)
    }
}

/// Column-stacking vectorization.
pub fn vectorize(rho: &DMatrix<C64>) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_column_slice(rho.as_slice())
}

pub fn unvectorize(v: &nalgebra::DVector<C64>, d: usize) -> DMatrix<C64> {
    DMatrix::from_column_slice(d, d, v.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{full_space, restricted_space};
    use crate::model::{mhz, AtomScheme, PairCouplings};
    use crate::operators::{collapse_operators, dark_state, hamiltonian_full, hamiltonian_restricted, DensityMatrix};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn two_level_decay(gamma: f64) -> Liouvillian {
        let h = QOperator::zeros(2);
        let op = CsrMatrix::from_triplets(2, 2, &[(0, 1, c(gamma.sqrt()))]);
        liouvillian(&h, &[LindbladChannel::new("decay", op).unwrap()]).unwrap()
    }

    fn sample_generator() -> Liouvillian {
        let mut s = AtomScheme::three_level(mhz(1.0), mhz(0.7), mhz(2.0));
        s.gamma_d = 0.3;
        s.gamma_s = 0.05;
        let sp = restricted_space(2).unwrap();
        let h = hamiltonian_restricted(&s, &sp, None).unwrap();
        liouvillian(&h, &collapse_operators(&s, &sp).unwrap()).unwrap()
    }

    fn random_rho(d: usize, seed: u64) -> DMatrix<C64> {
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a = DMatrix::from_fn(d, d, |_, _| C64::new(next(), next()));
        let m = &a * a.adjoint();
        let tr = m.trace();
        m / tr
    }

    #[test]
    fn excited_population_rate() {
        let l = two_level_decay(3.0);
        let rho = DensityMatrix::basis(2, 1).into_matrix();
        let drho = l.apply(&rho);
        assert!((drho[(1, 1)].re + 3.0).abs() < 1e-14);
        assert!((drho[(0, 0)].re - 3.0).abs() < 1e-14);
        // exp(L t) on the excited state leaves e^(-γt) in |e⟩.
        let p = (l.to_matrix().unwrap() * c(0.4)).exp();
        let out = unvectorize(&(p * vectorize(&rho)), 2);
        assert!((out[(1, 1)].re - (-1.2f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn unitary_part_leaves_identity_fixed() {
        let s = AtomScheme::three_level(1.0, 2.0, 0.0);
        let sp = full_space(2, 3).unwrap();
        let h = hamiltonian_full(&s, &PairCouplings::zeros(2), &sp).unwrap();
        let l = liouvillian(&h, &[]).unwrap();
        let out = l.apply(DensityMatrix::maximally_mixed(9).matrix());
        assert!(out.camax() < 1e-14);
    }

    #[test]
    fn matrix_agrees_with_apply() {
        let l = sample_generator();
        let m = l.to_matrix().unwrap();
        let rho = random_rho(l.dim(), 7);
        let a = unvectorize(&(&m * vectorize(&rho)), l.dim());
        assert!((a - l.apply(&rho)).camax() < 1e-12);
    }

    #[test]
    fn identity_is_a_left_null_vector() {
        let l = sample_generator();
        let m = l.to_matrix().unwrap();
        let id = vectorize(&DMatrix::identity(l.dim(), l.dim()));
        let left = m.adjoint() * id;
        assert!(left.camax() < 1e-10);
    }

    #[test]
    fn single_atom_dark_state_is_stationary() {
        let s = AtomScheme::three_level(1.0, 1.0, 2.0);
        let sp = restricted_space(1).unwrap();
        let h = hamiltonian_restricted(&s, &sp, None).unwrap();
        let l = liouvillian(&h, &collapse_operators(&s, &sp).unwrap()).unwrap();
        let d = dark_state(&sp, 1.0, 1.0).unwrap().projector();
        assert!(l.apply(d.matrix()).camax() < 1e-14);
    }

    #[test]
    fn sparse_and_dense_paths_agree() {
        let l = sample_generator();
        let dense = Liouvillian {
            h_eff: l.h_eff.with_representation(Representation::Dense),
            ..l.clone()
        };
        let sparse = Liouvillian {
            h_eff: l.h_eff.with_representation(Representation::Sparse),
            ..l.clone()
        };
        let rho = random_rho(l.dim(), 3);
        assert!((dense.apply(&rho) - sparse.apply(&rho)).camax() < 1e-10);
    }

    #[test]
    fn cap_and_mismatch() {
        assert!(matches!(
            sample_generator().to_matrix_with_cap(10),
            Err(Error::DimensionCap { dim: 25, cap: 10 })
        ));
        let op = CsrMatrix::from_triplets(3, 3, &[]);
        let ch = LindbladChannel::new("x", op).unwrap();
        assert!(liouvillian(&QOperator::zeros(2), &[ch]).is_err());
        assert!(Liouvillian::zero(3).apply(&DMatrix::identity(3, 3)).camax() == 0.0);
    }
}
