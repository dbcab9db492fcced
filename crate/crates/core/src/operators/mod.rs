//! Operators on a [`HilbertSpace`](crate::hilbert::HilbertSpace): Hamiltonians,
//! jump operators, states and the Lindblad generator.

mod build;
pub mod dump;
mod liouvillian;
mod sparse;

pub use build::{collapse_operators, dark_state, hamiltonian_full, hamiltonian_restricted, CrossCouplings};
pub use liouvillian::{liouvillian, unvectorize, vectorize, Liouvillian, DEFAULT_SUPEROPERATOR_CAP};
pub use sparse::CsrMatrix;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;

/// Dimension at and above which operators are stored sparse.
pub const DEFAULT_SPARSE_THRESHOLD: usize = 256;

/// Storage policy for assembled operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Dense,
    Sparse,
    /// Sparse at or above `threshold`, or when fewer than a quarter of the
    /// entries are nonzero; dense otherwise.
    Auto { threshold: usize },
}

impl Default for Representation {
    fn default() -> Self {
        Representation::Auto {
            threshold: DEFAULT_SPARSE_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Repr {
    Dense(DMatrix<C64>),
    Sparse(CsrMatrix),
}

/// Square complex operator.
#[derive(Clone, Debug, PartialEq)]
pub struct QOperator {
    dim: usize,
    repr: Repr,
    hermitian: bool,
}

impl QOperator {
    pub fn from_csr(m: CsrMatrix, representation: Representation) -> Self {
        let dim = m.nrows();
        assert_eq!(dim, m.ncols(), "operators are square");
        let sparse = match representation {
            Representation::Dense => false,
            Representation::Sparse => true,
            Representation::Auto { threshold } => dim >= threshold || 4 * m.nnz() < dim * dim,
        };
        let repr = if sparse {
            Repr::Sparse(m)
        } else {
            Repr::Dense(m.to_dense())
        };
        QOperator {
            dim,
            repr,
            hermitian: false,
        }
    }

    pub fn from_dense(m: DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operators are square");
        QOperator {
            dim: m.nrows(),
            repr: Repr::Dense(m),
            hermitian: false,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        QOperator::from_csr(CsrMatrix::from_triplets(dim, dim, &[]), Representation::Sparse)
    }

    /// Mark as Hermitian after checking ‖A − A†‖_max < 1e-12.
    pub fn into_hermitian(mut self) -> Result<Self> {
        let defect = self.hermiticity_defect();
        if defect >= 1e-12 * self.max_abs().max(1.0) {
            return Err(Error::Numerical(format!("operator is not Hermitian (defect {defect:.3e})")));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.repr, Repr::Sparse(_))
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match &self.repr {
            Repr::Dense(m) => m.clone(),
            Repr::Sparse(s) => s.to_dense(),
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        match &self.repr {
            Repr::Dense(m) => CsrMatrix::from_dense(m),
            Repr::Sparse(s) => s.clone(),
        }
    }

    pub fn with_representation(&self, representation: Representation) -> Self {
        QOperator {
            hermitian: self.hermitian,
            ..QOperator::from_csr(self.to_csr(), representation)
        }
    }

    pub fn max_abs(&self) -> f64 {
        match &self.repr {
            Repr::Dense(m) => m.iter().map(|z| z.norm()).fold(0.0, f64::max),
            Repr::Sparse(s) => s.triplets().map(|t| t.2.norm()).fold(0.0, f64::max),
        }
    }

    /// ‖A − A†‖_max.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.to_dense();
        (&d - d.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        match &self.repr {
            Repr::Dense(m) => m * v,
            Repr::Sparse(s) => s.mul_vec(v),
        }
    }

    /// out += scale · A·B
    pub fn mul_dense_acc(&self, b: &DMatrix<C64>, scale: C64, out: &mut DMatrix<C64>) {
        match &self.repr {
            Repr::Dense(m) => out.gemm(scale, m, b, C64::new(1.0, 0.0)),
            Repr::Sparse(s) => s.mul_dense_acc(b, scale, out),
        }
    }

    /// out += scale · B·A†
    pub fn dense_mul_adjoint_acc(&self, b: &DMatrix<C64>, scale: C64, out: &mut DMatrix<C64>) {
        match &self.repr {
            Repr::Dense(m) => out.gemm(scale, b, &m.adjoint(), C64::new(1.0, 0.0)),
            Repr::Sparse(s) => s.dense_mul_adjoint_acc(b, scale, out),
        }
    }
}

/// Unit-norm pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(DVector<C64>);

impl StateVector {
    pub fn new(v: DVector<C64>) -> Result<Self> {
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Numerical(format!("state vector has norm {norm}")));
        }
        Ok(StateVector(v))
    }

    pub(crate) fn new_unchecked(v: DVector<C64>) -> Self {
        StateVector(v)
    }

    /// Normalize an arbitrary nonzero vector.
    pub fn normalized(v: DVector<C64>) -> Result<Self> {
        let norm = v.norm();
        if !(norm > 0.0) {
            return Err(Error::Numerical("cannot normalize the zero vector".into()));
        }
        Ok(StateVector(v / C64::new(norm, 0.0)))
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[i] = C64::new(1.0, 0.0);
        StateVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix(&self.0 * self.0.adjoint())
    }
}

/// Density matrix; validity is checked on demand by
/// [`validate_state`](crate::dynamics::validate_state), not on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(DMatrix<C64>);

impl DensityMatrix {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        Ok(DensityMatrix(m))
    }

    pub fn pure(psi: &StateVector) -> Self {
        psi.projector()
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        StateVector::basis(dim, i).projector()
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix(DMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }
}

/// One dissipation channel; the rate is folded into the operator
/// (operator = √rate × structure).
#[derive(Clone, Debug, PartialEq)]
pub struct LindbladChannel {
    pub name: String,
    pub op: CsrMatrix,
}

impl LindbladChannel {
    pub fn new(name: impl Into<String>, op: CsrMatrix) -> Result<Self> {
        if op.nrows() != op.ncols() {
            return Err(Error::DimensionMismatch {
                expected: op.nrows(),
                found: op.ncols(),
            });
        }
        if op.triplets().any(|t| !t.2.re.is_finite() || !t.2.im.is_finite()) {
            return Err(Error::Numerical("jump operator has non-finite entries".into()));
        }
        Ok(LindbladChannel { name: name.into(), op })
    }

    pub fn dim(&self) -> usize {
        self.op.nrows()
    }
}
