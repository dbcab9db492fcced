use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operators::{unvectorize, vectorize, DensityMatrix, Liouvillian, C64};

/// Relative size below which a pivot of the rank-revealing QR counts as zero.
const RANK_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub state: DensityMatrix,
    /// Dimension of ker L; above 1 the state is the projection of the
    /// maximally mixed state onto the kernel.
    pub kernel_dim: usize,
    /// max |L vec(ρ)|
    pub residual: f64,
}

impl SteadyState {
    pub fn is_degenerate(&self) -> bool {
        self.kernel_dim > 1
    }
}

/// Null space of L from a column-pivoted QR of L†: ker L is the orthogonal
/// complement of range(L†), i.e. the trailing columns of Q.
fn kernel(l: &DMatrix<C64>) -> DMatrix<C64> {
    let n = l.nrows();
    let qr = l.adjoint().col_piv_qr();
    let r = qr.r();
    let scale = r[(0, 0)].norm().max(1.0);
    let rank = (0..n).take_while(|&i| r[(i, i)].norm() > RANK_TOL * scale).count();
    qr.q().columns(rank, n - rank).into_owned()
}

pub fn steady_state(l: &Liouvillian) -> Result<SteadyState> {
    let d = l.dim();
    let m = l.to_matrix()?;
    let k = kernel(&m);
    let kernel_dim = k.ncols();
    if kernel_dim == 0 {
        return Err(Error::Numerical("the Liouvillian has no null vector within tolerance".into()));
    }
    let v: DVector<C64> = if kernel_dim == 1 {
        k.column(0).into_owned()
    } else {
        let mixed = vectorize(&DMatrix::identity(d, d)) / C64::new(d as f64, 0.0);
        &k * (k.adjoint() * mixed)
    };
    let rho = unvectorize(&v, d);
    let tr = rho.trace();
    if tr.norm() < 1e-12 {
        return Err(Error::Numerical("kernel vector has zero trace".into()));
    }
    let rho = rho / tr;
    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let residual = (&m * vectorize(&rho)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if residual > 1e-8 * scale {
        return Err(Error::Numerical(format!("steady-state residual {residual:.3e} too large")));
    }
    Ok(SteadyState {
        state: DensityMatrix::from_matrix(rho)?,
        kernel_dim,
        residual,
    })
}
