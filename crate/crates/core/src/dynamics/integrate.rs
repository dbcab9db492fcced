use nalgebra::{DMatrix, DVector};

use super::{IntegratorSettings, IntegratorStats, Method};
use crate::error::{Error, Result};
use crate::operators::{unvectorize, vectorize, Liouvillian, C64};

// Dormand–Prince 5(4) tableau; L is time independent so the nodes are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus the embedded fourth-order ones.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const ALPHA: f64 = 0.2 - 0.75 * BETA;

pub(super) enum Stepper<'a> {
    Adaptive(Dopri<'a>),
    Rk4 { l: &'a Liouvillian, dt: f64, k: [DMatrix<C64>; 5] },
    Expm { l: DMatrix<C64>, dim: usize, cache: Vec<(f64, DMatrix<C64>)> },
}

impl<'a> Stepper<'a> {
    pub fn new(l: &'a Liouvillian, s: &IntegratorSettings) -> Result<Self> {
        let d = l.dim();
        let z = || DMatrix::zeros(d, d);
        Ok(match s.method {
            Method::Adaptive => Stepper::Adaptive(Dopri {
                l,
                rtol: s.rtol,
                atol: s.atol,
                max_step: s.max_step,
                h: None,
                err_prev: 1e-4,
                k: std::array::from_fn(|_| z()),
                y: z(),
                scratch: z(),
                err: z(),
                fsal: false,
            }),
            Method::Rk4 { dt } => Stepper::Rk4 {
                l,
                dt: dt.min(s.max_step),
                k: std::array::from_fn(|_| z()),
            },
            Method::Expm => Stepper::Expm {
                l: l.to_matrix().map_err(|e| match e {
                    Error::DimensionCap { dim, cap } => Error::Config(format!(
                        "matrix-exponential stepping needs a {dim}x{dim} superoperator (cap {cap}); use method = \"adaptive\""
                    )),
                    e => e,
                })?,
                dim: d,
                cache: Vec::new(),
            },
        })
    }

    pub fn advance(&mut self, rho: &mut DMatrix<C64>, t0: f64, t1: f64, stats: &mut IntegratorStats) -> Result<()> {
        match self {
            Stepper::Adaptive(dp) => dp.advance(rho, t0, t1, stats),
            Stepper::Rk4 { l, dt, k } => {
                let span = t1 - t0;
                let n = (span / *dt - 1e-9).ceil().max(1.0) as usize;
                let h = span / n as f64;
                for _ in 0..n {
                    rk4_step(l, rho, h, k);
                    stats.accepted_steps += 1;
                    stats.rhs_evaluations += 4;
                }
                Ok(())
            }
            Stepper::Expm { l, dim, cache } => {
                let span = t1 - t0;
                let hit = cache.iter().position(|(dt, _)| (dt - span).abs() <= 1e-12 * span);
                let idx = match hit {
                    Some(i) => i,
                    None => {
                        let p = (&*l * C64::new(span, 0.0)).exp();
                        if p.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                            return Err(Error::Numerical("matrix exponential overflowed".into()));
                        }
                        stats.propagators += 1;
                        cache.push((span, p));
                        cache.len() - 1
                    }
                };
                let v: DVector<C64> = &cache[idx].1 * vectorize(rho);
                *rho = unvectorize(&v, *dim);
                stats.accepted_steps += 1;
                Ok(())
            }
        }
    }
}

fn axpy(out: &mut DMatrix<C64>, base: &DMatrix<C64>, terms: &[(f64, &DMatrix<C64>)]) {
    out.copy_from(base);
    for &(a, k) in terms {
        if a != 0.0 {
            out.zip_apply(k, |o, x| *o += x * a);
        }
    }
}

fn rk4_step(l: &Liouvillian, rho: &mut DMatrix<C64>, h: f64, k: &mut [DMatrix<C64>; 5]) {
    let [k1, k2, k3, k4, tmp] = k;
    let mut scratch = DMatrix::zeros(rho.nrows(), rho.ncols());
    l.apply_hermitian_into(rho, &mut scratch, k1);
    axpy(tmp, rho, &[(h / 2.0, k1)]);
    l.apply_hermitian_into(tmp, &mut scratch, k2);
    axpy(tmp, rho, &[(h / 2.0, k2)]);
    l.apply_hermitian_into(tmp, &mut scratch, k3);
    axpy(tmp, rho, &[(h, k3)]);
    l.apply_hermitian_into(tmp, &mut scratch, k4);
    let w = h / 6.0;
    rho.zip_zip_apply(k1, k2, |r, a, b| *r += (a + b * 2.0) * w);
    rho.zip_zip_apply(k3, k4, |r, a, b| *r += (a * 2.0 + b) * w);
}

pub(super) struct Dopri<'a> {
    l: &'a Liouvillian,
    rtol: f64,
    atol: f64,
    max_step: f64,
    /// Step the controller proposes, independent of output clipping.
    h: Option<f64>,
    err_prev: f64,
    k: [DMatrix<C64>; 7],
    y: DMatrix<C64>,
    scratch: DMatrix<C64>,
    err: DMatrix<C64>,
    /// k[0] already holds L(ρ) at the current point.
    fsal: bool,
}

impl Dopri<'_> {
    fn err_norm(&self, y0: &DMatrix<C64>, y1: &DMatrix<C64>, err: &DMatrix<C64>) -> f64 {
        let mut acc = 0.0;
        for ((a, b), e) in y0.iter().zip(y1.iter()).zip(err.iter()) {
            let sc = self.atol + self.rtol * a.norm().max(b.norm());
            acc += e.norm_sqr() / (sc * sc);
        }
        (acc / err.len() as f64).sqrt()
    }

    fn initial_step(&self, rho: &DMatrix<C64>, f0: &DMatrix<C64>, span: f64) -> f64 {
        let n = rho.len() as f64;
        let scale = |m: &DMatrix<C64>| {
            (m.iter()
                .zip(rho.iter())
                .map(|(x, r)| (x.norm() / (self.atol + self.rtol * r.norm())).powi(2))
                .sum::<f64>()
                / n)
                .sqrt()
        };
        let d0 = scale(rho);
        let d1 = scale(f0);
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(span).min(self.max_step)
    }

    fn advance(&mut self, rho: &mut DMatrix<C64>, t0: f64, t1: f64, stats: &mut IntegratorStats) -> Result<()> {
        let mut t = t0;
        if !self.fsal {
            self.l.apply_hermitian_into(rho, &mut self.scratch, &mut self.k[0]);
            stats.rhs_evaluations += 1;
            self.fsal = true;
        }
        let mut h_nat = match self.h {
            Some(h) => h,
            None => self.initial_step(rho, &self.k[0], t1 - t0),
        };
        while t < t1 {
            let remaining = t1 - t;
            let clipped = h_nat.min(self.max_step) >= remaining;
            let h = if clipped { remaining } else { h_nat.min(self.max_step) };
            if h < 16.0 * f64::EPSILON * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t, h });
            }
            for s in 1..7 {
                let (done, rest) = self.k.split_at_mut(s);
                let terms: Vec<(f64, &DMatrix<C64>)> = (0..s).map(|j| (h * A[s][j], &done[j])).collect();
                axpy(&mut self.y, rho, &terms);
                self.l.apply_hermitian_into(&self.y, &mut self.scratch, &mut rest[0]);
            }
            stats.rhs_evaluations += 6;
            // y holds the fifth-order solution (stage 7 is evaluated there).
            self.err.fill(C64::new(0.0, 0.0));
            for (e, k) in E.iter().zip(&self.k) {
                if *e != 0.0 {
                    self.err.zip_apply(k, |o, x| *o += x * (h * e));
                }
            }
            let en = self.err_norm(rho, &self.y, &self.err);
            if !en.is_finite() {
                h_nat = h * 0.1;
                stats.rejected_steps += 1;
                continue;
            }
            if en <= 1.0 {
                let fac = (SAFETY * en.max(1e-10).powf(-ALPHA) * self.err_prev.powf(BETA)).clamp(0.2, 10.0);
                self.err_prev = en.max(1e-4);
                std::mem::swap(rho, &mut self.y);
                self.k.swap(0, 6);
                t = if clipped { t1 } else { t + h };
                stats.accepted_steps += 1;
                // Keep the natural step when the last one was cut to hit t1.
                h_nat = if clipped { h_nat.max(h * fac) } else { h * fac };
            } else {
                h_nat = h * (SAFETY * en.powf(-0.2)).max(0.2);
                stats.rejected_steps += 1;
            }
        }
        self.h = Some(h_nat);
        // The caller symmetrizes ρ before the next call, so refresh L(ρ).
        self.fsal = false;
        Ok(())
    }
}
