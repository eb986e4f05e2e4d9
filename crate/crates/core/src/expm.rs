//! Dense matrix exponential and the doubled-space reference propagator.
//!
//! The exponential itself comes from nalgebra's scaling-and-squaring Pade
//! routine, which shares no code with the eigendecomposition path.

use nalgebra::DMatrix;
use ndarray::{s, Array2};
use num_complex::Complex64 as C64;

use crate::liouville::SuperOperator;
use crate::spectral::ExtendedMatrix;

fn to_nalgebra(a: &Array2<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| a[[r, c]])
}

fn from_nalgebra(m: &DMatrix<C64>) -> Array2<C64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(r, c)| m[(r, c)])
}

/// `exp(a * t)`.
pub fn expm(a: &Array2<C64>, t: f64) -> Array2<C64> {
    let scaled = to_nalgebra(a) * C64::new(t, 0.0);
    from_nalgebra(&scaled.exp())
}

/// `exp(L t)` for a superoperator.
pub fn expm_superop(l: &SuperOperator, t: f64) -> SuperOperator {
    SuperOperator::new(expm(l.matrix(), t)).expect("exponential preserves shape")
}

/// Reduced evolution operator computed as `S_o^T (M + gamma_c) exp(M t) S_e`.
pub fn doubled_space_evolution(ext: &ExtendedMatrix, t: f64) -> SuperOperator {
    let n = ext.liouville_dim();
    let e = expm(&ext.m, t);
    let top = ext.m.slice(s![..n, ..]);
    let right = e.slice(s![.., n..]);
    let mut u = top.dot(&right);
    u += &(e.slice(s![..n, n..]).mapv(|z| z * ext.gamma_c));
    SuperOperator::new(u).expect("square block")
}
