//! Reference constructions shared by the integration tests. Everything here
//! is built from the model's Hamiltonian and jump operators directly, without
//! going through the library's generators or decompositions.

#![allow(dead_code)]

use mixed_liouvillian::{ChannelKind, DensityMatrix, HilbertOperator, JumpChannel, SystemModel, C64};
use nalgebra::DMatrix;
use ndarray::{s, Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use rand::Rng;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}

pub fn eye(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, c(1.0))
}

pub fn dag(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn frob(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `-i (1 (x) H - H^T (x) 1)`
fn hamiltonian_part(h: &Array2<C64>) -> Array2<C64> {
    let n = h.nrows();
    (kron(&eye(n), h) - kron(&h.t().to_owned(), &eye(n))).mapv(|z| z * C64::new(0.0, -1.0))
}

/// `(L_NH, J)` for a model.
pub fn reference_generators(model: &SystemModel) -> (Array2<C64>, Array2<C64>) {
    let h = model.hamiltonian().matrix();
    let n = h.nrows();
    let mut nh = hamiltonian_part(h);
    let mut j = Array2::zeros((n * n, n * n));
    for ch in model.channels() {
        let f = ch.operator.matrix();
        let ff = dag(f).dot(f);
        j += &kron(&f.mapv(|z| z.conj()), f);
        nh -= &(kron(&eye(n), &ff) + kron(&ff.t().to_owned(), &eye(n))).mapv(|z| z * 0.5);
    }
    (nh, j)
}

pub fn reference_lindblad(model: &SystemModel) -> Array2<C64> {
    let (nh, j) = reference_generators(model);
    nh + j
}

pub fn reference_non_hermitian(model: &SystemModel) -> Array2<C64> {
    reference_generators(model).0
}

pub fn expm(a: &Array2<C64>, t: f64) -> Array2<C64> {
    let (r, cdim) = a.dim();
    let m = DMatrix::from_fn(r, cdim, |i, j| a[[i, j]] * t);
    let e = m.exp();
    Array2::from_shape_fn((r, cdim), |(i, j)| e[(i, j)])
}

/// Companion matrix of `(z + gamma_c)(z - L_NH) - gamma_c J`.
pub fn reference_companion(model: &SystemModel) -> Array2<C64> {
    let (nh, j) = reference_generators(model);
    let gc = model.gamma_c();
    let n = nh.nrows();
    let lindblad = &nh + &j;
    let a1 = eye(n).mapv(|z| z * gc) - &nh;
    let a0 = lindblad.mapv(|z| z * -gc);
    let mut m = Array2::zeros((2 * n, 2 * n));
    m.slice_mut(s![..n, n..]).assign(&eye(n));
    m.slice_mut(s![n.., ..n]).assign(&a0.mapv(|z| -z));
    m.slice_mut(s![n.., n..]).assign(&a1.mapv(|z| -z));
    m
}

/// `U(t)` read off the doubled-space exponential.
pub fn reference_evolution(model: &SystemModel, t: f64) -> Array2<C64> {
    let m = reference_companion(model);
    let n = m.nrows() / 2;
    let shifted = &m + &eye(2 * n).mapv(|z| z * model.gamma_c());
    shifted.slice(s![..n, ..]).dot(&expm(&m, t).slice(s![.., n..]))
}

pub fn vec_of(rho: &Array2<C64>) -> Array1<C64> {
    let n = rho.nrows();
    Array1::from_shape_fn(n * n, |k| rho[[k % n, k / n]])
}

pub fn unvec(v: &Array1<C64>, n: usize) -> Array2<C64> {
    Array2::from_shape_fn((n, n), |(r, col)| v[col * n + r])
}

pub struct StateCheck {
    pub hermitian_deviation: f64,
    pub min_eigenvalue: f64,
    pub trace: f64,
}

pub fn check_state(rho: &Array2<C64>) -> StateCheck {
    let herm = frob(&(rho - &dag(rho)));
    let sym = (rho + &dag(rho)).mapv(|z| z * 0.5);
    let (vals, _) = sym.eigh(UPLO::Lower).expect("Hermitian eigensolver");
    StateCheck {
        hermitian_deviation: herm,
        min_eigenvalue: vals.iter().cloned().fold(f64::INFINITY, f64::min),
        trace: rho.diag().iter().map(|z| z.re).sum(),
    }
}

/// Random Hermitian `H`, one to `min(n + 1, n(n - 1))` distinct elementary jumps with rates
/// in `[0.05, 1]`, and `gamma_c` log-uniform in `[1e-4, 1e4]`.
pub fn random_model<R: Rng>(rng: &mut R, n: usize) -> SystemModel {
    let mut h = Array2::<C64>::zeros((n, n));
    for r in 0..n {
        h[[r, r]] = c(rng.gen_range(-1.0..1.0));
        for col in r + 1..n {
            let z = C64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            h[[r, col]] = z;
            h[[col, r]] = z.conj();
        }
    }
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let count = rng.gen_range(1..=(n + 1).min(n * (n - 1)));
    while pairs.len() < count {
        let from = rng.gen_range(0..n);
        let to = rng.gen_range(0..n);
        if from != to && !pairs.contains(&(from, to)) {
            pairs.push((from, to));
        }
    }
    let channels = pairs
        .iter()
        .map(|&(from, to)| {
            JumpChannel::elementary(n, from, to, rng.gen_range(0.05..1.0), format!("{from}->{to}"), ChannelKind::Decay)
        })
        .collect();
    let gamma_c = 10f64.powf(rng.gen_range(-4.0..4.0));
    SystemModel::new(HilbertOperator::new(h).unwrap(), channels, gamma_c).unwrap()
}

/// A random normalized mixed state.
pub fn random_state<R: Rng>(rng: &mut R, n: usize) -> DensityMatrix {
    let a = Array2::from_shape_fn((n, n), |_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let rho = a.dot(&dag(&a));
    let tr: f64 = rho.diag().iter().map(|z| z.re).sum();
    DensityMatrix::new(rho.mapv(|z| z / tr)).unwrap()
}
