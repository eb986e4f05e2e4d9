//! Companion linearization of the quadratic pencil and generalized projectors.
//!
//! With a uniform return rate `gamma_c` the resolvent of `L_mixed(z)` has the
//! form `(z + gamma_c) D(z)^{-1}` where `D(z) = z^2 + A1 z + A0`. The pencil is
//! linearized on the doubled Liouville space by
//!
//! ```text
//! M = [[ 0,   I ],
//!      [-A0, -A1]]
//! ```
//!
//! whose eigenpairs give the modes of the evolution operator. The reduced-space
//! weight of mode `i` is `X_i = (lambda_i + gamma_c) S_o^T |v_i><w_i| S_e`, with
//! `S_o` selecting the first and `S_e` the second half of the doubled space.
//!
//! The eigenspace of `M` at `-gamma_c` is known in closed form: it is spanned
//! by `[x; -gamma_c x]` with `J x = 0`, and `M + gamma_c` annihilates it. For
//! decay channels `J` is nilpotent, so a genuine pole approaches `-gamma_c`
//! as `gamma_c` grows and the plain eigenvector matrix becomes nearly
//! singular. The decomposition therefore splits that eigenspace off exactly
//! and diagonalizes `M` on the orthogonal complement, where the remaining
//! modes stay well separated.

use ndarray::{s, Array2, Axis};
use ndarray_linalg::{Eig, Inverse, SVD};
use num_complex::Complex64 as C64;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::liouville::{build_generators, dagger, frobenius, identity, Generators, SuperOperator, SystemModel};

/// Eigenvector-matrix condition number above which the spectrum is rejected.
pub const MAX_CONDITION: f64 = 1e10;
/// Relative distance from `-gamma_c`, scaled by `max(1, gamma_c)`, for removal.
pub const TOL_POLE: f64 = 1e-7;
/// Projector norm, relative to the largest one, below which a pole at
/// `-gamma_c` counts as cancelled by the numerator.
pub const TOL_REMOVED_WEIGHT: f64 = 1e-6;
/// Smallest-to-largest singular value ratio of `D(lambda)` accepted as a root.
pub const TOL_LINEARIZATION: f64 = 1e-6;
/// Poles within this distance of zero, relative to `||L_L||`, are the
/// stationary pole and are set to exactly zero.
pub const TOL_STEADY: f64 = 1e-9;
/// Singular values of `J` below this fraction of the largest count as zero.
const TOL_RANK: f64 = 1e-10;

/// `D(z) = z^2 I + A1 z + A0` with `A1 = gamma_c - L_Lindblad + J` and
/// `A0 = -gamma_c L_Lindblad`.
#[derive(Debug, Clone)]
pub struct QuadraticPencil {
    pub a0: SuperOperator,
    pub a1: SuperOperator,
    pub gamma_c: f64,
    restoring: SuperOperator,
    lindblad_norm: f64,
}

impl QuadraticPencil {
    pub fn from_generators(gens: &Generators) -> Result<Self> {
        let gc = gens.gamma_c;
        if gc == 0.0 {
            return Err(Error::DegeneratePencil);
        }
        let n = gens.hilbert_dim();
        let l = gens.lindblad.matrix();
        let a0 = l.mapv(|z| z * -gc);
        let a1 = &(&identity(n * n).mapv(|z| z * gc) - l) + gens.restoring.matrix();
        Ok(Self {
            a0: SuperOperator::from_parts(n, a0),
            a1: SuperOperator::from_parts(n, a1),
            gamma_c: gc,
            restoring: gens.restoring.clone(),
            lindblad_norm: gens.lindblad.frobenius_norm(),
        })
    }

    pub fn liouville_dim(&self) -> usize {
        self.a0.dim()
    }

    pub fn hilbert_dim(&self) -> usize {
        self.a0.hilbert_dim()
    }

    /// Frobenius norm of the Lindblad generator the pencil was built from.
    pub fn lindblad_norm(&self) -> f64 {
        self.lindblad_norm
    }

    /// The restoring superoperator `J` the pencil was built from.
    pub fn restoring(&self) -> &SuperOperator {
        &self.restoring
    }

    pub fn eval(&self, z: C64) -> Array2<C64> {
        let n = self.liouville_dim();
        let mut d = self.a1.matrix().mapv(|a| a * z) + self.a0.matrix();
        for i in 0..n {
            d[[i, i]] += z * z;
        }
        d
    }

    /// `sigma_min(D(z)) / sigma_max(D(z))`; zero at an exact root.
    pub fn residual_ratio(&self, z: C64) -> Result<f64> {
        let (_, sv, _) = self.eval(z).svd(false, false)?;
        let max = sv.iter().cloned().fold(0.0, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(if max == 0.0 { 0.0 } else { min / max })
    }
}

pub fn build_pencil(model: &SystemModel) -> Result<QuadraticPencil> {
    QuadraticPencil::from_generators(&build_generators(model)?)
}

/// The `2N^2 x 2N^2` companion matrix.
#[derive(Debug, Clone)]
pub struct ExtendedMatrix {
    pub m: Array2<C64>,
    pub gamma_c: f64,
    restoring: Array2<C64>,
    hilbert_dim: usize,
    lindblad_norm: f64,
}

impl ExtendedMatrix {
    pub fn liouville_dim(&self) -> usize {
        self.hilbert_dim * self.hilbert_dim
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }
}

pub fn build_extended_matrix(pencil: &QuadraticPencil) -> ExtendedMatrix {
    let n = pencil.liouville_dim();
    let mut m = Array2::<C64>::zeros((2 * n, 2 * n));
    m.slice_mut(s![..n, n..]).assign(&identity(n));
    m.slice_mut(s![n.., ..n]).assign(&pencil.a0.matrix().mapv(|z| -z));
    m.slice_mut(s![n.., n..]).assign(&pencil.a1.matrix().mapv(|z| -z));
    ExtendedMatrix {
        m,
        gamma_c: pencil.gamma_c,
        restoring: pencil.restoring.matrix().clone(),
        hilbert_dim: pencil.hilbert_dim(),
        lindblad_norm: pencil.lindblad_norm,
    }
}

/// Eigenvalues and generalized projectors of `M`.
///
/// The first entries come from diagonalizing `M` on the complement of its
/// closed-form `-gamma_c` eigenspace; the last `kernel_dim` entries are that
/// eigenspace itself, reported at exactly `-gamma_c` with zero projectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<C64>,
    pub projectors: Vec<SuperOperator>,
    pub removed_flags: Vec<bool>,
    /// Condition number of the eigenvector matrix of the deflated companion.
    pub condition_number: f64,
    pub gamma_c: f64,
    /// Right eigenvectors of the deflated, block-scaled companion, as columns.
    pub right: Array2<C64>,
    /// Left eigenvectors of the deflated companion, as rows; `right^{-1}`.
    pub left: Array2<C64>,
    /// Dimension of the `-gamma_c` eigenspace split off in closed form.
    pub kernel_dim: usize,
    /// `X_i = outputs[:, i] (x) inputs[i, :]`.
    pub(crate) outputs: Array2<C64>,
    pub(crate) inputs: Array2<C64>,
    hilbert_dim: usize,
    lindblad_norm: f64,
}

impl SpectralDecomposition {
    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn lindblad_norm(&self) -> f64 {
        self.lindblad_norm
    }

    pub fn active_count(&self) -> usize {
        self.removed_flags.iter().filter(|r| !**r).count()
    }

    pub fn removed_count(&self) -> usize {
        self.len() - self.active_count()
    }

    /// Indices of modes not cancelled by the `(z + gamma_c)` numerator.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| !self.removed_flags[i])
    }

    pub fn projector_norms(&self) -> Vec<f64> {
        self.projectors.iter().map(|p| p.frobenius_norm()).collect()
    }

    /// `sum_i X_i`, which equals `U(0)`.
    pub fn projector_sum(&self) -> SuperOperator {
        SuperOperator::from_parts(self.hilbert_dim, self.outputs.dot(&self.inputs))
    }

    /// Index of the steady pole `lambda = 0`, if one is present within
    /// `1e-9 * max(1, ||L_Lindblad||)`.
    pub fn steady_pole(&self) -> Option<usize> {
        let tol = TOL_STEADY * self.lindblad_norm.max(1.0);
        self.active()
            .filter(|&i| self.eigenvalues[i].norm() < tol)
            .min_by(|&a, &b| self.eigenvalues[a].norm().total_cmp(&self.eigenvalues[b].norm()))
    }
}

fn extreme_singular_values(m: &Array2<C64>) -> Result<(f64, f64)> {
    let (_, sv, _) = m.svd(false, false)?;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((min, max))
}

fn clustered(eigenvalues: &[C64]) -> Vec<C64> {
    let mut out = Vec::new();
    for (i, a) in eigenvalues.iter().enumerate() {
        let close = eigenvalues
            .iter()
            .enumerate()
            .any(|(j, b)| i != j && (a - b).norm() <= 1e-6 * a.norm().max(1.0));
        if close {
            out.push(*a);
        }
    }
    out
}

/// Orthonormal basis of `ker J` as columns.
fn restoring_kernel(j: &Array2<C64>) -> Result<Array2<C64>> {
    let n = j.nrows();
    let (_, sv, vt) = j.svd(false, true)?;
    let vt = vt.expect("requested right singular vectors");
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > TOL_RANK * max).count();
    Ok(dagger(&vt.slice(s![rank..n, ..]).to_owned()))
}

/// Orthonormal basis of the orthogonal complement of the columns of `r`.
fn complement(r: &Array2<C64>) -> Result<Array2<C64>> {
    let dim = r.nrows();
    let m = r.ncols();
    if m == 0 {
        return Ok(identity(dim));
    }
    let (_, _, vt) = dagger(r).svd(false, true)?;
    let vt = vt.expect("requested right singular vectors");
    Ok(dagger(&vt.slice(s![m..dim, ..]).to_owned()))
}

pub fn eigendecompose(ext: &ExtendedMatrix) -> Result<SpectralDecomposition> {
    let n = ext.liouville_dim();
    let gc = ext.gamma_c;

    // Work with diag(1, s)^{-1} M diag(1, s). Unscaled, the top rows of
    // (M + gamma_c) are O(gamma_c) and the projector sum cancels them.
    let scale = gc.max(1.0);
    let mut m = ext.m.clone();
    m.slice_mut(s![..n, n..]).mapv_inplace(|z| z * scale);
    m.slice_mut(s![n.., ..n]).mapv_inplace(|z| z / scale);

    let kernel = restoring_kernel(&ext.restoring)?;
    let kernel_dim = kernel.ncols();
    let mut invariant = Array2::<C64>::zeros((2 * n, kernel_dim));
    invariant.slice_mut(s![..n, ..]).assign(&kernel);
    invariant.slice_mut(s![n.., ..]).assign(&kernel.mapv(|z| z * (-gc / scale)));
    let q = complement(&invariant)?;
    let q_dag = dagger(&q);
    let deflated = q_dag.dot(&m).dot(&q);

    let (eigenvalues, right) = deflated.eig()?;
    let (smin, smax) = extreme_singular_values(&right)?;
    let condition = if smin == 0.0 { f64::INFINITY } else { smax / smin };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::DefectiveSpectrum {
            condition,
            clustered: clustered(eigenvalues.as_slice().unwrap_or(&[])),
        });
    }
    let left = right.inv()?;

    // (M + gamma_c) vanishes on the split-off eigenspace, so it factors
    // through the complement: (M + gamma_c) = (M + gamma_c) Q Q^dagger.
    let mut shifted = m.dot(&q);
    shifted.scaled_add(C64::new(gc, 0.0), &q);
    shifted.mapv_inplace(|z| z / scale);
    let active_modes = eigenvalues.len();
    let mut outputs = Array2::<C64>::zeros((n, active_modes + kernel_dim));
    let mut inputs = Array2::<C64>::zeros((active_modes + kernel_dim, n));
    outputs
        .slice_mut(s![.., ..active_modes])
        .assign(&shifted.slice(s![..n, ..]).dot(&right));
    inputs
        .slice_mut(s![..active_modes, ..])
        .assign(&left.dot(&q_dag.slice(s![.., n..])));

    // Zero is an exact root (D(0) = -gamma_c L_L and L_L preserves the
    // trace); a residual phase would rotate the steady state at long times.
    let steady_tol = TOL_STEADY * ext.lindblad_norm.max(1.0);
    let mut all_eigenvalues: Vec<C64> = eigenvalues
        .iter()
        .map(|&lam| if lam.norm() < steady_tol { C64::new(0.0, 0.0) } else { lam })
        .collect();
    all_eigenvalues.extend(std::iter::repeat(C64::new(-gc, 0.0)).take(kernel_dim));
    let projectors: Vec<SuperOperator> = (0..all_eigenvalues.len())
        .map(|i| {
            let out = outputs.column(i).insert_axis(Axis(1));
            let inp = inputs.row(i).insert_axis(Axis(0));
            SuperOperator::from_parts(ext.hilbert_dim, out.dot(&inp))
        })
        .collect();

    let norms: Vec<f64> = projectors.iter().map(|p| frobenius(p.matrix())).collect();
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    let tol_pole = TOL_POLE * gc.max(1.0);
    let removed_flags = all_eigenvalues
        .iter()
        .zip(&norms)
        .enumerate()
        .map(|(i, (lam, &norm))| {
            i >= active_modes || ((lam + gc).norm() <= tol_pole && norm <= TOL_REMOVED_WEIGHT * max_norm)
        })
        .collect();

    Ok(SpectralDecomposition {
        eigenvalues: all_eigenvalues,
        projectors,
        removed_flags,
        condition_number: condition,
        gamma_c: gc,
        right,
        left,
        kernel_dim,
        outputs,
        inputs,
        hilbert_dim: ext.hilbert_dim,
        lindblad_norm: ext.lindblad_norm,
    })
}

/// Pencil, companion matrix and decomposition in one call.
pub fn decompose_model(model: &SystemModel) -> Result<(QuadraticPencil, SpectralDecomposition)> {
    let pencil = build_pencil(model)?;
    let dec = eigendecompose(&build_extended_matrix(&pencil))?;
    Ok((pencil, dec))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoleEntry {
    pub re: f64,
    pub im: f64,
    pub projector_norm: f64,
    pub removed: bool,
}

/// Pole census of a decomposition together with the multiplicity-rule check.
#[derive(Debug, Clone)]
pub struct PoleReport {
    pub gamma_c: f64,
    pub n_active: usize,
    pub n_removed: usize,
    /// Number of elementary dissipative pathways, when every channel is `|b><a|`.
    pub pathways: Option<usize>,
    /// `N^2 - pathways`, the predicted number of eigenvalues at `-gamma_c`.
    pub rule_prediction: Option<usize>,
    pub rule_holds: Option<bool>,
    /// Numerical rank of `J`; the kernel of `J` spans the removed eigenspace.
    pub restoring_rank: usize,
    pub poles: Vec<PoleEntry>,
}

impl Serialize for PoleReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.poles.serialize(serializer)
    }
}

fn numerical_rank(m: &Array2<C64>) -> Result<usize> {
    let (_, sv, _) = m.svd(false, false)?;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    Ok(sv.iter().filter(|&&s| s > TOL_RANK * max).count())
}

pub fn classify_poles(dec: &SpectralDecomposition, model: &SystemModel) -> Result<PoleReport> {
    let gens = build_generators(model)?;
    let restoring_rank = numerical_rank(gens.restoring.matrix())?;
    let pathways = model.elementary_jumps().map(|jumps| {
        let mut pairs: Vec<(usize, usize)> = jumps.iter().filter(|j| j.rate > 0.0).map(|j| (j.from, j.to)).collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs.len()
    });
    let n2 = model.liouville_dim();
    let rule_prediction = pathways.map(|p| n2.saturating_sub(p));
    let n_removed = dec.removed_count();
    let poles = dec
        .eigenvalues
        .iter()
        .zip(&dec.projectors)
        .zip(&dec.removed_flags)
        .map(|((lam, p), &removed)| PoleEntry {
            re: lam.re,
            im: lam.im,
            projector_norm: p.frobenius_norm(),
            removed,
        })
        .collect();
    Ok(PoleReport {
        gamma_c: dec.gamma_c,
        n_active: dec.active_count(),
        n_removed,
        pathways,
        rule_prediction,
        rule_holds: rule_prediction.map(|p| p == n_removed),
        restoring_rank,
        poles,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearizationViolation {
    pub index: usize,
    pub eigenvalue: C64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LinearizationReport {
    pub checked: usize,
    pub skipped: usize,
    pub violations: Vec<LinearizationViolation>,
}

impl LinearizationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every active eigenvalue is a root of `D(z)`.
pub fn verify_linearization(pencil: &QuadraticPencil, dec: &SpectralDecomposition) -> Result<LinearizationReport> {
    let mut report = LinearizationReport::default();
    for (i, (&lam, &removed)) in dec.eigenvalues.iter().zip(&dec.removed_flags).enumerate() {
        if removed {
            report.skipped += 1;
            continue;
        }
        report.checked += 1;
        let ratio = pencil.residual_ratio(lam)?;
        if ratio > TOL_LINEARIZATION {
            report.violations.push(LinearizationViolation {
                index: i,
                eigenvalue: lam,
                ratio,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouville::{ChannelKind, HilbertOperator, JumpChannel};
    use approx::assert_abs_diff_eq;
    use ndarray_linalg::Determinant;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_level(delta: f64, v: f64, gamma_c: f64, channels: &[(usize, usize, f64)]) -> SystemModel {
        let mut h = Array2::zeros((2, 2));
        h[[1, 1]] = C64::new(delta, 0.0);
        h[[0, 1]] = C64::new(v, 0.0);
        h[[1, 0]] = C64::new(v, 0.0);
        let chans = channels
            .iter()
            .map(|&(from, to, rate)| JumpChannel::elementary(2, from, to, rate, "", ChannelKind::Decay))
            .collect();
        SystemModel::new(HilbertOperator::new(h).unwrap(), chans, gamma_c).unwrap()
    }

    fn fig2(gamma_c: f64) -> SystemModel {
        two_level(1.0, 0.2, gamma_c, &[(1, 0, 2.0 * std::f64::consts::PI * 0.09)])
    }

    #[test]
    fn trivial_pencil() {
        let model = SystemModel::new(HilbertOperator::zeros(2), vec![], 1.0).unwrap();
        let p = build_pencil(&model).unwrap();
        assert!(frobenius(p.a0.matrix()) == 0.0);
        assert!(frobenius(&(p.a1.matrix() - &identity(4))) == 0.0);
        let z = C64::new(0.3, -0.7);
        let d = p.eval(z);
        assert!(frobenius(&(&d - &identity(4).mapv(|u| u * z * (z + 1.0)))) < 1e-15);
    }

    #[test]
    fn zero_gamma_c_is_degenerate() {
        assert!(matches!(build_pencil(&fig2(0.0)), Err(Error::DegeneratePencil)));
    }

    #[test]
    fn pencil_reproduces_mixed_resolvent() {
        let model = fig2(0.02);
        let gens = build_generators(&model).unwrap();
        let p = QuadraticPencil::from_generators(&gens).unwrap();
        assert!(frobenius(&(p.a0.matrix() + &gens.lindblad.matrix().mapv(|z| z * 0.02))) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let z = C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let lhs = p.eval(z).mapv(|u| u / (z + 0.02));
            let mut rhs = gens.l_mixed(z).unwrap().into_matrix().mapv(|u| -u);
            for i in 0..4 {
                rhs[[i, i]] += z;
            }
            assert!(frobenius(&(&lhs - &rhs)) < 1e-12);
        }
    }

    #[test]
    fn companion_layout() {
        let p = build_pencil(&fig2(0.5)).unwrap();
        let ext = build_extended_matrix(&p);
        assert_eq!(ext.dim(), 8);
        let m = &ext.m;
        assert!(frobenius(&m.slice(s![..4, ..4]).to_owned()) == 0.0);
        assert!(frobenius(&(&m.slice(s![..4, 4..]).to_owned() - &identity(4))) == 0.0);
        assert!(frobenius(&(&m.slice(s![4.., ..4]) + p.a0.matrix())) == 0.0);
        assert!(frobenius(&(&m.slice(s![4.., 4..]) + p.a1.matrix())) == 0.0);
    }

    /// Coefficients of a polynomial of known degree from samples on a circle.
    fn interpolate(f: impl Fn(C64) -> C64, degree: usize, radius: f64) -> Vec<C64> {
        let m = 4 * (degree + 1);
        let samples: Vec<C64> = (0..m)
            .map(|k| f(C64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / m as f64)))
            .collect();
        (0..=degree)
            .map(|j| {
                let s: C64 = samples
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (j * k) as f64 / m as f64))
                    .sum();
                s / (m as f64 * radius.powi(j as i32))
            })
            .collect()
    }

    fn durand_kerner(coeffs: &[C64]) -> Vec<C64> {
        let deg = coeffs.len() - 1;
        let lead = coeffs[deg];
        let eval = |z: C64| coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c) / lead;
        let seed = C64::new(0.4, 0.9);
        let mut roots: Vec<C64> = (0..deg).map(|k| seed.powu(k as u32)).collect();
        for _ in 0..2000 {
            let prev = roots.clone();
            for i in 0..deg {
                let denom: C64 = (0..deg).filter(|&j| j != i).map(|j| roots[i] - roots[j]).product();
                let step = eval(roots[i]) / denom;
                roots[i] -= step;
            }
            if roots.iter().zip(&prev).all(|(a, b)| (a - b).norm() < 1e-15) {
                break;
            }
        }
        roots
    }

    #[test]
    fn eigenvalues_match_determinant_roots() {
        let gc = 0.3;
        let model = fig2(gc);
        let (pencil, dec) = decompose_model(&model).unwrap();
        let removed = dec.removed_count();
        assert_eq!(removed, 3);
        // det D(z) / (z + gc)^removed, evaluated pointwise and interpolated.
        let det = |z: C64| pencil.eval(z).det().unwrap() / (z + gc).powu(removed as u32);
        let coeffs = interpolate(det, 8 - removed, 1.0);
        assert_abs_diff_eq!(coeffs[8 - removed].re, 1.0, epsilon = 1e-9);
        let roots = durand_kerner(&coeffs);
        for i in dec.active() {
            let lam = dec.eigenvalues[i];
            let nearest = roots.iter().map(|r| (r - lam).norm()).fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-7, "eigenvalue {lam} has no matching root ({nearest:e})");
        }
    }

    #[test]
    fn two_level_decay_has_five_active_poles() {
        let (pencil, dec) = decompose_model(&fig2(0.02)).unwrap();
        assert_eq!(dec.len(), 8);
        assert_eq!(dec.active_count(), 5);
        let report = classify_poles(&dec, &fig2(0.02)).unwrap();
        assert_eq!(report.pathways, Some(1));
        assert_eq!(report.rule_holds, Some(true));
        assert_eq!(report.restoring_rank, 1);
        let lin = verify_linearization(&pencil, &dec).unwrap();
        assert!(lin.passed(), "{lin:?}");
        assert_eq!((lin.checked, lin.skipped), (5, 3));
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json.as_array().unwrap().len(), 8);
        assert!(json[0].get("projector_norm").is_some());
    }

    #[test]
    fn perturbed_eigenvalue_fails_linearization() {
        let (pencil, dec) = decompose_model(&fig2(0.02)).unwrap();
        let i = dec.active().next().unwrap();
        let shifted = dec.eigenvalues[i] + 0.1;
        assert!(pencil.residual_ratio(shifted).unwrap() > TOL_LINEARIZATION);
    }

    #[test]
    fn completeness_and_biorthogonality() {
        for gc in [1e-3, 0.02, 1.0, 50.0, 1e4] {
            let (_, dec) = decompose_model(&fig2(gc)).unwrap();
            let sum = dec.projector_sum();
            assert!(frobenius(&(sum.matrix() - &identity(4))) < 1e-9, "gamma_c {gc}");
            let wv = dec.left.dot(&dec.right);
            assert!(frobenius(&(&wv - &identity(wv.nrows()))) < 1e-9);
            let max = dec.projector_norms().into_iter().fold(0.0, f64::max);
            for (p, &removed) in dec.projectors.iter().zip(&dec.removed_flags) {
                if removed {
                    assert!(p.frobenius_norm() <= 1e-9 * max, "gamma_c {gc}: {:e} vs {max:e}", p.frobenius_norm());
                }
            }
        }
    }

    #[test]
    fn pump_adds_a_pole() {
        let model = two_level(0.01, 0.3, 0.3, &[(1, 0, 0.15), (0, 1, 0.2)]);
        let (_, dec) = decompose_model(&model).unwrap();
        assert_eq!(dec.active_count(), 6);
        let report = classify_poles(&dec, &model).unwrap();
        assert_eq!(report.rule_prediction, Some(2));
        assert_eq!(report.rule_holds, Some(true));
    }

    #[test]
    fn spectra_approach_limits() {
        let model = fig2(1.0);
        let gens = build_generators(&model).unwrap();
        let norm = gens.lindblad.frobenius_norm();
        let lindblad = gens.lindblad.matrix().eig().unwrap().0;
        let gc = 1e3 * norm;
        let (_, dec) = decompose_model(&model.with_gamma_c(gc).unwrap()).unwrap();
        for target in lindblad.iter() {
            let nearest = dec
                .active()
                .map(|i| (dec.eigenvalues[i] - target).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= 10.0 * norm * norm / gc, "{target}: {nearest}");
        }
        let nh = gens.non_hermitian.matrix().eig().unwrap().0;
        let smallest = nh.iter().map(|z| z.norm()).filter(|&a| a > 0.0).fold(f64::INFINITY, f64::min);
        let gc = 1e-3 * smallest;
        let (_, dec) = decompose_model(&model.with_gamma_c(gc).unwrap()).unwrap();
        for target in nh.iter() {
            let nearest = dec
                .active()
                .map(|i| (dec.eigenvalues[i] - target).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= 10.0 * gc, "{target}: {nearest}");
        }
    }

    #[test]
    fn random_models_are_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(2..=3);
            let mut h = Array2::<C64>::zeros((n, n));
            for r in 0..n {
                h[[r, r]] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
                for c in 0..r {
                    let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    h[[r, c]] = z;
                    h[[c, r]] = z.conj();
                }
            }
            let mut chans = Vec::new();
            for from in 0..n {
                for to in 0..n {
                    if from != to && rng.gen_bool(0.5) {
                        chans.push(JumpChannel::elementary(n, from, to, rng.gen_range(0.05..2.0), "", ChannelKind::Decay));
                    }
                }
            }
            let gc = 10f64.powf(rng.gen_range(-3.0..3.0));
            let model = SystemModel::new(HilbertOperator::new(h).unwrap(), chans, gc).unwrap();
            let (_, dec) = decompose_model(&model).unwrap();
            assert_eq!(dec.len(), 2 * n * n);
            for i in dec.active() {
                assert!(dec.eigenvalues[i].re <= 1e-9, "{}", dec.eigenvalues[i]);
            }
        }
    }
}
