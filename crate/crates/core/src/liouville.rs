//! Hilbert- and Liouville-space building blocks.
//!
//! Density matrices are vectorized by column stacking: entry `(r, c)` of an
//! `N x N` matrix lands at index `c * N + r`. Under this layout the product
//! `A rho B` maps to `(B^T (x) A) vec(rho)`, so every superoperator below is a
//! sum of Kronecker products written directly from its Hilbert-space action.

use ndarray::linalg::kron;
use ndarray::{Array1, Array2};
use ndarray_linalg::{EigValsh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Relative tolerance on Hamiltonian Hermiticity, scaled by the largest entry.
pub const TOL_HERM_HAMILTONIAN: f64 = 1e-12;
/// Absolute tolerances applied to every density matrix produced or accepted.
pub const TOL_HERM_STATE: f64 = 1e-9;
pub const TOL_TRACE: f64 = 1e-9;
pub const TOL_PSD: f64 = 1e-9;
/// Traces at or below this are treated as vanished by normalizing observables.
pub const TOL_NORM: f64 = 1e-12;

pub(crate) fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

pub(crate) fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

pub(crate) fn frobenius(m: &Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn max_abs(m: &Array2<C64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest entrywise deviation `|m - m^dagger|`.
pub(crate) fn hermitian_deviation(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[[r, c]] - m[[c, r]].conj()).norm());
        }
    }
    worst
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub(crate) fn min_eigenvalue(m: &Array2<C64>) -> Result<f64> {
    let herm = (m + &dagger(m)).mapv(|z| z * 0.5);
    let vals = herm.eigvalsh(UPLO::Lower)?;
    Ok(vals.iter().cloned().fold(f64::INFINITY, f64::min))
}

fn check_square(m: &Array2<C64>, context: &'static str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
            context,
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite(context));
    }
    Ok(())
}

/// A square operator on the system Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct HilbertOperator {
    entries: Array2<C64>,
}

impl HilbertOperator {
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        check_square(&entries, "Hilbert-space operator")?;
        Ok(Self { entries })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: Array2::zeros((dim, dim)),
        }
    }

    /// `|to><from|` scaled by `amplitude`.
    pub fn transition(dim: usize, to: usize, from: usize, amplitude: f64) -> Self {
        let mut entries = Array2::zeros((dim, dim));
        entries[[to, from]] = C64::new(amplitude, 0.0);
        Self { entries }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut entries = Array2::zeros((n, n));
        for (i, v) in values.iter().enumerate() {
            entries[[i, i]] = C64::new(*v, 0.0);
        }
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self {
            entries: dagger(&self.entries),
        }
    }

    pub fn hermitian_deviation(&self) -> f64 {
        hermitian_deviation(&self.entries)
    }

    /// Rejects the operator unless it is Hermitian to `1e-12 * max|entry|`.
    pub fn ensure_hermitian(&self) -> Result<()> {
        let tolerance = TOL_HERM_HAMILTONIAN * max_abs(&self.entries);
        let max_deviation = self.hermitian_deviation();
        if max_deviation > tolerance {
            return Err(Error::NotHermitian {
                max_deviation,
                tolerance,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Decay,
    Pump,
    Dephasing,
}

/// An elementary jump `sqrt(rate) |to><from|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementaryJump {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

/// One dissipative channel. The rate is folded into the operator.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpChannel {
    pub operator: HilbertOperator,
    pub label: String,
    pub kind: ChannelKind,
}

impl JumpChannel {
    pub fn new(operator: HilbertOperator, label: impl Into<String>, kind: ChannelKind) -> Self {
        Self {
            operator,
            label: label.into(),
            kind,
        }
    }

    /// `sqrt(rate) |to><from|` on a `dim`-level system.
    pub fn elementary(
        dim: usize,
        from: usize,
        to: usize,
        rate: f64,
        label: impl Into<String>,
        kind: ChannelKind,
    ) -> Self {
        Self::new(
            HilbertOperator::transition(dim, to, from, rate.sqrt()),
            label,
            kind,
        )
    }

    /// Recognizes operators with a single nonzero off-diagonal entry.
    pub fn as_elementary(&self) -> Option<ElementaryJump> {
        let m = self.operator.matrix();
        let mut found = None;
        for ((r, c), z) in m.indexed_iter() {
            if z.norm() > 0.0 {
                if found.is_some() || r == c {
                    return None;
                }
                found = Some(ElementaryJump {
                    from: c,
                    to: r,
                    rate: z.norm_sqr(),
                });
            }
        }
        found
    }
}

/// Hamiltonian, jump channels and the continuum return rate `gamma_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    hamiltonian: HilbertOperator,
    channels: Vec<JumpChannel>,
    gamma_c: f64,
    labels: Vec<String>,
}

impl SystemModel {
    pub fn new(hamiltonian: HilbertOperator, channels: Vec<JumpChannel>, gamma_c: f64) -> Result<Self> {
        let labels = (0..hamiltonian.dim()).map(|i| i.to_string()).collect();
        Self::with_labels(hamiltonian, channels, gamma_c, labels)
    }

    pub fn with_labels(
        hamiltonian: HilbertOperator,
        channels: Vec<JumpChannel>,
        gamma_c: f64,
        labels: Vec<String>,
    ) -> Result<Self> {
        hamiltonian.ensure_hermitian()?;
        let dim = hamiltonian.dim();
        for ch in &channels {
            if ch.operator.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: ch.operator.dim(),
                    context: "jump channel",
                });
            }
        }
        if labels.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: labels.len(),
                context: "basis labels",
            });
        }
        validate_gamma_c(gamma_c)?;
        Ok(Self {
            hamiltonian,
            channels,
            gamma_c,
            labels,
        })
    }

    /// Same system with a different return rate.
    pub fn with_gamma_c(&self, gamma_c: f64) -> Result<Self> {
        validate_gamma_c(gamma_c)?;
        Ok(Self {
            gamma_c,
            ..self.clone()
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn liouville_dim(&self) -> usize {
        self.dim() * self.dim()
    }

    pub fn hamiltonian(&self) -> &HilbertOperator {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[JumpChannel] {
        &self.channels
    }

    pub fn gamma_c(&self) -> f64 {
        self.gamma_c
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Elementary form of every channel, or `None` if any channel is not `|b><a|`.
    pub fn elementary_jumps(&self) -> Option<Vec<ElementaryJump>> {
        self.channels.iter().map(|c| c.as_elementary()).collect()
    }
}

fn validate_gamma_c(gamma_c: f64) -> Result<()> {
    if !gamma_c.is_finite() || gamma_c < 0.0 {
        return Err(Error::InvalidParameter {
            name: "gamma_c".into(),
            reason: format!("must be finite and nonnegative, got {gamma_c}"),
        });
    }
    Ok(())
}

/// A linear map on vectorized density matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    hilbert_dim: usize,
    entries: Array2<C64>,
}

impl SuperOperator {
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        check_square(&entries, "superoperator")?;
        let n2 = entries.nrows();
        let n = (n2 as f64).sqrt().round() as usize;
        if n * n != n2 {
            return Err(Error::InvalidParameter {
                name: "superoperator".into(),
                reason: format!("dimension {n2} is not a perfect square"),
            });
        }
        Ok(Self {
            hilbert_dim: n,
            entries,
        })
    }

    pub(crate) fn from_parts(hilbert_dim: usize, entries: Array2<C64>) -> Self {
        debug_assert_eq!(entries.nrows(), hilbert_dim * hilbert_dim);
        Self { hilbert_dim, entries }
    }

    pub fn identity(hilbert_dim: usize) -> Self {
        Self::from_parts(hilbert_dim, identity(hilbert_dim * hilbert_dim))
    }

    pub fn zeros(hilbert_dim: usize) -> Self {
        let n2 = hilbert_dim * hilbert_dim;
        Self::from_parts(hilbert_dim, Array2::zeros((n2, n2)))
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.entries
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.entries)
    }

    /// Action on a Hilbert-space matrix, returned as a matrix.
    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        devectorize(&self.entries.dot(&vectorize(rho)), self.hilbert_dim)
    }

    pub fn apply_state(&self, rho: &DensityMatrix) -> Array2<C64> {
        self.apply(rho.matrix())
    }
}

impl std::ops::Add for &SuperOperator {
    type Output = SuperOperator;
    fn add(self, rhs: &SuperOperator) -> SuperOperator {
        SuperOperator::from_parts(self.hilbert_dim, &self.entries + &rhs.entries)
    }
}

impl std::ops::Sub for &SuperOperator {
    type Output = SuperOperator;
    fn sub(self, rhs: &SuperOperator) -> SuperOperator {
        SuperOperator::from_parts(self.hilbert_dim, &self.entries - &rhs.entries)
    }
}

impl std::ops::Mul<C64> for &SuperOperator {
    type Output = SuperOperator;
    fn mul(self, rhs: C64) -> SuperOperator {
        SuperOperator::from_parts(self.hilbert_dim, self.entries.mapv(|z| z * rhs))
    }
}

/// A validated system density matrix with `0 <= Tr <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: Array2<C64>,
}

impl DensityMatrix {
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        check_square(&entries, "density matrix")?;
        if let Some(violation) = state_violation(&entries)? {
            return Err(Error::InvalidState(violation));
        }
        Ok(Self { entries })
    }

    /// `|i><i|` on a `dim`-level system.
    pub fn basis_projector(dim: usize, i: usize) -> Self {
        let mut entries = Array2::zeros((dim, dim));
        entries[[i, i]] = C64::new(1.0, 0.0);
        Self { entries }
    }

    /// `|psi><psi|` for a normalized state vector.
    pub fn pure(psi: &Array1<C64>) -> Result<Self> {
        let n = psi.len();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm <= TOL_NORM {
            return Err(Error::VanishedTrace { trace: norm * norm });
        }
        let mut entries = Array2::zeros((n, n));
        for r in 0..n {
            for c in 0..n {
                entries[[r, c]] = psi[r] * psi[c].conj() / (norm * norm);
            }
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.diag().iter().map(|z| z.re).sum()
    }

    pub fn population(&self, k: usize) -> f64 {
        self.entries[[k, k]].re
    }
}

/// Describes the first violated density-matrix invariant, if any.
pub(crate) fn state_violation(m: &Array2<C64>) -> Result<Option<String>> {
    let herm = hermitian_deviation(m);
    if herm > TOL_HERM_STATE {
        return Ok(Some(format!("Hermiticity deviation {herm:e} exceeds {TOL_HERM_STATE:e}")));
    }
    let tr: f64 = m.diag().iter().map(|z| z.re).sum();
    if tr < -TOL_TRACE || tr > 1.0 + TOL_TRACE {
        return Ok(Some(format!("trace {tr} outside [0, 1]")));
    }
    let min_eig = min_eigenvalue(m)?;
    if min_eig < -TOL_PSD {
        return Ok(Some(format!("eigenvalue {min_eig:e} below -{TOL_PSD:e}")));
    }
    Ok(None)
}

/// Column-stacks `rho`: entry `(r, c)` goes to index `c * N + r`.
pub fn vectorize(rho: &Array2<C64>) -> Array1<C64> {
    let n = rho.nrows();
    let mut v = Array1::zeros(n * rho.ncols());
    for ((r, c), z) in rho.indexed_iter() {
        v[c * n + r] = *z;
    }
    v
}

/// Inverse of [`vectorize`].
pub fn devectorize(v: &Array1<C64>, n: usize) -> Array2<C64> {
    Array2::from_shape_fn((n, n), |(r, c)| v[c * n + r])
}

/// `L_H = -i (1 (x) H - H^* (x) 1)`.
pub fn build_hamiltonian_superop(h: &HilbertOperator) -> Result<SuperOperator> {
    h.ensure_hermitian()?;
    let n = h.dim();
    let id = identity(n);
    let m = h.matrix();
    let lh = &kron(&id, m) - &kron(&m.mapv(|z| z.conj()), &id);
    Ok(SuperOperator::from_parts(n, lh.mapv(|z| z * C64::new(0.0, -1.0))))
}

/// `F^*F (x)`-free half of the dissipator: `-1/2 [(F^dag F)^T (x) 1 + 1 (x) F^dag F]`.
fn anticommutator_part(f: &Array2<C64>) -> Array2<C64> {
    let n = f.nrows();
    let id = identity(n);
    let fdf = dagger(f).dot(f);
    (&kron(&fdf.t().to_owned(), &id) + &kron(&id, &fdf)).mapv(|z| z * -0.5)
}

/// `F^* (x) F`, the population-restoring part of one channel.
fn restoring_part(f: &Array2<C64>) -> Array2<C64> {
    kron(&f.mapv(|z| z.conj()), f)
}

/// Lindblad dissipator `F^* (x) F - 1/2 [(F^dag F)^T (x) 1 + 1 (x) F^dag F]`.
pub fn build_dissipator(channel: &JumpChannel) -> SuperOperator {
    let f = channel.operator.matrix();
    SuperOperator::from_parts(f.nrows(), &restoring_part(f) + &anticommutator_part(f))
}

/// The generators derived from a [`SystemModel`].
#[derive(Debug, Clone)]
pub struct Generators {
    pub hamiltonian: SuperOperator,
    pub non_hermitian: SuperOperator,
    pub lindblad: SuperOperator,
    /// `J = sum_i F_i^* (x) F_i`.
    pub restoring: SuperOperator,
    pub gamma_c: f64,
}

pub fn build_generators(model: &SystemModel) -> Result<Generators> {
    let n = model.dim();
    let hamiltonian = build_hamiltonian_superop(model.hamiltonian())?;
    let mut nh = hamiltonian.matrix().clone();
    let mut j = Array2::<C64>::zeros((n * n, n * n));
    for ch in model.channels() {
        let f = ch.operator.matrix();
        nh += &anticommutator_part(f);
        j += &restoring_part(f);
    }
    let lindblad = &nh + &j;
    Ok(Generators {
        hamiltonian,
        non_hermitian: SuperOperator::from_parts(n, nh),
        lindblad: SuperOperator::from_parts(n, lindblad),
        restoring: SuperOperator::from_parts(n, j),
        gamma_c: model.gamma_c(),
    })
}

impl Generators {
    pub fn hilbert_dim(&self) -> usize {
        self.lindblad.hilbert_dim()
    }

    fn check_pole(&self, z: C64) -> Result<()> {
        let gc = self.gamma_c;
        if (z + gc).norm() <= f64::EPSILON * gc.max(1.0) {
            return Err(Error::Pole { gamma_c: gc });
        }
        Ok(())
    }

    /// `L_NH + gamma_c / (z + gamma_c) J`.
    pub fn l_mixed(&self, z: C64) -> Result<SuperOperator> {
        self.check_pole(z)?;
        let weight = C64::new(self.gamma_c, 0.0) / (z + self.gamma_c);
        Ok(&self.non_hermitian + &(&self.restoring * weight))
    }

    /// `L_Lindblad - z / (z + gamma_c) J`; algebraically equal to [`Self::l_mixed`].
    pub fn l_mixed_lindblad_form(&self, z: C64) -> Result<SuperOperator> {
        self.check_pole(z)?;
        let weight = z / (z + self.gamma_c);
        Ok(&self.lindblad - &(&self.restoring * weight))
    }
}

pub fn eval_l_mixed(model: &SystemModel, z: C64) -> Result<SuperOperator> {
    build_generators(model)?.l_mixed(z)
}
