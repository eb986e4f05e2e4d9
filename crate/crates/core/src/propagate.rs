//! Evolution operator, state propagation and the observables built on it.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, SVD, UPLO};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::liouville::{
    build_generators, dagger, devectorize, frobenius, state_violation, vectorize, DensityMatrix, SuperOperator,
    SystemModel, TOL_NORM, TOL_PSD,
};
use crate::spectral::{decompose_model, SpectralDecomposition};

/// Modal form of the evolution operator, `U(t) = A diag(e^{lambda t}) B`.
struct ModalFactors<'a> {
    dec: &'a SpectralDecomposition,
}

impl<'a> ModalFactors<'a> {
    fn new(dec: &'a SpectralDecomposition) -> Self {
        Self { dec }
    }

    fn exponentials(&self, t: f64) -> Vec<C64> {
        self.dec.eigenvalues.iter().map(|&l| (l * t).exp()).collect()
    }

    fn operator(&self, t: f64) -> SuperOperator {
        let mut a = self.dec.outputs.clone();
        for (mut col, e) in a.columns_mut().into_iter().zip(self.exponentials(t)) {
            col.mapv_inplace(|z| z * e);
        }
        SuperOperator::new(a.dot(&self.dec.inputs)).expect("square product")
    }

    /// `vec(rho(t))` for an initial state already projected onto the modes.
    fn apply(&self, t: f64, coefficients: &Array1<C64>) -> Array1<C64> {
        let scaled: Array1<C64> = coefficients.iter().zip(self.exponentials(t)).map(|(c, e)| c * e).collect();
        self.dec.outputs.dot(&scaled)
    }

    fn coefficients(&self, rho0: &DensityMatrix) -> Array1<C64> {
        self.dec.inputs.dot(&vectorize(rho0.matrix()))
    }
}

pub(crate) fn trajectory_from_states(times: Vec<f64>, states: Vec<DensityMatrix>, labels: Option<&[String]>) -> Trajectory {
    Trajectory::from_states(times, states, labels)
}

/// `U_mixed(t) = sum_i X_i e^{lambda_i t}`.
///
/// Every mode is summed. Modes of the closed-form `-gamma_c` eigenspace have
/// zero weight; a pole that is merely flagged as removed by tolerance keeps its
/// tiny weight so that `U(0) = I` is not disturbed.
pub fn evolution_operator(dec: &SpectralDecomposition, t: f64) -> SuperOperator {
    ModalFactors::new(dec).operator(t)
}

/// A named real-valued column of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

/// Propagated states on a time grid together with derived observables.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    #[serde(serialize_with = "serialize_states")]
    pub states: Vec<DensityMatrix>,
    pub series: Vec<Series>,
}

fn serialize_states<S: Serializer>(states: &[DensityMatrix], serializer: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = serializer.serialize_seq(Some(states.len()))?;
    for state in states {
        let rows: Vec<Vec<[f64; 2]>> = state
            .matrix()
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
            .collect();
        seq.serialize_element(&rows)?;
    }
    seq.end()
}

impl Trajectory {
    fn from_states(times: Vec<f64>, states: Vec<DensityMatrix>, labels: Option<&[String]>) -> Self {
        let mut traj = Self {
            series: vec![Series {
                name: "trace".into(),
                values: states.iter().map(DensityMatrix::trace).collect(),
            }],
            times,
            states,
        };
        let dim = traj.states.first().map_or(0, DensityMatrix::dim);
        for k in 0..dim {
            let label = labels.map_or_else(|| k.to_string(), |l| l[k].clone());
            let values = traj.states.iter().map(|s| s.population(k)).collect();
            traj.push(format!("pop_{label}"), values);
        }
        traj
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.series.push(Series {
            name: name.into(),
            values,
        });
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series.iter().find(|s| s.name == name).map(|s| s.values.as_slice())
    }

    pub fn trace(&self) -> &[f64] {
        self.series("trace").expect("trace series is always present")
    }

    /// Adds `re_<name>` and `im_<name>` columns for the element `(row, col)`.
    pub fn add_coherence(&mut self, row: usize, col: usize, name: &str) {
        let re = self.states.iter().map(|s| s.matrix()[[row, col]].re).collect();
        let im = self.states.iter().map(|s| s.matrix()[[row, col]].im).collect();
        self.push(format!("re_{name}"), re);
        self.push(format!("im_{name}"), im);
    }

    /// Adds a fidelity column against reference states. Points where either
    /// trace has vanished are recorded as NaN.
    pub fn add_fidelity(&mut self, name: &str, reference: &[DensityMatrix]) -> Result<()> {
        let mut values = Vec::with_capacity(self.len());
        for (state, r) in self.states.iter().zip(reference) {
            match fidelity(state, r) {
                Ok(f) => values.push(f),
                Err(Error::VanishedTrace { .. }) => values.push(f64::NAN),
                Err(e) => return Err(e),
            }
        }
        self.push(name, values);
        Ok(())
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidParameter {
            name: "times".into(),
            reason: "must be finite and nonnegative".into(),
        });
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            name: "times".into(),
            reason: "must be strictly ascending".into(),
        });
    }
    Ok(())
}

fn checked_state(m: Array2<C64>, step: usize, time: f64) -> Result<DensityMatrix> {
    if let Some(violation) = state_violation(&m)? {
        return Err(Error::Propagation { step, time, violation });
    }
    DensityMatrix::new(m).map_err(|e| Error::Propagation {
        step,
        time,
        violation: e.to_string(),
    })
}

/// Propagates `rho0` through the spectral sum, checking every state.
pub fn propagate(dec: &SpectralDecomposition, rho0: &DensityMatrix, times: &[f64]) -> Result<Trajectory> {
    check_dims(dec.hilbert_dim(), rho0)?;
    check_times(times)?;
    let modal = ModalFactors::new(dec);
    let coefficients = modal.coefficients(rho0);
    let n = dec.hilbert_dim();
    let states = times
        .par_iter()
        .enumerate()
        .map(|(k, &t)| checked_state(devectorize(&modal.apply(t, &coefficients), n), k, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory::from_states(times.to_vec(), states, None))
}

fn check_dims(dim: usize, rho0: &DensityMatrix) -> Result<()> {
    if rho0.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: rho0.dim(),
            context: "initial state",
        });
    }
    Ok(())
}

/// States `exp(L t) rho0` for an arbitrary generator, without validity checks.
pub fn propagate_generator(generator: &SuperOperator, rho0: &DensityMatrix, times: &[f64]) -> Result<Vec<Array2<C64>>> {
    check_dims(generator.hilbert_dim(), rho0)?;
    check_times(times)?;
    let v0 = vectorize(rho0.matrix());
    let n = generator.hilbert_dim();
    Ok(times
        .par_iter()
        .map(|&t| devectorize(&expm(generator.matrix(), t).dot(&v0), n))
        .collect())
}

/// Propagates a model, falling back to `exp(L_NH t)` when `gamma_c = 0`.
pub fn propagate_model(model: &SystemModel, rho0: &DensityMatrix, times: &[f64]) -> Result<Trajectory> {
    let mut traj = if model.gamma_c() == 0.0 {
        let gens = build_generators(model)?;
        let raw = propagate_generator(&gens.non_hermitian, rho0, times)?;
        let states = raw
            .into_iter()
            .enumerate()
            .map(|(k, m)| checked_state(m, k, times[k]))
            .collect::<Result<Vec<_>>>()?;
        Trajectory::from_states(times.to_vec(), states, None)
    } else {
        let (_, dec) = decompose_model(model)?;
        propagate(&dec, rho0, times)?
    };
    let labels = model.labels();
    for (k, label) in labels.iter().enumerate() {
        traj.series[k + 1].name = format!("pop_{label}");
    }
    Ok(traj)
}

/// `rho / Tr rho`.
pub fn normalized_state(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let tr = rho.trace();
    if tr <= TOL_NORM {
        return Err(Error::VanishedTrace { trace: tr });
    }
    DensityMatrix::new(rho.matrix().mapv(|z| z / tr))
}

/// Hermitian square root. Eigenvalues in `[-TOL_PSD, 0)` and those below the
/// eigensolver's accuracy are taken as zero.
fn psd_sqrt(m: &Array2<C64>) -> Result<Array2<C64>> {
    let herm = (m + &dagger(m)).mapv(|z| z * 0.5);
    let (vals, vecs) = herm.eigh(UPLO::Lower)?;
    let scale = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let noise = 4.0 * f64::EPSILON * scale * vals.len() as f64;
    let mut scaled = vecs.clone();
    for (mut col, &v) in scaled.columns_mut().into_iter().zip(vals.iter()) {
        if v < -TOL_PSD {
            return Err(Error::NotPositive { min_eigenvalue: v });
        }
        let root = if v > noise { v.sqrt() } else { 0.0 };
        col.mapv_inplace(|z| z * root);
    }
    Ok(scaled.dot(&dagger(&vecs)))
}

/// Normalized Uhlmann fidelity `Tr sqrt(sqrt(r) rho sqrt(r)) / sqrt(Tr r Tr rho)`.
pub fn fidelity(rho: &DensityMatrix, reference: &DensityMatrix) -> Result<f64> {
    let (tr, tr_ref) = (rho.trace(), reference.trace());
    for t in [tr, tr_ref] {
        if t <= TOL_NORM {
            return Err(Error::VanishedTrace { trace: t });
        }
    }
    // Tr sqrt(sqrt(r) rho sqrt(r)) is the trace norm of sqrt(rho) sqrt(r).
    let product = psd_sqrt(rho.matrix())?.dot(&psd_sqrt(reference.matrix())?);
    let (_, singular, _) = product.svd(false, false)?;
    let f = singular.sum() / (tr * tr_ref).sqrt();
    Ok(f.clamp(0.0, 1.0))
}

/// Per-mode traces `t_i = Tr X_i rho0`.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectorTraceReport {
    /// Weight of the steady pole, if the spectrum has one.
    pub t0: Option<f64>,
    /// Sum of the remaining weights.
    pub t_rest: f64,
    pub per_pole: Vec<C64>,
    #[serde(skip)]
    pub steady_index: Option<usize>,
}

impl ProjectorTraceReport {
    pub fn total(&self) -> C64 {
        self.per_pole.iter().sum()
    }
}

pub fn projector_traces(dec: &SpectralDecomposition, rho0: &DensityMatrix) -> Result<ProjectorTraceReport> {
    check_dims(dec.hilbert_dim(), rho0)?;
    let coefficients = ModalFactors::new(dec).coefficients(rho0);
    let n = dec.hilbert_dim();
    let per_pole: Vec<C64> = (0..dec.len())
        .map(|i| {
            let tr: C64 = (0..n).map(|k| dec.outputs[[k * n + k, i]]).sum();
            tr * coefficients[i]
        })
        .collect();
    let steady_index = dec.steady_pole();
    let t0 = steady_index.map(|i| per_pole[i].re);
    let t_rest = per_pole
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != steady_index)
        .map(|(_, t)| t.re)
        .sum();
    Ok(ProjectorTraceReport {
        t0,
        t_rest,
        per_pole,
        steady_index,
    })
}

/// `||U(t + tau) - U(t) U(tau)||_F`.
pub fn semigroup_defect(dec: &SpectralDecomposition, t: f64, tau: f64) -> f64 {
    let modal = ModalFactors::new(dec);
    let joint = modal.operator(t + tau);
    let product = modal.operator(t).matrix().dot(modal.operator(tau).matrix());
    frobenius(&(joint.matrix() - &product))
}

/// One successfully evaluated point of a `gamma_c` sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    /// All `2N^2` eigenvalues sorted by real then imaginary part.
    pub eigenvalues: Vec<C64>,
    pub n_active: usize,
    pub trace: Vec<f64>,
    pub t0: Option<f64>,
    pub t_rest: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub gamma_c: f64,
    #[serde(flatten)]
    pub record: Option<SweepRecord>,
    pub error: Option<String>,
}

fn sweep_point(template: &SystemModel, gamma_c: f64, rho0: &DensityMatrix, times: &[f64]) -> Result<SweepRecord> {
    let model = template.with_gamma_c(gamma_c)?;
    let (_, dec) = decompose_model(&model)?;
    let traj = propagate(&dec, rho0, times)?;
    let report = projector_traces(&dec, rho0)?;
    let mut eigenvalues = dec.eigenvalues.clone();
    eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(SweepRecord {
        eigenvalues,
        n_active: dec.active_count(),
        trace: traj.trace().to_vec(),
        t0: report.t0,
        t_rest: report.t_rest,
    })
}

/// Decomposes and propagates the template at each `gamma_c`. Points are
/// evaluated in parallel on the current rayon pool; failures are recorded per
/// point and the result is sorted by `gamma_c`.
pub fn gamma_c_sweep(
    template: &SystemModel,
    gamma_c: &[f64],
    rho0: &DensityMatrix,
    times: &[f64],
) -> Result<Vec<SweepPoint>> {
    if gamma_c.is_empty() {
        return Err(Error::InvalidParameter {
            name: "gamma_c".into(),
            reason: "sweep needs at least one point".into(),
        });
    }
    check_dims(template.dim(), rho0)?;
    check_times(times)?;
    let mut points: Vec<SweepPoint> = gamma_c
        .par_iter()
        .map(|&gc| match sweep_point(template, gc, rho0, times) {
            Ok(record) => SweepPoint {
                gamma_c: gc,
                record: Some(record),
                error: None,
            },
            Err(e) => SweepPoint {
                gamma_c: gc,
                record: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    points.sort_by(|a, b| a.gamma_c.total_cmp(&b.gamma_c));
    Ok(points)
}
