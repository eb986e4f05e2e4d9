//! Explicit-continuum realization of a model.
//!
//! Every elementary jump `sqrt(gamma) |b><a|` is replaced by a band of `K`
//! continuum levels at energies spread uniformly over `[-W, W]`. Level `a`
//! couples to each of them with `V = sqrt(gamma dw / 2 pi)`, which reproduces
//! the decay rate `gamma` by the golden rule, and each continuum level relaxes
//! to `b` through a Lindblad jump `sqrt(gamma_c) |b><k|`. The full model is an
//! ordinary Lindblad equation on `N + sum K` levels; the reduced state is the
//! `N x N` system block.
//!
//! Propagation works in the eigenbasis of the effective Hamiltonian
//! `H_eff = H - i gamma_c / 2 P_cont = R diag(e) R^{-1}`. There the coherent
//! part acts elementwise and the jump part has rank equal to the number of
//! channels, so one Taylor step costs `O(channels * D^2)` instead of the
//! `O(D^4)` of a dense Liouvillian.

use std::f64::consts::PI;

use ndarray::{s, Array1, Array2, Zip};
use ndarray_linalg::{Eig, Inverse};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::liouville::{dagger, state_violation, DensityMatrix, SystemModel};
use crate::propagate::{propagate_model, Trajectory};

/// Default cap on the full Liouville dimension `D^2`.
pub const DEFAULT_LIOUVILLE_CAP: usize = 10_000;
/// Tolerance on the full-model trace.
const TOL_FULL_TRACE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuumSpec {
    k_count: usize,
    half_bandwidth: f64,
}

impl ContinuumSpec {
    pub fn new(k_count: usize, half_bandwidth: f64) -> Result<Self> {
        if k_count < 8 {
            return Err(Error::InvalidParameter {
                name: "k".into(),
                reason: format!("need at least 8 continuum levels, got {k_count}"),
            });
        }
        if !(half_bandwidth.is_finite() && half_bandwidth > 0.0) {
            return Err(Error::InvalidParameter {
                name: "w".into(),
                reason: format!("half bandwidth must be positive, got {half_bandwidth}"),
            });
        }
        Ok(Self {
            k_count,
            half_bandwidth,
        })
    }

    /// `K = 64` and `W = 20 max(|detuning|, rate, gamma_c, |coupling|)`.
    pub fn default_for(model: &SystemModel) -> Self {
        let h = model.hamiltonian().matrix();
        let n = model.dim();
        let mut scale = model.gamma_c();
        for r in 0..n {
            for c in 0..n {
                scale = scale.max(h[[r, c]].norm());
            }
        }
        for ch in model.channels() {
            if let Some(j) = ch.as_elementary() {
                scale = scale.max(j.rate);
            }
        }
        Self::new(64, 20.0 * scale.max(1e-3)).expect("positive default")
    }

    pub fn k_count(&self) -> usize {
        self.k_count
    }

    pub fn half_bandwidth(&self) -> f64 {
        self.half_bandwidth
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_bandwidth / (self.k_count - 1) as f64
    }

    pub fn energies(&self) -> impl Iterator<Item = f64> + '_ {
        let dw = self.spacing();
        (0..self.k_count).map(move |k| -self.half_bandwidth + k as f64 * dw)
    }

    /// Time after which the discrete continuum revives, `2 pi / dw`.
    pub fn recurrence_time(&self) -> f64 {
        2.0 * PI / self.spacing()
    }
}

/// One continuum band: the level it drains, the level it refills and where
/// its levels sit in the full basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub label: String,
    pub source: usize,
    pub target: usize,
    pub rate: f64,
    pub offset: usize,
}

#[derive(Debug, Clone)]
pub struct MicroscopicModel {
    pub base: SystemModel,
    pub continuum: ContinuumSpec,
    pub bands: Vec<Band>,
    pub full_dim: usize,
    pub hamiltonian: Array2<C64>,
}

impl MicroscopicModel {
    pub fn liouville_dim(&self) -> usize {
        self.full_dim * self.full_dim
    }

    pub fn gamma_c(&self) -> f64 {
        self.base.gamma_c()
    }
}

pub fn build_microscopic(base: &SystemModel, spec: ContinuumSpec) -> Result<MicroscopicModel> {
    let n = base.dim();
    let k = spec.k_count();
    let mut bands = Vec::new();
    for ch in base.channels() {
        let jump = ch.as_elementary().ok_or_else(|| Error::UnsupportedChannel {
            label: ch.label.clone(),
        })?;
        bands.push(Band {
            label: ch.label.clone(),
            source: jump.from,
            target: jump.to,
            rate: jump.rate,
            offset: n + bands.len() * k,
        });
    }
    let full_dim = n + bands.len() * k;
    let mut h = Array2::<C64>::zeros((full_dim, full_dim));
    h.slice_mut(s![..n, ..n]).assign(base.hamiltonian().matrix());
    let dw = spec.spacing();
    for band in &bands {
        let v = C64::new((band.rate * dw / (2.0 * PI)).sqrt(), 0.0);
        for (i, energy) in spec.energies().enumerate() {
            let idx = band.offset + i;
            h[[idx, idx]] = C64::new(energy, 0.0);
            h[[idx, band.source]] = v;
            h[[band.source, idx]] = v;
        }
    }
    Ok(MicroscopicModel {
        base: base.clone(),
        continuum: spec,
        bands,
        full_dim,
        hamiltonian: h,
    })
}

/// Full Lindblad generator of the microscopic model, column-stacked. Only
/// practical for small continua; used as a cross-check.
pub fn full_liouvillian(micro: &MicroscopicModel) -> Array2<C64> {
    use crate::liouville::{build_dissipator, build_hamiltonian_superop, ChannelKind, HilbertOperator, JumpChannel};
    let d = micro.full_dim;
    let h = HilbertOperator::new(micro.hamiltonian.clone()).expect("Hermitian by construction");
    let mut l = build_hamiltonian_superop(&h).expect("Hermitian by construction").into_matrix();
    for band in &micro.bands {
        for i in 0..micro.continuum.k_count() {
            let ch = JumpChannel::elementary(d, band.offset + i, band.target, micro.gamma_c(), "", ChannelKind::Decay);
            l += build_dissipator(&ch).matrix();
        }
    }
    l
}

/// Reduced dynamics of a microscopic run.
#[derive(Debug, Clone)]
pub struct MicroscopicRun {
    pub reduced: Trajectory,
    pub full_trace: Vec<f64>,
    pub continuum_population: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Generator in effective-Hamiltonian eigencoordinates
/// `x -> C o x + sum_c <Q_c, x> S_c`.
struct EigenGenerator {
    coherent: Array2<C64>,
    feeds: Vec<(Array2<C64>, Array2<C64>)>,
    norm: f64,
}

impl EigenGenerator {
    fn apply(&self, x: &Array2<C64>) -> Array2<C64> {
        let mut y = &self.coherent * x;
        for (q, src) in &self.feeds {
            let p: C64 = Zip::from(q).and(x).fold(C64::new(0.0, 0.0), |acc, a, b| acc + a * b);
            y.scaled_add(p, src);
        }
        y
    }

    /// `exp(h G) x` by Taylor series, with `h ||G|| <= 1`.
    fn step(&self, x: &Array2<C64>, h: f64) -> Array2<C64> {
        let mut out = x.clone();
        let mut term = x.clone();
        let scale = x.iter().fold(0.0_f64, |a, z| a.max(z.norm())).max(f64::MIN_POSITIVE);
        for k in 1..60 {
            term = self.apply(&term).mapv(|z| z * (h / k as f64));
            out += &term;
            if term.iter().fold(0.0_f64, |a, z| a.max(z.norm())) <= 1e-17 * scale {
                break;
            }
        }
        out
    }
}

pub fn run_microscopic(
    micro: &MicroscopicModel,
    rho0: &DensityMatrix,
    times: &[f64],
    liouville_cap: usize,
) -> Result<MicroscopicRun> {
    let d = micro.full_dim;
    let n = micro.base.dim();
    if micro.liouville_dim() > liouville_cap {
        return Err(Error::TooLarge {
            dim: micro.liouville_dim(),
            cap: liouville_cap,
        });
    }
    if rho0.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho0.dim(),
            context: "initial state",
        });
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidParameter {
            name: "times".into(),
            reason: "must be finite, nonnegative and strictly ascending".into(),
        });
    }
    let mut warnings = Vec::new();
    if let Some(&end) = times.last() {
        let horizon = micro.continuum.recurrence_time();
        if end > horizon {
            warnings.push(format!(
                "end time {end} exceeds the continuum recurrence time {horizon:.4}; raise K or lower W"
            ));
        }
    }

    let gc = micro.gamma_c();
    let mut h_eff = micro.hamiltonian.clone();
    for i in n..d {
        h_eff[[i, i]] -= C64::new(0.0, gc / 2.0);
    }
    let (energies, r) = h_eff.eig()?;
    let r_inv = r.inv()?;
    let r_dag = dagger(&r);

    let coherent = Array2::from_shape_fn((d, d), |(m, k)| -C64::i() * (energies[m] - energies[k].conj()));
    let k_count = micro.continuum.k_count();
    let mut feeds = Vec::with_capacity(micro.bands.len());
    let mut norm = coherent.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    for band in &micro.bands {
        // <Q, x> = gamma_c Tr(P_band R x R^dagger) = sum_mk (gamma_c R^T P conj(R))_mk x_mk
        let rows = r.slice(s![band.offset..band.offset + k_count, ..]);
        let gram = rows.t().dot(&rows.mapv(|z| z.conj())).mapv(|z| z * gc);
        let col = r_inv.column(band.target).to_owned();
        let src = Array2::from_shape_fn((d, d), |(m, k)| col[m] * col[k].conj());
        norm += frob(&gram) * frob(&src);
        feeds.push((gram, src));
    }
    let gen = EigenGenerator { coherent, feeds, norm };

    let mut full0 = Array2::<C64>::zeros((d, d));
    full0.slice_mut(s![..n, ..n]).assign(rho0.matrix());
    let mut x = r_inv.dot(&full0).dot(&dagger(&r_inv));

    let r_sys = r.slice(s![..n, ..]).to_owned();
    let mut states = Vec::with_capacity(times.len());
    let mut full_trace = Vec::with_capacity(times.len());
    let mut continuum_population = Vec::with_capacity(times.len());
    let mut now = 0.0;
    for (step, &t) in times.iter().enumerate() {
        let span = t - now;
        if span > 0.0 {
            let count = (span * gen.norm).ceil().max(1.0) as usize;
            let h = span / count as f64;
            for _ in 0..count {
                x = gen.step(&x, h);
            }
        }
        now = t;
        let full = r.dot(&x).dot(&r_dag);
        let tr: f64 = full.diag().iter().map(|z| z.re).sum();
        if (tr - 1.0).abs() > TOL_FULL_TRACE {
            return Err(Error::Propagation {
                step,
                time: t,
                violation: format!("full-model trace {tr} deviates from 1"),
            });
        }
        if let Some(violation) = state_violation(&full)? {
            return Err(Error::Propagation { step, time: t, violation });
        }
        let reduced = r_sys.dot(&x).dot(&dagger(&r_sys));
        let continuum: f64 = full.diag().iter().skip(n).map(|z| z.re).sum();
        full_trace.push(tr);
        continuum_population.push(continuum);
        states.push(DensityMatrix::new(reduced).map_err(|e| Error::Propagation {
            step,
            time: t,
            violation: e.to_string(),
        })?);
    }
    let mut reduced = crate::propagate::trajectory_from_states(times.to_vec(), states, Some(micro.base.labels()));
    reduced.push("continuum", continuum_population.clone());
    Ok(MicroscopicRun {
        reduced,
        full_trace,
        continuum_population,
        warnings,
    })
}

fn frob(m: &Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// The leading part of `times` that lies before the continuum recurrence.
pub fn within_recurrence(times: &[f64], spec: &ContinuumSpec) -> Vec<f64> {
    let horizon = spec.recurrence_time();
    times.iter().copied().take_while(|&t| t < horizon).collect()
}

/// Largest entrywise and trace deviations between two trajectories.
pub fn sup_deviation(a: &Trajectory, b: &Trajectory) -> (f64, f64) {
    let mut sup = 0.0_f64;
    let mut trace = 0.0_f64;
    for (x, y) in a.states.iter().zip(&b.states) {
        let diff = x.matrix() - y.matrix();
        sup = sup.max(diff.iter().fold(0.0, |acc, z| acc.max(z.norm())));
        trace = trace.max((x.trace() - y.trace()).abs());
    }
    (sup, trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub k: usize,
    pub w: f64,
    pub sup_error: f64,
    pub trace_error: f64,
}

/// Deviation of the microscopic model from the closed-form propagator on a
/// `K x W` grid. Cells run in parallel.
pub fn convergence_study(
    base: &SystemModel,
    rho0: &DensityMatrix,
    times: &[f64],
    k_values: &[usize],
    w_values: &[f64],
    liouville_cap: usize,
) -> Result<Vec<ConvergenceRow>> {
    if k_values.len() < 2 || w_values.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "convergence grid".into(),
            reason: "need at least two values along each axis".into(),
        });
    }
    let reference = propagate_model(base, rho0, times)?;
    let cells: Vec<(usize, f64)> = k_values
        .iter()
        .flat_map(|&k| w_values.iter().map(move |&w| (k, w)))
        .collect();
    cells
        .par_iter()
        .map(|&(k, w)| {
            let micro = build_microscopic(base, ContinuumSpec::new(k, w)?)?;
            let run = run_microscopic(&micro, rho0, times, liouville_cap)?;
            let (sup_error, trace_error) = sup_deviation(&run.reduced, &reference);
            Ok(ConvergenceRow {
                k,
                w,
                sup_error,
                trace_error,
            })
        })
        .collect()
}

/// Writes rows as `K,W,sup_error,trace_error` CSV.
pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("K,W,sup_error,trace_error\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e}\n",
            r.k, r.w, r.sup_error, r.trace_error
        ));
    }
    out
}

/// `vec(rho(t))` of the full model via the dense generator; test helper.
#[doc(hidden)]
pub fn dense_full_states(micro: &MicroscopicModel, rho0: &DensityMatrix, times: &[f64]) -> Vec<Array2<C64>> {
    let d = micro.full_dim;
    let n = micro.base.dim();
    let l = full_liouvillian(micro);
    let mut full0 = Array2::<C64>::zeros((d, d));
    full0.slice_mut(s![..n, ..n]).assign(rho0.matrix());
    let v0: Array1<C64> = crate::liouville::vectorize(&full0);
    times
        .iter()
        .map(|&t| crate::liouville::devectorize(&crate::expm::expm(&l, t).dot(&v0), d))
        .collect()
}
