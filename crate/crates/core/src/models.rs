//! Two-level and five-level (M-shaped) systems plus named parameter presets.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouville::{ChannelKind, DensityMatrix, HilbertOperator, JumpChannel, SystemModel};

const GROUND: usize = 0;
const EXCITED: usize = 1;

fn check_rate(name: &str, value: f64) -> Result<()> {
    if !(value.is_finite() && value >= 0.0) {
        return Err(Error::InvalidParameter {
            name: name.into(),
            reason: format!("rate must be finite and nonnegative, got {value}"),
        });
    }
    Ok(())
}

/// Converts the coupling-style value `sqrt(gamma / 2 pi)` to a rate.
pub fn rate_from_sqrt_gamma_over_2pi(x: f64) -> f64 {
    2.0 * PI * x * x
}

/// `H = delta_e |e><e| + v_eg (|e><g| + |g><e|)` with optional decay, pump and
/// dephasing. Levels are ordered `g = 0`, `e = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoLevelParams {
    pub delta_e: f64,
    pub v_eg: f64,
    /// Decay rate `e -> g`.
    #[serde(default)]
    pub gamma: f64,
    /// Incoherent pump rate `g -> e`.
    #[serde(default)]
    pub gamma_pump: f64,
    /// Dephasing rate of the `sigma_z` channel.
    #[serde(default)]
    pub gamma_z: f64,
    #[serde(default)]
    pub gamma_c: f64,
}

impl TwoLevelParams {
    /// Decay-only system with the decay given as `sqrt(gamma / 2 pi)`.
    pub fn from_sqrt_gamma_over_2pi(delta_e: f64, v_eg: f64, sqrt_gamma_over_2pi: f64, gamma_c: f64) -> Self {
        Self {
            delta_e,
            v_eg,
            gamma: rate_from_sqrt_gamma_over_2pi(sqrt_gamma_over_2pi),
            gamma_pump: 0.0,
            gamma_z: 0.0,
            gamma_c,
        }
    }

    fn validate(&self) -> Result<()> {
        check_rate("gamma", self.gamma)?;
        check_rate("gamma_pump", self.gamma_pump)?;
        check_rate("gamma_z", self.gamma_z)?;
        check_rate("gamma_c", self.gamma_c)
    }

    fn hamiltonian(&self) -> Result<HilbertOperator> {
        let mut h = Array2::<C64>::zeros((2, 2));
        h[[EXCITED, EXCITED]] = C64::new(self.delta_e, 0.0);
        h[[EXCITED, GROUND]] = C64::new(self.v_eg, 0.0);
        h[[GROUND, EXCITED]] = C64::new(self.v_eg, 0.0);
        HilbertOperator::new(h)
    }
}

fn two_level_labels() -> Vec<String> {
    vec!["g".into(), "e".into()]
}

fn dephasing_channel(gamma_z: f64) -> Result<JumpChannel> {
    let root = gamma_z.sqrt();
    let op = HilbertOperator::diagonal(&[-root, root]);
    Ok(JumpChannel::new(op, "dephasing", ChannelKind::Dephasing))
}

/// Two-level model; zero-rate channels are omitted.
pub fn two_level(params: &TwoLevelParams) -> Result<SystemModel> {
    params.validate()?;
    let mut channels = Vec::new();
    if params.gamma > 0.0 {
        channels.push(JumpChannel::elementary(2, EXCITED, GROUND, params.gamma, "decay", ChannelKind::Decay));
    }
    if params.gamma_pump > 0.0 {
        channels.push(JumpChannel::elementary(2, GROUND, EXCITED, params.gamma_pump, "pump", ChannelKind::Pump));
    }
    if params.gamma_z > 0.0 {
        channels.push(dephasing_channel(params.gamma_z)?);
    }
    SystemModel::with_labels(params.hamiltonian()?, channels, params.gamma_c, two_level_labels())
}

/// Two-level model whose only channel is `sqrt(gamma_z) sigma_z`.
pub fn two_level_dephasing(params: &TwoLevelParams) -> Result<SystemModel> {
    params.validate()?;
    if params.gamma_z <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "gamma_z".into(),
            reason: "dephasing model needs a positive dephasing rate".into(),
        });
    }
    let channels = vec![dephasing_channel(params.gamma_z)?];
    SystemModel::with_labels(params.hamiltonian()?, channels, params.gamma_c, two_level_labels())
}

/// Three ground levels `g1, g2, g3` and two excited levels `e1, e2`, in that
/// basis order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MLevelParams {
    /// Ground-level detunings.
    pub delta: [f64; 3],
    /// `couplings[j][i]` couples `g_{i+1}` to `e_{j+1}`.
    pub couplings: [[f64; 3]; 2],
    /// Decays `e1 -> g1`, `e1 -> g2`, `e2 -> g2`, `e2 -> g3`.
    pub gamma: [f64; 4],
    /// Pumps `g1 -> e1`, `g2 -> e1`, `g2 -> e2`, `g3 -> e2`.
    #[serde(default)]
    pub gamma_prime: [f64; 4],
    #[serde(default)]
    pub gamma_c: f64,
}

/// Ground and excited level of each of the four radiative transitions.
const M_TRANSITIONS: [(usize, usize, &str); 4] = [(0, 3, "11"), (1, 3, "12"), (1, 4, "22"), (2, 4, "23")];
const M_PUMP_NAMES: [&str; 4] = ["11", "21", "22", "32"];

pub fn m_level(params: &MLevelParams) -> Result<SystemModel> {
    for (i, &g) in params.gamma.iter().enumerate() {
        check_rate(&format!("gamma[{i}]"), g)?;
    }
    for (i, &g) in params.gamma_prime.iter().enumerate() {
        check_rate(&format!("gamma_prime[{i}]"), g)?;
    }
    check_rate("gamma_c", params.gamma_c)?;
    let mut h = Array2::<C64>::zeros((5, 5));
    for (i, &d) in params.delta.iter().enumerate() {
        h[[i, i]] = C64::new(d, 0.0);
    }
    for (j, row) in params.couplings.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            h[[i, 3 + j]] = C64::new(v, 0.0);
            h[[3 + j, i]] = C64::new(v, 0.0);
        }
    }
    let mut channels = Vec::new();
    for (&(g, e, name), &rate) in M_TRANSITIONS.iter().zip(&params.gamma) {
        if rate > 0.0 {
            channels.push(JumpChannel::elementary(5, e, g, rate, format!("decay_{name}"), ChannelKind::Decay));
        }
    }
    for ((&(g, e, _), name), &rate) in M_TRANSITIONS.iter().zip(M_PUMP_NAMES).zip(&params.gamma_prime) {
        if rate > 0.0 {
            channels.push(JumpChannel::elementary(5, g, e, rate, format!("pump_{name}"), ChannelKind::Pump));
        }
    }
    let labels = ["g1", "g2", "g3", "e1", "e2"].map(String::from).to_vec();
    SystemModel::with_labels(HilbertOperator::new(h)?, channels, params.gamma_c, labels)
}

/// A named, published parameter set.
#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// Return rates at which the system was studied.
    pub gamma_c: &'static [f64],
    /// Label of the basis state used as initial condition.
    pub initial_state: &'static str,
    /// Default time grid `(start, stop, count)`.
    pub times: (f64, f64, usize),
    build: fn(f64) -> Result<SystemModel>,
}

impl Preset {
    pub fn model(&self, gamma_c: f64) -> Result<SystemModel> {
        (self.build)(gamma_c)
    }

    /// The model at the first listed return rate.
    pub fn default_model(&self) -> Result<SystemModel> {
        self.model(self.gamma_c[0])
    }

    pub fn initial_state(&self) -> DensityMatrix {
        let model = self.default_model().expect("presets are valid");
        let idx = model.label_index(self.initial_state).expect("preset label exists");
        DensityMatrix::basis_projector(model.dim(), idx)
    }
}

fn fig2(delta_e: f64, gamma_c: f64) -> Result<SystemModel> {
    two_level(&TwoLevelParams::from_sqrt_gamma_over_2pi(delta_e, 0.2, 0.3, gamma_c))
}

fn fig2_off_resonance(gamma_c: f64) -> Result<SystemModel> {
    fig2(1.0, gamma_c)
}

fn fig2_on_resonance(gamma_c: f64) -> Result<SystemModel> {
    fig2(0.001, gamma_c)
}

fn fig3_bottom(gamma_c: f64) -> Result<SystemModel> {
    two_level(&TwoLevelParams::from_sqrt_gamma_over_2pi(0.001, 0.1, 0.9, gamma_c))
}

fn fig_b1_finite_t(gamma_c: f64) -> Result<SystemModel> {
    two_level(&TwoLevelParams {
        delta_e: 0.01,
        v_eg: 0.3,
        gamma: 0.15,
        gamma_pump: 0.2,
        gamma_z: 0.0,
        gamma_c,
    })
}

fn fig_b2_dephasing(gamma_c: f64) -> Result<SystemModel> {
    two_level_dephasing(&TwoLevelParams {
        delta_e: 0.01,
        v_eg: 0.3,
        gamma: 0.0,
        gamma_pump: 0.0,
        gamma_z: 0.1,
        gamma_c,
    })
}

fn fig4(pump: f64, gamma_c: f64) -> Result<SystemModel> {
    m_level(&MLevelParams {
        delta: [-0.1; 3],
        couplings: [[1.0, 1.2, 0.0], [0.0, 1.5, 1.6]],
        gamma: [2.0; 4],
        gamma_prime: [pump; 4],
        gamma_c,
    })
}

fn fig4_cpt(gamma_c: f64) -> Result<SystemModel> {
    fig4(0.0, gamma_c)
}

fn fig4_non_cpt(gamma_c: f64) -> Result<SystemModel> {
    fig4(0.1, gamma_c)
}

static PRESETS: [Preset; 7] = [
    Preset {
        name: "fig2_off_resonance",
        description: "two-level decay, delta_e = 1, V_eg = 0.2, sqrt(gamma/2pi) = 0.3",
        gamma_c: &[2e-5, 0.02, 20.0],
        initial_state: "e",
        times: (0.0, 50.0, 501),
        build: fig2_off_resonance,
    },
    Preset {
        name: "fig2_on_resonance",
        description: "two-level decay, delta_e = 0.001, V_eg = 0.2, sqrt(gamma/2pi) = 0.3",
        gamma_c: &[2e-5, 0.02, 20.0],
        initial_state: "e",
        times: (0.0, 50.0, 501),
        build: fig2_on_resonance,
    },
    Preset {
        name: "fig3_bottom",
        description: "two-level decay, delta_e = 0.001, V_eg = 0.1, continuum coupling 0.9 read as sqrt(gamma/2pi)",
        gamma_c: &[1e-4, 1e-2, 1.0, 1e2],
        initial_state: "e",
        times: (0.0, 50.0, 501),
        build: fig3_bottom,
    },
    Preset {
        name: "figB1_finite_T",
        description: "two-level decay 0.15 and pump 0.2, delta_e = 0.01, V_eg = 0.3",
        gamma_c: &[0.3],
        initial_state: "e",
        times: (0.0, 50.0, 501),
        build: fig_b1_finite_t,
    },
    Preset {
        name: "figB2_dephasing",
        description: "two-level pure dephasing 0.1, delta_e = 0.01, V_eg = 0.3",
        gamma_c: &[0.02],
        initial_state: "e",
        times: (0.0, 50.0, 501),
        build: fig_b2_dephasing,
    },
    Preset {
        name: "fig4_cpt",
        description: "five-level M system at coherent population trapping, no pumping",
        gamma_c: &[0.001, 1000.0],
        initial_state: "g3",
        times: (0.0, 50.0, 501),
        build: fig4_cpt,
    },
    Preset {
        name: "fig4_non_cpt",
        description: "five-level M system with incoherent pumping 0.1",
        gamma_c: &[0.001, 1000.0],
        initial_state: "g3",
        times: (0.0, 50.0, 501),
        build: fig4_non_cpt,
    },
];

pub fn presets() -> &'static [Preset] {
    &PRESETS
}

pub fn preset(name: &str) -> Result<&'static Preset> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))
}
