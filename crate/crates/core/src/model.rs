//! Physical parameter sets and Hamiltonian builders.
//!
//! The system is a three-level ladder atom (`g`, `i`, `e`) coupled to one
//! cavity mode. Both `g <-> i` and `i <-> e` legs couple to the same mode
//! with strengths `lambda_g`, `lambda_e`; a classical field drives `g <-> e`
//! directly with Rabi rate `omega_rabi` and detuning `big_delta`. The
//! intermediate level sits a dispersive detuning `delta` away, which is the
//! large scale everything else is measured against.
//!
//! Three builders are exposed, in decreasing fidelity:
//!
//! 1. [`full_hamiltonian`] — the bichromatic three-level model, written in
//!    the frame where the fast optical rotations are absorbed, so the only
//!    explicit time dependence oscillates at `big_delta`.
//! 2. [`effective_hamiltonian_full`] — the adiabatically reduced three-level
//!    model, valid to second order in `lambda/delta`, kept as an
//!    intermediate-fidelity cross-check.
//! 3. [`effective_hamiltonian_mode`] — the single-mode parametric form
//!    `varpi a^†a + xi e^{-i nu t} a^†2 + xi^* e^{i nu t} a^2` acting on the
//!    field alone, conditioned on the atom staying in `i`.
//!
//! All rates are angular frequencies in 1/s and `hbar = 1`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::hilbert::{
    annihilation, atom_field, creation, field_identity, BasisTag, FockBasis, Level, OperatorMatrix,
};
use crate::{Result, C64};

/// Dispersive-regime margin: `|delta|` must dominate every other rate by this
/// factor, otherwise results carry a warning.
pub const DISPERSIVE_MARGIN: f64 = 10.0;

/// Relative width of the resonance window in which the off-resonant coupling
/// ratio is treated as undefined.
const RESONANT_WINDOW: f64 = 1e-12;

/// Non-fatal conditions attached to results and manifests.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// `|delta|` does not dominate the other rates; the adiabatic reduction
    /// is quantitatively suspect.
    Dispersive { delta_abs: f64, required: f64 },
    /// Conditional population left in the `i` block fell below 0.9 during a
    /// full-model run; the projected field state is weakly conditioned.
    LowConditionalPopulation { min_population: f64 },
    /// A per-step renormalization correction exceeded the unitarity budget.
    RenormalizationBudget { max_correction: f64 },
    /// Rows of a detuning sweep fell outside the strong-coupling regime and
    /// were emitted as NaN.
    WeakRegimeRows { count: usize },
    /// A nominally resonant run was requested with `big_delta != 2 chi`.
    NotResonant { big_delta: f64, two_chi: f64 },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::Dispersive { delta_abs, required } => write!(
                f,
                "dispersive margin violated: |delta| = {delta_abs:.3e} < {required:.3e}"
            ),
            Warning::LowConditionalPopulation { min_population } => write!(
                f,
                "conditional i-level population dropped to {min_population:.4}"
            ),
            Warning::RenormalizationBudget { max_correction } => write!(
                f,
                "renormalization correction {max_correction:.3e} exceeded 1e-9"
            ),
            Warning::WeakRegimeRows { count } => {
                write!(f, "{count} sweep rows outside the strong-coupling regime")
            }
            Warning::NotResonant { big_delta, two_chi } => write!(
                f,
                "drive detuning {big_delta:.6e} differs from twice the dispersive shift {two_chi:.6e}"
            ),
        }
    }
}

/// Gaussian transit profile of the cavity mode as seen by a moving atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitProfile {
    /// Mode waist in meters.
    pub waist_m: f64,
    /// Atomic speed in meters per second. Zero means the atom sits at the
    /// mode center (flat profile).
    pub speed_mps: f64,
}

/// Complete description of one physical configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Coupling of the `g <-> i` leg to the cavity mode.
    pub lambda_g: C64,
    /// Coupling of the `i <-> e` leg to the cavity mode.
    pub lambda_e: C64,
    /// Classical drive Rabi rate on `g <-> e`.
    pub omega_rabi: C64,
    /// Detuning of the intermediate level (the large dispersive scale).
    pub delta: f64,
    /// Two-photon drive detuning.
    pub big_delta: f64,
    /// Bare cavity frequency. The builders work in the frame where the bare
    /// rotation is already removed, so this enters only the reported
    /// `varpi` and `nu`; zero keeps everything in that rotating frame.
    pub omega_cavity: f64,
    /// Atomic decay rate.
    pub gamma_a: f64,
    /// Cavity decay rate.
    pub gamma_c: f64,
    /// Optional transit profile.
    pub profile: Option<TransitProfile>,
    /// Fock truncation.
    pub n_max: usize,
}

impl SystemParams {
    /// The reference configuration used throughout the test suite:
    /// `lambda_g = lambda_e = omega_rabi = 3e5`, `delta = 15 lambda`,
    /// resonant drive, open-cavity decay rates.
    pub fn reference() -> Self {
        let lam = 3e5;
        let delta = 15.0 * lam;
        let chi = 2.0 * (2.0 * lam * lam) / delta;
        SystemParams {
            lambda_g: C64::new(lam, 0.0),
            lambda_e: C64::new(lam, 0.0),
            omega_rabi: C64::new(lam, 0.0),
            delta,
            big_delta: 2.0 * chi,
            omega_cavity: 0.0,
            gamma_a: 1e2,
            gamma_c: 1e3,
            profile: Some(TransitProfile {
                waist_m: 6e-3,
                speed_mps: 1e2,
            }),
            n_max: 63,
        }
    }

    /// Basis implied by `n_max`.
    pub fn basis(&self) -> FockBasis {
        FockBasis::new(self.n_max)
    }

    /// Largest rate that must be dominated by `|delta|`.
    pub fn fast_scale(&self) -> f64 {
        self.lambda_g
            .norm()
            .max(self.lambda_e.norm())
            .max(self.omega_rabi.norm())
            .max(self.big_delta.abs())
    }

    /// Rejects unusable parameters and reports non-fatal concerns.
    pub fn validate(&self) -> Result<Vec<Warning>> {
        let finite = [
            self.lambda_g.re,
            self.lambda_g.im,
            self.lambda_e.re,
            self.lambda_e.im,
            self.omega_rabi.re,
            self.omega_rabi.im,
            self.delta,
            self.big_delta,
            self.omega_cavity,
            self.gamma_a,
            self.gamma_c,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("non-finite rate".into()));
        }
        if self.delta == 0.0 {
            return Err(Error::InvalidParams(
                "delta = 0: the dispersive reduction divides by the intermediate-level detuning"
                    .into(),
            ));
        }
        if self.gamma_a < 0.0 || self.gamma_c < 0.0 {
            return Err(Error::InvalidParams("negative decay rate".into()));
        }
        if let Some(p) = &self.profile {
            if !(p.waist_m > 0.0) || !p.speed_mps.is_finite() || p.speed_mps < 0.0 {
                return Err(Error::InvalidParams(
                    "profile needs waist_m > 0 and speed_mps >= 0".into(),
                ));
            }
        }
        let mut warnings = Vec::new();
        let required = DISPERSIVE_MARGIN * self.fast_scale();
        if self.delta.abs() < required {
            warnings.push(Warning::Dispersive {
                delta_abs: self.delta.abs(),
                required,
            });
        }
        Ok(warnings)
    }
}

/// Parameters of the reduced single-mode model, all derived from
/// [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveParams {
    /// Dispersive frequency pull `2(|lambda_g|^2 + |lambda_e|^2)/delta`.
    pub chi: f64,
    /// Effective mode frequency `omega_cavity + chi`.
    pub varpi: f64,
    /// Parametric pump amplitude `2 omega_rabi lambda_g^* lambda_e^* / delta^2`.
    pub xi: C64,
    /// Pump modulation frequency `2 omega_cavity + big_delta`.
    pub nu: f64,
    /// Coupling ratio `4|xi| / (2 chi - big_delta)`; `None` exactly on
    /// resonance, where it diverges.
    pub p: Option<f64>,
}

impl EffectiveParams {
    pub fn xi_abs(&self) -> f64 {
        self.xi.norm()
    }

    /// Pump phase `Theta` in the convention `xi = |xi| e^{-i Theta}`.
    pub fn theta(&self) -> f64 {
        if self.xi.norm() == 0.0 {
            0.0
        } else {
            -self.xi.arg()
        }
    }

    /// Ideal squeeze factor `2 |xi| t` accumulated by a resonant pump.
    pub fn resonant_squeeze_factor(&self, t: f64) -> f64 {
        2.0 * self.xi_abs() * t
    }
}

/// Reduces the three-level description to the single-mode parametric model.
pub fn derive_effective(params: &SystemParams) -> Result<EffectiveParams> {
    if params.delta == 0.0 {
        return Err(Error::InvalidParams(
            "delta = 0: effective parameters undefined".into(),
        ));
    }
    let lg2 = params.lambda_g.norm_sqr();
    let le2 = params.lambda_e.norm_sqr();
    let chi = 2.0 * (lg2 + le2) / params.delta;
    let xi = params.omega_rabi * params.lambda_g.conj() * params.lambda_e.conj()
        * (2.0 / (params.delta * params.delta));
    let denom = 2.0 * chi - params.big_delta;
    let window = RESONANT_WINDOW * (2.0 * chi).abs().max(params.big_delta.abs());
    let p = if denom.abs() <= window {
        None
    } else {
        Some(4.0 * xi.norm() / denom)
    };
    Ok(EffectiveParams {
        chi,
        varpi: params.omega_cavity + chi,
        xi,
        nu: 2.0 * params.omega_cavity + params.big_delta,
        p,
    })
}

fn i_c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Phase factor `e^{-i big_delta t}` carried by the classical drive.
fn drive_phase(params: &SystemParams, t: f64) -> C64 {
    C64::from_polar(1.0, -params.big_delta * t)
}

/// The full three-level Hamiltonian at time `t`.
///
/// `H = lambda_g a sig_ig + lambda_e a sig_ei + omega e^{-i big_delta t} sig_eg
///  + h.c. - delta (sig_gg + sig_ee)`, on the composite space.
pub fn full_hamiltonian(params: &SystemParams, t: f64, basis: FockBasis) -> Result<OperatorMatrix> {
    let parts = FullModelParts::build(params, basis)?;
    Ok(parts.at(t))
}

/// Precomputed pieces of the full model, `H(t) = static + e^{-i big_delta t}
/// drive + h.c.`, so time stepping does not rebuild operator products.
pub struct FullModelParts {
    pub static_part: Array2<C64>,
    pub drive: Array2<C64>,
    drive_dag: Array2<C64>,
    big_delta: f64,
    tag: BasisTag,
}

impl FullModelParts {
    pub fn build(params: &SystemParams, basis: FockBasis) -> Result<Self> {
        let a = annihilation(basis);
        let adag = creation(basis);
        let mut stat = Array2::<C64>::zeros((basis.atom_field_dim(), basis.atom_field_dim()));

        // cavity legs: lambda_g a sig_ig + lambda_e a sig_ei + h.c.
        stat += &atom_field(Level::I, Level::G, &a)?.mat.mapv(|c| c * params.lambda_g);
        stat += &atom_field(Level::G, Level::I, &adag)?
            .mat
            .mapv(|c| c * params.lambda_g.conj());
        stat += &atom_field(Level::E, Level::I, &a)?.mat.mapv(|c| c * params.lambda_e);
        stat += &atom_field(Level::I, Level::E, &adag)?
            .mat
            .mapv(|c| c * params.lambda_e.conj());

        // level shifts: -delta (sig_gg + sig_ee)
        let eye = field_identity(basis);
        stat += &atom_field(Level::G, Level::G, &eye)?
            .mat
            .mapv(|c| c * i_c(-params.delta));
        stat += &atom_field(Level::E, Level::E, &eye)?
            .mat
            .mapv(|c| c * i_c(-params.delta));

        // classical drive, modulated at big_delta
        let drive = atom_field(Level::E, Level::G, &eye)?
            .mat
            .mapv(|c| c * params.omega_rabi);
        let drive_dag = drive.t().mapv(|c| c.conj());

        Ok(FullModelParts {
            static_part: stat,
            drive,
            drive_dag,
            big_delta: params.big_delta,
            tag: BasisTag::AtomFock { n_max: basis.n_max },
        })
    }

    pub fn at(&self, t: f64) -> OperatorMatrix {
        let ph = C64::from_polar(1.0, -self.big_delta * t);
        let mat =
            &self.static_part + &self.drive.mapv(|c| c * ph) + &self.drive_dag.mapv(|c| c * ph.conj());
        OperatorMatrix { mat, tag: self.tag }
    }
}

/// The adiabatically reduced three-level Hamiltonian at time `t`.
///
/// Second order in `lambda/delta`, with the symmetrized operator ordering
/// folded in. Kept for cross-checks; its `i`-block reproduces
/// [`effective_hamiltonian_mode`] (in the same rotating frame) up to a
/// constant `(|lambda_g|^2 + |lambda_e|^2)/delta` shift.
pub fn effective_hamiltonian_full(
    params: &SystemParams,
    t: f64,
    basis: FockBasis,
) -> Result<OperatorMatrix> {
    if params.delta == 0.0 {
        return Err(Error::InvalidParams(
            "delta = 0: adiabatic reduction undefined".into(),
        ));
    }
    let a = annihilation(basis);
    let a2 = OperatorMatrix {
        mat: a.mat.dot(&a.mat),
        tag: a.tag,
    };
    let adag2 = a2.dagger();
    let eye = field_identity(basis);

    // 2 a^† a + 1, the symmetrized photon-number weight
    let mut m_op = crate::hilbert::number(basis);
    m_op.mat.mapv_inplace(|c| c * i_c(2.0));
    m_op.mat += &eye.mat;

    let lg2 = params.lambda_g.norm_sqr();
    let le2 = params.lambda_e.norm_sqr();
    let ph = drive_phase(params, t);
    let inv_delta = 1.0 / params.delta;

    let dim = basis.atom_field_dim();
    let mut h = Array2::<C64>::zeros((dim, dim));

    // zeroth order: level shifts and the bare drive
    h += &atom_field(Level::G, Level::G, &eye)?.mat.mapv(|c| c * i_c(-params.delta));
    h += &atom_field(Level::E, Level::E, &eye)?.mat.mapv(|c| c * i_c(-params.delta));
    h += &atom_field(Level::E, Level::G, &eye)?
        .mat
        .mapv(|c| c * (params.omega_rabi * ph));
    h += &atom_field(Level::G, Level::E, &eye)?
        .mat
        .mapv(|c| c * (params.omega_rabi.conj() * ph.conj()));

    // second-order bracket, all scaled by -1/delta
    let mut bracket = Array2::<C64>::zeros((dim, dim));
    bracket += &atom_field(Level::G, Level::G, &m_op)?.mat.mapv(|c| c * i_c(lg2));
    bracket += &atom_field(Level::I, Level::I, &m_op)?
        .mat
        .mapv(|c| c * i_c(-(lg2 + le2)));
    bracket += &atom_field(Level::E, Level::E, &m_op)?.mat.mapv(|c| c * i_c(le2));
    // drive dressed by the photon-number weight
    let dress = (lg2 + le2) / (2.0 * params.delta);
    bracket += &atom_field(Level::E, Level::G, &m_op)?
        .mat
        .mapv(|c| c * (params.omega_rabi * ph * i_c(dress)));
    bracket += &atom_field(Level::G, Level::E, &m_op)?
        .mat
        .mapv(|c| c * (params.omega_rabi.conj() * ph.conj() * i_c(dress)));

    // two-photon cavity transition g <-> e
    let lam_ge = params.lambda_g * params.lambda_e;
    bracket += &atom_field(Level::E, Level::G, &a2)?.mat.mapv(|c| c * (lam_ge * i_c(2.0)));
    bracket += &atom_field(Level::G, Level::E, &adag2)?
        .mat
        .mapv(|c| c * (lam_ge.conj() * i_c(2.0)));

    // parametric pump felt by the populations, sign-split between the
    // outer levels and the intermediate one
    let pump = lam_ge * params.omega_rabi.conj() * ph.conj() * i_c(inv_delta);
    let mut pump_field = a2.mat.mapv(|c| c * pump);
    pump_field += &adag2.mat.mapv(|c| c * pump.conj());
    let pump_field = OperatorMatrix {
        mat: pump_field,
        tag: a.tag,
    };
    bracket += &atom_field(Level::G, Level::G, &pump_field)?.mat;
    bracket += &atom_field(Level::E, Level::E, &pump_field)?.mat;
    bracket += &atom_field(Level::I, Level::I, &pump_field)?.mat.mapv(|c| c * i_c(-2.0));

    h += &bracket.mapv(|c| c * i_c(-inv_delta));

    Ok(OperatorMatrix {
        mat: h,
        tag: BasisTag::AtomFock { n_max: basis.n_max },
    })
}

/// The single-mode parametric Hamiltonian at time `t`:
/// `varpi a^†a + xi e^{-i nu t} a^†2 + xi^* e^{i nu t} a^2`.
pub fn effective_hamiltonian_mode(
    eff: &EffectiveParams,
    t: f64,
    basis: FockBasis,
) -> OperatorMatrix {
    ModeParts::build(eff, basis).at(t)
}

/// Precomputed pieces of the single-mode model for cheap time stepping.
pub struct ModeParts {
    static_part: Array2<C64>,
    pump: Array2<C64>,
    pump_dag: Array2<C64>,
    nu: f64,
    tag: BasisTag,
}

impl ModeParts {
    pub fn build(eff: &EffectiveParams, basis: FockBasis) -> Self {
        let a = annihilation(basis);
        let adag2 = creation(basis).mat.dot(&creation(basis).mat);
        let static_part = crate::hilbert::number(basis).mat.mapv(|c| c * i_c(eff.varpi));
        let pump = adag2.mapv(|c| c * eff.xi);
        let pump_dag = a.mat.dot(&a.mat).mapv(|c| c * eff.xi.conj());
        ModeParts {
            static_part,
            pump,
            pump_dag,
            nu: eff.nu,
            tag: BasisTag::Fock { n_max: basis.n_max },
        }
    }

    pub fn at(&self, t: f64) -> OperatorMatrix {
        let ph = C64::from_polar(1.0, -self.nu * t);
        let mat = &self.static_part + &self.pump.mapv(|c| c * ph) + &self.pump_dag.mapv(|c| c * ph.conj());
        OperatorMatrix { mat, tag: self.tag }
    }
}

/// Gaussian mode profile `f(x) = exp(-x^2 / w^2)` sampled along the transit
/// `x(t) = v (t - tau/2)`, so the atom crosses the mode center at `tau/2`.
pub fn transit_envelope(profile: &TransitProfile, t: f64, tau: f64) -> f64 {
    let x = profile.speed_mps * (t - tau / 2.0);
    (-(x * x) / (profile.waist_m * profile.waist_m)).exp()
}

/// Cavity couplings modulated by the transit envelope at time `t`.
///
/// Errors with [`Error::ProfileMissing`] when the parameter set has no
/// profile.
pub fn profile_coupling(params: &SystemParams, t: f64, tau: f64) -> Result<(C64, C64)> {
    let profile = params.profile.as_ref().ok_or(Error::ProfileMissing)?;
    let f = transit_envelope(profile, t, tau);
    Ok((params.lambda_g * i_c(f), params.lambda_e * i_c(f)))
}

// ---------------------------------------------------------------------------
// config file format: flat `key = value` lines, `#` comments
// ---------------------------------------------------------------------------

const CONFIG_KEYS: [&str; 14] = [
    "lambda_g_re",
    "lambda_g_im",
    "lambda_e_re",
    "lambda_e_im",
    "omega_rabi_re",
    "omega_rabi_im",
    "delta",
    "big_delta",
    "omega_cavity",
    "gamma_a",
    "gamma_c",
    "waist_m",
    "speed_mps",
    "n_max",
];

impl SystemParams {
    /// Parses the flat key-value config format.
    ///
    /// Every key except the profile pair (`waist_m`, `speed_mps`) and
    /// `n_max` (default 63) is required. Unknown keys, duplicate keys,
    /// and malformed lines are reported with their 1-based line number.
    pub fn from_config_str(text: &str) -> Result<SystemParams> {
        let mut seen: std::collections::HashMap<&str, f64> = std::collections::HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::Config {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let canonical = CONFIG_KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or(Error::Config {
                    line: line_no,
                    msg: format!("unknown key `{key}`"),
                })?;
            if seen.contains_key(canonical) {
                return Err(Error::Config {
                    line: line_no,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            let parsed: f64 = value.parse().map_err(|_| Error::Config {
                line: line_no,
                msg: format!("cannot parse `{value}` as a number for `{key}`"),
            })?;
            seen.insert(canonical, parsed);
        }

        let need = |key: &str| -> Result<f64> {
            seen.get(key).copied().ok_or(Error::InvalidParams(format!(
                "config missing required key `{key}`"
            )))
        };
        let lambda_g = C64::new(need("lambda_g_re")?, need("lambda_g_im")?);
        let lambda_e = C64::new(need("lambda_e_re")?, need("lambda_e_im")?);
        let omega_rabi = C64::new(need("omega_rabi_re")?, need("omega_rabi_im")?);
        let delta = need("delta")?;
        let big_delta = need("big_delta")?;
        let omega_cavity = need("omega_cavity")?;
        let gamma_a = need("gamma_a")?;
        let gamma_c = need("gamma_c")?;

        let profile = match (seen.get("waist_m"), seen.get("speed_mps")) {
            (Some(&w), Some(&v)) => Some(TransitProfile {
                waist_m: w,
                speed_mps: v,
            }),
            (None, None) => None,
            _ => {
                return Err(Error::InvalidParams(
                    "config must set both `waist_m` and `speed_mps` or neither".into(),
                ))
            }
        };
        let n_max = match seen.get("n_max") {
            Some(&n) => {
                if n < 1.0 || n.fract() != 0.0 || n > 4095.0 {
                    return Err(Error::InvalidParams(format!(
                        "n_max must be an integer in [1, 4095], got {n}"
                    )));
                }
                n as usize
            }
            None => 63,
        };

        Ok(SystemParams {
            lambda_g,
            lambda_e,
            omega_rabi,
            delta,
            big_delta,
            omega_cavity,
            gamma_a,
            gamma_c,
            profile,
            n_max,
        })
    }

    /// Serializes back to the config format; `from_config_str` of the output
    /// reproduces the parameter set exactly.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut push = |key: &str, value: f64| {
            out.push_str(&format!("{key} = {value}\n"));
        };
        push("lambda_g_re", self.lambda_g.re);
        push("lambda_g_im", self.lambda_g.im);
        push("lambda_e_re", self.lambda_e.re);
        push("lambda_e_im", self.lambda_e.im);
        push("omega_rabi_re", self.omega_rabi.re);
        push("omega_rabi_im", self.omega_rabi.im);
        push("delta", self.delta);
        push("big_delta", self.big_delta);
        push("omega_cavity", self.omega_cavity);
        push("gamma_a", self.gamma_a);
        push("gamma_c", self.gamma_c);
        if let Some(p) = &self.profile {
            push("waist_m", p.waist_m);
            push("speed_mps", p.speed_mps);
        }
        push("n_max", self.n_max as f64);
        out
    }

    /// Reads and parses a config file.
    pub fn from_config_file(path: &std::path::Path) -> Result<SystemParams> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, &e))?;
        Self::from_config_str(&text)
    }
}
