//! State-vector propagation and the squeeze transform.
//!
//! Propagation is classic fixed-step RK4 on `psi' = -i H(t) psi` with the
//! Hamiltonian sampled at the step edges and midpoint. The step is validated
//! against the operator's spectral bound before any work starts, the norm is
//! restored after every step (drift is tracked and budgeted, not hidden), and
//! recorded states are screened for population piling up against the
//! truncation edge.

use ndarray::Array1;

use crate::error::Error;
use crate::expm::expm;
use crate::hilbert::{BasisTag, OperatorMatrix, StateVector};
use crate::model::{EffectiveParams, Warning};
use crate::{Result, C64};

/// Largest allowed product of step size and spectral bound. RK4's stability
/// region ends near `dt * |H| ~ 2.8`; staying two orders below keeps the
/// truncation error, not stability, in charge of accuracy.
pub const STABILITY_LIMIT: f64 = 0.05;

/// Budget on the largest per-step norm correction before the run earns a
/// warning. RK4 on a Hermitian generator drifts like `dt^5` per step, so a
/// healthy run sits far below this.
pub const RENORM_BUDGET: f64 = 1e-9;

/// Tail-mass ceiling for [`apply_squeeze`] output. Looser than the
/// trajectory leakage limit: squeezing toward the cutoff routinely leaves
/// permille-level mass near the edge, which both comparison routes share.
pub const SQUEEZE_TAIL_LIMIT: f64 = 1e-2;

/// Propagation controls.
#[derive(Debug, Clone, Copy)]
pub struct EvolutionConfig {
    /// End time of the run; the grid lands on it exactly.
    pub t_final: f64,
    /// Upper bound on the step; the actual step divides `t_final` evenly.
    pub dt_max: f64,
    /// Record every this-many steps (the initial and final states are always
    /// recorded). `usize::MAX` keeps endpoints only.
    pub record_every: usize,
    /// Screen recorded states for truncation-edge population.
    pub check_leakage: bool,
}

impl EvolutionConfig {
    /// Endpoint-only recording with the given step cap.
    pub fn new(t_final: f64, dt_max: f64) -> Self {
        EvolutionConfig {
            t_final,
            dt_max,
            record_every: usize::MAX,
            check_leakage: true,
        }
    }

    /// Chooses the step cap from a spectral bound so that
    /// `dt * bound = target`, which should sit well under
    /// [`STABILITY_LIMIT`].
    pub fn from_spectral_bound(t_final: f64, bound: f64, target: f64) -> Self {
        let dt_max = if bound > 0.0 { target / bound } else { t_final.max(1e-12) };
        Self::new(t_final, dt_max)
    }

    pub fn recording_every(mut self, stride: usize) -> Self {
        self.record_every = stride.max(1);
        self
    }
}

/// Output of a propagation run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    /// Step actually used.
    pub dt: f64,
    pub steps: usize,
    /// Largest single-step norm correction that renormalization absorbed.
    pub max_renorm_correction: f64,
    pub warnings: Vec<Warning>,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory always holds the initial time")
    }
}

/// Propagates `psi0` under a time-dependent Hamiltonian.
///
/// `hamiltonian(t)` must return a matrix on the same basis as the state for
/// every sampled time. The step is rejected up front
/// ([`Error::StabilityViolation`]) if `dt` times the largest spectral bound
/// sampled across the run exceeds [`STABILITY_LIMIT`].
pub fn evolve_td<F>(psi0: &StateVector, hamiltonian: F, cfg: &EvolutionConfig) -> Result<Trajectory>
where
    F: Fn(f64) -> OperatorMatrix,
{
    if !cfg.t_final.is_finite() || cfg.t_final < 0.0 {
        return Err(Error::InvalidParams(format!(
            "final time must be finite and nonnegative, got {}",
            cfg.t_final
        )));
    }
    if !(cfg.dt_max > 0.0) {
        return Err(Error::InvalidParams(format!(
            "step bound must be positive, got {}",
            cfg.dt_max
        )));
    }

    let mut psi = psi0.clone();
    let mut max_corr = psi.renormalize();

    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![psi.clone()],
        dt: 0.0,
        steps: 0,
        max_renorm_correction: 0.0,
        warnings: Vec::new(),
    };
    if cfg.t_final == 0.0 {
        traj.max_renorm_correction = max_corr;
        return traj_with_budget_warning(traj);
    }

    let steps = (cfg.t_final / cfg.dt_max).ceil().max(1.0) as usize;
    let dt = cfg.t_final / steps as f64;
    traj.dt = dt;
    traj.steps = steps;

    // probe the operator across the run before committing to the step
    let mut bound: f64 = 0.0;
    for k in 0..=4 {
        let h = hamiltonian(cfg.t_final * k as f64 / 4.0);
        if h.tag != psi.tag {
            return Err(Error::DimensionMismatch {
                expected: psi.dim(),
                got: h.mat.nrows(),
                context: "propagation Hamiltonian basis".into(),
            });
        }
        bound = bound.max(h.spectral_bound());
    }
    if dt * bound > STABILITY_LIMIT {
        return Err(Error::StabilityViolation {
            dt,
            bound,
            product: dt * bound,
            limit: STABILITY_LIMIT,
        });
    }

    let minus_i = C64::new(0.0, -1.0);
    let mut h_left = hamiltonian(0.0);
    for step in 0..steps {
        let t = dt * step as f64;
        let h_mid = hamiltonian(t + 0.5 * dt);
        let h_right = hamiltonian(t + dt);

        let y = &psi.amps;
        let k1: Array1<C64> = h_left.mat.dot(y).mapv(|z| minus_i * z);
        let y2 = y + &k1.mapv(|z| z * (0.5 * dt));
        let k2: Array1<C64> = h_mid.mat.dot(&y2).mapv(|z| minus_i * z);
        let y3 = y + &k2.mapv(|z| z * (0.5 * dt));
        let k3: Array1<C64> = h_mid.mat.dot(&y3).mapv(|z| minus_i * z);
        let y4 = y + &k3.mapv(|z| z * dt);
        let k4: Array1<C64> = h_right.mat.dot(&y4).mapv(|z| minus_i * z);

        let incr = (&k1 + &k2.mapv(|z| 2.0 * z) + &k3.mapv(|z| 2.0 * z) + &k4)
            .mapv(|z| z * (dt / 6.0));
        psi.amps = y + &incr;
        max_corr = max_corr.max(psi.renormalize());

        let done = step + 1 == steps;
        if done || (step + 1) % cfg.record_every == 0 {
            if cfg.check_leakage {
                psi.check_leakage(&format!("propagation at t = {:.6e}", t + dt))?;
            }
            traj.times.push(dt * (step + 1) as f64);
            traj.states.push(psi.clone());
        }

        h_left = h_right;
    }

    traj.max_renorm_correction = max_corr;
    traj_with_budget_warning(traj)
}

fn traj_with_budget_warning(mut traj: Trajectory) -> Result<Trajectory> {
    if traj.max_renorm_correction > RENORM_BUDGET {
        traj.warnings.push(Warning::RenormalizationBudget {
            max_correction: traj.max_renorm_correction,
        });
    }
    Ok(traj)
}

/// Reruns a propagation at half the step and reports the sup-norm amplitude
/// difference of the final states. For a healthy RK4 run a further halving
/// shrinks this by about sixteen.
pub fn convergence_audit<F>(psi0: &StateVector, hamiltonian: F, cfg: &EvolutionConfig) -> Result<f64>
where
    F: Fn(f64) -> OperatorMatrix,
{
    let coarse = evolve_td(psi0, &hamiltonian, cfg)?;
    let halved = EvolutionConfig {
        dt_max: cfg.dt_max / 2.0,
        record_every: usize::MAX,
        ..*cfg
    };
    let fine = evolve_td(psi0, &hamiltonian, &halved)?;
    let a = &coarse.final_state().amps;
    let b = &fine.final_state().amps;
    Ok((a - b).iter().map(|z| z.norm()).fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// squeeze transform
// ---------------------------------------------------------------------------

/// A squeeze followed by a phase-space rotation, the closed-form description
/// of every lossless evolution in this crate.
///
/// `r >= 0` is the squeeze factor and `phi` the pump-phase angle: the
/// squeeze part is `exp(-i (zeta a^†2 + zeta^* a^2))` with
/// `zeta = (r/2) e^{i (pi/2 - phi)}`, so the minimized quadrature sits at
/// `pi/2 - phi/2` and reaches `Var = e^{-2r}/4` on vacuum. `rotation` is an
/// extra `exp(-i rotation a^†a)` applied after the squeeze; it shifts the
/// quadrature pattern rigidly (the minimum moves to
/// `pi/2 - phi/2 - rotation`) and never changes the extremal variances.
#[derive(Debug, Clone, Copy)]
pub struct SqueezeTransform {
    pub r: f64,
    pub phi: f64,
    pub rotation: f64,
}

impl SqueezeTransform {
    pub fn identity() -> Self {
        SqueezeTransform {
            r: 0.0,
            phi: 0.0,
            rotation: 0.0,
        }
    }

    /// Heisenberg coefficients `(mu, nu)` of `U^† a U = mu a + nu a^†`.
    pub fn bogoliubov(&self) -> (C64, C64) {
        let frame = C64::from_polar(1.0, -self.rotation);
        let mu = frame * self.r.cosh();
        let nu = frame * C64::from_polar(self.r.sinh(), -self.phi);
        (mu, nu)
    }

    /// Rebuilds the parameters from Heisenberg coefficients. Errors unless
    /// `|mu|^2 - |nu|^2 = 1` within 1e-9.
    pub fn from_bogoliubov(mu: C64, nu: C64) -> Result<Self> {
        let det = mu.norm_sqr() - nu.norm_sqr();
        if (det - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "coefficients are not symplectic: |mu|^2 - |nu|^2 = {det}"
            )));
        }
        // asinh is exact at zero, unlike acosh at one
        let r = nu.norm().asinh();
        let rotation = -mu.arg();
        let phi = if nu.norm() == 0.0 {
            0.0
        } else {
            // undo the frame phase: nu e^{i rotation} = e^{-i phi} sinh r
            let dressed = nu * C64::from_polar(1.0, rotation);
            (-dressed.arg()).rem_euclid(std::f64::consts::TAU)
        };
        Ok(SqueezeTransform { r, phi, rotation })
    }

    /// The transform equivalent to applying `self` first, then `after`.
    pub fn then(&self, after: &SqueezeTransform) -> Result<Self> {
        let (mu1, nu1) = self.bogoliubov();
        let (mu2, nu2) = after.bogoliubov();
        // composition of U^† a U maps through the second transform's
        // coefficients acting on the first's
        let mu = mu2 * mu1 + nu2 * nu1.conj();
        let nu = mu2 * nu1 + nu2 * mu1.conj();
        Self::from_bogoliubov(mu, nu)
    }

    pub fn inverse(&self) -> Result<Self> {
        let (mu, nu) = self.bogoliubov();
        Self::from_bogoliubov(mu.conj(), -nu)
    }
}

/// Closed-form transform for the resonantly driven pump: `r = 2 |xi| t` and
/// `phi = pi/2 - Theta`, with the dispersive pull `varpi` accumulating as the
/// residual rotation `varpi t`. With these fields [`apply_squeeze`]
/// reproduces the integrated pump evolution exactly, truncation edge effects
/// included; only integrator error separates the two routes.
///
/// The effective parameters must carry no finite coupling ratio, i.e. the
/// drive detuning must sit on `2 chi` (see `derive_effective`); anything else
/// is a contract violation reported as [`Error::Regime`].
pub fn analytic_squeeze(eff: &EffectiveParams, t: f64) -> Result<SqueezeTransform> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidParams(format!(
            "squeeze time must be finite and nonnegative, got {t}"
        )));
    }
    if eff.p.is_some() {
        return Err(Error::Regime(
            "the linear-growth transform holds only on resonance (drive detuning equal to 2 chi); use the off-resonant closed form instead"
                .into(),
        ));
    }
    Ok(SqueezeTransform {
        r: eff.resonant_squeeze_factor(t),
        phi: std::f64::consts::FRAC_PI_2 - eff.theta(),
        rotation: eff.varpi * t,
    })
}

/// Applies a squeeze transform to a field state by exponentiating its
/// generator on the truncated basis.
///
/// Errors: [`Error::InvalidParams`] for `r < 0` or an atom-field state, and
/// [`Error::Truncation`] if the squeezed result piles up population against
/// the truncation edge.
pub fn apply_squeeze(state: &StateVector, s: &SqueezeTransform) -> Result<StateVector> {
    if s.r < 0.0 {
        return Err(Error::InvalidParams(format!(
            "squeeze factor must be nonnegative, got {}",
            s.r
        )));
    }
    let n_max = match state.tag {
        BasisTag::Fock { n_max } => n_max,
        BasisTag::AtomFock { .. } => {
            return Err(Error::InvalidParams(
                "squeeze transforms act on field-only states; project the atom first".into(),
            ))
        }
    };
    let basis = crate::hilbert::FockBasis::new(n_max);
    let mut out = if s.r == 0.0 {
        state.clone()
    } else {
        // U = exp(-i (zeta a^{†2} + zeta^* a^2)) with zeta = (r/2) e^{i (pi/2 - phi)},
        // exponentiated directly on the truncated basis so the result matches
        // the integrated pump evolution on this space, edge effects included
        let zeta = C64::from_polar(s.r / 2.0, std::f64::consts::FRAC_PI_2 - s.phi);
        let a = crate::hilbert::annihilation(basis);
        let adag2 = a.dagger();
        let adag2 = adag2.mat.dot(&adag2.mat);
        let a2 = a.mat.dot(&a.mat);
        let minus_i = C64::new(0.0, -1.0);
        let gen = adag2.mapv(|z| minus_i * zeta * z) + a2.mapv(|z| minus_i * zeta.conj() * z);
        let u = expm(&gen);
        let amps = u.dot(&state.amps);
        StateVector::new(amps, state.tag)?
    };
    if s.rotation != 0.0 {
        for n in 0..out.dim() {
            out.amps[n] *= C64::from_polar(1.0, -s.rotation * n as f64);
        }
    }
    let corr = out.renormalize();
    if corr > 1e-9 {
        return Err(Error::InvalidParams(format!(
            "squeeze operator lost unitarity: norm correction {corr:.3e}"
        )));
    }
    // Near-cutoff squeezing legitimately fattens the top of the basis, so
    // this guard only rejects outright pile-up. Callers needing clean tails
    // compare leakage_fraction against their own budget.
    let tail = out.leakage_fraction();
    if tail > SQUEEZE_TAIL_LIMIT {
        return Err(Error::Truncation {
            tail,
            limit: SQUEEZE_TAIL_LIMIT,
            context: "squeeze transform output".into(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::quadrature_stats;
    use crate::hilbert::{coherent_state, number, vacuum, FockBasis};
    use crate::model::{derive_effective, effective_hamiltonian_mode, SystemParams};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    const R_REF: f64 = 1.0666666666666667;

    fn reference_transform() -> SqueezeTransform {
        let eff = derive_effective(&SystemParams::reference()).unwrap();
        analytic_squeeze(&eff, 2e-4).unwrap()
    }

    #[test]
    fn analytic_transform_matches_reference_values() {
        let s = reference_transform();
        assert_abs_diff_eq!(s.r, R_REF, epsilon = 1e-12);
        assert_abs_diff_eq!(s.phi, FRAC_PI_2, epsilon = 1e-12);
        // dispersive pull of 8e4 rad/s over 2e-4 s
        assert_abs_diff_eq!(s.rotation, 16.0, epsilon = 1e-9);
    }

    #[test]
    fn analytic_transform_requires_resonance() {
        let mut params = SystemParams::reference();
        params.big_delta += 1e4;
        let eff = derive_effective(&params).unwrap();
        let err = analytic_squeeze(&eff, 1e-4).unwrap_err();
        assert!(matches!(err, Error::Regime(_)));
    }

    #[test]
    fn squeezed_vacuum_hits_the_analytic_variance() {
        let s = reference_transform();
        // at the default truncation the edge population limits the match to
        // a few 1e-6; the headroom run below pins the convention sharply
        let psi = apply_squeeze(&vacuum(FockBasis::new(63)), &s).unwrap();
        let stats = quadrature_stats(&psi).unwrap();
        // frozen: e^{-2r}/4 and its inverse partner at r = 16/15
        assert_abs_diff_eq!(stats.var_min, 0.029610457253450927, epsilon = 4e-6);
        assert_abs_diff_eq!(stats.var_max, (2.0 * R_REF).exp() / 4.0, epsilon = 3e-4);
        let axis = FRAC_PI_2 - s.phi / 2.0 - s.rotation;
        assert_abs_diff_eq!(stats.variance_at(axis), stats.var_min, epsilon = 4e-6);
        let mut d = (stats.phi_min - axis).rem_euclid(PI);
        d = d.min(PI - d);
        assert!(d < 1e-6, "squeezed quadrature off by {d:.2e} rad");
        assert_abs_diff_eq!(stats.mean_n, R_REF.sinh().powi(2), epsilon = 3e-4);

        let roomy = apply_squeeze(&vacuum(FockBasis::new(160)), &s).unwrap();
        let stats = quadrature_stats(&roomy).unwrap();
        assert_abs_diff_eq!(stats.var_min, 0.029610457253450927, epsilon = 1e-12);
        assert_abs_diff_eq!(stats.var_max, (2.0 * R_REF).exp() / 4.0, epsilon = 1e-10);
        assert_abs_diff_eq!(stats.mean_n, R_REF.sinh().powi(2), epsilon = 1e-10);
    }

    #[test]
    fn squeeze_operator_realizes_its_heisenberg_action() {
        // the squeeze spreads level j up to roughly j e^{2r}, so checking a
        // 16x16 corner of the conjugated operator needs generous headroom
        let basis = FockBasis::new(200);
        let s = SqueezeTransform {
            r: 0.7,
            phi: 0.4,
            rotation: 0.0,
        };
        let zeta = C64::from_polar(s.r / 2.0, FRAC_PI_2 - s.phi);
        let a = crate::hilbert::annihilation(basis);
        let minus_i = C64::new(0.0, -1.0);
        let adag2 = a.dagger().mat.dot(&a.dagger().mat);
        let a2 = a.mat.dot(&a.mat);
        let gen = adag2.mapv(|z| minus_i * zeta * z) + a2.mapv(|z| minus_i * zeta.conj() * z);
        let u = expm(&gen);
        let udag = u.t().mapv(|z| z.conj());

        let lhs = udag.dot(&a.mat).dot(&u);
        let (mu, nu) = s.bogoliubov();
        let rhs = a.mat.mapv(|z| mu * z) + a.dagger().mat.mapv(|z| nu * z);
        let mut worst = 0.0_f64;
        for i in 0..16 {
            for j in 0..16 {
                worst = worst.max((lhs[[i, j]] - rhs[[i, j]]).norm());
            }
        }
        assert!(worst < 1e-12, "Heisenberg action off by {worst:.2e}");
    }

    #[test]
    fn applying_twice_doubles_the_factor() {
        let basis = FockBasis::new(63);
        let s = SqueezeTransform {
            r: 0.4,
            phi: 1.1,
            rotation: 0.0,
        };
        let twice = apply_squeeze(&apply_squeeze(&vacuum(basis), &s).unwrap(), &s).unwrap();
        let once = apply_squeeze(
            &vacuum(basis),
            &SqueezeTransform { r: 0.8, ..s },
        )
        .unwrap();
        let diff = (&twice.amps - &once.amps)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12, "group law violated by {diff:.2e}");
    }

    #[test]
    fn transform_algebra_composes_and_inverts() {
        let s = SqueezeTransform {
            r: 0.9,
            phi: 0.3,
            rotation: 0.5,
        };
        let doubled = s.then(&SqueezeTransform { rotation: 0.0, ..s });
        // composing with itself along the same axis doubles r only when no
        // rotation interleaves; here the first rotation twists the second
        // squeeze, so just check the round trip instead
        assert!(doubled.is_ok());

        let identity = s.then(&s.inverse().unwrap()).unwrap();
        assert!(identity.r.abs() <= 1e-12);
        assert!(identity.rotation.abs() <= 1e-12);

        let plain = SqueezeTransform {
            r: 0.6,
            phi: 0.8,
            rotation: 0.0,
        };
        let chained = plain.then(&plain).unwrap();
        assert_abs_diff_eq!(chained.r, 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(chained.phi, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(chained.rotation, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn apply_then_inverse_returns_the_state() {
        let basis = FockBasis::new(63);
        let psi0 = coherent_state(basis, C64::new(0.8, 0.3)).unwrap();
        let s = SqueezeTransform {
            r: 0.5,
            phi: 0.9,
            rotation: 0.7,
        };
        let roundtrip =
            apply_squeeze(&apply_squeeze(&psi0, &s).unwrap(), &s.inverse().unwrap()).unwrap();
        let diff = (&roundtrip.amps - &psi0.amps)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-10, "round trip off by {diff:.2e}");
    }

    #[test]
    fn rejects_negative_factor_and_atom_field_states() {
        let basis = FockBasis::new(8);
        let bad = SqueezeTransform {
            r: -0.1,
            phi: 0.0,
            rotation: 0.0,
        };
        assert!(matches!(
            apply_squeeze(&vacuum(basis), &bad),
            Err(Error::InvalidParams(_))
        ));
        let embedded = vacuum(basis).embed_atom(crate::hilbert::Level::I).unwrap();
        assert!(matches!(
            apply_squeeze(&embedded, &SqueezeTransform::identity()),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn free_rotation_matches_the_exact_coherent_orbit() {
        let basis = FockBasis::new(40);
        let omega = 2.0e5;
        let alpha = C64::new(1.2, -0.4);
        let psi0 = coherent_state(basis, alpha).unwrap();
        let n_op = number(basis);
        let h = move |_t: f64| OperatorMatrix::new(n_op.mat.mapv(|z| omega * z), n_op.tag).unwrap();
        let t_final = 3e-5;
        let cfg = EvolutionConfig::from_spectral_bound(t_final, omega * 40.0, 0.02);
        let traj = evolve_td(&psi0, h, &cfg).unwrap();
        let stats = quadrature_stats(traj.final_state()).unwrap();
        let expect = alpha * C64::from_polar(1.0, -omega * t_final);
        assert!((stats.mean_a - expect).norm() < 1e-8);
        assert!(traj.max_renorm_correction < RENORM_BUDGET);
        assert!(traj.warnings.is_empty());
    }

    #[test]
    fn convergence_audit_shows_fourth_order_scaling() {
        let basis = FockBasis::new(24);
        let omega = 1.0e5;
        let psi0 = coherent_state(basis, C64::new(0.9, 0.0)).unwrap();
        let n_op = number(basis);
        let h = move |_t: f64| OperatorMatrix::new(n_op.mat.mapv(|z| omega * z), n_op.tag).unwrap();
        let cfg = EvolutionConfig::new(2e-5, 2e-8);
        let coarse = convergence_audit(&psi0, &h, &cfg).unwrap();
        let halved = EvolutionConfig {
            dt_max: cfg.dt_max / 2.0,
            ..cfg
        };
        let fine = convergence_audit(&psi0, &h, &halved).unwrap();
        let ratio = coarse / fine;
        assert!(
            (8.0..40.0).contains(&ratio),
            "error ratio {ratio:.1} is not fourth order"
        );
    }

    #[test]
    fn pump_evolution_reproduces_the_analytic_variances() {
        let mut params = SystemParams::reference();
        params.n_max = 31;
        let eff = derive_effective(&params).unwrap();
        let basis = params.basis();
        let t_final = 9.375e-5; // r = 0.5
        let h = move |t: f64| effective_hamiltonian_mode(&eff, t, basis);
        let bound = h(0.0).spectral_bound();
        let cfg = EvolutionConfig::from_spectral_bound(t_final, bound, 0.02);
        let traj = evolve_td(&vacuum(basis), h, &cfg).unwrap();
        let numeric = quadrature_stats(traj.final_state()).unwrap();

        let s = analytic_squeeze(&eff, t_final).unwrap();
        let exact = quadrature_stats(&apply_squeeze(&vacuum(basis), &s).unwrap()).unwrap();

        assert!(
            ((numeric.var_min - exact.var_min) / exact.var_min).abs() < 1e-6,
            "var_min {} vs {}",
            numeric.var_min,
            exact.var_min
        );
        assert!(((numeric.var_max - exact.var_max) / exact.var_max).abs() < 1e-6);
        assert!(((numeric.mean_n - exact.mean_n) / exact.mean_n.max(1e-12)).abs() < 1e-5);
    }

    #[test]
    fn oversized_steps_are_rejected_up_front() {
        let basis = FockBasis::new(16);
        let n_op = number(basis);
        let h = move |_t: f64| {
            OperatorMatrix::new(n_op.mat.mapv(|z| 1.0e6 * z), n_op.tag).unwrap()
        };
        let cfg = EvolutionConfig::new(1e-3, 1e-5);
        let err = evolve_td(&vacuum(basis), h, &cfg).unwrap_err();
        assert!(matches!(err, Error::StabilityViolation { .. }));
    }

    #[test]
    fn zero_time_run_returns_the_initial_record_only() {
        let basis = FockBasis::new(8);
        let n_op = number(basis);
        let h = move |_t: f64| n_op.clone();
        let cfg = EvolutionConfig::new(0.0, 1e-6);
        let traj = evolve_td(&vacuum(basis), h, &cfg).unwrap();
        assert_eq!(traj.times.len(), 1);
        assert_eq!(traj.steps, 0);
        assert_eq!(traj.times[0], 0.0);
    }

    #[test]
    fn recording_stride_keeps_endpoints() {
        let basis = FockBasis::new(8);
        let n_op = number(basis);
        let h = move |_t: f64| {
            OperatorMatrix::new(n_op.mat.mapv(|z| 1.0e3 * z), n_op.tag).unwrap()
        };
        let cfg = EvolutionConfig::new(1e-5, 1e-6 / 3.0).recording_every(7);
        let traj = evolve_td(&vacuum(basis), h, &cfg).unwrap();
        assert_eq!(traj.times[0], 0.0);
        assert_abs_diff_eq!(traj.final_time(), 1e-5, epsilon = 1e-20);
        // strides 7, 14, 21, 28 plus both endpoints
        assert_eq!(traj.times.len(), 2 + traj.steps / 7);
    }
}
