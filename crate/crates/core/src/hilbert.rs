//! Truncated Fock space and the composite atom–field space.
//!
//! The field lives in a Fock basis truncated at `n_max` (dimension
//! `n_max + 1`). The atom is a three-level ladder `g, i, e`; composite states
//! are ordered level-major, so the global index of `|l, n>` is
//! `l*(n_max+1) + n`. Everything is dense: the spaces involved stay small
//! (a few hundred dimensions) and dense algebra keeps the code obvious.

use ndarray::{Array1, Array2};
use ndarray::linalg::kron;

use crate::error::Error;
use crate::{Result, C64};

/// Probability allowed in the top tenth of Fock levels before a state is
/// declared untrustworthy.
pub const LEAKAGE_LIMIT: f64 = 1e-6;

/// Tail mass allowed when preparing a coherent state on a truncated basis.
pub const COHERENT_TAIL_LIMIT: f64 = 1e-10;

/// Truncated single-mode Fock basis `{|0>, ..., |n_max>}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockBasis {
    pub n_max: usize,
}

impl FockBasis {
    pub fn new(n_max: usize) -> Self {
        Self { n_max }
    }

    /// Number of retained Fock levels, `n_max + 1`.
    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// Dimension of the composite atom ⊗ field space.
    pub fn atom_field_dim(&self) -> usize {
        3 * self.dim()
    }
}

/// The three atomic levels of the ladder, in energy order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    G,
    I,
    E,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::G, Level::I, Level::E];

    /// Block index in the level-major composite ordering.
    pub fn index(self) -> usize {
        match self {
            Level::G => 0,
            Level::I => 1,
            Level::E => 2,
        }
    }
}

/// Which space a state vector lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisTag {
    /// Field only, dimension `n_max + 1`.
    Fock { n_max: usize },
    /// Atom ⊗ field, dimension `3 (n_max + 1)`.
    AtomFock { n_max: usize },
}

impl BasisTag {
    pub fn dim(&self) -> usize {
        match *self {
            BasisTag::Fock { n_max } => n_max + 1,
            BasisTag::AtomFock { n_max } => 3 * (n_max + 1),
        }
    }

    pub fn n_max(&self) -> usize {
        match *self {
            BasisTag::Fock { n_max } | BasisTag::AtomFock { n_max } => n_max,
        }
    }
}

/// A pure state with a tag recording which basis its amplitudes index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amps: Array1<C64>,
    pub tag: BasisTag,
}

impl StateVector {
    /// Wraps raw amplitudes, checking the length against the tag.
    pub fn new(amps: Array1<C64>, tag: BasisTag) -> Result<Self> {
        if amps.len() != tag.dim() {
            return Err(Error::DimensionMismatch {
                expected: tag.dim(),
                got: amps.len(),
                context: "state amplitudes vs basis tag".into(),
            });
        }
        Ok(Self { amps, tag })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Rescales to unit norm in place and returns the correction `|1 - norm|`
    /// that was removed.
    pub fn renormalize(&mut self) -> f64 {
        let n = self.norm();
        let correction = (1.0 - n).abs();
        if n > 0.0 {
            self.amps.mapv_inplace(|c| c / n);
        }
        correction
    }

    /// Probability carried by the top tenth of Fock levels (at least one
    /// level). For composite states the three atomic blocks are summed.
    pub fn leakage_fraction(&self) -> f64 {
        let fock_dim = self.tag.n_max() + 1;
        let k = (fock_dim / 10).max(1);
        let lo = fock_dim - k;
        match self.tag {
            BasisTag::Fock { .. } => {
                (lo..fock_dim).map(|n| self.amps[n].norm_sqr()).sum()
            }
            BasisTag::AtomFock { .. } => Level::ALL
                .iter()
                .flat_map(|l| (lo..fock_dim).map(move |n| l.index() * fock_dim + n))
                .map(|idx| self.amps[idx].norm_sqr())
                .sum(),
        }
    }

    /// Errors out when leakage exceeds [`LEAKAGE_LIMIT`].
    pub fn check_leakage(&self, context: &str) -> Result<()> {
        let tail = self.leakage_fraction();
        if tail > LEAKAGE_LIMIT {
            return Err(Error::Truncation {
                tail,
                limit: LEAKAGE_LIMIT,
                context: context.into(),
            });
        }
        Ok(())
    }

    /// Extracts the field state conditioned on the atom being in `level`.
    ///
    /// Returns the renormalized field block and the population found in it.
    /// A zero-population block comes back as the zero vector.
    pub fn project_level(&self, level: Level) -> Result<(StateVector, f64)> {
        let n_max = match self.tag {
            BasisTag::AtomFock { n_max } => n_max,
            BasisTag::Fock { .. } => {
                return Err(Error::DimensionMismatch {
                    expected: 3 * (self.tag.n_max() + 1),
                    got: self.dim(),
                    context: "atomic projection of a field-only state".into(),
                })
            }
        };
        let fock_dim = n_max + 1;
        let lo = level.index() * fock_dim;
        let block = self.amps.slice(ndarray::s![lo..lo + fock_dim]).to_owned();
        let pop: f64 = block.iter().map(|c| c.norm_sqr()).sum();
        let amps = if pop > 0.0 {
            block.mapv(|c| c / pop.sqrt())
        } else {
            block
        };
        Ok((
            StateVector {
                amps,
                tag: BasisTag::Fock { n_max },
            },
            pop,
        ))
    }

    /// Places a field-only state in the composite space with the atom in
    /// `level`.
    pub fn embed_atom(&self, level: Level) -> Result<StateVector> {
        let n_max = match self.tag {
            BasisTag::Fock { n_max } => n_max,
            BasisTag::AtomFock { .. } => {
                return Err(Error::DimensionMismatch {
                    expected: self.tag.n_max() + 1,
                    got: self.dim(),
                    context: "embedding a composite state".into(),
                })
            }
        };
        let fock_dim = n_max + 1;
        let mut amps = Array1::zeros(3 * fock_dim);
        let lo = level.index() * fock_dim;
        amps.slice_mut(ndarray::s![lo..lo + fock_dim])
            .assign(&self.amps);
        Ok(StateVector {
            amps,
            tag: BasisTag::AtomFock { n_max },
        })
    }
}

/// Dense operator with the same tagging discipline as [`StateVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub mat: Array2<C64>,
    pub tag: BasisTag,
}

impl OperatorMatrix {
    pub fn new(mat: Array2<C64>, tag: BasisTag) -> Result<Self> {
        if mat.nrows() != tag.dim() || mat.ncols() != tag.dim() {
            return Err(Error::DimensionMismatch {
                expected: tag.dim(),
                got: mat.nrows().max(mat.ncols()),
                context: "operator matrix vs basis tag".into(),
            });
        }
        Ok(Self { mat, tag })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> OperatorMatrix {
        OperatorMatrix {
            mat: self.mat.t().mapv(|c| c.conj()),
            tag: self.tag,
        }
    }

    /// Largest entry of `H - H^†` relative to the largest entry of `H`.
    /// Zero operators report zero.
    pub fn hermiticity_residual(&self) -> f64 {
        let scale = self
            .mat
            .iter()
            .map(|c| c.norm())
            .fold(0.0_f64, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let res = (self.mat[[i, j]] - self.mat[[j, i]].conj()).norm();
                worst = worst.max(res);
            }
        }
        worst / scale
    }

    /// Gershgorin bound on the spectral radius: `max_i (sum_j |H_ij|)`.
    pub fn spectral_bound(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.mat.row(i).iter().map(|c| c.norm()).sum::<f64>())
            .fold(0.0_f64, f64::max)
    }

    /// Matrix–vector application producing a new state.
    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: state.dim(),
                context: "operator applied to state".into(),
            });
        }
        Ok(StateVector {
            amps: self.mat.dot(&state.amps),
            tag: state.tag,
        })
    }
}

/// Field annihilation operator `a` on the truncated basis:
/// `a|n> = sqrt(n)|n-1>`.
pub fn annihilation(basis: FockBasis) -> OperatorMatrix {
    let dim = basis.dim();
    let mut mat = Array2::zeros((dim, dim));
    for n in 1..dim {
        mat[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    OperatorMatrix {
        mat,
        tag: BasisTag::Fock { n_max: basis.n_max },
    }
}

/// Field creation operator `a^†`.
pub fn creation(basis: FockBasis) -> OperatorMatrix {
    annihilation(basis).dagger()
}

/// Photon-number operator `a^† a` (exact diagonal, no truncation artifact).
pub fn number(basis: FockBasis) -> OperatorMatrix {
    let dim = basis.dim();
    let mut mat = Array2::zeros((dim, dim));
    for n in 0..dim {
        mat[[n, n]] = C64::new(n as f64, 0.0);
    }
    OperatorMatrix {
        mat,
        tag: BasisTag::Fock { n_max: basis.n_max },
    }
}

/// Identity on the field space.
pub fn field_identity(basis: FockBasis) -> OperatorMatrix {
    OperatorMatrix {
        mat: Array2::eye(basis.dim()),
        tag: BasisTag::Fock { n_max: basis.n_max },
    }
}

/// Vacuum state `|0>`.
pub fn vacuum(basis: FockBasis) -> StateVector {
    fock_state(basis, 0).expect("n = 0 always fits")
}

/// Number state `|n>`.
pub fn fock_state(basis: FockBasis, n: usize) -> Result<StateVector> {
    if n > basis.n_max {
        return Err(Error::DimensionMismatch {
            expected: basis.n_max,
            got: n,
            context: "Fock level beyond truncation".into(),
        });
    }
    let mut amps = Array1::zeros(basis.dim());
    amps[n] = C64::new(1.0, 0.0);
    Ok(StateVector {
        amps,
        tag: BasisTag::Fock { n_max: basis.n_max },
    })
}

/// Coherent state `|alpha>` on the truncated basis.
///
/// Amplitudes follow the recurrence `c_n = c_{n-1} alpha / sqrt(n)`; the mass
/// beyond `n_max` must stay below [`COHERENT_TAIL_LIMIT`] and the amplitude
/// itself must satisfy `|alpha|^2 <= n_max / 4`, otherwise the truncated basis
/// cannot represent the state faithfully. The result is renormalized.
pub fn coherent_state(basis: FockBasis, alpha: C64) -> Result<StateVector> {
    let abs2 = alpha.norm_sqr();
    if abs2 > basis.n_max as f64 / 4.0 {
        return Err(Error::Truncation {
            tail: abs2,
            limit: basis.n_max as f64 / 4.0,
            context: format!(
                "coherent amplitude |alpha|^2 = {abs2:.3} exceeds n_max/4 for n_max = {}",
                basis.n_max
            ),
        });
    }
    let dim = basis.dim();
    let mut amps = Array1::zeros(dim);
    let mut c = C64::new((-abs2 / 2.0).exp(), 0.0);
    amps[0] = c;
    for n in 1..dim {
        c *= alpha / C64::new((n as f64).sqrt(), 0.0);
        amps[n] = c;
    }
    let kept: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
    let tail = (1.0 - kept).max(0.0);
    if tail > COHERENT_TAIL_LIMIT {
        return Err(Error::Truncation {
            tail,
            limit: COHERENT_TAIL_LIMIT,
            context: format!("coherent state alpha = {alpha} on n_max = {}", basis.n_max),
        });
    }
    let mut state = StateVector {
        amps,
        tag: BasisTag::Fock { n_max: basis.n_max },
    };
    state.renormalize();
    Ok(state)
}

/// Atomic transition operator `|k><l|` tensored with a field operator.
///
/// This is the workhorse for Hamiltonian assembly; the composite ordering is
/// level-major, matching `kron(atom, field)`.
pub fn atom_field(k: Level, l: Level, field_op: &OperatorMatrix) -> Result<OperatorMatrix> {
    let n_max = match field_op.tag {
        BasisTag::Fock { n_max } => n_max,
        BasisTag::AtomFock { .. } => {
            return Err(Error::DimensionMismatch {
                expected: field_op.tag.n_max() + 1,
                got: field_op.dim(),
                context: "atom_field expects a field-only operator".into(),
            })
        }
    };
    let mut atom = Array2::zeros((3, 3));
    atom[[k.index(), l.index()]] = C64::new(1.0, 0.0);
    Ok(OperatorMatrix {
        mat: kron(&atom, &field_op.mat),
        tag: BasisTag::AtomFock { n_max },
    })
}

/// Projector-style operator `|k><l| ⊗ 1_field` on the composite space.
pub fn atomic_projector(k: Level, l: Level, basis: FockBasis) -> OperatorMatrix {
    atom_field(k, l, &field_identity(basis)).expect("identity is a field operator")
}

/// `<psi|O|psi>` with dimension checking.
pub fn expectation(state: &StateVector, op: &OperatorMatrix) -> Result<C64> {
    if state.dim() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: state.dim(),
            context: "expectation value".into(),
        });
    }
    let applied = op.mat.dot(&state.amps);
    Ok(state
        .amps
        .iter()
        .zip(applied.iter())
        .map(|(c, oc)| c.conj() * oc)
        .sum())
}
