//! Multi-spin Hamiltonians built from Kronecker sums, their spectra and
//! matrix-exponential evolution.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpinError};
use crate::matrix::{c, pauli, Axis, ComplexMatrix, StateVector, I, ZERO};
use crate::state::{PhysicalConstants, SpinState};
use crate::tolerance::{HERMITIAN_TOL, MAX_SPINS, NORM_TOL};

/// Modified σ matrix carrying a dimensionless rest ratio `k_p` on every entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KSigma {
    pub axis: Axis,
    pub k_p: f64,
}

pub fn k_sigma_matrix(s: &KSigma) -> ComplexMatrix {
    let k = c(s.k_p, 0.0);
    let shift = ComplexMatrix::new2(k, k, k, k);
    shift.add(&pauli(s.axis)).expect("2x2")
}

/// `A⊗I_n + I_m⊗B`.
pub fn kron_sum(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let left = a.kron(&ComplexMatrix::identity(b.dim())?)?;
    let right = ComplexMatrix::identity(a.dim())?.kron(b)?;
    left.add(&right)
}

/// Left fold of [`kron_sum`] over a non-empty list.
pub fn kron_sum_all(terms: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let (first, rest) = terms
        .split_first()
        .ok_or_else(|| SpinError::InvalidArgument("empty Kronecker sum".into()))?;
    rest.iter().try_fold(first.clone(), |acc, m| kron_sum(&acc, m))
}

fn check_capacity(spins: usize) -> Result<()> {
    if spins > MAX_SPINS {
        Err(SpinError::CapacityExceeded { spins, max: MAX_SPINS })
    } else {
        Ok(())
    }
}

/// Spins sharing one homogeneous field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinDomain {
    pub n_spins: usize,
    /// (B_X, B_Y, B_Z) in tesla.
    pub field: [f64; 3],
    /// One dimensionless rest ratio per spin.
    pub k_list: Vec<f64>,
}

impl SpinDomain {
    pub fn new(n_spins: usize, field: [f64; 3], k_list: Vec<f64>) -> Result<Self> {
        if n_spins == 0 {
            return Err(SpinError::InvalidArgument("a domain needs at least one spin".into()));
        }
        check_capacity(n_spins)?;
        if k_list.len() != n_spins {
            return Err(SpinError::DimensionMismatch {
                expected: n_spins,
                found: k_list.len(),
            });
        }
        if !field.iter().chain(&k_list).all(|v| v.is_finite()) {
            return Err(SpinError::NonFinite { context: "spin domain" });
        }
        Ok(Self { n_spins, field, k_list })
    }

    /// Domain with all rest ratios zero.
    pub fn plain(n_spins: usize, field: [f64; 3]) -> Result<Self> {
        Self::new(n_spins, field, vec![0.0; n_spins])
    }
}

/// `−½γħ Σ_axis (⊕_p σ_p^axis) B_axis`.
pub fn hamiltonian_homogeneous(d: &SpinDomain, consts: &PhysicalConstants) -> Result<ComplexMatrix> {
    check_capacity(d.n_spins)?;
    let dim = 1usize << d.n_spins;
    let mut h = ComplexMatrix::zeros(dim)?;
    for axis in Axis::ALL {
        let b = d.field[axis.index()];
        if b == 0.0 {
            continue;
        }
        let sigmas: Vec<ComplexMatrix> = d
            .k_list
            .iter()
            .map(|&k_p| k_sigma_matrix(&KSigma { axis, k_p }))
            .collect();
        h = h.add(&kron_sum_all(&sigmas)?.scale(c(b, 0.0)))?;
    }
    Ok(h.scale(c(-0.5 * consts.gamma * consts.hbar, 0.0)))
}

fn single_spin_zeeman(b: &[f64; 3], consts: &PhysicalConstants) -> ComplexMatrix {
    let mut m = ComplexMatrix::new2(ZERO, ZERO, ZERO, ZERO);
    for axis in Axis::ALL {
        m = m.add(&pauli(axis).scale(c(b[axis.index()], 0.0))).expect("2x2");
    }
    m.scale(c(-0.5 * consts.gamma * consts.hbar, 0.0))
}

/// Kronecker sum of the single-spin terms −μ_p·B_p, one field per spin.
pub fn hamiltonian_distinct_fields(fields: &[[f64; 3]], consts: &PhysicalConstants) -> Result<ComplexMatrix> {
    check_capacity(fields.len())?;
    let terms: Vec<ComplexMatrix> = fields.iter().map(|b| single_spin_zeeman(b, consts)).collect();
    kron_sum_all(&terms)
}

/// Independent domains; the total Hamiltonian is the Kronecker sum of the
/// domain Hamiltonians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSpinSystem {
    pub domains: Vec<SpinDomain>,
    pub constants: PhysicalConstants,
}

impl MultiSpinSystem {
    pub fn new(domains: Vec<SpinDomain>, constants: PhysicalConstants) -> Result<Self> {
        if domains.is_empty() {
            return Err(SpinError::InvalidArgument("a system needs at least one domain".into()));
        }
        let total: usize = domains.iter().map(|d| d.n_spins).sum();
        check_capacity(total)?;
        Ok(Self { domains, constants })
    }

    pub fn total_spins(&self) -> usize {
        self.domains.iter().map(|d| d.n_spins).sum()
    }

    pub fn domain_hamiltonians(&self) -> Result<Vec<ComplexMatrix>> {
        self.domains
            .iter()
            .map(|d| hamiltonian_homogeneous(d, &self.constants))
            .collect()
    }

    /// Full 2^N Hamiltonian.
    pub fn hamiltonian(&self) -> Result<ComplexMatrix> {
        kron_sum_all(&self.domain_hamiltonians()?)
    }

    /// Evolves each domain in its own space and combines the results by
    /// tensor product in domain order.
    pub fn evolve(&self, domain_states: &[StateVector], t: f64) -> Result<StateVector> {
        if domain_states.len() != self.domains.len() {
            return Err(SpinError::DimensionMismatch {
                expected: self.domains.len(),
                found: domain_states.len(),
            });
        }
        let hs = self.domain_hamiltonians()?;
        let hbar = self.constants.hbar;
        let evolved: Vec<StateVector> = hs
            .par_iter()
            .zip(domain_states.par_iter())
            .map(|(h, psi)| evolve_matrix_exp(h, psi, t, hbar))
            .collect::<Result<_>>()?;
        let (first, rest) = evolved.split_first().expect("non-empty");
        rest.iter().try_fold(first.clone(), |acc, v| acc.kron(v))
    }
}

/// Eigenvalues sorted descending with orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySpectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl EnergySpectrum {
    /// `V·diag(f(λ))·V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let v = self.eigenvectors.entries();
        let weights: Vec<Complex64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += v[i * n + k] * weights[k] * v[j * n + k].conj();
                }
                out[i * n + j] = acc;
            }
        }
        ComplexMatrix::from_row_major(n, out).expect("finite reconstruction")
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|l| c(l, 0.0))
    }
}

pub(crate) fn check_hermitian(h: &ComplexMatrix) -> Result<()> {
    let deviation = h.hermitian_deviation();
    if deviation > HERMITIAN_TOL * h.max_abs() {
        Err(SpinError::NotHermitian { deviation })
    } else {
        Ok(())
    }
}

/// Hermitian eigen-decomposition. Each eigenvector is phase-fixed so that its
/// first significant component is real and positive.
pub fn eigen_spectrum(h: &ComplexMatrix) -> Result<EnergySpectrum> {
    check_hermitian(h)?;
    let n = h.dim();
    let scale = h.max_abs();
    if scale == 0.0 {
        return Ok(EnergySpectrum {
            eigenvalues: vec![0.0; n],
            eigenvectors: ComplexMatrix::identity(n)?,
        });
    }
    // Work on H/scale to keep the solver's absolute thresholds meaningful.
    let m = DMatrix::from_fn(n, n, |i, j| {
        // Symmetrize so tiny anti-Hermitian noise does not leak in.
        0.5 * (h.get(i, j) + h.get(j, i).conj()) / scale
    });
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    let first_significant = |k: usize| -> usize {
        (0..n)
            .find(|&i| eig.eigenvectors[(i, k)].norm() > 1e-8)
            .unwrap_or(0)
    };
    order.sort_by(|&a, &b| {
        let (la, lb) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        if (la - lb).abs() <= 1e-12 {
            first_significant(a).cmp(&first_significant(b))
        } else {
            lb.partial_cmp(&la).expect("finite eigenvalues")
        }
    });
    let mut vectors = vec![ZERO; n * n];
    let mut values = Vec::with_capacity(n);
    for (col, &k) in order.iter().enumerate() {
        values.push(eig.eigenvalues[k] * scale);
        let pivot = eig.eigenvectors[(first_significant(k), k)];
        let fix = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { c(1.0, 0.0) };
        for i in 0..n {
            vectors[i * n + col] = eig.eigenvectors[(i, k)] * fix;
        }
    }
    Ok(EnergySpectrum {
        eigenvalues: values,
        eigenvectors: ComplexMatrix::from_row_major(n, vectors)?,
    })
}

/// `exp(factor · H)` for Hermitian H.
pub fn expm_hermitian(h: &ComplexMatrix, factor: Complex64) -> Result<ComplexMatrix> {
    let spec = eigen_spectrum(h)?;
    Ok(spec.reconstruct_with(|l| (factor * l).exp()))
}

/// ψ(t) = V·diag(e^{−iE_k t/ħ})·V†·ψ₀.
pub fn evolve_matrix_exp(h: &ComplexMatrix, psi0: &StateVector, t: f64, hbar: f64) -> Result<StateVector> {
    if psi0.len() != h.dim() {
        return Err(SpinError::DimensionMismatch {
            expected: h.dim(),
            found: psi0.len(),
        });
    }
    let deviation = psi0.norm() * psi0.norm() - 1.0;
    if deviation.abs() > NORM_TOL {
        return Err(SpinError::NormViolation { deviation });
    }
    let u = expm_hermitian(h, -I * (t / hbar))?;
    u.apply(psi0)
}

/// `(⊗E)·(⊗R)·(⊗ψ₀)` for one (E, R) pair and one initial state per spin.
pub fn tensor_rf_evolution(
    pairs: &[(ComplexMatrix, ComplexMatrix)],
    psi0s: &[SpinState],
) -> Result<StateVector> {
    if pairs.len() != psi0s.len() || pairs.is_empty() {
        return Err(SpinError::DimensionMismatch {
            expected: pairs.len(),
            found: psi0s.len(),
        });
    }
    check_capacity(pairs.len())?;
    for (e, r) in pairs {
        for m in [e, r] {
            if m.dim() != 2 {
                return Err(SpinError::DimensionMismatch { expected: 2, found: m.dim() });
            }
        }
    }
    let mut e_total = pairs[0].0.clone();
    let mut r_total = pairs[0].1.clone();
    let mut psi = psi0s[0].to_vector();
    for ((e, r), s) in pairs.iter().zip(psi0s).skip(1) {
        e_total = e_total.kron(e)?;
        r_total = r_total.kron(r)?;
        psi = psi.kron(&s.to_vector())?;
    }
    e_total.apply(&r_total.apply(&psi)?)
}
