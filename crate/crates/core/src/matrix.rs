//! Dense complex matrices and state vectors.
//!
//! Dimensions are powers of two from 2 up to [`MAX_DIM`]: every matrix in the
//! engine acts on the Hilbert space of one or more spin-½ particles. Storage is
//! row-major. Products are never reordered; `a.mul(&b)` is `a·b`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpinError};
use crate::tolerance::{MAX_DIM, MAX_SPINS};

pub type Complex = Complex64;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Spatial or spin axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim > MAX_DIM {
        return Err(SpinError::CapacityExceeded {
            spins: dim.trailing_zeros() as usize,
            max: MAX_SPINS,
        });
    }
    if dim < 2 || !dim.is_power_of_two() {
        return Err(SpinError::InvalidDimension(dim));
    }
    Ok(())
}

fn check_finite(values: &[Complex64], context: &'static str) -> Result<()> {
    if values.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(SpinError::NonFinite { context })
    }
}

/// Square complex matrix of power-of-two dimension.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for r in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|col| {
                    let z = self[(r, col)];
                    format!("{:+.6e}{:+.6e}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, col): (usize, usize)) -> &Complex64 {
        &self.data[r * self.dim + col]
    }
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            data: vec![ZERO; dim * dim],
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for k in 0..dim {
            m.data[k * dim + k] = ONE;
        }
        Ok(m)
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        check_dim(dim)?;
        if data.len() != dim * dim {
            return Err(SpinError::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        check_finite(&data, "matrix entries")?;
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(SpinError::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(dim, data)
    }

    /// 2×2 matrix `[[a, b], [c, d]]`.
    pub fn new2(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Self {
            dim: 2,
            data: vec![a, b, c, d],
        }
    }

    pub fn diagonal(entries: &[Complex64]) -> Result<Self> {
        let mut m = Self::zeros(entries.len())?;
        check_finite(entries, "diagonal entries")?;
        for (k, &z) in entries.iter().enumerate() {
            m.data[k * m.dim + k] = z;
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self[(row, col)]
    }

    pub fn column(&self, col: usize) -> StateVector {
        StateVector {
            amps: (0..self.dim).map(|r| self[(r, col)]).collect(),
        }
    }

    /// Matrix product `self · rhs`.
    pub fn mul(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.dim != rhs.dim {
            return Err(SpinError::DimensionMismatch {
                expected: self.dim,
                found: rhs.dim,
            });
        }
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.data[k * n..(k + 1) * n];
                for (o, &b) in out[i * n..(i + 1) * n].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Ok(ComplexMatrix { dim: n, data: out })
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.len() != self.dim {
            return Err(SpinError::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        let n = self.dim;
        let amps = (0..n)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(&v.amps)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        Ok(StateVector { amps })
    }

    pub fn apply_spin(&self, s: &SpinState) -> Result<SpinState> {
        let out = self.apply(&s.to_vector())?;
        Ok(SpinState {
            x2: out.amps[0],
            x1: out.amps[1],
        })
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        let n = self.dim;
        let mut data = vec![ZERO; n * n];
        for r in 0..n {
            for col in 0..n {
                data[col * n + r] = self.data[r * n + col].conj();
            }
        }
        ComplexMatrix { dim: n, data }
    }

    pub fn scale(&self, factor: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn add(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(
        &self,
        rhs: &ComplexMatrix,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<ComplexMatrix> {
        if self.dim != rhs.dim {
            return Err(SpinError::DimensionMismatch {
                expected: self.dim,
                found: rhs.dim,
            });
        }
        Ok(ComplexMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry-wise modulus of `self - rhs`; infinite on dimension mismatch.
    pub fn max_abs_diff(&self, rhs: &ComplexMatrix) -> f64 {
        if self.dim != rhs.dim {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Maximum row sum of moduli; bounds every eigenvalue modulus.
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.data[r * self.dim..(r + 1) * self.dim].iter().map(|z| z.norm()).sum())
            .fold(0.0, f64::max)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for col in r..n {
                let d = (self.data[r * n + col] - self.data[col * n + r].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Max entry of `|U·U† - I|`.
    pub fn unitary_deviation(&self) -> f64 {
        let prod = self
            .mul(&self.adjoint())
            .expect("adjoint has the same dimension");
        prod.max_abs_diff(&ComplexMatrix::identity(self.dim).expect("valid dimension"))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitary_deviation() <= tol
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|k| self.data[k * self.dim + k]).sum()
    }

    /// Determinant of a 2×2 matrix.
    pub fn det2(&self) -> Result<Complex64> {
        if self.dim != 2 {
            return Err(SpinError::DimensionMismatch {
                expected: 2,
                found: self.dim,
            });
        }
        Ok(self.data[0] * self.data[3] - self.data[1] * self.data[2])
    }

    /// Kronecker product `self ⊗ rhs`; `self` indexes the outer (slow) axis.
    pub fn kron(&self, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
        let (m, n) = (self.dim, rhs.dim);
        let dim = m * n;
        check_dim(dim)?;
        let mut data = vec![ZERO; dim * dim];
        for i in 0..m {
            for j in 0..m {
                let a = self.data[i * m + j];
                if a == ZERO {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        data[(i * n + k) * dim + j * n + l] = a * rhs.data[k * n + l];
                    }
                }
            }
        }
        Ok(ComplexMatrix { dim, data })
    }
}

/// Pauli matrix for one axis.
pub fn pauli(axis: Axis) -> ComplexMatrix {
    match axis {
        Axis::X => ComplexMatrix::new2(ZERO, ONE, ONE, ZERO),
        Axis::Y => ComplexMatrix::new2(ZERO, -I, I, ZERO),
        Axis::Z => ComplexMatrix::new2(ONE, ZERO, ZERO, -ONE),
    }
}

/// Standard matrix-vector product.
pub fn mat_apply(m: &ComplexMatrix, v: &StateVector) -> Result<StateVector> {
    m.apply(v)
}

pub fn mat_mul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.mul(b)
}

/// Objects that support a Kronecker product.
pub trait Kronecker: Sized {
    fn kron(&self, rhs: &Self) -> Result<Self>;
}

impl Kronecker for ComplexMatrix {
    fn kron(&self, rhs: &Self) -> Result<Self> {
        ComplexMatrix::kron(self, rhs)
    }
}

impl Kronecker for StateVector {
    fn kron(&self, rhs: &Self) -> Result<Self> {
        StateVector::kron(self, rhs)
    }
}

/// Kronecker product of two matrices or two state vectors; the first factor
/// indexes the outer axis.
pub fn tensor_product<T: Kronecker>(a: &T, b: &T) -> Result<T> {
    a.kron(b)
}

/// Amplitude vector of a (possibly multi-spin) pure state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        check_dim(amps.len())?;
        check_finite(&amps, "state amplitudes")?;
        Ok(Self { amps })
    }

    /// Computational basis state `index` of dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        check_dim(dim)?;
        if index >= dim {
            return Err(SpinError::InvalidArgument(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { amps })
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, rhs: &StateVector) -> Complex64 {
        self.amps.iter().zip(&rhs.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn max_abs_diff(&self, rhs: &StateVector) -> f64 {
        if self.len() != rhs.len() {
            return f64::INFINITY;
        }
        self.amps
            .iter()
            .zip(&rhs.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn kron(&self, rhs: &StateVector) -> Result<StateVector> {
        let dim = self.len() * rhs.len();
        check_dim(dim)?;
        let mut amps = Vec::with_capacity(dim);
        for a in &self.amps {
            for b in &rhs.amps {
                amps.push(a * b);
            }
        }
        Ok(StateVector { amps })
    }

    pub(crate) fn from_raw(amps: Vec<Complex64>) -> Self {
        Self { amps }
    }
}

impl From<SpinState> for StateVector {
    fn from(s: SpinState) -> Self {
        s.to_vector()
    }
}

use crate::state::SpinState;

#[cfg(test)]
mod tests {
    use super::*;

    fn random_unitary(seed: u64) -> ComplexMatrix {
        // exp(-i θ n·σ) times a global phase, built from explicit angles.
        let a = (seed as f64 * 0.731).sin();
        let b = (seed as f64 * 1.917).cos();
        let theta = 0.3 + seed as f64 * 0.21;
        let (nx, ny, nz) = {
            let v = [a, b, 0.4];
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            (v[0] / r, v[1] / r, v[2] / r)
        };
        let (s, co) = theta.sin_cos();
        let phase = Complex64::from_polar(1.0, 0.37 * seed as f64);
        ComplexMatrix::new2(
            c(co, -s * nz),
            c(-s * ny, -s * nx),
            c(s * ny, -s * nx),
            c(co, s * nz),
        )
        .scale(phase)
    }

    #[test]
    fn identity_apply_is_noop() {
        let v = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let out = ComplexMatrix::identity(2).unwrap().apply(&v).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn sigma_x_flips_upper_state() {
        let up = StateVector::basis(2, 0).unwrap();
        let out = pauli(Axis::X).apply(&up).unwrap();
        assert_eq!(out.amplitudes(), &[ZERO, ONE]);
    }

    #[test]
    fn unitary_preserves_norm() {
        for seed in 0..20 {
            let u = random_unitary(seed);
            assert!(u.is_unitary(1e-12));
            let t = seed as f64 * 0.4;
            let v = StateVector::new(vec![
                Complex64::from_polar(t.cos(), 0.3 * t),
                Complex64::from_polar(t.sin(), -1.1 * t),
            ])
            .unwrap();
            let out = u.apply(&v).unwrap();
            assert!((out.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = ComplexMatrix::identity(4).unwrap();
        let v = StateVector::basis(2, 0).unwrap();
        assert!(matches!(
            m.apply(&v),
            Err(SpinError::DimensionMismatch { expected: 4, found: 2 })
        ));
        assert!(m.mul(&ComplexMatrix::identity(2).unwrap()).is_err());
    }

    #[test]
    fn product_is_associative_and_identity_neutral() {
        let (a, b, cm) = (random_unitary(1), random_unitary(2), random_unitary(3));
        let left = a.mul(&b).unwrap().mul(&cm).unwrap();
        let right = a.mul(&b.mul(&cm).unwrap()).unwrap();
        assert!(left.max_abs_diff(&right) < 1e-12);
        let id = ComplexMatrix::identity(2).unwrap();
        assert_eq!(a.mul(&id).unwrap(), a);
    }

    #[test]
    fn kron_of_basis_vectors_and_identities() {
        let up = StateVector::basis(2, 0).unwrap();
        let prod = tensor_product(&up, &up).unwrap();
        assert_eq!(prod.amplitudes(), &[ONE, ZERO, ZERO, ZERO]);
        let i2 = ComplexMatrix::identity(2).unwrap();
        assert_eq!(tensor_product(&i2, &i2).unwrap(), ComplexMatrix::identity(4).unwrap());
    }

    #[test]
    fn invalid_dimensions_are_rejected() {
        assert!(matches!(ComplexMatrix::zeros(3), Err(SpinError::InvalidDimension(3))));
        assert!(matches!(ComplexMatrix::zeros(1), Err(SpinError::InvalidDimension(1))));
        assert!(matches!(
            ComplexMatrix::zeros(8192),
            Err(SpinError::CapacityExceeded { spins: 13, .. })
        ));
        assert!(StateVector::new(vec![c(f64::NAN, 0.0), ONE]).is_err());
    }
}
