//! Complex Hermitian operators: construction, positivity, proportionality,
//! Kronecker products and the real-coordinate vectorization used to turn
//! operator equalities into LP rows.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Outcome of the most recent positivity check carried by an operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsdState {
    Yes,
    No,
    Unknown,
}

/// A `dim x dim` complex Hermitian matrix. Construction symmetrizes the input,
/// so `entries` is exactly Hermitian afterwards.
#[derive(Clone, PartialEq)]
pub struct HermitianOperator {
    entries: CMatrix,
    psd: PsdState,
}

impl fmt::Debug for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HermitianOperator(dim={}, psd={:?}) [", self.dim(), self.psd)?;
        for i in 0..self.dim() {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.dim() {
                let z = self.entries[(i, j)];
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{:.4}{:+.4}i", z.re, z.im)?;
            }
        }
        write!(f, "]")
    }
}

/// Real coordinates of a Hermitian operator in the fixed isometric basis:
/// diagonal entries in row order, then the real parts of the strict upper
/// triangle (row-major), then the imaginary parts of the strict upper
/// triangle, off-diagonal coordinates scaled by `sqrt(2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealVectorization {
    pub dim: usize,
    pub coords: Vec<f64>,
}

impl HermitianOperator {
    /// Builds an operator from an arbitrary square complex matrix, rejecting it
    /// if it is further than `tol * max(1, ||M||)` from Hermitian.
    pub fn new(matrix: CMatrix, tol: f64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidOperator(format!(
                "matrix is {}x{}, not square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.nrows() == 0 {
            return Err(Error::InvalidOperator("empty matrix".into()));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidOperator("non-finite entry".into()));
        }
        let adjoint = matrix.adjoint();
        let skew = (&matrix - &adjoint).norm();
        if skew > tol * matrix.norm().max(1.0) {
            return Err(Error::InvalidOperator(format!(
                "not Hermitian (||M - M^dag|| = {skew:.3e})"
            )));
        }
        let entries = (matrix + adjoint).scale(0.5);
        Ok(Self {
            entries,
            psd: PsdState::Unknown,
        })
    }

    /// Symmetrizes without a Hermiticity check; for internally produced sums
    /// and products of Hermitian operators.
    pub(crate) fn from_hermitian_unchecked(matrix: CMatrix) -> Self {
        let adjoint = matrix.adjoint();
        Self {
            entries: (matrix + adjoint).scale(0.5),
            psd: PsdState::Unknown,
        }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let d = rows.len();
        let mut m = CMatrix::zeros(d, d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidOperator("ragged rows".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = Complex64::new(v, 0.0);
            }
        }
        Self::new(m, 1e-10)
    }

    pub fn diag(values: &[f64]) -> Self {
        let d = values.len();
        let mut m = CMatrix::zeros(d, d);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        Self::from_hermitian_unchecked(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: CMatrix::identity(dim, dim),
            psd: PsdState::Yes,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: CMatrix::zeros(dim, dim),
            psd: PsdState::Yes,
        }
    }

    /// `|v><v|` for an (unnormalized) vector `v`.
    pub fn outer(v: &[Complex64]) -> Self {
        let d = v.len();
        let mut m = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        Self {
            entries: m,
            psd: PsdState::Yes,
        }
    }

    /// Normalized projector onto the real vector `v`.
    pub fn projector_real(v: &[f64]) -> Self {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cv: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x / n, 0.0)).collect();
        Self::outer(&cv)
    }

    /// `K^dag K` for an arbitrary (possibly non-square) complex matrix.
    pub fn gram(k: &CMatrix) -> Self {
        Self::from_hermitian_unchecked(k.adjoint() * k)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn psd_state(&self) -> PsdState {
        self.psd
    }

    /// Runs the positivity check and records the outcome on the value.
    pub fn with_psd_check(mut self, tol: f64) -> Self {
        self.psd = if is_psd(&self, tol) {
            PsdState::Yes
        } else {
            PsdState::No
        };
        self
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.entries.norm()
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.norm() <= tol
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> Self {
        let psd = match (self.psd, s >= 0.0) {
            (PsdState::Yes, true) => PsdState::Yes,
            _ => PsdState::Unknown,
        };
        Self {
            entries: self.entries.scale(s),
            psd,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_dim(self, other)?;
        let psd = if self.psd == PsdState::Yes && other.psd == PsdState::Yes {
            PsdState::Yes
        } else {
            PsdState::Unknown
        };
        Ok(Self {
            entries: &self.entries + &other.entries,
            psd,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same_dim(self, other)?;
        Ok(Self {
            entries: &self.entries - &other.entries,
            psd: PsdState::Unknown,
        })
    }

    /// Adds `s * other` in place.
    pub fn axpy(&mut self, s: f64, other: &Self) -> Result<()> {
        check_same_dim(self, other)?;
        self.entries += other.entries.scale(s);
        if !(self.psd == PsdState::Yes && other.psd == PsdState::Yes && s >= 0.0) {
            self.psd = PsdState::Unknown;
        }
        Ok(())
    }

    /// Frobenius distance.
    pub fn distance(&self, other: &Self) -> f64 {
        (&self.entries - &other.entries).norm()
    }

    /// Positive square root; negative eigenvalues (numerical noise) are clamped.
    pub fn sqrt_psd(&self) -> Self {
        let eig = self.entries.clone().symmetric_eigen();
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for k in 0..d {
            let lambda = eig.eigenvalues[k].max(0.0).sqrt();
            if lambda == 0.0 {
                continue;
            }
            let v = eig.eigenvectors.column(k);
            out += (v * v.adjoint()).scale(lambda);
        }
        Self {
            entries: (out.clone() + out.adjoint()).scale(0.5),
            psd: PsdState::Yes,
        }
    }

    /// Number of eigenvalues above `tol * max(1, spectral radius)`.
    pub fn rank(&self, tol: f64) -> usize {
        let ev = self.eigenvalues();
        let radius = ev.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
        ev.iter().filter(|v| v.abs() > tol * radius).count()
    }

    pub fn vectorize(&self) -> RealVectorization {
        let d = self.dim();
        let mut coords = Vec::with_capacity(d * d);
        for i in 0..d {
            coords.push(self.entries[(i, i)].re);
        }
        for i in 0..d {
            for j in (i + 1)..d {
                coords.push(self.entries[(i, j)].re * std::f64::consts::SQRT_2);
            }
        }
        for i in 0..d {
            for j in (i + 1)..d {
                coords.push(self.entries[(i, j)].im * std::f64::consts::SQRT_2);
            }
        }
        RealVectorization { dim: d, coords }
    }
}

impl RealVectorization {
    pub fn devectorize(&self) -> Result<HermitianOperator> {
        let d = self.dim;
        if self.coords.len() != d * d {
            return Err(Error::DimMismatch {
                expected: d * d,
                found: self.coords.len(),
            });
        }
        let mut m = CMatrix::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = Complex64::new(self.coords[i], 0.0);
        }
        let pairs = d * (d - 1) / 2;
        let mut idx = 0;
        for i in 0..d {
            for j in (i + 1)..d {
                let re = self.coords[d + idx] / std::f64::consts::SQRT_2;
                let im = self.coords[d + pairs + idx] / std::f64::consts::SQRT_2;
                m[(i, j)] = Complex64::new(re, im);
                m[(j, i)] = Complex64::new(re, -im);
                idx += 1;
            }
        }
        Ok(HermitianOperator::from_hermitian_unchecked(m))
    }
}

fn check_same_dim(a: &HermitianOperator, b: &HermitianOperator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// True iff the smallest eigenvalue is at least `-tol * max(1, spectral radius)`.
pub fn is_psd(m: &HermitianOperator, tol: f64) -> bool {
    let ev = m.eigenvalues();
    let radius = ev.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    ev.first().is_none_or(|&min| min >= -tol * radius.max(1.0))
}

/// Positivity test on a raw matrix, rejecting non-square or non-Hermitian input.
pub fn is_psd_matrix(m: &CMatrix, herm_tol: f64, tol: f64) -> Result<bool> {
    let op = HermitianOperator::new(m.clone(), herm_tol)?;
    Ok(is_psd(&op, tol))
}

/// Returns `lambda > 0` with `m = lambda * n` up to `tol`, estimating lambda
/// from the trace ratio and then verifying all entries.
pub fn proportional(m: &HermitianOperator, n: &HermitianOperator, tol: f64) -> Result<Option<f64>> {
    check_same_dim(m, n)?;
    let (norm_m, norm_n) = (m.norm(), n.norm());
    if norm_m == 0.0 || norm_n == 0.0 {
        return Err(Error::ZeroOperator);
    }
    let (tr_m, tr_n) = (m.trace(), n.trace());
    if tr_n.abs() <= tol * norm_n || tr_m.abs() <= tol * norm_m {
        return Ok(None);
    }
    let lambda = tr_m / tr_n;
    if lambda <= 0.0 {
        return Ok(None);
    }
    let diff = (m.matrix() - n.matrix().scale(lambda)).norm();
    if diff <= tol * norm_m.max(lambda * norm_n) {
        Ok(Some(lambda))
    } else {
        Ok(None)
    }
}

/// Kronecker product in the given order (first factor is most significant).
pub fn tensor(parts: &[HermitianOperator]) -> Result<HermitianOperator> {
    let (first, rest) = parts
        .split_first()
        .ok_or_else(|| Error::InvalidInput("tensor of an empty list".into()))?;
    let mut acc = first.entries.clone();
    let mut all_psd = first.psd == PsdState::Yes;
    for p in rest {
        acc = acc.kronecker(&p.entries);
        all_psd &= p.psd == PsdState::Yes;
    }
    Ok(HermitianOperator {
        entries: acc,
        psd: if all_psd {
            PsdState::Yes
        } else {
            PsdState::Unknown
        },
    })
}

/// Kronecker product of arbitrary complex matrices.
pub fn kron_all(parts: &[CMatrix]) -> CMatrix {
    let mut iter = parts.iter();
    let first = iter.next().cloned().unwrap_or_else(|| CMatrix::identity(1, 1));
    iter.fold(first, |acc, p| acc.kronecker(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plus() -> HermitianOperator {
        HermitianOperator::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap()
    }

    #[test]
    fn psd_examples() {
        assert!(is_psd(&HermitianOperator::identity(2), 1e-9));
        assert!(!is_psd(&HermitianOperator::diag(&[1.0, -1.0]), 1e-9));
        assert!(is_psd(&plus(), 1e-9));
    }

    #[test]
    fn non_square_and_non_hermitian_rejected() {
        let rect = CMatrix::zeros(2, 3);
        assert!(matches!(
            is_psd_matrix(&rect, 1e-10, 1e-9),
            Err(Error::InvalidOperator(_))
        ));
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(
            HermitianOperator::new(m, 1e-10),
            Err(Error::InvalidOperator(_))
        ));
    }

    #[test]
    fn proportional_examples() {
        let i2 = HermitianOperator::identity(2);
        assert_eq!(proportional(&i2.scale(2.0), &i2, 1e-10).unwrap(), Some(2.0));
        let p0 = HermitianOperator::diag(&[1.0, 0.0]);
        let p1 = HermitianOperator::diag(&[0.0, 1.0]);
        assert_eq!(proportional(&p0, &p1, 1e-10).unwrap(), None);
        assert_eq!(
            proportional(&HermitianOperator::zeros(2), &p1, 1e-10),
            Err(Error::ZeroOperator)
        );
    }

    #[test]
    fn tensor_examples() {
        let i2 = HermitianOperator::identity(2);
        let t = tensor(&[i2.clone(), i2]).unwrap();
        assert!(t.distance(&HermitianOperator::identity(4)) < 1e-15);

        let p0 = HermitianOperator::diag(&[1.0, 0.0]);
        let p1 = HermitianOperator::diag(&[0.0, 1.0]);
        let t = tensor(&[p0, p1]).unwrap();
        assert!(t.distance(&HermitianOperator::diag(&[0.0, 1.0, 0.0, 0.0])) < 1e-15);

        let t = tensor(&[
            HermitianOperator::diag(&[1.0, 0.0]),
            HermitianOperator::diag(&[2.0, 3.0]),
        ])
        .unwrap();
        assert!(t.distance(&HermitianOperator::diag(&[2.0, 3.0, 0.0, 0.0])) < 1e-15);

        assert!(matches!(tensor(&[]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn vectorize_examples() {
        assert_eq!(
            HermitianOperator::identity(2).vectorize().coords,
            vec![1.0, 1.0, 0.0, 0.0]
        );
        let v = plus().vectorize().coords;
        let expected = [0.5, 0.5, 0.5 * std::f64::consts::SQRT_2, 0.0];
        for (a, b) in v.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(HermitianOperator::zeros(3)
            .vectorize()
            .coords
            .iter()
            .all(|&c| c == 0.0));
    }

    #[test]
    fn vectorization_is_an_isometry() {
        let mut m = CMatrix::zeros(3, 3);
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        m[(0, 2)] = Complex64::new(0.3, -0.7);
        m[(2, 0)] = Complex64::new(0.3, 0.7);
        m[(1, 2)] = Complex64::new(-0.2, 0.1);
        m[(2, 1)] = Complex64::new(-0.2, -0.1);
        let h = HermitianOperator::new(m, 1e-12).unwrap();
        let v = h.vectorize();
        let norm: f64 = v.coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!((norm - h.norm()).abs() < 1e-14);
        assert!(v.devectorize().unwrap().distance(&h) < 1e-14);
    }

    #[test]
    fn sqrt_squares_back() {
        let m = HermitianOperator::from_real_rows(&[&[2.0, 0.5], &[0.5, 1.0]]).unwrap();
        let r = m.sqrt_psd();
        let back = HermitianOperator::from_hermitian_unchecked(r.matrix() * r.matrix());
        assert!(back.distance(&m) < 1e-12);
    }
}
