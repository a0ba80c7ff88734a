//! Separable measurements: product positive operators over `P` parties,
//! optional product Kraus operators behind them, validation and the
//! completeness certificate `sum_j w_j K_j = I`.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hermitian::{is_psd, proportional, tensor, CMatrix, HermitianOperator};
use crate::lp::{LinearProgram, SimplexOptions};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Party {
    pub name: String,
    pub dim: usize,
}

impl Party {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Self {
            name: name.into(),
            dim,
        }
    }
}

/// One local positive part per party.
#[derive(Debug, Clone)]
pub struct ProductOperator {
    pub parts: Vec<HermitianOperator>,
}

impl ProductOperator {
    pub fn new(parts: Vec<HermitianOperator>) -> Self {
        Self { parts }
    }

    pub fn full(&self) -> Result<HermitianOperator> {
        tensor(&self.parts)
    }

    /// `Some(lambda)` with `self = lambda * other` if every local part is
    /// proportional; lambda is the product of the per-party factors.
    pub fn proportional_to(&self, other: &ProductOperator, tol: f64) -> Result<Option<f64>> {
        if self.parts.len() != other.parts.len() {
            return Ok(None);
        }
        let mut lambda = 1.0;
        for (a, b) in self.parts.iter().zip(&other.parts) {
            if a.dim() != b.dim() {
                return Ok(None);
            }
            match proportional(a, b, tol)? {
                Some(l) => lambda *= l,
                None => return Ok(None),
            }
        }
        Ok(Some(lambda))
    }
}

/// Product Kraus operator: one complex matrix per party, each with as many
/// columns as that party's dimension.
#[derive(Debug, Clone)]
pub struct KrausProduct {
    pub parts: Vec<CMatrix>,
}

/// Kraus products together with the index of the positive operator each one
/// collapses to.
#[derive(Debug, Clone)]
pub struct KrausData {
    pub products: Vec<KrausProduct>,
    pub labels: Vec<String>,
    pub op_of: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SeparableMeasurement {
    parties: Vec<Party>,
    ops: Vec<ProductOperator>,
    labels: Vec<String>,
    kraus: Option<KrausData>,
}

/// A violated measurement invariant. Indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    NoOperators,
    TooFewParties(usize),
    PartCount {
        op: usize,
        expected: usize,
        found: usize,
    },
    DimMismatch {
        op: usize,
        party: usize,
        expected: usize,
        found: usize,
    },
    NotPsd {
        op: usize,
        party: usize,
    },
    ZeroPart {
        op: usize,
        party: usize,
    },
    DuplicateProduct {
        first: usize,
        second: usize,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NoOperators => write!(f, "measurement has no operators"),
            Diagnostic::TooFewParties(p) => write!(f, "need at least 2 parties, found {p}"),
            Diagnostic::PartCount {
                op,
                expected,
                found,
            } => write!(
                f,
                "operator {} has {found} local parts, expected {expected}",
                op + 1
            ),
            Diagnostic::DimMismatch {
                op,
                party,
                expected,
                found,
            } => write!(
                f,
                "operator {} part {} has dimension {found}, expected {expected}",
                op + 1,
                party + 1
            ),
            Diagnostic::NotPsd { op, party } => {
                write!(f, "operator {} part {} is not positive semidefinite", op + 1, party + 1)
            }
            Diagnostic::ZeroPart { op, party } => {
                write!(f, "operator {} part {} is zero", op + 1, party + 1)
            }
            Diagnostic::DuplicateProduct { first, second } => write!(
                f,
                "operators {} and {} are proportional products",
                first + 1,
                second + 1
            ),
        }
    }
}

/// Strictly positive weights realizing completeness.
#[derive(Debug, Clone)]
pub struct CompletenessCertificate {
    pub weights: Vec<f64>,
    /// Frobenius norm of `sum_j w_j K_j - I`.
    pub residual: f64,
    /// Whether the products are linearly independent, making the weights unique.
    pub unique: bool,
}

impl SeparableMeasurement {
    /// Builds a measurement and rejects it if [`validate`] reports anything.
    pub fn new(parties: Vec<Party>, ops: Vec<ProductOperator>, labels: Vec<String>) -> Result<Self> {
        let m = Self::unvalidated(parties, ops, labels);
        let diags = m.validate(&Tolerances::default());
        if diags.is_empty() {
            Ok(m)
        } else {
            Err(Error::InvalidMeasurement(
                diags
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; "),
            ))
        }
    }

    /// Builds a measurement without checking it; labels default to `K1..KN`.
    pub fn unvalidated(parties: Vec<Party>, ops: Vec<ProductOperator>, mut labels: Vec<String>) -> Self {
        if labels.len() != ops.len() {
            labels = (1..=ops.len()).map(|j| format!("K{j}")).collect();
        }
        Self {
            parties,
            ops,
            labels,
            kraus: None,
        }
    }

    /// Collapses product Kraus operators to their distinct positive products
    /// `K^dag K`, keeping the back-map from each Kraus product to its operator.
    pub fn from_kraus(
        parties: Vec<Party>,
        kraus: Vec<KrausProduct>,
        kraus_labels: Vec<String>,
        tol: &Tolerances,
    ) -> Result<Self> {
        let p = parties.len();
        let mut ops: Vec<ProductOperator> = Vec::new();
        let mut labels = Vec::new();
        let mut op_of = Vec::with_capacity(kraus.len());
        let kraus_labels = if kraus_labels.len() == kraus.len() {
            kraus_labels
        } else {
            (1..=kraus.len()).map(|j| format!("K{j}")).collect()
        };
        for (i, k) in kraus.iter().enumerate() {
            if k.parts.len() != p {
                return Err(Error::DimMismatch {
                    expected: p,
                    found: k.parts.len(),
                });
            }
            let mut parts = Vec::with_capacity(p);
            for (part, party) in k.parts.iter().zip(&parties) {
                if part.ncols() != party.dim {
                    return Err(Error::DimMismatch {
                        expected: party.dim,
                        found: part.ncols(),
                    });
                }
                if part.norm() <= tol.herm {
                    return Err(Error::ZeroOperator);
                }
                parts.push(HermitianOperator::gram(part).with_psd_check(tol.psd));
            }
            let candidate = ProductOperator::new(parts);
            let mut found = None;
            for (j, existing) in ops.iter().enumerate() {
                if candidate.proportional_to(existing, tol.herm)?.is_some() {
                    found = Some(j);
                    break;
                }
            }
            match found {
                Some(j) => op_of.push(j),
                None => {
                    op_of.push(ops.len());
                    ops.push(candidate);
                    labels.push(kraus_labels[i].clone());
                }
            }
        }
        let mut m = Self::new(parties, ops, labels)?;
        m.kraus = Some(KrausData {
            products: kraus,
            labels: kraus_labels,
            op_of,
        });
        Ok(m)
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    pub fn num_parties(&self) -> usize {
        self.parties.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.parties.iter().map(|p| p.dim).collect()
    }

    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    pub fn ops(&self) -> &[ProductOperator] {
        &self.ops
    }

    pub fn op(&self, j: usize) -> &ProductOperator {
        &self.ops[j]
    }

    /// Local part of operator `j` for party `alpha`.
    pub fn part(&self, j: usize, alpha: usize) -> &HermitianOperator {
        &self.ops[j].parts[alpha]
    }

    /// All local parts of one party, in operator order.
    pub fn party_parts(&self, alpha: usize) -> Vec<HermitianOperator> {
        self.ops.iter().map(|o| o.parts[alpha].clone()).collect()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn kraus(&self) -> Option<&KrausData> {
        self.kraus.as_ref()
    }

    pub fn with_kraus(mut self, kraus: KrausData) -> Self {
        self.kraus = Some(kraus);
        self
    }

    pub fn validate(&self, tol: &Tolerances) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        let p = self.parties.len();
        if p < 2 {
            diags.push(Diagnostic::TooFewParties(p));
        }
        if self.ops.is_empty() {
            diags.push(Diagnostic::NoOperators);
        }
        let mut well_formed = vec![true; self.ops.len()];
        for (j, op) in self.ops.iter().enumerate() {
            if op.parts.len() != p {
                diags.push(Diagnostic::PartCount {
                    op: j,
                    expected: p,
                    found: op.parts.len(),
                });
                well_formed[j] = false;
                continue;
            }
            for (alpha, (part, party)) in op.parts.iter().zip(&self.parties).enumerate() {
                if part.dim() != party.dim {
                    diags.push(Diagnostic::DimMismatch {
                        op: j,
                        party: alpha,
                        expected: party.dim,
                        found: part.dim(),
                    });
                    well_formed[j] = false;
                    continue;
                }
                if part.is_zero(tol.herm) {
                    diags.push(Diagnostic::ZeroPart { op: j, party: alpha });
                    well_formed[j] = false;
                } else if !is_psd(part, tol.psd) {
                    diags.push(Diagnostic::NotPsd { op: j, party: alpha });
                }
            }
        }
        for a in 0..self.ops.len() {
            for b in (a + 1)..self.ops.len() {
                if !(well_formed[a] && well_formed[b]) {
                    continue;
                }
                if let Ok(Some(_)) = self.ops[a].proportional_to(&self.ops[b], tol.herm) {
                    diags.push(Diagnostic::DuplicateProduct {
                        first: a,
                        second: b,
                    });
                }
            }
        }
        diags
    }

    /// Finds weights `w_j >= delta` with `sum_j w_j K_j = I` by LP.
    pub fn completeness_certificate(&self, delta: f64, tol: &Tolerances) -> Result<CompletenessCertificate> {
        let fulls: Vec<HermitianOperator> = self
            .ops
            .iter()
            .map(ProductOperator::full)
            .collect::<Result<_>>()?;
        let total_dim = fulls
            .first()
            .ok_or_else(|| Error::Infeasible("no operators".into()))?
            .dim();
        let cols: Vec<Vec<f64>> = fulls.iter().map(|f| f.vectorize().coords).collect();
        let target = HermitianOperator::identity(total_dim).vectorize().coords;
        let mut lp = LinearProgram::new(cols.len());
        for r in 0..target.len() {
            lp.add_row(cols.iter().map(|c| c[r]).collect(), target[r])?;
        }
        lp.set_all_lower(delta);
        let sol = lp
            .solve(&SimplexOptions::default())?
            .solution()
            .ok_or_else(|| {
                Error::Infeasible("no strictly positive completeness weights exist".into())
            })?;
        let mut acc = HermitianOperator::zeros(total_dim);
        for (w, f) in sol.x.iter().zip(&fulls) {
            acc.axpy(*w, f)?;
        }
        let residual = acc.distance(&HermitianOperator::identity(total_dim));
        if residual > tol.lp {
            return Err(Error::Infeasible(format!(
                "completeness residual {residual:.3e} exceeds tolerance"
            )));
        }
        let unique = span_rank(&fulls, tol.herm) == fulls.len();
        Ok(CompletenessCertificate {
            weights: sol.x,
            residual,
            unique,
        })
    }

    /// Rank of the span of one party's local parts, optionally together with
    /// that party's identity. Fixture builders use it to confirm that the only
    /// linear relations among the parts are the intended ones.
    pub fn party_span_rank(&self, alpha: usize, with_identity: bool, tol: f64) -> usize {
        let mut ops = self.party_parts(alpha);
        if with_identity {
            ops.push(HermitianOperator::identity(self.parties[alpha].dim));
        }
        span_rank(&ops, tol)
    }
}

/// Dimension of the real span of the given operators.
pub fn span_rank(ops: &[HermitianOperator], tol: f64) -> usize {
    if ops.is_empty() {
        return 0;
    }
    let cols: Vec<Vec<f64>> = ops.iter().map(|o| o.vectorize().coords).collect();
    let rows = cols[0].len();
    let m = DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i]);
    let sv = m.singular_values();
    let largest = sv.iter().fold(0.0_f64, |a, v| a.max(*v)).max(1.0);
    sv.iter().filter(|&&s| s > tol.max(1e-12) * largest * 1e2).count()
}
