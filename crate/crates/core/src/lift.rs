//! Lifting a protocol on positive operators to one on Kraus operators.
//!
//! A leaf realizing the positive product `K_i` applies the Kraus product
//! `Khat_i`, the per-party square roots of `K_i` scaled to the total weight
//! of the Kraus products mapped to `i`. Each such product is then
//! `K'_j = sqrt(p_j) U_j Khat_i` for a product unitary `U_j` applied after
//! the leaf. With more than one `j` per leaf, the measuring party first
//! flips a coin biased by `p_j` to choose which unitary to apply.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hermitian::{kron_all, CMatrix, HermitianOperator};
use crate::measurement::SeparableMeasurement;
use crate::tolerance::Tolerances;
use crate::tree::{LocalParts, NodeId, ProtocolTree};

#[derive(Debug, Clone, PartialEq)]
pub struct TailEntry {
    /// Index of the original Kraus product.
    pub kraus: usize,
    pub probability: f64,
    /// One unitary per party.
    pub unitaries: Vec<CMatrix>,
    /// The leaf of the lifted tree at which this entry applies.
    pub outcome: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryTail {
    pub leaf: NodeId,
    pub op: usize,
    /// Fraction of the weight of `op` carried by this leaf.
    pub share: f64,
    /// Per-party factors of `Khat_op`.
    pub kraus_op: Vec<CMatrix>,
    pub entries: Vec<TailEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedProtocol {
    pub tree: ProtocolTree,
    pub assignment: Vec<f64>,
    pub tails: Vec<UnitaryTail>,
    /// Extra communication rounds added for coin flips (0 or 1).
    pub coin_rounds: usize,
}

impl UnitaryTail {
    /// `(||K'_j - sqrt(p) U Khat||, ||K'_j||)` for each entry.
    pub fn reconstruction_errors(&self, m: &SeparableMeasurement) -> Result<Vec<(f64, f64)>> {
        let kraus = m.kraus().ok_or(Error::NoKrausData)?;
        let khat = kron_all(&self.kraus_op);
        self.entries
            .iter()
            .map(|e| {
                let target = kron_all(&kraus.products[e.kraus].parts);
                let u = kron_all(&e.unitaries);
                let rebuilt = (&u * &khat).map(|x| x * e.probability.sqrt());
                Ok(((&target - rebuilt).norm(), target.norm()))
            })
            .collect()
    }
}

pub fn is_unitary(u: &CMatrix, tol: f64) -> bool {
    u.is_square() && (u.adjoint() * u - CMatrix::identity(u.nrows(), u.ncols())).norm() <= tol
}

/// Unitary `U` with `k = U sqrt(k^dag k)`. On the kernel of `k` it maps the
/// Gram-Schmidt completion of the row space onto that of the column space,
/// both built from the standard basis in order.
pub fn polar_unitary(k: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    if !k.is_square() {
        return Err(Error::FactorizationFailure("Kraus factor is not square".into()));
    }
    let d = k.nrows();
    let svd = k.clone().svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::FactorizationFailure("singular value decomposition failed".into()));
    };
    let smax = svd.singular_values.max();
    let cut = tol.herm * (1.0 + smax);
    let mut range_out = Vec::new();
    let mut range_in = Vec::new();
    for (r, s) in svd.singular_values.iter().enumerate() {
        if *s > cut {
            range_out.push(u.column(r).into_owned());
            range_in.push(v_t.row(r).adjoint());
        }
    }
    let kernel_in = complete_basis(&range_in, d);
    let kernel_out = complete_basis(&range_out, d);
    if kernel_in.len() != kernel_out.len() {
        return Err(Error::FactorizationFailure("kernel completion mismatch".into()));
    }
    let mut w = CMatrix::zeros(d, d);
    for (o, i) in range_out.iter().zip(&range_in).chain(kernel_out.iter().zip(&kernel_in)) {
        w += o * i.adjoint();
    }
    if !is_unitary(&w, 1e-9) {
        return Err(Error::FactorizationFailure("completed factor is not unitary".into()));
    }
    Ok(w)
}

/// Orthonormal basis of the complement of `basis`, by Gram-Schmidt over the
/// standard basis vectors in order.
fn complete_basis(basis: &[DVector<Complex64>], d: usize) -> Vec<DVector<Complex64>> {
    let mut all: Vec<DVector<Complex64>> = basis.to_vec();
    let mut out = Vec::new();
    for i in 0..d {
        if all.len() == d {
            break;
        }
        let mut v = DVector::from_fn(d, |r, _| if r == i { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) });
        for b in &all {
            let c = b.dotc(&v);
            v -= b * c;
        }
        let n = v.norm();
        if n > 1e-6 {
            let v = v / Complex64::new(n, 0.0);
            all.push(v.clone());
            out.push(v);
        }
    }
    out
}

/// Lifts a verified protocol for `m`, which must carry Kraus data.
pub fn lift(t: &ProtocolTree, a: &[f64], m: &SeparableMeasurement, tol: &Tolerances) -> Result<LiftedProtocol> {
    let kraus = m.kraus().ok_or(Error::NoKrausData)?;
    let parts = LocalParts::from_measurement(m);
    let p = m.num_parties();

    // per operator: Khat factors, and (kraus index, weight) pairs
    let mut khat = Vec::with_capacity(m.num_ops());
    let mut groups: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m.num_ops()];
    for (j, prod) in kraus.products.iter().enumerate() {
        let w: f64 = prod.parts.iter().map(|k| (k.adjoint() * k).trace().re).product();
        groups[kraus.op_of[j]].push((j, w));
    }
    for (i, group) in groups.iter().enumerate() {
        let total: f64 = group.iter().map(|(_, w)| w).sum();
        if group.is_empty() || total <= 0.0 {
            return Err(Error::FactorizationFailure(format!("operator {i} has no Kraus products")));
        }
        let factors = (0..p)
            .map(|alpha| {
                let part = m.part(i, alpha);
                let scale = if alpha == 0 { total } else { 1.0 } / part.trace();
                part.scale(scale).sqrt_psd().matrix().clone()
            })
            .collect::<Vec<_>>();
        khat.push((factors, total));
    }

    // leaf weights in units of the unit-trace operators
    let leaves = t.leaves();
    let mut leaf_weight = Vec::with_capacity(leaves.len());
    let mut op_weight = vec![0.0; m.num_ops()];
    for &leaf in &leaves {
        let op = t
            .node(leaf)
            .leaf_op
            .ok_or_else(|| Error::InvalidInput(format!("leaf {leaf} has no operator")))?;
        if op >= m.num_ops() {
            return Err(Error::InvalidInput(format!("leaf {leaf} names operator {op}")));
        }
        let mut w = 1.0;
        for alpha in 0..p {
            w *= t.label_value(t.nearest(leaf, alpha), &parts, a)?.trace();
        }
        leaf_weight.push((op, w));
        op_weight[op] += w;
    }
    for (i, (_, total)) in khat.iter().enumerate() {
        if (op_weight[i] - total).abs() > tol.lp * (1.0 + total) {
            return Err(Error::FactorizationFailure(format!(
                "protocol weight {:.3e} of operator {i} differs from its Kraus weight {total:.3e}",
                op_weight[i]
            )));
        }
    }

    let mut tree = t.clone();
    let mut assignment = a.to_vec();
    let mut tails = Vec::with_capacity(leaves.len());
    let mut coin_rounds = 0;
    for (&leaf, &(op, w)) in leaves.iter().zip(&leaf_weight) {
        let (factors, total) = &khat[op];
        let probs: Vec<f64> = groups[op].iter().map(|(_, wj)| wj / total).collect();
        let outcomes = if probs.len() > 1 {
            coin_rounds = 1;
            tree.split_leaf(leaf, &probs, &mut assignment)
        } else {
            vec![leaf]
        };
        let entries = groups[op]
            .iter()
            .zip(&probs)
            .zip(outcomes)
            .map(|((&(j, _), &probability), outcome)| {
                let unitaries = kraus.products[j]
                    .parts
                    .iter()
                    .map(|k| polar_unitary(k, tol))
                    .collect::<Result<Vec<_>>>()?;
                Ok(TailEntry {
                    kraus: j,
                    probability,
                    unitaries,
                    outcome,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        tails.push(UnitaryTail {
            leaf,
            op,
            share: w / op_weight[op],
            kraus_op: factors.clone(),
            entries,
        });
    }
    Ok(LiftedProtocol {
        tree,
        assignment,
        tails,
        coin_rounds,
    })
}

/// `sqrt` of a positive operator as a plain matrix.
pub fn sqrt_matrix(h: &HermitianOperator) -> CMatrix {
    h.sqrt_psd().matrix().clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::synth::{synthesize, verify_protocol, RunConfig};
    use crate::tree::extract_measurement;

    fn check_lift(m: &SeparableMeasurement, rounds: usize) -> LiftedProtocol {
        let tol = Tolerances::default();
        let r = synthesize(m, &RunConfig::with_rounds(rounds)).unwrap();
        let p = r.protocol().expect("protocol");
        let lifted = lift(&p.tree, &p.assignment, m, &tol).unwrap();
        for tail in &lifted.tails {
            let total: f64 = tail.entries.iter().map(|e| e.probability).sum();
            assert!((total - 1.0).abs() <= 1e-8);
            for e in &tail.entries {
                assert!(e.probability > 0.0);
                assert!(e.unitaries.iter().all(|u| is_unitary(u, 1e-9)));
            }
            for (err, norm) in tail.reconstruction_errors(m).unwrap() {
                assert!(err <= 1e-8 * (1.0 + norm), "{err}");
            }
        }
        // the lifted tree implements the same positive measurement
        let parts = LocalParts::from_measurement(m);
        let before = extract_measurement(&p.tree, &parts, &p.assignment, &tol).unwrap();
        let after = extract_measurement(&lifted.tree, &parts, &lifted.assignment, &tol).unwrap();
        assert!(before.equivalent(&after, 1e-8));
        assert!(verify_protocol(&lifted.tree, &lifted.assignment, m, &parts, &tol).unwrap());
        lifted
    }

    #[test]
    fn square_root_kraus_lifts_trivially() {
        let m = fixtures::ex10_kraus();
        let lifted = check_lift(&m, 4);
        assert_eq!(lifted.coin_rounds, 0);
        for tail in &lifted.tails {
            assert_eq!(tail.entries.len(), 1);
            let e = &tail.entries[0];
            assert!((e.probability - 1.0).abs() < 1e-12);
            for u in &e.unitaries {
                assert!((u - CMatrix::identity(2, 2)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn multiplicity_adds_a_coin() {
        let m = fixtures::kraus_multiplicity();
        let lifted = check_lift(&m, 2);
        assert_eq!(lifted.coin_rounds, 1);
        let tail = lifted.tails.iter().find(|t| t.op == 0).unwrap();
        assert_eq!(tail.entries.len(), 2);
        for e in &tail.entries {
            assert!((e.probability - 0.5).abs() < 1e-12);
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let c = |x: f64, y: f64| Complex64::new(x, y);
        let hadamard = CMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]);
        let phase = CMatrix::from_row_slice(2, 2, &[c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let second = &tail.entries[1].unitaries;
        assert!((&second[0] - hadamard).norm() < 1e-9);
        assert!((&second[1] - phase).norm() < 1e-9);
        assert_eq!(lifted.tree.depth(), 3);
    }

    #[test]
    fn polar_factor_of_full_rank() {
        let c = |x: f64, y: f64| Complex64::new(x, y);
        let k = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.5), c(0.2, 0.0), c(-0.3, 0.1), c(0.7, -0.2)]);
        let u = polar_unitary(&k, &Tolerances::default()).unwrap();
        assert!(is_unitary(&u, 1e-10));
        let pos = sqrt_matrix(&HermitianOperator::gram(&k));
        assert!((&u * pos - &k).norm() < 1e-10);
    }

    #[test]
    fn polar_factor_of_zero_rank_is_identity() {
        let u = polar_unitary(&CMatrix::zeros(3, 3), &Tolerances::default()).unwrap();
        assert!((u - CMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn missing_kraus_data() {
        let m = fixtures::product_basis();
        let t = ProtocolTree::leaf_tree(2, 0);
        assert!(matches!(
            lift(&t, &[1.0, 1.0], &m, &Tolerances::default()),
            Err(Error::NoKrausData)
        ));
    }
}
