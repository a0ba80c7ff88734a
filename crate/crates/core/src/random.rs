//! Seeded random instances for property tests and the acceptance suite.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hermitian::{CMatrix, HermitianOperator};
use crate::measurement::{Party, ProductOperator, SeparableMeasurement};
use crate::tree::{LocalParts, NodeId, ProtocolTree, TreeBuilder};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

fn hermitian_part(m: CMatrix) -> HermitianOperator {
    let sym = (&m + m.adjoint()).map(|x| x * 0.5);
    HermitianOperator::new(sym, 1e-9).expect("symmetrized matrix is Hermitian")
}

/// `X X^dag` for a random `d x rank` matrix `X`.
pub fn psd<R: Rng>(rng: &mut R, d: usize, rank: usize) -> HermitianOperator {
    HermitianOperator::gram(&complex_matrix(rng, rank, d))
}

/// Random positive operator of random rank between 1 and `d`.
pub fn any_psd<R: Rng>(rng: &mut R, d: usize) -> HermitianOperator {
    let rank = rng.random_range(1..=d);
    psd(rng, d, rank)
}

/// Haar-like unitary from the QR factor of a random matrix.
pub fn unitary<R: Rng>(rng: &mut R, d: usize) -> CMatrix {
    complex_matrix(rng, d, d).qr().q()
}

/// `h^s` for a positive operator, on its support.
fn power(h: &HermitianOperator, s: f64) -> CMatrix {
    let eig = h.matrix().clone().symmetric_eigen();
    let d = h.dim();
    let mut out = CMatrix::zeros(d, d);
    for k in 0..d {
        let lambda = eig.eigenvalues[k];
        if lambda <= 1e-12 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        out += (v * v.adjoint()).map(|x| x * lambda.powf(s));
    }
    out
}

/// Splits `total` into `k` positive operators summing to it, using a random
/// POVM conjugated by `total^(1/2)`.
pub fn split<R: Rng>(rng: &mut R, total: &HermitianOperator, k: usize) -> Vec<HermitianOperator> {
    let d = total.dim();
    let pieces: Vec<HermitianOperator> = (0..k).map(|_| psd(rng, d, d)).collect();
    let mut sum = HermitianOperator::zeros(d);
    for p in &pieces {
        sum.axpy(1.0, p).expect("same dimension");
    }
    let inv = power(&sum, -0.5);
    let root = power(total, 0.5);
    pieces
        .iter()
        .map(|p| {
            let e = &inv * p.matrix() * &inv;
            hermitian_part(&root * e * &root)
        })
        .collect()
}

/// Generators for a cone with `n` generators on dimension `d`.
pub fn cone_generators<R: Rng>(rng: &mut R, d: usize, n: usize) -> Vec<HermitianOperator> {
    (0..n).map(|_| any_psd(rng, d)).collect()
}

/// Two generator sets on a common dimension `d <= 3` with at most
/// `max_gens` generators each. About half the pairs are built to meet: the
/// second set then contains a positive combination of the first.
pub fn cone_pair<R: Rng>(rng: &mut R, max_gens: usize) -> (Vec<HermitianOperator>, Vec<HermitianOperator>) {
    let d = rng.random_range(1..=3);
    let na = rng.random_range(1..=max_gens);
    let nb = rng.random_range(1..=max_gens);
    let a = cone_generators(rng, d, na);
    let mut b = cone_generators(rng, d, nb);
    if rng.random_bool(0.5) {
        let mut x = HermitianOperator::zeros(d);
        for g in &a {
            x.axpy(rng.random_range(0.0..1.0), g).expect("same dimension");
        }
        if x.trace() > 1e-6 {
            let slot = rng.random_range(0..b.len());
            b[slot] = x;
        }
    }
    (a, b)
}

fn ket_projector(u: &CMatrix, col: usize) -> HermitianOperator {
    let v: Vec<Complex64> = u.column(col).iter().copied().collect();
    HermitianOperator::outer(&v)
}

/// Complete two-qubit measurement whose first operator `|a><a| (x) |b><b|`
/// has rank-one local parts appearing in no other operator. The rest are
/// `|a'><a'| (x) Y_k` and `X_k (x) |b'><b'|` where `a'`, `b'` are the
/// orthogonal states, `sum Y_k = |b><b| + (1-c)|b'><b'|` and
/// `sum X_k = |a><a| + c|a'><a'|`. Between 3 and 5 operators.
pub fn witness_measurement<R: Rng>(rng: &mut R) -> SeparableMeasurement {
    let ua = unitary(rng, 2);
    let ub = unitary(rng, 2);
    let (a, a_perp) = (ket_projector(&ua, 0), ket_projector(&ua, 1));
    let (b, b_perp) = (ket_projector(&ub, 0), ket_projector(&ub, 1));
    let c = rng.random_range(0.1..0.9);
    let sum_y = b.add(&b_perp.scale(1.0 - c)).expect("same dimension");
    let sum_x = a.add(&a_perp.scale(c)).expect("same dimension");
    let ky = rng.random_range(1..=2);
    let kx = rng.random_range(1..=2);
    let mut ops = vec![ProductOperator::new(vec![a, b])];
    for y in split(rng, &sum_y, ky) {
        ops.push(ProductOperator::new(vec![a_perp.clone(), y]));
    }
    for x in split(rng, &sum_x, kx) {
        ops.push(ProductOperator::new(vec![x, b_perp.clone()]));
    }
    let labels = (1..=ops.len()).map(|j| format!("K{j}")).collect();
    SeparableMeasurement::unvalidated(vec![Party::new("A", 2), Party::new("B", 2)], ops, labels)
}

/// One-way two-qubit measurement: A measures a random two-outcome POVM,
/// then B a random two-outcome POVM depending on A's outcome.
pub fn one_way_measurement<R: Rng>(rng: &mut R) -> SeparableMeasurement {
    let id = HermitianOperator::identity(2);
    let mut ops = Vec::new();
    for e in split(rng, &id, 2) {
        for f in split(rng, &id, 2) {
            ops.push(ProductOperator::new(vec![e.clone(), f]));
        }
    }
    let labels = (1..=ops.len()).map(|j| format!("K{j}")).collect();
    SeparableMeasurement::unvalidated(vec![Party::new("A", 2), Party::new("B", 2)], ops, labels)
}

/// A random valid tree with its generators and assignment.
#[derive(Debug, Clone)]
pub struct RandomTree {
    pub tree: ProtocolTree,
    pub parts: LocalParts,
    pub assignment: Vec<f64>,
}

struct Gen<'a, R: Rng> {
    rng: &'a mut R,
    dims: Vec<usize>,
    pools: Vec<Vec<HermitianOperator>>,
    builder: TreeBuilder,
    leaves: usize,
}

impl<R: Rng> Gen<'_, R> {
    /// Registers `value` as one or two generator terms with random
    /// coefficients.
    fn terms(&mut self, party: usize, value: &HermitianOperator) -> Vec<(usize, f64)> {
        let pieces = if self.rng.random_bool(0.3) {
            split(self.rng, value, 2)
        } else {
            vec![value.clone()]
        };
        pieces
            .into_iter()
            .map(|piece| {
                let q = self.rng.random_range(0.5..2.0);
                self.pools[party].push(piece.scale(1.0 / q));
                (self.pools[party].len() - 1, q)
            })
            .collect()
    }

    /// `nearest` holds the current label value of every party on the path.
    fn grow(&mut self, node: NodeId, nearest: Vec<HermitianOperator>, depth: usize) {
        let stop = depth == 0 || (depth < 3 && self.rng.random_bool(0.3));
        if stop {
            self.builder.leaf(node, self.leaves);
            self.leaves += 1;
            return;
        }
        let p = self.dims.len();
        let beta = self.rng.random_range(0..p);
        let total = &nearest[beta];
        let k = self.rng.random_range(1..=3);
        let values = if k > 1 && self.rng.random_bool(0.25) {
            // coin flip: proportional outcomes
            let w: Vec<f64> = (0..k).map(|_| self.rng.random_range(0.2..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.iter().map(|x| total.scale(x / s)).collect()
        } else {
            split(self.rng, total, k)
        };
        for v in values {
            let terms = self.terms(beta, &v);
            let child = self.builder.child(node, beta, &terms);
            let mut next = nearest.clone();
            next[beta] = v;
            self.grow(child, next, depth - 1);
        }
    }
}

/// Random valid tree on at most `max_parties` parties of dimension at most
/// `max_dim`, with up to three measurement levels. Covers single-outcome
/// measurements, proportional (coin-flip) outcomes, successive
/// measurements by one party, and multi-term labels.
pub fn random_tree<R: Rng>(rng: &mut R, max_parties: usize, max_dim: usize) -> RandomTree {
    let p = rng.random_range(1..=max_parties);
    let dims: Vec<usize> = (0..p).map(|_| rng.random_range(1..=max_dim)).collect();
    let mut pools = vec![Vec::new(); p];
    let mut roots = Vec::with_capacity(p);
    let mut nearest = Vec::with_capacity(p);
    for (alpha, &d) in dims.iter().enumerate() {
        let value = if rng.random_bool(0.5) {
            HermitianOperator::identity(d)
        } else {
            psd(rng, d, d)
        };
        pools[alpha].push(value.clone());
        roots.push((alpha, vec![(0, 1.0)]));
        nearest.push(value);
    }
    let builder = TreeBuilder::new(p, roots);
    let last = builder.last_root();
    let mut g = Gen {
        rng,
        dims,
        pools,
        builder,
        leaves: 0,
    };
    g.grow(last, nearest, 3);
    let (tree, assignment) = g.builder.finish();
    RandomTree {
        tree,
        parts: LocalParts::new(g.pools),
        assignment,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tolerance::Tolerances;
    use crate::tree::extract_measurement;

    #[test]
    fn split_sums_to_total() {
        let mut r = rng(1);
        let total = psd(&mut r, 3, 2);
        let pieces = split(&mut r, &total, 3);
        let mut sum = HermitianOperator::zeros(3);
        for p in &pieces {
            assert!(p.eigenvalues()[0] > -1e-10);
            sum.axpy(1.0, p).unwrap();
        }
        assert!(sum.distance(&total) < 1e-10);
    }

    #[test]
    fn unitary_is_unitary() {
        let mut r = rng(2);
        let u = unitary(&mut r, 3);
        assert!((u.adjoint() * &u - CMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn witness_family_is_complete() {
        let mut r = rng(3);
        for _ in 0..20 {
            let m = witness_measurement(&mut r);
            assert!(m.validate(&Tolerances::default()).is_empty());
            let cert = m.completeness_certificate(1e-7, &Tolerances::default()).unwrap();
            assert!(cert.residual < 1e-8);
        }
    }

    #[test]
    fn random_trees_are_valid() {
        let tol = Tolerances::default();
        let mut r = rng(4);
        for _ in 0..50 {
            let t = random_tree(&mut r, 3, 3);
            assert!(t.tree.validate_eq3(&t.parts, &t.assignment, false, &tol).unwrap());
            let ext = extract_measurement(&t.tree, &t.parts, &t.assignment, &tol).unwrap();
            assert!(!ext.ops.is_empty());
        }
    }

    #[test]
    fn same_seed_same_tree() {
        let a = random_tree(&mut rng(9), 3, 3);
        let b = random_tree(&mut rng(9), 3, 3);
        assert_eq!(a.tree, b.tree);
        assert_eq!(a.assignment, b.assignment);
    }
}
