//! Impossibility certificates for finite-round LOCC: the bipartition cone
//! test and its single-operator special case (a singular extreme ray on two
//! parties).

use serde::Serialize;

use crate::cone::{is_extreme_ray, is_singular_ray, nontrivial_intersection, Cone};
use crate::error::Result;
use crate::measurement::SeparableMeasurement;
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NoGoKind {
    /// Some bipartition of the operators has disjoint local cones on two parties.
    Bipartition,
    /// One operator is a singular extreme ray on two parties.
    SingularExtremeRay,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PartyEvidence {
    /// The two cones of this party meet only at the origin.
    ConesDisjoint { party: usize },
    /// The local part is a singular and extreme ray of the party's full cone.
    SingularExtreme { party: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoGoWitness {
    pub kind: NoGoKind,
    /// Zero-based operator indices of the first side of the partition; a
    /// single index for [`NoGoKind::SingularExtremeRay`].
    pub partition: Vec<usize>,
    pub parties: (usize, usize),
    pub evidence: Vec<PartyEvidence>,
}

/// Result of the bipartition scan.
#[derive(Debug, Clone, PartialEq)]
pub enum ScanResult {
    Witness(NoGoWitness),
    /// No witness. `exhaustive` is false when only singletons and pairs were
    /// scanned, so the absence is heuristic.
    NoneFound { exhaustive: bool },
}

impl ScanResult {
    pub fn witness(&self) -> Option<&NoGoWitness> {
        match self {
            ScanResult::Witness(w) => Some(w),
            ScanResult::NoneFound { .. } => None,
        }
    }
}

pub const DEFAULT_MAX_N_EXHAUSTIVE: usize = 16;

/// Scans operators in ascending order and party pairs lexicographically for a
/// local part that is a singular extreme ray on both parties of the pair.
pub fn corollary1_check(m: &SeparableMeasurement, tol: &Tolerances) -> Result<Option<NoGoWitness>> {
    let p = m.num_parties();
    if m.num_ops() < 2 {
        return Ok(None);
    }
    let mut cones = Vec::with_capacity(p);
    let mut parts = Vec::with_capacity(p);
    for alpha in 0..p {
        let gens = m.party_parts(alpha);
        cones.push(Cone::new(gens.clone(), tol)?);
        parts.push(gens);
    }
    for n in 0..m.num_ops() {
        let mut flags = Vec::with_capacity(p);
        for alpha in 0..p {
            let ok = is_singular_ray(n, &parts[alpha], tol)? && is_extreme_ray(n, &cones[alpha], tol)?;
            flags.push(ok);
        }
        for a in 0..p {
            for b in (a + 1)..p {
                if flags[a] && flags[b] {
                    return Ok(Some(NoGoWitness {
                        kind: NoGoKind::SingularExtremeRay,
                        partition: vec![n],
                        parties: (a, b),
                        evidence: vec![
                            PartyEvidence::SingularExtreme { party: a },
                            PartyEvidence::SingularExtreme { party: b },
                        ],
                    }));
                }
            }
        }
    }
    Ok(None)
}

/// Enumerates bipartitions `S1 | S2` (smaller side first, by size then
/// lexicographically) and returns the first one whose local cones are
/// disjoint on two parties. Above `max_n_exhaustive` operators only
/// singletons and pairs are tried.
pub fn theorem1_check(
    m: &SeparableMeasurement,
    max_n_exhaustive: usize,
    tol: &Tolerances,
) -> Result<ScanResult> {
    let n = m.num_ops();
    let p = m.num_parties();
    let exhaustive = n <= max_n_exhaustive;
    let max_size = if exhaustive { n / 2 } else { 2.min(n / 2) };
    let parts: Vec<_> = (0..p).map(|alpha| m.party_parts(alpha)).collect();
    for size in 1..=max_size {
        for s1 in Combinations::new(n, size) {
            // an even split appears twice; keep the side holding operator 0
            if 2 * size == n && s1[0] != 0 {
                continue;
            }
            let mut in_s1 = vec![false; n];
            for &j in &s1 {
                in_s1[j] = true;
            }
            let mut disjoint = Vec::new();
            for (alpha, party) in parts.iter().enumerate().take(p) {
                let c1 = Cone::new(
                    (0..n).filter(|&j| in_s1[j]).map(|j| party[j].clone()).collect(),
                    tol,
                )?;
                let c2 = Cone::new(
                    (0..n).filter(|&j| !in_s1[j]).map(|j| party[j].clone()).collect(),
                    tol,
                )?;
                if nontrivial_intersection(&c1, &c2, tol)?.is_none() {
                    disjoint.push(alpha);
                    if disjoint.len() == 2 {
                        break;
                    }
                }
            }
            if disjoint.len() == 2 {
                let (a, b) = (disjoint[0], disjoint[1]);
                return Ok(ScanResult::Witness(NoGoWitness {
                    kind: NoGoKind::Bipartition,
                    partition: s1,
                    parties: (a, b),
                    evidence: vec![
                        PartyEvidence::ConesDisjoint { party: a },
                        PartyEvidence::ConesDisjoint { party: b },
                    ],
                }));
            }
        }
    }
    Ok(ScanResult::NoneFound { exhaustive })
}

/// Lexicographic `k`-subsets of `0..n`.
pub(crate) struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    pub(crate) fn new(n: usize, k: usize) -> Self {
        let current = if k <= n { Some((0..k).collect()) } else { None };
        Self { n, current }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for t in (i + 1)..k {
                    next[t] = next[t - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn combinations_are_lexicographic() {
        let all: Vec<_> = Combinations::new(4, 2).collect();
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(Combinations::new(3, 0).count(), 1);
        assert_eq!(Combinations::new(2, 3).count(), 0);
    }

    #[test]
    fn domino_witnesses() {
        let m = fixtures::dom9();
        let t = Tolerances::default();
        let w = corollary1_check(&m, &t).unwrap().unwrap();
        assert_eq!(w.kind, NoGoKind::SingularExtremeRay);
        assert_eq!(w.partition, vec![0]);
        assert_eq!(w.parties, (0, 1));
        let scan = theorem1_check(&m, DEFAULT_MAX_N_EXHAUSTIVE, &t).unwrap();
        let w = scan.witness().unwrap();
        assert_eq!(w.kind, NoGoKind::Bipartition);
        assert_eq!(w.partition, vec![0]);
    }

    #[test]
    fn product_basis_has_no_witness() {
        let m = fixtures::product_basis();
        let t = Tolerances::default();
        assert!(corollary1_check(&m, &t).unwrap().is_none());
        assert_eq!(
            theorem1_check(&m, DEFAULT_MAX_N_EXHAUSTIVE, &t).unwrap(),
            ScanResult::NoneFound { exhaustive: true }
        );
    }

    #[test]
    fn ex10_has_no_witness() {
        let m = fixtures::ex10();
        let t = Tolerances::default();
        assert!(corollary1_check(&m, &t).unwrap().is_none());
        assert!(theorem1_check(&m, DEFAULT_MAX_N_EXHAUSTIVE, &t)
            .unwrap()
            .witness()
            .is_none());
    }

    #[test]
    fn singleton_measurement_has_no_bipartition() {
        let m = fixtures::identity_singleton(2);
        let t = Tolerances::default();
        assert_eq!(
            theorem1_check(&m, DEFAULT_MAX_N_EXHAUSTIVE, &t).unwrap(),
            ScanResult::NoneFound { exhaustive: true }
        );
        assert!(corollary1_check(&m, &t).unwrap().is_none());
    }

    #[test]
    fn heuristic_downgrade() {
        let m = fixtures::product_basis();
        let scan = theorem1_check(&m, 2, &Tolerances::default()).unwrap();
        assert_eq!(scan, ScanResult::NoneFound { exhaustive: false });
    }
}
