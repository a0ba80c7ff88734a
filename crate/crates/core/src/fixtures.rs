//! Built-in measurements used by tests, examples and the CLI fixture files.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::hermitian::{CMatrix, HermitianOperator};
use crate::measurement::{KrausProduct, Party, ProductOperator, SeparableMeasurement};
use crate::tolerance::Tolerances;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn two_parties(d: usize) -> Vec<Party> {
    vec![Party::new("A", d), Party::new("B", d)]
}

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn herm(rows: [[Complex64; 2]; 2]) -> HermitianOperator {
    let m = CMatrix::from_fn(2, 2, |i, j| rows[i][j]);
    HermitianOperator::new(m, 1e-12).expect("fixture matrix is Hermitian")
}

/// A-side local parts of the five-operator bipartite fixture.
pub fn ex10_a_parts() -> [HermitianOperator; 5] {
    let a1 = HermitianOperator::diag(&[0.3, 0.0]);
    let a2 = herm([[c(0.2, 0.0), c(0.0, -0.2)], [c(0.0, 0.2), c(0.2, 0.0)]]);
    let a3 = HermitianOperator::identity(2);
    let a4 = a1.add(&a2).unwrap();
    let a5 = a3.sub(&a4).unwrap();
    [a1, a2, a3, a4, a5]
}

/// B-side local parts of the five-operator bipartite fixture.
pub fn ex10_b_parts() -> [HermitianOperator; 5] {
    let beta = herm([[c(0.2, 0.0), c(0.05, -0.05)], [c(0.05, 0.05), c(0.15, 0.0)]]);
    let id = HermitianOperator::identity(2);
    let b4 = id.sub(&beta.scale(2.0)).unwrap();
    let b5 = id.sub(&beta).unwrap();
    [beta.clone(), beta.clone(), beta, b4, b5]
}

/// Two-qubit measurement whose only linear relations are
/// `B1 = B2 = B3`, `B5 = B1 + B4`, `I_B = B3 + B5`,
/// `A4 = A1 + A2`, `I_A = A4 + A5`, `A3 = I_A`.
/// It is implementable by a four-round protocol ordered B, A, B, A.
pub fn ex10() -> SeparableMeasurement {
    let a = ex10_a_parts();
    let b = ex10_b_parts();
    let ops = a
        .into_iter()
        .zip(b)
        .map(|(x, y)| ProductOperator::new(vec![x, y]))
        .collect();
    SeparableMeasurement::new(two_parties(2), ops, labels(&["K1", "K2", "K3", "K4", "K5"]))
        .expect("fixture is valid")
}

/// The same measurement given through Kraus operators `sqrt(K_j)` per party.
pub fn ex10_kraus() -> SeparableMeasurement {
    let a = ex10_a_parts();
    let b = ex10_b_parts();
    let kraus = a
        .iter()
        .zip(&b)
        .map(|(x, y)| KrausProduct {
            parts: vec![x.sqrt_psd().matrix().clone(), y.sqrt_psd().matrix().clone()],
        })
        .collect();
    SeparableMeasurement::from_kraus(
        two_parties(2),
        kraus,
        labels(&["K1", "K2", "K3", "K4", "K5"]),
        &Tolerances::default(),
    )
    .expect("fixture is valid")
}

fn ket3(amps: [f64; 3]) -> Vec<Complex64> {
    amps.iter().map(|&x| c(x, 0.0)).collect()
}

/// The nine-state domino product basis on two qutrits. Operator 1 is
/// `|1><1| (x) |1><1|`, whose local parts appear nowhere else.
pub fn dom9() -> SeparableMeasurement {
    let s = FRAC_1_SQRT_2;
    let e = |i: usize| {
        let mut v = [0.0; 3];
        v[i] = 1.0;
        ket3(v)
    };
    let sup = |i: usize, j: usize, sign: f64| {
        let mut v = [0.0; 3];
        v[i] = s;
        v[j] = sign * s;
        ket3(v)
    };
    let pairs = vec![
        (e(1), e(1)),
        (e(0), sup(0, 1, 1.0)),
        (e(0), sup(0, 1, -1.0)),
        (e(2), sup(1, 2, 1.0)),
        (e(2), sup(1, 2, -1.0)),
        (sup(1, 2, 1.0), e(0)),
        (sup(1, 2, -1.0), e(0)),
        (sup(0, 1, 1.0), e(2)),
        (sup(0, 1, -1.0), e(2)),
    ];
    let ops = pairs
        .into_iter()
        .map(|(x, y)| ProductOperator::new(vec![HermitianOperator::outer(&x), HermitianOperator::outer(&y)]))
        .collect();
    SeparableMeasurement::new(
        two_parties(3),
        ops,
        labels(&["11", "0,0+1", "0,0-1", "2,1+2", "2,1-2", "1+2,0", "1-2,0", "0+1,2", "0-1,2"]),
    )
    .expect("fixture is valid")
}

/// Two-qubit computational product basis.
pub fn product_basis() -> SeparableMeasurement {
    let p = [HermitianOperator::diag(&[1.0, 0.0]), HermitianOperator::diag(&[0.0, 1.0])];
    let mut ops = Vec::new();
    for a in &p {
        for b in &p {
            ops.push(ProductOperator::new(vec![a.clone(), b.clone()]));
        }
    }
    SeparableMeasurement::new(two_parties(2), ops, labels(&["00", "01", "10", "11"]))
        .expect("fixture is valid")
}

/// The trivial measurement `{I (x) ... (x) I}` on `parties` qubits.
pub fn identity_singleton(parties: usize) -> SeparableMeasurement {
    let ps = (0..parties)
        .map(|i| Party::new(party_name(i), 2))
        .collect();
    let ops = vec![ProductOperator::new(vec![HermitianOperator::identity(2); parties])];
    SeparableMeasurement::new(ps, ops, labels(&["I"])).expect("fixture is valid")
}

fn party_name(i: usize) -> String {
    ((b'A' + i as u8) as char).to_string()
}

fn four_party(b1: HermitianOperator, b2: HermitianOperator) -> SeparableMeasurement {
    let parties = (0..4).map(|i| Party::new(party_name(i), 2)).collect();
    let id = HermitianOperator::identity(2);
    let ops = vec![
        ProductOperator::new(vec![HermitianOperator::diag(&[1.0, 0.0]), b1, id.clone(), id.clone()]),
        ProductOperator::new(vec![HermitianOperator::diag(&[0.0, 1.0]), b2, id.clone(), id]),
    ];
    SeparableMeasurement::unvalidated(parties, ops, labels(&["K1", "K2"]))
}

/// Two four-party operators sharing their C and D parts while both the A and
/// B parts differ. Not complete; used to test the merge rule only.
pub fn fig2_unequal() -> SeparableMeasurement {
    four_party(HermitianOperator::diag(&[1.0, 0.0]), HermitianOperator::diag(&[0.0, 1.0]))
}

/// As [`fig2_unequal`] but with equal B parts, which makes it the complete
/// measurement `{|0><0|, |1><1|}` on A.
pub fn fig2_equal() -> SeparableMeasurement {
    four_party(HermitianOperator::identity(2), HermitianOperator::identity(2))
}

/// Product-basis measurement whose first outcome is realized by two Kraus
/// products differing by local unitaries, each with half the weight.
pub fn kraus_multiplicity() -> SeparableMeasurement {
    let s = FRAC_1_SQRT_2;
    let p0 = CMatrix::from_fn(2, 2, |i, j| if i == 0 && j == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
    let p1 = CMatrix::from_fn(2, 2, |i, j| if i == 1 && j == 1 { c(1.0, 0.0) } else { c(0.0, 0.0) });
    let hadamard = CMatrix::from_fn(2, 2, |i, j| {
        if i == 1 && j == 1 {
            c(-s, 0.0)
        } else {
            c(s, 0.0)
        }
    });
    let phase = CMatrix::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => c(0.0, 1.0),
        (1, 1) => c(1.0, 0.0),
        _ => c(0.0, 0.0),
    });
    let mut kraus = vec![
        KrausProduct {
            parts: vec![p0.map(|x| x * s), p0.clone()],
        },
        KrausProduct {
            parts: vec![(&hadamard * &p0).map(|x| x * s), &phase * &p0],
        },
    ];
    for (a, b) in [(&p0, &p1), (&p1, &p0), (&p1, &p1)] {
        kraus.push(KrausProduct {
            parts: vec![a.clone(), b.clone()],
        });
    }
    SeparableMeasurement::from_kraus(
        two_parties(2),
        kraus,
        labels(&["00a", "00b", "01", "10", "11"]),
        &Tolerances::default(),
    )
    .expect("fixture is valid")
}

/// Every complete fixture, by name.
pub fn all_complete() -> Vec<(&'static str, SeparableMeasurement)> {
    vec![
        ("ex10", ex10()),
        ("dom9", dom9()),
        ("product_basis", product_basis()),
        ("identity", identity_singleton(2)),
        ("fig2_equal", fig2_equal()),
        ("kraus_multiplicity", kraus_multiplicity()),
    ]
}

/// Every fixture shipped as a document, by file stem.
pub fn documents() -> Vec<(&'static str, SeparableMeasurement)> {
    let mut out = all_complete();
    out.push(("ex10_kraus", ex10_kraus()));
    out.push(("fig2_unequal", fig2_unequal()));
    out
}

/// A document with a non-positive part and a duplicated operator.
pub fn broken_document() -> String {
    let mut doc = crate::io::MeasurementDocument::from_measurement(&product_basis());
    doc.operators[1] = doc.operators[0].clone();
    doc.operators[2].parts[0] = crate::io::matrix_rows(HermitianOperator::diag(&[1.0, -1.0]).matrix());
    crate::io::to_json(&doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::proportional;

    #[test]
    fn ex10_relations() {
        let a = ex10_a_parts();
        let b = ex10_b_parts();
        let t = 1e-12;
        assert!(a[3].distance(&a[0].add(&a[1]).unwrap()) < t);
        assert!(a[2].distance(&HermitianOperator::identity(2)) < t);
        assert!(b[4].distance(&b[0].add(&b[3]).unwrap()) < t);
        assert!(b[2].add(&b[4]).unwrap().distance(&HermitianOperator::identity(2)) < t);
        assert_eq!(proportional(&b[4], &b[0].add(&b[3]).unwrap(), 1e-10).unwrap(), Some(1.0));
        for op in a.iter().chain(&b) {
            assert!(op.eigenvalues()[0] > -1e-12);
        }
    }

    #[test]
    fn ex10_has_no_other_linear_relations() {
        let m = ex10();
        let t = 1e-9;
        // A parts plus identity: 6 operators, 3 relations
        assert_eq!(m.party_span_rank(0, true, t), 3);
        // B parts plus identity: 6 operators, 4 relations
        assert_eq!(m.party_span_rank(1, true, t), 2);
        assert!(m.validate(&Tolerances::default()).is_empty());
        assert!(m.completeness_certificate(1e-7, &Tolerances::default()).is_ok());
    }

    #[test]
    fn kraus_ex10_matches_positive_fixture() {
        let k = ex10_kraus();
        let m = ex10();
        assert_eq!(k.num_ops(), 5);
        for (x, y) in k.ops().iter().zip(m.ops()) {
            let l = x.proportional_to(y, 1e-9).unwrap().unwrap();
            assert!((l - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn complete_fixtures_certify() {
        for (name, m) in all_complete() {
            let cert = m
                .completeness_certificate(1e-7, &Tolerances::default())
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(cert.residual <= 1e-8, "{name}");
        }
    }

    #[test]
    fn kraus_multiplicity_collapses() {
        let m = kraus_multiplicity();
        assert_eq!(m.num_ops(), 4);
        assert_eq!(m.kraus().unwrap().op_of, vec![0, 0, 1, 2, 3]);
    }

    #[test]
    fn fig2_unequal_is_valid_but_incomplete() {
        let m = fig2_unequal();
        assert!(m.validate(&Tolerances::default()).is_empty());
        assert!(m.completeness_certificate(1e-7, &Tolerances::default()).is_err());
    }
}
