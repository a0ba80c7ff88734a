//! Convex cones generated by finitely many PSD operators, and the LP-backed
//! tests on them: membership, nontrivial intersection, extreme and singular
//! rays.

use crate::error::{Error, Result};
use crate::hermitian::{is_psd, proportional, HermitianOperator};
use crate::lp::{LinearProgram, LpOutcome, SimplexOptions};
use crate::tolerance::Tolerances;

/// The cone of all nonnegative combinations of `generators`.
#[derive(Debug, Clone)]
pub struct Cone {
    party_dim: usize,
    generators: Vec<HermitianOperator>,
}

/// A common nonzero point of two cones together with the coefficients that
/// reach it from either side. `coefficients_a` sums to one.
#[derive(Debug, Clone)]
pub struct FeasibilityWitness {
    pub coefficients_a: Vec<f64>,
    pub coefficients_b: Vec<f64>,
    pub point: HermitianOperator,
    /// Frobenius distance between the two reconstructions of `point`.
    pub residual: f64,
}

impl Cone {
    pub fn new(generators: Vec<HermitianOperator>, tol: &Tolerances) -> Result<Self> {
        let first = generators
            .first()
            .ok_or_else(|| Error::InvalidInput("cone needs at least one generator".into()))?;
        let party_dim = first.dim();
        for g in &generators {
            if g.dim() != party_dim {
                return Err(Error::DimMismatch {
                    expected: party_dim,
                    found: g.dim(),
                });
            }
            if g.is_zero(tol.herm) {
                return Err(Error::ZeroOperator);
            }
            if !is_psd(g, tol.psd) {
                return Err(Error::InvalidOperator("cone generator is not PSD".into()));
            }
        }
        Ok(Self {
            party_dim,
            generators,
        })
    }

    pub fn party_dim(&self) -> usize {
        self.party_dim
    }

    pub fn generators(&self) -> &[HermitianOperator] {
        &self.generators
    }

    pub fn combination(&self, coeffs: &[f64]) -> HermitianOperator {
        let mut acc = HermitianOperator::zeros(self.party_dim);
        for (c, g) in coeffs.iter().zip(&self.generators) {
            acc.axpy(*c, g).expect("generators share the cone dimension");
        }
        acc
    }
}

/// Nonnegative `c` with `sum c_i G_i = x`, or `None` if `x` is outside the cone.
pub fn member(x: &HermitianOperator, cone: &Cone, tol: &Tolerances) -> Result<Option<Vec<f64>>> {
    if x.dim() != cone.party_dim {
        return Err(Error::DimMismatch {
            expected: cone.party_dim,
            found: x.dim(),
        });
    }
    let cols: Vec<Vec<f64>> = cone
        .generators
        .iter()
        .map(|g| g.vectorize().coords)
        .collect();
    let target = x.vectorize().coords;
    let mut lp = LinearProgram::new(cols.len());
    for r in 0..target.len() {
        lp.add_row(cols.iter().map(|c| c[r]).collect(), target[r])?;
    }
    let Some(sol) = lp.solve(&SimplexOptions::default())?.solution() else {
        return Ok(None);
    };
    let err = cone.combination(&sol.x).distance(x);
    if err <= tol.lp * (1.0 + x.norm()) {
        Ok(Some(sol.x))
    } else {
        Ok(None)
    }
}

/// A nonzero common point of the two cones, or `None` if they meet only at
/// the origin.
pub fn nontrivial_intersection(
    a: &Cone,
    b: &Cone,
    tol: &Tolerances,
) -> Result<Option<FeasibilityWitness>> {
    let points = common_point(&[a, b], tol)?;
    Ok(points.map(|mut coeffs| {
        let coefficients_b = coeffs.pop().expect("two cones");
        let coefficients_a = coeffs.pop().expect("two cones");
        let point = a.combination(&coefficients_a);
        let residual = point.distance(&b.combination(&coefficients_b));
        FeasibilityWitness {
            coefficients_a,
            coefficients_b,
            point,
            residual,
        }
    }))
}

/// Coefficients, one vector per cone, reaching a single nonzero point lying in
/// every cone; the first cone's coefficients sum to one.
pub fn common_point(cones: &[&Cone], tol: &Tolerances) -> Result<Option<Vec<Vec<f64>>>> {
    let Some(first) = cones.first() else {
        return Err(Error::InvalidInput("no cones given".into()));
    };
    let dim = first.party_dim;
    for c in cones {
        if c.party_dim != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                found: c.party_dim,
            });
        }
    }
    let offsets: Vec<usize> = cones
        .iter()
        .scan(0, |acc, c| {
            let start = *acc;
            *acc += c.generators.len();
            Some(start)
        })
        .collect();
    let num_vars: usize = cones.iter().map(|c| c.generators.len()).sum();
    let vecs: Vec<Vec<Vec<f64>>> = cones
        .iter()
        .map(|c| c.generators.iter().map(|g| g.vectorize().coords).collect())
        .collect();

    let mut lp = LinearProgram::new(num_vars);
    for k in 1..cones.len() {
        for r in 0..dim * dim {
            let mut row = vec![0.0; num_vars];
            for (i, v) in vecs[0].iter().enumerate() {
                row[offsets[0] + i] += v[r];
            }
            for (i, v) in vecs[k].iter().enumerate() {
                row[offsets[k] + i] -= v[r];
            }
            lp.add_row(row, 0.0)?;
        }
    }
    let mut norm_row = vec![0.0; num_vars];
    norm_row[..cones[0].generators.len()].iter_mut().for_each(|v| *v = 1.0);
    lp.add_row(norm_row, 1.0)?;

    let outcome = lp.solve(&SimplexOptions::default())?;
    let LpOutcome::Optimal(sol) = outcome else {
        return Ok(None);
    };
    let split: Vec<Vec<f64>> = cones
        .iter()
        .zip(&offsets)
        .map(|(c, &o)| sol.x[o..o + c.generators.len()].to_vec())
        .collect();
    let reference = cones[0].combination(&split[0]);
    let scale = 1.0 + reference.norm();
    for (c, coeffs) in cones.iter().zip(&split).skip(1) {
        if c.combination(coeffs).distance(&reference) > tol.lp * scale {
            return Ok(None);
        }
    }
    Ok(Some(split))
}

/// True iff generator `k` is not a nonnegative combination of the generators
/// that are not proportional to it.
pub fn is_extreme_ray(k: usize, cone: &Cone, tol: &Tolerances) -> Result<bool> {
    let target = cone
        .generators
        .get(k)
        .ok_or_else(|| Error::InvalidInput(format!("generator index {k} out of range")))?;
    let mut others = Vec::new();
    for (i, g) in cone.generators.iter().enumerate() {
        if i == k || proportional(g, target, tol.herm)?.is_some() {
            continue;
        }
        others.push(g.clone());
    }
    if others.is_empty() {
        return Ok(true);
    }
    let rest = Cone {
        party_dim: cone.party_dim,
        generators: others,
    };
    Ok(member(target, &rest, tol)?.is_none())
}

/// True iff no other operator in the list is proportional to operator `k`.
pub fn is_singular_ray(k: usize, generators: &[HermitianOperator], tol: &Tolerances) -> Result<bool> {
    let target = generators
        .get(k)
        .ok_or_else(|| Error::InvalidInput(format!("generator index {k} out of range")))?;
    for (i, g) in generators.iter().enumerate() {
        if i != k && proportional(g, target, tol.herm)?.is_some() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> Tolerances {
        Tolerances::default()
    }

    fn p0() -> HermitianOperator {
        HermitianOperator::diag(&[1.0, 0.0])
    }
    fn p1() -> HermitianOperator {
        HermitianOperator::diag(&[0.0, 1.0])
    }
    fn plus() -> HermitianOperator {
        HermitianOperator::projector_real(&[1.0, 1.0])
    }

    fn cone(g: Vec<HermitianOperator>) -> Cone {
        Cone::new(g, &t()).unwrap()
    }

    #[test]
    fn member_examples() {
        let c = cone(vec![p0(), p1()]);
        let first = member(&p0(), &c, &t()).unwrap().unwrap();
        assert!((first[0] - 1.0).abs() < 1e-12 && first[1].abs() < 1e-12);

        let id = member(&HermitianOperator::identity(2), &c, &t()).unwrap().unwrap();
        assert!((id[0] - 1.0).abs() < 1e-12 && (id[1] - 1.0).abs() < 1e-12);

        assert!(member(&plus(), &c, &t()).unwrap().is_none());

        assert!(matches!(
            member(&HermitianOperator::identity(3), &c, &t()),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn intersection_examples() {
        assert!(nontrivial_intersection(&cone(vec![p0()]), &cone(vec![p1()]), &t())
            .unwrap()
            .is_none());

        let w = nontrivial_intersection(
            &cone(vec![p0(), p1()]),
            &cone(vec![HermitianOperator::identity(2)]),
            &t(),
        )
        .unwrap()
        .unwrap();
        let lambda = proportional(&w.point, &HermitianOperator::identity(2), 1e-9).unwrap();
        assert!(lambda.is_some());
        assert!((w.coefficients_a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.residual <= 1e-8);

        let w = nontrivial_intersection(
            &cone(vec![p0(), HermitianOperator::identity(2)]),
            &cone(vec![HermitianOperator::diag(&[2.0, 0.0])]),
            &t(),
        )
        .unwrap()
        .unwrap();
        assert!(proportional(&w.point, &p0(), 1e-9).unwrap().is_some());
    }

    #[test]
    fn intersection_dim_mismatch() {
        let r = nontrivial_intersection(
            &cone(vec![p0()]),
            &cone(vec![HermitianOperator::identity(3)]),
            &t(),
        );
        assert!(matches!(r, Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn extreme_ray_examples() {
        assert!(is_extreme_ray(0, &cone(vec![p0(), p1()]), &t()).unwrap());
        assert!(!is_extreme_ray(
            2,
            &cone(vec![p0(), p1(), HermitianOperator::identity(2)]),
            &t()
        )
        .unwrap());
        assert!(is_extreme_ray(2, &cone(vec![p0(), p1(), plus()]), &t()).unwrap());
        // a scaled copy of the tested generator does not make it non-extreme
        assert!(is_extreme_ray(0, &cone(vec![p0(), p0().scale(3.0), p1()]), &t()).unwrap());
    }

    #[test]
    fn singular_ray_examples() {
        assert!(is_singular_ray(0, &[p0(), p1()], &t()).unwrap());
        assert!(!is_singular_ray(0, &[p0(), p0().scale(3.0)], &t()).unwrap());
    }

    #[test]
    fn cone_rejects_bad_generators() {
        assert!(matches!(
            Cone::new(vec![HermitianOperator::zeros(2)], &t()),
            Err(Error::ZeroOperator)
        ));
        assert!(Cone::new(vec![HermitianOperator::diag(&[1.0, -1.0])], &t()).is_err());
        assert!(Cone::new(vec![], &t()).is_err());
    }
}
