//! Protocol synthesis by repeated tree merging.
//!
//! Round `r` merges subsets of the trees built so far. A subset can be merged
//! with free party `f` when, for every other party, the cones generated by
//! the members' root labels share a common nonzero point. The merged tree
//! identifies those roots (recording the equalities) and gets a new root for
//! `f` whose outcomes are the members' `f`-roots. A tree covering every
//! operator whose constraints admit identity roots is a protocol.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::cone::{common_point, nontrivial_intersection, Cone};
use crate::error::{Error, Result};
use crate::hermitian::HermitianOperator;
use crate::lp::{LinearProgram, SimplexOptions};
use crate::measurement::SeparableMeasurement;
use crate::nogo::{corollary1_check, theorem1_check, NoGoWitness, DEFAULT_MAX_N_EXHAUSTIVE};
use crate::tolerance::Tolerances;
use crate::tree::{compact_same_party, extract_measurement, LocalParts, ProtocolTree, Term};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Caps {
    pub max_trees: usize,
    pub max_subset: usize,
    pub max_lps: usize,
    /// Largest operator count for which every bipartition is scanned.
    pub theorem1_exhaustive_n: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            max_trees: 20_000,
            max_subset: 6,
            max_lps: 1_000_000,
            theorem1_exhaustive_n: DEFAULT_MAX_N_EXHAUSTIVE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    FirstProtocol,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub rounds: usize,
    /// Lower bound standing in for strict positivity of weights and coefficients.
    pub delta: f64,
    pub tolerances: Tolerances,
    pub caps: Caps,
    pub mode: Mode,
    pub seed: u64,
    /// Run the no-go analyzers before searching.
    pub nogo_precheck: bool,
    /// Merge trees whose first measurement is by the free party, producing
    /// successive measurements by one party.
    pub allow_same_party: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            rounds: 4,
            delta: 1e-7,
            tolerances: Tolerances::default(),
            caps: Caps::default(),
            mode: Mode::FirstProtocol,
            seed: 0,
            nogo_precheck: true,
            allow_same_party: false,
        }
    }
}

impl RunConfig {
    pub fn with_rounds(rounds: usize) -> Self {
        Self {
            rounds,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        let positive = [self.delta, t.herm, t.psd, t.lp].iter().all(|v| *v > 0.0);
        if self.rounds == 0
            || !positive
            || self.caps.max_trees == 0
            || self.caps.max_subset < 2
            || self.caps.max_lps == 0
        {
            return Err(Error::InvalidInput("run configuration values must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub rounds: usize,
    pub trees: usize,
    pub lps: usize,
    pub candidates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetReason {
    Rounds,
    MaxTrees,
    MaxLps,
    /// Some mergeable set was larger than the subset cap, so the search
    /// could not be closed off.
    MaxSubset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoundProtocol {
    pub tree: ProtocolTree,
    pub assignment: Vec<f64>,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Protocol(FoundProtocol),
    /// No protocol exists for any number of rounds. The witness is present
    /// when a no-go analyzer settled the question.
    ProvedImpossible { witness: Option<NoGoWitness> },
    BudgetExhausted { reason: BudgetReason, rounds: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub verdict: Verdict,
    pub stats: Stats,
    /// All protocols found; more than one only in exhaustive mode.
    pub protocols: Vec<FoundProtocol>,
}

impl SynthesisResult {
    pub fn protocol(&self) -> Option<&FoundProtocol> {
        match &self.verdict {
            Verdict::Protocol(p) => Some(p),
            _ => None,
        }
    }
}

/// Trees whose roots for `party_subset` share a common point, mergeable with
/// `free_party` measuring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceClass {
    pub party_subset: Vec<usize>,
    pub free_party: usize,
    pub members: Vec<usize>,
    /// All members predate the current round, so the class is not new.
    pub stale: bool,
}

/// Merges at least two trees with `free_party` measuring first.
pub fn merge_and_extend(members: &[&ProtocolTree], free_party: usize) -> Result<ProtocolTree> {
    ProtocolTree::merged(members, free_party)
}

/// Real coordinates of every local generator, cached for LP rows.
struct PartVectors {
    vecs: Vec<Vec<Vec<f64>>>,
    identity: Vec<Vec<f64>>,
}

impl PartVectors {
    fn new(parts: &LocalParts) -> Self {
        let vecs = (0..parts.num_parties())
            .map(|a| parts.party(a).iter().map(|g| g.vectorize().coords).collect())
            .collect();
        let identity = (0..parts.num_parties())
            .map(|a| HermitianOperator::identity(parts.dim(a)).vectorize().coords)
            .collect();
        Self { vecs, identity }
    }
}

/// Searches for coefficients `q >= delta` satisfying every recorded
/// equality and, with `pin`, identity root labels.
pub fn feasibility(
    t: &ProtocolTree,
    parts: &LocalParts,
    pin: bool,
    delta: f64,
    tol: &Tolerances,
) -> Result<Option<Vec<f64>>> {
    feasibility_with(t, &PartVectors::new(parts), pin, delta, tol)
}

fn feasibility_with(
    t: &ProtocolTree,
    pv: &PartVectors,
    pin: bool,
    delta: f64,
    _tol: &Tolerances,
) -> Result<Option<Vec<f64>>> {
    let n = t.num_vars();
    let mut lp = LinearProgram::new(n);
    let mut add_balance = |party: usize, lhs: &[Term], rhs: &[Term]| -> Result<()> {
        let mut rows = vec![vec![0.0; n]; pv.identity[party].len()];
        for (terms, sign) in [(lhs, 1.0), (rhs, -1.0)] {
            for term in terms {
                for (r, v) in pv.vecs[party][term.op].iter().enumerate() {
                    rows[r][term.var] += sign * v;
                }
            }
        }
        for row in rows {
            if row.iter().any(|v| v.abs() > 1e-14) {
                lp.add_row(row, 0.0)?;
            }
        }
        Ok(())
    };
    for eq in &t.constraints().equalities {
        add_balance(eq.party, &eq.lhs, &eq.rhs)?;
    }
    // Child sums hold by construction for merged trees, giving only zero rows.
    for (id, node) in t.nodes().iter().enumerate() {
        let Some(&first) = node.children.first() else { continue };
        let party = t.node(first).party;
        let kids: Vec<Term> = node.children.iter().flat_map(|&c| t.node(c).terms.clone()).collect();
        add_balance(party, &kids, &t.node(t.nearest(id, party)).terms)?;
    }
    if pin {
        for &r in t.roots() {
            let node = t.node(r);
            let target = &pv.identity[node.party];
            let mut rows = vec![vec![0.0; n]; target.len()];
            for term in &node.terms {
                for (i, v) in pv.vecs[node.party][term.op].iter().enumerate() {
                    rows[i][term.var] += v;
                }
            }
            for (row, b) in rows.into_iter().zip(target) {
                lp.add_row(row, *b)?;
            }
        }
    }
    lp.set_all_lower(delta);
    Ok(lp.solve(&SimplexOptions::default())?.solution().map(|s| s.x))
}

fn root_opset(t: &ProtocolTree, party: usize) -> Vec<usize> {
    let mut ops: Vec<usize> = t.node(t.root_of(party)).terms.iter().map(|x| x.op).collect();
    ops.sort_unstable();
    ops.dedup();
    ops
}

enum Stop {
    Found,
    Budget(BudgetReason),
}

struct Search<'a> {
    m: &'a SeparableMeasurement,
    cfg: &'a RunConfig,
    parts: LocalParts,
    pv: PartVectors,
    trees: Vec<ProtocolTree>,
    born: Vec<usize>,
    keys: HashSet<String>,
    pair_memo: HashMap<(usize, Vec<usize>, Vec<usize>), bool>,
    common_memo: HashMap<(usize, Vec<Vec<usize>>), bool>,
    stats: Stats,
    protocols: Vec<FoundProtocol>,
    truncated: bool,
}

impl<'a> Search<'a> {
    fn new(m: &'a SeparableMeasurement, cfg: &'a RunConfig) -> Self {
        let parts = LocalParts::from_measurement(m);
        let pv = PartVectors::new(&parts);
        Self {
            m,
            cfg,
            parts,
            pv,
            trees: Vec::new(),
            born: Vec::new(),
            keys: HashSet::new(),
            pair_memo: HashMap::new(),
            common_memo: HashMap::new(),
            stats: Stats::default(),
            protocols: Vec::new(),
            truncated: false,
        }
    }

    fn tol(&self) -> &Tolerances {
        &self.cfg.tolerances
    }

    fn cone(&self, party: usize, ops: &[usize]) -> Result<Cone> {
        Cone::new(
            ops.iter().map(|&j| self.parts.get(party, j).clone()).collect(),
            self.tol(),
        )
    }

    fn count_lp(&mut self) -> std::result::Result<(), Stop> {
        self.stats.lps += 1;
        if self.stats.lps > self.cfg.caps.max_lps {
            return Err(Stop::Budget(BudgetReason::MaxLps));
        }
        Ok(())
    }

    fn pair_compatible(&mut self, party: usize, x: Vec<usize>, y: Vec<usize>) -> Result<std::result::Result<bool, Stop>> {
        let key = if x <= y { (party, x, y) } else { (party, y, x) };
        if let Some(&v) = self.pair_memo.get(&key) {
            return Ok(Ok(v));
        }
        if let Err(stop) = self.count_lp() {
            return Ok(Err(stop));
        }
        let a = self.cone(party, &key.1)?;
        let b = self.cone(party, &key.2)?;
        let v = nontrivial_intersection(&a, &b, self.tol())?.is_some();
        self.pair_memo.insert(key, v);
        Ok(Ok(v))
    }

    fn common(&mut self, party: usize, mut sets: Vec<Vec<usize>>) -> Result<std::result::Result<bool, Stop>> {
        sets.sort();
        sets.dedup();
        if sets.len() <= 1 {
            return Ok(Ok(true));
        }
        let key = (party, sets);
        if let Some(&v) = self.common_memo.get(&key) {
            return Ok(Ok(v));
        }
        if let Err(stop) = self.count_lp() {
            return Ok(Err(stop));
        }
        let cones = key
            .1
            .iter()
            .map(|s| self.cone(party, s))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Cone> = cones.iter().collect();
        let v = common_point(&refs, self.tol())?.is_some();
        self.common_memo.insert(key, v);
        Ok(Ok(v))
    }

    fn add_tree(&mut self, t: ProtocolTree, round: usize) -> bool {
        if !self.keys.insert(t.canonical_key()) {
            return false;
        }
        self.trees.push(t);
        self.born.push(round);
        self.stats.trees = self.trees.len();
        true
    }

    /// Pinned feasibility and a full check of the implemented measurement.
    fn try_protocol(&mut self, id: usize, round: usize) -> Result<std::result::Result<bool, Stop>> {
        if !self.trees[id].covers(self.m.num_ops()) {
            return Ok(Ok(false));
        }
        if let Err(stop) = self.count_lp() {
            return Ok(Err(stop));
        }
        let Some(a) = feasibility_with(&self.trees[id], &self.pv, true, self.cfg.delta, self.tol())? else {
            return Ok(Ok(false));
        };
        let tree = if self.cfg.allow_same_party {
            compact_same_party(&self.trees[id])
        } else {
            self.trees[id].clone()
        };
        if !verify_protocol(&tree, &a, self.m, &self.parts, self.tol())? {
            return Ok(Ok(false));
        }
        self.protocols.push(FoundProtocol {
            tree,
            assignment: a,
            round,
        });
        Ok(Ok(true))
    }

    fn round_for_party(&mut self, round: usize, free: usize, since: usize) -> Result<Option<Stop>> {
        let p = self.m.num_parties();
        let others: Vec<usize> = (0..p).filter(|&a| a != free).collect();
        let cands: Vec<usize> = (0..self.trees.len())
            .filter(|&i| self.born[i] < round)
            .filter(|&i| self.cfg.allow_same_party || self.trees[i].first_measurer() != Some(free))
            .collect();
        let opsets: Vec<Vec<Vec<usize>>> = cands
            .iter()
            .map(|&i| (0..p).map(|a| root_opset(&self.trees[i], a)).collect())
            .collect();
        let n = cands.len();
        let mut adj = vec![vec![false; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let mut ok = true;
                for &a in &others {
                    match self.pair_compatible(a, opsets[i][a].clone(), opsets[j][a].clone())? {
                        Ok(true) => {}
                        Ok(false) => {
                            ok = false;
                            break;
                        }
                        Err(stop) => return Ok(Some(stop)),
                    }
                }
                adj[i][j] = ok;
                adj[j][i] = ok;
            }
        }
        let max_k = self.cfg.caps.max_subset.min(n);
        for k in 2..=max_k {
            let mut current = Vec::with_capacity(k);
            if let Some(stop) = self.cliques(k, 0, &mut current, &adj, &cands, &opsets, &others, free, round, since)? {
                return Ok(Some(stop));
            }
        }
        Ok(None)
    }

    #[allow(clippy::too_many_arguments)]
    fn cliques(
        &mut self,
        k: usize,
        start: usize,
        current: &mut Vec<usize>,
        adj: &[Vec<bool>],
        cands: &[usize],
        opsets: &[Vec<Vec<usize>>],
        others: &[usize],
        free: usize,
        round: usize,
        since: usize,
    ) -> Result<Option<Stop>> {
        if current.len() == k {
            if k == self.cfg.caps.max_subset
                && (0..cands.len()).any(|v| !current.contains(&v) && current.iter().all(|&c| adj[c][v]))
            {
                self.truncated = true;
            }
            return self.visit(current, cands, opsets, others, free, round, since);
        }
        let need = k - current.len();
        for i in start..cands.len() {
            if cands.len() - i < need {
                break;
            }
            if current.iter().all(|&c| adj[c][i]) {
                current.push(i);
                let r = self.cliques(k, i + 1, current, adj, cands, opsets, others, free, round, since)?;
                current.pop();
                if r.is_some() {
                    return Ok(r);
                }
            }
        }
        Ok(None)
    }

    #[allow(clippy::too_many_arguments)]
    fn visit(
        &mut self,
        subset: &[usize],
        cands: &[usize],
        opsets: &[Vec<Vec<usize>>],
        others: &[usize],
        free: usize,
        round: usize,
        since: usize,
    ) -> Result<Option<Stop>> {
        if !subset.iter().any(|&i| cands[i] >= since) {
            return Ok(None);
        }
        if subset.len() > 2 {
            for &a in others {
                let sets = subset.iter().map(|&i| opsets[i][a].clone()).collect();
                match self.common(a, sets)? {
                    Ok(true) => {}
                    Ok(false) => return Ok(None),
                    Err(stop) => return Ok(Some(stop)),
                }
            }
        }
        self.stats.candidates += 1;
        let merged = {
            let members: Vec<&ProtocolTree> = subset.iter().map(|&i| &self.trees[cands[i]]).collect();
            ProtocolTree::merged(&members, free)?
        };
        if self.keys.contains(&merged.canonical_key()) {
            return Ok(None);
        }
        if let Err(stop) = self.count_lp() {
            return Ok(Some(stop));
        }
        // Constraints only accumulate under merging, so a tree without any
        // positive solution can never become part of a protocol.
        if feasibility_with(&merged, &self.pv, false, 1.0, self.tol())?.is_none() {
            return Ok(None);
        }
        self.add_tree(merged, round);
        if self.trees.len() > self.cfg.caps.max_trees {
            return Ok(Some(Stop::Budget(BudgetReason::MaxTrees)));
        }
        let id = self.trees.len() - 1;
        match self.try_protocol(id, round)? {
            Ok(true) if self.cfg.mode == Mode::FirstProtocol => Ok(Some(Stop::Found)),
            Ok(_) => Ok(None),
            Err(stop) => Ok(Some(stop)),
        }
    }

    fn finish(self, verdict: Verdict) -> SynthesisResult {
        SynthesisResult {
            verdict,
            stats: self.stats,
            protocols: self.protocols,
        }
    }

    fn finish_found_or(self, otherwise: Verdict) -> SynthesisResult {
        if let Some(first) = self.protocols.first().cloned() {
            self.finish(Verdict::Protocol(first))
        } else {
            self.finish(otherwise)
        }
    }
}

/// Checks a candidate protocol: consistent labels, identity roots, and an
/// implemented measurement equal to `m` with positive weights.
pub fn verify_protocol(
    t: &ProtocolTree,
    a: &[f64],
    m: &SeparableMeasurement,
    parts: &LocalParts,
    tol: &Tolerances,
) -> Result<bool> {
    if !t.covers(m.num_ops()) || !t.validate_eq3(parts, a, true, tol)? {
        return Ok(false);
    }
    let ext = extract_measurement(t, parts, a, tol)?;
    let Ok(w) = ext.weights_for(m, tol) else {
        return Ok(false);
    };
    Ok(w.iter().all(|x| *x > 0.0) && ext.completeness_residual()? <= tol.lp)
}

/// Runs the merging search for at most `cfg.rounds` rounds.
pub fn synthesize(m: &SeparableMeasurement, cfg: &RunConfig) -> Result<SynthesisResult> {
    cfg.validate()?;
    let tol = &cfg.tolerances;
    m.completeness_certificate(cfg.delta, tol)
        .map_err(|e| Error::InvalidMeasurement(e.to_string()))?;
    let mut s = Search::new(m, cfg);
    if cfg.nogo_precheck {
        let witness = match corollary1_check(m, tol)? {
            Some(w) => Some(w),
            None => theorem1_check(m, cfg.caps.theorem1_exhaustive_n, tol)?
                .witness()
                .cloned(),
        };
        if let Some(w) = witness {
            return Ok(s.finish(Verdict::ProvedImpossible { witness: Some(w) }));
        }
    }
    for j in 0..m.num_ops() {
        s.add_tree(ProtocolTree::leaf_tree(m.num_parties(), j), 0);
    }
    for id in 0..s.trees.len() {
        match s.try_protocol(id, 0)? {
            Ok(true) if cfg.mode == Mode::FirstProtocol => return Ok(s.finish_found_or(Verdict::ProvedImpossible { witness: None })),
            Ok(_) => {}
            Err(Stop::Budget(reason)) => return Ok(s.finish_found_or(Verdict::BudgetExhausted { reason, rounds: 0 })),
            Err(Stop::Found) => unreachable!("try_protocol never stops with a protocol"),
        }
    }
    let mut since = 0;
    for round in 1..=cfg.rounds {
        let before = s.trees.len();
        s.truncated = false;
        for free in 0..m.num_parties() {
            match s.round_for_party(round, free, since)? {
                None => {}
                Some(Stop::Found) => {
                    s.stats.rounds = round;
                    return Ok(s.finish_found_or(Verdict::BudgetExhausted {
                        reason: BudgetReason::Rounds,
                        rounds: round,
                    }));
                }
                Some(Stop::Budget(reason)) => {
                    s.stats.rounds = round;
                    return Ok(s.finish_found_or(Verdict::BudgetExhausted { reason, rounds: round }));
                }
            }
        }
        s.stats.rounds = round;
        if s.trees.len() == before {
            let otherwise = if s.truncated {
                Verdict::BudgetExhausted {
                    reason: BudgetReason::MaxSubset,
                    rounds: round,
                }
            } else {
                Verdict::ProvedImpossible { witness: None }
            };
            return Ok(s.finish_found_or(otherwise));
        }
        since = before;
    }
    Ok(s.finish_found_or(Verdict::BudgetExhausted {
        reason: BudgetReason::Rounds,
        rounds: cfg.rounds,
    }))
}

/// Maximal sets of `trees` mergeable with each free party. Trees with index
/// below `since` are old; a class made only of old trees is stale.
pub fn build_classes(
    trees: &[ProtocolTree],
    parts: &LocalParts,
    since: usize,
    allow_same_party: bool,
    tol: &Tolerances,
) -> Result<Vec<EquivalenceClass>> {
    let p = parts.num_parties();
    let mut out = Vec::new();
    for free in 0..p {
        let others: Vec<usize> = (0..p).filter(|&a| a != free).collect();
        let cands: Vec<usize> = (0..trees.len())
            .filter(|&i| allow_same_party || trees[i].first_measurer() != Some(free))
            .collect();
        let cone_of = |i: usize, a: usize| -> Result<Cone> {
            Cone::new(
                root_opset(&trees[i], a)
                    .iter()
                    .map(|&j| parts.get(a, j).clone())
                    .collect(),
                tol,
            )
        };
        let mergeable = |set: &[usize]| -> Result<bool> {
            for &a in &others {
                let cones = set.iter().map(|&i| cone_of(i, a)).collect::<Result<Vec<_>>>()?;
                let refs: Vec<&Cone> = cones.iter().collect();
                if common_point(&refs, tol)?.is_none() {
                    return Ok(false);
                }
            }
            Ok(true)
        };
        let mut found: Vec<Vec<usize>> = Vec::new();
        let mut frontier: Vec<Vec<usize>> = Vec::new();
        for (x, &i) in cands.iter().enumerate() {
            for &j in &cands[x + 1..] {
                if mergeable(&[i, j])? {
                    frontier.push(vec![i, j]);
                }
            }
        }
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for set in &frontier {
                let last = *set.last().expect("nonempty");
                let mut extended = false;
                for &c in cands.iter().filter(|&&c| !set.contains(&c)) {
                    let mut bigger = set.clone();
                    bigger.push(c);
                    bigger.sort_unstable();
                    if mergeable(&bigger)? {
                        extended = true;
                        if c > last && !next.contains(&bigger) {
                            next.push(bigger);
                        }
                    }
                }
                if !extended {
                    found.push(set.clone());
                }
            }
            frontier = next;
        }
        for members in found {
            out.push(EquivalenceClass {
                party_subset: others.clone(),
                free_party: free,
                stale: members.iter().all(|&i| i < since),
                members,
            });
        }
    }
    Ok(out)
}

/// Distinct measuring-party sequences over all branches of all protocols,
/// after folding successive same-party measurements.
pub fn orderings(protocols: &[FoundProtocol]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for p in protocols {
        for order in compact_same_party(&p.tree).measurement_orders() {
            if !out.contains(&order) {
                out.push(order);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn parts_of(m: &SeparableMeasurement) -> LocalParts {
        LocalParts::from_measurement(m)
    }

    fn leaf_trees(m: &SeparableMeasurement) -> Vec<ProtocolTree> {
        (0..m.num_ops())
            .map(|j| ProtocolTree::leaf_tree(m.num_parties(), j))
            .collect()
    }

    #[test]
    fn worked_example_first_round_classes() {
        let m = fixtures::ex10();
        let classes = build_classes(&leaf_trees(&m), &parts_of(&m), 0, false, &Tolerances::default()).unwrap();
        assert_eq!(
            classes,
            vec![EquivalenceClass {
                party_subset: vec![1],
                free_party: 0,
                members: vec![0, 1, 2],
                stale: false,
            }]
        );
    }

    #[test]
    fn domino_first_operator_joins_no_class() {
        let m = fixtures::dom9();
        let classes = build_classes(&leaf_trees(&m), &parts_of(&m), 0, false, &Tolerances::default()).unwrap();
        assert!(!classes.is_empty());
        assert!(classes.iter().all(|c| !c.members.contains(&0)));
    }

    #[test]
    fn four_party_merge_rule() {
        let t = Tolerances::default();
        let m = fixtures::fig2_unequal();
        let classes = build_classes(&leaf_trees(&m), &parts_of(&m), 0, false, &t).unwrap();
        assert!(classes.is_empty());
        let m = fixtures::fig2_equal();
        let classes = build_classes(&leaf_trees(&m), &parts_of(&m), 0, false, &t).unwrap();
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[0].free_party, 0);
        assert_eq!(classes[0].party_subset, vec![1, 2, 3]);
    }

    #[test]
    fn identity_leaf_is_feasible_at_one() {
        let m = fixtures::identity_singleton(3);
        let t = ProtocolTree::leaf_tree(3, 0);
        let a = feasibility(&t, &parts_of(&m), true, 1e-7, &Tolerances::default())
            .unwrap()
            .unwrap();
        assert!(a.iter().all(|q| (q - 1.0).abs() < 1e-9));
    }

    #[test]
    fn singleton_measurement_needs_no_rounds() {
        let m = fixtures::identity_singleton(2);
        let r = synthesize(&m, &RunConfig::with_rounds(1)).unwrap();
        let p = r.protocol().unwrap();
        assert_eq!(p.round, 0);
        assert_eq!(orderings(&r.protocols), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn product_basis_two_rounds() {
        let m = fixtures::product_basis();
        let r = synthesize(&m, &RunConfig::with_rounds(2)).unwrap();
        let p = r.protocol().expect("protocol");
        assert_eq!(p.round, 2);
        assert_eq!(p.tree.first_measurer(), Some(0));
        assert_eq!(p.tree.leaves().len(), 4);

        let cfg = RunConfig {
            mode: Mode::Exhaustive,
            ..RunConfig::with_rounds(2)
        };
        let r = synthesize(&m, &cfg).unwrap();
        let orders = orderings(&r.protocols);
        assert!(orders.contains(&vec![0, 1]));
        assert!(orders.contains(&vec![1, 0]));
    }

    #[test]
    fn worked_example_four_rounds() {
        let m = fixtures::ex10();
        let r = synthesize(&m, &RunConfig::with_rounds(4)).unwrap();
        let p = r.protocol().expect("protocol");
        assert_eq!(p.round, 4);
        assert_eq!(p.tree.depth(), 4);
        assert_eq!(p.tree.num_nodes(), 10);
        let longest = orderings(&r.protocols).into_iter().max_by_key(|o| o.len()).unwrap();
        assert_eq!(longest, vec![1, 0, 1, 0]);
        assert!(verify_protocol(&p.tree, &p.assignment, &m, &parts_of(&m), &Tolerances::default()).unwrap());
        // the all-ones assignment also satisfies the pinned system
        let ones = vec![1.0; p.tree.num_vars()];
        assert!(p.tree.validate_eq3(&parts_of(&m), &ones, true, &Tolerances::default()).unwrap());
        for leaf in p.tree.leaves() {
            let cut = p.tree.without_leaf(leaf).unwrap();
            let a = feasibility(&cut, &parts_of(&m), true, 1e-7, &Tolerances::default()).unwrap();
            assert!(a.is_none(), "leaf {leaf}");
        }
    }

    #[test]
    fn worked_example_three_rounds_is_not_enough() {
        let m = fixtures::ex10();
        let r = synthesize(&m, &RunConfig::with_rounds(3)).unwrap();
        assert!(r.protocol().is_none());
    }

    #[test]
    fn product_basis_one_round_is_not_enough() {
        let m = fixtures::product_basis();
        let r = synthesize(&m, &RunConfig::with_rounds(1)).unwrap();
        assert_eq!(
            r.verdict,
            Verdict::BudgetExhausted {
                reason: BudgetReason::Rounds,
                rounds: 1
            }
        );
    }

    #[test]
    fn domino_is_impossible() {
        let m = fixtures::dom9();
        let r = synthesize(&m, &RunConfig::with_rounds(3)).unwrap();
        assert!(matches!(r.verdict, Verdict::ProvedImpossible { witness: Some(_) }));
        let cfg = RunConfig {
            nogo_precheck: false,
            ..RunConfig::with_rounds(6)
        };
        let r = synthesize(&m, &cfg).unwrap();
        assert!(r.protocol().is_none());
    }

    #[test]
    fn incomplete_measurement_is_rejected() {
        let m = fixtures::fig2_unequal();
        assert!(matches!(
            synthesize(&m, &RunConfig::with_rounds(2)),
            Err(Error::InvalidMeasurement(_))
        ));
    }

    #[test]
    fn bad_config_is_rejected() {
        let m = fixtures::product_basis();
        assert!(synthesize(&m, &RunConfig::with_rounds(0)).is_err());
    }
}
