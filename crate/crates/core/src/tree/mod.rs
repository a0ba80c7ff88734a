//! Protocol trees.
//!
//! A tree holds one root per party, arranged in a chain. Only the last root
//! carries a body: a measurement whose outcomes are child nodes, each of
//! which may be followed by further measurements. Every node belongs to a
//! party and is labeled by a symbolic nonnegative combination
//! `sum_k q_k G_k` of that party's local generators, with the coefficients
//! `q_k` kept as variables until an assignment is supplied.
//!
//! Structural rules:
//! * all children of a node belong to one party `b` (the measuring party),
//!   and their labels sum to the label of the nearest `b`-node at or above
//!   the parent, falling back to the `b`-root;
//! * a leaf implements the product over parties of the nearest labels above
//!   it, including itself.

mod passes;

pub use passes::{compact_same_party, eliminate_coin_flips, prune_unitary_rounds};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{tensor, HermitianOperator};
use crate::measurement::SeparableMeasurement;
use crate::tolerance::Tolerances;

pub type NodeId = usize;
pub type VarId = usize;

/// Per-party generator operators that node labels refer to by index.
#[derive(Debug, Clone)]
pub struct LocalParts {
    parts: Vec<Vec<HermitianOperator>>,
}

impl LocalParts {
    pub fn new(parts: Vec<Vec<HermitianOperator>>) -> Self {
        Self { parts }
    }

    /// Generator `j` of party `a` is the local part `a` of operator `j`.
    pub fn from_measurement(m: &SeparableMeasurement) -> Self {
        Self {
            parts: (0..m.num_parties()).map(|a| m.party_parts(a)).collect(),
        }
    }

    pub fn num_parties(&self) -> usize {
        self.parts.len()
    }

    pub fn party(&self, party: usize) -> &[HermitianOperator] {
        &self.parts[party]
    }

    pub fn get(&self, party: usize, op: usize) -> &HermitianOperator {
        &self.parts[party][op]
    }

    pub fn dim(&self, party: usize) -> usize {
        self.parts[party][0].dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Term {
    pub op: usize,
    pub var: VarId,
}

/// Coefficient variable `q_{op,k}` of one party.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Var {
    pub party: usize,
    pub op: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub party: usize,
    pub terms: Vec<Term>,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
    pub leaf_op: Option<usize>,
}

/// `sum(lhs) = sum(rhs)` as operators of `party`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equality {
    pub party: usize,
    pub lhs: Vec<Term>,
    pub rhs: Vec<Term>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSystem {
    pub equalities: Vec<Equality>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTree {
    num_parties: usize,
    nodes: Vec<Node>,
    roots: Vec<NodeId>,
    vars: Vec<Var>,
    constraints: ConstraintSystem,
    depth: usize,
}

impl ProtocolTree {
    /// Chain of one node per party, each labeled `q K_op^(a)`; the last
    /// node is the leaf for `op`.
    pub fn leaf_tree(num_parties: usize, op: usize) -> Self {
        let mut t = Self::empty(num_parties);
        for a in 0..num_parties {
            let var = t.fresh_var(a, op);
            let id = t.push(Node {
                party: a,
                terms: vec![Term { op, var }],
                children: vec![],
                parent: None,
                leaf_op: None,
            });
            t.roots.push(id);
        }
        let last = *t.roots.last().expect("at least one party");
        t.nodes[last].leaf_op = Some(op);
        t
    }

    fn empty(num_parties: usize) -> Self {
        Self {
            num_parties,
            nodes: Vec::new(),
            roots: Vec::new(),
            vars: Vec::new(),
            constraints: ConstraintSystem::default(),
            depth: 0,
        }
    }

    pub fn num_parties(&self) -> usize {
        self.num_parties
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    /// Roots in chain order; the last one carries the body.
    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    pub fn last_root(&self) -> NodeId {
        *self.roots.last().expect("tree has roots")
    }

    pub fn root_of(&self, party: usize) -> NodeId {
        *self
            .roots
            .iter()
            .find(|&&r| self.nodes[r].party == party)
            .expect("one root per party")
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn constraints(&self) -> &ConstraintSystem {
        &self.constraints
    }

    /// Number of measurement rounds on the longest branch.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub(crate) fn fresh_var(&mut self, party: usize, op: usize) -> VarId {
        let k = self
            .vars
            .iter()
            .filter(|v| v.party == party && v.op == op)
            .count();
        self.vars.push(Var { party, op, k });
        self.vars.len() - 1
    }

    /// The nearest node of `party` at or above `node`, else that party's root.
    pub fn nearest(&self, node: NodeId, party: usize) -> NodeId {
        let mut cur = Some(node);
        while let Some(id) = cur {
            if self.nodes[id].party == party {
                return id;
            }
            cur = self.nodes[id].parent;
        }
        self.root_of(party)
    }

    /// Party measuring at `node`, i.e. the party of its children.
    pub fn measurer(&self, node: NodeId) -> Option<usize> {
        self.nodes[node].children.first().map(|&c| self.nodes[c].party)
    }

    /// Party of the first measurement, `None` for a tree without rounds.
    pub fn first_measurer(&self) -> Option<usize> {
        self.measurer(self.last_root())
    }

    /// Leaves in depth-first order from the last root.
    pub fn leaves(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![self.last_root()];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id];
            if n.children.is_empty() {
                out.push(id);
            } else {
                stack.extend(n.children.iter().rev());
            }
        }
        out
    }

    /// Operator indices attached to the leaves, in leaf order.
    pub fn leaf_ops(&self) -> Vec<Option<usize>> {
        self.leaves().iter().map(|&l| self.nodes[l].leaf_op).collect()
    }

    /// True if every operator `0..n` sits at some leaf.
    pub fn covers(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for op in self.leaf_ops().into_iter().flatten() {
            if op < n {
                seen[op] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Numeric value of a list of terms of one party.
    pub fn terms_value(
        &self,
        party: usize,
        terms: &[Term],
        parts: &LocalParts,
        a: &[f64],
    ) -> Result<HermitianOperator> {
        let mut acc = HermitianOperator::zeros(parts.dim(party));
        for t in terms {
            let q = a
                .get(t.var)
                .ok_or_else(|| Error::UnboundVariable(format!("q{}", t.var)))?;
            acc.axpy(*q, parts.get(party, t.op))?;
        }
        Ok(acc)
    }

    pub fn label_value(&self, node: NodeId, parts: &LocalParts, a: &[f64]) -> Result<HermitianOperator> {
        let n = &self.nodes[node];
        self.terms_value(n.party, &n.terms, parts, a)
    }

    fn check_bound(&self, a: &[f64]) -> Result<()> {
        if a.len() < self.vars.len() {
            return Err(Error::UnboundVariable(format!("q{}", a.len())));
        }
        Ok(())
    }

    /// Checks that children of every measuring node sum to the label they
    /// refine, that every recorded equality holds and, with `pins`, that each
    /// root label is the identity.
    pub fn validate_eq3(&self, parts: &LocalParts, a: &[f64], pins: bool, tol: &Tolerances) -> Result<bool> {
        self.check_bound(a)?;
        let mut stack = vec![self.last_root()];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id];
            if n.children.is_empty() {
                continue;
            }
            let b = self.nodes[n.children[0]].party;
            let mut sum = HermitianOperator::zeros(parts.dim(b));
            for &c in &n.children {
                if self.nodes[c].party != b {
                    return Ok(false);
                }
                sum.axpy(1.0, &self.label_value(c, parts, a)?)?;
                stack.push(c);
            }
            let target = self.label_value(self.nearest(id, b), parts, a)?;
            if sum.distance(&target) > tol.lp * (1.0 + target.norm()) {
                return Ok(false);
            }
        }
        for eq in &self.constraints.equalities {
            let l = self.terms_value(eq.party, &eq.lhs, parts, a)?;
            let r = self.terms_value(eq.party, &eq.rhs, parts, a)?;
            if l.distance(&r) > tol.lp * (1.0 + l.norm()) {
                return Ok(false);
            }
        }
        if pins && !self.identity_pins_hold(parts, a, tol)? {
            return Ok(false);
        }
        Ok(true)
    }

    pub fn identity_pins_hold(&self, parts: &LocalParts, a: &[f64], tol: &Tolerances) -> Result<bool> {
        self.check_bound(a)?;
        for &r in &self.roots {
            let party = self.nodes[r].party;
            let id = HermitianOperator::identity(parts.dim(party));
            if self.label_value(r, parts, a)?.distance(&id) > tol.lp * (1.0 + id.norm()) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Key invariant under root reordering, sibling reordering and variable
    /// renaming: party-tagged shapes with sorted operator multisets.
    pub fn canonical_key(&self) -> String {
        let last = self.last_root();
        let mut roots: Vec<String> = self
            .roots
            .iter()
            .filter(|&&r| r != last)
            .map(|&r| self.label_key(r))
            .collect();
        roots.sort();
        format!("{}|{}", roots.join(","), self.subtree_key(last))
    }

    fn label_key(&self, id: NodeId) -> String {
        let n = &self.nodes[id];
        let mut ops: Vec<usize> = n.terms.iter().map(|t| t.op).collect();
        ops.sort_unstable();
        let ops: Vec<String> = ops.iter().map(ToString::to_string).collect();
        format!("{}:{}", n.party, ops.join("+"))
    }

    fn subtree_key(&self, id: NodeId) -> String {
        let n = &self.nodes[id];
        let mut kids: Vec<String> = n.children.iter().map(|&c| self.subtree_key(c)).collect();
        kids.sort();
        let leaf = n.leaf_op.map(|o| format!("#{o}")).unwrap_or_default();
        format!("{}{}({})", self.label_key(id), leaf, kids.join(";"))
    }

    /// Measuring parties along every root-to-leaf branch, in leaf order.
    pub fn measurement_orders(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for leaf in self.leaves() {
            let mut path = Vec::new();
            let mut cur = leaf;
            while let Some(p) = self.nodes[cur].parent {
                path.push(self.nodes[cur].party);
                cur = p;
            }
            path.reverse();
            out.push(path);
        }
        out
    }

    /// The tree with `leaf` detached from its parent. Labels and constraints
    /// are untouched, so the parent's children no longer need to balance.
    pub fn without_leaf(&self, leaf: NodeId) -> Result<Self> {
        let node = self.nodes.get(leaf).ok_or_else(|| Error::InvalidInput(format!("no node {leaf}")))?;
        let Some(parent) = node.parent.filter(|_| node.children.is_empty()) else {
            return Err(Error::InvalidInput(format!("node {leaf} is not a leaf")));
        };
        let mut t = self.clone();
        t.nodes[parent].children.retain(|&c| c != leaf);
        if t.nodes[parent].children.is_empty() {
            t.nodes[parent].leaf_op = None;
        }
        Ok(t.rebuild())
    }

    /// Gives `leaf` one child per entry of `probs`, each labeled by its
    /// probability times the leaf's label with fresh coefficients appended
    /// to `a`. Existing node ids stay valid.
    pub(crate) fn split_leaf(&mut self, leaf: NodeId, probs: &[f64], a: &mut Vec<f64>) -> Vec<NodeId> {
        let party = self.nodes[leaf].party;
        let op = self.nodes[leaf].leaf_op;
        let terms = self.nodes[leaf].terms.clone();
        let mut kids = Vec::with_capacity(probs.len());
        for &p in probs {
            let scaled = terms
                .iter()
                .map(|term| {
                    let var = self.fresh_var(party, term.op);
                    a.push(a[term.var] * p);
                    Term { op: term.op, var }
                })
                .collect();
            kids.push(self.push(Node {
                party,
                terms: scaled,
                children: vec![],
                parent: Some(leaf),
                leaf_op: op,
            }));
        }
        self.nodes[leaf].children = kids.clone();
        self.nodes[leaf].leaf_op = None;
        self.depth = self.compute_depth(self.last_root());
        kids
    }

    /// Copies the reachable part of the arena into a fresh one, fixing
    /// parents and depth. Variables and constraints are kept as they are.
    pub(crate) fn rebuild(&self) -> Self {
        let mut t = Self {
            num_parties: self.num_parties,
            nodes: Vec::new(),
            roots: Vec::new(),
            vars: self.vars.clone(),
            constraints: self.constraints.clone(),
            depth: 0,
        };
        let last = self.last_root();
        for &r in &self.roots {
            let id = if r == last {
                self.copy_subtree(r, None, &mut t)
            } else {
                let n = &self.nodes[r];
                t.push(Node {
                    party: n.party,
                    terms: n.terms.clone(),
                    children: vec![],
                    parent: None,
                    leaf_op: None,
                })
            };
            t.roots.push(id);
        }
        t.depth = t.compute_depth(t.last_root());
        t
    }

    fn copy_subtree(&self, id: NodeId, parent: Option<NodeId>, t: &mut Self) -> NodeId {
        let n = &self.nodes[id];
        let new_id = t.push(Node {
            party: n.party,
            terms: n.terms.clone(),
            children: vec![],
            parent,
            leaf_op: if n.children.is_empty() { n.leaf_op } else { None },
        });
        let kids: Vec<NodeId> = n
            .children
            .iter()
            .map(|&c| self.copy_subtree(c, Some(new_id), t))
            .collect();
        t.nodes[new_id].children = kids;
        new_id
    }

    fn compute_depth(&self, id: NodeId) -> usize {
        self.nodes[id]
            .children
            .iter()
            .map(|&c| 1 + self.compute_depth(c))
            .max()
            .unwrap_or(0)
    }

    /// Joins `members` into one tree whose roots for every party other than
    /// `free` are identified, and whose new `free`-root measures with one
    /// outcome per member. Records the equalities of the identified roots.
    pub(crate) fn merged(members: &[&ProtocolTree], free: usize) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::SubsetTooSmall(members.len()));
        }
        let p = members[0].num_parties;
        if members.iter().any(|m| m.num_parties != p) || free >= p {
            return Err(Error::InvalidInput("members disagree on the party count".into()));
        }
        let mut t = Self::empty(p);
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        // (node offset, var offset) per member
        let mut offsets = Vec::with_capacity(members.len());
        for m in members {
            let var_off = t.vars.len();
            let node_off = t.nodes.len();
            for v in &m.vars {
                let k = counts.entry((v.party, v.op)).or_insert(0);
                t.vars.push(Var {
                    party: v.party,
                    op: v.op,
                    k: *k,
                });
                *k += 1;
            }
            let shift = |terms: &[Term]| -> Vec<Term> {
                terms
                    .iter()
                    .map(|x| Term {
                        op: x.op,
                        var: x.var + var_off,
                    })
                    .collect()
            };
            for n in &m.nodes {
                t.nodes.push(Node {
                    party: n.party,
                    terms: shift(&n.terms),
                    children: n.children.iter().map(|c| c + node_off).collect(),
                    parent: n.parent.map(|x| x + node_off),
                    leaf_op: n.leaf_op,
                });
            }
            for eq in &m.constraints.equalities {
                t.constraints.equalities.push(Equality {
                    party: eq.party,
                    lhs: shift(&eq.lhs),
                    rhs: shift(&eq.rhs),
                });
            }
            offsets.push(node_off);
        }
        let root_in = |i: usize, party: usize| members[i].root_of(party) + offsets[i];
        let mut roots = Vec::with_capacity(p);
        for a in (0..p).filter(|&a| a != free) {
            let rep = t.nodes[root_in(0, a)].terms.clone();
            for i in 1..members.len() {
                t.constraints.equalities.push(Equality {
                    party: a,
                    lhs: rep.clone(),
                    rhs: t.nodes[root_in(i, a)].terms.clone(),
                });
            }
            roots.push(t.push(Node {
                party: a,
                terms: rep,
                children: vec![],
                parent: None,
                leaf_op: None,
            }));
        }
        let mut free_terms = Vec::new();
        let mut outcomes = Vec::with_capacity(members.len());
        for (i, m) in members.iter().enumerate() {
            let label = t.nodes[root_in(i, free)].terms.clone();
            free_terms.extend_from_slice(&label);
            let last = m.last_root() + offsets[i];
            let children = t.nodes[last].children.clone();
            let leaf_op = t.nodes[last].leaf_op;
            let id = t.push(Node {
                party: free,
                terms: label,
                children: children.clone(),
                parent: None,
                leaf_op,
            });
            for c in children {
                t.nodes[c].parent = Some(id);
            }
            outcomes.push(id);
        }
        let free_root = t.push(Node {
            party: free,
            terms: free_terms,
            children: outcomes.clone(),
            parent: None,
            leaf_op: None,
        });
        for o in outcomes {
            t.nodes[o].parent = Some(free_root);
        }
        roots.push(free_root);
        t.roots = roots;
        Ok(t.rebuild())
    }
}

/// Incremental construction of trees with known coefficient values, for
/// tests, generators and hand-built protocols.
#[derive(Debug, Clone)]
pub struct TreeBuilder {
    tree: ProtocolTree,
    values: Vec<f64>,
}

impl TreeBuilder {
    /// Starts from one root per party, in the given chain order, each root
    /// labeled by `(generator, coefficient)` pairs.
    pub fn new(num_parties: usize, roots: Vec<(usize, Vec<(usize, f64)>)>) -> Self {
        let mut b = Self {
            tree: ProtocolTree::empty(num_parties),
            values: Vec::new(),
        };
        for (party, terms) in roots {
            let terms = b.make_terms(party, &terms);
            let id = b.tree.push(Node {
                party,
                terms,
                children: vec![],
                parent: None,
                leaf_op: None,
            });
            b.tree.roots.push(id);
        }
        b
    }

    fn make_terms(&mut self, party: usize, terms: &[(usize, f64)]) -> Vec<Term> {
        terms
            .iter()
            .map(|&(op, q)| {
                let var = self.tree.fresh_var(party, op);
                self.values.push(q);
                Term { op, var }
            })
            .collect()
    }

    pub fn last_root(&self) -> NodeId {
        self.tree.last_root()
    }

    pub fn child(&mut self, parent: NodeId, party: usize, terms: &[(usize, f64)]) -> NodeId {
        let terms = self.make_terms(party, terms);
        let id = self.tree.push(Node {
            party,
            terms,
            children: vec![],
            parent: Some(parent),
            leaf_op: None,
        });
        self.tree.nodes[parent].children.push(id);
        id
    }

    pub fn leaf(&mut self, node: NodeId, op: usize) {
        self.tree.nodes[node].leaf_op = Some(op);
    }

    pub fn finish(self) -> (ProtocolTree, Vec<f64>) {
        (self.tree.rebuild(), self.values)
    }
}

/// One distinct product operator implemented by a tree: unit-trace local
/// parts, total weight, and the leaves realizing it.
#[derive(Debug, Clone)]
pub struct ExtractedOp {
    pub parts: Vec<HermitianOperator>,
    pub weight: f64,
    pub leaves: Vec<NodeId>,
    pub leaf_op: Option<usize>,
}

/// The separable measurement a tree implements under an assignment.
#[derive(Debug, Clone)]
pub struct ExtractedMeasurement {
    pub ops: Vec<ExtractedOp>,
}

/// Groups leaf products by proportionality and sums their weights.
pub fn extract_measurement(
    t: &ProtocolTree,
    parts: &LocalParts,
    a: &[f64],
    tol: &Tolerances,
) -> Result<ExtractedMeasurement> {
    t.check_bound(a)?;
    let mut ops: Vec<ExtractedOp> = Vec::new();
    for leaf in t.leaves() {
        let mut weight = 1.0;
        let mut normalized = Vec::with_capacity(t.num_parties);
        for party in 0..t.num_parties {
            let v = t.label_value(t.nearest(leaf, party), parts, a)?;
            let tr = v.trace();
            if tr <= tol.herm {
                return Err(Error::InvalidMeasurement(format!(
                    "leaf {leaf} has a vanishing local part for party {party}"
                )));
            }
            weight *= tr;
            normalized.push(v.scale(1.0 / tr));
        }
        let slot = ops.iter_mut().find(|o| same_parts(&o.parts, &normalized, tol.lp));
        match slot {
            Some(o) => {
                o.weight += weight;
                o.leaves.push(leaf);
            }
            None => ops.push(ExtractedOp {
                parts: normalized,
                weight,
                leaves: vec![leaf],
                leaf_op: t.nodes[leaf].leaf_op,
            }),
        }
    }
    Ok(ExtractedMeasurement { ops })
}

fn same_parts(x: &[HermitianOperator], y: &[HermitianOperator], tol: f64) -> bool {
    x.iter().zip(y).all(|(a, b)| a.distance(b) <= tol)
}

impl ExtractedMeasurement {
    /// Weights per operator of `m`; fails if some implemented product is not
    /// proportional to any operator of `m`.
    pub fn weights_for(&self, m: &SeparableMeasurement, tol: &Tolerances) -> Result<Vec<f64>> {
        let mut w = vec![0.0; m.num_ops()];
        'outer: for o in &self.ops {
            for (j, op) in m.ops().iter().enumerate() {
                let mut lambda = 1.0;
                let mut ok = true;
                for (x, y) in o.parts.iter().zip(&op.parts) {
                    let tr = y.trace();
                    if x.distance(&y.scale(1.0 / tr)) > tol.lp {
                        ok = false;
                        break;
                    }
                    lambda /= tr;
                }
                if ok {
                    w[j] += o.weight * lambda;
                    continue 'outer;
                }
            }
            return Err(Error::InvalidMeasurement(
                "tree implements an operator outside the measurement".into(),
            ));
        }
        Ok(w)
    }

    /// `|| sum_j w_j K_j - I ||` over the full space.
    pub fn completeness_residual(&self) -> Result<f64> {
        let first = self
            .ops
            .first()
            .ok_or_else(|| Error::InvalidMeasurement("no leaves".into()))?;
        let dim: usize = first.parts.iter().map(HermitianOperator::dim).product();
        let mut acc = HermitianOperator::zeros(dim);
        for o in &self.ops {
            acc.axpy(o.weight, &tensor(&o.parts)?)?;
        }
        Ok(acc.distance(&HermitianOperator::identity(dim)))
    }

    /// Same operator set up to proportionality and same total weights,
    /// irrespective of order.
    pub fn equivalent(&self, other: &ExtractedMeasurement, tol: f64) -> bool {
        if self.ops.len() != other.ops.len() {
            return false;
        }
        let mut used = vec![false; other.ops.len()];
        for o in &self.ops {
            let hit = other.ops.iter().enumerate().find(|(i, x)| {
                !used[*i]
                    && same_parts(&o.parts, &x.parts, tol)
                    && (o.weight - x.weight).abs() <= tol * (1.0 + o.weight.abs())
            });
            match hit {
                Some((i, _)) => used[i] = true,
                None => return false,
            }
        }
        true
    }
}
