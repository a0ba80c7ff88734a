//! Normalization passes. Each one leaves the implemented measurement
//! unchanged and is idempotent.

use super::{LocalParts, Node, NodeId, ProtocolTree, Term};
use crate::error::{Error, Result};
use crate::hermitian::proportional;
use crate::tolerance::Tolerances;

/// Splices out every single-outcome measurement: the lone child's children
/// (or leaf operator) move up to its parent.
pub fn prune_unitary_rounds(t: &ProtocolTree) -> ProtocolTree {
    let mut t = t.clone();
    let mut stack = vec![t.last_root()];
    while let Some(id) = stack.pop() {
        while t.nodes[id].children.len() == 1 {
            let c = t.nodes[id].children[0];
            let grandchildren = std::mem::take(&mut t.nodes[c].children);
            for &g in &grandchildren {
                t.nodes[g].parent = Some(id);
            }
            if grandchildren.is_empty() {
                t.nodes[id].leaf_op = t.nodes[c].leaf_op;
            }
            t.nodes[id].children = grandchildren;
        }
        stack.extend(t.nodes[id].children.iter().copied());
    }
    t.rebuild()
}

/// Folds a measurement that immediately follows another one by the same
/// party into it, composing the outcomes.
pub fn compact_same_party(t: &ProtocolTree) -> ProtocolTree {
    let mut t = t.clone();
    let mut stack = vec![t.last_root()];
    while let Some(id) = stack.pop() {
        loop {
            let kids = t.nodes[id].children.clone();
            let mut changed = false;
            let mut next = Vec::with_capacity(kids.len());
            for c in kids {
                let party = t.nodes[c].party;
                if t.measurer(c) == Some(party) {
                    let grandchildren = std::mem::take(&mut t.nodes[c].children);
                    for &g in &grandchildren {
                        t.nodes[g].parent = Some(id);
                    }
                    next.extend(grandchildren);
                    changed = true;
                } else {
                    next.push(c);
                }
            }
            t.nodes[id].children = next;
            if !changed {
                break;
            }
        }
        stack.extend(t.nodes[id].children.iter().copied());
    }
    t.rebuild()
}

/// Removes measurements with proportional outcomes. Proportional siblings
/// merge into one outcome; the branches they led to are regrouped under a
/// single following measurement, with the probability of each branch folded
/// into the labels of that measurement.
///
/// Returns the new tree and an assignment extending `a` with the fresh
/// coefficients the rescaling introduces.
pub fn eliminate_coin_flips(
    t: &ProtocolTree,
    parts: &LocalParts,
    a: &[f64],
    tol: &Tolerances,
) -> Result<(ProtocolTree, Vec<f64>)> {
    t.check_bound(a)?;
    let mut t = compact_same_party(t);
    let mut a = a.to_vec();
    let guard = 64 * (t.nodes.len() + 1);
    for _ in 0..guard {
        let Some((node, group)) = find_coin_flip(&t, parts, &a, tol)? else {
            return Ok((t.rebuild(), a));
        };
        merge_group(&mut t, &mut a, parts, node, &group)?;
    }
    Err(Error::InvalidInput("coin-flip elimination did not settle".into()))
}

/// First node, in depth-first order, having two proportional children;
/// returns it with the positions of all children proportional to the first
/// such child.
fn find_coin_flip(
    t: &ProtocolTree,
    parts: &LocalParts,
    a: &[f64],
    tol: &Tolerances,
) -> Result<Option<(NodeId, Vec<usize>)>> {
    let mut stack = vec![t.last_root()];
    while let Some(id) = stack.pop() {
        let kids = &t.nodes[id].children;
        let values = kids
            .iter()
            .map(|&c| t.label_value(c, parts, a))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..kids.len() {
            let group: Vec<usize> = (0..kids.len())
                .filter(|&j| j == i || (j > i && proportional(&values[j], &values[i], tol.herm).ok().flatten().is_some()))
                .collect();
            if group.len() >= 2 {
                return Ok(Some((id, group)));
            }
        }
        stack.extend(kids.iter().rev().copied());
    }
    Ok(None)
}

fn merge_group(
    t: &mut ProtocolTree,
    a: &mut Vec<f64>,
    parts: &LocalParts,
    node: NodeId,
    group: &[usize],
) -> Result<()> {
    let kids = t.nodes[node].children.clone();
    let members: Vec<NodeId> = group.iter().map(|&g| kids[g]).collect();
    let beta = t.nodes[members[0]].party;
    let traces = members
        .iter()
        .map(|&c| t.label_value(c, parts, a).map(|v| v.trace()))
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = traces.iter().sum();
    let probs: Vec<f64> = traces.iter().map(|tr| tr / total).collect();

    let merged_terms: Vec<Term> = members
        .iter()
        .flat_map(|&c| t.nodes[c].terms.clone())
        .collect();
    let star = t.push(Node {
        party: beta,
        terms: merged_terms,
        children: vec![],
        parent: Some(node),
        leaf_op: None,
    });
    let mut new_kids = Vec::with_capacity(kids.len() - members.len() + 1);
    for (pos, &c) in kids.iter().enumerate() {
        if pos == group[0] {
            new_kids.push(star);
        } else if !group.contains(&pos) {
            new_kids.push(c);
        }
    }
    t.nodes[node].children = new_kids;

    let next: Vec<Option<usize>> = members.iter().map(|&c| t.measurer(c)).collect();
    let Some(beta2) = next.iter().flatten().copied().min() else {
        t.nodes[star].leaf_op = t.nodes[members[0]].leaf_op;
        return Ok(());
    };
    let outer = t.nodes[t.nearest(node, beta2)].terms.clone();
    let mut star_kids = Vec::new();
    for (i, &c) in members.iter().enumerate() {
        let p = probs[i];
        let branch = std::mem::take(&mut t.nodes[c].children);
        for &g in &branch {
            rescale_subtree(t, a, g, beta, beta2, p);
        }
        if next[i] == Some(beta2) {
            for &g in &branch {
                t.nodes[g].parent = Some(star);
            }
            star_kids.extend(branch);
        } else {
            let terms = scaled_terms(t, a, beta2, &outer, p);
            let leaf_op = if branch.is_empty() { t.nodes[c].leaf_op } else { None };
            let w = t.push(Node {
                party: beta2,
                terms,
                children: branch.clone(),
                parent: Some(star),
                leaf_op,
            });
            for &g in &branch {
                t.nodes[g].parent = Some(w);
            }
            star_kids.push(w);
        }
    }
    t.nodes[star].children = star_kids;
    Ok(())
}

fn scaled_terms(t: &mut ProtocolTree, a: &mut Vec<f64>, party: usize, terms: &[Term], s: f64) -> Vec<Term> {
    terms
        .iter()
        .map(|term| {
            let var = t.fresh_var(party, term.op);
            a.push(a[term.var] * s);
            Term { op: term.op, var }
        })
        .collect()
}

/// Scales labels of `beta` nodes by `1/p` and of `beta2` nodes by `p` in the
/// subtree at `id`, using fresh coefficients.
fn rescale_subtree(t: &mut ProtocolTree, a: &mut Vec<f64>, id: NodeId, beta: usize, beta2: usize, p: f64) {
    let mut stack = vec![id];
    while let Some(n) = stack.pop() {
        let party = t.nodes[n].party;
        let s = if party == beta {
            Some(1.0 / p)
        } else if party == beta2 {
            Some(p)
        } else {
            None
        };
        if let Some(s) = s {
            let terms = t.nodes[n].terms.clone();
            t.nodes[n].terms = scaled_terms(t, a, party, &terms, s);
        }
        stack.extend(t.nodes[n].children.iter().copied());
    }
}
