//! Machine-readable reports and their text renderings.

use std::fmt::Write as _;

use loccforge::io::MatrixRows;
use loccforge::nogo::{NoGoKind, NoGoWitness};
use loccforge::SeparableMeasurement;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct ValidateReport {
    pub valid: bool,
    pub parties: Vec<String>,
    pub operators: usize,
    pub diagnostics: Vec<String>,
    pub weights: Option<Vec<f64>>,
    pub residual: Option<f64>,
    pub unique_weights: Option<bool>,
}

impl ValidateReport {
    pub fn text(&self) -> String {
        let mut s = String::new();
        if self.valid {
            let _ = writeln!(
                s,
                "valid: {} operators on parties {}",
                self.operators,
                self.parties.join(",")
            );
            if let (Some(r), Some(u)) = (self.residual, self.unique_weights) {
                let _ = writeln!(s, "complete: residual {r:.3e}, weights {}", if u { "unique" } else { "not unique" });
            }
        } else {
            let _ = writeln!(s, "invalid:");
            for d in &self.diagnostics {
                let _ = writeln!(s, "  {d}");
            }
        }
        s
    }
}

/// A no-go witness with one-based operator numbers and party names.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    pub kind: &'static str,
    pub operators: Vec<usize>,
    pub labels: Vec<String>,
    pub parties: [String; 2],
}

impl WitnessReport {
    pub fn new(w: &NoGoWitness, m: &SeparableMeasurement) -> Self {
        let kind = match w.kind {
            NoGoKind::SingularExtremeRay => "singular-extreme-ray",
            NoGoKind::Bipartition => "bipartition",
        };
        let name = |a: usize| m.parties()[a].name.clone();
        Self {
            kind,
            operators: w.partition.iter().map(|j| j + 1).collect(),
            labels: w.partition.iter().map(|&j| m.labels()[j].clone()).collect(),
            parties: [name(w.parties.0), name(w.parties.1)],
        }
    }

    fn text(&self) -> String {
        let ops: Vec<String> = self.operators.iter().map(ToString::to_string).collect();
        format!(
            "{} on {} and {}: operator(s) {} ({})",
            self.kind,
            self.parties[0],
            self.parties[1],
            ops.join(","),
            self.labels.join(",")
        )
    }
}

#[derive(Debug, Serialize)]
pub struct NoGoReport {
    pub singular_extreme_ray: Option<WitnessReport>,
    pub bipartition: Option<WitnessReport>,
    /// Whether every bipartition was scanned.
    pub exhaustive: bool,
}

impl NoGoReport {
    pub fn found(&self) -> bool {
        self.singular_extreme_ray.is_some() || self.bipartition.is_some()
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        match &self.singular_extreme_ray {
            Some(w) => {
                let _ = writeln!(s, "witness: {}", w.text());
            }
            None => s.push_str("no singular extreme ray on two parties\n"),
        }
        match &self.bipartition {
            Some(w) => {
                let _ = writeln!(s, "witness: {}", w.text());
            }
            None if self.exhaustive => s.push_str("no bipartition with disjoint cones\n"),
            None => s.push_str("no bipartition with disjoint cones among singletons and pairs\n"),
        }
        if !self.found() {
            s.push_str("no obstruction found (this does not show that a protocol exists)\n");
        }
        s
    }
}

#[derive(Debug, Serialize)]
pub struct ProtocolSummary {
    pub round: usize,
    /// Longest measurement order over all branches.
    pub order: Vec<String>,
    pub orders: Vec<Vec<String>>,
    pub leaves: usize,
    pub nodes: usize,
    pub depth: usize,
    pub weights: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Serialize)]
pub struct SynthesisReport {
    pub verdict: &'static str,
    pub reason: Option<String>,
    pub rounds: usize,
    pub trees: usize,
    pub lps: usize,
    pub candidates: usize,
    pub protocol: Option<ProtocolSummary>,
    pub protocols_found: usize,
    pub witness: Option<WitnessReport>,
}

impl SynthesisReport {
    pub fn text(&self) -> String {
        let mut s = String::new();
        match (&self.protocol, &self.witness) {
            (Some(p), _) => {
                let _ = writeln!(
                    s,
                    "protocol found in round {}: order {}; {} leaves",
                    p.round,
                    p.order.join(","),
                    p.leaves
                );
                let _ = writeln!(s, "completeness residual {:.3e}", p.residual);
                if self.protocols_found > 1 {
                    let _ = writeln!(s, "{} protocols, orders:", self.protocols_found);
                    for o in &p.orders {
                        let _ = writeln!(s, "  {}", o.join(","));
                    }
                }
            }
            (None, Some(w)) => {
                let _ = writeln!(s, "impossible: {}", w.text());
            }
            (None, None) => {
                let _ = write!(s, "{}", self.verdict);
                if let Some(r) = &self.reason {
                    let _ = write!(s, " ({r})");
                }
                s.push('\n');
            }
        }
        let _ = writeln!(
            s,
            "rounds {}, trees {}, candidates {}, LPs {}",
            self.rounds, self.trees, self.candidates, self.lps
        );
        s
    }
}

#[derive(Debug, Serialize)]
pub struct TailEntryReport {
    pub kraus: String,
    pub probability: f64,
    pub unitaries: Vec<MatrixRows>,
    pub residual: f64,
}

#[derive(Debug, Serialize)]
pub struct TailReport {
    pub leaf: usize,
    pub operator: String,
    pub share: f64,
    pub entries: Vec<TailEntryReport>,
}

#[derive(Debug, Serialize)]
pub struct LiftReport {
    pub coin_rounds: usize,
    pub max_residual: f64,
    pub tails: Vec<TailReport>,
}

impl LiftReport {
    pub fn text(&self) -> String {
        let mut s = String::new();
        for t in &self.tails {
            let entries: Vec<String> = t
                .entries
                .iter()
                .map(|e| format!("{} p={:.6}", e.kraus, e.probability))
                .collect();
            let _ = writeln!(s, "leaf {} ({}): {}", t.leaf, t.operator, entries.join(", "));
        }
        let _ = writeln!(
            s,
            "{} tails, {} coin round(s), max residual {:.3e}",
            self.tails.len(),
            self.coin_rounds,
            self.max_residual
        );
        s
    }
}
