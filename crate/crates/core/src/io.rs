//! File formats: measurement documents, saved protocols and DOT export.
//!
//! Complex entries are `[re, im]` pairs and matrices are lists of rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::hermitian::{CMatrix, HermitianOperator};
use crate::measurement::{Diagnostic, KrausData, KrausProduct, Party, ProductOperator, SeparableMeasurement};
use crate::synth::RunConfig;
use crate::tolerance::Tolerances;
use crate::tree::{ConstraintSystem, ProtocolTree};

pub type ComplexEntry = [f64; 2];
pub type MatrixRows = Vec<Vec<ComplexEntry>>;

#[derive(Debug, Error, PartialEq)]
pub enum DocumentError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("{0}")]
    Content(String),
}

impl From<serde_json::Error> for DocumentError {
    fn from(e: serde_json::Error) -> Self {
        DocumentError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartySpec {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub label: String,
    pub parts: Vec<MatrixRows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementDocument {
    pub parties: Vec<PartySpec>,
    #[serde(default)]
    pub operators: Vec<OperatorSpec>,
    /// Product Kraus operators, each given by its local factors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<OperatorSpec>>,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub meta: serde_json::Map<String, serde_json::Value>,
}

pub fn matrix_rows(m: &CMatrix) -> MatrixRows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn from_rows(rows: &MatrixRows, what: &str, dim: usize) -> Result<CMatrix, DocumentError> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        let cols = rows.first().map_or(0, Vec::len);
        return Err(DocumentError::Shape(format!(
            "{what} is {}x{cols}, expected {dim}x{dim}",
            rows.len()
        )));
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

impl MeasurementDocument {
    pub fn from_measurement(m: &SeparableMeasurement) -> Self {
        let parties = m
            .parties()
            .iter()
            .map(|p| PartySpec {
                name: p.name.clone(),
                dim: p.dim,
            })
            .collect();
        let operators = m
            .ops()
            .iter()
            .zip(m.labels())
            .map(|(op, label)| OperatorSpec {
                label: label.clone(),
                parts: op.parts.iter().map(|h| matrix_rows(h.matrix())).collect(),
            })
            .collect();
        let kraus = m.kraus().map(|k| {
            k.products
                .iter()
                .zip(&k.labels)
                .map(|(prod, label)| OperatorSpec {
                    label: label.clone(),
                    parts: prod.parts.iter().map(matrix_rows).collect(),
                })
                .collect()
        });
        Self {
            parties,
            operators,
            kraus,
            meta: serde_json::Map::new(),
        }
    }

    /// Builds and validates the measurement. Without positive operators the
    /// Kraus products define them; with both, each Kraus product is mapped to
    /// the operator its positive product is proportional to.
    pub fn to_measurement(&self, tol: &Tolerances) -> Result<SeparableMeasurement, DocumentError> {
        let parties: Vec<Party> = self.parties.iter().map(|p| Party::new(&p.name, p.dim)).collect();
        let kraus = match &self.kraus {
            Some(list) => Some(self.kraus_products(list)?),
            None => None,
        };
        if self.operators.is_empty() {
            if let Some((products, labels)) = kraus {
                return SeparableMeasurement::from_kraus(parties, products, labels, tol)
                    .map_err(|e| DocumentError::Content(e.to_string()));
            }
        }
        let mut ops = Vec::with_capacity(self.operators.len());
        for (j, spec) in self.operators.iter().enumerate() {
            self.check_part_count(j, spec)?;
            let mut parts = Vec::with_capacity(spec.parts.len());
            for (alpha, rows) in spec.parts.iter().enumerate() {
                let what = format!("operator {} part {}", j + 1, alpha + 1);
                let m = from_rows(rows, &what, self.parties[alpha].dim)?;
                let h = HermitianOperator::new(m, tol.herm)
                    .map_err(|_| DocumentError::Content(format!("{what} is not Hermitian")))?;
                parts.push(h);
            }
            ops.push(ProductOperator::new(parts));
        }
        let labels = self.operators.iter().map(|o| o.label.clone()).collect();
        let mut m = SeparableMeasurement::unvalidated(parties, ops, labels);
        let diags = m.validate(tol);
        if !diags.is_empty() {
            return Err(DocumentError::Invalid(diags));
        }
        if let Some((products, labels)) = kraus {
            let mut op_of = Vec::with_capacity(products.len());
            for (i, prod) in products.iter().enumerate() {
                let positive = ProductOperator::new(prod.parts.iter().map(HermitianOperator::gram).collect());
                let mut found = None;
                for (j, op) in m.ops().iter().enumerate() {
                    let hit = positive
                        .proportional_to(op, tol.herm)
                        .map_err(|e| DocumentError::Content(e.to_string()))?;
                    if hit.is_some() {
                        found = Some(j);
                        break;
                    }
                }
                op_of.push(found.ok_or_else(|| {
                    DocumentError::Content(format!("Kraus product {} matches no operator", i + 1))
                })?);
            }
            m = m.with_kraus(KrausData {
                products,
                labels,
                op_of,
            });
        }
        Ok(m)
    }

    fn check_part_count(&self, j: usize, spec: &OperatorSpec) -> Result<(), DocumentError> {
        if spec.parts.len() != self.parties.len() {
            return Err(DocumentError::Shape(format!(
                "operator {} has {} parts for {} parties",
                j + 1,
                spec.parts.len(),
                self.parties.len()
            )));
        }
        Ok(())
    }

    fn kraus_products(&self, list: &[OperatorSpec]) -> Result<(Vec<KrausProduct>, Vec<String>), DocumentError> {
        let mut products = Vec::with_capacity(list.len());
        for (j, spec) in list.iter().enumerate() {
            self.check_part_count(j, spec)?;
            let parts = spec
                .parts
                .iter()
                .enumerate()
                .map(|(alpha, rows)| {
                    from_rows(rows, &format!("Kraus {} part {}", j + 1, alpha + 1), self.parties[alpha].dim)
                })
                .collect::<Result<Vec<_>, _>>()?;
            products.push(KrausProduct { parts });
        }
        Ok((products, list.iter().map(|s| s.label.clone()).collect()))
    }
}

pub fn parse_measurement_document(text: &str) -> Result<MeasurementDocument, DocumentError> {
    Ok(serde_json::from_str(text)?)
}

pub fn parse_measurement(text: &str, tol: &Tolerances) -> Result<SeparableMeasurement, DocumentError> {
    parse_measurement_document(text)?.to_measurement(tol)
}

pub fn serialize_measurement(m: &SeparableMeasurement) -> String {
    to_json(&MeasurementDocument::from_measurement(m))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

pub fn parse_config(text: &str) -> Result<RunConfig, DocumentError> {
    let cfg: RunConfig = serde_json::from_str(text)?;
    cfg.validate().map_err(|e| DocumentError::Content(e.to_string()))?;
    Ok(cfg)
}

/// Hex SHA-256 of the JSON form of a constraint system.
pub fn constraints_digest(c: &ConstraintSystem) -> String {
    let bytes = serde_json::to_vec(c).expect("constraints serialize");
    Sha256::digest(&bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub const PROTOCOL_FORMAT: &str = "loccforge-protocol/1";

/// A synthesized protocol saved for later lifting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolDocument {
    pub format: String,
    pub parties: Vec<PartySpec>,
    pub labels: Vec<String>,
    pub round: usize,
    pub orders: Vec<Vec<String>>,
    pub tree: ProtocolTree,
    pub assignment: Vec<f64>,
    pub constraints_digest: String,
}

impl ProtocolDocument {
    pub fn new(m: &SeparableMeasurement, tree: &ProtocolTree, assignment: &[f64], round: usize) -> Self {
        let names: Vec<String> = m.parties().iter().map(|p| p.name.clone()).collect();
        let orders = tree
            .measurement_orders()
            .into_iter()
            .map(|o| o.into_iter().map(|a| names[a].clone()).collect())
            .collect();
        Self {
            format: PROTOCOL_FORMAT.to_string(),
            parties: m
                .parties()
                .iter()
                .map(|p| PartySpec {
                    name: p.name.clone(),
                    dim: p.dim,
                })
                .collect(),
            labels: m.labels().to_vec(),
            round,
            orders,
            tree: tree.clone(),
            assignment: assignment.to_vec(),
            constraints_digest: constraints_digest(tree.constraints()),
        }
    }

    pub fn parse(text: &str) -> Result<Self, DocumentError> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.format != PROTOCOL_FORMAT {
            return Err(DocumentError::Content(format!("unknown protocol format {}", doc.format)));
        }
        if constraints_digest(doc.tree.constraints()) != doc.constraints_digest {
            return Err(DocumentError::Content("constraints digest does not match".into()));
        }
        if doc.assignment.len() != doc.tree.num_vars() {
            return Err(DocumentError::Content(format!(
                "assignment has {} values for {} variables",
                doc.assignment.len(),
                doc.tree.num_vars()
            )));
        }
        Ok(doc)
    }

    /// Whether this protocol was saved for a measurement with the same
    /// parties and labels as `m`.
    pub fn matches(&self, m: &SeparableMeasurement) -> bool {
        self.labels == m.labels()
            && self.parties.len() == m.num_parties()
            && self.parties.iter().zip(m.parties()).all(|(a, b)| a.name == b.name && a.dim == b.dim)
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz digraph of a tree, left to right with the roots ranked
/// together. Captions show the party and its label, numeric when an
/// assignment is given; leaves also name their operator.
pub fn export_dot(t: &ProtocolTree, m: &SeparableMeasurement, assignment: Option<&[f64]>) -> String {
    let names: Vec<&str> = m.parties().iter().map(|p| p.name.as_str()).collect();
    let caption = |id: usize| {
        let node = t.node(id);
        let terms: Vec<String> = node
            .terms
            .iter()
            .map(|term| {
                let gen = format!("{}[{}]", names[node.party], m.labels()[term.op]);
                match assignment {
                    Some(a) => format!("{:.6}*{gen}", a[term.var]),
                    None => {
                        let v = t.vars()[term.var];
                        format!("q{}_{}*{gen}", v.op + 1, v.k + 1)
                    }
                }
            })
            .collect();
        let mut s = format!("{}: {}", names[node.party], terms.join(" + "));
        if node.children.is_empty() {
            if let Some(op) = node.leaf_op {
                let _ = write!(s, "\\n-> {}", m.labels()[op]);
            }
        }
        escape(&s)
    };
    let mut out = String::from("digraph protocol {\n  rankdir=LR;\n  node [shape=box, fontname=\"monospace\"];\n");
    out.push_str("  { rank=same;");
    for &r in t.roots() {
        let _ = write!(out, " n{r};");
    }
    out.push_str(" }\n");
    // stable order: node ids of a rebuilt tree follow roots then depth-first order
    let mut ids: BTreeMap<usize, String> = BTreeMap::new();
    for id in 0..t.num_nodes() {
        ids.insert(id, caption(id));
    }
    for (id, c) in &ids {
        let _ = writeln!(out, "  n{id} [label=\"{c}\"];");
    }
    for pair in t.roots().windows(2) {
        let _ = writeln!(out, "  n{} -> n{} [style=dashed, arrowhead=none];", pair[0], pair[1]);
    }
    for id in 0..t.num_nodes() {
        for &c in &t.node(id).children {
            let _ = writeln!(out, "  n{id} -> n{c};");
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::synth::{synthesize, RunConfig};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn round_trip_all_fixtures() {
        for (name, m) in fixtures::all_complete() {
            let text = serialize_measurement(&m);
            let doc = parse_measurement_document(&text).unwrap();
            assert_eq!(doc, MeasurementDocument::from_measurement(&m), "{name}");
            let back = doc.to_measurement(&tol()).unwrap();
            assert_eq!(serialize_measurement(&back), text, "{name}");
            assert_eq!(back.kraus().map(|k| k.op_of.clone()), m.kraus().map(|k| k.op_of.clone()));
        }
    }

    #[test]
    fn ex10_document_has_five_operators() {
        let m = parse_measurement(&serialize_measurement(&fixtures::ex10()), &tol()).unwrap();
        assert_eq!(m.num_ops(), 5);
        assert_eq!(m.num_parties(), 2);
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let mut doc = MeasurementDocument::from_measurement(&fixtures::product_basis());
        doc.operators[0].parts[0] = matrix_rows(&CMatrix::identity(3, 3));
        assert!(matches!(doc.to_measurement(&tol()), Err(DocumentError::Shape(_))));
    }

    #[test]
    fn empty_operator_list_is_rejected() {
        let mut doc = MeasurementDocument::from_measurement(&fixtures::product_basis());
        doc.operators.clear();
        assert_eq!(doc.to_measurement(&tol()).unwrap_err(), DocumentError::Invalid(vec![Diagnostic::NoOperators]));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_measurement("{\n  \"parties\": [,\n}", &tol()).unwrap_err();
        assert!(matches!(err, DocumentError::Syntax { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn duplicate_and_non_psd_parts_are_reported() {
        let mut doc = MeasurementDocument::from_measurement(&fixtures::product_basis());
        doc.operators[1] = doc.operators[0].clone();
        doc.operators[2].parts[0] = matrix_rows(HermitianOperator::diag(&[1.0, -1.0]).matrix());
        let Err(DocumentError::Invalid(d)) = doc.to_measurement(&tol()) else {
            panic!("expected diagnostics");
        };
        assert!(d.contains(&Diagnostic::DuplicateProduct { first: 0, second: 1 }));
        assert!(d.contains(&Diagnostic::NotPsd { op: 2, party: 0 }));
    }

    #[test]
    fn leaf_tree_dot_is_a_two_node_chain() {
        let m = fixtures::ex10();
        let dot = export_dot(&ProtocolTree::leaf_tree(2, 3), &m, None);
        assert_eq!(dot.matches("[label=").count(), 2);
        assert_eq!(dot.matches(" -> ").count(), 1);
        assert!(dot.contains("{ rank=same; n0; n1; }"));
        assert!(dot.contains("rankdir=LR"));
    }

    #[test]
    fn protocol_document_round_trip_and_dot() {
        let m = fixtures::ex10();
        let r = synthesize(&m, &RunConfig::with_rounds(4)).unwrap();
        let p = r.protocol().unwrap();
        let doc = ProtocolDocument::new(&m, &p.tree, &p.assignment, p.round);
        let text = to_json(&doc);
        let back = ProtocolDocument::parse(&text).unwrap();
        assert_eq!(back, doc);
        assert!(back.matches(&m));
        assert!(back.orders.contains(&vec!["B".to_string(), "A".into(), "B".into(), "A".into()]));

        let dot = export_dot(&p.tree, &m, Some(&p.assignment));
        assert_eq!(dot, export_dot(&back.tree, &m, Some(&back.assignment)));
        assert_eq!(dot.matches("[label=").count(), 10);
        assert_eq!(dot.matches("\\n-> ").count(), 5);

        let mut tampered = doc.clone();
        tampered.constraints_digest = "0".repeat(64);
        assert!(ProtocolDocument::parse(&to_json(&tampered)).is_err());
    }

    #[test]
    fn config_round_trip() {
        let cfg = RunConfig::with_rounds(3);
        assert_eq!(parse_config(&to_json(&cfg)).unwrap(), cfg);
        assert_eq!(parse_config("{\"rounds\": 2}").unwrap().rounds, 2);
        assert!(parse_config("{\"rounds\": 0}").is_err());
    }
}
