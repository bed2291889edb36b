//! Isomorphism reduction for cells.
//!
//! Two cells are treated as isomorphic when their canonical keys coincide. The
//! key is the value term of the output node, built bottom-up with sorted
//! sibling terms:
//!
//! * a dropped edge, or any op reading a zero-valued source, contributes `#`;
//! * `skip_connect` contributes the source term verbatim;
//! * any other op contributes `(<source term>)@<op name>`.
//!
//! This reproduces the published benchmark's uniqueness rule and reduces the
//! 15625 assignments to exactly 6466 classes. The rule is finer than pure
//! functional equality: zero contributions are kept as `#`-padding and a
//! multi-input node is never itself recognised as zero, so a few degenerate
//! cells stay in separate classes even though they compute identical
//! functions. For the same reason the key, not the reduced edge multiset, is
//! the class identity: [`CanonicalGraph`] carries both.

use super::{enumerate_space, Cell, OpKind, EDGE_SRC, SPACE_SIZE};
use std::collections::HashMap;

/// Value term of a node, the unit of the canonical key.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Term {
    Zero,
    Input,
    Apply(OpKind, Box<Term>),
    Sum(Vec<Term>),
}

impl Term {
    fn render(&self) -> String {
        match self {
            Term::Zero => "#".to_string(),
            Term::Input => "0".to_string(),
            Term::Apply(op, arg) => format!("({})@{}", arg.render(), op.name()),
            Term::Sum(terms) => {
                let mut parts: Vec<String> = terms.iter().map(Term::render).collect();
                parts.sort();
                parts.join("+")
            }
        }
    }
}

fn edge_term(op: OpKind, src: &Term) -> Term {
    if op == OpKind::None || *src == Term::Zero {
        return Term::Zero;
    }
    match op {
        OpKind::SkipConnect => src.clone(),
        _ => Term::Apply(op, Box::new(src.clone())),
    }
}

/// Value terms of nodes 0..=3. Node 1 holds its single edge term unwrapped;
/// nodes 2 and 3 are sums over their incoming edge terms.
fn node_terms(cell: &Cell) -> [Term; 4] {
    let ops = cell.ops();
    let t0 = Term::Input;
    let t1 = edge_term(ops[0], &t0);
    let t2 = Term::Sum(vec![edge_term(ops[1], &t0), edge_term(ops[2], &t1)]);
    let t3 = Term::Sum(vec![
        edge_term(ops[3], &t0),
        edge_term(ops[4], &t1),
        edge_term(ops[5], &t2),
    ]);
    [t0, t1, t2, t3]
}

/// Canonical key of the cell's equivalence class.
pub fn unique_string(cell: &Cell) -> String {
    node_terms(cell)[3].render()
}

/// Per-node value strings `["0", node1, node2, node3]`, as used by the
/// canonical key and by parameter seeding.
pub fn node_value_strings(cell: &Cell) -> [String; 4] {
    let terms = node_terms(cell);
    [
        terms[0].render(),
        terms[1].render(),
        terms[2].render(),
        terms[3].render(),
    ]
}

/// Value term computed by each convolution edge, e.g. `((0)@nor_conv_3x3)@nor_conv_1x1`.
///
/// Edges whose value never reaches the output still get a deterministic term
/// (their parameters cannot affect the network function). Non-conv edges yield
/// `None`.
pub fn conv_seed_terms(cell: &Cell) -> [Option<String>; 6] {
    let nodes = node_value_strings(cell);
    let mut out: [Option<String>; 6] = Default::default();
    for (e, op) in cell.ops().iter().enumerate() {
        if matches!(op, OpKind::NorConv1x1 | OpKind::NorConv3x3) {
            out[e] = Some(format!("({})@{}", nodes[EDGE_SRC[e]], op.name()));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Reduced-graph rendering
// ---------------------------------------------------------------------------

/// One summand of a node value after flattening skip connections.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Atom {
    Zero,
    Input,
    /// Op applied to the (sorted, flattened) atom multiset of its source node.
    Apply(OpKind, Vec<Atom>),
}

/// Flattened summands of nodes 0..=3: skip edges splice the source atoms in.
fn node_atoms(cell: &Cell) -> [Vec<Atom>; 4] {
    let ops = cell.ops();
    let n0 = vec![Atom::Input];
    let atoms_for = |op: OpKind, src: &[Atom], src_is_zero: bool| -> Vec<Atom> {
        if op == OpKind::None || src_is_zero {
            vec![Atom::Zero]
        } else if op == OpKind::SkipConnect {
            src.to_vec()
        } else {
            let mut arg: Vec<Atom> = src.iter().filter(|a| **a != Atom::Zero).cloned().collect();
            arg.sort();
            vec![Atom::Apply(op, arg)]
        }
    };
    let n1 = atoms_for(ops[0], &n0, false);
    let n1_zero = n1 == [Atom::Zero];
    let mut n2 = atoms_for(ops[1], &n0, false);
    n2.extend(atoms_for(ops[2], &n1, n1_zero));
    n2.sort();
    let mut n3 = atoms_for(ops[3], &n0, false);
    n3.extend(atoms_for(ops[4], &n1, n1_zero));
    n3.extend(atoms_for(ops[5], &n2, false));
    n3.sort();
    [n0, n1, n2, n3]
}

/// Reduced computation graph of a cell together with its canonical key.
///
/// Node 0 is the cell input and the highest node id the output. Edge triples
/// `(src, dst, op)` form a multiset; `none` edges, unreachable nodes and pure
/// skip chains are gone, and every remaining intermediate node reaches the
/// output. Equality (and hashing) is by canonical key, so distinct values of
/// this type are exactly the 6466 classes; the edge list itself is coarser,
/// since the benchmark's uniqueness rule also distinguishes zero-padding
/// bookkeeping that has no graph meaning.
#[derive(Debug, Clone)]
pub struct CanonicalGraph {
    key: String,
    num_nodes: usize,
    edges: Vec<(usize, usize, OpKind)>,
}

impl PartialEq for CanonicalGraph {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for CanonicalGraph {}

impl std::hash::Hash for CanonicalGraph {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key.hash(state);
    }
}

impl CanonicalGraph {
    /// Canonical key; the class identity.
    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_intermediates(&self) -> usize {
        self.num_nodes - 2
    }

    /// Sorted multiset of `(src, dst, op)` triples.
    pub fn edges(&self) -> &[(usize, usize, OpKind)] {
        &self.edges
    }

    pub fn output_node(&self) -> usize {
        self.num_nodes - 1
    }
}

const OUTPUT_SENTINEL: usize = usize::MAX;

struct GraphBuilder {
    next_node: usize,
    edges: Vec<(usize, usize, OpKind)>,
}

impl GraphBuilder {
    // Source endpoint holding the summed value of `atoms`.
    fn endpoint(&mut self, atoms: &[Atom]) -> usize {
        if let [single] = atoms {
            match single {
                Atom::Input => return 0,
                Atom::Apply(op, arg) => {
                    let src = self.endpoint(arg);
                    let node = self.alloc();
                    self.edges.push((src, node, *op));
                    return node;
                }
                Atom::Zero => {}
            }
        }
        let node = self.alloc();
        for atom in atoms {
            self.render_into(atom, node);
        }
        node
    }

    // Render one summand of `consumer`.
    fn render_into(&mut self, atom: &Atom, consumer: usize) {
        match atom {
            Atom::Zero => {}
            Atom::Input => self.edges.push((0, consumer, OpKind::SkipConnect)),
            Atom::Apply(op, arg) => {
                let src = self.endpoint(arg);
                self.edges.push((src, consumer, *op));
            }
        }
    }

    fn alloc(&mut self) -> usize {
        let n = self.next_node;
        self.next_node += 1;
        n
    }
}

/// Reduce a cell to its canonical graph.
pub fn canonicalize(cell: &Cell) -> CanonicalGraph {
    let atoms = &node_atoms(cell)[3];
    let mut b = GraphBuilder {
        next_node: 1,
        edges: Vec::new(),
    };
    for atom in atoms {
        b.render_into(atom, OUTPUT_SENTINEL);
    }
    let output = b.next_node;
    let mut edges = b.edges;
    for e in edges.iter_mut() {
        if e.1 == OUTPUT_SENTINEL {
            e.1 = output;
        }
    }
    edges.sort();
    CanonicalGraph {
        key: unique_string(cell),
        num_nodes: output + 1,
        edges,
    }
}

/// Partition of all 15625 local ids into isomorphism classes.
///
/// The class representative ("canonical id") is the minimum local id of the
/// class.
#[derive(Debug, Clone)]
pub struct EquivalenceClasses {
    rep_of: Vec<u32>,
    classes: Vec<(u32, Vec<u32>)>,
}

impl EquivalenceClasses {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Canonical id (class representative) of a local id.
    pub fn representative(&self, local_id: u32) -> u32 {
        self.rep_of[local_id as usize]
    }

    pub fn is_representative(&self, local_id: u32) -> bool {
        self.representative(local_id) == local_id
    }

    /// Members of the class whose representative is `rep`, sorted ascending.
    pub fn members(&self, rep: u32) -> Option<&[u32]> {
        self.classes
            .binary_search_by_key(&rep, |(r, _)| *r)
            .ok()
            .map(|i| self.classes[i].1.as_slice())
    }

    /// `(representative, members)` pairs sorted by representative.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &[u32])> {
        self.classes.iter().map(|(r, m)| (*r, m.as_slice()))
    }

    pub fn representatives(&self) -> impl Iterator<Item = u32> + '_ {
        self.classes.iter().map(|(r, _)| *r)
    }

    /// Class table as JSON: `{canonical_id: [member_ids]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (rep, members) in self.iter() {
            map.insert(
                rep.to_string(),
                serde_json::Value::Array(
                    members
                        .iter()
                        .map(|m| serde_json::Value::from(*m))
                        .collect(),
                ),
            );
        }
        serde_json::Value::Object(map)
    }
}

/// Compute the isomorphism partition of the full space.
pub fn equivalence_classes() -> EquivalenceClasses {
    let mut by_key: HashMap<String, Vec<u32>> = HashMap::new();
    for (id, cell) in enumerate_space() {
        by_key.entry(unique_string(&cell)).or_default().push(id);
    }
    let mut rep_of = vec![0u32; SPACE_SIZE as usize];
    let mut classes: Vec<(u32, Vec<u32>)> = Vec::with_capacity(by_key.len());
    for (_, members) in by_key {
        // enumeration order keeps members sorted; representative = minimum
        let rep = members[0];
        for m in &members {
            rep_of[*m as usize] = rep;
        }
        classes.push((rep, members));
    }
    classes.sort_by_key(|(r, _)| *r);
    EquivalenceClasses { rep_of, classes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellspace::official_ids;
    use sha2::{Digest, Sha256};

    #[test]
    fn all_none_reduces_to_empty_graph() {
        let g = canonicalize(&Cell::new([OpKind::None; 6]));
        assert_eq!(g.num_nodes(), 2);
        assert!(g.edges().is_empty());
        assert_eq!(unique_string(&Cell::new([OpKind::None; 6])), "#+#+#");
    }

    #[test]
    fn skip_from_input_merges() {
        // skip on edge 1 makes node 1 an alias of the input: an op 1->2 equals
        // the same op placed on 0->2 directly
        let a = Cell::decode(
            "|skip_connect~0|+|none~0|nor_conv_3x3~1|+|none~0|none~1|nor_conv_1x1~2|",
        )
        .unwrap();
        let b = Cell::decode(
            "|none~0|+|nor_conv_3x3~0|none~1|+|none~0|none~1|nor_conv_1x1~2|",
        )
        .unwrap();
        assert_eq!(unique_string(&a), unique_string(&b));
        assert_eq!(canonicalize(&a), canonicalize(&b));
    }

    #[test]
    fn isomorphic_pair_991_3365() {
        // the published example pair: both reduce to the same class
        let ids = official_ids();
        let a = Cell::from_local_id(ids.local_of_official(991));
        let b = Cell::from_local_id(ids.local_of_official(3365));
        assert_eq!(
            a.encode(),
            "|skip_connect~0|+|nor_conv_3x3~0|nor_conv_1x1~1|+|nor_conv_3x3~0|avg_pool_3x3~1|nor_conv_1x1~2|"
        );
        assert_eq!(
            b.encode(),
            "|skip_connect~0|+|nor_conv_1x1~0|nor_conv_3x3~1|+|avg_pool_3x3~0|nor_conv_3x3~1|nor_conv_1x1~2|"
        );
        assert_ne!(a, b);
        assert_eq!(unique_string(&a), unique_string(&b));
        let (ga, gb) = (canonicalize(&a), canonicalize(&b));
        assert_eq!(ga, gb);
        assert_eq!(ga.edges(), gb.edges());
    }

    #[test]
    fn class_count_is_6466() {
        let classes = equivalence_classes();
        assert_eq!(classes.len(), 6466);
        let total: usize = classes.iter().map(|(_, m)| m.len()).sum();
        assert_eq!(total, 15_625);
    }

    #[test]
    fn key_digest_matches_published_rule() {
        // byte-exact check of the uniqueness rule over the whole space
        let mut hasher = Sha256::new();
        let mut first = true;
        for (_, cell) in enumerate_space() {
            if !first {
                hasher.update(b"\n");
            }
            first = false;
            hasher.update(unique_string(&cell).as_bytes());
        }
        assert_eq!(
            format!("{:x}", hasher.finalize()),
            "684c7ac326557d2a4bec1a04dab216eb2860c6bd0710e7681ebd6e53fea99b66"
        );
    }

    #[test]
    fn conv_only_cell_is_singleton() {
        let classes = equivalence_classes();
        let all_c3 = Cell::new([OpKind::NorConv3x3; 6]);
        let rep = classes.representative(all_c3.local_id());
        assert_eq!(classes.members(rep).unwrap(), &[all_c3.local_id()]);
    }

    #[test]
    fn representative_is_class_minimum() {
        let classes = equivalence_classes();
        for (rep, members) in classes.iter() {
            assert_eq!(*members.iter().min().unwrap(), rep);
            assert_eq!(classes.representative(rep), rep);
        }
    }

    #[test]
    fn canonical_graphs_are_class_invariants() {
        let mut by_key: HashMap<String, CanonicalGraph> = HashMap::new();
        for (_, cell) in enumerate_space() {
            let g = canonicalize(&cell);
            if let Some(prev) = by_key.get(g.key()) {
                assert_eq!(prev.edges(), g.edges(), "class {} has two graphs", g.key());
                assert_eq!(prev.num_nodes(), g.num_nodes());
            } else {
                by_key.insert(g.key().to_string(), g);
            }
        }
        assert_eq!(by_key.len(), 6466);
        // every edge list is free of `none` and every intermediate node reaches
        // the output
        for g in by_key.values() {
            for (src, dst, op) in g.edges() {
                assert_ne!(*op, OpKind::None);
                assert!(*src < g.output_node());
                assert!(*dst > 0);
            }
            for node in 1..g.output_node() {
                let mut reach = vec![node];
                let mut hit = false;
                while let Some(n) = reach.pop() {
                    if n == g.output_node() {
                        hit = true;
                        break;
                    }
                    reach.extend(g.edges().iter().filter(|(s, _, _)| *s == n).map(|(_, d, _)| *d));
                }
                assert!(hit, "node {node} of class {} cannot reach output", g.key());
            }
        }
    }

    #[test]
    fn seed_terms_cover_conv_edges() {
        let cell = Cell::decode(
            "|nor_conv_1x1~0|+|nor_conv_1x1~0|none~1|+|nor_conv_1x1~0|skip_connect~1|none~2|",
        )
        .unwrap();
        let terms = conv_seed_terms(&cell);
        assert_eq!(terms[0].as_deref(), Some("(0)@nor_conv_1x1"));
        assert_eq!(terms[1].as_deref(), Some("(0)@nor_conv_1x1"));
        assert!(terms[2].is_none());
        assert_eq!(terms[3].as_deref(), Some("(0)@nor_conv_1x1"));
        assert!(terms[4].is_none());
        assert!(terms[5].is_none());
    }
}
