//! Event trees, stagings, and the staged-tree to CEG transformation.
//!
//! Node ids are opaque strings compared lexicographically wherever an order
//! is needed. Stage colours are block indices after sorting blocks by their
//! smallest member.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub label: String,
}

impl Edge {
    pub fn new(from: impl Into<String>, to: impl Into<String>, label: impl Into<String>) -> Self {
        Self { from: from.into(), to: to.into(), label: label.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventTree {
    root: String,
    edges: Vec<Edge>,
    children: HashMap<String, Vec<usize>>,
}

impl EventTree {
    /// Assembles a tree without checking it; see [`validate_tree`].
    pub fn from_parts(root: impl Into<String>, edges: Vec<Edge>) -> Self {
        let mut children: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, e) in edges.iter().enumerate() {
            children.entry(e.from.clone()).or_default().push(i);
        }
        Self { root: root.into(), edges, children }
    }

    pub fn new(root: impl Into<String>, edges: Vec<Edge>) -> Result<Self> {
        let t = Self::from_parts(root, edges);
        validate_tree(&t)?;
        Ok(t)
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn nodes(&self) -> BTreeSet<&str> {
        let mut nodes = BTreeSet::from([self.root.as_str()]);
        for e in &self.edges {
            nodes.insert(&e.from);
            nodes.insert(&e.to);
        }
        nodes
    }

    pub fn out_edges<'a>(&'a self, node: &str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.children.get(node).into_iter().flatten().map(move |&i| &self.edges[i])
    }

    pub fn is_leaf(&self, node: &str) -> bool {
        !self.children.contains_key(node)
    }

    /// Non-leaf nodes, sorted.
    pub fn situations(&self) -> Vec<&str> {
        self.nodes().into_iter().filter(|n| !self.is_leaf(n)).collect()
    }

    pub fn leaves(&self) -> Vec<&str> {
        self.nodes().into_iter().filter(|n| self.is_leaf(n)).collect()
    }

    /// Sorted outgoing labels of `node`.
    pub fn label_multiset(&self, node: &str) -> Vec<&str> {
        let mut labels: Vec<&str> = self.out_edges(node).map(|e| e.label.as_str()).collect();
        labels.sort_unstable();
        labels
    }

    /// Groups situations by their outgoing label multiset; only situations in
    /// the same group can share a stage.
    pub fn label_groups(&self) -> HashMap<String, usize> {
        let mut keys: BTreeMap<Vec<&str>, usize> = BTreeMap::new();
        let mut out = HashMap::new();
        for s in self.situations() {
            let next = keys.len();
            let g = *keys.entry(self.label_multiset(s)).or_insert(next);
            out.insert(s.to_string(), g);
        }
        out
    }

    /// Nodes in post-order (children before parents), starting from the root.
    fn post_order(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut stack = vec![(self.root.as_str(), false)];
        while let Some((node, expanded)) = stack.pop() {
            if expanded {
                out.push(node);
                continue;
            }
            stack.push((node, true));
            for e in self.out_edges(node) {
                stack.push((&e.to, false));
            }
        }
        out
    }
}

/// Checks that the edges form a tree rooted at `root`.
pub fn validate_tree(tree: &EventTree) -> Result<()> {
    let mut pairs = BTreeSet::new();
    let mut parent: HashMap<&str, &str> = HashMap::new();
    for e in &tree.edges {
        if !pairs.insert((e.from.as_str(), e.to.as_str())) {
            return Err(Error::DuplicateEdge { from: e.from.clone(), to: e.to.clone() });
        }
        if e.to == tree.root || e.from == e.to {
            return Err(Error::CycleDetected { from: e.from.clone(), to: e.to.clone() });
        }
        if parent.insert(&e.to, &e.from).is_some() {
            return Err(Error::MultipleParents { node: e.to.clone() });
        }
    }

    let mut reached = BTreeSet::new();
    let mut stack = vec![tree.root.as_str()];
    while let Some(n) = stack.pop() {
        reached.insert(n);
        stack.extend(tree.out_edges(n).map(|e| e.to.as_str()));
    }
    for node in tree.nodes() {
        if reached.contains(node) {
            continue;
        }
        // Every node has at most one parent, so walking up either reaches a
        // parentless node or revisits one.
        let mut seen = BTreeSet::new();
        let mut cur = node;
        while let Some(&p) = parent.get(cur) {
            if !seen.insert(cur) {
                return Err(Error::CycleDetected { from: p.to_string(), to: cur.to_string() });
            }
            cur = p;
        }
        return Err(Error::DisconnectedNode { node: node.to_string() });
    }
    Ok(())
}

/// A partition of the situations into stages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Staging {
    blocks: Vec<Vec<String>>,
}

impl Staging {
    /// Normalizes the block order: members sorted, blocks by smallest member.
    pub fn new(blocks: Vec<Vec<String>>) -> Self {
        let mut blocks: Vec<Vec<String>> = blocks
            .into_iter()
            .map(|mut b| {
                b.sort();
                b
            })
            .collect();
        blocks.sort();
        Self { blocks }
    }

    pub fn singletons(tree: &EventTree) -> Self {
        Self::new(tree.situations().into_iter().map(|s| vec![s.to_string()]).collect())
    }

    pub fn blocks(&self) -> &[Vec<String>] {
        &self.blocks
    }

    /// Stage colour of every situation.
    pub fn colours(&self) -> HashMap<&str, usize> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(c, b)| b.iter().map(move |s| (s.as_str(), c)))
            .collect()
    }

    pub fn validate(&self, tree: &EventTree) -> Result<()> {
        let situations: BTreeSet<&str> = tree.situations().into_iter().collect();
        let mut covered = BTreeSet::new();
        for block in &self.blocks {
            let Some(first) = block.first() else {
                return Err(Error::InvalidStaging("empty stage".into()));
            };
            for s in block {
                if !situations.contains(s.as_str()) {
                    return Err(Error::InvalidStaging(format!("`{s}` is not a situation")));
                }
                if !covered.insert(s.as_str()) {
                    return Err(Error::InvalidStaging(format!("`{s}` appears in two stages")));
                }
            }
            let labels = tree.label_multiset(first);
            if let Some(bad) = block.iter().find(|s| tree.label_multiset(s) != labels) {
                return Err(Error::InvalidStaging(format!(
                    "`{bad}` and `{first}` have different edge labels"
                )));
            }
        }
        if let Some(missing) = situations.difference(&covered).next() {
            return Err(Error::InvalidStaging(format!("`{missing}` is not in any stage")));
        }
        Ok(())
    }
}

/// Groups situations whose coloured rooted subtrees are isomorphic.
///
/// One bottom-up pass: a leaf's signature is 0, a situation's signature
/// interns its stage colour together with the sorted multiset of
/// `(edge label, child signature)` pairs.
pub fn positions_from_staging(tree: &EventTree, staging: &Staging) -> Result<Vec<Vec<String>>> {
    staging.validate(tree)?;
    let colours = staging.colours();
    let mut interned: HashMap<(usize, Vec<(&str, usize)>), usize> = HashMap::new();
    let mut signature: HashMap<&str, usize> = HashMap::new();
    for node in tree.post_order() {
        if tree.is_leaf(node) {
            signature.insert(node, 0);
            continue;
        }
        let mut kids: Vec<(&str, usize)> =
            tree.out_edges(node).map(|e| (e.label.as_str(), signature[e.to.as_str()])).collect();
        kids.sort_unstable();
        let next = interned.len() + 1;
        let id = *interned.entry((colours[node], kids)).or_insert(next);
        signature.insert(node, id);
    }

    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for s in tree.situations() {
        groups.entry(signature[s]).or_default().push(s.to_string());
    }
    let mut positions: Vec<Vec<String>> = groups
        .into_values()
        .map(|mut g| {
            g.sort();
            g
        })
        .collect();
    positions.sort();
    Ok(positions)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ceg {
    /// Position sets, sorted by smallest member.
    pub positions: Vec<Vec<String>>,
    /// Representative situation of each position (its smallest member).
    pub representatives: Vec<String>,
    /// Stage colour of each position.
    pub colours: Vec<usize>,
    pub edges: Vec<Edge>,
    pub sink: String,
}

impl Ceg {
    /// Non-sink nodes plus the sink.
    pub fn node_count(&self) -> usize {
        self.positions.len() + 1
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph ceg {\n  rankdir=LR;\n");
        for (rep, &c) in self.representatives.iter().zip(&self.colours) {
            let _ = writeln!(
                out,
                "  \"{}\" [style=filled, fillcolor=\"{}\"];",
                escape(rep),
                palette(c)
            );
        }
        let _ = writeln!(out, "  \"{}\" [shape=doublecircle];", escape(&self.sink));
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{}\"];",
                escape(&e.from),
                escape(&e.to),
                escape(&e.label)
            );
        }
        out.push_str("}\n");
        out
    }
}

pub fn build_ceg(tree: &EventTree, staging: &Staging) -> Result<Ceg> {
    let positions = positions_from_staging(tree, staging)?;
    let colours_by_node = staging.colours();
    let mut rep_of: HashMap<&str, &str> = HashMap::new();
    for p in &positions {
        for s in p {
            rep_of.insert(s, &p[0]);
        }
    }
    let nodes = tree.nodes();
    let mut sink = String::from("w_inf");
    while nodes.contains(sink.as_str()) {
        sink.push('_');
    }

    let mut edges = Vec::new();
    for p in &positions {
        let rep = &p[0];
        for e in tree.out_edges(rep) {
            let to = if tree.is_leaf(&e.to) { sink.clone() } else { rep_of[e.to.as_str()].to_string() };
            edges.push(Edge::new(rep.clone(), to, e.label.clone()));
        }
    }
    Ok(Ceg {
        representatives: positions.iter().map(|p| p[0].clone()).collect(),
        colours: positions.iter().map(|p| colours_by_node[p[0].as_str()]).collect(),
        positions,
        edges,
        sink,
    })
}

/// DOT rendering of a tree, filling situations by stage colour when given.
pub fn tree_to_dot(tree: &EventTree, staging: Option<&Staging>) -> String {
    let colours = staging.map(Staging::colours).unwrap_or_default();
    let mut out = String::from("digraph tree {\n  rankdir=LR;\n");
    for n in tree.nodes() {
        match colours.get(n) {
            Some(&c) => {
                let _ = writeln!(out, "  \"{}\" [style=filled, fillcolor=\"{}\"];", escape(n), palette(c));
            }
            None => {
                let _ = writeln!(out, "  \"{}\";", escape(n));
            }
        }
    }
    for e in tree.edges() {
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"{}\"];",
            escape(&e.from),
            escape(&e.to),
            escape(&e.label)
        );
    }
    out.push_str("}\n");
    out
}

fn palette(colour: usize) -> &'static str {
    const COLOURS: [&str; 12] = [
        "#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69", "#fccde5",
        "#d9d9d9", "#bc80bd", "#ccebc5", "#ffed6f",
    ];
    COLOURS[colour % COLOURS.len()]
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// JSON interchange: `{"root": id, "edges": [[src, dst, label], ...], "staging": [[ids...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub root: String,
    pub edges: Vec<(String, String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub staging: Option<Vec<Vec<String>>>,
}

impl TreeDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Validated tree and staging; singleton stages when none is given.
    pub fn build(&self) -> Result<(EventTree, Staging)> {
        let edges = self.edges.iter().map(|(a, b, l)| Edge::new(a, b, l)).collect();
        let tree = EventTree::new(self.root.clone(), edges)?;
        let staging = match &self.staging {
            Some(blocks) => Staging::new(blocks.clone()),
            None => Staging::singletons(&tree),
        };
        staging.validate(&tree)?;
        Ok((tree, staging))
    }

    pub fn from_tree(tree: &EventTree, staging: Option<&Staging>) -> Self {
        Self {
            root: tree.root().to_string(),
            edges: tree.edges().iter().map(|e| (e.from.clone(), e.to.clone(), e.label.clone())).collect(),
            staging: staging.map(|s| s.blocks().to_vec()),
        }
    }
}

/// The infection-process event tree used throughout the tests and docs.
pub fn infection_tree() -> EventTree {
    let e = Edge::new;
    EventTree::new(
        "v0",
        vec![
            e("v0", "v1", "Strain A"),
            e("v0", "v2", "Strain B"),
            e("v1", "v3", "Recover"),
            e("v1", "v4", "Hospitalisation"),
            e("v2", "v5", "Treatment 1"),
            e("v2", "v6", "Treatment 2"),
            e("v5", "v7", "Recover"),
            e("v5", "v8", "Hospitalisation"),
            e("v6", "v9", "Recover"),
            e("v6", "v10", "Hospitalisation"),
        ],
    )
    .expect("infection tree is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn staging(blocks: &[&[&str]]) -> Staging {
        Staging::new(blocks.iter().map(|b| b.iter().map(|s| s.to_string()).collect()).collect())
    }

    #[test]
    fn infection_tree_shape() {
        let t = infection_tree();
        assert_eq!(t.edges().len(), 10);
        assert_eq!(t.nodes().len(), 11);
        assert_eq!(t.situations(), vec!["v0", "v1", "v2", "v5", "v6"]);
        assert_eq!(t.leaves().len(), 6);
    }

    #[test]
    fn single_node_tree_is_valid() {
        let t = EventTree::new("r", vec![]).unwrap();
        assert!(t.situations().is_empty());
        assert_eq!(t.leaves(), vec!["r"]);
        let ceg = build_ceg(&t, &Staging::new(vec![])).unwrap();
        assert_eq!(ceg.node_count(), 1);
    }

    #[test]
    fn edge_back_to_root_is_a_cycle() {
        let t = infection_tree();
        let mut edges = t.edges().to_vec();
        edges.push(Edge::new("v1", "v0", "l"));
        let bad = EventTree::from_parts("v0", edges);
        assert!(matches!(validate_tree(&bad), Err(Error::CycleDetected { .. })));
    }

    #[test]
    fn structural_errors_name_the_node() {
        let e = Edge::new;
        let two_parents = EventTree::from_parts("a", vec![e("a", "b", "x"), e("a", "c", "y"), e("c", "b", "z")]);
        assert!(matches!(validate_tree(&two_parents), Err(Error::MultipleParents { node }) if node == "b"));
        let detached = EventTree::from_parts("a", vec![e("a", "b", "x"), e("c", "d", "y")]);
        assert!(matches!(validate_tree(&detached), Err(Error::DisconnectedNode { .. })));
        let loop_off_tree = EventTree::from_parts("a", vec![e("a", "b", "x"), e("c", "d", "y"), e("d", "c", "z")]);
        assert!(matches!(validate_tree(&loop_off_tree), Err(Error::CycleDetected { .. })));
        let dup = EventTree::from_parts("a", vec![e("a", "b", "x"), e("a", "b", "y")]);
        assert!(matches!(validate_tree(&dup), Err(Error::DuplicateEdge { .. })));
    }

    #[test]
    fn example_staging_positions_equal_stages() {
        let t = infection_tree();
        let s = staging(&[&["v0"], &["v1"], &["v2"], &["v5", "v6"]]);
        let w = positions_from_staging(&t, &s).unwrap();
        assert_eq!(w, s.blocks().to_vec());
    }

    #[test]
    fn distinct_stages_keep_isomorphic_subtrees_apart() {
        let t = infection_tree();
        let s = Staging::singletons(&t);
        let w = positions_from_staging(&t, &s).unwrap();
        assert_eq!(w.len(), 5);
        assert!(w.iter().all(|p| p.len() == 1));
    }

    #[test]
    fn invalid_stagings() {
        let t = infection_tree();
        for bad in [
            staging(&[&["v0"], &["v1", "v5", "v6"]]),                  // v2 missing
            staging(&[&["v0", "v1"], &["v2"], &["v5"], &["v6"]]),      // labels differ
            staging(&[&["v0"], &["v1"], &["v2"], &["v5", "v6"], &["v3"]]), // leaf
            staging(&[&["v0"], &["v1"], &["v2", "v2"], &["v5", "v6"]]), // repeat
        ] {
            assert!(matches!(positions_from_staging(&t, &bad), Err(Error::InvalidStaging(_))), "{bad:?}");
        }
    }

    #[test]
    fn example_ceg() {
        let t = infection_tree();
        let s = staging(&[&["v0"], &["v1"], &["v2"], &["v5", "v6"]]);
        let ceg = build_ceg(&t, &s).unwrap();
        assert_eq!(ceg.positions.len(), 4);
        assert_eq!(ceg.node_count(), 5);
        assert_eq!(ceg.representatives, vec!["v0", "v1", "v2", "v5"]);
        // v2's two treatments meet in one position but keep their labels.
        let from_v2: Vec<_> = ceg.edges.iter().filter(|e| e.from == "v2").collect();
        assert_eq!(from_v2.len(), 2);
        assert!(from_v2.iter().all(|e| e.to == "v5"));
        assert_eq!(ceg.edges.iter().filter(|e| e.to == ceg.sink).count(), 4);
        assert_eq!(ceg.edges.len(), 8);
        assert_eq!(build_ceg(&t, &s).unwrap(), ceg);
    }

    #[test]
    fn all_singleton_ceg_contracts_leaves() {
        let t = infection_tree();
        let ceg = build_ceg(&t, &Staging::singletons(&t)).unwrap();
        assert_eq!(ceg.positions.len(), 5);
        assert_eq!(ceg.edges.iter().filter(|e| e.to == ceg.sink).count(), 6);
    }

    #[test]
    fn root_with_leaf_children() {
        let e = Edge::new;
        let t = EventTree::new("r", vec![e("r", "a", "x"), e("r", "b", "y"), e("r", "c", "z")]).unwrap();
        let ceg = build_ceg(&t, &Staging::singletons(&t)).unwrap();
        assert_eq!(ceg.node_count(), 2);
        assert_eq!(ceg.edges.len(), 3);
    }

    #[test]
    fn json_and_dot() {
        let doc = TreeDocument::from_json(
            r#"{"root":"v0","edges":[["v0","v1","a"],["v0","v2","b"]],"staging":[["v0"]]}"#,
        )
        .unwrap();
        let (t, s) = doc.build().unwrap();
        assert_eq!(TreeDocument::from_tree(&t, Some(&s)), doc);
        let dot = tree_to_dot(&t, Some(&s));
        assert!(dot.contains("\"v0\" -> \"v1\" [label=\"a\"]"));
        assert!(dot.contains("fillcolor"));
        let ceg = build_ceg(&t, &s).unwrap();
        assert!(ceg.to_dot().contains("doublecircle"));
    }

    #[test]
    fn sink_id_avoids_collisions() {
        let e = Edge::new;
        let t = EventTree::new("r", vec![e("r", "w_inf", "x")]).unwrap();
        let ceg = build_ceg(&t, &Staging::singletons(&t)).unwrap();
        assert_eq!(ceg.sink, "w_inf_");
    }
}
