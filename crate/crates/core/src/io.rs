//! Tree + weights instance files and DOT export.
//!
//! File layout (JSON, UTF-8):
//!
//! ```json
//! {"root": 0, "vertices": [{"id": 0, "parent": null, "u": 1.0, "w": 0.5}, ...]}
//! ```
//!
//! Ids are dense from 0 and exactly one vertex has a null parent. Floats are
//! written in shortest round-trip form, so save/load is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{RootedTree, WeightPair};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexRecord {
    id: usize,
    parent: Option<usize>,
    u: f64,
    w: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    root: usize,
    vertices: Vec<VertexRecord>,
}

/// A rooted tree together with its weight pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub tree: RootedTree,
    pub weights: WeightPair,
}

impl Instance {
    pub fn new(tree: RootedTree, weights: WeightPair) -> Result<Self> {
        weights.check_tree(&tree)?;
        Ok(Self { tree, weights })
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn to_json(&self) -> String {
        let vertices = (0..self.len())
            .map(|v| VertexRecord {
                id: v,
                parent: self.tree.parent(v),
                u: self.weights.u[v],
                w: self.weights.w[v],
            })
            .collect();
        let file = InstanceFile {
            root: self.tree.root(),
            vertices,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("instance serializes");
        s.push('\n');
        s
    }

    /// Parses and validates an instance. Every structural or weight problem
    /// is reported as [`Error::Format`].
    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let n = file.vertices.len();
        if n == 0 {
            return Err(Error::Format("no vertices".into()));
        }
        let mut parents = vec![None; n];
        let mut u = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut seen = vec![false; n];
        for rec in &file.vertices {
            if rec.id >= n {
                return Err(Error::Format(format!(
                    "id {} is not dense in 0..{n}",
                    rec.id
                )));
            }
            if std::mem::replace(&mut seen[rec.id], true) {
                return Err(Error::Format(format!("duplicate id {}", rec.id)));
            }
            parents[rec.id] = rec.parent;
            u[rec.id] = rec.u;
            w[rec.id] = rec.w;
        }
        let tree = RootedTree::from_parents(&parents).map_err(|e| Error::Format(e.to_string()))?;
        if tree.root() != file.root {
            return Err(Error::Format(format!(
                "root field says {} but vertex {} has the null parent",
                file.root,
                tree.root()
            )));
        }
        let weights = WeightPair::new(u, w).map_err(|e| Error::Format(e.to_string()))?;
        Ok(Self { tree, weights })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Graphviz rendering; each vertex is labelled `id\nu=…\nw=…`.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph tree {\n    node [shape=box];\n");
        for v in 0..self.len() {
            let _ = writeln!(
                s,
                "    {v} [label=\"{v}\\nu={}\\nw={}\"];",
                self.weights.u[v], self.weights.w[v]
            );
        }
        for v in self.tree.bfs_order() {
            for c in self.tree.children(*v) {
                let _ = writeln!(s, "    {v} -> {c};");
            }
        }
        s.push_str("}\n");
        s
    }
}
