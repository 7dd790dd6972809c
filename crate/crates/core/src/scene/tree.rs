use std::collections::HashMap;

use super::{ObjectSpec, Parent, Relation, RelationKind, Scene};
use crate::error::{Error, Result};
use crate::state::AffineState;

/// Ground-rooted support hierarchy. Nodes are object indices in scene order;
/// a parent of `None` is the ground.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneTree {
    ids: Vec<String>,
    parent: Vec<Option<usize>>,
    kind: Vec<Option<RelationKind>>,
    children: Vec<Vec<usize>>,
    roots: Vec<usize>,
}

impl SceneTree {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Objects plus the ground.
    pub fn node_count(&self) -> usize {
        self.ids.len() + 1
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|i| i == id)
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn kind(&self, i: usize) -> Option<RelationKind> {
        self.kind[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn ground_children(&self) -> &[usize] {
        &self.roots
    }

    /// Children of a node, ground included, in declaration order.
    pub fn children_of(&self, node: Option<usize>) -> &[usize] {
        match node {
            None => &self.roots,
            Some(i) => &self.children[i],
        }
    }

    pub fn parent_of(&self, id: &str) -> Option<Parent> {
        let i = self.index_of(id)?;
        Some(match self.parent[i] {
            None => Parent::Ground,
            Some(p) => Parent::Object(self.ids[p].clone()),
        })
    }

    /// Breadth-first object order starting below the ground.
    pub fn bfs(&self) -> Vec<usize> {
        let mut order = self.roots.clone();
        let mut k = 0;
        while k < order.len() {
            order.extend_from_slice(&self.children[order[k]]);
            k += 1;
        }
        order
    }

    /// `i` and all of its descendants.
    pub fn subtree(&self, i: usize) -> Vec<usize> {
        let mut out = vec![i];
        let mut k = 0;
        while k < out.len() {
            out.extend_from_slice(&self.children[out[k]]);
            k += 1;
        }
        out
    }

    pub fn depth(&self, mut i: usize) -> usize {
        let mut d = 1;
        while let Some(p) = self.parent[i] {
            d += 1;
            i = p;
        }
        d
    }

    /// (child, parent) pairs for every tree edge.
    pub fn edges(&self) -> Vec<(String, Parent)> {
        (0..self.len())
            .map(|i| {
                (
                    self.ids[i].clone(),
                    self.parent_of(&self.ids[i]).expect("known id"),
                )
            })
            .collect()
    }
}

/// Build the support tree by depth-first search from the ground, attaching
/// every unvisited object that declares the current node as its parent.
/// Objects without a declared relation hang off the ground.
pub fn build_scene_tree(objects: &[ObjectSpec], relations: &[Relation]) -> Result<SceneTree> {
    let n = objects.len();
    let index: HashMap<&str, usize> = objects
        .iter()
        .enumerate()
        .map(|(k, o)| (o.id.as_str(), k))
        .collect();
    if index.len() != n {
        let mut seen = std::collections::HashSet::new();
        let dup = objects
            .iter()
            .find(|o| !seen.insert(o.id.as_str()))
            .expect("duplicate exists");
        return Err(Error::DuplicateObject(dup.id.clone()));
    }

    let mut declared: Vec<Option<(Parent, RelationKind)>> = vec![None; n];
    for r in relations {
        let &c = index
            .get(r.child.as_str())
            .ok_or_else(|| Error::UnknownObject(r.child.clone()))?;
        if let Parent::Object(p) = &r.parent {
            if !index.contains_key(p.as_str()) {
                return Err(Error::UnknownObject(p.clone()));
            }
            if *p == r.child {
                return Err(Error::CyclicDependency(vec![r.child.clone()]));
            }
        }
        match &declared[c] {
            Some((existing, _)) if *existing != r.parent => {
                return Err(Error::AmbiguousParent {
                    child: r.child.clone(),
                    first: existing.to_string(),
                    second: r.parent.to_string(),
                });
            }
            Some(_) => {}
            None => declared[c] = Some((r.parent.clone(), r.kind)),
        }
    }
    let parent_idx: Vec<Option<usize>> = declared
        .iter()
        .map(|d| match d {
            Some((Parent::Object(p), _)) => Some(index[p.as_str()]),
            _ => None,
        })
        .collect();

    let mut tree = SceneTree {
        ids: objects.iter().map(|o| o.id.clone()).collect(),
        parent: vec![None; n],
        kind: declared
            .iter()
            .map(|d| d.as_ref().map(|(_, k)| *k))
            .collect(),
        children: vec![Vec::new(); n],
        roots: Vec::new(),
    };
    let mut visited = vec![false; n];
    let mut stack: Vec<Option<usize>> = vec![None];
    // Explicit stack; children are pushed in reverse so they are expanded in
    // declaration order.
    while let Some(node) = stack.pop() {
        let mut attached = Vec::new();
        for o in 0..n {
            if !visited[o] && parent_idx[o] == node {
                visited[o] = true;
                tree.parent[o] = node;
                attached.push(o);
            }
        }
        match node {
            None => tree.roots.extend_from_slice(&attached),
            Some(i) => tree.children[i].extend_from_slice(&attached),
        }
        stack.extend(attached.into_iter().rev().map(Some));
    }

    if let Some(start) = (0..n).find(|&o| !visited[o]) {
        // Every unvisited object leads, through declared parents, into a cycle.
        let mut seen = vec![false; n];
        let mut o = start;
        while !seen[o] {
            seen[o] = true;
            o = parent_idx[o].expect("unvisited objects have a declared parent");
        }
        let mut cycle = vec![tree.ids[o].clone()];
        let mut k = parent_idx[o].expect("cycle");
        while k != o {
            cycle.push(tree.ids[k].clone());
            k = parent_idx[k].expect("cycle");
        }
        return Err(Error::CyclicDependency(cycle));
    }
    Ok(tree)
}

/// Tree edges whose child does not rest within `2 * dhat` of its parent's top
/// (or of the ground) in the given layout.
pub fn contact_warnings(
    scene: &Scene,
    tree: &SceneTree,
    states: &[AffineState],
    dhat: f64,
) -> Vec<String> {
    let up = scene.config.up();
    let boxes = scene.aabbs(states);
    let mut out = Vec::new();
    for i in 0..tree.len() {
        let bottom = up.bottom(&boxes[i]);
        let (support, name) = match tree.parent(i) {
            Some(p) => (Some(up.top(&boxes[p])), tree.ids()[p].clone()),
            None => (scene.config.ground_height(), super::GROUND.to_string()),
        };
        if let Some(top) = support {
            let gap = bottom - top;
            if gap.abs() > 2.0 * dhat {
                out.push(format!(
                    "`{}` is not in contact with `{name}` (vertical gap {gap:.4} m)",
                    tree.ids()[i]
                ));
            }
        }
    }
    out
}
