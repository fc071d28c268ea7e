use std::collections::HashMap;

use super::{weld_vertices, Mesh};

/// Disjoint-set forest with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Face-connected components after welding vertices within `weld_eps`.
///
/// Returns the component count and a per-face label in `0..count`, numbered
/// by first appearance in face order.
pub fn connected_components(mesh: &Mesh, weld_eps: f64) -> (usize, Vec<usize>) {
    let (rep, welded) = weld_vertices(mesh.vertices(), weld_eps.max(0.0));
    let mut uf = UnionFind::new(welded.len());
    for f in mesh.faces() {
        uf.union(rep[f[0]], rep[f[1]]);
        uf.union(rep[f[0]], rep[f[2]]);
    }
    let mut ids: HashMap<usize, usize> = HashMap::new();
    let labels: Vec<usize> = mesh
        .faces()
        .iter()
        .map(|f| {
            let root = uf.find(rep[f[0]]);
            let next = ids.len();
            *ids.entry(root).or_insert(next)
        })
        .collect();
    (ids.len(), labels)
}

/// Number of directed edges `(u, v)` with no matching `(v, u)`.
pub fn boundary_edge_count(faces: &[[usize; 3]]) -> usize {
    let mut balance: HashMap<(usize, usize), i64> = HashMap::with_capacity(faces.len() * 3);
    for f in faces {
        for k in 0..3 {
            let (u, v) = (f[k], f[(k + 1) % 3]);
            if u < v {
                *balance.entry((u, v)).or_insert(0) += 1;
            } else {
                *balance.entry((v, u)).or_insert(0) -= 1;
            }
        }
    }
    balance.values().map(|b| b.unsigned_abs() as usize).sum()
}
