//! Finite connected Eulerian directed multigraphs.
//!
//! Edges are stored as out-adjacency lists with multiplicities. A self-loop
//! at `i` contributes one to both the in- and out-degree of `i`; toppling `i`
//! sends one chip around the loop, so loops cancel in the Laplacian.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};

/// Dense vertex index in `0..n`.
pub type VertexId = usize;

/// Immutable, validated Eulerian multigraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiGraph {
    n: usize,
    /// `out[u]` lists `(v, multiplicity)` sorted by `v`, no zero entries.
    out: Vec<Vec<(VertexId, i64)>>,
    deg: Vec<i64>,
    loops: Vec<i64>,
}

impl MultiGraph {
    /// Builds a graph from `(src, dst, multiplicity)` triples. Repeated
    /// triples accumulate.
    pub fn new(n: usize, edges: &[(VertexId, VertexId, u64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut acc: Vec<BTreeMap<VertexId, i64>> = vec![BTreeMap::new(); n];
        for &(src, dst, mult) in edges {
            for v in [src, dst] {
                if v >= n {
                    return Err(Error::VertexOutOfRange { vertex: v, n });
                }
            }
            if mult == 0 {
                return Err(Error::ZeroMultiplicity { src, dst });
            }
            let mult = i64::try_from(mult).map_err(|_| Error::Overflow("edge multiplicity"))?;
            let slot = acc[src].entry(dst).or_insert(0);
            *slot = slot.checked_add(mult).ok_or(Error::Overflow("edge multiplicity"))?;
        }
        let out: Vec<Vec<(VertexId, i64)>> = acc.into_iter().map(|m| m.into_iter().collect()).collect();

        let mut out_deg = vec![0i64; n];
        let mut in_deg = vec![0i64; n];
        for (u, row) in out.iter().enumerate() {
            for &(v, c) in row {
                out_deg[u] = out_deg[u].checked_add(c).ok_or(Error::Overflow("degree"))?;
                in_deg[v] = in_deg[v].checked_add(c).ok_or(Error::Overflow("degree"))?;
            }
        }
        if let Some(vertex) = (0..n).find(|&v| in_deg[v] != out_deg[v]) {
            return Err(Error::NotEulerian {
                vertex,
                in_degree: in_deg[vertex] as u64,
                out_degree: out_deg[vertex] as u64,
            });
        }
        let loops =
            (0..n).map(|u| out[u].binary_search_by_key(&u, |&(v, _)| v).map(|k| out[u][k].1).unwrap_or(0)).collect();
        let g = MultiGraph { n, out, deg: out_deg, loops };
        if !g.is_strongly_connected() {
            return Err(Error::NotConnected);
        }
        Ok(g)
    }

    /// Bidirects each undirected edge `{u, v}` into `(u, v)` and `(v, u)`.
    pub fn from_undirected(n: usize, edges: &[(VertexId, VertexId)]) -> Result<Self> {
        let directed: Vec<_> = edges.iter().flat_map(|&(u, v)| [(u, v, 1), (v, u, 1)]).collect();
        Self::new(n, &directed)
    }

    pub fn complete(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::SizeOutOfRange(format!("complete graph needs n >= 2, got {n}")));
        }
        let edges: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        Self::from_undirected(n, &edges)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::SizeOutOfRange(format!("cycle needs n >= 2, got {n}")));
        }
        let edges: Vec<_> = (0..n).map(|u| (u, (u + 1) % n)).collect();
        Self::from_undirected(n, &edges)
    }

    /// `nx × ny` torus; vertex `(x, y)` has index `y * nx + x`. Side lengths
    /// of one or two produce self-loops or doubled edges.
    pub fn torus(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nx * ny < 2 {
            return Err(Error::SizeOutOfRange(format!("torus needs nx, ny >= 1 and nx*ny >= 2, got {nx}x{ny}")));
        }
        let idx = |x: usize, y: usize| y * nx + x;
        let mut edges = Vec::with_capacity(2 * nx * ny);
        for y in 0..ny {
            for x in 0..nx {
                edges.push((idx(x, y), idx((x + 1) % nx, y)));
                edges.push((idx(x, y), idx(x, (y + 1) % ny)));
            }
        }
        Self::from_undirected(nx * ny, &edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn deg(&self, v: VertexId) -> i64 {
        self.deg[v]
    }

    pub fn degrees(&self) -> &[i64] {
        &self.deg
    }

    /// Number of self-loops at `v`.
    pub fn loops(&self, v: VertexId) -> i64 {
        self.loops[v]
    }

    /// Out-neighbours of `u` with multiplicities, including self-loops.
    pub fn out_edges(&self, u: VertexId) -> &[(VertexId, i64)] {
        &self.out[u]
    }

    pub fn multiplicity(&self, u: VertexId, v: VertexId) -> i64 {
        self.out[u].binary_search_by_key(&v, |&(w, _)| w).map(|k| self.out[u][k].1).unwrap_or(0)
    }

    /// All edges as `(src, dst, multiplicity)`, sorted.
    pub fn edges(&self) -> Vec<(VertexId, VertexId, u64)> {
        self.out.iter().enumerate().flat_map(|(u, row)| row.iter().map(move |&(v, c)| (u, v, c as u64))).collect()
    }

    /// Total number of directed edges, counted with multiplicity.
    pub fn edge_count(&self) -> i64 {
        self.deg.iter().sum()
    }

    /// True when every edge `(u, v)` has a matching reverse edge of equal
    /// multiplicity.
    pub fn is_bidirected(&self) -> bool {
        (0..self.n).all(|u| self.out[u].iter().all(|&(v, c)| self.multiplicity(v, u) == c))
    }

    fn reachable_all(&self, adj: &[Vec<VertexId>]) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    fn is_strongly_connected(&self) -> bool {
        let fwd: Vec<Vec<VertexId>> = self.out.iter().map(|row| row.iter().map(|&(v, _)| v).collect()).collect();
        let mut rev = vec![Vec::new(); self.n];
        for (u, row) in self.out.iter().enumerate() {
            for &(v, _) in row {
                rev[v].push(u);
            }
        }
        self.reachable_all(&fwd) && self.reachable_all(&rev)
    }

    /// `Δu(i) = −deg(i)·u(i) + Σ_{edges e into i} u(e⁻)`.
    pub fn laplacian_apply(&self, u: &[i64]) -> Result<Vec<i64>> {
        if u.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: u.len() });
        }
        let ovf = || Error::Overflow("laplacian");
        let mut out = vec![0i64; self.n];
        for (src, row) in self.out.iter().enumerate() {
            let val = u[src];
            if val == 0 {
                continue;
            }
            out[src] = self.deg[src].checked_mul(val).and_then(|x| out[src].checked_sub(x)).ok_or_else(ovf)?;
            for &(dst, c) in row {
                out[dst] = c.checked_mul(val).and_then(|x| out[dst].checked_add(x)).ok_or_else(ovf)?;
            }
        }
        Ok(out)
    }

    /// Integer matrix of `−Δ` (degree minus transposed adjacency).
    pub fn laplacian_matrix(&self) -> Vec<Vec<i64>> {
        let mut m = vec![vec![0i64; self.n]; self.n];
        for (u, row) in self.out.iter().enumerate() {
            m[u][u] += self.deg[u];
            for &(v, c) in row {
                m[v][u] -= c;
            }
        }
        m
    }

    /// Number of spanning trees oriented toward `z`: the determinant of the
    /// reduced Laplacian, computed exactly by fraction-free elimination.
    pub fn spanning_tree_count(&self, z: VertexId) -> Result<u128> {
        self.check_vertex(z)?;
        let full = self.laplacian_matrix();
        let reduced: Vec<Vec<i128>> = (0..self.n)
            .filter(|&r| r != z)
            .map(|r| (0..self.n).filter(|&c| c != z).map(|c| full[r][c] as i128).collect())
            .collect();
        let det = bareiss_determinant(reduced)?;
        u128::try_from(det).map_err(|_| Error::Inconsistent(format!("negative reduced Laplacian determinant {det}")))
    }

    pub fn check_vertex(&self, v: VertexId) -> Result<()> {
        if v < self.n {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange { vertex: v, n: self.n })
        }
    }
}

/// Fraction-free Gaussian elimination with row pivoting. The empty matrix
/// has determinant 1.
pub fn bareiss_determinant(mut a: Vec<Vec<i128>>) -> Result<i128> {
    let n = a.len();
    let ovf = || Error::Overflow("determinant");
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&r| a[r][k] != 0) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return Ok(0),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let lhs = a[i][j].checked_mul(a[k][k]).ok_or_else(ovf)?;
                let rhs = a[i][k].checked_mul(a[k][j]).ok_or_else(ovf)?;
                a[i][j] = lhs.checked_sub(rhs).ok_or_else(ovf)? / prev;
            }
        }
        prev = a[k][k];
    }
    Ok(if n == 0 { 1 } else { sign * a[n - 1][n - 1] })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge2() -> MultiGraph {
        MultiGraph::new(2, &[(0, 1, 1), (1, 0, 1)]).unwrap()
    }

    #[test]
    fn builds_small_graphs() {
        assert_eq!(edge2().degrees(), &[1, 1]);
        let c3 = MultiGraph::new(3, &[(0, 1, 1), (1, 2, 1), (2, 0, 1)]).unwrap();
        assert_eq!(c3.degrees(), &[1, 1, 1]);
        assert!(!c3.is_bidirected());
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(matches!(MultiGraph::new(2, &[(0, 1, 2), (1, 0, 1)]), Err(Error::NotEulerian { .. })));
        assert_eq!(MultiGraph::new(0, &[]), Err(Error::EmptyGraph));
        assert_eq!(MultiGraph::new(3, &[(0, 1, 1), (1, 0, 1), (2, 2, 1)]), Err(Error::NotConnected));
        assert!(matches!(MultiGraph::new(2, &[(0, 5, 1)]), Err(Error::VertexOutOfRange { .. })));
        assert!(matches!(MultiGraph::new(2, &[(0, 1, 0)]), Err(Error::ZeroMultiplicity { .. })));
        assert!(MultiGraph::complete(1).is_err());
        assert!(MultiGraph::torus(1, 1).is_err());
    }

    #[test]
    fn undirected_constructions() {
        let tri = MultiGraph::from_undirected(3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(tri.degrees(), &[2, 2, 2]);
        let path = MultiGraph::from_undirected(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(path.degrees(), &[1, 2, 1]);
        let e = MultiGraph::from_undirected(2, &[(0, 1)]).unwrap();
        assert_eq!(e.degrees(), &[1, 1]);
        assert_eq!(MultiGraph::from_undirected(3, &[(0, 1)]), Err(Error::NotConnected));
    }

    #[test]
    fn generators() {
        assert!(MultiGraph::complete(4).unwrap().degrees().iter().all(|&d| d == 3));
        let t = MultiGraph::torus(2, 2).unwrap();
        assert!(t.degrees().iter().all(|&d| d == 4));
        assert_eq!(t.multiplicity(0, 1), 2);
        assert_eq!(t.multiplicity(0, 2), 2);
        assert_eq!(t.multiplicity(0, 3), 0);
        let c3 = MultiGraph::cycle(3).unwrap();
        assert_eq!(c3, MultiGraph::from_undirected(3, &[(0, 1), (1, 2), (2, 0)]).unwrap());
        let ring = MultiGraph::torus(1, 3).unwrap();
        assert_eq!(ring.loops(0), 2);
        assert_eq!(ring.deg(0), 4);
    }

    #[test]
    fn laplacian_examples() {
        assert_eq!(edge2().laplacian_apply(&[1, 0]).unwrap(), vec![-1, 1]);
        let tri = MultiGraph::cycle(3).unwrap();
        assert_eq!(tri.laplacian_apply(&[1, 0, 0]).unwrap(), vec![-2, 1, 1]);
        assert_eq!(tri.laplacian_apply(&[7, 7, 7]).unwrap(), vec![0, 0, 0]);
        let ring = MultiGraph::torus(1, 3).unwrap();
        assert_eq!(ring.laplacian_apply(&[1, 0, 0]).unwrap(), vec![-2, 1, 1]);
    }

    #[test]
    fn tree_counts() {
        assert_eq!(edge2().spanning_tree_count(0).unwrap(), 1);
        assert_eq!(edge2().spanning_tree_count(1).unwrap(), 1);
        let tri = MultiGraph::cycle(3).unwrap();
        assert!((0..3).all(|z| tri.spanning_tree_count(z).unwrap() == 3));
        let k4 = MultiGraph::complete(4).unwrap();
        assert!((0..4).all(|z| k4.spanning_tree_count(z).unwrap() == 16));
        // Doubled 4-cycle: 4 spanning trees, each edge chosen in 2 ways.
        assert_eq!(MultiGraph::torus(2, 2).unwrap().spanning_tree_count(0).unwrap(), 32);
    }

    #[test]
    fn bareiss_matches_cofactor_expansion() {
        let m = vec![vec![0i128, 2, 1], vec![3, -1, 4], vec![5, 9, 2]];
        // 0*(-2-36) - 2*(6-20) + 1*(27+5)
        assert_eq!(bareiss_determinant(m).unwrap(), 60);
        assert_eq!(bareiss_determinant(vec![]).unwrap(), 1);
    }
}
