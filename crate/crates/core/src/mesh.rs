//! Conforming triangular meshes with edge adjacency.
//!
//! Local conventions used throughout the crate:
//! - triangle vertices are stored counterclockwise;
//! - local edge `j` of a triangle is the edge opposite local vertex `j`, i.e. it
//!   joins local vertices `(j + 1) % 3` and `(j + 2) % 3`.
//!
//! Each [`Edge`] stores its unit normal pointing out of `left`. For interior
//! edges `right` is the neighbour on the other side.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::{Result, RteError};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
}

impl Vertex {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn point(&self) -> Point {
        [self.x, self.y]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triangle {
    /// Counterclockwise vertex ids.
    pub vertex_ids: [usize; 3],
    /// `edge_ids[j]` is the mesh edge opposite local vertex `j`.
    pub edge_ids: [usize; 3],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub vertex_ids: [usize; 2],
    pub left: usize,
    /// `None` on the domain boundary.
    pub right: Option<usize>,
    /// Unit normal pointing out of `left`.
    pub normal: [f64; 2],
    pub length: f64,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }

    /// Element on the other side of the edge as seen from `tri`.
    pub fn neighbor_of(&self, tri: usize) -> Option<usize> {
        if self.left == tri {
            self.right
        } else {
            Some(self.left)
        }
    }
}

/// Whether a triangle edge is upwind-facing for a given direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    /// `omega . n < -eps`.
    Inflow,
    /// `omega . n >= -eps`, including tangential edges.
    Outflow,
}

#[derive(Clone, Debug)]
pub struct TriangleMesh {
    pub vertices: Vec<Vertex>,
    pub triangles: Vec<Triangle>,
    pub edges: Vec<Edge>,
    /// Maximum edge length.
    pub h: f64,
    /// Number of regular refinements applied since construction.
    pub level: usize,
}

impl TriangleMesh {
    /// Builds edge adjacency for a list of counterclockwise triangles and checks
    /// conformity.
    pub fn from_triangles(vertices: Vec<Vertex>, tris: Vec<[usize; 3]>) -> Result<Self> {
        if tris.is_empty() {
            return Err(RteError::InvalidMesh("mesh has no triangles".into()));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v.x.is_finite() || !v.y.is_finite() {
                return Err(RteError::InvalidMesh(format!("vertex {i} has non-finite coordinates")));
            }
        }

        let mut edges: Vec<Edge> = Vec::with_capacity(tris.len() * 3 / 2 + 1);
        // (min, max) vertex pair -> edge id
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(tris.len() * 2);
        let mut triangles = Vec::with_capacity(tris.len());

        for (t, ids) in tris.iter().enumerate() {
            let [a, b, c] = *ids;
            if a == b || b == c || a == c {
                return Err(RteError::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
            if ids.iter().any(|&v| v >= vertices.len()) {
                return Err(RteError::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            let area = signed_area(vertices[a].point(), vertices[b].point(), vertices[c].point());
            if !(area > 0.0) {
                return Err(RteError::InvalidMesh(format!(
                    "triangle {t} is not counterclockwise (signed area {area:e})"
                )));
            }

            let mut edge_ids = [0; 3];
            for j in 0..3 {
                let p = ids[(j + 1) % 3];
                let q = ids[(j + 2) % 3];
                let key = (p.min(q), p.max(q));
                match lookup.get(&key) {
                    Some(&e) => {
                        let edge = &mut edges[e];
                        if edge.right.is_some() {
                            return Err(RteError::InvalidMesh(format!(
                                "edge ({p}, {q}) is shared by more than two triangles"
                            )));
                        }
                        // The neighbour must traverse the shared edge in the opposite sense.
                        if edge.vertex_ids != [q, p] {
                            return Err(RteError::InvalidMesh(format!(
                                "triangles {} and {t} have inconsistent orientation",
                                edge.left
                            )));
                        }
                        edge.right = Some(t);
                        edge_ids[j] = e;
                    }
                    None => {
                        let (pp, pq) = (vertices[p].point(), vertices[q].point());
                        let dx = pq[0] - pp[0];
                        let dy = pq[1] - pp[1];
                        let length = dx.hypot(dy);
                        lookup.insert(key, edges.len());
                        edge_ids[j] = edges.len();
                        edges.push(Edge {
                            vertex_ids: [p, q],
                            left: t,
                            right: None,
                            normal: [dy / length, -dx / length],
                            length,
                        });
                    }
                }
            }
            triangles.push(Triangle { vertex_ids: *ids, edge_ids });
        }

        let h = edges.iter().map(|e| e.length).fold(0.0, f64::max);
        Ok(Self { vertices, triangles, edges, h, level: 0 })
    }

    /// `n x n` grid on the unit square; every cell is cut along its
    /// lower-left to upper-right diagonal.
    pub fn structured_unit_square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(RteError::InvalidArgument("grid size must be at least 1".into()));
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let step = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push(Vertex::new(i as f64 * step, j as f64 * step));
            }
        }
        let mut tris = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                tris.push([v00, v10, v11]);
                tris.push([v00, v11, v01]);
            }
        }
        Self::from_triangles(vertices, tris)
    }

    /// Splits every triangle into four through its edge midpoints.
    ///
    /// Children of parent `k` are `4k..4k+4`; the first three keep the
    /// parent's corners `0, 1, 2` respectively, the fourth is the middle one.
    pub fn refine_regular(&self) -> Result<Self> {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend(self.edges.iter().map(|e| {
            let a = self.vertices[e.vertex_ids[0]];
            let b = self.vertices[e.vertex_ids[1]];
            Vertex::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y))
        }));
        let mut tris = Vec::with_capacity(4 * self.triangles.len());
        for t in &self.triangles {
            let [a, b, c] = t.vertex_ids;
            // midpoint opposite vertex j
            let m = t.edge_ids.map(|e| nv + e);
            let (m_bc, m_ca, m_ab) = (m[0], m[1], m[2]);
            tris.push([a, m_ab, m_ca]);
            tris.push([m_ab, b, m_bc]);
            tris.push([m_ca, m_bc, c]);
            tris.push([m_ab, m_bc, m_ca]);
        }
        let mut refined = Self::from_triangles(vertices, tris)?;
        refined.level = self.level + 1;
        Ok(refined)
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].vertex_ids.map(|v| self.vertices[v].point())
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    /// Longest edge of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        self.triangles[t].edge_ids.iter().map(|&e| self.edges[e].length).fold(0.0, f64::max)
    }

    /// Outward unit normal of local edge `j` of triangle `t`.
    pub fn outward_normal(&self, t: usize, j: usize) -> [f64; 2] {
        let e = &self.edges[self.triangles[t].edge_ids[j]];
        if e.left == t {
            e.normal
        } else {
            [-e.normal[0], -e.normal[1]]
        }
    }

    /// Neighbour across local edge `j` of `t` together with the neighbour's
    /// local indices of that edge's endpoints, in the order of
    /// [`crate::dg::ElementBasis::edge_bary`] on `t`.
    pub fn neighbor_across(&self, t: usize, j: usize) -> Option<(usize, [usize; 2])> {
        let nb = self.edges[self.triangles[t].edge_ids[j]].neighbor_of(t)?;
        let ids = &self.triangles[t].vertex_ids;
        let nv = &self.triangles[nb].vertex_ids;
        let pos = |v: usize| nv.iter().position(|&x| x == v).expect("conforming mesh");
        Some((nb, [pos(ids[(j + 1) % 3]), pos(ids[(j + 2) % 3])]))
    }

    /// Inflow/outflow status of the three edges of every triangle.
    pub fn classify_edges(&self, omega: [f64; 2], eps_n: f64) -> Result<Vec<[Flow; 3]>> {
        check_unit(omega)?;
        Ok((0..self.triangles.len())
            .map(|t| {
                std::array::from_fn(|j| {
                    let n = self.outward_normal(t, j);
                    flow_for(omega[0] * n[0] + omega[1] * n[1], eps_n)
                })
            })
            .collect())
    }

    /// Reads the plain-text format: header `nv nt`, `nv` lines `x y`, then
    /// `nt` lines `i j k` with 0-based counterclockwise vertex ids.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let parse_err = |line: usize, message: String| RteError::MeshParse { line, message };
        let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))?;
        let header = parse_fields::<usize>(header, 2).map_err(|m| parse_err(hline, m))?;
        let (nv, nt) = (header[0], header[1]);

        let mut vertices = Vec::with_capacity(nv);
        for k in 0..nv {
            let (ln, l) = lines.next().ok_or_else(|| parse_err(hline, format!("expected {nv} vertices, found {k}")))?;
            let xy = parse_fields::<f64>(l, 2).map_err(|m| parse_err(ln, m))?;
            vertices.push(Vertex::new(xy[0], xy[1]));
        }
        let mut tris = Vec::with_capacity(nt);
        for k in 0..nt {
            let (ln, l) =
                lines.next().ok_or_else(|| parse_err(hline, format!("expected {nt} triangles, found {k}")))?;
            let ids = parse_fields::<usize>(l, 3).map_err(|m| parse_err(ln, m))?;
            if let Some(bad) = ids.iter().find(|&&i| i >= nv) {
                return Err(parse_err(ln, format!("vertex id {bad} out of range (nv = {nv})")));
            }
            tris.push([ids[0], ids[1], ids[2]]);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(parse_err(ln, "trailing data after the last triangle".into()));
        }
        Self::from_triangles(vertices, tris)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.vertices.len(), self.triangles.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:e} {:e}", v.x, v.y);
        }
        for t in &self.triangles {
            let [a, b, c] = t.vertex_ids;
            let _ = writeln!(s, "{a} {b} {c}");
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub fn flow_for(omega_dot_n: f64, eps_n: f64) -> Flow {
    if omega_dot_n < -eps_n {
        Flow::Inflow
    } else {
        Flow::Outflow
    }
}

pub(crate) fn check_unit(omega: [f64; 2]) -> Result<()> {
    let norm = omega[0].hypot(omega[1]);
    if (norm - 1.0).abs() > 1e-12 {
        return Err(RteError::InvalidArgument(format!("direction {omega:?} is not a unit vector (norm {norm})")));
    }
    Ok(())
}

fn parse_fields<T: std::str::FromStr>(line: &str, count: usize) -> std::result::Result<Vec<T>, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != count {
        return Err(format!("expected {count} fields, found {}", fields.len()));
    }
    fields.iter().map(|f| f.parse::<T>().map_err(|_| format!("cannot parse field `{f}`"))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euler_counts(n: usize) -> (usize, usize, usize) {
        // V - E + F = 1 for a triangulated disk; V = (n+1)^2, F = 2n^2.
        let v = (n + 1) * (n + 1);
        let f = 2 * n * n;
        (v, v + f - 1, f)
    }

    #[test]
    fn smallest_structured_mesh() {
        let m = TriangleMesh::structured_unit_square(1).unwrap();
        assert_eq!(m.n_triangles(), 2);
        assert_eq!(m.edges.len(), 5);
        assert_eq!(m.vertices.len(), 4);
        assert!((m.h - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn structured_counts_match_euler() {
        for n in [2, 3, 10] {
            let m = TriangleMesh::structured_unit_square(n).unwrap();
            let (v, e, f) = euler_counts(n);
            assert_eq!((m.vertices.len(), m.edges.len(), m.n_triangles()), (v, e, f));
            assert!((m.h - 2f64.sqrt() / n as f64).abs() < 1e-15);
            assert_eq!(m.edges.iter().filter(|e| e.is_boundary()).count(), 4 * n);
        }
        let m = TriangleMesh::structured_unit_square(2).unwrap();
        assert!((m.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_grid_is_rejected() {
        assert!(matches!(TriangleMesh::structured_unit_square(0), Err(RteError::InvalidArgument(_))));
    }

    #[test]
    fn refinement_counts_and_h() {
        let m = TriangleMesh::structured_unit_square(1).unwrap();
        let r = m.refine_regular().unwrap();
        assert_eq!(r.n_triangles(), 8);
        assert_eq!(r.level, 1);

        let m = TriangleMesh::structured_unit_square(10).unwrap();
        let r = m.refine_regular().unwrap();
        assert!((r.h - 2f64.sqrt() / 20.0).abs() < 1e-15);
        let rr = r.refine_regular().unwrap();
        assert!((rr.total_area() - 1.0).abs() < 1e-10);
        assert_eq!(rr.level, 2);
    }

    #[test]
    fn children_nest_in_parent() {
        let m = TriangleMesh::structured_unit_square(3).unwrap();
        let r = m.refine_regular().unwrap();
        for child in 0..r.n_triangles() {
            let [a, b, c] = m.triangle_points(child / 4);
            for p in r.triangle_points(child) {
                // barycentric coordinates of p in the parent must be >= 0
                let total = signed_area(a, b, c);
                let l = [signed_area(p, b, c), signed_area(a, p, c), signed_area(a, b, p)];
                assert!(l.iter().all(|&x| x / total > -1e-12), "child {child} escapes parent");
            }
        }
    }

    #[test]
    fn conformity_and_normal_consistency() {
        let m = TriangleMesh::structured_unit_square(4).unwrap().refine_regular().unwrap();
        let mut uses = vec![0; m.edges.len()];
        for t in &m.triangles {
            for &e in &t.edge_ids {
                uses[e] += 1;
            }
        }
        for (e, edge) in m.edges.iter().enumerate() {
            assert_eq!(uses[e], if edge.is_boundary() { 1 } else { 2 });
            assert!((edge.normal[0].hypot(edge.normal[1]) - 1.0).abs() < 1e-12);
            if let Some(r) = edge.right {
                let jl = m.triangles[edge.left].edge_ids.iter().position(|&x| x == e).unwrap();
                let jr = m.triangles[r].edge_ids.iter().position(|&x| x == e).unwrap();
                let nl = m.outward_normal(edge.left, jl);
                let nr = m.outward_normal(r, jr);
                assert!((nl[0] + nr[0]).abs() < 1e-15 && (nl[1] + nr[1]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn classify_right_triangle() {
        // legs on the axes: (0,0), (1,0), (0,1)
        let verts = vec![Vertex::new(0.0, 0.0), Vertex::new(1.0, 0.0), Vertex::new(0.0, 1.0)];
        let m = TriangleMesh::from_triangles(verts, vec![[0, 1, 2]]).unwrap();
        // edge 0: hypotenuse, normal (1,1)/sqrt2; edge 1: x = 0, normal (-1,0); edge 2: y = 0, normal (0,-1)
        let c = m.classify_edges([1.0, 0.0], 1e-12).unwrap();
        assert_eq!(c[0], [Flow::Outflow, Flow::Inflow, Flow::Outflow]);
        let s = 0.5f64.sqrt();
        let c = m.classify_edges([-s, -s], 1e-12).unwrap();
        assert_eq!(c[0], [Flow::Inflow, Flow::Outflow, Flow::Outflow]);
    }

    #[test]
    fn tangential_edges_are_outflow_for_both_signs() {
        let m = TriangleMesh::structured_unit_square(2).unwrap();
        let fwd = m.classify_edges([1.0, 0.0], 1e-12).unwrap();
        let back = m.classify_edges([-1.0, 0.0], 1e-12).unwrap();
        for t in 0..m.n_triangles() {
            for j in 0..3 {
                let n = m.outward_normal(t, j);
                if n[0].abs() <= 1e-12 {
                    assert_eq!((fwd[t][j], back[t][j]), (Flow::Outflow, Flow::Outflow));
                } else {
                    assert_ne!(fwd[t][j], back[t][j]);
                }
            }
        }
    }

    #[test]
    fn non_unit_direction_rejected() {
        let m = TriangleMesh::structured_unit_square(1).unwrap();
        assert!(m.classify_edges([1.0, 1.0], 1e-12).is_err());
    }

    #[test]
    fn text_format_round_trip() {
        let m = TriangleMesh::structured_unit_square(3).unwrap();
        let back = TriangleMesh::parse(&m.to_text()).unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.triangles, m.triangles);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = TriangleMesh::parse("3 1\n0 0\n1 0\n0 1\n0 1 x\n").unwrap_err();
        assert!(matches!(err, RteError::MeshParse { line: 5, .. }), "{err}");
        let err = TriangleMesh::parse("3 1\n0 0\n1 0\n0 1\n0 2 1\n").unwrap_err();
        assert!(matches!(err, RteError::InvalidMesh(_)), "clockwise triangle must be rejected");
    }
}
