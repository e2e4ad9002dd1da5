//! Transport sweeps.
//!
//! For a fixed direction the upwind coupling makes the element systems
//! block-triangular: an element can be solved once every neighbour across one
//! of its inflow edges is known. [`SweepSchedule`] groups the elements into
//! layers by repeatedly peeling off elements with no unsolved upwind
//! neighbours. Elements within a layer are independent.

use crate::dg::{assemble_local, AssemblyRules, ElementBasis, InflowFace, Trace};
use crate::mesh::{check_unit, flow_for, Flow, Point, TriangleMesh};
use crate::{Result, RteError, EPS_NORMAL};

/// Where the upwind trace of a triangle edge comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Upwind {
    /// Inflow edge shared with this element.
    Neighbor(usize),
    /// Inflow edge on the domain boundary; data is prescribed.
    Boundary,
    /// Outflow or tangential edge; contributes nothing to the element system.
    Outflow,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSchedule {
    pub omega: [f64; 2],
    /// Element ids, sorted within each layer.
    pub layers: Vec<Vec<usize>>,
    /// Per element and local edge.
    pub upwind: Vec<[Upwind; 3]>,
    /// Layer index of every element.
    pub layer_of: Vec<usize>,
}

impl SweepSchedule {
    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// One line per layer, element ids separated by spaces.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for layer in &self.layers {
            let ids: Vec<String> = layer.iter().map(|k| k.to_string()).collect();
            s.push_str(&ids.join(" "));
            s.push('\n');
        }
        s
    }
}

pub fn build_schedule(mesh: &TriangleMesh, omega: [f64; 2]) -> Result<SweepSchedule> {
    build_schedule_with_eps(mesh, omega, EPS_NORMAL)
}

/// Kahn-style layered topological order of the upwind dependency graph.
pub fn build_schedule_with_eps(mesh: &TriangleMesh, omega: [f64; 2], eps_n: f64) -> Result<SweepSchedule> {
    check_unit(omega)?;
    let n = mesh.n_triangles();
    let mut upwind = vec![[Upwind::Outflow; 3]; n];
    let mut pending = vec![0usize; n];
    let mut downwind: Vec<Vec<usize>> = vec![Vec::new(); n];

    for (t, tri) in mesh.triangles.iter().enumerate() {
        for j in 0..3 {
            let nrm = mesh.outward_normal(t, j);
            if flow_for(omega[0] * nrm[0] + omega[1] * nrm[1], eps_n) == Flow::Outflow {
                continue;
            }
            match mesh.edges[tri.edge_ids[j]].neighbor_of(t) {
                Some(nb) => {
                    upwind[t][j] = Upwind::Neighbor(nb);
                    pending[t] += 1;
                    downwind[nb].push(t);
                }
                None => upwind[t][j] = Upwind::Boundary,
            }
        }
    }

    let mut layer_of = vec![usize::MAX; n];
    let mut layers = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&t| pending[t] == 0).collect();
    let mut placed = 0;
    while !current.is_empty() {
        let depth = layers.len();
        let mut next = Vec::new();
        for &t in &current {
            layer_of[t] = depth;
            for &d in &downwind[t] {
                pending[d] -= 1;
                if pending[d] == 0 {
                    next.push(d);
                }
            }
        }
        placed += current.len();
        next.sort_unstable();
        layers.push(std::mem::replace(&mut current, next));
    }

    if placed != n {
        let stuck: Vec<usize> = (0..n).filter(|&t| layer_of[t] == usize::MAX).collect();
        return Err(RteError::Cycle { elements: stuck });
    }
    Ok(SweepSchedule { omega, layers, upwind, layer_of })
}

/// Streamline-diffusion parameter, global or per element.
#[derive(Clone, Copy, Debug)]
pub enum Delta<'a> {
    Uniform(f64),
    PerElement(&'a [f64]),
}

impl Delta<'_> {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Delta::Uniform(d) => *d,
            Delta::PerElement(d) => d[k],
        }
    }
}

/// Data for a single-direction transport solve.
pub struct DirectionData<'a> {
    pub omega: [f64; 2],
    pub delta: Delta<'a>,
    pub sigma_t: &'a (dyn Fn(Point) -> f64 + Sync),
    /// Right-hand side `source(element, bary, x)`.
    pub source: &'a (dyn Fn(usize, [f64; 3], Point) -> f64 + Sync),
    /// Prescribed `u` on the inflow boundary.
    pub inflow: &'a (dyn Fn(Point) -> f64 + Sync),
}

/// Walks the layers of `schedule`, solving each element with its upwind
/// traces already known. `out` holds three nodal values per element.
pub fn sweep_direction(
    mesh: &TriangleMesh,
    bases: &[ElementBasis],
    schedule: &SweepSchedule,
    data: &DirectionData<'_>,
    rules: &AssemblyRules,
    out: &mut [f64],
) -> Result<()> {
    let n = mesh.n_triangles();
    if out.len() != 3 * n || bases.len() != n || schedule.upwind.len() != n {
        return Err(RteError::InvalidArgument("sweep buffers do not match the mesh".into()));
    }
    let mut solved = vec![false; n];
    let mut faces: Vec<InflowFace<'_>> = Vec::with_capacity(3);

    for (layer_idx, layer) in schedule.layers.iter().enumerate() {
        for &k in layer {
            faces.clear();
            for (j, up) in schedule.upwind[k].iter().enumerate() {
                let trace = match *up {
                    Upwind::Outflow => continue,
                    Upwind::Boundary => Trace::Function(data.inflow),
                    Upwind::Neighbor(nb) => {
                        debug_assert!(solved[nb], "element {k} read neighbour {nb} before it was solved");
                        let (_, [pa, pb]) = mesh.neighbor_across(k, j).expect("interior edge");
                        Trace::Linear([out[3 * nb + pa], out[3 * nb + pb]])
                    }
                };
                faces.push(InflowFace { local_edge: j, trace });
            }
            let source = |bary: [f64; 3], x: Point| (data.source)(k, bary, x);
            let sys = assemble_local(&bases[k], data.omega, data.delta.at(k), data.sigma_t, &faces, &source, rules);
            let c = sys.solve().map_err(|e| RteError::Stability {
                element: k,
                direction: None,
                layer: Some(layer_idx),
                detail: e.0,
            })?;
            out[3 * k..3 * k + 3].copy_from_slice(&c);
            solved[k] = true;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Oracle: repeatedly scan all elements; an element joins the current
    /// pass when every interior inflow neighbour was finished in an earlier pass.
    fn brute_force_layers(mesh: &TriangleMesh, omega: [f64; 2]) -> Vec<Vec<usize>> {
        let n = mesh.n_triangles();
        let mut done = vec![false; n];
        let mut layers = Vec::new();
        while done.iter().any(|d| !d) {
            let ready: Vec<usize> = (0..n)
                .filter(|&t| !done[t])
                .filter(|&t| {
                    (0..3).all(|j| {
                        let nrm = mesh.outward_normal(t, j);
                        let on = omega[0] * nrm[0] + omega[1] * nrm[1];
                        match mesh.edges[mesh.triangles[t].edge_ids[j]].neighbor_of(t) {
                            Some(nb) if on < -EPS_NORMAL => done[nb],
                            _ => true,
                        }
                    })
                })
                .collect();
            assert!(!ready.is_empty(), "oracle stalled");
            for &t in &ready {
                done[t] = true;
            }
            layers.push(ready);
        }
        layers
    }

    #[test]
    fn two_triangle_square() {
        let mesh = TriangleMesh::structured_unit_square(1).unwrap();
        // triangle 0 = (0,0),(1,0),(1,1) lies below the diagonal; triangle 1 touches x = 0
        let s = build_schedule(&mesh, [1.0, 0.0]).unwrap();
        assert_eq!(s.layers, vec![vec![1], vec![0]]);
        let s = build_schedule(&mesh, [-1.0, 0.0]).unwrap();
        assert_eq!(s.layers, vec![vec![0], vec![1]]);
        // along the diagonal there is no coupling at all
        let r = 0.5f64.sqrt();
        let s = build_schedule(&mesh, [r, r]).unwrap();
        assert_eq!(s.layers, vec![vec![0, 1]]);
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mesh = TriangleMesh::structured_unit_square(5).unwrap().refine_regular().unwrap();
        for k in 0..24 {
            let th = 0.1 + k as f64 * std::f64::consts::PI / 12.0;
            let omega = [th.cos(), th.sin()];
            let s = build_schedule(&mesh, omega).unwrap();
            assert_eq!(s.layers, brute_force_layers(&mesh, omega), "theta = {th}");
        }
    }

    #[test]
    fn layers_respect_dependencies() {
        let mesh = TriangleMesh::structured_unit_square(6).unwrap();
        for th in [0.0f64, 0.3, 1.9, 3.5, 5.5] {
            let omega = [th.cos(), th.sin()];
            let s = build_schedule(&mesh, omega).unwrap();
            let mut seen = vec![0; mesh.n_triangles()];
            for layer in &s.layers {
                assert!(layer.windows(2).all(|w| w[0] < w[1]));
                for &t in layer {
                    seen[t] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
            for e in mesh.edges.iter().filter(|e| !e.is_boundary()) {
                let r = e.right.unwrap();
                let on = omega[0] * e.normal[0] + omega[1] * e.normal[1];
                if on > EPS_NORMAL {
                    assert!(s.layer_of[e.left] < s.layer_of[r]);
                } else if on < -EPS_NORMAL {
                    assert!(s.layer_of[r] < s.layer_of[e.left]);
                }
            }
            // first layer: every inflow edge is on the boundary
            for &t in &s.layers[0] {
                assert!(s.upwind[t].iter().all(|u| !matches!(u, Upwind::Neighbor(_))));
            }
            assert_eq!(build_schedule(&mesh, omega).unwrap(), s);
        }
    }

    #[test]
    fn cycle_is_reported() {
        // A negative threshold below -1 marks every edge as inflow from both
        // sides, so each interior pair depends on itself.
        let mesh = TriangleMesh::structured_unit_square(2).unwrap();
        let err = build_schedule_with_eps(&mesh, [1.0, 0.0], -2.0);
        assert!(matches!(err, Err(RteError::Cycle { ref elements }) if !elements.is_empty()));
    }

    fn solve_single(
        mesh: &TriangleMesh,
        omega: [f64; 2],
        delta: f64,
        sigma: f64,
        source: &(dyn Fn(usize, [f64; 3], Point) -> f64 + Sync),
        inflow: &(dyn Fn(Point) -> f64 + Sync),
    ) -> Vec<f64> {
        let bases = ElementBasis::for_mesh(mesh).unwrap();
        let s = build_schedule(mesh, omega).unwrap();
        let sigma_t = move |_: Point| sigma;
        let data = DirectionData { omega, delta: Delta::Uniform(delta), sigma_t: &sigma_t, source, inflow };
        let mut out = vec![f64::NAN; 3 * mesh.n_triangles()];
        sweep_direction(mesh, &bases, &s, &data, &AssemblyRules::default(), &mut out).unwrap();
        out
    }

    #[test]
    fn sweep_reproduces_constants_and_zero() {
        let mesh = TriangleMesh::structured_unit_square(4).unwrap();
        let omega = [0.6, 0.8];
        let out = solve_single(&mesh, omega, 0.1, 1.0, &|_, _, _| 1.0, &|_| 1.0);
        assert!(out.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        let out = solve_single(&mesh, omega, 0.1, 1.0, &|_, _, _| 0.0, &|_| 0.0);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn global_patch_test() {
        let mesh = TriangleMesh::structured_unit_square(5).unwrap().refine_regular().unwrap();
        let (a, b, c) = (1.5, -0.7, 2.0);
        let exact = move |x: Point| a * x[0] + b * x[1] + c;
        for th in [0.2f64, 1.7, 3.3, 4.9, std::f64::consts::FRAC_PI_2] {
            let omega = [th.cos(), th.sin()];
            let sigma = 10.0;
            let source = move |_: usize, _: [f64; 3], x: Point| omega[0] * a + omega[1] * b + sigma * exact(x);
            for delta in [0.0, mesh.h] {
                let out = solve_single(&mesh, omega, delta, sigma, &source, &exact);
                for k in 0..mesh.n_triangles() {
                    for (j, p) in mesh.triangle_points(k).iter().enumerate() {
                        assert!((out[3 * k + j] - exact(*p)).abs() < 1e-11);
                    }
                }
            }
        }
    }

    #[test]
    fn schedule_text_dump() {
        let mesh = TriangleMesh::structured_unit_square(1).unwrap();
        let s = build_schedule(&mesh, [1.0, 0.0]).unwrap();
        assert_eq!(s.to_text(), "1\n0\n");
    }
}
