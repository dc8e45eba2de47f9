//! Bilinear and linear forms on a [`Grid`].
//!
//! Element matrices are computed cell-parallel and scattered serially in cell
//! order through precomputed value positions, so the assembled values do not
//! depend on the number of workers.

use super::sparse::CsrMatrix;
use super::{Grid, Side};
use crate::error::{Error, Result};
use crate::material::StiffnessTensor;
use crate::par;

fn scatter(grid: &Grid, vector: bool, elems: &[Vec<f64>]) -> CsrMatrix {
    let (pattern, positions) = if vector {
        (grid.vector_pattern().clone(), grid.vector_scatter())
    } else {
        (grid.scalar_pattern().clone(), grid.scalar_scatter())
    };
    let mut m = CsrMatrix::zeros(pattern);
    let vals = m.values_mut();
    let stride = elems.first().map_or(0, Vec::len);
    for (c, e) in elems.iter().enumerate() {
        for (k, v) in e.iter().enumerate() {
            vals[positions[c * stride + k]] += v;
        }
    }
    m
}

fn uniform(grid: &Grid, vector: bool, elem: Vec<f64>) -> CsrMatrix {
    let elems = vec![elem; grid.n_cells()];
    scatter(grid, vector, &elems)
}

/// Consistent scalar mass matrix.
pub fn assemble_mass(grid: &Grid) -> CsrMatrix {
    let r = grid.reference();
    let nen = r.nen;
    let mut e = vec![0.0; nen * nen];
    for q in 0..r.nq() {
        for a in 0..nen {
            for b in 0..nen {
                e[a * nen + b] += r.weights[q] * r.shape[q][a] * r.shape[q][b];
            }
        }
    }
    uniform(grid, false, e)
}

/// Consistent mass matrix for vector fields (block diagonal per component).
pub fn assemble_vector_mass(grid: &Grid) -> CsrMatrix {
    let r = grid.reference();
    let (nen, dim) = (r.nen, grid.dim());
    let nloc = nen * dim;
    let mut e = vec![0.0; nloc * nloc];
    for q in 0..r.nq() {
        for a in 0..nen {
            for b in 0..nen {
                let m = r.weights[q] * r.shape[q][a] * r.shape[q][b];
                for i in 0..dim {
                    e[(a * dim + i) * nloc + b * dim + i] += m;
                }
            }
        }
    }
    uniform(grid, true, e)
}

/// Neumann Laplacian `int grad phi_a . grad phi_b`.
pub fn assemble_scalar_laplace(grid: &Grid) -> CsrMatrix {
    let r = grid.reference();
    let nen = r.nen;
    let mut e = vec![0.0; nen * nen];
    for q in 0..r.nq() {
        for a in 0..nen {
            for b in 0..nen {
                let ga = r.grad[q][a];
                let gb = r.grad[q][b];
                e[a * nen + b] += r.weights[q] * (ga[0] * gb[0] + ga[1] * gb[1]);
            }
        }
    }
    uniform(grid, false, e)
}

/// Lumped (row-sum) scalar mass.
pub fn lumped_mass(grid: &Grid) -> Vec<f64> {
    assemble_mass(grid).row_sums()
}

/// Per-quadrature-point elasticity element matrices for one stiffness tensor.
#[derive(Debug, Clone)]
pub struct ElasticityKernel {
    dim: usize,
    nloc: usize,
    /// `kq[q]` is `w_q B_q^T D B_q`, row-major `nloc x nloc`.
    kq: Vec<Vec<f64>>,
    /// `b[q]` maps local dofs to Voigt strain `[e11, e22, 2 e12]`.
    b: Vec<Vec<[f64; 3]>>,
    stiffness: StiffnessTensor,
}

impl ElasticityKernel {
    pub fn new(grid: &Grid, stiffness: &StiffnessTensor) -> Result<Self> {
        if stiffness.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                what: "stiffness tensor vs grid dimension",
                expected: grid.dim(),
                got: stiffness.dim(),
            });
        }
        let r = grid.reference();
        let dim = grid.dim();
        let nloc = r.nen * dim;
        let d = stiffness.voigt();
        let mut kq = Vec::with_capacity(r.nq());
        let mut bs = Vec::with_capacity(r.nq());
        for q in 0..r.nq() {
            // column ia of B
            let mut b = vec![[0.0; 3]; nloc];
            for a in 0..r.nen {
                let g = r.grad[q][a];
                if dim == 1 {
                    b[a] = [g[0], 0.0, 0.0];
                } else {
                    b[a * 2] = [g[0], 0.0, g[1]];
                    b[a * 2 + 1] = [0.0, g[1], g[0]];
                }
            }
            let ncomp = if dim == 1 { 1 } else { 3 };
            let mut k = vec![0.0; nloc * nloc];
            for i in 0..nloc {
                let mut db = [0.0; 3];
                for (s, dbs) in db.iter_mut().enumerate().take(ncomp) {
                    *dbs = (0..ncomp).map(|t| d[s][t] * b[i][t]).sum();
                }
                for j in 0..nloc {
                    let v: f64 = (0..ncomp).map(|s| b[j][s] * db[s]).sum();
                    k[j * nloc + i] = r.weights[q] * v;
                }
            }
            kq.push(k);
            bs.push(b);
        }
        Ok(ElasticityKernel { dim, nloc, kq, b: bs, stiffness: stiffness.clone() })
    }

    pub fn stiffness(&self) -> &StiffnessTensor {
        &self.stiffness
    }

    /// `int w C eps(u) : eps(zeta)` with `w` the interpolant of nodal weights.
    pub fn assemble(&self, grid: &Grid, weight: &[f64]) -> Result<CsrMatrix> {
        if weight.len() != grid.n_nodes() {
            return Err(Error::DimensionMismatch {
                what: "elasticity weight",
                expected: grid.n_nodes(),
                got: weight.len(),
            });
        }
        let r = grid.reference();
        let nl2 = self.nloc * self.nloc;
        let elems = par::map_range(grid.execution(), grid.n_cells(), |c| {
            let cn = grid.cell_nodes(c);
            let mut e = vec![0.0; nl2];
            for q in 0..r.nq() {
                let wq: f64 = cn.iter().zip(&r.shape[q]).map(|(&a, n)| n * weight[a]).sum();
                if wq != 0.0 {
                    for (ek, kk) in e.iter_mut().zip(&self.kq[q]) {
                        *ek += wq * kk;
                    }
                }
            }
            e
        });
        Ok(scatter(grid, true, &elems))
    }

    /// Voigt strain of `u` at quadrature point `q` of `cell`.
    pub fn strain(&self, grid: &Grid, u: &[f64], cell: usize, q: usize) -> [f64; 3] {
        let cn = grid.cell_nodes(cell);
        let mut e = [0.0; 3];
        for (a, &node) in cn.iter().enumerate() {
            for i in 0..self.dim {
                let col = self.b[q][a * self.dim + i];
                let ui = u[node * self.dim + i];
                for s in 0..3 {
                    e[s] += col[s] * ui;
                }
            }
        }
        e
    }

    /// Nodal loads `w_a = int phi_a C eps(u) : eps(u)`.
    pub fn strain_energy_loads(&self, grid: &Grid, u: &[f64]) -> Vec<f64> {
        let r = grid.reference();
        let per_cell = par::map_range(grid.execution(), grid.n_cells(), |c| {
            let mut out = vec![0.0; r.nen];
            for q in 0..r.nq() {
                let ev = self.strain(grid, u, c, q);
                let e = [ev[0], ev[1], 0.5 * ev[2]];
                let w = self.stiffness.energy_density(&e);
                for a in 0..r.nen {
                    out[a] += r.weights[q] * r.shape[q][a] * w;
                }
            }
            out
        });
        let mut w = vec![0.0; grid.n_nodes()];
        for (c, vals) in per_cell.iter().enumerate() {
            for (&node, v) in grid.cell_nodes(c).iter().zip(vals) {
                w[node] += v;
            }
        }
        w
    }
}

/// Convenience wrapper building the kernel for a single assembly.
pub fn assemble_weighted_elasticity(grid: &Grid, stiffness: &StiffnessTensor, weight: &[f64]) -> Result<CsrMatrix> {
    ElasticityKernel::new(grid, stiffness)?.assemble(grid, weight)
}

/// Traction on the boundary, stored per facet as values at both facet
/// endpoints and interpolated linearly in between. Corner nodes therefore
/// carry one value per adjacent facet rather than a shared nodal value.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTraction {
    values: Vec<[[f64; 2]; 2]>,
}

impl BoundaryTraction {
    pub fn zero(grid: &Grid) -> Self {
        BoundaryTraction { values: vec![[[0.0; 2]; 2]; grid.boundary_facets().len()] }
    }

    /// Sample `f(side, point)` at facet endpoints.
    pub fn from_fn(grid: &Grid, f: impl Fn(Side, [f64; 2]) -> [f64; 2]) -> Self {
        let values = grid
            .boundary_facets()
            .iter()
            .map(|fa| [f(fa.side, grid.node_coords(fa.nodes[0])), f(fa.side, grid.node_coords(fa.nodes[1]))])
            .collect();
        BoundaryTraction { values }
    }

    pub fn from_facet_values(grid: &Grid, values: Vec<[[f64; 2]; 2]>) -> Result<Self> {
        if values.len() != grid.boundary_facets().len() {
            return Err(Error::DimensionMismatch {
                what: "boundary traction facets",
                expected: grid.boundary_facets().len(),
                got: values.len(),
            });
        }
        Ok(BoundaryTraction { values })
    }

    /// From a nodal vector field (node-major); every interior node must carry
    /// zero traction.
    pub fn from_nodal(grid: &Grid, nodal: &[f64]) -> Result<Self> {
        let dim = grid.dim();
        if nodal.len() != grid.n_vector_dofs() {
            return Err(Error::DimensionMismatch {
                what: "nodal traction",
                expected: grid.n_vector_dofs(),
                got: nodal.len(),
            });
        }
        for n in 0..grid.n_nodes() {
            if !grid.is_boundary_node(n) && nodal[n * dim..(n + 1) * dim].iter().any(|&v| v != 0.0) {
                return Err(Error::invalid(format!("traction given at interior node {n}")));
            }
        }
        let at = |n: usize| {
            let mut v = [0.0; 2];
            v[..dim].copy_from_slice(&nodal[n * dim..(n + 1) * dim]);
            v
        };
        let values = grid.boundary_facets().iter().map(|f| [at(f.nodes[0]), at(f.nodes[1])]).collect();
        Ok(BoundaryTraction { values })
    }

    pub fn facet_values(&self) -> &[[[f64; 2]; 2]] {
        &self.values
    }

    pub fn scaled(&self, s: f64) -> Self {
        BoundaryTraction { values: self.values.iter().map(|p| p.map(|v| v.map(|x| s * x))).collect() }
    }

    pub fn axpy(&mut self, s: f64, other: &BoundaryTraction) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            for e in 0..2 {
                for i in 0..2 {
                    a[e][i] += s * b[e][i];
                }
            }
        }
    }

    /// `int_Gamma self . other`, exact for the facet-linear representation.
    pub fn inner(&self, grid: &Grid, other: &BoundaryTraction) -> f64 {
        let mut s = 0.0;
        for (f, (a, b)) in grid.boundary_facets().iter().zip(self.values.iter().zip(&other.values)) {
            if grid.dim() == 1 {
                s += a[0][0] * b[0][0];
                continue;
            }
            for (sg, wg) in edge_gauss() {
                let av = lerp(a, sg);
                let bv = lerp(b, sg);
                s += wg * f.measure * (av[0] * bv[0] + av[1] * bv[1]);
            }
        }
        s
    }

    /// `int_Gamma b` per component.
    pub fn resultant(&self, grid: &Grid) -> [f64; 2] {
        let mut r = [0.0; 2];
        for (f, a) in grid.boundary_facets().iter().zip(&self.values) {
            if grid.dim() == 1 {
                r[0] += a[0][0];
            } else {
                for i in 0..2 {
                    r[i] += 0.5 * f.measure * (a[0][i] + a[1][i]);
                }
            }
        }
        r
    }
}

fn edge_gauss() -> [(f64, f64); 2] {
    let g = 0.5 / 3f64.sqrt();
    [(0.5 - g, 0.5), (0.5 + g, 0.5)]
}

fn lerp(v: &[[f64; 2]; 2], s: f64) -> [f64; 2] {
    [(1.0 - s) * v[0][0] + s * v[1][0], (1.0 - s) * v[0][1] + s * v[1][1]]
}

/// Load vector `int_Gamma b . zeta` over vector dofs.
pub fn assemble_boundary_load(grid: &Grid, b: &BoundaryTraction) -> Vec<f64> {
    let dim = grid.dim();
    let mut load = vec![0.0; grid.n_vector_dofs()];
    for (f, v) in grid.boundary_facets().iter().zip(b.facet_values()) {
        if dim == 1 {
            // point facet: the boundary integral is an evaluation
            load[f.nodes[0]] += v[0][0];
            continue;
        }
        for (sg, wg) in edge_gauss() {
            let bv = lerp(v, sg);
            let phi = [1.0 - sg, sg];
            for (e, &node) in f.nodes.iter().enumerate() {
                for i in 0..2 {
                    load[node * 2 + i] += wg * f.measure * phi[e] * bv[i];
                }
            }
        }
    }
    load
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn mass_lump_1d() {
        let g = build_grid(1, &[1.0], &[2]).unwrap();
        let m = lumped_mass(&g);
        for (a, b) in m.iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn laplace_kernel_and_symmetry() {
        let g = build_grid(2, &[2.0, 1.0], &[4, 3]).unwrap();
        let a = assemble_scalar_laplace(&g);
        assert!(a.matvec(&vec![1.0; g.n_nodes()]).iter().all(|v| v.abs() < 1e-12));
        assert!(a.asymmetry() < 1e-12);
        let total: f64 = lumped_mass(&g).iter().sum();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bar_stencil() {
        let g = build_grid(1, &[1.0], &[2]).unwrap();
        let c = StiffnessTensor::isotropic(1, 1.0, 1.0).unwrap();
        let k = assemble_weighted_elasticity(&g, &c, &[1.0; 3]).unwrap();
        // C = 3, h = 0.5
        let d = k.to_dense();
        let expect = [[6.0, -6.0, 0.0], [-6.0, 12.0, -6.0], [0.0, -6.0, 6.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((d[i][j] - expect[i][j]).abs() < 1e-12);
            }
        }
        let z = assemble_weighted_elasticity(&g, &c, &[0.0; 3]).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn translation_in_kernel() {
        let g = build_grid(2, &[1.0, 1.0], &[3, 3]).unwrap();
        let c = StiffnessTensor::isotropic(2, 1.0, 1.0).unwrap();
        let k = assemble_weighted_elasticity(&g, &c, &vec![1.0; g.n_nodes()]).unwrap();
        let u = g.sample_vector(|_| [0.3, -0.7]);
        assert!(k.matvec(&u).iter().all(|v| v.abs() < 1e-12));
        assert!(k.asymmetry() < 1e-12);
    }

    #[test]
    fn boundary_loads() {
        let g = build_grid(1, &[1.0], &[4]).unwrap();
        let b = BoundaryTraction::from_fn(&g, |s, _| if s == Side::Right { [1.0, 0.0] } else { [0.0; 2] });
        let l = assemble_boundary_load(&g, &b);
        assert_eq!(l, vec![0.0, 0.0, 0.0, 0.0, 1.0]);

        let g = build_grid(2, &[1.0, 1.0], &[2, 2]).unwrap();
        let b = BoundaryTraction::from_fn(&g, |s, _| if s == Side::Right { [1.0, 0.0] } else { [0.0; 2] });
        let l = assemble_boundary_load(&g, &b);
        let fx: f64 = l.iter().step_by(2).sum();
        assert!((fx - 1.0).abs() < 1e-14);
        assert!(assemble_boundary_load(&g, &BoundaryTraction::zero(&g)).iter().all(|&v| v == 0.0));
        assert!((b.inner(&g, &b) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn nodal_traction_must_live_on_boundary() {
        let g = build_grid(2, &[1.0, 1.0], &[2, 2]).unwrap();
        let mut nodal = vec![0.0; g.n_vector_dofs()];
        nodal[2 * g.node_index(1, 1)] = 1.0;
        assert!(BoundaryTraction::from_nodal(&g, &nodal).is_err());
        nodal[2 * g.node_index(1, 1)] = 0.0;
        nodal[2 * g.node_index(2, 1)] = 1.0;
        assert!(BoundaryTraction::from_nodal(&g, &nodal).is_ok());
    }
}
