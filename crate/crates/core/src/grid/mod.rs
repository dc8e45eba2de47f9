//! Structured first-order finite element grids on an interval or rectangle.
//!
//! Nodes are numbered x-fastest, `node = i + j (nx + 1)`. Vector fields are
//! stored node-major, `dof = node * dim + component`. 2D cells are bilinear
//! quadrilaterals with local node order `(0,0), (1,0), (1,1), (0,1)`.

mod assembly;
pub mod sparse;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use assembly::{
    assemble_boundary_load, assemble_mass, assemble_scalar_laplace, assemble_vector_mass, assemble_weighted_elasticity,
    lumped_mass, BoundaryTraction, ElasticityKernel,
};
use sparse::CsrPattern;

use crate::error::{Error, Result};
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    pub side: Side,
    /// Endpoint nodes in increasing coordinate order; both equal in 1D.
    pub nodes: [usize; 2],
    pub cell: usize,
    pub normal: [f64; 2],
    /// Facet measure (edge length in 2D, 1 for the point facets in 1D).
    pub measure: f64,
}

/// Shape data of the reference cell, shared by all cells of a uniform grid.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub nen: usize,
    /// Quadrature point offsets from the cell origin.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// `shape[q][a]`.
    pub shape: Vec<Vec<f64>>,
    /// `grad[q][a]`, physical gradients.
    pub grad: Vec<Vec<[f64; 2]>>,
}

impl ReferenceElement {
    fn new(dim: usize, h: [f64; 2]) -> Self {
        let g = 0.5 / 3f64.sqrt();
        let gp = [0.5 - g, 0.5 + g];
        if dim == 1 {
            let mut points = Vec::new();
            let mut shape = Vec::new();
            let mut grad = Vec::new();
            for &s in &gp {
                points.push([s * h[0], 0.0]);
                shape.push(vec![1.0 - s, s]);
                grad.push(vec![[-1.0 / h[0], 0.0], [1.0 / h[0], 0.0]]);
            }
            return ReferenceElement { nen: 2, points, weights: vec![0.5 * h[0]; 2], shape, grad };
        }
        let corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        let mut points = Vec::new();
        let mut shape = Vec::new();
        let mut grad = Vec::new();
        for &t in &gp {
            for &s in &gp {
                points.push([s * h[0], t * h[1]]);
                let mut n = Vec::with_capacity(4);
                let mut dn = Vec::with_capacity(4);
                for &(cx, cy) in &corners {
                    let (fx, dfx) = if cx == 0.0 { (1.0 - s, -1.0) } else { (s, 1.0) };
                    let (fy, dfy) = if cy == 0.0 { (1.0 - t, -1.0) } else { (t, 1.0) };
                    n.push(fx * fy);
                    dn.push([dfx * fy / h[0], fx * dfy / h[1]]);
                }
                shape.push(n);
                grad.push(dn);
            }
        }
        ReferenceElement { nen: 4, points, weights: vec![0.25 * h[0] * h[1]; 4], shape, grad }
    }

    pub fn nq(&self) -> usize {
        self.weights.len()
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    extents: [f64; 2],
    cells: [usize; 2],
    h: [f64; 2],
    n_nodes: usize,
    connectivity: Vec<usize>,
    facets: Vec<BoundaryFacet>,
    reference: ReferenceElement,
    scalar_pattern: Arc<CsrPattern>,
    vector_pattern: Arc<CsrPattern>,
    scalar_scatter: Vec<usize>,
    vector_scatter: Vec<usize>,
    execution: Execution,
}

/// Build a structured grid; 1D uses linear elements, 2D bilinear quads.
pub fn build_grid(dim: usize, extents: &[f64], cells_per_axis: &[usize]) -> Result<Grid> {
    Grid::new(dim, extents, cells_per_axis)
}

impl Grid {
    pub fn new(dim: usize, extents: &[f64], cells_per_axis: &[usize]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if extents.len() != dim || cells_per_axis.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "extents / cells per axis",
                expected: dim,
                got: extents.len().min(cells_per_axis.len()),
            });
        }
        if extents.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(Error::invalid("extents must be positive and finite"));
        }
        if cells_per_axis.contains(&0) {
            return Err(Error::invalid("every axis needs at least one cell"));
        }
        let ext = [extents[0], if dim == 2 { extents[1] } else { 0.0 }];
        let nc = [cells_per_axis[0], if dim == 2 { cells_per_axis[1] } else { 1 }];
        let h = [ext[0] / nc[0] as f64, if dim == 2 { ext[1] / nc[1] as f64 } else { 1.0 }];
        let nx = nc[0] + 1;
        let n_nodes = if dim == 1 { nx } else { nx * (nc[1] + 1) };

        let mut connectivity = Vec::new();
        let mut facets = Vec::new();
        if dim == 1 {
            for i in 0..nc[0] {
                connectivity.extend_from_slice(&[i, i + 1]);
            }
            facets.push(BoundaryFacet { side: Side::Left, nodes: [0, 0], cell: 0, normal: [-1.0, 0.0], measure: 1.0 });
            facets.push(BoundaryFacet {
                side: Side::Right,
                nodes: [nc[0], nc[0]],
                cell: nc[0] - 1,
                normal: [1.0, 0.0],
                measure: 1.0,
            });
        } else {
            let node = |i: usize, j: usize| i + j * nx;
            for j in 0..nc[1] {
                for i in 0..nc[0] {
                    connectivity.extend_from_slice(&[node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)]);
                }
            }
            let cell = |i: usize, j: usize| i + j * nc[0];
            for i in 0..nc[0] {
                facets.push(BoundaryFacet {
                    side: Side::Bottom,
                    nodes: [node(i, 0), node(i + 1, 0)],
                    cell: cell(i, 0),
                    normal: Side::Bottom.normal(),
                    measure: h[0],
                });
            }
            for j in 0..nc[1] {
                facets.push(BoundaryFacet {
                    side: Side::Right,
                    nodes: [node(nc[0], j), node(nc[0], j + 1)],
                    cell: cell(nc[0] - 1, j),
                    normal: Side::Right.normal(),
                    measure: h[1],
                });
            }
            for i in 0..nc[0] {
                facets.push(BoundaryFacet {
                    side: Side::Top,
                    nodes: [node(i, nc[1]), node(i + 1, nc[1])],
                    cell: cell(i, nc[1] - 1),
                    normal: Side::Top.normal(),
                    measure: h[0],
                });
            }
            for j in 0..nc[1] {
                facets.push(BoundaryFacet {
                    side: Side::Left,
                    nodes: [node(0, j), node(0, j + 1)],
                    cell: cell(0, j),
                    normal: Side::Left.normal(),
                    measure: h[1],
                });
            }
        }

        let reference = ReferenceElement::new(dim, h);
        let nen = reference.nen;
        let n_cells = nc[0] * nc[1];

        let mut rows = vec![Vec::new(); n_nodes];
        for c in 0..n_cells {
            let cn = &connectivity[c * nen..(c + 1) * nen];
            for &a in cn {
                rows[a].extend_from_slice(cn);
            }
        }
        let scalar_pattern = Arc::new(CsrPattern::from_rows(rows));
        let mut vrows = vec![Vec::new(); n_nodes * dim];
        for a in 0..n_nodes {
            let cols = &scalar_pattern.col_idx[scalar_pattern.row_ptr[a]..scalar_pattern.row_ptr[a + 1]];
            for i in 0..dim {
                let row = &mut vrows[a * dim + i];
                for &b in cols {
                    for j in 0..dim {
                        row.push(b * dim + j);
                    }
                }
            }
        }
        let vector_pattern = Arc::new(CsrPattern::from_rows(vrows));

        let mut scalar_scatter = Vec::with_capacity(n_cells * nen * nen);
        let nloc = nen * dim;
        let mut vector_scatter = Vec::with_capacity(n_cells * nloc * nloc);
        for c in 0..n_cells {
            let cn = &connectivity[c * nen..(c + 1) * nen];
            for &a in cn {
                for &b in cn {
                    scalar_scatter.push(scalar_pattern.position(a, b).expect("pattern covers cell"));
                }
            }
            for ia in 0..nloc {
                let gi = cn[ia / dim] * dim + ia % dim;
                for jb in 0..nloc {
                    let gj = cn[jb / dim] * dim + jb % dim;
                    vector_scatter.push(vector_pattern.position(gi, gj).expect("pattern covers cell"));
                }
            }
        }

        Ok(Grid {
            dim,
            extents: ext,
            cells: nc,
            h,
            n_nodes,
            connectivity,
            facets,
            reference,
            scalar_pattern,
            vector_pattern,
            scalar_scatter,
            vector_scatter,
            execution: Execution::default(),
        })
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn execution(&self) -> Execution {
        // below a few hundred cells the thread handoff costs more than it saves
        if self.n_cells() < 256 {
            Execution::Sequential
        } else {
            self.execution
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents[..self.dim]
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    /// Smallest mesh spacing.
    pub fn h_min(&self) -> f64 {
        self.spacing().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_cells(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn n_vector_dofs(&self) -> usize {
        self.n_nodes * self.dim
    }

    pub fn nodes_per_axis(&self) -> [usize; 2] {
        [self.cells[0] + 1, if self.dim == 2 { self.cells[1] + 1 } else { 1 }]
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i + j * (self.cells[0] + 1)
    }

    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        let nx = self.cells[0] + 1;
        let (i, j) = (node % nx, node / nx);
        [i as f64 * self.h[0], if self.dim == 2 { j as f64 * self.h[1] } else { 0.0 }]
    }

    pub fn cell_nodes(&self, cell: usize) -> &[usize] {
        let nen = self.reference.nen;
        &self.connectivity[cell * nen..(cell + 1) * nen]
    }

    pub fn cell_origin(&self, cell: usize) -> [f64; 2] {
        self.node_coords(self.cell_nodes(cell)[0])
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let o = self.cell_origin(cell);
        [o[0] + 0.5 * self.h[0], if self.dim == 2 { o[1] + 0.5 * self.h[1] } else { 0.0 }]
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.facets
    }

    pub fn facet_center(&self, facet: &BoundaryFacet) -> [f64; 2] {
        let a = self.node_coords(facet.nodes[0]);
        let b = self.node_coords(facet.nodes[1]);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        let nx = self.cells[0] + 1;
        let (i, j) = (node % nx, node / nx);
        if self.dim == 1 {
            i == 0 || i == self.cells[0]
        } else {
            i == 0 || i == self.cells[0] || j == 0 || j == self.cells[1]
        }
    }

    pub fn reference(&self) -> &ReferenceElement {
        &self.reference
    }

    pub fn scalar_pattern(&self) -> &Arc<CsrPattern> {
        &self.scalar_pattern
    }

    pub fn vector_pattern(&self) -> &Arc<CsrPattern> {
        &self.vector_pattern
    }

    pub(crate) fn scalar_scatter(&self) -> &[usize] {
        &self.scalar_scatter
    }

    pub(crate) fn vector_scatter(&self) -> &[usize] {
        &self.vector_scatter
    }

    /// Gauss-2 integral of a function of position.
    pub fn quadrature_integral(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        let r = &self.reference;
        let mut s = 0.0;
        for c in 0..self.n_cells() {
            let o = self.cell_origin(c);
            for (q, p) in r.points.iter().enumerate() {
                s += r.weights[q] * f([o[0] + p[0], o[1] + p[1]]);
            }
        }
        s
    }

    /// Integral of the finite element interpolant of nodal values.
    pub fn integrate_nodal(&self, values: &[f64]) -> f64 {
        let r = &self.reference;
        let mut s = 0.0;
        for c in 0..self.n_cells() {
            let cn = self.cell_nodes(c);
            for q in 0..r.nq() {
                let v: f64 = cn.iter().zip(&r.shape[q]).map(|(&a, n)| n * values[a]).sum();
                s += r.weights[q] * v;
            }
        }
        s
    }

    /// Nodal samples of a scalar function.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        (0..self.n_nodes).map(|n| f(self.node_coords(n))).collect()
    }

    /// Nodal samples of a vector function, node-major.
    pub fn sample_vector(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_vector_dofs());
        for n in 0..self.n_nodes {
            let v = f(self.node_coords(n));
            out.extend_from_slice(&v[..self.dim]);
        }
        out
    }

    /// Second-order one-sided difference of nodal values along the outward
    /// normal at every boundary node, per side. Corner nodes are checked once
    /// per adjacent side.
    pub fn max_normal_derivative(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        let one_sided = |v0: f64, v1: f64, v2: f64, h: f64| (-3.0 * v0 + 4.0 * v1 - v2) / (2.0 * h);
        let [nx, ny] = self.nodes_per_axis();
        if nx >= 3 {
            for j in 0..ny {
                let at = |i: usize| values[self.node_index(i, j)];
                worst = worst.max(one_sided(at(0), at(1), at(2), self.h[0]).abs());
                let l = nx - 1;
                worst = worst.max(one_sided(at(l), at(l - 1), at(l - 2), self.h[0]).abs());
            }
        }
        if self.dim == 2 && ny >= 3 {
            for i in 0..nx {
                let at = |j: usize| values[self.node_index(i, j)];
                worst = worst.max(one_sided(at(0), at(1), at(2), self.h[1]).abs());
                let l = ny - 1;
                worst = worst.max(one_sided(at(l), at(l - 1), at(l - 2), self.h[1]).abs());
            }
        }
        worst
    }

    /// Reflection `x -> L - x` of node indices (mirror across the vertical
    /// midline).
    pub fn mirror_node(&self, node: usize) -> usize {
        let nx = self.cells[0] + 1;
        let (i, j) = (node % nx, node / nx);
        self.node_index(self.cells[0] - i, j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting() {
        let g = build_grid(1, &[1.0], &[4]).unwrap();
        assert_eq!(g.n_nodes(), 5);
        assert_eq!(g.boundary_facets().len(), 2);
        let g = build_grid(2, &[1.0, 1.0], &[2, 2]).unwrap();
        assert_eq!(g.n_nodes(), 9);
        assert_eq!(g.boundary_facets().len(), 8);
        let g = build_grid(2, &[2.0, 1.0], &[4, 2]).unwrap();
        assert_eq!(g.n_nodes(), 15);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(build_grid(2, &[1.0, 0.0], &[2, 2]).is_err());
        assert!(build_grid(2, &[1.0, 1.0], &[2, 0]).is_err());
        assert!(build_grid(1, &[-1.0], &[2]).is_err());
        assert!(build_grid(3, &[1.0; 3], &[1; 3]).is_err());
    }

    #[test]
    fn normals_point_outward() {
        for g in [build_grid(2, &[2.0, 1.0], &[4, 3]).unwrap(), build_grid(1, &[1.5], &[3]).unwrap()] {
            for f in g.boundary_facets() {
                let fc = g.facet_center(f);
                let cc = g.cell_center(f.cell);
                let d = (fc[0] - cc[0]) * f.normal[0] + (fc[1] - cc[1]) * f.normal[1];
                assert!(d > 0.0);
                assert_eq!(f.normal[0].abs() + f.normal[1].abs(), 1.0);
            }
        }
    }

    #[test]
    fn quadrature_examples() {
        let sq = build_grid(2, &[1.0, 1.0], &[3, 3]).unwrap();
        assert!((sq.quadrature_integral(|_| 1.0) - 1.0).abs() < 1e-14);
        let line = build_grid(1, &[1.0], &[8]).unwrap();
        assert!((line.quadrature_integral(|x| x[0]) - 0.5).abs() < 1e-15);
        assert!((line.quadrature_integral(|x| x[0] * x[0]) - 1.0 / 3.0).abs() < 1e-12);
    }
}
