//! Uniform cross-grid triangulation of a rectangle.
//!
//! Every quad of a regular `nx × ny` quadrangulation is split by its two
//! diagonals into four triangles that share a center node. Velocity and
//! temperature live on all nodes (P1), pressure is one constant per quad (Q0)
//! and the multiplier is one constant tensor per triangle.
//!
//! Node ordering: grid vertices first (row-major, `j * (nx + 1) + i`), then
//! quad centers (row-major). Quad `j * nx + i` owns triangles `4q .. 4q + 4`
//! in the order bottom, right, top, left.

use std::io::{self, Write};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("quad counts must be at least 1 (got nx = {nx}, ny = {ny})")]
    InvalidCount { nx: usize, ny: usize },
    #[error("domain extents must be positive and finite (got {x} × {y})")]
    InvalidExtent { x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub center: usize,
    /// Corners counterclockwise starting at the lower-left vertex.
    pub corners: [usize; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub x_extent: f64,
    pub y_extent: f64,
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub quads: Vec<Quad>,
    pub tri_area: Vec<f64>,
    pub tri_quad: Vec<usize>,
    pub quad_area: Vec<f64>,
    /// Nodes on the top edge, corners included.
    pub boundary_nodes_gamma: Vec<usize>,
    /// Remaining boundary nodes.
    pub boundary_nodes_gamma0: Vec<usize>,
    pub boundary_edges_gamma: Vec<BoundaryEdge>,
    /// Inradius of the triangles.
    pub h: f64,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_quads(&self) -> usize {
        self.quads.len()
    }

    pub fn n_grid_vertices(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn domain_area(&self) -> f64 {
        self.x_extent * self.y_extent
    }

    /// Flags every node lying on the outer boundary (Γ ∪ Γ0).
    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_nodes()];
        for &i in self.boundary_nodes_gamma.iter().chain(&self.boundary_nodes_gamma0) {
            mask[i] = true;
        }
        mask
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Returns a copy with every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Mesh, MeshError> {
        build_cross_grid(self.nx, self.ny, self.x_extent * factor, self.y_extent * factor)
    }

    /// Plain-text listing: one node or triangle per line.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# nodes {}", self.n_nodes())?;
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(w, "node {} {:.17e} {:.17e}", i, p[0], p[1])?;
        }
        writeln!(w, "# triangles {}", self.n_triangles())?;
        for (t, tri) in self.triangles.iter().enumerate() {
            writeln!(w, "triangle {} {} {} {} quad {}", t, tri[0], tri[1], tri[2], self.tri_quad[t])?;
        }
        Ok(())
    }
}

pub fn build_cross_grid(nx: usize, ny: usize, x_extent: f64, y_extent: f64) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::InvalidCount { nx, ny });
    }
    if !(x_extent > 0.0 && y_extent > 0.0 && x_extent.is_finite() && y_extent.is_finite()) {
        return Err(MeshError::InvalidExtent { x: x_extent, y: y_extent });
    }

    let dx = x_extent / nx as f64;
    let dy = y_extent / ny as f64;
    let n_vertices = (nx + 1) * (ny + 1);
    let n_quads = nx * ny;
    let vertex = |i: usize, j: usize| j * (nx + 1) + i;

    let mut nodes = Vec::with_capacity(n_vertices + n_quads);
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([i as f64 * dx, j as f64 * dy]);
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            nodes.push([(i as f64 + 0.5) * dx, (j as f64 + 0.5) * dy]);
        }
    }

    let mut triangles = Vec::with_capacity(4 * n_quads);
    let mut quads = Vec::with_capacity(n_quads);
    let mut tri_quad = Vec::with_capacity(4 * n_quads);
    for j in 0..ny {
        for i in 0..nx {
            let q = j * nx + i;
            let c = n_vertices + q;
            let (v00, v10, v11, v01) = (vertex(i, j), vertex(i + 1, j), vertex(i + 1, j + 1), vertex(i, j + 1));
            triangles.push([v00, v10, c]);
            triangles.push([v10, v11, c]);
            triangles.push([v11, v01, c]);
            triangles.push([v01, v00, c]);
            tri_quad.extend_from_slice(&[q; 4]);
            quads.push(Quad { center: c, corners: [v00, v10, v11, v01] });
        }
    }

    let gamma: Vec<usize> = (0..=nx).map(|i| vertex(i, ny)).collect();
    let mut gamma0 = Vec::new();
    for j in 0..ny {
        for i in 0..=nx {
            if j == 0 || i == 0 || i == nx {
                gamma0.push(vertex(i, j));
            }
        }
    }
    let edges = (0..nx)
        .map(|i| BoundaryEdge { nodes: [vertex(i, ny), vertex(i + 1, ny)], length: dx })
        .collect();

    let mut mesh = Mesh {
        nx,
        ny,
        x_extent,
        y_extent,
        nodes,
        triangles,
        quads,
        tri_area: Vec::new(),
        tri_quad,
        quad_area: vec![dx * dy; n_quads],
        boundary_nodes_gamma: gamma,
        boundary_nodes_gamma0: gamma0,
        boundary_edges_gamma: edges,
        h: 0.0,
    };
    mesh.tri_area = (0..mesh.n_triangles()).map(|t| mesh.signed_area(t)).collect();
    mesh.h = inradius(&mesh);
    Ok(mesh)
}

/// Inradius (area over semiperimeter) of triangle 0.
pub fn inradius(mesh: &Mesh) -> f64 {
    let [a, b, c] = mesh.triangles[0];
    let dist = |p: usize, q: usize| {
        let (x, y) = (mesh.nodes[p], mesh.nodes[q]);
        ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt()
    };
    let semi = 0.5 * (dist(a, b) + dist(b, c) + dist(c, a));
    mesh.signed_area(0).abs() / semi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_quad_counts_and_inradius() {
        let m = build_cross_grid(1, 1, 1.0, 1.0).unwrap();
        assert_eq!((m.n_nodes(), m.n_triangles(), m.n_quads()), (5, 4, 1));
        // 0.25 / (1 + sqrt(2)/2 * 2 / 2 ...) : area 1/4, semiperimeter (1 + sqrt 2)/2
        let expected = 0.25 / (0.5 * (1.0 + 2.0f64.sqrt()));
        assert!((m.h - expected).abs() < 1e-15);
        assert!((m.h - 0.207107).abs() < 1e-6);
    }

    #[test]
    fn counting_formula() {
        let m = build_cross_grid(2, 2, 1.0, 1.0).unwrap();
        assert_eq!((m.n_nodes(), m.n_triangles(), m.n_quads()), (13, 16, 4));
        let m = build_cross_grid(3, 5, 2.0, 1.0).unwrap();
        assert_eq!(m.n_nodes(), 4 * 6 + 15);
        assert_eq!(m.n_triangles(), 60);
    }

    #[test]
    fn fine_mesh_inradius() {
        let m = build_cross_grid(90, 90, 1.0, 1.0).unwrap();
        let a = 1.0 / 90.0;
        assert!((m.h - a / (2.0 * (1.0 + 2.0f64.sqrt()))).abs() < 1e-15);
        assert!((m.h - 0.0023).abs() < 5e-5);
    }

    #[test]
    fn scaling_doubles_inradius() {
        let m = build_cross_grid(3, 3, 1.0, 1.0).unwrap();
        let s = m.scaled(2.0).unwrap();
        assert!((s.h - 2.0 * m.h).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(build_cross_grid(0, 1, 1.0, 1.0).unwrap_err(), MeshError::InvalidCount { nx: 0, ny: 1 });
        assert!(matches!(build_cross_grid(1, 1, -1.0, 1.0), Err(MeshError::InvalidExtent { .. })));
        assert!(matches!(build_cross_grid(1, 1, 1.0, 0.0), Err(MeshError::InvalidExtent { .. })));
    }

    #[test]
    fn areas_orientation_and_congruence() {
        let m = build_cross_grid(4, 3, 1.0, 0.75).unwrap();
        let total: f64 = m.tri_area.iter().sum();
        assert!((total - 0.75).abs() < 1e-12 * 0.75);
        for t in 0..m.n_triangles() {
            assert!(m.signed_area(t) > 0.0);
            assert!((m.tri_area[t] - m.tri_area[0]).abs() < 1e-15);
        }
        assert_eq!(m.tri_quad.len(), m.n_triangles());
        for (q, quad) in m.quads.iter().enumerate() {
            for t in 4 * q..4 * q + 4 {
                assert!(m.triangles[t].contains(&quad.center));
                assert_eq!(m.tri_quad[t], q);
            }
        }
    }

    #[test]
    fn node_valence() {
        let m = build_cross_grid(3, 3, 1.0, 1.0).unwrap();
        let mut count = vec![0usize; m.n_nodes()];
        for tri in &m.triangles {
            for &v in tri {
                count[v] += 1;
            }
        }
        for q in &m.quads {
            assert_eq!(count[q.center], 4);
        }
        let boundary = m.boundary_mask();
        for v in 0..m.n_grid_vertices() {
            if !boundary[v] {
                assert_eq!(count[v], 8);
            }
        }
    }

    #[test]
    fn boundary_sets() {
        let m = build_cross_grid(4, 2, 1.0, 1.0).unwrap();
        assert_eq!(m.boundary_nodes_gamma.len(), 5);
        for &i in &m.boundary_nodes_gamma {
            assert_eq!(m.nodes[i][1], 1.0);
            assert!(!m.boundary_nodes_gamma0.contains(&i));
        }
        // top corners belong to Γ
        assert!(m.boundary_nodes_gamma.contains(&m.n_grid_vertices().saturating_sub(1)));
        assert_eq!(m.boundary_nodes_gamma.len() + m.boundary_nodes_gamma0.len(), 2 * 5 + 2 * 1);
        let len: f64 = m.boundary_edges_gamma.iter().map(|e| e.length).sum();
        assert!((len - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dump_lists_every_entity() {
        let m = build_cross_grid(1, 1, 1.0, 1.0).unwrap();
        let mut buf = Vec::new();
        m.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("node ")).count(), 5);
        assert_eq!(text.lines().filter(|l| l.starts_with("triangle ")).count(), 4);
    }
}
