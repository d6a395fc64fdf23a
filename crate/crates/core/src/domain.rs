//! Discrete geometry: meshes of the closed domain with lumped interior and
//! boundary measures, the boundary weight `b`, and the element-wise gradient
//! and boundary tangential-gradient operators.
//!
//! Nodal fields live on all mesh nodes. The trace of a field is read through
//! the `boundary_nodes` index map, so interior values and traces can never
//! disagree.

use std::fmt::Write as _;

use thiserror::Error;

use crate::numeric::pairwise_sum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("boundary weight b must be positive and finite, got {value} at ({x}, {y})")]
    NonpositiveWeight { value: f64, x: f64, y: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mesh file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Per-element linear map from nodal values to a constant gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub nodes: Vec<usize>,
    /// Row-major `nodes.len() x dim` gradient coefficients.
    pub coeffs: Vec<f64>,
    /// Length or area of the element.
    pub measure: f64,
}

/// Sparse operator mapping nodal values to per-element constant gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientOperator {
    dim: usize,
    stencils: Vec<Stencil>,
}

impl GradientOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stencils(&self) -> &[Stencil] {
        &self.stencils
    }

    pub fn len(&self) -> usize {
        self.stencils.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stencils.is_empty()
    }

    /// Gradient of element `e`; components past `dim` are zero.
    pub fn element_gradient(&self, e: usize, values: &[f64]) -> [f64; 2] {
        let st = &self.stencils[e];
        let mut g = [0.0; 2];
        for (k, &n) in st.nodes.iter().enumerate() {
            for (gd, c) in g
                .iter_mut()
                .zip(&st.coeffs[k * self.dim..(k + 1) * self.dim])
            {
                *gd += c * values[n];
            }
        }
        g
    }

    /// All element gradients, flattened `len() x dim`.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * self.dim);
        for e in 0..self.len() {
            let g = self.element_gradient(e, values);
            out.extend_from_slice(&g[..self.dim]);
        }
        out
    }
}

/// A meshed closed domain in one or two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDomain {
    dim: usize,
    coords: Vec<[f64; 2]>,
    boundary_nodes: Vec<usize>,
    elements: Vec<Vec<usize>>,
    /// Pairs of positions in `boundary_nodes`; empty in 1D.
    boundary_elements: Vec<[usize; 2]>,
    dx_weights: Vec<f64>,
    dsigma_weights: Vec<f64>,
    b_values: Vec<f64>,
    b0: f64,
    grad_op: GradientOperator,
    tangential_grad_op: GradientOperator,
}

impl DiscreteDomain {
    /// Uniform mesh of `(0, length)`. The boundary measure consists of two
    /// unit atoms at the endpoints and the tangential gradient is the zero map.
    pub fn interval(
        n_cells: usize,
        length: f64,
        b_left: f64,
        b_right: f64,
    ) -> Result<Self, DomainError> {
        if n_cells < 2 {
            return Err(DomainError::BadParameter(format!(
                "need n_cells >= 2, got {n_cells}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(DomainError::BadParameter(format!(
                "length must be positive, got {length}"
            )));
        }
        check_b(b_left, [0.0, 0.0])?;
        check_b(b_right, [length, 0.0])?;
        let h = length / n_cells as f64;
        let coords: Vec<[f64; 2]> = (0..=n_cells).map(|i| [i as f64 * h, 0.0]).collect();
        let elements: Vec<Vec<usize>> = (0..n_cells).map(|i| vec![i, i + 1]).collect();
        let mut dx = vec![h; n_cells + 1];
        dx[0] = 0.5 * h;
        dx[n_cells] = 0.5 * h;
        Self::assemble(
            1,
            coords,
            elements,
            vec![0, n_cells],
            Vec::new(),
            dx,
            vec![1.0, 1.0],
            vec![b_left, b_right],
        )
    }

    /// Structured triangulation of `(0, lx) x (0, ly)` with each cell split
    /// along its diagonal. The boundary is ordered counterclockwise from the
    /// origin and treated as a closed polyline.
    pub fn rectangle(
        nx: usize,
        ny: usize,
        lx: f64,
        ly: f64,
        b: impl Fn([f64; 2]) -> f64,
    ) -> Result<Self, DomainError> {
        if nx < 2 || ny < 2 {
            return Err(DomainError::BadParameter(format!(
                "need nx, ny >= 2, got {nx} x {ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(DomainError::BadParameter(format!(
                "side lengths must be positive, got {lx} x {ly}"
            )));
        }
        let (hx, hy) = (lx / nx as f64, ly / ny as f64);
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut coords = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                // Pin the far edges so boundary coordinates are exact.
                let x = if i == nx { lx } else { i as f64 * hx };
                let y = if j == ny { ly } else { j as f64 * hy };
                coords.push([x, y]);
            }
        }
        let mut elements = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                elements.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                elements.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let mut dx = vec![0.0; coords.len()];
        for el in &elements {
            let area = triangle_area(&coords, el);
            for &n in el {
                dx[n] += area / 3.0;
            }
        }

        let mut boundary = Vec::with_capacity(2 * (nx + ny));
        boundary.extend((0..nx).map(|i| id(i, 0)));
        boundary.extend((0..ny).map(|j| id(nx, j)));
        boundary.extend((1..=nx).rev().map(|i| id(i, ny)));
        boundary.extend((1..=ny).rev().map(|j| id(0, j)));
        let nb = boundary.len();
        let segments: Vec<[usize; 2]> = (0..nb).map(|k| [k, (k + 1) % nb]).collect();
        let mut dsigma = vec![0.0; nb];
        for s in &segments {
            let len = dist(coords[boundary[s[0]]], coords[boundary[s[1]]]);
            dsigma[s[0]] += 0.5 * len;
            dsigma[s[1]] += 0.5 * len;
        }
        let mut b_values = Vec::with_capacity(nb);
        for &n in &boundary {
            let v = b(coords[n]);
            check_b(v, coords[n])?;
            b_values.push(v);
        }
        Self::assemble(
            2, coords, elements, boundary, segments, dx, dsigma, b_values,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        dim: usize,
        coords: Vec<[f64; 2]>,
        elements: Vec<Vec<usize>>,
        boundary_nodes: Vec<usize>,
        boundary_elements: Vec<[usize; 2]>,
        dx_weights: Vec<f64>,
        dsigma_weights: Vec<f64>,
        b_values: Vec<f64>,
    ) -> Result<Self, DomainError> {
        let stencils = elements
            .iter()
            .map(|el| element_stencil(dim, &coords, el))
            .collect::<Result<Vec<_>, _>>()?;
        let grad_op = GradientOperator { dim, stencils };
        let tangential = boundary_elements
            .iter()
            .map(|seg| {
                let len = dist(
                    coords[boundary_nodes[seg[0]]],
                    coords[boundary_nodes[seg[1]]],
                );
                if !(len > 0.0) {
                    return Err(DomainError::BadParameter(
                        "degenerate boundary segment".into(),
                    ));
                }
                Ok(Stencil {
                    nodes: vec![seg[0], seg[1]],
                    coeffs: vec![-1.0 / len, 1.0 / len],
                    measure: len,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let tangential_grad_op = GradientOperator {
            dim: 1,
            stencils: tangential,
        };
        let b0 = b_values.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(DiscreteDomain {
            dim,
            coords,
            boundary_nodes,
            elements,
            boundary_elements,
            dx_weights,
            dsigma_weights,
            b_values,
            b0,
            grad_op,
            tangential_grad_op,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary_nodes.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn boundary_elements(&self) -> &[[usize; 2]] {
        &self.boundary_elements
    }

    pub fn dx_weights(&self) -> &[f64] {
        &self.dx_weights
    }

    pub fn dsigma_weights(&self) -> &[f64] {
        &self.dsigma_weights
    }

    pub fn b_values(&self) -> &[f64] {
        &self.b_values
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn grad_op(&self) -> &GradientOperator {
        &self.grad_op
    }

    pub fn tangential_grad_op(&self) -> &GradientOperator {
        &self.tangential_grad_op
    }

    /// `dsigma / b` per boundary node.
    pub fn dsigma_over_b(&self) -> Vec<f64> {
        self.dsigma_weights
            .iter()
            .zip(&self.b_values)
            .map(|(s, b)| s / b)
            .collect()
    }

    /// `(lambda1, lambda2) = (|Omega|, int_{dOmega} dsigma / b)`.
    pub fn measures(&self) -> (f64, f64) {
        (
            pairwise_sum(&self.dx_weights),
            pairwise_sum(&self.dsigma_over_b()),
        )
    }

    /// Total boundary measure `|dOmega|`.
    pub fn boundary_measure(&self) -> f64 {
        pairwise_sum(&self.dsigma_weights)
    }

    pub fn has_unit_weight(&self) -> bool {
        self.b_values.iter().all(|b| *b == 1.0)
    }

    /// `int f dx + int g dsigma / b` with lumped quadrature; `f` is nodal and
    /// `g` lives on the boundary nodes.
    pub fn integrate_pair(&self, f: &[f64], g: &[f64]) -> Result<f64, DomainError> {
        self.check_nodal(f)?;
        self.check_boundary(g)?;
        let mut terms: Vec<f64> = f.iter().zip(&self.dx_weights).map(|(v, w)| v * w).collect();
        terms.extend(
            g.iter()
                .zip(&self.dsigma_weights)
                .zip(&self.b_values)
                .map(|((v, s), b)| v * s / b),
        );
        Ok(pairwise_sum(&terms))
    }

    pub fn check_nodal(&self, v: &[f64]) -> Result<(), DomainError> {
        if v.len() != self.n_nodes() {
            return Err(DomainError::DimensionMismatch(format!(
                "expected {} nodal values, got {}",
                self.n_nodes(),
                v.len()
            )));
        }
        Ok(())
    }

    pub fn check_boundary(&self, v: &[f64]) -> Result<(), DomainError> {
        if v.len() != self.n_boundary() {
            return Err(DomainError::DimensionMismatch(format!(
                "expected {} boundary values, got {}",
                self.n_boundary(),
                v.len()
            )));
        }
        Ok(())
    }

    /// Plain-text mesh dump, one record per line:
    ///
    /// ```text
    /// wentzell-mesh 1
    /// dim <N>
    /// nodes <n>
    /// <x> <y> <dx_weight>                      (n lines)
    /// elements <m>
    /// <v0> <v1> [<v2>]                         (m lines)
    /// boundary <nb>
    /// <node index> <dsigma_weight> <b_value>   (nb lines)
    /// boundary_elements <k>
    /// <position i> <position j>                (k lines)
    /// ```
    ///
    /// Reals use 17 significant digits so a dump/load cycle is exact.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "wentzell-mesh 1");
        let _ = writeln!(s, "dim {}", self.dim);
        let _ = writeln!(s, "nodes {}", self.coords.len());
        for (c, w) in self.coords.iter().zip(&self.dx_weights) {
            let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", c[0], c[1], w);
        }
        let _ = writeln!(s, "elements {}", self.elements.len());
        for el in &self.elements {
            let row: Vec<String> = el.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        let _ = writeln!(s, "boundary {}", self.boundary_nodes.len());
        for ((n, w), b) in self
            .boundary_nodes
            .iter()
            .zip(&self.dsigma_weights)
            .zip(&self.b_values)
        {
            let _ = writeln!(s, "{} {:.16e} {:.16e}", n, w, b);
        }
        let _ = writeln!(s, "boundary_elements {}", self.boundary_elements.len());
        for seg in &self.boundary_elements {
            let _ = writeln!(s, "{} {}", seg[0], seg[1]);
        }
        s
    }

    /// Inverse of [`DiscreteDomain::dump`]; gradient operators are rebuilt
    /// from the geometry.
    pub fn load(text: &str) -> Result<Self, DomainError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| {
            lines.next().ok_or(DomainError::Parse {
                line: 0,
                msg: format!("unexpected end of file, expected {what}"),
            })
        };
        let (ln, header) = next("header")?;
        if header != "wentzell-mesh 1" {
            return Err(DomainError::Parse {
                line: ln,
                msg: "expected 'wentzell-mesh 1'".into(),
            });
        }
        let dim = parse_count(next("dim")?, "dim")?;
        if dim != 1 && dim != 2 {
            return Err(DomainError::Parse {
                line: ln + 1,
                msg: format!("unsupported dim {dim}"),
            });
        }
        let n = parse_count(next("nodes")?, "nodes")?;
        let mut coords = Vec::with_capacity(n);
        let mut dx = Vec::with_capacity(n);
        for _ in 0..n {
            let (l, row) = next("node row")?;
            let v: Vec<f64> = parse_row(l, row, 3)?;
            coords.push([v[0], v[1]]);
            dx.push(v[2]);
        }
        let m = parse_count(next("elements")?, "elements")?;
        let mut elements = Vec::with_capacity(m);
        for _ in 0..m {
            let (l, row) = next("element row")?;
            let v: Vec<usize> = parse_row(l, row, dim + 1)?;
            if v.iter().any(|&i| i >= n) {
                return Err(DomainError::Parse {
                    line: l,
                    msg: "node index out of range".into(),
                });
            }
            elements.push(v);
        }
        let nb = parse_count(next("boundary")?, "boundary")?;
        let (mut bnodes, mut dsigma, mut bvals) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..nb {
            let (l, row) = next("boundary row")?;
            let cols: Vec<&str> = row.split_whitespace().collect();
            if cols.len() != 3 {
                return Err(DomainError::Parse {
                    line: l,
                    msg: "expected 3 columns".into(),
                });
            }
            let node: usize = cols[0].parse().map_err(|_| DomainError::Parse {
                line: l,
                msg: "bad node index".into(),
            })?;
            let w: f64 = cols[1].parse().map_err(|_| DomainError::Parse {
                line: l,
                msg: "bad weight".into(),
            })?;
            let b: f64 = cols[2].parse().map_err(|_| DomainError::Parse {
                line: l,
                msg: "bad b value".into(),
            })?;
            if node >= n {
                return Err(DomainError::Parse {
                    line: l,
                    msg: "node index out of range".into(),
                });
            }
            check_b(b, coords[node])?;
            bnodes.push(node);
            dsigma.push(w);
            bvals.push(b);
        }
        let k = parse_count(next("boundary_elements")?, "boundary_elements")?;
        let mut segs = Vec::with_capacity(k);
        for _ in 0..k {
            let (l, row) = next("boundary element row")?;
            let v: Vec<usize> = parse_row(l, row, 2)?;
            if v.iter().any(|&i| i >= nb) {
                return Err(DomainError::Parse {
                    line: l,
                    msg: "boundary position out of range".into(),
                });
            }
            segs.push([v[0], v[1]]);
        }
        Self::assemble(dim, coords, elements, bnodes, segs, dx, dsigma, bvals)
    }
}

fn parse_count((line, row): (usize, &str), key: &str) -> Result<usize, DomainError> {
    let mut it = row.split_whitespace();
    match (it.next(), it.next().map(str::parse::<usize>)) {
        (Some(k), Some(Ok(v))) if k == key => Ok(v),
        _ => Err(DomainError::Parse {
            line,
            msg: format!("expected '{key} <count>'"),
        }),
    }
}

fn parse_row<T: std::str::FromStr>(
    line: usize,
    row: &str,
    n: usize,
) -> Result<Vec<T>, DomainError> {
    let v: Result<Vec<T>, _> = row.split_whitespace().map(str::parse).collect();
    match v {
        Ok(v) if v.len() == n => Ok(v),
        _ => Err(DomainError::Parse {
            line,
            msg: format!("expected {n} numeric columns"),
        }),
    }
}

fn check_b(value: f64, at: [f64; 2]) -> Result<(), DomainError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(DomainError::NonpositiveWeight {
            value,
            x: at[0],
            y: at[1],
        })
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn triangle_area(coords: &[[f64; 2]], el: &[usize]) -> f64 {
    let (a, b, c) = (coords[el[0]], coords[el[1]], coords[el[2]]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
}

fn element_stencil(dim: usize, coords: &[[f64; 2]], el: &[usize]) -> Result<Stencil, DomainError> {
    match dim {
        1 => {
            let h = coords[el[1]][0] - coords[el[0]][0];
            if h == 0.0 {
                return Err(DomainError::BadParameter("degenerate segment".into()));
            }
            Ok(Stencil {
                nodes: el.to_vec(),
                coeffs: vec![-1.0 / h, 1.0 / h],
                measure: h.abs(),
            })
        }
        _ => {
            let (p0, p1, p2) = (coords[el[0]], coords[el[1]], coords[el[2]]);
            let area2 = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
            if area2 == 0.0 {
                return Err(DomainError::BadParameter("degenerate triangle".into()));
            }
            Ok(Stencil {
                nodes: el.to_vec(),
                coeffs: vec![
                    (p1[1] - p2[1]) / area2,
                    (p2[0] - p1[0]) / area2,
                    (p2[1] - p0[1]) / area2,
                    (p0[0] - p2[0]) / area2,
                    (p0[1] - p1[1]) / area2,
                    (p1[0] - p0[0]) / area2,
                ],
                measure: 0.5 * area2.abs(),
            })
        }
    }
}

/// A discrete function on the closed domain: one nodal array, with the
/// boundary trace read through the domain's boundary index map.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    values: Vec<f64>,
}

impl FieldPair {
    pub fn new(values: Vec<f64>) -> Self {
        FieldPair { values }
    }

    pub fn zeros(dom: &DiscreteDomain) -> Self {
        FieldPair {
            values: vec![0.0; dom.n_nodes()],
        }
    }

    pub fn constant(dom: &DiscreteDomain, c: f64) -> Self {
        FieldPair {
            values: vec![c; dom.n_nodes()],
        }
    }

    /// Sample `u(x, y)` at every node.
    pub fn from_fn(dom: &DiscreteDomain, u: impl Fn([f64; 2]) -> f64) -> Self {
        FieldPair {
            values: dom.coords().iter().map(|c| u(*c)).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn trace(&self, dom: &DiscreteDomain) -> Vec<f64> {
        dom.boundary_nodes()
            .iter()
            .map(|&n| self.values[n])
            .collect()
    }

    pub fn dot(&self, other: &FieldPair) -> f64 {
        let terms: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        pairwise_sum(&terms)
    }

    pub fn axpy(&self, t: f64, dir: &FieldPair) -> FieldPair {
        FieldPair {
            values: self
                .values
                .iter()
                .zip(&dir.values)
                .map(|(a, d)| a + t * d)
                .collect(),
        }
    }

    pub fn sub(&self, other: &FieldPair) -> FieldPair {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, t: f64) -> FieldPair {
        FieldPair {
            values: self.values.iter().map(|a| a * t).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        crate::numeric::max_abs(&self.values)
    }
}
