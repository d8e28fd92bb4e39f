//! Analytic domains and the vertex-centred lattices built on them.
//!
//! Grid nodes sit at `origin + i*h`. Nodes within `1e-9*h` of the boundary are
//! boundary nodes. Where a grid line leaves the domain between two grid
//! nodes, an extra boundary node is placed at the exact crossing point, so
//! every interior node has all of its axis neighbours (possibly at a shorter
//! arm length).

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fd::Stencils;

pub type Point = [f64; 3];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("degenerate shape: {0}")]
    Degenerate(String),
    #[error("spacing h = {h} is too coarse for this shape (limit {limit})")]
    TooCoarse { h: f64, limit: f64 },
    #[error("not supported for this shape: {0}")]
    Unsupported(String),
    #[error("point is outside the tubular band (distance {dist}, width {sigma})")]
    OutsideBand { dist: f64, sigma: f64 },
    #[error("nearest boundary point is not unique")]
    NonUnique,
    #[error("band width {sigma} too large (must be below {limit})")]
    SigmaTooLarge { sigma: f64, limit: f64 },
}

/// Bounded analytic domain. `dim` is the length of `lo`/`center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainShape {
    Rectangle { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Annulus { center: Vec<f64>, inner: f64, outer: f64 },
    /// `{|x - c| < R, x_n > 0}`; `c` must lie on `x_n = 0`. The flat portion
    /// `T` is the disk `{|x - c| <= R, x_n = 0}`.
    HalfBall { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    Interior,
    Boundary,
    BoundaryOnT,
    Outside,
}

impl NodeClass {
    pub fn is_boundary(self) -> bool {
        matches!(self, NodeClass::Boundary | NodeClass::BoundaryOnT)
    }
}

/// Nearest boundary point of a point in a tubular band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub foot: Point,
    pub dist: f64,
    /// Exterior unit normal at `foot`.
    pub normal: Point,
}

pub(crate) fn pad(v: &[f64]) -> Point {
    let mut p = [0.0; 3];
    p[..v.len()].copy_from_slice(v);
    p
}

pub fn dist(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn norm(p: &Point) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

impl DomainShape {
    pub fn dim(&self) -> usize {
        match self {
            DomainShape::Rectangle { lo, .. } => lo.len(),
            DomainShape::Ball { center, .. }
            | DomainShape::Annulus { center, .. }
            | DomainShape::HalfBall { center, .. } => center.len(),
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let dim = self.dim();
        if !(1..=3).contains(&dim) {
            return Err(DomainError::Degenerate(format!("dimension {dim} not in 1..=3")));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            DomainShape::Rectangle { lo, hi } => {
                if hi.len() != dim {
                    return Err(DomainError::Degenerate("lo and hi differ in length".into()));
                }
                if !finite(lo) || !finite(hi) || lo.iter().zip(hi).any(|(a, b)| a >= b) {
                    return Err(DomainError::Degenerate("need lo < hi componentwise".into()));
                }
            }
            DomainShape::Ball { center, radius } => {
                if !finite(center) || !(radius.is_finite() && *radius > 0.0) {
                    return Err(DomainError::Degenerate("ball needs R > 0".into()));
                }
            }
            DomainShape::Annulus {
                center,
                inner,
                outer,
            } => {
                if dim < 2 {
                    return Err(DomainError::Degenerate("annulus needs dim >= 2".into()));
                }
                if !finite(center) || !(inner.is_finite() && outer.is_finite())
                    || !(0.0 < *inner && inner < outer)
                {
                    return Err(DomainError::Degenerate("annulus needs 0 < inner < outer".into()));
                }
            }
            DomainShape::HalfBall { center, radius } => {
                if dim < 2 {
                    return Err(DomainError::Degenerate("half-ball needs dim >= 2".into()));
                }
                if !finite(center) || !(radius.is_finite() && *radius > 0.0) {
                    return Err(DomainError::Degenerate("half-ball needs R > 0".into()));
                }
                if center[dim - 1] != 0.0 {
                    return Err(DomainError::Degenerate(
                        "half-ball centre must lie on x_n = 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn center(&self) -> Option<Point> {
        match self {
            DomainShape::Rectangle { .. } => None,
            DomainShape::Ball { center, .. }
            | DomainShape::Annulus { center, .. }
            | DomainShape::HalfBall { center, .. } => Some(pad(center)),
        }
    }

    /// Analytic diameter.
    pub fn diameter(&self) -> f64 {
        match self {
            DomainShape::Rectangle { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
                .sqrt(),
            DomainShape::Ball { radius, .. } | DomainShape::HalfBall { radius, .. } => 2.0 * radius,
            DomainShape::Annulus { outer, .. } => 2.0 * outer,
        }
    }

    /// Largest admissible lattice spacing.
    pub fn coarse_limit(&self) -> f64 {
        match self {
            DomainShape::Rectangle { lo, hi } => {
                lo.iter()
                    .zip(hi)
                    .map(|(a, b)| b - a)
                    .fold(f64::INFINITY, f64::min)
                    / 2.0
            }
            DomainShape::Ball { radius, .. } | DomainShape::HalfBall { radius, .. } => radius / 2.0,
            DomainShape::Annulus { inner, outer, .. } => (outer - inner) / 4.0,
        }
    }

    /// Signed distance to the boundary, positive inside. Exact for every
    /// shape inside the domain; exact outside for balls and annuli.
    pub fn signed_distance(&self, x: &Point) -> f64 {
        match self {
            DomainShape::Rectangle { lo, hi } => {
                let mut inside = f64::INFINITY;
                let mut out2 = 0.0;
                for k in 0..lo.len() {
                    inside = inside.min(x[k] - lo[k]).min(hi[k] - x[k]);
                    let e = (lo[k] - x[k]).max(x[k] - hi[k]).max(0.0);
                    out2 += e * e;
                }
                if out2 > 0.0 {
                    -out2.sqrt()
                } else {
                    inside
                }
            }
            DomainShape::Ball { center, radius } => radius - norm(&sub(x, &pad(center))),
            DomainShape::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = norm(&sub(x, &pad(center)));
                (r - inner).min(outer - r)
            }
            DomainShape::HalfBall { center, radius } => {
                let n = center.len() - 1;
                let p = sub(x, &pad(center));
                if x[n] >= 0.0 {
                    (radius - norm(&p)).min(x[n])
                } else {
                    let mut q = p;
                    q[n] = 0.0;
                    let e = (norm(&q) - radius).max(0.0);
                    -(e * e + x[n] * x[n]).sqrt()
                }
            }
        }
    }

    /// Distance to the boundary minus the flat portion (half-ball), otherwise
    /// the plain distance. Clamped at zero.
    pub fn distance_bar(&self, x: &Point) -> f64 {
        match self {
            DomainShape::HalfBall { center, radius } => {
                (radius - norm(&sub(x, &pad(center)))).max(0.0)
            }
            _ => self.signed_distance(x).max(0.0),
        }
    }

    /// First boundary hit from interior point `x` moving along `sign * e_axis`.
    fn ray_exit(&self, x: &Point, axis: usize, sign: f64) -> f64 {
        let sphere_exit = |c: &Point, r: f64| -> f64 {
            let p = sub(x, c);
            let pk = sign * p[axis];
            let rest = norm(&p).powi(2) - p[axis] * p[axis];
            -pk + (r * r - rest).max(0.0).sqrt()
        };
        match self {
            DomainShape::Rectangle { lo, hi } => {
                if sign > 0.0 {
                    hi[axis] - x[axis]
                } else {
                    x[axis] - lo[axis]
                }
            }
            DomainShape::Ball { center, radius } => sphere_exit(&pad(center), *radius),
            DomainShape::Annulus {
                center,
                inner,
                outer,
            } => {
                let c = pad(center);
                let mut t = sphere_exit(&c, *outer);
                let p = sub(x, &c);
                let pk = sign * p[axis];
                let rest = norm(&p).powi(2) - p[axis] * p[axis];
                let disc = inner * inner - rest;
                if disc >= 0.0 {
                    let t1 = -pk - disc.sqrt();
                    if t1 > 0.0 {
                        t = t.min(t1);
                    }
                }
                t
            }
            DomainShape::HalfBall { center, radius } => {
                let n = center.len() - 1;
                let t = sphere_exit(&pad(center), *radius);
                if axis == n && sign < 0.0 {
                    t.min(x[n])
                } else {
                    t
                }
            }
        }
    }

    fn grid_origin(&self) -> Point {
        match self {
            DomainShape::Rectangle { lo, .. } => pad(lo),
            _ => self.center().expect("curved shapes have a centre"),
        }
    }

    fn outer_radius(&self) -> f64 {
        match self {
            DomainShape::Rectangle { .. } => 0.0,
            DomainShape::Ball { radius, .. } | DomainShape::HalfBall { radius, .. } => *radius,
            DomainShape::Annulus { outer, .. } => *outer,
        }
    }

    /// Shell radii for curved shapes (used by projections and the star map).
    fn shells(&self) -> Result<Vec<f64>, DomainError> {
        match self {
            DomainShape::Ball { radius, .. } => Ok(vec![*radius]),
            DomainShape::Annulus { inner, outer, .. } => Ok(vec![*inner, *outer]),
            _ => Err(DomainError::Unsupported(
                "boundary projection needs a ball or annulus".into(),
            )),
        }
    }

    /// Largest band width for which the nearest boundary point is unique and
    /// the radial reflection stays on the same side of the centre.
    pub fn max_sigma(&self) -> Result<f64, DomainError> {
        match self {
            DomainShape::Ball { radius, .. } => Ok(*radius),
            DomainShape::Annulus { inner, outer, .. } => Ok(((outer - inner) / 2.0).min(*inner)),
            _ => Err(DomainError::Unsupported(
                "tubular band needs a ball or annulus".into(),
            )),
        }
    }

    /// Analytic bilipschitz bound of the star map on a band of width `sigma`.
    pub fn shell_lipschitz_bound(&self, sigma: f64) -> Result<f64, DomainError> {
        Ok(self
            .shells()?
            .into_iter()
            .map(|r| (r + sigma) / (r - sigma))
            .fold(1.0, f64::max))
    }
}

fn check_sigma(shape: &DomainShape, sigma: f64) -> Result<(), DomainError> {
    let limit = shape.max_sigma()?;
    if !(sigma > 0.0 && sigma < limit) {
        return Err(DomainError::SigmaTooLarge { sigma, limit });
    }
    Ok(())
}

/// Nearest point of the boundary of a ball or annulus.
pub fn boundary_projection(
    shape: &DomainShape,
    x: &Point,
    sigma: f64,
) -> Result<Projection, DomainError> {
    check_sigma(shape, sigma)?;
    let c = shape.center().expect("checked shape");
    let p = sub(x, &c);
    let r = norm(&p);
    if r <= 1e-14 * shape.outer_radius() {
        return Err(DomainError::NonUnique);
    }
    let u = [p[0] / r, p[1] / r, p[2] / r];
    let shells = shape.shells()?;
    let (k, shell) = shells
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| (r - a.1).abs().total_cmp(&(r - b.1).abs()))
        .expect("at least one shell");
    let dist = (r - shell).abs();
    if dist > sigma {
        return Err(DomainError::OutsideBand { dist, sigma });
    }
    // The exterior normal points outward on the outer shell and towards the
    // centre on the inner shell of an annulus.
    let inward_shell = shells.len() == 2 && k == 0;
    let s = if inward_shell { -1.0 } else { 1.0 };
    Ok(Projection {
        foot: [c[0] + shell * u[0], c[1] + shell * u[1], c[2] + shell * u[2]],
        dist,
        normal: [s * u[0], s * u[1], s * u[2]],
    })
}

/// Reflection through the nearest boundary shell along the normal:
/// `|x* - c| = 2 R_k - |x - c|`.
pub fn star_map(shape: &DomainShape, x: &Point, sigma: f64) -> Result<Point, DomainError> {
    let pr = boundary_projection(shape, x, sigma)?;
    let c = shape.center().expect("checked shape");
    let p = sub(x, &c);
    let r = norm(&p);
    let shell = norm(&sub(&pr.foot, &c));
    let rs = 2.0 * shell - r;
    let f = rs / r;
    Ok([c[0] + f * p[0], c[1] + f * p[1], c[2] + f * p[2]])
}

/// One axis neighbour: target node and arm length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub node: usize,
    pub len: f64,
}

/// Direction index `2k` is `+e_k`, `2k + 1` is `-e_k`.
pub fn direction(axis: usize, positive: bool) -> usize {
    2 * axis + usize::from(!positive)
}

fn opposite(dir: usize) -> usize {
    dir ^ 1
}

#[derive(Debug, Clone)]
struct NodeSpec {
    point: Point,
    class: NodeClass,
    grid: Option<[i64; 3]>,
    /// Crossing node: (build index of the interior node it was cast from,
    /// direction from that node, arm length).
    parent: Option<(usize, usize, f64)>,
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Node set over a [`DomainShape`] with classification and axis adjacency.
#[derive(Debug)]
pub struct Lattice {
    id: u64,
    shape: DomainShape,
    dim: usize,
    h: f64,
    origin: Point,
    points: Vec<Point>,
    classes: Vec<NodeClass>,
    grid: Vec<Option<[i64; 3]>>,
    index: HashMap<[i64; 3], usize>,
    neighbors: Vec<[Option<Arm>; 6]>,
    parents: Vec<Option<(usize, usize, f64)>>,
    stencils: OnceLock<Result<Stencils, (usize, String)>>,
}

impl Lattice {
    pub fn id(&self) -> u64 {
        self.id
    }
    pub fn shape(&self) -> &DomainShape {
        &self.shape
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn origin(&self) -> Point {
        self.origin
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }
    pub fn points(&self) -> &[Point] {
        &self.points
    }
    /// Coordinates of node `i` truncated to the lattice dimension.
    pub fn coords(&self, i: usize) -> &[f64] {
        &self.points[i][..self.dim]
    }
    pub fn class(&self, i: usize) -> NodeClass {
        self.classes[i]
    }
    pub fn classes(&self) -> &[NodeClass] {
        &self.classes
    }
    pub fn grid_index(&self, i: usize) -> Option<[i64; 3]> {
        self.grid[i]
    }
    pub fn node_at(&self, g: &[i64; 3]) -> Option<usize> {
        self.index.get(g).copied()
    }
    pub fn neighbor(&self, i: usize, dir: usize) -> Option<Arm> {
        self.neighbors[i][dir]
    }
    pub fn ids_with(&self, class: NodeClass) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.classes[i] == class).collect()
    }
    pub fn interior_ids(&self) -> Vec<usize> {
        self.ids_with(NodeClass::Interior)
    }
    pub fn count(&self, class: NodeClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }
    pub fn diameter(&self) -> f64 {
        self.shape.diameter()
    }

    /// Node nearest to `x` (ties go to the lowest id).
    pub fn nearest_node(&self, x: &Point) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, p) in self.points.iter().enumerate() {
            let d = dist(p, x);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// Node within `tol` of `x`, if any.
    pub fn find_node(&self, x: &Point, tol: f64) -> Option<usize> {
        let i = self.nearest_node(x);
        (dist(&self.points[i], x) <= tol).then_some(i)
    }

    pub(crate) fn stencil_cache(&self) -> &OnceLock<Result<Stencils, (usize, String)>> {
        &self.stencils
    }

    /// Grid nodes within `radius` index steps of `g`, plus their neighbours.
    pub(crate) fn nearby_nodes(&self, i: usize, radius: i64) -> Vec<usize> {
        let g = self.grid[i].unwrap_or_else(|| self.nearest_grid(&self.points[i]));
        let mut out = Vec::new();
        let span = |k: usize| if k < self.dim { -radius..=radius } else { 0..=0 };
        for a in span(0) {
            for b in span(1) {
                for c in span(2) {
                    let q = [g[0] + a, g[1] + b, g[2] + c];
                    if let Some(&j) = self.index.get(&q) {
                        out.push(j);
                        out.extend(self.neighbors[j].iter().flatten().map(|arm| arm.node));
                    }
                }
            }
        }
        out.push(i);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn nearest_grid(&self, x: &Point) -> [i64; 3] {
        let mut g = [0i64; 3];
        for k in 0..self.dim {
            g[k] = ((x[k] - self.origin[k]) / self.h).round() as i64;
        }
        g
    }

    /// Enclosing grid cell (lower corner index) of `x`.
    pub(crate) fn cell_of(&self, x: &Point) -> [i64; 3] {
        let mut g = [0i64; 3];
        for k in 0..self.dim {
            g[k] = ((x[k] - self.origin[k]) / self.h).floor() as i64;
        }
        g
    }

    pub(crate) fn grid_point(&self, g: &[i64; 3]) -> Point {
        let mut p = [0.0; 3];
        for k in 0..self.dim {
            p[k] = self.origin[k] + g[k] as f64 * self.h;
        }
        p
    }

    fn assemble(
        shape: DomainShape,
        h: f64,
        origin: Point,
        specs: Vec<NodeSpec>,
    ) -> Lattice {
        let dim = shape.dim();
        let mut order: Vec<usize> = (0..specs.len()).collect();
        order.sort_by(|&a, &b| {
            let (p, q) = (&specs[a].point, &specs[b].point);
            p[0].total_cmp(&q[0])
                .then(p[1].total_cmp(&q[1]))
                .then(p[2].total_cmp(&q[2]))
        });
        let mut new_id = vec![0usize; specs.len()];
        for (new, &old) in order.iter().enumerate() {
            new_id[old] = new;
        }
        let n = specs.len();
        let mut points = Vec::with_capacity(n);
        let mut classes = Vec::with_capacity(n);
        let mut grid = Vec::with_capacity(n);
        let mut parents = Vec::with_capacity(n);
        let mut index = HashMap::new();
        for (new, &old) in order.iter().enumerate() {
            let s = &specs[old];
            points.push(s.point);
            classes.push(s.class);
            grid.push(s.grid);
            parents.push(s.parent.map(|(p, d, t)| (new_id[p], d, t)));
            if let Some(g) = s.grid {
                index.insert(g, new);
            }
        }
        let mut neighbors = vec![[None; 6]; n];
        for i in 0..n {
            let Some(g) = grid[i] else { continue };
            for axis in 0..dim {
                for positive in [true, false] {
                    let mut q = g;
                    q[axis] += if positive { 1 } else { -1 };
                    if let Some(&j) = index.get(&q) {
                        neighbors[i][direction(axis, positive)] = Some(Arm { node: j, len: h });
                    }
                }
            }
        }
        for (c, parent) in parents.iter().enumerate() {
            if let Some((p, dir, t)) = *parent {
                neighbors[p][dir] = Some(Arm { node: c, len: t });
                neighbors[c][opposite(dir)] = Some(Arm { node: p, len: t });
            }
        }
        Lattice {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            dim,
            h,
            origin,
            points,
            classes,
            grid,
            index,
            neighbors,
            parents,
            stencils: OnceLock::new(),
        }
    }

    /// Lattice made of the listed nodes only, reinterpreted over `shape`
    /// (which is used for distances and the diameter). Adjacency is kept
    /// where both ends survive.
    pub fn subset(&self, ids: &[usize], shape: DomainShape) -> Result<Lattice, DomainError> {
        shape.validate()?;
        if shape.dim() != self.dim {
            return Err(DomainError::Degenerate("subset shape dimension differs".into()));
        }
        let mut pos = HashMap::new();
        for (k, &i) in ids.iter().enumerate() {
            pos.insert(i, k);
        }
        let specs = ids
            .iter()
            .map(|&i| NodeSpec {
                point: self.points[i],
                class: self.classes[i],
                grid: self.grid[i],
                parent: self.parents[i]
                    .and_then(|(p, d, t)| pos.get(&p).map(|&k| (k, d, t))),
            })
            .collect();
        Ok(Lattice::assemble(shape, self.h, self.origin, specs))
    }
}

/// Build the lattice of `shape` with spacing `h`.
pub fn build_lattice(shape: &DomainShape, h: f64) -> Result<Lattice, DomainError> {
    shape.validate()?;
    if !(h.is_finite() && h > 0.0) {
        return Err(DomainError::Degenerate(format!("spacing must be positive, got {h}")));
    }
    let limit = shape.coarse_limit();
    if h > limit * (1.0 + 1e-12) {
        return Err(DomainError::TooCoarse { h, limit });
    }
    let dim = shape.dim();
    let origin = shape.grid_origin();
    let tol = 1e-9 * h;

    let mut lo_idx = [0i64; 3];
    let mut hi_idx = [0i64; 3];
    match shape {
        DomainShape::Rectangle { lo, hi } => {
            for k in 0..dim {
                hi_idx[k] = ((hi[k] - lo[k]) / h + 1e-9).floor() as i64;
            }
        }
        _ => {
            let m = (shape.outer_radius() / h).ceil() as i64 + 1;
            for k in 0..dim {
                lo_idx[k] = -m;
                hi_idx[k] = m;
            }
            if matches!(shape, DomainShape::HalfBall { .. }) {
                lo_idx[dim - 1] = 0;
            }
        }
    }

    let classify = |x: &Point| -> Option<NodeClass> {
        match shape {
            DomainShape::HalfBall { center, radius } => {
                let n = dim - 1;
                let sphere = radius - norm(&sub(x, &pad(center)));
                if sphere < -tol || x[n] < -tol {
                    None
                } else if x[n].abs() <= tol {
                    Some(NodeClass::BoundaryOnT)
                } else if sphere <= tol {
                    Some(NodeClass::Boundary)
                } else {
                    Some(NodeClass::Interior)
                }
            }
            _ => {
                let sd = shape.signed_distance(x);
                if sd > tol {
                    Some(NodeClass::Interior)
                } else if sd >= -tol {
                    Some(NodeClass::Boundary)
                } else {
                    None
                }
            }
        }
    };

    let mut specs: Vec<NodeSpec> = Vec::new();
    let mut spec_of: HashMap<[i64; 3], usize> = HashMap::new();
    let range = |k: usize| if k < dim { lo_idx[k]..=hi_idx[k] } else { 0..=0 };
    for a in range(0) {
        for b in range(1) {
            for c in range(2) {
                let g = [a, b, c];
                let mut x = [0.0; 3];
                for k in 0..dim {
                    x[k] = origin[k] + g[k] as f64 * h;
                }
                if let DomainShape::Rectangle { hi, .. } = shape {
                    for k in 0..dim {
                        if (x[k] - hi[k]).abs() <= tol {
                            x[k] = hi[k];
                        }
                    }
                }
                if let Some(class) = classify(&x) {
                    spec_of.insert(g, specs.len());
                    specs.push(NodeSpec {
                        point: x,
                        class,
                        grid: Some(g),
                        parent: None,
                    });
                }
            }
        }
    }

    let grid_count = specs.len();
    for s in 0..grid_count {
        if specs[s].class != NodeClass::Interior {
            continue;
        }
        let g = specs[s].grid.expect("grid node");
        let x = specs[s].point;
        for axis in 0..dim {
            for positive in [true, false] {
                let mut q = g;
                q[axis] += if positive { 1 } else { -1 };
                if spec_of.contains_key(&q) {
                    continue;
                }
                let sign = if positive { 1.0 } else { -1.0 };
                let t = shape.ray_exit(&x, axis, sign);
                if !(t > 0.0 && t < h) {
                    return Err(DomainError::Degenerate(format!(
                        "boundary crossing at arm {t} from node {x:?} (h = {h})"
                    )));
                }
                let mut p = x;
                p[axis] += sign * t;
                specs.push(NodeSpec {
                    point: p,
                    class: NodeClass::Boundary,
                    grid: None,
                    parent: Some((s, direction(axis, positive), t)),
                });
            }
        }
    }

    if !specs.iter().any(|s| s.class == NodeClass::Interior) {
        return Err(DomainError::TooCoarse { h, limit });
    }
    Ok(Lattice::assemble(shape.clone(), h, origin, specs))
}

/// Lattice over the σ-neighbourhood `Ω_σ` of a ball or annulus: the nodes of
/// `base` plus the grid nodes of the exterior band, classified `Outside`.
#[derive(Debug)]
pub struct EnlargedLattice {
    pub lattice: Lattice,
    /// Id in the enlarged lattice of each base node.
    pub base_ids: Vec<usize>,
    /// For each enlarged node, the base node it came from.
    pub source: Vec<Option<usize>>,
    pub sigma: f64,
}

pub fn build_enlarged(base: &Lattice, sigma: f64) -> Result<EnlargedLattice, DomainError> {
    let shape = base.shape().clone();
    check_sigma(&shape, sigma)?;
    let h = base.h();
    let dim = base.dim();
    let tol = 1e-9 * h;
    let mut specs: Vec<NodeSpec> = (0..base.len())
        .map(|i| NodeSpec {
            point: base.points[i],
            class: base.classes[i],
            grid: base.grid[i],
            parent: base.parents[i],
        })
        .collect();
    let m = ((shape.outer_radius() + sigma) / h).ceil() as i64 + 1;
    let range = |k: usize| if k < dim { -m..=m } else { 0..=0 };
    let origin = base.origin();
    for a in range(0) {
        for b in range(1) {
            for c in range(2) {
                let g = [a, b, c];
                if base.index.contains_key(&g) {
                    continue;
                }
                let x = base.grid_point(&g);
                let sd = shape.signed_distance(&x);
                if sd < -tol && sd > -sigma {
                    specs.push(NodeSpec {
                        point: x,
                        class: NodeClass::Outside,
                        grid: Some(g),
                        parent: None,
                    });
                }
            }
        }
    }
    let n_base = base.len();
    let tags: Vec<Point> = specs.iter().map(|s| s.point).collect();
    let lattice = Lattice::assemble(shape, h, origin, specs);
    // Recover the permutation from the sorted points.
    let mut lookup: HashMap<[u64; 3], usize> = HashMap::new();
    for (i, p) in lattice.points.iter().enumerate() {
        lookup.insert([p[0].to_bits(), p[1].to_bits(), p[2].to_bits()], i);
    }
    let mut base_ids = Vec::with_capacity(n_base);
    let mut source = vec![None; lattice.len()];
    for (k, p) in tags.iter().enumerate().take(n_base) {
        let id = lookup[&[p[0].to_bits(), p[1].to_bits(), p[2].to_bits()]];
        base_ids.push(id);
        source[id] = Some(k);
    }
    Ok(EnlargedLattice {
        lattice,
        base_ids,
        source,
        sigma,
    })
}

/// Doubled lattice `D = B+ ∪ B- ∪ (B ∩ T)` of a half-ball lattice, built by
/// mirroring `x_n -> -x_n`.
#[derive(Debug)]
pub struct MirrorLattice {
    pub lattice: Lattice,
    /// Half-ball node each `D` node takes its values from.
    pub source: Vec<usize>,
    /// Whether the node is a mirror image (lies in `B-`).
    pub mirrored: Vec<bool>,
}

pub fn mirror_halfball(base: &Lattice) -> Result<MirrorLattice, DomainError> {
    let DomainShape::HalfBall { center, radius } = base.shape() else {
        return Err(DomainError::Unsupported("reflection needs a half-ball lattice".into()));
    };
    let dim = base.dim();
    let n = dim - 1;
    let tol = 1e-9 * base.h();
    let c = pad(center);
    let mut specs = Vec::new();
    let mut tags = Vec::new();
    let mut base_to_spec = vec![usize::MAX; base.len()];
    for i in 0..base.len() {
        let class = match base.classes[i] {
            NodeClass::BoundaryOnT => {
                if radius - norm(&sub(&base.points[i], &c)) > tol {
                    NodeClass::Interior
                } else {
                    NodeClass::Boundary
                }
            }
            other => other,
        };
        base_to_spec[i] = specs.len();
        specs.push(NodeSpec {
            point: base.points[i],
            class,
            grid: base.grid[i],
            parent: base.parents[i],
        });
        tags.push((i, false));
    }
    for i in 0..base.len() {
        if base.classes[i] == NodeClass::BoundaryOnT {
            continue;
        }
        let mut p = base.points[i];
        p[n] = -p[n];
        let grid = base.grid[i].map(|mut g| {
            g[n] = -g[n];
            g
        });
        let parent = base.parents[i].map(|(par, dir, t)| {
            let d = if dir / 2 == n { opposite(dir) } else { dir };
            (par, d, t)
        });
        specs.push(NodeSpec {
            point: p,
            class: base.classes[i],
            grid,
            parent,
        });
        tags.push((i, true));
    }
    // Mirrored crossing parents refer to base build ids; point them at the
    // mirrored copies instead.
    let mut mirror_spec = vec![usize::MAX; base.len()];
    for (k, &(i, m)) in tags.iter().enumerate() {
        if m {
            mirror_spec[i] = k;
        }
    }
    for k in 0..specs.len() {
        let (_, m) = tags[k];
        if let Some((par, d, t)) = specs[k].parent {
            let target = if m { mirror_spec[par] } else { base_to_spec[par] };
            specs[k].parent = (target != usize::MAX).then_some((target, d, t));
        }
    }
    let shape = DomainShape::Ball {
        center: center.clone(),
        radius: *radius,
    };
    let points: Vec<Point> = specs.iter().map(|s| s.point).collect();
    let mut lattice = Lattice::assemble(shape, base.h(), base.origin(), specs);
    let mut lookup: HashMap<[u64; 3], usize> = HashMap::new();
    for (i, p) in lattice.points.iter().enumerate() {
        lookup.insert([p[0].to_bits(), p[1].to_bits(), p[2].to_bits()], i);
    }
    let mut source = vec![0; lattice.len()];
    let mut mirrored = vec![false; lattice.len()];
    for (k, p) in points.iter().enumerate() {
        let id = lookup[&[p[0].to_bits(), p[1].to_bits(), p[2].to_bits()]];
        source[id] = tags[k].0;
        mirrored[id] = tags[k].1;
    }
    // Former T nodes missing an axis neighbour cannot be interior.
    for i in 0..lattice.len() {
        if lattice.classes[i] == NodeClass::Interior
            && (0..2 * dim).any(|d| lattice.neighbors[i][d].is_none())
        {
            lattice.classes[i] = NodeClass::Boundary;
        }
    }
    Ok(MirrorLattice {
        lattice,
        source,
        mirrored,
    })
}

/// Distances to `∂Ω` and to `∂Ω \ T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceFields {
    pub d: Vec<f64>,
    pub d_bar: Vec<f64>,
}

pub fn distance_fields(lat: &Lattice) -> DistanceFields {
    let shape = lat.shape();
    let mut d = Vec::with_capacity(lat.len());
    let mut d_bar = Vec::with_capacity(lat.len());
    for i in 0..lat.len() {
        let x = lat.point(i);
        let (a, b) = match lat.class(i) {
            NodeClass::Interior => {
                let a = shape.signed_distance(x).max(0.0);
                (a, shape.distance_bar(x).max(a))
            }
            NodeClass::BoundaryOnT => (0.0, shape.distance_bar(x)),
            NodeClass::Boundary | NodeClass::Outside => (0.0, 0.0),
        };
        d.push(a);
        d_bar.push(b);
    }
    DistanceFields { d, d_bar }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball2(r: f64) -> DomainShape {
        DomainShape::Ball {
            center: vec![0.0, 0.0],
            radius: r,
        }
    }

    fn annulus() -> DomainShape {
        DomainShape::Annulus {
            center: vec![0.0, 0.0],
            inner: 0.2,
            outer: 0.8,
        }
    }

    #[test]
    fn unit_square_half_spacing() {
        let shape = DomainShape::Rectangle {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
        };
        let lat = build_lattice(&shape, 0.5).unwrap();
        assert_eq!(lat.len(), 9);
        assert_eq!(lat.count(NodeClass::Interior), 1);
        assert_eq!(lat.count(NodeClass::Boundary), 8);
    }

    #[test]
    fn disk_node_count_matches_area() {
        let lat = build_lattice(&ball2(1.0), 0.1).unwrap();
        // Brute-force count of grid points strictly inside and on the circle.
        let (mut strict, mut closed) = (0, 0);
        for i in -10i32..=10 {
            for j in -10i32..=10 {
                let r2 = i * i + j * j;
                if r2 < 100 {
                    strict += 1;
                }
                if r2 <= 100 {
                    closed += 1;
                }
            }
        }
        assert_eq!(lat.count(NodeClass::Interior), strict);
        let grid_nodes = (0..lat.len()).filter(|&i| lat.grid_index(i).is_some()).count();
        assert_eq!(grid_nodes, closed);
        let area = std::f64::consts::PI / 0.01;
        assert!((closed as f64 - area).abs() / area < 0.02);
    }

    #[test]
    fn coarse_annulus_rejected() {
        assert!(matches!(
            build_lattice(&annulus(), 0.3),
            Err(DomainError::TooCoarse { .. })
        ));
    }

    #[test]
    fn degenerate_shapes_rejected() {
        let bad = [
            DomainShape::Ball {
                center: vec![0.0],
                radius: 0.0,
            },
            DomainShape::Annulus {
                center: vec![0.0, 0.0],
                inner: 0.5,
                outer: 0.5,
            },
            DomainShape::Rectangle {
                lo: vec![0.0, 1.0],
                hi: vec![1.0, 1.0],
            },
            DomainShape::HalfBall {
                center: vec![0.0, 0.1],
                radius: 1.0,
            },
        ];
        for s in bad {
            assert!(build_lattice(&s, 0.05).is_err(), "{s:?}");
        }
    }

    #[test]
    fn interior_nodes_have_all_neighbours() {
        for shape in [ball2(1.0), annulus()] {
            let lat = build_lattice(&shape, 0.07).unwrap();
            for i in lat.interior_ids() {
                for d in 0..4 {
                    let arm = lat.neighbor(i, d).expect("neighbour");
                    assert!(arm.len > 0.0 && arm.len <= lat.h() * (1.0 + 1e-12));
                    assert_ne!(lat.class(arm.node), NodeClass::Outside);
                }
            }
            for i in 0..lat.len() {
                if lat.class(i).is_boundary() {
                    assert!(shape.signed_distance(lat.point(i)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn distances_match_formulas() {
        let lat = build_lattice(&ball2(1.0), 0.125).unwrap();
        let df = distance_fields(&lat);
        let o = lat.find_node(&[0.0; 3], 1e-12).unwrap();
        assert_eq!(df.d[o], 1.0);

        let lat = build_lattice(&annulus(), 0.05).unwrap();
        let df = distance_fields(&lat);
        let i = lat.find_node(&[0.5, 0.0, 0.0], 1e-12).unwrap();
        assert!((df.d[i] - 0.3).abs() < 1e-15);

        let hb = DomainShape::HalfBall {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        let lat = build_lattice(&hb, 0.125).unwrap();
        let df = distance_fields(&lat);
        let i = lat.find_node(&[0.0, 0.25, 0.0], 1e-12).unwrap();
        assert_eq!(df.d[i], 0.25);
        assert_eq!(df.d_bar[i], 0.75);
        for i in 0..lat.len() {
            if lat.class(i).is_boundary() {
                assert_eq!(df.d[i], 0.0);
            }
            assert!(df.d_bar[i] >= df.d[i]);
        }
        let t = lat.find_node(&[1.0, 0.0, 0.0], 1e-12).unwrap();
        assert_eq!(lat.class(t), NodeClass::BoundaryOnT);
    }

    #[test]
    fn projections() {
        let p = boundary_projection(&ball2(1.0), &[0.9, 0.0, 0.0], 0.2).unwrap();
        assert!((p.foot[0] - 1.0).abs() < 1e-15 && p.foot[1] == 0.0);
        assert!((p.dist - 0.1).abs() < 1e-15);
        assert_eq!(p.normal, [1.0, 0.0, 0.0]);

        let p = boundary_projection(&annulus(), &[0.25, 0.0, 0.0], 0.1).unwrap();
        assert!((p.foot[0] - 0.2).abs() < 1e-15);
        assert!((p.dist - 0.05).abs() < 1e-15);
        assert_eq!(p.normal, [-1.0, 0.0, 0.0]);

        assert_eq!(
            boundary_projection(&ball2(1.0), &[0.0; 3], 1.0 - 1e-9),
            Err(DomainError::NonUnique)
        );
        assert!(matches!(
            boundary_projection(&ball2(1.0), &[0.5, 0.0, 0.0], 0.2),
            Err(DomainError::OutsideBand { .. })
        ));
    }

    #[test]
    fn star_map_examples() {
        let x = star_map(&ball2(1.0), &[0.9, 0.0, 0.0], 0.2).unwrap();
        assert!((x[0] - 1.1).abs() < 1e-15);
        let on = [0.6, 0.8, 0.0];
        let x = star_map(&ball2(1.0), &on, 0.2).unwrap();
        assert!(dist(&x, &on) < 1e-15);
        let x = star_map(&annulus(), &[0.25, 0.0, 0.0], 0.1).unwrap();
        assert!((x[0] - 0.15).abs() < 1e-15);
        assert!(star_map(&annulus(), &[0.25, 0.0, 0.0], 0.25).is_err());
    }

    #[test]
    fn enlarged_and_mirrored() {
        let base = build_lattice(&ball2(1.0), 0.1).unwrap();
        let e = build_enlarged(&base, 0.2).unwrap();
        assert_eq!(e.base_ids.len(), base.len());
        for (k, &id) in e.base_ids.iter().enumerate() {
            assert_eq!(e.lattice.point(id), base.point(k));
            assert_eq!(e.source[id], Some(k));
        }
        for i in 0..e.lattice.len() {
            if e.lattice.class(i) == NodeClass::Outside {
                let sd = base.shape().signed_distance(e.lattice.point(i));
                assert!(sd < 0.0 && sd > -0.2);
            }
        }

        let hb = DomainShape::HalfBall {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        let half = build_lattice(&hb, 0.1).unwrap();
        let m = mirror_halfball(&half).unwrap();
        let t = half.count(NodeClass::BoundaryOnT);
        assert_eq!(m.lattice.len(), 2 * half.len() - t);
        for i in 0..m.lattice.len() {
            let mut p = *half.point(m.source[i]);
            if m.mirrored[i] {
                p[1] = -p[1];
            }
            assert_eq!(&p, m.lattice.point(i));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn star_map_is_an_involution(r in 0.65f64..0.95, th in 0.0f64..std::f64::consts::TAU) {
                let shape = annulus();
                let x = [r * th.cos(), r * th.sin(), 0.0];
                let y = star_map(&shape, &x, 0.15).unwrap();
                let z = star_map(&shape, &y, 0.15).unwrap();
                prop_assert!(dist(&x, &z) < 1e-12);
            }

            #[test]
            fn star_map_bilipschitz(r1 in 0.1f64..0.3, t1 in 0.0f64..std::f64::consts::TAU,
                                    r2 in 0.1f64..0.3, t2 in 0.0f64..std::f64::consts::TAU) {
                let shape = annulus();
                let sigma = 0.1;
                let x = [r1 * t1.cos(), r1 * t1.sin(), 0.0];
                let y = [r2 * t2.cos(), r2 * t2.sin(), 0.0];
                let (xs, ys) = (star_map(&shape, &x, sigma).unwrap(), star_map(&shape, &y, sigma).unwrap());
                let k = shape.shell_lipschitz_bound(sigma).unwrap();
                let (a, b) = (dist(&x, &y), dist(&xs, &ys));
                prop_assert!(b <= k * a * (1.0 + 1e-12) + 1e-15);
                prop_assert!(a <= k * b * (1.0 + 1e-12) + 1e-15);
                // zeta/gamma envelope for the inner shell.
                prop_assert!(k <= 0.8 / 0.2);
            }

            #[test]
            fn distance_is_one_lipschitz(i in 0usize..400, j in 0usize..400) {
                let lat = build_lattice(&annulus(), 0.07).unwrap();
                let df = distance_fields(&lat);
                let (i, j) = (i % lat.len(), j % lat.len());
                prop_assert!((df.d[i] - df.d[j]).abs() <= dist(lat.point(i), lat.point(j)) + 1e-12);
            }
        }
    }
}
