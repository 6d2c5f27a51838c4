//! Computational domains and their uniform-grid discretizations.
//!
//! Every domain is an open subset of R or R². Lattice nodes sit at
//! `origin + (i·h, j·h)` where `origin` is the lower-left corner of the
//! domain's bounding box, so two builds with the same inputs always produce
//! the same index map. Nodes that fail the exact membership predicate act as
//! homogeneous Dirichlet boundary (staircase treatment of curved boundaries).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Minimum number of interior lattice positions per bounding-box axis for
/// domains with curved boundaries.
pub const MIN_CURVED_AXIS_NODES: usize = 4;

/// Relative slack for the strict membership predicate; keeps nodes that sit
/// on an axis-aligned boundary (up to rounding of `i·h`) out of the interior.
const MEMBERSHIP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainSpec {
    /// `(0, length)`.
    Interval { length: f64 },
    /// `(0, width) × (0, height)`.
    Rectangle { width: f64, height: f64 },
    /// Open disk centred at the origin.
    Disk { radius: f64 },
    /// `r_inner < |x| < r_outer`, centred at the origin.
    Annulus { r_inner: f64, r_outer: f64 },
    /// Union of `(0, L) × (0, W)` and `(0, W) × (0, L)`.
    LShape { arm_length: f64, arm_width: f64 },
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{name} must be a positive finite number, got {v}")))
            }
        };
        match *self {
            DomainSpec::Interval { length } => positive("length", length),
            DomainSpec::Rectangle { width, height } => {
                positive("width", width)?;
                positive("height", height)
            }
            DomainSpec::Disk { radius } => positive("radius", radius),
            DomainSpec::Annulus { r_inner, r_outer } => {
                positive("r_inner", r_inner)?;
                positive("r_outer", r_outer)?;
                if r_inner >= r_outer {
                    return Err(Error::InvalidSpec(format!(
                        "annulus requires r_inner < r_outer, got {r_inner} >= {r_outer}"
                    )));
                }
                Ok(())
            }
            DomainSpec::LShape { arm_length, arm_width } => {
                positive("arm_length", arm_length)?;
                positive("arm_width", arm_width)?;
                if arm_width >= arm_length {
                    return Err(Error::InvalidSpec(format!(
                        "L-shape requires arm_width < arm_length, got {arm_width} >= {arm_length}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn has_curved_boundary(&self) -> bool {
        matches!(self, DomainSpec::Disk { .. } | DomainSpec::Annulus { .. })
    }

    /// Lower corner and extents of the axis-aligned bounding box.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match *self {
            DomainSpec::Interval { length } => (vec![0.0], vec![length]),
            DomainSpec::Rectangle { width, height } => (vec![0.0, 0.0], vec![width, height]),
            DomainSpec::Disk { radius: r } | DomainSpec::Annulus { r_outer: r, .. } => {
                (vec![-r, -r], vec![2.0 * r, 2.0 * r])
            }
            DomainSpec::LShape { arm_length, .. } => (vec![0.0, 0.0], vec![arm_length, arm_length]),
        }
    }

    fn feature_scale(&self) -> f64 {
        match *self {
            DomainSpec::Interval { length } => length,
            DomainSpec::Rectangle { width, height } => width.min(height),
            DomainSpec::Disk { radius: r } | DomainSpec::Annulus { r_outer: r, .. } => 2.0 * r,
            DomainSpec::LShape { arm_length, .. } => arm_length,
        }
    }

    /// Exact open-set membership.
    pub fn contains(&self, p: &[f64]) -> bool {
        let eps = MEMBERSHIP_SLACK * self.feature_scale();
        let inside = |v: f64, len: f64| v > eps && v < len - eps;
        match *self {
            DomainSpec::Interval { length } => inside(p[0], length),
            DomainSpec::Rectangle { width, height } => inside(p[0], width) && inside(p[1], height),
            DomainSpec::Disk { radius } => {
                let r = radius - eps;
                p[0] * p[0] + p[1] * p[1] < r * r
            }
            DomainSpec::Annulus { r_inner, r_outer } => {
                let rr = p[0] * p[0] + p[1] * p[1];
                let lo = r_inner + eps;
                let hi = r_outer - eps;
                rr > lo * lo && rr < hi * hi
            }
            DomainSpec::LShape { arm_length, arm_width } => {
                (inside(p[0], arm_length) && inside(p[1], arm_width))
                    || (inside(p[0], arm_width) && inside(p[1], arm_length))
            }
        }
    }

    /// Euclidean distance from an interior point to the boundary. Returns a
    /// non-positive value outside the domain (not the exact signed distance
    /// there, only its sign is meaningful).
    pub fn boundary_distance(&self, p: &[f64]) -> f64 {
        if !self.contains(p) {
            return 0.0;
        }
        match *self {
            DomainSpec::Interval { length } => p[0].min(length - p[0]),
            DomainSpec::Rectangle { width, height } => p[0].min(width - p[0]).min(p[1]).min(height - p[1]),
            DomainSpec::Disk { radius } => radius - p[0].hypot(p[1]),
            DomainSpec::Annulus { r_inner, r_outer } => {
                let r = p[0].hypot(p[1]);
                (r - r_inner).min(r_outer - r)
            }
            DomainSpec::LShape { arm_length: l, arm_width: w } => {
                let corners = [[0.0, 0.0], [l, 0.0], [l, w], [w, w], [w, l], [0.0, l]];
                (0..corners.len())
                    .map(|i| segment_distance(p, corners[i], corners[(i + 1) % corners.len()]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

fn segment_distance(p: &[f64], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0);
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainSpec::Interval { length } => write!(f, "interval:{length}"),
            DomainSpec::Rectangle { width, height } => write!(f, "rect:{width}x{height}"),
            DomainSpec::Disk { radius } => write!(f, "disk:{radius}"),
            DomainSpec::Annulus { r_inner, r_outer } => write!(f, "annulus:{r_inner},{r_outer}"),
            DomainSpec::LShape { arm_length, arm_width } => write!(f, "lshape:{arm_length},{arm_width}"),
        }
    }
}

/// Parses `interval:L`, `rect:WxH`, `disk:R`, `annulus:Ri,Ro`, `lshape:L,W`.
impl FromStr for DomainSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Parse(format!("domain `{s}`: {why}"));
        let (kind, args) = s.split_once(':').ok_or_else(|| bad("expected `kind:params`"))?;
        let num = |t: &str| -> Result<f64> {
            if t.is_empty() || t.contains(char::is_whitespace) {
                return Err(bad("malformed number"));
            }
            t.parse::<f64>().map_err(|_| bad(&format!("`{t}` is not a decimal literal")))
        };
        let pair = |sep: char| -> Result<(f64, f64)> {
            let (a, b) =
                args.split_once(sep).ok_or_else(|| bad(&format!("expected two values separated by `{sep}`")))?;
            Ok((num(a)?, num(b)?))
        };
        let spec = match kind {
            "interval" => DomainSpec::Interval { length: num(args)? },
            "rect" => {
                let (width, height) = pair('x')?;
                DomainSpec::Rectangle { width, height }
            }
            "disk" => DomainSpec::Disk { radius: num(args)? },
            "annulus" => {
                let (r_inner, r_outer) = pair(',')?;
                DomainSpec::Annulus { r_inner, r_outer }
            }
            "lshape" => {
                let (arm_length, arm_width) = pair(',')?;
                DomainSpec::LShape { arm_length, arm_width }
            }
            other => return Err(bad(&format!("unknown domain kind `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Exact measure of the continuum domain.
pub fn analytic_volume(spec: &DomainSpec) -> f64 {
    match *spec {
        DomainSpec::Interval { length } => length,
        DomainSpec::Rectangle { width, height } => width * height,
        DomainSpec::Disk { radius } => PI * radius * radius,
        DomainSpec::Annulus { r_inner, r_outer } => PI * (r_outer * r_outer - r_inner * r_inner),
        DomainSpec::LShape { arm_length, arm_width } => 2.0 * arm_length * arm_width - arm_width * arm_width,
    }
}

/// Uniform lattice over the bounding box with interior nodes numbered
/// contiguously in row-major order (x fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spec: DomainSpec,
    h: f64,
    origin: Vec<f64>,
    /// Lattice extents per axis, including the boundary layer.
    dims: Vec<usize>,
    /// Lattice node -> interior index; `None` marks a boundary node.
    node_index: Vec<Option<usize>>,
    /// Interior index -> lattice multi-index.
    interior_nodes: Vec<Vec<usize>>,
    cell_measure: f64,
}

/// Builds the interior/boundary classification for `spec` at spacing `h`.
pub fn build_grid(spec: &DomainSpec, h: f64) -> Result<Grid> {
    spec.validate()?;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidSpec(format!("grid spacing must be positive, got {h}")));
    }
    let (origin, extent) = spec.bounding_box();
    let d = spec.dimension();

    // Lattice positions 0..=steps along each axis; position `steps` lands on
    // (or just past) the far side of the box.
    let mut dims = Vec::with_capacity(d);
    for &len in &extent {
        let ratio = len / h;
        let nearest = ratio.round();
        let steps =
            if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) { nearest as usize } else { ratio.ceil() as usize };
        let open_positions = steps.saturating_sub(1);
        let required = if spec.has_curved_boundary() { MIN_CURVED_AXIS_NODES } else { 1 };
        if open_positions < required {
            return Err(Error::GridTooCoarse(format!(
                "{spec} at h={h}: {open_positions} interior lattice positions along an axis, need at least {required}"
            )));
        }
        dims.push(steps + 1);
    }

    let total: usize = dims.iter().product();
    let mut node_index = vec![None; total];
    let mut interior_nodes = Vec::new();
    let mut point = vec![0.0; d];
    for lin in 0..total {
        let multi = unravel(lin, &dims);
        for a in 0..d {
            point[a] = origin[a] + multi[a] as f64 * h;
        }
        if spec.contains(&point) {
            node_index[lin] = Some(interior_nodes.len());
            interior_nodes.push(multi);
        }
    }
    if interior_nodes.is_empty() {
        return Err(Error::GridTooCoarse(format!("{spec} at h={h}: no interior nodes")));
    }
    // Nodes on the outer lattice layer lie on or outside the bounding box, so
    // every interior node has all 2d neighbours inside the lattice.
    Ok(Grid { spec: *spec, h, origin, dims, node_index, interior_nodes, cell_measure: h.powi(d as i32) })
}

fn unravel(mut lin: usize, dims: &[usize]) -> Vec<usize> {
    dims.iter()
        .map(|&n| {
            let i = lin % n;
            lin /= n;
            i
        })
        .collect()
}

fn ravel(multi: &[usize], dims: &[usize]) -> usize {
    multi.iter().zip(dims).rev().fold(0, |acc, (&i, &n)| acc * n + i)
}

impl Grid {
    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn dimension(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.interior_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior_nodes.is_empty()
    }

    /// `h^d`, the quadrature weight of one node.
    pub fn cell_measure(&self) -> f64 {
        self.cell_measure
    }

    /// Interior index of a lattice node, or `None` for boundary nodes and
    /// indices outside the lattice.
    pub fn interior_index(&self, multi: &[usize]) -> Option<usize> {
        if multi.len() != self.dims.len() || multi.iter().zip(&self.dims).any(|(&i, &n)| i >= n) {
            return None;
        }
        self.node_index[ravel(multi, &self.dims)]
    }

    pub fn is_boundary(&self, multi: &[usize]) -> bool {
        self.interior_index(multi).is_none()
    }

    pub fn lattice_coords(&self, index: usize) -> &[usize] {
        &self.interior_nodes[index]
    }

    pub fn lattice_point(&self, multi: &[usize]) -> Vec<f64> {
        multi.iter().zip(&self.origin).map(|(&i, &o)| o + i as f64 * self.h).collect()
    }

    /// Physical coordinates of interior node `index`.
    pub fn point(&self, index: usize) -> Vec<f64> {
        self.lattice_point(&self.interior_nodes[index])
    }

    /// Interior index of the `±1` neighbour of `index` along `axis`.
    pub fn neighbor(&self, index: usize, axis: usize, forward: bool) -> Option<usize> {
        let mut multi = self.interior_nodes[index].clone();
        if forward {
            multi[axis] += 1;
        } else {
            multi[axis] = multi[axis].checked_sub(1)?;
        }
        self.interior_index(&multi)
    }

    /// Interior index of the node nearest to `p`, if that node is interior
    /// and coincides with `p` up to rounding.
    pub fn locate(&self, p: &[f64]) -> Option<usize> {
        if p.len() != self.dims.len() {
            return None;
        }
        let mut multi = Vec::with_capacity(p.len());
        for (a, &x) in p.iter().enumerate() {
            let r = (x - self.origin[a]) / self.h;
            let i = r.round();
            if i < 0.0 || (r - i).abs() > 1e-6 {
                return None;
            }
            multi.push(i as usize);
        }
        self.interior_index(&multi)
    }
}

/// `N · h^d`, the rectangle-rule quadrature of the constant 1.
pub fn grid_volume(grid: &Grid) -> f64 {
    grid.len() as f64 * grid.cell_measure()
}
