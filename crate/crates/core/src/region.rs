//! Symbolic regions of the complex plane.
//!
//! The product constructs are decided exactly through inversion: for closed
//! bases `B₁, B₂` that do not contain 0 in their interior, `−z ∈ B₁·B₂` iff the
//! set `−z · B₁⁻¹` meets `B₂`, and `B₁⁻¹` is again a disk or a half-plane.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outward tolerance: points this close to a product set count as inside it,
/// so membership in the complement is only reported with margin.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-12;
/// Grid size per axis for the boundary-pair distance search.
pub const DISTANCE_GRID: usize = 2048;
/// Newton refinement steps after the grid search.
pub const NEWTON_STEPS: usize = 30;

/// A closed disk or closed half-plane used as the base of a product region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ClosedBase {
    /// `D̄(center, radius)`.
    Disk { center: Complex64, radius: f64 },
    /// `{w : Re(w · conj(normal)) ≤ offset}` with `|normal| = 1`.
    /// `H̄_ε` is `normal = 1, offset = −ε`.
    HalfPlane { normal: Complex64, offset: f64 },
}

impl ClosedBase {
    /// `H̄_ε = {x + iy : x ≤ −ε}`.
    pub fn h_bar(eps: f64) -> Self {
        ClosedBase::HalfPlane {
            normal: Complex64::new(1.0, 0.0),
            offset: -eps,
        }
    }

    pub fn disk(center: Complex64, radius: f64) -> Self {
        ClosedBase::Disk { center, radius }
    }

    fn contains(&self, w: Complex64) -> bool {
        match *self {
            ClosedBase::Disk { center, radius } => (w - center).norm() <= radius,
            ClosedBase::HalfPlane { normal, offset } => (w * normal.conj()).re <= offset,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ClosedBase::Disk { center, radius } => {
                if !(radius > 0.0 && radius.is_finite() && center.is_finite()) {
                    return Err(Error::Precondition(format!("disk radius must be positive, got {radius}")));
                }
                if center.norm() < radius * (1.0 - 1e-12) {
                    return Err(Error::Precondition(
                        "base disk contains 0 in its interior; the product region is not of the supported form".into(),
                    ));
                }
            }
            ClosedBase::HalfPlane { normal, offset } => {
                if (normal.norm() - 1.0).abs() > 1e-12 {
                    return Err(Error::Precondition("half-plane normal must have modulus 1".into()));
                }
                if offset >= 0.0 {
                    return Err(Error::Precondition(
                        "base half-plane contains 0; its product with any base covers a neighbourhood of infinity".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The image of `B \ {0}` under `w ↦ 1/w`.
    fn inverse(&self) -> Piece {
        match *self {
            ClosedBase::Disk { center, radius } => {
                let c2 = center.norm_sqr();
                let r2 = radius * radius;
                if c2 - r2 > 1e-12 * c2.max(1e-300) {
                    Piece {
                        shape: Shape::Disk {
                            c: center.conj() / (c2 - r2),
                            r: radius / (c2 - r2),
                        },
                        punctured: false,
                    }
                } else {
                    // Disk through the origin maps to a half-plane.
                    let m = -1.0 / center;
                    Piece {
                        shape: Shape::Half {
                            n: m / m.norm(),
                            o: -m.norm() / 2.0,
                        },
                        punctured: false,
                    }
                }
            }
            ClosedBase::HalfPlane { normal, offset } => {
                let eps = -offset;
                Piece {
                    shape: Shape::Disk {
                        c: -normal.conj() / (2.0 * eps),
                        r: 1.0 / (2.0 * eps),
                    },
                    punctured: true,
                }
            }
        }
    }

    fn as_piece(&self) -> Piece {
        let shape = match *self {
            ClosedBase::Disk { center, radius } => Shape::Disk { c: center, r: radius },
            ClosedBase::HalfPlane { normal, offset } => Shape::Half { n: normal, o: offset },
        };
        // Products never equal 0 when z ≠ 0, so the origin is excluded.
        Piece { shape, punctured: true }
    }

    /// Boundary point for parameter `t ∈ [0, 1)` and its derivatives in `t`.
    fn boundary(&self, t: f64) -> (Complex64, Complex64, Complex64) {
        match *self {
            ClosedBase::Disk { center, radius } => {
                let th = 2.0 * PI * t;
                let e = Complex64::from_polar(radius, th);
                let i = Complex64::i();
                (center + e, i * e * (2.0 * PI), -e * (4.0 * PI * PI))
            }
            ClosedBase::HalfPlane { normal, offset } => {
                let psi = (t - 0.5) * PI;
                let (s, c) = psi.sin_cos();
                let tan = s / c;
                let sec2 = 1.0 / (c * c);
                let i = Complex64::i();
                (
                    normal * Complex64::new(offset, tan),
                    normal * i * (sec2 * PI),
                    normal * i * (2.0 * sec2 * tan * PI * PI),
                )
            }
        }
    }

    fn is_half_plane(&self) -> bool {
        matches!(self, ClosedBase::HalfPlane { .. })
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Disk { c: Complex64, r: f64 },
    /// `{w : Re(w n̄) ≤ o}`.
    Half { n: Complex64, o: f64 },
}

/// A closed convex set, optionally with the origin removed (the origin then
/// lies on its boundary).
#[derive(Debug, Clone, Copy)]
struct Piece {
    shape: Shape,
    punctured: bool,
}

impl Piece {
    fn scale(self, m: Complex64) -> Piece {
        let a = m.norm();
        let shape = match self.shape {
            Shape::Disk { c, r } => Shape::Disk { c: c * m, r: r * a },
            Shape::Half { n, o } => Shape::Half { n: n * m / a, o: o * a },
        };
        Piece { shape, ..self }
    }

    fn scale_hint(&self) -> f64 {
        match self.shape {
            Shape::Disk { c, r } => c.norm() + r,
            Shape::Half { o, .. } => o.abs(),
        }
    }

    /// Signed distance from the origin into the set (≥ 0 when 0 is inside).
    fn origin_depth(&self) -> f64 {
        match self.shape {
            Shape::Disk { c, r } => r - c.norm(),
            Shape::Half { o, .. } => o,
        }
    }

    /// Outward unit normal at the origin when the origin is on the boundary.
    fn normal_at_origin(&self) -> Complex64 {
        match self.shape {
            Shape::Disk { c, .. } => -c / c.norm(),
            Shape::Half { n, .. } => n,
        }
    }
}

/// Whether two pieces share a point, with the sets dilated by `slack`.
fn pieces_meet(a: &Piece, b: &Piece, slack: f64) -> bool {
    let meet = match (a.shape, b.shape) {
        (Shape::Disk { c: c1, r: r1 }, Shape::Disk { c: c2, r: r2 }) => (c1 - c2).norm() <= r1 + r2 + slack,
        (Shape::Disk { c, r }, Shape::Half { n, o }) | (Shape::Half { n, o }, Shape::Disk { c, r }) => {
            (c * n.conj()).re - o <= r + slack
        }
        (Shape::Half { n: n1, o: o1 }, Shape::Half { n: n2, o: o2 }) => {
            if (n1 * n2.conj()).re < -1.0 + 1e-15 {
                -o2 <= o1 + slack
            } else {
                true
            }
        }
    };
    if !meet {
        return false;
    }
    if a.punctured || b.punctured {
        let tol = slack.max(1e-15);
        let a0 = a.origin_depth();
        let b0 = b.origin_depth();
        if a0.abs() <= tol && b0.abs() <= tol {
            // Both touch the origin; if the origin is their only common point,
            // the outward normals there are opposite.
            let na = a.normal_at_origin();
            let nb = b.normal_at_origin();
            if (na * nb.conj()).re <= -1.0 + 1e-12 {
                return false;
            }
        }
    }
    true
}

/// An axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn square(s: f64) -> Self {
        BBox {
            x_min: -s,
            x_max: s,
            y_min: -s,
            y_max: s,
        }
    }

    pub fn around(c: Complex64, r: f64) -> Self {
        BBox {
            x_min: c.re - r,
            x_max: c.re + r,
            y_min: c.im - r,
            y_max: c.im + r,
        }
    }

    pub fn intersect(&self, o: &BBox) -> BBox {
        BBox {
            x_min: self.x_min.max(o.x_min),
            x_max: self.x_max.min(o.x_max),
            y_min: self.y_min.max(o.y_min),
            y_max: self.y_max.min(o.y_max),
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.x_min < self.x_max && self.y_min < self.y_max)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (self.x_min..=self.x_max).contains(&z.re) && (self.y_min..=self.y_max).contains(&z.im)
    }

    fn half_extent(&self) -> f64 {
        (self.x_max - self.x_min).max(self.y_max - self.y_min) / 2.0
    }

    fn scale(&self, f: f64) -> BBox {
        BBox {
            x_min: self.x_min * f,
            x_max: self.x_max * f,
            y_min: self.y_min * f,
            y_max: self.y_max * f,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        Complex64::new(rng.random_range(self.x_min..=self.x_max), rng.random_range(self.y_min..=self.y_max))
    }
}

/// An open region of the complex plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    OpenDisk { center: Complex64, radius: f64 },
    ClosedDiskComplement { center: Complex64, radius: f64 },
    /// `{z : Re(z · conj(normal)) < offset}`; `H_ε` is `normal = 1, offset = −ε`.
    OpenHalfPlane { normal: Complex64, offset: f64 },
    /// `(−B²)^c`.
    NegMinkowskiSquareComplement { base: ClosedBase },
    /// `(−B₁·B₂)^c`.
    NegMinkowskiProductComplement { first: ClosedBase, second: ClosedBase },
    /// `{factor · z : z ∈ region}`.
    Scaled { region: Box<Region>, factor: f64 },
    Intersection { regions: Vec<Region> },
    /// `{1/w : w ∈ region \ {0}}`.
    Inverted { region: Box<Region> },
}

/// How a boundary distance was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMethod {
    ClosedForm,
    BoundaryPairSearch,
    /// Directional bisection on membership; best effort only.
    DirectionalProbe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    pub value: f64,
    pub method: DistanceMethod,
}

impl Region {
    pub fn open_disk(center: Complex64, radius: f64) -> Self {
        Region::OpenDisk { center, radius }
    }

    /// `H_ε = {x + iy : x < −ε}`.
    pub fn h(eps: f64) -> Self {
        Region::OpenHalfPlane {
            normal: Complex64::new(1.0, 0.0),
            offset: -eps,
        }
    }

    /// `(−H̄_ε²)^c = {x + iy : y² < 4ε²(x + ε²)}`.
    pub fn half_plane_square_complement(eps: f64) -> Self {
        Region::NegMinkowskiSquareComplement {
            base: ClosedBase::h_bar(eps),
        }
    }

    /// `(−D̄(−1,1)²)^c`, the complement of the cardioid.
    pub fn cardioid_complement() -> Self {
        Region::NegMinkowskiSquareComplement {
            base: ClosedBase::disk(Complex64::new(-1.0, 0.0), 1.0),
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Region::Scaled {
            region: Box::new(self),
            factor,
        }
    }

    pub fn inverted(self) -> Self {
        Region::Inverted { region: Box::new(self) }
    }

    /// Check constructor parameters.
    pub fn validate(&self) -> Result<()> {
        match self {
            Region::OpenDisk { radius, .. } | Region::ClosedDiskComplement { radius, .. } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::Precondition(format!("radius must be positive, got {radius}")));
                }
            }
            Region::OpenHalfPlane { normal, .. } => {
                if (normal.norm() - 1.0).abs() > 1e-12 {
                    return Err(Error::Precondition("half-plane normal must have modulus 1".into()));
                }
            }
            Region::NegMinkowskiSquareComplement { base } => base.validate()?,
            Region::NegMinkowskiProductComplement { first, second } => {
                first.validate()?;
                second.validate()?;
            }
            Region::Scaled { region, factor } => {
                if !(*factor > 0.0 && factor.is_finite()) {
                    return Err(Error::Precondition(format!("scale factor must be positive, got {factor}")));
                }
                region.validate()?;
            }
            Region::Intersection { regions } => {
                if regions.is_empty() {
                    return Err(Error::Precondition("empty intersection".into()));
                }
                regions.iter().try_for_each(Region::validate)?;
            }
            Region::Inverted { region } => region.validate()?,
        }
        Ok(())
    }

    pub fn contains(&self, z: Complex64) -> bool {
        if !z.is_finite() {
            return false;
        }
        match self {
            Region::OpenDisk { center, radius } => (z - center).norm() < *radius,
            Region::ClosedDiskComplement { center, radius } => (z - center).norm() > *radius,
            Region::OpenHalfPlane { normal, offset } => (z * normal.conj()).re < *offset,
            Region::NegMinkowskiSquareComplement { base } => !in_neg_product(base, base, z),
            Region::NegMinkowskiProductComplement { first, second } => !in_neg_product(first, second, z),
            Region::Scaled { region, factor } => region.contains(z / factor),
            Region::Intersection { regions } => regions.iter().all(|r| r.contains(z)),
            Region::Inverted { region } => z != Complex64::new(0.0, 0.0) && region.contains(1.0 / z),
        }
    }

    /// `dist(λ, ∂Γ)` for a point `λ` inside the region.
    pub fn dist_to_boundary(&self, lambda: Complex64) -> Result<Distance> {
        if !self.contains(lambda) {
            return Err(Error::OutsideRegion);
        }
        let closed = |value| {
            Ok(Distance {
                value,
                method: DistanceMethod::ClosedForm,
            })
        };
        match self {
            Region::OpenDisk { center, radius } => closed(radius - (lambda - center).norm()),
            Region::ClosedDiskComplement { center, radius } => closed((lambda - center).norm() - radius),
            Region::OpenHalfPlane { normal, offset } => closed(offset - (lambda * normal.conj()).re),
            Region::NegMinkowskiSquareComplement { base } => product_distance(base, base, lambda),
            Region::NegMinkowskiProductComplement { first, second } => product_distance(first, second, lambda),
            Region::Scaled { region, factor } => {
                let d = region.dist_to_boundary(lambda / factor)?;
                Ok(Distance {
                    value: d.value * factor,
                    method: d.method,
                })
            }
            Region::Intersection { regions } => {
                let mut best: Option<Distance> = None;
                for r in regions {
                    let d = r.dist_to_boundary(lambda)?;
                    if best.is_none_or(|b| d.value < b.value) {
                        best = Some(d);
                    }
                }
                Ok(best.expect("validated non-empty"))
            }
            Region::Inverted { .. } => Ok(Distance {
                value: probe_distance(self, lambda),
                method: DistanceMethod::DirectionalProbe,
            }),
        }
    }

    /// Bounding box of the region intersected with `[−s, s]²`.
    pub fn bounding_box(&self, s: f64) -> BBox {
        let square = BBox::square(s);
        match self {
            Region::OpenDisk { center, radius } => BBox::around(*center, *radius).intersect(&square),
            Region::NegMinkowskiSquareComplement { base } => parabola_box(base, base, s).unwrap_or(square),
            Region::NegMinkowskiProductComplement { first, second } => {
                parabola_box(first, second, s).unwrap_or(square)
            }
            Region::Scaled { region, factor } => region.bounding_box(s / factor).scale(*factor).intersect(&square),
            Region::Intersection { regions } => regions.iter().fold(square, |b, r| b.intersect(&r.bounding_box(s))),
            _ => square,
        }
    }

    /// A point of the region, by rejection from a bounding box. Unbounded
    /// regions are truncated at `|Re|, |Im| ≤ radius_cap`; for them the box
    /// half-width is drawn log-uniformly from `[1e−3, radius_cap]` so that
    /// both small and large moduli are probed.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, options: &SamplerOptions) -> Result<Complex64> {
        let full = self.bounding_box(options.radius_cap);
        if full.is_empty() {
            return Err(Error::RegionNotSampleable(format!("{self} has an empty bounding box")));
        }
        let bounded = full.half_extent() < options.radius_cap / 2.0;
        let (lo, hi) = (options.min_scale.ln(), options.radius_cap.ln());
        for _ in 0..options.max_attempts {
            let b = if bounded {
                full
            } else {
                let s = rng.random_range(lo..=hi).exp();
                full.intersect(&BBox::square(s))
            };
            if b.is_empty() {
                continue;
            }
            let z = b.sample(rng);
            if self.contains(z) {
                return Ok(z);
            }
        }
        Err(Error::RegionNotSampleable(format!(
            "no point of {self} found in {} attempts",
            options.max_attempts
        )))
    }
}

/// Sampling limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerOptions {
    pub radius_cap: f64,
    pub min_scale: f64,
    pub max_attempts: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions {
            radius_cap: 1e6,
            min_scale: 1e-3,
            max_attempts: 1_000_000,
        }
    }
}

/// `−z ∈ B₁·B₂`, with the product dilated by the membership tolerance.
fn in_neg_product(b1: &ClosedBase, b2: &ClosedBase, z: Complex64) -> bool {
    let tol = MEMBERSHIP_TOLERANCE;
    if z.norm() <= tol {
        // Near the origin the product set is close iff a base touches 0.
        return b1.contains(Complex64::new(0.0, 0.0)) || b2.contains(Complex64::new(0.0, 0.0));
    }
    let a = b1.inverse().scale(-z);
    let b = b2.as_piece();
    let slack = tol * (1.0 + a.scale_hint().max(b.scale_hint()));
    pieces_meet(&a, &b, slack)
}

/// For two half-plane bases whose product is the parabola `y² < 4P(x+P)` after
/// rotation by 1, the box of the parabola inside `[−s, s]²`.
fn parabola_box(b1: &ClosedBase, b2: &ClosedBase, s: f64) -> Option<BBox> {
    let p = half_plane_product(b1, b2)?;
    let y = (2.0 * (p * (s + p)).sqrt()).min(s);
    Some(BBox {
        x_min: -p,
        x_max: s,
        y_min: -y,
        y_max: y,
    })
}

/// `ε₁ε₂` when both bases are half-planes `n_i·H̄_{ε_i}` with `n₁n₂ = 1`.
fn half_plane_product(b1: &ClosedBase, b2: &ClosedBase) -> Option<f64> {
    match (b1, b2) {
        (ClosedBase::HalfPlane { normal: n1, offset: o1 }, ClosedBase::HalfPlane { normal: n2, offset: o2 }) => {
            let rot = n1 * n2;
            ((rot - Complex64::new(1.0, 0.0)).norm() < 1e-14).then_some(o1 * o2)
        }
        _ => None,
    }
}

/// Closed form for `(−H̄_{ε₁}·H̄_{ε₂})^c` at a positive real point: `λ + P` for
/// `λ < P`, otherwise `2√(Pλ)`, with `P = ε₁ε₂`.
pub fn half_plane_square_distance(p: f64, lambda: f64) -> f64 {
    if lambda < p {
        lambda + p
    } else {
        2.0 * (p * lambda).sqrt()
    }
}

fn product_distance(b1: &ClosedBase, b2: &ClosedBase, lambda: Complex64) -> Result<Distance> {
    if let Some(p) = half_plane_product(b1, b2) {
        if lambda.im == 0.0 && lambda.re > 0.0 {
            return Ok(Distance {
                value: half_plane_square_distance(p, lambda.re),
                method: DistanceMethod::ClosedForm,
            });
        }
    }
    Ok(Distance {
        value: boundary_pair_distance(b1, b2, lambda, DISTANCE_GRID),
        method: DistanceMethod::BoundaryPairSearch,
    })
}

/// `min |λ + ab|` over `a ∈ ∂B₁`, `b ∈ ∂B₂`: grid search then Newton refinement
/// of the best grid cells.
pub fn boundary_pair_distance(b1: &ClosedBase, b2: &ClosedBase, lambda: Complex64, grid: usize) -> f64 {
    let ts: Vec<f64> = (0..grid)
        .map(|i| (i as f64 + 0.5) / grid as f64)
        .collect();
    let pa: Vec<Complex64> = ts.iter().map(|&t| b1.boundary(t).0).collect();
    let pb: Vec<Complex64> = ts.iter().map(|&t| b2.boundary(t).0).collect();
    // Keep the best few cells as Newton seeds.
    const SEEDS: usize = 8;
    let mut best: Vec<(f64, usize, usize)> = Vec::with_capacity(SEEDS + 1);
    for (i, a) in pa.iter().enumerate() {
        for (j, b) in pb.iter().enumerate() {
            let g = (lambda + a * b).norm_sqr();
            if best.len() < SEEDS || g < best[best.len() - 1].0 {
                let pos = best.partition_point(|e| e.0 <= g);
                best.insert(pos, (g, i, j));
                best.truncate(SEEDS);
            }
        }
    }
    best.iter()
        .map(|&(g, i, j)| newton_refine(b1, b2, lambda, ts[i], ts[j]).min(g.sqrt()))
        .fold(f64::INFINITY, f64::min)
}

fn newton_refine(b1: &ClosedBase, b2: &ClosedBase, lambda: Complex64, t0: f64, s0: f64) -> f64 {
    let eval = |t: f64, s: f64| {
        let (a, _, _) = b1.boundary(t);
        let (b, _, _) = b2.boundary(s);
        (lambda + a * b).norm_sqr()
    };
    let (unbounded_t, unbounded_s) = (b1.is_half_plane(), b2.is_half_plane());
    let clamp = |x: f64, unbounded: bool| {
        if unbounded {
            x.clamp(1e-12, 1.0 - 1e-12)
        } else {
            x.rem_euclid(1.0)
        }
    };
    let (mut t, mut s) = (t0, s0);
    let mut g = eval(t, s);
    for _ in 0..NEWTON_STEPS {
        let (a, da, dda) = b1.boundary(t);
        let (b, db, ddb) = b2.boundary(s);
        let f = lambda + a * b;
        let ft = da * b;
        let fs = a * db;
        let gt = 2.0 * (f.conj() * ft).re;
        let gs = 2.0 * (f.conj() * fs).re;
        let gtt = 2.0 * (ft.norm_sqr() + (f.conj() * dda * b).re);
        let gss = 2.0 * (fs.norm_sqr() + (f.conj() * a * ddb).re);
        let gts = 2.0 * ((ft.conj() * fs).re + (f.conj() * da * db).re);
        let det = gtt * gss - gts * gts;
        let (mut dt, mut ds) = if gtt > 0.0 && det > 0.0 {
            (-(gss * gt - gts * gs) / det, -(gtt * gs - gts * gt) / det)
        } else {
            let h = gtt.abs().max(gss.abs()).max(1e-300);
            (-gt / h, -gs / h)
        };
        // Backtracking keeps every accepted step a descent step.
        let mut accepted = false;
        for _ in 0..40 {
            let (nt, ns) = (clamp(t + dt, unbounded_t), clamp(s + ds, unbounded_s));
            let ng = eval(nt, ns);
            if ng <= g {
                t = nt;
                s = ns;
                g = ng;
                accepted = true;
                break;
            }
            dt *= 0.5;
            ds *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    g.sqrt()
}

/// Distance to the boundary by bisection along 720 directions.
fn probe_distance(region: &Region, lambda: Complex64) -> f64 {
    const DIRECTIONS: usize = 720;
    let mut best = f64::INFINITY;
    for k in 0..DIRECTIONS {
        let dir = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / DIRECTIONS as f64);
        let mut hi = 1e-6f64.max(lambda.norm() * 1e-6);
        while region.contains(lambda + dir * hi) && hi < 1e12 {
            hi *= 2.0;
        }
        if hi >= 1e12 {
            continue;
        }
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if region.contains(lambda + dir * mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best = best.min(lo);
    }
    best
}

/// `δ = dist(λ, ∂Γ)/λ` for a positive real `λ ∈ Γ`.
pub fn delta(lambda: f64, region: &Region) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", "> 0", lambda));
    }
    Ok(region.dist_to_boundary(Complex64::new(lambda, 0.0))?.value / lambda)
}

/// Per-edge region `(−Φ_u^c · Φ_v^c)^c` from two circular regions whose closures contain 0.
pub fn asano_ruelle_edge_region(phi_u: &Region, phi_v: &Region) -> Result<Region> {
    let complement = |phi: &Region| -> Result<ClosedBase> {
        let base = match *phi {
            Region::OpenHalfPlane { normal, offset } => ClosedBase::HalfPlane {
                normal: -normal,
                offset: -offset,
            },
            Region::ClosedDiskComplement { center, radius } => ClosedBase::Disk { center, radius },
            _ => {
                return Err(Error::Precondition(
                    "Asano-Ruelle regions must be open half-planes or disk exteriors".into(),
                ))
            }
        };
        base.validate().map_err(|_| Error::Precondition("circular region must contain 0 in its closure".into()))?;
        Ok(base)
    };
    let (a, b) = (complement(phi_u)?, complement(phi_v)?);
    Ok(if a == b {
        Region::NegMinkowskiSquareComplement { base: a }
    } else {
        Region::NegMinkowskiProductComplement { first: a, second: b }
    })
}

/// The connected component of a region containing a reference point, found
/// by flood fill on a grid over `window`.
#[derive(Debug, Clone)]
pub struct Component {
    region: Region,
    window: BBox,
    resolution: usize,
    mask: Vec<bool>,
}

impl Component {
    /// The grid doubles from 64 cells per axis until the component's cell
    /// fraction changes by less than 1e−3 twice in a row (or 2048 is reached).
    pub fn new(region: &Region, reference: Complex64, window: BBox) -> Result<Self> {
        if !region.contains(reference) || !window.contains(reference) {
            return Err(Error::Precondition("reference point must lie in the region and the window".into()));
        }
        let mut resolution = 64;
        let mut mask = flood(region, reference, &window, resolution);
        let mut last = fraction(&mask);
        let mut stable = 0;
        while resolution < 2048 && stable < 2 {
            resolution *= 2;
            mask = flood(region, reference, &window, resolution);
            let f = fraction(&mask);
            stable = if (f - last).abs() < 1e-3 { stable + 1 } else { 0 };
            last = f;
        }
        Ok(Component {
            region: region.clone(),
            window,
            resolution,
            mask,
        })
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.region.contains(z)
            && self.window.contains(z)
            && cell_of(&self.window, self.resolution, z).is_some_and(|c| self.mask[c])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, options: &SamplerOptions) -> Result<Complex64> {
        let b = self.region.bounding_box(options.radius_cap).intersect(&self.window);
        for _ in 0..options.max_attempts {
            let z = b.sample(rng);
            if self.contains(z) {
                return Ok(z);
            }
        }
        Err(Error::RegionNotSampleable("component sampling exhausted its attempts".into()))
    }
}

fn cell_of(w: &BBox, n: usize, z: Complex64) -> Option<usize> {
    let fx = (z.re - w.x_min) / (w.x_max - w.x_min);
    let fy = (z.im - w.y_min) / (w.y_max - w.y_min);
    if !(0.0..=1.0).contains(&fx) || !(0.0..=1.0).contains(&fy) {
        return None;
    }
    let i = ((fx * n as f64) as usize).min(n - 1);
    let j = ((fy * n as f64) as usize).min(n - 1);
    Some(j * n + i)
}

fn flood(region: &Region, reference: Complex64, w: &BBox, n: usize) -> Vec<bool> {
    let centre = |c: usize| {
        let (i, j) = (c % n, c / n);
        Complex64::new(
            w.x_min + (i as f64 + 0.5) * (w.x_max - w.x_min) / n as f64,
            w.y_min + (j as f64 + 0.5) * (w.y_max - w.y_min) / n as f64,
        )
    };
    let inside: Vec<bool> = (0..n * n).map(|c| region.contains(centre(c))).collect();
    let mut mask = vec![false; n * n];
    let start = cell_of(w, n, reference).expect("reference inside window");
    let mut stack = vec![start];
    mask[start] = true;
    while let Some(c) = stack.pop() {
        let (i, j) = (c % n, c / n);
        let mut push = |ii: usize, jj: usize| {
            let d = jj * n + ii;
            if inside[d] && !mask[d] {
                mask[d] = true;
                stack.push(d);
            }
        };
        if i > 0 {
            push(i - 1, j);
        }
        if i + 1 < n {
            push(i + 1, j);
        }
        if j > 0 {
            push(i, j - 1);
        }
        if j + 1 < n {
            push(i, j + 1);
        }
    }
    mask
}

fn fraction(mask: &[bool]) -> f64 {
    mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64
}

// ---------------------------------------------------------------------------
// Region literals.

impl fmt::Display for ClosedBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ClosedBase::Disk { center, radius } => write!(f, "disk c={} r={}", fmt_c(center), radius),
            ClosedBase::HalfPlane { normal, offset } => {
                if normal == Complex64::new(1.0, 0.0) {
                    write!(f, "half eps={}", -offset)
                } else {
                    write!(f, "half eps={} angle={}", -offset, normal.arg())
                }
            }
        }
    }
}

fn fmt_c(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{},{}", z.re, z.im)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            r if *r == Region::cardioid_complement() => write!(f, "cardioid"),
            Region::NegMinkowskiSquareComplement {
                base: ClosedBase::HalfPlane { normal, offset },
            } if *normal == Complex64::new(1.0, 0.0) => write!(f, "halfplane eps={}", -offset),
            Region::OpenDisk { center, radius } => write!(f, "disk c={} r={}", fmt_c(*center), radius),
            Region::ClosedDiskComplement { center, radius } => write!(f, "exterior c={} r={}", fmt_c(*center), radius),
            Region::OpenHalfPlane { normal, offset } => {
                if *normal == Complex64::new(1.0, 0.0) {
                    write!(f, "hplane eps={}", -offset)
                } else {
                    write!(f, "hplane eps={} angle={}", -offset, normal.arg())
                }
            }
            Region::NegMinkowskiSquareComplement { base } => write!(f, "negmink {base} {base}"),
            Region::NegMinkowskiProductComplement { first, second } => write!(f, "negmink {first} {second}"),
            Region::Scaled { region, factor } => write!(f, "scaled f={factor} ({region})"),
            Region::Intersection { regions } => {
                write!(f, "intersect")?;
                for r in regions {
                    write!(f, " ({r})")?;
                }
                Ok(())
            }
            Region::Inverted { region } => write!(f, "inverted ({region})"),
        }
    }
}

impl std::str::FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tokens = tokenize(s)?;
        let mut pos = 0;
        let r = parse_region(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(literal_error(format!("unexpected trailing input `{}`", tokens[pos..].join(" "))));
        }
        r.validate()?;
        Ok(r)
    }
}

fn literal_error(message: String) -> Error {
    Error::Parse { line: 1, message }
}

fn tokenize(s: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    if out.is_empty() {
        return Err(literal_error("empty region literal".into()));
    }
    Ok(out)
}

fn take_kv(tokens: &[String], pos: &mut usize, key: &str) -> Result<String> {
    let t = tokens
        .get(*pos)
        .ok_or_else(|| literal_error(format!("expected `{key}=…`")))?;
    let v = t
        .strip_prefix(&format!("{key}="))
        .ok_or_else(|| literal_error(format!("expected `{key}=…`, found `{t}`")))?;
    *pos += 1;
    Ok(v.to_string())
}

fn opt_kv(tokens: &[String], pos: &mut usize, key: &str) -> Result<Option<String>> {
    if tokens.get(*pos).is_some_and(|t| t.starts_with(&format!("{key}="))) {
        take_kv(tokens, pos, key).map(Some)
    } else {
        Ok(None)
    }
}

fn num(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| literal_error(format!("`{s}` is not a number")))
}

fn complex(s: &str) -> Result<Complex64> {
    match s.split_once(',') {
        Some((a, b)) => Ok(Complex64::new(num(a)?, num(b)?)),
        None => Ok(Complex64::new(num(s)?, 0.0)),
    }
}

fn parse_base(tokens: &[String], pos: &mut usize) -> Result<ClosedBase> {
    let head = tokens.get(*pos).ok_or_else(|| literal_error("expected a base".into()))?;
    *pos += 1;
    match head.as_str() {
        "disk" => {
            let c = complex(&take_kv(tokens, pos, "c")?)?;
            let r = num(&take_kv(tokens, pos, "r")?)?;
            Ok(ClosedBase::Disk { center: c, radius: r })
        }
        "half" => {
            let eps = num(&take_kv(tokens, pos, "eps")?)?;
            let angle = opt_kv(tokens, pos, "angle")?.map(|a| num(&a)).transpose()?.unwrap_or(0.0);
            Ok(ClosedBase::HalfPlane {
                normal: if angle == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::from_polar(1.0, angle)
                },
                offset: -eps,
            })
        }
        other => Err(literal_error(format!("unknown base `{other}` (expected disk or half)"))),
    }
}

fn parse_paren(tokens: &[String], pos: &mut usize) -> Result<Region> {
    if tokens.get(*pos).map(String::as_str) != Some("(") {
        return Err(literal_error("expected `(`".into()));
    }
    *pos += 1;
    let r = parse_region(tokens, pos)?;
    if tokens.get(*pos).map(String::as_str) != Some(")") {
        return Err(literal_error("expected `)`".into()));
    }
    *pos += 1;
    Ok(r)
}

fn parse_region(tokens: &[String], pos: &mut usize) -> Result<Region> {
    let head = tokens.get(*pos).ok_or_else(|| literal_error("expected a region".into()))?.clone();
    *pos += 1;
    match head.as_str() {
        "cardioid" => Ok(Region::cardioid_complement()),
        "halfplane" => Ok(Region::half_plane_square_complement(num(&take_kv(tokens, pos, "eps")?)?)),
        "hplane" => {
            let eps = num(&take_kv(tokens, pos, "eps")?)?;
            let angle = opt_kv(tokens, pos, "angle")?.map(|a| num(&a)).transpose()?.unwrap_or(0.0);
            Ok(Region::OpenHalfPlane {
                normal: if angle == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::from_polar(1.0, angle)
                },
                offset: -eps,
            })
        }
        "disk" => Ok(Region::OpenDisk {
            center: complex(&take_kv(tokens, pos, "c")?)?,
            radius: num(&take_kv(tokens, pos, "r")?)?,
        }),
        "exterior" => Ok(Region::ClosedDiskComplement {
            center: complex(&take_kv(tokens, pos, "c")?)?,
            radius: num(&take_kv(tokens, pos, "r")?)?,
        }),
        "negmink" => {
            let a = parse_base(tokens, pos)?;
            let b = parse_base(tokens, pos)?;
            Ok(if a == b {
                Region::NegMinkowskiSquareComplement { base: a }
            } else {
                Region::NegMinkowskiProductComplement { first: a, second: b }
            })
        }
        "scaled" => {
            let f = num(&take_kv(tokens, pos, "f")?)?;
            Ok(parse_paren(tokens, pos)?.scaled(f))
        }
        "inverted" => Ok(parse_paren(tokens, pos)?.inverted()),
        "intersect" => {
            let mut regions = Vec::new();
            while tokens.get(*pos).map(String::as_str) == Some("(") {
                regions.push(parse_paren(tokens, pos)?);
            }
            Ok(Region::Intersection { regions })
        }
        other => Err(literal_error(format!("unknown region `{other}`"))),
    }
}

/// Polar description of the cardioid complement: `z` is inside iff
/// `|z| > 2(1 − cos arg z)`.
pub fn cardioid_radius(theta: f64) -> f64 {
    2.0 * (1.0 - theta.cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn half_plane_membership() {
        let h = Region::h(0.5);
        assert!(h.contains(c(-1.0, 0.0)));
        assert!(!h.contains(c(0.0, 0.0)));
    }

    #[test]
    fn cardioid_contains_positive_reals() {
        let g = Region::cardioid_complement();
        for x in [1e-6, 1e-3, 0.1, 1.0, 10.0, 1e5] {
            assert!(g.contains(c(x, 0.0)), "{x}");
        }
        assert!(!g.contains(c(-1.0, 0.0)));
        assert!(!g.contains(c(0.0, 0.0)));
    }

    #[test]
    fn cardioid_matches_polar_form() {
        let g = Region::cardioid_complement();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20_000 {
            let z = c(rng.random_range(-5.0..2.0), rng.random_range(-3.5..3.5));
            let r = cardioid_radius(z.arg());
            if (z.norm() - r).abs() > 1e-9 {
                assert_eq!(g.contains(z), z.norm() > r, "{z}");
            }
        }
    }

    #[test]
    fn half_plane_square_matches_cartesian_form() {
        for eps in [0.1, 0.5, 1.0] {
            let g = Region::half_plane_square_complement(eps);
            assert!(g.contains(c(1.0, 0.0)));
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            for _ in 0..20_000 {
                let z = c(rng.random_range(-2.0..4.0), rng.random_range(-4.0..4.0));
                let lhs = z.im * z.im;
                let rhs = 4.0 * eps * eps * (z.re + eps * eps);
                if (lhs - rhs).abs() > 1e-9 {
                    assert_eq!(g.contains(z), lhs < rhs, "{z} eps={eps}");
                }
            }
        }
    }

    #[test]
    fn disk_product_matches_brute_force() {
        let b1 = ClosedBase::disk(c(-2.0, 0.5), 1.0);
        let b2 = ClosedBase::disk(c(-1.5, -1.0), 0.7);
        let g = Region::NegMinkowskiProductComplement { first: b1, second: b2 };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..300 {
            let z = c(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
            // Brute force: distance from −z to a dense sample of the product set.
            let mut d = f64::INFINITY;
            for i in 0..200 {
                for j in 0..200 {
                    for (ri, rj) in [(1.0, 1.0), (0.5, 1.0), (1.0, 0.5), (0.0, 1.0), (1.0, 0.0)] {
                        let a = c(-2.0, 0.5) + Complex64::from_polar(ri, i as f64 * 2.0 * PI / 200.0);
                        let b = c(-1.5, -1.0) + Complex64::from_polar(0.7 * rj, j as f64 * 2.0 * PI / 200.0);
                        d = d.min((z + a * b).norm());
                    }
                }
            }
            if d > 0.2 {
                assert!(g.contains(z), "{z} at product distance {d}");
            }
            let depth = boundary_pair_distance(&b1, &b2, z, 256);
            if !g.contains(z) && depth > 0.2 {
                panic!("{z} classified inside the product");
            }
        }
    }

    #[test]
    fn distance_examples() {
        let g = Region::half_plane_square_complement(0.5);
        assert_abs_diff_eq!(g.dist_to_boundary(c(1.0, 0.0)).unwrap().value, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.dist_to_boundary(c(0.1, 0.0)).unwrap().value, 0.35, epsilon = 1e-15);
        assert_abs_diff_eq!(delta(1.0, &g).unwrap(), 1.0, epsilon = 1e-15);
        // 2·0.5·√4 / 4.
        assert_abs_diff_eq!(delta(4.0, &g).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn numeric_search_matches_closed_form() {
        for eps in [0.1, 0.25, 0.5, 1.0] {
            let b = ClosedBase::h_bar(eps);
            for lam in [0.01, eps * eps, 1.0, 4.0] {
                let numeric = boundary_pair_distance(&b, &b, c(lam, 0.0), DISTANCE_GRID);
                let closed = half_plane_square_distance(eps * eps, lam);
                assert_abs_diff_eq!(numeric, closed, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn atoms_distance() {
        assert_abs_diff_eq!(
            Region::open_disk(c(1.0, 0.0), 0.5).dist_to_boundary(c(1.2, 0.0)).unwrap().value,
            0.3,
            epsilon = 1e-15
        );
        assert!(Region::h(0.5).dist_to_boundary(c(1.0, 0.0)).is_err());
    }

    #[test]
    fn scaling_invariance_of_delta() {
        let g = Region::cardioid_complement();
        for lam in [0.5, 1.0, 2.0] {
            let d1 = delta(lam, &g).unwrap();
            let d2 = delta(1.0, &g.clone().scaled(1.0 / lam)).unwrap();
            assert_abs_diff_eq!(d1, d2, epsilon = 1e-10);
        }
    }

    #[test]
    fn asano_ruelle_examples() {
        let phi = Region::OpenHalfPlane {
            normal: c(-1.0, 0.0),
            offset: 0.3,
        };
        assert_eq!(
            asano_ruelle_edge_region(&phi, &phi).unwrap(),
            Region::half_plane_square_complement(0.3)
        );
        let ext = Region::ClosedDiskComplement {
            center: c(-1.0, 0.0),
            radius: 1.0,
        };
        assert_eq!(asano_ruelle_edge_region(&ext, &ext).unwrap(), Region::cardioid_complement());
        let other = Region::ClosedDiskComplement {
            center: c(-3.0, 0.0),
            radius: 1.5,
        };
        assert!(matches!(
            asano_ruelle_edge_region(&ext, &other).unwrap(),
            Region::NegMinkowskiProductComplement { .. }
        ));
        assert!(asano_ruelle_edge_region(&Region::open_disk(c(0.0, 0.0), 1.0), &ext).is_err());
        // Exterior of a disk around 0 does not contain 0 in its closure.
        let bad = Region::ClosedDiskComplement {
            center: c(0.0, 0.0),
            radius: 1.0,
        };
        assert!(asano_ruelle_edge_region(&bad, &ext).is_err());
    }

    #[test]
    fn literals_round_trip() {
        for s in [
            "halfplane eps=0.5",
            "cardioid",
            "negmink disk c=-1 r=1 disk c=-2 r=1",
            "scaled f=0.5 (cardioid)",
            "intersect (disk c=1 r=0.5) (hplane eps=-0.9)",
            "inverted (exterior c=-1 r=1)",
        ] {
            let r: Region = s.parse().unwrap();
            assert_eq!(r.to_string().parse::<Region>().unwrap(), r, "{s}");
        }
        assert_eq!(
            "negmink disk c=-1 r=1 disk c=-1 r=1".parse::<Region>().unwrap(),
            Region::cardioid_complement()
        );
        assert!("blob".parse::<Region>().is_err());
        assert!("halfplane eps=x".parse::<Region>().is_err());
    }

    #[test]
    fn sampling_respects_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let opts = SamplerOptions::default();
        let d = Region::open_disk(c(1.0, 0.0), 0.1);
        for _ in 0..1000 {
            let z = d.sample(&mut rng, &opts).unwrap();
            assert!((z - 1.0).norm() < 0.1);
        }
        let g = Region::half_plane_square_complement(0.1);
        let mut big_imag = false;
        for _ in 0..2000 {
            let z = g.sample(&mut rng, &opts).unwrap();
            assert!(g.contains(z));
            big_imag |= z.im.abs() > 10.0;
        }
        assert!(big_imag);
    }

    #[test]
    fn component_of_disjoint_intersection() {
        // Two disjoint lobes: the annulus-like set |z| > 1 intersected with a
        // horizontal strip |Im z| < 0.5 and |z| < 3.
        let r = Region::Intersection {
            regions: vec![
                Region::ClosedDiskComplement { center: c(0.0, 0.0), radius: 1.0 },
                Region::open_disk(c(0.0, 0.0), 3.0),
                Region::OpenHalfPlane { normal: c(0.0, 1.0), offset: 0.5 },
                Region::OpenHalfPlane { normal: c(0.0, -1.0), offset: 0.5 },
            ],
        };
        let comp = Component::new(&r, c(2.0, 0.0), BBox::square(3.5)).unwrap();
        assert!(comp.contains(c(1.5, 0.2)));
        assert!(!comp.contains(c(-1.5, 0.2)));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            assert!(comp.sample(&mut rng, &SamplerOptions::default()).unwrap().re > 0.0);
        }
    }

    #[test]
    fn inverted_region_distance_is_best_effort() {
        // Inverting the exterior of D(0,2) gives the punctured disk D(0, 1/2).
        let r = Region::ClosedDiskComplement { center: c(0.0, 0.0), radius: 2.0 }.inverted();
        let d = r.dist_to_boundary(c(0.25, 0.0)).unwrap();
        assert_eq!(d.method, DistanceMethod::DirectionalProbe);
        // The puncture at 0 is invisible to the probe; the outer circle is at 0.25.
        assert!((d.value - 0.25).abs() < 1e-6);
    }
}
