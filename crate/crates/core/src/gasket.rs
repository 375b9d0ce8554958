//! Generalized Sierpinski gaskets in exact rational arithmetic.
//!
//! `E` is the closed triangle with vertices `(0,0)`, `(1,0)`, `(0,1)`. The
//! lines `x = i/q`, `y = i/q` and `x + y = i/q` cut a lower triangle into
//! `q(q+1)/2` closed lower triangles and `q(q-1)/2` open upper ones. Keeping
//! the lowers and iterating `n` times gives the stage `G_q^n`.
//!
//! The one-dimensional measure of a line `y = γ(x - b)` inside a region is
//! measured by the length of its x-projection. The true length differs by
//! the constant factor `√(1+γ²)`, which cancels in every ratio computed
//! here, so everything stays in `BigRational`.
//!
//! A slope `γ > 0` is never parallel to a triangle edge (slopes 0, ∞, -1),
//! so a line meets shared boundaries only in points; the closed/open
//! convention therefore never changes a measure.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GasketError {
    #[error("invalid argument: {0}")]
    InvalidArgs(String),
    #[error("line does not meet the interior of E")]
    DegenerateLine,
}

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Point2 {
    pub x: Rational,
    pub y: Rational,
}

impl Point2 {
    pub fn new(x: Rational, y: Rational) -> Self {
        Self { x, y }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// Right angle at the min-x, min-y corner.
    Lower,
    /// Right angle at the max-x, max-y corner.
    Upper,
}

/// Axis-parallel isosceles right triangle, stored as its right-angle corner
/// and leg length.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Triangle {
    corner: Point2,
    leg: Rational,
    orientation: Orientation,
}

impl Triangle {
    pub fn new(
        corner: Point2,
        leg: Rational,
        orientation: Orientation,
    ) -> Result<Self, GasketError> {
        if !leg.is_positive() {
            return Err(GasketError::InvalidArgs(
                "leg length must be positive".into(),
            ));
        }
        Ok(Self {
            corner,
            leg,
            orientation,
        })
    }

    /// The unit triangle `E`.
    pub fn unit() -> Self {
        Self {
            corner: Point2::new(int(0), int(0)),
            leg: int(1),
            orientation: Orientation::Lower,
        }
    }

    /// Recognize an axis-parallel isosceles right triangle from its vertices.
    pub fn from_vertices(a: Point2, b: Point2, c: Point2) -> Result<Self, GasketError> {
        let pts = [a, b, c];
        for i in 0..3 {
            let right = &pts[i];
            let p = &pts[(i + 1) % 3];
            let r = &pts[(i + 2) % 3];
            // one neighbour shares y (horizontal leg), the other shares x
            let (h, v) = if p.y == right.y && r.x == right.x {
                (p, r)
            } else if r.y == right.y && p.x == right.x {
                (r, p)
            } else {
                continue;
            };
            let dx = &h.x - &right.x;
            let dy = &v.y - &right.y;
            if dx.abs() != dy.abs() || dx.is_zero() {
                continue;
            }
            if dx.is_positive() && dy.is_positive() {
                return Triangle::new(right.clone(), dx, Orientation::Lower);
            }
            if dx.is_negative() && dy.is_negative() {
                return Triangle::new(right.clone(), -dx, Orientation::Upper);
            }
        }
        Err(GasketError::InvalidArgs(
            "vertices do not form a lower or upper triangle".into(),
        ))
    }

    pub fn corner(&self) -> &Point2 {
        &self.corner
    }

    pub fn leg(&self) -> &Rational {
        &self.leg
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Right-angle vertex first, then the horizontal and vertical neighbours.
    pub fn vertices(&self) -> [Point2; 3] {
        let Point2 { x, y } = &self.corner;
        let s = match self.orientation {
            Orientation::Lower => self.leg.clone(),
            Orientation::Upper => -self.leg.clone(),
        };
        [
            self.corner.clone(),
            Point2::new(x + &s, y.clone()),
            Point2::new(x.clone(), y + &s),
        ]
    }

    pub fn area(&self) -> Rational {
        &self.leg * &self.leg / int(2)
    }
}

/// The line `{(x, γ(x - b))}` with `γ > 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LineSpec {
    slope: Rational,
    offset: Rational,
}

impl LineSpec {
    pub fn new(slope: Rational, offset: Rational) -> Result<Self, GasketError> {
        if !slope.is_positive() {
            return Err(GasketError::InvalidArgs("slope must be positive".into()));
        }
        Ok(Self { slope, offset })
    }

    /// Line through the origin.
    pub fn through_origin(slope: Rational) -> Result<Self, GasketError> {
        Self::new(slope, int(0))
    }

    pub fn slope(&self) -> &Rational {
        &self.slope
    }

    pub fn offset(&self) -> &Rational {
        &self.offset
    }

    /// x at which the line reaches height `y`.
    fn x_at_height(&self, y: &Rational) -> Rational {
        &self.offset + y / &self.slope
    }

    /// x at which the line meets the anti-diagonal `x + y = s`.
    fn x_on_antidiagonal(&self, s: &Rational) -> Rational {
        (s + &self.slope * &self.offset) / (int(1) + &self.slope)
    }
}

/// Split a lower triangle into its `q²` subtriangles: `(lowers, uppers)`.
pub fn subdivide(t: &Triangle, q: u32) -> Result<(Vec<Triangle>, Vec<Triangle>), GasketError> {
    if t.orientation != Orientation::Lower {
        return Err(GasketError::InvalidArgs(
            "only lower triangles subdivide".into(),
        ));
    }
    if q < 2 {
        return Err(GasketError::InvalidArgs("q must be at least 2".into()));
    }
    let h = &t.leg / int(q as i64);
    let (x0, y0) = (&t.corner.x, &t.corner.y);
    let at = |i: u32, j: u32| Point2::new(x0 + &h * int(i as i64), y0 + &h * int(j as i64));
    let mut lowers = Vec::with_capacity((q * (q + 1) / 2) as usize);
    let mut uppers = Vec::with_capacity((q * (q - 1) / 2) as usize);
    for i in 0..q {
        for j in 0..q - i {
            lowers.push(Triangle {
                corner: at(i, j),
                leg: h.clone(),
                orientation: Orientation::Lower,
            });
            if i + j + 2 <= q {
                uppers.push(Triangle {
                    corner: at(i + 1, j + 1),
                    leg: h.clone(),
                    orientation: Orientation::Upper,
                });
            }
        }
    }
    Ok((lowers, uppers))
}

/// Length of the x-projection of `line ∩ t`.
pub fn line_segment_measure(t: &Triangle, line: &LineSpec) -> Rational {
    let Point2 { x: cx, y: cy } = &t.corner;
    let x_corner_height = line.x_at_height(cy);
    let (lo, hi) = match t.orientation {
        Orientation::Lower => {
            let s = cx + cy + &t.leg;
            let lo = if *cx > x_corner_height {
                cx.clone()
            } else {
                x_corner_height
            };
            (lo, line.x_on_antidiagonal(&s))
        }
        Orientation::Upper => {
            let s = cx + cy - &t.leg;
            let hi = if *cx < x_corner_height {
                cx.clone()
            } else {
                x_corner_height
            };
            (line.x_on_antidiagonal(&s), hi)
        }
    };
    if hi > lo {
        hi - lo
    } else {
        Rational::zero()
    }
}

/// The lower triangles of `G_q^n` (no pruning; `(q(q+1)/2)^n` of them).
#[derive(Clone, Debug)]
pub struct GasketStage {
    pub q: u32,
    pub depth: u32,
    pub triangles: Vec<Triangle>,
}

impl GasketStage {
    pub fn build(q: u32, depth: u32) -> Result<Self, GasketError> {
        let mut triangles = vec![Triangle::unit()];
        for _ in 0..depth {
            let mut next = Vec::new();
            for t in &triangles {
                next.extend(subdivide(t, q)?.0);
            }
            triangles = next;
        }
        Ok(Self {
            q,
            depth,
            triangles,
        })
    }

    pub fn line_measure(&self, line: &LineSpec) -> Rational {
        self.triangles
            .iter()
            .map(|t| line_segment_measure(t, line))
            .fold(Rational::zero(), |a, b| a + b)
    }
}

/// `μ(L ∩ G_q^n) / μ(L ∩ E)` for every `n` in `0..=n_max`.
///
/// Stage triangles that meet the line in measure zero are dropped before
/// subdividing: all their descendants do too.
pub fn gasket_line_ratios(
    q: u32,
    n_max: u32,
    line: &LineSpec,
) -> Result<Vec<Rational>, GasketError> {
    if q < 2 {
        return Err(GasketError::InvalidArgs("q must be at least 2".into()));
    }
    let total = line_segment_measure(&Triangle::unit(), line);
    if total.is_zero() {
        return Err(GasketError::DegenerateLine);
    }
    let mut frontier = vec![Triangle::unit()];
    let mut ratios = vec![Rational::one()];
    for _ in 0..n_max {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        let mut sum = Rational::zero();
        for t in &frontier {
            for child in subdivide(t, q)?.0 {
                let m = line_segment_measure(&child, line);
                if m.is_positive() {
                    sum += m;
                    next.push(child);
                }
            }
        }
        ratios.push(&sum / &total);
        frontier = next;
    }
    Ok(ratios)
}

pub fn gasket_line_ratio(q: u32, n: u32, line: &LineSpec) -> Result<Rational, GasketError> {
    Ok(gasket_line_ratios(q, n, line)?
        .pop()
        .expect("n_max + 1 entries"))
}

/// Where `L_b` crosses the hypotenuse `x + y = 1/2` of the first upper
/// triangle: `((1/2 + γb)/(1+γ), γ(1/2 - b)/(1+γ))`.
pub fn hypotenuse_crossing(slope: &Rational, offset: &Rational) -> Result<Point2, GasketError> {
    if !slope.is_positive() {
        return Err(GasketError::InvalidArgs("slope must be positive".into()));
    }
    let half = rat(1, 2);
    let denom = int(1) + slope;
    let x = (&half + slope * offset) / &denom;
    let y = slope * (&half - offset) / &denom;
    Ok(Point2::new(x, y))
}

/// Fraction of `μ(L ∩ E)` removed by the first subdivision, i.e. lying in
/// the open upper triangles of `U_q(E)`. For `q = 2` this is
/// `μ(L ∩ E_1)/μ(L ∩ E)`.
pub fn first_void_fraction(q: u32, line: &LineSpec) -> Result<Rational, GasketError> {
    let total = line_segment_measure(&Triangle::unit(), line);
    if total.is_zero() {
        return Err(GasketError::DegenerateLine);
    }
    let (_, uppers) = subdivide(&Triangle::unit(), q)?;
    let removed = uppers
        .iter()
        .map(|t| line_segment_measure(t, line))
        .fold(Rational::zero(), |a, b| a + b);
    Ok(removed / total)
}

/// Grid minimum of [`first_void_fraction`] over offsets `b ∈ [-ε, (1-ε)/2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaEstimate {
    pub eta: Rational,
    pub argmin: Rational,
    pub epsilon: Rational,
    pub grid_size: u32,
}

/// Grid estimate of the positive minimum `η`; not a certified bound.
///
/// `ε = min(1/(4γ), 1/4)`, which keeps `ε < 1/(2γ)` and makes every grid
/// line cross the interior of `E`.
pub fn eta_estimate(slope: &Rational, q: u32, grid_size: u32) -> Result<EtaEstimate, GasketError> {
    if !slope.is_positive() {
        return Err(GasketError::InvalidArgs("slope must be positive".into()));
    }
    if grid_size < 2 {
        return Err(GasketError::InvalidArgs(
            "grid size must be at least 2".into(),
        ));
    }
    let quarter = rat(1, 4);
    let eps_slope = quarter.clone() / slope;
    let epsilon = if eps_slope < quarter {
        eps_slope
    } else {
        quarter
    };
    eta_on_interval(
        slope,
        q,
        grid_size,
        &-epsilon.clone(),
        &((int(1) - &epsilon) / int(2)),
    )
    .map(|(eta, argmin)| EtaEstimate {
        eta,
        argmin,
        epsilon,
        grid_size,
    })
}

/// Grid minimum of the first-void fraction over `b ∈ [lo, hi]`.
pub fn eta_on_interval(
    slope: &Rational,
    q: u32,
    grid_size: u32,
    lo: &Rational,
    hi: &Rational,
) -> Result<(Rational, Rational), GasketError> {
    let step = (hi - lo) / int(grid_size as i64 - 1);
    let mut best: Option<(Rational, Rational)> = None;
    for i in 0..grid_size {
        let b = lo + &step * int(i as i64);
        let f = first_void_fraction(q, &LineSpec::new(slope.clone(), b.clone())?)?;
        if best.as_ref().is_none_or(|(m, _)| f < *m) {
            best = Some((f, b));
        }
    }
    Ok(best.expect("grid_size >= 2"))
}

/// Smallest `c >= 1` with `ratios[n] <= (1-η)^⌊n/c⌋` for every `n`.
pub fn decay_constant(ratios: &[Rational], eta: &Rational) -> Option<u32> {
    let base = int(1) - eta;
    (1..=ratios.len().max(1) as u32).find(|&c| {
        ratios
            .iter()
            .enumerate()
            .all(|(n, r)| *r <= num_traits::pow(base.clone(), n / c as usize))
    })
}

/// Corner selector for the two-lower-triangle map used to locate the voids
/// `E_n^i(q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corner {
    /// `E_n^1`: voids approaching the vertex `(1, 0)`.
    BottomRight,
    /// `E_n^2`: voids approaching the vertex `(0, 1)`.
    TopLeft,
}

/// The bottom-right and top-left lower triangles of `L_q(t)`.
pub fn select_two_lowers(t: &Triangle, q: u32) -> Result<[Triangle; 2], GasketError> {
    let (lowers, _) = subdivide(t, q)?;
    let h = &t.leg / int(q as i64);
    let far = &h * int(q as i64 - 1);
    let find = |dx: &Rational, dy: &Rational| {
        lowers
            .iter()
            .find(|c| c.corner.x == &t.corner.x + dx && c.corner.y == &t.corner.y + dy)
            .cloned()
            .expect("corner subtriangle exists")
    };
    Ok([find(&int(0), &far), find(&far, &int(0))])
}

/// `E_n^i(q)`: the void next to `corner` inside the `(n-1)`-fold corner
/// lower triangle of `E`. For `q = 2` these are exactly the triangles
/// `E_n^1`, `E_n^2` with vertices at `(2^n - 1)/2^n`, `1/2^n`, ….
pub fn e_triangle(q: u32, n: u32, corner: Corner) -> Result<Triangle, GasketError> {
    if n == 0 {
        return Err(GasketError::InvalidArgs("n must be positive".into()));
    }
    let mut t = Triangle::unit();
    for _ in 1..n {
        let [top_left, bottom_right] = select_two_lowers(&t, q)?;
        t = match corner {
            Corner::BottomRight => bottom_right,
            Corner::TopLeft => top_left,
        };
    }
    let h = &t.leg / int(q as i64);
    let (near, far) = (h.clone(), &h * int(q as i64 - 1));
    let (dx, dy) = match corner {
        Corner::BottomRight => (far, near),
        Corner::TopLeft => (near, far),
    };
    Ok(Triangle {
        corner: Point2::new(&t.corner.x + dx, &t.corner.y + dy),
        leg: h,
        orientation: Orientation::Upper,
    })
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
