//! Flat-torus geometry: points, axis-aligned boxes, partitions and the
//! N-particle phase-space point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduce a real coordinate onto `[0, 1)`.
#[inline]
pub(crate) fn wrap_unit(y: f64) -> f64 {
    // truncation is much cheaper than a libm floor call on baseline x86-64
    let fl = if y.abs() < 4.0e18 {
        let i = y as i64 as f64;
        if i > y {
            i - 1.0
        } else {
            i
        }
    } else {
        y.floor()
    };
    let r = y - fl;
    // y slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// A point of the unit torus, every coordinate in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::param("coords", "a torus point needs at least one coordinate"));
        }
        if let Some(c) = coords.iter().find(|c| !(0.0..1.0).contains(*c)) {
            return Err(Error::param("coords", format!("coordinate {c} outside [0,1)")));
        }
        Ok(Self(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

/// The fractional-part map `y -> {y}` applied coordinate-wise.
pub fn fractional_part(y: &[f64]) -> Result<TorusPoint> {
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("fractional_part input {v}")));
    }
    if y.is_empty() {
        return Err(Error::param("y", "empty coordinate tuple"));
    }
    Ok(TorusPoint(y.iter().map(|&v| wrap_unit(v)).collect()))
}

/// Axis-aligned half-open box `[lower, upper)` inside the unit torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusRegion {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TorusRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidRegion(format!(
                "bounds must be non-empty and of equal length ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        for (k, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !(0.0..=1.0).contains(&l) || !(0.0..=1.0).contains(&u) || l > u {
                return Err(Error::InvalidRegion(format!("axis {k}: [{l}, {u}) is not inside [0,1]")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// One-dimensional interval `[a, b)`.
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a], vec![b])
    }

    /// The whole torus in `dim` dimensions.
    pub fn full(dim: usize) -> Self {
        Self { lower: vec![0.0; dim], upper: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Lebesgue measure `|I|`.
    pub fn measure(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    /// Membership test on raw coordinates; the caller guarantees the length.
    #[inline]
    pub fn contains_coords(&self, x: &[f64]) -> bool {
        self.lower.iter().zip(&self.upper).zip(x).all(|((&l, &u), &c)| l <= c && c < u)
    }

    fn disjoint_from(&self, other: &TorusRegion) -> bool {
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(other.lower.iter().zip(&other.upper))
            .any(|((&l1, &u1), (&l2, &u2))| l1.max(l2) >= u1.min(u2))
    }
}

/// `true` iff `lower_k <= x_k < upper_k` on every axis.
pub fn region_contains(region: &TorusRegion, x: &TorusPoint) -> bool {
    region.dim() == x.dim() && region.contains_coords(x.coords())
}

/// A finite family of pairwise disjoint boxes tiling the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPartition {
    regions: Vec<TorusRegion>,
}

impl RegionPartition {
    pub fn new(regions: Vec<TorusRegion>) -> Result<Self> {
        let Some(first) = regions.first() else {
            return Err(Error::InvalidPartition("no regions".into()));
        };
        let dim = first.dim();
        if let Some(r) = regions.iter().find(|r| r.dim() != dim) {
            return Err(Error::Dimension { expected: dim, got: r.dim() });
        }
        let total: f64 = regions.iter().map(TorusRegion::measure).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidPartition(format!("measures sum to {total}, not 1")));
        }
        for i in 0..regions.len() {
            for j in i + 1..regions.len() {
                if !regions[i].disjoint_from(&regions[j]) {
                    return Err(Error::InvalidPartition(format!("regions {i} and {j} overlap")));
                }
            }
        }
        Ok(Self { regions })
    }

    /// `cells` equal intervals of the unit circle.
    pub fn uniform_1d(cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidPartition("zero cells".into()));
        }
        let edge = |i: usize| if i == cells { 1.0 } else { i as f64 / cells as f64 };
        let regions = (0..cells).map(|i| TorusRegion::interval(edge(i), edge(i + 1))).collect::<Result<Vec<_>>>()?;
        Self::new(regions)
    }

    pub fn regions(&self) -> &[TorusRegion] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.regions[0].dim()
    }

    /// Index of the unique region containing `x`, if any.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        self.regions.iter().position(|r| r.contains_coords(x))
    }
}

/// The phase-space point `(X, P)` of `n` particles on the `dim`-torus.
///
/// Coordinates are stored particle-major in flat buffers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasMicrostate {
    n: usize,
    dim: usize,
    positions: Vec<f64>,
    momenta: Vec<f64>,
}

impl GasMicrostate {
    pub fn new(dim: usize, positions: Vec<f64>, momenta: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be >= 1"));
        }
        if positions.len() != momenta.len() || !positions.len().is_multiple_of(dim) || positions.is_empty() {
            return Err(Error::param(
                "positions",
                format!(
                    "{} position and {} momentum entries do not form whole {dim}-d particles",
                    positions.len(),
                    momenta.len()
                ),
            ));
        }
        if let Some(c) = positions.iter().find(|c| !(0.0..1.0).contains(*c)) {
            return Err(Error::param("positions", format!("coordinate {c} outside [0,1)")));
        }
        if let Some(p) = momenta.iter().find(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("momentum {p}")));
        }
        Ok(Self { n: positions.len() / dim, dim, positions, momenta })
    }

    /// Build from a list of per-particle points and momenta.
    pub fn from_particles(points: &[TorusPoint], momenta: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(TorusPoint::dim).unwrap_or(0);
        if points.len() != momenta.len() {
            return Err(Error::param("momenta", "one momentum per particle required"));
        }
        if let Some(p) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::Dimension { expected: dim, got: p.dim() });
        }
        if let Some(p) = momenta.iter().find(|p| p.len() != dim) {
            return Err(Error::Dimension { expected: dim, got: p.len() });
        }
        let positions = points.iter().flat_map(|p| p.coords().iter().copied()).collect();
        let momenta = momenta.iter().flatten().copied().collect();
        Self::new(dim, positions, momenta)
    }

    pub(crate) fn from_parts_unchecked(dim: usize, positions: Vec<f64>, momenta: Vec<f64>) -> Self {
        debug_assert_eq!(positions.len(), momenta.len());
        Self { n: positions.len() / dim, dim, positions, momenta }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn momentum(&self, i: usize) -> &[f64] {
        &self.momenta[i * self.dim..(i + 1) * self.dim]
    }
}
