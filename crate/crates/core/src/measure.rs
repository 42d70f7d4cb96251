//! Symbolic-plus-numeric model of finite compactly supported measures:
//! a finite atom list, a piecewise-constant density on dyadic cells at a
//! finite level, and declared accumulation points of the atom family.
//!
//! All types are immutable values; operations return new specs. Densities are
//! mass per unit length (line) / unit area (plane) in real coordinates, so
//! cell masses are exact products.

use crate::dyadic::{self, Ambient, CellId};
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

const POINT_TOL: f64 = 1e-12;

/// A point mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub point: Complex64,
    pub mass: f64,
}

/// Piecewise-constant density on the level-`level` cells. Cells absent from
/// the map carry density zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NonatomicPart {
    pub level: u32,
    pub densities: BTreeMap<u64, f64>,
}

impl NonatomicPart {
    pub fn is_empty(&self) -> bool {
        self.densities.is_empty()
    }
}

/// Placement of the dyadic root cell in real coordinates.
///
/// For the line the root is `[anchor.re, anchor.re + size]`; for the plane it
/// is the square with center `anchor` and side `size`. The default frame is
/// the normalized region itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub anchor: Complex64,
    pub size: f64,
}

impl Frame {
    pub fn unit() -> Frame {
        Frame { anchor: Complex64::new(0.0, 0.0), size: 1.0 }
    }

    pub fn is_unit(&self) -> bool {
        self.anchor == Complex64::new(0.0, 0.0) && self.size == 1.0
    }

    /// The similarity taking real coordinates to normalized ones.
    pub fn to_map(&self) -> AffineMap {
        AffineMap { offset: self.anchor, scale: self.size }
    }
}

/// Similarity `z -> (z - offset)/scale` from real to normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub offset: Complex64,
    pub scale: f64,
}

impl AffineMap {
    pub fn identity() -> AffineMap {
        AffineMap { offset: Complex64::new(0.0, 0.0), scale: 1.0 }
    }

    pub fn forward(&self, z: Complex64) -> Complex64 {
        (z - self.offset) / self.scale
    }

    pub fn backward(&self, z: Complex64) -> Complex64 {
        self.offset + self.scale * z
    }
}

/// A compactly supported measure description.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpec {
    pub ambient: Ambient,
    pub frame: Frame,
    pub atoms: Vec<Atom>,
    pub nonatomic: NonatomicPart,
    pub accumulation_points: Vec<Complex64>,
}

/// Union of closed dyadic cells plus a finite point set, in canonical form:
/// no cell contained in another, no atom-derived point inside a listed cell.
/// Declared accumulation points are kept verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedSetDesc {
    pub cells: BTreeSet<CellId>,
    pub points: Vec<Complex64>,
}

impl ClosedSetDesc {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty() && self.points.is_empty()
    }

    /// Set equality of the canonical descriptions (points up to `POINT_TOL`).
    pub fn same_as(&self, other: &ClosedSetDesc) -> bool {
        self.cells == other.cells
            && self.points.len() == other.points.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| (a - b).norm() <= POINT_TOL)
    }

    /// Euclidean distance from `p` (normalized coordinates for cells, real
    /// coordinates must be pre-mapped by the caller) to the described set.
    pub fn distance(&self, p: Complex64, ambient: Ambient) -> f64 {
        let mut d = f64::INFINITY;
        for &cell in &self.cells {
            d = d.min(dyadic::geometry(cell, ambient).distance(p));
        }
        for &q in &self.points {
            d = d.min((p - q).norm());
        }
        d
    }
}

fn sort_points(mut pts: Vec<Complex64>) -> Vec<Complex64> {
    pts.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    pts.dedup_by(|a, b| (*a - *b).norm() <= POINT_TOL);
    pts
}

/// Merge sibling pairs bottom-up so no cell of the result is contained in
/// another and no two siblings are both present.
pub fn canonical_cells(cells: impl IntoIterator<Item = CellId>) -> BTreeSet<CellId> {
    let mut set: BTreeSet<CellId> = cells.into_iter().collect();
    loop {
        let mut merged = false;
        let snapshot: Vec<CellId> = set.iter().copied().collect();
        for cell in snapshot {
            if !set.contains(&cell) {
                continue;
            }
            if let (Some(parent), Some(sibling)) = (cell.parent(), cell.sibling()) {
                if set.contains(&sibling) {
                    set.remove(&cell);
                    set.remove(&sibling);
                    set.insert(parent);
                    merged = true;
                }
            }
        }
        if !merged {
            break;
        }
    }
    // Drop cells covered by an ancestor in the set.
    let snapshot: Vec<CellId> = set.iter().copied().collect();
    for cell in snapshot {
        let mut anc = cell;
        while let Some(parent) = anc.parent() {
            if set.contains(&parent) {
                set.remove(&cell);
                break;
            }
            anc = parent;
        }
    }
    set
}

impl MeasureSpec {
    pub fn new(
        ambient: Ambient,
        frame: Frame,
        atoms: Vec<Atom>,
        nonatomic: NonatomicPart,
        accumulation_points: Vec<Complex64>,
    ) -> Result<MeasureSpec> {
        let mut spec = MeasureSpec { ambient, frame, atoms, nonatomic, accumulation_points };
        spec.nonatomic.densities.retain(|_, d| *d != 0.0);
        spec.validate()?;
        Ok(spec)
    }

    /// Purely nonatomic measure with constant density 1 on the whole
    /// normalized region, discretized at `level`.
    pub fn uniform(ambient: Ambient, level: u32) -> MeasureSpec {
        let densities = (1..=(1u64 << level)).map(|j| (j, 1.0)).collect();
        MeasureSpec {
            ambient,
            frame: Frame::unit(),
            atoms: Vec::new(),
            nonatomic: NonatomicPart { level, densities },
            accumulation_points: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        let limit = 1u64 << self.nonatomic.level;
        for (&j, &d) in &self.nonatomic.densities {
            if j == 0 || j > limit {
                return Err(Error::InvalidSpec(format!(
                    "nonatomic.cells: index {j} out of range 1..=2^{}",
                    self.nonatomic.level
                )));
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "nonatomic.cells: density {d} for cell {j} must be positive and finite"
                )));
            }
        }
        for (i, atom) in self.atoms.iter().enumerate() {
            if !(atom.mass > 0.0) || !atom.mass.is_finite() {
                return Err(Error::InvalidSpec(format!("atoms[{i}]: mass must be positive")));
            }
            if self.ambient == Ambient::Line && atom.point.im != 0.0 {
                return Err(Error::InvalidSpec(format!("atoms[{i}]: line atoms must have y = 0")));
            }
        }
        for (i, a) in self.atoms.iter().enumerate() {
            for b in &self.atoms[i + 1..] {
                if (a.point - b.point).norm() <= POINT_TOL {
                    return Err(Error::InvalidSpec(format!(
                        "atoms: duplicate point {}+{}i",
                        a.point.re, a.point.im
                    )));
                }
            }
        }
        if self.ambient == Ambient::Line {
            for p in &self.accumulation_points {
                if p.im != 0.0 {
                    return Err(Error::InvalidSpec(
                        "accumulation_points: line points must have y = 0".into(),
                    ));
                }
            }
        }
        // Syntactic plausibility of declared accumulation points: the atom
        // family must approach each one through the dyadic distance scales
        // it can represent.
        if !self.accumulation_points.is_empty() {
            if self.atoms.is_empty() {
                return Err(Error::InvalidSpec(
                    "accumulation_points declared but no atoms present".into(),
                ));
            }
            let scales = (self.atoms.len() as f64).log2().floor() as i32;
            for p in &self.accumulation_points {
                for s in 0..=scales {
                    let r = self.frame.size * 0.5f64.powi(s);
                    if !self.atoms.iter().any(|a| (a.point - p).norm() <= r) {
                        return Err(Error::InvalidSpec(format!(
                            "accumulation point {}+{}i has no atom within distance {r}",
                            p.re, p.im
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Real length/area of one level-`level` cell under this spec's frame.
    pub fn cell_measure(&self, level: u32) -> f64 {
        let unit = 0.5f64.powi(level as i32);
        match self.ambient {
            Ambient::Line => self.frame.size * unit,
            Ambient::Plane => self.frame.size * self.frame.size * unit,
        }
    }

    pub fn total_mass(&self) -> f64 {
        let atomic: f64 = self.atoms.iter().map(|a| a.mass).sum();
        let cell = self.cell_measure(self.nonatomic.level);
        let nonatomic: f64 = self.nonatomic.densities.values().map(|d| d * cell).sum();
        atomic + nonatomic
    }

    /// Cell containing an atom under the half-open convention, if the atom
    /// lies in the frame region at all.
    pub fn locate_atom(&self, point: Complex64, level: u32) -> Option<CellId> {
        dyadic::locate(self.frame.to_map().forward(point), level, self.ambient).ok()
    }

    /// Split into the purely nonatomic and purely atomic parts.
    pub fn split_parts(&self) -> (MeasureSpec, MeasureSpec) {
        let nonatomic = MeasureSpec {
            atoms: Vec::new(),
            accumulation_points: Vec::new(),
            ..self.clone()
        };
        let atomic = MeasureSpec { nonatomic: NonatomicPart::default(), ..self.clone() };
        (nonatomic, atomic)
    }

    /// Rewrite the density map on level-`level` cells. Masses are unchanged:
    /// densities are per-unit-measure, so children inherit them verbatim.
    pub fn refine(&self, level: u32) -> Result<MeasureSpec> {
        if level < self.nonatomic.level {
            return Err(Error::LevelBelowCurrent { requested: level, current: self.nonatomic.level });
        }
        let shift = level - self.nonatomic.level;
        let mut densities = BTreeMap::new();
        for (&j, &d) in &self.nonatomic.densities {
            for jj in ((j - 1) << shift) + 1..=j << shift {
                densities.insert(jj, d);
            }
        }
        Ok(MeasureSpec { nonatomic: NonatomicPart { level, densities }, ..self.clone() })
    }

    /// Mass of a cell: contained density mass plus atoms in the half-open cell.
    pub fn cell_mass(&self, cell: CellId) -> Result<f64> {
        if cell.level > self.nonatomic.level && !self.nonatomic.is_empty() {
            return Err(Error::InvalidSpec(format!(
                "cell level {} exceeds nonatomic level {}; refine first",
                cell.level, self.nonatomic.level
            )));
        }
        let unit = self.cell_measure(self.nonatomic.level);
        let mut mass = 0.0;
        for j in cell.descendants(self.nonatomic.level.max(cell.level)) {
            if let Some(d) = self.nonatomic.densities.get(&j) {
                mass += d * unit;
            }
        }
        for atom in &self.atoms {
            if self.locate_atom(atom.point, cell.level) == Some(cell) {
                mass += atom.mass;
            }
        }
        Ok(mass)
    }

    /// Positive-density cells in canonical form.
    pub fn density_cells(&self) -> BTreeSet<CellId> {
        canonical_cells(
            self.nonatomic
                .densities
                .keys()
                .map(|&j| CellId { level: self.nonatomic.level, index: j }),
        )
    }

    fn point_in_cells(&self, cells: &BTreeSet<CellId>, p: Complex64) -> bool {
        let q = self.frame.to_map().forward(p);
        cells
            .iter()
            .any(|&c| dyadic::geometry(c, self.ambient).contains_closed(q))
    }

    /// Support: positive-density cells, atom points outside their closures,
    /// and every declared accumulation point.
    pub fn support(&self) -> ClosedSetDesc {
        let cells = self.density_cells();
        let mut points: Vec<Complex64> = self
            .atoms
            .iter()
            .map(|a| a.point)
            .filter(|&p| !self.point_in_cells(&cells, p))
            .collect();
        points.extend(self.accumulation_points.iter().copied());
        ClosedSetDesc { cells, points: sort_points(points) }
    }

    /// Cluster points of the support: every point of a positive-density cell,
    /// plus declared accumulation points outside those cells. Isolated atoms
    /// contribute nothing.
    pub fn cluster_points(&self) -> ClosedSetDesc {
        let cells = self.density_cells();
        let points = self
            .accumulation_points
            .iter()
            .copied()
            .filter(|&p| !self.point_in_cells(&cells, p))
            .collect();
        ClosedSetDesc { cells, points: sort_points(points) }
    }

    /// Whether the support is an infinite set in the intended idealization.
    pub fn support_is_infinite(&self) -> bool {
        !self.nonatomic.is_empty() || !self.accumulation_points.is_empty()
    }

    fn require_same_frame(&self, other: &MeasureSpec) -> Result<()> {
        if self.ambient != other.ambient {
            return Err(Error::AmbientMismatch { expected: self.ambient, got: other.ambient });
        }
        if self.nonatomic.is_empty() || other.nonatomic.is_empty() {
            return Ok(());
        }
        if self.frame != other.frame {
            return Err(Error::FrameMismatch);
        }
        Ok(())
    }

    fn positive_at(&self, level: u32) -> Result<BTreeSet<u64>> {
        Ok(self.refine(level)?.nonatomic.densities.keys().copied().collect())
    }

    /// Piecewise-constant densities are mutually absolutely continuous iff
    /// they vanish on the same cells.
    pub fn equivalent_nonatomic(&self, other: &MeasureSpec) -> Result<bool> {
        self.require_same_frame(other)?;
        let level = self.nonatomic.level.max(other.nonatomic.level);
        Ok(self.positive_at(level)? == other.positive_at(level)?)
    }

    /// Mutually singular: disjoint positive cells at a common refinement and
    /// disjoint atom sets. An atom of one inside the other's density region
    /// does not break singularity (a point has nonatomic measure zero).
    pub fn mutually_singular(&self, other: &MeasureSpec) -> Result<bool> {
        self.require_same_frame(other)?;
        let level = self.nonatomic.level.max(other.nonatomic.level);
        let a = self.positive_at(level)?;
        let b = other.positive_at(level)?;
        if a.intersection(&b).next().is_some() {
            return Ok(false);
        }
        for x in &self.atoms {
            if other.atoms.iter().any(|y| (x.point - y.point).norm() <= POINT_TOL) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Map the support into the normalized region by a single similarity.
    ///
    /// With a nonatomic part present, the frame itself is the bounding region
    /// and every atom and accumulation point must lie inside it. A purely
    /// atomic spec is centered by its point bounding box.
    pub fn normalize(&self) -> Result<(MeasureSpec, AffineMap)> {
        if !(self.total_mass() > 0.0) {
            return Err(Error::EmptyMeasure);
        }
        let map = if !self.nonatomic.is_empty() {
            self.frame.to_map()
        } else {
            let pts: Vec<Complex64> = self
                .atoms
                .iter()
                .map(|a| a.point)
                .chain(self.accumulation_points.iter().copied())
                .collect();
            let (xmin, xmax) = min_max(pts.iter().map(|p| p.re));
            let (ymin, ymax) = min_max(pts.iter().map(|p| p.im));
            let spread = (xmax - xmin).max(ymax - ymin);
            let scale = if spread > 0.0 { spread } else { 1.0 };
            match self.ambient {
                Ambient::Line => {
                    // [xmin, xmin+scale] -> [0,1]; a single atom goes to 1/2.
                    let offset = if spread > 0.0 { xmin } else { xmin - 0.5 * scale };
                    AffineMap { offset: Complex64::new(offset, 0.0), scale }
                }
                Ambient::Plane => AffineMap {
                    offset: Complex64::new(0.5 * (xmin + xmax), 0.5 * (ymin + ymax)),
                    scale,
                },
            }
        };
        let region_ok = |p: Complex64| {
            let q = map.forward(p);
            match self.ambient {
                Ambient::Line => q.re >= 0.0 && q.re <= 1.0,
                Ambient::Plane => q.re.abs() <= 0.5 && q.im.abs() <= 0.5,
            }
        };
        for a in &self.atoms {
            if !region_ok(a.point) {
                return Err(Error::InvalidSpec(format!(
                    "atom at {}+{}i lies outside the frame; enlarge the frame",
                    a.point.re, a.point.im
                )));
            }
        }
        for p in &self.accumulation_points {
            if !region_ok(*p) {
                return Err(Error::InvalidSpec(
                    "accumulation point lies outside the frame; enlarge the frame".into(),
                ));
            }
        }
        // Densities are per real unit; rescaling the coordinates by 1/scale
        // multiplies them so that cell masses are preserved.
        let density_factor = match self.ambient {
            Ambient::Line => map.scale / 1.0,
            Ambient::Plane => map.scale * map.scale,
        };
        let normalized = MeasureSpec {
            ambient: self.ambient,
            frame: Frame::unit(),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom { point: map.forward(a.point), mass: a.mass })
                .collect(),
            nonatomic: NonatomicPart {
                level: self.nonatomic.level,
                densities: self
                    .nonatomic
                    .densities
                    .iter()
                    .map(|(&j, &d)| (j, d * density_factor))
                    .collect(),
            },
            accumulation_points: self.accumulation_points.iter().map(|&p| map.forward(p)).collect(),
        };
        Ok((normalized, map))
    }

    /// Normalize a pair by the same transform. Requires matching frames when
    /// both have nonatomic mass.
    pub fn normalize_pair(
        m1: &MeasureSpec,
        m2: &MeasureSpec,
    ) -> Result<(MeasureSpec, MeasureSpec, AffineMap)> {
        m1.require_same_frame(m2)?;
        let (n1, map) = m1.normalize()?;
        let (n2, map2) = m2.normalize()?;
        if map != map2 {
            return Err(Error::FrameMismatch);
        }
        Ok((n1, n2, map))
    }
}

fn min_max(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

// --- JSON interchange -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct PointDoc {
    x: f64,
    y: f64,
}

#[derive(Serialize, Deserialize)]
struct AtomDoc {
    x: f64,
    y: f64,
    mass: f64,
}

#[derive(Serialize, Deserialize)]
struct CellDoc {
    j: u64,
    density: f64,
}

#[derive(Serialize, Deserialize)]
struct NonatomicDoc {
    level: u32,
    cells: Vec<CellDoc>,
}

#[derive(Serialize, Deserialize)]
struct FrameDoc {
    x: f64,
    y: f64,
    size: f64,
}

#[derive(Serialize, Deserialize)]
struct MeasureDoc {
    ambient: Ambient,
    #[serde(skip_serializing_if = "Option::is_none")]
    frame: Option<FrameDoc>,
    atoms: Vec<AtomDoc>,
    nonatomic: NonatomicDoc,
    accumulation_points: Vec<PointDoc>,
}

impl MeasureSpec {
    pub fn from_json_str(text: &str) -> Result<MeasureSpec> {
        let doc: MeasureDoc = serde_json::from_str(text)?;
        let frame = match doc.frame {
            Some(f) if f.size > 0.0 => Frame { anchor: Complex64::new(f.x, f.y), size: f.size },
            Some(f) => {
                return Err(Error::InvalidSpec(format!("frame.size must be positive, got {}", f.size)))
            }
            None => Frame::unit(),
        };
        MeasureSpec::new(
            doc.ambient,
            frame,
            doc.atoms
                .into_iter()
                .map(|a| Atom { point: Complex64::new(a.x, a.y), mass: a.mass })
                .collect(),
            NonatomicPart {
                level: doc.nonatomic.level,
                densities: doc.nonatomic.cells.into_iter().map(|c| (c.j, c.density)).collect(),
            },
            doc.accumulation_points
                .into_iter()
                .map(|p| Complex64::new(p.x, p.y))
                .collect(),
        )
    }

    pub fn to_json_string(&self) -> String {
        let doc = MeasureDoc {
            ambient: self.ambient,
            frame: if self.frame.is_unit() {
                None
            } else {
                Some(FrameDoc { x: self.frame.anchor.re, y: self.frame.anchor.im, size: self.frame.size })
            },
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomDoc { x: a.point.re, y: a.point.im, mass: a.mass })
                .collect(),
            nonatomic: NonatomicDoc {
                level: self.nonatomic.level,
                cells: self
                    .nonatomic
                    .densities
                    .iter()
                    .map(|(&j, &d)| CellDoc { j, density: d })
                    .collect(),
            },
            accumulation_points: self
                .accumulation_points
                .iter()
                .map(|p| PointDoc { x: p.re, y: p.im })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("measure doc serializes")
    }
}
