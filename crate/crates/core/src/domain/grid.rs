use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of land-use categories carried by every cell.
pub const LANDUSE_CATEGORIES: usize = 6;

const SUM_TOLERANCE: f64 = 1e-9;

/// Land-use categories in canonical vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandUse {
    Vegetation,
    Industrial,
    Institutional,
    Medical,
    Residential,
    Commercial,
}

impl LandUse {
    pub const ALL: [LandUse; LANDUSE_CATEGORIES] = [
        LandUse::Vegetation,
        LandUse::Industrial,
        LandUse::Institutional,
        LandUse::Medical,
        LandUse::Residential,
        LandUse::Commercial,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            LandUse::Vegetation => "vegetation",
            LandUse::Industrial => "industrial",
            LandUse::Institutional => "institutional",
            LandUse::Medical => "medical",
            LandUse::Residential => "residential",
            LandUse::Commercial => "commercial",
        }
    }
}

/// A 0-based grid coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Coord {
    pub x: u32,
    pub y: u32,
}

impl Coord {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

impl std::fmt::Display for Coord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Manhattan distance between two cells.
pub fn manhattan(a: Coord, b: Coord) -> u32 {
    a.x.abs_diff(b.x) + a.y.abs_diff(b.y)
}

/// Checks that a 6-vector is a probability distribution.
pub(crate) fn check_distribution(v: &[f64; LANDUSE_CATEGORIES], what: &str) -> Result<()> {
    if v.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Invalid(format!("{what} has a negative or non-finite component")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::Invalid(format!("{what} sums to {sum}, expected 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAttributes {
    pub landuse: [f64; LANDUSE_CATEGORIES],
    pub crime_count: u32,
}

impl CellAttributes {
    pub fn uniform() -> Self {
        Self {
            landuse: [1.0 / LANDUSE_CATEGORIES as f64; LANDUSE_CATEGORIES],
            crime_count: 0,
        }
    }

    /// Argmax land-use category; ties resolve to the earlier category.
    pub fn dominant(&self) -> LandUse {
        let mut best = 0;
        for k in 1..LANDUSE_CATEGORIES {
            if self.landuse[k] > self.landuse[best] {
                best = k;
            }
        }
        LandUse::ALL[best]
    }
}

/// Discretized sensing region. Cells are stored row-major (`y * width + x`).
///
/// The dominant category per cell and the crime range are cached at
/// construction; the grid is immutable afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridMapRepr", into = "GridMapRepr")]
pub struct GridMap {
    width: u32,
    height: u32,
    cells: Vec<CellAttributes>,
    dominant: Vec<LandUse>,
    crime_min: u32,
    crime_max: u32,
}

#[derive(Serialize, Deserialize)]
struct GridMapRepr {
    width: u32,
    height: u32,
    cells: Vec<CellAttributes>,
}

impl TryFrom<GridMapRepr> for GridMap {
    type Error = Error;

    fn try_from(repr: GridMapRepr) -> Result<Self> {
        GridMap::new(repr.width, repr.height, repr.cells)
    }
}

impl From<GridMap> for GridMapRepr {
    fn from(grid: GridMap) -> Self {
        GridMapRepr {
            width: grid.width,
            height: grid.height,
            cells: grid.cells,
        }
    }
}

impl GridMap {
    pub fn new(width: u32, height: u32, cells: Vec<CellAttributes>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Invalid("grid dimensions must be positive".into()));
        }
        let expected = width as usize * height as usize;
        if cells.len() != expected {
            return Err(Error::Invalid(format!(
                "grid {width}x{height} needs {expected} cells, got {}",
                cells.len()
            )));
        }
        for (i, cell) in cells.iter().enumerate() {
            check_distribution(&cell.landuse, &format!("land-use of cell {i}"))?;
        }
        let dominant = cells.iter().map(CellAttributes::dominant).collect();
        let crime_min = cells.iter().map(|c| c.crime_count).min().unwrap_or(0);
        let crime_max = cells.iter().map(|c| c.crime_count).max().unwrap_or(0);
        Ok(Self {
            width,
            height,
            cells,
            dominant,
            crime_min,
            crime_max,
        })
    }

    /// Grid with uniform land use and no crime.
    pub fn uniform(width: u32, height: u32) -> Result<Self> {
        let n = width as usize * height as usize;
        Self::new(width, height, vec![CellAttributes::uniform(); n])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[CellAttributes] {
        &self.cells
    }

    pub fn contains(&self, c: Coord) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn index(&self, c: Coord) -> usize {
        debug_assert!(self.contains(c));
        c.y as usize * self.width as usize + c.x as usize
    }

    pub fn coord(&self, index: usize) -> Coord {
        let w = self.width as usize;
        Coord::new((index % w) as u32, (index / w) as u32)
    }

    pub fn coords(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.cells.len()).map(|i| self.coord(i))
    }

    pub fn cell(&self, c: Coord) -> &CellAttributes {
        &self.cells[self.index(c)]
    }

    /// κ(g): argmax land-use category of a cell.
    pub fn category(&self, c: Coord) -> LandUse {
        self.dominant[self.index(c)]
    }

    pub fn has_crime_data(&self) -> bool {
        self.crime_max > 0
    }

    /// Crime count min-max normalized over the whole grid; 0 when constant.
    pub fn normalized_crime(&self, c: Coord) -> f64 {
        if self.crime_max == self.crime_min {
            return 0.0;
        }
        let v = self.cell(c).crime_count;
        f64::from(v - self.crime_min) / f64::from(self.crime_max - self.crime_min)
    }

    pub fn check_contains(&self, c: Coord) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::OutOfBounds { x: c.x, y: c.y })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manhattan_examples() {
        assert_eq!(manhattan(Coord::new(0, 0), Coord::new(0, 0)), 0);
        assert_eq!(manhattan(Coord::new(0, 0), Coord::new(2, 1)), 3);
        assert_eq!(manhattan(Coord::new(5, 2), Coord::new(2, 5)), 6);
        assert_eq!(manhattan(Coord::new(2, 5), Coord::new(5, 2)), 6);
    }

    #[test]
    fn rejects_bad_landuse() {
        let mut cell = CellAttributes::uniform();
        cell.landuse[0] += 0.1;
        assert!(GridMap::new(1, 1, vec![cell]).is_err());
        assert!(GridMap::new(2, 1, vec![CellAttributes::uniform()]).is_err());
        assert!(GridMap::new(0, 1, vec![]).is_err());
    }

    #[test]
    fn dominant_ties_break_to_earlier_category() {
        let cell = CellAttributes {
            landuse: [0.0, 0.4, 0.0, 0.4, 0.2, 0.0],
            crime_count: 0,
        };
        assert_eq!(cell.dominant(), LandUse::Industrial);
        assert_eq!(CellAttributes::uniform().dominant(), LandUse::Vegetation);
    }

    #[test]
    fn normalized_crime_constant_field_is_zero() {
        let grid = GridMap::uniform(2, 2).unwrap();
        assert_eq!(grid.normalized_crime(Coord::new(1, 1)), 0.0);
    }

    #[test]
    fn serde_round_trip_rebuilds_caches() {
        let mut cells = vec![CellAttributes::uniform(); 4];
        cells[3].crime_count = 20;
        cells[3].landuse = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let grid = GridMap::new(2, 2, cells).unwrap();
        let text = serde_json::to_string(&grid).unwrap();
        let back: GridMap = serde_json::from_str(&text).unwrap();
        assert_eq!(back, grid);
        assert_eq!(back.category(Coord::new(1, 1)), LandUse::Residential);
        assert_eq!(back.normalized_crime(Coord::new(1, 1)), 1.0);
    }
}
