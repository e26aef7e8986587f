//! Rectangular observation window and its regular tessellation into cells.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`; bounds may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct Rect<R: Real = f64> {
    pub x0: R,
    pub x1: R,
    pub y0: R,
    pub y1: R,
}

impl<R: Real> Rect<R> {
    pub fn new(x0: R, x1: R, y0: R, y1: R) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::InvalidParameter(format!(
                "degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        Ok(Rect { x0, x1, y0, y1 })
    }

    pub fn plane() -> Self {
        Rect {
            x0: R::neg_infinity(),
            x1: R::infinity(),
            y0: R::neg_infinity(),
            y1: R::infinity(),
        }
    }

    #[inline]
    pub fn contains(&self, x: R, y: R) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn width(&self) -> R {
        self.x1 - self.x0
    }

    pub fn height(&self) -> R {
        self.y1 - self.y0
    }

    pub fn area(&self) -> R {
        self.width() * self.height()
    }

    pub fn center(&self) -> [R; 2] {
        let half = R::lit(0.5);
        [(self.x0 + self.x1) * half, (self.y0 + self.y1) * half]
    }

    /// Intersection, `None` when the rectangles share no area.
    pub fn intersect(&self, other: &Rect<R>) -> Option<Rect<R>> {
        let r = Rect {
            x0: self.x0.max(other.x0),
            x1: self.x1.min(other.x1),
            y0: self.y0.max(other.y0),
            y1: self.y1.min(other.y1),
        };
        (r.x0 < r.x1 && r.y0 < r.y1).then_some(r)
    }

    /// The four quadrants, ordered SW, SE, NW, NE.
    pub fn quadrants(&self) -> [Rect<R>; 4] {
        let [cx, cy] = self.center();
        [
            Rect { x0: self.x0, x1: cx, y0: self.y0, y1: cy },
            Rect { x0: cx, x1: self.x1, y0: self.y0, y1: cy },
            Rect { x0: self.x0, x1: cx, y0: cy, y1: self.y1 },
            Rect { x0: cx, x1: self.x1, y0: cy, y1: self.y1 },
        ]
    }
}

/// Discrete base measure on a regular `nx × ny` tessellation of the window.
///
/// Cells are numbered row-major from the south-west corner: cell
/// `j = iy * nx + ix` has its atom at the centre of column `ix`, row `iy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct Grid<R: Real = f64> {
    window: Rect<R>,
    nx: usize,
    ny: usize,
    atoms: Vec<[R; 2]>,
    masses: Vec<R>,
    cell_area: R,
}

impl<R: Real> Grid<R> {
    pub fn new(window: Rect<R>, nx: usize, ny: usize, masses: Vec<R>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter("grid needs nx, ny >= 1".into()));
        }
        if !(window.x0.is_finite() && window.x1.is_finite() && window.y0.is_finite() && window.y1.is_finite()) {
            return Err(Error::InvalidParameter("grid window must be bounded".into()));
        }
        let n = nx * ny;
        let dx = window.width() / R::from_count(nx);
        let dy = window.height() / R::from_count(ny);
        let half = R::lit(0.5);
        let mut atoms = Vec::with_capacity(n);
        for iy in 0..ny {
            for ix in 0..nx {
                atoms.push([
                    window.x0 + (R::from_count(ix) + half) * dx,
                    window.y0 + (R::from_count(iy) + half) * dy,
                ]);
            }
        }
        let grid = Grid {
            window,
            nx,
            ny,
            atoms,
            masses: Vec::new(),
            cell_area: dx * dy,
        };
        grid.with_masses(masses)
    }

    /// Every cell carries the same base-measure mass `alpha`.
    pub fn uniform(window: Rect<R>, nx: usize, ny: usize, alpha: R) -> Result<Self> {
        Self::new(window, nx, ny, vec![alpha; nx * ny])
    }

    /// Base measure proportional to Lebesgue measure: `α_j = density × cell area`.
    pub fn lebesgue(window: Rect<R>, nx: usize, ny: usize, density: R) -> Result<Self> {
        let area = window.area() / R::from_count(nx * ny);
        Self::uniform(window, nx, ny, density * area)
    }

    /// Same tessellation, new masses.
    pub fn with_masses(mut self, masses: Vec<R>) -> Result<Self> {
        if masses.len() != self.atoms.len() {
            return Err(Error::InvalidParameter(format!(
                "grid has {} cells but {} masses were given",
                self.atoms.len(),
                masses.len()
            )));
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= R::zero())) {
            return Err(Error::InvalidParameter("masses must be finite and >= 0".into()));
        }
        if !masses.iter().any(|m| *m > R::zero()) {
            return Err(Error::InvalidParameter("at least one mass must be positive".into()));
        }
        self.masses = masses;
        Ok(self)
    }

    /// Like [`Grid::with_masses`] but allows the all-zero base measure.
    pub fn with_masses_allow_zero(mut self, masses: Vec<R>) -> Result<Self> {
        if masses.len() != self.atoms.len() || masses.iter().any(|m| !(m.is_finite() && *m >= R::zero())) {
            return Err(Error::InvalidParameter("masses must match cells and be finite, >= 0".into()));
        }
        self.masses = masses;
        Ok(self)
    }

    pub fn window(&self) -> &Rect<R> {
        &self.window
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    #[inline]
    pub fn atoms(&self) -> &[[R; 2]] {
        &self.atoms
    }

    #[inline]
    pub fn masses(&self) -> &[R] {
        &self.masses
    }

    pub fn cell_area(&self) -> R {
        self.cell_area
    }

    /// Cell rectangle of cell `j`.
    pub fn cell(&self, j: usize) -> Rect<R> {
        let dx = self.window.width() / R::from_count(self.nx);
        let dy = self.window.height() / R::from_count(self.ny);
        let (ix, iy) = (j % self.nx, j / self.nx);
        Rect {
            x0: self.window.x0 + R::from_count(ix) * dx,
            x1: self.window.x0 + R::from_count(ix + 1) * dx,
            y0: self.window.y0 + R::from_count(iy) * dy,
            y1: self.window.y0 + R::from_count(iy + 1) * dy,
        }
    }

    /// Cell containing `(x, y)`, clamping points on the outer boundary inward.
    pub fn locate(&self, x: R, y: R) -> Option<usize> {
        if !self.window.contains(x, y) {
            return None;
        }
        let fx = (x - self.window.x0) / self.window.width() * R::from_count(self.nx);
        let fy = (y - self.window.y0) / self.window.height() * R::from_count(self.ny);
        let ix = fx.floor().to_usize().unwrap_or(0).min(self.nx - 1);
        let iy = fy.floor().to_usize().unwrap_or(0).min(self.ny - 1);
        Some(iy * self.nx + ix)
    }
}
