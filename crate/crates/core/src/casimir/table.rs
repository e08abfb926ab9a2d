//! Tabulated sphere–plate force curves with analytic derivative columns.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lifshitz::LifshitzSolver;
use super::{check_pfa, ideal_pfa_force};
use crate::error::{Error, Result};
use crate::physics::material::MaterialModel;

/// Logarithmic separation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for TableGrid {
    fn default() -> Self {
        Self {
            min: 50e-9,
            max: 1e-6,
            points: 200,
        }
    }
}

impl TableGrid {
    pub fn nodes(&self) -> Result<Vec<f64>> {
        if !(self.min > 0.0 && self.max > self.min && self.points >= 4) {
            return Err(Error::config(format!(
                "table grid needs 0 < min < max and at least 4 points, got {self:?}"
            )));
        }
        let ratio = (self.max / self.min).ln() / (self.points - 1) as f64;
        let mut v: Vec<f64> = (0..self.points)
            .map(|i| self.min * (ratio * i as f64).exp())
            .collect();
        v[self.points - 1] = self.max;
        Ok(v)
    }
}

/// One table row: force (N, attractive positive) and its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSample {
    #[serde(rename = "separation_m")]
    pub separation: f64,
    #[serde(rename = "force_N")]
    pub force: f64,
    #[serde(rename = "gradient_N_per_m")]
    pub gradient: f64,
    #[serde(rename = "curvature_N_per_m2")]
    pub curvature: f64,
    #[serde(rename = "temperature_K")]
    pub temperature: f64,
}

/// Sphere–plate force F(x) on a separation grid with a C² piecewise-quintic
/// interpolant that reproduces the stored force, gradient and curvature at every node.
#[derive(Debug, Clone)]
pub struct CasimirTable {
    separations: Vec<f64>,
    force: Vec<f64>,
    gradient: Vec<f64>,
    curvature: Vec<f64>,
    temperature: f64,
    material: Option<MaterialModel>,
    radius: Option<f64>,
    // power-basis coefficients in t = (x − x_i)/h_i per interval
    segments: Vec<[f64; 6]>,
}

impl CasimirTable {
    /// Evaluates the Lifshitz force and its analytic derivatives at every grid node.
    pub fn build(material: &MaterialModel, temperature: f64, radius: f64, grid: TableGrid) -> Result<Self> {
        Self::build_with(&LifshitzSolver::default(), material, temperature, radius, grid)
    }

    pub fn build_with(
        solver: &LifshitzSolver,
        material: &MaterialModel,
        temperature: f64,
        radius: f64,
        grid: TableGrid,
    ) -> Result<Self> {
        material.validate()?;
        let nodes = grid.nodes()?;
        check_pfa(radius, nodes[nodes.len() - 1])?;
        let scale = -2.0 * std::f64::consts::PI * radius;
        let rows: Vec<[f64; 3]> = nodes
            .par_iter()
            .map(|&x| {
                solver.derivatives(material, x, temperature).map(|o| {
                    let d = o.derivatives;
                    [scale * d.energy, scale * d.first, scale * d.second]
                })
            })
            .collect::<Result<_>>()?;
        let mut t = Self::from_columns(
            nodes,
            rows.iter().map(|r| r[0]).collect(),
            rows.iter().map(|r| r[1]).collect(),
            rows.iter().map(|r| r[2]).collect(),
            temperature,
        )?;
        t.material = Some(material.clone());
        t.radius = Some(radius);
        Ok(t)
    }

    /// Closed-form ideal-conductor table at T = 0.
    pub fn ideal(radius: f64, grid: TableGrid) -> Result<Self> {
        let nodes = grid.nodes()?;
        check_pfa(radius, nodes[nodes.len() - 1])?;
        let force: Vec<f64> = nodes.iter().map(|&x| ideal_pfa_force(radius, x)).collect();
        let gradient = nodes.iter().zip(&force).map(|(x, f)| -3.0 * f / x).collect();
        let curvature = nodes.iter().zip(&force).map(|(x, f)| 12.0 * f / (x * x)).collect();
        let mut t = Self::from_columns(nodes, force, gradient, curvature, 0.0)?;
        t.material = Some(MaterialModel::IdealConductor);
        t.radius = Some(radius);
        Ok(t)
    }

    pub fn from_columns(
        separations: Vec<f64>,
        force: Vec<f64>,
        gradient: Vec<f64>,
        curvature: Vec<f64>,
        temperature: f64,
    ) -> Result<Self> {
        let n = separations.len();
        if n < 4 {
            return Err(Error::config(format!("a force table needs at least 4 rows, got {n}")));
        }
        if force.len() != n || gradient.len() != n || curvature.len() != n {
            return Err(Error::Length("force table columns differ in length".into()));
        }
        if separations.windows(2).any(|w| !(w[1] > w[0])) || !(separations[0] > 0.0) {
            return Err(Error::domain("table separations must be positive and strictly increasing"));
        }
        if [&separations, &force, &gradient, &curvature]
            .iter()
            .any(|c| c.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::domain("force table contains non-finite values"));
        }
        let segments = (0..n - 1)
            .map(|i| {
                let h = separations[i + 1] - separations[i];
                quintic(
                    [force[i], h * gradient[i], h * h * curvature[i]],
                    [force[i + 1], h * gradient[i + 1], h * h * curvature[i + 1]],
                )
            })
            .collect();
        Ok(Self {
            separations,
            force,
            gradient,
            curvature,
            temperature,
            material: None,
            radius: None,
            segments,
        })
    }

    /// The same table for a different sphere radius; PFA forces scale linearly in R.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        let current = self
            .radius
            .ok_or_else(|| Error::precondition("table has no recorded sphere radius"))?;
        check_pfa(radius, self.max_separation())?;
        let s = radius / current;
        let scale = |v: &[f64]| v.iter().map(|x| x * s).collect::<Vec<_>>();
        let mut t = Self::from_columns(
            self.separations.clone(),
            scale(&self.force),
            scale(&self.gradient),
            scale(&self.curvature),
            self.temperature,
        )?;
        t.material = self.material.clone();
        t.radius = Some(radius);
        Ok(t)
    }

    pub fn separations(&self) -> &[f64] {
        &self.separations
    }

    pub fn forces(&self) -> &[f64] {
        &self.force
    }

    pub fn gradients(&self) -> &[f64] {
        &self.gradient
    }

    pub fn curvatures(&self) -> &[f64] {
        &self.curvature
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn material(&self) -> Option<&MaterialModel> {
        self.material.as_ref()
    }

    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.separations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.separations.is_empty()
    }

    pub fn min_separation(&self) -> f64 {
        self.separations[0]
    }

    pub fn max_separation(&self) -> f64 {
        self.separations[self.len() - 1]
    }

    pub fn rows(&self) -> impl Iterator<Item = ForceSample> + '_ {
        (0..self.len()).map(move |i| ForceSample {
            separation: self.separations[i],
            force: self.force[i],
            gradient: self.gradient[i],
            curvature: self.curvature[i],
            temperature: self.temperature,
        })
    }

    fn out_of_range(&self, x: f64, min: f64, max: f64) -> Error {
        Error::OutOfRange {
            quantity: "separation (m)".into(),
            value: x,
            min,
            max,
        }
    }

    /// Interpolated force (N).
    pub fn force(&self, x: f64) -> Result<f64> {
        self.sample(x).map(|s| s.force)
    }

    /// Interpolated force, gradient and curvature anywhere on the closed grid range.
    pub fn sample(&self, x: f64) -> Result<ForceSample> {
        let (lo, hi) = (self.min_separation(), self.max_separation());
        if !(x >= lo && x <= hi) {
            return Err(self.out_of_range(x, lo, hi));
        }
        Ok(self.eval(x))
    }

    /// Gradient and curvature of the interpolant; refuses points within one grid
    /// step of either edge.
    pub fn derivatives(&self, x: f64) -> Result<(f64, f64)> {
        let n = self.len();
        let (lo, hi) = (self.separations[1], self.separations[n - 2]);
        if !(x >= lo && x <= hi) {
            return Err(self.out_of_range(x, lo, hi));
        }
        let s = self.eval(x);
        Ok((s.gradient, s.curvature))
    }

    /// Interpolant at `x`, which must lie inside the grid.
    #[inline]
    pub(crate) fn eval(&self, x: f64) -> ForceSample {
        let n = self.len();
        let i = self.separations.partition_point(|&s| s <= x).clamp(1, n - 1) - 1;
        let x0 = self.separations[i];
        let h = self.separations[i + 1] - x0;
        let t = (x - x0) / h;
        let a = &self.segments[i];
        let p = a[0] + t * (a[1] + t * (a[2] + t * (a[3] + t * (a[4] + t * a[5]))));
        let dp = a[1] + t * (2.0 * a[2] + t * (3.0 * a[3] + t * (4.0 * a[4] + t * 5.0 * a[5])));
        let ddp = 2.0 * a[2] + t * (6.0 * a[3] + t * (12.0 * a[4] + t * 20.0 * a[5]));
        ForceSample {
            separation: x,
            force: p,
            gradient: dp / h,
            curvature: ddp / (h * h),
            temperature: self.temperature,
        }
    }

    /// Interpolated force with a cached interval index; returns `None` outside the grid.
    #[inline]
    pub(crate) fn force_hinted(&self, x: f64, hint: &mut usize) -> Option<f64> {
        let s = &self.separations;
        let mut i = *hint;
        if !(i + 1 < s.len() && s[i] <= x && x <= s[i + 1]) {
            if !(x >= s[0] && x <= s[s.len() - 1]) {
                return None;
            }
            i = s.partition_point(|&v| v <= x).clamp(1, s.len() - 1) - 1;
            *hint = i;
        }
        let t = (x - s[i]) / (s[i + 1] - s[i]);
        let a = &self.segments[i];
        Some(a[0] + t * (a[1] + t * (a[2] + t * (a[3] + t * (a[4] + t * a[5])))))
    }

    /// Largest relative deviation of the stored gradient (and curvature) from
    /// three-point finite differences of the force (and gradient) on interior nodes.
    pub fn finite_difference_deviation(&self) -> (f64, f64) {
        let s = &self.separations;
        let fd = |col: &[f64], i: usize| {
            let (h0, h1) = (s[i] - s[i - 1], s[i + 1] - s[i]);
            (col[i + 1] * h0 * h0 - col[i - 1] * h1 * h1 + col[i] * (h1 * h1 - h0 * h0))
                / (h0 * h1 * (h0 + h1))
        };
        let mut worst = (0.0f64, 0.0f64);
        for i in 1..self.len() - 1 {
            let g = fd(&self.force, i);
            let c = fd(&self.gradient, i);
            worst.0 = worst.0.max(((g - self.gradient[i]) / self.gradient[i]).abs());
            worst.1 = worst.1.max(((c - self.curvature[i]) / self.curvature[i]).abs());
        }
        worst
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let rows: Vec<ForceSample> = r.deserialize().collect::<std::result::Result<_, _>>()?;
        let temperature = rows.first().map(|r| r.temperature).unwrap_or(0.0);
        if rows.iter().any(|r| r.temperature != temperature) {
            return Err(Error::InconsistentData("table rows carry different temperatures".into()));
        }
        Self::from_columns(
            rows.iter().map(|r| r.separation).collect(),
            rows.iter().map(|r| r.force).collect(),
            rows.iter().map(|r| r.gradient).collect(),
            rows.iter().map(|r| r.curvature).collect(),
            temperature,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Quintic on t ∈ [0,1] matching (value, slope, second derivative) at both ends,
/// with slopes and second derivatives already scaled by h and h².
fn quintic(left: [f64; 3], right: [f64; 3]) -> [f64; 6] {
    let [f0, d0, s0] = left;
    let [f1, d1, s1] = right;
    let df = f1 - f0;
    [
        f0,
        d0,
        0.5 * s0,
        10.0 * df - 6.0 * d0 - 4.0 * d1 - 0.5 * (3.0 * s0 - s1),
        -15.0 * df + 8.0 * d0 + 7.0 * d1 + 0.5 * (3.0 * s0 - 2.0 * s1),
        6.0 * df - 3.0 * d0 - 3.0 * d1 - 0.5 * (s0 - s1),
    ]
}
