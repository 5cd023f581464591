//! Visualization payloads: the generator manifold, the discriminator heatmap,
//! and sample density grids.
//!
//! Grid conventions: density and heatmap cells are indexed `iy * res + ix`,
//! with `ix` along the first coordinate. Manifold corner `(i, j)` is the image
//! of noise `(i / R, j / R)` and is stored at `i * (R + 1) + j`.

use serde::{Deserialize, Serialize};

use crate::batch::{Batch, Point};
use crate::error::{Error, Result};
use crate::gan::{NoiseDist, NoiseSpec, GAUSSIAN_NOISE_MEAN, GAUSSIAN_NOISE_STDEV};
use crate::nn::Mlp;
use crate::par::Execution;

pub const DEFAULT_MANIFOLD_RESOLUTION: usize = 20;
pub const DEFAULT_HEATMAP_RESOLUTION: usize = 40;
pub const DEFAULT_DENSITY_RESOLUTION: usize = 20;
/// Cells whose transformed area (or length, for 1D noise) falls below this are flagged.
pub const DEGENERATE_MEASURE: f64 = 1e-9;

/// Absolute shoelace area of a closed polygon. Self-intersecting outlines
/// keep the raw value, so lobes of opposite orientation cancel.
pub fn polygon_area(corners: &[Point]) -> f64 {
    let n = corners.len();
    let twice: f64 = (0..n)
        .map(|k| {
            let [x0, y0] = corners[k];
            let [x1, y1] = corners[(k + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum();
    0.5 * twice.abs()
}

pub fn quad_area(corners: &[Point; 4]) -> f64 {
    polygon_area(corners)
}

/// Noise mass of the `k`-th of `r` equal bins on one axis.
pub fn axis_cell_mass(dist: NoiseDist, k: usize, r: usize) -> f64 {
    match dist {
        NoiseDist::Uniform => 1.0 / r as f64,
        NoiseDist::Gaussian => {
            // Clamped normal: the tails below 0 and above 1 sit on the edge bins.
            let lower = if k == 0 { 0.0 } else { normal_cdf(k as f64 / r as f64) };
            let upper = if k + 1 == r {
                1.0
            } else {
                normal_cdf((k + 1) as f64 / r as f64)
            };
            upper - lower
        }
    }
}

fn normal_cdf(x: f64) -> f64 {
    let z = (x - GAUSSIAN_NOISE_MEAN) / (GAUSSIAN_NOISE_STDEV * std::f64::consts::SQRT_2);
    0.5 * (1.0 + libm::erf(z))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldGrid {
    pub noise_dim: usize,
    pub resolution: usize,
    /// Transformed grid corners; `(R+1)^2` for 2D noise, `R+1` for 1D noise.
    pub corners: Vec<Point>,
    /// Noise-space probability mass of each cell.
    pub cell_mass: Vec<f64>,
    /// Transformed quadrangle area (2D) or segment length (1D) of each cell.
    pub cell_measure: Vec<f64>,
    pub cell_density: Vec<f64>,
    pub cell_flags: Vec<bool>,
}

impl ManifoldGrid {
    pub fn cell_count(&self) -> usize {
        self.cell_mass.len()
    }

    pub fn corner(&self, i: usize, j: usize) -> Point {
        debug_assert_eq!(self.noise_dim, 2);
        self.corners[i * (self.resolution + 1) + j]
    }

    /// Corners of cell `(i, j)` in cyclic order.
    pub fn cell_corners(&self, i: usize, j: usize) -> [Point; 4] {
        [
            self.corner(i, j),
            self.corner(i + 1, j),
            self.corner(i + 1, j + 1),
            self.corner(i, j + 1),
        ]
    }
}

/// Pushes a regular noise grid through `map` and area-corrects each cell's density.
///
/// `map` receives a batch of noise vectors (`noise.dim` columns) and must
/// return one 2D point per row.
pub fn compute_manifold<F>(map: F, noise: NoiseSpec, resolution: usize, exec: Execution) -> Result<ManifoldGrid>
where
    F: Fn(&Batch) -> Result<Batch> + Sync + Send,
{
    noise.validate()?;
    if resolution < 2 {
        return Err(Error::config(format!("manifold resolution must be at least 2, got {resolution}")));
    }
    let r = resolution;
    let coord = |k: usize| k as f64 / r as f64;
    let eval = |batch: Batch| -> Result<Vec<Point>> {
        let n = batch.rows();
        let out = map(&batch)?;
        if out.rows() != n || out.cols() != 2 {
            return Err(Error::Shape {
                context: "manifold map output",
                expected: n * 2,
                actual: out.rows() * out.cols(),
            });
        }
        if !out.is_finite() {
            return Err(Error::numerical("manifold map returned a non-finite point"));
        }
        Ok(out.to_points())
    };

    let grid = match noise.dim {
        1 => {
            let inputs: Vec<f64> = (0..=r).map(coord).collect();
            let corners = eval(Batch::new(r + 1, 1, inputs)?)?;
            let mut grid = empty_grid(1, r, corners);
            for i in 0..r {
                let [a, b] = [grid.corners[i], grid.corners[i + 1]];
                let length = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                grid.push_cell(axis_cell_mass(noise.dist, i, r), length);
            }
            grid
        }
        _ => {
            let rows = exec.try_map(r + 1, |i| {
                let z1 = coord(i);
                let mut data = Vec::with_capacity(2 * (r + 1));
                for j in 0..=r {
                    data.extend_from_slice(&[z1, coord(j)]);
                }
                eval(Batch::new(r + 1, 2, data)?)
            })?;
            let mut grid = empty_grid(2, r, rows.into_iter().flatten().collect());
            let axis: Vec<f64> = (0..r).map(|k| axis_cell_mass(noise.dist, k, r)).collect();
            for i in 0..r {
                for j in 0..r {
                    let area = quad_area(&grid.cell_corners(i, j));
                    grid.push_cell(axis[i] * axis[j], area);
                }
            }
            grid
        }
    };
    Ok(grid)
}

fn empty_grid(noise_dim: usize, resolution: usize, corners: Vec<Point>) -> ManifoldGrid {
    let cells = if noise_dim == 1 { resolution } else { resolution * resolution };
    ManifoldGrid {
        noise_dim,
        resolution,
        corners,
        cell_mass: Vec::with_capacity(cells),
        cell_measure: Vec::with_capacity(cells),
        cell_density: Vec::with_capacity(cells),
        cell_flags: Vec::with_capacity(cells),
    }
}

impl ManifoldGrid {
    fn push_cell(&mut self, mass: f64, measure: f64) {
        let degenerate = measure < DEGENERATE_MEASURE;
        self.cell_mass.push(mass);
        self.cell_measure.push(measure);
        self.cell_density.push(mass / measure.max(DEGENERATE_MEASURE));
        self.cell_flags.push(degenerate);
    }
}

/// The generator's manifold.
pub fn generator_manifold(generator: &Mlp, noise: NoiseSpec, resolution: usize, exec: Execution) -> Result<ManifoldGrid> {
    compute_manifold(|b| generator.predict(b), noise, resolution, exec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub resolution: usize,
    /// Discriminator score at each cell center, indexed `iy * res + ix`.
    pub scores: Vec<f64>,
}

impl Heatmap {
    pub fn cell_center(resolution: usize, ix: usize, iy: usize) -> Point {
        let r = resolution as f64;
        [(ix as f64 + 0.5) / r, (iy as f64 + 0.5) / r]
    }
}

pub fn compute_heatmap(discriminator: &Mlp, resolution: usize, exec: Execution) -> Result<Heatmap> {
    if resolution == 0 {
        return Err(Error::config("heatmap resolution must be positive"));
    }
    if discriminator.input_width() != 2 || discriminator.output_width() != 1 {
        return Err(Error::contract("heatmap needs a 2-input, 1-output discriminator"));
    }
    let rows = exec.try_map(resolution, |iy| {
        let pts: Vec<Point> = (0..resolution)
            .map(|ix| Heatmap::cell_center(resolution, ix, iy))
            .collect();
        discriminator.predict(&Batch::from_points(&pts)).map(Batch::into_vec)
    })?;
    Ok(Heatmap {
        resolution,
        scores: rows.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub resolution: usize,
    /// Fraction of in-range samples per cell, indexed `iy * res + ix`.
    pub mass: Vec<f64>,
}

impl DensityGrid {
    /// Builds a grid from raw cell masses.
    pub fn from_mass(resolution: usize, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != resolution * resolution {
            return Err(Error::Shape {
                context: "density grid cells",
                expected: resolution * resolution,
                actual: mass.len(),
            });
        }
        if mass.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::contract("density masses must be finite and non-negative"));
        }
        Ok(Self { resolution, mass })
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }
}

/// Bin index along one axis, with half-open bins and 1.0 folded into the last bin.
#[inline]
fn bin(v: f64, resolution: usize) -> Option<usize> {
    if !(0.0..=1.0).contains(&v) {
        return None;
    }
    Some(((v * resolution as f64) as usize).min(resolution - 1))
}

/// Normalized histogram of `samples` over the unit square. Points outside it
/// are ignored.
pub fn density_grid(samples: &[Point], resolution: usize) -> Result<DensityGrid> {
    if samples.is_empty() {
        return Err(Error::contract("density grid needs at least one sample"));
    }
    if resolution == 0 {
        return Err(Error::config("density resolution must be positive"));
    }
    let mut counts = vec![0u64; resolution * resolution];
    let mut inside = 0u64;
    for &[x, y] in samples {
        if let (Some(ix), Some(iy)) = (bin(x, resolution), bin(y, resolution)) {
            counts[iy * resolution + ix] += 1;
            inside += 1;
        }
    }
    let mass = if inside == 0 {
        vec![0.0; counts.len()]
    } else {
        counts.iter().map(|&c| c as f64 / inside as f64).collect()
    };
    Ok(DensityGrid { resolution, mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec};
    use approx::assert_relative_eq;

    fn identity(b: &Batch) -> Result<Batch> {
        Ok(b.clone())
    }

    #[test]
    fn quad_area_cases() {
        assert_eq!(quad_area(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]), 1.0);
        assert_eq!(quad_area(&[[0.0, 0.0], [0.5, 0.5], [1.0, 1.0], [2.0, 2.0]]), 0.0);
        // bowtie: the two triangles have opposite orientation and cancel
        assert_eq!(quad_area(&[[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]), 0.0);
        // orientation does not matter
        assert_eq!(quad_area(&[[0.0, 0.0], [0.0, 2.0], [3.0, 2.0], [3.0, 0.0]]), 6.0);
    }

    #[test]
    fn identity_manifold_is_regular_with_unit_density() {
        let m = compute_manifold(identity, NoiseSpec::default(), 20, Execution::Sequential).unwrap();
        assert_eq!(m.corners.len(), 21 * 21);
        for i in 0..=20 {
            for j in 0..=20 {
                assert_eq!(m.corner(i, j), [i as f64 / 20.0, j as f64 / 20.0]);
            }
        }
        for (&d, &flag) in m.cell_density.iter().zip(&m.cell_flags) {
            assert_relative_eq!(d, 1.0, max_relative = 1e-9);
            assert!(!flag);
        }
    }

    #[test]
    fn corner_indexing_matches_noise_coordinates() {
        // the corner for noise (0.85, 0.10) at R = 20 is (17, 2)
        let map = |b: &Batch| -> Result<Batch> {
            let pts: Vec<Point> = b
                .iter_rows()
                .map(|z| {
                    if (z[0] - 0.85).abs() < 1e-12 && (z[1] - 0.10).abs() < 1e-12 {
                        [0.21, 0.75]
                    } else {
                        [z[0], z[1]]
                    }
                })
                .collect();
            Ok(Batch::from_points(&pts))
        };
        let m = compute_manifold(map, NoiseSpec::default(), 20, Execution::Sequential).unwrap();
        assert_eq!(m.corner(17, 2), [0.21, 0.75]);
        assert_eq!(m.corners[17 * 21 + 2], [0.21, 0.75]);
    }

    #[test]
    fn shrink_scales_density_by_four() {
        let shrink = |b: &Batch| -> Result<Batch> {
            let mut out = b.clone();
            out.as_mut_slice().iter_mut().for_each(|v| *v *= 0.5);
            Ok(out)
        };
        let base = compute_manifold(identity, NoiseSpec::default(), 20, Execution::Sequential).unwrap();
        let m = compute_manifold(shrink, NoiseSpec::default(), 20, Execution::Sequential).unwrap();
        for k in 0..m.cell_count() {
            assert_relative_eq!(m.cell_measure[k], base.cell_measure[k] / 4.0, max_relative = 1e-9);
            assert_relative_eq!(m.cell_density[k], 4.0, max_relative = 1e-9);
        }
        let total: f64 = m.cell_density.iter().zip(&m.cell_measure).map(|(d, a)| d * a).sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn collapsed_cells_are_flagged_and_capped() {
        let collapse = |b: &Batch| -> Result<Batch> { Ok(Batch::from_points(&vec![[0.3, 0.3]; b.rows()])) };
        let m = compute_manifold(collapse, NoiseSpec::default(), 4, Execution::Sequential).unwrap();
        assert!(m.cell_flags.iter().all(|&f| f));
        for d in &m.cell_density {
            assert_relative_eq!(*d, (1.0 / 16.0) / DEGENERATE_MEASURE, max_relative = 1e-12);
        }
    }

    #[test]
    fn non_finite_map_output_is_numerical_error() {
        let bad = |b: &Batch| -> Result<Batch> { Ok(Batch::from_points(&vec![[f64::NAN, 0.0]; b.rows()])) };
        let err = compute_manifold(bad, NoiseSpec::default(), 4, Execution::Sequential).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
        assert!(matches!(
            compute_manifold(identity, NoiseSpec::default(), 1, Execution::Sequential),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn gaussian_cell_mass_sums_to_one() {
        for r in [2, 5, 20] {
            let total: f64 = (0..r).map(|k| axis_cell_mass(NoiseDist::Gaussian, k, r)).sum();
            assert_relative_eq!(total, 1.0, max_relative = 1e-12);
        }
        // central bins carry more mass than uniform ones
        assert!(axis_cell_mass(NoiseDist::Gaussian, 10, 20) > 0.05);
        let spec = NoiseSpec {
            dim: 2,
            dist: NoiseDist::Gaussian,
        };
        let m = compute_manifold(identity, spec, 20, Execution::Sequential).unwrap();
        assert_relative_eq!(m.cell_mass.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn one_dimensional_noise_gives_polyline() {
        let spec = NoiseSpec {
            dim: 1,
            dist: NoiseDist::Uniform,
        };
        let diag = |b: &Batch| -> Result<Batch> {
            let pts: Vec<Point> = b.iter_rows().map(|z| [z[0], z[0]]).collect();
            Ok(Batch::from_points(&pts))
        };
        let m = compute_manifold(diag, spec, 10, Execution::Sequential).unwrap();
        assert_eq!(m.corners.len(), 11);
        assert_eq!(m.cell_count(), 10);
        for k in 0..10 {
            assert_relative_eq!(m.cell_measure[k], 0.1 * 2f64.sqrt(), max_relative = 1e-9);
        }
        let total: f64 = m.cell_density.iter().zip(&m.cell_measure).map(|(d, l)| d * l).sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn heatmap_of_zero_discriminator_is_flat() {
        let d = Mlp::zeroed(&[
            LayerSpec::new(2, 14, Activation::Relu),
            LayerSpec::new(14, 1, Activation::Sigmoid),
        ])
        .unwrap();
        let h = compute_heatmap(&d, 40, Execution::Parallel).unwrap();
        assert_eq!(h.scores.len(), 1600);
        assert!(h.scores.iter().all(|&s| s == 0.5));
    }

    #[test]
    fn heatmap_matches_direct_forward() {
        let d = Mlp::new(
            &[
                LayerSpec::new(2, 8, Activation::Relu),
                LayerSpec::new(8, 1, Activation::Sigmoid),
            ],
            4,
        )
        .unwrap();
        let h = compute_heatmap(&d, 7, Execution::Parallel).unwrap();
        for iy in 0..7 {
            for ix in 0..7 {
                let p = Heatmap::cell_center(7, ix, iy);
                let (y, _) = d.forward(&Batch::from_points(&[p])).unwrap();
                assert_eq!(h.scores[iy * 7 + ix], y.as_slice()[0]);
            }
        }
        assert_eq!(h, compute_heatmap(&d, 7, Execution::Sequential).unwrap());
    }

    #[test]
    fn density_grid_quadrants() {
        let g = density_grid(&[[0.1, 0.1], [0.9, 0.1], [0.1, 0.9], [0.9, 0.9]], 2).unwrap();
        assert_eq!(g.mass, vec![0.25; 4]);
    }

    #[test]
    fn density_grid_tie_break_and_boundary() {
        let g = density_grid(&[[0.5, 0.5]; 3], 2).unwrap();
        assert_eq!(g.mass, vec![0.0, 0.0, 0.0, 1.0]);
        let g = density_grid(&[[1.0, 1.0]], 20).unwrap();
        assert_eq!(g.mass[399], 1.0);
        assert_eq!(g.total(), 1.0);
    }

    #[test]
    fn density_grid_rejects_empty_input() {
        assert!(matches!(density_grid(&[], 20), Err(Error::Contract(_))));
    }
}
