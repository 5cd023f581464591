//! Real-sample sources: five preset 2D distributions and user-drawn point sets.
//!
//! Every sampler draws from an explicit rng and clamps to the unit square.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::batch::Point;
use crate::error::{Error, Result};

/// Minimum number of stored points for a drawn distribution.
pub const MIN_DRAWN_POINTS: usize = 10;
/// Default kernel width for drawn-distribution resampling.
pub const DEFAULT_DRAWN_JITTER: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Line,
    TwoGaussians,
    Ring,
    ThreeClusters,
    GridBlobs,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Line,
        Preset::TwoGaussians,
        Preset::Ring,
        Preset::ThreeClusters,
        Preset::GridBlobs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Line => "line",
            Preset::TwoGaussians => "two_gaussians",
            Preset::Ring => "ring",
            Preset::ThreeClusters => "three_clusters",
            Preset::GridBlobs => "grid_blobs",
        }
    }

    pub fn from_name(name: &str) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| p.name() == name)
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

// Preset geometry.
pub const LINE_START: Point = [0.2, 0.2];
pub const LINE_END: Point = [0.8, 0.8];
pub const LINE_SIGMA: f64 = 0.03;
pub const TWO_GAUSSIAN_CENTERS: [Point; 2] = [[0.3, 0.7], [0.7, 0.4]];
pub const TWO_GAUSSIAN_SIGMA: f64 = 0.07;
pub const RING_CENTER: Point = [0.5, 0.5];
pub const RING_RADIUS: f64 = 0.3;
pub const RING_SIGMA: f64 = 0.03;
pub const THREE_CLUSTER_CENTERS: [Point; 3] = [[0.25, 0.25], [0.75, 0.3], [0.5, 0.8]];
pub const THREE_CLUSTER_SIGMA: f64 = 0.05;
pub const GRID_BLOB_CENTERS: [Point; 4] = [[0.3, 0.3], [0.7, 0.3], [0.3, 0.7], [0.7, 0.7]];
pub const GRID_BLOB_SIGMA: f64 = 0.04;

/// A point set resampled with isotropic Gaussian jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDrawn")]
pub struct DrawnDistribution {
    points: Vec<Point>,
    jitter: f64,
}

#[derive(Deserialize)]
struct RawDrawn {
    points: Vec<Point>,
    #[serde(default = "default_jitter")]
    jitter: f64,
}

fn default_jitter() -> f64 {
    DEFAULT_DRAWN_JITTER
}

impl TryFrom<RawDrawn> for DrawnDistribution {
    type Error = Error;

    fn try_from(raw: RawDrawn) -> Result<Self> {
        DrawnDistribution::new(raw.points, raw.jitter)
    }
}

impl DrawnDistribution {
    pub fn new(points: Vec<Point>, jitter: f64) -> Result<Self> {
        if points.len() < MIN_DRAWN_POINTS {
            return Err(Error::config(format!(
                "a drawn distribution needs at least {MIN_DRAWN_POINTS} points, got {}",
                points.len()
            )));
        }
        for (index, &[x, y]) in points.iter().enumerate() {
            let inside = |v: f64| (0.0..=1.0).contains(&v);
            if !(inside(x) && inside(y)) {
                return Err(Error::PointOutOfRange { index, x, y });
            }
        }
        if !(jitter.is_finite() && jitter >= 0.0) {
            return Err(Error::config(format!("jitter must be finite and non-negative, got {jitter}")));
        }
        Ok(Self { points, jitter })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Parses one `x y` pair per line. Blank lines and `#` comments are skipped.
    pub fn parse_text(text: &str, jitter: f64) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace().map(str::parse::<f64>);
            match (fields.next(), fields.next(), fields.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) => points.push([x, y]),
                _ => {
                    return Err(Error::config(format!(
                        "line {}: expected two numbers \"x y\", got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(points, jitter)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for [x, y] in &self.points {
            let _ = writeln!(out, "{x} {y}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Preset { preset: Preset },
    Drawn(DrawnDistribution),
}

impl From<Preset> for Distribution {
    fn from(preset: Preset) -> Self {
        Distribution::Preset { preset }
    }
}

impl Distribution {
    pub fn from_drawn_points(points: Vec<Point>) -> Result<Self> {
        Ok(Distribution::Drawn(DrawnDistribution::new(points, DEFAULT_DRAWN_JITTER)?))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Distribution::Preset { preset } => preset.name(),
            Distribution::Drawn(_) => "drawn",
        }
    }

    /// Draws `n` i.i.d. points in the unit square.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Point>> {
        if n == 0 {
            return Err(Error::contract("sample count must be at least 1"));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(clamp_unit(self.sample_one(rng)));
        }
        Ok(out)
    }

    fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self {
            Distribution::Preset { preset } => match preset {
                Preset::Line => {
                    let t: f64 = rng.random();
                    let base = [
                        LINE_START[0] + t * (LINE_END[0] - LINE_START[0]),
                        LINE_START[1] + t * (LINE_END[1] - LINE_START[1]),
                    ];
                    jitter(base, LINE_SIGMA, rng)
                }
                Preset::TwoGaussians => mixture(&TWO_GAUSSIAN_CENTERS, TWO_GAUSSIAN_SIGMA, rng),
                Preset::Ring => {
                    let angle = rng.random::<f64>() * TAU;
                    let radius = RING_RADIUS + RING_SIGMA * truncated_normal(3.0, rng);
                    [
                        RING_CENTER[0] + radius * angle.cos(),
                        RING_CENTER[1] + radius * angle.sin(),
                    ]
                }
                Preset::ThreeClusters => mixture(&THREE_CLUSTER_CENTERS, THREE_CLUSTER_SIGMA, rng),
                Preset::GridBlobs => mixture(&GRID_BLOB_CENTERS, GRID_BLOB_SIGMA, rng),
            },
            Distribution::Drawn(drawn) => {
                let base = drawn.points[rng.random_range(0..drawn.points.len())];
                jitter(base, drawn.jitter, rng)
            }
        }
    }
}

fn mixture<R: Rng + ?Sized>(centers: &[Point], sigma: f64, rng: &mut R) -> Point {
    let c = centers[rng.random_range(0..centers.len())];
    jitter(c, sigma, rng)
}

fn jitter<R: Rng + ?Sized>(base: Point, sigma: f64, rng: &mut R) -> Point {
    let dx: f64 = rng.sample(StandardNormal);
    let dy: f64 = rng.sample(StandardNormal);
    [base[0] + sigma * dx, base[1] + sigma * dy]
}

/// Standard normal draw rejected outside `[-limit, limit]`.
fn truncated_normal<R: Rng + ?Sized>(limit: f64, rng: &mut R) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= limit {
            return z;
        }
    }
}

fn clamp_unit([x, y]: Point) -> Point {
    [x.clamp(0.0, 1.0), y.clamp(0.0, 1.0)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn dist(a: Point, b: Point) -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    #[test]
    fn presets_stay_in_unit_square_and_are_deterministic() {
        for preset in Preset::ALL {
            let d = Distribution::from(preset);
            let a = d.sample(5_000, &mut rng(3)).unwrap();
            let b = d.sample(5_000, &mut rng(3)).unwrap();
            assert_eq!(a, b, "{preset}");
            assert!(a.iter().flatten().all(|v| (0.0..=1.0).contains(v)), "{preset}");
        }
    }

    #[test]
    fn two_gaussians_have_two_modes() {
        let samples = Distribution::from(Preset::TwoGaussians)
            .sample(10_000, &mut rng(11))
            .unwrap();
        let radius = 3.0 * TWO_GAUSSIAN_SIGMA;
        let mut near = [0usize; 2];
        for p in &samples {
            for (k, c) in TWO_GAUSSIAN_CENTERS.iter().enumerate() {
                if dist(*p, *c) <= radius {
                    near[k] += 1;
                }
            }
        }
        let covered = near[0] + near[1];
        assert!(covered as f64 >= 0.95 * samples.len() as f64, "{near:?}");
        // both modes are populated roughly equally
        assert!(near.iter().all(|&c| c > 4_500), "{near:?}");
    }

    #[test]
    fn ring_radii_within_three_widths() {
        let samples = Distribution::from(Preset::Ring).sample(10_000, &mut rng(5)).unwrap();
        for p in &samples {
            let r = dist(*p, RING_CENTER);
            assert!((r - RING_RADIUS).abs() <= 3.0 * RING_SIGMA + 1e-12, "radius {r}");
        }
    }

    #[test]
    fn drawn_single_point_concentrates() {
        let d = Distribution::from_drawn_points(vec![[0.5, 0.5]; 10]).unwrap();
        let samples = d.sample(10_000, &mut rng(2)).unwrap();
        let inside = samples
            .iter()
            .filter(|p| (p[0] - 0.5).abs() <= 0.1 && (p[1] - 0.5).abs() <= 0.1)
            .count();
        assert!(inside as f64 >= 0.99 * 10_000.0, "{inside}");
    }

    #[test]
    fn drawn_two_corners_is_bimodal() {
        let mut pts = vec![[0.1, 0.1]; 5];
        pts.extend(vec![[0.9, 0.9]; 5]);
        let d = Distribution::from_drawn_points(pts).unwrap();
        let samples = d.sample(4_000, &mut rng(9)).unwrap();
        let low = samples.iter().filter(|p| p[0] < 0.3 && p[1] < 0.3).count();
        let high = samples.iter().filter(|p| p[0] > 0.7 && p[1] > 0.7).count();
        let middle = samples.iter().filter(|p| (0.3..0.7).contains(&p[0])).count();
        assert!(low > 1_800 && high > 1_800 && middle == 0, "{low} {high} {middle}");
    }

    #[test]
    fn drawn_requires_ten_points() {
        let err = Distribution::from_drawn_points(vec![[0.5, 0.5]; 5]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn drawn_rejects_out_of_range_point_with_index() {
        let mut pts = vec![[0.5, 0.5]; 12];
        pts[7] = [1.2, 0.3];
        let err = Distribution::from_drawn_points(pts).unwrap_err();
        assert_eq!(
            err,
            Error::PointOutOfRange {
                index: 7,
                x: 1.2,
                y: 0.3
            }
        );
    }

    #[test]
    fn text_format_round_trips() {
        let pts: Vec<Point> = (0..12).map(|i| [i as f64 / 11.0, 1.0 - i as f64 / 13.0]).collect();
        let d = DrawnDistribution::new(pts, 0.02).unwrap();
        let text = d.to_text();
        assert_eq!(text.lines().count(), 12);
        let back = DrawnDistribution::parse_text(&text, 0.02).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn text_format_rejects_garbage() {
        let text = "0.1 0.2\n0.3\n";
        assert!(matches!(DrawnDistribution::parse_text(text, 0.02), Err(Error::Config(_))));
    }

    #[test]
    fn deserialization_validates_points() {
        let ok: Distribution = serde_json::from_str(
            r#"{"kind":"drawn","points":[[0.1,0.1],[0.2,0.2],[0.3,0.3],[0.4,0.4],[0.5,0.5],[0.6,0.6],[0.7,0.7],[0.8,0.8],[0.9,0.9],[1.0,1.0]]}"#,
        )
        .unwrap();
        assert!(matches!(ok, Distribution::Drawn(ref d) if d.jitter() == DEFAULT_DRAWN_JITTER));
        let few = serde_json::from_str::<Distribution>(r#"{"kind":"drawn","points":[[0.1,0.1]]}"#);
        assert!(few.is_err());
        let preset: Distribution = serde_json::from_str(r#"{"kind":"preset","preset":"ring"}"#).unwrap();
        assert_eq!(preset, Distribution::from(Preset::Ring));
    }

    #[test]
    fn zero_samples_is_a_contract_error() {
        let err = Distribution::from(Preset::Ring).sample(0, &mut rng(0)).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }
}
