use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Rect};

/// Importance density over the coverage domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Density {
    Uniform,
    /// Isotropic Gaussian centered at the origin.
    Gaussian { sigma: f64 },
}

impl Density {
    pub fn weight(&self, p: &Point) -> f64 {
        match self {
            Density::Uniform => 1.0,
            Density::Gaussian { sigma } => (-p.norm_squared() / (2.0 * sigma * sigma)).exp(),
        }
    }
}

/// Cell centers of a `resolution × resolution` midpoint grid over `domain`.
fn grid(domain: &Rect, resolution: usize) -> impl Iterator<Item = Point> + '_ {
    let hx = domain.width() / resolution as f64;
    let hy = domain.height() / resolution as f64;
    (0..resolution).flat_map(move |iy| {
        (0..resolution).map(move |ix| {
            Point::new(
                domain.min[0] + (ix as f64 + 0.5) * hx,
                domain.min[1] + (iy as f64 + 0.5) * hy,
            )
        })
    })
}

/// Index of the nearest generator; ties go to the lowest index.
fn nearest(positions: &[Point], q: &Point) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in positions.iter().enumerate() {
        let d = (p - q).norm_squared();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Density-weighted centroids of the Voronoi cells generated by `positions`
/// within `domain`, by midpoint quadrature. A cell with no mass keeps its
/// generator as the target.
pub fn coverage_targets(
    positions: &[Point],
    density: &Density,
    domain: &Rect,
    resolution: usize,
) -> Vec<Point> {
    if positions.is_empty() {
        return Vec::new();
    }
    let mut mass = vec![0.0; positions.len()];
    let mut moment = vec![Point::zeros(); positions.len()];
    for q in grid(domain, resolution.max(1)) {
        let w = density.weight(&q);
        let i = nearest(positions, &q);
        mass[i] += w;
        moment[i] += q * w;
    }
    positions
        .iter()
        .zip(mass.iter().zip(&moment))
        .map(|(p, (&m, c))| if m > 0.0 { c / m } else { *p })
        .collect()
}

/// Locational cost `Σ_i ∫_{W_i} ‖q − p_i‖² φ(q) dq` of the Voronoi partition,
/// by the same quadrature as [`coverage_targets`].
pub fn locational_cost(
    positions: &[Point],
    density: &Density,
    domain: &Rect,
    resolution: usize,
) -> f64 {
    if positions.is_empty() {
        return 0.0;
    }
    let cell = domain.width() * domain.height() / (resolution * resolution) as f64;
    grid(domain, resolution.max(1))
        .map(|q| {
            let i = nearest(positions, &q);
            (q - positions[i]).norm_squared() * density.weight(&q) * cell
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square() -> Rect {
        Rect::new(-1.0, -1.0, 1.0, 1.0)
    }

    #[test]
    fn single_robot_uniform_square_is_centered() {
        let c = coverage_targets(&[Point::new(0.7, -0.3)], &Density::Uniform, &square(), 64);
        assert!(c[0].norm() < 1e-12);
    }

    #[test]
    fn mirrored_robots_have_mirrored_centroids() {
        let pos = [Point::new(-0.4, 0.2), Point::new(0.4, 0.2)];
        let c = coverage_targets(&pos, &Density::Gaussian { sigma: 0.6 }, &square(), 80);
        assert!((c[0].x + c[1].x).abs() < 1e-12);
        assert!((c[0].y - c[1].y).abs() < 1e-12);
        assert!(c[0].x < 0.0);
    }

    #[test]
    fn single_robot_gaussian_matches_mean() {
        let domain = Rect::new(-10.0, -10.0, 10.0, 10.0);
        for p in [Point::new(3.0, -4.0), Point::new(-8.0, 9.0)] {
            let c = coverage_targets(&[p], &Density::Gaussian { sigma: 2.0 }, &domain, 100);
            assert!(c[0].norm() < 1e-9);
        }
        // off-center domain: compare with the truncated-normal mean along x
        let domain = Rect::new(0.0, -5.0, 5.0, 5.0);
        let sigma: f64 = 1.5;
        let c = coverage_targets(&[Point::new(1.0, 1.0)], &Density::Gaussian { sigma }, &domain, 400);
        // E[x | 0 ≤ x ≤ 5] for N(0, σ²) = σ·(φ(0) − φ(5/σ)) / (Φ(5/σ) − Φ(0))
        let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let b = 5.0 / sigma;
        let mass = 0.5 - normal_tail(b);
        let expected = sigma * (pdf(0.0) - pdf(b)) / mass;
        assert!((c[0].x - expected).abs() < 1e-3, "{} vs {expected}", c[0].x);
        assert!(c[0].y.abs() < 1e-9);
    }

    // Upper tail Q(z) by Simpson integration of the standard normal pdf.
    fn normal_tail(z: f64) -> f64 {
        let upper = z + 12.0;
        let n = 20_000;
        let h = (upper - z) / n as f64;
        let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = f(z) + f(upper);
        for k in 1..n {
            let x = z + k as f64 * h;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn empty_task_yields_nothing() {
        assert!(coverage_targets(&[], &Density::Uniform, &square(), 10).is_empty());
    }

    #[test]
    fn lloyd_iteration_does_not_increase_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let domain = Rect::new(-5.0, -5.0, 5.0, 5.0);
        let density = Density::Gaussian { sigma: 2.5 };
        for _ in 0..10 {
            let mut pos: Vec<Point> = (0..5)
                .map(|_| Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
                .collect();
            let mut prev = locational_cost(&pos, &density, &domain, 60);
            for _ in 0..25 {
                pos = coverage_targets(&pos, &density, &domain, 60);
                let h = locational_cost(&pos, &density, &domain, 60);
                assert!(h <= prev + 1e-9, "{h} > {prev}");
                prev = h;
            }
        }
    }
}
