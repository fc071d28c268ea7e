use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Mesh, Point, Vec3};
use crate::error::{Error, Result};

/// A point on the surface together with the normal of the face it lies on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub position: Point,
    pub normal: Vec3,
    pub face_index: usize,
}

/// Area-weighted uniform surface sampling, deterministic for a given seed.
pub fn surface_sample(mesh: &Mesh, count: usize, seed: u64) -> Result<Vec<SurfacePoint>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let dist = WeightedIndex::new(mesh.face_areas()).map_err(|_| Error::ZeroArea)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let face = dist.sample(&mut rng);
        let [a, b, c] = mesh.triangle(face);
        let r1: f64 = rng.gen();
        let r2: f64 = rng.gen();
        let s = r1.sqrt();
        let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
        let position = Point::from(a.coords * wa + b.coords * wb + c.coords * wc);
        out.push(SurfacePoint { position, normal: mesh.face_normals()[face], face_index: face });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::geom;
    use crate::shapes;

    #[test]
    fn unit_square_mean() {
        let sq = Mesh::new(
            vec![
                Point::new(0.0, 0.0, 0.0),
                Point::new(1.0, 0.0, 0.0),
                Point::new(1.0, 1.0, 0.0),
                Point::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let pts = surface_sample(&sq, 10_000, 3).unwrap();
        let mean = pts.iter().fold(Vec3::zeros(), |acc, p| acc + p.position.coords) / pts.len() as f64;
        assert!((mean - Vec3::new(0.5, 0.5, 0.0)).norm() < 0.02);
    }

    #[test]
    fn zero_count_is_empty() {
        assert!(surface_sample(&shapes::unit_cube(), 0, 1).unwrap().is_empty());
    }

    #[test]
    fn zero_area_is_error() {
        let m = Mesh::new(vec![Point::origin(); 3], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(surface_sample(&m, 5, 1), Err(Error::ZeroArea)));
    }

    #[test]
    fn samples_lie_on_their_face() {
        let tri = Mesh::new(
            vec![Point::new(0.3, -1.0, 2.0), Point::new(2.0, 0.5, 1.0), Point::new(-1.0, 1.5, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        for sp in surface_sample(&tri, 500, 11).unwrap() {
            let [a, b, c] = tri.triangle(0);
            let (q, bary, _) = geom::closest_point_on_triangle(&sp.position, &a, &b, &c);
            assert!((q - sp.position).norm() < 1e-9);
            assert!(bary.iter().all(|w| (-1e-9..=1.0 + 1e-9).contains(w)));
            assert!((bary.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let m = shapes::icosphere(5.0, 2);
        assert_eq!(surface_sample(&m, 50, 9).unwrap(), surface_sample(&m, 50, 9).unwrap());
        assert_ne!(surface_sample(&m, 50, 9).unwrap(), surface_sample(&m, 50, 10).unwrap());
    }

    #[test]
    fn face_frequencies_follow_area() {
        // Three faces with areas 1 : 2 : 5.
        let mut v = Vec::new();
        let mut f = Vec::new();
        for (k, s) in [1.0f64, 2.0, 5.0].iter().enumerate() {
            let x0 = 10.0 * k as f64;
            let base = v.len();
            let l = (2.0 * s).sqrt();
            v.push(Point::new(x0, 0.0, 0.0));
            v.push(Point::new(x0 + l, 0.0, 0.0));
            v.push(Point::new(x0, l, 0.0));
            f.push([base, base + 1, base + 2]);
        }
        let m = Mesh::new(v, f).unwrap();
        let n = 10_000;
        let mut counts = [0usize; 3];
        for sp in surface_sample(&m, n, 5).unwrap() {
            counts[sp.face_index] += 1;
        }
        let probs = [1.0 / 8.0, 2.0 / 8.0, 5.0 / 8.0];
        let chi2: f64 = counts
            .iter()
            .zip(probs)
            .map(|(&c, p)| {
                let e = p * n as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        // 99.9th percentile of chi-squared with 2 degrees of freedom.
        assert!(chi2 < 13.8, "chi2 = {chi2}");
    }
}
