//! Analytic pose gradient against central finite differences.

mod common;

use common::{fd_gradient, relative_error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surfmark::glyph::BoxGeom;
use surfmark::mesh::{surface_sample, SpatialIndex};
use surfmark::placement::{compute_angles, loss_gradient, CandidateBox};
use surfmark::shapes::{geodesic_sphere, tessellated_box};
use surfmark::{Mesh, Vec3};

const PROBES: usize = 179;
const STEP: f64 = 1e-5;
const FLOOR: f64 = 1e-6;

/// Random poses hovering just outside a convex mesh, where the squared
/// distance field is differentiable.
fn poses(mesh: &Mesh, n: usize, seed: u64) -> Vec<CandidateBox> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    surface_sample(mesh, n, seed)
        .unwrap()
        .into_iter()
        .map(|s| {
            let lift = rng.gen_range(0.6..1.5);
            let base = BoxGeom {
                center: s.position + s.normal * lift,
                half_extents: Vec3::new(2.0, 1.0, 0.25),
                rotation: compute_angles(&s.normal),
            };
            let mut c = CandidateBox::new(base, s);
            let mut p = [0.0; 6];
            for (k, v) in p.iter_mut().enumerate() {
                *v = if k < 3 { rng.gen_range(-0.08..0.08) } else { rng.gen_range(-0.2..0.2) };
            }
            c.set_params(p);
            c
        })
        .collect()
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let fixtures = [
        ("plane", tessellated_box(Vec3::new(30.0, 30.0, 2.0), 1.0), 34),
        ("sphere", geodesic_sphere(10.0, 16), 33),
        ("cube", tessellated_box(Vec3::repeat(10.0), 1.0), 33),
    ];
    let mut worst = 0.0f64;
    for (name, mesh, n) in fixtures {
        let index = SpatialIndex::new(&mesh);
        for (i, c) in poses(&mesh, n, 5).iter().enumerate() {
            let g = loss_gradient(c, &index, PROBES);
            let fd = fd_gradient(c, &index, PROBES, STEP);
            for k in 0..6 {
                let e = relative_error(g[k], fd[k], FLOOR);
                worst = worst.max(e);
                assert!(e < 1e-4, "{name} pose {i} component {k}: analytic {}, fd {}", g[k], fd[k]);
            }
        }
    }
    eprintln!("worst relative error {worst:e}");
}
