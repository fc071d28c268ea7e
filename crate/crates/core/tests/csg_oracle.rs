//! Boolean results checked against an independent voxel count.

mod common;

use common::{snapped_box, to_point, voxel_volumes};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use surfmark::csg::{boolean_op, BoolOp};
use surfmark::shapes::axis_box;

#[test]
fn random_box_pairs_match_voxel_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for pair in 0..20 {
        let a = snapped_box(&mut rng);
        let b = snapped_box(&mut rng);
        let ma = axis_box(to_point(a.0), to_point(a.1));
        let mb = axis_box(to_point(b.0), to_point(b.1));
        let expected = voxel_volumes(a, b);
        for (op, want) in [BoolOp::Union, BoolOp::Intersection, BoolOp::Difference].into_iter().zip(expected) {
            let r = boolean_op(&ma, &mb, op).unwrap();
            let got = r.mesh.signed_volume();
            let rel = (got - want).abs() / want.max(1e-12);
            assert!(want == 0.0 && got.abs() < 1e-9 || rel < 1e-3, "pair {pair} {op:?}: got {got}, voxel {want}");
            assert_eq!(r.boundary_edge_count, 0, "pair {pair} {op:?}");
        }
    }
}
