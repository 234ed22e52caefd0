mod common;

use belkit::phantom::{generate, TreeSpec};
use belkit::ErrorKind;
use common::component_count;
use proptest::prelude::*;

fn spec_strategy() -> impl Strategy<Value = TreeSpec> {
    (
        0usize..=3,
        2.0f64..5.0,
        0.6f64..0.95,
        12.0f64..26.0,
        30.0f64..60.0,
        any::<u64>(),
    )
        .prop_map(
            |(depth, root_radius, radius_decay, root_length, angle, seed)| TreeSpec {
                depth,
                root_radius,
                radius_decay,
                root_length,
                branching_angle_deg: angle,
                seed,
                dims: [72, 72, 72],
                ..TreeSpec::default()
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_trees_are_consistent_or_rejected(spec in spec_strategy()) {
        match generate(&spec) {
            Err(e) => prop_assert_eq!(e.kind(), ErrorKind::Parameter),
            Ok(t) => {
                prop_assert_eq!(t.branches.len(), (1 << (spec.depth + 1)) - 1);
                prop_assert!(t.centerline().mask().is_subset_of(&t.mask));
                prop_assert_eq!(component_count(&t.mask), 1);
                prop_assert_eq!(component_count(t.centerline().mask()), 1);
                for b in &t.branches {
                    prop_assert!(b.radius >= 1.0);
                    prop_assert!(b.centerline.iter().all(|&p| t.mask.contains(p)));
                }
                let again = generate(&spec).unwrap();
                prop_assert_eq!(&again.mask, &t.mask);
                prop_assert_eq!(again.to_json(), t.to_json());
            }
        }
    }

    #[test]
    fn trivial_degradations_are_identities(spec in spec_strategy(), pick in any::<prop::sample::Index>()) {
        let Ok(t) = generate(&spec) else { return Ok(()) };
        let id = pick.index(t.branches.len()) + 1;
        prop_assert_eq!(&t.break_branch(id, 0.0).unwrap().mask, &t.mask);
        let site = t.leak_site(id, 2.0).unwrap();
        prop_assert_eq!(&t.add_leak(site, 0.0).unwrap().mask, &t.mask);
        let leak = t.add_leak(site, 2.0).unwrap();
        prop_assert_eq!(leak.mask.count(), t.mask.count() + leak.added_voxels);
        prop_assert!(t.mask.is_subset_of(&leak.mask));
    }
}

#[test]
fn distal_radii_follow_the_decay_and_rasterize() {
    let t = generate(&TreeSpec::default()).unwrap();
    let leaf = t.branches.iter().find(|b| b.generation == 3).unwrap();
    assert!((leaf.radius - 4.0 * 0.75f64.powi(3)).abs() < 1e-12);
    assert!(t
        .branches
        .iter()
        .all(|b| b.centerline.iter().all(|&p| t.mask.contains(p))));
}
