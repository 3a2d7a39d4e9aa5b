use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twoscale::geometry::{neighbors_brute_force, DyadicSquare, MacroPartition};

/// Applies `rounds` refinements, each marking a random subset of the squares.
fn random_history(seed: u64, rounds: usize, fraction: f64) -> Vec<(MacroPartition, Vec<DyadicSquare>, MacroPartition)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = MacroPartition::uniform(1);
    let mut out = Vec::new();
    for _ in 0..rounds {
        let squares: Vec<DyadicSquare> = p.squares().copied().collect();
        let mut marked: Vec<DyadicSquare> = squares.iter().filter(|_| rng.gen_bool(fraction)).copied().collect();
        if marked.is_empty() {
            marked.push(squares[rng.gen_range(0..squares.len())]);
        }
        let next = p.refine(&marked).unwrap().partition;
        out.push((p, marked, next.clone()));
        p = next;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn refinement_keeps_partition_invariants(seed in any::<u64>(), rounds in 1usize..6, fraction in 0.05..0.5f64) {
        for (before, marked, after) in random_history(seed, rounds, fraction) {
            prop_assert!(after.area_is_one());
            prop_assert!(after.is_one_irregular());
            prop_assert!(before.is_refined_by(&after));
            prop_assert_eq!((after.len() - before.len()) % 3, 0);
            prop_assert!(after.h() <= before.h());
            prop_assert!(marked.iter().all(|q| !after.contains(q)));
            prop_assert_eq!(after.generation(), before.generation() + 1);
        }
    }

    #[test]
    fn neighbour_queries_match_brute_force(seed in any::<u64>(), rounds in 1usize..5) {
        let (_, _, p) = random_history(seed, rounds, 0.3).pop().unwrap();
        for q in p.squares() {
            let mut fast = p.neighbors(q).unwrap();
            let mut slow = neighbors_brute_force(&p, q);
            fast.sort_by_key(|s| (s.level, s.ix, s.iy));
            slow.sort_by_key(|s| (s.level, s.ix, s.iy));
            prop_assert_eq!(fast, slow);
        }
    }

    #[test]
    fn dump_round_trips(seed in any::<u64>(), rounds in 0usize..5) {
        let p = random_history(seed, rounds, 0.3).pop().map(|h| h.2).unwrap_or_else(MacroPartition::unit);
        let back = MacroPartition::from_dump(&p.to_dump()).unwrap();
        let a: Vec<DyadicSquare> = p.squares().copied().collect();
        let b: Vec<DyadicSquare> = back.squares().copied().collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn interior_points_lie_in_exactly_one_square(seed in any::<u64>(), x in 0.001..0.999f64, y in 0.001..0.999f64) {
        let (_, _, p) = random_history(seed, 3, 0.3).pop().unwrap();
        let q = p.locate([x, y]).unwrap();
        prop_assert!(q.contains_point([x, y]));
        let strictly_inside = p
            .squares()
            .filter(|s| {
                let [x0, y0] = s.origin();
                x > x0 && x < x0 + s.side() && y > y0 && y < y0 + s.side()
            })
            .count();
        prop_assert!(strictly_inside <= 1);
    }

    #[test]
    fn children_tile_their_parent(level in 0u8..10, ix in 0u32..1024, iy in 0u32..1024) {
        let q = DyadicSquare::new(level, ix % (1 << level), iy % (1 << level)).unwrap();
        let kids = q.children(30).unwrap();
        let area: f64 = kids.iter().map(|k| k.area()).sum();
        prop_assert!((area - q.area()).abs() < 1e-15);
        prop_assert!(kids.iter().all(|k| k.parent() == Some(q)));
    }
}
