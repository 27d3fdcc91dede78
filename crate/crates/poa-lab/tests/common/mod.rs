//! Random small games shared by the property suites.
#![allow(dead_code)]

use poa_lab::{CongestionGame, LatencyFunction, Player, Resource};
use proptest::prelude::*;
use rand::Rng;

#[derive(Clone, Copy, Debug)]
pub struct GameShape {
    pub max_players: usize,
    pub max_resources: usize,
    pub max_weight: u32,
    pub max_degree: usize,
    pub singleton: bool,
}

impl GameShape {
    pub fn general() -> Self {
        GameShape {
            max_players: 4,
            max_resources: 4,
            max_weight: 3,
            max_degree: 2,
            singleton: false,
        }
    }

    pub fn unweighted() -> Self {
        GameShape {
            max_weight: 1,
            ..Self::general()
        }
    }

    pub fn small_singleton() -> Self {
        GameShape {
            max_players: 3,
            max_resources: 3,
            max_weight: 3,
            max_degree: 2,
            singleton: true,
        }
    }
}

fn latency(max_degree: usize) -> impl Strategy<Value = LatencyFunction> {
    prop::collection::vec(0u32..4, max_degree + 1)
        .prop_filter("non-constant or positive", |c| c.iter().skip(1).any(|&a| a > 0))
        .prop_map(|c| LatencyFunction::polynomial(c.into_iter().map(f64::from).collect()).unwrap())
}

fn strategy(m: usize, singleton: bool) -> BoxedStrategy<Vec<usize>> {
    if singleton {
        (0..m).prop_map(|e| vec![e]).boxed()
    } else {
        prop::collection::btree_set(0..m, 1..=m)
            .prop_map(|s| s.into_iter().collect())
            .boxed()
    }
}

/// A random valid game of the given shape.
pub fn arb_game(shape: GameShape) -> impl Strategy<Value = CongestionGame> {
    (2..=shape.max_players, 1..=shape.max_resources).prop_flat_map(move |(n, m)| {
        let lats = prop::collection::vec(latency(shape.max_degree), m);
        let player = (
            1..=shape.max_weight,
            prop::collection::vec(strategy(m, shape.singleton), 1..=m.min(3)),
        );
        let players = prop::collection::vec(player, n);
        (lats, players).prop_map(|(lats, players)| build(lats, players))
    })
}

fn build(lats: Vec<LatencyFunction>, players: Vec<(u32, Vec<Vec<usize>>)>) -> CongestionGame {
    let resources = lats
        .into_iter()
        .enumerate()
        .map(|(e, latency)| Resource {
            id: format!("r{e}"),
            latency,
        })
        .collect();
    let players = players
        .into_iter()
        .enumerate()
        .map(|(i, (w, mut strategies))| {
            strategies.sort();
            strategies.dedup();
            Player {
                id: format!("p{i}"),
                weight: f64::from(w),
                strategies,
            }
        })
        .collect();
    CongestionGame::new(resources, players).unwrap()
}

/// A random singleton game drawn from an explicit RNG (for seeded sweeps).
pub fn random_singleton_game<R: Rng>(rng: &mut R, max_degree: usize) -> CongestionGame {
    let n = rng.gen_range(2..=3);
    let m = rng.gen_range(1..=3);
    let lats = (0..m)
        .map(|_| loop {
            let c: Vec<u32> = (0..=max_degree).map(|_| rng.gen_range(0..4)).collect();
            if c.iter().skip(1).any(|&a| a > 0) {
                break LatencyFunction::polynomial(c.into_iter().map(f64::from).collect()).unwrap();
            }
        })
        .collect();
    let players = (0..n)
        .map(|_| {
            let w = rng.gen_range(1..=3u32);
            let k = rng.gen_range(1..=m);
            let mut all: Vec<usize> = (0..m).collect();
            for i in (1..m).rev() {
                all.swap(i, rng.gen_range(0..=i));
            }
            (w, all[..k].iter().map(|&e| vec![e]).collect())
        })
        .collect();
    build(lats, players)
}
