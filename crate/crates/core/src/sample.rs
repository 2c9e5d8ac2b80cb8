//! Random rational instances for tests and verification suites.
//!
//! Every generator takes the caller's RNG so runs are reproducible from a
//! seed.

use rand::Rng;

use crate::models::{Emission, HmmParams, SecantParams};
use crate::moments::{CoordinateSystem, CoordinateVector, DiscreteDistribution, Mode, StateSpace};
use crate::partition::SetPartition;
use crate::scalar::{int, rat, Rational};
use crate::trees::{EdgeTable, GmmParams, TreeTopology};

/// Rational strictly between 0 and 1 with denominator at most `max_den`.
pub fn unit<R: Rng + ?Sized>(rng: &mut R, max_den: i64) -> Rational {
    let q = rng.gen_range(2..=max_den.max(2));
    rat(rng.gen_range(1..q), q)
}

/// Rational in `[-bound, bound]` with denominator at most `max_den`.
pub fn signed<R: Rng + ?Sized>(rng: &mut R, bound: i64, max_den: i64) -> Rational {
    let q = rng.gen_range(1..=max_den.max(1));
    rat(rng.gen_range(-bound * q..=bound * q), q)
}

/// Strictly positive table with small integer weights.
pub fn distribution<R: Rng + ?Sized>(rng: &mut R, space: StateSpace) -> DiscreteDistribution {
    let w: Vec<i64> = (0..space.size()).map(|_| rng.gen_range(1..=30)).collect();
    let total: i64 = w.iter().sum();
    DiscreteDistribution::new(space, w.iter().map(|&k| rat(k, total)).collect(), Mode::Probabilistic)
        .expect("normalized table")
}

/// Arbitrary moment vector: `mu_0 = 1`, everything else random. Most such
/// vectors are not moments of a probability distribution.
pub fn algebraic_moments<R: Rng + ?Sized>(rng: &mut R, space: StateSpace) -> CoordinateVector {
    CoordinateVector::from_fn(space, CoordinateSystem::Moments, |x| {
        if x.iter().all(|&k| k == 0) {
            int(1)
        } else {
            signed(rng, 3, 7)
        }
    })
}

/// Distribution that factors over the blocks of `pi0`, each block getting
/// its own random joint table.
pub fn block_factorizing<R: Rng + ?Sized>(rng: &mut R, space: &StateSpace, pi0: &SetPartition) -> DiscreteDistribution {
    let blocks = pi0.blocks();
    let factors: Vec<DiscreteDistribution> = blocks
        .iter()
        .map(|b| distribution(rng, space.restrict(b).expect("block of variables")))
        .collect();
    let table = space
        .states()
        .map(|x| {
            blocks
                .iter()
                .zip(&factors)
                .map(|(b, f)| {
                    let y: Vec<usize> = b.iter().map(|&i| x[i]).collect();
                    f.prob(&y).clone()
                })
                .product()
        })
        .collect();
    DiscreteDistribution::new(space.clone(), table, Mode::Probabilistic).expect("product of tables")
}

/// Moves mass `eps` between two random states, keeping the table valid.
pub fn perturb<R: Rng + ?Sized>(rng: &mut R, d: &DiscreteDistribution, eps: &Rational) -> DiscreteDistribution {
    let mut table = d.table().to_vec();
    let size = table.len();
    let i = rng.gen_range(0..size);
    let mut j = rng.gen_range(0..size - 1);
    if j >= i {
        j += 1;
    }
    let delta = eps.clone().min(table[j].clone() / int(2));
    table[i] += &delta;
    table[j] -= &delta;
    DiscreteDistribution::new(d.space().clone(), table, d.mode()).expect("mass preserved")
}

fn edge_table<R: Rng + ?Sized>(rng: &mut R) -> EdgeTable {
    let (p0, p1) = (unit(rng, 9), unit(rng, 9));
    [[int(1) - &p0, p0], [int(1) - &p1, p1]]
}

/// Random strictly positive parameters for the model on a rooted tree.
pub fn gmm_params<R: Rng + ?Sized>(rng: &mut R, tree: &TreeTopology) -> GmmParams {
    let root = tree.root().expect("rooted tree");
    let parent = tree.parents_from(root);
    let p = unit(rng, 9);
    let edges = (0..tree.n_nodes())
        .filter_map(|v| parent[v].map(|u| (u, v, edge_table(rng))))
        .collect();
    GmmParams::new(tree, [int(1) - &p, p], edges).expect("valid parameters")
}

pub fn secant<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SecantParams {
    let t = unit(rng, 12);
    let a = (0..n).map(|_| unit(rng, 9)).collect();
    let b = (0..n).map(|_| unit(rng, 9)).collect();
    SecantParams::new(t, a, b).expect("n > 0")
}

/// Random emission over `arity` values; the value map is `0, 1, ...` when
/// `arity` is 2 and random distinct integers otherwise.
pub fn emission<R: Rng + ?Sized>(rng: &mut R, arity: usize) -> Emission {
    if arity == 2 {
        return Emission::binary(unit(rng, 9), unit(rng, 9));
    }
    let mut values: Vec<i64> = Vec::new();
    while values.len() < arity {
        let v = rng.gen_range(-4..=6);
        if !values.contains(&v) {
            values.push(v);
        }
    }
    let row = |rng: &mut R| {
        let w: Vec<i64> = (0..arity).map(|_| rng.gen_range(1..=9)).collect();
        let s: i64 = w.iter().sum();
        w.into_iter().map(|k| rat(k, s)).collect::<Vec<_>>()
    };
    Emission {
        values: values.into_iter().map(int).collect(),
        table: [row(rng), row(rng)],
    }
}

/// Random chain with binary or, where `arities` says so, larger emissions.
pub fn hmm<R: Rng + ?Sized>(rng: &mut R, arities: &[usize]) -> HmmParams {
    loop {
        let p = unit(rng, 9);
        let transitions = (1..arities.len()).map(|_| edge_table(rng)).collect();
        let emissions = arities.iter().map(|&r| emission(rng, r)).collect();
        if let Ok(h) = HmmParams::new([int(1) - &p, p], transitions, emissions) {
            if h.b().is_ok() {
                return h;
            }
        }
    }
}

/// Homogeneous chain with the given number of steps and one shared
/// emission.
pub fn homogeneous_hmm<R: Rng + ?Sized>(rng: &mut R, n: usize, arity: usize) -> HmmParams {
    loop {
        let e = emission(rng, arity);
        if let Ok(h) = HmmParams::homogeneous(n, unit(rng, 9), unit(rng, 9), e) {
            if h.b().is_ok() {
                return h;
            }
        }
    }
}
