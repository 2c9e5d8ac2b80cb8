use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lattice::LatticeFamily;
use crate::lcumulant::{to_lcumulants_with, LCumulantSystem};
use crate::moments::{central_moments, multiset_of, variances, CoordinateSystem, CoordinateVector, StateSpace};
use crate::radical::Radical;
use crate::scalar::{Rational, Scalar};
use crate::trees::TreeTopology;

fn check_tree_input<S: Scalar>(mv: &CoordinateVector<S>, tree: &TreeTopology) -> Result<()> {
    if mv.system() != &CoordinateSystem::Moments {
        return Err(Error::InvalidArgument(format!("expected moments, got {}", mv.system())));
    }
    if !mv.space().is_binary() {
        return Err(Error::Unsupported(
            "tree cumulants are defined for binary variables only".into(),
        ));
    }
    if mv.space().n_vars() != tree.n_leaves() {
        return Err(Error::GroundMismatch(format!(
            "{} variables for a tree with {} leaves",
            mv.space().n_vars(),
            tree.n_leaves()
        )));
    }
    Ok(())
}

/// Tree cumulants as the Mobius sum over tree partitions of each leaf set.
pub fn tree_cumulants<S: Scalar>(mv: &CoordinateVector<S>, tree: &TreeTopology) -> Result<CoordinateVector<S>> {
    check_tree_input(mv, tree)?;
    let sys = LCumulantSystem::new(LatticeFamily::tree(tree.clone()), mv.space().clone())?;
    to_lcumulants_with(&sys, mv)
}

/// Tree cumulants from central moments: `t_i = mu_i` and, for `|I| >= 2`,
/// the Mobius sum restricted to partitions without singleton blocks. On a
/// caterpillar those are the interval partitions of `I` in spine order, with
/// weight `(-1)^{|pi| - 1}`.
pub fn tree_cumulants_central<S: Scalar>(mv: &CoordinateVector<S>, tree: &TreeTopology) -> Result<CoordinateVector<S>> {
    check_tree_input(mv, tree)?;
    let cm = central_moments(mv)?;
    let n = tree.n_leaves();
    let spine = tree.spine_leaf_order();
    let sys = LCumulantSystem::new(LatticeFamily::tree(tree.clone()), mv.space().clone())?;
    let subset_value = |leaves: &[usize]| {
        let mut x = vec![0; n];
        for &l in leaves {
            x[l] = 1;
        }
        cm.get(&x).clone()
    };
    let mut values = Vec::with_capacity(mv.space().size());
    for x in mv.space().states() {
        let leaves = multiset_of(&x);
        let value = match leaves.len() {
            0 => S::zero(),
            1 => mv.get(&x).clone(),
            d => match &spine {
                Some(order) => {
                    let seq: Vec<usize> = order.iter().copied().filter(|l| leaves.contains(l)).collect();
                    let mut acc = S::zero();
                    // compositions of d into parts of size at least two
                    for cuts in 0u32..(1 << (d - 1)) {
                        let mut blocks: Vec<&[usize]> = Vec::new();
                        let mut start = 0;
                        for k in 1..d {
                            if cuts & (1 << (k - 1)) != 0 {
                                blocks.push(&seq[start..k]);
                                start = k;
                            }
                        }
                        blocks.push(&seq[start..]);
                        if blocks.iter().any(|b| b.len() < 2) {
                            continue;
                        }
                        let sign = if blocks.len() % 2 == 1 { S::one() } else { -S::one() };
                        acc = acc + blocks.iter().fold(sign, |p, b| p * subset_value(b));
                    }
                    acc
                }
                None => {
                    let lat = sys.lattice(&leaves)?;
                    let mut acc = S::zero();
                    for (pi, m) in lat.elements().iter().zip(lat.mobius_to_top()) {
                        if pi.has_singleton() || num_traits::Zero::is_zero(m) {
                            continue;
                        }
                        let prod = pi.blocks().iter().fold(S::from_rational(m), |p, b| {
                            let ls: Vec<usize> = b.iter().map(|&pos| leaves[pos]).collect();
                            p * subset_value(&ls)
                        });
                        acc = acc + prod;
                    }
                    acc
                }
            },
        };
        values.push(value);
    }
    CoordinateVector::new(mv.space().clone(), CoordinateSystem::tree(tree.clone()), values)
}

/// Subset moments `mu_I = E[prod_{i in I} X_i]` of any moment vector,
/// repackaged over a binary space so tree cumulants can be taken even when
/// some variables have more than two states.
pub fn subset_moments<S: Scalar>(mv: &CoordinateVector<S>) -> Result<CoordinateVector<S>> {
    if mv.system() != &CoordinateSystem::Moments {
        return Err(Error::InvalidArgument(format!("expected moments, got {}", mv.system())));
    }
    let n = mv.space().n_vars();
    let space = StateSpace::binary(n);
    let values = space.states().map(|x| mv.get(&x).clone()).collect();
    CoordinateVector::new(space, CoordinateSystem::Moments, values)
}

fn check_normalize_input<S: Scalar>(tv: &CoordinateVector<S>, mv: &CoordinateVector<S>) -> Result<Vec<S>> {
    if tv.space().n_vars() != mv.space().n_vars() || !tv.space().is_binary() {
        return Err(Error::GroundMismatch(
            "tree cumulants and moments over different variables".into(),
        ));
    }
    let vars = variances(mv)?;
    if let Some(i) = vars.iter().position(|v| v.is_near_zero(0.0) || v.to_f64() < 0.0) {
        return Err(Error::Degenerate(format!(
            "variable {} has nonpositive variance",
            i + 1
        )));
    }
    Ok(vars)
}

/// Normalized tree cumulants `t_I / prod_{i in I} sqrt(k_ii)`, exact, keyed by
/// 0-based leaf set. Order-one entries are skipped.
pub fn normalized_tree_cumulants(
    tv: &CoordinateVector<Rational>,
    mv: &CoordinateVector<Rational>,
) -> Result<BTreeMap<Vec<usize>, Radical>> {
    let vars = check_normalize_input(tv, mv)?;
    let scales: Vec<Radical> = vars.iter().map(|v| Radical::sqrt(v)?.recip()).collect::<Result<_>>()?;
    let mut out = BTreeMap::new();
    for (x, t) in tv.iter() {
        let leaves = multiset_of(&x);
        if leaves.len() < 2 {
            continue;
        }
        let v = leaves
            .iter()
            .fold(Radical::from_rational(t.clone()), |acc, &i| &acc * &scales[i]);
        out.insert(leaves, v);
    }
    Ok(out)
}

/// Float version of [`normalized_tree_cumulants`].
pub fn normalized_tree_cumulants_f64(
    tv: &CoordinateVector<f64>,
    mv: &CoordinateVector<f64>,
) -> Result<BTreeMap<Vec<usize>, f64>> {
    let vars = check_normalize_input(tv, mv)?;
    let mut out = BTreeMap::new();
    for (x, t) in tv.iter() {
        let leaves = multiset_of(&x);
        if leaves.len() < 2 {
            continue;
        }
        out.insert(leaves.clone(), leaves.iter().fold(*t, |acc, &i| acc / vars[i].sqrt()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lcumulant::cumulants;
    use crate::moments::{moments_from_distribution, DiscreteDistribution, Mode};
    use crate::scalar::{int, rat};
    use rand::{Rng, SeedableRng};

    fn random_binary(n: usize, seed: u64) -> DiscreteDistribution {
        let space = StateSpace::binary(n);
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let raw: Vec<i64> = (0..space.size()).map(|_| rng.gen_range(1..40)).collect();
        let total: i64 = raw.iter().sum();
        DiscreteDistribution::new(space, raw.iter().map(|&w| rat(w, total)).collect(), Mode::Probabilistic).unwrap()
    }

    fn trees() -> Vec<TreeTopology> {
        let mut v = vec![
            TreeTopology::quartet(),
            TreeTopology::star(4).unwrap(),
            TreeTopology::star(5).unwrap(),
        ];
        v.extend((2..=5).map(|n| TreeTopology::caterpillar(n).unwrap()));
        v.push(TreeTopology::parse_newick("((1,2)u,3,(4,5)w)r;").unwrap());
        v
    }

    #[test]
    fn both_paths_agree() {
        for (k, t) in trees().into_iter().enumerate() {
            let m = moments_from_distribution(&random_binary(t.n_leaves(), k as u64));
            assert_eq!(
                tree_cumulants(&m, &t).unwrap(),
                tree_cumulants_central(&m, &t).unwrap(),
                "{t:?}"
            );
        }
    }

    #[test]
    fn caterpillar_four_goldens() {
        let t = TreeTopology::caterpillar(4).unwrap();
        let d = random_binary(4, 11);
        let m = moments_from_distribution(&d);
        let tc = tree_cumulants(&m, &t).unwrap();
        let cm = central_moments(&m).unwrap();
        let c = |l: &[usize]| cm.label(l).clone();
        assert_eq!(tc.label(&[1, 2, 3, 4]), &(c(&[1, 2, 3, 4]) - c(&[1, 2]) * c(&[3, 4])));
        for l in [vec![1, 3], vec![2, 4], vec![1, 2, 4], vec![2, 3, 4]] {
            assert_eq!(tc.label(&l), &c(&l));
        }
        assert_eq!(tc.label(&[3]), m.label(&[3]));
        let k = cumulants(&m).unwrap();
        let kk = |l: &[usize]| k.label(l).clone();
        assert_eq!(
            tc.label(&[1, 2, 3, 4]),
            &(kk(&[1, 2, 3, 4]) + kk(&[1, 3]) * kk(&[2, 4]) + kk(&[1, 4]) * kk(&[2, 3]))
        );
    }

    #[test]
    fn product_distribution_has_no_higher_tree_cumulants() {
        let f: Vec<Vec<Rational>> = (1..=4).map(|k| vec![rat(k, 7), rat(7 - k, 7)]).collect();
        let d = DiscreteDistribution::product(StateSpace::binary(4), &f).unwrap();
        let tc = tree_cumulants(&moments_from_distribution(&d), &TreeTopology::quartet()).unwrap();
        for (x, v) in tc.iter() {
            if x.iter().sum::<usize>() >= 2 {
                assert_eq!(v, &int(0));
            }
        }
    }

    #[test]
    fn rejects_non_binary() {
        let d = DiscreteDistribution::uniform(StateSpace::new(&[3, 2]).unwrap());
        assert!(tree_cumulants(&moments_from_distribution(&d), &TreeTopology::caterpillar(2).unwrap()).is_err());
    }

    #[test]
    fn normalized_pairs_are_correlations() {
        let t = TreeTopology::quartet();
        let d = random_binary(4, 12);
        let m = moments_from_distribution(&d);
        let tc = tree_cumulants(&m, &t).unwrap();
        let norm = normalized_tree_cumulants(&tc, &m).unwrap();
        for i in 0..4 {
            for j in i + 1..4 {
                let corr2 = d.covariance(i, j) * d.covariance(i, j) / (d.variance(i) * d.variance(j));
                let v = &norm[&vec![i, j]];
                assert_eq!(v.square(), corr2);
                assert_eq!(v.signum(), d.covariance(i, j).cmp(&int(0)));
            }
        }
        let f = normalized_tree_cumulants_f64(&tc.to_f64(), &m.to_f64()).unwrap();
        for (k, v) in &norm {
            assert!((f[k] - v.to_f64()).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_variance_is_an_error() {
        let d = DiscreteDistribution::point_mass(StateSpace::binary(2), &[1, 0]).unwrap();
        let m = moments_from_distribution(&d);
        let t = TreeTopology::caterpillar(2).unwrap();
        let tc = tree_cumulants(&m, &t).unwrap();
        assert!(matches!(normalized_tree_cumulants(&tc, &m), Err(Error::Degenerate(_))));
    }
}
