use std::collections::BTreeMap;

use rand_xoshiro::rand_core::RngCore;
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;

use lcum_core::io::vector_from_json;
use lcum_core::lattice::{check_condition, Condition};
use lcum_core::lcumulant::{cumulants, to_lcumulants};
use lcum_core::models::{
    gmm_distribution, hmm_distribution, hmm_normalized_tree_cumulants, secant_moments, secant_tree_cumulants,
    verify_homogeneous_identities, verify_homogeneous_identities_f64, verify_tree_splits, HmmIdentityReport,
    SecantParams,
};
use lcum_core::moments::moments_from_distribution;
use lcum_core::scalar::int;
use lcum_core::trees::{
    contracted_tree_cumulants, gmm_tree_cumulants, normalized_tree_cumulants, normalized_tree_cumulants_f64,
    subset_moments, tree_cumulants, GmmParams,
};
use lcum_core::{
    sample, CoordinateVector, Error, GroundSet, LatticeFamily, PartitionLattice, Radical, Rational, Result,
    TreeTopology,
};

use crate::commands::{label, rng, Inputs};
use crate::report::Check;
use crate::{Cli, VerifyCommand};

const FLOAT_TOL: f64 = 1e-12;

/// Runs `f` once per draw with its own generator. Seeds come from the master
/// generator up front so the result does not depend on thread scheduling.
fn per_draw<F>(seed: u64, draws: usize, f: F) -> Result<Vec<Check>>
where
    F: Fn(&mut SplitMix64) -> Result<Vec<Check>> + Sync,
{
    let mut master = rng(seed);
    let seeds: Vec<u64> = (0..draws).map(|_| master.next_u64()).collect();
    let batches: Vec<Vec<Check>> = seeds.par_iter().map(|&s| f(&mut rng(s))).collect::<Result<_>>()?;
    Ok(batches
        .into_iter()
        .enumerate()
        .flat_map(|(k, b)| b.into_iter().map(move |c| c.prefixed(&format!("draw{k}/"))))
        .collect())
}

fn abs(r: Rational) -> Rational {
    if r < int(0) {
        -r
    } else {
        r
    }
}

fn max_diff(a: &CoordinateVector, b: &CoordinateVector) -> Result<Rational> {
    if a.space() != b.space() {
        return Err(Error::GroundMismatch("vectors live on different spaces".into()));
    }
    Ok(a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| abs(x - y))
        .max()
        .unwrap_or_else(|| int(0)))
}

/// `a|a| - b|b|`: zero iff the two radicals are equal, and rational.
fn signed_square(r: &Radical) -> Rational {
    let sq = r.square();
    if r.signum() == std::cmp::Ordering::Less {
        -sq
    } else {
        sq
    }
}

fn radical_map_residual(a: &BTreeMap<Vec<usize>, Radical>, b: &BTreeMap<Vec<usize>, Radical>) -> Result<Rational> {
    if a.len() != b.len() || a.keys().ne(b.keys()) {
        return Err(Error::InvalidArgument(
            "normalized coordinates have different index sets".into(),
        ));
    }
    Ok(a.values()
        .zip(b.values())
        .map(|(x, y)| abs(signed_square(x) - signed_square(y)))
        .max()
        .unwrap_or_else(|| int(0)))
}

fn split_checks(tv: &CoordinateVector, tree: &TreeTopology) -> Result<Vec<Check>> {
    Ok(verify_tree_splits(tv, tree)?
        .into_iter()
        .map(|r| {
            let name = format!("split-binomials/{}|{}", label(&r.side_a), label(&r.side_b));
            let c = Check::exact(name, &r.max_residual).with_detail(format!("{} binomials", r.checked));
            match r.witness {
                Some((i, j, i2, j2)) if !c.pass => c.with_detail(format!(
                    "worst at I={} J={} I'={} J'={}",
                    label(&i),
                    label(&j),
                    label(&i2),
                    label(&j2)
                )),
                _ => c,
            }
        })
        .collect())
}

fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n))
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect()
}

fn indicator(n: usize, idx: &[usize]) -> Vec<usize> {
    let mut x = vec![0; n];
    for &i in idx {
        x[i] = 1;
    }
    x
}

fn secant_draw(p: &SecantParams) -> Result<Vec<Check>> {
    let n = p.n();
    let mut out = Vec::new();
    let m = secant_moments(p);
    let cat = TreeTopology::caterpillar(n)?;
    let closed = secant_tree_cumulants(p)?;
    out.push(Check::exact(
        "caterpillar-closed-form",
        &max_diff(&tree_cumulants(&m, &cat)?, &closed)?,
    ));

    let t = &p.t;
    let var = t * (int(1) - t);
    let d: Vec<Rational> = (0..n).map(|i| &p.b[i] - &p.a[i]).collect();
    let prod = |idx: &[usize]| idx.iter().map(|&i| d[i].clone()).product::<Rational>();
    let k = cumulants(&m)?;
    let coef = [int(1), int(1) - int(2) * t, int(6) * t * t - int(6) * t + int(1)];
    let mut worst = int(0);
    for size in 2..=n.min(4) {
        for idx in subsets_of_size(n, size) {
            let expect = &var * &coef[size - 2] * prod(&idx);
            worst = worst.max(abs(k.get(&indicator(n, &idx)) - expect));
        }
    }
    out.push(Check::exact("classical-cumulants", &worst));

    if n >= 4 {
        let oc = to_lcumulants(&m, &LatticeFamily::OneCluster)?;
        let c = &var * (int(3) * t * t - int(3) * t + int(1));
        let mut worst = int(0);
        for idx in subsets_of_size(n, 4) {
            worst = worst.max(abs(oc.get(&indicator(n, &idx)) - &c * prod(&idx)));
        }
        out.push(Check::exact("one-cluster-top", &worst));
    }

    let (star, params) = p.star_model()?;
    let dm = moments_from_distribution(&gmm_distribution(&star, &params)?);
    out.push(Check::exact("star-model", &max_diff(&dm, &m)?));
    out.extend(split_checks(&closed, &cat)?);
    Ok(out)
}

fn table_residual(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| abs(x - y)).max().unwrap_or_else(|| int(0))
}

fn gmm_instance(tree: &TreeTopology, params: &GmmParams) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let dist = gmm_distribution(tree, params)?;
    let m = moments_from_distribution(&dist);
    let pipeline = tree_cumulants(&m, tree)?;
    if tree.is_trivalent() {
        out.push(Check::exact(
            "closed-form",
            &max_diff(&gmm_tree_cumulants(tree, params)?, &pipeline)?,
        ));
    } else {
        let (tstar, closed) = contracted_tree_cumulants(tree, params)?;
        let on_refinement = tree_cumulants(&m, &tstar)?;
        out.push(
            Check::exact("closed-form", &max_diff(&closed, &on_refinement)?).with_detail("on the trivalent refinement"),
        );
    }
    let root = params.root();
    let mut worst = int(0);
    let mut rerooted = 0;
    for v in 0..tree.n_nodes() {
        if v == root {
            continue;
        }
        let (t2, p2) = params.reroot(tree, v)?;
        let d2 = gmm_distribution(&t2, &p2)?;
        worst = worst.max(table_residual(d2.table(), dist.table()));
        rerooted += 1;
    }
    out.push(Check::exact("rooting-invariance", &worst).with_detail(format!("{rerooted} other roots")));
    out.extend(split_checks(&pipeline, tree)?);
    Ok(out)
}

fn hmm_closed_form(cli: &Cli, p: &lcum_core::models::HmmParams) -> Result<Check> {
    let m = moments_from_distribution(&hmm_distribution(p)?);
    let tree = p.tree()?;
    let closed = hmm_normalized_tree_cumulants(p)?;
    if cli.float {
        let mf = m.to_f64();
        let tv = tree_cumulants(&subset_moments(&mf)?, &tree)?;
        let pipe = normalized_tree_cumulants_f64(&tv, &mf)?;
        let worst = closed
            .iter()
            .map(|(k, v)| pipe.get(k).map_or(f64::INFINITY, |w| (v.to_f64() - w).abs()))
            .fold(0.0, f64::max);
        Ok(Check::float("closed-form", worst, FLOAT_TOL))
    } else {
        let tv = tree_cumulants(&subset_moments(&m)?, &tree)?;
        let pipe = normalized_tree_cumulants(&tv, &m)?;
        Ok(Check::exact("closed-form", &radical_map_residual(&closed, &pipe)?)
            .with_detail("residual of signed squares"))
    }
}

fn identity_check(r: &HmmIdentityReport) -> Check {
    let c = Check::float("homogeneous-identities", r.max_residual, FLOAT_TOL);
    Check {
        pass: c.pass && r.holds(),
        ..c
    }
    .with_detail(format!(
        "{} equalities ({} failed), {} sign conditions ({} failed)",
        r.equalities_checked, r.equality_failures, r.inequalities_checked, r.inequality_failures
    ))
}

fn homogeneous_draw(cli: &Cli, rng: &mut SplitMix64, n: usize, arity: usize) -> Result<Check> {
    let p = sample::homogeneous_hmm(rng, n, arity);
    let report = if cli.float {
        let m = moments_from_distribution(&hmm_distribution(&p)?).to_f64();
        let tv = tree_cumulants(&subset_moments(&m)?, &p.tree()?)?;
        verify_homogeneous_identities_f64(&normalized_tree_cumulants_f64(&tv, &m)?, n, FLOAT_TOL)?
    } else {
        verify_homogeneous_identities(&hmm_normalized_tree_cumulants(&p)?, n)?
    };
    Ok(identity_check(&report))
}

fn lattice_for(inputs: &mut Inputs, family: &crate::FamilyArgs, n: Option<usize>) -> Result<PartitionLattice> {
    let f = inputs.family(family)?;
    match &f {
        LatticeFamily::Tree(t) => PartitionLattice::build(f.clone(), GroundSet::simple(t.n_leaves())),
        _ => PartitionLattice::simple(f, n.ok_or_else(|| Error::InvalidArgument("--n is required".into()))?),
    }
}

fn default_tree(inputs: &mut Inputs, path: &Option<std::path::PathBuf>) -> Result<TreeTopology> {
    match path {
        Some(p) => inputs.tree(p),
        None => Ok(TreeTopology::quartet()),
    }
}

pub fn run(cli: &Cli, inputs: &mut Inputs, v: &VerifyCommand) -> Result<Vec<Check>> {
    match v {
        VerifyCommand::Secant { n, draws } => {
            if *n < 2 {
                return Err(Error::InvalidArgument("the secant suite needs --n >= 2".into()));
            }
            per_draw(cli.seed, draws.draws, |r| secant_draw(&sample::secant(r, *n)))
        }
        VerifyCommand::Gmm { tree, params, draws } => {
            let tree = default_tree(inputs, tree)?;
            match params {
                Some(p) => {
                    let (tree, params) = lcum_core::io::gmm_params_from_json(&tree, &inputs.json(p)?)?;
                    gmm_instance(&tree, &params)
                }
                None => per_draw(cli.seed, draws.draws, |r| {
                    gmm_instance(&tree, &sample::gmm_params(r, &tree))
                }),
            }
        }
        VerifyCommand::SplitBinomials { input, tree, draws } => match input {
            Some(path) => {
                let tv = vector_from_json(&inputs.json(path)?)?;
                let t = tv
                    .system()
                    .family()
                    .and_then(LatticeFamily::tree_topology)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument("input must hold tree cumulants".into()))?;
                split_checks(&tv, &t)
            }
            None => {
                let tree = default_tree(inputs, tree)?;
                per_draw(cli.seed, draws.draws, |r| {
                    let params = sample::gmm_params(r, &tree);
                    let m = moments_from_distribution(&gmm_distribution(&tree, &params)?);
                    split_checks(&tree_cumulants(&m, &tree)?, &tree)
                })
            }
        },
        VerifyCommand::Hmm {
            n,
            arity,
            homogeneous_n,
            draws,
        } => {
            if *n == 0 || *arity < 2 {
                return Err(Error::InvalidArgument("need --n >= 1 and --arity >= 2".into()));
            }
            per_draw(cli.seed, draws.draws, |r| {
                let p = sample::hmm(r, &vec![*arity; *n]);
                Ok(vec![
                    hmm_closed_form(cli, &p)?,
                    homogeneous_draw(cli, r, *homogeneous_n, *arity)?,
                ])
            })
        }
        VerifyCommand::HmmIdentities { n, arity, draws } => {
            if *arity < 2 {
                return Err(Error::InvalidArgument("need --arity >= 2".into()));
            }
            per_draw(cli.seed, draws.draws, |r| {
                Ok(vec![homogeneous_draw(cli, r, *n, *arity)?])
            })
        }
        VerifyCommand::Weisner { family, n } => {
            let lat = lattice_for(inputs, family, *n)?;
            let top = lat.top_id();
            let mut worst = int(0);
            let mut pairs = 0usize;
            let mut witness = None;
            for p0 in (0..lat.len()).filter(|&i| i != top) {
                for dl in (0..lat.len()).filter(|&j| lat.leq(j, p0)) {
                    let s = abs(lat.weisner_sum(lat.element(p0), lat.element(dl))?);
                    pairs += 1;
                    if s > worst {
                        witness = Some(format!("pi0={} delta={}", lat.element(p0), lat.element(dl)));
                        worst = s;
                    }
                }
            }
            let c = Check::exact(format!("weisner/{}/{}", lat.family(), lat.ground_size()), &worst)
                .with_detail(format!("{pairs} pairs"));
            Ok(vec![match witness {
                Some(w) => c.with_detail(w),
                None => c,
            }])
        }
        VerifyCommand::Conditions { family, n, which } => {
            let f = inputs.family(family)?;
            let d = match &f {
                LatticeFamily::Tree(t) => t.n_leaves(),
                _ => n.ok_or_else(|| Error::InvalidArgument("--n is required".into()))?,
            };
            let conds = match which {
                Some(w) => vec![w.parse::<Condition>()?],
                None => vec![Condition::C0, Condition::C1, Condition::C2, Condition::C3],
            };
            conds
                .into_iter()
                .map(|c| {
                    let outcome = check_condition(&f, c, d)?;
                    let check = Check::flag(format!("{c}/{f}/{d}"), outcome.holds() == Some(true));
                    Ok(match &outcome {
                        lcum_core::lattice::ConditionOutcome::Holds => check,
                        lcum_core::lattice::ConditionOutcome::Fails { witness } => check.with_detail(witness.clone()),
                        lcum_core::lattice::ConditionOutcome::NotChecked { reason } => {
                            check.with_detail(format!("not checked: {reason}"))
                        }
                    })
                })
                .collect()
        }
    }
}
