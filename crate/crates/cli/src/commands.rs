use std::fs;
use std::path::Path;

use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::SplitMix64;
use serde_json::{json, Map, Value};

use lcum_core::io::{
    distribution_to_json, gmm_params_from_json, gmm_params_to_json, hmm_from_json, hmm_to_json, parse_json,
    secant_from_json, secant_to_json, vector_from_json, vector_to_json, vector_to_json_f64,
};
use lcum_core::lcumulant::{from_lcumulants, to_lcumulants};
use lcum_core::models::{
    gmm_distribution, hmm_distribution, hmm_normalized_tree_cumulants, secant_moments, secant_tree_cumulants,
    HmmParams, SecantParams,
};
use lcum_core::moments::{central_moments, distribution_from_moments, moments_from_distribution, SystemKind};
use lcum_core::scalar::parse_rational;
use lcum_core::trees::{
    contracted_tree_cumulants, gmm_tree_cumulants, normalized_tree_cumulants, normalized_tree_cumulants_f64,
    subset_moments, tree_cumulants,
};
use lcum_core::{
    sample, CoordinateSystem, CoordinateVector, Error, GroundSet, LatticeFamily, PartitionLattice, Radical, Rational,
    Result, TreeTopology,
};

use crate::report::{InputDigest, RunReport};
use crate::{Cli, Command, FamilyArgs, ModelCommand, Outcome};

/// Reads input files and folds their bytes into the report digest.
pub struct Inputs {
    digest: InputDigest,
}

impl Inputs {
    pub fn read(&mut self, path: &Path) -> Result<String> {
        let bytes =
            fs::read(path).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        self.digest.add(&bytes);
        String::from_utf8(bytes).map_err(|_| Error::InvalidArgument(format!("{} is not UTF-8", path.display())))
    }

    pub fn json(&mut self, path: &Path) -> Result<Value> {
        let text = self.read(path)?;
        parse_json(&path.display().to_string(), &text)
    }

    pub fn tree(&mut self, path: &Path) -> Result<TreeTopology> {
        let text = self.read(path)?;
        TreeTopology::parse_newick(&text).map_err(|e| match e {
            Error::Parse {
                line, column, message, ..
            } => Error::Parse {
                what: path.display().to_string(),
                line,
                column,
                message,
            },
            other => other,
        })
    }

    pub fn family(&mut self, args: &FamilyArgs) -> Result<LatticeFamily> {
        match (&args.family, &args.tree) {
            (_, Some(path)) => {
                if let Some(f) = &args.family {
                    if !f.eq_ignore_ascii_case("tree") {
                        return Err(Error::InvalidArgument(format!("--tree given with --family {f}")));
                    }
                }
                Ok(LatticeFamily::tree(self.tree(path)?))
            }
            (Some(f), None) if f.eq_ignore_ascii_case("tree") => {
                Err(Error::InvalidArgument("the tree family needs --tree".into()))
            }
            (Some(f), None) => f.parse(),
            (None, None) => Err(Error::InvalidArgument("give --family or --tree".into())),
        }
    }
}

pub fn rng(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values serialize")
}

fn ok(v: Value) -> Result<Outcome> {
    Ok(Outcome {
        stdout: pretty(&v),
        pass: true,
    })
}

pub fn run(cli: &Cli, args: &[String]) -> Result<Outcome> {
    let mut inputs = Inputs {
        digest: InputDigest::new(args),
    };
    match &cli.command {
        Command::Lattice(a) => {
            let family = inputs.family(&a.family)?;
            let lat = match &family {
                LatticeFamily::Tree(t) => PartitionLattice::build(family.clone(), GroundSet::simple(t.n_leaves()))?,
                f => {
                    let n = a.n.ok_or_else(|| Error::InvalidArgument("--n is required".into()))?;
                    PartitionLattice::simple(f.clone(), n)?
                }
            };
            ok(serde_json::to_value(lat.dump()).expect("dump serializes"))
        }
        Command::Transform(a) => transform(cli, &mut inputs, a),
        Command::Model(m) => model(cli, &mut inputs, m),
        Command::Verify(v) => {
            let results = crate::suites::run(cli, &mut inputs, v)?;
            let digest = std::mem::take(&mut inputs.digest).finish();
            let report = RunReport::new(args.to_vec(), digest, results);
            Ok(Outcome {
                pass: report.summary.pass,
                stdout: serde_json::to_string_pretty(&report).expect("report serializes"),
            })
        }
    }
}

fn emit_vector(cli: &Cli, v: &CoordinateVector) -> Result<Outcome> {
    if cli.float {
        ok(vector_to_json_f64(&v.to_f64()))
    } else {
        ok(vector_to_json(v))
    }
}

fn kind_of(system: &CoordinateSystem) -> SystemKind {
    match system {
        CoordinateSystem::Probabilities => SystemKind::Probabilities,
        CoordinateSystem::Moments => SystemKind::Moments,
        CoordinateSystem::CentralMoments => SystemKind::CentralMoments,
        CoordinateSystem::Cumulants(LatticeFamily::Full) => SystemKind::Cumulants,
        CoordinateSystem::Cumulants(LatticeFamily::Tree(_)) => SystemKind::TreeCumulants,
        CoordinateSystem::Cumulants(_) => SystemKind::LCumulants,
    }
}

fn transform(cli: &Cli, inputs: &mut Inputs, a: &crate::TransformArgs) -> Result<Outcome> {
    let input = vector_from_json(&inputs.json(&a.input)?)?;
    if let Some(from) = &a.from {
        let want: SystemKind = from.parse()?;
        if want != kind_of(input.system()) {
            return Err(Error::InvalidArgument(format!(
                "input holds {}, not {from}",
                input.system()
            )));
        }
    }
    let to: SystemKind = a.to.parse()?;
    // every route passes through moments
    let moments = match input.system() {
        CoordinateSystem::Probabilities => moments_from_distribution(&distribution_from_vector(&input)?),
        CoordinateSystem::Moments => input.clone(),
        CoordinateSystem::CentralMoments => {
            return Err(Error::Unsupported("central moments do not determine the means".into()))
        }
        CoordinateSystem::Cumulants(_) => from_lcumulants(&input)?,
    };
    let target_family = match to {
        SystemKind::Cumulants => Some(LatticeFamily::Full),
        SystemKind::LCumulants => {
            let f = inputs.family(&a.family)?;
            if matches!(f, LatticeFamily::Tree(_)) {
                return Err(Error::InvalidArgument("use --to treecumulants for trees".into()));
            }
            Some(f)
        }
        SystemKind::TreeCumulants => {
            let path = a
                .family
                .tree
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("--to treecumulants needs --tree".into()))?;
            Some(LatticeFamily::tree(inputs.tree(path)?))
        }
        _ => None,
    };
    match (to, target_family) {
        (SystemKind::Probabilities, _) => {
            let d = distribution_from_moments(&moments)?;
            if cli.float {
                emit_vector(
                    cli,
                    &CoordinateVector::new(d.space().clone(), CoordinateSystem::Probabilities, d.table().to_vec())?,
                )
            } else {
                ok(distribution_to_json(&d))
            }
        }
        (SystemKind::Moments, _) => emit_vector(cli, &moments),
        (SystemKind::CentralMoments, _) => {
            if cli.float {
                ok(vector_to_json_f64(&central_moments(&moments.to_f64())?))
            } else {
                ok(vector_to_json(&central_moments(&moments)?))
            }
        }
        (_, Some(family)) => {
            if cli.float {
                ok(vector_to_json_f64(&to_lcumulants(&moments.to_f64(), &family)?))
            } else {
                ok(vector_to_json(&to_lcumulants(&moments, &family)?))
            }
        }
        (other, None) => Err(Error::InvalidArgument(format!("cannot produce {other:?}"))),
    }
}

fn distribution_from_vector(v: &CoordinateVector) -> Result<lcum_core::DiscreteDistribution> {
    let mode = if v.values().iter().any(|p| p < &Rational::from_integer(0.into())) {
        lcum_core::Mode::Algebraic
    } else {
        lcum_core::Mode::Probabilistic
    };
    lcum_core::DiscreteDistribution::new(v.space().clone(), v.values().to_vec(), mode)
}

fn parse_list(s: &str) -> Result<Vec<Rational>> {
    s.split(',').map(parse_rational).collect()
}

fn secant_params(cli: &Cli, inputs: &mut Inputs, a: &crate::SecantArgs) -> Result<SecantParams> {
    if let Some(p) = &a.params {
        return secant_from_json(&inputs.json(p)?);
    }
    let given_n =
        a.a.as_ref()
            .map(|s| s.split(',').count())
            .or(a.b.as_ref().map(|s| s.split(',').count()))
            .or(a.n)
            .ok_or_else(|| Error::InvalidArgument("give --n, --a/--b or --params".into()))?;
    if let Some(n) = a.n {
        if n != given_n {
            return Err(Error::InvalidArgument(format!("--n {n} but {given_n} component means")));
        }
    }
    let random = sample::secant(&mut rng(cli.seed), given_n);
    let t = a.t.as_deref().map(parse_rational).transpose()?.unwrap_or(random.t);
    let av = a.a.as_deref().map(parse_list).transpose()?.unwrap_or(random.a);
    let bv = a.b.as_deref().map(parse_list).transpose()?.unwrap_or(random.b);
    SecantParams::new(t, av, bv)
}

fn hmm_params(cli: &Cli, inputs: &mut Inputs, a: &crate::HmmArgs) -> Result<HmmParams> {
    if let Some(p) = &a.params {
        return hmm_from_json(&inputs.json(p)?);
    }
    if a.n == 0 || a.arity < 2 {
        return Err(Error::InvalidArgument("need --n >= 1 and --arity >= 2".into()));
    }
    let mut r = rng(cli.seed);
    Ok(if a.homogeneous {
        sample::homogeneous_hmm(&mut r, a.n, a.arity)
    } else {
        sample::hmm(&mut r, &vec![a.arity; a.n])
    })
}

/// Normalized coordinates as `{ "12": { "exact": "c*sqrt(r)", "value": f } }`.
pub fn normalized_json(map: &std::collections::BTreeMap<Vec<usize>, Radical>) -> Value {
    let mut out = Map::new();
    for (k, v) in map {
        out.insert(label(k), json!({"exact": v.to_string(), "value": v.to_f64()}));
    }
    Value::Object(out)
}

pub fn label(idx: &[usize]) -> String {
    let parts: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
    if idx.iter().any(|&i| i >= 9) {
        parts.join(",")
    } else {
        parts.concat()
    }
}

fn model(cli: &Cli, inputs: &mut Inputs, m: &ModelCommand) -> Result<Outcome> {
    match m {
        ModelCommand::Gmm(a) => {
            let tree = inputs.tree(&a.tree)?;
            let (tree, params) = match &a.params {
                Some(p) => gmm_params_from_json(&tree, &inputs.json(p)?)?,
                None => {
                    let p = sample::gmm_params(&mut rng(cli.seed), &tree);
                    (tree, p)
                }
            };
            let dist = || gmm_distribution(&tree, &params);
            match a.emit.as_str() {
                "distribution" => ok(distribution_to_json(&dist()?)),
                "moments" => emit_vector(cli, &moments_from_distribution(&dist()?)),
                "treecumulants" => {
                    let m = moments_from_distribution(&dist()?);
                    if cli.float {
                        ok(vector_to_json_f64(&tree_cumulants(&m.to_f64(), &tree)?))
                    } else {
                        ok(vector_to_json(&tree_cumulants(&m, &tree)?))
                    }
                }
                "closedform" => {
                    let v = if tree.is_trivalent() {
                        gmm_tree_cumulants(&tree, &params)?
                    } else {
                        contracted_tree_cumulants(&tree, &params)?.1
                    };
                    emit_vector(cli, &v)
                }
                "params" => ok(gmm_params_to_json(&tree, &params)),
                other => Err(Error::InvalidArgument(format!("unknown --emit {other:?}"))),
            }
        }
        ModelCommand::Secant(a) => {
            let p = secant_params(cli, inputs, a)?;
            match a.emit.as_str() {
                "moments" => emit_vector(cli, &secant_moments(&p)),
                "treecumulants" => {
                    let t = TreeTopology::caterpillar(p.n())?;
                    emit_vector(cli, &tree_cumulants(&secant_moments(&p), &t)?)
                }
                "closedform" => emit_vector(cli, &secant_tree_cumulants(&p)?),
                "cumulants" => emit_vector(cli, &to_lcumulants(&secant_moments(&p), &LatticeFamily::Full)?),
                "params" => ok(secant_to_json(&p)),
                other => Err(Error::InvalidArgument(format!("unknown --emit {other:?}"))),
            }
        }
        ModelCommand::Hmm(a) => {
            let p = hmm_params(cli, inputs, a)?;
            match a.emit.as_str() {
                "distribution" => ok(distribution_to_json(&hmm_distribution(&p)?)),
                "moments" => emit_vector(cli, &moments_from_distribution(&hmm_distribution(&p)?)),
                "normalized" => {
                    let m = moments_from_distribution(&hmm_distribution(&p)?);
                    let tree = p.tree()?;
                    if cli.float {
                        let mf = m.to_f64();
                        let tv = tree_cumulants(&subset_moments(&mf)?, &tree)?;
                        let map = normalized_tree_cumulants_f64(&tv, &mf)?;
                        ok(Value::Object(map.iter().map(|(k, v)| (label(k), json!(v))).collect()))
                    } else {
                        let tv = tree_cumulants(&subset_moments(&m)?, &tree)?;
                        ok(normalized_json(&normalized_tree_cumulants(&tv, &m)?))
                    }
                }
                "closedform" => ok(normalized_json(&hmm_normalized_tree_cumulants(&p)?)),
                "params" => ok(hmm_to_json(&p)),
                other => Err(Error::InvalidArgument(format!("unknown --emit {other:?}"))),
            }
        }
    }
}
