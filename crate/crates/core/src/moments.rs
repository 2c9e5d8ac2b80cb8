//! Probability tables, moment aliasing and affine changes of values.
//!
//! States `x` of `X = prod {0..r_i - 1}` double as exponent vectors: the entry
//! at `x` of a moment vector is `E[prod_i v_i(X_i)^{x_i}]`, the moment indexed
//! by the multiset with variable `i` repeated `x_i` times. States are stored
//! densely in mixed radix, variable 0 most significant.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::lattice::LatticeFamily;
use crate::partition::SetPartition;
use crate::scalar::{binomial, int, Rational, Scalar, DEFAULT_TOLERANCE};
use crate::trees::TreeTopology;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateSpace {
    arities: Vec<usize>,
    values: Vec<Vec<Rational>>,
}

impl StateSpace {
    /// Levels `0..r_i` represent the values `0..r_i`.
    pub fn new(arities: &[usize]) -> Result<Self> {
        let values = arities.iter().map(|&r| (0..r as i64).map(int).collect()).collect();
        Self::with_values(arities, values)
    }

    pub fn binary(n: usize) -> Self {
        Self::new(&vec![2; n]).expect("binary arities are valid")
    }

    pub fn with_values(arities: &[usize], values: Vec<Vec<Rational>>) -> Result<Self> {
        if arities.is_empty() {
            return Err(Error::InvalidArgument(
                "a state space needs at least one variable".into(),
            ));
        }
        if let Some(i) = arities.iter().position(|&r| r < 2) {
            return Err(Error::InvalidArgument(format!(
                "variable {} has fewer than two levels",
                i + 1
            )));
        }
        if values.len() != arities.len() {
            return Err(Error::InvalidArgument("one value map per variable is required".into()));
        }
        for (i, (v, &r)) in values.iter().zip(arities).enumerate() {
            if v.len() != r {
                return Err(Error::InvalidArgument(format!(
                    "value map of variable {} has {} entries for {} levels",
                    i + 1,
                    v.len(),
                    r
                )));
            }
        }
        let size = arities.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r));
        if size.is_none() {
            return Err(Error::InvalidArgument("state space too large".into()));
        }
        Ok(StateSpace {
            arities: arities.to_vec(),
            values,
        })
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    pub fn values(&self) -> &[Vec<Rational>] {
        &self.values
    }

    pub fn value(&self, var: usize, level: usize) -> &Rational {
        &self.values[var][level]
    }

    pub fn n_vars(&self) -> usize {
        self.arities.len()
    }

    pub fn size(&self) -> usize {
        self.arities.iter().product()
    }

    pub fn is_binary(&self) -> bool {
        self.arities.iter().all(|&r| r == 2)
    }

    pub fn has_default_values(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.iter().enumerate().all(|(k, x)| *x == int(k as i64)))
    }

    pub fn index_of(&self, x: &[usize]) -> usize {
        x.iter().zip(&self.arities).fold(0, |acc, (&xi, &r)| acc * r + xi)
    }

    pub fn state(&self, mut index: usize) -> Vec<usize> {
        let mut x = vec![0; self.arities.len()];
        for i in (0..x.len()).rev() {
            x[i] = index % self.arities[i];
            index /= self.arities[i];
        }
        x
    }

    pub fn states(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.size()).map(|i| self.state(i))
    }

    /// Exponent vector of a multiset given as a list of 0-based variables.
    pub fn exponents_of(&self, multiset: &[usize]) -> Result<Vec<usize>> {
        let mut x = vec![0; self.n_vars()];
        for &v in multiset {
            if v >= self.n_vars() {
                return Err(Error::InvalidArgument(format!("no variable {}", v + 1)));
            }
            x[v] += 1;
        }
        if let Some(i) = (0..x.len()).find(|&i| x[i] >= self.arities[i]) {
            return Err(Error::InvalidArgument(format!(
                "variable {} appears {} times; at most {} allowed",
                i + 1,
                x[i],
                self.arities[i] - 1
            )));
        }
        Ok(x)
    }

    /// Sub-space on the given variables, in the given order.
    pub fn restrict(&self, vars: &[usize]) -> Result<StateSpace> {
        let arities: Vec<usize> = vars.iter().map(|&v| self.arities[v]).collect();
        let values = vars.iter().map(|&v| self.values[v].clone()).collect();
        StateSpace::with_values(&arities, values)
    }

    /// Value maps replaced by `v -> scale * v + shift`.
    pub fn affine_image(&self, scale: &[Rational], shift: &[Rational]) -> StateSpace {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v.iter().map(|x| &scale[i] * x + &shift[i]).collect())
            .collect();
        StateSpace {
            arities: self.arities.clone(),
            values,
        }
    }
}

/// The variables listed once per occurrence in the exponent vector `x`.
pub fn multiset_of(x: &[usize]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .flat_map(|(i, &k)| std::iter::repeat_n(i, k))
        .collect()
}

/// Renders a multiset such as `[0, 0, 1]` as `112`.
pub fn multiset_label(x: &[usize]) -> String {
    let items: Vec<String> = multiset_of(x).iter().map(|v| (v + 1).to_string()).collect();
    if x.len() > 9 {
        items.join(",")
    } else {
        items.concat()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Nonnegative entries summing to one.
    Probabilistic,
    /// Signed entries summing to one.
    Algebraic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDistribution {
    space: StateSpace,
    table: Vec<Rational>,
    mode: Mode,
}

impl DiscreteDistribution {
    pub fn new(space: StateSpace, table: Vec<Rational>, mode: Mode) -> Result<Self> {
        if table.len() != space.size() {
            return Err(Error::InvalidDistribution(format!(
                "table has {} entries, the space {}",
                table.len(),
                space.size()
            )));
        }
        let total: Rational = table.iter().sum();
        if !total.is_one() {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}, not 1")));
        }
        if mode == Mode::Probabilistic {
            if let Some(i) = table.iter().position(|p| p.is_negative()) {
                return Err(Error::InvalidDistribution(format!(
                    "negative probability at state {:?}",
                    space.state(i)
                )));
            }
        }
        Ok(DiscreteDistribution { space, table, mode })
    }

    pub fn point_mass(space: StateSpace, x: &[usize]) -> Result<Self> {
        let mut table = vec![Rational::zero(); space.size()];
        table[space.index_of(x)] = Rational::one();
        Self::new(space, table, Mode::Probabilistic)
    }

    pub fn uniform(space: StateSpace) -> Self {
        let n = space.size() as i64;
        let table = vec![Rational::new(1.into(), n.into()); space.size()];
        Self::new(space, table, Mode::Probabilistic).expect("uniform table is valid")
    }

    /// Product of independent one-variable distributions.
    pub fn product(space: StateSpace, factors: &[Vec<Rational>]) -> Result<Self> {
        if factors.len() != space.n_vars() {
            return Err(Error::InvalidDistribution("one factor per variable is required".into()));
        }
        let table = space
            .states()
            .map(|x| x.iter().enumerate().map(|(i, &xi)| factors[i][xi].clone()).product())
            .collect();
        let mode = if factors.iter().flatten().any(|p| p.is_negative()) {
            Mode::Algebraic
        } else {
            Mode::Probabilistic
        };
        Self::new(space, table, mode)
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn table(&self) -> &[Rational] {
        &self.table
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn prob(&self, x: &[usize]) -> &Rational {
        &self.table[self.space.index_of(x)]
    }

    /// The same table over a space with different value maps.
    pub fn with_space(&self, space: StateSpace) -> Result<Self> {
        if space.arities() != self.space.arities() {
            return Err(Error::InvalidArgument("arities differ".into()));
        }
        Ok(DiscreteDistribution {
            space,
            table: self.table.clone(),
            mode: self.mode,
        })
    }

    /// Marginal distribution of the listed variables, in the listed order.
    pub fn marginal(&self, vars: &[usize]) -> Result<Self> {
        if vars.is_empty() {
            return Err(Error::EmptySubset);
        }
        check_distinct(vars, self.space.n_vars())?;
        let sub = self.space.restrict(vars)?;
        let mut table = vec![Rational::zero(); sub.size()];
        for (i, x) in self.space.states().enumerate() {
            let y: Vec<usize> = vars.iter().map(|&v| x[v]).collect();
            table[sub.index_of(&y)] += &self.table[i];
        }
        Ok(DiscreteDistribution {
            space: sub,
            table,
            mode: self.mode,
        })
    }

    /// `E[f(X)]` for a function of the state.
    pub fn expectation(&self, f: impl Fn(&[usize]) -> Rational) -> Rational {
        self.space
            .states()
            .zip(&self.table)
            .filter(|(_, p)| !p.is_zero())
            .map(|(x, p)| p * f(&x))
            .sum()
    }

    /// Value of variable `var` in state `x`.
    pub fn value_at(&self, var: usize, x: &[usize]) -> &Rational {
        self.space.value(var, x[var])
    }

    pub fn mean(&self, var: usize) -> Rational {
        self.expectation(|x| self.value_at(var, x).clone())
    }

    pub fn variance(&self, var: usize) -> Rational {
        let m = self.mean(var);
        self.expectation(|x| {
            let c = self.value_at(var, x) - &m;
            &c * &c
        })
    }

    /// `E[(X_i - EX_i)(X_j - EX_j)]`.
    pub fn covariance(&self, i: usize, j: usize) -> Rational {
        let (mi, mj) = (self.mean(i), self.mean(j));
        self.expectation(|x| (self.value_at(i, x) - &mi) * (self.value_at(j, x) - &mj))
    }
}

fn check_distinct(vars: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &v in vars {
        if v >= n {
            return Err(Error::InvalidArgument(format!("no variable {}", v + 1)));
        }
        if seen[v] {
            return Err(Error::InvalidArgument(format!("variable {} listed twice", v + 1)));
        }
        seen[v] = true;
    }
    Ok(())
}

/// Which coordinates a [`CoordinateVector`] holds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CoordinateSystem {
    Probabilities,
    Moments,
    CentralMoments,
    /// L-cumulants of a family; `Full` gives classical cumulants and a tree
    /// family gives tree cumulants.
    Cumulants(LatticeFamily),
}

impl CoordinateSystem {
    pub fn name(&self) -> &'static str {
        match self {
            CoordinateSystem::Probabilities => "probabilities",
            CoordinateSystem::Moments => "moments",
            CoordinateSystem::CentralMoments => "centralmoments",
            CoordinateSystem::Cumulants(LatticeFamily::Full) => "cumulants",
            CoordinateSystem::Cumulants(LatticeFamily::Tree(_)) => "treecumulants",
            CoordinateSystem::Cumulants(_) => "lcumulants",
        }
    }

    pub fn family(&self) -> Option<&LatticeFamily> {
        match self {
            CoordinateSystem::Cumulants(f) => Some(f),
            _ => None,
        }
    }

    pub fn tree(t: TreeTopology) -> Self {
        CoordinateSystem::Cumulants(LatticeFamily::Tree(Arc::new(t)))
    }
}

impl fmt::Display for CoordinateSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoordinateSystem::Cumulants(fam) if !matches!(fam, LatticeFamily::Full | LatticeFamily::Tree(_)) => {
                write!(f, "lcumulants({fam})")
            }
            other => f.write_str(other.name()),
        }
    }
}

/// Coordinate kind without the family payload, parsed from CLI names.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemKind {
    Probabilities,
    Moments,
    CentralMoments,
    Cumulants,
    LCumulants,
    TreeCumulants,
}

impl FromStr for SystemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "probabilities" | "probs" | "distribution" => Ok(SystemKind::Probabilities),
            "moments" => Ok(SystemKind::Moments),
            "centralmoments" | "central" => Ok(SystemKind::CentralMoments),
            "cumulants" | "classicalcumulants" | "classical" => Ok(SystemKind::Cumulants),
            "lcumulants" => Ok(SystemKind::LCumulants),
            "treecumulants" => Ok(SystemKind::TreeCumulants),
            _ => Err(Error::InvalidArgument(format!("unknown coordinate system {s:?}"))),
        }
    }
}

/// Dense map from exponent vectors to scalars.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateVector<S: Scalar = Rational> {
    space: StateSpace,
    system: CoordinateSystem,
    values: Vec<S>,
}

impl<S: Scalar> CoordinateVector<S> {
    pub fn new(space: StateSpace, system: CoordinateSystem, values: Vec<S>) -> Result<Self> {
        if values.len() != space.size() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a space of size {}",
                values.len(),
                space.size()
            )));
        }
        Ok(CoordinateVector { space, system, values })
    }

    /// Builds a vector by evaluating `f` at every exponent vector.
    pub fn from_fn(space: StateSpace, system: CoordinateSystem, f: impl FnMut(&[usize]) -> S) -> Self {
        let mut f = f;
        let values = space.states().map(|x| f(&x)).collect();
        CoordinateVector { space, system, values }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn system(&self) -> &CoordinateSystem {
        &self.system
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    pub fn get(&self, x: &[usize]) -> &S {
        &self.values[self.space.index_of(x)]
    }

    pub fn set(&mut self, x: &[usize], v: S) {
        let i = self.space.index_of(x);
        self.values[i] = v;
    }

    /// Entry for a multiset given as a list of 0-based variables.
    pub fn at(&self, multiset: &[usize]) -> Result<&S> {
        let x = self.space.exponents_of(multiset)?;
        Ok(self.get(&x))
    }

    /// Entry for a list of 1-based labels such as `[1, 1, 2]`.
    pub fn label(&self, labels: &[usize]) -> &S {
        let vars: Vec<usize> = labels.iter().map(|l| l - 1).collect();
        self.at(&vars).expect("label within the space")
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, &S)> + '_ {
        self.space.states().zip(&self.values)
    }

    pub fn with_system(mut self, system: CoordinateSystem) -> Self {
        self.system = system;
        self
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> CoordinateVector<T> {
        CoordinateVector {
            space: self.space.clone(),
            system: self.system.clone(),
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn to_f64(&self) -> CoordinateVector<f64> {
        self.map(|v| v.to_f64())
    }

    /// Largest `|a - b|` over all entries.
    pub fn max_difference(&self, other: &Self) -> Result<S> {
        if self.space.arities() != other.space.arities() {
            return Err(Error::GroundMismatch("vectors over different spaces".into()));
        }
        Ok(crate::scalar::max_abs(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.clone() - b.clone()),
        ))
    }

    pub fn close_to(&self, other: &Self, tol: f64) -> bool {
        self.space.arities() == other.space.arities()
            && self.values.iter().zip(&other.values).all(|(a, b)| a.close_to(b, tol))
    }
}

impl CoordinateVector<Rational> {
    pub fn to_scalar<S: Scalar>(&self) -> CoordinateVector<S> {
        self.map(S::from_rational)
    }
}

/// Applies one square matrix per variable along its own axis.
pub(crate) fn apply_modewise<S: Scalar>(arities: &[usize], values: &[S], mats: &[Vec<Vec<S>>]) -> Vec<S> {
    let mut cur = values.to_vec();
    let size = cur.len();
    let mut stride = size;
    for (axis, &r) in arities.iter().enumerate() {
        stride /= r;
        let m = &mats[axis];
        let mut next = vec![S::zero(); size];
        let block = stride * r;
        for start in (0..size).step_by(block) {
            for inner in 0..stride {
                for out in 0..r {
                    let mut acc = S::zero();
                    for k in 0..r {
                        let c = &m[out][k];
                        if !c.is_zero() {
                            acc = acc + c.clone() * cur[start + k * stride + inner].clone();
                        }
                    }
                    next[start + out * stride + inner] = acc;
                }
            }
        }
        cur = next;
    }
    cur
}

/// `V[x][y] = v(y)^x`: maps a one-variable table to its moments.
fn vandermonde(values: &[Rational]) -> Vec<Vec<Rational>> {
    let r = values.len();
    (0..r)
        .map(|x| values.iter().map(|v| Scalar::pow(v, x)).collect())
        .collect()
}

/// Moments `mu_x = sum_y p(y) prod_i v_i(y_i)^{x_i}`; the entry at 0 is 1.
pub fn moments_from_distribution(dist: &DiscreteDistribution) -> CoordinateVector<Rational> {
    let space = dist.space();
    let mats: Vec<Vec<Vec<Rational>>> = space.values().iter().map(|v| vandermonde(v)).collect();
    let values = apply_modewise(space.arities(), dist.table(), &mats);
    CoordinateVector {
        space: space.clone(),
        system: CoordinateSystem::Moments,
        values,
    }
}

/// Exact inverse of [`moments_from_distribution`]. The result is in
/// algebraic mode when some entry is negative.
pub fn distribution_from_moments(mv: &CoordinateVector<Rational>) -> Result<DiscreteDistribution> {
    let space = mv.space();
    let mut mats = Vec::with_capacity(space.n_vars());
    for (i, v) in space.values().iter().enumerate() {
        let inv = invert(&vandermonde(v))
            .ok_or_else(|| Error::Degenerate(format!("value map of variable {} is not injective", i + 1)))?;
        mats.push(inv);
    }
    let table = apply_modewise(space.arities(), mv.values(), &mats);
    let mode = if table.iter().any(|p| p.is_negative()) {
        Mode::Algebraic
    } else {
        Mode::Probabilistic
    };
    DiscreteDistribution::new(space.clone(), table, mode)
}

/// Gauss-Jordan inverse over the rationals; `None` when singular.
pub(crate) fn invert(m: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        let inv = Rational::one() / &a[col][col];
        for v in a[col].iter_mut() {
            *v = &*v * &inv;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                let pivot_row = a[col].clone();
                for (v, p) in a[r].iter_mut().zip(&pivot_row) {
                    *v = &*v - &f * p;
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Lower-triangular matrix `T[x][y] = C(x, y) scale^y shift^(x - y)`: the
/// moments of `scale * X + shift` from those of `X`.
fn affine_matrix<S: Scalar>(r: usize, scale: &S, shift: &S) -> Vec<Vec<S>> {
    (0..r)
        .map(|x| {
            (0..r)
                .map(|y| {
                    if y > x {
                        S::zero()
                    } else {
                        S::from_i64(binomial(x, y)) * scale.pow(y) * shift.pow(x - y)
                    }
                })
                .collect()
        })
        .collect()
}

fn means_of<S: Scalar>(mv: &CoordinateVector<S>) -> Vec<S> {
    let n = mv.space.n_vars();
    (0..n)
        .map(|i| {
            let mut e = vec![0; n];
            e[i] = 1;
            mv.get(&e).clone()
        })
        .collect()
}

fn require_system<S: Scalar>(v: &CoordinateVector<S>, want: &CoordinateSystem) -> Result<()> {
    if v.system() != want {
        return Err(Error::InvalidArgument(format!(
            "expected {want} coordinates, got {}",
            v.system()
        )));
    }
    Ok(())
}

/// Central moments `mu'_A = sum_{B <= A} (-1)^{|A \ B|} mu_B prod_{i in A \ B} mu_i`,
/// summed over sub-multisets with their multiplicities. `mu'_0 = 1`, `mu'_i = 0`.
pub fn central_moments<S: Scalar>(mv: &CoordinateVector<S>) -> Result<CoordinateVector<S>> {
    require_system(mv, &CoordinateSystem::Moments)?;
    let means = means_of(mv);
    let mats: Vec<Vec<Vec<S>>> = mv
        .space
        .arities()
        .iter()
        .zip(&means)
        .map(|(&r, m)| affine_matrix(r, &S::one(), &(-m.clone())))
        .collect();
    let values = apply_modewise(mv.space.arities(), &mv.values, &mats);
    Ok(CoordinateVector {
        space: mv.space.clone(),
        system: CoordinateSystem::CentralMoments,
        values,
    })
}

/// Central moments as direct expectations of centered products.
pub fn central_moments_direct(dist: &DiscreteDistribution) -> CoordinateVector<Rational> {
    let space = dist.space();
    let means: Vec<Rational> = (0..space.n_vars()).map(|i| dist.mean(i)).collect();
    CoordinateVector::from_fn(space.clone(), CoordinateSystem::CentralMoments, |x| {
        dist.expectation(|y| {
            x.iter()
                .enumerate()
                .map(|(i, &k)| Scalar::pow(&(space.value(i, y[i]) - &means[i]), k))
                .product()
        })
    })
}

/// Moments of `scale_i * X_i + shift_i` by multilinear expansion of the
/// moments of `X`. The output space carries the transformed value maps.
pub fn transform_values<S: Scalar>(
    mv: &CoordinateVector<S>,
    scale: &[Rational],
    shift: &[Rational],
) -> Result<CoordinateVector<S>> {
    require_system(mv, &CoordinateSystem::Moments)?;
    let n = mv.space.n_vars();
    if scale.len() != n || shift.len() != n {
        return Err(Error::InvalidArgument(format!("need {n} scale and shift entries")));
    }
    let mats: Vec<Vec<Vec<S>>> = mv
        .space
        .arities()
        .iter()
        .enumerate()
        .map(|(i, &r)| affine_matrix(r, &S::from_rational(&scale[i]), &S::from_rational(&shift[i])))
        .collect();
    let values = apply_modewise(mv.space.arities(), &mv.values, &mats);
    Ok(CoordinateVector {
        space: mv.space.affine_image(scale, shift),
        system: CoordinateSystem::Moments,
        values,
    })
}

/// Whether `mu_A = prod_{B in pi0} mu_{A cap B}` for every index `A`, where
/// `pi0` partitions the variables.
pub fn independence_test<S: Scalar>(mv: &CoordinateVector<S>, pi0: &SetPartition) -> Result<bool> {
    require_system(mv, &CoordinateSystem::Moments)?;
    Ok(independence_residual(mv, pi0)?.is_near_zero(DEFAULT_TOLERANCE))
}

/// Largest `|mu_A - prod_B mu_{A cap B}|` over all indices.
pub fn independence_residual<S: Scalar>(mv: &CoordinateVector<S>, pi0: &SetPartition) -> Result<S> {
    let n = mv.space.n_vars();
    if pi0.len() != n {
        return Err(Error::GroundMismatch(format!("{pi0} does not partition {n} variables")));
    }
    let blocks = pi0.blocks();
    let residuals = mv.space.states().map(|x| {
        let product = blocks.iter().fold(S::one(), |acc, b| {
            let mut y = vec![0; n];
            for &i in b {
                y[i] = x[i];
            }
            acc * mv.get(&y).clone()
        });
        mv.get(&x).clone() - product
    });
    Ok(crate::scalar::max_abs(residuals))
}

/// Conditional moments `mu_A^C(x_C) = E[prod_{i in A} X_i | X_C = x_C]` for a
/// multiset `A` (0-based variables, repeats allowed) and a set `C` disjoint
/// from it. States with `p_C(x_C) = 0` map to `None`.
pub fn conditional_moments(
    dist: &DiscreteDistribution,
    a: &[usize],
    c: &[usize],
) -> Result<Vec<(Vec<usize>, Option<Rational>)>> {
    let n = dist.space().n_vars();
    check_distinct(c, n)?;
    if let Some(v) = a.iter().find(|v| c.contains(v)) {
        return Err(Error::InvalidArgument(format!(
            "variable {} is both moment index and condition",
            v + 1
        )));
    }
    if let Some(v) = a.iter().find(|&&v| v >= n) {
        return Err(Error::InvalidArgument(format!("no variable {}", v + 1)));
    }
    if c.is_empty() {
        let m = dist.expectation(|x| a.iter().map(|&i| dist.value_at(i, x).clone()).product());
        return Ok(vec![(Vec::new(), Some(m))]);
    }
    let sub = dist.space().restrict(c)?;
    let mut mass = vec![Rational::zero(); sub.size()];
    let mut weighted = vec![Rational::zero(); sub.size()];
    for (idx, x) in dist.space().states().enumerate() {
        let p = &dist.table()[idx];
        if p.is_zero() {
            continue;
        }
        let y: Vec<usize> = c.iter().map(|&v| x[v]).collect();
        let k = sub.index_of(&y);
        mass[k] += p;
        let f: Rational = a.iter().map(|&i| dist.value_at(i, &x).clone()).product();
        weighted[k] += p * f;
    }
    Ok(sub
        .states()
        .enumerate()
        .map(|(k, y)| {
            let v = if mass[k].is_zero() {
                None
            } else {
                Some(&weighted[k] / &mass[k])
            };
            (y, v)
        })
        .collect())
}

/// Variances `k_ii` from a moment vector. A binary variable with values
/// `(v0, v1)` and mean `m` has `q = (m - v0)/(v1 - v0)` and variance
/// `q(1 - q)(v1 - v0)^2`; otherwise `mu_ii - mu_i^2` is read off directly.
pub fn variances<S: Scalar>(mv: &CoordinateVector<S>) -> Result<Vec<S>> {
    require_system(mv, &CoordinateSystem::Moments)?;
    let space = &mv.space;
    let means = means_of(mv);
    (0..space.n_vars())
        .map(|i| {
            if space.arities()[i] == 2 {
                let v0 = S::from_rational(space.value(i, 0));
                let span = S::from_rational(space.value(i, 1)) - v0.clone();
                let q = (means[i].clone() - v0) / span.clone();
                Ok(q.clone() * (S::one() - q) * span.clone() * span)
            } else {
                let mut e = vec![0; space.n_vars()];
                e[i] = 2;
                Ok(mv.get(&e).clone() - means[i].clone() * means[i].clone())
            }
        })
        .collect()
}
