//! Statistical models: sampling, base estimators and the true target θ(P).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::BaseEstimates;
use crate::expfam::{ExpFamily, PhiProfile};
use crate::linalg;
use crate::space::{Point, SpaceDescriptor};
use crate::splitter::SplitPlan;

/// Law of the standardized coordinates ξ in X = Σ^{1/2} ξ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiLaw {
    Gaussian,
    /// ±1 with equal probability.
    Rademacher,
    /// Uniform on [−√3, √3].
    UniformSym,
}

impl XiLaw {
    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            XiLaw::Gaussian => rng.sample(StandardNormal),
            XiLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            XiLaw::UniformSym => rng.random_range(-3f64.sqrt()..3f64.sqrt()),
        }
    }
}

/// One-dimensional component of a product model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Component {
    Gaussian { mean: f64, sigma: f64 },
    Bernoulli { p: f64 },
}

impl Component {
    fn mean(&self) -> f64 {
        match *self {
            Component::Gaussian { mean, .. } => mean,
            Component::Bernoulli { p } => p,
        }
    }

    fn variance(&self) -> f64 {
        match *self {
            Component::Gaussian { sigma, .. } => sigma * sigma,
            Component::Bernoulli { p } => p * (1.0 - p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    /// N(θ, diag(cov_diag)).
    GaussianLocation { theta: Vec<f64>, cov_diag: Vec<f64> },
    /// Independent one-dimensional components.
    Product { components: Vec<Component> },
    /// Centered X = Σ^{1/2} ξ with `sigma_sqrt` the symmetric factor Σ^{1/2}.
    Covariance { sigma_sqrt: Point, xi_law: XiLaw },
    /// Canonical exponential family at natural parameter θ.
    ExpFam { family: ExpFamily, theta: Point },
}

impl ModelSpec {
    pub fn gaussian_location(theta: Vec<f64>, cov_diag: Vec<f64>) -> Result<Self> {
        if theta.is_empty() || theta.len() != cov_diag.len() {
            return Err(Error::Contract("location and covariance diagonal lengths differ".into()));
        }
        if cov_diag.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::Domain("covariance diagonal must be positive".into()));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain("non-finite location".into()));
        }
        Ok(ModelSpec::GaussianLocation { theta, cov_diag })
    }

    /// Zero-variance location model; only for exercising degenerate paths in tests.
    #[cfg(test)]
    pub(crate) fn degenerate_location(theta: Vec<f64>) -> Self {
        let d = theta.len();
        ModelSpec::GaussianLocation { theta, cov_diag: vec![0.0; d] }
    }

    pub fn product(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Contract("product model needs components".into()));
        }
        for c in &components {
            match *c {
                Component::Gaussian { mean, sigma } if !(sigma > 0.0) || !mean.is_finite() => {
                    return Err(Error::Domain("gaussian component needs σ > 0".into()))
                }
                Component::Bernoulli { p } if !(p > 0.0 && p < 1.0) => {
                    return Err(Error::Domain("bernoulli component needs p in (0,1)".into()))
                }
                _ => {}
            }
        }
        Ok(ModelSpec::Product { components })
    }

    pub fn covariance(sigma_sqrt: Point, xi_law: XiLaw) -> Result<Self> {
        if sigma_sqrt.space().side().is_none() {
            return Err(Error::Contract("covariance factor must be a symmetric matrix".into()));
        }
        Ok(ModelSpec::Covariance { sigma_sqrt, xi_law })
    }

    pub fn expfam(family: ExpFamily, theta: Point) -> Result<Self> {
        family.validate()?;
        if theta.space() != &family.space() {
            return Err(Error::Contract("θ does not match the family dimension".into()));
        }
        Ok(ModelSpec::ExpFam { family, theta })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ModelSpec::GaussianLocation { .. } => "gaussian_location",
            ModelSpec::Product { .. } => "product",
            ModelSpec::Covariance { .. } => "covariance",
            ModelSpec::ExpFam { .. } => "expfam",
        }
    }

    /// Parameter space of θ(P).
    pub fn space(&self) -> SpaceDescriptor {
        match self {
            ModelSpec::GaussianLocation { theta, .. } => SpaceDescriptor::Euclidean(theta.len()),
            ModelSpec::Product { components } => SpaceDescriptor::Product(vec![1; components.len()]),
            ModelSpec::Covariance { sigma_sqrt, .. } => sigma_sqrt.space().clone(),
            ModelSpec::ExpFam { family, .. } => family.space(),
        }
    }

    /// Length of one observation record.
    pub fn observation_dim(&self) -> usize {
        match self {
            ModelSpec::Covariance { sigma_sqrt, .. } => sigma_sqrt.space().side().expect("matrix"),
            other => other.space().coord_count(),
        }
    }

    /// Dimension used in rate statements: d for vectors, the side for matrices.
    pub fn dim(&self) -> usize {
        self.observation_dim()
    }

    /// θ(P).
    pub fn true_functional_target(&self) -> Result<Point> {
        match self {
            ModelSpec::GaussianLocation { theta, .. } => Point::vector(theta.clone()),
            ModelSpec::Product { components } => {
                Point::new(self.space(), components.iter().map(Component::mean).collect())
            }
            ModelSpec::Covariance { sigma_sqrt, .. } => {
                let side = sigma_sqrt.space().side().expect("matrix");
                let s = sigma_sqrt.to_matrix().expect("matrix");
                Point::from_matrix(side, &linalg::matmul(&s, &s, side))
            }
            ModelSpec::ExpFam { family, theta } => family.big_psi(theta),
        }
    }

    /// Inverse Fisher information at the target, as a full coordinate matrix.
    /// For exponential families this is Σ_θ, the inverse information of the
    /// mean parametrization.
    pub fn inverse_fisher(&self) -> Result<Vec<f64>> {
        let diag = |v: Vec<f64>| {
            let d = v.len();
            let mut m = vec![0.0; d * d];
            for (i, x) in v.into_iter().enumerate() {
                m[i * d + i] = x;
            }
            m
        };
        match self {
            ModelSpec::GaussianLocation { cov_diag, .. } => Ok(diag(cov_diag.clone())),
            ModelSpec::Product { components } => {
                Ok(diag(components.iter().map(Component::variance).collect()))
            }
            ModelSpec::ExpFam { family, theta } => family.sigma_theta_matrix(theta),
            ModelSpec::Covariance { .. } => Err(Error::Unsupported(
                "Fisher information is not modeled for the covariance model".into(),
            )),
        }
    }

    /// Draws n i.i.d. observations.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::Contract("sample size must be ≥ 1".into()));
        }
        let dim = self.observation_dim();
        let mut data = Vec::with_capacity(n * dim);
        match self {
            ModelSpec::GaussianLocation { theta, cov_diag } => {
                let sd: Vec<f64> = cov_diag.iter().map(|c| c.sqrt()).collect();
                for _ in 0..n {
                    for (t, s) in theta.iter().zip(&sd) {
                        let z: f64 = rng.sample(StandardNormal);
                        data.push(t + s * z);
                    }
                }
            }
            ModelSpec::Product { components } => {
                for _ in 0..n {
                    for c in components {
                        data.push(match *c {
                            Component::Gaussian { mean, sigma } => {
                                let z: f64 = rng.sample(StandardNormal);
                                mean + sigma * z
                            }
                            Component::Bernoulli { p } => f64::from(u8::from(rng.random::<f64>() < p)),
                        });
                    }
                }
            }
            ModelSpec::Covariance { sigma_sqrt, xi_law } => {
                let s = sigma_sqrt.to_matrix().expect("matrix");
                let mut xi = vec![0.0; dim];
                for _ in 0..n {
                    for x in xi.iter_mut() {
                        *x = xi_law.draw(rng);
                    }
                    data.extend(linalg::matvec(&s, &xi));
                }
            }
            ModelSpec::ExpFam { family, theta } => match family {
                ExpFamily::BernoulliProduct { .. } => {
                    let p = family.big_psi(theta)?;
                    for _ in 0..n {
                        for &pi in p.coords() {
                            data.push(f64::from(u8::from(rng.random::<f64>() < pi)));
                        }
                    }
                }
                ExpFamily::GaussianNatural { .. }
                | ExpFamily::Spherical { profile: PhiProfile::Identity, .. } => {
                    for _ in 0..n {
                        for t in theta.coords() {
                            let z: f64 = rng.sample(StandardNormal);
                            data.push(t + z);
                        }
                    }
                }
                ExpFamily::Spherical { .. } => {
                    return Err(Error::Unsupported(
                        "sampling is only available for the identity spherical profile".into(),
                    ))
                }
            },
        }
        Ok(Dataset { dim, data })
    }

    /// Base estimator on the rows in `indices`: the sample mean of the
    /// sufficient statistic, or the uncentered sample covariance.
    pub fn base_estimate(&self, data: &Dataset, indices: &[usize]) -> Result<Point> {
        if indices.is_empty() {
            return Err(Error::Contract("base estimate over an empty block".into()));
        }
        if data.dim != self.observation_dim() {
            return Err(Error::Contract(format!(
                "dataset rows have {} entries, model expects {}",
                data.dim,
                self.observation_dim()
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= data.len()) {
            return Err(Error::Contract(format!("row index {bad} out of range")));
        }
        let inv = 1.0 / indices.len() as f64;
        match self {
            ModelSpec::Covariance { sigma_sqrt, .. } => {
                let side = data.dim;
                let mut acc = vec![0.0; side * side];
                for &i in indices {
                    let x = data.row(i);
                    for a in 0..side {
                        for b in a..side {
                            acc[a * side + b] += x[a] * x[b];
                        }
                    }
                }
                for a in 0..side {
                    for b in a..side {
                        acc[a * side + b] *= inv;
                        acc[b * side + a] = acc[a * side + b];
                    }
                }
                debug_assert_eq!(sigma_sqrt.space().side(), Some(side));
                Point::from_matrix(side, &acc)
            }
            _ => {
                let mut acc = vec![0.0; data.dim];
                for &i in indices {
                    for (a, x) in acc.iter_mut().zip(data.row(i)) {
                        *a += x;
                    }
                }
                acc.iter_mut().for_each(|a| *a *= inv);
                Point::new(self.space(), acc)
            }
        }
    }

    /// Whether block means can be drawn from their exact sampling law
    /// without materializing observations.
    pub fn supports_sufficient_sampling(&self) -> bool {
        match self {
            ModelSpec::GaussianLocation { .. } | ModelSpec::Product { .. } => true,
            ModelSpec::ExpFam { family, .. } => !matches!(
                family,
                ExpFamily::Spherical { profile: PhiProfile::LogisticLike { .. }, .. }
            ),
            ModelSpec::Covariance { .. } => false,
        }
    }

    /// Draws the block estimates of a plan, plus the full-sample estimate,
    /// directly from the law of the per-atom sufficient statistics.
    ///
    /// The sum over an atom of size k of i.i.d. N(μ, c) draws is
    /// N(kμ, kc), and of Bernoulli(p) draws is Binomial(k, p), so the joint
    /// law of all block means matches sampling the full dataset.
    pub fn sample_block_estimates<R: Rng + ?Sized>(
        &self,
        layout: &AtomLayout,
        rng: &mut R,
    ) -> Result<(BaseEstimates, Point)> {
        let dim = self.observation_dim();
        let coords = self.sufficient_coords()?;
        let mut atom_sums = Vec::with_capacity(layout.atoms.len());
        for atom in &layout.atoms {
            let k = atom.size as f64;
            let sums: Vec<f64> = coords
                .iter()
                .map(|c| match *c {
                    CoordLaw::Normal { mean, var } => {
                        let z: f64 = rng.sample(StandardNormal);
                        Ok(k * mean + (k * var).sqrt() * z)
                    }
                    CoordLaw::Bernoulli { p } => Binomial::new(atom.size as u64, p)
                        .map_err(|e| Error::Domain(e.to_string()))
                        .map(|b| b.sample(rng) as f64),
                })
                .collect::<Result<_>>()?;
            atom_sums.push(sums);
        }
        let space = self.space();
        let mean_of = |select: &dyn Fn(&Atom) -> bool| -> Point {
            let mut acc = vec![0.0; dim];
            let mut count = 0usize;
            for (atom, sums) in layout.atoms.iter().zip(&atom_sums) {
                if select(atom) {
                    count += atom.size;
                    for (a, s) in acc.iter_mut().zip(sums) {
                        *a += s;
                    }
                }
            }
            let inv = 1.0 / count as f64;
            Point::from_raw(space.clone(), acc.into_iter().map(|a| a * inv).collect())
        };
        let theta0 = mean_of(&|a: &Atom| a.anchor);
        let levels = (1..=layout.m)
            .map(|k| {
                (0..k)
                    .map(|j| mean_of(&|a: &Atom| !a.anchor && a.blocks[k - 1] == j))
                    .collect()
            })
            .collect();
        let full = mean_of(&|_: &Atom| true);
        Ok((BaseEstimates::new(theta0, levels)?, full))
    }

    /// Full-sample base estimate θ̂_n, drawn from the sufficient statistic
    /// when possible.
    pub fn sample_full_estimate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Point> {
        if self.supports_sufficient_sampling() {
            if n == 0 {
                return Err(Error::Contract("sample size must be ≥ 1".into()));
            }
            let layout = AtomLayout {
                m: 0,
                n,
                atoms: vec![Atom { size: n, anchor: true, blocks: vec![] }],
            };
            Ok(self.sample_block_estimates(&layout, rng)?.1)
        } else {
            let data = self.sample(n, rng)?;
            let all: Vec<usize> = (0..n).collect();
            self.base_estimate(&data, &all)
        }
    }

    fn sufficient_coords(&self) -> Result<Vec<CoordLaw>> {
        Ok(match self {
            ModelSpec::GaussianLocation { theta, cov_diag } => theta
                .iter()
                .zip(cov_diag)
                .map(|(&mean, &var)| CoordLaw::Normal { mean, var })
                .collect(),
            ModelSpec::Product { components } => components
                .iter()
                .map(|c| match *c {
                    Component::Gaussian { mean, sigma } => CoordLaw::Normal { mean, var: sigma * sigma },
                    Component::Bernoulli { p } => CoordLaw::Bernoulli { p },
                })
                .collect(),
            ModelSpec::ExpFam { family, theta } if self.supports_sufficient_sampling() => match family {
                ExpFamily::BernoulliProduct { .. } => family
                    .big_psi(theta)?
                    .coords()
                    .iter()
                    .map(|&p| CoordLaw::Bernoulli { p })
                    .collect(),
                _ => theta
                    .coords()
                    .iter()
                    .map(|&mean| CoordLaw::Normal { mean, var: 1.0 })
                    .collect(),
            },
            _ => {
                return Err(Error::Unsupported(format!(
                    "sufficient-statistic sampling is not available for {}",
                    self.tag()
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum CoordLaw {
    Normal { mean: f64, var: f64 },
    Bernoulli { p: f64 },
}

/// A maximal set of indices that belong to the same block at every level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub size: usize,
    pub anchor: bool,
    /// Block index at each level k = 1..m (unused for anchor atoms).
    pub blocks: Vec<usize>,
}

/// Common refinement of all blocks of a split plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomLayout {
    pub m: usize,
    pub n: usize,
    pub atoms: Vec<Atom>,
}

impl AtomLayout {
    pub fn from_plan(plan: &SplitPlan) -> Self {
        let mut membership = vec![vec![usize::MAX; plan.m]; plan.n];
        for (li, level) in plan.parts.iter().enumerate() {
            for (bi, block) in level.iter().enumerate() {
                for &i in block {
                    membership[i][li] = bi;
                }
            }
        }
        let mut groups: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for &i in &plan.j0 {
            membership[i].clear();
        }
        for sig in membership {
            *groups.entry(sig).or_default() += 1;
        }
        let atoms = groups
            .into_iter()
            .map(|(blocks, size)| Atom {
                size,
                anchor: blocks.is_empty(),
                blocks,
            })
            .collect();
        AtomLayout {
            m: plan.m,
            n: plan.n,
            atoms,
        }
    }
}

/// Observations, one record per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    data: Vec<f64>,
}

const DATA_MAGIC: &str = "# splitfun-data v1";

impl Dataset {
    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Contract("row dimension must be ≥ 1".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::Contract(format!("row {i} has {} entries, expected {dim}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Dataset { dim, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Writes the dataset as CSV: a `# splitfun-data v1 model=<tag> dim=<d>`
    /// header followed by one comma-separated row per observation.
    pub fn write_csv<W: Write>(&self, model_tag: &str, mut out: W) -> Result<()> {
        writeln!(out, "{DATA_MAGIC} model={model_tag} dim={}", self.dim)?;
        for i in 0..self.len() {
            let line: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Reads a dataset written by [`write_csv`](Self::write_csv); returns the model tag too.
    pub fn read_csv<R: BufRead>(input: R) -> Result<(String, Self)> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty dataset file".into()))??;
        let rest = header
            .strip_prefix(DATA_MAGIC)
            .ok_or_else(|| Error::Parse(format!("missing `{DATA_MAGIC}` header")))?;
        let mut tag = None;
        let mut dim = None;
        for field in rest.split_whitespace() {
            if let Some(t) = field.strip_prefix("model=") {
                tag = Some(t.to_string());
            } else if let Some(d) = field.strip_prefix("dim=") {
                dim = Some(d.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?);
            }
        }
        let tag = tag.ok_or_else(|| Error::Parse("header lacks model=".into()))?;
        let dim = dim.ok_or_else(|| Error::Parse("header lacks dim=".into()))?;
        let mut rows = Vec::new();
        for (ln, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 2)))?;
            rows.push(row);
        }
        Ok((tag, Dataset::from_rows(dim, &rows)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::splitter::{make_split, SplitMode};

    fn models() -> Vec<ModelSpec> {
        vec![
            ModelSpec::gaussian_location(vec![1.0, -2.0], vec![1.0, 4.0]).unwrap(),
            ModelSpec::product(vec![
                Component::Gaussian { mean: 0.5, sigma: 2.0 },
                Component::Bernoulli { p: 0.2 },
            ])
            .unwrap(),
            ModelSpec::covariance(Point::diag(&[1.0, 0.5]).unwrap(), XiLaw::UniformSym).unwrap(),
            ModelSpec::expfam(
                ExpFamily::BernoulliProduct { d: 2 },
                Point::vector(vec![0.0, 1.0]).unwrap(),
            )
            .unwrap(),
            ModelSpec::expfam(
                ExpFamily::GaussianNatural { d: 2 },
                Point::vector(vec![0.3, 0.1]).unwrap(),
            )
            .unwrap(),
        ]
    }

    #[test]
    fn degenerate_location_rows_are_theta() {
        let m = ModelSpec::degenerate_location(vec![1.5, -0.5]);
        let data = m.sample(5, &mut RngStream::from_seed(1)).unwrap();
        for i in 0..5 {
            assert_eq!(data.row(i), &[1.5, -0.5]);
        }
    }

    #[test]
    fn sampling_laws() {
        let bern = ModelSpec::expfam(
            ExpFamily::BernoulliProduct { d: 3 },
            Point::vector(vec![0.0; 3]).unwrap(),
        )
        .unwrap();
        let data = bern.sample(4000, &mut RngStream::from_seed(2)).unwrap();
        let mean = data.data.iter().sum::<f64>() / data.data.len() as f64;
        assert!(data.data.iter().all(|x| *x == 0.0 || *x == 1.0));
        assert!((mean - 0.5).abs() < 4.0 * (0.25f64 / 12000.0).sqrt());

        let cov = ModelSpec::covariance(Point::diag(&[1.0, 1.0, 1.0]).unwrap(), XiLaw::Rademacher).unwrap();
        let data = cov.sample(50, &mut RngStream::from_seed(3)).unwrap();
        assert!(data.data.iter().all(|x| x.abs() == 1.0));
    }

    #[test]
    fn xi_laws_are_standardized() {
        let mut rng = RngStream::from_seed(4);
        let n = 200_000;
        for law in [XiLaw::Gaussian, XiLaw::Rademacher, XiLaw::UniformSym] {
            let xs: Vec<f64> = (0..n).map(|_| law.draw(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            // Var of the sample variance ≈ (μ₄ − 1)/n with μ₄ ≤ 3.
            assert!((var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt(), "{law:?}: {var}");
        }
    }

    #[test]
    fn base_estimate_examples() {
        let cov = ModelSpec::covariance(Point::diag(&[1.0, 1.0]).unwrap(), XiLaw::Gaussian).unwrap();
        let rows = Dataset::from_rows(2, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let s = cov.base_estimate(&rows, &[0, 1]).unwrap();
        assert_eq!(s, Point::diag(&[0.5, 0.5]).unwrap());

        let bern = ModelSpec::expfam(ExpFamily::BernoulliProduct { d: 1 }, Point::vector(vec![0.0]).unwrap())
            .unwrap();
        let rows = Dataset::from_rows(1, &[vec![1.0], vec![1.0], vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(bern.base_estimate(&rows, &[0, 1, 2, 3]).unwrap().coords(), &[0.75]);

        let loc = ModelSpec::gaussian_location(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let rows = Dataset::from_rows(2, &[vec![3.0, -1.0]]).unwrap();
        assert_eq!(loc.base_estimate(&rows, &[0]).unwrap().coords(), &[3.0, -1.0]);
        assert!(matches!(loc.base_estimate(&rows, &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn targets() {
        let cov = ModelSpec::covariance(Point::diag(&[1.0, 0.5]).unwrap(), XiLaw::Gaussian).unwrap();
        assert_eq!(cov.true_functional_target().unwrap(), Point::diag(&[1.0, 0.25]).unwrap());
        let bern = ModelSpec::expfam(ExpFamily::BernoulliProduct { d: 1 }, Point::vector(vec![0.0]).unwrap())
            .unwrap();
        assert_eq!(bern.true_functional_target().unwrap().coords(), &[0.5]);
        let loc = ModelSpec::gaussian_location(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(loc.true_functional_target().unwrap().coords(), &[1.0, 2.0]);
    }

    #[test]
    fn sample_covariance_exact_expectation() {
        // Rademacher ξ, Σ = I, d = 2, n = 2: all 16 sign patterns.
        let cov = ModelSpec::covariance(Point::diag(&[1.0, 1.0]).unwrap(), XiLaw::Rademacher).unwrap();
        let mut acc = [0.0; 3];
        for mask in 0..16u32 {
            let s = |b: u32| if mask & (1 << b) != 0 { 1.0 } else { -1.0 };
            let rows = Dataset::from_rows(2, &[vec![s(0), s(1)], vec![s(2), s(3)]]).unwrap();
            let est = cov.base_estimate(&rows, &[0, 1]).unwrap();
            for (a, c) in acc.iter_mut().zip(est.coords()) {
                *a += c / 16.0;
            }
        }
        let expected = Point::diag(&[1.0, 1.0]).unwrap();
        for (a, e) in acc.iter().zip(expected.coords()) {
            assert!((a - e).abs() <= 1e-14);
        }
    }

    #[test]
    fn base_estimators_unbiased() {
        let reps = 100_000;
        for (mi, model) in models().into_iter().enumerate() {
            let target = model.true_functional_target().unwrap();
            let dim = target.coords().len();
            let mut sum = vec![0.0; dim];
            let mut sumsq = vec![0.0; dim];
            for r in 0..reps {
                let mut rng = RngStream::new(99, mi as u64, r);
                let data = model.sample(3, &mut rng).unwrap();
                let est = model.base_estimate(&data, &[0, 1, 2]).unwrap();
                for (i, c) in est.coords().iter().enumerate() {
                    sum[i] += c;
                    sumsq[i] += c * c;
                }
            }
            for i in 0..dim {
                let mean = sum[i] / reps as f64;
                let var = sumsq[i] / reps as f64 - mean * mean;
                let se = (var / reps as f64).sqrt();
                assert!(
                    (mean - target.coords()[i]).abs() <= 4.0 * se + 1e-15,
                    "{} coord {i}: {mean} vs {}",
                    model.tag(),
                    target.coords()[i]
                );
            }
        }
    }

    #[test]
    fn expfam_covariance_matches_monte_carlo() {
        let fam = ExpFamily::BernoulliProduct { d: 2 };
        let theta = Point::vector(vec![0.4, -1.0]).unwrap();
        let model = ModelSpec::expfam(fam.clone(), theta.clone()).unwrap();
        let n = 200_000;
        let data = model.sample(n, &mut RngStream::from_seed(8)).unwrap();
        let sig = fam.sigma_theta_matrix(&theta).unwrap();
        let mean: Vec<f64> = (0..2).map(|j| (0..n).map(|i| data.row(i)[j]).sum::<f64>() / n as f64).collect();
        for a in 0..2 {
            for b in 0..2 {
                let prods: Vec<f64> = (0..n)
                    .map(|i| (data.row(i)[a] - mean[a]) * (data.row(i)[b] - mean[b]))
                    .collect();
                let c = prods.iter().sum::<f64>() / n as f64;
                let v = prods.iter().map(|p| (p - c).powi(2)).sum::<f64>() / n as f64;
                let se = (v / n as f64).sqrt();
                assert!((c - sig[a * 2 + b]).abs() <= 4.0 * se + 1e-12, "({a},{b}): {c} vs {}", sig[a * 2 + b]);
            }
        }
    }

    #[test]
    fn atom_layout_refines_plan() {
        let plan = make_split(20, 3, SplitMode::Balanced, 0, false).unwrap();
        let layout = AtomLayout::from_plan(&plan);
        assert_eq!(layout.atoms.iter().map(|a| a.size).sum::<usize>(), 20);
        assert_eq!(layout.atoms.iter().filter(|a| a.anchor).count(), 1);
        // complement of 10 split at 10, 5|5, 4|3|3 → atoms 4,1,2,3
        let sizes: Vec<usize> = layout.atoms.iter().filter(|a| !a.anchor).map(|a| a.size).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 10);
        assert_eq!(sizes.len(), 4);
    }

    #[test]
    fn sufficient_sampling_matches_moments() {
        let model = ModelSpec::gaussian_location(vec![1.0, -1.0], vec![1.0, 2.0]).unwrap();
        let plan = make_split(30, 2, SplitMode::Balanced, 0, false).unwrap();
        let layout = AtomLayout::from_plan(&plan);
        let reps = 20_000;
        // Cov of level-2 block means vs level-1 mean at coord 1: both share
        // the block; Cov(mean_A, mean_B) = var·|A∩B|/(|A||B|).
        let mut prod = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for r in 0..reps {
            let mut rng = RngStream::new(5, 0, r);
            let (b, full) = model.sample_block_estimates(&layout, &mut rng).unwrap();
            let a = b.levels[0][0].coords()[1];
            let c = b.levels[1][0].coords()[1];
            prod += a * c;
            m1 += a;
            m2 += c;
            assert_eq!(full.coords().len(), 2);
        }
        let cov = prod / reps as f64 - (m1 / reps as f64) * (m2 / reps as f64);
        let expected = 2.0 * 8.0 / (15.0 * 8.0);
        assert!((cov - expected).abs() < 0.02, "{cov} vs {expected}");
        assert!((m1 / reps as f64 + 1.0).abs() < 4.0 * (2.0 / 15.0 / reps as f64).sqrt());
    }

    #[test]
    fn dataset_csv_round_trip() {
        let model = ModelSpec::gaussian_location(vec![0.1, 0.2], vec![1.0, 1.0]).unwrap();
        let data = model.sample(7, &mut RngStream::from_seed(3)).unwrap();
        let mut buf = Vec::new();
        data.write_csv(model.tag(), &mut buf).unwrap();
        let (tag, back) = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(tag, "gaussian_location");
        assert_eq!(back, data);
        assert!(Dataset::read_csv("1,2\n".as_bytes()).is_err());
    }
}
