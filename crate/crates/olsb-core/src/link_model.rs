//! Stochastic link-weight processes.
//!
//! Each link carries a distribution on `[0, 1]`; realizations are i.i.d.
//! across links and slots, and every draw is a pure function of
//! `(seed, link, slot)` so identical configs replay identically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::topology::{LinkId, Path};

/// Per-link weight distribution with support inside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightDistribution {
    Uniform { a: f64, b: f64 },
    Bernoulli { p: f64 },
    Beta { alpha: f64, beta: f64 },
    Constant { c: f64 },
}

impl WeightDistribution {
    /// Validates parameter ranges; `field` names the config location for
    /// diagnostics.
    pub fn validate(&self, field: &str) -> Result<()> {
        let ok = match *self {
            WeightDistribution::Uniform { a, b } => (0.0..=1.0).contains(&a) && a <= b && b <= 1.0,
            WeightDistribution::Bernoulli { p } => (0.0..=1.0).contains(&p),
            WeightDistribution::Beta { alpha, beta } => alpha > 0.0 && beta > 0.0,
            WeightDistribution::Constant { c } => (0.0..=1.0).contains(&c),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(field, format!("invalid parameters: {self:?}")))
        }
    }

    /// Analytical mean.
    pub fn mean(&self) -> f64 {
        match *self {
            WeightDistribution::Uniform { a, b } => 0.5 * (a + b),
            WeightDistribution::Bernoulli { p } => p,
            WeightDistribution::Beta { alpha, beta } => alpha / (alpha + beta),
            WeightDistribution::Constant { c } => c,
        }
    }

    fn sample(&self, seed: u64, link: u64, slot: u64) -> f64 {
        match *self {
            WeightDistribution::Constant { c } => c,
            WeightDistribution::Uniform { a, b } => {
                a + (b - a) * rng::uniform01(seed, Stream::LinkWeight, link, slot, 0)
            }
            WeightDistribution::Bernoulli { p } => {
                if rng::uniform01(seed, Stream::LinkWeight, link, slot, 0) < p {
                    1.0
                } else {
                    0.0
                }
            }
            WeightDistribution::Beta { alpha, beta } => {
                // Johnk's rejection sampler on a deterministic draw
                // sequence. The draw index advances on rejection, so the
                // result is still a pure function of (seed, link, slot).
                let mut draw = 0u64;
                loop {
                    let u = rng::uniform01(seed, Stream::BetaAux, link, slot, draw);
                    let v = rng::uniform01(seed, Stream::BetaAux, link, slot, draw + 1);
                    draw += 2;
                    let x = u.powf(1.0 / alpha);
                    let y = v.powf(1.0 / beta);
                    if x + y <= 1.0 && x + y > 0.0 {
                        return x / (x + y);
                    }
                    if draw > 10_000 {
                        return self.mean();
                    }
                }
            }
        }
    }
}

/// Immutable per-link distributions plus the run seed.
#[derive(Debug, Clone)]
pub struct WeightModel {
    dists: Vec<WeightDistribution>,
    seed: u64,
}

/// Realized link weights for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotWeights {
    pub slot: u64,
    pub weights: Vec<f64>,
}

impl SlotWeights {
    #[inline]
    pub fn get(&self, link: LinkId) -> f64 {
        self.weights[link.index()]
    }
}

impl WeightModel {
    pub fn new(dists: Vec<WeightDistribution>, seed: u64) -> Result<Self> {
        for (i, d) in dists.iter().enumerate() {
            d.validate(&format!("links[{i}].distribution"))?;
        }
        Ok(WeightModel { dists, seed })
    }

    pub fn n_links(&self) -> usize {
        self.dists.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fresh i.i.d. draws for every link at slot `t`; deterministic given
    /// `(seed, t)`.
    pub fn sample_slot(&self, t: u64) -> SlotWeights {
        let weights = self
            .dists
            .iter()
            .enumerate()
            .map(|(i, d)| d.sample(self.seed, i as u64, t))
            .collect();
        SlotWeights { slot: t, weights }
    }

    /// Analytical mean weight of one link.
    pub fn true_mean(&self, e: LinkId) -> f64 {
        self.dists[e.index()].mean()
    }
}

/// Realized path cost: the sum of the path's link weights normalized by the
/// node count, so costs stay in `[0, 1]`.
pub fn path_cost(p: &Path, w: &SlotWeights, n_nodes: usize) -> f64 {
    debug_assert!(n_nodes >= p.nodes.len());
    p.links.iter().map(|&lid| w.get(lid)).sum::<f64>() / n_nodes as f64
}

/// Mean path cost under the model, with the same normalization as
/// [`path_cost`].
pub fn path_mean(p: &Path, model: &WeightModel, n_nodes: usize) -> f64 {
    p.links.iter().map(|&lid| model.true_mean(lid)).sum::<f64>() / n_nodes as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{enumerate_paths, Graph, Link, NodeId};

    fn chain(n: usize) -> Graph {
        let links = (0..n - 1)
            .map(|i| Link { src: NodeId(i as u32), dst: NodeId(i as u32 + 1) })
            .collect();
        Graph::from_links(n, links, "chain").unwrap()
    }

    #[test]
    fn constant_links_sample_constant() {
        let model =
            WeightModel::new(vec![WeightDistribution::Constant { c: 0.3 }; 4], 9).unwrap();
        for t in [0u64, 1, 17, 100_000] {
            assert!(model.sample_slot(t).weights.iter().all(|&w| w == 0.3));
        }
    }

    #[test]
    fn bernoulli_zero_is_all_zeros() {
        let model =
            WeightModel::new(vec![WeightDistribution::Bernoulli { p: 0.0 }; 3], 1).unwrap();
        assert!(model.sample_slot(5).weights.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn sampling_is_deterministic() {
        let model =
            WeightModel::new(vec![WeightDistribution::Uniform { a: 0.0, b: 1.0 }; 5], 7).unwrap();
        assert_eq!(model.sample_slot(5), model.sample_slot(5));
    }

    #[test]
    fn true_means_are_analytical() {
        let model = WeightModel::new(
            vec![
                WeightDistribution::Uniform { a: 0.2, b: 0.6 },
                WeightDistribution::Bernoulli { p: 0.7 },
                WeightDistribution::Beta { alpha: 2.0, beta: 2.0 },
            ],
            0,
        )
        .unwrap();
        assert!((model.true_mean(LinkId(0)) - 0.4).abs() < 1e-12);
        assert!((model.true_mean(LinkId(1)) - 0.7).abs() < 1e-12);
        assert!((model.true_mean(LinkId(2)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(WeightDistribution::Uniform { a: 0.5, b: 0.2 }.validate("x").is_err());
        assert!(WeightDistribution::Uniform { a: -0.1, b: 0.2 }.validate("x").is_err());
        assert!(WeightDistribution::Bernoulli { p: 1.5 }.validate("x").is_err());
        assert!(WeightDistribution::Beta { alpha: 0.0, beta: 1.0 }.validate("x").is_err());
        assert!(WeightDistribution::Constant { c: 1.2 }.validate("x").is_err());
    }

    #[test]
    fn path_cost_matches_definition() {
        let g = chain(3);
        let p = &enumerate_paths(&g, NodeId(0), NodeId(2), 2, None)[0];
        let w = SlotWeights { slot: 0, weights: vec![0.2, 0.3] };
        assert!((path_cost(p, &w, 4) - 0.125).abs() < 1e-12);
        let zero = SlotWeights { slot: 0, weights: vec![0.0, 0.0] };
        assert_eq!(path_cost(p, &zero, 4), 0.0);
    }

    #[test]
    fn path_cost_three_links() {
        let g = chain(4);
        let p = &enumerate_paths(&g, NodeId(0), NodeId(3), 3, None)[0];
        let w = SlotWeights { slot: 0, weights: vec![0.5, 0.5, 0.5] };
        assert!((path_cost(p, &w, 5) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn path_mean_examples() {
        let g = chain(2);
        let p = &enumerate_paths(&g, NodeId(0), NodeId(1), 1, None)[0];
        let model = WeightModel::new(vec![WeightDistribution::Constant { c: 0.4 }], 0).unwrap();
        assert!((path_mean(p, &model, 2) - 0.2).abs() < 1e-12);

        let g = chain(3);
        let p = &enumerate_paths(&g, NodeId(0), NodeId(2), 2, None)[0];
        let model =
            WeightModel::new(vec![WeightDistribution::Uniform { a: 0.0, b: 1.0 }; 2], 0).unwrap();
        assert!((path_mean(p, &model, 4) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn path_cost_scales_linearly_in_weights() {
        // cost(p, alpha*w) = alpha*cost(p, w), checked with constant
        // distributions.
        let g = chain(4);
        let p = &enumerate_paths(&g, NodeId(0), NodeId(3), 3, None)[0];
        for alpha in [0.0, 0.25, 0.5, 1.0] {
            let w = SlotWeights { slot: 0, weights: vec![0.8, 0.4, 0.6] };
            let scaled = SlotWeights {
                slot: 0,
                weights: w.weights.iter().map(|x| alpha * x).collect(),
            };
            let lhs = path_cost(p, &scaled, 4);
            let rhs = alpha * path_cost(p, &w, 4);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_means_concentrate() {
        // Chernoff-Hoeffding check: |mean_n - mu| <= 3*sqrt(ln n / n) in at
        // least 99% of 1000 independent trials at n = 1e4.
        let n = 10_000u64;
        let bound = 3.0 * ((n as f64).ln() / n as f64).sqrt();
        let dist = WeightDistribution::Uniform { a: 0.0, b: 1.0 };
        let mut ok = 0;
        for trial in 0..1000u64 {
            let model = WeightModel::new(vec![dist], trial).unwrap();
            let mean: f64 = (0..n)
                .map(|t| model.sample_slot(t).weights[0])
                .sum::<f64>()
                / n as f64;
            if (mean - 0.5).abs() <= bound {
                ok += 1;
            }
        }
        assert!(ok >= 990, "only {ok}/1000 trials inside the bound");
    }

    #[test]
    fn beta_sampler_stays_in_unit_interval_and_centers() {
        let model =
            WeightModel::new(vec![WeightDistribution::Beta { alpha: 2.0, beta: 2.0 }], 3).unwrap();
        let n = 20_000u64;
        let mut sum = 0.0;
        for t in 0..n {
            let w = model.sample_slot(t).weights[0];
            assert!((0.0..=1.0).contains(&w));
            sum += w;
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "beta(2,2) empirical mean {mean}");
    }
}
