//! Iterative extraction of bubble locations: the `k`-th center maximizes
//! `min_{j<k}|x - ξ_j|^{(n-2)/2} u(x)`, until that maximum drops below `C2`.

use super::FieldSampler;
use crate::error::{LabError, Result};
use crate::kernel::Dimension;
use crate::quadrature::{gauss_legendre, SphereRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub center: Vec<f64>,
    /// `u(ξ*)^{-2/(n-2)}`.
    pub lambda: f64,
    /// Maximum of the weighted function that selected this entry.
    pub weighted_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleTree {
    pub nodes: Vec<TreeNode>,
    /// `|ξ_j - ξ_k| / max(λ_j, λ_k)`, zero on the diagonal.
    pub separation: Vec<Vec<f64>>,
    /// Set when extraction stopped at `n_max` entries.
    pub truncated: bool,
    /// Final value of the weighted maximum (`≤ C2` unless truncated).
    pub final_weighted_max: f64,
}

impl BubbleTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Smallest off-diagonal separation ratio (`∞` for fewer than two).
    pub fn min_separation(&self) -> f64 {
        let mut m = f64::INFINITY;
        for (j, row) in self.separation.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                if j != k {
                    m = m.min(*v);
                }
            }
        }
        m
    }
}

/// Search domain: a closed ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeOptions {
    pub seeds: usize,
    pub seed: u64,
    pub n_max: usize,
}

impl Default for TreeOptions {
    fn default() -> Self {
        TreeOptions {
            seeds: 512,
            seed: 0x5eed,
            n_max: 16,
        }
    }
}

/// Default stopping level: twice the supremum `(√(n(n-2))/2)^{(n-2)/2}` of
/// `|x-ξ|^{(n-2)/2} W_{ξ,λ}(x)` for a single bubble.
pub fn default_c2(dim: Dimension) -> f64 {
    2.0 * ((dim.nf() * (dim.nf() - 2.0)).sqrt() / 2.0).powf(dim.alpha())
}

/// Uniform point in the unit ball of ℝⁿ: Gaussian direction, radius `U^{1/n}`.
fn unit_ball_point<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let rad = rng.random::<f64>().powf(1.0 / n as f64);
    v.into_iter().map(|x| x / norm * rad).collect()
}

struct Weighted<'a> {
    sampler: &'a dyn FieldSampler,
    centers: &'a [Vec<f64>],
    alpha: f64,
    domain: &'a Domain,
}

impl Weighted<'_> {
    fn inside(&self, x: &[f64]) -> bool {
        let d2: f64 = x.iter().zip(&self.domain.center).map(|(a, b)| (a - b) * (a - b)).sum();
        d2 <= self.domain.radius * self.domain.radius
    }

    // log f and ∇log f for f = D^α u, D = min_j |x - ξ_j|.
    fn log_and_grad(&self, x: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
        let u = self.sampler.value(x)?;
        if !(u > 0.0) {
            return Ok(None);
        }
        let g = self.sampler.gradient(x)?;
        let mut lg: Vec<f64> = g.iter().map(|v| v / u).collect();
        let mut val = u.ln();
        if let Some((d, c)) = self
            .centers
            .iter()
            .map(|c| (x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), c))
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        {
            if d == 0.0 {
                return Ok(None);
            }
            val += self.alpha * d.ln();
            for (k, l) in lg.iter_mut().enumerate() {
                *l += self.alpha * (x[k] - c[k]) / (d * d);
            }
        }
        Ok(Some((val, lg)))
    }

    /// Normalized gradient ascent with step adaptation; returns the local
    /// maximizer and `log f` there.
    fn ascend(&self, start: &[f64], initial_step: f64) -> Result<Option<(Vec<f64>, f64)>> {
        let Some((mut val, mut grad)) = self.log_and_grad(start)? else {
            return Ok(None);
        };
        let mut x = start.to_vec();
        let mut step = initial_step;
        let floor = 1e-13 * self.domain.radius.max(1.0);
        for _ in 0..5000 {
            let gn = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gn == 0.0 || step < floor {
                break;
            }
            let trial: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a + step * g / gn).collect();
            let next = if self.inside(&trial) { self.log_and_grad(&trial)? } else { None };
            match next {
                Some((v, g)) if v > val => {
                    x = trial;
                    val = v;
                    grad = g;
                    step *= 1.5;
                }
                _ => step *= 0.3,
            }
        }
        Ok(Some((x, val)))
    }
}

/// Extracts bubble centers and scales from `sampler` inside `domain`.
pub fn bubble_tree(sampler: &dyn FieldSampler, domain: &Domain, c2: f64, opts: &TreeOptions) -> Result<BubbleTree> {
    let dim = sampler.dim();
    let n = dim.n();
    if domain.center.len() != n || !(domain.radius > 0.0) {
        return Err(LabError::Domain("search domain needs a center in ℝⁿ and a positive radius".into()));
    }
    let alpha = dim.alpha();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut seeds: Vec<Vec<f64>> = vec![domain.center.clone()];
    for _ in 0..opts.seeds {
        let p = unit_ball_point(&mut rng, n);
        seeds.push(p.iter().zip(&domain.center).map(|(a, c)| c + domain.radius * a).collect());
    }
    let step0 = 0.1 * domain.radius;
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let mut nodes = Vec::new();
    let mut truncated = false;
    let final_max;
    loop {
        let weighted = Weighted {
            sampler,
            centers: &centers,
            alpha,
            domain,
        };
        let mut best: Option<(Vec<f64>, f64)> = None;
        for found in crate::par::map(&seeds, |s| weighted.ascend(s, step0)) {
            if let Some((x, v)) = found? {
                if best.as_ref().is_none_or(|b| v > b.1) {
                    best = Some((x, v));
                }
            }
        }
        let Some((xmax, logmax)) = best else {
            final_max = 0.0;
            break;
        };
        let fmax = logmax.exp();
        if fmax <= c2 {
            final_max = fmax;
            break;
        }
        if nodes.len() >= opts.n_max {
            truncated = true;
            final_max = fmax;
            break;
        }
        // Refine to the nearby maximum of u itself.
        let plain = Weighted {
            sampler,
            centers: &[],
            alpha,
            domain,
        };
        let u0 = sampler.value(&xmax)?;
        let local_step = 0.1 * u0.powf(-1.0 / alpha);
        let center = plain.ascend(&xmax, local_step)?.map(|(x, _)| x).unwrap_or(xmax);
        let peak = sampler.value(&center)?;
        nodes.push(TreeNode {
            center: center.clone(),
            lambda: peak.powf(-1.0 / alpha),
            weighted_max: fmax,
        });
        centers.push(center);
    }
    let k = nodes.len();
    let mut separation = vec![vec![0.0; k]; k];
    for j in 0..k {
        for l in 0..k {
            if j != l {
                let d = nodes[j]
                    .center
                    .iter()
                    .zip(&nodes[l].center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                separation[j][l] = d / nodes[j].lambda.max(nodes[l].lambda);
            }
        }
    }
    Ok(BubbleTree {
        nodes,
        separation,
        truncated,
        final_weighted_max: final_max,
    })
}

/// `∫_{B_{Rλ_j}(ξ_j)} |∇u|²` for each tree entry. Requires every pairwise
/// separation ratio to be at least `4R`.
pub fn quantized_energy(sampler: &dyn FieldSampler, tree: &BubbleTree, r_mult: f64) -> Result<Vec<f64>> {
    if !(r_mult > 0.0) {
        return Err(LabError::Domain(format!("radius multiple must be positive, got {r_mult}")));
    }
    let sep = tree.min_separation();
    if sep < 4.0 * r_mult {
        return Err(LabError::Overlap(format!(
            "minimum separation ratio {sep:.3} is below 4R = {}",
            4.0 * r_mult
        )));
    }
    let n = sampler.dim().n();
    let symmetric = sampler.symmetry_center();
    let rule = SphereRule::new(n, 4);
    let (gx, gw) = gauss_legendre(8);
    let mut out = Vec::with_capacity(tree.len());
    for node in &tree.nodes {
        let radius = r_mult * node.lambda;
        // Geometric panels in units of λ.
        let mut breaks = vec![0.0];
        let mut b = 0.25 * node.lambda;
        while b < radius {
            breaks.push(b);
            b *= 1.6;
        }
        breaks.push(radius);
        let is_radial = symmetric
            .as_ref()
            .is_some_and(|c| c.iter().zip(&node.center).all(|(a, b)| (a - b).abs() <= 1e-14 * (1.0 + a.abs())));
        let mut nodes_w = Vec::new();
        for w in breaks.windows(2) {
            let half = 0.5 * (w[1] - w[0]);
            for (xi, wi) in gx.iter().zip(&gw) {
                let rho = w[0] + half * (xi + 1.0);
                nodes_w.push((rho, half * wi * rho.powi(n as i32 - 1)));
            }
        }
        let shells = crate::par::map(&nodes_w, |&(rho, jac)| -> Result<f64> {
            let mut x = node.center.clone();
            let shell = if is_radial {
                x[0] += rho;
                let g = sampler.gradient(&x)?;
                crate::quadrature::sphere_area(n) * g.iter().map(|v| v * v).sum::<f64>()
            } else {
                let mut acc = 0.0;
                for q in 0..rule.len() {
                    let om = rule.point(q);
                    for k in 0..n {
                        x[k] = node.center[k] + rho * om[k];
                    }
                    let g = sampler.gradient(&x)?;
                    acc += rule.weights[q] * g.iter().map(|v| v * v).sum::<f64>();
                }
                acc
            };
            Ok(jac * shell)
        });
        let mut total = 0.0;
        for s in shells {
            total += s?;
        }
        out.push(total);
    }
    Ok(out)
}
