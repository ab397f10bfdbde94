//! Closed-form average path length model from degree moments.
//!
//! For a layer of N satellites whose degree distribution has mean h1 and
//! branching moment h2 = <q^2> - <q>, the expected number of nodes first
//! reached at hop x grows as h1 * (h2/h1)^(x-1). Requiring the cumulative
//! reach to cover the layer gives the monolayer mean distance
//!
//!   d = ln(N/h1) / ln(h2/h1) + 1.
//!
//! Stacking a second layer reached through k inter-layer connections adds
//! a search stage over N2/k targets with the second layer's branching
//! ratio chi2 = h2/h1, giving the cross-layer mean distance
//!
//!   d12 = d1 + ln(N2/k) / ln(chi2) + 1,
//!
//! and the network-wide mean is the pair-count weighted combination of
//! the intra- and cross-layer means. The model trades accuracy for O(1)
//! evaluation; exact values come from `topology::bfs_apl` and callers are
//! expected to report both.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::DegreeDistribution;

#[derive(Debug, Error)]
pub enum AplError {
    #[error("branching ratio chi = {0} is not above 1; the reach model needs an expanding frontier")]
    NonExpanding(f64),
    #[error("layer of {n} satellites does not exceed mean degree {h1}")]
    TooSmall { n: usize, h1: f64 },
    #[error("ilc count {k} outside 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("hop count must be at least 1")]
    ZeroHops,
    #[error("cross-layer term joins layers {i} and {j}; only tandem neighbors are modeled")]
    NonTandem { i: usize, j: usize },
    #[error("bound undefined: n2 = {n2} does not exceed d1 * ln(chi2) = {product}")]
    BoundUndefined { n2: usize, product: f64 },
}

/// Degree moments of one layer: size, mean degree, branching moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerMoments {
    pub n: usize,
    /// Mean degree <q>.
    pub h1: f64,
    /// Branching moment <q^2> - <q>.
    pub h2: f64,
}

impl LayerMoments {
    pub fn new(n: usize, h1: f64, h2: f64) -> Self {
        LayerMoments { n, h1, h2 }
    }

    pub fn from_distribution(dd: &DegreeDistribution) -> Self {
        let h1 = dd.first_moment();
        LayerMoments {
            n: dd.n,
            h1,
            h2: dd.second_moment() - h1,
        }
    }

    /// Branching ratio chi = h2/h1, the frontier growth factor per hop.
    pub fn chi(&self) -> f64 {
        self.h2 / self.h1
    }
}

/// Expected number of nodes first reached at hop x: h1 * chi^(x-1).
pub fn neighbors_at_hops(m: &LayerMoments, x: usize) -> Result<f64, AplError> {
    if x == 0 {
        return Err(AplError::ZeroHops);
    }
    let chi = m.chi();
    if chi <= 1.0 {
        return Err(AplError::NonExpanding(chi));
    }
    Ok(m.h1 * chi.powi(x as i32 - 1))
}

/// Monolayer mean distance ln(N/h1)/ln(chi) + 1.
pub fn monolayer_apl(m: &LayerMoments) -> Result<f64, AplError> {
    let chi = m.chi();
    if chi <= 1.0 {
        return Err(AplError::NonExpanding(chi));
    }
    if (m.n as f64) <= m.h1 {
        return Err(AplError::TooSmall { n: m.n, h1: m.h1 });
    }
    Ok((m.n as f64 / m.h1).ln() / chi.ln() + 1.0)
}

/// Cross-layer mean distance d1 + ln(N2/k)/ln(chi2) + 1 when layer 2 is
/// reached over k inter-layer connections.
pub fn crosslayer_apl(d1: f64, n2: usize, k: usize, chi2: f64) -> Result<f64, AplError> {
    if k == 0 || k > n2 {
        return Err(AplError::KOutOfRange { k, max: n2 });
    }
    if chi2 <= 1.0 {
        return Err(AplError::NonExpanding(chi2));
    }
    Ok(d1 + (n2 as f64 / k as f64).ln() / chi2.ln() + 1.0)
}

/// Unordered pair count n*(n-1)/2.
pub fn pair_count(n: usize) -> f64 {
    n as f64 * (n as f64 - 1.0) / 2.0
}

/// Network mean distance of a two-layer stack: intra- and cross-layer
/// means weighted by their pair counts.
pub fn total_apl_two_layer(d1: f64, d2: f64, d12: f64, n1: usize, n2: usize) -> f64 {
    let e1 = pair_count(n1);
    let e2 = pair_count(n2);
    let cross = n1 as f64 * n2 as f64;
    let e_total = pair_count(n1 + n2);
    (d1 * e1 + d2 * e2 + d12 * cross) / e_total
}

/// One layer's contribution to the tandem combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerTerm {
    pub n: usize,
    /// Intra-layer mean distance.
    pub d: f64,
}

/// Cross-layer mean distance between tandem neighbors i and i+1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossTerm {
    pub i: usize,
    pub j: usize,
    pub d: f64,
}

/// Tandem multi-layer combination. Layers couple only to their neighbors
/// in stack order; the denominator still counts every pair of the union,
/// mirroring the two-layer weighting.
pub fn total_apl_multi(layers: &[LayerTerm], cross: &[CrossTerm]) -> Result<f64, AplError> {
    let mut numer = 0.0;
    let mut n_total = 0usize;
    for t in layers {
        numer += t.d * pair_count(t.n);
        n_total += t.n;
    }
    for c in cross {
        if c.j != c.i + 1 || c.j >= layers.len() {
            return Err(AplError::NonTandem { i: c.i, j: c.j });
        }
        numer += c.d * layers[c.i].n as f64 * layers[c.j].n as f64;
    }
    Ok(numer / pair_count(n_total))
}

/// Deployment-scale bound from the cost curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KBound {
    /// k may not usefully exceed n2*ln(chi2)/(n2 - d1*ln(chi2)).
    pub k_max: f64,
    /// True when n1 > n2 > ln(n1) + 3, the regime in which the bound is
    /// guaranteed below n2/2.
    pub condition_met: bool,
}

/// Upper bound on the worthwhile number of inter-layer connections,
/// derived from minimizing apl * normalized link count.
pub fn optimal_k_bound(n1: usize, n2: usize, d1: f64, chi2: f64) -> Result<KBound, AplError> {
    if chi2 <= 1.0 {
        return Err(AplError::NonExpanding(chi2));
    }
    let l = chi2.ln();
    let product = d1 * l;
    if n2 as f64 <= product {
        return Err(AplError::BoundUndefined { n2, product });
    }
    let k_max = n2 as f64 * l / (n2 as f64 - product);
    let condition_met = n1 > n2 && n2 as f64 > (n1 as f64).ln() + 3.0;
    Ok(KBound { k_max, condition_met })
}

/// Deployment cost f1 * f2: the path-length term times the link count
/// normalized into the same range, f2 = (d1/n2) * k.
pub fn deployment_cost(apl: f64, k: usize, n2: usize, d1: f64) -> Result<f64, AplError> {
    if k == 0 || k > n2 {
        return Err(AplError::KOutOfRange { k, max: n2 });
    }
    Ok(apl * d1 / n2 as f64 * k as f64)
}
