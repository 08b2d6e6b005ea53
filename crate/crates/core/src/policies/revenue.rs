//! Single-buyer posted pricing.

use serde::{Deserialize, Serialize};

use crate::value_dist::DiscreteValueDistribution;

/// Revenue ties within this margin go to the lower price.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePolicy {
    pub price: f64,
}

/// `p * Pr[r >= p]`; the buyer accepts at equality.
pub fn revenue(d: &DiscreteValueDistribution, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    p * d.prob_at_least(p)
}

/// Revenue-maximizing posted price and its revenue.
///
/// For a discrete distribution some atom is always optimal, so only atoms
/// are scanned. Ties go to the lowest price.
pub fn optimal_price(d: &DiscreteValueDistribution) -> (f64, f64) {
    let mut best = (d.min_atom(), revenue(d, d.min_atom()));
    for &a in &d.atoms()[1..] {
        let r = revenue(d, a);
        if r > best.1 + TIE_TOL {
            best = (a, r);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn revenue_examples() {
        let p = DiscreteValueDistribution::point(0.7, 1.0).unwrap();
        assert!((revenue(&p, 0.7) - 0.7).abs() < 1e-15);
        let u = DiscreteValueDistribution::uniform(vec![0.4, 0.8], 1.0).unwrap();
        assert!((revenue(&u, 0.8) - 0.4).abs() < 1e-15);
        assert_eq!(revenue(&u, 0.0), 0.0);
    }

    #[test]
    fn optimal_price_examples() {
        let p = DiscreteValueDistribution::point(0.7, 1.0).unwrap();
        assert_eq!(optimal_price(&p), (0.7, 0.7));
        let u = DiscreteValueDistribution::uniform(vec![0.4, 0.8], 1.0).unwrap();
        let (price, rev) = optimal_price(&u);
        assert_eq!(price, 0.4);
        assert!((rev - 0.4).abs() < 1e-15);
        let s = DiscreteValueDistribution::uniform(vec![0.4, 1.0], 1.0).unwrap();
        let (price, rev) = optimal_price(&s);
        assert_eq!(price, 1.0);
        assert!((rev - 0.5).abs() < 1e-15);
    }
}
