//! Per-agent economic rules. Each function is one rule of the dynamics and
//! is independent of how a step is sequenced.

use crate::config::{ExportConfig, WelfareMode};

/// Scales a consumer's attempted basket so its cost at `prices` fits in
/// `budget`.
///
/// Baskets already within budget are returned unchanged. Otherwise every
/// good is scaled by the same factor, so the relative composition is kept
/// and the resulting cost never exceeds the budget. A negative budget is
/// treated as zero.
pub fn scale_to_budget(attempted: &[f64], prices: &[f64], budget: f64) -> Vec<f64> {
    let mut out = attempted.to_vec();
    scale_to_budget_in_place(&mut out, prices, budget);
    out
}

pub(crate) fn scale_to_budget_in_place(basket: &mut [f64], prices: &[f64], budget: f64) {
    let budget = budget.max(0.0);
    let cost = basket_cost(basket, prices);
    if cost <= budget {
        return;
    }
    let mut factor = budget / cost;
    let original: Vec<f64> = basket.to_vec();
    loop {
        for (b, o) in basket.iter_mut().zip(&original) {
            *b = o * factor;
        }
        // Rounding can leave the cost a few ulps above the budget.
        if basket_cost(basket, prices) <= budget {
            break;
        }
        factor *= 1.0 - 4.0 * f64::EPSILON;
    }
}

pub fn basket_cost(basket: &[f64], prices: &[f64]) -> f64 {
    basket.iter().zip(prices).map(|(c, p)| c * p).sum()
}

/// Share of each consumer's request for one good that is actually served.
///
/// Returns the rationing factor `min(1, available / demand)` (1 when demand
/// is zero) and whether the good was overdemanded.
pub fn ration_factor(total_demand: f64, available: f64) -> (f64, bool) {
    if total_demand <= 0.0 {
        return (1.0, false);
    }
    ((available / total_demand).min(1.0), total_demand > available)
}

/// Proportional rationing of one good among consumers.
///
/// `attempted[j]` is consumer `j`'s (budget-scaled) request. Returns the
/// realized consumption per consumer and the overdemand flag.
pub fn ration(attempted: &[f64], inventory: f64) -> (Vec<f64>, bool) {
    let total: f64 = attempted.iter().sum();
    let (factor, over) = ration_factor(total, inventory);
    (attempted.iter().map(|c| factor * c).collect(), over)
}

/// Cobb-Douglas output `a * k^(1 - alpha) * l^alpha`, with `0^0 = 1`.
pub fn produce(capital: f64, labor: f64, a: f64, alpha: f64) -> f64 {
    a * capital.powf(1.0 - alpha) * labor.powf(alpha)
}

/// Capital investment for the step: a fixed fraction of a positive budget.
pub fn firm_invest(budget: f64, fraction: f64) -> f64 {
    if budget > 0.0 {
        fraction * budget
    } else {
        0.0
    }
}

/// Units exported and the revenue they bring.
///
/// The export market buys up to the quota whenever the posted price is
/// strictly above its minimum, regardless of the price level.
pub fn export_step(price: f64, remaining: f64, cfg: &ExportConfig) -> (f64, f64) {
    if !cfg.enabled || price <= cfg.min_price {
        return (0.0, 0.0);
    }
    let sold = cfg.quota.min(remaining.max(0.0));
    (sold, price * sold)
}

/// Isoelastic utility of consumption over goods, less linear disutility of
/// the hours worked this step.
pub fn consumer_utility(consumption: &[f64], hours: f64, theta: f64, eta: f64) -> f64 {
    let one_minus = 1.0 - eta;
    let goods: f64 = consumption
        .iter()
        .map(|c| ((c + 1.0).powf(one_minus) - 1.0) / one_minus)
        .sum();
    goods - 0.5 * theta * hours
}

pub fn social_welfare(
    utilities: &[f64],
    profits: &[f64],
    mode: WelfareMode,
    firm_weight: f64,
) -> f64 {
    let consumers: f64 = utilities.iter().sum();
    match mode {
        WelfareMode::ConsumerOnly => consumers,
        WelfareMode::Total => consumers + firm_weight * profits.iter().sum::<f64>(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn scale_to_budget_examples() {
        assert_eq!(scale_to_budget(&[2.0, 2.0], &[1000.0, 1000.0], 2000.0), vec![1.0, 1.0]);
        assert_eq!(scale_to_budget(&[1.0, 0.0], &[1000.0, 1000.0], 5000.0), vec![1.0, 0.0]);
        // cost 3*500 + 1*2500 = 4000, factor 1000/4000
        let out = scale_to_budget(&[3.0, 1.0], &[500.0, 2500.0], 1000.0);
        assert!(close(out[0], 0.75, 1e-12) && close(out[1], 0.25, 1e-12), "{out:?}");
    }

    #[test]
    fn zero_prices_never_scale() {
        assert_eq!(scale_to_budget(&[5.0, 3.0], &[0.0, 0.0], 0.0), vec![5.0, 3.0]);
    }

    #[test]
    fn ration_examples() {
        let (c, o) = ration(&[4.0, 16.0], 10.0);
        assert_eq!(c[0], 2.0);
        assert!(o);
        let (c, o) = ration(&[5.0], 10.0);
        assert_eq!(c[0], 5.0);
        assert!(!o);
        let (c, o) = ration(&[7.0], 0.0);
        assert_eq!(c[0], 0.0);
        assert!(o);
        assert_eq!(ration_factor(0.0, 0.0), (1.0, false));
    }

    #[test]
    fn produce_examples() {
        assert_eq!(produce(10000.0, 0.0, 1.0, 0.2), 0.0);
        for alpha in [0.0, 0.2, 0.5, 1.0] {
            assert_eq!(produce(1.0, 1.0, 1.0, alpha), 1.0);
        }
        // 5000^0.2 * 1040^0.8 = 5.4928 * 259.19
        let y = produce(5000.0, 1040.0, 1.0, 0.8);
        assert!((y - 1423.707).abs() < 1e-3, "{y}");
        // alpha = 0 means output does not depend on labor, even at zero labor
        assert_eq!(produce(50.0, 0.0, 2.0, 0.0), 100.0);
    }

    #[test]
    fn invest_examples() {
        assert_eq!(firm_invest(1000.0, 0.1), 100.0);
        assert_eq!(firm_invest(-500.0, 0.1), 0.0);
        assert_eq!(firm_invest(2_200_000.0, 0.1), 220_000.0);
    }

    #[test]
    fn export_examples() {
        let cfg = ExportConfig { enabled: true, min_price: 500.0, quota: 100.0 };
        assert_eq!(export_step(1000.0, 30.0, &cfg), (30.0, 30_000.0));
        assert_eq!(export_step(500.0, 30.0, &cfg), (0.0, 0.0));
        assert_eq!(export_step(2500.0, 400.0, &cfg), (100.0, 250_000.0));
        let closed = ExportConfig { enabled: false, ..cfg };
        assert_eq!(export_step(2500.0, 400.0, &closed), (0.0, 0.0));
    }

    #[test]
    fn utility_examples() {
        assert_eq!(consumer_utility(&[0.0, 0.0, 0.0], 0.0, 0.01, 0.1), 0.0);
        // (2^0.9 - 1) / 0.9 = 0.86607 / 0.9
        let u = consumer_utility(&[1.0], 0.0, 0.01, 0.1);
        assert!((u - 0.962_30).abs() < 1e-5, "{u}");
        let u = consumer_utility(&[0.0], 1040.0, 0.01, 0.1);
        assert!(close(u, -5.2, 1e-12), "{u}");
    }

    #[test]
    fn welfare_examples() {
        assert_eq!(social_welfare(&[1.0, 2.0, 3.0], &[5.0], WelfareMode::ConsumerOnly, 0.0025), 6.0);
        let w = social_welfare(&[1.0, 2.0, 3.0], &[100_000.0, 300_000.0], WelfareMode::Total, 0.0025);
        assert!(close(w, 1006.0, 1e-12));
        assert_eq!(social_welfare(&[0.0; 4], &[0.0; 2], WelfareMode::Total, 0.0025), 0.0);
    }

    proptest! {
        #[test]
        fn scaled_basket_fits_budget(
            basket in prop::collection::vec(0.0f64..10.0, 1..6),
            prices in prop::collection::vec(0.0f64..2500.0, 6),
            budget in 0.0f64..20_000.0,
        ) {
            let prices = &prices[..basket.len()];
            let out = scale_to_budget(&basket, prices, budget);
            prop_assert!(basket_cost(&out, prices) <= budget || out == basket);
            for (o, b) in out.iter().zip(&basket) {
                prop_assert!(*o <= *b && *o >= 0.0);
            }
        }

        #[test]
        fn rationing_is_proportional_and_feasible(
            asks in prop::collection::vec(0.0f64..10.0, 1..8),
            inventory in 0.0f64..40.0,
        ) {
            let (c, _) = ration(&asks, inventory);
            let total: f64 = c.iter().sum();
            prop_assert!(total <= inventory * (1.0 + 1e-12) + 1e-12);
            let ratios: Vec<f64> = c.iter().zip(&asks).filter(|(_, a)| **a > 0.0).map(|(c, a)| c / a).collect();
            for r in &ratios {
                prop_assert!((r - ratios[0]).abs() < 1e-12);
            }
        }

        #[test]
        fn utility_monotone(
            c in prop::collection::vec(0.0f64..10.0, 1..5),
            bump in 0.0f64..5.0,
            good in 0usize..5,
            hours in 0.0f64..1040.0,
            extra_hours in 0.0f64..500.0,
            theta in 0.0f64..0.05,
        ) {
            let base = consumer_utility(&c, hours, theta, 0.1);
            let mut more = c.clone();
            let g = good % c.len();
            more[g] += bump;
            prop_assert!(consumer_utility(&more, hours, theta, 0.1) >= base);
            prop_assert!(consumer_utility(&c, hours + extra_hours, theta, 0.1) <= base);
        }
    }
}
