mod common;

use common::{close, ledger_step, random_actions, random_config, random_state, worst};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rbc_core::economy::{ConsumerAction, FirmAction, GovernmentAction};
use rbc_core::{Economy, EconomyConfig, StepOutcome, WorldState};

type Actions = (Vec<ConsumerAction>, Vec<FirmAction>, GovernmentAction);

fn compare(
    cfg: &EconomyConfig,
    state: &WorldState,
    next: &WorldState,
    out: &StepOutcome,
    theta: f64,
    acts: &Actions,
) -> f64 {
    let l = ledger_step(cfg, state, &acts.0, theta);
    let flat = |v: &[Vec<f64>]| v.concat();
    [
        worst(&l.consumer_budget, &next.consumer_budget),
        worst(&l.firm_budget, &next.firm_budget),
        worst(&l.inventory, &next.inventory),
        worst(&l.capital, &next.capital),
        worst(&flat(&l.realized), &flat(&out.realized_consumption)),
        worst(&l.production, &out.production),
        worst(&l.export_revenue, &out.export_revenue),
        worst(&l.investment, &out.investment),
        worst(&l.profit, &out.profit),
        worst(&[l.tax_revenue], &[out.tax_revenue]),
        worst(&l.utility, &out.utility),
        worst(&[l.welfare], &[out.welfare]),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

#[test]
fn step_matches_scalar_ledger_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let (nc, nf) = (rng.gen_range(1..6), rng.gen_range(1..4));
        let cfg = random_config(&mut rng, nc, nf);
        let econ = Economy::new(cfg.clone()).unwrap();
        let state = random_state(&mut rng, &cfg);
        let acts = random_actions(&mut rng, &cfg);
        let theta = rng.gen_range(0.0..0.01);
        let (next, out) = econ.step(&state, &acts.0, &acts.1, &acts.2, theta).unwrap();
        let err = compare(&cfg, &state, &next, &out, theta, &acts);
        assert!(err <= 1e-9, "relative error {err:e}");
        assert_eq!(next.price, acts.1.iter().map(|f| f.price).collect::<Vec<_>>());
        assert_eq!(next.tax_income, acts.2.tax_income);
        assert_eq!(next.t, state.t + 1);
    }
}

#[test]
fn whole_episodes_match_the_ledger() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..40 {
        let cfg = random_config(&mut rng, 3, 2);
        let econ = Economy::new(cfg.clone()).unwrap();
        let mut state = econ.reset();
        while state.t < cfg.episode_length {
            let acts = random_actions(&mut rng, &cfg);
            let (next, out) = econ.step(&state, &acts.0, &acts.1, &acts.2, 0.01).unwrap();
            let err = compare(&cfg, &state, &next, &out, 0.01, &acts);
            assert!(err <= 1e-9, "t={} relative error {err:e}", state.t);
            state = next;
        }
    }
}

fn check_invariants(cfg: &EconomyConfig, s: &WorldState, next: &WorldState, out: &StepOutcome) {
    let nf = cfg.num_firms;
    let d_consumers: f64 = next.consumer_budget.iter().zip(&s.consumer_budget).map(|(a, b)| a - b).sum();
    let d_firms: f64 = next.firm_budget.iter().zip(&s.firm_budget).map(|(a, b)| a - b).sum();
    let expected = out.total_export_revenue() - out.total_investment();
    let scale = d_consumers.abs() + d_firms.abs() + expected.abs();
    assert!(
        (d_consumers + d_firms - expected).abs() <= 1e-9 * scale.max(1.0),
        "money leak: {} vs {expected}",
        d_consumers + d_firms
    );
    for i in 0..nf {
        let served: f64 = out.realized_consumption.iter().map(|c| c[i]).sum();
        let supply = s.inventory[i] + out.production[i];
        assert!(served + out.export_sold[i] <= supply * (1.0 + 1e-12) + 1e-9);
        assert!(next.inventory[i] >= 0.0);
        // every consumer gets the same share of their request
        let shares: Vec<f64> = (0..cfg.num_consumers)
            .filter(|&j| out.scaled_attempt[j][i] > 0.0)
            .map(|j| out.realized_consumption[j][i] / out.scaled_attempt[j][i])
            .collect();
        for w in shares.windows(2) {
            assert!((w[0] - w[1]).abs() <= 1e-12);
        }
    }
    for j in 0..cfg.num_consumers {
        let cost: f64 = out.scaled_attempt[j].iter().zip(&s.price).map(|(c, p)| c * p).sum();
        assert!(cost <= s.consumer_budget[j].max(0.0));
    }
    if cfg.government.floor_tax_revenue {
        assert!(out.tax_revenue >= 0.0);
        assert!(next.consumer_budget.iter().all(|b| *b >= -1e-6));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn money_is_conserved_over_episodes(seed in any::<u64>(), open in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (nc, nf) = (rng.gen_range(1..8), rng.gen_range(1..4));
        let mut cfg = random_config(&mut rng, nc, nf);
        cfg.export.enabled = open;
        let econ = Economy::new(cfg.clone()).unwrap();
        let mut state = econ.reset();
        while state.t < cfg.episode_length {
            let (c, f, g) = random_actions(&mut rng, &cfg);
            let (next, out) = econ.step(&state, &c, &f, &g, 0.01).unwrap();
            check_invariants(&cfg, &state, &next, &out);
            state = next;
        }
    }

    #[test]
    fn step_is_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = random_config(&mut rng, 4, 2);
        let econ = Economy::new(cfg.clone()).unwrap();
        let state = random_state(&mut rng, &cfg);
        let (c, f, g) = random_actions(&mut rng, &cfg);
        let a = econ.step(&state, &c, &f, &g, 0.005).unwrap();
        let b = econ.step(&state, &c, &f, &g, 0.005).unwrap();
        prop_assert_eq!(a.0, b.0);
    }
}

fn null_actions(cfg: &EconomyConfig) -> Actions {
    let consumers = vec![
        ConsumerAction {
            consumption: vec![0.0; cfg.num_firms],
            work_firm: None,
            hours: 0.0,
        };
        cfg.num_consumers
    ];
    let firms = vec![
        FirmAction {
            price: cfg.firm.initial_price,
            wage: cfg.firm.initial_wage,
        };
        cfg.num_firms
    ];
    (consumers, firms, GovernmentAction { tax_income: 0.0, tax_corporate: 0.0 })
}

#[test]
fn null_actions_without_investment_leave_the_state_constant() {
    let mut cfg = EconomyConfig {
        num_consumers: 3,
        num_firms: 2,
        ..EconomyConfig::default()
    };
    cfg.firm.invest_fraction = 0.0;
    let econ = Economy::new(cfg.clone()).unwrap();
    let start = econ.reset();
    let (c, f, g) = null_actions(&cfg);
    let mut state = start.clone();
    while state.t < cfg.episode_length {
        let (next, out) = econ.step(&state, &c, &f, &g, 0.01).unwrap();
        assert!(out.utility.iter().all(|u| *u == 0.0));
        assert_eq!(out.welfare, 0.0);
        assert_eq!(out.tax_revenue, 0.0);
        state = next;
        let mut expect = start.clone();
        expect.t = state.t;
        assert_eq!(state, expect);
    }
}

#[test]
fn untaxed_economy_redistributes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let cfg = random_config(&mut rng, 3, 2);
        let econ = Economy::new(cfg.clone()).unwrap();
        let mut state = random_state(&mut rng, &cfg);
        state.tax_income = 0.0;
        state.tax_corporate = 0.0;
        let (c, f, g) = random_actions(&mut rng, &cfg);
        let (next, out) = econ.step(&state, &c, &f, &g, 0.01).unwrap();
        assert_eq!(out.tax_revenue, 0.0);
        for j in 0..3 {
            let expect = state.consumer_budget[j] + out.labor_income[j] - out.consumption_cost[j];
            assert!(close(next.consumer_budget[j], expect, 1e-12));
        }
        for i in 0..2 {
            assert!(close(next.firm_budget[i], state.firm_budget[i] + out.profit[i], 1e-12));
        }
    }
}

#[test]
fn off_grid_actions_are_rejected() {
    let cfg = EconomyConfig {
        num_consumers: 2,
        num_firms: 2,
        ..EconomyConfig::default()
    };
    let econ = Economy::new(cfg.clone()).unwrap();
    let state = econ.reset();
    let (mut c, f, g) = null_actions(&cfg);
    c[0].consumption[1] = 2.5;
    assert!(econ.step(&state, &c, &f, &g, 0.01).is_err());
    let (c, mut f, g) = null_actions(&cfg);
    f[1].price = 750.0;
    assert!(econ.step(&state, &c, &f, &g, 0.01).is_err());
}
