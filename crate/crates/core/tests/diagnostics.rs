use dnm_core::carsales::build_carsales;
use dnm_core::diagnostics::{residuals, sample_acf, whiteness_summary, Verdict};
use dnm_core::dnm::{compile, simulate, CompiledDnm, DnmSpec, NodeCpd};
use dnm_core::engine::{backtest, BacktestOptions, ObservationHistory};
use dnm_core::network::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PERIODS: usize = 500;
const SEEDS: u64 = 100;

fn simulated_history(model: &CompiledDnm, seed: u64) -> ObservationHistory {
    let mut h = ObservationHistory::for_model(model);
    for (t, row) in simulate(model, PERIODS, seed).unwrap().into_iter().enumerate() {
        let row: Vec<Option<usize>> = row.into_iter().map(Some).collect();
        h.insert(t, &row).unwrap();
    }
    h
}

fn supply_residuals(model: &CompiledDnm, data: &ObservationHistory) -> Vec<f64> {
    let options = BacktestOptions { update_weights: false, ..BacktestOptions::default() };
    let report = backtest(model, data, options).unwrap();
    residuals(&report, "s", "H").unwrap().values
}

fn with_supply_r(high: [f64; 4]) -> CompiledDnm {
    let mut spec: DnmSpec = build_carsales();
    for cpd in &mut spec.cpds {
        if let NodeCpd::Mixture(m) = cpd {
            m.r_rows = high.iter().map(|&p| Distribution::binary(p).unwrap()).collect();
        }
    }
    compile(&spec).unwrap()
}

#[test]
fn white_noise_flag_rate_matches_band() {
    let mut flagged = 0;
    let mut total = 0;
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let series: Vec<f64> = (0..1000).map(|_| rng.random::<f64>() - 0.5).collect();
        let acf = sample_acf(&series, 10).unwrap();
        flagged += acf.flagged.len();
        total += 10;
    }
    let rate = flagged as f64 / total as f64;
    assert!(rate < 0.10, "flag rate {rate}");
}

#[test]
fn correctly_specified_model_is_mostly_adequate() {
    let model = compile(&build_carsales()).unwrap();
    let adequate = (0..SEEDS)
        .filter(|&seed| {
            let r = supply_residuals(&model, &simulated_history(&model, seed));
            whiteness_summary(&r, 1).unwrap().verdict == Verdict::Adequate
        })
        .count();
    assert!(adequate >= 85, "{adequate} of {SEEDS} adequate");
}

#[test]
fn permuted_lagged_table_is_detected() {
    let truth = compile(&build_carsales()).unwrap();
    let wrong = with_supply_r([0.10, 0.90, 0.40, 0.40]);
    let detected = (0..SEEDS)
        .filter(|&seed| {
            let r = supply_residuals(&wrong, &simulated_history(&truth, seed));
            whiteness_summary(&r, 1).unwrap().acf.flagged.contains(&1)
        })
        .count();
    assert!(detected > 50, "{detected} of {SEEDS} flagged at lag 1");
}

fn mislagged(lag: usize) -> CompiledDnm {
    let mut spec: DnmSpec = build_carsales();
    for arc in &mut spec.lagged_arcs {
        arc.lag = lag;
    }
    for cpd in &mut spec.cpds {
        if let NodeCpd::Mixture(m) = cpd {
            for p in &mut m.r_parents {
                p.lag = lag;
            }
        }
    }
    compile(&spec).unwrap()
}

#[test]
fn mislagged_model_is_detected() {
    let truth = compile(&build_carsales()).unwrap();
    let wrong = mislagged(2);
    let detected = (0..SEEDS)
        .filter(|&seed| {
            let r = supply_residuals(&wrong, &simulated_history(&truth, seed));
            whiteness_summary(&r, 1).unwrap().acf.flagged.contains(&1)
        })
        .count();
    assert!(detected > 50, "{detected} of {SEEDS} flagged at lag 1");
}

#[test]
fn residuals_are_bounded_and_aligned() {
    let model = compile(&build_carsales()).unwrap();
    let data = simulated_history(&model, 7);
    let options = BacktestOptions { update_weights: false, ..BacktestOptions::default() };
    let report = backtest(&model, &data, options).unwrap();
    let res = residuals(&report, "s", "H").unwrap();
    assert_eq!(res.values.len(), report.rows.len() - 1);
    assert_eq!(res.times.first(), Some(&2));
    assert!(res.values.iter().all(|v| (-1.0..=1.0).contains(v)));
}
