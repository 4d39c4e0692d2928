use rand::Rng;
use rand_distr::StandardNormal;
use vindrift::impacts::impact_vector;
use vindrift::regression::{fit, symbolic, OsgaParams, RandomForestParams};
use vindrift::rng::seeded;
use vindrift::vessels::{benchmark_configs, simulate};
use vindrift::{Backend, Dataset, ModelSpec, VesselConfig};

fn noisy_plane(rows: usize, seed: u64) -> Dataset {
    let mut rng = seeded(seed);
    let mut col = || (0..rows).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>();
    let (a, b, e, noise) = (col(), col(), col(), col());
    let y = (0..rows).map(|i| 2.0 * a[i] - b[i] + 0.05 * e[i]).collect();
    Dataset::new(vec![("a", a), ("b", b), ("noise", noise), ("y", y)]).unwrap()
}

fn small_forest() -> Backend {
    Backend::RandomForest(RandomForestParams { trees: 10, ..Default::default() })
}

fn small_osga() -> Backend {
    Backend::Symbolic(OsgaParams { population: 30, max_generations: 10, ..Default::default() })
}

#[test]
fn predictions_ignore_column_order() {
    let ds = noisy_plane(120, 1);
    let shuffled = ds.reorder_columns(&["y", "noise", "b", "a"]).unwrap();
    for backend in [Backend::Linear, small_forest(), small_osga()] {
        let spec = ModelSpec::all_visible(&ds, "y", backend, 3);
        let m = fit(&spec, &ds).unwrap();
        assert_eq!(m.predict(&ds).unwrap(), m.predict(&shuffled).unwrap());
        let refit = fit(&spec, &shuffled).unwrap();
        assert_eq!(refit.predict(&shuffled).unwrap(), m.predict(&ds).unwrap());
    }
}

#[test]
fn forest_error_shrinks_with_more_trees() {
    let ds = noisy_plane(150, 2);
    let counts = [1, 5, 25];
    let mut comparisons = 0;
    let mut violations = 0;
    for seed in 0..20 {
        let nmse: Vec<f64> = counts
            .iter()
            .map(|&trees| {
                let backend = Backend::RandomForest(RandomForestParams { trees, ..Default::default() });
                let m = fit(&ModelSpec::all_visible(&ds, "y", backend, seed), &ds).unwrap();
                m.evaluate(&ds).unwrap().nmse
            })
            .collect();
        for w in nmse.windows(2) {
            comparisons += 1;
            if w[1] > w[0] {
                violations += 1;
            }
        }
    }
    assert!(violations as f64 <= 0.05 * comparisons as f64, "{violations} of {comparisons}");
}

#[test]
fn symbolic_recovers_a_sum() {
    let mut hits = 0;
    for seed in 0..10 {
        let mut rng = seeded(100 + seed);
        let x1: Vec<f64> = (0..200).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x2: Vec<f64> = (0..200).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
        let out = symbolic::fit(&[&x1, &x2], &y, &OsgaParams::default(), seed).unwrap();
        if out.best_nmse < 0.01 {
            hits += 1;
        }
    }
    assert!(hits >= 9, "{hits}/10 runs reached NMSE < 0.01");
}

#[test]
fn noise_input_has_small_impact() {
    let (train, test) = noisy_plane(400, 5).split(0.66).unwrap();
    let m = fit(&ModelSpec::all_visible(&train, "y", Backend::Linear, 0), &train).unwrap();
    let iv = impact_vector(&m, &test, 5, 9).unwrap();
    assert!(iv.impact("noise").unwrap() < 0.1);
    assert_eq!(iv.impact("a").unwrap(), 1.0);
}

#[test]
fn impact_ranking_survives_affine_target_change() {
    let ds = noisy_plane(300, 6);
    let y2: Vec<f64> = ds.column("y").unwrap().iter().map(|v| 3.0 * v + 5.0).collect();
    let ds2 = ds.with_column_values("y", y2).unwrap();
    let order = |ds: &Dataset| {
        let m = fit(&ModelSpec::all_visible(ds, "y", Backend::Linear, 0), ds).unwrap();
        let mut e = impact_vector(&m, ds, 5, 1).unwrap().entries;
        e.sort_by(|a, b| b.impact.total_cmp(&a.impact));
        e.into_iter().map(|e| e.input).collect::<Vec<_>>()
    };
    assert_eq!(order(&ds), order(&ds2));
}

#[test]
fn vessel_model_leans_on_inflows_and_rates() {
    // y3 is hidden, so the fit follows the summed balance of both vessels
    let (stable, _) = benchmark_configs(&VesselConfig::default());
    for cfg in &stable {
        let (train, test) = simulate(cfg).unwrap().split(0.66).unwrap();
        let m = fit(&ModelSpec::all_visible(&train, "y1", Backend::Linear, 0), &train).unwrap();
        for ds in [&train, &test] {
            let mut e = impact_vector(&m, ds, 5, 0).unwrap().entries;
            e.sort_by(|a, b| b.impact.total_cmp(&a.impact));
            let mut top: Vec<&str> = e[..4].iter().map(|e| e.input.as_str()).collect();
            top.sort_unstable();
            assert_eq!(top, ["d1_y1", "d1_y2", "u1", "u2"]);
        }
    }
}
