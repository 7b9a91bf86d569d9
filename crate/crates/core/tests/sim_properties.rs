//! Statistical properties of the simulator against the analytic
//! independent-edge model of its generator graph.

use softdec_core::analysis::postselect_leakage;
use softdec_core::code::{build_noise_floor_graph, defect_rates, CodeLayout, DecodingGraph, NoiseParams};
use softdec_core::numeric::std_normal_cdf;
use softdec_core::pipeline::defect_stats;
use softdec_core::readout::ModelSet;
use softdec_core::sim::{
    generate_dataset, read_dataset, simulate, DatasetFormat, LeakageParams, QubitModels, SimConfig,
};
use softdec_oracles::odd_parity_probability;

fn all_qubits(layout: &CodeLayout) -> impl Iterator<Item = &str> {
    layout.ancillas.iter().chain(&layout.data_qubits).map(String::as_str)
}

/// Exact `<d_i>` and, per bulk edge, `<d_a d_b>` under independent edges.
fn analytic_moments(g: &DecodingGraph) -> (Vec<f64>, Vec<Option<f64>>) {
    let n = g.num_detectors();
    let incident = |d: usize, skip: Option<usize>| -> Vec<f64> {
        g.edges
            .iter()
            .enumerate()
            .filter(|(k, e)| Some(*k) != skip && e.endpoints.contains(&d))
            .map(|(_, e)| e.p)
            .collect()
    };
    let mean: Vec<f64> = (0..n).map(|d| odd_parity_probability(&incident(d, None))).collect();
    let joint = g
        .edges
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let [a, b] = e.endpoints;
            (b != g.boundary()).then(|| {
                let pa = odd_parity_probability(&incident(a, Some(k)));
                let pb = odd_parity_probability(&incident(b, Some(k)));
                e.p * (1.0 - pa) * (1.0 - pb) + (1.0 - e.p) * pa * pb
            })
        })
        .collect();
    (mean, joint)
}

fn check_moments(layout: &CodeLayout, config: &SimConfig, reference: &NoiseParams, models: Option<&QubitModels>) {
    let data = simulate(layout, config).unwrap().shots;
    let rounds = config.rounds[0];
    let g = build_noise_floor_graph(layout, reference, rounds).unwrap();
    let stats = defect_stats(layout, &g, &data, models).unwrap();
    let n = stats.shots as f64;
    let (mean, joint) = analytic_moments(&g);
    let within = |count: u64, p: f64| {
        let se = (p * (1.0 - p) / n).sqrt();
        ((count as f64 / n) - p).abs() <= 3.0 * se
    };
    for (d, &p) in mean.iter().enumerate() {
        assert!(within(stats.single[d], p), "<d_{d}> = {} vs {p}", stats.single[d] as f64 / n);
    }
    for (k, p) in joint.iter().enumerate() {
        if let Some(p) = *p {
            assert!(within(stats.pair[k], p), "edge {k}: {} vs {p}", stats.pair[k] as f64 / n);
        }
    }
}

#[test]
fn classified_defects_follow_the_graph_model() {
    let layout = CodeLayout::surface13();
    let mut config = SimConfig::new(6250, 31);
    config.rounds = vec![4];
    config.leakage = LeakageParams::none();
    config.keep_truth = false;
    check_moments(&layout, &config, &config.noise.clone(), None);
}

#[test]
fn analog_defects_follow_the_graph_model() {
    let layout = CodeLayout::surface13();
    let mut config = SimConfig::new(6250, 32);
    config.rounds = vec![4];
    config.leakage = LeakageParams::none();
    config.keep_truth = false;
    let set = ModelSet::synthetic(all_qubits(&layout), 8.0, 1.0);
    let models = QubitModels::new(&layout, &set).unwrap();
    config.readout = Some(set);
    // Hardening an 8 sigma separation misassigns with probability Phi(-4).
    let reference = NoiseParams {
        p_meas_class: std_normal_cdf(-4.0),
        ..config.noise
    };
    check_moments(&layout, &config, &reference, Some(&models));
}

#[test]
fn defect_rates_rise_then_level() {
    let layout = CodeLayout::surface13();
    let mut config = SimConfig::new(500, 33);
    config.rounds = vec![16];
    config.leakage = LeakageParams::none();
    config.keep_truth = false;
    let data = simulate(&layout, &config).unwrap().shots;
    let defects: Vec<Vec<u8>> = data.iter().map(|s| s.defects(&layout, None).unwrap().0).collect();
    let rates = defect_rates(&defects, 4).unwrap();
    for row in &rates {
        let bulk = &row[4..16];
        let level = bulk.iter().sum::<f64>() / bulk.len() as f64;
        assert!(row[0] < level, "{row:?}");
        assert!((0.01..=0.3).contains(&level), "{row:?}");
        assert!(bulk.iter().all(|r| (r - level).abs() < 0.25 * level), "{row:?}");
    }
}

#[test]
fn leakage_flags_follow_the_residence_model() {
    let layout = CodeLayout::surface13();
    let (p_leak, p_seep, rounds) = (0.01, 0.25, 8);
    let mut config = SimConfig::new(1000, 34);
    config.noise = NoiseParams::noiseless();
    config.rounds = vec![rounds];
    config.leakage = LeakageParams { p_leak, p_seep };
    config.keep_truth = false;
    let set = ModelSet::synthetic(all_qubits(&layout), 10.0, 1.0);
    let models = QubitModels::new(&layout, &set).unwrap();
    config.readout = Some(set);
    let data = simulate(&layout, &config).unwrap().shots;

    let per_shot: Vec<f64> = data
        .iter()
        .map(|s| {
            let (anc, _) = s.iq().unwrap();
            anc.iter()
                .flat_map(|row| row.iter().zip(&models.ancilla).map(|(&z, m)| m.leakage_flag(z).unwrap() as u8 as f64))
                .sum::<f64>()
        })
        .collect();
    let n = per_shot.len() as f64;
    let mean = per_shot.iter().sum::<f64>() / n;
    let se = (per_shot.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();

    // Expected leaked measurements per ancilla from the two-state chain.
    let mut leaked = 0.0;
    let mut expected = 0.0;
    for _ in 0..rounds {
        let stay = leaked * (1.0 - p_seep);
        leaked = stay + (1.0 - stay) * p_leak;
        expected += leaked;
    }
    expected *= 4.0;
    assert!((mean - expected).abs() < 3.0 * se, "{mean} vs {expected} (se {se})");
    // Long-run rate is close to p_leak times the mean residence 1/p_seep.
    assert!((leaked - p_leak / p_seep).abs() < 0.15 * p_leak / p_seep);

    let selection = postselect_leakage(&data, &models).unwrap();
    let keep = selection.retained[&rounds];
    let exact = (1.0 - p_leak).powi(4 * rounds as i32);
    let se = (exact * (1.0 - exact) / n).sqrt();
    assert!((keep - exact).abs() < 3.0 * se, "{keep} vs {exact}");
}

#[test]
fn leakage_retention_decays_with_rounds() {
    let layout = CodeLayout::surface13();
    let mut config = SimConfig::new(200, 35);
    config.rounds = vec![1, 2, 4, 8, 16];
    config.leakage.p_leak = 0.005;
    let set = ModelSet::synthetic(all_qubits(&layout), 10.0, 1.0);
    let models = QubitModels::new(&layout, &set).unwrap();
    config.readout = Some(set);
    let data = simulate(&layout, &config).unwrap().shots;
    let r = postselect_leakage(&data, &models).unwrap().retained;
    let values: Vec<f64> = r.values().copied().collect();
    assert!(values.windows(2).all(|w| w[1] <= w[0]), "{values:?}");
    assert!(values[4] < values[0]);

    config.leakage = LeakageParams::none();
    let data = simulate(&layout, &config).unwrap().shots;
    let r = postselect_leakage(&data, &models).unwrap().retained;
    assert!(r.values().all(|&f| f == 1.0), "{r:?}");
}

#[test]
fn dataset_files_are_deterministic() {
    let layout = CodeLayout::surface13();
    let dir = tempfile::tempdir().unwrap();
    let mut config = SimConfig::new(70, 36);
    config.rounds = vec![1, 3];
    config.readout = Some(ModelSet::synthetic(all_qubits(&layout), 4.0, 1.0));
    let write = |name: &str, threads: usize, format| {
        let path = dir.path().join(name);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| generate_dataset(&layout, &config, &path, format).unwrap());
        std::fs::read(path).unwrap()
    };
    for format in [DatasetFormat::Jsonl, DatasetFormat::Binary] {
        let a = write("a", 1, format);
        assert_eq!(a, write("b", 1, format));
        assert_eq!(a, write("c", 4, format));
    }
    let from_file = read_dataset(&dir.path().join("c")).unwrap();
    assert_eq!(from_file, simulate(&layout, &config).unwrap());
}

#[test]
fn dataset_sizes() {
    let layout = CodeLayout::surface13();
    let dir = tempfile::tempdir().unwrap();
    let mut config = SimConfig::new(0, 1);
    let path = dir.path().join("empty.jsonl");
    generate_dataset(&layout, &config, &path, DatasetFormat::Jsonl).unwrap();
    let empty = read_dataset(&path).unwrap();
    assert!(empty.shots.is_empty());
    assert_eq!(empty.header.config_hash, config.hash());

    config.shots = 1000;
    config.keep_truth = false;
    config.leakage = LeakageParams::none();
    assert_eq!(simulate(&layout, &config).unwrap().shots.len(), 80_000);
}
