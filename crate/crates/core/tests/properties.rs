use proptest::prelude::*;

use uwqkd::analysis::{gamma, ChannelSelection, EmpiricalCdf, GammaCurve, Weighting};
use uwqkd::config::LinkConfig;
use uwqkd::gate::{default_gate_grid, sweep_gate, LinkBudget};
use uwqkd::medium::WaterMedium;
use uwqkd::qber::{qber, DarkCountWindow, NoiseBudget};
use uwqkd::store::{load, persist, ArrivalSet, Totals};
use uwqkd::transport::{trace_photon, update_weight, ArrivalRecord, Fate};

fn record() -> impl Strategy<Value = ArrivalRecord> {
    (-0.1f64..0.1, -0.1f64..0.1, 0.0f64..2e-9, 0.0f64..1.5, 1e-4f64..=1.0).prop_map(|(x, y, d, a, w)| ArrivalRecord {
        hit_x: x,
        hit_y: y,
        delay: d,
        aoa: a,
        weight: w,
    })
}

fn arrival_set(records: Vec<ArrivalRecord>, extra: u64, seed: u64) -> ArrivalSet {
    let n = records.len() as u64;
    let mut config = LinkConfig::default();
    config.simulation.photons = n + extra;
    config.simulation.seed = seed;
    ArrivalSet {
        config,
        n_photons: n + extra,
        seed,
        software_version: "0.1.0".into(),
        totals: Totals {
            arrived: n,
            absorbed: extra / 2,
            escaped: extra - extra / 2,
            arrived_weight: records.iter().map(|r| r.weight).sum(),
        },
        records,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn persist_load_is_identity(recs in prop::collection::vec(record(), 0..300), extra in 0u64..10_000, seed: u64) {
        let set = arrival_set(recs, extra, seed);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.uqkd");
        persist(&set, &path).unwrap();
        let back = load(&path).unwrap();
        prop_assert_eq!(&back, &set);
        let bytes = std::fs::read(&path).unwrap();
        persist(&back, &path).unwrap();
        prop_assert_eq!(bytes, std::fs::read(&path).unwrap());
    }

    #[test]
    fn gamma_is_monotone_in_fov_and_gate(
        recs in prop::collection::vec(record(), 1..200),
        f1 in 0.0f64..1.6, f2 in 0.0f64..1.6,
        g1 in 0.0f64..2.5e-9, g2 in 0.0f64..2.5e-9,
        weighted: bool,
    ) {
        let set = arrival_set(recs, 1000, 1);
        let w = if weighted { Weighting::Weight } else { Weighting::Count };
        let (flo, fhi) = (f1.min(f2), f1.max(f2));
        let (glo, ghi) = (g1.min(g2), g1.max(g2));
        let base = gamma(&set, flo, glo, w);
        prop_assert!(gamma(&set, fhi, glo, w) >= base);
        prop_assert!(gamma(&set, flo, ghi, w) >= base);
        prop_assert!((0.0..=1.0).contains(&base));
        let curve = GammaCurve::new(&set, flo, w);
        let c_lo = curve.at(glo);
        let c_hi = curve.at(ghi);
        prop_assert!(c_hi >= c_lo);
        prop_assert!((c_lo - base).abs() <= 1e-12 * base.max(1e-300));
    }

    #[test]
    fn quantiles_are_monotone_and_order_free(
        mut samples in prop::collection::vec((-1e3f64..1e3, 1e-3f64..10.0), 1..200),
        l1 in 0.0f64..=1.0, l2 in 0.0f64..=1.0,
        rot in 0usize..200,
    ) {
        let cdf = EmpiricalCdf::new(samples.clone()).unwrap();
        let (lo, hi) = (l1.min(l2), l1.max(l2));
        let (qlo, qhi) = (cdf.quantile(lo).unwrap(), cdf.quantile(hi).unwrap());
        prop_assert!(qlo <= qhi);
        let k = rot % samples.len();
        samples.rotate_left(k);
        samples.reverse();
        let permuted = EmpiricalCdf::new(samples).unwrap();
        prop_assert_eq!(permuted.quantile(lo).unwrap(), qlo);
        prop_assert_eq!(permuted.quantile(hi).unwrap(), qhi);
        prop_assert!(cdf.cdf(qhi) >= cdf.cdf(qlo));
    }

    #[test]
    fn config_round_trips(
        r0 in 0.0f64..0.5,
        div in 0.0f64..60.0,
        dist in 1.0f64..100.0,
        seed: u64,
        photons in 1u64..1_000_000_000,
        level in 0.5f64..0.9999,
        gate_dark: bool,
    ) {
        let mut c = LinkConfig::default();
        c.transmitter.r0_m = r0;
        c.transmitter.divergence_deg = div;
        c.receiver.distance_m = dist;
        c.receiver.dark_counts_window = if gate_dark { DarkCountWindow::Gate } else { DarkCountWindow::Bit };
        c.simulation.seed = seed;
        c.simulation.photons = photons;
        c.analysis.quantile_level = level;
        let text = c.to_canonical_text();
        let back = LinkConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_canonical_text(), text);
        prop_assert_eq!(back.campaign_hash(), c.campaign_hash());
    }

    #[test]
    fn qber_limits(n_noise in 1e-12f64..1e-3, gamma_v in 1e-9f64..1.0) {
        let noisy = NoiseBudget { background: 0.0, dark: n_noise, per_detector: n_noise };
        prop_assert_eq!(qber(0.0, 1.0, &noisy).unwrap(), 0.5);
        let quiet = NoiseBudget { background: 0.0, dark: 0.0, per_detector: 0.0 };
        prop_assert_eq!(qber(gamma_v, 1.0, &quiet).unwrap(), 0.0);
        let q = qber(gamma_v, 1.0, &noisy).unwrap();
        prop_assert!(q > 0.0 && q < 0.5);
    }

    #[test]
    fn enlarging_the_grid_never_hurts(
        recs in prop::collection::vec(record(), 1..150),
        stride in 2usize..20,
    ) {
        let set = arrival_set(recs, 50_000, 3);
        let sel = ChannelSelection::new(2e-9, 1.0, 0.999, 10.0).unwrap();
        let budget = LinkBudget::from_config(&set.config);
        let full = default_gate_grid(2e-9);
        let sub: Vec<f64> = full.iter().copied().step_by(stride).collect();
        let a = sweep_gate(&set, &sel, &budget, &sub, Weighting::Weight).unwrap();
        let b = sweep_gate(&set, &sel, &budget, &full, Weighting::Weight).unwrap();
        prop_assert!(b.optimal_qber <= a.optimal_qber);
    }

    #[test]
    fn arrival_weight_is_albedo_power(index in 0u64..1_000_000, seed in 0u64..1000) {
        let cfg = LinkConfig::default();
        let spec = cfg.campaign_spec().unwrap();
        let t = trace_photon(&spec, seed, index);
        if let Fate::Arrived(r) = t.fate {
            let m: WaterMedium = spec.medium;
            let mut w = 1.0;
            for _ in 0..t.interactions {
                w = update_weight(w, &m);
            }
            prop_assert_eq!(r.weight, w);
        }
    }
}
