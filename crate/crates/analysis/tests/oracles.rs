//! Pipeline outputs checked against straightforward recounts that share no
//! code with the library (thresholds are written out literally here).

use std::collections::BTreeMap;

use amigo_analysis::synth::{registry, RecordFactory};
use amigo_analysis::*;
use amigo_core::{
    CacheStatus, Continent, LatencyClass, MeasurementRecord, Payload, SpeedClass, SpeedIndexClass,
};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Gen {
    Speed(f64, f64),
    Rtt(f64),
    Si(f64),
    Cdn(u8, f64),
}

fn gen_record() -> impl Strategy<Value = Gen> {
    prop_oneof![
        // values on and around the class boundaries are the interesting ones
        (prop_oneof![0.0f64..60.0, Just(15.0), Just(30.0)], 0.0f64..60.0).prop_map(|(d, u)| Gen::Speed(d, u)),
        prop_oneof![0.0f64..200.0, Just(20.0), Just(50.0), Just(100.0), Just(150.0)].prop_map(Gen::Rtt),
        prop_oneof![0.0f64..10.0, Just(3.4), Just(5.8)].prop_map(Gen::Si),
        (0u8..3, 1.0f64..500.0).prop_map(|(s, t)| Gen::Cdn(s, t)),
    ]
}

fn gen_dataset() -> impl Strategy<Value = Vec<Vec<Gen>>> {
    prop::collection::vec(prop::collection::vec(gen_record(), 0..=20), 1..=5)
}

fn build(nets: &[Vec<Gen>], label: impl Fn(usize) -> String) -> Dataset {
    let mut f = RecordFactory::new();
    let mut recs = Vec::new();
    let ids: Vec<String> = (0..nets.len()).map(&label).collect();
    for (i, gens) in nets.iter().enumerate() {
        for g in gens {
            let id = &ids[i];
            recs.push(match g {
                Gen::Speed(d, u) => f.speedtest(id, *d, *u),
                Gen::Rtt(r) => f.latency(id, *r),
                Gen::Si(s) => f.web(id, *s),
                Gen::Cdn(s, t) => {
                    let st = [CacheStatus::Hit, CacheStatus::Miss, CacheStatus::Unknown][*s as usize];
                    f.cdn(id, "c", st, *t)
                }
            });
        }
    }
    let entries: Vec<(&str, &str, Continent)> =
        ids.iter().map(|id| (id.as_str(), "op", Continent::Europe)).collect();
    Dataset::new(recs, registry(&entries))
}

/// Literal class membership for one record, or None when not applicable.
fn brute_member(sel: ClassSelector, r: &MeasurementRecord) -> Option<bool> {
    let speed = |v: f64| {
        if v <= 15.0 {
            SpeedClass::Slow
        } else if v < 30.0 {
            SpeedClass::Average
        } else {
            SpeedClass::Fast
        }
    };
    match (sel, &r.payload) {
        (ClassSelector::Download(c), Payload::Speedtest(s)) => Some(speed(s.down_mbps) == c),
        (ClassSelector::Upload(c), Payload::Speedtest(s)) => Some(speed(s.up_mbps) == c),
        (ClassSelector::Latency(c), Payload::Latency(l)) => {
            let v = l.final_avg_rtt_ms;
            let class = if v <= 20.0 {
                LatencyClass::Exceptional
            } else if (50.0..=100.0).contains(&v) {
                LatencyClass::GoodToAverage
            } else if v >= 150.0 {
                LatencyClass::LessDesirable
            } else {
                LatencyClass::Unclassified
            };
            Some(class == c)
        }
        (ClassSelector::SpeedIndex(c), Payload::Web(w)) => {
            let v = w.speed_index_s?;
            let class = if v <= 3.4 {
                SpeedIndexClass::Fast
            } else if v < 5.8 {
                SpeedIndexClass::Moderate
            } else {
                SpeedIndexClass::Slow
            };
            Some(class == c)
        }
        _ => None,
    }
}

fn brute_fractions(ds: &Dataset, sel: ClassSelector) -> BTreeMap<String, f64> {
    let mut ids: Vec<&str> = ds.records.iter().map(|r| r.network_id.as_str()).collect();
    ids.sort();
    ids.dedup();
    let mut out = BTreeMap::new();
    for id in ids {
        let mut total = 0;
        let mut hits = 0;
        for r in ds.records.iter().filter(|r| r.network_id == id) {
            if let Some(m) = brute_member(sel, r) {
                total += 1;
                hits += m as usize;
            }
        }
        if total > 0 {
            out.insert(id.to_string(), hits as f64 / total as f64);
        }
    }
    out
}

fn brute_at_least(fractions: &BTreeMap<String, f64>, p: f64) -> f64 {
    let k = fractions.values().filter(|f| **f >= p).count();
    k as f64 / fractions.len() as f64
}

/// Sort-based reference, 1-based Hyndman-Fan type 7 indexing.
fn reference_box(values: &[f64]) -> (f64, f64, f64, f64, f64, usize) {
    let mut x = values.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = x.len();
    let q = |p: f64| {
        let h = 1.0 + (n as f64 - 1.0) * p;
        let j = h.floor() as usize;
        let g = h - j as f64;
        if j >= n {
            x[n - 1]
        } else {
            (1.0 - g) * x[j - 1] + g * x[j]
        }
    };
    let (q1, med, q3) = (q(0.25), q(0.5), q(0.75));
    let iqr = q3 - q1;
    let mut n_out = 0;
    let mut lo = q1;
    let mut hi = q3;
    for v in &x {
        if *v < q1 - 1.5 * iqr || *v > q3 + 1.5 * iqr {
            n_out += 1;
        } else {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    (q1, med, q3, lo, hi, n_out)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fractions_and_at_least_match_recount(nets in gen_dataset(), p in 0.0f64..=1.0) {
        let ds = build(&nets, |i| format!("net-{i}"));
        for sel in ClassSelector::all() {
            let got = per_network_fraction(&ds, sel);
            let want = brute_fractions(&ds, sel);
            prop_assert_eq!(&got, &want, "{:?}", sel);
            if want.is_empty() {
                prop_assert!(crux_cdf(&got).is_err());
                continue;
            }
            let cdf = crux_cdf(&got).unwrap();
            for q in [0.0, 0.5, 0.8, 1.0, p] {
                prop_assert_eq!(cdf.at_least(q), brute_at_least(&want, q));
            }
        }
    }

    #[test]
    fn relabelling_networks_permutes_outputs(nets in gen_dataset()) {
        let a = build(&nets, |i| format!("net-{i}"));
        // reversed lexical order under the new names
        let b = build(&nets, |i| format!("z{}", 9 - i));
        let rename = |id: &str| format!("z{}", 9 - id.trim_start_matches("net-").parse::<usize>().unwrap());
        for sel in ClassSelector::all() {
            let fa: BTreeMap<String, f64> = per_network_fraction(&a, sel)
                .into_iter().map(|(k, v)| (rename(&k), v)).collect();
            prop_assert_eq!(fa, per_network_fraction(&b, sel));
        }
        let ca: Vec<_> = network_cdfs(&a).into_iter().map(|c| (c.selector, c.series.sorted)).collect();
        let cb: Vec<_> = network_cdfs(&b).into_iter().map(|c| (c.selector, c.series.sorted)).collect();
        prop_assert_eq!(ca, cb);
        let mut pa: Vec<_> = cache_probability(&a).into_iter()
            .map(|r| (rename(&r.network_id), r.cdn, r.n, r.p_hit, r.p_miss, r.p_unknown)).collect();
        pa.sort_by(|x, y| x.0.cmp(&y.0));
        let pb: Vec<_> = cache_probability(&b).into_iter()
            .map(|r| (r.network_id, r.cdn, r.n, r.p_hit, r.p_miss, r.p_unknown)).collect();
        prop_assert_eq!(pa, pb);
        prop_assert_eq!(cdn_report(&a), cdn_report(&b));
    }

    #[test]
    fn cache_rows_sum_to_one(nets in gen_dataset()) {
        let ds = build(&nets, |i| format!("n{i}"));
        for row in cache_probability(&ds) {
            prop_assert!((row.p_hit + row.p_miss + row.p_unknown - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn box_stats_matches_reference(values in prop::collection::vec(
        prop_oneof![-1e4f64..1e4, (0i32..20).prop_map(f64::from)], 1..=1000)) {
        let b = box_stats(&values).unwrap();
        let (q1, med, q3, lo, hi, n_out) = reference_box(&values);
        prop_assert!(close(b.q1, q1) && close(b.median, med) && close(b.q3, q3));
        prop_assert!(close(b.whisker_low, lo) && close(b.whisker_high, hi));
        prop_assert_eq!(b.outliers.len(), n_out);
        prop_assert_eq!(b.n, values.len());
    }
}
