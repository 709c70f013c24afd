use std::collections::BTreeMap;
use std::io::Write;

use amigo_analysis::synth::{registry, RecordFactory};
use amigo_analysis::*;
use amigo_core::{CacheStatus, Continent, LatencyClass, Resolution, ResolverClass, SpeedClass};

fn eu(ids: &[&str]) -> amigo_core::NetworkRegistry {
    let entries: Vec<_> = ids.iter().map(|id| (*id, *id, Continent::Europe)).collect();
    registry(&entries)
}

#[test]
fn slow_fractions_per_network() {
    let mut f = RecordFactory::new();
    let mut recs = vec![];
    for _ in 0..3 {
        recs.push(f.speedtest("A", 10.0, 5.0));
    }
    for _ in 0..2 {
        recs.push(f.speedtest("B", 40.0, 5.0));
    }
    recs.push(f.speedtest("C", 10.0, 5.0));
    recs.push(f.speedtest("C", 40.0, 5.0));
    recs.push(f.latency("D", 10.0));
    let ds = Dataset::new(recs, eu(&["A", "B", "C", "D"]));

    let slow = per_network_fraction(&ds, ClassSelector::Download(SpeedClass::Slow));
    assert_eq!(
        slow,
        BTreeMap::from([("A".into(), 1.0), ("B".into(), 0.0), ("C".into(), 0.5)])
    );
    let fast = per_network_fraction(&ds, ClassSelector::Download(SpeedClass::Fast));
    assert_eq!(fast["A"], 0.0);
    // D has no speed tests, so it is absent rather than zero
    assert!(!slow.contains_key("D"));
    let exc = per_network_fraction(&ds, ClassSelector::Latency(LatencyClass::Exceptional));
    assert_eq!(exc, BTreeMap::from([("D".into(), 1.0)]));
}

#[test]
fn empty_dataset_gives_empty_fractions() {
    let ds = Dataset::default();
    for sel in ClassSelector::all() {
        assert!(per_network_fraction(&ds, sel).is_empty());
    }
}

#[test]
fn forty_percent_of_networks_mostly_slow() {
    let mut f = RecordFactory::new();
    let mut recs = vec![];
    let ids: Vec<String> = (0..10).map(|i| format!("net{i}")).collect();
    // networks 0..4 have 8, 9, 10, 10 slow out of 10; the rest at most 7
    let slow_counts = [8, 9, 10, 10, 7, 5, 0, 3, 1, 6];
    for (id, slow) in ids.iter().zip(slow_counts) {
        for k in 0..10 {
            let mbps = if k < slow { 12.0 } else { 45.0 };
            recs.push(f.speedtest(id, mbps, 5.0));
        }
    }
    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    let ds = Dataset::new(recs, eu(&refs));
    let cdf = crux_cdf(&per_network_fraction(&ds, ClassSelector::Download(SpeedClass::Slow))).unwrap();
    assert_eq!(cdf.n_networks, 10);
    assert_eq!(cdf.at_least(0.8), 0.4);
}

#[test]
fn dns_usage_share_and_google_penalty() {
    let mut f = RecordFactory::new();
    let mut recs = vec![];
    for ms in [20.0, 22.0, 18.0] {
        recs.push(f.dns("t1", "10.0.0.53", ms));
    }
    recs.push(f.dns("t1", "8.8.8.8", 200.0));
    for ms in [30.0, 31.0] {
        recs.push(f.dns("x1", "10.1.0.53", ms));
    }
    // constructed: Google lookups ten times slower than local ones
    for i in 0..20 {
        let base = 15.0 + i as f64;
        recs.push(f.dns("m1", "10.2.0.53", base));
        recs.push(f.dns("m1", "8.8.4.4", base * 10.0));
    }
    let reg = registry(&[
        ("t1", "Telkom", Continent::Africa),
        ("x1", "Xlocal", Continent::Asia),
        ("m1", "Telcel", Continent::CentralSouthAmerica),
    ]);
    let report = dns_report(&Dataset::new(recs, reg));
    assert_eq!(report.usage_share("Telkom", ResolverClass::GoogleDns), Some(0.25));
    assert_eq!(report.usage_share("Xlocal", ResolverClass::GoogleDns), Some(0.0));
    assert_eq!(report.usage_share("nobody", ResolverClass::GoogleDns), None);
    let local = report.group("Telcel", ResolverClass::OperatorLocal).unwrap();
    let google = report.group("Telcel", ResolverClass::GoogleDns).unwrap();
    let ratio = google.lookup_ms.as_ref().unwrap().median / local.lookup_ms.as_ref().unwrap().median;
    assert!((ratio - 10.0).abs() < 1e-9, "ratio {ratio}");
    assert!(report.group("Xlocal", ResolverClass::GoogleDns).is_none());
}

#[test]
fn cdn_miss_penalty_and_continent_split() {
    let mut f = RecordFactory::new();
    let mut recs = vec![];
    for cdn in ["cloudflare", "jsdelivr"] {
        for i in 0..30 {
            let hit = 100.0 + (i % 7) as f64 * 3.0;
            recs.push(f.cdn("eu1", cdn, CacheStatus::Hit, hit));
            recs.push(f.cdn("eu1", cdn, CacheStatus::Miss, hit * 3.0));
            recs.push(f.cdn("af1", cdn, CacheStatus::Hit, hit * 10.0));
            recs.push(f.cdn("af1", cdn, CacheStatus::Miss, hit * 30.0));
        }
        recs.push(f.cdn("eu1", cdn, CacheStatus::Unknown, 1e6));
    }
    let reg = registry(&[("eu1", "E", Continent::Europe), ("af1", "A", Continent::Africa)]);
    let report = cdn_report(&Dataset::new(recs, reg));
    for cdn in ["cloudflare", "jsdelivr"] {
        let penalty = report.miss_penalty[cdn];
        assert!((penalty - 3.0).abs() <= 0.15, "{cdn} penalty {penalty}");
        let eu = report.continent(cdn, Continent::Europe).unwrap().median;
        let af = report.continent(cdn, Continent::Africa).unwrap().median;
        assert!((af / eu - 10.0).abs() < 1e-9);
        assert!(report.status(cdn, CacheStatus::Unknown).is_none());
    }
}

#[test]
fn cdn_singleton() {
    let mut f = RecordFactory::new();
    let recs = vec![f.cdn("n", "c", CacheStatus::Hit, 42.0)];
    let report = cdn_report(&Dataset::new(recs, eu(&["n"])));
    let b = report.status("c", CacheStatus::Hit).unwrap();
    assert_eq!((b.n, b.min, b.median, b.max), (1, 42.0, 42.0, 42.0));
    assert!(report.miss_penalty.is_empty());
}

#[test]
fn cache_probability_rows() {
    let mut f = RecordFactory::new();
    let mut recs = vec![];
    for _ in 0..4 {
        recs.push(f.cdn("a", "c", CacheStatus::Hit, 1.0));
    }
    recs.push(f.cdn("a", "c", CacheStatus::Miss, 1.0));
    for _ in 0..3 {
        recs.push(f.cdn("b", "c", CacheStatus::Miss, 1.0));
        recs.push(f.cdn("u", "c", CacheStatus::Unknown, 1.0));
    }
    let rows = cache_probability(&Dataset::new(recs, eu(&["a", "b", "u"])));
    let got: Vec<_> = rows.iter().map(|r| (r.network_id.as_str(), r.p_hit, r.p_miss, r.p_unknown)).collect();
    assert_eq!(got, vec![("a", 0.8, 0.2, 0.0), ("b", 0.0, 1.0, 0.0), ("u", 0.0, 0.0, 1.0)]);
}

#[test]
fn youtube_shares_and_cdfs() {
    use Resolution::*;
    let mut f = RecordFactory::new();
    let mut recs = vec![];
    let mut seq = vec![R720; 4];
    seq.extend([R480; 6]);
    recs.push(f.youtube("a", &seq));
    // b and c together: b at 50% 720p, c and d below 40%
    recs.push(f.youtube("b", &[R720, R720, R360, R360]));
    recs.push(f.youtube("c", &[R720, R144, R144, R144]));
    recs.push(f.youtube("d", &[R240, R240]));
    let report = youtube_resolution_report(&Dataset::new(recs, eu(&["a", "b", "c", "d"])));
    let a = &report.networks[0];
    assert_eq!(a.shares[&R720], 0.4);
    assert_eq!(a.shares[&R480], 0.6);
    assert_eq!(a.shares.len(), 6);
    assert_eq!(report.cdfs[&R720].at_least(0.4), 0.5);
    let r1080 = &report.cdfs[&R1080];
    assert!(r1080.sorted.iter().all(|v| *v == 0.0));
    assert_eq!(r1080.cdf(0.0), 1.0);
}

#[test]
fn quarantine_and_dedup() {
    let mut f = RecordFactory::new();
    let a = f.speedtest("known", 10.0, 1.0);
    let b = f.speedtest("ghost", 10.0, 1.0);
    let ds = Dataset::new(vec![a.clone(), b, a], eu(&["known"]));
    assert_eq!(ds.records.len(), 1);
    assert_eq!(ds.quarantined.len(), 1);
    assert_eq!(ds.quarantined[0].network_id, "ghost");
    assert_eq!(ds.duplicates_dropped, 1);
}

#[test]
fn loads_spools_and_server_logs() {
    let dir = tempfile::tempdir().unwrap();
    let mut f = RecordFactory::new();
    let r1 = f.speedtest("n1", 10.0, 1.0);
    let r2 = f.latency("n1", 30.0);

    let spool_dir = dir.path().join("spool");
    std::fs::create_dir(&spool_dir).unwrap();
    let mut spool = std::fs::File::create(spool_dir.join("spool-2024-01-01.jsonl")).unwrap();
    writeln!(spool, "{}", serde_json::to_string(&r1).unwrap()).unwrap();
    // torn final line
    write!(spool, "{{\"record_id\":").unwrap();
    std::fs::write(spool_dir.join("notes.txt"), "ignored").unwrap();

    let log = dir.path().join("store.jsonl");
    let mut text = String::new();
    text.push_str(r#"{"entry":"instruction_delivered","id":"x","at":"2024-01-01T00:00:00Z"}"#);
    text.push('\n');
    text.push_str(&serde_json::to_string(&serde_json::json!({
        "entry": "record", "received_at": "2024-01-01T00:00:00Z", "record": r2,
    })).unwrap());
    text.push('\n');
    // the same record again from the spool copy
    text.push_str(&serde_json::to_string(&r1).unwrap());
    text.push('\n');
    std::fs::write(&log, text).unwrap();

    let reg_path = dir.path().join("registry.csv");
    std::fs::write(&reg_path, "network_id,operator,country,continent\nn1,Op,DE,europe\n").unwrap();

    let ds = Dataset::load(&[spool_dir, log.clone()], &reg_path).unwrap();
    assert_eq!(ds.records.len(), 2);
    assert_eq!(ds.duplicates_dropped, 1);

    std::fs::write(&log, "{\"entry\":\"status\"}\n\nnot json\n").unwrap();
    match Dataset::load(&[log], &reg_path) {
        Err(AnalysisError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

fn full_dataset() -> Dataset {
    let mut f = RecordFactory::new();
    let recs = vec![
        f.speedtest("a", 10.0, 2.0),
        f.speedtest("b", 35.0, 20.0),
        f.latency("a", 60.0),
        f.web("b", 4.0),
        f.dns("a", "8.8.8.8", 90.0),
        f.dns("b", "10.0.0.1", 9.0),
        f.cdn("a", "cf", CacheStatus::Hit, 50.0),
        f.cdn("b", "cf", CacheStatus::Miss, 150.0),
        f.youtube("a", &[Resolution::R720, Resolution::R480]),
    ];
    Dataset::new(recs, eu(&["a", "b"]))
}

#[test]
fn emit_writes_all_sections() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let manifest = emit_report(&full_dataset(), &out, &[Format::Csv, Format::Json]).unwrap();
    assert_eq!(manifest.sections.len(), 6);
    let names: Vec<_> = manifest.sections.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, SECTIONS);
    for s in &manifest.sections {
        assert!(s.rows > 0, "{} is empty", s.name);
        assert_eq!(s.files.len(), 2);
        for file in &s.files {
            let text = std::fs::read_to_string(out.join(&file.path)).unwrap();
            if file.format == Format::Csv {
                assert_eq!(text.lines().count(), s.rows + 1, "{}", file.path);
            } else {
                serde_json::from_str::<serde_json::Value>(&text).unwrap();
            }
        }
    }
    let on_disk: Manifest =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(on_disk, manifest);
    let dns = std::fs::read_to_string(out.join("dns.csv")).unwrap();
    assert!(dns.starts_with("operator,resolver_class,lookups,usage_share,n,min,q1,median"));
}

#[test]
fn emit_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = emit_report(&Dataset::default(), dir.path(), &[Format::Csv, Format::Json]).unwrap();
    assert_eq!(manifest.sections.len(), 6);
    for s in &manifest.sections {
        assert_eq!(s.rows, 0);
        let csv = std::fs::read_to_string(dir.path().join(format!("{}.csv", s.name))).unwrap();
        assert_eq!(csv.lines().count(), 1, "header only in {}", s.name);
    }
}

#[test]
fn emit_unwritable_dir_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let target = blocker.join("out");
    let err = emit_report(&full_dataset(), &target, &[Format::Json]).unwrap_err();
    assert!(err.to_string().contains(&target.display().to_string()), "{err}");
}

#[test]
fn emit_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    emit_report(&full_dataset(), a.path(), &[Format::Json, Format::Csv]).unwrap();
    emit_report(&full_dataset(), b.path(), &[Format::Csv, Format::Json]).unwrap();
    for s in SECTIONS {
        for ext in ["json", "csv"] {
            let name = format!("{s}.{ext}");
            assert_eq!(
                std::fs::read(a.path().join(&name)).unwrap(),
                std::fs::read(b.path().join(&name)).unwrap(),
                "{name}"
            );
        }
    }
}

#[test]
fn format_parsing() {
    assert_eq!("JSON".parse::<Format>(), Ok(Format::Json));
    assert!("xml".parse::<Format>().is_err());
}
