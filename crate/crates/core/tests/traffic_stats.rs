mod common;

use rfft_core::des::{RngStream, SimTime};
use rfft_core::rates::Bitrate;
use rfft_core::traffic::{make_generator, PacketSizeMode, TrafficConfig};

fn per_cm() -> Bitrate {
    Bitrate::from_mbps(5)
}

fn binned(cfg: &TrafficConfig, sources: u64, seconds: u64, bin: SimTime) -> (Vec<f64>, u64) {
    let n = (SimTime::from_secs(seconds).as_ps() / bin.as_ps()) as usize;
    let mut series = vec![0.0; n];
    let mut bytes = 0;
    for id in 0..sources {
        let mut g = make_generator(cfg, RngStream::new(21, id), per_cm(), Bitrate::from_gbps(1)).unwrap();
        while let Some(a) = g.next_arrival() {
            let b = (a.time.as_ps() / bin.as_ps()) as usize;
            if b >= n {
                break;
            }
            series[b] += a.bytes as f64;
            bytes += a.bytes as u64;
        }
    }
    (series, bytes)
}

#[test]
fn poisson_gaps_have_unit_coefficient_of_variation() {
    let cfg = TrafficConfig { rho: 0.2, ..Default::default() };
    let mut g = make_generator(&cfg, RngStream::new(5, 0), per_cm(), Bitrate::from_gbps(1)).unwrap();
    let mut prev = 0.0;
    let gaps: Vec<f64> = (0..100_000)
        .map(|_| {
            let t = g.next_arrival().unwrap().time.as_secs_f64();
            let d = t - prev;
            prev = t;
            d
        })
        .collect();
    // Standard error of the CV estimate is about 1/sqrt(2n) = 0.0022.
    assert!((common::cv(&gaps) - 1.0).abs() < 0.01, "{}", common::cv(&gaps));
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let expected = 472.0 * 8.0 / 1e6;
    assert!((mean / expected - 1.0).abs() < 0.01, "{mean}");
}

#[test]
fn poisson_aggregate_is_short_range_dependent() {
    let cfg = TrafficConfig { rho: 0.2, ..Default::default() };
    let (series, _) = binned(&cfg, 50, 60, SimTime::from_micros(500));
    let h = common::aggregated_variance_hurst(&series, 4, 32);
    assert!((h - 0.5).abs() < 0.05, "{h}");
}

#[test]
fn burstier_sources_have_heavier_variance_time_curves() {
    let bin = SimTime::from_micros(500);
    let est = |hurst| {
        let cfg = TrafficConfig { hurst, rho: 0.2, ..Default::default() };
        common::aggregated_variance_hurst(&binned(&cfg, 50, 120, bin).0, 4, 32)
    };
    let (h6, h9) = (est(0.6), est(0.9));
    assert!(h6 < h9, "{h6} vs {h9}");
    assert!(h6 > 0.5, "{h6}");
}

#[test]
fn trimodal_on_off_source_keeps_its_load() {
    let cfg = TrafficConfig {
        hurst: 0.7,
        rho: 0.4,
        size_mode: PacketSizeMode::Trimodal,
        ..Default::default()
    };
    let (_, bytes) = binned(&cfg, 100, 300, SimTime::from_millis(10));
    let offered = bytes as f64 * 8.0 / 300.0;
    let target = 100.0 * 0.4 * 5e6;
    assert!((offered / target - 1.0).abs() < 0.03, "{offered} vs {target}");
}
