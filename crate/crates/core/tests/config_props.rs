use proptest::prelude::*;
use rfft_core::config::{Batching, ConfigError, LteTraffic, RemoteNodeMode, ScenarioConfig};
use rfft_core::traffic::PacketSizeMode;

prop_compose! {
    fn scenario()(
        rphy in any::<bool>(),
        rho_c in 0.0..=1.0f64,
        rho_b in 0.0..=1.0f64,
        hurst in 0.5..0.99f64,
        distance_km in 10.0..=50.0f64,
        duration_s in 1.0..1000.0f64,
        warmup_s in 0.0..20.0f64,
        num_cms in 1u32..400,
        seed in any::<u64>(),
        subsources in 1u32..64,
        on_fraction in 0.01..=1.0f64,
        trimodal in any::<bool>(),
        request_bytes in 1u32..=64,
        packet_batching in any::<bool>(),
        cbr in any::<bool>(),
        lte_subsources in 100u32..200,
        tau in (1.0..30.0f64, 1.0..30.0f64),
    ) -> ScenarioConfig {
        let mut c = ScenarioConfig {
            mode: if rphy { RemoteNodeMode::RPhy } else { RemoteNodeMode::RFft },
            rho_c, rho_b, hurst, distance_km, duration_s, warmup_s, num_cms, seed,
            ..Default::default()
        };
        c.traffic.num_subsources = subsources;
        c.traffic.on_fraction = on_fraction;
        c.traffic.size_mode = if trimodal { PacketSizeMode::Trimodal } else { PacketSizeMode::Fixed };
        c.fronthaul.rphy_request_bytes = request_bytes;
        c.fronthaul.batching = if packet_batching { Batching::Packet } else { Batching::Symbol };
        c.fronthaul.lte_traffic = if cbr { LteTraffic::Cbr } else { LteTraffic::Scenario };
        c.fronthaul.lte_subsources = lte_subsources;
        (c.fft.tau_c_us, c.fft.tau_l_us) = tau;
        c
    }
}

proptest! {
    #[test]
    fn toml_round_trip(c in scenario()) {
        prop_assert!(c.validate().is_ok(), "{:?}", c.validate());
        let text = c.to_toml();
        prop_assert_eq!(ScenarioConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn out_of_range_loads_name_their_key(rho in 1.0001..10.0f64) {
        let e = ScenarioConfig::parse(&format!("rho_b = {rho}")).unwrap_err();
        let is_rho_b = matches!(&e, ConfigError::Range { key, .. } if key == "rho_b");
        prop_assert!(is_rho_b, "{}", e);
    }
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(ScenarioConfig::parse("rho_x = 0.1").is_err());
    assert!(ScenarioConfig::parse("[fronthaul]\nlte_traffic = \"bursty\"").is_err());
}

#[test]
fn too_few_lte_subsources_for_the_on_fraction() {
    let e = ScenarioConfig::parse("hurst = 0.8\n[fronthaul]\nlte_subsources = 10\n").unwrap_err();
    assert!(e.to_string().contains("lte_subsources"), "{e}");
    // Poisson and constant-bitrate LTE have no peak-rate constraint.
    assert!(ScenarioConfig::parse("[fronthaul]\nlte_subsources = 10\n").is_ok());
    assert!(ScenarioConfig::parse("hurst = 0.8\n[fronthaul]\nlte_subsources = 10\nlte_traffic = \"cbr\"\n").is_ok());
}
