use cache_simo::model::{CacheSampler, CachingDistribution, NetworkParams, Popularity};
use cache_simo::montecarlo::{estimate_stp, Receiver, SimConfig};
use cache_simo::mrc::stp_mrc_exact;

#[test]
fn thm1_vs_mc_multi_antenna() {
    let pop = Popularity::zipf(5, 1.0).unwrap();
    let t = CachingDistribution::new(vec![1.0, 0.8, 0.6, 0.4, 0.2], 3).unwrap();
    let sampler = CacheSampler::Madow(t.clone());
    for &(m, tau) in &[(2usize, 1.0f64), (4, 1.0), (2, 0.1), (4, 10.0)] {
        let params = NetworkParams::new(1e-3, 4.0, tau, m).unwrap();
        let analytic = stp_mrc_exact(&t, &pop, &params).unwrap();
        let cfg = SimConfig::new(20_000, 1234);
        let mc = estimate_stp(&Receiver::Mrc, &sampler, &pop, &params, &cfg).unwrap();
        let sigma = mc.error / 1.96;
        println!(
            "M={m} tau={tau}: analytic {:.5} vs MC {:.5} ± {:.5}",
            analytic.value, mc.value, 3.0 * sigma
        );
        assert!(
            (analytic.value - mc.value).abs() <= (3.0 * sigma).max(0.01),
            "M={m} tau={tau}: analytic {} vs MC {} (3σ={})",
            analytic.value,
            mc.value,
            3.0 * sigma
        );
    }
}

#[test]
fn thm2_vs_mc_fig6() {
    use cache_simo::model::DofAllocation;
    use cache_simo::pzf::stp_pzf_exact;
    let pop = Popularity::zipf(5, 1.0).unwrap();
    let t = CachingDistribution::new(vec![1.0, 0.8, 0.6, 0.4, 0.2], 3).unwrap();
    let sampler = CacheSampler::Madow(t.clone());
    for &(m, k, tau) in &[(4usize, 2usize, 1.0f64), (4, 1, 1.0), (4, 2, 0.1), (4, 2, 10.0), (2, 1, 1.0)] {
        let params = NetworkParams::new(1e-3, 4.0, tau, m).unwrap();
        let kk = DofAllocation::uniform(5, k, m).unwrap();
        let analytic = stp_pzf_exact(&kk, &t, &pop, &params).unwrap();
        let cfg = SimConfig::new(20_000, 777);
        let mc = estimate_stp(&Receiver::Pzf(kk.clone()), &sampler, &pop, &params, &cfg).unwrap();
        let sigma = mc.error / 1.96;
        println!(
            "M={m} K={k} tau={tau}: analytic {:.5} vs MC {:.5} ± {:.5}",
            analytic.value, mc.value, 3.0 * sigma
        );
        assert!(
            (analytic.value - mc.value).abs() <= (3.0 * sigma).max(0.01),
            "M={m} K={k} tau={tau}: analytic {} vs MC {} (3σ={})",
            analytic.value,
            mc.value,
            3.0 * sigma
        );
    }
}
