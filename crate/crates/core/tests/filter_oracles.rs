use crn_smc::collective::tree;
use crn_smc::filter::{crn_multinomial_resample, ParticleEnsemble};
use crn_smc::models::{kalman_loglik, lgssm, Lgssm};
use crn_smc::rng::{stream, unit_open_closed, Purpose};
use crn_smc::ssm::StateProposal;
use crn_smc::{run_filter, FilterConfig, ParamVector, StateSpaceModel, Tangent};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn lgssm_data(t: usize, seed: u64) -> Vec<f64> {
    Lgssm::default().simulate(&ParamVector(lgssm::TRUE_THETA), t, &mut stream(seed, Purpose::Simulation, 0, 0))
}

#[test]
fn gradient_matches_shared_seed_differences() {
    let m = Lgssm::default();
    let y = lgssm_data(25, 11);
    let cfg = FilterConfig { n_particles: 64 };
    let mut rng = stream(11, Purpose::Prior, 0, 0);
    let h = 1e-5;
    for seed in 0..5 {
        let th = m.prior().sample(&mut rng);
        let r = run_filter(&m, &y, &th, seed, cfg).unwrap();
        for d in 0..3 {
            let (mut a, mut b) = (th, th);
            a[d] += h;
            b[d] -= h;
            let fa = run_filter(&m, &y, &a, seed, cfg).unwrap();
            let fb = run_filter(&m, &y, &b, seed, cfg).unwrap();
            assert_eq!(fa.ancestry, fb.ancestry);
            let fd = (fa.log_likelihood - fb.log_likelihood) / (2.0 * h);
            assert!((r.gradient[d] - fd).abs() <= 1e-4 * fd.abs().max(1.0), "θ={:?} d={d}: {} vs {fd}", th.0, r.gradient[d]);
        }
    }
}

#[test]
fn likelihood_close_to_kalman() {
    let m = Lgssm::default();
    let y = lgssm_data(50, 3);
    let exact = kalman_loglik(&lgssm::TRUE_THETA, &y).unwrap();
    let mean: f64 = (0..4)
        .map(|s| run_filter(&m, &y, &ParamVector(lgssm::TRUE_THETA), s, FilterConfig { n_particles: 1024 }).unwrap().log_likelihood)
        .sum::<f64>()
        / 4.0;
    assert!(((mean - exact) / exact).abs() < 0.01, "{mean} vs {exact}");
}

#[test]
fn optimal_proposal_keeps_ess_high() {
    let y = lgssm_data(100, 5);
    let n = 256;
    let r = run_filter(&Lgssm::default(), &y, &ParamVector(lgssm::TRUE_THETA), 1, FilterConfig { n_particles: n }).unwrap();
    let mut ess = r.ess.clone();
    ess.sort_by(f64::total_cmp);
    assert!(ess[ess.len() / 2] > 0.5 * n as f64, "median ESS {}", ess[ess.len() / 2]);
}

#[test]
fn transition_proposal_is_worse_than_optimal() {
    let y = lgssm_data(100, 5);
    let cfg = FilterConfig { n_particles: 256 };
    let th = ParamVector(lgssm::TRUE_THETA);
    let opt = run_filter(&Lgssm::default(), &y, &th, 1, cfg).unwrap();
    let tr = run_filter(&Lgssm::new(StateProposal::Transition), &y, &th, 1, cfg).unwrap();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&opt.ess) > mean(&tr.ess));
}

#[test]
fn resampler_offspring_frequencies() {
    let weights = [0.1, 0.2, 0.3, 0.4];
    let lw: Vec<f64> = weights.iter().map(|w: &f64| w.ln()).collect();
    let rounds = 100_000;
    let mut counts = [0u64; 4];
    for r in 0..rounds {
        let mut rng = stream(2024, Purpose::FilterResample, r, 0);
        let u: Vec<f64> = (0..4).map(|_| unit_open_closed(&mut rng)).collect();
        for p in tree::multinomial_parents(&lw, &u).unwrap() {
            counts[p] += 1;
        }
    }
    let n = 4.0 * rounds as f64;
    let mut chi2 = 0.0;
    for (c, w) in counts.iter().zip(weights) {
        let expected = n * w;
        let se = (n * w * (1.0 - w)).sqrt();
        assert!((*c as f64 - expected).abs() < 3.0 * se, "{counts:?}");
        chi2 += (*c as f64 - expected).powi(2) / expected;
    }
    let p = 1.0 - ChiSquared::new(3.0).unwrap().cdf(chi2);
    assert!(p > 0.001, "chi2 {chi2} p {p}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resampling_preserves_mass_and_its_derivative(
        lw in prop::collection::vec((-30.0f64..5.0, -3.0f64..3.0), 2..64),
        seed in any::<u64>(),
    ) {
        let mut ens = ParticleEnsemble::<usize, 1> {
            states: (0..lw.len()).collect(),
            log_weights: lw.iter().map(|&(v, t)| Tangent::new(v, [t])).collect(),
            t: 0,
        };
        let before = crn_smc::tangent::log_sum_exp(&ens.log_weights);
        let mut rng = stream(seed, Purpose::FilterResample, 0, 0);
        let u: Vec<f64> = (0..lw.len()).map(|_| unit_open_closed(&mut rng)).collect();
        let parents = crn_multinomial_resample(&mut ens, &u).unwrap();
        let after = crn_smc::tangent::log_sum_exp(&ens.log_weights);
        prop_assert!((before.value.exp() - after.value.exp()).abs() <= 1e-12 * before.value.exp());
        prop_assert!((before.tangent[0] - after.tangent[0]).abs() <= 1e-12 * before.tangent[0].abs().max(1.0));
        prop_assert!(parents.iter().zip(&ens.states).all(|(p, s)| p == s));
    }

    #[test]
    fn ess_lies_between_one_and_n(lw in prop::collection::vec(-50.0f64..0.0, 1..200)) {
        let m = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = lw.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|v| v / s).collect();
        let e = crn_smc::filter::ess_particles(&w);
        prop_assert!(e >= 1.0 - 1e-12 && e <= lw.len() as f64 * (1.0 + 1e-12));
    }
}
