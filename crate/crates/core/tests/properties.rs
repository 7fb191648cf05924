use privnav::dealer::{Budget, Request};
use privnav::mpc::{self, EngineConfig, Schedule, Session, Shared};
use privnav::ring::{truncate, truncate_floor, FixedConfig, FixedVec, Ring64, TruncMask};
use privnav::rng;
use privnav::sharing::{reconstruct_arith, reconstruct_bin, share_arith, share_bin, split_additive, SessionId};
use proptest::prelude::*;
use rand::{Rng, RngCore};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn cfg() -> FixedConfig {
    FixedConfig::new(16).unwrap()
}

/// Kolmogorov p-value for statistic `d` over `n` samples (asymptotic series).
fn ks_uniform_p(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        d = d.max((i as f64 + 1.0) / n - x).max(x - i as f64 / n);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    p.clamp(0.0, 1.0)
}

fn unit(w: u64) -> f64 {
    w as f64 / 2f64.powi(64)
}

fn chi_square_p(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expect = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn fixed_multiply_error_bound_over_many_pairs() {
    let c = cfg();
    let ulp = c.ulp::<f64>();
    let mut r = rng::stream(1, 0);
    for _ in 0..100_000 {
        let a: f64 = r.gen_range(-256.0..=256.0);
        let b: f64 = r.gen_range(-256.0..=256.0);
        let prod = c.encode(a).unwrap() * c.encode(b).unwrap();
        let bound = ulp * (a.abs() + b.abs()) + 2.0 * ulp;
        let floor = c.decode::<f64>(truncate_floor(prod, c));
        assert!((floor - a * b).abs() <= bound, "{a} * {b}");
        let masked = c.decode::<f64>(truncate(prod, c, &TruncMask::new(r.next_u64(), c)));
        assert!((masked - a * b).abs() <= bound, "{a} * {b} (masked)");
    }
}

#[test]
fn share_coordinates_look_uniform() {
    let c = cfg();
    let secret = FixedVec::encode(&[3.25f64, -1.0, 0.0, 1000.0], vec![4], c).unwrap();
    let trials = 10_000;
    for parties in [2, 5] {
        let mut r = rng::stream(2, parties as u64);
        let mut cols = vec![vec![Vec::with_capacity(trials); 4]; parties];
        for _ in 0..trials {
            let shares = share_arith(&secret, parties, SessionId(9), &mut r).unwrap();
            for (p, s) in shares.iter().enumerate() {
                for (j, v) in s.payload.elems().iter().enumerate() {
                    cols[p][j].push(unit(v.0));
                }
            }
        }
        for (p, party_cols) in cols.iter_mut().enumerate() {
            for (j, col) in party_cols.iter_mut().enumerate() {
                let pv = ks_uniform_p(col);
                assert!(pv > 0.01, "party {p} coordinate {j}: KS p = {pv}");
            }
        }
    }
}

#[test]
fn xor_share_bits_are_balanced() {
    let secret = [u64::MAX, 0, 0x0f0f_0f0f_0f0f_0f0f];
    let mut r = rng::stream(3, 0);
    let trials = 10_000;
    for parties in [2, 5] {
        let mut ones = vec![[0u64; 2]; 64 * secret.len()];
        for _ in 0..trials {
            let fv = FixedVec::from_vec(secret.iter().map(|&w| Ring64(w)).collect(), cfg());
            let shares = share_bin(&fv, parties, SessionId(1), &mut r).unwrap();
            for (j, w) in shares[0].bits.iter().enumerate() {
                for bit in 0..64 {
                    ones[j * 64 + bit][((w >> bit) & 1) as usize] += 1;
                }
            }
        }
        for (lane, counts) in ones.iter().enumerate() {
            let pv = chi_square_p(counts);
            assert!(pv > 1e-4, "lane {lane}: {counts:?}, p = {pv}");
        }
    }
}

#[test]
fn received_masks_are_uniform_for_a_fixed_secret() {
    // Every element multiplies the same secrets; the peer's view should still be uniform.
    let c = cfg();
    let n = 10_000;
    let x = vec![c.encode(1.5f64).unwrap(); n];
    let y = vec![c.encode(-7.0f64).unwrap(); n];
    let mut r = rng::stream(4, 0);
    let xs = split_additive(&x, 2, &mut r);
    let ys = split_additive(&y, 2, &mut r);
    let mut budget = Budget::default();
    budget.push(Request::Beaver { n });
    budget.sign_test(n, 2);
    let inputs: Vec<_> = xs.into_iter().zip(ys).map(|(a, b)| (Shared::vector(a), Shared::vector(b))).collect();
    let out = Session::new(EngineConfig::new(2, c, 5).unwrap())
        .deal(&budget)
        .unwrap()
        .with_view_log()
        .run(inputs, Schedule::RoundRobin, |mut ctx, (x, y)| async move {
            let r = async {
                let z = mpc::mul(&mut ctx, &x, &y).await?;
                mpc::ltz(&mut ctx, &z).await
            }
            .await;
            (ctx, r)
        })
        .unwrap();
    let view = &out.views[1];
    let (sender, beaver) = &view[0];
    assert_eq!(*sender, 0);
    assert_eq!(beaver.len(), 2 * n);
    for half in beaver.chunks(n) {
        let mut u: Vec<f64> = half.iter().map(|&w| unit(w)).collect();
        let pv = ks_uniform_p(&mut u);
        assert!(pv > 0.01, "Beaver masks: KS p = {pv}");
    }
    // AND-round masks: every bit position of the packed lanes is a fair coin.
    let mut ones = [0u64; 2];
    for (_, words) in &view[1..] {
        for w in words {
            let k = w.count_ones() as u64;
            ones[1] += k;
            ones[0] += 64 - k;
        }
    }
    let total = (ones[0] + ones[1]) as f64;
    let frac = ones[1] as f64 / total;
    assert!((frac - 0.5).abs() < 4.0 / total.sqrt(), "AND masks: ones fraction {frac}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn decode_inverts_encode_on_grid(k in -(1i64 << 46)..(1i64 << 46)) {
        let c = cfg();
        let x = k as f64 / 65536.0;
        let r = c.encode(x).unwrap();
        prop_assert_eq!(r.signed(), k);
        prop_assert_eq!(c.decode::<f64>(r), x);
    }

    #[test]
    fn grid_addition_is_exact(a in -(1i64 << 40)..(1i64 << 40), b in -(1i64 << 40)..(1i64 << 40)) {
        let c = cfg();
        let (x, y) = (a as f64 / 65536.0, b as f64 / 65536.0);
        let s = c.encode(x).unwrap() + c.encode(y).unwrap();
        prop_assert_eq!(c.decode::<f64>(s), x + y);
    }

    #[test]
    fn sharing_round_trips(words in prop::collection::vec(any::<u64>(), 1..20), pidx in 0usize..4, seed in any::<u64>()) {
        let parties = [2, 3, 5, 8][pidx];
        let fv = FixedVec::from_vec(words.iter().map(|&w| Ring64(w)).collect(), cfg());
        let mut r = rng::stream(seed, 0);
        let a = share_arith(&fv, parties, SessionId(seed), &mut r).unwrap();
        prop_assert_eq!(reconstruct_arith(&a).unwrap(), fv.clone());
        let b = share_bin(&fv, parties, SessionId(seed), &mut r).unwrap();
        prop_assert_eq!(reconstruct_bin(&b).unwrap(), words);
    }

    #[test]
    fn local_addition_is_homomorphic(x in any::<u64>(), y in any::<u64>(), seed in any::<u64>()) {
        let c = cfg();
        let mut r = rng::stream(seed, 1);
        let sx = share_arith(&FixedVec::from_vec(vec![Ring64(x)], c), 3, SessionId(1), &mut r).unwrap();
        let sy = share_arith(&FixedVec::from_vec(vec![Ring64(y)], c), 3, SessionId(1), &mut r).unwrap();
        let sum: Vec<_> = sx.iter().zip(&sy).map(|(a, b)| a.add(b).unwrap()).collect();
        prop_assert_eq!(reconstruct_arith(&sum).unwrap().elems()[0].0, x.wrapping_add(y));
    }

    #[test]
    fn share_wire_format_round_trips(words in prop::collection::vec(any::<u64>(), 0..10), seed in any::<u64>()) {
        let fv = FixedVec::from_vec(words.iter().map(|&w| Ring64(w)).collect(), cfg());
        let shares = share_arith(&fv, 2, SessionId(seed), &mut rng::stream(seed, 2)).unwrap();
        for s in &shares {
            prop_assert_eq!(&privnav::sharing::ArithShare::from_bytes(&s.to_bytes()).unwrap(), s);
        }
    }
}
