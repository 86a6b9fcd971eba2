mod support;

use bsrnn_core::dsp::{istft, stft, StftConfig};
use bsrnn_core::rnn::{
    grouped_forward, lstm_forward, rearrange, GroupedRnn, LstmWeights, RnnWeights,
};
use bsrnn_core::weights::SplitMix64;
use proptest::prelude::*;

use support::{lstm_ref, shuffle_ref};

fn uniform(r: &mut SplitMix64, n: usize) -> Vec<f32> {
    (0..n).map(|_| r.uniform_f32(-0.5, 0.5)).collect()
}

fn random_cell(r: &mut SplitMix64, i: usize, h: usize) -> LstmWeights {
    LstmWeights::new(
        i,
        h,
        uniform(r, 4 * h * i),
        uniform(r, 4 * h * h),
        uniform(r, 4 * h),
    )
    .unwrap()
}

fn wide(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

fn rows(seq: &[f32], width: usize) -> Vec<Vec<f64>> {
    seq.chunks(width).map(wide).collect()
}

fn reference(w: &RnnWeights, seq: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let run = |c: &LstmWeights, rev: bool| {
        lstm_ref(&wide(&c.w_ih), &wide(&c.w_hh), &wide(&c.bias), seq, rev).0
    };
    let mut out = run(&w.forward, false);
    if let Some(b) = &w.backward {
        for (o, y) in out.iter_mut().zip(run(b, true)) {
            o.extend(y);
        }
    }
    out
}

#[test]
fn lstm_forward_matches_reference_on_100_instances() {
    let mut r = SplitMix64::new(7);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let i = 1 + (r.next_u64() % 8) as usize;
        let h = 1 + (r.next_u64() % 8) as usize;
        let t = 1 + (r.next_u64() % 12) as usize;
        let forward = random_cell(&mut r, i, h);
        let backward = (case % 2 == 1).then(|| random_cell(&mut r, i, h));
        let w = RnnWeights { forward, backward };
        let seq = uniform(&mut r, t * i);
        let mut macs = 0;
        let got = lstm_forward(&seq, &w, &mut macs);
        let want: Vec<f64> = reference(&w, &rows(&seq, i)).concat();
        assert_eq!(got.len(), want.len());
        for (g, e) in got.iter().zip(&want) {
            worst = worst.max((*g as f64 - e).abs());
        }
        assert_eq!(macs, (t * w.directions()) as u64 * w.forward.step_macs());
    }
    assert!(worst <= 1e-6, "max abs error {worst}");
}

#[test]
fn grouped_forward_matches_per_group_reference() {
    let mut r = SplitMix64::new(11);
    for case in 0..40 {
        let g = [1, 2, 3, 4][case % 4];
        let i = g * (1 + (r.next_u64() % 3) as usize);
        let h = g * (1 + (r.next_u64() % 3) as usize);
        let t = 1 + (r.next_u64() % 6) as usize;
        let bidir = case % 3 == 0;
        let groups: Vec<RnnWeights> = (0..g)
            .map(|_| RnnWeights {
                forward: random_cell(&mut r, i / g, h / g),
                backward: bidir.then(|| random_cell(&mut r, i / g, h / g)),
            })
            .collect();
        let grouped = GroupedRnn { groups };
        let seq = uniform(&mut r, t * i);
        let mut macs = 0;
        let got = grouped_forward(&seq, &grouped, &mut macs).unwrap();

        let full = rows(&seq, i);
        let per_group: Vec<Vec<Vec<f64>>> = grouped
            .groups
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let part: Vec<Vec<f64>> = full
                    .iter()
                    .map(|x| x[j * i / g..(j + 1) * i / g].to_vec())
                    .collect();
                reference(w, &part)
            })
            .collect();
        let want: Vec<f64> = (0..t)
            .flat_map(|s| {
                let joined: Vec<f64> = per_group.iter().flat_map(|y| y[s].clone()).collect();
                shuffle_ref(&joined, g)
            })
            .collect();
        for (a, b) in got.iter().zip(&want) {
            assert!((*a as f64 - b).abs() <= 1e-6, "g={g}: {a} vs {b}");
        }
        let dirs = if bidir { 2 } else { 1 };
        assert_eq!(macs, (t * dirs * g * 4 * (h / g) * (i / g + h / g)) as u64);
    }
}

#[test]
fn rearrange_two_groups_is_an_involution_on_four_channels() {
    let mut r = SplitMix64::new(3);
    for _ in 0..1000 {
        let rows_n = 1 + (r.next_u64() % 4) as usize;
        let x = uniform(&mut r, 4 * rows_n);
        let once = rearrange(&x, 4, 2).unwrap();
        assert_eq!(rearrange(&once, 4, 2).unwrap(), x);
    }
}

proptest! {
    #[test]
    fn rearrange_matches_definition(per in 1usize..6, g in 1usize..6, rows_n in 1usize..4, seed: u64) {
        let c = per * g;
        let mut r = SplitMix64::new(seed);
        let x = uniform(&mut r, c * rows_n);
        let got = rearrange(&x, c, g).unwrap();
        let want: Vec<f64> = x.chunks(c).flat_map(|row| shuffle_ref(&wide(row), g)).collect();
        prop_assert_eq!(wide(&got), want);
        // Transposing back is the shuffle with the complementary group count.
        prop_assert_eq!(rearrange(&got, c, per).unwrap(), x);
    }

    #[test]
    fn rearrange_rejects_indivisible_groups(c in 1usize..40, g in 1usize..40) {
        prop_assume!(c % g != 0);
        prop_assert!(rearrange(&vec![0.0; c], c, g).is_err());
    }

    #[test]
    fn stft_round_trip(len in 1usize..6000, log_fft in 4u32..10, quarter: bool, seed: u64) {
        let fft_size = 1usize << log_fft;
        let cfg = StftConfig {
            fft_size,
            hop_size: if quarter { fft_size / 4 } else { fft_size / 2 },
            ..StftConfig::default()
        };
        let mut r = SplitMix64::new(seed);
        let x = uniform(&mut r, len);
        let y = istft(&stft(&x, &cfg).unwrap(), &cfg, len).unwrap();
        let num: f64 = x.iter().zip(&y).map(|(a, b)| ((a - b) as f64).powi(2)).sum();
        let den: f64 = x.iter().map(|a| (*a as f64).powi(2)).sum();
        prop_assert!(num.sqrt() <= 1e-6 * den.sqrt().max(1e-12), "relative error {}", (num / den).sqrt());
    }
}
