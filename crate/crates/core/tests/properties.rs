mod common;

use csiaug::data_model::{flatten_amplitude, segment, ActivityLabel, CsiFrame, Dataset, LabeledWindow, Recording, Split};
use csiaug::ingest::{parse_mapped, to_csv_string, ColumnMap, LabeledRecording};
use csiaug::nn::softmax_rows;
use csiaug::preprocess::pca_fit;
use common::{oracle_covariance, sign_normalize};
use ndarray::Array2;
use proptest::prelude::*;

fn label() -> impl Strategy<Value = ActivityLabel> {
    (0..7usize).prop_map(|i| ActivityLabel::from_id(i).unwrap())
}

fn recording(n_rx: usize, n_sub: usize, frames: usize, rate: f64, seed: u64) -> Recording {
    let d = n_rx * n_sub;
    let mut state = seed;
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let frames = (0..frames)
        .map(|t| {
            let amp = (0..d).map(|_| next() * 40.0).collect();
            let phase = (0..d).map(|_| (next() - 0.5) * 6.0).collect();
            CsiFrame::from_polar(t as f64 / rate, n_rx, n_sub, amp, phase).unwrap()
        })
        .collect();
    Recording::new(frames, rate, 0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flatten_is_row_major(n_rx in 1usize..4, n_sub in 1usize..31, seed in any::<u64>()) {
        let rec = recording(n_rx, n_sub, 1, 100.0, seed);
        let frame = &rec.frames()[0];
        let flat = flatten_amplitude(frame);
        prop_assert_eq!(flat.len(), n_rx * n_sub);
        let mut seen = vec![false; flat.len()];
        for i in 0..n_rx {
            for j in 0..n_sub {
                let k = i * n_sub + j;
                prop_assert_eq!(flat[k], frame.amplitude()[k]);
                prop_assert!((flat[k] - frame.h(i, j).norm()).abs() <= 1e-12 * flat[k].max(1.0));
                seen[k] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn segment_count_and_contents(frames in 1usize..120, window_len in 1usize..40, stride in 1usize..25, l in label()) {
        let rec = recording(1, 2, frames, 50.0, frames as u64);
        match segment(&rec, l, window_len, stride) {
            Ok(windows) => {
                prop_assert!(frames >= window_len);
                prop_assert_eq!(windows.len(), (frames - window_len) / stride + 1);
                let amps = rec.amplitude_matrix();
                for (w, win) in windows.iter().enumerate() {
                    prop_assert_eq!(win.values.dim(), (window_len, 2));
                    prop_assert_eq!(win.label, l);
                    for t in 0..window_len {
                        prop_assert_eq!(win.values.row(t), amps.row(w * stride + t));
                    }
                }
            }
            Err(_) => prop_assert!(frames < window_len),
        }
    }

    #[test]
    fn non_overlapping_segments_partition(windows in 1usize..12, window_len in 1usize..20, tail in 0usize..5) {
        let tail = tail.min(window_len - 1);
        let frames = windows * window_len + tail;
        let rec = recording(1, 1, frames, 10.0, 3);
        let segs = segment(&rec, ActivityLabel::Walk, window_len, window_len).unwrap();
        prop_assert_eq!(segs.len(), windows);
        let joined: Vec<f64> = segs.iter().flat_map(|w| w.values.iter().copied().collect::<Vec<_>>()).collect();
        let expected: Vec<f64> = rec.amplitude_matrix().iter().take(windows * window_len).copied().collect();
        prop_assert_eq!(joined, expected);
    }

    #[test]
    fn dataset_json_round_trip(sizes in proptest::collection::vec((label(), any::<bool>()), 1..20), steps in 1usize..6, width in 1usize..5) {
        let mut ds = Dataset::new();
        for (i, (l, test)) in sizes.iter().enumerate() {
            let values = Array2::from_shape_fn((steps, width), |(r, c)| (i * 31 + r * 7 + c) as f64 / 3.0 + 0.1);
            let split = if *test { Split::Test } else { Split::Train };
            ds.push(LabeledWindow::real(values, *l), split).unwrap();
            if !test {
                ds.push(LabeledWindow::synthetic(Array2::from_elem((steps, width), 1.0 / 7.0), *l), Split::Train).unwrap();
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        ds.save_json(&path).unwrap();
        prop_assert_eq!(Dataset::load_json(&path).unwrap(), ds);
    }

    #[test]
    fn csv_round_trip(n_rx in 1usize..4, n_sub in 1usize..6, frames in 1usize..15, rate in prop::sample::select(vec![50.0, 100.0, 250.0, 1000.0]), l in label(), seed in any::<u64>()) {
        let rec = recording(n_rx, n_sub, frames.max(2), rate, seed);
        let recs = vec![LabeledRecording { recording: rec, label: l }];
        let text = to_csv_string(&recs).unwrap();
        let map = ColumnMap { n_rx, n_sub, phase_start: Some(3 + n_rx * n_sub), ..ColumnMap::default() };
        let back = parse_mapped(&text, &map).unwrap();
        prop_assert_eq!(back, recs);
    }

    #[test]
    fn softmax_rows_are_distributions(rows in 1usize..6, logits in proptest::collection::vec(-500.0f64..500.0, 7 * 6)) {
        let x = Array2::from_shape_vec((rows, 7), logits[..rows * 7].to_vec()).unwrap();
        let p = softmax_rows(&x);
        for r in 0..rows {
            let row = p.row(r);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
            let arg_x = (0..7).fold(0, |b, i| if x[[r, i]] > x[[r, b]] { i } else { b });
            prop_assert_eq!(row[arg_x], row.iter().copied().fold(0.0, f64::max));
        }
    }

    #[test]
    fn pca_projection_properties(n in 3usize..30, d in 1usize..12, seed in any::<u64>()) {
        let rec = recording(1, d, n, 10.0, seed);
        let data = rec.amplitude_matrix();
        let k = (n - 1).min(d);
        let model = pca_fit(data.view(), k).unwrap();
        let projected = model.transform(data.view()).unwrap();
        // Projections are centred and their variances are the eigenvalues.
        for c in 0..k {
            let col = projected.column(c);
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let scale = model.explained_variance[0].max(1.0);
            prop_assert!(mean.abs() <= 1e-9 * scale.sqrt());
            prop_assert!((var - model.explained_variance[c]).abs() <= 1e-8 * scale);
        }
        prop_assert!(model.explained_variance.windows(2).into_iter().all(|w| w[0] >= w[1] - 1e-12));
        // A full-rank basis reconstructs the data exactly.
        if k == d {
            let back = model.inverse_transform(projected.view()).unwrap();
            let err = (&back - &data).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(err <= 1e-8);
        }
        let cov = oracle_covariance(&data);
        let total: f64 = (0..d).map(|i| cov[[i, i]]).sum();
        prop_assert!(model.explained_variance.sum() <= total * (1.0 + 1e-10) + 1e-10);
        for c in 0..k {
            let mut v = model.components.row(c).to_vec();
            let before = v.clone();
            sign_normalize(&mut v);
            prop_assert_eq!(v, before);
        }
    }
}
