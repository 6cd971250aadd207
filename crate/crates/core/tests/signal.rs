use hsad_core::signal::{build_signal_matrix, select_observation_index, strided_layers, subsample_layers, LayerSelection};
use hsad_core::{ActivationTrace, Error, NodeVectors, ObservationPoint, PositionCapture, Role};
use proptest::prelude::*;

/// Node value encoding (position, layer, node, dimension) so every matrix
/// entry can be traced back to its source.
fn code(pos: u32, layer: u32, node: u32, dim: u32) -> f32 {
    (pos * 10000 + layer * 100 + node * 10 + dim) as f32
}

fn coded_trace(l: u32, d: u32, m: u32, n: u32) -> ActivationTrace {
    let captures = (0..m + n)
        .map(|pos| PositionCapture {
            token_index: pos,
            role: if pos < m { Role::Question } else { Role::Answer },
            layers: (1..=l)
                .map(|j| {
                    let v = |node| (0..d).map(|i| code(pos, j, node, i)).collect();
                    // node codes: ah 0, rh 1, mh 2, h 3
                    NodeVectors::new(v(0), v(1), v(2), v(3))
                })
                .collect(),
        })
        .collect();
    ActivationTrace {
        example_id: "coded".into(),
        model_name: "test".into(),
        l,
        d,
        m,
        n,
        captures,
    }
}

proptest! {
    #[test]
    fn rows_are_descending_layers_in_h_mh_rh_ah_order(
        l in 1u32..12,
        d in 1u32..5,
        m in 1u32..6,
        n in 1u32..6,
        point in prop::sample::select(ObservationPoint::ALL.to_vec()),
        mask in any::<u16>(),
    ) {
        let trace = coded_trace(l, d, m, n);
        let mut ids: Vec<u32> = (1..=l).filter(|j| mask & (1 << (j - 1)) != 0).collect();
        if ids.is_empty() {
            ids.push(l);
        }
        let t = build_signal_matrix(&trace, point, &ids).unwrap();
        let pos = select_observation_index(m, n, point);
        let mut expected_layers = ids.clone();
        expected_layers.reverse();
        prop_assert_eq!(&t.layer_ids, &expected_layers);
        prop_assert_eq!(t.rows(), 4 * ids.len());
        for (r, &j) in expected_layers.iter().enumerate() {
            for (k, node) in [3u32, 2, 1, 0].into_iter().enumerate() {
                for i in 0..d {
                    prop_assert_eq!(t.get(4 * r + k, i as usize), f64::from(code(pos, j, node, i)));
                }
            }
        }
    }

    #[test]
    fn random_subsets_are_distinct_sorted_and_seeded(l in 1u32..64, count in 1u32..64, seed in any::<u64>()) {
        prop_assume!(count <= l);
        let ids = subsample_layers(l, count, seed).unwrap();
        prop_assert_eq!(ids.len(), count as usize);
        prop_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(ids.iter().all(|&j| (1..=l).contains(&j)));
        prop_assert_eq!(ids, subsample_layers(l, count, seed).unwrap());
    }

    #[test]
    fn strided_layers_end_at_l(l in 1u32..64, count in 1u32..64) {
        prop_assume!(count <= l);
        let ids = strided_layers(l, count).unwrap();
        prop_assert_eq!(ids.len(), count as usize);
        prop_assert_eq!(*ids.last().unwrap(), l);
        prop_assert!(ids.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn observation_indices() {
    let expect = [0, 3, 6, 7, 9, 12];
    for (p, e) in ObservationPoint::ALL.into_iter().zip(expect) {
        assert_eq!(select_observation_index(7, 6, p), e, "{p}");
    }
    for p in ObservationPoint::ALL {
        assert_eq!(p.name().parse::<ObservationPoint>().unwrap(), p);
    }
}

#[test]
fn missing_capture_and_bad_layers() {
    let mut trace = coded_trace(3, 2, 2, 2);
    trace.captures.retain(|c| c.token_index != 3);
    assert_eq!(
        build_signal_matrix(&trace, ObservationPoint::AEnd, &[1]).unwrap_err(),
        Error::ObservationNotCaptured {
            example_id: "coded".into(),
            token_index: 3
        }
    );
    assert!(build_signal_matrix(&trace, ObservationPoint::QStart, &[0]).is_err());
    assert!(build_signal_matrix(&trace, ObservationPoint::QStart, &[4]).is_err());
    assert!(build_signal_matrix(&trace, ObservationPoint::QStart, &[2, 2]).is_err());
    assert_eq!(LayerSelection::All.resolve(3).unwrap(), vec![1, 2, 3]);
    assert!(LayerSelection::Random { count: 4, seed: 0 }.resolve(3).is_err());
}
