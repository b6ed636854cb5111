use metafuse_core::split::{stratified_split, train_count};
use metafuse_core::{decode_table, encode_table, fixed_split, fuse, FeatureMatrix, Matrix, MetadataTable};
use proptest::prelude::*;

fn ascii_value() -> impl Strategy<Value = Option<String>> {
    prop_oneof![
        1 => Just(None),
        6 => prop::collection::vec(1u8..128, 0..10).prop_map(|b| Some(String::from_utf8(b).unwrap())),
        2 => "[ a-z0-9]{0,6}".prop_map(Some),
    ]
}

fn table() -> impl Strategy<Value = MetadataTable> {
    (1usize..5, 1usize..12).prop_flat_map(|(f, n)| {
        prop::collection::vec(prop::collection::vec(ascii_value(), f), n).prop_map(move |records| {
            let names = (0..f).map(|i| format!("field{i}")).collect();
            MetadataTable::new(names, records).unwrap()
        })
    })
}

fn right_trimmed(v: Option<&str>) -> Option<String> {
    v.map(|s| s.trim_end_matches(' ')).filter(|s| !s.is_empty()).map(String::from)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn codec_round_trip(t in table()) {
        let enc = encode_table(&t).unwrap();
        let back = decode_table(&enc, t.field_names()).unwrap();
        for (r, rec) in t.records().iter().enumerate() {
            for f in 0..rec.len() {
                prop_assert_eq!(back.get(r, f).map(String::from), right_trimmed(t.get(r, f)));
            }
        }
        for (r, rec) in t.records().iter().enumerate() {
            for (f, span) in enc.field_spans.iter().enumerate() {
                let codes = &enc.values.row(r)[span.offset..span.offset + span.width];
                match &rec[f] {
                    None => prop_assert!(codes.iter().all(|&c| c == 0)),
                    Some(s) => {
                        prop_assert_eq!(&codes[..s.len()], s.as_bytes());
                        prop_assert!(codes[s.len()..].iter().all(|&c| c == b' '));
                    }
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn split_partitions_indices(n in 2usize..500, seed in any::<u64>(), frac in 0.05f64..0.95) {
        let want = train_count(n, frac);
        prop_assume!(want > 0 && want < n);
        let s = fixed_split(n, seed, frac).unwrap();
        prop_assert_eq!(s.train_indices.len(), want);
        let mut all: Vec<usize> = s.train_indices.iter().chain(&s.test_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(s.fingerprint(), fixed_split(n, seed, frac).unwrap().fingerprint());
    }

    #[test]
    fn stratified_split_partitions_every_class(labels in prop::collection::vec(0usize..4, 8..200), seed in any::<u64>()) {
        let k = 4;
        prop_assume!((0..k).all(|c| labels.contains(&c)));
        if let Ok(s) = stratified_split(&labels, k, seed, 0.7) {
            let mut all: Vec<usize> = s.train_indices.iter().chain(&s.test_indices).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            prop_assert_eq!(s.train_indices.len(), train_count(labels.len(), 0.7));
        }
    }

    #[test]
    fn fusion_keeps_both_blocks(n in 1usize..20, d in 1usize..8, t in table()) {
        prop_assume!(t.len() >= n);
        let rows: Vec<usize> = (0..n).collect();
        let t = t.select_rows(&rows);
        let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let feats: Vec<f32> = (0..n * d).map(|i| i as f32 * 0.5).collect();
        let fm = FeatureMatrix::new(Matrix::from_vec(n, d, feats).unwrap(), ids.clone(), "net").unwrap();
        let enc = encode_table(&t).unwrap();
        let fused = fuse(&fm, &enc, &ids).unwrap();
        let (io, iw) = fused.image_span();
        let (mo, mw) = fused.metadata_span();
        prop_assert_eq!((io, iw, mo, mw), (0, d, d, enc.width()));
        for r in 0..n {
            let row = fused.data.row(r);
            prop_assert_eq!(&row[..d], fm.data().row(r));
            let codes: Vec<f32> = enc.values.row(r).iter().map(|&c| f32::from(c)).collect();
            prop_assert_eq!(&row[d..], codes.as_slice());
        }
    }
}

#[test]
fn fusion_rejects_misaligned_ids() {
    let fm = FeatureMatrix::new(Matrix::filled(2, 1, 1.0), vec!["a".into(), "b".into()], "net").unwrap();
    let t = MetadataTable::new(vec!["age".into()], vec![vec![Some("5".into())], vec![None]]).unwrap();
    let enc = encode_table(&t).unwrap();
    assert!(fuse(&fm, &enc, &["b".into(), "a".into()]).is_err());
    assert!(fuse(&fm, &enc, &["a".into()]).is_err());
}

#[test]
fn missing_age_is_a_zero_run() {
    let t = MetadataTable::new(
        vec!["age".into(), "sex".into()],
        vec![vec![Some("45".into()), Some("male".into())], vec![None, Some("female".into())]],
    )
    .unwrap();
    let enc = encode_table(&t).unwrap();
    assert_eq!(enc.values.row(0), &[52, 53, 109, 97, 108, 101, 32, 32]);
    assert_eq!(enc.values.row(1), &[0, 0, 102, 101, 109, 97, 108, 101]);
}
