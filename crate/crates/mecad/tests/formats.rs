use mecad::{decode_dataset, encode_dataset, Error};
use mecad_core::{ClassData, ClassStream, EmbeddingRecord, Embeddings, Label};
use proptest::prelude::*;

fn record(class: &str, id: usize, label: Label, h: usize, w: usize, dim: usize, vals: &[f32]) -> EmbeddingRecord {
    let data: Vec<f32> = (0..h * w * dim).map(|i| vals[i % vals.len()]).collect();
    EmbeddingRecord::new(class, format!("img{id}"), label, h, w, Embeddings::from_flat(dim, data).unwrap()).unwrap()
}

prop_compose! {
    fn streams()(dim in 1usize..6, classes in 0usize..4, h in 1usize..3, w in 1usize..4,
                 train in 0usize..3, test in 0usize..4,
                 vals in prop::collection::vec(-1e6f32..1e6, 1..32),
                 labels in prop::collection::vec(any::<bool>(), 4)) -> ClassStream {
        let classes = (0..classes)
            .map(|c| {
                let name = format!("class_{c}_übung");
                let train = (0..train).map(|i| record(&name, i, Label::Normal, h, w, dim, &vals)).collect();
                let test = (0..test)
                    .map(|i| {
                        let label = if labels[i] { Label::Anomalous } else { Label::Normal };
                        record(&name, 100 + i, label, h, w, dim, &vals)
                    })
                    .collect();
                ClassData { name, train, test }
            })
            .collect();
        ClassStream::new(dim, classes).unwrap()
    }
}

proptest! {
    #[test]
    fn mecd_round_trip(stream in streams()) {
        let bytes = encode_dataset(&stream).unwrap();
        let back = decode_dataset(&bytes).unwrap();
        prop_assert_eq!(&back, &stream);
        prop_assert_eq!(encode_dataset(&back).unwrap(), bytes);
    }

    #[test]
    fn every_truncation_is_rejected(stream in streams(), cut in any::<prop::sample::Index>()) {
        let bytes = encode_dataset(&stream).unwrap();
        let at = cut.index(bytes.len());
        let err = decode_dataset(&bytes[..at]).unwrap_err();
        prop_assert!(err.is_validation());
        let is_format = matches!(err, Error::Format(_));
        prop_assert!(is_format);
    }
}
