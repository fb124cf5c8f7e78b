use painformer::backbone::{init_params, BackboneConfig};
use painformer::formats::{
    backbone_meta, checkpoint_backbone, decode_checkpoint, decode_embedding, encode_checkpoint, encode_embedding,
    read_checkpoint, read_embedding, write_checkpoint, write_embedding, META_BACKBONE,
};
use painformer::kernel::Tensor;
use painformer::nn::ParamStore;
use proptest::prelude::*;

fn bits(t: &Tensor<f32>) -> Vec<u32> {
    t.data().iter().map(|v| v.to_bits()).collect()
}

fn tensor_strategy() -> impl Strategy<Value = Tensor<f32>> {
    prop::collection::vec(1usize..5, 0..4).prop_flat_map(|shape| {
        let n = shape.iter().product::<usize>();
        prop::collection::vec(any::<u32>().prop_map(f32::from_bits), n)
            .prop_map(move |data| Tensor::new(shape.clone(), data).unwrap())
    })
}

proptest! {
    #[test]
    fn embedding_roundtrip_is_bit_exact(t in tensor_strategy()) {
        let back = decode_embedding(&encode_embedding(&t).unwrap()).unwrap();
        prop_assert_eq!(back.shape(), t.shape());
        prop_assert_eq!(bits(&back), bits(&t));
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact(ts in prop::collection::vec(tensor_strategy(), 0..6)) {
        let mut store = ParamStore::new();
        for (i, t) in ts.into_iter().enumerate() {
            store.insert(format!("layer{i}.w\u{e9}"), t).unwrap();
        }
        let back = decode_checkpoint(&encode_checkpoint(&store).unwrap()).unwrap();
        prop_assert_eq!(back.names().collect::<Vec<_>>(), store.names().collect::<Vec<_>>());
        for ((_, a), (_, b)) in back.iter().zip(store.iter()) {
            prop_assert_eq!(a.shape(), b.shape());
            prop_assert_eq!(bits(a), bits(b));
        }
    }
}

#[test]
fn unified_video_embedding_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("video.pfem");
    let t = Tensor::from_fn(&[22080], |i| (i as f32).sin());
    write_embedding(&path, &t).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes.len(), 4 + 2 + 1 + 1 + 4 + 22080 * 4);
    assert_eq!(&bytes[8..12], &22080u32.to_le_bytes());
    let back = read_embedding(&path).unwrap();
    assert_eq!(back.shape(), &[22080]);
    assert_eq!(bits(&back), bits(&t));
}

#[test]
fn backbone_checkpoint_roundtrip() {
    let cfg = BackboneConfig::toy();
    let mut params = init_params::<f32>(&cfg, 5).unwrap();
    params.insert(META_BACKBONE, backbone_meta(&cfg)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.pfck");
    write_checkpoint(&path, &params).unwrap();
    let back = read_checkpoint(&path).unwrap();
    assert_eq!(checkpoint_backbone(&back).unwrap(), cfg);
    assert_eq!(back.len(), params.len());
    for ((na, a), (nb, b)) in back.iter().zip(params.iter()) {
        assert_eq!(na, nb);
        assert_eq!(bits(a), bits(b));
    }
    // an identical store encodes to identical bytes
    assert_eq!(std::fs::read(&path).unwrap(), encode_checkpoint(&params).unwrap());
}

#[test]
fn duplicate_names_are_rejected() {
    let mut store = ParamStore::new();
    store.insert("a", Tensor::<f32>::zeros(&[1])).unwrap();
    store.insert("b", Tensor::<f32>::zeros(&[1])).unwrap();
    let mut bytes = encode_checkpoint(&store).unwrap();
    // rename the second tensor to "a"
    let pos = bytes.iter().rposition(|&b| b == b'b').unwrap();
    bytes[pos] = b'a';
    assert!(decode_checkpoint(&bytes).is_err());
}
