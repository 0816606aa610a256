//! Regression values pinned from this implementation's own fixed-seed output.

use stylespace::nets::{VaeModel, DEFAULT_LATENT_DIM};
use stylespace::train::checkpoint::Fnv1a;
use stylespace::Tensor;

const GOLDEN_MU: [f32; 8] = [
    -0.79120344,
    1.4471558,
    -1.1386172,
    0.6787472,
    0.1299695,
    -1.4842677,
    -1.3068693,
    -0.7651596,
];
const GOLDEN_MU_NORM: f64 = 6.900513756911816;
/// FNV-1a of the 8-bit quantised decode of the zero latent.
const GOLDEN_ZERO_DECODE: u64 = 0x51af177cac6de325;

/// Deterministic, seed-free test image.
fn probe_image() -> Tensor {
    let data = (0..3 * 64 * 64).map(|i| ((i * 7919) % 256) as f32 / 255.0).collect();
    Tensor::new(&[1, 3, 64, 64], data).unwrap()
}

fn image_hash(t: &Tensor) -> u64 {
    let bytes: Vec<u8> = t
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    Fnv1a::hash(&bytes)
}

#[test]
fn fresh_encoder_mean_matches_pinned_vector() {
    let vae = VaeModel::new(DEFAULT_LATENT_DIM, 0);
    let code = vae.encode(&probe_image()).unwrap().remove(0);
    assert_eq!(code.mean.len(), DEFAULT_LATENT_DIM);
    for (got, want) in code.mean.iter().zip(GOLDEN_MU) {
        assert!((got - want).abs() <= 1e-5, "{got} vs {want}");
    }
    let norm = code.mean.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt();
    assert!((norm - GOLDEN_MU_NORM).abs() <= 1e-4, "{norm}");
}

#[test]
fn zero_latent_decodes_to_pinned_image() {
    let vae = VaeModel::new(DEFAULT_LATENT_DIM, 0);
    let out = vae.decode(&Tensor::zeros(&[1, DEFAULT_LATENT_DIM])).unwrap();
    assert_eq!(out.shape(), &[1, 3, 64, 64]);
    assert_eq!(image_hash(&out), GOLDEN_ZERO_DECODE);
}
