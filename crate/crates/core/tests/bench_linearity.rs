use palmscat::cache::FeatureCache;
use palmscat::dataset::{synth_generate, SplitMode, SplitSpec};
use palmscat::experiment::{bench, train_recognizer, ExperimentConfig};
use palmscat::features::{FeatureExtractor, FeatureSchema};
use palmscat::filterbank::build_filter_bank;
use palmscat::image::Image;

#[test]
fn doubling_images_doubles_wall_time() {
    let schema = FeatureSchema::new(128, 32, 5, 6, 2).unwrap();
    let bank = build_filter_bank(schema.filter_config()).unwrap();
    let extractor = FeatureExtractor::new(schema, &bank).unwrap();
    let ds = synth_generate(4, 4, 128, 3).unwrap();
    let cache = FeatureCache::from_dataset(&ds, &extractor).unwrap();
    let spec = SplitSpec {
        train_per_class: 2,
        seed: 0,
        mode: SplitMode::FirstK,
    };
    let model = train_recognizer(&cache, &spec, 5, &ExperimentConfig::default()).unwrap();
    let images: Vec<&Image> = ds.samples.iter().map(|s| &s.image).collect();

    // warm caches and the allocator before timing
    bench(&model, &extractor, &images[..2]).unwrap();
    let mut ratios = Vec::new();
    for _ in 0..3 {
        let one = bench(&model, &extractor, &images[..6]).unwrap();
        let two = bench(&model, &extractor, &images[..12]).unwrap();
        assert_eq!((one.images, two.images), (6, 12));
        ratios.push(two.wall_ms / one.wall_ms);
    }
    ratios.sort_by(f64::total_cmp);
    println!("wall time ratio for 2x images: {ratios:?}");
    assert!((1.6..=2.4).contains(&ratios[1]));
}
