#![no_main]

use libfuzzer_sys::fuzz_target;
use palmscat::pgm;

fuzz_target!(|data: &[u8]| {
    let Ok(img) = pgm::decode(data) else {
        return;
    };
    assert_eq!(img.samples.len(), img.width * img.height);
    let image = img.to_image();
    assert!(image.data().iter().all(|v| (0.0..=1.0).contains(v)));

    // 8-bit rasters survive a write/read cycle unchanged
    if img.maxval == 255 {
        let bytes: Vec<u8> = img.samples.iter().map(|&s| s as u8).collect();
        let again = pgm::decode(&pgm::encode(img.width, img.height, &bytes)).unwrap();
        assert_eq!(again, img);
    }
});
