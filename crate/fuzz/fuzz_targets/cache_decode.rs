#![no_main]

use libfuzzer_sys::fuzz_target;
use palmscat::cache::FeatureCache;

fuzz_target!(|data: &[u8]| {
    let Ok(cache) = FeatureCache::decode(data) else {
        return;
    };
    assert_eq!(cache.vectors.len(), cache.len() * cache.dim());
    // compare encodings rather than values so NaN payloads count as equal
    let bytes = cache.encode().expect("a decoded cache re-encodes");
    let again = FeatureCache::decode(&bytes).expect("re-encoded cache decodes");
    assert_eq!(again.encode().unwrap(), bytes);
});
