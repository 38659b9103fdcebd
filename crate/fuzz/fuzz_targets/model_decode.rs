#![no_main]

use libfuzzer_sys::fuzz_target;
use palmscat::model::Recognizer;

fuzz_target!(|data: &[u8]| {
    let Ok(model) = Recognizer::decode(data) else {
        return;
    };
    let bytes = model.encode().expect("a decoded model re-encodes");
    let again = Recognizer::decode(&bytes).expect("re-encoded model decodes");
    assert_eq!(again.encode().unwrap(), bytes);

    let query = vec![0.0; model.schema.dim];
    let _ = model.predict(&query);
});
