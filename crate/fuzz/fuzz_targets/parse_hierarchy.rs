#![no_main]

use hob2srnn::hierarchy::ClassHierarchy;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(h) = ClassHierarchy::parse(text) else { return };
    let _ = h.validate();
    if let Ok(valid) = ClassHierarchy::load(text) {
        let again = ClassHierarchy::load(&valid.to_text()).expect("serialized taxonomy reloads");
        assert_eq!(again.to_text(), valid.to_text());
        for leaf in 0..valid.class_count(valid.target_level()) {
            for level in 0..valid.num_levels() {
                valid.ancestor_label(leaf, level).expect("ancestor exists");
            }
        }
    }
});
