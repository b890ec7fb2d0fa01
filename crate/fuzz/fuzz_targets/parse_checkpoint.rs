#![no_main]

use hob2srnn::model::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ck) = Checkpoint::parse(text) {
        let again = Checkpoint::parse(&ck.to_text()).expect("serialized checkpoint reloads");
        assert_eq!(again, ck);
    }
});
