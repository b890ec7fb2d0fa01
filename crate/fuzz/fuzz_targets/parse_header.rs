#![no_main]

use hob2srnn::data::DatasetHeader;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(h) = DatasetHeader::parse(text) {
        assert_eq!(DatasetHeader::parse(&h.to_toml()).expect("header reloads"), h);
    }
});
