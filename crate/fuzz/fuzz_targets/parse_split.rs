#![no_main]

use hob2srnn::data::{synth_generate, Split, SynthSpec};
use hob2srnn::numkernel::SeededRng;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let spec = SynthSpec { segments: 12, segments_per_group: 1, radar_dates: 2, optical_dates: 2, ..SynthSpec::default() };
    let ds = synth_generate(&spec, &mut SeededRng::new(0)).unwrap().dataset;
    if let Ok(split) = Split::parse(text, &ds) {
        let total: usize = split.partitions().iter().map(|p| p.len()).sum();
        assert!(total <= ds.len());
        assert_eq!(Split::parse(&split.to_text(&ds), &ds).unwrap(), split);
    }
});
