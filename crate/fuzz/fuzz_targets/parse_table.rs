#![no_main]

use hob2srnn::data::{parse_table, DatasetHeader};
use hob2srnn::hierarchy::ClassHierarchy;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let header = DatasetHeader {
        radar_channels: vec!["VV".into(), "VH".into()],
        radar_dates: vec!["r1".into(), "r2".into()],
        optical_channels: vec!["R".into(), "NIR".into(), "NDVI".into()],
        optical_dates: vec!["o1".into()],
    };
    let hierarchy = ClassHierarchy::load("Crops\n  Maize\n  Rice\nForest\n  Pine\n").unwrap();
    if let Ok(samples) = parse_table(text, &header, &hierarchy) {
        for s in &samples {
            assert_eq!(s.radar.shape(), (2, 2));
            assert_eq!(s.optical.shape(), (1, 3));
            assert!(s.radar.is_finite() && s.optical.is_finite());
        }
    }
});
