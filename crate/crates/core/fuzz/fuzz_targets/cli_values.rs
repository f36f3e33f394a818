#![no_main]

use libfuzzer_sys::fuzz_target;
use otfs_ipac::config::{parse_snr_list, AdcBits, SnrConvention};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(bits) = text.parse::<AdcBits>() {
        assert_eq!(bits.to_string().parse::<AdcBits>().unwrap(), bits);
    }
    if let Ok(list) = parse_snr_list(text) {
        assert!(list.iter().all(|v| v.is_finite()));
        assert_eq!(list.len(), text.split(',').count());
    }
    if let Ok(conv) = text.parse::<SnrConvention>() {
        assert_eq!(conv.label().parse::<SnrConvention>().unwrap(), conv);
    }
});
