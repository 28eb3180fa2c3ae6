#![no_main]
use std::path::Path;

use libfuzzer_sys::fuzz_target;
use stfm_core::panel::{align, parse_provider_csv};

/// Alignment allocates one slot per hour of the covered range.
const MAX_SPAN_HOURS: i64 = 24 * 7 * 520;

fuzz_target!(|data: &[u8]| {
    let Ok(raw) = parse_provider_csv(Path::new("fuzz.csv"), data) else { return };
    assert!(raw.readings.iter().all(|(_, v)| v.is_finite()));
    let (Some(lo), Some(hi)) = (raw.readings.iter().map(|r| r.0).min(), raw.readings.iter().map(|r| r.0).max()) else {
        return;
    };
    if (hi - lo).num_hours() <= MAX_SPAN_HOURS {
        let _ = align(vec![raw], None);
    }
});
