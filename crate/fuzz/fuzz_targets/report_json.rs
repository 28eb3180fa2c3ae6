#![no_main]
use libfuzzer_sys::fuzz_target;
use stfm_core::report::{parse_report_json, report_csv, report_markdown, trace_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = parse_report_json(text) {
        let _ = report_markdown(&report);
        let _ = report_csv(&report);
        let _ = trace_csv(&report);
    }
});
