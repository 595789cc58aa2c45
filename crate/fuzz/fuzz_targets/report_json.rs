//! Run reports cross a serialization boundary (reports/*.json); decoding
//! arbitrary JSON into a report and re-encoding must never panic.

#![no_main]

use coopkb::protocol::RunReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(report) = serde_json::from_slice::<RunReport>(data) {
        let _ = report.all_correct();
        let _ = report.mean_samples_per_agent();
        let _ = report.flat_row();
        let _ = serde_json::to_string(&report);
    }
});
