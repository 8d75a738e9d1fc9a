#![no_main]

use libfuzzer_sys::fuzz_target;
use qhdturb::kvdoc::KvDocument;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(doc) = KvDocument::parse(text) {
        // Printing and reparsing must be stable.
        let again = KvDocument::parse(&doc.to_string()).expect("printed document parses");
        assert_eq!(again.to_string(), doc.to_string());
    }
});
