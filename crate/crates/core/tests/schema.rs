mod common;

use common::schema_cases::CASES;
use yanc_core::{NetFs, Store};

#[test]
fn schema_cases_in_process() {
    for (name, case) in CASES {
        let fs = NetFs::new(Store::new());
        eprintln!("case {name}");
        case(&fs);
    }
}

#[test]
fn cases_share_one_store() {
    let fs = NetFs::new(Store::new());
    for (_, case) in CASES {
        case(&fs);
    }
}
