mod common;

use common::checks::renaming_case;
use common::renamed_pair;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn measures_ignore_variable_names(pair in renamed_pair()) {
        match renaming_case(pair) {
            Ok(true) => {}
            Ok(false) => return Err(TestCaseError::reject("run did not finish")),
            Err(msg) => prop_assert!(false, "{}", msg),
        }
    }
}
