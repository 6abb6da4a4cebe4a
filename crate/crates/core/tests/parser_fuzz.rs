//! Parser robustness: arbitrary inputs must either parse or fail with a
//! positioned diagnostic inside the input, never panic.

use bifscope::error::BifError;
use bifscope::expr::parse;
use proptest::prelude::*;

fn check(input: &str) {
    match parse(input) {
        Ok(_) => {}
        Err(BifError::Syntax { pos, .. })
        | Err(BifError::NonIntegerExponent { pos })
        | Err(BifError::UnknownIdentifier { pos, .. }) => {
            assert!(pos <= input.len(), "position {pos} beyond input of length {}", input.len());
        }
        Err(other) => panic!("non-parse error from parse({input:?}): {other}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 5_000, .. ProptestConfig::default() })]

    #[test]
    fn arbitrary_strings(s in ".{0,48}") {
        check(&s);
    }

    #[test]
    fn token_soup(s in "[zc0-9 λ+*/^().,-]{0,48}") {
        check(&s);
    }
}

#[test]
fn edge_inputs() {
    for s in [
        "", " ", "(", ")", "z^", "z^^2", "1/0", "z^(1/2)", "z^-1", "--", "((((((((z))))))))",
        "z^999999999999999999999", "0.0.0", "1e309", "z*", "+", "c c", "lambda", "w", "z/",
    ] {
        check(s);
    }
}
