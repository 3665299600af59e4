mod common;

use permproj_core::chain::{InvolutionPermutation, Permutation, ProbabilityVector};
use permproj_core::io;
use permproj_core::{Error, ErrorKind};

#[test]
fn matrix_round_trip_is_exact() {
    let pi = ProbabilityVector::new(vec![0.1, 0.2, 0.3, 0.4], 1e-12).unwrap();
    for seed in 0..5 {
        let p = common::stationary(&pi, seed);
        let text = io::format_matrix(&p, Some(&pi));
        let back = io::parse_matrix(&text).unwrap();
        assert_eq!(back.matrix, p);
        assert_eq!(back.pi.unwrap(), pi);
    }
}

#[test]
fn three_point_file_parses() {
    let text = "# three-point example\nn 3\n0.5 0.3333333333333333 0.16666666666666666\n\
                0.3333333333333333 0.16666666666666666 0.5\n0.16666666666666666 0.5 0.3333333333333333\n";
    let f = io::parse_matrix(text).unwrap();
    assert_eq!(f.matrix.n(), 3);
    assert!(f.pi.is_none());
}

#[test]
fn parse_errors_carry_line_numbers() {
    let cases = [
        ("n 2\n0.5 0.5\n0.5 x\n", 3),
        ("m 2\n", 1),
        ("n 2\n0.5 0.5\n", 3),
        ("n 2\n0.5 0.5 0.1\n0.5 0.5\n", 2),
        ("n 2\n0.5 0.5\n0.5 0.5\npi 0.5\n", 4),
    ];
    for (text, line) in cases {
        match io::parse_matrix(text) {
            Err(e @ Error::Parse { .. }) => {
                assert_eq!(e.kind(), ErrorKind::Parse);
                let Error::Parse { line: got, .. } = e else { unreachable!() };
                assert_eq!(got, line, "input {text:?}");
            }
            other => panic!("expected a parse error for {text:?}, got {other:?}"),
        }
    }
    // Well-formed but not stochastic is a validation failure, not a parse failure.
    let err = io::parse_matrix("n 2\n0.5 0.6\n0.5 0.5\n").unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Validation);
}

#[test]
fn permutation_files() {
    let q = InvolutionPermutation::without_distribution(vec![2, 1, 0, 4, 3]).unwrap();
    let text = io::format_permutation(&q);
    assert_eq!(io::parse_permutation(&text, 5).unwrap(), q.mapping().to_vec());
    assert_eq!(io::parse_permutation("# nothing moves\n", 3).unwrap(), vec![0, 1, 2]);
    assert!(io::parse_permutation("0 7\n", 3).is_err());
    assert!(io::parse_permutation("0 1 2\n", 3).is_err());
}
