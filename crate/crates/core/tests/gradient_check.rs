//! Backpropagation against central finite differences over every parameter.

mod common;

use common::{deep_spec, tiny_spec, worst_relative_error, TOLERANCE};

#[test]
fn tiny_network_gradients_match_finite_differences() {
    for seed in 0..3 {
        let worst = worst_relative_error(tiny_spec(), seed);
        assert!(worst <= TOLERANCE, "seed {seed}: worst relative error {worst:e}");
    }
}

#[test]
fn strided_two_conv_network_gradients_match() {
    let worst = worst_relative_error(deep_spec(), 7);
    assert!(worst <= TOLERANCE, "worst relative error {worst:e}");
}
