//! Turning raw decision values into probabilities.

mod cap;
mod platt;
mod weibull;

pub use cap::{fit_cap_gate, CapConfig, CapGate};
pub use platt::{platt_fit, PlattCalibrator};
pub use weibull::{
    default_tail_size, fit_two_parameter, weibull_fit, Location, Tail, WeibullFitter,
    WeibullModel,
};
