//! Shared helpers for the pipeline benchmarks.

use ssr_core::model::{AttackSpec, Waveform};
use ssr_core::network::{build_susceptance, kron_reduce};
use ssr_core::statespace::{assemble, StateSpaceSystem};
use ssr_core::{fixtures, SystemModel};

pub fn two_area() -> SystemModel {
    fixtures::two_area()
}

pub fn two_area_system() -> StateSpaceSystem {
    let model = fixtures::two_area();
    let b = build_susceptance(&model.network);
    let rc = kron_reduce(&b, &model).expect("fixture reduces");
    assemble(&model, &rc).expect("fixture assembles")
}

pub fn square_attack(frequency_hz: f64) -> AttackSpec {
    AttackSpec {
        bus: "3".into(),
        amplitude_pu: 1.0,
        frequency_hz,
        waveform: Waveform::Square,
        start_s: 0.0,
        duty: 0.5,
    }
}
