//! Shared inputs for the benchmarks.

use ucover_core::fixtures::fixture;
use ucover_core::program::transcribe;
use ucover_core::solver::initial_guess;
use ucover_core::TranscribedProgram;

/// Transcribed fixture and its initial-guess decision vector.
pub fn program(name: &str) -> (TranscribedProgram, Vec<f64>) {
    let spec = fixture(name).expect("built-in fixture").spec().expect("valid fixture");
    let x = initial_guess(&spec).expect("initial guess").values;
    (transcribe(spec).expect("transcribes"), x)
}
