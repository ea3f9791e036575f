//! Synthetic corpus, trial lists, equal error rates and the
//! disguise-by-restoration evaluation matrix.

mod corpus;
mod eer;
mod io;
mod matrix;
mod trials;

pub use corpus::{
    speaker_templates, synth_corpus, Corpus, CorpusConfig, CorpusUtterance, SpeakerTemplate,
};
pub use eer::{compute_eer, EerReport, RocPoint};
pub use io::{
    load_corpus, load_trial_set, render_report, write_corpus, write_report, write_trial_bundle,
    CORPUS_LIST, TRIAL_LIST,
};
pub use matrix::{
    alpha_bias, disguise_label, matrix_csv, per_alpha_csv, run_matrix, AlphaEer, AsymmetryEntry,
    BiasBucket, BiasEntry, BiasStats, MatrixOptions, MatrixReport, MatrixRow, PerAlphaCurve,
    Restoration, RestorationRun, TrialOutcome, TrialSet,
};
pub use trials::{
    format_trials, gen_trials, parse_trials, read_trials, render_trials, DisguisePolicy,
    PlannedTrial, Trial,
};
