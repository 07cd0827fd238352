//! Combines the thermal key set, the acoustic length and per-key predictions
//! into ranked password guesses.

mod dictionary;
mod graph;
mod score;
mod space;

pub use dictionary::{
    attack_target, dictionary_attack, key_for_char, position_of, DictEntry, Dictionary, RankedEntry,
    TopNEvaluator,
};
pub use graph::{
    build_graph, k_best_paths, node_probabilities, prune_repeat_edges, DigramLikelihoods, Edge, LayeredGraph,
    NodeProbabilities, Path,
};
pub use score::{
    rank_passwords, score_password, score_space, AdditiveBonus, BonusRule, Combiner, KeyScore, Ranking,
    ScoredPassword, ScoringMethod, TimingBonus, SAME_KEY_THRESHOLD,
};
pub use space::{generate_search_space, search_space_size, SearchSpace, SearchSpaceSpec, SpaceMode};
