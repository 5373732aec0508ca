#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "treerule/kg.hpp"
#include "treerule/rule.hpp"
#include "treerule/sparse.hpp"

namespace treerule {

enum class BetaMode { FromRuleSC, Fixed };

struct RefineConfig {
    std::size_t batch = 100;  // sampled query groundings per rule
    std::size_t top_k = 5;    // branch candidates kept per variable
    BetaMode beta_mode = BetaMode::FromRuleSC;
    double beta_fixed = 0.5;  // used when beta_mode == Fixed; must be in (0,1)
    bool use_aux = true;
    bool use_ent = true;
    bool use_qry = true;
    std::uint64_t seed = 37;
    std::size_t max_candidates_per_kind = 0;  // 0 = uncapped
    std::uint64_t min_support = 1;            // emitted tree rules below this are dropped
    int threads = 0;
};

/// Per-variable grounding state for one rule: all / positive / negative
/// tracks at every x_i, plus the head-derived truth at x_n.
struct VariableGroundings {
    std::vector<GroundingMatrix> v;  // index 0..n
    std::vector<GroundingMatrix> p;  // filled by backward_reason
    std::vector<GroundingMatrix> n;
    GroundingMatrix truth;           // T_n
};

/// A scored branch candidate. ENT/AUX carry a global constraint vector;
/// QRY carries one constraint row per reasoning track.
struct BranchCandidate {
    BranchAtom branch;
    std::vector<std::uint32_t> constraint;  // sorted entity set (ENT, AUX)
    GroundingMatrix per_track;              // QRY
};

struct ScoredBranch {
    BranchAtom branch;
    double score = 0.0;
};

/// Entities that can ground x_0 (nonzero row sum of the first body atom's
/// effective matrix), sampled without replacement down to config.batch.
/// The stream is seeded by (config.seed, rule signature), so results are
/// independent of scheduling. Empty result means the rule is skipped.
GroundingMatrix sample_query_groundings(const KnowledgeGraph& kg, const Rule& rule,
                                        const RefineConfig& config);

/// Forward pass: fills v[0..n] and truth.
VariableGroundings forward_reason(const KnowledgeGraph& kg, const Rule& rule, GroundingMatrix v0);

/// P_n = V_n ∩ T_n, N_n = V_n \ T_n.
std::pair<GroundingMatrix, GroundingMatrix> split_pos_neg(const GroundingMatrix& v_n,
                                                          const GroundingMatrix& t_n);

/// Abductive pass: P_i = backprop(P_{i+1}) ∩ V_i and N_i = V_i \ P_i, so
/// rowwise P and N partition the tracks that can/cannot reach a true
/// terminal. Fills p[0..n] and n[0..n].
void backward_reason(const KnowledgeGraph& kg, const Rule& rule, VariableGroundings& g);

/// u = (1-β)·counts(P) − β·counts(N).
ScoreVector variable_representation(const GroundingMatrix& p, const GroundingMatrix& n, double beta);

/// All admissible branch candidates at one anchor. Candidates duplicating
/// the rule's own atoms at that anchor are excluded.
std::vector<BranchCandidate> enumerate_candidates(const KnowledgeGraph& kg, const Rule& rule,
                                                  int anchor, const RefineConfig& config,
                                                  const GroundingMatrix& v0,
                                                  const GroundingMatrix& v_anchor);

/// Sampled selection score: (1-β)·Σ|P∩c| − β·Σ|N∩c| over tracks, with c
/// the global vector (ENT/AUX) or the track-aligned row (QRY).
double score_branch(const GroundingMatrix& p, const GroundingMatrix& n, double beta,
                    const BranchCandidate& candidate);

/// One selected branch with its exact re-evaluation.
struct BranchTrial {
    BranchAtom branch;
    double sample_score = 0.0;
    RuleStats exact;
    bool kept = false;
};

struct RuleRefinement {
    std::size_t rule_index = 0;
    RuleStats base_stats;
    double beta = 0.0;
    bool skipped = false;
    std::string skip_reason;
    std::vector<BranchTrial> trials;
};

/// Full pipeline for one chain rule: sample, forward, backward, score, keep
/// the top-k branches per variable, re-score each resulting tree rule
/// exactly and drop those that do not strictly improve on the base sc.
std::vector<Rule> refine_rule(const KnowledgeGraph& kg, const Rule& rule,
                              const RefineConfig& config, RuleRefinement* report = nullptr);

/// Refines a batch of rules in parallel; output order is input order and
/// independent of the worker count.
std::vector<Rule> refine_rules(const KnowledgeGraph& kg, std::span<const Rule> rules,
                               const RefineConfig& config,
                               std::vector<RuleRefinement>* reports = nullptr);

}  // namespace treerule
