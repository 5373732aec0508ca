// treerule: mine, refine and evaluate chain-like and tree-like rules on
// knowledge graphs.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "treerule/evaluator.hpp"
#include "treerule/kg.hpp"
#include "treerule/linkpred.hpp"
#include "treerule/miner.hpp"
#include "treerule/refiner.hpp"
#include "treerule/rule.hpp"
#include "treerule/util.hpp"

namespace {

using namespace treerule;

std::string format6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string format2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::filesystem::path resolve_kg_dir(const std::string& given) {
    std::filesystem::path p(given);
    if (std::filesystem::is_directory(p)) return p;
    if (const char* root = std::getenv("TREERULE_DATA")) {
        std::filesystem::path alt = std::filesystem::path(root) / given;
        if (std::filesystem::is_directory(alt)) return alt;
    }
    throw std::runtime_error("knowledge graph directory not found: " + given +
                             " (also tried under $TREERULE_DATA)");
}

using ConfigKVs = std::vector<std::pair<std::string, std::string>>;

// Output files start with the effective config so runs are reproducible.
// The thread count is deliberately absent: results are independent of it.
void write_header(std::ostream& out, const std::string& command, const ConfigKVs& kvs) {
    out << "# treerule " << command << "\n";
    for (const auto& [k, v] : kvs) out << "# " << k << " = " << v << "\n";
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write output file: " + path.string());
    return out;
}

std::string branch_atom_text(const BranchAtom& b, std::size_t n, const KnowledgeGraph& kg) {
    auto var = [&](std::size_t i) -> std::string {
        if (i == 0) return "X";
        if (i == n) return n == 1 ? "Y" : "Z";
        return std::string(1, static_cast<char>('A' + i - 1));
    };
    const std::string anchor = var(b.anchor);
    switch (b.kind) {
        case BranchKind::Ent:
            return "is(" + kg.entities().label(b.entity) + "," + anchor + ")";
        case BranchKind::Qry: {
            const std::string& rel = kg.relations().label(b.relation);
            return b.subject_is_anchor ? rel + "(" + anchor + ",X)" : rel + "(X," + anchor + ")";
        }
        case BranchKind::Aux: {
            const std::string& rel = kg.relations().label(b.relation);
            return b.subject_is_anchor ? rel + "(" + anchor + ",M)" : rel + "(M," + anchor + ")";
        }
    }
    return "?";
}

struct CommonArgs {
    std::string kg_dir;
    std::uint64_t seed = 37;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--kg-dir", args.kg_dir,
                    "dataset directory with train.txt/valid.txt/test.txt "
                    "(bare names resolve under $TREERULE_DATA)")
        ->required();
    cmd->add_option("--seed", args.seed, "random seed");
    cmd->add_option("--threads", args.threads, "worker threads (0 = hardware)");
    cmd->fallthrough();
}

std::vector<Rule> load_rule_files(const std::vector<std::string>& paths, const KnowledgeGraph& kg) {
    std::vector<Rule> rules;
    for (const auto& p : paths) {
        LoadedRules loaded = import_external_rules(p, kg);
        if (loaded.skipped > 0)
            std::cerr << "warning: " << loaded.skipped << " rule(s) in " << p
                      << " referenced unknown labels and were skipped\n";
        for (auto& r : loaded.rules) rules.push_back(std::move(r));
    }
    return rules;
}

int cmd_mine(const CommonArgs& common, const MinerConfig& cfg_in, const std::string& out_path) {
    MinerConfig cfg = cfg_in;
    cfg.seed = common.seed;
    cfg.threads = common.threads;
    auto dir = resolve_kg_dir(common.kg_dir);
    KnowledgeGraph kg = KnowledgeGraph::load_split(dir);
    std::cerr << "loaded " << dir.string() << ": |E|=" << kg.entity_count()
              << " |R|=" << kg.relation_count() << " train=" << kg.train().size() << "\n";

    std::vector<Rule> rules = mine(kg, cfg);

    ConfigKVs kvs{{"kg_dir", dir.string()},
                  {"max_len", std::to_string(cfg.max_len)},
                  {"min_support", std::to_string(cfg.min_support)},
                  {"min_sc", format6(cfg.min_sc)},
                  {"max_rules_per_head", std::to_string(cfg.max_rules_per_head)},
                  {"sample_facts",
                   cfg.sample_facts ? std::to_string(*cfg.sample_facts) : std::string("all")},
                  {"seed", std::to_string(cfg.seed)}};
    auto out = open_output(out_path);
    write_header(out, "mine", kvs);
    for (const Rule& r : rules) out << serialize_rule(r, kg) << "\n";
    std::cout << "mined " << rules.size() << " chain rules -> " << out_path << "\n";
    return 0;
}

struct RefineArgs {
    std::vector<std::string> rules_in;
    std::string out_path;
    std::string report_path;
    std::string beta = "auto";
    std::string types = "aux,ent,qry";
    RefineConfig cfg;
};

int cmd_refine(const CommonArgs& common, RefineArgs& args) {
    RefineConfig& cfg = args.cfg;
    cfg.seed = common.seed;
    cfg.threads = common.threads;
    if (args.beta == "auto") {
        cfg.beta_mode = BetaMode::FromRuleSC;
    } else {
        cfg.beta_mode = BetaMode::Fixed;
        try {
            cfg.beta_fixed = std::stod(args.beta);
        } catch (const std::exception&) {
            throw std::runtime_error("--beta must be `auto` or a number strictly inside (0,1)");
        }
        if (cfg.beta_fixed <= 0.0 || cfg.beta_fixed >= 1.0)
            throw std::runtime_error("--beta must be `auto` or a number strictly inside (0,1)");
    }
    cfg.use_aux = cfg.use_ent = cfg.use_qry = false;
    for (auto part : split(args.types, ',')) {
        std::string t(trim(part));
        std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
        if (t == "aux") cfg.use_aux = true;
        else if (t == "ent") cfg.use_ent = true;
        else if (t == "qry") cfg.use_qry = true;
        else if (!t.empty()) throw std::runtime_error("unknown branch type in --types: " + t);
    }
    if (!cfg.use_aux && !cfg.use_ent && !cfg.use_qry)
        throw std::runtime_error("--types selected no branch kinds");

    auto dir = resolve_kg_dir(common.kg_dir);
    KnowledgeGraph kg = KnowledgeGraph::load_split(dir);
    std::vector<Rule> rules = load_rule_files(args.rules_in, kg);

    std::vector<RuleRefinement> reports;
    std::vector<Rule> trees = refine_rules(kg, rules, cfg, &reports);

    ConfigKVs kvs{{"kg_dir", dir.string()},
                  {"rules_in", args.rules_in.empty() ? "" : args.rules_in.front()},
                  {"batch", std::to_string(cfg.batch)},
                  {"top_k", std::to_string(cfg.top_k)},
                  {"beta", args.beta},
                  {"types", args.types},
                  {"min_support", std::to_string(cfg.min_support)},
                  {"max_candidates_per_kind", std::to_string(cfg.max_candidates_per_kind)},
                  {"seed", std::to_string(cfg.seed)}};

    auto out = open_output(args.out_path);
    write_header(out, "refine", kvs);
    for (const Rule& r : trees) out << serialize_rule(r, kg) << "\n";

    if (!args.report_path.empty()) {
        auto rep = open_output(args.report_path);
        write_header(rep, "refine report", kvs);
        rep << "rule\tbase_sc\tbeta\tbranch\tkind\tanchor\tsample_score\texact_sc\tsupport\t"
               "body_count\tkept\tnote\n";
        for (const auto& rr : reports) {
            const Rule& base = rules[rr.rule_index];
            const std::string sig = rule_signature(base, kg);
            const std::string base_sc =
                rr.base_stats.has_sc ? format6(rr.base_stats.sc) : std::string("-");
            if (rr.skipped) {
                rep << sig << "\t" << base_sc << "\t-\t-\t-\t-\t-\t-\t-\t-\tno\t" << rr.skip_reason
                    << "\n";
                continue;
            }
            for (const auto& t : rr.trials) {
                rep << sig << "\t" << base_sc << "\t" << format6(rr.beta) << "\t"
                    << branch_atom_text(t.branch, base.body.size(), kg) << "\t"
                    << branch_kind_name(t.branch.kind) << "\t" << int(t.branch.anchor) << "\t"
                    << format6(t.sample_score) << "\t"
                    << (t.exact.has_sc ? format6(t.exact.sc) : std::string("-")) << "\t"
                    << t.exact.support << "\t" << t.exact.body_count << "\t"
                    << (t.kept ? "yes" : "no") << "\t\n";
            }
        }
    }

    std::size_t skipped = 0;
    for (const auto& r : reports) skipped += r.skipped ? 1 : 0;
    std::cout << "refined " << rules.size() << " chain rules -> " << trees.size()
              << " tree rules (" << skipped << " skipped) -> " << args.out_path << "\n";
    return 0;
}

void print_sc_table(std::ostream& out, const ScReport& report) {
    auto line = [&](const char* name, const KindSummary& k) {
        out << name << "\t" << k.rules << "\t" << k.defined << "\t"
            << (k.present() ? format2(100.0 * k.mean_sc) : std::string("-")) << "\n";
    };
    out << "kind\trules\tdefined\tavg_sc\n";
    line("CHAIN", report.chain);
    line("TREE(AUX)", report.aux);
    line("TREE(ENT)", report.ent);
    line("TREE(QRY)", report.qry);
    line("TREE", report.tree);
}

int cmd_eval_sc(const CommonArgs& common, const std::vector<std::string>& rule_files,
                const std::string& report_path) {
    auto dir = resolve_kg_dir(common.kg_dir);
    KnowledgeGraph kg = KnowledgeGraph::load_split(dir);
    std::vector<Rule> rules = load_rule_files(rule_files, kg);
    ScReport report = avg_sc(kg, rules, common.threads);

    ConfigKVs kvs{{"kg_dir", dir.string()},
                  {"rules_in", rule_files.empty() ? "" : rule_files.front()},
                  {"seed", std::to_string(common.seed)}};
    if (!report_path.empty()) {
        auto out = open_output(report_path);
        write_header(out, "eval-sc", kvs);
        print_sc_table(out, report);
        out << "\nrule\tsupport\tbody_count\tsc\n";
        for (std::size_t i = 0; i < rules.size(); ++i) {
            const RuleStats& s = report.per_rule[i];
            out << rule_signature(rules[i], kg) << "\t" << s.support << "\t" << s.body_count
                << "\t" << (s.has_sc ? format6(s.sc) : std::string("-")) << "\n";
        }
    }
    std::cout << "average Standard Confidence over " << rules.size() << " rule(s) (percent):\n";
    print_sc_table(std::cout, report);
    return 0;
}

int cmd_eval_lp(const CommonArgs& common, const std::vector<std::string>& rule_files,
                const std::string& mode, const std::string& report_path,
                const std::string& explain_path, bool unfiltered) {
    auto dir = resolve_kg_dir(common.kg_dir);
    KnowledgeGraph kg = KnowledgeGraph::load_split(dir);
    std::vector<Rule> all_rules = load_rule_files(rule_files, kg);

    std::vector<Rule> rules;
    for (auto& r : all_rules) {
        if (mode == "chain" && r.is_tree()) continue;
        if (mode == "tree" && !r.is_tree()) continue;
        rules.push_back(std::move(r));
    }

    RuleIndex index(kg, rules, common.threads);
    EvalOptions options;
    options.filtered = !unfiltered;
    options.threads = common.threads;
    std::vector<std::string> explanations;
    EvalReport report =
        evaluate(kg, index, options, explain_path.empty() ? nullptr : &explanations);

    auto table = [&](std::ostream& out) {
        out << "slice\tqueries\tcoverage\tmrr\thits@1\thits@3\thits@10\n";
        auto line = [&](const char* name, const MetricSlice& s) {
            out << name << "\t" << s.query_count << "\t" << format2(s.coverage) << "\t"
                << format2(s.mrr) << "\t" << format2(s.hits1) << "\t" << format2(s.hits3) << "\t"
                << format2(s.hits10) << "\n";
        };
        line("all", report.all);
        line("tail", report.tail);
        line("head", report.head);
    };

    ConfigKVs kvs{{"kg_dir", dir.string()},
                  {"rules_in", rule_files.empty() ? "" : rule_files.front()},
                  {"mode", mode},
                  {"protocol", options.filtered ? "filtered" : "raw"},
                  {"rule_count", std::to_string(rules.size())},
                  {"seed", std::to_string(common.seed)}};
    if (!report_path.empty()) {
        auto out = open_output(report_path);
        write_header(out, "eval-lp", kvs);
        table(out);
    }
    if (!explain_path.empty()) {
        auto out = open_output(explain_path);
        write_header(out, "eval-lp explanations", kvs);
        for (const auto& line : explanations) out << line << "\n";
    }
    std::cout << "link prediction (" << (options.filtered ? "filtered" : "raw") << ", mode="
              << mode << ", " << rules.size() << " rules):\n";
    table(std::cout);
    return 0;
}

int cmd_stats(const CommonArgs& common, const std::string& report_path) {
    auto dir = resolve_kg_dir(common.kg_dir);
    KnowledgeGraph kg = KnowledgeGraph::load_split(dir);
    const double density = edge_density(kg);

    char dens[64];
    std::snprintf(dens, sizeof(dens), "%.6e", density);
    std::string name = dir.filename().string();
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return std::tolower(c); });

    auto emit = [&](std::ostream& out) {
        out << "entities\t" << kg.entity_count() << "\n";
        out << "relations\t" << kg.relation_count() << "\n";
        out << "train_triples\t" << kg.train().size() << "\n";
        out << "valid_triples\t" << kg.valid().size() << "\n";
        out << "test_triples\t" << kg.test().size() << "\n";
        out << "edge_density\t" << dens << "\n";
        out << "# formula: distinct unordered connected entity pairs in train / (|E| choose 2); "
               "self-loops ignored\n";
        out << "# note: published density figures for these benchmarks vary because the "
               "formula is rarely stated (directed vs undirected pairs, triples vs distinct "
               "pairs); no single definition reproduces all commonly cited values, so the "
               "formula above is fixed and echoed here\n";
        if (name.find("umls") != std::string::npos)
            out << "# commonly cited UMLS edge density for comparison: 2.20e-01\n";
    };

    ConfigKVs kvs{{"kg_dir", dir.string()}};
    if (!report_path.empty()) {
        auto out = open_output(report_path);
        write_header(out, "stats", kvs);
        emit(out);
    }
    emit(std::cout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chain-to-tree rule mining, refinement and evaluation on knowledge graphs"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "config file with [subcommand] sections of key=value lines; flags override it");

    CommonArgs mine_common;
    MinerConfig miner_cfg;
    std::string mine_out;
    std::size_t mine_sample_facts = 0;
    auto* mine_cmd = app.add_subcommand("mine", "mine chain rules by bidirectional BFS");
    add_common(mine_cmd, mine_common);
    mine_cmd->add_option("--out", mine_out, "output rule file")->required();
    mine_cmd->add_option("--max-len", miner_cfg.max_len, "maximum chain length (1..3)");
    mine_cmd->add_option("--min-support", miner_cfg.min_support, "minimum support");
    mine_cmd->add_option("--min-sc", miner_cfg.min_sc, "minimum standard confidence");
    mine_cmd->add_option("--max-rules-per-head", miner_cfg.max_rules_per_head,
                         "cap per head relation (0 = unlimited)");
    mine_cmd->add_option("--sample-facts", mine_sample_facts,
                         "seed facts sampled per head relation (0 = exhaustive)");

    CommonArgs refine_common;
    RefineArgs refine_args;
    auto* refine_cmd = app.add_subcommand("refine", "refine chain rules into tree rules");
    add_common(refine_cmd, refine_common);
    refine_cmd->add_option("--rules", refine_args.rules_in, "input chain rule file(s)")->required();
    refine_cmd->add_option("--out", refine_args.out_path, "output tree rule file")->required();
    refine_cmd->add_option("--report", refine_args.report_path, "sidecar TSV report");
    refine_cmd->add_option("--batch", refine_args.cfg.batch, "sampled query groundings per rule");
    refine_cmd->add_option("--topk", refine_args.cfg.top_k, "branch candidates kept per variable");
    refine_cmd->add_option("--beta", refine_args.beta, "`auto` (rule sc) or fixed value in (0,1)");
    refine_cmd->add_option("--types", refine_args.types, "comma list of aux,ent,qry");
    refine_cmd->add_option("--min-support", refine_args.cfg.min_support,
                           "minimum support of emitted tree rules");
    refine_cmd->add_option("--max-candidates", refine_args.cfg.max_candidates_per_kind,
                           "cap candidates per kind (0 = uncapped)");

    CommonArgs evalsc_common;
    std::vector<std::string> evalsc_rules;
    std::string evalsc_report;
    auto* evalsc_cmd = app.add_subcommand("eval-sc", "average Standard Confidence of a rule set");
    add_common(evalsc_cmd, evalsc_common);
    evalsc_cmd->add_option("--rules", evalsc_rules, "rule file(s)")->required();
    evalsc_cmd->add_option("--report", evalsc_report, "TSV report path");

    CommonArgs evallp_common;
    std::vector<std::string> evallp_rules;
    std::string evallp_mode = "union";
    std::string evallp_report, evallp_explain;
    bool evallp_unfiltered = false;
    auto* evallp_cmd = app.add_subcommand("eval-lp", "filtered link prediction on the test split");
    add_common(evallp_cmd, evallp_common);
    evallp_cmd->add_option("--rules", evallp_rules, "rule file(s)")->required();
    evallp_cmd->add_option("--mode", evallp_mode, "chain | tree | union")
        ->check(CLI::IsMember({"chain", "tree", "union"}));
    evallp_cmd->add_option("--report", evallp_report, "TSV report path");
    evallp_cmd->add_option("--explain", evallp_explain, "per-query top-10 explanation dump");
    evallp_cmd->add_flag("--unfiltered", evallp_unfiltered,
                         "rank without removing known true candidates (sanity mode)");

    CommonArgs stats_common;
    std::string stats_report;
    auto* stats_cmd = app.add_subcommand("stats", "graph statistics (edge density)");
    add_common(stats_cmd, stats_common);
    stats_cmd->add_option("--report", stats_report, "TSV report path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (mine_cmd->parsed()) {
            if (mine_sample_facts > 0) miner_cfg.sample_facts = mine_sample_facts;
            return cmd_mine(mine_common, miner_cfg, mine_out);
        }
        if (refine_cmd->parsed()) return cmd_refine(refine_common, refine_args);
        if (evalsc_cmd->parsed()) return cmd_eval_sc(evalsc_common, evalsc_rules, evalsc_report);
        if (evallp_cmd->parsed())
            return cmd_eval_lp(evallp_common, evallp_rules, evallp_mode, evallp_report,
                               evallp_explain, evallp_unfiltered);
        if (stats_cmd->parsed()) return cmd_stats(stats_common, stats_report);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
