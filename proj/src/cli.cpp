#include "glassbox/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include "glassbox/checkpoint.hpp"
#include "glassbox/corpus.hpp"
#include "glassbox/error.hpp"
#include "glassbox/interpret.hpp"
#include "glassbox/metrics.hpp"
#include "glassbox/synthetic.hpp"
#include "glassbox/unwrapper.hpp"

namespace glassbox {

namespace fs = std::filesystem;
using nlohmann::json;

json run_config_to_json(const RunConfig& c) {
  return {
      {"paths",
       {{"corpus", c.corpus.string()},
        {"test_corpus", c.test_corpus.string()},
        {"format", c.format},
        {"output_dir", c.output_dir.string()},
        {"checkpoint", c.checkpoint.string()},
        {"merged", c.merged.string()}}},
      {"data",
       {{"min_freq", c.min_freq},
        {"test_fraction", c.test_fraction},
        {"validation_fraction", c.validation_fraction},
        {"split_seed", c.split_seed}}},
      {"model",
       {{"embed_dim", c.model.embed_dim},
        {"filters_per_size", c.model.filters_per_size},
        {"hidden_units", c.model.hidden_units},
        {"max_len", c.model.max_len},
        {"seed", c.model.seed}}},
      {"train",
       {{"learning_rate", c.train.learning_rate},
        {"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"lambda", c.train.lambda},
        {"l1_placement", to_string(c.train.l1_placement)},
        {"seed", c.train.seed}}},
      {"merge",
       {{"distance_threshold", c.merge.distance_threshold},
        {"min_region_size", c.merge.min_region_size},
        {"neighbor_k", c.merge.neighbor_k},
        {"refit_iterations", c.merge.refit_iterations},
        {"threshold_grid_size", c.merge.threshold_grid_size},
        {"selection_tolerance", c.merge.selection_tolerance}}},
      {"sweep",
       {{"nf_values", c.sweep_nf},
        {"nh_values", c.sweep_nh},
        {"lambda_values", c.sweep_lambdas},
        {"max_regions", c.max_regions}}},
      {"report",
       {{"top_k_filters", c.top_k_filters},
        {"top_k_samples", c.top_k_samples},
        {"dataset", c.report_dataset},
        {"source", c.report_source}}},
      {"eval", {{"dataset", c.eval_dataset}, {"model", c.eval_model}}},
  };
}

namespace {

void reject_unknown(const json& defaults, const json& given, const std::string& prefix) {
  if (!given.is_object()) throw UsageError("config section '" + prefix + "' must be an object");
  for (const auto& [key, value] : given.items()) {
    const std::string name = prefix.empty() ? key : prefix + "." + key;
    if (!defaults.contains(key)) throw UsageError("unknown config key '" + name + "'");
    if (defaults[key].is_object()) reject_unknown(defaults[key], value, name);
  }
}

void check_choice(const std::string& value, std::initializer_list<const char*> allowed,
                  const char* key) {
  for (const char* a : allowed) {
    if (value == a) return;
  }
  throw UsageError(std::string("invalid value '") + value + "' for " + key);
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  const RunConfig defaults;
  json merged = run_config_to_json(defaults);
  reject_unknown(merged, j, "");
  merged.merge_patch(j);
  RunConfig c;
  try {
    const auto& p = merged["paths"];
    c.corpus = p["corpus"].get<std::string>();
    c.test_corpus = p["test_corpus"].get<std::string>();
    c.format = p["format"].get<std::string>();
    c.output_dir = p["output_dir"].get<std::string>();
    c.checkpoint = p["checkpoint"].get<std::string>();
    c.merged = p["merged"].get<std::string>();
    if (c.checkpoint.empty()) c.checkpoint = c.output_dir / "model.json";
    if (c.merged.empty()) c.merged = c.output_dir / "merged.json";

    const auto& d = merged["data"];
    c.min_freq = d["min_freq"].get<int>();
    c.test_fraction = d["test_fraction"].get<double>();
    c.validation_fraction = d["validation_fraction"].get<double>();
    c.split_seed = d["split_seed"].get<std::uint64_t>();

    const auto& m = merged["model"];
    c.model.embed_dim = m["embed_dim"].get<std::size_t>();
    c.model.filters_per_size = m["filters_per_size"].get<std::size_t>();
    c.model.hidden_units = m["hidden_units"].get<std::size_t>();
    c.model.max_len = m["max_len"].get<std::size_t>();
    c.model.seed = m["seed"].get<std::uint64_t>();

    const auto& t = merged["train"];
    c.train.learning_rate = t["learning_rate"].get<double>();
    c.train.epochs = t["epochs"].get<std::size_t>();
    c.train.batch_size = t["batch_size"].get<std::size_t>();
    c.train.lambda = t["lambda"].get<double>();
    c.train.l1_placement = l1_placement_from_string(t["l1_placement"].get<std::string>());
    c.train.seed = t["seed"].get<std::uint64_t>();

    const auto& g = merged["merge"];
    c.merge.distance_threshold = g["distance_threshold"].get<double>();
    c.merge.min_region_size = g["min_region_size"].get<std::size_t>();
    c.merge.neighbor_k = g["neighbor_k"].get<std::size_t>();
    c.merge.refit_iterations = g["refit_iterations"].get<std::size_t>();
    c.merge.threshold_grid_size = g["threshold_grid_size"].get<std::size_t>();
    c.merge.selection_tolerance = g["selection_tolerance"].get<double>();

    const auto& s = merged["sweep"];
    c.sweep_nf = s["nf_values"].get<std::vector<std::size_t>>();
    c.sweep_nh = s["nh_values"].get<std::vector<std::size_t>>();
    c.sweep_lambdas = s["lambda_values"].get<std::vector<double>>();
    c.max_regions = s["max_regions"].get<std::size_t>();

    const auto& r = merged["report"];
    c.top_k_filters = r["top_k_filters"].get<std::size_t>();
    c.top_k_samples = r["top_k_samples"].get<std::size_t>();
    c.report_dataset = r["dataset"].get<std::string>();
    c.report_source = r["source"].get<std::string>();

    const auto& e = merged["eval"];
    c.eval_dataset = e["dataset"].get<std::string>();
    c.eval_model = e["model"].get<std::string>();
  } catch (const json::exception& ex) {
    throw UsageError(std::string("invalid config value: ") + ex.what());
  }
  check_choice(c.format, {"auto", "csv", "jsonl"}, "paths.format");
  check_choice(c.report_dataset, {"train", "validation", "test"}, "report.dataset");
  check_choice(c.report_source, {"auto", "network", "merged"}, "report.source");
  check_choice(c.eval_dataset, {"train", "validation", "test"}, "eval.dataset");
  check_choice(c.eval_model, {"network", "merged"}, "eval.model");
  c.model.validate();
  c.train.validate();
  c.merge.validate();
  if (c.min_freq < 1) throw UsageError("data.min_freq must be >= 1");
  if (c.top_k_filters < 1 || c.top_k_samples < 1) throw UsageError("report top_k values must be >= 1");
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw UsageError("--set expects key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw UsageError("malformed --set key '" + key + "'");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

namespace {

constexpr const char* kUsage =
    "usage: glassbox <command> --config <path> [--set key=value]... [--seed N]\n"
    "commands:\n"
    "  train             train the CNN, write checkpoint and history CSV\n"
    "  sweep-complexity  grid over filters per size x hidden units\n"
    "  sweep-lambda      grid over L1 strength\n"
    "  unwrap            region table of the trained classifier\n"
    "  merge             merge regions and refit, write merged model and report\n"
    "  explain           interpretation report (Markdown, JSON, histograms)\n"
    "  eval              accuracy, AUC and F1 on a dataset\n"
    "  synth             write a synthetic sentiment corpus: synth --out <file.csv|.jsonl>\n"
    "                    [--documents N] [--seed N]\n";

struct Data {
  Vocabulary vocab;
  Dataset train;
  Dataset validation;
  Dataset test;

  const Dataset& named(const std::string& name) const {
    if (name == "train") return train;
    if (name == "validation") return validation;
    return test;
  }
};

CorpusFormat resolve_format(const RunConfig& cfg, const fs::path& path) {
  if (cfg.format == "csv") return CorpusFormat::kCsv;
  if (cfg.format == "jsonl") return CorpusFormat::kJsonl;
  return format_from_path(path);
}

std::vector<LabeledText> read_corpus(const RunConfig& cfg, const fs::path& path) {
  if (path.empty()) throw UsageError("paths.corpus is not set");
  if (!fs::exists(path)) throw DataError("corpus file not found: " + path.string());
  return read_labeled_text(path, resolve_format(cfg, path));
}

// Splits are a pure function of the corpus and split_seed, so every command
// sees the same partition. The vocabulary, when built here, only sees the
// training part.
Data load_data(const RunConfig& cfg, const Vocabulary* vocab, std::size_t max_len) {
  auto records = read_corpus(cfg, cfg.corpus);
  std::vector<LabeledText> trainval;
  std::vector<LabeledText> test;
  if (!cfg.test_corpus.empty()) {
    trainval = std::move(records);
    test = read_corpus(cfg, cfg.test_corpus);
  } else {
    const auto [a, b] = split_indices(records.size(), 1.0 - cfg.test_fraction, cfg.split_seed);
    for (const auto i : a) trainval.push_back(records[i]);
    for (const auto i : b) test.push_back(records[i]);
  }
  const auto [ta, va] = split_indices(trainval.size(), 1.0 - cfg.validation_fraction, cfg.split_seed + 1);
  std::vector<LabeledText> train;
  std::vector<LabeledText> val;
  for (const auto i : ta) train.push_back(trainval[i]);
  for (const auto i : va) val.push_back(trainval[i]);

  Data d;
  if (vocab != nullptr) {
    d.vocab = *vocab;
  } else {
    std::vector<std::vector<std::string>> tokens;
    for (const auto& r : train) tokens.push_back(tokenize(r.text));
    d.vocab = build_vocabulary(tokens, cfg.min_freq);
  }
  d.train = make_dataset(train, d.vocab, max_len);
  d.validation = make_dataset(val, d.vocab, max_len);
  d.test = make_dataset(test, d.vocab, max_len);
  return d;
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

SplitData split_data(Data d) {
  SplitData s;
  s.vocab_size = d.vocab.size();
  s.train = std::move(d.train);
  s.validation = std::move(d.validation);
  s.test = std::move(d.test);
  return s;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const Data data = load_data(cfg, nullptr, cfg.model.max_len);
  out << "train=" << data.train.size() << " validation=" << data.validation.size()
      << " test=" << data.test.size() << " vocab=" << data.vocab.size() << '\n';
  const auto fitted = fit(init_model(cfg.model, data.vocab.size()), data.train, data.validation, cfg.train);
  save_checkpoint(cfg.checkpoint, fitted.model, data.vocab);
  write_file(cfg.output_dir / "history.csv", history_to_csv(fitted.history));
  const auto scores = scores_of(forward_all(fitted.model, data.test));
  const auto labels = data.test.labels();
  const auto& best = fitted.history.epochs[fitted.history.best_epoch];
  out << "best_epoch=" << best.epoch << " val_accuracy=" << fixed(best.val_accuracy)
      << " test_accuracy=" << fixed(accuracy(scores, labels)) << '\n';
  out << "wrote " << cfg.checkpoint.string() << '\n';
  return 0;
}

int cmd_sweep_complexity(const RunConfig& cfg, std::ostream& out) {
  const auto data = split_data(load_data(cfg, nullptr, cfg.model.max_len));
  const auto result = sweep_complexity(cfg.sweep_nf, cfg.sweep_nh, cfg.model, cfg.train, data);
  const auto path = cfg.output_dir / "sweep_complexity.csv";
  write_file(path, sweep_to_csv(result));
  out << "cells=" << result.cells.size() << "\nwrote " << path.string() << '\n';
  return 0;
}

int cmd_sweep_lambda(const RunConfig& cfg, std::ostream& out) {
  const auto data = split_data(load_data(cfg, nullptr, cfg.model.max_len));
  const auto result =
      sweep_lambda(cfg.sweep_lambdas, cfg.train.l1_placement, cfg.model, cfg.train, data);
  const auto path = cfg.output_dir / "sweep_lambda.csv";
  write_file(path, sweep_to_csv(result));
  out << "cells=" << result.cells.size()
      << " selected_lambda=" << format_real(select_lambda(result, cfg.max_regions)) << '\n'
      << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_unwrap(const RunConfig& cfg, std::ostream& out) {
  const auto cp = load_checkpoint(cfg.checkpoint);
  const Data data = load_data(cfg, &cp.vocab, cp.model.config.max_len);
  const auto& ds = data.named(cfg.report_dataset);
  const auto fwd = forward_all(cp.model, ds);
  const auto labels = ds.labels();
  const auto regions = enumerate_regions(cp.model, fwd);
  std::vector<RegionStats> stats;
  for (const auto& r : regions) stats.push_back(region_stats(r, fwd, labels));
  const auto path = cfg.output_dir / "regions.csv";
  write_file(path, region_table_csv(stats));
  out << "dataset=" << cfg.report_dataset << " documents=" << ds.size()
      << " regions=" << regions.size() << " effective_regions=" << effective_region_count(regions)
      << '\n'
      << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_merge(const RunConfig& cfg, std::ostream& out) {
  const auto cp = load_checkpoint(cfg.checkpoint);
  const Data data = load_data(cfg, &cp.vocab, cp.model.config.max_len);
  const auto sel = merge_with_validation(cp.model, data.train, data.validation, cfg.merge);
  save_merged(cfg.merged, sel.merged);
  const auto path = cfg.output_dir / "merge_report.csv";
  write_file(path, merge_report_csv(sel.merged));
  std::ostringstream grid;
  grid << "distance_threshold,val_accuracy\n";
  for (const auto& [t, acc] : sel.grid) grid << format_real(t) << ',' << format_real(acc) << '\n';
  write_file(cfg.output_dir / "merge_grid.csv", grid.str());
  out << "threshold=" << format_real(sel.merged.distance_threshold)
      << " merged_regions=" << sel.merged.regions.size()
      << " unmerged_val_accuracy=" << fixed(sel.unmerged_val_accuracy) << '\n'
      << "wrote " << cfg.merged.string() << '\n';
  return 0;
}

bool use_merged(const RunConfig& cfg, const std::string& choice) {
  if (choice == "merged") return true;
  if (choice == "network") return false;
  return fs::exists(cfg.merged);
}

int cmd_explain(const RunConfig& cfg, std::ostream& out) {
  const auto cp = load_checkpoint(cfg.checkpoint);
  const Data data = load_data(cfg, &cp.vocab, cp.model.config.max_len);
  const auto& ds = data.named(cfg.report_dataset);
  const auto fwd = forward_all(cp.model, ds);
  const bool merged = use_merged(cfg, cfg.report_source);
  const auto regions = merged ? report_regions(load_merged(cfg.merged), fwd)
                              : report_regions(enumerate_regions(cp.model, fwd));
  const auto report = build_report(cp.model, regions, ds, fwd, cfg.top_k_filters, cfg.top_k_samples);
  write_file(cfg.output_dir / "report.md", report_to_markdown(report));
  write_file(cfg.output_dir / "report.json", report_to_json(report).dump(2) + "\n");
  for (const auto& r : report.regions) {
    write_file(cfg.output_dir / ("histogram_region_" + std::to_string(r.region_id) + ".csv"),
               histogram_csv(r));
  }
  out << "source=" << (merged ? "merged" : "network") << " report_regions=" << report.regions.size()
      << '\n'
      << "wrote " << (cfg.output_dir / "report.md").string() << '\n';
  return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  const auto cp = load_checkpoint(cfg.checkpoint);
  const Data data = load_data(cfg, &cp.vocab, cp.model.config.max_len);
  const auto& ds = data.named(cfg.eval_dataset);
  const auto fwd = forward_all(cp.model, ds);
  std::vector<double> scores;
  if (cfg.eval_model == "merged") {
    const auto merged = load_merged(cfg.merged);
    for (const auto& fr : fwd) scores.push_back(merged.predict(fr));
  } else {
    scores = scores_of(fwd);
  }
  const auto labels = ds.labels();
  const auto a = auc(scores, labels);
  out << "dataset=" << cfg.eval_dataset << " model=" << cfg.eval_model << " n=" << ds.size()
      << " accuracy=" << fixed(accuracy(scores, labels)) << " auc=" << (a ? fixed(*a) : "N/A")
      << " f1=" << fixed(f1(scores, labels)) << '\n';
  return 0;
}

int cmd_synth(const std::vector<std::string>& args, std::ostream& out) {
  SyntheticCorpusConfig sc;
  fs::path path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    auto next = [&]() -> const std::string& {
      if (i + 1 >= args.size()) throw UsageError(args[i] + " needs a value");
      return args[++i];
    };
    try {
      if (args[i] == "--out") {
        path = next();
      } else if (args[i] == "--documents") {
        sc.documents = std::stoull(next());
      } else if (args[i] == "--seed") {
        sc.seed = std::stoull(next());
      } else {
        throw UsageError("unknown option " + args[i]);
      }
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const UsageError*>(&e) == nullptr) throw UsageError("bad number for " + args[i]);
      throw;
    }
  }
  if (path.empty()) throw UsageError("synth needs --out");
  const auto format = format_from_path(path);
  std::ostringstream os;
  const auto records = synthetic_sentiment_corpus(sc);
  if (format == CorpusFormat::kCsv) {
    os << "text,label\n";
    for (const auto& r : records) {
      std::string quoted = "\"";
      for (const char c : r.text) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
      os << quoted << "\"," << r.label << '\n';
    }
  } else {
    for (const auto& r : records) os << json{{"text", r.text}, {"label", r.label}}.dump() << '\n';
  }
  write_file(path, os.str());
  out << "documents=" << records.size() << "\nwrote " << path.string() << '\n';
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.empty()) throw UsageError("missing command");
    const std::string& command = args[0];
    if (command == "synth") return cmd_synth(args, out);

    fs::path config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    for (std::size_t i = 1; i < args.size(); ++i) {
      auto next = [&]() -> const std::string& {
        if (i + 1 >= args.size()) throw UsageError(args[i] + " needs a value");
        return args[++i];
      };
      if (args[i] == "--config") {
        config_path = next();
      } else if (args[i] == "--set") {
        overrides.push_back(next());
      } else if (args[i] == "--seed") {
        const auto& v = next();
        try {
          seed = std::stoull(v);
        } catch (const std::logic_error&) {
          throw UsageError("--seed expects a nonnegative integer, got '" + v + "'");
        }
      } else {
        throw UsageError("unknown argument '" + args[i] + "'");
      }
    }
    static const std::vector<std::string> known = {"train", "sweep-complexity", "sweep-lambda",
                                                   "unwrap", "merge", "explain", "eval"};
    if (std::find(known.begin(), known.end(), command) == known.end()) {
      throw UsageError("unknown command '" + command + "'");
    }
    if (config_path.empty()) throw UsageError("--config is required");
    if (!fs::exists(config_path)) throw DataError("config file not found: " + config_path.string());

    json j;
    try {
      j = json::parse(read_file(config_path));
    } catch (const json::exception& e) {
      throw DataError("config " + config_path.string() + " is not valid JSON: " + e.what());
    }
    for (const auto& o : overrides) apply_override(j, o);
    if (seed) {
      apply_override(j, "model.seed=" + std::to_string(*seed));
      apply_override(j, "train.seed=" + std::to_string(*seed));
    }
    const RunConfig cfg = run_config_from_json(j);

    if (command == "train") return cmd_train(cfg, out);
    if (command == "sweep-complexity") return cmd_sweep_complexity(cfg, out);
    if (command == "sweep-lambda") return cmd_sweep_lambda(cfg, out);
    if (command == "unwrap") return cmd_unwrap(cfg, out);
    if (command == "merge") return cmd_merge(cfg, out);
    if (command == "explain") return cmd_explain(cfg, out);
    return cmd_eval(cfg, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n' << kUsage;
    return 1;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace glassbox
