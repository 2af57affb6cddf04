#include "sclm/app.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "sclm/errors.hpp"

namespace sclm::app {

using corpus::RawTrace;
using corpus::TraceLabel;

namespace {

constexpr std::string_view kVersion = "1.0.0";

std::string join_paths(const std::vector<fs::path>& paths) {
  std::string out;
  for (const auto& p : paths) out += (out.empty() ? "" : ",") + p.string();
  return out;
}

io::KeyValues manifest_for(std::string_view command) {
  return {{"tool", "sclm " + std::string(kVersion)}, {"command", std::string(command)}};
}

void append_flat(std::vector<RawTrace>& out, const std::vector<fs::path>& files, TraceLabel label) {
  for (const auto& f : files) {
    auto traces = corpus::load_flat_file(f, label);
    out.insert(out.end(), std::make_move_iterator(traces.begin()), std::make_move_iterator(traces.end()));
  }
}

std::vector<double> scores_with_label(const std::vector<io::ScoreRow>& rows, TraceLabel label) {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.label == label) out.push_back(r.score);
  }
  return out;
}

detect::ScoreKind table_kind(const fs::path& table) {
  const auto manifest = manifest_path(table);
  if (!fs::exists(manifest)) return detect::ScoreKind::kNll;
  const auto kind = io::lookup(io::read_key_values(manifest), "score_kind");
  return kind.empty() ? detect::ScoreKind::kNll : detect::parse_score_kind(kind);
}

std::string format_float(float v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_calls(const fs::path& file, const RawTrace& trace) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + file.string());
  for (std::size_t i = 0; i < trace.calls.size(); ++i) out << (i ? " " : "") << trace.calls[i];
  out << '\n';
}

std::string numbered(std::string_view prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04zu", n);
  return std::string(prefix) + buf + ".txt";
}

}  // namespace

fs::path manifest_path(const fs::path& output) { return fs::path(output.string() + ".manifest"); }

// DataOptions ---------------------------------------------------------------

std::vector<RawTrace> DataOptions::load() const {
  std::vector<RawTrace> traces;
  if (adfa_dir) traces = corpus::load_adfa_dir(*adfa_dir);
  append_flat(traces, train_flat, TraceLabel::kNormalTrain);
  append_flat(traces, validation_flat, TraceLabel::kNormalValidation);
  append_flat(traces, attack_flat, TraceLabel::kAttack);
  append_flat(traces, unlabeled_flat, TraceLabel::kUnlabeled);
  if (!normal_flat.empty()) {
    std::vector<RawTrace> normals;
    append_flat(normals, normal_flat, TraceLabel::kNormalTrain);
    auto [train, validation] = corpus::split_normal(std::move(normals), split_train, split_validation, split_seed);
    for (auto* part : {&train, &validation}) {
      traces.insert(traces.end(), std::make_move_iterator(part->begin()), std::make_move_iterator(part->end()));
    }
  }
  return traces;
}

void DataOptions::describe(io::KeyValues& m) const {
  if (adfa_dir) m.emplace_back("data.adfa_dir", adfa_dir->string());
  if (!train_flat.empty()) m.emplace_back("data.train_flat", join_paths(train_flat));
  if (!validation_flat.empty()) m.emplace_back("data.validation_flat", join_paths(validation_flat));
  if (!attack_flat.empty()) m.emplace_back("data.attack_flat", join_paths(attack_flat));
  if (!unlabeled_flat.empty()) m.emplace_back("data.unlabeled_flat", join_paths(unlabeled_flat));
  if (!normal_flat.empty()) {
    m.emplace_back("data.normal_flat", join_paths(normal_flat));
    m.emplace_back("data.split", std::to_string(split_train) + ":" + std::to_string(split_validation));
    m.emplace_back("data.split_seed", std::to_string(split_seed));
  }
}

// train -----------------------------------------------------------------------

TrainResult cmd_train(const TrainOptions& options, std::ostream& log) {
  options.config.validate();
  const auto traces = options.data.load();
  const auto train_raw = corpus::select(traces, TraceLabel::kNormalTrain);
  const auto val_raw = corpus::select(traces, TraceLabel::kNormalValidation);
  if (train_raw.empty()) throw ConfigError("no normal-train traces in the given data");

  const auto vocab = corpus::build_vocab(train_raw);
  const auto train_set = corpus::encode_all(train_raw, vocab);
  const auto val_set = corpus::encode_all(val_raw, vocab);
  log << "train: " << train_raw.size() << " training / " << val_raw.size() << " validation traces, "
      << vocab.real_size() << " distinct calls, validation OOV rate " << val_set.oov_rate() << '\n';
  log << "config: " << lm::format_config(options.config) << '\n';

  TrainResult result;
  result.validation_oov_rate = val_set.oov_rate();
  result.model = lm::train(vocab, train_set.traces, val_set.traces, options.config, [&](const lm::EpochRecord& r) {
    log << "epoch " << r.epoch << " train_nll " << r.train_loss << " validation_nll " << r.validation_nll << '\n';
  });

  lm::save_model(result.model, options.model_out);
  const fs::path log_path = options.log_out.value_or(fs::path(options.model_out.string() + ".log.tsv"));
  {
    std::ofstream out(log_path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + log_path.string());
    out << "# " << lm::format_config(options.config) << '\n';
    out << "epoch\ttrain_nll\tvalidation_nll\n";
    for (const auto& r : result.model.training_log) {
      out << r.epoch << '\t' << io::format_double(r.train_loss) << '\t' << io::format_double(r.validation_nll) << '\n';
    }
  }

  auto manifest = manifest_for("train");
  options.data.describe(manifest);
  manifest.emplace_back("config", lm::format_config(options.config));
  manifest.emplace_back("model_out", options.model_out.string());
  manifest.emplace_back("log_out", log_path.string());
  manifest.emplace_back("n_train", std::to_string(train_raw.size()));
  manifest.emplace_back("n_validation", std::to_string(val_raw.size()));
  manifest.emplace_back("vocab_calls", std::to_string(vocab.real_size()));
  manifest.emplace_back("validation_oov_rate", io::format_double(val_set.oov_rate()));
  manifest.emplace_back("epochs_run", std::to_string(result.model.training_log.size()));
  io::write_key_values(manifest_path(options.model_out), manifest);
  return result;
}

// score -----------------------------------------------------------------------

ScoreResult cmd_score(const ScoreOptions& options, std::ostream& log) {
  const auto model = lm::load_model(options.model);
  const auto traces = options.data.load();
  if (traces.empty()) log << "warning: no traces found; writing an empty score table\n";
  const auto encoded = corpus::encode_all(traces, model.vocab);
  const auto scores = lm::score_traces(model, encoded.traces, options.batch_size);

  ScoreResult result;
  result.oov_rate = encoded.oov_rate();
  for (std::size_t i = 0; i < traces.size(); ++i) {
    result.rows.push_back({traces[i].source, traces[i].label, scores[i].f});
  }
  io::write_score_table(options.out, result.rows);
  log << "score: " << traces.size() << " traces, OOV rate " << result.oov_rate << " (" << encoded.oov_calls << " of "
      << encoded.total_calls << " calls mapped to UNK)\n";

  auto manifest = manifest_for("score");
  manifest.emplace_back("model", options.model.string());
  options.data.describe(manifest);
  manifest.emplace_back("out", options.out.string());
  manifest.emplace_back("score_kind", "nll");
  manifest.emplace_back("n_traces", std::to_string(traces.size()));
  manifest.emplace_back("oov_calls", std::to_string(encoded.oov_calls));
  manifest.emplace_back("total_calls", std::to_string(encoded.total_calls));
  manifest.emplace_back("oov_rate", io::format_double(result.oov_rate));
  io::write_key_values(manifest_path(options.out), manifest);
  return result;
}

// ensemble --------------------------------------------------------------------

EnsembleResult cmd_ensemble(const EnsembleOptions& options, std::ostream& log) {
  if (options.members.empty()) throw ConfigError("ensemble: at least one member table required");
  std::vector<std::vector<io::ScoreRow>> tables;
  std::vector<detect::EnsembleMember> members;
  for (const auto& path : options.members) {
    tables.push_back(io::read_score_table(path));
    members.push_back({path.string(), table_kind(path)});
  }
  const auto& first = tables.front();
  for (std::size_t i = 1; i < tables.size(); ++i) {
    const auto& t = tables[i];
    const std::size_t n = std::min(first.size(), t.size());
    for (std::size_t j = 0; j < n; ++j) {
      if (t[j].trace_id != first[j].trace_id) {
        throw ConfigError("ensemble: trace ids diverge at row " + std::to_string(j + 1) + ": '" + first[j].trace_id +
                          "' in " + options.members.front().string() + " vs '" + t[j].trace_id + "' in " +
                          options.members[i].string());
      }
    }
    if (t.size() != first.size()) {
      throw ConfigError("ensemble: " + options.members[i].string() + " has " + std::to_string(t.size()) +
                        " rows, expected " + std::to_string(first.size()));
    }
  }

  std::vector<std::vector<double>> train_scores;
  for (const auto& t : tables) train_scores.push_back(scores_with_label(t, TraceLabel::kNormalTrain));
  EnsembleResult result;
  result.spec = detect::build_ensemble(members, train_scores, options.slope);

  std::vector<double> values(tables.size());
  for (std::size_t j = 0; j < first.size(); ++j) {
    for (std::size_t i = 0; i < tables.size(); ++i) values[i] = tables[i][j].score;
    result.combined.push_back({first[j].trace_id, first[j].label, detect::ensemble_score(result.spec, values)});
    result.averaged.push_back({first[j].trace_id, first[j].label, detect::average_score(values)});
  }

  const std::string kind(detect::to_string(members.front().kind));
  detect::write_ensemble_spec(options.spec_out, result.spec);
  io::write_score_table(options.scores_out, result.combined);
  auto manifest = manifest_for("ensemble");
  manifest.emplace_back("members", join_paths(options.members));
  manifest.emplace_back("slope", io::format_double(options.slope));
  manifest.emplace_back("spec_out", options.spec_out.string());
  manifest.emplace_back("score_kind", kind);
  io::write_key_values(manifest_path(options.scores_out), manifest);

  if (options.averaging_out) {
    io::write_score_table(*options.averaging_out, result.averaged);
    auto m = manifest_for("ensemble/averaging");
    m.emplace_back("members", join_paths(options.members));
    m.emplace_back("score_kind", kind);
    io::write_key_values(manifest_path(*options.averaging_out), m);
  }
  if (options.voting_out) {
    std::vector<std::vector<double>> normal, attack;
    for (const auto& t : tables) {
      normal.push_back(scores_with_label(t, TraceLabel::kNormalValidation));
      attack.push_back(scores_with_label(t, TraceLabel::kAttack));
    }
    result.vote = detect::vote_curve(normal, attack, detect::uniform_grid(options.vote_grid));
    eval::write_roc(*options.voting_out, *result.vote);
    auto m = manifest_for("ensemble/voting");
    m.emplace_back("members", join_paths(options.members));
    m.emplace_back("vote_grid", std::to_string(options.vote_grid));
    m.emplace_back("n_normal", std::to_string(normal.front().size()));
    m.emplace_back("n_attack", std::to_string(attack.front().size()));
    io::write_key_values(manifest_path(*options.voting_out), m);
  }
  log << "ensemble: " << members.size() << " members, biases";
  for (double b : result.spec.biases) log << ' ' << b;
  log << '\n';
  return result;
}

// evaluate --------------------------------------------------------------------

NamedPath NamedPath::parse(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) return {fs::path(text).stem().string(), fs::path(text)};
  return {text.substr(0, eq), fs::path(text.substr(eq + 1))};
}

std::vector<eval::EvalReport> cmd_evaluate(const EvaluateOptions& options, std::ostream& log) {
  if (options.tables.empty() && options.curves.empty()) throw ConfigError("evaluate: nothing to evaluate");
  fs::create_directories(options.out_dir);
  std::vector<eval::EvalReport> reports;
  auto emit = [&](const std::string& name, const eval::RocCurve& curve, std::size_t n_normal, std::size_t n_attack) {
    auto report = eval::make_report(name, curve, n_normal, n_attack);
    eval::write_roc(options.out_dir / (name + ".roc.tsv"), curve);
    eval::write_gnuplot(options.out_dir / (name + ".roc.dat"), curve);
    eval::write_report(options.out_dir / (name + ".report"), report);
    reports.push_back(std::move(report));
  };

  for (const auto& table : options.tables) {
    const auto rows = io::read_score_table(table.path);
    const auto normals = scores_with_label(rows, TraceLabel::kNormalValidation);
    const auto attacks = scores_with_label(rows, TraceLabel::kAttack);
    emit(table.name, eval::roc(normals, attacks), normals.size(), attacks.size());
  }
  for (const auto& c : options.curves) {
    std::size_t n_normal = 0, n_attack = 0;
    if (fs::exists(manifest_path(c.path))) {
      const auto kv = io::read_key_values(manifest_path(c.path));
      if (auto v = io::lookup(kv, "n_normal"); !v.empty()) n_normal = std::stoul(v);
      if (auto v = io::lookup(kv, "n_attack"); !v.empty()) n_attack = std::stoul(v);
    }
    emit(c.name, eval::read_roc(c.path), n_normal, n_attack);
  }

  reports = eval::compare(std::move(reports));
  const std::string table = eval::format_comparison(reports);
  if (reports.size() > 1) {
    std::ofstream out(options.out_dir / "comparison.tsv", std::ios::binary);
    out << table;
  }
  log << table;

  auto manifest = manifest_for("evaluate");
  for (const auto& t : options.tables) manifest.emplace_back("table." + t.name, t.path.string());
  for (const auto& c : options.curves) manifest.emplace_back("curve." + c.name, c.path.string());
  manifest.emplace_back("out_dir", options.out_dir.string());
  io::write_key_values(options.out_dir / "manifest.txt", manifest);
  return reports;
}

// baseline --------------------------------------------------------------------

std::vector<io::ScoreRow> cmd_baseline(const BaselineOptions& options, std::ostream& log) {
  const auto model = lm::load_model(options.model);
  const auto traces = options.data.load();
  const auto encoded = corpus::encode_all(traces, model.vocab);
  const auto reps = lm::representations(model, encoded.traces);

  std::vector<detect::Point> reference;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (traces[i].label == TraceLabel::kNormalTrain) reference.push_back(reps[i].vector);
  }
  if (reference.empty()) throw ConfigError("baseline: no normal-train traces to fit on");

  std::vector<io::ScoreRow> rows;
  const char* method = options.method == BaselineMethod::kKnn ? "knn" : "kmc";
  if (options.method == BaselineMethod::kKnn) {
    const detect::KnnIndex index(reference, options.k);
    for (std::size_t i = 0; i < traces.size(); ++i) {
      rows.push_back({traces[i].source, traces[i].label, index.score(reps[i].vector)});
    }
  } else {
    const auto kmc = detect::kmeans_fit(reference, options.k, options.seed, options.restarts);
    log << "kmc: inertia " << kmc.inertia << " after " << kmc.iterations << " iterations\n";
    for (std::size_t i = 0; i < traces.size(); ++i) {
      rows.push_back({traces[i].source, traces[i].label, kmc.score(reps[i].vector)});
    }
  }
  io::write_score_table(options.out, rows);
  log << "baseline " << method << " k=" << options.k << ": scored " << rows.size() << " traces against "
      << reference.size() << " reference representations\n";

  auto manifest = manifest_for("baseline");
  manifest.emplace_back("model", options.model.string());
  options.data.describe(manifest);
  manifest.emplace_back("method", method);
  manifest.emplace_back("k", std::to_string(options.k));
  manifest.emplace_back("seed", std::to_string(options.seed));
  manifest.emplace_back("restarts", std::to_string(options.restarts));
  manifest.emplace_back("out", options.out.string());
  manifest.emplace_back("score_kind", "distance");
  io::write_key_values(manifest_path(options.out), manifest);
  return rows;
}

// export-embeddings -----------------------------------------------------------

void cmd_export_embeddings(const ExportOptions& options, std::ostream& log) {
  const auto model = lm::load_model(options.model);
  const auto rows = lm::export_embeddings(model);
  std::ofstream out(options.out, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + options.out.string());
  out << "call";
  for (int j = 0; j < model.params.width(); ++j) out << "\td" << j;
  out << '\n';
  for (const auto& row : rows) {
    out << row.call;
    for (float v : row.values) out << '\t' << format_float(v);
    out << '\n';
  }
  log << "export-embeddings: " << rows.size() << " calls x " << model.params.width() << " dims\n";
  auto manifest = manifest_for("export-embeddings");
  manifest.emplace_back("model", options.model.string());
  manifest.emplace_back("out", options.out.string());
  io::write_key_values(manifest_path(options.out), manifest);
}

// synth -----------------------------------------------------------------------

void cmd_synth(const SynthOptions& options, std::ostream& log) {
  options.config.validate();
  const fs::path& root = options.out_dir;
  const fs::path train_dir = root / "Training_Data_Master";
  const fs::path val_dir = root / "Validation_Data_Master";
  const fs::path attack_dir = root / "Attack_Data_Master";
  const fs::path manifest_file = root / "manifest.txt";

  if (fs::exists(root) && !fs::is_empty(root)) {
    if (!options.force) throw ConfigError("output directory " + root.string() + " is not empty (use --force)");
    for (const auto& p : {train_dir, val_dir, attack_dir, manifest_file}) fs::remove_all(p);
  }
  fs::create_directories(train_dir);
  fs::create_directories(val_dir);
  fs::create_directories(attack_dir);

  auto corpus = corpus::gen_synthetic(options.config);
  auto [train, validation] = corpus::split_normal(std::move(corpus.normals), options.split_train,
                                                  options.split_validation, options.config.seed);
  for (std::size_t i = 0; i < train.size(); ++i) write_calls(train_dir / numbered("UTD-", i + 1), train[i]);
  for (std::size_t i = 0; i < validation.size(); ++i) write_calls(val_dir / numbered("UVD-", i + 1), validation[i]);
  if (!corpus.attacks.empty()) {
    const fs::path type_dir = attack_dir / "Uniform_1";
    fs::create_directories(type_dir);
    for (std::size_t i = 0; i < corpus.attacks.size(); ++i) {
      write_calls(type_dir / numbered("UAD-Uniform-1-", i + 1), corpus.attacks[i]);
    }
  }

  const auto& c = options.config;
  auto manifest = manifest_for("synth");
  manifest.emplace_back("out_dir", root.string());
  manifest.emplace_back("vocab_size", std::to_string(c.vocab_size));
  manifest.emplace_back("normals", std::to_string(c.n_normal));
  manifest.emplace_back("attacks", std::to_string(c.n_attack));
  manifest.emplace_back("min_len", std::to_string(c.min_len));
  manifest.emplace_back("max_len", std::to_string(c.max_len));
  manifest.emplace_back("seed", std::to_string(c.seed));
  manifest.emplace_back("grammar_seed", std::to_string(c.grammar_seed));
  manifest.emplace_back("attack_extra_calls", std::to_string(c.attack_extra_calls));
  manifest.emplace_back("split", std::to_string(options.split_train) + ":" + std::to_string(options.split_validation));
  io::write_key_values(manifest_file, manifest);
  log << "synth: " << train.size() << " training, " << validation.size() << " validation, " << corpus.attacks.size()
      << " attack traces in " << root.string() << '\n';
}

void apply_synth_config(const io::KeyValues& entries, SynthOptions& options) {
  auto number = [](const std::string& key, const std::string& value) {
    std::uint64_t n = 0;
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, n);
    if (ec != std::errc() || ptr != end) throw ConfigError("synth config: " + key + " is not a count: " + value);
    return n;
  };
  auto& c = options.config;
  for (const auto& [key, value] : entries) {
    if (key == "vocab_size") c.vocab_size = number(key, value);
    else if (key == "normals") c.n_normal = number(key, value);
    else if (key == "attacks") c.n_attack = number(key, value);
    else if (key == "min_len") c.min_len = number(key, value);
    else if (key == "max_len") c.max_len = number(key, value);
    else if (key == "seed") c.seed = number(key, value);
    else if (key == "grammar_seed") c.grammar_seed = number(key, value);
    else if (key == "attack_extra_calls") c.attack_extra_calls = number(key, value);
    else if (key == "split") {
      const auto colon = value.find(':');
      if (colon == std::string::npos) throw ConfigError("synth config: split must look like 1:1, got " + value);
      options.split_train = unsigned(number(key, value.substr(0, colon)));
      options.split_validation = unsigned(number(key, value.substr(colon + 1)));
    } else if (key == "tool" || key == "command" || key == "out_dir") {
      continue;  // manifest bookkeeping
    } else {
      throw ConfigError("synth config: unknown key " + key);
    }
  }
}

}  // namespace sclm::app
