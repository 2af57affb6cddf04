// sclm: train system-call language models and evaluate anomaly detectors.

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <string>

#include "sclm/app.hpp"
#include "sclm/errors.hpp"

namespace {

using namespace sclm;

void add_data_options(CLI::App* cmd, app::DataOptions& data) {
  cmd->add_option("--adfa", data.adfa_dir, "ADFA-LD style root directory");
  cmd->add_option("--train-flat", data.train_flat, "flat trace file of normal training traces");
  cmd->add_option("--val-flat", data.validation_flat, "flat trace file of normal validation traces");
  cmd->add_option("--attack-flat", data.attack_flat, "flat trace file of attack traces");
  cmd->add_option("--unlabeled-flat", data.unlabeled_flat, "flat trace file of unlabeled traces");
  cmd->add_option("--normal-flat", data.normal_flat, "flat file of normal traces to split into train/validation");
  cmd->add_option("--split-train", data.split_train, "train parts of the normal split")->capture_default_str();
  cmd->add_option("--split-val", data.split_validation, "validation parts of the normal split")->capture_default_str();
  cmd->add_option("--split-seed", data.split_seed, "seed for the normal split")->capture_default_str();
}

void add_lm_options(CLI::App* cmd, lm::LmConfig& c) {
  cmd->add_option("--layers", c.num_layers, "LSTM layers (1 or 2)")->capture_default_str();
  cmd->add_option("--cells", c.cells, "cells per layer, also the embedding size")->capture_default_str();
  cmd->add_option("--lr", c.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--clip", c.clip_norm, "global gradient-norm cap")->capture_default_str();
  cmd->add_option("--dropout", c.dropout, "dropout probability")->capture_default_str();
  cmd->add_option("--init-range", c.init_range, "uniform init half-width")->capture_default_str();
  cmd->add_option("--epochs", c.epochs, "maximum epochs")->capture_default_str();
  cmd->add_option("--bptt", c.bptt_chunk, "truncated BPTT chunk length")->capture_default_str();
  cmd->add_option("--batch-size", c.batch_size, "traces per mini-batch")->capture_default_str();
  cmd->add_option("--patience", c.patience, "early-stopping patience in epochs")->capture_default_str();
  cmd->add_option("--seed", c.seed, "initialisation and shuffling seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"System-call language modeling for host intrusion detection"};
  cli.require_subcommand(1);

  app::TrainOptions train;
  auto* train_cmd = cli.add_subcommand("train", "train a language model on normal traces");
  add_data_options(train_cmd, train.data);
  add_lm_options(train_cmd, train.config);
  train_cmd->add_option("-o,--out", train.model_out, "model file")->required();
  train_cmd->add_option("--log", train.log_out, "per-epoch log (default <out>.log.tsv)");

  app::ScoreOptions score;
  auto* score_cmd = cli.add_subcommand("score", "score traces by average negative log-likelihood");
  score_cmd->add_option("-m,--model", score.model, "model file")->required();
  add_data_options(score_cmd, score.data);
  score_cmd->add_option("-o,--out", score.out, "score table")->required();
  score_cmd->add_option("--batch-size", score.batch_size, "traces per scoring batch")->capture_default_str();

  app::EnsembleOptions ensemble;
  auto* ensemble_cmd = cli.add_subcommand("ensemble", "combine member score tables");
  ensemble_cmd->add_option("members", ensemble.members, "member score tables")->required();
  ensemble_cmd->add_option("--spec", ensemble.spec_out, "ensemble spec output")->required();
  ensemble_cmd->add_option("-o,--out", ensemble.scores_out, "combined score table")->required();
  ensemble_cmd->add_option("--averaging", ensemble.averaging_out, "also write the averaging score table");
  ensemble_cmd->add_option("--voting", ensemble.voting_out, "also write the voting ROC curve");
  ensemble_cmd->add_option("--vote-grid", ensemble.vote_grid, "quantile grid size for voting")->capture_default_str();
  ensemble_cmd->add_option("--slope", ensemble.slope, "leaky ReLU negative slope")->capture_default_str();

  std::vector<std::string> eval_tables, eval_curves;
  app::EvaluateOptions evaluate;
  auto* eval_cmd = cli.add_subcommand("evaluate", "ROC, AUC and FAR at fixed DR for score tables");
  eval_cmd->add_option("tables", eval_tables, "score tables as name=path or path");
  eval_cmd->add_option("--curve", eval_curves, "precomputed ROC file as name=path or path");
  eval_cmd->add_option("-o,--out-dir", evaluate.out_dir, "output directory")->required();

  app::BaselineOptions baseline;
  std::string method = "knn";
  auto* baseline_cmd = cli.add_subcommand("baseline", "kNN / k-means scores over learned representations");
  baseline_cmd->add_option("-m,--model", baseline.model, "model file")->required();
  add_data_options(baseline_cmd, baseline.data);
  baseline_cmd->add_option("--method", method, "knn or kmc")
      ->check(CLI::IsMember({"knn", "kmc"}))
      ->capture_default_str();
  baseline_cmd->add_option("-k", baseline.k, "neighbours (knn) or clusters (kmc)")->capture_default_str();
  baseline_cmd->add_option("--seed", baseline.seed, "k-means seed")->capture_default_str();
  baseline_cmd->add_option("--restarts", baseline.restarts, "k-means restarts")->capture_default_str();
  baseline_cmd->add_option("-o,--out", baseline.out, "score table")->required();

  app::ExportOptions export_opts;
  auto* export_cmd = cli.add_subcommand("export-embeddings", "write the call embedding matrix as TSV");
  export_cmd->add_option("-m,--model", export_opts.model, "model file")->required();
  export_cmd->add_option("-o,--out", export_opts.out, "embedding table")->required();

  // Flags given on the command line win over the --config file; the rest are
  // copied from it after parsing.
  app::SynthOptions synth, synth_cli;
  std::string synth_config;
  std::vector<std::pair<CLI::Option*, std::function<void()>>> synth_fields;
  auto* synth_cmd = cli.add_subcommand("synth", "generate a synthetic corpus in ADFA-LD layout");
  synth_cmd->add_option("-o,--out", synth.out_dir, "output directory")->required();
  synth_cmd->add_option("--config", synth_config, "key = value file with the options below (manifest keys)");
  auto synth_option = [&](const char* flag, auto member, const char* help) {
    auto* opt = synth_cmd->add_option(flag, synth_cli.*member, help)->capture_default_str();
    synth_fields.emplace_back(opt, [&synth, &synth_cli, member] { synth.*member = synth_cli.*member; });
  };
  auto synth_count = [&](const char* flag, auto member, const char* help) {
    auto* opt = synth_cmd->add_option(flag, synth_cli.config.*member, help)->capture_default_str();
    synth_fields.emplace_back(opt, [&synth, &synth_cli, member] { synth.config.*member = synth_cli.config.*member; });
  };
  using corpus::SynthConfig;
  synth_count("--vocab", &SynthConfig::vocab_size, "number of distinct calls");
  synth_count("--normals", &SynthConfig::n_normal, "normal traces before splitting");
  synth_count("--attacks", &SynthConfig::n_attack, "attack traces");
  synth_count("--min-len", &SynthConfig::min_len, "minimum trace length");
  synth_count("--max-len", &SynthConfig::max_len, "maximum trace length");
  synth_count("--seed", &SynthConfig::seed, "sampling seed");
  synth_count("--grammar-seed", &SynthConfig::grammar_seed, "transition-matrix seed");
  synth_count("--attack-extra-calls", &SynthConfig::attack_extra_calls, "extra call ids only attacks may use");
  synth_option("--split-train", &app::SynthOptions::split_train, "train parts of the normal split");
  synth_option("--split-val", &app::SynthOptions::split_validation, "validation parts of the normal split");
  synth_cmd->add_flag("--force", synth.force, "replace an existing corpus");

  CLI11_PARSE(cli, argc, argv);

  try {
    if (*train_cmd) {
      app::cmd_train(train, std::cerr);
    } else if (*score_cmd) {
      app::cmd_score(score, std::cerr);
    } else if (*ensemble_cmd) {
      app::cmd_ensemble(ensemble, std::cerr);
    } else if (*eval_cmd) {
      for (const auto& t : eval_tables) evaluate.tables.push_back(app::NamedPath::parse(t));
      for (const auto& c : eval_curves) evaluate.curves.push_back(app::NamedPath::parse(c));
      app::cmd_evaluate(evaluate, std::cout);
    } else if (*baseline_cmd) {
      baseline.method = method == "kmc" ? app::BaselineMethod::kKmc : app::BaselineMethod::kKnn;
      app::cmd_baseline(baseline, std::cerr);
    } else if (*export_cmd) {
      app::cmd_export_embeddings(export_opts, std::cerr);
    } else if (*synth_cmd) {
      if (!synth_config.empty()) app::apply_synth_config(io::read_key_values(synth_config), synth);
      for (const auto& [opt, copy] : synth_fields) {
        if (synth_config.empty() || opt->count() > 0) copy();
      }
      app::cmd_synth(synth, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "sclm: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
