// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "setrank/harness.hpp"
#include "setrank/losses.hpp"
#include "setrank/metrics.hpp"
#include "setrank/novelty.hpp"
#include "setrank/trec_io.hpp"

namespace {

using nlohmann::json;
using namespace setrank;

void write_manifest(const std::string& path, const json& manifest) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << manifest.dump(2) << '\n';
}

SyntheticData load_data_dir(const std::string& dir) {
  SyntheticData data;
  data.corpus = load_corpus(dir + "/corpus.jsonl");
  data.queries = load_queries(dir + "/queries.tsv");
  data.qrels = load_qrels(dir + "/qrels.txt");
  data.clusters = load_clusters(dir + "/clusters.tsv");
  data.first_stage = load_run(dir + "/first_stage.run");
  return data;
}

void write_curve(const std::string& path, const TrainReport& report) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "step\tloss";
  bool with_bce = !report.heldout_bce_curve.empty();
  if (with_bce) os << "\theldout_bce";
  os << '\n';
  for (std::size_t i = 0; i < report.loss_curve.size(); ++i) {
    os << i << '\t' << report.loss_curve[i];
    if (with_bce && i < report.heldout_bce_curve.size()) {
      os << '\t' << report.heldout_bce_curve[i];
    }
    os << '\n';
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Set-based passage re-ranking toolkit"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a synthetic collection");
  std::string gen_out_dir;
  SyntheticConfig synth;
  gen->add_option("--out-dir", gen_out_dir, "Output directory")->required();
  gen->add_option("--num-queries", synth.num_queries);
  gen->add_option("--passages-per-query", synth.passages_per_query);
  gen->add_option("--vocab-size", synth.vocab_size);
  gen->add_option("--passage-length", synth.passage_length);
  gen->add_option("--duplicate-rate", synth.duplicate_rate);
  gen->add_option("--noise-rate", synth.noise_rate);
  gen->add_option("--seed", synth.seed);

  // train
  auto* train = app.add_subcommand("train", "Train a model");
  int train_stage = 1;
  std::string train_loss = "info_nce";
  std::string train_mode = "int_token";
  std::string train_data_dir, train_out, train_init, train_curve;
  std::uint64_t train_seed = 1;
  Index train_steps = 400, train_epochs = 1;
  Index negatives = 7, max_passages = 100, heldout_count = 8;
  double train_lr = 1e-3, train_noise = 0.0;
  ModelConfig model;
  Index interaction_layer = -1;
  train->add_option("--stage", train_stage, "1 or 2")->required();
  train->add_option("--loss", train_loss,
                    "info_nce|da_info_nce|rank_net|na_rank_net");
  train->add_option("--interaction-mode", train_mode,
                    "int_token|cls_token|none (stage 1)");
  train->add_option("--interaction-layer", interaction_layer,
                    "-1 = every layer");
  train->add_option("--seed", train_seed);
  train->add_option("--steps", train_steps, "Stage-1 step budget");
  train->add_option("--epochs", train_epochs, "Stage-2 epochs");
  train->add_option("--data-dir", train_data_dir)->required();
  train->add_option("--out", train_out, "Checkpoint path")->required();
  train->add_option("--init", train_init,
                    "Starting checkpoint (required for stage 2)");
  train->add_option("--curve-out", train_curve, "Loss curve TSV path");
  train->add_option("--negatives", negatives);
  train->add_option("--max-passages", max_passages);
  train->add_option("--heldout", heldout_count,
                    "Instances reserved for the duplicate-BCE early stop");
  train->add_option("--lr", train_lr);
  train->add_option("--noise-rate", train_noise, "Teacher label noise");
  train->add_option("--layers", model.layers);
  train->add_option("--heads", model.heads);
  train->add_option("--dim", model.model_dim);
  train->add_option("--ffn-dim", model.ffn_dim);

  // rerank
  auto* rr = app.add_subcommand("rerank", "Re-rank a run with a checkpoint");
  std::string rr_checkpoint, rr_run, rr_corpus, rr_queries, rr_vocab, rr_out;
  std::string rr_tag = "setrank";
  Index rr_top_k = 100;
  rr->add_option("--checkpoint", rr_checkpoint)->required();
  rr->add_option("--run", rr_run)->required();
  rr->add_option("--corpus", rr_corpus)->required();
  rr->add_option("--queries", rr_queries)->required();
  rr->add_option("--vocab", rr_vocab)->required();
  rr->add_option("--out", rr_out)->required();
  rr->add_option("--top-k", rr_top_k);
  rr->add_option("--tag", rr_tag);

  // perturb
  auto* pt = app.add_subcommand("perturb", "Permute a run per query");
  std::string pt_run, pt_mode = "random", pt_qrels, pt_out;
  std::uint64_t pt_seed = 1;
  pt->add_option("--run", pt_run)->required();
  pt->add_option("--mode", pt_mode, "original|random|ideal|reverse-ideal");
  pt->add_option("--qrels", pt_qrels)->required();
  pt->add_option("--seed", pt_seed);
  pt->add_option("--out", pt_out)->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Score a run against qrels");
  std::string ev_run, ev_qrels, ev_clusters, ev_metric = "ndcg", ev_out;
  Index ev_k = 10;
  double ev_alpha = 0.99;
  ev->add_option("--run", ev_run)->required();
  ev->add_option("--qrels", ev_qrels)->required();
  ev->add_option("--clusters", ev_clusters, "Required for alpha-ndcg");
  ev->add_option("--metric", ev_metric, "ndcg|alpha-ndcg");
  ev->add_option("--k", ev_k);
  ev->add_option("--alpha", ev_alpha);
  ev->add_option("--out", ev_out, "Report path (default stdout)");

  // rank-changes
  auto* rc = app.add_subcommand("rank-changes",
                                "Rank-change proportions between two runs");
  std::string rc_before, rc_after, rc_out;
  Index rc_depth = 100;
  rc->add_option("--before", rc_before)->required();
  rc->add_option("--after", rc_after)->required();
  rc->add_option("--depth", rc_depth);
  rc->add_option("--out", rc_out)->required();

  // attn-cost
  auto* ac = app.add_subcommand("attn-cost",
                                "Attention score-entry accounting");
  Index ac_k = 100, ac_len = 289;
  ac->add_option("--k", ac_k, "Sequences per batch");
  ac->add_option("--len", ac_len, "Padded sequence length");

  std::string manifest_path;
  app.add_option("--manifest", manifest_path,
                 "Manifest path (default: next to the primary output)");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    auto data = generate_synthetic(synth);
    std::filesystem::create_directories(gen_out_dir);
    save_corpus(gen_out_dir + "/corpus.jsonl", data.corpus);
    save_queries(gen_out_dir + "/queries.tsv", data.queries);
    save_qrels(gen_out_dir + "/qrels.txt", data.qrels);
    save_clusters(gen_out_dir + "/clusters.tsv", data.clusters);
    save_run(gen_out_dir + "/first_stage.run", data.first_stage);

    std::vector<std::string> texts;
    for (const auto& [id, text] : data.corpus) texts.push_back(text);
    for (const auto& [id, text] : data.queries) texts.push_back(text);
    save_vocab(gen_out_dir + "/vocab.txt", build_vocab(texts, 1));

    json manifest = {{"command", "generate"},
                     {"out_dir", gen_out_dir},
                     {"num_queries", synth.num_queries},
                     {"passages_per_query", synth.passages_per_query},
                     {"vocab_size", synth.vocab_size},
                     {"passage_length", synth.passage_length},
                     {"duplicate_rate", synth.duplicate_rate},
                     {"noise_rate", synth.noise_rate},
                     {"seed", synth.seed}};
    if (manifest_path.empty()) manifest_path = gen_out_dir + "/manifest.json";
    write_manifest(manifest_path, manifest);
    std::cout << "wrote collection to " << gen_out_dir << '\n';
    return 0;
  }

  if (train->parsed()) {
    auto data = load_data_dir(train_data_dir);
    auto vocab = load_vocab(train_data_dir + "/vocab.txt");
    if (train_curve.empty()) train_curve = train_out + ".curve.tsv";

    json manifest = {{"command", "train"},
                     {"stage", train_stage},
                     {"loss", train_loss},
                     {"seed", train_seed},
                     {"data_dir", train_data_dir},
                     {"out", train_out},
                     {"lr", train_lr}};
    TrainReport report;

    if (train_stage == 1) {
      model.vocab_size = vocab.size();
      model.interaction_mode = interaction_mode_from_string(train_mode);
      model.interaction_layer = interaction_layer;
      ModelParams params = init_params(model, train_seed);

      auto instances = build_stage1_instances(data, negatives);
      Index held = std::min<Index>(heldout_count,
                                   static_cast<Index>(instances.size()) / 4);
      std::vector<RankingInstance> train_set(instances.begin(),
                                             instances.end() - held);
      std::vector<RankingInstance> held_set(instances.end() - held,
                                            instances.end());
      Stage1Options opts;
      opts.loss = stage1_loss_from_string(train_loss);
      opts.max_steps = train_steps;
      opts.seed = train_seed;
      opts.learning_rate = train_lr;
      report = train_stage1(params, model, train_set, held_set, vocab, opts);
      save_model(train_out, params, model);
      manifest["steps"] = train_steps;
      manifest["interaction_mode"] = train_mode;
      manifest["interaction_layer"] = interaction_layer;
      manifest["negatives"] = negatives;
      manifest["heldout"] = held;
      manifest["early_stopped"] = report.early_stopped;
      manifest["steps_run"] = report.steps_run;
    } else if (train_stage == 2) {
      if (train_init.empty()) {
        throw std::runtime_error("stage 2 requires --init checkpoint");
      }
      auto [params, loaded_config] = load_model(train_init);
      auto instances =
          build_stage2_instances(data, max_passages, train_noise, train_seed);
      Stage2Options opts;
      opts.loss = stage2_loss_from_string(train_loss);
      opts.epochs = train_epochs;
      opts.seed = train_seed;
      opts.learning_rate = train_lr;
      report = train_stage2(params, loaded_config, instances, vocab, opts);
      save_model(train_out, params, loaded_config);
      manifest["epochs"] = train_epochs;
      manifest["init"] = train_init;
      manifest["max_passages"] = max_passages;
      manifest["noise_rate"] = train_noise;
      manifest["steps_run"] = report.steps_run;
    } else {
      throw std::runtime_error("--stage must be 1 or 2");
    }

    write_curve(train_curve, report);
    manifest["curve_out"] = train_curve;
    if (manifest_path.empty()) manifest_path = train_out + ".manifest.json";
    write_manifest(manifest_path, manifest);
    std::cout << "trained " << report.steps_run << " steps, checkpoint at "
              << train_out << '\n';
    return 0;
  }

  if (rr->parsed()) {
    auto [params, config] = load_model(rr_checkpoint);
    auto vocab = load_vocab(rr_vocab);
    auto run = load_run(rr_run);
    auto corpus = load_corpus(rr_corpus);
    auto queries = load_queries(rr_queries);
    auto out =
        rerank(params, config, vocab, run, corpus, queries, rr_top_k, rr_tag);
    save_run(rr_out, out);

    json manifest = {{"command", "rerank"},   {"checkpoint", rr_checkpoint},
                     {"run", rr_run},         {"corpus", rr_corpus},
                     {"queries", rr_queries}, {"vocab", rr_vocab},
                     {"out", rr_out},         {"top_k", rr_top_k},
                     {"tag", rr_tag}};
    if (manifest_path.empty()) manifest_path = rr_out + ".manifest.json";
    write_manifest(manifest_path, manifest);
    std::cout << "wrote " << out.size() << " entries to " << rr_out << '\n';
    return 0;
  }

  if (pt->parsed()) {
    auto run = load_run(pt_run);
    auto qrels = load_qrels(pt_qrels);
    auto out = perturb(run, perturb_mode_from_string(pt_mode), qrels, pt_seed);
    save_run(pt_out, out);

    json manifest = {{"command", "perturb"}, {"run", pt_run},
                     {"mode", pt_mode},      {"qrels", pt_qrels},
                     {"seed", pt_seed},      {"out", pt_out}};
    if (manifest_path.empty()) manifest_path = pt_out + ".manifest.json";
    write_manifest(manifest_path, manifest);
    std::cout << "wrote perturbed run to " << pt_out << '\n';
    return 0;
  }

  if (ev->parsed()) {
    auto run = load_run(ev_run);
    auto qrels = load_qrels(ev_qrels);
    SubtopicMap clusters;
    if (ev_metric == "alpha-ndcg") {
      if (ev_clusters.empty()) {
        throw std::runtime_error("alpha-ndcg requires --clusters");
      }
      clusters = load_clusters(ev_clusters);
    } else if (ev_metric != "ndcg") {
      throw std::runtime_error("unknown metric: " + ev_metric);
    }

    std::map<std::string, std::vector<std::string>> rankings;
    for (const auto& e : run) rankings[e.query_id].push_back(e.passage_id);

    std::string metric_name =
        ev_metric + "@" + std::to_string(static_cast<long long>(ev_k));
    std::vector<MetricRow> rows;
    for (const auto& [qid, ranking] : rankings) {
      double value = ev_metric == "ndcg"
                         ? ndcg_at_k(ranking, qrels, qid, ev_k)
                         : alpha_ndcg_at_k(ranking, qrels, clusters, qid,
                                           ev_k, ev_alpha);
      rows.push_back({qid, metric_name, value});
    }

    if (ev_out.empty()) {
      write_metrics_report(std::cout, rows);
    } else {
      std::ofstream os(ev_out, std::ios::binary);
      if (!os) throw std::runtime_error("cannot open for writing: " + ev_out);
      write_metrics_report(os, rows);
      json manifest = {{"command", "eval"}, {"run", ev_run},
                       {"qrels", ev_qrels}, {"clusters", ev_clusters},
                       {"metric", ev_metric}, {"k", ev_k},
                       {"alpha", ev_alpha},   {"out", ev_out}};
      if (manifest_path.empty()) manifest_path = ev_out + ".manifest.json";
      write_manifest(manifest_path, manifest);
    }
    return 0;
  }

  if (rc->parsed()) {
    auto before = load_run(rc_before);
    auto after = load_run(rc_after);
    auto matrix = rank_change_matrix(before, after, rc_depth);
    std::ofstream os(rc_out, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + rc_out);
    write_rank_change_csv(os, matrix);

    json manifest = {{"command", "rank-changes"},
                     {"before", rc_before},
                     {"after", rc_after},
                     {"depth", rc_depth},
                     {"out", rc_out}};
    if (manifest_path.empty()) manifest_path = rc_out + ".manifest.json";
    write_manifest(manifest_path, manifest);
    std::cout << "wrote rank-change matrix to " << rc_out << '\n';
    return 0;
  }

  if (ac->parsed()) {
    ModelConfig config;
    config.vocab_size = 5;
    auto cost = attention_cost(config, ac_k, ac_len);
    std::cout << "per-layer score entries, k=" << ac_k << " L=" << ac_len
              << '\n'
              << "  parallel with appended rows: " << cost.set_encoder_entries
              << '\n'
              << "  single concatenated sequence: " << cost.concat_entries
              << '\n'
              << "  ratio: "
              << static_cast<double>(cost.concat_entries) /
                     static_cast<double>(cost.set_encoder_entries)
              << '\n';
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
