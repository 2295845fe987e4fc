// dkg: command-line front end for KG building, data generation, training,
// evaluation, reasoning traces and gradient checks.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>

#include <CLI11.hpp>

#include "dkg/config.hpp"
#include "dkg/data.hpp"
#include "dkg/error.hpp"
#include "dkg/gradcheck.hpp"
#include "dkg/kg_store.hpp"
#include "dkg/model.hpp"
#include "dkg/rng.hpp"
#include "dkg/trainer.hpp"

namespace fs = std::filesystem;
using namespace dkg;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw data_error("cannot write " + path.string());
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& x : out) {
    const auto b = x.find_first_not_of(' ');
    const auto e = x.find_last_not_of(' ');
    x = b == std::string::npos ? "" : x.substr(b, e - b + 1);
  }
  std::erase(out, std::string());
  return out;
}

// ---- build-kg ------------------------------------------------------------------

struct BuildKgArgs {
  std::string tables, triples, out;
};

int cmd_build_kg(const BuildKgArgs& a) {
  std::vector<StringTriple> triples;
  if (!a.tables.empty()) {
    const auto records = load_smd_tables(a.tables);
    if (records.empty()) throw data_error("no table records in " + a.tables);
    triples = build_smd_kg(records).triples;
  } else {
    triples = read_triple_file(a.triples);
  }
  const KnowledgeGraph kg = build_knowledge_graph(triples);
  const auto indexed = index_triples(triples, kg.vocabs);
  std::vector<StringTriple> unique;
  unique.reserve(indexed.size());
  for (const auto& t : indexed)
    unique.push_back({kg.vocabs.entities.name(t.head), kg.vocabs.relations.name(t.relation),
                      kg.vocabs.entities.name(t.tail)});
  write_triple_file(a.out, unique);
  std::printf("N_E\t%zu\nN_R\t%zu\nN_T\t%zu\n", kg.reified.n_entities(),
              kg.reified.n_relations(), kg.reified.n_triples());
  return 0;
}

// ---- gen ------------------------------------------------------------------------

struct GenArgs {
  std::string config, out;
  std::uint64_t seed = 0;
};

void apply_synth(SynthConfig& c, const ConfigMap& m) {
  m.require_known({"n_entities", "n_relations", "n_triples", "hops_max", "n_train",
                   "n_valid", "n_test", "mix_inform", "mix_selection",
                   "mix_true_false", "mix_extraction", "H"});
  m.get("n_entities", c.n_entities);
  m.get("n_relations", c.n_relations);
  m.get("n_triples", c.n_triples);
  m.get("hops_max", c.hops_max);
  m.get("n_train", c.n_train);
  m.get("n_valid", c.n_valid);
  m.get("n_test", c.n_test);
  m.get("mix_inform", c.mix_inform);
  m.get("mix_selection", c.mix_selection);
  m.get("mix_true_false", c.mix_true_false);
  m.get("mix_extraction", c.mix_extraction);
  m.get("H", c.max_hops_model);
}

int cmd_gen(const GenArgs& a) {
  SynthConfig cfg;
  if (!a.config.empty()) apply_synth(cfg, ConfigMap::from_file(a.config));
  const SynthDataset ds = gen_synthetic(cfg, a.seed);
  fs::create_directories(a.out);
  write_triple_file((fs::path(a.out) / "triples.tsv").string(), ds.triples);
  const std::pair<const char*, const std::vector<DialogueExample>*> splits[] = {
      {"train", &ds.train}, {"valid", &ds.valid}, {"test", &ds.test}};
  std::printf("split\tinform\tselection\ttrue_false\textraction\ttotal\n");
  for (const auto& [name, data] : splits) {
    save_dialogues((fs::path(a.out) / (std::string(name) + ".jsonl")).string(), *data);
    std::map<std::string, std::size_t> counts;
    for (const auto& ex : *data) ++counts[ex.reasoning_type.value_or("")];
    std::printf("%s\t%zu\t%zu\t%zu\t%zu\t%zu\n", name, counts["inform"],
                counts["selection"], counts["true_false"], counts["extraction"],
                data->size());
  }
  return 0;
}

// ---- train ------------------------------------------------------------------------

struct TrainArgs {
  std::string data, kg, config, out, resume;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t workers = 0;
};

int cmd_train(const TrainArgs& a) {
  TrainConfig cfg;
  ConfigMap map;
  if (!a.config.empty()) map = ConfigMap::from_file(a.config);
  map.merge(ConfigMap::from_pairs(a.overrides));
  apply_config(cfg, map);
  if (a.seed_given) cfg.seed = a.seed;
  if (a.workers) cfg.workers = a.workers;
  cfg.validate();

  const KnowledgeGraph kg = load_knowledge_graph(a.kg);
  const fs::path dir(a.data);
  const auto train_raw = load_dialogues((dir / "train.jsonl").string(), &kg.vocabs.relations);
  const auto valid_raw = load_dialogues((dir / "valid.jsonl").string(), &kg.vocabs.relations);

  Checkpoint ck;
  ck.config = cfg;
  ck.entity_hash = kg.vocabs.entities.content_hash();
  ck.relation_hash = kg.vocabs.relations.content_hash();
  if (!a.resume.empty()) {
    Checkpoint prev = load_checkpoint(a.resume);
    check_compatible(prev, kg);
    ck.tokens = prev.tokens;
    ck.params = std::move(prev.params);
    if (ck.params.dims.hidden != cfg.hidden || ck.params.dims.hops != cfg.hops)
      throw data_error("resume checkpoint dimensions differ from the config (d, H)");
  } else {
    ck.tokens = build_token_vocab(train_raw, kg.vocabs.entities);
  }
  const EntityTokenLayout layout = build_entity_layout(
      kg.vocabs.entities, ck.tokens,
      a.resume.empty() ? std::nullopt : std::optional(ck.params.dims.entity_tokens));
  if (a.resume.empty()) {
    ModelDims dims;
    dims.vocab = ck.tokens.size();
    dims.hidden = cfg.hidden;
    dims.n_entities = kg.reified.n_entities();
    dims.n_relations = kg.reified.n_relations();
    dims.hops = cfg.hops;
    dims.entity_tokens = layout.m;
    ck.params = ModelParams::create(dims);
    auto rng = substream(cfg.seed, "init");
    ck.params.init_uniform(rng);
  }

  const auto train_enc = encode_examples(train_raw, kg, ck.tokens, cfg.hops);
  const auto valid_enc = encode_examples(valid_raw, kg, ck.tokens, cfg.hops);
  fs::create_directories(a.out);
  std::ofstream log(fs::path(a.out) / "metrics.tsv");
  log << metric_log_header() << std::flush;
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult res = train_loop(
      cfg, kg, ck.tokens, layout, {train_raw, train_enc}, {valid_raw, valid_enc},
      ck.params, [&](const EpochLog& row) {
        log << metric_log_row(row) << std::flush;
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::fprintf(stderr, "epoch %zu loss %.4f val_em %.4f val_path@1 %.4f (%.0fs)\n",
                     row.epoch, row.train_loss, row.valid.overall.em,
                     row.valid.overall.path_at_1, secs);
      });
  ck.params = std::move(res.best);
  ck.best_metric = res.best_metric;
  ck.best_epoch = res.best_epoch;
  save_checkpoint(a.out, ck);
  std::printf("best_epoch\t%zu\nbest_metric\t%.6f\n", ck.best_epoch, ck.best_metric);
  return 0;
}

// ---- eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string ckpt, data, kg, json_out, predictions;
  std::uint64_t shuffle_seed = 0;
  bool shuffle = false;
  std::size_t workers = 0;
};

struct Loaded {
  Checkpoint ck;
  KnowledgeGraph kg;
  EntityTokenLayout layout;
};

Loaded load_model(const std::string& ckpt, const std::string& kg_path) {
  Loaded l;
  l.ck = load_checkpoint(ckpt);
  l.kg = load_knowledge_graph(kg_path);
  check_compatible(l.ck, l.kg);
  l.layout = build_entity_layout(l.kg.vocabs.entities, l.ck.tokens,
                                 l.ck.params.dims.entity_tokens);
  return l;
}

int cmd_eval(const EvalArgs& a) {
  Loaded l = load_model(a.ckpt, a.kg);
  if (a.shuffle) {
    std::vector<std::uint32_t> perm(l.kg.reified.n_triples());
    std::iota(perm.begin(), perm.end(), 0u);
    auto rng = substream(a.shuffle_seed, "shuffle");
    shuffle_range(perm.begin(), perm.end(), rng);
    l.kg.reified = permute_triples(l.kg.reified, perm);
  }
  const auto raw = load_dialogues(a.data, &l.kg.vocabs.relations);
  const auto enc = encode_examples(raw, l.kg, l.ck.tokens, l.ck.config.hops);
  const auto& cfg = l.ck.config;
  const EvalOutput out =
      evaluate(l.ck.params, l.kg, l.ck.tokens, l.layout, {raw, enc}, cfg.spec(),
               cfg.beam_width, cfg.max_decode_len, a.workers ? a.workers : cfg.workers);
  std::cout << out.report.to_tsv();
  if (!a.json_out.empty()) write_text(a.json_out, out.report.to_json());
  if (!a.predictions.empty()) {
    std::string text;
    for (const auto& p : out.predictions) text += p + '\n';
    write_text(a.predictions, text);
  }
  return 0;
}

// ---- trace ---------------------------------------------------------------------

struct TraceArgs {
  std::string ckpt, kg, history, entities;
};

int cmd_trace(const TraceArgs& a) {
  Loaded l = load_model(a.ckpt, a.kg);
  DialogueExample ex;
  ex.history = {a.history};
  ex.response = "-";
  ex.initial_entities = split_list(a.entities, ',');
  if (ex.initial_entities.empty()) throw usage_error("--entities lists no entities");
  const auto enc = encode_example(ex, 0, l.kg, l.ck.tokens, l.ck.config.hops);
  const auto& cfg = l.ck.config;
  const Prediction p = predict(l.ck.params, l.kg, l.layout, enc, cfg.spec(),
                               cfg.beam_width, cfg.max_decode_len);
  std::cout << format_trace(p.trace, l.kg.vocabs, cfg.mode);
  if (!p.paths.empty()) {
    std::string path;
    for (auto r : p.paths.front().relations)
      path += (path.empty() ? "" : " -> ") + l.kg.vocabs.relations.name(r);
    std::printf("path\t%s\t%.4f\n", path.empty() ? "(stay)" : path.c_str(),
                p.paths.front().score);
  }
  std::printf("response\t%s\n", l.ck.tokens.decode(p.tokens).c_str());
  return 0;
}

// ---- gradcheck -----------------------------------------------------------------

struct GradArgs {
  std::string config;
  std::uint64_t seed = 0;
  double h = 0.0;
};

int cmd_gradcheck(const GradArgs& a) {
  GradcheckConfig cfg;
  if (!a.config.empty()) apply_config(cfg, ConfigMap::from_file(a.config));
  if (a.h > 0.0) cfg.h = a.h;
  const auto t0 = std::chrono::steady_clock::now();
  const GradcheckReport r = run_gradcheck(cfg, a.seed);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("block\tsize\tmax_rel_err\n");
  for (const auto& b : r.blocks)
    std::printf("%s\t%zu\t%.3e%s\n", b.name.c_str(), b.size, b.max_rel_err,
                b.max_rel_err < cfg.tolerance ? "" : "\tFAIL");
  std::printf("max\t-\t%.3e\nh\t-\t%.1e\nseconds\t-\t%.2f\n", r.max_rel_err, cfg.h, secs);
  if (!r.passed(cfg.tolerance)) {
    std::fprintf(stderr, "gradcheck failed: max relative error %.3e >= %.1e\n",
                 r.max_rel_err, cfg.tolerance);
    return static_cast<int>(ErrorKind::numeric);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable KG reasoning for dialogue: build, train, evaluate"};
  app.require_subcommand(1);

  BuildKgArgs bk;
  auto* build = app.add_subcommand("build-kg", "Build a triple file from tables or triples");
  auto* tables_opt = build->add_option("--tables", bk.tables, "SMD-style table records (JSONL)");
  auto* triples_opt = build->add_option("--triples", bk.triples, "Triple TSV to dedup");
  tables_opt->excludes(triples_opt);
  build->add_option("--out", bk.out, "Output triple TSV")->required();

  GenArgs ga;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic KG and dialogue splits");
  gen->add_option("--config", ga.config, "Generator key=value config");
  gen->add_option("--seed", ga.seed, "Seed");
  gen->add_option("--out", ga.out, "Output directory")->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--data", ta.data, "Directory with train.jsonl and valid.jsonl")->required();
  train->add_option("--kg", ta.kg, "Triple TSV")->required();
  train->add_option("--config", ta.config, "Training key=value config");
  train->add_option("--out", ta.out, "Checkpoint directory")->required();
  auto* seed_opt = train->add_option("--seed", ta.seed, "Seed (overrides the config)");
  train->add_option("--set", ta.overrides, "Config override key=value (repeatable)");
  train->add_option("--resume", ta.resume, "Start from this checkpoint");
  train->add_option("--workers", ta.workers, "Worker threads");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--ckpt", ea.ckpt, "Checkpoint directory")->required();
  eval->add_option("--data", ea.data, "Dialogue JSONL")->required();
  eval->add_option("--kg", ea.kg, "Triple TSV")->required();
  auto* shuffle_opt =
      eval->add_option("--shuffle-triples", ea.shuffle_seed, "Permute KG triples with this seed");
  eval->add_option("--json", ea.json_out, "Also write the report as JSON");
  eval->add_option("--predictions", ea.predictions, "Write decoded responses, one per line");
  eval->add_option("--workers", ea.workers, "Worker threads");

  TraceArgs tr;
  auto* trace = app.add_subcommand("trace", "Print the reasoning trace for one query");
  trace->add_option("--ckpt", tr.ckpt, "Checkpoint directory")->required();
  trace->add_option("--kg", tr.kg, "Triple TSV")->required();
  trace->add_option("--history", tr.history, "Dialogue history text")->required();
  trace->add_option("--entities", tr.entities, "Comma-separated initial entities")->required();

  GradArgs gr;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of all gradients");
  grad->add_option("--config", gr.config, "Gradcheck key=value config");
  grad->add_option("--seed", gr.seed, "Seed");
  grad->set_help_flag("--help", "Print this help message and exit");
  grad->add_option("--h", gr.h, "Finite-difference step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::usage);
  }

  try {
    if (*build) {
      if (bk.tables.empty() == bk.triples.empty())
        throw usage_error("build-kg needs exactly one of --tables or --triples");
      return cmd_build_kg(bk);
    }
    if (*gen) return cmd_gen(ga);
    if (*train) {
      ta.seed_given = seed_opt->count() > 0;
      return cmd_train(ta);
    }
    if (*eval) {
      ea.shuffle = shuffle_opt->count() > 0;
      return cmd_eval(ea);
    }
    if (*trace) return cmd_trace(tr);
    if (*grad) return cmd_gradcheck(gr);
  } catch (const Error& e) {
    std::fprintf(stderr, "dkg: %s\n", e.what());
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dkg: %s\n", e.what());
    return static_cast<int>(ErrorKind::data);
  }
  return static_cast<int>(ErrorKind::usage);
}
