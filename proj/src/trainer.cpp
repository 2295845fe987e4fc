#include "dkg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <thread>

#include <json.hpp>

#include "dkg/error.hpp"
#include "dkg/rng.hpp"

namespace dkg {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw usage_error("learning_rate must be > 0");
  if (batch_size < 1) throw usage_error("batch_size must be >= 1");
  if (grad_accum_steps < 1) throw usage_error("grad_accum_steps must be >= 1");
  if (!(max_grad_norm > 0.0)) throw usage_error("max_grad_norm must be > 0");
  if (hops < 1) throw usage_error("H must be >= 1");
  if (hidden < 1) throw usage_error("d must be >= 1");
  if (top_k < 1) throw usage_error("top_k must be >= 1");
  if (!(eps > 0.0)) throw usage_error("eps must be > 0");
  if (!(path_loss_weight >= 0.0)) throw usage_error("path_loss_weight must be >= 0");
  if (beam_width < 1) throw usage_error("beam_width must be >= 1");
  if (max_decode_len < 1) throw usage_error("max_decode_len must be >= 1");
  if (workers < 1) throw usage_error("workers must be >= 1");
}

ModelSpec TrainConfig::spec() const {
  ModelSpec s;
  s.reasoner.hops = hops;
  s.reasoner.eps = eps;
  s.reasoner.top_k = top_k;
  s.mode = mode;
  s.path_loss_weight = path_loss_weight;
  return s;
}

void apply_config(TrainConfig& cfg, const ConfigMap& map) {
  map.require_known({"learning_rate", "batch_size", "grad_accum_steps", "max_epochs",
                     "max_grad_norm", "H", "d", "top_k", "eps", "mode",
                     "path_loss_weight", "seed", "beam_width", "max_decode_len",
                     "workers", "patience"});
  map.get("learning_rate", cfg.learning_rate);
  map.get("batch_size", cfg.batch_size);
  map.get("grad_accum_steps", cfg.grad_accum_steps);
  map.get("max_epochs", cfg.max_epochs);
  map.get("max_grad_norm", cfg.max_grad_norm);
  map.get("H", cfg.hops);
  map.get("d", cfg.hidden);
  map.get("top_k", cfg.top_k);
  map.get("eps", cfg.eps);
  std::string mode = to_string(cfg.mode);
  map.get("mode", mode);
  cfg.mode = parse_mode(mode);
  map.get("path_loss_weight", cfg.path_loss_weight);
  map.get("seed", cfg.seed);
  map.get("beam_width", cfg.beam_width);
  map.get("max_decode_len", cfg.max_decode_len);
  map.get("workers", cfg.workers);
  map.get("patience", cfg.patience);
}

std::vector<double> example_gradient(const ModelParams& params,
                                     const KnowledgeGraph& kg,
                                     const EntityTokenLayout& layout,
                                     const EncodedExample& ex,
                                     const ModelSpec& spec, double* loss) {
  ad::Tape tape;
  BoundParams bound = bind(tape, params, true);
  const std::string where = "example " + std::to_string(ex.index + 1);
  std::optional<ad::Var> maybe;
  try {
    maybe = combined_loss(bound, params.dims, kg, layout, ex, spec);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::numeric) throw;
    throw numeric_error(where + ": " + e.what());
  }
  ad::Var l = *maybe;
  if (!std::isfinite(l.scalar())) throw numeric_error("non-finite loss at " + where);
  tape.backward(l);
  if (loss) *loss = l.scalar();
  std::vector<double> g(params.store.total_size());
  for (std::size_t i = 0; i < params.store.n_blocks(); ++i) {
    const Tensor& gi = tape.grad(bound[i]);
    std::copy(gi.data.begin(), gi.data.end(),
              g.begin() + static_cast<std::ptrdiff_t>(params.store.block(i).offset));
  }
  return g;
}

double clip_global_norm(std::span<double> grad, double max_norm) {
  const double norm = l2_norm(grad);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (double& x : grad) x *= s;
  }
  return norm;
}

namespace {

// Runs f(i) for i in [0, n) on up to `workers` threads.
template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& f) {
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

Trainer::Trainer(const TrainConfig& cfg, const KnowledgeGraph& kg,
                 const EntityTokenLayout& layout, ModelParams init)
    : cfg_(cfg), spec_(cfg.spec()), kg_(kg), layout_(layout), params_(std::move(init)) {
  cfg_.validate();
  const std::size_t n = params_.store.total_size();
  adam_.m.assign(n, 0.0);
  adam_.v.assign(n, 0.0);
  acc_.assign(n, 0.0);
}

double Trainer::train_step(std::span<const EncodedExample> batch) {
  if (batch.empty()) throw usage_error("train_step: empty batch");
  std::vector<std::vector<double>> grads(batch.size());
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), cfg_.workers, [&](std::size_t i) {
    grads[i] = example_gradient(params_, kg_, layout_, batch[i], spec_, &losses[i]);
  });
  // Fixed reduction order keeps the sum independent of thread scheduling.
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t j = 0; j < acc_.size(); ++j) acc_[j] += grads[i][j];
    total += losses[i];
  }
  if (++pending_ == cfg_.grad_accum_steps) apply_update();
  return total / static_cast<double>(batch.size());
}

void Trainer::flush() {
  if (pending_ > 0) apply_update();
}

void Trainer::apply_update() {
  const double denom = static_cast<double>(cfg_.batch_size * cfg_.grad_accum_steps);
  for (double& g : acc_) g /= denom;
  last_norm_ = clip_global_norm(acc_, cfg_.max_grad_norm);
  last_clipped_ = l2_norm(acc_);

  constexpr double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
  ++adam_.t;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam_.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam_.t));
  auto p = params_.store.data();
  for (std::size_t j = 0; j < acc_.size(); ++j) {
    const double g = acc_[j];
    adam_.m[j] = b1 * adam_.m[j] + (1.0 - b1) * g;
    adam_.v[j] = b2 * adam_.v[j] + (1.0 - b2) * g * g;
    const double mh = adam_.m[j] / c1;
    const double vh = adam_.v[j] / c2;
    p[j] -= cfg_.learning_rate * mh / (std::sqrt(vh) + adam_eps);
  }
  std::fill(acc_.begin(), acc_.end(), 0.0);
  pending_ = 0;
}

EvalOutput evaluate(const ModelParams& params, const KnowledgeGraph& kg,
                    const TokenVocab& tokens, const EntityTokenLayout& layout,
                    const EvalInputs& data, const ModelSpec& spec,
                    std::size_t beam_width, std::size_t max_len,
                    std::size_t workers) {
  if (data.raw.size() != data.encoded.size())
    throw usage_error("evaluate: raw and encoded example counts differ");
  const EntityMatcher matcher(kg.vocabs.entities);
  std::vector<ScoredExample> scored(data.raw.size());
  EvalOutput out;
  out.predictions.resize(data.raw.size());
  parallel_for(data.raw.size(), workers, [&](std::size_t i) {
    const Prediction p =
        predict(params, kg, layout, data.encoded[i], spec, beam_width, max_len);
    out.predictions[i] = tokens.decode(p.tokens);
    const auto gold_path = strip_trailing(data.encoded[i].gold_path, kg.to_self());
    scored[i] = score_example(out.predictions[i], data.raw[i].response, p.paths,
                              gold_path, matcher);
    scored[i].reasoning_type = data.raw[i].reasoning_type.value_or("");
    scored[i].domain = data.raw[i].domain.value_or("");
  });
  out.report = summarize(scored);
  return out;
}

double selection_metric(const EvalReport& r, Mode mode) {
  return mode == Mode::full ? r.overall.em : r.overall.path_at_1;
}

TrainResult train_loop(const TrainConfig& cfg, const KnowledgeGraph& kg,
                       const TokenVocab& tokens, const EntityTokenLayout& layout,
                       EvalInputs train, EvalInputs valid, ModelParams init,
                       const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  TrainResult result;
  result.best = init;
  if (cfg.max_epochs == 0) return result;
  if (valid.encoded.empty())
    throw data_error("best-checkpoint selection needs a nonempty validation set");
  if (train.encoded.empty()) throw data_error("empty training set");

  Trainer trainer(cfg, kg, layout, std::move(init));
  const ModelSpec spec = cfg.spec();
  auto rng = substream(cfg.seed, "shuffle");
  std::vector<std::size_t> order(train.encoded.size());
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle_range(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<EncodedExample> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(train.encoded[order[i]]);
      loss_sum += trainer.train_step(batch) * static_cast<double>(batch.size());
    }
    trainer.flush();

    EpochLog row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(order.size());
    row.valid = evaluate(trainer.params(), kg, tokens, layout, valid, spec,
                         cfg.beam_width, cfg.max_decode_len, cfg.workers)
                    .report;
    row.metric = selection_metric(row.valid, cfg.mode);
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);

    // Ties go to the later epoch; only strict gains reset patience.
    const bool improved = result.best_epoch == 0 || row.metric > result.best_metric;
    if (improved || row.metric == result.best_metric) {
      result.best = trainer.params();
      result.best_metric = row.metric;
      result.best_epoch = epoch;
    }
    if (improved)
      since_best = 0;
    else if (cfg.patience > 0 && ++since_best >= cfg.patience)
      break;
  }
  return result;
}

namespace {

std::string fixed(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

}  // namespace

std::string metric_log_header() {
  return "epoch\ttrain_loss\tval_em\tval_token_f1\tval_entity_f1\tval_path@1\t"
         "val_bleu4\tmetric\n";
}

std::string metric_log_row(const EpochLog& r) {
  const auto& o = r.valid.overall;
  return std::to_string(r.epoch) + '\t' + fixed(r.train_loss) + '\t' + fixed(o.em) +
         '\t' + fixed(o.token_f1) + '\t' + fixed(o.entity_f1) + '\t' +
         fixed(o.path_at_1) + '\t' + fixed(100.0 * r.valid.bleu4) + '\t' +
         fixed(r.metric) + '\n';
}

// ---- checkpoints -------------------------------------------------------------

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

json config_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"grad_accum_steps", c.grad_accum_steps},
          {"max_epochs", c.max_epochs},
          {"max_grad_norm", c.max_grad_norm},
          {"H", c.hops},
          {"d", c.hidden},
          {"top_k", c.top_k},
          {"eps", c.eps},
          {"mode", to_string(c.mode)},
          {"path_loss_weight", c.path_loss_weight},
          {"seed", c.seed},
          {"beam_width", c.beam_width},
          {"max_decode_len", c.max_decode_len},
          {"workers", c.workers},
          {"patience", c.patience}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.grad_accum_steps = j.at("grad_accum_steps").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.max_grad_norm = j.at("max_grad_norm").get<double>();
  c.hops = j.at("H").get<std::size_t>();
  c.hidden = j.at("d").get<std::size_t>();
  c.top_k = j.at("top_k").get<std::size_t>();
  c.eps = j.at("eps").get<double>();
  c.mode = parse_mode(j.at("mode").get<std::string>());
  c.path_loss_weight = j.at("path_loss_weight").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.beam_width = j.at("beam_width").get<std::size_t>();
  c.max_decode_len = j.at("max_decode_len").get<std::size_t>();
  c.workers = j.at("workers").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  return c;
}

constexpr const char* kFormat = "dkg-checkpoint-1";

}  // namespace

void save_checkpoint(const std::string& dir, const Checkpoint& ckpt) {
  fs::create_directories(dir);
  const auto& dims = ckpt.params.dims;
  json blocks = json::array();
  for (const auto& b : ckpt.params.store.blocks())
    blocks.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});
  json manifest = {
      {"format", kFormat},
      {"dims",
       {{"vocab", dims.vocab},
        {"d", dims.hidden},
        {"n_entities", dims.n_entities},
        {"n_relations", dims.n_relations},
        {"H", dims.hops},
        {"m", dims.entity_tokens}}},
      {"hashes",
       {{"tokens", hash_hex(ckpt.tokens.content_hash())},
        {"entities", hash_hex(ckpt.entity_hash)},
        {"relations", hash_hex(ckpt.relation_hash)}}},
      {"config", config_json(ckpt.config)},
      {"blocks", blocks},
      {"best", {{"metric", ckpt.best_metric}, {"epoch", ckpt.best_epoch}}}};
  {
    std::ofstream out(fs::path(dir) / "manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out) throw data_error("cannot write manifest in " + dir);
  }
  {
    std::ofstream out(fs::path(dir) / "params.bin", std::ios::binary);
    for (double x : ckpt.params.store.data()) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      unsigned char bytes[8];
      for (int k = 0; k < 8; ++k) bytes[k] = static_cast<unsigned char>(bits >> (8 * k));
      out.write(reinterpret_cast<const char*>(bytes), 8);
    }
    if (!out) throw data_error("cannot write params.bin in " + dir);
  }
  {
    std::ofstream out(fs::path(dir) / "tokens.txt");
    for (const auto& t : ckpt.tokens.tokens()) out << t << '\n';
    if (!out) throw data_error("cannot write tokens.txt in " + dir);
  }
}

Checkpoint load_checkpoint(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw data_error("no checkpoint at " + dir);
  json manifest;
  {
    std::ifstream in(root / "manifest.json");
    if (!in) throw data_error("checkpoint " + dir + " has no manifest.json");
    try {
      manifest = json::parse(in);
    } catch (const json::exception& e) {
      throw data_error("checkpoint manifest unreadable: " + std::string(e.what()));
    }
  }
  Checkpoint ck;
  try {
    if (manifest.at("format") != kFormat)
      throw data_error("unsupported checkpoint format");
    const auto& d = manifest.at("dims");
    ModelDims dims;
    dims.vocab = d.at("vocab").get<std::size_t>();
    dims.hidden = d.at("d").get<std::size_t>();
    dims.n_entities = d.at("n_entities").get<std::size_t>();
    dims.n_relations = d.at("n_relations").get<std::size_t>();
    dims.hops = d.at("H").get<std::size_t>();
    dims.entity_tokens = d.at("m").get<std::size_t>();
    ck.params = ModelParams::create(dims);
    ck.config = config_from_json(manifest.at("config"));
    const auto& blocks = manifest.at("blocks");
    if (blocks.size() != ck.params.store.n_blocks())
      throw data_error("checkpoint block list does not match the model layout");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& b = ck.params.store.block(i);
      if (blocks[i].at("name") != b.name || blocks[i].at("rows") != b.rows ||
          blocks[i].at("cols") != b.cols)
        throw data_error("checkpoint block " + std::to_string(i) +
                         " does not match the model layout");
    }
    const auto& h = manifest.at("hashes");
    ck.entity_hash = std::stoull(h.at("entities").get<std::string>(), nullptr, 16);
    ck.relation_hash = std::stoull(h.at("relations").get<std::string>(), nullptr, 16);
    ck.best_metric = manifest.at("best").at("metric").get<double>();
    ck.best_epoch = manifest.at("best").at("epoch").get<std::size_t>();

    std::ifstream tin(root / "tokens.txt");
    if (!tin) throw data_error("checkpoint " + dir + " has no tokens.txt");
    std::string line;
    std::size_t n = 0;
    while (std::getline(tin, line)) {
      if (n < 4) {
        if (line != ck.tokens.token(static_cast<std::uint32_t>(n)))
          throw data_error("tokens.txt: reserved tokens out of place");
      } else {
        ck.tokens.add_token(line);
      }
      ++n;
    }
    if (hash_hex(ck.tokens.content_hash()) != h.at("tokens").get<std::string>())
      throw data_error("token vocabulary hash mismatch");
    if (ck.tokens.size() != dims.vocab)
      throw data_error("token vocabulary size does not match the manifest");
  } catch (const json::exception& e) {
    throw data_error("checkpoint manifest malformed: " + std::string(e.what()));
  }

  std::ifstream in(root / "params.bin", std::ios::binary);
  if (!in) throw data_error("checkpoint " + dir + " has no params.bin");
  std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  auto dst = ck.params.store.data();
  if (raw.size() != dst.size() * 8)
    throw data_error("params.bin holds " + std::to_string(raw.size()) +
                     " bytes, manifest declares " + std::to_string(dst.size() * 8));
  for (std::size_t i = 0; i < dst.size(); ++i) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[i * 8 + k]))
              << (8 * k);
    std::memcpy(&dst[i], &bits, sizeof bits);
  }
  return ck;
}

void check_compatible(const Checkpoint& ck, const KnowledgeGraph& kg) {
  if (ck.entity_hash != kg.vocabs.entities.content_hash())
    throw data_error("checkpoint was trained on a different entity vocabulary");
  if (ck.relation_hash != kg.vocabs.relations.content_hash())
    throw data_error("checkpoint was trained on a different relation vocabulary");
  if (ck.params.dims.n_entities != kg.reified.n_entities() ||
      ck.params.dims.n_relations != kg.reified.n_relations())
    throw data_error("checkpoint dimensions do not match the KG");
}

}  // namespace dkg
